//! Monte Carlo estimation of the law of `S_n = f(X_1..X_n) - E f` and
//! dominance checks against the bound families.

use std::fmt::Write as _;
use std::io::Write as _;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::bounds::{bernstein_mgf, cramer_mgf, rio_mgf, BernsteinConstants, CramerConstants, Family, RioConstants, TailBound};
use crate::chain::{mean_and_se, ChainModel};
use crate::dominating::laplace;
use crate::error::{domain, Error, Result};
use crate::functional::Functional;
use crate::rng::{label, SeedTree};
use crate::wasserstein::w1_empirical_vs_cdf;

/// Values of the functional on replications `range` of the stream `tag`.
/// Replication `r` always uses stream `r`, so any partition of the index
/// range reproduces the same values.
pub fn sample_functional(
    functional: &Functional,
    model: &ChainModel,
    n: usize,
    range: Range<u64>,
    seed: u64,
    tag: u64,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    functional.check(model)?;
    let tree = SeedTree::new(seed).child(tag);
    let len = n * model.state_dim;
    range
        .into_par_iter()
        .map_init(
            || (vec![0.0; len], Vec::with_capacity(n)),
            |(states, scratch), r| {
                let mut rng = tree.rng(r);
                model.simulate_into(&mut rng, states)?;
                functional.eval_states(states, model, scratch)
            },
        )
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: usize,
}

/// Mean of `f` over `r_mean` trajectories drawn from a stream disjoint from
/// the tail-estimation stream.
pub fn estimate_mean(functional: &Functional, model: &ChainModel, n: usize, r_mean: usize, seed: u64) -> Result<MeanEstimate> {
    if r_mean == 0 {
        return Err(domain("need at least one replication"));
    }
    let values = sample_functional(functional, model, n, 0..r_mean as u64, seed, label::MEAN)?;
    let (mean, std_error) = mean_and_se(&values);
    Ok(MeanEstimate { mean, std_error, replications: r_mean })
}

/// Width added to the count region to absorb centering error.
pub const CENTERING_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub thresholds: Vec<f64>,
    /// `#{S ≥ x - w}` with `w = 4 SE(mean)`.
    pub upper: Vec<u64>,
    /// `#{-S ≥ x - w}`.
    pub lower: Vec<u64>,
    /// `#{|S| ≥ x - w}`.
    pub abs: Vec<u64>,
    pub replications: u64,
    pub center: MeanEstimate,
    pub widening: f64,
    pub seed: u64,
    pub n: usize,
}

impl TailCurve {
    /// Counts for the given deviations `f - center`.
    pub fn from_deviations(deviations: &[f64], thresholds: &[f64], center: MeanEstimate, seed: u64, n: usize) -> Result<Self> {
        if thresholds.windows(2).any(|w| w[0] > w[1]) || thresholds.iter().any(|x| !x.is_finite()) {
            return Err(domain("thresholds must be finite and sorted"));
        }
        let widening = CENTERING_SIGMAS * center.std_error;
        let count = |pred: &dyn Fn(f64) -> bool| deviations.iter().filter(|&&d| pred(d)).count() as u64;
        let mut curve = TailCurve {
            thresholds: thresholds.to_vec(),
            upper: Vec::with_capacity(thresholds.len()),
            lower: Vec::with_capacity(thresholds.len()),
            abs: Vec::with_capacity(thresholds.len()),
            replications: deviations.len() as u64,
            center,
            widening,
            seed,
            n,
        };
        for &x in thresholds {
            let level = x - widening;
            curve.upper.push(count(&|d| d >= level));
            curve.lower.push(count(&|d| -d >= level));
            curve.abs.push(count(&|d| d.abs() >= level));
        }
        Ok(curve)
    }

    /// Sum of counts from disjoint replication ranges.
    pub fn merge(&self, other: &TailCurve) -> Result<TailCurve> {
        if self.thresholds != other.thresholds || self.center != other.center || self.n != other.n {
            return Err(domain("tail curves differ in thresholds, centering or n"));
        }
        let add = |a: &[u64], b: &[u64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        Ok(TailCurve {
            upper: add(&self.upper, &other.upper),
            lower: add(&self.lower, &other.lower),
            abs: add(&self.abs, &other.abs),
            replications: self.replications + other.replications,
            ..self.clone()
        })
    }

    /// Count relevant to a bound: `|S|` for two-sided families, the larger
    /// of the two one-sided counts otherwise.
    pub fn count_for(&self, i: usize, two_sided: bool) -> u64 {
        if two_sided {
            self.abs[i]
        } else {
            self.upper[i].max(self.lower[i])
        }
    }
}

/// Deviations `f - center` for replications `range` of the tail stream.
pub fn deviations(
    functional: &Functional,
    model: &ChainModel,
    n: usize,
    range: Range<u64>,
    seed: u64,
    center: f64,
) -> Result<Vec<f64>> {
    let mut v = sample_functional(functional, model, n, range, seed, label::TAIL)?;
    v.iter_mut().for_each(|x| *x -= center);
    Ok(v)
}

pub fn tail_curve_range(
    functional: &Functional,
    model: &ChainModel,
    n: usize,
    range: Range<u64>,
    thresholds: &[f64],
    seed: u64,
    center: MeanEstimate,
) -> Result<TailCurve> {
    let devs = deviations(functional, model, n, range, seed, center.mean)?;
    TailCurve::from_deviations(&devs, thresholds, center, seed, n)
}

pub fn tail_curve(
    functional: &Functional,
    model: &ChainModel,
    n: usize,
    replications: usize,
    thresholds: &[f64],
    seed: u64,
    center: MeanEstimate,
) -> Result<TailCurve> {
    tail_curve_range(functional, model, n, 0..replications as u64, thresholds, seed, center)
}

fn bisect(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    // f increasing on [0, 1].
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    hi
}

/// One-sided exact upper `1 - α` limit for a binomial proportion with `k`
/// successes in `n` trials.
pub fn clopper_pearson_upper(k: u64, n: u64, alpha: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if k == 0 {
        // (1 - p)^n = α.
        return -(alpha.ln() / n as f64).exp_m1();
    }
    // P(Bin(n, p) <= k) = 1 - I_p(k + 1, n - k) = α.
    bisect(|p| beta_reg((k + 1) as f64, (n - k) as f64, p), 1.0 - alpha)
}

/// One-sided exact lower `1 - α` limit.
pub fn clopper_pearson_lower(k: u64, n: u64, alpha: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k >= n {
        return alpha.powf(1.0 / n as f64);
    }
    // P(Bin(n, p) >= k) = I_p(k, n - k + 1) = α.
    bisect(|p| beta_reg(k as f64, (n - k + 1) as f64, p), alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The bound rejects this threshold.
    Inapplicable,
    /// The confidence interval straddles the bound.
    Unresolved,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inapplicable => "inapplicable",
            Verdict::Unresolved => "unresolved",
        }
    }
}

/// Verdict for one threshold: pass when the upper limit sits below the
/// bound, fail when the lower limit sits above it, unresolved otherwise.
pub fn verdict(k: u64, r: u64, bound: f64, alpha: f64) -> Verdict {
    if clopper_pearson_upper(k, r, alpha) <= bound {
        Verdict::Pass
    } else if clopper_pearson_lower(k, r, alpha) > bound {
        Verdict::Fail
    } else {
        Verdict::Unresolved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: Family,
    pub x: f64,
    pub emp_tail: f64,
    pub cp_upper: f64,
    pub cp_lower: f64,
    pub bound: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub alpha: f64,
    pub replications: u64,
    pub rows: Vec<ReportRow>,
    /// Fail if any row fails; pass if every family also has at least one
    /// passing row; unresolved otherwise.
    pub global: Verdict,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.global == Verdict::Pass
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("family,x,emp_tail,cp_upper,bound,verdict\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.family,
                fmt_f64(r.x),
                fmt_f64(r.emp_tail),
                fmt_f64(r.cp_upper),
                fmt_f64(r.bound),
                r.verdict.name()
            );
        }
        s
    }
}

pub fn check_dominance(curve: &TailCurve, bounds: &[TailBound], alpha: f64) -> Result<VerificationReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let r = curve.replications;
    if r == 0 {
        return Err(domain("tail curve has no replications"));
    }
    let mut rows = Vec::new();
    for b in bounds {
        for (i, &x) in curve.thresholds.iter().enumerate() {
            let k = curve.count_for(i, b.two_sided());
            let emp_tail = k as f64 / r as f64;
            let cp_upper = clopper_pearson_upper(k, r, alpha);
            let cp_lower = clopper_pearson_lower(k, r, alpha);
            let (bound, verdict) = match b.value(x) {
                Ok(v) => (v, verdict(k, r, v, alpha)),
                Err(_) => (f64::NAN, Verdict::Inapplicable),
            };
            rows.push(ReportRow { family: b.family, x, emp_tail, cp_upper, cp_lower, bound, verdict });
        }
    }
    let certified = |b: &TailBound| rows.iter().any(|r| r.family == b.family && r.verdict == Verdict::Pass);
    let global = if rows.iter().any(|r| r.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if bounds.iter().all(certified) {
        Verdict::Pass
    } else {
        Verdict::Unresolved
    };
    Ok(VerificationReport { alpha, replications: r, rows, global })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MgfBound {
    Bernstein { v: f64, delta: f64 },
    Cramer { k: f64, delta: f64 },
    Rio { d: f64, m2: f64 },
}

impl MgfBound {
    pub fn value(&self, t: f64) -> Result<f64> {
        match *self {
            MgfBound::Bernstein { v, delta } => bernstein_mgf(t, BernsteinConstants { v, delta }),
            MgfBound::Cramer { k, delta } => cramer_mgf(t, CramerConstants { k, delta }),
            MgfBound::Rio { d, m2 } => rio_mgf(t, RioConstants { d, m2 }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfRow {
    pub t: f64,
    pub sign: i8,
    pub empirical: f64,
    pub std_error: f64,
    pub fragile: bool,
    pub bound: f64,
    pub verdict: Verdict,
}

/// Inflation applied to the standard error of the empirical transform.
pub const MGF_SIGMAS: f64 = 3.0;

/// Empirical `E exp(±t S)` against an MGF bound. Estimates dominated by a
/// single replication are marked inapplicable.
pub fn mgf_check(devs: &[f64], center_se: f64, t_grid: &[f64], bound: &MgfBound) -> Result<Vec<MgfRow>> {
    let mut rows = Vec::new();
    for &t in t_grid {
        let b = bound.value(t)?;
        for sign in [1i8, -1] {
            let scaled: Vec<f64> = devs.iter().map(|d| f64::from(sign) * d).collect();
            let est = laplace(&scaled, t);
            let exps: Vec<f64> = scaled.iter().map(|d| (t * d).exp()).collect();
            let (_, se) = mean_and_se(&exps);
            // Centering error e^{t·4SE} multiplies the true transform.
            let centering = (t * CENTERING_SIGMAS * center_se).exp();
            let verdict = if est.fragile || !b.is_finite() {
                Verdict::Inapplicable
            } else if est.value <= (b + MGF_SIGMAS * se) * centering {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            rows.push(MgfRow { t, sign, empirical: est.value, std_error: se, fragile: est.fragile, bound: b, verdict });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    /// `√n E W1(μ_n, μ)`.
    pub scaled_mean: f64,
    pub scaled_se: f64,
}

/// `√n E W1(μ_n, μ)` for each `n`, over `r` stationary trajectories.
pub fn w1_rate_scan(model: &ChainModel, n_list: &[usize], r: usize, seed: u64) -> Result<Vec<RateRow>> {
    let cdf = model.invariant.as_ref().ok_or_else(|| Error::Config(format!("model {} has no invariant CDF", model.id)))?;
    if !model.initial.is_stationary() {
        return Err(Error::Config("the rate scan needs a stationary start".into()));
    }
    if model.state_dim != 1 {
        return Err(Error::Config("the rate scan needs a scalar chain".into()));
    }
    let tree = SeedTree::new(seed).child(label::RATES);
    let mut out = Vec::with_capacity(n_list.len());
    for (j, &n) in n_list.iter().enumerate() {
        if n == 0 {
            return Err(domain("n must be at least 1"));
        }
        let sub = tree.child(j as u64);
        let values: Vec<f64> = (0..r as u64)
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |states, i| {
                    let mut rng = sub.rng(i);
                    model.simulate_into(&mut rng, states)?;
                    states.sort_by(f64::total_cmp);
                    Ok((n as f64).sqrt() * w1_empirical_vs_cdf(states, cdf)?)
                },
            )
            .collect::<Result<_>>()?;
        let (scaled_mean, scaled_se) = mean_and_se(&values);
        out.push(RateRow { n, scaled_mean, scaled_se });
    }
    Ok(out)
}

/// Seventeen significant digits, enough to round-trip any double.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
