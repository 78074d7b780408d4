//! End-to-end dominance experiments described by a JSON document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{Bundle, BoundParams, Family, Horizon, TailBound};
use crate::chain::{ChainModel, ModelSpec};
use crate::dominating::{bernstein_fit, sample_dominating, stats_from_samples, DominatingStats};
use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::verify::{check_dominance, estimate_mean, tail_curve, write_atomic, MeanEstimate, VerificationReport, Verdict};

/// Bound families the `estimate` directive can populate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatedFamily {
    Bernstein,
    Cramer,
    WeakFukNagaev,
    Fuk,
}

fn default_outer() -> usize {
    20_000
}
fn default_inner() -> usize {
    1_000
}
fn default_p() -> f64 {
    3.0
}
fn default_a() -> f64 {
    1.0
}
fn default_k_max() -> usize {
    8
}
fn default_inflate() -> f64 {
    3.0
}

/// Estimate the constants from samples of the dominating variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    pub families: Vec<EstimatedFamily>,
    #[serde(default = "default_outer")]
    pub outer: usize,
    #[serde(default = "default_inner")]
    pub inner: usize,
    /// Moment order for the Fuk and weak Fuk–Nagaev bundles.
    #[serde(default = "default_p")]
    pub p: f64,
    /// Laplace parameter for the Cramér bundle.
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Standard errors added to every plug-in moment.
    #[serde(default = "default_inflate")]
    pub inflate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstantsSpec {
    Bundles(Vec<Bundle>),
    Estimate(EstimateSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSpec {
    List(Vec<f64>),
    /// `x = u √V` for `u = u_step, 2 u_step, ..., u_max`.
    Scaled { u_step: f64, u_max: f64 },
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec::Scaled { u_step: 0.25, u_max: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Report CSV, relative to the config file.
    pub report: PathBuf,
    /// Summary JSON, relative to the config file.
    pub summary: PathBuf,
}

fn default_alpha() -> f64 {
    0.001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub functional: FunctionalSpec,
    pub constants: ConstantsSpec,
    pub n: usize,
    pub replications: usize,
    /// Replications for the centering pool; defaults to `replications`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_replications: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub thresholds: ThresholdSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Restrict the check to these families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<Family>>,
    /// Per-family multipliers, for negative controls.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bound_scale: BTreeMap<Family, f64>,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.replications == 0 || self.mean_replications == Some(0) {
            return bad("replication counts must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if let ThresholdSpec::Scaled { u_step, u_max } = self.thresholds {
            if !(u_step > 0.0 && u_max >= u_step && u_max / u_step <= 1e6) {
                return bad("threshold grid needs 0 < u_step <= u_max");
            }
        }
        if self.bound_scale.values().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("bound scales must be positive");
        }
        if let ConstantsSpec::Estimate(e) = &self.constants {
            if e.families.is_empty() {
                return bad("estimate directive lists no families");
            }
        }
        Ok(())
    }
}

/// Constants produced by the `estimate` directive, with the statistics
/// they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimated {
    pub bundles: Vec<Bundle>,
    pub stats: DominatingStats,
}

/// Builds bound bundles from samples of the dominating variables.
/// Every moment is inflated by `inflate` standard errors; Laplace
/// transforms are floored at 1 and rejected when fragile.
pub fn estimate_bundles(model: &ChainModel, spec: &EstimateSpec, seed: u64) -> Result<Estimated> {
    let samples = sample_dominating(model, spec.outer, spec.inner, seed)?;
    let p = spec.p;
    let stats = stats_from_samples(&model.id, &samples, &[2.0, p], &[spec.a], spec.inner, seed)?;
    let upper = |q: f64| -> (f64, f64) {
        let e = stats.moments.iter().find(|e| e.p == q).expect("requested order");
        (e.value.x1 + spec.inflate * e.std_error.x1, e.value.eps + spec.inflate * e.std_error.eps)
    };
    let (v1, v2) = upper(2.0);
    let mut bundles = Vec::new();
    for fam in &spec.families {
        match fam {
            EstimatedFamily::Bernstein => {
                let (fv1, m1) = bernstein_fit(&samples.x1, spec.k_max)?;
                let (fv2, m2) = bernstein_fit(&samples.eps, spec.k_max)?;
                bundles.push(Bundle::Bernstein { v1: v1.max(fv1), v2: v2.max(fv2), m: m1.max(m2) });
            }
            EstimatedFamily::Cramer => {
                let entry = stats.laplace(spec.a).expect("requested parameter");
                if entry.x1.fragile || entry.eps.fragile {
                    return Err(Error::Config(format!(
                        "Laplace transform at a = {} is dominated by one sample; choose a smaller a",
                        spec.a
                    )));
                }
                let se = |s: &[f64]| {
                    let e: Vec<f64> = s.iter().map(|z| (spec.a * z).exp()).collect();
                    crate::chain::mean_and_se(&e).1
                };
                let k1 = (entry.x1.value + spec.inflate * se(&samples.x1)).max(1.0);
                let k2 = (entry.eps.value + spec.inflate * se(&samples.eps)).max(1.0);
                bundles.push(Bundle::Cramer { a: spec.a, k1, k2 });
            }
            EstimatedFamily::WeakFukNagaev => {
                let w = stats.weak_moment(p).expect("requested order");
                bundles.push(Bundle::WeakFukNagaev { v1, v2, p, a1: w.x1, a2: w.eps, level: Default::default() });
            }
            EstimatedFamily::Fuk => {
                let (a1, a2) = upper(p);
                bundles.push(Bundle::Fuk { v1, v2, p, a1, a2 });
            }
        }
    }
    Ok(Estimated { bundles, stats })
}

/// `V` of the first bundle carrying second-moment constants.
pub fn variance_of(h: &Horizon, bundles: &[Bundle]) -> Option<f64> {
    bundles.iter().find_map(|b| match *b {
        Bundle::Bernstein { v1, v2, .. }
        | Bundle::Bounded { v1, v2, .. }
        | Bundle::FukNagaev { v1, v2, .. }
        | Bundle::WeakFukNagaev { v1, v2, .. }
        | Bundle::Fuk { v1, v2, .. }
        | Bundle::Rosenthal { v1, v2, .. } => Some(h.variance(v1, v2)),
        _ => None,
    })
}

pub fn thresholds(spec: &ThresholdSpec, variance: Option<f64>) -> Result<Vec<f64>> {
    match spec {
        ThresholdSpec::List(v) => {
            if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Config("thresholds must be finite and sorted".into()));
            }
            Ok(v.clone())
        }
        ThresholdSpec::Scaled { u_step, u_max } => {
            let v = variance
                .filter(|v| *v > 0.0)
                .ok_or_else(|| Error::Config("scaled thresholds need a bundle with positive variance".into()))?;
            let steps = (u_max / u_step + 1e-9).floor() as usize;
            Ok((1..=steps).map(|i| i as f64 * u_step * v.sqrt()).collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub pass: usize,
    pub fail: usize,
    pub unresolved: usize,
    pub inapplicable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub global_verdict: Verdict,
    pub verdict_counts: VerdictCounts,
    pub seed: u64,
    pub center: MeanEstimate,
    pub widening: f64,
    pub params: BoundParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<DominatingStats>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: VerificationReport,
    pub summary: Summary,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

const ESTIMATE_STREAM: u64 = 0x4553_5449;

/// Runs the experiment with `seed` (the config seed unless overridden).
pub fn run(config: &ExperimentConfig, seed: u64) -> Result<Outcome> {
    config.validate()?;
    let model = config.model.build()?;
    let functional = config.functional.build();
    functional.check(&model)?;
    let (bundles, stats) = match &config.constants {
        ConstantsSpec::Bundles(b) => (b.clone(), None),
        ConstantsSpec::Estimate(spec) => {
            let est = estimate_bundles(&model, spec, seed ^ ESTIMATE_STREAM)?;
            (est.bundles, Some(est.stats))
        }
    };
    let params = BoundParams { n: config.n, rho: model.rho, bundles };
    let horizon = params.horizon()?;
    let mut bounds: Vec<TailBound> = params.tail_bounds()?;
    if let Some(keep) = &config.families {
        bounds.retain(|b| keep.contains(&b.family));
    }
    let bounds: Vec<TailBound> = bounds
        .into_iter()
        .map(|b| match config.bound_scale.get(&b.family) {
            Some(&s) => b.scaled(s),
            None => b,
        })
        .collect();
    let xs = thresholds(&config.thresholds, variance_of(&horizon, &params.bundles))?;
    let r_mean = config.mean_replications.unwrap_or(config.replications);
    let center = estimate_mean(&functional, &model, config.n, r_mean, seed)?;
    let curve = tail_curve(&functional, &model, config.n, config.replications, &xs, seed, center)?;
    let report = check_dominance(&curve, &bounds, config.alpha)?;
    let mut counts = VerdictCounts::default();
    for row in &report.rows {
        match row.verdict {
            Verdict::Pass => counts.pass += 1,
            Verdict::Fail => counts.fail += 1,
            Verdict::Unresolved => counts.unresolved += 1,
            Verdict::Inapplicable => counts.inapplicable += 1,
        }
    }
    let summary = Summary {
        global_verdict: report.global,
        verdict_counts: counts,
        seed,
        center,
        widening: curve.widening,
        params,
        stats,
        config: config.clone(),
    };
    Ok(Outcome { report, summary })
}

/// Runs the experiment and writes the report CSV and summary JSON next to
/// the config file.
pub fn run_and_write(config: &ExperimentConfig, seed: u64, base: &Path) -> Result<Outcome> {
    let outcome = run(config, seed)?;
    write_atomic(&base.join(&config.output.report), outcome.report.to_csv().as_bytes())?;
    let mut json = serde_json::to_string_pretty(&outcome.summary)?;
    json.push('\n');
    write_atomic(&base.join(&config.output.summary), json.as_bytes())?;
    Ok(outcome)
}
