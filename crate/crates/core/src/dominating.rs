//! Dominating variables `G_{X1}(X1)` and `G_ε(ε)` and the constant bundles
//! estimated from them.
//!
//! `G_{X1}(x) = E d(x, X1')`, `G_ε(y) = E C δ(y, ε')` and
//! `H_ε(x, y) = E d(F(x, y), F(x, ε'))`, with primed variables independent
//! copies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{mean_and_se, rounding_allowance, ChainModel, InitialLaw};
use crate::error::{domain, Error, Result};
use crate::rng::{label, SeedTree, StreamRng};

fn closed_form_g_eps(model: &ChainModel, y: &[f64]) -> Option<f64> {
    let law = model.scalar_noise_law()?;
    law.expected_distance(y[0], model.noise_metric.exponent).map(|v| model.c_const * v)
}

fn closed_form_g_x1(model: &ChainModel, x: &[f64]) -> Option<f64> {
    match &model.initial {
        InitialLaw::Fixed(x0) => Some(model.metric.distance(x, x0)),
        InitialLaw::Law(s) | InitialLaw::Stationary(s) => {
            s.as_scalar()?.expected_distance(x[0], model.metric.exponent)
        }
    }
}

fn g_eps_with(model: &ChainModel, y: &[f64], inner: usize, rng: &mut StreamRng) -> f64 {
    let mut yp = vec![0.0; model.noise_dim];
    let mut total = 0.0;
    for _ in 0..inner {
        model.noise.sample_into(rng, &mut yp);
        total += model.noise_metric.distance(y, &yp);
    }
    model.c_const * total / inner as f64
}

fn g_x1_with(model: &ChainModel, x: &[f64], inner: usize, rng: &mut StreamRng) -> f64 {
    let mut xp = vec![0.0; model.state_dim];
    let mut total = 0.0;
    for _ in 0..inner {
        model.initial.sample_into(rng, &mut xp);
        total += model.metric.distance(x, &xp);
    }
    total / inner as f64
}

fn inner_rng(seed: u64) -> StreamRng {
    SeedTree::new(seed).child(label::INNER).rng(0)
}

fn check_inner(inner: usize) -> Result<()> {
    if inner == 0 {
        Err(domain("inner_samples must be at least 1"))
    } else {
        Ok(())
    }
}

/// `G_ε(y)`, exact when the noise law has a closed form.
pub fn g_eps(model: &ChainModel, y: &[f64], inner: usize, seed: u64) -> Result<f64> {
    check_inner(inner)?;
    Ok(closed_form_g_eps(model, y).unwrap_or_else(|| g_eps_with(model, y, inner, &mut inner_rng(seed))))
}

/// `G_ε(y)` by Monte Carlo regardless of closed forms.
pub fn g_eps_monte_carlo(model: &ChainModel, y: &[f64], inner: usize, seed: u64) -> Result<f64> {
    check_inner(inner)?;
    Ok(g_eps_with(model, y, inner, &mut inner_rng(seed)))
}

/// `H_ε(x, y)` by Monte Carlo.
pub fn h_eps(model: &ChainModel, x: &[f64], y: &[f64], inner: usize, seed: u64) -> Result<f64> {
    Ok(h_and_g_shared(model, x, y, inner, seed)?.h)
}

/// `G_{X1}(x)`, exact for fixed starts and scalar laws with a closed form.
pub fn g_x1(model: &ChainModel, x: &[f64], inner: usize, seed: u64) -> Result<f64> {
    check_inner(inner)?;
    Ok(closed_form_g_x1(model, x).unwrap_or_else(|| g_x1_with(model, x, inner, &mut inner_rng(seed))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharedEstimate {
    pub h: f64,
    pub g: f64,
    /// Every summand satisfied `d(F(x,y),F(x,y')) <= C δ(y,y')`.
    pub pointwise_ok: bool,
}

/// `H_ε(x, y)` and the Monte Carlo `G_ε(y)` on the same inner draws.
pub fn h_and_g_shared(model: &ChainModel, x: &[f64], y: &[f64], inner: usize, seed: u64) -> Result<SharedEstimate> {
    check_inner(inner)?;
    let mut rng = inner_rng(seed);
    let mut yp = vec![0.0; model.noise_dim];
    let (mut a, mut b) = (vec![0.0; model.state_dim], vec![0.0; model.state_dim]);
    model.apply(x, y, &mut a);
    let (mut h, mut g, mut ok) = (0.0, 0.0, true);
    for _ in 0..inner {
        model.noise.sample_into(&mut rng, &mut yp);
        model.apply(x, &yp, &mut b);
        let lhs = model.metric.distance(&a, &b);
        let rhs = model.c_const * model.noise_metric.distance(y, &yp);
        let scale: f64 = a.iter().chain(&b).chain(x).chain(y).chain(&yp).map(|v| v.abs()).sum();
        ok &= lhs <= rhs + rounding_allowance(scale).powf(model.metric.exponent);
        h += lhs;
        g += rhs;
    }
    Ok(SharedEstimate { h: h / inner as f64, g: g / inner as f64, pointwise_ok: ok })
}

/// Paired samples of `G_{X1}(X1)` and `G_ε(ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominatingSamples {
    pub x1: Vec<f64>,
    pub eps: Vec<f64>,
    pub exact_x1: bool,
    pub exact_eps: bool,
}

/// Draws `outer` values of each dominating variable; inner averages are
/// skipped when a closed form exists.
pub fn sample_dominating(model: &ChainModel, outer: usize, inner: usize, seed: u64) -> Result<DominatingSamples> {
    check_inner(inner)?;
    let tree = SeedTree::new(seed);
    let (tx, te, ti) = (tree.child(label::OUTER_X1), tree.child(label::OUTER_EPS), tree.child(label::INNER));
    let mut probe_x = vec![0.0; model.state_dim];
    model.initial.sample_into(&mut tx.rng(0), &mut probe_x);
    let mut probe_y = vec![0.0; model.noise_dim];
    model.noise.sample_into(&mut te.rng(0), &mut probe_y);
    let exact_x1 = closed_form_g_x1(model, &probe_x).is_some();
    let exact_eps = closed_form_g_eps(model, &probe_y).is_some();
    let pairs: Vec<(f64, f64)> = (0..outer as u64)
        .into_par_iter()
        .map(|i| {
            let mut x = vec![0.0; model.state_dim];
            model.initial.sample_into(&mut tx.rng(i), &mut x);
            let mut y = vec![0.0; model.noise_dim];
            model.noise.sample_into(&mut te.rng(i), &mut y);
            let gx = closed_form_g_x1(model, &x)
                .unwrap_or_else(|| g_x1_with(model, &x, inner, &mut ti.child(0).rng(i)));
            let ge = closed_form_g_eps(model, &y)
                .unwrap_or_else(|| g_eps_with(model, &y, inner, &mut ti.child(1).rng(i)));
            (gx, ge)
        })
        .collect();
    let (x1, eps) = pairs.into_iter().unzip();
    Ok(DominatingSamples { x1, eps, exact_x1, exact_eps })
}

/// `E Z^p` with its standard error.
pub fn moment(samples: &[f64], p: f64) -> (f64, f64) {
    let powered: Vec<f64> = samples.iter().map(|z| z.abs().powf(p)).collect();
    mean_and_se(&powered)
}

/// `sup_x x^p P(Z > x)` for the empirical law of `samples`.
pub fn weak_moment(samples: &[f64], p: f64) -> f64 {
    let mut sorted: Vec<f64> = samples.iter().map(|z| z.abs()).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let m = sorted.len() as f64;
    let mut best = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let z = sorted[i];
        // Include all ties: P(Z > x) for x just below z counts every z_j >= z.
        while i + 1 < sorted.len() && sorted[i + 1] == z {
            i += 1;
        }
        best = best.max(z.powf(p) * (i + 1) as f64 / m);
        i += 1;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    /// `E exp(a Z)`.
    pub value: f64,
    pub log_value: f64,
    /// Share of the largest summand in the empirical average.
    pub max_share: f64,
    pub fragile: bool,
}

pub fn laplace(samples: &[f64], a: f64) -> LaplaceEstimate {
    let zmax = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum_scaled: f64 = samples.iter().map(|z| (a * (z - zmax)).exp()).sum();
    let log_sum = a * zmax + sum_scaled.ln();
    let log_value = log_sum - (samples.len() as f64).ln();
    let max_share = 1.0 / sum_scaled;
    LaplaceEstimate { value: log_value.exp(), log_value, max_share, fragile: max_share > 0.5 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub x1: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub p: f64,
    pub value: PairEstimate,
    pub std_error: PairEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakMomentEntry {
    pub p: f64,
    /// `‖Z‖_{w,p}^p`.
    pub value: PairEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEntry {
    pub a: f64,
    pub x1: LaplaceEstimate,
    pub eps: LaplaceEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominatingStats {
    pub model_id: String,
    pub moments: Vec<MomentEntry>,
    pub weak_moments: Vec<WeakMomentEntry>,
    pub laplace: Vec<LaplaceEntry>,
    pub outer_samples: usize,
    /// Inner draws per outer sample; 0 where a closed form was used.
    pub inner_samples_x1: usize,
    pub inner_samples_eps: usize,
    pub seed: u64,
}

impl DominatingStats {
    pub fn moment(&self, p: f64) -> Option<PairEstimate> {
        self.moments.iter().find(|e| e.p == p).map(|e| e.value)
    }

    pub fn weak_moment(&self, p: f64) -> Option<PairEstimate> {
        self.weak_moments.iter().find(|e| e.p == p).map(|e| e.value)
    }

    pub fn laplace(&self, a: f64) -> Option<&LaplaceEntry> {
        self.laplace.iter().find(|e| e.a == a)
    }
}

pub fn stats_from_samples(
    model_id: &str,
    samples: &DominatingSamples,
    p_list: &[f64],
    a_list: &[f64],
    inner: usize,
    seed: u64,
) -> Result<DominatingStats> {
    if let Some(p) = p_list.iter().find(|&&p| !(p >= 1.0 && p.is_finite())) {
        return Err(domain(format!("moment orders must be finite and >= 1, got {p}")));
    }
    if let Some(a) = a_list.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(domain(format!("Laplace parameters must be positive, got {a}")));
    }
    let pair = |f: &dyn Fn(&[f64]) -> f64| PairEstimate { x1: f(&samples.x1), eps: f(&samples.eps) };
    let moments = p_list
        .iter()
        .map(|&p| MomentEntry {
            p,
            value: pair(&|s| moment(s, p).0),
            std_error: pair(&|s| moment(s, p).1),
        })
        .collect();
    let weak_moments = p_list
        .iter()
        .map(|&p| WeakMomentEntry { p, value: pair(&|s| weak_moment(s, p)) })
        .collect();
    let laplace = a_list
        .iter()
        .map(|&a| LaplaceEntry { a, x1: laplace(&samples.x1, a), eps: laplace(&samples.eps, a) })
        .collect();
    Ok(DominatingStats {
        model_id: model_id.to_owned(),
        moments,
        weak_moments,
        laplace,
        outer_samples: samples.x1.len(),
        inner_samples_x1: if samples.exact_x1 { 0 } else { inner },
        inner_samples_eps: if samples.exact_eps { 0 } else { inner },
        seed,
    })
}

/// Plug-in moments, weak moments and Laplace transforms of both dominating
/// variables.
pub fn estimate_stats(
    model: &ChainModel,
    p_list: &[f64],
    a_list: &[f64],
    outer: usize,
    inner: usize,
    seed: u64,
) -> Result<DominatingStats> {
    if outer == 0 {
        return Err(domain("outer_samples must be at least 1"));
    }
    let samples = sample_dominating(model, outer, inner, seed)?;
    stats_from_samples(&model.id, &samples, p_list, a_list, inner, seed)
}

pub const FIT_MIN_SAMPLES: usize = 1000;
pub const FIT_GRID_RATIO: f64 = 1.05;
pub const FIT_GRID_MIN: f64 = 1e-9;
pub const FIT_GRID_MAX: f64 = 1e9;

fn factorial(k: usize) -> f64 {
    (2..=k).map(|i| i as f64).product()
}

/// Fits `E Z^k <= k!/2 V M^(k-2)` for `k = 2..=k_max` with `V = E Z^2` and
/// the smallest admissible `M` on a geometric grid.
pub fn bernstein_fit(samples: &[f64], k_max: usize) -> Result<(f64, f64)> {
    if k_max < 3 {
        return Err(domain(format!("k_max must be at least 3, got {k_max}")));
    }
    if samples.len() < FIT_MIN_SAMPLES {
        return Err(Error::InsufficientSamples { required: FIT_MIN_SAMPLES, got: samples.len() });
    }
    let m: Vec<f64> = (0..=k_max).map(|k| moment(samples, k as f64).0).collect();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::HeavyTail { ceiling: FIT_GRID_MAX });
    }
    let v = m[2];
    if v == 0.0 {
        return Ok((0.0, FIT_GRID_MIN));
    }
    let admissible = |big_m: f64| (3..=k_max).all(|k| m[k] <= factorial(k) / 2.0 * v * big_m.powi(k as i32 - 2));
    let target = (3..=k_max)
        .map(|k| (2.0 * m[k] / (factorial(k) * v)).powf(1.0 / (k as f64 - 2.0)))
        .fold(0.0, f64::max);
    let mut j = if target > FIT_GRID_MIN {
        ((target / FIT_GRID_MIN).ln() / FIT_GRID_RATIO.ln()).floor().max(0.0) as i32
    } else {
        0
    };
    loop {
        let big_m = FIT_GRID_MIN * FIT_GRID_RATIO.powi(j);
        if big_m > FIT_GRID_MAX {
            return Err(Error::HeavyTail { ceiling: FIT_GRID_MAX });
        }
        if admissible(big_m) {
            // Step back in case rounding in the target overshot.
            while j > 0 && admissible(FIT_GRID_MIN * FIT_GRID_RATIO.powi(j - 1)) {
                j -= 1;
            }
            return Ok((v, FIT_GRID_MIN * FIT_GRID_RATIO.powi(j)));
        }
        j += 1;
    }
}

/// Exponential-moment constants `(K1, K2)` for a stationary start from
/// `E exp(a C δ(ε, y0)) <= A` and `drift = d(F(x0, y0), x0)`.
pub fn stationary_transfer_cramer(a_y0: f64, rho: f64, a: f64, drift: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&rho) {
        return Err(domain(format!("rho must lie in [0, 1), got {rho}")));
    }
    if !(a_y0 >= 1.0) || !(a > 0.0) || !(drift >= 0.0) {
        return Err(domain("need A(y0) >= 1, a > 0 and drift >= 0"));
    }
    let k2 = a_y0 * a_y0;
    let k1 = (2.0 / (1.0 - rho) * a_y0.ln() + 2.0 * a * drift / (1.0 - rho)).exp();
    Ok((k1, k2))
}

/// Bernstein constants `(V1, V2, M)` for a stationary start from
/// `E (C δ(ε, y0))^k <= k!/2 A B^(k-2)` at a fixed pair `F(x0, y0) = x0`.
pub fn stationary_transfer_bernstein(a_y0: f64, b_y0: f64, rho: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..1.0).contains(&rho) {
        return Err(domain(format!("rho must lie in [0, 1), got {rho}")));
    }
    if !(a_y0 > 0.0 && b_y0 > 0.0) {
        return Err(domain("need A(y0) > 0 and B(y0) > 0"));
    }
    let s = 1.0 - rho;
    Ok((4.0 * a_y0 / (s * s), 4.0 * a_y0, 2.0 * b_y0 / s))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryMomentBound {
    pub bound: f64,
    pub bound_se: f64,
    /// `E H(d(X, x0))` under the stationary law.
    pub direct: f64,
    pub direct_se: f64,
    /// Series terms kept; the tail beyond has weight below `1e-12`.
    pub terms: usize,
    pub truncated: bool,
}

/// Monte Carlo comparison of `E H(d(X, x0))` with
/// `E H(Σ_i ρ^i (d(F(x0, y0), x0) + C δ(ε_{i+1}, y0)))`.
pub fn stationary_moment_bound(
    model: &ChainModel,
    h: &(dyn Fn(f64) -> f64 + Sync),
    x0: &[f64],
    y0: &[f64],
    samples: usize,
    seed: u64,
) -> Result<StationaryMomentBound> {
    if !model.initial.is_stationary() {
        return Err(Error::Config("stationary moment bound needs a stationary initial law".into()));
    }
    if samples < 2 {
        return Err(domain("need at least 2 samples"));
    }
    let mut fx0 = vec![0.0; model.state_dim];
    model.apply(x0, y0, &mut fx0);
    let drift = model.metric.distance(&fx0, x0);
    let terms = if model.rho == 0.0 { 1 } else { (1e-12f64.ln() / model.rho.ln()).ceil() as usize + 1 };
    let tree = SeedTree::new(seed).child(label::STATIONARY);
    let pairs: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = tree.child(0).rng(r);
            let mut y = vec![0.0; model.noise_dim];
            let (mut series, mut w) = (0.0, 1.0);
            for _ in 0..terms {
                model.noise.sample_into(&mut rng, &mut y);
                series += w * (drift + model.c_const * model.noise_metric.distance(&y, y0));
                w *= model.rho;
            }
            let mut x = vec![0.0; model.state_dim];
            model.initial.sample_into(&mut tree.child(1).rng(r), &mut x);
            (h(series), h(model.metric.distance(&x, x0)))
        })
        .collect();
    let (bound_vals, direct_vals): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (bound, bound_se) = mean_and_se(&bound_vals);
    let (direct, direct_se) = mean_and_se(&direct_vals);
    Ok(StationaryMomentBound { bound, bound_se, direct, direct_se, terms, truncated: model.rho > 0.0 })
}
