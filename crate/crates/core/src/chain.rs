//! Contracting iterated random functions `X_k = F(X_{k-1}, ε_k)`.
//!
//! Trajectories are 1-indexed: `X_1` comes from the initial law and `n`
//! counts states, so a trajectory of length `n` applies `F` exactly `n - 1`
//! times.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::laws::{Cdf, Law, Sampler};
use crate::rng::{label, SeedTree, StreamRng};

pub type StepFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
    Max,
}

/// `d(a, b) = ‖a - b‖^exponent`, a metric for `exponent ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub norm: Norm,
    pub exponent: f64,
}

impl Metric {
    pub const ABS: Metric = Metric { norm: Norm::L1, exponent: 1.0 };

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        let raw = match self.norm {
            Norm::L1 => diffs.sum::<f64>(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Max => diffs.fold(0.0, f64::max),
        };
        if self.exponent == 1.0 {
            raw
        } else {
            raw.powf(self.exponent)
        }
    }
}

/// Law of `X_1`.
#[derive(Debug, Clone)]
pub enum InitialLaw {
    Fixed(Vec<f64>),
    Law(Sampler),
    /// The invariant law of the chain.
    Stationary(Sampler),
}

impl InitialLaw {
    pub fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match self {
            InitialLaw::Fixed(x) => out.copy_from_slice(x),
            InitialLaw::Law(s) | InitialLaw::Stationary(s) => s.sample_into(rng, out),
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self, InitialLaw::Stationary(_))
    }
}

#[derive(Clone)]
pub struct ChainModel {
    pub id: String,
    pub state_dim: usize,
    pub noise_dim: usize,
    pub step: Arc<StepFn>,
    pub noise: Sampler,
    pub initial: InitialLaw,
    pub metric: Metric,
    pub noise_metric: Metric,
    pub rho: f64,
    pub c_const: f64,
    pub invariant: Option<Cdf>,
}

impl fmt::Debug for ChainModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChainModel")
            .field("id", &self.id)
            .field("state_dim", &self.state_dim)
            .field("noise", &self.noise)
            .field("initial", &self.initial)
            .field("rho", &self.rho)
            .field("c_const", &self.c_const)
            .finish_non_exhaustive()
    }
}

impl ChainModel {
    /// A model with absolute-value metrics on both spaces.
    pub fn new(
        id: impl Into<String>,
        state_dim: usize,
        noise: Sampler,
        initial: InitialLaw,
        step: Arc<StepFn>,
        rho: f64,
        c_const: f64,
    ) -> Result<Self> {
        let model = Self {
            id: id.into(),
            state_dim,
            noise_dim: noise.dim(),
            step,
            noise,
            initial,
            metric: Metric::ABS,
            noise_metric: Metric::ABS,
            rho,
            c_const,
            invariant: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(domain(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.c_const > 0.0 && self.c_const.is_finite()) {
            return Err(domain(format!("C must be positive, got {}", self.c_const)));
        }
        if self.state_dim == 0 || self.noise_dim == 0 {
            return Err(domain("state and noise dimensions must be positive"));
        }
        if let InitialLaw::Fixed(x) = &self.initial {
            if x.len() != self.state_dim || x.iter().any(|v| !v.is_finite()) {
                return Err(domain("fixed start must be a finite state of the model dimension"));
            }
        }
        Ok(())
    }

    #[must_use]
    pub fn with_initial(mut self, initial: InitialLaw) -> Self {
        self.initial = initial;
        self
    }

    #[must_use]
    pub fn with_invariant(mut self, cdf: Cdf) -> Self {
        self.invariant = Some(cdf);
        self
    }

    /// Fixed start at a scalar state.
    #[must_use]
    pub fn started_at(self, x: f64) -> Self {
        self.with_initial(InitialLaw::Fixed(vec![x]))
    }

    pub fn apply(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.step)(x, y, out);
    }

    /// Fills `states` (length `n * state_dim`) with one trajectory.
    pub fn simulate_into(&self, rng: &mut StreamRng, states: &mut [f64]) -> Result<()> {
        let d = self.state_dim;
        let mut noise = vec![0.0; self.noise_dim];
        self.initial.sample_into(rng, &mut states[..d]);
        check_finite(&states[..d], 1)?;
        let n = states.len() / d;
        for k in 1..n {
            self.noise.sample_into(rng, &mut noise);
            let (done, rest) = states.split_at_mut(k * d);
            self.apply(&done[(k - 1) * d..], &noise, &mut rest[..d]);
            check_finite(&rest[..d], k + 1)?;
        }
        Ok(())
    }

    pub fn scalar_noise_law(&self) -> Option<&Law> {
        self.noise.as_scalar()
    }
}

fn check_finite(state: &[f64], step: usize) -> Result<()> {
    if state.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericOverflow { step })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub dim: usize,
    /// Row-major states `X_1, ..., X_n`.
    pub states: Vec<f64>,
    pub seed: u64,
    pub model_id: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State `X_k`, 1-indexed.
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[(k - 1) * self.dim..k * self.dim]
    }
}

pub fn simulate(model: &ChainModel, n: usize, seed: u64) -> Result<Trajectory> {
    if n == 0 {
        return Err(domain("trajectory length must be at least 1"));
    }
    let mut rng = SeedTree::new(seed).child(label::SIMULATE).rng(0);
    let mut states = vec![0.0; n * model.state_dim];
    model.simulate_into(&mut rng, &mut states)?;
    Ok(Trajectory { dim: model.state_dim, states, seed, model_id: model.id.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Forgetting {
    pub mean_distance: f64,
    pub std_error: f64,
    /// `ρ^(n-1) d(x, x')`.
    pub envelope: f64,
}

/// Runs two chains from `x` and `x_prime` on shared noise and averages
/// `d(X_n^x, X_n^x')`.
pub fn forgetting_check(
    model: &ChainModel,
    x: &[f64],
    x_prime: &[f64],
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<Forgetting> {
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    if replications < 100 {
        return Err(domain(format!("forgetting check needs at least 100 replications, got {replications}")));
    }
    if x.len() != model.state_dim || x_prime.len() != model.state_dim {
        return Err(domain("start states must match the model dimension"));
    }
    let tree = SeedTree::new(seed).child(label::FORGETTING);
    let distances: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = tree.rng(r as u64);
            let mut a = x.to_vec();
            let mut b = x_prime.to_vec();
            let mut next = vec![0.0; model.state_dim];
            let mut noise = vec![0.0; model.noise_dim];
            for step in 2..=n {
                model.noise.sample_into(&mut rng, &mut noise);
                model.apply(&a, &noise, &mut next);
                check_finite(&next, step)?;
                std::mem::swap(&mut a, &mut next);
                model.apply(&b, &noise, &mut next);
                check_finite(&next, step)?;
                std::mem::swap(&mut b, &mut next);
            }
            Ok(model.metric.distance(&a, &b))
        })
        .collect::<Result<_>>()?;
    let (mean, se) = mean_and_se(&distances);
    let envelope = model.rho.powi(n as i32 - 1) * model.metric.distance(x, x_prime);
    Ok(Forgetting { mean_distance: mean, std_error: se, envelope })
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// The same chain viewed under `d^α` and `δ^α`.
pub fn alpha_rescale(model: &ChainModel, alpha: f64) -> Result<ChainModel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut out = model.clone();
    out.id = format!("{}^alpha={alpha}", model.id);
    out.metric.exponent *= alpha;
    out.noise_metric.exponent *= alpha;
    out.rho = model.rho.powf(alpha);
    out.c_const = model.c_const.powf(alpha);
    // Distances under d^α change the Wasserstein geometry; the CDF stays valid.
    Ok(out)
}

/// Floating point allowance for inequalities that hold exactly in real
/// arithmetic but are evaluated on rounded values of magnitude `scale`.
pub(crate) fn rounding_allowance(scale: f64) -> f64 {
    64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub pairs: usize,
    pub inner: usize,
    /// Largest observed `(mean d(F(x,ε),F(x',ε)) - slack) / d(x,x')`.
    pub max_contraction_ratio: f64,
    pub contraction_ok: bool,
    pub triples: usize,
    /// Largest observed `d(F(x,y),F(x,y')) / δ(y,y')`.
    pub max_lipschitz_ratio: f64,
    pub lipschitz_ok: bool,
}

impl Certificate {
    pub fn ok(&self) -> bool {
        self.contraction_ok && self.lipschitz_ok
    }
}

fn jittered_state(model: &ChainModel, rng: &mut StreamRng, out: &mut [f64]) {
    model.initial.sample_into(rng, out);
    let steps = rng.random_range(0..4);
    let mut noise = vec![0.0; model.noise_dim];
    let mut next = vec![0.0; model.state_dim];
    for _ in 0..steps {
        model.noise.sample_into(rng, &mut noise);
        model.apply(out, &noise, &mut next);
        out.copy_from_slice(&next);
    }
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += z;
    }
}

fn magnitude(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Monte Carlo check of the one-step contraction and a pointwise check of
/// the noise Lipschitz condition on sampled states and noise values.
pub fn certify(model: &ChainModel, pairs: usize, inner: usize, seed: u64) -> Result<Certificate> {
    model.validate()?;
    let tree = SeedTree::new(seed).child(label::CERTIFY);
    let dim = model.state_dim;
    let contraction: Vec<(f64, bool)> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree.child(0).rng(i as u64);
            let mut x = vec![0.0; dim];
            let mut xp = vec![0.0; dim];
            jittered_state(model, &mut rng, &mut x);
            jittered_state(model, &mut rng, &mut xp);
            let d0 = model.metric.distance(&x, &xp);
            let mut noise = vec![0.0; model.noise_dim];
            let (mut fx, mut fxp) = (vec![0.0; dim], vec![0.0; dim]);
            let mut dists = Vec::with_capacity(inner);
            let mut scale = magnitude(&x) + magnitude(&xp);
            for _ in 0..inner {
                model.noise.sample_into(&mut rng, &mut noise);
                model.apply(&x, &noise, &mut fx);
                model.apply(&xp, &noise, &mut fxp);
                scale = scale.max(magnitude(&fx) + magnitude(&fxp) + magnitude(&noise));
                dists.push(model.metric.distance(&fx, &fxp));
            }
            let (mean, se) = mean_and_se(&dists);
            let slack = 3.0 * se + rounding_allowance(scale).powf(model.metric.exponent);
            let ratio = if d0 > 0.0 { (mean - slack).max(0.0) / d0 } else { 0.0 };
            (ratio, mean <= model.rho * d0 + slack)
        })
        .collect();
    let lipschitz: Vec<(f64, bool)> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree.child(1).rng(i as u64);
            let mut x = vec![0.0; dim];
            jittered_state(model, &mut rng, &mut x);
            let mut y = vec![0.0; model.noise_dim];
            let mut yp = vec![0.0; model.noise_dim];
            model.noise.sample_into(&mut rng, &mut y);
            model.noise.sample_into(&mut rng, &mut yp);
            let (mut a, mut b) = (vec![0.0; dim], vec![0.0; dim]);
            model.apply(&x, &y, &mut a);
            model.apply(&x, &yp, &mut b);
            let lhs = model.metric.distance(&a, &b);
            let delta = model.noise_metric.distance(&y, &yp);
            let scale = magnitude(&x) + magnitude(&a) + magnitude(&b) + magnitude(&y) + magnitude(&yp);
            let allowance = rounding_allowance(scale).powf(model.metric.exponent);
            let ratio = if delta > 0.0 { lhs / delta } else if lhs > allowance { f64::INFINITY } else { 0.0 };
            (ratio, lhs <= model.c_const * delta + allowance)
        })
        .collect();
    let fold = |v: &[(f64, bool)]| v.iter().fold((0.0f64, true), |acc, &(r, ok)| (acc.0.max(r), acc.1 && ok));
    let (max_contraction_ratio, contraction_ok) = fold(&contraction);
    let (max_lipschitz_ratio, lipschitz_ok) = fold(&lipschitz);
    Ok(Certificate {
        pairs,
        inner,
        max_contraction_ratio,
        contraction_ok,
        triples: pairs,
        max_lipschitz_ratio,
        lipschitz_ok,
    })
}

/// `X_k = ε_k`: independent draws from `law`.
pub fn iid_model(law: Law) -> Result<ChainModel> {
    law.validate()?;
    let step: Arc<StepFn> = Arc::new(|_x, y, out| out[0] = y[0]);
    let model = ChainModel::new(
        format!("iid({law:?})"),
        1,
        Sampler::Scalar(law),
        InitialLaw::Stationary(Sampler::Scalar(law)),
        step,
        0.0,
        1.0,
    )?;
    Ok(model.with_invariant(law.cdf()))
}

/// `X_k = (X_{k-1} + ε_k) / 2` with noise drawn from `law`.
pub fn half_chain(law: Law) -> Result<ChainModel> {
    law.validate()?;
    let step: Arc<StepFn> = Arc::new(|x, y, out| out[0] = 0.5 * (x[0] + y[0]));
    ChainModel::new(
        format!("half({law:?})"),
        1,
        Sampler::Scalar(law),
        InitialLaw::Fixed(vec![law.mean()]),
        step,
        0.5,
        0.5,
    )
}

/// The half chain with Bernoulli(1/2) noise, started from its uniform
/// invariant law.
pub fn half_binary_chain() -> ChainModel {
    let uniform = Law::Uniform { low: 0.0, high: 1.0 };
    let mut model = half_chain(Law::Bernoulli { p: 0.5 })
        .expect("valid constants")
        .with_initial(InitialLaw::Stationary(Sampler::Scalar(uniform)))
        .with_invariant(uniform.cdf());
    model.id = "half_binary".into();
    model
}

/// `X_k = ρ X_{k-1} + ξ_k` with `ξ_k ~ N(0, σ²)`, started stationary.
pub fn ar1_model(rho: f64, sigma: f64) -> Result<ChainModel> {
    if !(rho.abs() < 1.0) {
        return Err(domain(format!("AR coefficient must satisfy |rho| < 1, got {rho}")));
    }
    let noise = Law::Normal { mean: 0.0, sd: sigma };
    noise.validate()?;
    let stationary = Law::Normal { mean: 0.0, sd: sigma / (1.0 - rho * rho).sqrt() };
    let step: Arc<StepFn> = Arc::new(move |x, y, out| out[0] = rho * x[0] + y[0]);
    let model = ChainModel::new(
        format!("ar1(rho={rho},sigma={sigma})"),
        1,
        Sampler::Scalar(noise),
        InitialLaw::Stationary(Sampler::Scalar(stationary)),
        step,
        rho.abs(),
        1.0,
    )?;
    Ok(model.with_invariant(stationary.cdf()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ar1,
    HalfBinary,
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Fixed { x: f64 },
    Stationary,
    Law { law: Law },
}

/// JSON description of a built-in model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Noise law of the iid model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<Law>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<ChainModel> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("model {:?} needs `{name}`", self.model)))
        };
        let model = match self.model {
            ModelKind::Ar1 => ar1_model(need(self.rho, "rho")?, need(self.sigma, "sigma")?)?,
            ModelKind::HalfBinary => half_binary_chain(),
            ModelKind::Iid => iid_model(
                self.law.ok_or_else(|| Error::Config("model iid needs `law`".into()))?,
            )?,
        };
        let model = match &self.init {
            None | Some(InitSpec::Stationary) => model,
            Some(InitSpec::Fixed { x }) => model.started_at(*x),
            Some(InitSpec::Law { law }) => {
                law.validate()?;
                model.with_initial(InitialLaw::Law(Sampler::Scalar(*law)))
            }
        };
        model.validate()?;
        Ok(model)
    }
}
