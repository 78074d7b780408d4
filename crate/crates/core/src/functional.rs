//! Separately Lipschitz functionals of a trajectory.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{rounding_allowance, ChainModel, Trajectory};
use crate::error::{domain, Error, Result};
use crate::laws::DiscreteCdf;
use crate::rng::{label, SeedTree};
use crate::wasserstein::{w1_discrete, w1_empirical_vs_cdf};

/// 1-Lipschitz maps `ℝ → ℝ` for additive functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarMap {
    Identity,
    Abs,
    Clip01,
}

impl ScalarMap {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ScalarMap::Identity => x,
            ScalarMap::Abs => x.abs(),
            ScalarMap::Clip01 => x.clamp(0.0, 1.0),
        }
    }
}

/// JSON form of the built-in functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    Additive { g: ScalarMap },
    W1,
}

impl FunctionalSpec {
    pub fn build(self) -> Functional {
        match self {
            FunctionalSpec::Additive { g } => Functional::Additive(g),
            FunctionalSpec::W1 => Functional::W1VsInvariant,
        }
    }
}

pub type TrajectoryMap = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Functional {
    /// `Σ g(X_i)`.
    Additive(ScalarMap),
    /// `n W1(μ_n, μ)` against the model's invariant CDF.
    W1VsInvariant,
    /// `n W1(μ_n, ν)` against a frozen reference sample standing in for an
    /// unknown invariant law. An approximation: not exact.
    W1VsReference(Arc<DiscreteCdf>),
    /// Arbitrary map of the flattened states with declared per-coordinate
    /// Lipschitz constants.
    Custom { f: Arc<TrajectoryMap>, lipschitz: Vec<f64> },
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Additive(g) => write!(f, "Additive({g:?})"),
            Functional::W1VsInvariant => f.write_str("W1VsInvariant"),
            Functional::W1VsReference(r) => write!(f, "W1VsReference({} atoms)", r.atoms().count()),
            Functional::Custom { lipschitz, .. } => write!(f, "Custom({} coordinates)", lipschitz.len()),
        }
    }
}

impl Functional {
    pub fn custom(f: Arc<TrajectoryMap>, lipschitz: Vec<f64>) -> Result<Self> {
        if lipschitz.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
            return Err(domain("declared Lipschitz constants must lie in [0, 1]"));
        }
        Ok(Functional::Custom { f, lipschitz })
    }

    /// Builds the reference-sample mode from an unsorted sample.
    pub fn w1_vs_reference(mut sample: Vec<f64>) -> Result<Self> {
        sample.sort_by(f64::total_cmp);
        Ok(Functional::W1VsReference(Arc::new(DiscreteCdf::from_sorted_sample(&sample)?)))
    }

    /// Declared Lipschitz constant for coordinate `k` (1-indexed).
    pub fn lipschitz(&self, k: usize) -> f64 {
        match self {
            Functional::Custom { lipschitz, .. } => lipschitz.get(k - 1).copied().unwrap_or(1.0),
            _ => 1.0,
        }
    }

    /// Checks that the functional can be evaluated on `model`'s trajectories.
    pub fn check(&self, model: &ChainModel) -> Result<()> {
        match self {
            Functional::Additive(_) | Functional::W1VsReference(_) if model.state_dim != 1 => {
                Err(Error::Config("this functional needs a scalar chain".into()))
            }
            Functional::W1VsInvariant if model.state_dim != 1 => {
                Err(Error::Config("this functional needs a scalar chain".into()))
            }
            Functional::W1VsInvariant if model.invariant.is_none() => {
                Err(Error::Config(format!("model {} has no invariant CDF", model.id)))
            }
            _ => Ok(()),
        }
    }

    /// Value on flattened states. `scratch` is reused for sorting.
    pub fn eval_states(&self, states: &[f64], model: &ChainModel, scratch: &mut Vec<f64>) -> Result<f64> {
        match self {
            Functional::Additive(g) => Ok(states.iter().map(|&x| g.apply(x)).sum()),
            Functional::W1VsInvariant => {
                let cdf = model
                    .invariant
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("model {} has no invariant CDF", model.id)))?;
                sorted_copy(states, scratch);
                Ok(states.len() as f64 * w1_empirical_vs_cdf(scratch, cdf)?)
            }
            Functional::W1VsReference(reference) => {
                sorted_copy(states, scratch);
                let emp = DiscreteCdf::from_sorted_sample(scratch)?;
                Ok(states.len() as f64 * w1_discrete(&emp, reference))
            }
            Functional::Custom { f, .. } => Ok(f(states)),
        }
    }

    pub fn eval(&self, trajectory: &Trajectory, model: &ChainModel) -> Result<f64> {
        self.eval_states(&trajectory.states, model, &mut Vec::new())
    }
}

fn sorted_copy(states: &[f64], scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend_from_slice(states);
    scratch.sort_by(f64::total_cmp);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub trials: usize,
    /// Largest `|Δf| / (L_k d(x_k, x'_k))` observed.
    pub max_ratio: f64,
    pub violations: usize,
}

impl LipschitzReport {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

/// Perturbs one coordinate of simulated trajectories of length `n` and
/// checks `|f(x) - f(x')| <= L_k d(x_k, x'_k)` up to rounding.
pub fn verify_lipschitz(functional: &Functional, model: &ChainModel, n: usize, trials: usize, seed: u64) -> Result<LipschitzReport> {
    functional.check(model)?;
    if n == 0 || trials == 0 {
        return Err(domain("n and trials must be positive"));
    }
    let tree = SeedTree::new(seed).child(label::LIPSCHITZ);
    let dim = model.state_dim;
    let mut states = vec![0.0; n * dim];
    let mut scratch = Vec::new();
    let mut report = LipschitzReport { trials, max_ratio: 0.0, violations: 0 };
    for t in 0..trials {
        let mut rng = tree.rng(t as u64);
        model.simulate_into(&mut rng, &mut states)?;
        let base = functional.eval_states(&states, model, &mut scratch)?;
        let k = rng.random_range(1..=n);
        let coord = &mut states[(k - 1) * dim..k * dim];
        let original = coord.to_vec();
        let scale = 10f64.powf(rng.random_range(-3.0..1.0));
        for c in coord.iter_mut() {
            *c += scale * rng.random_range(-1.0..1.0);
        }
        let d = model.metric.distance(&original, &states[(k - 1) * dim..k * dim]);
        let moved = functional.eval_states(&states, model, &mut scratch)?;
        let diff = (moved - base).abs();
        let allowed = functional.lipschitz(k) * d;
        if d > 0.0 {
            report.max_ratio = report.max_ratio.max(diff / allowed);
        }
        if diff > allowed + rounding_allowance(base.abs().max(moved.abs()).max(n as f64)) {
            report.violations += 1;
        }
    }
    Ok(report)
}
