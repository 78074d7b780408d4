//! Scalar probability laws, samplers for noise and initial states, and
//! cumulative distribution functions with exact partial integrals.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatrsNormal};
use statrs::function::erf::erfc;

use crate::error::{domain, Result};
use crate::rng::StreamRng;

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// A scalar law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Law {
    Dirac { value: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
    /// Values in {0, 1} with `P(1) = p`.
    Bernoulli { p: f64 },
    Exponential { rate: f64 },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Law::Dirac { value } => value.is_finite(),
            Law::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            Law::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            Law::Bernoulli { p } => (0.0..=1.0).contains(&p),
            Law::Exponential { rate } => rate.is_finite() && rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("invalid law parameters: {self:?}")))
        }
    }

    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            Law::Dirac { value } => value,
            Law::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Law::Normal { mean, sd } => {
                if sd == 0.0 {
                    mean
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    mean + sd * z
                }
            }
            Law::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Exponential { rate } => {
                let u: f64 = rng.random::<f64>();
                -(-u).ln_1p() / rate
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Law::Dirac { value } => value,
            Law::Uniform { low, high } => 0.5 * (low + high),
            Law::Normal { mean, .. } => mean,
            Law::Bernoulli { p } => p,
            Law::Exponential { rate } => 1.0 / rate,
        }
    }

    /// `E|y - Y|^exponent` when a closed form is known.
    pub fn expected_distance(&self, y: f64, exponent: f64) -> Option<f64> {
        match *self {
            Law::Dirac { value } => Some((y - value).abs().powf(exponent)),
            Law::Bernoulli { p } => {
                Some((1.0 - p) * y.abs().powf(exponent) + p * (y - 1.0).abs().powf(exponent))
            }
            _ if exponent != 1.0 => None,
            Law::Uniform { low, high } => Some(if y <= low {
                0.5 * (low + high) - y
            } else if y >= high {
                y - 0.5 * (low + high)
            } else {
                ((y - low).powi(2) + (high - y).powi(2)) / (2.0 * (high - low))
            }),
            Law::Normal { mean, sd } => {
                if sd == 0.0 {
                    return Some((y - mean).abs());
                }
                let z = (y - mean) / sd;
                Some(sd * (2.0 * std_normal_pdf(z) + z * (2.0 * std_normal_cdf(z) - 1.0)))
            }
            Law::Exponential { rate } => Some(if y <= 0.0 {
                1.0 / rate - y
            } else {
                y - 1.0 / rate + 2.0 * (-rate * y).exp() / rate
            }),
        }
    }

    pub fn cdf(&self) -> Cdf {
        match *self {
            Law::Dirac { value } => Cdf::Discrete(DiscreteCdf::new(&[(value, 1.0)]).expect("one atom")),
            Law::Bernoulli { p } => {
                Cdf::Discrete(DiscreteCdf::new(&[(0.0, 1.0 - p), (1.0, p)]).expect("two atoms"))
            }
            Law::Uniform { low, high } => Cdf::Uniform { low, high },
            Law::Normal { mean, sd } if sd == 0.0 => {
                Cdf::Discrete(DiscreteCdf::new(&[(mean, 1.0)]).expect("one atom"))
            }
            Law::Normal { mean, sd } => Cdf::Normal { mean, sd },
            Law::Exponential { rate } => Cdf::Exponential { rate },
        }
    }
}

type DrawFn = dyn Fn(&mut StreamRng, &mut [f64]) + Send + Sync;

/// Sampler for a (possibly vector valued) noise or initial law.
#[derive(Clone)]
pub enum Sampler {
    Scalar(Law),
    /// Independent coordinates.
    Product(Vec<Law>),
    Custom { dim: usize, draw: Arc<DrawFn> },
}

impl fmt::Debug for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampler::Scalar(l) => f.debug_tuple("Scalar").field(l).finish(),
            Sampler::Product(ls) => f.debug_tuple("Product").field(ls).finish(),
            Sampler::Custom { dim, .. } => f.debug_struct("Custom").field("dim", dim).finish(),
        }
    }
}

impl Sampler {
    pub fn dim(&self) -> usize {
        match self {
            Sampler::Scalar(_) => 1,
            Sampler::Product(ls) => ls.len(),
            Sampler::Custom { dim, .. } => *dim,
        }
    }

    pub fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match self {
            Sampler::Scalar(l) => out[0] = l.sample(rng),
            Sampler::Product(ls) => {
                for (o, l) in out.iter_mut().zip(ls) {
                    *o = l.sample(rng);
                }
            }
            Sampler::Custom { draw, .. } => draw(rng, out),
        }
    }

    pub fn as_scalar(&self) -> Option<&Law> {
        match self {
            Sampler::Scalar(l) => Some(l),
            Sampler::Product(ls) if ls.len() == 1 => Some(&ls[0]),
            _ => None,
        }
    }
}

/// A step CDF with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCdf {
    atoms: Vec<f64>,
    /// `cum[i] = P(X <= atoms[i])`, last entry forced to 1.
    cum: Vec<f64>,
    /// `cum_first_moment[i] = sum_{j <= i} w_j x_j`.
    cum_first_moment: Vec<f64>,
}

impl DiscreteCdf {
    /// Builds from `(location, weight)` pairs; weights are normalized and
    /// equal locations merged.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(domain("discrete law needs at least one atom"));
        }
        if atoms.iter().any(|&(x, w)| !x.is_finite() || !w.is_finite() || w < 0.0) {
            return Err(domain("atoms must be finite with nonnegative weights"));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if total <= 0.0 {
            return Err(domain("atom weights sum to zero"));
        }
        let mut sorted: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (x, w / total)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (x, w) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        Ok(Self::from_sorted_merged(&merged))
    }

    /// Empirical law of a sorted sample (uniform weights).
    pub fn from_sorted_sample(sorted: &[f64]) -> Result<Self> {
        if sorted.windows(2).any(|w| w[0] > w[1]) {
            return Err(domain("sample must be sorted"));
        }
        let w = 1.0 / sorted.len() as f64;
        let atoms: Vec<(f64, f64)> = sorted.iter().map(|&x| (x, w)).collect();
        Self::new(&atoms)
    }

    fn from_sorted_merged(merged: &[(f64, f64)]) -> Self {
        let mut atoms = Vec::with_capacity(merged.len());
        let mut cum = Vec::with_capacity(merged.len());
        let mut cum_first_moment = Vec::with_capacity(merged.len());
        let (mut c, mut m) = (0.0, 0.0);
        for &(x, w) in merged {
            c += w;
            m += w * x;
            atoms.push(x);
            cum.push(c);
            cum_first_moment.push(m);
        }
        *cum.last_mut().expect("nonempty") = 1.0;
        Self { atoms, cum, cum_first_moment }
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().enumerate().map(move |(i, &x)| {
            let prev = if i == 0 { 0.0 } else { self.cum[i - 1] };
            (x, self.cum[i] - prev)
        })
    }

    /// Number of atoms `<= t`.
    fn count_le(&self, t: f64) -> usize {
        self.atoms.partition_point(|&a| a <= t)
    }

    fn value(&self, t: f64) -> f64 {
        match self.count_le(t) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }

    fn quantile(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if c > 1.0 {
            return f64::INFINITY;
        }
        let i = self.cum.partition_point(|&w| w < c);
        self.atoms[i.min(self.atoms.len() - 1)]
    }

    fn lower_partial(&self, t: f64) -> f64 {
        match self.count_le(t) {
            0 => 0.0,
            k => self.cum[k - 1] * t - self.cum_first_moment[k - 1],
        }
    }

    fn upper_partial(&self, t: f64) -> f64 {
        let k = self.count_le(t);
        let (w_le, m_le) = if k == 0 {
            (0.0, 0.0)
        } else {
            (self.cum[k - 1], self.cum_first_moment[k - 1])
        };
        let m_total = *self.cum_first_moment.last().expect("nonempty");
        (m_total - m_le) - (1.0 - w_le) * t
    }
}

/// Cumulative distribution function of a scalar law.
#[derive(Clone)]
pub enum Cdf {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Discrete(DiscreteCdf),
    /// Arbitrary continuous CDF supported on a finite interval.
    Custom { cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>, support: (f64, f64) },
}

impl fmt::Debug for Cdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cdf::Uniform { low, high } => write!(f, "Uniform[{low}, {high}]"),
            Cdf::Normal { mean, sd } => write!(f, "Normal({mean}, {sd}^2)"),
            Cdf::Exponential { rate } => write!(f, "Exponential({rate})"),
            Cdf::Discrete(d) => write!(f, "Discrete({} atoms)", d.atoms.len()),
            Cdf::Custom { support, .. } => write!(f, "Custom(support {support:?})"),
        }
    }
}

const CUSTOM_TOL: f64 = 1e-10;

impl Cdf {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Cdf::Uniform { low, high } => ((t - low) / (high - low)).clamp(0.0, 1.0),
            Cdf::Normal { mean, sd } => std_normal_cdf((t - mean) / sd),
            Cdf::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            Cdf::Discrete(d) => d.value(t),
            Cdf::Custom { cdf, support } => {
                if t < support.0 {
                    0.0
                } else if t >= support.1 {
                    1.0
                } else {
                    cdf(t).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// Generalized inverse `inf { t : F(t) >= c }`.
    pub fn quantile(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return match self {
                Cdf::Uniform { low, .. } => *low,
                Cdf::Exponential { .. } => 0.0,
                Cdf::Custom { support, .. } => support.0,
                _ => f64::NEG_INFINITY,
            };
        }
        match self {
            Cdf::Uniform { low, high } => low + (high - low) * c.min(1.0),
            Cdf::Normal { mean, sd } => {
                if c >= 1.0 {
                    f64::INFINITY
                } else {
                    mean + sd * StatrsNormal::standard().inverse_cdf(c)
                }
            }
            Cdf::Exponential { rate } => {
                if c >= 1.0 {
                    f64::INFINITY
                } else {
                    -(-c).ln_1p() / rate
                }
            }
            Cdf::Discrete(d) => d.quantile(c),
            Cdf::Custom { support, .. } => {
                let (mut lo, mut hi) = *support;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.value(mid) >= c {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }

    /// `∫_{-∞}^t F(s) ds`.
    pub fn lower_partial(&self, t: f64) -> f64 {
        match self {
            Cdf::Uniform { low, high } => {
                if t <= *low {
                    0.0
                } else if t >= *high {
                    0.5 * (high - low) + (t - high)
                } else {
                    (t - low).powi(2) / (2.0 * (high - low))
                }
            }
            Cdf::Normal { mean, sd } => {
                let z = (t - mean) / sd;
                sd * (z * std_normal_cdf(z) + std_normal_pdf(z))
            }
            Cdf::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    t + (-rate * t).exp_m1() / rate
                }
            }
            Cdf::Discrete(d) => d.lower_partial(t),
            Cdf::Custom { support, .. } => {
                if t <= support.0 {
                    0.0
                } else if t >= support.1 {
                    self.integrate_custom(support.0, support.1) + (t - support.1)
                } else {
                    self.integrate_custom(support.0, t)
                }
            }
        }
    }

    /// `∫_t^∞ (1 - F(s)) ds`.
    pub fn upper_partial(&self, t: f64) -> f64 {
        match self {
            Cdf::Uniform { low, high } => {
                if t >= *high {
                    0.0
                } else if t <= *low {
                    0.5 * (high - low) + (low - t)
                } else {
                    (high - t).powi(2) / (2.0 * (high - low))
                }
            }
            Cdf::Normal { mean, sd } => {
                let z = (t - mean) / sd;
                sd * (std_normal_pdf(z) - z * std_normal_cdf(-z))
            }
            Cdf::Exponential { rate } => {
                if t <= 0.0 {
                    1.0 / rate - t
                } else {
                    (-rate * t).exp() / rate
                }
            }
            Cdf::Discrete(d) => d.upper_partial(t),
            Cdf::Custom { support, .. } => {
                if t >= support.1 {
                    0.0
                } else if t <= support.0 {
                    (support.1 - support.0) - self.integrate_custom(support.0, support.1)
                        + (support.0 - t)
                } else {
                    (support.1 - t) - self.integrate_custom(t, support.1)
                }
            }
        }
    }

    /// `∫_a^b |level - F(t)| dt` for `a <= b`.
    pub fn abs_deviation_integral(&self, level: f64, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let m = self.quantile(level).clamp(a, b);
        if let Cdf::Custom { .. } = self {
            let below = level * (m - a) - self.integrate_custom(a, m);
            let above = self.integrate_custom(m, b) - level * (b - m);
            return below.max(0.0) + above.max(0.0);
        }
        // F < level on [a, m) and F >= level on [m, b].
        let below = level * (m - a) - (self.lower_partial(m) - self.lower_partial(a));
        let above = (self.lower_partial(b) - self.lower_partial(m)) - level * (b - m);
        below.max(0.0) + above.max(0.0)
    }

    fn integrate_custom(&self, a: f64, b: f64) -> f64 {
        adaptive_simpson(&|t| self.value(t), a, b, CUSTOM_TOL, 48)
    }
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)
}
