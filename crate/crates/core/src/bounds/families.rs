//! Deviation and moment bounds for `S_n`, one function per inequality.
//!
//! Tail functions return the unclamped bound value; callers clamp to
//! `[0, 1]`. Exponents are assembled in log space.

use super::special::{bennett_h_ln, k_rho, rio_ell, rio_ell_star};
use crate::error::{domain, Result};

/// Chain length and contraction factor, with the weights `K_{n-k}(ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Horizon {
    pub n: usize,
    pub rho: f64,
    /// `weights[k - 1] = K_{n-k}(ρ)` for `k = 1..=n`.
    weights: Vec<f64>,
}

impl Horizon {
    pub fn new(n: usize, rho: f64) -> Result<Self> {
        if n == 0 {
            return Err(domain("n must be at least 1"));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(domain(format!("rho must lie in [0, 1), got {rho}")));
        }
        let weights = (1..=n).map(|k| k_rho(n - k, rho)).collect();
        Ok(Self { n, rho, weights })
    }

    /// `K_{n-1}(ρ)`.
    pub fn k_last(&self) -> f64 {
        self.weights[0]
    }

    /// `K_{n-k}(ρ)` for `k` in `1..=n`.
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k - 1]
    }

    /// `Σ_{k=2}^n K_{n-k}(ρ)^power`.
    pub fn weighted_sum(&self, power: f64) -> f64 {
        self.weights[1..].iter().map(|w| w.powf(power)).sum()
    }

    /// `V1 K_{n-1}² + V2 Σ_{k=2}^n K_{n-k}²`.
    pub fn variance(&self, v1: f64, v2: f64) -> f64 {
        v1 * self.k_last().powi(2) + v2 * self.weighted_sum(2.0)
    }

    /// `Σ_{k=2}^n (K_{n-k} / K_{n-1})²`.
    pub fn normalized_square_sum(&self) -> f64 {
        let kbar = self.k_last();
        self.weights[1..].iter().map(|w| (w / kbar).powi(2)).sum()
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite and nonnegative, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite and positive, got {v}")))
    }
}

// Bernstein and Cramér share one Chernoff computation: both moment
// generating function bounds have the form exp(t² V / (2(1 - t δ))).

fn chernoff_exponent(x: f64, v: f64, delta: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if v == 0.0 {
        return if delta == 0.0 { f64::NEG_INFINITY } else { -x / delta };
    }
    let r = (1.0 + 2.0 * x * delta / v).sqrt();
    -x * x / (v * (1.0 + r) + x * delta)
}

fn chernoff_exponent_weak(x: f64, v: f64, delta: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -x * x / (2.0 * (v + x * delta))
}

/// Minimizer of `-t x + t² V / (2(1 - t δ))` over `t ∈ [0, 1/δ)`.
pub fn chernoff_minimizer(x: f64, v: f64, delta: f64) -> f64 {
    let s = 2.0 * x * delta / v;
    (2.0 * x / v) / (s + 1.0 + (1.0 + s).sqrt())
}

/// `-t x + t² V / (2(1 - t δ))`.
pub fn chernoff_objective(t: f64, x: f64, v: f64, delta: f64) -> f64 {
    -t * x + t * t * v / (2.0 * (1.0 - t * delta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinConstants {
    pub v: f64,
    pub delta: f64,
}

pub fn bernstein_constants(h: &Horizon, v1: f64, v2: f64, m: f64) -> Result<BernsteinConstants> {
    nonneg("V1", v1)?;
    nonneg("V2", v2)?;
    positive("M", m)?;
    Ok(BernsteinConstants { v: h.variance(v1, v2), delta: m * h.k_last() })
}

/// `exp(t² V / (2(1 - t δ)))` for `t ∈ [0, 1/δ)`, `+∞` beyond.
pub fn bernstein_mgf(t: f64, c: BernsteinConstants) -> Result<f64> {
    if t < 0.0 {
        return Err(domain("t must be nonnegative"));
    }
    if t * c.delta >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok((t * t * c.v / (2.0 * (1.0 - t * c.delta))).exp())
}

/// `exp(-x² / (V(1 + √(1 + 2xδ/V)) + xδ))`. The minus sign follows from
/// minimizing the Chernoff objective; the exponent must be nonpositive.
pub fn bernstein_tail(x: f64, c: BernsteinConstants) -> Result<f64> {
    if x < 0.0 {
        return Err(domain("x must be nonnegative"));
    }
    Ok(chernoff_exponent(x, c.v, c.delta).exp())
}

/// `exp(-x² / (2(V + xδ)))`.
pub fn bernstein_tail_weak(x: f64, c: BernsteinConstants) -> Result<f64> {
    if x < 0.0 {
        return Err(domain("x must be nonnegative"));
    }
    Ok(chernoff_exponent_weak(x, c.v, c.delta).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CramerConstants {
    /// `(2/e²)(K1 + K2 Σ (K_{n-i}/K_{n-1})²)`.
    pub k: f64,
    /// `a / K_{n-1}`.
    pub delta: f64,
}

impl CramerConstants {
    /// The same bound written as a Bernstein bound: `V = 2K/δ²`, scale `1/δ`.
    fn as_bernstein(&self) -> (f64, f64) {
        (2.0 * self.k / (self.delta * self.delta), 1.0 / self.delta)
    }
}

pub fn cramer_constants(h: &Horizon, a: f64, k1: f64, k2: f64) -> Result<CramerConstants> {
    positive("a", a)?;
    if !(k1 >= 1.0 && k2 >= 1.0 && k1.is_finite() && k2.is_finite()) {
        return Err(domain(format!("K1 and K2 must be at least 1, got {k1}, {k2}")));
    }
    let e2 = std::f64::consts::E * std::f64::consts::E;
    Ok(CramerConstants { k: 2.0 / e2 * (k1 + k2 * h.normalized_square_sum()), delta: a / h.k_last() })
}

/// `exp(t² K δ⁻² / (1 - t δ⁻¹))` for `t ∈ [0, δ)`, `+∞` beyond.
pub fn cramer_mgf(t: f64, c: CramerConstants) -> Result<f64> {
    if t < 0.0 {
        return Err(domain("t must be nonnegative"));
    }
    if t >= c.delta {
        return Ok(f64::INFINITY);
    }
    Ok((t * t * c.k / (c.delta * c.delta) / (1.0 - t / c.delta)).exp())
}

/// `exp(-(xδ)² / (2K(1 + √(1 + xδ/K)) + xδ))`, sign restored as for
/// the Bernstein bound.
pub fn cramer_tail(x: f64, c: CramerConstants) -> Result<f64> {
    if x < 0.0 {
        return Err(domain("x must be nonnegative"));
    }
    let (v, d) = c.as_bernstein();
    Ok(chernoff_exponent(x, v, d).exp())
}

/// `exp(-(xδ)² / (4K + 2xδ))`.
pub fn cramer_tail_weak(x: f64, c: CramerConstants) -> Result<f64> {
    if x < 0.0 {
        return Err(domain("x must be nonnegative"));
    }
    let (v, d) = c.as_bernstein();
    Ok(chernoff_exponent_weak(x, v, d).exp())
}

/// Minimizer of `-t x + t² K δ⁻² / (1 - t δ⁻¹)`:
/// `(xδ²/K) / (xδ/K + 1 + √(1 + xδ/K))`.
pub fn cramer_minimizer(x: f64, c: CramerConstants) -> f64 {
    let (v, d) = c.as_bernstein();
    chernoff_minimizer(x, v, d)
}

pub fn cramer_objective(t: f64, x: f64, c: CramerConstants) -> f64 {
    let (v, d) = c.as_bernstein();
    chernoff_objective(t, x, v, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LwConstants {
    pub q: f64,
    pub tau: f64,
    pub a1: f64,
}

/// Conjugate exponent `q`, the level `τ` with `(qτ)^{1/q}(pa)^{1/p}(1-ρ) = 1`,
/// and `a1` with `(qτ)^{1/q}(p a1)^{1/p} = 1`.
pub fn lw_constants(a: f64, p: f64, rho: f64) -> Result<LwConstants> {
    positive("a", a)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(domain(format!("p must exceed 1, got {p}")));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(domain(format!("rho must lie in [0, 1), got {rho}")));
    }
    let q = p / (p - 1.0);
    let tau = ((p * a).powf(-1.0 / p) / (1.0 - rho)).powf(q) / q;
    Ok(LwConstants { q, tau, a1: a * (1.0 - rho).powf(p) })
}

/// `exp(-a1 x^p / n^{p-1})` for `x >= n x1`, `exp(-B x² / n)` below.
pub fn liu_watbled_tail(x: f64, n: usize, p: f64, a1: f64, b: f64, x1: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let nf = n as f64;
    if x >= nf * x1 {
        (-a1 * x.powf(p) / nf.powf(p - 1.0)).exp()
    } else {
        (-b * x * x / nf).exp()
    }
}

/// `exp(-x² / (4 n c))`.
pub fn subgaussian_tail(x: f64, n: usize, c: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    (-x * x / (4.0 * n as f64 * c)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiExpConstants {
    pub p: f64,
    /// `K1 + K2 Σ (K_{n-i}/K_{n-1})²`.
    pub k: f64,
    pub k_last: f64,
}

pub fn semi_exp_constants(h: &Horizon, p: f64, k1: f64, k2: f64) -> Result<SemiExpConstants> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("p must lie in (0, 1), got {p}")));
    }
    positive("K1", k1)?;
    positive("K2", k2)?;
    Ok(SemiExpConstants { p, k: k1 + k2 * h.normalized_square_sum(), k_last: h.k_last() })
}

/// The truncation inequality at level `y > 0`:
/// `exp(-t x + z^{2p-2} K / 2) + K z^{-2} exp(-z^p)` with `z = y / K_{n-1}`
/// and `t = z^{p-1} / K_{n-1}`.
pub fn semi_exp_at_level(x: f64, y: f64, c: SemiExpConstants) -> f64 {
    let z = y / c.k_last;
    let p = c.p;
    let t = z.powf(p - 1.0) / c.k_last;
    let first = (-t * x + 0.5 * z.powf(2.0 * p - 2.0) * c.k).exp();
    let second = c.k * (-2.0 * z.ln() - z.powf(p)).exp();
    first + second
}

/// Truncation level used by the closed-form display, in units where the
/// regime boundary sits at `x / K_{n-1} = K^{1/(2-p)}`:
/// `y = K_{n-1} (K K_{n-1} / x)^{1/(1-p)}` below it and `y = x` above.
pub fn semi_exp_truncation_level(x: f64, c: SemiExpConstants) -> f64 {
    let xn = x / c.k_last;
    if xn < c.k.powf(1.0 / (2.0 - c.p)) {
        c.k_last * (c.k / xn).powf(1.0 / (1.0 - c.p))
    } else {
        x
    }
}

/// Two-regime closed form: the truncation inequality at
/// [`semi_exp_truncation_level`]. With `x' = x / K_{n-1}`,
/// below the boundary it reads
/// `exp(-x'²/(2K)) + K (x'/K)^{2/(1-p)} exp(-(K/x')^{p/(1-p)})`,
/// and above it
/// `exp(-x'^p (1 - (K/2) x'^{p-2})) + K x'^{-2} exp(-x'^p)`.
pub fn semi_exp_display(x: f64, c: SemiExpConstants) -> Result<f64> {
    if x < 0.0 {
        return Err(domain("x must be nonnegative"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let (p, k) = (c.p, c.k);
    let xn = x / c.k_last;
    if xn < k.powf(1.0 / (2.0 - p)) {
        let first = (-xn * xn / (2.0 * k)).exp();
        let second = k * ((2.0 / (1.0 - p)) * (xn / k).ln() - (k / xn).powf(p / (1.0 - p))).exp();
        Ok(first + second)
    } else {
        let xp = xn.powf(p);
        let first = (-xp * (1.0 - 0.5 * k * xn.powf(p - 2.0))).exp();
        let second = k * (-2.0 * xn.ln() - xp).exp();
        Ok(first + second)
    }
}

/// Normalized truncation levels `z = y / K_{n-1}` scanned by [`semi_exp_tail`].
const SEMI_EXP_GRID: (f64, f64, f64) = (1e-8, 1e12, 1.01);

/// Infimum of the truncation inequality over a fixed geometric grid of
/// levels. Each member is nonincreasing in `x`, so the minimum is too.
pub fn semi_exp_tail(x: f64, c: SemiExpConstants) -> Result<f64> {
    if x < 0.0 {
        return Err(domain("x must be nonnegative"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let (lo, hi, ratio) = SEMI_EXP_GRID;
    let steps = ((hi / lo).ln() / ratio.ln()).ceil() as i32;
    let best = (0..=steps)
        .map(|j| semi_exp_at_level(x, c.k_last * lo * ratio.powi(j), c))
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RioConstants {
    /// `D = Σ K_{n-k} M_k`.
    pub d: f64,
    /// `M² = Σ (K_{n-k} M_k)²`.
    pub m2: f64,
}

pub fn rio_constants(h: &Horizon, increments: &[f64]) -> Result<RioConstants> {
    if increments.len() != h.n {
        return Err(domain(format!("need {} increment bounds, got {}", h.n, increments.len())));
    }
    for &m in increments {
        nonneg("increment bound", m)?;
    }
    let (mut d, mut m2) = (0.0, 0.0);
    for (k, &m) in increments.iter().enumerate() {
        let w = h.weight(k + 1) * m;
        d += w;
        m2 += w * w;
    }
    if d == 0.0 {
        return Err(domain("at least one increment bound must be positive"));
    }
    Ok(RioConstants { d, m2 })
}

/// `exp((D²/M²) ℓ(M² t / D))`.
pub fn rio_mgf(t: f64, c: RioConstants) -> Result<f64> {
    if t < 0.0 {
        return Err(domain("t must be nonnegative"));
    }
    Ok((c.d * c.d / c.m2 * rio_ell(c.m2 * t / c.d)).exp())
}

/// `exp(-(D²/M²) ℓ*(x/D))`, and 0 past `D` where `S_n` cannot reach.
pub fn rio_tail(x: f64, c: RioConstants) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x >= c.d {
        return 0.0;
    }
    (-(c.d * c.d / c.m2) * rio_ell_star(x / c.d)).exp()
}

/// `((D - x)/D)^{(2Dx - x²)/M²}`.
pub fn rio_closed_form(x: f64, c: RioConstants) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x >= c.d {
        return 0.0;
    }
    ((2.0 * c.d * x - x * x) / c.m2 * (-x / c.d).ln_1p()).exp()
}

/// `exp(-2x²/M²)`, and 0 past `D`.
pub fn mcdiarmid_tail(x: f64, c: RioConstants) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x > c.d {
        return 0.0;
    }
    (-2.0 * x * x / c.m2).exp()
}

/// `H_n(x / (y K_{n-1}), √V / (y K_{n-1})) + max_tail`.
pub fn fuk_nagaev_tail(x: f64, y: f64, h: &Horizon, v: f64, max_tail: f64) -> Result<f64> {
    positive("y", y)?;
    nonneg("V", v)?;
    if !(0.0..=1.0).contains(&max_tail) {
        return Err(domain(format!("max_tail must be a probability, got {max_tail}")));
    }
    let scale = y * h.k_last();
    Ok(bennett_h_ln(h.n, x / scale, v.sqrt() / scale).exp() + max_tail)
}

/// Bounded dominating variables: `H_n(x / (M K_{n-1}), √V / (M K_{n-1}))`.
pub fn hoeffding_tail(x: f64, h: &Horizon, m: f64, v1: f64, v2: f64) -> Result<f64> {
    nonneg("V1", v1)?;
    nonneg("V2", v2)?;
    fuk_nagaev_tail(x, m, h, h.variance(v1, v2), 0.0)
}

/// Automatic truncation level `3 n u / (2 p K_{n-1} ln n)` for the
/// per-observation deviation `u = x / n`.
pub fn weak_fuk_nagaev_level(x: f64, h: &Horizon, p: f64) -> Result<f64> {
    if h.n < 3 {
        return Err(domain("the automatic truncation level needs n >= 3"));
    }
    let n = h.n as f64;
    Ok(3.0 * n * (x / n) / (2.0 * p * h.k_last() * n.ln()))
}

/// `H_n(x / (y K_{n-1}), √V / (y K_{n-1})) + A(p) / y^p` with
/// `A(p) = A1 + (n - 1) A2` built from weak moments.
pub fn weak_fuk_nagaev_tail(x: f64, y: f64, h: &Horizon, v1: f64, v2: f64, p: f64, a1: f64, a2: f64) -> Result<f64> {
    if !(p > 2.0) {
        return Err(domain(format!("weak Fuk–Nagaev needs p > 2, got {p}")));
    }
    nonneg("A1", a1)?;
    nonneg("A2", a2)?;
    nonneg("V1", v1)?;
    nonneg("V2", v2)?;
    positive("y", y)?;
    let a = a1 + (h.n as f64 - 1.0) * a2;
    let scale = y * h.k_last();
    let v = h.variance(v1, v2);
    Ok(bennett_h_ln(h.n, x / scale, v.sqrt() / scale).exp() + a / y.powf(p))
}

/// `A1 K_{n-1}^p + A2 Σ_{i=2}^n K_{n-i}^p`.
pub fn moment_sum(h: &Horizon, p: f64, a1: f64, a2: f64) -> f64 {
    a1 * h.k_last().powf(p) + a2 * h.weighted_sum(p)
}

/// Two-sided: `2(1 + 2/p)^p A(p)/x^p + 2 exp(-2x² / ((p + 2)² e^p V))`.
pub fn fuk_tail(x: f64, h: &Horizon, v1: f64, v2: f64, p: f64, a1: f64, a2: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(domain("x must be positive"));
    }
    if !(p >= 2.0) {
        return Err(domain(format!("Fuk's inequality needs p >= 2, got {p}")));
    }
    nonneg("A1", a1)?;
    nonneg("A2", a2)?;
    let v = h.variance(v1, v2);
    let a = moment_sum(h, p, a1, a2);
    let poly = 2.0 * ((1.0 + 2.0 / p).ln() * p + a.ln() - p * x.ln()).exp();
    let gauss = if v == 0.0 { 0.0 } else { 2.0 * (-2.0 * x * x / ((p + 2.0).powi(2) * p.exp() * v)).exp() };
    Ok(poly + gauss)
}

/// `(A1 K_{n-1}^p + 2^{2-p} A2 Σ K_{n-k}^p)^{1/p}` for `p ∈ [1, 2]`.
pub fn vbe_moment(h: &Horizon, p: f64, a1: f64, a2: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&p) {
        return Err(domain(format!("von Bahr–Esseen needs p in [1, 2], got {p}")));
    }
    nonneg("A1", a1)?;
    nonneg("A2", a2)?;
    Ok((a1 * h.k_last().powf(p) + 2f64.powf(2.0 - p) * a2 * h.weighted_sum(p)).powf(1.0 / p))
}

/// `4p/(p-1) + 8p/(2-p)`. The second term is written with `(p-2)` in some
/// statements, which is negative on `(1, 2)`; the truncation argument that
/// produces it gives `2p/(2-p)` times 4.
pub fn weak_vbe_constant(p: f64) -> f64 {
    4.0 * p / (p - 1.0) + 8.0 * p / (2.0 - p)
}

/// Two-sided: `C_p B(n, ρ, p) / x^p` for `p ∈ (1, 2)`.
pub fn weak_vbe_tail(x: f64, h: &Horizon, p: f64, a1: f64, a2: f64) -> Result<f64> {
    if !(p > 1.0 && p < 2.0) {
        return Err(domain(format!("weak von Bahr–Esseen needs p in (1, 2), got {p}")));
    }
    if !(x > 0.0) {
        return Err(domain("x must be positive"));
    }
    nonneg("A1", a1)?;
    nonneg("A2", a2)?;
    Ok(weak_vbe_constant(p) * moment_sum(h, p, a1, a2) / x.powf(p))
}

/// `√(K_{n-1}² A1^{2/p} + (p - 1) A2^{2/p} Σ K_{n-k}²)` for `p >= 2`. The
/// second term carries the noise moment `A2`, as the martingale moment
/// inequality applied to the increments `k >= 2` requires.
pub fn mz_moment(h: &Horizon, p: f64, a1: f64, a2: f64) -> Result<f64> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(domain(format!("Marcinkiewicz–Zygmund needs p >= 2, got {p}")));
    }
    nonneg("A1", a1)?;
    nonneg("A2", a2)?;
    let kbar = h.k_last();
    Ok((kbar * kbar * a1.powf(2.0 / p) + (p - 1.0) * a2.powf(2.0 / p) * h.weighted_sum(2.0)).sqrt())
}

/// `60c √V + 120 √c e^{p/c} maxnorm` for `c ∈ [1, p]`.
pub fn rosenthal_moment(h: &Horizon, v1: f64, v2: f64, p: f64, c: f64, maxnorm: f64) -> Result<f64> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(domain(format!("Rosenthal needs p >= 2, got {p}")));
    }
    if !(c >= 1.0 && c <= p) {
        return Err(domain(format!("c must lie in [1, {p}], got {c}")));
    }
    nonneg("V1", v1)?;
    nonneg("V2", v2)?;
    nonneg("maxnorm", maxnorm)?;
    Ok(60.0 * c * h.variance(v1, v2).sqrt() + 120.0 * c.sqrt() * (p / c).exp() * maxnorm)
}

pub const ROSENTHAL_GRID: usize = 200;

/// Smallest Rosenthal value over an even grid of `c` in `[1, p]`; returns
/// `(value, c)`.
pub fn rosenthal_best(h: &Horizon, v1: f64, v2: f64, p: f64, maxnorm: f64) -> Result<(f64, f64)> {
    let mut best = (rosenthal_moment(h, v1, v2, p, p, maxnorm)?, p);
    for i in 0..ROSENTHAL_GRID {
        let c = 1.0 + (p - 1.0) * i as f64 / ROSENTHAL_GRID as f64;
        let v = rosenthal_moment(h, v1, v2, p, c, maxnorm)?;
        if v < best.0 {
            best = (v, c);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hz(n: usize, rho: f64) -> Horizon {
        Horizon::new(n, rho).unwrap()
    }

    #[test]
    fn bernstein_basic_values() {
        let c = bernstein_constants(&hz(10, 0.0), 0.0, 1.0, 0.5).unwrap();
        assert_eq!(c.v, 9.0);
        assert_eq!(bernstein_mgf(0.0, c).unwrap(), 1.0);
        let t: f64 = 0.3;
        let expect = (t * t * 9.0 / (2.0 * (1.0 - t * 0.5))).exp();
        assert!((bernstein_mgf(t, c).unwrap() - expect).abs() < 1e-12 * expect);
        assert_eq!(bernstein_mgf(2.0, c).unwrap(), f64::INFINITY);
        assert!(bernstein_mgf(-1.0, c).is_err());
        assert_eq!(bernstein_tail(0.0, c).unwrap(), 1.0);
    }

    #[test]
    fn bernstein_mgf_at_half_inverse_scale() {
        let c = BernsteinConstants { v: 1.0, delta: 0.8 };
        let t = 1.0 / (2.0 * c.delta);
        // t² / (2 (1/2)) = t² = 1 / (4 δ²)
        assert!((bernstein_mgf(t, c).unwrap() - (1.0 / (4.0 * 0.64f64)).exp()).abs() < 1e-14);
    }

    #[test]
    fn bernstein_degenerate_variance() {
        let c = BernsteinConstants { v: 0.0, delta: 1.0 };
        assert!(bernstein_tail(1.0, c).unwrap() < 1.0);
        let c = BernsteinConstants { v: 0.0, delta: 0.0 };
        assert_eq!(bernstein_tail(1.0, c).unwrap(), 0.0);
    }

    #[test]
    fn sharper_forms_below_weaker_ones() {
        let c = BernsteinConstants { v: 1.0, delta: 0.5 };
        for x in [0.1, 1.0, 10.0] {
            assert!(bernstein_tail(x, c).unwrap() <= bernstein_tail_weak(x, c).unwrap());
        }
        let c = cramer_constants(&hz(20, 0.3), 0.7, 1.5, 2.0).unwrap();
        for x in [0.1, 1.0, 10.0, 100.0] {
            assert!(cramer_tail(x, c).unwrap() <= cramer_tail_weak(x, c).unwrap());
        }
    }

    #[test]
    fn cramer_iid_constants_and_mgf() {
        let h = hz(10, 0.0);
        let c = cramer_constants(&h, 0.5, 2.0, 3.0).unwrap();
        let e2 = std::f64::consts::E.powi(2);
        assert!((c.k - 2.0 / e2 * (2.0 + 9.0 * 3.0)).abs() < 1e-12);
        assert_eq!(c.delta, 0.5);
        assert_eq!(cramer_mgf(0.0, c).unwrap(), 1.0);
        assert_eq!(cramer_mgf(0.5, c).unwrap(), f64::INFINITY);
        assert!(cramer_constants(&h, 0.5, 0.9, 3.0).is_err());
    }

    #[test]
    fn lw_constants_plug_back() {
        for (a, p, rho) in [(1.0, 2.0, 0.5), (0.3, 1.5, 0.0), (2.0, 3.0, 0.9)] {
            let c = lw_constants(a, p, rho).unwrap();
            assert!(((c.q * c.tau).powf(1.0 / c.q) * (p * a).powf(1.0 / p) * (1.0 - rho) - 1.0).abs() < 1e-12);
            assert!(((c.q * c.tau).powf(1.0 / c.q) * (p * c.a1).powf(1.0 / p) - 1.0).abs() < 1e-12);
        }
        assert_eq!(lw_constants(1.0, 2.0, 0.5).unwrap().a1, 0.25);
        assert_eq!(lw_constants(1.3, 2.0, 0.0).unwrap().a1, 1.3);
    }

    #[test]
    fn semi_exp_regimes_meet_at_boundary() {
        for p in [0.2, 0.5, 0.8] {
            for k in [0.5, 1.0, 3.0, 20.0] {
                for kbar in [1.0, 1.9] {
                    let c = SemiExpConstants { p, k, k_last: kbar };
                    let x = kbar * k.powf(1.0 / (2.0 - p));
                    let below = kbar * (k * kbar / (x * (1.0 - 1e-15))).powf(1.0 / (1.0 - p));
                    assert!((below - x).abs() < 1e-9 * x, "p={p} k={k}");
                    assert_eq!(semi_exp_truncation_level(x, c), x);
                }
            }
        }
    }

    #[test]
    fn semi_exp_display_is_the_inequality_at_its_level() {
        let c = semi_exp_constants(&hz(30, 0.4), 0.5, 2.0, 1.5).unwrap();
        for x in [0.5, 2.0, 10.0, 40.0, 200.0] {
            let y = semi_exp_truncation_level(x, c);
            let d = semi_exp_display(x, c).unwrap();
            let direct = semi_exp_at_level(x, y, c);
            assert!((d - direct).abs() <= 1e-12 * direct.max(1e-300), "x={x}: {d} vs {direct}");
            assert!(semi_exp_tail(x, c).unwrap() <= d * (1.0 + 1e-2));
        }
    }

    #[test]
    fn semi_exp_small_x_clamps_to_one() {
        let c = semi_exp_constants(&hz(5, 0.0), 0.5, 1.0, 1.0).unwrap();
        assert!(semi_exp_display(1e-9, c).unwrap() >= 1.0 - 1e-12);
        assert!((c.k - 5.0).abs() < 1e-15);
        assert!(semi_exp_display(-1.0, c).is_err());
    }

    #[test]
    fn rio_forms_order_and_edges() {
        let h = hz(20, 0.5);
        let mut inc = vec![0.5; 20];
        inc[0] = 0.0;
        let c = rio_constants(&h, &inc).unwrap();
        assert_eq!((rio_tail(0.0, c), rio_closed_form(0.0, c), mcdiarmid_tail(0.0, c)), (1.0, 1.0, 1.0));
        assert_eq!(rio_closed_form(c.d, c), 0.0);
        for i in 1..100 {
            let x = c.d * i as f64 / 100.0;
            let (a, b, m) = (rio_tail(x, c), rio_closed_form(x, c), mcdiarmid_tail(x, c));
            assert!(a <= b * (1.0 + 1e-9) && b <= m * (1.0 + 1e-9), "x={x}: {a} {b} {m}");
        }
        assert!(rio_constants(&h, &[0.0; 20]).is_err());
        assert!(rio_constants(&h, &[0.5; 19]).is_err());
        assert_eq!(rio_mgf(0.0, c).unwrap(), 1.0);
    }

    #[test]
    fn hoeffding_is_fuk_nagaev_without_max_term() {
        let h = hz(30, 0.5);
        let v = h.variance(0.0, 1.0 / 16.0);
        for x in [0.5, 2.0, 5.0] {
            let a = hoeffding_tail(x, &h, 0.25, 0.0, 1.0 / 16.0).unwrap();
            let kbar = h.k_last();
            let direct = crate::bounds::special::bennett_h(30, x / (0.25 * kbar), v.sqrt() / (0.25 * kbar));
            assert_eq!(a, direct);
        }
        assert_eq!(hoeffding_tail(0.0, &h, 0.25, 0.0, 1.0).unwrap(), 1.0);
        assert!(fuk_nagaev_tail(1.0, 0.0, &h, 1.0, 0.0).is_err());
    }

    #[test]
    fn weak_fuk_nagaev_max_term() {
        let h = hz(100, 0.0);
        let x = 100.0;
        let y = weak_fuk_nagaev_level(x, &h, 3.0).unwrap();
        // 3·100·1 / (2·3·1·ln 100)
        assert!((y - 50.0 / 100f64.ln()).abs() < 1e-12);
        assert!(y > 1.0);
        let total = weak_fuk_nagaev_tail(x, y, &h, 1.0, 1.0, 3.0, 1.0, 1.0).unwrap();
        let h_term = crate::bounds::special::bennett_h(100, x / y, 100f64.sqrt() / y);
        assert!((total - h_term - 100.0 / y.powi(3)).abs() < 1e-12);
        assert!(weak_fuk_nagaev_level(1.0, &hz(2, 0.0), 3.0).is_err());
    }

    #[test]
    fn fuk_values() {
        let h = hz(10, 0.0);
        let v = 2.0;
        let x = 7.0;
        let t = fuk_tail(x, &h, v, v, 2.0, v, v).unwrap();
        let poly = 8.0 * h.variance(v, v) / (x * x);
        let gauss = 2.0 * (-2.0 * x * x / (16.0 * 2f64.exp() * 20.0)).exp();
        assert!((t - poly - gauss).abs() < 1e-12);
        assert!(fuk_tail(1e9, &h, 1.0, 1.0, 3.0, 1.0, 1.0).unwrap() < 1e-20);
        assert!(fuk_tail(0.0, &h, 1.0, 1.0, 3.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn fuk_polynomial_term_scales_like_n_to_one_minus_p() {
        let p: f64 = 3.0;
        let u = 0.5;
        let poly = |n: usize| {
            let h = hz(n, 0.5);
            2.0 * (1.0 + 2.0 / p).powf(p) * moment_sum(&h, p, 1.0, 1.0) / (n as f64 * u).powf(p)
        };
        for n in [100usize, 1000] {
            let ratio = poly(10 * n) / poly(n);
            assert!((ratio / 10f64.powf(1.0 - p) - 1.0).abs() < 0.05, "n={n}: {ratio}");
        }
    }

    #[test]
    fn moment_bounds() {
        assert!((vbe_moment(&hz(1, 0.5), 1.5, 8.0, 3.0).unwrap() - 4.0).abs() < 1e-12);
        let h = hz(10, 0.0);
        assert!((vbe_moment(&h, 2.0, 1.0, 2.0).unwrap() - 19f64.sqrt()).abs() < 1e-12);
        let h = hz(6, 0.4);
        let direct = 2.0 * h.k_last() + 2.0 * 3.0 * (2..=6).map(|k| k_rho(6 - k, 0.4)).sum::<f64>();
        assert!((vbe_moment(&h, 1.0, 2.0, 3.0).unwrap() - direct).abs() < 1e-12);
        assert!(vbe_moment(&h, 2.5, 1.0, 1.0).is_err());

        assert!((mz_moment(&hz(1, 0.3), 3.0, 8.0, 5.0).unwrap() - 2.0).abs() < 1e-12);
        let h = hz(12, 0.6);
        let sq = (h.variance(0.7, 1.3)).sqrt();
        assert!((mz_moment(&h, 2.0, 0.7, 1.3).unwrap() - sq).abs() < 1e-12);
        assert!(mz_moment(&hz(12, 0.5), 3.0, 1.0, 1.0).unwrap() >= mz_moment(&hz(12, 0.0), 3.0, 1.0, 1.0).unwrap());
        assert!(mz_moment(&h, 1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn weak_vbe_values() {
        assert_eq!(weak_vbe_constant(1.5), 36.0);
        let h = hz(5, 0.2);
        let a = weak_vbe_tail(1.0, &h, 1.5, 1.0, 1.0).unwrap();
        let b = weak_vbe_tail(2.0, &h, 1.5, 1.0, 1.0).unwrap();
        assert!((b / a - 2f64.powf(-1.5)).abs() < 1e-15);
        assert!(weak_vbe_tail(1.0, &h, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rosenthal_values() {
        let h = hz(2, 0.0);
        // V = V1 + V2 = 1.
        assert_eq!(rosenthal_moment(&h, 0.5, 0.5, 3.0, 1.0, 0.0).unwrap(), 60.0);
        let direct = 120.0 * 2f64.sqrt() * std::f64::consts::E * 0.3 + 60.0 * 2.0;
        assert!((rosenthal_moment(&h, 0.5, 0.5, 2.0, 2.0, 0.3).unwrap() - direct).abs() < 1e-12);
        let (best, c) = rosenthal_best(&h, 0.5, 0.5, 4.0, 0.2).unwrap();
        assert!(best <= rosenthal_moment(&h, 0.5, 0.5, 4.0, 4.0, 0.2).unwrap());
        assert!((1.0..=4.0).contains(&c));
        assert!(rosenthal_moment(&h, 0.5, 0.5, 3.0, 3.5, 0.0).is_err());
    }

    #[test]
    fn parametric_families() {
        assert_eq!(subgaussian_tail(0.0, 10, 1.0), 1.0);
        assert!((subgaussian_tail(2.0, 10, 0.5) - (-0.2f64).exp()).abs() < 1e-15);
        let lw = |x| liu_watbled_tail(x, 10, 2.0, 0.25, 0.1, 0.5);
        assert!((lw(10.0) - (-0.25 * 100.0 / 10.0f64).exp()).abs() < 1e-15);
        assert!((lw(1.0) - (-0.1 / 10.0f64).exp()).abs() < 1e-15);
    }
}
