//! Special functions shared by the bound calculators.

/// `K_k(ρ) = 1 + ρ + … + ρ^k`.
pub fn k_rho(k: usize, rho: f64) -> f64 {
    if rho == 0.0 || k == 0 {
        return 1.0;
    }
    if (1.0 - rho).abs() < 1e-6 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for _ in 0..=k {
            sum += term;
            term *= rho;
        }
        return sum;
    }
    // (1 - ρ^{k+1}) / (1 - ρ), with the power taken in log space.
    -((k as f64 + 1.0) * rho.ln()).exp_m1() / (1.0 - rho)
}

/// `ℓ(t) = (t - ln t - 1) + t/(e^t - 1) + ln(1 - e^{-t})`, evaluated as
/// `h coth h - 1 + ln(sinh h / h)` with `h = t/2`.
pub fn rio_ell(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t > 40.0 {
        return t - t.ln() - 1.0;
    }
    let h = 0.5 * t;
    if h < 0.05 {
        let h2 = h * h;
        return h2 * (0.5 + h2 * (-1.0 / 36.0 + h2 / 405.0));
    }
    h / h.tanh() - 1.0 + (h.sinh() / h).ln()
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Young transform `ℓ*(x) = sup_{t>0} (x t - ℓ(t))`; `+∞` for `x >= 1`.
pub fn rio_ell_star(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return f64::INFINITY;
    }
    let objective = |t: f64| x * t - rio_ell(t);
    let mut lo = 1e-8;
    let mut hi = 64.0;
    // The objective is concave; grow the bracket until it decreases at `hi`.
    while objective(hi) < objective(hi * (1.0 + 1e-6)) {
        lo = hi / 2.0;
        hi *= 4.0;
    }
    let mut a = lo;
    let mut b = hi;
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > 1e-12 * b.max(1.0) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = objective(d);
        }
    }
    objective(0.5 * (a + b)).max(fc).max(fd).max(0.0)
}

/// `ln H_n(x, v)`; `-∞` when `x > n`.
pub fn bennett_h_ln(n: usize, x: f64, v: f64) -> f64 {
    let nf = n as f64;
    if x <= 0.0 {
        return 0.0;
    }
    if x > nf {
        return f64::NEG_INFINITY;
    }
    let v2 = v * v;
    if v2 == 0.0 {
        return f64::NEG_INFINITY;
    }
    // (x + v²) ln(v²/(x + v²)) = -(x + v²) ln(1 + x/v²)
    let first = -(x + v2) * (x / v2).ln_1p();
    // (n - x) ln(n/(n - x)) = -(n - x) ln(1 - x/n), with limit 0 at x = n.
    let second = if x == nf { 0.0 } else { -(nf - x) * (-x / nf).ln_1p() };
    nf / (nf + v2) * (first + second)
}

pub fn bennett_h(n: usize, x: f64, v: f64) -> f64 {
    bennett_h_ln(n, x, v).exp()
}

/// `ln B(x, v)` with `B(x, v) = (v²/(x + v²))^{x + v²} e^x`.
pub fn bennett_b_ln(x: f64, v: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let v2 = v * v;
    if v2 == 0.0 {
        return f64::NEG_INFINITY;
    }
    -(x + v2) * (x / v2).ln_1p() + x
}

pub fn bennett_b(x: f64, v: f64) -> f64 {
    bennett_b_ln(x, v).exp()
}

/// `ln B1(x, v)` with `B1(x, v) = exp(-x² / (2(v² + x/3)))`.
pub fn bernstein_b1_ln(x: f64, v: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -x * x / (2.0 * (v * v + x / 3.0))
}

pub fn bernstein_b1(x: f64, v: f64) -> f64 {
    bernstein_b1_ln(x, v).exp()
}
