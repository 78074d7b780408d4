//! One-dimensional Wasserstein-1 distances and a small exact transport
//! solver used as an independent check.

use crate::error::{domain, Error, Result};
use crate::laws::{Cdf, DiscreteCdf};

/// `∫ |F_n(t) - F(t)| dt` for the empirical CDF `F_n` of `sorted`.
///
/// Between consecutive order statistics `F_n` is the constant `k/n`; each
/// piece is integrated against `F` through its partial integrals, which are
/// closed form for the parametric and discrete laws.
pub fn w1_empirical_vs_cdf(sorted: &[f64], cdf: &Cdf) -> Result<f64> {
    if sorted.is_empty() {
        return Err(domain("empty sample"));
    }
    if sorted.iter().any(|x| !x.is_finite()) {
        return Err(domain("sample contains non-finite values"));
    }
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(domain("sample must be sorted"));
    }
    let n = sorted.len();
    let nf = n as f64;
    let mut total = cdf.lower_partial(sorted[0]) + cdf.upper_partial(sorted[n - 1]);
    for k in 1..n {
        let (a, b) = (sorted[k - 1], sorted[k]);
        if b > a {
            total += cdf.abs_deviation_integral(k as f64 / nf, a, b);
        }
    }
    Ok(total.max(0.0))
}

/// `∫ |F(t) - G(t)| dt` for two discrete laws, by a sweep over the merged
/// atom locations.
pub fn w1_discrete(f: &DiscreteCdf, g: &DiscreteCdf) -> f64 {
    let fa: Vec<(f64, f64)> = f.atoms().collect();
    let ga: Vec<(f64, f64)> = g.atoms().collect();
    let (mut i, mut j) = (0, 0);
    let (mut cf, mut cg) = (0.0f64, 0.0f64);
    let mut prev: Option<f64> = None;
    let mut total = 0.0;
    while i < fa.len() || j < ga.len() {
        let next_f = fa.get(i).map_or(f64::INFINITY, |a| a.0);
        let next_g = ga.get(j).map_or(f64::INFINITY, |a| a.0);
        let t = next_f.min(next_g);
        if let Some(p) = prev {
            total += (cf - cg).abs() * (t - p);
        }
        if next_f == t {
            cf += fa[i].1;
            i += 1;
        }
        if next_g == t {
            cg += ga[j].1;
            j += 1;
        }
        prev = Some(t);
    }
    total
}

/// Empirical-to-empirical distance, both samples sorted.
pub fn w1_empirical_vs_empirical(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(w1_discrete(&DiscreteCdf::from_sorted_sample(a)?, &DiscreteCdf::from_sorted_sample(b)?))
}

pub const ORACLE_MAX_ATOMS: usize = 8;

/// Optimal transport cost between two discrete laws on the line with cost
/// `|x - y|`, solved as a linear program. Weights are normalized.
pub fn w1_discrete_oracle(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    transport_cost(&weights(a)?, &weights(b)?, |i, j| (a[i].0 - b[j].0).abs())
}

fn weights(atoms: &[(f64, f64)]) -> Result<Vec<f64>> {
    if atoms.len() > ORACLE_MAX_ATOMS {
        return Err(Error::SizeCap { max: ORACLE_MAX_ATOMS, got: atoms.len() });
    }
    if atoms.is_empty() || atoms.iter().any(|&(x, w)| !x.is_finite() || !(w >= 0.0)) {
        return Err(domain("atoms must be finite with nonnegative weights"));
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if !(total > 0.0) {
        return Err(domain("weights sum to zero"));
    }
    Ok(atoms.iter().map(|a| a.1 / total).collect())
}

/// Minimum of `Σ c(i, j) π_ij` over couplings `π` of the weight vectors
/// `a` and `b` (each summing to 1), for arbitrary costs.
pub fn transport_cost(a: &[f64], b: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<f64> {
    if a.len() > ORACLE_MAX_ATOMS || b.len() > ORACLE_MAX_ATOMS {
        return Err(Error::SizeCap { max: ORACLE_MAX_ATOMS, got: a.len().max(b.len()) });
    }
    let (na, nb) = (a.len(), b.len());
    let vars = na * nb;
    // Row sums for every i, column sums for j < nb - 1; the last column
    // constraint is implied by the others.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..na {
        let mut r = vec![0.0; vars];
        r[i * nb..(i + 1) * nb].iter_mut().for_each(|v| *v = 1.0);
        rows.push((r, a[i]));
    }
    for j in 0..nb.saturating_sub(1) {
        let mut r = vec![0.0; vars];
        (0..na).for_each(|i| r[i * nb + j] = 1.0);
        rows.push((r, b[j]));
    }
    let c: Vec<f64> = (0..vars).map(|v| cost(v / nb, v % nb)).collect();
    Ok(simplex_min(rows, &c)?.max(0.0))
}

const PIVOT_EPS: f64 = 1e-12;

/// Two-phase dense simplex with Bland's rule for
/// `min c·x` subject to `A x = b`, `x >= 0`, `b >= 0`.
fn simplex_min(rows: Vec<(Vec<f64>, f64)>, c: &[f64]) -> Result<f64> {
    let m = rows.len();
    let nv = c.len();
    let width = nv + m + 1;
    let rhs = width - 1;
    let mut t: Vec<Vec<f64>> = rows
        .into_iter()
        .enumerate()
        .map(|(i, (mut r, b))| {
            r.resize(width, 0.0);
            r[nv + i] = 1.0;
            r[rhs] = b;
            r
        })
        .collect();
    let mut basis: Vec<usize> = (nv..nv + m).collect();

    // Phase one: minimize the sum of artificial variables.
    let mut obj = vec![0.0; width];
    for row in &t {
        for k in 0..nv {
            obj[k] -= row[k];
        }
        obj[rhs] -= row[rhs];
    }
    run_simplex(&mut t, &mut obj, &mut basis, nv)?;
    if -obj[rhs] > 1e-9 {
        return Err(domain("transport problem is infeasible"));
    }
    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut r = 0;
    while r < t.len() {
        if basis[r] >= nv {
            match (0..nv).find(|&k| t[r][k].abs() > PIVOT_EPS) {
                Some(k) => pivot(&mut t, &mut obj, &mut basis, r, k),
                None => {
                    t.remove(r);
                    basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    let mut obj = vec![0.0; width];
    obj[..nv].copy_from_slice(c);
    for (row, &bv) in t.iter().zip(&basis) {
        let cb = obj[bv];
        if cb != 0.0 {
            for k in 0..width {
                obj[k] -= cb * row[k];
            }
        }
    }
    run_simplex(&mut t, &mut obj, &mut basis, nv)?;
    Ok(-obj[rhs])
}

fn run_simplex(t: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], nv: usize) -> Result<()> {
    let rhs = obj.len() - 1;
    for _ in 0..10_000 {
        // Bland: lowest-index improving column, then lowest-index basic
        // variable among tied ratios.
        let Some(enter) = (0..nv).find(|&k| obj[k] < -PIVOT_EPS) else {
            return Ok(());
        };
        let mut leave: Option<(usize, f64)> = None;
        for (r, row) in t.iter().enumerate() {
            if row[enter] > PIVOT_EPS {
                let ratio = row[rhs] / row[enter];
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - PIVOT_EPS || (ratio <= lratio + PIVOT_EPS && basis[r] < basis[lr]) {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else {
            return Err(domain("linear program is unbounded"));
        };
        pivot(t, obj, basis, r, enter);
    }
    Err(domain("simplex iteration limit reached"))
}

fn pivot(t: &mut [Vec<f64>], obj: &mut [f64], basis: &mut [usize], r: usize, k: usize) {
    let p = t[r][k];
    t[r].iter_mut().for_each(|v| *v /= p);
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r && row[k] != 0.0 {
            let f = row[k];
            row.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
        }
    }
    let f = obj[k];
    obj.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
    basis[r] = k;
}
