//! Explicit deviation and moment bounds for `S_n`, and their assembly into
//! tail curves from a JSON constant bundle.

pub mod families;
pub mod special;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
pub use families::*;
pub use special::*;

/// Bounds on the increment constants `M_k`: either all `n` of them or
/// one value for `k = 1` and one shared by the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Increments {
    List(Vec<f64>),
    Split { first: f64, rest: f64 },
}

impl Increments {
    pub fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            Increments::List(v) => v.clone(),
            Increments::Split { first, rest } => {
                let mut v = vec![*rest; n];
                v[0] = *first;
                v
            }
        }
    }
}

/// Choice of the truncation level `y` in the weak Fuk–Nagaev bound.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationLevel {
    #[default]
    Auto,
    Optimized,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Bundle {
    Bernstein { v1: f64, v2: f64, m: f64 },
    Cramer { a: f64, k1: f64, k2: f64 },
    SemiExp { p: f64, k1: f64, k2: f64 },
    Rio { increments: Increments },
    /// Almost surely bounded dominating variables, `G ≤ m`.
    Bounded { m: f64, v1: f64, v2: f64 },
    FukNagaev { v1: f64, v2: f64, y: f64, max_tail: f64 },
    WeakFukNagaev {
        v1: f64,
        v2: f64,
        p: f64,
        a1: f64,
        a2: f64,
        #[serde(default)]
        level: TruncationLevel,
    },
    Fuk { v1: f64, v2: f64, p: f64, a1: f64, a2: f64 },
    /// Strong moments `A1(p) = E G_{X1}^p`, `A2(p) = E G_ε^p` for the
    /// moment inequalities, or weak moments for `weak_vbe`.
    Moment { p: f64, a1: f64, a2: f64 },
    WeakMoment { p: f64, a1: f64, a2: f64 },
    Rosenthal {
        v1: f64,
        v2: f64,
        p: f64,
        #[serde(default)]
        c: Option<f64>,
        maxnorm: f64,
    },
    LiuWatbled { p: f64, a: f64, x1: f64, b: f64 },
    SubGaussian { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bernstein,
    Cramer,
    SemiExp,
    Rio,
    RioClosedForm,
    Mcdiarmid,
    Hoeffding,
    Bennett,
    BernsteinB1,
    FukNagaev,
    WeakFukNagaev,
    Fuk,
    Vbe,
    WeakVbe,
    Mz,
    Rosenthal,
    LiuWatbled,
    SubGaussian,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Bernstein => "bernstein",
            Family::Cramer => "cramer",
            Family::SemiExp => "semi_exp",
            Family::Rio => "rio",
            Family::RioClosedForm => "rio_closed_form",
            Family::Mcdiarmid => "mcdiarmid",
            Family::Hoeffding => "hoeffding",
            Family::Bennett => "bennett",
            Family::BernsteinB1 => "bernstein_b1",
            Family::FukNagaev => "fuk_nagaev",
            Family::WeakFukNagaev => "weak_fuk_nagaev",
            Family::Fuk => "fuk",
            Family::Vbe => "vbe",
            Family::WeakVbe => "weak_vbe",
            Family::Mz => "mz",
            Family::Rosenthal => "rosenthal",
            Family::LiuWatbled => "liu_watbled",
            Family::SubGaussian => "sub_gaussian",
        }
    }

    /// Families bounding `P(|S_n| ≥ x)` rather than `P(±S_n ≥ x)`.
    pub fn two_sided(self) -> bool {
        matches!(self, Family::Fuk | Family::Vbe | Family::WeakVbe | Family::Mz | Family::Rosenthal)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub n: usize,
    pub rho: f64,
    pub bundles: Vec<Bundle>,
}

type Eval = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// One bound family instantiated with constants.
#[derive(Clone)]
pub struct TailBound {
    pub family: Family,
    pub n: usize,
    pub rho: f64,
    pub bundle: Bundle,
    /// Multiplier applied before clamping; 1 except in negative controls.
    pub scale: f64,
    eval: Eval,
}

impl fmt::Debug for TailBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TailBound")
            .field("family", &self.family)
            .field("n", &self.n)
            .field("rho", &self.rho)
            .field("bundle", &self.bundle)
            .field("scale", &self.scale)
            .finish()
    }
}

impl TailBound {
    /// Unclamped, unscaled bound; `x <= 0` gives 1.
    pub fn raw(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(domain("x is NaN"));
        }
        if x <= 0.0 {
            return Ok(1.0);
        }
        (self.eval)(x)
    }

    /// The bound at `x`, scaled and clamped to `[0, 1]`.
    pub fn value(&self, x: f64) -> Result<f64> {
        Ok((self.raw(x)? * self.scale).clamp(0.0, 1.0))
    }

    pub fn valid(&self, x: f64) -> bool {
        self.raw(x).is_ok()
    }

    pub fn two_sided(&self) -> bool {
        self.family.two_sided()
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }
}

impl BoundParams {
    pub fn horizon(&self) -> Result<Horizon> {
        Horizon::new(self.n, self.rho)
    }

    /// Every family the supplied bundles support, in bundle order.
    pub fn tail_bounds(&self) -> Result<Vec<TailBound>> {
        let h = Arc::new(self.horizon()?);
        let mut out = Vec::new();
        for bundle in &self.bundles {
            for (family, eval) in instantiate(&h, bundle)? {
                out.push(TailBound { family, n: self.n, rho: self.rho, bundle: bundle.clone(), scale: 1.0, eval });
            }
        }
        Ok(out)
    }
}

/// Markov's inequality applied to a bound on `‖S_n‖_p`.
fn markov(norm: f64, p: f64) -> Eval {
    Arc::new(move |x| Ok((p * (norm.ln() - x.ln())).exp()))
}

/// Grid of normalized truncation levels scanned by the optimized weak
/// Fuk–Nagaev bound, as multiples of `K_{n-1}`.
const WFN_LEVELS: (f64, f64, f64) = (1e-3, 1e6, 1.02);

fn instantiate(h: &Arc<Horizon>, bundle: &Bundle) -> Result<Vec<(Family, Eval)>> {
    let h = Arc::clone(h);
    let out: Vec<(Family, Eval)> = match *bundle {
        Bundle::Bernstein { v1, v2, m } => {
            let c = bernstein_constants(&h, v1, v2, m)?;
            vec![(Family::Bernstein, Arc::new(move |x| bernstein_tail(x, c)))]
        }
        Bundle::Cramer { a, k1, k2 } => {
            let c = cramer_constants(&h, a, k1, k2)?;
            vec![(Family::Cramer, Arc::new(move |x| cramer_tail(x, c)))]
        }
        Bundle::SemiExp { p, k1, k2 } => {
            let c = semi_exp_constants(&h, p, k1, k2)?;
            vec![(Family::SemiExp, Arc::new(move |x| semi_exp_tail(x, c)))]
        }
        Bundle::Rio { ref increments } => {
            let c = rio_constants(&h, &increments.expand(h.n))?;
            vec![
                (Family::Rio, Arc::new(move |x| Ok(rio_tail(x, c)))),
                (Family::RioClosedForm, Arc::new(move |x| Ok(rio_closed_form(x, c)))),
                (Family::Mcdiarmid, Arc::new(move |x| Ok(mcdiarmid_tail(x, c)))),
            ]
        }
        Bundle::Bounded { m, v1, v2 } => {
            // Validates m, v1, v2.
            hoeffding_tail(1.0, &h, m, v1, v2)?;
            let scale = m * h.k_last();
            let v = h.variance(v1, v2).sqrt() / scale;
            vec![
                (Family::Hoeffding, Arc::new(move |x| hoeffding_tail(x, &h, m, v1, v2))),
                (Family::Bennett, Arc::new(move |x| Ok(bennett_b(x / scale, v)))),
                (Family::BernsteinB1, Arc::new(move |x| Ok(bernstein_b1(x / scale, v)))),
            ]
        }
        Bundle::FukNagaev { v1, v2, y, max_tail } => {
            nonneg_all(&[v1, v2])?;
            let v = h.variance(v1, v2);
            fuk_nagaev_tail(1.0, y, &h, v, max_tail)?;
            vec![(Family::FukNagaev, Arc::new(move |x| fuk_nagaev_tail(x, y, &h, v, max_tail)))]
        }
        Bundle::WeakFukNagaev { v1, v2, p, a1, a2, level } => {
            weak_fuk_nagaev_tail(1.0, 1.0, &h, v1, v2, p, a1, a2)?;
            let eval: Eval = match level {
                TruncationLevel::Auto => {
                    weak_fuk_nagaev_level(1.0, &h, p)?;
                    Arc::new(move |x| {
                        let y = weak_fuk_nagaev_level(x, &h, p)?;
                        weak_fuk_nagaev_tail(x, y, &h, v1, v2, p, a1, a2)
                    })
                }
                TruncationLevel::Fixed(y) => {
                    if !(y > 0.0) {
                        return Err(domain(format!("truncation level must be positive, got {y}")));
                    }
                    Arc::new(move |x| weak_fuk_nagaev_tail(x, y, &h, v1, v2, p, a1, a2))
                }
                TruncationLevel::Optimized => {
                    let (lo, hi, ratio) = WFN_LEVELS;
                    let steps = ((hi / lo).ln() / ratio.ln()).ceil() as i32;
                    Arc::new(move |x| {
                        let mut best = f64::INFINITY;
                        for j in 0..=steps {
                            let y = h.k_last() * lo * ratio.powi(j);
                            best = best.min(weak_fuk_nagaev_tail(x, y, &h, v1, v2, p, a1, a2)?);
                        }
                        Ok(best)
                    })
                }
            };
            vec![(Family::WeakFukNagaev, eval)]
        }
        Bundle::Fuk { v1, v2, p, a1, a2 } => {
            fuk_tail(1.0, &h, v1, v2, p, a1, a2)?;
            vec![(Family::Fuk, Arc::new(move |x| fuk_tail(x, &h, v1, v2, p, a1, a2)))]
        }
        Bundle::Moment { p, a1, a2 } => {
            let mut v: Vec<(Family, Eval)> = Vec::new();
            if (1.0..=2.0).contains(&p) {
                v.push((Family::Vbe, markov(vbe_moment(&h, p, a1, a2)?, p)));
            }
            if p >= 2.0 {
                v.push((Family::Mz, markov(mz_moment(&h, p, a1, a2)?, p)));
            }
            if v.is_empty() {
                return Err(domain(format!("no moment inequality applies at p = {p}")));
            }
            v
        }
        Bundle::WeakMoment { p, a1, a2 } => {
            weak_vbe_tail(1.0, &h, p, a1, a2)?;
            vec![(Family::WeakVbe, Arc::new(move |x| weak_vbe_tail(x, &h, p, a1, a2)))]
        }
        Bundle::Rosenthal { v1, v2, p, c, maxnorm } => {
            let norm = match c {
                Some(c) => rosenthal_moment(&h, v1, v2, p, c, maxnorm)?,
                None => rosenthal_best(&h, v1, v2, p, maxnorm)?.0,
            };
            vec![(Family::Rosenthal, markov(norm, p))]
        }
        Bundle::LiuWatbled { p, a, x1, b } => {
            let lw = lw_constants(a, p, h.rho)?;
            nonneg_all(&[x1])?;
            if !(b > 0.0) {
                return Err(domain("B must be positive"));
            }
            let (n, a1) = (h.n, lw.a1);
            vec![(Family::LiuWatbled, Arc::new(move |x| Ok(liu_watbled_tail(x, n, p, a1, b, x1))))]
        }
        Bundle::SubGaussian { c } => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(domain("c must be positive"));
            }
            let n = h.n;
            vec![(Family::SubGaussian, Arc::new(move |x| Ok(subgaussian_tail(x, n, c))))]
        }
    };
    Ok(out)
}

fn nonneg_all(values: &[f64]) -> Result<()> {
    for &v in values {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(domain(format!("constants must be finite and nonnegative, got {v}")));
        }
    }
    Ok(())
}

/// Pointwise minimum over the supplied bounds, with the winning family.
/// Bounds that reject `x` are skipped. With no applicable bound the
/// result is the trivial `(1, None)`.
pub fn envelope_tail(x: f64, bounds: &[TailBound]) -> (f64, Option<Family>) {
    let mut best = (1.0, None);
    for b in bounds {
        if let Ok(v) = b.value(x) {
            if best.1.is_none() || v < best.0 {
                best = (v, Some(b.family));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(json: &str) -> BoundParams {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn parses_every_bundle() {
        let p = params(
            r#"{"n": 10, "rho": 0.5, "bundles": [
                {"kind": "bernstein", "v1": 0, "v2": 0.0625, "m": 0.25},
                {"kind": "cramer", "a": 1, "k1": 1.2, "k2": 1.3},
                {"kind": "semi_exp", "p": 0.5, "k1": 2, "k2": 2},
                {"kind": "rio", "increments": {"first": 0, "rest": 0.5}},
                {"kind": "rio", "increments": [0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1]},
                {"kind": "bounded", "m": 0.25, "v1": 0, "v2": 0.0625},
                {"kind": "fuk_nagaev", "v1": 1, "v2": 1, "y": 2, "max_tail": 0.01},
                {"kind": "weak_fuk_nagaev", "v1": 1, "v2": 1, "p": 3, "a1": 1, "a2": 1},
                {"kind": "weak_fuk_nagaev", "v1": 1, "v2": 1, "p": 3, "a1": 1, "a2": 1, "level": {"fixed": 2.0}},
                {"kind": "weak_fuk_nagaev", "v1": 1, "v2": 1, "p": 3, "a1": 1, "a2": 1, "level": "optimized"},
                {"kind": "fuk", "v1": 1, "v2": 1, "p": 3, "a1": 1, "a2": 1},
                {"kind": "moment", "p": 1.5, "a1": 1, "a2": 1},
                {"kind": "moment", "p": 3, "a1": 1, "a2": 1},
                {"kind": "weak_moment", "p": 1.5, "a1": 1, "a2": 1},
                {"kind": "rosenthal", "v1": 1, "v2": 1, "p": 3, "maxnorm": 0.5},
                {"kind": "liu_watbled", "p": 2, "a": 1, "x1": 0.5, "b": 0.1},
                {"kind": "sub_gaussian", "c": 1}
            ]}"#,
        );
        let bounds = p.tail_bounds().unwrap();
        assert_eq!(bounds.len(), 23);
        for b in &bounds {
            let mut prev = 1.0;
            for i in 0..=60 {
                let x = 0.25 * i as f64;
                let v = b.value(x).unwrap();
                assert!((0.0..=1.0).contains(&v), "{}: {v}", b.family);
                assert!(v <= prev + 1e-12, "{} not monotone at {x}", b.family);
                prev = v;
            }
            assert_eq!(b.value(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn rejects_unknown_fields_and_bad_constants() {
        assert!(serde_json::from_str::<BoundParams>(r#"{"n":1,"rho":0,"bundles":[{"kind":"bernstein","v1":0,"v2":0,"m":1,"zz":1}]}"#).is_err());
        assert!(serde_json::from_str::<BoundParams>(r#"{"n":1,"rho":0,"bundles":[],"extra":0}"#).is_err());
        let bad = params(r#"{"n":5,"rho":0,"bundles":[{"kind":"bernstein","v1":0,"v2":1,"m":0}]}"#);
        assert!(bad.tail_bounds().is_err());
        let bad = params(r#"{"n":5,"rho":1.0,"bundles":[]}"#);
        assert!(bad.tail_bounds().is_err());
        let bad = params(r#"{"n":5,"rho":0,"bundles":[{"kind":"moment","p":0.5,"a1":1,"a2":1}]}"#);
        assert!(bad.tail_bounds().is_err());
    }

    #[test]
    fn envelope_is_the_minimum() {
        let p = params(
            r#"{"n": 30, "rho": 0.5, "bundles": [
                {"kind": "bernstein", "v1": 0, "v2": 0.0625, "m": 0.25},
                {"kind": "bounded", "m": 0.25, "v1": 0, "v2": 0.0625}
            ]}"#,
        );
        let bounds = p.tail_bounds().unwrap();
        assert_eq!(envelope_tail(0.0, &bounds).0, 1.0);
        for x in [0.5, 1.0, 2.0, 4.0] {
            let (env, fam) = envelope_tail(x, &bounds);
            for b in &bounds {
                assert!(env <= b.value(x).unwrap());
            }
            assert!(fam.is_some());
        }
        let single = &bounds[..1];
        assert_eq!(envelope_tail(1.5, single).0, single[0].value(1.5).unwrap());
        assert_eq!(envelope_tail(1.5, &[]), (1.0, None));
    }

    #[test]
    fn scaling_applies_before_clamp() {
        let p = params(r#"{"n": 30, "rho": 0.5, "bundles": [{"kind": "bounded", "m": 0.25, "v1": 0, "v2": 0.0625}]}"#);
        let b = p.tail_bounds().unwrap().remove(0);
        let s = b.clone().scaled(0.01);
        assert_eq!(s.value(0.0).unwrap(), 0.01);
        assert!((s.value(1.0).unwrap() - 0.01 * b.value(1.0).unwrap()).abs() < 1e-18);
    }
}
