//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use irfconc::bounds::*;
use irfconc::chain::{half_binary_chain, iid_model};
use irfconc::cli;
use irfconc::functional::{verify_lipschitz, Functional, ScalarMap};
use irfconc::laws::{Cdf, DiscreteCdf, Law};
use irfconc::rng::label;
use irfconc::verify::{sample_functional, w1_rate_scan};
use irfconc::wasserstein::{w1_discrete_oracle, w1_empirical_vs_cdf};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- 1

fn k_rho_direct(k: usize, rho: f64) -> f64 {
    let mut s = 0.0;
    let mut term = 1.0;
    for _ in 0..=k {
        s += term;
        term *= rho;
    }
    s
}

/// Central difference with step relative to `t`.
fn derivative(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = 1e-6 * t;
    (f(t + h) - f(t - h)) / (2.0 * h)
}

fn formula_identities() -> Check {
    let mut worst_k = 0.0f64;
    for i in 0..20 {
        let k = i * 5;
        for j in 0..20 {
            let rho = j as f64 / 20.0;
            let (a, b) = (k_rho(k, rho), k_rho_direct(k, rho));
            let err = (a - b).abs() / b;
            worst_k = worst_k.max(err);
        }
    }
    ensure(worst_k <= 1e-12, format!("k_rho rel err {worst_k:e}"))?;

    // Objectives written out independently of the library's Chernoff core.
    let bern_obj = |t: f64, x: f64, v: f64, d: f64| -t * x + t * t * v / (2.0 * (1.0 - t * d));
    let cram_obj = |t: f64, x: f64, k: f64, d: f64| -t * x + t * t * k / (d * d) / (1.0 - t / d);
    let mut worst_d = 0.0f64;
    let mut points = 0;
    for &x in &[0.1, 1.0, 10.0] {
        for &v in &[0.5, 1.0, 4.0] {
            for &d in &[0.1, 0.5, 2.0] {
                let t = chernoff_minimizer(x, v, d);
                ensure(t > 0.0 && t * d < 1.0, format!("bernstein t={t} outside domain"))?;
                worst_d = worst_d.max(derivative(|s| bern_obj(s, x, v, d), t).abs() / x);
                let c = CramerConstants { k: v, delta: d };
                let t = cramer_minimizer(x, c);
                let direct = (x * d * d / v) / (x * d / v + 1.0 + (1.0 + x * d / v).sqrt());
                ensure(((t - direct) / direct).abs() < 1e-12, format!("cramer t mismatch {t} vs {direct}"))?;
                ensure(t > 0.0 && t < d, format!("cramer t={t} outside domain"))?;
                worst_d = worst_d.max(derivative(|s| cram_obj(s, x, v, d), t).abs() / x);
                points += 1;
            }
        }
    }
    ensure(points == 27 && worst_d <= 1e-8, format!("minimizer derivative {worst_d:e}"))?;

    let mut refinement_misses = Vec::new();
    for i in 1..=19 {
        let x = i as f64 * 0.05;
        let star = rio_ell_star(x);
        let mid = (x * x - 2.0 * x) * (1.0 - x).ln();
        ensure(star >= mid - 1e-9, format!("l*({x}) = {star} < {mid}"))?;
        ensure(mid >= 2.0 * x * x - 1e-9, format!("chain at {x}: {mid} < {}", 2.0 * x * x))?;
        if mid < 2.0 * x * x + x.powi(4) / 6.0 - 1e-9 {
            refinement_misses.push(x);
        }
    }

    for &n in &[5usize, 50] {
        for &v in &[0.5, 1.0, 2.0] {
            for i in 0..=200 {
                let x = n as f64 * i as f64 / 200.0;
                let (h, b, b1) = (bennett_h_ln(n, x, v), bennett_b_ln(x, v), bernstein_b1_ln(x, v));
                ensure(h <= b + 1e-12 && b <= b1 + 1e-12, format!("H<=B<=B1 fails at n={n} v={v} x={x}"))?;
            }
        }
    }
    Ok(format!(
        "k_rho err {worst_k:.1e}, minimizer slope {worst_d:.1e}, x^4/6 refinement misses at {} grid points",
        refinement_misses.len()
    ))
}

// ---------------------------------------------------------------- 2

/// `ln H_n(x, v)` written directly from its product form.
fn iid_h_ln(n: f64, x: f64, v: f64) -> f64 {
    let v2 = v * v;
    let a = (x + v2) * (v2 / (x + v2)).ln();
    let b = if x == n { 0.0 } else { (n - x) * (n / (n - x)).ln() };
    n / (n + v2) * (a + b)
}

fn iid_reduction() -> Check {
    let n = 40usize;
    let nf = n as f64;
    let (v1, v2, m) = (0.3, 0.5, 0.8);
    let (a, k1, k2) = (0.7, 1.2, 1.5);
    let (p_se, sk1, sk2) = (0.5, 1.1, 1.3);
    let (y, max_tail) = (1.5, 1e-4);
    let (pw, a1, a2) = (3.0, 0.4, 0.6);
    let incr = [0.25, 0.5];
    let bundles = vec![
        Bundle::Bernstein { v1, v2, m },
        Bundle::Cramer { a, k1, k2 },
        Bundle::SemiExp { p: p_se, k1: sk1, k2: sk2 },
        Bundle::Rio { increments: Increments::Split { first: incr[0], rest: incr[1] } },
        Bundle::Bounded { m, v1, v2 },
        Bundle::FukNagaev { v1, v2, y, max_tail },
        Bundle::WeakFukNagaev { v1, v2, p: pw, a1, a2, level: TruncationLevel::Auto },
        Bundle::Fuk { v1, v2, p: pw, a1, a2 },
        Bundle::Moment { p: 1.5, a1, a2 },
        Bundle::Moment { p: pw, a1, a2 },
        Bundle::WeakMoment { p: 1.5, a1, a2 },
        Bundle::Rosenthal { v1, v2, p: pw, c: Some(2.0), maxnorm: 0.9 },
        Bundle::LiuWatbled { p: 2.0, a: 0.3, x1: 0.2, b: 0.1 },
        Bundle::SubGaussian { c: 0.6 },
    ];
    let params = BoundParams { n, rho: 0.0, bundles };
    let bounds = params.tail_bounds().map_err(|e| e.to_string())?;

    let var = v1 + (nf - 1.0) * v2;
    let e2 = std::f64::consts::E.powi(2);
    let ln_oracle = |family: Family, x: f64| -> f64 {
        match family {
            Family::Bernstein => -x * x / (var + x * m + (var * var + 2.0 * x * m * var).sqrt()),
            Family::Cramer => {
                let k = 2.0 / e2 * (k1 + (nf - 1.0) * k2);
                let xa = x * a;
                -xa * xa / (2.0 * k * (1.0 + (1.0 + xa / k).sqrt()) + xa)
            }
            Family::SemiExp => {
                let k = sk1 + (nf - 1.0) * sk2;
                let mut best = f64::INFINITY;
                let steps = ((1e12f64 / 1e-8).ln() / 1.01f64.ln()).ceil() as i32;
                for j in 0..=steps {
                    let z: f64 = 1e-8 * 1.01f64.powi(j);
                    let t = z.powf(p_se - 1.0);
                    let val = (-t * x + 0.5 * t * t * k).exp() + k / (z * z) * (-z.powf(p_se)).exp();
                    best = best.min(val);
                }
                best.ln()
            }
            Family::Rio | Family::RioClosedForm | Family::Mcdiarmid => {
                let d = incr[0] + (nf - 1.0) * incr[1];
                let m2 = incr[0].powi(2) + (nf - 1.0) * incr[1].powi(2);
                match family {
                    _ if x > d || (x == d && family != Family::Mcdiarmid) => f64::NEG_INFINITY,
                    Family::Rio => -(d * d / m2) * rio_ell_star(x / d),
                    Family::RioClosedForm => (2.0 * d * x - x * x) / m2 * ((d - x) / d).ln(),
                    _ => -2.0 * x * x / m2,
                }
            }
            Family::Hoeffding => iid_h_ln(nf, x / m, var.sqrt() / m),
            Family::Bennett => {
                let (u, w) = (x / m, var / (m * m));
                u - (u + w) * ((u + w) / w).ln()
            }
            Family::BernsteinB1 => {
                let (u, w) = (x / m, var / (m * m));
                -u * u / (2.0 * (w + u / 3.0))
            }
            Family::FukNagaev => (iid_h_ln(nf, x / y, var.sqrt() / y).exp() + max_tail).ln(),
            Family::WeakFukNagaev => {
                let lvl = 3.0 * x / (2.0 * pw * nf.ln());
                (iid_h_ln(nf, x / lvl, var.sqrt() / lvl).exp() + (a1 + (nf - 1.0) * a2) / lvl.powf(pw)).ln()
            }
            Family::Fuk => {
                let poly = 2.0 * (1.0 + 2.0 / pw).powf(pw) * (a1 + (nf - 1.0) * a2) / x.powf(pw);
                let gauss = 2.0 * (-2.0 * x * x / ((pw + 2.0).powi(2) * pw.exp() * var)).exp();
                (poly + gauss).ln()
            }
            Family::Vbe => ((a1 + 2f64.powf(0.5) * (nf - 1.0) * a2) / x.powf(1.5)).ln(),
            Family::Mz => {
                let norm = (a1.powf(2.0 / pw) + (pw - 1.0) * (nf - 1.0) * a2.powf(2.0 / pw)).sqrt();
                pw * (norm / x).ln()
            }
            Family::WeakVbe => {
                let c = 4.0 * 1.5 / 0.5 + 8.0 * 1.5 / 0.5;
                (c * (a1 + (nf - 1.0) * a2) / x.powf(1.5)).ln()
            }
            Family::Rosenthal => {
                let norm = 120.0 * var.sqrt() + 120.0 * 2f64.sqrt() * (pw / 2.0).exp() * 0.9;
                pw * (norm / x).ln()
            }
            Family::LiuWatbled => {
                if x >= nf * 0.2 {
                    -0.3 * x * x / nf
                } else {
                    -0.1 * x * x / nf
                }
            }
            Family::SubGaussian => -x * x / (4.0 * nf * 0.6),
        }
    };

    let mut worst = 0.0f64;
    let mut compared = 0;
    for b in &bounds {
        for i in 1..=40 {
            let x = i as f64 * 0.5;
            let got = b.raw(x).map_err(|e| format!("{}: {e}", b.family))?;
            let want = ln_oracle(b.family, x);
            if want == f64::NEG_INFINITY {
                ensure(got == 0.0, format!("{} at {x}: {got} vs 0", b.family))?;
                continue;
            }
            let err = (got.ln() - want).abs() / want.abs().max(1.0);
            ensure(err <= 1e-12, format!("{} at x={x}: ln {} vs {want} (err {err:e})", b.family, got.ln()))?;
            worst = worst.max(err);
            compared += 1;
        }
    }
    let families: std::collections::BTreeSet<_> = bounds.iter().map(|b| b.family).collect();
    ensure(families.len() == 18, format!("only {} families exercised", families.len()))?;
    Ok(format!("{} families, {compared} values, worst log err {worst:.1e}", families.len()))
}

// ---------------------------------------------------------------- 3

fn w1_oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let na = rng.random_range(1..=8);
        let mut sample: Vec<f64> = (0..na).map(|_| (rng.random_range(-20..20) as f64) * 0.25).collect();
        sample.sort_by(f64::total_cmp);
        let nb = rng.random_range(1..=8);
        let raw: Vec<(f64, f64)> = (0..nb).map(|_| (rng.random_range(-5.0..5.0), rng.random_range(0.05..1.0))).collect();
        let total: f64 = raw.iter().map(|a| a.1).sum();
        let atoms: Vec<(f64, f64)> = raw.iter().map(|&(x, w)| (x, w / total)).collect();
        let cdf = Cdf::Discrete(DiscreteCdf::new(&atoms).map_err(|e| e.to_string())?);
        let fast = w1_empirical_vs_cdf(&sample, &cdf).map_err(|e| e.to_string())?;
        let emp: Vec<(f64, f64)> = sample.iter().map(|&x| (x, 1.0 / na as f64)).collect();
        let lp = w1_discrete_oracle(&emp, &atoms).map_err(|e| e.to_string())?;
        let err = (fast - lp).abs();
        ensure(err <= 1e-9, format!("w1 {fast} vs oracle {lp}"))?;
        worst = worst.max(err);
    }
    Ok(format!("200 instances, worst abs err {worst:.1e}"))
}

// ---------------------------------------------------------------- 4

fn lipschitz_certification() -> Check {
    let model = half_binary_chain();
    let mut out = Vec::new();
    for (name, f) in [
        ("additive", Functional::Additive(ScalarMap::Identity)),
        ("additive_abs", Functional::Additive(ScalarMap::Abs)),
        ("n_w1", Functional::W1VsInvariant),
    ] {
        let r = verify_lipschitz(&f, &model, 50, 1000, 4).map_err(|e| e.to_string())?;
        ensure(r.ok(), format!("{name}: {} violations, max ratio {}", r.violations, r.max_ratio))?;
        // The ratio is a quotient of rounded differences, so it can exceed 1
        // by the cancellation error of the sum.
        ensure(r.max_ratio <= 1.0 + 1e-9, format!("{name}: max ratio {}", r.max_ratio))?;
        out.push(format!("{name} max ratio {:.12}", r.max_ratio));
    }
    Ok(out.join(", "))
}

// ------------------------------------------------------- CLI helpers

const BOUNDED_BUNDLES: &str = r#"{"bundles": [
    {"kind": "bounded", "m": 0.25, "v1": 0, "v2": 0.0625},
    {"kind": "rio", "increments": {"first": 0, "rest": 0.5}},
    {"kind": "bernstein", "v1": 0, "v2": 0.0625, "m": 0.25}
]}"#;

fn experiment(functional: &str, constants: &str, n: usize, r: usize, extra: &str) -> String {
    format!(
        r#"{{
  "model": {{"model": "half_binary", "init": {{"mode": "fixed", "x": 0.5}}}},
  "functional": {functional},
  "constants": {constants},
  "n": {n}, "replications": {r}, "seed": 20240501,{extra}
  "output": {{"report": "report.csv", "summary": "summary.json"}}
}}"#
    )
}

struct Run {
    code: i32,
    report: String,
    summary: serde_json::Value,
}

fn run_verify(dir: &Path, config: &str, threads: usize) -> Result<Run, String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let path = dir.join("exp.json");
    std::fs::write(&path, config).map_err(|e| e.to_string())?;
    let argv = ["irfconc".to_string(), "--threads".into(), threads.to_string(), "verify".into(), "--config".into(), path.display().to_string()];
    let code = cli::run(argv);
    let report = std::fs::read_to_string(dir.join("report.csv")).unwrap_or_default();
    let summary = std::fs::read_to_string(dir.join("summary.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or(serde_json::Value::Null);
    Ok(Run { code, report, summary })
}

fn verdict_counts(run: &Run, families: &[&str]) -> Result<String, String> {
    let mut parts = Vec::new();
    for fam in families {
        let rows: Vec<&str> = run.report.lines().skip(1).filter(|l| l.starts_with(&format!("{fam},"))).collect();
        ensure(!rows.is_empty(), format!("no rows for {fam}"))?;
        let count = |v: &str| rows.iter().filter(|l| l.ends_with(&format!(",{v}"))).count();
        parts.push(format!("{fam} {}p/{}f/{}u", count("pass"), count("fail"), count("unresolved")));
    }
    Ok(parts.join(" "))
}

fn expect_pass(run: &Run, families: &[&str]) -> Check {
    let counts = verdict_counts(run, families)?;
    ensure(run.code == 0, format!("exit {} ({counts})", run.code))?;
    ensure(!run.report.lines().any(|l| l.ends_with(",fail")), format!("fail rows present ({counts})"))?;
    Ok(counts)
}

// ---------------------------------------------------------------- 5, 6, 7

fn dominance_bounded(dir: &Path) -> Check {
    let cfg = experiment(r#"{"functional": "additive", "g": "identity"}"#, BOUNDED_BUNDLES, 50, 100_000, "");
    let run = run_verify(dir, &cfg, 8)?;
    expect_pass(&run, &["hoeffding", "rio", "rio_closed_form", "bernstein"])
}

fn dominance_w1(dir: &Path) -> Check {
    let cfg = experiment(r#"{"functional": "w1"}"#, BOUNDED_BUNDLES, 50, 20_000, "");
    let run = run_verify(dir, &cfg, 8)?;
    expect_pass(&run, &["hoeffding", "rio", "rio_closed_form", "bernstein"])
}

fn dominance_unbounded(dir: &Path) -> Check {
    let cfg = r#"{
  "model": {"model": "ar1", "rho": 0.5, "sigma": 1, "init": {"mode": "fixed", "x": 0}},
  "functional": {"functional": "additive", "g": "identity"},
  "constants": {"estimate": {"families": ["bernstein", "cramer", "weak_fuk_nagaev", "fuk"],
                             "outer": 20000, "inner": 1000, "p": 3, "a": 1}},
  "n": 50, "replications": 100000, "seed": 20240502,
  "output": {"report": "report.csv", "summary": "summary.json"}
}"#;
    let run = run_verify(dir, cfg, 8)?;
    expect_pass(&run, &["bernstein", "cramer", "weak_fuk_nagaev", "fuk"])
}

// ---------------------------------------------------------------- 8

fn moment_bounds() -> Check {
    let model = half_binary_chain().started_at(0.5);
    let n = 50;
    let r = 100_000usize;
    let f = Functional::Additive(ScalarMap::Identity);
    let values = sample_functional(&f, &model, n, 0..r as u64, 8, label::MOMENT).map_err(|e| e.to_string())?;
    // From X_0 = 1/2 every state has mean 1/2.
    let center = n as f64 / 2.0;
    let h = Horizon::new(n, 0.5).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (p, bound) in [
        (1.5, vbe_moment(&h, 1.5, 0.0, 4f64.powf(-1.5)).map_err(|e| e.to_string())?),
        (3.0, mz_moment(&h, 3.0, 0.0, 4f64.powf(-3.0)).map_err(|e| e.to_string())?),
    ] {
        let pw: Vec<f64> = values.iter().map(|v| (v - center).abs().powf(p)).collect();
        let mean = pw.iter().sum::<f64>() / r as f64;
        let var = pw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r as f64 - 1.0);
        let upper = (mean + 3.0 * (var / r as f64).sqrt()).powf(1.0 / p);
        ensure(upper <= bound, format!("p={p}: ||S||_p upper {upper} > bound {bound}"))?;
        out.push(format!("p={p}: {:.4} (+3SE {upper:.4}) <= {bound:.4}", mean.powf(1.0 / p)));
    }
    Ok(out.join(", "))
}

// ---------------------------------------------------------------- 9

/// `∫₀¹ √(2F(1-F)/π) dt` for `F(t) = t`, by Simpson's rule after
/// `t = sin²θ`, which removes the endpoint singularities of the slope.
fn rate_oracle() -> f64 {
    let g = |th: f64| {
        let (s, c) = (th.sin(), th.cos());
        (2.0 * s * s * c * c / std::f64::consts::PI).sqrt() * 2.0 * s * c
    };
    let m = 2000;
    let b = std::f64::consts::FRAC_PI_2;
    let h = b / m as f64;
    let mut s = g(0.0) + g(b);
    for i in 1..m {
        s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn rate_scan() -> Check {
    let model = iid_model(Law::Uniform { low: 0.0, high: 1.0 }).map_err(|e| e.to_string())?;
    let rows = w1_rate_scan(&model, &[100, 1000, 10_000], 200, 9).map_err(|e| e.to_string())?;
    let oracle = rate_oracle();
    let last = rows.last().ok_or("empty scan")?;
    let rel = (last.scaled_mean - oracle).abs() / oracle;
    let seq: Vec<String> = rows.iter().map(|r| format!("{}:{:.4}", r.n, r.scaled_mean)).collect();
    ensure(rel < 0.10, format!("{} vs oracle {oracle:.4} ({:.1}%)", seq.join(" "), 100.0 * rel))?;
    Ok(format!("{} vs oracle {oracle:.4} ({:.2}% off)", seq.join(" "), 100.0 * rel))
}

// ---------------------------------------------------------------- 10, 11

fn negative_control(dir: &Path) -> Check {
    let cfg = experiment(
        r#"{"functional": "additive", "g": "identity"}"#,
        BOUNDED_BUNDLES,
        50,
        100_000,
        "\n  \"families\": [\"hoeffding\"], \"bound_scale\": {\"hoeffding\": 0.01},",
    );
    let run = run_verify(dir, &cfg, 8)?;
    let fails = run.report.lines().filter(|l| l.ends_with(",fail")).count();
    ensure(run.code == 1 && fails > 0, format!("exit {} with {fails} fail rows", run.code))?;
    Ok(format!("exit 1, {fails} fail rows"))
}

fn determinism(dir: &Path) -> Check {
    let cfg = experiment(r#"{"functional": "additive", "g": "identity"}"#, BOUNDED_BUNDLES, 50, 100_000, "");
    let one = run_verify(&dir.join("t1"), &cfg, 1)?;
    let eight = run_verify(&dir.join("t8"), &cfg, 8)?;
    ensure(!one.report.is_empty(), "no report written")?;
    ensure(one.report == eight.report, "reports differ between 1 and 8 threads")?;
    ensure(one.summary == eight.summary, "summaries differ between 1 and 8 threads")?;
    Ok(format!("{} report bytes identical", one.report.len()))
}

// ---------------------------------------------------------------- main

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let base = tmp.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Check>)> = vec![
        ("1 formula identities", Box::new(formula_identities)),
        ("2 iid reduction", Box::new(iid_reduction)),
        ("3 W1 oracle equivalence", Box::new(w1_oracle_equivalence)),
        ("4 Lipschitz certification", Box::new(lipschitz_certification)),
        ("5 dominance, bounded case", Box::new(|| dominance_bounded(&base.join("c5")))),
        ("6 dominance, W1 functional", Box::new(|| dominance_w1(&base.join("c6")))),
        ("7 dominance, unbounded case", Box::new(|| dominance_unbounded(&base.join("c7")))),
        ("8 moment bounds", Box::new(moment_bounds)),
        ("9 rate scan", Box::new(rate_scan)),
        ("10 negative control", Box::new(|| negative_control(&base.join("c10")))),
        ("11 determinism across threads", Box::new(|| determinism(&base.join("c11")))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name} [{secs:.2}s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} [{secs:.2}s]: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
