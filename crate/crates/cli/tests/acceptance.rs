//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any fail.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use efimov_core::counting::weyl_property_suite;
use efimov_core::numerics::eigen::symmetric_eigen;
use efimov_core::numerics::{LogScalar, ZArg};
use efimov_core::potential::PotentialModel;
use efimov_core::three_body::*;
use efimov_core::two_body::{bs_radial_matrix, default_radial_grid, tune_resonance, TwoBodySolution, WeightSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ln10(d: f64) -> f64 {
    -d * 10f64.ln()
}

/// `z = 10^{-10} ... 10^{-150}`, fifteen points evenly spaced in the exponent.
fn scan_z() -> Vec<LogScalar> {
    (0..15)
        .map(|k| LogScalar::from_ln(ln10(10.0 + 140.0 * k as f64 / 14.0)))
        .collect()
}

fn cli(dir: &Path, args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_superefimov"))
        .arg("--config")
        .arg(dir.join("config.json"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "superefimov {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn resonance_tuning(sol: &TwoBodySolution, seconds: f64) -> Outcome {
    let m = bs_radial_matrix(&sol.potential, 1, ZArg::Limit, &sol.grid).unwrap();
    let top = *symmetric_eigen(&m, false).unwrap().values.last().unwrap();
    // 1 - mu keeps full precision where mu itself rounds to 1
    let decreasing = sol.mu_table.windows(2).all(|p| p[0].one_minus_mu < p[1].one_minus_mu && p[0].mu >= p[1].mu);
    outcome(
        (top - 1.0).abs() < 1e-8 && decreasing && seconds < 30.0,
        format!(
            "top eigenvalue {top:.15} (|dev| {:.1e}), mu decreasing over {} points: {decreasing}, {seconds:.1} s at n = {}",
            (top - 1.0).abs(),
            sol.mu_table.len(),
            sol.grid.len()
        ),
    )
}

fn perturbation_slope(sol: &TwoBodySolution) -> Outcome {
    let fit = sol.slope_fit;
    outcome(
        (fit.ratio - 1.0).abs() < 0.03,
        format!(
            "fitted {:.6} vs (pi/2) c0^2 = {:.6} on [{:e}, {:e}], ratio {:.5}",
            fit.coefficient, fit.target, fit.z_min, fit.z_max, fit.ratio
        ),
    )
}

fn closed_form_spectrum_check(sol: &TwoBodySolution) -> Outcome {
    let start = Instant::now();
    let spec = WeightSpec::auto(sol, 0.2, LogScalar::from_f64(1e-8)).unwrap();
    let grid = three_body_grid(&spec, 2000, DEFAULT_POINTS_PER_PANEL).unwrap();
    let op = script_t_matrix(&spec, &grid).unwrap();
    let eig = op.eigenvalues().unwrap();
    let exact = closed_form_spectrum(spec.xi(0.2).unwrap(), 10);
    let gap = exact.iter().zip(&eig).map(|(e, v)| rel(*v, *e)).fold(0.0, f64::max);
    let dense = op.eigenvalues_dense().unwrap();
    let m = dense.len();
    let asym = (0..m / 2).map(|k| (dense[k] + dense[m - 1 - k]).abs()).fold(0.0, f64::max);

    let unit = WeightSpec::unit(1.0, LogScalar::from_f64(1e-3)).unwrap();
    let ugrid = three_body_grid(&unit, 4096, DEFAULT_POINTS_PER_PANEL).unwrap();
    let ueig = script_t_matrix(&unit, &ugrid).unwrap().eigenvalues().unwrap();
    let um = ueig.len();
    let unit_err = (0..10)
        .map(|k| {
            let exact = 1.0 / (PI * (2 * k + 1) as f64);
            (ueig[k] - exact).abs().max((ueig[um - 1 - k] + exact).abs())
        })
        .fold(0.0, f64::max);
    let seconds = start.elapsed().as_secs_f64();
    outcome(
        gap < 0.01 && asym < 1e-8 && unit_err < 1e-6 && seconds < 120.0,
        format!(
            "k <= 10 worst rel {gap:.2e}, sign asymmetry {asym:.1e}, unit weight n = 4096 err {unit_err:.1e}, {seconds:.1} s"
        ),
    )
}

fn xi_limit(sol: &TwoBodySolution) -> Outcome {
    let limit = 2.0 / (PI * sol.c0_squared);
    let ratios: Vec<f64> = [50.0, 100.0, 150.0]
        .iter()
        .map(|&d| {
            let spec = WeightSpec::asymptotic(sol.c0_squared, 0.2, LogScalar::from_ln(ln10(d))).unwrap();
            spec.xi(0.2).unwrap() / spec.double_log()
        })
        .collect();
    let monotone = ratios.windows(2).all(|p| (limit - p[1]).abs() < (limit - p[0]).abs());
    let last = rel(ratios[2], limit);
    outcome(
        monotone && last < 0.10,
        format!("ratios {ratios:.4?} toward {limit:.4}, monotone: {monotone}, final gap {:.1}%", 100.0 * last),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct ScanResult {
    fits: Vec<Value>,
    seconds: f64,
    z_points: usize,
}

fn run_count_scan(dir: &Path) -> ScanResult {
    let start = Instant::now();
    cli(dir, &["tune"]);
    cli(dir, &["count-scan"]);
    let seconds = start.elapsed().as_secs_f64();
    let fit: Value = serde_json::from_str(&fs::read_to_string(dir.join("run/fit.json")).unwrap()).unwrap();
    let z_points = fit["modes"].as_array().unwrap().len();
    ScanResult {
        fits: fit["fits"].as_array().unwrap().clone(),
        seconds,
        z_points,
    }
}

fn counting_law(scan: &ScanResult) -> Outcome {
    let find = |label: &str, a: f64| {
        scan.fits
            .iter()
            .find(|f| f["label"] == label && f["a"].as_f64() == Some(a))
            .unwrap_or_else(|| panic!("no fit for {label} at a = {a}"))
    };
    let mut ok = scan.z_points >= 10 && scan.seconds < 1200.0;
    let mut parts = Vec::new();
    for (label, a, target) in [
        ("TplusTminus", 1.0, 8.0 / (3.0 * PI)),
        ("Tplus", 1.0, 4.0 / (3.0 * PI)),
        ("Tminus", 1.0, 4.0 / (3.0 * PI)),
        ("TplusTminus", 2.0, 8.0 / (6.0 * PI)),
    ] {
        let f = find(label, a);
        let slope = f["slope"].as_f64().unwrap();
        let good = rel(slope, target) < 0.2;
        ok &= good;
        parts.push(format!(
            "{label}(a={a}) {slope:.4} vs {target:.4} ({:+.0}%){}",
            100.0 * (slope - target) / target,
            if good { "" } else { " out of band" }
        ));
    }
    outcome(
        ok,
        format!("{}; {} z points, {:.0} s", parts.join(", "), scan.z_points, scan.seconds),
    )
}

fn remainder_diagnostics(sol: &TwoBodySolution) -> Outcome {
    let zs = scan_z();
    let spec0 = WeightSpec::auto(sol, 0.2, zs[0]).unwrap();
    let base = ChainContext::new(sol, &spec0, None).unwrap();
    let mut b1_ok = true;
    let mut worst_b1: f64 = 0.0;
    // largest drop among the top four singular values, worst case over z
    let mut worst_gap: f64 = 0.0;
    let mut discrepancy_ok = true;
    let mut discrepancies = Vec::new();
    for (k, &z) in zs.iter().enumerate() {
        let spec = WeightSpec::auto(sol, 0.2, z).unwrap();
        let chain = base.with_spec(sol, &spec).unwrap();
        let grid = three_body_grid(&spec, 1000, DEFAULT_POINTS_PER_PANEL).unwrap();
        let rem = remainder_ops(&chain, &grid).unwrap();
        let b1 = rem.b1.hs_norm().powi(2);
        let bound = b1_hs_bound(spec.delta, chain.psi.alpha_bound, spec.r_eps);
        b1_ok &= b1 <= bound;
        worst_b1 = worst_b1.max(b1 / bound);
        // S is symmetric, so its singular values are the moduli of its eigenvalues
        let mut sigma: Vec<f64> = rem.s.eigenvalues().unwrap().iter().map(|v| v.abs()).collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        let gap = (1..=3)
            .map(|r| sigma[r] / sigma[r - 1])
            .fold(f64::INFINITY, f64::min);
        worst_gap = worst_gap.max(gap);
        if k % 7 == 0 {
            let report = assemble_comparison(&chain, &grid, &[1.0], DEFAULT_RELATIVE_EPS).unwrap();
            let row = &report.counting[0];
            let corrections = (row.limit_loose - row.limit_tight) + row.remainder_plus + row.remainder_minus;
            discrepancy_ok &= row.discrepancy <= 3 + corrections;
            discrepancies.push(format!("{}<={}", row.discrepancy, 3 + corrections));
        }
    }
    let rank_ok = worst_gap <= 1e-8;
    outcome(
        b1_ok && rank_ok && discrepancy_ok,
        format!(
            "|B1|^2/bound max {worst_b1:.3} over {} z, rank(S) <= 3 with gap {:.1} orders, T+ vs limit discrepancy at a = 1: {}",
            zs.len(),
            -worst_gap.log10(),
            discrepancies.join(" ")
        ),
    )
}

fn d_norm() -> Outcome {
    let norm = d_norm_check(512).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let terms: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..4.0))).collect();
        // int_0^1 x^(p+q) x dx
        let exact: f64 = terms
            .iter()
            .flat_map(|&(c, p)| terms.iter().map(move |&(d, q)| c * d / (p + q + 2.0)))
            .sum();
        let f = |x: f64| terms.iter().map(|&(c, p)| c * x.powf(p)).sum::<f64>();
        let got = transformed_norm(f, 40.0, 400).unwrap().powi(2);
        worst = worst.max((got - exact).abs() / exact.abs().max(1e-3));
    }
    let bound = D_NORM_BOUND + D_NORM_TOLERANCE;
    outcome(
        norm <= bound && worst < 1e-10,
        format!("|D| = {norm:.6} vs bound {bound:.6} at n = 512, unitarity defect {worst:.1e}"),
    )
}

fn weyl_fuzz() -> Outcome {
    let a = weyl_property_suite(1000, 20, 2024).unwrap();
    let b = weyl_property_suite(1000, 20, 2024).unwrap();
    let same = serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap();
    outcome(
        a.passed() && same && a.trials == 1000,
        format!("{} trials, {} checks, {} violations, repeat identical: {same}", a.trials, a.checks, a.violations.len()),
    )
}

fn determinism(root: &Path) -> Outcome {
    let config = r#"{"grid": {"n": 160, "radial_n": 400}, "z": "log:1e-10:1e-150:6", "a_list": [1.0, 2.0], "out": "run", "seed": 9}"#;
    let mut artifacts = Vec::new();
    for name in ["first", "second"] {
        let dir = root.join(name);
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("config.json"), config).unwrap();
        cli(&dir, &["tune"]);
        cli(&dir, &["count-scan"]);
        cli(&dir, &["validate", "--suite", "weyl"]);
        artifacts.push(
            ["solution.json", "fit.json", "comparison.json", "scan.csv", "validate_weyl.json"]
                .map(|f| fs::read(dir.join("run").join(f)).unwrap()),
        );
    }
    let identical = artifacts[0] == artifacts[1];

    // every float survives the file at 17 significant digits
    let text = fs::read_to_string(root.join("first/run/solution.json")).unwrap();
    let file: Value = serde_json::from_str(&text).unwrap();
    let loaded: TwoBodySolution = serde_json::from_value(file["solution"].clone()).unwrap();
    let pot = PotentialModel::default();
    let fresh = tune_resonance(&pot, &default_radial_grid(&pot, 400).unwrap(), None).unwrap();
    let same_values = loaded == fresh;
    let mut floats = Vec::new();
    collect_floats(&file["solution"], &mut floats);
    let digits_ok = floats.iter().all(|&x| format!("{x:.16e}").parse::<f64>().unwrap() == x);
    let reserialized = serde_json::to_value(&loaded).unwrap() == file["solution"];
    outcome(
        identical && same_values && digits_ok && reserialized,
        format!(
            "two runs byte-identical over 5 artifacts: {identical}; solution round-trip equal: {same_values}, {} floats exact at 17 digits: {digits_ok}",
            floats.len()
        ),
    )
}

fn collect_floats(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.extend(n.as_f64()),
        Value::Array(a) => a.iter().for_each(|x| collect_floats(x, out)),
        Value::Object(o) => o.values().for_each(|x| collect_floats(x, out)),
        _ => {}
    }
}

fn main() {
    let root = tempfile::tempdir().unwrap();
    let pot = PotentialModel::default();
    let start = Instant::now();
    let grid = default_radial_grid(&pot, 1500).unwrap();
    let sol = tune_resonance(&pot, &grid, None).unwrap();
    let tune_seconds = start.elapsed().as_secs_f64();

    let scan_dir = root.path().join("scan");
    fs::create_dir_all(&scan_dir).unwrap();
    fs::write(
        scan_dir.join("config.json"),
        r#"{"grid": {"n": 1000}, "z": "log:1e-10:1e-150:15", "a_list": [1.0, 2.0], "r_eps": 0.2, "out": "run"}"#,
    )
    .unwrap();

    let criteria: Vec<Criterion> = vec![
        ("resonance tuning", Box::new(|| resonance_tuning(&sol, tune_seconds))),
        ("perturbation slope", Box::new(|| perturbation_slope(&sol))),
        ("closed-form step spectrum", Box::new(|| closed_form_spectrum_check(&sol))),
        ("xi limit", Box::new(|| xi_limit(&sol))),
        ("counting law", Box::new(|| counting_law(&run_count_scan(&scan_dir)))),
        ("remainder diagnostics", Box::new(|| remainder_diagnostics(&sol))),
        ("D norm and unitarity", Box::new(d_norm)),
        ("counting-inequality fuzz", Box::new(weyl_fuzz)),
        ("determinism and persistence", Box::new(|| determinism(root.path()))),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| outcome(false, "check panicked"));
        if !result.passed {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {}",
            if result.passed { "PASS" } else { "FAIL" },
            k + 1,
            result.detail
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
