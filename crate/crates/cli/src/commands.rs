use std::path::{Path, PathBuf};

use efimov_core::counting::{
    channel_target_slope, closed_form_count, count_above, step_target_slope, weyl_property_suite, CountingScan,
    DoubleLogFit, WeylReport, MIN_FIT_POINTS,
};
use efimov_core::numerics::eigen::symmetric_eigen;
use efimov_core::numerics::{LogScalar, RadialGrid, ZArg};
use efimov_core::three_body::{
    assemble_comparison, b1_hs_bound, d_norm_check, d_operator, remainder_ops, script_t_matrix,
    script_t_prime_matrix, t_pm_matrix, three_body_grid, BlockOperator, ChainContext, Channel, OperatorLabel,
    D_NORM_BOUND, D_NORM_TOLERANCE,
};
use efimov_core::two_body::{bs_radial_matrix, default_radial_grid, tune_resonance, TwoBodySolution, WeightSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{mode_name, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::output::{self, csv_writer, ensure_dir, log10, write_json, z_text, SolutionBody};

/// Nodes of the D-norm discretization.
pub const D_NORM_NODES: usize = 512;

pub const SOLUTION_FILE: &str = "solution.json";

pub struct Context {
    pub config: LoadedConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: LoadedConfig, out: Option<PathBuf>) -> CliResult<Self> {
        let out = out.unwrap_or_else(|| config.out_dir());
        ensure_dir(&out)?;
        Ok(Self { config, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        output::artifact(&self.out, name)
    }

    fn hash(&self) -> &str {
        &self.config.hash
    }

    fn grid(&self, spec: &WeightSpec) -> CliResult<RadialGrid> {
        let g = &self.config.config.grid;
        Ok(three_body_grid(spec, g.n, g.points_per_panel)?)
    }
}

pub fn load_solution(path: &Path) -> CliResult<TwoBodySolution> {
    Ok(output::read_solution(path)?.body.solution)
}

// ---- tune ----

#[derive(Serialize)]
struct TuneBody<'a> {
    /// Top eigenvalue of the tuned operator at zero energy.
    top_eigenvalue: f64,
    #[serde(flatten)]
    solution: &'a SolutionBody,
}

pub fn tune(ctx: &Context) -> CliResult<PathBuf> {
    let potential = ctx.config.potential()?;
    let grid = default_radial_grid(&potential, ctx.config.config.grid.radial_n)?;
    let solution = tune_resonance(&potential, &grid, None)?;
    let m = bs_radial_matrix(&solution.potential, 1, ZArg::Limit, &solution.grid)?;
    let top = *symmetric_eigen(&m, false)?.values.last().expect("nonempty grid");
    let fit = solution.slope_fit;
    println!("lambda* = {:.12}", solution.lambda_star);
    println!("c0^2 = {:.12}", solution.c0_squared);
    println!("top eigenvalue at z = 0: {top:.15}");
    println!(
        "mu slope: fitted {:.6e}, expected (pi/2) c0^2 = {:.6e}, ratio {:.5}",
        fit.coefficient, fit.target, fit.ratio
    );
    let body = SolutionBody { solution };
    let path = ctx.path(SOLUTION_FILE);
    write_json(
        &path,
        ctx.hash(),
        TuneBody {
            top_eigenvalue: top,
            solution: &body,
        },
    )?;
    println!("wrote {}", path.display());
    Ok(path)
}

// ---- spectrum ----

#[derive(Debug, Serialize)]
struct SpectrumRow {
    label: &'static str,
    quantity: &'static str,
    z: Option<String>,
    log10_z: Option<f64>,
    r_eps: Option<f64>,
    n: usize,
    k: usize,
    lambda_k: f64,
    /// `xi / (pi/2 + pi (k - 1))`, for the step operator only.
    analytic: Option<f64>,
}

pub fn parse_label(text: &str) -> CliResult<OperatorLabel> {
    text.parse().map_err(|_| {
        CliError::Usage(format!(
            "unknown operator `{text}`; expected one of Tplus, Tminus, scriptT, scriptTprime, B1, B2, B3, S, D"
        ))
    })
}

/// Chain context at the first configured `z`; its `psi` transform serves every `z`.
fn base_chain(ctx: &Context, solution: &TwoBodySolution) -> CliResult<ChainContext> {
    let spec = ctx.config.weight(solution, ctx.config.z_values[0])?;
    Ok(ChainContext::new(solution, &spec, None)?)
}

fn build_operator(
    label: OperatorLabel,
    base: Option<&ChainContext>,
    solution: &TwoBodySolution,
    spec: &WeightSpec,
    grid: &RadialGrid,
) -> CliResult<BlockOperator> {
    let chain = || base.expect("chain operators need a context").with_spec(solution, spec);
    Ok(match label {
        OperatorLabel::ScriptT => script_t_matrix(spec, grid)?,
        OperatorLabel::ScriptTPrime => script_t_prime_matrix(spec, grid)?,
        OperatorLabel::Tplus => t_pm_matrix(&chain()?, grid, Channel::Plus)?,
        OperatorLabel::Tminus => t_pm_matrix(&chain()?, grid, Channel::Minus)?,
        OperatorLabel::B1 => remainder_ops(&chain()?, grid)?.b1,
        OperatorLabel::B2 => remainder_ops(&chain()?, grid)?.b2,
        OperatorLabel::B3 => remainder_ops(&chain()?, grid)?.b3,
        OperatorLabel::S => remainder_ops(&chain()?, grid)?.s,
        OperatorLabel::D => d_operator(D_NORM_NODES)?,
    })
}

/// Eigenvalues for self-adjoint operators, singular values otherwise.
fn spectrum_of(op: &BlockOperator) -> CliResult<(&'static str, Vec<f64>)> {
    Ok(if op.label.is_self_adjoint() {
        ("eigenvalue", op.eigenvalues()?)
    } else {
        ("singular_value", op.singular_values()?)
    })
}

pub fn spectrum(ctx: &Context, solution: &TwoBodySolution, label: OperatorLabel) -> CliResult<PathBuf> {
    let path = ctx.path(&format!("spectrum_{}.csv", label.as_str()));
    let mut writer = csv_writer(&path)?;
    if label == OperatorLabel::D {
        let (quantity, values) = spectrum_of(&d_operator(D_NORM_NODES)?)?;
        for (k, v) in values.iter().enumerate() {
            writer.serialize(SpectrumRow {
                label: label.as_str(),
                quantity,
                z: None,
                log10_z: None,
                r_eps: None,
                n: D_NORM_NODES,
                k: k + 1,
                lambda_k: *v,
                analytic: None,
            })?;
        }
    } else {
        let r_eps = ctx.config.config.r_eps;
        let needs_chain = !matches!(label, OperatorLabel::ScriptT | OperatorLabel::ScriptTPrime);
        let base = needs_chain.then(|| base_chain(ctx, solution)).transpose()?;
        let blocks: Vec<Vec<SpectrumRow>> = ctx
            .config
            .z_values
            .par_iter()
            .map(|&z| -> CliResult<Vec<SpectrumRow>> {
                let spec = ctx.config.weight(solution, z)?;
                let grid = ctx.grid(&spec)?;
                let op = build_operator(label, base.as_ref(), solution, &spec, &grid)?;
                let (quantity, values) = spectrum_of(&op)?;
                let xi = spec.xi(r_eps)?;
                let n = grid.len();
                Ok(values
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| SpectrumRow {
                        label: label.as_str(),
                        quantity,
                        z: Some(z_text(z)),
                        log10_z: Some(log10(z)),
                        r_eps: Some(r_eps),
                        n,
                        k: k + 1,
                        lambda_k: v,
                        analytic: (label == OperatorLabel::ScriptT && k < n)
                            .then(|| xi / (std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64)),
                    })
                    .collect())
            })
            .collect::<CliResult<_>>()?;
        for row in blocks.into_iter().flatten() {
            writer.serialize(row)?;
        }
    }
    writer.flush().map_err(|e| CliError::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(path)
}

// ---- count-scan ----

/// Counted families: both channels together, each channel, and the step operator.
const SCAN_LABELS: [&str; 4] = ["TplusTminus", "Tplus", "Tminus", "scriptT"];

#[derive(Debug, Serialize)]
struct ScanRow<'a> {
    label: &'a str,
    z: String,
    log10_z: f64,
    #[serde(rename = "L")]
    l: f64,
    a: f64,
    count: usize,
}

struct ZPoint {
    z: LogScalar,
    mode: &'static str,
    tplus: Vec<f64>,
    tminus: Vec<f64>,
    xi: f64,
}

#[derive(Debug, Serialize)]
struct FitEntry {
    label: &'static str,
    a: f64,
    counts: Vec<usize>,
    #[serde(flatten)]
    fit: DoubleLogFit,
}

#[derive(Debug, Serialize)]
struct FitBody {
    /// What the counts stand for: eigenvalues of the operator chain above `a`,
    /// used in place of three-body bound states, which lie beyond double range.
    proxy: &'static str,
    r_eps: f64,
    n: usize,
    c0_squared: f64,
    modes: Vec<&'static str>,
    fits: Vec<FitEntry>,
}

#[derive(Debug, Serialize)]
struct ComparisonBody {
    comparison: efimov_core::three_body::ComparisonReport,
}

pub fn count_scan(ctx: &Context, solution: &TwoBodySolution) -> CliResult<()> {
    let z_values = &ctx.config.z_values;
    if z_values.len() < MIN_FIT_POINTS {
        return Err(CliError::InsufficientData(format!(
            "count-scan needs at least {MIN_FIT_POINTS} z values, got {}",
            z_values.len()
        )));
    }
    let cfg = &ctx.config.config;
    let base = base_chain(ctx, solution)?;
    let points: Vec<ZPoint> = z_values
        .par_iter()
        .map(|&z| -> CliResult<ZPoint> {
            let spec = ctx.config.weight(solution, z)?;
            let grid = ctx.grid(&spec)?;
            let chain = base.with_spec(solution, &spec)?;
            Ok(ZPoint {
                z,
                mode: mode_name(spec.mode),
                tplus: t_pm_matrix(&chain, &grid, Channel::Plus)?.eigenvalues()?,
                tminus: t_pm_matrix(&chain, &grid, Channel::Minus)?.eigenvalues()?,
                xi: spec.xi(cfg.r_eps)?,
            })
        })
        .collect::<CliResult<_>>()?;

    let scan_path = ctx.path("scan.csv");
    let mut writer = csv_writer(&scan_path)?;
    let mut fits = Vec::new();
    for &a in &cfg.a_list {
        for label in SCAN_LABELS {
            let target = match label {
                "TplusTminus" => channel_target_slope(2, a),
                "scriptT" => step_target_slope(solution.c0_squared, a),
                _ => channel_target_slope(1, a),
            };
            let mut scan = CountingScan::new(label, a, target)?;
            for p in &points {
                let count = match label {
                    "TplusTminus" => count_above(&p.tplus, a)? + count_above(&p.tminus, a)?,
                    "Tplus" => count_above(&p.tplus, a)?,
                    "Tminus" => count_above(&p.tminus, a)?,
                    _ => closed_form_count(p.xi, a)?,
                };
                scan.push(p.z, count)?;
            }
            for k in 0..scan.len() {
                writer.serialize(ScanRow {
                    label,
                    z: z_text(scan.z_list[k]),
                    log10_z: log10(scan.z_list[k]),
                    l: scan.l_values[k],
                    a,
                    count: scan.counts[k],
                })?;
            }
            let fit = scan.fit()?;
            println!(
                "{label:>12} a = {a}: slope {:.4} vs target {:.4} ({:+.1}%)",
                fit.slope,
                fit.target,
                100.0 * fit.relative_gap
            );
            fits.push(FitEntry {
                label,
                a,
                counts: scan.counts.clone(),
                fit,
            });
        }
    }
    writer.flush().map_err(|e| CliError::io(&scan_path, e))?;

    let fit_path = ctx.path("fit.json");
    write_json(
        &fit_path,
        ctx.hash(),
        FitBody {
            proxy: "eigenvalue counts of the channel operators and of the step operator; three-body bound states are not computed",
            r_eps: cfg.r_eps,
            n: cfg.grid.n,
            c0_squared: solution.c0_squared,
            modes: points.iter().map(|p| p.mode).collect(),
            fits,
        },
    )?;

    let spec = ctx.config.weight(solution, z_values[0])?;
    let grid = ctx.grid(&spec)?;
    let chain = base.with_spec(solution, &spec)?;
    let comparison = assemble_comparison(&chain, &grid, &cfg.a_list, cfg.relative_eps)?;
    write_json(&ctx.path("comparison.json"), ctx.hash(), ComparisonBody { comparison })?;
    println!("wrote {}, {} and comparison.json", scan_path.display(), fit_path.display());
    Ok(())
}

// ---- validate ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Dnorm,
    Weyl,
    Remainders,
    Envelope,
}

impl Suite {
    pub fn parse(text: &str) -> CliResult<Self> {
        Ok(match text {
            "dnorm" => Self::Dnorm,
            "weyl" => Self::Weyl,
            "remainders" => Self::Remainders,
            "envelope" => Self::Envelope,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown suite `{other}`; expected dnorm, weyl, remainders or envelope"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Dnorm => "dnorm",
            Self::Weyl => "weyl",
            Self::Remainders => "remainders",
            Self::Envelope => "envelope",
        }
    }

    pub fn needs_solution(self) -> bool {
        matches!(self, Self::Remainders | Self::Envelope)
    }
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: f64,
    bound: f64,
    passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            passed: value <= bound,
        }
    }
}

#[derive(Debug, Serialize)]
struct ValidateBody {
    suite: &'static str,
    passed: bool,
    checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weyl: Option<WeylReport>,
}

const WEYL_DIMENSION: usize = 20;
/// Sample points of `ln s` per `z` in the envelope suite.
const ENVELOPE_SAMPLES: usize = 200;

pub fn validate(ctx: &Context, suite: Suite, solution: Option<&TwoBodySolution>, seed: u64) -> CliResult<()> {
    let cfg = &ctx.config.config;
    let mut weyl = None;
    let checks = match suite {
        Suite::Dnorm => {
            let norm = d_norm_check(D_NORM_NODES)?;
            vec![Check::at_most(format!("D norm, n = {D_NORM_NODES}"), norm, D_NORM_BOUND + D_NORM_TOLERANCE)]
        }
        Suite::Weyl => {
            let report = weyl_property_suite(cfg.weyl_trials, WEYL_DIMENSION, seed)?;
            let checks = vec![Check::at_most("violations", report.violations.len() as f64, 0.0)];
            weyl = Some(report);
            checks
        }
        Suite::Remainders => {
            let solution = solution.expect("suite needs a solution");
            let base = base_chain(ctx, solution)?;
            ctx.config
                .z_values
                .par_iter()
                .map(|&z| -> CliResult<Check> {
                    let spec = ctx.config.weight(solution, z)?;
                    let grid = ctx.grid(&spec)?;
                    let chain = base.with_spec(solution, &spec)?;
                    let b1 = remainder_ops(&chain, &grid)?.b1.hs_norm().powi(2);
                    let bound = b1_hs_bound(spec.delta, chain.psi.alpha_bound, spec.r_eps);
                    Ok(Check::at_most(format!("|B1|_HS^2 at z = {}", z_text(z)), b1, bound))
                })
                .collect::<CliResult<_>>()?
        }
        Suite::Envelope => {
            let solution = solution.expect("suite needs a solution");
            let mut checks = Vec::new();
            for &z in &ctx.config.z_values {
                let spec = ctx.config.weight(solution, z)?;
                let (lo, hi) = (spec.ln_s_floor(), cfg.r_eps.ln());
                let mut excess: f64 = 0.0;
                for k in 0..=ENVELOPE_SAMPLES {
                    let ln_s = lo + (hi - lo) * k as f64 / ENVELOPE_SAMPLES as f64;
                    let ratio = spec.envelope_ratio(ln_s)?;
                    excess = excess
                        .max(ratio / spec.delta - 1.0)
                        .max(1.0 - ratio / spec.delta_prime);
                }
                checks.push(Check::at_most(format!("envelope excess at z = {}", z_text(z)), excess, 1e-9));
            }
            checks
        }
    };
    let passed = checks.iter().all(|c| c.passed);
    let path = ctx.path(&format!("validate_{}.json", suite.name()));
    write_json(
        &path,
        ctx.hash(),
        ValidateBody {
            suite: suite.name(),
            passed,
            checks,
            weyl,
        },
    )?;
    println!("{}: {} ({})", suite.name(), if passed { "PASS" } else { "FAIL" }, path.display());
    if passed {
        Ok(())
    } else {
        Err(CliError::Acceptance(format!("suite {} failed, see {}", suite.name(), path.display())))
    }
}
