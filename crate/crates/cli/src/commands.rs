//! Command runners. Each writes its artifacts into the output directory and
//! returns a one-line summary.

use std::fs;
use std::path::{Path, PathBuf};

use dotbench_core::complexity::{intrinsic_dimension_demo, rate_experiment, RateReport, RateSpec};
use dotbench_core::measure::stream_rng;
use dotbench_core::solver::solve;
use dotbench_core::stability::{
    random_feasible, stability_experiment, strong_convexity_check_at, RhoWeight,
};
use dotbench_core::stats::log_log_fit;
use dotbench_core::{Coupling, DivergenceKind, SolverOptions};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    load, ComplexityConfig, FigureConfig, IntrinsicConfig, ProblemConfig, StabilityConfig,
    StrongConvexityConfig,
};
use crate::defaults::DEFAULTS;
use crate::error::{CliError, CliResult};
use crate::svg::{heatmap, loglog, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Figure,
    Stability,
    StrongConvexity,
    Complexity,
    IntrinsicDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Figure => "figure",
            Command::Stability => "stability",
            Command::StrongConvexity => "strong-convexity",
            Command::Complexity => "complexity",
            Command::IntrinsicDemo => "intrinsic-demo",
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

impl Overrides {
    fn solver(&self, mut opts: SolverOptions) -> SolverOptions {
        if let Some(t) = self.tol {
            opts.tol = t;
        }
        if let Some(m) = self.max_iters {
            opts.max_iters = m;
        }
        opts
    }

    fn seed(&self, configured: Option<u64>) -> u64 {
        self.seed.or(configured).unwrap_or(DEFAULTS.seed)
    }

    fn rate(&self, spec: &mut RateSpec<f64>) {
        spec.solver = self.solver(spec.solver);
        if let Some(s) = self.seed {
            spec.seed = s;
        }
    }
}

pub struct RunConfig {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub overrides: Overrides,
}

impl RunConfig {
    /// Checks that the config exists (when required) and that the output
    /// directory can be created and written.
    pub fn validate(&self) -> CliResult<()> {
        match &self.config {
            Some(p) if !p.is_file() => {
                return Err(CliError::Config(format!(
                    "config file {} does not exist",
                    p.display()
                )))
            }
            None if self.command != Command::Figure => {
                return Err(CliError::Config(format!(
                    "command {} needs --config",
                    self.command.name()
                )))
            }
            _ => {}
        }
        fs::create_dir_all(&self.out).map_err(|e| {
            CliError::Config(format!(
                "cannot create output directory {}: {e}",
                self.out.display()
            ))
        })?;
        let probe = self.out.join(".dotbench-write-probe");
        fs::write(&probe, b"")
            .and_then(|_| fs::remove_file(&probe))
            .map_err(|e| {
                CliError::Config(format!(
                    "output directory {} is not writable: {e}",
                    self.out.display()
                ))
            })
    }

    fn config_path(&self) -> &Path {
        self.config.as_deref().expect("validated")
    }
}

pub fn run(cfg: &RunConfig) -> CliResult<String> {
    cfg.validate()?;
    match cfg.command {
        Command::Solve => run_solve(cfg),
        Command::Figure => run_figure(cfg),
        Command::Stability => run_stability(cfg),
        Command::StrongConvexity => run_strong_convexity(cfg),
        Command::Complexity => run_complexity(cfg),
        Command::IntrinsicDemo => run_intrinsic(cfg),
    }
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(dir.join(name), contents).map_err(|e| CliError::Io(format!("writing {name}: {e}")))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    write(dir, name, s)
}

/// One row per product atom: the multi-index, mass and density.
fn coupling_csv(c: &Coupling) -> String {
    let shape = c.product_shape();
    let mut s: String = (0..shape.ndim()).map(|a| format!("i{a},")).collect();
    s.push_str("mass,density\n");
    for (flat, (m, d)) in c.mass().iter().zip(c.density()).enumerate() {
        for k in shape.unravel(flat) {
            s.push_str(&format!("{k},"));
        }
        s.push_str(&format!("{m:e},{d:e}\n"));
    }
    s
}

/// Density on the first two axes (summing the mass of the others), ready for
/// a heatmap.
fn density_grid(c: &Coupling, tuple: &dotbench_core::MarginalTuple) -> (Vec<f64>, usize, usize) {
    let shape = c.product_shape().shape().to_vec();
    let (r, k) = (shape[0], shape[1]);
    let mut mass = vec![0.0; r * k];
    for (flat, m) in c.mass().iter().enumerate() {
        let idx = c.product_shape().unravel(flat);
        mass[idx[0] * k + idx[1]] += m;
    }
    let (a, b) = (tuple.marginal(0).weights(), tuple.marginal(1).weights());
    let density = (0..r * k)
        .map(|f| mass[f] / (a[f / k] * b[f % k]))
        .collect();
    (density, r, k)
}

fn slug(kind: DivergenceKind) -> String {
    match kind {
        DivergenceKind::Entropic => "entropic".into(),
        DivergenceKind::Alpha(a) => format!("alpha-{a}"),
        DivergenceKind::PolyDual(b) => format!("poly-beta-{b}"),
    }
}

fn run_solve(cfg: &RunConfig) -> CliResult<String> {
    let pc: ProblemConfig = load(cfg.config_path())?;
    let prob = pc.build()?;
    let opts = cfg.overrides.solver(pc.solver());
    let sol = solve(&prob, &opts)?;
    let tuple = prob.marginals();
    let support = sol.coupling.support_count(DEFAULTS.support_threshold);
    let summary = json!({
        "divergence": prob.divergence().kind(),
        "epsilon": prob.epsilon(),
        "value": sol.primal_value,
        "dual_value": sol.dual_value,
        "gap": sol.gap,
        "relative_gap": sol.relative_gap(),
        "residual": sol.residual,
        "marginal_error": sol.coupling.marginal_error(tuple)?,
        "iterations": sol.iterations,
        "support_count": support,
        "support_size": sol.coupling.mass().len(),
        "potentials": sol.potentials.original(),
        "solver": opts,
    });
    write_json(&cfg.out, "solution.json", &summary)?;
    write(&cfg.out, "coupling.csv", coupling_csv(&sol.coupling))?;
    Ok(format!(
        "value {:.12e}, relative gap {:.2e}, residual {:.2e}, {} iterations",
        sol.primal_value,
        sol.relative_gap(),
        sol.residual,
        sol.iterations
    ))
}

#[derive(Serialize)]
struct FigureRun {
    divergence: DivergenceKind,
    support_count: usize,
    support_size: usize,
    asymmetry: Option<f64>,
    value: f64,
    relative_gap: f64,
    iterations: usize,
    heatmap: String,
    coupling: String,
}

fn run_figure(cfg: &RunConfig) -> CliResult<String> {
    let fc: FigureConfig = match &cfg.config {
        Some(p) => load(p)?,
        None => FigureConfig::default(),
    };
    let opts = cfg.overrides.solver(fc.solver());
    let threshold = fc.support_threshold();
    let mut runs = Vec::new();
    for kind in fc.divergences() {
        let prob = fc.instance(kind)?;
        let sol = solve(&prob, &opts)?;
        let name = slug(kind);
        let (grid, r, k) = density_grid(&sol.coupling, prob.marginals());
        let support = sol.coupling.support_count(threshold);
        let title = format!(
            "{kind}, eps = {}, support {support} of {}",
            fc.epsilon(),
            r * k
        );
        let heat = format!("heatmap_{name}.svg");
        let csv = format!("coupling_{name}.csv");
        write(
            &cfg.out,
            &heat,
            heatmap(
                &grid,
                r,
                k,
                DEFAULTS.heatmap_cell_px,
                &title,
                "x1 index",
                "x2 index",
            ),
        )?;
        write(&cfg.out, &csv, coupling_csv(&sol.coupling))?;
        runs.push(FigureRun {
            divergence: kind,
            support_count: support,
            support_size: r * k,
            asymmetry: sol.coupling.asymmetry(),
            value: sol.primal_value,
            relative_gap: sol.relative_gap(),
            iterations: sol.iterations,
            heatmap: heat,
            coupling: csv,
        });
    }
    let mut csv = String::from("divergence,support_count,support_size,value\n");
    for r in &runs {
        csv.push_str(&format!(
            "{},{},{},{:e}\n",
            r.divergence, r.support_count, r.support_size, r.value
        ));
    }
    write(&cfg.out, "summary.csv", csv)?;
    write_json(
        &cfg.out,
        "summary.json",
        &json!({
            "points": fc.points(),
            "epsilon": fc.epsilon(),
            "support_threshold": threshold,
            "runs": runs,
        }),
    )?;
    Ok(runs
        .iter()
        .map(|r| format!("{}: support {}", r.divergence, r.support_count))
        .collect::<Vec<_>>()
        .join(", "))
}

fn run_stability(cfg: &RunConfig) -> CliResult<String> {
    let sc: StabilityConfig = load(cfg.config_path())?;
    let prob = sc.problem.build()?;
    let opts = cfg.overrides.solver(sc.problem.solver());
    let q = sc.q.unwrap_or(DEFAULTS.stability_q);
    let levels = sc
        .levels
        .clone()
        .unwrap_or_else(|| DEFAULTS.stability_levels());
    let seed = cfg.overrides.seed(sc.seed);
    let report = stability_experiment(&prob, &opts, &sc.perturbation, q, &levels, seed)?;
    write_json(&cfg.out, "stability.json", &report)?;
    write(&cfg.out, "stability.csv", report.to_csv())?;
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.delta > 0.0 && r.wq > 0.0)
        .map(|r| (r.delta, r.wq))
        .collect();
    let fit = if pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        log_log_fit(&x, &y).ok().map(|f| (f.slope, f.intercept))
    } else {
        None
    };
    let series = Series {
        name: format!("{}", prob.divergence().kind()),
        points: pts.iter().map(|&(x, y)| (x, y, 0.0)).collect(),
        fit,
    };
    write(
        &cfg.out,
        "stability.svg",
        loglog(
            &[series],
            "Coupling distance against marginal perturbation",
            "Delta = W_p(mu; mu~)",
            &format!("W_{q}(pi*, pi~*)"),
        ),
    )?;
    Ok(format!(
        "slope {}, ratio spread {}",
        report.slope.map_or("n/a".into(), |s| format!("{s:.3}")),
        report
            .ratio_spread
            .map_or("n/a".into(), |s| format!("{s:.3}"))
    ))
}

#[derive(Serialize)]
struct PairCheck {
    pair: usize,
    sampler: usize,
    lhs: f64,
    rhs: f64,
    tolerance: f64,
    slack: f64,
    ok: bool,
}

fn run_strong_convexity(cfg: &RunConfig) -> CliResult<String> {
    let sc: StrongConvexityConfig = load(cfg.config_path())?;
    let prob = sc.problem.build()?;
    let opts = cfg.overrides.solver(sc.problem.solver());
    let pairs = sc.pairs.unwrap_or(DEFAULTS.strong_convexity_pairs);
    let samplers = sc
        .samplers
        .clone()
        .unwrap_or_else(|| DEFAULTS.strong_convexity_samplers.to_vec());
    if samplers.is_empty() {
        return Err(CliError::Config(
            "strong-convexity needs at least one sampler".into(),
        ));
    }
    let weight = sc
        .weight
        .clone()
        .unwrap_or_else(|| RhoWeight::first_atom(DEFAULTS.strong_convexity_weight_q));
    let mut rng = stream_rng(cfg.overrides.seed(sc.seed), 0);
    let star = solve(&prob, &opts)?.coupling;
    let mut checks = Vec::with_capacity(pairs);
    for pair in 0..pairs {
        let k = pair % samplers.len();
        let pi = random_feasible(prob.marginals(), &star, samplers[k], &mut rng)?;
        let c = strong_convexity_check_at(&prob, &star, &pi, &weight)?;
        checks.push(PairCheck {
            pair,
            sampler: k,
            lhs: c.lhs,
            rhs: c.rhs,
            tolerance: c.tolerance,
            slack: c.slack(),
            ok: c.ok,
        });
    }
    let violations = checks.iter().filter(|c| !c.ok).count();
    let min_slack = checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
    let mut csv = String::from("pair,sampler,lhs,rhs,tolerance,slack,ok\n");
    for c in &checks {
        csv.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e},{}\n",
            c.pair, c.sampler, c.lhs, c.rhs, c.tolerance, c.slack, c.ok
        ));
    }
    write(&cfg.out, "strong_convexity.csv", csv)?;
    write_json(
        &cfg.out,
        "strong_convexity.json",
        &json!({
            "divergence": prob.divergence().kind(),
            "epsilon": prob.epsilon(),
            "pairs": pairs,
            "samplers": samplers,
            "weight": weight,
            "violations": violations,
            "min_slack": min_slack,
            "checks": checks,
        }),
    )?;
    let line = format!("{pairs} pairs, {violations} violations, min slack {min_slack:.3e}");
    if violations > 0 {
        return Err(CliError::CheckFailed(line));
    }
    Ok(line)
}

fn rate_series(name: &str, r: &RateReport) -> Series {
    Series {
        name: name.into(),
        points: r
            .n_values
            .iter()
            .zip(&r.mean_abs_errors)
            .zip(&r.std_errors)
            .map(|((&n, &m), &se)| (n as f64, m, 2.0 * se))
            .collect(),
        fit: Some((r.slope, r.intercept)),
    }
}

fn write_rate(dir: &Path, stem: &str, r: &RateReport) -> CliResult<()> {
    write_json(dir, &format!("{stem}.json"), r)?;
    write(dir, &format!("{stem}.csv"), r.to_csv())
}

fn run_complexity(cfg: &RunConfig) -> CliResult<String> {
    let mut cc: ComplexityConfig = load(cfg.config_path())?;
    cfg.overrides.rate(&mut cc.experiment);
    let r = rate_experiment(&cc.experiment)?;
    write_rate(&cfg.out, "rate_report", &r)?;
    write(
        &cfg.out,
        "rate.svg",
        loglog(
            &[rate_series(&format!("{}", cc.experiment.divergence), &r)],
            "Plug-in error against sample size (bars: 2 standard errors)",
            "n",
            "mean |OT(empirical) - reference|",
        ),
    )?;
    Ok(format!(
        "slope {:.3} [{:.3}, {:.3}]",
        r.slope, r.slope_ci.0, r.slope_ci.1
    ))
}

fn run_intrinsic(cfg: &RunConfig) -> CliResult<String> {
    let mut ic: IntrinsicConfig = load(cfg.config_path())?;
    cfg.overrides.rate(&mut ic.experiment);
    let (curve, boxed) =
        intrinsic_dimension_demo(&ic.curve, &ic.experiment, ic.box_resolutions.clone())?;
    write_rate(&cfg.out, "curve_report", &curve)?;
    write_rate(&cfg.out, "box_report", &boxed)?;
    write_json(
        &cfg.out,
        "summary.json",
        &json!({
            "curve": ic.curve,
            "curve_slope": curve.slope,
            "curve_slope_ci": curve.slope_ci,
            "box_slope": boxed.slope,
            "box_slope_ci": boxed.slope_ci,
            "difference": curve.slope - boxed.slope,
        }),
    )?;
    write(
        &cfg.out,
        "intrinsic.svg",
        loglog(
            &[
                rate_series("curve", &curve),
                rate_series("bounding box", &boxed),
            ],
            "Plug-in error: curve-supported against ambient marginals",
            "n",
            "mean |OT(empirical) - reference|",
        ),
    )?;
    Ok(format!(
        "curve slope {:.3}, bounding-box slope {:.3}",
        curve.slope, boxed.slope
    ))
}
