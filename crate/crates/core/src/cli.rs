//! Command-line surface.
//!
//! Every subcommand reads its settings from flags, then from the matching
//! table of an optional TOML config file, then from built-in defaults.
//! Errors print one line `error kind=<tag> msg=<text>` on stderr; the exit
//! code is 2 for bad input and 3 for numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{invalid, Error, Result};
use crate::frontier::{estimate_curve, residuals, EstimatorConfig, Orientation, Smoother};
use crate::io::{
    format_metrics_table, load_csv, load_residuals, open_output, write_comparison, write_csv,
    write_curve, write_metrics, CurveRow,
};
use crate::kernel_geom::{Kernel, KernelShape};
use crate::limit::{
    bandwidth_local, eval_q1, plug_in_bandwidth, plug_in_bandwidth_global, search_seed, tau_curve,
    BandwidthPlan, BandwidthScope, LimitContext, PlugInSettings, RhoGrid, RhoObjective,
};
use crate::rng::{derive_seed, substream};
use crate::sim::{
    comparison_h_grid, run_comparison, run_mc_study, table_seed, utility_like_fixture, BandwidthMode,
    EstimatorChoice, SimScenario, FIXTURE_SEED,
};
use crate::tail::{hill_from_sorted, select_r, DEFAULT_FRACTION};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const DEFAULT_SEED: u64 = 20090101;

#[derive(Debug, Parser)]
#[command(name = "frontier", version, about = "Local linear-programming frontier estimation")]
pub struct Cli {
    /// TOML config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Frontier curve on a grid
    Estimate(EstimateArgs),
    /// Bias/variance/MSE tables for the simulation models
    Simulate(SimulateArgs),
    /// Plug-in bandwidth, from the formula or from data
    Bandwidth(BandwidthArgs),
    /// Tail exponent and constant from residuals
    Tails(TailsArgs),
    /// Smoothed LP estimator against the naive estimator
    Compare(CompareArgs),
    /// Limit-law diagnostics: τ(ρ) curve and Q1 draws
    Limits(LimitsArgs),
    /// Write the synthetic utility-like data set
    Fixture(FixtureArgs),
}

/// Field-wise `self.f = self.f.or(other.f)`.
macro_rules! fill_from {
    ($a:expr, $b:expr; $($f:ident),* $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )*
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateArgs {
    /// CSV with header x1,y (or x,y)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// lower | upper
    #[arg(long)]
    pub orientation: Option<String>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_hi: Option<f64>,
    /// local | global | fixed
    #[arg(long)]
    pub bandwidth_mode: Option<String>,
    /// bandwidth for fixed mode
    #[arg(long)]
    pub h: Option<f64>,
    /// pilot bandwidth for curvature and tails (default: range / 5)
    #[arg(long)]
    pub pilot_bandwidth: Option<f64>,
    /// biquadratic | epanechnikov | uniform
    #[arg(long)]
    pub kernel: Option<String>,
    /// hat | check
    #[arg(long)]
    pub smoother: Option<String>,
    #[arg(long)]
    pub n_mc: Option<usize>,
    /// scaled-mse | tau
    #[arg(long)]
    pub objective: Option<String>,
    /// threshold B on |ã| (default 10 max|Y|)
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub clamp_value: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl EstimateArgs {
    fn fill(&mut self, o: &Self) {
        fill_from!(self, o; data, orientation, grid_points, grid_lo, grid_hi, bandwidth_mode, h,
            pilot_bandwidth, kernel, smoother, n_mc, objective, bound, clamp_value, resolution, output);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// sample sizes
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// single model (1, 2 or 3) instead of the full table
    #[arg(long)]
    pub model: Option<u8>,
    #[arg(long)]
    pub a0: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    #[arg(long)]
    pub x_eval: Option<f64>,
    /// hat | check | tilde | naive | oracle
    #[arg(long)]
    pub estimator: Option<String>,
    /// plugin | fixed | rate
    #[arg(long)]
    pub bandwidth_mode: Option<String>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub n_mc: Option<usize>,
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl SimulateArgs {
    fn fill(&mut self, o: &Self) {
        fill_from!(self, o; n, reps, model, a0, c, x_eval, estimator, bandwidth_mode, h, n_mc, objective, output);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthArgs {
    #[arg(long)]
    pub w_hat: Option<f64>,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub c_hat: Option<f64>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// data file; switches to the plug-in pipeline
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub orientation: Option<String>,
    /// evaluation points (one for local, several for global)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// local | global
    #[arg(long)]
    pub scope: Option<String>,
    #[arg(long)]
    pub pilot_bandwidth: Option<f64>,
    #[arg(long)]
    pub n_mc: Option<usize>,
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl BandwidthArgs {
    fn fill(&mut self, o: &Self) {
        fill_from!(self, o; w_hat, rho0, c_hat, p, n, data, orientation, x, scope, pilot_bandwidth, n_mc, objective, output);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailsArgs {
    /// single-column CSV with header `residual`
    #[arg(long)]
    pub residuals: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub orientation: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl TailsArgs {
    fn fill(&mut self, o: &Self) {
        fill_from!(self, o; residuals, data, orientation, x, h, r, fraction, output);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareArgs {
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub h_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl CompareArgs {
    fn fill(&mut self, o: &Self) {
        fill_from!(self, o; n, reps, h_grid, output);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsArgs {
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub curvature: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    #[arg(long)]
    pub n_mc: Option<usize>,
    #[arg(long)]
    pub truncation: Option<usize>,
    /// number of Q1(ρ, 1) draws to dump per ρ
    #[arg(long)]
    pub q1_draws: Option<usize>,
    #[arg(long)]
    pub q1_output: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl LimitsArgs {
    fn fill(&mut self, o: &Self) {
        fill_from!(self, o; c, b, curvature, rho, n_mc, truncation, q1_draws, q1_output, output);
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl FixtureArgs {
    fn fill(&mut self, o: &Self) {
        fill_from!(self, o; n, output);
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub estimate: EstimateArgs,
    #[serde(default)]
    pub simulate: SimulateArgs,
    #[serde(default)]
    pub bandwidth: BandwidthArgs,
    #[serde(default)]
    pub tails: TailsArgs,
    #[serde(default)]
    pub compare: CompareArgs,
    #[serde(default)]
    pub limits: LimitsArgs,
    #[serde(default)]
    pub fixture: FixtureArgs,
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| invalid(format!("{}: {}", path.display(), e.message())))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be at least {min}, got {v}")))
    }
}

fn required<T: Clone>(name: &str, v: &Option<T>) -> Result<T> {
    v.clone().ok_or_else(|| invalid(format!("--{} is required", name.replace('_', "-"))))
}

fn orientation(v: &Option<String>) -> Result<Orientation> {
    Orientation::parse(v.as_deref().unwrap_or("lower"))
}

fn objective(v: &Option<String>) -> Result<RhoObjective> {
    RhoObjective::parse(v.as_deref().unwrap_or("scaled-mse"))
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={} msg={}", e.kind(), msg);
            if e.is_input() {
                EXIT_INPUT
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => FileConfig::default(),
    };
    let default_seed = match cli.command {
        Command::Fixture(_) => FIXTURE_SEED,
        _ => DEFAULT_SEED,
    };
    let seed = cli.seed.or(file.seed).unwrap_or(default_seed);
    if let Some(t) = cli.threads.or(file.threads) {
        at_least("threads", t, 1)?;
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    eprintln!("seed: {seed}");
    match cli.command {
        Command::Estimate(mut a) => {
            a.fill(&file.estimate);
            let rows = cmd_estimate(&a, seed)?;
            finish_estimate(&a, &rows)
        }
        Command::Simulate(mut a) => {
            a.fill(&file.simulate);
            cmd_simulate(&a, seed)
        }
        Command::Bandwidth(mut a) => {
            a.fill(&file.bandwidth);
            let plan = cmd_bandwidth(&a, seed)?;
            write_plan(&plan, &mut *open_output(a.output.as_deref())?)
        }
        Command::Tails(mut a) => {
            a.fill(&file.tails);
            cmd_tails(&a)
        }
        Command::Compare(mut a) => {
            a.fill(&file.compare);
            cmd_compare(&a, seed)
        }
        Command::Limits(mut a) => {
            a.fill(&file.limits);
            cmd_limits(&a, seed)
        }
        Command::Fixture(mut a) => {
            a.fill(&file.fixture);
            let data = utility_like_fixture(at_least("n", a.n.unwrap_or(123), 10)?, seed)?;
            let out = required("output", &a.output)?;
            write_csv(&data, &out)
        }
    }
}

/// Frontier curve rows for `estimate`; per-point failures are recorded in
/// the rows.
pub fn cmd_estimate(a: &EstimateArgs, seed: u64) -> Result<Vec<CurveRow>> {
    let orient = orientation(&a.orientation)?;
    let data = load_csv(&required("data", &a.data)?, orient)?;
    if data.dim() != 1 {
        return Err(invalid("estimate supports one covariate"));
    }
    let (lo, hi) = data.bounding_box()[0];
    let range = hi - lo;
    let k = at_least("grid_points", a.grid_points.unwrap_or(34), 1)?;
    let g_lo = a.grid_lo.unwrap_or(lo);
    let g_hi = a.grid_hi.unwrap_or(hi);
    if !(g_lo <= g_hi) || !g_lo.is_finite() || !g_hi.is_finite() {
        return Err(invalid("grid bounds must satisfy grid_lo <= grid_hi"));
    }
    let grid: Vec<f64> = if k == 1 {
        vec![0.5 * (g_lo + g_hi)]
    } else {
        (0..k).map(|i| g_lo + (g_hi - g_lo) * i as f64 / (k - 1) as f64).collect()
    };
    let kernel = Kernel::new(KernelShape::parse(a.kernel.as_deref().unwrap_or("biquadratic"))?, 1)?;
    let smoother = Smoother::parse(a.smoother.as_deref().unwrap_or("hat"))?;
    let pilot = match a.pilot_bandwidth {
        Some(v) => positive("pilot_bandwidth", v)?,
        None => positive("data range / 5", range / 5.0)?,
    };
    let settings = PlugInSettings {
        curvature_bandwidth: pilot,
        tail_bandwidth: pilot,
        n_mc: at_least("n_mc", a.n_mc.unwrap_or(crate::limit::DEFAULT_N_MC), 100)?,
        objective: objective(&a.objective)?,
        kernel: kernel.clone(),
        ..PlugInSettings::default()
    };
    let mode = a.bandwidth_mode.as_deref().unwrap_or("local");
    let bandwidths: Vec<std::result::Result<f64, &'static str>> = match mode {
        "fixed" => {
            let h = positive("h", required("h", &a.h)?)?;
            vec![Ok(h); grid.len()]
        }
        "local" => grid
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                plug_in_bandwidth(&data, x, &settings, search_seed(seed, i as u64))
                    .map(|p| p.h)
                    .map_err(|e| e.kind())
            })
            .collect(),
        "global" => {
            let h = plug_in_bandwidth_global(&data, &grid, &settings, derive_seed(seed, 0))?.h;
            vec![Ok(h); grid.len()]
        }
        other => return Err(invalid(format!("unknown bandwidth mode '{other}'"))),
    };
    let mut rows = Vec::with_capacity(grid.len());
    for (&x, bw) in grid.iter().zip(&bandwidths) {
        let h = match bw {
            Ok(h) => *h,
            Err(kind) => {
                rows.push(CurveRow::failed(vec![x], kind));
                continue;
            }
        };
        let mut cfg = EstimatorConfig::for_data(&data, h);
        if let Some(b) = a.bound {
            cfg.bound = positive("bound", b)?;
        }
        if let Some(c) = a.clamp_value {
            cfg.clamp_value = c;
        }
        if let Some(r) = a.resolution {
            cfg.resolution = at_least("resolution", r, 3)?;
        }
        cfg.validate(1)?;
        let point = estimate_curve(&data, &[vec![x]], &[cfg], &kernel, smoother)?;
        rows.push(CurveRow::from_point(&point[0]));
    }
    Ok(rows)
}

fn finish_estimate(a: &EstimateArgs, rows: &[CurveRow]) -> Result<()> {
    write_curve(rows, &mut *open_output(a.output.as_deref())?)?;
    let failed = rows.iter().filter(|r| !r.is_bounded() || !r.a_smooth.is_finite()).count();
    if 2 * failed > rows.len() {
        return Err(Error::GridFailed {
            failed,
            total: rows.len(),
        });
    }
    Ok(())
}

fn scenarios(a: &SimulateArgs, seed: u64) -> Result<Vec<SimScenario>> {
    let ns = a.n.clone().unwrap_or_else(|| vec![200, 400]);
    let reps = at_least("reps", a.reps.unwrap_or(100), 1)?;
    let mut out = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        at_least("n", n, 50)?;
        let base = table_seed(seed, n);
        match a.model {
            None => out.extend(SimScenario::table_grid(n, reps, base)),
            Some(m) => {
                let a0 = required("a0", &a.a0)?;
                let cs = a.c.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5]);
                for (j, &c) in cs.iter().enumerate() {
                    out.push(SimScenario {
                        reps,
                        seed: derive_seed(base, (k * 1000 + j) as u64),
                        ..SimScenario::new(m, a0, positive("c", c)?, n)
                    });
                }
            }
        }
    }
    if let Some(x) = a.x_eval {
        out.iter_mut().for_each(|s| s.x_eval = x);
    }
    for s in &out {
        s.validate()?;
    }
    Ok(out)
}

pub fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Result<()> {
    let scs = scenarios(a, seed)?;
    let estimator = EstimatorChoice::parse(a.estimator.as_deref().unwrap_or("hat"))?;
    let mode = match a.bandwidth_mode.as_deref().unwrap_or("plugin") {
        "plugin" => BandwidthMode::PlugIn(PlugInSettings {
            n_mc: at_least("n_mc", a.n_mc.unwrap_or(crate::limit::DEFAULT_N_MC), 100)?,
            objective: objective(&a.objective)?,
            ..PlugInSettings::default()
        }),
        "fixed" => BandwidthMode::Fixed(positive("h", required("h", &a.h)?)?),
        "rate" => BandwidthMode::Rate,
        other => return Err(invalid(format!("unknown bandwidth mode '{other}'"))),
    };
    let table = run_mc_study(&scs, &estimator, &mode, &Kernel::biquadratic(1))?;
    let to_stdout = a.output.as_ref().is_none_or(|p| p.as_os_str() == "-");
    write_metrics(&table, &mut *open_output(a.output.as_deref())?)?;
    let layout = format_metrics_table(&table);
    if to_stdout {
        eprint!("{layout}");
    } else {
        print!("{layout}");
    }
    Ok(())
}

pub const PLAN_HEADER: &str = "rho0,tau_at_rho0,c_hat,b_hat,w_hat,h,scope";

pub fn write_plan(plan: &BandwidthPlan, out: &mut dyn Write) -> Result<()> {
    let scope = match plan.scope {
        BandwidthScope::Local => "local",
        BandwidthScope::Global => "global",
    };
    writeln!(out, "{PLAN_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        plan.rho0, plan.tau_at_rho0, plan.c_hat, plan.b_hat, plan.w_hat, plan.h, scope
    )?;
    Ok(())
}

pub fn cmd_bandwidth(a: &BandwidthArgs, seed: u64) -> Result<BandwidthPlan> {
    let Some(path) = &a.data else {
        let w = positive("w_hat", required("w_hat", &a.w_hat)?)?;
        let rho = positive("rho0", required("rho0", &a.rho0)?)?;
        let c = positive("c_hat", required("c_hat", &a.c_hat)?)?;
        let p = at_least("p", a.p.unwrap_or(1), 1)?;
        let n = at_least("n", required("n", &a.n)?, 1)?;
        return bandwidth_local(w, rho, c, p, n);
    };
    let data = load_csv(path, orientation(&a.orientation)?)?;
    if data.dim() != 1 {
        return Err(invalid("plug-in bandwidths support one covariate"));
    }
    let (lo, hi) = data.bounding_box()[0];
    let pilot = match a.pilot_bandwidth {
        Some(v) => positive("pilot_bandwidth", v)?,
        None => positive("data range / 5", (hi - lo) / 5.0)?,
    };
    let settings = PlugInSettings {
        curvature_bandwidth: pilot,
        tail_bandwidth: pilot,
        n_mc: at_least("n_mc", a.n_mc.unwrap_or(crate::limit::DEFAULT_N_MC), 100)?,
        objective: objective(&a.objective)?,
        ..PlugInSettings::default()
    };
    let xs = required("x", &a.x)?;
    match a.scope.as_deref().unwrap_or("local") {
        "local" => {
            if xs.len() != 1 {
                return Err(invalid("local scope takes a single --x"));
            }
            plug_in_bandwidth(&data, xs[0], &settings, derive_seed(seed, 0))
        }
        "global" => plug_in_bandwidth_global(&data, &xs, &settings, derive_seed(seed, 0)),
        other => Err(invalid(format!("unknown scope '{other}'"))),
    }
}

pub const TAILS_HEADER: &str = "n1,r,c_hat,b_hat";

pub fn cmd_tails(a: &TailsArgs) -> Result<()> {
    let mut res = match (&a.residuals, &a.data) {
        (Some(p), None) => load_residuals(p)?
            .into_iter()
            .filter(|&e| e > crate::frontier::ZERO_RESIDUAL)
            .collect::<Vec<_>>(),
        (None, Some(p)) => {
            let data = load_csv(p, orientation(&a.orientation)?)?;
            let x = required("x", &a.x)?;
            let h = positive("h", required("h", &a.h)?)?;
            let cfg = EstimatorConfig::for_data(&data, h);
            residuals(&data, &cfg, &[x])?.residuals
        }
        _ => return Err(invalid("give exactly one of --residuals and --data")),
    };
    res.sort_by(f64::total_cmp);
    let r = match a.r {
        Some(r) => r,
        None => select_r(res.len(), a.fraction.unwrap_or(DEFAULT_FRACTION))?,
    };
    let t = hill_from_sorted(&res, r)?;
    let mut out = open_output(a.output.as_deref())?;
    writeln!(out, "{TAILS_HEADER}")?;
    writeln!(out, "{},{},{},{}", t.n1, t.r, t.c_hat, t.b_hat)?;
    Ok(())
}

pub fn cmd_compare(a: &CompareArgs, seed: u64) -> Result<()> {
    let ns = a.n.clone().unwrap_or_else(|| vec![200, 400]);
    let reps = at_least("reps", a.reps.unwrap_or(100), 1)?;
    let mut scs = Vec::new();
    for &n in &ns {
        scs.extend(SimScenario::table_grid(at_least("n", n, 50)?, reps, table_seed(seed, n)));
    }
    let grid = a.h_grid.clone().unwrap_or_else(comparison_h_grid);
    for &h in &grid {
        positive("h_grid entry", h)?;
    }
    let summary = run_comparison(&scs, &grid, &Kernel::biquadratic(1))?;
    write_comparison(&summary, &mut *open_output(a.output.as_deref())?)?;
    eprintln!(
        "smoothed estimator better in {} of {} configurations; median MSE ratio {:.3}",
        summary.wins,
        summary.rows.len(),
        summary.median_ratio
    );
    Ok(())
}

pub fn cmd_limits(a: &LimitsArgs, seed: u64) -> Result<()> {
    let c = positive("c", required("c", &a.c)?)?;
    let b = positive("b", required("b", &a.b)?)?;
    let curv = a.curvature.unwrap_or(0.0);
    let mut ctx = LimitContext::univariate(c, b, curv)?;
    if let Some(j) = a.truncation {
        ctx = ctx.with_truncation(j)?;
    }
    let rhos = a.rho.clone().unwrap_or_else(|| RhoGrid::default().values());
    let n_mc = at_least("n_mc", a.n_mc.unwrap_or(crate::limit::DEFAULT_N_MC), 100)?;
    let taus = tau_curve(&ctx, &rhos, n_mc, seed);
    let mut out = open_output(a.output.as_deref())?;
    writeln!(out, "rho,tau,status")?;
    for (rho, t) in rhos.iter().zip(taus) {
        match t {
            Ok(v) => writeln!(out, "{rho},{v},ok")?,
            Err(Error::InvalidInput(m)) => return Err(Error::InvalidInput(m)),
            Err(e) => writeln!(out, "{rho},NaN,{}", e.kind())?,
        }
    }
    let draws = a.q1_draws.unwrap_or(0);
    if draws > 0 {
        let mut q = open_output(Some(&required("q1_output", &a.q1_output)?))?;
        writeln!(q, "draw,rho,q1,status")?;
        for &rho in &rhos {
            for k in 0..draws {
                let mut rng = substream(derive_seed(seed, 1), k as u64);
                match eval_q1(&ctx, rho, 1.0, &mut rng) {
                    Ok(v) => writeln!(q, "{k},{rho},{v},ok")?,
                    Err(e) => writeln!(q, "{k},{rho},NaN,{}", e.kind())?,
                }
            }
        }
    }
    Ok(())
}
