//! Simulation studies: data from the three test frontiers with Gamma errors,
//! bias/variance/MSE tables, the comparison against the naive estimator and
//! convergence-rate fits.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::frontier::{
    estimate_naive, estimate_tilde_a, Dataset, EstimatorConfig, Orientation, RawGrid, Smoother,
};
use crate::kernel_geom::Kernel;
use crate::limit::{plug_in_bandwidth, search_seed, PlugInSettings};
use crate::rng::{derive_seed, substream};
use crate::stats::{mean, median, ols_slope, population_variance};

/// Largest tolerated fraction of failed replications in a scenario.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

pub fn model_frontier(model: u8, a0: f64, x: f64) -> Result<f64> {
    match model {
        1 => Ok(10.0 * (x - a0).powi(3)),
        2 => Ok((-a0 * x * x).exp()),
        3 => Ok(a0 * (std::f64::consts::PI * x).cos()),
        other => Err(invalid(format!("unknown model {other}"))),
    }
}

/// Second derivative of [`model_frontier`].
pub fn model_curvature(model: u8, a0: f64, x: f64) -> Result<f64> {
    use std::f64::consts::PI;
    match model {
        1 => Ok(60.0 * (x - a0)),
        2 => Ok((4.0 * a0 * a0 * x * x - 2.0 * a0) * (-a0 * x * x).exp()),
        3 => Ok(-a0 * PI * PI * (PI * x).cos()),
        other => Err(invalid(format!("unknown model {other}"))),
    }
}

/// Error scale `s(x) = 1 + 2x`.
pub fn error_scale(x: f64) -> f64 {
    1.0 + 2.0 * x
}

/// Tail constant of Gamma(c, s) errors: `{c s^c Γ(c)}⁻¹`.
pub fn gamma_tail_constant(c: f64, scale: f64) -> f64 {
    1.0 / (c * scale.powf(c) * gamma(c))
}

pub fn sample_gamma_error<R: Rng + ?Sized>(c: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(c, scale).map_err(|e| invalid(format!("gamma parameters: {e}")))?;
    Ok(g.sample(rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub model: u8,
    pub a0: f64,
    pub c: f64,
    pub n: usize,
    pub x_eval: f64,
    pub reps: usize,
    pub seed: u64,
}

impl SimScenario {
    pub fn new(model: u8, a0: f64, c: f64, n: usize) -> Self {
        Self {
            model,
            a0,
            c,
            n,
            x_eval: 0.5,
            reps: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        model_frontier(self.model, self.a0, 0.0)?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid("c must be positive"));
        }
        if self.n < 50 {
            return Err(invalid("n must be at least 50"));
        }
        if self.reps == 0 {
            return Err(invalid("reps must be positive"));
        }
        if !(0.0..=1.0).contains(&self.x_eval) {
            return Err(invalid("x_eval must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn truth(&self) -> f64 {
        model_frontier(self.model, self.a0, self.x_eval).unwrap_or(f64::NAN)
    }

    /// The 18 (model, a0, c) cells of one published table at sample size
    /// `n`, each with its own seed derived from `seed`.
    pub fn table_grid(n: usize, reps: usize, seed: u64) -> Vec<SimScenario> {
        let mut out = Vec::new();
        for (model, a0s) in [(1u8, [0.25, 0.5]), (2, [1.0, 2.0]), (3, [0.25, 0.5])] {
            for a0 in a0s {
                for c in [0.5, 1.0, 1.5] {
                    let k = out.len() as u64;
                    out.push(SimScenario {
                        reps,
                        seed: derive_seed(seed, k),
                        ..SimScenario::new(model, a0, c, n)
                    });
                }
            }
        }
        out
    }
}

/// Seed of the whole table at sample size `n`, shared by the CLI and tests.
pub fn table_seed(seed: u64, n: usize) -> u64 {
    derive_seed(seed, n as u64)
}

/// `n` draws with `X ~ U[0,1]` and `Y = a(X) + Gamma(c, 1 + 2X)`.
pub fn generate_dataset<R: Rng + ?Sized>(sc: &SimScenario, rng: &mut R) -> Result<Dataset> {
    sc.validate()?;
    let mut x = Vec::with_capacity(sc.n);
    let mut y = Vec::with_capacity(sc.n);
    for _ in 0..sc.n {
        let xi: f64 = rng.random();
        let e = sample_gamma_error(sc.c, error_scale(xi), rng)?;
        x.push(xi);
        y.push(model_frontier(sc.model, sc.a0, xi)? + e);
    }
    Dataset::univariate(x, y, Orientation::Lower)
}

/// Data for replication `rep`.
pub fn replicate(sc: &SimScenario, rep: usize) -> Result<Dataset> {
    generate_dataset(sc, &mut substream(sc.seed, rep as u64))
}

/// Frontier estimate at one point.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorChoice {
    /// â (local linear smoothing of ã)
    Hat,
    /// ǎ (local average smoothing of ã)
    Check,
    /// raw ã
    Tilde,
    /// windowed extreme ã#
    Naive,
    /// the true frontier
    Oracle,
}

impl EstimatorChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hat" => Ok(Self::Hat),
            "check" => Ok(Self::Check),
            "tilde" => Ok(Self::Tilde),
            "naive" => Ok(Self::Naive),
            "oracle" => Ok(Self::Oracle),
            other => Err(invalid(format!("unknown estimator '{other}'"))),
        }
    }

    /// Estimate at `x` with bandwidth `h` (and `h1 = h`).
    pub fn estimate(&self, sc: &SimScenario, data: &Dataset, x: f64, h: f64, kernel: &Kernel) -> Result<f64> {
        let cfg = EstimatorConfig::for_data(data, h);
        match self {
            Self::Hat | Self::Check => {
                let raw = RawGrid::build(data, &[x], &cfg)?;
                let smoother = if *self == Self::Hat { Smoother::Hat } else { Smoother::Check };
                smoother.apply(&raw, &cfg, kernel)
            }
            Self::Tilde => Ok(estimate_tilde_a(data, &[x], &cfg)?.value),
            Self::Naive => estimate_naive(data, &[x], h),
            Self::Oracle => model_frontier(sc.model, sc.a0, x),
        }
    }
}

/// How the bandwidth is set in each replication.
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthMode {
    /// plug-in selector from the data
    PlugIn(PlugInSettings),
    Fixed(f64),
    /// `n^{−1/(1+2c)}` with the true c
    Rate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub model: u8,
    pub a0: f64,
    pub c: f64,
    pub n: usize,
    pub mean_h: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub reps: usize,
    pub failures: usize,
}

impl MetricsRow {
    pub fn bias10(&self) -> f64 {
        10.0 * self.bias
    }
    pub fn var100(&self) -> f64 {
        100.0 * self.variance
    }
    pub fn mse100(&self) -> f64 {
        100.0 * self.mse
    }

    /// Metrics from per-replication (estimate, bandwidth) outcomes.
    pub fn from_outcomes(sc: &SimScenario, outcomes: &[Result<(f64, f64)>]) -> Result<Self> {
        let ok: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
        let failures = outcomes.len() - ok.len();
        if ok.is_empty() || failures as f64 > MAX_FAILURE_FRACTION * outcomes.len() as f64 {
            return Err(Error::ScenarioFailed {
                failures,
                reps: outcomes.len(),
            });
        }
        let truth = sc.truth();
        let est: Vec<f64> = ok.iter().map(|o| o.0).collect();
        let hs: Vec<f64> = ok.iter().map(|o| o.1).collect();
        let bias = mean(&est) - truth;
        let variance = population_variance(&est);
        Ok(Self {
            model: sc.model,
            a0: sc.a0,
            c: sc.c,
            n: sc.n,
            mean_h: mean(&hs),
            bias,
            variance,
            mse: variance + bias * bias,
            reps: outcomes.len(),
            failures,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub const HEADER: &'static str = "model,a0,c,n,mean_h,bias10,var100,mse100";

    pub fn find(&self, model: u8, a0: f64, c: f64, n: usize) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.a0 == a0 && r.c == c && r.n == n)
    }
}

/// One replication: bandwidth, then the estimate at `x_eval`.
pub fn run_replication(
    sc: &SimScenario,
    rep: usize,
    estimator: &EstimatorChoice,
    mode: &BandwidthMode,
    kernel: &Kernel,
) -> Result<(f64, f64)> {
    let data = replicate(sc, rep)?;
    let h = match mode {
        BandwidthMode::PlugIn(settings) => {
            plug_in_bandwidth(&data, sc.x_eval, settings, search_seed(sc.seed, rep as u64))?.h
        }
        BandwidthMode::Fixed(h) => *h,
        BandwidthMode::Rate => (sc.n as f64).powf(-1.0 / (1.0 + 2.0 * sc.c)),
    };
    Ok((estimator.estimate(sc, &data, sc.x_eval, h, kernel)?, h))
}

/// Metrics for one scenario; replications run in parallel and are reduced
/// in index order.
pub fn run_scenario(
    sc: &SimScenario,
    estimator: &EstimatorChoice,
    mode: &BandwidthMode,
    kernel: &Kernel,
) -> Result<MetricsRow> {
    sc.validate()?;
    let outcomes: Vec<Result<(f64, f64)>> = (0..sc.reps)
        .into_par_iter()
        .map(|rep| run_replication(sc, rep, estimator, mode, kernel))
        .collect();
    MetricsRow::from_outcomes(sc, &outcomes)
}

pub fn run_mc_study(
    scenarios: &[SimScenario],
    estimator: &EstimatorChoice,
    mode: &BandwidthMode,
    kernel: &Kernel,
) -> Result<MetricsTable> {
    let rows = scenarios
        .iter()
        .map(|sc| run_scenario(sc, estimator, mode, kernel))
        .collect::<Result<_>>()?;
    Ok(MetricsTable { rows })
}

/// Default bandwidth grid for the comparison study.
pub fn comparison_h_grid() -> Vec<f64> {
    let (lo, hi, k) = (0.01_f64, 0.5_f64, 30);
    (0..k)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

/// Best MSE over the bandwidth grid for one estimator, the bandwidth being
/// chosen to minimise the MSE over the shared replications.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedMse {
    pub h: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: u8,
    pub a0: f64,
    pub c: f64,
    pub n: usize,
    pub first: TunedMse,
    pub second: TunedMse,
}

impl ComparisonRow {
    pub fn ratio(&self) -> f64 {
        self.first.mse / self.second.mse
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSummary {
    pub rows: Vec<ComparisonRow>,
    /// configurations where the first estimator has the smaller MSE
    pub wins: usize,
    pub median_ratio: f64,
}

fn tuned_mse(
    sc: &SimScenario,
    datasets: &[Dataset],
    h_grid: &[f64],
    estimate: &(dyn Fn(&Dataset, f64, f64) -> Result<f64> + Sync),
) -> Result<TunedMse> {
    let truth = sc.truth();
    let mut best: Option<TunedMse> = None;
    for &h in h_grid {
        let outcomes: Vec<Result<f64>> = datasets
            .par_iter()
            .map(|d| estimate(d, sc.x_eval, h))
            .collect();
        let ok: Vec<f64> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
        let failures = datasets.len() - ok.len();
        if ok.is_empty() || failures as f64 > MAX_FAILURE_FRACTION * datasets.len() as f64 {
            continue;
        }
        let mse = ok.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / ok.len() as f64;
        if best.as_ref().is_none_or(|b| mse < b.mse) {
            best = Some(TunedMse { h, mse });
        }
    }
    best.ok_or(Error::ScenarioFailed {
        failures: datasets.len(),
        reps: datasets.len(),
    })
}

/// Compare two estimators, each at its own MSE-optimal bandwidth from
/// `h_grid`, on the same replications.
pub fn run_comparison_with(
    scenarios: &[SimScenario],
    h_grid: &[f64],
    first: &(dyn Fn(&Dataset, f64, f64) -> Result<f64> + Sync),
    second: &(dyn Fn(&Dataset, f64, f64) -> Result<f64> + Sync),
) -> Result<ComparisonSummary> {
    if h_grid.is_empty() {
        return Err(invalid("bandwidth grid is empty"));
    }
    let mut rows = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        sc.validate()?;
        let datasets: Vec<Dataset> = (0..sc.reps)
            .into_par_iter()
            .map(|r| replicate(sc, r))
            .collect::<Result<_>>()?;
        rows.push(ComparisonRow {
            model: sc.model,
            a0: sc.a0,
            c: sc.c,
            n: sc.n,
            first: tuned_mse(sc, &datasets, h_grid, first)?,
            second: tuned_mse(sc, &datasets, h_grid, second)?,
        });
    }
    let wins = rows.iter().filter(|r| r.first.mse < r.second.mse).count();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio()).collect();
    Ok(ComparisonSummary {
        median_ratio: median(&ratios),
        wins,
        rows,
    })
}

/// â against ã#.
pub fn run_comparison(scenarios: &[SimScenario], h_grid: &[f64], kernel: &Kernel) -> Result<ComparisonSummary> {
    let hat = |d: &Dataset, x: f64, h: f64| {
        let cfg = EstimatorConfig::for_data(d, h);
        let raw = RawGrid::build(d, &[x], &cfg)?;
        Smoother::Hat.apply(&raw, &cfg, kernel)
    };
    let naive = |d: &Dataset, x: f64, h: f64| estimate_naive(d, &[x], h);
    run_comparison_with(scenarios, h_grid, &hat, &naive)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub n: Vec<usize>,
    pub rmse: Vec<f64>,
    /// least-squares slope of log RMSE on log n
    pub slope: f64,
}

/// RMSE at each sample size with `h = n^{−1/(1+2c)}`, and the log-log slope.
pub fn run_rate_study(
    base: &SimScenario,
    n_list: &[usize],
    estimator: &EstimatorChoice,
    kernel: &Kernel,
) -> Result<RateFit> {
    if n_list.len() < 4 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("rate study needs at least four ascending sample sizes"));
    }
    let mut rmse = Vec::with_capacity(n_list.len());
    for (k, &n) in n_list.iter().enumerate() {
        let sc = SimScenario {
            n,
            seed: derive_seed(base.seed, k as u64),
            ..base.clone()
        };
        let row = run_scenario(&sc, estimator, &BandwidthMode::Rate, kernel)?;
        rmse.push(row.mse.sqrt());
    }
    let lx: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = rmse.iter().map(|r| r.ln()).collect();
    Ok(RateFit {
        n: n_list.to_vec(),
        slope: ols_slope(&lx, &ly),
        rmse,
    })
}

/// Synthetic stand-in for a production data set: `n` firms with log-scale
/// input `X ~ U[4.0, 11.8]`, a linear upper frontier `1.2 + 0.85 X` and
/// exponential inefficiency with mean 0.6 below it.
pub fn utility_like_fixture(n: usize, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(invalid("fixture needs at least 10 rows"));
    }
    let mut rng = substream(seed, 0);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.random_range(4.0..11.8);
        let u = sample_gamma_error(1.0, 0.6, &mut rng)?;
        x.push(xi);
        y.push(1.2 + 0.85 * xi - u);
    }
    Dataset::univariate(x, y, Orientation::Upper)
}

/// Seed used for the committed fixture file.
pub const FIXTURE_SEED: u64 = 123;
