//! Monte-Carlo machinery for the extreme-value limit laws of the frontier
//! estimators, and the plug-in bandwidth selectors built on them.
//!
//! The limit of the normalised raw estimator is the sup-inf functional
//!
//! ```text
//! Q₁(c₁, c₂) = sup_β min_i [ c₁ {βᵀUᵢ + ½ UᵢᵀäUᵢ} + c₂ b^{−1/c} Zᵢ ]
//! ```
//!
//! over `Uᵢ` uniform on the unit ball and `Zⱼ = (E₁ + ⋯ + Eⱼ)^{1/c}`, truncated
//! at `J` terms. `τ(ρ) = E Q₁(ρ, 1)²` is its asymptotic mean squared error.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::frontier::{residuals, Dataset, EstimatorConfig};
use crate::kernel_geom::{
    kernel_moment_kappa, quadrature_grid, sample_uniform_region_into, BallRegion, Kernel,
};
use crate::lp::{envelope_at_zero, solve_lp, LinearProgram, LpOutcome};
use crate::pilot::{kde_density, local_cubic_second_derivative, DensityInfo};
use crate::rng::{derive_seed, substream};
use crate::tail::{estimate_tail, TailParams};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub const DEFAULT_TRUNCATION: usize = 200;
pub const DEFAULT_N_MC: usize = 1000;
/// Largest fraction of draws allowed to trip the truncation guard.
pub const MAX_SUSPECT_FRACTION: f64 = 0.01;
/// Quadrature nodes used for the kernel integral in [`sample_q3`].
pub const Q3_RESOLUTION: usize = 101;

/// One joint draw of `Z₁ < ⋯ < Z_J` via partial sums of unit exponentials.
pub fn sample_z<R: Rng + ?Sized>(c: f64, j: usize, rng: &mut R) -> Vec<f64> {
    let mut z = vec![0.0; j];
    sample_z_into(c, rng, &mut z);
    z
}

pub fn sample_z_into<R: Rng + ?Sized>(c: f64, rng: &mut R, out: &mut [f64]) {
    let inv = 1.0 / c;
    let mut s = 0.0;
    for z in out.iter_mut() {
        let e: f64 = Exp1.sample(rng);
        s += e;
        *z = s.powf(inv);
    }
}

/// The series representation
/// `Zⱼ = exp[−(1/c){Σ_{i≥j} (Eᵢ − 1)/i + γ − H_{j−1}}]`
/// truncated at `exps.len()` terms, for `j = 1..=j_max`.
pub fn z_from_series(c: f64, exps: &[f64], j_max: usize) -> Vec<f64> {
    let m = exps.len();
    let mut tail = vec![0.0; m + 1];
    for i in (0..m).rev() {
        tail[i] = tail[i + 1] + (exps[i] - 1.0) / (i + 1) as f64;
    }
    let mut harmonic = 0.0;
    (0..j_max.min(m))
        .map(|j| {
            let z = (-(tail[j] + EULER_GAMMA - harmonic) / c).exp();
            harmonic += 1.0 / (j + 1) as f64;
            z
        })
        .collect()
}

/// Draws through [`z_from_series`] with `terms` exponentials.
pub fn sample_z_series<R: Rng + ?Sized>(c: f64, j: usize, terms: usize, rng: &mut R) -> Vec<f64> {
    let exps: Vec<f64> = (0..terms).map(|_| Exp1.sample(rng)).collect();
    z_from_series(c, &exps, j)
}

/// Parameters of the limit law at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitContext {
    pub c: f64,
    pub b: f64,
    /// p×p row-major curvature of the frontier (lower orientation)
    pub curvature: Vec<f64>,
    pub region: BallRegion,
    pub truncation: usize,
}

impl LimitContext {
    pub fn new(c: f64, b: f64, curvature: Vec<f64>, region: BallRegion) -> Result<Self> {
        let p = region.dim();
        if !(c > 0.0 && c.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(invalid("tail parameters b and c must be positive"));
        }
        if curvature.len() != p * p || curvature.iter().any(|v| !v.is_finite()) {
            return Err(invalid("curvature must be a finite p×p matrix"));
        }
        Ok(Self {
            c,
            b,
            curvature,
            region,
            truncation: DEFAULT_TRUNCATION,
        })
    }

    /// p = 1 on the full interval [−1, 1].
    pub fn univariate(c: f64, b: f64, curvature: f64) -> Result<Self> {
        Self::new(c, b, vec![curvature], BallRegion::full(1))
    }

    pub fn with_truncation(mut self, j: usize) -> Result<Self> {
        if j < 50 {
            return Err(invalid("truncation J must be at least 50"));
        }
        self.truncation = j;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    fn mark_scale(&self) -> f64 {
        self.b.powf(-1.0 / self.c)
    }

    fn quad(&self, u: &[f64]) -> f64 {
        let p = self.dim();
        let mut s = 0.0;
        for i in 0..p {
            for j in 0..p {
                s += u[i] * self.curvature[i * p + j] * u[j];
            }
        }
        0.5 * s
    }

    fn is_suspect(&self, index: usize) -> bool {
        index > self.truncation / 2
    }
}

/// A sup-inf value and the largest (1-based) mark index supporting it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q1Value {
    pub value: f64,
    pub index: usize,
}

/// Point-process draw for p = 1, sorted by location.
struct SortedDraw {
    u: Vec<f64>,
    marks: Vec<f64>,
    /// 1-based mark index of each sorted point
    index: Vec<usize>,
}

impl SortedDraw {
    fn new<R: Rng + ?Sized>(ctx: &LimitContext, rng: &mut R) -> Self {
        let j = ctx.truncation;
        let mut u = vec![0.0; j];
        for v in u.iter_mut() {
            sample_uniform_region_into(&ctx.region, rng, std::slice::from_mut(v));
        }
        let z = sample_z(ctx.c, j, rng);
        Self::from_parts(&u, &z, ctx.mark_scale())
    }

    fn from_parts(u: &[f64], z: &[f64], scale: f64) -> Self {
        let mut order: Vec<usize> = (0..u.len()).collect();
        order.sort_by(|&a, &b| u[a].total_cmp(&u[b]));
        Self {
            u: order.iter().map(|&i| u[i]).collect(),
            marks: order.iter().map(|&i| scale * z[i]).collect(),
            index: order.iter().map(|&i| i + 1).collect(),
        }
    }
}

/// `sup_β min_i [c₁(β vᵢ + ½ä vᵢ²) + marksᵢ]` over sorted `v` by the lower
/// hull at zero.
fn sup_inf_1d(
    v: &[f64],
    marks: &[f64],
    index: &[usize],
    curvature: f64,
    c1: f64,
    y: &mut Vec<f64>,
    hull: &mut Vec<usize>,
) -> Result<Q1Value> {
    y.clear();
    y.extend(v.iter().zip(marks).map(|(&u, &m)| c1 * 0.5 * curvature * u * u + m));
    let fit = envelope_at_zero(v, y, hull).ok_or(Error::UnboundedFunctional)?;
    Ok(Q1Value {
        value: fit.value,
        index: index[fit.support[0]].max(index[fit.support[1]]),
    })
}

/// Deterministic `Q₁(1, 0) = sup_β inf_{u∈region} [βᵀu + ½uᵀäu]`.
fn q1_bias(ctx: &LimitContext) -> Result<f64> {
    let p = ctx.dim();
    if p == 1 {
        let a = ctx.curvature[0];
        if a >= 0.0 {
            return Ok(0.0);
        }
        // concave: the infimum sits at the interval ends [lo, hi]
        let d = ctx.region.cap_distance().min(1.0);
        let dir = ctx.region.direction()[0];
        let (lo, hi) = if ctx.region.is_full() {
            (-1.0, 1.0)
        } else if dir > 0.0 {
            (-d, 1.0)
        } else {
            (-1.0, d)
        };
        return Ok(-0.5 * a * lo * hi);
    }
    let mut nodes: Vec<Vec<f64>> = quadrature_grid(p, 41)?
        .into_iter()
        .map(|n| n.point)
        .filter(|u| ctx.region.contains(u))
        .collect();
    if p == 2 {
        for k in 0..256 {
            let th = std::f64::consts::TAU * k as f64 / 256.0;
            let u = vec![th.cos(), th.sin()];
            if ctx.region.contains(&u) {
                nodes.push(u);
            }
        }
    }
    let mut objective = vec![0.0; p + 1];
    objective[0] = 1.0;
    let mut lp = LinearProgram::with_capacity(objective, nodes.len());
    let mut row = vec![0.0; p + 1];
    row[0] = 1.0;
    for u in &nodes {
        for k in 0..p {
            row[k + 1] = -u[k];
        }
        lp.push(&row, ctx.quad(u));
    }
    match solve_lp(&lp)? {
        LpOutcome::Optimal(s) => Ok(s.value),
        _ => Err(Error::UnboundedFunctional),
    }
}

/// One draw of `Q₁(c₁, c₂)` with the supporting mark index.
pub fn eval_q1_detail<R: Rng + ?Sized>(
    ctx: &LimitContext,
    c1: f64,
    c2: f64,
    rng: &mut R,
) -> Result<Q1Value> {
    if !(c1 >= 0.0 && c2 >= 0.0 && c1.is_finite() && c2.is_finite()) {
        return Err(invalid("Q1 weights must be nonnegative"));
    }
    if c2 == 0.0 {
        return Ok(Q1Value {
            value: c1 * q1_bias(ctx)?,
            index: 0,
        });
    }
    let p = ctx.dim();
    if c1 == 0.0 {
        let z1 = sample_z(ctx.c, 1, rng)[0];
        return Ok(Q1Value {
            value: c2 * ctx.mark_scale() * z1,
            index: 1,
        });
    }
    if p == 1 {
        let draw = SortedDraw::new(ctx, rng);
        let marks: Vec<f64> = draw.marks.iter().map(|m| c2 * m).collect();
        let (mut y, mut hull) = (Vec::new(), Vec::new());
        return sup_inf_1d(&draw.u, &marks, &draw.index, ctx.curvature[0], c1, &mut y, &mut hull);
    }
    let j = ctx.truncation;
    let mut us = vec![0.0; j * p];
    for u in us.chunks_mut(p) {
        sample_uniform_region_into(&ctx.region, rng, u);
    }
    let z = sample_z(ctx.c, j, rng);
    let mut objective = vec![0.0; p + 1];
    objective[0] = 1.0;
    let mut lp = LinearProgram::with_capacity(objective, j);
    let mut row = vec![0.0; p + 1];
    row[0] = 1.0;
    for (i, u) in us.chunks(p).enumerate() {
        for k in 0..p {
            row[k + 1] = -c1 * u[k];
        }
        lp.push(&row, c1 * ctx.quad(u) + c2 * ctx.mark_scale() * z[i]);
    }
    match solve_lp(&lp)? {
        LpOutcome::Optimal(s) => Ok(Q1Value {
            value: s.value,
            index: s.active.iter().map(|&i| i + 1).max().unwrap_or(1),
        }),
        _ => Err(Error::UnboundedFunctional),
    }
}

/// One draw of `Q₁(c₁, c₂)`; fails when the supporting index passes `J/2`.
pub fn eval_q1<R: Rng + ?Sized>(ctx: &LimitContext, c1: f64, c2: f64, rng: &mut R) -> Result<f64> {
    let q = eval_q1_detail(ctx, c1, c2, rng)?;
    if ctx.is_suspect(q.index) {
        return Err(Error::TruncationSuspect {
            index: q.index,
            truncation: ctx.truncation,
        });
    }
    Ok(q.value)
}

/// Monte-Carlo τ(ρ) for every ρ in `rhos` with common random numbers: draw
/// `k` comes from `substream(seed, k)` for all ρ. Entries whose suspect
/// fraction exceeds [`MAX_SUSPECT_FRACTION`] are errors.
pub fn tau_curve(ctx: &LimitContext, rhos: &[f64], n_mc: usize, seed: u64) -> Vec<Result<f64>> {
    if n_mc == 0 {
        return rhos.iter().map(|_| Err(invalid("n_mc must be positive"))).collect();
    }
    if let Some(bad) = rhos.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        let msg = format!("rho must be nonnegative and finite, got {bad}");
        return rhos.iter().map(|_| Err(invalid(msg.clone()))).collect();
    }
    let per_draw: Vec<Result<Vec<Q1Value>>> = (0..n_mc)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            tau_draw(ctx, rhos, &mut rng)
        })
        .collect();
    let mut sums = vec![0.0; rhos.len()];
    let mut suspect = vec![0usize; rhos.len()];
    for draw in per_draw {
        match draw {
            Ok(values) => {
                for (r, q) in values.iter().enumerate() {
                    sums[r] += q.value * q.value;
                    suspect[r] += ctx.is_suspect(q.index) as usize;
                }
            }
            Err(e) => {
                let kind = e.to_string();
                return rhos.iter().map(|_| Err(invalid(kind.clone()))).collect();
            }
        }
    }
    sums.into_iter()
        .zip(suspect)
        .map(|(s, k)| {
            if k as f64 > MAX_SUSPECT_FRACTION * n_mc as f64 {
                Err(Error::TooManySuspect { suspect: k, draws: n_mc })
            } else {
                Ok(s / n_mc as f64)
            }
        })
        .collect()
}

fn tau_draw<R: Rng + ?Sized>(ctx: &LimitContext, rhos: &[f64], rng: &mut R) -> Result<Vec<Q1Value>> {
    if ctx.dim() == 1 {
        let draw = SortedDraw::new(ctx, rng);
        let z1 = draw
            .index
            .iter()
            .position(|&i| i == 1)
            .map(|k| draw.marks[k])
            .unwrap_or(f64::NAN);
        let (mut y, mut hull) = (Vec::new(), Vec::new());
        return rhos
            .iter()
            .map(|&rho| {
                if rho == 0.0 {
                    Ok(Q1Value { value: z1, index: 1 })
                } else {
                    sup_inf_1d(&draw.u, &draw.marks, &draw.index, ctx.curvature[0], rho, &mut y, &mut hull)
                }
            })
            .collect();
    }
    // general p: fresh draws replayed from a per-draw seed for each ρ
    let seed = rng.random::<u64>();
    rhos.iter()
        .map(|&rho| eval_q1_detail(ctx, rho, 1.0, &mut substream(seed, 0)))
        .collect()
}

/// Monte-Carlo `τ(ρ) = E Q₁(ρ, 1)²`.
pub fn tau(ctx: &LimitContext, rho: f64, n_mc: usize, seed: u64) -> Result<f64> {
    if n_mc < 100 {
        return Err(invalid("n_mc must be at least 100"));
    }
    tau_curve(ctx, &[rho], n_mc, seed).pop().unwrap()
}

/// Criterion minimised over ρ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoObjective {
    /// `τ(ρ)` as it stands
    Tau,
    /// `ρ^{−2p/(p+2c)} τ(ρ)`, the mean squared error in data units at the
    /// bandwidth implied by ρ
    ScaledMse,
}

impl RhoObjective {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(Self::Tau),
            "scaled-mse" => Ok(Self::ScaledMse),
            other => Err(invalid(format!("unknown rho objective '{other}'"))),
        }
    }

    fn weight(self, rho: f64, c: f64, p: usize) -> f64 {
        match self {
            Self::Tau => 1.0,
            Self::ScaledMse => {
                let p = p as f64;
                rho.powf(-2.0 * p / (p + 2.0 * c))
            }
        }
    }
}

/// Log-spaced ρ grid, optionally refined once around the coarse minimiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub refine_points: usize,
}

impl Default for RhoGrid {
    fn default() -> Self {
        Self {
            lo: 1e-3,
            hi: 1e3,
            points: 25,
            refine_points: 9,
        }
    }
}

impl RhoGrid {
    pub fn values(&self) -> Vec<f64> {
        log_space(self.lo, self.hi, self.points)
    }
}

fn log_space(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoSearch {
    pub rho0: f64,
    pub tau_min: f64,
    /// evaluated (ρ, τ) pairs; τ = +∞ where the truncation guard failed
    pub curve: Vec<(f64, f64)>,
}

fn argmin(rhos: &[f64], scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for k in 0..rhos.len() {
        if !scores[k].is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => scores[k] < scores[b] || (scores[k] == scores[b] && rhos[k] < rhos[b]),
        };
        if better {
            best = Some(k);
        }
    }
    best
}

fn scored_curve(
    ctx: &LimitContext,
    rhos: &[f64],
    n_mc: usize,
    seed: u64,
    objective: RhoObjective,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let taus = tau_curve(ctx, rhos, n_mc, seed);
    let mut tau_vals = Vec::with_capacity(rhos.len());
    for t in taus {
        match t {
            Ok(v) => tau_vals.push(v),
            Err(Error::TooManySuspect { .. }) => tau_vals.push(f64::INFINITY),
            Err(e) => return Err(e),
        }
    }
    let scores = rhos
        .iter()
        .zip(&tau_vals)
        .map(|(&r, &t)| objective.weight(r, ctx.c, ctx.dim()) * t)
        .collect();
    Ok((tau_vals, scores))
}

/// Argmin of the objective over an explicit ascending grid, with common
/// random numbers across grid points and ties to the smaller ρ.
pub fn rho0_search(
    ctx: &LimitContext,
    rho_grid: &[f64],
    n_mc: usize,
    seed: u64,
    objective: RhoObjective,
) -> Result<RhoSearch> {
    if rho_grid.is_empty() {
        return Err(invalid("rho grid is empty"));
    }
    let (taus, scores) = scored_curve(ctx, rho_grid, n_mc, seed, objective)?;
    let k = argmin(rho_grid, &scores).ok_or(Error::TooManySuspect {
        suspect: n_mc,
        draws: n_mc,
    })?;
    Ok(RhoSearch {
        rho0: rho_grid[k],
        tau_min: taus[k],
        curve: rho_grid.iter().copied().zip(taus).collect(),
    })
}

/// Coarse search over `grid` followed by one refinement between the
/// neighbours of the coarse minimiser.
pub fn rho0_search_refined(
    ctx: &LimitContext,
    grid: &RhoGrid,
    n_mc: usize,
    seed: u64,
    objective: RhoObjective,
) -> Result<RhoSearch> {
    let coarse = grid.values();
    let first = rho0_search(ctx, &coarse, n_mc, seed, objective)?;
    if grid.refine_points < 3 || coarse.len() < 2 {
        return Ok(first);
    }
    let k = coarse.iter().position(|&r| r == first.rho0).unwrap();
    let lo = coarse[k.saturating_sub(1)];
    let hi = coarse[(k + 1).min(coarse.len() - 1)];
    let fine: Vec<f64> = log_space(lo, hi, grid.refine_points)
        .into_iter()
        .filter(|r| !coarse.contains(r))
        .collect();
    let (fine_taus, fine_scores) = scored_curve(ctx, &fine, n_mc, seed, objective)?;
    let mut rhos: Vec<f64> = coarse.clone();
    let mut taus: Vec<f64> = first.curve.iter().map(|p| p.1).collect();
    rhos.extend_from_slice(&fine);
    taus.extend_from_slice(&fine_taus);
    let mut scores: Vec<f64> = coarse
        .iter()
        .zip(&first.curve)
        .map(|(&r, p)| objective.weight(r, ctx.c, ctx.dim()) * p.1)
        .collect();
    scores.extend_from_slice(&fine_scores);
    let mut order: Vec<usize> = (0..rhos.len()).collect();
    order.sort_by(|&a, &b| rhos[a].total_cmp(&rhos[b]));
    let rhos: Vec<f64> = order.iter().map(|&i| rhos[i]).collect();
    let taus: Vec<f64> = order.iter().map(|&i| taus[i]).collect();
    let scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    let best = argmin(&rhos, &scores).unwrap();
    Ok(RhoSearch {
        rho0: rhos[best],
        tau_min: taus[best],
        curve: rhos.into_iter().zip(taus).collect(),
    })
}

/// `h = ŵ^{−1/(p+2ĉ)} ρ̂₀^{1/(2+p/ĉ)} n^{−1/(p+2ĉ)}`.
pub fn bandwidth_formula(w_hat: f64, rho0: f64, c_hat: f64, p: usize, n: usize) -> f64 {
    let p = p as f64;
    w_hat.powf(-1.0 / (p + 2.0 * c_hat))
        * rho0.powf(1.0 / (2.0 + p / c_hat))
        * (n as f64).powf(-1.0 / (p + 2.0 * c_hat))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthScope {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPlan {
    pub rho0: f64,
    pub tau_at_rho0: f64,
    pub c_hat: f64,
    pub b_hat: f64,
    pub w_hat: f64,
    pub h: f64,
    pub scope: BandwidthScope,
}

pub fn bandwidth_local(w_hat: f64, rho0: f64, c_hat: f64, p: usize, n: usize) -> Result<BandwidthPlan> {
    let pos = |v: f64| v > 0.0 && v.is_finite();
    if !pos(w_hat) || !pos(rho0) || !pos(c_hat) || p == 0 || n == 0 {
        return Err(invalid("bandwidth inputs must be positive"));
    }
    Ok(BandwidthPlan {
        rho0,
        tau_at_rho0: f64::NAN,
        c_hat,
        b_hat: f64::NAN,
        w_hat,
        h: bandwidth_formula(w_hat, rho0, c_hat, p, n),
        scope: BandwidthScope::Local,
    })
}

/// Global selector: τ̂(ρ) integrated over the grid `xs` by the trapezoid
/// rule (every context evaluated with the same seed), minimised over ρ, and
/// turned into one bandwidth with the average `ŵ`.
#[allow(clippy::too_many_arguments)]
pub fn bandwidth_global(
    contexts: &[LimitContext],
    xs: &[f64],
    w_hats: &[f64],
    n: usize,
    grid: &RhoGrid,
    n_mc: usize,
    seed: u64,
    objective: RhoObjective,
) -> Result<BandwidthPlan> {
    if contexts.is_empty() || contexts.len() != xs.len() || xs.len() != w_hats.len() {
        return Err(invalid("one context, location and ŵ per grid point is required"));
    }
    let c = contexts[0].c;
    if contexts.iter().any(|ctx| ctx.c != c) {
        return Err(invalid("global bandwidth needs a constant tail exponent"));
    }
    let p = contexts[0].dim();
    let rhos = grid.values();
    let mut curves = Vec::with_capacity(contexts.len());
    for ctx in contexts {
        let (taus, _) = scored_curve(ctx, &rhos, n_mc, seed, RhoObjective::Tau)?;
        curves.push(taus);
    }
    let integrated: Vec<f64> = (0..rhos.len())
        .map(|r| {
            if xs.len() == 1 {
                return curves[0][r];
            }
            (1..xs.len())
                .map(|k| 0.5 * (xs[k] - xs[k - 1]) * (curves[k][r] + curves[k - 1][r]))
                .sum()
        })
        .collect();
    let scores: Vec<f64> = rhos
        .iter()
        .zip(&integrated)
        .map(|(&r, &t)| objective.weight(r, c, p) * t)
        .collect();
    let k = argmin(&rhos, &scores).ok_or(Error::TooManySuspect {
        suspect: n_mc,
        draws: n_mc,
    })?;
    let w_hat = w_hats.iter().sum::<f64>() / w_hats.len() as f64;
    let b_hat = contexts.iter().map(|ctx| ctx.b).sum::<f64>() / contexts.len() as f64;
    Ok(BandwidthPlan {
        rho0: rhos[k],
        tau_at_rho0: integrated[k],
        c_hat: c,
        b_hat,
        w_hat,
        h: bandwidth_formula(w_hat, rhos[k], c, p, n),
        scope: BandwidthScope::Global,
    })
}

/// One draw of the limit of the normalised local-average smoother with
/// `h₁ = t h` (p = 1, interior point).
pub fn sample_q3<R: Rng + ?Sized>(
    ctx: &LimitContext,
    t: f64,
    rho: f64,
    kernel: &Kernel,
    laplacian_a: f64,
    rng: &mut R,
) -> Result<f64> {
    if ctx.dim() != 1 || kernel.dim() != 1 {
        return Err(invalid("the smoothed limit law is implemented for p = 1"));
    }
    if !(t > 0.0 && t.is_finite() && rho >= 0.0 && rho.is_finite()) {
        return Err(invalid("t must be positive and rho nonnegative"));
    }
    let j = ctx.truncation;
    let radius = t + 1.0;
    let u: Vec<f64> = (0..j).map(|_| rng.random_range(-radius..=radius)).collect();
    let z = sample_z(ctx.c, j, rng);
    let draw = SortedDraw::from_parts(&u, &z, (radius * ctx.b).powf(-1.0 / ctx.c));
    let stochastic = q3_stochastic(ctx, t, rho, kernel, &draw)?;
    let kappa = kernel_moment_kappa(kernel, 1)?;
    Ok(0.5 * rho * t * t * kappa * laplacian_a + stochastic)
}

/// `∫ Q₂(u) K(u) du` on the quadrature grid; Q₂ at node u uses the points
/// within unit distance of `t·u`, measured from that centre.
fn q3_stochastic(ctx: &LimitContext, t: f64, rho: f64, kernel: &Kernel, draw: &SortedDraw) -> Result<f64> {
    let (mut v, mut marks, mut index) = (Vec::new(), Vec::new(), Vec::new());
    let (mut y, mut hull) = (Vec::new(), Vec::new());
    let mut total = 0.0;
    for node in quadrature_grid(1, Q3_RESOLUTION)? {
        let k = kernel.eval(&node.point);
        if k <= 0.0 {
            continue;
        }
        let centre = t * node.point[0];
        let lo = draw.u.partition_point(|&s| s < centre - 1.0);
        let hi = draw.u.partition_point(|&s| s <= centre + 1.0);
        if lo == hi {
            return Err(Error::EmptyNeighbourhood);
        }
        let q2 = if rho == 0.0 {
            let (pos, m) = draw.marks[lo..hi]
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |b, (i, &m)| if m < b.1 { (i, m) } else { b });
            Q1Value {
                value: m,
                index: draw.index[lo + pos],
            }
        } else {
            v.clear();
            v.extend(draw.u[lo..hi].iter().map(|s| s - centre));
            marks.clear();
            marks.extend_from_slice(&draw.marks[lo..hi]);
            index.clear();
            index.extend_from_slice(&draw.index[lo..hi]);
            sup_inf_1d(&v, &marks, &index, ctx.curvature[0], rho, &mut y, &mut hull)?
        };
        if ctx.is_suspect(q2.index) {
            return Err(Error::TruncationSuspect {
                index: q2.index,
                truncation: ctx.truncation,
            });
        }
        total += node.weight * k * q2.value;
    }
    Ok(total)
}

/// Settings for the plug-in bandwidth pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PlugInSettings {
    pub curvature_bandwidth: f64,
    pub tail_bandwidth: f64,
    pub tail_fraction: f64,
    pub n_mc: usize,
    pub truncation: usize,
    pub rho_grid: RhoGrid,
    pub objective: RhoObjective,
    pub kernel: Kernel,
}

impl Default for PlugInSettings {
    fn default() -> Self {
        Self {
            curvature_bandwidth: 0.25,
            tail_bandwidth: 0.25,
            tail_fraction: crate::tail::DEFAULT_FRACTION,
            n_mc: DEFAULT_N_MC,
            truncation: DEFAULT_TRUNCATION,
            rho_grid: RhoGrid::default(),
            objective: RhoObjective::ScaledMse,
            kernel: Kernel::biquadratic(1),
        }
    }
}

/// Pilot quantities at one point, curvature in lower orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotEstimates {
    pub curvature: f64,
    pub tail: TailParams,
    pub density: DensityInfo,
}

pub fn pilot_estimates(data: &Dataset, x: f64, settings: &PlugInSettings) -> Result<PilotEstimates> {
    if data.dim() != 1 {
        return Err(invalid("plug-in bandwidths are implemented for p = 1"));
    }
    let curv = local_cubic_second_derivative(data, x, settings.curvature_bandwidth, &settings.kernel)?;
    let mut cfg = EstimatorConfig::for_data(data, settings.tail_bandwidth);
    cfg.h1 = settings.tail_bandwidth;
    let res = residuals(data, &cfg, &[x])?;
    let tail = estimate_tail(&res, settings.tail_fraction)?;
    let density = kde_density(data.design(), 1, &[x], &settings.kernel)?;
    Ok(PilotEstimates {
        curvature: data.orientation().sign() * curv.second_derivative,
        tail,
        density,
    })
}

fn context_for(pilot: &PilotEstimates, c: f64, settings: &PlugInSettings) -> Result<LimitContext> {
    LimitContext::univariate(c, pilot.tail.b_hat, pilot.curvature)?.with_truncation(settings.truncation)
}

/// Local plug-in bandwidth at `x`.
pub fn plug_in_bandwidth(
    data: &Dataset,
    x: f64,
    settings: &PlugInSettings,
    seed: u64,
) -> Result<BandwidthPlan> {
    let pilot = pilot_estimates(data, x, settings)?;
    let ctx = context_for(&pilot, pilot.tail.c_hat, settings)?;
    let search = rho0_search_refined(&ctx, &settings.rho_grid, settings.n_mc, seed, settings.objective)?;
    let mut plan = bandwidth_local(pilot.density.w_hat, search.rho0, pilot.tail.c_hat, 1, data.len())?;
    plan.tau_at_rho0 = search.tau_min;
    plan.b_hat = pilot.tail.b_hat;
    Ok(plan)
}

/// Global plug-in bandwidth over the grid `xs`. The tail exponent is taken
/// constant, equal to the median of the pointwise estimates.
pub fn plug_in_bandwidth_global(
    data: &Dataset,
    xs: &[f64],
    settings: &PlugInSettings,
    seed: u64,
) -> Result<BandwidthPlan> {
    let pilots: Vec<PilotEstimates> = xs
        .iter()
        .map(|&x| pilot_estimates(data, x, settings))
        .collect::<Result<_>>()?;
    let cs: Vec<f64> = pilots.iter().map(|p| p.tail.c_hat).collect();
    let c = crate::stats::median(&cs);
    let contexts: Vec<LimitContext> = pilots
        .iter()
        .map(|p| context_for(p, c, settings))
        .collect::<Result<_>>()?;
    let w_hats: Vec<f64> = pilots.iter().map(|p| p.density.w_hat).collect();
    bandwidth_global(
        &contexts,
        xs,
        &w_hats,
        data.len(),
        &settings.rho_grid,
        settings.n_mc,
        seed,
        settings.objective,
    )
}

/// Seed for the bandwidth search at replication `rep`, kept apart from the
/// data stream.
pub fn search_seed(seed: u64, rep: u64) -> u64 {
    derive_seed(derive_seed(seed, rep), 0x5eed)
}
