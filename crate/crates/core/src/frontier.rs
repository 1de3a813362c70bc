//! Frontier estimators.
//!
//! * [`estimate_tilde_a`]: the local linear-programming estimator, the
//!   highest hyperplane at `x` lying below every windowed observation.
//! * [`estimate_naive`]: the windowed extreme response.
//! * [`smooth_hat_a`] / [`smooth_check_a`]: local-linear and local-average
//!   smoothing of the raw estimator over a quadrature grid, with hard
//!   thresholding `|ã| ≤ B`.
//! * [`residuals`]: positive residuals around a point, for tail estimation.
//!
//! Internally the frontier is always a lower envelope; data read with
//! [`Orientation::Upper`] have their responses negated on the way in and
//! estimates negated on the way out.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{invalid, Error, Result};
use crate::kernel_geom::{quadrature_grid, Kernel, QuadNode};
use crate::linalg;
use crate::lp::{envelope_at_zero, solve_lp, LinearProgram, LpOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Observations lie above the frontier (errors ε ≥ 0 added).
    Lower,
    /// Observations lie below the frontier.
    Upper,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Lower => 1.0,
            Orientation::Upper => -1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lower" => Ok(Self::Lower),
            "upper" => Ok(Self::Upper),
            other => Err(invalid(format!("unknown orientation '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lower => "lower",
            Self::Upper => "upper",
        }
    }
}

/// Design points and responses.
#[derive(Debug, Clone)]
pub struct Dataset {
    dim: usize,
    design: Vec<f64>,
    /// lower-envelope orientation
    response: Vec<f64>,
    orientation: Orientation,
    /// p = 1 only: indices sorted by covariate, with sorted copies.
    order: Vec<usize>,
    sorted_x: Vec<f64>,
    sorted_y: Vec<f64>,
}

impl Dataset {
    /// `design` is row-major `n × dim`; `response` is in the user's
    /// orientation.
    pub fn new(
        design: Vec<f64>,
        dim: usize,
        response: Vec<f64>,
        orientation: Orientation,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("design dimension must be at least 1"));
        }
        let n = response.len();
        if n == 0 {
            return Err(invalid("dataset needs at least one observation"));
        }
        if design.len() != n * dim {
            return Err(invalid("design and response lengths disagree"));
        }
        if design.iter().chain(&response).any(|v| !v.is_finite()) {
            return Err(invalid("dataset contains non-finite values"));
        }
        let sign = orientation.sign();
        let response: Vec<f64> = response.into_iter().map(|y| sign * y).collect();
        let (order, sorted_x, sorted_y) = if dim == 1 {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| design[a].total_cmp(&design[b]).then(a.cmp(&b)));
            let sx = order.iter().map(|&i| design[i]).collect();
            let sy = order.iter().map(|&i| response[i]).collect();
            (order, sx, sy)
        } else {
            (Vec::new(), Vec::new(), Vec::new())
        };
        Ok(Self {
            dim,
            design,
            response,
            orientation,
            order,
            sorted_x,
            sorted_y,
        })
    }

    /// Single-covariate convenience constructor.
    pub fn univariate(x: Vec<f64>, y: Vec<f64>, orientation: Orientation) -> Result<Self> {
        Self::new(x, 1, y, orientation)
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.design[i * self.dim..(i + 1) * self.dim]
    }

    /// Response in the user's orientation.
    pub fn response(&self, i: usize) -> f64 {
        self.orientation.sign() * self.response[i]
    }

    pub fn responses(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.response(i)).collect()
    }

    pub fn design(&self) -> &[f64] {
        &self.design
    }

    pub fn max_abs_response(&self) -> f64 {
        self.response.iter().fold(0.0_f64, |a, y| a.max(y.abs()))
    }

    /// Per-coordinate (min, max) of the design.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|k| {
                (0..self.len()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                    let v = self.design[i * self.dim + k];
                    (lo.min(v), hi.max(v))
                })
            })
            .collect()
    }

    fn distance(&self, i: usize, x: &[f64]) -> f64 {
        if self.dim == 1 {
            (self.design[i] - x[0]).abs()
        } else {
            self.point(i)
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        }
    }

    /// Positions in the sorted arrays with |X − x| ≤ h (p = 1).
    fn sorted_window(&self, x: f64, h: f64) -> std::ops::Range<usize> {
        let lo = self.sorted_x.partition_point(|&v| (v - x).abs() > h && v < x);
        let hi = self.sorted_x.partition_point(|&v| v < x || (v - x).abs() <= h);
        lo..hi
    }

    fn window(&self, x: &[f64], h: f64) -> Vec<usize> {
        if self.dim == 1 {
            self.sorted_window(x[0], h).map(|k| self.order[k]).collect()
        } else {
            (0..self.len()).filter(|&i| self.distance(i, x) <= h).collect()
        }
    }
}

/// Bandwidths and thresholds for the frontier estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// window radius for the raw estimator
    pub h: f64,
    /// smoothing bandwidth
    pub h1: f64,
    /// hard threshold B on |ã| in the smoothers
    pub bound: f64,
    /// minimum number of design points in a window
    pub k_min: usize,
    /// value reported when the raw estimator is unbounded
    pub clamp_value: f64,
    /// quadrature cells per axis for the smoothers
    pub resolution: usize,
}

impl EstimatorConfig {
    /// Defaults: `h1 = h`, `B = 10 max|Y|`, `k_min = p + 2`, clamp 0, 201
    /// quadrature cells.
    pub fn for_data(data: &Dataset, h: f64) -> Self {
        let max = data.max_abs_response();
        Self {
            h,
            h1: h,
            bound: if max > 0.0 { 10.0 * max } else { 1.0 },
            k_min: data.dim() + 2,
            clamp_value: 0.0,
            resolution: 201,
        }
    }

    pub fn with_h1(mut self, h1: f64) -> Self {
        self.h1 = h1;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.h) || !pos(self.h1) || !pos(self.bound) {
            return Err(invalid("h, h1 and B must be positive and finite"));
        }
        if self.k_min < dim + 2 {
            return Err(invalid(format!("k_min must be at least p + 2 = {}", dim + 2)));
        }
        if !self.clamp_value.is_finite() {
            return Err(invalid("clamp value must be finite"));
        }
        if self.resolution < 3 {
            return Err(invalid("quadrature resolution must be at least 3"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitStatus {
    Bounded,
    Unbounded,
    EmptyWindow,
}

impl FitStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bounded => "bounded",
            Self::Unbounded => "unbounded",
            Self::EmptyWindow => "empty_window",
        }
    }
}

/// One raw LP frontier fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    /// ã(x), or the clamp value when not bounded
    pub value: f64,
    pub slope: Vec<f64>,
    pub status: FitStatus,
    pub h_effective: f64,
    pub n_local: usize,
}

impl LocalFit {
    pub fn is_bounded(&self) -> bool {
        self.status == FitStatus::Bounded
    }

    fn empty(dim: usize, clamp: f64) -> Self {
        Self {
            value: clamp,
            slope: vec![0.0; dim],
            status: FitStatus::EmptyWindow,
            h_effective: f64::NAN,
            n_local: 0,
        }
    }
}

/// Smallest radius ≥ `h` whose ball around `x` holds at least `k_min`
/// design points.
pub fn expand_window(data: &Dataset, x: &[f64], h: f64, k_min: usize) -> Result<f64> {
    if x.len() != data.dim() {
        return Err(invalid("evaluation point has the wrong dimension"));
    }
    if k_min == 0 {
        return Err(invalid("k_min must be at least 1"));
    }
    let n = data.len();
    if n < k_min {
        return Err(Error::EmptyWindow {
            available: n,
            required: k_min,
        });
    }
    if data.dim() == 1 {
        let x0 = x[0];
        if data.sorted_window(x0, h).len() >= k_min {
            return Ok(h);
        }
        // merge outward from x: the k-th nearest neighbour distance
        let xs = &data.sorted_x;
        let mut right = xs.partition_point(|&v| v < x0);
        let mut left = right;
        let mut radius = 0.0_f64;
        for _ in 0..k_min {
            let dl = if left > 0 { x0 - xs[left - 1] } else { f64::INFINITY };
            let dr = if right < n { xs[right] - x0 } else { f64::INFINITY };
            if dl <= dr {
                radius = radius.max((xs[left - 1] - x0).abs());
                left -= 1;
            } else {
                radius = radius.max((xs[right] - x0).abs());
                right += 1;
            }
        }
        return Ok(radius.max(h));
    }
    let mut dist: Vec<f64> = (0..n).map(|i| data.distance(i, x)).collect();
    if dist.iter().filter(|&&d| d <= h).count() >= k_min {
        return Ok(h);
    }
    let (_, kth, _) = dist.select_nth_unstable_by(k_min - 1, f64::total_cmp);
    Ok(kth.max(h))
}

/// Local linear-programming estimate ã(x): the largest α such that
/// `Yᵢ ≥ α + βᵀ(Xᵢ − x)` for some β and every windowed observation.
pub fn estimate_tilde_a(data: &Dataset, x: &[f64], cfg: &EstimatorConfig) -> Result<LocalFit> {
    let h_eff = expand_window(data, x, cfg.h, cfg.k_min)?;
    let sign = data.orientation().sign();
    let dim = data.dim();

    let fit = if dim == 1 {
        let range = data.sorted_window(x[0], h_eff);
        let n_local = range.len();
        let v: Vec<f64> = data.sorted_x[range.clone()].iter().map(|&xi| xi - x[0]).collect();
        let y = &data.sorted_y[range];
        let mut hull = Vec::with_capacity(n_local);
        envelope_at_zero(&v, y, &mut hull).map(|e| (e.value, vec![e.slope], n_local))
    } else {
        lp_fit(data, x, h_eff)?
    };

    Ok(match fit {
        Some((value, slope, n_local)) => LocalFit {
            value: sign * value,
            slope: slope.into_iter().map(|s| sign * s).collect(),
            status: FitStatus::Bounded,
            h_effective: h_eff,
            n_local,
        },
        None => LocalFit {
            value: cfg.clamp_value,
            slope: vec![0.0; dim],
            status: FitStatus::Unbounded,
            h_effective: h_eff,
            n_local: data.window(x, h_eff).len(),
        },
    })
}

/// General-dimension fit through the simplex, on responses shifted and
/// scaled to O(1) and covariate offsets scaled by the window radius.
fn lp_fit(data: &Dataset, x: &[f64], h_eff: f64) -> Result<Option<(f64, Vec<f64>, usize)>> {
    let dim = data.dim();
    let idx = data.window(x, h_eff);
    let (lo, hi) = idx
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(data.response[i]), hi.max(data.response[i]))
        });
    let shift = lo;
    let scale = if hi > lo { hi - lo } else { 1.0 };
    let mut objective = vec![0.0; dim + 1];
    objective[0] = 1.0;
    let mut lp = LinearProgram::with_capacity(objective, idx.len());
    let mut row = vec![0.0; dim + 1];
    row[0] = 1.0;
    for &i in &idx {
        for (k, r) in row[1..].iter_mut().enumerate() {
            *r = (data.point(i)[k] - x[k]) / h_eff;
        }
        lp.push(&row, (data.response[i] - shift) / scale);
    }
    match solve_lp(&lp)? {
        LpOutcome::Optimal(sol) => {
            let value = shift + scale * sol.point[0];
            let slope = sol.point[1..].iter().map(|b| scale * b / h_eff).collect();
            Ok(Some((value, slope, idx.len())))
        }
        LpOutcome::Unbounded { .. } => Ok(None),
        LpOutcome::Infeasible => Err(Error::NumericalFailure { cap: 0 }),
    }
}

/// Naive estimate: the windowed response extreme on the frontier side.
pub fn estimate_naive(data: &Dataset, x: &[f64], h: f64) -> Result<f64> {
    let h_eff = expand_window(data, x, h, 1)?;
    let min = if data.dim() == 1 {
        data.sorted_y[data.sorted_window(x[0], h_eff)]
            .iter()
            .fold(f64::INFINITY, |a, &y| a.min(y))
    } else {
        data.window(x, h_eff)
            .into_iter()
            .fold(f64::INFINITY, |a, i| a.min(data.response[i]))
    };
    Ok(data.orientation().sign() * min)
}

/// Write-once cache of raw fits keyed by location and window settings.
#[derive(Debug, Default)]
pub struct FitCache {
    map: Mutex<HashMap<(Vec<u64>, u64, usize), LocalFit>>,
}

impl FitCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_fit(&self, data: &Dataset, x: &[f64], cfg: &EstimatorConfig) -> Result<LocalFit> {
        let key = (
            x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            cfg.h.to_bits(),
            cfg.k_min,
        );
        if let Some(fit) = self.map.lock().unwrap().get(&key) {
            return Ok(fit.clone());
        }
        let fit = fit_or_empty(data, x, cfg)?;
        Ok(self
            .map
            .lock()
            .unwrap()
            .entry(key)
            .or_insert(fit)
            .clone())
    }
}

fn fit_or_empty(data: &Dataset, x: &[f64], cfg: &EstimatorConfig) -> Result<LocalFit> {
    match estimate_tilde_a(data, x, cfg) {
        Ok(fit) => Ok(fit),
        Err(Error::EmptyWindow { .. }) => Ok(LocalFit::empty(data.dim(), cfg.clamp_value)),
        Err(e) => Err(e),
    }
}

/// Raw fits at `x + h1·u` over the quadrature nodes `u` of the unit ball.
#[derive(Debug, Clone)]
pub struct RawGrid {
    centre: Vec<f64>,
    h1: f64,
    nodes: Vec<QuadNode>,
    fits: Vec<LocalFit>,
}

impl RawGrid {
    /// Fit ã at every node whose location lies inside the design's bounding
    /// box.
    pub fn build(data: &Dataset, x: &[f64], cfg: &EstimatorConfig) -> Result<Self> {
        Self::build_with(data, x, cfg, None)
    }

    pub fn build_cached(
        data: &Dataset,
        x: &[f64],
        cfg: &EstimatorConfig,
        cache: &FitCache,
    ) -> Result<Self> {
        Self::build_with(data, x, cfg, Some(cache))
    }

    fn build_with(
        data: &Dataset,
        x: &[f64],
        cfg: &EstimatorConfig,
        cache: Option<&FitCache>,
    ) -> Result<Self> {
        cfg.validate(data.dim())?;
        if x.len() != data.dim() {
            return Err(invalid("evaluation point has the wrong dimension"));
        }
        let bbox = data.bounding_box();
        let mut nodes = Vec::new();
        let mut fits = Vec::new();
        let mut loc = vec![0.0; x.len()];
        for node in quadrature_grid(data.dim(), cfg.resolution)? {
            for k in 0..x.len() {
                loc[k] = x[k] + cfg.h1 * node.point[k];
            }
            if loc.iter().zip(&bbox).any(|(v, (lo, hi))| v < lo || v > hi) {
                continue;
            }
            let fit = match cache {
                Some(c) => c.get_or_fit(data, &loc, cfg)?,
                None => fit_or_empty(data, &loc, cfg)?,
            };
            nodes.push(node);
            fits.push(fit);
        }
        Ok(Self {
            centre: x.to_vec(),
            h1: cfg.h1,
            nodes,
            fits,
        })
    }

    /// Grid from an arbitrary raw estimator, called with each node location.
    pub fn from_fn(
        x: &[f64],
        h1: f64,
        resolution: usize,
        mut raw: impl FnMut(&[f64]) -> LocalFit,
    ) -> Result<Self> {
        let nodes = quadrature_grid(x.len(), resolution)?;
        let fits = nodes
            .iter()
            .map(|n| {
                let loc: Vec<f64> = x.iter().zip(&n.point).map(|(c, u)| c + h1 * u).collect();
                raw(&loc)
            })
            .collect();
        Ok(Self {
            centre: x.to_vec(),
            h1,
            nodes,
            fits,
        })
    }

    pub fn centre(&self) -> &[f64] {
        &self.centre
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn fits(&self) -> &[LocalFit] {
        &self.fits
    }

    /// Nodes passing the threshold, as (u, K(u)·cell weight, ã).
    fn usable<'a>(
        &'a self,
        bound: f64,
        kernel: &'a Kernel,
    ) -> impl Iterator<Item = (&'a [f64], f64, f64)> + 'a {
        self.nodes.iter().zip(&self.fits).filter_map(move |(node, fit)| {
            if !fit.is_bounded() || !(fit.value.abs() <= bound) {
                return None;
            }
            let w = node.weight * kernel.eval(&node.point);
            (w > 0.0).then_some((node.point.as_slice(), w, fit.value))
        })
    }
}

/// Thresholded local-average smoother ǎ(x).
pub fn smooth_check_a(raw: &RawGrid, cfg: &EstimatorConfig, kernel: &Kernel) -> Result<f64> {
    let (num, den) = raw
        .usable(cfg.bound, kernel)
        .fold((0.0, 0.0), |(n, d), (_, w, a)| (n + w * a, d + w));
    if den <= 0.0 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(num / den)
}

/// Thresholded local-linear smoother â(x): the intercept of a kernel-weighted
/// least-squares plane through the raw fits.
pub fn smooth_hat_a(raw: &RawGrid, cfg: &EstimatorConfig, kernel: &Kernel) -> Result<f64> {
    let k = raw.centre.len() + 1;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for (u, wi, a) in raw.usable(cfg.bound, kernel) {
        rows.push(1.0);
        rows.extend_from_slice(u);
        y.push(a);
        w.push(wi);
    }
    if w.is_empty() {
        return Err(Error::DegenerateDenominator);
    }
    let theta = linalg::weighted_least_squares(&rows, &y, &w, k, 1e-10).ok_or(Error::SingularDesign)?;
    Ok(theta[0])
}

/// Positive residuals `Yᵢ − ã(Xᵢ)` (frontier-side distances) for design
/// points within `cfg.h` of `x`, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub residuals: Vec<f64>,
    pub centre: Vec<f64>,
    pub radius: f64,
    /// design points in the window
    pub n_window: usize,
    /// window points whose raw fit was not bounded
    pub n_unbounded: usize,
}

impl ResidualSet {
    /// Build from raw residuals, keeping those above the zero threshold.
    pub fn from_raw(raw: &[f64], centre: Vec<f64>, radius: f64) -> Self {
        let mut residuals: Vec<f64> = raw.iter().copied().filter(|&e| e > ZERO_RESIDUAL).collect();
        residuals.sort_by(f64::total_cmp);
        Self {
            residuals,
            centre,
            radius,
            n_window: raw.len(),
            n_unbounded: 0,
        }
    }

    pub fn n1(&self) -> usize {
        self.residuals.len()
    }
}

/// Residuals at or below this are treated as zero.
pub const ZERO_RESIDUAL: f64 = 1e-12;

pub fn residuals(data: &Dataset, cfg: &EstimatorConfig, x: &[f64]) -> Result<ResidualSet> {
    if x.len() != data.dim() {
        return Err(invalid("evaluation point has the wrong dimension"));
    }
    let sign = data.orientation().sign();
    let idx = data.window(x, cfg.h);
    let mut raw = Vec::with_capacity(idx.len());
    let mut n_unbounded = 0;
    for &i in &idx {
        let fit = estimate_tilde_a(data, data.point(i), cfg)?;
        if fit.is_bounded() {
            raw.push(data.response[i] - sign * fit.value);
        } else {
            n_unbounded += 1;
        }
    }
    let mut set = ResidualSet::from_raw(&raw, x.to_vec(), cfg.h);
    set.n_window = idx.len();
    set.n_unbounded = n_unbounded;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoother {
    /// local linear (â)
    Hat,
    /// local average (ǎ)
    Check,
}

impl Smoother {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hat" | "local-linear" => Ok(Self::Hat),
            "check" | "local-average" => Ok(Self::Check),
            other => Err(invalid(format!("unknown smoother '{other}'"))),
        }
    }

    pub fn apply(self, raw: &RawGrid, cfg: &EstimatorConfig, kernel: &Kernel) -> Result<f64> {
        match self {
            Self::Hat => smooth_hat_a(raw, cfg, kernel),
            Self::Check => smooth_check_a(raw, cfg, kernel),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub x: Vec<f64>,
    pub a_tilde: f64,
    /// smoothed estimate, or the error kind when smoothing failed
    pub a_smooth: std::result::Result<f64, &'static str>,
    pub status: FitStatus,
    pub h_used: f64,
}

impl CurvePoint {
    pub fn succeeded(&self) -> bool {
        self.status == FitStatus::Bounded && self.a_smooth.is_ok()
    }
}

/// Raw and smoothed estimates over a grid. Per-point failures are recorded
/// in the output and never abort the sweep.
pub fn estimate_curve(
    data: &Dataset,
    grid: &[Vec<f64>],
    cfgs: &[EstimatorConfig],
    kernel: &Kernel,
    smoother: Smoother,
) -> Result<Vec<CurvePoint>> {
    if grid.len() != cfgs.len() {
        return Err(invalid("one estimator config per grid point is required"));
    }
    let cache = FitCache::new();
    let mut out = Vec::with_capacity(grid.len());
    for (x, cfg) in grid.iter().zip(cfgs) {
        cfg.validate(data.dim())?;
        let fit = cache.get_or_fit(data, x, cfg)?;
        let a_smooth = RawGrid::build_cached(data, x, cfg, &cache)
            .and_then(|raw| smoother.apply(&raw, cfg, kernel))
            .map_err(|e| e.kind());
        out.push(CurvePoint {
            x: x.clone(),
            a_tilde: fit.value,
            a_smooth,
            status: fit.status,
            h_used: cfg.h,
        });
    }
    Ok(out)
}
