//! Kernels, unit-ball geometry, quadrature grids and uniform samplers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::beta::beta_reg;

use crate::error::{invalid, Result};

/// Radial profile of a kernel supported on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelShape {
    /// (1 − r²)²
    Biquadratic,
    /// (1 − r²)
    Epanechnikov,
    /// 1
    Uniform,
}

impl KernelShape {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "biquadratic" | "biweight" | "quartic" => Ok(Self::Biquadratic),
            "epanechnikov" => Ok(Self::Epanechnikov),
            "uniform" => Ok(Self::Uniform),
            other => Err(invalid(format!("unknown kernel '{other}'"))),
        }
    }

    fn profile(self, r2: f64) -> f64 {
        match self {
            Self::Biquadratic => (1.0 - r2) * (1.0 - r2),
            Self::Epanechnikov => 1.0 - r2,
            Self::Uniform => 1.0,
        }
    }

    /// ∫₀¹ r^{p−1} φ(r) dr in closed form.
    fn radial_mass(self, p: usize) -> f64 {
        let p = p as f64;
        match self {
            Self::Biquadratic => 1.0 / p - 2.0 / (p + 2.0) + 1.0 / (p + 4.0),
            Self::Epanechnikov => 1.0 / p - 1.0 / (p + 2.0),
            Self::Uniform => 1.0 / p,
        }
    }
}

/// A spherically symmetric probability density on the p-variate unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    shape: KernelShape,
    dim: usize,
    norm: f64,
}

impl Kernel {
    pub fn new(shape: KernelShape, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("kernel dimension must be at least 1"));
        }
        let mass = dim as f64 * sphere_content(dim)? * shape.radial_mass(dim);
        Ok(Self {
            shape,
            dim,
            norm: 1.0 / mass,
        })
    }

    /// The biquadratic kernel (15/16)(1 − u²)² on [−1, 1]; for p > 1 the same
    /// radial profile renormalised over the unit ball.
    pub fn biquadratic(dim: usize) -> Self {
        Self::new(KernelShape::Biquadratic, dim).expect("dim >= 1")
    }

    pub fn uniform(dim: usize) -> Self {
        Self::new(KernelShape::Uniform, dim).expect("dim >= 1")
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_radius(&self) -> f64 {
        1.0
    }

    /// K(u); zero outside the unit ball.
    pub fn eval(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        self.eval_sq_radius(u.iter().map(|v| v * v).sum())
    }

    /// K as a function of ‖u‖².
    pub fn eval_sq_radius(&self, r2: f64) -> f64 {
        if r2 > 1.0 {
            0.0
        } else {
            self.norm * self.shape.profile(r2)
        }
    }
}

/// The biquadratic kernel on the line.
pub fn biquadratic_kernel() -> Kernel {
    Kernel::biquadratic(1)
}

/// Volume of the p-variate unit ball, π^{p/2} / Γ(p/2 + 1).
pub fn sphere_content(p: usize) -> Result<f64> {
    if p == 0 {
        return Err(invalid("sphere_content needs p >= 1"));
    }
    // w(p) = w(p − 2) · 2π / p
    let mut w = if p % 2 == 1 { 2.0 } else { std::f64::consts::PI };
    let mut k = if p % 2 == 1 { 1 } else { 2 };
    while k < p {
        k += 2;
        w *= 2.0 * std::f64::consts::PI / k as f64;
    }
    Ok(w)
}

/// κ = p⁻¹ ∫ ‖u‖² K(u) du, by composite Simpson quadrature on the radial
/// integral w(p) ∫₀¹ r^{p+1} K(r) dr.
pub fn kernel_moment_kappa(kernel: &Kernel, p: usize) -> Result<f64> {
    if p != kernel.dim() {
        return Err(invalid("kernel dimension does not match p"));
    }
    const PANELS: usize = 4000;
    let f = |r: f64| r.powi(p as i32 + 1) * kernel.eval_sq_radius(r * r);
    let step = 1.0 / PANELS as f64;
    let mut acc = f(0.0) + f(1.0);
    for i in 1..PANELS {
        let coef = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += coef * f(i as f64 * step);
    }
    Ok(sphere_content(p)? * acc * step / 3.0)
}

/// The unit ball, or the larger piece of it left after cutting by a plane at
/// distance `cap_distance` from the centre.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRegion {
    dim: usize,
    cap_distance: f64,
    direction: Vec<f64>,
}

impl BallRegion {
    pub fn full(dim: usize) -> Self {
        let mut direction = vec![0.0; dim.max(1)];
        direction[0] = 1.0;
        Self {
            dim: dim.max(1),
            cap_distance: 1.0,
            direction,
        }
    }

    /// Region `{u : ‖u‖ ≤ 1, uᵀv ≥ −s}` where `v` is the inward normal.
    pub fn cut(dim: usize, cap_distance: f64, direction: &[f64]) -> Result<Self> {
        if dim == 0 || direction.len() != dim {
            return Err(invalid("direction must have length p >= 1"));
        }
        if !(cap_distance >= 0.0) || !cap_distance.is_finite() {
            return Err(invalid("cap distance must be finite and nonnegative"));
        }
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("direction must be a nonzero finite vector"));
        }
        Ok(Self {
            dim,
            cap_distance,
            direction: direction.iter().map(|v| v / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cap_distance(&self) -> f64 {
        self.cap_distance
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn is_full(&self) -> bool {
        self.cap_distance >= 1.0
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        let r2: f64 = u.iter().map(|v| v * v).sum();
        if r2 > 1.0 {
            return false;
        }
        self.is_full() || dot(u, &self.direction) >= -self.cap_distance
    }

    /// Volume of the region divided by the volume of the unit ball.
    pub fn volume_fraction(&self) -> f64 {
        if self.is_full() {
            return 1.0;
        }
        let s = self.cap_distance;
        // the discarded cap has height 1 − s
        let cap = 0.5 * beta_reg((self.dim as f64 + 1.0) / 2.0, 0.5, 1.0 - s * s);
        1.0 - cap
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sample_ball<R: Rng + ?Sized>(dim: usize, rng: &mut R, out: &mut [f64]) {
    if dim == 1 {
        out[0] = rng.random_range(-1.0..=1.0);
        return;
    }
    loop {
        let mut n2 = 0.0;
        for v in out.iter_mut() {
            *v = StandardNormal.sample(rng);
            n2 += *v * *v;
        }
        if n2 > 0.0 {
            let radius = rng.random::<f64>().powf(1.0 / dim as f64);
            let scale = radius / n2.sqrt();
            out.iter_mut().for_each(|v| *v *= scale);
            return;
        }
    }
}

/// One draw uniform on `region`, by rejection from the full ball.
pub fn sample_uniform_region<R: Rng + ?Sized>(region: &BallRegion, rng: &mut R) -> Vec<f64> {
    let mut u = vec![0.0; region.dim];
    sample_uniform_region_into(region, rng, &mut u);
    u
}

pub(crate) fn sample_uniform_region_into<R: Rng + ?Sized>(
    region: &BallRegion,
    rng: &mut R,
    out: &mut [f64],
) {
    loop {
        sample_ball(region.dim, rng, out);
        if region.is_full() || dot(out, &region.direction) >= -region.cap_distance {
            return;
        }
    }
}

/// A quadrature node in the unit ball with its cell volume.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadNode {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Midpoint tensor grid over the unit ball with `resolution` cells per axis.
///
/// For p = 1 the weights are the exact cell widths. For p ≥ 2 cells whose
/// centres fall inside the ball are kept and their weights rescaled so they
/// sum to the ball volume.
pub fn quadrature_grid(p: usize, resolution: usize) -> Result<Vec<QuadNode>> {
    if p == 0 {
        return Err(invalid("quadrature grid needs p >= 1"));
    }
    if resolution < 3 {
        return Err(invalid("quadrature resolution must be at least 3"));
    }
    let step = 2.0 / resolution as f64;
    let axis: Vec<f64> = (0..resolution)
        .map(|k| -1.0 + (k as f64 + 0.5) * step)
        .collect();
    if p == 1 {
        return Ok(axis
            .into_iter()
            .map(|u| QuadNode {
                point: vec![u],
                weight: step,
            })
            .collect());
    }
    let total = resolution
        .checked_pow(p as u32)
        .ok_or_else(|| invalid("quadrature grid too large"))?;
    let cell = step.powi(p as i32);
    let mut nodes = Vec::new();
    let mut idx = vec![0usize; p];
    for _ in 0..total {
        let point: Vec<f64> = idx.iter().map(|&k| axis[k]).collect();
        if point.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            nodes.push(QuadNode {
                point,
                weight: cell,
            });
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < resolution {
                break;
            }
            *slot = 0;
        }
    }
    let sum: f64 = nodes.iter().map(|n| n.weight).sum();
    let fix = sphere_content(p)? / sum;
    nodes.iter_mut().for_each(|n| n.weight *= fix);
    Ok(nodes)
}
