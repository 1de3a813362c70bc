//! Pilot estimates used by the bandwidth selector: frontier curvature by a
//! local cubic fit and the design density by a kernel density estimate.

use crate::error::{invalid, Error, Result};
use crate::frontier::Dataset;
use crate::kernel_geom::{sphere_content, Kernel};
use crate::linalg;

/// Default local cubic bandwidth on unit-scaled covariates.
pub const DEFAULT_CURVATURE_BANDWIDTH: f64 = 0.25;

/// Densities below this are floored.
pub const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureEstimate {
    /// second derivative of the conditional mean, user orientation
    pub second_derivative: f64,
    pub bandwidth_used: f64,
}

/// Second derivative at `x` from a kernel-weighted cubic least-squares fit of
/// the responses on `X − x`.
pub fn local_cubic_second_derivative(
    data: &Dataset,
    x: f64,
    bandwidth: f64,
    kernel: &Kernel,
) -> Result<CurvatureEstimate> {
    if data.dim() != 1 {
        return Err(invalid("local cubic curvature is implemented for p = 1"));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(invalid("curvature bandwidth must be positive"));
    }
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for i in 0..data.len() {
        let v = (data.point(i)[0] - x) / bandwidth;
        let k = kernel.eval(&[v]);
        if k > 0.0 {
            rows.extend_from_slice(&[1.0, v, v * v, v * v * v]);
            y.push(data.response(i));
            w.push(k);
        }
    }
    if w.len() < 5 {
        return Err(Error::SingularDesign);
    }
    let theta = linalg::weighted_least_squares(&rows, &y, &w, 4, 1e-12).ok_or(Error::SingularDesign)?;
    Ok(CurvatureEstimate {
        second_derivative: 2.0 * theta[2] / (bandwidth * bandwidth),
        bandwidth_used: bandwidth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityInfo {
    pub g_hat: f64,
    /// sphere content times the density
    pub w_hat: f64,
    pub p: usize,
    pub bandwidth: f64,
    pub floored: bool,
}

/// Normal-reference bandwidth: `1.06 σ̂ n^{−1/5}` for p = 1, and
/// `σ̄ (4/(p+2))^{1/(p+4)} n^{−1/(p+4)}` with `σ̄` the mean coordinate standard
/// deviation otherwise.
pub fn normal_reference_bandwidth(design: &[f64], dim: usize) -> Result<f64> {
    let n = design.len() / dim.max(1);
    if dim == 0 || n < 2 || design.len() != n * dim {
        return Err(invalid("density estimate needs at least two points"));
    }
    let sd = |k: usize| {
        let mean = (0..n).map(|i| design[i * dim + k]).sum::<f64>() / n as f64;
        let ss = (0..n).map(|i| (design[i * dim + k] - mean).powi(2)).sum::<f64>();
        (ss / (n as f64 - 1.0)).sqrt()
    };
    let sigma = (0..dim).map(sd).sum::<f64>() / dim as f64;
    if !(sigma > 0.0) {
        return Err(invalid("design has zero spread"));
    }
    let nf = n as f64;
    Ok(if dim == 1 {
        1.06 * sigma * nf.powf(-0.2)
    } else {
        let d = dim as f64;
        sigma * (4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * nf.powf(-1.0 / (d + 4.0))
    })
}

/// Kernel density estimate of the design at `x`, row-major `design`.
pub fn kde_density(design: &[f64], dim: usize, x: &[f64], kernel: &Kernel) -> Result<DensityInfo> {
    if x.len() != dim || kernel.dim() != dim {
        return Err(invalid("dimension mismatch in density estimate"));
    }
    let bw = normal_reference_bandwidth(design, dim)?;
    let n = design.len() / dim;
    let mut u = vec![0.0; dim];
    let mut sum = 0.0;
    for i in 0..n {
        for k in 0..dim {
            u[k] = (x[k] - design[i * dim + k]) / bw;
        }
        sum += kernel.eval(&u);
    }
    let raw = sum / (n as f64 * bw.powi(dim as i32));
    let floored = raw < DENSITY_FLOOR;
    let g_hat = raw.max(DENSITY_FLOOR);
    Ok(DensityInfo {
        g_hat,
        w_hat: sphere_content(dim)? * g_hat,
        p: dim,
        bandwidth: bw,
        floored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontier::Orientation;
    use crate::kernel_geom::biquadratic_kernel;
    use crate::rng::substream;
    use rand::Rng;
    use rand_distr::{Distribution, Exp1};

    fn data(x: Vec<f64>, y: Vec<f64>) -> Dataset {
        Dataset::univariate(x, y, Orientation::Lower).unwrap()
    }

    #[test]
    fn cubic_fit_is_exact_on_polynomials() {
        let xs: Vec<f64> = (0..41).map(|i| i as f64 / 40.0).collect();
        let k = biquadratic_kernel();
        let sq = data(xs.clone(), xs.iter().map(|x| x * x).collect());
        let c = local_cubic_second_derivative(&sq, 0.5, 0.25, &k).unwrap();
        assert!((c.second_derivative - 2.0).abs() < 1e-8);
        let lin = data(xs.clone(), xs.iter().map(|x| 3.0 + 5.0 * x).collect());
        let c = local_cubic_second_derivative(&lin, 0.5, 0.25, &k).unwrap();
        assert!(c.second_derivative.abs() < 1e-8);
        let cub = data(xs.clone(), xs.iter().map(|x| x * x * x - x).collect());
        let c = local_cubic_second_derivative(&cub, 0.4, 0.25, &k).unwrap();
        assert!((c.second_derivative - 2.4).abs() < 1e-8);
    }

    #[test]
    fn cubic_fit_needs_points() {
        let d = data(vec![0.0, 0.1, 0.2], vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            local_cubic_second_derivative(&d, 0.1, 0.25, &biquadratic_kernel()),
            Err(Error::SingularDesign)
        ));
    }

    #[test]
    fn noisy_curvature_on_average() {
        let k = biquadratic_kernel();
        let mut total = 0.0;
        for s in 0..50 {
            let mut rng = substream(5, s);
            let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
            let ys: Vec<f64> = xs
                .iter()
                .map(|x| {
                    let e: f64 = Exp1.sample(&mut rng);
                    x * x + e
                })
                .collect();
            total += local_cubic_second_derivative(&data(xs, ys), 0.5, 0.25, &k)
                .unwrap()
                .second_derivative;
        }
        let mean = total / 50.0;
        assert!((mean - 2.0).abs() < 0.5, "{mean}");
    }

    #[test]
    fn reference_bandwidth() {
        // standardized sample with unit sample sd
        let raw: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let m = raw.iter().sum::<f64>() / 100.0;
        let sd = (raw.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 99.0).sqrt();
        let z: Vec<f64> = raw.iter().map(|v| (v - m) / sd).collect();
        let bw = normal_reference_bandwidth(&z, 1).unwrap();
        assert!((bw - 1.06 * 100f64.powf(-0.2)).abs() < 1e-12);
        assert!((bw - 0.4218).abs() < 1e-3);
    }

    #[test]
    fn uniform_density() {
        let mut rng = substream(9, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let info = kde_density(&xs, 1, &[0.5], &biquadratic_kernel()).unwrap();
        assert!((info.g_hat - 1.0).abs() < 0.1);
        assert_eq!(info.w_hat, 2.0 * info.g_hat);
        assert!(!info.floored);
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = substream(9, 1);
        let xs: Vec<f64> = (0..500).map(|_| rng.random::<f64>() * 3.0).collect();
        let k = biquadratic_kernel();
        let step = 0.01;
        let total: f64 = (0..700)
            .map(|i| -2.0 + (i as f64 + 0.5) * step)
            .map(|x| kde_density(&xs, 1, &[x], &k).unwrap().g_hat)
            .sum::<f64>()
            * step;
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }
}
