//! Constant-coefficient heat kernels, the frozen kernel `Gamma_A`, and Gaussian bound fitting.

pub mod oracle;

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::distance::{cc_distance, DistanceConfig, DistanceError};
use crate::group::{CarnotGroup, GroupError, GroupKind};
use crate::quadrature::halton;

pub use oracle::{HeisenbergTable, OracleError, OracleGridConfig};

/// A kernel value with error bars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelEstimate {
    pub value: f64,
    pub quad_error: f64,
    pub truncation_error: f64,
    /// Set when the query fell outside tabulated data.
    pub extrapolated: bool,
}

impl KernelEstimate {
    pub fn exact(value: f64) -> Self {
        KernelEstimate { value, quad_error: 0.0, truncation_error: 0.0, extrapolated: false }
    }

    pub fn error(&self) -> f64 {
        self.quad_error + self.truncation_error
    }

    pub fn scale(self, s: f64) -> Self {
        KernelEstimate {
            value: self.value * s,
            quad_error: self.quad_error * s.abs(),
            truncation_error: self.truncation_error * s.abs(),
            extrapolated: self.extrapolated,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("no heat kernel available for group '{0}'")]
    Unsupported(String),
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("matrix has shape {rows}x{cols}, expected {m}x{m}")]
    Shape { rows: usize, cols: usize, m: usize },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

fn is_heisenberg1(g: &CarnotGroup) -> bool {
    g.kind() == GroupKind::FreeStep2 { generators: 2 }
}

/// `Gamma0(x, t)` for `Delta_G - d_t` with pole at the origin.
pub fn heat_kernel_g0(g: &CarnotGroup, x: &[f64], t: f64) -> Result<KernelEstimate, KernelError> {
    if x.len() != g.dim() {
        return Err(GroupError::DimensionMismatch { expected: g.dim(), got: x.len() }.into());
    }
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime(t));
    }
    match g.kind() {
        GroupKind::Euclidean => Ok(KernelEstimate::exact(euclidean_heat(x, t))),
        _ if is_heisenberg1(g) => {
            let table = oracle::default_table()?;
            Ok(heisenberg_from_table(&table, x, t))
        }
        _ => Err(KernelError::Unsupported(g.name().to_string())),
    }
}

pub fn euclidean_heat(x: &[f64], t: f64) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (4.0 * PI * t).powf(-(x.len() as f64) / 2.0) * (-r2 / (4.0 * t)).exp()
}

/// Heisenberg kernel from a `t = 1` table via `Gamma0(x, t) = t^{-2} Gamma0(delta_{1/sqrt t} x, 1)`.
pub fn heisenberg_from_table(table: &HeisenbergTable, x: &[f64], t: f64) -> KernelEstimate {
    let s = t.sqrt();
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt() / s;
    let z = x[2] / t;
    let v = table.lookup(rho, z);
    let scale = 1.0 / (t * t);
    if v.outside {
        KernelEstimate { value: 0.0, quad_error: table.edge_bound() * scale, truncation_error: 0.0, extrapolated: true }
    } else {
        KernelEstimate {
            value: v.value.max(0.0) * scale,
            quad_error: (table.header.richardson_diff + v.value.min(0.0).abs()) * scale,
            truncation_error: 0.0,
            extrapolated: false,
        }
    }
}

/// Linear automorphism `T_A` with `J_A = |det T_A|`, stored as an `N x N` matrix.
#[derive(Debug, Clone)]
pub struct Automorphism {
    pub matrix: DMatrix<f64>,
    pub jacobian_det: f64,
}

impl Automorphism {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)] * x[j]).sum()).collect()
    }
}

/// Symmetric `A^{-1/2}`, or an error if `A` is not SPD.
pub fn inv_sqrt_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
    let m = a.nrows();
    if a.ncols() != m {
        return Err(KernelError::Shape { rows: a.nrows(), cols: a.ncols(), m });
    }
    let scale = a.amax().max(1e-300);
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return Err(KernelError::NotSpd);
    }
    let eig = SymmetricEigen::new(a.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 1e-14 * scale)) {
        return Err(KernelError::NotSpd);
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// `T_A` for Euclidean and free step-2 groups: `A^{-1/2}` on the first layer and the
/// induced map `x_{pq} -> sum_{j<k} (B_pj B_qk - B_pk B_qj) x_{jk}` on the second.
pub fn automorphism_ta(g: &CarnotGroup, a: &DMatrix<f64>) -> Result<Automorphism, KernelError> {
    let m = g.m1();
    if a.nrows() != m || a.ncols() != m {
        return Err(KernelError::Shape { rows: a.nrows(), cols: a.ncols(), m });
    }
    let b = inv_sqrt_spd(a)?;
    let n = g.dim();
    let mut t = DMatrix::zeros(n, n);
    t.view_mut((0, 0), (m, m)).copy_from(&b);
    match g.kind() {
        GroupKind::Euclidean => {}
        GroupKind::FreeStep2 { .. } => {
            let pairs = g.pairs();
            for (r, &(p, q)) in pairs.iter().enumerate() {
                for (c, &(j, k)) in pairs.iter().enumerate() {
                    t[(m + r, m + c)] = b[(p, j)] * b[(q, k)] - b[(p, k)] * b[(q, j)];
                }
            }
        }
        GroupKind::Custom => return Err(KernelError::Unsupported(g.name().to_string())),
    }
    let jacobian_det = t.determinant().abs();
    Ok(Automorphism { matrix: t, jacobian_det })
}

/// `Gamma_A(x, t) = J_A Gamma0(T_A x, t)`, the kernel of `sum a_ij X_i X_j - d_t`.
pub fn frozen_kernel(g: &CarnotGroup, a: &DMatrix<f64>, x: &[f64], t: f64) -> Result<KernelEstimate, KernelError> {
    let ta = automorphism_ta(g, a)?;
    frozen_kernel_with(g, &ta, x, t)
}

pub fn frozen_kernel_with(g: &CarnotGroup, ta: &Automorphism, x: &[f64], t: f64) -> Result<KernelEstimate, KernelError> {
    if x.len() != g.dim() {
        return Err(GroupError::DimensionMismatch { expected: g.dim(), got: x.len() }.into());
    }
    Ok(heat_kernel_g0(g, &ta.apply(x), t)?.scale(ta.jacobian_det))
}

/// Constants of `c_lo t^{-Q/2} e^{-c_l d^2/t} <= K <= c_hi t^{-Q/2} e^{-c_u d^2/t}` on a sample.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianBoundFit {
    pub c_t_upper: f64,
    pub c_u: f64,
    pub c_l: f64,
    pub c_t_lower: f64,
    #[serde(rename = "T")]
    pub t_horizon: f64,
    /// Max violation of the two bounds over the sample; `<= 0` when the sandwich holds.
    pub residual: f64,
    pub infeasible: bool,
    pub samples: usize,
}

/// One fitting sample: distance `d`, time `t`, kernel value.
#[derive(Debug, Clone, Copy)]
pub struct KernelSample {
    pub d: f64,
    pub t: f64,
    pub value: f64,
}

fn ternary(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

/// Fits both Gaussian bounds in log form `y = ln(K t^{Q/2})`, `s = d^2/t`.
///
/// The upper exponent minimizes the summed log-gap `n max_i (y_i + c s_i) - c sum s`
/// (convex in `c`), the lower one maximizes its mirror image.
pub fn fit_gaussian_sandwich(samples: &[KernelSample], q: f64, horizon: f64) -> GaussianBoundFit {
    let infeasible_fit = |n| GaussianBoundFit {
        c_t_upper: f64::NAN,
        c_u: f64::NAN,
        c_l: f64::NAN,
        c_t_lower: f64::NAN,
        t_horizon: horizon,
        residual: f64::INFINITY,
        infeasible: true,
        samples: n,
    };
    if samples.is_empty() || samples.iter().any(|s| !(s.value > 0.0) || !s.value.is_finite() || !(s.t > 0.0)) {
        return infeasible_fit(samples.len());
    }
    let s: Vec<f64> = samples.iter().map(|p| p.d * p.d / p.t).collect();
    let y: Vec<f64> = samples.iter().map(|p| (p.value * p.t.powf(q / 2.0)).ln()).collect();
    let n = s.len() as f64;
    let ssum: f64 = s.iter().sum();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let upper_at = |c: f64| s.iter().zip(&y).map(|(si, yi)| yi + c * si).fold(f64::NEG_INFINITY, f64::max);
    let lower_at = |c: f64| s.iter().zip(&y).map(|(si, yi)| yi + c * si).fold(f64::INFINITY, f64::min);
    let (c_u, c_l) = if smax > 0.0 {
        // exponents beyond the steepest pairwise slope cannot improve either objective
        let ys = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
        let smin_pos = s.iter().cloned().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
        let cmax = 1.0 + ys / smin_pos.max(1e-12 * smax);
        let cu = ternary(0.0, cmax, |c| n * upper_at(c) - c * ssum);
        let cl = ternary(0.0, cmax, |c| -(n * lower_at(c) - c * ssum));
        (cu, cl)
    } else {
        (0.0, 0.0)
    };
    let c_t_upper = upper_at(c_u).exp() * (1.0 + 1e-12);
    let c_t_lower = lower_at(c_l).exp() * (1.0 - 1e-12);
    let mut residual = f64::NEG_INFINITY;
    for p in samples {
        let pre = p.t.powf(-q / 2.0);
        let up = c_t_upper * pre * (-c_u * p.d * p.d / p.t).exp();
        let lo = c_t_lower * pre * (-c_l * p.d * p.d / p.t).exp();
        residual = residual.max((p.value - up) / p.value).max((lo - p.value) / p.value);
    }
    GaussianBoundFit { c_t_upper, c_u, c_l, c_t_lower, t_horizon: horizon, residual, infeasible: false, samples: samples.len() }
}

#[derive(Debug, Clone)]
pub struct FitSampleConfig {
    pub count: usize,
    pub t_min: f64,
    pub horizon: f64,
    /// Box half-width for `delta_{1/sqrt t} x`.
    pub radius: f64,
    pub distance: DistanceConfig,
}

impl Default for FitSampleConfig {
    fn default() -> Self {
        FitSampleConfig {
            count: 64,
            t_min: 0.1,
            horizon: 1.0,
            radius: 2.5,
            distance: DistanceConfig { restarts: 4, ..Default::default() },
        }
    }
}

/// Samples `kernel(x, t)` on Halton points `(delta_{sqrt t} u, t)` and computes `d_X(0, x)`.
pub fn sample_kernel(
    g: &CarnotGroup,
    cfg: &FitSampleConfig,
    mut kernel: impl FnMut(&[f64], f64) -> Result<f64, KernelError>,
) -> Result<Vec<KernelSample>, KernelError> {
    let n = g.dim();
    let origin = vec![0.0; n];
    let mut out = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let h = halton(i as u64 + 1, n + 1);
        let t = cfg.t_min + (cfg.horizon - cfg.t_min) * h[n];
        let u: Vec<f64> = (0..n).map(|j| cfg.radius.powi(g.sigma()[j] as i32) * (2.0 * h[j] - 1.0)).collect();
        let x = g.dilate(t.sqrt(), &u)?;
        let d = cc_distance(g, &origin, &x, &cfg.distance)?.value;
        out.push(KernelSample { d, t, value: kernel(&x, t)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_values() {
        let g = CarnotGroup::euclidean(1);
        let k = heat_kernel_g0(&g, &[0.0], 1.0).unwrap();
        assert!((k.value - 0.282_094_791_773_878_1).abs() < 1e-15);
        assert!(heat_kernel_g0(&g, &[0.0], 0.0).is_err());
        assert!(heat_kernel_g0(&CarnotGroup::free_step2(3), &[0.0; 6], 1.0).is_err());
    }

    #[test]
    fn automorphism_examples() {
        let h = CarnotGroup::heisenberg1();
        let id = automorphism_ta(&h, &DMatrix::identity(2, 2)).unwrap();
        assert!((id.matrix.clone() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-14);
        assert!((id.jacobian_det - 1.0).abs() < 1e-14);
        let mu = 2.5;
        let t = automorphism_ta(&h, &(DMatrix::identity(2, 2) * mu)).unwrap();
        assert!((t.matrix[(0, 0)] - mu.powf(-0.5)).abs() < 1e-14);
        assert!((t.matrix[(2, 2)] - 1.0 / mu).abs() < 1e-14);
        assert!((t.jacobian_det - mu.powi(-2)).abs() < 1e-14);
        let d = automorphism_ta(&h, &DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0]))).unwrap();
        assert!((d.matrix[(2, 2)] - 0.5).abs() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(automorphism_ta(&h, &bad), Err(KernelError::NotSpd)));
    }

    #[test]
    fn free_group_automorphism_is_homomorphism() {
        let g = CarnotGroup::free_step2(3);
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 0.8]);
        let t = automorphism_ta(&g, &a).unwrap();
        let x = [0.3, -0.2, 0.5, 0.1, -0.4, 0.7];
        let y = [-0.6, 0.4, 0.2, -0.3, 0.2, 0.1];
        let lhs = t.apply(&g.op(&x, &y));
        let rhs = g.op(&t.apply(&x), &t.apply(&y));
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn euclidean_frozen_is_time_rescaled() {
        let g = CarnotGroup::euclidean(2);
        let mu = 3.0;
        let a = DMatrix::identity(2, 2) * mu;
        let x = [0.4, -1.1];
        let f = frozen_kernel(&g, &a, &x, 0.7).unwrap().value;
        assert!((f - euclidean_heat(&x, mu * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn sandwich_on_exact_gaussian() {
        let samples: Vec<KernelSample> = (0..40)
            .map(|i| {
                let t = 0.1 + 0.02 * i as f64;
                let d = 0.1 * (i % 7) as f64;
                KernelSample { d, t, value: euclidean_heat(&[d], t) }
            })
            .collect();
        let fit = fit_gaussian_sandwich(&samples, 1.0, 1.0);
        assert!(!fit.infeasible);
        assert!((fit.c_u - 0.25).abs() < 1e-8 && (fit.c_l - 0.25).abs() < 1e-8, "{fit:?}");
        assert!((fit.c_t_upper - (4.0 * PI).powf(-0.5)).abs() < 1e-8);
        assert!(fit.residual <= 0.0);
    }

    #[test]
    fn sandwich_rejects_zero_kernel() {
        let s = vec![KernelSample { d: 0.1, t: 0.5, value: 0.0 }];
        assert!(fit_gaussian_sandwich(&s, 1.0, 1.0).infeasible);
    }
}
