//! Mean value formulas on super-level sets of the fundamental solution.
//!
//! Points are `zeta = (xi, tau)` and `z = (x, t)` with `t < tau`; kernels are read as
//! functions of `z` with `zeta` fixed, `Gamma(zeta; z)` being the fundamental
//! solution with pole `z` evaluated at `zeta`. `s = tau - t` throughout.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::group::{CarnotGroup, GroupKind};
use crate::kernels::oracle::{default_table, HeisenbergTable};
use crate::kernels::{automorphism_ta, heisenberg_from_table, Automorphism, KernelError, KernelEstimate};
use crate::operator::{Coefficients, Operator, ScalarField};
use crate::quadrature::GaussLegendre;
use crate::special::{incomplete_gamma_lower, unit_ball_volume};

/// How the `(4(tau - t))^{m/2}/2` factor of `W_r^(m)` is grouped.
pub const W_READING: &str = "(4(tau-t))^{m/2}/2";

#[derive(Debug, thiserror::Error)]
pub enum MeanValueError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("unsupported operator: {0}")]
    Unsupported(String),
    #[error("Gamma = {value:e} is below the floor {floor:e}")]
    BelowFloor { value: f64, floor: f64 },
    #[error("point lies outside the super-level set")]
    Outside,
    #[error("descent dimension must exceed 2, got {0}")]
    DescentDimension(usize),
    #[error("radius {r} too large: the super-level set is not bounded by the kernel bound (limit {limit})")]
    RadiusTooLarge { r: f64, limit: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Shape of the spatial factor in a Gaussian upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundShape {
    /// `g = |w|`.
    Euclidean,
    /// `g = (|w_h|^4 + 16 w_3^2)^{1/4}` on the Heisenberg group.
    KoranyiGauge,
}

/// `Gamma(zeta; z) <= c_t s^{-q/2} e^{growth s} exp(-c_u g(w)^2 / s)` with `w = x^{-1} o xi`.
#[derive(Debug, Clone, Serialize)]
pub struct UpperBound {
    pub c_t: f64,
    pub c_u: f64,
    pub q: f64,
    pub growth: f64,
    pub shape: BoundShape,
}

impl UpperBound {
    /// Coordinate half-widths of the box `{g(w) <= radius}`.
    pub fn half_widths(&self, g: &CarnotGroup, radius: f64) -> Vec<f64> {
        match self.shape {
            BoundShape::Euclidean => vec![radius; g.dim()],
            BoundShape::KoranyiGauge => g.sigma().iter().map(|&s| if s == 1 { radius } else { radius * radius / 4.0 }).collect(),
        }
    }
}

/// Fundamental solution of a constant-coefficient operator `sum a_ij X_i X_j + c - d_t`
/// on a Euclidean group or the first Heisenberg group.
#[derive(Debug, Clone)]
pub struct ConstantKernel {
    group: CarnotGroup,
    a: DMatrix<f64>,
    c: f64,
    form: KernelForm,
}

#[derive(Debug, Clone)]
enum KernelForm {
    Gaussian { p: DMatrix<f64>, pre: f64 },
    Heisenberg { ta: Automorphism, table: Arc<HeisenbergTable> },
}

impl ConstantKernel {
    pub fn new(op: &Operator) -> Result<Self, MeanValueError> {
        if !op.constant_principal() {
            return Err(MeanValueError::Unsupported("principal part must be constant".into()));
        }
        let zero = |f: &ScalarField| matches!(f, ScalarField::Const { value } if *value == 0.0);
        if !op.spec.b.iter().all(zero) {
            return Err(MeanValueError::Unsupported("drift must vanish".into()));
        }
        let c = op.constant_c().ok_or_else(|| MeanValueError::Unsupported("c must be constant".into()))?;
        let g = op.group().clone();
        let a = op.a(&vec![0.0; g.dim()], 0.0);
        let form = match g.kind() {
            GroupKind::Euclidean => {
                let chol = a.clone().cholesky().ok_or(KernelError::NotSpd)?;
                let det = chol.determinant();
                let pre = (4.0 * PI).powf(-(g.dim() as f64) / 2.0) / det.sqrt();
                KernelForm::Gaussian { p: chol.inverse(), pre }
            }
            GroupKind::FreeStep2 { generators: 2 } => {
                KernelForm::Heisenberg { ta: automorphism_ta(&g, &a)?, table: default_table().map_err(KernelError::from)? }
            }
            _ => return Err(KernelError::Unsupported(g.name().to_string()).into()),
        };
        Ok(ConstantKernel { group: g, a, c, form })
    }

    pub fn group(&self) -> &CarnotGroup {
        &self.group
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// `div_G b - c`, constant here.
    pub fn div_b_minus_c(&self) -> f64 {
        -self.c
    }

    /// `Gamma(zeta; z)`, zero for `t >= tau`.
    pub fn gamma(&self, xi: &[f64], tau: f64, x: &[f64], t: f64) -> KernelEstimate {
        let s = tau - t;
        if !(s > 0.0) {
            return KernelEstimate::exact(0.0);
        }
        let w = self.group.relative(x, xi);
        let growth = (self.c * s).exp();
        match &self.form {
            KernelForm::Gaussian { p, pre } => {
                let v = nalgebra::DVector::from_column_slice(&w);
                let q = v.dot(&(p * &v));
                KernelEstimate::exact(growth * pre * s.powf(-(w.len() as f64) / 2.0) * (-q / (4.0 * s)).exp())
            }
            KernelForm::Heisenberg { ta, table } => {
                heisenberg_from_table(table, &ta.apply(&w), s).scale(ta.jacobian_det * growth)
            }
        }
    }

    /// Closed-form `(X_1, ..., X_m1) Gamma(zeta; .)` at `z`, when available.
    pub fn grad_exact(&self, xi: &[f64], tau: f64, x: &[f64], t: f64) -> Option<Vec<f64>> {
        match &self.form {
            KernelForm::Gaussian { p, .. } => {
                let s = tau - t;
                let gam = self.gamma(xi, tau, x, t).value;
                let d = nalgebra::DVector::from_iterator(x.len(), xi.iter().zip(x).map(|(a, b)| a - b));
                let pd = p * d;
                Some(pd.iter().map(|v| v / (2.0 * s) * gam).collect())
            }
            KernelForm::Heisenberg { .. } => None,
        }
    }

    pub fn upper_bound(&self) -> UpperBound {
        let lmax = nalgebra::SymmetricEigen::new(self.a.clone()).eigenvalues.max();
        let growth = self.c.max(0.0);
        match &self.form {
            KernelForm::Gaussian { pre, .. } => {
                UpperBound { c_t: *pre, c_u: 1.0 / (4.0 * lmax), q: self.group.dim() as f64, growth, shape: BoundShape::Euclidean }
            }
            KernelForm::Heisenberg { ta, table } => {
                // gauge(T_A w)^2 >= gauge(w)^2 / lambda_max
                let (c0, c) = table.gauge_bound();
                UpperBound { c_t: c0 * ta.jacobian_det, c_u: c / lmax, q: 4.0, growth, shape: BoundShape::KoranyiGauge }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    /// Closed-form gradient when the kernel has one, finite differences otherwise.
    #[default]
    Auto,
    FiniteDifference,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradConfig {
    pub mode: GradMode,
    /// Smallest `Gamma` for which `M_G` is evaluated.
    pub floor: f64,
}

impl Default for GradConfig {
    fn default() -> Self {
        GradConfig { mode: GradMode::Auto, floor: 1e-12 }
    }
}

/// Horizontal gradient of `Gamma(zeta; .)` at `z`, by central differences along the
/// integral curves of `X_i` with `h = max(1e-5, 1e-3 sqrt(tau - t))` unless exact.
fn grad_gamma(k: &ConstantKernel, xi: &[f64], tau: f64, x: &[f64], t: f64, cfg: &GradConfig) -> Vec<f64> {
    if cfg.mode == GradMode::Auto {
        if let Some(g) = k.grad_exact(xi, tau, x, t) {
            return g;
        }
    }
    let h = (1e-3 * (tau - t).sqrt()).max(1e-5);
    let g = k.group();
    (0..g.m1())
        .map(|i| {
            let fp = k.gamma(xi, tau, &g.flow(i, x, h), t).value;
            let fm = k.gamma(xi, tau, &g.flow(i, x, -h), t).value;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn quadratic(a: &DMatrix<f64>, v: &[f64]) -> f64 {
    let mut q = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            q += a[(i, j)] * v[i] * v[j];
        }
    }
    q
}

/// `M_G(zeta, z) = <A(z) grad Gamma, grad Gamma> / Gamma^2`.
pub fn kernel_mg(k: &ConstantKernel, xi: &[f64], tau: f64, x: &[f64], t: f64, cfg: &GradConfig) -> Result<f64, MeanValueError> {
    let gam = k.gamma(xi, tau, x, t).value;
    if !(gam >= cfg.floor) {
        return Err(MeanValueError::BelowFloor { value: gam, floor: cfg.floor });
    }
    let grad = grad_gamma(k, xi, tau, x, t, cfg);
    Ok(quadratic(k.a(), &grad) / (gam * gam))
}

/// The descent kernels at one point of `Omega_r^(m)(zeta)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DescentKernelBundle {
    pub m: usize,
    pub omega_m: f64,
    pub gamma_m: f64,
    pub n_r: f64,
    pub m_r: f64,
    pub w_r: f64,
    pub m_g: f64,
}

/// `Gamma^(m) = Gamma / (4 pi s)^{m/2}`.
pub fn gamma_m(gamma: f64, s: f64, m: usize) -> f64 {
    gamma / (4.0 * PI * s).powf(m as f64 / 2.0)
}

/// Assembles the bundle from `Gamma`, `M_G` and `s`; `None` outside `Omega_r^(m)`.
pub fn descent_from_parts(gamma: f64, m_g: f64, s: f64, r: f64, m: usize) -> Option<DescentKernelBundle> {
    let gm = gamma_m(gamma, s, m);
    let l = (r * gm).ln();
    if !(l >= 0.0) {
        return None;
    }
    let omega_m = unit_ball_volume(m);
    let n = 2.0 * (s * l).sqrt();
    let nm = n.powi(m as i32);
    let mf = m as f64;
    let m_r = omega_m * nm * (m_g + mf / (mf + 2.0) * n * n / (4.0 * s * s));
    let gam = incomplete_gamma_lower(mf / 2.0, l).unwrap_or(0.0);
    let w_r = mf * omega_m * (nm / (r * mf) - gm * (4.0 * s).powf(mf / 2.0) / 2.0 * gam);
    Some(DescentKernelBundle { m, omega_m, gamma_m: gm, n_r: n, m_r, w_r, m_g })
}

/// `N_r`, `M_r^(m)`, `W_r^(m)` at `z`; refuses points outside `Omega_r^(m)(zeta)`.
#[allow(clippy::too_many_arguments)]
pub fn descent_kernels(
    k: &ConstantKernel,
    xi: &[f64],
    tau: f64,
    x: &[f64],
    t: f64,
    r: f64,
    m: usize,
    cfg: &GradConfig,
) -> Result<DescentKernelBundle, MeanValueError> {
    if m <= 2 {
        return Err(MeanValueError::DescentDimension(m));
    }
    let s = tau - t;
    if !(s > 0.0) {
        return Err(MeanValueError::Outside);
    }
    let gam = k.gamma(xi, tau, x, t).value;
    if !(r * gamma_m(gam, s, m) >= 1.0) {
        return Err(MeanValueError::Outside);
    }
    let m_g = kernel_mg(k, xi, tau, x, t, cfg)?;
    descent_from_parts(gam, m_g, s, r, m).ok_or(MeanValueError::Outside)
}

/// Explicit kernels of the heat operator `d_xx - d_t` on the line.
pub mod heat1d {
    use super::*;

    fn log_term(s: f64, r: f64, m: usize) -> f64 {
        (r / (4.0 * PI * s).powf((m as f64 + 1.0) / 2.0)).ln()
    }

    /// Pini–Watson kernel `(xi - x)^2 / (4 s^2)`.
    pub fn pini_watson(xi: f64, tau: f64, x: f64, t: f64) -> f64 {
        let s = tau - t;
        (xi - x) * (xi - x) / (4.0 * s * s)
    }

    /// `(xi - x)^2 < 4 s ln(r / (4 pi s)^{(m+1)/2})`.
    pub fn in_set(xi: f64, tau: f64, x: f64, t: f64, r: f64, m: usize) -> bool {
        let s = tau - t;
        s > 0.0 && (xi - x) * (xi - x) < 4.0 * s * log_term(s, r, m)
    }

    /// Closed-form bundle; `M_r^(m)` carries `+ (xi-x)^2/(2 m s)` in its second factor.
    pub fn descent(xi: f64, tau: f64, x: f64, t: f64, r: f64, m: usize) -> DescentKernelBundle {
        let s = tau - t;
        let d2 = (xi - x) * (xi - x);
        let l = log_term(s, r, m);
        let mf = m as f64;
        let omega_m = unit_ball_volume(m);
        let base = (s * l - d2 / 4.0).max(0.0);
        let m_r = 2f64.powi(m as i32) * mf * omega_m / ((mf + 2.0) * s) * base.powf(mf / 2.0) * (l + d2 / (2.0 * mf * s));
        let gm = (4.0 * PI * s).powf(-(mf + 1.0) / 2.0) * (-d2 / (4.0 * s)).exp();
        let n = 2.0 * base.sqrt();
        let arg = n * n / (4.0 * s);
        let gam = incomplete_gamma_lower(mf / 2.0, arg).unwrap_or(0.0);
        let w_r = mf * omega_m * (n.powi(m as i32) / (r * mf) - gm * (4.0 * s).powf(mf / 2.0) / 2.0 * gam);
        DescentKernelBundle { m, omega_m, gamma_m: gm, n_r: n, m_r, w_r, m_g: pini_watson(xi, tau, x, t) }
    }
}

/// Three-valued membership under kernel error bars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    In,
    Out,
    Uncertain,
}

/// `Omega_r^(m)(zeta) = {Gamma^(m)(zeta; z) > 1/r}` (`m = 0` gives `Omega_r`), with a
/// bounding box from the kernel's Gaussian upper bound.
#[derive(Debug, Clone, Serialize)]
pub struct SuperLevelSet {
    pub xi: Vec<f64>,
    pub tau: f64,
    pub r: f64,
    pub m: usize,
    pub bound: UpperBound,
    /// Largest `s = tau - t` reached by the set.
    pub s_max: f64,
    /// Largest spatial radius `g(w)` over all `s`.
    pub radius_max: f64,
    /// Half-widths of the box in coordinates of `w = x^{-1} o xi`.
    pub half_widths: Vec<f64>,
    log_k: f64,
    p: f64,
}

impl SuperLevelSet {
    /// `ln(r c_t (4 pi)^{-m/2}) - p ln s + growth s`, positive inside the bound's reach.
    fn level(&self, s: f64) -> f64 {
        self.log_k - self.p * s.ln() + self.bound.growth * s
    }

    /// Spatial radius bound at `s`, `None` past `s_max`.
    pub fn radius_at(&self, s: f64) -> Option<f64> {
        let h = self.level(s);
        (s > 0.0 && s < self.s_max && h > 0.0).then(|| (s * h / self.bound.c_u).sqrt())
    }

    /// Box half-widths at time lag `s`.
    pub fn half_widths_at(&self, g: &CarnotGroup, s: f64) -> Option<Vec<f64>> {
        self.radius_at(s).map(|rad| self.bound.half_widths(g, rad))
    }

    pub fn contains(&self, k: &ConstantKernel, x: &[f64], t: f64) -> Membership {
        let s = self.tau - t;
        if !(s > 0.0) || s > self.s_max {
            return Membership::Out;
        }
        let est = k.gamma(&self.xi, self.tau, x, t);
        let scale = (4.0 * PI * s).powf(self.m as f64 / 2.0);
        let lo = (est.value - est.error()) / scale;
        let hi = (est.value + est.error()) / scale;
        if lo * self.r > 1.0 {
            Membership::In
        } else if hi * self.r <= 1.0 {
            Membership::Out
        } else {
            Membership::Uncertain
        }
    }
}

pub fn superlevel_set(k: &ConstantKernel, xi: &[f64], tau: f64, r: f64, m: usize) -> Result<SuperLevelSet, MeanValueError> {
    if !(r > 0.0) {
        return Err(MeanValueError::Config("r must be positive".into()));
    }
    if xi.len() != k.group().dim() {
        return Err(KernelError::Group(crate::group::GroupError::DimensionMismatch { expected: k.group().dim(), got: xi.len() }).into());
    }
    let bound = k.upper_bound();
    let p = (bound.q + m as f64) / 2.0;
    let log_k = (r * bound.c_t).ln() - m as f64 / 2.0 * (4.0 * PI).ln();
    let g = bound.growth;
    let level = |s: f64| log_k - p * s.ln() + g * s;
    let s_max = if g == 0.0 {
        (log_k / p).exp()
    } else {
        // the bound decreases in s only up to p / growth
        let turn = p / g;
        if level(turn) >= 0.0 {
            let limit = (p * turn.ln() - g * turn + m as f64 / 2.0 * (4.0 * PI).ln()).exp() / bound.c_t;
            return Err(MeanValueError::RadiusTooLarge { r, limit });
        }
        let (mut lo, mut hi) = (0.0, turn);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if level(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    // radius^2 = s level(s) / c_u, maximized by golden-section search on (0, s_max)
    let f = |s: f64| s * level(s);
    let (mut a, mut b) = (0.0, s_max);
    for _ in 0..200 {
        let c1 = a + 0.382 * (b - a);
        let c2 = a + 0.618 * (b - a);
        if f(c1.max(1e-300)) < f(c2) {
            a = c1;
        } else {
            b = c2;
        }
    }
    let radius_max = (f(0.5 * (a + b)).max(0.0) / bound.c_u).sqrt() * (1.0 + 1e-9);
    let half_widths = bound.half_widths(k.group(), radius_max);
    Ok(SuperLevelSet { xi: xi.to_vec(), tau, r, m, bound, s_max, radius_max, half_widths, log_k, p })
}

/// Which mean value formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// Bounded descent kernels in dimension `m > 2`.
    Descent { m: usize },
    /// The unbounded kernel `M_G` on `Omega_r`.
    Unbounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanValueConfig {
    pub samples: usize,
    pub strata: usize,
    pub seed: u64,
    /// Gauss–Legendre nodes for the integrals over the level `rho`.
    pub rho_nodes: usize,
    /// Relative standard error above which the result is flagged.
    pub target_rel_sigma: f64,
    pub grad: GradConfig,
}

impl Default for MeanValueConfig {
    fn default() -> Self {
        MeanValueConfig { samples: 20_000, strata: 40, seed: 0, rho_nodes: 16, target_rel_sigma: 0.01, grad: GradConfig::default() }
    }
}

/// `rhs` of a mean value formula against `u(zeta)`.
#[derive(Debug, Clone, Serialize)]
pub struct MeanValueReport {
    pub formula: Formula,
    pub r: f64,
    pub u_zeta: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Monte Carlo standard error of `rhs`.
    pub sigma: f64,
    /// Solid term, source term, zero-order term.
    pub terms: [f64; 3],
    pub term_sigma: [f64; 3],
    /// Bound on the contribution of points with uncertain membership.
    pub uncertain_error: f64,
    pub samples: usize,
    pub hits: usize,
    pub uncertain: usize,
    /// Relative standard error above target.
    pub flagged: bool,
    pub w_reading: &'static str,
}

impl MeanValueReport {
    /// `residual <= 3 sigma` plus the uncertain-membership allowance.
    pub fn pass(&self) -> bool {
        self.residual <= 3.0 * self.sigma + self.uncertain_error
    }
}

type Field<'a> = &'a (dyn Fn(&[f64], f64) -> f64 + Sync);

/// Per-point integrands of the three terms, already divided by `r`.
#[allow(clippy::too_many_arguments)]
fn integrands(
    k: &ConstantKernel,
    set: &SuperLevelSet,
    formula: Formula,
    gl: &GaussLegendre,
    u: Field,
    f: Field,
    x: &[f64],
    t: f64,
    cfg: &GradConfig,
) -> Result<[f64; 3], MeanValueError> {
    let (xi, tau, r) = (&set.xi, set.tau, set.r);
    let s = tau - t;
    let gam = k.gamma(xi, tau, x, t).value;
    if !(gam >= cfg.floor) {
        return Ok([0.0; 3]);
    }
    let m_g = kernel_mg(k, xi, tau, x, t, cfg)?;
    let uz = u(x, t);
    let fz = f(x, t);
    let q = k.div_b_minus_c();
    match formula {
        Formula::Unbounded => {
            let rho0 = 1.0 / gam;
            if rho0 >= r {
                return Ok([0.0; 3]);
            }
            let lr = (r / rho0).ln();
            Ok([m_g * uz / r, fz * (lr - gam * (r - rho0)) / r, q * uz * lr / r])
        }
        Formula::Descent { m } => {
            let Some(b) = descent_from_parts(gam, m_g, s, r, m) else {
                return Ok([0.0; 3]);
            };
            // rho = rho0 exp(L u^2) on (rho0, r], so that N_rho = 2 sqrt(s L) u
            let l = (r * b.gamma_m).ln();
            let rho0 = 1.0 / b.gamma_m;
            let mf = m as f64;
            let (mut iw, mut in_) = (0.0, 0.0);
            for (v, w) in gl.on(0.0, 1.0) {
                let rho = rho0 * (l * v * v).exp();
                let jac = rho * 2.0 * l * v;
                let n = 2.0 * (s * l).sqrt() * v;
                let nm = n.powi(m as i32);
                let gam_inc = incomplete_gamma_lower(mf / 2.0, l * v * v).unwrap_or(0.0);
                let w_rho = mf * b.omega_m * (nm / (rho * mf) - b.gamma_m * (4.0 * s).powf(mf / 2.0) / 2.0 * gam_inc);
                iw += w * jac * w_rho;
                in_ += w * jac * b.omega_m * nm / rho;
            }
            Ok([b.m_r * uz / r, fz * iw / r, q * uz * in_ / r])
        }
    }
}

/// Solutions of `H u = f` used to exercise the formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnownSolution {
    /// `u = 1`, `f = c`.
    Const,
    /// `e^{ct} p` with `p` a caloric polynomial of `sum a_ij X_i X_j - d_t`.
    CaloricPoly,
    /// `Gamma(.; pole)` with the pole below the super-level set.
    HeatKernel,
}

impl std::str::FromStr for KnownSolution {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "const" => Ok(KnownSolution::Const),
            "caloric-poly" => Ok(KnownSolution::CaloricPoly),
            "heat-kernel" => Ok(KnownSolution::HeatKernel),
            _ => Err(format!("solution must be const, caloric-poly or heat-kernel, got '{s}'")),
        }
    }
}

pub type BoxedField<'a> = Box<dyn Fn(&[f64], f64) -> f64 + Sync + 'a>;

/// `(u, f)` for `which`. The heat-kernel pole is shifted by 0.3 along `x1` and sits half a
/// time unit below `Omega_r^(m)(zeta)`.
pub fn known_solution<'a>(
    k: &'a ConstantKernel,
    which: KnownSolution,
    xi: &[f64],
    tau: f64,
    r: f64,
    m: usize,
) -> Result<(BoxedField<'a>, BoxedField<'a>), MeanValueError> {
    let c = k.c;
    let zero: BoxedField = Box::new(|_: &[f64], _: f64| 0.0);
    Ok(match which {
        KnownSolution::Const => (Box::new(|_: &[f64], _: f64| 1.0), Box::new(move |_: &[f64], _: f64| c)),
        KnownSolution::CaloricPoly => {
            let a = &k.a;
            let n = k.group.dim();
            let heis = k.group.kind() == (GroupKind::FreeStep2 { generators: 2 });
            // L x1^2 = 2 a11, L (x1 x2) = a12 + a21, L x3 = 0 on the Heisenberg group
            let (mixed, rate) = if a.nrows() > 1 { (1.0, 2.0 * a[(0, 0)] + a[(0, 1)] + a[(1, 0)]) } else { (0.0, 2.0 * a[(0, 0)]) };
            let u = move |x: &[f64], t: f64| {
                let mut p = x[0] * x[0] + rate * t;
                if n > 1 {
                    p += mixed * x[0] * x[1];
                }
                if heis {
                    p += x[2];
                }
                (c * t).exp() * p
            };
            (Box::new(u), zero)
        }
        KnownSolution::HeatKernel => {
            let set = superlevel_set(k, xi, tau, r, m)?;
            let mut px = xi.to_vec();
            px[0] += 0.3;
            let pt = tau - set.s_max - 0.5;
            (Box::new(move |x: &[f64], t: f64| k.gamma(x, t, &px, pt).value), zero)
        }
    })
}

/// Evaluates a mean value formula for a solution `u` of `H u = f` by stratified Monte Carlo
/// over the bounding box of `Omega_r^(m)(zeta)`.
///
/// Time lags are drawn as `s = s_max v^2` with `v` stratified; space points uniformly in the
/// box at that lag. Uncertain-membership points count with half weight.
#[allow(clippy::too_many_arguments)]
pub fn mean_value_evaluate(
    k: &ConstantKernel,
    u: Field,
    f: Field,
    xi: &[f64],
    tau: f64,
    r: f64,
    formula: Formula,
    cfg: &MeanValueConfig,
) -> Result<MeanValueReport, MeanValueError> {
    let m = match formula {
        Formula::Descent { m } if m <= 2 => return Err(MeanValueError::DescentDimension(m)),
        Formula::Descent { m } => m,
        Formula::Unbounded => 0,
    };
    if cfg.strata == 0 || cfg.samples < 2 * cfg.strata {
        return Err(MeanValueError::Config("need at least two samples per stratum".into()));
    }
    let set = superlevel_set(k, xi, tau, r, m)?;
    let g = k.group();
    let gl = GaussLegendre::new(cfg.rho_nodes);
    let per = cfg.samples / cfg.strata;
    let mut sums = [0.0; 3];
    let mut vars = [0.0; 3];
    let mut total_var = 0.0;
    let mut hits = 0;
    let mut uncertain = 0;
    let mut uncertain_error = 0.0;
    let inv = 1.0 / cfg.strata as f64;
    for h in 0..cfg.strata {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(h as u64));
        let mut acc = [0.0; 3];
        let mut acc2 = [0.0; 3];
        let mut tot2 = 0.0;
        for _ in 0..per {
            let v = (h as f64 + rng.gen::<f64>()) * inv;
            let s = set.s_max * v * v;
            let Some(hw) = set.half_widths_at(g, s) else {
                continue;
            };
            let w: Vec<f64> = hw.iter().map(|&a| a * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            let x = g.op(xi, &w);
            let t = tau - s;
            let weight = match set.contains(k, &x, t) {
                Membership::Out => continue,
                Membership::In => 1.0,
                Membership::Uncertain => {
                    uncertain += 1;
                    0.5
                }
            };
            hits += 1;
            let vol: f64 = hw.iter().map(|a| 2.0 * a).product::<f64>() * 2.0 * set.s_max * v;
            let y = integrands(k, &set, formula, &gl, u, f, &x, t, &cfg.grad)?;
            let mut sum_y = 0.0;
            for j in 0..3 {
                let yj = weight * vol * y[j];
                acc[j] += yj;
                acc2[j] += yj * yj;
                sum_y += yj;
            }
            tot2 += sum_y * sum_y;
            if weight < 1.0 {
                uncertain_error += (sum_y * inv / per as f64).abs();
            }
        }
        let n = per as f64;
        let mut tot = 0.0;
        for j in 0..3 {
            let mean = acc[j] / n;
            sums[j] += inv * mean;
            vars[j] += inv * inv * (acc2[j] / n - mean * mean).max(0.0) / (n - 1.0);
            tot += mean;
        }
        total_var += inv * inv * (tot2 / n - tot * tot).max(0.0) / (n - 1.0);
    }
    let rhs = sums.iter().sum::<f64>();
    let sigma = total_var.sqrt();
    let u_zeta = u(xi, tau);
    Ok(MeanValueReport {
        formula,
        r,
        u_zeta,
        rhs,
        residual: (rhs - u_zeta).abs(),
        sigma,
        terms: sums,
        term_sigma: [vars[0].sqrt(), vars[1].sqrt(), vars[2].sqrt()],
        uncertain_error,
        samples: per * cfg.strata,
        hits,
        uncertain,
        flagged: sigma > cfg.target_rel_sigma * rhs.abs().max(1e-300),
        w_reading: W_READING,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heat1() -> ConstantKernel {
        ConstantKernel::new(&Operator::heat("euclidean1", 0.0).unwrap()).unwrap()
    }

    #[test]
    fn pini_watson_from_generic_path() {
        let k = heat1();
        let cfg = GradConfig::default();
        let v = kernel_mg(&k, &[0.3], 1.0, &[0.1], 0.8, &cfg).unwrap();
        assert!((v - heat1d::pini_watson(0.3, 1.0, 0.1, 0.8)).abs() < 1e-12);
        assert!(kernel_mg(&k, &[0.3], 1.0, &[0.3], 0.8, &cfg).unwrap().abs() < 1e-15);
        let fd = kernel_mg(&k, &[0.3], 1.0, &[0.1], 0.8, &GradConfig { mode: GradMode::FiniteDifference, ..cfg }).unwrap();
        assert!((fd - v).abs() < 1e-6 * v);
    }

    #[test]
    fn boundary_point_has_zero_kernels() {
        let k = heat1();
        let (r, m, s) = (0.5, 4, 0.01);
        // pick x on {Gamma^(m) = 1/r}
        let l = (r / (4.0 * PI * s).powf(2.5)).ln();
        let x = (4.0 * s * l).sqrt();
        let b = descent_kernels(&k, &[0.0], 0.0, &[x], -s, r * (1.0 + 1e-12), m, &GradConfig::default()).unwrap();
        assert!(b.n_r < 1e-5 && b.m_r < 1e-12 && b.w_r.abs() < 1e-12);
        assert!(matches!(
            descent_kernels(&k, &[0.0], 0.0, &[x * 1.01], -s, r, m, &GradConfig::default()),
            Err(MeanValueError::Outside)
        ));
        assert!(matches!(descent_kernels(&k, &[0.0], 0.0, &[0.0], -s, r, 2, &GradConfig::default()), Err(MeanValueError::DescentDimension(2))));
    }

    #[test]
    fn closed_form_matches_generic() {
        let k = heat1();
        let cfg = GradConfig::default();
        let (r, m) = (0.5, 4);
        let set = superlevel_set(&k, &[0.0], 0.0, r, m).unwrap();
        let mut n = 0;
        for i in 1..40 {
            let s = set.s_max * i as f64 / 40.0;
            let x = 0.3 * set.radius_at(s).unwrap();
            let gen = descent_kernels(&k, &[0.0], 0.0, &[x], -s, r, m, &cfg).unwrap();
            let cf = heat1d::descent(0.0, 0.0, x, -s, r, m);
            for (a, b) in [(gen.m_r, cf.m_r), (gen.w_r, cf.w_r), (gen.n_r, cf.n_r), (gen.gamma_m, cf.gamma_m)] {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300), "{a} {b}");
            }
            assert!(heat1d::in_set(0.0, 0.0, x, -s, r, m));
            n += 1;
        }
        assert!(n > 30);
    }

    #[test]
    fn box_is_tight_for_heat() {
        let k = heat1();
        let set = superlevel_set(&k, &[0.0], 0.0, 0.5, 4).unwrap();
        for i in 1..50 {
            let s = set.s_max * i as f64 / 50.0;
            let rad = set.radius_at(s).unwrap();
            assert!(heat1d::in_set(0.0, 0.0, rad * 0.999, -s, 0.5, 4));
            assert!(!heat1d::in_set(0.0, 0.0, rad * 1.001, -s, 0.5, 4));
        }
        let tiny = superlevel_set(&k, &[0.0], 0.0, 1e-12, 4).unwrap();
        assert!(tiny.s_max < 1e-3 && tiny.radius_max < 1e-1);
    }

    #[test]
    fn growth_limits_radius() {
        let k = ConstantKernel::new(&Operator::heat("euclidean1", 1.0).unwrap()).unwrap();
        assert!(superlevel_set(&k, &[0.0], 0.0, 0.5, 4).is_ok());
        assert!(matches!(superlevel_set(&k, &[0.0], 0.0, 1e6, 4), Err(MeanValueError::RadiusTooLarge { .. })));
    }

    #[test]
    fn volume_identity_heat1d() {
        let k = heat1();
        let cfg = MeanValueConfig { samples: 8000, ..Default::default() };
        let one = |_: &[f64], _: f64| 1.0;
        let zero = |_: &[f64], _: f64| 0.0;
        let rep = mean_value_evaluate(&k, &one, &zero, &[0.2], 1.0, 0.5, Formula::Descent { m: 4 }, &cfg).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert!(rep.sigma < 0.02);
    }

    #[test]
    fn source_term_carries_sign_of_f() {
        // u = t solves u_xx - u_t = -1
        let k = heat1();
        let cfg = MeanValueConfig { samples: 8000, ..Default::default() };
        let u = |_: &[f64], t: f64| t;
        let f = |_: &[f64], _: f64| -1.0;
        for formula in [Formula::Descent { m: 4 }, Formula::Unbounded] {
            let rep = mean_value_evaluate(&k, &u, &f, &[0.0], 0.5, 0.5, formula, &cfg).unwrap();
            assert!(rep.terms[1] > 0.0 && rep.pass(), "{rep:?}");
        }
    }

    fn heis() -> ConstantKernel {
        ConstantKernel::new(&Operator::heat("heisenberg1", 0.0).unwrap()).unwrap()
    }

    #[test]
    fn heisenberg_gradient_step_halving() {
        let k = heis();
        let (xi, tau, x, t) = ([0.2, -0.1, 0.3], 1.0, [0.0, 0.1, 0.05], 0.5);
        let g = k.group();
        let h = (1e-3 * 0.5f64.sqrt()).max(1e-5);
        let base = kernel_mg(&k, &xi, tau, &x, t, &GradConfig::default()).unwrap();
        let gam = k.gamma(&xi, tau, &x, t).value;
        let halved: Vec<f64> = (0..2)
            .map(|i| (k.gamma(&xi, tau, &g.flow(i, &x, h / 2.0), t).value - k.gamma(&xi, tau, &g.flow(i, &x, -h / 2.0), t).value) / h)
            .collect();
        let mg2 = (halved[0] * halved[0] + halved[1] * halved[1]) / (gam * gam);
        assert!(base > 0.0 && base.is_finite());
        assert!((base - mg2).abs() < 1e-4 * base.max(1.0), "{base} {mg2}");
    }

    #[test]
    fn heisenberg_box_contains_set() {
        let k = heis();
        let xi = [0.1, 0.1, 0.1];
        let set = superlevel_set(&k, &xi, 1.0, 0.5, 4).unwrap();
        let g = k.group();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut members = 0;
        for _ in 0..10_000 {
            // sample a box three times wider than the bound to catch escapes
            let s = 3.0 * set.s_max * rng.gen::<f64>();
            let w: Vec<f64> = set.half_widths.iter().map(|a| 3.0 * a * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            let x = g.op(&xi, &w);
            let gam = k.gamma(&xi, 1.0, &x, 1.0 - s).value;
            if gamma_m(gam, s, 4) * 0.5 > 1.0 {
                members += 1;
                assert!(s < set.s_max);
                let hw = set.half_widths_at(g, s).unwrap();
                assert!(w.iter().zip(&hw).all(|(a, b)| a.abs() <= *b), "{w:?} {hw:?} {s}");
            }
        }
        assert!(members > 10);
    }

    #[test]
    fn kernels_positive_and_sets_monotone() {
        let k = heis();
        let xi = [0.0, 0.0, 0.0];
        let cfg = GradConfig::default();
        let small = superlevel_set(&k, &xi, 0.1, 0.2, 4).unwrap();
        let big = superlevel_set(&k, &xi, 0.1, 0.5, 4).unwrap();
        assert!(small.s_max < big.s_max && small.radius_max < big.radius_max);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = 0;
        for _ in 0..2000 {
            let s = small.s_max * rng.gen::<f64>();
            let w: Vec<f64> = small.half_widths.iter().map(|a| a * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            let t = 0.1 - s;
            if small.contains(&k, &w, t) == Membership::In {
                seen += 1;
                assert_ne!(big.contains(&k, &w, t), Membership::Out);
                let b = descent_kernels(&k, &xi, 0.1, &w, t, 0.2, 4, &cfg).unwrap();
                assert!(b.n_r >= 0.0 && b.m_r >= 0.0, "{b:?}");
                // the level integrand of 1/rho - Gamma over {Gamma > 1/rho} is never positive
                assert!(b.w_r <= 0.0, "{b:?}");
            }
        }
        assert!(seen > 50);
    }
}
