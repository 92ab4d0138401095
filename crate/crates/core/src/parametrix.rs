//! Levi's parametrix construction of the fundamental solution.
//!
//! `Z(z, zeta)` is the kernel of the operator with principal part frozen at the
//! pole, `(HZ)_1 = H Z`, `(HZ)_{k+1} = (HZ) * (HZ)_k` and
//! `Gamma = Z + sum_k Z * (HZ)_k`, where `*` is space-time convolution over
//! `(tau, t) x G`. Convolutions use nested Gauss–Legendre rules: in time, split at
//! the midpoint with `s - tau ~ u^{2/alpha}` toward each end; in space, a
//! tensor rule on a window of `window` standard deviations around the centre of
//! the product of the two Gaussian cores.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::group::{CarnotGroup, GroupKind};
use crate::kernels::{automorphism_ta, frozen_kernel_with, KernelError, KernelEstimate};
use crate::operator::{Coefficients, OperatorError};
use crate::quadrature::{GaussHermite, GaussLegendre};

/// Largest ambient dimension for which the nested quadrature is attempted.
pub const MAX_DIM: usize = 3;

/// Refuse configurations whose nested quadrature visits more nodes than this.
pub const MAX_NODE_VISITS: f64 = 2e8;

/// Largest per-axis node count.
pub const MAX_NODES: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParametrixConfig {
    /// Number of series terms `K`.
    pub order: usize,
    /// Gauss–Legendre nodes per time half and per space axis at the outermost convolution.
    pub time_nodes: usize,
    pub space_nodes: usize,
    /// Nodes for nested convolutions.
    pub inner_time_nodes: usize,
    pub inner_space_nodes: usize,
    /// Half-width of the spatial window in standard deviations.
    pub window: f64,
    /// Largest admissible `t - tau`.
    pub horizon: f64,
    /// Finite-difference step for Lie derivatives of tabulated kernels, relative to `sqrt(t - tau)`.
    pub fd_ratio: f64,
    /// Re-evaluate with halved node counts to estimate the quadrature error.
    pub error_estimate: bool,
}

impl Default for ParametrixConfig {
    fn default() -> Self {
        ParametrixConfig {
            order: 3,
            time_nodes: 6,
            space_nodes: 16,
            inner_time_nodes: 3,
            inner_space_nodes: 8,
            window: 6.0,
            horizon: 1.0,
            fd_ratio: 0.02,
            error_estimate: true,
        }
    }
}

impl ParametrixConfig {
    fn check(&self) -> Result<(), ParametrixError> {
        if self.order == 0 || self.order > MAX_ORDER {
            return Err(ParametrixError::Config(format!("order must lie in 1..={MAX_ORDER}")));
        }
        if self.space_nodes < 3 || self.inner_space_nodes < 3 || self.time_nodes < 2 || self.inner_time_nodes < 2 {
            return Err(ParametrixError::Config("need >= 3 space and >= 2 time nodes per half".into()));
        }
        if self.space_nodes > MAX_NODES || self.inner_space_nodes > MAX_NODES {
            return Err(ParametrixError::Config(format!("at most {MAX_NODES} space nodes per axis")));
        }
        if !(self.window > 0.0) || !(self.horizon > 0.0) || !(self.fd_ratio > 0.0) {
            return Err(ParametrixError::Config("window, horizon and fd_ratio must be positive".into()));
        }
        Ok(())
    }

    fn halved(&self) -> Self {
        ParametrixConfig {
            time_nodes: (self.time_nodes / 2).max(2),
            space_nodes: (self.space_nodes / 2).max(3),
            inner_time_nodes: (self.inner_time_nodes / 2).max(2),
            inner_space_nodes: (self.inner_space_nodes / 2).max(3),
            error_estimate: false,
            ..self.clone()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParametrixError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("nested quadrature is limited to N <= {MAX_DIM}, got N = {0}")]
    DimensionTooLarge(usize),
    #[error("t - tau = {0} exceeds the horizon {1}")]
    Horizon(f64, f64),
    #[error("invalid parametrix config: {0}")]
    Config(String),
    #[error("growth constants too large for the horizon: gate {gate} <= {horizon}")]
    GrowthGate { gate: f64, horizon: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct LeviResidual {
    pub value: f64,
    /// Finite-difference step used for the Lie derivatives (0 on the analytic path).
    pub fd_step: f64,
    /// Set when the difference step underflows relative to the distance to the pole.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesEval {
    pub value: f64,
    /// `(HZ)_k(z, zeta)` for `k = 1..K`.
    pub terms: Vec<f64>,
    pub tail_bound: f64,
    pub diverging: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FundamentalSolutionEval {
    pub z_value: f64,
    pub j_value: f64,
    pub total: f64,
    /// Contributions `Z * (HZ)_k` of the individual series terms.
    pub j_terms: Vec<f64>,
    pub quad_error: f64,
    pub tail_bound: f64,
    pub diverging: bool,
}

impl FundamentalSolutionEval {
    fn zero() -> Self {
        FundamentalSolutionEval {
            z_value: 0.0,
            j_value: 0.0,
            total: 0.0,
            j_terms: Vec::new(),
            quad_error: 0.0,
            tail_bound: 0.0,
            diverging: false,
        }
    }

    pub fn error_budget(&self) -> f64 {
        self.quad_error + self.tail_bound
    }
}

/// Frozen-kernel evaluator with Lie derivatives up to order two.
struct Frozen<'a, C: Coefficients + ?Sized> {
    op: &'a C,
    euclidean: bool,
    fd_ratio: f64,
}

/// `Z` and its horizontal derivatives at one point.
struct ZJet {
    z: f64,
    d1: [f64; MAX_DIM],
    d2: [[f64; MAX_DIM]; MAX_DIM],
}

impl<'a, C: Coefficients + ?Sized> Frozen<'a, C> {
    fn new(op: &'a C, cfg: &ParametrixConfig) -> Result<Self, ParametrixError> {
        let g = op.group();
        if g.dim() > MAX_DIM {
            return Err(ParametrixError::DimensionTooLarge(g.dim()));
        }
        match g.kind() {
            GroupKind::Euclidean | GroupKind::FreeStep2 { .. } => {}
            GroupKind::Custom => return Err(KernelError::Unsupported(g.name().to_string()).into()),
        }
        Ok(Frozen { op, euclidean: g.kind() == GroupKind::Euclidean, fd_ratio: cfg.fd_ratio })
    }

    fn g(&self) -> &CarnotGroup {
        self.op.group()
    }

    /// `Z(x, t; xi, tau)`, zero for `t <= tau`.
    fn value(&self, x: &[f64], t: f64, xi: &[f64], tau: f64) -> Result<KernelEstimate, ParametrixError> {
        let dt = t - tau;
        if dt <= 0.0 {
            return Ok(KernelEstimate::exact(0.0));
        }
        let g = self.g();
        if self.euclidean {
            let mut a = [[0.0; 3]; 3];
            self.op.a_small(xi, tau, &mut a);
            let (p, det) = inverse_small(&a, g.m1())?;
            let mut w = [0.0; MAX_DIM];
            for j in 0..g.dim() {
                w[j] = x[j] - xi[j];
            }
            return Ok(KernelEstimate::exact(gauss(&p, det, &w[..g.dim()], dt)));
        }
        let ta = automorphism_ta(g, &self.op.a(xi, tau))?;
        Ok(frozen_kernel_with(g, &ta, &g.relative(xi, x), dt)?)
    }

    /// Value, gradient and Hessian of `Z(., t; xi, tau)` along the generators, given
    /// the principal coefficients `a` at the pole.
    fn jet(&self, x: &[f64], t: f64, xi: &[f64], tau: f64, a: &M3) -> Result<(ZJet, f64), ParametrixError> {
        let g = self.g();
        let m = g.m1();
        let n = g.dim();
        let dt = t - tau;
        let mut jet = ZJet { z: 0.0, d1: [0.0; MAX_DIM], d2: [[0.0; MAX_DIM]; MAX_DIM] };
        if self.euclidean {
            let (p, det) = inverse_small(a, m)?;
            let mut w = [0.0; MAX_DIM];
            for j in 0..n {
                w[j] = x[j] - xi[j];
            }
            let z = gauss(&p, det, &w[..n], dt);
            let mut py = [0.0; MAX_DIM];
            for i in 0..m {
                py[i] = (0..m).map(|j| p[i][j] * w[j]).sum();
            }
            jet.z = z;
            for i in 0..m {
                jet.d1[i] = -py[i] / (2.0 * dt) * z;
                for j in 0..m {
                    jet.d2[i][j] = (py[i] * py[j] / (4.0 * dt * dt) - p[i][j] / (2.0 * dt)) * z;
                }
            }
            return Ok((jet, 0.0));
        }
        let am = DMatrix::from_fn(m, m, |i, j| a[i][j]);
        let ta = automorphism_ta(g, &am)?;
        let w = g.relative(xi, x);
        let f = |v: &[f64]| -> Result<f64, ParametrixError> { Ok(frozen_kernel_with(g, &ta, v, dt)?.value) };
        let h = self.fd_ratio * dt.sqrt();
        let f0 = f(&w)?;
        jet.z = f0;
        let second_along = |e: &[f64]| -> Result<(f64, f64), ParametrixError> {
            let hp: Vec<f64> = e.iter().map(|v| v * h).collect();
            let hm: Vec<f64> = e.iter().map(|v| -v * h).collect();
            let fp = f(&g.flow_horizontal(&w, &hp))?;
            let fm = f(&g.flow_horizontal(&w, &hm))?;
            Ok(((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)))
        };
        let mut e = vec![0.0; m];
        for i in 0..m {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[i] = 1.0;
            let (d1, d2) = second_along(&e)?;
            jet.d1[i] = d1;
            jet.d2[i][i] = d2;
        }
        for i in 0..m {
            for j in i + 1..m {
                e.iter_mut().for_each(|v| *v = 0.0);
                e[i] = 1.0;
                e[j] = 1.0;
                let (_, d2) = second_along(&e)?;
                // (X_i + X_j)^2 = X_i^2 + X_j^2 + X_i X_j + X_j X_i
                let sym = 0.5 * (d2 - jet.d2[i][i] - jet.d2[j][j]);
                jet.d2[i][j] = sym;
                jet.d2[j][i] = sym;
            }
        }
        Ok((jet, h))
    }
}

type M3 = [[f64; 3]; 3];

/// Inverse and determinant of an SPD matrix of size `m <= 3`.
fn inverse_small(a: &M3, m: usize) -> Result<(M3, f64), KernelError> {
    let mut p = [[0.0; 3]; 3];
    let det = match m {
        1 => {
            p[0][0] = 1.0 / a[0][0];
            a[0][0]
        }
        2 => {
            let d = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            p[0][0] = a[1][1] / d;
            p[1][1] = a[0][0] / d;
            p[0][1] = -a[0][1] / d;
            p[1][0] = -a[1][0] / d;
            if !(a[0][0] > 0.0) {
                return Err(KernelError::NotSpd);
            }
            d
        }
        3 => {
            let c00 = a[1][1] * a[2][2] - a[1][2] * a[2][1];
            let c01 = a[1][2] * a[2][0] - a[1][0] * a[2][2];
            let c02 = a[1][0] * a[2][1] - a[1][1] * a[2][0];
            let d = a[0][0] * c00 + a[0][1] * c01 + a[0][2] * c02;
            if !(a[0][0] > 0.0 && a[0][0] * a[1][1] - a[0][1] * a[1][0] > 0.0) {
                return Err(KernelError::NotSpd);
            }
            p[0][0] = c00 / d;
            p[1][0] = c01 / d;
            p[2][0] = c02 / d;
            p[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / d;
            p[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / d;
            p[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / d;
            p[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / d;
            p[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / d;
            p[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / d;
            d
        }
        _ => return Err(KernelError::NotSpd),
    };
    if !(det > 0.0) {
        return Err(KernelError::NotSpd);
    }
    Ok((p, det))
}

/// `(4 pi s)^{-N/2} det(A)^{-1/2} exp(-y^T A^{-1} y / 4s)`.
fn gauss(p: &M3, det: f64, y: &[f64], s: f64) -> f64 {
    let n = y.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += y[i] * p[i][j] * y[j];
        }
    }
    let pre = match n {
        1 => (4.0 * std::f64::consts::PI * s).sqrt().recip(),
        2 => (4.0 * std::f64::consts::PI * s).recip(),
        _ => (4.0 * std::f64::consts::PI * s).powf(-(n as f64) / 2.0),
    };
    pre / det.sqrt() * (-q / (4.0 * s)).exp()
}

/// Coefficients at the outer point, reused across inner nodes.
struct Outer {
    a: M3,
    drift: [f64; 3],
    c: f64,
}

impl Outer {
    fn new<C: Coefficients + ?Sized>(op: &C, x: &[f64], t: f64) -> Self {
        let mut a = [[0.0; 3]; 3];
        op.a_small(x, t, &mut a);
        let mut drift = [0.0; 3];
        if !op.no_lower_order() {
            for (d, v) in drift.iter_mut().zip(op.drift(x, t)) {
                *d = v;
            }
        }
        Outer { a, drift, c: op.c(x, t) }
    }
}

/// Nodes of one convolution level.
#[derive(Clone)]
struct LevelRule {
    time: GaussLegendre,
    space: GaussLegendre,
    hermite: GaussHermite,
}

impl LevelRule {
    fn new(time: usize, space: usize) -> Self {
        LevelRule { time: GaussLegendre::new(time), space: GaussLegendre::new(space), hermite: GaussHermite::new(space) }
    }
}

/// Longest series handled (terms are kept in fixed buffers).
pub const MAX_ORDER: usize = 8;
type Terms = [f64; MAX_ORDER];

struct Machine<'a, C: Coefficients + ?Sized> {
    frozen: Frozen<'a, C>,
    rules: Vec<LevelRule>,
    window: f64,
}

impl<'a, C: Coefficients + ?Sized> Machine<'a, C> {
    fn new(op: &'a C, cfg: &ParametrixConfig) -> Result<Self, ParametrixError> {
        cfg.check()?;
        let frozen = Frozen::new(op, cfg)?;
        let n = op.group().dim() as i32;
        let top = 2.0 * cfg.time_nodes as f64 * (cfg.space_nodes as f64).powi(n);
        let inner = 2.0 * cfg.inner_time_nodes as f64 * (cfg.inner_space_nodes as f64).powi(n);
        let cost = top * inner.powi(cfg.order as i32 - 1);
        if cost > MAX_NODE_VISITS {
            return Err(ParametrixError::Config(format!(
                "nested quadrature needs ~{cost:.1e} kernel evaluations (limit {MAX_NODE_VISITS:.0e}); lower order or node counts"
            )));
        }
        let top = LevelRule::new(cfg.time_nodes, cfg.space_nodes);
        let inner = LevelRule::new(cfg.inner_time_nodes, cfg.inner_space_nodes);
        let mut rules = vec![top];
        rules.extend(std::iter::repeat(inner).take(cfg.order));
        Ok(Machine { frozen, rules, window: cfg.window })
    }

    fn op(&self) -> &C {
        self.frozen.op
    }

    /// `H Z(., (xi, tau))` at `(x, t)`, with the finite-difference step used.
    fn hz(&self, outer: &Outer, x: &[f64], t: f64, xi: &[f64], tau: f64) -> Result<(f64, f64), ParametrixError> {
        if t <= tau {
            return Ok((0.0, 0.0));
        }
        let m = self.frozen.g().m1();
        let mut a_pole = [[0.0; 3]; 3];
        self.op().a_small(xi, tau, &mut a_pole);
        let (jet, h) = self.frozen.jet(x, t, xi, tau, &a_pole)?;
        let mut v = outer.c * jet.z;
        for i in 0..m {
            v += outer.drift[i] * jet.d1[i];
            for j in 0..m {
                let d = outer.a[i][j] - a_pole[i][j];
                if d != 0.0 {
                    v += d * jet.d2[i][j];
                }
            }
        }
        Ok((v, h))
    }

    /// Visits quadrature nodes `(y, s, weight)` for `int_tau^t int_G F(y, s) dy ds`.
    fn for_nodes(
        &self,
        level: usize,
        x: &[f64],
        t: f64,
        xi: &[f64],
        tau: f64,
        mut visit: impl FnMut(&[f64], f64, f64) -> Result<(), ParametrixError>,
    ) -> Result<(), ParametrixError> {
        let g = self.frozen.g();
        let n = g.dim();
        let rule = &self.rules[level.min(self.rules.len() - 1)];
        let alpha = self.op().alpha();
        let lambda = self.op().lambda();
        let p = g.relative(xi, x);
        let ph = p[..g.m1()].iter().map(|v| v * v).sum::<f64>().sqrt();
        let total = t - tau;
        let len = 0.5 * total;
        let e = 2.0 / alpha;
        let k = rule.space.nodes.len();
        let mut w = [0.0; MAX_DIM];
        for half in 0..2 {
            for (u, wu) in rule.time.on(0.0, 1.0) {
                let ds = len * e * u.powf(e - 1.0);
                let s = if half == 0 { tau + len * u.powf(e) } else { t - len * u.powf(e) };
                if s <= tau || s >= t {
                    continue;
                }
                let theta = (s - tau) / total;
                let delta = (t - s) * (s - tau) / total;
                let sigma = (2.0 * lambda * delta).sqrt();
                let l1 = self.window * sigma;
                let l2 = self.window * self.window * lambda * delta / 3.0 + 0.5 * ph * l1;
                // per-axis (offset, weight)
                let mut axes = [[(0.0, 0.0); MAX_NODES]; MAX_DIM];
                for j in 0..n {
                    let sj = g.sigma()[j];
                    let c = p[j] * theta.powi(sj as i32);
                    if sj == 1 {
                        for (a, q) in axes[j].iter_mut().zip(rule.hermite.around(c, sigma)) {
                            *a = q;
                        }
                    } else {
                        for (a, q) in axes[j].iter_mut().zip(rule.space.on(c - l2, c + l2)) {
                            *a = q;
                        }
                    }
                }
                let vol = wu * ds;
                let mut idx = [0usize; MAX_DIM];
                loop {
                    let mut wt = vol;
                    for j in 0..n {
                        let (o, q) = axes[j][idx[j]];
                        w[j] = o;
                        wt *= q;
                    }
                    if self.frozen.euclidean {
                        let mut y = [0.0; MAX_DIM];
                        for j in 0..n {
                            y[j] = xi[j] + w[j];
                        }
                        visit(&y[..n], s, wt)?;
                    } else {
                        visit(&g.op(xi, &w[..n]), s, wt)?;
                    }
                    let mut j = 0;
                    while j < n {
                        idx[j] += 1;
                        if idx[j] < k {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                    if j == n {
                        break;
                    }
                }
            }
        }
        Ok(())
    }

    /// `(HZ)_1..(HZ)_kmax` at `(x, t; xi, tau)`, with convolutions on rule `level`.
    fn terms(&self, level: usize, x: &[f64], t: f64, xi: &[f64], tau: f64, kmax: usize) -> Result<Terms, ParametrixError> {
        let outer = Outer::new(self.op(), x, t);
        let mut out = [0.0; MAX_ORDER];
        out[0] = self.hz(&outer, x, t, xi, tau)?.0;
        if kmax > 1 {
            self.for_nodes(level, x, t, xi, tau, |y, s, w| {
                let hz = self.hz(&outer, x, t, y, s)?.0;
                if hz != 0.0 {
                    let inner = self.terms(level + 1, y, s, xi, tau, kmax - 1)?;
                    for k in 0..kmax - 1 {
                        out[k + 1] += w * hz * inner[k];
                    }
                }
                Ok(())
            })?;
        }
        Ok(out)
    }

    /// `Z * (HZ)_k` for `k = 1..K` at `(x, t; xi, tau)`.
    fn j_terms(&self, x: &[f64], t: f64, xi: &[f64], tau: f64, kmax: usize) -> Result<Vec<f64>, ParametrixError> {
        let mut out = vec![0.0; kmax];
        self.for_nodes(0, x, t, xi, tau, |y, s, w| {
            let z = self.frozen.value(x, t, y, s)?.value;
            if z != 0.0 {
                let inner = self.terms(1, y, s, xi, tau, kmax)?;
                for k in 0..kmax {
                    out[k] += w * z * inner[k];
                }
            }
            Ok(())
        })?;
        Ok(out)
    }
}

/// Geometric tail estimate `|a_K| rho / (1 - rho)` from the last two terms.
fn tail(terms: &[f64]) -> (f64, bool) {
    let k = terms.len();
    let last = terms[k - 1].abs();
    if k < 2 || last == 0.0 {
        return (last, false);
    }
    // decay ratio fitted over the whole series, robust to a single cancelling term
    let Some(first) = terms.iter().position(|v| *v != 0.0) else {
        return (0.0, false);
    };
    if first == k - 1 {
        return (f64::INFINITY, true);
    }
    let rho = (last / terms[first].abs()).powf(1.0 / (k - 1 - first) as f64);
    if rho >= 1.0 {
        (f64::INFINITY, true)
    } else {
        (last * rho / (1.0 - rho), false)
    }
}

fn check_points(g: &CarnotGroup, x: &[f64], xi: &[f64]) -> Result<(), ParametrixError> {
    for v in [x, xi] {
        if v.len() != g.dim() {
            return Err(KernelError::Group(crate::group::GroupError::DimensionMismatch { expected: g.dim(), got: v.len() }).into());
        }
    }
    if g.dim() > MAX_DIM {
        return Err(ParametrixError::DimensionTooLarge(g.dim()));
    }
    Ok(())
}

/// `Z(z, zeta) = Gamma_{A(zeta)}(xi^{-1} o x, t - tau)`, zero for `t <= tau`.
pub fn parametrix_z<C: Coefficients + ?Sized>(op: &C, x: &[f64], t: f64, xi: &[f64], tau: f64) -> Result<KernelEstimate, ParametrixError> {
    check_points(op.group(), x, xi)?;
    let f = Frozen::new(op, &ParametrixConfig::default())?;
    f.value(x, t, xi, tau)
}

/// `H Z(., zeta)` at `z`.
pub fn levi_residual<C: Coefficients + ?Sized>(
    op: &C,
    x: &[f64],
    t: f64,
    xi: &[f64],
    tau: f64,
    cfg: &ParametrixConfig,
) -> Result<LeviResidual, ParametrixError> {
    check_points(op.group(), x, xi)?;
    let m = Machine::new(op, cfg)?;
    let outer = Outer::new(op, x, t);
    let (value, h) = m.hz(&outer, x, t, xi, tau)?;
    let flagged = t > tau && !m.frozen.euclidean && h < 1e-7 * (1.0 + crate::distance::gauge(op.group(), &op.group().relative(xi, x)));
    Ok(LeviResidual { value, fd_step: h, flagged })
}

/// Partial sum `sum_{k <= K} (HZ)_k(z, zeta)`.
pub fn iterate_g<C: Coefficients + ?Sized>(
    op: &C,
    x: &[f64],
    t: f64,
    xi: &[f64],
    tau: f64,
    cfg: &ParametrixConfig,
) -> Result<SeriesEval, ParametrixError> {
    check_points(op.group(), x, xi)?;
    if t <= tau {
        return Ok(SeriesEval { value: 0.0, terms: vec![0.0; cfg.order], tail_bound: 0.0, diverging: false });
    }
    if t - tau > cfg.horizon {
        return Err(ParametrixError::Horizon(t - tau, cfg.horizon));
    }
    let m = Machine::new(op, cfg)?;
    let terms = m.terms(0, x, t, xi, tau, cfg.order)?[..cfg.order].to_vec();
    let (tail_bound, diverging) = tail(&terms);
    Ok(SeriesEval { value: terms.iter().sum(), terms, tail_bound, diverging })
}

/// `Gamma = Z + J` with `J = sum_k Z * (HZ)_k`.
pub fn fundamental_solution<C: Coefficients + ?Sized>(
    op: &C,
    x: &[f64],
    t: f64,
    xi: &[f64],
    tau: f64,
    cfg: &ParametrixConfig,
) -> Result<FundamentalSolutionEval, ParametrixError> {
    check_points(op.group(), x, xi)?;
    if t <= tau {
        return Ok(FundamentalSolutionEval::zero());
    }
    if t - tau > cfg.horizon {
        return Err(ParametrixError::Horizon(t - tau, cfg.horizon));
    }
    let m = Machine::new(op, cfg)?;
    let z = m.frozen.value(x, t, xi, tau)?;
    // frozen principal part and no lower-order terms: H Z vanishes identically
    if op.constant_principal() && op.no_lower_order() {
        return Ok(FundamentalSolutionEval {
            z_value: z.value,
            j_value: 0.0,
            total: z.value,
            j_terms: vec![0.0; cfg.order],
            quad_error: z.error(),
            tail_bound: 0.0,
            diverging: false,
        });
    }
    let j_terms = m.j_terms(x, t, xi, tau, cfg.order)?;
    let j_value: f64 = j_terms.iter().sum();
    let quad_error = if cfg.error_estimate {
        let half = cfg.halved();
        let mh = Machine::new(op, &half)?;
        let coarse: f64 = mh.j_terms(x, t, xi, tau, cfg.order)?.iter().sum();
        (coarse - j_value).abs()
    } else {
        0.0
    } + z.error();
    let (tail_bound, diverging) = tail(&j_terms);
    Ok(FundamentalSolutionEval { z_value: z.value, j_value, total: z.value + j_value, j_terms, quad_error, tail_bound, diverging })
}

/// Spatial nodes `(y, weight)` covering the Gaussian core of a kernel centred at
/// `centre` after time `dt`: Gauss–Hermite on the first layer, Gauss–Legendre on a
/// `window`-wide box for higher layers.
pub fn spatial_nodes(g: &CarnotGroup, centre: &[f64], dt: f64, lambda: f64, window: f64, nodes: usize) -> Vec<(Vec<f64>, f64)> {
    let n = g.dim();
    let gl = GaussLegendre::new(nodes);
    let gh = GaussHermite::new(nodes);
    let sigma = (2.0 * lambda * dt).sqrt();
    let l2 = window * window * lambda * dt / 3.0;
    let axes: Vec<Vec<(f64, f64)>> = g
        .sigma()
        .iter()
        .map(|&s| if s == 1 { gh.around(0.0, sigma).collect() } else { gl.on(-l2, l2).collect() })
        .collect();
    let mut out = Vec::with_capacity(nodes.pow(n as u32));
    let mut idx = vec![0usize; n];
    loop {
        let mut w = vec![0.0; n];
        let mut wt = 1.0;
        for j in 0..n {
            let (o, q) = axes[j][idx[j]];
            w[j] = o;
            wt *= q;
        }
        out.push((g.op(centre, &w), wt));
        let mut j = 0;
        while j < n {
            idx[j] += 1;
            if idx[j] < nodes {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == n {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub budget: f64,
}

impl CheckResult {
    pub fn pass(&self) -> bool {
        self.residual <= self.budget
    }
}

/// `int Gamma(x, t; xi, tau) d xi` against `exp(c0 (t - tau))` for constant `c = c0`.
pub fn verify_normalization<C: Coefficients + ?Sized>(
    op: &C,
    x: &[f64],
    t: f64,
    tau: f64,
    nodes: usize,
    cfg: &ParametrixConfig,
) -> Result<CheckResult, ParametrixError> {
    let c0 = op
        .constant_c()
        .ok_or_else(|| ParametrixError::Config("normalization needs a constant zero-order coefficient".into()))?;
    let g = op.group();
    let mut integral = 0.0;
    let mut budget = 0.0;
    for (xi, w) in spatial_nodes(g, x, t - tau, op.lambda(), cfg.window, nodes) {
        let f = fundamental_solution(op, x, t, &xi, tau, cfg)?;
        integral += w * f.total;
        budget += w.abs() * f.error_budget();
    }
    let rhs = (c0 * (t - tau)).exp();
    Ok(CheckResult { lhs: integral, rhs, residual: (integral - rhs).abs(), budget })
}

/// `|Gamma(x,t; xi,tau) - int Gamma(x,t; y,s) Gamma(y,s; xi,tau) dy|`.
#[allow(clippy::too_many_arguments)]
pub fn verify_reproduction<C: Coefficients + ?Sized>(
    op: &C,
    x: &[f64],
    t: f64,
    xi: &[f64],
    tau: f64,
    s: f64,
    nodes: usize,
    cfg: &ParametrixConfig,
) -> Result<CheckResult, ParametrixError> {
    if !(tau < s && s < t) {
        return Err(ParametrixError::Config("reproduction needs tau < s < t".into()));
    }
    let g = op.group();
    let direct = fundamental_solution(op, x, t, xi, tau, cfg)?;
    let theta = (s - tau) / (t - tau);
    let p = g.relative(xi, x);
    let c: Vec<f64> = p.iter().zip(g.sigma()).map(|(v, &sj)| v * theta.powi(sj as i32)).collect();
    let centre = g.op(xi, &c);
    let delta = (t - s) * (s - tau) / (t - tau);
    let mut integral = 0.0;
    let mut budget = direct.error_budget();
    for (y, w) in spatial_nodes(g, &centre, delta, op.lambda(), cfg.window, nodes) {
        let a = fundamental_solution(op, x, t, &y, s, cfg)?;
        let b = fundamental_solution(op, &y, s, xi, tau, cfg)?;
        integral += w * a.total * b.total;
        budget += w.abs() * (a.error_budget() * b.total.abs() + b.error_budget() * a.total.abs());
    }
    Ok(CheckResult { lhs: direct.total, rhs: integral, residual: (direct.total - integral).abs(), budget })
}

/// `|Gamma*(zeta; z) - Gamma(z; zeta)|` with `Gamma*` from the time-reversed adjoint.
pub fn verify_adjoint_symmetry(
    op: &crate::operator::Operator,
    x: &[f64],
    t: f64,
    xi: &[f64],
    tau: f64,
    cfg: &ParametrixConfig,
) -> Result<CheckResult, ParametrixError> {
    let adj = op.reversed_adjoint()?;
    let forward = fundamental_solution(op, x, t, xi, tau, cfg)?;
    // Gamma*(xi, tau; x, t) = Gamma~(xi, -tau; x, -t)
    let backward = fundamental_solution(&adj, xi, -tau, x, -t, cfg)?;
    Ok(CheckResult {
        lhs: backward.total,
        rhs: forward.total,
        residual: (backward.total - forward.total).abs(),
        budget: forward.error_budget() + backward.error_budget(),
    })
}

/// Growth constants of the Cauchy data: `|g(x)|, |f(x, t)| <= C exp(h1 d_X(x, 0)^2)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrowthGate {
    pub h1: f64,
    /// Fitted Gaussian upper-bound exponent and pseudo-triangle constant.
    pub c_u: f64,
    pub k1: f64,
}

impl GrowthGate {
    /// `min(c_u / (2 h1 (2 k1^2 - 1)), 3 c_u / h1)`, infinite for `h1 = 0`.
    pub fn limit(&self) -> f64 {
        if self.h1 <= 0.0 {
            return f64::INFINITY;
        }
        (self.c_u / (2.0 * self.h1 * (2.0 * self.k1 * self.k1 - 1.0))).min(3.0 * self.c_u / self.h1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyEval {
    pub value: f64,
    pub error_budget: f64,
}

pub type SourceFn<'a> = &'a dyn Fn(&[f64], f64) -> f64;

/// `u(x, t) = int Gamma(x,t; xi,T1) g(xi) d xi - int_{T1}^t int Gamma(x,t; xi,s) f(xi,s) d xi ds`.
#[allow(clippy::too_many_arguments)]
pub fn cauchy_solve<C: Coefficients + ?Sized>(
    op: &C,
    g_init: &dyn Fn(&[f64]) -> f64,
    f: Option<SourceFn>,
    x: &[f64],
    t: f64,
    t1: f64,
    gate: &GrowthGate,
    nodes: usize,
    cfg: &ParametrixConfig,
) -> Result<CauchyEval, ParametrixError> {
    if !(t > t1) {
        return Err(ParametrixError::Config("cauchy_solve needs t > T1".into()));
    }
    let limit = gate.limit();
    if limit <= cfg.horizon {
        return Err(ParametrixError::GrowthGate { gate: limit, horizon: cfg.horizon });
    }
    let g = op.group();
    let mut value = 0.0;
    let mut budget = 0.0;
    for (xi, w) in spatial_nodes(g, x, t - t1, op.lambda(), cfg.window, nodes) {
        let k = fundamental_solution(op, x, t, &xi, t1, cfg)?;
        let gv = g_init(&xi);
        value += w * k.total * gv;
        budget += w.abs() * k.error_budget() * gv.abs();
    }
    if let Some(f) = f {
        let gl = GaussLegendre::new(cfg.time_nodes.max(4));
        let e = 2.0 / op.alpha();
        for (u, wu) in gl.on(0.0, 1.0) {
            // s -> t is the singular end of the time integral
            let s = t - (t - t1) * u.powf(e);
            let ds = (t - t1) * e * u.powf(e - 1.0);
            for (xi, w) in spatial_nodes(g, x, t - s, op.lambda(), cfg.window, nodes) {
                let k = fundamental_solution(op, x, t, &xi, s, cfg)?;
                let fv = f(&xi, s);
                value -= wu * ds * w * k.total * fv;
                budget += (wu * ds * w).abs() * k.error_budget() * fv.abs();
            }
        }
    }
    Ok(CauchyEval { value, error_budget: budget })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{GroupRef, Operator, OperatorSpec, ScalarField};

    fn perturbed(c0: f64) -> Operator {
        Operator::new(OperatorSpec {
            group: GroupRef::Name("euclidean1".into()),
            a: vec![vec![ScalarField::Bump { base: 1.0, amp: 0.1, center: vec![0.0], width: 1.0, time_amp: 0.5, time_freq: 3.0 }]],
            b: vec![],
            c: ScalarField::constant(c0),
            lambda: 1.2,
            m1_bound: 1.2,
            m2_bound: 1.0,
            alpha: 1.0,
            derivatives: Default::default(),
        })
        .unwrap()
    }

    #[test]
    fn euclidean_z_matches_gaussian() {
        let op = Operator::heat("euclidean2", 0.0).unwrap();
        let z = parametrix_z(&op, &[0.3, -0.2], 1.0, &[0.0, 0.0], 0.0).unwrap();
        assert!((z.value - crate::kernels::euclidean_heat(&[0.3, -0.2], 1.0)).abs() < 1e-15);
        assert_eq!(parametrix_z(&op, &[0.0, 0.0], 0.0, &[0.0, 0.0], 0.5).unwrap().value, 0.0);
    }

    #[test]
    fn constant_coefficients_have_no_correction() {
        let op = Operator::heat("euclidean1", 0.0).unwrap();
        let r = levi_residual(&op, &[0.4], 0.5, &[0.0], 0.0, &ParametrixConfig::default()).unwrap();
        assert_eq!(r.value, 0.0);
        let f = fundamental_solution(&op, &[0.4], 0.5, &[0.0], 0.0, &ParametrixConfig::default()).unwrap();
        assert_eq!(f.j_value, 0.0);
        assert_eq!(f.total, f.z_value);
    }

    #[test]
    fn zero_order_only_residual() {
        let op = Operator::heat("euclidean1", -0.7).unwrap();
        let r = levi_residual(&op, &[0.2], 0.3, &[0.0], 0.0, &ParametrixConfig::default()).unwrap();
        let z = parametrix_z(&op, &[0.2], 0.3, &[0.0], 0.0).unwrap().value;
        assert!((r.value + 0.7 * z).abs() < 1e-15);
    }

    #[test]
    fn first_term_is_levi_residual() {
        let op = perturbed(0.0);
        let cfg = ParametrixConfig { order: 1, ..Default::default() };
        let s = iterate_g(&op, &[0.1], 0.4, &[-0.1], 0.0, &cfg).unwrap();
        let r = levi_residual(&op, &[0.1], 0.4, &[-0.1], 0.0, &cfg).unwrap();
        assert_eq!(s.value, r.value);
    }

    #[test]
    fn before_the_pole_is_zero() {
        let op = perturbed(0.0);
        let f = fundamental_solution(&op, &[0.1], 0.0, &[0.0], 0.2, &ParametrixConfig::default()).unwrap();
        assert_eq!(f.total, 0.0);
    }

    #[test]
    fn tail_uses_fitted_ratio() {
        let (b, d) = tail(&[1.0, 0.1, 0.01]);
        assert!(!d && (b - 0.01 * 0.1 / 0.9).abs() < 1e-15);
        // a cancelling middle term does not trip the divergence flag
        let (b, d) = tail(&[-8.8e-5, 2.5e-7, 6.8e-7]);
        assert!(!d && b < 1e-7);
        assert!(tail(&[1.0, 2.0]).1);
        assert_eq!(tail(&[0.3]), (0.3, false));
    }

    #[test]
    fn dimension_budget() {
        let op = Operator::heat("euclidean4", 0.0).unwrap();
        assert!(matches!(
            fundamental_solution(&op, &[0.0; 4], 1.0, &[0.0; 4], 0.0, &ParametrixConfig::default()),
            Err(ParametrixError::DimensionTooLarge(4))
        ));
    }

    #[test]
    fn growth_gate_refuses() {
        let op = Operator::heat("euclidean1", 0.0).unwrap();
        let gate = GrowthGate { h1: 5.0, c_u: 0.25, k1: 1.0 };
        let r = cauchy_solve(&op, &|_| 1.0, None, &[0.0], 1.0, 0.0, &gate, 8, &ParametrixConfig::default());
        assert!(matches!(r, Err(ParametrixError::GrowthGate { .. })));
    }

    #[test]
    fn cauchy_constant_data() {
        let op = Operator::heat("euclidean1", -0.5).unwrap();
        let gate = GrowthGate { h1: 0.0, c_u: 0.25, k1: 1.0 };
        let u = cauchy_solve(&op, &|_| 1.0, None, &[0.3], 0.8, 0.0, &gate, 24, &ParametrixConfig::default()).unwrap();
        // K = 3 reproduces the exponential up to the series tail
        let partial = 1.0 - 0.4 + 0.08 - 0.064 / 6.0;
        assert!((u.value - partial).abs() < 1e-6, "{}", u.value);
        assert!((u.value - (-0.4f64).exp()).abs() <= u.error_budget);
    }
}
