//! Harnack cylinders, Harnack chains along CC geodesics, empirical Harnack constants,
//! admissible curves and maximum-principle probes.
//!
//! Ball membership uses [`ball_distance`]: exact on Euclidean groups and the first
//! Heisenberg group, the optimizer's upper bound elsewhere. Sample points come from a
//! Halton sequence, so every probe is deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distance::{ball_distance, cc_distance, integrate_segment, ControlTrajectory, DistanceConfig, DistanceError, PNorm};
use crate::group::{CarnotGroup, GroupError, SpaceTimePoint};
use crate::mean_value::ConstantKernel;
use crate::operator::{Coefficients, Operator};
use crate::quadrature::halton;

#[derive(Debug, thiserror::Error)]
pub enum HarnackError {
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("u = {value:e} < 0 at x = {x:?}, t = {t}")]
    Negative { value: f64, x: Vec<f64>, t: f64 },
    #[error("chain leaves the unit cylinder even with m = {m}")]
    ChainExit { m: usize },
    #[error("could not place {wanted} sample points in the ball after {tries} tries")]
    Sampling { wanted: usize, tries: usize },
}

pub type Field<'a> = &'a (dyn Fn(&[f64], f64) -> f64 + Sync);

/// Half-widths of a coordinate box containing the unit CC ball centred at 0.
fn unit_ball_box(g: &CarnotGroup) -> Vec<f64> {
    // |w_h| <= d, and step-2 coordinates are enclosed areas, at most d^2 / (2 pi)
    g.sigma().iter().map(|&s| if s == 1 { 1.0 } else { 1.0 / (2.0 * std::f64::consts::PI) }).collect()
}

/// `B_r(x0)` with respect to `d_X`.
#[derive(Debug, Clone, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, g: &CarnotGroup, x: &[f64], cfg: &DistanceConfig) -> Result<bool, HarnackError> {
        Ok(ball_distance(g, &self.center, x, cfg)? <= self.radius)
    }

    /// `n` quasi-random points of the ball (the centre first), by rejection from a box.
    pub fn sample(&self, g: &CarnotGroup, n: usize, cfg: &DistanceConfig) -> Result<Vec<Vec<f64>>, HarnackError> {
        let hw = unit_ball_box(g);
        let origin = vec![0.0; g.dim()];
        let mut out = Vec::with_capacity(n);
        if n > 0 {
            out.push(self.center.clone());
        }
        let tries = 200 * n.max(1);
        for i in 0..tries as u64 {
            if out.len() >= n {
                break;
            }
            let u = halton(i + 1, g.dim());
            let w: Vec<f64> = u.iter().zip(&hw).map(|(v, a)| a * (2.0 * v - 1.0)).collect();
            if ball_distance(g, &origin, &w, cfg)? <= 1.0 {
                out.push(g.op(&self.center, &g.dilate(self.radius, &w)?));
            }
        }
        if out.len() < n {
            return Err(HarnackError::Sampling { wanted: n, tries });
        }
        Ok(out)
    }
}

/// `B x (t_lo, t_hi)`.
#[derive(Debug, Clone, Serialize)]
pub struct Cylinder {
    pub ball: Ball,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Cylinder {
    pub fn contains(&self, g: &CarnotGroup, x: &[f64], t: f64, cfg: &DistanceConfig) -> Result<bool, HarnackError> {
        Ok(t > self.t_lo && t < self.t_hi && self.ball.contains(g, x, cfg)?)
    }

    /// Ball samples paired with times on a Halton axis of the open interval.
    pub fn sample(&self, g: &CarnotGroup, n: usize, cfg: &DistanceConfig) -> Result<Vec<SpaceTimePoint>, HarnackError> {
        let pts = self.ball.sample(g, n, cfg)?;
        Ok(pts
            .into_iter()
            .enumerate()
            .map(|(i, x)| {
                let v = halton(i as u64 + 1, g.dim() + 1)[g.dim()];
                SpaceTimePoint { x, t: self.t_lo + (self.t_hi - self.t_lo) * (0.5 / n as f64 + v * (1.0 - 1.0 / n as f64)) }
            })
            .collect())
    }
}

/// `B x {t}`.
#[derive(Debug, Clone, Serialize)]
pub struct Slice {
    pub ball: Ball,
    pub t: f64,
}

/// Time fractions `0 < nu < eta < mu < 1` and spatial fraction `theta` of the Harnack cylinders.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CylinderShape {
    pub nu: f64,
    pub eta: f64,
    pub mu: f64,
    pub theta: f64,
}

impl CylinderShape {
    pub fn check(&self) -> Result<(), HarnackError> {
        let CylinderShape { nu, eta, mu, theta } = *self;
        if !(0.0 < nu && nu < eta && eta < mu && mu < 1.0) {
            return Err(HarnackError::Params(format!("need 0 < nu < eta < mu < 1, got {nu}, {eta}, {mu}")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(HarnackError::Params(format!("theta must lie in (0, 1), got {theta}")));
        }
        Ok(())
    }
}

impl Default for CylinderShape {
    fn default() -> Self {
        CylinderShape { nu: 0.2, eta: 0.4, mu: 0.8, theta: 0.5 }
    }
}

/// `epsilon_1`, `theta_1` of the parabolic Harnack inequality `sup_{D_r} u <= C_P u(z0)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParabolicConstants {
    pub eps1: f64,
    pub theta1: f64,
}

impl ParabolicConstants {
    pub fn check(&self) -> Result<(), HarnackError> {
        if !(self.eps1 > 0.0 && self.eps1 < 1.0 && self.theta1 > 0.0 && self.theta1 < 1.0) {
            return Err(HarnackError::Params(format!("eps1, theta1 must lie in (0, 1), got {}, {}", self.eps1, self.theta1)));
        }
        Ok(())
    }
}

impl Default for ParabolicConstants {
    fn default() -> Self {
        ParabolicConstants { eps1: 0.25, theta1: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnackBoxes {
    pub z0: SpaceTimePoint,
    pub r: f64,
    pub shape: CylinderShape,
    pub q: Cylinder,
    pub q_plus: Cylinder,
    pub q_minus: Cylinder,
    pub d: Option<Slice>,
}

pub fn build_boxes(
    g: &CarnotGroup,
    z0: &SpaceTimePoint,
    r: f64,
    shape: &CylinderShape,
    parabolic: Option<&ParabolicConstants>,
) -> Result<HarnackBoxes, HarnackError> {
    shape.check()?;
    if !(r > 0.0) {
        return Err(HarnackError::Params(format!("r must be positive, got {r}")));
    }
    if z0.x.len() != g.dim() {
        return Err(GroupError::DimensionMismatch { expected: g.dim(), got: z0.x.len() }.into());
    }
    let (x0, t0, r2) = (&z0.x, z0.t, r * r);
    let ball = |rad: f64| Ball { center: x0.clone(), radius: rad };
    let d = match parabolic {
        Some(p) => {
            p.check()?;
            Some(Slice { ball: ball(p.theta1 * r), t: t0 - p.eps1 * r2 })
        }
        None => None,
    };
    Ok(HarnackBoxes {
        z0: z0.clone(),
        r,
        shape: *shape,
        q: Cylinder { ball: ball(r), t_lo: t0 - r2, t_hi: t0 },
        q_plus: Cylinder { ball: ball(shape.theta * r), t_lo: t0 - shape.nu * r2, t_hi: t0 },
        q_minus: Cylinder { ball: ball(shape.theta * r), t_lo: t0 - shape.mu * r2, t_hi: t0 - shape.eta * r2 },
        d,
    })
}

/// `theta_0 = min(theta_1, 1 / (12 k_1^3))`.
pub fn theta0(theta1: f64, k1: f64) -> f64 {
    theta1.min(1.0 / (12.0 * k1.powi(3)))
}

/// `r_0 = min(r_1, 1 / (2 k_1), sqrt(1 - gamma))`; `gamma` is a free parameter in `(0, 1)`.
pub fn r0(r1: f64, k1: f64, gamma: f64) -> f64 {
    r1.min(1.0 / (2.0 * k1)).min((1.0 - gamma).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainConfig {
    pub eps1: f64,
    pub theta1: f64,
    pub r0: f64,
    pub c_p: f64,
    /// Pseudo-triangle constant; 1 for a genuine metric.
    pub k1: f64,
    pub distance: DistanceConfig,
}

impl Default for ChainConfig {
    fn default() -> Self {
        let p = ParabolicConstants::default();
        ChainConfig {
            eps1: p.eps1,
            theta1: p.theta1,
            r0: r0(1.0, 1.0, CylinderShape::default().mu),
            c_p: 2.0,
            k1: 1.0,
            distance: DistanceConfig { p: PNorm::Inf, ..Default::default() },
        }
    }
}

/// Uniform chain length over `Q^+ x Q^-`: both printed variants of the `eta - nu` bound
/// and `mu / (eps_1 r_0^2)`; returns `(ceil of the max, [terms])`.
pub fn uniform_chain_length(shape: &CylinderShape, cfg: &ChainConfig) -> (usize, [f64; 3]) {
    let gap = shape.eta - shape.nu;
    let terms = [4.0 * cfg.k1 * cfg.k1 * cfg.eps1 / gap, 16.0 * cfg.k1 * cfg.eps1 / gap, shape.mu / (cfg.eps1 * cfg.r0 * cfg.r0)];
    (terms.iter().cloned().fold(0.0, f64::max).ceil() as usize, terms)
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnackChain {
    /// `z_0 = z^+, ..., z_m = z^-`.
    pub points: Vec<SpaceTimePoint>,
    pub r: f64,
    pub m: usize,
    /// `max(eps_1 d^2 / (theta_1^2 dt), dt / (eps_1 r_0^2))`, of which `m` is the ceiling.
    pub m_required: f64,
    pub d_x: f64,
    pub d_x_converged: bool,
    /// Constant-speed geodesic from `x^+` to `x^-` on `[0, 1]`.
    pub trajectory: ControlTrajectory,
    /// `int |alpha|` over each chain step, an upper bound on `d_X(x_j, x_{j-1})`.
    pub gaps: Vec<f64>,
    /// Upper bound on `max_j d_X(x_j, 0) + r`.
    pub reach: f64,
    pub bound: f64,
    pub retried: bool,
}

impl HarnackChain {
    /// Largest `gap_j / (theta_1 r)`.
    pub fn gap_ratio(&self, theta1: f64) -> f64 {
        self.gaps.iter().cloned().fold(0.0, f64::max) / (theta1 * self.r)
    }
}

/// Chain from `z^+` down to `z^-` along a reparametrized CC geodesic.
pub fn harnack_chain(g: &CarnotGroup, z_plus: &SpaceTimePoint, z_minus: &SpaceTimePoint, cfg: &ChainConfig) -> Result<HarnackChain, HarnackError> {
    let dt = z_plus.t - z_minus.t;
    if !(dt > 0.0) {
        return Err(HarnackError::Params(format!("need t+ > t-, got {} and {}", z_plus.t, z_minus.t)));
    }
    ParabolicConstants { eps1: cfg.eps1, theta1: cfg.theta1 }.check()?;
    if !(cfg.r0 > 0.0 && cfg.c_p >= 1.0 && cfg.k1 >= 1.0) {
        return Err(HarnackError::Params("need r0 > 0, C_P >= 1, k1 >= 1".into()));
    }
    let dcfg = DistanceConfig { p: PNorm::Inf, ..cfg.distance.clone() };
    let geo = cc_distance(g, &z_plus.x, &z_minus.x, &dcfg)?;
    let d = geo.value;
    let traj = geo.trajectory;
    let m_required = (cfg.eps1 * d * d / (cfg.theta1 * cfg.theta1 * dt)).max(dt / (cfg.eps1 * cfg.r0 * cfg.r0));
    let m0 = (m_required.ceil() as usize).max(1);
    let origin = vec![0.0; g.dim()];
    let start = ball_distance(g, &origin, &z_plus.x, &cfg.distance)?;
    for (attempt, m) in [m0, m0 + 1].into_iter().enumerate() {
        let step = dt / m as f64;
        let r = (step / cfg.eps1).sqrt();
        let mut points = Vec::with_capacity(m + 1);
        let mut gaps = Vec::with_capacity(m);
        let mut reach: f64 = 0.0;
        let mut inside = true;
        for j in 0..=m {
            let tau = j as f64 / m as f64;
            let x = if j == m { z_minus.x.clone() } else { traj.point_at(g, tau) };
            let t = if j == m { z_minus.t } else { z_plus.t - j as f64 * step };
            if j > 0 {
                gaps.push(traj.length_between((j - 1) as f64 / m as f64, tau));
            }
            let rj = start + traj.length_between(0.0, tau) + r;
            reach = reach.max(rj);
            inside &= rj <= 1.0 && t - r * r >= -1.0 && t <= 0.0;
            points.push(SpaceTimePoint { x, t });
        }
        if inside {
            return Ok(HarnackChain {
                points,
                r,
                m,
                m_required,
                d_x: d,
                d_x_converged: geo.converged,
                trajectory: traj,
                gaps,
                reach,
                bound: cfg.c_p.powi(m as i32),
                retried: attempt > 0,
            });
        }
    }
    Err(HarnackError::ChainExit { m: m0 + 1 })
}

fn eval_nonneg(u: Field, x: &[f64], t: f64) -> Result<f64, HarnackError> {
    let v = u(x, t);
    if v < 0.0 || v.is_nan() {
        return Err(HarnackError::Negative { value: v, x: x.to_vec(), t });
    }
    Ok(v)
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicCheck {
    pub sup_d: f64,
    pub u_z0: f64,
    pub ratio: f64,
    pub samples: usize,
}

/// `sup_{D_r(z0)} u / u(z0)` over quasi-random points of `D_r(z0)`.
pub fn parabolic_harnack_check(
    g: &CarnotGroup,
    u: Field,
    z0: &SpaceTimePoint,
    r: f64,
    pc: &ParabolicConstants,
    samples: usize,
    dcfg: &DistanceConfig,
) -> Result<ParabolicCheck, HarnackError> {
    let boxes = build_boxes(g, z0, r, &CylinderShape::default(), Some(pc))?;
    let d = boxes.d.expect("slice requested");
    let u_z0 = eval_nonneg(u, &z0.x, z0.t)?;
    let mut sup_d: f64 = 0.0;
    let pts = d.ball.sample(g, samples, dcfg)?;
    for x in &pts {
        sup_d = sup_d.max(eval_nonneg(u, x, d.t)?);
    }
    Ok(ParabolicCheck { sup_d, u_z0, ratio: sup_d / u_z0, samples: pts.len() })
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantCheck {
    pub sup_minus: f64,
    pub inf_plus: f64,
    pub ratio: f64,
    pub c_h: f64,
    pub pass: bool,
    pub samples: usize,
}

/// `sup_{Q_r^-} u <= C_H inf_{Q_r^+} u` on quasi-random samples of both cylinders.
pub fn invariant_harnack_check(
    g: &CarnotGroup,
    u: Field,
    boxes: &HarnackBoxes,
    c_h: f64,
    samples: usize,
    dcfg: &DistanceConfig,
) -> Result<InvariantCheck, HarnackError> {
    let mut sup_minus: f64 = 0.0;
    for p in boxes.q_minus.sample(g, samples, dcfg)? {
        sup_minus = sup_minus.max(eval_nonneg(u, &p.x, p.t)?);
    }
    let mut inf_plus = f64::INFINITY;
    for p in boxes.q_plus.sample(g, samples, dcfg)? {
        inf_plus = inf_plus.min(eval_nonneg(u, &p.x, p.t)?);
    }
    let ratio = sup_minus / inf_plus;
    Ok(InvariantCheck { sup_minus, inf_plus, ratio, c_h, pass: ratio <= c_h, samples })
}

/// Poles `(x0 o delta_r(y), t0 - r^2 (1 + lag))` with `y` in a box of half-width `spread`
/// per layer (scaled by the layer weight) and `lag` in `lags`; Halton indices from `start`.
pub fn pole_family(
    g: &CarnotGroup,
    z0: &SpaceTimePoint,
    r: f64,
    count: usize,
    spread: f64,
    lags: (f64, f64),
    start: u64,
) -> Result<Vec<SpaceTimePoint>, HarnackError> {
    let n = g.dim();
    (0..count as u64)
        .map(|i| {
            let u = halton(start + i + 1, n + 1);
            let y: Vec<f64> = u[..n].iter().zip(g.sigma()).map(|(v, &s)| spread.powi(s as i32) * (2.0 * v - 1.0)).collect();
            let lag = lags.0 + (lags.1 - lags.0) * u[n];
            Ok(SpaceTimePoint { x: g.op(&z0.x, &g.dilate(r, &y)?), t: z0.t - r * r * (1.0 + lag) })
        })
        .collect()
}

/// `u(x, t) = Gamma((x, t); pole)`, a nonnegative solution above the pole.
pub fn pole_solution<'a>(k: &'a ConstantKernel, pole: &'a SpaceTimePoint) -> impl Fn(&[f64], f64) -> f64 + Sync + 'a {
    move |x: &[f64], t: f64| k.gamma(x, t, &pole.x, pole.t).value
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantFit {
    pub c_p: f64,
    pub calibration: Vec<f64>,
    pub heldout: Vec<f64>,
    pub heldout_max: f64,
}

impl ConstantFit {
    /// Finite and at most twice the held-out maximum.
    pub fn consistent(&self) -> bool {
        self.c_p.is_finite() && self.c_p <= 2.0 * self.heldout_max
    }
}

/// Fits `C_P` as the largest parabolic Harnack ratio over the calibration poles and
/// reports the ratios of a held-out pole family.
#[allow(clippy::too_many_arguments)]
pub fn fit_parabolic_constant(
    k: &ConstantKernel,
    z0: &SpaceTimePoint,
    r: f64,
    pc: &ParabolicConstants,
    calibration: &[SpaceTimePoint],
    heldout: &[SpaceTimePoint],
    samples: usize,
    dcfg: &DistanceConfig,
) -> Result<ConstantFit, HarnackError> {
    let g = k.group();
    let ratios = |poles: &[SpaceTimePoint]| -> Result<Vec<f64>, HarnackError> {
        poles
            .iter()
            .map(|p| {
                let u = pole_solution(k, p);
                Ok(parabolic_harnack_check(g, &u, z0, r, pc, samples, dcfg)?.ratio)
            })
            .collect()
    };
    let calibration = ratios(calibration)?;
    let heldout = ratios(heldout)?;
    let c_p = calibration.iter().cloned().fold(0.0, f64::max);
    let heldout_max = heldout.iter().cloned().fold(0.0, f64::max);
    Ok(ConstantFit { c_p, calibration, heldout, heldout_max })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainBoundCheck {
    pub u_minus: f64,
    pub u_plus: f64,
    /// `C_P^m u(z^+)`.
    pub bound: f64,
    pub holds: bool,
    /// Largest `u(z_j) / u(z_{j-1})` along the chain.
    pub step_max: f64,
}

/// `u(z^-) <= C_P^m u(z^+)` along a chain, with the stepwise ratios.
pub fn chain_bound_check(chain: &HarnackChain, u: Field) -> Result<ChainBoundCheck, HarnackError> {
    let vals = chain.points.iter().map(|p| eval_nonneg(u, &p.x, p.t)).collect::<Result<Vec<_>, _>>()?;
    let step_max = vals.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let u_plus = vals[0];
    let u_minus = *vals.last().unwrap();
    let bound = chain.bound * u_plus;
    Ok(ChainBoundCheck { u_minus, u_plus, bound, holds: u_minus <= bound, step_max })
}

/// Discretized `H_G`-admissible curve: `x' = sum omega_i X_i(x)`, `t' = -1`.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissiblePath {
    pub points: Vec<SpaceTimePoint>,
    pub controls: Vec<Vec<f64>>,
    /// Set when the path left the domain; `points` stops at the last point inside.
    pub truncated: bool,
}

/// Integrates piecewise-constant controls (equal durations summing to `duration`) by RK4
/// with `steps` steps per segment, stopping at the first point outside `domain`.
pub fn admissible_reach(
    g: &CarnotGroup,
    zeta: &SpaceTimePoint,
    controls: &[Vec<f64>],
    duration: f64,
    steps: usize,
    domain: Option<&Cylinder>,
    dcfg: &DistanceConfig,
) -> Result<AdmissiblePath, HarnackError> {
    if zeta.x.len() != g.dim() {
        return Err(GroupError::DimensionMismatch { expected: g.dim(), got: zeta.x.len() }.into());
    }
    if controls.iter().any(|c| c.len() != g.m1() || c.iter().any(|v| !v.is_finite())) {
        return Err(HarnackError::Params(format!("controls need {} finite components", g.m1())));
    }
    if !(duration >= 0.0) || steps == 0 {
        return Err(HarnackError::Params("duration must be nonnegative and steps positive".into()));
    }
    let mut points = vec![zeta.clone()];
    let mut x = zeta.x.clone();
    let mut t = zeta.t;
    let h = if controls.is_empty() { 0.0 } else { duration / (controls.len() * steps) as f64 };
    for c in controls {
        for _ in 0..steps {
            x = integrate_segment(g, &x, c, h, 1);
            t -= h;
            if let Some(d) = domain {
                if !(t >= d.t_lo && t <= d.t_hi && d.ball.contains(g, &x, dcfg)?) {
                    return Ok(AdmissiblePath { points, controls: controls.to_vec(), truncated: true });
                }
            }
            points.push(SpaceTimePoint { x: x.clone(), t });
        }
    }
    Ok(AdmissiblePath { points, controls: controls.to_vec(), truncated: false })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeConfig {
    pub paths: usize,
    pub segments: usize,
    pub steps: usize,
    /// Time span of each path.
    pub duration: f64,
    pub control_bound: f64,
    pub hypothesis_samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub distance: DistanceConfig,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            paths: 32,
            segments: 8,
            steps: 4,
            duration: 0.5,
            control_bound: 1.0,
            hypothesis_samples: 256,
            seed: 0,
            tol: 1e-9,
            distance: DistanceConfig::default(),
        }
    }
}

/// Sign hypotheses of the maximum principle, checked on domain samples.
#[derive(Debug, Clone, Serialize)]
pub struct Hypotheses {
    pub c_nonpositive: bool,
    pub div_b_minus_c_nonnegative: bool,
    pub f_nonnegative: bool,
    /// `u <= u(zeta) + tol` on the samples.
    pub zeta_is_max: bool,
    pub u_zeta_nonnegative: bool,
}

impl Hypotheses {
    pub fn all(&self) -> bool {
        self.c_nonpositive && self.div_b_minus_c_nonnegative && self.f_nonnegative && self.zeta_is_max && self.u_zeta_nonnegative
    }

    pub fn violations(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (ok, name) in [
            (self.c_nonpositive, "c <= 0"),
            (self.div_b_minus_c_nonnegative, "div b - c >= 0"),
            (self.f_nonnegative, "f >= 0"),
            (self.zeta_is_max, "u(zeta) = max u"),
            (self.u_zeta_nonnegative, "u(zeta) >= 0"),
        ] {
            if !ok {
                v.push(name);
            }
        }
        v
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub u_zeta: f64,
    /// `max |u(z) - u(zeta)|` over reached points.
    pub deviation: f64,
    /// `max |f(z) - u(zeta) c(z)|` over reached points.
    pub f_mismatch: f64,
    pub reached: usize,
    pub truncated_paths: usize,
    pub hypotheses: Hypotheses,
    pub violations: Vec<&'static str>,
}

/// Follows random admissible paths from `zeta` inside `domain` and measures how far `u`
/// moves from `u(zeta)`.
pub fn max_principle_probe(
    op: &Operator,
    u: Field,
    f: Field,
    zeta: &SpaceTimePoint,
    domain: &Cylinder,
    cfg: &ProbeConfig,
) -> Result<ProbeReport, HarnackError> {
    let g = op.group();
    if cfg.paths == 0 || cfg.segments == 0 || cfg.steps == 0 || !(cfg.control_bound > 0.0) {
        return Err(HarnackError::Params("paths, segments, steps and control bound must be positive".into()));
    }
    let u_zeta = u(&zeta.x, zeta.t);
    let (mut c_ok, mut div_ok, mut f_ok, mut max_ok) = (true, true, true, true);
    for p in domain.sample(g, cfg.hypothesis_samples.max(1), &cfg.distance)? {
        let c = op.c(&p.x, p.t);
        c_ok &= c <= 0.0;
        div_ok &= op.div_b(&p.x, p.t) - c >= 0.0;
        f_ok &= f(&p.x, p.t) >= 0.0;
        max_ok &= u(&p.x, p.t) <= u_zeta + cfg.tol;
    }
    let hypotheses = Hypotheses {
        c_nonpositive: c_ok,
        div_b_minus_c_nonnegative: div_ok,
        f_nonnegative: f_ok,
        zeta_is_max: max_ok,
        u_zeta_nonnegative: u_zeta >= 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut deviation: f64 = 0.0;
    let mut f_mismatch: f64 = 0.0;
    let mut reached = 0;
    let mut truncated_paths = 0;
    for _ in 0..cfg.paths {
        let controls: Vec<Vec<f64>> = (0..cfg.segments)
            .map(|_| (0..g.m1()).map(|_| cfg.control_bound * rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let path = admissible_reach(g, zeta, &controls, cfg.duration, cfg.steps, Some(domain), &cfg.distance)?;
        truncated_paths += path.truncated as usize;
        for p in &path.points[1..] {
            deviation = deviation.max((u(&p.x, p.t) - u_zeta).abs());
            f_mismatch = f_mismatch.max((f(&p.x, p.t) - u_zeta * op.c(&p.x, p.t)).abs());
            reached += 1;
        }
    }
    let violations = hypotheses.violations();
    Ok(ProbeReport { u_zeta, deviation, f_mismatch, reached, truncated_paths, hypotheses, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint { x: x.to_vec(), t }
    }

    #[test]
    fn boxes_follow_definitions() {
        let g = CarnotGroup::euclidean(1);
        let b = build_boxes(&g, &pt(&[0.0], 0.0), 1.0, &CylinderShape::default(), Some(&ParabolicConstants::default())).unwrap();
        assert_eq!((b.q_plus.t_lo, b.q_plus.t_hi), (-0.2, 0.0));
        assert_eq!((b.q_minus.t_lo, b.q_minus.t_hi), (-0.8, -0.4));
        let d = b.d.unwrap();
        assert_eq!(d.t, -0.25);
        assert_eq!(d.ball.radius, 0.5);
        let bad = CylinderShape { nu: 0.5, eta: 0.4, mu: 0.8, theta: 0.5 };
        assert!(matches!(build_boxes(&g, &pt(&[0.0], 0.0), 1.0, &bad, None), Err(HarnackError::Params(_))));
    }

    #[test]
    fn heisenberg_ball_samples_scale() {
        let g = CarnotGroup::heisenberg1();
        let dc = DistanceConfig::default();
        let x0 = [0.1, -0.2, 0.05];
        let unit = Ball { center: vec![0.0; 3], radius: 1.0 }.sample(&g, 200, &dc).unwrap();
        let small = Ball { center: x0.to_vec(), radius: 0.3 }.sample(&g, 200, &dc).unwrap();
        for (a, b) in unit.iter().zip(&small).skip(1) {
            let img = g.op(&x0, &g.dilate(0.3, a).unwrap());
            assert!(img.iter().zip(b).all(|(p, q)| (p - q).abs() < 1e-14));
            assert!(ball_distance(&g, &x0, b, &dc).unwrap() <= 0.3 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn vertical_chain_length() {
        let g = CarnotGroup::euclidean(1);
        let cfg = ChainConfig { r0: 0.3, ..Default::default() };
        let c = harnack_chain(&g, &pt(&[0.1], -0.1), &pt(&[0.1], -0.7), &cfg).unwrap();
        assert_eq!(c.m, (0.6f64 / (0.25 * 0.09)).ceil() as usize);
        assert!(c.gaps.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn chain_gaps_and_monotone_length() {
        let g = CarnotGroup::euclidean(1);
        let cfg = ChainConfig { eps1: 0.25, theta1: 0.5, r0: 0.4, ..Default::default() };
        let c = harnack_chain(&g, &pt(&[0.0], -0.3), &pt(&[0.3], -0.7), &cfg).unwrap();
        let primam: f64 = 0.25 * 0.09 / (0.25 * 0.4);
        let floor = 0.4 / (0.25 * 0.16);
        assert_eq!(c.m, primam.max(floor).ceil() as usize);
        assert!(c.gap_ratio(0.5) <= 1.0 + 1e-9);
        assert_eq!(c.points[0].t, -0.3);
        assert_eq!(c.points[c.m].x, vec![0.3]);
        let mut last = usize::MAX;
        for dt in [0.2, 0.3, 0.4, 0.5] {
            let m = (cfg.eps1 * 0.09 / (cfg.theta1 * cfg.theta1 * dt)).ceil() as usize;
            assert!(m <= last);
            last = m;
        }
    }

    #[test]
    fn constant_solution_ratios_are_one() {
        let g = CarnotGroup::heisenberg1();
        let dc = DistanceConfig::default();
        let one = |_: &[f64], _: f64| 1.0;
        let z0 = pt(&[0.0; 3], 0.0);
        let p = parabolic_harnack_check(&g, &one, &z0, 0.5, &ParabolicConstants::default(), 50, &dc).unwrap();
        assert_eq!(p.ratio, 1.0);
        let b = build_boxes(&g, &z0, 0.5, &CylinderShape::default(), None).unwrap();
        let i = invariant_harnack_check(&g, &one, &b, 1.0, 50, &dc).unwrap();
        assert!(i.pass && i.ratio == 1.0);
        let neg = |_: &[f64], _: f64| -1.0;
        assert!(matches!(invariant_harnack_check(&g, &neg, &b, 1.0, 50, &dc), Err(HarnackError::Negative { .. })));
    }

    #[test]
    fn admissible_paths() {
        let dc = DistanceConfig::default();
        let g = CarnotGroup::euclidean(2);
        let p = admissible_reach(&g, &pt(&[0.0, 0.0], 0.0), &vec![vec![1.0, 0.0]; 4], 0.4, 5, None, &dc).unwrap();
        let end = p.points.last().unwrap();
        assert!((end.x[0] - 0.4).abs() < 1e-14 && end.x[1].abs() < 1e-14 && (end.t + 0.4).abs() < 1e-14);
        let still = admissible_reach(&g, &pt(&[0.3, 0.1], 1.0), &vec![vec![0.0, 0.0]; 3], 0.3, 2, None, &dc).unwrap();
        assert!(still.points.iter().all(|q| q.x == vec![0.3, 0.1]));
        let h = CarnotGroup::heisenberg1();
        let circle = |k: usize| -> Vec<Vec<f64>> {
            (0..k).map(|i| {
                let a = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / k as f64;
                vec![a.cos(), a.sin()]
            }).collect()
        };
        // unit-speed closed loop of length 1 encloses area ~ 1/(4 pi)
        let z = |k: usize| admissible_reach(&h, &pt(&[0.0; 3], 0.0), &circle(k), 1.0, 4, None, &dc).unwrap().points.last().unwrap().x[2];
        let target = 1.0 / (4.0 * std::f64::consts::PI);
        assert!(z(64) > 0.0);
        assert!((z(128) - target).abs() < (z(64) - target).abs());
        assert!((z(128) - target).abs() < 1e-4);
        let dom = Cylinder { ball: Ball { center: vec![0.0; 3], radius: 0.2 }, t_lo: -1.0, t_hi: 0.0 };
        let cut = admissible_reach(&h, &pt(&[0.0; 3], 0.0), &[vec![1.0, 0.0]], 0.5, 10, Some(&dom), &dc).unwrap();
        assert!(cut.truncated && cut.points.len() == 5);
    }

    #[test]
    fn probe_constant_and_negative_control() {
        let dom = Cylinder { ball: Ball { center: vec![0.0], radius: 1.0 }, t_lo: -1.0, t_hi: 0.1 };
        let zeta = pt(&[0.0], 0.0);
        let heat = Operator::heat("euclidean1", 0.0).unwrap();
        let one = |_: &[f64], _: f64| 1.0;
        let zero = |_: &[f64], _: f64| 0.0;
        let rep = max_principle_probe(&heat, &one, &zero, &zeta, &dom, &ProbeConfig::default()).unwrap();
        assert!(rep.deviation <= 1e-9 && rep.hypotheses.all() && rep.reached > 0);
        let damped = Operator::heat("euclidean1", -1.0).unwrap();
        let minus = |_: &[f64], _: f64| -1.0;
        let rep = max_principle_probe(&damped, &one, &minus, &zeta, &dom, &ProbeConfig::default()).unwrap();
        assert!(rep.deviation <= 1e-9 && rep.f_mismatch <= 1e-12);
        assert_eq!(rep.violations, vec!["f >= 0"]);
        let lin = |x: &[f64], _: f64| x[0];
        let rep = max_principle_probe(&heat, &lin, &zero, &zeta, &dom, &ProbeConfig::default()).unwrap();
        assert!(rep.deviation > 0.1 && !rep.hypotheses.zeta_is_max);
    }
}
