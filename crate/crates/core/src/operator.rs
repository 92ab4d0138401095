//! Operators `sum X_i(a_ij X_j) + sum b_i X_i + c - d_t` with coefficient fields.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distance::{gauge, parabolic_distance, random_point, DistanceConfig};
use crate::group::{CarnotGroup, GroupDoc, GroupError, SpaceTimePoint};

/// A real coefficient `f(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    Const {
        value: f64,
    },
    /// `base + amp exp(-|x - center|^2 / width^2) (1 + time_amp sin(time_freq t))`.
    Bump {
        base: f64,
        amp: f64,
        center: Vec<f64>,
        width: f64,
        #[serde(default)]
        time_amp: f64,
        #[serde(default)]
        time_freq: f64,
    },
}

impl Default for ScalarField {
    fn default() -> Self {
        ScalarField::Const { value: 0.0 }
    }
}

impl ScalarField {
    pub fn constant(value: f64) -> Self {
        ScalarField::Const { value }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, ScalarField::Const { .. })
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            ScalarField::Const { value } => *value,
            ScalarField::Bump { base, amp, center, width, time_amp, time_freq } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                base + amp * (-r2 / (width * width)).exp() * (1.0 + time_amp * (time_freq * t).sin())
            }
        }
    }

    /// Euclidean gradient in `x`.
    pub fn grad(&self, x: &[f64], t: f64) -> Vec<f64> {
        match self {
            ScalarField::Const { .. } => vec![0.0; x.len()],
            ScalarField::Bump { amp, center, width, time_amp, time_freq, .. } => {
                let w2 = width * width;
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let s = amp * (-r2 / w2).exp() * (1.0 + time_amp * (time_freq * t).sin());
                x.iter().zip(center).map(|(a, c)| -2.0 * (a - c) / w2 * s).collect()
            }
        }
    }

    fn check(&self, n: usize) -> Result<(), String> {
        match self {
            ScalarField::Const { value } if !value.is_finite() => Err("non-finite constant".into()),
            ScalarField::Bump { center, .. } if center.len() != n => {
                Err(format!("bump center has length {}, expected {n}", center.len()))
            }
            ScalarField::Bump { width, .. } if !(*width > 0.0) => Err("bump width must be positive".into()),
            _ => Ok(()),
        }
    }
}

/// A registered group name or an inline group description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupRef {
    Name(String),
    Doc(GroupDoc),
}

impl GroupRef {
    pub fn resolve(&self) -> Result<CarnotGroup, GroupError> {
        match self {
            GroupRef::Name(n) => CarnotGroup::from_name(n),
            GroupRef::Doc(d) => CarnotGroup::from_doc(d),
        }
    }
}

/// How the Lie derivatives `X_j a_ij` and `X_i b_i` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    /// From the closed-form gradients of the coefficient fields.
    #[default]
    Analytic,
    /// Central differences along the integral curves of `X_j`.
    FiniteDifference,
    /// Not declared: the forward operator falls back to finite differences and
    /// adjoint constructions are refused.
    None,
}

/// Serializable operator description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub group: GroupRef,
    pub a: Vec<Vec<ScalarField>>,
    #[serde(default)]
    pub b: Vec<ScalarField>,
    #[serde(default)]
    pub c: ScalarField,
    pub lambda: f64,
    #[serde(rename = "M1")]
    pub m1_bound: f64,
    #[serde(rename = "M2")]
    pub m2_bound: f64,
    pub alpha: f64,
    #[serde(default)]
    pub derivatives: DerivativeMode,
}

#[derive(Debug, thiserror::Error)]
pub enum OperatorError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("invalid operator: {0}")]
    Invalid(String),
    #[error("operator JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("adjoint needs declared coefficient derivatives")]
    MissingDerivatives,
}

/// Coefficients of an operator in nondivergence form
/// `sum a_ij X_i X_j + sum drift_i X_i + c - s d_t`, where `s = 1` for forward
/// operators; backward ones are handled by time reversal.
pub trait Coefficients: Sync {
    fn group(&self) -> &CarnotGroup;
    fn a(&self, x: &[f64], t: f64) -> DMatrix<f64>;
    /// `a` into a fixed buffer, for `m1 <= 3`.
    fn a_small(&self, x: &[f64], t: f64, out: &mut [[f64; 3]; 3]) {
        let a = self.a(x, t);
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                out[i][j] = a[(i, j)];
            }
        }
    }
    fn drift(&self, x: &[f64], t: f64) -> Vec<f64>;
    fn c(&self, x: &[f64], t: f64) -> f64;
    /// Whether `a` does not depend on `(x, t)`.
    fn constant_principal(&self) -> bool;
    /// Whether drift and `c` vanish identically.
    fn no_lower_order(&self) -> bool;
    /// Whether `c` is constant, with its value.
    fn constant_c(&self) -> Option<f64>;
    fn lambda(&self) -> f64;
    fn alpha(&self) -> f64;
}

/// Validated operator bound to its group.
#[derive(Debug, Clone)]
pub struct Operator {
    pub spec: OperatorSpec,
    group: CarnotGroup,
}

impl Operator {
    pub fn new(spec: OperatorSpec) -> Result<Self, OperatorError> {
        let group = spec.group.resolve()?;
        let m = group.m1();
        let n = group.dim();
        if spec.a.len() != m || spec.a.iter().any(|r| r.len() != m) {
            return Err(OperatorError::Invalid(format!("a must be {m}x{m}")));
        }
        if !spec.b.is_empty() && spec.b.len() != m {
            return Err(OperatorError::Invalid(format!("b must have length {m}")));
        }
        for i in 0..m {
            for j in 0..m {
                if spec.a[i][j] != spec.a[j][i] {
                    return Err(OperatorError::Invalid("a must be symmetric".into()));
                }
            }
        }
        for f in spec.a.iter().flatten().chain(&spec.b).chain(std::iter::once(&spec.c)) {
            f.check(n).map_err(OperatorError::Invalid)?;
        }
        if !(spec.lambda >= 1.0) {
            return Err(OperatorError::Invalid("lambda must be >= 1".into()));
        }
        if !(spec.alpha > 0.0 && spec.alpha <= 1.0) {
            return Err(OperatorError::Invalid("alpha must lie in (0, 1]".into()));
        }
        if !(spec.m1_bound > 0.0) || !(spec.m2_bound > 0.0) {
            return Err(OperatorError::Invalid("M1 and M2 must be positive".into()));
        }
        Ok(Operator { spec, group })
    }

    pub fn from_json(s: &str) -> Result<Self, OperatorError> {
        let spec: OperatorSpec = serde_json::from_str(s)
            .map_err(|e| OperatorError::Json { line: e.line(), column: e.column(), message: e.to_string() })?;
        Self::new(spec)
    }

    /// Constant-coefficient operator `sum a_ij X_i X_j + sum b_i X_i + c - d_t`.
    pub fn constant(group: &str, a: &DMatrix<f64>, b: &[f64], c: f64) -> Result<Self, OperatorError> {
        let m = a.nrows();
        let eig = nalgebra::SymmetricEigen::new(a.clone()).eigenvalues;
        let lmax = eig.iter().cloned().fold(0.0, f64::max);
        let lmin = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let lambda = lmax.max(1.0 / lmin.max(1e-300)).max(1.0);
        let sup = a.amax().max(b.iter().fold(0.0, |s: f64, v| s.max(v.abs()))).max(c.abs()).max(1.0);
        Self::new(OperatorSpec {
            group: GroupRef::Name(group.into()),
            a: (0..m).map(|i| (0..m).map(|j| ScalarField::constant(a[(i, j)])).collect()).collect(),
            b: b.iter().map(|&v| ScalarField::constant(v)).collect(),
            c: ScalarField::constant(c),
            lambda,
            m1_bound: sup,
            m2_bound: 1.0,
            alpha: 1.0,
            derivatives: DerivativeMode::Analytic,
        })
    }

    /// Heat operator `Delta_G + c - d_t` of the named group.
    pub fn heat(group: &str, c: f64) -> Result<Self, OperatorError> {
        let g = CarnotGroup::from_name(group)?;
        Self::constant(group, &DMatrix::identity(g.m1(), g.m1()), &[], c)
    }

    pub fn group(&self) -> &CarnotGroup {
        &self.group
    }

    pub fn b(&self, x: &[f64], t: f64) -> Vec<f64> {
        if self.spec.b.is_empty() {
            vec![0.0; self.group.m1()]
        } else {
            self.spec.b.iter().map(|f| f.eval(x, t)).collect()
        }
    }

    /// `X_i f` for a coefficient field.
    fn lie_derivative(&self, f: &ScalarField, i: usize, x: &[f64], t: f64) -> f64 {
        if f.is_const() {
            return 0.0;
        }
        match self.spec.derivatives {
            DerivativeMode::Analytic => {
                let grad = f.grad(x, t);
                self.group.fields()[i].eval(x).iter().zip(&grad).map(|(p, g)| p * g).sum()
            }
            DerivativeMode::FiniteDifference | DerivativeMode::None => {
                let h = 1e-4 * (1.0 + gauge(&self.group, x));
                let xp = self.group.flow(i, x, h);
                let xm = self.group.flow(i, x, -h);
                (f.eval(&xp, t) - f.eval(&xm, t)) / (2.0 * h)
            }
        }
    }

    /// `(sum_j X_j a_ij)_i`.
    pub fn xa(&self, x: &[f64], t: f64) -> Vec<f64> {
        let m = self.group.m1();
        (0..m).map(|i| (0..m).map(|j| self.lie_derivative(&self.spec.a[i][j], j, x, t)).sum()).collect()
    }

    /// `sum_i X_i b_i`.
    pub fn div_b(&self, x: &[f64], t: f64) -> f64 {
        self.spec.b.iter().enumerate().map(|(i, f)| self.lie_derivative(f, i, x, t)).sum()
    }

    /// Time-reversed adjoint: `Gamma*(x, t; xi, tau)` equals the fundamental solution
    /// of the returned forward operator at `(x, -t; xi, -tau)`.
    pub fn reversed_adjoint(&self) -> Result<ReversedAdjoint<'_>, OperatorError> {
        if self.spec.derivatives == DerivativeMode::None {
            return Err(OperatorError::MissingDerivatives);
        }
        Ok(ReversedAdjoint { op: self })
    }

    /// Samples ellipticity, sup bounds and Hölder quotients against the declared metadata.
    pub fn validate(&self, samples: usize, seed: u64) -> ValidationReport {
        let g = &self.group;
        let m = g.m1();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_eig = f64::INFINITY;
        let mut max_eig: f64 = 0.0;
        let mut sup: f64 = 0.0;
        let mut holder: f64 = 0.0;
        let dcfg = DistanceConfig { restarts: 2, ..Default::default() };
        for _ in 0..samples {
            let x = random_point(g, &mut rng, 1.5);
            let t = rng.gen_range(-1.0..1.0);
            let a = Coefficients::a(self, &x, t);
            let eig = nalgebra::SymmetricEigen::new(a.clone()).eigenvalues;
            min_eig = min_eig.min(eig.min());
            max_eig = max_eig.max(eig.max());
            let b = self.b(&x, t);
            let c = self.spec.c.eval(&x, t);
            sup = sup.max(a.amax()).max(b.iter().fold(0.0, |s: f64, v| s.max(v.abs()))).max(c.abs());
            // nearby partner for the Hölder quotient
            let dx: Vec<f64> = g.sigma().iter().map(|&s| 0.3f64.powi(s as i32) * rng.gen_range(-1.0..1.0)).collect();
            let y = g.op(&x, &dx);
            let s = t + 0.09 * rng.gen_range(-1.0..1.0);
            let z = SpaceTimePoint::new(x.clone(), t);
            let zeta = SpaceTimePoint::new(y.clone(), s);
            if let Ok((d, _)) = parabolic_distance(g, &z, &zeta, &dcfg) {
                if d > 1e-9 {
                    let a2 = Coefficients::a(self, &y, s);
                    let b2 = self.b(&y, s);
                    let mut diff = (a - a2).amax().max((c - self.spec.c.eval(&y, s)).abs());
                    for i in 0..m {
                        diff = diff.max((b[i] - b2[i]).abs());
                    }
                    holder = holder.max(diff / d.powf(self.spec.alpha));
                }
            }
        }
        let l = self.spec.lambda;
        ValidationReport {
            min_eig,
            max_eig,
            sup,
            holder_quotient: holder,
            ellipticity_ok: min_eig >= 1.0 / l - 1e-12 && max_eig <= l + 1e-12,
            sup_ok: sup <= self.spec.m1_bound,
            holder_ok: holder <= self.spec.m2_bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub min_eig: f64,
    pub max_eig: f64,
    pub sup: f64,
    pub holder_quotient: f64,
    pub ellipticity_ok: bool,
    pub sup_ok: bool,
    pub holder_ok: bool,
}

impl Coefficients for Operator {
    fn group(&self) -> &CarnotGroup {
        &self.group
    }

    fn a(&self, x: &[f64], t: f64) -> DMatrix<f64> {
        let m = self.group.m1();
        DMatrix::from_fn(m, m, |i, j| self.spec.a[i][j].eval(x, t))
    }

    fn a_small(&self, x: &[f64], t: f64, out: &mut [[f64; 3]; 3]) {
        for (i, row) in self.spec.a.iter().enumerate() {
            for (j, f) in row.iter().enumerate() {
                out[i][j] = f.eval(x, t);
            }
        }
    }

    fn drift(&self, x: &[f64], t: f64) -> Vec<f64> {
        let b = self.b(x, t);
        self.xa(x, t).iter().zip(&b).map(|(p, q)| p + q).collect()
    }

    fn c(&self, x: &[f64], t: f64) -> f64 {
        self.spec.c.eval(x, t)
    }

    fn constant_principal(&self) -> bool {
        self.spec.a.iter().flatten().all(ScalarField::is_const)
    }

    fn no_lower_order(&self) -> bool {
        self.constant_principal()
            && self.spec.b.iter().all(|f| *f == ScalarField::constant(0.0))
            && self.spec.c == ScalarField::constant(0.0)
    }

    fn constant_c(&self) -> Option<f64> {
        match self.spec.c {
            ScalarField::Const { value } => Some(value),
            _ => None,
        }
    }

    fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    fn alpha(&self) -> f64 {
        self.spec.alpha
    }
}

/// The adjoint `sum X_i(a_ij X_j) - sum b_i X_i + (c - sum X_i b_i) + d_t` under `t -> -t`.
#[derive(Debug, Clone, Copy)]
pub struct ReversedAdjoint<'a> {
    op: &'a Operator,
}

impl Coefficients for ReversedAdjoint<'_> {
    fn group(&self) -> &CarnotGroup {
        &self.op.group
    }

    fn a(&self, x: &[f64], t: f64) -> DMatrix<f64> {
        Coefficients::a(self.op, x, -t)
    }

    fn a_small(&self, x: &[f64], t: f64, out: &mut [[f64; 3]; 3]) {
        self.op.a_small(x, -t, out)
    }

    fn drift(&self, x: &[f64], t: f64) -> Vec<f64> {
        let b = self.op.b(x, -t);
        self.op.xa(x, -t).iter().zip(&b).map(|(p, q)| p - q).collect()
    }

    fn c(&self, x: &[f64], t: f64) -> f64 {
        self.op.spec.c.eval(x, -t) - self.op.div_b(x, -t)
    }

    fn constant_principal(&self) -> bool {
        self.op.constant_principal()
    }

    fn no_lower_order(&self) -> bool {
        self.op.no_lower_order()
    }

    fn constant_c(&self) -> Option<f64> {
        let bconst = self.op.spec.b.iter().all(ScalarField::is_const);
        match (bconst, self.op.spec.c.clone()) {
            (true, ScalarField::Const { value }) => Some(value),
            _ => None,
        }
    }

    fn lambda(&self) -> f64 {
        self.op.spec.lambda
    }

    fn alpha(&self) -> f64 {
        self.op.spec.alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump_op(derivatives: DerivativeMode) -> Operator {
        Operator::new(OperatorSpec {
            group: GroupRef::Name("heisenberg1".into()),
            a: vec![
                vec![
                    ScalarField::Bump { base: 1.0, amp: 0.1, center: vec![0.2, 0.0, 0.1], width: 0.7, time_amp: 0.0, time_freq: 0.0 },
                    ScalarField::constant(0.0),
                ],
                vec![ScalarField::constant(0.0), ScalarField::constant(1.0)],
            ],
            b: vec![ScalarField::constant(0.0), ScalarField::Bump { base: 0.0, amp: 0.3, center: vec![0.0; 3], width: 1.0, time_amp: 0.5, time_freq: 2.0 }],
            c: ScalarField::constant(-0.5),
            lambda: 1.2,
            m1_bound: 2.0,
            m2_bound: 5.0,
            alpha: 1.0,
            derivatives,
        })
        .unwrap()
    }

    #[test]
    fn analytic_and_fd_derivatives_agree() {
        let a = bump_op(DerivativeMode::Analytic);
        let f = bump_op(DerivativeMode::FiniteDifference);
        let x = [0.3, -0.4, 0.2];
        for (p, q) in a.xa(&x, 0.3).iter().zip(f.xa(&x, 0.3)) {
            assert!((p - q).abs() < 1e-7);
        }
        assert!((a.div_b(&x, 0.3) - f.div_b(&x, 0.3)).abs() < 1e-7);
    }

    #[test]
    fn json_roundtrip_and_errors() {
        let op = bump_op(DerivativeMode::Analytic);
        let s = serde_json::to_string(&op.spec).unwrap();
        let back = Operator::from_json(&s).unwrap();
        assert_eq!(back.spec, op.spec);
        match Operator::from_json("{\"group\": \"heisenberg1\",\n \"a\": oops}") {
            Err(OperatorError::Json { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let mut bad = op.spec.clone();
        bad.a[0][1] = ScalarField::constant(0.3);
        assert!(Operator::new(bad).is_err());
    }

    #[test]
    fn adjoint_refused_without_derivatives() {
        assert!(bump_op(DerivativeMode::None).reversed_adjoint().is_err());
        let op = bump_op(DerivativeMode::Analytic);
        let adj = op.reversed_adjoint().unwrap();
        let x = [0.1, 0.2, 0.3];
        assert!((adj.c(&x, 0.4) - (-0.5 - op.div_b(&x, -0.4))).abs() < 1e-15);
    }

    #[test]
    fn validation_of_declared_bounds() {
        let op = bump_op(DerivativeMode::Analytic);
        let r = op.validate(30, 1);
        assert!(r.ellipticity_ok && r.sup_ok && r.holder_ok, "{r:?}");
        let mut spec = op.spec.clone();
        spec.lambda = 1.01;
        let r = Operator::new(spec).unwrap().validate(30, 1);
        assert!(!r.ellipticity_ok);
    }
}
