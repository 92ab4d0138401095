//! Carnot groups in exponential coordinates.
//!
//! A group is stored as its stratification, the dilation exponents, the
//! generating vector fields `X_i = sum_j phi^i_j(x) d/dx_j` and the polynomial
//! group law. Built-in instances: `euclideanN`, `heisenberg1` and the free
//! step-2 groups `free2_m` on `m` generators.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::poly::{CompiledPoly, Poly, Term};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dilation factor must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("generator index {index} out of range (m1 = {m1})")]
    IndexOutOfRange { index: usize, m1: usize },
    #[error("unknown group '{0}'")]
    UnknownGroup(String),
    #[error("invalid group spec: {0}")]
    InvalidSpec(String),
    #[error("malformed group JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
}

/// Which structural family a group belongs to; kernels and `T_A` dispatch on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Euclidean,
    /// Free step-2 group on `generators` generators (H^1 when it is 2).
    FreeStep2 { generators: usize },
    Custom,
}

/// A vector field given by its `N` polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(pub Vec<Poly>);

impl VectorField {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.0.iter().map(|p| p.eval(x)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Poly::is_zero)
    }
}

/// A space-time point `z = (x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        SpaceTimePoint { x, t }
    }
}

/// Serializable group description `{name, N, layers, sigma, fields, compose}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDoc {
    pub name: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub layers: Vec<usize>,
    pub sigma: Vec<u32>,
    pub fields: Vec<Vec<Vec<Term>>>,
    pub compose: Vec<Vec<Term>>,
}

#[derive(Debug, Clone)]
pub struct CarnotGroup {
    name: String,
    n: usize,
    layers: Vec<usize>,
    sigma: Vec<u32>,
    fields: Vec<VectorField>,
    compose_rule: Vec<Poly>,
    kind: GroupKind,
    cfields: Vec<Vec<CompiledPoly>>,
    cjac: Vec<Vec<Vec<CompiledPoly>>>,
    ccompose: Vec<CompiledPoly>,
}

/// Result of the bracket-generating check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HormanderReport {
    pub rank: usize,
    /// Bracket length at which rank `N` was first reached.
    pub step_reached: Option<usize>,
    pub singular_values: Vec<f64>,
    pub violation: bool,
}

impl CarnotGroup {
    /// Euclidean `R^n` with `X_i = d/dx_i`.
    pub fn euclidean(n: usize) -> Self {
        assert!(n >= 1, "dimension must be positive");
        let fields = (0..n)
            .map(|i| {
                VectorField((0..n).map(|j| Poly::constant(n, if i == j { 1.0 } else { 0.0 })).collect())
            })
            .collect();
        let compose = (0..n).map(|j| Poly::var(2 * n, j).add(&Poly::var(2 * n, n + j))).collect();
        Self::assemble(format!("euclidean{n}"), n, vec![n], vec![1; n], fields, compose, GroupKind::Euclidean)
    }

    /// The first Heisenberg group, `X_1 = d1 - (x2/2) d3`, `X_2 = d2 + (x1/2) d3`.
    pub fn heisenberg1() -> Self {
        Self::free_step2(2)
    }

    /// Free step-2 group on `m >= 2` generators. Second-layer coordinates are
    /// indexed by pairs `j < k` in lexicographic order.
    pub fn free_step2(m: usize) -> Self {
        assert!(m >= 2, "free step-2 group needs at least two generators");
        let pairs = pair_list(m);
        let n = m + pairs.len();
        let mut fields = Vec::with_capacity(m);
        for i in 0..m {
            let mut comps: Vec<Poly> =
                (0..n).map(|j| Poly::constant(n, if i == j { 1.0 } else { 0.0 })).collect();
            for (p, &(j, k)) in pairs.iter().enumerate() {
                if i == j {
                    comps[m + p] = Poly::monomial(n, k, 1, -0.5);
                } else if i == k {
                    comps[m + p] = Poly::monomial(n, j, 1, 0.5);
                }
            }
            fields.push(VectorField(comps));
        }
        let nn = 2 * n;
        let mut compose: Vec<Poly> = (0..n).map(|j| Poly::var(nn, j).add(&Poly::var(nn, n + j))).collect();
        for (p, &(j, k)) in pairs.iter().enumerate() {
            let cross = Poly::var(nn, j)
                .mul(&Poly::var(nn, n + k))
                .sub(&Poly::var(nn, k).mul(&Poly::var(nn, n + j)))
                .scale(0.5);
            compose[m + p] = compose[m + p].add(&cross);
        }
        let mut sigma = vec![1; m];
        sigma.extend(std::iter::repeat(2).take(pairs.len()));
        let name = if m == 2 { "heisenberg1".to_string() } else { format!("free2_{m}") };
        Self::assemble(name, n, vec![m, pairs.len()], sigma, fields, compose, GroupKind::FreeStep2 { generators: m })
    }

    /// Registry lookup: `euclideanN`, `heisenberg1`, `free2_m`.
    pub fn from_name(name: &str) -> Result<Self, GroupError> {
        if name == "heisenberg1" {
            return Ok(Self::heisenberg1());
        }
        if let Some(rest) = name.strip_prefix("euclidean") {
            if let Ok(n) = rest.parse::<usize>() {
                if (1..=64).contains(&n) {
                    return Ok(Self::euclidean(n));
                }
            }
        }
        if let Some(rest) = name.strip_prefix("free2_") {
            if let Ok(m) = rest.parse::<usize>() {
                if (2..=8).contains(&m) {
                    return Ok(Self::free_step2(m));
                }
            }
        }
        Err(GroupError::UnknownGroup(name.to_string()))
    }

    fn assemble(
        name: String,
        n: usize,
        layers: Vec<usize>,
        sigma: Vec<u32>,
        fields: Vec<VectorField>,
        compose_rule: Vec<Poly>,
        kind: GroupKind,
    ) -> Self {
        let cfields = fields.iter().map(|f| f.0.iter().map(Poly::compile).collect()).collect();
        let cjac = fields
            .iter()
            .map(|f| f.0.iter().map(|p| (0..n).map(|k| p.derivative(k).compile()).collect()).collect())
            .collect();
        let ccompose = compose_rule.iter().map(Poly::compile).collect();
        CarnotGroup { name, n, layers, sigma, fields, compose_rule, kind, cfields, cjac, ccompose }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn layers(&self) -> &[usize] {
        &self.layers
    }
    pub fn sigma(&self) -> &[u32] {
        &self.sigma
    }
    pub fn kind(&self) -> GroupKind {
        self.kind
    }
    /// Number of generators `m_1`.
    pub fn m1(&self) -> usize {
        self.layers[0]
    }
    /// Step `kappa` of the stratification.
    pub fn step(&self) -> usize {
        self.layers.len()
    }
    /// Homogeneous dimension `Q = sum_k k m_k`.
    pub fn homogeneous_dim(&self) -> f64 {
        self.sigma.iter().map(|&s| s as f64).sum()
    }
    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    fn check_len(&self, x: &[f64]) -> Result<(), GroupError> {
        if x.len() != self.n {
            return Err(GroupError::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    pub fn compose(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, GroupError> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(self.op(x, y))
    }

    /// Group law without dimension checks.
    pub fn op(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match self.kind {
            GroupKind::Euclidean => x.iter().zip(y).map(|(a, b)| a + b).collect(),
            _ => {
                let mut xy = Vec::with_capacity(2 * self.n);
                xy.extend_from_slice(x);
                xy.extend_from_slice(y);
                self.ccompose.iter().map(|p| p.eval(&xy)).collect()
            }
        }
    }

    /// `x^{-1} = -x` in exponential coordinates.
    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>, GroupError> {
        self.check_len(x)?;
        Ok(x.iter().map(|v| -v).collect())
    }

    pub fn dilate(&self, r: f64, x: &[f64]) -> Result<Vec<f64>, GroupError> {
        self.check_len(x)?;
        if !(r > 0.0) {
            return Err(GroupError::NonPositiveRadius(r));
        }
        Ok(self.dil(r, x))
    }

    pub(crate) fn dil(&self, r: f64, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.sigma).map(|(v, &s)| v * r.powi(s as i32)).collect()
    }

    /// `x^{-1} o y`, the displacement seen from `x`.
    pub fn relative(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let xi: Vec<f64> = x.iter().map(|v| -v).collect();
        self.op(&xi, y)
    }

    pub fn vector_field_eval(&self, i: usize, x: &[f64]) -> Result<Vec<f64>, GroupError> {
        self.check_len(x)?;
        if i >= self.m1() {
            return Err(GroupError::IndexOutOfRange { index: i, m1: self.m1() });
        }
        Ok(self.cfields[i].iter().map(|p| p.eval(x)).collect())
    }

    /// Flow of `X_i` for time `s` from `x`; the generators are left-invariant
    /// with `X_i(0) = e_i`, so the flow is right multiplication by `s e_i`.
    pub fn flow(&self, i: usize, x: &[f64], s: f64) -> Vec<f64> {
        let mut e = vec![0.0; self.n];
        e[i] = s;
        self.op(x, &e)
    }

    /// Right multiplication by a horizontal vector `sum_i h_i e_i`.
    pub fn flow_horizontal(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut e = vec![0.0; self.n];
        e[..h.len()].copy_from_slice(h);
        self.op(x, &e)
    }

    /// `F(x) = sum_i alpha_i X_i(x)`, with optional Jacobians in `x`
    /// (row-major `N x N`) and in `alpha` (row-major `N x m1`).
    pub fn controlled_rhs(
        &self,
        x: &[f64],
        alpha: &[f64],
        f: &mut [f64],
        mut dx: Option<&mut [f64]>,
        mut dalpha: Option<&mut [f64]>,
    ) {
        let n = self.n;
        let m = self.m1();
        f.iter_mut().for_each(|v| *v = 0.0);
        if let Some(d) = dx.as_deref_mut() {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..m {
            let a = alpha[i];
            for j in 0..n {
                let phi = &self.cfields[i][j];
                if phi.is_zero() {
                    if let Some(da) = dalpha.as_deref_mut() {
                        da[j * m + i] = 0.0;
                    }
                    continue;
                }
                let v = phi.eval(x);
                f[j] += a * v;
                if let Some(da) = dalpha.as_deref_mut() {
                    da[j * m + i] = v;
                }
                if let Some(d) = dx.as_deref_mut() {
                    for k in 0..n {
                        let dp = &self.cjac[i][j][k];
                        if !dp.is_zero() {
                            d[j * n + k] += a * dp.eval(x);
                        }
                    }
                }
            }
        }
    }

    /// Symbolic bracket `[V, W]_j = sum_k V_k d_k W_j - W_k d_k V_j`.
    pub fn lie_bracket(&self, v: &VectorField, w: &VectorField) -> VectorField {
        let n = self.n;
        let comps = (0..n)
            .map(|j| {
                let mut acc = Poly::zero(n);
                for k in 0..n {
                    acc = acc.add(&v.0[k].mul(&w.0[j].derivative(k)));
                    acc = acc.sub(&w.0[k].mul(&v.0[j].derivative(k)));
                }
                acc
            })
            .collect();
        VectorField(comps)
    }

    pub fn lie_bracket_at(&self, v: &VectorField, w: &VectorField, x: &[f64]) -> Result<Vec<f64>, GroupError> {
        self.check_len(x)?;
        Ok(self.lie_bracket(v, w).eval(x))
    }

    /// Stacks the generators and their iterated brackets at `x` and reports the
    /// numerical rank after each bracket length.
    pub fn check_hormander(&self, x: &[f64]) -> Result<HormanderReport, GroupError> {
        self.check_len(x)?;
        let n = self.n;
        let max_step = self.step().max(n);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut level: Vec<VectorField> = self.fields.clone();
        let mut step_reached = None;
        let mut rank = 0;
        let mut sv = Vec::new();
        for step in 1..=max_step {
            rows.extend(level.iter().map(|f| f.eval(x)));
            let mat = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
            let svd = mat.svd(false, false);
            let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let smax = s.first().copied().unwrap_or(0.0);
            rank = s.iter().filter(|&&v| v > 1e-9 * smax.max(1.0)).count();
            sv = s;
            if rank == n {
                step_reached = Some(step);
                break;
            }
            let mut next = Vec::new();
            for gen in &self.fields {
                for f in &level {
                    let b = self.lie_bracket(gen, f);
                    if !b.is_zero() {
                        next.push(b);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            level = next;
        }
        Ok(HormanderReport { rank, step_reached, singular_values: sv, violation: rank < n })
    }

    pub fn to_doc(&self) -> GroupDoc {
        GroupDoc {
            name: self.name.clone(),
            n: self.n,
            layers: self.layers.clone(),
            sigma: self.sigma.clone(),
            fields: self.fields.iter().map(|f| f.0.iter().map(Poly::to_terms).collect()).collect(),
            compose: self.compose_rule.iter().map(Poly::to_terms).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("group doc serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GroupError> {
        let doc: GroupDoc = serde_json::from_str(s).map_err(|e| GroupError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_doc(&doc)
    }

    /// Validates a document and builds the group.
    pub fn from_doc(doc: &GroupDoc) -> Result<Self, GroupError> {
        let bad = |m: String| Err(GroupError::InvalidSpec(m));
        let n = doc.n;
        if n == 0 {
            return bad("N must be positive".into());
        }
        if doc.layers.iter().sum::<usize>() != n || doc.layers.contains(&0) {
            return bad(format!("layers {:?} must be positive and sum to N = {n}", doc.layers));
        }
        let expected_sigma: Vec<u32> = doc
            .layers
            .iter()
            .enumerate()
            .flat_map(|(k, &m)| std::iter::repeat(k as u32 + 1).take(m))
            .collect();
        if doc.sigma != expected_sigma {
            return bad(format!("sigma {:?} inconsistent with layers (expected {:?})", doc.sigma, expected_sigma));
        }
        let m1 = doc.layers[0];
        if doc.fields.len() != m1 {
            return bad(format!("expected {m1} generating fields, got {}", doc.fields.len()));
        }
        let mut fields = Vec::with_capacity(m1);
        for (i, f) in doc.fields.iter().enumerate() {
            if f.len() != n {
                return bad(format!("field {i} has {} components, expected {n}", f.len()));
            }
            let mut comps = Vec::with_capacity(n);
            for (j, terms) in f.iter().enumerate() {
                let p = Poly::from_terms(n, terms).map_err(|e| GroupError::InvalidSpec(format!("field {i}[{j}]: {e}")))?;
                match p.weighted_degree(&doc.sigma) {
                    Ok(None) => {}
                    Ok(Some(d)) if d + 1 == doc.sigma[j] => {}
                    _ => return bad(format!("field {i} component {j} is not homogeneous of degree sigma_j - 1")),
                }
                comps.push(p);
            }
            fields.push(VectorField(comps));
        }
        for (i, f) in fields.iter().enumerate() {
            let at0 = f.eval(&vec![0.0; n]);
            for (j, v) in at0.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                if (v - e).abs() > 1e-12 {
                    return bad(format!("field {i} does not satisfy X_i(0) = e_i"));
                }
            }
        }
        if doc.compose.len() != n {
            return bad(format!("compose has {} components, expected {n}", doc.compose.len()));
        }
        let mut w2 = doc.sigma.clone();
        w2.extend_from_slice(&doc.sigma);
        let mut compose = Vec::with_capacity(n);
        for (j, terms) in doc.compose.iter().enumerate() {
            let p = Poly::from_terms(2 * n, terms).map_err(|e| GroupError::InvalidSpec(format!("compose[{j}]: {e}")))?;
            match p.weighted_degree(&w2) {
                Ok(Some(d)) if d == doc.sigma[j] => {}
                _ => return bad(format!("compose component {j} is not homogeneous of degree sigma_j")),
            }
            compose.push(p);
        }
        let kind = detect_kind(doc);
        let g = Self::assemble(doc.name.clone(), n, doc.layers.clone(), doc.sigma.clone(), fields, compose, kind);
        let samples = [0.7, -1.3, 0.4, 2.1, -0.6, 1.7, -2.2, 0.9];
        let x: Vec<f64> = (0..n).map(|j| samples[j % samples.len()] * (1.0 + j as f64 * 0.1)).collect();
        let zero = vec![0.0; n];
        let xm: Vec<f64> = x.iter().map(|v| -v).collect();
        let id = g.op(&x, &zero);
        let inv = g.op(&x, &xm);
        if id.iter().zip(&x).any(|(a, b)| (a - b).abs() > 1e-12) || inv.iter().any(|v| v.abs() > 1e-12) {
            return bad("compose violates identity or inverse = -x".into());
        }
        Ok(g)
    }

    /// Coordinate index of the second-layer coordinate for the pair `(j, k)`, `j < k`.
    pub fn pair_index(&self, j: usize, k: usize) -> Option<usize> {
        match self.kind {
            GroupKind::FreeStep2 { generators } => pair_list(generators)
                .iter()
                .position(|&p| p == (j, k))
                .map(|p| generators + p),
            _ => None,
        }
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        match self.kind {
            GroupKind::FreeStep2 { generators } => pair_list(generators),
            _ => Vec::new(),
        }
    }
}

fn pair_list(m: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for j in 0..m {
        for k in j + 1..m {
            v.push((j, k));
        }
    }
    v
}

fn detect_kind(doc: &GroupDoc) -> GroupKind {
    let candidate = if doc.layers.len() == 1 {
        Some(CarnotGroup::euclidean(doc.n))
    } else if doc.layers.len() == 2 && doc.layers[1] == doc.layers[0] * (doc.layers[0] - 1) / 2 {
        Some(CarnotGroup::free_step2(doc.layers[0]))
    } else {
        None
    };
    match candidate {
        Some(c) => {
            let mut cd = c.to_doc();
            cd.name = doc.name.clone();
            if &cd == doc {
                c.kind
            } else {
                GroupKind::Custom
            }
        }
        None => GroupKind::Custom,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_examples() {
        let h = CarnotGroup::heisenberg1();
        assert_eq!(h.compose(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), vec![1.0, 1.0, 0.5]);
        assert_eq!(h.inverse(&[1.0, 1.0, 0.5]).unwrap(), vec![-1.0, -1.0, -0.5]);
        assert_eq!(h.dilate(2.0, &[1.0, 1.0, 1.0]).unwrap(), vec![2.0, 2.0, 4.0]);
        assert_eq!(h.vector_field_eval(0, &[0.0, 1.0, 0.0]).unwrap(), vec![1.0, 0.0, -0.5]);
        assert_eq!(h.vector_field_eval(0, &[0.0; 3]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(h.homogeneous_dim(), 4.0);
    }

    #[test]
    fn euclidean_examples() {
        let e = CarnotGroup::euclidean(2);
        assert_eq!(e.compose(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![4.0, 6.0]);
        assert_eq!(e.inverse(&[1.0, 2.0]).unwrap(), vec![-1.0, -2.0]);
        assert_eq!(e.vector_field_eval(1, &[5.0, -3.0]).unwrap(), vec![0.0, 1.0]);
        let r = e.check_hormander(&[0.3, 0.1]).unwrap();
        assert_eq!((r.rank, r.step_reached), (2, Some(1)));
    }

    #[test]
    fn brackets_and_rank() {
        let h = CarnotGroup::heisenberg1();
        let b = h.lie_bracket_at(&h.fields()[0], &h.fields()[1], &[0.3, -2.0, 1.0]).unwrap();
        assert_eq!(b, vec![0.0, 0.0, 1.0]);
        let vv = h.lie_bracket(&h.fields()[0], &h.fields()[0]);
        assert!(vv.is_zero());
        for x in [[0.0, 0.0, 0.0], [5.0, -3.0, 7.0]] {
            let r = h.check_hormander(&x).unwrap();
            assert_eq!((r.rank, r.step_reached, r.violation), (3, Some(2), false));
        }
        let f3 = CarnotGroup::free_step2(3);
        assert_eq!(f3.dim(), 6);
        assert_eq!(f3.check_hormander(&[0.1; 6]).unwrap().step_reached, Some(2));
    }

    #[test]
    fn errors() {
        let h = CarnotGroup::heisenberg1();
        assert!(matches!(h.compose(&[1.0], &[0.0; 3]), Err(GroupError::DimensionMismatch { .. })));
        assert!(matches!(h.dilate(0.0, &[0.0; 3]), Err(GroupError::NonPositiveRadius(_))));
        assert!(matches!(h.vector_field_eval(2, &[0.0; 3]), Err(GroupError::IndexOutOfRange { .. })));
        assert!(CarnotGroup::from_name("heisenberg7").is_err());
    }

    #[test]
    fn json_round_trip_keeps_kind() {
        for g in [CarnotGroup::heisenberg1(), CarnotGroup::euclidean(3), CarnotGroup::free_step2(3)] {
            let back = CarnotGroup::from_json(&g.to_json()).unwrap();
            assert_eq!(back.kind(), g.kind());
            assert_eq!(back.to_doc(), g.to_doc());
        }
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = CarnotGroup::from_json("{\n  \"name\": \"x\",\n  \"N\": oops\n}").unwrap_err();
        match err {
            GroupError::Json { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn rejects_inhomogeneous_field() {
        let mut doc = CarnotGroup::heisenberg1().to_doc();
        doc.fields[0][2].push(Term { c: 1.0, e: vec![0, 0, 1] });
        assert!(matches!(CarnotGroup::from_doc(&doc), Err(GroupError::InvalidSpec(_))));
    }
}
