//! Sparse multivariate polynomials with exact differentiation.
//!
//! Coefficient functions of the generating vector fields and the group law
//! are low-degree polynomials, so they are kept as exponent -> coefficient
//! maps. [`CompiledPoly`] is a flat evaluation form for hot loops.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A polynomial in `nvars` real variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

/// One monomial in the JSON representation: `{"c": coefficient, "e": exponents}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub c: f64,
    pub e: Vec<u32>,
}

/// Monomials of different weighted degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixedDegree;

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        Poly::monomial(nvars, i, 1, 1.0)
    }

    /// `c * x_i^k`.
    pub fn monomial(nvars: usize, i: usize, k: u32, c: f64) -> Self {
        let mut e = vec![0; nvars];
        e[i] = k;
        let mut p = Poly::zero(nvars);
        p.add_term(e, c);
        p
    }

    pub fn from_terms(nvars: usize, terms: &[Term]) -> Result<Self, String> {
        let mut p = Poly::zero(nvars);
        for t in terms {
            if t.e.len() != nvars {
                return Err(format!(
                    "monomial has {} exponents, expected {}",
                    t.e.len(),
                    nvars
                ));
            }
            if !t.c.is_finite() {
                return Err("non-finite coefficient".into());
            }
            p.add_term(t.e.clone(), t.c);
        }
        Ok(p)
    }

    pub fn to_terms(&self) -> Vec<Term> {
        self.terms.iter().map(|(e, &c)| Term { c, e: e.clone() }).collect()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let v = self.terms.get(&e).copied().unwrap_or(0.0) + c;
        if v == 0.0 {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, v);
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms
            .iter()
            .map(|(e, &c)| {
                e.iter()
                    .zip(x)
                    .fold(c, |acc, (&k, &xi)| if k == 0 { acc } else { acc * xi.powi(k as i32) })
            })
            .sum()
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            out.add_term(e2, c * e[i] as f64);
        }
        out
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    /// Weighted degree of each monomial under the weights `w`; `None` for the
    /// zero polynomial, `Err` if the monomials have different weighted degrees.
    pub fn weighted_degree(&self, w: &[u32]) -> Result<Option<u32>, MixedDegree> {
        let mut deg = None;
        for e in self.terms.keys() {
            let d: u32 = e.iter().zip(w).map(|(a, b)| a * b).sum();
            match deg {
                None => deg = Some(d),
                Some(d0) if d0 != d => return Err(MixedDegree),
                _ => {}
            }
        }
        Ok(deg)
    }

    pub fn compile(&self) -> CompiledPoly {
        CompiledPoly {
            terms: self
                .terms
                .iter()
                .map(|(e, &c)| {
                    let f = e
                        .iter()
                        .enumerate()
                        .filter(|(_, &k)| k > 0)
                        .map(|(i, &k)| (i, k as i32))
                        .collect();
                    (c, f)
                })
                .collect(),
        }
    }
}

/// Flat evaluation form of a [`Poly`].
#[derive(Debug, Clone, Default)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (c, f) in &self.terms {
            let mut v = *c;
            for &(i, k) in f {
                v *= if k == 1 { x[i] } else { x[i].powi(k) };
            }
            s += v;
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_product() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = x.mul(&x).mul(&y).add(&Poly::constant(2, 3.0));
        let dx = p.derivative(0);
        assert_eq!(dx.eval(&[2.0, 5.0]), 20.0);
        assert_eq!(p.derivative(1).eval(&[2.0, 5.0]), 4.0);
        assert!(p.derivative(0).derivative(0).derivative(0).is_zero());
    }

    #[test]
    fn cancellation_removes_terms() {
        let x = Poly::var(1, 0);
        assert!(x.sub(&x).is_zero());
    }

    #[test]
    fn compiled_matches_direct() {
        let p = Poly::monomial(3, 1, 2, -0.5).add(&Poly::var(3, 0).mul(&Poly::var(3, 2)));
        let c = p.compile();
        let x = [0.3, -1.2, 2.5];
        assert!((c.eval(&x) - p.eval(&x)).abs() < 1e-15);
    }

    #[test]
    fn weighted_degree_detects_mixed() {
        let w = [1, 1, 2];
        assert_eq!(Poly::var(3, 2).weighted_degree(&w), Ok(Some(2)));
        assert!(Poly::var(3, 2).add(&Poly::var(3, 0)).weighted_degree(&w).is_err());
        assert_eq!(Poly::zero(3).weighted_degree(&w), Ok(None));
    }
}
