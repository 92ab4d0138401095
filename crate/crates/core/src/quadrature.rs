//! Gauss–Legendre and Gauss–Hermite rules, Halton quasi-random points.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss–Hermite rule for `int f(u) exp(-u^2) du`, stored with the weight folded in:
/// `int f(y) dy ~ sum_i scaled[i] f(nodes[i])` for `f` close to a unit-variance Gaussian.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `weights[i] * exp(nodes[i]^2)`.
    pub scaled: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch: eigenvalues of the Jacobi matrix of the Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let jac = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = nalgebra::SymmetricEigen::new(jac);
        let mu0 = std::f64::consts::PI.sqrt();
        let mut pairs: Vec<(f64, f64)> =
            (0..n).map(|k| (eig.eigenvalues[k], mu0 * eig.eigenvectors[(0, k)].powi(2))).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // symmetrize against round-off
        for i in 0..n / 2 {
            let (a, b) = (pairs[i], pairs[n - 1 - i]);
            let x = 0.5 * (b.0 - a.0);
            let w = 0.5 * (a.1 + b.1);
            pairs[i] = (-x, w);
            pairs[n - 1 - i] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let scaled = pairs.iter().map(|p| (p.1.ln() + p.0 * p.0).exp()).collect();
        GaussHermite { nodes, weights, scaled }
    }

    /// Nodes and weights for `int f(y) dy` when `f` is concentrated like
    /// `exp(-(y - centre)^2 / (2 sigma^2))`.
    pub fn around(&self, centre: f64, sigma: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let s = std::f64::consts::SQRT_2 * sigma;
        self.nodes.iter().zip(&self.scaled).map(move |(&u, &w)| (centre + s * u, s * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Point `index` of the `dim`-dimensional Halton sequence in `[0,1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len());
    PRIMES[..dim].iter().map(|&b| radical_inverse(index, b)).collect()
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let inv = 1.0 / base as f64;
    while i > 0 {
        f *= inv;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_rule_has_center_node() {
        let gl = GaussLegendre::new(5);
        assert!(gl.nodes[2].abs() < 1e-15);
        assert!((gl.integrate(-1.0, 1.0, |x| x.exp()) - (1f64.exp() - (-1f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(12);
        let pi = std::f64::consts::PI;
        assert!((gh.weights.iter().sum::<f64>() - pi.sqrt()).abs() < 1e-13);
        let m4: f64 = gh.nodes.iter().zip(&gh.weights).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.75 * pi.sqrt()).abs() < 1e-12);
        // unit-variance Gaussian through the scaled form
        let v: f64 = gh.around(0.3, 2.0).map(|(y, w)| w * (-(y - 0.3f64).powi(2) / 8.0).exp()).sum();
        assert!((v - (8.0 * pi).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(2, 2), vec![0.25, 2.0 / 3.0]);
    }
}
