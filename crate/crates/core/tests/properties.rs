use carnot::distance::heisenberg_distance;
use carnot::group::CarnotGroup;
use carnot::kernels::heat_kernel_g0;
use carnot::mean_value::{descent_from_parts, heat1d};
use carnot::special::{gamma, incomplete_gamma_lower};
use proptest::prelude::*;

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs()))
}

proptest! {
    #[test]
    fn heisenberg_group_axioms(x in point(3), y in point(3), z in point(3), r in 0.1..5.0f64) {
        let g = CarnotGroup::heisenberg1();
        let lhs = g.op(&g.op(&x, &y), &z);
        let rhs = g.op(&x, &g.op(&y, &z));
        prop_assert!(close(&lhs, &rhs, 1e-12));
        let xi = g.inverse(&x).unwrap();
        prop_assert!(close(&g.op(&x, &xi), &[0.0; 3], 1e-12));
        let dxy = g.dilate(r, &g.op(&x, &y)).unwrap();
        let dx_dy = g.op(&g.dilate(r, &x).unwrap(), &g.dilate(r, &y).unwrap());
        prop_assert!(close(&dxy, &dx_dy, 1e-12));
    }

    #[test]
    fn free_step2_axioms(x in point(6), y in point(6), z in point(6)) {
        let g = CarnotGroup::free_step2(3);
        prop_assert!(close(&g.op(&g.op(&x, &y), &z), &g.op(&x, &g.op(&y, &z)), 1e-12));
        prop_assert!(close(&g.relative(&x, &x), &[0.0; 6], 1e-12));
    }

    #[test]
    fn heisenberg_distance_is_a_homogeneous_left_invariant_metric(x in point(3), y in point(3), w in point(3), r in 0.1..5.0f64) {
        let g = CarnotGroup::heisenberg1();
        let d = |a: &[f64], b: &[f64]| heisenberg_distance(&g.relative(a, b));
        let dxy = d(&x, &y);
        prop_assert!((dxy - d(&y, &x)).abs() <= 1e-9 * (1.0 + dxy));
        prop_assert!(dxy <= d(&x, &w) + d(&w, &y) + 1e-9);
        let (rx, ry) = (g.dilate(r, &x).unwrap(), g.dilate(r, &y).unwrap());
        prop_assert!((d(&rx, &ry) - r * dxy).abs() <= 1e-9 * (1.0 + r * dxy));
        let (wx, wy) = (g.op(&w, &x), g.op(&w, &y));
        prop_assert!((d(&wx, &wy) - dxy).abs() <= 1e-9 * (1.0 + dxy));
    }

    #[test]
    fn heisenberg_kernel_symmetry_and_rotation(x in point(3), angle in 0.0..std::f64::consts::TAU, t in 0.3..3.0f64) {
        let g = CarnotGroup::heisenberg1();
        let v = heat_kernel_g0(&g, &x, t).unwrap();
        let inv = heat_kernel_g0(&g, &g.inverse(&x).unwrap(), t).unwrap();
        let (c, s) = (angle.cos(), angle.sin());
        let rot = heat_kernel_g0(&g, &[c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]], t).unwrap();
        prop_assert!(v.value > 0.0);
        prop_assert!((v.value - inv.value).abs() <= 1e-12 * v.value);
        prop_assert!((v.value - rot.value).abs() <= 1e-3 * v.value + v.error() + rot.error());
    }

    #[test]
    fn euclidean_kernel_parabolic_scaling(x in point(2), t in 0.1..3.0f64, r in 0.2..4.0f64) {
        let g = CarnotGroup::euclidean(2);
        let v = heat_kernel_g0(&g, &x, t).unwrap().value;
        let rx: Vec<f64> = x.iter().map(|c| r * c).collect();
        let w = heat_kernel_g0(&g, &rx, r * r * t).unwrap().value;
        prop_assert!((w * r.powi(2) - v).abs() <= 1e-12 * v.max(1e-300));
    }

    #[test]
    fn gamma_recurrence(x in 0.1..15.0f64) {
        let lhs = gamma(x + 1.0);
        prop_assert!((lhs - x * gamma(x)).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn incomplete_gamma_is_monotone_and_bounded(s in 0.2..6.0f64, a in 0.0..10.0f64, b in 0.0..10.0f64) {
        let (lo, hi) = (a.min(b), a.max(b));
        let gl = incomplete_gamma_lower(s, lo).unwrap();
        let gh = incomplete_gamma_lower(s, hi).unwrap();
        prop_assert!(gl >= 0.0 && gl <= gh + 1e-14);
        prop_assert!(gh <= gamma(s) * (1.0 + 1e-12));
    }

    #[test]
    fn heat1d_descent_matches_generic_path(frac in 0.01..0.99f64, u in -0.95..0.95f64, r in 0.1..0.5f64, m in 3usize..7) {
        let (xi, tau) = (0.2, 1.0);
        // largest s with a nonempty slice of the superlevel set
        let s_max = r.powf(2.0 / (m as f64 + 1.0)) / (4.0 * std::f64::consts::PI);
        let s = frac * s_max;
        let l = (r / (4.0 * std::f64::consts::PI * s).powf((m as f64 + 1.0) / 2.0)).ln();
        let x = xi + u * (4.0 * s * l).sqrt();
        let t = tau - s;
        prop_assert!(heat1d::in_set(xi, tau, x, t, r, m));
        let gamma = (-(xi - x) * (xi - x) / (4.0 * s)).exp() / (4.0 * std::f64::consts::PI * s).sqrt();
        let generic = descent_from_parts(gamma, heat1d::pini_watson(xi, tau, x, t), s, r, m).unwrap();
        let closed = heat1d::descent(xi, tau, x, t, r, m);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        prop_assert!(rel(generic.m_r, closed.m_r) < 1e-10, "M {} vs {}", generic.m_r, closed.m_r);
        prop_assert!(rel(generic.n_r, closed.n_r) < 1e-10);
        prop_assert!((generic.w_r - closed.w_r).abs() < 1e-10 * generic.w_r.abs().max(generic.n_r.powi(m as i32) / r));
        prop_assert!(closed.m_r >= 0.0 && closed.n_r >= 0.0);
    }

    #[test]
    fn superlevel_sets_grow_with_r(x in -1.0..1.0f64, s in 1e-4..0.1f64, r1 in 0.05..1.0f64, dr in 0.0..1.0f64) {
        let r2 = r1 + dr;
        if heat1d::in_set(0.0, 1.0, x, 1.0 - s, r1, 4) {
            prop_assert!(heat1d::in_set(0.0, 1.0, x, 1.0 - s, r2, 4));
        }
    }
}
