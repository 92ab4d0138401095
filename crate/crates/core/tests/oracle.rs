//! Heat kernel values against independently computed references.

#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use carnot::group::CarnotGroup;
use carnot::kernels::heat_kernel_g0;

/// `(rho, x3, t, value)` from the Fourier integral in `x3` of the Mehler kernel,
/// evaluated once at 20 digits and frozen.
const HEISENBERG: [(f64, f64, f64, f64); 8] = [
    (0.0, 0.0, 1.0, 0.0625),
    (0.0, 1.0, 1.0, 0.009926974573753957802),
    (0.0, 0.5, 1.0, 0.035620872737086085342),
    (1.0, 0.0, 1.0, 0.039376927974030780777),
    (0.5, 0.3, 0.5, 0.10428719190836800847),
    (1.2, -0.7, 2.0, 0.0090122885074354708303),
    (0.3, 0.2, 0.25, 0.27625997783320179883),
    (2.0, 1.0, 1.0, 0.0066532049437714281465),
];

const REL_TOL: f64 = 1e-3;

#[test]
fn heisenberg_table_matches_frozen_values() {
    let g = CarnotGroup::heisenberg1();
    for &(rho, z, t, want) in &HEISENBERG {
        for angle in [0.0, 1.1] {
            let x = [rho * f64::cos(angle), rho * f64::sin(angle), z];
            let got = heat_kernel_g0(&g, &x, t).unwrap();
            let rel = (got.value - want).abs() / want;
            assert!(rel < REL_TOL, "rho {rho} z {z} t {t}: {} vs {want}", got.value);
            assert!(!got.extrapolated);
        }
    }
}

#[test]
fn heisenberg_error_bar_covers_reference() {
    let g = CarnotGroup::heisenberg1();
    for &(rho, z, t, want) in &HEISENBERG {
        let got = heat_kernel_g0(&g, &[rho, 0.0, z], t).unwrap();
        assert!((got.value - want).abs() <= got.error().max(1e-12), "rho {rho} z {z} t {t}");
    }
}

#[test]
fn euclidean_kernel_is_gaussian() {
    for n in 1..=3 {
        let g = CarnotGroup::euclidean(n);
        let x: Vec<f64> = (0..n).map(|i| 0.3 * i as f64 - 0.2).collect();
        let t = 0.7;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let want = (-r2 / (4.0 * t)).exp() / (4.0 * PI * t).powf(n as f64 / 2.0);
        let got = heat_kernel_g0(&g, &x, t).unwrap();
        assert!((got.value - want).abs() < 1e-14 * want.max(1.0));
        assert_eq!(got.error(), 0.0);
    }
}

#[test]
fn nonpositive_time_rejected() {
    let g = CarnotGroup::heisenberg1();
    assert!(heat_kernel_g0(&g, &[0.0, 0.0, 0.0], 0.0).is_err());
    assert!(heat_kernel_g0(&g, &[0.0, 0.0], 1.0).is_err());
}
