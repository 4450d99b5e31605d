use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use schrolab::diffusive::*;
use schrolab::special::gamma;
use schrolab::ModelParams;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn params(at: f64, eta: f64) -> ModelParams {
    ModelParams::new(0.5, at, eta, 1.0).unwrap()
}

// adaptive mpmath quadrature of 2∫₀^∞ ξ^{2α̃−1}/(2.5+ξ²) dξ, α̃ = 0.3
const KERNEL_QUAD_ORACLE: f64 = 2.044_721_775_293_694;

#[test]
fn closed_form_matches_quadrature_oracle() {
    let v = kernel_integral_closed(c(2.0, 0.0), &params(0.3, 0.5)).unwrap();
    assert!((v.re - KERNEL_QUAD_ORACLE).abs() < 1e-10 * KERNEL_QUAD_ORACLE);
    assert!(v.im.abs() < 1e-14);
}

#[test]
fn branch_cut_is_rejected() {
    let err = kernel_integral_closed(c(-2.0, 0.0), &params(0.5, 1.0)).unwrap_err();
    assert!(matches!(err, DiffusiveError::BranchCut(_)));
}

#[test]
fn certified_grid_and_refinement() {
    let p = params(0.5, 1.0);
    let g200 = build_xi_grid(&p, 200, [0.1, 100.0]).unwrap();
    assert!(g200.certified_error < 1e-4);
    let g400 = build_xi_grid(&p, 400, [0.1, 100.0]).unwrap();
    assert!(g400.certified_error < g200.certified_error);
}

#[test]
fn under_resolved_grid_fails_certification() {
    let err = build_xi_grid(&params(0.5, 1.0), 8, [1e-2, 1e6]).unwrap_err();
    match err {
        DiffusiveError::Certification { error, tol, .. } => assert!(error > tol),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn quadrature_against_closed_form() {
    let p = ModelParams::new(0.5, 0.5, 0.0, 1.0).unwrap();
    let g = build_xi_grid(&p, 200, [0.1, 100.0]).unwrap();
    let v = quadrature_kernel_integral(&g, c(1.0, 0.0), &p);
    assert!(v.certified);
    assert!((v.value - PI).norm() < 1e-4 * PI);

    let q = params(0.5, 1.0);
    let g = build_xi_grid(&q, 200, [0.1, 100.0]).unwrap();
    let lam = c(0.0, 10.0);
    let v = quadrature_kernel_integral(&g, lam, &q);
    let exact = kernel_integral_closed(lam, &q).unwrap();
    assert!((v.value - exact).norm() < 1e-3 * exact.norm());

    let far = quadrature_kernel_integral(&g, c(1e9, 0.0), &q);
    assert!(!far.certified);
    assert!(far.value.re.is_finite());
}

#[test]
fn steady_output_under_unit_input() {
    let p = params(0.5, 1.0);
    let g = build_xi_grid(&p, 200, [1e-2, 1e3]).unwrap();
    let phi: Vec<Complex64> = g.xi.iter().zip(&g.mu).map(|(x, m)| c(m / (x * x + 1.0), 0.0)).collect();
    let o = diffusive_output(&g, &phi, &p);
    assert!((o - c(1.0, 0.0)).norm() < 1e-4);
    // equilibrium is a fixed point of the exact update
    let next = step_phi(&g, &phi, c(1.0, 0.0), 0.3, &p);
    let drift = next.iter().zip(&phi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(drift < 1e-12);
}

#[test]
fn single_mode_output_is_linear() {
    let p = params(0.3, 1.0);
    let g = build_xi_grid(&p, 64, [1e-1, 1e2]).unwrap();
    let k = 17;
    let mut phi = vec![c(0.0, 0.0); g.n_modes()];
    phi[k] = c(1.0, 0.0);
    let o = diffusive_output(&g, &phi, &p);
    // weights already carry the factor 2 of the even extension
    let expected = (0.3 * PI).sin() / PI * g.weight[k] * g.mu[k];
    assert!((o.re - expected).abs() < 1e-14 * expected.abs());
}

#[test]
fn fractional_integral_of_one() {
    let p = ModelParams::new(0.5, 0.5, 0.0, 1.0).unwrap();
    let dt = 1e-3;
    let ones = vec![c(1.0, 0.0); 1000];
    let out = fractional_integral_direct(&ones, dt, &p);
    for (n, o) in out.iter().enumerate().skip(1).step_by(97) {
        let t = n as f64 * dt;
        let exact = t.sqrt() / gamma(1.5);
        assert!((o.re - exact).abs() < 1e-10, "t={t}: {} vs {exact}", o.re);
    }
    let zeros = fractional_integral_direct(&vec![c(0.0, 0.0); 50], dt, &p);
    assert!(zeros.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn pipeline_tracks_convolution_of_sine() {
    let p = params(0.3, 0.5);
    let dt = 1e-3;
    let n = 10_000;
    let grid = build_xi_grid(&p, 400, [1e-2, 100.0 / dt]).unwrap();
    let samples: Vec<Complex64> = (0..n).map(|j| c(((j as f64 + 0.5) * dt).sin(), 0.0)).collect();
    let a = diffusive_pipeline(&grid, &samples, dt, &p);
    let b = fractional_integral_direct(&samples, dt, &p);
    let gap = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(gap < 1e-3, "gap {gap}");
}

#[test]
fn csv_roundtrip() {
    let p = params(0.75, 0.5);
    let g = build_xi_grid(&p, 48, [1e-1, 1e2]).unwrap();
    let mut buf = Vec::new();
    g.write_csv(&mut buf, "grid").unwrap();
    let back = DiffusiveGrid::read_csv(buf.as_slice(), 0.75, g.band).unwrap();
    assert_eq!(back.xi, g.xi);
    assert_eq!(back.weight, g.weight);
    assert_eq!(back.mu, g.mu);
}

#[test]
fn malformed_csv_is_rejected() {
    let text = "# x\nxi,weight,mu\n1.0,abc,1.0\n";
    assert!(DiffusiveGrid::read_csv(text.as_bytes(), 0.5, [0.1, 1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, rng_seed: RngSeed::Fixed(0x5eed), ..ProptestConfig::default() })]

    #[test]
    fn grid_is_positive_and_sorted(at in 0.05f64..0.95, eta in 0.1f64..2.0) {
        let p = params(at, eta);
        let g = build_xi_grid_with_tol(&p, 120, [0.1, 100.0], f64::INFINITY).unwrap();
        prop_assert!(g.xi.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g.xi[0] > 0.0);
        prop_assert!(g.weight.iter().all(|&w| w > 0.0));
        prop_assert!(g.mu.iter().all(|&m| m > 0.0 && m.is_finite()));
    }

    #[test]
    fn modes_decay_without_input(at in 0.05f64..0.95, dt in 1e-4f64..1.0) {
        let p = params(at, 1.0);
        let g = build_xi_grid_with_tol(&p, 32, [0.1, 100.0], f64::INFINITY).unwrap();
        let phi = vec![c(1.0, -1.0); 32];
        let next = step_phi(&g, &phi, c(0.0, 0.0), dt, &p);
        prop_assert!(next.iter().zip(&phi).all(|(a, b)| a.norm() < b.norm()));
    }
}
