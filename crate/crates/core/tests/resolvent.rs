use num_complex::Complex64;
use schrolab::diffusive::build_xi_grid;
use schrolab::pde::{assemble_generator, build_spatial_grid, Generator};
use schrolab::resolvent::*;
use schrolab::ModelParams;

fn generator(at: f64, eta: f64, rho: f64, n_cells: usize) -> Generator {
    let p = ModelParams::new(0.5, at, eta, rho).unwrap();
    let grid = build_spatial_grid(0.5, n_cells).unwrap();
    let dgrid = if p.direct_damping() || rho == 0.0 { None } else { Some(build_xi_grid(&p, 96, [1e-2, 1e6]).unwrap()) };
    assemble_generator(&grid, dgrid.as_ref(), &p).unwrap()
}

fn smooth_rhs(gen: &Generator) -> Vec<Complex64> {
    let n = gen.grid.n_nodes();
    (0..gen.dim()).map(|i| if i < n { Complex64::new(gen.grid.x[i].cos(), 0.0) } else { Complex64::new(0.0, 0.0) }).collect()
}

#[test]
fn zero_frequency_is_solvable_with_eta() {
    let gen = generator(0.5, 1.0, 1.0, 400);
    let f = smooth_rhs(&gen);
    let v = solve_resolvent(&gen, 0.0, &f).unwrap();
    let ratio = gen.norm(&v) / gen.norm(&f);
    assert!(ratio.is_finite() && ratio < 1e6, "ratio {ratio}");
    let s = resolvent_norm(&gen, 0.0);
    assert!(s.converged && s.norm_estimate < 1e6);
}

#[test]
fn zero_data_gives_zero_solution() {
    let gen = generator(0.25, 1.0, 1.0, 200);
    let v = solve_resolvent(&gen, 37.0, &vec![Complex64::new(0.0, 0.0); gen.dim()]).unwrap();
    assert!(v.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn solution_satisfies_the_equation() {
    let gen = generator(0.25, 1.0, 1.0, 300);
    let f = smooth_rhs(&gen);
    let beta = 123.4;
    let v = solve_resolvent(&gen, beta, &f).unwrap();
    let av = gen.apply(&v);
    let r: Vec<Complex64> = v.iter().zip(&av).zip(&f).map(|((x, a), b)| Complex64::new(0.0, beta) * x - a - b).collect();
    assert!(gen.norm(&r) < 1e-9 * gen.norm(&f));
}

#[test]
fn dimension_mismatch_is_reported() {
    let gen = generator(0.5, 1.0, 1.0, 100);
    assert!(matches!(solve_resolvent(&gen, 1.0, &[Complex64::new(1.0, 0.0)]), Err(ResolventError::Dimension { .. })));
}

#[test]
fn peaks_track_damping_of_eigenvalues() {
    let gen = generator(0.25, 1.0, 1.0, 2000);
    let mut peaks = Vec::new();
    // a few low modes: Im λ_k ≈ (3/4)²(kπ)²
    for beta in [60.0, 200.0, 420.0, 720.0] {
        let ev = nearest_discrete_eigenvalue(&gen, beta).unwrap();
        assert!(ev.re < 0.0);
        let s = resolvent_norm(&gen, ev.im);
        let target = 1.0 / ev.re.abs();
        assert!(s.norm_estimate > target / 3.0 && s.norm_estimate < 3.0 * target, "beta {}: {} vs {target}", ev.im, s.norm_estimate);
        peaks.push((ev.im, s.norm_estimate));
    }
    // the norm dips between consecutive peaks
    for w in peaks.windows(2) {
        let mid = resolvent_norm(&gen, 0.5 * (w[0].0 + w[1].0)).norm_estimate;
        assert!(mid < w[0].1.min(w[1].1), "{mid} between {} and {}", w[0].1, w[1].1);
    }
}

#[test]
fn undamped_norm_is_inverse_distance() {
    let gen = generator(1.0, 0.0, 0.0, 400);
    for beta in [3.0, 55.5, 180.0, 1000.0] {
        let ev = nearest_discrete_eigenvalue(&gen, beta).unwrap();
        assert!(ev.re.abs() < 1e-8 * ev.norm().max(1.0));
        let dist = (Complex64::new(0.0, beta) - ev).norm();
        let s = resolvent_norm(&gen, beta);
        assert!((s.norm_estimate * dist - 1.0).abs() < 1e-3, "beta {beta}: {} vs {}", s.norm_estimate, 1.0 / dist);
    }
}

#[test]
fn undamped_scan_flags_poles() {
    let p = ModelParams::new(0.5, 1.0, 0.0, 0.0).unwrap();
    let gen = generator(1.0, 0.0, 0.0, 400);
    let band = [10.0, 1000.0];
    let betas = scan_frequencies(&p, band, 40).unwrap();
    let scan = scan_and_fit(&gen, &betas, band).unwrap();
    assert!(scan.samples.iter().any(|s| !s.converged));
    assert!(scan.peaks.iter().all(|pk| pk.eigenvalue.re.abs() < 1e-6 * pk.eigenvalue.norm()));
}

#[test]
fn damped_scan_envelope_rises_below_threshold() {
    let p = ModelParams::new(0.5, 0.25, 1.0, 1.0).unwrap();
    let gen = generator(0.25, 1.0, 1.0, 1000);
    let band = [1e2, 2e3];
    let scan = scan_and_fit(&gen, &scan_frequencies(&p, band, 80).unwrap(), band).unwrap();
    let s = scan.slope().unwrap();
    assert!(s > 0.3 && s < 0.9, "slope {s}");
    assert!(scan.peak_index.iter().all(|&i| scan.is_peak(i)));
    // troughs may hit the iteration cap (two nearly equal singular values), peaks may not
    assert!(scan.peaks.iter().all(|pk| pk.sample.converged));
    let nc = scan.samples.iter().filter(|x| !x.converged).count();
    assert!(nc * 5 < scan.samples.len(), "{nc} of {} not converged", scan.samples.len());
}

#[test]
fn norm_is_grid_independent() {
    let coarse = generator(0.25, 1.0, 1.0, 1000);
    let fine = generator(0.25, 1.0, 1.0, 2000);
    for beta in [150.0, 333.0, 800.0] {
        let (a, b) = (resolvent_norm(&coarse, beta).norm_estimate, resolvent_norm(&fine, beta).norm_estimate);
        assert!((a - b).abs() < 0.05 * b, "beta {beta}: {a} vs {b}");
    }
}

#[test]
fn norm_bounded_by_inverse_distance_off_peak() {
    let gen = generator(0.25, 1.0, 1.0, 1000);
    for beta in [90.0, 300.0, 1200.0] {
        let ev = nearest_discrete_eigenvalue(&gen, beta).unwrap();
        let dist = (Complex64::new(0.0, beta) - ev).norm();
        let s = resolvent_norm(&gen, beta);
        assert!(s.norm_estimate > 0.0 && s.norm_estimate <= 10.0 / dist, "beta {beta}: {} vs {}", s.norm_estimate, 1.0 / dist);
    }
}

#[test]
fn frequency_list_and_errors() {
    let p = ModelParams::new(0.5, 0.25, 1.0, 1.0).unwrap();
    let b = scan_frequencies(&p, [1e2, 1e4], 50).unwrap();
    assert!(b.len() > 50);
    assert!(b.windows(2).all(|w| w[0] < w[1]));
    assert!(scan_frequencies(&p, [1e4, 1e2], 50).is_err());
    assert!(scan_frequencies(&p, [1e2, 1e4], 1).is_err());

    let gen = generator(0.25, 1.0, 1.0, 100);
    let few = [100.0, 150.0, 200.0];
    assert!(matches!(scan_and_fit(&gen, &few, [1e2, 1e4]), Err(ResolventError::TooFewPeaks { .. })));
}

#[test]
fn probes_exist_only_below_threshold() {
    let below = ModelParams::new(0.5, 0.25, 1.0, 1.0).unwrap();
    let above = ModelParams::new(0.5, 0.9, 1.0, 1.0).unwrap();
    let b = probe_frequency(&below, 5).unwrap();
    assert!(b > 0.0);
    assert!(probe_frequency(&above, 5).is_none());
}
