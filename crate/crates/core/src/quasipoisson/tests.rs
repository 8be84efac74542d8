use super::*;
use crate::discretization::{BoxGrid, RadialGrid};
use proptest::prelude::*;

fn radial(r_max: f64, n: usize) -> Arc<Grid> {
    Arc::new(RadialGrid::new(r_max, n).unwrap().into())
}

fn boxed(hw: f64, n: usize) -> Arc<Grid> {
    Arc::new(BoxGrid::new(hw, n).unwrap().into())
}

fn gaussian_sq(grid: &Arc<Grid>) -> ScalarField {
    ScalarField::from_fn(grid.clone(), |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp())
}

fn newtonian(eps: f64, r: f64) -> f64 {
    let s = 0.25 * std::f64::consts::PI.sqrt();
    if r < 1e-8 {
        eps * eps * s * 2.0 / std::f64::consts::PI.sqrt()
    } else {
        eps * eps * s * libm::erf(r) / r
    }
}

fn max_rel_error(phi: &ScalarField, eps: f64) -> f64 {
    let grid = phi.grid();
    let peak = newtonian(eps, 0.0);
    (0..phi.len())
        .map(|i| {
            let x = grid.position(i);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            (phi.values()[i] - newtonian(eps, r)).abs() / peak
        })
        .fold(0.0, f64::max)
}

#[test]
fn cubic_root_degenerates_to_linear() {
    assert_eq!(cubic_flux_root(1.0, 0.0, 3.5).0, 3.5);
    let (g, _) = cubic_flux_root(2.0, 5.0, -7.0);
    assert!((2.0 * g + 5.0 * g.powi(3) + 7.0).abs() < 1e-12);
    let (g, _) = cubic_flux_root(1e2, 1e8, 1e-3);
    assert!((1e2 * g + 1e8 * g.powi(3) - 1e-3).abs() < 1e-15);
}

#[test]
fn radial_fast_path_matches_newtonian_potential() {
    let eps = 0.1;
    let grid = radial(16.0, 2048);
    let u = ScalarField::from_fn(grid.clone(), |x| (-0.5 * x[0] * x[0]).exp());
    let sol = solve_phi_radial(&u, &PoissonParams::new(eps, 0.0)).unwrap();
    assert!(max_rel_error(&sol.phi, eps) < 1e-6);
    assert!(sol.identity_residual < 1e-8);
}

#[test]
fn radial_finite_volume_matches_newtonian_potential() {
    let eps = 0.2;
    for n in [129, 257] {
        let grid = radial(12.0, n);
        let h = grid.h();
        let sol = solve_phi(&gaussian_sq(&grid), &PoissonParams::new(eps, 0.0)).unwrap();
        let err = max_rel_error(&sol.phi, eps);
        assert!(err <= 10.0 * h * h, "n={n}: {err}");
    }
}

#[test]
fn box_solution_approaches_newtonian_potential() {
    // zero Dirichlet data truncates the 1/r tail, so compare near the centre
    let eps = 0.1;
    let grid = boxed(8.0, 31);
    let sol = solve_phi(&gaussian_sq(&grid), &PoissonParams::new(eps, 0.0)).unwrap();
    let g = grid.as_box().unwrap();
    let mid = g.index(15, 15, 15);
    let exact = newtonian(eps, 0.0);
    // the truncation error is about Q/(4π·hw) relative to the peak
    assert!((sol.phi.values()[mid] - exact).abs() / exact < 0.15);
}

#[test]
fn zero_source_is_degenerate() {
    let grid = boxed(3.0, 9);
    let sol = solve_phi(&ScalarField::zeros(grid.clone()), &PoissonParams::new(0.1, 1.0)).unwrap();
    assert!(sol.degenerate);
    assert!(sol.phi.is_zero());
    let u = ScalarField::zeros(radial(3.0, 32));
    assert!(solve_phi_radial(&u, &PoissonParams::new(0.1, 1.0)).unwrap().degenerate);
}

#[test]
fn rejects_negative_source() {
    let grid = boxed(3.0, 9);
    let f = ScalarField::constant(grid, -1.0);
    assert!(solve_phi(&f, &PoissonParams::new(0.1, 0.0)).is_err());
}

/// `f = −ε⁻²Δφ* − βε⁻⁴Δ₄φ*` for `φ* = e^{−r²}`.
fn manufactured_source(eps: f64, beta: f64, r: f64) -> f64 {
    let r2 = r * r;
    let lap = (4.0 * r2 - 6.0) * (-r2).exp();
    let lap4 = -8.0 * (5.0 * r2 - 6.0 * r2 * r2) * (-3.0 * r2).exp();
    -lap / (eps * eps) - beta * lap4 / eps.powi(4)
}

fn manufactured_error(n: usize) -> f64 {
    let (eps, beta) = (0.5, 1.0);
    let grid = radial(8.0, n);
    let op = PoissonOperator::new(grid.clone(), PoissonParams::new(eps, beta)).unwrap();
    let src: Vec<f64> = (0..n).map(|j| manufactured_source(eps, beta, grid.position(j)[0])).collect();
    let sol = op.solve_source(&src).unwrap();
    (0..n)
        .map(|j| (sol.phi.values()[j] - (-grid.position(j)[0].powi(2)).exp()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let errs: Vec<f64> = [65, 129, 257].iter().map(|&n| manufactured_error(n)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "{errs:?}");
    }
}

fn bumpy_source(grid: &Arc<Grid>, seed: u64) -> ScalarField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.5..2.0),
            ]
        })
        .collect();
    ScalarField::from_fn(grid.clone(), |x| {
        c.iter()
            .map(|b| {
                let d = (x[0] - b[0]).powi(2) + (x[1] - b[1]).powi(2) + (x[2] - b[2]).powi(2);
                b[3] * (-d).exp()
            })
            .sum()
    })
}

#[test]
fn identity_holds_for_random_sources() {
    let grid = boxed(6.0, 23);
    for seed in 0..3 {
        let src = bumpy_source(&grid, seed);
        for (eps, beta) in [(0.1, 0.0), (0.1, 1.0), (0.05, 1.0)] {
            let sol = solve_phi(&src, &PoissonParams::new(eps, beta)).unwrap();
            assert!(sol.identity_residual < 1e-7, "{seed} {eps} {beta}: {sol:?}");
        }
    }
}

#[test]
fn newton_energies_decrease() {
    let grid = radial(8.0, 64);
    // a strong source makes the quartic term dominant
    let src = gaussian_sq(&grid).map(|v| 100.0 * v);
    let sol = solve_phi(&src, &PoissonParams::new(0.9, 50.0)).unwrap();
    assert!(sol.iterations >= 2);
    for w in sol.energy_history.windows(2) {
        assert!(w[1] < w[0], "{:?}", sol.energy_history);
    }
}

#[test]
fn linearization_matches_finite_differences() {
    let grid = boxed(5.0, 17);
    let params = PoissonParams { tol: 1e-12, ..PoissonParams::new(0.7, 2.0) };
    let u = ScalarField::from_fn(grid.clone(), |x| 2.0 * (-0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
    let w = ScalarField::from_fn(grid.clone(), |x| (x[0] - 0.3 * x[2]) * (-0.3 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
    let phi = solve_phi(&u.map(|v| v * v), &params).unwrap().phi;
    let psi = linearized_phi(&u, &phi, &w, &params).unwrap();
    let t = 1e-4;
    let shifted = |s: f64| {
        let v = u.zip_map(&w, |a, b| (a + s * b).powi(2));
        solve_phi(&v, &params).unwrap().phi
    };
    let fd = shifted(t).zip_map(&shifted(-t), |a, b| (a - b) / (2.0 * t));
    let diff = fd.zip_map(&psi, |a, b| a - b);
    let rel = d12_norm(&diff) / d12_norm(&psi);
    assert!(rel < 1e-4, "{rel}");
}

#[test]
fn linearization_of_zero_direction_vanishes() {
    let grid = boxed(4.0, 9);
    let params = PoissonParams::new(0.3, 1.0);
    let u = ScalarField::from_fn(grid.clone(), |x| (-x[0] * x[0] - x[1] * x[1] - x[2] * x[2]).exp());
    let phi = solve_phi(&u.map(|v| v * v), &params).unwrap().phi;
    let psi = linearized_phi(&u, &phi, &ScalarField::zeros(grid), &params).unwrap();
    assert!(psi.is_zero());
}

fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn potential_scales_like_eps_squared() {
    let grid = boxed(6.0, 23);
    let src = bumpy_source(&grid, 7);
    let eps = [0.2, 0.141, 0.1, 0.07, 0.05];
    let norms: Vec<f64> = eps
        .iter()
        .map(|&e| d12_norm(&solve_phi(&src, &PoissonParams::new(e, 1.0)).unwrap().phi))
        .collect();
    assert!(fitted_slope(&eps, &norms) >= 1.9);
}

#[test]
fn radial_paths_agree_with_the_box() {
    let eps = 0.2;
    let prof = |r: f64| (-0.5 * r * r).exp();
    let rg = radial(12.0, 1024);
    let u = ScalarField::from_fn(rg.clone(), |x| prof(x[0]));
    let fast = solve_phi_radial(&u, &PoissonParams::new(eps, 1.0)).unwrap();
    let fv = solve_phi(&u.map(|v| v * v), &PoissonParams::new(eps, 1.0)).unwrap();
    let gap = fast.phi.zip_map(&fv.phi, |a, b| a - b).max_abs() / fast.phi.max_abs();
    assert!(gap < 1e-4, "{gap}");
    // the Dirichlet box lowers φ by roughly the missing far-field value
    let bg = boxed(12.0, 47);
    let ub = ScalarField::from_fn(bg.clone(), |x| prof((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()));
    let bsol = solve_phi(&ub.map(|v| v * v), &PoissonParams::new(eps, 1.0)).unwrap();
    let mid = bg.as_box().unwrap().index(23, 23, 23);
    let centre = fast.phi.values()[0];
    assert!((bsol.phi.values()[mid] - centre).abs() / centre < 0.15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn potential_is_nonnegative(seed in 0u64..1000, beta in 0.0f64..3.0) {
        let grid = boxed(4.0, 13);
        let src = bumpy_source(&grid, seed);
        let sol = solve_phi(&src, &PoissonParams::new(0.3, beta)).unwrap();
        let floor = -10.0 * 1e-8 * sol.phi.max_abs();
        prop_assert!(sol.phi.values().iter().all(|&v| v >= floor));
    }

    #[test]
    fn minimum_energy_grows_with_beta(seed in 0u64..1000, b1 in 0.0f64..2.0, db in 0.0f64..2.0) {
        let grid = boxed(4.0, 13);
        let src = bumpy_source(&grid, seed);
        let lo = solve_phi(&src, &PoissonParams::new(0.3, b1)).unwrap().energy_value;
        let hi = solve_phi(&src, &PoissonParams::new(0.3, b1 + db)).unwrap().energy_value;
        prop_assert!(hi >= lo - 1e-12 * lo.abs());
    }

    #[test]
    fn identity_residual_within_ten_tol(seed in 0u64..1000, beta in 0.0f64..3.0) {
        let grid = radial(8.0, 96);
        let src = bumpy_source(&grid, seed);
        let params = PoissonParams::new(0.2, beta);
        let sol = solve_phi(&src, &params).unwrap();
        prop_assert!(sol.identity_residual <= 10.0 * params.tol);
    }
}
