use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};

use super::*;
use crate::discretization::{inner_h1, BoxGrid, Grid, RadialGrid, ScalarField};
use crate::profile::{profile_constants, shoot_ground_state, ScaledProfile};
use crate::quasipoisson::{solve_phi_radial, PoissonParams};
use crate::RadialProfile;

fn profile(p: f64) -> Arc<RadialProfile> {
    static P2: OnceLock<Arc<RadialProfile>> = OnceLock::new();
    static P3: OnceLock<Arc<RadialProfile>> = OnceLock::new();
    let cell = if p == 2.0 { &P2 } else { &P3 };
    cell.get_or_init(|| Arc::new(shoot_ground_state(p, 1e-12).unwrap())).clone()
}

fn radial(r_max: f64, n: usize) -> Arc<Grid> {
    Arc::new(RadialGrid::new(r_max, n).unwrap().into())
}

fn small_box() -> Arc<Grid> {
    Arc::new(BoxGrid::new(6.0, 17).unwrap().into())
}

fn bump() -> PotentialSpec {
    PotentialSpec::bump(1.0, 1.0, [0.5, 0.0, 0.0], 1.0)
}

fn smooth_field(grid: &Arc<Grid>, seed: u64, amp: f64) -> ScalarField {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<[f64; 5]> = (0..4)
        .map(|_| {
            [
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.3..0.8),
            ]
        })
        .collect();
    ScalarField::from_fn(grid.clone(), |x| {
        amp * c
            .iter()
            .map(|b| {
                let d = (x[0] - b[0]).powi(2) + (x[1] - b[1]).powi(2) + (x[2] - b[2]).powi(2);
                b[3] * (-b[4] * d).exp()
            })
            .sum::<f64>()
    })
}

fn base_state(grid: &Arc<Grid>) -> ScalarField {
    ScalarField::from_fn(grid.clone(), |x| {
        2.0 * (-0.4 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
    })
}

#[test]
fn zero_field_has_zero_energy() {
    let grid = small_box();
    let e = j_eps(&ScalarField::zeros(grid.clone()), &ProblemParams::new(0.1, 1.0, 3.0, bump())).unwrap();
    assert!(e.degenerate);
    assert_eq!(e.total, 0.0);
    assert_eq!(i_bar(&ScalarField::zeros(grid), 1.0, 3.0), 0.0);
}

#[test]
fn rejects_nonpositive_potential() {
    let grid = small_box();
    let params = ProblemParams::new(0.5, 1.0, 3.0, PotentialSpec::bump(0.5, -1.0, [0.0; 3], 1.0));
    assert!(matches!(Functional::new(grid, params), Err(crate::Error::Config(_))));
}

#[test]
fn uncoupled_energy_of_profile_is_leading_term() {
    for p in [2.0, 3.0] {
        let prof = profile(p);
        let c = profile_constants(&prof);
        let lambda2 = 1.7;
        let v = PotentialSpec::constant(lambda2);
        let grid = radial(20.0, 4001);
        let u = ScaledProfile::new(prof.clone(), 0.1, [0.0; 3], &v).unwrap().sample(&grid).unwrap();
        let params = ProblemParams::new(0.1, 0.0, p, v).uncoupled();
        let j = j_eps(&u, &params).unwrap().total;
        let expected = c.leading(lambda2);
        assert!((j / expected - 1.0).abs() < 1e-4, "p={p}: {j} vs {expected}");
        let ib = i_bar(&u, lambda2.sqrt(), p);
        assert!((ib - j).abs() < 1e-12 * j.abs());
    }
}

#[test]
fn i_bar_identities() {
    let prof = profile(3.0);
    let c = profile_constants(&prof);
    let grid = radial(24.0, 6001);
    let base = ScaledProfile::new(prof.clone(), 0.1, [0.0; 3], &PotentialSpec::constant(1.0))
        .unwrap()
        .sample(&grid)
        .unwrap();
    let one = i_bar(&base, 1.0, 3.0);
    assert!((one / c.c0 - 1.0).abs() < 1e-4);
    for lambda in [0.5, 2.0] {
        let v = PotentialSpec::constant(lambda * lambda);
        let u = ScaledProfile::new(prof.clone(), 0.1, [0.0; 3], &v).unwrap().sample(&grid).unwrap();
        let scaled = i_bar(&u, lambda, 3.0);
        let expected = lambda.powf(2.0 * c.theta) * one;
        assert!((scaled / expected - 1.0).abs() < 1e-3, "{lambda}: {scaled} vs {expected}");
    }
}

#[test]
fn matches_newtonian_schrodinger_poisson_energy() {
    // β = 0: J = ½‖u‖²_{H¹_ε} + ¼∫φu² − ‖u‖^{p+1}/(p+1) with the Newtonian φ
    let eps = 0.2;
    let grid = radial(16.0, 2048);
    let u = ScalarField::from_fn(grid.clone(), |x| 1.5 * (-0.5 * x[0] * x[0]).exp());
    let params = ProblemParams::new(eps, 0.0, 3.0, PotentialSpec::constant(1.3));
    let j = j_eps(&u, &params).unwrap();
    let phi = solve_phi_radial(&u, &PoissonParams::new(eps, 0.0)).unwrap().phi;
    let coupling: f64 = (0..grid.len())
        .map(|i| grid.mass(i) * phi.values()[i] * u.values()[i].powi(2))
        .sum();
    let expected = j.quadratic + 0.25 * coupling + j.nonlinear;
    assert!((j.total / expected - 1.0).abs() < 1e-6, "{} vs {expected}", j.total);
}

#[test]
fn coupling_terms_split_exactly() {
    let grid = small_box();
    let u = base_state(&grid);
    let params = ProblemParams::new(0.2, 1.0, 3.0, bump());
    let full = j_eps(&u, &params).unwrap();
    let plain = j_eps(&u, &params.clone().uncoupled()).unwrap();
    let diff = full.total - plain.total;
    let phi_terms = full.phi_source + full.phi_field;
    assert!((diff - phi_terms).abs() <= 1e-14 * full.total.abs());
    assert!(phi_terms > 0.0);
}

#[test]
fn gradient_matches_central_differences() {
    let grid = small_box();
    let u = base_state(&grid);
    let params = ProblemParams::new(0.3, 1.0, 3.0, bump());
    let f = Functional::new(grid.clone(), params).unwrap();
    let grad = ScalarField::new(grid.clone(), f.gradient_at(&f.linearize(&u).unwrap())).unwrap();
    for seed in 0..10 {
        let w = smooth_field(&grid, seed, 1.0);
        let exact = inner_h1(&grad, &w, None).unwrap();
        let j = |t: f64| {
            let mut v = u.clone();
            v.axpy(t, &w);
            f.value(&v).unwrap().total
        };
        // smallest error over a step sweep, as round-off and truncation trade off
        let best = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
            .iter()
            .map(|&t| ((j(t) - j(-t)) / (2.0 * t) - exact).abs() / exact.abs())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-5, "seed {seed}: {best}");
    }
}

#[test]
fn hessian_matches_differenced_gradients_and_is_symmetric() {
    let grid = small_box();
    let u = base_state(&grid);
    let params = ProblemParams::new(0.3, 1.0, 3.0, bump());
    let f = Functional::new(grid.clone(), params).unwrap();
    let lin = f.linearize(&u).unwrap();
    let w1 = smooth_field(&grid, 11, 1.0);
    let w2 = smooth_field(&grid, 12, 1.0);
    let h1 = ScalarField::new(grid.clone(), f.hessian_apply(&lin, w1.values()).unwrap()).unwrap();
    let h2 = ScalarField::new(grid.clone(), f.hessian_apply(&lin, w2.values()).unwrap()).unwrap();
    let a = inner_h1(&h1, &w2, None).unwrap();
    let b = inner_h1(&h2, &w1, None).unwrap();
    assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()), "{a} {b}");

    let t = 1e-4;
    let grad_at = |s: f64| {
        let mut v = u.clone();
        v.axpy(s, &w1);
        ScalarField::new(grid.clone(), f.gradient_at(&f.linearize(&v).unwrap())).unwrap()
    };
    let fd = grad_at(t).zip_map(&grad_at(-t), |x, y| (x - y) / (2.0 * t));
    let diff = fd.zip_map(&h1, |x, y| x - y);
    let rel = inner_h1(&diff, &diff, None).unwrap().sqrt() / inner_h1(&h1, &h1, None).unwrap().sqrt();
    assert!(rel < 1e-4, "{rel}");
}

#[test]
fn profile_is_critical_for_constant_potential_without_coupling() {
    let prof = profile(2.0);
    let grid = radial(20.0, 2001);
    let v = PotentialSpec::constant(1.0);
    let u = ScaledProfile::new(prof, 0.1, [0.0; 3], &v).unwrap().sample(&grid).unwrap();
    let params = ProblemParams::new(0.1, 0.0, 2.0, v).uncoupled();
    let g = grad_j_eps(&u, &params).unwrap();
    let rel = inner_h1(&g, &g, None).unwrap().sqrt() / inner_h1(&u, &u, None).unwrap().sqrt();
    // second-order consistency of the radial scheme at h = 0.01
    assert!(rel < 1e-3, "{rel}");
}
