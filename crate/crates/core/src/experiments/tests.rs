use proptest::prelude::*;

use super::*;
use crate::discretization::BoxGrid;
use crate::error::Error;

const BASE: &str = "\
# single bump on the first axis
potential = bump(1, 0.5, 0, 0, 0, 1)
eps = 0.2, 0.1
scan_lo = -0.6, 0, 0
scan_hi = 0.6, 0, 0
scan_n = 7, 1, 1
box_n = 31
gradient_axes = 1, 0, 0
cup_length_plus_one = 1
";

fn cfg(text: &str) -> ExperimentConfig {
    parse_config(text).unwrap()
}

/// `BASE` with the keys of `extra` replaced.
fn with(extra: &str) -> ExperimentConfig {
    let key = |l: &str| l.split('=').next().unwrap_or("").trim().to_string();
    let keys: Vec<String> = extra.lines().map(key).collect();
    let kept: Vec<&str> = BASE.lines().filter(|l| !keys.contains(&key(l))).collect();
    cfg(&format!("{}\n{extra}", kept.join("\n")))
}

#[test]
fn minimal_config_fills_defaults() {
    let c = cfg("potential = constant(1.5)\n");
    assert_eq!(c.eps_list, vec![0.2, 0.1, 0.05]);
    assert_eq!(c.params.p, 2.0);
    assert_eq!(c.params.beta, 1.0);
    assert_eq!(c.reduction.n, 63);
    assert_eq!(c.reduction.half_width, 9.0);
    assert_eq!(c.cup_length_plus_one, 2);
    assert_eq!(c.detect_at, DetectAt::Smallest);
    assert_eq!(c.x0, None);
}

#[test]
fn config_errors_carry_line_numbers() {
    let dup = "potential = constant(1)\n# note\nbeta = 1\nbeta = 0\n";
    assert!(matches!(parse_config(dup), Err(Error::Parse { line: 4, .. })));
    let unknown = "potential = constant(1)\ncolour = red\n";
    assert!(matches!(parse_config(unknown), Err(Error::Parse { line: 2, .. })));
    let junk = "potential = constant(1)\nbeta 1\n";
    assert!(matches!(parse_config(junk), Err(Error::Parse { line: 2, .. })));
    let bad = "eps = 0.1, x\npotential = constant(1)\n";
    assert!(matches!(parse_config(bad), Err(Error::Parse { line: 1, .. })));
    let pot = "potential = blob(1)\n";
    assert!(matches!(parse_config(pot), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn config_rejects_bad_ranges() {
    for text in [
        "potential = constant(1)\neps = 0.5\n",
        "potential = constant(1)\neps = 0.1, 0.2\n",
        "potential = constant(1)\neps = 0.1, 0.1\n",
        "potential = constant(1)\neps = 0\n",
        "potential = constant(-1)\n",
        "potential = bump(0.1, -1, 0, 0, 0, 1)\n",
        "beta = 1\n",
        "potential = constant(1)\nscan_n = 3, 0, 1\n",
        "potential = constant(1)\nbox_n = 32\n",
    ] {
        assert!(matches!(parse_config(text), Err(Error::Config(_))), "{text}");
    }
}

#[test]
fn region_lattice_round_trips() {
    let r = ScanRegion {
        lo: [-1.0, 0.0, 2.0],
        hi: [1.0, 1.0, 2.0],
        n: [5, 3, 1],
    };
    assert_eq!(r.len(), 15);
    assert_eq!(r.scanned_axes(), vec![0, 1]);
    for i in 0..r.len() {
        assert_eq!(r.index(r.coords(i)), i);
    }
    assert_eq!(r.node(0), [-1.0, 0.0, 2.0]);
    assert_eq!(r.node(14), [1.0, 1.0, 2.0]);
    assert!(r.contains([1.4, 0.5, 2.0], 1.0));
    assert!(!r.contains([1.6, 0.5, 2.0], 1.0));
}

proptest! {
    #[test]
    fn loglog_slope_recovers_power_laws(k in -3.0f64..3.0, c in 0.01f64..100.0) {
        let x = [0.2, 0.141, 0.1, 0.07, 0.05];
        let y: Vec<f64> = x.iter().map(|e: &f64| c * e.powf(k)).collect();
        prop_assert!((loglog_slope(&x, &y) - k).abs() < 1e-10);
    }

    #[test]
    fn integer_shifts_are_exact(s in -3i32..=3, t in -3i32..=3, seed in 0u64..1000) {
        let g = BoxGrid::new(1.0, 9).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| ((i as u64 * 7919 + seed) % 101) as f64).collect();
        let shifted = shifted_values(&g, &f, [s as f64 * g.h(), t as f64 * g.h(), 0.0]);
        for idx in 0..g.len() {
            let (i, j, k) = g.coords(idx);
            let (a, b) = (i as i32 + s, j as i32 + t);
            let want = if (0..9).contains(&a) && (0..9).contains(&b) {
                f[g.index(a as usize, b as usize, k)]
            } else {
                0.0
            };
            prop_assert_eq!(shifted[idx], want);
        }
    }
}

#[test]
fn fractional_shifts_reproduce_quadratics() {
    let g = BoxGrid::new(2.0, 17).unwrap();
    let q = |x: [f64; 3]| 1.0 + x[0] - 2.0 * x[1] * x[1] + 0.5 * x[0] * x[2];
    let f: Vec<f64> = (0..g.len()).map(|i| q(g.position(i))).collect();
    let shift = [0.37 * g.h(), -1.61 * g.h(), 0.5 * g.h()];
    let out = shifted_values(&g, &f, shift);
    for idx in 0..g.len() {
        let (i, j, k) = g.coords(idx);
        // stencils reaching past the edge see zeros
        if [i, j, k].iter().any(|&c| c < 3 || c > 13) {
            continue;
        }
        let x = g.position(idx);
        let want = q([x[0] + shift[0], x[1] + shift[1], x[2] + shift[2]]);
        assert!((out[idx] - want).abs() < 1e-12, "{} vs {want}", out[idx]);
    }
}

#[test]
fn constant_potential_scan_is_flat_and_has_no_isolated_points() {
    let c = cfg("potential = constant(1.3)\neps = 0.1\nscan_lo = -2, 0, 0\nscan_hi = 2, 0, 0\nscan_n = 5, 1, 1\nbox_n = 31\n");
    let scan = scan_reduced_with(&c, 2).unwrap();
    assert_eq!(scan.rows.len(), 5);
    let j: Vec<f64> = scan.rows.iter().map(|r| r.sample.unwrap().j_tilde).collect();
    for v in &j {
        assert!((v - j[0]).abs() <= 1e-8, "{j:?}");
    }
    let reports = find_critical_points(&scan, &c).unwrap();
    assert_eq!(reports.len(), 1);
    assert!(reports[0].plateau);
    assert!(reports[0].points.is_empty());
}

#[test]
fn scans_are_reproducible_and_survive_csv() {
    let c = with("eps = 0.1\nscan_n = 3, 1, 1\n");
    let a = scan_reduced_with(&c, 1).unwrap();
    let b = scan_reduced_with(&c, 3).unwrap();
    let text = a.to_csv();
    assert_eq!(text, b.to_csv());
    assert_eq!(text.lines().next().unwrap(), SCAN_COLUMNS.join(","));
    let back = ScanTable::from_csv(&text).unwrap();
    assert_eq!(back.to_csv(), text);
}

#[test]
fn failed_points_become_status_rows() {
    let mut c = with("eps = 0.2\n");
    c.reduction.max_iter = 1;
    c.reduction.tol_aux = 1e-14;
    let scan = scan_reduced_with(&c, 1).unwrap();
    assert_eq!(scan.rows.len(), 7);
    assert!(scan.rows.iter().all(|r| !r.is_ok() && r.status != "ok"));
    let text = scan.to_csv();
    assert!(text.lines().skip(1).all(|l| l.contains(",nan,")));
    assert_eq!(ScanTable::from_csv(&text).unwrap().rows.len(), 7);
}

#[test]
fn bump_maximum_is_found_where_the_leading_term_peaks() {
    let c = with("");
    let scan = scan_reduced_with(&c, 1).unwrap();
    let rows: Vec<_> = scan.at_eps(0.1).collect();
    let argmax = |key: &dyn Fn(&ReducedSampleRef) -> f64| {
        (0..rows.len())
            .max_by(|&a, &b| key(rows[a].sample.as_ref().unwrap()).total_cmp(&key(rows[b].sample.as_ref().unwrap())))
            .unwrap()
    };
    let a = argmax(&|s| s.j_tilde) as i64;
    let b = argmax(&|s| s.leading) as i64;
    assert!((a - b).abs() <= 1, "{a} {b}");

    let reports = find_critical_points(&scan, &c).unwrap();
    let r = &reports[0];
    assert_eq!(r.eps, 0.1);
    assert!(r.passed(), "{r:#?}");
    let top = &r.points[0];
    assert!(top.x[0].abs() < 0.2, "{:?}", top.x);
    assert!(top.grad_norm <= c.tol_crit);
    // a maximum of V along every direction
    assert_eq!(top.classification, Classification::Max, "{:?}", top.eigenvalues);
    // the symmetric maximum is exactly on the lattice
    assert!(top.satisfies_constraint());
}

type ReducedSampleRef = crate::reduction::ReducedSample;

#[test]
fn newton_failures_drop_seeds_with_a_log_entry() {
    let c = with("eps = 0.1\nnewton_max_iter = 0\nscan_lo = -0.5, 0, 0\nscan_hi = 0.7, 0, 0\nscan_n = 4, 1, 1\n");
    let scan = scan_reduced_with(&c, 1).unwrap();
    let r = &find_critical_points(&scan, &c).unwrap()[0];
    assert!(r.points.is_empty());
    assert!(!r.log.is_empty());
    assert!(r.log.iter().all(|l| l.contains("dropped")), "{:?}", r.log);
    assert!(!r.passed());
}

#[test]
fn ring_critical_points_sit_on_the_ring() {
    let c = cfg("\
potential = ring(1, 0.5, 0.6, 0.4)
eps = 0.1
scan_lo = 0.2, 0, 0
scan_hi = 1.0, 0, 0
scan_n = 9, 1, 1
box_n = 31
gradient_axes = 1, 0, 0
cup_length_plus_one = 1
");
    let scan = scan_reduced_with(&c, 1).unwrap();
    let r = &find_critical_points(&scan, &c).unwrap()[0];
    assert!(!r.points.is_empty(), "{r:#?}");
    let cell = c.region.cell()[0];
    for p in &r.points {
        let rho = (p.x[0] * p.x[0] + p.x[1] * p.x[1]).sqrt();
        assert!((rho - 0.6).abs() <= 2.0 * cell, "{rho}");
    }
}

#[test]
fn ring_values_do_not_depend_on_the_angle() {
    let c = cfg("potential = ring(1, 0.5, 0.6, 0.4)\neps = 0.1\nbox_n = 31\n");
    let prof = shoot_profile(&c).unwrap();
    let r = crate::reduction::Reducer::new(prof, c.params.clone(), c.reduction_settings()).unwrap();
    let eps = 0.1;
    let at = |x: [f64; 3]| r.reduced_value(eps, x.map(|v| v / eps)).unwrap().sample.j_tilde;
    let around: Vec<f64> = [0.0f64, 0.4, 0.7854, 1.2]
        .iter()
        .map(|t| at([0.6 * t.cos(), 0.6 * t.sin(), 0.0]))
        .collect();
    let range = (around[0] - at([0.0; 3])).abs();
    let spread = around.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - around.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread <= 1e-3 * range, "{spread:e} vs {range:e}");
}

#[test]
fn constant_potential_solutions_sit_at_the_ansatz() {
    let c = cfg("potential = constant(1.3)\neps = 0.2, 0.1\ncoupling = false\nx0 = 0.3, 0, 0\nbox_n = 31\n");
    let rows = concentration_study(&c).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r.distance < 1e-10, "{r:?}");
        assert!((r.z_star[0] * r.eps - 0.3).abs() < 1e-12);
    }
    let back = concentration_from_csv(&concentration_to_csv(&rows)).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[1].eps, 0.1);
}

#[test]
fn limit_point_defaults_to_the_critical_point_of_v() {
    let c = with("");
    let x0 = limit_point(&c).unwrap();
    assert!(x0.iter().all(|v| v.abs() < 1e-10), "{x0:?}");
}
