use std::path::PathBuf;

use qslsp_core::experiments::{
    concentration_chart, emit_plots, expansion_chart, j_tilde_chart, render_chart, ConcentrationRow, ScanRow, ScanTable,
};
use qslsp_core::reduction::ReducedSample;

fn row(eps: f64, x: f64) -> ScanRow {
    let z = [x / eps, 0.0, 0.0];
    let j = 1.0 + 0.5 * (-x * x).exp();
    let sample = ReducedSample {
        eps,
        z,
        j_tilde: j + eps * eps,
        leading: j,
        leading_continuum: j,
        expansion_error: eps * eps,
        grad_j_tilde: [-eps * x, 0.0, 0.0],
        predicted_grad: [-eps * x * (1.0 + eps), 0.0, 0.0],
        w_norm: eps,
        iterations: 5,
    };
    ScanRow {
        eps,
        node: 0,
        z,
        sample: Some(sample),
        status: "ok".into(),
    }
}

fn fixture() -> ScanTable {
    let mut rows = Vec::new();
    for eps in [0.2, 0.1] {
        for k in 0..5 {
            rows.push(row(eps, -1.0 + 0.5 * k as f64));
        }
    }
    ScanTable { rows }
}

fn conc(n: usize) -> Vec<ConcentrationRow> {
    [0.2, 0.1, 0.05]
        .iter()
        .take(n)
        .map(|&eps| ConcentrationRow {
            eps,
            z_star: [0.0; 3],
            distance: eps,
            w_norm: eps,
            grad_norm: 0.0,
        })
        .collect()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qslsp-plots-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn empty_tables_give_bare_axes() {
    for svg in [
        render_chart(&j_tilde_chart(&ScanTable::default())),
        render_chart(&expansion_chart(&ScanTable::default())),
        render_chart(&concentration_chart(&[])),
    ] {
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("<polyline"));
        assert_eq!(svg.matches("<line ").count(), 10, "five ticks per axis");
    }
}

#[test]
fn two_rows_make_one_polyline() {
    let svg = render_chart(&concentration_chart(&conc(2)));
    assert_eq!(svg.matches("<polyline").count(), 1);
}

#[test]
fn plots_are_byte_identical() {
    let (a, b) = (tmp("a"), tmp("b"));
    let scan = fixture();
    let rows = conc(3);
    let wa = emit_plots(Some(&scan), Some(&rows), &a).unwrap();
    let wb = emit_plots(Some(&scan), Some(&rows), &b).unwrap();
    assert_eq!(wa.len(), 3);
    for (x, y) in wa.iter().zip(&wb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let _ = std::fs::remove_dir_all(a);
    let _ = std::fs::remove_dir_all(b);
}

#[test]
fn two_dimensional_scans_get_a_heatmap() {
    let mut rows = Vec::new();
    for i in 0..3 {
        for j in 0..2 {
            let mut r = row(0.1, 0.5 * i as f64);
            r.z[1] = j as f64 / 0.1;
            rows.push(r);
        }
    }
    let dir = tmp("heat");
    let written = emit_plots(Some(&ScanTable { rows }), None, &dir).unwrap();
    let heat = written.iter().find(|p| p.ends_with("j_tilde_heatmap.svg")).expect("heatmap");
    let svg = std::fs::read_to_string(heat).unwrap();
    // frame, background and six cells
    assert_eq!(svg.matches("<rect").count(), 8);
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn golden_reduced_functional_plot() {
    let svg = render_chart(&j_tilde_chart(&fixture()));
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/j_tilde_golden.svg");
    if std::env::var_os("QSLSP_BLESS").is_some() {
        std::fs::write(&path, &svg).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden file; regenerate with QSLSP_BLESS=1");
    assert_eq!(svg, golden);
}
