//! Batch drivers on top of the reduction: scans of `J̃_ε`, critical points,
//! concentration studies and their files.

mod concentration;
mod config;
mod critical;
mod plots;
mod scan;

pub use concentration::{
    concentration_from_csv, concentration_study, concentration_to_csv, limit_point, shifted_values,
    write_concentration, ConcentrationRow, CONCENTRATION_COLUMNS,
};
pub use config::{parse_config, DetectAt, ExperimentConfig, ScanRegion, EPS_CAP};
pub use critical::{find_critical_points, Classification, CriticalPoint, CriticalPointReport};
pub use plots::{
    concentration_chart, emit_plots, expansion_chart, j_tilde_chart, render_chart, render_heatmap, Chart, Series,
};
pub use scan::{scan_reduced, scan_reduced_with, shoot_profile, thread_count, ScanRow, ScanTable, SCAN_COLUMNS};

/// Least-squares slope of `log y` against `log x`. Pairs with a
/// non-positive entry are skipped; `NaN` with fewer than two left.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests;
