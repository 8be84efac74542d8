use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use qslsp_core::discretization::write_field;
use qslsp_core::experiments::{
    concentration_from_csv, concentration_study, emit_plots, find_critical_points, loglog_slope, parse_config,
    scan_reduced, write_concentration, ExperimentConfig, ScanTable,
};
use qslsp_core::profile::{profile_constants, shoot_ground_state};
use qslsp_core::quasipoisson::{solve_phi, solve_phi_radial};
use qslsp_core::reduction::Reducer;
use qslsp_core::{BoxGrid, Error, Grid, PoissonParams, RadialGrid, ScalarField};

/// Exit code when a run finishes but its checks fail.
const CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "qslsp", version, about = "Spike solutions of a quasilinear Schrödinger–Poisson system")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    /// `u = exp(−|x|²/2)`
    Gaussian,
    /// `u = U(|x|)`, the ground state for `p = 3`
    Profile,
}

#[derive(Subcommand)]
enum Cmd {
    /// Shoot the radial ground state and write its table.
    Profile {
        #[arg(long, default_value_t = 3.0)]
        p: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the quasilinear Poisson equation for a fixed source.
    Poisson {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = Source::Gaussian)]
        source: Source,
        /// Radial nodes; ignored with --box-n.
        #[arg(long, default_value_t = 2048)]
        n: usize,
        #[arg(long, default_value_t = 16.0)]
        r_max: f64,
        /// Solve on an n³ box of half width r_max instead of the radial grid.
        #[arg(long)]
        box_n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduced functional at one point.
    Reduce {
        #[arg(long)]
        eps: f64,
        /// Rescaled position, `z1,z2,z3`.
        #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
        z: [f64; 3],
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample the reduced functional over the scan region.
    Scan {
        #[arg(long)]
        config: PathBuf,
    },
    /// Detect and classify critical points of the reduced functional.
    Critical {
        #[arg(long)]
        config: PathBuf,
        /// Rescan even when the output directory already holds scan.csv.
        #[arg(long)]
        rescan: bool,
    },
    /// Distance of the constructed solutions to the ansatz at x₀/ε.
    Concentrate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render SVG plots from the tables in a directory.
    Plots {
        #[arg(long = "in")]
        dir: PathBuf,
    },
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "expected three comma-separated numbers".to_string())
}

fn load(path: &Path) -> qslsp_core::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn out_dir(cfg: &ExperimentConfig) -> qslsp_core::Result<&Path> {
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::Config(format!("{}: {e}", cfg.output.display())))?;
    Ok(&cfg.output)
}

fn write_text(path: &Path, text: &str) -> qslsp_core::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn print(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cmd: Cmd) -> qslsp_core::Result<u8> {
    match cmd {
        Cmd::Profile { p, tol, out } => {
            let prof = shoot_ground_state(p, tol)?;
            let mut csv = String::from("r,U,dU\n");
            for ((r, u), du) in prof.radii().zip(prof.table_u()).zip(prof.table_du()) {
                let _ = writeln!(csv, "{r:.12e},{u:.16e},{du:.16e}");
            }
            write_text(&out, &csv)?;
            let sidecar = json!({
                "p": prof.p,
                "u0": prof.u0,
                "bracket_width": prof.bracket_width,
                "r_cut": prof.r_cut,
                "tail_amplitude": prof.tail_amplitude,
                "tail_rate_fit": prof.tail_rate_fit,
                "constants": profile_constants(&prof),
            });
            write_text(&out.with_extension("json"), &serde_json::to_string_pretty(&sidecar).expect("json"))?;
            print(&sidecar);
            Ok(0)
        }
        Cmd::Poisson {
            eps,
            beta,
            source,
            n,
            r_max,
            box_n,
            out,
        } => {
            let grid: Arc<Grid> = match box_n {
                Some(m) => Arc::new(BoxGrid::new(r_max, m)?.into()),
                None => Arc::new(RadialGrid::new(r_max, n)?.into()),
            };
            let r = |x: [f64; 3]| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let u = match source {
                Source::Gaussian => ScalarField::from_fn(grid.clone(), |x| (-0.5 * r(x) * r(x)).exp()),
                Source::Profile => {
                    let prof = shoot_ground_state(3.0, 1e-10)?;
                    ScalarField::from_fn(grid.clone(), |x| prof.value(r(x)))
                }
            };
            let params = PoissonParams::new(eps, beta);
            let sol = match &*grid {
                Grid::Radial(_) => solve_phi_radial(&u, &params)?,
                Grid::Box(_) => solve_phi(&u.map(|v| v * v), &params)?,
            };
            write_field(&out, &sol.phi)?;
            print(&serde_json::to_value(sol.diagnostics()).expect("json"));
            Ok(0)
        }
        Cmd::Reduce { eps, z, config } => {
            let cfg = load(&config)?;
            let prof = Arc::new(shoot_ground_state(cfg.params.p, 1e-12)?);
            let reducer = Reducer::new(prof, cfg.params.clone(), cfg.reduction_settings())?;
            let pt = reducer.reduced_value(eps, z)?;
            print(&serde_json::to_value(pt.sample).expect("json"));
            Ok(0)
        }
        Cmd::Scan { config } => {
            let cfg = load(&config)?;
            let dir = out_dir(&cfg)?;
            let scan = scan_reduced(&cfg)?;
            let path = dir.join("scan.csv");
            scan.write(&path)?;
            let failed = scan.rows.iter().filter(|r| !r.is_ok()).count();
            print(&json!({"rows": scan.rows.len(), "failed": failed, "csv": path}));
            Ok(0)
        }
        Cmd::Critical { config, rescan } => {
            let cfg = load(&config)?;
            let dir = out_dir(&cfg)?;
            let path = dir.join("scan.csv");
            let scan = if path.exists() && !rescan {
                ScanTable::read(&path)?
            } else {
                let s = scan_reduced(&cfg)?;
                s.write(&path)?;
                s
            };
            let reports = find_critical_points(&scan, &cfg)?;
            for r in &reports {
                for line in &r.log {
                    eprintln!("{line}");
                }
            }
            let value = serde_json::to_value(&reports).expect("json");
            write_text(&dir.join("critical.json"), &serde_json::to_string_pretty(&value).expect("json"))?;
            print(&value);
            let ok = reports.iter().all(|r| r.passed());
            if !ok {
                eprintln!("FAILED: fewer than {} critical points or a failed constraint check", cfg.cup_length_plus_one);
            }
            Ok(if ok { 0 } else { CHECK_FAILED })
        }
        Cmd::Concentrate { config } => {
            let cfg = load(&config)?;
            let dir = out_dir(&cfg)?;
            let rows = concentration_study(&cfg)?;
            write_concentration(&dir.join("concentration.csv"), &rows)?;
            let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
            let dist: Vec<f64> = rows.iter().map(|r| r.distance).collect();
            let decreasing = dist.windows(2).all(|w| w[1] < w[0]);
            print(&json!({
                "rows": rows,
                "slope": loglog_slope(&eps, &dist),
                "strictly_decreasing": decreasing,
            }));
            Ok(if decreasing { 0 } else { CHECK_FAILED })
        }
        Cmd::Plots { dir } => {
            if !dir.is_dir() {
                return Err(Error::Config(format!("{} is not a directory", dir.display())));
            }
            let scan_path = dir.join("scan.csv");
            let scan = if scan_path.exists() { Some(ScanTable::read(&scan_path)?) } else { None };
            let conc_path = dir.join("concentration.csv");
            let conc = if conc_path.exists() {
                let text = std::fs::read_to_string(&conc_path).map_err(|e| Error::Config(format!("{}: {e}", conc_path.display())))?;
                Some(concentration_from_csv(&text)?)
            } else {
                None
            };
            let written = emit_plots(scan.as_ref(), conc.as_deref(), &dir)?;
            print(&json!({ "written": written }));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("qslsp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
