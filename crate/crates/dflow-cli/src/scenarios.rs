//! Scenario dispatch: every run builds its inputs from the configuration,
//! calls into the library, and writes CSV artifacts plus a manifest. The
//! science lives in the library; this module only orchestrates files.

use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dflow::covariant::{AmbientCurve, FlowParams};
use dflow::flow::{self, presets};
use dflow::gauge::cancellation_probe;
use dflow::grid::{ComplexField, Grid};
use dflow::linear::LinearCoeffs;
use dflow::manifold::Target;
use dflow::report;

use crate::config::{Preset, RunConfig, Scenario};

/// Failure categories mapped onto process exit codes.
#[derive(Debug)]
pub enum RunError {
    /// Exit 2: invalid configuration.
    Config(String),
    /// Exit 3: numerical blow-up or an unresolvable numerical state.
    Numerical(String),
    /// Exit 4: filesystem failure.
    Io(String),
    /// Exit 1: an invariant check failed.
    Invariant(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invariant(_) => 1,
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            RunError::Config(m)
            | RunError::Numerical(m)
            | RunError::Io(m)
            | RunError::Invariant(m) => m,
        }
    }
}

fn io_err(path: &std::path::Path) -> impl FnOnce(dflow::Error) -> RunError + '_ {
    move |e| RunError::Io(format!("{}: {e}", path.display()))
}

fn lib_err(e: dflow::Error) -> RunError {
    match e {
        dflow::Error::BlowUp { .. } | dflow::Error::NonFinite { .. } => {
            RunError::Numerical(e.to_string())
        }
        dflow::Error::Io(inner) => RunError::Io(inner.to_string()),
        other => RunError::Config(other.to_string()),
    }
}

/// Deterministic band-limited complex initial datum for the linear lab.
fn linear_initial_state(grid: &Grid, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n();
    let band = (n / 8).max(4);
    let mut coeffs = vec![Complex64::default(); n];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let j = grid.mode_index(i).unsigned_abs();
        if j <= band {
            *c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                / (1.0 + j as f64);
        }
    }
    ComplexField::from_spectrum(grid, &coeffs).expect("coefficient count matches the grid")
}

/// Canonical flow initial data for a target (and optional named preset).
pub fn flow_initial_data(cfg: &RunConfig, grid: &Grid) -> Result<AmbientCurve, dflow::Error> {
    match cfg.target {
        Target::S2 => {
            if cfg.preset == Some(Preset::DaRios) {
                presets::latitude_circle(grid, std::f64::consts::PI / 3.0, 1)
            } else {
                presets::wobbly_s2(grid)
            }
        }
        Target::S6 => presets::generic_s6(grid),
        Target::FlatC => presets::flatc_smooth(grid),
    }
}

fn flow_params(cfg: &RunConfig, grid: &Grid, u0: &AmbientCurve) -> Result<FlowParams, RunError> {
    let dt = cfg
        .dt
        .unwrap_or_else(|| FlowParams::stable_dt(grid, cfg.a, cfg.eps, flow::max_speed(u0)));
    let mut p =
        FlowParams::new(cfg.a, cfg.b, cfg.eps, cfg.k_gauge, dt, cfg.t_end).map_err(lib_err)?;
    let steps = (cfg.t_end / dt).ceil().max(1.0) as usize;
    p.diag_stride = (steps / 256).max(1);
    Ok(p)
}

/// Execute the configured scenario; returns the artifact paths written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, RunError> {
    let started = Instant::now();
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| RunError::Io(format!("{}: {e}", cfg.output_dir.display())))?;
    let grid = Grid::new(cfg.n, cfg.period).map_err(lib_err)?;
    let mut artifacts = Vec::new();
    let mut numerical_failure: Option<String> = None;

    match cfg.scenario {
        Scenario::LinearLab => {
            let coeffs = LinearCoeffs::default_preset(&grid);
            let u0 = linear_initial_state(&grid, cfg.seed);
            let dt = cfg.dt.unwrap_or_else(|| coeffs.suggested_dt());
            let traj = coeffs.evolve(&u0, cfg.t_end, dt).map_err(lib_err)?;
            let csv = report::linear_csv(&traj.samples);
            let path = cfg.output_dir.join("linear_lab.csv");
            report::write_text(&path, &csv).map_err(io_err(&path))?;
            artifacts.push(path.clone());
            if cfg.emit_svg {
                let svg = report::svg_from_csv(
                    &csv,
                    "t",
                    &["l2_norm", "gauged_norm"],
                    "linear dispersive evolution",
                )
                .map_err(lib_err)?;
                let spath = cfg.output_dir.join("linear_lab.svg");
                report::write_text(&spath, &svg).map_err(io_err(&spath))?;
                artifacts.push(spath);
            }
            if let Some((t, factor)) = traj.blow_up {
                numerical_failure = Some(format!(
                    "linear evolution blew up at t = {t} (factor {factor:.3e})"
                ));
            }
        }
        Scenario::Flow => {
            let u0 = flow_initial_data(cfg, &grid).map_err(lib_err)?;
            let p = flow_params(cfg, &grid, &u0)?;
            let traj = flow::evolve(&u0, &p).map_err(lib_err)?;
            if traj.cfl_warning {
                eprintln!(
                    "warning: dt = {} exceeds the explicit stability estimate {}",
                    p.dt,
                    FlowParams::cfl_dt(&grid)
                );
            }
            let csv = report::trajectory_csv(&traj.diag, p.k_gauge);
            let path = cfg.output_dir.join("trajectory.csv");
            report::write_text(&path, &csv).map_err(io_err(&path))?;
            artifacts.push(path.clone());
            if cfg.emit_snapshots {
                let bpath = cfg.output_dir.join("snapshots.bin");
                report::write_snapshots(&bpath, &traj).map_err(io_err(&bpath))?;
                artifacts.push(bpath);
            }
            if cfg.emit_svg {
                let svg = report::svg_from_csv(
                    &csv,
                    "t",
                    &["energy", "n_gauged", "constraint"],
                    "flow diagnostics",
                )
                .map_err(lib_err)?;
                let spath = cfg.output_dir.join("trajectory.svg");
                report::write_text(&spath, &svg).map_err(io_err(&spath))?;
                artifacts.push(spath);
            }
            if let Some((t, factor)) = traj.blow_up {
                numerical_failure = Some(format!(
                    "flow blew up at t = {t} (energy factor {factor:.3e})"
                ));
            }
        }
        Scenario::GaugeProbe => {
            let p = FlowParams::new(
                cfg.a,
                cfg.b,
                cfg.eps,
                cfg.k_gauge,
                cfg.dt.unwrap_or(1e-6),
                cfg.t_end,
            )
            .map_err(lib_err)?;
            let mut reports = Vec::new();
            for &k in &cfg.k_list {
                let u0 = presets::spiked_curve(cfg.target, &grid, k, 1e-2).map_err(lib_err)?;
                reports.push(cancellation_probe(&u0, &p, k).map_err(lib_err)?);
            }
            let csv = report::probe_csv(cfg.target, cfg.k_gauge, &reports);
            let path = cfg.output_dir.join("probe.csv");
            report::write_text(&path, &csv).map_err(io_err(&path))?;
            artifacts.push(path);
        }
        Scenario::EpsilonContinuation => {
            let u0 = flow_initial_data(cfg, &grid).map_err(lib_err)?;
            let p = flow_params(cfg, &grid, &u0)?;
            let rep = flow::epsilon_continuation(&u0, &p, &cfg.eps_list).map_err(lib_err)?;
            let csv = report::continuation_csv(&rep);
            let path = cfg.output_dir.join("continuation.csv");
            report::write_text(&path, &csv).map_err(io_err(&path))?;
            artifacts.push(path.clone());
            if cfg.emit_svg {
                let svg =
                    report::svg_from_csv(&csv, "eps", &["distance"], "regularization continuation")
                        .map_err(lib_err)?;
                let spath = cfg.output_dir.join("continuation.svg");
                report::write_text(&spath, &svg).map_err(io_err(&spath))?;
                artifacts.push(spath);
            }
        }
        Scenario::Invariants => {
            let checks = report::suite::invariant_suite(cfg.seed);
            let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
            for c in &checks {
                println!(
                    "{:width$}  {}  {}",
                    c.name,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.detail,
                );
            }
            let csv = report::invariants_csv(&checks);
            let path = cfg.output_dir.join("invariants.csv");
            report::write_text(&path, &csv).map_err(io_err(&path))?;
            artifacts.push(path);
            let failed: Vec<&str> = checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.name.as_str())
                .collect();
            if !failed.is_empty() {
                write_run_manifest(cfg, started, &artifacts)?;
                return Err(RunError::Invariant(format!(
                    "{} invariant(s) failed: {}",
                    failed.len(),
                    failed.join(", ")
                )));
            }
        }
    }

    write_run_manifest(cfg, started, &artifacts)?;
    if let Some(msg) = numerical_failure {
        return Err(RunError::Numerical(msg));
    }
    Ok(artifacts)
}

fn write_run_manifest(
    cfg: &RunConfig,
    started: Instant,
    artifacts: &[PathBuf],
) -> Result<(), RunError> {
    let mut entries = cfg.echo();
    entries.push(("version".into(), env!("CARGO_PKG_VERSION").to_string()));
    entries.push((
        "wall_time_s".into(),
        format!("{:.3}", started.elapsed().as_secs_f64()),
    ));
    entries.push((
        "artifacts".into(),
        artifacts
            .iter()
            .map(|p| {
                p.file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned()
            })
            .collect::<Vec<_>>()
            .join(","),
    ));
    let path = cfg.output_dir.join("manifest.txt");
    report::write_manifest(&path, &entries).map_err(io_err(&path))?;
    Ok(())
}
