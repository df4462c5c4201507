//! Executes a validated run and renders its outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bianiso::em_system::SourceJ;
use bianiso::medium::NoiseSourceSpec;
use bianiso::profile::Profile;
use bianiso::stack_solver::{build_source, scattering_matrices, solve_stack, IncidentData};
use bianiso::synthesis::{
    field_profile, gaussian_pulse_laplace, harmonic_fields, time_reconstruct, Spectrum, TimeConfig,
};
use bianiso::{Direction, Kpar, C64};
use nalgebra::Vector6;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{InitialValueSpec, Mode, RunConfig, SweepPoint, TimeSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid-config: {0}")]
    InvalidConfig(String),
    #[error("numerical failure at omega = {omega:e}, kpar = ({kx:e}, {ky:e}): {message}")]
    Numerical {
        omega: f64,
        kx: f64,
        ky: f64,
        message: String,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidConfig(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    fn numerical(omega: f64, kpar: Kpar, e: impl std::fmt::Display) -> Self {
        CliError::Numerical {
            omega,
            kx: kpar.kx,
            ky: kpar.ky,
            message: e.to_string(),
        }
    }
}

/// Rendered rows; every value is already formatted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn push_complex(row: &mut Vec<String>, z: C64) {
    row.push(num(z.re));
    row.push(num(z.im));
}

fn complex_header(header: &mut Vec<String>, name: &str) {
    header.push(format!("{name}_re"));
    header.push(format!("{name}_im"));
}

const FIELD_NAMES: [&str; 6] = ["Ex", "Ey", "Ez", "Hx", "Hy", "Hz"];

fn in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(job),
            Err(_) => job(),
        },
        None => job(),
    }
}

/// Runs every sample; the first failure in sweep order is reported.
pub fn execute(cfg: &RunConfig, threads: Option<usize>) -> Result<Table, CliError> {
    in_pool(threads, || match cfg.mode {
        Mode::Scattering => scattering(cfg),
        Mode::InitialValue => initial_value(cfg, cfg.initial.as_ref().expect("validated")),
        Mode::TimeReconstruction => time_domain(cfg, cfg.time.as_ref().expect("validated")),
    })
}

fn first_error<T>(results: Vec<Result<T, CliError>>) -> Result<Vec<T>, CliError> {
    results.into_iter().collect()
}

fn scattering(cfg: &RunConfig) -> Result<Table, CliError> {
    let mut header: Vec<String> = ["omega", "kx", "ky", "angle_deg"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in ["r", "t"] {
        for (o, i) in [("s", "s"), ("p", "s"), ("s", "p"), ("p", "p")] {
            complex_header(&mut header, &format!("{m}_{o}{i}"));
        }
    }
    header.extend(["R_s", "R_p", "T_s", "T_p"].iter().map(|s| s.to_string()));

    let rows = cfg
        .points
        .par_iter()
        .map(|p: &SweepPoint| {
            let res = scattering_matrices(&cfg.stack, p.kpar, p.omega, &cfg.units, &cfg.limit)
                .map_err(|e| CliError::numerical(p.omega, p.kpar, e))?;
            let mut row = vec![
                num(p.omega),
                num(p.kpar.kx),
                num(p.kpar.ky),
                p.angle_deg.map(num).unwrap_or_default(),
            ];
            for m in [&res.r, &res.t] {
                for (o, i) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    push_complex(&mut row, m[(o, i)]);
                }
            }
            row.extend(
                res.reflectance
                    .iter()
                    .chain(res.transmittance.iter())
                    .map(|x| num(*x)),
            );
            Ok(row)
        })
        .collect();
    Ok(Table {
        header,
        rows: first_error(rows)?,
    })
}

fn field_header(prefix: &[&str]) -> Vec<String> {
    let mut header: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    for f in FIELD_NAMES {
        complex_header(&mut header, f);
    }
    header
}

fn initial_value(cfg: &RunConfig, iv: &InitialValueSpec) -> Result<Table, CliError> {
    let header = field_header(&["direction", "s_re", "s_im", "kx", "ky", "z"]);
    let jobs: Vec<(SweepPoint, Direction)> = cfg
        .points
        .iter()
        .flat_map(|p| iv.directions.iter().map(move |d| (*p, *d)))
        .collect();
    let noise = if iv.noise_p.norm() > 0.0 || iv.noise_m.norm() > 0.0 {
        NoiseSourceSpec::new(Profile::constant(iv.noise_p), Profile::constant(iv.noise_m))
    } else {
        NoiseSourceSpec::zero()
    };
    let b0 = Profile::constant(iv.b0);
    let d0 = Profile::constant(iv.d0);
    let blocks = jobs
        .par_iter()
        .map(|(p, dir)| {
            let fail = |e: &dyn std::fmt::Display| CliError::numerical(p.omega, p.kpar, e);
            let s = C64::new(iv.s_re, -p.omega);
            let mut sources = vec![SourceJ::zero(); cfg.stack.region_count()];
            sources[iv.region] =
                build_source(&cfg.stack, iv.region, &noise, &b0, &d0, s, *dir, &cfg.units)
                    .map_err(|e| fail(&e))?;
            let sol = solve_stack(
                &cfg.stack,
                p.kpar,
                s,
                *dir,
                &cfg.units,
                &sources,
                &IncidentData::default(),
                &cfg.limit,
            )
            .map_err(|e| fail(&e))?;
            let frame = field_profile(&sol, &iv.z).map_err(|e| fail(&e))?;
            let rows: Vec<Vec<String>> =
                iv.z.iter()
                    .enumerate()
                    .map(|(iz, z)| {
                        let mut row = vec![
                            dir.name().to_string(),
                            num(s.re),
                            num(s.im),
                            num(p.kpar.kx),
                            num(p.kpar.ky),
                            num(*z),
                        ];
                        let (e, h) = frame.at(iz, 0);
                        for c in e.iter().chain(h.iter()) {
                            push_complex(&mut row, *c);
                        }
                        row
                    })
                    .collect();
            Ok(rows)
        })
        .collect();
    Ok(Table {
        header,
        rows: first_error(blocks)?.into_iter().flatten().collect(),
    })
}

fn time_domain(cfg: &RunConfig, ts: &TimeSpec) -> Result<Table, CliError> {
    let header = field_header(&["z", "t"]);
    let values = ts
        .omega
        .par_iter()
        .map(|&w| {
            let fields = harmonic_fields(
                &cfg.stack,
                ts.kpar,
                w,
                ts.polarization,
                &ts.z,
                &cfg.units,
                &cfg.limit,
            )
            .map_err(|e| CliError::numerical(w, ts.kpar, e))?;
            let pulse = gaussian_pulse_laplace(C64::new(0.0, -w), ts.t0, ts.tau);
            Ok(fields
                .into_iter()
                .map(|f| f * pulse)
                .collect::<Vec<Vector6<C64>>>())
        })
        .collect();
    let spectrum = Spectrum {
        omega: ts.omega.clone(),
        z: ts.z.clone(),
        values: first_error(values)?,
    };
    let tcfg = TimeConfig {
        window: ts.window,
        edge_tolerance: cfg.edge_tolerance,
    };
    let wmax = ts.omega.last().copied().unwrap_or(0.0);
    let frame = time_reconstruct(ts.kpar, Some(&spectrum), None, (0.0, 0.0), &ts.t, &tcfg)
        .map_err(|e| CliError::numerical(wmax, ts.kpar, e))?;
    let mut rows = Vec::with_capacity(ts.z.len() * ts.t.len());
    for (iz, z) in ts.z.iter().enumerate() {
        for (it, t) in ts.t.iter().enumerate() {
            let mut row = vec![num(*z), num(*t)];
            let (e, h) = frame.at(iz, it);
            for c in e.iter().chain(h.iter()) {
                push_complex(&mut row, *c);
            }
            rows.push(row);
        }
    }
    Ok(Table { header, rows })
}

#[derive(Debug, Serialize)]
struct Tolerances {
    limit_shift: f64,
    probe: f64,
    edge_tolerance: f64,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    mode: &'static str,
    units: &'static str,
    config_sha256: String,
    seed: u64,
    tolerances: Tolerances,
    csv: &'a str,
    columns: &'a [String],
    rows: usize,
}

/// Hex SHA-256 of the configuration text.
pub fn config_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// JSON sidecar describing a finished run. Contains nothing time- or
/// host-dependent, so identical inputs give identical bytes.
pub fn metadata_json(cfg: &RunConfig, config_text: &str, table: &Table) -> String {
    let meta = Metadata {
        tool: "bianiso",
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode.name(),
        units: cfg.unit_name,
        config_sha256: config_digest(config_text),
        seed: cfg.seed,
        tolerances: Tolerances {
            limit_shift: cfg.limit.limit_shift,
            probe: cfg.limit.probe,
            edge_tolerance: cfg.edge_tolerance,
        },
        csv: &cfg.csv_name,
        columns: &table.header,
        rows: table.rows.len(),
    };
    let mut s = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    s.push('\n');
    s
}

/// Writes the CSV and, if enabled, its JSON sidecar. Returns the written paths.
pub fn write_outputs(
    cfg: &RunConfig,
    config_text: &str,
    table: &Table,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv_path = dir.join(&cfg.csv_name);
    std::fs::write(&csv_path, table.to_csv()).map_err(io(&csv_path))?;
    let mut written = vec![csv_path];
    if cfg.metadata {
        let json_path = dir.join(cfg.csv_name.trim_end_matches(".csv").to_string() + ".json");
        std::fs::write(&json_path, metadata_json(cfg, config_text, table))
            .map_err(io(&json_path))?;
        written.push(json_path);
    }
    Ok(written)
}

/// One-line summary for the terminal.
pub fn summary(cfg: &RunConfig, table: &Table) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{} run: {} rows, {} regions, units {}",
        cfg.mode.name(),
        table.rows.len(),
        cfg.stack.region_count(),
        cfg.unit_name
    );
    s
}
