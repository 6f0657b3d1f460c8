//! Experiment harness: configures and runs the benchmark problems across
//! solver variants and emits machine-readable CSV results.
//!
//! Config is a flat `key = value` text file (`#` comments) with keys
//! `experiment, solver, N, eps_tt, eps_cross, tol_res, tol_update,
//! max_newton, seed, out`; command-line flags override file values. One CSV
//! row is written per `(solver, N)` cell, even when the solve fails.

use crate::field::DenseField;
use crate::fullgrid::{boundary_values, relative_error, FullGridSystem, NewtonOptions};
use crate::problem::{IndexSplit, SpaceTimeGrids};
use crate::problems::{self, Experiment1};
use crate::step_newton::{step_truncation_newton, StepNewtonOptions};
use crate::tensorized::NcdTtSystem;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("missing `experiment` (one of exp1, manufactured, burgers)")]
    MissingExperiment,
    #[error("config line without `=`: {0}")]
    BadLine(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Exp1,
    Manufactured,
    Burgers,
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_lowercase().as_str() {
            "exp1" => Ok(Self::Exp1),
            "manufactured" => Ok(Self::Manufactured),
            "burgers" => Ok(Self::Burgers),
            other => Err(format!("unknown experiment `{other}`")),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exp1 => "exp1",
            Self::Manufactured => "manufactured",
            Self::Burgers => "burgers",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    FullGrid,
    TtFixedEps,
    TtStepTrunc,
}

impl FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_lowercase().as_str() {
            "fullgrid" => Ok(Self::FullGrid),
            "tt-fixed-eps" => Ok(Self::TtFixedEps),
            "tt-step-trunc" => Ok(Self::TtStepTrunc),
            other => Err(format!("unknown solver `{other}`")),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FullGrid => "fullgrid",
            Self::TtFixedEps => "tt-fixed-eps",
            Self::TtStepTrunc => "tt-step-trunc",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub solvers: Vec<SolverKind>,
    /// Collocation points per dimension (mode size for exp1).
    pub n_list: Vec<usize>,
    pub eps_tt: f64,
    pub eps_cross: Option<f64>,
    pub tol_res: f64,
    pub tol_update: f64,
    pub max_newton: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub parallel: bool,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            solvers: vec![SolverKind::FullGrid, SolverKind::TtStepTrunc],
            n_list: vec![8],
            eps_tt: 1e-5,
            eps_cross: None,
            tol_res: 1e-6,
            tol_update: 1e-6,
            max_newton: 30,
            seed: 0,
            out: None,
            parallel: false,
        }
    }

    pub fn eps_cross(&self) -> f64 {
        self.eps_cross.unwrap_or(self.eps_tt)
    }

    /// Parses the flat key=value format; later assignments win.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut experiment = None;
        let mut cfg = Self::new(Experiment::Burgers);
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::BadLine(line.to_string()));
            };
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value)?;
            if key == "experiment" {
                experiment = Some(cfg.experiment);
            }
        }
        match experiment {
            Some(e) => {
                cfg.experiment = e;
                Ok(cfg)
            }
            None => Err(ConfigError::MissingExperiment),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies one key=value assignment (used for both files and flags).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |key: &str, value: &str| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        match key {
            "experiment" => {
                self.experiment = value.parse().map_err(|_| bad(key, value))?;
            }
            "solver" => {
                let mut solvers = Vec::new();
                for part in value.split(',') {
                    solvers.push(part.parse().map_err(|_| bad(key, value))?);
                }
                if solvers.is_empty() {
                    return Err(bad(key, value));
                }
                self.solvers = solvers;
            }
            "N" => {
                let mut ns = Vec::new();
                for part in value.split(',') {
                    ns.push(part.trim().parse().map_err(|_| bad(key, value))?);
                }
                if ns.is_empty() {
                    return Err(bad(key, value));
                }
                self.n_list = ns;
            }
            "eps_tt" => self.eps_tt = value.parse().map_err(|_| bad(key, value))?,
            "eps_cross" => self.eps_cross = Some(value.parse().map_err(|_| bad(key, value))?),
            "tol_res" => self.tol_res = value.parse().map_err(|_| bad(key, value))?,
            "tol_update" => self.tol_update = value.parse().map_err(|_| bad(key, value))?,
            "max_newton" => self.max_newton = value.parse().map_err(|_| bad(key, value))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key, value))?,
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }
}

/// One CSV row. Optional columns stay empty when a quantity does not apply
/// (compression for full-grid runs, error without an exact solution) or the
/// solve failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub experiment: String,
    pub solver: String,
    pub n: usize,
    pub rel_error: Option<f64>,
    pub resid_final: Option<f64>,
    pub newton_iters: Option<usize>,
    pub wall_s: f64,
    pub max_rank: Option<usize>,
    pub cr: Option<f64>,
    pub status: String,
}

impl RunRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub const CSV_HEADER: [&str; 10] = [
    "experiment",
    "solver",
    "N",
    "rel_error",
    "resid_final",
    "newton_iters",
    "wall_s",
    "max_rank",
    "cr",
    "status",
];

struct CellOutcome {
    rel_error: Option<f64>,
    resid_final: f64,
    newton_iters: usize,
    max_rank: Option<usize>,
    cr: Option<f64>,
    converged: bool,
    detail: String,
}

fn run_exp1_cell(solver: SolverKind, n: usize, cfg: &RunConfig) -> Result<CellOutcome, String> {
    let e1 = Experiment1::new(cfg.seed, &[n; 4], &[3, 3, 3]).map_err(|e| e.to_string())?;
    match solver {
        SolverKind::FullGrid => {
            let g = e1.rhs.to_dense().map_err(|e| e.to_string())?;
            let y_exact = e1.y_exact.to_dense().map_err(|e| e.to_string())?;
            let mut y = DenseField::from_fn([n; 4], |_| 1.0);
            let q = |y: &DenseField| -> DenseField {
                DenseField::from_values(
                    [n; 4],
                    y.as_slice()
                        .iter()
                        .zip(g.as_slice())
                        .map(|(v, gv)| (-v).exp() - v * v * v - gv)
                        .collect(),
                )
                .expect("finite residual")
            };
            let mut r = q(&y);
            let mut r_norm = r.norm();
            let r0 = r_norm;
            let mut iters = 0;
            let mut converged = false;
            for _ in 0..cfg.max_newton {
                if r_norm / r0 < cfg.tol_res {
                    converged = true;
                    break;
                }
                // diagonal Jacobian: delta = q / (exp(-y) + 3 y^2)
                let delta = DenseField::from_values(
                    [n; 4],
                    r.as_slice()
                        .iter()
                        .zip(y.as_slice())
                        .map(|(rv, yv)| rv / ((-yv).exp() + 3.0 * yv * yv))
                        .collect(),
                )
                .map_err(|e| e.to_string())?;
                let mut s = 1.0;
                let mut accepted = false;
                for _ in 0..=20 {
                    let mut cand = y.clone();
                    cand.axpy(s, &delta);
                    let rc = q(&cand);
                    let rc_norm = rc.norm();
                    if rc_norm <= r_norm {
                        let update_ratio = delta.norm() * s / cand.norm().max(f64::MIN_POSITIVE);
                        y = cand;
                        r = rc;
                        r_norm = rc_norm;
                        accepted = true;
                        iters += 1;
                        if update_ratio < cfg.tol_update {
                            converged = true;
                        }
                        break;
                    }
                    s *= 0.5;
                }
                if !accepted {
                    break;
                }
                if converged {
                    break;
                }
            }
            if r_norm / r0 < cfg.tol_res {
                converged = true;
            }
            let err = y.sub(&y_exact).norm() / y_exact.norm();
            Ok(CellOutcome {
                rel_error: Some(err),
                resid_final: r_norm / r0,
                newton_iters: iters,
                max_rank: None,
                cr: None,
                converged,
                detail: String::new(),
            })
        }
        SolverKind::TtFixedEps | SolverKind::TtStepTrunc => {
            let opts = StepNewtonOptions {
                eps0: cfg.eps_tt,
                adaptive: solver == SolverKind::TtStepTrunc,
                tol_res: cfg.tol_res,
                tol_update: cfg.tol_update,
                max_iter: cfg.max_newton,
                ..Default::default()
            };
            let u0 = e1.initial_guess();
            let (y, state) = step_truncation_newton(&e1, &u0, &opts).map_err(|e| e.to_string())?;
            let err = e1.error_vs_exact(&y).map_err(|e| e.to_string())?;
            Ok(CellOutcome {
                rel_error: Some(err),
                resid_final: state.final_relative_residual,
                newton_iters: state.iterations,
                max_rank: Some(state.max_rank()),
                cr: Some(y.compression_ratio()),
                converged: state.converged,
                detail: format!("eps_final={:.2e}", state.final_eps),
            })
        }
    }
}

fn run_pde_cell(
    experiment: Experiment,
    solver: SolverKind,
    n: usize,
    cfg: &RunConfig,
) -> Result<CellOutcome, String> {
    let problem = match experiment {
        Experiment::Manufactured => problems::manufactured_ncd(),
        Experiment::Burgers => problems::burgers3d(),
        Experiment::Exp1 => unreachable!("exp1 handled separately"),
    };
    let grids = SpaceTimeGrids::for_problem(&problem, n).map_err(|e| e.to_string())?;
    let exact = problem.exact.as_ref().expect("benchmarks have exact solutions");

    match solver {
        SolverKind::FullGrid => {
            let sys = FullGridSystem::new(&problem, &grids).map_err(|e| e.to_string())?;
            let opts = NewtonOptions {
                tol_res: cfg.tol_res,
                tol_update: cfg.tol_update,
                max_iter: cfg.max_newton,
                ..Default::default()
            };
            let (u, report) = sys.newton_solve(None, &opts).map_err(|e| e.to_string())?;
            let full = sys.embed(&u);
            let err = relative_error(&full, &**exact, &grids).map_err(|e| e.to_string())?;
            Ok(CellOutcome {
                rel_error: Some(err),
                resid_final: report.final_relative_residual,
                newton_iters: report.iterations,
                max_rank: None,
                cr: None,
                converged: report.converged,
                detail: String::new(),
            })
        }
        SolverKind::TtFixedEps | SolverKind::TtStepTrunc => {
            let sys = NcdTtSystem::new(&problem, &grids, cfg.eps_cross(), cfg.seed)
                .map_err(|e| e.to_string())?;
            let u0 = sys.initial_guess(cfg.eps_tt).map_err(|e| e.to_string())?;
            let opts = StepNewtonOptions {
                eps0: cfg.eps_tt,
                adaptive: solver == SolverKind::TtStepTrunc,
                tol_res: cfg.tol_res,
                tol_update: cfg.tol_update,
                max_iter: cfg.max_newton,
                ..Default::default()
            };
            let (u, state) = step_truncation_newton(&sys, &u0, &opts).map_err(|e| e.to_string())?;
            let interior = u.to_dense().map_err(|e| e.to_string())?;
            let split = IndexSplit::new(grids.shape()).map_err(|e| e.to_string())?;
            let bvals = boundary_values(&problem, &grids, &split);
            let full = split.embed(&interior, &bvals);
            let err = relative_error(&full, &**exact, &grids).map_err(|e| e.to_string())?;
            Ok(CellOutcome {
                rel_error: Some(err),
                resid_final: state.final_relative_residual,
                newton_iters: state.iterations,
                max_rank: Some(state.max_rank()),
                cr: Some(u.compression_ratio()),
                converged: state.converged,
                detail: format!("eps_final={:.2e}", state.final_eps),
            })
        }
    }
}

fn run_cell(solver: SolverKind, n: usize, cfg: &RunConfig) -> RunRow {
    let start = Instant::now();
    let result = match cfg.experiment {
        Experiment::Exp1 => run_exp1_cell(solver, n, cfg),
        other => run_pde_cell(other, solver, n, cfg),
    };
    let wall_s = start.elapsed().as_secs_f64();
    match result {
        Ok(out) => RunRow {
            experiment: cfg.experiment.to_string(),
            solver: solver.to_string(),
            n,
            rel_error: out.rel_error,
            resid_final: Some(out.resid_final),
            newton_iters: Some(out.newton_iters),
            wall_s,
            max_rank: out.max_rank,
            cr: out.cr,
            status: if out.converged {
                "ok".to_string()
            } else {
                format!("failed: not converged {}", out.detail)
                    .trim_end()
                    .to_string()
            },
        },
        Err(e) => RunRow {
            experiment: cfg.experiment.to_string(),
            solver: solver.to_string(),
            n,
            rel_error: None,
            resid_final: None,
            newton_iters: None,
            wall_s,
            max_rank: None,
            cr: None,
            status: format!("failed: {e}"),
        },
    }
}

/// Runs every `(solver, N)` cell of the configuration. Failures are
/// recorded per row; the run always continues.
pub fn run_experiment(cfg: &RunConfig) -> Vec<RunRow> {
    let cells: Vec<(SolverKind, usize)> = cfg
        .solvers
        .iter()
        .flat_map(|&s| cfg.n_list.iter().map(move |&n| (s, n)))
        .collect();
    if cfg.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = cells
                .iter()
                .map(|&(s, n)| scope.spawn(move || run_cell(s, n, cfg)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("cell panicked")).collect()
        })
    } else {
        cells
            .iter()
            .map(|&(s, n)| {
                eprintln!("running {} {} N={} ...", cfg.experiment, s, n);
                let row = run_cell(s, n, cfg);
                eprintln!(
                    "  -> {} in {:.2}s (err={}, iters={})",
                    row.status,
                    row.wall_s,
                    row.rel_error.map_or("-".into(), |e| format!("{e:.3e}")),
                    row.newton_iters.map_or("-".into(), |i| i.to_string()),
                );
                row
            })
            .collect()
    }
}

fn fmt_opt_float(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6e}"))
}

/// Writes rows in the fixed CSV schema.
pub fn write_csv<W: std::io::Write>(rows: &[RunRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.solver.clone(),
            r.n.to_string(),
            fmt_opt_float(r.rel_error),
            fmt_opt_float(r.resid_final),
            r.newton_iters.map_or(String::new(), |v| v.to_string()),
            format!("{:.3}", r.wall_s),
            r.max_rank.map_or(String::new(), |v| v.to_string()),
            fmt_opt_float(r.cr),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("{path}: schema mismatch, expected header {expected:?}, got {got:?}")]
    Schema {
        path: String,
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub experiment: String,
    pub n: usize,
    pub solver: String,
    /// Baseline wall time over this row's wall time.
    pub speedup: Option<f64>,
    /// This row's error over the baseline error.
    pub error_ratio: Option<f64>,
}

fn parse_csv_rows(path: &Path) -> Result<Vec<RunRow>, CompareError> {
    let mut reader = csv::Reader::from_path(path)?;
    let got: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<String> = CSV_HEADER.iter().map(|s| s.to_string()).collect();
    if got != expected {
        return Err(CompareError::Schema {
            path: path.display().to_string(),
            expected,
            got,
        });
    }
    let parse_f = |s: &str| -> Option<f64> {
        if s.is_empty() {
            None
        } else {
            s.parse().ok()
        }
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        rows.push(RunRow {
            experiment: r[0].to_string(),
            solver: r[1].to_string(),
            n: r[2].parse().unwrap_or(0),
            rel_error: parse_f(&r[3]),
            resid_final: parse_f(&r[4]),
            newton_iters: r[5].parse().ok(),
            wall_s: r[6].parse().unwrap_or(f64::NAN),
            max_rank: r[7].parse().ok(),
            cr: parse_f(&r[8]),
            status: r[9].to_string(),
        });
    }
    Ok(rows)
}

/// Joins runs on `(experiment, N)` and reports speedups and error ratios
/// against the baseline variant (full-grid when present, otherwise the
/// first solver seen). With several input files only keys present in more
/// than one file are joined; an empty join produces an empty table and a
/// warning on stderr.
pub fn compare_report(paths: &[PathBuf]) -> Result<Vec<CompareRow>, CompareError> {
    let mut groups: BTreeMap<(String, usize), Vec<(usize, RunRow)>> = BTreeMap::new();
    for (file_idx, path) in paths.iter().enumerate() {
        for row in parse_csv_rows(path)? {
            groups
                .entry((row.experiment.clone(), row.n))
                .or_default()
                .push((file_idx, row));
        }
    }
    if paths.len() > 1 {
        groups.retain(|_, rows| {
            let first = rows[0].0;
            rows.iter().any(|(idx, _)| *idx != first)
        });
    }
    if groups.is_empty() {
        eprintln!("warning: no joinable (experiment, N) keys across inputs; empty table");
        return Ok(Vec::new());
    }

    let mut out = Vec::new();
    for ((experiment, n), rows) in groups {
        let baseline = rows
            .iter()
            .map(|(_, r)| r)
            .find(|r| r.solver == "fullgrid")
            .unwrap_or(&rows[0].1)
            .clone();
        for (_, row) in &rows {
            let speedup = if row.wall_s > 0.0 && baseline.wall_s.is_finite() {
                Some(baseline.wall_s / row.wall_s)
            } else {
                None
            };
            let error_ratio = match (row.rel_error, baseline.rel_error) {
                (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                _ => None,
            };
            out.push(CompareRow {
                experiment: experiment.clone(),
                n,
                solver: row.solver.clone(),
                speedup,
                error_ratio,
            });
        }
    }
    Ok(out)
}

pub fn write_compare_csv<W: std::io::Write>(
    rows: &[CompareRow],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["experiment", "N", "solver", "speedup", "error_ratio"])?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.n.to_string(),
            r.solver.clone(),
            r.speedup.map_or(String::new(), |v| format!("{v:.4}")),
            r.error_ratio.map_or(String::new(), |v| format!("{v:.4}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing_and_overrides() {
        let cfg = RunConfig::parse(
            "# comment\nexperiment = burgers\nsolver = fullgrid, tt-step-trunc\nN = 4, 6\n\
             eps_tt = 1e-4\ntol_res = 1e-7\nseed = 3\nout = /tmp/x.csv\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Burgers);
        assert_eq!(
            cfg.solvers,
            vec![SolverKind::FullGrid, SolverKind::TtStepTrunc]
        );
        assert_eq!(cfg.n_list, vec![4, 6]);
        assert_eq!(cfg.eps_tt, 1e-4);
        assert_eq!(cfg.eps_cross(), 1e-4);
        assert_eq!(cfg.tol_res, 1e-7);
        assert_eq!(cfg.seed, 3);
        assert!(cfg.out.is_some());

        assert!(RunConfig::parse("experiment = nope\n").is_err());
        assert!(RunConfig::parse("bogus_key = 1\nexperiment = exp1\n").is_err());
        assert!(RunConfig::parse("solver = fullgrid\n").is_err()); // no experiment
    }

    #[test]
    fn csv_roundtrip_schema() {
        let rows = vec![RunRow {
            experiment: "burgers".into(),
            solver: "fullgrid".into(),
            n: 8,
            rel_error: Some(1.25e-4),
            resid_final: Some(3.0e-9),
            newton_iters: Some(5),
            wall_s: 1.5,
            max_rank: None,
            cr: None,
            status: "ok".into(),
        }];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "experiment,solver,N,rel_error,resid_final,newton_iters,wall_s,max_rank,cr,status"
        );
        let data = lines.next().unwrap();
        // CR and max_rank columns are empty for full-grid rows
        assert!(data.contains(",,ok"));

        let tmp = std::env::temp_dir().join("ttcolloc_csv_roundtrip_test.csv");
        std::fs::write(&tmp, &buf).unwrap();
        let parsed = parse_csv_rows(&tmp).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].solver, "fullgrid");
        assert_eq!(parsed[0].rel_error, Some(1.25e-4));
        assert_eq!(parsed[0].max_rank, None);
        std::fs::remove_file(&tmp).unwrap();
    }

    #[test]
    fn compare_identical_inputs_gives_unit_speedups() {
        let rows = vec![RunRow {
            experiment: "burgers".into(),
            solver: "fullgrid".into(),
            n: 8,
            rel_error: Some(1e-4),
            resid_final: Some(1e-9),
            newton_iters: Some(5),
            wall_s: 2.0,
            max_rank: None,
            cr: None,
            status: "ok".into(),
        }];
        let dir = std::env::temp_dir();
        let p1 = dir.join("ttcolloc_cmp_a.csv");
        let p2 = dir.join("ttcolloc_cmp_b.csv");
        for p in [&p1, &p2] {
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).unwrap();
            std::fs::write(p, buf).unwrap();
        }
        let cmp = compare_report(&[p1.clone(), p2.clone()]).unwrap();
        assert_eq!(cmp.len(), 2);
        for row in &cmp {
            assert_eq!(row.speedup, Some(1.0));
            assert_eq!(row.error_ratio, Some(1.0));
        }
        std::fs::remove_file(&p1).unwrap();
        std::fs::remove_file(&p2).unwrap();
    }

    #[test]
    fn compare_empty_intersection_is_empty() {
        let mk = |n: usize| {
            vec![RunRow {
                experiment: "burgers".into(),
                solver: "fullgrid".into(),
                n,
                rel_error: Some(1e-4),
                resid_final: Some(1e-9),
                newton_iters: Some(5),
                wall_s: 2.0,
                max_rank: None,
                cr: None,
                status: "ok".into(),
            }]
        };
        let dir = std::env::temp_dir();
        let p1 = dir.join("ttcolloc_cmp_c.csv");
        let p2 = dir.join("ttcolloc_cmp_d.csv");
        let mut buf = Vec::new();
        write_csv(&mk(8), &mut buf).unwrap();
        std::fs::write(&p1, buf).unwrap();
        let mut buf = Vec::new();
        write_csv(&mk(12), &mut buf).unwrap();
        std::fs::write(&p2, buf).unwrap();
        let cmp = compare_report(&[p1.clone(), p2.clone()]).unwrap();
        assert!(cmp.is_empty());
        std::fs::remove_file(&p1).unwrap();
        std::fs::remove_file(&p2).unwrap();
    }

    #[test]
    fn compare_rejects_schema_mismatch() {
        let dir = std::env::temp_dir();
        let p = dir.join("ttcolloc_cmp_bad.csv");
        std::fs::write(&p, "a,b,c\n1,2,3\n").unwrap();
        match compare_report(&[p.clone()]) {
            Err(CompareError::Schema { .. }) => {}
            other => panic!("expected schema error, got {other:?}"),
        }
        std::fs::remove_file(&p).unwrap();
    }
}
