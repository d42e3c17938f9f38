//! The `run`, `verify` and `sweep` commands as library calls. Each returns
//! the process exit code alongside its results so the binary stays thin.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dualvar_core::optimizer::{ascend, IterationRecord, SolveReport, Termination};

use crate::config::{resolve_param, Ini, RunConfig};
use crate::error::{CliError, Result};
use crate::family::Built;
use crate::output::{self, CheckRow, SweepRow};
use crate::suite::verify_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

pub fn exit_code(termination: Termination) -> i32 {
    match termination {
        Termination::Converged => EXIT_OK,
        Termination::BudgetExhausted | Termination::Stalled => EXIT_NOT_CONVERGED,
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: SolveReport,
    /// Relative L2 error of the primal field against a reference solution.
    pub oracle_error: Option<f64>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        exit_code(self.report.termination)
    }
}

fn write_fields(
    dir: &Path,
    suffix: &str,
    fields: &[(String, dualvar_core::grid::Field)],
) -> Result<()> {
    for (name, f) in fields {
        output::write(
            &dir.join(format!("{name}_{suffix}.csv")),
            &output::field_csv(f),
        )?;
    }
    Ok(())
}

/// Solves the configured problem and writes `trace.csv`, the final dual and
/// primal fields, and snapshots every `snapshot_every` iterations. If the
/// ascent aborts, the trace up to that point is still written.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let built = Built::new(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    let x0 = built.initial_state(cfg);

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut snapshot_error: Option<CliError> = None;
    let mut observer = |rec: &IterationRecord, x: &[f64]| {
        records.push(*rec);
        let every = cfg.snapshot_every;
        if every > 0 && rec.iter.is_multiple_of(every) && snapshot_error.is_none() {
            let snap = dir.join("snapshots");
            let res = built
                .dual_fields(x)
                .and_then(|f| write_fields(&snap, &format!("{:06}", rec.iter), &f));
            if let Err(e) = res {
                snapshot_error = Some(e);
            }
        }
    };
    let result = ascend(built.problem(), &x0, &cfg.ascent, Some(&mut observer));
    output::write(
        &dir.join("trace.csv"),
        &output::trace_csv(records.iter().copied()),
    )?;
    let report = result?;
    if let Some(e) = snapshot_error {
        return Err(e);
    }

    let x = &report.final_state;
    write_fields(dir, "final", &built.dual_fields(x)?)?;
    write_fields(dir, "final", &built.primal_fields(x)?)?;
    let oracle_error = built.oracle_error(cfg, x);
    Ok(RunSummary {
        report,
        oracle_error,
    })
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub rows: Vec<CheckRow>,
}

impl VerifyOutcome {
    pub fn all_pass(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            EXIT_OK
        } else {
            EXIT_ERROR
        }
    }
}

/// Runs the check suite and writes `verify.csv`.
pub fn verify(cfg: &RunConfig, corrupt_gradient: bool) -> Result<VerifyOutcome> {
    let rows = verify_suite(cfg, corrupt_gradient)?;
    output::write(
        &cfg.output_dir.join("verify.csv"),
        &output::verify_csv(&rows),
    )?;
    Ok(VerifyOutcome { rows })
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Per-value failures, in input order; `None` for runs that completed.
    pub errors: Vec<Option<String>>,
}

impl SweepOutcome {
    /// 1 if any run failed, else 2 if any run did not converge, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.errors.iter().any(Option::is_some) {
            EXIT_ERROR
        } else if self.rows.iter().any(|r| !r.converged) {
            EXIT_NOT_CONVERGED
        } else {
            EXIT_OK
        }
    }
}

/// Worker count: `DUALVAR_THREADS` when set to a positive integer, else the
/// available parallelism, never more than `jobs`.
pub fn worker_count(jobs: usize) -> usize {
    let requested = std::env::var("DUALVAR_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let n =
        requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    n.min(jobs).max(1)
}

fn dir_name(key: &str, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "+-.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{key}_{clean}")
}

/// Runs the base config once per value of `param`, each in its own
/// subdirectory of the base output directory, and writes
/// `sweep_summary.csv` there. Rows keep the order of `values`.
pub fn sweep(ini: &Ini, base: &Path, param: &str, values: &[String]) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(CliError::Invalid("sweep needs at least one value".into()));
    }
    let (_, key) = resolve_param(param)?;
    let root: PathBuf = RunConfig::from_ini(ini, base)?.output_dir;

    // configs are built up front so that a bad value fails before any solve
    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let mut ini = ini.clone();
        ini.set(param, v)?;
        let mut cfg = RunConfig::from_ini(&ini, base)?;
        cfg.output_dir = root.join(dir_name(key, v));
        configs.push(cfg);
    }

    let slots: Vec<Mutex<Option<Result<RunSummary>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..worker_count(configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let r = run(&configs[i]);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });

    let mut rows = Vec::with_capacity(values.len());
    let mut errors = Vec::with_capacity(values.len());
    for (v, slot) in values.iter().zip(slots) {
        let result = slot.into_inner().unwrap().expect("every sweep job runs");
        match result {
            Ok(sum) => {
                let r = &sum.report;
                rows.push(SweepRow {
                    param: v.clone(),
                    converged: r.converged,
                    final_objective: *r.objective_trace.last().unwrap_or(&f64::NAN),
                    final_residual: *r.residual_trace.last().unwrap_or(&f64::NAN),
                    error_vs_oracle: sum.oracle_error.unwrap_or(f64::NAN),
                });
                errors.push(None);
            }
            Err(e) => {
                rows.push(SweepRow {
                    param: v.clone(),
                    converged: false,
                    final_objective: f64::NAN,
                    final_residual: f64::NAN,
                    error_vs_oracle: f64::NAN,
                });
                errors.push(Some(e.to_string()));
            }
        }
    }
    output::write(&root.join("sweep_summary.csv"), &output::sweep_csv(&rows))?;
    Ok(SweepOutcome { rows, errors })
}
