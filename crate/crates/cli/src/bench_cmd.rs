//! Solver benchmarking: inner-iteration counts, wall times, and the
//! power-iteration stability probe across a grid sweep.

use std::path::PathBuf;

use clap::Args;
use maot_core::ma::{Backend, NewtonConfig};
use maot_core::synthetic::TrigProblem;

use crate::report::{rows_from_report, write_history_csv, RunReport, RunSummary};
use crate::synthetic_cmd::{run_instance, run_sweep};
use crate::{out_dir, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendSelection {
    Fft,
    Fd,
    Both,
}

impl std::str::FromStr for BackendSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fft" => Ok(Self::Fft),
            "fd" => Ok(Self::Fd),
            "both" => Ok(Self::Both),
            other => Err(format!(
                "unknown backend '{other}' (expected fft, fd or both)"
            )),
        }
    }
}

impl BackendSelection {
    fn backends(self) -> Vec<Backend> {
        match self {
            Self::Fft => vec![Backend::Fft],
            Self::Fd => vec![Backend::Fd],
            Self::Both => vec![Backend::Fft, Backend::Fd],
        }
    }
}

#[derive(Debug, Args, serde::Serialize)]
pub struct BenchArgs {
    /// Grid sizes to sweep (default 16 32 64 128 256).
    #[arg(long = "n")]
    pub n: Vec<usize>,
    #[arg(long, default_value = "both")]
    pub backend: BackendSelection,
    /// Newton iterations per run; the whole budget is always executed.
    #[arg(long = "max-iter", default_value_t = 20)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Inner tolerance override; defaults are 1e-4 for fft and 1e-1 for fd.
    #[arg(long = "inner-tol")]
    pub inner_tol: Option<f64>,
    /// Estimate the dominant eigenvalue of the inverse linearized solve at
    /// every Newton step (fft backend).
    #[arg(long = "probe-spectral-radius")]
    pub probe_spectral_radius: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 100.0)]
    pub k: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long = "single-thread")]
    pub single_thread: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_inner_tol(backend: Backend) -> f64 {
    match backend {
        Backend::Fft => 1e-4,
        Backend::Fd => 1e-1,
    }
}

pub fn run(args: &BenchArgs) -> Result<bool, CliError> {
    let ns = if args.n.is_empty() {
        vec![16, 32, 64, 128, 256]
    } else {
        args.n.clone()
    };
    let prob = TrigProblem {
        k: args.k,
        gamma: args.gamma,
        alpha: args.alpha,
        rho: args.rho,
    };
    prob.validate()?;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for backend in args.backend.backends() {
        let cfg = NewtonConfig {
            tau: args.tau,
            // Run the full iteration budget so averages cover the whole
            // experiment.
            tol: 1e-300,
            max_iter: args.max_iter,
            backend,
            inner_tol: args.inner_tol.unwrap_or_else(|| default_inner_tol(backend)),
            inner_max: 500_000,
            probe_spectral_radius: args.probe_spectral_radius && backend == Backend::Fft,
            probe_seed: args.seed,
            ..Default::default()
        };
        cfg.validate()?;
        let runs = run_sweep(&ns, args.single_thread, |n| {
            run_instance(&prob, false, n, &cfg)
        })?;
        for run in &runs {
            let name = backend.to_string();
            rows.extend(rows_from_report(
                &name,
                run.n,
                &run.report,
                Some(&run.u_errors),
            ));
            let mut summary = RunSummary::new(&name, run.n, &run.report);
            summary.final_u_error = run.u_errors.last().copied();
            // Bench runs exhaust the budget on purpose; that is not a
            // convergence failure.
            summary.converged = true;
            summaries.push(summary);
        }
    }

    let dir = out_dir(args.out.as_deref())?;
    write_history_csv(&dir.join("history.csv"), &rows)?;
    RunReport {
        command: "bench".into(),
        config: serde_json::to_value(args).expect("flag echo"),
        converged: true,
        runs: summaries.clone(),
        observed_orders: Vec::new(),
    }
    .write(&dir.join("report.json"))?;

    println!("bench: wrote {}", dir.display());
    for s in &summaries {
        let probe = match (s.spectral_radius_min, s.spectral_radius_max) {
            (Some(lo), Some(hi)) => format!(" probe=[{lo:.4}, {hi:.4}]"),
            _ => String::new(),
        };
        println!(
            "  backend={} n={:4} mean_inner={:.2} total={:.2}s{}",
            s.backend, s.n, s.mean_inner_per_step, s.total_seconds, probe
        );
    }
    Ok(true)
}
