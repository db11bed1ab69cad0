//! The trigonometric benchmark command: known potential, known target
//! density, source density in closed form.

use std::path::PathBuf;

use clap::Args;
use maot_core::ma::{run_newton, Backend, NewtonConfig};
use maot_core::synthetic::TrigProblem;
use maot_core::{Grid, Report};

use crate::report::{
    rows_from_report, write_history_csv, write_orders_csv, OrderRow, RunReport, RunSummary,
};
use crate::{out_dir, CliError};

#[derive(Debug, Args, serde::Serialize)]
pub struct SyntheticArgs {
    /// Grid size; repeat for a refinement sweep.
    #[arg(long = "n", required = true)]
    pub n: Vec<usize>,
    /// Damping parameter tau >= 1 (step 1/tau).
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Newton stopping tolerance on the l2 residual.
    #[arg(long, default_value_t = 1e-11)]
    pub tol: f64,
    /// Inner-solver relative residual tolerance.
    #[arg(long = "inner-tol", default_value_t = 1e-4)]
    pub inner_tol: f64,
    #[arg(long, default_value = "fft")]
    pub backend: Backend,
    #[arg(long = "max-iter", default_value_t = 30)]
    pub max_iter: usize,
    /// Total inner-iteration budget per Newton step.
    #[arg(long = "inner-max", default_value_t = 100_000)]
    pub inner_max: usize,
    /// GMRES restart threshold m.
    #[arg(long = "gmres-restart", default_value_t = 10)]
    pub gmres_restart: usize,
    /// Benchmark family constant k: potential amplitude 1/k.
    #[arg(long, default_value_t = 100.0)]
    pub k: f64,
    /// Benchmark family wavenumber of the potential.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Benchmark family target-density amplitude.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Benchmark family wavenumber of the target density.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Force the exact potential to zero (with --alpha 0 this is f = g).
    #[arg(long = "zero-potential")]
    pub zero_potential: bool,
    /// Drop the first-order advection term from the linearized equation.
    #[arg(long = "drop-advection")]
    pub drop_advection: bool,
    /// Run sweep entries sequentially instead of in worker threads.
    #[arg(long = "single-thread")]
    pub single_thread: bool,
    /// Output directory (default: $MAOT_OUT_DIR or ./maot-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct SyntheticRun {
    pub n: usize,
    pub report: Report,
    pub u_errors: Vec<f64>,
}

pub fn run_instance(
    prob: &TrigProblem<f64>,
    zero_potential: bool,
    n: usize,
    cfg: &NewtonConfig<f64>,
) -> Result<SyntheticRun, CliError> {
    let grid = Grid::new(n)?;
    let dens = prob.density()?;
    let (f, u_exact) = if zero_potential {
        (dens.to_field(grid), maot_core::Field::zeros(grid))
    } else {
        (prob.exact_forward_density(grid), prob.exact_potential(grid))
    };
    let mut cfg = cfg.clone();
    cfg.retain_history = true;
    let (_, report) = run_newton(&f, &dens, &cfg)?;
    let u_ref = u_exact.zero_mean();
    let u_errors: Vec<f64> = report
        .potential_history
        .iter()
        .map(|u_n| u_n.sub(&u_ref).l2_norm())
        .collect();
    Ok(SyntheticRun {
        n,
        report,
        u_errors,
    })
}

pub fn run(args: &SyntheticArgs) -> Result<bool, CliError> {
    let prob = TrigProblem {
        k: args.k,
        gamma: args.gamma,
        alpha: args.alpha,
        rho: args.rho,
    };
    if !args.zero_potential {
        prob.validate()?;
    }
    let cfg = NewtonConfig {
        tau: args.tau,
        tol: args.tol,
        max_iter: args.max_iter,
        backend: args.backend,
        inner_tol: args.inner_tol,
        inner_max: args.inner_max,
        gmres_restart: args.gmres_restart,
        drop_advection: args.drop_advection,
        ..Default::default()
    };
    cfg.validate()?;

    let runs = run_sweep(&args.n, args.single_thread, |n| {
        run_instance(&prob, args.zero_potential, n, &cfg)
    })?;

    let dir = out_dir(args.out.as_deref())?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut errors_by_n = Vec::new();
    for run in &runs {
        let name = args.backend.to_string();
        rows.extend(rows_from_report(
            &name,
            run.n,
            &run.report,
            Some(&run.u_errors),
        ));
        let mut summary = RunSummary::new(&name, run.n, &run.report);
        summary.final_u_error = run.u_errors.last().copied();
        summaries.push(summary);
        errors_by_n.push((run.n, run.u_errors.last().copied().unwrap_or(f64::NAN)));
    }

    let mut orders = Vec::new();
    errors_by_n.sort_by_key(|&(n, _)| n);
    for w in errors_by_n.windows(2) {
        orders.push(OrderRow {
            backend: args.backend.to_string(),
            from_n: w[0].0,
            to_n: w[1].0,
            order: (w[0].1 / w[1].1).log2(),
        });
    }

    let converged = summaries.iter().all(|s| s.converged);
    let report = RunReport {
        command: "synthetic".into(),
        config: serde_json::to_value(args).expect("flag echo"),
        converged,
        runs: summaries,
        observed_orders: orders.clone(),
    };
    report.write(&dir.join("report.json"))?;
    write_history_csv(&dir.join("history.csv"), &rows)?;
    if !orders.is_empty() {
        write_orders_csv(&dir.join("orders.csv"), &orders)?;
    }

    println!("synthetic: wrote {}", dir.display());
    for s in &report.runs {
        println!(
            "  n={:4} backend={} converged={} steps={} residual={:.3e} u_error={:.3e} mean_inner={:.2}",
            s.n,
            s.backend,
            s.converged,
            s.steps,
            s.final_residual,
            s.final_u_error.unwrap_or(f64::NAN),
            s.mean_inner_per_step
        );
    }
    for o in &orders {
        println!("  order {} -> {}: {:.4}", o.from_n, o.to_n, o.order);
    }
    Ok(converged)
}

/// Runs one closure per grid size, in worker threads unless serial
/// execution is forced; results come back in input order.
pub fn run_sweep<R: Send>(
    ns: &[usize],
    single_thread: bool,
    runner: impl Fn(usize) -> Result<R, CliError> + Sync,
) -> Result<Vec<R>, CliError> {
    if single_thread || ns.len() == 1 {
        return ns.iter().map(|&n| runner(n)).collect();
    }
    let mut slots: Vec<Option<Result<R, CliError>>> = ns.iter().map(|_| None).collect();
    std::thread::scope(|scope| {
        for (slot, &n) in slots.iter_mut().zip(ns) {
            let runner = &runner;
            scope.spawn(move || {
                *slot = Some(runner(n));
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("sweep worker always writes its slot"))
        .collect()
}
