//! Image registration: ingest two grayscale images, solve the transport
//! problem between their densities, emit the divergence map, the transport
//! distance, and optionally the warp sequence.

use std::path::PathBuf;

use clap::Args;
use maot_core::density::DensityPair;
use maot_core::field::SampleMode;
use maot_core::imaging::{render_field, to_density, warp_sequence, GrayImage, TransportResult};
use maot_core::ma::{run_newton_pair, Backend, NewtonConfig};

use crate::report::{rows_from_report, write_history_csv, RunReport, RunSummary};
use crate::{out_dir, CliError};

#[derive(Debug, Args, serde::Serialize)]
pub struct RegisterArgs {
    /// Source image (PGM P2/P5 or PNG).
    #[arg(long)]
    pub source: PathBuf,
    /// Target image (PGM P2/P5 or PNG).
    #[arg(long)]
    pub target: PathBuf,
    /// Working grid size (power of two for the fft backend).
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    #[arg(long = "inner-tol", default_value_t = 1e-4)]
    pub inner_tol: f64,
    #[arg(long, default_value = "fft")]
    pub backend: Backend,
    #[arg(long = "max-iter", default_value_t = 20)]
    pub max_iter: usize,
    /// Positivity floor applied when images become densities.
    #[arg(long, default_value_t = 0.1)]
    pub floor: f64,
    /// Interpolation for compositions with the target density.
    #[arg(long, default_value = "nearest")]
    pub sample: SampleMode,
    /// Emit the warped-density frame sequence.
    #[arg(long)]
    pub frames: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &RegisterArgs) -> Result<bool, CliError> {
    let source = GrayImage::load(&args.source)?;
    let target = GrayImage::load(&args.target)?;
    let (f, f_degenerate) = to_density(&source, args.n, args.floor)?;
    let (g, g_degenerate) = to_density(&target, args.n, args.floor)?;
    let mut diagnostics = Vec::new();
    if f_degenerate {
        diagnostics.push(format!(
            "source image {} is constant; density set to 1",
            args.source.display()
        ));
    }
    if g_degenerate {
        diagnostics.push(format!(
            "target image {} is constant; density set to 1",
            args.target.display()
        ));
    }

    let pair = DensityPair::new(f, g, args.floor)?;
    let cfg = NewtonConfig {
        tau: args.tau,
        tol: args.tol,
        max_iter: args.max_iter,
        backend: args.backend,
        inner_tol: args.inner_tol,
        sample_mode: args.sample,
        retain_history: args.frames,
        ..Default::default()
    };
    cfg.validate()?;
    let (u, report) = run_newton_pair(&pair, &cfg)?;
    let result = TransportResult::from_solution(u, pair.f(), report)?;

    let dir = out_dir(args.out.as_deref())?;
    let div_img = render_field(&result.divergence);
    div_img.write_pgm(&dir.join("divergence.pgm"))?;
    div_img.write_png(&dir.join("divergence.png"))?;

    if args.frames {
        let frames_dir = dir.join("frames");
        std::fs::create_dir_all(&frames_dir)?;
        for (i, frame) in warp_sequence(&result.report.density_history)
            .iter()
            .enumerate()
        {
            frame.write_pgm(&frames_dir.join(format!("iter_{i:03}.pgm")))?;
            frame.write_png(&frames_dir.join(format!("iter_{i:03}.png")))?;
        }
        let f_img = render_field(pair.f());
        f_img.write_pgm(&frames_dir.join("source_density.pgm"))?;
        f_img.write_png(&frames_dir.join("source_density.png"))?;
        let g_img = render_field(pair.g());
        g_img.write_pgm(&frames_dir.join("target_density.pgm"))?;
        g_img.write_png(&frames_dir.join("target_density.png"))?;
    }

    let backend = args.backend.to_string();
    let rows = rows_from_report(&backend, args.n, &result.report, None);
    write_history_csv(&dir.join("history.csv"), &rows)?;

    let mut summary = RunSummary::new(&backend, args.n, &result.report);
    summary.transport_distance = Some(result.distance);
    summary.diagnostics.extend(diagnostics);
    let converged = summary.converged;
    RunReport {
        command: "register".into(),
        config: serde_json::to_value(args).expect("flag echo"),
        converged,
        runs: vec![summary],
        observed_orders: Vec::new(),
    }
    .write(&dir.join("report.json"))?;

    println!("register: wrote {}", dir.display());
    println!(
        "  converged={} steps={} residual={:.3e} distance={:.6e}",
        converged, result.report.steps, result.report.final_residual, result.distance
    );
    Ok(converged)
}
