//! Machine-readable run reports: one structured JSON file plus a flat CSV
//! of per-iteration histories.

use std::io::Write;
use std::path::Path;

use maot_core::ma::SolveReport;
use serde::Serialize;

/// One row of history.csv. Numeric options render as empty cells.
#[derive(Debug, Clone)]
pub struct CsvRow {
    pub backend: String,
    pub n: usize,
    pub iter: usize,
    pub residual_l2: f64,
    pub u_error_l2: Option<f64>,
    pub inner_outer: usize,
    pub inner_total: usize,
    pub inner_converged: bool,
    pub wall_seconds: f64,
    pub min_eigenvalue: f64,
    pub spectral_radius: Option<f64>,
    pub spectral_radius_iterations: Option<usize>,
}

pub const CSV_HEADER: &str = "backend,n,iter,residual_l2,u_error_l2,inner_outer,inner_total,\
inner_converged,wall_seconds,min_eigenvalue,spectral_radius,spectral_radius_iterations";

pub fn rows_from_report(
    backend: &str,
    n: usize,
    report: &SolveReport<f64>,
    u_errors: Option<&[f64]>,
) -> Vec<CsvRow> {
    report
        .records
        .iter()
        .enumerate()
        .map(|(idx, rec)| CsvRow {
            backend: backend.to_string(),
            n,
            iter: rec.iter,
            residual_l2: rec.residual_l2,
            u_error_l2: u_errors.and_then(|e| e.get(idx).copied()),
            inner_outer: rec.inner_outer,
            inner_total: rec.inner_total,
            inner_converged: rec.inner_converged,
            wall_seconds: rec.wall_seconds,
            min_eigenvalue: rec.min_eigenvalue,
            spectral_radius: rec.spectral_radius,
            spectral_radius_iterations: rec.spectral_radius_iterations,
        })
        .collect()
}

pub fn write_history_csv(path: &Path, rows: &[CsvRow]) -> std::io::Result<()> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.17e},{},{},{},{},{:.6e},{:.6e},{},{}\n",
            r.backend,
            r.n,
            r.iter,
            r.residual_l2,
            opt(r.u_error_l2),
            r.inner_outer,
            r.inner_total,
            r.inner_converged,
            r.wall_seconds,
            r.min_eigenvalue,
            opt(r.spectral_radius),
            r.spectral_radius_iterations
                .map(|x| x.to_string())
                .unwrap_or_default(),
        ));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())
}

/// Summary of one solver run inside a report.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub backend: String,
    pub n: usize,
    pub converged: bool,
    pub steps: usize,
    pub final_residual: f64,
    pub total_seconds: f64,
    pub mean_inner_per_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub late_stage_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_u_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transport_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_radius_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_radius_max: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl RunSummary {
    pub fn new(backend: &str, n: usize, report: &SolveReport<f64>) -> Self {
        let probes: Vec<f64> = report
            .records
            .iter()
            .filter_map(|r| r.spectral_radius)
            .collect();
        Self {
            backend: backend.to_string(),
            n,
            converged: report.converged,
            steps: report.steps,
            final_residual: report.final_residual,
            total_seconds: report.total_seconds,
            mean_inner_per_step: report.mean_inner_per_step(),
            late_stage_ratio: maot_core::synthetic::late_stage_ratio(
                &report.residual_history(),
                5,
                1e-13,
            ),
            final_u_error: None,
            transport_distance: None,
            spectral_radius_min: probes.iter().copied().reduce(f64::min),
            spectral_radius_max: probes.iter().copied().reduce(f64::max),
            diagnostics: report.diagnostics.clone(),
        }
    }
}

/// Observed order of accuracy between two successive grid sizes.
#[derive(Debug, Clone, Serialize)]
pub struct OrderRow {
    pub backend: String,
    pub from_n: usize,
    pub to_n: usize,
    pub order: f64,
}

/// The structured report written as report.json.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: serde_json::Value,
    pub converged: bool,
    pub runs: Vec<RunSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub observed_orders: Vec<OrderRow>,
}

impl RunReport {
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("report serialization");
        std::fs::write(path, json)
    }
}

pub fn write_orders_csv(path: &Path, orders: &[OrderRow]) -> std::io::Result<()> {
    let mut out = String::from("backend,from_n,to_n,order\n");
    for o in orders {
        out.push_str(&format!(
            "{},{},{},{:.6}\n",
            o.backend, o.from_n, o.to_n, o.order
        ));
    }
    std::fs::write(path, out)
}
