//! The `solve`, `sweep` and `report` commands and the files they emit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use vortex_ring::diagnostics::{r_star, shifted_stream, total_stream};
use vortex_ring::flow::velocity_from_stream;
use vortex_ring::{
    fit_scalings, solve_fixed_point, DiagnosticsRecord, FitReport, FixedPointState, Grid, RingError, RunParams,
    SweepResult,
};

use crate::config::RunConfig;
use crate::contour::ContourPlot;
use crate::error::CliError;

pub const RUN_SUMMARY: &str = "run_summary.json";
pub const FIELDS: &str = "fields.csv";
pub const CONTOURS: &str = "contours.svg";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const FIT_REPORT: &str = "fit_report.json";
pub const REPORT_MD: &str = "report.md";
pub const REPORT_HTML: &str = "report.html";

/// Signature of one fixed-point run; swapped out in tests.
pub type Runner = dyn Fn(&RunParams) -> vortex_ring::Result<(FixedPointState, DiagnosticsRecord)> + Sync;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub params: RunParams,
    pub record: DiagnosticsRecord,
    pub energy_history: Vec<f64>,
}

/// Contents of `fit_report.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitFile {
    #[serde(flatten)]
    pub report: FitReport,
    /// every slope with a target is within tolerance and the distance trend, if any, decreases
    pub overall_pass: bool,
    /// run-summary directories of the sweep points, relative to the sweep directory
    pub point_dirs: Vec<Option<String>>,
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn require_dir(dir: &Path) -> Result<(), CliError> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist")))
    }
}

fn timestamp(cfg: &RunConfig) -> Option<u64> {
    cfg.output
        .timestamp
        .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

/// `i,j,r,z,active,zeta,psi_induced,psi_total,psi_lambda,v_r,v_z`.
pub fn fields_csv(state: &FixedPointState, params: &RunParams, grid: &Grid) -> Result<String, CliError> {
    let bg = params.background_flow()?;
    let total = total_stream(&state.psi_induced, &bg, params.lambda, grid);
    let shifted = shifted_stream(state, &bg, grid);
    let vel = velocity_from_stream(&total, grid);
    let zeta = state.zeta.values();
    let mut out = String::with_capacity(grid.len() * 160);
    out.push_str("i,j,r,z,active,zeta,psi_induced,psi_total,psi_lambda,v_r,v_z\n");
    for i in 0..grid.n_r {
        for j in 0..grid.n_z {
            let k = grid.idx(i, j);
            let _ = writeln!(
                out,
                "{i},{j},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                grid.r(i),
                grid.z(j),
                u8::from(grid.is_active(k)),
                zeta[k],
                state.psi_induced[k],
                total[k],
                shifted[k],
                vel[k].v_r,
                vel[k].v_z
            );
        }
    }
    Ok(out)
}

fn contour_svg(state: &FixedPointState, params: &RunParams, grid: &Grid, ts: Option<u64>) -> Result<String, CliError> {
    let bg = params.background_flow()?;
    let shifted = shifted_stream(state, &bg, grid);
    let plot = ContourPlot {
        grid,
        psi: shifted.values(),
        weights: &state.zeta.weights,
        r_star: r_star(&params.domain, params.w).ok(),
        title: format!("{} lambda = {} W = {:.6e}", params.domain.kind().name(), params.lambda, params.w),
        timestamp: ts,
    };
    Ok(plot.render())
}

/// Writes the artifacts of one run into `dir` according to the emit flags.
fn emit_run(
    cfg: &RunConfig,
    dir: &Path,
    params: &RunParams,
    state: &FixedPointState,
    record: &DiagnosticsRecord,
) -> Result<(), CliError> {
    let grid = params.grid()?;
    if cfg.output.diagnostics {
        let summary = RunSummary {
            params: params.clone(),
            record: record.clone(),
            energy_history: state.energy_history.clone(),
        };
        write(&dir.join(RUN_SUMMARY), &to_json(&summary))?;
    }
    if cfg.output.fields {
        write(&dir.join(FIELDS), &fields_csv(state, params, &grid)?)?;
    }
    if cfg.output.contours {
        write(&dir.join(CONTOURS), &contour_svg(state, params, &grid, timestamp(cfg))?)?;
    }
    Ok(())
}

/// One fixed-point run at the configured λ.
pub fn cmd_solve(cfg: &RunConfig) -> Result<DiagnosticsRecord, CliError> {
    cmd_solve_with(cfg, &solve_fixed_point)
}

pub fn cmd_solve_with(cfg: &RunConfig, runner: &Runner) -> Result<DiagnosticsRecord, CliError> {
    let dir = &cfg.output.dir;
    require_dir(dir)?;
    let params = cfg.params(cfg.solve_lambda()?)?;
    let (state, record) = runner(&params)?;
    emit_run(cfg, dir, &params, &state, &record)?;
    Ok(record)
}

/// Outcome of a sweep: the raw result and its fit.
#[derive(Debug)]
pub struct SweepOutcome {
    pub sweep: SweepResult,
    pub fit: FitFile,
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepOutcome, CliError> {
    cmd_sweep_with(cfg, &solve_fixed_point)
}

/// Runs every λ in parallel; failed points are recorded and the sweep continues.
pub fn cmd_sweep_with(cfg: &RunConfig, runner: &Runner) -> Result<SweepOutcome, CliError> {
    let lambdas = cfg.sweep_lambdas()?;
    if lambdas.len() < 4 {
        return Err(RingError::InsufficientSweep(lambdas.len()).into());
    }
    let dir = &cfg.output.dir;
    require_dir(dir)?;
    let domain = cfg.meridional_domain()?;
    let params: Vec<RunParams> = lambdas.iter().map(|&l| cfg.params(l)).collect::<Result<_, _>>()?;
    let emit_points = cfg.output.diagnostics || cfg.output.contours || cfg.output.fields;

    let outcomes: Vec<Result<(DiagnosticsRecord, Option<String>), (f64, String)>> = params
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let (state, record) = runner(p).map_err(|e| (p.lambda, e.to_string()))?;
            let sub = format!("point_{k:02}");
            if emit_points {
                let path = dir.join(&sub);
                fs::create_dir_all(&path)
                    .map_err(|e| CliError::io(&path, e))
                    .and_then(|_| emit_run(cfg, &path, p, &state, &record))
                    .map_err(|e| (p.lambda, e.to_string()))?;
            }
            Ok((record, emit_points.then_some(sub)))
        })
        .collect();

    let mut sweep = SweepResult {
        domain,
        w: cfg.physics.w,
        background: params[0].background,
        records: Vec::new(),
        failures: Vec::new(),
    };
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut point_dirs = Vec::new();
    for (p, o) in params.iter().zip(outcomes) {
        match o {
            Ok((record, sub)) => {
                rows.push((p.lambda, Ok(record.clone())));
                sweep.records.push(record);
                point_dirs.push(sub);
            }
            Err((lambda, msg)) => {
                rows.push((lambda, Err(msg.clone())));
                sweep.failures.push((lambda, msg));
            }
        }
    }
    write(&dir.join(SWEEP_CSV), &sweep_csv(&rows)?)?;

    let report = fit_scalings(&sweep, &domain, sweep.w)?;
    let overall_pass = [&report.diameter_exponent, &report.mu_slope, &report.energy_slope]
        .iter()
        .all(|c| c.pass != Some(false))
        && report.dist_decreasing != Some(false);
    let fit = FitFile {
        report,
        overall_pass,
        point_dirs,
    };
    write(&dir.join(FIT_REPORT), &to_json(&fit))?;
    Ok(SweepOutcome { sweep, fit })
}

/// One row per λ: `lambda,status,error` followed by every record field.
fn sweep_csv(rows: &[(f64, Result<DiagnosticsRecord, String>)]) -> Result<String, CliError> {
    let columns: Vec<String> = match rows.iter().find_map(|(_, r)| r.as_ref().ok()) {
        Some(rec) => match serde_json::to_value(rec).expect("serialisable") {
            Value::Object(map) => map.keys().cloned().collect(),
            _ => unreachable!("records serialise as objects"),
        },
        None => Vec::new(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = ["lambda", "status", "error"].into_iter().map(String::from).chain(columns.iter().cloned());
    w.write_record(header).map_err(csv_err)?;
    for (lambda, row) in rows {
        let mut fields = vec![format!("{lambda}")];
        match row {
            Ok(rec) => {
                fields.push("ok".into());
                fields.push(String::new());
                let v = serde_json::to_value(rec).expect("serialisable");
                fields.extend(columns.iter().map(|c| cell(&v[c.as_str()])));
            }
            Err(msg) => {
                fields.push("failed".into());
                fields.push(msg.clone());
                fields.extend(columns.iter().map(|_| String::new()));
            }
        }
        w.write_record(&fields).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Config(format!("csv: {e}"))
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

// ---------------------------------------------------------------------------
// report

/// A sweep directory found by `report`.
struct SweepDir {
    path: PathBuf,
    fit: FitFile,
}

fn load_sweep_dir(path: &Path) -> Result<SweepDir, CliError> {
    let missing: Vec<String> = [FIT_REPORT, SWEEP_CSV]
        .iter()
        .filter(|f| !path.join(f).is_file())
        .map(|f| path.join(f).display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Report(format!("missing {}", missing.join(", "))));
    }
    let file = path.join(FIT_REPORT);
    let text = fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
    let fit: FitFile =
        serde_json::from_str(&text).map_err(|e| CliError::Report(format!("{}: {e}", file.display())))?;
    Ok(SweepDir {
        path: path.to_path_buf(),
        fit,
    })
}

/// Sweep outputs in `dir` itself or in its immediate subdirectories.
fn find_sweeps(dir: &Path) -> Result<Vec<SweepDir>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    if dir.join(FIT_REPORT).exists() || dir.join(SWEEP_CSV).exists() {
        return Ok(vec![load_sweep_dir(dir)?]);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(FIT_REPORT).exists() || p.join(SWEEP_CSV).exists())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(CliError::Report(format!(
            "no sweep outputs ({FIT_REPORT}, {SWEEP_CSV}) in {}",
            dir.display()
        )));
    }
    subdirs.iter().map(|p| load_sweep_dir(p)).collect()
}

/// Renders `report.md` and `report.html` into `dir` from the sweep outputs found there.
pub fn cmd_report(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sweeps = find_sweeps(dir)?;
    let mut domains: Vec<&str> = sweeps.iter().map(|s| s.fit.report.domain.as_str()).collect();
    domains.sort_unstable();
    domains.dedup();
    if domains.len() > 1 {
        return Err(CliError::Config(format!("refusing to aggregate sweeps across domains: {}", domains.join(", "))));
    }
    let mut md = String::from("# Vortex ring sweep report\n\n");
    let mut html = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Vortex ring sweep report</title>\
         <style>body{font-family:sans-serif;max-width:60em;margin:auto}table{border-collapse:collapse}\
         td,th{border:1px solid #999;padding:2px 6px;text-align:right}figure{display:inline-block;margin:4px}</style>\
         </head><body>\n<h1>Vortex ring sweep report</h1>\n",
    );
    for s in &sweeps {
        let rel = s.path.strip_prefix(dir).unwrap_or(&s.path).display().to_string();
        render_sweep(s, &rel, &mut md, &mut html)?;
    }
    html.push_str("</body></html>\n");
    let (md_path, html_path) = (dir.join(REPORT_MD), dir.join(REPORT_HTML));
    write(&md_path, &md)?;
    write(&html_path, &html)?;
    Ok(vec![md_path, html_path])
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6e}"))
}

fn render_sweep(s: &SweepDir, rel: &str, md: &mut String, html: &mut String) -> Result<(), CliError> {
    let r = &s.fit.report;
    let title = if rel.is_empty() { r.domain.clone() } else { format!("{} ({rel})", r.domain) };
    let _ = writeln!(md, "## {title}\n\nW = {:.6e}, r* = {}, overall pass: {}\n", r.w, opt(r.r_star), s.fit.overall_pass);
    let _ = writeln!(
        html,
        "<h2>{title}</h2>\n<p>W = {:.6e}, r* = {}, overall pass: {}</p>",
        r.w,
        opt(r.r_star),
        s.fit.overall_pass
    );

    let checks = [
        ("diameter exponent", "1", &r.diameter_exponent),
        ("mu slope d mu / d log lambda", "r*/(8 pi^2) - W r*^2/2", &r.mu_slope),
        ("energy slope d E / d log lambda", "r*/(16 pi^2) - W r*^2/2", &r.energy_slope),
    ];
    md.push_str("| quantity | fitted | stderr | predicted | formula | tolerance | pass |\n|---|---|---|---|---|---|---|\n");
    html.push_str(
        "<table><tr><th>quantity</th><th>fitted</th><th>stderr</th><th>predicted</th><th>formula</th>\
         <th>tolerance</th><th>pass</th></tr>\n",
    );
    for (name, formula, c) in checks {
        let tol = if c.relative { format!("{}%", c.tolerance * 100.0) } else { format!("{}", c.tolerance) };
        let pass = c.pass.map_or("-".to_string(), |p| p.to_string());
        let _ = writeln!(
            md,
            "| {name} | {:.6e} | {:.2e} | {} | {formula} | {tol} | {pass} |",
            c.fit.slope,
            c.fit.slope_stderr,
            opt(c.target)
        );
        let _ = writeln!(
            html,
            "<tr><td>{name}</td><td>{:.6e}</td><td>{:.2e}</td><td>{}</td><td>{formula}</td><td>{tol}</td><td>{pass}</td></tr>",
            c.fit.slope,
            c.fit.slope_stderr,
            opt(c.target)
        );
    }
    html.push_str("</table>\n");

    md.push_str("\n| lambda | diameter | mu | E | dist to r* | Kelvin-Hicks ratio | in fit |\n|---|---|---|---|---|---|---|\n");
    html.push_str(
        "<table><tr><th>lambda</th><th>diameter</th><th>mu</th><th>E</th><th>dist to r*</th>\
         <th>Kelvin-Hicks ratio</th><th>in fit</th></tr>\n",
    );
    for p in &r.points {
        let _ = writeln!(
            md,
            "| {} | {:.6e} | {:.6e} | {:.6e} | {} | {} | {} |",
            p.lambda,
            p.diameter,
            p.mu,
            p.e_lambda,
            opt(p.dist_to_rstar),
            opt(p.kelvin_hicks_ratio),
            p.used
        );
        let _ = writeln!(
            html,
            "<tr><td>{}</td><td>{:.6e}</td><td>{:.6e}</td><td>{:.6e}</td><td>{}</td><td>{}</td><td>{}</td></tr>",
            p.lambda,
            p.diameter,
            p.mu,
            p.e_lambda,
            opt(p.dist_to_rstar),
            opt(p.kelvin_hicks_ratio),
            p.used
        );
    }
    html.push_str("</table>\n");
    if !r.failures.is_empty() {
        md.push_str("\nFailed points:\n\n");
        html.push_str("<p>Failed points:</p><ul>\n");
        for (l, e) in &r.failures {
            let _ = writeln!(md, "- lambda {l}: {e}");
            let _ = writeln!(html, "<li>lambda {l}: {}</li>", e.replace('<', "&lt;"));
        }
        html.push_str("</ul>\n");
    }

    md.push('\n');
    for (p, sub) in r.points.iter().zip(&s.fit.point_dirs) {
        let Some(sub) = sub else { continue };
        let svg_path = s.path.join(sub).join(CONTOURS);
        if !svg_path.is_file() {
            continue;
        }
        let link = if rel.is_empty() { format!("{sub}/{CONTOURS}") } else { format!("{rel}/{sub}/{CONTOURS}") };
        let _ = writeln!(md, "![lambda = {}]({link})", p.lambda);
        let svg = fs::read_to_string(&svg_path).map_err(|e| CliError::io(&svg_path, e))?;
        let _ = writeln!(html, "<figure>{svg}<figcaption>lambda = {}</figcaption></figure>", p.lambda);
    }
    Ok(())
}
