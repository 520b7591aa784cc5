use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use vortex_ring::{solve_fixed_point, RingError, RunParams};
use vortex_ring_cli::commands::{cmd_sweep_with, CONTOURS, FIELDS, FIT_REPORT, REPORT_MD, RUN_SUMMARY, SWEEP_CSV};
use vortex_ring_cli::RunConfig;

fn vring(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vring"));
    cmd.args(args).env_remove("VRING_OUTPUT_DIR").env_remove("VRING_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn disk_config(out: &Path, lambda: f64) -> String {
    format!(
        "[domain]\nkind = \"disk\"\nb = 1.0\n[grid]\nn_r = 64\nn_z = 128\n[physics]\nlambda = {lambda}\n[output]\ndir = {:?}\n",
        out.display().to_string()
    )
}

fn rectangle_sweep(out: &Path, lambdas: &str) -> String {
    format!(
        "[domain]\nkind = \"rectangle\"\nb = 1.0\nc = 1.0\n[grid]\nn_r = 128\nn_z = 256\n[physics]\nlambdas = {lambdas}\n\
         [output]\ndir = {:?}\nfields = false\n",
        out.display().to_string()
    )
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str::<Value>(line).expect("machine-readable error")["error"].clone()
}

#[test]
fn solve_disk_writes_summary_fields_and_contours() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    let cfg = write_config(tmp.path(), "disk.toml", &disk_config(&out, 100.0));
    let res = vring(&["solve", "--config", &cfg], &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join(RUN_SUMMARY)).unwrap()).unwrap();
    assert!(summary["record"]["mu"].as_f64().unwrap() > 0.0);
    assert!(summary["record"]["converged"].as_bool().unwrap());
    assert!(!summary["energy_history"].as_array().unwrap().is_empty());

    let fields = fs::read_to_string(out.join(FIELDS)).unwrap();
    let mut lines = fields.lines();
    assert_eq!(lines.next().unwrap(), "i,j,r,z,active,zeta,psi_induced,psi_total,psi_lambda,v_r,v_z");
    assert_eq!(lines.count(), 64 * 128);

    let svg = fs::read_to_string(out.join(CONTOURS)).unwrap();
    assert!(svg.contains("id=\"core\"") && svg.contains("id=\"contours\""));
}

#[test]
fn infeasible_strength_exits_with_code_2() {
    let tmp = TempDir::new().unwrap();
    // |D| = 4π/3, so λ = 0.2 cannot hold unit mass
    let cfg = write_config(tmp.path(), "disk.toml", &disk_config(tmp.path(), 0.2));
    let res = vring(&["solve", "--config", &cfg], &[]);
    assert_eq!(res.status.code(), Some(2));
    let err = stderr_error(&res);
    assert_eq!(err["kind"], "infeasible");
    assert_eq!(err["exit_code"], 2);
    assert!(tmp.path().join("error.json").is_file());
}

#[test]
fn missing_output_dir_exits_with_code_4() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "disk.toml", &disk_config(&tmp.path().join("nowhere"), 100.0));
    let res = vring(&["solve", "--config", &cfg], &[]);
    assert_eq!(res.status.code(), Some(4));
    assert_eq!(stderr_error(&res)["kind"], "io");
}

#[test]
fn missing_config_file_exits_with_code_4() {
    let res = vring(&["solve", "--config", "/nonexistent/config.toml"], &[]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn bad_config_exits_with_code_1() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", "[domain]\nkind = \"torus\"\n");
    let res = vring(&["solve", "--config", &cfg], &[]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(stderr_error(&res)["kind"], "config");
}

#[test]
fn output_dir_and_thread_overrides_keep_outputs_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    fs::create_dir(&a).unwrap();
    fs::create_dir(&b).unwrap();
    // the config points elsewhere; the environment wins
    let cfg = write_config(tmp.path(), "disk.toml", &disk_config(&tmp.path().join("ignored"), 60.0));
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let dir = dir.display().to_string();
        let res = vring(&["solve", "--config", &cfg], &[("VRING_OUTPUT_DIR", &dir), ("VRING_THREADS", threads)]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for f in [RUN_SUMMARY, FIELDS, CONTOURS] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn sweep_with_three_lambdas_is_insufficient() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", &rectangle_sweep(tmp.path(), "[10.0, 20.0, 40.0]"));
    let res = vring(&["sweep", "--config", &cfg], &[]);
    assert_eq!(res.status.code(), Some(3));
    assert_eq!(stderr_error(&res)["kind"], "insufficient_sweep");
}

#[test]
fn half_plane_sweep_reports_slope_targets_from_r_star() {
    let tmp = TempDir::new().unwrap();
    let w = 1.0 / (4.0 * PI * PI);
    let body = format!(
        "[domain]\nkind = \"half_plane\"\n[grid]\nn_r = 256\nn_z = 384\nr_max = 1.0\nz_max = 0.75\n\
         [physics]\nw = {w:e}\nlambdas = [62.5, 125.0, 250.0, 500.0]\n[output]\ndir = {:?}\nfields = false\n",
        tmp.path().display().to_string()
    );
    let cfg = write_config(tmp.path(), "hp.toml", &body);
    let res = vring(&["sweep", "--config", &cfg], &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let fit: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join(FIT_REPORT)).unwrap()).unwrap();
    let rs = 1.0 / (16.0 * PI * PI * w);
    assert!((fit["r_star"].as_f64().unwrap() - rs).abs() < 1e-12);
    let target = fit["mu_slope"]["target"].as_f64().unwrap();
    assert!((target - (rs / (8.0 * PI * PI) - w * rs * rs / 2.0)).abs() < 1e-12);
    assert!(fit["energy_slope"]["target"].as_f64().is_some());
    assert!(fit["overall_pass"].is_boolean());
}

#[test]
fn diverged_point_is_flagged_and_the_fit_uses_the_rest() {
    let tmp = TempDir::new().unwrap();
    let cfg = RunConfig::parse(&rectangle_sweep(tmp.path(), "[5.0, 10.0, 20.0, 40.0, 80.0]")).unwrap();
    let runner = |p: &RunParams| {
        if p.lambda == 20.0 {
            Err(RingError::NonConvergence {
                iterations: 200,
                last_diffs: [1e-3, 2e-3],
            })
        } else {
            solve_fixed_point(p)
        }
    };
    let out = cmd_sweep_with(&cfg, &runner).unwrap();
    assert_eq!(out.sweep.records.len(), 4);
    assert_eq!(out.sweep.failures.len(), 1);
    assert_eq!(out.fit.report.failures.len(), 1);

    let csv = fs::read_to_string(tmp.path().join(SWEEP_CSV)).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("lambda,status,error,domain,"));
    assert!(rows[3].starts_with("20,failed,"));
    assert_eq!(rows.iter().filter(|r| r.contains(",ok,")).count(), 4);
    assert!(out.fit.report.diameter_exponent.fit.slope.is_finite());
}

#[test]
fn report_lists_predicted_and_fitted_slopes_and_guards_inputs() {
    let tmp = TempDir::new().unwrap();
    let sweep_dir = tmp.path().join("rect");
    fs::create_dir(&sweep_dir).unwrap();
    let cfg = write_config(tmp.path(), "s.toml", &rectangle_sweep(&sweep_dir, "[10.0, 20.0, 40.0, 80.0]"));
    assert_eq!(vring(&["sweep", "--config", &cfg], &[]).status.code(), Some(0));

    let dir = sweep_dir.display().to_string();
    let res = vring(&["report", "--dir", &dir], &[]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let md = fs::read_to_string(sweep_dir.join(REPORT_MD)).unwrap();
    assert!(md.contains("r*/(8 pi^2) - W r*^2/2"));
    assert!(md.contains("diameter exponent") && md.contains("point_00/contours.svg"));
    let html = fs::read_to_string(sweep_dir.join("report.html")).unwrap();
    assert!(html.contains("<svg"));

    // a second sweep of another domain next to the first
    let other = tmp.path().join("disk");
    fs::create_dir(&other).unwrap();
    let fit = fs::read_to_string(sweep_dir.join(FIT_REPORT)).unwrap().replace("\"rectangle\"", "\"disk\"");
    fs::write(other.join(FIT_REPORT), fit).unwrap();
    fs::copy(sweep_dir.join(SWEEP_CSV), other.join(SWEEP_CSV)).unwrap();
    let root = tmp.path().display().to_string();
    let res = vring(&["report", "--dir", &root], &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr_error(&res)["message"].as_str().unwrap().contains("across domains"));

    let empty = TempDir::new().unwrap();
    let res = vring(&["report", "--dir", &empty.path().display().to_string()], &[]);
    assert_eq!(res.status.code(), Some(4));

    fs::remove_file(other.join(SWEEP_CSV)).unwrap();
    let res = vring(&["report", "--dir", &other.display().to_string()], &[]);
    assert_eq!(res.status.code(), Some(4));
    assert!(stderr_error(&res)["message"].as_str().unwrap().contains(SWEEP_CSV));
}

#[test]
fn help_documents_config_defaults() {
    let res = vring(&["solve", "--help"], &[]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("max_iters = 200") && text.contains("VRING_THREADS"));
}
