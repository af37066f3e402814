//! Harness and CLI end to end.

use std::path::{Path, PathBuf};
use std::process::Command;

use qkd_lab::harness::{
    load_config, run_scenario, OutputFormat, ParamValue, RunError, ScenarioConfig, ScenarioKind,
};
use qkd_lab::key_rate;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped_configs() -> Vec<PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qkd-lab"))
}

#[test]
fn every_scenario_has_a_shipped_config() {
    let kinds: Vec<ScenarioKind> = shipped_configs()
        .iter()
        .map(|p| load_config(p).unwrap().scenario)
        .collect();
    for k in ScenarioKind::ALL {
        assert!(kinds.contains(&k), "no config for {k}");
    }
}

#[test]
fn heterodyne_resend_report() {
    let c = ScenarioConfig::from_toml_str(
        "scenario = \"CvHeterodyneResend\"\nn_trials = 100000\n[parameters]\nT = 0.1\nV = 25\n",
    )
    .unwrap();
    let r = run_scenario(&c, None).unwrap();
    assert!(r.errors.is_empty() && r.invariant_violations.is_empty());
    assert!(r.metric("i_ae").unwrap().mean > r.metric("i_ab").unwrap().mean);
    assert!(r.metric("channel_rate").unwrap().mean < 0.0);
    assert!(r.caveats.iter().any(|c| c.contains("I_E(K)")));
    for m in &r.metrics.0 {
        if let Some(z) = m.sigmas_off {
            assert!(z.abs() < 4.0, "{}: {z}", m.name);
        }
    }
}

#[test]
fn zero_trials_is_a_structured_error() {
    let mut c = ScenarioConfig::defaults(ScenarioKind::CvPassive);
    c.n_trials = 0;
    let e = run_scenario(&c, Some(1)).unwrap_err();
    assert_eq!(e, RunError::NoTrials);
    assert_eq!(e.to_string(), "no trials");
    let out = cli().args(["cv", "--trials", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no trials"));
}

#[test]
fn all_aborted_sessions_surface_in_report() {
    let c = ScenarioConfig::defaults(ScenarioKind::Bb84Prs)
        .with_parameter("qber_threshold", ParamValue::Float(0.0))
        .unwrap()
        .with_parameter("n_sent", ParamValue::Int(20_000))
        .unwrap();
    let mut c = c;
    c.n_trials = 3;
    let r = run_scenario(&c, Some(2)).unwrap();
    assert_eq!(r.errors, vec!["all sessions aborted".to_string()]);
    assert_eq!(r.metric("abort_rate").unwrap().mean, 1.0);
}

#[test]
fn thread_count_does_not_change_reports() {
    for name in ["cv_heterodyne_resend.toml", "decoy_cbs_s1.toml", "deletion_optimizer.toml"] {
        let mut c = load_config(&configs_dir().join(name)).unwrap();
        c.n_trials = c.n_trials.min(50_000);
        let one = run_scenario(&c, Some(1)).unwrap();
        let eight = run_scenario(&c, Some(8)).unwrap();
        assert_eq!(one.to_json(), eight.to_json(), "{name}");
        assert_eq!(one.to_csv(), eight.to_csv(), "{name}");
    }
}

#[test]
fn key_rate_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let status = cli()
        .args(["keyrate", "--sweep", "qber=0:0.25:0.01", "--format", "csv", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let qi = headers.iter().position(|h| h == "qber").unwrap();
    let ri = headers.iter().position(|h| h == "key_rate").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 26);
    for row in rows {
        let q: f64 = row[qi].parse().unwrap();
        let rate: f64 = row[ri].parse().unwrap();
        assert_eq!(rate, key_rate::key_rate_ideal(q).unwrap());
        // 17 significant digits in scientific notation
        let mantissa = row[ri].split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
    }
}

#[test]
fn json_report_layout() {
    let out = cli()
        .args(["keyrate", "--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["config", "config_hash", "n_trials", "metrics", "caveats", "errors", "invariant_violations"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let metrics = v["metrics"].as_object().unwrap();
    assert!(metrics.contains_key("key_rate"));
    for (name, m) in metrics {
        assert!(name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'));
        for field in ["mean", "variance", "ci_lo", "ci_hi", "n", "analytic_ref", "sigmas_off"] {
            assert!(m.get(field).is_some(), "{name} lacks {field}");
        }
    }
    assert_eq!(v["config"]["scenario"], "KeyRateSweep");
    assert!(!v["caveats"].as_array().unwrap().is_empty());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "scenario = \"CvPassive\"\n[parameters]\nT = 0.0\n").unwrap();
    let out = cli().arg("cv").arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`T`") && err.contains("(0,1]"), "{err}");

    let out = cli().args(["cv", "--set", "bogus=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = cli().args(["bb84", "--scenario", "DecoyPns"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = cli().args(["cv", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_destination_is_a_runtime_error() {
    let out = cli()
        .args(["keyrate", "--out", "/nonexistent-dir/x/report.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn echo_round_trip_keeps_hash() {
    let dir = tempfile::tempdir().unwrap();
    for path in shipped_configs() {
        let original = load_config(&path).unwrap();
        let sub = match original.scenario {
            ScenarioKind::CvPassive | ScenarioKind::CvHeterodyneResend | ScenarioKind::CvExcessNoiseTest => "cv",
            ScenarioKind::Bb84Prs => "bb84",
            ScenarioKind::DecoyPns | ScenarioKind::DecoyCbs => "decoy",
            ScenarioKind::KeyRateSweep => "keyrate",
            ScenarioKind::DeletionOptimizer => "optimize",
        };
        let out = cli()
            .args([sub, "--echo-config", "--config"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", path.display());
        let echoed = dir.path().join("echo.toml");
        std::fs::write(&echoed, &out.stdout).unwrap();
        let back = load_config(&echoed).unwrap();
        assert_eq!(back.hash(), original.hash(), "{}", path.display());
    }
    for path in shipped_configs() {
        let c = load_config(&path).unwrap();
        let back = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back.hash(), c.hash());
        assert_eq!(back, c);
    }
}

#[test]
fn cli_overrides_apply() {
    let out = cli()
        .args(["decoy", "--scenario", "DecoyCbs", "--seed", "5", "--trials", "1000"])
        .args(["--set", "kappa=0.5", "--format", "csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("name,mean,var,ci_lo,ci_hi,n,analytic_ref,sigmas_off\n"));
    assert!(text.contains("lr_success,") && text.contains(",1000,"));

    let echo = cli()
        .args(["decoy", "--scenario", "DecoyCbs", "--seed", "5", "--set", "kappa=0.5", "--echo-config"])
        .output()
        .unwrap();
    let c = ScenarioConfig::from_toml_str(&String::from_utf8(echo.stdout).unwrap()).unwrap();
    assert_eq!(c.master_seed, 5);
    assert_eq!(c.parameters.f64("kappa"), 0.5);
    assert_eq!(c.output.format, OutputFormat::Json);
}
