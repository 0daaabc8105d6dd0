mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use pedlead::report::{read_leadership_report, run_analyze, summarize, Emit, RunConfig};
use pedlead::simulate::{corpus, SimConfig};
use pedlead::Mode;

use common::*;

fn pair_corpus(dir: &Path) -> Vec<PathBuf> {
    let configs: Vec<SimConfig> = (0..2)
        .map(|k| SimConfig {
            name: Some(format!("pair_{k}")),
            ..delay_pair(0.5, 1.0, k)
        })
        .collect();
    corpus(&configs, dir).unwrap();
    (0..2).map(|k| dir.join(format!("pair_{k}.csv"))).collect()
}

fn all_artifacts() -> RunConfig {
    RunConfig {
        emit: Emit {
            json: true,
            csv: true,
            svg: true,
            dot: true,
        },
        ..RunConfig::default()
    }
}

#[test]
fn analyze_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = pair_corpus(&tmp.path().join("in"));
    let out = tmp.path().join("out");
    let summary = run_analyze(&inputs, &all_artifacts(), &out).unwrap();
    assert!(summary.ok(), "{summary:?}");
    assert_eq!(summary.processed.len(), 2);

    let dir = out.join("pair_0");
    for file in [
        "kinematics.csv",
        "leadership_heading.json",
        "leadership_speed.json",
        "network_heading.json",
        "network_speed.json",
        "network_heading_w0.dot",
        "network_speed_w4.dot",
        "heatmaps/heading_L_F.csv",
        "heatmaps/heading_F_L.svg",
        "heatmaps/speed_L_F.csv",
    ] {
        assert!(dir.join(file).is_file(), "missing {file}");
    }
    let leaders = read_leadership_report(&dir.join("leadership_heading.json")).unwrap();
    assert_eq!(leaders.mode, Mode::Heading);
    assert_eq!(leaders.params.max_lag, 120);
    let lead = leaders
        .scores
        .iter()
        .find(|s| s.agent.as_str() == "L")
        .unwrap();
    assert!(lead.index_percent > 50.0, "{lead:?}");

    let text = fs::read_to_string(out.join("summary.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["status"], "ok");
    let no_tmp = walk(&out)
        .into_iter()
        .all(|p| p.extension().is_none_or(|e| e != "tmp"));
    assert!(no_tmp, "staging files left behind");
}

#[test]
fn corrupt_trial_is_isolated() {
    let tmp = tempfile::tempdir().unwrap();
    let mut inputs = pair_corpus(&tmp.path().join("in"));
    let bad = tmp.path().join("in").join("broken.csv");
    fs::write(&bad, "agent_id,frame,x,y\nA,0,1.0,oops\n").unwrap();
    inputs.push(bad.clone());
    let out = tmp.path().join("out");
    let summary = run_analyze(&inputs, &RunConfig::default(), &out).unwrap();
    assert_eq!(summary.processed.len(), 2);
    assert_eq!(summary.failures.len(), 1);
    assert_eq!(summary.failures[0].input, bad.display().to_string());
    assert!(out.join("pair_1").join("leadership_speed.json").is_file());
    assert!(!out.join("broken").exists());
}

#[test]
fn missing_input_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let ghost = tmp.path().join("ghost.csv");
    let summary = run_analyze(
        std::slice::from_ref(&ghost),
        &RunConfig::default(),
        &tmp.path().join("out"),
    )
    .unwrap();
    assert!(
        summary.failures[0]
            .error
            .contains(&*ghost.to_string_lossy()),
        "{:?}",
        summary.failures
    );
}

#[test]
fn summary_aggregates_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = pair_corpus(&tmp.path().join("in"));
    let out = tmp.path().join("out");
    run_analyze(&inputs, &RunConfig::default(), &out).unwrap();

    let agg = tmp.path().join("agg");
    let s = summarize(&[out], &agg).unwrap();
    assert_eq!(s.reports_read, 4);
    assert_eq!(s.files.len(), 4);
    let by_agent = fs::read_to_string(agg.join("aggregate_heading_by_agent.csv")).unwrap();
    let rows: Vec<&str> = by_agent.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "group,mean,sem,n");
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r.ends_with(",2")), "{rows:?}");

    // two-agent trials carry no positions
    let by_position = fs::read_to_string(agg.join("aggregate_heading_by_position.csv")).unwrap();
    assert!(by_position.contains("# skipped=4"), "{by_position}");
}

#[test]
fn summary_without_reports_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(summarize(&[tmp.path().to_owned()], &tmp.path().join("agg")).is_err());
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

fn pedlead(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pedlead"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_simulate_analyze_summarize_render() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).display().to_string();
    let config = serde_json::to_string(&delay_pair(0.5, 1.0, 0)).unwrap();
    fs::write(p("cfg.json"), format!("[{config}, {config}]")).unwrap();

    let sim = pedlead(&[
        "simulate",
        "--config",
        &p("cfg.json"),
        "--out",
        &p("sim"),
        "--seed",
        "7",
    ]);
    assert!(
        sim.status.success(),
        "{}",
        String::from_utf8_lossy(&sim.stderr)
    );
    let manifest = fs::read_to_string(p("sim/manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 8"), "{manifest}");

    let analyze = pedlead(&[
        "analyze",
        &p("sim"),
        "--out",
        &p("out"),
        "--mode",
        "heading",
        "--emit",
        "json,csv",
    ]);
    assert!(
        analyze.status.success(),
        "{}",
        String::from_utf8_lossy(&analyze.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&analyze.stdout).unwrap();
    assert_eq!(summary["processed"].as_array().unwrap().len(), 2);
    assert!(!Path::new(&p("out/trial_001/leadership_speed.json")).exists());

    let agg = pedlead(&["summarize", &p("out"), "--out", &p("agg")]);
    assert!(
        agg.status.success(),
        "{}",
        String::from_utf8_lossy(&agg.stderr)
    );
    assert!(Path::new(&p("agg/aggregate_heading_by_agent.csv")).is_file());

    let render = pedlead(&[
        "render",
        &p("out/trial_001/heatmaps/heading_L_F.csv"),
        "--out",
        &p("map.svg"),
    ]);
    assert!(
        render.status.success(),
        "{}",
        String::from_utf8_lossy(&render.stderr)
    );
    assert!(fs::read_to_string(p("map.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn cli_failure_reports_json_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let ghost = tmp.path().join("nowhere.json").display().to_string();
    let out = pedlead(&[
        "simulate",
        "--config",
        &ghost,
        "--out",
        &tmp.path().display().to_string(),
    ]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["status"], "error");
    assert!(err["error"].as_str().unwrap().contains(&ghost));

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "not a trial\n").unwrap();
    let out = pedlead(&[
        "analyze",
        &bad.display().to_string(),
        "--out",
        &tmp.path().join("o").display().to_string(),
    ]);
    assert!(!out.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(summary["status"], "error");
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
}
