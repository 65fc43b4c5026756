use std::path::{Path, PathBuf};
use std::process::Command;

use pkgsv::analytic::{BenchSettings, BenchTask};
use pkgsv::cli::{cmd_bench, cmd_simulate, run_from_args, RunConfig};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> pkgsv::Result<()> {
    run_from_args(std::iter::once("pkgsv").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Copy of a shipped configuration with a JSON edit applied.
fn edited(dir: &Path, name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(config(name)).unwrap()).unwrap();
    edit(&mut v);
    let out = dir.join(name);
    std::fs::write(&out, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    out
}

#[test]
fn scalar_exact_report_has_the_closed_form_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sv.csv");
    let wide = dir.path().join("wide.csv");
    let json = dir.path().join("sv.json");
    let cfg = config("scalar_h2.json");
    run(&["sv", "--config", p(&cfg), "--exact", "--out", p(&out), "--wide", p(&wide), "--json", p(&json)]).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "input_label,output_label,sv,mc_variance");
    assert!(text.contains("\"e[t=1,k=s1]\",\"s[t=2,k=s1]\",6.9999999999999996e-1,0"), "{text}");
    assert_eq!(std::fs::read_to_string(&wide).unwrap().lines().count(), 3);
    let report: pkgsv::shapley::SvReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(report.efficiency_residual.iter().all(|r| *r < 1e-12));
}

#[test]
fn sv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "linear_policy.json", |v| {
        v["analysis"]["engine"] = "simulation".into();
        v["analysis"]["permutations"] = 6.into();
        v["analysis"]["trajectories"] = 8.into();
    });
    let outs: Vec<Vec<u8>> = ["1", "4", "4"]
        .iter()
        .enumerate()
        .map(|(i, threads)| {
            let out = dir.path().join(format!("sv{i}.csv"));
            run(&["--threads", threads, "sv", "--config", p(&cfg), "--out", p(&out)]).unwrap();
            std::fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[1], outs[2]);
}

#[test]
fn simulate_fit_and_sv_with_a_posterior() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("linear_policy.json");
    let data = dir.path().join("data.csv");
    let post = dir.path().join("post.json");
    let out = dir.path().join("sv.csv");
    run(&["simulate", "--config", p(&cfg), "--batches", "30", "--out", p(&data)]).unwrap();
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().skip(1).filter(|l| l.starts_with("30,")).count(), 4);
    run(&["fit", "--config", p(&cfg), "--data", p(&data), "--out", p(&post)]).unwrap();
    run(&["sv", "--config", p(&cfg), "--posterior", p(&post), "--out", p(&out)]).unwrap();
    let rows = std::fs::read_to_string(&out).unwrap().lines().count() - 1;
    assert_eq!(rows, 6 * 9);
}

#[test]
fn zero_batches_writes_only_the_header() {
    let (cfg, _) = RunConfig::load(&config("linear_policy.json")).unwrap();
    let mut buf = Vec::new();
    cmd_simulate(&cfg, Some(0), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("batch,"));
}

#[test]
fn empty_bench_writes_only_the_header() {
    let mut buf = Vec::new();
    let rows = cmd_bench(&[], &[4, 8], BenchSettings::default(), 1, &mut buf).unwrap();
    assert!(rows.is_empty());
    assert_eq!(String::from_utf8(buf).unwrap().trim_end(), "task,H,n,m,variant,wall_seconds,checksum");
}

#[test]
fn small_bench_pairs_agree() {
    let mut buf = Vec::new();
    let rows = cmd_bench(&BenchTask::ALL, &[3], BenchSettings { n: 2, m: 1, permutations: 2, repeats: 1 }, 5, &mut buf).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].checksum, rows[1].checksum);
    assert_eq!(rows[2].checksum, rows[3].checksum);
}

#[test]
fn perm_study_reports_every_dimension_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study.csv");
    run(&["perm-study", "--dims", "4,6", "--count", "10", "--methods", "bmt,tfww", "--replications", "3", "--seed", "9", "--out", p(&out)])
        .unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.lines().next().unwrap().starts_with("dim,method,cube,count,replications,discrepancy_mean"));
}

#[test]
fn invalid_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let bad = edited(dir.path(), "scalar_h2.json", |v| v["unexpected"] = 1.into());
    assert!(run(&["sv", "--config", p(&bad), "--out", p(&out)]).is_err());
    let no_seed = edited(dir.path(), "linear_policy.json", |v| {
        v.as_object_mut().unwrap().remove("seed");
    });
    assert!(run(&["simulate", "--config", p(&no_seed), "--out", p(&out)]).is_err());
    assert!(run(&["sv", "--config", p(&config("kinetic.json")), "--engine", "analytic", "--out", p(&out)]).is_err());
    assert!(run(&["--threads", "0", "bench", "--seed", "1", "--out", p(&out)]).is_err());
    assert!(!out.exists());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_pkgsv");
    assert!(Command::new(bin).arg("--help").output().unwrap().status.success());
    let failed = Command::new(bin).args(["sv", "--config", "/nonexistent.json", "--out", "/tmp/never.csv"]).output().unwrap();
    assert!(!failed.status.success());
    assert!(String::from_utf8_lossy(&failed.stderr).starts_with("error:"));
}
