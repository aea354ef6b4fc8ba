use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use mg_cli::config::{self, Kind};
use mg_cli::{run_in_pool, run_to_dir};
use serde_json::Value;

const SMALL_OFFLOAD: &str = r#"
kind = "offload"
seed = 7

[offload]
users = 31
task_cycles = 10e6
sbs_capacity = 10e9
device_capacity = 0.5e9
memories = [1, 2, 3]
rounds = 600
runs = 3
"#;

fn mg(args: &[&str], env: &[(&str, &str)], stdin: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mg"));
    cmd.args(args).env_remove("MG_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    let mut child = cmd.spawn().expect("spawn mg");
    if let Some(text) = stdin {
        child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    }
    drop(child.stdin.take());
    child.wait_with_output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn minimal_offload_config_gets_defaults() {
    let cfg = config::parse(
        "kind = \"offload\"\nseed = 3\n[offload]\nusers = 31\ntask_cycles = 10e6\nsbs_capacity = 10e9\ndevice_capacity = 0.5e9\n",
    )
    .unwrap();
    assert_eq!(cfg.kind, Kind::Offload);
    let off = cfg.offload_config().unwrap();
    assert_eq!(off.memories, (1..=10).collect::<Vec<_>>());
    assert_eq!(
        (off.strategies_per_agent, off.rounds, off.runs, off.burn_in),
        (2, 10_000, 32, 100)
    );
    assert_eq!(off.cutoff().unwrap(), 20.0);
    assert_eq!(off.seed, 3);
}

#[test]
fn even_population_at_half_cutoff_is_rejected() {
    let with_cutoff = "kind = \"basic\"\nseed = 1\n[basic]\nagents = 30\nmemory = 3\ncutoff = 15.0\n";
    let err = config::parse(with_cutoff).unwrap_err().to_string();
    assert!(err.contains("N must be odd") && err.contains("basic.agents"), "{err}");
    let implicit = "kind = \"basic\"\nseed = 1\n[basic]\nagents = 30\nmemory = 3\n";
    let err = config::parse(implicit).unwrap_err().to_string();
    assert!(err.contains("N must be odd"), "{err}");
}

#[test]
fn unknown_keys_are_named() {
    let top = "kind = \"basic\"\nseed = 1\nfoo = 2\n[basic]\nagents = 31\nmemory = 3\n";
    assert!(config::parse(top).unwrap_err().to_string().contains("`foo`"));
    let nested = "kind = \"basic\"\nseed = 1\n[basic]\nagents = 31\nmemory = 3\nfoo = 2\n";
    assert!(config::parse(nested).unwrap_err().to_string().contains("`foo`"));
}

#[test]
fn tables_must_match_kind() {
    let wrong = "kind = \"basic\"\nseed = 1\n[simplex]\nagents = 31\nchoices = 3\nmemory = 2\nlearning_rate = 0.1\n";
    let err = config::parse(wrong).unwrap_err().to_string();
    assert!(err.contains("[simplex]"), "{err}");
    let missing = "kind = \"phase-scan\"\nseed = 1\n";
    assert!(config::parse(missing).unwrap_err().to_string().contains("[phase_scan]"));
}

#[test]
fn constraint_errors_name_the_key() {
    let cases = [
        ("kind = \"basic\"\nseed = 1\n[basic]\nagents = 31\nmemory = 0\n", "basic.memory"),
        ("kind = \"basic\"\nseed = 1\n[basic]\nagents = 31\nmemory = 3\nrounds = 50\n", "basic.burn_in"),
        ("kind = \"offload\"\nseed = 1\n[offload]\nusers = 31\ntask_cycles = -1.0\nsbs_capacity = 1e9\ndevice_capacity = 1e8\n", "offload.task_cycles"),
        ("kind = \"emg\"\nseed = 1\n[emg]\nagents = 31\nmemory = 3\ncommon_strategy = \"01x0\"\n", "emg.common_strategy"),
        ("kind = \"equilibrium-report\"\nseed = 1\n[equilibrium]\nagents = 4\n", "equilibrium.agents"),
    ];
    for (text, key) in cases {
        let err = config::parse(text).unwrap_err().to_string();
        assert!(err.contains(key), "expected {key} in {err}");
    }
}

#[test]
fn equilibrium_report_for_five_agents() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eq");
    let text = "kind = \"equilibrium-report\"\nseed = 11\n[equilibrium]\nagents = 5\n";
    let status = mg(&["run", "-", "--out", out.to_str().unwrap()], &[], Some(text));
    assert!(status.status.success(), "{}", stderr(&status));
    let report = read_json(&out.join("equilibrium.json"));
    assert_eq!(report["pure_nash"]["count"], 20);
    assert_eq!(report["pure_nash"]["enumerated"], 20);
    assert_eq!(report["pure_nash"]["cross_checked"], true);
    assert_eq!(report["symmetric_mixed"]["verified"], true);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["files"][0]["name"], "equilibrium.json");
}

#[test]
fn offload_outputs_follow_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config::parse(SMALL_OFFLOAD).unwrap();
    let (out, manifest) = run_to_dir(&cfg, Some(&dir.path().join("off"))).unwrap();
    let header = |name: &str| {
        fs::read_to_string(out.join(name))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(header("fig1_attendance.csv"), "round,m1,m2,m3");
    assert_eq!(
        header("fig2_volatility.csv"),
        "m,alpha,sigma_over_N_mean,stderr,random_baseline"
    );
    assert_eq!(header("fig3_utility.csv"), "round,mg,random,optimal");
    assert_eq!(
        header("fig4_utility.csv"),
        "m,alpha,mg_mean,mg_stderr,random_mean,random_stderr,optimal"
    );
    assert_eq!(
        header("fig5_below_threshold.csv"),
        "round,mg,all_offload,all_local,optimal"
    );
    assert_eq!(header("fig5_random_baseline.csv"), "round,random");

    for name in ["fig1_attendance.csv", "fig3_utility.csv", "fig5_below_threshold.csv"] {
        assert_eq!(
            fs::read_to_string(out.join(name)).unwrap().lines().count(),
            601,
            "{name}"
        );
    }
    let fig5 = fs::read_to_string(out.join("fig5_below_threshold.csv")).unwrap();
    for line in fig5.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(&cols[2..], ["0", "0", "19"]);
    }

    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["cutoff"], 20.0);
    assert_eq!(summary["threshold_latency_ms"], 20.0);
    assert_eq!(summary["all_offload_latency_ms"], 31.0);
    assert_eq!(summary["phases"].as_array().unwrap().len(), 3);
    assert_eq!(summary["extensions"][0], "fig5-random-baseline");

    // 3 brain sizes x 3 runs, plus 3 random-choice runs.
    assert_eq!(manifest.seeds.len(), 12);
    let on_disk = read_json(&out.join("manifest.json"));
    for record in on_disk["files"].as_array().unwrap() {
        let bytes = fs::read(out.join(record["name"].as_str().unwrap())).unwrap();
        let digest = mg_cli::output::OutputFile {
            name: String::new(),
            bytes,
        }
        .sha256();
        assert_eq!(record["sha256"], digest.as_str());
    }
    assert!(on_disk["config"].get("threads").is_none());
}

#[test]
fn repeated_runs_have_identical_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("offload.toml");
    fs::write(&cfg_path, SMALL_OFFLOAD).unwrap();
    for name in ["a", "b"] {
        let out = mg(
            &[
                "run",
                cfg_path.to_str().unwrap(),
                "--out",
                dir.path().join(name).to_str().unwrap(),
            ],
            &[],
            None,
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(
        fs::read(dir.path().join("a/manifest.json")).unwrap(),
        fs::read(dir.path().join("b/manifest.json")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        ("offload", SMALL_OFFLOAD.to_string()),
        (
            "scan",
            "kind = \"phase-scan\"\nseed = 5\n[phase_scan]\nagents = 31\nmemories = [1, 2, 3, 4]\nruns = 4\nrounds = 600\n".into(),
        ),
    ];
    for (label, text) in configs {
        let cfg_path = dir.path().join(format!("{label}.toml"));
        fs::write(&cfg_path, text).unwrap();
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let out_dir = dir.path().join(format!("{label}-{threads}"));
            let out = mg(
                &["run", cfg_path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
                &[("MG_THREADS", threads)],
                None,
            );
            assert!(out.status.success(), "{}", stderr(&out));
            outputs.push(dir_contents(&out_dir));
        }
        assert_eq!(outputs[0], outputs[1], "{label}");
    }
}

#[test]
fn in_process_pools_agree_for_every_kind() {
    let configs = [
        "kind = \"basic\"\nseed = 2\n[basic]\nagents = 31\nmemory = 3\nrounds = 500\n",
        "kind = \"gcmg\"\nseed = 2\n[gcmg]\nagents = 31\nmemory = 3\nrounds = 500\nthreshold = 0.0\n",
        "kind = \"emg\"\nseed = 2\n[emg]\nagents = 51\nmemory = 3\nrounds = 500\nthreshold = 3.0\nsnapshot_interval = 250\n",
        "kind = \"simplex\"\nseed = 2\n[simplex]\nagents = 31\nchoices = 3\nmemory = 2\nlearning_rate = 0.1\nrounds = 500\n",
    ];
    for text in configs {
        let cfg = config::parse(text).unwrap();
        let (a, ma) = run_in_pool(&cfg, Some(1)).unwrap();
        let (b, mb) = run_in_pool(&cfg, Some(4)).unwrap();
        let bytes = |o: &mg_cli::RunOutput| o.files.iter().map(|f| f.bytes.clone()).collect::<Vec<_>>();
        assert_eq!(bytes(&a), bytes(&b));
        assert_eq!(serde_json::to_vec(&ma).unwrap(), serde_json::to_vec(&mb).unwrap());
        assert_eq!(ma.files.len(), a.files.len());
    }
}

#[test]
fn failed_write_leaves_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // A directory where summary.json should go makes the second write fail.
    fs::create_dir_all(out.join("summary.json")).unwrap();
    let cfg = config::parse("kind = \"basic\"\nseed = 2\n[basic]\nagents = 31\nmemory = 3\nrounds = 300\n").unwrap();
    assert!(run_to_dir(&cfg, Some(&out)).is_err());
    let left: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec![std::ffi::OsString::from("summary.json")]);
}

#[test]
fn invalid_config_exits_nonzero_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let text = "kind = \"basic\"\nseed = 1\n[basic]\nagents = 30\nmemory = 3\ncutoff = 15.0\n";
    let result = mg(&["run", "-", "--out", out.to_str().unwrap()], &[], Some(text));
    assert!(!result.status.success());
    assert!(stderr(&result).contains("N must be odd"));
    assert!(!out.exists());

    let bad_threads = mg(
        &["run", "-", "--out", out.to_str().unwrap()],
        &[("MG_THREADS", "zero")],
        Some("kind = \"equilibrium-report\"\nseed = 1\n[equilibrium]\nagents = 3\n"),
    );
    assert!(!bad_threads.status.success());
    assert!(stderr(&bad_threads).contains("MG_THREADS"));
    assert!(!out.exists());
}

#[test]
fn validate_and_version() {
    let ok = mg(&["validate", "-"], &[], Some(SMALL_OFFLOAD));
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("fig5_below_threshold.csv"));
    let version = mg(&["--version"], &[], None);
    assert_eq!(
        String::from_utf8_lossy(&version.stdout).trim(),
        format!("mg {}", env!("CARGO_PKG_VERSION"))
    );
}
