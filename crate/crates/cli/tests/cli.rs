use std::path::Path;
use std::process::{Command, Output};

fn barbench(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_barbench"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("BARBENCH_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value = serde_json::from_str(barbench::config::bundled("mm1").unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join("config.json");
    std::fs::write(&path, v.to_string()).unwrap();
    path.display().to_string()
}

#[test]
fn validate_bundled_mm1() {
    let o = barbench(&["validate", "--config", "mm1"], None);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[ok] open"), "{text}");
    assert!(text.contains("network valid"));
}

#[test]
fn validate_rejects_closed_network() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| {
        v["network"]["stations"] = 2.into();
        v["network"]["arrivals"] = serde_json::json!([{ "family": "exponential", "rate": 1.0 }, null]);
        v["network"]["services"] = serde_json::json!([
            { "family": "exponential", "rate": 1.0 },
            { "family": "exponential", "rate": 1.0 }
        ]);
        v["network"]["routing"] = serde_json::json!([[0.0, 1.0], [1.0, 0.0]]);
        v["b"] = serde_json::json!([1.0, 1.0]);
    });
    let o = barbench(&["validate", "--config", &cfg], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8(o.stdout).unwrap().contains("[FAIL] open"));
}

#[test]
fn unknown_subcommand_and_missing_config() {
    assert_eq!(code(&barbench(&["frobnicate"], None)), 2);
    assert_eq!(code(&barbench(&["simulate", "--config", "/nonexistent/x.json"], None)), 2);
}

#[test]
fn converge_with_empty_n_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| v["sweep"]["n_list"] = serde_json::json!([]));
    let out = dir.path().join("out").display().to_string();
    let o = barbench(&["converge", "--config", &cfg, "--out", &out], None);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bar_check_assert_on_mm1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let o = barbench(&["bar-check", "--config", "mm1", "--out", &out, "--assert"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["prelimit.csv", "residuals.csv", "resolved_config.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn failed_threshold_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| v["thresholds"]["z"] = 0.0.into());
    let out = dir.path().join("out").display().to_string();
    let o = barbench(&["bar-check", "--config", &cfg, "--out", &out, "--assert"], None);
    assert_eq!(code(&o), 4);
    // without --assert the same run succeeds
    let o = barbench(&["bar-check", "--config", &cfg, "--out", &out], None);
    assert_eq!(code(&o), 0);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |v| {
        v["sim"]["horizon"] = 20000.0.into();
        v["sweep"]["horizon"] = 20000.0.into();
        v["srbm"]["horizon"] = 500.0.into();
        v["srbm"]["burn_in"] = 50.0.into();
    });
    let runs: Vec<_> = [("a", "1"), ("b", "4")]
        .into_iter()
        .map(|(name, threads)| {
            let out = dir.path().join(name);
            for sub in ["simulate", "exponents", "bar-check", "srbm", "converge"] {
                let o = barbench(&[sub, "--config", &cfg, "--out", &out.display().to_string(), "--seed", "11"], Some(threads));
                assert_eq!(code(&o), 0, "{sub}: {}", String::from_utf8_lossy(&o.stderr));
            }
            out
        })
        .collect();
    let mut names: Vec<_> = std::fs::read_dir(&runs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 11, "{names:?}");
    for name in names {
        let a = std::fs::read(runs[0].join(&name)).unwrap();
        let b = std::fs::read(runs[1].join(&name)).unwrap();
        if !name.to_string_lossy().ends_with(".csv") {
            // resolved configs differ only in the output directory
            let strip = |bytes: &[u8]| {
                let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
                v["out"] = serde_json::Value::Null;
                v
            };
            assert_eq!(strip(&a), strip(&b));
            continue;
        }
        assert!(a == b, "{name:?} differs");
        {
            let text = String::from_utf8(a).unwrap();
            let first = text.lines().next().unwrap();
            assert!(first.starts_with("# barbench ") && first.contains(" config=") && first.ends_with(" seed=11"), "{first}");
        }
    }
}
