use std::path::Path;
use std::process::{Command, Output};

fn papc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_papc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    std::fs::write(
        &path,
        r#"{"n": 4, "m": 3, "K": 16, "delay_spread_s": 4e-7, "trials": 3, "cyclic_iters": 5}"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = papc(&[
            "simulate",
            "--config",
            &cfg,
            "--trials",
            "2",
            "--seed",
            "7",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["seed"], 7);
    assert_eq!(ma["config"]["trials"], 2);
    assert_eq!(ma["files"], mb["files"]);
    let files = ma["files"].as_array().unwrap();
    assert_eq!(files.len(), 4);
    for f in files {
        let name = f["name"].as_str().unwrap();
        let bytes = std::fs::read(a.join(name)).unwrap();
        assert_eq!(bytes, std::fs::read(b.join(name)).unwrap(), "{name}");
        assert_eq!(f["bytes"], bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
    let csv = std::fs::read_to_string(a.join("snr_cdf.csv")).unwrap();
    assert!(csv.starts_with("method,snr_db,cdf\r\n"));
    // 2 trials x 16 carriers per method.
    assert_eq!(csv.lines().count(), 1 + 5 * 32);
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"trials": 0}"#).unwrap();
    let o = papc(&[
        "simulate",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trials"));

    std::fs::write(&bad, r#"{"K": 16}"#).unwrap();
    let o = papc(&["single", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delay_spread_s"));

    let o = papc(&["simulate", "--methods", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));
    let o = papc(&["simulate", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    let o = papc(&[
        "single",
        "--config",
        tmp.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_reports_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let o = papc(&["single", "--config", &cfg, "--trial", "1", "--carrier-dump"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in [
        "cyclic_multicarrier",
        "total_power",
        "duality gap",
        "KKT residuals",
        "carrier",
    ] {
        assert!(text.contains(needle), "missing {needle}:\n{text}");
    }

    let one = tmp.path().join("one.json");
    std::fs::write(
        &one,
        r#"{"n": 3, "m": 1, "K": 1, "delay_spread_s": 0, "methods": ["cyclic_multicarrier"]}"#,
    )
    .unwrap();
    let o = papc(&["single", "--config", one.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("monotone = true"), "{text}");
    assert!(text.contains("MISO closed form"), "{text}");
}
