//! End-to-end checks of the command-line surface and its exit codes.

use std::path::Path;
use std::process::Command;

fn lmpnn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lmpnn"))
}

fn write_toy_dataset(dir: &Path) {
    // Two small molecules in plain extended-XYZ; distances span the
    // cutoff list so the fractions are strictly increasing.
    std::fs::write(
        dir.join("a.xyz"),
        "3\nenergy=-1.0\nH 0.0 0.0 0.0\nO 1.0 0.0 0.0\nH 1.6 0.9 0.0\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("b.xyz"),
        "2\nenergy=-0.5\nC 0.0 0.0 0.0\nO 4.5 0.0 0.0\n",
    )
    .unwrap();
}

#[test]
fn stats_reports_monotone_fractions() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy_dataset(tmp.path());
    let out = lmpnn()
        .args(["stats", "--mode", "plain", "--cutoffs", "4.0,5.0,10.0"])
        .arg("--data")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let f4 = stats["fraction_within"]["4.0"].as_f64().unwrap();
    let f5 = stats["fraction_within"]["5.0"].as_f64().unwrap();
    let f10 = stats["fraction_within"]["10.0"].as_f64().unwrap();
    assert!(f4 <= f5 && f5 <= f10);
    assert_eq!(stats["pair_count"].as_u64().unwrap(), 4);
}

#[test]
fn stats_uses_env_fallback_for_data_dir() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy_dataset(tmp.path());
    let out = lmpnn()
        .args(["stats", "--mode", "plain"])
        .env("LMPNN_DATA_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn missing_data_dir_is_usage_error() {
    let out = lmpnn()
        .args(["stats", "--mode", "plain"])
        .env_remove("LMPNN_DATA_DIR")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("LMPNN_DATA_DIR"), "stderr: {err}");
}

#[test]
fn unreadable_dataset_is_data_error() {
    let out = lmpnn()
        .args(["stats", "--mode", "plain", "--data", "/nonexistent_dataset_dir"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent_dataset_dir"), "stderr: {err}");
}

#[test]
fn gradcheck_passes_at_tolerance() {
    let out = lmpnn()
        .args(["gradcheck", "--seed", "1", "--atoms", "3", "--hidden", "8"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "gradcheck failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_param_rel_error"].as_f64().unwrap() < 1e-4);
    assert!(report["max_force_rel_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn train_with_missing_config_names_the_path() {
    let out = lmpnn()
        .args(["train", "--config", "missing.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing.json"), "stderr: {err}");
}

#[test]
fn every_subcommand_supports_help() {
    for sub in [
        "stats",
        "featurize",
        "train",
        "eval",
        "gamma-report",
        "gradcheck",
        "describe",
    ] {
        let out = lmpnn().args([sub, "--help"]).output().unwrap();
        assert!(
            out.status.success(),
            "{sub} --help exited {:?}",
            out.status.code()
        );
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("Usage"), "{sub} help missing usage section");
    }
}

#[test]
fn describe_lists_gate_registry() {
    let out = lmpnn().args(["describe"]).output().unwrap();
    assert!(out.status.success());
    let census: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(census["gamma_registry"]["single"].as_array().unwrap().len(), 6);
    assert_eq!(census["gamma_registry"]["output"].as_array().unwrap().len(), 7);
    assert!(census["total"].as_u64().unwrap() > 0);
}

#[test]
fn featurize_writes_json_records() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy_dataset(tmp.path());
    let out_dir = tempfile::tempdir().unwrap();
    let out = lmpnn()
        .args(["featurize", "--mode", "plain"])
        .arg("--data")
        .arg(tmp.path())
        .arg("--out")
        .arg(out_dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.path().join("a.json")).unwrap())
            .unwrap();
    assert_eq!(record["num_nodes"].as_u64().unwrap(), 3);
    // Canonical molecule record rides along with the features.
    assert_eq!(record["molecule"]["atomic_numbers"][1].as_u64().unwrap(), 8);
    assert!(record["molecule"]["targets"]["energy"].is_number());
    assert_eq!(
        record["radial"].as_array().unwrap().len(),
        record["edges"].as_array().unwrap().len()
    );
    // Each radial row is the 12-wide expansion.
    assert_eq!(record["radial"][0].as_array().unwrap().len(), 12);
}

#[test]
fn featurize_binary_layout_parses_back() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy_dataset(tmp.path());
    let out_dir = tempfile::tempdir().unwrap();
    let out = lmpnn()
        .args(["featurize", "--mode", "plain", "--format", "binary"])
        .arg("--data")
        .arg(tmp.path())
        .arg("--out")
        .arg(out_dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let bytes = std::fs::read(out_dir.path().join("features.bin")).unwrap();
    assert_eq!(&bytes[0..4], b"LMPF");
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    assert_eq!(version, 1);
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    assert_eq!(count, 2);

    // Walk the first record: id, then ten length-prefixed f64 arrays.
    let mut cursor = 16usize;
    let id_len = u64::from_le_bytes(bytes[cursor..cursor + 8].try_into().unwrap()) as usize;
    cursor += 8;
    let id = std::str::from_utf8(&bytes[cursor..cursor + id_len]).unwrap();
    assert_eq!(id, "a");
    cursor += id_len;
    let mut lens = Vec::new();
    for _ in 0..10 {
        let n = u64::from_le_bytes(bytes[cursor..cursor + 8].try_into().unwrap()) as usize;
        cursor += 8 + n * 8;
        lens.push(n);
    }
    assert_eq!(lens[0], 3, "node_z length");
    assert_eq!(lens[1], 9, "positions length");
    assert_eq!(lens[9] % 12, 0, "angular rows are 12-wide");
}

#[test]
fn train_eval_and_gamma_report_round_trip() {
    let data_dir = tempfile::tempdir().unwrap();
    // Eight H2O-like molecules with varying bond length and a fabricated
    // energy target so training has signal.
    for i in 0..8 {
        let d = 0.9 + 0.02 * i as f64;
        let energy = -75.0 - 0.1 * d;
        std::fs::write(
            data_dir.path().join(format!("m{i}.xyz")),
            format!(
                "3\nenergy={energy}\nO 0.0 0.0 0.0\nH {d} 0.0 0.0\nH -0.3 {d} 0.0\n"
            ),
        )
        .unwrap();
    }
    let out_dir = tempfile::tempdir().unwrap();
    let config_path = out_dir.path().join("config.json");
    let config = serde_json::json!({
        "data": { "dir": data_dir.path(), "mode": "plain" },
        "model": { "hidden_width": 8, "elements": [1, 6, 8] },
        "train": {
            "target": "energy",
            "batch_size": 4,
            "min_epochs": 2,
            "max_epochs": 2,
            "patience": 50,
            "split": { "kind": "fractions", "train": 0.75, "valid": 0.25, "test": 0.0 },
            "gamma_log_interval": 1,
            "gamma_log_until": 2
        }
    });
    std::fs::write(&config_path, serde_json::to_vec_pretty(&config).unwrap()).unwrap();

    let run_dir = out_dir.path().join("run");
    let out = lmpnn()
        .args(["train", "--single-threaded"])
        .arg("--config")
        .arg(&config_path)
        .arg("--out")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "train failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["epochs_run"].as_u64().unwrap(), 2);
    assert!(run_dir.join("final.ckpt").exists());

    let out = lmpnn()
        .args(["eval", "--mode", "plain"])
        .arg("--checkpoint")
        .arg(run_dir.join("final.ckpt"))
        .arg("--data")
        .arg(data_dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "eval failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["native_unit"].as_str().unwrap(), "kcal/mol");
    assert_eq!(report["count"].as_u64().unwrap(), 8);

    let svg_path = out_dir.path().join("gamma.svg");
    let out = lmpnn()
        .args(["gamma-report"])
        .arg("--log")
        .arg(run_dir.join("train_log.jsonl"))
        .arg("--out")
        .arg(&svg_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("gamma_ratio"));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));
}
