use std::path::Path;
use std::process::{Command, Output};

fn drowsense(args: &[&str], out_root: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_drowsense"));
    cmd.args(args).env_remove("DROWSENSE_OUT").env("RUST_LOG", "warn");
    if let Some(root) = out_root {
        cmd.env("DROWSENSE_OUT", root);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL: &str = r#"
[train]
epochs = 1
short_hidden = 4
long_hidden = 4
fusion_hidden = 4
fusion_epochs = 5
"#;

#[test]
fn usage_errors_exit_nonzero() {
    for args in [&["frobnicate"][..], &["gen-data", "--bogus", "1", "--out", "x"], &[]] {
        let out = drowsense(args, None);
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"), "{args:?}");
    }
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[train]\nepochs = \"many\"\n").unwrap();
    let out = drowsense(&["--config", cfg.to_str().unwrap(), "bench", "--frames", "2"], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = drowsense(&["bench", "--frames", "2", "--arch", "7-LSTM"], None);
    assert!(!out.status.success());
}

#[test]
fn generate_train_detect_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap();

    // Relative outputs land under DROWSENSE_OUT.
    ok(&drowsense(&["gen-data", "--per-class", "2", "--seed", "7", "--out", "corpus"], Some(root)));
    let corpus = root.join("corpus");
    assert!(corpus.join("manifest.jsonl").exists() && corpus.join("manifest.sha256").exists());
    let wavs = std::fs::read_dir(&corpus)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "wav"))
        .count();
    assert_eq!(wavs, 8);

    let model = root.join("model.bin");
    ok(&drowsense(
        &["--config", cfg, "train", "--corpus", corpus.to_str().unwrap(), "--arch", "2-3-LSTM-DNN", "--out", model.to_str().unwrap(), "--report", "train.json"],
        Some(root),
    ));
    assert!(model.exists());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(root.join("train.json")).unwrap()).unwrap();
    assert_eq!(report["architecture"], "2-3-LSTM-DNN");

    let wav = corpus.join("00000_nodding.wav");
    let stream = ok(&drowsense(&["detect", "--model", model.to_str().unwrap(), "--wav", wav.to_str().unwrap()], None));
    let lines: Vec<serde_json::Value> = stream.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 40);
    for (i, d) in lines.iter().enumerate() {
        assert_eq!(d["frame_index"], i as u64);
        for key in ["timestamp", "R", "p_short", "p_long", "alert"] {
            assert!(d.get(key).is_some(), "missing {key}");
        }
    }

    let dump = root.join("nod.csv");
    ok(&drowsense(&["extract", "--wav", wav.to_str().unwrap(), "--out", dump.to_str().unwrap()], None));
    let replay = ok(&drowsense(&["detect", "--model", model.to_str().unwrap(), "--features", dump.to_str().unwrap()], None));
    let replayed: Vec<serde_json::Value> = replay.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(replayed.len(), 40);
    // The dump keeps shortest round-trip decimals, so replay matches the WAV path exactly.
    assert_eq!(replayed, lines);

    let table = ok(&drowsense(
        &["eval", "--model", model.to_str().unwrap(), "--corpus", corpus.to_str().unwrap(), "--out", "eval.json"],
        Some(root),
    ));
    assert!(table.contains("overall accuracy"));
    let eval: serde_json::Value = serde_json::from_slice(&std::fs::read(root.join("eval.json")).unwrap()).unwrap();
    assert_eq!(eval["samples"], 8);

    // A front end that differs from the model's is rejected.
    let out = drowsense(
        &["eval", "--model", model.to_str().unwrap(), "--corpus", corpus.to_str().unwrap(), "--frame-length", "0.2"],
        None,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("incompatible"));

    let bench = ok(&drowsense(&["bench", "--model", model.to_str().unwrap(), "--frames", "20"], None));
    assert!(bench.contains("within budget"), "{bench}");
}
