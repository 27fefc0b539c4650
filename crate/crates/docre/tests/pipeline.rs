//! End-to-end command pipeline: every subcommand is driven through the
//! same argv entry point the binary uses, against a small generated
//! corpus on disk.

use std::path::Path;

use docre::cli::run;
use docre::corpus::{save_corpus, save_parses};
use docre::synthetic::bridge_corpora;
use docre::train::{CHECKPOINT_FINAL, CONFIG_FILE, LOG_FILE, RELATION_VOCAB_FILE, TOKEN_VOCAB_FILE};

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["docre"];
    argv.extend_from_slice(args);
    run(argv)
}

/// Writes a small corpus and its parses, returning their paths.
fn corpus_on_disk(dir: &Path, n: usize) -> (String, String) {
    let (bundle, _) = bridge_corpora(17, n, 0);
    let corpus = dir.join("corpus.json");
    let parses = dir.join("parses.json");
    save_corpus(&bundle.corpus, &corpus).unwrap();
    save_parses(&bundle.parses, &parses).unwrap();
    (
        corpus.to_string_lossy().into_owned(),
        parses.to_string_lossy().into_owned(),
    )
}

fn tiny_train(corpus: &str, parses: &str, out: &str, extra: &[&str]) -> i32 {
    let mut args = vec![
        "train",
        "--corpus",
        corpus,
        "--parses",
        parses,
        "--out",
        out,
        "--epochs",
        "2",
        "--batch-size",
        "2",
        "--hidden",
        "16",
        "--ff-width",
        "32",
        "--max-len",
        "96",
        "--seed",
        "7",
    ];
    args.extend_from_slice(extra);
    cli(&args)
}

#[test]
fn train_infer_evaluate_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, parses) = corpus_on_disk(tmp.path(), 4);
    let run_dir = tmp.path().join("run");
    let run_str = run_dir.to_string_lossy().into_owned();

    assert_eq!(tiny_train(&corpus, &parses, &run_str, &[]), 0);
    for file in [CONFIG_FILE, TOKEN_VOCAB_FILE, RELATION_VOCAB_FILE, LOG_FILE, CHECKPOINT_FINAL] {
        assert!(run_dir.join(file).exists(), "missing {file} in run dir");
    }

    let preds = tmp.path().join("preds.jsonl");
    let code = cli(&[
        "infer",
        "--corpus",
        &corpus,
        "--parses",
        &parses,
        "--run",
        &run_str,
        "--out",
        &preds.to_string_lossy(),
    ]);
    assert_eq!(code, 0);
    assert!(preds.exists());

    let metrics = tmp.path().join("metrics.json");
    let code = cli(&[
        "evaluate",
        "--corpus",
        &corpus,
        "--preds",
        &preds.to_string_lossy(),
        "--out",
        &metrics.to_string_lossy(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    for key in ["F1", "Ign_F1", "Intra_F1", "Inter_F1", "P", "R"] {
        assert!(report.get(key).is_some(), "metrics report lacks {key}");
    }
}

#[test]
fn flags_override_config_file_in_the_run_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, parses) = corpus_on_disk(tmp.path(), 2);
    let cfg_path = tmp.path().join("cfg.toml");
    std::fs::write(&cfg_path, "epochs = 9\n\n[model.encoder]\nhidden = 16\nff_width = 32\nmax_len = 96\n").unwrap();

    let run_dir = tmp.path().join("run");
    let code = cli(&[
        "train",
        "--config",
        &cfg_path.to_string_lossy(),
        "--corpus",
        &corpus,
        "--parses",
        &parses,
        "--out",
        &run_dir.to_string_lossy(),
        "--epochs",
        "1",
        "--batch-size",
        "2",
        "--seed",
        "3",
    ]);
    assert_eq!(code, 0);

    let echo: toml::Value =
        toml::from_str(&std::fs::read_to_string(run_dir.join(CONFIG_FILE)).unwrap()).unwrap();
    assert_eq!(echo["epochs"].as_integer(), Some(1), "flag must beat the file");
    assert_eq!(
        echo["model"]["encoder"]["hidden"].as_integer(),
        Some(16),
        "file must beat the default"
    );
}

#[test]
fn fusion_modes_and_their_guard_rails() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, parses) = corpus_on_disk(tmp.path(), 3);
    let run_dir = tmp.path().join("run");
    let run_str = run_dir.to_string_lossy().into_owned();
    assert_eq!(tiny_train(&corpus, &parses, &run_str, &["--beta", "0"]), 0);

    let plain = tmp.path().join("plain.jsonl");
    assert_eq!(
        cli(&[
            "infer", "--corpus", &corpus, "--parses", &parses, "--run", &run_str, "--out",
            &plain.to_string_lossy(),
        ]),
        0
    );

    // mode none with tau 0 must reproduce plain inference byte for byte
    let fused = tmp.path().join("fused-none.jsonl");
    assert_eq!(
        cli(&[
            "fuse", "--corpus", &corpus, "--parses", &parses, "--run", &run_str, "--mode", "none",
            "--tau", "0", "--out", &fused.to_string_lossy(),
        ]),
        0
    );
    assert_eq!(
        std::fs::read(&plain).unwrap(),
        std::fs::read(&fused).unwrap(),
        "fusion with no pseudo pass and tau 0 must match plain inference"
    );

    let isf = tmp.path().join("fused-isf.jsonl");
    assert_eq!(
        cli(&[
            "fuse", "--corpus", &corpus, "--parses", &parses, "--run", &run_str, "--tau", "0.2",
            "--out", &isf.to_string_lossy(),
        ]),
        0
    );
    assert!(isf.exists());

    // iscf without a companion run is a configuration error
    let bad = tmp.path().join("bad.jsonl");
    assert_eq!(
        cli(&[
            "fuse", "--corpus", &corpus, "--parses", &parses, "--run", &run_str, "--mode", "iscf",
            "--tau", "0", "--out", &bad.to_string_lossy(),
        ]),
        1
    );

    // iscf with a companion run trained at beta 0 works
    let iscf = tmp.path().join("fused-iscf.jsonl");
    assert_eq!(
        cli(&[
            "fuse", "--corpus", &corpus, "--parses", &parses, "--run", &run_str, "--mode", "iscf",
            "--secondary-run", &run_str, "--tau", "0.1", "--out", &iscf.to_string_lossy(),
        ]),
        0
    );
}

#[test]
fn missing_inputs_are_configuration_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, parses) = corpus_on_disk(tmp.path(), 2);
    let out = tmp.path().join("run").to_string_lossy().into_owned();
    assert_eq!(tiny_train("/no/such/corpus.json", &parses, &out, &[]), 1);
    assert_eq!(tiny_train(&corpus, "/no/such/parses.json", &out, &[]), 1);
    assert_eq!(tiny_train(&corpus, &parses, &out, &["--epochs", "0"]), 1);
}

#[test]
fn sweep_writes_one_run_per_grid_point() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, parses) = corpus_on_disk(tmp.path(), 2);
    let out = tmp.path().join("sweep");
    let code = cli(&[
        "sweep",
        "--corpus",
        &corpus,
        "--parses",
        &parses,
        "--axis",
        "gcn-layers",
        "--out",
        &out.to_string_lossy(),
        "--epochs",
        "1",
        "--batch-size",
        "2",
        "--hidden",
        "16",
        "--ff-width",
        "32",
        "--max-len",
        "96",
        "--seed",
        "5",
    ]);
    assert_eq!(code, 0);
    let table = std::fs::read_to_string(out.join("sweep.tsv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 6, "header plus five grid points");
    assert!(lines[0].starts_with("gcn_layers\t"));
    for k in 0..=4 {
        assert!(out.join(format!("k{k}")).join(CHECKPOINT_FINAL).exists());
    }
}

#[test]
fn gradcheck_smoke() {
    assert_eq!(cli(&["gradcheck", "--seeds", "1", "--coords", "4"]), 0);
}
