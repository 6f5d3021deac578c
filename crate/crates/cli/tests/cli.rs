//! End-to-end tests of the `liqd` binary: each test drives real subcommand
//! invocations over temporary directories.

use std::path::Path;
use std::process::{Command, Output};

use liqd_core::io::read_mask;
use serde_json::Value;
use tempfile::TempDir;

const LIQD_VARS: &[&str] = &[
    "LIQD_CONFIG",
    "LIQD_SEED",
    "LIQD_JOBS",
    "LIQD_ALPHA",
    "LIQD_BETA",
    "LIQD_THRESHOLD",
    "LIQD_SE_SIZE",
    "LIQD_BLOCK_SIZE",
    "LIQD_BLOCK_FILL_RATIO",
    "LIQD_NOISE_FLOOR",
    "LIQD_STRIDE",
    "LIQD_OUT",
    "LIQD_DUMP_INTERMEDIATES",
    "LIQD_MODEL",
];

fn liqd() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_liqd"));
    for var in LIQD_VARS {
        cmd.env_remove(var);
    }
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawning liqd");
    assert!(
        output.status.success(),
        "liqd failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    output
}

fn stdout_text(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

fn ndjson_rows(text: &str) -> Vec<Value> {
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| serde_json::from_str(line).expect("valid NDJSON line"))
        .collect()
}

fn make_corpus(dir: &Path, count: u32, frames: u32, seed: u32) {
    run_ok(
        liqd()
            .arg("synth")
            .arg("--out")
            .arg(dir)
            .args(["--count", &count.to_string()])
            .args(["--frames", &frames.to_string()])
            .args(["--seed", &seed.to_string()]),
    );
}

#[test]
fn synth_writes_a_loadable_corpus() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    let output = run_ok(
        liqd()
            .arg("synth")
            .arg("--out")
            .arg(&corpus)
            .args(["--count", "3", "--frames", "4", "--seed", "0"]),
    );
    let rows = ndjson_rows(&stdout_text(&output));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["id"], "seq-0000");
    assert_eq!(rows[1]["kind"], "Rising");

    let seqs = liqd_core::corpus::load_corpus(&corpus).unwrap();
    assert_eq!(seqs.len(), 3);
    assert!(seqs.iter().all(|s| s.truth.is_some()));
    assert!(seqs.iter().all(|s| s.frames.len() == 4));
}

#[test]
fn classify_outputs_are_byte_identical_across_jobs() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    make_corpus(&corpus, 6, 5, 0);

    let run = |jobs: &str| {
        let mut cmd = liqd();
        cmd.arg("classify")
            .arg("--corpus")
            .arg(&corpus)
            .args(["--jobs", jobs]);
        run_ok(&mut cmd).stdout
    };
    let sweep = |jobs: &str| {
        let mut cmd = liqd();
        cmd.arg("sweep")
            .arg("--corpus")
            .arg(&corpus)
            .args(["--jobs", jobs, "--thresholds", "20,50"]);
        run_ok(&mut cmd).stdout
    };

    assert_eq!(run("1"), run("4"));
    assert_eq!(sweep("1"), sweep("4"));
    assert!(!run("1").is_empty());
}

#[test]
fn sweep_accuracy_matches_evaluate_at_the_same_threshold() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    make_corpus(&corpus, 5, 4, 0);

    let sweep_out = run_ok(
        liqd()
            .arg("sweep")
            .arg("--corpus")
            .arg(&corpus)
            .args(["--thresholds", "35"]),
    );
    let csv = stdout_text(&sweep_out);
    let data_row = csv.lines().nth(1).expect("one data row");
    let fields: Vec<&str> = data_row.split(',').collect();
    assert_eq!(fields[0], "35");
    let sweep_accuracy: f64 = fields[1].parse().unwrap();

    let eval_out = run_ok(
        liqd()
            .arg("evaluate")
            .arg("--corpus")
            .arg(&corpus)
            .args(["--threshold", "35"]),
    );
    let report: Value = serde_json::from_str(&stdout_text(&eval_out)).unwrap();
    let eval_accuracy = report["metrics"]["accuracy"].as_f64().unwrap();

    assert_eq!(sweep_accuracy, eval_accuracy);
    assert_eq!(report["settings"]["threshold"], 35);
}

#[test]
fn flags_override_environment_which_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    make_corpus(&corpus, 5, 4, 0);
    let config = tmp.path().join("liqd.toml");
    std::fs::write(&config, "threshold = 30\n").unwrap();

    let threshold_of = |cmd: &mut Command| {
        let report: Value = serde_json::from_str(&stdout_text(&run_ok(cmd))).unwrap();
        report["settings"]["threshold"].as_i64().unwrap()
    };

    let mut file_only = liqd();
    file_only
        .arg("evaluate")
        .arg("--corpus")
        .arg(&corpus)
        .arg("--config")
        .arg(&config);
    assert_eq!(threshold_of(&mut file_only), 30);

    let mut env_over_file = liqd();
    env_over_file
        .arg("evaluate")
        .arg("--corpus")
        .arg(&corpus)
        .arg("--config")
        .arg(&config)
        .env("LIQD_THRESHOLD", "40");
    assert_eq!(threshold_of(&mut env_over_file), 40);

    let mut flag_over_env = liqd();
    flag_over_env
        .arg("evaluate")
        .arg("--corpus")
        .arg(&corpus)
        .arg("--config")
        .arg(&config)
        .env("LIQD_THRESHOLD", "40")
        .args(["--threshold", "50"]);
    assert_eq!(threshold_of(&mut flag_over_env), 50);

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "bogus = 1\n").unwrap();
    let output = liqd()
        .arg("evaluate")
        .arg("--corpus")
        .arg(&corpus)
        .arg("--config")
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("bogus"));
}

#[test]
fn train_writes_a_model_that_classify_loads() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    make_corpus(&corpus, 5, 4, 0);
    let model = tmp.path().join("model.liqd");

    let train_out = run_ok(
        liqd()
            .arg("train")
            .arg("--corpus")
            .arg(&corpus)
            .arg("--model-out")
            .arg(&model)
            .args(["--epochs", "20", "--learn-rate", "0.3", "--seed", "3"]),
    );
    let losses = ndjson_rows(&stdout_text(&train_out));
    assert_eq!(losses.len(), 21);
    let first = losses[0]["loss"].as_f64().unwrap();
    let last = losses[20]["loss"].as_f64().unwrap();
    assert!(last < first, "loss did not drop: {first} -> {last}");
    assert!(model.is_file());

    let by_flag = run_ok(
        liqd()
            .arg("classify")
            .arg("--corpus")
            .arg(&corpus)
            .arg("--model")
            .arg(&model),
    );
    let rows = ndjson_rows(&stdout_text(&by_flag));
    assert_eq!(rows.len(), 15);
    for row in &rows {
        let confidence = row["confidence"].as_f64().unwrap();
        assert!(confidence > 0.0 && confidence <= 1.0);
    }

    let by_env = run_ok(
        liqd()
            .arg("classify")
            .arg("--corpus")
            .arg(&corpus)
            .env("LIQD_MODEL", &model),
    );
    assert_eq!(by_flag.stdout, by_env.stdout);
}

#[test]
fn corrupt_then_compensate_restores_overlap() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    make_corpus(&corpus, 1, 4, 0);
    let clean_path = corpus.join("seq-0000/masks/0000.png");
    let damaged_dir = tmp.path().join("damaged");
    let repaired_dir = tmp.path().join("repaired");

    run_ok(
        liqd()
            .arg("corrupt")
            .arg("--masks")
            .arg(&clean_path)
            .arg("--out")
            .arg(&damaged_dir)
            .args(["--holes", "4", "--hole-radius", "2", "--breaks", "1", "--seed", "9"]),
    );
    run_ok(
        liqd()
            .arg("compensate")
            .arg("--masks")
            .arg(damaged_dir.join("0000.png"))
            .arg("--out")
            .arg(&repaired_dir),
    );

    let clean = read_mask(&clean_path).unwrap();
    let damaged = read_mask(damaged_dir.join("0000.png")).unwrap();
    let repaired = read_mask(repaired_dir.join("0000.png")).unwrap();

    assert!(damaged.count_foreground() < clean.count_foreground());
    let damaged_iou = damaged.iou(&clean).unwrap();
    let repaired_iou = repaired.iou(&clean).unwrap();
    assert!(
        repaired_iou > damaged_iou,
        "repair did not improve overlap: {damaged_iou} -> {repaired_iou}"
    );
    let kept = repaired.intersection(&damaged).unwrap();
    assert_eq!(kept.count_foreground(), damaged.count_foreground());
}

#[test]
fn diff_reports_a_band_for_a_rising_pair() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    make_corpus(&corpus, 1, 4, 1);
    let seq = corpus.join("seq-0001");

    let output = run_ok(
        liqd()
            .arg("diff")
            .arg(seq.join("frames/0000.png"))
            .arg(seq.join("frames/0003.png"))
            .arg("--mask")
            .arg(seq.join("masks/0000.png")),
    );
    let rows = ndjson_rows(&stdout_text(&output));
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row["pair_id"], "0000:0003");
    assert!(row["white_count"].as_u64().unwrap() > 0);
    let top = row["band"]["top_row"].as_u64().unwrap();
    let bottom = row["band"]["bottom_row"].as_u64().unwrap();
    assert!(top <= bottom);
    assert!(row["band"]["sign_balance"].as_f64().unwrap() < 0.0);
}

#[test]
fn score_masks_fits_scores_and_filter_splits() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    make_corpus(&corpus, 1, 4, 0);
    let masks_dir = corpus.join("seq-0000/masks");
    let clean_path = masks_dir.join("0000.png");
    let candidates = tmp.path().join("candidates");
    let reference = tmp.path().join("reference");

    run_ok(
        liqd()
            .arg("corrupt")
            .arg("--masks")
            .arg(&masks_dir)
            .arg("--out")
            .arg(&candidates)
            .args(["--holes", "6", "--hole-radius", "3", "--breaks", "2", "--seed", "77"]),
    );
    std::fs::create_dir_all(&reference).unwrap();
    for name in ["c0.png", "c1.png"] {
        std::fs::copy(&clean_path, candidates.join(name)).unwrap();
    }
    for name in ["0000.png", "0001.png", "0002.png", "0003.png", "c0.png", "c1.png"] {
        std::fs::copy(&clean_path, reference.join(name)).unwrap();
    }

    let scorer = tmp.path().join("scorer.json");
    let scores_out = run_ok(
        liqd()
            .arg("score-masks")
            .arg("--masks")
            .arg(&candidates)
            .arg("--consensus")
            .arg(&clean_path)
            .arg("--fit-from")
            .arg(&reference)
            .arg("--scorer-out")
            .arg(&scorer)
            .args(["--tau", "0.9"]),
    );
    assert!(scorer.is_file());
    let rows = ndjson_rows(&stdout_text(&scores_out));
    assert_eq!(rows.len(), 6);
    let score_of = |id: &str| {
        rows.iter()
            .find(|r| r["id"] == id)
            .unwrap()["score"]
            .as_f64()
            .unwrap()
    };
    let clean_low = score_of("c0").min(score_of("c1"));
    let damaged_high = ["0000", "0001", "0002", "0003"]
        .iter()
        .map(|id| score_of(id))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        clean_low > damaged_high,
        "clean masks should outscore damaged ones: {clean_low} vs {damaged_high}"
    );

    let scores_path = tmp.path().join("scores.ndjson");
    std::fs::write(&scores_path, stdout_text(&scores_out)).unwrap();
    let tau = (clean_low + damaged_high) / 2.0;
    let filtered = tmp.path().join("filtered");
    let filter_out = run_ok(
        liqd()
            .arg("filter")
            .arg("--scores")
            .arg(&scores_path)
            .args(["--tau", &tau.to_string()])
            .arg("--out")
            .arg(&filtered),
    );
    let decisions = ndjson_rows(&stdout_text(&filter_out));
    let accepted: Vec<&str> = decisions
        .iter()
        .filter(|r| r["accepted"].as_bool().unwrap())
        .map(|r| r["id"].as_str().unwrap())
        .collect();
    assert_eq!(accepted, ["c0", "c1"]);
    assert!(filtered.join("accepted/c0.png").is_file());
    assert!(filtered.join("rejected/0000.png").is_file());
}

#[test]
fn pipeline_writes_records_report_and_intermediates() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("corpus");
    make_corpus(&corpus, 5, 4, 0);
    let out = tmp.path().join("out");

    let output = run_ok(
        liqd()
            .arg("pipeline")
            .arg("--corpus")
            .arg(&corpus)
            .arg("--out")
            .arg(&out)
            .arg("--dump-intermediates"),
    );
    let stdout = stdout_text(&output);
    let rows = ndjson_rows(&stdout);
    assert_eq!(rows.len(), 15);

    let records = std::fs::read_to_string(out.join("records.ndjson")).unwrap();
    assert_eq!(records, stdout);

    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("evaluation.json")).unwrap())
            .unwrap();
    assert_eq!(report["evaluated_pairs"], 15);
    assert!(report["metrics"]["accuracy"].as_f64().unwrap() >= 0.9);

    for stage in ["mask", "gray"] {
        for frame in 0..4 {
            assert!(out.join(format!("seq-0000/{stage}/{frame:04}.png")).is_file());
        }
    }
    for stage in ["diff", "blocks"] {
        for pair in 0..3 {
            assert!(out.join(format!("seq-0003/{stage}/{pair:04}.png")).is_file());
        }
    }
}
