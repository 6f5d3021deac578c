//! Implementations of the `liqd` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use liqd_core::classify::{train, LevelState, MlpModel, TrainOptions};
use liqd_core::corpus::{load_corpus, write_corpus, LoadedSequence};
use liqd_core::diff::{change_band, frame_diff, BandSummary};
use liqd_core::engine::{
    fit_scorer, mask_features, LinearScorer, QualityFeatures, SaliencyMap,
};
use liqd_core::image::{to_grayscale, ColorMode, RasterImage};
use liqd_core::io::{read_image, read_mask, write_image, write_mask};
use liqd_core::morphology::{apply_mask, close, fill_holes, StructuringElement};
use liqd_core::pipeline::{
    evaluate, run_pipeline_on, sweep_threshold, Classifier, Evaluation, PairRecord,
    SequenceOutput,
};
use liqd_core::synth::{corrupt_mask, standard_case};
use serde::{Deserialize, Serialize};

use crate::dump::dump_corpus;
use crate::output::{ndjson_lines, print_lines, print_text, sweep_csv, write_lines, write_text};
use crate::settings::Settings;

/// Collects mask inputs: a single file, or every image in a directory in
/// name order.
fn mask_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = fs::read_dir(path).with_context(|| format!("reading {}", path.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png" | "pgm" | "ppm" | "pnm")
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no image files found in {}", path.display());
    }
    Ok(files)
}

fn file_name(path: &Path) -> Result<String> {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| anyhow::anyhow!("{} has no file name", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn ensure_gray(image: RasterImage, settings: &Settings) -> Result<RasterImage> {
    if image.mode() == ColorMode::Gray {
        Ok(image)
    } else {
        Ok(to_grayscale(&image, settings.pipeline.gray)?)
    }
}

fn load_classifier(settings: &Settings, flag: &Option<PathBuf>) -> Result<Classifier> {
    match settings.model_path(flag) {
        Some(path) => {
            let model = MlpModel::load(&path)
                .with_context(|| format!("loading model {}", path.display()))?;
            Ok(Classifier::Mlp(model))
        }
        None => Ok(Classifier::Heuristic),
    }
}

fn load_labeled_corpus(path: &Path) -> Result<Vec<LoadedSequence>> {
    load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

fn record_lines(outputs: &[SequenceOutput]) -> Result<Vec<String>> {
    let records: Vec<&PairRecord> = outputs.iter().flat_map(|o| o.records.iter()).collect();
    ndjson_lines(&records)
}

// ---------------------------------------------------------------------------
// synth

/// Arguments for `liqd synth`.
#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of sequences to render, seeded upward from --seed.
    #[arg(long, default_value_t = 10, value_name = "N")]
    pub count: u64,
    /// Frames per sequence.
    #[arg(long, default_value_t = 8, value_name = "N")]
    pub frames: usize,
}

#[derive(Serialize)]
struct SynthRow<'a> {
    id: &'a str,
    seed: u64,
    kind: LevelState,
    frames: usize,
}

pub fn synth(settings: &Settings, args: &SynthArgs) -> Result<()> {
    let out = settings.out_dir()?;
    let start = settings.values.seed;
    let end = start
        .checked_add(args.count)
        .ok_or_else(|| anyhow::anyhow!("seed range overflows"))?;
    let ids = write_corpus(out, start..end, args.frames, settings.values.jobs)?;
    let rows: Vec<SynthRow> = (start..end)
        .zip(&ids)
        .map(|(seed, id)| {
            let (_, scenario) = standard_case(seed, args.frames);
            SynthRow {
                id,
                seed,
                kind: scenario.kind,
                frames: args.frames,
            }
        })
        .collect();
    print_lines(&ndjson_lines(&rows)?)
}

// ---------------------------------------------------------------------------
// corrupt / compensate

/// Arguments for `liqd corrupt`.
#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Mask file, or a directory of masks.
    #[arg(long, value_name = "PATH")]
    pub masks: PathBuf,
    /// Disk-shaped holes punched into the foreground.
    #[arg(long, default_value_t = 2, value_name = "N")]
    pub holes: usize,
    /// Radius of each hole in pixels.
    #[arg(long, default_value_t = 2, value_name = "R")]
    pub hole_radius: u32,
    /// Radius-1 notches cut into the boundary.
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub breaks: usize,
}

#[derive(Serialize)]
struct MaskRow {
    input: String,
    output: String,
    foreground_before: usize,
    foreground_after: usize,
}

pub fn corrupt(settings: &Settings, args: &CorruptArgs) -> Result<()> {
    let out = settings.out_dir()?;
    let inputs = mask_inputs(&args.masks)?;
    let mut rows = Vec::with_capacity(inputs.len());
    for (index, input) in inputs.iter().enumerate() {
        let mask = read_mask(input)?;
        let seed = settings.values.seed.wrapping_add(index as u64);
        let damaged = corrupt_mask(&mask, args.holes, args.hole_radius, args.breaks, seed);
        let dest = out.join(file_name(input)?);
        write_mask(&dest, &damaged)?;
        rows.push(MaskRow {
            input: input.display().to_string(),
            output: dest.display().to_string(),
            foreground_before: mask.count_foreground(),
            foreground_after: damaged.count_foreground(),
        });
    }
    print_lines(&ndjson_lines(&rows)?)
}

/// Arguments for `liqd compensate`.
#[derive(Debug, Args)]
pub struct CompensateArgs {
    /// Mask file, or a directory of masks.
    #[arg(long, value_name = "PATH")]
    pub masks: PathBuf,
}

pub fn compensate(settings: &Settings, args: &CompensateArgs) -> Result<()> {
    let out = settings.out_dir()?;
    let se = StructuringElement::ellipse(settings.values.se_size)?;
    let inputs = mask_inputs(&args.masks)?;
    let mut rows = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let mask = read_mask(input)?;
        let closed = close(&mask, &se);
        let repaired = fill_holes(&closed);
        let name = file_name(input)?;
        let dest = out.join(&name);
        write_mask(&dest, &repaired)?;
        if settings.dump_intermediates {
            write_mask(out.join("closed").join(&name), &closed)?;
        }
        rows.push(MaskRow {
            input: input.display().to_string(),
            output: dest.display().to_string(),
            foreground_before: mask.count_foreground(),
            foreground_after: repaired.count_foreground(),
        });
    }
    print_lines(&ndjson_lines(&rows)?)
}

// ---------------------------------------------------------------------------
// diff

/// Arguments for `liqd diff`.
#[derive(Debug, Args)]
pub struct DiffArgs {
    /// Earlier frame.
    #[arg(value_name = "FRAME_A")]
    pub frame_a: PathBuf,
    /// Later frame.
    #[arg(value_name = "FRAME_B")]
    pub frame_b: PathBuf,
    /// Mask applied to both frames before differencing; used as given.
    #[arg(long, value_name = "PATH")]
    pub mask: Option<PathBuf>,
}

#[derive(Serialize)]
struct DiffRow {
    pair_id: String,
    white_count: usize,
    band: BandSummary,
}

pub fn diff(settings: &Settings, args: &DiffArgs) -> Result<()> {
    let mut a = read_image(&args.frame_a)?;
    let mut b = read_image(&args.frame_b)?;
    if let Some(path) = &args.mask {
        let mask = read_mask(path)?;
        a = apply_mask(&a, &mask)?;
        b = apply_mask(&b, &mask)?;
    }
    let gray_a = ensure_gray(a, settings)?;
    let gray_b = ensure_gray(b, settings)?;
    let result = frame_diff(&gray_a, &gray_b, &settings.pipeline.diff)?;
    let band = change_band(&result, &settings.pipeline.diff);
    let row = DiffRow {
        pair_id: format!("{}:{}", stem(&args.frame_a), stem(&args.frame_b)),
        white_count: result.white_count,
        band,
    };
    if settings.dump_intermediates {
        let out = settings.out_dir()?;
        write_image(out.join("gray_a.png"), &gray_a)?;
        write_image(out.join("gray_b.png"), &gray_b)?;
        write_mask(out.join("pos.png"), &result.pos_plane)?;
        write_mask(out.join("neg.png"), &result.neg_plane)?;
        write_mask(out.join("abs.png"), &result.abs_plane)?;
        write_mask(out.join("blocks.png"), &result.block_map)?;
    }
    print_lines(&ndjson_lines(&[row])?)
}

// ---------------------------------------------------------------------------
// train

/// Arguments for `liqd train`.
#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled corpus to train on.
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Where to write the model; defaults to <out>/model.liqd.
    #[arg(long, value_name = "PATH")]
    pub model_out: Option<PathBuf>,
    /// Gradient step size.
    #[arg(long, default_value_t = 0.05, value_name = "R")]
    pub learn_rate: f64,
    /// Passes over the training set.
    #[arg(long, default_value_t = 100, value_name = "N")]
    pub epochs: usize,
    /// Examples per gradient step.
    #[arg(long, default_value_t = 32, value_name = "N")]
    pub batch_size: usize,
    /// Also write the extracted features as NDJSON.
    #[arg(long, value_name = "PATH")]
    pub export_features: Option<PathBuf>,
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
}

#[derive(Serialize)]
struct FeatureRow<'a> {
    pair_id: &'a str,
    label: LevelState,
    features: &'a [f64],
}

pub fn train_cmd(settings: &Settings, args: &TrainArgs) -> Result<()> {
    let model_path = match (&args.model_out, &settings.out) {
        (Some(path), _) => path.clone(),
        (None, Some(dir)) => dir.join("model.liqd"),
        (None, None) => bail!("pass --model-out PATH or --out DIR for the trained model"),
    };
    let seqs = load_labeled_corpus(&args.corpus)?;
    let dataset = liqd_core::pipeline::build_training_set(&seqs, &settings.pipeline)?;
    if let Some(path) = &args.export_features {
        let rows: Vec<FeatureRow> = dataset
            .iter()
            .map(|(features, label, pair_id)| FeatureRow {
                pair_id,
                label: *label,
                features: features.as_slice(),
            })
            .collect();
        write_lines(path, &ndjson_lines(&rows)?)?;
    }
    let data: Vec<_> = dataset
        .into_iter()
        .map(|(features, label, _)| (features, label))
        .collect();
    let options = TrainOptions {
        learn_rate: args.learn_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: settings.values.seed,
    };
    let outcome = train(&data, &options)?;
    outcome
        .model
        .save(&model_path)
        .with_context(|| format!("writing model {}", model_path.display()))?;
    let rows: Vec<LossRow> = outcome
        .loss_trace
        .iter()
        .enumerate()
        .map(|(epoch, &loss)| LossRow { epoch, loss })
        .collect();
    print_lines(&ndjson_lines(&rows)?)?;
    eprintln!(
        "trained on {} pairs; model written to {}",
        data.len(),
        model_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// classify / pipeline

/// Arguments for `liqd classify`.
#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Corpus to label.
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Trained model; without one the rule-based classifier runs.
    #[arg(long, env = "LIQD_MODEL", value_name = "PATH")]
    pub model: Option<PathBuf>,
}

pub fn classify(settings: &Settings, args: &ClassifyArgs) -> Result<()> {
    let seqs = load_labeled_corpus(&args.corpus)?;
    let classifier = load_classifier(settings, &args.model)?;
    let outputs = run_pipeline_on(&seqs, &settings.pipeline, &classifier)?;
    let lines = record_lines(&outputs)?;
    print_lines(&lines)?;
    if let Some(out) = &settings.out {
        write_lines(&out.join("records.ndjson"), &lines)?;
    }
    if settings.dump_intermediates {
        dump_corpus(settings.out_dir()?, &seqs, &settings.pipeline)?;
    }
    Ok(())
}

/// Arguments for `liqd pipeline`.
#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Corpus to process.
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Trained model; without one the rule-based classifier runs.
    #[arg(long, env = "LIQD_MODEL", value_name = "PATH")]
    pub model: Option<PathBuf>,
}

pub fn pipeline(settings: &Settings, args: &PipelineArgs) -> Result<()> {
    let seqs = load_labeled_corpus(&args.corpus)?;
    let classifier = load_classifier(settings, &args.model)?;
    let has_truth = seqs.iter().any(|s| s.truth.is_some());
    let (outputs, evaluation) = if has_truth {
        let evaluation = evaluate(&seqs, &settings.pipeline, &classifier)?;
        (evaluation.outputs.clone(), Some(evaluation))
    } else {
        (
            run_pipeline_on(&seqs, &settings.pipeline, &classifier)?,
            None,
        )
    };
    let lines = record_lines(&outputs)?;
    print_lines(&lines)?;
    if let Some(out) = &settings.out {
        write_lines(&out.join("records.ndjson"), &lines)?;
        if let Some(evaluation) = &evaluation {
            let report = evaluation_json(settings, evaluation);
            write_text(
                &out.join("evaluation.json"),
                &serde_json::to_string_pretty(&report)?,
            )?;
        }
    }
    if let Some(evaluation) = &evaluation {
        eprintln!(
            "accuracy {:.4} macro-F1 {:.4} over {} labeled pairs",
            evaluation.report.accuracy, evaluation.report.f1, evaluation.evaluated_pairs
        );
    }
    if settings.dump_intermediates {
        dump_corpus(settings.out_dir()?, &seqs, &settings.pipeline)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// score-masks / filter

/// Arguments for `liqd score-masks`.
#[derive(Debug, Args)]
pub struct ScoreMasksArgs {
    /// Candidate mask file or directory.
    #[arg(long, value_name = "PATH")]
    pub masks: PathBuf,
    /// Consensus saliency image, or a directory matched by file name.
    #[arg(long, value_name = "PATH")]
    pub consensus: PathBuf,
    /// Fitted scorer to apply.
    #[arg(long, value_name = "PATH", conflicts_with = "fit_from")]
    pub scorer: Option<PathBuf>,
    /// Reference masks (matched by file name); fits a scorer on the overlap
    /// each candidate achieves against its reference.
    #[arg(long, value_name = "DIR")]
    pub fit_from: Option<PathBuf>,
    /// Acceptance threshold stored with a fitted scorer.
    #[arg(long, default_value_t = 0.7, value_name = "TAU")]
    pub tau: f64,
    /// Where to write a fitted scorer; defaults to <out>/scorer.json.
    #[arg(long, value_name = "PATH")]
    pub scorer_out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    id: String,
    path: PathBuf,
    score: f64,
    features: QualityFeatures,
}

fn load_consensus(path: &Path, input: &Path, settings: &Settings) -> Result<SaliencyMap> {
    let source = if path.is_dir() {
        path.join(file_name(input)?)
    } else {
        path.to_path_buf()
    };
    let image = read_image(&source)
        .with_context(|| format!("reading consensus {}", source.display()))?;
    let gray = ensure_gray(image, settings)?;
    Ok(SaliencyMap::from_raster(&gray)?)
}

pub fn score_masks(settings: &Settings, args: &ScoreMasksArgs) -> Result<()> {
    let inputs = mask_inputs(&args.masks)?;
    let mut candidates = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let mask = read_mask(input)?;
        let consensus = load_consensus(&args.consensus, input, settings)?;
        let features = mask_features(&mask, &consensus)?;
        candidates.push((input.clone(), mask, features));
    }

    let scorer = if let Some(reference_dir) = &args.fit_from {
        let mut seed_set = Vec::with_capacity(candidates.len());
        for (input, mask, features) in &candidates {
            let reference_path = reference_dir.join(file_name(input)?);
            let reference = read_mask(&reference_path)
                .with_context(|| format!("reading reference {}", reference_path.display()))?;
            seed_set.push((*features, mask.iou(&reference)?));
        }
        let scorer = fit_scorer(&seed_set, args.tau)?;
        let scorer_path = args
            .scorer_out
            .clone()
            .or_else(|| settings.out.as_ref().map(|d| d.join("scorer.json")));
        if let Some(path) = scorer_path {
            scorer
                .save(&path)
                .with_context(|| format!("writing scorer {}", path.display()))?;
            eprintln!("scorer written to {}", path.display());
        }
        scorer
    } else if let Some(path) = &args.scorer {
        LinearScorer::load(path).with_context(|| format!("loading scorer {}", path.display()))?
    } else {
        bail!("pass --scorer PATH to apply a scorer, or --fit-from DIR to fit one");
    };

    let rows: Vec<ScoreRow> = candidates
        .into_iter()
        .map(|(input, _, features)| ScoreRow {
            id: stem(&input),
            path: input,
            score: scorer.score(&features),
            features,
        })
        .collect();
    print_lines(&ndjson_lines(&rows)?)
}

/// Arguments for `liqd filter`.
#[derive(Debug, Args)]
pub struct FilterArgs {
    /// NDJSON scores produced by score-masks.
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    /// Masks scoring at or above this are accepted.
    #[arg(long, default_value_t = 0.7, value_name = "TAU")]
    pub tau: f64,
}

#[derive(Serialize)]
struct FilterRow<'a> {
    id: &'a str,
    score: f64,
    accepted: bool,
}

pub fn filter(settings: &Settings, args: &FilterArgs) -> Result<()> {
    let text = fs::read_to_string(&args.scores)
        .with_context(|| format!("reading scores {}", args.scores.display()))?;
    let rows: Vec<ScoreRow> = text
        .lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| serde_json::from_str(line).context("parsing score record"))
        .collect::<Result<_>>()?;

    let out_rows: Vec<FilterRow> = rows
        .iter()
        .map(|row| FilterRow {
            id: &row.id,
            score: row.score,
            accepted: row.score >= args.tau,
        })
        .collect();

    if let Some(out) = &settings.out {
        for row in &rows {
            let bucket = if row.score >= args.tau {
                "accepted"
            } else {
                "rejected"
            };
            let dir = out.join(bucket);
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let dest = dir.join(file_name(&row.path)?);
            fs::copy(&row.path, &dest).with_context(|| {
                format!("copying {} to {}", row.path.display(), dest.display())
            })?;
        }
    }
    print_lines(&ndjson_lines(&out_rows)?)
}

// ---------------------------------------------------------------------------
// sweep / evaluate

/// Arguments for `liqd sweep`.
#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Labeled corpus to sweep.
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Trained model; without one the rule-based classifier runs.
    #[arg(long, env = "LIQD_MODEL", value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Comma-separated thresholds to evaluate.
    #[arg(
        long,
        default_value = "20,25,30,35,40,45,50,55,60",
        value_name = "LIST"
    )]
    pub thresholds: String,
}

fn parse_thresholds(list: &str) -> Result<Vec<u8>> {
    let values: Vec<u8> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().with_context(|| format!("invalid threshold {s:?}")))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        bail!("no thresholds given");
    }
    Ok(values)
}

pub fn sweep(settings: &Settings, args: &SweepArgs) -> Result<()> {
    let thresholds = parse_thresholds(&args.thresholds)?;
    let seqs = load_labeled_corpus(&args.corpus)?;
    let classifier = load_classifier(settings, &args.model)?;
    let rows = sweep_threshold(&seqs, &settings.pipeline, &classifier, &thresholds)?;
    let csv = sweep_csv(&rows);
    print_text(&csv)?;
    if let Some(out) = &settings.out {
        write_text(&out.join("sweep.csv"), &csv)?;
    }
    Ok(())
}

/// Arguments for `liqd evaluate`.
#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Labeled corpus to score.
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Trained model; without one the rule-based classifier runs.
    #[arg(long, env = "LIQD_MODEL", value_name = "PATH")]
    pub model: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvaluationJson {
    evaluated_pairs: usize,
    metrics: liqd_core::engine::MetricsReport,
    labels: Vec<String>,
    /// Counts indexed `[truth][predicted]` in label order.
    confusion: Vec<Vec<usize>>,
    settings: crate::settings::ResolvedValues,
}

fn evaluation_json(settings: &Settings, evaluation: &Evaluation) -> EvaluationJson {
    let labels: Vec<String> = LevelState::ALL.iter().map(|s| s.to_string()).collect();
    let confusion = LevelState::ALL
        .iter()
        .map(|&truth| {
            LevelState::ALL
                .iter()
                .map(|&pred| evaluation.confusion.count(truth, pred))
                .collect()
        })
        .collect();
    EvaluationJson {
        evaluated_pairs: evaluation.evaluated_pairs,
        metrics: evaluation.report,
        labels,
        confusion,
        settings: settings.values.clone(),
    }
}

pub fn evaluate_cmd(settings: &Settings, args: &EvaluateArgs) -> Result<()> {
    let seqs = load_labeled_corpus(&args.corpus)?;
    let classifier = load_classifier(settings, &args.model)?;
    let evaluation = evaluate(&seqs, &settings.pipeline, &classifier)?;
    let report = evaluation_json(settings, &evaluation);
    let json = serde_json::to_string_pretty(&report)?;
    print_text(&json)?;
    print_text("\n")?;
    if let Some(out) = &settings.out {
        write_text(&out.join("evaluation.json"), &json)?;
        write_lines(&out.join("records.ndjson"), &record_lines(&evaluation.outputs)?)?;
    }
    Ok(())
}
