//! End-to-end sequence processing: mask compensation, masked grayscale
//! conversion, adjacent-frame differencing, per-pair level-state labels, and
//! corpus-level evaluation.
//!
//! Processing splits into a prepare stage (masks, grayscale, fill estimates —
//! independent of the difference threshold) and a classify stage, so
//! threshold sweeps pay the expensive stage once.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{
    extract_features, heuristic_classify, FeatureVector, LevelState, MlpModel,
};
use crate::corpus::{load_corpus, LoadedSequence};
use crate::diff::{change_band, frame_diff, BandSummary, DiffParams, DiffResult};
use crate::engine::{classification_metrics, confusion_matrix, regression_errors};
use crate::engine::{ConfusionMatrix, MetricsReport};
use crate::error::{Error, Result};
use crate::image::{to_grayscale, ColorMode, GrayParams, RasterImage};
use crate::mask::BinaryMask;
use crate::morphology::{apply_mask, compensate, erode, StructuringElement};
use crate::par::run_jobs;

/// Settings for the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub gray: GrayParams,
    pub diff: DiffParams,
    /// Elliptical structuring-element size for mask compensation (odd).
    pub se_size: u32,
    /// White-pixel count at or below which a pair counts as static.
    pub noise_floor: usize,
    /// Frame step between the two frames of a pair.
    pub stride: usize,
    /// Job count for batch stages; 0 means one per CPU.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            gray: GrayParams::default(),
            diff: DiffParams::default(),
            se_size: 5,
            noise_floor: 64,
            stride: 1,
            jobs: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        StructuringElement::ellipse(self.se_size)?;
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Labeling backend for prepared pairs.
#[derive(Debug, Clone)]
pub enum Classifier {
    /// Rule-based labels with confidence fixed at 1.
    Heuristic,
    /// Trained network; confidence is the winning class probability.
    Mlp(MlpModel),
}

impl Classifier {
    fn classify(
        &self,
        diff: &DiffResult,
        container: &BinaryMask,
        prev_fill: f64,
        config: &PipelineConfig,
    ) -> Result<(LevelState, f64)> {
        match self {
            Classifier::Heuristic => {
                heuristic_classify(diff, container, prev_fill, config.noise_floor, &config.diff)
                    .map(|state| (state, 1.0))
            }
            Classifier::Mlp(model) => {
                let features = extract_features(diff, container, prev_fill, &config.diff)?;
                model.predict(&features)
            }
        }
    }
}

/// One classified frame pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    /// `<sequence id>:<pair index>`.
    pub pair_id: String,
    pub label: LevelState,
    pub confidence: f64,
    pub white_count: usize,
    pub band: BandSummary,
}

/// All records of one sequence, in pair order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceOutput {
    pub id: String,
    pub records: Vec<PairRecord>,
}

/// Frame index pairs `(i·stride, (i+1)·stride)` fitting into `frames`.
pub fn pair_indices(frames: usize, stride: usize) -> Vec<(usize, usize)> {
    if stride == 0 || frames < 2 {
        return Vec::new();
    }
    let count = (frames - 1) / stride;
    (0..count).map(|i| (i * stride, (i + 1) * stride)).collect()
}

#[derive(Debug, Clone)]
struct PreparedPair {
    a: usize,
    b: usize,
    mask: BinaryMask,
    prev_fill: f64,
    truth_label: Option<LevelState>,
    truth_mid_level: Option<f64>,
}

/// A sequence after the threshold-independent stage: masked grayscale frames
/// plus per-pair container masks, fill estimates, and truth.
#[derive(Debug, Clone)]
pub struct PreparedSequence {
    id: String,
    gray: Vec<RasterImage>,
    pairs: Vec<PreparedPair>,
}

impl PreparedSequence {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn frame_pixels(&self) -> usize {
        self.gray
            .first()
            .map(|f| f.pixel_count())
            .unwrap_or(0)
    }
}

/// Estimates the fill fraction from intensities inside the container.
///
/// Samples the masked grayscale frame on the container mask eroded by a
/// 9-wide ellipse (dropping walls and the mask rim), takes the 3rd and 97th
/// intensity percentiles, and returns the fraction of samples below their
/// midpoint — the darker liquid phase. Returns `None` when fewer than 64
/// pixels survive erosion or the percentile spread stays under 25 gray
/// levels, which means one phase fills the view or contrast is too poor.
pub fn estimate_fill(gray: &RasterImage, container: &BinaryMask) -> Result<Option<f64>> {
    if gray.mode() != ColorMode::Gray {
        return Err(Error::ChannelMismatch {
            expected: 1,
            got: gray.mode().channels() as u8,
        });
    }
    if gray.width() != container.width() || gray.height() != container.height() {
        return Err(Error::dims(
            (gray.width(), gray.height()),
            (container.width(), container.height()),
        ));
    }
    let interior = erode(container, &StructuringElement::ellipse(9)?);
    let mut values: Vec<u8> = interior
        .iter_foreground()
        .map(|(x, y)| gray.gray_at(x, y))
        .collect();
    if values.len() < 64 {
        return Ok(None);
    }
    values.sort_unstable();
    let percentile = |q: f64| values[(q * (values.len() - 1) as f64).round() as usize];
    let (p_low, p_high) = (percentile(0.03), percentile(0.97));
    if p_high - p_low < 25 {
        return Ok(None);
    }
    let midpoint = (p_low as f64 + p_high as f64) / 2.0;
    let below = values.iter().filter(|&&v| (v as f64) < midpoint).count();
    Ok(Some(below as f64 / values.len() as f64))
}

/// Runs the threshold-independent stage on one sequence.
pub fn prepare_sequence(seq: &LoadedSequence, config: &PipelineConfig) -> Result<PreparedSequence> {
    config.validate()?;
    seq.validate()?;
    let se = StructuringElement::ellipse(config.se_size)?;

    let mut compensated = Vec::with_capacity(seq.frames.len());
    let mut gray = Vec::with_capacity(seq.frames.len());
    for (frame, mask) in seq.frames.iter().zip(&seq.masks) {
        let comp = compensate(mask, &se);
        let masked = apply_mask(frame, &comp)?;
        let g = match masked.mode() {
            ColorMode::Rgb => to_grayscale(&masked, config.gray)?,
            ColorMode::Gray => masked,
        };
        compensated.push(comp);
        gray.push(g);
    }

    let mut pairs = Vec::new();
    for (a, b) in pair_indices(seq.frames.len(), config.stride) {
        let intersection = compensated[a].intersection(&compensated[b])?;
        let mask = if intersection.count_foreground() > 0 {
            intersection
        } else {
            compensated[a].union(&compensated[b])?
        };
        let prev_fill = estimate_fill(&gray[a], &mask)?.unwrap_or(0.5);
        let (truth_label, truth_mid_level) = match &seq.truth {
            Some(truth) => (
                Some(truth.labels[a]),
                Some((truth.levels[a] + truth.levels[b]) / 2.0),
            ),
            None => (None, None),
        };
        pairs.push(PreparedPair {
            a,
            b,
            mask,
            prev_fill,
            truth_label,
            truth_mid_level,
        });
    }

    Ok(PreparedSequence {
        id: seq.id.clone(),
        gray,
        pairs,
    })
}

/// Runs the prepare stage over a corpus, fanned out across jobs.
pub fn prepare_all(seqs: &[LoadedSequence], config: &PipelineConfig) -> Result<Vec<PreparedSequence>> {
    if seqs.is_empty() {
        return Err(Error::Empty { what: "sequence corpus" });
    }
    run_jobs(config.jobs, seqs.iter().collect(), |seq| {
        prepare_sequence(seq, config)
    })
    .into_iter()
    .collect()
}

fn classify_pair(
    prep: &PreparedSequence,
    pair: &PreparedPair,
    index: usize,
    config: &PipelineConfig,
    classifier: &Classifier,
) -> Result<PairRecord> {
    let diff = frame_diff(&prep.gray[pair.a], &prep.gray[pair.b], &config.diff)?;
    let band = change_band(&diff, &config.diff);
    let (label, confidence) = classifier.classify(&diff, &pair.mask, pair.prev_fill, config)?;
    Ok(PairRecord {
        pair_id: format!("{}:{index}", prep.id),
        label,
        confidence,
        white_count: diff.white_count,
        band,
    })
}

/// Classifies every pair of a prepared sequence.
pub fn classify_sequence(
    prep: &PreparedSequence,
    config: &PipelineConfig,
    classifier: &Classifier,
) -> Result<SequenceOutput> {
    let records = prep
        .pairs
        .iter()
        .enumerate()
        .map(|(index, pair)| classify_pair(prep, pair, index, config, classifier))
        .collect::<Result<Vec<_>>>()?;
    Ok(SequenceOutput {
        id: prep.id.clone(),
        records,
    })
}

fn classify_all(
    prepared: &[PreparedSequence],
    config: &PipelineConfig,
    classifier: &Classifier,
) -> Result<Vec<SequenceOutput>> {
    run_jobs(config.jobs, prepared.iter().collect(), |prep| {
        classify_sequence(prep, config, classifier)
    })
    .into_iter()
    .collect()
}

/// Processes in-memory sequences end to end.
pub fn run_pipeline_on(
    seqs: &[LoadedSequence],
    config: &PipelineConfig,
    classifier: &Classifier,
) -> Result<Vec<SequenceOutput>> {
    let prepared = prepare_all(seqs, config)?;
    classify_all(&prepared, config, classifier)
}

/// Loads a corpus root and processes it end to end.
pub fn run_pipeline(
    root: &Path,
    config: &PipelineConfig,
    classifier: &Classifier,
) -> Result<Vec<SequenceOutput>> {
    let seqs = load_corpus(root)?;
    run_pipeline_on(&seqs, config, classifier)
}

/// Evaluation of a corpus with ground truth.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub outputs: Vec<SequenceOutput>,
    pub report: MetricsReport,
    pub confusion: ConfusionMatrix,
    /// Pairs that carried a truth label.
    pub evaluated_pairs: usize,
}

fn collect_scores(
    prepared: &[PreparedSequence],
    outputs: &[SequenceOutput],
) -> Result<(MetricsReport, ConfusionMatrix, usize)> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    let mut level_pred = Vec::new();
    let mut level_truth = Vec::new();

    for (prep, output) in prepared.iter().zip(outputs) {
        for (pair, record) in prep.pairs.iter().zip(&output.records) {
            let Some(truth_label) = pair.truth_label else {
                continue;
            };
            pred.push(record.label);
            truth.push(truth_label);
            if matches!(truth_label, LevelState::Rising | LevelState::Falling) {
                if let (Some(centroid), Some(mid)) =
                    (record.band.centroid_row, pair.truth_mid_level)
                {
                    level_pred.push(centroid);
                    level_truth.push(mid);
                }
            }
        }
    }
    if truth.is_empty() {
        return Err(Error::Empty { what: "ground truth labels" });
    }

    let scores = classification_metrics(&pred, &truth)?;
    let confusion = confusion_matrix(&pred, &truth)?;
    let (mae, mse) = if level_truth.is_empty() {
        (0.0, 0.0)
    } else {
        regression_errors(&level_pred, &level_truth)?
    };
    let report = MetricsReport {
        accuracy: scores.accuracy,
        precision: scores.precision,
        recall: scores.recall,
        f1: scores.f1,
        mae,
        mse,
    };
    Ok((report, confusion, truth.len()))
}

/// Processes labeled sequences and scores predictions against truth.
///
/// Classification metrics cover every pair with a truth label. Level error
/// (MAE/MSE, in rows) covers pairs whose truth is `Rising` or `Falling` and
/// whose difference contains at least one white pixel: the change centroid
/// row is compared against the midpoint of the pair's two true level rows.
pub fn evaluate(
    seqs: &[LoadedSequence],
    config: &PipelineConfig,
    classifier: &Classifier,
) -> Result<Evaluation> {
    let prepared = prepare_all(seqs, config)?;
    let outputs = classify_all(&prepared, config, classifier)?;
    let (report, confusion, evaluated_pairs) = collect_scores(&prepared, &outputs)?;
    Ok(Evaluation {
        outputs,
        report,
        confusion,
        evaluated_pairs,
    })
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: u8,
    pub accuracy: f64,
    /// White pixels per compared pixel across all pairs.
    pub white_pixel_rate: f64,
}

/// Re-classifies a labeled corpus at each threshold, reusing the prepared
/// stage, and reports accuracy and the white-pixel rate per threshold.
pub fn sweep_threshold(
    seqs: &[LoadedSequence],
    config: &PipelineConfig,
    classifier: &Classifier,
    thresholds: &[u8],
) -> Result<Vec<SweepRow>> {
    if thresholds.is_empty() {
        return Err(Error::Empty { what: "threshold list" });
    }
    let prepared = prepare_all(seqs, config)?;
    let compared_pixels: usize = prepared
        .iter()
        .map(|p| p.pair_count() * p.frame_pixels())
        .sum();

    let mut rows = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut swept = *config;
        swept.diff = config.diff.with_threshold(threshold)?;
        let outputs = classify_all(&prepared, &swept, classifier)?;

        let mut correct = 0usize;
        let mut labeled = 0usize;
        let mut white = 0usize;
        for (prep, output) in prepared.iter().zip(&outputs) {
            for (pair, record) in prep.pairs.iter().zip(&output.records) {
                white += record.white_count;
                if let Some(truth_label) = pair.truth_label {
                    labeled += 1;
                    if truth_label == record.label {
                        correct += 1;
                    }
                }
            }
        }
        if labeled == 0 {
            return Err(Error::Empty { what: "ground truth labels" });
        }
        rows.push(SweepRow {
            threshold,
            accuracy: correct as f64 / labeled as f64,
            white_pixel_rate: if compared_pixels == 0 {
                0.0
            } else {
                white as f64 / compared_pixels as f64
            },
        });
    }
    Ok(rows)
}

/// Extracts `(features, truth label, pair id)` for every truth-labeled pair,
/// for training and feature export.
pub fn build_training_set(
    seqs: &[LoadedSequence],
    config: &PipelineConfig,
) -> Result<Vec<(FeatureVector, LevelState, String)>> {
    let prepared = prepare_all(seqs, config)?;
    let per_seq = run_jobs(config.jobs, prepared.iter().collect::<Vec<_>>(), |prep| {
        let mut rows = Vec::new();
        for (index, pair) in prep.pairs.iter().enumerate() {
            let Some(label) = pair.truth_label else {
                continue;
            };
            let diff = frame_diff(&prep.gray[pair.a], &prep.gray[pair.b], &config.diff)?;
            let features = extract_features(&diff, &pair.mask, pair.prev_fill, &config.diff)?;
            rows.push((features, label, format!("{}:{index}", prep.id)));
        }
        Ok::<_, Error>(rows)
    });

    let mut dataset = Vec::new();
    for rows in per_seq {
        dataset.extend(rows?);
    }
    if dataset.is_empty() {
        return Err(Error::Empty { what: "ground truth labels" });
    }
    Ok(dataset)
}
