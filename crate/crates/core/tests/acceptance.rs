//! Acceptance gate: one test per release criterion, each printing a
//! `criterion NN <name>: PASS` line on success. The expensive shared state —
//! the 200-sequence standard corpus and a trained classifier — is built once
//! and reused across criteria.

use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::Instant;

use liqd_core::classify::{train, FeatureVector, LevelState, MlpModel, TrainOptions};
use liqd_core::corpus::{generate_cases, LoadedSequence};
use liqd_core::diff::{frame_diff, DiffParams};
use liqd_core::engine::{
    bce_loss, classification_metrics, confusion_matrix, filter_masks, fit_scorer, fused_loss,
    mask_features, regression_errors, LossWeights, SaliencyMap, ScoredMask,
};
use liqd_core::image::{
    fused_intensity, quantize_intensity, to_grayscale, ColorMode, GrayParams, RasterImage,
};
use liqd_core::mask::BinaryMask;
use liqd_core::morphology::{compensate, dilate, erode, StructuringElement};
use liqd_core::pipeline::{
    build_training_set, evaluate, run_pipeline_on, sweep_threshold, Classifier, PipelineConfig,
};
use liqd_core::rng::SplitMix64;
use liqd_core::synth::corrupt_mask;

const STANDARD_FRAMES: usize = 8;

struct Fixture {
    corpus: Vec<LoadedSequence>,
    model: MlpModel,
    init_seconds: f64,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let start = Instant::now();
        let corpus = generate_cases(0..200, STANDARD_FRAMES, 0).expect("standard corpus");
        let train_corpus = generate_cases(1000..1100, STANDARD_FRAMES, 0).expect("train corpus");
        let dataset: Vec<(FeatureVector, LevelState)> =
            build_training_set(&train_corpus, &PipelineConfig::default())
                .expect("training features")
                .into_iter()
                .map(|(features, label, _)| (features, label))
                .collect();
        let options = TrainOptions {
            learn_rate: 0.1,
            epochs: 80,
            batch_size: 32,
            seed: 7,
        };
        let outcome = train(&dataset, &options).expect("training converges");
        Fixture {
            corpus,
            model: outcome.model,
            init_seconds: start.elapsed().as_secs_f64(),
        }
    })
}

fn random_mask(seed: u64, width: u32, height: u32, density: f64) -> BinaryMask {
    let mut rng = SplitMix64::new(seed);
    let mut mask = BinaryMask::new(width, height).unwrap();
    for y in 0..height {
        for x in 0..width {
            if rng.next_f64() < density {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

fn random_gray(seed: u64, width: u32, height: u32) -> RasterImage {
    let mut rng = SplitMix64::new(seed);
    let data: Vec<u8> = (0..(width as usize * height as usize))
        .map(|_| rng.next_below(256) as u8)
        .collect();
    RasterImage::from_data(width, height, ColorMode::Gray, data).unwrap()
}

/// Dilation by the literal set definition: a pixel is set when some element
/// offset maps a foreground pixel onto it.
fn dilate_oracle(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let mut out = BinaryMask::new(mask.width(), mask.height()).unwrap();
    for y in 0..mask.height() as i64 {
        for x in 0..mask.width() as i64 {
            let hit = se
                .offsets()
                .iter()
                .any(|&(dx, dy)| mask.get(x - dx as i64, y - dy as i64));
            if hit {
                out.set(x as u32, y as u32, true);
            }
        }
    }
    out
}

/// Erosion by the literal set definition: every element offset must land on
/// foreground, with out-of-raster counting as background.
fn erode_oracle(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let mut out = BinaryMask::new(mask.width(), mask.height()).unwrap();
    for y in 0..mask.height() as i64 {
        for x in 0..mask.width() as i64 {
            let inside = se
                .offsets()
                .iter()
                .all(|&(dx, dy)| mask.get(x + dx as i64, y + dy as i64));
            if inside {
                out.set(x as u32, y as u32, true);
            }
        }
    }
    out
}

#[test]
fn criterion_01_morphology_matches_set_definition_oracle() {
    let start = Instant::now();
    let elements = [
        StructuringElement::ellipse(3).unwrap(),
        StructuringElement::ellipse(5).unwrap(),
        StructuringElement::ellipse(7).unwrap(),
    ];
    for seed in 0..100u64 {
        let density = 0.25 + 0.5 * (seed as f64 / 99.0);
        let mask = random_mask(seed, 32, 32, density);
        for se in &elements {
            assert_eq!(
                dilate(&mask, se),
                dilate_oracle(&mask, se),
                "dilate mismatch at seed {seed}"
            );
            assert_eq!(
                erode(&mask, se),
                erode_oracle(&mask, se),
                "erode mismatch at seed {seed}"
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "oracle comparison took {elapsed:.1} s");
    println!("criterion 01 morphology-oracle: PASS");
}

#[test]
fn criterion_02_grayscale_matches_scalar_reference() {
    let reference = |r: u8, g: u8, b: u8, alpha: f64, beta: f64| -> f64 {
        let (rf, gf, bf) = (r as f64, g as f64, b as f64);
        let y = 0.299 * rf + 0.587 * gf + 0.114 * bf;
        let u = 0.565 * (bf - y);
        let v = 0.713 * (rf - y);
        let i1 = (((rf + gf + bf) / 3.0 + u + v) / 4.0).clamp(0.0, 255.0);
        let i2 = if rf + gf + bf == 0.0 {
            0.0
        } else {
            (rf * rf + gf * gf + bf * bf) / (rf + gf + bf)
        };
        alpha * i1 + beta * i2
    };

    let pixels: [(u8, u8, u8); 10] = [
        (0, 0, 0),
        (128, 128, 128),
        (255, 255, 255),
        (255, 0, 0),
        (0, 255, 0),
        (0, 0, 255),
        (12, 200, 56),
        (77, 77, 78),
        (1, 0, 0),
        (250, 130, 10),
    ];
    for params in [GrayParams::default(), GrayParams::new(0.3, 0.7).unwrap()] {
        for &(r, g, b) in &pixels {
            let expected = reference(r, g, b, params.alpha(), params.beta());
            let got = fused_intensity(r, g, b, params);
            assert!(
                (got - expected).abs() < 1e-9,
                "({r},{g},{b}) alpha {}: {got} vs {expected}",
                params.alpha()
            );

            let image =
                RasterImage::from_data(1, 1, ColorMode::Rgb, vec![r, g, b]).unwrap();
            let gray = to_grayscale(&image, params).unwrap();
            assert_eq!(gray.gray_at(0, 0), quantize_intensity(expected));
        }
    }
    // Half-up rounding at the storage boundary.
    assert_eq!(quantize_intensity(80.5), 81);
    assert_eq!(quantize_intensity(80.499999), 80);
    println!("criterion 02 grayscale-reference: PASS");
}

#[test]
fn criterion_03_losses_match_hand_arithmetic() {
    let truth = BinaryMask::filled(1, 1).unwrap();
    let pred = SaliencyMap::from_probs(1, 1, vec![0.5]).unwrap();
    let loss = bce_loss(&pred, &truth).unwrap();
    assert!((loss - 0.693_147_180_559_945_3).abs() < 1e-12, "got {loss}");

    // 2·0.4 + 0.5·0.2 + 1·0.3 = 1.2
    let weights = LossWeights {
        side_weights: vec![2.0, 0.5],
        fuse_weight: 1.0,
    };
    let fused = fused_loss(&[0.4, 0.2], 0.3, &weights).unwrap();
    assert!((fused - 1.2).abs() < 1e-12, "got {fused}");

    let unit = LossWeights::uniform(3);
    let total = fused_loss(&[0.1, 0.2, 0.3], 0.4, &unit).unwrap();
    assert!((total - 1.0).abs() < 1e-12, "got {total}");
    println!("criterion 03 loss-arithmetic: PASS");
}

#[test]
fn criterion_04_diff_threshold_properties() {
    let base = DiffParams::default();

    for seed in 0..50u64 {
        let a = random_gray(seed * 2 + 1, 24, 24);
        let b = random_gray(seed * 2 + 2, 24, 24);

        let mut previous = usize::MAX;
        for threshold in 20..=60u8 {
            let params = base.with_threshold(threshold).unwrap();
            let d = frame_diff(&a, &b, &params).unwrap();
            assert!(
                d.white_count <= previous,
                "seed {seed}: white count grew from {previous} at T={threshold}"
            );
            previous = d.white_count;

            let swapped = frame_diff(&b, &a, &params).unwrap();
            assert_eq!(d.pos_plane, swapped.neg_plane, "seed {seed} T={threshold}");
            assert_eq!(d.neg_plane, swapped.pos_plane, "seed {seed} T={threshold}");
            assert_eq!(d.abs_plane, swapped.abs_plane, "seed {seed} T={threshold}");
        }

        for threshold in [1u8, 20, 50, 254] {
            let params = base.with_threshold(threshold).unwrap();
            let d = frame_diff(&a, &a, &params).unwrap();
            assert_eq!(d.white_count, 0, "identical frames at T={threshold}");
            assert_eq!(d.abs_plane.count_foreground(), 0);
        }
    }
    println!("criterion 04 diff-properties: PASS");
}

#[test]
fn criterion_05_compensation_repairs_corrupted_masks() {
    let se = StructuringElement::ellipse(5).unwrap();
    for seed in 0..50u64 {
        // Vary the container geometry while keeping a safe raster margin.
        let left = 6 + (seed % 5) as u32;
        let top = 8 + (seed % 7) as u32;
        let right = 57 - (seed % 4) as u32;
        let bottom = 71 - (seed % 6) as u32;
        let mut clean = BinaryMask::new(64, 80).unwrap();
        for y in top..=bottom {
            for x in left..=right {
                clean.set(x, y, true);
            }
        }

        let holes = 2 + (seed % 3) as usize;
        let radius = 1 + (seed % 2) as u32;
        let breaks = (seed % 3) as usize;
        let damaged = corrupt_mask(&clean, holes, radius, breaks, 9000 + seed);
        assert!(damaged.count_foreground() < clean.count_foreground());

        let repaired = compensate(&damaged, &se);
        let iou = repaired.iou(&clean).unwrap();
        assert!(
            iou >= 0.98,
            "seed {seed}: IoU {iou:.4} after repairing {holes} holes r{radius}, {breaks} breaks"
        );
    }
    println!("criterion 05 mask-repair: PASS");
}

#[test]
fn criterion_06_end_to_end_accuracy_with_trained_model() {
    let start = Instant::now();
    let fix = fixture();
    let config = PipelineConfig::default();
    let classifier = Classifier::Mlp(fix.model.clone());

    let thresholds: Vec<u8> = (20..=60).step_by(5).collect();
    let rows = sweep_threshold(&fix.corpus, &config, &classifier, &thresholds).unwrap();
    let swept: Vec<u8> = rows.iter().map(|r| r.threshold).collect();
    assert_eq!(swept, thresholds, "sweep must cover 20..60 step 5");

    let best = rows
        .iter()
        .max_by(|a, b| a.accuracy.total_cmp(&b.accuracy))
        .unwrap();
    assert!(
        best.accuracy >= 0.90,
        "best sweep accuracy {:.4} at T={}",
        best.accuracy,
        best.threshold
    );

    let mut best_config = config;
    best_config.diff = config.diff.with_threshold(best.threshold).unwrap();
    let eval = evaluate(&fix.corpus, &best_config, &classifier).unwrap();
    assert_eq!(eval.evaluated_pairs, 200 * (STANDARD_FRAMES - 1));
    assert!(
        eval.report.accuracy >= 0.90,
        "accuracy {:.4}",
        eval.report.accuracy
    );
    assert!(eval.report.f1 >= 0.88, "macro F1 {:.4}", eval.report.f1);

    let total = fix.init_seconds + start.elapsed().as_secs_f64();
    assert!(total < 180.0, "end-to-end run took {total:.0} s");
    println!(
        "criterion 06 end-to-end: PASS (best T={} accuracy {:.4} F1 {:.4})",
        best.threshold, eval.report.accuracy, eval.report.f1
    );
}

#[test]
fn criterion_07_classifier_integrity() {
    // Analytic gradients against central finite differences on ten cases.
    for case in 0..10u64 {
        let model = MlpModel::new_seeded(&[12, 8, 5], 100 + case).unwrap();
        let mut rng = SplitMix64::new(200 + case);
        let input: Vec<f64> = (0..12).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let label = LevelState::ALL[(case % 5) as usize];
        let (_, grad) = model.loss_gradient(&input, label).unwrap();

        let h = 1e-6;
        let params = model.flat_params();
        for i in (0..params.len()).step_by(7) {
            let mut p = params.clone();
            let mut probe = model.clone();
            p[i] += h;
            probe.set_flat_params(&p).unwrap();
            let up = probe.example_loss(&input, label).unwrap();
            p[i] -= 2.0 * h;
            probe.set_flat_params(&p).unwrap();
            let down = probe.example_loss(&input, label).unwrap();
            let numeric = (up - down) / (2.0 * h);
            let scale = grad[i].abs().max(numeric.abs()).max(1e-6);
            assert!(
                (grad[i] - numeric).abs() / scale < 1e-5,
                "case {case} param {i}: analytic {} vs numeric {numeric}",
                grad[i]
            );
        }
    }

    // Bit-exact training determinism on real features.
    let small = generate_cases(1000..1010, 4, 0).unwrap();
    let dataset: Vec<(FeatureVector, LevelState)> =
        build_training_set(&small, &PipelineConfig::default())
            .unwrap()
            .into_iter()
            .map(|(f, l, _)| (f, l))
            .collect();
    let options = TrainOptions {
        epochs: 3,
        seed: 11,
        ..TrainOptions::default()
    };
    let a = train(&dataset, &options).unwrap();
    let b = train(&dataset, &options).unwrap();
    assert_eq!(a.model.flat_params(), b.model.flat_params());
    assert_eq!(a.loss_trace, b.loss_trace);

    // Heuristic and trained model agree on the clean validation corpus.
    let fix = fixture();
    let config = PipelineConfig::default();
    let heuristic = run_pipeline_on(&fix.corpus, &config, &Classifier::Heuristic).unwrap();
    let learned =
        run_pipeline_on(&fix.corpus, &config, &Classifier::Mlp(fix.model.clone())).unwrap();
    let mut agree = 0usize;
    let mut total = 0usize;
    for (h, m) in heuristic.iter().zip(&learned) {
        for (hr, mr) in h.records.iter().zip(&m.records) {
            total += 1;
            if hr.label == mr.label {
                agree += 1;
            }
        }
    }
    let agreement = agree as f64 / total as f64;
    assert!(agreement >= 0.90, "agreement {agreement:.4}");
    println!("criterion 07 classifier-integrity: PASS (agreement {agreement:.4})");
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - mean) * (y - mean);
        da += (x - mean).powi(2);
        db += (y - mean).powi(2);
    }
    num / (da.sqrt() * db.sqrt())
}

#[test]
fn criterion_08_scorer_filters_by_quality() {
    // A fixed container, corrupted with widely varying severity.
    let mut clean = BinaryMask::new(48, 44).unwrap();
    for y in 7..=36 {
        for x in 8..=39 {
            clean.set(x, y, true);
        }
    }

    let mut cases = Vec::new();
    for seed in 0..200u64 {
        let holes = (seed % 31) as usize;
        let breaks = (seed % 3) as usize;
        let damaged = corrupt_mask(&clean, holes, 2, breaks, 40_000 + seed);
        let iou = damaged.iou(&clean).unwrap();
        let consensus = SaliencyMap::from_mask(&compensate(
            &damaged,
            &StructuringElement::ellipse(5).unwrap(),
        ));
        let features = mask_features(&damaged, &consensus).unwrap();
        cases.push((seed, damaged, features, iou));
    }

    // Even seeds fit the scorer, odd seeds are held out.
    let train_set: Vec<_> = cases
        .iter()
        .filter(|(seed, ..)| seed % 2 == 0)
        .map(|(_, _, features, iou)| (*features, *iou))
        .collect();
    let scorer = fit_scorer(&train_set, 0.7).unwrap();

    let held_out: Vec<_> = cases.iter().filter(|(seed, ..)| seed % 2 == 1).collect();
    let predicted: Vec<f64> = held_out
        .iter()
        .map(|(_, _, features, _)| scorer.score(features))
        .collect();
    let actual: Vec<f64> = held_out.iter().map(|(_, _, _, iou)| *iou).collect();
    let rho = spearman(&predicted, &actual);
    assert!(rho >= 0.8, "held-out Spearman {rho:.4}");

    // Filtering at τ = 0.7 must not lower the mean quality.
    let mut iou_by_id: HashMap<String, f64> = HashMap::new();
    let candidates: Vec<ScoredMask> = cases
        .iter()
        .map(|(seed, mask, features, iou)| {
            let id = format!("mask-{seed}");
            iou_by_id.insert(id.clone(), *iou);
            ScoredMask {
                id,
                mask: mask.clone(),
                features: *features,
                score: scorer.score(features),
            }
        })
        .collect();
    let full_mean = cases.iter().map(|(_, _, _, iou)| iou).sum::<f64>() / cases.len() as f64;
    let (accepted, _) = filter_masks(candidates, 0.7);
    assert!(!accepted.is_empty());
    let accepted_mean = accepted
        .iter()
        .map(|c| iou_by_id[&c.id])
        .sum::<f64>()
        / accepted.len() as f64;
    assert!(
        accepted_mean >= full_mean,
        "accepted mean {accepted_mean:.4} vs full {full_mean:.4}"
    );
    println!(
        "criterion 08 scorer-filtering: PASS (Spearman {rho:.4}, mean {full_mean:.4} -> {accepted_mean:.4})"
    );
}

#[test]
fn criterion_09_metrics_match_brute_force() {
    for seed in 0..100u64 {
        let mut rng = SplitMix64::new(3000 + seed);
        let len = 5 + rng.next_below(45) as usize;
        let pred: Vec<LevelState> = (0..len)
            .map(|_| LevelState::ALL[rng.next_below(5) as usize])
            .collect();
        let truth: Vec<LevelState> = (0..len)
            .map(|_| LevelState::ALL[rng.next_below(5) as usize])
            .collect();

        // Brute-force confusion counts and macro scores.
        let mut counts = [[0usize; 5]; 5];
        for (p, t) in pred.iter().zip(&truth) {
            counts[t.index()][p.index()] += 1;
        }
        let matrix = confusion_matrix(&pred, &truth).unwrap();
        for t in LevelState::ALL {
            for p in LevelState::ALL {
                assert_eq!(matrix.count(t, p), counts[t.index()][p.index()]);
            }
        }

        let hits: usize = (0..5).map(|c| counts[c][c]).sum();
        let mut precision_sum = 0.0;
        let mut recall_sum = 0.0;
        let mut f1_sum = 0.0;
        let mut active = 0usize;
        for c in 0..5 {
            let tp = counts[c][c];
            let truth_total: usize = counts[c].iter().sum();
            let pred_total: usize = (0..5).map(|t| counts[t][c]).sum();
            if truth_total == 0 && pred_total == 0 {
                continue;
            }
            active += 1;
            let p = if pred_total == 0 {
                0.0
            } else {
                tp as f64 / pred_total as f64
            };
            let r = if truth_total == 0 {
                0.0
            } else {
                tp as f64 / truth_total as f64
            };
            precision_sum += p;
            recall_sum += r;
            f1_sum += if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        }

        let scores = classification_metrics(&pred, &truth).unwrap();
        assert_eq!(scores.accuracy, hits as f64 / len as f64, "seed {seed}");
        assert_eq!(scores.precision, precision_sum / active as f64, "seed {seed}");
        assert_eq!(scores.recall, recall_sum / active as f64, "seed {seed}");
        assert_eq!(scores.f1, f1_sum / active as f64, "seed {seed}");
    }

    let (mae, mse) = regression_errors(&[0.0, 3.0], &[1.0, 1.0]).unwrap();
    assert_eq!(mae, 1.5);
    assert_eq!(mse, 2.5);
    println!("criterion 09 metrics-oracle: PASS");
}

#[test]
fn criterion_10_outputs_identical_across_jobs() {
    let fix = fixture();
    let subset = &fix.corpus[..30];
    let classifier = Classifier::Mlp(fix.model.clone());

    let mut ndjson = Vec::new();
    let mut sweeps = Vec::new();
    for jobs in [1usize, 4] {
        let config = PipelineConfig {
            jobs,
            ..PipelineConfig::default()
        };
        let outputs = run_pipeline_on(subset, &config, &classifier).unwrap();
        let lines: Vec<String> = outputs
            .iter()
            .flat_map(|o| &o.records)
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        ndjson.push(lines.join("\n"));

        let rows = sweep_threshold(subset, &config, &classifier, &[30, 50]).unwrap();
        sweeps.push(serde_json::to_string(&rows).unwrap());
    }
    assert_eq!(ndjson[0], ndjson[1], "records differ between job counts");
    assert_eq!(sweeps[0], sweeps[1], "sweep rows differ between job counts");
    assert!(!ndjson[0].is_empty());
    println!("criterion 10 jobs-determinism: PASS");
}
