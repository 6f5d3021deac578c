//! Evaluation metrics: confusion matrix, macro-averaged classification
//! scores, and regression errors for level estimates.

use serde::{Deserialize, Serialize};

use crate::classify::{LevelState, CLASS_COUNT};
use crate::error::{Error, Result};

/// 5×5 confusion matrix indexed `[truth][prediction]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[usize; CLASS_COUNT]; CLASS_COUNT],
}

impl ConfusionMatrix {
    pub fn count(&self, truth: LevelState, pred: LevelState) -> usize {
        self.counts[truth.index()][pred.index()]
    }

    pub fn row(&self, truth: LevelState) -> &[usize; CLASS_COUNT] {
        &self.counts[truth.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

impl std::fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:>16}", "truth \\ pred")?;
        for state in LevelState::ALL {
            write!(f, "{:>16}", state.to_string())?;
        }
        writeln!(f)?;
        for truth in LevelState::ALL {
            write!(f, "{:>16}", truth.to_string())?;
            for pred in LevelState::ALL {
                write!(f, "{:>16}", self.count(truth, pred))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Builds the confusion matrix for paired prediction/truth vectors.
pub fn confusion_matrix(pred: &[LevelState], truth: &[LevelState]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "{} predictions vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Empty {
            what: "label vectors",
        });
    }
    let mut counts = [[0usize; CLASS_COUNT]; CLASS_COUNT];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[t.index()][p.index()] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Accuracy plus macro-averaged precision, recall, and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Computes classification scores from paired label vectors.
///
/// Macro averages run over classes that appear in the truth or the
/// predictions; classes absent from both contribute nothing. A class with no
/// positive predictions scores precision 0, one with no truth instances
/// scores recall 0, and F1 is 0 whenever precision + recall is 0.
pub fn classification_metrics(
    pred: &[LevelState],
    truth: &[LevelState],
) -> Result<ClassificationScores> {
    let matrix = confusion_matrix(pred, truth)?;
    let total = matrix.total();
    let hits: usize = LevelState::ALL
        .iter()
        .map(|&s| matrix.count(s, s))
        .sum();
    let accuracy = hits as f64 / total as f64;

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut included = 0usize;
    for class in LevelState::ALL {
        let tp = matrix.count(class, class);
        let truth_count: usize = LevelState::ALL
            .iter()
            .map(|&p| matrix.count(class, p))
            .sum();
        let pred_count: usize = LevelState::ALL
            .iter()
            .map(|&t| matrix.count(t, class))
            .sum();
        if truth_count == 0 && pred_count == 0 {
            continue;
        }
        included += 1;
        let precision = if pred_count == 0 {
            0.0
        } else {
            tp as f64 / pred_count as f64
        };
        let recall = if truth_count == 0 {
            0.0
        } else {
            tp as f64 / truth_count as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
    }

    Ok(ClassificationScores {
        accuracy,
        precision: precision_sum / included as f64,
        recall: recall_sum / included as f64,
        f1: f1_sum / included as f64,
    })
}

/// Mean absolute and mean squared error of paired estimates.
pub fn regression_errors(pred: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "{} estimates vs {} truths",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Empty {
            what: "estimate vectors",
        });
    }
    let n = pred.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (&p, &t) in pred.iter().zip(truth) {
        let d = p - t;
        abs += d.abs();
        sq += d * d;
    }
    Ok((abs / n, sq / n))
}

/// Full evaluation summary in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mae: f64,
    pub mse: f64,
}

impl MetricsReport {
    pub fn from_parts(scores: ClassificationScores, mae: f64, mse: f64) -> Self {
        MetricsReport {
            accuracy: scores.accuracy,
            precision: scores.precision,
            recall: scores.recall,
            f1: scores.f1,
            mae,
            mse,
        }
    }
}

impl std::fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "Acc", "P", "R", "F1-score", "MAE", "MSE"
        )?;
        writeln!(
            f,
            "{:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            self.accuracy, self.precision, self.recall, self.f1, self.mae, self.mse
        )
    }
}
