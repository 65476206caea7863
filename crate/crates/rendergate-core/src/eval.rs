//! Classifier evaluation: confusion counts, derived metrics, and a
//! fixed-layout report table.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::classifier::{ClassifierError, RenderNet, TrainExample, Verdict};
use crate::nn::sigmoid;
use crate::nn::Tensor;
use crate::RenderLabel;

/// Millisecond time source. Injected so reports are reproducible: the
/// no-op clock makes every timing field exactly zero.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

pub struct NullClock;

impl Clock for NullClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

/// Binary confusion counts with FullyRendered as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: RenderLabel, actual: RenderLabel) {
        use RenderLabel::*;
        match (predicted, actual) {
            (FullyRendered, FullyRendered) => self.true_pos += 1,
            (FullyRendered, PartiallyRendered) => self.false_pos += 1,
            (PartiallyRendered, FullyRendered) => self.false_neg += 1,
            (PartiallyRendered, PartiallyRendered) => self.true_neg += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    pub fn precision(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_pos)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Undefined ratios (empty denominators) score zero rather than NaN so
/// downstream comparisons stay total.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug)]
pub enum EvalError {
    EmptyDataset,
    Classifier(ClassifierError),
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::EmptyDataset => write!(f, "nothing to evaluate"),
            EvalError::Classifier(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for EvalError {}

impl From<ClassifierError> for EvalError {
    fn from(e: ClassifierError) -> Self {
        EvalError::Classifier(e)
    }
}

impl From<crate::nn::NnError> for EvalError {
    fn from(e: crate::nn::NnError) -> Self {
        EvalError::Classifier(ClassifierError::Nn(e))
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_inference_ms: f64,
    pub verdicts: Vec<Verdict>,
}

impl EvalReport {
    /// One-row metrics table, columns in the conventional order.
    pub fn table(&self) -> String {
        let mut s = String::from("Precision  Recall  F1      Time (ms)\n");
        s.push_str(&format!(
            "{:<9.4}  {:<6.4}  {:<6.4}  {:.2}\n",
            self.precision, self.recall, self.f1, self.mean_inference_ms
        ));
        s
    }
}

/// Run the model over every example and tally verdicts against labels.
/// Frames are batched for throughput; per-frame time is the batch time
/// split evenly, zero under the null clock.
pub fn evaluate(
    model: &RenderNet,
    examples: &[TrainExample],
    clock: &dyn Clock,
    batch_size: usize,
) -> Result<EvalReport, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let batch = batch_size.max(1);
    let mut counts = ConfusionCounts::default();
    let mut verdicts = Vec::with_capacity(examples.len());
    let indices: Vec<usize> = (0..examples.len()).collect();
    for chunk in indices.chunks(batch) {
        let (h, w) = {
            let s = &examples[chunk[0]].input.shape;
            (s[1], s[2])
        };
        let plane = 3 * h * w;
        let mut x = Tensor::zeros(&[chunk.len(), 3, h, w]);
        for (row, &i) in chunk.iter().enumerate() {
            x.data[row * plane..(row + 1) * plane].copy_from_slice(&examples[i].input.data);
        }
        let t0 = clock.now_ms();
        let logits = model.forward_eval(&x)?;
        let per_frame_ms = (clock.now_ms() - t0) / chunk.len() as f64;
        for (row, &i) in chunk.iter().enumerate() {
            let v = Verdict::from_probability(sigmoid(f64::from(logits.data[row])), per_frame_ms);
            counts.record(v.decision, examples[i].label);
            verdicts.push(v);
        }
    }
    let mean_inference_ms =
        verdicts.iter().map(|v| v.inference_ms).sum::<f64>() / verdicts.len() as f64;
    Ok(EvalReport {
        counts,
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
        mean_inference_ms,
        verdicts,
    })
}
