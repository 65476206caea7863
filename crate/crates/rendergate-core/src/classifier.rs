//! Screenshot classifier: a small inverted-residual CNN that maps one RGB
//! frame to the probability that the GUI has finished rendering.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::eval::{Clock, ConfusionCounts};
use crate::imaging::Frame;
use crate::nn::{
    bce_with_logits, lr_at, sigmoid, Adam, BatchNorm, Conv2d, GlobalAvgPool, InvertedResidual,
    Linear, NnError, Param, Relu6, Tensor, TrainConfig,
};
use crate::{subseed, RenderLabel};

#[derive(Debug)]
pub enum ClassifierError {
    /// App-level splitting needs at least three distinct apps.
    TooFewApps { distinct: usize },
    /// Training cannot proceed: a split is empty or single-class.
    DegenerateDataset,
    BadCheckpoint(&'static str),
    Nn(NnError),
}

impl core::fmt::Display for ClassifierError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ClassifierError::TooFewApps { distinct } => {
                write!(f, "need at least 3 distinct apps to split, got {distinct}")
            }
            ClassifierError::DegenerateDataset => {
                write!(f, "dataset split is empty or contains a single class")
            }
            ClassifierError::BadCheckpoint(what) => write!(f, "bad checkpoint: {what}"),
            ClassifierError::Nn(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ClassifierError {}

impl From<NnError> for ClassifierError {
    fn from(e: NnError) -> Self {
        ClassifierError::Nn(e)
    }
}

/// One preprocessed frame ready for training or evaluation.
#[derive(Debug, Clone)]
pub struct TrainExample {
    /// [3, H, W] in [0,1].
    pub input: Tensor<f32>,
    pub label: RenderLabel,
    /// Split granularity: frames from one app never cross splits.
    pub app_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub probability: f64,
    /// probability must strictly exceed 0.5 to call the frame fully
    /// rendered; a dead-even score stays conservative.
    pub decision: RenderLabel,
    pub inference_ms: f64,
}

impl Verdict {
    pub fn from_probability(probability: f64, inference_ms: f64) -> Self {
        let decision = if probability > 0.5 {
            RenderLabel::FullyRendered
        } else {
            RenderLabel::PartiallyRendered
        };
        Verdict { probability, decision, inference_ms }
    }
}

const BLOCK_PLAN: [(usize, usize, usize); 5] =
    [(8, 16, 2), (16, 16, 1), (16, 24, 2), (24, 24, 1), (24, 32, 2)];
const EXPANSION: usize = 6;
const STEM_OUT: usize = 8;
const HEAD_IN: usize = 32;

/// Full-size screenshots get downscaled to this input; the simulator's
/// smaller frames use `desk` at the same 12:7 aspect.
pub const FULL_INPUT: (usize, usize) = (768, 448);
pub const DESK_INPUT: (usize, usize) = (96, 56);

#[derive(Debug, Clone)]
pub struct RenderNet {
    pub in_h: usize,
    pub in_w: usize,
    stem: Conv2d<f32>,
    stem_bn: BatchNorm<f32>,
    stem_act: Relu6<f32>,
    blocks: Vec<InvertedResidual<f32>>,
    pool: GlobalAvgPool,
    head: Linear<f32>,
}

impl RenderNet {
    pub fn with_input(in_h: usize, in_w: usize) -> Self {
        assert!(in_h >= 32 && in_w >= 32, "input too small for five stride-2 stages");
        let blocks = BLOCK_PLAN
            .iter()
            .map(|&(i, o, s)| InvertedResidual::new(i, o, s, EXPANSION))
            .collect();
        RenderNet {
            in_h,
            in_w,
            stem: Conv2d::standard(3, STEM_OUT, 2),
            stem_bn: BatchNorm::new(STEM_OUT),
            stem_act: Relu6::new(),
            blocks,
            pool: GlobalAvgPool::new(),
            head: Linear::new(HEAD_IN, 1),
        }
    }

    pub fn desk() -> Self {
        Self::with_input(DESK_INPUT.0, DESK_INPUT.1)
    }

    pub fn full() -> Self {
        Self::with_input(FULL_INPUT.0, FULL_INPUT.1)
    }

    pub fn init(&mut self, seed: u64) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        self.stem.init(&mut rng);
        for b in self.blocks.iter_mut() {
            b.init(&mut rng);
        }
        self.head.init(&mut rng);
    }

    /// [B,3,in_h,in_w] -> [B,1] logits.
    pub fn forward_eval(&self, x: &Tensor<f32>) -> Result<Tensor<f32>, NnError> {
        let t = self.stem.forward_eval(x)?;
        let t = self.stem_bn.forward_eval(&t)?;
        let mut t = self.stem_act.forward_eval(&t);
        for b in self.blocks.iter() {
            t = b.forward_eval(&t)?;
        }
        let t = self.pool.forward_eval(&t);
        self.head.forward_eval(&t)
    }

    pub fn forward_train(&mut self, x: &Tensor<f32>) -> Result<Tensor<f32>, NnError> {
        let t = self.stem.forward_train(x)?;
        let t = self.stem_bn.forward_train(&t)?;
        let mut t = self.stem_act.forward_train(&t);
        for b in self.blocks.iter_mut() {
            t = b.forward_train(&t)?;
        }
        let t = self.pool.forward_train(&t);
        self.head.forward_train(&t)
    }

    pub fn backward(&mut self, dlogits: &Tensor<f32>) {
        let g = self.head.backward(dlogits);
        let mut g = self.pool.backward(&g);
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g);
        }
        let g = self.stem_act.backward(&g);
        let g = self.stem_bn.backward(&g);
        self.stem.backward(&g);
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Param<f32>)) {
        self.stem.for_each_param(f);
        self.stem_bn.for_each_param(f);
        for b in self.blocks.iter_mut() {
            b.for_each_param(f);
        }
        self.head.for_each_param(f);
    }

    pub fn zero_grads(&mut self) {
        self.for_each_param(&mut |p| p.zero_grad());
    }

    pub fn infer(&self, frame: &Frame, clock: &dyn Clock) -> Result<Verdict, ClassifierError> {
        let mut x = preprocess(frame, self.in_h, self.in_w);
        x.shape = vec![1, 3, self.in_h, self.in_w];
        let t0 = clock.now_ms();
        let logits = self.forward_eval(&x)?;
        let elapsed = clock.now_ms() - t0;
        Ok(Verdict::from_probability(sigmoid(f64::from(logits.data[0])), elapsed))
    }
}

/// Bilinear resize (corner-aligned) of an RGB frame into a [3,H,W]
/// tensor scaled to [0,1].
pub fn preprocess(frame: &Frame, out_h: usize, out_w: usize) -> Tensor<f32> {
    let (h, w) = (frame.height, frame.width);
    let sy = if out_h > 1 { (h - 1) as f32 / (out_h - 1) as f32 } else { 0.0 };
    let sx = if out_w > 1 { (w - 1) as f32 / (out_w - 1) as f32 } else { 0.0 };
    let mut out = Tensor::zeros(&[3, out_h, out_w]);
    let plane = out_h * out_w;
    for oy in 0..out_h {
        let fy = oy as f32 * sy;
        let y0 = fy as usize;
        let y1 = (y0 + 1).min(h - 1);
        let dy = fy - y0 as f32;
        for ox in 0..out_w {
            let fx = ox as f32 * sx;
            let x0 = fx as usize;
            let x1 = (x0 + 1).min(w - 1);
            let dx = fx - x0 as f32;
            for c in 0..3 {
                let p = |yy: usize, xx: usize| frame.pixels[(yy * w + xx) * 3 + c] as f32;
                let top = p(y0, x0) * (1.0 - dx) + p(y0, x1) * dx;
                let bot = p(y1, x0) * (1.0 - dx) + p(y1, x1) * dx;
                out.data[c * plane + oy * out_w + ox] = (top * (1.0 - dy) + bot * dy) / 255.0;
            }
        }
    }
    out
}

fn stack_examples(examples: &[TrainExample], indices: &[usize]) -> Tensor<f32> {
    let (h, w) = {
        let s = &examples[indices[0]].input.shape;
        (s[1], s[2])
    };
    let plane = 3 * h * w;
    let mut x = Tensor::zeros(&[indices.len(), 3, h, w]);
    for (row, &i) in indices.iter().enumerate() {
        x.data[row * plane..(row + 1) * plane].copy_from_slice(&examples[i].input.data);
    }
    x
}

fn label01(label: RenderLabel) -> f32 {
    match label {
        RenderLabel::FullyRendered => 1.0,
        RenderLabel::PartiallyRendered => 0.0,
    }
}

/// Split examples 8:1:1 by app so no app's frames leak across splits.
/// App order is shuffled deterministically from `seed`.
pub fn split_by_app(
    examples: Vec<TrainExample>,
    seed: u64,
) -> Result<(Vec<TrainExample>, Vec<TrainExample>, Vec<TrainExample>), ClassifierError> {
    let mut apps: Vec<String> = {
        let mut set = alloc::collections::BTreeSet::new();
        for e in &examples {
            set.insert(e.app_id.clone());
        }
        set.into_iter().collect()
    };
    if apps.len() < 3 {
        return Err(ClassifierError::TooFewApps { distinct: apps.len() });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(subseed(seed, "app-split"));
    apps.shuffle(&mut rng);

    let tenth = ((apps.len() + 5) / 10).max(1);
    let val_apps: alloc::collections::BTreeSet<&String> = apps[..tenth].iter().collect();
    let test_apps: alloc::collections::BTreeSet<&String> = apps[tenth..2 * tenth].iter().collect();

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for e in examples {
        if val_apps.contains(&e.app_id) {
            val.push(e);
        } else if test_apps.contains(&e.app_id) {
            test.push(e);
        } else {
            train.push(e);
        }
    }
    Ok((train, val, test))
}

#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: u32,
    pub lr: f64,
    pub train_loss: f64,
    pub val_precision: f64,
    pub val_recall: f64,
    pub val_f1: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// The epoch checkpoint with the best validation F1, not the last one.
    pub model: RenderNet,
    pub logs: Vec<EpochLog>,
    pub best_epoch: u32,
    pub best_val_f1: f64,
}

fn split_is_degenerate(examples: &[TrainExample]) -> bool {
    examples.is_empty()
        || examples.iter().all(|e| e.label == RenderLabel::FullyRendered)
        || examples.iter().all(|e| e.label == RenderLabel::PartiallyRendered)
}

/// Minibatch Adam training with a per-epoch reshuffle. Returns the model
/// restored from the best-validation-F1 checkpoint.
pub fn train(
    mut model: RenderNet,
    train_set: &[TrainExample],
    val_set: &[TrainExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ClassifierError> {
    if split_is_degenerate(train_set) || val_set.is_empty() {
        return Err(ClassifierError::DegenerateDataset);
    }
    let mut adam = Adam::new(cfg);
    let mut logs = Vec::with_capacity(cfg.epochs as usize);
    let mut best: Option<(f64, u32, Vec<u8>)> = None;

    for epoch in 0..cfg.epochs {
        let lr = lr_at(cfg, epoch);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng =
            ChaCha12Rng::seed_from_u64(subseed(cfg.rng_seed, &format!("epoch-{epoch}")));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let x = stack_examples(train_set, chunk);
            let targets: Vec<f32> = chunk.iter().map(|&i| label01(train_set[i].label)).collect();
            model.zero_grads();
            let logits = model.forward_train(&x)?;
            let (loss, dlogits) = bce_with_logits(&logits, &targets);
            model.backward(&dlogits);
            adam.begin_step();
            let mut idx = 0;
            let lr32 = lr as f32;
            model.for_each_param(&mut |p| {
                adam.step_param(idx, p, lr32);
                idx += 1;
            });
            loss_sum += f64::from(loss) * chunk.len() as f64;
        }

        let (val_precision, val_recall, val_f1) = validation_metrics(&model, val_set, cfg.batch_size)?;
        logs.push(EpochLog {
            epoch,
            lr,
            train_loss: loss_sum / train_set.len() as f64,
            val_precision,
            val_recall,
            val_f1,
        });
        if best.as_ref().map_or(true, |(f1, ..)| val_f1 > *f1) {
            best = Some((val_f1, epoch, model.to_bytes()));
        }
    }

    let (best_val_f1, best_epoch, bytes) = best.expect("epochs >= 1");
    Ok(TrainOutcome { model: RenderNet::from_bytes(&bytes)?, logs, best_epoch, best_val_f1 })
}

fn validation_metrics(
    model: &RenderNet,
    val_set: &[TrainExample],
    batch_size: usize,
) -> Result<(f64, f64, f64), ClassifierError> {
    let mut counts = ConfusionCounts::default();
    let indices: Vec<usize> = (0..val_set.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let x = stack_examples(val_set, chunk);
        let logits = model.forward_eval(&x)?;
        for (row, &i) in chunk.iter().enumerate() {
            let verdict = Verdict::from_probability(sigmoid(f64::from(logits.data[row])), 0.0);
            counts.record(verdict.decision, val_set[i].label);
        }
    }
    Ok((counts.precision(), counts.recall(), counts.f1()))
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"RGNC";
const CHECKPOINT_VERSION: u16 = 1;

fn visit_bn_ref(bn: &BatchNorm<f32>, f: &mut dyn FnMut(&Tensor<f32>)) {
    f(&bn.gamma.value);
    f(&bn.beta.value);
    f(&bn.running_mean);
    f(&bn.running_var);
}

fn visit_bn_mut(bn: &mut BatchNorm<f32>, f: &mut dyn FnMut(&mut Tensor<f32>) -> Result<(), ClassifierError>) -> Result<(), ClassifierError> {
    f(&mut bn.gamma.value)?;
    f(&mut bn.beta.value)?;
    f(&mut bn.running_mean)?;
    f(&mut bn.running_var)
}

fn visit_tensors_ref(net: &RenderNet, f: &mut dyn FnMut(&Tensor<f32>)) {
    f(&net.stem.weight.value);
    f(&net.stem.bias.value);
    visit_bn_ref(&net.stem_bn, f);
    for b in &net.blocks {
        f(&b.expand.weight.value);
        f(&b.expand.bias.value);
        visit_bn_ref(&b.bn_expand, f);
        f(&b.depthwise.weight.value);
        f(&b.depthwise.bias.value);
        visit_bn_ref(&b.bn_depthwise, f);
        f(&b.project.weight.value);
        f(&b.project.bias.value);
        visit_bn_ref(&b.bn_project, f);
    }
    f(&net.head.weight.value);
    f(&net.head.bias.value);
}

fn visit_tensors_mut(net: &mut RenderNet, f: &mut dyn FnMut(&mut Tensor<f32>) -> Result<(), ClassifierError>) -> Result<(), ClassifierError> {
    f(&mut net.stem.weight.value)?;
    f(&mut net.stem.bias.value)?;
    visit_bn_mut(&mut net.stem_bn, f)?;
    for b in net.blocks.iter_mut() {
        f(&mut b.expand.weight.value)?;
        f(&mut b.expand.bias.value)?;
        visit_bn_mut(&mut b.bn_expand, f)?;
        f(&mut b.depthwise.weight.value)?;
        f(&mut b.depthwise.bias.value)?;
        visit_bn_mut(&mut b.bn_depthwise, f)?;
        f(&mut b.project.weight.value)?;
        f(&mut b.project.bias.value)?;
        visit_bn_mut(&mut b.bn_project, f)?;
    }
    f(&mut net.head.weight.value)?;
    f(&mut net.head.bias.value)
}

impl RenderNet {
    /// Checkpoint layout: magic, version, input dims, block manifest,
    /// then every tensor (weights, biases, batchnorm statistics) as a
    /// length-prefixed little-endian f32 buffer in forward order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.in_h as u32).to_le_bytes());
        out.extend_from_slice(&(self.in_w as u32).to_le_bytes());
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for b in &self.blocks {
            out.extend_from_slice(&(b.in_channels as u32).to_le_bytes());
            out.extend_from_slice(&(b.out_channels as u32).to_le_bytes());
            out.push(b.stride as u8);
            out.push(EXPANSION as u8);
        }
        visit_tensors_ref(self, &mut |t| {
            out.extend_from_slice(&(t.numel() as u32).to_le_bytes());
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        });
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ClassifierError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(ClassifierError::BadCheckpoint("magic mismatch"));
        }
        if u16::from_le_bytes(r.take(2)?.try_into().unwrap()) != CHECKPOINT_VERSION {
            return Err(ClassifierError::BadCheckpoint("unsupported version"));
        }
        let in_h = r.u32()? as usize;
        let in_w = r.u32()? as usize;
        let n_blocks = r.u32()? as usize;
        if n_blocks != BLOCK_PLAN.len() {
            return Err(ClassifierError::BadCheckpoint("unexpected block count"));
        }
        for &(i, o, s) in &BLOCK_PLAN {
            let (ci, co) = (r.u32()? as usize, r.u32()? as usize);
            let (cs, ce) = (r.byte()? as usize, r.byte()? as usize);
            if (ci, co, cs, ce) != (i, o, s, EXPANSION) {
                return Err(ClassifierError::BadCheckpoint("block manifest mismatch"));
            }
        }
        let mut net = RenderNet::with_input(in_h, in_w);
        visit_tensors_mut(&mut net, &mut |t| {
            let len = r.u32()? as usize;
            if len != t.numel() {
                return Err(ClassifierError::BadCheckpoint("tensor length mismatch"));
            }
            let raw = r.take(len * 4)?;
            for (i, v) in t.data.iter_mut().enumerate() {
                *v = f32::from_le_bytes(raw[i * 4..i * 4 + 4].try_into().unwrap());
            }
            Ok(())
        })?;
        if r.pos != bytes.len() {
            return Err(ClassifierError::BadCheckpoint("trailing bytes"));
        }
        Ok(net)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        if self.pos + n > self.bytes.len() {
            return Err(ClassifierError::BadCheckpoint("truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn byte(&mut self) -> Result<u8, ClassifierError> {
        Ok(self.take(1)?[0])
    }
}
