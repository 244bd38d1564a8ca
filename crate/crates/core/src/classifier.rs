//! Desk-scale countermeasure back-end: attentive statistics pooling over
//! FBANK frames, a linear two-class head, softmax cross-entropy, and Adam
//! with linear warmup followed by a reduce-on-plateau schedule.
//!
//! Pooling: `e_t = v' tanh(W h_t + b)`, attention `α = softmax(e)`, then the
//! attention-weighted mean and standard deviation are concatenated. All
//! gradients are analytic; training is single-threaded and bit-deterministic
//! for a fixed seed.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::channel::Label;
use crate::features::FbankMatrix;
use crate::rng::rng_from_seed;

/// Attention width of the pooling layer.
pub const ATTN_DIM: usize = 128;
/// Variance clamp inside the pooled standard deviation.
pub const VAR_CLAMP: f64 = 1e-9;

pub type Result<T> = std::result::Result<T, ClassifierError>;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("utterance has no frames")]
    NoFrames,
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(&'static str),
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("model file {0}: bad magic (expected ASP1)")]
    BadMagic(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Attentive-statistics-pooling classifier parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AspModel {
    pub feat_dim: usize,
    pub attn_dim: usize,
    /// `attn_dim x feat_dim`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub v: Vec<f64>,
    /// `2 x 2*feat_dim`, row-major; row 0 scores spoof, row 1 bonafide.
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

impl AspModel {
    /// Seeded init: matrices uniform in `±sqrt(1/fan_in)`, biases zero.
    pub fn init(feat_dim: usize, attn_dim: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let bound = (1.0 / fan_in as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        let w = uniform(attn_dim * feat_dim, feat_dim);
        let v = uniform(attn_dim, attn_dim);
        let head_w = uniform(2 * 2 * feat_dim, 2 * feat_dim);
        Self {
            feat_dim,
            attn_dim,
            w,
            b: vec![0.0; attn_dim],
            v,
            head_w,
            head_b: vec![0.0; 2],
        }
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len() + self.v.len() + self.head_w.len() + self.head_b.len()
    }

    fn blocks(&self) -> [&Vec<f64>; 5] {
        [&self.w, &self.b, &self.v, &self.head_w, &self.head_b]
    }

    fn blocks_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.w, &mut self.b, &mut self.v, &mut self.head_w, &mut self.head_b]
    }
}

/// Gradients with the same shapes as [`AspModel`].
#[derive(Debug, Clone)]
pub struct AspGrads {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub v: Vec<f64>,
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

impl AspGrads {
    pub fn zeros_like(model: &AspModel) -> Self {
        Self {
            w: vec![0.0; model.w.len()],
            b: vec![0.0; model.b.len()],
            v: vec![0.0; model.v.len()],
            head_w: vec![0.0; model.head_w.len()],
            head_b: vec![0.0; model.head_b.len()],
        }
    }

    fn blocks(&self) -> [(&'static str, &Vec<f64>); 5] {
        [
            ("w", &self.w),
            ("b", &self.b),
            ("v", &self.v),
            ("head_w", &self.head_w),
            ("head_b", &self.head_b),
        ]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let mut ia = a.chunks_exact(8);
    let mut ib = b.chunks_exact(8);
    for (ca, cb) in ia.by_ref().zip(ib.by_ref()) {
        for k in 0..8 {
            acc[k] += ca[k] * cb[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ia.remainder().iter().zip(ib.remainder()) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (slot, &xi) in y.iter_mut().zip(x) {
        *slot += a * xi;
    }
}

/// Frames processed together in the pooling kernels; keeps each 640-byte
/// weight row in L1 across the block.
const FRAME_BLOCK: usize = 8;

/// Scratch space reused across utterances of a batch.
struct Workspace {
    /// Frame-major copy of the features, `T x F`.
    frames: Vec<f64>,
    /// tanh activations, `T x A`.
    u: Vec<f64>,
    e: Vec<f64>,
    alpha: Vec<f64>,
    mean: Vec<f64>,
    sq: Vec<f64>,
    sigma: Vec<f64>,
    pooled: Vec<f64>,
}

impl Workspace {
    fn new() -> Self {
        Self {
            frames: Vec::new(),
            u: Vec::new(),
            e: Vec::new(),
            alpha: Vec::new(),
            mean: Vec::new(),
            sq: Vec::new(),
            sigma: Vec::new(),
            pooled: Vec::new(),
        }
    }
}

fn check_dims(model: &AspModel, feats: &FbankMatrix) -> Result<()> {
    if feats.rows != model.feat_dim {
        return Err(ClassifierError::DimMismatch { expected: model.feat_dim, got: feats.rows });
    }
    if feats.cols == 0 {
        return Err(ClassifierError::NoFrames);
    }
    Ok(())
}

/// Forward pass through pooling and head; fills the workspace.
fn forward(model: &AspModel, feats: &FbankMatrix, ws: &mut Workspace) -> [f64; 2] {
    let (f_dim, a_dim, t_len) = (model.feat_dim, model.attn_dim, feats.cols);

    ws.frames.clear();
    ws.frames.resize(t_len * f_dim, 0.0);
    for r in 0..f_dim {
        let row = feats.row(r);
        for t in 0..t_len {
            ws.frames[t * f_dim + r] = row[t];
        }
    }

    ws.u.clear();
    ws.u.resize(t_len * a_dim, 0.0);
    ws.e.clear();
    ws.e.resize(t_len, 0.0);
    // frames in blocks so each W row stays hot across several dots
    let mut start = 0;
    while start < t_len {
        let bs = FRAME_BLOCK.min(t_len - start);
        for a in 0..a_dim {
            let w_row = &model.w[a * f_dim..(a + 1) * f_dim];
            let b_a = model.b[a];
            for j in 0..bs {
                let t = start + j;
                let h = &ws.frames[t * f_dim..(t + 1) * f_dim];
                ws.u[t * a_dim + a] = (dot(w_row, h) + b_a).tanh();
            }
        }
        start += bs;
    }
    for t in 0..t_len {
        ws.e[t] = dot(&model.v, &ws.u[t * a_dim..(t + 1) * a_dim]);
    }

    // softmax over frames
    ws.alpha.clear();
    ws.alpha.extend_from_slice(&ws.e);
    let max_e = ws.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for a in ws.alpha.iter_mut() {
        *a = (*a - max_e).exp();
        z += *a;
    }
    for a in ws.alpha.iter_mut() {
        *a /= z;
    }

    ws.mean.clear();
    ws.mean.resize(f_dim, 0.0);
    ws.sq.clear();
    ws.sq.resize(f_dim, 0.0);
    for t in 0..t_len {
        let h = &ws.frames[t * f_dim..(t + 1) * f_dim];
        let a = ws.alpha[t];
        for d in 0..f_dim {
            ws.mean[d] += a * h[d];
            ws.sq[d] += a * h[d] * h[d];
        }
    }
    ws.sigma.clear();
    ws.sigma.resize(f_dim, 0.0);
    for d in 0..f_dim {
        let var = (ws.sq[d] - ws.mean[d] * ws.mean[d]).max(VAR_CLAMP);
        ws.sigma[d] = var.sqrt();
    }

    ws.pooled.clear();
    ws.pooled.extend_from_slice(&ws.mean);
    ws.pooled.extend_from_slice(&ws.sigma);

    let p2 = 2 * f_dim;
    [
        dot(&model.head_w[0..p2], &ws.pooled) + model.head_b[0],
        dot(&model.head_w[p2..2 * p2], &ws.pooled) + model.head_b[1],
    ]
}

fn log_softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    [z[0] - lse, z[1] - lse]
}

fn class_index(label: Label) -> usize {
    match label {
        Label::Spoof => 0,
        Label::Bonafide => 1,
    }
}

/// Attention-weighted mean and standard deviation, concatenated (`2F`).
pub fn asp_pool(frames: &FbankMatrix, model: &AspModel) -> Result<Vec<f64>> {
    check_dims(model, frames)?;
    let mut ws = Workspace::new();
    forward(model, frames, &mut ws);
    Ok(ws.pooled)
}

/// Mean cross-entropy over the batch, plus per-sample logits.
pub fn forward_loss(
    batch: &[(&FbankMatrix, Label)],
    model: &AspModel,
) -> Result<(f64, Vec<[f64; 2]>)> {
    let mut ws = Workspace::new();
    let mut loss = 0.0;
    let mut logits = Vec::with_capacity(batch.len());
    for (feats, label) in batch {
        check_dims(model, feats)?;
        let z = forward(model, feats, &mut ws);
        let lsm = log_softmax2(z);
        loss -= lsm[class_index(*label)];
        logits.push(z);
    }
    Ok((loss / batch.len().max(1) as f64, logits))
}

/// Analytic gradients of [`forward_loss`] with respect to every parameter;
/// the variance clamp propagates a zero gradient where active.
pub fn backward(batch: &[(&FbankMatrix, Label)], model: &AspModel) -> Result<(f64, AspGrads)> {
    let mut grads = AspGrads::zeros_like(model);
    let mut ws = Workspace::new();
    let (f_dim, a_dim) = (model.feat_dim, model.attn_dim);
    let p2 = 2 * f_dim;
    let inv_batch = 1.0 / batch.len().max(1) as f64;
    let mut loss = 0.0;

    let mut d_pool = vec![0.0; p2];
    let mut d_alpha: Vec<f64> = Vec::new();
    let mut d_e: Vec<f64> = Vec::new();
    let mut d_a = vec![0.0; a_dim];

    for (feats, label) in batch {
        check_dims(model, feats)?;
        let z = forward(model, feats, &mut ws);
        let lsm = log_softmax2(z);
        let y = class_index(*label);
        loss -= lsm[y];
        let t_len = feats.cols;

        // d loss / d logits, scaled by the batch mean
        let mut dz = [lsm[0].exp() * inv_batch, lsm[1].exp() * inv_batch];
        dz[y] -= inv_batch;

        // head
        for c in 0..2 {
            axpy(&mut grads.head_w[c * p2..(c + 1) * p2], dz[c], &ws.pooled);
            grads.head_b[c] += dz[c];
        }
        for d in 0..p2 {
            d_pool[d] = dz[0] * model.head_w[d] + dz[1] * model.head_w[p2 + d];
        }

        // through sigma and the clamp into the statistics
        // d_var active only when the clamp is not
        let mut d_mean = vec![0.0; f_dim];
        let mut d_sq = vec![0.0; f_dim];
        for d in 0..f_dim {
            d_mean[d] = d_pool[d];
            let var = ws.sq[d] - ws.mean[d] * ws.mean[d];
            if var > VAR_CLAMP {
                let d_var = d_pool[f_dim + d] * 0.5 / ws.sigma[d];
                d_sq[d] = d_var;
                d_mean[d] -= 2.0 * ws.mean[d] * d_var;
            }
        }

        // attention weights
        d_alpha.clear();
        d_alpha.resize(t_len, 0.0);
        for t in 0..t_len {
            let h = &ws.frames[t * f_dim..(t + 1) * f_dim];
            let mut acc = 0.0;
            for d in 0..f_dim {
                acc += d_mean[d] * h[d] + d_sq[d] * h[d] * h[d];
            }
            d_alpha[t] = acc;
        }
        let weighted: f64 = (0..t_len).map(|t| ws.alpha[t] * d_alpha[t]).sum();

        // back through softmax and tanh; softmax de first, then the blocked
        // rank-updates of W so each gradient row stays hot across the block
        d_e.clear();
        d_e.resize(t_len, 0.0);
        for t in 0..t_len {
            let de = ws.alpha[t] * (d_alpha[t] - weighted);
            d_e[t] = de;
            if de != 0.0 {
                axpy(&mut grads.v, de, &ws.u[t * a_dim..(t + 1) * a_dim]);
            }
        }
        let mut start = 0;
        while start < t_len {
            let bs = FRAME_BLOCK.min(t_len - start);
            for a in 0..a_dim {
                let v_a = model.v[a];
                let w_row = &mut grads.w[a * f_dim..(a + 1) * f_dim];
                let mut b_acc = 0.0;
                for j in 0..bs {
                    let t = start + j;
                    let de = d_e[t];
                    if de == 0.0 {
                        continue;
                    }
                    let u_ta = ws.u[t * a_dim + a];
                    let da = de * v_a * (1.0 - u_ta * u_ta);
                    d_a[a] = da;
                    if da != 0.0 {
                        axpy(w_row, da, &ws.frames[t * f_dim..(t + 1) * f_dim]);
                        b_acc += da;
                    }
                }
                grads.b[a] += b_acc;
            }
            start += bs;
        }
    }
    Ok((loss * inv_batch, grads))
}

/// Adam accumulators over the flattened parameter blocks.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl OptimizerState {
    pub fn new(model: &AspModel) -> Self {
        let n = model.n_params();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// One Adam update with bias correction; weight decay enters as an L2 term
/// added to the gradient before the moment updates.
pub fn adam_step(
    model: &mut AspModel,
    grads: &AspGrads,
    state: &mut OptimizerState,
    lr: f64,
) -> Result<()> {
    for (name, block) in grads.blocks() {
        if block.iter().any(|g| !g.is_finite()) {
            return Err(ClassifierError::NonFiniteGradient(name));
        }
    }
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    let mut offset = 0;
    let grad_blocks = [&grads.w, &grads.b, &grads.v, &grads.head_w, &grads.head_b];
    for (params, grad) in model.blocks_mut().into_iter().zip(grad_blocks) {
        for (i, (p, &g0)) in params.iter_mut().zip(grad.iter()).enumerate() {
            let g = g0 + state.weight_decay * *p;
            let k = offset + i;
            state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
            state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
            let m_hat = state.m[k] / bc1;
            let v_hat = state.v[k] / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
        offset += grad.len();
    }
    Ok(())
}

/// Linear warmup to the base rate, then reduce-on-plateau.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            base_lr: 0.001,
            warmup_epochs: 4,
            plateau_patience: 10,
            plateau_factor: 0.1,
            min_lr: 1e-6,
        }
    }
}

impl LrSchedule {
    /// Learning rate for 1-based `epoch` given the monitored metric history
    /// (`metric_history[i]` is the dev loss recorded after epoch `i+1`).
    ///
    /// Epochs 1..=warmup ramp linearly to `base_lr`. From the first epoch
    /// after warmup the plateau rule replays the history: each non-improving
    /// epoch increments a counter, and once it reaches `plateau_patience`
    /// the rate is multiplied by `plateau_factor` (floored at `min_lr`).
    pub fn lr_for_epoch(&self, epoch: usize, metric_history: &[f64]) -> f64 {
        assert!(epoch >= 1, "epochs are 1-based");
        if epoch <= self.warmup_epochs {
            return self.base_lr * epoch as f64 / self.warmup_epochs as f64;
        }
        let mut lr = self.base_lr;
        let mut best = f64::INFINITY;
        let mut bad = 0;
        for e in self.warmup_epochs + 1..epoch {
            let Some(&metric) = metric_history.get(e - 1) else {
                break;
            };
            if metric < best {
                best = metric;
                bad = 0;
            } else {
                bad += 1;
                if bad >= self.plateau_patience {
                    lr = (lr * self.plateau_factor).max(self.min_lr);
                    bad = 0;
                }
            }
        }
        lr
    }
}

/// Desk-scale training defaults; the paper-scale preset (batch 400, 100
/// epochs) is selected through configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction carved out as a dev split when the caller has none.
    pub dev_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 64, epochs: 30, seed: 1, dev_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub dev_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev loss.
    pub model: AspModel,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
}

/// Train with seeded shuffling and per-epoch dev evaluation driving the
/// schedule; returns the best-dev-loss snapshot.
pub fn train(
    train_set: &[(FbankMatrix, Label)],
    dev_set: &[(FbankMatrix, Label)],
    cfg: &TrainConfig,
    schedule: &LrSchedule,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let has_bona = train_set.iter().any(|(_, l)| *l == Label::Bonafide);
    let has_spoof = train_set.iter().any(|(_, l)| *l == Label::Spoof);
    if !has_bona || !has_spoof {
        return Err(ClassifierError::SingleClass);
    }
    let feat_dim = train_set[0].0.rows;
    for (feats, _) in train_set.iter().chain(dev_set) {
        if feats.rows != feat_dim {
            return Err(ClassifierError::DimMismatch { expected: feat_dim, got: feats.rows });
        }
    }

    let mut model = AspModel::init(feat_dim, ATTN_DIM, cfg.seed);
    let mut state = OptimizerState::new(&model);
    let mut rng = rng_from_seed(crate::rng::derive_seed(cfg.seed, 0x7368_7566, 0));
    let mut indices: Vec<usize> = (0..train_set.len()).collect();

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut dev_history: Vec<f64> = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_model = model.clone();

    for epoch in 1..=cfg.epochs {
        let lr = schedule.lr_for_epoch(epoch, &dev_history);
        indices.shuffle(&mut rng);
        let mut train_loss = 0.0;
        let mut seen = 0usize;
        for chunk in indices.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<(&FbankMatrix, Label)> =
                chunk.iter().map(|&i| (&train_set[i].0, train_set[i].1)).collect();
            let (loss, grads) = backward(&batch, &model)?;
            adam_step(&mut model, &grads, &mut state, lr)?;
            train_loss += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        train_loss /= seen.max(1) as f64;

        let dev_loss = if dev_set.is_empty() {
            train_loss
        } else {
            let batch: Vec<(&FbankMatrix, Label)> =
                dev_set.iter().map(|(f, l)| (f, *l)).collect();
            forward_loss(&batch, &model)?.0
        };
        dev_history.push(dev_loss);
        if dev_loss < best {
            best = dev_loss;
            best_epoch = epoch;
            best_model = model.clone();
        }
        log.push(EpochLog { epoch, lr, train_loss, dev_loss });
    }

    Ok(TrainOutcome { model: best_model, log, best_epoch })
}

/// Detection score: bonafide logit minus spoof logit.
pub fn score(model: &AspModel, features: &FbankMatrix) -> Result<f64> {
    check_dims(model, features)?;
    let mut ws = Workspace::new();
    let z = forward(model, features, &mut ws);
    Ok(z[1] - z[0])
}

/// Serialize: magic `ASP1`, u32 feat_dim, u32 attn_dim, f64 payload in the
/// order w, b, v, head_w, head_b.
pub fn write_model(model: &AspModel, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(b"ASP1")?;
    f.write_u32::<LittleEndian>(model.feat_dim as u32)?;
    f.write_u32::<LittleEndian>(model.attn_dim as u32)?;
    for block in model.blocks() {
        for &x in block {
            f.write_f64::<LittleEndian>(x)?;
        }
    }
    Ok(())
}

/// Read a model written by [`write_model`].
pub fn read_model(path: &Path) -> Result<AspModel> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != b"ASP1" {
        return Err(ClassifierError::BadMagic(path.display().to_string()));
    }
    let feat_dim = f.read_u32::<LittleEndian>()? as usize;
    let attn_dim = f.read_u32::<LittleEndian>()? as usize;
    let mut model = AspModel {
        feat_dim,
        attn_dim,
        w: vec![0.0; attn_dim * feat_dim],
        b: vec![0.0; attn_dim],
        v: vec![0.0; attn_dim],
        head_w: vec![0.0; 2 * 2 * feat_dim],
        head_b: vec![0.0; 2],
    };
    for block in model.blocks_mut() {
        for x in block.iter_mut() {
            *x = f.read_f64::<LittleEndian>()?;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FrameMeta;

    fn feats_from(rows: usize, cols: usize, values: Vec<f64>) -> FbankMatrix {
        FbankMatrix::new(values, rows, cols, FrameMeta::default())
    }

    fn random_feats(rows: usize, cols: usize, seed: u64) -> FbankMatrix {
        let mut rng = rng_from_seed(seed);
        feats_from(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect())
    }

    /// Gaussian-ish toy set: bonafide frames near +1, spoof near -1.
    fn toy_set(n: usize, rows: usize, cols: usize, seed: u64) -> Vec<(FbankMatrix, Label)> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { Label::Bonafide } else { Label::Spoof };
                let center = if label == Label::Bonafide { 1.0 } else { -1.0 };
                let values =
                    (0..rows * cols).map(|_| center + 0.1 * rng.gen_range(-1.0..1.0)).collect();
                (feats_from(rows, cols, values), label)
            })
            .collect()
    }

    #[test]
    fn pool_constant_frames_collapse_to_clamped_sigma() {
        let model = AspModel::init(4, 8, 1);
        let h = [0.3, -1.2, 0.0, 2.5];
        let mut values = Vec::new();
        for &x in &h {
            values.extend(std::iter::repeat(x).take(10));
        }
        let feats = feats_from(4, 10, values);
        let pooled = asp_pool(&feats, &model).unwrap();
        for d in 0..4 {
            assert!((pooled[d] - h[d]).abs() < 1e-12, "mean {d}");
            assert!((pooled[4 + d] - VAR_CLAMP.sqrt()).abs() < 1e-9, "sigma {d}");
        }
    }

    #[test]
    fn pool_zero_attention_params_give_uniform_weights() {
        let mut model = AspModel::init(3, 6, 2);
        model.w.iter_mut().for_each(|x| *x = 0.0);
        model.b.iter_mut().for_each(|x| *x = 0.0);
        let feats = random_feats(3, 20, 3);
        let pooled = asp_pool(&feats, &model).unwrap();
        for d in 0..3 {
            let row = feats.row(d);
            let mean: f64 = row.iter().sum::<f64>() / 20.0;
            let var: f64 = row.iter().map(|x| x * x).sum::<f64>() / 20.0 - mean * mean;
            assert!((pooled[d] - mean).abs() < 1e-12);
            assert!((pooled[3 + d] - var.max(VAR_CLAMP).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_and_score_are_permutation_invariant() {
        let model = AspModel::init(5, 7, 4);
        let feats = random_feats(5, 31, 5);
        let pooled = asp_pool(&feats, &model).unwrap();
        let s = score(&model, &feats).unwrap();

        let mut perm: Vec<usize> = (0..31).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng_from_seed(6));
        let mut values = vec![0.0; 5 * 31];
        for r in 0..5 {
            for (c_new, &c_old) in perm.iter().enumerate() {
                values[r * 31 + c_new] = feats.at(r, c_old);
            }
        }
        let shuffled = feats_from(5, 31, values);
        let pooled2 = asp_pool(&shuffled, &model).unwrap();
        let s2 = score(&model, &shuffled).unwrap();
        for (a, b) in pooled.iter().zip(&pooled2) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((s - s2).abs() < 1e-12);
    }

    #[test]
    fn attention_weights_sum_to_one_and_are_positive() {
        let model = AspModel::init(4, 8, 7);
        let feats = random_feats(4, 25, 8);
        let mut ws = Workspace::new();
        forward(&model, &feats, &mut ws);
        let sum: f64 = ws.alpha.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(ws.alpha.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn loss_at_zero_head_is_ln2_and_saturated_loss_vanishes() {
        let mut model = AspModel::init(4, 8, 9);
        model.head_w.iter_mut().for_each(|x| *x = 0.0);
        model.head_b.iter_mut().for_each(|x| *x = 0.0);
        let feats = random_feats(4, 12, 10);
        let (loss, logits) = forward_loss(&[(&feats, Label::Bonafide)], &model).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15, "loss {loss}");
        assert_eq!(logits[0], [0.0, 0.0]);

        // saturated logits via a bias-only head
        model.head_b = vec![-100.0, 100.0];
        let (loss, _) = forward_loss(&[(&feats, Label::Bonafide)], &model).unwrap();
        assert!(loss < 1e-8, "saturated loss {loss}");
        let (loss, _) = forward_loss(&[(&feats, Label::Spoof)], &model).unwrap();
        assert!(loss > 100.0, "wrong-class saturated loss {loss}");
    }

    #[test]
    fn loss_is_never_negative() {
        for seed in 0..5 {
            let model = AspModel::init(3, 5, seed);
            let feats = random_feats(3, 9, seed + 100);
            for label in [Label::Bonafide, Label::Spoof] {
                let (loss, _) = forward_loss(&[(&feats, label)], &model).unwrap();
                assert!(loss >= 0.0);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let step = 1e-5;
        for seed in 0..5u64 {
            let mut model = AspModel::init(6, 5, seed);
            let batch_feats: Vec<FbankMatrix> =
                (0..4).map(|i| random_feats(6, 7 + i, seed * 10 + i as u64)).collect();
            let labels = [Label::Bonafide, Label::Spoof, Label::Spoof, Label::Bonafide];
            let batch: Vec<(&FbankMatrix, Label)> =
                batch_feats.iter().zip(labels).map(|(f, l)| (f, l)).collect();
            let (_, grads) = backward(&batch, &model).unwrap();

            let grad_blocks: Vec<Vec<f64>> = grads
                .blocks()
                .iter()
                .map(|(_, b)| (*b).clone())
                .collect();
            for (bi, block) in grad_blocks.iter().enumerate() {
                for pi in 0..block.len() {
                    let orig = model.blocks()[bi][pi];
                    model.blocks_mut()[bi][pi] = orig + step;
                    let (up, _) = forward_loss(&batch, &model).unwrap();
                    model.blocks_mut()[bi][pi] = orig - step;
                    let (down, _) = forward_loss(&batch, &model).unwrap();
                    model.blocks_mut()[bi][pi] = orig;
                    let fd = (up - down) / (2.0 * step);
                    let analytic = block[pi];
                    let denom = fd.abs().max(analytic.abs()).max(1e-6);
                    let rel = (fd - analytic).abs() / denom;
                    assert!(
                        rel < 1e-4,
                        "seed {seed} block {bi} param {pi}: fd {fd} vs {analytic} (rel {rel})"
                    );
                }
            }
        }
    }

    #[test]
    fn gradients_symmetric_for_head_classes() {
        // softmax CE pushes the two head rows in opposite directions
        let model = AspModel::init(4, 6, 11);
        let feats = random_feats(4, 10, 12);
        let (_, grads) = backward(&[(&feats, Label::Bonafide)], &model).unwrap();
        for d in 0..8 {
            let g0 = grads.head_w[d];
            let g1 = grads.head_w[8 + d];
            assert!((g0 + g1).abs() < 1e-12, "head rows not antisymmetric at {d}");
        }
        assert!((grads.head_b[0] + grads.head_b[1]).abs() < 1e-12);
        // the wrong-class bias gradient has the opposite sign of the
        // right-class one
        assert!(grads.head_b[0] > 0.0 && grads.head_b[1] < 0.0);
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut model = AspModel::init(3, 4, 13);
        let before = model.clone();
        let grads = AspGrads::zeros_like(&model);
        let mut state = OptimizerState::new(&model);
        state.weight_decay = 0.0;
        adam_step(&mut model, &grads, &mut state, 0.001).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn adam_first_step_moves_by_about_lr() {
        let mut model = AspModel::init(3, 4, 14);
        let before = model.clone();
        let mut grads = AspGrads::zeros_like(&model);
        let mut rng = rng_from_seed(15);
        for block in [&mut grads.w, &mut grads.b, &mut grads.v, &mut grads.head_w, &mut grads.head_b]
        {
            for g in block.iter_mut() {
                *g = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            }
        }
        let mut state = OptimizerState::new(&model);
        state.weight_decay = 0.0;
        let lr = 0.01;
        adam_step(&mut model, &grads, &mut state, lr).unwrap();
        for (after, beforev) in model.blocks().iter().zip(before.blocks()) {
            for (a, b) in after.iter().zip(beforev.iter()) {
                let delta = (a - b).abs();
                assert!(delta <= lr * (1.0 + 1e-6), "step {delta} exceeds lr");
                assert!(delta >= lr * 0.99, "step {delta} much below lr");
            }
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut model = AspModel::init(3, 4, 16);
        let mut grads = AspGrads::zeros_like(&model);
        grads.v[0] = f64::NAN;
        let mut state = OptimizerState::new(&model);
        assert!(matches!(
            adam_step(&mut model, &grads, &mut state, 0.001),
            Err(ClassifierError::NonFiniteGradient("v"))
        ));
    }

    #[test]
    fn lr_schedule_warmup_and_plateau_trace() {
        let sched = LrSchedule::default();
        assert!((sched.lr_for_epoch(1, &[]) - 0.00025).abs() < 1e-15);
        assert!((sched.lr_for_epoch(2, &[]) - 0.0005).abs() < 1e-15);
        assert!((sched.lr_for_epoch(4, &[]) - 0.001).abs() < 1e-15);
        assert!((sched.lr_for_epoch(5, &[]) - 0.001).abs() < 1e-15);

        // best at epoch 5, then ten non-improving epochs: the drop shows at
        // the eleventh epoch after the plateau started (epoch 16)
        let mut history = vec![1.0, 0.9, 0.8, 0.7, 0.5];
        history.extend(std::iter::repeat(0.6).take(10)); // epochs 6..=15
        assert!((sched.lr_for_epoch(15, &history) - 0.001).abs() < 1e-15);
        assert!((sched.lr_for_epoch(16, &history) - 0.0001).abs() < 1e-15);

        // the floor holds
        let mut long = vec![0.5];
        long.extend(std::iter::repeat(0.6).take(200));
        let lr = sched.lr_for_epoch(200, &long);
        assert!(lr >= sched.min_lr);
    }

    #[test]
    fn lr_schedule_non_increasing_after_warmup() {
        let sched = LrSchedule::default();
        let mut rng = rng_from_seed(17);
        let history: Vec<f64> = (0..60).map(|_| rng.gen_range(0.1..1.0)).collect();
        let mut prev = f64::INFINITY;
        for epoch in 5..=60 {
            let lr = sched.lr_for_epoch(epoch, &history[..epoch - 1]);
            assert!(lr <= prev + 1e-18, "lr rose at epoch {epoch}");
            prev = lr;
        }
    }

    #[test]
    fn training_separates_toy_classes() {
        let all = toy_set(200, 8, 12, 18);
        let (dev, train_split) = all.split_at(40);
        let cfg = TrainConfig { batch_size: 16, epochs: 30, seed: 1, dev_fraction: 0.2 };
        let out = train(train_split, dev, &cfg, &LrSchedule::default()).unwrap();
        let mut correct = 0;
        for (feats, label) in dev {
            let s = score(&out.model, feats).unwrap();
            let predicted = if s > 0.0 { Label::Bonafide } else { Label::Spoof };
            if predicted == *label {
                correct += 1;
            }
        }
        let acc = correct as f64 / dev.len() as f64;
        assert!(acc >= 0.99, "dev accuracy {acc}");
        assert!(out.log.last().unwrap().dev_loss < std::f64::consts::LN_2);
        // mean bonafide score above mean spoof score
        let mut bona = 0.0;
        let mut spoof = 0.0;
        for (feats, label) in dev {
            let s = score(&out.model, feats).unwrap();
            if *label == Label::Bonafide {
                bona += s;
            } else {
                spoof += s;
            }
        }
        assert!(bona / 20.0 > spoof / 20.0);
    }

    #[test]
    fn training_loss_decreases_early_for_three_seeds() {
        for seed in [1, 2, 3] {
            let all = toy_set(80, 6, 10, 100 + seed);
            let (dev, train_split) = all.split_at(16);
            let cfg = TrainConfig { batch_size: 16, epochs: 5, seed, dev_fraction: 0.2 };
            let out = train(train_split, dev, &cfg, &LrSchedule::default()).unwrap();
            assert!(
                out.log[4].train_loss < out.log[0].train_loss,
                "seed {seed}: {} -> {}",
                out.log[0].train_loss,
                out.log[4].train_loss
            );
        }
    }

    #[test]
    fn training_is_bit_deterministic_and_log_matches_schedule() {
        let all = toy_set(60, 5, 9, 19);
        let (dev, train_split) = all.split_at(12);
        let cfg = TrainConfig { batch_size: 8, epochs: 8, seed: 7, dev_fraction: 0.2 };
        let sched = LrSchedule::default();
        let a = train(train_split, dev, &cfg, &sched).unwrap();
        let b = train(train_split, dev, &cfg, &sched).unwrap();
        for (x, y) in a.model.blocks().iter().zip(b.model.blocks()) {
            let bits_x: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            let bits_y: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_x, bits_y);
        }
        assert_eq!(a.log.len(), b.log.len());
        for (la, lb) in a.log.iter().zip(&b.log) {
            assert_eq!(la, lb);
        }
        // the logged lr replays from the logged dev losses
        let history: Vec<f64> = a.log.iter().map(|l| l.dev_loss).collect();
        for entry in &a.log {
            let lr = sched.lr_for_epoch(entry.epoch, &history[..entry.epoch - 1]);
            assert_eq!(lr, entry.lr, "epoch {}", entry.epoch);
        }
    }

    #[test]
    fn training_rejects_single_class_and_dim_mismatch() {
        let mut set = toy_set(10, 4, 6, 20);
        set.retain(|(_, l)| *l == Label::Bonafide);
        let cfg = TrainConfig::default();
        assert!(matches!(
            train(&set, &[], &cfg, &LrSchedule::default()),
            Err(ClassifierError::SingleClass)
        ));
        let model = AspModel::init(4, 8, 1);
        let wrong = random_feats(6, 5, 21);
        assert!(matches!(
            score(&model, &wrong),
            Err(ClassifierError::DimMismatch { expected: 4, got: 6 })
        ));
    }

    #[test]
    fn zero_head_scores_zero() {
        let mut model = AspModel::init(4, 8, 22);
        model.head_w.iter_mut().for_each(|x| *x = 0.0);
        model.head_b.iter_mut().for_each(|x| *x = 0.0);
        let feats = random_feats(4, 10, 23);
        assert_eq!(score(&model, &feats).unwrap(), 0.0);
    }

    #[test]
    fn model_serialization_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.asp");
        let model = AspModel::init(12, 16, 24);
        write_model(&model, &path).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(model, back);
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(read_model(&path), Err(ClassifierError::BadMagic(_))));
    }
}
