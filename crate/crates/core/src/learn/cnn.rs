//! A small convolutional classifier with hand-written backpropagation.
//!
//! Layout: conv 3x3 (pad 1) + ReLU, maxpool 2x2, conv 3x3 (pad 1) + ReLU,
//! maxpool 2x2, flatten, dense + ReLU, dense + softmax.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::TrainConfig;
use super::{Classifier, Example, FeatureVector};
use crate::error::{domain, format, Result};
use crate::format::{read_file, u32_len, write_file, ByteReader, ByteWriter, VERSION};
use crate::num::Real;

pub const CNN_MAGIC: &[u8; 4] = b"MWNN";
const KERNEL: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArchitecture {
    /// Side of the square single-channel input; must be divisible by 4.
    pub input_side: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub hidden: usize,
    pub n_classes: usize,
}

impl CnnArchitecture {
    pub fn new(input_side: usize, n_classes: usize) -> Self {
        Self { input_side, conv1_filters: 8, conv2_filters: 16, hidden: 64, n_classes }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_side == 0 || !self.input_side.is_multiple_of(4) {
            return Err(domain(format!("input side {} must be a positive multiple of 4", self.input_side)));
        }
        if self.conv1_filters == 0 || self.conv2_filters == 0 || self.hidden == 0 || self.n_classes < 2 {
            return Err(domain("layer widths must be positive and there must be at least two classes"));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.input_side * self.input_side
    }

    pub fn flat_len(&self) -> usize {
        let s = self.input_side / 4;
        self.conv2_filters * s * s
    }
}

/// 3x3, stride 1, zero-padding 1. Weights laid out `[out][in][ky][kx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T: Real = f64> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self { in_channels, out_channels, weights: vec![T::zero(); out_channels * in_channels * KERNEL * KERNEL], bias: vec![T::zero(); out_channels] }
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * KERNEL + ky) * KERNEL + kx
    }

    fn forward(&self, input: &[T], side: usize) -> Vec<T> {
        let plane = side * side;
        let mut out = vec![T::zero(); self.out_channels * plane];
        for o in 0..self.out_channels {
            let dst = &mut out[o * plane..(o + 1) * plane];
            dst.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.in_channels {
                let src = &input[i * plane..(i + 1) * plane];
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let w = self.weights[self.w(o, i, ky, kx)];
                        for y in 0..side {
                            let sy = y + ky;
                            if sy < 1 || sy > side {
                                continue;
                            }
                            let src_row = &src[(sy - 1) * side..sy * side];
                            let dst_row = &mut dst[y * side..(y + 1) * side];
                            // x + kx - 1 must fall inside [0, side).
                            let x_lo = 1usize.saturating_sub(kx);
                            let x_hi = (side + 1 - kx).min(side);
                            for x in x_lo..x_hi {
                                dst_row[x] += w * src_row[x + kx - 1];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and, if asked, the input gradient into `d_input`.
    fn backward(&self, input: &[T], side: usize, d_out: &[T], grad: &mut Conv2d<T>, mut d_input: Option<&mut [T]>) {
        let plane = side * side;
        for o in 0..self.out_channels {
            let g = &d_out[o * plane..(o + 1) * plane];
            grad.bias[o] += g.iter().fold(T::zero(), |a, v| a + *v);
            for i in 0..self.in_channels {
                let src = &input[i * plane..(i + 1) * plane];
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let widx = self.w(o, i, ky, kx);
                        let w = self.weights[widx];
                        let mut acc = T::zero();
                        let x_lo = 1usize.saturating_sub(kx);
                        let x_hi = (side + 1 - kx).min(side);
                        for y in 0..side {
                            let sy = y + ky;
                            if sy < 1 || sy > side {
                                continue;
                            }
                            let g_row = &g[y * side..(y + 1) * side];
                            let row = (sy - 1) * side;
                            for x in x_lo..x_hi {
                                acc += g_row[x] * src[row + x + kx - 1];
                            }
                            if let Some(d_in) = d_input.as_deref_mut() {
                                let d_row = &mut d_in[i * plane + row..i * plane + row + side];
                                for x in x_lo..x_hi {
                                    d_row[x + kx - 1] += w * g_row[x];
                                }
                            }
                        }
                        grad.weights[widx] += acc;
                    }
                }
            }
        }
    }
}

/// Fully connected layer, weights `[out][in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T: Real = f64> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![T::zero(); inputs * outputs], bias: vec![T::zero(); outputs] }
    }

    fn forward(&self, x: &[T]) -> Vec<T> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                row.iter().zip(x).fold(self.bias[o], |a, (w, v)| a + *w * *v)
            })
            .collect()
    }

    fn backward(&self, x: &[T], d_out: &[T], grad: &mut Dense<T>) -> Vec<T> {
        let mut d_in = vec![T::zero(); self.inputs];
        for o in 0..self.outputs {
            let g = d_out[o];
            grad.bias[o] += g;
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let g_row = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            for j in 0..self.inputs {
                g_row[j] += g * x[j];
                d_in[j] += g * row[j];
            }
        }
        d_in
    }
}

/// All trainable parameters. Gradients and optimizer moments use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnParams<T: Real = f64> {
    pub conv1: Conv2d<T>,
    pub conv2: Conv2d<T>,
    pub dense1: Dense<T>,
    pub dense2: Dense<T>,
}

pub const BLOCK_NAMES: [&str; 8] =
    ["conv1.weights", "conv1.bias", "conv2.weights", "conv2.bias", "dense1.weights", "dense1.bias", "dense2.weights", "dense2.bias"];

impl<T: Real> CnnParams<T> {
    pub fn zeros(arch: &CnnArchitecture) -> Self {
        Self {
            conv1: Conv2d::zeros(1, arch.conv1_filters),
            conv2: Conv2d::zeros(arch.conv1_filters, arch.conv2_filters),
            dense1: Dense::zeros(arch.flat_len(), arch.hidden),
            dense2: Dense::zeros(arch.hidden, arch.n_classes),
        }
    }

    /// Parameter blocks in [`BLOCK_NAMES`] order.
    pub fn blocks(&self) -> [&[T]; 8] {
        [
            &self.conv1.weights,
            &self.conv1.bias,
            &self.conv2.weights,
            &self.conv2.bias,
            &self.dense1.weights,
            &self.dense1.bias,
            &self.dense2.weights,
            &self.dense2.bias,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [T]; 8] {
        [
            &mut self.conv1.weights,
            &mut self.conv1.bias,
            &mut self.conv2.weights,
            &mut self.conv2.bias,
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.dense2.weights,
            &mut self.dense2.bias,
        ]
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// `self += other * scale`, block by block.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s * scale;
            }
        }
    }
}

/// Softmax probabilities and the cross-entropy of `label`, computed via log-sum-exp.
pub fn softmax_cross_entropy<T: Real>(logits: &[T], label: usize) -> (Vec<T>, T) {
    let m = logits.iter().copied().fold(logits[0], |a, b| a.max(b));
    let exps: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |a, b| a + *b);
    let probs: Vec<T> = exps.iter().map(|&e| e / sum).collect();
    let loss = m + sum.ln() - logits[label];
    (probs, loss)
}

fn relu<T: Real>(v: &[T]) -> Vec<T> {
    v.iter().map(|&x| if x > T::zero() { x } else { T::zero() }).collect()
}

/// 2x2 max pooling; the first maximum in row-major window order wins ties.
fn max_pool<T: Real>(input: &[T], channels: usize, side: usize) -> (Vec<T>, Vec<usize>) {
    let half = side / 2;
    let mut out = Vec::with_capacity(channels * half * half);
    let mut idx = Vec::with_capacity(channels * half * half);
    for c in 0..channels {
        let base = c * side * side;
        for y in 0..half {
            for x in 0..half {
                let mut best = base + 2 * y * side + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let j = base + (2 * y + dy) * side + 2 * x + dx;
                    if input[j] > input[best] {
                        best = j;
                    }
                }
                out.push(input[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}

/// Activations retained for the backward pass.
struct Trace<T: Real> {
    input: Vec<T>,
    pre1: Vec<T>,
    pool1: Vec<T>,
    pool1_idx: Vec<usize>,
    pre2: Vec<T>,
    pool2_idx: Vec<usize>,
    flat: Vec<T>,
    pre_hidden: Vec<T>,
    hidden: Vec<T>,
    logits: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel<T: Real = f64> {
    pub arch: CnnArchitecture,
    pub params: CnnParams<T>,
    pub seed: u64,
    /// Settings of the training run that produced these weights, if any.
    pub train_config: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct CnnTrailer {
    architecture: CnnArchitecture,
    seed: u64,
    train_config: Option<TrainConfig>,
}

impl<T: Real> CnnModel<T> {
    /// Uniform He-style initialization `U(-sqrt(6 / fan_in), +sqrt(6 / fan_in))`, zero biases.
    pub fn new(arch: CnnArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut params = CnnParams::zeros(&arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fan_ins = [KERNEL * KERNEL, arch.conv1_filters * KERNEL * KERNEL, arch.flat_len(), arch.hidden];
        let weight_blocks = {
            let p = &mut params;
            [&mut p.conv1.weights, &mut p.conv2.weights, &mut p.dense1.weights, &mut p.dense2.weights]
        };
        for (block, fan_in) in weight_blocks.into_iter().zip(fan_ins) {
            let bound = (6.0 / fan_in as f64).sqrt();
            for w in block.iter_mut() {
                *w = T::of(rng.random_range(-bound..bound));
            }
        }
        Ok(Self { arch, params, seed, train_config: None })
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.arch.input_len() {
            return Err(domain(format!(
                "input has {} values, model expects {}x{}",
                input.len(),
                self.arch.input_side,
                self.arch.input_side
            )));
        }
        Ok(())
    }

    fn trace(&self, input: &[T]) -> Trace<T> {
        let side = self.arch.input_side;
        let p = &self.params;
        let pre1 = p.conv1.forward(input, side);
        let (pool1, pool1_idx) = max_pool(&relu(&pre1), self.arch.conv1_filters, side);
        let pre2 = p.conv2.forward(&pool1, side / 2);
        let (flat, pool2_idx) = max_pool(&relu(&pre2), self.arch.conv2_filters, side / 2);
        let pre_hidden = p.dense1.forward(&flat);
        let hidden = relu(&pre_hidden);
        let logits = p.dense2.forward(&hidden);
        Trace { input: input.to_vec(), pre1, pool1, pool1_idx, pre2, pool2_idx, flat, pre_hidden, hidden, logits }
    }

    pub fn logits(&self, input: &[T]) -> Result<Vec<T>> {
        self.check_input(input)?;
        Ok(self.trace(input).logits)
    }

    /// ReLU on/off states and max-pool winners for one image.
    ///
    /// Parameter settings that give an input the same pattern lie in one
    /// piecewise-smooth region of the network.
    pub fn activation_pattern(&self, input: &[T]) -> Result<Vec<usize>> {
        self.check_input(input)?;
        let t = self.trace(input);
        let on = |v: &Vec<T>| v.iter().map(|x| usize::from(*x > T::zero())).collect::<Vec<_>>();
        Ok([on(&t.pre1), t.pool1_idx, on(&t.pre2), t.pool2_idx, on(&t.pre_hidden)].concat())
    }

    /// Class probabilities for one image.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let logits = self.logits(input)?;
        Ok(softmax_cross_entropy(&logits, 0).0)
    }

    pub fn predict(&self, input: &FeatureVector<T>) -> Result<usize> {
        let probs = self.forward(&input.values)?;
        let mut best = 0;
        for (c, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = c;
            }
        }
        Ok(best)
    }

    /// Per-sample loss and gradients, both unscaled.
    fn sample_grads(&self, input: &[T], label: usize) -> Result<(T, CnnParams<T>)> {
        self.check_input(input)?;
        if label >= self.arch.n_classes {
            return Err(domain(format!("label {label} out of range for {} classes", self.arch.n_classes)));
        }
        let side = self.arch.input_side;
        let p = &self.params;
        let t = self.trace(input);
        let (probs, loss) = softmax_cross_entropy(&t.logits, label);
        let mut grads = CnnParams::zeros(&self.arch);

        let mut d_logits = probs;
        d_logits[label] -= T::one();
        let mut d_hidden = p.dense2.backward(&t.hidden, &d_logits, &mut grads.dense2);
        for (d, pre) in d_hidden.iter_mut().zip(&t.pre_hidden) {
            if *pre <= T::zero() {
                *d = T::zero();
            }
        }
        let d_flat = p.dense1.backward(&t.flat, &d_hidden, &mut grads.dense1);

        let mut d_pre2 = vec![T::zero(); t.pre2.len()];
        for (g, &j) in d_flat.iter().zip(&t.pool2_idx) {
            if t.pre2[j] > T::zero() {
                d_pre2[j] += *g;
            }
        }
        let mut d_pool1 = vec![T::zero(); t.pool1.len()];
        p.conv2.backward(&t.pool1, side / 2, &d_pre2, &mut grads.conv2, Some(&mut d_pool1));

        let mut d_pre1 = vec![T::zero(); t.pre1.len()];
        for (g, &j) in d_pool1.iter().zip(&t.pool1_idx) {
            if t.pre1[j] > T::zero() {
                d_pre1[j] += *g;
            }
        }
        p.conv1.backward(&t.input, side, &d_pre1, &mut grads.conv1, None);
        Ok((loss, grads))
    }

    /// Mean cross-entropy over the batch and its gradient with respect to every parameter.
    pub fn loss_and_grads(&self, batch: &[&Example<T>]) -> Result<(T, CnnParams<T>)> {
        if batch.is_empty() {
            return Err(domain("loss over an empty batch"));
        }
        use rayon::prelude::*;
        let per_sample: Vec<Result<(T, CnnParams<T>)>> =
            batch.par_iter().map(|ex| self.sample_grads(&ex.input.values, ex.label)).collect();
        let scale = T::one() / T::of_usize(batch.len());
        let mut total = CnnParams::zeros(&self.arch);
        let mut loss = T::zero();
        // Fixed-order reduction keeps results independent of scheduling.
        for r in per_sample {
            let (l, g) = r?;
            loss += l;
            total.add_scaled(&g, scale);
        }
        Ok((loss * scale, total))
    }

    /// Mean loss only.
    pub fn loss(&self, batch: &[&Example<T>]) -> Result<T> {
        if batch.is_empty() {
            return Err(domain("loss over an empty batch"));
        }
        let mut total = T::zero();
        for ex in batch {
            let logits = self.logits(&ex.input.values)?;
            if ex.label >= self.arch.n_classes {
                return Err(domain("label out of range"));
            }
            total += softmax_cross_entropy(&logits, ex.label).1;
        }
        Ok(total / T::of_usize(batch.len()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::new();
        w.magic(CNN_MAGIC).u16(VERSION).u32(u32_len(self.arch.n_classes, "C")?).u32(4);
        let p = &self.params;
        for conv in [&p.conv1, &p.conv2] {
            w.u8(0).u32(u32_len(conv.out_channels, "out")?).u32(u32_len(conv.in_channels, "in")?).u32(KERNEL as u32).u32(KERNEL as u32);
        }
        for dense in [&p.dense1, &p.dense2] {
            w.u8(1).u32(u32_len(dense.outputs, "out")?).u32(u32_len(dense.inputs, "in")?).u32(1).u32(1);
        }
        for block in [&p.conv1.weights, &p.conv1.bias, &p.conv2.weights, &p.conv2.bias, &p.dense1.weights, &p.dense1.bias, &p.dense2.weights, &p.dense2.bias] {
            for v in block.iter() {
                w.f64(v.as_f64());
            }
        }
        w.json(&CnnTrailer { architecture: self.arch, seed: self.seed, train_config: self.train_config })?;
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(CNN_MAGIC)?;
        r.expect_version()?;
        let n_classes = r.u32()? as usize;
        let n_layers = r.u32()? as usize;
        if n_layers != 4 {
            return Err(format(format!("expected 4 parameterized layers, found {n_layers}")));
        }
        let mut shapes = Vec::with_capacity(4);
        for _ in 0..4 {
            shapes.push((r.u8()?, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize));
        }
        // The trailer is needed to size the parameter block, so parse from the end.
        let body_start = 4 + 2 + 4 + 4 + 4 * 17;
        let n_params: usize = shapes.iter().map(|&(_, o, i, kh, kw)| o * i * kh * kw + o).sum();
        let trailer_start = body_start + n_params * 8;
        if bytes.len() < trailer_start {
            return Err(format("truncated parameter block"));
        }
        let trailer: CnnTrailer =
            serde_json::from_slice(&bytes[trailer_start..]).map_err(|e| format(format!("bad JSON trailer: {e}")))?;
        let arch = trailer.architecture;
        arch.validate()?;
        if arch.n_classes != n_classes {
            return Err(format("class count in header and trailer differ"));
        }
        let mut params = CnnParams::<T>::zeros(&arch);
        let expected = [
            (0u8, arch.conv1_filters, 1, KERNEL, KERNEL),
            (0, arch.conv2_filters, arch.conv1_filters, KERNEL, KERNEL),
            (1, arch.hidden, arch.flat_len(), 1, 1),
            (1, arch.n_classes, arch.hidden, 1, 1),
        ];
        if shapes != expected {
            return Err(format("layer shape table does not match the architecture"));
        }
        for block in params.blocks_mut() {
            let raw = r.f64s(block.len())?;
            for (d, s) in block.iter_mut().zip(raw) {
                *d = T::of(s);
            }
        }
        Ok(Self { arch, params, seed: trailer.seed, train_config: trailer.train_config })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path, &self.to_bytes()?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

impl<T: Real> Classifier<T> for CnnModel<T> {
    fn classify(&self, input: &FeatureVector<T>) -> Result<usize> {
        self.predict(input)
    }
}
