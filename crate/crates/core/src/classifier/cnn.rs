//! Sentence-level convolutional classifier: parallel convolution banks of
//! several widths over the token matrix, ReLU and 1-max pooling per filter,
//! then two affine layers with dropout and a softmax.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EmbeddingTable, EMBEDDING_DIM, POS_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub num_classes: usize,
    pub embedding_dim: usize,
    pub pos_dim: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            filter_widths: vec![2, 3, 4],
            filters_per_width: 30,
            hidden_dim: 45,
            dropout: 0.3,
            num_classes: 3,
            embedding_dim: EMBEDDING_DIM,
            pos_dim: POS_DIM,
        }
    }
}

impl CnnConfig {
    pub fn input_dim(&self) -> usize {
        self.embedding_dim + self.pos_dim
    }

    /// Width of the concatenated pooled vector (= first affine input).
    pub fn pooled_dim(&self) -> usize {
        self.filters_per_width * self.filter_widths.len()
    }

    pub fn max_filter_width(&self) -> usize {
        self.filter_widths.iter().copied().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("cnn config: {m}")));
        if self.filter_widths.is_empty() || self.filter_widths.contains(&0) {
            return bad("filter widths must be non-empty and positive");
        }
        if self.filters_per_width == 0 || self.hidden_dim == 0 || self.num_classes < 2 {
            return bad("layer sizes must be positive and num_classes >= 2");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

/// One filter bank: `filters` kernels of `width` rows by `input_dim` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBank {
    pub width: usize,
    /// `[filter][row][column]`, row-major.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub embedding: EmbeddingTable,
    pub conv: Vec<ConvBank>,
    /// `[hidden][pooled]`
    pub fc1_weight: Vec<f32>,
    pub fc1_bias: Vec<f32>,
    /// `[classes][hidden]`
    pub fc2_weight: Vec<f32>,
    pub fc2_bias: Vec<f32>,
}

/// Dropout is active only in training mode.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Per pooled unit: window start of the maximum and its pre-activation.
    argmax: Vec<(usize, f64)>,
    mask1: Vec<f64>,
    pooled_dropped: Vec<f64>,
    hidden_pre: Vec<f64>,
    mask2: Vec<f64>,
    hidden_dropped: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl ForwardCache {
    /// Max-pooled convolution features before dropout.
    pub fn pooled(&self) -> Vec<f64> {
        self.argmax.iter().map(|&(_, z)| z.max(0.0)).collect()
    }
}

/// Gradients in [`CnnModel::tensors`] order. Embedding rows are sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: BTreeMap<usize, Vec<f64>>,
    pub conv_weight: Vec<Vec<f64>>,
    pub conv_bias: Vec<Vec<f64>>,
    pub fc1_weight: Vec<f64>,
    pub fc1_bias: Vec<f64>,
    pub fc2_weight: Vec<f64>,
    pub fc2_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros(model: &CnnModel) -> Self {
        Gradients {
            embedding: BTreeMap::new(),
            conv_weight: model.conv.iter().map(|b| vec![0.0; b.weight.len()]).collect(),
            conv_bias: model.conv.iter().map(|b| vec![0.0; b.bias.len()]).collect(),
            fc1_weight: vec![0.0; model.fc1_weight.len()],
            fc1_bias: vec![0.0; model.fc1_bias.len()],
            fc2_weight: vec![0.0; model.fc2_weight.len()],
            fc2_bias: vec![0.0; model.fc2_bias.len()],
        }
    }

    pub fn scale(&mut self, factor: f64) {
        let all = self
            .embedding
            .values_mut()
            .chain(self.conv_weight.iter_mut())
            .chain(self.conv_bias.iter_mut())
            .chain([
                &mut self.fc1_weight,
                &mut self.fc1_bias,
                &mut self.fc2_weight,
                &mut self.fc2_bias,
            ]);
        for v in all {
            v.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn dot(w: &[f32], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-bound..bound) as f32).collect()
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl CnnModel {
    /// Fresh model around `embedding`, with affine and convolution weights
    /// drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn new(config: CnnConfig, embedding: EmbeddingTable, seed: u64) -> Result<Self> {
        config.validate()?;
        if embedding.dim() != config.embedding_dim {
            return Err(Error::Dimension {
                expected: config.embedding_dim,
                found: embedding.dim(),
                context: "embedding width".into(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.input_dim();
        let conv = config
            .filter_widths
            .iter()
            .map(|&w| {
                let bound = 1.0 / ((w * d) as f64).sqrt();
                ConvBank {
                    width: w,
                    weight: uniform(&mut rng, config.filters_per_width * w * d, bound),
                    bias: uniform(&mut rng, config.filters_per_width, bound),
                }
            })
            .collect();
        let pooled = config.pooled_dim();
        let b1 = 1.0 / (pooled as f64).sqrt();
        let b2 = 1.0 / (config.hidden_dim as f64).sqrt();
        Ok(CnnModel {
            fc1_weight: uniform(&mut rng, config.hidden_dim * pooled, b1),
            fc1_bias: uniform(&mut rng, config.hidden_dim, b1),
            fc2_weight: uniform(&mut rng, config.num_classes * config.hidden_dim, b2),
            fc2_bias: uniform(&mut rng, config.num_classes, b2),
            conv,
            embedding,
            config,
        })
    }

    /// Named tensors with shapes, in a fixed order shared by the optimizer
    /// and the checkpoint format.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let c = &self.config;
        let mut out = vec![(
            "embedding".to_string(),
            vec![self.embedding.rows(), self.embedding.dim()],
            self.embedding.data(),
        )];
        for bank in &self.conv {
            out.push((
                format!("conv{}.weight", bank.width),
                vec![c.filters_per_width, bank.width, c.input_dim()],
                &bank.weight[..],
            ));
            out.push((format!("conv{}.bias", bank.width), vec![c.filters_per_width], &bank.bias[..]));
        }
        out.push(("fc1.weight".into(), vec![c.hidden_dim, c.pooled_dim()], &self.fc1_weight[..]));
        out.push(("fc1.bias".into(), vec![c.hidden_dim], &self.fc1_bias[..]));
        out.push(("fc2.weight".into(), vec![c.num_classes, c.hidden_dim], &self.fc2_weight[..]));
        out.push(("fc2.bias".into(), vec![c.num_classes], &self.fc2_bias[..]));
        out
    }

    /// Mutable tensors in [`CnnModel::tensors`] order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = vec![self.embedding.data_mut()];
        for bank in &mut self.conv {
            out.push(&mut bank.weight[..]);
            out.push(&mut bank.bias[..]);
        }
        out.push(&mut self.fc1_weight[..]);
        out.push(&mut self.fc1_bias[..]);
        out.push(&mut self.fc2_weight[..]);
        out.push(&mut self.fc2_bias[..]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    fn check_input(&self, input: &Array2<f32>) -> Result<()> {
        let d = self.config.input_dim();
        if input.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                found: input.ncols(),
                context: "clause matrix width".into(),
            });
        }
        if input.nrows() < self.config.max_filter_width() {
            return Err(Error::Dimension {
                expected: self.config.max_filter_width(),
                found: input.nrows(),
                context: "clause matrix rows (minimum)".into(),
            });
        }
        Ok(())
    }

    /// Class probabilities for one clause matrix, dropout off.
    pub fn forward(&self, input: &Array2<f32>) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input, Mode::Eval)?.probabilities)
    }

    pub fn forward_cached(&self, input: &Array2<f32>, mode: Mode<'_>) -> Result<ForwardCache> {
        self.check_input(input)?;
        let input = input.as_standard_layout();
        let x = input.as_slice().expect("standard layout");
        let d = self.config.input_dim();
        let rows = input.nrows();
        let nf = self.config.filters_per_width;

        let mut argmax_pos = Vec::with_capacity(self.config.pooled_dim());
        let mut pooled = Vec::with_capacity(self.config.pooled_dim());
        for bank in &self.conv {
            let span = bank.width * d;
            for f in 0..nf {
                let kernel = &bank.weight[f * span..(f + 1) * span];
                let bias = f64::from(bank.bias[f]);
                let mut best = (0usize, f64::NEG_INFINITY);
                for t in 0..=rows - bank.width {
                    let z = bias + dot(kernel, &x[t * d..t * d + span]);
                    if z > best.1 {
                        best = (t, z);
                    }
                }
                argmax_pos.push(best);
                pooled.push(best.1.max(0.0));
            }
        }

        let (mask1, mask2) = match mode {
            Mode::Eval => (vec![1.0; pooled.len()], vec![1.0; self.config.hidden_dim]),
            Mode::Train(rng) => {
                let p = self.config.dropout;
                let keep = 1.0 / (1.0 - p);
                let mut draw = |n: usize| -> Vec<f64> {
                    (0..n)
                        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                        .collect()
                };
                let m1 = draw(pooled.len());
                let m2 = draw(self.config.hidden_dim);
                (m1, m2)
            }
        };
        let pooled_dropped: Vec<f64> = pooled.iter().zip(&mask1).map(|(a, m)| a * m).collect();

        let p_dim = pooled.len();
        let hidden_pre: Vec<f64> = (0..self.config.hidden_dim)
            .map(|j| {
                let row = &self.fc1_weight[j * p_dim..(j + 1) * p_dim];
                f64::from(self.fc1_bias[j])
                    + row.iter().zip(&pooled_dropped).map(|(&w, &h)| f64::from(w) * h).sum::<f64>()
            })
            .collect();
        let hidden_dropped: Vec<f64> = hidden_pre
            .iter()
            .zip(&mask2)
            .map(|(&u, m)| u.max(0.0) * m)
            .collect();
        let h_dim = hidden_dropped.len();
        let logits: Vec<f64> = (0..self.config.num_classes)
            .map(|c| {
                let row = &self.fc2_weight[c * h_dim..(c + 1) * h_dim];
                f64::from(self.fc2_bias[c])
                    + row.iter().zip(&hidden_dropped).map(|(&w, &h)| f64::from(w) * h).sum::<f64>()
            })
            .collect();

        Ok(ForwardCache {
            argmax: argmax_pos,
            mask1,
            pooled_dropped,
            hidden_pre,
            mask2,
            hidden_dropped,
            probabilities: softmax(&logits),
        })
    }

    /// Cross-entropy loss `-ln p[target]` of a cached forward pass.
    pub fn loss(cache: &ForwardCache, target: usize) -> f64 {
        -cache.probabilities[target].max(f64::MIN_POSITIVE).ln()
    }

    /// Gradients of the cross-entropy loss for one example. `token_ids` maps
    /// the leading input rows to embedding rows; pad rows carry no gradient.
    pub fn backward(
        &self,
        input: &Array2<f32>,
        cache: &ForwardCache,
        target: usize,
        token_ids: &[usize],
    ) -> Gradients {
        let mut grads = Gradients::zeros(self);
        self.backward_into(input, cache, target, token_ids, &mut grads);
        grads
    }

    /// Adds one example's gradients into `grads`.
    pub fn backward_into(
        &self,
        input: &Array2<f32>,
        cache: &ForwardCache,
        target: usize,
        token_ids: &[usize],
        grads: &mut Gradients,
    ) {
        let input = input.as_standard_layout();
        let x = input.as_slice().expect("standard layout");
        let d = self.config.input_dim();
        let h_dim = self.config.hidden_dim;
        let p_dim = self.config.pooled_dim();

        let mut d_logits = cache.probabilities.clone();
        d_logits[target] -= 1.0;

        let mut d_hidden = vec![0.0; h_dim];
        for (c, &g) in d_logits.iter().enumerate() {
            grads.fc2_bias[c] += g;
            let row = &self.fc2_weight[c * h_dim..(c + 1) * h_dim];
            let grow = &mut grads.fc2_weight[c * h_dim..(c + 1) * h_dim];
            for j in 0..h_dim {
                grow[j] += g * cache.hidden_dropped[j];
                d_hidden[j] += g * f64::from(row[j]);
            }
        }
        for j in 0..h_dim {
            let relu = if cache.hidden_pre[j] > 0.0 { 1.0 } else { 0.0 };
            d_hidden[j] *= cache.mask2[j] * relu;
        }

        let mut d_pooled = vec![0.0; p_dim];
        for (j, &g) in d_hidden.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads.fc1_bias[j] += g;
            let row = &self.fc1_weight[j * p_dim..(j + 1) * p_dim];
            let grow = &mut grads.fc1_weight[j * p_dim..(j + 1) * p_dim];
            for k in 0..p_dim {
                grow[k] += g * cache.pooled_dropped[k];
                d_pooled[k] += g * f64::from(row[k]);
            }
        }

        let emb_dim = self.config.embedding_dim;
        let mut d_input: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let nf = self.config.filters_per_width;
        for (b, bank) in self.conv.iter().enumerate() {
            let span = bank.width * d;
            for f in 0..nf {
                let unit = b * nf + f;
                let (t, z) = cache.argmax[unit];
                if z <= 0.0 {
                    continue;
                }
                let g = d_pooled[unit] * cache.mask1[unit];
                if g == 0.0 {
                    continue;
                }
                grads.conv_bias[b][f] += g;
                let window = &x[t * d..t * d + span];
                let gw = &mut grads.conv_weight[b][f * span..(f + 1) * span];
                for (dst, &xv) in gw.iter_mut().zip(window) {
                    *dst += g * f64::from(xv);
                }
                if !self.embedding.trainable {
                    continue;
                }
                let kernel = &bank.weight[f * span..(f + 1) * span];
                for r in 0..bank.width {
                    let row = t + r;
                    if row >= token_ids.len() {
                        break;
                    }
                    let acc = d_input.entry(row).or_insert_with(|| vec![0.0; emb_dim]);
                    for (a, &w) in acc.iter_mut().zip(&kernel[r * d..r * d + emb_dim]) {
                        *a += g * f64::from(w);
                    }
                }
            }
        }
        for (row, g) in d_input {
            let tok = token_ids[row];
            match grads.embedding.get_mut(&tok) {
                Some(acc) => add_into(acc, &g),
                None => {
                    grads.embedding.insert(tok, g);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> CnnConfig {
        CnnConfig {
            filter_widths: vec![2],
            filters_per_width: 1,
            hidden_dim: 2,
            dropout: 0.0,
            num_classes: 3,
            embedding_dim: 2,
            pos_dim: 1,
        }
    }

    fn toy_model() -> CnnModel {
        let table = EmbeddingTable::from_data(2, 2, vec![0.0; 4]).unwrap();
        CnnModel::new(toy_config(), table, 1).unwrap()
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, 0.0, -1000.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn argmax_prefers_lower_index() {
        assert_eq!(argmax(&[1.0 / 3.0; 3]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn hand_convolution() {
        let mut m = toy_model();
        m.conv[0].weight = vec![1.0, 0.0, 0.5, 0.0, 1.0, 0.0];
        m.conv[0].bias = vec![-0.25];
        // rows: [e0, e1, pos]
        let x = ndarray::arr2(&[[1.0f32, 2.0, 0.0], [3.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.0]]);
        let windows: Vec<f64> = (0..3)
            .map(|t| {
                let flat: Vec<f32> = x.slice(ndarray::s![t..t + 2, ..]).iter().copied().collect();
                -0.25 + flat.iter().zip(&m.conv[0].weight).map(|(a, b)| (a * b) as f64).sum::<f64>()
            })
            .collect();
        let expected = windows.iter().copied().fold(f64::MIN, f64::max).max(0.0);
        let cache = m.forward_cached(&x, Mode::Eval).unwrap();
        assert_eq!(cache.pooled_dropped[0], expected);
        assert_eq!(expected, 4.25);
    }

    #[test]
    fn rejects_wrong_width_and_short_input() {
        let m = toy_model();
        assert!(m.forward(&Array2::zeros((4, 4))).is_err());
        assert!(m.forward(&Array2::zeros((1, 3))).is_err());
    }

    #[test]
    fn tensors_line_up() {
        let mut m = toy_model();
        let lens: Vec<usize> = m.tensors().iter().map(|(_, s, t)| {
            assert_eq!(s.iter().product::<usize>(), t.len());
            t.len()
        }).collect();
        let lens_mut: Vec<usize> = m.tensors_mut().iter().map(|t| t.len()).collect();
        assert_eq!(lens, lens_mut);
    }
}
