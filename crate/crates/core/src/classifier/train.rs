//! Mini-batch Adam training with early stopping on validation error.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cnn::{argmax, CnnModel, Gradients, Mode};
use crate::error::{Error, Result};
use crate::features::{EncodedClause, Featurizer};

/// Examples per parallel gradient chunk. Fixed so the reduction order does
/// not depend on the thread count.
const GRAD_CHUNK: usize = 8;

const DOMAIN_SHUFFLE: u64 = 1;
const DOMAIN_DROPOUT: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// `None` disables early stopping; the best validation epoch is still
    /// restored at the end.
    pub patience: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Also score the training set (dropout off) after every epoch.
    pub record_train_error: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            batch_size: 64,
            max_epochs: 60,
            patience: Some(5),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            record_train_error: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("train config: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        if self.patience == Some(0) {
            return bad("patience must be >= 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("invalid Adam constants");
        }
        Ok(())
    }
}

/// An encoded clause with its index into the label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub encoded: EncodedClause,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's batches, dropout on.
    pub train_loss: f64,
    pub train_error: Option<f64>,
    pub validation_error: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation_error: f64,
    pub stopped_early: bool,
}

pub(crate) fn stream_rng(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

fn dropout_stream(epoch: usize, batch: usize, position: usize) -> u64 {
    ((epoch as u64) << 40) | ((batch as u64) << 16) | position as u64
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &CnnModel) -> Self {
        let sizes: Vec<usize> = model.tensors().iter().map(|(_, _, t)| t.len()).collect();
        Adam {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut CnnModel, grads: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let update = |p: &mut [f32], m: &mut [f64], v: &mut [f64], g: Option<&[f64]>| {
            for i in 0..p.len() {
                let gi = g.map_or(0.0, |g| g[i]);
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let step = cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.epsilon);
                p[i] = (f64::from(p[i]) - step) as f32;
            }
        };

        let trainable = model.embedding.trainable;
        let dim = model.embedding.dim();
        let dense: Vec<&[f64]> = grads
            .conv_weight
            .iter()
            .zip(&grads.conv_bias)
            .flat_map(|(w, b)| [&w[..], &b[..]])
            .chain([
                &grads.fc1_weight[..],
                &grads.fc1_bias[..],
                &grads.fc2_weight[..],
                &grads.fc2_bias[..],
            ])
            .collect();
        let mut tensors = model.tensors_mut().into_iter();
        let emb = tensors.next().expect("embedding tensor");
        if trainable {
            let (m, v) = (&mut self.m[0], &mut self.v[0]);
            for (r, row) in emb.chunks_mut(dim).enumerate() {
                let span = r * dim..(r + 1) * dim;
                let g = grads.embedding.get(&r).map(|g| &g[..]);
                update(row, &mut m[span.clone()], &mut v[span], g);
            }
        }
        for (i, (p, g)) in tensors.zip(dense).enumerate() {
            update(p, &mut self.m[i + 1], &mut self.v[i + 1], Some(g));
        }
    }
}

impl Gradients {
    pub fn accumulate(&mut self, other: Gradients) {
        for (row, g) in other.embedding {
            match self.embedding.get_mut(&row) {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                None => {
                    self.embedding.insert(row, g);
                }
            }
        }
        let pairs = self
            .conv_weight
            .iter_mut()
            .zip(&other.conv_weight)
            .chain(self.conv_bias.iter_mut().zip(&other.conv_bias))
            .chain([
                (&mut self.fc1_weight, &other.fc1_weight),
                (&mut self.fc1_bias, &other.fc1_bias),
                (&mut self.fc2_weight, &other.fc2_weight),
                (&mut self.fc2_bias, &other.fc2_bias),
            ]);
        for (a, b) in pairs {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

fn check_compatible(model: &CnnModel, featurizer: &Featurizer) -> Result<()> {
    if featurizer.vocab.len() != model.embedding.rows() {
        return Err(Error::Dimension {
            expected: model.embedding.rows(),
            found: featurizer.vocab.len(),
            context: "vocabulary size vs embedding rows".into(),
        });
    }
    if featurizer.tagset.len() != model.config.pos_dim {
        return Err(Error::Dimension {
            expected: model.config.pos_dim,
            found: featurizer.tagset.len(),
            context: "tagset size".into(),
        });
    }
    Ok(())
}

/// Most likely label index for each example, dropout off, each clause padded
/// to `max(len, widest filter)`.
pub fn predict_examples(
    model: &CnnModel,
    featurizer: &Featurizer,
    examples: &[&EncodedClause],
) -> Result<Vec<usize>> {
    let pad = model.config.max_filter_width();
    examples
        .par_iter()
        .map(|e| Ok(argmax(&model.forward(&featurizer.matrix(e, &model.embedding, pad))?)))
        .collect()
}

/// Error rate and mean cross-entropy, dropout off.
fn score(model: &CnnModel, featurizer: &Featurizer, examples: &[LabeledExample]) -> Result<(f64, f64)> {
    let pad = model.config.max_filter_width();
    let per_example: Vec<(bool, f64)> = examples
        .par_iter()
        .map(|e| {
            let p = model.forward(&featurizer.matrix(&e.encoded, &model.embedding, pad))?;
            Ok((argmax(&p) != e.label, -p[e.label].max(f64::MIN_POSITIVE).ln()))
        })
        .collect::<Result<_>>()?;
    let n = examples.len() as f64;
    let wrong = per_example.iter().filter(|(w, _)| *w).count() as f64;
    let loss: f64 = per_example.iter().map(|(_, l)| l).sum();
    Ok((wrong / n, loss / n))
}

/// Trains `model` and returns the weights of the best validation epoch.
/// Epochs are ranked by validation error, then by validation cross-entropy.
pub fn train(
    model: CnnModel,
    featurizer: &Featurizer,
    train_set: &[LabeledExample],
    validation_set: &[LabeledExample],
    config: &TrainConfig,
) -> Result<(CnnModel, TrainLog)> {
    train_with_progress(model, featurizer, train_set, validation_set, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_progress(
    mut model: CnnModel,
    featurizer: &Featurizer,
    train_set: &[LabeledExample],
    validation_set: &[LabeledExample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(CnnModel, TrainLog)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if validation_set.is_empty() {
        return Err(Error::Empty("validation set".into()));
    }
    check_compatible(&model, featurizer)?;
    let classes = model.config.num_classes;
    if let Some(e) = train_set.iter().chain(validation_set).find(|e| e.label >= classes) {
        return Err(Error::InvalidArgument(format!("label index {} out of range", e.label)));
    }
    if let Some(e) = train_set.iter().chain(validation_set).find(|e| e.encoded.is_empty()) {
        return Err(Error::Empty(format!("encoded clause {e:?}")));
    }

    let mut adam = Adam::new(&model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = (model.clone(), 0usize, f64::INFINITY, f64::INFINITY);
    let mut epochs = Vec::new();
    let mut since_best = 0;
    let mut stopped_early = false;
    let min_rows = model.config.max_filter_width();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut stream_rng(config.seed, DOMAIN_SHUFFLE, epoch as u64));
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let pad = batch
                .iter()
                .map(|&i| train_set[i].encoded.len())
                .max()
                .unwrap_or(0)
                .max(min_rows);
            let model_ref = &model;
            let parts: Vec<(Gradients, f64)> = batch
                .par_chunks(GRAD_CHUNK)
                .enumerate()
                .map(|(c, chunk)| {
                    let mut grads = Gradients::zeros(model_ref);
                    let mut loss = 0.0;
                    for (k, &i) in chunk.iter().enumerate() {
                        let ex = &train_set[i];
                        let x = featurizer.matrix(&ex.encoded, &model_ref.embedding, pad);
                        let mut rng = stream_rng(
                            config.seed,
                            DOMAIN_DROPOUT,
                            dropout_stream(epoch, b, c * GRAD_CHUNK + k),
                        );
                        let cache = model_ref.forward_cached(&x, Mode::Train(&mut rng))?;
                        loss += CnnModel::loss(&cache, ex.label);
                        model_ref.backward_into(&x, &cache, ex.label, &ex.encoded.token_ids, &mut grads);
                    }
                    Ok((grads, loss))
                })
                .collect::<Result<_>>()?;
            let mut total = Gradients::zeros(&model);
            let mut batch_loss = 0.0;
            for (g, l) in parts {
                total.accumulate(g);
                batch_loss += l;
            }
            total.scale(1.0 / batch.len() as f64);
            adam.step(&mut model, &total, config);
            loss_sum += batch_loss / batch.len() as f64;
            n_batches += 1;
        }

        let (validation_error, validation_loss) = score(&model, featurizer, validation_set)?;
        let train_error = if config.record_train_error {
            Some(score(&model, featurizer, train_set)?.0)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            train_error,
            validation_error,
            validation_loss,
        };
        on_epoch(&record);
        epochs.push(record);

        let improved = validation_error < best.2
            || (validation_error == best.2 && validation_loss < best.3);
        if improved {
            best = (model.clone(), epoch, validation_error, validation_loss);
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience.is_some_and(|p| since_best >= p) {
                stopped_early = true;
                break;
            }
        }
    }

    let (best_model, best_epoch, best_validation_error, _) = best;
    Ok((
        best_model,
        TrainLog {
            epochs,
            best_epoch,
            best_validation_error,
            stopped_early,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::cnn::CnnConfig;
    use crate::corpus::Story;
    use crate::features::{build_vocab, EmbeddingTable, PosTagset};

    fn toy_setup(seed: u64) -> (CnnModel, Featurizer, Vec<LabeledExample>) {
        let story = Story::from_texts("s", &["a b c d e f"]);
        let vocab = build_vocab(&story.clauses, 0, true).unwrap();
        assert_eq!(vocab.len(), 7);
        let table = EmbeddingTable::random(&vocab, 4, seed);
        let config = CnnConfig {
            filter_widths: vec![2, 3],
            filters_per_width: 1,
            hidden_dim: 4,
            dropout: 0.3,
            num_classes: 3,
            embedding_dim: 4,
            pos_dim: 45,
        };
        let model = CnnModel::new(config, table, seed).unwrap();
        let featurizer = Featurizer::new(vocab, PosTagset::penn(), true);
        let examples = vec![LabeledExample {
            encoded: EncodedClause {
                token_ids: vec![1, 2, 3, 1, 5],
                pos_ids: vec![Some(0), Some(3), None, Some(10), Some(44)],
            },
            label: 1,
        }];
        (model, featurizer, examples)
    }

    fn loss_at(model: &CnnModel, featurizer: &Featurizer, ex: &LabeledExample, seed: u64) -> f64 {
        let x = featurizer.matrix(&ex.encoded, &model.embedding, 4);
        let mut rng = stream_rng(seed, DOMAIN_DROPOUT, 0);
        let cache = model.forward_cached(&x, Mode::Train(&mut rng)).unwrap();
        CnnModel::loss(&cache, ex.label)
    }

    /// Analytic gradients against central differences over every parameter.
    /// The difference quotient divides by the step actually realized in f32.
    #[test]
    fn gradient_check() {
        for seed in [3u64, 11, 29] {
            let (model, featurizer, examples) = toy_setup(seed);
            let ex = &examples[0];
            let x = featurizer.matrix(&ex.encoded, &model.embedding, 4);
            let mut rng = stream_rng(seed, DOMAIN_DROPOUT, 0);
            let cache = model.forward_cached(&x, Mode::Train(&mut rng)).unwrap();
            let grads = model.backward(&x, &cache, ex.label, &ex.encoded.token_ids);

            let dim = model.embedding.dim();
            let mut analytic: Vec<Vec<f64>> = vec![vec![0.0; model.embedding.data().len()]];
            for (row, g) in &grads.embedding {
                analytic[0][row * dim..(row + 1) * dim].copy_from_slice(g);
            }
            for (w, b) in grads.conv_weight.iter().zip(&grads.conv_bias) {
                analytic.push(w.clone());
                analytic.push(b.clone());
            }
            analytic.extend([grads.fc1_weight, grads.fc1_bias, grads.fc2_weight, grads.fc2_bias]);

            let sizes: Vec<usize> = model.tensors().iter().map(|(_, _, t)| t.len()).collect();
            let mut worst = 0.0f64;
            for (ti, &n) in sizes.iter().enumerate() {
                for j in 0..n {
                    let base = model.tensors()[ti].2[j];
                    let h = 1e-3f32.max(base.abs() * 1e-3);
                    let mut plus = model.clone();
                    plus.tensors_mut()[ti][j] = base + h;
                    let mut minus = model.clone();
                    minus.tensors_mut()[ti][j] = base - h;
                    let realized = f64::from(base + h) - f64::from(base - h);
                    let numeric = (loss_at(&plus, &featurizer, ex, seed)
                        - loss_at(&minus, &featurizer, ex, seed))
                        / realized;
                    let a = analytic[ti][j];
                    let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                    worst = worst.max(rel);
                }
            }
            assert!(worst < 1e-4, "seed {seed}: worst relative error {worst}");
        }
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let (small, featurizer, _) = toy_setup(5);
        let config = CnnConfig { filters_per_width: 6, hidden_dim: 8, ..small.config.clone() };
        let model = CnnModel::new(config, small.embedding, 5).unwrap();
        let examples: Vec<LabeledExample> = (0..30)
            .map(|i| LabeledExample {
                encoded: EncodedClause {
                    token_ids: vec![1 + i % 3, 1 + i % 3, 4 + i % 3],
                    pos_ids: vec![Some(i % 3); 3],
                },
                label: i % 3,
            })
            .collect();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 8,
            max_epochs: 40,
            patience: None,
            seed: 9,
            ..TrainConfig::default()
        };
        let (m1, log1) = train(model.clone(), &featurizer, &examples, &examples, &cfg).unwrap();
        let (m2, log2) = train(model, &featurizer, &examples, &examples, &cfg).unwrap();
        assert_eq!(log1, log2);
        assert_eq!(m1, m2);
        assert!(log1.epochs.last().unwrap().train_loss < log1.epochs[0].train_loss);
        assert_eq!(log1.best_validation_error, 0.0);
    }

    #[test]
    fn early_stopping_restores_best() {
        let (model, featurizer, examples) = toy_setup(7);
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 50,
            patience: Some(2),
            ..TrainConfig::default()
        };
        let (_, log) = train(model, &featurizer, &examples, &examples, &cfg).unwrap();
        let best = log.epochs.iter().map(|e| e.validation_error).fold(f64::INFINITY, f64::min);
        assert_eq!(best, log.best_validation_error);
        assert_eq!(log.epochs[log.best_epoch - 1].validation_error, best);
        if log.stopped_early {
            assert_eq!(log.epochs.len(), log.best_epoch + 2);
        }
    }

    #[test]
    fn rejects_empty_sets_and_bad_config() {
        let (model, featurizer, examples) = toy_setup(1);
        let cfg = TrainConfig::default();
        assert!(train(model.clone(), &featurizer, &[], &examples, &cfg).is_err());
        assert!(train(model.clone(), &featurizer, &examples, &[], &cfg).is_err());
        let bad = TrainConfig { learning_rate: 0.0, ..cfg.clone() };
        assert!(train(model.clone(), &featurizer, &examples, &examples, &bad).is_err());
        let bad = TrainConfig { patience: Some(0), ..cfg };
        assert!(train(model, &featurizer, &examples, &examples, &bad).is_err());
    }
}
