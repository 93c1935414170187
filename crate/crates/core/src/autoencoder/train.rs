use std::time::Instant;

use log::{debug, info, warn};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{loss, loss_and_gradients, Activation, AutoencoderParams, Gradients};
use crate::error::{Error, Result};
use crate::io::EmbeddingSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    GradientDescent,
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub activation: Activation,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Inverted dropout on the hidden states, training only.
    pub dropout: f64,
    pub epochs: usize,
    /// Stop once an epoch changes the full-data loss by less than this fraction. 0 disables.
    pub min_rel_improvement: f64,
    /// Stop once the full-data gradient norm falls to this value.
    pub grad_tolerance: Option<f64>,
    /// When false the biases stay at zero.
    pub train_biases: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 300,
            activation: Activation::Tanh,
            optimizer: Optimizer::adam(),
            learning_rate: 0.0002,
            batch_size: 256,
            dropout: 0.2,
            epochs: 10,
            min_rel_improvement: 1e-6,
            grad_tolerance: None,
            train_biases: true,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::arg("hidden dimension must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::arg(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.epochs == 0 {
            return Err(Error::arg("epochs must be positive"));
        }
        if let Optimizer::Adam { beta1, beta2, epsilon } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || epsilon <= 0.0 {
                return Err(Error::arg("invalid Adam hyperparameters"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    /// Full-data loss divided by the vocabulary size, after each epoch.
    pub epoch_losses: Vec<f64>,
    /// Wall-clock seconds per epoch.
    pub epoch_seconds: Vec<f64>,
    /// Unnormalized full-data loss `J` of the returned parameters.
    pub final_loss: f64,
    pub stopped_early: bool,
}

impl TrainTrace {
    pub fn epochs(&self) -> usize {
        self.epoch_losses.len()
    }

    /// Tab-separated `epoch  mean_loss` lines. Timings are left out so the log is reproducible.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\tmean_loss\n");
        for (i, l) in self.epoch_losses.iter().enumerate() {
            out.push_str(&format!("{}\t{l:e}\n", i + 1));
        }
        out.push_str(&format!("final\t{:e}\n", self.final_loss));
        out
    }
}

struct Moments {
    first: Gradients,
    second: Gradients,
    step: i32,
}

impl Moments {
    fn zeros_like(params: &AutoencoderParams) -> Self {
        let z = Gradients {
            encoder: DMatrix::zeros(params.encoder.nrows(), params.encoder.ncols()),
            encoder_bias: nalgebra::DVector::zeros(params.encoder_bias.len()),
            decoder: DMatrix::zeros(params.decoder.nrows(), params.decoder.ncols()),
            decoder_bias: nalgebra::DVector::zeros(params.decoder_bias.len()),
        };
        Self {
            first: z.clone(),
            second: z,
            step: 0,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, b1: f64, b2: f64, eps: f64, step: i32) {
    let c1 = 1.0 - b1.powi(step);
    let c2 = 1.0 - b2.powi(step);
    for i in 0..param.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

fn step(params: &mut AutoencoderParams, grads: &Gradients, moments: &mut Moments, config: &TrainConfig) {
    let lr = config.learning_rate;
    match config.optimizer {
        Optimizer::GradientDescent => {
            params.encoder.zip_apply(&grads.encoder, |p, g| *p -= lr * g);
            params.decoder.zip_apply(&grads.decoder, |p, g| *p -= lr * g);
            if config.train_biases {
                params.encoder_bias.axpy(-lr, &grads.encoder_bias, 1.0);
                params.decoder_bias.axpy(-lr, &grads.decoder_bias, 1.0);
            }
        }
        Optimizer::Adam { beta1, beta2, epsilon } => {
            moments.step += 1;
            let t = moments.step;
            let (m, v) = (&mut moments.first, &mut moments.second);
            adam_update(
                params.encoder.as_mut_slice(),
                grads.encoder.as_slice(),
                m.encoder.as_mut_slice(),
                v.encoder.as_mut_slice(),
                lr,
                beta1,
                beta2,
                epsilon,
                t,
            );
            adam_update(
                params.decoder.as_mut_slice(),
                grads.decoder.as_slice(),
                m.decoder.as_mut_slice(),
                v.decoder.as_mut_slice(),
                lr,
                beta1,
                beta2,
                epsilon,
                t,
            );
            if config.train_biases {
                adam_update(
                    params.encoder_bias.as_mut_slice(),
                    grads.encoder_bias.as_slice(),
                    m.encoder_bias.as_mut_slice(),
                    v.encoder_bias.as_mut_slice(),
                    lr,
                    beta1,
                    beta2,
                    epsilon,
                    t,
                );
                adam_update(
                    params.decoder_bias.as_mut_slice(),
                    grads.decoder_bias.as_slice(),
                    m.decoder_bias.as_mut_slice(),
                    v.decoder_bias.as_mut_slice(),
                    lr,
                    beta1,
                    beta2,
                    epsilon,
                    t,
                );
            }
        }
    }
}

fn dropout_mask<R: Rng>(rows: usize, cols: usize, rate: f64, rng: &mut R) -> DMatrix<f64> {
    let keep = 1.0 / (1.0 - rate);
    DMatrix::from_fn(rows, cols, |_, _| if rng.random::<f64>() < rate { 0.0 } else { keep })
}

pub fn train(data: &EmbeddingSet, config: &TrainConfig) -> Result<(AutoencoderParams, TrainTrace)> {
    train_matrix(data.matrix(), config)
}

/// Trains from a seeded random initialization. Parameter init, per-epoch
/// shuffling and dropout masks all draw from one ChaCha generator seeded with
/// `config.seed`, so identical inputs give bit-identical results.
pub fn train_matrix(data: &DMatrix<f64>, config: &TrainConfig) -> Result<(AutoencoderParams, TrainTrace)> {
    config.validate()?;
    let (n, count) = data.shape();
    if count == 0 || n == 0 {
        return Err(Error::arg("training data is empty"));
    }
    if config.hidden_dim > n {
        warn!("hidden dimension {} exceeds input dimension {n}", config.hidden_dim);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = AutoencoderParams::init_uniform(n, config.hidden_dim, config.activation, &mut rng);
    let mut moments = Moments::zeros_like(&params);
    let mut order: Vec<usize> = (0..count).collect();
    let full_batch = config.batch_size >= count;
    let mut trace = TrainTrace::default();
    let mut previous = loss(&params, data)?;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = if full_batch && config.dropout == 0.0 {
                // Column order does not change the summed loss; skip the gather.
                None
            } else {
                Some(data.select_columns(chunk))
            };
            let batch_ref = batch.as_ref().unwrap_or(data);
            let mask = (config.dropout > 0.0)
                .then(|| dropout_mask(config.hidden_dim, batch_ref.ncols(), config.dropout, &mut rng));
            let (value, grads) = loss_and_gradients(&params, batch_ref, mask.as_ref())?;
            if !value.is_finite() || !grads.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: b + 1,
                    msg: format!("non-finite loss or gradient (loss = {value})"),
                });
            }
            step(&mut params, &grads, &mut moments, config);
        }

        let (current, grad_norm) = match config.grad_tolerance {
            Some(_) => {
                let (v, g) = loss_and_gradients(&params, data, None)?;
                let g = if config.train_biases {
                    g.norm()
                } else {
                    (g.encoder.norm_squared() + g.decoder.norm_squared()).sqrt()
                };
                (v, Some(g))
            }
            None => (loss(&params, data)?, None),
        };
        if !current.is_finite() {
            return Err(Error::Training {
                epoch,
                batch: 0,
                msg: format!("non-finite loss {current} after epoch"),
            });
        }
        trace.epoch_losses.push(current / count as f64);
        trace.epoch_seconds.push(started.elapsed().as_secs_f64());
        if epoch % 100 == 0 || config.epochs <= 100 {
            debug!("epoch {epoch}: mean loss {:e}", current / count as f64);
        }

        let change = (previous - current).abs() / previous.max(f64::MIN_POSITIVE);
        previous = current;
        let converged_grad = matches!((grad_norm, config.grad_tolerance), (Some(g), Some(t)) if g <= t);
        let plateau = config.min_rel_improvement > 0.0 && change < config.min_rel_improvement;
        if converged_grad || plateau {
            trace.stopped_early = epoch < config.epochs;
            break;
        }
    }

    trace.final_loss = previous;
    info!(
        "trained {} epochs, final loss {:e} ({:e} per word)",
        trace.epochs(),
        trace.final_loss,
        trace.final_loss / count as f64
    );
    Ok((params, trace))
}
