//! Single-hidden-layer autoencoder.
//!
//! With `X` the `n x m` input batch and `1` the all-ones vector:
//!
//! ```text
//! B = W_e X + b_e 1ᵀ      (p x m)
//! H = F(B)                F = identity or tanh, elementwise
//! Y = W_d H + b_d 1ᵀ      (n x m)
//! J = ||X - Y||²_F        summed over every entry, no 1/m factor
//! ```
//!
//! The encoder is stored as `p x n` and the decoder as `n x p`, the shapes the
//! products above require. The hidden states `H` are the post-processed embeddings.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{train, train_matrix, Optimizer, TrainConfig, TrainTrace};

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::io::EmbeddingSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
}

impl Activation {
    pub fn apply(self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Activation::Linear => b.clone(),
            Activation::Tanh => b.map(f64::tanh),
        }
    }

    /// `F'(B)` given the pre-activation `B` and the activation `H = F(B)`.
    fn derivative(self, h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        match self {
            Activation::Linear => None,
            Activation::Tanh => Some(h.map(|t| 1.0 - t * t)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "identity" => Ok(Activation::Linear),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::arg(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    /// `W_e`, `p x n`.
    pub encoder: DMatrix<f64>,
    /// `b_e`, length `p`.
    pub encoder_bias: DVector<f64>,
    /// `W_d`, `n x p`.
    pub decoder: DMatrix<f64>,
    /// `b_d`, length `n`.
    pub decoder_bias: DVector<f64>,
    pub activation: Activation,
}

impl AutoencoderParams {
    pub fn zeros(n: usize, p: usize, activation: Activation) -> Self {
        Self {
            encoder: DMatrix::zeros(p, n),
            encoder_bias: DVector::zeros(p),
            decoder: DMatrix::zeros(n, p),
            decoder_bias: DVector::zeros(n),
            activation,
        }
    }

    /// `W_e = I`, `W_d = I`, zero biases.
    pub fn identity(n: usize, activation: Activation) -> Self {
        Self {
            encoder: DMatrix::identity(n, n),
            decoder: DMatrix::identity(n, n),
            ..Self::zeros(n, n, activation)
        }
    }

    /// Weights uniform in `±sqrt(6 / (n + p))`, biases zero. Encoder first, then decoder.
    pub fn init_uniform<R: Rng>(n: usize, p: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = (6.0 / (n + p) as f64).sqrt();
        let encoder = DMatrix::from_fn(p, n, |_, _| rng.random_range(-bound..bound));
        let decoder = DMatrix::from_fn(n, p, |_, _| rng.random_range(-bound..bound));
        Self {
            encoder,
            decoder,
            ..Self::zeros(n, p, activation)
        }
    }

    /// Input/output dimension `n`.
    pub fn input_dim(&self) -> usize {
        self.encoder.ncols()
    }

    /// Hidden dimension `p`.
    pub fn hidden_dim(&self) -> usize {
        self.encoder.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, p) = (self.input_dim(), self.hidden_dim());
        if self.encoder_bias.len() != p || self.decoder.shape() != (n, p) || self.decoder_bias.len() != n {
            return Err(Error::arg(format!(
                "inconsistent autoencoder shapes: W_e {:?}, b_e {}, W_d {:?}, b_d {}",
                self.encoder.shape(),
                self.encoder_bias.len(),
                self.decoder.shape(),
                self.decoder_bias.len()
            )));
        }
        if !self.is_finite() {
            return Err(Error::Numeric("autoencoder parameters contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.iter().all(|v| v.is_finite())
            && self.decoder.iter().all(|v| v.is_finite())
            && self.encoder_bias.iter().all(|v| v.is_finite())
            && self.decoder_bias.iter().all(|v| v.is_finite())
    }

    fn check_input(&self, data: &DMatrix<f64>) -> Result<()> {
        if data.nrows() != self.input_dim() {
            return Err(Error::arg(format!(
                "input has {} rows but the encoder expects {}",
                data.nrows(),
                self.input_dim()
            )));
        }
        if data.ncols() == 0 {
            return Err(Error::arg("batch must contain at least one column"));
        }
        Ok(())
    }
}

/// Gradients of `J`, one field per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: DMatrix<f64>,
    pub encoder_bias: DVector<f64>,
    pub decoder: DMatrix<f64>,
    pub decoder_bias: DVector<f64>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        (self.encoder.norm_squared()
            + self.encoder_bias.norm_squared()
            + self.decoder.norm_squared()
            + self.decoder_bias.norm_squared())
        .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.norm().is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub preactivation: DMatrix<f64>,
    pub hidden: DMatrix<f64>,
    pub output: DMatrix<f64>,
}

fn add_column(m: &mut DMatrix<f64>, v: &DVector<f64>) {
    for mut col in m.column_iter_mut() {
        col += v;
    }
}

pub fn forward(params: &AutoencoderParams, batch: &DMatrix<f64>) -> Result<ForwardPass> {
    params.check_input(batch)?;
    let mut preactivation = &params.encoder * batch;
    add_column(&mut preactivation, &params.encoder_bias);
    let hidden = params.activation.apply(&preactivation);
    let mut output = &params.decoder * &hidden;
    add_column(&mut output, &params.decoder_bias);
    Ok(ForwardPass {
        preactivation,
        hidden,
        output,
    })
}

/// Reconstruction loss `||X - Y||²_F`.
pub fn loss(params: &AutoencoderParams, data: &DMatrix<f64>) -> Result<f64> {
    let pass = forward(params, data)?;
    Ok((data - pass.output).norm_squared())
}

/// Loss and exact gradients. `mask`, when given, multiplies the hidden states
/// elementwise before decoding (inverted dropout: entries are 0 or `1/(1-rate)`).
pub fn loss_and_gradients(
    params: &AutoencoderParams,
    data: &DMatrix<f64>,
    mask: Option<&DMatrix<f64>>,
) -> Result<(f64, Gradients)> {
    params.check_input(data)?;
    let mut pre = &params.encoder * data;
    add_column(&mut pre, &params.encoder_bias);
    let hidden = params.activation.apply(&pre);
    let dropped = match mask {
        Some(m) => hidden.component_mul(m),
        None => hidden.clone(),
    };
    let mut output = &params.decoder * &dropped;
    add_column(&mut output, &params.decoder_bias);

    let residual = output - data;
    let value = residual.norm_squared();
    let d_out = residual * 2.0;

    let decoder = &d_out * dropped.transpose();
    let decoder_bias = d_out.column_sum();
    let mut d_hidden = params.decoder.tr_mul(&d_out);
    if let Some(m) = mask {
        d_hidden.component_mul_assign(m);
    }
    if let Some(deriv) = params.activation.derivative(&hidden) {
        d_hidden.component_mul_assign(&deriv);
    }
    let encoder = &d_hidden * data.transpose();
    let encoder_bias = d_hidden.column_sum();

    Ok((
        value,
        Gradients {
            encoder,
            encoder_bias,
            decoder,
            decoder_bias,
        },
    ))
}

/// `b̂_d = (1/N) (X - W_d H) 1`, the decoder bias minimizing `J` for the current
/// encoder and decoder weights.
pub fn optimal_decoder_bias(params: &AutoencoderParams, data: &DMatrix<f64>) -> Result<DVector<f64>> {
    let pass = forward(params, data)?;
    let residual = data - &params.decoder * pass.hidden;
    Ok(residual.column_sum() / data.ncols() as f64)
}

/// Hidden states of every word, dropout disabled.
pub fn encode(params: &AutoencoderParams, set: &EmbeddingSet) -> Result<EmbeddingSet> {
    if set.dim() != params.input_dim() {
        return Err(Error::arg(format!(
            "embeddings have dimension {} but the autoencoder expects {}",
            set.dim(),
            params.input_dim()
        )));
    }
    let pass = forward(params, set.matrix())?;
    set.with_matrix(
        pass.hidden,
        format!("ae[{}, p={}] <- {}", params.activation.as_str(), params.hidden_dim(), set.origin()),
    )
}
