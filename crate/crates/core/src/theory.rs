//! Numerical checks of the autoencoder/PCA correspondence.
//!
//! * Centered identity: with the optimal decoder bias, the loss equals
//!   `‖X′ − W_d H′‖²` where `X′` and `H′` are the row-centered data and hidden states.
//! * PCA loss: a converged bias-free linear autoencoder on centered data reaches
//!   `tr(Σ) − Σ_{t ≤ p} λ_t`.
//! * PCA subspace: at convergence `W_d W_e` is the orthogonal projector onto the
//!   top-p eigenvectors and `W_d = U_p C` for an invertible `C`.
//! * Linear regime: `tanh` is within `ε³/3` of the identity on `[−ε, ε]`.
//!
//! Failures are report entries, never errors. Every check is a pure function of
//! its instance, so reports are reproducible.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::autoencoder::{
    loss, optimal_decoder_bias, forward, train_matrix, Activation, AutoencoderParams, Optimizer, TrainConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{column_projector, eigendecompose, orthonormal_columns, principal_angles, second_moment, TIE_TOLERANCE};

pub const IDENTITY_TOLERANCE: f64 = 1e-9;
pub const BIAS_TOLERANCE: f64 = 1e-6;
pub const LOSS_TOLERANCE: f64 = 1e-3;
pub const PROJECTOR_TOLERANCE: f64 = 1e-2;
pub const PROJECTOR_SHAPE_TOLERANCE: f64 = 1e-3;
pub const MIXING_TOLERANCE: f64 = 1e-3;
pub const SEED_AGREEMENT_TOLERANCE: f64 = 2e-2;
pub const TRACE_TOLERANCE: f64 = 1e-6;
pub const ANGLE_TOLERANCE: f64 = 1e-2;

/// Learning rate for the plain gradient descent used by the convergence checks.
pub const THEORY_LEARNING_RATE: f64 = 1e-2;
pub const THEORY_MAX_EPOCHS: usize = 400_000;

/// Problem size and seed of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub n: usize,
    pub p: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Instance {
    pub fn new(n: usize, p: usize, samples: usize, seed: u64) -> Self {
        Self { n, p, samples, seed }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.n, self.p, self.samples, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub instance: Instance,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// 0-based eigen-indices spanned by the decoder, when recovered.
    pub index_set: Option<Vec<usize>>,
    /// `C = U_pᵀ W_d`, when recovered.
    pub mixing: Option<DMatrix<f64>>,
    pub note: Option<String>,
}

impl CheckResult {
    fn new(name: &str, instance: Instance, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_owned(),
            instance,
            residual,
            tolerance,
            // NaN residuals fail.
            passed: residual <= tolerance,
            index_set: None,
            mixing: None,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn line(&self) -> String {
        format!(
            "{}\t{}\t{:e}\t{:e}\t{}",
            self.name,
            self.instance,
            self.residual,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TheoryReport {
    pub entries: Vec<CheckResult>,
}

impl TheoryReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn extend(&mut self, other: TheoryReport) {
        self.entries.extend(other.entries);
    }

    /// One tab-separated line per check.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.line());
            out.push('\n');
        }
        out
    }

    pub fn to_table(&self) -> String {
        let name_w = self.entries.iter().map(|e| e.name.len()).chain([5]).max().unwrap_or(5);
        let inst_w = self
            .entries
            .iter()
            .map(|e| e.instance.to_string().len())
            .chain(["n,p,N,seed".len()])
            .max()
            .unwrap_or(10);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<name_w$}  {:<inst_w$}  {:>12}  {:>12}  result",
            "check", "n,p,N,seed", "residual", "tolerance"
        );
        for e in &self.entries {
            let _ = write!(
                out,
                "{:<name_w$}  {:<inst_w$}  {:>12.3e}  {:>12.3e}  {}",
                e.name,
                e.instance.to_string(),
                e.residual,
                e.tolerance,
                if e.passed { "PASS" } else { "FAIL" }
            );
            if let Some(note) = &e.note {
                let _ = write!(out, "  ({note})");
            }
            out.push('\n');
        }
        let failed = self.failures().count();
        let _ = writeln!(out, "{} checks, {} failed", self.entries.len(), failed);
        out
    }
}

/// Splitmix-style derivation of independent child seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Centered data with an exactly prescribed second-moment spectrum.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// `X′ = U diag(√λ) G`, n×N with zero row means.
    pub data: DMatrix<f64>,
    /// Orthogonal n×n basis `U`; column `i` carries eigenvalue `spectrum[i]`.
    pub basis: DMatrix<f64>,
    pub spectrum: Vec<f64>,
}

/// `G` is a seeded Gaussian n×N matrix whose rows are centered and then
/// orthonormalized, so `X′X′ᵀ = U diag(λ) Uᵀ` and every row of `X′` has mean zero.
pub fn synthetic_data(spectrum: &[f64], samples: usize, seed: u64) -> Result<SyntheticData> {
    let n = spectrum.len();
    if n == 0 {
        return Err(Error::arg("spectrum must be non-empty"));
    }
    if samples <= n {
        return Err(Error::arg(format!("need more than {n} samples for a centered basis, got {samples}")));
    }
    if spectrum.iter().any(|&l| !l.is_finite() || l < 0.0) {
        return Err(Error::arg("spectrum entries must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = orthonormal_columns(&gaussian_matrix(n, n, &mut rng))?;
    let mut g = gaussian_matrix(samples, n, &mut rng);
    for mut col in g.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let g = orthonormal_columns(&g)?.transpose();
    let scale = DMatrix::from_diagonal(&DVector::from_iterator(n, spectrum.iter().map(|l| l.sqrt())));
    Ok(SyntheticData {
        data: &basis * scale * g,
        basis,
        spectrum: spectrum.to_vec(),
    })
}

/// Geometric spectrum from 10 down to 1 with seeded jitter, sorted descending.
pub fn default_spectrum(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5eed));
    let mut values: Vec<f64> = (0..n)
        .map(|i| {
            let base = if n == 1 { 10.0 } else { 10.0 * 10f64.powf(-(i as f64) / (n - 1) as f64) };
            base * (1.0 + 0.05 * rng.random::<f64>())
        })
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

fn random_params<R: Rng>(n: usize, p: usize, activation: Activation, rng: &mut R) -> AutoencoderParams {
    AutoencoderParams {
        encoder: gaussian_matrix(p, n, rng) * 0.5,
        encoder_bias: DVector::from_fn(p, |_, _| StandardNormal.sample(rng)),
        decoder: gaussian_matrix(n, p, rng),
        decoder_bias: DVector::zeros(n),
        activation,
    }
}

fn center_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    out
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Loss at the optimal decoder bias against `‖X′ − W_d H′‖²`, relative difference.
pub fn check_centered_identity(instance: Instance, activation: Activation) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(instance.seed);
    let data = gaussian_matrix(instance.n, instance.samples, &mut rng) * 2.0
        + DMatrix::from_fn(instance.n, instance.samples, |r, _| r as f64);
    let params = random_params(instance.n, instance.p, activation, &mut rng);
    centered_identity_residual(&params, &data)
        .map(|r| CheckResult::new(&format!("centered_identity_{}", activation.as_str()), instance, r, IDENTITY_TOLERANCE))
        .unwrap_or_else(|e| failed(&format!("centered_identity_{}", activation.as_str()), instance, IDENTITY_TOLERANCE, e))
}

/// Relative gap between the bias-optimized loss and its centered form.
pub fn centered_identity_residual(params: &AutoencoderParams, data: &DMatrix<f64>) -> Result<f64> {
    let mut with_bias = params.clone();
    with_bias.decoder_bias = optimal_decoder_bias(params, data)?;
    let lhs = loss(&with_bias, data)?;
    let hidden = forward(params, data)?.hidden;
    let rhs = (center_rows(data) - &params.decoder * center_rows(&hidden)).norm_squared();
    Ok(relative(lhs, rhs))
}

fn failed(name: &str, instance: Instance, tolerance: f64, err: Error) -> CheckResult {
    CheckResult::new(name, instance, f64::INFINITY, tolerance).with_note(err.to_string())
}

/// Golden-section minimization of a convex function on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iterations: usize) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iterations {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    (lo + hi) / 2.0
}

/// Closed-form decoder bias against per-coordinate golden-section search on the loss.
pub fn check_optimal_bias(instance: Instance, activation: Activation) -> CheckResult {
    let name = "optimal_bias";
    let mut rng = ChaCha8Rng::seed_from_u64(instance.seed);
    let data = gaussian_matrix(instance.n, instance.samples, &mut rng)
        + DMatrix::from_fn(instance.n, instance.samples, |r, _| 0.5 * r as f64);
    let params = random_params(instance.n, instance.p, activation, &mut rng);
    let closed = match optimal_decoder_bias(&params, &data) {
        Ok(b) => b,
        Err(e) => return failed(name, instance, BIAS_TOLERANCE, e),
    };
    let output = match forward(&params, &data) {
        Ok(f) => f.output,
        Err(e) => return failed(name, instance, BIAS_TOLERANCE, e),
    };
    let bound = 1.0 + data.amax() + output.amax();
    let mut residual: f64 = 0.0;
    for k in 0..instance.n {
        // Coordinate k of the bias only touches row k of the loss.
        let row_loss = |b: f64| {
            let mut trial = params.clone();
            trial.decoder_bias[k] = b;
            loss(&trial, &data).unwrap_or(f64::INFINITY)
        };
        let brute = golden_section(row_loss, -bound, bound, 200);
        residual = residual.max((brute - closed[k]).abs());
    }
    CheckResult::new(name, instance, residual, BIAS_TOLERANCE)
}

/// Config for the bias-free linear autoencoder used by the convergence checks.
pub fn theory_train_config(instance: Instance, grad_tolerance: f64, max_epochs: usize) -> TrainConfig {
    TrainConfig {
        hidden_dim: instance.p,
        activation: Activation::Linear,
        optimizer: Optimizer::GradientDescent,
        learning_rate: THEORY_LEARNING_RATE,
        batch_size: instance.samples,
        dropout: 0.0,
        epochs: max_epochs,
        min_rel_improvement: 0.0,
        grad_tolerance: Some(grad_tolerance),
        train_biases: false,
        seed: instance.seed,
    }
}

fn grad_tolerance_for(spectrum: &[f64]) -> f64 {
    1e-10 * spectrum.iter().sum::<f64>().max(1.0)
}

/// Trains the bias-free linear autoencoder on synthetic centered data.
pub fn train_synthetic(instance: Instance, data: &SyntheticData, epochs: usize) -> Result<AutoencoderParams> {
    let config = theory_train_config(instance, grad_tolerance_for(&data.spectrum), epochs);
    Ok(train_matrix(&data.data, &config)?.0)
}

/// One synthetic problem: instance plus the spectrum its data is built with.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaCase {
    pub instance: Instance,
    pub spectrum: Vec<f64>,
}

impl PcaCase {
    pub fn new(instance: Instance, spectrum: Vec<f64>) -> Self {
        Self { instance, spectrum }
    }

    /// Uses [`default_spectrum`] for the instance's dimension and seed.
    pub fn with_default_spectrum(instance: Instance) -> Self {
        Self {
            spectrum: default_spectrum(instance.n, instance.seed),
            instance,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.spectrum.len() != self.instance.n {
            return Err(Error::arg("spectrum length must equal n"));
        }
        if self.instance.p == 0 || self.instance.p > self.instance.n {
            return Err(Error::arg("need 1 <= p <= n"));
        }
        Ok(())
    }

    /// `tr(Σ) − Σ_{t ≤ p} λ_t` with eigenvalues from the decomposition of the built data.
    pub fn optimal_loss(&self, data: &SyntheticData) -> Result<f64> {
        let eig = eigendecompose(&second_moment(&data.data))?;
        Ok(eig.trace() - eig.eigenvalues.iter().take(self.instance.p).sum::<f64>())
    }
}

/// `|J_final − (tr(Σ) − Σ_{t ≤ p} λ_t)|` against `1e-3·tr(Σ)` after training for at most `epochs`.
pub fn check_pca_loss_after(case: &PcaCase, epochs: usize) -> CheckResult {
    let name = "pca_loss";
    let inst = case.instance;
    let trace = case.spectrum.iter().sum::<f64>();
    let tol = LOSS_TOLERANCE * trace;
    let run = || -> Result<f64> {
        case.validate()?;
        let data = synthetic_data(&case.spectrum, inst.samples, inst.seed)?;
        let params = train_synthetic(inst, &data, epochs)?;
        Ok((loss(&params, &data.data)? - case.optimal_loss(&data)?).abs())
    };
    match run() {
        Ok(r) => CheckResult::new(name, inst, r, tol),
        Err(e) => failed(name, inst, tol, e),
    }
}

pub fn check_pca_loss(case: &PcaCase) -> CheckResult {
    check_pca_loss_after(case, THEORY_MAX_EPOCHS)
}

/// Eigen-indices whose directions carry the most decoder mass, ascending.
fn dominant_indices(basis: &DMatrix<f64>, decoder: &DMatrix<f64>, p: usize) -> Vec<usize> {
    let weights = basis.tr_mul(decoder);
    let mut order: Vec<usize> = (0..basis.ncols()).collect();
    order.sort_by(|&a, &b| weights.row(b).norm_squared().total_cmp(&weights.row(a).norm_squared()));
    let mut chosen: Vec<usize> = order.into_iter().take(p).collect();
    chosen.sort_unstable();
    chosen
}

/// Projector, idempotence, symmetry, mixing-matrix recovery, seed agreement,
/// the trace identity for the loss and hidden-state principal angles.
pub fn check_pca_subspace(case: &PcaCase) -> TheoryReport {
    let inst = case.instance;
    let mut report = TheoryReport::default();
    let outcome = (|| -> Result<()> {
        case.validate()?;
        let data = synthetic_data(&case.spectrum, inst.samples, inst.seed)?;
        let eig = eigendecompose(&second_moment(&data.data))?;
        let p = inst.p;
        let gap_at_p = if p < inst.n {
            eig.eigenvalues[p - 1] - eig.eigenvalues[p]
        } else {
            f64::INFINITY
        };
        let tied = gap_at_p < TIE_TOLERANCE * eig.eigenvalues[0].abs();
        if eig.eigenvalues[inst.n - 1] <= TIE_TOLERANCE * eig.eigenvalues[0].abs() {
            return Err(Error::arg("subspace checks need a full-rank covariance"));
        }
        let params = train_synthetic(inst, &data, THEORY_MAX_EPOCHS)?;
        let alt_instance = Instance {
            seed: derive_seed(inst.seed, 1),
            ..inst
        };
        let mut alt_config = theory_train_config(alt_instance, grad_tolerance_for(&data.spectrum), THEORY_MAX_EPOCHS);
        alt_config.seed = alt_instance.seed;
        let alt = train_matrix(&data.data, &alt_config)?.0;

        let product = &params.decoder * &params.encoder;
        let top = eig.top(p)?;
        let top_projector = &top * top.transpose();
        let sigma = second_moment(&data.data);
        let trace = eig.trace();

        if tied {
            log::warn!("instance {inst}: tied eigenvalues at p, skipping subspace uniqueness");
        } else {
            report
                .entries
                .push(CheckResult::new("projector", inst, (&product - &top_projector).norm(), PROJECTOR_TOLERANCE));
        }
        report.entries.push(CheckResult::new(
            "projector_idempotent",
            inst,
            (&product * &product - &product).norm(),
            PROJECTOR_SHAPE_TOLERANCE,
        ));
        report.entries.push(CheckResult::new(
            "projector_symmetric",
            inst,
            (&product - product.transpose()).norm(),
            PROJECTOR_SHAPE_TOLERANCE,
        ));
        if !tied {
            let mixing = top.tr_mul(&params.decoder);
            let recovered = (&params.decoder - &top * &mixing).norm();
            let scale = params.decoder.norm();
            let mut entry = CheckResult::new("mixing_recovery", inst, recovered, MIXING_TOLERANCE * scale);
            if mixing.clone().try_inverse().is_none() {
                entry.passed = false;
                entry.note = Some("mixing matrix is singular".into());
            }
            entry.index_set = Some(dominant_indices(&eig.eigenvectors, &params.decoder, p));
            entry.mixing = Some(mixing);
            report.entries.push(entry);

            let alt_product = &alt.decoder * &alt.encoder;
            report.entries.push(CheckResult::new(
                "seed_agreement",
                inst,
                (&product - &alt_product).norm(),
                SEED_AGREEMENT_TOLERANCE,
            ));
        }

        let j = loss(&params, &data.data)?;
        let trace_form = match column_projector(&params.decoder) {
            Ok(proj) => trace - (&sigma * proj).trace(),
            Err(_) => f64::NAN,
        };
        report.entries.push(CheckResult::new(
            "trace_identity",
            inst,
            (j - trace_form).abs() / trace.max(f64::MIN_POSITIVE),
            TRACE_TOLERANCE,
        ));

        if !tied && case.spectrum[p - 1] > 0.0 {
            let hidden = &params.encoder * &data.data;
            let coords = top.tr_mul(&data.data);
            let angles = principal_angles(&hidden.transpose(), &coords.transpose())?;
            let worst = angles.iter().copied().fold(0.0, f64::max);
            report.entries.push(CheckResult::new("hidden_angles", inst, worst, ANGLE_TOLERANCE));
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        report.entries.push(failed("pca_subspace", inst, 0.0, e));
    }
    report
}

/// Scalar `|tanh x − x| ≤ ε³/3` on a 10⁴-point grid, and tanh against linear hidden
/// states for parameters scaled so every preactivation has magnitude at most `ε`.
pub fn check_linear_regime(epsilon: f64, instance: Instance) -> TheoryReport {
    let mut report = TheoryReport::default();
    if !(epsilon > 0.0 && epsilon <= 0.1) {
        report.entries.push(failed(
            "linear_regime_scalar",
            instance,
            0.0,
            Error::arg(format!("epsilon must be in (0, 0.1], got {epsilon}")),
        ));
        return report;
    }
    let bound = epsilon.powi(3) / 3.0;
    let points = 10_000;
    let grid_max = (0..=points)
        .map(|i| {
            let x = -epsilon + 2.0 * epsilon * i as f64 / points as f64;
            (x.tanh() - x).abs()
        })
        .fold(0.0, f64::max);
    report
        .entries
        .push(CheckResult::new("linear_regime_scalar", instance, grid_max, bound));

    let mut rng = ChaCha8Rng::seed_from_u64(instance.seed);
    let data = gaussian_matrix(instance.n, instance.samples, &mut rng);
    let mut params = random_params(instance.n, instance.p, Activation::Tanh, &mut rng);
    let pre = &params.encoder * &data + DMatrix::from_fn(instance.p, instance.samples, |r, _| params.encoder_bias[r]);
    let scale = epsilon / pre.amax().max(f64::MIN_POSITIVE);
    params.encoder *= scale;
    params.encoder_bias *= scale;
    let hidden_dev = (|| -> Result<f64> {
        let tanh_hidden = forward(&params, &data)?.hidden;
        let linear = AutoencoderParams {
            activation: Activation::Linear,
            ..params.clone()
        };
        let linear_hidden = forward(&linear, &data)?.hidden;
        Ok((tanh_hidden - linear_hidden).amax())
    })();
    report.entries.push(match hidden_dev {
        Ok(d) => CheckResult::new("linear_regime_hidden", instance, d, 2.0 * epsilon.powi(3)),
        Err(e) => failed("linear_regime_hidden", instance, 2.0 * epsilon.powi(3), e),
    });
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grid {
    /// n ≤ 6; a few seconds.
    Small,
    /// n ≤ 10 with more random instances.
    Default,
}

impl std::str::FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Grid::Small),
            "default" => Ok(Grid::Default),
            other => Err(Error::arg(format!("unknown grid {other:?} (expected small or default)"))),
        }
    }
}

enum Job {
    Identity(Instance, Activation),
    Bias(Instance, Activation),
    Loss(PcaCase),
    Subspace(PcaCase),
    Linear(f64, Instance),
}

impl Job {
    fn run(&self) -> TheoryReport {
        match self {
            Job::Identity(i, a) => TheoryReport {
                entries: vec![check_centered_identity(*i, *a)],
            },
            Job::Bias(i, a) => TheoryReport {
                entries: vec![check_optimal_bias(*i, *a)],
            },
            Job::Loss(c) => TheoryReport {
                entries: vec![check_pca_loss(c)],
            },
            Job::Subspace(c) => check_pca_subspace(c),
            Job::Linear(eps, i) => check_linear_regime(*eps, *i),
        }
    }
}

fn random_instance<R: Rng>(rng: &mut R, max_n: usize, max_p: usize, max_samples: usize, seed: u64) -> Instance {
    let n = rng.random_range(1..=max_n);
    let p = rng.random_range(1..=max_p.min(n).max(1));
    let samples = rng.random_range(2..=max_samples);
    Instance::new(n, p, samples, seed)
}

/// PCA cases for a grid; data seeds derive from the suite seed. Rank-deficient
/// cases only get the loss check.
pub fn pca_cases(grid: Grid, seed: u64) -> Vec<PcaCase> {
    let s = |k: u64| derive_seed(seed, 1000 + k);
    let mut cases = vec![
        PcaCase::new(Instance::new(6, 2, 40, s(0)), vec![9.0, 4.0, 1.0, 0.5, 0.2, 0.1]),
        PcaCase::with_default_spectrum(Instance::new(4, 1, 30, s(1))),
        PcaCase::with_default_spectrum(Instance::new(5, 3, 30, s(2))),
        PcaCase::with_default_spectrum(Instance::new(3, 3, 20, s(3))),
    ];
    if grid == Grid::Default {
        cases.extend([
            PcaCase::with_default_spectrum(Instance::new(8, 2, 60, s(4))),
            PcaCase::with_default_spectrum(Instance::new(10, 1, 60, s(5))),
            PcaCase::with_default_spectrum(Instance::new(10, 3, 80, s(6))),
            PcaCase::new(Instance::new(2, 1, 10, s(7)), vec![4.0, 0.0]),
        ]);
    }
    cases
}

/// The full check suite. Jobs run in parallel, each seeded from `(seed, job index)`;
/// entries come back in job order.
pub fn run_suite(grid: Grid, seed: u64) -> TheoryReport {
    let (identity_count, bias_count) = match grid {
        Grid::Small => (8, 4),
        Grid::Default => (50, 20),
    };
    let max_n = if grid == Grid::Small { 6 } else { 10 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::new();
    let mut index = 0u64;
    let mut next_seed = || {
        index += 1;
        derive_seed(seed, index)
    };
    for _ in 0..identity_count {
        let inst = random_instance(&mut rng, max_n, 5, 50, next_seed());
        jobs.push(Job::Identity(inst, Activation::Linear));
        jobs.push(Job::Identity(inst, Activation::Tanh));
    }
    for k in 0..bias_count {
        let inst = random_instance(&mut rng, max_n.min(6), 3, 12, next_seed());
        let act = if k % 2 == 0 { Activation::Linear } else { Activation::Tanh };
        jobs.push(Job::Bias(inst, act));
    }
    for case in pca_cases(grid, seed) {
        let full_rank = case.spectrum.iter().all(|&l| l > 0.0);
        jobs.push(Job::Loss(case.clone()));
        if full_rank {
            jobs.push(Job::Subspace(case));
        }
    }
    for eps in [0.01, 0.1] {
        jobs.push(Job::Linear(eps, Instance::new(5, 3, 20, next_seed())));
    }
    let reports: Vec<TheoryReport> = jobs.par_iter().map(Job::run).collect();
    let mut report = TheoryReport::default();
    for r in reports {
        report.extend(r);
    }
    report
}
