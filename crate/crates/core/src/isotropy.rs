//! Isotropy of an embedding space through the partition function
//! `Z(c) = Σ_w exp(cᵀ x_w)`.
//!
//! `gamma` is `min Z / max Z` over the principal directions of the embeddings,
//! each taken with both signs. Directions come from the covariance of the centered
//! vectors, while `Z` is summed over the vectors exactly as given: the metric must
//! see any common mean that a post-processor left behind.
//!
//! `Z` overflows `f64` quickly for large vocabularies, so everything is carried as
//! `ln Z` and only exponentiated for display.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::EmbeddingSet;
use crate::linalg::{center, covariance, eigendecompose};

pub const DEFAULT_BINS: usize = 50;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn log_partition_unchecked(matrix: &DMatrix<f64>, c: DVectorView<'_, f64>) -> f64 {
    let dots = matrix.tr_mul(&c);
    log_sum_exp(dots.iter().copied())
}

/// `ln Z(c)` for a unit vector `c`.
pub fn log_partition_value(set: &EmbeddingSet, c: &DVector<f64>) -> Result<f64> {
    if c.len() != set.dim() {
        return Err(Error::arg(format!(
            "direction has dimension {} but embeddings have {}",
            c.len(),
            set.dim()
        )));
    }
    let norm = c.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("direction must have unit norm, got {norm}")));
    }
    Ok(log_partition_unchecked(set.matrix(), c.as_view()))
}

/// `Z(c)`; `inf` when it exceeds the `f64` range (use [`log_partition_value`] then).
pub fn partition_value(set: &EmbeddingSet, c: &DVector<f64>) -> Result<f64> {
    log_partition_value(set, c).map(f64::exp)
}

/// A candidate direction: eigenvector index (0-based, descending eigenvalue) and sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Direction {
    pub component: usize,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotropyReport {
    pub gamma: f64,
    pub log_z_min: f64,
    pub log_z_max: f64,
    /// Number of candidate directions (`2n`).
    pub pc_count: usize,
    pub argmin: Direction,
    pub argmax: Direction,
    /// Covariance is identically zero; `gamma` is reported as 1.
    pub degenerate: bool,
}

impl IsotropyReport {
    pub fn z_min(&self) -> f64 {
        self.log_z_min.exp()
    }

    pub fn z_max(&self) -> f64 {
        self.log_z_max.exp()
    }

    /// `gamma=<v> zmin=<v> zmax=<v>`; a `Z` outside the `f64` range prints as `exp(<ln Z>)`.
    pub fn summary_line(&self) -> String {
        fn z(log: f64) -> String {
            let v = log.exp();
            if v.is_finite() && v > 0.0 {
                format!("{v}")
            } else {
                format!("exp({log})")
            }
        }
        format!("gamma={} zmin={} zmax={}", self.gamma, z(self.log_z_min), z(self.log_z_max))
    }

    pub fn text_block(&self) -> String {
        let mut out = String::new();
        let dir = |d: Direction| format!("{}u{}", if d.negated { "-" } else { "+" }, d.component + 1);
        let _ = writeln!(out, "isotropy");
        let _ = writeln!(out, "  gamma        {:.6}", self.gamma);
        let _ = writeln!(out, "  ln Z min     {:.6} at {}", self.log_z_min, dir(self.argmin));
        let _ = writeln!(out, "  ln Z max     {:.6} at {}", self.log_z_max, dir(self.argmax));
        let _ = writeln!(out, "  candidates   {}", self.pc_count);
        if self.degenerate {
            let _ = writeln!(out, "  note         zero covariance; gamma set to 1");
        }
        out
    }
}

pub fn gamma(set: &EmbeddingSet) -> Result<IsotropyReport> {
    let (n, count) = (set.dim(), set.len());
    if n < 2 || count < 2 {
        return Err(Error::arg(format!("isotropy needs n >= 2 and N >= 2, got n={n}, N={count}")));
    }
    let sigma = covariance(&center(set));
    let pc_count = 2 * n;
    if sigma.amax() == 0.0 {
        let log_z = log_partition_unchecked(set.matrix(), DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }).as_view());
        let first = Direction {
            component: 0,
            negated: false,
        };
        return Ok(IsotropyReport {
            gamma: 1.0,
            log_z_min: log_z,
            log_z_max: log_z,
            pc_count,
            argmin: first,
            argmax: first,
            degenerate: true,
        });
    }
    let eig = eigendecompose(&sigma)?;
    let matrix = set.matrix();
    let values: Vec<(Direction, f64)> = (0..pc_count)
        .into_par_iter()
        .map(|k| {
            let dir = Direction {
                component: k / 2,
                negated: k % 2 == 1,
            };
            let mut c = eig.eigenvectors.column(dir.component).into_owned();
            if dir.negated {
                c.neg_mut();
            }
            (dir, log_partition_unchecked(matrix, c.as_view()))
        })
        .collect();

    let (mut lo, mut hi) = (values[0], values[0]);
    for &v in &values[1..] {
        if v.1 < lo.1 {
            lo = v;
        }
        if v.1 > hi.1 {
            hi = v;
        }
    }
    Ok(IsotropyReport {
        gamma: (lo.1 - hi.1).exp(),
        log_z_min: lo.1,
        log_z_max: hi.1,
        pc_count,
        argmin: lo.0,
        argmax: hi.0,
        degenerate: false,
    })
}

/// `ln Z(c)` for `samples` directions drawn uniformly from the unit sphere.
pub fn sample_log_partition(set: &EmbeddingSet, samples: usize, seed: u64) -> Vec<f64> {
    let n = set.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions: Vec<DVector<f64>> = (0..samples)
        .map(|_| loop {
            let g: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let norm = g.norm();
            if norm > 0.0 {
                break g / norm;
            }
        })
        .collect();
    directions
        .par_iter()
        .map(|c| log_partition_unchecked(set.matrix(), c.as_view()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `(bin_center, count)` over `Z(c) / mean Z`.
    pub bins: Vec<(f64, usize)>,
    pub samples: usize,
    /// `ln` of the sample mean of `Z`.
    pub log_mean: f64,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center,count\n");
        for (center, count) in &self.bins {
            let _ = writeln!(out, "{center},{count}");
        }
        out
    }
}

/// Histogram of `Z(c)` normalized by its sample mean, over random unit `c`.
pub fn z_histogram(set: &EmbeddingSet, samples: usize, bins: usize, seed: u64) -> Result<Histogram> {
    if samples == 0 || bins == 0 {
        return Err(Error::arg("histogram needs at least one sample and one bin"));
    }
    let logs = sample_log_partition(set, samples, seed);
    let log_mean = log_sum_exp(logs.iter().copied()) - (samples as f64).ln();
    let ratios: Vec<f64> = logs.iter().map(|l| (l - log_mean).exp()).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let table = if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        vec![((lo + hi) / 2.0, samples)]
    } else {
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for r in &ratios {
            let idx = (((r - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (lo + (i as f64 + 0.5) * width, c))
            .collect()
    };
    Ok(Histogram {
        bins: table,
        samples,
        log_mean,
    })
}
