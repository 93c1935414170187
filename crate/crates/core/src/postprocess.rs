//! Closed-form post-processors: centering, top-p PCA coordinates, and
//! all-but-the-top (ABTT) removal of the leading principal components.

use crate::error::{Error, Result};
use crate::io::EmbeddingSet;
use crate::linalg::{center, covariance, eigendecompose, project_subspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostprocessConfig {
    Center,
    /// Keep the coordinates in the top `p` principal directions.
    PcaKeep { p: usize },
    /// Center, then remove the projections onto the top `d_remove` directions.
    Abtt { d_remove: usize },
}

impl PostprocessConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            PostprocessConfig::Center => Ok(()),
            PostprocessConfig::PcaKeep { p } if p == 0 || p > dim => {
                Err(Error::arg(format!("pca_keep needs 1 <= p <= {dim}, got {p}")))
            }
            PostprocessConfig::Abtt { d_remove } if d_remove >= dim => {
                Err(Error::arg(format!("abtt needs 0 <= d < {dim}, got {d_remove}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PostprocessConfig::Center => "center",
            PostprocessConfig::PcaKeep { .. } => "pca_keep",
            PostprocessConfig::Abtt { .. } => "abtt",
        }
    }
}

/// Rule-of-thumb number of components ABTT removes: `max(1, round(n / 100))`.
pub fn default_abtt_d(n: usize) -> usize {
    ((n as f64 / 100.0).round() as usize).max(1)
}

pub fn apply(set: &EmbeddingSet, config: PostprocessConfig) -> Result<EmbeddingSet> {
    config.validate(set.dim())?;
    let centered = center(set);
    let origin = format!("{} <- {}", config.name(), set.origin());
    match config {
        PostprocessConfig::Center => set.with_matrix(centered.matrix, origin),
        PostprocessConfig::PcaKeep { p } => {
            let eig = eigendecompose(&covariance(&centered))?;
            let indices: Vec<usize> = (0..p).collect();
            let coords = project_subspace(&centered, &eig, &indices)?;
            set.with_matrix(coords, origin)
        }
        PostprocessConfig::Abtt { d_remove } => {
            if d_remove == 0 {
                return set.with_matrix(centered.matrix, origin);
            }
            let eig = eigendecompose(&covariance(&centered))?;
            let top = eig.top(d_remove)?;
            let coords = top.tr_mul(&centered.matrix);
            let out = &centered.matrix - top * coords;
            set.with_matrix(out, origin)
        }
    }
}
