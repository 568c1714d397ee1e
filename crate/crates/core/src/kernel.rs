//! The additive landmark kernel, its gram matrix, the induced RKHS distance,
//! and quantile bandwidth selection.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::cover::LandmarkConfiguration;
use crate::embed::EmbeddingVector;
use crate::stats::quantile_sorted;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("degenerate embedding: all pairwise distances are zero")]
    DegenerateEmbedding,
    #[error("quantile level {0} outside (0, 1)")]
    BadQuantile(f64),
    #[error("gram export io error: {0}")]
    Io(#[from] std::io::Error),
}

/// `k(A, B) = sum_k exp(-(Phi_k(A) - Phi_k(B))^2 / 2 sigma^2)`; value in
/// (0, K], equal to K exactly when the embeddings coincide.
pub fn lk_value(u: &EmbeddingVector, v: &EmbeddingVector, sigma: f64) -> f64 {
    debug_assert_eq!(u.values.len(), v.values.len());
    let inv = 1.0 / (2.0 * sigma * sigma);
    u.values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| {
            let gap = a - b;
            (-gap * gap * inv).exp()
        })
        .sum()
}

/// Kernel row of one item against a reference set.
pub fn lk_row(u: &EmbeddingVector, refs: &[EmbeddingVector], sigma: f64) -> Vec<f64> {
    refs.iter().map(|r| lk_value(u, r, sigma)).collect()
}

/// Symmetric m x m landmark-kernel matrix. Diagonal entries are exactly the
/// landmark count K; the matrix is positive semidefinite.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: Vec<f64>,
    pub m: usize,
    pub sigma: f64,
    pub landmark_count: usize,
}

impl GramMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// For linear baselines and tests: wrap explicit entries. The caller owns
    /// the symmetry/PSD expectations of downstream consumers.
    pub fn from_entries(entries: Vec<f64>, m: usize, sigma: f64, landmark_count: usize) -> Self {
        assert_eq!(entries.len(), m * m);
        Self { entries, m, sigma, landmark_count }
    }

    /// CSV matrix plus a JSON sidecar `{sigma, K, m}` at `<path>.meta.json`.
    pub fn write_csv_with_sidecar(&self, path: impl AsRef<Path>) -> Result<(), KernelError> {
        let path = path.as_ref();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for i in 0..self.m {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        let sidecar = serde_json::json!({
            "sigma": self.sigma,
            "K": self.landmark_count,
            "m": self.m,
        });
        std::fs::write(
            path.with_extension("meta.json"),
            serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
        )?;
        Ok(())
    }
}

/// Builds the gram from embedding rows; entries filled in parallel per row,
/// diagonal pinned to K exactly.
pub fn gram(embeddings: &[EmbeddingVector], sigma: f64) -> Result<GramMatrix, KernelError> {
    if sigma <= 0.0 {
        return Err(KernelError::NonPositiveBandwidth(sigma));
    }
    let m = embeddings.len();
    let k = embeddings.first().map_or(0, |e| e.values.len());
    let mut entries = vec![0.0; m * m];
    entries
        .par_chunks_mut(m.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            for j in 0..m {
                row[j] = if i == j {
                    k as f64
                } else {
                    lk_value(&embeddings[i], &embeddings[j], sigma)
                };
            }
        });
    // enforce exact symmetry against floating-point evaluation-order drift
    for i in 0..m {
        for j in (i + 1)..m {
            let v = entries[i * m + j];
            entries[j * m + i] = v;
        }
    }
    Ok(GramMatrix { entries, m, sigma, landmark_count: k })
}

/// Induced RKHS distance via the per-coordinate expansion
/// `sqrt(sum_k 2 (1 - exp(-gap_k^2 / 2 sigma^2)))`.
pub fn rkhs_distance(u: &EmbeddingVector, v: &EmbeddingVector, sigma: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma * sigma);
    u.values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| {
            let gap = a - b;
            2.0 * (-(-gap * gap * inv).exp_m1())
        })
        .sum::<f64>()
        .sqrt()
}

/// Bandwidth as the q-th quantile of the nonzero pairwise l2 distances
/// between embedding rows (raw distances, no normalization).
pub fn bandwidth_quantile(embeddings: &[EmbeddingVector], q: f64) -> Result<f64, KernelError> {
    if !(0.0..1.0).contains(&q) || q == 0.0 {
        return Err(KernelError::BadQuantile(q));
    }
    let mut dists = Vec::with_capacity(embeddings.len() * (embeddings.len() + 1) / 2);
    for i in 0..embeddings.len() {
        for j in (i + 1)..embeddings.len() {
            let d = embeddings[i].l2_distance(&embeddings[j]);
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return Err(KernelError::DegenerateEmbedding);
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(quantile_sorted(&dists, q))
}

/// Joint Gaussian RBF on the embedding, `exp(-||u - v||^2 / 2 sigma^2)`;
/// comparison baseline only.
pub fn rbf_value(u: &EmbeddingVector, v: &EmbeddingVector, sigma: f64) -> f64 {
    let d = u.l2_distance(v);
    (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Plain inner product; the linear baseline runs through the same dual
/// solver with this gram.
pub fn linear_value(u: &EmbeddingVector, v: &EmbeddingVector) -> f64 {
    u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum()
}

pub fn rbf_gram(embeddings: &[EmbeddingVector], sigma: f64) -> Result<GramMatrix, KernelError> {
    if sigma <= 0.0 {
        return Err(KernelError::NonPositiveBandwidth(sigma));
    }
    let m = embeddings.len();
    let k = embeddings.first().map_or(0, |e| e.values.len());
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        entries[i * m + i] = 1.0;
        for j in (i + 1)..m {
            let v = rbf_value(&embeddings[i], &embeddings[j], sigma);
            entries[i * m + j] = v;
            entries[j * m + i] = v;
        }
    }
    Ok(GramMatrix { entries, m, sigma, landmark_count: k })
}

pub fn linear_gram(embeddings: &[EmbeddingVector]) -> GramMatrix {
    let m = embeddings.len();
    let k = embeddings.first().map_or(0, |e| e.values.len());
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let v = linear_value(&embeddings[i], &embeddings[j]);
            entries[i * m + j] = v;
            entries[j * m + i] = v;
        }
    }
    GramMatrix { entries, m, sigma: f64::NAN, landmark_count: k }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondegeneracyFloor {
    /// `kappa * rho_nu` with `kappa = 1 / (sigma sqrt 2)`.
    pub value: f64,
    /// True when `sigma >= sqrt(2) * n_max * tau`, the regime in which the
    /// floor is a guarantee.
    pub regime_ok: bool,
    pub degenerate: bool,
}

pub fn nondegeneracy_floor(
    cfg: &LandmarkConfiguration,
    sigma: f64,
    n_max: usize,
) -> NondegeneracyFloor {
    let rho = crate::cover::rho_nu(cfg);
    let kappa = 1.0 / (sigma * 2.0f64.sqrt());
    NondegeneracyFloor {
        value: kappa * rho.value,
        regime_ok: sigma >= 2.0f64.sqrt() * n_max as f64 * cfg.tau,
        degenerate: rho.degenerate,
    }
}
