//! Raw-embedding class statistics, concentration radii (Pinelis and
//! Gaussian plug-in), certified nearest-centroid prediction, and the
//! per-class sample thresholds.

use thiserror::Error;

use crate::embed::EmbeddingVector;

pub use crate::stats::chi2_quantile;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("need at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("embedding count {embeddings} does not match label count {labels}")]
    SizeMismatch { embeddings: usize, labels: usize },
    #[error("power iteration failed to converge")]
    PowerIterationDiverged,
}

#[derive(Debug, Clone)]
pub struct ClassStat {
    pub class: usize,
    pub mean: Vec<f64>,
    /// Operator norm of the biased class covariance, by power iteration.
    pub cov_opnorm: f64,
    pub count: usize,
    /// `min_{c' != c} || mean_c - mean_c' ||`.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct ClassStats {
    pub classes: Vec<ClassStat>,
    /// Max embedding norm seen in the training fold.
    pub r_bar_hat: f64,
    /// Global minimum gap.
    pub delta_hat: f64,
    /// Embedding dimension K.
    pub dim: usize,
}

impl ClassStats {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn m_min(&self) -> usize {
        self.classes.iter().map(|c| c.count).min().unwrap_or(0)
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Top eigenvalue of the biased class covariance via power iteration on the
/// centered rows; tolerance 1e-9 on the Rayleigh quotient, 10 000 iteration
/// cap. Never materializes the K x K matrix.
fn covariance_opnorm(rows: &[&EmbeddingVector], mean: &[f64]) -> f64 {
    let k = mean.len();
    let m = rows.len() as f64;
    if rows.len() < 2 {
        return 0.0;
    }
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.values.iter().zip(mean).map(|(v, mu)| v - mu).collect())
        .collect();
    // deterministic start with uneven entries
    let mut v: Vec<f64> = (0..k).map(|i| 1.0 + 0.5 * (i as f64) / k as f64).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut eig = 0.0;
    for _ in 0..10_000 {
        let mut w = vec![0.0; k];
        for c in &centered {
            let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (wi, ci) in w.iter_mut().zip(c) {
                *wi += dot * ci / m;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm; // Rayleigh quotient of the unit iterate
        w.iter_mut().for_each(|x| *x /= norm);
        let done = (next - eig).abs() <= 1e-9 * next.max(1e-300);
        eig = next;
        v = w;
        if done {
            break;
        }
    }
    eig
}

pub fn fit_class_stats(
    embeddings: &[EmbeddingVector],
    labels: &[usize],
) -> Result<ClassStats, CertifyError> {
    if embeddings.len() != labels.len() {
        return Err(CertifyError::SizeMismatch {
            embeddings: embeddings.len(),
            labels: labels.len(),
        });
    }
    let mut by_class = std::collections::BTreeMap::<usize, Vec<&EmbeddingVector>>::new();
    for (e, &y) in embeddings.iter().zip(labels) {
        by_class.entry(y).or_default().push(e);
    }
    if by_class.len() < 2 {
        return Err(CertifyError::TooFewClasses(by_class.len()));
    }
    let dim = embeddings[0].values.len();
    let mut classes: Vec<ClassStat> = by_class
        .iter()
        .map(|(&class, rows)| {
            let mut mean = vec![0.0; dim];
            for r in rows {
                for (m, v) in mean.iter_mut().zip(&r.values) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
            let cov_opnorm = covariance_opnorm(rows, &mean);
            ClassStat { class, mean, cov_opnorm, count: rows.len(), gap: f64::INFINITY }
        })
        .collect();
    for i in 0..classes.len() {
        let mut gap = f64::INFINITY;
        for j in 0..classes.len() {
            if i != j {
                gap = gap.min(l2(&classes[i].mean, &classes[j].mean));
            }
        }
        classes[i].gap = gap;
    }
    let r_bar_hat = embeddings.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let delta_hat = classes.iter().map(|c| c.gap).fold(f64::INFINITY, f64::min);
    Ok(ClassStats { classes, r_bar_hat, delta_hat, dim })
}

/// Non-asymptotic concentration radius `2 R sqrt(2 log(2k/delta) / m_min)`.
pub fn pinelis_radius(r_bar: f64, n_classes: usize, delta: f64, m_min: usize) -> f64 {
    2.0 * r_bar * (2.0 * (2.0 * n_classes as f64 / delta).ln() / m_min as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct GaussianRadii {
    pub per_class: Vec<(usize, f64)>,
    pub max: f64,
}

/// Gaussian plug-in radii `sqrt(||Sigma_c||_op chi2_{K, 1 - delta/k} / m_c)`
/// per class, and their max.
pub fn gaussian_radius(stats: &ClassStats, delta: f64) -> GaussianRadii {
    let k = stats.n_classes();
    let q = chi2_quantile(stats.dim, 1.0 - delta / k as f64);
    let per_class: Vec<(usize, f64)> = stats
        .classes
        .iter()
        .map(|c| (c.class, (c.cov_opnorm * q / c.count as f64).sqrt()))
        .collect();
    let max = per_class.iter().map(|&(_, r)| r).fold(0.0, f64::max);
    GaussianRadii { per_class, max }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusMode {
    Pinelis,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiringScope {
    /// Fire on the predicted class's own radius and gap (default).
    PerClass,
    /// Fire on the worst-case radius against the global gap.
    Global,
}

/// Predicted class plus certificate verdict and the radius that decided it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedPrediction {
    pub predicted: usize,
    pub certified: bool,
    pub radius: f64,
    pub half_gap: f64,
}

pub fn certified_predict(
    stats: &ClassStats,
    embedding: &EmbeddingVector,
    delta: f64,
    mode: RadiusMode,
) -> CertifiedPrediction {
    certified_predict_with_scope(stats, embedding, delta, mode, FiringScope::PerClass)
}

pub fn certified_predict_with_scope(
    stats: &ClassStats,
    embedding: &EmbeddingVector,
    delta: f64,
    mode: RadiusMode,
    scope: FiringScope,
) -> CertifiedPrediction {
    // nearest centroid; ties go to the lowest class index
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for (i, c) in stats.classes.iter().enumerate() {
        let d = l2(&embedding.values, &c.mean);
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    let predicted = &stats.classes[best];
    let k = stats.n_classes();
    let radius_for = |count: usize, opnorm: f64| match mode {
        RadiusMode::Pinelis => pinelis_radius(stats.r_bar_hat, k, delta, count),
        RadiusMode::Gaussian => {
            let q = chi2_quantile(stats.dim, 1.0 - delta / k as f64);
            (opnorm * q / count as f64).sqrt()
        }
    };
    let (radius, half_gap) = match scope {
        FiringScope::PerClass => {
            (radius_for(predicted.count, predicted.cov_opnorm), predicted.gap / 2.0)
        }
        FiringScope::Global => {
            let worst = stats
                .classes
                .iter()
                .map(|c| radius_for(c.count, c.cov_opnorm))
                .fold(0.0, f64::max);
            (worst, stats.delta_hat / 2.0)
        }
    };
    CertifiedPrediction {
        predicted: predicted.class,
        certified: radius < half_gap,
        radius,
        half_gap,
    }
}

/// Sample-size thresholds past which every prediction is certified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassThresholds {
    pub class: usize,
    pub m_pinelis: usize,
    pub m_gaussian: usize,
    /// The univariate-quantile variant (chi-squared with one degree of
    /// freedom in place of K).
    pub m_gaussian_univariate: usize,
}

pub fn m_star_pinelis(r_bar: f64, n_classes: usize, delta: f64, gap: f64) -> usize {
    let v = 32.0 * r_bar * r_bar * (2.0 * n_classes as f64 / delta).ln() / (gap * gap);
    (v.ceil() as usize).max(1)
}

pub fn m_star_gaussian(cov_opnorm: f64, chi2_value: f64, gap: f64) -> usize {
    let v = 4.0 * cov_opnorm * chi2_value / (gap * gap);
    (v.ceil() as usize).max(1)
}

pub fn sample_thresholds(stats: &ClassStats, delta: f64) -> Vec<ClassThresholds> {
    let k = stats.n_classes();
    let q_full = chi2_quantile(stats.dim, 1.0 - delta / k as f64);
    let q_uni = chi2_quantile(1, 1.0 - delta / k as f64);
    stats
        .classes
        .iter()
        .map(|c| ClassThresholds {
            class: c.class,
            m_pinelis: m_star_pinelis(stats.r_bar_hat, k, delta, c.gap),
            m_gaussian: m_star_gaussian(c.cov_opnorm, q_full, c.gap),
            m_gaussian_univariate: m_star_gaussian(c.cov_opnorm, q_uni, c.gap),
        })
        .collect()
}
