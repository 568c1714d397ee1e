//! Closed-form selection statistics computed from gram blocks, data-level
//! tau estimators, and Spearman validation of rankers.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagram::{bottleneck_distance, PersistenceDiagram};
use crate::kernel::GramMatrix;
use crate::stats::quantile;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("need at least two non-empty classes")]
    TooFewClasses,
    #[error("need m >= k + 2 samples, got m = {m} for k = {k} classes")]
    TooFewSamples { m: usize, k: usize },
    #[error("shrunk within-class covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("no cross-class pairs available")]
    NoCrossPairs,
    #[error("labels missing or mismatched: {0}")]
    BadLabels(String),
}

fn class_indices(labels: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let mut by_class = std::collections::BTreeMap::<usize, Vec<usize>>::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    by_class.into_iter().collect()
}

/// Squared RKHS distance between class means of classes `a` and `b`,
/// from gram block sums, clamped at zero against round-off.
fn mean_gap_sq(gram: &GramMatrix, ia: &[usize], ib: &[usize]) -> f64 {
    let block = |rows: &[usize], cols: &[usize]| -> f64 {
        rows.iter().map(|&i| cols.iter().map(|&j| gram.get(i, j)).sum::<f64>()).sum()
    };
    let (na, nb) = (ia.len() as f64, ib.len() as f64);
    let v = block(ia, ia) / (na * na) + block(ib, ib) / (nb * nb)
        - 2.0 * block(ia, ib) / (na * nb);
    v.max(0.0)
}

/// Empirical kernel margin: half the minimum RKHS distance between
/// class-conditional mean embeddings, in O(m^2) from the gram.
pub fn kernel_margin_hat(gram: &GramMatrix, labels: &[usize]) -> Result<f64, SelectError> {
    let classes = class_indices(labels);
    if classes.len() < 2 {
        return Err(SelectError::TooFewClasses);
    }
    let mut best = f64::INFINITY;
    for (i, (_, ia)) in classes.iter().enumerate() {
        for (_, ib) in classes.iter().skip(i + 1).map(|(c, v)| (c, v)) {
            best = best.min(mean_gap_sq(gram, ia, ib));
        }
    }
    Ok(0.5 * best.sqrt())
}

/// Scale-corrected ranking statistic `gamma_hat / sqrt(K)`.
pub fn score(gamma_hat: f64, k: usize) -> f64 {
    gamma_hat / (k as f64).sqrt()
}

/// Kernel-Fisher trace ratio: `min_pairs ||mu_c - mu_c'||^2 / (2 tr(Sigma))`
/// with the pooled trace from biased gram-block sums. Zero within-class
/// spread returns the +inf sentinel.
pub fn fisher_ker(gram: &GramMatrix, labels: &[usize]) -> Result<f64, SelectError> {
    let classes = class_indices(labels);
    if classes.len() < 2 {
        return Err(SelectError::TooFewClasses);
    }
    let mut pooled = 0.0;
    for (_, idx) in &classes {
        let mc = idx.len() as f64;
        let diag: f64 = idx.iter().map(|&i| gram.get(i, i)).sum();
        let block: f64 =
            idx.iter().map(|&i| idx.iter().map(|&j| gram.get(i, j)).sum::<f64>()).sum();
        pooled += diag / mc - block / (mc * mc);
    }
    pooled /= classes.len() as f64;
    let mut best = f64::INFINITY;
    for (i, (_, ia)) in classes.iter().enumerate() {
        for (_, ib) in classes.iter().skip(i + 1).map(|(c, v)| (c, v)) {
            best = best.min(mean_gap_sq(gram, ia, ib));
        }
    }
    if pooled <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(best / (2.0 * pooled))
}

/// Ledoit-Wolf shrinkage intensity toward the scaled identity, computed on
/// within-class-centered feature rows; clamped to [0.05, 1].
fn ledoit_wolf_intensity(z: &DMatrix<f64>) -> f64 {
    let m = z.nrows();
    let p = z.ncols();
    let s = z.transpose() * z / m as f64;
    let mu = s.trace() / p as f64;
    let mut d2 = 0.0;
    for i in 0..p {
        for j in 0..p {
            let target = if i == j { mu } else { 0.0 };
            d2 += (s[(i, j)] - target).powi(2);
        }
    }
    if d2 <= 0.0 {
        return 1.0;
    }
    // (1/m^2) sum_i || z_i z_i^T - S ||_F^2
    let s_norm2: f64 = s.iter().map(|v| v * v).sum();
    let mut b2 = 0.0;
    for i in 0..m {
        let zi = z.row(i);
        let zi_sq: f64 = zi.iter().map(|v| v * v).sum();
        let quad = (zi * &s).dot(&zi);
        b2 += zi_sq * zi_sq - 2.0 * quad + s_norm2;
    }
    b2 /= (m * m) as f64;
    (b2.min(d2) / d2).clamp(0.05, 1.0)
}

/// Kernel-Mahalanobis margin via the kernel-FDA realization in feature
/// coordinates: eigendecompose the gram into feature rows, pool the
/// within-class covariance, shrink it toward the scaled identity with the
/// Ledoit-Wolf intensity (or the caller's override), and measure class-mean
/// separations in the shrunk metric via Cholesky solves.
pub fn mahalanobis_margin(
    gram: &GramMatrix,
    labels: &[usize],
    shrinkage: Option<f64>,
) -> Result<f64, SelectError> {
    let classes = class_indices(labels);
    let k = classes.len();
    let m = labels.len();
    if k < 2 {
        return Err(SelectError::TooFewClasses);
    }
    if m < k + 2 {
        return Err(SelectError::TooFewSamples { m, k });
    }

    let g = DMatrix::from_fn(m, m, |i, j| gram.get(i, j));
    let eig = nalgebra::SymmetricEigen::new(g);
    // feature rows Y with Y Y^T = G (eigenvalues clamped at zero)
    let sqrt_vals: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let mut y = eig.eigenvectors;
    for (j, s) in sqrt_vals.iter().enumerate() {
        y.column_mut(j).scale_mut(*s);
    }

    // within-class centering
    let mut z = y.clone();
    let mut means = Vec::with_capacity(k);
    for (_, idx) in &classes {
        let mut mean = nalgebra::DVector::zeros(m);
        for &i in idx {
            mean += y.row(i).transpose();
        }
        mean /= idx.len() as f64;
        for &i in idx {
            let centered = y.row(i).transpose() - &mean;
            z.row_mut(i).copy_from(&centered.transpose());
        }
        means.push(mean);
    }

    let lambda = match shrinkage {
        Some(l) => l.clamp(0.0, 1.0),
        None => ledoit_wolf_intensity(&z),
    };
    let sigma = z.transpose() * &z / m as f64;
    let target_scale = sigma.trace() / m as f64;
    let mut shrunk = sigma * (1.0 - lambda);
    for i in 0..m {
        shrunk[(i, i)] += lambda * target_scale;
    }
    let chol = nalgebra::Cholesky::new(shrunk).ok_or(SelectError::NotPositiveDefinite)?;

    let mut best = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            let d = &means[i] - &means[j];
            let u = chol.l().solve_lower_triangular(&d).ok_or(SelectError::NotPositiveDefinite)?;
            best = best.min(u.norm_squared());
        }
    }
    Ok(best.sqrt())
}

/// Quantile of bottleneck distances over cross-class pairs subsampled
/// uniformly without replacement; deterministic given the seed.
pub fn tau_hat(
    diagrams: &[PersistenceDiagram],
    labels: &[usize],
    n_pairs: usize,
    q: f64,
    seed: u64,
) -> Result<f64, SelectError> {
    if diagrams.len() != labels.len() {
        return Err(SelectError::BadLabels(format!(
            "{} diagrams vs {} labels",
            diagrams.len(),
            labels.len()
        )));
    }
    let mut pairs = Vec::new();
    for i in 0..diagrams.len() {
        for j in (i + 1)..diagrams.len() {
            if labels[i] != labels[j] {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        return Err(SelectError::NoCrossPairs);
    }
    let take = n_pairs.min(pairs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // partial Fisher-Yates: the first `take` entries are a uniform sample
    // without replacement
    for i in 0..take {
        let j = rng.gen_range(i..pairs.len());
        pairs.swap(i, j);
    }
    let dists: Vec<f64> = pairs[..take]
        .iter()
        .map(|&(i, j)| bottleneck_distance(&diagrams[i], &diagrams[j]).0)
        .collect();
    Ok(quantile(&dists, q))
}

/// Equal-weight certificate estimate `tau_hat / (4 sqrt K)`.
pub fn rho_nu_hat(tau_hat: f64, k: usize) -> f64 {
    tau_hat / (4.0 * (k as f64).sqrt())
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    num / (dx.sqrt() * dy.sqrt())
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// One row of the selector sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorReport {
    pub gamma_hat: f64,
    pub score: f64,
    pub fisher_ker: f64,
    pub rho_mah: f64,
    pub tau_hat: f64,
    pub rho_nu_hat: f64,
}

impl SelectorReport {
    pub fn compute(
        gram: &GramMatrix,
        labels: &[usize],
        diagrams: &[PersistenceDiagram],
        tau_pairs: usize,
        tau_quantile: f64,
        seed: u64,
    ) -> Result<Self, SelectError> {
        let gamma = kernel_margin_hat(gram, labels)?;
        let k = gram.landmark_count;
        let tau = tau_hat(diagrams, labels, tau_pairs, tau_quantile, seed)?;
        Ok(SelectorReport {
            gamma_hat: gamma,
            score: score(gamma, k),
            fisher_ker: fisher_ker(gram, labels)?,
            rho_mah: mahalanobis_margin(gram, labels, None)?,
            tau_hat: tau,
            rho_nu_hat: rho_nu_hat(tau, k),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::DiagramPoint;
    use crate::embed::EmbeddingVector;

    fn ev(values: Vec<f64>) -> EmbeddingVector {
        EmbeddingVector { values, config_id: 0 }
    }

    fn lk_gram_from(embeds: &[EmbeddingVector], sigma: f64) -> GramMatrix {
        crate::kernel::gram(embeds, sigma).unwrap()
    }

    fn random_two_class(
        rng: &mut crate::TestRng,
        m_per: usize,
        k: usize,
        sep: f64,
    ) -> (Vec<EmbeddingVector>, Vec<usize>) {
        let mut embeds = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2usize {
            for _ in 0..m_per {
                let v: Vec<f64> = (0..k)
                    .map(|_| (rng.normal() * 0.3 + sep * class as f64).abs())
                    .collect();
                embeds.push(ev(v));
                labels.push(class);
            }
        }
        (embeds, labels)
    }

    /// Feature-coordinate oracle: explicit features from the gram's
    /// eigendecomposition; class means and their distances directly.
    fn gamma_oracle(gram: &GramMatrix, labels: &[usize]) -> f64 {
        let m = labels.len();
        let g = DMatrix::from_fn(m, m, |i, j| gram.get(i, j));
        let eig = nalgebra::SymmetricEigen::new(g);
        let mut y = eig.eigenvectors;
        for (j, v) in eig.eigenvalues.iter().enumerate() {
            y.column_mut(j).scale_mut(v.max(0.0).sqrt());
        }
        let classes = class_indices(labels);
        let means: Vec<nalgebra::DVector<f64>> = classes
            .iter()
            .map(|(_, idx)| {
                let mut mean = nalgebra::DVector::zeros(m);
                for &i in idx {
                    mean += y.row(i).transpose();
                }
                mean / idx.len() as f64
            })
            .collect();
        let mut best = f64::INFINITY;
        for i in 0..means.len() {
            for j in (i + 1)..means.len() {
                best = best.min((&means[i] - &means[j]).norm());
            }
        }
        0.5 * best
    }

    #[test]
    fn gamma_single_diagram_per_class_is_half_rkhs_distance() {
        let embeds = vec![ev(vec![0.0, 1.0]), ev(vec![1.0, 0.5])];
        let sigma = 0.4;
        let g = lk_gram_from(&embeds, sigma);
        let gamma = kernel_margin_hat(&g, &[0, 1]).unwrap();
        let expect = 0.5 * crate::kernel::rkhs_distance(&embeds[0], &embeds[1], sigma);
        assert!((gamma - expect).abs() < 1e-12);
    }

    #[test]
    fn gamma_identical_classes_is_zero() {
        let embeds = vec![ev(vec![0.3, 0.7]), ev(vec![0.3, 0.7])];
        let g = lk_gram_from(&embeds, 0.5);
        let gamma = kernel_margin_hat(&g, &[0, 1]).unwrap();
        assert!(gamma.abs() < 1e-9);
    }

    #[test]
    fn gamma_block_formula_matches_feature_oracle() {
        let mut rng = crate::test_rng(151);
        for _ in 0..30 {
            let m_per = rng.usize_in(2, 10);
            let k = rng.usize_in(1, 5);
            let sep = rng.f64_in(0.2, 1.5);
            let (embeds, labels) = random_two_class(&mut rng, m_per, k, sep);
            let g = lk_gram_from(&embeds, rng.f64_in(0.2, 1.0));
            let gamma = kernel_margin_hat(&g, &labels).unwrap();
            let oracle = gamma_oracle(&g, &labels);
            assert!((gamma - oracle).abs() < 1e-8, "gamma {gamma} oracle {oracle}");
        }
    }

    #[test]
    fn score_properties() {
        assert_eq!(score(0.0, 7), 0.0);
        assert_eq!(score(0.42, 1), 0.42);
        let g = 0.2459;
        assert!((score(g, 400) - 0.012295).abs() < 1e-6);
    }

    #[test]
    fn selectors_invariant_under_sample_permutation() {
        let mut rng = crate::test_rng(157);
        let (embeds, labels) = random_two_class(&mut rng, 6, 3, 1.0);
        let g = lk_gram_from(&embeds, 0.5);
        let base = (
            kernel_margin_hat(&g, &labels).unwrap(),
            fisher_ker(&g, &labels).unwrap(),
            mahalanobis_margin(&g, &labels, None).unwrap(),
        );
        let mut perm: Vec<usize> = (0..labels.len()).collect();
        rng.shuffle(&mut perm);
        let pe: Vec<EmbeddingVector> = perm.iter().map(|&i| embeds[i].clone()).collect();
        let pl: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        let pg = lk_gram_from(&pe, 0.5);
        assert!((kernel_margin_hat(&pg, &pl).unwrap() - base.0).abs() < 1e-9);
        assert!((fisher_ker(&pg, &pl).unwrap() - base.1).abs() < 1e-9);
        assert!((mahalanobis_margin(&pg, &pl, None).unwrap() - base.2).abs() < 1e-6);
    }

    #[test]
    fn fisher_zero_mean_gap_and_degenerate_spread() {
        // equal class means, positive spread
        let embeds = vec![
            ev(vec![0.0]),
            ev(vec![1.0]),
            ev(vec![0.0]),
            ev(vec![1.0]),
        ];
        let g = lk_gram_from(&embeds, 0.7);
        let f = fisher_ker(&g, &[0, 0, 1, 1]).unwrap();
        assert!(f.abs() < 1e-12);

        // zero within-class spread: +inf sentinel
        let embeds = vec![ev(vec![0.0]), ev(vec![0.0]), ev(vec![1.0]), ev(vec![1.0])];
        let g = lk_gram_from(&embeds, 0.7);
        let f = fisher_ker(&g, &[0, 0, 1, 1]).unwrap();
        assert!(f.is_infinite());
    }

    #[test]
    fn fisher_matches_direct_trace_computation() {
        let mut rng = crate::test_rng(163);
        let (embeds, labels) = random_two_class(&mut rng, 5, 3, 0.8);
        let sigma = 0.6;
        let g = lk_gram_from(&embeds, sigma);
        let got = fisher_ker(&g, &labels).unwrap();

        // direct: feature coordinates from the eigendecomposition
        let m = labels.len();
        let gm = DMatrix::from_fn(m, m, |i, j| g.get(i, j));
        let eig = nalgebra::SymmetricEigen::new(gm);
        let mut y = eig.eigenvectors;
        for (j, v) in eig.eigenvalues.iter().enumerate() {
            y.column_mut(j).scale_mut(v.max(0.0).sqrt());
        }
        let classes = class_indices(&labels);
        let mut pooled = 0.0;
        let mut means = Vec::new();
        for (_, idx) in &classes {
            let mut mean = nalgebra::DVector::zeros(m);
            for &i in idx {
                mean += y.row(i).transpose();
            }
            mean /= idx.len() as f64;
            let var: f64 = idx
                .iter()
                .map(|&i| (y.row(i).transpose() - &mean).norm_squared())
                .sum::<f64>()
                / idx.len() as f64;
            pooled += var;
            means.push(mean);
        }
        pooled /= classes.len() as f64;
        let gap = (&means[0] - &means[1]).norm_squared();
        let expect = gap / (2.0 * pooled);
        assert!((got - expect).abs() < 1e-8, "got {got} expect {expect}");
    }

    #[test]
    fn mahalanobis_identical_means_is_zero() {
        let embeds = vec![
            ev(vec![0.0, 0.4]),
            ev(vec![1.0, 0.0]),
            ev(vec![0.0, 0.4]),
            ev(vec![1.0, 0.0]),
            ev(vec![0.5, 0.2]),
            ev(vec![0.5, 0.2]),
        ];
        let labels = vec![0, 0, 1, 1, 0, 1];
        let g = lk_gram_from(&embeds, 0.5);
        let rho = mahalanobis_margin(&g, &labels, None).unwrap();
        assert!(rho < 1e-6, "rho = {rho}");
    }

    #[test]
    fn mahalanobis_invariant_under_class_relabeling() {
        let mut rng = crate::test_rng(167);
        let (embeds, labels) = random_two_class(&mut rng, 6, 3, 1.0);
        let g = lk_gram_from(&embeds, 0.5);
        let rho = mahalanobis_margin(&g, &labels, None).unwrap();
        let swapped: Vec<usize> = labels.iter().map(|&y| 1 - y).collect();
        let rho2 = mahalanobis_margin(&g, &swapped, None).unwrap();
        assert!((rho - rho2).abs() < 1e-9);
    }

    /// At full shrinkage the metric is the scaled identity, so the ranking
    /// over candidates reduces to the gamma-hat ranking once the candidates
    /// share the within-class trace scale (the scale is the only non-gamma
    /// ingredient left at lambda = 1).
    #[test]
    fn mahalanobis_at_full_shrinkage_ranks_like_gamma() {
        let mut rng = crate::test_rng(173);
        for _ in 0..20 {
            let mut gammas = Vec::new();
            let mut rhos = Vec::new();
            for _ in 0..5 {
                let sep = rng.f64_in(0.1, 2.0);
                let (embeds, labels) = random_two_class(&mut rng, 8, 4, sep);
                let g = lk_gram_from(&embeds, rng.f64_in(0.3, 1.0));
                // normalize to unit within-class trace so lambda = 1 leaves
                // only the mean separation
                let m = labels.len();
                let mut trace = 0.0;
                for (_, idx) in class_indices(&labels) {
                    let mc = idx.len() as f64;
                    let diag: f64 = idx.iter().map(|&i| g.get(i, i)).sum();
                    let block: f64 = idx
                        .iter()
                        .map(|&i| idx.iter().map(|&j| g.get(i, j)).sum::<f64>())
                        .sum();
                    trace += diag - block / mc;
                }
                let scale = m as f64 / trace;
                let scaled = GramMatrix::from_entries(
                    g.entries().iter().map(|v| v * scale).collect(),
                    m,
                    g.sigma,
                    g.landmark_count,
                );
                gammas.push(kernel_margin_hat(&scaled, &labels).unwrap());
                rhos.push(mahalanobis_margin(&scaled, &labels, Some(1.0)).unwrap());
            }
            let rank = |xs: &[f64]| {
                let mut idx: Vec<usize> = (0..xs.len()).collect();
                idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
                idx
            };
            assert_eq!(rank(&gammas), rank(&rhos), "gammas {gammas:?} rhos {rhos:?}");
        }
    }

    /// Spherical within-class covariance s^2 I gives rho = 2 gamma / s at
    /// the population level; checked within sampling tolerance on a linear
    /// gram where the feature space is explicit.
    #[test]
    fn mahalanobis_spherical_case() {
        let mut rng = crate::test_rng(179);
        let m_per = 300;
        let k = 4;
        let s = 0.5;
        let mut embeds = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2usize {
            for _ in 0..m_per {
                let v: Vec<f64> =
                    (0..k).map(|_| rng.normal() * s + 3.0 * class as f64).collect();
                embeds.push(ev(v));
                labels.push(class);
            }
        }
        let m = embeds.len();
        let mut entries = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                entries[i * m + j] = embeds[i]
                    .values
                    .iter()
                    .zip(&embeds[j].values)
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        let g = GramMatrix::from_entries(entries, m, 1.0, k);
        let gamma = kernel_margin_hat(&g, &labels).unwrap();
        let rho = mahalanobis_margin(&g, &labels, Some(0.05)).unwrap();
        let expect = 2.0 * gamma / s;
        assert!(
            (rho - expect).abs() / expect < 0.1,
            "rho {rho} vs 2 gamma/s {expect}"
        );
    }

    #[test]
    fn tau_hat_behaviour() {
        let pt = |b: f64, d: f64| DiagramPoint::new(b, d).unwrap();
        let mk = |death: f64, label: usize| {
            PersistenceDiagram::new(vec![pt(0.0, death)], Some(label), "t")
        };
        // all cross-class distances equal
        let diagrams = vec![mk(10.0, 0), mk(10.0, 0), mk(12.0, 1), mk(12.0, 1)];
        let labels = vec![0, 0, 1, 1];
        let t = tau_hat(&diagrams, &labels, 50, 0.5, 9).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        // quantile 0 is the minimum sampled distance
        let diagrams2 = vec![mk(10.0, 0), mk(11.0, 1), mk(14.0, 1)];
        let labels2 = vec![0, 1, 1];
        let t0 = tau_hat(&diagrams2, &labels2, 50, 0.0, 9).unwrap();
        assert!((t0 - 1.0).abs() < 1e-12);
        // determinism
        let a = tau_hat(&diagrams, &labels, 2, 0.5, 123).unwrap();
        let b = tau_hat(&diagrams, &labels, 2, 0.5, 123).unwrap();
        assert_eq!(a, b);
        // no cross pairs
        assert!(tau_hat(&diagrams[..2], &labels[..2], 5, 0.5, 1).is_err());

        assert!((rho_nu_hat(2.0, 4) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn spearman_hand_cases() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]) + 1.0).abs() < 1e-12);
        let r = spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]);
        assert!((r - 0.5).abs() < 1e-12);
        // average ranks on ties: xs has a tie, correlation stays defined
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]);
        assert!(r > 0.0 && r < 1.0);
    }
}
