//! Soft-margin SVM on precomputed grams: a two-variable working-set dual
//! solver with maximal-violating-pair selection, one-vs-one multiclass with
//! majority vote, and the nested cross-validation harness in [`cv`].

pub mod cv;

use thiserror::Error;

use crate::kernel::GramMatrix;

/// Read access to a symmetric kernel matrix.
pub trait KernelView {
    fn size(&self) -> usize;
    fn at(&self, i: usize, j: usize) -> f64;
}

impl KernelView for GramMatrix {
    fn size(&self) -> usize {
        self.m
    }
    fn at(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// A kernel restricted to a subset of indices of a base kernel.
pub struct SubKernel<'a, K: KernelView> {
    pub base: &'a K,
    pub indices: &'a [usize],
}

impl<K: KernelView> KernelView for SubKernel<'_, K> {
    fn size(&self) -> usize {
        self.indices.len()
    }
    fn at(&self, i: usize, j: usize) -> f64 {
        self.base.at(self.indices[i], self.indices[j])
    }
}

/// Dense row-major symmetric matrix; test problems and linear baselines.
pub struct DenseKernel {
    pub entries: Vec<f64>,
    pub m: usize,
}

impl KernelView for DenseKernel {
    fn size(&self) -> usize {
        self.m
    }
    fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }
}

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("labels must be +1/-1 and both classes present")]
    SingleClass,
    #[error("gram is not positive semidefinite: working-set curvature {0}")]
    NonPsd(f64),
    #[error("solver did not reach tolerance {tol} in {iters} iterations (gap {gap})")]
    NoConvergence { tol: f64, iters: usize, gap: f64 },
    #[error("C must be positive, got {0}")]
    NonPositiveC(f64),
    #[error("labels and kernel size differ: {labels} vs {kernel}")]
    SizeMismatch { labels: usize, kernel: usize },
    #[error("class {class} has fewer than 2 samples; stratified folds undefined")]
    ClassAbsent { class: usize },
    #[error("need at least 2 folds with at most one per sample, got {folds} folds for {m} samples")]
    BadFoldCount { folds: usize, m: usize },
    #[error("kernel error: {0}")]
    Kernel(#[from] crate::kernel::KernelError),
    #[error("cover error: {0}")]
    Cover(#[from] crate::cover::CoverError),
}

/// Solved binary dual. `dual_coefficients[i] = alpha_i * y_i` over the
/// training items the model was fit on.
#[derive(Debug, Clone)]
pub struct BinarySvm {
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    pub c: f64,
    pub iterations: usize,
}

impl BinarySvm {
    /// Decision value for a test item given its kernel row against the
    /// model's own training set.
    pub fn predict_margin(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.dual_coefficients.len());
        self.dual_coefficients
            .iter()
            .zip(row)
            .map(|(a, k)| a * k)
            .sum::<f64>()
            + self.bias
    }
}

/// Maximal KKT violation over the training set; the solver drives this to
/// within its tolerance.
pub fn kkt_residual<K: KernelView>(model: &BinarySvm, kernel: &K, labels: &[f64]) -> f64 {
    let m = labels.len();
    let eps = 1e-10 * model.c.max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let f: f64 = (0..m)
            .map(|j| model.dual_coefficients[j] * kernel.at(i, j))
            .sum::<f64>()
            + model.bias;
        let yf = labels[i] * f;
        let alpha = model.dual_coefficients[i] * labels[i];
        let v = if alpha <= eps {
            (1.0 - yf).max(0.0)
        } else if alpha >= model.c - eps {
            (yf - 1.0).max(0.0)
        } else {
            (yf - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// SMO with maximal-violating-pair selection on the soft-margin dual:
/// maximize `sum alpha - 1/2 sum alpha_i alpha_j y_i y_j K_ij` subject to
/// `0 <= alpha <= C`, `sum alpha_i y_i = 0`. Deterministic given input
/// order; ties in pair selection break toward the lowest index.
pub fn solve_binary<K: KernelView>(
    kernel: &K,
    labels: &[f64],
    c: f64,
    tol: f64,
) -> Result<BinarySvm, SvmError> {
    let m = labels.len();
    if kernel.size() != m {
        return Err(SvmError::SizeMismatch { labels: m, kernel: kernel.size() });
    }
    if c <= 0.0 {
        return Err(SvmError::NonPositiveC(c));
    }
    if !labels.iter().any(|&y| y > 0.0) || !labels.iter().any(|&y| y < 0.0) {
        return Err(SvmError::SingleClass);
    }
    debug_assert!(labels.iter().all(|&y| y == 1.0 || y == -1.0));

    let mut alpha = vec![0.0f64; m];
    // u_i = sum_j alpha_j y_j K_ij, maintained incrementally
    let mut u = vec![0.0f64; m];
    let max_iter = 2_000_000 + 500 * m;
    let psd_floor = -1e-8;

    #[cfg(debug_assertions)]
    let mut prev_objective = f64::NEG_INFINITY;

    let mut iterations = 0;
    loop {
        // maximal violating pair
        let mut i_up: Option<usize> = None;
        let mut j_low: Option<usize> = None;
        let mut m_val = f64::NEG_INFINITY;
        let mut big_m_val = f64::INFINITY;
        for t in 0..m {
            let y = labels[t];
            let grad = y - u[t];
            let in_up = (y > 0.0 && alpha[t] < c) || (y < 0.0 && alpha[t] > 0.0);
            let in_low = (y < 0.0 && alpha[t] < c) || (y > 0.0 && alpha[t] > 0.0);
            if in_up && grad > m_val {
                m_val = grad;
                i_up = Some(t);
            }
            if in_low && grad < big_m_val {
                big_m_val = grad;
                j_low = Some(t);
            }
        }
        let (Some(i), Some(j)) = (i_up, j_low) else {
            break;
        };
        if m_val - big_m_val <= tol {
            break;
        }
        if iterations >= max_iter {
            return Err(SvmError::NoConvergence { tol, iters: iterations, gap: m_val - big_m_val });
        }
        iterations += 1;

        let kii = kernel.at(i, i);
        let kjj = kernel.at(j, j);
        let kij = kernel.at(i, j);
        let mut a = kii + kjj - 2.0 * kij;
        if a < psd_floor * (kii.abs() + kjj.abs() + 1.0) {
            return Err(SvmError::NonPsd(a));
        }
        if a <= 0.0 {
            a = 1e-12;
        }
        // step along alpha_i += y_i d, alpha_j -= y_j d
        let (yi, yj) = (labels[i], labels[j]);
        let unconstrained = (m_val - big_m_val) / a;
        let (lo_i, hi_i) = if yi > 0.0 { (-alpha[i], c - alpha[i]) } else { (alpha[i] - c, alpha[i]) };
        let (lo_j, hi_j) = if yj > 0.0 { (alpha[j] - c, alpha[j]) } else { (-alpha[j], c - alpha[j]) };
        let d = unconstrained.clamp(lo_i.max(lo_j), hi_i.min(hi_j));
        alpha[i] = (alpha[i] + yi * d).clamp(0.0, c);
        alpha[j] = (alpha[j] - yj * d).clamp(0.0, c);
        for t in 0..m {
            u[t] += d * (kernel.at(t, i) - kernel.at(t, j));
        }

        #[cfg(debug_assertions)]
        {
            // dual objective is non-decreasing across iterations
            let obj: f64 = alpha.iter().sum::<f64>()
                - 0.5
                    * (0..m)
                        .map(|p| alpha[p] * labels[p] * u[p])
                        .sum::<f64>();
            debug_assert!(
                obj >= prev_objective - 1e-9 * (1.0 + obj.abs()),
                "dual objective decreased: {prev_objective} -> {obj}"
            );
            prev_objective = obj;
        }
    }

    // bias: average over free support vectors, else the midpoint of the
    // final violating-pair bounds
    let eps = 1e-10 * c.max(1.0);
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..m {
        if alpha[t] > eps && alpha[t] < c - eps {
            free_sum += labels[t] - u[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::INFINITY;
        for t in 0..m {
            let y = labels[t];
            let grad = y - u[t];
            if (y > 0.0 && alpha[t] < c) || (y < 0.0 && alpha[t] > 0.0) {
                up = up.max(grad);
            }
            if (y < 0.0 && alpha[t] < c) || (y > 0.0 && alpha[t] > 0.0) {
                low = low.min(grad);
            }
        }
        (up + low) / 2.0
    };

    let support_indices: Vec<usize> = (0..m).filter(|&t| alpha[t] > eps).collect();
    let dual_coefficients = (0..m).map(|t| alpha[t] * labels[t]).collect();
    Ok(BinarySvm { dual_coefficients, bias, support_indices, c, iterations })
}

/// One binary model per unordered class pair; the lower class index plays
/// the +1 role.
#[derive(Debug, Clone)]
pub struct OvoModel {
    pub pairs: Vec<PairModel>,
    pub classes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PairModel {
    pub class_pos: usize,
    pub class_neg: usize,
    pub svm: BinarySvm,
    /// Global training indices the pair model was fit on.
    pub indices: Vec<usize>,
}

pub fn train_ovo<K: KernelView>(
    kernel: &K,
    labels: &[usize],
    c: f64,
    tol: f64,
) -> Result<OvoModel, SvmError> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(SvmError::SingleClass);
    }
    let mut pairs = Vec::with_capacity(classes.len() * (classes.len() - 1) / 2);
    for (a_pos, &ca) in classes.iter().enumerate() {
        for &cb in &classes[a_pos + 1..] {
            let indices: Vec<usize> =
                (0..labels.len()).filter(|&i| labels[i] == ca || labels[i] == cb).collect();
            let sub_labels: Vec<f64> =
                indices.iter().map(|&i| if labels[i] == ca { 1.0 } else { -1.0 }).collect();
            let sub = SubKernel { base: kernel, indices: &indices };
            let svm = solve_binary(&sub, &sub_labels, c, tol)?;
            pairs.push(PairModel { class_pos: ca, class_neg: cb, svm, indices });
        }
    }
    Ok(OvoModel { pairs, classes })
}

/// Majority vote over pairwise decisions. Vote ties break toward the
/// largest summed signed decision value, then the lowest class index.
pub fn predict_ovo(model: &OvoModel, row: &[f64]) -> usize {
    let max_class = *model.classes.iter().max().unwrap() + 1;
    let mut votes = vec![0usize; max_class];
    let mut strength = vec![0.0f64; max_class];
    for pair in &model.pairs {
        let sub_row: Vec<f64> = pair.indices.iter().map(|&i| row[i]).collect();
        let margin = pair.svm.predict_margin(&sub_row);
        if margin >= 0.0 {
            votes[pair.class_pos] += 1;
        } else {
            votes[pair.class_neg] += 1;
        }
        strength[pair.class_pos] += margin;
        strength[pair.class_neg] -= margin;
    }
    let mut best = model.classes[0];
    for &c in &model.classes[1..] {
        let better = votes[c] > votes[best]
            || (votes[c] == votes[best] && strength[c] > strength[best]);
        if better {
            best = c;
        }
    }
    best
}
