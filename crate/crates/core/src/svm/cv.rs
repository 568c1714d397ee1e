//! Nested stratified cross-validation with per-fold landmark re-placement.
//!
//! Landmarks are re-fit on each outer training fold only, so no test
//! information reaches placement, radii, tau, or bandwidth. A fixed-config
//! entry point exists for audits and is labeled leaky.

use rayon::prelude::*;

use crate::cover::{
    assign_radii, class_aware_fps, estimate_tau, fps_place, offset_grid, uniform_grid,
    LandmarkConfiguration, TauStrategy,
};
use crate::diagram::{DiagramPoint, PersistenceDiagram};
use crate::embed::{embed_batch, EmbeddingVector};
use crate::kernel::{bandwidth_quantile, gram, lk_row};
use crate::svm::{predict_ovo, train_ovo, SvmError};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic stratified folds: per-class indices are shuffled by the
/// seeded generator and dealt round-robin, so per-fold class counts differ
/// from proportionality by at most one.
pub fn stratified_folds(
    labels: &[usize],
    n_folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, SvmError> {
    let m = labels.len();
    if n_folds < 2 || n_folds > m {
        return Err(SvmError::BadFoldCount { folds: n_folds, m });
    }
    let mut by_class = std::collections::BTreeMap::<usize, Vec<usize>>::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    for (&class, idx) in &by_class {
        if idx.len() < 2 {
            return Err(SvmError::ClassAbsent { class });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); n_folds];
    for idx in by_class.values() {
        let mut idx = idx.clone();
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        for (pos, &i) in idx.iter().enumerate() {
            folds[pos % n_folds].push(i);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlacementScheme {
    /// Class-aware FPS with per-class budgets.
    ClassAwareFps,
    /// Plain FPS over the pooled training points, seeded at the first.
    GlobalFps,
    /// Even-parity offset lattice over the padded training extent.
    OffsetGrid,
    /// Full lattice over the padded training extent.
    UniformGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSource {
    Fixed(f64),
    Strategy(TauStrategy),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSpec {
    pub scheme: PlacementScheme,
    /// Landmark budget; grids realize the largest lattice with at most this
    /// many retained points.
    pub k: usize,
    /// Radius factor for FPS schemes (`r = alpha * d_NN`, clipped).
    pub alpha: f64,
    pub tau: TauSource,
    /// Padding factor for the grid extent `L = pad * max persistence`.
    pub pad: f64,
}

/// Lattice step count: the largest `s` whose retained count stays within
/// the budget. Returns (steps, retained count).
pub fn grid_steps_for_budget(target: usize, even_parity: bool) -> (usize, usize) {
    let count = |s: usize| -> usize {
        let mut c = 0;
        for i in 0..=s {
            for j in (i + 1)..=s {
                if !even_parity || (i + j) % 2 == 0 {
                    c += 1;
                }
            }
        }
        c
    };
    let mut best = (1, count(1));
    for s in 2..=(2 * target + 3) {
        let c = count(s);
        if c > target {
            break;
        }
        best = (s, c);
    }
    best
}

/// Fit a configuration on training diagrams alone.
pub fn place_on_training(
    train: &[PersistenceDiagram],
    labels: &[usize],
    spec: &PlacementSpec,
) -> Result<LandmarkConfiguration, SvmError> {
    let tau = match spec.tau {
        TauSource::Fixed(t) => t,
        TauSource::Strategy(s) => estimate_tau(train, s)?,
    };
    match spec.scheme {
        PlacementScheme::ClassAwareFps => {
            let mut by_class = std::collections::BTreeMap::<usize, Vec<DiagramPoint>>::new();
            for (d, &y) in train.iter().zip(labels) {
                by_class.entry(y).or_default().extend(d.points.iter().copied());
            }
            let placed = class_aware_fps(&by_class, spec.k)?;
            let radii = assign_radii(&placed.positions, spec.alpha, tau);
            Ok(LandmarkConfiguration::equal_weights(placed.positions, radii, tau)?)
        }
        PlacementScheme::GlobalFps => {
            let points: Vec<DiagramPoint> =
                train.iter().flat_map(|d| d.points.iter().copied()).collect();
            let placed = fps_place(&points, spec.k, 0)?;
            let radii = assign_radii(&placed.positions, spec.alpha, tau);
            Ok(LandmarkConfiguration::equal_weights(placed.positions, radii, tau)?)
        }
        PlacementScheme::OffsetGrid | PlacementScheme::UniformGrid => {
            let max_pers = train
                .iter()
                .flat_map(|d| d.points.iter())
                .map(|p| p.persistence())
                .fold(0.0, f64::max);
            let l = spec.pad * max_pers;
            let even = spec.scheme == PlacementScheme::OffsetGrid;
            let (steps, _) = grid_steps_for_budget(spec.k, even);
            let spacing = l / steps as f64;
            let built = if even { offset_grid(l, spacing) } else { uniform_grid(l, spacing) }?;
            Ok(built.config.with_tau(tau)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSelect {
    /// Fixed bandwidth candidates.
    Grid(Vec<f64>),
    /// Quantile candidates; sigma is re-derived from the training side of
    /// each split at the given quantile of pairwise embedding distances.
    Quantiles(Vec<f64>),
}

/// Kernel applied to the embeddings. The landmark kernel is the pipeline
/// default; the joint RBF and the linear gram are comparison baselines run
/// through the same solver.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum KernelChoice {
    #[default]
    Landmark,
    Rbf,
    Linear,
}

#[derive(Debug, Clone)]
pub struct CvConfig {
    pub outer_folds: usize,
    pub seeds: Vec<u64>,
    pub sigma: SigmaSelect,
    pub c_grid: Vec<f64>,
    pub inner_folds: usize,
    pub tol: f64,
    pub kernel: KernelChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRecord {
    pub seed: u64,
    pub fold: usize,
    /// The selected sigma for `SigmaSelect::Grid`, the selected quantile for
    /// `SigmaSelect::Quantiles`.
    pub sigma_or_q: f64,
    pub c: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub mean: f64,
    pub std: f64,
    pub records: Vec<CvRecord>,
}

fn resolve_sigma(select: &SigmaSelect, candidate: f64, train: &[EmbeddingVector]) -> f64 {
    match select {
        SigmaSelect::Grid(_) => candidate,
        // fully degenerate embeddings make every bandwidth equivalent
        SigmaSelect::Quantiles(_) => bandwidth_quantile(train, candidate).unwrap_or(1.0),
    }
}

fn build_gram(
    etr: &[EmbeddingVector],
    sigma: f64,
    kernel: KernelChoice,
) -> Result<crate::kernel::GramMatrix, SvmError> {
    Ok(match kernel {
        KernelChoice::Landmark => gram(etr, sigma)?,
        KernelChoice::Rbf => crate::kernel::rbf_gram(etr, sigma)?,
        KernelChoice::Linear => crate::kernel::linear_gram(etr),
    })
}

fn kernel_row(
    e: &EmbeddingVector,
    etr: &[EmbeddingVector],
    sigma: f64,
    kernel: KernelChoice,
) -> Vec<f64> {
    match kernel {
        KernelChoice::Landmark => lk_row(e, etr, sigma),
        KernelChoice::Rbf => etr.iter().map(|r| crate::kernel::rbf_value(e, r, sigma)).collect(),
        KernelChoice::Linear => etr.iter().map(|r| crate::kernel::linear_value(e, r)).collect(),
    }
}

fn fit_and_score(
    etr: &[EmbeddingVector],
    ytr: &[usize],
    ete: &[EmbeddingVector],
    yte: &[usize],
    sigma: f64,
    c: f64,
    tol: f64,
    kernel: KernelChoice,
) -> Result<(f64, f64), SvmError> {
    let g = build_gram(etr, sigma, kernel)?;
    let model = train_ovo(&g, ytr, c, tol)?;
    let train_hits = (0..etr.len())
        .filter(|&i| predict_ovo(&model, g.row(i)) == ytr[i])
        .count();
    let test_hits = ete
        .iter()
        .zip(yte)
        .filter(|(e, &y)| predict_ovo(&model, &kernel_row(e, etr, sigma, kernel)) == y)
        .count();
    Ok((
        train_hits as f64 / etr.len() as f64,
        if yte.is_empty() { f64::NAN } else { test_hits as f64 / yte.len() as f64 },
    ))
}

/// Inner selection: mean inner accuracy over (sigma-or-q, C) candidates,
/// ties toward smaller C then smaller sigma.
fn select_hyperparams(
    etr: &[EmbeddingVector],
    ytr: &[usize],
    cfg: &CvConfig,
    inner_seed: u64,
) -> Result<(f64, f64), SvmError> {
    let sigma_candidates = match &cfg.sigma {
        SigmaSelect::Grid(v) | SigmaSelect::Quantiles(v) => v.clone(),
    };
    if sigma_candidates.len() == 1 && cfg.c_grid.len() == 1 {
        return Ok((sigma_candidates[0], cfg.c_grid[0]));
    }
    let inner = stratified_folds(ytr, cfg.inner_folds, inner_seed)?;
    let mut best: Option<(f64, f64, f64)> = None; // (acc, c, sigma_or_q)
    for &sq in &sigma_candidates {
        for &c in &cfg.c_grid {
            let mut accs = Vec::with_capacity(inner.len());
            for val_idx in &inner {
                let tr_idx: Vec<usize> =
                    (0..ytr.len()).filter(|i| !val_idx.contains(i)).collect();
                let ietr: Vec<EmbeddingVector> =
                    tr_idx.iter().map(|&i| etr[i].clone()).collect();
                let iytr: Vec<usize> = tr_idx.iter().map(|&i| ytr[i]).collect();
                let iete: Vec<EmbeddingVector> =
                    val_idx.iter().map(|&i| etr[i].clone()).collect();
                let iyte: Vec<usize> = val_idx.iter().map(|&i| ytr[i]).collect();
                let sigma = resolve_sigma(&cfg.sigma, sq, &ietr);
                let (_, acc) =
                    fit_and_score(&ietr, &iytr, &iete, &iyte, sigma, c, cfg.tol, cfg.kernel)?;
                accs.push(acc);
            }
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let better = match best {
                None => true,
                Some((b_acc, b_c, b_sq)) => {
                    mean > b_acc + 1e-12
                        || ((mean - b_acc).abs() <= 1e-12
                            && (c < b_c || (c == b_c && sq < b_sq)))
                }
            };
            if better {
                best = Some((mean, c, sq));
            }
        }
    }
    let (_, c, sq) = best.expect("nonempty grids");
    Ok((sq, c))
}

fn fold_pass(
    diagrams: &[PersistenceDiagram],
    labels: &[usize],
    placement: Option<&PlacementSpec>,
    fixed: Option<&[EmbeddingVector]>,
    cfg: &CvConfig,
    seed: u64,
    fold: usize,
    test_idx: &[usize],
) -> Result<CvRecord, SvmError> {
    let train_idx: Vec<usize> =
        (0..labels.len()).filter(|i| !test_idx.contains(i)).collect();
    let ytr: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let yte: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();

    let (etr, ete): (Vec<EmbeddingVector>, Vec<EmbeddingVector>) = match (placement, fixed) {
        (Some(spec), None) => {
            let train: Vec<PersistenceDiagram> =
                train_idx.iter().map(|&i| diagrams[i].clone()).collect();
            let config = place_on_training(&train, &ytr, spec)?;
            let etr = embed_batch(&train, &config);
            let test: Vec<PersistenceDiagram> =
                test_idx.iter().map(|&i| diagrams[i].clone()).collect();
            (etr, embed_batch(&test, &config))
        }
        (None, Some(embeds)) => (
            train_idx.iter().map(|&i| embeds[i].clone()).collect(),
            test_idx.iter().map(|&i| embeds[i].clone()).collect(),
        ),
        _ => unreachable!("exactly one input mode"),
    };

    let inner_seed = seed.wrapping_add(1_000_003u64.wrapping_mul(fold as u64 + 1));
    let (sq, c) = select_hyperparams(&etr, &ytr, cfg, inner_seed)?;
    let sigma = resolve_sigma(&cfg.sigma, sq, &etr);
    let (train_acc, test_acc) =
        fit_and_score(&etr, &ytr, &ete, &yte, sigma, c, cfg.tol, cfg.kernel)?;
    Ok(CvRecord { seed, fold, sigma_or_q: sq, c, train_acc, test_acc })
}

fn run_cv(
    diagrams: &[PersistenceDiagram],
    labels: &[usize],
    placement: Option<&PlacementSpec>,
    fixed: Option<&[EmbeddingVector]>,
    cfg: &CvConfig,
) -> Result<CvOutcome, SvmError> {
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        let folds = stratified_folds(labels, cfg.outer_folds, seed)?;
        for (fold, test_idx) in folds.into_iter().enumerate() {
            cells.push((seed, fold, test_idx));
        }
    }
    let records: Result<Vec<CvRecord>, SvmError> = cells
        .par_iter()
        .map(|(seed, fold, test_idx)| {
            fold_pass(diagrams, labels, placement, fixed, cfg, *seed, *fold, test_idx)
        })
        .collect();
    let records = records?;
    let accs: Vec<f64> = records.iter().map(|r| r.test_acc).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let std = if accs.len() > 1 {
        (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (accs.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    Ok(CvOutcome { mean, std, records })
}

/// Nested CV with per-fold landmark re-placement: the mandatory mode.
pub fn cross_validate(
    diagrams: &[PersistenceDiagram],
    labels: &[usize],
    placement: &PlacementSpec,
    cfg: &CvConfig,
) -> Result<CvOutcome, SvmError> {
    assert_eq!(diagrams.len(), labels.len());
    run_cv(diagrams, labels, Some(placement), None, cfg)
}

/// Fixed-configuration CV over precomputed embeddings. The configuration
/// saw all diagrams, including test folds: audits only, leaky by design.
pub fn cross_validate_fixed(
    embeddings: &[EmbeddingVector],
    labels: &[usize],
    cfg: &CvConfig,
) -> Result<CvOutcome, SvmError> {
    assert_eq!(embeddings.len(), labels.len());
    run_cv(&[], labels, None, Some(embeddings), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::DiagramPoint;

    fn pt(b: f64, d: f64) -> DiagramPoint {
        DiagramPoint::new(b, d).unwrap()
    }

    /// Two diagram classes at well-separated sites.
    fn toy_dataset(n_per_class: usize) -> (Vec<PersistenceDiagram>, Vec<usize>) {
        let mut rng = crate::test_rng(211);
        let mut diagrams = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2usize {
            let center = 10.0 + 20.0 * class as f64;
            for _ in 0..n_per_class {
                let jitter = rng.f64_in(-0.5, 0.5);
                let points = vec![
                    pt(0.0, center + jitter),
                    pt(1.0, center + 2.0 + rng.f64_in(-0.5, 0.5)),
                ];
                diagrams.push(PersistenceDiagram::new(points, Some(class), "toy"));
                labels.push(class);
            }
        }
        (diagrams, labels)
    }

    #[test]
    fn folds_are_proportional_and_deterministic() {
        let labels: Vec<usize> = (0..37).map(|i| i % 3).collect();
        let folds = stratified_folds(&labels, 5, 42).unwrap();
        let again = stratified_folds(&labels, 5, 42).unwrap();
        assert_eq!(folds, again);
        let total: usize = folds.iter().map(|f| f.len()).sum();
        assert_eq!(total, 37);
        for class in 0..3 {
            let class_total = labels.iter().filter(|&&y| y == class).count();
            let expect = class_total as f64 / 5.0;
            for f in &folds {
                let got = f.iter().filter(|&&i| labels[i] == class).count();
                assert!((got as f64 - expect).abs() <= 1.0);
            }
        }
        let other = stratified_folds(&labels, 5, 43).unwrap();
        assert_ne!(folds, other);
    }

    #[test]
    fn folds_error_names_the_thin_class() {
        let labels = vec![0, 0, 0, 1];
        match stratified_folds(&labels, 2, 1) {
            Err(SvmError::ClassAbsent { class }) => assert_eq!(class, 1),
            other => panic!("expected ClassAbsent, got {other:?}"),
        }
    }

    #[test]
    fn grid_budget_derivation() {
        // full lattice: triangular counts 1, 3, 6, 10, 15
        assert_eq!(grid_steps_for_budget(11, false), (4, 10));
        assert_eq!(grid_steps_for_budget(10, false), (4, 10));
        assert_eq!(grid_steps_for_budget(3, false), (2, 3));
        // even parity: counts 0(s=1) handled from s=1.. -> s=2 gives 1
        assert_eq!(grid_steps_for_budget(11, true), (6, 9));
        assert_eq!(grid_steps_for_budget(12, true), (7, 12));
    }

    #[test]
    fn cross_validate_separable_task() {
        let (diagrams, labels) = toy_dataset(12);
        let placement = PlacementSpec {
            scheme: PlacementScheme::ClassAwareFps,
            k: 4,
            alpha: 0.75,
            tau: TauSource::Strategy(TauStrategy::MedianHalfPersistence),
            pad: 1.05,
        };
        let cfg = CvConfig {
            outer_folds: 4,
            seeds: vec![7],
            sigma: SigmaSelect::Quantiles(vec![0.25]),
            c_grid: vec![0.01, 1.0, 100.0],
            inner_folds: 3,
            tol: 1e-4,
            kernel: KernelChoice::Landmark,
        };
        let out = cross_validate(&diagrams, &labels, &placement, &cfg).unwrap();
        assert_eq!(out.records.len(), 4);
        assert!(out.mean > 0.9, "mean accuracy {}", out.mean);
        for r in &out.records {
            assert!(r.train_acc > 0.9);
            assert_eq!(r.sigma_or_q, 0.25);
        }
    }

    #[test]
    fn inner_ties_prefer_smaller_c() {
        // trivially separable: every C is equally accurate inside, so the
        // smallest C must be selected
        let (diagrams, labels) = toy_dataset(9);
        let placement = PlacementSpec {
            scheme: PlacementScheme::GlobalFps,
            k: 3,
            alpha: 1.0,
            tau: TauSource::Fixed(1.0),
            pad: 1.05,
        };
        let cfg = CvConfig {
            outer_folds: 3,
            seeds: vec![1],
            sigma: SigmaSelect::Grid(vec![0.5]),
            c_grid: vec![0.1, 1.0, 10.0],
            inner_folds: 3,
            tol: 1e-4,
            kernel: KernelChoice::Landmark,
        };
        let out = cross_validate(&diagrams, &labels, &placement, &cfg).unwrap();
        for r in &out.records {
            assert_eq!(r.c, 0.1, "tie should resolve to the smallest C");
        }
    }

    #[test]
    fn fixed_embedding_mode_runs() {
        let (diagrams, labels) = toy_dataset(8);
        let spec = PlacementSpec {
            scheme: PlacementScheme::GlobalFps,
            k: 4,
            alpha: 0.75,
            tau: TauSource::Fixed(1.0),
            pad: 1.05,
        };
        let config = place_on_training(&diagrams, &labels, &spec).unwrap();
        let embeds = embed_batch(&diagrams, &config);
        let cfg = CvConfig {
            outer_folds: 4,
            seeds: vec![3],
            sigma: SigmaSelect::Grid(vec![0.25, 1.0]),
            c_grid: vec![1.0],
            inner_folds: 2,
            tol: 1e-4,
            kernel: KernelChoice::Landmark,
        };
        let out = cross_validate_fixed(&embeds, &labels, &cfg).unwrap();
        assert_eq!(out.records.len(), 4);
        assert!(out.mean > 0.9);
    }

    #[test]
    fn grid_placement_covers_training_extent() {
        let (diagrams, labels) = toy_dataset(6);
        let spec = PlacementSpec {
            scheme: PlacementScheme::OffsetGrid,
            k: 11,
            alpha: 0.75,
            tau: TauSource::Fixed(2.0),
            pad: 1.05,
        };
        let config = place_on_training(&diagrams, &labels, &spec).unwrap();
        assert_eq!(config.len(), 9);
        assert_eq!(config.tau, 2.0);
        let max_pers = diagrams
            .iter()
            .flat_map(|d| d.points.iter())
            .map(|p| p.persistence())
            .fold(0.0, f64::max);
        let max_death = config
            .landmarks
            .iter()
            .map(|l| l.position.death)
            .fold(0.0, f64::max);
        assert!(max_death <= 1.05 * max_pers + 1e-9);
    }
}
