//! Experiment runners: cloud-to-diagram pipeline, the domain-inflation
//! study, CV runs, selector sweeps, the two structural audits, and the
//! certificate-firing report.

use anyhow::{Context, Result};
use rayon::prelude::*;

use palace_core::cover::{
    audit_certificate, audit_noninterference, class_aware_fps, assign_radii,
    LandmarkConfiguration, NonInterferenceOutcome, TauStrategy,
};
use palace_core::diagram::{top_persistence_filter, DiagramPoint, PersistenceDiagram};
use palace_core::embed::embed_batch;
use palace_core::kernel::{bandwidth_quantile, gram};
use palace_core::rips::{rips_persistence_capped, PointCloud};
use palace_core::select::{tau_hat, SelectorReport};
use palace_core::stats::quantile;
use palace_core::svm::cv::{
    cross_validate, grid_steps_for_budget, place_on_training, stratified_folds, CvConfig,
    CvOutcome, KernelChoice, PlacementScheme, PlacementSpec, SigmaSelect, TauSource,
};
use palace_core::certify::{
    certified_predict, fit_class_stats, CertifiedPrediction, RadiusMode,
};

use crate::synth::{gen_annulus_dataset, inflate_diagram};

/// Map a filtration value onto the alpha-complex scale: an edge of length v
/// has circumradius v/2, and alpha filtrations carry squared circumradii.
/// Order-preserving, so the persistence pairing is untouched.
pub fn alpha_scale(v: f64) -> f64 {
    (v / 2.0) * (v / 2.0)
}

fn alpha_scale_diagram(d: &PersistenceDiagram) -> PersistenceDiagram {
    PersistenceDiagram {
        points: d
            .points
            .iter()
            .map(|p| DiagramPoint { birth: alpha_scale(p.birth), death: alpha_scale(p.death) })
            .collect(),
        label: d.label,
        tag: d.tag.clone(),
    }
}

/// Per-cloud output of the persistence pipeline.
pub struct CloudDiagrams {
    /// H0 and H1 bars merged, top-`n_max` filtered.
    pub combined: PersistenceDiagram,
    /// H1 alone (same value scale), for feature-scale tau rules.
    pub h1: PersistenceDiagram,
}

/// Rips persistence of each cloud at full expansion (max radius = cloud
/// diameter), optional alpha-scale calibration, merge H0 + H1, keep the
/// top `n_max` most persistent points.
pub fn diagrams_from_clouds(
    clouds: &[PointCloud],
    n_max: usize,
    alpha_scaled: bool,
) -> Result<Vec<CloudDiagrams>> {
    clouds
        .par_iter()
        .map(|cloud| {
            let diameter = cloud
                .points
                .iter()
                .enumerate()
                .flat_map(|(i, p)| {
                    cloud.points[i + 1..].iter().map(move |q| {
                        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
                    })
                })
                .fold(0.0f64, f64::max);
            let max_radius = (diameter * 1.0001).max(1e-9);
            let out = rips_persistence_capped(cloud, max_radius, cloud.points.len())
                .context("rips persistence")?;
            let (h0, h1) = if alpha_scaled {
                (alpha_scale_diagram(&out.h0), alpha_scale_diagram(&out.h1))
            } else {
                (out.h0, out.h1)
            };
            let mut merged = h0.clone();
            merged.points.extend(h1.points.iter().copied());
            merged.tag = "rips-h0h1".to_string();
            let combined = top_persistence_filter(&merged, n_max);
            Ok(CloudDiagrams { combined, h1 })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Domain inflation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct InflationConfig {
    pub per_class: usize,
    pub n_points: usize,
    pub noise_sd: f64,
    pub seed: u64,
    /// Landmark budget target; both arms run at the realized grid count.
    pub target_budget: usize,
    pub alpha: f64,
    pub n_max: usize,
    pub outer_folds: usize,
    pub c_grid: Vec<f64>,
    pub sigma_quantile: f64,
    pub ells: Vec<f64>,
    pub pad: f64,
    pub tol: f64,
}

impl Default for InflationConfig {
    fn default() -> Self {
        Self {
            per_class: 100,
            n_points: 60,
            noise_sd: 0.08,
            seed: 42,
            target_budget: 11,
            alpha: 0.75,
            n_max: 30,
            outer_folds: 10,
            c_grid: vec![1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0],
            sigma_quantile: 0.25,
            ells: vec![1.0, 2.0, 3.0, 4.0, 5.0, 8.0],
            pad: 1.05,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InflationRow {
    pub ell: f64,
    pub l_domain: f64,
    pub uniform_mean: f64,
    pub uniform_std: f64,
    pub fps_mean: f64,
    pub fps_std: f64,
    pub delta: f64,
}

pub fn run_domain_inflation(cfg: &InflationConfig) -> Result<Vec<InflationRow>> {
    let clouds = gen_annulus_dataset(cfg.per_class, cfg.n_points, cfg.noise_sd, cfg.seed);
    let labels: Vec<usize> = clouds.iter().map(|c| c.label.unwrap()).collect();
    let per_cloud = diagrams_from_clouds(&clouds, cfg.n_max, true)?;
    let base: Vec<PersistenceDiagram> =
        per_cloud.iter().map(|c| c.combined.clone()).collect();

    // separation scale from unperturbed data: mean half-persistence of the
    // strongest H1 feature per diagram
    let h1_diagrams: Vec<PersistenceDiagram> =
        per_cloud.iter().map(|c| c.h1.clone()).collect();
    let tau = palace_core::cover::estimate_tau(&h1_diagrams, TauStrategy::MeanStrongestFeature)
        .context("tau from H1 features")?;

    // both arms share the realized grid cardinality
    let (_, realized_k) = grid_steps_for_budget(cfg.target_budget, true);

    let cv_cfg = CvConfig {
        outer_folds: cfg.outer_folds,
        seeds: vec![cfg.seed],
        sigma: SigmaSelect::Quantiles(vec![cfg.sigma_quantile]),
        c_grid: cfg.c_grid.clone(),
        inner_folds: 3,
        tol: cfg.tol,
        kernel: KernelChoice::Landmark,
    };

    let mut rows = Vec::with_capacity(cfg.ells.len());
    for &ell in &cfg.ells {
        let inflated: Vec<PersistenceDiagram> =
            base.iter().map(|d| inflate_diagram(d, ell)).collect();
        let max_pers = inflated
            .iter()
            .flat_map(|d| d.points.iter())
            .map(|p| p.persistence())
            .fold(0.0, f64::max);
        let l_domain = cfg.pad * max_pers;

        let uniform_spec = PlacementSpec {
            scheme: PlacementScheme::OffsetGrid,
            k: cfg.target_budget,
            alpha: cfg.alpha,
            tau: TauSource::Fixed(tau),
            pad: cfg.pad,
        };
        let fps_spec = PlacementSpec {
            scheme: PlacementScheme::GlobalFps,
            k: realized_k,
            alpha: cfg.alpha,
            tau: TauSource::Fixed(tau),
            pad: cfg.pad,
        };
        let uniform = cross_validate(&inflated, &labels, &uniform_spec, &cv_cfg)?;
        let fps = cross_validate(&inflated, &labels, &fps_spec, &cv_cfg)?;
        rows.push(InflationRow {
            ell,
            l_domain,
            uniform_mean: 100.0 * uniform.mean,
            uniform_std: 100.0 * uniform.std,
            fps_mean: 100.0 * fps.mean,
            fps_std: 100.0 * fps.std,
            delta: 100.0 * (fps.mean - uniform.mean),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Generic CV run
// ---------------------------------------------------------------------------

pub struct CvRunArgs {
    pub placement: PlacementSpec,
    pub cv: CvConfig,
}

pub fn run_cv(
    diagrams: &[PersistenceDiagram],
    labels: &[usize],
    args: &CvRunArgs,
) -> Result<CvOutcome> {
    Ok(cross_validate(diagrams, labels, &args.placement, &args.cv)?)
}

/// Extracts labels from the diagrams themselves, failing on unlabeled input.
pub fn labels_of(diagrams: &[PersistenceDiagram]) -> Result<Vec<usize>> {
    diagrams
        .iter()
        .enumerate()
        .map(|(i, d)| d.label.with_context(|| format!("diagram {i} has no label")))
        .collect()
}

// ---------------------------------------------------------------------------
// Selector sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub k_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub sigma_quantile: f64,
    pub tau_pairs: usize,
    pub tau_quantile: f64,
    pub seed: u64,
    pub cv: CvConfig,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub candidate_id: String,
    pub report: SelectorReport,
    pub cv_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Spearman correlation of each selector column against CV accuracy.
    pub spearman: Vec<(&'static str, f64)>,
}

pub fn run_selector_sweep(
    diagrams: &[PersistenceDiagram],
    labels: &[usize],
    cfg: &SweepConfig,
) -> Result<SweepOutcome> {
    let mut rows = Vec::new();
    for &k in &cfg.k_grid {
        for &alpha in &cfg.alpha_grid {
            let spec = PlacementSpec {
                scheme: PlacementScheme::ClassAwareFps,
                k,
                alpha,
                tau: TauSource::Strategy(TauStrategy::MedianHalfPersistence),
                pad: 1.05,
            };
            // selector statistics come from the full-data gram, the same
            // matrix an SVM fit on all data would use
            let config = place_on_training(diagrams, labels, &spec)?;
            let embeds = embed_batch(diagrams, &config);
            let sigma = bandwidth_quantile(&embeds, cfg.sigma_quantile)?;
            let g = gram(&embeds, sigma)?;
            let report = SelectorReport::compute(
                &g,
                labels,
                diagrams,
                cfg.tau_pairs,
                cfg.tau_quantile,
                cfg.seed,
            )?;
            let cv_out = cross_validate(diagrams, labels, &spec, &cfg.cv)?;
            rows.push(SweepRow {
                candidate_id: format!("k{k}-a{alpha}"),
                report,
                cv_accuracy: cv_out.mean,
            });
        }
    }
    let acc: Vec<f64> = rows.iter().map(|r| r.cv_accuracy).collect();
    let col = |f: fn(&SelectorReport) -> f64| -> Vec<f64> {
        rows.iter().map(|r| f(&r.report)).collect()
    };
    let spearman_vs = |xs: &[f64]| palace_core::select::spearman(xs, &acc);
    let spearman = vec![
        ("gamma_hat", spearman_vs(&col(|r| r.gamma_hat))),
        ("score", spearman_vs(&col(|r| r.score))),
        ("fisher_ker", spearman_vs(&col(|r| r.fisher_ker))),
        ("rho_mah", spearman_vs(&col(|r| r.rho_mah))),
        ("tau_hat", spearman_vs(&col(|r| r.tau_hat))),
        ("rho_nu_hat", spearman_vs(&col(|r| r.rho_nu_hat))),
    ];
    Ok(SweepOutcome { rows, spearman })
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NiRow {
    pub i: usize,
    pub j: usize,
    pub status: String,
    pub d: f64,
    pub min_cross_ratio: f64,
    pub passes: bool,
    pub within_scale_ok: bool,
}

#[derive(Debug, Clone)]
pub struct NiSummary {
    pub sampled: usize,
    pub auditable: usize,
    pub pass_pct: f64,
    pub median_ratio: f64,
}

fn sample_cross_pairs(
    labels: &[usize],
    n_pairs: usize,
    seed: u64,
) -> Vec<(usize, usize)> {
    use rand::{Rng, SeedableRng};
    let mut pairs = Vec::new();
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            if labels[i] != labels[j] {
                pairs.push((i, j));
            }
        }
    }
    let take = n_pairs.min(pairs.len());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for i in 0..take {
        let j = rng.gen_range(i..pairs.len());
        pairs.swap(i, j);
    }
    pairs.truncate(take);
    pairs
}

pub fn run_audit_ni(
    diagrams: &[PersistenceDiagram],
    labels: &[usize],
    n_pairs: usize,
    seed: u64,
) -> (Vec<NiRow>, NiSummary) {
    let pairs = sample_cross_pairs(labels, n_pairs, seed);
    let rows: Vec<NiRow> = pairs
        .par_iter()
        .map(|&(i, j)| match audit_noninterference(&diagrams[i], &diagrams[j]) {
            NonInterferenceOutcome::Audited(a) => NiRow {
                i,
                j,
                status: "audited".into(),
                d: a.d,
                min_cross_ratio: a.min_cross_ratio,
                passes: a.passes,
                within_scale_ok: a.within_scale_ok,
            },
            NonInterferenceOutcome::Excluded => NiRow {
                i,
                j,
                status: "excluded".into(),
                d: 0.0,
                min_cross_ratio: f64::NAN,
                passes: false,
                within_scale_ok: false,
            },
            NonInterferenceOutcome::NotAuditable { reason } => NiRow {
                i,
                j,
                status: format!("not-auditable: {reason}"),
                d: f64::NAN,
                min_cross_ratio: f64::NAN,
                passes: false,
                within_scale_ok: false,
            },
        })
        .collect();
    let audited: Vec<&NiRow> = rows.iter().filter(|r| r.status == "audited").collect();
    let ratios: Vec<f64> = audited
        .iter()
        .map(|r| r.min_cross_ratio)
        .filter(|r| r.is_finite())
        .collect();
    let summary = NiSummary {
        sampled: rows.len(),
        auditable: audited.len(),
        pass_pct: if audited.is_empty() {
            f64::NAN
        } else {
            100.0 * audited.iter().filter(|r| r.passes).count() as f64 / audited.len() as f64
        },
        median_ratio: if ratios.is_empty() { f64::NAN } else { quantile(&ratios, 0.5) },
    };
    (rows, summary)
}

#[derive(Debug, Clone)]
pub struct BoundAuditArgs {
    pub k: usize,
    pub alpha: f64,
    pub tau_quantile: f64,
    pub tau_pairs: usize,
    pub n_pairs: usize,
    pub seed: u64,
}

impl Default for BoundAuditArgs {
    fn default() -> Self {
        Self { k: 64, alpha: 0.75, tau_quantile: 0.25, tau_pairs: 2000, n_pairs: 2000, seed: 42 }
    }
}

pub struct BoundAuditOutcome {
    pub tau: f64,
    pub summary: palace_core::cover::CertificateAuditSummary,
}

pub fn run_audit_bound(
    diagrams: &[PersistenceDiagram],
    labels: &[usize],
    args: &BoundAuditArgs,
) -> Result<BoundAuditOutcome> {
    let tau = tau_hat(diagrams, labels, args.tau_pairs, args.tau_quantile, args.seed)?;
    let mut by_class = std::collections::BTreeMap::<usize, Vec<DiagramPoint>>::new();
    for (d, &y) in diagrams.iter().zip(labels) {
        by_class.entry(y).or_default().extend(d.points.iter().copied());
    }
    let placed = class_aware_fps(&by_class, args.k)?;
    let radii = assign_radii(&placed.positions, args.alpha, tau);
    let config = LandmarkConfiguration::equal_weights(placed.positions, radii, tau)?;
    let pairs = sample_cross_pairs(labels, args.n_pairs, args.seed);
    let pair_refs: Vec<(&PersistenceDiagram, &PersistenceDiagram)> =
        pairs.iter().map(|&(i, j)| (&diagrams[i], &diagrams[j])).collect();
    let summary = audit_certificate(&pair_refs, &config)?;
    Ok(BoundAuditOutcome { tau, summary })
}

// ---------------------------------------------------------------------------
// Certificate-firing report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CertifyArgs {
    pub dataset_name: String,
    pub k: usize,
    pub alpha: f64,
    pub delta: f64,
    pub folds: usize,
    pub seed: u64,
    pub tau: TauSource,
}

#[derive(Debug, Clone)]
pub struct CertifyRow {
    pub dataset: String,
    pub mode: String,
    pub fired_pct: f64,
    pub nc_accuracy_on_fired: f64,
    pub r_m: f64,
    pub half_delta: f64,
}

/// Per-prediction certificate firing rates over stratified folds, one row
/// per radius mode, matching the report schema
/// (dataset, mode, fired_pct, nc_accuracy_on_fired, r_m, half_delta).
pub fn run_certify_report(
    diagrams: &[PersistenceDiagram],
    labels: &[usize],
    args: &CertifyArgs,
) -> Result<Vec<CertifyRow>> {
    let folds = stratified_folds(labels, args.folds, args.seed)?;
    let spec = PlacementSpec {
        scheme: PlacementScheme::ClassAwareFps,
        k: args.k,
        alpha: args.alpha,
        tau: args.tau,
        pad: 1.05,
    };
    let mut per_mode: std::collections::BTreeMap<&str, Vec<(CertifiedPrediction, bool)>> =
        Default::default();
    for test_idx in &folds {
        let train_idx: Vec<usize> =
            (0..labels.len()).filter(|i| !test_idx.contains(i)).collect();
        let train: Vec<PersistenceDiagram> =
            train_idx.iter().map(|&i| diagrams[i].clone()).collect();
        let ytr: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let config = place_on_training(&train, &ytr, &spec)?;
        let etr = embed_batch(&train, &config);
        let stats = fit_class_stats(&etr, &ytr)?;
        let test: Vec<PersistenceDiagram> =
            test_idx.iter().map(|&i| diagrams[i].clone()).collect();
        let ete = embed_batch(&test, &config);
        for (e, &i) in ete.iter().zip(test_idx.iter()) {
            for (name, mode) in
                [("pinelis", RadiusMode::Pinelis), ("gaussian", RadiusMode::Gaussian)]
            {
                let p = certified_predict(&stats, e, args.delta, mode);
                per_mode.entry(name).or_default().push((p, p.predicted == labels[i]));
            }
        }
    }
    let rows = per_mode
        .into_iter()
        .map(|(mode, preds)| {
            let n = preds.len() as f64;
            let fired: Vec<&(CertifiedPrediction, bool)> =
                preds.iter().filter(|(p, _)| p.certified).collect();
            CertifyRow {
                dataset: args.dataset_name.clone(),
                mode: mode.to_string(),
                fired_pct: 100.0 * fired.len() as f64 / n,
                nc_accuracy_on_fired: if fired.is_empty() {
                    f64::NAN
                } else {
                    100.0 * fired.iter().filter(|(_, ok)| *ok).count() as f64
                        / fired.len() as f64
                },
                r_m: preds.iter().map(|(p, _)| p.radius).sum::<f64>() / n,
                half_delta: preds.iter().map(|(p, _)| p.half_gap).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_scale_is_monotone_and_matches_edge_circumradius() {
        assert_eq!(alpha_scale(0.0), 0.0);
        assert_eq!(alpha_scale(2.0), 1.0);
        assert!(alpha_scale(1.0) < alpha_scale(1.5));
    }

    #[test]
    fn pipeline_produces_filtered_labeled_diagrams() {
        let clouds = gen_annulus_dataset(3, 40, 0.08, 11);
        let out = diagrams_from_clouds(&clouds, 10, true).unwrap();
        assert_eq!(out.len(), 12);
        for (c, cloud) in out.iter().zip(&clouds) {
            assert!(c.combined.points.len() <= 10);
            assert_eq!(c.combined.label, cloud.label);
            assert!(c.combined.points.iter().all(|p| p.death >= p.birth));
        }
        // annulus classes carry a visible loop
        assert!(out[0].h1.points.iter().any(|p| p.persistence() > 0.05));
    }
}
