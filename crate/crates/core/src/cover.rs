//! Landmark placement, radii and weights, admissibility and distortion
//! certificates, grid baselines, budget bounds, and the structural audits.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{bottleneck_distance, point_bottleneck, DiagramPoint, PersistenceDiagram};
use crate::embed::coordinate;
use crate::stats::quantile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub position: DiagramPoint,
    pub radius: f64,
    pub weight: f64,
}

/// K landmarks plus the separation scale tau. Weights satisfy
/// `sum w_k^2 = 1` within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkConfiguration {
    pub landmarks: Vec<Landmark>,
    pub tau: f64,
}

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("configuration must have at least one landmark")]
    EmptyConfiguration,
    #[error("weights squared-sum {0} deviates from 1 by more than 1e-9")]
    WeightsNotNormalized(f64),
    #[error("landmark has non-positive radius {0}")]
    NonPositiveRadius(f64),
    #[error("landmark has non-positive weight {0}")]
    NonPositiveWeight(f64),
    #[error("separation scale tau must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("requested {k} landmarks from {available} points")]
    BudgetExceedsPoints { k: usize, available: usize },
    #[error("seed index {seed} out of range for {available} points")]
    SeedOutOfRange { seed: usize, available: usize },
    #[error("budget {k} below the {classes} classes with points")]
    BudgetBelowClassCount { k: usize, classes: usize },
    #[error("grid over extent {l} at spacing {r} retains no off-diagonal point")]
    EmptyGrid { l: f64, r: f64 },
    #[error("budget bound overflows at tau={tau} (D={d}, L={l})")]
    BudgetOverflow { d: f64, l: f64, tau: f64 },
    #[error("support is empty")]
    EmptySupport,
    #[error("distortion certificate is degenerate (no landmark with radius >= tau/4)")]
    DegenerateCertificate,
    #[error("no diagrams available for the tau estimate")]
    NoTauData,
    #[error("config file error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl LandmarkConfiguration {
    pub fn new(landmarks: Vec<Landmark>, tau: f64) -> Result<Self, CoverError> {
        let cfg = Self { landmarks, tau };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CoverError> {
        if self.landmarks.is_empty() {
            return Err(CoverError::EmptyConfiguration);
        }
        if self.tau <= 0.0 {
            return Err(CoverError::NonPositiveTau(self.tau));
        }
        let mut sq = 0.0;
        for lm in &self.landmarks {
            if lm.radius <= 0.0 {
                return Err(CoverError::NonPositiveRadius(lm.radius));
            }
            if lm.weight <= 0.0 {
                return Err(CoverError::NonPositiveWeight(lm.weight));
            }
            sq += lm.weight * lm.weight;
        }
        if (sq - 1.0).abs() > 1e-9 {
            return Err(CoverError::WeightsNotNormalized(sq));
        }
        Ok(())
    }

    /// Equal weights `K^{-1/2}` over the given positions and radii.
    pub fn equal_weights(
        positions: Vec<DiagramPoint>,
        radii: Vec<f64>,
        tau: f64,
    ) -> Result<Self, CoverError> {
        assert_eq!(positions.len(), radii.len());
        let k = positions.len();
        let w = (k as f64).sqrt().recip();
        let landmarks = positions
            .into_iter()
            .zip(radii)
            .map(|(position, radius)| Landmark { position, radius, weight: w })
            .collect();
        Self::new(landmarks, tau)
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.landmarks.iter().map(|l| l.radius).fold(0.0, f64::max)
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self, CoverError> {
        if tau <= 0.0 {
            return Err(CoverError::NonPositiveTau(tau));
        }
        self.tau = tau;
        Ok(self)
    }

    /// FNV-1a over the raw bits; pairs embeddings with the configuration
    /// that produced them.
    pub fn id(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(self.tau);
        for lm in &self.landmarks {
            eat(lm.position.birth);
            eat(lm.position.death);
            eat(lm.radius);
            eat(lm.weight);
        }
        h
    }
}

// --- JSON serialization: {"tau": .., "landmarks": [{"p": [b, d], "r": .., "w": ..}]}

#[derive(Serialize, Deserialize)]
struct LandmarkRecord {
    p: [f64; 2],
    r: f64,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct ConfigRecord {
    tau: f64,
    landmarks: Vec<LandmarkRecord>,
}

impl LandmarkConfiguration {
    pub fn to_json(&self) -> String {
        let record = ConfigRecord {
            tau: self.tau,
            landmarks: self
                .landmarks
                .iter()
                .map(|l| LandmarkRecord {
                    p: [l.position.birth, l.position.death],
                    r: l.radius,
                    w: l.weight,
                })
                .collect(),
        };
        serde_json::to_string(&record).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CoverError> {
        let record: ConfigRecord = serde_json::from_str(s)?;
        let landmarks = record
            .landmarks
            .into_iter()
            .map(|l| Landmark {
                position: DiagramPoint { birth: l.p[0], death: l.p[1] },
                radius: l.r,
                weight: l.w,
            })
            .collect();
        Self::new(landmarks, record.tau)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), CoverError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, CoverError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------
// Placement
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FpsOutcome {
    pub positions: Vec<DiagramPoint>,
    /// `insertion_distances[t]` is the min distance of pick t to the earlier
    /// picks at selection time; entry 0 (the seed) is infinite. Non-increasing.
    pub insertion_distances: Vec<f64>,
}

/// Greedy farthest-point sampling under the point bottleneck metric.
/// Ties break toward the lowest input index.
pub fn fps_place(
    points: &[DiagramPoint],
    k: usize,
    seed_index: usize,
) -> Result<FpsOutcome, CoverError> {
    if points.is_empty() || k > points.len() {
        return Err(CoverError::BudgetExceedsPoints { k, available: points.len() });
    }
    if seed_index >= points.len() {
        return Err(CoverError::SeedOutOfRange { seed: seed_index, available: points.len() });
    }
    let mut positions = Vec::with_capacity(k);
    let mut insertion = Vec::with_capacity(k);
    positions.push(points[seed_index]);
    insertion.push(f64::INFINITY);
    let mut min_dist: Vec<f64> =
        points.iter().map(|&p| point_bottleneck(p, points[seed_index])).collect();
    for _ in 1..k {
        let mut best = 0usize;
        for i in 1..points.len() {
            if min_dist[i] > min_dist[best] {
                best = i;
            }
        }
        positions.push(points[best]);
        insertion.push(min_dist[best]);
        for i in 0..points.len() {
            let d = point_bottleneck(points[i], points[best]);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    Ok(FpsOutcome { positions, insertion_distances: insertion })
}

#[derive(Debug, Clone)]
pub struct ClassAwareOutcome {
    pub positions: Vec<DiagramPoint>,
    /// Set when clamping could not place the full budget.
    pub shortfall: bool,
}

/// Per-class budget `floor(K/k)` with the remainder handed to classes in
/// ascending index order; FPS runs independently per class seeded at that
/// class's first point. Budgets exceeding a class's point count clamp, with
/// the leftover redistributed to subsequent classes.
pub fn class_aware_fps(
    points_by_class: &BTreeMap<usize, Vec<DiagramPoint>>,
    k: usize,
) -> Result<ClassAwareOutcome, CoverError> {
    let classes: Vec<usize> =
        points_by_class.iter().filter(|(_, v)| !v.is_empty()).map(|(&c, _)| c).collect();
    if classes.is_empty() || k < classes.len() {
        return Err(CoverError::BudgetBelowClassCount { k, classes: classes.len() });
    }
    let base = k / classes.len();
    let rem = k % classes.len();
    let mut positions = Vec::with_capacity(k);
    let mut carry = 0usize;
    for (i, &c) in classes.iter().enumerate() {
        let budget = base + usize::from(i < rem) + carry;
        let pts = &points_by_class[&c];
        let take = budget.min(pts.len());
        carry = budget - take;
        if take > 0 {
            positions.extend(fps_place(pts, take, 0)?.positions);
        }
    }
    Ok(ClassAwareOutcome { positions, shortfall: carry > 0 })
}

/// Scaled nearest-neighbor radii `alpha * d_NN`, clipped to [tau/2, 4 tau].
/// A single landmark falls back to tau/2.
pub fn assign_radii(positions: &[DiagramPoint], alpha: f64, tau: f64) -> Vec<f64> {
    if positions.len() < 2 {
        return vec![tau / 2.0; positions.len()];
    }
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let dnn = positions
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &q)| point_bottleneck(p, q))
                .fold(f64::INFINITY, f64::min);
            (alpha * dnn).clamp(tau / 2.0, 4.0 * tau)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Grid baselines
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct UniformGrid {
    pub config: LandmarkConfiguration,
    /// Full lattice count over `[0, L]^2` including diagonal and
    /// sub-diagonal points, for comparison against the retained count.
    pub lattice_total: usize,
}

fn grid_points(l: f64, spacing: f64, keep: impl Fn(usize, usize) -> bool) -> Vec<DiagramPoint> {
    let steps = (l / spacing + 1e-9).floor() as usize;
    let mut pts = Vec::new();
    for i in 0..=steps {
        for j in (i + 1)..=steps {
            if keep(i, j) {
                pts.push(DiagramPoint { birth: i as f64 * spacing, death: j as f64 * spacing });
            }
        }
    }
    pts
}

fn grid_from_points(
    l: f64,
    spacing: f64,
    positions: Vec<DiagramPoint>,
) -> Result<UniformGrid, CoverError> {
    let steps = (l / spacing + 1e-9).floor() as usize;
    if positions.is_empty() {
        return Err(CoverError::EmptyGrid { l, r: spacing });
    }
    let radii = vec![1.5 * spacing; positions.len()];
    // tau = 2R is the smallest scale in the grid's admissibility window
    // R in [tau/4, tau/2]; callers override via with_tau.
    let config = LandmarkConfiguration::equal_weights(positions, radii, 2.0 * spacing)?;
    Ok(UniformGrid { config, lattice_total: (steps + 1) * (steps + 1) })
}

/// Square lattice `R Z^2` truncated to `[0, L]^2`, keeping only points
/// strictly above the diagonal; ball radius 3R/2, equal weights.
pub fn uniform_grid(l: f64, spacing: f64) -> Result<UniformGrid, CoverError> {
    grid_from_points(l, spacing, grid_points(l, spacing, |_, _| true))
}

/// The offset (parity-sieved) grid variant: keeps lattice points with even
/// index sum, so the lowest retained row sits at death 2R.
pub fn offset_grid(l: f64, spacing: f64) -> Result<UniformGrid, CoverError> {
    grid_from_points(l, spacing, grid_points(l, spacing, |i, j| (i + j) % 2 == 0))
}

// ---------------------------------------------------------------------------
// Admissibility and certificates
// ---------------------------------------------------------------------------

/// min over the support of the tallest cap value; the maximum uniform
/// shrinkage of the cover balls that preserves coverage.
pub fn lebesgue_number(cfg: &LandmarkConfiguration, support: &[DiagramPoint]) -> f64 {
    assert!(!support.is_empty(), "lebesgue number needs a non-empty support");
    support
        .iter()
        .map(|&x| {
            cfg.landmarks
                .iter()
                .map(|lm| coordinate(lm.position, lm.radius, x))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub lebesgue: f64,
    pub cond_shrink: bool,
    pub cond_radius: bool,
    pub admissible: bool,
}

pub fn check_admissibility(
    cfg: &LandmarkConfiguration,
    support: &[DiagramPoint],
) -> AdmissibilityReport {
    let lebesgue = lebesgue_number(cfg, support);
    let cond_shrink = lebesgue >= cfg.tau / 4.0;
    let cond_radius = cfg.max_radius() <= (cfg.tau + lebesgue) / 2.0;
    AdmissibilityReport { lebesgue, cond_shrink, cond_radius, admissible: cond_shrink && cond_radius }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub value: f64,
    /// True when no landmark has radius >= tau/4; the certificate is then 0.
    pub degenerate: bool,
}

fn min_qualifying_weight(cfg: &LandmarkConfiguration) -> Option<f64> {
    cfg.landmarks
        .iter()
        .filter(|lm| lm.radius >= cfg.tau / 4.0)
        .map(|lm| lm.weight)
        .fold(None, |acc, w| Some(acc.map_or(w, |a: f64| a.min(w))))
}

/// Worst-case certificate `tau/4 * min{w_k : r_k >= tau/4}`.
pub fn rho_nu(cfg: &LandmarkConfiguration) -> Certificate {
    match min_qualifying_weight(cfg) {
        Some(w) => Certificate { value: cfg.tau / 4.0 * w, degenerate: false },
        None => Certificate { value: 0.0, degenerate: true },
    }
}

/// Effective certificate `lambda0 * min{w_k : r_k >= tau/4}`.
pub fn rho_eff(cfg: &LandmarkConfiguration, support: &[DiagramPoint]) -> Certificate {
    match min_qualifying_weight(cfg) {
        Some(w) => Certificate { value: lebesgue_number(cfg, support) * w, degenerate: false },
        None => Certificate { value: 0.0, degenerate: true },
    }
}

/// Covering radius `max_x min_k d_B(x, p_k)` of the support by the positions.
pub fn covering_radius(positions: &[DiagramPoint], support: &[DiagramPoint]) -> f64 {
    assert!(!positions.is_empty(), "covering radius needs at least one position");
    support
        .iter()
        .map(|&x| {
            positions.iter().map(|&p| point_bottleneck(x, p)).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetBounds {
    pub k_adapt_max: usize,
    pub k_unif_min: usize,
    pub ratio: f64,
    /// False when the adaptive bound is not informative (ratio >= 1).
    pub informative: bool,
}

/// `K_adapt <= ceil((4D/tau)^2)` against `K_unif >= ceil(4 (L/tau)^2)`.
pub fn budget_bounds(d: f64, l: f64, tau: f64) -> Result<BudgetBounds, CoverError> {
    if tau <= 0.0 {
        return Err(CoverError::BudgetOverflow { d, l, tau });
    }
    let adapt = (4.0 * d / tau).powi(2).ceil();
    let unif = (4.0 * (l / tau).powi(2)).ceil();
    if !adapt.is_finite() || !unif.is_finite() || adapt > usize::MAX as f64 || unif > usize::MAX as f64
    {
        return Err(CoverError::BudgetOverflow { d, l, tau });
    }
    let ratio = 4.0 * d * d / (l * l);
    Ok(BudgetBounds {
        k_adapt_max: adapt as usize,
        k_unif_min: unif as usize,
        ratio,
        informative: ratio < 1.0,
    })
}

// ---------------------------------------------------------------------------
// Tau strategies
// ---------------------------------------------------------------------------

/// Named rules for choosing the separation scale from training diagrams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauStrategy {
    /// Median half-persistence over all points of the training diagrams.
    MedianHalfPersistence,
    /// Quantile of bottleneck distances over subsampled cross-class pairs.
    CrossClassQuantile { q: f64, n_pairs: usize, seed: u64 },
    /// Mean over diagrams of (strongest feature persistence) / 2.
    MeanStrongestFeature,
}

pub fn estimate_tau(
    diagrams: &[PersistenceDiagram],
    strategy: TauStrategy,
) -> Result<f64, CoverError> {
    match strategy {
        TauStrategy::MedianHalfPersistence => {
            let hp: Vec<f64> = diagrams
                .iter()
                .flat_map(|d| d.points.iter().map(|p| p.persistence() / 2.0))
                .collect();
            if hp.is_empty() {
                return Err(CoverError::NoTauData);
            }
            Ok(quantile(&hp, 0.5))
        }
        TauStrategy::CrossClassQuantile { q, n_pairs, seed } => {
            let labels: Option<Vec<usize>> = diagrams.iter().map(|d| d.label).collect();
            let labels = labels.ok_or(CoverError::NoTauData)?;
            crate::select::tau_hat(diagrams, &labels, n_pairs, q, seed)
                .map_err(|_| CoverError::NoTauData)
        }
        TauStrategy::MeanStrongestFeature => {
            let strongest: Vec<f64> = diagrams
                .iter()
                .filter_map(|d| {
                    d.points
                        .iter()
                        .map(|p| p.persistence())
                        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
                })
                .collect();
            if strongest.is_empty() {
                return Err(CoverError::NoTauData);
            }
            Ok(strongest.iter().sum::<f64>() / strongest.len() as f64 / 2.0)
        }
    }
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum NonInterferenceOutcome {
    /// d_B = 0: the ratio is undefined and the pair is excluded.
    Excluded,
    /// Cardinalities differ after filtering, or the witnessing matching
    /// sends points to the diagonal.
    NotAuditable { reason: String },
    Audited(NonInterferenceAudit),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonInterferenceAudit {
    pub d: f64,
    /// `min_{i != j} d_B(a_i, b_sigma(j)) / d_B(A, B)`; infinite for n = 1.
    pub min_cross_ratio: f64,
    pub passes: bool,
    /// Sufficient condition: some side's within-diagram minimum separation
    /// exceeds 4 d_B(A, B).
    pub within_scale_ok: bool,
}

pub fn audit_noninterference(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
) -> NonInterferenceOutcome {
    if a.points.len() != b.points.len() {
        return NonInterferenceOutcome::NotAuditable {
            reason: format!("cardinality mismatch {} vs {}", a.points.len(), b.points.len()),
        };
    }
    let (d, matching) = bottleneck_distance(a, b);
    if !matching.is_total(b.points.len()) {
        return NonInterferenceOutcome::NotAuditable {
            reason: "optimal matching assigns points to the diagonal".to_string(),
        };
    }
    if d == 0.0 {
        return NonInterferenceOutcome::Excluded;
    }
    let n = a.points.len();
    if n == 1 {
        return NonInterferenceOutcome::Audited(NonInterferenceAudit {
            d,
            min_cross_ratio: f64::INFINITY,
            passes: true,
            within_scale_ok: true,
        });
    }
    let sigma: Vec<usize> = matching
        .a_to
        .iter()
        .map(|asg| match asg {
            crate::diagram::Assignment::ToPoint(j) => *j,
            crate::diagram::Assignment::ToDiagonal => unreachable!("matching known total"),
        })
        .collect();
    let mut min_cross = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                min_cross = min_cross.min(point_bottleneck(a.points[i], b.points[sigma[j]]));
            }
        }
    }
    let min_within = |pts: &[DiagramPoint]| {
        let mut m = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                m = m.min(point_bottleneck(pts[i], pts[j]));
            }
        }
        m
    };
    NonInterferenceOutcome::Audited(NonInterferenceAudit {
        d,
        min_cross_ratio: min_cross / d,
        passes: min_cross / d > 3.0,
        within_scale_ok: min_within(&a.points) > 4.0 * d || min_within(&b.points) > 4.0 * d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateAuditSummary {
    /// Pairs with d_B >= tau.
    pub n_tau: usize,
    /// Percentage of those with embedded distance >= rho_nu.
    pub bound_pct: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub min: f64,
}

/// For each pair with `d_B >= tau`, the ratio of embedded l2 distance to the
/// worst-case certificate, aggregated as bound percentage and percentiles.
pub fn audit_certificate(
    pairs: &[(&PersistenceDiagram, &PersistenceDiagram)],
    cfg: &LandmarkConfiguration,
) -> Result<CertificateAuditSummary, CoverError> {
    let rho = rho_nu(cfg);
    if rho.degenerate {
        return Err(CoverError::DegenerateCertificate);
    }
    let mut ratios = Vec::new();
    for (a, b) in pairs {
        let (d, _) = bottleneck_distance(a, b);
        if d < cfg.tau {
            continue;
        }
        let ua = crate::embed::embed(a, cfg);
        let ub = crate::embed::embed(b, cfg);
        let dist: f64 = ua
            .values
            .iter()
            .zip(&ub.values)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        ratios.push(dist / rho.value);
    }
    if ratios.is_empty() {
        return Ok(CertificateAuditSummary {
            n_tau: 0,
            bound_pct: f64::NAN,
            p25: f64::NAN,
            p50: f64::NAN,
            p75: f64::NAN,
            min: f64::NAN,
        });
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let held = ratios.iter().filter(|&&r| r >= 1.0).count();
    Ok(CertificateAuditSummary {
        n_tau: ratios.len(),
        bound_pct: 100.0 * held as f64 / ratios.len() as f64,
        p25: crate::stats::quantile_sorted(&ratios, 0.25),
        p50: crate::stats::quantile_sorted(&ratios, 0.5),
        p75: crate::stats::quantile_sorted(&ratios, 0.75),
        min: ratios[0],
    })
}
