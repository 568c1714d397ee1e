//! Persistence diagrams, single-point and full bottleneck geometry,
//! persistence filtering, and line-delimited JSON I/O.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::{maximum_matching, BipartiteGraph};

/// A single birth-death feature. Invariant: `death >= birth`, both finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramPoint {
    pub birth: f64,
    pub death: f64,
}

impl DiagramPoint {
    pub fn new(birth: f64, death: f64) -> Result<Self, DiagramError> {
        if !birth.is_finite() || !death.is_finite() {
            return Err(DiagramError::NonFinite { birth, death });
        }
        if death < birth {
            return Err(DiagramError::DeathBeforeBirth { birth, death });
        }
        Ok(Self { birth, death })
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

impl fmt::Display for DiagramPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.birth, self.death)
    }
}

#[derive(Debug, Error)]
pub enum DiagramError {
    #[error("diagram point ({birth}, {death}) has non-finite coordinates")]
    NonFinite { birth: f64, death: f64 },
    #[error("diagram point ({birth}, {death}) dies before it is born")]
    DeathBeforeBirth { birth: f64, death: f64 },
}

/// A finite multiset of diagram points with an optional class label and a
/// free-form filtration tag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub points: Vec<DiagramPoint>,
    pub label: Option<usize>,
    pub tag: String,
}

impl PersistenceDiagram {
    pub fn new(points: Vec<DiagramPoint>, label: Option<usize>, tag: impl Into<String>) -> Self {
        Self { points, label, tag: tag.into() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Bottleneck distance between two one-point diagrams:
/// `min(linf(x, y), max(pers(x)/2, pers(y)/2))`. The second branch matches
/// both points to the formal diagonal.
pub fn point_bottleneck(x: DiagramPoint, y: DiagramPoint) -> f64 {
    let linf = (x.birth - y.birth).abs().max((x.death - y.death).abs());
    let diag = (x.persistence() / 2.0).max(y.persistence() / 2.0);
    linf.min(diag)
}

fn linf(x: DiagramPoint, y: DiagramPoint) -> f64 {
    (x.birth - y.birth).abs().max((x.death - y.death).abs())
}

/// Keep the `n_max` points with largest persistence. Ties break toward
/// smaller birth, then smaller death, then original index.
pub fn top_persistence_filter(a: &PersistenceDiagram, n_max: usize) -> PersistenceDiagram {
    assert!(n_max >= 1, "n_max must be at least 1");
    if a.points.len() <= n_max {
        return a.clone();
    }
    let mut order: Vec<usize> = (0..a.points.len()).collect();
    order.sort_by(|&i, &j| {
        let (p, q) = (&a.points[i], &a.points[j]);
        q.persistence()
            .partial_cmp(&p.persistence())
            .unwrap()
            .then(p.birth.partial_cmp(&q.birth).unwrap())
            .then(p.death.partial_cmp(&q.death).unwrap())
            .then(i.cmp(&j))
    });
    order.truncate(n_max);
    order.sort_unstable();
    PersistenceDiagram {
        points: order.iter().map(|&i| a.points[i]).collect(),
        label: a.label,
        tag: a.tag.clone(),
    }
}

/// Where each point of `A` is sent by a witnessing optimal matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Matched to the point of `B` with this index.
    ToPoint(usize),
    ToDiagonal,
}

/// A witnessing matching for the bottleneck distance: one assignment per
/// point of `A`; points of `B` not hit by any `ToPoint` go to the diagonal.
#[derive(Debug, Clone)]
pub struct BottleneckMatching {
    pub a_to: Vec<Assignment>,
}

impl BottleneckMatching {
    /// Indices of `B` points matched to the diagonal.
    pub fn unmatched_b(&self, b_len: usize) -> Vec<usize> {
        let mut hit = vec![false; b_len];
        for a in &self.a_to {
            if let Assignment::ToPoint(j) = a {
                hit[*j] = true;
            }
        }
        (0..b_len).filter(|&j| !hit[j]).collect()
    }

    pub fn is_total(&self, b_len: usize) -> bool {
        self.a_to.iter().all(|a| matches!(a, Assignment::ToPoint(_)))
            && self.unmatched_b(b_len).is_empty()
    }
}

/// Exact bottleneck distance under diagonal augmentation, with a witnessing
/// matching. Candidate thresholds are all pairwise l-infinity distances and
/// all half-persistences; a binary search over the sorted candidate list
/// finds the smallest feasible threshold, where feasibility is a perfect
/// matching in the threshold graph (with one diagonal slot per point) found
/// by augmenting-path maximum bipartite matching.
pub fn bottleneck_distance(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
) -> (f64, BottleneckMatching) {
    let n = a.points.len();
    let m = b.points.len();
    if n == 0 && m == 0 {
        return (0.0, BottleneckMatching { a_to: Vec::new() });
    }

    let mut candidates: Vec<f64> = Vec::with_capacity(n * m + n + m + 1);
    candidates.push(0.0);
    for &x in &a.points {
        candidates.push(x.persistence() / 2.0);
        for &y in &b.points {
            candidates.push(linf(x, y));
        }
    }
    for &y in &b.points {
        candidates.push(y.persistence() / 2.0);
    }
    candidates.sort_by(|p, q| p.partial_cmp(q).unwrap());
    candidates.dedup();

    // Binary search over the discrete candidate list; the distance is an
    // exact element of the candidate set.
    let mut lo = 0usize;
    let mut hi = candidates.len() - 1;
    debug_assert!(feasible(a, b, candidates[hi]).is_some());
    if let Some(matching) = feasible(a, b, candidates[lo]) {
        return (candidates[lo], matching);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if feasible(a, b, candidates[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let matching = feasible(a, b, candidates[hi]).expect("threshold known feasible");
    (candidates[hi], matching)
}

/// Threshold graph: left = A points + one slot per B point, right = B points
/// + one slot per A point. An A point may match a B point (cost linf), its
/// own diagonal slot (cost pers/2); a B slot may match its B point (cost
/// pers/2) or any A slot (diagonal-diagonal, cost 0).
fn feasible(
    a: &PersistenceDiagram,
    b: &PersistenceDiagram,
    t: f64,
) -> Option<BottleneckMatching> {
    let n = a.points.len();
    let m = b.points.len();
    let mut graph = BipartiteGraph::new(n + m, m + n);
    for (i, &x) in a.points.iter().enumerate() {
        for (j, &y) in b.points.iter().enumerate() {
            if linf(x, y) <= t {
                graph.add_edge(i, j);
            }
        }
        if x.persistence() / 2.0 <= t {
            graph.add_edge(i, m + i);
        }
    }
    for (j, &y) in b.points.iter().enumerate() {
        if y.persistence() / 2.0 <= t {
            graph.add_edge(n + j, j);
        }
        for i in 0..n {
            graph.add_edge(n + j, m + i);
        }
    }
    let matching = maximum_matching(&graph);
    if matching.size < n + m {
        return None;
    }
    let a_to = (0..n)
        .map(|i| match matching.pair_left[i] {
            Some(j) if j < m => Assignment::ToPoint(j),
            _ => Assignment::ToDiagonal,
        })
        .collect();
    Some(BottleneckMatching { a_to })
}

// ---------------------------------------------------------------------------
// File I/O: one JSON object per line
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DiagramRecord {
    points: Vec<[f64; 2]>,
    label: Option<usize>,
    tag: String,
}

/// Read-side record: a `null` death marks an essential (infinite) feature,
/// which is dropped at ingestion.
#[derive(Deserialize)]
struct DiagramRecordIn {
    points: Vec<(f64, Option<f64>)>,
    label: Option<usize>,
    tag: String,
}

#[derive(Debug, Error)]
pub enum DiagramIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed diagram record: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: point ({birth}, {death}) dies before it is born")]
    DeathBeforeBirth { line: usize, birth: f64, death: f64 },
}

/// Result of reading a diagram file. Points with infinite death are dropped
/// at ingestion; `dropped_infinite` counts them so callers can warn.
#[derive(Debug)]
pub struct ReadDiagrams {
    pub diagrams: Vec<PersistenceDiagram>,
    pub dropped_infinite: usize,
}

pub fn read_diagrams(path: impl AsRef<Path>) -> Result<ReadDiagrams, DiagramIoError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut diagrams = Vec::new();
    let mut dropped = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DiagramRecordIn = serde_json::from_str(&line)
            .map_err(|source| DiagramIoError::Parse { line: idx + 1, source })?;
        let mut points = Vec::with_capacity(record.points.len());
        for (birth, death) in record.points {
            let Some(death) = death.filter(|d| d.is_finite()) else {
                dropped += 1;
                continue;
            };
            if death < birth {
                return Err(DiagramIoError::DeathBeforeBirth { line: idx + 1, birth, death });
            }
            points.push(DiagramPoint { birth, death });
        }
        diagrams.push(PersistenceDiagram { points, label: record.label, tag: record.tag });
    }
    Ok(ReadDiagrams { diagrams, dropped_infinite: dropped })
}

pub fn write_diagrams(
    diagrams: &[PersistenceDiagram],
    path: impl AsRef<Path>,
) -> Result<(), DiagramIoError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for d in diagrams {
        let record = DiagramRecord {
            points: d.points.iter().map(|p| [p.birth, p.death]).collect(),
            label: d.label,
            tag: d.tag.clone(),
        };
        serde_json::to_writer(&mut file, &record).expect("diagram record serializes");
        file.write_all(b"\n")?;
    }
    Ok(())
}
