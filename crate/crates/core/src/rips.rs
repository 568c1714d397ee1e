//! Vietoris-Rips persistent homology (H0, H1) for 2-D point clouds.
//!
//! H0 comes from union-find over edges sorted by length; H1 from GF(2)
//! column reduction of the triangle boundary matrix. Simplex filtration
//! value is the max pairwise distance of its vertices. Zero-persistence
//! bars and essential classes are discarded.

use thiserror::Error;

use crate::diagram::{DiagramPoint, PersistenceDiagram};

/// Cap on the triangle enumeration; `rips_persistence` uses this default.
pub const DEFAULT_MAX_POINTS: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 2]>,
    pub label: Option<usize>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 2]>, label: Option<usize>) -> Result<Self, RipsError> {
        if points.is_empty() {
            return Err(RipsError::EmptyCloud);
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(RipsError::NonFiniteCoordinate);
        }
        Ok(Self { points, label })
    }
}

#[derive(Debug, Error)]
pub enum RipsError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point cloud has a non-finite coordinate")]
    NonFiniteCoordinate,
    #[error("cloud of {size} points exceeds the cap of {cap} (triangle enumeration is cubic)")]
    CloudTooLarge { size: usize, cap: usize },
    #[error("max_radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

#[derive(Debug, Clone)]
pub struct RipsDiagrams {
    pub h0: PersistenceDiagram,
    pub h1: PersistenceDiagram,
}

pub fn rips_persistence(cloud: &PointCloud, max_radius: f64) -> Result<RipsDiagrams, RipsError> {
    rips_persistence_capped(cloud, max_radius, DEFAULT_MAX_POINTS)
}

pub fn rips_persistence_capped(
    cloud: &PointCloud,
    max_radius: f64,
    cap: usize,
) -> Result<RipsDiagrams, RipsError> {
    if max_radius <= 0.0 {
        return Err(RipsError::NonPositiveRadius(max_radius));
    }
    let n = cloud.points.len();
    if n > cap {
        return Err(RipsError::CloudTooLarge { size: n, cap });
    }

    let dist = |i: usize, j: usize| -> f64 {
        let dx = cloud.points[i][0] - cloud.points[j][0];
        let dy = cloud.points[i][1] - cloud.points[j][1];
        (dx * dx + dy * dy).sqrt()
    };

    // Edges within max_radius, sorted by (value, lexicographic vertices).
    let mut edges: Vec<(f64, u32, u32)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(i, j);
            if d <= max_radius {
                edges.push((d, i as u32, j as u32));
            }
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // H0: union-find over sorted edges; merges emit (0, edge length).
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let mut h0_points = Vec::new();
    for &(val, i, j) in &edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri as usize] = rj;
            if val > 0.0 {
                h0_points.push(DiagramPoint { birth: 0.0, death: val });
            }
        }
    }

    // Edge rank lookup for the boundary matrix rows.
    let mut edge_rank = vec![u32::MAX; n * n];
    for (rank, &(_, i, j)) in edges.iter().enumerate() {
        edge_rank[i as usize * n + j as usize] = rank as u32;
    }

    // Triangles within max_radius, sorted by (value, lexicographic vertices);
    // tie order (value, dimension, vertex tuple) holds because at equal value
    // every edge precedes every triangle in the reduction's row indexing.
    let mut triangles: Vec<(f64, u32, u32, u32)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = dist(i, j);
            if dij > max_radius {
                continue;
            }
            for k in (j + 1)..n {
                let val = dij.max(dist(i, k)).max(dist(j, k));
                if val <= max_radius {
                    triangles.push((val, i as u32, j as u32, k as u32));
                }
            }
        }
    }
    triangles.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // GF(2) column reduction: columns are triangle boundaries over edge ranks.
    let mut low_owner: Vec<Option<usize>> = vec![None; edges.len()];
    let mut reduced_cols: Vec<Vec<u32>> = Vec::with_capacity(triangles.len());
    let mut h1_points = Vec::new();
    for &(val, i, j, k) in &triangles {
        let mut col = vec![
            edge_rank[i as usize * n + j as usize],
            edge_rank[i as usize * n + k as usize],
            edge_rank[j as usize * n + k as usize],
        ];
        col.sort_unstable();
        loop {
            let Some(&low) = col.last() else { break };
            match low_owner[low as usize] {
                Some(owner) => {
                    col = xor_sorted(&col, &reduced_cols[owner]);
                }
                None => {
                    low_owner[low as usize] = Some(reduced_cols.len());
                    let birth = edges[low as usize].0;
                    if val > birth {
                        h1_points.push(DiagramPoint { birth, death: val });
                    }
                    break;
                }
            }
        }
        reduced_cols.push(col);
    }

    let mk = |points: Vec<DiagramPoint>, tag: &str| PersistenceDiagram {
        points,
        label: cloud.label,
        tag: tag.to_string(),
    };
    Ok(RipsDiagrams { h0: mk(h0_points, "rips-h0"), h1: mk(h1_points, "rips-h1") })
}

/// Symmetric difference of two ascending index lists.
fn xor_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

// ---------------------------------------------------------------------------
// Point-cloud file format: one JSON object per line
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct CloudRecord {
    points: Vec<[f64; 2]>,
    label: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CloudIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed point-cloud record: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: RipsError },
}

pub fn read_clouds(path: impl AsRef<std::path::Path>) -> Result<Vec<PointCloud>, CloudIoError> {
    use std::io::BufRead;
    let file = std::fs::File::open(path)?;
    let mut clouds = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CloudRecord = serde_json::from_str(&line)
            .map_err(|source| CloudIoError::Parse { line: idx + 1, source })?;
        let cloud = PointCloud::new(record.points, record.label)
            .map_err(|source| CloudIoError::Invalid { line: idx + 1, source })?;
        clouds.push(cloud);
    }
    Ok(clouds)
}

pub fn write_clouds(
    clouds: &[PointCloud],
    path: impl AsRef<std::path::Path>,
) -> Result<(), CloudIoError> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in clouds {
        let record = CloudRecord { points: c.points.clone(), label: c.label };
        serde_json::to_writer(&mut file, &record).expect("cloud record serializes");
        file.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: &[[f64; 2]]) -> PointCloud {
        PointCloud::new(pts.to_vec(), None).unwrap()
    }

    fn bars(d: &PersistenceDiagram) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = d.points.iter().map(|p| (p.birth, p.death)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn equilateral_triangle() {
        let s = 1.0;
        let h = 3.0f64.sqrt() / 2.0;
        let c = cloud(&[[0.0, 0.0], [s, 0.0], [s / 2.0, h]]);
        let out = rips_persistence(&c, 10.0).unwrap();
        // two merge bars at the side length; cycle and triangle appear together
        let b = bars(&out.h0);
        assert_eq!(b.len(), 2);
        for (birth, death) in b {
            assert_eq!(birth, 0.0);
            assert!((death - s).abs() < 1e-12);
        }
        assert!(out.h1.points.is_empty());
    }

    #[test]
    fn unit_square_loop() {
        let c = cloud(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let out = rips_persistence(&c, 10.0).unwrap();
        let b = bars(&out.h1);
        assert_eq!(b.len(), 1);
        assert!((b[0].0 - 1.0).abs() < 1e-12);
        assert!((b[0].1 - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_point_is_empty() {
        let c = cloud(&[[0.3, -0.7]]);
        let out = rips_persistence(&c, 1.0).unwrap();
        assert!(out.h0.points.is_empty());
        assert!(out.h1.points.is_empty());
    }

    #[test]
    fn cloud_too_large_errors_with_cap() {
        let pts: Vec<[f64; 2]> = (0..6).map(|i| [i as f64, 0.0]).collect();
        let c = PointCloud::new(pts, None).unwrap();
        match rips_persistence_capped(&c, 1.0, 5) {
            Err(RipsError::CloudTooLarge { size: 6, cap: 5 }) => {}
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn h0_count_matches_connectivity() {
        let mut rng = crate::test_rng(31);
        for _ in 0..20 {
            let n = rng.usize_in(2, 24);
            let pts: Vec<[f64; 2]> =
                (0..n).map(|_| [rng.f64_in(0.0, 1.0), rng.f64_in(0.0, 1.0)]).collect();
            let c = PointCloud::new(pts, None).unwrap();
            // diameter bound keeps everything connected
            let out = rips_persistence(&c, 3.0).unwrap();
            assert_eq!(out.h0.points.len(), n - 1);
        }
    }

    #[test]
    fn bars_are_valid_and_realized() {
        let mut rng = crate::test_rng(37);
        let n = 18;
        let pts: Vec<[f64; 2]> =
            (0..n).map(|_| [rng.f64_in(0.0, 1.0), rng.f64_in(0.0, 1.0)]).collect();
        let c = PointCloud::new(pts.clone(), None).unwrap();
        let out = rips_persistence(&c, 3.0).unwrap();
        let d = |i: usize, j: usize| {
            ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt()
        };
        let mut edge_lengths = Vec::new();
        let mut tri_diams = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edge_lengths.push(d(i, j));
                for k in (j + 1)..n {
                    tri_diams.push(d(i, j).max(d(i, k)).max(d(j, k)));
                }
            }
        }
        let close = |x: f64, pool: &[f64]| pool.iter().any(|&v| (v - x).abs() < 1e-12);
        for p in &out.h1.points {
            assert!(p.death > p.birth);
            assert!(close(p.birth, &edge_lengths), "H1 birth {} not an edge length", p.birth);
            assert!(close(p.death, &tri_diams), "H1 death {} not a triangle diameter", p.death);
        }
        for p in &out.h0.points {
            assert!(close(p.death, &edge_lengths));
        }
    }

    #[test]
    fn diagram_invariant_under_point_permutation() {
        let mut rng = crate::test_rng(41);
        for _ in 0..10 {
            let n = rng.usize_in(6, 16);
            let mut pts: Vec<[f64; 2]> =
                (0..n).map(|_| [rng.f64_in(0.0, 1.0), rng.f64_in(0.0, 1.0)]).collect();
            let base = rips_persistence(&PointCloud::new(pts.clone(), None).unwrap(), 3.0).unwrap();
            rng.shuffle(&mut pts);
            let perm = rips_persistence(&PointCloud::new(pts, None).unwrap(), 3.0).unwrap();
            assert_eq!(bars(&base.h0), bars(&perm.h0));
            assert_eq!(bars(&base.h1), bars(&perm.h1));
        }
    }

    #[test]
    fn annulus_has_dominant_h1_bar() {
        let mut rng = crate::test_rng(43);
        let pts: Vec<[f64; 2]> = (0..40)
            .map(|_| {
                let th = rng.f64_in(0.0, std::f64::consts::TAU);
                let r = rng.f64_in(0.9, 1.0);
                [r * th.cos(), r * th.sin()]
            })
            .collect();
        let c = PointCloud::new(pts, None).unwrap();
        let out = rips_persistence(&c, 4.0).unwrap();
        let strongest = out
            .h1
            .points
            .iter()
            .map(|p| p.persistence())
            .fold(0.0f64, f64::max);
        assert!(strongest > 0.8, "expected a dominant loop, got {strongest}");
    }
}
