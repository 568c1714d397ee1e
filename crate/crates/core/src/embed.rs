//! The per-landmark cap coordinate and the summation embedding into R^K.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::cover::LandmarkConfiguration;
use crate::diagram::{point_bottleneck, DiagramPoint, PersistenceDiagram};

/// Piecewise-linear cap with peak `r` at `p`: `max(r - d_B(p, x), 0)`.
/// 1-Lipschitz in `x` under the point bottleneck metric.
pub fn coordinate(p: DiagramPoint, r: f64, x: DiagramPoint) -> f64 {
    (r - point_bottleneck(p, x)).max(0.0)
}

/// One diagram's summation embedding; `config_id` ties it to the generating
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub config_id: u64,
}

impl EmbeddingVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn l2_distance(&self, other: &EmbeddingVector) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `Phi_k(A) = w_k sum_{a in A} max(r_k - d_B(p_k, a), 0)`. Accumulates per
/// diagram point into the landmarks whose ball contains it, so cost tracks
/// the number of activations rather than K alone.
pub fn embed(a: &PersistenceDiagram, cfg: &LandmarkConfiguration) -> EmbeddingVector {
    let mut values = vec![0.0; cfg.len()];
    for &x in &a.points {
        for (k, lm) in cfg.landmarks.iter().enumerate() {
            let d = point_bottleneck(lm.position, x);
            if d < lm.radius {
                values[k] += lm.radius - d;
            }
        }
    }
    for (v, lm) in values.iter_mut().zip(&cfg.landmarks) {
        *v *= lm.weight;
    }
    EmbeddingVector { values, config_id: cfg.id() }
}

/// Row i is `embed(diagrams[i])`; rows computed in parallel, order preserved.
pub fn embed_batch(
    diagrams: &[PersistenceDiagram],
    cfg: &LandmarkConfiguration,
) -> Vec<EmbeddingVector> {
    diagrams.par_iter().map(|d| embed(d, cfg)).collect()
}

/// CSV export: header = landmark indices, one row per diagram.
pub fn write_matrix_csv(
    rows: &[EmbeddingVector],
    path: impl AsRef<Path>,
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let k = rows.first().map_or(0, |r| r.values.len());
    let header: Vec<String> = (0..k).map(|i| format!("l{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.values.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{assign_radii, fps_place, LandmarkConfiguration};
    use crate::diagram::{bottleneck_distance, top_persistence_filter};

    fn pt(b: f64, d: f64) -> DiagramPoint {
        DiagramPoint::new(b, d).unwrap()
    }

    #[test]
    fn coordinate_apex_and_support() {
        let p = pt(0.0, 2.0);
        assert_eq!(coordinate(p, 1.0, p), 1.0);
        // outside the support ball
        assert_eq!(coordinate(p, 0.3, pt(1.5, 3.5)), 0.0);
        // d_B = 0.5 by both-branch evaluation
        let v = coordinate(p, 1.0, pt(0.5, 2.0));
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coordinate_is_one_lipschitz() {
        let mut rng = crate::test_rng(73);
        for _ in 0..200 {
            let b = rng.f64_in(0.0, 3.0);
            let p = pt(b, b + rng.f64_in(0.0, 3.0));
            let r = rng.f64_in(0.1, 2.0);
            let mk = |rng: &mut crate::TestRng| {
                let b = rng.f64_in(0.0, 3.0);
                pt(b, b + rng.f64_in(0.0, 3.0))
            };
            let x = mk(&mut rng);
            let y = mk(&mut rng);
            let gap = (coordinate(p, r, x) - coordinate(p, r, y)).abs();
            assert!(gap <= point_bottleneck(x, y) + 1e-12);
        }
    }

    #[test]
    fn embed_empty_diagram_is_zero() {
        let cfg =
            LandmarkConfiguration::equal_weights(vec![pt(0.0, 10.0)], vec![1.0], 1.0).unwrap();
        let e = embed(&PersistenceDiagram::default(), &cfg);
        assert_eq!(e.values, vec![0.0]);
    }

    #[test]
    fn embed_double_apex_hit() {
        let p = pt(0.0, 10.0);
        let cfg = LandmarkConfiguration::equal_weights(vec![p], vec![0.8], 1.0).unwrap();
        let d = PersistenceDiagram::new(vec![p, p], None, "t");
        let e = embed(&d, &cfg);
        assert!((e.values[0] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn embed_all_points_outside_every_ball() {
        let cfg = LandmarkConfiguration::equal_weights(
            vec![pt(0.0, 40.0), pt(20.0, 60.0)],
            vec![0.5, 0.5],
            1.0,
        )
        .unwrap();
        let d = PersistenceDiagram::new(vec![pt(10.0, 50.0)], None, "t");
        assert_eq!(embed(&d, &cfg).values, vec![0.0, 0.0]);
    }

    #[test]
    fn nonzero_count_matches_activation_count() {
        let mut rng = crate::test_rng(79);
        for _ in 0..50 {
            let n = rng.usize_in(1, 10);
            let mk = |rng: &mut crate::TestRng| {
                let b = rng.f64_in(0.0, 3.0);
                pt(b, b + rng.f64_in(0.0, 3.0))
            };
            let points: Vec<DiagramPoint> = (0..n).map(|_| mk(&mut rng)).collect();
            let k = rng.usize_in(1, 6);
            let positions: Vec<DiagramPoint> = (0..k).map(|_| mk(&mut rng)).collect();
            let radii: Vec<f64> = (0..k).map(|_| rng.f64_in(0.1, 1.0)).collect();
            let cfg = LandmarkConfiguration::equal_weights(positions.clone(), radii.clone(), 1.0)
                .unwrap();
            let d = PersistenceDiagram::new(points.clone(), None, "t");
            let e = embed(&d, &cfg);
            let nonzero = e.values.iter().filter(|&&v| v > 0.0).count();
            let activated: usize = (0..k)
                .filter(|&kk| {
                    points
                        .iter()
                        .any(|&x| point_bottleneck(positions[kk], x) < radii[kk])
                })
                .count();
            assert_eq!(nonzero, activated);
        }
    }

    #[test]
    fn per_coordinate_bound() {
        let mut rng = crate::test_rng(83);
        for _ in 0..50 {
            let mk = |rng: &mut crate::TestRng| {
                let b = rng.f64_in(0.0, 3.0);
                pt(b, b + rng.f64_in(0.0, 3.0))
            };
            let n = rng.usize_in(1, 8);
            let points: Vec<DiagramPoint> = (0..n).map(|_| mk(&mut rng)).collect();
            let positions: Vec<DiagramPoint> = (0..3).map(|_| mk(&mut rng)).collect();
            let radii: Vec<f64> = (0..3).map(|_| rng.f64_in(0.1, 1.0)).collect();
            let cfg =
                LandmarkConfiguration::equal_weights(positions, radii.clone(), 1.0).unwrap();
            let e = embed(&PersistenceDiagram::new(points.clone(), None, "t"), &cfg);
            for (k, v) in e.values.iter().enumerate() {
                let bound = cfg.landmarks[k].weight * n as f64 * radii[k];
                assert!(*v <= bound + 1e-12);
            }
        }
    }

    /// Upper distortion on random configurations: whenever the witnessing
    /// matching is a bijection (the hypothesis the bound's matching argument
    /// needs), the embedding gap never exceeds N_max times the bottleneck
    /// distance.
    #[test]
    fn upper_distortion_on_random_pairs() {
        let mut rng = crate::test_rng(89);
        let n_max = 6usize;
        let mut checked = 0;
        while checked < 100 {
            let n = rng.usize_in(1, n_max);
            let mk_diagram = |rng: &mut crate::TestRng| {
                let pts: Vec<DiagramPoint> = (0..n)
                    .map(|_| {
                        let b = rng.f64_in(0.0, 2.0);
                        pt(b, b + rng.f64_in(0.0, 2.0))
                    })
                    .collect();
                PersistenceDiagram::new(pts, None, "t")
            };
            let a = top_persistence_filter(&mk_diagram(&mut rng), n_max);
            let b = top_persistence_filter(&mk_diagram(&mut rng), n_max);
            let (d, matching) = bottleneck_distance(&a, &b);
            if !matching.is_total(b.points.len()) {
                continue;
            }
            let mut support: Vec<DiagramPoint> = a.points.clone();
            support.extend_from_slice(&b.points);
            let tau = rng.f64_in(0.2, 1.0);
            let k = rng.usize_in(1, support.len());
            let fps = fps_place(&support, k, 0).unwrap();
            let radii = assign_radii(&fps.positions, rng.f64_in(0.25, 1.5), tau);
            let cfg = LandmarkConfiguration::equal_weights(fps.positions, radii, tau).unwrap();
            let gap = embed(&a, &cfg).l2_distance(&embed(&b, &cfg));
            assert!(
                gap <= n_max as f64 * d + 1e-9,
                "gap {gap} exceeds {} * {d}",
                n_max
            );
            checked += 1;
        }
    }

    #[test]
    fn batch_matches_single_and_csv_exports() {
        let mut rng = crate::test_rng(97);
        let cfg = LandmarkConfiguration::equal_weights(
            vec![pt(0.0, 2.0), pt(1.0, 4.0)],
            vec![1.0, 1.0],
            1.0,
        )
        .unwrap();
        let diagrams: Vec<PersistenceDiagram> = (0..5)
            .map(|_| {
                let b = rng.f64_in(0.0, 2.0);
                PersistenceDiagram::new(vec![pt(b, b + rng.f64_in(0.0, 2.0))], None, "t")
            })
            .collect();
        let batch = embed_batch(&diagrams, &cfg);
        for (d, e) in diagrams.iter().zip(&batch) {
            assert_eq!(embed(d, &cfg), *e);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embed.csv");
        write_matrix_csv(&batch, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("l0,l1\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
