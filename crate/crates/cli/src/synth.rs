//! Synthetic annulus clouds and diagram inflation.

use palace_core::diagram::{DiagramPoint, PersistenceDiagram};
use palace_core::rips::PointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Inner radii per class; outer radius is 1. Class 3 is a disk.
pub const INNER_RADII: [f64; 4] = [0.85, 0.70, 0.50, 0.00];

/// Area-uniform annulus sample with isotropic Gaussian noise. The stream
/// index selects an independent substream of the seeded generator, one per
/// cloud, so datasets are bit-reproducible and order-independent.
pub fn gen_annulus(
    class_index: usize,
    n_points: usize,
    noise_sd: f64,
    seed: u64,
    stream: u64,
) -> PointCloud {
    let r_in = INNER_RADII[class_index];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let noise = Normal::new(0.0, noise_sd).expect("valid noise sd");
    let points = (0..n_points)
        .map(|_| {
            let u: f64 = rng.gen();
            let radius = (u * (1.0 - r_in * r_in) + r_in * r_in).sqrt();
            let angle = rng.gen::<f64>() * std::f64::consts::TAU;
            let mut p = [radius * angle.cos(), radius * angle.sin()];
            if noise_sd > 0.0 {
                p[0] += noise.sample(&mut rng);
                p[1] += noise.sample(&mut rng);
            }
            p
        })
        .collect();
    PointCloud { points, label: Some(class_index) }
}

/// The full 4-class dataset: `per_class` clouds per class, cloud index
/// `class * per_class + i` as the stream id.
pub fn gen_annulus_dataset(
    per_class: usize,
    n_points: usize,
    noise_sd: f64,
    seed: u64,
) -> Vec<PointCloud> {
    let mut clouds = Vec::with_capacity(4 * per_class);
    for class in 0..4 {
        for i in 0..per_class {
            let stream = (class * per_class + i) as u64;
            clouds.push(gen_annulus(class, n_points, noise_sd, seed, stream));
        }
    }
    clouds
}

/// Domain inflation: append the off-diagonal point `(0, ell)`. At `ell = 0`
/// the point has zero persistence and is dropped, leaving the diagram
/// unchanged.
pub fn inflate_diagram(a: &PersistenceDiagram, ell: f64) -> PersistenceDiagram {
    let mut out = a.clone();
    if ell > 0.0 {
        out.points.push(DiagramPoint { birth: 0.0, death: ell });
    }
    out
}
