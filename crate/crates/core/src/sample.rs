//! Deterministic sampling of support elements and flags, seeded per run.

use crate::jet::SupportElement;
use crate::metric::{FinslerMetric, Kernel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// The seeded generator used across the crate (stable across platforms).
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Base-point box the samples are drawn from, per family (keeps funk
/// samples well inside the disk and finite-difference stencils in-domain).
fn x_half_width(metric: &FinslerMetric) -> f64 {
    match metric.kernel {
        Kernel::Funk => 0.55,
        _ => 0.8,
    }
}

/// Draws a support element with x in the family's safe box and |v| in
/// [0.5, 2] bounded away from zero.
pub fn sample_support(metric: &FinslerMetric, rng: &mut ChaCha8Rng) -> SupportElement {
    let n = metric.dim();
    let w = x_half_width(metric);
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-w..w)).collect();
        if !metric.in_domain(&x) {
            continue;
        }
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 0.3 {
            continue;
        }
        let target = rng.gen_range(0.5..2.0);
        let v = v.iter().map(|c| c * target / norm).collect();
        return SupportElement::new(x, v).expect("nonzero by construction");
    }
}

/// Draws a flag edge transverse to v (rejects near-parallel directions).
pub fn sample_edge(z: &SupportElement, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = z.dim();
    loop {
        let edge: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let en = edge.iter().map(|c| c * c).sum::<f64>().sqrt();
        if en < 0.3 {
            continue;
        }
        let vn = z.v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let cos: f64 =
            edge.iter().zip(&z.v).map(|(a, b)| a * b).sum::<f64>() / (en * vn);
        if cos.abs() > 0.95 {
            continue;
        }
        return edge;
    }
}
