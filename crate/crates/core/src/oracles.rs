//! Independent oracles for the Riemannian families.
//!
//! Everything here is closed-form in x (no jets, no finite differences):
//! Christoffel symbols and the classical Riemann tensor of the built-in
//! block-conformal metrics, the space-form curvature formula, and the exact
//! great-circle geodesic through the stereographic chart. These are used by
//! the test suites to cross-check the generic engine.

use crate::metric::{FinslerMetric, Kernel, RiemFactor};
use crate::tensor::{TensorBlock, Variance};

/// Closed-form data for a Riemannian metric a_ij(x) that is block-diagonal
/// with conformally-flat blocks a_ij = c(x_block) δ_ij.
pub struct RiemannOracle {
    n: usize,
    /// (factor, offset, length); flat factors have c ≡ 1
    blocks: Vec<(RiemFactor, usize, usize)>,
}

impl RiemannOracle {
    /// Available for the Riemannian families (euclidean, sphere, product).
    pub fn try_new(metric: &FinslerMetric) -> Option<RiemannOracle> {
        let n = metric.dim();
        let blocks = match &metric.kernel {
            Kernel::Euclidean => vec![(RiemFactor::Flat, 0, n)],
            Kernel::Sphere { radius } => vec![(RiemFactor::Sphere { radius: *radius }, 0, n)],
            Kernel::Product { blocks } => blocks.clone(),
            _ => return None,
        };
        Some(RiemannOracle { n, blocks })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Conformal factor, log-gradient φ_j = ∂_j log c and ∂_m φ_j for the
    /// sphere block: c = 4r⁴/s², s = r² + |x|².
    fn sphere_phi(radius: f64, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let d = x.len();
        let s: f64 = radius * radius + x.iter().map(|c| c * c).sum::<f64>();
        let c = 4.0 * radius.powi(4) / (s * s);
        let phi: Vec<f64> = x.iter().map(|&xi| -4.0 * xi / s).collect();
        // dphi[m * d + j] = ∂_m φ_j = −4 δ_mj / s + 8 x_j x_m / s²
        let mut dphi = vec![0.0; d * d];
        for m in 0..d {
            for j in 0..d {
                let mut val = 8.0 * x[j] * x[m] / (s * s);
                if m == j {
                    val -= 4.0 / s;
                }
                dphi[m * d + j] = val;
            }
        }
        (c, phi, dphi)
    }

    /// The matrix a_ij(x).
    pub fn a(&self, x: &[f64]) -> TensorBlock {
        let mut out = TensorBlock::zeros(self.n, vec![Variance::Down, Variance::Down]);
        for (factor, off, len) in &self.blocks {
            let c = match factor {
                RiemFactor::Flat => 1.0,
                RiemFactor::Sphere { radius } => {
                    Self::sphere_phi(*radius, &x[*off..*off + *len]).0
                }
            };
            for i in 0..*len {
                out.set(&[off + i, off + i], c);
            }
        }
        out
    }

    /// Levi-Civita symbols γⁱ_jk of a_ij, by direct differentiation of the
    /// closed form. For a conformal block: γⁱ_jk = ½(φ_j δⁱ_k + φ_k δⁱ_j − φ_i δ_jk).
    pub fn christoffel(&self, x: &[f64]) -> TensorBlock {
        let mut out =
            TensorBlock::zeros(self.n, vec![Variance::Up, Variance::Down, Variance::Down]);
        for (factor, off, len) in &self.blocks {
            let phi = match factor {
                RiemFactor::Flat => continue,
                RiemFactor::Sphere { radius } => {
                    Self::sphere_phi(*radius, &x[*off..*off + *len]).1
                }
            };
            for i in 0..*len {
                for j in 0..*len {
                    for k in 0..*len {
                        let mut val = 0.0;
                        if i == k {
                            val += 0.5 * phi[j];
                        }
                        if i == j {
                            val += 0.5 * phi[k];
                        }
                        if j == k {
                            val -= 0.5 * phi[i];
                        }
                        out.set(&[off + i, off + j, off + k], val);
                    }
                }
            }
        }
        out
    }

    /// ∂_m γⁱ_jk, closed form. Index order: [m][i][j][k].
    fn christoffel_derivative(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for (factor, off, len) in &self.blocks {
            let dphi = match factor {
                RiemFactor::Flat => continue,
                RiemFactor::Sphere { radius } => {
                    Self::sphere_phi(*radius, &x[*off..*off + *len]).2
                }
            };
            let d = *len;
            for m in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            let mut val = 0.0;
                            if i == k {
                                val += 0.5 * dphi[m * d + j];
                            }
                            if i == j {
                                val += 0.5 * dphi[m * d + k];
                            }
                            if j == k {
                                val -= 0.5 * dphi[m * d + i];
                            }
                            let (gm, gi, gj, gk) = (off + m, off + i, off + j, off + k);
                            out[((gm * n + gi) * n + gj) * n + gk] = val;
                        }
                    }
                }
            }
        }
        out
    }

    /// Classical Riemann tensor with the crate convention
    /// Rⁱ_jkl = ∂_k γⁱ_jl − ∂_l γⁱ_jk + γⁱ_rk γʳ_jl − γⁱ_rl γʳ_jk.
    pub fn riemann(&self, x: &[f64]) -> TensorBlock {
        let n = self.n;
        let gamma = self.christoffel(x);
        let dgamma = self.christoffel_derivative(x);
        let dg = |m: usize, i: usize, j: usize, k: usize| dgamma[((m * n + i) * n + j) * n + k];
        let mut out = TensorBlock::zeros(
            n,
            vec![Variance::Up, Variance::Down, Variance::Down, Variance::Down],
        );
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut val = dg(k, i, j, l) - dg(l, i, j, k);
                        for r in 0..n {
                            val += gamma.get(&[i, r, k]) * gamma.get(&[r, j, l])
                                - gamma.get(&[i, r, l]) * gamma.get(&[r, j, k]);
                        }
                        out.set(&[i, j, k, l], val);
                    }
                }
            }
        }
        out
    }
}

/// Space-form curvature: Rⁱ_jkl = K (a_jl δⁱ_k − a_jk δⁱ_l).
pub fn space_form_riemann(a: &TensorBlock, curvature: f64) -> TensorBlock {
    let n = a.dim;
    let mut out = TensorBlock::zeros(
        n,
        vec![Variance::Up, Variance::Down, Variance::Down, Variance::Down],
    );
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut val = 0.0;
                    if i == k {
                        val += curvature * a.get(&[j, l]);
                    }
                    if i == l {
                        val -= curvature * a.get(&[j, k]);
                    }
                    out.set(&[i, j, k, l], val);
                }
            }
        }
    }
    out
}

/// Embedding of the stereographic chart into ℝ^{n+1}:
/// σ(x) = (2r²x, r(|x|² − r²)) / (r² + |x|²); |σ(x)| = r.
pub fn sphere_embed(radius: f64, x: &[f64]) -> Vec<f64> {
    let r2 = radius * radius;
    let xx: f64 = x.iter().map(|c| c * c).sum();
    let s = r2 + xx;
    let mut out: Vec<f64> = x.iter().map(|&xi| 2.0 * r2 * xi / s).collect();
    out.push(radius * (xx - r2) / s);
    out
}

/// Pushforward of a chart tangent vector under the embedding.
pub fn sphere_embed_tangent(radius: f64, x: &[f64], u: &[f64]) -> Vec<f64> {
    let r2 = radius * radius;
    let xx: f64 = x.iter().map(|c| c * c).sum();
    let s = r2 + xx;
    let xu: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
    let mut out: Vec<f64> = (0..x.len())
        .map(|i| (2.0 * r2 * u[i] * s - 4.0 * r2 * x[i] * xu) / (s * s))
        .collect();
    out.push(4.0 * radius * r2 * xu / (s * s));
    out
}

/// Inverse of the embedding (defined away from the missing chart point).
pub fn sphere_chart(radius: f64, p: &[f64]) -> Vec<f64> {
    let w = p[p.len() - 1];
    p[..p.len() - 1]
        .iter()
        .map(|&y| radius * y / (radius - w))
        .collect()
}

/// Exact great-circle geodesic through z0 = (x0, v0), returned in chart
/// coordinates: position and velocity at parameter t.
pub fn great_circle(radius: f64, x0: &[f64], v0: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
    let p = sphere_embed(radius, x0);
    let vv = sphere_embed_tangent(radius, x0, v0);
    let speed: f64 = vv.iter().map(|c| c * c).sum::<f64>().sqrt();
    let omega = speed / radius;
    let (sin, cos) = (omega * t).sin_cos();
    let dim = p.len();
    let mut pt = vec![0.0; dim];
    let mut vt = vec![0.0; dim];
    for i in 0..dim {
        pt[i] = p[i] * cos + vv[i] / omega * sin;
        vt[i] = -p[i] * omega * sin + vv[i] * cos;
    }
    // pull back: x = r y/(r−w); ẋ = r (ẏ(r−w) + y ẇ)/(r−w)²
    let w = pt[dim - 1];
    let dw = vt[dim - 1];
    let denom = radius - w;
    let x: Vec<f64> = (0..dim - 1).map(|i| radius * pt[i] / denom).collect();
    let v: Vec<f64> = (0..dim - 1)
        .map(|i| radius * (vt[i] * denom + pt[i] * dw) / (denom * denom))
        .collect();
    (x, v)
}
