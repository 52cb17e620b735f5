//! Fundamental tensor, Cartan tensor, geodesic spray, nonlinear connection,
//! and the Berwald / Cartan connection coefficients at a support element.
//!
//! Everything is assembled from one jet evaluation of F². The pipeline is
//! generic over the scalar type: instantiated at `f64` it returns point
//! values; instantiated at [`Dual`] every output carries its first
//! derivatives in all 2n base coordinates, from which horizontal derivatives
//! δ_k = ∂_k − Gʳ_k ∂̇_r of any derived tensor are formed (this is how the
//! curvature module differentiates Γ*, Gⁱ_j and Gⁱ_jk).

use crate::error::{FinslerError, Result};
use crate::jet::{evaluate_jet, JetValue, SupportElement};
use crate::metric::FinslerMetric;
use crate::scalar::{Dual, Real};
use crate::tensor::{invert_matrix, Arr2, Arr3, TensorBlock, Variance};

/// Table lookup of F²-partials at a given scalar type.
pub(crate) trait Entry: Real {
    /// Extra derivative orders the table must carry beyond what the formulas
    /// read directly (one for the gradient of a Dual).
    const EXTRA_ORDER: usize;
    fn entry(tab: &JetValue, xs: &[usize], vs: &[usize]) -> Self;
    fn coords(z: &SupportElement) -> (Vec<Self>, Vec<Self>);
}

impl Entry for f64 {
    const EXTRA_ORDER: usize = 0;
    fn entry(tab: &JetValue, xs: &[usize], vs: &[usize]) -> f64 {
        tab.partial(xs, vs)
    }
    fn coords(z: &SupportElement) -> (Vec<f64>, Vec<f64>) {
        (z.x.clone(), z.v.clone())
    }
}

impl Entry for Dual {
    const EXTRA_ORDER: usize = 1;
    fn entry(tab: &JetValue, xs: &[usize], vs: &[usize]) -> Dual {
        let n = tab.dim();
        let mut d = Dual::constant(tab.partial(xs, vs), 2 * n);
        let mut ext: Vec<usize> = Vec::with_capacity(xs.len() + 1);
        for m in 0..n {
            ext.clear();
            ext.extend_from_slice(xs);
            ext.push(m);
            d.grad[m] = tab.partial(&ext, vs);
        }
        for m in 0..n {
            ext.clear();
            ext.extend_from_slice(vs);
            ext.push(m);
            d.grad[n + m] = tab.partial(xs, &ext);
        }
        d
    }
    fn coords(z: &SupportElement) -> (Vec<Dual>, Vec<Dual>) {
        let n = z.dim();
        let x = (0..n).map(|i| Dual::seeded(z.x[i], i, 2 * n)).collect();
        let v = (0..n).map(|i| Dual::seeded(z.v[i], n + i, 2 * n)).collect();
        (x, v)
    }
}

/// All connection-level tensors at one support element, scalar-generic.
pub(crate) struct Pipe<S> {
    pub n: usize,
    /// fundamental tensor g_ij
    pub g: Arr2<S>,
    pub ginv: Arr2<S>,
    /// Cartan tensor T_ijk (all indices down)
    pub t: Arr3<S>,
    /// T with the first index raised (= vertical coefficients Cⁱ_jk)
    pub tu: Arr3<S>,
    /// spray coefficients Gⁱ
    pub spray: Vec<S>,
    /// nonlinear connection Gⁱ_j = ∂̇_j Gⁱ
    pub gj: Arr2<S>,
    /// Berwald coefficients Gⁱ_jk = ∂̇_k Gⁱ_j (only when requested)
    pub gjk: Option<Arr3<S>>,
    /// Cartan horizontal coefficients Γ*ⁱ_jk
    pub gamma: Arr3<S>,
}

impl<S: Entry> Pipe<S> {
    /// Required jet budget for the pipeline at this scalar type.
    pub fn budget(with_berwald: bool) -> (usize, usize) {
        let base_v = if with_berwald { 4 } else { 3 };
        (1 + S::EXTRA_ORDER, base_v + S::EXTRA_ORDER)
    }

    pub fn build(tab: &JetValue, z: &SupportElement, with_berwald: bool) -> Result<Pipe<S>> {
        let n = z.dim();
        let (xc, vc) = S::coords(z);
        let like = xc[0].lift(0.0);

        let g = Arr2::from_fn(n, &like, |&[i, j]| {
            S::entry(tab, &[], &[i, j]).scale(0.5)
        });
        let ginv = invert_matrix(&g, &like).ok_or(FinslerError::Singular("g inverse"))?;

        let t = Arr3::from_fn(n, &like, |&[i, j, k]| {
            S::entry(tab, &[], &[i, j, k]).scale(0.25)
        });
        let tu = Arr3::from_fn(n, &like, |&[i, j, k]| {
            let mut acc = ginv.at(&[i, 0]).clone() * t.at(&[0, j, k]).clone();
            for m in 1..n {
                acc = acc + ginv.at(&[i, m]).clone() * t.at(&[m, j, k]).clone();
            }
            acc
        });

        // A_l = vᵏ ∂²F²/∂xᵏ∂vˡ − ∂F²/∂xˡ ;  Gⁱ = ¼ gⁱˡ A_l
        let a: Vec<S> = (0..n)
            .map(|l| {
                let mut acc = -S::entry(tab, &[l], &[]);
                for k in 0..n {
                    acc = acc + vc[k].clone() * S::entry(tab, &[k], &[l]);
                }
                acc
            })
            .collect();
        let spray: Vec<S> = (0..n)
            .map(|i| {
                let mut acc = ginv.at(&[i, 0]).clone() * a[0].clone();
                for l in 1..n {
                    acc = acc + ginv.at(&[i, l]).clone() * a[l].clone();
                }
                acc.scale(0.25)
            })
            .collect();

        // ∂̇_j gⁱˡ = −2 gⁱᵃ T_abj g?ˡ
        let ginv_dot = |i: usize, l: usize, j: usize| -> S {
            let mut acc = like.lift(0.0);
            for aa in 0..n {
                for b in 0..n {
                    acc = acc
                        + ginv.at(&[i, aa]).clone()
                            * t.at(&[aa, b, j]).clone()
                            * ginv.at(&[b, l]).clone();
                }
            }
            acc.scale(-2.0)
        };
        // ∂̇_j A_l
        let a_dot = |l: usize, j: usize| -> S {
            let mut acc = S::entry(tab, &[j], &[l]) - S::entry(tab, &[l], &[j]);
            for k in 0..n {
                acc = acc + vc[k].clone() * S::entry(tab, &[k], &[l, j]);
            }
            acc
        };
        let gj = Arr2::from_fn(n, &like, |&[i, j]| {
            let mut acc = like.lift(0.0);
            for l in 0..n {
                acc = acc
                    + ginv_dot(i, l, j) * a[l].clone()
                    + ginv.at(&[i, l]).clone() * a_dot(l, j);
            }
            acc.scale(0.25)
        });

        let gjk = if with_berwald {
            // ∂̇_k ∂̇_j gⁱˡ
            let ginv_ddot = |i: usize, l: usize, j: usize, k: usize| -> S {
                let mut acc = like.lift(0.0);
                for aa in 0..n {
                    for b in 0..n {
                        let term = ginv_dot(i, aa, k)
                            * t.at(&[aa, b, j]).clone()
                            * ginv.at(&[b, l]).clone()
                            + ginv.at(&[i, aa]).clone()
                                * S::entry(tab, &[], &[aa, b, j, k]).scale(0.25)
                                * ginv.at(&[b, l]).clone()
                            + ginv.at(&[i, aa]).clone()
                                * t.at(&[aa, b, j]).clone()
                                * ginv_dot(b, l, k);
                        acc = acc + term;
                    }
                }
                acc.scale(-2.0)
            };
            let a_ddot = |l: usize, j: usize, k: usize| -> S {
                let mut acc = S::entry(tab, &[j], &[l, k]) + S::entry(tab, &[k], &[l, j])
                    - S::entry(tab, &[l], &[j, k]);
                for m in 0..n {
                    acc = acc + vc[m].clone() * S::entry(tab, &[m], &[l, j, k]);
                }
                acc
            };
            Some(Arr3::from_fn(n, &like, |&[i, j, k]| {
                let mut acc = like.lift(0.0);
                for l in 0..n {
                    acc = acc
                        + ginv_ddot(i, l, j, k) * a[l].clone()
                        + ginv_dot(i, l, j) * a_dot(l, k)
                        + ginv_dot(i, l, k) * a_dot(l, j)
                        + ginv.at(&[i, l]).clone() * a_ddot(l, j, k);
                }
                acc.scale(0.25)
            }))
        } else {
            None
        };

        // δ_j g_lk = ∂_j g_lk − Gᵐ_j ∂̇_m g_lk, with ∂̇_m g_lk = 2 T_lkm
        let delta_g = Arr3::from_fn(n, &like, |&[j, l, k]| {
            let mut acc = S::entry(tab, &[j], &[l, k]).scale(0.5);
            for m in 0..n {
                acc = acc - gj.at(&[m, j]).clone() * t.at(&[l, k, m]).clone().scale(2.0);
            }
            acc
        });
        let gamma = Arr3::from_fn(n, &like, |&[i, j, k]| {
            let mut acc = like.lift(0.0);
            for l in 0..n {
                let sym = delta_g.at(&[j, l, k]).clone() + delta_g.at(&[k, j, l]).clone()
                    - delta_g.at(&[l, j, k]).clone();
                acc = acc + ginv.at(&[i, l]).clone() * sym;
            }
            acc.scale(0.5)
        });

        Ok(Pipe {
            n,
            g,
            ginv,
            t,
            tu,
            spray,
            gj,
            gjk,
            gamma,
        })
    }
}

pub(crate) fn jet_table(
    metric: &FinslerMetric,
    z: &SupportElement,
    order_x: usize,
    order_v: usize,
) -> Result<JetValue> {
    metric.check_support(z)?;
    evaluate_jet(&metric.f_squared_field(), z, order_x, order_v)
}

pub(crate) fn pipe_f64(
    metric: &FinslerMetric,
    z: &SupportElement,
    with_berwald: bool,
) -> Result<Pipe<f64>> {
    let (ox, ov) = Pipe::<f64>::budget(with_berwald);
    let tab = jet_table(metric, z, ox, ov)?;
    Pipe::build(&tab, z, with_berwald)
}

pub(crate) fn pipe_dual(
    metric: &FinslerMetric,
    z: &SupportElement,
    with_berwald: bool,
) -> Result<Pipe<Dual>> {
    let (ox, ov) = Pipe::<Dual>::budget(with_berwald);
    let tab = jet_table(metric, z, ox, ov)?;
    Pipe::build(&tab, z, with_berwald)
}

/// Horizontal derivative δ_m of a Dual-tracked quantity:
/// grad_x[m] − Σ_r Gʳ_m grad_v[r].
pub(crate) fn delta_of(d: &Dual, gj: &Arr2<f64>, m: usize) -> f64 {
    let n = gj.n;
    let mut acc = d.grad[m];
    for r in 0..n {
        acc -= gj.at(&[r, m]) * d.grad[n + r];
    }
    acc
}

/// Vertical derivative ∂̇_m of a Dual-tracked quantity.
/// g_ij = ½ ∂²F²/∂vⁱ∂vʲ. Errors if g is not positive definite at z.
pub fn metric_tensor(metric: &FinslerMetric, z: &SupportElement) -> Result<TensorBlock> {
    let tab = jet_table(metric, z, 0, 2)?;
    let n = metric.dim();
    let mut g = TensorBlock::zeros(n, vec![Variance::Down, Variance::Down]);
    for i in 0..n {
        for j in 0..n {
            g.set(&[i, j], 0.5 * tab.partial(&[], &[i, j]));
        }
    }
    let gm = nalgebra::DMatrix::from_fn(n, n, |i, j| g.get(&[i, j]));
    if gm.symmetric_eigenvalues().iter().any(|&e| e <= 0.0) {
        return Err(FinslerError::NotPositiveDefinite);
    }
    Ok(g)
}

/// T_ijk = ½ ∂̇_k g_ij = ¼ ∂³F²/∂vⁱ∂vʲ∂vᵏ (totally symmetric, T·v = 0).
pub fn cartan_tensor(metric: &FinslerMetric, z: &SupportElement) -> Result<TensorBlock> {
    let tab = jet_table(metric, z, 0, 3)?;
    let n = metric.dim();
    let mut t = TensorBlock::zeros(n, vec![Variance::Down; 3]);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                t.set(&[i, j, k], 0.25 * tab.partial(&[], &[i, j, k]));
            }
        }
    }
    Ok(t)
}

/// Spray coefficients Gⁱ (geodesics satisfy ẍⁱ + 2Gⁱ(x, ẋ) = 0).
pub fn geodesic_spray(metric: &FinslerMetric, z: &SupportElement) -> Result<Vec<f64>> {
    let tab = jet_table(metric, z, 1, 2)?;
    let n = metric.dim();
    let like = 0.0;
    let g = Arr2::from_fn(n, &like, |&[i, j]| 0.5 * tab.partial(&[], &[i, j]));
    let ginv = invert_matrix(&g, &like).ok_or(FinslerError::Singular("g inverse"))?;
    let a: Vec<f64> = (0..n)
        .map(|l| {
            let mut acc = -tab.partial(&[l], &[]);
            for k in 0..n {
                acc += z.v[k] * tab.partial(&[k], &[l]);
            }
            acc
        })
        .collect();
    Ok((0..n)
        .map(|i| 0.25 * (0..n).map(|l| ginv.at(&[i, l]) * a[l]).sum::<f64>())
        .collect())
}

/// Nonlinear connection Gⁱ_j = ∂̇_j Gⁱ.
pub fn nonlinear_connection(metric: &FinslerMetric, z: &SupportElement) -> Result<TensorBlock> {
    let pipe = pipe_f64(metric, z, false)?;
    Ok(pipe.gj.to_block([Variance::Up, Variance::Down]))
}

/// The horizontal frame δ_j = ∂_j − Gᵏ_j ∂̇_k, represented by its vertical
/// part −Gᵏ_j (the x-part is the unit coordinate direction j).
pub struct HorizontalFrame {
    /// entry [k][j] = vertical coefficient of δ_j on ∂̇_k, i.e. −Gᵏ_j
    pub vertical_part: TensorBlock,
}

pub fn horizontal_frame(metric: &FinslerMetric, z: &SupportElement) -> Result<HorizontalFrame> {
    let gj = nonlinear_connection(metric, z)?;
    let n = gj.dim;
    let mut vp = TensorBlock::zeros(n, vec![Variance::Up, Variance::Down]);
    for k in 0..n {
        for j in 0..n {
            vp.set(&[k, j], -gj.get(&[k, j]));
        }
    }
    Ok(HorizontalFrame { vertical_part: vp })
}

/// Berwald coefficients Gⁱ_jk = ∂̇_k Gⁱ_j (totally symmetric in j, k).
pub fn berwald_coefficients(metric: &FinslerMetric, z: &SupportElement) -> Result<TensorBlock> {
    let pipe = pipe_f64(metric, z, true)?;
    Ok(pipe
        .gjk
        .expect("requested berwald coefficients")
        .to_block([Variance::Up, Variance::Down, Variance::Down]))
}

/// Cartan coefficients: horizontal Γ*ⁱ_jk (symmetric in j,k) and vertical
/// Cⁱ_jk = gⁱˡT_ljk.
pub fn cartan_coefficients(
    metric: &FinslerMetric,
    z: &SupportElement,
) -> Result<(TensorBlock, TensorBlock)> {
    let pipe = pipe_f64(metric, z, false)?;
    Ok((
        pipe.gamma.to_block([Variance::Up, Variance::Down, Variance::Down]),
        pipe.tu.to_block([Variance::Up, Variance::Down, Variance::Down]),
    ))
}

/// Everything the connection level provides, in one pass.
pub struct ConnectionData {
    pub g: TensorBlock,
    pub g_inv: TensorBlock,
    /// Cartan tensor T_ijk (all indices down)
    pub t: TensorBlock,
    pub spray: Vec<f64>,
    pub nonlinear: TensorBlock,
    pub berwald: TensorBlock,
    /// Γ*ⁱ_jk
    pub cartan_h: TensorBlock,
    /// Cⁱ_jk
    pub cartan_v: TensorBlock,
}

pub fn connection_data(metric: &FinslerMetric, z: &SupportElement) -> Result<ConnectionData> {
    let pipe = pipe_f64(metric, z, true)?;
    Ok(ConnectionData {
        g: pipe.g.to_block([Variance::Down, Variance::Down]),
        g_inv: pipe.ginv.to_block([Variance::Up, Variance::Up]),
        t: pipe.t.to_block([Variance::Down, Variance::Down, Variance::Down]),
        spray: pipe.spray.clone(),
        nonlinear: pipe.gj.to_block([Variance::Up, Variance::Down]),
        berwald: pipe
            .gjk
            .as_ref()
            .expect("berwald requested")
            .to_block([Variance::Up, Variance::Down, Variance::Down]),
        cartan_h: pipe.gamma.to_block([Variance::Up, Variance::Down, Variance::Down]),
        cartan_v: pipe.tu.to_block([Variance::Up, Variance::Down, Variance::Down]),
    })
}

/// Residual of horizontal metric compatibility
/// δ_k g_ij − Γ*ˡ_ik g_lj − Γ*ˡ_jk g_il (≈ 0 for the Cartan connection).
pub fn metric_compatibility_residual(metric: &FinslerMetric, z: &SupportElement) -> Result<f64> {
    let dual = pipe_dual(metric, z, false)?;
    let n = dual.n;
    let gj = Arr2::from_fn(n, &0.0, |&[i, j]| dual.gj.at(&[i, j]).val);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut r = delta_of(dual.g.at(&[i, j]), &gj, k);
                for l in 0..n {
                    r -= dual.gamma.at(&[l, i, k]).val * dual.g.at(&[l, j]).val
                        + dual.gamma.at(&[l, j, k]).val * dual.g.at(&[i, l]).val;
                }
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::finite_difference_partial;
    use crate::metric::{make_metric, MetricSpec};
    use approx::assert_abs_diff_eq;

    fn z2(x: [f64; 2], v: [f64; 2]) -> SupportElement {
        SupportElement::new(x.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn euclidean_connection_is_trivial() {
        let m = make_metric(MetricSpec::Euclidean { dimension: 2 }).unwrap();
        let z = z2([0.3, -0.5], [0.8, 0.6]);
        let data = connection_data(&m, &z).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(data.g.get(&[i, j]), expect, epsilon = 1e-14);
            }
        }
        assert!(data.t.inf_norm() < 1e-14);
        assert!(data.spray.iter().all(|c| c.abs() < 1e-14));
        assert!(data.nonlinear.inf_norm() < 1e-14);
        assert!(data.berwald.inf_norm() < 1e-14);
        assert!(data.cartan_h.inf_norm() < 1e-14);
        assert!(data.cartan_v.inf_norm() < 1e-14);
    }

    #[test]
    fn quartic_spray_vanishes_without_x_dependence() {
        let m = make_metric(MetricSpec::MinkowskiQuartic {
            dimension: 2,
            epsilon: 1.0,
        })
        .unwrap();
        let z = z2([0.4, 0.2], [1.0, 0.7]);
        let spray = geodesic_spray(&m, &z).unwrap();
        assert!(spray.iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn randers_metric_tensor_matches_fd() {
        let m = make_metric(MetricSpec::Randers {
            dimension: 2,
            b: vec![0.1, 0.0],
        })
        .unwrap();
        let z = z2([0.0, 0.0], [1.0, 0.0]);
        let g = metric_tensor(&m, &z).unwrap();
        let field = m.f_squared_field();
        for i in 0..2 {
            for j in 0..2 {
                let fd = 0.5
                    * finite_difference_partial(&field, &z, &[], &[i, j], 1e-3).unwrap();
                assert!(
                    (g.get(&[i, j]) - fd).abs() < 1e-6,
                    "g[{i}{j}]={} fd={fd}",
                    g.get(&[i, j])
                );
            }
        }
    }

    #[test]
    fn quartic_cartan_tensor_matches_fd_dot_g() {
        let m = make_metric(MetricSpec::MinkowskiQuartic {
            dimension: 2,
            epsilon: 1.0,
        })
        .unwrap();
        let z = z2([0.0, 0.0], [1.0, 1.0]);
        let t = cartan_tensor(&m, &z).unwrap();
        let field = m.f_squared_field();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let fd = 0.25
                        * finite_difference_partial(&field, &z, &[], &[i, j, k], 1e-3).unwrap();
                    assert!((t.get(&[i, j, k]) - fd).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn cartan_tensor_annihilates_v() {
        for spec in [
            MetricSpec::Randers {
                dimension: 2,
                b: vec![0.2, 0.1],
            },
            MetricSpec::MinkowskiQuartic {
                dimension: 3,
                epsilon: 1.0,
            },
            MetricSpec::FunkDisk { dimension: 2 },
        ] {
            let m = make_metric(spec).unwrap();
            let n = m.dim();
            let z = SupportElement::new(vec![0.1; n], {
                let mut v = vec![0.6; n];
                v[0] = 1.1;
                v
            })
            .unwrap();
            let t = cartan_tensor(&m, &z).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let c: f64 = (0..n).map(|k| t.get(&[i, j, k]) * z.v[k]).sum();
                    assert!(c.abs() < 1e-9, "T v-contraction {c}");
                }
            }
        }
    }

    #[test]
    fn euler_identity_for_nonlinear_connection() {
        // Gⁱ_j vʲ = 2Gⁱ (degree-2 homogeneity of the spray)
        for spec in [
            MetricSpec::RiemannianClosedForm {
                dimension: 2,
                radius: 1.0,
            },
            MetricSpec::FunkDisk { dimension: 2 },
        ] {
            let m = make_metric(spec).unwrap();
            let z = z2([0.3, 0.1], [0.9, -0.4]);
            let spray = geodesic_spray(&m, &z).unwrap();
            let gj = nonlinear_connection(&m, &z).unwrap();
            for i in 0..2 {
                let lhs: f64 = (0..2).map(|j| gj.get(&[i, j]) * z.v[j]).sum();
                assert_abs_diff_eq!(lhs, 2.0 * spray[i], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn spray_homogeneity() {
        let m = make_metric(MetricSpec::FunkDisk { dimension: 2 }).unwrap();
        let z = z2([0.2, -0.3], [0.7, 0.5]);
        let z2x = SupportElement::new(z.x.clone(), z.v.iter().map(|c| 2.0 * c).collect()).unwrap();
        let g1 = geodesic_spray(&m, &z).unwrap();
        let g2 = geodesic_spray(&m, &z2x).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(g2[i], 4.0 * g1[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn sphere_spray_matches_christoffel_oracle() {
        // Gⁱ = ½ γⁱ_jk(x) vʲ vᵏ for Riemannian metrics
        let m = make_metric(MetricSpec::RiemannianClosedForm {
            dimension: 2,
            radius: 1.0,
        })
        .unwrap();
        let z = z2([0.5, 0.0], [0.0, 1.0]);
        let spray = geodesic_spray(&m, &z).unwrap();
        let oracle = crate::oracles::RiemannOracle::try_new(&m).unwrap();
        let gamma = oracle.christoffel(&z.x);
        for i in 0..2 {
            let expect: f64 = (0..2)
                .flat_map(|j| (0..2).map(move |k| (j, k)))
                .map(|(j, k)| 0.5 * gamma.get(&[i, j, k]) * z.v[j] * z.v[k])
                .sum();
            assert_abs_diff_eq!(spray[i], expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn horizontal_frame_carries_minus_nonlinear_connection() {
        let m = make_metric(MetricSpec::FunkDisk { dimension: 2 }).unwrap();
        let z = z2([0.2, 0.1], [1.0, -0.3]);
        let gj = nonlinear_connection(&m, &z).unwrap();
        let frame = horizontal_frame(&m, &z).unwrap();
        for k in 0..2 {
            for j in 0..2 {
                assert_eq!(frame.vertical_part.get(&[k, j]), -gj.get(&[k, j]));
            }
        }
    }

    #[test]
    fn nonlinear_connection_matches_fd_of_spray() {
        let m = make_metric(MetricSpec::FunkDisk { dimension: 2 }).unwrap();
        let z = z2([0.2, 0.1], [1.0, -0.3]);
        let gj = nonlinear_connection(&m, &z).unwrap();
        let h = 1e-5;
        for j in 0..2 {
            let mut vp = z.v.clone();
            vp[j] += h;
            let mut vm = z.v.clone();
            vm[j] -= h;
            let gp = geodesic_spray(&m, &SupportElement::new(z.x.clone(), vp).unwrap()).unwrap();
            let gm = geodesic_spray(&m, &SupportElement::new(z.x.clone(), vm).unwrap()).unwrap();
            for i in 0..2 {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!((gj.get(&[i, j]) - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gamma_symmetric_and_compatible() {
        for spec in [
            MetricSpec::RiemannianClosedForm {
                dimension: 2,
                radius: 2.0,
            },
            MetricSpec::FunkDisk { dimension: 2 },
        ] {
            let m = make_metric(spec).unwrap();
            let z = z2([0.25, -0.1], [0.8, 0.55]);
            let (gamma, _) = cartan_coefficients(&m, &z).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        assert_eq!(gamma.get(&[i, j, k]), gamma.get(&[i, k, j]));
                    }
                }
            }
            let res = metric_compatibility_residual(&m, &z).unwrap();
            assert!(res < 1e-8, "compatibility residual {res}");
        }
    }

    #[test]
    fn nonlinear_connection_from_gamma_contraction() {
        // Γ*ⁱ_mj vᵐ = Gⁱ_j : both connections share the spray
        let m = make_metric(MetricSpec::FunkDisk { dimension: 2 }).unwrap();
        let z = z2([0.3, 0.2], [0.6, -0.9]);
        let (gamma, _) = cartan_coefficients(&m, &z).unwrap();
        let gj = nonlinear_connection(&m, &z).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let lhs: f64 = (0..2).map(|mm| gamma.get(&[i, mm, j]) * z.v[mm]).sum();
                assert_abs_diff_eq!(lhs, gj.get(&[i, j]), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn riemannian_reduction_g_independent_of_v() {
        let m = make_metric(MetricSpec::RiemannianClosedForm {
            dimension: 3,
            radius: 1.0,
        })
        .unwrap();
        let z1 = SupportElement::new(vec![0.2, 0.1, -0.3], vec![1.0, 0.0, 0.5]).unwrap();
        let z_alt = SupportElement::new(vec![0.2, 0.1, -0.3], vec![-0.4, 2.0, 1.1]).unwrap();
        let g1 = metric_tensor(&m, &z1).unwrap();
        let g2 = metric_tensor(&m, &z_alt).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(g1.get(&[i, j]), g2.get(&[i, j]), epsilon = 1e-10);
            }
        }
        let t = cartan_tensor(&m, &z1).unwrap();
        assert!(t.inf_norm() < 1e-12);
    }
}
