//! k-nullity subspaces of the related curvature operator Ω̄ and the checks
//! built on them: argument-space/kernel coincidence, constancy and
//! involutivity of the nullity distribution, the hv-curvature symmetry
//! criterion, and intra-leaf flag curvature.
//!
//! Rank decisions use a relative singular-value cut with a mandatory
//! gap-ratio diagnostic; ambiguous ranks are surfaced, never guessed.

use crate::curvature::{
    curvature_bundle, flag_curvature_from_bundle, nabla0_q_norm, related_hh_point, FlagPipeline,
};
use crate::error::{FinslerError, Result};
use crate::jet::SupportElement;
use crate::metric::FinslerMetric;
use crate::tensor::TensorBlock;
use nalgebra::DMatrix;
use serde::Serialize;

/// Default relative singular-value threshold for rank decisions.
pub const RANK_TOL_DEFAULT: f64 = 1e-8;
/// Gap ratio below which a rank decision is reported as ambiguous.
pub const GAP_REQUIRED: f64 = 1e3;

/// A numerically determined subspace with its rank diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct SubspaceBasis {
    /// g-orthonormal basis vectors (possibly empty)
    pub vectors: Vec<Vec<f64>>,
    /// singular values of the stacked system, descending
    pub singular_values: Vec<f64>,
    /// (smallest kept σ)/(largest dropped σ); `None` means no σ was kept
    /// (the operator is numerically zero — an unambiguous full kernel)
    pub gap_ratio: Option<f64>,
    /// true when the kept/dropped separation is below [`GAP_REQUIRED`]
    pub ambiguous: bool,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn gap_exceeds(&self, required: f64) -> bool {
        self.gap_ratio.map_or(true, |g| g > required)
    }
}

fn g_matrix(g: &TensorBlock) -> DMatrix<f64> {
    DMatrix::from_fn(g.dim, g.dim, |i, j| g.get(&[i, j]))
}

fn g_inner(g: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = g.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += g[(i, j)] * a[i] * b[j];
        }
    }
    acc
}

/// Modified Gram-Schmidt in the g inner product.
fn g_orthonormalize(g: &DMatrix<f64>, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for b in &out {
            let c = g_inner(g, &w, b);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
        let norm = g_inner(g, &w, &w).sqrt();
        if norm < 1e-9 {
            return Err(FinslerError::Precondition(
                "frame degeneracy: projected reference vectors are nearly dependent".into(),
            ));
        }
        for wi in w.iter_mut() {
            *wi /= norm;
        }
        out.push(w);
    }
    Ok(out)
}

/// Null space of an m×n stacked system at the given relative tolerance.
fn null_space(
    m: &DMatrix<f64>,
    g: &DMatrix<f64>,
    rank_tol: f64,
    op_scale: f64,
) -> Result<SubspaceBasis> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let svals: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = svals.first().copied().unwrap_or(0.0);
    let threshold = (rank_tol * smax).max(1e-10 * op_scale);
    let rank = svals.iter().filter(|&&s| s >= threshold).count();

    let mut vectors = Vec::with_capacity(n - rank);
    for &oi in order.iter().skip(rank) {
        vectors.push((0..n).map(|c| v_t[(oi, c)]).collect::<Vec<f64>>());
    }
    let gap_ratio = if rank == 0 {
        None
    } else if rank == n {
        Some(svals[rank - 1] / threshold)
    } else {
        Some(svals[rank - 1] / svals[rank].max(f64::MIN_POSITIVE))
    };
    let ambiguous = gap_ratio.map_or(false, |gr| gr < GAP_REQUIRED);
    let vectors = g_orthonormalize(g, &vectors)?;
    Ok(SubspaceBasis {
        vectors,
        singular_values: svals,
        gap_ratio,
        ambiguous,
    })
}

fn operator_scale(hh: &TensorBlock) -> f64 {
    hh.inf_norm().max(1.0)
}

/// Basis of {X : Ω̄(X, ·)· = 0} — X ranges over the first argument slot.
pub fn nullity_argument_space(
    metric: &FinslerMetric,
    z: &SupportElement,
    k: f64,
    rank_tol: f64,
) -> Result<SubspaceBasis> {
    let (hh, g) = related_hh_point(metric, z, k)?;
    let n = hh.dim;
    let mut m = DMatrix::zeros(n * n * n, n);
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                for kk in 0..n {
                    m[((i * n + j) * n + l, kk)] = hh.get(&[i, j, kk, l]);
                }
            }
        }
    }
    null_space(&m, &g_matrix(&g), rank_tol, operator_scale(&hh))
}

/// Basis of {Z : Ω̄(·,·)Z = 0} — Z ranges over the acted-on slot.
pub fn nullity_kernel_space(
    metric: &FinslerMetric,
    z: &SupportElement,
    k: f64,
    rank_tol: f64,
) -> Result<SubspaceBasis> {
    let (hh, g) = related_hh_point(metric, z, k)?;
    let n = hh.dim;
    let mut m = DMatrix::zeros(n * n * n, n);
    for i in 0..n {
        for a in 0..n {
            for b in 0..n {
                for jj in 0..n {
                    m[((i * n + a) * n + b, jj)] = hh.get(&[i, jj, a, b]);
                }
            }
        }
    }
    null_space(&m, &g_matrix(&g), rank_tol, operator_scale(&hh))
}

/// Largest principal angle between two subspaces, measured in g.
/// Requires equal dimensions; two empty subspaces have angle 0.
pub fn principal_angle(g: &TensorBlock, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FinslerError::Precondition(format!(
            "subspace dimensions differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let gm = g_matrix(g);
    let p = a.len();
    let mut m = DMatrix::zeros(p, p);
    for (r, av) in a.iter().enumerate() {
        for (c, bv) in b.iter().enumerate() {
            m[(r, c)] = g_inner(&gm, av, bv);
        }
    }
    let svd = m.svd(false, false);
    let min_sigma = svd
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s));
    Ok(min_sigma.clamp(-1.0, 1.0).acos())
}

/// Full per-point nullity diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct NullityReport {
    pub k: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub mu: usize,
    pub basis_arg: Vec<Vec<f64>>,
    pub basis_ker: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub gap_ratio: Option<f64>,
    pub ambiguous: bool,
    /// largest principal angle between the two spaces (radians); `None`
    /// when their dimensions disagree
    pub coincidence_angle: Option<f64>,
}

pub fn nullity_report(
    metric: &FinslerMetric,
    z: &SupportElement,
    k: f64,
    rank_tol: f64,
) -> Result<NullityReport> {
    let arg = nullity_argument_space(metric, z, k, rank_tol)?;
    let ker = nullity_kernel_space(metric, z, k, rank_tol)?;
    let (_, g) = related_hh_point(metric, z, k)?;
    let angle = if arg.dim() == ker.dim() {
        Some(principal_angle(&g, &arg.vectors, &ker.vectors)?)
    } else {
        None
    };
    Ok(NullityReport {
        k,
        x: z.x.clone(),
        v: z.v.clone(),
        mu: ker.dim(),
        basis_arg: arg.vectors,
        basis_ker: ker.vectors,
        singular_values: ker.singular_values,
        gap_ratio: ker.gap_ratio,
        ambiguous: arg.ambiguous || ker.ambiguous,
        coincidence_angle: angle,
    })
}

/// Outcome of the argument-space/kernel coincidence check at one (z, k).
#[derive(Clone, Debug, Serialize)]
pub struct CoincidenceReport {
    pub dim_arg: usize,
    pub dim_ker: usize,
    pub angle: Option<f64>,
    pub gap_arg: Option<f64>,
    pub gap_ker: Option<f64>,
    pub pass: bool,
}

/// Checks that the argument space and the kernel of Ω̄ coincide
/// (equal dimension, largest principal angle < `angle_tol`).
pub fn kernel_coincidence_check(
    metric: &FinslerMetric,
    z: &SupportElement,
    k: f64,
    rank_tol: f64,
    angle_tol: f64,
) -> Result<CoincidenceReport> {
    let arg = nullity_argument_space(metric, z, k, rank_tol)?;
    let ker = nullity_kernel_space(metric, z, k, rank_tol)?;
    if arg.ambiguous || ker.ambiguous {
        return Err(FinslerError::RankAmbiguous {
            gap_ratio: arg
                .gap_ratio
                .unwrap_or(f64::INFINITY)
                .min(ker.gap_ratio.unwrap_or(f64::INFINITY)),
            required: GAP_REQUIRED,
        });
    }
    let (_, g) = related_hh_point(metric, z, k)?;
    let (angle, pass) = if arg.dim() == ker.dim() {
        let a = principal_angle(&g, &arg.vectors, &ker.vectors)?;
        (Some(a), a < angle_tol)
    } else {
        (None, false)
    };
    Ok(CoincidenceReport {
        dim_arg: arg.dim(),
        dim_ker: ker.dim(),
        angle,
        gap_arg: arg.gap_ratio,
        gap_ker: ker.gap_ratio,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexReport {
    pub mu: usize,
    pub consistent: bool,
    /// per-v kernel dimension and principal angle against the first sample
    pub per_v: Vec<(usize, f64)>,
}

/// Computes the kernel for each tangent sample at a fixed base point and
/// reports whether dimension and span agree across them.
pub fn nullity_index(
    metric: &FinslerMetric,
    x: &[f64],
    k: f64,
    v_samples: &[Vec<f64>],
    rank_tol: f64,
) -> Result<IndexReport> {
    if v_samples.is_empty() {
        return Err(FinslerError::EmptySamples);
    }
    let mut per_v = Vec::with_capacity(v_samples.len());
    let mut first: Option<(SubspaceBasis, TensorBlock)> = None;
    let mut consistent = true;
    for v in v_samples {
        let z = SupportElement::new(x.to_vec(), v.clone())?;
        let ker = nullity_kernel_space(metric, &z, k, rank_tol)?;
        let (_, g) = related_hh_point(metric, &z, k)?;
        match &first {
            None => {
                per_v.push((ker.dim(), 0.0));
                first = Some((ker, g));
            }
            Some((f, g0)) => {
                if ker.dim() != f.dim() {
                    consistent = false;
                    per_v.push((ker.dim(), f64::NAN));
                } else {
                    let angle = principal_angle(g0, &f.vectors, &ker.vectors)?;
                    if angle > 1e-6 {
                        consistent = false;
                    }
                    per_v.push((ker.dim(), angle));
                }
            }
        }
    }
    Ok(IndexReport {
        mu: first.expect("nonempty samples").0.dim(),
        consistent,
        per_v,
    })
}

/// Rectangular sample grid in two base coordinates for the involutivity
/// check; the remaining coordinates stay at `center`.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub center: Vec<f64>,
    pub axes: (usize, usize),
    pub half_width: f64,
    pub points: usize,
    /// tangent probe defining the support element at each grid x
    pub probe_v: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvolutivityReport {
    pub mu: usize,
    pub max_residual: f64,
    pub grid_points: usize,
}

/// Builds smooth nullity frame fields by projecting fixed reference vectors
/// onto the nullity space, computes their Lie brackets by central
/// differences in x, and returns the largest relative component of a
/// bracket outside the distribution.
pub fn involutivity_check(
    metric: &FinslerMetric,
    region: &GridSpec,
    k: f64,
    fd_step: f64,
    rank_tol: f64,
) -> Result<InvolutivityReport> {
    let n = metric.dim();
    let z_center = SupportElement::new(region.center.clone(), region.probe_v.clone())?;
    let center_basis = nullity_kernel_space(metric, &z_center, k, rank_tol)?;
    let mu = center_basis.dim();
    if mu == 0 {
        return Ok(InvolutivityReport {
            mu: 0,
            max_residual: 0.0,
            grid_points: 0,
        });
    }
    let (_, g_center) = related_hh_point(metric, &z_center, k)?;
    let gm_center = g_matrix(&g_center);

    // fixed reference vectors: the μ canonical directions with the largest
    // g-norm of their projection onto the nullity space at the center
    let mut ranked: Vec<(usize, f64)> = (0..n)
        .map(|i| {
            let e: Vec<f64> = (0..n).map(|c| if c == i { 1.0 } else { 0.0 }).collect();
            let p = project(&gm_center, &center_basis.vectors, &e);
            (i, g_inner(&gm_center, &p, &p))
        })
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let refs: Vec<usize> = ranked.iter().take(mu).map(|&(i, _)| i).collect();

    // nullity frame at x: project the references, then Gram-Schmidt
    let frame_at = |x: &[f64]| -> Result<Vec<Vec<f64>>> {
        let z = SupportElement::new(x.to_vec(), region.probe_v.clone())?;
        let basis = nullity_kernel_space(metric, &z, k, rank_tol)?;
        if basis.dim() != mu {
            return Err(FinslerError::Precondition(format!(
                "nullity index is not constant on the region: {} at the center, {} at {:?}",
                mu,
                basis.dim(),
                x
            )));
        }
        let (_, g) = related_hh_point(metric, &z, k)?;
        let gm = g_matrix(&g);
        let projected: Vec<Vec<f64>> = refs
            .iter()
            .map(|&i| {
                let e: Vec<f64> = (0..n).map(|c| if c == i { 1.0 } else { 0.0 }).collect();
                project(&gm, &basis.vectors, &e)
            })
            .collect();
        g_orthonormalize(&gm, &projected)
    };

    let mut max_residual: f64 = 0.0;
    let pts = region.points;
    let mut grid_points = 0;
    for gi in 0..pts {
        for gj in 0..pts {
            let mut x = region.center.clone();
            let frac = |idx: usize| {
                if pts == 1 {
                    0.0
                } else {
                    -1.0 + 2.0 * idx as f64 / (pts - 1) as f64
                }
            };
            x[region.axes.0] += region.half_width * frac(gi);
            x[region.axes.1] += region.half_width * frac(gj);
            grid_points += 1;

            let frame = frame_at(&x)?;
            // ∂_j of every frame field by central differences
            let mut dframe = vec![vec![vec![0.0; n]; mu]; n];
            for j in 0..n {
                let mut xp = x.clone();
                xp[j] += fd_step;
                let mut xm = x.clone();
                xm[j] -= fd_step;
                let fp = frame_at(&xp)?;
                let fm = frame_at(&xm)?;
                for a in 0..mu {
                    for i in 0..n {
                        dframe[j][a][i] = (fp[a][i] - fm[a][i]) / (2.0 * fd_step);
                    }
                }
            }
            let z = SupportElement::new(x.clone(), region.probe_v.clone())?;
            let basis = nullity_kernel_space(metric, &z, k, rank_tol)?;
            let (_, g) = related_hh_point(metric, &z, k)?;
            let gm = g_matrix(&g);
            for a in 0..mu {
                for b in (a + 1)..mu {
                    let mut bracket = vec![0.0; n];
                    for i in 0..n {
                        for j in 0..n {
                            bracket[i] +=
                                frame[a][j] * dframe[j][b][i] - frame[b][j] * dframe[j][a][i];
                        }
                    }
                    let tangential = project(&gm, &basis.vectors, &bracket);
                    let orth: Vec<f64> = bracket
                        .iter()
                        .zip(&tangential)
                        .map(|(w, t)| w - t)
                        .collect();
                    let wn = g_inner(&gm, &bracket, &bracket).sqrt();
                    let on = g_inner(&gm, &orth, &orth).sqrt();
                    let residual = if wn < 1e-14 { 0.0 } else { on / wn };
                    max_residual = max_residual.max(residual);
                }
            }
        }
    }
    Ok(InvolutivityReport {
        mu,
        max_residual,
        grid_points,
    })
}

fn project(g: &DMatrix<f64>, basis: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut out = vec![0.0; n];
    for b in basis {
        let c = g_inner(g, u, b);
        for i in 0..n {
            out[i] += c * b[i];
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PSymmetryReport {
    pub p_symmetric: bool,
    pub nabla0_q_zero: bool,
    pub p_residual: f64,
    pub q_residual: f64,
    pub scale: f64,
    /// the two booleans must agree (hv-symmetry criterion)
    pub consistent: bool,
}

/// Tests P(X,Y) = P(Y,X) (swap of the two argument slots) against the
/// equivalent criterion ∇₀Q = 0; both residuals are computed independently.
pub fn p_symmetry_check(
    metric: &FinslerMetric,
    z: &SupportElement,
    tol: f64,
) -> Result<PSymmetryReport> {
    let bundle = curvature_bundle(metric, z)?;
    let n = bundle.p.dim;
    let mut p_residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for a in 0..n {
                for b in 0..n {
                    p_residual = p_residual
                        .max((bundle.p.get(&[i, j, a, b]) - bundle.p.get(&[i, j, b, a])).abs());
                }
            }
        }
    }
    let q_residual = nabla0_q_norm(metric, z)?;
    let scale = bundle.p.inf_norm().max(bundle.q.inf_norm()).max(1.0);
    let p_symmetric = p_residual < tol * scale;
    let nabla0_q_zero = q_residual < tol * scale;
    Ok(PSymmetryReport {
        p_symmetric,
        nabla0_q_zero,
        p_residual,
        q_residual,
        scale,
        consistent: p_symmetric == nabla0_q_zero,
    })
}

/// Outcome of the intra-leaf flag curvature check.
#[derive(Clone, Debug, Serialize)]
pub enum LeafFlagResult {
    /// μ_k < 2: no flag fits inside the leaf
    NotApplicable { mu: usize },
    Curvature { value: f64, deviation_from_k: f64 },
}

/// Flag curvature of a flag lying inside the nullity leaf: v is the support
/// direction (must be a nullity vector), `edge` is projected onto the
/// nullity space.
pub fn leaf_flag_curvature_check(
    metric: &FinslerMetric,
    z: &SupportElement,
    k: f64,
    edge: &[f64],
    rank_tol: f64,
) -> Result<LeafFlagResult> {
    let ker = nullity_kernel_space(metric, z, k, rank_tol)?;
    let mu = ker.dim();
    if mu < 2 {
        return Ok(LeafFlagResult::NotApplicable { mu });
    }
    let (_, g) = related_hh_point(metric, z, k)?;
    let gm = g_matrix(&g);
    let v_proj = project(&gm, &ker.vectors, &z.v);
    let v_err: f64 = v_proj
        .iter()
        .zip(&z.v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let v_norm = z.v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if v_err > 1e-8 * v_norm.max(1.0) {
        return Err(FinslerError::Precondition(
            "support direction v is not a nullity vector".into(),
        ));
    }
    let edge_proj = project(&gm, &ker.vectors, edge);
    let bundle = curvature_bundle(metric, z)?;
    let value = flag_curvature_from_bundle(&bundle, &edge_proj, FlagPipeline::Cartan)?;
    Ok(LeafFlagResult::Curvature {
        value,
        deviation_from_k: (value - k).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{make_metric, FactorSpec, MetricSpec};

    fn product_s2_r(extra_flat: usize) -> FinslerMetric {
        make_metric(MetricSpec::Product {
            dimension: 2 + extra_flat,
            factors: vec![
                FactorSpec::RiemannianClosedForm {
                    dimension: 2,
                    radius: 1.0,
                },
                FactorSpec::Euclidean {
                    dimension: extra_flat,
                },
            ],
        })
        .unwrap()
    }

    #[test]
    fn euclidean_nullity_is_everything_at_zero_and_empty_above() {
        let m = make_metric(MetricSpec::Euclidean { dimension: 3 }).unwrap();
        let z = SupportElement::new(vec![0.1, 0.2, -0.3], vec![1.0, 0.4, 0.2]).unwrap();
        let full = nullity_argument_space(&m, &z, 0.0, RANK_TOL_DEFAULT).unwrap();
        assert_eq!(full.dim(), 3);
        assert!(full.gap_ratio.is_none());
        let none = nullity_argument_space(&m, &z, 1.0, RANK_TOL_DEFAULT).unwrap();
        assert_eq!(none.dim(), 0);
        assert!(!none.ambiguous);
        let ker = nullity_kernel_space(&m, &z, 0.0, RANK_TOL_DEFAULT).unwrap();
        assert_eq!(ker.dim(), 3);
    }

    #[test]
    fn product_nullity_is_the_flat_factor() {
        let m = product_s2_r(1);
        let z = SupportElement::new(vec![0.2, -0.1, 5.0], vec![0.4, 0.7, 0.9]).unwrap();
        let rep = nullity_report(&m, &z, 0.0, RANK_TOL_DEFAULT).unwrap();
        assert_eq!(rep.mu, 1);
        assert!(rep.gap_ratio.map_or(true, |g| g > 1e6), "gap {:?}", rep.gap_ratio);
        assert!(rep.coincidence_angle.unwrap() < 1e-8);
        // the basis vector points along the flat coordinate
        let b = &rep.basis_ker[0];
        assert!(b[0].abs() < 1e-8 && b[1].abs() < 1e-8 && b[2].abs() > 0.5);
        // g-orthonormality
        let (_, g) = related_hh_point(&m, &z, 0.0).unwrap();
        let gm = g_matrix(&g);
        assert!((g_inner(&gm, b, b) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_full_nullity_at_its_own_curvature() {
        let m = make_metric(MetricSpec::RiemannianClosedForm {
            dimension: 3,
            radius: 1.0,
        })
        .unwrap();
        let z = SupportElement::new(vec![0.3, 0.1, -0.2], vec![0.5, -0.8, 0.3]).unwrap();
        let ker1 = nullity_kernel_space(&m, &z, 1.0, RANK_TOL_DEFAULT).unwrap();
        assert_eq!(ker1.dim(), 3);
        let ker2 = nullity_kernel_space(&m, &z, 2.0, RANK_TOL_DEFAULT).unwrap();
        assert_eq!(ker2.dim(), 0);
        let rep = kernel_coincidence_check(&m, &z, 1.0, RANK_TOL_DEFAULT, 1e-6).unwrap();
        assert!(rep.pass);
        // returned bases are orthonormal in g (not in the coordinate metric)
        let (_, g) = related_hh_point(&m, &z, 1.0).unwrap();
        let gm = g_matrix(&g);
        for (a, va) in ker1.vectors.iter().enumerate() {
            for (b, vb) in ker1.vectors.iter().enumerate() {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((g_inner(&gm, va, vb) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn index_consistency_across_tangent_samples() {
        let m = product_s2_r(1);
        let x = vec![0.15, -0.2, 2.0];
        let vs: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = 0.7 * i as f64 + 0.3;
                vec![t.sin() + 1.2, t.cos(), 0.4 * t.sin() - 0.9]
            })
            .collect();
        let rep = nullity_index(&m, &x, 0.0, &vs, RANK_TOL_DEFAULT).unwrap();
        assert_eq!(rep.mu, 1);
        assert!(rep.consistent);
    }

    #[test]
    fn euclidean_index_at_positive_k_is_zero() {
        let m = make_metric(MetricSpec::Euclidean { dimension: 2 }).unwrap();
        let rep = nullity_index(
            &m,
            &[0.0, 0.0],
            1.0,
            &[vec![1.0, 0.0], vec![0.3, 0.8]],
            RANK_TOL_DEFAULT,
        )
        .unwrap();
        assert_eq!(rep.mu, 0);
        assert!(rep.consistent);
    }

    #[test]
    fn involutivity_product_two_flat_directions() {
        let m = product_s2_r(2);
        let grid = GridSpec {
            center: vec![0.1, -0.05, 0.0, 0.0],
            axes: (0, 1),
            half_width: 0.2,
            points: 3,
            probe_v: vec![0.4, 0.6, 0.8, 0.3],
        };
        let rep = involutivity_check(&m, &grid, 0.0, 1e-4, RANK_TOL_DEFAULT).unwrap();
        assert_eq!(rep.mu, 2);
        assert!(rep.max_residual < 1e-4, "residual {}", rep.max_residual);
    }

    #[test]
    fn involutivity_of_a_line_distribution() {
        // one flat direction: no bracket pairs, residual vanishes
        let m = product_s2_r(1);
        let grid = GridSpec {
            center: vec![0.1, -0.05, 0.0],
            axes: (0, 1),
            half_width: 0.2,
            points: 3,
            probe_v: vec![0.4, 0.6, 0.8],
        };
        let rep = involutivity_check(&m, &grid, 0.0, 1e-4, RANK_TOL_DEFAULT).unwrap();
        assert_eq!(rep.mu, 1);
        assert!(rep.max_residual < 1e-4);
    }

    #[test]
    fn involutivity_trivial_for_full_distribution() {
        let m = make_metric(MetricSpec::Euclidean { dimension: 2 }).unwrap();
        let grid = GridSpec {
            center: vec![0.0, 0.0],
            axes: (0, 1),
            half_width: 0.3,
            points: 3,
            probe_v: vec![1.0, 0.2],
        };
        let rep = involutivity_check(&m, &grid, 0.0, 1e-4, RANK_TOL_DEFAULT).unwrap();
        assert_eq!(rep.mu, 2);
        assert!(rep.max_residual < 1e-9);
    }

    #[test]
    fn p_symmetry_booleans_agree_on_families() {
        for spec in [
            MetricSpec::RiemannianClosedForm {
                dimension: 2,
                radius: 1.0,
            },
            MetricSpec::MinkowskiQuartic {
                dimension: 3,
                epsilon: 1.0,
            },
            MetricSpec::FunkDisk { dimension: 2 },
        ] {
            let m = make_metric(spec).unwrap();
            let n = m.dim();
            let z = SupportElement::new(vec![0.2; n], {
                let mut v = vec![0.5; n];
                v[0] = 1.0;
                v
            })
            .unwrap();
            let rep = p_symmetry_check(&m, &z, 1e-7).unwrap();
            assert!(
                rep.consistent,
                "{:?}: P-symmetric={} but ∇₀Q-zero={} (residuals {:.3e}/{:.3e})",
                m.spec(),
                rep.p_symmetric,
                rep.nabla0_q_zero,
                rep.p_residual,
                rep.q_residual
            );
        }
    }

    #[test]
    fn leaf_flag_curvature_zero_on_flat_leaf() {
        let m = product_s2_r(2);
        // v in the flat factor
        let z = SupportElement::new(vec![0.1, 0.3, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.5]).unwrap();
        let edge = vec![0.0, 0.0, -0.3, 0.9];
        match leaf_flag_curvature_check(&m, &z, 0.0, &edge, RANK_TOL_DEFAULT).unwrap() {
            LeafFlagResult::Curvature {
                value,
                deviation_from_k,
            } => {
                assert!(value.abs() < 1e-8, "leaf flag {value}");
                assert!(deviation_from_k < 1e-8);
            }
            other => panic!("expected curvature, got {:?}", other),
        }
    }

    #[test]
    fn leaf_flag_not_applicable_when_leaf_is_a_line() {
        let m = product_s2_r(1);
        let z = SupportElement::new(vec![0.1, 0.3, 0.0], vec![0.0, 0.0, 1.0]).unwrap();
        match leaf_flag_curvature_check(&m, &z, 0.0, &[1.0, 0.0, 0.0], RANK_TOL_DEFAULT).unwrap() {
            LeafFlagResult::NotApplicable { mu } => assert_eq!(mu, 1),
            other => panic!("expected not-applicable, got {:?}", other),
        }
    }

    #[test]
    fn sphere_leaf_flag_curvature_equals_space_form_constant() {
        let m = make_metric(MetricSpec::RiemannianClosedForm {
            dimension: 3,
            radius: 1.0,
        })
        .unwrap();
        let z = SupportElement::new(vec![0.2, -0.1, 0.4], vec![0.9, 0.1, -0.5]).unwrap();
        match leaf_flag_curvature_check(&m, &z, 1.0, &[0.1, 1.0, 0.3], RANK_TOL_DEFAULT).unwrap() {
            LeafFlagResult::Curvature {
                value,
                deviation_from_k,
            } => {
                assert!(deviation_from_k < 1e-6, "K = {value}");
            }
            other => panic!("expected curvature, got {:?}", other),
        }
    }

    #[test]
    fn leaf_precondition_rejects_non_nullity_support() {
        let m = product_s2_r(2);
        // v has a sphere-factor component: not a nullity vector
        let z = SupportElement::new(vec![0.1, 0.3, 0.0, 0.0], vec![0.5, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            leaf_flag_curvature_check(&m, &z, 0.0, &[0.0, 0.0, 1.0, 0.0], RANK_TOL_DEFAULT),
            Err(FinslerError::Precondition(_))
        ));
    }
}
