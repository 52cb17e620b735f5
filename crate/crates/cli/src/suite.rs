//! The property battery: derivative cross-oracle, Riemannian reduction,
//! curvature identities, nullity coincidence, involutivity, hv-symmetry
//! agreement, leaf confinement, and the long-horizon extendability probe.

use crate::doc::{CheckRow, Metadata, Summary, SCHEMA};
use finsler_core::curvature::{
    acted_slot_v_contraction, bianchi_residual, curvature_bundle, hh_trace_difference,
    hv_commutator_oracle, metric_antisymmetry_residual, vv_commutator_oracle,
};
use finsler_core::geodesic::{extendability_probe, geodesic_confinement_check, integrate_geodesic};
use finsler_core::jet::{evaluate_jet, finite_difference_partial};
use finsler_core::metric::MetricSpec;
use finsler_core::nullity::{
    involutivity_check, kernel_coincidence_check, nullity_kernel_space, p_symmetry_check,
    GridSpec, RANK_TOL_DEFAULT,
};
use finsler_core::oracles::RiemannOracle;
use finsler_core::sample::{rng_from_seed, sample_edge, sample_support};
use finsler_core::{FinslerMetric, Result, SupportElement};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Serialize)]
pub struct SuiteDoc {
    pub schema: &'static str,
    pub command: &'static str,
    pub metadata: Metadata,
    pub k_values: Vec<f64>,
    pub checks: Vec<CheckRow>,
    pub summary: Summary,
}

pub struct SuiteOptions {
    pub k_values: Vec<f64>,
    pub seed: u64,
    pub grid_half_width: f64,
    pub grid_points: usize,
    pub threads: usize,
    pub samples: usize,
}

fn safe_base_point(metric: &FinslerMetric) -> Vec<f64> {
    let n = metric.dim();
    match metric.spec() {
        MetricSpec::RiemannianClosedForm { .. } => {
            let mut x = vec![0.0; n];
            x[0] = 0.5;
            x
        }
        MetricSpec::FunkDisk { .. } => {
            let mut x = vec![0.0; n];
            x[0] = 0.2;
            x[1] = -0.1;
            x
        }
        _ => (0..n).map(|i| 0.15 * ((i + 1) as f64).sin()).collect(),
    }
}

fn probe_v(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.6 + 0.35 * ((2 * i + 1) as f64).cos())
        .collect()
}

/// A start direction whose geodesic stays inside a bounded chart region for
/// every complete family (for the sphere this is a great circle confined to
/// |x| <= 2; flat directions are straight lines).
fn safe_leaf_start(
    metric: &FinslerMetric,
    x0: &[f64],
    k: f64,
) -> Result<Option<SupportElement>> {
    let n = metric.dim();
    let z_probe = SupportElement::new(x0.to_vec(), probe_v(n))?;
    let ker = nullity_kernel_space(metric, &z_probe, k, RANK_TOL_DEFAULT)?;
    if ker.dim() == 0 {
        return Ok(None);
    }
    if ker.dim() == n {
        // full-space leaf: pick the bounded coordinate-plane direction
        let mut v = vec![0.0; n];
        v[1] = 1.0;
        return Ok(Some(SupportElement::new(x0.to_vec(), v)?));
    }
    Ok(Some(SupportElement::new(
        x0.to_vec(),
        ker.vectors[0].clone(),
    )?))
}

const FD_CASES: [(&[usize], &[usize]); 12] = [
    (&[], &[0]),
    (&[0], &[]),
    (&[], &[0, 1]),
    (&[0], &[1]),
    (&[1], &[0]),
    (&[0, 1], &[]),
    (&[], &[0, 0, 1]),
    (&[], &[0, 1, 1]),
    (&[0], &[1, 1]),
    (&[1], &[0, 1]),
    (&[0, 0], &[1]),
    (&[1, 1], &[0]),
];

pub fn run_suite(metric: &FinslerMetric, opt: &SuiteOptions) -> Result<SuiteDoc> {
    let mut rng = rng_from_seed(opt.seed);
    let n = metric.dim();
    let samples: Vec<SupportElement> = (0..opt.samples)
        .map(|_| sample_support(metric, &mut rng))
        .collect();
    let edges: Vec<Vec<f64>> = samples
        .iter()
        .map(|z| sample_edge(z, &mut rng))
        .collect();
    let mut checks: Vec<CheckRow> = Vec::new();

    // derivative engine against the finite-difference oracle
    {
        let field = metric.f_squared_field();
        let worst = samples
            .par_iter()
            .map(|z| {
                let jv = evaluate_jet(&field, z, 2, 3)?;
                let mut w: f64 = 0.0;
                for (xs, vs) in FD_CASES {
                    let ad = jv.partial(xs, vs);
                    let fd = finite_difference_partial(&field, z, xs, vs, 1e-3)?;
                    w = w.max((ad - fd).abs() / (1.0 + ad.abs()));
                }
                Ok(w)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        checks.push(CheckRow::residual("jet_vs_finite_difference", None, worst, 1e-5));
    }

    // Riemannian reduction against the closed-form oracles
    if let Some(oracle) = RiemannOracle::try_new(metric) {
        let worst = samples
            .par_iter()
            .map(|z| {
                let b = curvature_bundle(metric, z)?;
                let mut w = b.p.inf_norm().max(b.q.inf_norm());
                let gamma = oracle.christoffel(&z.x);
                let riem = oracle.riemann(&z.x);
                let scale = riem.inf_norm().max(1.0);
                for i in 0..n {
                    for j in 0..n {
                        for kk in 0..n {
                            w = w.max(
                                (b.conn.cartan_h.get(&[i, j, kk]) - gamma.get(&[i, j, kk])).abs(),
                            );
                            for l in 0..n {
                                w = w.max(
                                    (b.r.get(&[i, j, kk, l]) - riem.get(&[i, j, kk, l])).abs()
                                        / scale,
                                );
                            }
                        }
                    }
                }
                Ok(w)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        checks.push(CheckRow::residual("riemannian_reduction", None, worst, 1e-7));
    } else {
        checks.push(CheckRow::skipped(
            "riemannian_reduction",
            None,
            "metric is not Riemannian",
        ));
    }

    // pointwise curvature identities
    let identity_rows: Vec<(f64, f64, f64, f64, f64)> = samples
        .par_iter()
        .zip(edges.par_iter())
        .map(|(z, edge)| {
            let b = curvature_bundle(metric, z)?;
            let r_scale = b.r.scale();
            let anti = metric_antisymmetry_residual(&b.r, &b.conn.g) / r_scale;
            let bianchi = bianchi_residual(metric, z)? / r_scale;
            let flag = hh_trace_difference(&b.h, &b.r, &z.v, std::slice::from_ref(edge))
                / b.r.inf_norm().max(1.0);
            let spv = acted_slot_v_contraction(&b.sp, &z.v) / b.p.scale();
            let p_oracle = hv_commutator_oracle(metric, z)?;
            let q_oracle = vv_commutator_oracle(metric, z)?;
            let mut comm: f64 = 0.0;
            for idx in 0..b.p.data.len() {
                comm = comm.max((b.p.data[idx] - p_oracle.data[idx]).abs() / b.p.scale());
                comm = comm.max((b.q.data[idx] - q_oracle.data[idx]).abs() / b.q.scale());
            }
            Ok((anti, bianchi, flag, spv, comm))
        })
        .collect::<Result<Vec<_>>>()?;
    let fold = |pick: fn(&(f64, f64, f64, f64, f64)) -> f64| {
        identity_rows.iter().map(pick).fold(0.0f64, f64::max)
    };
    checks.push(CheckRow::residual(
        "metric_antisymmetry",
        None,
        fold(|r| r.0),
        1e-7,
    ));
    checks.push(CheckRow::residual(
        "bianchi_first_horizontal",
        None,
        fold(|r| r.1),
        1e-5,
    ));
    checks.push(CheckRow::residual(
        "hh_flag_consistency",
        None,
        fold(|r| r.2),
        1e-6,
    ));
    checks.push(CheckRow::residual(
        "sp_annihilates_v",
        None,
        fold(|r| r.3),
        1e-7,
    ));
    checks.push(CheckRow::residual(
        "commutator_consistency",
        None,
        fold(|r| r.4),
        1e-6,
    ));

    // hv-symmetry criterion agreement
    {
        let agree = samples
            .par_iter()
            .map(|z| p_symmetry_check(metric, z, 1e-7).map(|r| r.consistent))
            .collect::<Result<Vec<bool>>>()?;
        let pass = agree.iter().all(|&b| b);
        checks.push(CheckRow::boolean(
            "hv_symmetry_agreement",
            None,
            pass,
            (!pass).then(|| "P-symmetry and nabla0 Q booleans disagree".to_string()),
        ));
    }

    let x0 = safe_base_point(metric);
    for &k in &opt.k_values {
        // kernel coincidence at this k
        let rows = samples
            .par_iter()
            .map(|z| match kernel_coincidence_check(metric, z, k, RANK_TOL_DEFAULT, 1e-6) {
                Ok(rep) => Ok(Some(rep.pass)),
                Err(finsler_core::FinslerError::RankAmbiguous { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<Option<bool>>>>()?;
        let decided: Vec<bool> = rows.iter().flatten().copied().collect();
        if decided.is_empty() {
            checks.push(CheckRow::skipped(
                "kernel_coincidence",
                Some(k),
                "all rank decisions were ambiguous",
            ));
        } else {
            let pass = decided.iter().all(|&b| b);
            checks.push(CheckRow::boolean(
                "kernel_coincidence",
                Some(k),
                pass,
                Some(format!("{} of {} points decided", decided.len(), rows.len())),
            ));
        }

        // involutivity over the configured grid
        let grid = GridSpec {
            center: x0.clone(),
            axes: (0, 1),
            half_width: opt.grid_half_width,
            points: opt.grid_points,
            probe_v: probe_v(n),
        };
        match involutivity_check(metric, &grid, k, 1e-4, RANK_TOL_DEFAULT) {
            Ok(rep) => {
                if rep.mu == 0 {
                    checks.push(CheckRow::skipped(
                        "involutivity",
                        Some(k),
                        "nullity distribution is trivial (mu = 0)",
                    ));
                } else {
                    let mut row =
                        CheckRow::residual("involutivity", Some(k), rep.max_residual, 1e-4);
                    row.details = Some(format!("mu = {}, grid points {}", rep.mu, rep.grid_points));
                    checks.push(row);
                }
            }
            Err(e) => {
                checks.push(CheckRow::boolean(
                    "involutivity",
                    Some(k),
                    false,
                    Some(e.to_string()),
                ));
            }
        }

        // leaf confinement and extendability
        match safe_leaf_start(metric, &x0, k)? {
            None => {
                checks.push(CheckRow::skipped(
                    "leaf_confinement",
                    Some(k),
                    "nullity distribution is trivial (mu = 0)",
                ));
                checks.push(CheckRow::skipped(
                    "extendability",
                    Some(k),
                    "nullity distribution is trivial (mu = 0)",
                ));
            }
            Some(z0) => {
                let rep = geodesic_confinement_check(metric, &z0, k, 20.0, false)?;
                let mut row =
                    CheckRow::residual("leaf_confinement", Some(k), rep.max_deviation, 1e-5);
                row.details = Some(format!("mu = {}", rep.mu));
                checks.push(row);
                if metric.is_complete() {
                    let probe = extendability_probe(metric, &z0, k, 100.0)?;
                    checks.push(CheckRow::boolean(
                        "extendability",
                        Some(k),
                        probe.pass,
                        Some(format!(
                            "t = {:.1}, drift {:.2e}, confinement {:.2e}",
                            probe.t_reached, probe.energy_drift, probe.max_confinement
                        )),
                    ));
                } else {
                    checks.push(CheckRow::skipped(
                        "extendability",
                        Some(k),
                        "metric not declared complete",
                    ));
                }
            }
        }
    }

    // energy conservation along a generic geodesic
    {
        let z0 = SupportElement::new(x0.clone(), probe_v(n))?;
        let traj = integrate_geodesic(metric, &z0, 10.0, 1e-9)?;
        checks.push(CheckRow::residual(
            "energy_conservation",
            None,
            traj.energy_drift(),
            1e-7,
        ));
    }

    let summary = Summary::of(&checks);
    Ok(SuiteDoc {
        schema: SCHEMA,
        command: "suite",
        metadata: Metadata {
            metric: metric.spec().clone(),
            version: env!("CARGO_PKG_VERSION"),
            seed: opt.seed,
            threads: opt.threads,
        },
        k_values: opt.k_values.clone(),
        checks,
        summary,
    })
}
