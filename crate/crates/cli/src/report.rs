//! Single-point report: tensors, curvature norms, flag samples, identity
//! residuals, and the nullity diagnostics at one support element.

use crate::doc::{CheckRow, Metadata, SCHEMA};
use finsler_core::curvature::{
    acted_slot_v_contraction, berwald_cartan_residual, bianchi_residual, curvature_bundle,
    flag_curvature_from_bundle, hh_trace_difference, metric_antisymmetry_residual,
    related_hh_from, FlagPipeline,
};
use finsler_core::connection::metric_compatibility_residual;
use finsler_core::nullity::{nullity_report, NullityReport, RANK_TOL_DEFAULT};
use finsler_core::sample::{rng_from_seed, sample_edge};
use finsler_core::{FinslerMetric, Result, SupportElement};
use serde::Serialize;

#[derive(Serialize)]
pub struct ReportDoc {
    pub schema: &'static str,
    pub command: &'static str,
    pub metadata: Metadata,
    pub point: PointSection,
    pub connection: ConnectionSection,
    pub curvature_norms: CurvatureNorms,
    pub flag_curvature: FlagSection,
    pub identities: Vec<CheckRow>,
    pub nullity: NullityReport,
}

#[derive(Serialize)]
pub struct PointSection {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub f: f64,
}

#[derive(Serialize)]
pub struct ConnectionSection {
    pub g: Vec<Vec<f64>>,
    pub cartan_tensor_norm: f64,
    pub spray: Vec<f64>,
    pub nonlinear_norm: f64,
    pub berwald_norm: f64,
    pub cartan_h_norm: f64,
}

#[derive(Serialize)]
pub struct CurvatureNorms {
    pub hh: f64,
    pub hv: f64,
    pub hv_symmetric: f64,
    pub hv_antisymmetric: f64,
    pub vv: f64,
    pub berwald_hh: f64,
    pub nonlinear: f64,
    pub related_hh: f64,
}

#[derive(Serialize)]
pub struct FlagSection {
    pub samples: usize,
    pub mean: f64,
    pub stddev: f64,
    pub berwald_pipeline_max_diff: f64,
}

pub fn build_report(
    metric: &FinslerMetric,
    z: &SupportElement,
    k: f64,
    seed: u64,
    threads: usize,
) -> Result<ReportDoc> {
    let bundle = curvature_bundle(metric, z)?;
    let n = metric.dim();
    let g: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| bundle.conn.g.get(&[i, j])).collect())
        .collect();

    // seeded flag samples (deterministic)
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::new();
    let mut max_diff: f64 = 0.0;
    for _ in 0..5 {
        let edge = sample_edge(z, &mut rng);
        let kc = flag_curvature_from_bundle(&bundle, &edge, FlagPipeline::Cartan)?;
        let kb = flag_curvature_from_bundle(&bundle, &edge, FlagPipeline::Berwald)?;
        max_diff = max_diff.max((kc - kb).abs());
        values.push(kc);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let stddev = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / values.len() as f64)
        .sqrt();

    let related = related_hh_from(&bundle.r, &bundle.conn.g, k);

    let r_scale = bundle.r.scale();
    let mut rng_edges = rng_from_seed(seed ^ 0x9e3779b97f4a7c15);
    let edges: Vec<Vec<f64>> = (0..8).map(|_| sample_edge(z, &mut rng_edges)).collect();
    let identities = vec![
        CheckRow::residual(
            "hh_flag_consistency",
            None,
            hh_trace_difference(&bundle.h, &bundle.r, &z.v, &edges) / r_scale,
            1e-6,
        ),
        CheckRow::residual(
            "sp_annihilates_v",
            None,
            acted_slot_v_contraction(&bundle.sp, &z.v) / bundle.p.scale(),
            1e-7,
        ),
        CheckRow::residual(
            "bianchi_first_horizontal",
            None,
            bianchi_residual(metric, z)? / r_scale,
            1e-5,
        ),
        CheckRow::residual(
            "metric_antisymmetry",
            None,
            metric_antisymmetry_residual(&bundle.r, &bundle.conn.g) / r_scale,
            1e-7,
        ),
        CheckRow::residual(
            "related_operator_antisymmetry",
            Some(k),
            metric_antisymmetry_residual(&related, &bundle.conn.g) / related.scale(),
            1e-7,
        ),
        CheckRow::residual(
            "berwald_cartan_relation",
            None,
            berwald_cartan_residual(&bundle),
            1e-7,
        ),
        CheckRow::residual(
            "metric_compatibility",
            None,
            metric_compatibility_residual(metric, z)?,
            1e-8,
        ),
    ];

    let nullity = nullity_report(metric, z, k, RANK_TOL_DEFAULT)?;

    Ok(ReportDoc {
        schema: SCHEMA,
        command: "report",
        metadata: Metadata {
            metric: metric.spec().clone(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            threads,
        },
        point: PointSection {
            x: z.x.clone(),
            v: z.v.clone(),
            f: metric.f(z)?,
        },
        connection: ConnectionSection {
            g,
            cartan_tensor_norm: bundle.conn.t.inf_norm(),
            spray: bundle.conn.spray.clone(),
            nonlinear_norm: bundle.conn.nonlinear.inf_norm(),
            berwald_norm: bundle.conn.berwald.inf_norm(),
            cartan_h_norm: bundle.conn.cartan_h.inf_norm(),
        },
        curvature_norms: CurvatureNorms {
            hh: bundle.r.inf_norm(),
            hv: bundle.p.inf_norm(),
            hv_symmetric: bundle.sp.inf_norm(),
            hv_antisymmetric: bundle.ap.inf_norm(),
            vv: bundle.q.inf_norm(),
            berwald_hh: bundle.h.inf_norm(),
            nonlinear: bundle.nonlinear_curv.inf_norm(),
            related_hh: related.inf_norm(),
        },
        flag_curvature: FlagSection {
            samples: values.len(),
            mean,
            stddev,
            berwald_pipeline_max_diff: max_diff,
        },
        identities,
        nullity,
    })
}
