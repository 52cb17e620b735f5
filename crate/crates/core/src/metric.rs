//! Built-in Finsler metric families, structure-condition validation, and the
//! metric specification file format.
//!
//! Families:
//! * `euclidean` — F = |v|;
//! * `riemannian_closed_form` — round sphere of radius r in stereographic
//!   coordinates, a_ij = 4r⁴ δ_ij / (r² + |x|²)²;
//! * `randers` — F = |v| + b·v with constant drift covector, ‖b‖ < 1;
//! * `minkowski_quartic` — F = (Σ vᵢ⁴ + ε Σ_{i<j} vᵢ²vⱼ²)^{1/4}, x-independent;
//! * `funk_disk` — F = (√((1−|x|²)|v|² + ⟨x,v⟩²) + ⟨x,v⟩) / (1−|x|²) on |x| < 1;
//! * `product` — block-diagonal Riemannian product of sphere/flat factors.

use crate::error::{FinslerError, Result};
use crate::jet::{evaluate_jet, Jet, ScalarField, SupportElement};
use crate::scalar::{Real, MAX_DIM};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

fn default_epsilon() -> f64 {
    1.0
}

/// One factor of a Riemannian product metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FactorSpec {
    Euclidean { dimension: usize },
    RiemannianClosedForm { dimension: usize, radius: f64 },
}

impl FactorSpec {
    pub fn dimension(&self) -> usize {
        match self {
            FactorSpec::Euclidean { dimension } => *dimension,
            FactorSpec::RiemannianClosedForm { dimension, .. } => *dimension,
        }
    }
}

/// Declarative description of a metric family plus its parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MetricSpec {
    Euclidean {
        dimension: usize,
    },
    RiemannianClosedForm {
        dimension: usize,
        radius: f64,
    },
    Randers {
        dimension: usize,
        b: Vec<f64>,
    },
    MinkowskiQuartic {
        dimension: usize,
        epsilon: f64,
    },
    FunkDisk {
        dimension: usize,
    },
    Product {
        dimension: usize,
        factors: Vec<FactorSpec>,
    },
}

impl MetricSpec {
    pub fn dimension(&self) -> usize {
        match self {
            MetricSpec::Euclidean { dimension }
            | MetricSpec::RiemannianClosedForm { dimension, .. }
            | MetricSpec::Randers { dimension, .. }
            | MetricSpec::MinkowskiQuartic { dimension, .. }
            | MetricSpec::FunkDisk { dimension }
            | MetricSpec::Product { dimension, .. } => *dimension,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            MetricSpec::Euclidean { .. } => "euclidean",
            MetricSpec::RiemannianClosedForm { .. } => "riemannian_closed_form",
            MetricSpec::Randers { .. } => "randers",
            MetricSpec::MinkowskiQuartic { .. } => "minkowski_quartic",
            MetricSpec::FunkDisk { .. } => "funk_disk",
            MetricSpec::Product { .. } => "product",
        }
    }
}

// Flat raw form used for parsing: `deny_unknown_fields` rejects anything not
// listed, and per-family validation rejects fields that do not belong.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    family: String,
    dimension: usize,
    #[serde(default)]
    radius: Option<f64>,
    #[serde(default)]
    b: Option<Vec<f64>>,
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    factors: Option<Vec<RawSpec>>,
}

impl RawSpec {
    fn reject_field(&self, family: &str, present: &[(&str, bool)]) -> Result<()> {
        for (name, is_present) in present {
            if *is_present {
                return Err(FinslerError::InvalidParameter {
                    field: (*name).to_string(),
                    message: format!("field `{name}` is not accepted by family `{family}`"),
                });
            }
        }
        Ok(())
    }

    fn into_spec(self) -> Result<MetricSpec> {
        let has = (
            self.radius.is_some(),
            self.b.is_some(),
            self.epsilon.is_some(),
            self.factors.is_some(),
        );
        match self.family.as_str() {
            "euclidean" => {
                self.reject_field(
                    "euclidean",
                    &[("radius", has.0), ("b", has.1), ("epsilon", has.2), ("factors", has.3)],
                )?;
                Ok(MetricSpec::Euclidean {
                    dimension: self.dimension,
                })
            }
            "riemannian_closed_form" => {
                self.reject_field(
                    "riemannian_closed_form",
                    &[("b", has.1), ("epsilon", has.2), ("factors", has.3)],
                )?;
                let radius = self.radius.ok_or_else(|| FinslerError::InvalidParameter {
                    field: "radius".into(),
                    message: "riemannian_closed_form requires a sphere radius".into(),
                })?;
                Ok(MetricSpec::RiemannianClosedForm {
                    dimension: self.dimension,
                    radius,
                })
            }
            "randers" => {
                self.reject_field(
                    "randers",
                    &[("radius", has.0), ("epsilon", has.2), ("factors", has.3)],
                )?;
                let b = self.b.ok_or_else(|| FinslerError::InvalidParameter {
                    field: "b".into(),
                    message: "randers requires the drift covector b".into(),
                })?;
                Ok(MetricSpec::Randers {
                    dimension: self.dimension,
                    b,
                })
            }
            "minkowski_quartic" => {
                self.reject_field(
                    "minkowski_quartic",
                    &[("radius", has.0), ("b", has.1), ("factors", has.3)],
                )?;
                Ok(MetricSpec::MinkowskiQuartic {
                    dimension: self.dimension,
                    epsilon: self.epsilon.unwrap_or_else(default_epsilon),
                })
            }
            "funk_disk" => {
                self.reject_field(
                    "funk_disk",
                    &[("radius", has.0), ("b", has.1), ("epsilon", has.2), ("factors", has.3)],
                )?;
                Ok(MetricSpec::FunkDisk {
                    dimension: self.dimension,
                })
            }
            "product" => {
                self.reject_field(
                    "product",
                    &[("radius", has.0), ("b", has.1), ("epsilon", has.2)],
                )?;
                let factors = self.factors.ok_or_else(|| FinslerError::InvalidParameter {
                    field: "factors".into(),
                    message: "product requires a factor list".into(),
                })?;
                let factors = factors
                    .into_iter()
                    .map(|raw| match raw.into_spec()? {
                        MetricSpec::Euclidean { dimension } => {
                            Ok(FactorSpec::Euclidean { dimension })
                        }
                        MetricSpec::RiemannianClosedForm { dimension, radius } => {
                            Ok(FactorSpec::RiemannianClosedForm { dimension, radius })
                        }
                        other => Err(FinslerError::InvalidParameter {
                            field: "factors".into(),
                            message: format!(
                                "product factors must be Riemannian, got `{}`",
                                other.family_name()
                            ),
                        }),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(MetricSpec::Product {
                    dimension: self.dimension,
                    factors,
                })
            }
            other => Err(FinslerError::Parse(format!("unknown family `{other}`"))),
        }
    }
}

/// Parses a metric specification document (JSON, one metric per file).
pub fn parse_metric_spec(text: &str) -> Result<MetricSpec> {
    let raw: RawSpec = serde_json::from_str(text)
        .map_err(|e| FinslerError::Parse(format!("line {}, column {}: {}", e.line(), e.column(), e)))?;
    let spec = raw.into_spec()?;
    check_spec(&spec)?;
    Ok(spec)
}

fn check_spec(spec: &MetricSpec) -> Result<()> {
    let n = spec.dimension();
    if !(2..=MAX_DIM).contains(&n) {
        return Err(FinslerError::Dimension(n));
    }
    match spec {
        MetricSpec::RiemannianClosedForm { radius, .. } => {
            if !radius.is_finite() || *radius <= 0.0 {
                return Err(FinslerError::InvalidParameter {
                    field: "radius".into(),
                    message: "sphere radius must be positive".into(),
                });
            }
        }
        MetricSpec::Randers { dimension, b } => {
            if b.len() != *dimension {
                return Err(FinslerError::InvalidParameter {
                    field: "b".into(),
                    message: format!("b has length {}, expected {}", b.len(), dimension),
                });
            }
            let norm = b.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !(norm < 1.0) {
                return Err(FinslerError::InvalidParameter {
                    field: "b".into(),
                    message: format!("b norm must be < 1 (got {norm})"),
                });
            }
        }
        MetricSpec::MinkowskiQuartic { epsilon, .. } => {
            if !epsilon.is_finite() || *epsilon < 0.0 {
                return Err(FinslerError::InvalidParameter {
                    field: "epsilon".into(),
                    message: "epsilon must be non-negative".into(),
                });
            }
        }
        MetricSpec::Product { dimension, factors } => {
            if factors.is_empty() {
                return Err(FinslerError::InvalidParameter {
                    field: "factors".into(),
                    message: "product requires at least one factor".into(),
                });
            }
            let total: usize = factors.iter().map(|f| f.dimension()).sum();
            if total != *dimension {
                return Err(FinslerError::InvalidParameter {
                    field: "factors".into(),
                    message: format!(
                        "factor dimensions sum to {total}, expected dimension {dimension}"
                    ),
                });
            }
            for f in factors {
                if f.dimension() == 0 {
                    return Err(FinslerError::InvalidParameter {
                        field: "factors".into(),
                        message: "factor dimensions must be positive".into(),
                    });
                }
                if let FactorSpec::RiemannianClosedForm { dimension, radius } = f {
                    if *dimension < 2 {
                        return Err(FinslerError::InvalidParameter {
                            field: "factors".into(),
                            message: "sphere factors need dimension >= 2".into(),
                        });
                    }
                    if !radius.is_finite() || *radius <= 0.0 {
                        return Err(FinslerError::InvalidParameter {
                            field: "radius".into(),
                            message: "sphere radius must be positive".into(),
                        });
                    }
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// One Riemannian block of a product (or the whole metric when Riemannian).
#[derive(Clone, Debug)]
pub(crate) enum RiemFactor {
    Flat,
    Sphere { radius: f64 },
}

#[derive(Clone, Debug)]
pub(crate) enum Kernel {
    Euclidean,
    Sphere { radius: f64 },
    Randers { b: Vec<f64> },
    Quartic { epsilon: f64 },
    Funk,
    /// (factor kind, coordinate offset, factor dimension)
    Product { blocks: Vec<(RiemFactor, usize, usize)> },
}

/// An evaluable Finsler metric: the spec plus a compiled kernel for
/// F²(x, v) over any [`Real`] scalar type.
#[derive(Clone, Debug)]
pub struct FinslerMetric {
    spec: MetricSpec,
    pub(crate) kernel: Kernel,
    n: usize,
    complete: bool,
}

fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    let mut acc = a[0].clone() * b[0].clone();
    for (p, q) in a.iter().zip(b).skip(1) {
        acc = acc + p.clone() * q.clone();
    }
    acc
}

impl FinslerMetric {
    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Whether the family is declared geodesically complete on its domain.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn is_riemannian(&self) -> bool {
        matches!(
            self.kernel,
            Kernel::Euclidean | Kernel::Sphere { .. } | Kernel::Product { .. }
        )
    }

    /// Domain predicate on base points.
    pub fn in_domain(&self, x: &[f64]) -> bool {
        match &self.kernel {
            Kernel::Funk => x.iter().map(|c| c * c).sum::<f64>() < 1.0,
            _ => true,
        }
    }

    pub fn check_support(&self, z: &SupportElement) -> Result<()> {
        if z.dim() != self.n {
            return Err(FinslerError::Domain(format!(
                "support element has dimension {}, metric has {}",
                z.dim(),
                self.n
            )));
        }
        if !self.in_domain(&z.x) {
            return Err(FinslerError::Domain(
                "base point outside the metric domain".into(),
            ));
        }
        Ok(())
    }

    /// F²(x, v), generic over the scalar type (f64, jets, duals).
    pub fn f_squared<S: Real>(&self, x: &[S], v: &[S]) -> S {
        match &self.kernel {
            Kernel::Euclidean => dot(v, v),
            Kernel::Sphere { radius } => {
                let r2 = radius * radius;
                let s = dot(x, x) + x[0].lift(r2);
                let c = (s.clone() * s).recip_via_div().scale(4.0 * r2 * r2);
                c * dot(v, v)
            }
            Kernel::Randers { b } => {
                let mut f = dot(v, v).sqrt_r();
                for (vi, bi) in v.iter().zip(b) {
                    f = f + vi.scale(*bi);
                }
                f.clone() * f
            }
            Kernel::Quartic { epsilon } => {
                let n = v.len();
                let mut q = v[0].clone() * v[0].clone() * v[0].clone() * v[0].clone();
                for vi in &v[1..] {
                    q = q + vi.clone() * vi.clone() * vi.clone() * vi.clone();
                }
                for i in 0..n {
                    for j in (i + 1)..n {
                        let term = v[i].clone() * v[i].clone() * v[j].clone() * v[j].clone();
                        q = q + term.scale(*epsilon);
                    }
                }
                q.sqrt_r()
            }
            Kernel::Funk => {
                let one = x[0].lift(1.0);
                let om = one - dot(x, x);
                let xv = dot(x, v);
                let disc = (om.clone() * dot(v, v) + xv.clone() * xv.clone()).sqrt_r();
                let f = (disc + xv) / om;
                f.clone() * f
            }
            Kernel::Product { blocks } => {
                let mut acc: Option<S> = None;
                for (factor, off, len) in blocks {
                    let xs = &x[*off..*off + *len];
                    let vs = &v[*off..*off + *len];
                    let part = match factor {
                        RiemFactor::Flat => dot(vs, vs),
                        RiemFactor::Sphere { radius } => {
                            let r2 = radius * radius;
                            let s = dot(xs, xs) + xs[0].lift(r2);
                            let c = (s.clone() * s).recip_via_div().scale(4.0 * r2 * r2);
                            c * dot(vs, vs)
                        }
                    };
                    acc = Some(match acc {
                        None => part,
                        Some(a) => a + part,
                    });
                }
                acc.expect("non-empty product")
            }
        }
    }

    /// F(x, v) at a point.
    pub fn f(&self, z: &SupportElement) -> Result<f64> {
        self.check_support(z)?;
        Ok(self.f_squared(&z.x, &z.v).max(0.0).sqrt())
    }

    /// The metric's F² as an object-safe scalar field (for the jet API).
    pub fn f_squared_field(&self) -> MetricField {
        MetricField {
            metric: self.clone(),
        }
    }
}

// small helper so the generic code reads as a division (1 / s)
trait RecipViaDiv: Real + Sized {
    fn recip_via_div(self) -> Self {
        self.lift(1.0) / self
    }
}
impl<S: Real> RecipViaDiv for S {}

/// [`ScalarField`] view of a metric's F².
pub struct MetricField {
    metric: FinslerMetric,
}

impl ScalarField for MetricField {
    fn eval(&self, x: &[f64], v: &[f64]) -> f64 {
        self.metric.f_squared(x, v)
    }

    fn eval_jet(&self, x: &[Jet], v: &[Jet]) -> Jet {
        self.metric.f_squared(x, v)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        self.metric.in_domain(x)
    }
}

/// Builds an evaluable metric from a validated spec.
pub fn make_metric(spec: MetricSpec) -> Result<FinslerMetric> {
    check_spec(&spec)?;
    let n = spec.dimension();
    let (kernel, complete) = match &spec {
        MetricSpec::Euclidean { .. } => (Kernel::Euclidean, true),
        MetricSpec::RiemannianClosedForm { radius, .. } => {
            (Kernel::Sphere { radius: *radius }, true)
        }
        MetricSpec::Randers { b, .. } => (Kernel::Randers { b: b.clone() }, true),
        MetricSpec::MinkowskiQuartic { epsilon, .. } => (Kernel::Quartic { epsilon: *epsilon }, true),
        MetricSpec::FunkDisk { .. } => (Kernel::Funk, false),
        MetricSpec::Product { factors, .. } => {
            let mut blocks = Vec::new();
            let mut off = 0;
            for f in factors {
                let len = f.dimension();
                let kind = match f {
                    FactorSpec::Euclidean { .. } => RiemFactor::Flat,
                    FactorSpec::RiemannianClosedForm { radius, .. } => {
                        RiemFactor::Sphere { radius: *radius }
                    }
                };
                blocks.push((kind, off, len));
                off += len;
            }
            (Kernel::Product { blocks }, true)
        }
    };
    let metric = FinslerMetric {
        spec,
        kernel,
        n,
        complete,
    };
    if let MetricSpec::MinkowskiQuartic { .. } = metric.spec() {
        // strict convexity is checked numerically over a deterministic
        // v-sphere sample rather than proven
        quartic_convexity_check(&metric)?;
    }
    Ok(metric)
}

fn quartic_convexity_check(metric: &FinslerMetric) -> Result<()> {
    let n = metric.dim();
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for _ in 0..64 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 0.3 {
            continue;
        }
        for c in v.iter_mut() {
            *c /= norm;
        }
        let z = SupportElement::new(vec![0.0; n], v)?;
        let g = fundamental_matrix(metric, &z)?;
        let eig = g.symmetric_eigenvalues();
        if eig.iter().any(|&e| e <= 0.0) {
            return Err(FinslerError::NotPositiveDefinite);
        }
    }
    Ok(())
}

/// The fundamental tensor g_ij = ½ ∂²F²/∂vⁱ∂vʲ as a matrix.
pub fn fundamental_matrix(metric: &FinslerMetric, z: &SupportElement) -> Result<DMatrix<f64>> {
    metric.check_support(z)?;
    let field = metric.f_squared_field();
    let jv = evaluate_jet(&field, z, 0, 2)?;
    let n = metric.dim();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = 0.5 * jv.partial(&[], &[i, j]);
        }
    }
    Ok(g)
}

/// Per-sample structure-condition results.
#[derive(Clone, Debug, Serialize)]
pub struct SampleValidation {
    pub f_value: f64,
    pub positive: bool,
    pub homogeneity_residual: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub samples: Vec<SampleValidation>,
    pub pass: bool,
}

/// Checks F > 0, 1-homogeneity, and positive-definiteness of g per sample.
pub fn validate_metric(
    metric: &FinslerMetric,
    samples: &[SupportElement],
) -> Result<ValidationReport> {
    if samples.is_empty() {
        return Err(FinslerError::EmptySamples);
    }
    let mut out = Vec::with_capacity(samples.len());
    let mut pass = true;
    for z in samples {
        metric.check_support(z)?;
        let f = metric.f(z)?;
        let doubled = SupportElement::new(z.x.clone(), z.v.iter().map(|c| 2.0 * c).collect())?;
        let f2v = metric.f(&doubled)?;
        let homog = (f2v - 2.0 * f).abs();
        let g = fundamental_matrix(metric, z)?;
        let min_eig = g
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, &e| m.min(e));
        let positive = f > 0.0;
        if !positive || homog > 1e-9 || min_eig <= 0.0 {
            pass = false;
        }
        out.push(SampleValidation {
            f_value: f,
            positive,
            homogeneity_residual: homog,
            min_eigenvalue: min_eig,
        });
    }
    Ok(ValidationReport { samples: out, pass })
}
