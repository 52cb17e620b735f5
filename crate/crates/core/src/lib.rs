//! Numerical Finsler differential geometry.
//!
//! The crate evaluates, at any support element z = (x, v) of the bundle of
//! nonzero tangent vectors, the full local apparatus of a Finsler metric:
//! fundamental and Cartan tensors, geodesic spray, Berwald and Cartan
//! connections, the three Cartan curvature blocks R/P/Q and the Berwald
//! hh-curvature H, flag curvature, and the k-nullity subspaces of the
//! curvature operator together with their structural checks (kernel
//! coincidence, involutivity of the nullity distribution, geodesic
//! confinement of its leaves, and long-horizon extendability probes).
//!
//! Derivatives are exact (nested truncated-Taylor jets, see [`jet`]); an
//! independent finite-difference oracle cross-checks them.

pub mod connection;
pub mod curvature;
pub mod error;
pub mod geodesic;
pub mod jet;
pub mod metric;
pub mod nullity;
pub mod oracles;
pub mod sample;
pub mod scalar;
pub mod tensor;

pub use error::{FinslerError, Result};
pub use jet::{evaluate_jet, finite_difference_partial, JetValue, SupportElement};
pub use metric::{make_metric, parse_metric_spec, validate_metric, FinslerMetric, MetricSpec};
pub use tensor::{TensorBlock, Variance};
