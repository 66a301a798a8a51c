//! Evaluation, verification and violation search for the ANN family of
//! quadratic metric inequalities on finite semimetric spaces, together with
//! the six-point octahedron space that satisfies the whole family.
//!
//! The math is generic over the scalar type. Evaluators that only need field
//! operations accept exact rationals; geometry and the optimizers need a
//! floating-point [`Real`]. The aliases below fix `f64` for everyday use.

pub mod ann;
pub mod euclid;
pub mod geometry;
pub mod lebedeva;
pub mod metric;
pub mod sample;
pub mod scalar;
pub mod search;

pub use ann::{
    ab_gap, ab_to_pi, ann_gap, boxtimes_as_ann_plan, boxtimes_gap, boxtimes_min, check_boxtimes, coarsen, mediant,
    AbPlan, AnnError, AnnPlan, BoxtimesMin, BoxtimesQuery, BoxtimesReport, Provenance,
};
pub use euclid::{barycenter, pi_prop_slack, variance_identity_residual, BarycenterWitness, EuclidError};
pub use metric::{Assignment, MetricError, PointCloud, QuadraticForm, SemimetricSpace, TriangleViolation, Violation};
pub use lebedeva::{LebedevaError, LebedevaInstance};
pub use scalar::{Real, Scalar};
pub use search::{
    certify_embeddable_upto5, inner_max_pi, search_violation, Certification, InnerMethod, InnerSolution, Refusal,
    SearchConfig, SearchError, SearchReport, StepRule,
};

pub type Rational = num_rational::Rational64;

pub type Space = SemimetricSpace<f64>;
pub type ExactSpace = SemimetricSpace<Rational>;
pub type Cloud = PointCloud<f64>;
pub type Plan = AnnPlan<f64>;
pub type ExactPlan = AnnPlan<Rational>;
pub type MatrixPlan = AbPlan<f64>;
