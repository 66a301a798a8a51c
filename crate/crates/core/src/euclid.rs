//! Euclidean model checks for the barycenter facts behind the ANN family:
//! the variance identity and the coupling inequality with its barycenter
//! terms, for both barycenter conventions.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::ann::{mediant, AnnPlan, PLAN_TOL};
use crate::metric::PointCloud;
use crate::sample;
use crate::scalar::{sum, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EuclidError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weights must be nonnegative and sum to 1")]
    BadWeights,
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y).sq())
}

/// Weighted mean `Σ w_i x_i`.
pub fn barycenter<T: Real>(cloud: &PointCloud<T>, weights: &[T]) -> Result<Vec<T>, EuclidError> {
    if weights.len() != cloud.len() {
        return Err(EuclidError::DimensionMismatch { expected: cloud.len(), got: weights.len() });
    }
    if weights.iter().any(|&w| !(w >= T::zero())) || (sum(weights) - T::one()).abs() > T::lit(PLAN_TOL) {
        return Err(EuclidError::BadWeights);
    }
    let mut z = vec![T::zero(); cloud.dim()];
    for (x, &w) in cloud.points().iter().zip(weights) {
        for (zk, &xk) in z.iter_mut().zip(x) {
            *zk += w * xk;
        }
    }
    Ok(z)
}

/// `|‖w−z‖² + Σ p_i ‖z−x_i‖² − Σ p_i ‖w−x_i‖²|` with `z` the barycenter.
pub fn variance_identity_residual<T: Real>(cloud: &PointCloud<T>, weights: &[T], w: &[T]) -> Result<T, EuclidError> {
    if w.len() != cloud.dim() {
        return Err(EuclidError::DimensionMismatch { expected: cloud.dim(), got: w.len() });
    }
    let z = barycenter(cloud, weights)?;
    let mut lhs = sq_dist(w, &z);
    let mut rhs = T::zero();
    for (x, &p) in cloud.points().iter().zip(weights) {
        lhs += p * sq_dist(&z, x);
        rhs += p * sq_dist(w, x);
    }
    Ok((lhs - rhs).abs())
}

/// Barycenter `z` and pair barycenters `z_ij` for every ordered pair with
/// `π_ij + π_ji > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycenterWitness<T> {
    pub z: Vec<T>,
    pub pairs: BTreeMap<(usize, usize), Vec<T>>,
}

/// Slack of the coupling inequality with barycenter terms:
/// `Σ p_i q_j ‖x_i−x_j‖² − (1/2) Σ mediant(π_ij, π_ji) ‖x_i−x_j‖² − Σ π_ij ‖z − z_ij‖²`.
///
/// `z` is the `p`-barycenter, or the `q`-barycenter when `use_q` is set.
pub fn pi_prop_slack<T: Real>(
    cloud: &PointCloud<T>,
    plan: &AnnPlan<T>,
    use_q: bool,
) -> Result<(T, BarycenterWitness<T>), EuclidError> {
    let n = cloud.len();
    if plan.len() != n {
        return Err(EuclidError::DimensionMismatch { expected: n, got: plan.len() });
    }
    let z = barycenter(cloud, if use_q { plan.q() } else { plan.p() })?;
    let x = cloud.points();
    let half = T::lit(0.5);
    let mut pairs = BTreeMap::new();
    let mut slack = T::zero();
    for i in 0..n {
        for j in 0..n {
            let d2 = sq_dist(&x[i], &x[j]);
            slack += plan.p()[i] * plan.q()[j] * d2;
            let (a, b) = (plan.pi(i, j), plan.pi(j, i));
            let total = a + b;
            if total > T::zero() {
                slack -= half * mediant(a, b) * d2;
                let zij: Vec<T> = x[i].iter().zip(&x[j]).map(|(&xi, &xj)| (a * xi + b * xj) / total).collect();
                slack -= a * sq_dist(&z, &zij);
                pairs.insert((i, j), zij);
            }
        }
    }
    Ok((slack, BarycenterWitness { z, pairs }))
}

/// Barycentric sum `Σ π_ij ‖z − z_ij‖²` of a witness.
pub fn barycenter_term<T: Real>(plan: &AnnPlan<T>, witness: &BarycenterWitness<T>) -> T {
    witness.pairs.iter().fold(T::zero(), |acc, (&(i, j), zij)| acc + plan.pi(i, j) * sq_dist(&witness.z, zij))
}

/// Shape limits for random Euclidean instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteShape {
    pub count: usize,
    pub max_points: usize,
    pub max_dim: usize,
    pub seed: u64,
}

impl Default for SuiteShape {
    fn default() -> Self {
        Self { count: 1000, max_points: 8, max_dim: 4, seed: 1 }
    }
}

/// Worst values seen over a random suite; `None` when the suite was empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteReport<T> {
    pub instances: usize,
    pub worst_residual: Option<T>,
    pub worst_slack_p: Option<T>,
    pub worst_slack_q: Option<T>,
}

fn random_instance<T: Real, R: Rng>(rng: &mut R, shape: &SuiteShape) -> (PointCloud<T>, AnnPlan<T>) {
    let m = rng.random_range(1..=shape.max_points.max(1));
    let dim = rng.random_range(1..=shape.max_dim.max(1));
    let cloud = sample::cloud(rng, m, dim);
    let zero_prob = if rng.random::<bool>() { 0.0 } else { 0.4 };
    let plan = sample::ann_plan(rng, m, zero_prob);
    (cloud, plan)
}

/// Runs the variance-identity and coupling-slack checks over `shape.count`
/// seeded random instances.
pub fn run_suite<T: Real>(shape: &SuiteShape) -> SuiteReport<T> {
    let mut rng = sample::rng(shape.seed);
    let mut report = SuiteReport { instances: 0, worst_residual: None, worst_slack_p: None, worst_slack_q: None };
    for _ in 0..shape.count {
        let (cloud, plan) = random_instance::<T, _>(&mut rng, shape);
        let w: Vec<T> = (0..cloud.dim()).map(|_| T::lit(rng.random_range(-2.0..=2.0))).collect();
        let residual = variance_identity_residual(&cloud, plan.p(), &w).expect("generated instance is consistent");
        let (sp, _) = pi_prop_slack(&cloud, &plan, false).expect("generated instance is consistent");
        let (sq, _) = pi_prop_slack(&cloud, &plan, true).expect("generated instance is consistent");
        report.instances += 1;
        report.worst_residual = Some(report.worst_residual.map_or(residual, |r: T| r.max_of(residual)));
        report.worst_slack_p = Some(report.worst_slack_p.map_or(sp, |r: T| r.min_of(sp)));
        report.worst_slack_q = Some(report.worst_slack_q.map_or(sq, |r: T| r.min_of(sq)));
    }
    report
}
