//! Optimization-based search for ANN violations.
//!
//! For fixed weights `(p, q)` the coupling side is a concave maximization
//! over a product of scaled simplices ([`inner_max_pi`]). The outer problem
//! over `(p, q)` is nonconvex and is attacked by multistart projected
//! gradient descent with an Armijo line search, using the envelope gradient
//! at the inner optimizer. Restricting to plans on `|X|` slots with the
//! identity assignment loses nothing, since coarsening never increases a gap.
//!
//! Nothing reported here is a proof of absence. A negative `best_gap` is,
//! however, a certificate: it is re-evaluated exactly from the reported plan.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ann::{ann_gap, check_boxtimes, AnnPlan, BoxtimesReport};
use crate::metric::{Assignment, SemimetricSpace, TriangleViolation};
use crate::sample;
use crate::scalar::Real;

mod inner;

pub use inner::{InnerMethod, InnerSolution};
use inner::Pairs;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("certification applies to at most 5 points, space has {0}")]
    TooManyPoints(usize),
    #[error("weights must lie on the simplex and have {expected} entries")]
    BadWeights { expected: usize },
    #[error("assignment has {got} slots but the weights have {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Constant step length for the outer descent and the projected-gradient
    /// inner method.
    Fixed(f64),
    /// Armijo backtracking with step growth after each accepted step.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub restarts: usize,
    /// Outer iterations per restart.
    pub max_iters: usize,
    /// Inner iterations (sweeps for the dual method) per solve.
    pub inner_max_iters: usize,
    pub step_rule: StepRule,
    pub seed: u64,
    /// Gaps below `-tol` are reported as violations.
    pub tol: f64,
    pub gamma_grid: Option<Vec<f64>>,
    pub inner: InnerMethod,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 100,
            max_iters: 3000,
            inner_max_iters: 5000,
            step_rule: StepRule::Backtracking,
            seed: 0,
            tol: 1e-7,
            gamma_grid: None,
            inner: InnerMethod::Dual,
        }
    }
}

/// Euclidean projection of `v` onto `{x ≥ 0 : Σ x = radius}` (sort based).
pub fn project_simplex<T: Real>(v: &[T], radius: T) -> Vec<T> {
    let n = v.len();
    if !(radius > T::zero()) || n == 0 {
        return vec![T::zero(); n];
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite iterate"));
    let mut cum = T::zero();
    let mut shift = T::zero();
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let cand = (cum - radius) / T::from_usize(k + 1).expect("small index");
        if uk - cand > T::zero() {
            shift = cand;
        }
    }
    v.iter().map(|&x| (x - shift).max(T::zero())).collect()
}

/// Distances and squared distances under an assignment, row-major `n × n`.
fn pulled_back<T: Real>(space: &SemimetricSpace<T>, asg: &Assignment) -> (Vec<T>, Vec<T>) {
    let x = asg.indices();
    let n = x.len();
    let mut d = vec![T::zero(); n * n];
    let mut d2 = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = space.d(x[i], x[j]);
            d2[i * n + j] = space.d2(x[i], x[j]);
        }
    }
    (d, d2)
}

/// Maximizes the ANN left-hand side over couplings with row sums `p_i + q_i`.
///
/// The objective is concave (each mediant is jointly concave) and the
/// feasible set is a product of scaled simplices. Both inner methods stop on
/// a certified duality gap, so a converged solve is a global maximum to
/// within the tolerance; a non-converged solve still returns its best
/// iterate together with a valid upper bound.
pub fn inner_max_pi<T: Real>(
    space: &SemimetricSpace<T>,
    asg: &Assignment,
    p: &[T],
    q: &[T],
    config: &SearchConfig,
) -> Result<InnerSolution<T>, SearchError> {
    let n = asg.len();
    if p.len() != n || q.len() != n {
        return Err(SearchError::DimensionMismatch { expected: p.len(), got: n });
    }
    let on_simplex =
        |w: &[T]| w.iter().all(|&x| x >= T::zero()) && (crate::scalar::sum(w) - T::one()).abs() <= T::lit(1e-9);
    if !on_simplex(p) || !on_simplex(q) {
        return Err(SearchError::BadWeights { expected: n });
    }
    let (d, d2) = pulled_back(space, asg);
    let rows: Vec<T> = p.iter().zip(q).map(|(&a, &b)| a + b).collect();
    Ok(inner::solve(&Pairs { n, d: &d, d2: &d2, rows }, None, config))
}

/// Best plan found by [`search_violation`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport<T> {
    /// Exact ANN gap of `best_plan` under `best_assignment`.
    pub best_gap: T,
    pub best_plan: AnnPlan<T>,
    pub best_assignment: Assignment,
    /// Index of the restart that produced the best plan.
    pub best_restart: usize,
    /// Objective evaluations (inner solves) across all restarts.
    pub evaluations: usize,
    pub converged_restarts: usize,
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
}

impl<T: Real> SearchReport<T> {
    /// A gap below `-tol` on an exactly re-evaluated plan.
    pub fn found_violation(&self) -> bool {
        self.best_gap < -T::lit(self.tol)
    }
}

struct Outer<'a, T> {
    n: usize,
    d: &'a [T],
    d2: &'a [T],
    config: &'a SearchConfig,
    evaluations: usize,
}

struct OuterPoint<T> {
    p: Vec<T>,
    q: Vec<T>,
    inner: InnerSolution<T>,
    value: T,
}

impl<T: Real> Outer<'_, T> {
    fn rhs(&self, p: &[T], q: &[T]) -> T {
        let n = self.n;
        let mut v = T::zero();
        for i in 0..n {
            for j in 0..n {
                v += p[i] * q[j] * self.d2[i * n + j];
            }
        }
        v
    }

    /// Evaluates `rhs − max_π lhs`, warm-starting the inner solve from
    /// `warm`.
    fn evaluate(&mut self, p: Vec<T>, q: Vec<T>, warm: Option<&OuterPoint<T>>) -> OuterPoint<T> {
        let rows: Vec<T> = p.iter().zip(&q).map(|(&a, &b)| a + b).collect();
        let problem = Pairs { n: self.n, d: self.d, d2: self.d2, rows };
        let inner = inner::solve(&problem, warm.map(|w| w.inner.state.as_slice()), self.config);
        self.evaluations += 1;
        let value = self.rhs(&p, &q) - inner.lhs;
        OuterPoint { p, q, inner, value }
    }

    /// Envelope gradient of the outer objective in `(p, q)`: the inner value
    /// has derivative `u_i²` along row mass `r_i` at the dual optimum.
    fn gradient(&self, at: &OuterPoint<T>) -> (Vec<T>, Vec<T>) {
        let n = self.n;
        let price = &at.inner.prices;
        let gp = (0..n)
            .map(|i| (0..n).fold(T::zero(), |acc, j| acc + self.d2[i * n + j] * at.q[j]) - price[i])
            .collect();
        let gq = (0..n)
            .map(|i| (0..n).fold(T::zero(), |acc, j| acc + self.d2[i * n + j] * at.p[j]) - price[i])
            .collect();
        (gp, gq)
    }

    /// One multistart descent from `(p, q)`. Returns the final point and
    /// whether it met the stopping rule.
    fn descend(&mut self, p: Vec<T>, q: Vec<T>) -> (OuterPoint<T>, bool) {
        let mut cur = self.evaluate(p, q, None);
        let scale = self.d2.iter().fold(T::zero(), |m, &x| m.max(x)).max(T::min_positive_value());
        let mut step = match self.config.step_rule {
            StepRule::Fixed(s) => T::lit(s),
            StepRule::Backtracking => T::one() / scale,
        };
        let sigma = T::lit(1e-4);
        let stall = T::lit(self.config.tol * 1e-3) * scale.max(T::one());
        // a line search that fails only after shrinking the move below this is at a stationary point
        let resolution = T::epsilon().sqrt();
        for _ in 0..self.config.max_iters {
            let (gp, gq) = self.gradient(&cur);
            let mut moved = None;
            let mut displacement = T::infinity();
            for _ in 0..40 {
                let np = project_simplex(&cur.p.iter().zip(&gp).map(|(&x, &g)| x - step * g).collect::<Vec<_>>(), T::one());
                let nq = project_simplex(&cur.q.iter().zip(&gq).map(|(&x, &g)| x - step * g).collect::<Vec<_>>(), T::one());
                displacement = np.iter().zip(&cur.p).chain(nq.iter().zip(&cur.q)).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
                let descent = np.iter().zip(&cur.p).zip(&gp).fold(T::zero(), |acc, ((&a, &b), &g)| acc + g * (a - b))
                    + nq.iter().zip(&cur.q).zip(&gq).fold(T::zero(), |acc, ((&a, &b), &g)| acc + g * (a - b));
                if descent >= T::zero() {
                    // Projected step is stationary.
                    return (cur, true);
                }
                let cand = self.evaluate(np, nq, Some(&cur));
                let ok = match self.config.step_rule {
                    StepRule::Fixed(_) => cand.value <= cur.value,
                    StepRule::Backtracking => cand.value <= cur.value + sigma * descent,
                };
                if ok {
                    moved = Some(cand);
                    break;
                }
                if matches!(self.config.step_rule, StepRule::Fixed(_)) {
                    break;
                }
                step = step / T::lit(2.0);
            }
            let Some(cand) = moved else { return (cur, displacement <= resolution) };
            let gain = cur.value - cand.value;
            cur = cand;
            if gain <= stall {
                return (cur, true);
            }
            if matches!(self.config.step_rule, StepRule::Backtracking) {
                step = step * T::lit(2.0);
            }
        }
        (cur, false)
    }
}

/// Number of restarts drawn from structured starting weights.
pub const STRUCTURED_STARTS: usize = 16;

/// Largest space for which restart 1 starts from the best ⊠ quadruple
/// (the scan is `n⁴`).
const BOXTIMES_SEED_MAX: usize = 12;

/// `(p, q)` of the best ⊠ instance pushed forward onto the points. The
/// inner maximization can only lower its gap, so the search never reports
/// less than the ⊠ scan would.
fn boxtimes_weights<T: Real>(space: &SemimetricSpace<T>) -> (Vec<f64>, Vec<f64>) {
    let n = space.len();
    let b = check_boxtimes(space);
    let (s, t) = (b.s.to_f64().unwrap_or(0.0), b.t.to_f64().unwrap_or(0.0));
    let [x, y, z, w] = b.quad;
    let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
    p[x] += 1.0 - s;
    p[z] += s;
    q[y] += 1.0 - t;
    q[w] += t;
    (p, q)
}

/// Starting weights for restart `r`. The first restart uses uniform `p`
/// and `q`, the second the best ⊠ instance (small spaces only); the next
/// ones split the points into a subset carrying `p` and its complement
/// carrying `q`; the rest are flat Dirichlet draws.
fn starting_weights<R: Rng>(n: usize, r: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    if r == 0 || n == 1 {
        return (vec![1.0 / n as f64; n], vec![1.0 / n as f64; n]);
    }
    if r < STRUCTURED_STARTS && n < 64 {
        let full = (1u64 << n) - 1;
        let mask = if n <= 4 { r as u64 & full } else { (r as u64 * 37) % full };
        if mask != 0 && mask != full {
            let ind = |inside: bool| -> Vec<f64> {
                let chosen: Vec<bool> = (0..n).map(|i| ((mask >> i) & 1 == 1) == inside).collect();
                let k = chosen.iter().filter(|&&c| c).count() as f64;
                chosen.iter().map(|&c| if c { 1.0 / k } else { 0.0 }).collect()
            };
            return (ind(true), ind(false));
        }
    }
    (sample::simplex(rng, n), sample::simplex(rng, n))
}

/// Multistart search for a negative ANN gap on `space` with the identity
/// assignment.
///
/// Restart `r` draws from stream `r` of the seeded generator, so each
/// restart is independent of the others and the merged result (minimum gap,
/// ties to the lowest restart index) does not depend on evaluation order.
pub fn search_violation<T: Real>(space: &SemimetricSpace<T>, config: &SearchConfig) -> SearchReport<T> {
    let n = space.len();
    let asg = Assignment::identity(n);
    let (d, d2) = pulled_back(space, &asg);
    let mut outer = Outer { n, d: &d, d2: &d2, config, evaluations: 0 };
    let mut best: Option<(T, usize, AnnPlan<T>)> = None;
    let mut converged_restarts = 0;
    for r in 0..config.restarts.max(1) {
        let mut rng = sample::stream_rng(config.seed, r as u64);
        let (p, q) = if r == 1 && (2..=BOXTIMES_SEED_MAX).contains(&n) {
            boxtimes_weights(space)
        } else {
            starting_weights(n, r, &mut rng)
        };
        let lift = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
        let (point, converged) = outer.descend(lift(p), lift(q));
        if converged {
            converged_restarts += 1;
        }
        let plan = AnnPlan::new(point.p, point.q, point.inner.pi.chunks(n).map(|c| c.to_vec()).collect())
            .expect("optimizer iterates stay on the constraint set");
        let gap = ann_gap(space, &asg, &plan).expect("identity assignment matches the plan");
        if best.as_ref().is_none_or(|(g, _, _)| gap < *g) {
            best = Some((gap, r, plan));
        }
    }
    let (best_gap, best_restart, best_plan) = best.expect("at least one restart");
    SearchReport {
        best_gap,
        best_plan,
        best_assignment: asg,
        best_restart,
        evaluations: outer.evaluations,
        converged_restarts,
        restarts: config.restarts.max(1),
        seed: config.seed,
        tol: config.tol,
    }
}

/// Why a space was refused an embeddability certificate.
#[derive(Debug, Clone, PartialEq)]
pub enum Refusal<T> {
    Triangle(TriangleViolation<T>),
    Boxtimes(BoxtimesReport<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certification<T> {
    /// Every ⊠ gap is at least `-tol`; with at most five points this
    /// characterizes embeddability into a CAT(0) space.
    Embeddable { min_gap: T, witness: BoxtimesReport<T> },
    NotEmbeddable(Refusal<T>),
}

/// Embeddability certificate for spaces of at most five points via the
/// ⊠ inequalities. Larger spaces are refused outright.
pub fn certify_embeddable_upto5<T: Real>(
    space: &SemimetricSpace<T>,
    tol: T,
) -> Result<Certification<T>, SearchError> {
    if space.len() > 5 {
        return Err(SearchError::TooManyPoints(space.len()));
    }
    if let Some(v) = space.check_triangle().first() {
        return Ok(Certification::NotEmbeddable(Refusal::Triangle(*v)));
    }
    let report = check_boxtimes(space);
    if report.min_gap >= -tol {
        Ok(Certification::Embeddable { min_gap: report.min_gap, witness: report })
    } else {
        Ok(Certification::NotEmbeddable(Refusal::Boxtimes(report)))
    }
}
