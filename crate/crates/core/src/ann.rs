//! The ANN(n) inequality family in coupling (`π`) and matrix-pair (`A`, `B`)
//! form, the ⊠ four-point family with an exact minimizer, and the reduction
//! maps between them.
//!
//! Every evaluator returns a *gap*, right-hand side minus left-hand side, so a
//! negative gap is always a violation.

use thiserror::Error;

use crate::metric::{Assignment, MetricError, SemimetricSpace};
use crate::scalar::{sum, Scalar};

/// Input tolerance for marginal constraints before plans are repaired.
pub const PLAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnError {
    #[error("plan has {got} entries where {expected} were expected ({what})")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("negative entry in {what} at index {index}")]
    Negative { what: &'static str, index: usize },
    #[error("{what} sums to {sum}, not 1")]
    NotOnSimplex { what: &'static str, sum: f64 },
    #[error("row {} of pi sums to {got}, expected {expected}", .row + 1)]
    RowSum { row: usize, expected: f64, got: f64 },
    #[error("A/B marginal constraint fails at ({}, {}) by {residual}", .i + 1, .j + 1)]
    Marginal { i: usize, j: usize, residual: f64 },
    #[error("map has {got} entries for a {expected}-slot plan, or sends a slot outside [1, {target}]")]
    BadMap { expected: usize, got: usize, target: usize },
    #[error("parameter {name} = {value} outside [0, 1]")]
    ParamOutOfRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// `ab / (a + b)`, extended by 0 where `a + b = 0`.
#[inline]
pub fn mediant<T: Scalar>(a: T, b: T) -> T {
    let s = a + b;
    if s > T::zero() {
        a * b / s
    } else {
        T::zero()
    }
}

/// How a plan's marginals were brought onto the constraint set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance<T> {
    /// Input satisfied the constraints as given.
    Exact,
    /// Input was within [`PLAN_TOL`] and was rescaled; `max_adjustment` is
    /// the largest absolute change made to any entry.
    Repaired { max_adjustment: T },
    /// Built by construction with constraints holding identically.
    Constructed,
}

/// Simplex weights `p`, `q` and a nonnegative coupling `π` whose row `i`
/// sums to `p_i + q_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnPlan<T> {
    n: usize,
    p: Vec<T>,
    q: Vec<T>,
    pi: Vec<T>,
    provenance: Provenance<T>,
}

fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn check_nonneg<T: Scalar>(what: &'static str, xs: &[T]) -> Result<(), AnnError> {
    match xs.iter().position(|&x| !(x >= T::zero())) {
        Some(index) => Err(AnnError::Negative { what, index }),
        None => Ok(()),
    }
}

/// Validates a simplex vector at [`PLAN_TOL`] and renormalizes it.
fn simplex_repair<T: Scalar>(what: &'static str, mut xs: Vec<T>, adj: &mut T) -> Result<Vec<T>, AnnError> {
    check_nonneg(what, &xs)?;
    let s = sum(&xs);
    if (s - T::one()).abs() > T::lit(PLAN_TOL) {
        return Err(AnnError::NotOnSimplex { what, sum: to_f64(s) });
    }
    if s != T::one() {
        for x in xs.iter_mut() {
            let y = *x / s;
            *adj = adj.max_of((y - *x).abs());
            *x = y;
        }
    }
    Ok(xs)
}

fn flatten_square<T: Scalar>(what: &'static str, rows: Vec<Vec<T>>, n: usize) -> Result<Vec<T>, AnnError> {
    if rows.len() != n {
        return Err(AnnError::Shape { what, expected: n, got: rows.len() });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(AnnError::Shape { what, expected: n, got: r.len() });
    }
    let flat: Vec<T> = rows.into_iter().flatten().collect();
    check_nonneg(what, &flat)?;
    Ok(flat)
}

impl<T: Scalar> AnnPlan<T> {
    /// Validates the marginal constraints at [`PLAN_TOL`], then repairs
    /// them exactly: `p` and `q` are renormalized and each row of `π` is
    /// rescaled to sum to `p_i + q_i`.
    pub fn new(p: Vec<T>, q: Vec<T>, pi: Vec<Vec<T>>) -> Result<Self, AnnError> {
        let n = p.len();
        if q.len() != n {
            return Err(AnnError::Shape { what: "q", expected: n, got: q.len() });
        }
        let mut pi = flatten_square("pi", pi, n)?;
        let mut adj = T::zero();
        let p = simplex_repair("p", p, &mut adj)?;
        let q = simplex_repair("q", q, &mut adj)?;
        let tol = T::lit(PLAN_TOL);
        for i in 0..n {
            let target = p[i] + q[i];
            let row = &mut pi[i * n..(i + 1) * n];
            let got = sum(row);
            if (got - target).abs() > tol {
                return Err(AnnError::RowSum { row: i, expected: to_f64(target), got: to_f64(got) });
            }
            if got == target {
                continue;
            }
            if got > T::zero() {
                let scale = target / got;
                for x in row.iter_mut() {
                    let y = *x * scale;
                    adj = adj.max_of((y - *x).abs());
                    *x = y;
                }
            } else {
                // Mass on the diagonal contributes nothing to either side.
                row[i] = target;
                adj = adj.max_of(target);
            }
        }
        let provenance = if adj == T::zero() { Provenance::Exact } else { Provenance::Repaired { max_adjustment: adj } };
        Ok(Self { n, p, q, pi, provenance })
    }

    /// Plans whose constraints hold by construction (encodings, optimizer
    /// iterates). Not checked.
    pub(crate) fn constructed(p: Vec<T>, q: Vec<T>, pi: Vec<T>) -> Self {
        let n = p.len();
        debug_assert_eq!(q.len(), n);
        debug_assert_eq!(pi.len(), n * n);
        Self { n, p, q, pi, provenance: Provenance::Constructed }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn p(&self) -> &[T] {
        &self.p
    }

    pub fn q(&self) -> &[T] {
        &self.q
    }

    #[inline]
    pub fn pi(&self, i: usize, j: usize) -> T {
        self.pi[i * self.n + j]
    }

    pub fn pi_rows(&self) -> Vec<Vec<T>> {
        self.pi.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn provenance(&self) -> Provenance<T> {
        self.provenance
    }

    fn check_dims(&self, space: &SemimetricSpace<T>, asg: &Assignment) -> Result<(), AnnError> {
        if asg.len() != self.n {
            return Err(MetricError::DimensionMismatch { expected: self.n, got: asg.len() }.into());
        }
        asg.check_range(space.len())?;
        Ok(())
    }

    /// `Σ_i Σ_j p_i q_j d(x_i, x_j)²`.
    pub fn rhs(&self, space: &SemimetricSpace<T>, asg: &Assignment) -> Result<T, AnnError> {
        self.check_dims(space, asg)?;
        let x = asg.indices();
        let mut total = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                total += self.p[i] * self.q[j] * space.d2(x[i], x[j]);
            }
        }
        Ok(total)
    }

    /// `(1/2) Σ_{i,j} mediant(π_ij, π_ji) d(x_i, x_j)²`.
    pub fn lhs(&self, space: &SemimetricSpace<T>, asg: &Assignment) -> Result<T, AnnError> {
        self.check_dims(space, asg)?;
        let x = asg.indices();
        let mut total = T::zero();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                // The (i,j) and (j,i) terms are equal; their halves add up.
                total += mediant(self.pi(i, j), self.pi(j, i)) * space.d2(x[i], x[j]);
            }
        }
        Ok(total)
    }
}

/// Gap of one ANN inequality instance: `rhs - lhs`.
pub fn ann_gap<T: Scalar>(space: &SemimetricSpace<T>, asg: &Assignment, plan: &AnnPlan<T>) -> Result<T, AnnError> {
    Ok(plan.rhs(space, asg)? - plan.lhs(space, asg)?)
}

/// Simplex weights `p`, `q` and nonnegative `A`, `B` with
/// `Σ_s A[i][s] + Σ_s B[s][j] = p_i + q_j` for all `i, j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbPlan<T> {
    n: usize,
    p: Vec<T>,
    q: Vec<T>,
    a: Vec<T>,
    b: Vec<T>,
}

impl<T: Scalar> AbPlan<T> {
    /// Validates at [`PLAN_TOL`]. `p` and `q` are renormalized; `A` and `B`
    /// are kept as given.
    pub fn new(p: Vec<T>, q: Vec<T>, a: Vec<Vec<T>>, b: Vec<Vec<T>>) -> Result<Self, AnnError> {
        let n = p.len();
        if q.len() != n {
            return Err(AnnError::Shape { what: "q", expected: n, got: q.len() });
        }
        let a = flatten_square("A", a, n)?;
        let b = flatten_square("B", b, n)?;
        let mut adj = T::zero();
        let p = simplex_repair("p", p, &mut adj)?;
        let q = simplex_repair("q", q, &mut adj)?;
        let row_a: Vec<T> = (0..n).map(|i| sum(&a[i * n..(i + 1) * n])).collect();
        let col_b: Vec<T> = (0..n).map(|j| (0..n).fold(T::zero(), |acc, s| acc + b[s * n + j])).collect();
        let tol = T::lit(PLAN_TOL);
        for i in 0..n {
            for j in 0..n {
                let residual = row_a[i] + col_b[j] - p[i] - q[j];
                if residual.abs() > tol {
                    return Err(AnnError::Marginal { i, j, residual: to_f64(residual) });
                }
            }
        }
        Ok(Self { n, p, q, a, b })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn p(&self) -> &[T] {
        &self.p
    }

    pub fn q(&self) -> &[T] {
        &self.q
    }

    pub fn a(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    pub fn b(&self, i: usize, j: usize) -> T {
        self.b[i * self.n + j]
    }
}

/// Gap of the single-summand (A, B) inequality:
/// `Σ p_i q_j d² - Σ mediant(a_ij, b_ij) d²`.
pub fn ab_gap<T: Scalar>(space: &SemimetricSpace<T>, asg: &Assignment, plan: &AbPlan<T>) -> Result<T, AnnError> {
    let n = plan.n;
    if asg.len() != n {
        return Err(MetricError::DimensionMismatch { expected: n, got: asg.len() }.into());
    }
    asg.check_range(space.len())?;
    let x = asg.indices();
    let mut gap = T::zero();
    for i in 0..n {
        for j in 0..n {
            let d2 = space.d2(x[i], x[j]);
            gap += (plan.p[i] * plan.q[j] - mediant(plan.a(i, j), plan.b(i, j))) * d2;
        }
    }
    Ok(gap)
}

/// `π_ij = A[i][j] + B[j][i]`, with the same `p` and `q`.
pub fn ab_to_pi<T: Scalar>(plan: &AbPlan<T>) -> Result<AnnPlan<T>, AnnError> {
    let n = plan.n;
    let pi = (0..n).map(|i| (0..n).map(|j| plan.a(i, j) + plan.b(j, i)).collect()).collect();
    AnnPlan::new(plan.p.clone(), plan.q.clone(), pi)
}

/// Pushes a plan on `m` slots forward along `phi: [m] -> [n]`, summing
/// weights over preimages.
pub fn coarsen<T: Scalar>(plan: &AnnPlan<T>, phi: &[usize], n: usize) -> Result<AnnPlan<T>, AnnError> {
    let m = plan.n;
    if phi.len() != m || phi.iter().any(|&k| k >= n) {
        return Err(AnnError::BadMap { expected: m, got: phi.len(), target: n });
    }
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut pi = vec![T::zero(); n * n];
    for i in 0..m {
        p[phi[i]] += plan.p[i];
        q[phi[i]] += plan.q[i];
        for j in 0..m {
            pi[phi[i] * n + phi[j]] += plan.pi(i, j);
        }
    }
    Ok(AnnPlan { n, p, q, pi, provenance: plan.provenance })
}

/// Four labels `(x, y, z, w)` and parameters `s, t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxtimesQuery<T> {
    pub quad: [usize; 4],
    pub s: T,
    pub t: T,
}

fn check_unit<T: Scalar>(name: &'static str, v: T) -> Result<(), AnnError> {
    if v >= T::zero() && v <= T::one() {
        Ok(())
    } else {
        Err(AnnError::ParamOutOfRange { name, value: to_f64(v) })
    }
}

impl<T: Scalar> BoxtimesQuery<T> {
    pub fn new(quad: [usize; 4], s: T, t: T) -> Result<Self, AnnError> {
        check_unit("s", s)?;
        check_unit("t", t)?;
        Ok(Self { quad, s, t })
    }
}

/// Squared distances of the six pairs a quadruple involves.
#[derive(Debug, Clone, Copy)]
struct QuadSquares<T> {
    xy: T,
    yz: T,
    zw: T,
    wx: T,
    xz: T,
    yw: T,
}

impl<T: Scalar> QuadSquares<T> {
    fn new(space: &SemimetricSpace<T>, quad: [usize; 4]) -> Result<Self, AnnError> {
        if let Some(&label) = quad.iter().find(|&&l| l >= space.len()) {
            return Err(MetricError::LabelOutOfRange { label, n: space.len() }.into());
        }
        let [x, y, z, w] = quad;
        Ok(Self {
            xy: space.d2(x, y),
            yz: space.d2(y, z),
            zw: space.d2(z, w),
            wx: space.d2(w, x),
            xz: space.d2(x, z),
            yw: space.d2(y, w),
        })
    }

    fn value(&self, s: T, t: T) -> T {
        let one = T::one();
        (one - s) * (one - t) * self.xy + s * (one - t) * self.yz + s * t * self.zw + (one - s) * t * self.wx
            - s * (one - s) * self.xz
            - t * (one - t) * self.yw
    }
}

/// The full right-hand expression of the ⊠ inequality at `(s, t)`.
pub fn boxtimes_gap<T: Scalar>(space: &SemimetricSpace<T>, query: &BoxtimesQuery<T>) -> Result<T, AnnError> {
    check_unit("s", query.s)?;
    check_unit("t", query.t)?;
    Ok(QuadSquares::new(space, query.quad)?.value(query.s, query.t))
}

/// Minimizer of the ⊠ expression over the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxtimesMin<T> {
    pub s: T,
    pub t: T,
    pub gap: T,
}

/// Exact minimum over `[0,1]²` by candidate enumeration.
///
/// Writing the expression as `a + αs + βt + κst + X s² + Y t²` with
/// `X = d(x,z)²`, `Y = d(y,w)²`, it is a convex quadratic in each variable
/// separately, so the minimum is at a corner, at the critical point of one of
/// the four edge restrictions, or at an interior stationary point with
/// positive definite Hessian. Ties go to the lexicographically smallest
/// `(s, t)`.
pub fn boxtimes_min<T: Scalar>(space: &SemimetricSpace<T>, quad: [usize; 4]) -> Result<BoxtimesMin<T>, AnnError> {
    let sq = QuadSquares::new(space, quad)?;
    Ok(minimize_quad(&sq))
}

fn minimize_quad<T: Scalar>(sq: &QuadSquares<T>) -> BoxtimesMin<T> {
    let (zero, one, two) = (T::zero(), T::one(), T::lit(2.0));
    let alpha = sq.yz - sq.xy - sq.xz;
    let beta = sq.wx - sq.xy - sq.yw;
    let kappa = sq.xy - sq.yz + sq.zw - sq.wx;
    let (cx, cy) = (sq.xz, sq.yw);
    let inside = |v: T| v > zero && v < one;

    let mut candidates: Vec<(T, T)> = vec![(zero, zero), (zero, one), (one, zero), (one, one)];
    if cy > zero {
        for s in [zero, one] {
            let t = -(beta + kappa * s) / (two * cy);
            if inside(t) {
                candidates.push((s, t));
            }
        }
    }
    if cx > zero {
        for t in [zero, one] {
            let s = -(alpha + kappa * t) / (two * cx);
            if inside(s) {
                candidates.push((s, t));
            }
        }
    }
    let det = T::lit(4.0) * cx * cy - kappa * kappa;
    if det > zero {
        let s = (kappa * beta - two * cy * alpha) / det;
        let t = (kappa * alpha - two * cx * beta) / det;
        if inside(s) && inside(t) {
            candidates.push((s, t));
        }
    }

    let mut best = BoxtimesMin { s: zero, t: zero, gap: sq.value(zero, zero) };
    for (s, t) in candidates {
        let gap = sq.value(s, t);
        if gap < best.gap || (gap == best.gap && (s, t) < (best.s, best.t)) {
            best = BoxtimesMin { s, t, gap };
        }
    }
    best
}

/// Global ⊠ minimum over all ordered quadruples and its witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxtimesReport<T> {
    pub quad: [usize; 4],
    pub s: T,
    pub t: T,
    pub min_gap: T,
    pub quadruples: usize,
}

/// Runs [`boxtimes_min`] over all `n⁴` ordered quadruples, repeated labels
/// included. The first quadruple in lexicographic order attaining the
/// minimum is the witness.
pub fn check_boxtimes<T: Scalar>(space: &SemimetricSpace<T>) -> BoxtimesReport<T> {
    let n = space.len();
    let mut best: Option<BoxtimesReport<T>> = None;
    let mut count = 0;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for w in 0..n {
                    let quad = [x, y, z, w];
                    let m = boxtimes_min(space, quad).expect("labels drawn from the space");
                    count += 1;
                    if best.is_none_or(|b| m.gap < b.min_gap) {
                        best = Some(BoxtimesReport { quad, s: m.s, t: m.t, min_gap: m.gap, quadruples: 0 });
                    }
                }
            }
        }
    }
    let mut report = best.expect("a semimetric space has at least one point");
    report.quadruples = count;
    report
}

/// The ⊠ instance at `(s, t)` written as a 4-slot ANN plan.
///
/// Slots are `(x, y, z, w)`; `p = (1-s, 0, s, 0)`, `q = (0, 1-t, 0, t)` and
/// `π` couples slot 1 with 3 and slot 2 with 4.
pub fn boxtimes_as_ann_plan<T: Scalar>(
    n: usize,
    quad: [usize; 4],
    s: T,
    t: T,
) -> Result<(Assignment, AnnPlan<T>), AnnError> {
    check_unit("s", s)?;
    check_unit("t", t)?;
    let asg = Assignment::new(quad.to_vec(), n)?;
    let (zero, one) = (T::zero(), T::one());
    let p = vec![one - s, zero, s, zero];
    let q = vec![zero, one - t, zero, t];
    let mut pi = vec![zero; 16];
    pi[2] = one - s;
    pi[8] = s;
    pi[7] = one - t;
    pi[13] = t;
    Ok((asg, AnnPlan::constructed(p, q, pi)))
}
