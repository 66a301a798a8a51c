//! The six-point octahedron space: geometric validation of the defining
//! configuration, the constants `h, H, θ, δ, c` and the admissible
//! perturbation bound `C`, and the perturbed metric `d_ε` which inflates
//! only the `x5 x6` distance by `ε`.
//!
//! Points are indexed 0..6 in code; `points[4]` and `points[5]` are the two
//! apexes `x5`, `x6`.

use thiserror::Error;

use crate::geometry::{self, cross, dist, dot, hull_max_distance, hull_projection, lerp, norm, scale, sub, Vec3};
use crate::metric::{MetricError, PointCloud, SemimetricSpace};
use crate::scalar::Real;

/// Relative tolerance for incidence predicates (on-segment, coplanar).
const INCIDENCE_TOL: f64 = 1e-12;
/// The returned tube radius is this fraction of the bisection supremum.
pub const DELTA_SAFETY: f64 = 0.95;
const BISECTION_STEPS: usize = 200;

const A5: usize = 4;
const A6: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LebedevaError {
    #[error("points {} and {} coincide", .0 + 1, .1 + 1)]
    NotDistinct(usize, usize),
    #[error("the diagonals (x1,x3) and (x2,x4) do not meet")]
    DiagonalsDisjoint,
    #[error("the diagonals (x1,x3) and (x2,x4) overlap in more than one point")]
    DiagonalsOverlap,
    #[error("x1..x4 are not in convex position in a plane")]
    NotConvexPosition,
    #[error("segment (x5,x6) meets the open quadrilateral in {0} points, expected 1")]
    CrossingCount(usize),
    #[error("segment (x5,x6) lies in the plane of x1..x4")]
    SegmentInPlane,
    #[error("segment (x5,x6) crosses the quadrilateral on [x{},x{}]", .0 + 1, .1 + 1)]
    CrossingOnEdge(usize, usize),
    #[error("hull has affine dimension 0")]
    DegenerateHull,
    #[error("an angle at an apex involves a zero-length edge")]
    ZeroLengthEdge,
    #[error("no admissible tube radius delta exists")]
    NoFeasibleDelta,
    #[error("admissible bound C = {0} is not positive")]
    NonPositiveC(f64),
    #[error("gamma must be positive and finite, got {0}")]
    BadGamma(f64),
    #[error("epsilon must be nonnegative, got {0}")]
    NegativeEpsilon(f64),
    #[error("instance needs exactly 6 points in 3-space")]
    Shape,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

fn f64_of<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn span<T: Real>(points: &[Vec3<T>]) -> T {
    let mut s = T::zero();
    for a in points {
        for b in points {
            s = s.max(dist(*a, *b));
        }
    }
    s
}

/// Intersection points certified by [`validate_conditions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossings<T> {
    /// Where the diagonals `(x1,x3)` and `(x2,x4)` cross.
    pub diagonal: Vec3<T>,
    /// Where `(x5,x6)` crosses the quadrilateral interior.
    pub apex_segment: Vec3<T>,
}

/// Checks the two defining incidence conditions: the open diagonals of
/// `x1..x4` meet in exactly one point, and the open segment `(x5,x6)` meets
/// the quadrilateral `conv(x1..x4)` in exactly one point off all six
/// segments `[xi,xj]`.
pub fn validate_conditions<T: Real>(points: &[Vec3<T>; 6]) -> Result<Crossings<T>, LebedevaError> {
    let tol = T::lit(INCIDENCE_TOL) * span(points).max(T::min_positive_value());
    for i in 0..6 {
        for j in (i + 1)..6 {
            if dist(points[i], points[j]) <= tol {
                return Err(LebedevaError::NotDistinct(i, j));
            }
        }
    }
    let [x1, x2, x3, x4, x5, x6] = *points;

    let d13 = sub(x3, x1);
    let d24 = sub(x4, x2);
    let normal = cross(d13, d24);
    if norm(normal) <= tol * (norm(d13) + norm(d24)) {
        // Parallel diagonals: collinear overlap or disjoint.
        let (_, _, gap) = geometry::segment_closest(x1, x3, x2, x4);
        return Err(if gap <= tol { LebedevaError::DiagonalsOverlap } else { LebedevaError::NotConvexPosition });
    }
    let unit = scale(normal, T::one() / norm(normal));
    let height = |p: Vec3<T>| dot(unit, sub(p, x1));
    if height(x2).abs() > tol || height(x3).abs() > tol || height(x4).abs() > tol {
        return Err(LebedevaError::NotConvexPosition);
    }
    let (s, t, gap) = geometry::segment_closest(x1, x3, x2, x4);
    let interior = |u: T| u * norm(d13).max(norm(d24)) > tol && (T::one() - u) * norm(d13).max(norm(d24)) > tol;
    if gap > tol || !interior(s) || !interior(t) {
        return Err(LebedevaError::DiagonalsDisjoint);
    }
    let diagonal = lerp(x1, x3, s);

    let (h5, h6) = (height(x5), height(x6));
    if h5.abs() <= tol && h6.abs() <= tol {
        return Err(LebedevaError::SegmentInPlane);
    }
    if !(h5 * h6 < T::zero()) || h5.abs() <= tol || h6.abs() <= tol {
        return Err(LebedevaError::CrossingCount(0));
    }
    let crossing = lerp(x5, x6, h5 / (h5 - h6));

    // Diagonals crossing makes x1 x2 x3 x4 the cyclic order of a convex
    // quadrilateral; inside means left of every directed edge.
    let quad = [x1, x2, x3, x4];
    let side = |k: usize| dot(unit, cross(sub(quad[(k + 1) % 4], quad[k]), sub(crossing, quad[k])));
    let sides: Vec<T> = (0..4).map(side).collect();
    let scaled_tol = tol * span(&quad);
    let all_pos = sides.iter().all(|&v| v >= -scaled_tol);
    let all_neg = sides.iter().all(|&v| v <= scaled_tol);
    if !(all_pos || all_neg) {
        return Err(LebedevaError::CrossingCount(0));
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            if geometry::point_segment_distance(crossing, points[i], points[j]) <= tol {
                return Err(LebedevaError::CrossingOnEdge(i, j));
            }
        }
    }
    Ok(Crossings { diagonal, apex_segment: crossing })
}

/// `h` and `H`: the smallest and largest distances from each apex to the
/// hull of the other five points, minimized (resp. maximized) over the two
/// apexes.
pub fn compute_h_big_h<T: Real>(points: &[Vec3<T>; 6]) -> Result<(T, T), LebedevaError> {
    let mut h = T::infinity();
    let mut big_h = T::zero();
    for apex in [A5, A6] {
        let others: Vec<Vec3<T>> = (0..6).filter(|&k| k != apex).map(|k| points[k]).collect();
        if span(&others) == T::zero() {
            return Err(LebedevaError::DegenerateHull);
        }
        h = h.min(hull_projection(points[apex], &others).1);
        big_h = big_h.max(hull_max_distance(points[apex], &others));
    }
    Ok((h, big_h))
}

/// `θ`: the smallest of the eight angles `∠ x_k x5 x6` and `∠ x_k x6 x5`
/// over `k ∈ 1..4`.
pub fn compute_theta<T: Real>(points: &[Vec3<T>; 6]) -> Result<T, LebedevaError> {
    let mut theta = T::infinity();
    for k in 0..4 {
        for (apex, other) in [(A5, A6), (A6, A5)] {
            let a = geometry::angle(points[k], points[apex], points[other]).ok_or(LebedevaError::ZeroLengthEdge)?;
            theta = theta.min(a);
        }
    }
    Ok(theta)
}

/// Margins of the two tube certificates at a given `δ`; both must be
/// strictly positive for `δ` to be admissible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaCertificate<T> {
    /// `min_{i<j≤4} dist([x5,x6],[xi,xj]) − 2δ`.
    pub separation_margin: T,
    /// `min dist(y, [e, xi]) − 2δ` over apexes `e`, `i ≤ 4`, and `y` on
    /// `[x5,x6]` at distance at least `h/2 − δ` from `e`.
    pub endpoint_margin: T,
}

impl<T: Real> DeltaCertificate<T> {
    pub fn holds(&self) -> bool {
        self.separation_margin > T::zero() && self.endpoint_margin > T::zero()
    }

    pub fn holds_weakly(&self) -> bool {
        self.separation_margin >= T::zero() && self.endpoint_margin >= T::zero()
    }
}

/// Smallest distance from `[x5,x6]` to a segment between two of `x1..x4`.
pub fn apex_segment_separation<T: Real>(points: &[Vec3<T>; 6]) -> T {
    let mut m = T::infinity();
    for i in 0..4 {
        for j in (i + 1)..4 {
            m = m.min(geometry::segment_distance(points[A5], points[A6], points[i], points[j]));
        }
    }
    m
}

/// Evaluates both tube certificates at `delta`.
///
/// The second one is a sufficient condition for the tube around `[x5,x6]`
/// to meet the tube around `[e, xi]` only inside the ball `B(e, h/2)`: a
/// common point `u` has `y1 ∈ [x5,x6]` and `y2 ∈ [e,xi]` within `δ`, so
/// `dist(y1, [e,xi]) < 2δ`, which the certificate forces to imply
/// `‖y1 − e‖ < h/2 − δ` and hence `‖u − e‖ < h/2`.
pub fn delta_certificate<T: Real>(points: &[Vec3<T>; 6], h: T, delta: T) -> DeltaCertificate<T> {
    let two = T::lit(2.0);
    let separation_margin = apex_segment_separation(points) - two * delta;
    let len = dist(points[A5], points[A6]);
    let cut = ((h / two - delta) / len).max(T::zero()).min(T::one());
    let mut endpoint = T::infinity();
    for (apex, other) in [(A5, A6), (A6, A5)] {
        let start = lerp(points[apex], points[other], cut);
        for i in 0..4 {
            endpoint = endpoint.min(geometry::segment_distance(start, points[other], points[apex], points[i]));
        }
    }
    DeltaCertificate { separation_margin, endpoint_margin: endpoint - two * delta }
}

/// A certified tube radius `δ ∈ (0, h/2)`: the supremum of the weakly
/// feasible radii, found by bisection, times [`DELTA_SAFETY`]. Feasibility is
/// monotone in `δ`, so every radius below the supremum is feasible.
pub fn compute_delta<T: Real>(points: &[Vec3<T>; 6], h: T) -> Result<T, LebedevaError> {
    let half_h = h / T::lit(2.0);
    let feasible = |d: T| delta_certificate(points, h, d).holds_weakly();
    let probe = h * T::lit(1e-12);
    if !(h > T::zero()) || !feasible(probe) {
        return Err(LebedevaError::NoFeasibleDelta);
    }
    let sup = if feasible(half_h) {
        half_h
    } else {
        let (mut lo, mut hi) = (probe, half_h);
        for _ in 0..BISECTION_STEPS {
            let mid = (lo + hi) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let delta = sup * T::lit(DELTA_SAFETY);
    if !delta_certificate(points, h, delta).holds() {
        return Err(LebedevaError::NoFeasibleDelta);
    }
    Ok(delta)
}

/// `f(ε) = (D + ε)² − D²`.
pub fn f_perturbation<T: Real>(d56: T, eps: T) -> T {
    (d56 + eps).powi(2) - d56.powi(2)
}

/// Inverse of [`f_perturbation`]: `√(D² + y) − D`.
pub fn f_inv<T: Real>(d56: T, y: T) -> T {
    // Rationalized form of √(D² + y) − D, stable for small y.
    y / ((d56 * d56 + y).sqrt() + d56)
}

/// `c = min{ h⁴ sin²(θ/2) / ((1+γ)² D H), γ² D H, h²/4 }`.
pub fn compute_c<T: Real>(h: T, big_h: T, theta: T, gamma: T, d56: T) -> T {
    let one = T::one();
    let s2 = (theta / T::lit(2.0)).sin().powi(2);
    let t1 = h.powi(4) * s2 / ((one + gamma).powi(2) * d56 * big_h);
    let t2 = gamma.powi(2) * d56 * big_h;
    let t3 = h.powi(2) / T::lit(4.0);
    t1.min(t2).min(t3)
}

/// The four `f⁻¹` terms whose minimum is `C`, and that minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleBound<T> {
    pub terms: [T; 4],
    pub value: T,
}

/// `C = min{ f⁻¹(δ²/2), f⁻¹(hγ²D²/((1+γ)D−h)), f⁻¹(h sin²(θ/2) D²/((1+γ)D−h)), f⁻¹(ch/(2(1+γ)D)) }`.
pub fn compute_big_c<T: Real>(
    h: T,
    theta: T,
    delta: T,
    gamma: T,
    d56: T,
    c: T,
) -> Result<AdmissibleBound<T>, LebedevaError> {
    let one = T::one();
    let two = T::lit(2.0);
    let denom = (one + gamma) * d56 - h;
    let s2 = (theta / two).sin().powi(2);
    let args = [
        delta * delta / two,
        h * gamma.powi(2) * d56.powi(2) / denom,
        h * s2 * d56.powi(2) / denom,
        c * h / (two * (one + gamma) * d56),
    ];
    if !(denom > T::zero()) || args.iter().any(|&a| !(a > T::zero())) {
        return Err(LebedevaError::NonPositiveC(f64_of(denom.min(args.iter().fold(T::infinity(), |m, &a| m.min(a))))));
    }
    let terms = args.map(|a| f_inv(d56, a));
    let value = terms.iter().fold(T::infinity(), |m, &v| m.min(v));
    if !(value > T::zero()) {
        return Err(LebedevaError::NonPositiveC(f64_of(value)));
    }
    Ok(AdmissibleBound { terms, value })
}

/// `d_ε`: Euclidean distances with `d(x5, x6)` increased by `ε`.
pub fn build_metric<T: Real>(points: &[Vec3<T>; 6], epsilon: T) -> Result<SemimetricSpace<T>, LebedevaError> {
    if !(epsilon >= T::zero()) {
        return Err(LebedevaError::NegativeEpsilon(f64_of(epsilon)));
    }
    let cloud = PointCloud::new(points.iter().map(|p| p.to_vec()).collect())?;
    let base = SemimetricSpace::from_points(&cloud);
    Ok(base.with_distance(A5, A6, base.d(A5, A6) + epsilon)?)
}

/// A validated configuration with every derived constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LebedevaInstance<T> {
    pub points: [Vec3<T>; 6],
    pub gamma: T,
    pub h: T,
    pub big_h: T,
    pub theta: T,
    pub delta: T,
    pub c: T,
    pub bound: AdmissibleBound<T>,
    pub crossings: Crossings<T>,
    /// `‖x5 − x6‖`.
    pub d56: T,
}

impl<T: Real> LebedevaInstance<T> {
    pub fn new(points: [Vec3<T>; 6], gamma: T) -> Result<Self, LebedevaError> {
        if !(gamma > T::zero() && gamma.is_finite()) {
            return Err(LebedevaError::BadGamma(f64_of(gamma)));
        }
        let crossings = validate_conditions(&points)?;
        let (h, big_h) = compute_h_big_h(&points)?;
        let theta = compute_theta(&points)?;
        let delta = compute_delta(&points, h)?;
        let d56 = dist(points[A5], points[A6]);
        let c = compute_c(h, big_h, theta, gamma, d56);
        let bound = compute_big_c(h, theta, delta, gamma, d56, c)?;
        debug_assert!(d56 >= T::lit(2.0) * h * (T::one() - T::lit(1e-12)));
        Ok(Self { points, gamma, h, big_h, theta, delta, c, bound, crossings, d56 })
    }

    /// Octahedron with square equator `(±1,0,0), (0,±1,0)`, apexes
    /// `(0,0,1)` and `(0.1,0.17,−1)`, and `γ = 1`.
    pub fn default_instance() -> Self {
        Self::new(default_points(), T::one()).expect("default configuration satisfies both incidence conditions")
    }

    /// The admissible perturbation bound `C`.
    pub fn big_c(&self) -> T {
        self.bound.value
    }

    pub fn metric(&self, epsilon: T) -> Result<SemimetricSpace<T>, LebedevaError> {
        build_metric(&self.points, epsilon)
    }

    /// Rebuilds the instance for each `γ = 2^k`, `k = −6..=6`, and returns
    /// the one with the largest `C`.
    pub fn best_gamma(points: [Vec3<T>; 6]) -> Result<Self, LebedevaError> {
        let mut best: Option<Self> = None;
        for k in -6..=6 {
            let inst = Self::new(points, T::lit(2f64.powi(k)))?;
            if best.as_ref().is_none_or(|b| inst.big_c() > b.big_c()) {
                best = Some(inst);
            }
        }
        Ok(best.expect("grid is nonempty"))
    }
}

pub fn default_points<T: Real>() -> [Vec3<T>; 6] {
    let l = |x: f64, y: f64, z: f64| [T::lit(x), T::lit(y), T::lit(z)];
    [l(1.0, 0.0, 0.0), l(0.0, 1.0, 0.0), l(-1.0, 0.0, 0.0), l(0.0, -1.0, 0.0), l(0.0, 0.0, 1.0), l(0.1, 0.17, -1.0)]
}
