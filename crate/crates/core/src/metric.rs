//! Finite semimetric spaces, quadratic forms over them, Euclidean point
//! clouds, and triangle-inequality auditing.
//!
//! Point labels are 0-based throughout the library. Reports and error
//! messages shown to users print them 1-based.

use std::fmt;

use thiserror::Error;

use crate::scalar::{Real, Scalar};

/// Slack above which `d(i,j) > d(i,k) + d(k,j)` counts as a violation.
pub const TRIANGLE_SLACK: f64 = 1e-12;

/// One violated invariant of a candidate distance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Empty,
    NonSquare { row: usize, len: usize, expected: usize },
    NegativeEntry(usize, usize),
    NonzeroDiagonal(usize),
    /// Reported once per unordered pair, with `i < j`.
    Asymmetric(usize, usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Empty => write!(f, "matrix has no rows"),
            Violation::NonSquare { row, len, expected } => {
                write!(f, "row {} has {} entries, expected {}", row + 1, len, expected)
            }
            Violation::NegativeEntry(i, j) => write!(f, "negative entry at ({}, {})", i + 1, j + 1),
            Violation::NonzeroDiagonal(i) => write!(f, "nonzero diagonal at {}", i + 1),
            Violation::Asymmetric(i, j) => write!(f, "d({0},{1}) != d({1},{0})", i + 1, j + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("invalid semimetric: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {label} out of range for a {n}-point space")]
    LabelOutOfRange { label: usize, n: usize },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point {index} has {got} coordinates, expected {expected}")]
    RaggedPoint { index: usize, got: usize, expected: usize },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Symmetric, nonnegative distance matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SemimetricSpace<T> {
    n: usize,
    d: Vec<T>,
}

impl<T: Scalar> SemimetricSpace<T> {
    /// Validates a full square matrix. Every violated invariant is reported;
    /// entries are compared exactly as stored.
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self, MetricError> {
        let n = rows.len();
        let mut violations = Vec::new();
        if n == 0 {
            violations.push(Violation::Empty);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                violations.push(Violation::NonSquare { row, len: r.len(), expected: n });
            }
        }
        if !violations.is_empty() {
            return Err(MetricError::Invalid(violations));
        }
        let zero = T::zero();
        for i in 0..n {
            for j in 0..n {
                // `!(x >= 0)` also catches NaN.
                if !(rows[i][j] >= zero) {
                    violations.push(Violation::NegativeEntry(i, j));
                }
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if r[i] != zero {
                violations.push(Violation::NonzeroDiagonal(i));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rows[i][j] != rows[j][i] {
                    violations.push(Violation::Asymmetric(i, j));
                }
            }
        }
        if !violations.is_empty() {
            return Err(MetricError::Invalid(violations));
        }
        Ok(Self { n, d: rows.into_iter().flatten().collect() })
    }

    /// Builds a space from the upper triangle of a square matrix, mirroring
    /// it onto the lower triangle. Entries below the diagonal are ignored.
    pub fn from_upper_triangle(mut rows: Vec<Vec<T>>) -> Result<Self, MetricError> {
        let n = rows.len();
        if rows.iter().all(|r| r.len() == n) {
            for i in 0..n {
                for j in (i + 1)..n {
                    rows[j][i] = rows[i][j];
                }
            }
        }
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> T {
        self.d[i * self.n + j]
    }

    #[inline]
    pub fn d2(&self, i: usize, j: usize) -> T {
        self.d(i, j).sq()
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.d.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Row-major matrix of squared distances.
    pub fn squared(&self) -> Vec<T> {
        self.d.iter().map(|&x| x.sq()).collect()
    }

    /// Returns a copy with `d(i,j) = d(j,i)` replaced by `value`.
    pub fn with_distance(&self, i: usize, j: usize, value: T) -> Result<Self, MetricError> {
        let mut rows = self.rows();
        rows[i][j] = value;
        rows[j][i] = value;
        Self::new(rows)
    }

    /// Every ordered triple violating the triangle inequality by more than
    /// [`TRIANGLE_SLACK`].
    pub fn check_triangle(&self) -> Vec<TriangleViolation<T>> {
        let tol = T::lit(TRIANGLE_SLACK);
        let n = self.n;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let slack = self.d(i, j) - self.d(i, k) - self.d(k, j);
                    if slack > tol {
                        out.push(TriangleViolation { i, j, k, slack });
                    }
                }
            }
        }
        out
    }
}

impl<T: Real> SemimetricSpace<T> {
    /// Euclidean distances between the points of a cloud.
    pub fn from_points(cloud: &PointCloud<T>) -> Self {
        let n = cloud.len();
        let mut d = vec![T::zero(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = euclidean(cloud.point(i), cloud.point(j));
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }
}

/// `d(i,j) - d(i,k) - d(k,j) > 0` for the witnessing triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleViolation<T> {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub slack: T,
}

pub fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y).sq()).sqrt()
}

/// Coefficient matrix `a` of the form `Σ a_ij d(x_i, x_j)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm<T> {
    n: usize,
    a: Vec<T>,
}

impl<T: Scalar> QuadraticForm<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self, MetricError> {
        let n = rows.len();
        for r in &rows {
            if r.len() != n {
                return Err(MetricError::DimensionMismatch { expected: n, got: r.len() });
            }
        }
        Ok(Self { n, a: rows.into_iter().flatten().collect() })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![T::zero(); n * n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coef(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    pub fn add_coef(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] += v;
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Result<Self, MetricError> {
        if self.n != other.n {
            return Err(MetricError::DimensionMismatch { expected: self.n, got: other.n });
        }
        let a = self.a.iter().zip(&other.a).map(|(&x, &y)| alpha * x + beta * y).collect();
        Ok(Self { n: self.n, a })
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut a = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                a[j * n + i] = self.a[i * n + j];
            }
        }
        Self { n, a }
    }

    /// `Σ_i Σ_j a_ij d(x_asg[i], x_asg[j])²`.
    pub fn evaluate(&self, space: &SemimetricSpace<T>, asg: &Assignment) -> Result<T, MetricError> {
        if asg.len() != self.n {
            return Err(MetricError::DimensionMismatch { expected: self.n, got: asg.len() });
        }
        asg.check_range(space.len())?;
        let mut total = T::zero();
        for (i, &xi) in asg.indices().iter().enumerate() {
            for (j, &xj) in asg.indices().iter().enumerate() {
                total += self.coef(i, j) * space.d2(xi, xj);
            }
        }
        Ok(total)
    }
}

/// Map from slots `0..m` to point labels of a space; repetition allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    indices: Vec<usize>,
}

impl Assignment {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self, MetricError> {
        let a = Self { indices };
        a.check_range(n)?;
        Ok(a)
    }

    pub fn identity(n: usize) -> Self {
        Self { indices: (0..n).collect() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `self ∘ phi`: slot `i` maps to `self[phi[i]]`.
    pub fn compose(&self, phi: &[usize]) -> Result<Self, MetricError> {
        let indices = phi
            .iter()
            .map(|&k| {
                self.indices
                    .get(k)
                    .copied()
                    .ok_or(MetricError::LabelOutOfRange { label: k, n: self.indices.len() })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { indices })
    }

    pub(crate) fn check_range(&self, n: usize) -> Result<(), MetricError> {
        match self.indices.iter().find(|&&i| i >= n) {
            Some(&label) => Err(MetricError::LabelOutOfRange { label, n }),
            None => Ok(()),
        }
    }
}

/// Points in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    dim: usize,
    points: Vec<Vec<T>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Vec<T>>) -> Result<Self, MetricError> {
        let dim = points.first().map(Vec::len).ok_or(MetricError::EmptyCloud)?;
        if dim == 0 {
            return Err(MetricError::RaggedPoint { index: 0, got: 0, expected: 1 });
        }
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(MetricError::RaggedPoint { index, got: p.len(), expected: dim });
            }
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_rational::Rational64;

    pub(crate) fn c4() -> SemimetricSpace<f64> {
        SemimetricSpace::new(vec![
            vec![0.0, 1.0, 2.0, 1.0],
            vec![1.0, 0.0, 1.0, 2.0],
            vec![2.0, 1.0, 0.0, 1.0],
            vec![1.0, 2.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn validate_examples() {
        let one = SemimetricSpace::new(vec![vec![0.0]]).unwrap();
        assert_eq!(one.len(), 1);
        let two = SemimetricSpace::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(two.d(0, 1), 1.0);
        let err = SemimetricSpace::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap_err();
        assert_eq!(err, MetricError::Invalid(vec![Violation::Asymmetric(0, 1)]));
        assert!(err.to_string().contains("d(1,2)"));
    }

    #[test]
    fn validate_lists_every_violation() {
        let err = SemimetricSpace::new(vec![vec![1.0, -1.0], vec![2.0, 0.0]]).unwrap_err();
        assert_eq!(
            err,
            MetricError::Invalid(vec![
                Violation::NegativeEntry(0, 1),
                Violation::NonzeroDiagonal(0),
                Violation::Asymmetric(0, 1),
            ])
        );
        let err = SemimetricSpace::new(vec![vec![0.0, 1.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, MetricError::Invalid(v) if v[0] == Violation::NonSquare { row: 1, len: 1, expected: 2 }));
        let err = SemimetricSpace::<f64>::new(vec![]).unwrap_err();
        assert_eq!(err, MetricError::Invalid(vec![Violation::Empty]));
        let err = SemimetricSpace::new(vec![vec![0.0, f64::NAN], vec![f64::NAN, 0.0]]).unwrap_err();
        assert!(matches!(err, MetricError::Invalid(v) if v.contains(&Violation::NegativeEntry(0, 1))));
    }

    #[test]
    fn upper_triangle_is_mirrored() {
        let s = SemimetricSpace::from_upper_triangle(vec![vec![0.0, 3.0], vec![99.0, 0.0]]).unwrap();
        assert_eq!(s.d(1, 0), 3.0);
    }

    #[test]
    fn triangle_c4_is_metric() {
        // Exhaustive over all 4^3 ordered triples.
        let s = c4();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    assert!(s.d(i, j) <= s.d(i, k) + s.d(k, j));
                }
            }
        }
        assert!(s.check_triangle().is_empty());
    }

    #[test]
    fn triangle_violation_reported_with_slack() {
        let s = SemimetricSpace::new(vec![
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 1.0],
            vec![3.0, 1.0, 0.0],
        ])
        .unwrap();
        let v = s.check_triangle();
        assert!(v.contains(&TriangleViolation { i: 0, j: 2, k: 1, slack: 1.0 }));
        assert!(v.contains(&TriangleViolation { i: 2, j: 0, k: 1, slack: 1.0 }));
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn from_points_examples() {
        let line = PointCloud::new(vec![vec![0.0], vec![3.0]]).unwrap();
        assert_eq!(SemimetricSpace::from_points(&line).rows(), vec![vec![0.0, 3.0], vec![3.0, 0.0]]);
        let square =
            PointCloud::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let s = SemimetricSpace::from_points(&square);
        assert_eq!(s.d(0, 1), 1.0);
        assert_eq!(s.d(1, 2), 1.0);
        assert_relative_eq!(s.d(0, 2), 2f64.sqrt());
        assert!(s.check_triangle().is_empty());
    }

    #[test]
    fn cloud_errors() {
        assert_eq!(PointCloud::<f64>::new(vec![]).unwrap_err(), MetricError::EmptyCloud);
        assert_eq!(
            PointCloud::new(vec![vec![0.0, 1.0], vec![1.0]]).unwrap_err(),
            MetricError::RaggedPoint { index: 1, got: 1, expected: 2 }
        );
    }

    #[test]
    fn quadratic_form_examples() {
        let s = SemimetricSpace::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let asg = Assignment::identity(2);
        assert_eq!(QuadraticForm::zeros(2).evaluate(&s, &asg).unwrap(), 0.0);
        let a = QuadraticForm::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(a.evaluate(&s, &asg).unwrap(), 1.0);
        assert_eq!(
            a.evaluate(&s, &Assignment::identity(3)).unwrap_err(),
            MetricError::DimensionMismatch { expected: 2, got: 3 }
        );
    }

    #[test]
    fn boxtimes_half_half_as_quadratic_form_on_c4() {
        // Expansion of the ⊠ expression at s = t = 1/2 on (x,y,z,w) = (1,2,3,4):
        // 1/4 on each cycle edge, -1/4 on each diagonal.
        let mut a = QuadraticForm::zeros(4);
        for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            a.add_coef(i, j, 0.25);
        }
        a.add_coef(0, 2, -0.25);
        a.add_coef(1, 3, -0.25);
        assert_eq!(a.evaluate(&c4(), &Assignment::identity(4)).unwrap(), -1.0);
    }

    #[test]
    fn exact_rational_evaluation() {
        let r = Rational64::from_integer;
        let s = SemimetricSpace::new(vec![vec![r(0), r(2)], vec![r(2), r(0)]]).unwrap();
        let a = QuadraticForm::new(vec![vec![r(0), Rational64::new(1, 3)], vec![r(0), r(0)]]).unwrap();
        assert_eq!(a.evaluate(&s, &Assignment::identity(2)).unwrap(), Rational64::new(4, 3));
    }

    #[test]
    fn assignment_ranges_and_compose() {
        assert_eq!(
            Assignment::new(vec![0, 5], 3).unwrap_err(),
            MetricError::LabelOutOfRange { label: 5, n: 3 }
        );
        let a = Assignment::new(vec![2, 0, 1], 3).unwrap();
        assert_eq!(a.compose(&[0, 0, 2]).unwrap().indices(), &[2, 2, 1]);
    }
}
