//! Small exact-arithmetic geometry in 3-space: segment distances, projection
//! onto convex hulls by face enumeration, and angles.

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];

#[inline]
pub fn sub<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale<T: Real>(a: Vec3<T>, k: T) -> Vec3<T> {
    [a[0] * k, a[1] * k, a[2] * k]
}

#[inline]
pub fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    norm(sub(a, b))
}

/// `a + u (b - a)`.
#[inline]
pub fn lerp<T: Real>(a: Vec3<T>, b: Vec3<T>, u: T) -> Vec3<T> {
    add(a, scale(sub(b, a), u))
}

fn clamp01<T: Real>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

/// Closest points of segments `[p0, p1]` and `[q0, q1]`, as parameters
/// `(s, t)` along each, and their distance.
pub fn segment_closest<T: Real>(p0: Vec3<T>, p1: Vec3<T>, q0: Vec3<T>, q1: Vec3<T>) -> (T, T, T) {
    let zero = T::zero();
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let a = dot(d1, d1);
    let e = dot(d2, d2);
    let f = dot(d2, r);
    let (s, t);
    if a == zero && e == zero {
        s = zero;
        t = zero;
    } else if a == zero {
        s = zero;
        t = clamp01(f / e);
    } else {
        let c = dot(d1, r);
        if e == zero {
            t = zero;
            s = clamp01(-c / a);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let s0 = if denom > zero { clamp01((b * f - c * e) / denom) } else { zero };
            let t0 = (b * s0 + f) / e;
            if t0 < zero {
                t = zero;
                s = clamp01(-c / a);
            } else if t0 > T::one() {
                t = T::one();
                s = clamp01((b - c) / a);
            } else {
                t = t0;
                s = s0;
            }
        }
    }
    let gap = dist(lerp(p0, p1, s), lerp(q0, q1, t));
    (s, t, gap)
}

pub fn segment_distance<T: Real>(p0: Vec3<T>, p1: Vec3<T>, q0: Vec3<T>, q1: Vec3<T>) -> T {
    segment_closest(p0, p1, q0, q1).2
}

pub fn point_segment_distance<T: Real>(x: Vec3<T>, a: Vec3<T>, b: Vec3<T>) -> T {
    segment_distance(x, x, a, b)
}

/// Solves `m x = rhs` for `k ≤ 4` by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot falls below `tiny`.
fn solve_small<T: Real>(mut m: [[T; 4]; 4], mut rhs: [T; 4], k: usize, tiny: T) -> Option<[T; 4]> {
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if !(m[piv][col].abs() > tiny) {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in (col + 1)..k {
            let f = m[row][col] / m[col][col];
            for c in col..k {
                let v = m[col][c];
                m[row][c] -= f * v;
            }
            let v = rhs[col];
            rhs[row] -= f * v;
        }
    }
    let mut x = [T::zero(); 4];
    for row in (0..k).rev() {
        let mut acc = rhs[row];
        for c in (row + 1)..k {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Nearest point of `conv(vertices)` to `x` and its distance.
///
/// Enumerates every nonempty vertex subset, projects onto the affine hull
/// of the affinely independent ones, and keeps projections whose
/// barycentric coordinates are nonnegative. The nearest point lies in the
/// relative interior of some face, so the minimum over the kept projections
/// is exact.
pub fn hull_projection<T: Real>(x: Vec3<T>, vertices: &[Vec3<T>]) -> (Vec3<T>, T) {
    let m = vertices.len();
    assert!((1..=16).contains(&m), "hull projection supports 1 to 16 vertices");
    let span = vertices.iter().flat_map(|a| vertices.iter().map(move |b| dist(*a, *b))).fold(T::zero(), T::max);
    let tiny = T::lit(1e-12) * span.max(T::one()).powi(2);
    let bary_tol = T::lit(-1e-12);
    let mut best = (vertices[0], dist(x, vertices[0]));
    for mask in 1u32..(1 << m) {
        let subset: Vec<Vec3<T>> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| vertices[i]).collect();
        let k = subset.len() - 1;
        if k > 3 {
            // More than four points in 3-space are affinely dependent.
            continue;
        }
        let base = subset[0];
        let edges: Vec<Vec3<T>> = subset[1..].iter().map(|&v| sub(v, base)).collect();
        let rel = sub(x, base);
        let mut gram = [[T::zero(); 4]; 4];
        let mut rhs = [T::zero(); 4];
        for a in 0..k {
            for b in 0..k {
                gram[a][b] = dot(edges[a], edges[b]);
            }
            rhs[a] = dot(edges[a], rel);
        }
        let Some(lam) = solve_small(gram, rhs, k, tiny) else { continue };
        let lam0 = T::one() - lam[..k].iter().fold(T::zero(), |acc, &v| acc + v);
        if lam0 < bary_tol || lam[..k].iter().any(|&v| v < bary_tol) {
            continue;
        }
        let y = (0..k).fold(base, |acc, a| add(acc, scale(edges[a], lam[a])));
        let d = dist(x, y);
        if d < best.1 {
            best = (y, d);
        }
    }
    best
}

/// Largest distance from `x` to `conv(vertices)`, attained at a vertex.
pub fn hull_max_distance<T: Real>(x: Vec3<T>, vertices: &[Vec3<T>]) -> T {
    vertices.iter().map(|&v| dist(x, v)).fold(T::zero(), T::max)
}

/// Interior angle at `apex` of the triangle `(a, apex, b)`, or `None` when
/// an edge at the apex has zero length.
pub fn angle<T: Real>(a: Vec3<T>, apex: Vec3<T>, b: Vec3<T>) -> Option<T> {
    let u = sub(a, apex);
    let v = sub(b, apex);
    let nu = norm(u);
    let nv = norm(v);
    if nu == T::zero() || nv == T::zero() {
        return None;
    }
    let c = (dot(u, v) / (nu * nv)).max(-T::one()).min(T::one());
    Some(c.acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use rand::Rng;
    use std::f64::consts::FRAC_PI_4;

    fn rand_pt<R: Rng>(r: &mut R) -> Vec3<f64> {
        [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]
    }

    fn sampled_segment_distance(p0: Vec3<f64>, p1: Vec3<f64>, q0: Vec3<f64>, q1: Vec3<f64>) -> f64 {
        let k = 400;
        let mut best = f64::INFINITY;
        for i in 0..=k {
            let a = lerp(p0, p1, i as f64 / k as f64);
            for j in 0..=k {
                best = best.min(dist(a, lerp(q0, q1, j as f64 / k as f64)));
            }
        }
        best
    }

    #[test]
    fn segment_distance_matches_sampling() {
        let mut r = sample::rng(5);
        for _ in 0..40 {
            let (p0, p1, q0, q1) = (rand_pt(&mut r), rand_pt(&mut r), rand_pt(&mut r), rand_pt(&mut r));
            let exact = segment_distance(p0, p1, q0, q1);
            let sampled = sampled_segment_distance(p0, p1, q0, q1);
            assert!(exact <= sampled + 1e-12);
            // Grid pitch 1/400 on segments of length < 3.5.
            assert!(sampled - exact < 1e-2, "{exact} {sampled}");
        }
    }

    #[test]
    fn segment_distance_special_cases() {
        let o = [0.0, 0.0, 0.0];
        // Crossing.
        assert_eq!(segment_distance([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 1.0, 0.0]), 0.0);
        // Parallel, offset.
        assert_eq!(segment_distance(o, [1.0, 0.0, 0.0], [0.0, 0.4, 0.0], [1.0, 0.4, 0.0]), 0.4);
        // Collinear, disjoint.
        assert_eq!(segment_distance(o, [1.0, 0.0, 0.0], [3.0, 0.0, 0.0], [4.0, 0.0, 0.0]), 2.0);
        // Degenerate to points.
        assert_eq!(segment_distance(o, o, [0.0, 3.0, 4.0], [0.0, 3.0, 4.0]), 5.0);
        assert_eq!(point_segment_distance([0.5, 1.0, 0.0], o, [1.0, 0.0, 0.0]), 1.0);
    }

    /// Projected gradient on barycentric weights; independent of the face
    /// enumeration.
    fn iterative_hull_distance(x: Vec3<f64>, v: &[Vec3<f64>]) -> f64 {
        let m = v.len();
        let mut w = vec![1.0 / m as f64; m];
        let point = |w: &[f64]| (0..m).fold([0.0; 3], |acc, i| add(acc, scale(v[i], w[i])));
        let lip: f64 = v.iter().map(|&a| dot(a, a)).sum::<f64>() * 2.0;
        for _ in 0..20000 {
            let y = point(&w);
            let g: Vec<f64> = (0..m).map(|i| 2.0 * dot(sub(y, x), v[i])).collect();
            let stepped: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - b / lip).collect();
            w = crate::search::project_simplex(&stepped, 1.0);
        }
        dist(x, point(&w))
    }

    #[test]
    fn hull_projection_matches_iterative_oracle() {
        let mut r = sample::rng(8);
        for _ in 0..30 {
            let verts: Vec<Vec3<f64>> = (0..5).map(|_| rand_pt(&mut r)).collect();
            let x = scale(rand_pt(&mut r), 2.0);
            let (_, exact) = hull_projection(x, &verts);
            let it = iterative_hull_distance(x, &verts);
            assert!(exact <= it + 1e-12);
            assert!(it - exact < 1e-6, "{exact} {it}");
        }
    }

    #[test]
    fn hull_projection_planar_and_collinear() {
        let sq = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
        let (y, d): (_, f64) = hull_projection([0.1, 0.2, 3.0], &sq);
        assert!((d - 3.0).abs() < 1e-15);
        assert!(dist(y, [0.1, 0.2, 0.0]) < 1e-15);
        let line = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let (_, d) = hull_projection([3.0, 4.0, 0.0], &line);
        assert!((d - 17f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn angle_examples() {
        let a = angle([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]).unwrap();
        assert!((a - FRAC_PI_4).abs() < 1e-15);
        assert!(angle([0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn max_distance_is_at_a_vertex() {
        let v = [[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert_eq!(hull_max_distance([-1.0, 0.0, 0.0], &v), 6.0);
    }
}
