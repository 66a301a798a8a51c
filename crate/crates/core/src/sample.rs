//! Seed-deterministic random instances: point clouds, simplex weights,
//! couplings, (A, B) plans and random semimetrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ann::{AbPlan, AnnPlan};
use crate::metric::{PointCloud, SemimetricSpace};
use crate::scalar::{Real, Scalar};

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> InstanceRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Flat Dirichlet sample (normalized unit exponentials).
pub fn simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Like [`simplex`], but each coordinate is zeroed with probability
/// `zero_prob` (at least one coordinate survives).
pub fn sparse_simplex<R: Rng>(rng: &mut R, n: usize, zero_prob: f64) -> Vec<f64> {
    let keep = rng.random_range(0..n);
    let mut e: Vec<f64> = (0..n)
        .map(|i| if i != keep && rng.random::<f64>() < zero_prob { 0.0 } else { -(1.0 - rng.random::<f64>()).ln() })
        .collect();
    if e[keep] == 0.0 {
        e[keep] = 1.0;
    }
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Coordinates uniform in `[-1, 1]`.
pub fn cloud<T: Real, R: Rng>(rng: &mut R, m: usize, dim: usize) -> PointCloud<T> {
    let pts = (0..m).map(|_| (0..dim).map(|_| T::lit(rng.random_range(-1.0..=1.0))).collect()).collect();
    PointCloud::new(pts).expect("nonempty cloud with uniform dimension")
}

fn lift<T: Scalar>(xs: Vec<f64>) -> Vec<T> {
    xs.into_iter().map(T::lit).collect()
}

/// Random coupling whose row `i` is `p_i + q_i` times a random simplex row.
pub fn coupling<R: Rng>(rng: &mut R, p: &[f64], q: &[f64], zero_prob: f64) -> Vec<Vec<f64>> {
    let n = p.len();
    (0..n)
        .map(|i| sparse_simplex(rng, n, zero_prob).into_iter().map(|x| x * (p[i] + q[i])).collect())
        .collect()
}

/// Random ANN plan on `n` slots. The sparsity knob zeroes weights and
/// coupling entries so that boundary cases are exercised.
pub fn ann_plan<T: Scalar, R: Rng>(rng: &mut R, n: usize, zero_prob: f64) -> AnnPlan<T> {
    let p = sparse_simplex(rng, n, zero_prob);
    let q = sparse_simplex(rng, n, zero_prob);
    let pi = coupling(rng, &p, &q, zero_prob);
    AnnPlan::new(lift(p), lift(q), pi.into_iter().map(lift).collect()).expect("sampled plan satisfies its marginals")
}

/// Random valid (A, B) plan on `n` slots.
///
/// The constraint forces `rowsum(A)_i = p_i + κ` and `colsum(B)_j = q_j - κ`
/// for a single shift `κ ∈ [-min p, min q]`.
pub fn ab_plan<T: Scalar, R: Rng>(rng: &mut R, n: usize, zero_prob: f64) -> AbPlan<T> {
    let p = sparse_simplex(rng, n, zero_prob);
    let q = sparse_simplex(rng, n, zero_prob);
    let lo = -p.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = q.iter().cloned().fold(f64::INFINITY, f64::min);
    let kappa = lo + (hi - lo) * rng.random::<f64>();
    let row_a: Vec<f64> = p.iter().map(|&x| (x + kappa).max(0.0)).collect();
    let col_b: Vec<f64> = q.iter().map(|&x| (x - kappa).max(0.0)).collect();
    let a: Vec<Vec<f64>> =
        row_a.iter().map(|&r| sparse_simplex(rng, n, zero_prob).into_iter().map(|x| x * r).collect()).collect();
    let mut b = vec![vec![0.0; n]; n];
    for (j, &c) in col_b.iter().enumerate() {
        for (s, x) in sparse_simplex(rng, n, zero_prob).into_iter().enumerate() {
            b[s][j] = x * c;
        }
    }
    AbPlan::new(lift(p), lift(q), a.into_iter().map(lift).collect(), b.into_iter().map(lift).collect())
        .expect("sampled (A, B) plan satisfies its marginals")
}

/// Random symmetric matrix with entries in `(0, 1]`; usually not a metric.
pub fn semimetric<T: Scalar, R: Rng>(rng: &mut R, n: usize) -> SemimetricSpace<T> {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 1.0 - rng.random::<f64>();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    SemimetricSpace::new(d.into_iter().map(lift).collect()).expect("symmetric zero-diagonal matrix")
}

/// Random metric: shortest-path closure of a random complete weighted graph.
pub fn metric<T: Scalar, R: Rng>(rng: &mut R, n: usize) -> SemimetricSpace<T> {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.1 + rng.random::<f64>();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    SemimetricSpace::new(d.into_iter().map(lift).collect()).expect("closure is symmetric with zero diagonal")
}
