//! The inner coupling problem: for row masses `r_i = p_i + q_i`, maximize
//! `V(r) = Σ_{i<j} D_ij mediant(π_ij, π_ji)` over `π ≥ 0` with row sums `r`.
//!
//! Writing `mediant(a, b) = min_λ (1−λ)² a + λ² b` and exchanging max and
//! min gives the convex dual
//!
//! ```text
//! V(r) = min { Σ_i r_i u_i² : u ≥ 0, u_i + u_j ≥ d_ij for all i ≠ j }
//! ```
//!
//! so every feasible `u` is an upper bound and every feasible `π` a lower
//! bound. Both solvers below stop on that certified gap. The default solver
//! runs exact coordinate ascent on the dual of the dual, a concave quadratic
//! in pair weights `w_ij ≥ 0` with `u_i = Σ_j w_ij / (2 r_i)` and
//! `π_ij = r_i w_ij / Σ_k w_ik`. The alternative is projected-gradient
//! ascent on `π` directly.

use serde::{Deserialize, Serialize};

use crate::ann::mediant;
use crate::scalar::Real;

use super::{project_simplex, SearchConfig, StepRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    /// Coordinate ascent on the pair-weight dual.
    #[default]
    Dual,
    /// Projected-gradient ascent on the coupling rows.
    ProjectedGradient,
}

/// Result of one inner coupling solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution<T> {
    /// Row-major `n × n` coupling with row sums `p_i + q_i`.
    pub pi: Vec<T>,
    /// `(1/2) Σ mediant(π_ij, π_ji) d²` at `pi`, the ANN left-hand side.
    pub lhs: T,
    /// Certified upper bound on the maximal left-hand side.
    pub upper_bound: T,
    /// `∂V/∂r_i` at the dual certificate (`u_i²`), used as the envelope
    /// gradient by the outer search.
    pub prices: Vec<T>,
    pub iterations: usize,
    /// `upper_bound − lhs` met the stopping tolerance.
    pub converged: bool,
    /// Solver state for warm starts (pair weights or coupling).
    pub(crate) state: Vec<T>,
}

/// Row masses and pulled-back distances of one inner problem.
pub(crate) struct Pairs<'a, T> {
    pub n: usize,
    /// Row-major distances.
    pub d: &'a [T],
    /// Row-major squared distances.
    pub d2: &'a [T],
    pub rows: Vec<T>,
}

impl<T: Real> Pairs<'_, T> {
    fn value(&self, pi: &[T]) -> T {
        let n = self.n;
        let mut v = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                v += mediant(pi[i * n + j], pi[j * n + i]) * self.d2[i * n + j];
            }
        }
        v
    }

    fn stop(&self, config: &SearchConfig) -> T {
        let scale = self.d2.iter().fold(T::zero(), |m, &x| m.max(x));
        T::lit(config.tol * 1e-3) * scale.max(T::one())
    }

    /// Makes `u` dual feasible by raising, for every violated pair, the
    /// cheaper endpoint; returns the bound `Σ r_i u_i²`. Raising only helps
    /// the other constraints, so one pass suffices.
    fn certify(&self, u: &mut [T]) -> T {
        let n = self.n;
        for i in 0..n {
            if self.rows[i] == T::zero() {
                u[i] = (0..n).fold(u[i], |m, j| m.max(self.d[i * n + j]));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let deficit = self.d[i * n + j] - u[i] - u[j];
                if deficit > T::zero() {
                    let cost = |k: usize| self.rows[k] * ((u[k] + deficit).sq() - u[k].sq());
                    let k = if cost(i) <= cost(j) { i } else { j };
                    u[k] += deficit;
                }
            }
        }
        u.iter().zip(&self.rows).fold(T::zero(), |acc, (&x, &r)| acc + r * x * x)
    }

    /// Dual certificate read off a coupling: `u_i² = max_j` of the linear
    /// coefficients of the mediant representation at `π`.
    fn prices_from_coupling(&self, pi: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|i| {
                (0..n).fold(T::zero(), |m, j| {
                    let (a, b) = (pi[i * n + j], pi[j * n + i]);
                    let s = a + b;
                    if i != j && s > T::zero() {
                        m.max(self.d[i * n + j] * b / s)
                    } else {
                        m
                    }
                })
            })
            .collect()
    }

    fn finish(&self, pi: Vec<T>, mut u: Vec<T>, iterations: usize, stop: T, state: Vec<T>) -> InnerSolution<T> {
        let lhs = self.value(&pi);
        let upper_bound = self.certify(&mut u).max(lhs);
        InnerSolution {
            converged: upper_bound - lhs <= stop.max(T::lit(1e-12) * upper_bound.abs()),
            prices: u.iter().map(|&x| x * x).collect(),
            pi,
            lhs,
            upper_bound,
            iterations,
            state,
        }
    }
}

pub(crate) fn uniform_rows<T: Real>(rows: &[T]) -> Vec<T> {
    let n = rows.len();
    let inv = T::one() / T::from_usize(n).expect("small n");
    rows.iter().flat_map(|&r| std::iter::repeat_n(r * inv, n)).collect()
}

pub(crate) fn solve<T: Real>(problem: &Pairs<'_, T>, warm: Option<&[T]>, config: &SearchConfig) -> InnerSolution<T> {
    match config.inner {
        InnerMethod::Dual => solve_dual(problem, warm, config),
        InnerMethod::ProjectedGradient => {
            let start = warm.map(|w| rescale_rows(problem, w)).unwrap_or_else(|| uniform_rows(&problem.rows));
            solve_projected(problem, start, config)
        }
    }
}

/// Keeps each row's profile of an earlier coupling but moves it to the new
/// row masses.
fn rescale_rows<T: Real>(problem: &Pairs<'_, T>, old: &[T]) -> Vec<T> {
    let n = problem.n;
    let inv_n = T::one() / T::from_usize(n).expect("small n");
    let mut s = Vec::with_capacity(n * n);
    for i in 0..n {
        let row = &old[i * n..(i + 1) * n];
        let total = row.iter().fold(T::zero(), |a, &x| a + x);
        for &x in row {
            let share = if total > T::zero() { x / total } else { inv_n };
            s.push(problem.rows[i] * share);
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Pair-weight dual.

fn coupling_from_weights<T: Real>(problem: &Pairs<'_, T>, w: &[T], total: &[T]) -> Vec<T> {
    let n = problem.n;
    let mut pi = vec![T::zero(); n * n];
    for i in 0..n {
        if total[i] > T::zero() {
            for j in 0..n {
                if j != i {
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    pi[i * n + j] = problem.rows[i] * w[a * n + b] / total[i];
                }
            }
        } else {
            pi[i * n + i] = problem.rows[i];
        }
    }
    pi
}

fn solve_dual<T: Real>(problem: &Pairs<'_, T>, warm: Option<&[T]>, config: &SearchConfig) -> InnerSolution<T> {
    let n = problem.n;
    let two = T::lit(2.0);
    let stop = problem.stop(config);
    let rows = &problem.rows;
    let active = |i: usize, j: usize| rows[i] > T::zero() && rows[j] > T::zero() && problem.d[i * n + j] > T::zero();
    // Upper-triangular pair weights.
    let mut w = match warm {
        Some(w) if w.len() == n * n => w.to_vec(),
        _ => vec![T::zero(); n * n],
    };
    let mut total = vec![T::zero(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if !active(i, j) {
                w[i * n + j] = T::zero();
            }
            total[i] += w[i * n + j];
            total[j] += w[i * n + j];
        }
    }
    let u_of = |total: &[T]| -> Vec<T> {
        (0..n).map(|i| if rows[i] > T::zero() { total[i] / (two * rows[i]) } else { T::zero() }).collect()
    };
    let mut sweeps = 0;
    let check_every = 8;
    while sweeps < config.inner_max_iters.max(1) {
        sweeps += 1;
        for i in 0..n {
            for j in (i + 1)..n {
                if !active(i, j) {
                    continue;
                }
                let (ci, cj) = (T::one() / (two * rows[i]), T::one() / (two * rows[j]));
                let slack = problem.d[i * n + j] - total[i] * ci - total[j] * cj;
                let old = w[i * n + j];
                let new = (old + slack / (ci + cj)).max(T::zero());
                if new != old {
                    w[i * n + j] = new;
                    total[i] += new - old;
                    total[j] += new - old;
                }
            }
        }
        if sweeps % check_every == 0 || sweeps == config.inner_max_iters {
            // Recompute the running sums to shed accumulated rounding.
            total.iter_mut().for_each(|t| *t = T::zero());
            for i in 0..n {
                for j in (i + 1)..n {
                    total[i] += w[i * n + j];
                    total[j] += w[i * n + j];
                }
            }
            let pi = coupling_from_weights(problem, &w, &total);
            let sol = problem.finish(pi, u_of(&total), sweeps, stop, w.clone());
            if sol.converged {
                return sol;
            }
        }
    }
    let pi = coupling_from_weights(problem, &w, &total);
    problem.finish(pi, u_of(&total), sweeps, stop, w)
}

// ---------------------------------------------------------------------------
// Projected-gradient ascent on the coupling.

impl<T: Real> Pairs<'_, T> {
    /// `∂/∂π_ij = D_ij π_ji² / (π_ij + π_ji)²`, taken as 0 on zero pairs.
    fn gradient(&self, pi: &[T], g: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (pi[i * n + j], pi[j * n + i]);
                let s = a + b;
                g[i * n + j] = if i != j && s > T::zero() { self.d2[i * n + j] * (b / s).powi(2) } else { T::zero() };
            }
        }
    }

    fn project_rows(&self, v: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let row = project_simplex(&v[i * n..(i + 1) * n], self.rows[i]);
            v[i * n..(i + 1) * n].copy_from_slice(&row);
        }
    }

    /// Moves the mass of numerically negligible pairs onto the diagonal.
    /// Near an almost-empty pair the curvature grows like `1/(π_ij + π_ji)`,
    /// which would otherwise stall the line search.
    fn drop_negligible_pairs(&self, pi: &mut [T]) {
        let n = self.n;
        let floor = T::lit(1e-13);
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (pi[i * n + j], pi[j * n + i]);
                let s = a + b;
                if s > T::zero() && s <= floor * (self.rows[i] + self.rows[j]) {
                    pi[i * n + i] += a;
                    pi[j * n + j] += b;
                    pi[i * n + j] = T::zero();
                    pi[j * n + i] = T::zero();
                }
            }
        }
    }

    /// Tries emptying each pair, sending its mass to the best other entry of
    /// its rows. Projected steps only approach an empty pair geometrically,
    /// so this finishes the job when it pays off.
    fn empty_pairs(&self, pi: &mut Vec<T>, g: &[T], value: &mut T) {
        let n = self.n;
        let best = |row: usize, skip: usize| {
            (0..n).filter(|&k| k != skip && k != row).fold(row, |b, k| {
                if b == row || g[row * n + k] > g[row * n + b] {
                    k
                } else {
                    b
                }
            })
        };
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (pi[i * n + j], pi[j * n + i]);
                if a + b == T::zero() {
                    continue;
                }
                let mut cand = pi.clone();
                cand[i * n + j] = T::zero();
                cand[j * n + i] = T::zero();
                cand[i * n + best(i, j)] += a;
                cand[j * n + best(j, i)] += b;
                let v = self.value(&cand);
                if v > *value {
                    *pi = cand;
                    *value = v;
                }
            }
        }
    }

    /// Conditional-gradient step towards the best vertex of the row
    /// simplices with a golden-section search along the segment; `None`
    /// when it does not improve.
    fn frank_wolfe_step(&self, pi: &[T], g: &[T], value: T) -> Option<(Vec<T>, T)> {
        let n = self.n;
        let mut vertex = vec![T::zero(); n * n];
        for i in 0..n {
            let row = &g[i * n..(i + 1) * n];
            let k = (0..n).fold(0, |b, k| if row[k] > row[b] { k } else { b });
            vertex[i * n + k] = self.rows[i];
        }
        let at = |lam: T| -> Vec<T> { pi.iter().zip(&vertex).map(|(&x, &v)| x + lam * (v - x)).collect() };
        let ratio = T::lit(0.5 * (5f64.sqrt() - 1.0));
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..80 {
            let (a, b) = (hi - ratio * (hi - lo), lo + ratio * (hi - lo));
            if self.value(&at(a)) < self.value(&at(b)) {
                lo = a;
            } else {
                hi = b;
            }
        }
        let next = at((lo + hi) / T::lit(2.0));
        let next_value = self.value(&next);
        (next_value > value).then_some((next, next_value))
    }

    /// Moves a little mass onto an empty pair `(i, j)` whose revival has a
    /// positive first-order rate at the current row prices, i.e. one whose
    /// dual constraint `√μ_i + √μ_j ≥ d_ij` fails. Returns whether it did.
    fn revive_zero_pair(&self, pi: &mut Vec<T>, g: &[T]) -> bool {
        let n = self.n;
        let (zero, one, two) = (T::zero(), T::one(), T::lit(2.0));
        let price: Vec<T> = (0..n).map(|i| g[i * n..(i + 1) * n].iter().fold(zero, |m, &x| m.max(x))).collect();
        let base = self.value(pi);
        for i in 0..n {
            for j in (i + 1)..n {
                let dij = self.d2[i * n + j];
                if pi[i * n + j] > zero || pi[j * n + i] > zero || dij == zero {
                    continue;
                }
                if self.rows[i] == zero || self.rows[j] == zero {
                    continue;
                }
                // Best split λ of revived mass between the (i,j) and (j,i) entries.
                let lam = ((dij - price[i] + price[j]) / (two * dij)).max(zero).min(one);
                let rate = lam * (one - lam) * dij - lam * price[i] - (one - lam) * price[j];
                if rate <= T::lit(1e-14) * dij {
                    continue;
                }
                let mut tau = T::lit(1e-2) * self.rows[i].min(self.rows[j]);
                for _ in 0..12 {
                    let (a, b) = (tau * lam, tau * (one - lam));
                    let mut cand = pi.clone();
                    for (row, amount, col) in [(i, a, j), (j, b, i)] {
                        let r = self.rows[row];
                        for k in 0..n {
                            cand[row * n + k] *= one - amount / r;
                        }
                        cand[row * n + col] += amount;
                    }
                    if self.value(&cand) > base {
                        *pi = cand;
                        return true;
                    }
                    tau = tau / T::lit(10.0);
                }
            }
        }
        false
    }
}

fn solve_projected<T: Real>(problem: &Pairs<'_, T>, start: Vec<T>, config: &SearchConfig) -> InnerSolution<T> {
    let n = problem.n;
    let scale = problem.d2.iter().fold(T::zero(), |m, &x| m.max(x));
    let stop = problem.stop(config);
    let finish = |pi: Vec<T>, iterations: usize| {
        let u = problem.prices_from_coupling(&pi);
        let state = pi.clone();
        problem.finish(pi, u, iterations, stop, state)
    };
    let mut pi = start;
    problem.project_rows(&mut pi);
    if scale == T::zero() {
        return finish(pi, 0);
    }
    let sigma = T::lit(1e-4);
    let mut g = vec![T::zero(); n * n];
    let mut value = problem.value(&pi);
    let initial_step = match config.step_rule {
        StepRule::Fixed(s) => T::lit(s),
        StepRule::Backtracking => T::one() / scale,
    };
    let mut step = initial_step;
    let mut iterations = 0;
    while iterations < config.inner_max_iters {
        iterations += 1;
        problem.gradient(&pi, &mut g);
        let mut u = problem.prices_from_coupling(&pi);
        if problem.certify(&mut u) - value <= stop {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand: Vec<T> = pi.iter().zip(&g).map(|(&x, &gx)| x + step * gx).collect();
            problem.project_rows(&mut cand);
            let cand_value = problem.value(&cand);
            let ascent = cand.iter().zip(&pi).zip(&g).fold(T::zero(), |acc, ((&c, &x), &gx)| acc + gx * (c - x));
            let ok = match config.step_rule {
                StepRule::Fixed(_) => cand_value >= value,
                StepRule::Backtracking => cand_value >= value + sigma * ascent,
            };
            if ok {
                accepted = cand_value > value || ascent > T::zero();
                pi = cand;
                break;
            }
            if matches!(config.step_rule, StepRule::Fixed(_)) {
                break;
            }
            step = step / T::lit(2.0);
        }
        problem.drop_negligible_pairs(&mut pi);
        value = problem.value(&pi);
        if accepted {
            problem.gradient(&pi, &mut g);
            problem.empty_pairs(&mut pi, &g, &mut value);
            if matches!(config.step_rule, StepRule::Backtracking) {
                step = step * T::lit(2.0);
            }
            continue;
        }
        // The gradient is unreliable near a nearly-empty pair; a
        // conditional-gradient step only needs concavity along a segment.
        if let Some((next, next_value)) = problem.frank_wolfe_step(&pi, &g, value) {
            pi = next;
            value = next_value;
        } else if problem.revive_zero_pair(&mut pi, &g) {
            value = problem.value(&pi);
        } else {
            break;
        }
        step = initial_step;
    }
    finish(pi, iterations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs<'a>(d: &'a [f64], d2: &'a [f64], rows: &[f64]) -> Pairs<'a, f64> {
        Pairs { n: rows.len(), d, d2, rows: rows.to_vec() }
    }

    #[test]
    fn two_points_both_methods() {
        let d = [0.0, 1.0, 1.0, 0.0];
        let p = pairs(&d, &d, &[1.0, 1.0]);
        for inner in [InnerMethod::Dual, InnerMethod::ProjectedGradient] {
            let cfg = SearchConfig { inner, ..Default::default() };
            let sol = solve(&p, None, &cfg);
            assert!(sol.converged, "{inner:?}");
            assert!((sol.lhs - 0.5).abs() < 1e-9, "{inner:?} {}", sol.lhs);
            assert!(sol.upper_bound >= sol.lhs && sol.upper_bound - sol.lhs < 1e-9);
            // u = (1/2, 1/2) is the dual optimum.
            assert!(sol.prices.iter().all(|&x| (x - 0.25).abs() < 1e-6), "{:?}", sol.prices);
        }
    }

    #[test]
    fn dual_bound_is_valid_for_any_u() {
        let d = [0.0, 1.0, 2.0, 1.0, 0.0, 1.5, 2.0, 1.5, 0.0];
        let d2: Vec<f64> = d.iter().map(|x| x * x).collect();
        let p = pairs(&d, &d2, &[0.5, 0.7, 0.8]);
        let sol = solve(&p, None, &SearchConfig::default());
        for u0 in [[0.0, 0.0, 0.0], [3.0, 0.1, 0.0], [0.4, 0.6, 1.2]] {
            let mut u = u0.to_vec();
            assert!(p.certify(&mut u) >= sol.lhs - 1e-12);
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert!(u[i] + u[j] >= d[i * 3 + j] - 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn revival_escapes_a_diagonal_start() {
        // From the diagonal coupling every off-diagonal gradient is zero.
        let d = [0.0, 1.0, 1.0, 0.0];
        let p = pairs(&d, &d, &[1.0, 1.0]);
        let cfg = SearchConfig { inner: InnerMethod::ProjectedGradient, ..Default::default() };
        let sol = solve_projected(&p, vec![1.0, 0.0, 0.0, 1.0], &cfg);
        assert!(sol.converged);
        assert!((sol.lhs - 0.5).abs() < 1e-9, "{}", sol.lhs);
    }

    #[test]
    fn zero_row_goes_to_the_diagonal() {
        let d = [0.0, 1.0, 1.0, 0.0];
        let p = pairs(&d, &d, &[2.0, 0.0]);
        let sol = solve(&p, None, &SearchConfig::default());
        assert_eq!(sol.lhs, 0.0);
        assert!(sol.converged);
        assert_eq!(sol.pi[0] + sol.pi[1], 2.0);
    }
}
