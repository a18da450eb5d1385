//! Entropy-regularized discrete optimal transport and barycentric maps.
//!
//! The log-domain iteration keeps dual potentials `f`, `g` and computes
//!
//! ```text
//! f_i = ε log a_i − ε log Σ_j exp((g_j − C_ij)/ε)
//! g_j = ε log b_j − ε log Σ_i exp((f_i − C_ij)/ε)
//! P_ij = exp((f_i + g_j − C_ij)/ε)
//! ```
//!
//! which stays finite for any `ε > 0`. The plain scaling iteration on the
//! Gibbs kernel `exp(−C/ε)` is faster but underflows for small `ε`; it falls
//! back to the log domain when that happens.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::CostSpec;
use crate::matrix::Matrix;
use crate::par;
use crate::sample::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SinkhornOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once the largest marginal violation drops below this.
    pub tol: f64,
    pub log_domain: bool,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            epsilon: 1.0,
            max_iters: 10_000,
            tol: 1e-9,
            log_domain: true,
        }
    }
}

/// A transport plan with its target marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub plan: Matrix,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Coupling {
    /// Largest absolute deviation of row sums from `a`.
    pub fn row_violation(&self) -> f64 {
        max_abs_diff(&self.plan.row_sums(), &self.a)
    }

    /// Largest absolute deviation of column sums from `b`.
    pub fn col_violation(&self) -> f64 {
        max_abs_diff(&self.plan.col_sums(), &self.b)
    }
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn check_weights(name: &str, w: &[f64]) -> Result<()> {
    if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::input(format!("{name} has negative or non-finite weights")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("{name} must sum to 1, sums to {total}")));
    }
    Ok(())
}

/// Uniform weights `1/n`.
pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Pairwise cost matrix `C_ij = c(X_i, Y_j)`.
pub fn cost_matrix(xs: &SampleSet, ys: &SampleSet, cost: &CostSpec) -> Result<Matrix> {
    xs.check_same_dim(ys)?;
    let (m, n) = (xs.len(), ys.len());
    let mut c = Matrix::zeros(m, n);
    if n > 0 {
        par::for_each_chunk_mut(c.as_mut_slice(), n, |i, row| {
            for (j, out) in row.iter_mut().enumerate() {
                *out = cost.cost(xs.point(i), ys.point(j));
            }
        });
    }
    Ok(c)
}

/// Median entry of a matrix (lower median for even counts).
pub fn median_entry(c: &Matrix) -> Result<f64> {
    let mut v = c.as_slice().to_vec();
    if v.is_empty() {
        return Err(Error::input("median of an empty matrix"));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::input("cost matrix contains NaN"));
    }
    let mid = (v.len() - 1) / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    Ok(*m)
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let buf: Vec<f64> = values.collect();
    let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + buf.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn ln_weight(w: f64) -> f64 {
    if w > 0.0 {
        w.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn solve_log(cost: &Matrix, cost_t: &Matrix, a: &[f64], b: &[f64], opts: &SinkhornOptions) -> Coupling {
    let eps = opts.epsilon;
    let (m, n) = (cost.rows(), cost.cols());
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        let lse_rows = par::map_indexed(m, |i| {
            log_sum_exp(cost.row(i).iter().zip(&g).map(|(c, gj)| (gj - c) / eps))
        });
        // Row sums of the current plan are exp(f_i/ε + lse_i).
        let violation = (0..m)
            .map(|i| ((f[i] / eps + lse_rows[i]).exp() - a[i]).abs())
            .fold(0.0, f64::max);
        if iterations > 0 && violation < opts.tol {
            converged = true;
            break;
        }
        for i in 0..m {
            f[i] = eps * ln_weight(a[i]) - eps * lse_rows[i];
        }
        let lse_cols = par::map_indexed(n, |j| {
            log_sum_exp(cost_t.row(j).iter().zip(&f).map(|(c, fi)| (fi - c) / eps))
        });
        for j in 0..n {
            g[j] = eps * ln_weight(b[j]) - eps * lse_cols[j];
        }
        iterations += 1;
    }
    let mut plan = Matrix::zeros(m, n);
    if n > 0 {
        par::for_each_chunk_mut(plan.as_mut_slice(), n, |i, row| {
            for (j, p) in row.iter_mut().enumerate() {
                *p = ((f[i] + g[j] - cost.get(i, j)) / eps).exp();
            }
        });
    }
    Coupling {
        plan,
        a: a.to_vec(),
        b: b.to_vec(),
        iterations,
        converged,
    }
}

/// Plain scaling iteration; `None` if the Gibbs kernel underflows.
fn solve_plain(cost: &Matrix, a: &[f64], b: &[f64], opts: &SinkhornOptions) -> Option<Coupling> {
    let eps = opts.epsilon;
    let (m, n) = (cost.rows(), cost.cols());
    let gibbs = Matrix::from_vec(m, n, cost.as_slice().iter().map(|c| (-c / eps).exp()).collect())
        .ok()?;
    let gibbs_t = gibbs.transpose();
    let mut u = vec![1.0; m];
    let mut v = vec![1.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let dot = |row: &[f64], w: &[f64]| row.iter().zip(w).map(|(k, x)| k * x).sum::<f64>();
    while iterations < opts.max_iters {
        let kv = par::map_indexed(m, |i| dot(gibbs.row(i), &v));
        if kv.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return None;
        }
        let violation = (0..m)
            .map(|i| (u[i] * kv[i] - a[i]).abs())
            .fold(0.0, f64::max);
        if iterations > 0 && violation < opts.tol {
            converged = true;
            break;
        }
        for i in 0..m {
            u[i] = a[i] / kv[i];
        }
        let ktu = par::map_indexed(n, |j| dot(gibbs_t.row(j), &u));
        if ktu.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return None;
        }
        for j in 0..n {
            v[j] = b[j] / ktu[j];
        }
        iterations += 1;
    }
    let mut plan = gibbs;
    if n > 0 {
        par::for_each_chunk_mut(plan.as_mut_slice(), n, |i, row| {
            for (p, vj) in row.iter_mut().zip(&v) {
                *p *= u[i] * vj;
            }
        });
    }
    if plan.as_slice().iter().any(|p| !p.is_finite()) {
        return None;
    }
    Some(Coupling {
        plan,
        a: a.to_vec(),
        b: b.to_vec(),
        iterations,
        converged,
    })
}

/// Solves entropic optimal transport between weights `a` (rows) and `b`
/// (columns) for the given cost matrix.
pub fn sinkhorn_solve(cost: &Matrix, a: &[f64], b: &[f64], opts: &SinkhornOptions) -> Result<Coupling> {
    if a.len() != cost.rows() || b.len() != cost.cols() {
        return Err(Error::input(format!(
            "{}x{} cost matrix needs {} row and {} column weights, got {} and {}",
            cost.rows(),
            cost.cols(),
            cost.rows(),
            cost.cols(),
            a.len(),
            b.len()
        )));
    }
    check_weights("a", a)?;
    check_weights("b", b)?;
    if !(opts.epsilon > 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::input(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::input("tolerance must be positive"));
    }
    if cost.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(Error::input("cost matrix must be finite"));
    }
    let cost_t = cost.transpose();
    if prefer_transposed(cost, &cost_t, a, b) {
        let c = solve_oriented(&cost_t, cost, b, a, opts)?;
        return Ok(Coupling {
            plan: c.plan.transpose(),
            a: c.b,
            b: c.a,
            iterations: c.iterations,
            converged: c.converged,
        });
    }
    solve_oriented(cost, &cost_t, a, b, opts)
}

/// Picks one of the two equivalent orientations `(C, a, b)` and `(Cᵀ, b, a)`
/// independently of which one the caller passed, so that transposing the
/// problem transposes the result exactly.
fn prefer_transposed(cost: &Matrix, cost_t: &Matrix, a: &[f64], b: &[f64]) -> bool {
    let order = cost
        .rows()
        .cmp(&cost.cols())
        .then_with(|| lex_cmp(b, a))
        .then_with(|| lex_cmp(cost_t.as_slice(), cost.as_slice()));
    order.is_lt()
}

fn lex_cmp(x: &[f64], y: &[f64]) -> std::cmp::Ordering {
    x.iter()
        .zip(y)
        .map(|(p, q)| p.total_cmp(q))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn solve_oriented(
    cost: &Matrix,
    cost_t: &Matrix,
    a: &[f64],
    b: &[f64],
    opts: &SinkhornOptions,
) -> Result<Coupling> {
    if !opts.log_domain {
        if let Some(c) = solve_plain(cost, a, b, opts) {
            return Ok(c);
        }
    }
    let coupling = solve_log(cost, cost_t, a, b, opts);
    if coupling.plan.as_slice().iter().any(|p| !p.is_finite()) {
        return Err(Error::numeric(format!(
            "sinkhorn plan is not finite at epsilon {}; try a larger epsilon",
            opts.epsilon
        )));
    }
    Ok(coupling)
}

/// Barycentric projection: source `i` maps to `Σ_j P_ij Y_j / Σ_j P_ij`.
pub fn barycentric_map(coupling: &Coupling, ys: &SampleSet) -> Result<SampleSet> {
    let plan = &coupling.plan;
    if plan.cols() != ys.len() {
        return Err(Error::input(format!(
            "plan has {} columns but target has {} points",
            plan.cols(),
            ys.len()
        )));
    }
    let d = ys.dim();
    let mut out = Vec::with_capacity(plan.rows() * d);
    for i in 0..plan.rows() {
        let row = plan.row(i);
        let mass: f64 = row.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::numeric(format!("source point {i} carries no mass")));
        }
        let mut acc = vec![0.0; d];
        for (p, y) in row.iter().zip(ys.points()) {
            for (a, v) in acc.iter_mut().zip(y) {
                *a += p * v;
            }
        }
        out.extend(acc.into_iter().map(|v| v / mass));
    }
    SampleSet::from_flat(d, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap_cost() -> Matrix {
        Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()
    }

    fn opts(epsilon: f64) -> SinkhornOptions {
        SinkhornOptions {
            epsilon,
            ..SinkhornOptions::default()
        }
    }

    #[test]
    fn hot_limit_is_product() {
        let c = sinkhorn_solve(&swap_cost(), &uniform(2), &uniform(2), &opts(1000.0)).unwrap();
        assert!(c.plan.as_slice().iter().all(|p| (p - 0.25).abs() < 1e-3));
    }

    #[test]
    fn cold_limit_is_assignment() {
        for log_domain in [true, false] {
            let o = SinkhornOptions {
                log_domain,
                ..opts(0.01)
            };
            let c = sinkhorn_solve(&swap_cost(), &uniform(2), &uniform(2), &o).unwrap();
            let expected = [0.5, 0.0, 0.0, 0.5];
            for (p, e) in c.plan.as_slice().iter().zip(expected) {
                assert!((p - e).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn plain_domain_falls_back_on_underflow() {
        // Row 0 of the Gibbs kernel underflows to zero at epsilon 1.
        let cost = Matrix::from_rows(&[[800.0, 801.0], [0.0, 1.0]]).unwrap();
        let o = SinkhornOptions {
            log_domain: false,
            ..opts(1.0)
        };
        let c = sinkhorn_solve(&cost, &uniform(2), &uniform(2), &o).unwrap();
        assert!(c.plan.as_slice().iter().all(|p| p.is_finite()));
        assert!(c.row_violation() < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = swap_cost();
        assert!(sinkhorn_solve(&c, &[0.7, 0.7], &uniform(2), &opts(1.0)).is_err());
        assert!(sinkhorn_solve(&c, &[1.5, -0.5], &uniform(2), &opts(1.0)).is_err());
        assert!(sinkhorn_solve(&c, &uniform(3), &uniform(2), &opts(1.0)).is_err());
        assert!(sinkhorn_solve(&c, &uniform(2), &uniform(2), &opts(0.0)).is_err());
    }

    #[test]
    fn barycentric_of_diagonal_and_product() {
        let ys = SampleSet::from_points(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let diag = Coupling {
            plan: Matrix::from_rows(&[[0.0, 0.5], [0.5, 0.0]]).unwrap(),
            a: uniform(2),
            b: uniform(2),
            iterations: 0,
            converged: true,
        };
        let img = barycentric_map(&diag, &ys).unwrap();
        assert_eq!(img.point(0), ys.point(1));
        assert_eq!(img.point(1), ys.point(0));

        let product = Coupling {
            plan: Matrix::from_rows(&[[0.125, 0.375], [0.125, 0.375]]).unwrap(),
            a: uniform(2),
            b: vec![0.25, 0.75],
            iterations: 0,
            converged: true,
        };
        let img = barycentric_map(&product, &ys).unwrap();
        for p in img.points() {
            assert!((p[0] - 2.5).abs() < 1e-15 && (p[1] - (-0.25)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_row_mass_is_numeric_error() {
        let ys = SampleSet::from_points(&[[1.0], [2.0]]).unwrap();
        let c = Coupling {
            plan: Matrix::from_rows(&[[0.0, 0.0], [0.5, 0.5]]).unwrap(),
            a: vec![0.0, 1.0],
            b: uniform(2),
            iterations: 0,
            converged: true,
        };
        assert!(matches!(barycentric_map(&c, &ys), Err(Error::Numeric(_))));
    }

    #[test]
    fn cold_limit_barycentric_follows_assignment() {
        // Source 0 sits at the second target; enumeration of the two
        // permutations gives cost 0 for the swap and 2 for identity.
        let xs = SampleSet::from_points(&[[1.0], [0.0]]).unwrap();
        let ys = SampleSet::from_points(&[[0.0], [1.0]]).unwrap();
        let cost = cost_matrix(&xs, &ys, &CostSpec::SquaredEuclidean).unwrap();
        let c = sinkhorn_solve(&cost, &uniform(2), &uniform(2), &opts(0.01)).unwrap();
        let img = barycentric_map(&c, &ys).unwrap();
        assert!((img.point(0)[0] - 1.0).abs() < 1e-6);
        assert!(img.point(1)[0].abs() < 1e-6);
    }

    #[test]
    fn median() {
        let m = Matrix::from_rows(&[[3.0, 1.0], [2.0, 10.0]]).unwrap();
        assert_eq!(median_entry(&m).unwrap(), 2.0);
    }
}
