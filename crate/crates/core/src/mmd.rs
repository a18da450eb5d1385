//! Squared maximum mean discrepancy between empirical measures.
//!
//! For samples `X` (size `M`) and `Y` (size `N`) the unbiased U-statistic is
//!
//! ```text
//! MMD²_u = 1/(M(M−1)) Σ_{i≠j} K(X_i, X_j) − 2/(MN) Σ_{i,j} K(X_i, Y_j) + 1/(N(N−1)) Σ_{i≠j} K(Y_i, Y_j)
//! ```
//!
//! and the biased V-statistic keeps the diagonal and divides by `M²`, `N²`.
//! Kernel sums are streamed row by row, so no Gram matrix is materialized
//! regardless of sample size. Rows may run in parallel; row totals are
//! combined sequentially in index order.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::par;
use crate::sample::{squared_distance, SampleSet};

/// Σ_{i,j} K(X_i, Y_j), optionally skipping `i == j` (for `Y = X`).
fn kernel_sum(kernel: &KernelSpec, xs: &SampleSet, ys: &SampleSet, skip_diagonal: bool) -> f64 {
    let rows = par::map_indexed(xs.len(), |i| {
        let x = xs.point(i);
        let mut acc = 0.0;
        for (j, y) in ys.points().enumerate() {
            if skip_diagonal && i == j {
                continue;
            }
            acc += kernel.value_unchecked(x, y);
        }
        acc
    });
    rows.into_iter().sum()
}

/// Σ_{i,j} K(X_i, Y_j) summed in an order that does not depend on which
/// sample is passed first, so swapping the arguments is exact.
fn cross_sum(kernel: &KernelSpec, xs: &SampleSet, ys: &SampleSet) -> f64 {
    let key = |s: &SampleSet| (s.len(), s.dim());
    let swap = match key(xs).cmp(&key(ys)) {
        std::cmp::Ordering::Equal => xs
            .as_flat()
            .iter()
            .zip(ys.as_flat())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .is_some_and(|o| o.is_gt()),
        o => o.is_gt(),
    };
    if swap {
        kernel_sum(kernel, ys, xs, false)
    } else {
        kernel_sum(kernel, xs, ys, false)
    }
}

fn check_unbiased(xs: &SampleSet, ys: &SampleSet) -> Result<()> {
    xs.check_same_dim(ys)?;
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::input(format!(
            "unbiased MMD needs at least 2 points per sample, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    Ok(())
}

/// Unbiased estimate of `γ_K(μ₀, μ₁)²`. May be negative; never clamped.
pub fn mmd2_unbiased(kernel: &KernelSpec, xs: &SampleSet, ys: &SampleSet) -> Result<f64> {
    check_unbiased(xs, ys)?;
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    let xx = kernel_sum(kernel, xs, xs, true) / (m * (m - 1.0));
    let xy = cross_sum(kernel, xs, ys) * 2.0 / (m * n);
    let yy = kernel_sum(kernel, ys, ys, true) / (n * (n - 1.0));
    Ok((xx + yy) - xy)
}

/// Biased (V-statistic) estimate: the squared RKHS distance between the two
/// empirical mean embeddings. Nonnegative up to rounding.
pub fn mmd2_biased(kernel: &KernelSpec, xs: &SampleSet, ys: &SampleSet) -> Result<f64> {
    xs.check_same_dim(ys)?;
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::input("biased MMD needs nonempty samples"));
    }
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    let xx = kernel_sum(kernel, xs, xs, false) / (m * m);
    let xy = cross_sum(kernel, xs, ys) * 2.0 / (m * n);
    let yy = kernel_sum(kernel, ys, ys, false) / (n * n);
    Ok((xx + yy) - xy)
}

/// Per-row kernel sums and gradient pieces for one point `T_i` of a moving
/// sample against itself and a fixed sample.
pub(crate) struct RowTerms {
    /// Σ_{j≠i} K(T_i, T_j)
    pub within: f64,
    /// Σ_j K(T_i, Y_j)
    pub cross: f64,
    /// Σ_{j≠i} ∂K(T_i, T_j)/∂T_i
    pub grad_within: Vec<f64>,
    /// Σ_j ∂K(T_i, Y_j)/∂T_i
    pub grad_cross: Vec<f64>,
}

/// Computes [`RowTerms`] for every point of `moving`, in index order.
pub(crate) fn row_terms(
    kernel: &KernelSpec,
    moving: &SampleSet,
    fixed: &SampleSet,
) -> Result<Vec<RowTerms>> {
    moving.check_same_dim(fixed)?;
    let d = moving.dim();
    let rows = par::map_indexed(moving.len(), |i| {
        let t = moving.point(i);
        let mut out = RowTerms {
            within: 0.0,
            cross: 0.0,
            grad_within: vec![0.0; d],
            grad_cross: vec![0.0; d],
        };
        for (j, u) in moving.points().enumerate() {
            if i == j {
                continue;
            }
            let (k, c) = kernel.radial(squared_distance(t, u));
            out.within += k;
            for ((g, a), b) in out.grad_within.iter_mut().zip(t).zip(u) {
                *g += c * (a - b);
            }
        }
        for y in fixed.points() {
            let (k, c) = kernel.radial(squared_distance(t, y));
            out.cross += k;
            for ((g, a), b) in out.grad_cross.iter_mut().zip(t).zip(y) {
                *g += c * (a - b);
            }
        }
        out
    });
    if rows
        .iter()
        .any(|r| r.grad_within.iter().chain(&r.grad_cross).any(|g| !g.is_finite()))
    {
        return Err(Error::numeric(
            "kernel gradient is undefined (coincident points under a non-differentiable kernel?)",
        ));
    }
    Ok(rows)
}

/// Gradient of [`mmd2_unbiased`] with respect to each point of `xs`, with
/// `ys` held fixed. One `d`-vector per point of `xs`.
pub fn mmd2_unbiased_grad_points(
    kernel: &KernelSpec,
    xs: &SampleSet,
    ys: &SampleSet,
) -> Result<Vec<Vec<f64>>> {
    check_unbiased(xs, ys)?;
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    // K(X_i, X_j) appears twice in the i≠j sum, once per ordering.
    let w_within = 2.0 / (m * (m - 1.0));
    let w_cross = 2.0 / (m * n);
    Ok(row_terms(kernel, xs, ys)?
        .into_iter()
        .map(|r| {
            r.grad_within
                .iter()
                .zip(&r.grad_cross)
                .map(|(gw, gc)| w_within * gw - w_cross * gc)
                .collect()
        })
        .collect())
}

/// Population `MMD²` between `N(m0, s0² I)` and `N(m1, s1² I)` under a
/// Gaussian kernel, in closed form. `s0` and `s1` are standard deviations.
///
/// Uses `E[exp(−α|Z|²)] = (1 + 2αs²)^{−d/2} · exp(−α|μ|² / (1 + 2αs²))` for
/// `Z ~ N(μ, s² I)`, applied to the differences `X − X'`, `X − Y`, `Y − Y'`.
pub fn mmd2_population_gaussian(
    kernel: &KernelSpec,
    m0: &[f64],
    s0: f64,
    m1: &[f64],
    s1: f64,
) -> Result<f64> {
    let KernelSpec::Gaussian { alpha } = *kernel else {
        return Err(Error::Unsupported(
            "closed-form population MMD is only available for the gaussian kernel".into(),
        ));
    };
    crate::sample::check_point_dims(m0, m1)?;
    if !(s0 > 0.0 && s1 > 0.0) {
        return Err(Error::input("standard deviations must be positive"));
    }
    let d = m0.len() as f64;
    let expect = |mean_sq: f64, var: f64| {
        let scale = 1.0 + 2.0 * alpha * var;
        scale.powf(-d / 2.0) * (-alpha * mean_sq / scale).exp()
    };
    let shift = squared_distance(m0, m1);
    let xx = expect(0.0, 2.0 * s0 * s0);
    let xy = expect(shift, s0 * s0 + s1 * s1);
    let yy = expect(0.0, 2.0 * s1 * s1);
    Ok(xx - 2.0 * xy + yy)
}
