//! Tensor Gauss-Hermite quadrature for the Gaussian measure on the tangent space.
//!
//! Nodes come from the symmetric tridiagonal Jacobi matrix of the Hermite
//! recurrence (Golub-Welsch), polished by Newton steps on the orthonormal
//! recurrence. Weights use the Christoffel-number formula
//! `w_i = 1 / sum_k p_k(x_i)^2`, which keeps full relative accuracy in the
//! far tails where the eigenvector route does not.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{FlatChart, TangentComplex};

/// Nodes and weights of the `order`-point rule for the weight `e^{-x^2}` on the real line.
///
/// Exact for polynomials of degree `2 * order - 1`.
pub fn hermite_rule(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::ZeroOrder);
    }
    if order == 1 {
        return Ok((vec![0.0], vec![PI.sqrt()]));
    }
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p_n, p_nm1, _) = orthonormal_hermite(order, *x);
            // p_n' = sqrt(2n) p_{n-1} for the orthonormal family.
            let dp = (2.0 * order as f64).sqrt() * p_nm1;
            if dp != 0.0 {
                *x -= p_n / dp;
            }
        }
    }
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| 1.0 / orthonormal_hermite(order, x).2)
        .collect();

    // Enforce the reflection symmetry of the rule.
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Returns `(p_n(x), p_{n-1}(x), sum_{k<n} p_k(x)^2)` for the Hermite polynomials
/// orthonormal against `e^{-x^2}`.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25);
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += cur * cur;
        // x p_k = a_{k+1} p_{k+1} + a_k p_{k-1}, a_k = sqrt(k/2).
        let next = (x * cur - (k as f64 / 2.0).sqrt() * prev) / ((k as f64 + 1.0) / 2.0).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sum_sq)
}

/// Tensor rule over `dims` real dimensions for the normalized measure
/// `pi^{-n} e^{-|u|^2} d^{2n}u`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    order: usize,
    dims: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    normalization: f64,
}

impl QuadratureRule {
    /// Rule with `order` nodes in each of `dims` real dimensions. `dims` must be even.
    pub fn new(order: usize, dims: usize) -> Result<Self> {
        if dims == 0 || dims % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "tangent dimension must be even and positive, got {dims}"
            )));
        }
        let (x, w) = hermite_rule(order)?;
        Ok(Self {
            order,
            dims,
            nodes: vec![x; dims],
            weights: vec![w; dims],
            normalization: PI.powi(-(dims as i32 / 2)),
        })
    }

    /// Rule sized for a chart: `2 n` real dimensions.
    pub fn for_chart(chart: &FlatChart, order: usize) -> Result<Self> {
        Self::new(order, 2 * chart.dim())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Number of tensor nodes, `order^dims`.
    pub fn len(&self) -> usize {
        self.order.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Real coordinates `(a_1..a_n, b_1..b_n)` and the normalized weight of node `flat`.
    fn node(&self, mut flat: usize, coords: &mut [f64]) -> f64 {
        let mut w = self.normalization;
        for d in (0..self.dims).rev() {
            let i = flat % self.order;
            flat /= self.order;
            coords[d] = self.nodes[d][i];
            w *= self.weights[d][i];
        }
        w
    }

    /// Sum of all normalized tensor weights. Equals 1 up to rounding.
    pub fn total_weight(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| w.iter().sum::<f64>())
            .product::<f64>()
            * self.normalization
    }
}

/// Leaf size of the pairwise reduction. Fixed so results are bit-stable.
const LEAF: usize = 512;

/// Integrates `f` against the normalized Gaussian measure `e^{-|z|^2} dz / Z` of the chart,
/// with `Z` chosen so that `1` integrates to `1`.
pub fn integrate_tangent<F>(chart: &FlatChart, rule: &QuadratureRule, f: F) -> Result<Complex64>
where
    F: Fn(&TangentComplex) -> Complex64 + Sync,
{
    let v = integrate_tangent_vec(chart, rule, 1, |z, out| out[0] = f(z))?;
    Ok(v[0])
}

/// Integrates `len` functions at once; `f(z, out)` writes their values at `z` into `out`.
///
/// Nodes are enumerated from a flat index, never materialized as a grid.
/// The reduction is a fixed pairwise tree, so the result does not depend on
/// thread scheduling.
pub fn integrate_tangent_vec<F>(
    chart: &FlatChart,
    rule: &QuadratureRule,
    len: usize,
    f: F,
) -> Result<Vec<Complex64>>
where
    F: Fn(&TangentComplex, &mut [Complex64]) + Sync,
{
    let n = chart.dim();
    if rule.dims() != 2 * n {
        return Err(Error::DimensionMismatch {
            context: "integrate_tangent: rule dimensions",
            expected: 2 * n,
            found: rule.dims(),
        });
    }
    let ctx = Ctx {
        chart,
        rule,
        len,
        f: &f,
    };
    ctx.sum(0, rule.len())
}

struct Ctx<'a, F> {
    chart: &'a FlatChart,
    rule: &'a QuadratureRule,
    len: usize,
    f: &'a F,
}

impl<F> Ctx<'_, F>
where
    F: Fn(&TangentComplex, &mut [Complex64]) + Sync,
{
    fn sum(&self, lo: usize, hi: usize) -> Result<Vec<Complex64>> {
        if hi - lo <= LEAF {
            return self.leaf(lo, hi);
        }
        let mid = lo + (hi - lo) / 2;
        let (a, b) = rayon::join(|| self.sum(lo, mid), || self.sum(mid, hi));
        let mut a = a?;
        for (x, y) in a.iter_mut().zip(b?) {
            *x += y;
        }
        Ok(a)
    }

    fn leaf(&self, lo: usize, hi: usize) -> Result<Vec<Complex64>> {
        let n = self.chart.dim();
        let l = self.chart.sigma_cholesky();
        let mut acc = vec![Complex64::new(0.0, 0.0); self.len];
        let mut vals = vec![Complex64::new(0.0, 0.0); self.len];
        let mut coords = vec![0.0; 2 * n];
        for flat in lo..hi {
            let w = self.rule.node(flat, &mut coords);
            let z = to_tangent(l, &coords);
            (self.f)(&z, &mut vals);
            for (a, v) in acc.iter_mut().zip(&vals) {
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFiniteIntegrand {
                        node: coords.clone(),
                        value: v.to_string(),
                    });
                }
                *a += w * v;
            }
        }
        Ok(acc)
    }
}

/// Maps standard coordinates `u = a + i b` (measure `e^{-|u|^2}`) to chart coordinates
/// `z = L^{-T} u`, so that `sigma_ij z^i conj(z^j) = |u|^2`.
fn to_tangent(l: &nalgebra::DMatrix<f64>, coords: &[f64]) -> TangentComplex {
    let n = l.nrows();
    let mut z: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(coords[i], coords[n + i]))
        .collect();
    // Back substitution with the upper-triangular L^T.
    for i in (0..n).rev() {
        let mut s = z[i];
        for j in i + 1..n {
            s -= l[(j, i)] * z[j];
        }
        z[i] = s / l[(i, i)];
    }
    TangentComplex::from_vec_unchecked(z)
}
