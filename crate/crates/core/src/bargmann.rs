//! Hilbert spaces of holomorphic functions over a finite basis.
//!
//! Everything here works in coefficient space: a state is a coefficient
//! vector `c` over a [`BasisSpec`], the scalar product is `c^H G d` with the
//! Gram matrix `G` of the basis, and a reproducing kernel is
//! `K(z, conj w) = Phi(z)^T G^{-1} conj(Phi(w))` with `Phi(z)` the vector of
//! basis values. Quadrature is used to build `G` when no closed form is known
//! and to check the integral identities the coefficient algebra encodes.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{FlatChart, TangentComplex};
use crate::quadrature::{integrate_tangent, integrate_tangent_vec, QuadratureRule};

pub type BasisEval = Arc<dyn Fn(i64, &[Complex64]) -> Complex64 + Send + Sync>;
pub type ClosedInner = Arc<dyn Fn(i64, i64) -> Result<Complex64> + Send + Sync>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// An ordered, finite family of holomorphic functions on the tangent space.
#[derive(Clone)]
pub struct BasisSpec {
    name: String,
    labels: Vec<i64>,
    eval: BasisEval,
    closed_form_inner: Option<ClosedInner>,
}

impl fmt::Debug for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisSpec")
            .field("name", &self.name)
            .field("labels", &self.labels)
            .field("closed_form", &self.closed_form_inner.is_some())
            .finish()
    }
}

impl BasisSpec {
    pub fn new(
        name: impl Into<String>,
        labels: Vec<i64>,
        eval: impl Fn(i64, &[Complex64]) -> Complex64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("basis labels must be distinct".into()));
        }
        if labels.is_empty() {
            return Err(Error::InvalidInput("basis must not be empty".into()));
        }
        Ok(Self {
            name: name.into(),
            labels,
            eval: Arc::new(eval),
            closed_form_inner: None,
        })
    }

    /// Attaches an analytic `<b_p, b_q>` keyed by labels.
    pub fn with_closed_form(
        mut self,
        inner: impl Fn(i64, i64) -> Result<Complex64> + Send + Sync + 'static,
    ) -> Self {
        self.closed_form_inner = Some(Arc::new(inner));
        self
    }

    /// Same functions, forcing quadrature for the Gram matrix.
    pub fn without_closed_form(&self) -> Self {
        Self {
            closed_form_inner: None,
            ..self.clone()
        }
    }

    /// Monomials `z^m / sqrt(m!)`, `0 <= m <= max_degree`: orthonormal in the
    /// plane's Bargmann space.
    pub fn monomial(max_degree: u32) -> Self {
        let labels = (0..=i64::from(max_degree)).collect();
        Self::new("monomial", labels, |m, z| {
            let m = m as u32;
            let fact: f64 = (1..=m).map(f64::from).product();
            z[0].powu(m) / fact.sqrt()
        })
        .expect("distinct labels")
        .with_closed_form(|p, q| Ok(if p == q { ONE } else { ZERO }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: i64) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form_inner.is_some()
    }

    /// Value of the basis function at position `idx`.
    pub fn eval(&self, idx: usize, z: &[Complex64]) -> Complex64 {
        (self.eval)(self.labels[idx], z)
    }

    pub fn eval_label(&self, label: i64, z: &[Complex64]) -> Complex64 {
        (self.eval)(label, z)
    }

    /// `Phi(z)`: all basis values at `z`.
    pub fn values(&self, z: &[Complex64]) -> DVector<Complex64> {
        DVector::from_iterator(self.len(), self.labels.iter().map(|&l| (self.eval)(l, z)))
    }

    fn values_into(&self, z: &[Complex64], out: &mut [Complex64]) {
        for (o, &l) in out.iter_mut().zip(&self.labels) {
            *o = (self.eval)(l, z);
        }
    }

    pub fn closed_inner(&self, i: usize, j: usize) -> Option<Result<Complex64>> {
        self.closed_form_inner
            .as_ref()
            .map(|f| f(self.labels[i], self.labels[j]))
    }

    /// Cauchy-Riemann residual `|d f / d conj(z)|` by central differences
    /// (one complex dimension).
    pub fn holomorphy_residual(&self, idx: usize, z: Complex64, h: f64) -> f64 {
        let f = |w: Complex64| self.eval(idx, &[w]);
        let dx = (f(z + h) - f(z - h)) / (2.0 * h);
        let dy = (f(z + Complex64::new(0.0, h)) - f(z - Complex64::new(0.0, h))) / (2.0 * h);
        (0.5 * (dx + Complex64::i() * dy)).norm()
    }
}

/// A member of the truncated space: coefficients over a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HoloState {
    coeffs: DVector<Complex64>,
}

impl HoloState {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(coeffs))
    }

    pub fn from_dvector(coeffs: DVector<Complex64>) -> Result<Self> {
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidInput("state coefficients must be finite".into()));
        }
        Ok(Self { coeffs })
    }

    /// Unit coefficient vector at position `idx`.
    pub fn basis_element(len: usize, idx: usize) -> Self {
        let mut coeffs = DVector::zeros(len);
        coeffs[idx] = ONE;
        Self { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            coeffs: DVector::zeros(len),
        }
    }

    pub fn coeffs(&self) -> &DVector<Complex64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<Complex64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `N` when the state is indexed by `k = -N..=N`.
    pub fn truncation(&self) -> Option<usize> {
        (self.len() % 2 == 1).then(|| self.len() / 2)
    }

    pub fn eval(&self, basis: &BasisSpec, z: &[Complex64]) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * basis.eval(i, z))
            .sum()
    }

    /// `<self, other> = c^H G d`.
    pub fn inner(&self, gram: &GramData, other: &HoloState) -> Complex64 {
        self.coeffs.dotc(&(gram.matrix() * &other.coeffs))
    }

    pub fn norm_sq(&self, gram: &GramData) -> f64 {
        self.inner(gram, self).re
    }

    pub fn normalized(&self, gram: &GramData) -> Result<Self> {
        let n = self.norm_sq(gram).sqrt();
        if n == 0.0 {
            return Err(Error::InvalidInput("cannot normalize the zero state".into()));
        }
        Ok(Self {
            coeffs: &self.coeffs / Complex64::from(n),
        })
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self {
            coeffs: &self.coeffs * a,
        }
    }

    pub fn add(&self, other: &HoloState) -> Self {
        Self {
            coeffs: &self.coeffs + &other.coeffs,
        }
    }

    pub fn sub(&self, other: &HoloState) -> Self {
        Self {
            coeffs: &self.coeffs - &other.coeffs,
        }
    }
}

/// Gram matrix of a basis, its Cholesky factor, and the orthonormalization order.
#[derive(Clone)]
pub struct GramData {
    matrix: DMatrix<Complex64>,
    chol: Cholesky<Complex64, Dyn>,
    ordering: Vec<usize>,
}

impl fmt::Debug for GramData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GramData")
            .field("dim", &self.matrix.nrows())
            .field("ordering", &self.ordering)
            .finish()
    }
}

impl GramData {
    /// Validates Hermitian symmetry and factorizes.
    pub fn from_matrix(matrix: DMatrix<Complex64>, ordering: Vec<usize>) -> Result<Self> {
        let d = matrix.nrows();
        if matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "Gram matrix",
                expected: d,
                found: matrix.ncols(),
            });
        }
        check_permutation(&ordering, d)?;
        let scale = matrix.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for i in 0..d {
            for j in 0..=i {
                if (matrix[(i, j)] - matrix[(j, i)].conj()).norm() > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!(
                        "Gram matrix is not Hermitian at ({i},{j})"
                    )));
                }
            }
        }
        let chol = Cholesky::new(matrix.clone()).ok_or_else(|| {
            Error::NumericallyDependent(format!("Cholesky factorization of the {d}x{d} Gram matrix failed"))
        })?;
        // Rounding can let a dependent family through with a pivot at noise level.
        let l = chol.l_dirty();
        for i in 0..d {
            let pivot = l[(i, i)].norm_sqr();
            if !(pivot > 1e-14 * matrix[(i, i)].re) {
                return Err(Error::NumericallyDependent(format!(
                    "Cholesky pivot {i} is {pivot:e} against a diagonal entry {:e}",
                    matrix[(i, i)].re
                )));
            }
        }
        Ok(Self {
            matrix,
            chol,
            ordering,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Lower-triangular `L` with `L L^H = G`.
    pub fn factor(&self) -> DMatrix<Complex64> {
        self.chol.l()
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_ordering(&self, ordering: Vec<usize>) -> Result<Self> {
        check_permutation(&ordering, self.dim())?;
        Ok(Self {
            ordering,
            ..self.clone()
        })
    }

    /// `G^{-1} b` through the Cholesky factor.
    pub fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.chol.solve(b)
    }

    /// `max |L L^H - G| / max |G|`.
    pub fn reconstruction_residual(&self) -> f64 {
        let l = self.factor();
        let diff = &l * l.adjoint() - &self.matrix;
        max_abs(&diff) / max_abs(&self.matrix)
    }
}

fn check_permutation(ordering: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if ordering.len() != d {
        return Err(Error::DimensionMismatch {
            context: "ordering",
            expected: d,
            found: ordering.len(),
        });
    }
    for &i in ordering {
        if i >= d || seen[i] {
            return Err(Error::InvalidInput(format!(
                "ordering is not a permutation of 0..{d}"
            )));
        }
        seen[i] = true;
    }
    Ok(())
}

pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Label sequence `(-1)^{n+1} floor((n+1)/2)`: `0, 1, -1, 2, -2, ...`.
pub fn alternating_label(n: usize) -> i64 {
    let m = n.div_ceil(2) as i64;
    if n % 2 == 1 {
        m
    } else {
        -m
    }
}

/// Processing order for Gram-Schmidt: labels in the order `0, 1, -1, 2, -2, ...`,
/// followed by any labels the sequence does not reach, in basis order.
pub fn alternating_ordering(labels: &[i64]) -> Vec<usize> {
    let max = labels.iter().map(|l| l.unsigned_abs()).max().unwrap_or(0) as usize;
    let mut order: Vec<usize> = (0..=2 * max)
        .map(alternating_label)
        .filter_map(|l| labels.iter().position(|&x| x == l))
        .collect();
    for i in 0..labels.len() {
        if !order.contains(&i) {
            order.push(i);
        }
    }
    order
}

/// Gram matrix of `basis`: closed forms when the basis has them, quadrature otherwise.
pub fn gram_matrix(basis: &BasisSpec, chart: &FlatChart, rule: &QuadratureRule) -> Result<GramData> {
    let d = basis.len();
    let matrix = if basis.has_closed_form() {
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = basis.closed_inner(i, j).expect("closed form present")?;
            }
        }
        m
    } else {
        gram_by_quadrature(basis, chart, rule)?
    };
    GramData::from_matrix(matrix, alternating_ordering(basis.labels()))
}

/// `<b_p, b_q>` by tensor quadrature, ignoring any closed form.
pub fn gram_by_quadrature(
    basis: &BasisSpec,
    chart: &FlatChart,
    rule: &QuadratureRule,
) -> Result<DMatrix<Complex64>> {
    let d = basis.len();
    let flat = integrate_tangent_vec(chart, rule, d * d, |z, out| {
        let mut v = vec![ZERO; d];
        basis.values_into(z.as_slice(), &mut v);
        for i in 0..d {
            let ci = v[i].conj();
            for j in 0..d {
                out[i * d + j] = ci * v[j];
            }
        }
    })?;
    let mut m = DMatrix::from_row_slice(d, d, &flat);
    // Symmetrize away quadrature rounding.
    let mh = m.adjoint();
    m = (m + mh) * Complex64::from(0.5);
    Ok(m)
}

/// `<e^{a z}, e^{b z}> = exp(conj(a) b)` for the normalized measure on the plane.
pub fn inner_product_exponential(alpha: Complex64, beta: Complex64) -> Complex64 {
    (alpha.conj() * beta).exp()
}

/// `<f, g> = int conj(f) g dmu` by quadrature.
pub fn inner_product_quadrature<F, G>(
    chart: &FlatChart,
    rule: &QuadratureRule,
    f: F,
    g: G,
) -> Result<Complex64>
where
    F: Fn(&TangentComplex) -> Complex64 + Sync,
    G: Fn(&TangentComplex) -> Complex64 + Sync,
{
    integrate_tangent(chart, rule, |z| f(z).conj() * g(z))
}

/// Orthonormal system `beta_j = sum_k C_{kj} b_k` built by Gram-Schmidt.
#[derive(Debug, Clone)]
pub struct Orthonormal {
    coeffs: DMatrix<Complex64>,
    ordering: Vec<usize>,
    alpha_norms_sq: Vec<f64>,
}

impl Orthonormal {
    /// Column `j` holds the coefficients of `beta_j`.
    pub fn coeffs(&self) -> &DMatrix<Complex64> {
        &self.coeffs
    }

    /// Basis position processed at step `j`.
    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    /// `||alpha_j||^2` before normalization.
    pub fn alpha_norms_sq(&self) -> &[f64] {
        &self.alpha_norms_sq
    }

    pub fn len(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.ncols() == 0
    }

    pub fn beta(&self, j: usize) -> HoloState {
        HoloState {
            coeffs: self.coeffs.column(j).into_owned(),
        }
    }

    pub fn eval_beta(&self, basis: &BasisSpec, j: usize, z: &[Complex64]) -> Complex64 {
        let phi = basis.values(z);
        self.coeffs.column(j).dot(&phi)
    }

    /// `max |C^H G C - I|`.
    pub fn orthonormality_defect(&self, gram: &GramData) -> f64 {
        let d = self.len();
        let m = self.coeffs.adjoint() * gram.matrix() * &self.coeffs - DMatrix::identity(d, d);
        max_abs(&m)
    }

    /// `sum_j beta_j(z) conj(beta_j(w))`.
    pub fn kernel_series(&self, basis: &BasisSpec, z: &[Complex64], w: &[Complex64]) -> Complex64 {
        let bz = self.coeffs.transpose() * basis.values(z);
        let bw = self.coeffs.transpose() * basis.values(w);
        bz.iter().zip(bw.iter()).map(|(a, b)| a * b.conj()).sum()
    }

    /// Expansion coefficients `<beta_j, f>` of a state.
    pub fn components(&self, gram: &GramData, f: &HoloState) -> DVector<Complex64> {
        self.coeffs.adjoint() * gram.matrix() * f.coeffs()
    }
}

/// Gram-Schmidt in the order stored in `gram`.
pub fn orthonormalize(gram: &GramData) -> Result<Orthonormal> {
    orthonormalize_with(gram, gram.ordering())
}

/// Gram-Schmidt in a given processing order.
///
/// `alpha_n = b_{o(n)} - sum_{j<n} <alpha_j, b_{o(n)}> / ||alpha_j||^2 alpha_j`, done
/// in the modified (sequential) form, then `beta_n = alpha_n / ||alpha_n||`.
pub fn orthonormalize_with(gram: &GramData, ordering: &[usize]) -> Result<Orthonormal> {
    let d = gram.dim();
    check_permutation(ordering, d)?;
    let g = gram.matrix();
    let mut alphas: Vec<DVector<Complex64>> = Vec::with_capacity(d);
    let mut norms = Vec::with_capacity(d);
    for (step, &k) in ordering.iter().enumerate() {
        let mut a = DVector::<Complex64>::zeros(d);
        a[k] = ONE;
        for (aj, &nj) in alphas.iter().zip(&norms) {
            let proj = aj.dotc(&(g * &a)) / nj;
            a -= aj * proj;
        }
        let ns = a.dotc(&(g * &a)).re;
        if !(ns > 1e-14 * g[(k, k)].re) {
            return Err(Error::PositivityLoss {
                step,
                label: k as i64,
                norm_sq: ns,
            });
        }
        alphas.push(a);
        norms.push(ns);
    }
    let mut coeffs = DMatrix::zeros(d, d);
    for (j, (a, n)) in alphas.iter().zip(&norms).enumerate() {
        coeffs.set_column(j, &(a / Complex64::from(n.sqrt())));
    }
    Ok(Orthonormal {
        coeffs,
        ordering: ordering.to_vec(),
        alpha_norms_sq: norms,
    })
}

/// Reproducing kernel of the span of a basis.
#[derive(Debug, Clone)]
pub struct KernelRep {
    basis: BasisSpec,
    gram: GramData,
    inverse_gram: DMatrix<Complex64>,
}

/// Builds `K(z, conj w) = Phi(z)^T G^{-1} conj(Phi(w))`; `G^{-1}` comes from Cholesky solves.
pub fn reproducing_kernel(gram: &GramData, basis: &BasisSpec) -> Result<KernelRep> {
    if gram.dim() != basis.len() {
        return Err(Error::DimensionMismatch {
            context: "reproducing_kernel",
            expected: basis.len(),
            found: gram.dim(),
        });
    }
    let d = gram.dim();
    let mut inv = gram.solve_matrix(&DMatrix::identity(d, d));
    let inv_h = inv.adjoint();
    inv = (inv + inv_h) * Complex64::from(0.5);
    Ok(KernelRep {
        basis: basis.clone(),
        gram: gram.clone(),
        inverse_gram: inv,
    })
}

impl KernelRep {
    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn gram(&self) -> &GramData {
        &self.gram
    }

    pub fn inverse_gram(&self) -> &DMatrix<Complex64> {
        &self.inverse_gram
    }

    /// `K(z, conj w)`: holomorphic in `z`, antiholomorphic in `w`.
    pub fn eval(&self, z: &[Complex64], w: &[Complex64]) -> Complex64 {
        let pz = self.basis.values(z);
        let pw = self.basis.values(w).map(|c| c.conj());
        pz.dot(&(&self.inverse_gram * pw))
    }

    /// `K(z, conj z)`, real and positive.
    pub fn diag(&self, z: &[Complex64]) -> f64 {
        self.eval(z, z).re
    }

    /// The section `zeta` with `<zeta, f> = f(w)`, i.e. `zeta(z) = K(z, conj w)`.
    pub fn coherent(&self, w: &[Complex64]) -> HoloState {
        let pw = self.basis.values(w).map(|c| c.conj());
        HoloState {
            coeffs: &self.inverse_gram * pw,
        }
    }

    /// Coefficients of `int K(., conj w) f(w) dmu(w)` for `f` in the span: `G^{-1} G c`.
    pub fn reproduce_coeffs(&self, f: &HoloState) -> DVector<Complex64> {
        &self.inverse_gram * (self.gram.matrix() * f.coeffs())
    }

    /// `int K(z, conj w) f(w) dmu(w)` at one point, by quadrature.
    pub fn apply_by_quadrature<F>(
        &self,
        z: &[Complex64],
        f: F,
        chart: &FlatChart,
        rule: &QuadratureRule,
    ) -> Result<Complex64>
    where
        F: Fn(&TangentComplex) -> Complex64 + Sync,
    {
        let left = self.basis.values(z).transpose() * &self.inverse_gram;
        integrate_tangent(chart, rule, |w| {
            let pw = self.basis.values(w.as_slice());
            let k: Complex64 = left.iter().zip(pw.iter()).map(|(a, b)| a * b.conj()).sum();
            k * f(w)
        })
    }
}

/// Orthogonal projection of `f` onto the span: `G^{-1} (<b_l, f>)_l`, moments by quadrature.
pub fn project<F>(
    f: F,
    kernel: &KernelRep,
    chart: &FlatChart,
    rule: &QuadratureRule,
) -> Result<HoloState>
where
    F: Fn(&TangentComplex) -> Complex64 + Sync,
{
    let basis = kernel.basis();
    let d = basis.len();
    let moments = integrate_tangent_vec(chart, rule, d, |z, out| {
        basis.values_into(z.as_slice(), out);
        let fz = f(z);
        for o in out.iter_mut() {
            *o = o.conj() * fz;
        }
    })?;
    let coeffs = kernel.gram().solve(&DVector::from_vec(moments));
    HoloState::from_dvector(coeffs)
}

/// Integral kernel of a coefficient-space operator.
#[derive(Debug, Clone)]
pub struct OperatorKernel {
    basis: BasisSpec,
    operator: DMatrix<Complex64>,
    /// `O G^{-1}`.
    coeff: DMatrix<Complex64>,
    gram: GramData,
}

/// `K_O(z, conj w) = sum_{pq} b_p(z) [O G^{-1}]_{pq} conj(b_q(w))`, so that
/// `int K_O(z, conj w) f(w) dmu(w) = (O f)(z)` on the span.
pub fn operator_kernel(
    operator: &DMatrix<Complex64>,
    gram: &GramData,
    basis: &BasisSpec,
) -> Result<OperatorKernel> {
    let d = basis.len();
    if operator.nrows() != d || operator.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "operator_kernel",
            expected: d,
            found: operator.nrows().max(operator.ncols()),
        });
    }
    if gram.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "operator_kernel: Gram",
            expected: d,
            found: gram.dim(),
        });
    }
    // O G^{-1} = (G^{-1} O^H)^H, with G Hermitian.
    let coeff = gram.solve_matrix(&operator.adjoint()).adjoint();
    Ok(OperatorKernel {
        basis: basis.clone(),
        operator: operator.clone(),
        coeff,
        gram: gram.clone(),
    })
}

impl OperatorKernel {
    pub fn operator(&self) -> &DMatrix<Complex64> {
        &self.operator
    }

    /// `O G^{-1}`.
    pub fn coefficients(&self) -> &DMatrix<Complex64> {
        &self.coeff
    }

    pub fn eval(&self, z: &[Complex64], w: &[Complex64]) -> Complex64 {
        let pz = self.basis.values(z);
        let pw = self.basis.values(w).map(|c| c.conj());
        pz.dot(&(&self.coeff * pw))
    }

    /// Coefficient-space action of the kernel integral, `O G^{-1} G c`.
    pub fn action_coeffs(&self, f: &HoloState) -> DVector<Complex64> {
        &self.coeff * (self.gram.matrix() * f.coeffs())
    }

    /// `int K_O(z, conj w) f(w) dmu(w)` at one point, by quadrature.
    pub fn apply_by_quadrature<F>(
        &self,
        z: &[Complex64],
        f: F,
        chart: &FlatChart,
        rule: &QuadratureRule,
    ) -> Result<Complex64>
    where
        F: Fn(&TangentComplex) -> Complex64 + Sync,
    {
        let left = self.basis.values(z).transpose() * &self.coeff;
        integrate_tangent(chart, rule, |w| {
            let pw = self.basis.values(w.as_slice());
            let k: Complex64 = left.iter().zip(pw.iter()).map(|(a, b)| a * b.conj()).sum();
            k * f(w)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::CylinderBasis;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{E, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cyl_setup(n: usize) -> (BasisSpec, GramData, KernelRep, FlatChart, QuadratureRule) {
        let chart = FlatChart::cylinder();
        let rule = QuadratureRule::for_chart(&chart, 64).unwrap();
        let basis = CylinderBasis::new(n).normalized();
        let gram = gram_matrix(&basis, &chart, &rule).unwrap();
        let kernel = reproducing_kernel(&gram, &basis).unwrap();
        (basis, gram, kernel, chart, rule)
    }

    #[test]
    fn alternating_sequence() {
        let seq: Vec<i64> = (0..7).map(alternating_label).collect();
        assert_eq!(seq, vec![0, 1, -1, 2, -2, 3, -3]);
        let labels: Vec<i64> = (-2..=2).collect();
        assert_eq!(alternating_ordering(&labels), vec![2, 3, 1, 4, 0]);
        let mono: Vec<i64> = (0..=3).collect();
        assert_eq!(alternating_ordering(&mono), vec![0, 1, 2, 3]);
    }

    #[test]
    fn inner_product_examples() {
        let chart = FlatChart::cylinder();
        let rule = QuadratureRule::for_chart(&chart, 64).unwrap();
        let raw = CylinderBasis::new(2).raw().unwrap();
        let i1 = raw.position(1).unwrap();
        let v = inner_product_quadrature(
            &chart,
            &rule,
            |z| raw.eval(i1, z.as_slice()),
            |z| raw.eval(i1, z.as_slice()),
        )
        .unwrap();
        assert_abs_diff_eq!(v.re, E, epsilon = 1e-12);
        let i0 = raw.position(0).unwrap();
        let v = inner_product_quadrature(
            &chart,
            &rule,
            |z| raw.eval(i0, z.as_slice()),
            |z| raw.eval(i0, z.as_slice()),
        )
        .unwrap();
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-13);

        let norm = CylinderBasis::new(2).normalized();
        let (p1, p2) = (norm.position(1).unwrap(), norm.position(2).unwrap());
        let v = inner_product_quadrature(
            &chart,
            &rule,
            |z| norm.eval(p1, z.as_slice()),
            |z| norm.eval(p2, z.as_slice()),
        )
        .unwrap();
        assert_abs_diff_eq!(v.re, (-0.5f64).exp(), epsilon = 1e-13);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn inner_product_is_sesquilinear() {
        let (basis, gram, ..) = cyl_setup(2);
        let f = HoloState::new(vec![c(1.0, 2.0), c(0.0, -1.0), c(0.5, 0.0), c(0.0, 0.0), c(-1.0, 1.0)])
            .unwrap();
        let g = HoloState::new(vec![c(0.0, 1.0), c(2.0, 0.0), c(-0.5, 0.5), c(1.0, 1.0), c(0.0, 0.0)])
            .unwrap();
        let a = c(0.3, -1.2);
        let lhs = f.scale(a).inner(&gram, &g);
        assert!((lhs - a.conj() * f.inner(&gram, &g)).norm() < 1e-12);
        let rhs = f.inner(&gram, &g.scale(a));
        assert!((rhs - a * f.inner(&gram, &g)).norm() < 1e-12);
        let _ = basis;
    }

    #[test]
    fn exponential_closed_form() {
        let i = Complex64::i();
        assert_abs_diff_eq!(inner_product_exponential(i * 2.0, i * 3.0).re, 6.0f64.exp(), epsilon = 1e-9);
        assert_eq!(inner_product_exponential(c(0.0, 0.0), c(0.0, 0.0)), c(1.0, 0.0));
        // alpha = 1, beta = i: quadrature oracle on the plane at order 64.
        let chart = FlatChart::plane();
        let rule = QuadratureRule::for_chart(&chart, 64).unwrap();
        let quad = inner_product_quadrature(
            &chart,
            &rule,
            |z| z.as_slice()[0].exp(),
            |z| (i * z.as_slice()[0]).exp(),
        )
        .unwrap();
        let closed = inner_product_exponential(c(1.0, 0.0), i);
        assert!((quad - closed).norm() <= 1e-12, "{quad} vs {closed}");
        assert!((closed - i.exp()).norm() < 1e-15);
    }

    #[test]
    fn gram_examples() {
        let (_, gram, ..) = cyl_setup(2);
        assert_eq!(gram.dim(), 5);
        for p in 0..5 {
            for q in 0..5 {
                let d = (p as f64) - (q as f64);
                assert_abs_diff_eq!(gram.matrix()[(p, q)].re, (-d * d / 2.0).exp(), epsilon = 1e-15);
            }
        }
        assert!(gram.reconstruction_residual() < 1e-10);

        let chart = FlatChart::cylinder();
        let rule = QuadratureRule::for_chart(&chart, 64).unwrap();
        let raw = CylinderBasis::new(2).raw().unwrap();
        let g = gram_matrix(&raw, &chart, &rule).unwrap();
        let i2 = raw.position(2).unwrap();
        assert_abs_diff_eq!(g.matrix()[(i2, i2)].re, 4.0f64.exp(), epsilon = 1e-10);

        let mono = BasisSpec::monomial(5);
        let g = gram_matrix(&mono, &FlatChart::plane(), &rule).unwrap();
        assert_eq!(g.matrix(), &DMatrix::identity(6, 6));
        // Orthonormality of the monomials also holds under quadrature.
        let q = gram_by_quadrature(&mono.without_closed_form(), &FlatChart::plane(), &rule).unwrap();
        assert!(max_abs(&(q - DMatrix::identity(6, 6))) < 1e-12);
    }

    #[test]
    fn dependent_basis_is_reported() {
        let basis = BasisSpec::new("dup", vec![0, 1], |_, z| z[0].exp()).unwrap();
        let chart = FlatChart::plane();
        let rule = QuadratureRule::for_chart(&chart, 16).unwrap();
        let err = gram_matrix(&basis, &chart, &rule).unwrap_err();
        assert!(matches!(err, Error::NumericallyDependent(_)), "{err}");
        assert!(BasisSpec::new("dup", vec![1, 1], |_, z| z[0]).is_err());
    }

    #[test]
    fn gram_schmidt_first_steps() {
        let (_, gram, ..) = cyl_setup(2);
        let on = orthonormalize(&gram).unwrap();
        let pos = |k: i64| (k + 2) as usize;
        assert_eq!(on.ordering(), &[pos(0), pos(1), pos(-1), pos(2), pos(-2)]);
        // beta_0 = phi~_0.
        let b0 = on.beta(0);
        assert_abs_diff_eq!(b0.coeffs()[pos(0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b0.coeffs().iter().map(|c| c.norm()).sum::<f64>(), 1.0, epsilon = 1e-15);
        // alpha_1 = phi~_1 - e^{-1/2} phi~_0 with squared norm 1 - e^{-1}.
        assert_abs_diff_eq!(on.alpha_norms_sq()[1], 1.0 - (-1.0f64).exp(), epsilon = 1e-14);
        let b1 = on.beta(1);
        let s = on.alpha_norms_sq()[1].sqrt();
        assert_abs_diff_eq!(b1.coeffs()[pos(1)].re * s, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b1.coeffs()[pos(0)].re * s, -(-0.5f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn orthonormal_at_n4_by_quadrature() {
        let (basis, gram, _, chart, rule) = cyl_setup(4);
        let on = orthonormalize(&gram).unwrap();
        assert!(on.orthonormality_defect(&gram) < 1e-8);
        for i in 0..on.len() {
            for j in 0..on.len() {
                let v = inner_product_quadrature(
                    &chart,
                    &rule,
                    |z| on.eval_beta(&basis, i, z.as_slice()),
                    |z| on.eval_beta(&basis, j, z.as_slice()),
                )
                .unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).norm() < 1e-8, "({i},{j}) {v}");
            }
        }
    }

    #[test]
    fn kernel_single_element() {
        let basis = CylinderBasis::new(0).normalized();
        let chart = FlatChart::cylinder();
        let rule = QuadratureRule::for_chart(&chart, 8).unwrap();
        let gram = gram_matrix(&basis, &chart, &rule).unwrap();
        let k = reproducing_kernel(&gram, &basis).unwrap();
        for (z, w) in [(c(0.3, 0.1), c(-2.0, 0.7)), (c(5.0, -1.0), c(0.0, 0.0))] {
            assert!((k.eval(&[z], &[w]) - 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn monomial_kernel_matches_partial_exponential() {
        // The truncated kernel is exactly the partial sum of e^{z conj w}.
        let basis = BasisSpec::monomial(12);
        let chart = FlatChart::plane();
        let rule = QuadratureRule::for_chart(&chart, 32).unwrap();
        let gram = gram_matrix(&basis, &chart, &rule).unwrap();
        let k = reproducing_kernel(&gram, &basis).unwrap();
        for (z, w) in [(c(0.4, -0.2), c(0.1, 0.9)), (c(1.0, 0.5), c(-0.7, 0.3)), (c(1.5, 0.0), c(1.5, 0.0))] {
            let x = z * w.conj();
            let mut term = c(1.0, 0.0);
            let mut partial = term;
            for m in 1..=12u32 {
                term *= x / f64::from(m);
                partial += term;
            }
            let got = k.eval(&[z], &[w]);
            assert!((got - partial).norm() <= 1e-12 * partial.norm().max(1.0));
            // Versus the full exponential the gap is the series tail.
            let tail_bound = x.norm().powi(13) / 6_227_020_800.0 * 1.2;
            assert!((got - x.exp()).norm() <= tail_bound.max(1e-13));
        }
    }

    #[test]
    fn kernel_hermitian_and_positive() {
        let (_, _, k, ..) = cyl_setup(8);
        let pts: Vec<Complex64> = (0..5)
            .map(|i| c(-PI + 1.3 * i as f64, -1.0 + 0.5 * i as f64))
            .collect();
        for &z in &pts {
            assert!(k.diag(&[z]) > 0.0);
            assert!(k.eval(&[z], &[z]).im.abs() < 1e-12 * k.diag(&[z]));
            for &w in &pts {
                let a = k.eval(&[z], &[w]);
                let b = k.eval(&[w], &[z]);
                assert!((a - b.conj()).norm() <= 1e-10 * a.norm().max(1.0));
            }
        }
    }

    #[test]
    fn coherent_state_reproduces_point_values() {
        let (basis, gram, k, ..) = cyl_setup(8);
        let f = HoloState::new((0..17).map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos())).collect())
            .unwrap();
        for w in [c(0.2, 0.3), c(-2.5, -0.8)] {
            let zeta = k.coherent(&[w]);
            let v = zeta.inner(&gram, &f);
            assert!((v - f.eval(&basis, &[w])).norm() < 1e-10 * v.norm().max(1.0));
            // Equality case of the pointwise bound.
            let lhs = zeta.eval(&basis, &[w]).norm_sqr();
            let rhs = k.diag(&[w]) * zeta.norm_sq(&gram);
            assert!((lhs - rhs).abs() <= 1e-8 * rhs);
        }
    }

    #[test]
    fn projection_examples() {
        let (basis, gram, k, chart, rule) = cyl_setup(8);
        let i2 = basis.position(2).unwrap();
        let p = project(|z| basis.eval(i2, z.as_slice()), &k, &chart, &rule).unwrap();
        for (i, cf) in p.coeffs().iter().enumerate() {
            let expect = if i == i2 { 1.0 } else { 0.0 };
            assert!((cf - expect).norm() < 1e-10, "{i}: {cf}");
        }

        // Idempotence on an arbitrary state; full-span moments need the finer rule.
        let rule = QuadratureRule::for_chart(&chart, 128).unwrap();
        let f = HoloState::new((0..17).map(|i| c(1.0 / (1.0 + i as f64), 0.1 * i as f64)).collect())
            .unwrap();
        let p1 = project(|z| f.eval(&basis, z.as_slice()), &k, &chart, &rule).unwrap();
        let p2 = project(|z| p1.eval(&basis, z.as_slice()), &k, &chart, &rule).unwrap();
        assert!(p1.sub(&p2).norm_sq(&gram).sqrt() <= 1e-10);

        // conj(w) has no holomorphic component in the plane's Bargmann space.
        let mono = BasisSpec::monomial(12);
        let plane = FlatChart::plane();
        let gm = gram_matrix(&mono, &plane, &rule).unwrap();
        let km = reproducing_kernel(&gm, &mono).unwrap();
        let p = project(|z| z.as_slice()[0].conj(), &km, &plane, &rule).unwrap();
        assert!(p.coeffs().iter().all(|c| c.norm() < 1e-13));
    }

    #[test]
    fn operator_kernel_examples() {
        let (basis, gram, k, chart, rule) = cyl_setup(8);
        let d = basis.len();
        let id = operator_kernel(&DMatrix::identity(d, d), &gram, &basis).unwrap();
        for (z, w) in [(c(0.3, 0.2), c(-1.0, 0.4)), (c(2.0, -0.5), c(0.0, 0.0))] {
            assert!((id.eval(&[z], &[w]) - k.eval(&[z], &[w])).norm() < 1e-12);
        }

        let labels = basis.labels().to_vec();
        let h = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            labels.iter().map(|&l| c((l * l) as f64 / 2.0, 0.0)),
        ));
        let kh = operator_kernel(&h, &gram, &basis).unwrap();
        let i1 = basis.position(1).unwrap();
        let z = c(0.7, -0.3);
        let v = kh
            .apply_by_quadrature(&[z], |w| basis.eval(i1, w.as_slice()), &chart, &rule)
            .unwrap();
        assert!((v - 0.5 * basis.eval(i1, &[z])).norm() < 1e-8);

        let lower = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            labels.iter().map(|&l| c(0.0, l as f64)),
        ));
        let kl = operator_kernel(&lower, &gram, &basis).unwrap();
        let i2 = basis.position(2).unwrap();
        let v = kl
            .apply_by_quadrature(&[z], |w| basis.eval(i2, w.as_slice()), &chart, &rule)
            .unwrap();
        assert!((v - c(0.0, 2.0) * basis.eval(i2, &[z])).norm() < 1e-8);

        assert!(operator_kernel(&DMatrix::identity(3, 3), &gram, &basis).is_err());
    }

    #[test]
    fn basis_functions_are_holomorphic() {
        let basis = CylinderBasis::new(3).normalized();
        for idx in 0..basis.len() {
            for z in [c(0.1, 0.2), c(-2.0, 0.9)] {
                assert!(basis.holomorphy_residual(idx, z, 1e-5) < 1e-6);
            }
        }
        let anti = BasisSpec::new("anti", vec![0], |_, z| z[0].conj()).unwrap();
        assert!(anti.holomorphy_residual(0, c(0.3, 0.3), 1e-5) > 0.9);
    }
}
