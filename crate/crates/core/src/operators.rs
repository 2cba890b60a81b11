//! Ladder operators and the free Hamiltonian as matrices on `phi~`-coefficients.
//!
//! `a` is holomorphic differentiation, diagonal with entry `ik` on `phi~_k`.
//! `a+` is the projection of multiplication by the coordinate: its matrix is
//! `G^{-1} T` with `T_{lk} = <phi~_l, z phi~_k> = -il e^{-(l-k)^2/2}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bargmann::{max_abs, GramData, HoloState, KernelRep, Orthonormal};
use crate::error::{Error, Result};
use crate::geometry::FlatChart;
use crate::quadrature::{integrate_tangent_vec, QuadratureRule};

/// A square matrix acting on the coefficients of the truncated cylinder basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    truncation: usize,
    entries: DMatrix<Complex64>,
    description: String,
}

impl OperatorMatrix {
    pub fn new(truncation: usize, entries: DMatrix<Complex64>, description: impl Into<String>) -> Result<Self> {
        let d = 2 * truncation + 1;
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "OperatorMatrix: 2N+1",
                expected: d,
                found: entries.nrows().max(entries.ncols()),
            });
        }
        if entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("operator matrix has non-finite entries".into()));
        }
        Ok(Self {
            truncation,
            entries,
            description: description.into(),
        })
    }

    /// Diagonal operator with entry `f(k)` on `phi~_k`.
    pub fn diagonal(truncation: usize, f: impl Fn(i64) -> Complex64, description: impl Into<String>) -> Self {
        let n = truncation as i64;
        let diag = DVector::from_iterator(2 * truncation + 1, (-n..=n).map(f));
        Self {
            truncation,
            entries: DMatrix::from_diagonal(&diag),
            description: description.into(),
        }
    }

    pub fn zeros(truncation: usize) -> Self {
        Self::diagonal(truncation, |_| Complex64::new(0.0, 0.0), "zero")
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn apply(&self, state: &HoloState) -> Result<HoloState> {
        if state.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "OperatorMatrix::apply",
                expected: self.dim(),
                found: state.len(),
            });
        }
        HoloState::from_dvector(&self.entries * state.coeffs())
    }

    /// Largest off-diagonal magnitude.
    pub fn off_diagonal_max(&self) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    m = m.max(self.entries[(i, j)].norm());
                }
            }
        }
        m
    }

    /// The diagonal, if the off-diagonal part vanishes to `tol` relative to the largest entry.
    pub fn diagonal_entries(&self, tol: f64) -> Option<Vec<Complex64>> {
        let scale = max_abs(&self.entries).max(1.0);
        (self.off_diagonal_max() <= tol * scale).then(|| self.entries.diagonal().iter().copied().collect())
    }

    /// Matrix elements `<beta_i, M beta_j> = (C^H G M C)_{ij}` in an orthonormal system.
    pub fn in_orthonormal_basis(&self, on: &Orthonormal, gram: &GramData) -> DMatrix<Complex64> {
        let c = on.coeffs();
        c.adjoint() * gram.matrix() * &self.entries * c
    }

    pub fn compose(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        OperatorMatrix::new(
            self.truncation,
            &self.entries * &other.entries,
            format!("{} {}", self.description, other.description),
        )
    }
}

/// `a`: `diag(ik)`.
pub fn ladder_lower(truncation: usize) -> OperatorMatrix {
    OperatorMatrix::diagonal(truncation, |k| Complex64::new(0.0, k as f64), "lower")
}

/// `<phi~_l, z phi~_k> = -il e^{-(l-k)^2/2}`.
pub fn multiplication_moments(truncation: usize) -> DMatrix<Complex64> {
    let n = truncation as i64;
    let d = 2 * truncation + 1;
    DMatrix::from_fn(d, d, |i, j| {
        let (l, k) = (i as i64 - n, j as i64 - n);
        let g = (-0.5 * ((l - k) * (l - k)) as f64).exp();
        Complex64::new(0.0, -(l as f64) * g)
    })
}

fn check_gram(gram: &GramData, truncation: usize) -> Result<()> {
    let d = 2 * truncation + 1;
    if gram.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "ladder_raise: Gram",
            expected: d,
            found: gram.dim(),
        });
    }
    Ok(())
}

/// `a+ = G^{-1} T` from the closed-form moments.
pub fn ladder_raise(gram: &GramData, truncation: usize) -> Result<OperatorMatrix> {
    check_gram(gram, truncation)?;
    let m = gram.solve_matrix(&multiplication_moments(truncation));
    OperatorMatrix::new(truncation, m, "raise")
}

/// `a+ = G^{-1} T` with `T` integrated by quadrature, i.e. the projection of `w psi`.
pub fn ladder_raise_projected(
    kernel: &KernelRep,
    truncation: usize,
    chart: &FlatChart,
    rule: &QuadratureRule,
) -> Result<OperatorMatrix> {
    check_gram(kernel.gram(), truncation)?;
    let basis = kernel.basis();
    let d = basis.len();
    let flat = integrate_tangent_vec(chart, rule, d * d, |z, out| {
        let w = z.as_slice()[0];
        let v = basis.values(z.as_slice());
        for l in 0..d {
            let cl = v[l].conj();
            for k in 0..d {
                out[l * d + k] = cl * w * v[k];
            }
        }
    })?;
    let t = DMatrix::from_row_slice(d, d, &flat);
    OperatorMatrix::new(truncation, kernel.gram().solve_matrix(&t), "raise (projected)")
}

/// `H = -a^2 / 2 = diag(k^2 / 2)`.
pub fn hamiltonian_free(truncation: usize) -> OperatorMatrix {
    OperatorMatrix::diagonal(
        truncation,
        |k| Complex64::new((k * k) as f64 / 2.0, 0.0),
        "free hamiltonian",
    )
}

/// Residuals of `a+ = a^H` in an orthonormal system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjointness {
    /// Max entry of `R - L^H` after dropping the last `2 * buffer` processed elements.
    pub central: f64,
    pub full: f64,
    /// Size of the central block.
    pub block: usize,
}

/// Compares `a+` and `a` in the orthonormal system `on`. Elements are taken in
/// processing order, so the dropped ones are the outermost labels.
pub fn adjointness_residual(
    raise: &OperatorMatrix,
    lower: &OperatorMatrix,
    on: &Orthonormal,
    gram: &GramData,
    buffer: usize,
) -> Result<Adjointness> {
    let d = raise.dim();
    if lower.dim() != d || on.len() != d {
        return Err(Error::DimensionMismatch {
            context: "adjointness_residual",
            expected: d,
            found: lower.dim().min(on.len()),
        });
    }
    if 2 * buffer >= d {
        return Err(Error::InvalidInput(format!("buffer {buffer} leaves no central block of {d}")));
    }
    let r = raise.in_orthonormal_basis(on, gram);
    let l = lower.in_orthonormal_basis(on, gram);
    let diff = r - l.adjoint();
    let block = d - 2 * buffer;
    Ok(Adjointness {
        central: max_abs(&diff.view((0, 0), (block, block)).into_owned()),
        full: max_abs(&diff),
        block,
    })
}
