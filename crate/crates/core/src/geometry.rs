//! Flat configuration spaces and their cotangent phase spaces in coordinates.
//!
//! A [`FlatChart`] carries a constant metric `sigma` on the base and a period
//! (or none) per coordinate. Christoffel symbols vanish in such a chart, but
//! [`FlatChart::complexify`] accepts them anyway so the general coordinate
//! formula can be exercised.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identification of one base coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Period {
    Periodic(f64),
    Aperiodic,
}

impl Period {
    pub fn length(&self) -> Option<f64> {
        match *self {
            Period::Periodic(l) => Some(l),
            Period::Aperiodic => None,
        }
    }
}

/// Holomorphic tangent coordinates `z^i`, one complex number per base dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentComplex(Vec<Complex64>);

impl TangentComplex {
    pub fn new(z: Vec<Complex64>) -> Result<Self> {
        if z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tangent coordinates must be finite, got {z:?}"
            )));
        }
        Ok(Self(z))
    }

    /// Builds coordinates without the finiteness check. Used on hot quadrature paths
    /// where the nodes are finite by construction.
    pub(crate) fn from_vec_unchecked(z: Vec<Complex64>) -> Self {
        Self(z)
    }

    pub fn scalar(z: Complex64) -> Self {
        Self(vec![z])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// A point of the phase space `(q, p)` in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

/// Christoffel symbols `Gamma^k_{ml}` of the base chart, stored `[k][m][l]`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for m in 0..n {
                for l in 0..n {
                    data.push(f(k, m, l));
                }
            }
        }
        Self { n, data }
    }

    pub fn get(&self, k: usize, m: usize, l: usize) -> f64 {
        self.data[(k * self.n + m) * self.n + l]
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Flat base metric with per-coordinate periods.
#[derive(Debug, Clone)]
pub struct FlatChart {
    n: usize,
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    /// Lower Cholesky factor, `sigma = L L^T`.
    sigma_chol: DMatrix<f64>,
    det: f64,
    periods: Vec<Period>,
}

impl FlatChart {
    pub fn new(n: usize, sigma: DMatrix<f64>, periods: Vec<Period>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidChart("dimension must be positive".into()));
        }
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::InvalidChart(format!(
                "metric must be {n}x{n}, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if periods.len() != n {
            return Err(Error::InvalidChart(format!(
                "expected {n} period entries, got {}",
                periods.len()
            )));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidChart("metric has non-finite entries".into()));
        }
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidChart(format!(
                        "metric is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        for (i, p) in periods.iter().enumerate() {
            if let Period::Periodic(l) = p {
                if !(l.is_finite() && *l > 0.0) {
                    return Err(Error::InvalidChart(format!(
                        "period of coordinate {i} must be positive, got {l}"
                    )));
                }
            }
        }
        let chol = Cholesky::new(sigma.clone())
            .ok_or_else(|| Error::InvalidChart("metric is not positive-definite".into()))?;
        let l = chol.l();
        let det = l.diagonal().iter().map(|d| d * d).product();
        let sigma_inv = chol.inverse();
        Ok(Self {
            n,
            sigma,
            sigma_inv,
            sigma_chol: l,
            det,
            periods,
        })
    }

    /// The circle with its euclidean metric; the phase space is the cylinder.
    pub fn cylinder() -> Self {
        Self::new(1, DMatrix::identity(1, 1), vec![Period::Periodic(2.0 * PI)])
            .expect("unit cylinder chart is valid")
    }

    /// The real line; the tangent pairing is the ordinary Bargmann space.
    pub fn plane() -> Self {
        Self::new(1, DMatrix::identity(1, 1), vec![Period::Aperiodic])
            .expect("plane chart is valid")
    }

    /// The flat `n`-torus with period `2 pi` in every direction.
    pub fn torus(n: usize) -> Result<Self> {
        Self::new(n, DMatrix::identity(n, n), vec![Period::Periodic(2.0 * PI); n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    pub(crate) fn sigma_cholesky(&self) -> &DMatrix<f64> {
        &self.sigma_chol
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    /// `z^i = qdot^i + i sigma^{im} (pdot_m - p_k Gamma^k_{ml} qdot^l)`.
    ///
    /// `gamma = None` means the flat chart (all symbols zero).
    pub fn complexify(
        &self,
        qdot: &[f64],
        pdot: &[f64],
        p: &[f64],
        gamma: Option<&Christoffel>,
    ) -> Result<TangentComplex> {
        let n = self.n;
        for (len, context) in [
            (qdot.len(), "complexify: qdot"),
            (pdot.len(), "complexify: pdot"),
            (p.len(), "complexify: p"),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    found: len,
                });
            }
        }
        if let Some(g) = gamma {
            if g.dim() != n {
                return Err(Error::DimensionMismatch {
                    context: "complexify: Gamma",
                    expected: n,
                    found: g.dim(),
                });
            }
        }

        // Covariant momentum rate pdot_m - p_k Gamma^k_{ml} qdot^l.
        let mut cov = DVector::from_column_slice(pdot);
        if let Some(g) = gamma {
            for m in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        s += p[k] * g.get(k, m, l) * qdot[l];
                    }
                }
                cov[m] -= s;
            }
        }
        let raised = &self.sigma_inv * cov;
        TangentComplex::new(
            (0..n)
                .map(|i| Complex64::new(qdot[i], raised[i]))
                .collect(),
        )
    }

    /// Exponential map of the flat phase space: `q = x mod L`, `p = y`.
    ///
    /// Periodic coordinates are reduced into `(-L/2, L/2]`.
    pub fn exp_map(&self, x: &[f64], y: &[f64]) -> Result<PhasePoint> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "exp_map",
                expected: self.n,
                found: x.len().max(y.len()),
            });
        }
        let q = x
            .iter()
            .zip(&self.periods)
            .map(|(&xi, period)| match period {
                Period::Periodic(l) => reduce_periodic(xi, *l),
                Period::Aperiodic => xi,
            })
            .collect();
        Ok(PhasePoint { q, p: y.to_vec() })
    }

    /// `|z|^2 = sigma_ij z^i conj(z^j)`.
    pub fn norm_sq(&self, z: &TangentComplex) -> Result<f64> {
        let z = z.as_slice();
        if z.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "norm_sq",
                expected: self.n,
                found: z.len(),
            });
        }
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.sigma[(i, j)] * z[i] * z[j].conj();
            }
        }
        // sigma is real symmetric, so the imaginary part is rounding only.
        Ok(s.re.max(0.0))
    }

    /// Density of the pulled-back Riemannian volume against Lebesgue measure: `det sigma`.
    pub fn volume_factor(&self) -> f64 {
        self.det
    }

    pub fn to_desc(&self) -> ChartDesc {
        ChartDesc {
            n: self.n,
            sigma: self.sigma.transpose().iter().copied().collect(),
            periods: self.periods.iter().map(Period::length).collect(),
        }
    }
}

fn reduce_periodic(x: f64, l: f64) -> f64 {
    let r = x - l * ((x - 0.5 * l) / l).ceil();
    // Guard the closed end of (-L/2, L/2] against rounding just below -L/2.
    if r <= -0.5 * l {
        r + l
    } else {
        r
    }
}

/// JSON form of a chart: `{n, sigma: row-major, periods: [number | null]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDesc {
    pub n: usize,
    pub sigma: Vec<f64>,
    pub periods: Vec<Option<f64>>,
}

impl ChartDesc {
    pub fn build(&self) -> Result<FlatChart> {
        if self.sigma.len() != self.n * self.n {
            return Err(Error::InvalidChart(format!(
                "sigma needs {} entries, got {}",
                self.n * self.n,
                self.sigma.len()
            )));
        }
        let sigma = DMatrix::from_row_slice(self.n, self.n, &self.sigma);
        let periods = self
            .periods
            .iter()
            .map(|p| match p {
                Some(l) => Period::Periodic(*l),
                None => Period::Aperiodic,
            })
            .collect();
        FlatChart::new(self.n, sigma, periods)
    }
}
