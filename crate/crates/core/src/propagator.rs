//! Short-time evolution, its iteration, and the Green function on the circle.
//!
//! The infinitesimal operator is
//! `u_D phi(m) = int K(m, conj w) phi(w) exp(-i D K_H(m, conj w) / K(m, conj w)) dmu`,
//! with `w = exp_m(z)` and the Gaussian centred at `m`.
//!
//! The factor `exp(-i D K_H / K)` is entire and antiholomorphic in `w` wherever
//! `K` does not vanish, and for `phi = phi~_k` the integrand is that factor times
//! `phi~_k(m) e^{ikz}`. The Gaussian pairing `int F(conj z) e^{bz} dmu = F(b)`
//! therefore evaluates the integral mode by mode: `u_D phi~_k = L_k phi~_k` with
//!
//! `L_k = kappa_k exp(-i D eta_k / kappa_k)`,
//!
//! where `kappa_k = (G^{-1} G)_{kk}` is the kernel and `eta_k = (O G^{-1} G)_{kk}`
//! the operator kernel at the pairing point. This needs a translation-invariant
//! (diagonal) generator; other generators are refused.
//!
//! A literal quadrature of the integral is not usable: `K_H / K` grows like
//! `e^{2N|Im w|}` and the exponential of it overflows at the outer nodes.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bargmann::{operator_kernel, project, HoloState, KernelRep, OperatorKernel};
use crate::defaults;
use crate::error::{Error, Result};
use crate::geometry::FlatChart;
use crate::operators::OperatorMatrix;
use crate::quadrature::QuadratureRule;

/// Relative size of off-diagonal entries tolerated in a "diagonal" generator.
const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PropagatorConfig {
    pub hamiltonian: OperatorMatrix,
    pub t: f64,
    pub n_steps: usize,
    pub division_guard: f64,
    pub epsilon: f64,
}

impl PropagatorConfig {
    pub fn new(hamiltonian: OperatorMatrix, t: f64, n_steps: usize) -> Self {
        Self {
            hamiltonian,
            t,
            n_steps,
            division_guard: defaults::DIVISION_GUARD,
            epsilon: defaults::EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be at least 1".into()));
        }
        if !self.t.is_finite() {
            return Err(Error::InvalidInput("time must be finite".into()));
        }
        if !(self.division_guard > 0.0) {
            return Err(Error::InvalidInput("division guard must be positive".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidInput("epsilon must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn step_size(&self) -> f64 {
        self.t / self.n_steps as f64
    }
}

/// Per-mode factors `L_k` of `u_D`.
pub fn mode_factors(kernel: &KernelRep, kh: &OperatorKernel, delta: f64, guard: f64) -> Result<Vec<Complex64>> {
    let op = kh.operator();
    let d = op.nrows();
    if d != kernel.basis().len() {
        return Err(Error::DimensionMismatch {
            context: "mode_factors",
            expected: kernel.basis().len(),
            found: d,
        });
    }
    let scale = op.iter().map(|c| c.norm()).fold(1.0, f64::max);
    for i in 0..d {
        for j in 0..d {
            if i != j && op[(i, j)].norm() > DIAGONAL_TOL * scale {
                return Err(Error::NotDiagonal(format!(
                    "entry ({i}, {j}) = {}; only translation-invariant generators are supported",
                    op[(i, j)]
                )));
            }
        }
    }
    let g = kernel.gram().matrix();
    let reproduce = kernel.inverse_gram() * g;
    let action = kh.coefficients() * g;
    (0..d)
        .map(|k| {
            let kappa = reproduce[(k, k)];
            // The kernel at the pairing point is normalized to K(m, m) = 1 in this frame.
            if kappa.norm() < guard {
                return Err(Error::DivisionGuard {
                    location: format!("mode label {}", kernel.basis().labels()[k]),
                    magnitude: kappa.norm(),
                    threshold: guard,
                });
            }
            let eta = action[(k, k)];
            Ok(kappa * (Complex64::new(0.0, -delta) * eta / kappa).exp())
        })
        .collect()
}

/// `(u_D phi)(m)` at one point.
pub fn step_value(state: &HoloState, kernel: &KernelRep, factors: &[Complex64], m: &[Complex64]) -> Complex64 {
    let phi = kernel.basis().values(m);
    state
        .coeffs()
        .iter()
        .zip(factors)
        .zip(phi.iter())
        .map(|((c, l), p)| c * l * p)
        .sum()
}

/// One step: the integral evaluated at the quadrature nodes, projected onto the span.
pub fn infinitesimal_step(
    state: &HoloState,
    kernel: &KernelRep,
    kh: &OperatorKernel,
    delta: f64,
    guard: f64,
    chart: &FlatChart,
    rule: &QuadratureRule,
) -> Result<HoloState> {
    let factors = mode_factors(kernel, kh, delta, guard)?;
    project(|m| step_value(state, kernel, &factors, m.as_slice()), kernel, chart, rule)
}

/// `u_D` as a matrix, one projected column per basis element.
#[derive(Debug, Clone)]
pub struct StepOperator {
    delta: f64,
    matrix: DMatrix<Complex64>,
}

impl StepOperator {
    pub fn build(
        kernel: &KernelRep,
        kh: &OperatorKernel,
        delta: f64,
        guard: f64,
        chart: &FlatChart,
        rule: &QuadratureRule,
    ) -> Result<Self> {
        let d = kernel.basis().len();
        let factors = mode_factors(kernel, kh, delta, guard)?;
        let columns: Vec<DVector<Complex64>> = (0..d)
            .into_par_iter()
            .map(|j| {
                let e = HoloState::basis_element(d, j);
                project(|m| step_value(&e, kernel, &factors, m.as_slice()), kernel, chart, rule)
                    .map(HoloState::into_coeffs)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            delta,
            matrix: DMatrix::from_columns(&columns),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn apply(&self, state: &HoloState) -> Result<HoloState> {
        HoloState::from_dvector(&self.matrix * state.coeffs())
    }
}

/// `(u_{t/n})^n phi`.
pub fn evolve(
    state: &HoloState,
    config: &PropagatorConfig,
    kernel: &KernelRep,
    chart: &FlatChart,
    rule: &QuadratureRule,
) -> Result<HoloState> {
    let mut traj = evolve_trajectory(state, config, kernel, chart, rule)?;
    Ok(traj.pop().expect("trajectory holds the initial state"))
}

/// All iterates `phi, u phi, ..., u^n phi`. Errors carry the (1-based) step index.
pub fn evolve_trajectory(
    state: &HoloState,
    config: &PropagatorConfig,
    kernel: &KernelRep,
    chart: &FlatChart,
    rule: &QuadratureRule,
) -> Result<Vec<HoloState>> {
    config.validate()?;
    let at = |step: usize| move |e: Error| Error::Step {
        step,
        source: Box::new(e),
    };
    let kh = operator_kernel(config.hamiltonian.entries(), kernel.gram(), kernel.basis()).map_err(at(1))?;
    let step = StepOperator::build(kernel, &kh, config.step_size(), config.division_guard, chart, rule)
        .map_err(at(1))?;
    let mut out = Vec::with_capacity(config.n_steps + 1);
    out.push(state.clone());
    for s in 1..=config.n_steps {
        let next = step.apply(out.last().expect("non-empty")).map_err(at(s))?;
        out.push(next);
    }
    Ok(out)
}

/// `c_k -> e^{-i h_k t} c_k` for a diagonal generator.
pub fn evolve_exact(state: &HoloState, h: &OperatorMatrix, t: f64) -> Result<HoloState> {
    let diag = h
        .diagonal_entries(DIAGONAL_TOL)
        .ok_or_else(|| Error::NotDiagonal(format!("{}; use evolve", h.description())))?;
    if diag.len() != state.len() {
        return Err(Error::DimensionMismatch {
            context: "evolve_exact",
            expected: diag.len(),
            found: state.len(),
        });
    }
    let coeffs = state
        .coeffs()
        .iter()
        .zip(&diag)
        .map(|(c, h)| c * (Complex64::new(0.0, -t) * h).exp())
        .collect();
    HoloState::new(coeffs)
}

/// `T = tau (1 - i eps)`.
pub fn regularized_time(tau: f64, epsilon: f64) -> Complex64 {
    Complex64::new(tau, -tau * epsilon)
}

/// `sum_{|n| <= n_max} (2 pi i T)^{-1/2} exp(i (theta - theta0 + 2 pi n)^2 / (2T))`,
/// principal square root.
pub fn greens_winding(theta: f64, theta0: f64, t: Complex64, n_max: usize) -> Result<Complex64> {
    if !(t.im < 0.0) {
        return Err(Error::Divergent(format!(
            "winding sum at T = {t} does not converge absolutely; use T (1 - i eps) with eps > 0"
        )));
    }
    let pre = (Complex64::new(0.0, 2.0 * PI) * t).sqrt().inv();
    let n = n_max as i64;
    Ok((-n..=n)
        .map(|k| {
            let u = theta - theta0 + 2.0 * PI * k as f64;
            pre * (Complex64::new(0.0, u * u) / (2.0 * t)).exp()
        })
        .sum())
}

/// Bound on the dropped modes of the spectral sum.
pub fn greens_spectral_tail(t: Complex64, modes: usize) -> f64 {
    // |e^{-ik^2 T/2}| = e^{k^2 Im T / 2}; geometric bound from k = M + 1 on.
    let a = 0.5 * t.im;
    let m = modes as f64 + 1.0;
    let first = (a * m * m).exp();
    let ratio = (a * (2.0 * m + 1.0)).exp();
    2.0 * first / (1.0 - ratio) / (2.0 * PI)
}

/// `(1/2pi) sum_{|k| <= M} e^{ik(theta - theta0)} e^{-ik^2 T/2}`.
pub fn greens_spectral(theta: f64, theta0: f64, t: Complex64, modes: usize, tolerance: f64) -> Result<Complex64> {
    if !(t.im < 0.0) {
        return Err(Error::Divergent(format!(
            "mode sum at T = {t} does not converge absolutely; use T (1 - i eps) with eps > 0"
        )));
    }
    let estimate = greens_spectral_tail(t, modes);
    if estimate > tolerance {
        return Err(Error::TailTooLarge {
            estimate,
            tolerance,
            hint: "increase the mode cutoff M or epsilon",
        });
    }
    let m = modes as i64;
    let s: Complex64 = (-m..=m)
        .map(|k| {
            let k = k as f64;
            Complex64::from_polar(1.0, k * (theta - theta0)) * (Complex64::new(0.0, -0.5 * k * k) * t).exp()
        })
        .sum();
    Ok(s / (2.0 * PI))
}

/// One row of a Green-function comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreensSample {
    pub theta: f64,
    pub winding: Complex64,
    pub spectral: Complex64,
    pub difference: f64,
}

/// Both sums on the grid `theta0 + [-pi, pi)` with `points` nodes.
pub fn greens_table(
    theta0: f64,
    t: Complex64,
    modes: usize,
    windings: usize,
    points: usize,
    tolerance: f64,
) -> Result<Vec<GreensSample>> {
    (0..points)
        .map(|j| {
            let theta = theta0 - PI + 2.0 * PI * j as f64 / points as f64;
            let winding = greens_winding(theta, theta0, t, windings)?;
            let spectral = greens_spectral(theta, theta0, t, modes, tolerance)?;
            Ok(GreensSample {
                theta,
                winding,
                spectral,
                difference: (winding - spectral).norm(),
            })
        })
        .collect()
}
