//! The circle `S^1` and its phase space, the cylinder.
//!
//! The complex coordinate is `z = x - i y` (angle `x`, momentum `y`), so
//! `e^{ikz} = e^{ikx + ky}`. The basis is `phi_k(z) = e^{ikz}` with
//! `<phi_p, phi_q> = e^{pq}`, or its normalized form
//! `phi~_k(z) = e^{ikz - k^2/2}` with `<phi~_p, phi~_q> = e^{-(p-q)^2/2}`.
//!
//! The second half of the module evaluates the heat kernel on the circle and
//! the integral formula for the reproducing kernel built from it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bargmann::{BasisSpec, KernelRep};
use crate::defaults;
use crate::error::{Error, Result};

/// Truncated periodic basis, labels `-N..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CylinderBasis {
    truncation: usize,
}

impl CylinderBasis {
    pub fn new(truncation: usize) -> Self {
        Self { truncation }
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        2 * self.truncation + 1
    }

    pub fn labels(&self) -> Vec<i64> {
        let n = self.truncation as i64;
        (-n..=n).collect()
    }

    /// `phi~_k`, with closed-form Gram entries.
    pub fn normalized(&self) -> BasisSpec {
        BasisSpec::new("cylinder-normalized", self.labels(), |k, z| phi_tilde(k, z[0]))
            .expect("labels are distinct")
            .with_closed_form(|p, q| gram_closed(p, q, true).map(Complex64::from))
    }

    /// `phi_k`. Refused above [`defaults::RAW_BASIS_MAX_TRUNCATION`], where the
    /// Gram matrix `e^{pq}` is too ill-conditioned for a Cholesky factorization.
    pub fn raw(&self) -> Result<BasisSpec> {
        if self.truncation > defaults::RAW_BASIS_MAX_TRUNCATION {
            return Err(Error::NumericallyDependent(format!(
                "unnormalized basis at N = {} (max {}); use the normalized basis",
                self.truncation,
                defaults::RAW_BASIS_MAX_TRUNCATION
            )));
        }
        Ok(BasisSpec::new("cylinder-raw", self.labels(), |k, z| phi(k, z[0]))
            .expect("labels are distinct")
            .with_closed_form(|p, q| gram_closed(p, q, false).map(Complex64::from)))
    }
}

/// `e^{ikz}`.
pub fn phi(k: i64, z: Complex64) -> Complex64 {
    (Complex64::i() * k as f64 * z).exp()
}

/// `e^{ikz - k^2/2}`.
pub fn phi_tilde(k: i64, z: Complex64) -> Complex64 {
    let k = k as f64;
    (Complex64::i() * k * z - 0.5 * k * k).exp()
}

/// `z = x - i y` for the angle `x` and momentum `y`.
pub fn tangent_to_complex(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, -y)
}

/// `<phi_p, phi_q> = e^{pq}`, or `e^{-(p-q)^2/2}` for the normalized basis.
pub fn gram_closed(p: i64, q: i64, normalized: bool) -> Result<f64> {
    if normalized {
        let d = (p - q) as f64;
        return Ok((-0.5 * d * d).exp());
    }
    let pq = p.checked_mul(q).ok_or_else(|| Error::Overflow(format!("p q for ({p}, {q})")))?;
    if pq.abs() > 700 {
        return Err(Error::Overflow(format!("e^{{pq}} with pq = {pq}")));
    }
    Ok((pq as f64).exp())
}

/// Parameters of the heat kernel `rho_t` on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatKernelParams {
    pub t: f64,
    /// Mode cutoff `M`: the sum runs over `|k| <= M`.
    pub modes: usize,
    /// Base point of the denominator `rho_t^{x0}`.
    pub x0: f64,
    /// Trapezoid nodes on `[-pi, pi)`.
    pub x_nodes: usize,
    /// Largest admissible tail estimate.
    pub tolerance: f64,
}

impl Default for HeatKernelParams {
    fn default() -> Self {
        Self {
            t: defaults::HEAT_TIME,
            modes: defaults::HEAT_MODES,
            x0: 0.0,
            x_nodes: defaults::HEAT_X_NODES,
            tolerance: defaults::HEAT_TOLERANCE,
        }
    }
}

impl HeatKernelParams {
    pub fn with_time(t: f64) -> Self {
        Self {
            t,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidInput(format!("heat time must be positive, got {}", self.t)));
        }
        if self.modes == 0 {
            return Err(Error::InvalidInput("mode cutoff must be at least 1".into()));
        }
        if self.x_nodes == 0 {
            return Err(Error::InvalidInput("need at least one x node".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidInput("x0 must be finite".into()));
        }
        Ok(())
    }

    /// Bound on the dropped modes at imaginary part `im`:
    /// `2 e^{M |im|} e^{-M^2 t / 2} / (2 pi)`.
    pub fn tail_bound(&self, im: f64) -> f64 {
        let m = self.modes as f64;
        2.0 * (m * im.abs() - 0.5 * m * m * self.t).exp() / (2.0 * PI)
    }

    fn check_tail(&self, im: f64) -> Result<()> {
        let estimate = self.tail_bound(im);
        if estimate > self.tolerance {
            return Err(Error::TailTooLarge {
                estimate,
                tolerance: self.tolerance,
                hint: "increase the mode cutoff M",
            });
        }
        Ok(())
    }
}

/// Mode coefficients `e^{-ikz - k^2 t/2} / (2 pi)` of `rho_t^z`, `k = -M..=M`.
fn rho_modes(params: &HeatKernelParams, z: Complex64) -> Vec<Complex64> {
    let m = params.modes as i64;
    (-m..=m)
        .map(|k| {
            let k = k as f64;
            (-Complex64::i() * k * z - 0.5 * k * k * params.t).exp() / (2.0 * PI)
        })
        .collect()
}

/// `rho_t^z(x) = (1/2pi) sum_k e^{ik(x - z) - k^2 t/2}`, truncated at `|k| <= M`.
pub fn heat_rho(params: &HeatKernelParams, z: Complex64, x: f64) -> Result<Complex64> {
    params.validate()?;
    params.check_tail(z.im)?;
    Ok(heat_rho_unchecked(params, z, x))
}

fn heat_rho_unchecked(params: &HeatKernelParams, z: Complex64, x: f64) -> Complex64 {
    let m = params.modes as i64;
    // Pair k with -k so that real z gives an exactly real value.
    let mut sum = Complex64::new(1.0, 0.0);
    for k in 1..=m {
        let kf = k as f64;
        let damp = (-0.5 * kf * kf * params.t).exp();
        let u = Complex64::i() * kf * (Complex64::from(x) - z);
        sum += damp * (u.exp() + (-u).exp());
    }
    sum / (2.0 * PI)
}

/// The same kernel as a sum over windings:
/// `sum_{|n| <= windings} (2 pi t)^{-1/2} e^{-(x - z + 2 pi n)^2 / (2t)}`.
pub fn heat_rho_winding(t: f64, z: Complex64, x: f64, windings: usize) -> Complex64 {
    let pre = (2.0 * PI * t).sqrt().recip();
    let w = windings as i64;
    (-w..=w)
        .map(|n| {
            let u = Complex64::from(x) - z + 2.0 * PI * n as f64;
            pre * (-u * u / (2.0 * t)).exp()
        })
        .sum()
}

/// The integral formula
/// `K(z, conj w) = (1/2pi) int_{-pi}^{pi} rho_t^z(x) rho_t^{conj w}(x) / rho_t^{x0}(x) dx`
/// on a periodic trapezoid grid.
///
/// The `x` integral is done once: `moments[m] = mean_j e^{i m x_j} / rho(x_j)` for
/// `|m| <= 2M`, and a kernel value is a double mode sum against them.
#[derive(Debug, Clone)]
pub struct HeatFormula {
    params: HeatKernelParams,
    moments: Vec<Complex64>,
}

impl HeatFormula {
    pub fn new(params: HeatKernelParams) -> Result<Self> {
        params.validate()?;
        params.check_tail(0.0)?;
        let n = params.x_nodes;
        let m = params.modes as i64;
        let mut inv = Vec::with_capacity(n);
        let mut xs = Vec::with_capacity(n);
        for j in 0..n {
            let x = -PI + 2.0 * PI * j as f64 / n as f64;
            let r = heat_rho_unchecked(&params, Complex64::from(params.x0), x);
            if r.norm() < defaults::DIVISION_GUARD {
                return Err(Error::DivisionGuard {
                    location: format!("x = {x}"),
                    magnitude: r.norm(),
                    threshold: defaults::DIVISION_GUARD,
                });
            }
            inv.push(r.inv());
            xs.push(x);
        }
        let moments = (-2 * m..=2 * m)
            .map(|p| {
                let s: Complex64 = xs
                    .iter()
                    .zip(&inv)
                    .map(|(&x, &r)| Complex64::from_polar(1.0, p as f64 * x) * r)
                    .sum();
                s / n as f64
            })
            .collect();
        Ok(Self { params, moments })
    }

    pub fn params(&self) -> &HeatKernelParams {
        &self.params
    }

    /// Formula value; errors when either point is too far off the real axis for `M`.
    pub fn eval(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        self.params.check_tail(z.im)?;
        self.params.check_tail(w.im)?;
        Ok(self.eval_truncated(z, w))
    }

    /// Value of the `M`-mode truncation, without the tail check.
    pub fn eval_truncated(&self, z: Complex64, w: Complex64) -> Complex64 {
        let m = self.params.modes as i64;
        let a = rho_modes(&self.params, z);
        let b = rho_modes(&self.params, w.conj());
        let mut sum = Complex64::new(0.0, 0.0);
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                // e^{i k x} e^{i k' x} integrates against the moment of order k + k'.
                let p = (i + j) as i64 - 2 * m;
                sum += ai * bj * self.moments[(p + 2 * m) as usize];
            }
        }
        // (1/2pi) int ... dx = mean over the grid.
        sum
    }
}

/// One-shot evaluation of the formula.
pub fn heat_kernel_formula(params: &HeatKernelParams, z: Complex64, w: Complex64) -> Result<Complex64> {
    HeatFormula::new(*params)?.eval(z, w)
}

/// The formula rescaled by one constant so that it matches a reference kernel at `(0, 0)`.
#[derive(Debug, Clone)]
pub struct CalibratedHeatKernel {
    formula: HeatFormula,
    scale: Complex64,
}

impl CalibratedHeatKernel {
    pub fn calibrate(params: HeatKernelParams, reference: &KernelRep) -> Result<Self> {
        let formula = HeatFormula::new(params)?;
        let zero = Complex64::new(0.0, 0.0);
        let f0 = formula.eval(zero, zero)?;
        let scale = reference.eval(&[zero], &[zero]) / f0;
        Ok(Self { formula, scale })
    }

    /// The calibration constant `c`.
    pub fn scale(&self) -> Complex64 {
        self.scale
    }

    pub fn formula(&self) -> &HeatFormula {
        &self.formula
    }

    pub fn eval(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        Ok(self.scale * self.formula.eval(z, w)?)
    }

    pub fn eval_truncated(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.scale * self.formula.eval_truncated(z, w)
    }
}

/// Largest relative deviation `|c F(z, w) - K(z, w)| / |K(z, w)|` over a grid of real points.
pub fn heat_formula_deviation(
    calibrated: &CalibratedHeatKernel,
    reference: &KernelRep,
    points: &[f64],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &x in points {
        for &y in points {
            let (z, w) = (Complex64::from(x), Complex64::from(y));
            let k = reference.eval(&[z], &[w]);
            let f = calibrated.eval(z, w)?;
            worst = worst.max((f - k).norm() / k.norm());
        }
    }
    Ok(worst)
}

/// `n` equally spaced points of `[-pi, pi)`.
pub fn periodic_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bargmann::{gram_by_quadrature, gram_matrix, reproducing_kernel, HoloState};
    use crate::geometry::FlatChart;
    use crate::quadrature::{integrate_tangent, QuadratureRule};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kernel(n: usize) -> KernelRep {
        let basis = CylinderBasis::new(n).normalized();
        let chart = FlatChart::cylinder();
        let rule = QuadratureRule::for_chart(&chart, 8).unwrap();
        let gram = gram_matrix(&basis, &chart, &rule).unwrap();
        reproducing_kernel(&gram, &basis).unwrap()
    }

    #[test]
    fn gram_closed_examples() {
        assert_abs_diff_eq!(gram_closed(1, 1, false).unwrap(), E, epsilon = 1e-15);
        assert_eq!(gram_closed(3, 3, true).unwrap(), 1.0);
        assert_abs_diff_eq!(gram_closed(1, -1, true).unwrap(), 0.135335283236613, epsilon = 1e-14);
        assert!(matches!(gram_closed(30, 30, false), Err(Error::Overflow(_))));
        assert!(gram_closed(-26, 26, false).is_ok());
    }

    #[test]
    fn quadrature_gram_matches_closed_forms() {
        let chart = FlatChart::cylinder();
        let rule = QuadratureRule::for_chart(&chart, 64).unwrap();
        for normalized in [false, true] {
            let cb = CylinderBasis::new(4);
            let basis = if normalized { cb.normalized() } else { cb.raw().unwrap() };
            let q = gram_by_quadrature(&basis, &chart, &rule).unwrap();
            for (i, &p) in basis.labels().iter().enumerate() {
                for (j, &r) in basis.labels().iter().enumerate() {
                    let exact = gram_closed(p, r, normalized).unwrap();
                    // The (4, -4) entry is e^{-16} times the integrand scale; its
                    // cancellation floor in double precision is near 2e-9.
                    let tol = if (p - r).abs() == 8 { 5e-9 } else { 1e-10 };
                    assert!((q[(i, j)] - exact).norm() <= tol * exact, "({p},{r})");
                }
            }
        }
    }

    #[test]
    fn basis_norms() {
        let chart = FlatChart::cylinder();
        let rule = QuadratureRule::for_chart(&chart, 64).unwrap();
        for k in -4..=4i64 {
            let n2 = integrate_tangent(&chart, &rule, |z| phi(k, z.as_slice()[0]).norm_sqr().into())
                .unwrap()
                .re;
            let expect = (k * k) as f64 / 2.0;
            assert!((n2.sqrt() / expect.exp() - 1.0).abs() < 1e-10, "k = {k}");
        }
        assert!(CylinderBasis::new(7).raw().is_err());
    }

    #[test]
    fn periodicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let basis = CylinderBasis::new(8).normalized();
        for _ in 0..20 {
            let z = c(rng.gen_range(-4.0..4.0), rng.gen_range(-1.0..1.0));
            for k in -8..=8 {
                let a = phi_tilde(k, z);
                let b = phi_tilde(k, z + 2.0 * PI);
                assert!((a - b).norm() <= 1e-12 * a.norm());
            }
            let f = HoloState::new(
                (0..17).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
            )
            .unwrap();
            let a = f.eval(&basis, &[z]);
            let b = f.eval(&basis, &[z + 2.0 * PI]);
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn convention() {
        // e^{ikz} = e^{ikx + ky} with z = x - iy.
        let z = tangent_to_complex(0.4, 0.3);
        let want = Complex64::from_polar((2.0 * 0.3f64).exp(), 2.0 * 0.4);
        assert!((phi(2, z) - want).norm() < 1e-14);
    }

    #[test]
    fn heat_rho_examples() {
        let slow = HeatKernelParams::with_time(50.0);
        for x in [-2.0, 0.0, 1.3] {
            let v = heat_rho(&slow, c(0.0, 0.0), x).unwrap();
            assert_abs_diff_eq!(v.re, 1.0 / (2.0 * PI), epsilon = 1e-10);
        }
        let p = HeatKernelParams::default();
        for x in [0.3, 1.0, 2.9] {
            let a = heat_rho(&p, c(0.0, 0.0), x).unwrap();
            let b = heat_rho(&p, c(0.0, 0.0), -x).unwrap();
            assert!((a - b).norm() < 1e-15);
            assert!(a.im.abs() < 1e-12);
        }
        let v = heat_rho(&p, c(0.0, 0.0), 0.0).unwrap();
        let w = heat_rho_winding(1.0, c(0.0, 0.0), 0.0, 10);
        assert_abs_diff_eq!(v.re, 0.398942282536004, epsilon = 1e-12);
        assert!((v - w).norm() < 1e-13);
    }

    #[test]
    fn heat_rho_tail_error() {
        let p = HeatKernelParams {
            modes: 2,
            ..HeatKernelParams::default()
        };
        let err = heat_rho(&p, c(0.0, 1.0), 0.0).unwrap_err();
        assert!(matches!(err, Error::TailTooLarge { .. }), "{err}");
        assert!(heat_rho(&HeatKernelParams::with_time(-1.0), c(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn theta_identity() {
        for t in [0.5, 1.0, 2.0] {
            let p = HeatKernelParams::with_time(t);
            for x in periodic_grid(16) {
                let a = heat_rho(&p, c(0.0, 0.0), x).unwrap();
                let b = heat_rho_winding(t, c(0.0, 0.0), x, 10);
                assert!((a - b).norm() <= 1e-12, "t = {t}, x = {x}");
            }
        }
        // Off the real axis the identity still holds termwise.
        let p = HeatKernelParams::default();
        let z = c(0.2, 0.7);
        let a = heat_rho(&p, z, 0.5).unwrap();
        let b = heat_rho_winding(1.0, z, 0.5, 10);
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn formula_is_hermitian() {
        let f = HeatFormula::new(HeatKernelParams::default()).unwrap();
        let pts = [c(0.0, 0.0), c(1.0, 0.5), c(-2.0, -0.3), c(3.0, 0.1)];
        for &z in &pts {
            for &w in &pts {
                let a = f.eval(z, w).unwrap();
                let b = f.eval(w, z).unwrap();
                assert!((a - b.conj()).norm() <= 1e-14 * a.norm());
            }
        }
    }

    #[test]
    fn formula_matches_direct_quadrature() {
        let p = HeatKernelParams {
            x_nodes: 64,
            ..HeatKernelParams::default()
        };
        let f = HeatFormula::new(p).unwrap();
        let (z, w) = (c(0.7, 0.2), c(-1.1, 0.4));
        let direct: Complex64 = periodic_grid(64)
            .into_iter()
            .map(|x| {
                heat_rho(&p, z, x).unwrap() * heat_rho(&p, w.conj(), x).unwrap()
                    / heat_rho(&p, c(0.0, 0.0), x).unwrap()
            })
            .sum::<Complex64>()
            / 64.0;
        assert!((f.eval(z, w).unwrap() - direct).norm() < 1e-14);
    }

    #[test]
    fn calibration_constant_is_two_pi() {
        let cal = CalibratedHeatKernel::calibrate(HeatKernelParams::default(), &kernel(20)).unwrap();
        assert!((cal.scale() - 2.0 * PI).norm() < 1e-7, "{}", cal.scale());
    }

    #[test]
    fn formula_matches_gram_kernel_at_high_truncation() {
        // The formula is the kernel of the full space, so the comparison
        // tightens as the truncation grows.
        let grid = [-PI, -PI / 2.0, 0.0, PI / 2.0, 0.9 * PI];
        let mut devs = Vec::new();
        for n in [8, 12, 20] {
            let k = kernel(n);
            let cal = CalibratedHeatKernel::calibrate(HeatKernelParams::default(), &k).unwrap();
            devs.push(heat_formula_deviation(&cal, &k, &grid).unwrap());
        }
        assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
        assert!(devs[2] < 1e-7, "{devs:?}");
    }

    #[test]
    fn formula_reproduces_basis_function() {
        let k = kernel(8);
        let cal = CalibratedHeatKernel::calibrate(HeatKernelParams::default(), &k).unwrap();
        let chart = FlatChart::cylinder();
        let rule = QuadratureRule::for_chart(&chart, 64).unwrap();
        for z in [c(0.0, 0.0), c(1.2, -0.4), c(-2.5, 0.6)] {
            let v = integrate_tangent(&chart, &rule, |w| {
                let w = w.as_slice()[0];
                cal.eval_truncated(z, w) * phi_tilde(1, w)
            })
            .unwrap();
            assert!((v - phi_tilde(1, z)).norm() < 1e-4 * phi_tilde(1, z).norm(), "{z}: {v}");
        }
    }

    #[test]
    fn division_guard() {
        let p = HeatKernelParams {
            t: 0.01,
            modes: 90,
            ..HeatKernelParams::default()
        };
        let err = HeatFormula::new(p).unwrap_err();
        assert!(matches!(err, Error::DivisionGuard { .. }), "{err}");
    }
}
