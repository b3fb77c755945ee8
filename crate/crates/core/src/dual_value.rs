//! Approximate dual value from the Green-function representation
//!
//! ```text
//! Ṽ(t, y) = Ũ_K(y) - ∫₀^τ ∫_{z_b(s)}^∞ G(τ - s, ln y - w) φ(w) dw ds
//! ```
//!
//! Because `φ` is a finite sum of exponentials the inner integral has a
//! closed form (a Gaussian tail, [`tail_integral`]); only the outer integral
//! over `s` is done numerically, after the substitution `s = τ - ξ²` that
//! absorbs the `(τ - s)^{-1/2}` behaviour of the kernel.

use crate::boundary::BoundaryCurve;
use crate::error::{Error, Result};
use crate::model::{DerivedParams, Problem};
use crate::numerics::{norm_cdf, norm_pdf, Integrator};

const INV_SQRT_4PI: f64 = 0.282_094_791_773_878_14;

/// Green function of `v_τ - v_zz + κ v_z + ρ v`:
/// `G(u, x) = (4πu)^{-1/2} exp(-(x - κu)²/(4u) - ρu)`.
pub fn green(derived: &DerivedParams, u: f64, x: f64) -> Result<f64> {
    check_elapsed(u)?;
    Ok(green_unchecked(derived, u, x))
}

pub(crate) fn green_unchecked(derived: &DerivedParams, u: f64, x: f64) -> f64 {
    let m = x - derived.kappa * u;
    INV_SQRT_4PI / u.sqrt() * (-m * m / (4.0 * u) - derived.rho * u).exp()
}

/// `∫_a^∞ G(u, z - w) e^{qw} dw = e^{qz + (q² - κq - ρ)u} N(d)`,
/// `d = (z - a - (κ - 2q)u) / √(2u)`.
pub fn tail_integral(derived: &DerivedParams, u: f64, z: f64, a: f64, q: f64) -> Result<f64> {
    check_elapsed(u)?;
    Ok(tail_terms(derived, u, z, a, q).value)
}

/// A tail integral and its first two `z`-derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub dz: f64,
    pub dzz: f64,
}

impl Jet {
    fn axpy(&mut self, c: f64, other: Jet) {
        self.value += c * other.value;
        self.dz += c * other.dz;
        self.dzz += c * other.dzz;
    }
}

pub fn tail_terms(derived: &DerivedParams, u: f64, z: f64, a: f64, q: f64) -> Jet {
    let e = (q * z + derived.growth_exponent(q) * u).exp();
    let su = (2.0 * u).sqrt();
    let d = (z - a - (derived.kappa - 2.0 * q) * u) / su;
    let big = norm_cdf(d);
    let small = norm_pdf(d);
    Jet {
        value: e * big,
        dz: e * (q * big + small / su),
        dzz: e * (q * q * big + 2.0 * q * small / su - d * small / (2.0 * u)),
    }
}

/// `J(u, z; a) = ∫_a^∞ G(u, z - w) φ(w) dw` with derivatives in `z`.
pub fn source_jet(problem: &Problem, u: f64, z: f64, a: f64) -> Jet {
    let d = problem.derived();
    let mut jet = Jet::default();
    for (&c, &q) in problem.coefficients().iter().zip(problem.utility().exponents()) {
        jet.axpy(c, tail_terms(d, u, z, a, q));
    }
    let k = problem.params().floor;
    if k != 0.0 {
        jet.axpy(-d.nu * k, tail_terms(d, u, z, a, 1.0));
    }
    jet
}

fn check_elapsed(u: f64) -> Result<()> {
    if u > 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "elapsed dimensionless time",
            value: u,
        })
    }
}

/// `Ṽ`, `Ṽ_y`, `Ṽ_yy` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualValue {
    pub v: f64,
    pub vy: f64,
    pub vyy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Order {
    Value,
    First,
    Second,
}

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_ORDER: usize = 32;

#[derive(Debug, Clone)]
pub struct DualValueEvaluator<C> {
    problem: Problem,
    curve: C,
    quad: Integrator,
}

impl<C: BoundaryCurve> DualValueEvaluator<C> {
    pub fn new(problem: &Problem, curve: C) -> Self {
        DualValueEvaluator::with_integrator(problem, curve, Integrator::adaptive(DEFAULT_ORDER, DEFAULT_TOL))
    }

    pub fn with_integrator(problem: &Problem, curve: C, quad: Integrator) -> Self {
        DualValueEvaluator {
            problem: problem.clone(),
            curve,
            quad,
        }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn curve(&self) -> &C {
        &self.curve
    }

    fn check(&self, t: f64, y: f64) -> Result<f64> {
        let horizon = self.problem.params().horizon;
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Domain {
                what: "calendar time",
                value: t,
            });
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Domain {
                what: "dual argument y",
                value: y,
            });
        }
        Ok(self.problem.tau_at(t))
    }

    /// `D(τ, z)` or one of its `z`-derivatives.
    fn correction(&self, tau: f64, z: f64, order: Order) -> Result<f64> {
        if tau <= 0.0 {
            return Ok(0.0);
        }
        let integrand = |xi: f64| {
            if xi <= 0.0 {
                return 0.0;
            }
            let u = xi * xi;
            let jet = source_jet(&self.problem, u, z, self.curve.z(tau - u));
            let v = match order {
                Order::Value => jet.value,
                Order::First => jet.dz,
                Order::Second => jet.dzz,
            };
            if v.is_finite() {
                2.0 * xi * v
            } else {
                0.0
            }
        };
        self.quad.integrate(integrand, 0.0, tau.sqrt())
    }

    pub fn dual_v(&self, t: f64, y: f64) -> Result<f64> {
        let tau = self.check(t, y)?;
        let u = self.problem.utility();
        Ok(u.value_unchecked(y) - self.correction(tau, y.ln(), Order::Value)?)
    }

    pub fn dual_vy(&self, t: f64, y: f64) -> Result<f64> {
        let tau = self.check(t, y)?;
        let u = self.problem.utility();
        Ok(u.deriv_unchecked(y) - self.correction(tau, y.ln(), Order::First)? / y)
    }

    pub fn dual_vyy(&self, t: f64, y: f64) -> Result<f64> {
        let tau = self.check(t, y)?;
        let u = self.problem.utility();
        let z = y.ln();
        let dz = self.correction(tau, z, Order::First)?;
        let dzz = self.correction(tau, z, Order::Second)?;
        Ok(u.second_deriv_unchecked(y) + (dz - dzz) / (y * y))
    }

    pub fn evaluate(&self, t: f64, y: f64) -> Result<DualValue> {
        let tau = self.check(t, y)?;
        let u = self.problem.utility();
        let z = y.ln();
        let d0 = self.correction(tau, z, Order::Value)?;
        let d1 = self.correction(tau, z, Order::First)?;
        let d2 = self.correction(tau, z, Order::Second)?;
        Ok(DualValue {
            v: u.value_unchecked(y) - d0,
            vy: u.deriv_unchecked(y) - d1 / y,
            vyy: u.second_deriv_unchecked(y) + (d1 - d2) / (y * y),
        })
    }
}
