//! Closed-form approximation of the free boundary.
//!
//! The dual exercise region is `{z <= z(τ)}`. The boundary starts at the root
//! `z₀` of `φ = L[g]`, leaves it like `z₀ - 2A√τ` with a universal constant
//! `A`, and settles at the root `z*` of `p` for long horizons. The curve
//!
//! ```text
//! z_*(τ) = z₀ - (z₀ - z*) √(1 - e^{-b*τ}),   b* = 4A² / (z₀ - z*)²
//! ```
//!
//! matches both ends.

use std::sync::OnceLock;

use serde::Serialize;

use crate::dual_value::green_unchecked;
use crate::error::{Error, Result};
use crate::model::Problem;
use crate::numerics::{erfc, expand_bracket, find_root, Bracket, Integrator};
use crate::utility::FamilyTag;

const BRACKET_LIMIT: f64 = 50.0;
const CLOSED_FORM_TOL: f64 = 1e-9;

/// `F(A) = ½e^{-A²} - (√π/2)A + A²∫₀¹ e^{-A²η²}(3η² + η⁴)/(1 + η²)² dη`.
pub fn constant_equation(a: f64) -> f64 {
    let quad = Integrator::fixed(64);
    let a2 = a * a;
    let integral = quad
        .integrate(
            |eta| {
                let e2 = eta * eta;
                let den = 1.0 + e2;
                (-a2 * e2).exp() * (3.0 * e2 + e2 * e2) / (den * den)
            },
            0.0,
            1.0,
        )
        .unwrap_or(f64::NAN);
    0.5 * (-a2).exp() - 0.5 * std::f64::consts::PI.sqrt() * a + a2 * integral
}

/// Positive root of [`constant_equation`]; computed once per process.
pub fn universal_constant() -> f64 {
    static A: OnceLock<f64> = OnceLock::new();
    *A.get_or_init(|| {
        find_root(constant_equation, Bracket::new(0.1, 2.0))
            .expect("F changes sign on [0.1, 2]; a failure here means the quadrature regressed")
    })
}

impl Problem {
    /// `φ(z) = Σ A_j e^{q_j z} - νK e^z`.
    pub fn phi(&self, z: f64) -> f64 {
        let q = self.utility().exponents();
        self.coefficients()
            .iter()
            .zip(q)
            .map(|(a, q)| a * (q * z).exp())
            .sum::<f64>()
            - self.derived().nu * self.params().floor * z.exp()
    }

    /// `p(z) = Σ -(1/q_j)(q_j - λ) e^{(q_j - 1)z} - K(1 - λ)`.
    pub fn p_func(&self, z: f64) -> f64 {
        let lambda = self.derived().lambda;
        self.utility()
            .exponents()
            .iter()
            .map(|&q| -(q - lambda) / q * ((q - 1.0) * z).exp())
            .sum::<f64>()
            - self.params().floor * (1.0 - lambda)
    }

    /// Closed-form `z₀` for the power and non-HARA families.
    pub fn z0_closed_form(&self) -> Option<f64> {
        let d = self.derived();
        let k = self.params().floor;
        let a = self.coefficients();
        match self.utility().tag() {
            FamilyTag::Power(_) => {
                let q = self.utility().exponents()[0];
                Some((k * d.nu / a[0]).ln() / (q - 1.0))
            }
            FamilyTag::NonHara => {
                let (a1, a2) = (a[0], a[1]);
                let w = (-a2 + (a2 * a2 + 4.0 * a1 * d.nu * k).sqrt()) / (2.0 * a1);
                Some(-0.5 * w.ln())
            }
            FamilyTag::Custom => None,
        }
    }

    /// Closed-form `z*` for the power and non-HARA families.
    pub fn z_star_closed_form(&self) -> Option<f64> {
        let lambda = self.derived().lambda;
        let k = self.params().floor;
        let q = self.utility().exponents();
        match self.utility().tag() {
            FamilyTag::Power(_) => {
                let q1 = q[0];
                Some((k * q1 * (1.0 - lambda) / (lambda - q1)).ln() / (q1 - 1.0))
            }
            FamilyTag::NonHara => {
                let (c1, c2) = (q[0] - lambda, q[1] - lambda);
                let w = (-c2 + (c2 * c2 + 4.0 / 3.0 * c1 * k * (1.0 - lambda)).sqrt()) / (2.0 / 3.0 * c1);
                Some(-0.5 * w.ln())
            }
            FamilyTag::Custom => None,
        }
    }

    /// Root of `φ`.
    pub fn solve_z0(&self) -> Result<f64> {
        self.validate_assumption()?;
        let guess = self.z0_closed_form();
        let root = decreasing_root(|z| self.phi(z), guess, "z0")?;
        check_closed_form("z0", guess, root)
    }

    /// Root of `p`.
    pub fn solve_z_star(&self) -> Result<f64> {
        self.validate_assumption()?;
        let guess = self.z_star_closed_form();
        let root = decreasing_root(|z| self.p_func(z), guess, "z*")?;
        check_closed_form("z*", guess, root)
    }
}

fn decreasing_root<F: Fn(f64) -> f64>(f: F, guess: Option<f64>, what: &'static str) -> Result<f64> {
    let (lo, hi) = match guess.filter(|g| g.is_finite()) {
        Some(g) => (g - 1.0, g + 1.0),
        None => (-10.0, 10.0),
    };
    let (lo, hi) = expand_bracket(&f, lo, hi, BRACKET_LIMIT).ok_or(Error::BracketFailure(what))?;
    find_root(&f, Bracket::new(lo, hi))
}

fn check_closed_form(what: &'static str, closed: Option<f64>, root: f64) -> Result<f64> {
    match closed {
        Some(c) if (c - root).abs() > CLOSED_FORM_TOL * root.abs().max(1.0) => {
            Err(Error::ClosedFormMismatch { what, closed: c, root })
        }
        _ => Ok(root),
    }
}

/// A boundary `τ ↦ z(τ)` in log-dual-price coordinates.
pub trait BoundaryCurve: Sync {
    fn z(&self, tau: f64) -> f64;
    fn slope(&self, tau: f64) -> f64;
}

/// Constant curve, useful as a baseline.
#[derive(Debug, Clone, Copy)]
pub struct FrozenCurve(pub f64);

impl BoundaryCurve for FrozenCurve {
    fn z(&self, _tau: f64) -> f64 {
        self.0
    }

    fn slope(&self, _tau: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GcaBoundary {
    pub z0: f64,
    pub z_star: f64,
    pub a: f64,
    pub b_star: f64,
    #[serde(skip)]
    problem: Problem,
}

impl GcaBoundary {
    pub fn new(problem: &Problem) -> Result<Self> {
        let z0 = problem.solve_z0()?;
        let z_star = problem.solve_z_star()?;
        let a = universal_constant();
        let gap = z0 - z_star;
        Ok(GcaBoundary {
            z0,
            z_star,
            a,
            b_star: 4.0 * a * a / (gap * gap),
            problem: problem.clone(),
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// `z_*(τ)`. Defined for every `τ >= 0`; see [`is_extrapolated`](Self::is_extrapolated).
    pub fn at(&self, tau: f64) -> f64 {
        let tau = tau.max(0.0);
        self.z0 - (self.z0 - self.z_star) * (-(-self.b_star * tau).exp_m1()).sqrt()
    }

    /// True when `tau` lies past the problem's horizon.
    pub fn is_extrapolated(&self, tau: f64) -> bool {
        tau > self.problem.derived().tau_max * (1.0 + 1e-12)
    }

    /// Dual exercise boundary `y(t) = exp(z_*(τ(t)))`.
    pub fn dual_price(&self, t: f64) -> f64 {
        self.at(self.problem.tau_at(t)).exp()
    }

    /// Wealth boundary `x(t) = -Ũ_K'(y(t)) = Σ e^{(q_j - 1) z_*} + K`.
    /// Stopping is optimal for wealth at or above it.
    pub fn wealth(&self, t: f64) -> Result<f64> {
        let horizon = self.problem.params().horizon;
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Domain {
                what: "calendar time",
                value: t,
            });
        }
        let z = self.at(self.problem.tau_at(t));
        Ok(self
            .problem
            .utility()
            .exponents()
            .iter()
            .map(|&q| ((q - 1.0) * z).exp())
            .sum::<f64>()
            + self.problem.params().floor)
    }
}

impl BoundaryCurve for GcaBoundary {
    fn z(&self, tau: f64) -> f64 {
        self.at(tau)
    }

    fn slope(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let e = (-self.b_star * tau).exp();
        -(self.z0 - self.z_star) * self.b_star * e / (2.0 * (-(-self.b_star * tau).exp_m1()).sqrt())
    }
}

/// Left-hand side of the boundary integral equation at `tau`:
///
/// ```text
/// -∫_{z₀}^∞ G(τ, z(τ) - w) φ(w) dw + ∫₀^τ G(τ - s, z(τ) - z(s)) φ(z(s)) z'(s) ds
/// ```
///
/// Zero for the exact boundary.
pub fn integral_equation_residual<C: BoundaryCurve + ?Sized>(
    problem: &Problem,
    curve: &C,
    z0: f64,
    tau: f64,
    quad: &Integrator,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Domain {
            what: "dimensionless time",
            value: tau,
        });
    }
    let d = problem.derived();
    let k = problem.params().floor;
    let zt = curve.z(tau);
    let root_tau = tau.sqrt();

    let mut first = 0.0;
    for (&a, &q) in problem.coefficients().iter().zip(problem.utility().exponents()) {
        let arg = (z0 - zt + (d.kappa - 2.0 * q) * tau) / (2.0 * root_tau);
        first -= 0.5 * a * (d.growth_exponent(q) * tau + q * zt).exp() * erfc(arg);
    }
    let arg = (z0 - zt + (d.kappa - 2.0) * tau) / (2.0 * root_tau);
    first += 0.5 * d.nu * k * (-d.nu * tau + zt).exp() * erfc(arg);

    let integrand = |s: f64| {
        let zs = curve.z(s);
        green_unchecked(d, tau - s, zt - zs) * problem.phi(zs) * curve.slope(s)
    };
    // s = η² near 0 (slope ~ s^{-1/2}), s = τ - ξ² near τ (kernel ~ (τ-s)^{-1/2}).
    let half = (0.5 * tau).sqrt();
    let near_start = quad.integrate(|eta| 2.0 * eta * finite_or_zero(integrand(eta * eta)), 0.0, half)?;
    let near_end = quad.integrate(|xi| 2.0 * xi * finite_or_zero(integrand(tau - xi * xi)), 0.0, half)?;
    Ok(first + near_start + near_end)
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}
