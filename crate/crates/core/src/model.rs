//! Market parameters, the constants of the log-price / time-to-go transform,
//! the parameter assumption behind the closed-form boundary, and the regime
//! classifier for the named utility families.
//!
//! With `z = ln y` and `τ = θ²(T - t)/2` the dual value solves
//! `min{v_τ - v_zz + κ v_z + ρ v, v - g} = 0`, where
//! `ν = 2r/θ²`, `ρ = 2β/θ²`, `κ = ν - ρ + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Offending, Result};
use crate::utility::{DualUtilityFamily, FamilyTag, UtilitySpec};

/// `|μ - r|` below this leaves the time change undefined.
pub const THETA_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
    pub beta: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "K")]
    pub floor: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool, &'static str); 6] = [
            ("mu", self.mu, self.mu > 0.0, "drift must be positive"),
            ("r", self.r, self.r > 0.0, "interest rate must be positive"),
            ("sigma", self.sigma, self.sigma > 0.0, "volatility must be positive"),
            ("beta", self.beta, self.beta > 0.0, "discount rate must be positive"),
            ("T", self.horizon, self.horizon > 0.0, "horizon must be positive"),
            ("K", self.floor, self.floor >= 0.0, "floor must be non-negative"),
        ];
        for (name, value, ok, reason) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value, reason });
            }
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        self.validate()?;
        let gap = self.mu - self.r;
        if gap.abs() < THETA_CUTOFF {
            return Err(Error::DegenerateMarket { gap: gap.abs() });
        }
        let theta = gap / self.sigma;
        let theta2 = theta * theta;
        let nu = 2.0 * self.r / theta2;
        let rho = 2.0 * self.beta / theta2;
        let kappa = nu - rho + 1.0;
        let lambda = characteristic_root(kappa, rho);
        Ok(DerivedParams {
            theta,
            nu,
            rho,
            kappa,
            lambda,
            tau_max: 0.5 * theta2 * self.horizon,
        })
    }
}

/// Negative root of `λ² - κλ - ρ = 0`, computed without cancellation.
fn characteristic_root(kappa: f64, rho: f64) -> f64 {
    let disc = (kappa * kappa + 4.0 * rho).sqrt();
    if kappa <= 0.0 {
        0.5 * (kappa - disc)
    } else {
        -2.0 * rho / (kappa + disc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    pub theta: f64,
    pub nu: f64,
    pub rho: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub tau_max: f64,
}

impl DerivedParams {
    /// `q A_q = q² - κ q - ρ`; at `q = 1` this is `-ν`.
    pub fn growth_exponent(&self, q: f64) -> f64 {
        q * q - self.kappa * q - self.rho
    }

    /// `A_q = q - κ - ρ/q`.
    pub fn coefficient(&self, q: f64) -> f64 {
        q - self.kappa - self.rho / q
    }
}

/// Market, transformed constants and dual utility bundled for the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    params: ModelParams,
    derived: DerivedParams,
    utility: DualUtilityFamily,
    coefficients: Vec<f64>,
}

impl Problem {
    pub fn new(params: ModelParams, utility: &UtilitySpec) -> Result<Self> {
        let family = DualUtilityFamily::from_spec(utility, params.floor)?;
        Problem::with_family(params, family)
    }

    pub fn with_family(params: ModelParams, utility: DualUtilityFamily) -> Result<Self> {
        let derived = params.derive()?;
        if utility.floor() != params.floor {
            return Err(Error::Config(format!(
                "utility floor {} differs from model floor {}",
                utility.floor(),
                params.floor
            )));
        }
        let coefficients = utility.exponents().iter().map(|&q| derived.coefficient(q)).collect();
        Ok(Problem {
            params,
            derived,
            utility,
            coefficients,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    pub fn utility(&self) -> &DualUtilityFamily {
        &self.utility
    }

    /// `A_j = q_j - κ - ρ/q_j`, increasing in `j`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Dimensionless time to go at calendar time `t`.
    pub fn tau_at(&self, t: f64) -> f64 {
        0.5 * self.derived.theta * self.derived.theta * (self.params.horizon - t)
    }

    /// Calendar time at dimensionless time to go `tau`.
    pub fn t_at(&self, tau: f64) -> f64 {
        self.params.horizon - 2.0 * tau / (self.derived.theta * self.derived.theta)
    }

    /// Passes iff `K > 0` and `A_1 > 0`.
    pub fn validate_assumption(&self) -> Result<()> {
        if !(self.params.floor > 0.0) {
            return Err(Error::AssumptionViolated {
                quantity: Offending::Floor,
                value: self.params.floor,
            });
        }
        let a1 = self.coefficients[0];
        if !(a1 > 0.0) {
            return Err(Error::AssumptionViolated {
                quantity: Offending::LeadingCoefficient,
                value: a1,
            });
        }
        Ok(())
    }

    pub fn classify_regime(&self) -> Result<Regime> {
        classify(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeCase {
    OneBoundary,
    TwoBoundaries,
    NoStopping,
    StopImmediately,
}

/// Discount-rate thresholds of the non-HARA family, `β₄ < β₂ < β₃ < β₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaThresholds {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
}

impl BetaThresholds {
    pub fn new(params: &ModelParams, derived: &DerivedParams) -> Self {
        let t2 = derived.theta * derived.theta;
        let (r, k) = (params.r, params.floor);
        let beta1 = 1.5 * t2 + 0.75 * r;
        let beta2 = 0.5 * t2 + 0.5 * r;
        let root = (r * k * (4.0 / 3.0 * t2 + r / 3.0) + 4.0 / 9.0 * r * r * k * k).sqrt();
        BetaThresholds {
            beta1,
            beta2,
            beta3: beta2 + root - 2.0 / 3.0 * r * k,
            beta4: beta2 - root - 2.0 / 3.0 * r * k,
        }
    }

    /// Regime read off from `β` alone.
    pub fn case_for(&self, beta: f64, floor: f64) -> RegimeCase {
        if floor > 0.0 {
            if beta >= self.beta1 {
                RegimeCase::OneBoundary
            } else if beta > self.beta3 {
                RegimeCase::TwoBoundaries
            } else {
                RegimeCase::NoStopping
            }
        } else if beta >= self.beta1 {
            RegimeCase::StopImmediately
        } else if beta > self.beta2 {
            RegimeCase::OneBoundary
        } else {
            RegimeCase::NoStopping
        }
    }
}

/// Short-time limits of the boundaries, in log-dual-price units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RegimeLimits {
    /// `K > 0`, two boundaries: `z₁(0⁺) < z₂(0⁺)`.
    TwoBoundaries { lower: f64, upper: f64 },
    /// `K = 0`, single increasing boundary starting at `z(0⁺)`.
    FloorFree { start: f64 },
    /// Single decreasing boundary starting at the root of `φ`.
    OneBoundary { start: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regime {
    pub case: RegimeCase,
    pub coefficients: Vec<f64>,
    pub thresholds: Option<BetaThresholds>,
    pub discriminant: Option<f64>,
    pub limits: Option<RegimeLimits>,
}

fn classify(problem: &Problem) -> Result<Regime> {
    let a = problem.coefficients();
    let d = problem.derived();
    let k = problem.params().floor;
    match problem.utility().tag() {
        FamilyTag::Power(_) => {
            // φ(z) = A₁ e^{qz} - νK e^z changes sign iff A₁ > 0 and K > 0.
            let a1 = a[0];
            let q = problem.utility().exponents()[0];
            let case = match (a1 > 0.0, k > 0.0) {
                (true, true) => RegimeCase::OneBoundary,
                (true, false) => RegimeCase::StopImmediately,
                (false, _) => RegimeCase::NoStopping,
            };
            let limits = (case == RegimeCase::OneBoundary).then(|| RegimeLimits::OneBoundary {
                start: (k * d.nu / a1).ln() / (q - 1.0),
            });
            Ok(Regime {
                case,
                coefficients: a.to_vec(),
                thresholds: None,
                discriminant: None,
                limits,
            })
        }
        FamilyTag::NonHara => {
            let (a1, a2) = (a[0], a[1]);
            let disc = a2 * a2 + 4.0 * a1 * d.nu * k;
            let thresholds = BetaThresholds::new(problem.params(), d);
            let (case, limits) = if k > 0.0 {
                if a1 >= 0.0 {
                    let w = (-a2 + disc.sqrt()) / (2.0 * a1);
                    let start = if a1 > 0.0 {
                        -0.5 * w.ln()
                    } else {
                        // A₁ = 0: φ = A₂e^{-z} - νKe^z.
                        0.5 * (a2 / (d.nu * k)).ln()
                    };
                    (RegimeCase::OneBoundary, Some(RegimeLimits::OneBoundary { start }))
                } else if a2 > 0.0 && disc > 0.0 {
                    let sq = disc.sqrt();
                    let lower = -0.5 * ((-a2 - sq) / (2.0 * a1)).ln();
                    let upper = -0.5 * ((-a2 + sq) / (2.0 * a1)).ln();
                    (
                        RegimeCase::TwoBoundaries,
                        Some(RegimeLimits::TwoBoundaries { lower, upper }),
                    )
                } else {
                    (RegimeCase::NoStopping, None)
                }
            } else if a1 >= 0.0 {
                (RegimeCase::StopImmediately, None)
            } else if a2 > 0.0 {
                (
                    RegimeCase::OneBoundary,
                    Some(RegimeLimits::FloorFree {
                        start: 0.5 * (-a1 / a2).ln(),
                    }),
                )
            } else {
                (RegimeCase::NoStopping, None)
            };
            Ok(Regime {
                case,
                coefficients: a.to_vec(),
                thresholds: Some(thresholds),
                discriminant: Some(disc),
                limits,
            })
        }
        FamilyTag::Custom => Err(Error::UnsupportedFamily("regime classification")),
    }
}
