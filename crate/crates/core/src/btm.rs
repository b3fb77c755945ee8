//! Binomial-tree oracle on the dual process `dY = (β - r)Y dt - θY dW`.
//!
//! A recombining lattice with `u = e^{|θ|√Δt}`, `d = 1/u` and
//! `p = (e^{(β-r)Δt} - d)/(u - d)` is rolled back from `Ũ_K` at `T`:
//!
//! ```text
//! Ṽ_i = max(Ũ_K(y), e^{-βΔt}(p Ṽ_up + (1 - p) Ṽ_down))
//! ```
//!
//! The primal value at wealth `x` follows by locating the `y` with
//! `Ṽ_y(0, y) + x = 0` (decade scan then bisection), with `Ṽ_y` and `Ṽ_yy`
//! taken from re-evaluated trees at bumped roots.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Problem;

pub const DEFAULT_STEPS: usize = 700;
/// Relative bump for `Ṽ_y`.
pub const DERIVATIVE_BUMP: f64 = 1e-4;
const SCAN_MIN: f64 = 1e-12;
const SCAN_MAX: f64 = 1e12;
const BISECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub n_steps: usize,
    pub y0: f64,
    /// Extra nodes kept on each side of the root, so that every time layer
    /// covers a wider band of `y` than the cone from a single root.
    pub halo: usize,
}

impl TreeConfig {
    pub fn new(n_steps: usize, y0: f64) -> Self {
        TreeConfig { n_steps, y0, halo: 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                value: self.n_steps as f64,
                reason: "a tree needs at least two steps",
            });
        }
        if !(self.y0 > 0.0 && self.y0.is_finite()) {
            return Err(Error::Domain {
                what: "tree root y0",
                value: self.y0,
            });
        }
        Ok(())
    }
}

/// Largest exercising node at one time layer, if any node exercises.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExercisePoint {
    pub t: f64,
    pub y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeResult {
    pub value_at_root: f64,
    /// One entry per layer `0..n_steps`; the terminal layer is omitted.
    pub exercise_boundary: Vec<ExercisePoint>,
    pub dual_dy_at_root: f64,
}

#[derive(Debug, Clone, Copy)]
struct Lattice {
    dt: f64,
    step: f64,
    p: f64,
    discount: f64,
}

#[derive(Debug, Clone)]
pub struct BtmOracle {
    problem: Problem,
    n_steps: usize,
}

impl BtmOracle {
    pub fn new(problem: &Problem, n_steps: usize) -> Result<Self> {
        let oracle = BtmOracle {
            problem: problem.clone(),
            n_steps,
        };
        TreeConfig::new(n_steps, 1.0).validate()?;
        oracle.lattice(n_steps)?;
        Ok(oracle)
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Log-spacing `|θ|√Δt` between a node and its children.
    pub fn log_step(&self) -> f64 {
        let dt = self.problem.params().horizon / self.n_steps as f64;
        self.problem.derived().theta.abs() * dt.sqrt()
    }

    fn lattice(&self, n_steps: usize) -> Result<Lattice> {
        let params = self.problem.params();
        let dt = params.horizon / n_steps as f64;
        let step = self.problem.derived().theta.abs() * dt.sqrt();
        let (u, d) = (step.exp(), (-step).exp());
        let p = (((params.beta - params.r) * dt).exp() - d) / (u - d);
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange { p });
        }
        Ok(Lattice {
            dt,
            step,
            p,
            discount: (-params.beta * dt).exp(),
        })
    }

    /// Roll the tree back; returns the root value and, for American trees,
    /// the exercise boundary per layer.
    fn roll_back(&self, cfg: &TreeConfig, american: bool, record: bool) -> Result<(f64, Vec<ExercisePoint>)> {
        cfg.validate()?;
        let lat = self.lattice(cfg.n_steps)?;
        let u = self.problem.utility();
        let n = cfg.n_steps;
        let m = cfg.halo;
        let ln_y0 = cfg.y0.ln();
        // Node k of layer i sits at ln y0 + (2k - i - 2m) step.
        let node = |i: usize, k: usize| (ln_y0 + (2.0 * k as f64 - i as f64 - 2.0 * m as f64) * lat.step).exp();

        let mut values: Vec<f64> = (0..=n + 2 * m).map(|k| u.value_unchecked(node(n, k))).collect();
        let mut boundary = Vec::with_capacity(if record { n } else { 0 });
        let (p, q) = (lat.p * lat.discount, (1.0 - lat.p) * lat.discount);
        for i in (0..n).rev() {
            let mut last_exercise = None;
            let mut in_exercise = true;
            for k in 0..=i + 2 * m {
                let cont = p * values[k + 1] + q * values[k];
                values[k] = if american {
                    let y = node(i, k);
                    let payoff = u.value_unchecked(y);
                    let exercise = payoff >= cont;
                    if record && in_exercise {
                        if exercise {
                            last_exercise = Some(y);
                        } else {
                            in_exercise = false;
                        }
                    }
                    payoff.max(cont)
                } else {
                    cont
                };
            }
            if record {
                boundary.push(ExercisePoint {
                    t: i as f64 * lat.dt,
                    y: last_exercise,
                });
            }
        }
        boundary.reverse();
        Ok((values[m], boundary))
    }

    pub fn tree_value(&self, cfg: TreeConfig, american: bool) -> Result<TreeResult> {
        let (value_at_root, exercise_boundary) = self.roll_back(&cfg, american, american)?;
        let dual_dy_at_root = self.dual_dy(cfg.y0, american)?;
        Ok(TreeResult {
            value_at_root,
            exercise_boundary,
            dual_dy_at_root,
        })
    }

    /// `Ṽ(0, y)` from an American tree with the oracle's step count.
    pub fn value(&self, y: f64) -> Result<f64> {
        Ok(self.roll_back(&TreeConfig::new(self.n_steps, y), true, false)?.0)
    }

    fn dual_dy(&self, y: f64, american: bool) -> Result<f64> {
        let h = DERIVATIVE_BUMP;
        let eval =
            |yy: f64| -> Result<f64> { Ok(self.roll_back(&TreeConfig::new(self.n_steps, yy), american, false)?.0) };
        Ok((eval(y * (1.0 + h))? - eval(y * (1.0 - h))?) / (2.0 * h * y))
    }

    /// `Ṽ_yy(0, y)` by a symmetric second difference with relative bump `h`.
    pub fn dual_dyy(&self, y: f64, h: f64) -> Result<f64> {
        let up = self.value(y * (1.0 + h))?;
        let mid = self.value(y)?;
        let down = self.value(y * (1.0 - h))?;
        Ok((up - 2.0 * mid + down) / (h * y * h * y))
    }

    /// Bump used for `Ṽ_yy`: one lattice period `2|θ|√Δt`. Smaller bumps
    /// resolve the kinks the exercise decision puts into the tree value.
    pub fn curvature_bump(&self) -> f64 {
        2.0 * self.log_step()
    }

    /// The `y` with `Ṽ_y(0, y) + x = 0`.
    pub fn find_initial_y(&self, x: f64) -> Result<f64> {
        let floor = self.problem.params().floor;
        if !(x > floor) || !x.is_finite() {
            return Err(Error::Domain {
                what: "wealth above floor",
                value: x,
            });
        }
        let f = |y: f64| -> Result<f64> { Ok(self.dual_dy(y, true)? + x) };
        let mut y = 1.0;
        let mut fy = f(y)?;
        // f is increasing in y: positive means the root lies below.
        let factor = if fy > 0.0 { 0.1 } else { 10.0 };
        let (mut lo, mut hi) = loop {
            if fy == 0.0 {
                return Ok(y);
            }
            let next = y * factor;
            if !(SCAN_MIN..=SCAN_MAX).contains(&next) {
                return Err(Error::ScanFailure { last: y });
            }
            let fnext = f(next)?;
            if fnext == 0.0 {
                return Ok(next);
            }
            if fnext.signum() != fy.signum() {
                break if next < y { (next, y) } else { (y, next) };
            }
            y = next;
            fy = fnext;
        };
        while hi - lo > BISECTION_TOL * lo {
            let mid = 0.5 * (lo + hi);
            if f(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Value and amount in the risky asset at `t = 0`. When the root node
    /// exercises, stopping is immediate and nothing is invested.
    pub fn btm_primal(&self, x: f64) -> Result<BtmPrimal> {
        let y = self.find_initial_y(x)?;
        let d = self.problem.derived();
        let (root, layers) = self.roll_back(&TreeConfig::new(self.n_steps, y), true, true)?;
        let stopped = layers.first().is_some_and(|pt| pt.y.is_some());
        let strategy = if stopped {
            0.0
        } else {
            d.theta / self.problem.params().sigma * y * self.dual_dyy(y, self.curvature_bump())?
        };
        Ok(BtmPrimal {
            x,
            y,
            value: root + x * y,
            strategy,
            strategy_fraction: strategy / x,
            stopped,
        })
    }

    /// Exercise boundary per layer, rooted at `e^{z₀}` with a halo wide
    /// enough to reach every layer's boundary. Wealth is `-Ũ_K'(y)`.
    pub fn btm_boundary(&self) -> Result<Vec<BoundaryPoint>> {
        let z0 = self.problem.solve_z0()?;
        let cfg = TreeConfig {
            n_steps: self.n_steps,
            y0: z0.exp(),
            halo: self.n_steps,
        };
        let (_, layers) = self.roll_back(&cfg, true, true)?;
        let u = self.problem.utility();
        Ok(layers
            .into_iter()
            .filter_map(|pt| {
                pt.y.map(|y| BoundaryPoint {
                    t: pt.t,
                    y,
                    x: u.wealth_at(y),
                })
            })
            .collect())
    }

    /// `e^{-βT} E[Ũ_K(Y_T)]` in closed form.
    pub fn european_closed_form(&self, y: f64) -> f64 {
        let d = self.problem.derived();
        let params = self.problem.params();
        let s = d.theta * d.theta * params.horizon / 2.0;
        self.problem
            .utility()
            .exponents()
            .iter()
            .map(|&q| -y.powf(q) / q * (d.growth_exponent(q) * s).exp())
            .sum::<f64>()
            - params.floor * y * (-params.r * params.horizon).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BtmPrimal {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub strategy: f64,
    pub strategy_fraction: f64,
    pub stopped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub t: f64,
    pub y: f64,
    pub x: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::utility::UtilitySpec;

    fn params() -> ModelParams {
        ModelParams {
            mu: 0.1,
            r: 0.05,
            sigma: 0.3,
            beta: 0.1,
            horizon: 1.0,
            floor: 1.0,
        }
    }

    fn oracle(spec: UtilitySpec, n: usize) -> BtmOracle {
        BtmOracle::new(&Problem::new(params(), &spec).unwrap(), n).unwrap()
    }

    #[test]
    fn european_tree_matches_lognormal_moments() {
        for spec in [UtilitySpec::Power { gamma: 0.5 }, UtilitySpec::NonHara] {
            let o = oracle(spec, 700);
            for y in [0.5, 1.0, 2.0] {
                let tree = o.tree_value(TreeConfig::new(700, y), false).unwrap();
                let exact = o.european_closed_form(y);
                assert!(
                    (tree.value_at_root - exact).abs() < 1e-4,
                    "{y}: {} vs {exact}",
                    tree.value_at_root
                );
            }
        }
    }

    #[test]
    fn american_dominates_european_and_obstacle() {
        let o = oracle(UtilitySpec::NonHara, 300);
        for y in [0.3, 1.0, 1.5, 3.0] {
            let am = o.tree_value(TreeConfig::new(300, y), true).unwrap();
            let eu = o.tree_value(TreeConfig::new(300, y), false).unwrap();
            assert!(am.value_at_root >= eu.value_at_root);
            assert!(am.value_at_root >= o.problem().utility().value(y).unwrap());
        }
    }

    #[test]
    fn halo_does_not_change_the_root_value() {
        let o = oracle(UtilitySpec::Power { gamma: 0.5 }, 200);
        let plain = o.value(1.3).unwrap();
        let wide = o
            .roll_back(
                &TreeConfig {
                    n_steps: 200,
                    y0: 1.3,
                    halo: 50,
                },
                true,
                false,
            )
            .unwrap()
            .0;
        assert!((plain - wide).abs() < 1e-14);
    }

    #[test]
    fn monotone_and_convex_in_root() {
        let o = oracle(UtilitySpec::Power { gamma: 0.5 }, 700);
        let ys: Vec<f64> = (0..20).map(|i| 0.5 + 0.1 * i as f64).collect();
        let v: Vec<f64> = ys.iter().map(|&y| o.value(y).unwrap()).collect();
        for w in v.windows(2) {
            assert!(w[1] < w[0]);
        }
        for w in v.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-8);
        }
    }

    #[test]
    fn refinement_shrinks_the_change() {
        let p = Problem::new(params(), &UtilitySpec::NonHara).unwrap();
        let v = |n| BtmOracle::new(&p, n).unwrap().value(1.5).unwrap();
        let (v200, v400, v800) = (v(200), v(400), v(800));
        let ratio = (v200 - v400).abs() / (v400 - v800).abs();
        assert!(ratio >= 1.5, "{ratio}");
    }

    #[test]
    fn short_horizon_recovers_terminal_root() {
        let mut short = params();
        short.horizon = 1e-4;
        let p = Problem::new(short, &UtilitySpec::Power { gamma: 0.5 }).unwrap();
        let y = BtmOracle::new(&p, 50).unwrap().find_initial_y(1.5).unwrap();
        assert!((y - 2f64.sqrt()).abs() < 1e-3, "{y}");
    }

    #[test]
    fn exercised_root_holds_nothing() {
        let o = oracle(UtilitySpec::Power { gamma: 0.5 }, 200);
        let b = o.btm_primal(2.5).unwrap();
        assert!(b.stopped);
        assert_eq!(b.strategy, 0.0);
        let payoff = o.problem().utility().primal_utility(1.5).unwrap();
        assert!((b.value - payoff).abs() < 1e-6, "{} vs {payoff}", b.value);
        assert!(!o.btm_primal(1.3).unwrap().stopped);
    }

    #[test]
    fn probability_check() {
        let mut bad = params();
        bad.beta = 5.0;
        let p = Problem::new(bad, &UtilitySpec::Power { gamma: 0.5 }).unwrap();
        assert!(matches!(
            BtmOracle::new(&p, 2),
            Err(Error::ProbabilityOutOfRange { .. })
        ));
        assert!(BtmOracle::new(&Problem::new(params(), &UtilitySpec::NonHara).unwrap(), 1).is_err());
    }

    #[test]
    fn boundary_tends_to_z0_wealth_near_the_horizon() {
        let o = oracle(UtilitySpec::Power { gamma: 0.5 }, 400);
        let b = o.btm_boundary().unwrap();
        let last = b.last().unwrap();
        let z0 = o.problem().solve_z0().unwrap();
        let x_end = o.problem().utility().wealth_at(z0.exp());
        let spacing = (o.problem().utility().wealth_at((z0 - 2.0 * o.log_step()).exp()) - x_end).abs();
        assert!((last.x - x_end).abs() <= 2.0 * spacing, "{} vs {x_end}", last.x);
        // Layers alternate parity, so the read-out may step back by less than one period.
        for w in b.windows(2) {
            assert!(w[1].y.ln() - w[0].y.ln() > -2.0 * o.log_step());
        }
    }
}
