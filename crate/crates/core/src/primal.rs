//! Primal value, optimal strategy and wealth paths recovered from the dual.
//!
//! For `t` fixed the dual root `y* = I(t, x)` solves `Ṽ_y(t, y) + x = 0`, and
//!
//! ```text
//! V(t, x) = Ṽ(t, y*) + x y*,     π* = (θ/σ) y* Ṽ_yy(t, y*).
//! ```
//!
//! Stopping is optimal once wealth reaches the boundary `x(t)`; there the
//! value is the payoff `U(x - K)` and nothing is held in the risky asset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::GcaBoundary;
use crate::dual_value::{DualValueEvaluator, DEFAULT_ORDER, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::model::Problem;
use crate::numerics::{find_root, Bracket, Integrator};

const SCAN_MIN: f64 = 1e-12;
const SCAN_MAX: f64 = 1e12;
const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrimalSolution {
    pub t: f64,
    pub x: f64,
    pub y_star: f64,
    pub value: f64,
    /// Amount held in the risky asset.
    pub strategy: f64,
    /// `strategy / x`.
    pub strategy_fraction: f64,
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub path: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub wealth: Vec<f64>,
    pub strategy: Vec<f64>,
    /// First grid time with wealth on or above the boundary, or `T`.
    pub stop_time: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub n_steps: usize,
    pub seed: u64,
    /// With `false` every Brownian increment is zero.
    pub shocks: bool,
}

impl SimulationConfig {
    pub fn new(seed: u64) -> Self {
        SimulationConfig {
            n_steps: 500,
            seed,
            shocks: true,
        }
    }
}

/// Primal quantities under the closed-form boundary.
#[derive(Debug, Clone)]
pub struct PrimalSolver {
    evaluator: DualValueEvaluator<GcaBoundary>,
}

impl PrimalSolver {
    pub fn new(problem: &Problem) -> Result<Self> {
        PrimalSolver::with_integrator(problem, Integrator::adaptive(DEFAULT_ORDER, DEFAULT_TOL))
    }

    pub fn with_integrator(problem: &Problem, quad: Integrator) -> Result<Self> {
        let boundary = GcaBoundary::new(problem)?;
        Ok(PrimalSolver {
            evaluator: DualValueEvaluator::with_integrator(problem, boundary, quad),
        })
    }

    pub fn problem(&self) -> &Problem {
        self.evaluator.problem()
    }

    pub fn boundary(&self) -> &GcaBoundary {
        self.evaluator.curve()
    }

    pub fn evaluator(&self) -> &DualValueEvaluator<GcaBoundary> {
        &self.evaluator
    }

    fn check(&self, t: f64, x: f64) -> Result<()> {
        let horizon = self.problem().params().horizon;
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Domain {
                what: "calendar time",
                value: t,
            });
        }
        if !(x > self.problem().params().floor) || !x.is_finite() {
            return Err(Error::Domain {
                what: "wealth above floor",
                value: x,
            });
        }
        Ok(())
    }

    /// `I(t, x)`: the root of `y ↦ Ṽ_y(t, y) + x`.
    pub fn solve_i(&self, t: f64, x: f64) -> Result<f64> {
        self.check(t, x)?;
        if self.problem().tau_at(t) == 0.0 {
            return self.problem().utility().marginal_at(x);
        }
        let ev = &self.evaluator;
        let f = |y: f64| ev.dual_vy(t, y).map(|v| v + x);
        let (lo, hi) = decade_scan(f)?;
        let mut failure = None;
        let s = find_root(
            |s| match f(s.exp()) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            Bracket::new(lo.ln(), hi.ln()).with_tolerances(ROOT_TOL, ROOT_TOL),
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(s?.exp()),
        }
    }

    /// Wealth boundary `x(t)`.
    pub fn wealth_boundary(&self, t: f64) -> Result<f64> {
        self.boundary().wealth(t)
    }

    pub fn is_stopped(&self, t: f64, x: f64) -> Result<bool> {
        Ok(x >= self.wealth_boundary(t)?)
    }

    pub fn primal_value(&self, t: f64, x: f64) -> Result<PrimalSolution> {
        self.check(t, x)?;
        let u = self.problem().utility();
        if self.is_stopped(t, x)? {
            return Ok(PrimalSolution {
                t,
                x,
                y_star: u.marginal_at(x)?,
                value: u.primal_utility(x - u.floor())?,
                strategy: 0.0,
                strategy_fraction: 0.0,
                stopped: true,
            });
        }
        let y = self.solve_i(t, x)?;
        let dual = self.evaluator.evaluate(t, y)?;
        let d = self.problem().derived();
        let strategy = d.theta / self.problem().params().sigma * y * dual.vyy;
        Ok(PrimalSolution {
            t,
            x,
            y_star: y,
            value: dual.v + x * y,
            strategy,
            strategy_fraction: strategy / x,
            stopped: false,
        })
    }

    /// `π*(t, x)`; zero in the stopping region.
    pub fn optimal_strategy(&self, t: f64, x: f64) -> Result<f64> {
        self.check(t, x)?;
        if self.is_stopped(t, x)? {
            return Ok(0.0);
        }
        let y = self.solve_i(t, x)?;
        let d = self.problem().derived();
        Ok(d.theta / self.problem().params().sigma * y * self.evaluator.dual_vyy(t, y)?)
    }

    /// Euler–Maruyama paths of `dX = rX dt + σπ(θ dt + dW)` under `π*`,
    /// frozen to riskless growth from the first grid time on the boundary.
    pub fn simulate_paths(&self, x0: f64, n_paths: usize, cfg: SimulationConfig) -> Result<Vec<PathRecord>> {
        self.check(0.0, x0)?;
        let x_start = self.wealth_boundary(0.0)?;
        if x0 >= x_start {
            return Err(Error::Domain {
                what: "initial wealth below the boundary",
                value: x0,
            });
        }
        if cfg.n_steps < 10 {
            return Err(Error::InvalidParameter {
                name: "n_steps",
                value: cfg.n_steps as f64,
                reason: "at least 10 steps",
            });
        }
        (0..n_paths)
            .into_par_iter()
            .map(|path| self.simulate_one(x0, path, cfg))
            .collect()
    }

    fn simulate_one(&self, x0: f64, path: usize, cfg: SimulationConfig) -> Result<PathRecord> {
        let params = self.problem().params();
        let (r, sigma, horizon, floor) = (params.r, params.sigma, params.horizon, params.floor);
        let theta = self.problem().derived().theta;
        let dt = horizon / cfg.n_steps as f64;
        let growth = (r * dt).exp();
        let guard = floor + 1e-9 * floor.max(1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(path as u64);

        let n = cfg.n_steps;
        let mut times = Vec::with_capacity(n + 1);
        let mut wealth = Vec::with_capacity(n + 1);
        let mut strategy = Vec::with_capacity(n + 1);
        let mut stop: Option<f64> = None;
        let mut x = x0;
        for i in 0..=n {
            let t = if i == n { horizon } else { i as f64 * dt };
            if stop.is_none() && self.is_stopped(t, x)? {
                stop = Some(t);
            }
            let pi = match stop {
                Some(_) => 0.0,
                None if i == n => 0.0,
                None => self.optimal_strategy(t, x)?,
            };
            times.push(t);
            wealth.push(x);
            strategy.push(pi);
            if i == n {
                break;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            x = match stop {
                Some(_) => x * growth,
                None => {
                    let dw = if cfg.shocks { dt.sqrt() * z } else { 0.0 };
                    (x + r * x * dt + sigma * pi * (theta * dt + dw)).max(guard)
                }
            };
        }
        Ok(PathRecord {
            path,
            seed: cfg.seed,
            times,
            wealth,
            strategy,
            stop_time: stop.unwrap_or(horizon),
            hit: stop.is_some(),
        })
    }
}

/// Multiply or divide by ten from `y = 1` until `f` changes sign; `f` is increasing.
fn decade_scan<F: Fn(f64) -> Result<f64>>(f: F) -> Result<(f64, f64)> {
    let mut y = 1.0;
    let mut fy = f(y)?;
    if fy == 0.0 {
        return Ok((y, y * (1.0 + 1e-12)));
    }
    let factor = if fy > 0.0 { 0.1 } else { 10.0 };
    loop {
        let next = y * factor;
        if !(SCAN_MIN..=SCAN_MAX).contains(&next) {
            return Err(Error::ScanFailure { last: y });
        }
        let fnext = f(next)?;
        if fnext.signum() != fy.signum() || fnext == 0.0 {
            return Ok(if next < y { (next, y) } else { (y, next) });
        }
        y = next;
        fy = fnext;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::utility::UtilitySpec;

    fn solver(spec: UtilitySpec, tol: f64) -> PrimalSolver {
        let p = ModelParams {
            mu: 0.1,
            r: 0.05,
            sigma: 0.3,
            beta: 0.1,
            horizon: 1.0,
            floor: 1.0,
        };
        let problem = Problem::new(p, &spec).unwrap();
        PrimalSolver::with_integrator(&problem, Integrator::adaptive(32, tol)).unwrap()
    }

    #[test]
    fn terminal_closed_forms() {
        let s = solver(UtilitySpec::Power { gamma: 0.5 }, 1e-9);
        assert!((s.solve_i(1.0, 1.5).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let v = s.primal_value(1.0, 1.5).unwrap();
        assert!((v.value - 2.0 * 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(v.strategy, 0.0);

        let s = solver(UtilitySpec::NonHara, 1e-9);
        let w = (3f64.sqrt() - 1.0) / 2.0;
        assert!((s.solve_i(1.0, 1.5).unwrap() - w.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn floor_and_domain_errors() {
        let s = solver(UtilitySpec::Power { gamma: 0.5 }, 1e-9);
        assert!(matches!(s.solve_i(0.0, 1.0), Err(Error::Domain { .. })));
        assert!(s.solve_i(-0.1, 1.5).is_err());
        // At the horizon the root diverges like (x - K)^{-1/2}; earlier the
        // far dual tail is discounted, -Ṽ_y stays below K and the root is finite.
        let near = 1.0 + 1e-12;
        assert!((s.solve_i(1.0, near).unwrap() / 1e6 - 1.0).abs() < 1e-3);
        let y = s.solve_i(0.0, near).unwrap();
        assert!((s.evaluator().dual_vy(0.0, y).unwrap() + near).abs() < 1e-9);
        assert!(-s.evaluator().dual_vy(0.0, 1e8).unwrap() < 1.0);
    }

    #[test]
    fn stopped_region_returns_payoff() {
        let s = solver(UtilitySpec::NonHara, 1e-9);
        let xb = s.wealth_boundary(0.3).unwrap();
        let v = s.primal_value(0.3, xb + 0.2).unwrap();
        assert!(v.stopped);
        assert_eq!(v.strategy, 0.0);
        let payoff = s.problem().utility().primal_utility(xb + 0.2 - 1.0).unwrap();
        assert_eq!(v.value, payoff);
        assert_eq!(s.optimal_strategy(0.3, xb + 0.2).unwrap(), 0.0);
    }

    #[test]
    fn continuation_root_satisfies_first_order_condition() {
        let s = solver(UtilitySpec::Power { gamma: 0.5 }, 1e-11);
        for &x in &[1.05, 1.2, 1.5] {
            let y = s.solve_i(0.0, x).unwrap();
            let vy = s.evaluator().dual_vy(0.0, y).unwrap();
            assert!((vy + x).abs() < 1e-8 * x);
        }
    }

    #[test]
    fn envelope_minimality_and_control_consistency() {
        let s = solver(UtilitySpec::Power { gamma: 0.5 }, 1e-12);
        let (sigma, theta) = (0.3, s.problem().derived().theta);
        for &x in &[1.2, 1.35, 1.5] {
            let sol = s.primal_value(0.0, x).unwrap();
            assert!(!sol.stopped);
            let h = 1e-3;
            let vp = s.primal_value(0.0, x + h).unwrap().value;
            let vm = s.primal_value(0.0, x - h).unwrap().value;
            let vx = (vp - vm) / (2.0 * h);
            let vxx = (vp - 2.0 * sol.value + vm) / (h * h);
            assert!(
                ((vx - sol.y_star) / sol.y_star).abs() < 1e-4,
                "x={x}: {vx} vs {}",
                sol.y_star
            );
            let pi_fd = -theta / sigma * vx / vxx;
            assert!(
                ((pi_fd - sol.strategy) / sol.strategy).abs() < 5e-3,
                "x={x}: {pi_fd} vs {}",
                sol.strategy
            );
            for y in [0.5 * sol.y_star, 2.0 * sol.y_star] {
                let other = s.evaluator().dual_v(0.0, y).unwrap() + x * y;
                assert!(sol.value <= other);
            }
        }
    }

    #[test]
    fn value_is_increasing_and_concave() {
        let s = solver(UtilitySpec::NonHara, 1e-12);
        let xs: Vec<f64> = (0..12).map(|i| 1.05 + 0.04 * i as f64).collect();
        let v: Vec<f64> = xs.iter().map(|&x| s.primal_value(0.0, x).unwrap().value).collect();
        for w in v.windows(2) {
            assert!(w[1] > w[0]);
        }
        for w in v.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-9);
        }
    }

    #[test]
    fn simulation_freezes_after_the_hit() {
        let s = solver(UtilitySpec::Power { gamma: 0.5 }, 1e-9);
        let cfg = SimulationConfig {
            n_steps: 50,
            seed: 42,
            shocks: false,
        };
        let paths = s.simulate_paths(1.4, 1, cfg).unwrap();
        let p = &paths[0];
        let (r, dt) = (0.05f64, 1.0 / 50.0);
        for i in 0..50 {
            let grow = p.wealth[i + 1] / p.wealth[i];
            if p.times[i] >= p.stop_time && p.hit {
                assert_eq!(p.strategy[i], 0.0);
                assert!((grow - (r * dt).exp()).abs() < 1e-15);
            } else {
                assert!(p.strategy[i] > 0.0);
                assert!(grow >= 1.0 + r * dt - 1e-15);
            }
        }
    }

    #[test]
    fn simulation_is_reproducible_and_checks_start() {
        let s = solver(UtilitySpec::NonHara, 1e-9);
        let cfg = SimulationConfig {
            n_steps: 20,
            seed: 7,
            shocks: true,
        };
        let a = s.simulate_paths(1.4, 3, cfg).unwrap();
        let b = s.simulate_paths(1.4, 3, cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].wealth, a[1].wealth);
        assert!(s.simulate_paths(1.9, 1, cfg).is_err());
        assert!(s.simulate_paths(0.9, 1, cfg).is_err());
    }
}
