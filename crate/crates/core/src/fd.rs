//! Finite-difference oracle for the obstacle problem
//!
//! ```text
//! min{ v_τ - v_zz + κ v_z + ρ v,  v - g } = 0,   v(0, z) = g(z),
//! ```
//!
//! marched in `τ` with a θ-scheme (Crank–Nicolson after fully implicit
//! start-up steps) and projected SOR for the complementarity problem at each
//! step. `v = g` is imposed at `z_min`, a discrete `v_zz = 0` at `z_max`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Problem;

const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Implicit,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub z_min: f64,
    pub z_max: f64,
    pub n_z: usize,
    pub n_tau: usize,
    /// Final dimensionless time; the problem's `τ_max` by default.
    pub tau_end: f64,
    pub omega: f64,
    pub psor_tol: f64,
    pub scheme: Scheme,
    /// Fully implicit steps before switching to `scheme`.
    pub startup_steps: usize,
}

impl FdConfig {
    /// Defaults centred on the problem's `z₀`.
    pub fn around(problem: &Problem) -> Result<Self> {
        let z0 = problem.solve_z0()?;
        Ok(FdConfig {
            z_min: z0 - 6.0,
            z_max: z0 + 6.0,
            n_z: 1200,
            n_tau: 400,
            tau_end: problem.derived().tau_max,
            omega: 1.5,
            psor_tol: 1e-10,
            scheme: Scheme::CrankNicolson,
            startup_steps: 2,
        })
    }

    pub fn dz(&self) -> f64 {
        (self.z_max - self.z_min) / (self.n_z - 1) as f64
    }

    fn validate(&self, z0: f64, kappa: f64, rho: f64) -> Result<()> {
        let bad = |name, value, reason| Err(Error::InvalidParameter { name, value, reason });
        if !(self.z_min < z0 - 2.0) {
            return bad("z_min", self.z_min, "must lie below z0 - 2");
        }
        if !(self.z_max > z0 + 3.0) {
            return bad("z_max", self.z_max, "must lie above z0 + 3");
        }
        if self.n_z < 200 {
            return bad("n_z", self.n_z as f64, "at least 200 nodes");
        }
        if self.n_tau < 1 {
            return bad("n_tau", self.n_tau as f64, "at least one step");
        }
        if !(self.omega > 1.0 && self.omega < 2.0) {
            return bad("omega", self.omega, "must lie in (1, 2)");
        }
        if !(self.psor_tol > 0.0) {
            return bad("psor_tol", self.psor_tol, "must be positive");
        }
        if !(self.tau_end > 0.0 && self.tau_end.is_finite()) {
            return bad("tau_end", self.tau_end, "must be positive");
        }
        // The v_zz = 0 row loses diagonal dominance (and PSOR stalls) past this step.
        let dt = self.tau_end / self.n_tau as f64;
        let limit = 1.0 / (2.0 * kappa.abs() / self.dz() - rho).max(f64::MIN_POSITIVE);
        if dt > limit {
            return bad(
                "n_tau",
                self.n_tau as f64,
                "time step too large for the v_zz = 0 boundary row",
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FdSolution {
    pub z: Vec<f64>,
    pub tau: Vec<f64>,
    /// Obstacle `g` on the grid.
    pub obstacle: Vec<f64>,
    /// Last contact node per layer; `None` if the lowest node is already free.
    /// Layer 0 is the initial condition and reports `z₀`.
    pub boundary: Vec<Option<f64>>,
    /// Largest scaled `|(v - g)(Mv - b)|` per step, see `complementarity_gap`.
    pub complementarity: Vec<f64>,
    pub sweeps: Vec<usize>,
    surface: Vec<f64>,
    n_z: usize,
}

impl FdSolution {
    /// `v` at time layer `n`.
    pub fn layer(&self, n: usize) -> &[f64] {
        &self.surface[n * self.n_z..(n + 1) * self.n_z]
    }

    pub fn n_layers(&self) -> usize {
        self.tau.len()
    }

    /// Boundary at the layer nearest to `tau`.
    pub fn boundary_at(&self, tau: f64) -> Option<f64> {
        let dt = self.tau[1] - self.tau[0];
        let n = ((tau / dt).round() as usize).min(self.tau.len() - 1);
        self.boundary[n]
    }
}

/// Tridiagonal rows of `A v = v_zz - κ v_z - ρ v`.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    lower: f64,
    diag: f64,
    upper: f64,
}

impl Stencil {
    fn new(kappa: f64, rho: f64, dz: f64) -> Self {
        let d2 = 1.0 / (dz * dz);
        let d1 = kappa / (2.0 * dz);
        Stencil {
            lower: d2 + d1,
            diag: -2.0 * d2 - rho,
            upper: d2 - d1,
        }
    }

    /// The last row after eliminating the ghost node through `v_zz = 0`.
    fn last_row(&self) -> (f64, f64) {
        (self.lower - self.upper, self.diag + 2.0 * self.upper)
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        out[0] = 0.0;
        for i in 1..n - 1 {
            out[i] = self.lower * v[i - 1] + self.diag * v[i] + self.upper * v[i + 1];
        }
        let (l, d) = self.last_row();
        out[n - 1] = l * v[n - 2] + d * v[n - 1];
    }
}

pub fn solve_obstacle(problem: &Problem, cfg: &FdConfig) -> Result<FdSolution> {
    let z0 = problem.solve_z0()?;
    let d = problem.derived();
    cfg.validate(z0, d.kappa, d.rho)?;
    let utility = problem.utility();
    let nz = cfg.n_z;
    let dz = cfg.dz();
    let dt = cfg.tau_end / cfg.n_tau as f64;
    let z: Vec<f64> = (0..nz).map(|i| cfg.z_min + i as f64 * dz).collect();
    let g: Vec<f64> = z.iter().map(|&zi| utility.obstacle(zi)).collect();
    let stencil = Stencil::new(d.kappa, d.rho, dz);
    let (last_lower, last_diag) = stencil.last_row();
    let contact_tol = 10.0 * cfg.psor_tol;

    let mut surface = Vec::with_capacity(nz * (cfg.n_tau + 1));
    surface.extend_from_slice(&g);
    let mut boundary = vec![Some(z0)];
    let mut complementarity = vec![0.0];
    let mut sweeps_used = vec![0];
    let mut v = g.clone();
    let mut av = vec![0.0; nz];
    let mut rhs = vec![0.0; nz];

    for step in 1..=cfg.n_tau {
        let theta = match cfg.scheme {
            _ if step <= cfg.startup_steps => 1.0,
            Scheme::Implicit => 1.0,
            Scheme::CrankNicolson => 0.5,
        };
        let explicit = (1.0 - theta) * dt;
        stencil.apply(&v, &mut av);
        for i in 0..nz {
            rhs[i] = v[i] + explicit * av[i];
        }
        rhs[0] = g[0];
        // M = I - θΔτ A.
        let (ml, md, mu) = (
            -theta * dt * stencil.lower,
            1.0 - theta * dt * stencil.diag,
            -theta * dt * stencil.upper,
        );
        let (ll, ld) = (-theta * dt * last_lower, 1.0 - theta * dt * last_diag);
        v[0] = g[0];

        let mut sweeps = 0;
        loop {
            sweeps += 1;
            let mut change: f64 = 0.0;
            for i in 1..nz {
                let gs = if i == nz - 1 {
                    (rhs[i] - ll * v[i - 1]) / ld
                } else {
                    (rhs[i] - ml * v[i - 1] - mu * v[i + 1]) / md
                };
                let new = (v[i] + cfg.omega * (gs - v[i])).max(g[i]);
                change = change.max((new - v[i]).abs() / v[i].abs().max(1.0));
                v[i] = new;
            }
            if change <= cfg.psor_tol {
                let worst = complementarity_gap(&v, &g, &rhs, (ml, md, mu), (ll, ld));
                if worst <= cfg.psor_tol {
                    break;
                }
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::PsorNotConverged {
                    step,
                    iterations: sweeps,
                });
            }
        }

        let worst = complementarity_gap(&v, &g, &rhs, (ml, md, mu), (ll, ld));
        complementarity.push(worst);
        sweeps_used.push(sweeps);
        boundary.push(last_contact(&z, &v, &g, contact_tol));
        surface.extend_from_slice(&v);
    }

    Ok(FdSolution {
        z,
        tau: (0..=cfg.n_tau).map(|n| n as f64 * dt).collect(),
        obstacle: g,
        boundary,
        complementarity,
        sweeps: sweeps_used,
        surface,
        n_z: nz,
    })
}

/// `max |(v - g)(Mv - b)| / (M_ii max(1, |g|)²)` over the free rows.
fn complementarity_gap(v: &[f64], g: &[f64], rhs: &[f64], row: (f64, f64, f64), last: (f64, f64)) -> f64 {
    let n = v.len();
    let (ml, md, mu) = row;
    let (ll, ld) = last;
    let mut worst: f64 = 0.0;
    for i in 1..n {
        let (mv, diag) = if i == n - 1 {
            (ll * v[i - 1] + ld * v[i], ld)
        } else {
            (ml * v[i - 1] + md * v[i] + mu * v[i + 1], md)
        };
        let scale = g[i].abs().max(1.0);
        worst = worst.max(((v[i] - g[i]) * (mv - rhs[i])).abs() / (diag * scale * scale));
    }
    worst
}

/// Scanning up from `z_min`, the last node with `v = g` before the first free node.
fn last_contact(z: &[f64], v: &[f64], g: &[f64], tol: f64) -> Option<f64> {
    let mut last = None;
    for i in 0..z.len() {
        if v[i] - g[i] <= tol * g[i].abs().max(1.0) {
            last = Some(z[i]);
        } else {
            break;
        }
    }
    last
}
