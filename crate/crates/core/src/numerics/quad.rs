//! Gauss–Legendre quadrature, fixed-order and panel-adaptive.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights of an `order`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess for the i-th largest root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        QuadratureRule { order, nodes, weights }
    }

    /// Shared rule for `order`; built once per order per process.
    pub fn cached(order: usize) -> Arc<QuadratureRule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(order)
            .or_insert_with(|| Arc::new(QuadratureRule::new(order)))
            .clone()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Plain Gauss–Legendre sum over `[a, b]`.
    pub fn apply<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub const DEFAULT_ORDER: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 30;

/// A quadrature rule plus the adaptive-refinement policy used with it.
#[derive(Debug, Clone)]
pub struct Integrator {
    rule: Arc<QuadratureRule>,
    adaptive: bool,
    tol: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::adaptive(DEFAULT_ORDER, DEFAULT_TOL)
    }
}

impl Integrator {
    pub fn fixed(order: usize) -> Self {
        Integrator {
            rule: QuadratureRule::cached(order),
            adaptive: false,
            tol: DEFAULT_TOL,
        }
    }

    pub fn adaptive(order: usize, tol: f64) -> Self {
        Integrator {
            rule: QuadratureRule::cached(order),
            adaptive: true,
            tol,
        }
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn is_adaptive(&self) -> bool {
        self.adaptive
    }

    /// `∫_a^b f`. In adaptive mode a panel is accepted once the sum over its
    /// two halves agrees with the whole-panel value to within its budget; the
    /// budget starts at `tol * max(1, |I|)` and shrinks by `√2` per split.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> Result<f64> {
        if !(a <= b) {
            return Err(Error::Domain {
                what: "integration interval",
                value: b - a,
            });
        }
        if a == b {
            return Ok(0.0);
        }
        let whole = self.rule.apply(&mut f, a, b);
        if !self.adaptive {
            return Ok(whole);
        }
        let tol = self.tol * whole.abs().max(1.0);
        self.refine(&mut f, a, b, whole, tol, 0)
    }

    fn refine<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let m = 0.5 * (a + b);
        let left = self.rule.apply(f, a, m);
        let right = self.rule.apply(f, m, b);
        let both = left + right;
        if !both.is_finite() {
            return Err(Error::TolNotReached { a, b, tol });
        }
        if (both - whole).abs() <= tol {
            return Ok(both);
        }
        if depth >= MAX_DEPTH {
            return Err(Error::TolNotReached { a, b, tol });
        }
        let sub = tol * std::f64::consts::FRAC_1_SQRT_2;
        let l = self.refine(f, a, m, left, sub, depth + 1)?;
        let r = self.refine(f, m, b, right, sub, depth + 1)?;
        Ok(l + r)
    }

    /// `∫_a^∞ f` through the map `x = a + s / (1 - s)`, `s ∈ [0, 1)`.
    pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64) -> Result<f64> {
        self.integrate(
            |s| {
                if s >= 1.0 {
                    return 0.0;
                }
                let one_minus = 1.0 - s;
                let v = f(a + s / one_minus) / (one_minus * one_minus);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
        )
    }
}
