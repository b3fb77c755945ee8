//! Bracketed scalar root finding.
//!
//! [`find_root`] is Brent's method: inverse quadratic interpolation or a
//! secant step when it lands well inside the bracket, bisection otherwise.
//! The iterate never leaves the initial bracket.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Self {
        Bracket {
            lo,
            hi,
            tol_abs: 1e-12,
            tol_rel: 1e-12,
            max_iter: 200,
        }
    }

    pub fn with_tolerances(mut self, tol_abs: f64, tol_rel: f64) -> Self {
        self.tol_abs = tol_abs;
        self.tol_rel = tol_rel;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Domain {
                what: "bracket width",
                value: self.hi - self.lo,
            });
        }
        if !(self.tol_abs > 0.0 && self.tol_rel > 0.0) {
            return Err(Error::Domain {
                what: "bracket tolerance",
                value: self.tol_abs.min(self.tol_rel),
            });
        }
        Ok(())
    }
}

/// Root of `f` inside `b`, requiring `f(lo) * f(hi) <= 0`.
pub fn find_root<F>(mut f: F, b: Bracket) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    b.check()?;
    let (mut a, mut c) = (b.lo, b.hi);
    let (mut fa, mut fc) = (f(a), f(c));
    if fa == 0.0 {
        return Ok(a);
    }
    if fc == 0.0 {
        return Ok(c);
    }
    if fa.is_nan() || fc.is_nan() || fa.signum() == fc.signum() {
        return Err(Error::NoSignChange { lo: b.lo, hi: b.hi });
    }

    // `bb` is the best iterate, `a` the previous one, `c` keeps the sign change.
    let mut bb = c;
    let mut fb = fc;
    c = a;
    fc = fa;
    let mut d = bb - a;
    let mut e = d;

    for _ in 0..b.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = bb - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = bb;
            bb = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }

        let tol = 0.5 * (b.tol_rel * bb.abs() + b.tol_abs);
        let m = 0.5 * (c - bb);
        if m.abs() <= tol || fb == 0.0 || fb.abs() <= b.tol_abs * 1e-3 {
            return Ok(bb);
        }

        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (bb - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }

        a = bb;
        fa = fb;
        bb += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(bb);
        if fb.is_nan() {
            return Err(Error::Domain {
                what: "objective value",
                value: bb,
            });
        }
    }
    Err(Error::MaxIterExceeded(b.max_iter))
}

/// Widens `[lo, hi]` by doubling its distance from `centre` until `f` changes
/// sign or the bracket would leave `[-limit, limit]`.
pub fn expand_bracket<F>(mut f: F, mut lo: f64, mut hi: f64, limit: f64) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let centre = 0.5 * (lo + hi);
    loop {
        let (flo, fhi) = (f(lo), f(hi));
        if flo.is_finite() && fhi.is_finite() && flo.signum() != fhi.signum() {
            return Some((lo, hi));
        }
        if lo <= -limit && hi >= limit {
            return None;
        }
        lo = (centre - 2.0 * (centre - lo)).max(-limit);
        hi = (centre + 2.0 * (hi - centre)).min(limit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_two() {
        let x = find_root(|x| x * x - 2.0, Bracket::new(1.0, 2.0)).unwrap();
        assert!((x - std::f64::consts::SQRT_2).abs() < 1e-10);
    }

    #[test]
    fn no_sign_change() {
        let err = find_root(|x| x * x + 1.0, Bracket::new(-1.0, 2.0)).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn iteration_cap() {
        let b = Bracket::new(0.0, 3.0).with_tolerances(1e-300, 1e-300).with_max_iter(3);
        let err = find_root(|x| (x - 1.234_567).powi(3), b).unwrap_err();
        assert_eq!(err, Error::MaxIterExceeded(3));
    }

    #[test]
    fn endpoint_root() {
        assert_eq!(find_root(|x| x - 1.0, Bracket::new(1.0, 2.0)).unwrap(), 1.0);
    }

    #[test]
    fn bad_bracket() {
        assert!(find_root(|x| x, Bracket::new(1.0, -1.0)).is_err());
    }

    #[test]
    fn expansion_finds_far_root() {
        let (lo, hi) = expand_bracket(|x| 20.0 - x, -1.0, 1.0, 50.0).unwrap();
        assert!(lo < 20.0 && 20.0 < hi);
        assert!(expand_bracket(|x| x * x + 1.0, -1.0, 1.0, 50.0).is_none());
    }

    proptest::proptest! {
        #[test]
        fn root_stays_in_bracket(r in -5.0f64..5.0, w1 in 0.01f64..4.0, w2 in 0.01f64..4.0) {
            let lo = r - w1;
            let hi = r + w2;
            let x = find_root(|x| (x - r).powi(3) + 0.1 * (x - r), Bracket::new(lo, hi)).unwrap();
            proptest::prop_assert!(x >= lo && x <= hi);
            proptest::prop_assert!((x - r).abs() < 1e-9);
        }
    }
}
