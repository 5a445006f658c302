use super::convex::{ConvexFunction, Interval};
use crate::error::{Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const FAR: f64 = 1e15;

/// Outcome of maximizing a concave function over an interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maximum {
    pub arg: f64,
    pub value: f64,
    /// True when the supremum is approached at an open or infinite end
    /// rather than attained.
    pub at_boundary: bool,
}

/// Supremum of a concave `h` over `dom` (where `h` is `−∞` outside).
///
/// Brackets by stepping away from an interior anchor: steps double toward an
/// infinite end and halve the remaining distance toward a finite one. The
/// bracket is then refined by golden-section search until its width falls
/// below `tol · (1 + |t|)`. Returns `None` if `h` keeps growing without bound.
pub fn maximize_concave(h: impl Fn(f64) -> f64, dom: Interval, tol: f64) -> Option<Maximum> {
    let a = dom.anchor();
    let ha = h(a);
    let step_toward = |k: i32, up: bool| -> f64 {
        let end = if up { dom.hi } else { dom.lo };
        let s = 2f64.powi(k);
        if end.is_finite() {
            end - (end - a) * 0.5f64.powi(k)
        } else if up {
            a + s
        } else {
            a - s
        }
    };
    let closed_end = |up: bool| -> Option<(f64, f64)> {
        let (closed, end) = if up {
            (dom.hi_closed, dom.hi)
        } else {
            (dom.lo_closed, dom.lo)
        };
        (closed && end.is_finite()).then(|| (end, h(end)))
    };

    let h_up = h(step_toward(1, true));
    let h_dn = h(step_toward(1, false));
    let up = if h_up > ha {
        true
    } else if h_dn > ha {
        false
    } else {
        return Some(golden(
            &h,
            step_toward(1, false),
            a,
            step_toward(1, true),
            ha,
            tol,
            &closed_end,
        ));
    };

    // Walk while the objective keeps increasing.
    let (mut prev, mut hprev) = (a, ha);
    let (mut cur, mut hcur) = (step_toward(1, up), if up { h_up } else { h_dn });
    let mut k = 1;
    loop {
        k += 1;
        let next = step_toward(k, up);
        let stuck = next == cur || next.abs() > FAR || k > 1100;
        if stuck {
            if let Some((end, hend)) = closed_end(up) {
                if hend >= hcur {
                    return Some(Maximum {
                        arg: end,
                        value: hend,
                        at_boundary: false,
                    });
                }
            }
            let end = if up { dom.hi } else { dom.lo };
            if end.is_infinite() && hcur - hprev > tol.max(1e-12) * (1.0 + hcur.abs()) {
                return None;
            }
            return Some(Maximum {
                arg: cur,
                value: hcur,
                at_boundary: true,
            });
        }
        let hn = h(next);
        if hn <= hcur {
            let (l, r) = if up { (prev, next) } else { (next, prev) };
            return Some(golden(&h, l, cur, r, hcur, tol, &closed_end));
        }
        prev = cur;
        hprev = hcur;
        cur = next;
        hcur = hn;
    }
}

fn golden(
    h: &impl Fn(f64) -> f64,
    mut l: f64,
    m: f64,
    mut r: f64,
    hm: f64,
    tol: f64,
    closed_end: &impl Fn(bool) -> Option<(f64, f64)>,
) -> Maximum {
    let (mut best, mut hbest) = (m, hm);
    let mut x1 = r - GOLDEN * (r - l);
    let mut x2 = l + GOLDEN * (r - l);
    let (mut h1, mut h2) = (h(x1), h(x2));
    for _ in 0..300 {
        if r - l <= tol * (1.0 + best.abs()) {
            break;
        }
        if h1 >= h2 {
            r = x2;
            x2 = x1;
            h2 = h1;
            x1 = r - GOLDEN * (r - l);
            h1 = h(x1);
        } else {
            l = x1;
            x1 = x2;
            h1 = h2;
            x2 = l + GOLDEN * (r - l);
            h2 = h(x2);
        }
        for (x, hx) in [(x1, h1), (x2, h2)] {
            if hx > hbest {
                best = x;
                hbest = hx;
            }
        }
    }
    // Attained closed endpoints (the indicator and piecewise-linear cases).
    for up in [false, true] {
        if let Some((end, hend)) = closed_end(up) {
            if hend > hbest {
                best = end;
                hbest = hend;
            }
        }
    }
    Maximum {
        arg: best,
        value: hbest,
        at_boundary: false,
    }
}

/// `f*(y) = sup_{t ∈ I} {t·y − f(t)}`, computed numerically from `f` alone.
///
/// `tol` bounds the width of the final bracket (relative); the returned value
/// is typically accurate to a few ulps of `|f*(y)|` beyond that.
pub fn conjugate_numeric(cf: &ConvexFunction, y: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::InvalidConfig(format!(
            "conjugate tolerance must be in (0, 1e-4], got {tol}"
        )));
    }
    let star = cf.conjugate_domain();
    if !star.closure_contains(y) {
        return Err(Error::Domain(format!(
            "{} conjugate is +inf at {y}",
            cf.name()
        )));
    }
    let m = maximize_concave(|t| t * y - cf.eval(t), cf.domain(), tol)
        .ok_or_else(|| Error::Domain(format!("{} conjugate is +inf at {y}", cf.name())))?;
    Ok(m.value)
}

/// `(f*)*(t)`, maximizing over `I*` with the analytic (or root-found) `f*`.
pub fn biconjugate(cf: &ConvexFunction, t: f64, tol: f64) -> Result<f64> {
    let h = |y: f64| match cf.conjugate(y) {
        Ok(v) => t * y - v,
        Err(_) => f64::NEG_INFINITY,
    };
    maximize_concave(h, cf.conjugate_domain(), tol)
        .map(|m| m.value)
        .ok_or_else(|| Error::Domain(format!("biconjugate of {} diverges at {t}", cf.name())))
}

/// Largest `|(f*)*(t) − f(t)|` over `grid`, which must lie in the interior of `I`.
pub fn fenchel_check(cf: &ConvexFunction, grid: &[f64]) -> Result<f64> {
    let dom = cf.domain();
    let mut worst = 0.0f64;
    for &t in grid {
        if !dom.contains_interior(t) {
            return Err(Error::Domain(format!(
                "{t} is not interior to the domain of {}",
                cf.name()
            )));
        }
        worst = worst.max((biconjugate(cf, t, 1e-12)? - cf.eval(t)).abs());
    }
    Ok(worst)
}

/// `sup_{t ∈ I*} {t·a − f*(t)·b}` for `a, b ≥ 0`: one support point of the
/// discrete dual problem, computed numerically.
pub(crate) fn pointwise_dual_sup(cf: &ConvexFunction, a: f64, b: f64) -> Option<f64> {
    let h = |t: f64| match cf.conjugate(t) {
        Ok(v) => t * a - v * b,
        Err(_) => f64::NEG_INFINITY,
    };
    maximize_concave(h, cf.conjugate_domain(), 1e-12).map(|m| m.value)
}
