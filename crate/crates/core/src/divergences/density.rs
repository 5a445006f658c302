use std::fmt;
use std::sync::Arc;

use super::convex::ConvexFunction;
use super::discrete::{refuse_non_smooth, ZERO_MASS};
use crate::distributions::TargetDist;
use crate::error::{Error, Result};

/// A 1-D density with a bounded support interval used for quadrature.
#[derive(Clone)]
pub struct DensityFn {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support: (f64, f64),
    /// Number of equal pieces the support is split into before adaptive refinement.
    pub subdivisions: usize,
}

impl fmt::Debug for DensityFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityFn")
            .field("support", &self.support)
            .field("subdivisions", &self.subdivisions)
            .finish()
    }
}

impl DensityFn {
    pub fn new(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
        subdivisions: usize,
    ) -> Self {
        DensityFn {
            eval: Arc::new(eval),
            support,
            subdivisions: subdivisions.max(1),
        }
    }

    /// `N(mean, std²)`, integrated over `mean ± 10·std`.
    pub fn gaussian(mean: f64, std: f64) -> Self {
        let c = 1.0 / (std * (2.0 * std::f64::consts::PI).sqrt());
        DensityFn::new(
            move |x| {
                let z = (x - mean) / std;
                c * (-0.5 * z * z).exp()
            },
            (mean - 10.0 * std, mean + 10.0 * std),
            16,
        )
    }

    /// Uniform on `[a, b)`.
    pub fn uniform(a: f64, b: f64) -> Self {
        let h = 1.0 / (b - a);
        DensityFn::new(move |x| if x >= a && x < b { h } else { 0.0 }, (a, b), 1)
    }

    /// The density of a 1-D target over its `±10σ` envelope.
    pub fn from_target(t: &TargetDist) -> Result<Self> {
        if t.dim() != 1 {
            return Err(Error::Unsupported(
                "density handles are one-dimensional".into(),
            ));
        }
        t.validate()?;
        t.pdf(&[0.0])?;
        let owned = t.clone();
        Ok(DensityFn::new(
            move |x| owned.pdf(&[x]).unwrap_or(0.0),
            t.envelope()[0],
            32,
        ))
    }

    /// The density at `x`. The support interval only bounds the quadrature;
    /// it does not truncate the evaluator.
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn total_mass(&self) -> f64 {
        integrate_pieces(
            &|x| self.eval(x),
            &breakpoints(&[self], self.subdivisions),
            1e-9,
        )
    }
}

fn breakpoints(ds: &[&DensityFn], pieces: usize) -> Vec<f64> {
    let mut ends: Vec<f64> = ds.iter().flat_map(|d| [d.support.0, d.support.1]).collect();
    ends.sort_by(f64::total_cmp);
    ends.dedup();
    let mut pts = Vec::new();
    for w in ends.windows(2) {
        for k in 0..pieces {
            pts.push(w[0] + (w[1] - w[0]) * k as f64 / pieces as f64);
        }
    }
    pts.push(*ends.last().expect("nonempty support"));
    pts
}

/// Adaptive Simpson over each consecutive pair of breakpoints. Pieces are
/// nudged inward by a relative `1e-15` so jump discontinuities at the
/// breakpoints are never sampled from the wrong side.
fn integrate_pieces(g: &dyn Fn(f64) -> f64, pts: &[f64], tol: f64) -> f64 {
    let n = (pts.len() - 1).max(1) as f64;
    pts.windows(2)
        .map(|w| {
            let eps = (w[1] - w[0]) * 1e-15;
            adaptive_simpson(g, w[0] + eps, w[1] - eps, tol / n)
        })
        .sum()
}

pub fn adaptive_simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let (fa, fb) = (g(a), g(b));
    let m = 0.5 * (a + b);
    let fm = g(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(g, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    g: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (g(lm), g(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return f64::INFINITY;
    }
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `∫ q f(p/q)` over `{q > 1e-300}` by adaptive Simpson at absolute
/// tolerance `1e-7`. Returns `+∞` if the integrand blows up.
pub fn f_div_quadrature(cf: &ConvexFunction, p: &DensityFn, q: &DensityFn) -> Result<f64> {
    let g = |x: f64| {
        let qx = q.eval(x);
        if qx < ZERO_MASS {
            0.0
        } else {
            qx * cf.eval(p.eval(x) / qx)
        }
    };
    let pieces = p.subdivisions.max(q.subdivisions);
    let v = integrate_pieces(&g, &breakpoints(&[p, q], pieces), 1e-7);
    Ok(if v.is_nan() { f64::INFINITY } else { v })
}

/// `T*(x) = f′(p(x)/q(x))` for a density pair.
pub fn optimal_critic_density(
    cf: &ConvexFunction,
    p: &DensityFn,
    q: &DensityFn,
    x: f64,
) -> Result<f64> {
    refuse_non_smooth(cf)?;
    let qx = q.eval(x);
    if qx < ZERO_MASS {
        return Err(Error::Domain(format!("q vanishes at {x}")));
    }
    let r = p.eval(x) / qx;
    cf.derivative(r)
        .ok_or_else(|| Error::Domain(format!("ratio {r} at {x} is outside the domain of f'")))
}
