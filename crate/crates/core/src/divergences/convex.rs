use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::autodiff::{softplus, ScalarMap, Tape, Var};
use crate::error::{Error, Result};

/// An interval of the real line with open or closed ends; infinite ends are open.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub const REAL: Interval = Interval::open(f64::NEG_INFINITY, f64::INFINITY);

    pub const fn open(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub const fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub const fn closed_open(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
        }
    }

    pub const fn open_closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: false,
            hi_closed: true,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// Membership in the closure (finite endpoints included).
    pub fn closure_contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi && x.is_finite()
    }

    /// A representative interior point: 1 when inside, otherwise one unit in
    /// from a finite end, or the midpoint of a bounded interval.
    pub fn anchor(&self) -> f64 {
        if self.contains_interior(1.0) {
            return 1.0;
        }
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => 0.5 * (self.lo + self.hi),
            (true, false) => self.lo + 1.0,
            (false, true) => self.hi - 1.0,
            (false, false) => 0.0,
        }
    }
}

/// Catalog identifiers usable as f-GAN objectives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogId {
    Kl,
    Js,
    Tv { alpha: f64 },
    Logd,
}

impl CatalogId {
    pub fn all_default() -> [CatalogId; 4] {
        [
            CatalogId::Kl,
            CatalogId::Js,
            CatalogId::Tv { alpha: 1.0 },
            CatalogId::Logd,
        ]
    }

    pub fn label(&self) -> String {
        match self {
            CatalogId::Kl => "kl".into(),
            CatalogId::Js => "js".into(),
            CatalogId::Tv { alpha } => format!("tv({alpha})"),
            CatalogId::Logd => "logd".into(),
        }
    }
}

/// A strictly (or, for `Tv`, merely) convex function together with its
/// domain, derivative, conjugate, conjugate domain and output activation.
///
/// The first four variants are the f-divergence catalog. The rest are the
/// textbook conjugate pairs used to validate the numeric conjugate.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvexFunction {
    /// `f(t) = −ln t` on `(0, ∞)`.
    Kl,
    /// `f(t) = t ln t − (t+1) ln((t+1)/2)` on `[0, ∞)`, the partner of
    /// `f*(u) = −ln(2 − eᵘ)`.
    Js,
    /// `f(t) = α|t − 1|` on ℝ, with `f*(u) = u` on `[−α, α]`.
    Tv { alpha: f64 },
    /// `f(t) = (t − 1) ln(t / (t + 1))` on `(0, ∞)`; conjugate has no closed form.
    Logd,
    /// `eˣ`
    Exp,
    /// `x²`
    Square,
    /// `√(1 + x²)`
    SoftAbs,
    /// `0` on `[0, 1]`, `+∞` elsewhere.
    UnitIndicator,
    /// `g(a·x − b)` for `a ≠ 0`.
    Affine {
        inner: Box<ConvexFunction>,
        a: f64,
        b: f64,
    },
}

impl From<CatalogId> for ConvexFunction {
    fn from(id: CatalogId) -> Self {
        match id {
            CatalogId::Kl => ConvexFunction::Kl,
            CatalogId::Js => ConvexFunction::Js,
            CatalogId::Tv { alpha } => ConvexFunction::Tv { alpha },
            CatalogId::Logd => ConvexFunction::Logd,
        }
    }
}

impl ConvexFunction {
    pub fn name(&self) -> String {
        match self {
            ConvexFunction::Kl => "kl".into(),
            ConvexFunction::Js => "js".into(),
            ConvexFunction::Tv { alpha } => format!("tv({alpha})"),
            ConvexFunction::Logd => "logd".into(),
            ConvexFunction::Exp => "exp".into(),
            ConvexFunction::Square => "square".into(),
            ConvexFunction::SoftAbs => "sqrt(1+x^2)".into(),
            ConvexFunction::UnitIndicator => "zero_on_unit".into(),
            ConvexFunction::Affine { inner, a, b } => format!("{}({a}x-{b})", inner.name()),
        }
    }

    pub fn domain(&self) -> Interval {
        match self {
            ConvexFunction::Kl | ConvexFunction::Logd => Interval::open(0.0, f64::INFINITY),
            ConvexFunction::Js => Interval::closed_open(0.0, f64::INFINITY),
            ConvexFunction::Tv { .. }
            | ConvexFunction::Exp
            | ConvexFunction::Square
            | ConvexFunction::SoftAbs => Interval::REAL,
            ConvexFunction::UnitIndicator => Interval::closed(0.0, 1.0),
            ConvexFunction::Affine { inner, a, b } => {
                let d = inner.domain();
                // x with a·x − b ∈ d
                let (l, h) = ((d.lo + b) / a, (d.hi + b) / a);
                if *a > 0.0 {
                    Interval {
                        lo: l,
                        hi: h,
                        lo_closed: d.lo_closed,
                        hi_closed: d.hi_closed,
                    }
                } else {
                    Interval {
                        lo: h,
                        hi: l,
                        lo_closed: d.hi_closed,
                        hi_closed: d.lo_closed,
                    }
                }
            }
        }
    }

    /// `f(t)`, with `+∞` outside the domain.
    pub fn eval(&self, t: f64) -> f64 {
        if !self.domain().contains(t) {
            return f64::INFINITY;
        }
        match self {
            ConvexFunction::Kl => -t.ln(),
            ConvexFunction::Js => {
                if t == 0.0 {
                    LN_2
                } else {
                    t * t.ln() - (t + 1.0) * ((t + 1.0) / 2.0).ln()
                }
            }
            ConvexFunction::Tv { alpha } => alpha * (t - 1.0).abs(),
            ConvexFunction::Logd => (t - 1.0) * -(1.0 / t).ln_1p(),
            ConvexFunction::Exp => t.exp(),
            ConvexFunction::Square => t * t,
            ConvexFunction::SoftAbs => t.hypot(1.0),
            ConvexFunction::UnitIndicator => 0.0,
            ConvexFunction::Affine { inner, a, b } => inner.eval(a * t - b),
        }
    }

    /// `f′(t)` on the interior of the domain; `None` at kinks or outside.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        if !self.domain().contains_interior(t) {
            return None;
        }
        Some(match self {
            ConvexFunction::Kl => -1.0 / t,
            ConvexFunction::Js => (2.0 * t / (t + 1.0)).ln(),
            ConvexFunction::Tv { alpha } => {
                if t == 1.0 {
                    return None;
                }
                alpha * (t - 1.0).signum()
            }
            ConvexFunction::Logd => -(1.0 / t).ln_1p() + (t - 1.0) / (t * (t + 1.0)),
            ConvexFunction::Exp => t.exp(),
            ConvexFunction::Square => 2.0 * t,
            ConvexFunction::SoftAbs => t / t.hypot(1.0),
            ConvexFunction::UnitIndicator => 0.0,
            ConvexFunction::Affine { inner, a, b } => a * inner.derivative(a * t - b)?,
        })
    }

    /// Effective domain of the conjugate (where it is finite), as stated in
    /// the catalog. Closed ends are attained values.
    pub fn conjugate_domain(&self) -> Interval {
        match self {
            ConvexFunction::Kl | ConvexFunction::Logd => Interval::open(f64::NEG_INFINITY, 0.0),
            ConvexFunction::Js => Interval::open(f64::NEG_INFINITY, LN_2),
            ConvexFunction::Tv { alpha } => Interval::closed(-alpha, *alpha),
            ConvexFunction::Exp => Interval::closed_open(0.0, f64::INFINITY),
            ConvexFunction::Square | ConvexFunction::UnitIndicator => Interval::REAL,
            ConvexFunction::SoftAbs => Interval::closed(-1.0, 1.0),
            ConvexFunction::Affine { inner, a, .. } => {
                let d = inner.conjugate_domain();
                // y with y / a ∈ d
                if *a > 0.0 {
                    Interval {
                        lo: d.lo * a,
                        hi: d.hi * a,
                        ..d
                    }
                } else {
                    Interval {
                        lo: d.hi * a,
                        hi: d.lo * a,
                        lo_closed: d.hi_closed,
                        hi_closed: d.lo_closed,
                    }
                }
            }
        }
    }

    /// `b* = sup I*` (possibly `+∞`).
    pub fn b_star(&self) -> f64 {
        self.conjugate_domain().hi
    }

    /// `f*(y)`. Closed-form where one exists; for `Logd` it is evaluated as
    /// `y·t − f(t)` at the root `t` of `f′(t) = y`.
    ///
    /// Fails with a domain error when `f*(y) = +∞`.
    pub fn conjugate(&self, y: f64) -> Result<f64> {
        let dom = self.conjugate_domain();
        let outside = || Error::Domain(format!("{} conjugate is +inf at {y}", self.name()));
        if y.is_nan() {
            return Err(outside());
        }
        let v = match self {
            ConvexFunction::Kl => {
                if y >= 0.0 {
                    return Err(outside());
                }
                -1.0 - (-y).ln()
            }
            ConvexFunction::Js => {
                if y >= LN_2 {
                    return Err(outside());
                }
                -(2.0 - y.exp()).ln()
            }
            ConvexFunction::Tv { alpha } => {
                if y.abs() > *alpha {
                    return Err(outside());
                }
                y
            }
            ConvexFunction::Logd => {
                if y > 0.0 {
                    return Err(outside());
                }
                if y == 0.0 {
                    // limit of −f(t) as t → ∞
                    1.0
                } else {
                    let t = logd_derivative_inverse(y);
                    y * t - self.eval(t)
                }
            }
            ConvexFunction::Exp => {
                if y < 0.0 {
                    return Err(outside());
                }
                if y == 0.0 {
                    0.0
                } else {
                    y * y.ln() - y
                }
            }
            ConvexFunction::Square => 0.25 * y * y,
            ConvexFunction::SoftAbs => {
                if !dom.contains(y) {
                    return Err(outside());
                }
                -(1.0 - y * y).sqrt()
            }
            ConvexFunction::UnitIndicator => y.max(0.0),
            ConvexFunction::Affine { inner, a, b } => b / a * y + inner.conjugate(y / a)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(outside())
        }
    }

    /// Derivative of `f*` at `y`, which is the maximizer `t*(y) = (f′)⁻¹(y)`.
    /// For `Tv` this is `1`, the subgradient-consistent choice inside `(−α, α)`.
    pub fn conjugate_derivative(&self, y: f64) -> Option<f64> {
        if !self.conjugate_domain().contains_interior(y) {
            return None;
        }
        Some(match self {
            ConvexFunction::Kl => -1.0 / y,
            ConvexFunction::Js => {
                let e = y.exp();
                e / (2.0 - e)
            }
            ConvexFunction::Tv { .. } => 1.0,
            ConvexFunction::Logd => logd_derivative_inverse(y),
            ConvexFunction::Exp => y.ln(),
            ConvexFunction::Square => 0.5 * y,
            ConvexFunction::SoftAbs => y / (1.0 - y * y).sqrt(),
            ConvexFunction::UnitIndicator => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ConvexFunction::Affine { inner, a, b } => (b + inner.conjugate_derivative(y / a)?) / a,
        })
    }

    /// Whether `f` is strictly convex (everything except `Tv` and the indicator).
    pub fn is_strictly_convex(&self) -> bool {
        match self {
            ConvexFunction::Tv { .. } | ConvexFunction::UnitIndicator => false,
            ConvexFunction::Affine { inner, .. } => inner.is_strictly_convex(),
            _ => true,
        }
    }

    /// The output activation `g_f: ℝ → int(I*)` for catalog entries.
    pub fn activation(&self, v: f64) -> Result<f64> {
        match self {
            ConvexFunction::Kl => Ok(-(-v).exp()),
            ConvexFunction::Js => Ok(LN_2 - softplus(-v)),
            ConvexFunction::Tv { alpha } => Ok(alpha * v.tanh()),
            ConvexFunction::Logd => Ok(-softplus(v)),
            _ => Err(Error::Unsupported(format!(
                "{} has no output activation",
                self.name()
            ))),
        }
    }

    /// Records `T = g_f(v)` on the tape.
    pub fn activation_on_tape(&self, tape: &mut Tape, v: Var) -> Result<Var> {
        match self {
            ConvexFunction::Kl => {
                let nv = tape.neg(v)?;
                let e = tape.exp(nv)?;
                tape.neg(e)
            }
            ConvexFunction::Js => {
                let nv = tape.neg(v)?;
                let sp = tape.softplus(nv)?;
                let neg = tape.neg(sp)?;
                tape.add_scalar(neg, LN_2)
            }
            ConvexFunction::Tv { alpha } => {
                let t = tape.tanh(v)?;
                tape.scale(t, *alpha)
            }
            ConvexFunction::Logd => {
                let sp = tape.softplus(v)?;
                tape.neg(sp)
            }
            _ => Err(Error::Unsupported(format!(
                "{} has no output activation",
                self.name()
            ))),
        }
    }

    /// Records `f*(T)` on the tape for a critic value `T` already inside `I*`.
    pub fn conjugate_on_tape(&self, tape: &mut Tape, t: Var) -> Result<Var> {
        let this = self.clone();
        let deriv = self.clone();
        let map = ScalarMap::new(
            format!("{}_conjugate", self.name()),
            move |y| this.conjugate(y).ok(),
            move |y| {
                deriv
                    .conjugate_derivative(y)
                    .unwrap_or(0.0)
                    .clamp(-1e150, 1e150)
            },
        );
        match self {
            ConvexFunction::Kl => {
                // −1 − ln(−T)
                let n = tape.neg(t)?;
                let l = tape.log(n)?;
                let nl = tape.neg(l)?;
                tape.add_scalar(nl, -1.0)
            }
            ConvexFunction::Js => {
                // −ln(2 − e^T)
                let e = tape.exp(t)?;
                let ne = tape.neg(e)?;
                let inner = tape.add_scalar(ne, 2.0)?;
                let l = tape.log(inner)?;
                tape.neg(l)
            }
            ConvexFunction::Tv { .. } => tape.scale(t, 1.0),
            _ => tape.map(t, map),
        }
    }

    /// Records `f*(g_f(v))` directly from the pre-activation `v`, using the
    /// simplified closed forms where they exist (`kl`: `v − 1`,
    /// `js`: `softplus(v) − ln 2`).
    pub fn conjugate_of_activation_on_tape(&self, tape: &mut Tape, v: Var) -> Result<Var> {
        match self {
            ConvexFunction::Kl => tape.add_scalar(v, -1.0),
            ConvexFunction::Js => {
                let sp = tape.softplus(v)?;
                tape.add_scalar(sp, -LN_2)
            }
            ConvexFunction::Tv { .. } | ConvexFunction::Logd => {
                let t = self.activation_on_tape(tape, v)?;
                self.conjugate_on_tape(tape, t)
            }
            _ => Err(Error::Unsupported(format!(
                "{} has no output activation",
                self.name()
            ))),
        }
    }
}

/// Solves `f′(t) = y` for the log-D trick entry by bisection in `ln t`.
/// `f′` is increasing from `−∞` (t → 0) to `0⁻` (t → ∞).
fn logd_derivative_inverse(y: f64) -> f64 {
    debug_assert!(y < 0.0);
    let fp = |s: f64| {
        let t = s.exp();
        -(1.0 / t).ln_1p() + (t - 1.0) / (t * (t + 1.0))
    };
    let (mut lo, mut hi) = (-700.0f64, 345.0f64);
    if fp(hi) <= y {
        return hi.exp();
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if fp(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_vanishes_at_one() {
        for id in CatalogId::all_default() {
            let f = ConvexFunction::from(id);
            assert!(f.eval(1.0).abs() <= 1e-15, "{}", f.name());
        }
    }

    #[test]
    fn js_limit_at_zero_is_ln2() {
        let f = ConvexFunction::Js;
        assert_eq!(f.eval(0.0), LN_2);
        assert!((f.eval(1e-12) - LN_2).abs() < 1e-10);
        assert_eq!(ConvexFunction::Kl.eval(0.0), f64::INFINITY);
    }

    #[test]
    fn kl_conjugate_at_minus_one() {
        assert_eq!(ConvexFunction::Kl.conjugate(-1.0).unwrap(), -1.0);
        assert!(ConvexFunction::Kl.conjugate(0.0).is_err());
        assert!(ConvexFunction::Js.conjugate(1.0).is_err());
    }

    #[test]
    fn b_star_values() {
        assert_eq!(ConvexFunction::Kl.b_star(), 0.0);
        assert_eq!(ConvexFunction::Js.b_star(), LN_2);
        assert_eq!(ConvexFunction::Tv { alpha: 0.7 }.b_star(), 0.7);
        assert_eq!(ConvexFunction::Logd.b_star(), 0.0);
        assert_eq!(ConvexFunction::Square.b_star(), f64::INFINITY);
    }

    #[test]
    fn logd_conjugate_inverts_the_derivative() {
        let f = ConvexFunction::Logd;
        for &t in &[0.01, 0.3, 1.0, 4.0, 100.0] {
            let y = f.derivative(t).unwrap();
            let back = f.conjugate_derivative(y).unwrap();
            assert!((back - t).abs() / t < 1e-10, "{t} -> {back}");
            let fy = f.conjugate(y).unwrap();
            assert!((fy - (y * t - f.eval(t))).abs() < 1e-12);
        }
        assert_eq!(f.conjugate(0.0).unwrap(), 1.0);
    }

    #[test]
    fn activations_land_in_conjugate_domain() {
        for id in CatalogId::all_default() {
            let f = ConvexFunction::from(id);
            let dom = f.conjugate_domain();
            for &v in &[-30.0, -3.0, -0.5, 0.0, 0.5, 3.0, 30.0] {
                let t = f.activation(v).unwrap();
                assert!(dom.contains(t), "{} g_f({v}) = {t}", f.name());
            }
        }
    }

    #[test]
    fn affine_domain_flips_for_negative_slope() {
        let f = ConvexFunction::Affine {
            inner: Box::new(ConvexFunction::Kl),
            a: -2.0,
            b: 1.0,
        };
        // −2x − 1 > 0 ⇔ x < −1/2
        let d = f.domain();
        assert_eq!((d.lo, d.hi), (f64::NEG_INFINITY, -0.5));
        assert!(f.eval(0.0).is_infinite());
        assert!((f.eval(-1.0) - (-(1.0f64).ln())).abs() < 1e-15);
    }
}
