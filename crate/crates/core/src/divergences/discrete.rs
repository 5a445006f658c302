use serde::{Deserialize, Serialize};

use super::conjugate::pointwise_dual_sup;
use super::convex::ConvexFunction;
use crate::error::{Error, Result};

/// Below this a mass is treated as exactly zero when dividing.
pub const ZERO_MASS: f64 = 1e-300;

/// A probability vector on `{0, …, K−1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDist {
    probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidConfig(
                "discrete distribution needs at least one point".into(),
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidConfig(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(DiscreteDist { probs })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidConfig(
                "weights must have a positive finite sum".into(),
            ));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // push the rounding residue onto the largest entry
        let resid = 1.0 - probs.iter().sum::<f64>();
        let imax = (0..probs.len())
            .max_by(|&a, &b| probs[a].total_cmp(&probs[b]))
            .unwrap_or(0);
        probs[imax] = (probs[imax] + resid).max(0.0);
        DiscreteDist::new(probs)
    }

    pub fn uniform(k: usize) -> Self {
        DiscreteDist {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn same_support(p: &DiscreteDist, q: &DiscreteDist) -> Result<()> {
    if p.len() == q.len() {
        Ok(())
    } else {
        Err(Error::Shape(crate::error::ShapeError::new(format!(
            "support sizes differ: {} vs {}",
            p.len(),
            q.len()
        ))))
    }
}

/// `D_f(p‖q) = Σ_{q_i > 0} q_i f(p_i / q_i)`. Points with `q_i = 0` contribute
/// nothing. A ratio of `0` uses the entry's limit `f(0⁺)`: `+∞` for `kl` and
/// `logd` (so the result is `+∞`), `ln 2` for `js`, `α` for `tv`.
pub fn f_div_discrete(cf: &ConvexFunction, p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    same_support(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if qi < ZERO_MASS {
            continue;
        }
        total += qi * cf.eval(pi / qi);
    }
    Ok(total)
}

/// `D_i = p_i / (p_i + q_i)`; `None` where both masses vanish.
pub fn optimal_discriminator(p: &DiscreteDist, q: &DiscreteDist) -> Result<Vec<Option<f64>>> {
    same_support(p, q)?;
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(&pi, &qi)| (pi + qi > 0.0).then(|| pi / (pi + qi)))
        .collect())
}

/// The two-point (or K-point) vanilla objective `Σ p_i ln D_i + q_i ln(1 − D_i)`.
pub fn vanilla_value_discrete(d: &[f64], p: &DiscreteDist, q: &DiscreteDist) -> f64 {
    let term = |m: f64, v: f64| if m == 0.0 { 0.0 } else { m * v.ln() };
    d.iter()
        .zip(p.probs.iter().zip(&q.probs))
        .map(|(&di, (&pi, &qi))| term(pi, di) + term(qi, 1.0 - di))
        .sum()
}

pub(crate) fn refuse_non_smooth(cf: &ConvexFunction) -> Result<()> {
    if matches!(cf, ConvexFunction::Tv { .. }) {
        return Err(Error::Unsupported(
            "tv is not differentiable at 1, so it has no unique optimal critic".into(),
        ));
    }
    Ok(())
}

/// `T*_i = f′(p_i / q_i)`. Requires `q_i > 0` and the ratio interior to `I`.
pub fn optimal_critic_discrete(
    cf: &ConvexFunction,
    p: &DiscreteDist,
    q: &DiscreteDist,
) -> Result<Vec<f64>> {
    same_support(p, q)?;
    refuse_non_smooth(cf)?;
    p.probs
        .iter()
        .zip(&q.probs)
        .enumerate()
        .map(|(i, (&pi, &qi))| {
            if qi < ZERO_MASS {
                return Err(Error::Domain(format!("q vanishes at support point {i}")));
            }
            cf.derivative(pi / qi).ok_or_else(|| {
                Error::Domain(format!(
                    "ratio {} at point {i} is outside the domain of f'",
                    pi / qi
                ))
            })
        })
        .collect()
}

/// `mean(T on μ-samples) − mean(f*(T) on ν-samples)`.
pub fn variational_objective(cf: &ConvexFunction, t_mu: &[f64], t_nu: &[f64]) -> Result<f64> {
    if t_mu.is_empty() || t_nu.is_empty() {
        return Err(Error::InvalidConfig(
            "variational objective needs samples on both sides".into(),
        ));
    }
    let a = t_mu.iter().sum::<f64>() / t_mu.len() as f64;
    if let Some(bad) = t_mu.iter().find(|&&t| !cf.conjugate_domain().contains(t)) {
        return Err(Error::Domain(format!(
            "critic value {bad} lies outside the conjugate domain"
        )));
    }
    let mut b = 0.0;
    for &t in t_nu {
        b += cf.conjugate(t)?;
    }
    Ok(a - b / t_nu.len() as f64)
}

/// `Σ_i T_i p_i − f*(T_i) q_i`, the exact variational objective on a finite support.
pub fn variational_objective_discrete(
    cf: &ConvexFunction,
    t: &[f64],
    p: &DiscreteDist,
    q: &DiscreteDist,
) -> Result<f64> {
    same_support(p, q)?;
    if t.len() != p.len() {
        return Err(Error::Shape(crate::error::ShapeError::new(
            "critic length differs from support size",
        )));
    }
    let mut total = 0.0;
    for (&ti, (&pi, &qi)) in t.iter().zip(p.probs.iter().zip(&q.probs)) {
        let fs = cf.conjugate(ti)?;
        total += ti * pi - if qi == 0.0 { 0.0 } else { fs * qi };
    }
    Ok(total)
}

/// The exact supremum of the discrete variational objective over all critics,
/// `D_f(p‖q) + b*·Σ_{q_i = 0} p_i`.
///
/// Computed twice: in closed form, and by maximizing each support point's
/// concave term numerically. Fails with [`Error::Inconsistent`] if the two
/// disagree by more than `1e-9`. Returns `+∞` when `b* = +∞` and `p` puts mass
/// where `q` has none.
pub fn discrete_dual_sup(cf: &ConvexFunction, p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    same_support(p, q)?;
    let b_star = cf.b_star();
    let mut closed = f_div_discrete(cf, p, q)?;
    let singular: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .filter(|(_, &qi)| qi < ZERO_MASS)
        .map(|(&pi, _)| pi)
        .sum();
    if singular > 0.0 {
        closed += b_star * singular;
    }
    let mut numeric = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        let qi = if qi < ZERO_MASS { 0.0 } else { qi };
        if pi == 0.0 && qi == 0.0 {
            continue;
        }
        numeric += pointwise_dual_sup(cf, pi, qi).unwrap_or(f64::INFINITY);
    }
    if closed.is_infinite() || numeric.is_infinite() {
        if closed == numeric {
            return Ok(closed);
        }
        return Err(Error::Inconsistent(format!(
            "dual supremum: closed form {closed}, pointwise {numeric}"
        )));
    }
    if (closed - numeric).abs() > 1e-9 {
        return Err(Error::Inconsistent(format!(
            "dual supremum: closed form {closed}, pointwise {numeric}"
        )));
    }
    Ok(closed)
}
