//! f-divergences and their variational (dual) estimators.
//!
//! Convention: `D_f(p‖q) = Σ q·f(p/q)`, so with `f(t) = −ln t` the `kl` entry
//! computes `KL(q‖p)`, not `KL(p‖q)`.

mod conjugate;
mod convex;
mod density;
mod discrete;

use std::fmt::Write as _;

pub use conjugate::{biconjugate, conjugate_numeric, fenchel_check, maximize_concave, Maximum};
pub use convex::{CatalogId, ConvexFunction, Interval};
pub use density::{adaptive_simpson, f_div_quadrature, optimal_critic_density, DensityFn};
pub use discrete::{
    discrete_dual_sup, f_div_discrete, optimal_critic_discrete, optimal_discriminator,
    vanilla_value_discrete, variational_objective, variational_objective_discrete, DiscreteDist,
    ZERO_MASS,
};

/// `n` interior points of `iv`, evenly spaced on bounded intervals and
/// covering `[−10, 10]` (clipped to the interval) otherwise.
pub fn interior_grid(iv: Interval, n: usize) -> Vec<f64> {
    let lo = if iv.lo.is_finite() {
        iv.lo
    } else {
        let hi = if iv.hi.is_finite() { iv.hi } else { 10.0 };
        (-10.0f64).min(hi - 20.0)
    };
    let hi = if iv.hi.is_finite() {
        iv.hi
    } else {
        10.0f64.max(lo + 20.0)
    };
    (1..=n)
        .map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64)
        .collect()
}

/// CSV rows `id,t,f(t),u,f_star(u)` on interior grids of `I` and `I*`.
pub fn catalog_dump(entries: &[ConvexFunction], n: usize) -> String {
    let mut out = String::from("id,t,f(t),u,f_star(u)\n");
    for cf in entries {
        let ts = interior_grid(cf.domain(), n);
        let us = interior_grid(cf.conjugate_domain(), n);
        for (t, u) in ts.into_iter().zip(us) {
            let fs = cf.conjugate(u).unwrap_or(f64::NAN);
            let _ = writeln!(out, "{},{t},{},{u},{fs}", cf.name(), cf.eval(t));
        }
    }
    out
}
