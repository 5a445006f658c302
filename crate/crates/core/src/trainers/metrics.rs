//! Sample-based quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const HIST_BINS: usize = 64;
pub const HIST_SMOOTHING: f64 = 1e-12;
pub const MIN_EVAL_SAMPLES: usize = 100;

/// `JS(p, q) = ½KL(p‖m) + ½KL(q‖m)` with `m = (p + q)/2` and `0·ln 0 = 0`.
pub fn js_discrete(p: &[f64], q: &[f64]) -> f64 {
    let term = |a: f64, m: f64| if a > 0.0 { a * (a / m).ln() } else { 0.0 };
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * term(a, m) + 0.5 * term(b, m)
        })
        .sum()
}

/// 1-D Wasserstein distance between equal-size samples: the mean gap
/// between order statistics.
pub fn w1_sorted(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "sorted W1 needs equal nonempty sample sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Sorted W1 between two `[n, 1]` sample matrices.
pub fn w1_1d(generated: &Tensor, target: &Tensor) -> Result<f64> {
    if generated.cols() != 1 || target.cols() != 1 {
        return Err(Error::Unsupported(format!(
            "w1_1d is defined for one-dimensional samples, got dimension {}",
            generated.cols().max(target.cols())
        )));
    }
    w1_sorted(generated.data(), target.data())
}

/// Jensen-Shannon divergence between histograms on a shared grid of
/// `HIST_BINS` bins per axis spanning the pooled range, with every bin
/// probability smoothed by `HIST_SMOOTHING` and renormalized.
pub fn hist_js(a: &Tensor, b: &Tensor) -> Result<f64> {
    let d = a.cols();
    if b.cols() != d {
        return Err(Error::Shape(crate::error::ShapeError::new(format!(
            "sample dimensions differ: {d} vs {}",
            b.cols()
        ))));
    }
    if d > 2 {
        return Err(Error::Unsupported(
            "histogram metrics support one or two dimensions".into(),
        ));
    }
    let bounds: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            let col = a.column(j).into_iter().chain(b.column(j));
            col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            })
        })
        .collect();
    let cells = HIST_BINS.pow(d as u32);
    let bin = |x: f64, (lo, hi): (f64, f64)| -> usize {
        if hi <= lo {
            return 0;
        }
        (((x - lo) / (hi - lo) * HIST_BINS as f64) as usize).min(HIST_BINS - 1)
    };
    let histogram = |t: &Tensor| -> Vec<f64> {
        let mut h = vec![0.0; cells];
        for i in 0..t.rows() {
            let mut idx = 0;
            for (j, &bd) in bounds.iter().enumerate() {
                idx = idx * HIST_BINS + bin(t.get(i, j), bd);
            }
            h[idx] += 1.0;
        }
        let n = t.rows() as f64;
        let total = 1.0 + HIST_SMOOTHING * cells as f64;
        h.iter().map(|c| (c / n + HIST_SMOOTHING) / total).collect()
    };
    Ok(js_discrete(&histogram(a), &histogram(b)))
}

/// Exact JS between the two-bin histograms `{x_axis ≤ t}`, `{x_axis > t}`,
/// without smoothing. For samples on either side of `t` this is `ln 2`.
pub fn separating_js(a: &Tensor, b: &Tensor, axis: usize, threshold: f64) -> f64 {
    let split = |t: &Tensor| {
        let left = (0..t.rows())
            .filter(|&i| t.get(i, axis) <= threshold)
            .count() as f64
            / t.rows() as f64;
        [left, 1.0 - left]
    };
    js_discrete(&split(a), &split(b))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub hist_js: f64,
    pub w1_1d: Option<f64>,
}

/// Histogram JS, plus sorted W1 for one-dimensional samples.
pub fn eval_metrics(generated: &Tensor, target: &Tensor) -> Result<EvalMetrics> {
    if generated.rows() < MIN_EVAL_SAMPLES || target.rows() < MIN_EVAL_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "metrics need at least {MIN_EVAL_SAMPLES} samples per side, got {} and {}",
            generated.rows(),
            target.rows()
        )));
    }
    let hist_js = hist_js(generated, target)?;
    let w1 = if generated.cols() == 1 && generated.rows() == target.rows() {
        Some(w1_1d(generated, target)?)
    } else {
        None
    };
    Ok(EvalMetrics { hist_js, w1_1d: w1 })
}
