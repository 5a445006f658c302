//! Slow, obviously-correct reference computations used to cross-check the
//! fast paths.

/// Optimal transport cost between two uniform empirical measures of equal
/// size under `|x − y|`, by exhaustive search over all `n!` couplings
/// (permutation matrices are the extreme points of the coupling polytope).
///
/// Panics for `n > 10`.
pub fn assignment_w1(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "equal sample sizes required");
    let n = a.len();
    assert!(n <= 10, "exhaustive assignment is limited to n <= 10");
    if n == 0 {
        return 0.0;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| -> f64 { (0..n).map(|i| (a[i] - b[p[i]]).abs()).sum() };
    let mut best = cost(&perm);
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

/// Central difference `(g(x + h) − g(x − h)) / 2h`.
pub fn central_difference(g: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (g(x + h) - g(x - h)) / (2.0 * h)
}

/// Maximum of a function of one variable on `[lo, hi]` by brute grid search
/// with `n + 1` points.
pub fn grid_max(g: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    (0..=n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            (x, g(x))
        })
        .fold((lo, f64::NEG_INFINITY), |acc, (x, v)| {
            if v > acc.1 {
                (x, v)
            } else {
                acc
            }
        })
}
