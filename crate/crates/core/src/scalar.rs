//! One-dimensional maximization helpers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`. Returns `(x, f(x))` for
/// the best point evaluated.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        // ties move the bracket left so flat tops resolve to the smallest maximizer
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `true` when `values` rise (weakly) and then fall (weakly), allowing
/// `slack` of noise in either direction.
pub fn is_unimodal(values: &[f64], slack: f64) -> bool {
    let mut falling = false;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if falling {
            if d > slack {
                return false;
            }
        } else if d < -slack {
            falling = true;
        }
    }
    true
}

/// Evaluates `f` on `points + 1` equally spaced abscissae of `[lo, hi]`.
pub fn uniform_grid<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
    (0..=points)
        .map(|i| {
            let x = if i == points {
                hi
            } else {
                lo + (hi - lo) * i as f64 / points as f64
            };
            (x, f(x))
        })
        .collect()
}

/// Index of the first maximum.
pub fn argmax_first(values: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.1 > values[best].1 {
            best = i;
        }
    }
    best
}
