//! One-dimensional maximization used to tune the boundary coupling.

/// Location and value of a maximum found by a scalar search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMaximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol`. Errors from `f` abort the
/// search.
pub fn golden_section_maximize<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<ScalarMaximum, E> {
    debug_assert!(lo < hi && tol > 0.0);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut evaluations = 2;

    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
        evaluations += 1;
    }

    let (x, value) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok(ScalarMaximum {
        x,
        value,
        evaluations,
    })
}

/// Exhaustive scan of `lo, lo + step, ...` up to and including `hi`.
pub fn grid_maximize<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<ScalarMaximum, E> {
    debug_assert!(lo <= hi && step > 0.0);
    let count = ((hi - lo) / step + 1e-9) as usize;
    let mut best = ScalarMaximum {
        x: lo,
        value: f(lo)?,
        evaluations: 1,
    };
    for k in 1..=count {
        let x = if k == count { hi } else { lo + step * k as f64 };
        let value = f(x)?;
        best.evaluations += 1;
        if value > best.value {
            best.x = x;
            best.value = value;
        }
    }
    Ok(best)
}
