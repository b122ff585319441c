//! One-dimensional maximisation.

use crate::Result;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// The maximiser sits on (or within tolerance of) an end of the search range.
    pub at_boundary: bool,
    pub evaluations: usize,
}

/// Maximise `f` on `[lo, hi]`: a coarse scan locates the best grid cell, then
/// golden-section search refines it until the bracket is narrower than `x_tol`.
pub fn maximize_scalar<F>(mut f: F, lo: f64, hi: f64, scan_points: usize, x_tol: f64) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let n = scan_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut evaluations = 0;
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut grid = Vec::with_capacity(n);
    for i in 0..n {
        let x = lo + step * i as f64;
        let v = f(x)?;
        evaluations += 1;
        grid.push(v);
        if v > best.1 {
            best = (i, v);
        }
    }
    if !best.1.is_finite() {
        // nothing finite to refine; report the scan maximum as is
        let x = lo + step * best.0 as f64;
        return Ok(Maximum {
            x,
            value: best.1,
            at_boundary: best.0 == 0 || best.0 == n - 1,
            evaluations,
        });
    }
    let (mut a, mut b) = (
        lo + step * best.0.saturating_sub(1) as f64,
        lo + step * (best.0 + 1).min(n - 1) as f64,
    );
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    evaluations += 2;
    while (b - a).abs() > x_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        evaluations += 1;
    }
    let (mut x, mut value) = if fc >= fd { (c, fc) } else { (d, fd) };
    // golden section never visits the bracket ends; the scan endpoints may still win
    for (i, &v) in [(0usize, &grid[0]), (n - 1, &grid[n - 1])] {
        if v > value {
            x = lo + step * i as f64;
            value = v;
        }
    }
    let at_boundary = (x - lo).abs() <= x_tol.max(step * 1e-9)
        || (hi - x).abs() <= x_tol.max(step * 1e-9)
        || best.0 == 0
        || best.0 == n - 1;
    Ok(Maximum {
        x,
        value,
        at_boundary,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_parabola_peak() {
        let m = maximize_scalar(|x| Ok(-(x - 1.234).powi(2)), -5.0, 5.0, 21, 1e-9).unwrap();
        assert!((m.x - 1.234).abs() < 1e-8);
        assert!(!m.at_boundary);
    }

    #[test]
    fn monotone_function_flags_boundary() {
        let m = maximize_scalar(|x| Ok(-x), 0.0, 1.0, 11, 1e-9).unwrap();
        assert!(m.at_boundary);
        assert!(m.x < 1e-8);
    }
}
