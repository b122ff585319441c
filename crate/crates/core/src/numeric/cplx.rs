//! Accurate complex `ln(1 + z)` and `exp(z) - 1` for small arguments.

use num_complex::Complex64;

const SMALL: f64 = 0.5;

/// `ln(1 + z)`, accurate when `|z|` is small.
pub fn ln_1p(z: Complex64) -> Complex64 {
    if z.norm() >= SMALL {
        return (Complex64::new(1.0, 0.0) + z).ln();
    }
    // ln(1+z) = 2 atanh(u), u = z / (2 + z), |u| <= 1/3
    let u = z / (Complex64::new(2.0, 0.0) + z);
    let u2 = u * u;
    let mut term = u;
    let mut sum = u;
    for k in 1..60 {
        term *= u2;
        let add = term / (2 * k + 1) as f64;
        sum += add;
        if add.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum * 2.0
}

/// `exp(z) - 1`, accurate when `|z|` is small.
pub fn exp_m1(z: Complex64) -> Complex64 {
    if z.norm() >= SMALL {
        return z.exp() - 1.0;
    }
    let mut term = z;
    let mut sum = z;
    for k in 2..40 {
        term = term * z / k as f64;
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_arguments_match_real_library() {
        for &x in &[1e-12, -3e-7, 0.2, -0.45] {
            let z = Complex64::new(x, 0.0);
            assert!((ln_1p(z).re - f64::ln_1p(x)).abs() <= 1e-16 * x.abs().max(1e-300) * 4.0);
            assert!((exp_m1(z).re - f64::exp_m1(x)).abs() <= 1e-16 * x.abs() * 4.0);
        }
    }

    #[test]
    fn inverse_pair_on_complex_plane() {
        let z = Complex64::new(1e-3, -2e-3);
        let back = exp_m1(ln_1p(z));
        assert!((back - z).norm() < 1e-18);
    }
}
