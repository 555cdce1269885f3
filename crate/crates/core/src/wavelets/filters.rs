//! Minimal-phase Daubechies filters by spectral factorization.
//!
//! With `p` vanishing moments the lowpass transfer function is
//! `H(w) = sqrt(2) ((1 + w)/2)^p R(w)` where `|R|^2 = P(sin^2(theta/2))` and
//! `P(y) = sum_{k<p} C(p-1+k, k) y^k`. Each root `y_i` of `P` contributes the
//! factor `(w - z_i)/(1 - z_i)` with `z_i + 1/z_i = 2 - 4 y_i`, `|z_i| > 1`.

use num_complex::Complex64;

use crate::error::{LabError, Result};

pub const MAX_ORDER: usize = 10;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Horner evaluation of `sum c_k y^k` and its derivative.
fn eval_with_derivative(coeffs: &[f64], y: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * y + p;
        p = p * y + c;
    }
    (p, dp)
}

/// All complex roots of a real polynomial (ascending coefficients) by
/// Aberth iteration followed by Newton polishing.
pub(crate) fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    // Cauchy bound on root moduli
    let radius = 1.0
        + coeffs[..degree]
            .iter()
            .map(|c| (c / lead).abs())
            .fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / degree as f64 + 0.4;
            Complex64::from_polar(0.5 * radius, angle)
        })
        .collect();
    let mut converged = false;
    for _ in 0..500 {
        let mut largest_step: f64 = 0.0;
        for i in 0..degree {
            let (p, dp) = eval_with_derivative(coeffs, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != i)
                .map(|j| 1.0 / (z[i] - z[j]))
                .sum();
            let step = ratio / (1.0 - ratio * repulsion);
            z[i] -= step;
            largest_step = largest_step.max(step.norm() / z[i].norm().max(1.0));
        }
        if largest_step < 1e-15 {
            converged = true;
            break;
        }
    }
    for root in z.iter_mut() {
        for _ in 0..5 {
            let (p, dp) = eval_with_derivative(coeffs, *root);
            if dp.norm() == 0.0 {
                break;
            }
            *root -= p / dp;
        }
    }
    let residual = z
        .iter()
        .map(|r| eval_with_derivative(coeffs, *r).0.norm() / (lead * r.norm().max(1.0).powi(degree as i32)).abs())
        .fold(0.0, f64::max);
    if !converged && residual > 1e-10 {
        return Err(LabError::Convergence(format!(
            "polynomial root finder stalled with residual {residual:e}"
        )));
    }
    Ok(z)
}

fn multiply(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// The `2 * order` lowpass taps, normalized to sum `sqrt(2)`.
pub fn daubechies_filters(order: usize) -> Result<Vec<f64>> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(LabError::InvalidParameter(format!(
            "Daubechies order must lie in 1..={MAX_ORDER}, got {order}"
        )));
    }
    let p = order;
    let poly: Vec<f64> = (0..p).map(|k| binomial(p - 1 + k, k)).collect();
    let mut transfer = vec![Complex64::new(1.0, 0.0)];
    for y in polynomial_roots(&poly)? {
        let c = Complex64::new(1.0, 0.0) - 2.0 * y;
        let disc = (c * c - 1.0).sqrt();
        let (z1, z2) = (c + disc, c - disc);
        let z = if z1.norm() >= z2.norm() { z1 } else { z2 };
        let denom = 1.0 - z;
        transfer = multiply(&transfer, &[-z / denom, 1.0 / denom]);
    }
    let half = Complex64::new(0.5, 0.0);
    for _ in 0..p {
        transfer = multiply(&transfer, &[half, half]);
    }
    let mut taps: Vec<f64> = transfer
        .iter()
        .map(|c| c.re * std::f64::consts::SQRT_2)
        .collect();
    // remove the rounding drift in the DC gain
    let sum: f64 = taps.iter().sum();
    let fix = std::f64::consts::SQRT_2 / sum;
    taps.iter_mut().for_each(|t| *t *= fix);
    Ok(taps)
}

/// Alternating flip `g_t = (-1)^t h_{2p-1-t}`.
pub fn highpass(lowpass: &[f64]) -> Vec<f64> {
    let n = lowpass.len();
    (0..n)
        .map(|t| {
            let v = lowpass[n - 1 - t];
            if t % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_orthogonality_defect(h: &[f64]) -> f64 {
        let n = h.len() as i64;
        let mut worst: f64 = 0.0;
        for m in -(n / 2)..=(n / 2) {
            let s: f64 = (0..n)
                .filter(|t| (0..n).contains(&(t + 2 * m)))
                .map(|t| h[t as usize] * h[(t + 2 * m) as usize])
                .sum();
            let target = if m == 0 { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
        worst
    }

    #[test]
    fn haar() {
        let h = daubechies_filters(1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((h[0] - r).abs() < 1e-15 && (h[1] - r).abs() < 1e-15);
    }

    #[test]
    fn four_tap_closed_form() {
        let h = daubechies_filters(2).unwrap();
        let s3 = 3f64.sqrt();
        let d = 4.0 * 2f64.sqrt();
        let expect = [(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d];
        for (a, b) in h.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{h:?}");
        }
    }

    #[test]
    fn orthogonality_and_moments_all_orders() {
        for order in 1..=MAX_ORDER {
            let h = daubechies_filters(order).unwrap();
            assert_eq!(h.len(), 2 * order);
            assert!((h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs() < 1e-12);
            assert!(max_orthogonality_defect(&h) < 1e-12, "order {order}");
            let g = highpass(&h);
            for alpha in 0..order as i32 {
                let m: f64 = g.iter().enumerate().map(|(t, v)| (t as f64).powi(alpha) * v).sum();
                let scale: f64 = g.iter().enumerate().map(|(t, v)| ((t as f64).powi(alpha) * v).abs()).sum();
                assert!(m.abs() <= 1e-11 * scale.max(1.0), "order {order} alpha {alpha}: {m}");
            }
        }
    }

    #[test]
    fn minimal_phase_front_loads_energy() {
        // partial energies of the minimal-phase filter dominate those of its reversal
        for order in 2..=MAX_ORDER {
            let h = daubechies_filters(order).unwrap();
            let mut fwd = 0.0;
            let mut rev = 0.0;
            for t in 0..h.len() {
                fwd += h[t] * h[t];
                rev += h[h.len() - 1 - t] * h[h.len() - 1 - t];
                assert!(fwd >= rev - 1e-12);
            }
        }
    }

    #[test]
    fn order_range() {
        assert!(matches!(daubechies_filters(0), Err(LabError::InvalidParameter(_))));
        assert!(matches!(daubechies_filters(11), Err(LabError::InvalidParameter(_))));
    }

    #[test]
    fn root_finder_on_known_polynomial() {
        // (y - 1)(y + 2)(y^2 + 1)
        let roots = polynomial_roots(&[-2.0, 1.0, -1.0, 1.0, 1.0]).unwrap();
        let mut re: Vec<f64> = roots.iter().map(|r| r.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((re[0] + 2.0).abs() < 1e-12 && (re[3] - 1.0).abs() < 1e-12);
        assert!(roots.iter().filter(|r| (r.im.abs() - 1.0).abs() < 1e-12).count() == 2);
    }
}
