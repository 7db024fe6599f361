//! The formal series `B(alpha; x) ~ (alpha/x) sum_n a_n x^{-3n}` that governs
//! Ablowitz-Segur solutions as `x -> +inf`, its coefficient recurrence, and
//! truncated evaluation with an error estimate.
//!
//! The coefficients satisfy
//!
//! ```text
//! a_0 = 1,
//! a_{n+1} = (3n+1)(3n+2) a_n - 2 alpha^2 sum_{k+l+m=n} a_k a_l a_m,
//! ```
//!
//! the triple sum running over nonnegative indices with `k+l+m = n` (the
//! convolution form is what coefficient matching in the PII equation forces).
//! Each `a_n` is a polynomial in `alpha^2`, so the coefficients are real for
//! real or purely imaginary `alpha`. The series is divergent: `a_n` grows
//! like `(3n)! / (27^n n!^2)`-ish, and evaluation uses optimal truncation
//! (stop at the smallest term) by default.

use crate::error::{PiiError, Result};
use crate::Complex;

/// Smallest `x` for which truncated evaluation is allowed.
pub const SERIES_X_MIN: f64 = 8.0;

/// Magnitude at which coefficient growth is flagged as saturated.
const SATURATION: f64 = 1e300;

/// Coefficients `a_0 ... a_N` of the series for a fixed `alpha`.
#[derive(Debug, Clone)]
pub struct SeriesCoeffs {
    pub alpha: Complex,
    pub coeffs: Vec<Complex>,
    /// Set when some |a_n| exceeded 1e300; higher coefficients are unreliable.
    pub saturated: bool,
}

/// Truncation mode for series evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Fixed truncation index `N` (partial sum through `a_N`).
    Fixed(usize),
    /// Truncate at the smallest-magnitude term.
    Optimal,
}

/// Generate `a_0 ... a_{n_max}` by the recurrence.
///
/// Uses running pair convolutions `p_j = sum_{k+l=j} a_k a_l`, so the total
/// cost is O(n_max^2).
pub fn series_coeffs(alpha: Complex, n_max: usize) -> SeriesCoeffs {
    let alpha2 = alpha * alpha;
    let mut a: Vec<Complex> = Vec::with_capacity(n_max + 1);
    let mut pair: Vec<Complex> = Vec::with_capacity(n_max + 1);
    a.push(Complex::new(1.0, 0.0));
    let mut saturated = false;
    for n in 0..n_max {
        // p_n = sum_{k=0}^{n} a_k a_{n-k}  (all a_0..a_n known)
        let p_n: Complex = (0..=n).map(|k| a[k] * a[n - k]).sum();
        pair.push(p_n);
        // c_n = sum_{m=0}^{n} a_m p_{n-m}
        let c_n: Complex = (0..=n).map(|m| a[m] * pair[n - m]).sum();
        let nf = n as f64;
        let next = a[n] * ((3.0 * nf + 1.0) * (3.0 * nf + 2.0)) - alpha2 * 2.0 * c_n;
        if next.norm() > SATURATION {
            saturated = true;
        }
        a.push(next);
    }
    SeriesCoeffs {
        alpha,
        coeffs: a,
        saturated,
    }
}

fn check_domain(x: f64, what: &'static str) -> Result<()> {
    if !(x >= SERIES_X_MIN) {
        return Err(PiiError::Domain {
            what,
            detail: format!("x = {x} < {SERIES_X_MIN}"),
        });
    }
    Ok(())
}

/// Terms generated through the requested truncation; `n_used` is the last
/// included index and `err_est` the magnitude of the first omitted term
/// (including the `alpha/x` prefactor).
struct Plan {
    n_used: usize,
    err_est: f64,
}

fn plan(coeffs: &SeriesCoeffs, x: f64, mode: Truncation) -> Plan {
    let x3 = x * x * x;
    let pref = (coeffs.alpha / x).norm();
    match mode {
        Truncation::Fixed(n) => {
            let n_used = n.min(coeffs.coeffs.len() - 1);
            let err_est = if n_used + 1 < coeffs.coeffs.len() {
                pref * coeffs.coeffs[n_used + 1].norm() / x3.powi(n_used as i32 + 1)
            } else {
                f64::NAN
            };
            Plan { n_used, err_est }
        }
        Truncation::Optimal => {
            let mut best = 0usize;
            let mut best_mag = f64::INFINITY;
            let mut scale = 1.0;
            for (n, c) in coeffs.coeffs.iter().enumerate() {
                let mag = c.norm() * scale;
                if mag < best_mag && mag > 0.0 {
                    best_mag = mag;
                    best = n;
                }
                // terms grow monotonically past the minimum
                if mag > 4.0 * best_mag || mag == 0.0 {
                    break;
                }
                scale /= x3;
            }
            let err_est = if best + 1 < coeffs.coeffs.len() {
                pref * coeffs.coeffs[best + 1].norm() / x3.powi(best as i32 + 1)
            } else {
                f64::NAN
            };
            Plan {
                n_used: best,
                err_est,
            }
        }
    }
}

/// How many coefficients suffice for optimal truncation at `x >= 8`.
/// The smallest term sits near `n = x^{3/2}/3`; beyond ~`2 x^{3/2}/3` the
/// terms exceed it again by far.
pub fn n_max_for(x: f64) -> usize {
    (x.powf(1.5) * 2.0 / 3.0).ceil() as usize + 8
}

/// Evaluate the truncated series `B(alpha; x)`. Returns the partial sum and
/// the magnitude of the first omitted term.
pub fn eval_b(alpha: Complex, x: f64, mode: Truncation) -> Result<(Complex, f64)> {
    let (b, _, _, e) = eval_b_derivs(alpha, x, mode)?;
    Ok((b, e))
}

/// Evaluate `B`, `B'`, `B''` by termwise differentiation, all with the same
/// truncation index as [`eval_b`].
pub fn eval_b_derivs(alpha: Complex, x: f64, mode: Truncation) -> Result<(Complex, Complex, Complex, f64)> {
    check_domain(x, "eval_b")?;
    let n_alloc = match mode {
        Truncation::Fixed(n) => n + 1,
        Truncation::Optimal => n_max_for(x),
    };
    let coeffs = series_coeffs(alpha, n_alloc);
    eval_with_coeffs(&coeffs, x, mode)
}

/// Evaluation from precomputed coefficients (the cacheable path).
pub fn eval_with_coeffs(
    coeffs: &SeriesCoeffs,
    x: f64,
    mode: Truncation,
) -> Result<(Complex, Complex, Complex, f64)> {
    check_domain(x, "eval_b")?;
    let p = plan(coeffs, x, mode);
    let mut b = Complex::new(0.0, 0.0);
    let mut bp = Complex::new(0.0, 0.0);
    let mut bpp = Complex::new(0.0, 0.0);
    // B   = alpha sum a_n x^{-3n-1}
    // B'  = alpha sum -(3n+1)   a_n x^{-3n-2}
    // B'' = alpha sum (3n+1)(3n+2) a_n x^{-3n-3}
    let mut xp = 1.0 / x; // x^{-3n-1}
    for n in 0..=p.n_used {
        let a_n = coeffs.coeffs[n];
        let t = a_n * xp;
        let nf = n as f64;
        b += t;
        bp -= t * ((3.0 * nf + 1.0) / x);
        bpp += t * ((3.0 * nf + 1.0) * (3.0 * nf + 2.0) / (x * x));
        xp /= x * x * x;
    }
    let alpha = coeffs.alpha;
    Ok((alpha * b, alpha * bp, alpha * bpp, p.err_est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn re(z: Complex) -> f64 {
        assert!(z.im.abs() <= 1e-14 * (1.0 + z.re.abs()), "not real: {z}");
        z.re
    }

    #[test]
    fn first_coefficients_match_recurrence_solution() {
        // a_0 = 1; a_1 = 2 - 2 alpha^2; a_2 = (2 - 2 alpha^2)(20 - 6 alpha^2)
        for &al in &[0.0, 0.1, 0.25, 0.45] {
            let c = series_coeffs(Complex::new(al, 0.0), 4);
            let a2 = al * al;
            assert_relative_eq!(re(c.coeffs[0]), 1.0);
            assert_relative_eq!(re(c.coeffs[1]), 2.0 - 2.0 * a2, max_relative = 1e-15);
            assert_relative_eq!(
                re(c.coeffs[2]),
                (2.0 - 2.0 * a2) * (20.0 - 6.0 * a2),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn coefficients_even_in_alpha() {
        for &al in &[0.1, 0.3, 0.45] {
            let p = series_coeffs(Complex::new(al, 0.0), 20);
            let m = series_coeffs(Complex::new(-al, 0.0), 20);
            for n in 0..=20 {
                assert_eq!(p.coeffs[n], m.coeffs[n], "a_{n} even in alpha");
            }
        }
        // purely imaginary alpha: alpha^2 real negative, coefficients real
        let c = series_coeffs(Complex::new(0.0, 0.3), 20);
        for n in 0..=20 {
            assert_eq!(c.coeffs[n].im, 0.0);
        }
    }

    #[test]
    fn alpha_zero_matches_homogeneous_recurrence_but_b_vanishes() {
        let c = series_coeffs(Complex::new(0.0, 0.0), 6);
        // homogeneous recurrence value: a_{n+1} = (3n+1)(3n+2) a_n
        let mut expect = 1.0;
        for n in 0..6 {
            let nf = n as f64;
            assert_relative_eq!(re(c.coeffs[n]), expect);
            expect *= (3.0 * nf + 1.0) * (3.0 * nf + 2.0);
        }
        let (b, e) = eval_b(Complex::new(0.0, 0.0), 12.0, Truncation::Optimal).unwrap();
        assert_eq!(b, Complex::new(0.0, 0.0));
        assert_eq!(e, 0.0);
        let (b, bp, bpp, _) =
            eval_b_derivs(Complex::new(0.0, 0.0), 12.0, Truncation::Optimal).unwrap();
        assert_eq!((b, bp, bpp), (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)));
    }

    #[test]
    fn optimal_truncation_err_small_at_15() {
        for &al in &[0.05, 0.25, 0.45] {
            let (_, e) = eval_b(Complex::new(al, 0.0), 15.0, Truncation::Optimal).unwrap();
            assert!(e <= 1e-12, "err_est {e} at alpha={al}");
        }
        let (_, e) = eval_b(Complex::new(0.0, 0.45), 15.0, Truncation::Optimal).unwrap();
        assert!(e <= 1e-12);
    }

    #[test]
    fn leading_derivative_term() {
        // B' leading term is -alpha/x^2
        let al = Complex::new(0.3, 0.0);
        let x = 40.0;
        let (_, bp, _, _) = eval_b_derivs(al, x, Truncation::Fixed(0)).unwrap();
        assert_relative_eq!(bp.re, -0.3 / (x * x), max_relative = 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let al = Complex::new(0.3, 0.0);
        let h = 1e-4;
        let x = 15.0;
        let (_, bp, _, _) = eval_b_derivs(al, x, Truncation::Optimal).unwrap();
        // same fixed N on both sides of the fence for a clean comparison
        let n = {
            let coeffs = series_coeffs(al, n_max_for(x));
            let (bm, _) = (
                eval_with_coeffs(&coeffs, x, Truncation::Optimal).unwrap(),
                0,
            );
            let _ = bm;
            Truncation::Optimal
        };
        let (bph, _) = eval_b(al, x + h, n).unwrap();
        let (bmh, _) = eval_b(al, x - h, n).unwrap();
        let fd = (bph - bmh) / (2.0 * h);
        assert!((fd - bp).norm() <= 1e-6, "fd {} vs {}", fd, bp);
    }

    #[test]
    fn pii_residual_of_series_within_budget() {
        // |B'' - 2B^3 - xB + alpha| <= 10 * err_est at x=15, alpha=0.25
        let al = Complex::new(0.25, 0.0);
        let x = 15.0;
        let (b, _, bpp, e) = eval_b_derivs(al, x, Truncation::Optimal).unwrap();
        let resid = bpp - b * b * b * 2.0 - b * x + al;
        assert!(resid.norm() <= 10.0 * e, "residual {} vs budget {}", resid.norm(), 10.0 * e);
    }

    #[test]
    fn domain_error_below_eight() {
        assert!(matches!(
            eval_b(Complex::new(0.25, 0.0), 7.5, Truncation::Optimal),
            Err(PiiError::Domain { .. })
        ));
    }

    #[test]
    fn saturation_flag() {
        let c = series_coeffs(Complex::new(0.25, 0.0), 130);
        assert!(c.saturated);
        let c = series_coeffs(Complex::new(0.25, 0.0), 30);
        assert!(!c.saturated);
    }
}
