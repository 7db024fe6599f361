//! Special-function kernels: Airy `Ai` on the right half-line and the
//! complex logarithm of the Gamma function.
//!
//! `Ai` is only needed where the large-`x` initialization and decay checks
//! live (`x >= 8`), so it is computed from the Poincaré expansion
//!
//! ```text
//! Ai(x)  =  exp(-zeta) / (2 sqrt(pi) x^{1/4}) * sum (-1)^n u_n zeta^{-n},
//! zeta   =  (2/3) x^{3/2},
//! ```
//!
//! truncated at its smallest term. At `x = 8` the smallest term is already
//! ~1e-13 relative and it falls below f64 resolution for `x >~ 9`, so no
//! other evaluation regime is required.

use crate::error::{PiiError, Result};
use crate::Complex;
use std::f64::consts::PI;

/// Smallest supported Airy argument.
pub const AIRY_X_MIN: f64 = 8.0;

/// `Ai(x)` and `Ai'(x)` with an error estimate, on `x >= 8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryValue {
    pub x: f64,
    pub ai: f64,
    pub ai_prime: f64,
    /// Magnitude of the first omitted term of the asymptotic series,
    /// relative to the leading factor.
    pub rel_err_est: f64,
}

/// Airy function `Ai` and derivative via the optimally truncated asymptotic
/// expansion. Domain error for `x < 8`.
pub fn airy_ai(x: f64) -> Result<AiryValue> {
    if !(x >= AIRY_X_MIN) {
        return Err(PiiError::Domain {
            what: "airy_ai",
            detail: format!("x = {x} < {AIRY_X_MIN}"),
        });
    }
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let prefac = (-zeta).exp() / (2.0 * PI.sqrt() * x.powf(0.25));

    // u_0 = 1, u_n = u_{n-1} (6n-5)(6n-3)(6n-1) / (216 n (2n-1));
    // v_n = (6n+1)/(1-6n) u_n.  Terms alternate in sign.
    let mut u = 1.0_f64;
    let mut term_u = 1.0_f64;
    let mut sum_u = 1.0_f64;
    let mut sum_v = 1.0_f64;
    let mut sign = 1.0_f64;
    let mut prev_mag = 1.0_f64;
    let mut omitted = 0.0_f64;
    for n in 1..=200 {
        let nf = n as f64;
        u *= (6.0 * nf - 5.0) * (6.0 * nf - 3.0) * (6.0 * nf - 1.0)
            / (216.0 * nf * (2.0 * nf - 1.0));
        term_u = u / zeta.powi(n);
        sign = -sign;
        let mag = term_u.abs();
        if mag >= prev_mag || mag < 1e-22 {
            // smallest term reached (or underflow floor): stop, estimate
            omitted = mag;
            break;
        }
        sum_u += sign * term_u;
        let v = (6.0 * nf + 1.0) / (1.0 - 6.0 * nf) * u;
        sum_v += sign * v / zeta.powi(n);
        prev_mag = mag;
    }
    let _ = term_u;
    let ai = prefac * sum_u;
    let ai_prime = -x.powf(0.25) * (-zeta).exp() / (2.0 * PI.sqrt()) * sum_v;
    Ok(AiryValue {
        x,
        ai,
        ai_prime,
        rel_err_est: omitted + 4.0 * f64::EPSILON,
    })
}

// Stirling series coefficients B_{2j} / (2j (2j-1)).
const STIRLING: [f64; 12] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
    854513.0 / 63756.0,
    -236364091.0 / 1506960.0,
];

/// Radius beyond which the Stirling series with 12 terms reaches ~1e-20.
const STIRLING_RADIUS: f64 = 9.0;

fn is_nonpositive_integer(z: Complex) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

/// Stirling asymptotic for `log Gamma(w)`, valid for `|w| >= 9`, `Re w > 0`.
fn log_gamma_stirling(w: Complex) -> Complex {
    let lw = w.ln();
    let mut s = (w - 0.5) * lw - w + 0.5 * (2.0 * PI).ln();
    let w2 = w * w;
    let mut p = w.inv();
    for c in STIRLING {
        s += p * c;
        p /= w2;
    }
    s
}

/// `log(sin(pi z))`, unwound so that the resulting `log Gamma` is continuous
/// off the real axis (differs from the principal log by a multiple of 2 pi i).
fn log_sin_pi(z: Complex) -> Complex {
    if z.im > 0.0 {
        // sin(pi z) = exp(-i pi z) (1 - exp(2 pi i z)) * i/2
        let w = (Complex::i() * 2.0 * PI * z).exp();
        -Complex::i() * PI * z + (Complex::new(1.0, 0.0) - w).ln()
            + Complex::new(-(2.0_f64.ln()), PI / 2.0)
    } else if z.im < 0.0 {
        let conj = log_sin_pi(z.conj());
        conj.conj()
    } else {
        Complex::new((PI * z.re).sin(), 0.0).ln()
    }
}

/// Principal-branch `log Gamma(z)` by shifted Stirling with reflection for
/// `Re z < 1/2`. Relative accuracy ~1e-13 for `|Im z| <= 50`.
///
/// Errors with [`PiiError::GammaPole`] at `z = 0, -1, -2, ...`.
pub fn log_gamma(z: Complex) -> Result<Complex> {
    if is_nonpositive_integer(z) {
        return Err(PiiError::GammaPole(format!("{z}")));
    }
    if z.re < 0.5 {
        // Gamma(z) Gamma(1-z) = pi / sin(pi z)
        let lg = log_gamma(Complex::new(1.0, 0.0) - z)?;
        return Ok(Complex::new(PI.ln(), 0.0) - log_sin_pi(z) - lg);
    }
    // shift until the Stirling series applies
    let mut w = z;
    let mut shift = Complex::new(0.0, 0.0);
    while w.norm() < STIRLING_RADIUS {
        shift += w.ln();
        w += 1.0;
    }
    Ok(log_gamma_stirling(w) - shift)
}

/// `Gamma(z)` through the log; convenience for identity checks.
pub fn gamma(z: Complex) -> Result<Complex> {
    Ok(log_gamma(z)?.exp())
}

/// `Im log Gamma(i y)`: the argument of Gamma at a purely imaginary point,
/// continuous in `y` on each half-line. Errors at `y = 0` (Gamma pole).
pub fn arg_gamma_imag(y: f64) -> Result<f64> {
    if y == 0.0 {
        return Err(PiiError::GammaPole("0".into()));
    }
    Ok(log_gamma(Complex::new(0.0, y))?.im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn airy_domain_error() {
        assert!(matches!(airy_ai(7.999), Err(PiiError::Domain { .. })));
        assert!(airy_ai(8.0).is_ok());
    }

    #[test]
    fn airy_signs_and_error_estimate() {
        for &x in &[8.0, 9.5, 11.0, 13.0, 15.0, 20.0] {
            let v = airy_ai(x).unwrap();
            assert!(v.ai > 0.0, "Ai({x}) > 0");
            assert!(v.ai_prime < 0.0, "Ai'({x}) < 0");
            assert!(v.rel_err_est >= 0.0);
            assert!(v.rel_err_est < 1e-12, "rel_err_est at x={x}");
        }
    }

    #[test]
    fn airy_leading_order_ratio_at_10() {
        // ratio ai / [e^{-zeta}/(2 sqrt(pi) x^{1/4})] = 1 - u_1/zeta + ...
        // with zeta = (2/3) 10^{3/2} = 21.0818...; u_1/zeta = (5/72)/zeta.
        let v = airy_ai(10.0).unwrap();
        let zeta = 2.0 / 3.0 * 10.0_f64.powf(1.5);
        let lead = (-zeta).exp() / (2.0 * PI.sqrt() * 10.0_f64.powf(0.25));
        let ratio = v.ai / lead;
        assert_relative_eq!(ratio, 1.0 - (5.0 / 72.0) / zeta, epsilon = 3e-5);
    }

    #[test]
    fn airy_equation_residual_five_point() {
        // |Ai'' - x Ai| <= 1e-8 Ai with a 5-point second-difference, h = 1e-3.
        let h = 1e-3;
        let mut x = 8.0;
        while x <= 20.0 {
            let f = |t: f64| airy_ai(t).unwrap().ai;
            let d2 = (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x)
                + 16.0 * f(x + h)
                - f(x + 2.0 * h))
                / (12.0 * h * h);
            let ai = f(x);
            assert!(
                (d2 - x * ai).abs() <= 1e-8 * ai,
                "residual {} at x={x}",
                (d2 - x * ai).abs() / ai
            );
            x += 0.5;
        }
    }

    #[test]
    fn airy_derivative_consistency() {
        // centered difference of ai matches ai_prime
        let h = 1e-4;
        for &x in &[9.0, 12.0, 16.0] {
            let v = airy_ai(x).unwrap();
            let d = (airy_ai(x + h).unwrap().ai - airy_ai(x - h).unwrap().ai) / (2.0 * h);
            assert_relative_eq!(d, v.ai_prime, max_relative = 1e-7);
        }
    }

    #[test]
    fn log_gamma_at_one_and_recurrence() {
        let lg1 = log_gamma(Complex::new(1.0, 0.0)).unwrap();
        assert!(lg1.norm() < 1e-14);
        // Gamma(z+1) = z Gamma(z) across random-ish points with Re in [1,3]
        let pts = [
            Complex::new(1.3, 0.7),
            Complex::new(2.1, -4.0),
            Complex::new(2.9, 17.0),
            Complex::new(1.0, 49.0),
            Complex::new(1.5, 0.0),
        ];
        for &z in &pts {
            let r = (log_gamma(z + 1.0).unwrap() - log_gamma(z).unwrap()).exp();
            assert!(
                (r - z).norm() <= 1e-12 * z.norm(),
                "recurrence at {z}: {r}"
            );
        }
    }

    #[test]
    fn log_gamma_imag_modulus() {
        // |Gamma(iy)|^2 = pi / (y sinh(pi y)), y = 0.5
        let y = 0.5_f64;
        let lg = log_gamma(Complex::new(0.0, y)).unwrap();
        let expect = PI / (y * (PI * y).sinh());
        assert_relative_eq!((2.0 * lg.re).exp(), expect, max_relative = 1e-13);
        // spec's quoted value
        assert_relative_eq!(expect, 2.7306, max_relative = 1e-4);
    }

    #[test]
    fn log_gamma_pole_errors() {
        for &re in &[0.0, -1.0, -2.0, -7.0] {
            assert!(matches!(
                log_gamma(Complex::new(re, 0.0)),
                Err(PiiError::GammaPole(_))
            ));
        }
        assert!(log_gamma(Complex::new(-0.5, 0.0)).is_ok());
    }

    #[test]
    fn log_gamma_conjugation() {
        let pts = [
            Complex::new(0.3, 1.7),
            Complex::new(-1.2, 0.4),
            Complex::new(2.5, -33.0),
            Complex::new(0.0, 0.25),
        ];
        for &z in &pts {
            let a = log_gamma(z.conj()).unwrap();
            let b = log_gamma(z).unwrap().conj();
            assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()), "conj at {z}");
        }
    }

    #[test]
    fn arg_gamma_imag_antisymmetric_and_definitional() {
        for &y in &[0.1, 0.5, 2.0, 31.0] {
            let p = arg_gamma_imag(y).unwrap();
            let m = arg_gamma_imag(-y).unwrap();
            assert_relative_eq!(p, -m, max_relative = 1e-13);
            let lg = log_gamma(Complex::new(0.0, y)).unwrap();
            assert_eq!(p, lg.im);
        }
        assert!(matches!(arg_gamma_imag(0.0), Err(PiiError::GammaPole(_))));
    }

    #[test]
    fn reflection_identity_on_imag_axis() {
        // Gamma(nu) Gamma(-nu) = -pi / (nu sin(pi nu)), nu = i tau
        let mut tau = 0.01;
        while tau <= 3.0 {
            let nu = Complex::new(0.0, tau);
            let lhs = gamma(nu).unwrap() * gamma(-nu).unwrap();
            let rhs = -Complex::new(PI, 0.0) / (nu * (nu * PI).sin());
            assert!(
                (lhs - rhs).norm() <= 1e-10 * rhs.norm(),
                "reflection at tau={tau}"
            );
            tau += 0.173;
        }
    }
}
