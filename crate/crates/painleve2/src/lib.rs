//! Ablowitz-Segur solutions of the inhomogeneous Painlevé II equation
//!
//! ```text
//! u''(x) = 2 u^3 + x u - alpha
//! ```
//!
//! This crate computes the real family (`alpha` in (-1/2, 1/2), `k` in
//! (-cos(pi alpha), cos(pi alpha))) and the purely imaginary family
//! (`alpha`, `k` both imaginary) of Ablowitz-Segur solutions, and verifies
//! numerically that the two asymptotic regimes are linked by the known
//! connection formulas:
//!
//! * as `x -> +inf`: `u = B(alpha; x) + k Ai(x) (1 + O(x^{-3/4}))`, where
//!   `B` is a divergent power series summed by optimal truncation;
//! * as `x -> -inf`: `u = d (-x)^{-1/4} cos(2/3 (-x)^{3/2} - 3/4 d^2 ln(-x) + phi)`
//!   (sine in place of cosine for the imaginary family), with `(d, phi)`
//!   explicit functions of `(alpha, k)`.
//!
//! The crate is organized along the pipeline:
//!
//! * [`specfun`] — Airy `Ai` on the right half-line and complex `log Gamma`;
//! * [`series`] — the coefficients `a_n` and truncated evaluation of `B`;
//! * [`connection`] — Stokes multipliers, the exponent `nu`, and `(d, phi)`;
//! * [`ode`] — the PII system, Lax-pair residual, adaptive integration with
//!   pole detection, and initialization at large positive `x`;
//! * [`verifier`] — end-to-end connection verification, decay checks at
//!   `+inf`, and pole-free scans;
//! * [`cli`] — the `pii` command-line interface.

pub mod cli;
pub mod connection;
pub mod error;
pub mod ode;
pub mod series;
pub mod specfun;
pub mod verifier;

pub use error::PiiError;

/// Convenience alias used throughout the crate.
pub type Complex = num_complex::Complex64;

/// Reduce an angle to the interval `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// Circular distance between two phases, in `[0, pi]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_phase_interval() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-0.5) + 0.5).abs() < 1e-15);
        // left-open, right-closed
        assert_eq!(wrap_phase(PI), PI);
        assert!(wrap_phase(-PI) > 0.0);
    }

    #[test]
    fn phase_distance_mod_2pi() {
        assert!((phase_distance(0.1, 0.1 + 4.0 * PI)).abs() < 1e-12);
        assert!((phase_distance(-3.0, 3.0) - (2.0 * PI - 6.0)).abs() < 1e-12);
    }
}
