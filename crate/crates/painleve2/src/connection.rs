//! Stokes-multiplier parametrization, the exponent `nu`, the connection
//! formulas `(d, phi)` for both solution families, and the leading
//! oscillatory term at `x -> -inf`.
//!
//! Both families share one set of Stokes multipliers
//!
//! ```text
//! s1 = -sin(pi alpha) - i k,   s2 = 0,   s3 = -sin(pi alpha) + i k,
//! ```
//!
//! subject to `s1 - s2 + s3 + s1 s2 s3 = -2 sin(pi alpha)`. The quantity
//! `1 - s1 s3` is real and positive on both admissible parameter domains,
//! `nu = -log(1 - s1 s3) / (2 pi i)` is purely imaginary, and `d^2 = 2 i nu`.

use crate::error::{PiiError, Result};
use crate::specfun::{arg_gamma_imag, log_gamma};
use crate::{wrap_phase, Complex};
use std::f64::consts::PI;

/// Solution family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `alpha` in (-1/2, 1/2) real, `k` real with `|k| < cos(pi alpha)`.
    RealAS,
    /// `alpha` and `k` purely imaginary.
    ImagAS,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::RealAS => "real",
            Family::ImagAS => "imag",
        }
    }
}

/// The pair `(alpha, k)` plus its family tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PIIParams {
    pub alpha: Complex,
    pub k: Complex,
    pub family: Family,
}

impl PIIParams {
    pub fn new(alpha: Complex, k: Complex, family: Family) -> Result<Self> {
        let p = PIIParams { alpha, k, family };
        p.validate()?;
        Ok(p)
    }

    /// Real-family constructor from real scalars.
    pub fn real(alpha: f64, k: f64) -> Result<Self> {
        Self::new(Complex::new(alpha, 0.0), Complex::new(k, 0.0), Family::RealAS)
    }

    /// Imaginary-family constructor from the imaginary parts.
    pub fn imag(alpha_im: f64, k_im: f64) -> Result<Self> {
        Self::new(
            Complex::new(0.0, alpha_im),
            Complex::new(0.0, k_im),
            Family::ImagAS,
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            Family::RealAS => {
                if self.alpha.im != 0.0 || self.k.im != 0.0 {
                    return Err(PiiError::InvalidParams(format!(
                        "real family requires real alpha and k, got alpha={}, k={}",
                        self.alpha, self.k
                    )));
                }
                if self.alpha.re.abs() >= 0.5 {
                    return Err(PiiError::InvalidParams(format!(
                        "alpha = {} outside (-1/2, 1/2)",
                        self.alpha.re
                    )));
                }
                let bound = (PI * self.alpha.re).cos();
                if self.k.re.abs() >= bound {
                    return Err(PiiError::BoundaryParams(format!(
                        "|k| = {} >= cos(pi alpha) = {bound}",
                        self.k.re.abs()
                    )));
                }
            }
            Family::ImagAS => {
                if self.alpha.re != 0.0 || self.k.re != 0.0 {
                    return Err(PiiError::InvalidParams(format!(
                        "imaginary family requires purely imaginary alpha and k, got alpha={}, k={}",
                        self.alpha, self.k
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.alpha == Complex::new(0.0, 0.0) && self.k == Complex::new(0.0, 0.0)
    }
}

/// Stokes multipliers `(s1, s2, s3)`; `s2 = 0` for every solution handled
/// here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesTriple {
    pub s1: Complex,
    pub s2: Complex,
    pub s3: Complex,
}

impl StokesTriple {
    /// Residual of the cyclic constraint
    /// `s1 - s2 + s3 + s1 s2 s3 + 2 sin(pi alpha)`.
    pub fn constraint_residual(&self, alpha: Complex) -> Complex {
        self.s1 - self.s2 + self.s3 + self.s1 * self.s2 * self.s3
            + (alpha * PI).sin() * 2.0
    }
}

/// Connection data `(d, phi, nu)` at `x -> -inf`; `d^2 = 2 i nu` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionData {
    /// Amplitude: real positive for the real family, `i |d|` for the
    /// imaginary family.
    pub d: Complex,
    /// Phase, reduced to `(-pi, pi]`.
    pub phi: f64,
    /// Purely imaginary exponent.
    pub nu: Complex,
}

/// Connection formulas evaluated at a parameter point: either proper data or
/// the tagged degenerate case `(alpha, k) = (0, 0)` (the zero solution, whose
/// phase is meaningless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Connection {
    Trivial,
    Data(ConnectionData),
}

impl Connection {
    pub fn data(&self) -> Result<&ConnectionData> {
        match self {
            Connection::Trivial => Err(PiiError::DegenerateParams),
            Connection::Data(d) => Ok(d),
        }
    }
}

/// `s1 = -sin(pi alpha) - i k`, `s2 = 0`, `s3 = -sin(pi alpha) + i k`.
pub fn stokes_from_params(p: &PIIParams) -> Result<StokesTriple> {
    p.validate()?;
    let s = -(p.alpha * PI).sin();
    let ik = Complex::i() * p.k;
    Ok(StokesTriple {
        s1: s - ik,
        s2: Complex::new(0.0, 0.0),
        s3: s + ik,
    })
}

/// `nu = -log(1 - s1 s3) / (2 pi i)`, purely imaginary on the supported
/// families. Errors if `1 - s1 s3` fails to be real and positive.
pub fn nu_exponent(s: &StokesTriple) -> Result<Complex> {
    let z = Complex::new(1.0, 0.0) - s.s1 * s.s3;
    if z.im.abs() > 1e-12 * z.norm() {
        return Err(PiiError::InvalidParams(format!(
            "1 - s1 s3 = {z} is not real"
        )));
    }
    if z.re <= 0.0 {
        return Err(PiiError::BoundaryParams(format!("1 - s1 s3 = {} <= 0", z.re)));
    }
    Ok(Complex::new(0.0, z.re.ln() / (2.0 * PI)))
}

fn phi_from(d2: f64, s1: Complex) -> Result<f64> {
    let phi = -1.5 * d2 * 2.0_f64.ln() + arg_gamma_imag(0.5 * d2)? - PI / 4.0
        - s1.arg();
    Ok(wrap_phase(phi))
}

/// Connection formulas for the real family. `(0, 0)` yields
/// [`Connection::Trivial`]; `|k| >= cos(pi alpha)` is a boundary error.
pub fn connection_real(alpha: f64, k: f64) -> Result<Connection> {
    let p = PIIParams::real(alpha, k)?;
    if p.is_degenerate() {
        return Ok(Connection::Trivial);
    }
    let st = stokes_from_params(&p)?;
    let nu = nu_exponent(&st)?;
    // d = sqrt(-ln(cos^2(pi alpha) - k^2)) / sqrt(pi), and d^2 = 2 i nu
    let d2 = -((PI * alpha).cos().powi(2) - k * k).ln() / PI;
    let d = Complex::new(d2.sqrt(), 0.0);
    let phi = phi_from(d2, st.s1)?;
    Ok(Connection::Data(ConnectionData { d, phi, nu }))
}

/// Connection formulas for the purely imaginary family; `alpha` and `k` must
/// be purely imaginary. `d` is purely imaginary, `d^2 < 0`.
pub fn connection_imag(alpha: Complex, k: Complex) -> Result<Connection> {
    let p = PIIParams::new(alpha, k, Family::ImagAS)?;
    if p.is_degenerate() {
        return Ok(Connection::Trivial);
    }
    let st = stokes_from_params(&p)?;
    let nu = nu_exponent(&st)?;
    // d^2 = -ln(cosh^2(pi a) + k0^2)/pi <= 0, alpha = i a, k = i k0
    let a = alpha.im;
    let k0 = k.im;
    let d2 = -((PI * a).cosh().powi(2) + k0 * k0).ln() / PI;
    let d = Complex::new(0.0, (-d2).sqrt());
    let phi = phi_from(d2, st.s1)?;
    Ok(Connection::Data(ConnectionData { d, phi, nu }))
}

/// Connection data for either family from a parameter struct.
pub fn connection_for(p: &PIIParams) -> Result<Connection> {
    match p.family {
        Family::RealAS => connection_real(p.alpha.re, p.k.re),
        Family::ImagAS => connection_imag(p.alpha, p.k),
    }
}

/// Leading oscillatory term of the solution at `x < 0` (no `O(|x|^{-1})`
/// remainder): the two-term combination
///
/// ```text
/// W(x) = sqrt(pi) e^{-i pi nu / 2} / (s1 Gamma(nu))
///        * exp(i 2/3 (-x)^{3/2} + nu ln(8 (-x)^{3/2}) - i pi/4)
/// ```
///
/// returned as `2 (-x)^{-1/4} Re W` for the real family and
/// `2 i (-x)^{-1/4} Im W` for the imaginary one. For `(alpha, k) = (0, 0)`
/// the solution is identically zero and so is this term.
pub fn oscillatory_leading_term(x: f64, p: &PIIParams) -> Result<Complex> {
    if x >= 0.0 {
        return Err(PiiError::Domain {
            what: "oscillatory_leading_term",
            detail: format!("x = {x} >= 0"),
        });
    }
    p.validate()?;
    if p.is_degenerate() {
        return Ok(Complex::new(0.0, 0.0));
    }
    let st = stokes_from_params(p)?;
    let nu = nu_exponent(&st)?;
    let s = -x;
    let t = s.powf(1.5);
    let lg = log_gamma(nu)?;
    // exponent assembled in log form; every piece is O(1) except the real
    // carrier phase
    let expo = Complex::i() * (2.0 / 3.0 * t - PI / 4.0) + nu * (8.0 * t).ln()
        - Complex::i() * PI * nu / 2.0
        - lg;
    let w = PI.sqrt() * expo.exp() / st.s1;
    let scale = 2.0 * s.powf(-0.25);
    match p.family {
        Family::RealAS => Ok(Complex::new(scale * w.re, 0.0)),
        Family::ImagAS => Ok(Complex::new(0.0, scale * w.im)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stokes_trivial_and_exact_points() {
        let p = PIIParams::real(0.0, 0.0).unwrap();
        let st = stokes_from_params(&p).unwrap();
        assert_eq!(st.s1, Complex::new(0.0, 0.0));
        assert_eq!(st.s3, Complex::new(0.0, 0.0));

        // alpha = 1/4, k = 0.3: s1 = -sqrt(2)/2 - 0.3i, 1 - s1 s3 = 0.41
        let p = PIIParams::real(0.25, 0.3).unwrap();
        let st = stokes_from_params(&p).unwrap();
        assert_relative_eq!(st.s1.re, -(2.0_f64.sqrt()) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(st.s1.im, -0.3, max_relative = 1e-15);
        let z = Complex::new(1.0, 0.0) - st.s1 * st.s3;
        assert_relative_eq!(z.re, 0.41, max_relative = 1e-14);
        assert!(z.im.abs() < 1e-16);

        // alpha = 0.3i, k = 0.5i: s1 = 0.5 - i sinh(0.3 pi),
        // 1 - s1 s3 = cosh^2(0.3 pi) + 0.25
        let p = PIIParams::imag(0.3, 0.5).unwrap();
        let st = stokes_from_params(&p).unwrap();
        assert_relative_eq!(st.s1.re, 0.5, max_relative = 1e-15);
        assert_relative_eq!(st.s1.im, -(0.3 * PI).sinh(), max_relative = 1e-15);
        assert_relative_eq!(st.s3.re, -0.5, max_relative = 1e-15);
        let z = Complex::new(1.0, 0.0) - st.s1 * st.s3;
        assert_relative_eq!(
            z.re,
            (0.3 * PI).cosh().powi(2) + 0.25,
            max_relative = 1e-14
        );
    }

    #[test]
    fn stokes_constraint_residual() {
        for &(al, k) in &[(0.0, 0.5), (0.25, 0.3), (-0.4, 0.1), (0.45, 0.05)] {
            let p = PIIParams::real(al, k).unwrap();
            let st = stokes_from_params(&p).unwrap();
            assert!(st.constraint_residual(p.alpha).norm() <= 1e-14);
        }
        for &(a, k0) in &[(0.3, 0.5), (0.8, 3.0), (0.0, 1.0)] {
            let p = PIIParams::imag(a, k0).unwrap();
            let st = stokes_from_params(&p).unwrap();
            assert!(st.constraint_residual(p.alpha).norm() <= 1e-14);
        }
    }

    #[test]
    fn nu_values() {
        let st = StokesTriple {
            s1: Complex::new(0.0, 0.0),
            s2: Complex::new(0.0, 0.0),
            s3: Complex::new(0.0, 0.0),
        };
        assert_eq!(nu_exponent(&st).unwrap(), Complex::new(0.0, 0.0));

        // alpha=0, k=0.5: nu = -ln(0.75)/(2 pi i) = i ln(0.75)/(2 pi)
        let p = PIIParams::real(0.0, 0.5).unwrap();
        let nu = nu_exponent(&stokes_from_params(&p).unwrap()).unwrap();
        assert_eq!(nu.re, 0.0);
        assert_relative_eq!(nu.im, -0.045783706, max_relative = 1e-7);

        // alpha=1/4, k=0.3: nu = i ln(0.41)/(2 pi)
        let p = PIIParams::real(0.25, 0.3).unwrap();
        let nu = nu_exponent(&stokes_from_params(&p).unwrap()).unwrap();
        assert_relative_eq!(nu.im, 0.41_f64.ln() / (2.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(nu.im, -0.141899, max_relative = 1e-5);
    }

    #[test]
    fn connection_real_values() {
        // d(0, 0.5) = sqrt(-ln 0.75)/sqrt(pi) = 0.302609...
        let c = connection_real(0.0, 0.5).unwrap();
        let d = c.data().unwrap().d;
        assert_eq!(d.im, 0.0);
        assert_relative_eq!(d.re, 0.302609, max_relative = 1e-5);
        assert_relative_eq!(
            d.re,
            (-(0.75_f64.ln()) / PI).sqrt(),
            max_relative = 1e-15
        );

        let c = connection_real(0.25, 0.3).unwrap();
        assert_relative_eq!(
            c.data().unwrap().d.re,
            (-(0.41_f64.ln()) / PI).sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn connection_real_alpha_zero_reduces_to_homogeneous() {
        // phi = -(3/2) d^2 ln 2 + arg Gamma(i d^2 / 2) + (pi/2) sgn k - pi/4
        for &k in &[0.7, 0.5, 0.2, -0.2, -0.9] {
            let c = connection_real(0.0, k).unwrap();
            let d2 = c.data().unwrap().d.re.powi(2);
            let hom = -1.5 * d2 * 2.0_f64.ln() + arg_gamma_imag(0.5 * d2).unwrap()
                + 0.5 * PI * k.signum()
                - PI / 4.0;
            assert!(
                crate::phase_distance(c.data().unwrap().phi, hom) <= 1e-12,
                "k = {k}"
            );
        }
    }

    #[test]
    fn connection_imag_values_and_homogeneous_reduction() {
        // alpha = 0.3i, k = 0.5i: d^2 = -ln(cosh^2(0.3 pi) + 0.25)/pi
        let c = connection_imag(Complex::new(0.0, 0.3), Complex::new(0.0, 0.5)).unwrap();
        let d = c.data().unwrap().d;
        assert_eq!(d.re, 0.0);
        let d2_expect = -((0.3 * PI).cosh().powi(2) + 0.25).ln() / PI;
        assert_relative_eq!(-d.im * d.im, d2_expect, max_relative = 1e-14);

        // alpha = 0: d = (i/sqrt(pi)) sqrt(ln(1 + k0^2))
        for &k0 in &[0.3, 1.0, 3.0] {
            let c = connection_imag(Complex::new(0.0, 0.0), Complex::new(0.0, k0)).unwrap();
            let cd = c.data().unwrap();
            assert_relative_eq!(
                cd.d.im,
                (1.0 + k0 * k0).ln().sqrt() / PI.sqrt(),
                max_relative = 1e-14
            );
            // homogeneous iAS phase: no arg term beyond -arg(k0) = 0 for k0 > 0
            let d2 = -cd.d.im * cd.d.im;
            let hom = -1.5 * d2 * 2.0_f64.ln() + arg_gamma_imag(0.5 * d2).unwrap() - PI / 4.0;
            assert!(crate::phase_distance(cd.phi, hom) <= 1e-12, "k0 = {k0}");
        }
    }

    #[test]
    fn d_squared_equals_two_i_nu() {
        let cases: Vec<Connection> = vec![
            connection_real(0.25, 0.3).unwrap(),
            connection_real(-0.4, 0.1).unwrap(),
            connection_imag(Complex::new(0.0, 0.3), Complex::new(0.0, 0.5)).unwrap(),
            connection_imag(Complex::new(0.0, 0.8), Complex::new(0.0, 3.0)).unwrap(),
        ];
        for c in cases {
            let cd = c.data().unwrap();
            let lhs = cd.d * cd.d;
            let rhs = Complex::i() * cd.nu * 2.0;
            assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
            assert_eq!(cd.nu.re, 0.0);
        }
    }

    #[test]
    fn degenerate_and_boundary() {
        assert_eq!(connection_real(0.0, 0.0).unwrap(), Connection::Trivial);
        assert!(matches!(
            connection_real(0.25, 0.8),
            Err(PiiError::BoundaryParams(_))
        ));
        assert!(matches!(
            connection_real(0.6, 0.0),
            Err(PiiError::InvalidParams(_))
        ));
        assert_eq!(
            connection_imag(Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)).unwrap(),
            Connection::Trivial
        );
    }

    #[test]
    fn leading_term_matches_closed_form() {
        // two-term bracket equals d (-x)^{-1/4} cos(theta) exactly (real),
        // and i |d| (-x)^{-1/4} sin(theta) (imaginary family)
        for &(al, k) in &[(0.25, 0.3), (0.0, 0.5), (-0.4, 0.09), (0.45, 0.1)] {
            let p = PIIParams::real(al, k).unwrap();
            let cd = *connection_real(al, k).unwrap().data().unwrap();
            for &x in &[-20.0, -50.0, -100.0] {
                let s = -x;
                let lead = oscillatory_leading_term(x, &p).unwrap();
                let theta = 2.0 / 3.0 * s.powf(1.5) - 0.75 * cd.d.re.powi(2) * s.ln() + cd.phi;
                let closed = cd.d.re * s.powf(-0.25) * theta.cos();
                assert_eq!(lead.im, 0.0);
                assert!(
                    (lead.re - closed).abs() <= 1e-10 * cd.d.re * s.powf(-0.25),
                    "real ({al},{k}) at x={x}: {} vs {closed}",
                    lead.re
                );
            }
        }
        for &(a, k0) in &[(0.3, 0.5), (0.0, 1.0), (0.8, 3.0)] {
            let p = PIIParams::imag(a, k0).unwrap();
            let cd = *connection_imag(Complex::new(0.0, a), Complex::new(0.0, k0))
                .unwrap()
                .data()
                .unwrap();
            let d2 = -cd.d.im * cd.d.im;
            for &x in &[-20.0, -50.0, -100.0] {
                let s: f64 = -x;
                let lead = oscillatory_leading_term(x, &p).unwrap();
                let theta = 2.0 / 3.0 * s.powf(1.5) - 0.75 * d2 * s.ln() + cd.phi;
                let closed = cd.d.im * s.powf(-0.25) * theta.sin();
                assert_eq!(lead.re, 0.0);
                assert!(
                    (lead.im - closed).abs() <= 1e-10 * cd.d.im.abs() * s.powf(-0.25),
                    "imag ({a},{k0}) at x={x}: {} vs {closed}",
                    lead.im
                );
            }
        }
    }

    #[test]
    fn leading_term_zero_solution() {
        let p = PIIParams::real(0.0, 0.0).unwrap();
        for &x in &[-10.0, -77.7] {
            assert_eq!(
                oscillatory_leading_term(x, &p).unwrap(),
                Complex::new(0.0, 0.0)
            );
        }
    }

    #[test]
    fn gamma_modulus_identity_real_family() {
        // |1/Gamma(nu)|^2 = (i nu / 2 pi) e^{i pi nu} |s1|^2
        for &(al, k) in &[(0.25, 0.3), (0.0, 0.5), (-0.3, 0.4), (0.45, 0.12)] {
            let p = PIIParams::real(al, k).unwrap();
            let st = stokes_from_params(&p).unwrap();
            let nu = nu_exponent(&st).unwrap();
            let lg = log_gamma(nu).unwrap();
            let lhs = (-2.0 * lg.re).exp();
            let rhs = (Complex::i() * nu / (2.0 * PI) * (Complex::i() * PI * nu).exp()
                * st.s1.norm_sqr())
            .re;
            assert!(
                (lhs - rhs).abs() <= 1e-10 * rhs.abs(),
                "({al},{k}): {lhs} vs {rhs}"
            );
        }
    }
}
