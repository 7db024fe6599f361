//! The PII equation as a first-order system: residual, Lax-pair
//! compatibility, initialization at large positive `x`, and high-order
//! adaptive integration along the real line with pole detection.
//!
//! Both families are integrated in real arithmetic. The real family solves
//! `u'' = 2u^3 + xu - alpha` directly; the imaginary family uses the real
//! reduction `v = -i u`, `beta = -i alpha`, which satisfies
//! `v'' = -2v^3 + xv - beta`. This keeps the family invariant (`u` purely
//! imaginary) exact by construction.
//!
//! Integration runs in two precision phases: double-double from the start
//! point down to the handoff at `x = 8`, plain f64 below. The early segment
//! is where the exponentially small `k Ai` content of the state lives below
//! one f64 ulp of the series background; see [`dd`].

pub mod dd;
pub mod rk;

use crate::connection::{Family, PIIParams};
use crate::error::{PiiError, Result};
use crate::series::{eval_b_derivs, Truncation};
use crate::specfun::airy_ai;
use crate::Complex;
use dd::Dd;
use rk::{dop853_step, CubicRhs, Scalar};

/// Blow-up threshold: |u| beyond this is treated as a pole signature.
pub const POLE_THRESHOLD: f64 = 1e6;
/// Step-size floor; collapse below it aborts the run.
pub const STEP_FLOOR: f64 = 1e-12;
/// Default precision handoff point.
pub const HANDOFF_X: f64 = 8.0;

/// One sampled point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub x: f64,
    pub u: Complex,
    pub up: Complex,
}

/// Integration outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    PoleDetected { x_pole: f64 },
    ToleranceFailure { x: f64 },
}

impl TrajectoryStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, TrajectoryStatus::Completed)
    }
}

/// Step-size statistics over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub h_min: f64,
    pub h_max: f64,
    pub steps: usize,
}

impl StepStats {
    fn new() -> Self {
        StepStats {
            h_min: f64::INFINITY,
            h_max: 0.0,
            steps: 0,
        }
    }
    fn record(&mut self, h: f64) {
        let a = h.abs();
        self.h_min = self.h_min.min(a);
        self.h_max = self.h_max.max(a);
        self.steps += 1;
    }
}

/// Sampled solution of a PII initial-value run, `x` decreasing.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: PIIParams,
    pub samples: Vec<State>,
    pub tol: f64,
    pub step_stats: StepStats,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    /// Working-space value (u for the real family, v = -i u for the
    /// imaginary one) at sample `i`.
    pub fn working(&self, i: usize) -> (f64, f64, f64) {
        let s = &self.samples[i];
        match self.params.family {
            Family::RealAS => (s.x, s.u.re, s.up.re),
            Family::ImagAS => (s.x, s.u.im, s.up.im),
        }
    }

    /// Sample index at the given `x`, if present.
    pub fn find_sample(&self, x: f64) -> Option<usize> {
        self.samples
            .iter()
            .position(|s| (s.x - x).abs() <= 1e-9 * (1.0 + x.abs()))
    }
}

/// Output sampling of [`integrate_with`].
#[derive(Debug, Clone)]
pub enum SampleSpec {
    /// Every `dx` from the start point, plus both endpoints.
    Uniform { dx: f64 },
    /// Exactly these points (any order; filtered to the integration range),
    /// plus both endpoints.
    Points(Vec<f64>),
    /// Endpoints only.
    EndpointsOnly,
}

/// Knobs of the integration driver.
#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub tol: f64,
    pub sample: SampleSpec,
    /// Where to switch from double-double to f64 (x below this is f64).
    pub handoff: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            tol: 1e-11,
            sample: SampleSpec::Uniform { dx: 0.5 },
            handoff: HANDOFF_X,
            max_steps: 1_000_000,
        }
    }
}

/// A sample kept at working precision (used by the `+inf` decay checks,
/// where the residual of interest is far below f64 resolution of the state).
#[derive(Debug, Clone, Copy)]
pub struct RawSample {
    pub x: f64,
    pub y: Dd,
    pub yp: Dd,
}

/// Trajectory plus the working-precision samples of the double-double phase.
#[derive(Debug, Clone)]
pub struct IntegrationOutput {
    pub trajectory: Trajectory,
    pub raw: Vec<RawSample>,
}

/// PII residual `upp - 2u^3 - xu + alpha`.
pub fn pii_residual(x: f64, u: Complex, upp: Complex, alpha: Complex) -> Complex {
    upp - u * u * u * 2.0 - u * x + alpha
}

// ---------------------------------------------------------------------------
// Lax pair
// ---------------------------------------------------------------------------

/// 2x2 complex matrix as nested arrays, row major.
pub type Mat2 = [[Complex; 2]; 2];

pub const SIGMA1: Mat2 = [
    [Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)],
    [Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)],
];
pub const SIGMA2: Mat2 = [
    [Complex::new(0.0, 0.0), Complex::new(0.0, -1.0)],
    [Complex::new(0.0, 1.0), Complex::new(0.0, 0.0)],
];
pub const SIGMA3: Mat2 = [
    [Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)],
    [Complex::new(0.0, 0.0), Complex::new(-1.0, 0.0)],
];

pub fn mat_add(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut m = [[Complex::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][j] + b[i][j];
        }
    }
    m
}

pub fn mat_sub(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut m = [[Complex::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][j] - b[i][j];
        }
    }
    m
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut m = [[Complex::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

pub fn mat_scale(a: &Mat2, c: Complex) -> Mat2 {
    let mut m = [[Complex::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][j] * c;
        }
    }
    m
}

pub fn mat_max_norm(a: &Mat2) -> f64 {
    let mut n = 0.0_f64;
    for row in a {
        for e in row {
            n = n.max(e.norm());
        }
    }
    n
}

/// The Lax pair evaluated at a point.
#[derive(Debug, Clone, Copy)]
pub struct LaxMatrices {
    pub a: Mat2,
    pub u: Mat2,
    pub lambda: Complex,
}

/// `A(lambda) = -i(4 lambda^2 + x + 2u^2) s3 - (4 lambda u + alpha/lambda) s2 - 2 u_x s1`.
pub fn lax_a(x: f64, u: Complex, up: Complex, alpha: Complex, lambda: Complex) -> Result<Mat2> {
    if lambda == Complex::new(0.0, 0.0) {
        return Err(PiiError::SingularLambda);
    }
    let c3 = -Complex::i() * (lambda * lambda * 4.0 + x + u * u * 2.0);
    let c2 = -(lambda * u * 4.0 + alpha / lambda);
    let c1 = -up * 2.0;
    Ok(mat_add(
        &mat_add(&mat_scale(&SIGMA3, c3), &mat_scale(&SIGMA2, c2)),
        &mat_scale(&SIGMA1, c1),
    ))
}

/// `U(lambda) = -i lambda s3 - u s2`.
pub fn lax_u(u: Complex, lambda: Complex) -> Mat2 {
    mat_add(
        &mat_scale(&SIGMA3, -Complex::i() * lambda),
        &mat_scale(&SIGMA2, -u),
    )
}

pub fn lax_matrices(
    x: f64,
    u: Complex,
    up: Complex,
    alpha: Complex,
    lambda: Complex,
) -> Result<LaxMatrices> {
    Ok(LaxMatrices {
        a: lax_a(x, u, up, alpha, lambda)?,
        u: lax_u(u, lambda),
        lambda,
    })
}

/// Zero-curvature residual `M = dA/dx - dU/dlambda + AU - UA` with the
/// supplied `(u, up, upp)`. Algebraically `M = -2 (upp - 2u^3 - xu + alpha) s1`.
pub fn lax_compatibility(
    x: f64,
    u: Complex,
    up: Complex,
    upp: Complex,
    alpha: Complex,
    lambda: Complex,
) -> Result<Mat2> {
    let a = lax_a(x, u, up, alpha, lambda)?;
    let uu = lax_u(u, lambda);
    // dA/dx with u = u(x): -i(1 + 4 u u') s3 - 4 lambda u' s2 - 2 u'' s1
    let ax = mat_add(
        &mat_add(
            &mat_scale(&SIGMA3, -Complex::i() * (u * up * 4.0 + 1.0)),
            &mat_scale(&SIGMA2, -lambda * up * 4.0),
        ),
        &mat_scale(&SIGMA1, -upp * 2.0),
    );
    let ul = mat_scale(&SIGMA3, -Complex::i());
    let comm = mat_sub(&mat_mul(&a, &uu), &mat_mul(&uu, &a));
    Ok(mat_add(&mat_sub(&ax, &ul), &comm))
}

// ---------------------------------------------------------------------------
// Initialization at large positive x
// ---------------------------------------------------------------------------

/// Working-space initial data at full precision: the series background
/// (f64) and the Airy coefficient are combined in double-double so that the
/// exponentially small `k Ai(x0)` part is not rounded away.
#[derive(Debug, Clone, Copy)]
pub struct RawInit {
    pub x0: f64,
    pub y: Dd,
    pub yp: Dd,
    /// First omitted series term (absolute).
    pub series_err: f64,
}

/// Working-space series/Airy data for a family at `x0`:
/// returns `(b, bp, ai, aip, coef)` with `u_init = b + coef * ai`.
fn working_init_parts(p: &PIIParams, x0: f64) -> Result<(f64, f64, f64, f64, f64, f64)> {
    let (b, bp, _, err) = eval_b_derivs(p.alpha, x0, Truncation::Optimal)?;
    let ai = airy_ai(x0)?;
    match p.family {
        Family::RealAS => Ok((b.re, bp.re, ai.ai, ai.ai_prime, p.k.re, err)),
        // v = -i u: series part -iB is real, coefficient is Im k
        Family::ImagAS => Ok((b.im, bp.im, ai.ai, ai.ai_prime, p.k.im, err)),
    }
}

/// Working-space initial state `y = B + (coef + anchor) Ai` at `x0`,
/// assembled in double-double. `anchor` is an additive correction to the
/// Airy coefficient (zero for the plain initialization).
pub fn raw_init(p: &PIIParams, x0: f64, anchor: f64) -> Result<RawInit> {
    if x0 < 12.0 {
        return Err(PiiError::Domain {
            what: "init_plus",
            detail: format!("x0 = {x0} < 12"),
        });
    }
    let (b, bp, ai, aip, coef, err) = working_init_parts(p, x0)?;
    let c = Dd::from_f64(coef).add_f64(anchor);
    let y = Dd::from_f64(b) + c.mul_f64(ai);
    let yp = Dd::from_f64(bp) + c.mul_f64(aip);
    Ok(RawInit {
        x0,
        y,
        yp,
        series_err: err,
    })
}

/// Initial state `u = B(alpha; x0) + k Ai(x0)` (and its derivative) from the
/// optimally truncated series; for the imaginary family the state is purely
/// imaginary by construction.
pub fn init_plus(p: &PIIParams, x0: f64) -> Result<State> {
    let r = raw_init(p, x0, 0.0)?;
    Ok(state_from_working(p, x0, r.y.to_f64(), r.yp.to_f64()))
}

fn state_from_working(p: &PIIParams, x: f64, y: f64, yp: f64) -> State {
    match p.family {
        Family::RealAS => State {
            x,
            u: Complex::new(y, 0.0),
            up: Complex::new(yp, 0.0),
        },
        Family::ImagAS => State {
            x,
            u: Complex::new(0.0, y),
            up: Complex::new(0.0, yp),
        },
    }
}

fn rhs_for(p: &PIIParams) -> CubicRhs {
    match p.family {
        Family::RealAS => CubicRhs {
            cubic: 2.0,
            force: -p.alpha.re,
        },
        // v'' = -2 v^3 + x v - beta, beta = -i alpha = Im(alpha)
        Family::ImagAS => CubicRhs {
            cubic: -2.0,
            force: -p.alpha.im,
        },
    }
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

enum PhaseEnd<S> {
    Reached([S; 2]),
    Stopped(TrajectoryStatus),
}

#[allow(clippy::too_many_arguments)]
fn run_phase<S: Scalar>(
    rhs: &CubicRhs,
    x_start: f64,
    y_start: [S; 2],
    x_stop: f64,
    tol_at: f64,
    tol_rt: f64,
    sample_points: &[f64],
    sink: &mut dyn FnMut(f64, [S; 2]),
    stats: &mut StepStats,
    max_steps: usize,
) -> PhaseEnd<S> {
    let mut x = S::from_f64(x_start);
    let mut y = y_start;
    let mut h = -1e-4_f64;
    let mut si = 0usize;
    // skip sample points at/above the start
    while si < sample_points.len() && sample_points[si] >= x_start - 1e-13 {
        si += 1;
    }
    let mut rejected = false;
    let h_cap = 5.0_f64;
    loop {
        let xf = x.to_f64();
        if xf <= x_stop + 1e-13 {
            return PhaseEnd::Reached(y);
        }
        if stats.steps >= max_steps {
            return PhaseEnd::Stopped(TrajectoryStatus::ToleranceFailure { x: xf });
        }
        // clamp the step to the next output point / phase end
        let mut target = x_stop;
        if si < sample_points.len() && sample_points[si] > x_stop {
            target = sample_points[si];
        }
        let mut clamped = false;
        if xf + h < target {
            h = target - xf;
            clamped = true;
        }
        let k1 = rhs.eval(x, &y);
        let (y8, err) = dop853_step(rhs, x, &y, &k1, h, tol_at, tol_rt);
        if err <= 1.0 {
            stats.record(h);
            let x_new = x.add_f64(h);
            if y8[0].to_f64().abs() > POLE_THRESHOLD {
                return PhaseEnd::Stopped(TrajectoryStatus::PoleDetected {
                    x_pole: xf + 0.5 * h,
                });
            }
            x = x_new;
            y = y8;
            let xnf = x.to_f64();
            while si < sample_points.len() && sample_points[si] >= xnf - 1e-9 {
                sink(sample_points[si], y);
                si += 1;
            }
            // step-size update (Hairer's controller, beta = 0)
            let fac11 = err.powf(0.125);
            let fac = (fac11 / 0.9).clamp(1.0 / 6.0, 3.0);
            let mut h_new = h / fac;
            if rejected {
                h_new = if h_new.abs() > h.abs() { h } else { h_new };
            }
            rejected = false;
            h = -h_new.abs().min(h_cap);
        } else {
            let fac11 = err.powf(0.125);
            h /= (fac11 / 0.9).min(3.0);
            rejected = true;
            if h.abs() < STEP_FLOOR && !clamped {
                let status = if y[0].to_f64().abs() > 1e2 {
                    TrajectoryStatus::PoleDetected { x_pole: xf }
                } else {
                    TrajectoryStatus::ToleranceFailure { x: xf }
                };
                return PhaseEnd::Stopped(status);
            }
        }
    }
}

fn build_sample_points(spec: &SampleSpec, x_start: f64, x_end: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = match spec {
        SampleSpec::Uniform { dx } => {
            let dx = dx.abs().max(1e-6);
            let n = ((x_start - x_end) / dx).floor() as usize;
            (1..=n).map(|i| x_start - i as f64 * dx).collect()
        }
        SampleSpec::Points(p) => p.clone(),
        SampleSpec::EndpointsOnly => Vec::new(),
    };
    pts.retain(|&x| x > x_end + 1e-13 && x < x_start - 1e-13);
    pts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    pts
}

/// Core driver: double-double from `x0` down to the handoff, f64 below.
/// The initial state is taken at working precision.
pub fn integrate_raw(
    p: &PIIParams,
    init: RawInit,
    x_end: f64,
    opts: &IntegrateOptions,
) -> Result<IntegrationOutput> {
    p.validate()?;
    if !(init.x0 > x_end) {
        return Err(PiiError::Domain {
            what: "integrate",
            detail: format!("x_start = {} must exceed x_end = {}", init.x0, x_end),
        });
    }
    if !(1e-14..=1e-6).contains(&opts.tol) {
        return Err(PiiError::Domain {
            what: "integrate",
            detail: format!("tol = {} outside [1e-14, 1e-6]", opts.tol),
        });
    }
    let rhs = rhs_for(p);
    let x0 = init.x0;
    let points = build_sample_points(&opts.sample, x0, x_end);
    let mut raw: Vec<RawSample> = Vec::new();
    let mut samples: Vec<State> = Vec::new();
    let mut stats = StepStats::new();

    samples.push(state_from_working(p, x0, init.y.to_f64(), init.yp.to_f64()));
    raw.push(RawSample {
        x: x0,
        y: init.y,
        yp: init.yp,
    });

    let handoff = opts.handoff.min(x0);
    let mut status = TrajectoryStatus::Completed;
    let mut y_dd = [init.y, init.yp];
    let mut reached_end = false;

    if x0 > handoff {
        let dd_stop = handoff.max(x_end);
        // local tolerance for the high-precision phase: far below the f64
        // budget so that the handoff state is exact at f64 level
        let dd_tol = (opts.tol * 1e-13).clamp(1e-27, 1e-19);
        let end = run_phase::<Dd>(
            &rhs,
            x0,
            y_dd,
            dd_stop,
            dd_tol,
            dd_tol,
            &points,
            &mut |x, y| {
                raw.push(RawSample {
                    x,
                    y: y[0],
                    yp: y[1],
                });
                samples.push(state_from_working(p, x, y[0].to_f64(), y[1].to_f64()));
            },
            &mut stats,
            opts.max_steps,
        );
        match end {
            PhaseEnd::Reached(y) => {
                y_dd = y;
                reached_end = dd_stop <= x_end + 1e-13;
            }
            PhaseEnd::Stopped(s) => {
                status = s;
                reached_end = true;
            }
        }
    }

    if !reached_end && status.is_completed() {
        let y0 = [y_dd[0].to_f64(), y_dd[1].to_f64()];
        let start = x0.min(handoff);
        let end = run_phase::<f64>(
            &rhs,
            start,
            y0,
            x_end,
            opts.tol,
            opts.tol,
            &points,
            &mut |x, y| {
                raw.push(RawSample {
                    x,
                    y: Dd::from_f64(y[0]),
                    yp: Dd::from_f64(y[1]),
                });
                samples.push(state_from_working(p, x, y[0], y[1]));
            },
            &mut stats,
            opts.max_steps,
        );
        match end {
            PhaseEnd::Reached(y) => {
                samples.push(state_from_working(p, x_end, y[0], y[1]));
                raw.push(RawSample {
                    x: x_end,
                    y: Dd::from_f64(y[0]),
                    yp: Dd::from_f64(y[1]),
                });
            }
            PhaseEnd::Stopped(s) => status = s,
        }
    } else if reached_end && status.is_completed() {
        samples.push(state_from_working(
            p,
            x_end,
            y_dd[0].to_f64(),
            y_dd[1].to_f64(),
        ));
        raw.push(RawSample {
            x: x_end,
            y: y_dd[0],
            yp: y_dd[1],
        });
    }

    // drop a duplicated endpoint if a sample point coincided with x_end
    samples.dedup_by(|a, b| (a.x - b.x).abs() < 1e-12);
    raw.dedup_by(|a, b| (a.x - b.x).abs() < 1e-12);

    if stats.steps == 0 {
        stats.h_min = 0.0;
    }
    Ok(IntegrationOutput {
        trajectory: Trajectory {
            params: *p,
            samples,
            tol: opts.tol,
            step_stats: stats,
            status,
        },
        raw,
    })
}

/// Series-initialized integration: `u(x0) = B + (k + anchor) Ai` assembled
/// at working precision, then integrated down to `x_end`.
pub fn integrate_from_series(
    p: &PIIParams,
    x0: f64,
    x_end: f64,
    anchor: f64,
    opts: &IntegrateOptions,
) -> Result<IntegrationOutput> {
    let init = raw_init(p, x0, anchor)?;
    integrate_raw(p, init, x_end, opts)
}

/// Adaptive integration from a caller-supplied state (f64 resolution).
///
/// For the anchored pipelines use [`integrate_from_series`]: an f64 `State`
/// cannot resolve the `k Ai(x0)` content of the initial data when a series
/// background is present.
pub fn integrate(
    p: &PIIParams,
    x_start: f64,
    x_end: f64,
    init: &State,
    tol: f64,
) -> Result<Trajectory> {
    let opts = IntegrateOptions {
        tol,
        ..IntegrateOptions::default()
    };
    integrate_with(p, x_start, x_end, init, &opts)
}

/// [`integrate`] with full options.
pub fn integrate_with(
    p: &PIIParams,
    x_start: f64,
    x_end: f64,
    init: &State,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let (y, yp) = match p.family {
        Family::RealAS => {
            if init.u.im != 0.0 || init.up.im != 0.0 {
                return Err(PiiError::InvalidParams(
                    "real-family init state must be real".into(),
                ));
            }
            (init.u.re, init.up.re)
        }
        Family::ImagAS => {
            if init.u.re != 0.0 || init.up.re != 0.0 {
                return Err(PiiError::InvalidParams(
                    "imaginary-family init state must be purely imaginary".into(),
                ));
            }
            (init.u.im, init.up.im)
        }
    };
    let raw = RawInit {
        x0: x_start,
        y: Dd::from_f64(y),
        yp: Dd::from_f64(yp),
        series_err: 0.0,
    };
    Ok(integrate_raw(p, raw, x_end, opts)?.trajectory)
}
