//! Command-line surface: coefficients, connection data, integration,
//! verification, pole-free scans, Lax checks, and a self-test battery.
//!
//! Exit codes: 0 success/pass, 1 verification failure, 2 parse or domain
//! error, 3 unexpected pole. On exit 2/3 nothing is written to stdout; a
//! one-line diagnostic goes to stderr. All file output is UTF-8 with LF line
//! endings and `.` decimals; numbers carry 17 significant digits so parsing
//! an emitted file reproduces the values bit-identically.

use crate::connection::{connection_for, stokes_from_params, Connection, Family, PIIParams};
use crate::error::PiiError;
use crate::ode::{
    integrate_from_series, lax_compatibility, mat_max_norm, mat_scale, pii_residual,
    IntegrateOptions, SampleSpec, TrajectoryStatus, SIGMA1,
};
use crate::series::{series_coeffs, Truncation};
use crate::specfun::{airy_ai, gamma, log_gamma};
use crate::verifier::{
    calibrate_anchor, scan_pole_free, verify_connection, VerificationReport, VerifyConfig,
};
use crate::{phase_distance, Complex};
use clap::{Parser, Subcommand};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

/// 17 significant digits: round-trips f64 exactly.
fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parse the `a+bi` mini-grammar: `1.5`, `0.3i`, `-0.2i`, `1+2i`, `1-2i`, `i`.
pub fn parse_complex(s: &str) -> Result<Complex, String> {
    let t = s.trim().replace(' ', "");
    if t.is_empty() {
        return Err("empty number".into());
    }
    let parse_part = |p: &str| -> Result<f64, String> {
        match p {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => p.parse::<f64>().map_err(|e| format!("bad number '{p}': {e}")),
        }
    };
    if let Some(body) = t.strip_suffix('i') {
        // find a +/- separating real and imaginary parts (not leading, not
        // part of an exponent)
        let bytes = body.as_bytes();
        let mut split = None;
        for i in (1..bytes.len()).rev() {
            let c = bytes[i] as char;
            if (c == '+' || c == '-') && !matches!(bytes[i - 1] as char, 'e' | 'E') {
                split = Some(i);
                break;
            }
        }
        match split {
            Some(i) => {
                let re = parse_part(&body[..i])?;
                let im = parse_part(&body[i..])?;
                Ok(Complex::new(re, im))
            }
            None => Ok(Complex::new(0.0, parse_part(body)?)),
        }
    } else {
        Ok(Complex::new(
            t.parse::<f64>().map_err(|e| format!("bad number '{t}': {e}"))?,
            0.0,
        ))
    }
}

fn parse_family(s: &str) -> Result<Family, String> {
    match s {
        "real" => Ok(Family::RealAS),
        "imag" => Ok(Family::ImagAS),
        other => Err(format!("unknown family '{other}' (use real|imag)")),
    }
}

/// Shape-checked parameters; the admissibility bound on `k` is checked
/// separately so singular solutions can still be integrated and scanned.
fn params_shape(family: Family, alpha: Complex, k: Complex) -> Result<PIIParams, String> {
    let p = PIIParams { alpha, k, family };
    match family {
        Family::RealAS => {
            if alpha.im != 0.0 || k.im != 0.0 {
                return Err("real family requires real alpha and k".into());
            }
            if alpha.re.abs() >= 0.5 {
                return Err(format!("alpha = {} outside (-1/2, 1/2)", alpha.re));
            }
        }
        Family::ImagAS => {
            if alpha.re != 0.0 || k.re != 0.0 {
                return Err("imaginary family requires purely imaginary alpha and k (write e.g. 0.3i)".into());
            }
        }
    }
    Ok(p)
}

#[derive(Parser)]
#[command(
    name = "pii",
    about = "Ablowitz-Segur solutions of Painleve II: asymptotics, connection formulas, verification",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit series coefficients a_n as CSV.
    Coeffs {
        /// alpha (real or `0.3i` form)
        #[arg(long)]
        alpha: String,
        /// Highest coefficient index (<= 50)
        #[arg(long = "n-max", default_value_t = 20)]
        n_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print connection data (d, phi, nu, Stokes multipliers) as JSON.
    Connect {
        #[arg(long, default_value = "real")]
        family: String,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        k: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the equation and write sampled (x, u, u') rows as CSV.
    Integrate {
        #[arg(long, default_value = "real")]
        family: String,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        k: String,
        #[arg(long, default_value_t = 15.0)]
        x0: f64,
        #[arg(long = "x-end", default_value_t = -150.0, allow_hyphen_values = true)]
        x_end: f64,
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the connection formulas end to end; JSON report.
    Verify {
        #[arg(long, default_value = "real")]
        family: String,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        k: String,
        #[arg(long, default_value_t = 15.0)]
        x0: f64,
        #[arg(long = "x-end", default_value_t = -150.0, allow_hyphen_values = true)]
        x_end: f64,
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
        #[arg(long, default_value_t = 24)]
        stations: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pole-free scan over a parameter grid; CSV or JSON table.
    Scan {
        #[arg(long, default_value = "real")]
        family: String,
        /// Grid spec: `alphas=-0.4,0,0.3;rs=0,0.6,-0.9` (real family,
        /// k = r cos(pi alpha)) or `alphas=0,0.3;ks=0.3,1` (imaginary,
        /// values are the imaginary parts). Default: the acceptance grid.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 15.0)]
        x0: f64,
        #[arg(long = "x-end", default_value_t = -60.0, allow_hyphen_values = true)]
        x_end: f64,
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zero-curvature residual over random draws; prints the max residual.
    Laxcheck {
        /// Fix lambda (complex); otherwise draws |lambda| in [0.1, 10].
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<String>,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[arg(long, default_value_t = 0x5EED_2026)]
        seed: u64,
    },
    /// Run the module invariants and report a pass/fail summary.
    Selftest,
}

struct Diag(String);

impl From<String> for Diag {
    fn from(s: String) -> Self {
        Diag(s)
    }
}
impl From<PiiError> for Diag {
    fn from(e: PiiError) -> Self {
        Diag(e.to_string())
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), Diag> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| Diag(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Deterministic xorshift-style generator for the lax draws.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

fn cmd_coeffs(alpha: &str, n_max: usize, out: &Option<PathBuf>) -> Result<i32, Diag> {
    let alpha = parse_complex(alpha).map_err(Diag)?;
    if n_max > 50 {
        return Err(Diag(format!("n-max = {n_max} exceeds 50")));
    }
    // family-admissible alpha only: real in (-1/2, 1/2) or purely imaginary
    if alpha.im == 0.0 {
        if alpha.re.abs() >= 0.5 {
            return Err(Diag(format!("alpha = {} outside (-1/2, 1/2)", alpha.re)));
        }
    } else if alpha.re != 0.0 {
        return Err(Diag("alpha must be real or purely imaginary".into()));
    }
    let coeffs = series_coeffs(alpha, n_max);
    let mut s = String::from("n,a_n\n");
    for (n, a) in coeffs.coeffs.iter().enumerate() {
        // a_n is real for admissible alpha
        let _ = writeln!(s, "{n},{}", fmt17(a.re));
    }
    emit(out, &s)?;
    Ok(0)
}

fn json_complex(buf: &mut String, key: &str, z: Complex) {
    let _ = write!(buf, "\"{key}\":[{},{}]", fmt17(z.re), fmt17(z.im));
}

fn cmd_connect(family: &str, alpha: &str, k: &str, out: &Option<PathBuf>) -> Result<i32, Diag> {
    let family = parse_family(family).map_err(Diag)?;
    let alpha = parse_complex(alpha).map_err(Diag)?;
    let k = parse_complex(k).map_err(Diag)?;
    let p = PIIParams::new(alpha, k, family).map_err(Diag::from)?;
    let conn = connection_for(&p).map_err(Diag::from)?;
    let mut s = String::from("{");
    let _ = write!(s, "\"family\":\"{}\",", family.as_str());
    match family {
        Family::RealAS => {
            let _ = write!(s, "\"alpha\":{},\"k\":{},", fmt17(alpha.re), fmt17(k.re));
        }
        Family::ImagAS => {
            let _ = write!(s, "\"alpha_im\":{},\"k_im\":{},", fmt17(alpha.im), fmt17(k.im));
        }
    }
    match conn {
        Connection::Trivial => {
            let _ = write!(s, "\"trivial\":true}}");
        }
        Connection::Data(cd) => {
            match family {
                Family::RealAS => {
                    let _ = write!(s, "\"d\":{},", fmt17(cd.d.re));
                }
                Family::ImagAS => {
                    let _ = write!(s, "\"d_im\":{},", fmt17(cd.d.im));
                }
            }
            let _ = write!(s, "\"phi\":{},\"nu_im\":{},", fmt17(cd.phi), fmt17(cd.nu.im));
            let st = stokes_from_params(&p).map_err(Diag::from)?;
            s.push_str("\"stokes\":{");
            json_complex(&mut s, "s1", st.s1);
            s.push(',');
            json_complex(&mut s, "s2", st.s2);
            s.push(',');
            json_complex(&mut s, "s3", st.s3);
            s.push_str("}}");
        }
    }
    s.push('\n');
    emit(out, &s)?;
    Ok(0)
}

fn cmd_integrate(
    family: &str,
    alpha: &str,
    k: &str,
    x0: f64,
    x_end: f64,
    tol: f64,
    out: &Option<PathBuf>,
) -> Result<i32, Diag> {
    let family = parse_family(family).map_err(Diag)?;
    let alpha = parse_complex(alpha).map_err(Diag)?;
    let k = parse_complex(k).map_err(Diag)?;
    let p = params_shape(family, alpha, k).map_err(Diag)?;
    let opts = IntegrateOptions {
        tol,
        sample: SampleSpec::Uniform { dx: 0.25 },
        ..Default::default()
    };
    let res = integrate_from_series(&p, x0, x_end, 0.0, &opts).map_err(Diag::from)?;
    let traj = res.trajectory;
    let mut s = String::new();
    match family {
        Family::RealAS => {
            s.push_str("x,u,u_prime\n");
            for st in &traj.samples {
                let _ = writeln!(s, "{},{},{}", fmt17(st.x), fmt17(st.u.re), fmt17(st.up.re));
            }
        }
        Family::ImagAS => {
            s.push_str("x,u_im,u_prime_im,v,v_prime\n");
            for st in &traj.samples {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    fmt17(st.x),
                    fmt17(st.u.im),
                    fmt17(st.up.im),
                    fmt17(st.u.im),
                    fmt17(st.up.im)
                );
            }
        }
    }
    match traj.status {
        TrajectoryStatus::Completed => {
            emit(out, &s)?;
            Ok(0)
        }
        TrajectoryStatus::PoleDetected { x_pole } => {
            // rows only reach the pole; keep the file if requested
            if out.is_some() {
                emit(out, &s)?;
            }
            Err(Diag(format!("pole detected near x = {x_pole}")))
        }
        TrajectoryStatus::ToleranceFailure { x } => {
            Err(Diag(format!("tolerance failure at x = {x}")))
        }
    }
}

fn report_json(rep: &VerificationReport, cfg: &VerifyConfig) -> String {
    let mut s = String::from("{");
    let p = rep.params;
    let _ = write!(s, "\"family\":\"{}\",", p.family.as_str());
    match p.family {
        Family::RealAS => {
            let _ = write!(s, "\"alpha\":{},\"k\":{},", fmt17(p.alpha.re), fmt17(p.k.re));
        }
        Family::ImagAS => {
            let _ = write!(
                s,
                "\"alpha_im\":{},\"k_im\":{},",
                fmt17(p.alpha.im),
                fmt17(p.k.im)
            );
        }
    }
    let _ = write!(s, "\"pass\":{},", rep.pass);
    if let Connection::Data(cd) = rep.predicted {
        match p.family {
            Family::RealAS => {
                let _ = write!(s, "\"d_pred\":{},", fmt17(cd.d.re));
            }
            Family::ImagAS => {
                let _ = write!(s, "\"d_pred_im\":{},", fmt17(cd.d.im));
            }
        }
        let _ = write!(s, "\"phi_pred\":{},\"nu_im\":{},", fmt17(cd.phi), fmt17(cd.nu.im));
    }
    if let Some(f) = &rep.fitted {
        match p.family {
            Family::RealAS => {
                let _ = write!(s, "\"d_fit\":{},", fmt17(f.d_fit.re));
            }
            Family::ImagAS => {
                let _ = write!(s, "\"d_fit_im\":{},", fmt17(f.d_fit.im));
            }
        }
        let _ = write!(
            s,
            "\"phi_fit\":{},\"fit_residual\":{},\"stations\":{},",
            fmt17(f.phi_fit),
            fmt17(f.fit_residual),
            f.stations.len()
        );
    }
    let _ = write!(
        s,
        "\"err_d_rel\":{},\"err_phi_abs\":{},\"anchor\":{},",
        fmt17(rep.err_d_rel),
        fmt17(rep.err_phi_abs),
        fmt17(rep.anchor)
    );
    let status = match rep.pole_status {
        TrajectoryStatus::Completed => "completed".to_string(),
        TrajectoryStatus::PoleDetected { x_pole } => format!("pole@{}", fmt17(x_pole)),
        TrajectoryStatus::ToleranceFailure { x } => format!("tolfail@{}", fmt17(x)),
    };
    let _ = write!(
        s,
        "\"pole_status\":\"{status}\",\"x0\":{},\"x_end\":{},\"tol\":{}}}",
        fmt17(cfg.x0),
        fmt17(cfg.x_end),
        fmt17(cfg.tol)
    );
    s.push('\n');
    s
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    family: &str,
    alpha: &str,
    k: &str,
    x0: f64,
    x_end: f64,
    tol: f64,
    stations: usize,
    out: &Option<PathBuf>,
) -> Result<i32, Diag> {
    let family = parse_family(family).map_err(Diag)?;
    let alpha = parse_complex(alpha).map_err(Diag)?;
    let k = parse_complex(k).map_err(Diag)?;
    let p = params_shape(family, alpha, k).map_err(Diag)?;
    let cfg = VerifyConfig {
        x0,
        x_end,
        tol,
        stations,
        ..Default::default()
    };
    if p.validate().is_ok() {
        let rep = verify_connection(&p, &cfg).map_err(Diag::from)?;
        if let TrajectoryStatus::PoleDetected { x_pole } = rep.pole_status {
            return Err(Diag(format!(
                "unexpected pole at x = {x_pole} for admissible parameters"
            )));
        }
        emit(out, &report_json(&rep, &cfg))?;
        Ok(if rep.pass { 0 } else { 1 })
    } else {
        // outside the family bounds: integrate and report the pole
        let opts = IntegrateOptions {
            tol,
            sample: SampleSpec::EndpointsOnly,
            ..Default::default()
        };
        let res = integrate_from_series(&p, x0, x_end, 0.0, &opts).map_err(Diag::from)?;
        match res.trajectory.status {
            TrajectoryStatus::PoleDetected { x_pole } => Err(Diag(format!(
                "pole detected near x = {x_pole} (singular parameter regime)"
            ))),
            _ => Err(Diag(
                "parameters outside the family bounds; no connection data to verify".into(),
            )),
        }
    }
}

/// Parse `alphas=...;rs=...` / `alphas=...;ks=...`.
fn parse_grid(family: Family, spec: &str) -> Result<Vec<PIIParams>, String> {
    let mut alphas: Vec<f64> = Vec::new();
    let mut rs: Vec<f64> = Vec::new();
    let mut ks: Vec<f64> = Vec::new();
    for part in spec.split(';') {
        let (key, vals) = part
            .split_once('=')
            .ok_or_else(|| format!("bad grid component '{part}'"))?;
        let list: Result<Vec<f64>, _> = vals.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let list = list.map_err(|e| format!("bad grid list '{vals}': {e}"))?;
        match key.trim() {
            "alphas" => alphas = list,
            "rs" => rs = list,
            "ks" => ks = list,
            other => return Err(format!("unknown grid key '{other}'")),
        }
    }
    if alphas.is_empty() {
        return Err("grid needs alphas=...".into());
    }
    let mut grid = Vec::new();
    match family {
        Family::RealAS => {
            if rs.is_empty() && ks.is_empty() {
                return Err("grid needs rs=... (k = r cos(pi alpha)) or ks=...".into());
            }
            for &a in &alphas {
                if !rs.is_empty() {
                    for &r in &rs {
                        grid.push(PIIParams {
                            alpha: Complex::new(a, 0.0),
                            k: Complex::new(r * (PI * a).cos(), 0.0),
                            family,
                        });
                    }
                } else {
                    for &kk in &ks {
                        grid.push(PIIParams {
                            alpha: Complex::new(a, 0.0),
                            k: Complex::new(kk, 0.0),
                            family,
                        });
                    }
                }
            }
        }
        Family::ImagAS => {
            if ks.is_empty() {
                return Err("imaginary-family grid needs ks=... (imaginary parts)".into());
            }
            for &a in &alphas {
                for &kk in &ks {
                    grid.push(PIIParams {
                        alpha: Complex::new(0.0, a),
                        k: Complex::new(0.0, kk),
                        family,
                    });
                }
            }
        }
    }
    Ok(grid)
}

/// The acceptance scan grid: criterion-1 alphas times r in
/// {0, ±0.2, ±0.6, ±0.9, ±0.95}.
pub fn default_scan_grid() -> Vec<PIIParams> {
    let alphas = [-0.4, -0.25, 0.0, 0.1, 0.3, 0.45];
    let rs = [0.0, 0.2, -0.2, 0.6, -0.6, 0.9, -0.9, 0.95, -0.95];
    let mut grid = Vec::new();
    for &a in &alphas {
        for &r in &rs {
            grid.push(PIIParams {
                alpha: Complex::new(a, 0.0),
                k: Complex::new(r * (PI * a).cos(), 0.0),
                family: Family::RealAS,
            });
        }
    }
    grid
}

fn cmd_scan(
    family: &str,
    grid: &Option<String>,
    x0: f64,
    x_end: f64,
    tol: f64,
    format: &str,
    out: &Option<PathBuf>,
) -> Result<i32, Diag> {
    let family = parse_family(family).map_err(Diag)?;
    let grid = match grid {
        Some(spec) => parse_grid(family, spec).map_err(Diag)?,
        None => default_scan_grid(),
    };
    let rows = scan_pole_free(&grid, (x_end, x0), tol).map_err(Diag::from)?;
    let mut s = String::new();
    match format {
        "csv" => {
            s.push_str("family,alpha_re,alpha_im,k_re,k_im,status,x_pole\n");
            for row in &rows {
                let p = row.params;
                let (status, x_pole) = match row.status {
                    TrajectoryStatus::Completed => ("completed", String::new()),
                    TrajectoryStatus::PoleDetected { x_pole } => ("pole", fmt17(x_pole)),
                    TrajectoryStatus::ToleranceFailure { .. } => ("tolerance_failure", String::new()),
                };
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{status},{x_pole}",
                    p.family.as_str(),
                    fmt17(p.alpha.re),
                    fmt17(p.alpha.im),
                    fmt17(p.k.re),
                    fmt17(p.k.im)
                );
            }
        }
        "json" => {
            s.push_str("[");
            for (i, row) in rows.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let p = row.params;
                s.push('{');
                let _ = write!(s, "\"family\":\"{}\",", p.family.as_str());
                json_complex(&mut s, "alpha", p.alpha);
                s.push(',');
                json_complex(&mut s, "k", p.k);
                match row.status {
                    TrajectoryStatus::Completed => s.push_str(",\"status\":\"completed\"}"),
                    TrajectoryStatus::PoleDetected { x_pole } => {
                        let _ = write!(s, ",\"status\":\"pole\",\"x_pole\":{}}}", fmt17(x_pole));
                    }
                    TrajectoryStatus::ToleranceFailure { .. } => {
                        s.push_str(",\"status\":\"tolerance_failure\"}")
                    }
                }
            }
            s.push_str("]\n");
        }
        other => return Err(Diag(format!("unknown format '{other}' (csv|json)"))),
    }
    emit(out, &s)?;
    Ok(0)
}

fn cmd_laxcheck(lambda: &Option<String>, draws: usize, seed: u64) -> Result<i32, Diag> {
    let fixed = match lambda {
        Some(l) => Some(parse_complex(l).map_err(Diag)?),
        None => None,
    };
    let mut rng = SplitMix64(seed);
    let mut max_resid = 0.0_f64;
    for _ in 0..draws {
        let x = rng.range(-5.0, 5.0);
        let u = Complex::new(rng.range(-0.8, 0.8), rng.range(-0.8, 0.8));
        let up = Complex::new(rng.range(-0.8, 0.8), rng.range(-0.8, 0.8));
        let upp = Complex::new(rng.range(-0.8, 0.8), rng.range(-0.8, 0.8));
        let alpha = Complex::new(rng.range(-0.45, 0.45), rng.range(-0.45, 0.45));
        let lam = fixed.unwrap_or_else(|| {
            let r = 0.1 * (10.0_f64 / 0.1).powf(rng.uniform());
            let th = rng.range(0.0, 2.0 * PI);
            Complex::new(r * th.cos(), r * th.sin())
        });
        let m = lax_compatibility(x, u, up, upp, alpha, lam).map_err(Diag::from)?;
        let r = pii_residual(x, u, upp, alpha);
        let expect = mat_scale(&SIGMA1, -r * 2.0);
        let resid = mat_max_norm(&crate::ode::mat_sub(&m, &expect));
        max_resid = max_resid.max(resid);
    }
    println!("max |M + 2 R sigma1| = {} over {draws} draws", fmt17(max_resid));
    Ok(if max_resid <= 1e-12 { 0 } else { 1 })
}

fn cmd_selftest() -> Result<i32, Diag> {
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    };

    // Airy equation residual (five-point second difference)
    {
        let mut worst = 0.0_f64;
        let h = 1e-3;
        let mut x = 8.0;
        while x <= 20.0 {
            let f = |t: f64| airy_ai(t).unwrap().ai;
            let d2 = (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h)
                - f(x + 2.0 * h))
                / (12.0 * h * h);
            worst = worst.max((d2 - x * f(x)).abs() / f(x));
            x += 1.0;
        }
        check("airy-equation", worst <= 1e-8, format!("max residual {worst:.2e}"));
    }
    // Gamma reflection on the imaginary axis
    {
        let mut worst = 0.0_f64;
        let mut tau = 0.01;
        while tau <= 3.0 {
            let nu = Complex::new(0.0, tau);
            let lhs = gamma(nu).unwrap() * gamma(-nu).unwrap();
            let rhs = -Complex::new(PI, 0.0) / (nu * (nu * PI).sin());
            worst = worst.max((lhs - rhs).norm() / rhs.norm());
            tau += 0.05;
        }
        check("gamma-reflection", worst <= 1e-10, format!("max rel {worst:.2e}"));
    }
    // Gamma recurrence
    {
        let mut rng = SplitMix64(7);
        let mut worst = 0.0_f64;
        for _ in 0..50 {
            let z = Complex::new(rng.range(1.0, 3.0), rng.range(-20.0, 20.0));
            let r = (log_gamma(z + 1.0).unwrap() - log_gamma(z).unwrap()).exp();
            worst = worst.max((r - z).norm() / z.norm());
        }
        check("gamma-recurrence", worst <= 1e-12, format!("max rel {worst:.2e}"));
    }
    // series: a1, a2 and evenness
    {
        let a = series_coeffs(Complex::new(0.3, 0.0), 20);
        let b = series_coeffs(Complex::new(-0.3, 0.0), 20);
        let a2 = 0.09;
        let ok1 = (a.coeffs[1].re - (2.0 - 2.0 * a2)).abs() < 1e-14;
        let ok2 = (a.coeffs[2].re - (2.0 - 2.0 * a2) * (20.0 - 6.0 * a2)).abs() < 1e-12;
        let even = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .all(|(x, y)| x == y);
        check("series-coefficients", ok1 && ok2 && even, String::new());
    }
    // Stokes constraint + d^2 = 2 i nu over a small grid
    {
        let mut worst_c = 0.0_f64;
        let mut worst_d = 0.0_f64;
        for &(al, r) in &[(0.25, 0.3), (-0.4, 0.9), (0.45, -0.6), (0.1, 0.0)] {
            let k = r * (PI * al).cos();
            if al == 0.0 && k == 0.0 {
                continue;
            }
            let p = PIIParams::real(al, k).unwrap();
            let st = stokes_from_params(&p).unwrap();
            worst_c = worst_c.max(st.constraint_residual(p.alpha).norm());
            if let Connection::Data(cd) = connection_for(&p).unwrap() {
                worst_d = worst_d
                    .max((cd.d * cd.d - Complex::i() * cd.nu * 2.0).norm());
            }
        }
        check(
            "stokes-and-nu",
            worst_c <= 1e-14 && worst_d <= 1e-12,
            format!("constraint {worst_c:.2e}, d^2-2inu {worst_d:.2e}"),
        );
    }
    // Lemma leading term vs closed form
    {
        let p = PIIParams::real(0.25, 0.3).unwrap();
        let cd = *connection_for(&p).unwrap().data().unwrap();
        let x = -80.0;
        let s = 80.0_f64;
        let lead = crate::connection::oscillatory_leading_term(x, &p).unwrap();
        let th = 2.0 / 3.0 * s.powf(1.5) - 0.75 * cd.d.re * cd.d.re * s.ln() + cd.phi;
        let closed = cd.d.re * s.powf(-0.25) * th.cos();
        let ok = (lead.re - closed).abs() <= 1e-10 * (cd.d.re * s.powf(-0.25));
        check("leading-term", ok, String::new());
    }
    // Lax residual draws
    {
        let mut rng = SplitMix64(11);
        let mut worst = 0.0_f64;
        for _ in 0..200 {
            let x = rng.range(-5.0, 5.0);
            let u = Complex::new(rng.range(-0.8, 0.8), rng.range(-0.8, 0.8));
            let up = Complex::new(rng.range(-0.8, 0.8), rng.range(-0.8, 0.8));
            let upp = Complex::new(rng.range(-0.8, 0.8), rng.range(-0.8, 0.8));
            let alpha = Complex::new(rng.range(-0.45, 0.45), 0.0);
            let r = 0.1 * (10.0_f64 / 0.1).powf(rng.uniform());
            let th = rng.range(0.0, 2.0 * PI);
            let lam = Complex::new(r * th.cos(), r * th.sin());
            let m = lax_compatibility(x, u, up, upp, alpha, lam).unwrap();
            let expect = mat_scale(&SIGMA1, -pii_residual(x, u, upp, alpha) * 2.0);
            worst = worst.max(mat_max_norm(&crate::ode::mat_sub(&m, &expect)));
        }
        check("lax-zero-curvature", worst <= 1e-12, format!("max {worst:.2e}"));
    }
    // homogeneous end-to-end verification
    {
        let p = PIIParams::real(0.0, 0.5).unwrap();
        match verify_connection(&p, &VerifyConfig::default()) {
            Ok(rep) => check(
                "verify-homogeneous",
                rep.pass,
                format!("err_d {:.2e}, err_phi {:.2e}", rep.err_d_rel, rep.err_phi_abs),
            ),
            Err(e) => check("verify-homogeneous", false, e.to_string()),
        }
    }
    // anchored inhomogeneous verification
    {
        let p = PIIParams::real(0.25, 0.3).unwrap();
        match verify_connection(&p, &VerifyConfig::default()) {
            Ok(rep) => check(
                "verify-inhomogeneous",
                rep.pass,
                format!(
                    "err_d {:.2e}, err_phi {:.2e}, anchor {:.3e}",
                    rep.err_d_rel, rep.err_phi_abs, rep.anchor
                ),
            ),
            Err(e) => check("verify-inhomogeneous", false, e.to_string()),
        }
    }
    println!("selftest: {}", if all_ok { "ALL PASS" } else { "FAILURES" });
    Ok(if all_ok { 0 } else { 1 })
}

/// Entry point used by the `pii` binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // keep clap's own exit-code convention (2 on usage errors) but a
            // single diagnostic line on stderr
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("argument error");
            if e.use_stderr() {
                eprintln!("{first}");
                return 2;
            }
            // --help / --version go to stdout in full
            print!("{msg}");
            return 0;
        }
    };
    let result = match &cli.cmd {
        Cmd::Coeffs { alpha, n_max, out } => cmd_coeffs(alpha, *n_max, out),
        Cmd::Connect {
            family,
            alpha,
            k,
            out,
        } => cmd_connect(family, alpha, k, out),
        Cmd::Integrate {
            family,
            alpha,
            k,
            x0,
            x_end,
            tol,
            out,
        } => cmd_integrate(family, alpha, k, *x0, *x_end, *tol, out),
        Cmd::Verify {
            family,
            alpha,
            k,
            x0,
            x_end,
            tol,
            stations,
            out,
        } => cmd_verify(family, alpha, k, *x0, *x_end, *tol, *stations, out),
        Cmd::Scan {
            family,
            grid,
            x0,
            x_end,
            tol,
            format,
            out,
        } => cmd_scan(family, grid, *x0, *x_end, *tol, format, out),
        Cmd::Laxcheck {
            lambda,
            draws,
            seed,
        } => cmd_laxcheck(lambda, *draws, *seed),
        Cmd::Selftest => cmd_selftest(),
    };
    match result {
        Ok(code) => code,
        Err(Diag(msg)) => {
            // pole diagnostics carry exit code 3, parse/domain errors 2
            let code = if msg.contains("pole detected") || msg.contains("unexpected pole") {
                3
            } else {
                2
            };
            eprintln!("{msg}");
            code
        }
    }
}

/// Calibration helper shared with external tooling/tests.
pub fn anchor_for(p: &PIIParams, x0: f64, tol: f64) -> Result<f64, PiiError> {
    calibrate_anchor(p, x0, tol)
}

#[allow(unused_imports)]
use crate::ode::mat_sub;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parser_grammar() {
        assert_eq!(parse_complex("1.5").unwrap(), Complex::new(1.5, 0.0));
        assert_eq!(parse_complex("0.3i").unwrap(), Complex::new(0.0, 0.3));
        assert_eq!(parse_complex("-0.2i").unwrap(), Complex::new(0.0, -0.2));
        assert_eq!(parse_complex("1+2i").unwrap(), Complex::new(1.0, 2.0));
        assert_eq!(parse_complex("1-2i").unwrap(), Complex::new(1.0, -2.0));
        assert_eq!(parse_complex("i").unwrap(), Complex::new(0.0, 1.0));
        assert_eq!(parse_complex("-i").unwrap(), Complex::new(0.0, -1.0));
        assert_eq!(parse_complex("1e-3i").unwrap(), Complex::new(0.0, 1e-3));
        assert_eq!(
            parse_complex("2.5e-1+1e-2i").unwrap(),
            Complex::new(0.25, 0.01)
        );
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn fmt17_roundtrips_bits() {
        for &v in &[
            0.1,
            std::f64::consts::PI,
            -2.2250738585072014e-308,
            0.302609,
            1.0 / 3.0,
        ] {
            let s = fmt17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn splitmix_deterministic() {
        let mut a = SplitMix64(42);
        let mut b = SplitMix64(42);
        for _ in 0..10 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn grid_parser() {
        let g = parse_grid(Family::RealAS, "alphas=0,0.25;rs=0.2,-0.2").unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[3].k.re - (-0.2 * (PI * 0.25).cos())).abs() < 1e-15);
        let g = parse_grid(Family::ImagAS, "alphas=0.3;ks=0.5,1.0").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].alpha, Complex::new(0.0, 0.3));
        assert!(parse_grid(Family::RealAS, "alphas=0").is_err());
        assert!(parse_grid(Family::RealAS, "junk").is_err());
    }

    #[test]
    fn phase_distance_helper_in_scope() {
        assert!(phase_distance(0.0, 2.0 * PI) < 1e-12);
    }
}
