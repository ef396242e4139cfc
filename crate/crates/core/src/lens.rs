//! Traveling-wave (slow-wave structure) lens.
//!
//! A charged packet co-propagating with a longitudinal traveling wave of
//! phase velocity `v_p` accumulates the phase
//!
//! ```text
//! Gamma(xi) = -(q E0 L / hbar w_m) * R * sinc(dphi/2) * cos(k_m xi + dphi/2 + theta)
//! R         = (c^2/(v_p v_g) - 1) / (c^2/v_p^2 - 1)
//! dphi      = w_m L (1/v_p - 1/v_g)
//! ```
//!
//! which near a potential extremum is a quadratic phase, i.e. a thin lens of
//! focal length `f = k0 / (Gamma0 k_m^2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carrier::CarrierState;
use crate::envelope::SampledEnvelope;
use crate::error::{Error, Result};
use crate::units::PhysicalContext;

/// How the slow-wave phase velocity is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseVelocity {
    /// Explicit `v_p`.
    Explicit(f64),
    /// Slowing factor `n`, `v_p = c / n`.
    SlowFactor(f64),
    /// `v_p` equal to the carrier group velocity (no walkoff).
    Matched,
}

/// Inputs of [`build_lens`], in the context's internal units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensParams {
    pub e0: f64,
    pub omega_m: f64,
    pub phase_velocity: PhaseVelocity,
    pub length: f64,
}

/// Slow-wave structure parameters and the potentials / phases derived from
/// them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensSpec {
    pub e0: f64,
    pub omega_m: f64,
    pub k_m: f64,
    pub v_p: f64,
    pub slow_factor_n: f64,
    pub length: f64,
    pub theta: f64,
    pub a0: f64,
    pub phi0: f64,
    /// `|q| E0 L / (hbar w_m)`.
    pub gamma0: f64,
    pub delta_phi: f64,
    pub lambda_m: f64,
    pub ctx: PhysicalContext,
    pub carrier: CarrierState,
}

/// Focal length of a lens; zero phase deviation has no focus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocalLength {
    Finite(f64),
    Infinite,
}

impl FocalLength {
    pub fn value(&self) -> Option<f64> {
        match *self {
            FocalLength::Finite(f) => Some(f),
            FocalLength::Infinite => None,
        }
    }
}

/// Derived lens figures of merit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensDesign {
    pub focal_length: FocalLength,
    pub f_number: Option<f64>,
    /// Effective aperture `1 / k_m`.
    pub aperture: f64,
    /// `lambda0 * f#`.
    pub resolution_input_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LensMode {
    /// Full traveling-wave phase `Gamma(xi)`.
    FullCosine,
    /// Thin-lens phase `-k0 xi^2 / 2f`.
    Quadratic,
}

/// Window applied at the lens plane, centered on `xi = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aperture {
    /// Rect window of full width `width`.
    Hard { width: f64 },
    /// Raised-cosine window: unit transmission inside `(1 - rolloff) width / 2`,
    /// half amplitude at `width / 2`, zero beyond `(1 + rolloff) width / 2`.
    RaisedCosine { width: f64, rolloff: f64 },
}

impl Aperture {
    /// Hard window of width `1 / k_m`.
    pub fn default_for(spec: &LensSpec) -> Self {
        Aperture::Hard {
            width: 1.0 / spec.k_m,
        }
    }

    pub fn width(&self) -> f64 {
        match *self {
            Aperture::Hard { width } | Aperture::RaisedCosine { width, .. } => width,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Aperture::Hard { width } => Aperture::Hard {
                width: width * factor,
            },
            Aperture::RaisedCosine { width, rolloff } => Aperture::RaisedCosine {
                width: width * factor,
                rolloff,
            },
        }
    }

    /// Transmission averaged over the grid cell `[xi - step/2, xi + step/2]`.
    /// For the hard window this is the covered fraction of the cell, so the
    /// sampled window has the exact width `sum(t) * step` on any grid.
    pub fn cell_transmission(&self, xi: f64, step: f64) -> f64 {
        match *self {
            Aperture::Hard { width } => {
                let lo = (xi - 0.5 * step).max(-0.5 * width);
                let hi = (xi + 0.5 * step).min(0.5 * width);
                ((hi - lo) / step).clamp(0.0, 1.0)
            }
            Aperture::RaisedCosine { .. } => self.transmission(xi),
        }
    }

    pub fn transmission(&self, xi: f64) -> f64 {
        let x = xi.abs();
        match *self {
            Aperture::Hard { width } => {
                if x <= 0.5 * width {
                    1.0
                } else {
                    0.0
                }
            }
            Aperture::RaisedCosine { width, rolloff } => {
                let lo = 0.5 * width * (1.0 - rolloff);
                let hi = 0.5 * width * (1.0 + rolloff);
                if x <= lo {
                    1.0
                } else if x >= hi {
                    0.0
                } else {
                    0.5 * (1.0 + (PI * (x - lo) / (hi - lo)).cos())
                }
            }
        }
    }
}

/// Builds the lens from field amplitude, modulation frequency, phase
/// velocity and interaction length.
pub fn build_lens(
    params: &LensParams,
    ctx: &PhysicalContext,
    carrier: &CarrierState,
) -> Result<LensSpec> {
    let LensParams {
        e0,
        omega_m,
        phase_velocity,
        length,
    } = *params;
    if !(e0 >= 0.0) || !e0.is_finite() {
        return Err(Error::invalid("e0", "field amplitude must be >= 0"));
    }
    if !(omega_m > 0.0) || !omega_m.is_finite() {
        return Err(Error::invalid("omega_m", "must be positive"));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::invalid(
            "length",
            "interaction length must be positive",
        ));
    }
    if ctx.charge == 0.0 {
        return Err(Error::invalid("charge", "a neutral particle sees no lens"));
    }
    let c = ctx.c_light;
    let v_p = match phase_velocity {
        PhaseVelocity::Explicit(v) => v,
        PhaseVelocity::SlowFactor(n) => {
            if !(n > 0.0) {
                return Err(Error::invalid("n", "slowing factor must be positive"));
            }
            c / n
        }
        PhaseVelocity::Matched => carrier.v_group,
    };
    if !(v_p > 0.0) {
        return Err(Error::invalid("v_p", "phase velocity must be positive"));
    }
    if v_p >= c {
        return Err(Error::NotSlowWave { v_p, c });
    }
    let v_g = carrier.v_group;
    let k_m = omega_m / v_p;
    let a0 = e0 / (omega_m * (c * c / (v_p * v_p) - 1.0));
    let delta_phi = if v_p == v_g {
        0.0
    } else {
        omega_m * length * (1.0 / v_p - 1.0 / v_g)
    };
    if delta_phi != 0.0 {
        log::info!(
            "lens not velocity matched: v_p = {v_p:.6e}, v_g = {v_g:.6e}, dphi = {delta_phi:.4e}"
        );
    }
    Ok(LensSpec {
        e0,
        omega_m,
        k_m,
        v_p,
        slow_factor_n: c / v_p,
        length,
        theta: if ctx.charge > 0.0 { PI } else { 0.0 },
        a0,
        phi0: k_m * c * c / omega_m * a0,
        gamma0: ctx.charge.abs() * e0 * length / (ctx.hbar * omega_m),
        delta_phi,
        lambda_m: 2.0 * PI / k_m,
        ctx: *ctx,
        carrier: *carrier,
    })
}

/// Velocity-matched lens with modulation wavenumber `k_m` and interaction
/// length `length`, with the field amplitude chosen so that the focal length
/// equals `focal_length`.
pub fn matched_lens_for_focal_length(
    ctx: &PhysicalContext,
    carrier: &CarrierState,
    k_m: f64,
    focal_length: f64,
    length: f64,
) -> Result<LensSpec> {
    if !(focal_length > 0.0) || !focal_length.is_finite() {
        return Err(Error::invalid(
            "focal_length",
            "must be positive and finite",
        ));
    }
    if !(k_m > 0.0) {
        return Err(Error::invalid("k_m", "must be positive"));
    }
    let omega_m = k_m * carrier.v_group;
    let gamma0 = carrier.k0 / (focal_length * k_m * k_m);
    let e0 = gamma0 * ctx.hbar * omega_m / (ctx.charge.abs() * length);
    build_lens(
        &LensParams {
            e0,
            omega_m,
            phase_velocity: PhaseVelocity::Matched,
            length,
        },
        ctx,
        carrier,
    )
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

impl LensSpec {
    /// Replaces the initial phase offset (e.g. `theta + pi` for a diverging lens).
    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn diverging(self) -> Self {
        let theta = self.theta + PI;
        self.with_theta(theta)
    }

    pub fn is_velocity_matched(&self) -> bool {
        self.delta_phi == 0.0
    }

    /// Walkoff reduction `R sinc(dphi/2)` of the peak phase; 1 when matched.
    pub fn walkoff_factor(&self) -> f64 {
        if self.delta_phi == 0.0 {
            return 1.0;
        }
        let c2 = self.ctx.c_light * self.ctx.c_light;
        let v_g = self.carrier.v_group;
        let ratio = (c2 / (self.v_p * v_g) - 1.0) / (c2 / (self.v_p * self.v_p) - 1.0);
        ratio * sinc(0.5 * self.delta_phi)
    }

    /// Amplitude `P` of `Gamma(xi) = P cos(k_m xi + dphi/2 + theta)`.
    fn cosine_amplitude(&self) -> f64 {
        let base = -self.ctx.charge * self.e0 * self.length / (self.ctx.hbar * self.omega_m);
        if self.delta_phi == 0.0 {
            base
        } else {
            base * self.walkoff_factor()
        }
    }

    fn cosine_offset(&self) -> f64 {
        0.5 * self.delta_phi + self.theta
    }

    /// Peak phase deviation with the sign set by charge and `theta`:
    /// `Gamma(xi) ~ signed_gamma0 (1 - (k_m xi)^2 / 2)` near the axis.
    pub fn signed_gamma0(&self) -> f64 {
        -self.ctx.charge * self.e0 * self.length / (self.ctx.hbar * self.omega_m) * self.theta.cos()
    }

    pub fn focal_length(&self) -> FocalLength {
        let g = self.signed_gamma0();
        if g == 0.0 {
            FocalLength::Infinite
        } else {
            FocalLength::Finite(self.carrier.k0 / (g * self.k_m * self.k_m))
        }
    }

    pub fn design(&self) -> LensDesign {
        let focal_length = self.focal_length();
        let f_number = focal_length.value().map(|f| f * self.k_m);
        LensDesign {
            focal_length,
            f_number,
            aperture: 1.0 / self.k_m,
            resolution_input_scale: f_number.map(|n| n.abs() * self.carrier.lambda0),
        }
    }

    /// f-number from the rest energy form `m c^2 / (n^2 |q| E0 L)`, valid
    /// for a velocity-matched lens.
    pub fn f_number_rest_energy(&self) -> Option<f64> {
        if self.e0 == 0.0 {
            return None;
        }
        let ctx = &self.ctx;
        let n = self.slow_factor_n;
        Some(
            ctx.mass * ctx.c_light * ctx.c_light
                / (n * n * ctx.charge.abs() * self.e0 * self.length),
        )
    }
}

/// Closed-form accumulated phase `Gamma(xi)` after the full interaction length.
pub fn accumulated_phase(spec: &LensSpec, xi: f64) -> f64 {
    spec.cosine_amplitude() * (spec.k_m * xi + spec.cosine_offset()).cos()
}

/// `Gamma(xi) - Gamma(0)`, evaluated without cancellation.
fn phase_relative_to_axis(spec: &LensSpec, xi: f64) -> f64 {
    let half = 0.5 * spec.k_m * xi;
    -2.0 * spec.cosine_amplitude() * (spec.cosine_offset() + half).sin() * half.sin()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Direct numerical quadrature of the defining time integral
/// `(q A0 / hbar)(v_g - c^2/v_p) * int_0^{L/v_g} cos(k_m z - w_m t + theta) dt`
/// along the packet trajectory `z = xi + v_g t`.
pub fn phase_integral_oracle(spec: &LensSpec, xi: f64) -> f64 {
    let ctx = &spec.ctx;
    let v_g = spec.carrier.v_group;
    let c2 = ctx.c_light * ctx.c_light;
    let prefactor = ctx.charge * spec.a0 / ctx.hbar * (v_g - c2 / spec.v_p);
    let t_end = spec.length / v_g;
    let panels = 16;
    let nodes = gauss_legendre(24);
    let h = t_end / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for &(x, w) in &nodes {
            let t = mid + 0.5 * h * x;
            let z = xi + v_g * t;
            sum += 0.5 * h * w * (spec.k_m * z - spec.omega_m * t + spec.theta).cos();
        }
    }
    prefactor * sum
}

/// Imprints the lens phase on the envelope. The constant `Gamma(0)` (or
/// `signed_gamma0` in quadratic mode) is added to `global_phase` instead of
/// the samples.
pub fn apply_lens(
    env: &SampledEnvelope,
    spec: &LensSpec,
    mode: LensMode,
    aperture: Option<Aperture>,
) -> Result<SampledEnvelope> {
    env.check_finite()?;
    let samples_per_period = spec.lambda_m / env.grid.xi_step;
    if samples_per_period < 16.0 {
        return Err(Error::ModulationUnderResolved { samples_per_period });
    }
    let (offset, curvature) = match mode {
        LensMode::FullCosine => (accumulated_phase(spec, 0.0), 0.0),
        LensMode::Quadratic => {
            let g = spec.signed_gamma0();
            // k0 / 2f = Gamma0 k_m^2 / 2
            (g, 0.5 * g * spec.k_m * spec.k_m)
        }
    };
    let values = env
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let xi = env.grid.xi(j);
            let phase = match mode {
                LensMode::FullCosine => phase_relative_to_axis(spec, xi),
                LensMode::Quadratic => -curvature * xi * xi,
            };
            let t = aperture.map_or(1.0, |a| a.cell_transmission(xi, env.grid.xi_step));
            v * Complex64::from_polar(t, phase)
        })
        .collect();
    let mut out = env.with_values(values);
    out.global_phase += offset;
    Ok(out)
}

/// Longitudinal force `q E0 sin(k_m xi + theta)` at displacement `xi` from
/// the synchronous point, at the structure entrance.
pub fn restoring_force_sign(spec: &LensSpec, xi: f64) -> f64 {
    spec.ctx.charge * spec.e0 * (spec.k_m * xi + spec.theta).sin()
}
