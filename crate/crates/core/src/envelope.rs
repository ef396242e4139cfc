//! Sampled baseband envelopes, test-input factories and the quadrature
//! metrics (norm, moments, fidelity) used throughout the crate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carrier::CarrierState;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Tail mass outside the central half of the window above which the
/// aliasing guard fires.
pub const TAIL_MASS_THRESHOLD: f64 = 1e-8;

/// Non-fatal numerical guard report attached to an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardWarning {
    /// Operation that produced the warning.
    pub operation: String,
    /// Fraction of the probability mass outside `|xi| <= span/4`.
    pub tail_mass: f64,
}

/// Complex envelope `psi(xi)` on a [`Grid`], stored at baseband.
///
/// Constant phase factors (carrier, `omega0 tau`, lens offset) live in
/// `global_phase` and are never multiplied into `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledEnvelope {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub carrier: CarrierState,
    pub global_phase: f64,
    pub elapsed_time: f64,
    pub warnings: Vec<GuardWarning>,
}

impl SampledEnvelope {
    /// Wraps raw samples. Fails on NaN/Inf or a length that does not match
    /// the grid.
    pub fn from_values(grid: Grid, carrier: CarrierState, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::GridMismatch);
        }
        let env = Self {
            grid,
            values,
            carrier,
            global_phase: 0.0,
            elapsed_time: 0.0,
            warnings: Vec::new(),
        };
        env.check_finite()?;
        Ok(env)
    }

    pub(crate) fn with_values(&self, values: Vec<Complex64>) -> Self {
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self
            .values
            .iter()
            .position(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Returns a copy scaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = norm(self)?;
        if n == 0.0 {
            return Err(Error::invalid("envelope", "zero norm cannot be normalized"));
        }
        let s = n.sqrt().recip();
        Ok(self.with_values(self.values.iter().map(|v| v * s).collect()))
    }

    /// Fraction of `|psi|^2` mass outside the central half of the window.
    pub fn tail_mass(&self) -> f64 {
        let mut outside = 0.0;
        let mut total = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            let p = v.norm_sqr();
            total += p;
            if self.grid.outside_central_half(j) {
                outside += p;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outside / total
        }
    }

    /// Records a warning when the aliasing guard is violated.
    pub(crate) fn guard(mut self, operation: &str) -> Self {
        let tail_mass = self.tail_mass();
        if tail_mass > TAIL_MASS_THRESHOLD {
            log::warn!("{operation}: tail mass {tail_mass:.3e} outside central half of window");
            self.warnings.push(GuardWarning {
                operation: operation.to_string(),
                tail_mass,
            });
        }
        self
    }

    /// Envelope multiplied by `exp(i phase)`; used to build test inputs.
    pub fn with_phase(&self, phase: f64) -> Self {
        let f = Complex64::from_polar(1.0, phase);
        self.with_values(self.values.iter().map(|v| v * f).collect())
    }

    /// Multiplies every sample by `exp(i chirp xi^2)`.
    pub fn with_quadratic_phase(&self, chirp: f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let x = self.grid.xi(j);
                v * Complex64::from_polar(1.0, chirp * x * x)
            })
            .collect();
        self.with_values(values)
    }

    /// Circular shift by `shift` samples (positive moves toward larger xi).
    pub fn shifted(&self, shift: isize) -> Self {
        let n = self.values.len() as isize;
        let values = (0..n)
            .map(|j| self.values[(j - shift).rem_euclid(n) as usize])
            .collect();
        self.with_values(values)
    }
}

fn check_support(env: &SampledEnvelope) -> Result<()> {
    let tail_mass = env.tail_mass();
    if tail_mass > TAIL_MASS_THRESHOLD {
        Err(Error::SupportOverflow { tail_mass })
    } else {
        Ok(())
    }
}

/// Normalized Gaussian `exp(-(xi-center)^2/4 sigma^2 + i chirp (xi-center)^2)`,
/// so that `sigma^2` is the variance of `|psi|^2`.
pub fn make_gaussian(
    grid: &Grid,
    carrier: &CarrierState,
    center: f64,
    sigma: f64,
    chirp: f64,
) -> Result<SampledEnvelope> {
    if !(sigma > 4.0 * grid.xi_step) {
        return Err(Error::Sampling(format!(
            "sigma {sigma:.4e} is not resolved: need sigma > 4 * xi_step = {:.4e}",
            4.0 * grid.xi_step
        )));
    }
    if !(center.abs() + 4.0 * sigma < 0.25 * grid.xi_span) {
        return Err(Error::SupportOverflow {
            tail_mass: gaussian_tail_estimate(center, sigma, 0.25 * grid.xi_span),
        });
    }
    let values = grid
        .xi_values()
        .into_iter()
        .map(|x| {
            let u = x - center;
            Complex64::from_polar((-u * u / (4.0 * sigma * sigma)).exp(), chirp * u * u)
        })
        .collect();
    SampledEnvelope::from_values(*grid, *carrier, values)?.normalized()
}

fn gaussian_tail_estimate(center: f64, sigma: f64, half: f64) -> f64 {
    // |psi|^2 is normal with std sigma; crude upper bound for the report.
    let z = (half - center.abs()) / sigma;
    if z <= 0.0 {
        0.5
    } else {
        (-0.5 * z * z).exp()
    }
}

/// Two Gaussian humps of width `sigma`: the larger at `-sep/2`, the smaller
/// (amplitude `amp_ratio` relative) at `+sep/2`.
pub fn make_asymmetric_pair(
    grid: &Grid,
    carrier: &CarrierState,
    sep: f64,
    sigma: f64,
    amp_ratio: f64,
) -> Result<SampledEnvelope> {
    if !(amp_ratio > 0.0 && amp_ratio <= 1.0) {
        return Err(Error::invalid("amp_ratio", "must lie in (0, 1]"));
    }
    if !(sep > 3.0 * sigma) {
        return Err(Error::HumpsOverlap {
            sep,
            limit: 3.0 * sigma,
        });
    }
    let left = make_gaussian(grid, carrier, -0.5 * sep, sigma, 0.0)?;
    let right = make_gaussian(grid, carrier, 0.5 * sep, sigma, 0.0)?;
    let values = left
        .values
        .iter()
        .zip(&right.values)
        .map(|(l, r)| l + r * amp_ratio)
        .collect();
    SampledEnvelope::from_values(*grid, *carrier, values)?.normalized()
}

/// `sum |psi_j|^2 dxi`.
pub fn norm(env: &SampledEnvelope) -> Result<f64> {
    env.check_finite()?;
    Ok(env.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * env.grid.xi_step)
}

/// Spectral-side norm `sum |psi~_j|^2 dk / 2pi`.
pub fn spectral_norm(env: &SampledEnvelope) -> Result<f64> {
    env.check_finite()?;
    let s = env.grid.spectrum(&env.values);
    Ok(s.iter().map(|v| v.norm_sqr()).sum::<f64>() * env.grid.k_step / (2.0 * PI))
}

/// Centroid of `|psi|^2`.
pub fn centroid(env: &SampledEnvelope) -> Result<f64> {
    let total = norm(env)?;
    if total == 0.0 {
        return Err(Error::invalid("envelope", "zero norm"));
    }
    let dx = env.grid.xi_step;
    let first: f64 = env
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| env.grid.xi(j) * v.norm_sqr())
        .sum::<f64>()
        * dx;
    Ok(first / total)
}

/// Central moment of `|psi|^2` (normalized by the norm).
pub fn central_moment(env: &SampledEnvelope, order: u32) -> Result<f64> {
    let total = norm(env)?;
    if total == 0.0 {
        return Err(Error::invalid("envelope", "zero norm"));
    }
    let mu = centroid(env)?;
    let dx = env.grid.xi_step;
    let m: f64 = env
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| (env.grid.xi(j) - mu).powi(order as i32) * v.norm_sqr())
        .sum::<f64>()
        * dx;
    Ok(m / total)
}

pub fn variance(env: &SampledEnvelope) -> Result<f64> {
    central_moment(env, 2)
}

/// Standardized third moment `mu3 / sigma^3`.
pub fn skewness(env: &SampledEnvelope) -> Result<f64> {
    let var = variance(env)?;
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(central_moment(env, 3)? / var.powf(1.5))
}

/// RMS wavenumber spread of the spectral density about its mean.
pub fn rms_bandwidth(env: &SampledEnvelope) -> Result<f64> {
    env.check_finite()?;
    let s = env.grid.spectrum(&env.values);
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (j, v) in s.iter().enumerate() {
        let k = env.grid.k(j);
        let p = v.norm_sqr();
        m0 += p;
        m1 += k * p;
        m2 += k * k * p;
    }
    if m0 == 0.0 {
        return Err(Error::invalid("envelope", "zero norm"));
    }
    let mean = m1 / m0;
    Ok((m2 / m0 - mean * mean).sqrt())
}

/// `<a|b> = sum conj(a_j) b_j dxi`.
pub fn inner_product(a: &SampledEnvelope, b: &SampledEnvelope) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    a.check_finite()?;
    b.check_finite()?;
    let s: Complex64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(s * a.grid.xi_step)
}

/// `|<a|b>|^2 / (<a|a><b|b>)`, in `[0, 1]` and blind to global phase.
pub fn fidelity(a: &SampledEnvelope, b: &SampledEnvelope) -> Result<f64> {
    let ab = inner_product(a, b)?;
    let aa = norm(a)?;
    let bb = norm(b)?;
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::invalid("envelope", "zero norm in fidelity"));
    }
    Ok((ab.norm_sqr() / (aa * bb)).min(1.0))
}

/// Full width at half maximum of `|psi|^2` around its peak, with linear
/// interpolation of the half-maximum crossings.
pub fn fwhm(env: &SampledEnvelope) -> Result<f64> {
    env.check_finite()?;
    let d = env.density();
    let (peak, pmax) =
        d.iter().copied().enumerate().fold(
            (0, f64::MIN),
            |acc, (j, p)| if p > acc.1 { (j, p) } else { acc },
        );
    if !(pmax > 0.0) {
        return Err(Error::invalid("envelope", "zero density"));
    }
    let half = 0.5 * pmax;
    let dx = env.grid.xi_step;
    let mut hi = peak;
    while hi + 1 < d.len() && d[hi + 1] >= half {
        hi += 1;
    }
    let mut lo = peak;
    while lo > 0 && d[lo - 1] >= half {
        lo -= 1;
    }
    if hi + 1 == d.len() || lo == 0 {
        return Err(Error::SupportOverflow {
            tail_mass: env.tail_mass(),
        });
    }
    let right = env.grid.xi(hi) + dx * (d[hi] - half) / (d[hi] - d[hi + 1]);
    let left = env.grid.xi(lo) - dx * (d[lo] - half) / (d[lo] - d[lo - 1]);
    Ok(right - left)
}

/// `psi(xi / m) / sqrt(|m|)` evaluated from the band-limited (trigonometric)
/// interpolant of the samples. Negative `m` mirrors the envelope.
pub fn rescale(env: &SampledEnvelope, m: f64) -> Result<SampledEnvelope> {
    if m == 0.0 || !m.is_finite() {
        return Err(Error::invalid(
            "magnification",
            "must be finite and nonzero",
        ));
    }
    env.check_finite()?;
    if m == 1.0 {
        return Ok(env.clone());
    }
    let grid = env.grid;
    let n = grid.n_points;
    let mut coeffs = env.values.clone();
    crate::grid::fft_forward(&mut coeffs);
    let cutoff = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max) * 1e-17;
    // Bins that matter, with their signed wavenumbers. The Nyquist bin is
    // split evenly between +k and -k to keep the interpolant real-symmetric.
    let mut bins: Vec<(f64, Complex64)> = Vec::new();
    for (j, c) in coeffs.iter().enumerate() {
        if c.norm() <= cutoff {
            continue;
        }
        if j == n / 2 {
            bins.push((grid.k_max(), c * 0.5));
            bins.push((-grid.k_max(), c * 0.5));
        } else {
            bins.push((grid.k(j), *c));
        }
    }
    let origin = grid.xi(0);
    let half_span = 0.5 * grid.xi_span;
    let amp = (m.abs().sqrt() * n as f64).recip();
    let values = (0..n)
        .map(|j| {
            let x = grid.xi(j) / m;
            if x < origin || x > half_span {
                // Outside the primary period the interpolant is a periodic
                // replica, not part of the envelope.
                return Complex64::new(0.0, 0.0);
            }
            let u = x - origin;
            let s: Complex64 = bins
                .iter()
                .map(|&(k, c)| c * Complex64::from_polar(1.0, k * u))
                .sum();
            s * amp
        })
        .collect();
    let out = env.with_values(values);
    check_support(&out)?;
    Ok(out)
}
