//! Free-particle dispersion of the envelope in the co-moving frame: a
//! quadratic spectral phase `exp(-i coeff k^2)` with `coeff = hbar tau / 2m`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carrier::CarrierState;
use crate::envelope::SampledEnvelope;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::units::PhysicalContext;

/// A stretch of free propagation lasting `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionSegment {
    pub tau: f64,
    /// Lab-frame distance `v_group * tau`, informational.
    pub length: f64,
    /// Quadratic spectral phase coefficient `hbar tau / 2m`.
    pub coeff: f64,
    pub allow_backward: bool,
}

impl DispersionSegment {
    pub fn new(tau: f64, ctx: &PhysicalContext, carrier: &CarrierState) -> Result<Self> {
        Self::build(tau, ctx, carrier, false)
    }

    /// Like [`DispersionSegment::new`] but accepts `tau < 0`, for inverse checks.
    pub fn backward(tau: f64, ctx: &PhysicalContext, carrier: &CarrierState) -> Result<Self> {
        Self::build(tau, ctx, carrier, true)
    }

    /// Segment covering lab distance `length` at the carrier group velocity.
    pub fn from_length(length: f64, ctx: &PhysicalContext, carrier: &CarrierState) -> Result<Self> {
        Self::new(length / carrier.v_group, ctx, carrier)
    }

    fn build(
        tau: f64,
        ctx: &PhysicalContext,
        carrier: &CarrierState,
        allow_backward: bool,
    ) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::invalid("tau", "must be finite"));
        }
        if tau < 0.0 && !allow_backward {
            return Err(Error::invalid(
                "tau",
                "negative propagation time requires allow_backward",
            ));
        }
        Ok(Self {
            tau,
            length: carrier.v_group * tau,
            coeff: ctx.hbar * tau / (2.0 * ctx.mass),
            allow_backward,
        })
    }
}

/// Concatenation of two segments; propagation is a one-parameter semigroup
/// in `tau`, so the coefficients add.
pub fn compose_check(first: &DispersionSegment, second: &DispersionSegment) -> DispersionSegment {
    DispersionSegment {
        tau: first.tau + second.tau,
        length: first.length + second.length,
        coeff: first.coeff + second.coeff,
        allow_backward: first.allow_backward || second.allow_backward,
    }
}

/// Largest spectral phase increment between neighbouring k samples,
/// `2 |coeff| k_max dk`.
pub fn max_phase_step(grid: &Grid, coeff: f64) -> f64 {
    2.0 * coeff.abs() * grid.k_max() * grid.k_step
}

/// Applies the dispersion filter on the baseband k grid.
///
/// The context is accepted for interface symmetry; the filter itself only
/// needs the segment coefficient, which already carries `hbar / 2m`.
pub fn propagate(
    env: &SampledEnvelope,
    seg: &DispersionSegment,
    _ctx: &PhysicalContext,
) -> Result<SampledEnvelope> {
    env.check_finite()?;
    let phase_step = max_phase_step(&env.grid, seg.coeff);
    if phase_step >= PI {
        return Err(Error::DispersionUnderResolved { phase_step });
    }
    let mut out = if seg.coeff == 0.0 {
        env.clone()
    } else {
        let grid = env.grid;
        let mut spec = env.values.clone();
        crate::grid::fft_forward(&mut spec);
        for (j, s) in spec.iter_mut().enumerate() {
            let k = grid.k(j);
            *s *= Complex64::from_polar(1.0, -seg.coeff * k * k);
        }
        crate::grid::fft_inverse(&mut spec);
        env.with_values(spec)
    };
    out.elapsed_time += seg.tau;
    out.global_phase += env.carrier.omega0 * seg.tau;
    Ok(out.guard("propagate"))
}

/// Closed-form dispersing Gaussian with unit norm, centered at `center`:
/// `psi = (2 pi s0^2)^(-1/4) sqrt(s0^2 / s) exp(-(xi - center)^2 / 4 s)`,
/// `s = s0^2 + i hbar tau / 2m`.
pub fn analytic_gaussian(
    grid: &Grid,
    carrier: &CarrierState,
    tau: f64,
    sigma0: f64,
    center: f64,
    ctx: &PhysicalContext,
) -> Result<SampledEnvelope> {
    if !(sigma0 > 0.0) {
        return Err(Error::invalid("sigma0", "must be positive"));
    }
    let s0 = sigma0 * sigma0;
    let s = Complex64::new(s0, ctx.diffusivity() * tau);
    let pref = (2.0 * PI * s0).powf(-0.25) * (Complex64::new(s0, 0.0) / s).sqrt();
    let values = grid
        .xi_values()
        .into_iter()
        .map(|x| {
            let u = x - center;
            pref * (-(u * u) / (4.0 * s)).exp()
        })
        .collect();
    let mut env = SampledEnvelope::from_values(*grid, *carrier, values)?;
    let tail_mass = env.tail_mass();
    if tail_mass > crate::envelope::TAIL_MASS_THRESHOLD {
        return Err(Error::SupportOverflow { tail_mass });
    }
    env.elapsed_time = tau;
    env.global_phase = carrier.omega0 * tau;
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{centroid, fidelity, make_gaussian, norm, variance};
    use proptest::prelude::*;

    fn setup() -> (PhysicalContext, CarrierState, Grid) {
        let ctx = PhysicalContext::dimensionless(1.0, 1e4).unwrap();
        let carrier = CarrierState::from_wavenumber(&ctx, 50.0).unwrap();
        (ctx, carrier, Grid::new(4096, 510.0).unwrap())
    }

    #[test]
    fn zero_time_is_identity() {
        let (ctx, carrier, grid) = setup();
        let env = make_gaussian(&grid, &carrier, 0.0, 1.0, 0.3).unwrap();
        let seg = DispersionSegment::new(0.0, &ctx, &carrier).unwrap();
        let out = propagate(&env, &seg, &ctx).unwrap();
        assert_eq!(out.values, env.values);
        assert!((fidelity(&env, &out).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dispersing_gaussian_width() {
        let (ctx, carrier, grid) = setup();
        let env = make_gaussian(&grid, &carrier, 0.0, 1.0, 0.0).unwrap();
        let seg = DispersionSegment::new(2.0, &ctx, &carrier).unwrap();
        let out = propagate(&env, &seg, &ctx).unwrap();
        // sigma(tau)^2 = sigma0^2 (1 + (hbar tau / 2 m sigma0^2)^2) = 2
        assert!((variance(&out).unwrap() - 2.0).abs() < 1e-6);
        assert_eq!(out.elapsed_time, 2.0);
        assert!((out.global_phase - carrier.omega0 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_density_unchanged() {
        let (ctx, carrier, grid) = setup();
        let env = make_gaussian(&grid, &carrier, 0.0, 1.0, 0.0).unwrap();
        let seg = DispersionSegment::new(3.7, &ctx, &carrier).unwrap();
        let out = propagate(&env, &seg, &ctx).unwrap();
        let a = grid.spectrum(&env.values);
        let b = grid.spectrum(&out.values);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.norm_sqr() - y.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_matches_factory_at_zero() {
        let (ctx, carrier, grid) = setup();
        let a = analytic_gaussian(&grid, &carrier, 0.0, 1.3, 2.0, &ctx).unwrap();
        let b = make_gaussian(&grid, &carrier, 2.0, 1.3, 0.0).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn analytic_cross_validates_propagator() {
        let (ctx, carrier, grid) = setup();
        let env = make_gaussian(&grid, &carrier, 0.0, 1.0, 0.0).unwrap();
        let seg = DispersionSegment::new(2.0, &ctx, &carrier).unwrap();
        let num = propagate(&env, &seg, &ctx).unwrap();
        let exact = analytic_gaussian(&grid, &carrier, 2.0, 1.0, 0.0, &ctx).unwrap();
        assert!(fidelity(&num, &exact).unwrap() >= 1.0 - 1e-10);
        // Same global phase convention too: sample-wise agreement.
        for (x, y) in num.values.iter().zip(&exact.values) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn far_field_shape_is_spectrum() {
        // At large tau, |psi(xi)| ~ |psi~0(k = m xi / hbar tau)|.
        let ctx = PhysicalContext::dimensionless(1.0, 1e4).unwrap();
        let carrier = CarrierState::from_wavenumber(&ctx, 50.0).unwrap();
        let grid = Grid::new(4096, 800.0).unwrap();
        let sigma0 = 0.8;
        let tau = 20.0;
        let out = analytic_gaussian(&grid, &carrier, tau, sigma0, 0.0, &ctx).unwrap();
        let peak = out.values[grid.n_points / 2].norm();
        let width = tau / (2.0 * sigma0);
        let mut worst: f64 = 0.0;
        for (j, v) in out.values.iter().enumerate() {
            let x = grid.xi(j);
            if x.abs() > 2.0 * width {
                continue;
            }
            let k = ctx.mass * x / (ctx.hbar * tau);
            // |psi~0(k)| ~ exp(-sigma0^2 k^2) for the 4 sigma^2 convention.
            let shape = (-sigma0 * sigma0 * k * k).exp();
            worst = worst.max((v.norm() / peak - shape).abs());
        }
        assert!(worst < 0.01, "{worst}");
        // And the numerical propagator agrees with the closed form here as well.
        let env = make_gaussian(&grid, &carrier, 0.0, sigma0, 0.0).unwrap();
        let seg = DispersionSegment::new(tau, &ctx, &carrier).unwrap();
        let num = propagate(&env, &seg, &ctx).unwrap();
        assert!(fidelity(&num, &out).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn under_resolved_dispersion_rejected() {
        let (ctx, carrier, _) = setup();
        let grid = Grid::new(1024, 64.0).unwrap();
        let env = make_gaussian(&grid, &carrier, 0.0, 1.0, 0.0).unwrap();
        let seg = DispersionSegment::new(10.0, &ctx, &carrier).unwrap();
        assert!(matches!(
            propagate(&env, &seg, &ctx),
            Err(Error::DispersionUnderResolved { .. })
        ));
    }

    #[test]
    fn support_warning_is_reported() {
        // A resolved filter cannot spread a centered packet into the guard
        // band, so give it a drift: centroid moves by 2 coeff k1.
        let ctx = PhysicalContext::dimensionless(1.0, 1e4).unwrap();
        let carrier = CarrierState::from_wavenumber(&ctx, 50.0).unwrap();
        let grid = Grid::new(1024, 64.0).unwrap();
        let base = make_gaussian(&grid, &carrier, 0.0, 1.0, 0.0).unwrap();
        let values = base
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| v * Complex64::from_polar(1.0, 40.0 * grid.xi(j)))
            .collect();
        let env = SampledEnvelope::from_values(grid, carrier, values).unwrap();
        let seg = DispersionSegment::new(0.05, &ctx, &carrier).unwrap();
        let out = propagate(&env, &seg, &ctx).unwrap();
        assert!(out.warnings.is_empty());
        let seg = DispersionSegment::new(0.3, &ctx, &carrier).unwrap();
        let out = propagate(&env, &seg, &ctx).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].tail_mass > 1e-8);
    }

    #[test]
    fn backward_needs_flag() {
        let (ctx, carrier, grid) = setup();
        assert!(DispersionSegment::new(-1.0, &ctx, &carrier).is_err());
        let fwd = DispersionSegment::new(1.5, &ctx, &carrier).unwrap();
        let back = DispersionSegment::backward(-1.5, &ctx, &carrier).unwrap();
        let env = make_gaussian(&grid, &carrier, 0.0, 1.0, 0.0).unwrap();
        let there = propagate(&env, &fwd, &ctx).unwrap();
        let again = propagate(&there, &back, &ctx).unwrap();
        assert!(fidelity(&env, &again).unwrap() > 1.0 - 1e-12);
        assert!(again.elapsed_time.abs() < 1e-15);
    }

    #[test]
    fn compose_identities() {
        let (ctx, carrier, _) = setup();
        let one = DispersionSegment::new(1.0, &ctx, &carrier).unwrap();
        let two = DispersionSegment::new(2.0, &ctx, &carrier).unwrap();
        let zero = DispersionSegment::new(0.0, &ctx, &carrier).unwrap();
        assert_eq!(compose_check(&one, &one), two);
        assert_eq!(compose_check(&zero, &two), two);
    }

    #[test]
    fn centroid_stationary_in_moving_frame() {
        let (ctx, carrier, grid) = setup();
        let env = make_gaussian(&grid, &carrier, 0.0, 1.5, 0.0).unwrap();
        let seg = DispersionSegment::new(7.0, &ctx, &carrier).unwrap();
        let out = propagate(&env, &seg, &ctx).unwrap();
        assert!(centroid(&out).unwrap().abs() < 1e-9 * 1.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn unitarity_and_semigroup(u in 0.0f64..5.0, sigma in 0.6f64..3.0, chirp in -0.2f64..0.2) {
            let (ctx, carrier, grid) = setup();
            let total = 5.0;
            let env = make_gaussian(&grid, &carrier, 0.0, sigma, chirp).unwrap();
            let s1 = DispersionSegment::new(u, &ctx, &carrier).unwrap();
            let s2 = DispersionSegment::new(total - u, &ctx, &carrier).unwrap();
            let a = propagate(&propagate(&env, &s1, &ctx).unwrap(), &s2, &ctx).unwrap();
            let b = propagate(&env, &compose_check(&s1, &s2), &ctx).unwrap();
            prop_assert!((norm(&a).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!(fidelity(&a, &b).unwrap() >= 1.0 - 1e-12);
        }
    }
}
