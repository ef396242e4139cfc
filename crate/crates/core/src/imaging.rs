//! Dispersion -> lens -> dispersion imaging chain: design solver, pipeline
//! and the image metrics (magnification, aberration, resolution).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carrier::CarrierState;
use crate::dispersion::{propagate, DispersionSegment};
use crate::envelope::{fwhm, make_gaussian, rescale, skewness, variance, SampledEnvelope};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lens::{apply_lens, Aperture, FocalLength, LensMode, LensSpec};
use crate::units::PhysicalContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageKind {
    Real,
    /// `L2 < 0`: the imaging condition holds but no physical output
    /// propagation reaches the image.
    Virtual,
}

/// Object/image geometry of a single-lens system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagingDesign {
    pub l1: f64,
    pub l2: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub focal_length: f64,
    pub magnification: f64,
    /// `hbar tau1 / 2m`.
    pub coeff_a: f64,
    /// `hbar tau2 / 2m`.
    pub coeff_b: f64,
    /// `f / 2 k0`.
    pub coeff_c: f64,
    pub kind: ImageKind,
    /// Transit time through the lens; only enters the phase bookkeeping.
    pub lens_transit_time: f64,
    pub carrier: CarrierState,
}

/// Solves `1/L1 + 1/L2 = 1/f` for the image distance.
pub fn solve_imaging(
    l1: f64,
    focal_length: FocalLength,
    ctx: &PhysicalContext,
    carrier: &CarrierState,
) -> Result<ImagingDesign> {
    let f = focal_length.value().ok_or(Error::NoFocusingPower)?;
    if !(l1 > 0.0) || !l1.is_finite() {
        return Err(Error::invalid("l1", "object distance must be positive"));
    }
    if !f.is_finite() || f == 0.0 {
        return Err(Error::NoFocusingPower);
    }
    if l1 == f {
        return Err(Error::ImageAtInfinity);
    }
    let l2 = 1.0 / (1.0 / f - 1.0 / l1);
    let kind = if l2 > 0.0 {
        ImageKind::Real
    } else {
        log::warn!("virtual image: L2 = {l2:.6e}");
        ImageKind::Virtual
    };
    let v_g = carrier.v_group;
    let tau1 = l1 / v_g;
    let tau2 = l2 / v_g;
    let d = ctx.diffusivity();
    Ok(ImagingDesign {
        l1,
        l2,
        tau1,
        tau2,
        focal_length: f,
        magnification: -l2 / l1,
        coeff_a: d * tau1,
        coeff_b: d * tau2,
        coeff_c: f / (2.0 * carrier.k0),
        kind,
        lens_transit_time: 0.0,
        carrier: *carrier,
    })
}

/// Design with a prescribed (negative) magnification:
/// `L1 = f (1 - 1/M)`, `L2 = f (1 - M)`.
pub fn solve_for_magnification(
    magnification: f64,
    focal_length: FocalLength,
    ctx: &PhysicalContext,
    carrier: &CarrierState,
) -> Result<ImagingDesign> {
    let f = focal_length.value().ok_or(Error::NoFocusingPower)?;
    if !(magnification < 0.0) || !magnification.is_finite() {
        return Err(Error::invalid(
            "magnification",
            "a real image of a single lens has M < 0",
        ));
    }
    solve_imaging(f * (1.0 - 1.0 / magnification), focal_length, ctx, carrier)
}

impl ImagingDesign {
    pub fn with_lens_transit_time(mut self, tau_l: f64) -> Self {
        self.lens_transit_time = tau_l;
        self
    }

    /// `(1/c - 1/b) - 1/a`, zero when the spectral quadratic phase of the
    /// image cancels.
    pub fn imaging_residual(&self) -> f64 {
        (1.0 / self.coeff_c - 1.0 / self.coeff_b) - 1.0 / self.coeff_a
    }

    /// Curvature `rho` of the quadratic phase `exp(i rho xi^2)` carried by the
    /// image, `(1 - 1/M) / 4b`. The image intensity is an exact scaled copy of
    /// the input; this phase is the only difference in the complex envelope.
    pub fn image_phase_curvature(&self) -> f64 {
        (1.0 - 1.0 / self.magnification) / (4.0 * self.coeff_b)
    }
}

/// `rescale(env0, M)` carrying the image-plane quadratic phase.
pub fn ideal_image(env0: &SampledEnvelope, design: &ImagingDesign) -> Result<SampledEnvelope> {
    Ok(rescale(env0, design.magnification)?.with_quadratic_phase(design.image_phase_curvature()))
}

/// Dispersion `seg1`, lens, dispersion `seg2`, with no consistency checks.
pub fn run_chain(
    env0: &SampledEnvelope,
    seg1: &DispersionSegment,
    spec: &LensSpec,
    mode: LensMode,
    aperture: Option<Aperture>,
    seg2: &DispersionSegment,
    ctx: &PhysicalContext,
) -> Result<SampledEnvelope> {
    let at_lens = propagate(env0, seg1, ctx)?;
    let lensed = apply_lens(&at_lens, spec, mode, aperture)?;
    propagate(&lensed, seg2, ctx)
}

/// Runs the imaging chain for `design`. The lens focal length must match the
/// design to 1e-9 relative.
pub fn run_pipeline(
    env0: &SampledEnvelope,
    design: &ImagingDesign,
    spec: &LensSpec,
    mode: LensMode,
    aperture: Option<Aperture>,
) -> Result<SampledEnvelope> {
    let lens_f = spec.focal_length().value().ok_or(Error::NoFocusingPower)?;
    if ((lens_f - design.focal_length) / design.focal_length).abs() > 1e-9 {
        return Err(Error::FocalLengthMismatch {
            lens: lens_f,
            design: design.focal_length,
        });
    }
    if design.kind == ImageKind::Virtual {
        return Err(Error::invalid(
            "design",
            "virtual image: output propagation time is negative",
        ));
    }
    let ctx = &spec.ctx;
    let seg1 = DispersionSegment::new(design.tau1, ctx, &design.carrier)?;
    let seg2 = DispersionSegment::new(design.tau2, ctx, &design.carrier)?;
    let mut out = run_chain(env0, &seg1, spec, mode, aperture, &seg2, ctx)?;
    out.elapsed_time += design.lens_transit_time;
    out.global_phase += design.carrier.omega0 * design.lens_transit_time;
    Ok(out)
}

/// Magnification recovered from `|psi|^2` moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnificationEstimate {
    pub magnitude: f64,
    /// `Some(-1.0)` when the skewness flips sign, `Some(1.0)` when it keeps
    /// it, `None` for (near-)symmetric inputs.
    pub sign: Option<f64>,
}

impl MagnificationEstimate {
    pub fn value(&self) -> Option<f64> {
        self.sign.map(|s| s * self.magnitude)
    }
}

/// Standardized skewness below which the orientation is undetermined.
const SKEW_FLOOR: f64 = 1e-6;

pub fn estimate_magnification(
    env_in: &SampledEnvelope,
    env_out: &SampledEnvelope,
) -> Result<MagnificationEstimate> {
    let var_in = variance(env_in)?;
    if var_in == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let magnitude = (variance(env_out)? / var_in).sqrt();
    let s_in = skewness(env_in)?;
    let s_out = skewness(env_out)?;
    let sign = if s_in.abs() > SKEW_FLOOR && s_out.abs() > SKEW_FLOOR {
        Some((s_in * s_out).signum())
    } else {
        None
    };
    Ok(MagnificationEstimate { magnitude, sign })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub probe_fwhm: f64,
    pub output_fwhm: f64,
    pub magnification: f64,
    /// Output FWHM referred back to the input scale, `output_fwhm / |M|`.
    pub blur_input_referred: f64,
    /// `lambda0 * f#`.
    pub predicted: f64,
    pub ratio: f64,
}

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Images a narrow Gaussian probe of intensity FWHM `probe_width` and
/// measures the input-referred blur (intensity FWHM of the image divided by
/// `|M|`).
pub fn resolution_experiment(
    grid: &Grid,
    design: &ImagingDesign,
    spec: &LensSpec,
    probe_width: f64,
    aperture: Option<Aperture>,
    mode: LensMode,
) -> Result<ResolutionReport> {
    resolution_run(grid, design, spec, probe_width, aperture, mode).map(|r| r.report)
}

/// [`resolution_experiment`] together with the probe and its image.
#[derive(Debug, Clone)]
pub struct ResolutionRun {
    pub report: ResolutionReport,
    pub probe: SampledEnvelope,
    pub image: SampledEnvelope,
}

pub fn resolution_run(
    grid: &Grid,
    design: &ImagingDesign,
    spec: &LensSpec,
    probe_width: f64,
    aperture: Option<Aperture>,
    mode: LensMode,
) -> Result<ResolutionRun> {
    let predicted = spec
        .design()
        .resolution_input_scale
        .ok_or(Error::NoFocusingPower)?;
    let limit = 0.25 * predicted;
    if !(probe_width < limit) {
        return Err(Error::ProbeTooWide {
            probe: probe_width,
            limit,
        });
    }
    let probe = make_gaussian(
        grid,
        &design.carrier,
        0.0,
        probe_width / FWHM_PER_SIGMA,
        0.0,
    )?;
    let image = run_pipeline(&probe, design, spec, mode, aperture)?;
    let output_fwhm = fwhm(&image)?;
    let blur = output_fwhm / design.magnification.abs();
    let report = ResolutionReport {
        probe_fwhm: fwhm(&probe)?,
        output_fwhm,
        magnification: design.magnification,
        blur_input_referred: blur,
        predicted,
        ratio: blur / predicted,
    };
    Ok(ResolutionRun {
        report,
        probe,
        image,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AberrationPoint {
    pub input_width: f64,
    /// RMS width of the dispersed packet at the lens.
    pub lens_width: f64,
    /// `lens_width * k_m`.
    pub lens_width_km: f64,
    pub fidelity: f64,
}

/// For each input Gaussian width, images through both lens modes and
/// reports the fidelity between the two images. Elements are independent
/// and run in parallel; the output order follows `widths`.
pub fn aberration_sweep(
    spec: &LensSpec,
    design: &ImagingDesign,
    grid: &Grid,
    widths: &[f64],
) -> Result<Vec<AberrationPoint>> {
    widths
        .par_iter()
        .map(|&w| {
            let env0 = make_gaussian(grid, &design.carrier, 0.0, w, 0.0)?;
            let seg1 = DispersionSegment::new(design.tau1, &spec.ctx, &design.carrier)?;
            let at_lens = propagate(&env0, &seg1, &spec.ctx)?;
            let lens_width = variance(&at_lens)?.sqrt();
            let quad = run_pipeline(&env0, design, spec, LensMode::Quadratic, None)?;
            let full = run_pipeline(&env0, design, spec, LensMode::FullCosine, None)?;
            Ok(AberrationPoint {
                input_width: w,
                lens_width,
                lens_width_km: lens_width * spec.k_m,
                fidelity: crate::envelope::fidelity(&quad, &full)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{fidelity, make_asymmetric_pair, norm};
    use crate::lens::{build_lens, matched_lens_for_focal_length, LensParams, PhaseVelocity};

    fn natural() -> (PhysicalContext, CarrierState) {
        let ctx = PhysicalContext::dimensionless(-1.0, 100.0).unwrap();
        let carrier = CarrierState::from_wavenumber(&ctx, 1.0).unwrap();
        (ctx, carrier)
    }

    #[test]
    fn solve_examples() {
        let (ctx, carrier) = natural();
        let f = FocalLength::Finite(1.0);
        let d = solve_imaging(2.0, f, &ctx, &carrier).unwrap();
        assert!((d.l2 - 2.0).abs() < 1e-12 && (d.magnification + 1.0).abs() < 1e-12);
        let d = solve_imaging(3.0, f, &ctx, &carrier).unwrap();
        assert!((d.l2 - 1.5).abs() < 1e-12 && (d.magnification + 0.5).abs() < 1e-12);
        let d = solve_imaging(1.25, f, &ctx, &carrier).unwrap();
        assert!((d.l2 - 5.0).abs() < 1e-12 && (d.magnification + 4.0).abs() < 1e-12);
        assert!((1.0 / d.l1 + 1.0 / d.l2 - 1.0).abs() < 1e-12);
        assert!((d.magnification + d.tau2 / d.tau1).abs() < 1e-12);
        assert!((d.magnification + d.coeff_b / d.coeff_a).abs() < 1e-12);
        assert!(d.imaging_residual().abs() < 1e-12 * (1.0 / d.coeff_a));
    }

    #[test]
    fn solve_errors_and_virtual_images() {
        let (ctx, carrier) = natural();
        assert!(matches!(
            solve_imaging(1.0, FocalLength::Finite(1.0), &ctx, &carrier),
            Err(Error::ImageAtInfinity)
        ));
        assert!(matches!(
            solve_imaging(1.0, FocalLength::Infinite, &ctx, &carrier),
            Err(Error::NoFocusingPower)
        ));
        let v = solve_imaging(0.5, FocalLength::Finite(1.0), &ctx, &carrier).unwrap();
        assert_eq!(v.kind, ImageKind::Virtual);
        assert!(v.l2 < 0.0 && v.magnification > 0.0);
    }

    #[test]
    fn magnification_solver_round_trip() {
        let (ctx, carrier) = natural();
        for m in [-0.5, -1.0, -2.0, -4.0] {
            let d = solve_for_magnification(m, FocalLength::Finite(0.8), &ctx, &carrier).unwrap();
            assert!((d.magnification - m).abs() < 1e-12);
        }
        assert!(solve_for_magnification(2.0, FocalLength::Finite(1.0), &ctx, &carrier).is_err());
    }

    fn imaging_setup(m: f64) -> (PhysicalContext, Grid, ImagingDesign, LensSpec) {
        let (ctx, carrier) = natural();
        let grid = Grid::new(4096, 512.0).unwrap();
        // Keep max(a, b) = 5 so the dispersion filter stays resolved.
        let b = if m.abs() >= 1.0 { 5.0 } else { 5.0 * m.abs() };
        let a = b / m.abs();
        let c = a * b / (a + b);
        let f = 2.0 * carrier.k0 * c;
        let spec = matched_lens_for_focal_length(&ctx, &carrier, 0.05, f, 1.0).unwrap();
        let design = solve_for_magnification(m, spec.focal_length(), &ctx, &carrier).unwrap();
        (ctx, grid, design, spec)
    }

    #[test]
    fn mirror_image_of_gaussian() {
        let (_, grid, design, spec) = imaging_setup(-1.0);
        let env = make_gaussian(&grid, &design.carrier, 1.5, 1.0, 0.0).unwrap();
        let out = run_pipeline(&env, &design, &spec, LensMode::Quadratic, None).unwrap();
        let ideal = ideal_image(&env, &design).unwrap();
        assert!(fidelity(&out, &ideal).unwrap() >= 0.9999);
        assert!((crate::envelope::centroid(&out).unwrap() + 1.5).abs() < 1e-6);
    }

    #[test]
    fn time_reversal_of_asymmetric_pair() {
        let (_, grid, design, spec) = imaging_setup(-2.0);
        let env = make_asymmetric_pair(&grid, &design.carrier, 6.0, 1.0, 0.5).unwrap();
        let out = run_pipeline(&env, &design, &spec, LensMode::Quadratic, None).unwrap();
        let ratio = variance(&out).unwrap() / variance(&env).unwrap();
        assert!((ratio - 4.0).abs() < 0.04);
        assert!(skewness(&out).unwrap() * skewness(&env).unwrap() < 0.0);
        let est = estimate_magnification(&env, &out).unwrap();
        assert!((est.value().unwrap() + 2.0).abs() < 0.04);
        assert!((out.elapsed_time - design.tau1 - design.tau2).abs() < 1e-12);
    }

    #[test]
    fn residual_phase_is_the_only_difference() {
        let (_, grid, design, spec) = imaging_setup(-1.0);
        let env = make_gaussian(&grid, &design.carrier, 0.0, 1.0, 0.0).unwrap();
        let out = run_pipeline(&env, &design, &spec, LensMode::Quadratic, None).unwrap();
        let bare = rescale(&env, design.magnification).unwrap();
        let with_phase = ideal_image(&env, &design).unwrap();
        let raw = fidelity(&out, &bare).unwrap();
        let full = fidelity(&out, &with_phase).unwrap();
        assert!(full > 1.0 - 1e-9, "{full}");
        assert!(raw < full);
        // Intensities agree sample by sample.
        for (x, y) in out.values.iter().zip(&bare.values) {
            assert!((x.norm_sqr() - y.norm_sqr()).abs() < 1e-9);
        }
    }

    #[test]
    fn lens_removed_reduces_to_single_dispersion() {
        let (ctx, carrier) = natural();
        let grid = Grid::new(4096, 512.0).unwrap();
        let off = build_lens(
            &LensParams {
                e0: 0.0,
                omega_m: 0.05,
                phase_velocity: PhaseVelocity::Matched,
                length: 1.0,
            },
            &ctx,
            &carrier,
        )
        .unwrap();
        let env = make_asymmetric_pair(&grid, &carrier, 6.0, 1.0, 0.5).unwrap();
        let s1 = DispersionSegment::new(3.0, &ctx, &carrier).unwrap();
        let s2 = DispersionSegment::new(4.0, &ctx, &carrier).unwrap();
        let chained = run_chain(&env, &s1, &off, LensMode::Quadratic, None, &s2, &ctx).unwrap();
        let total = DispersionSegment::new(7.0, &ctx, &carrier).unwrap();
        let direct = propagate(&env, &total, &ctx).unwrap();
        assert!(fidelity(&chained, &direct).unwrap() >= 1.0 - 1e-12);
        let design = solve_imaging(2.0, FocalLength::Finite(1.0), &ctx, &carrier).unwrap();
        assert!(matches!(
            run_pipeline(&env, &design, &off, LensMode::Quadratic, None),
            Err(Error::NoFocusingPower)
        ));
    }

    #[test]
    fn focal_mismatch_rejected() {
        let (_, grid, design, spec) = imaging_setup(-1.0);
        let env = make_gaussian(&grid, &design.carrier, 0.0, 1.0, 0.0).unwrap();
        let mut other = design;
        other.focal_length *= 1.001;
        assert!(matches!(
            run_pipeline(&env, &other, &spec, LensMode::Quadratic, None),
            Err(Error::FocalLengthMismatch { .. })
        ));
    }

    #[test]
    fn lens_transit_time_bookkeeping() {
        let (_, grid, design, spec) = imaging_setup(-1.0);
        let design = design.with_lens_transit_time(0.25);
        let env = make_gaussian(&grid, &design.carrier, 0.0, 1.0, 0.0).unwrap();
        let out = run_pipeline(&env, &design, &spec, LensMode::Quadratic, None).unwrap();
        assert!((out.elapsed_time - (design.tau1 + design.tau2 + 0.25)).abs() < 1e-12);
        assert!((norm(&out).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn magnification_estimate_for_identical_envelopes() {
        let (_, grid, design, _) = imaging_setup(-1.0);
        let env = make_gaussian(&grid, &design.carrier, 0.0, 1.0, 0.0).unwrap();
        let est = estimate_magnification(&env, &env).unwrap();
        assert!((est.magnitude - 1.0).abs() < 1e-6);
        assert_eq!(est.sign, None);
        let pair = make_asymmetric_pair(&grid, &design.carrier, 6.0, 1.0, 0.5).unwrap();
        let est = estimate_magnification(&pair, &pair).unwrap();
        assert_eq!(est.value(), Some(1.0));
    }

    #[test]
    fn probe_must_be_narrow() {
        let (_, grid, design, spec) = imaging_setup(-4.0);
        let predicted = spec.design().resolution_input_scale.unwrap();
        assert!(matches!(
            resolution_experiment(&grid, &design, &spec, predicted, None, LensMode::Quadratic),
            Err(Error::ProbeTooWide { .. })
        ));
    }
}
