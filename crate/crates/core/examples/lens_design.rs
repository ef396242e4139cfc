//! Focal length and f-number of a velocity-matched slow-wave lens for a
//! 2.5 keV electron (v = c/10, n = 10, L = 1 cm, E0 = 1e5 V/m).
//!
//!     cargo run --example lens_design

use matterwave::lens::{build_lens, LensParams, PhaseVelocity};
use matterwave::units::si;
use matterwave::{CarrierState, PhysicalContext};

pub struct Design {
    pub gamma0: f64,
    pub focal_length_m: f64,
    pub f_number: f64,
    pub f_number_rest_energy: f64,
    pub resolution_m: f64,
    pub kinetic_energy_ev: f64,
}

pub fn run_example() -> matterwave::Result<Design> {
    let ctx = PhysicalContext::electron_si();
    let carrier = CarrierState::from_velocity(&ctx, 0.1 * si::SPEED_OF_LIGHT)?;
    let spec = build_lens(
        &LensParams {
            e0: 1e5,
            omega_m: 2.0 * std::f64::consts::PI * 10e9,
            phase_velocity: PhaseVelocity::SlowFactor(10.0),
            length: 0.01,
        },
        &ctx,
        &carrier,
    )?;
    let design = spec.design();
    let no_focus = matterwave::Error::NoFocusingPower;
    Ok(Design {
        gamma0: spec.gamma0,
        focal_length_m: design.focal_length.value().ok_or(no_focus)?,
        f_number: design.f_number.unwrap_or(f64::NAN),
        f_number_rest_energy: spec.f_number_rest_energy().unwrap_or(f64::NAN),
        resolution_m: design.resolution_input_scale.unwrap_or(f64::NAN),
        kinetic_energy_ev: carrier.kinetic_energy(&ctx) / si::ELECTRON_VOLT,
    })
}

fn main() -> matterwave::Result<()> {
    let d = run_example()?;
    println!("kinetic energy      {:.1} eV", d.kinetic_energy_ev);
    println!("peak phase Gamma0   {:.4e} rad", d.gamma0);
    println!("focal length        {:.4e} m", d.focal_length_m);
    println!("f#                  {:.4}", d.f_number);
    println!("f# (m c^2 form)     {:.4}", d.f_number_rest_energy);
    println!("resolution lam0 f#  {:.4e} m", d.resolution_m);
    Ok(())
}
