//! Lens strength versus velocity mismatch: the closed-form phase against a
//! direct quadrature along the packet trajectory.
//!
//!     cargo run --example walkoff_phase

use std::f64::consts::PI;

use matterwave::lens::{
    accumulated_phase, build_lens, phase_integral_oracle, LensParams, PhaseVelocity,
};
use matterwave::{CarrierState, PhysicalContext};

pub struct Row {
    pub delta_phi: f64,
    pub walkoff_factor: f64,
    pub max_deviation: f64,
}

pub fn run_example() -> matterwave::Result<Vec<Row>> {
    let ctx = PhysicalContext::dimensionless(-1.0, 100.0)?;
    let carrier = CarrierState::from_wavenumber(&ctx, 1.0)?;
    let (omega_m, length) = (2.0, 10.0);
    let mut rows = Vec::new();
    // v_p chosen so that dphi = w_m L (1/v_p - 1/v_g) runs from 0 past 2 pi.
    for target in [0.0, 0.5 * PI, PI, 1.5 * PI, 2.0 * PI, 3.0 * PI] {
        let v_p = 1.0 / (1.0 / carrier.v_group + target / (omega_m * length));
        let spec = build_lens(
            &LensParams {
                e0: 0.3,
                omega_m,
                phase_velocity: PhaseVelocity::Explicit(v_p),
                length,
            },
            &ctx,
            &carrier,
        )?;
        let max_deviation = (0..64)
            .map(|j| -3.0 + 6.0 * j as f64 / 63.0)
            .map(|xi| (accumulated_phase(&spec, xi) - phase_integral_oracle(&spec, xi)).abs())
            .fold(0.0, f64::max);
        rows.push(Row {
            delta_phi: spec.delta_phi,
            walkoff_factor: spec.walkoff_factor(),
            max_deviation,
        });
    }
    Ok(rows)
}

fn main() -> matterwave::Result<()> {
    println!(
        "{:>10} {:>14} {:>14}",
        "dphi/pi", "R sinc(dphi/2)", "|closed-quad|"
    );
    for r in run_example()? {
        println!(
            "{:>10.3} {:>14.6} {:>14.3e}",
            r.delta_phi / PI,
            r.walkoff_factor,
            r.max_deviation
        );
    }
    Ok(())
}
