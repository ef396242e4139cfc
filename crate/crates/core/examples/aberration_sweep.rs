//! Image quality of the full cosine lens relative to its quadratic
//! approximation as the packet at the lens widens toward 1/k_m.
//!
//!     cargo run --release --example aberration_sweep

use matterwave::imaging::{aberration_sweep, solve_for_magnification, AberrationPoint};
use matterwave::lens::matched_lens_for_focal_length;
use matterwave::{CarrierState, Grid, PhysicalContext};

/// Input width whose free spread over drift coefficient `a` reaches the rms
/// width `target` (wide branch of `s^2 = w^2 + a^2 / w^2`).
pub fn input_width_for(target: f64, a: f64) -> f64 {
    let t2 = target * target;
    (0.5 * (t2 + (t2 * t2 - 4.0 * a * a).max(0.0).sqrt())).sqrt()
}

pub fn run_example() -> matterwave::Result<Vec<AberrationPoint>> {
    let ctx = PhysicalContext::dimensionless(-1.0, 100.0)?;
    let carrier = CarrierState::from_wavenumber(&ctx, 1.0)?;
    let grid = Grid::new(65536, 128.0)?;
    let (k_m, a, m) = (1.0, 0.004, -4.0);
    let b = a * 4.0;
    let lens = matched_lens_for_focal_length(
        &ctx,
        &carrier,
        k_m,
        2.0 * carrier.k0 * a * b / (a + b),
        1.0,
    )?;
    let design = solve_for_magnification(m, lens.focal_length(), &ctx, &carrier)?;
    let widths: Vec<f64> = (1..=10)
        .map(|j| input_width_for(0.1 * j as f64 / k_m, design.coeff_a))
        .collect();
    aberration_sweep(&lens, &design, &grid, &widths)
}

fn main() -> matterwave::Result<()> {
    println!(
        "{:>12} {:>14} {:>12}",
        "input width", "k_m * width", "fidelity"
    );
    for p in run_example()? {
        println!(
            "{:>12.5} {:>14.4} {:>12.6}",
            p.input_width, p.lens_width_km, p.fidelity
        );
    }
    Ok(())
}
