//! Dispersion, thin lens, dispersion: the image is the input scaled by
//! M = -L2/L1, for magnifications from 1/2 to 4.
//!
//!     cargo run --example imaging_magnification

use matterwave::envelope::{centroid, fidelity, make_gaussian};
use matterwave::imaging::{estimate_magnification, ideal_image, solve_for_magnification};
use matterwave::lens::matched_lens_for_focal_length;
use matterwave::{run_pipeline, CarrierState, Grid, LensMode, PhysicalContext};

pub struct Row {
    pub magnification: f64,
    pub fidelity: f64,
    pub estimated_magnitude: f64,
    pub centroid_in: f64,
    pub centroid_out: f64,
}

pub fn run_example() -> matterwave::Result<Vec<Row>> {
    let ctx = PhysicalContext::dimensionless(-1.0, 100.0)?;
    let carrier = CarrierState::from_wavenumber(&ctx, 1.0)?;
    let grid = Grid::new(4096, 512.0)?;
    let env = make_gaussian(&grid, &carrier, 1.5, 1.0, 0.0)?;

    let mut rows = Vec::new();
    for m in [-0.5_f64, -1.0, -2.0, -4.0] {
        // Longest drift coefficient fixed at 5 to keep the filter resolved.
        let b = if m.abs() >= 1.0 { 5.0 } else { 5.0 * m.abs() };
        let a = b / m.abs();
        let f = 2.0 * carrier.k0 * a * b / (a + b);
        let lens = matched_lens_for_focal_length(&ctx, &carrier, 0.05, f, 1.0)?;
        let design = solve_for_magnification(m, lens.focal_length(), &ctx, &carrier)?;
        let out = run_pipeline(&env, &design, &lens, LensMode::Quadratic, None)?;
        let ideal = ideal_image(&env, &design)?;
        rows.push(Row {
            magnification: design.magnification,
            fidelity: fidelity(&out, &ideal)?,
            estimated_magnitude: estimate_magnification(&env, &out)?.magnitude,
            centroid_in: centroid(&env)?,
            centroid_out: centroid(&out)?,
        });
    }
    Ok(rows)
}

fn main() -> matterwave::Result<()> {
    println!(
        "{:>6} {:>14} {:>10} {:>10} {:>10}",
        "M", "1 - fidelity", "|M| est", "<xi> in", "<xi> out"
    );
    for r in run_example()? {
        println!(
            "{:>6.2} {:>14.3e} {:>10.5} {:>10.4} {:>10.4}",
            r.magnification,
            1.0 - r.fidelity,
            r.estimated_magnitude,
            r.centroid_in,
            r.centroid_out
        );
    }
    Ok(())
}
