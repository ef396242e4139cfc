//! Aperture-limited blur at large magnification, compared with the
//! lambda0 * f# estimate, for the default aperture 1/k_m and half of it.
//!
//!     cargo run --release --example resolution_limit

use matterwave::imaging::{resolution_experiment, solve_for_magnification, ResolutionReport};
use matterwave::lens::{matched_lens_for_focal_length, Aperture};
use matterwave::{CarrierState, Grid, LensMode, PhysicalContext};

pub struct Resolution {
    pub full: ResolutionReport,
    pub half: ResolutionReport,
}

pub fn run_example() -> matterwave::Result<Resolution> {
    let ctx = PhysicalContext::dimensionless(-1.0, 100.0)?;
    let carrier = CarrierState::from_wavenumber(&ctx, 1.0)?;
    let grid = Grid::new(16384, 2048.0)?;
    let (k_m, a, m) = (1.0, 4.0, -4.0);
    let b = 4.0 * a;
    let lens = matched_lens_for_focal_length(
        &ctx,
        &carrier,
        k_m,
        2.0 * carrier.k0 * a * b / (a + b),
        1.0,
    )?;
    let design = solve_for_magnification(m, lens.focal_length(), &ctx, &carrier)?;
    // A probe well below the resolution scale whose spread fills the aperture.
    let probe = 0.2 * a * k_m * 2.354_820_045_030_949;
    let aperture = Aperture::default_for(&lens);
    let run = |ap: Aperture| {
        resolution_experiment(&grid, &design, &lens, probe, Some(ap), LensMode::Quadratic)
    };
    Ok(Resolution {
        full: run(aperture)?,
        half: run(aperture.scaled(0.5))?,
    })
}

fn main() -> matterwave::Result<()> {
    let r = run_example()?;
    for (name, rep) in [("1/k_m", r.full), ("1/(2 k_m)", r.half)] {
        println!(
            "aperture {name:>10}: blur {:.3}, lambda0 f# {:.3}, ratio {:.3}",
            rep.blur_input_referred, rep.predicted, rep.ratio
        );
    }
    println!(
        "blur ratio half/full: {:.3}",
        r.half.blur_input_referred / r.full.blur_input_referred
    );
    Ok(())
}
