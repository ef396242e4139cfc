//! A real image has M < 0, so the temporal order of two unequal pulses is
//! reversed: the skewness of |psi|^2 changes sign.
//!
//!     cargo run --example time_reversal

use matterwave::envelope::{make_asymmetric_pair, skewness, variance};
use matterwave::imaging::{estimate_magnification, solve_for_magnification};
use matterwave::lens::matched_lens_for_focal_length;
use matterwave::{run_pipeline, CarrierState, Grid, LensMode, PhysicalContext};

pub struct Reversal {
    pub skew_in: f64,
    pub skew_out: f64,
    pub variance_ratio: f64,
    pub estimated_magnification: Option<f64>,
    /// Position of the larger hump before and after.
    pub big_hump: (f64, f64),
}

fn peak_position(env: &matterwave::SampledEnvelope) -> f64 {
    let d = env.density();
    let j = (0..d.len()).fold(0, |best, j| if d[j] > d[best] { j } else { best });
    env.grid.xi(j)
}

pub fn run_example() -> matterwave::Result<Reversal> {
    let ctx = PhysicalContext::dimensionless(-1.0, 100.0)?;
    let carrier = CarrierState::from_wavenumber(&ctx, 1.0)?;
    let grid = Grid::new(4096, 512.0)?;
    let env = make_asymmetric_pair(&grid, &carrier, 6.0, 1.0, 0.5)?;

    let (a, b) = (2.5, 5.0);
    let lens = matched_lens_for_focal_length(
        &ctx,
        &carrier,
        0.05,
        2.0 * carrier.k0 * a * b / (a + b),
        1.0,
    )?;
    let design = solve_for_magnification(-2.0, lens.focal_length(), &ctx, &carrier)?;
    let out = run_pipeline(&env, &design, &lens, LensMode::Quadratic, None)?;
    Ok(Reversal {
        skew_in: skewness(&env)?,
        skew_out: skewness(&out)?,
        variance_ratio: variance(&out)? / variance(&env)?,
        estimated_magnification: estimate_magnification(&env, &out)?.value(),
        big_hump: (peak_position(&env), peak_position(&out)),
    })
}

fn main() -> matterwave::Result<()> {
    let r = run_example()?;
    println!("skewness        {:+.5} -> {:+.5}", r.skew_in, r.skew_out);
    println!(
        "larger hump at  {:+.3} -> {:+.3}",
        r.big_hump.0, r.big_hump.1
    );
    println!("variance ratio  {:.5} (M^2 = 4)", r.variance_ratio);
    match r.estimated_magnification {
        Some(m) => println!("estimated M     {m:+.5}"),
        None => println!("estimated M     orientation undetermined"),
    }
    Ok(())
}
