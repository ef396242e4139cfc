//! Free spreading of a Gaussian envelope: spectral propagator against the
//! closed-form solution.
//!
//!     cargo run --example disperse_gaussian

use matterwave::dispersion::analytic_gaussian;
use matterwave::envelope::{fidelity, make_gaussian, norm, variance};
use matterwave::{propagate, CarrierState, DispersionSegment, Grid, PhysicalContext};

pub struct Row {
    pub tau: f64,
    pub width: f64,
    pub expected_width: f64,
    pub fidelity: f64,
    pub norm: f64,
}

pub fn run_example() -> matterwave::Result<Vec<Row>> {
    let ctx = PhysicalContext::dimensionless(-1.0, 100.0)?;
    let carrier = CarrierState::from_wavenumber(&ctx, 5.0)?;
    let grid = Grid::new(4096, 512.0)?;
    let sigma0 = 1.0;
    let env = make_gaussian(&grid, &carrier, 0.0, sigma0, 0.0)?;

    let mut rows = Vec::new();
    for tau in [0.0, 1.0, 2.0, 5.0, 10.0] {
        let seg = DispersionSegment::new(tau, &ctx, &carrier)?;
        let out = propagate(&env, &seg, &ctx)?;
        let exact = analytic_gaussian(&grid, &carrier, tau, sigma0, 0.0, &ctx)?;
        let r = seg.coeff / (sigma0 * sigma0);
        rows.push(Row {
            tau,
            width: variance(&out)?.sqrt(),
            expected_width: sigma0 * (1.0 + r * r).sqrt(),
            fidelity: fidelity(&out, &exact)?,
            norm: norm(&out)?,
        });
    }
    Ok(rows)
}

fn main() -> matterwave::Result<()> {
    println!(
        "{:>6} {:>12} {:>12} {:>18}",
        "tau", "rms width", "expected", "1 - fidelity"
    );
    for r in run_example()? {
        println!(
            "{:>6.1} {:>12.6} {:>12.6} {:>18.3e}",
            r.tau,
            r.width,
            r.expected_width,
            1.0 - r.fidelity
        );
    }
    Ok(())
}
