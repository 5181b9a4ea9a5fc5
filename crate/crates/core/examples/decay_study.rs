//! Exponential approach of the transient solution to the steady state.
//!
//! Uses a 32x32 grid for speed; the shipped `configs/decay_study.conf` runs
//! the same study at 64x64.

use viscomem::analysis::{self, DecayStudyConfig};
use viscomem::forcing::{FieldProfile, ForcingSpec};
use viscomem::grid::{StaggeredGrid, VelocityField};
use viscomem::kernel::KernelParams;
use viscomem::steady::SteadyConfig;
use viscomem::transient::{FluidConfig, HistoryMode};

fn main() -> viscomem::Result<()> {
    let grid = StaggeredGrid::unit_square(32)?;
    let kernel = KernelParams::new(0.5, 1.0, 0.5)?;
    let fbar = FieldProfile::Mixed.sample(grid, 1.0, 0);
    let config = DecayStudyConfig {
        fluid: FluidConfig {
            mu: 1.0,
            kernel,
            grid,
            dt: 0.01,
            t_end: 15.0,
            forcing: ForcingSpec::decaying(
                fbar.clone(),
                FieldProfile::Shear.sample(grid, 1.0, 0),
                0.6,
            )?,
            initial_velocity: VelocityField::zeros(grid),
            history_mode: HistoryMode::Soe { tol: 1e-10 },
            advection: true,
        },
        steady: SteadyConfig::new(1.0, kernel, fbar),
        margin: 0.1,
        cadence: 10,
        config_hash: String::new(),
    };
    let report = analysis::decay_study(&config)?;
    report.write_summary(std::io::stdout())?;
    Ok(())
}
