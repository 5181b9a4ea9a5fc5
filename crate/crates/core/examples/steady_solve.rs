//! Steady state with effective viscosity by Stokes iteration and by Newton.

use viscomem::forcing::FieldProfile;
use viscomem::grid::StaggeredGrid;
use viscomem::kernel::KernelParams;
use viscomem::steady::{self, SteadyConfig, SteadyMethod};

fn main() -> viscomem::Result<()> {
    let grid = StaggeredGrid::unit_square(64)?;
    let kernel = KernelParams::new(0.5, 1.0, 0.5)?;
    let mut config = SteadyConfig::new(1.0, kernel, FieldProfile::Mixed.sample(grid, 4.0, 0));
    config.tol = 1e-12;
    println!("effective viscosity {:.12}", config.nu_eff()?);

    let mut solutions = Vec::new();
    for method in [SteadyMethod::StokesIteration, SteadyMethod::Newton] {
        config.method = method;
        let sol = steady::solve(&config)?;
        println!(
            "{:>16}: {} iterations, residual {:.2e}, history {:?}",
            method.name(),
            sol.iterations,
            sol.residual,
            sol.residual_history
                .iter()
                .map(|r| format!("{r:.1e}"))
                .collect::<Vec<_>>()
        );
        solutions.push(sol);
    }
    let gap = solutions[0].velocity.sub(&solutions[1].velocity).l2() / solutions[1].velocity.l2();
    println!("relative gap between methods {gap:.2e}");
    let d = &solutions[1].diagnostics;
    println!(
        "a-priori bound: nu_eff |u|_1 = {:.4e} <= |f|_-1 = {:.4e} ({})",
        d.nu_eff * d.ubar_h1,
        d.fbar_dual,
        d.apriori_ok
    );
    println!(
        "mu0 estimate {:.6}, uniqueness indicator {:.3e} (small data: {})",
        d.mu0_est.value,
        d.uniqueness.value,
        d.uniqueness.small_data()
    );
    Ok(())
}
