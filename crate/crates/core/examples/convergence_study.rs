//! Observed orders of accuracy against the manufactured solution.

use viscomem::analysis::{self, ConvergenceSpec, Refinement};
use viscomem::kernel::KernelParams;
use viscomem::transient::HistoryMode;

fn main() -> viscomem::Result<()> {
    let kernel = KernelParams::new(0.5, 1.0, 0.5)?;
    let studies = [
        (Refinement::SteadySpace, 16, 0.0, 0.0),
        (Refinement::TransientSpace, 16, 1e-3, 0.2),
        (Refinement::TransientTime, 32, 0.005, 1.0),
    ];
    for (refine, base_n, base_dt, t_end) in studies {
        let table = analysis::convergence_table(&ConvergenceSpec {
            refine,
            mu: 1.0,
            kernel,
            alpha: 0.5,
            base_n,
            base_dt,
            t_end,
            levels: 3,
            history_mode: HistoryMode::Direct,
        })?;
        println!("{}", refine.name());
        for r in &table.rows {
            let order = r.order.map_or(String::from("-"), |o| format!("{o:.3}"));
            println!(
                "  parameter {:>10.4e}  error {:.4e}  order {order}",
                r.parameter, r.error
            );
        }
    }
    Ok(())
}
