//! Sum-of-exponentials compression of the convolution history.
//!
//! Fits the kernel on the run horizon, then replays one random history through
//! both the direct O(n) sum and the O(modes) recurrence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use viscomem::kernel::{self, HistoryBuffer, KernelParams};

fn main() -> viscomem::Result<()> {
    let params = KernelParams::new(0.75, 2.0, 1.0)?;
    let (dt, n) = (1e-3, 4000);
    let weights = kernel::make_weights(&params, dt, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();

    for tol in [1e-4, 1e-8, 1e-11] {
        let soe = kernel::fit_soe(&params, dt, (n + 1) as f64 * dt, tol)?;
        let mut buffer = HistoryBuffer::compressed(&soe, &params, dt, &0.0)?;
        let mut worst = 0.0f64;
        for m in 1..=n {
            let fast = kernel::convolve_soe_step(&mut buffer, &y[m - 1], dt)?;
            if m % 500 == 0 || m == n {
                let direct =
                    kernel::convolve_direct(&kernel::make_weights(&params, dt, m)?, &y[..m])?;
                worst = worst.max((fast - direct).abs());
            }
        }
        println!(
            "tol {tol:.0e}: {:>3} modes, measured fit error {:.2e}, max |fast - direct| {worst:.2e}",
            soe.len(),
            kernel::soe_measured_error(&params, &soe)
        );
    }
    println!("direct weights stored: {}", weights.len());
    Ok(())
}
