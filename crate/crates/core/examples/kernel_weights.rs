//! Quadrature weights of the memory kernel and their positivity.
//!
//! Run with `cargo run --release --example kernel_weights`.

use viscomem::kernel::{self, KernelParams};
use viscomem::special::kernel_primitive;

fn main() -> viscomem::Result<()> {
    let params = KernelParams::new(0.5, 1.0, 0.5)?;
    let (dt, n) = (0.01, 256);
    let weights = kernel::make_weights(&params, dt, n)?;

    println!("first weights (exact interval integrals of t^-b e^-dt):");
    for k in 0..5 {
        println!("  w[{k}] = {:.12e}", weights.get(k));
    }
    let exact = kernel_primitive(&params, 0.0, n as f64 * dt)?;
    println!("sum of {n} weights  = {:.15e}", weights.partial_sum(n));
    println!("closed-form integral = {exact:.15e}");
    println!("total kernel mass    = {:.15e}", params.moment()?);

    let (lo, hi) = kernel::symmetrized_spectrum(&weights);
    println!("symmetrized quadrature spectrum in [{lo:.4e}, {hi:.4e}]");
    let cert = kernel::positivity_certificate(&weights, 500, 7)?;
    println!(
        "positivity certificate: min normalized form {:.4e} over {} trials",
        cert.min_value, cert.trials
    );
    Ok(())
}
