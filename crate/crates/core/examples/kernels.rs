//! Trading speeds and signal kernels for a few frictions.
//!
//! `cargo run --release --example kernels`

use impact_hedge::kernels::{kernel_k, kernel_k_integral, kernel_kxi, kernel_kxi_integral, rate_constrained, rate_unconstrained, tau};
use impact_hedge::ModelParams;

fn main() -> impact_hedge::Result<()> {
    for kappa in [0.01, 0.1, 1.0] {
        let p = ModelParams::new(kappa, 1.0, 0.0)?;
        println!("kappa = {kappa}  (kernels at u = t + (T - t)/4)");
        for t in [0.0, 0.5, 0.9, 0.99] {
            println!(
                "  t = {t:4}  tau = {:8.4}  speed free {:8.4}  pinned {:9.4}  K(t,u) = {:.4e}  KXi = {:.4e}",
                tau(&p, t)?,
                rate_unconstrained(&p, t)?,
                rate_constrained(&p, t)?,
                kernel_k(&p, t, t + 0.25 * (1.0 - t))?,
                kernel_kxi(&p, t, t + 0.25 * (1.0 - t))?,
            );
        }
        // Both kernels are probability densities on [t, T].
        let t = 0.25;
        println!(
            "  mass on [t, T]: K {:.15}  KXi {:.15}",
            kernel_k_integral(&p, t, t, 1.0)?,
            kernel_kxi_integral(&p, t, t, 1.0)?
        );
    }
    Ok(())
}
