//! Periodic, Dirichlet and Neumann data of a two-gap potential, checked
//! against the matrix-truncation oracle.

use hill_birkhoff::families::Family;
use hill_birkhoff::oracle::{matrix_oracle_spectrum, Boundary};
use hill_birkhoff::spectrum::compute_spectrum;

fn main() -> hill_birkhoff::Result<()> {
    let q = Family::TwoGap { a: 0.8, b: 0.4, phase_a: 0.0, phase_b: 1.1 }.potential();
    let spec = compute_spectrum(&q, 8)?;
    println!("lambda0 = {:.12}", spec.lambda0);
    println!("{:>3} {:>16} {:>16} {:>12} {:>16} {:>12}", "n", "lam_2n-1", "lam_2n", "gamma", "mu", "kappa");
    for g in &spec.gaps {
        println!("{:>3} {:>16.10} {:>16.10} {:>12.3e} {:>16.10} {:>12.3e}", g.n, g.lam_lo, g.lam_hi, g.gamma, g.mu, g.kappa);
    }

    let periodic = matrix_oracle_spectrum(&q, Boundary::Periodic2, 17)?;
    let dirichlet = matrix_oracle_spectrum(&q, Boundary::Dirichlet, 8)?;
    let mut worst: f64 = (periodic[0] - spec.lambda0).abs();
    for g in &spec.gaps {
        worst = worst.max((periodic[2 * g.n - 1] - g.lam_lo).abs());
        worst = worst.max((periodic[2 * g.n] - g.lam_hi).abs());
        worst = worst.max((dirichlet[g.n - 1] - g.mu).abs());
    }
    println!("max |shooting - oracle| = {worst:.2e}");
    Ok(())
}
