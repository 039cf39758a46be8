//! Zeros σᵐₙ of the normalized differentials ψₙ for a three-mode potential.

use hill_birkhoff::curve::solve_psi_zeros;
use hill_birkhoff::spectrum::compute_spectrum;
use hill_birkhoff::Potential;

fn main() -> hill_birkhoff::Result<()> {
    let q = Potential::zero().with_trig(1, 0.6, 0.2).with_trig(2, -0.3, 0.1).with_trig(3, 0.0, 0.15);
    let spec = compute_spectrum(&q, 6)?;
    let psi = solve_psi_zeros(&spec)?;
    println!("open gaps: {:?}", spec.open_indices());
    for row in &psi.rows {
        let offs: Vec<String> = row.offset.iter().map(|o| format!("{o:+.3e}")).collect();
        println!("n = {}: sigma - tau = [{}]  residual {:.1e}, {} iterations", row.n, offs.join(", "), row.residuals.iter().cloned().fold(0.0, f64::max), row.iterations);
    }
    println!("max residual {:.2e}", psi.max_residual());
    Ok(())
}
