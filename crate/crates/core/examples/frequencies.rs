//! KdV frequencies from spectral data against the Airy frequencies `(2πn)³ + 12cnπ`.

use hill_birkhoff::families::Family;
use hill_birkhoff::frequencies::frequencies;
use hill_birkhoff::Potential;

fn main() -> hill_birkhoff::Result<()> {
    let q = Family::envelope(8, 1, 0.4, 5).potential().add(&Potential::constant(0.25));
    let f = frequencies(&q, 24)?;
    println!("mean c = {}", f.mean);
    println!("{:>3} {:>18} {:>18} {:>14}", "n", "omega_c", "airy", "n|omega - (2pi n)^3|");
    for n in 1..=24 {
        let free = (2.0 * std::f64::consts::PI * n as f64).powi(3);
        println!("{:>3} {:>18.8} {:>18.8} {:>14.6e}", n, f.omega_c[n - 1], f.airy[n - 1], n as f64 * (f.omega[n - 1] - free).abs());
    }
    Ok(())
}
