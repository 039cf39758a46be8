//! Birkhoff coordinates of a random potential: the identity `Iₙ = zₙz₋ₙ/2`,
//! the trace formula and the smoothing part `A = Φ − Φ₀`.

use std::f64::consts::PI;

use hill_birkhoff::birkhoff::birkhoff_map;
use hill_birkhoff::families::Family;

fn main() -> hill_birkhoff::Result<()> {
    let q = Family::envelope(8, 1, 0.5, 3).potential();
    let b = birkhoff_map(&q, 32)?;
    println!("{:>3} {:>12} {:>12} {:>12} {:>12}", "n", "I_n", "z z / 2", "|z_n|", "|A_n|");
    for e in b.entries.iter().take(12) {
        println!("{:>3} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.3e}", e.n, e.action, (e.z * e.z_neg).re / 2.0, e.z.norm(), e.remainder.norm());
    }
    let trace: f64 = b.entries.iter().map(|e| 2.0 * PI * e.n as f64 * e.action).sum();
    println!("sum 2 pi n I_n = {trace:.15}");
    println!("||q||^2 / 2    = {:.15}", 0.5 * q.l2().powi(2));
    println!("||A||_1 / ||Phi||_0 = {:.3e}", b.remainder().norm(1.0) / b.z().norm(0.0));
    Ok(())
}
