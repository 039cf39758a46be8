//! Evolve a small potential under KdV and watch the conserved quantities
//! and the Fourier amplitudes.

use hill_birkhoff::families::Family;
use hill_birkhoff::flow::{evolve_kdv, uniform_times, StepControl};

fn main() -> hill_birkhoff::Result<()> {
    let q = Family::envelope(4, 1, 0.3, 2).potential();
    let tr = evolve_kdv(&q, &uniform_times(2.0, 9), &StepControl::default())?;
    println!("dt = {:.3e}, {} modes simulated", tr.dt, tr.k_sim);
    for (t, (u, c)) in tr.times.iter().zip(tr.states.iter().zip(&tr.conserved)) {
        let amps: Vec<String> = (1..=6).map(|n| format!("{:.2e}", u.coeff(n).norm())).collect();
        println!("t = {t:.2}  |u|^2 = {:.15}  H = {:+.12e}  |u_n| = {}", c.l2_sq, c.hamiltonian, amps.join(" "));
    }
    let (dl2, dh) = tr.max_drift();
    println!("relative drift: L2 {dl2:.1e}, Hamiltonian {dh:.1e}");
    Ok(())
}
