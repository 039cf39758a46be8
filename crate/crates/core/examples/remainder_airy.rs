//! The WKB remainder stays bounded while the Airy approximation drifts away.

use hill_birkhoff::families::Family;
use hill_birkhoff::flow::{evolve_kdv, remainder_table, uniform_times, StepControl};
use hill_birkhoff::frequencies::{frequencies, linear_fit};

fn main() -> hill_birkhoff::Result<()> {
    let big_n = 1;
    let q = Family::envelope(4, big_n, 1.0, 11).potential();
    let q = q.scale(0.3 / q.sobolev_norm(big_n as f64, true));
    let f = frequencies(&q, 16)?;
    let tr = evolve_kdv(&q, &uniform_times(20.0, 41), &StepControl::default())?.with_wkb(&f).with_airy();
    let rows = remainder_table(&tr, big_n)?;
    for r in rows.iter().step_by(4) {
        println!("t = {:5.1}  |R|_(N+1) = {:.4e}  |u - airy|_(N+1) = {:.4e}", r.t, r.r_high, r.airy_high.unwrap());
    }
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let a: Vec<f64> = rows.iter().map(|r| r.airy_high.unwrap()).collect();
    let (slope, _, r2) = linear_fit(&t, &a);
    println!("airy error grows at {slope:.3e} per unit time (R^2 = {r2:.4})");
    Ok(())
}
