//! Eigenvalues of `−d²/dx² + q` from truncated Galerkin matrices.
//!
//! This path shares nothing with the shooting integrator and is used only
//! as an independent cross-check.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::Potential;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Periodic and antiperiodic on `[0,1]`, i.e. periodic on `[0, 2]`.
    Periodic2,
    Dirichlet,
    Neumann,
}

/// `∫₀¹ q(x) cos(πmx) dx`, exact for a trigonometric polynomial.
fn cos_moment(q: &Potential, m: i64) -> f64 {
    let m = m.unsigned_abs() as i64;
    let mut v = if m == 0 { q.mean } else { 0.0 };
    if m % 2 == 0 {
        if m > 0 {
            v += q.coeff(m / 2).re;
        }
        return v;
    }
    for n in 1..=q.k() as i64 {
        let b = q.coeff(n).im;
        // q contains −2b·sin(2πnx); ∫ sin(2πnx) cos(πmx) for odd m
        let s = 1.0 / (PI * (2 * n + m) as f64) + 1.0 / (PI * (2 * n - m) as f64);
        v -= 2.0 * b * s;
    }
    v
}

fn periodic_block(q: &Potential, parity: i64, half: i64) -> DMatrix<Complex64> {
    // modes e^{iπkx} with k ≡ parity (mod 2), |k| ≤ 2·half + 1
    let ks: Vec<i64> = (-(2 * half + 1)..=(2 * half + 1)).filter(|k| k.rem_euclid(2) == parity).collect();
    let d = ks.len();
    DMatrix::from_fn(d, d, |i, j| {
        let (ki, kj) = (ks[i], ks[j]);
        let mut v = q.coeff((ki - kj) / 2);
        if i == j {
            v += Complex64::new(PI * PI * (ki * ki) as f64, 0.0);
        }
        v
    })
}

fn sorted_eigs_complex(m: DMatrix<Complex64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

fn sorted_eigs_real(m: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

fn eigenvalues_at(q: &Potential, boundary: Boundary, size: usize) -> Vec<f64> {
    match boundary {
        Boundary::Periodic2 => {
            let half = (size / 4) as i64;
            let mut e = sorted_eigs_complex(periodic_block(q, 0, half));
            e.extend(sorted_eigs_complex(periodic_block(q, 1, half)));
            e.sort_by(f64::total_cmp);
            e
        }
        Boundary::Dirichlet => {
            let m = DMatrix::from_fn(size, size, |i, j| {
                let (j1, k1) = (i as i64 + 1, j as i64 + 1);
                let mut v = cos_moment(q, j1 - k1) - cos_moment(q, j1 + k1);
                if i == j {
                    v += PI * PI * (j1 * j1) as f64;
                }
                v
            });
            sorted_eigs_real(m)
        }
        Boundary::Neumann => {
            let m = DMatrix::from_fn(size, size, |i, j| {
                let (a, b) = (i as i64, j as i64);
                let mut v = match (a, b) {
                    (0, 0) => cos_moment(q, 0),
                    (0, k) | (k, 0) => 2f64.sqrt() * cos_moment(q, k),
                    _ => cos_moment(q, a - b) + cos_moment(q, a + b),
                };
                if i == j {
                    v += PI * PI * (a * a) as f64;
                }
                v
            });
            sorted_eigs_real(m)
        }
    }
}

/// The lowest `count` eigenvalues, ascending.
///
/// For `Dirichlet` (`μ₁, μ₂, …`) and `Neumann` (`η₀, η₁, …`) the sine/cosine
/// Galerkin error decays like `B⁻³` for potentials with sine components, so
/// the result is Richardson-extrapolated from bases `B` and `2B`; the
/// `Periodic2` Fourier basis converges super-exponentially.
pub fn matrix_oracle_spectrum(q: &Potential, boundary: Boundary, count: usize) -> Result<Vec<f64>> {
    let base = (8 * count).max(64).max(4 * q.k() + 16);
    matrix_oracle_spectrum_sized(q, boundary, count, base, 1e-7)
}

pub fn matrix_oracle_spectrum_sized(
    q: &Potential,
    boundary: Boundary,
    count: usize,
    base: usize,
    drift_tol: f64,
) -> Result<Vec<f64>> {
    let coarse = eigenvalues_at(q, boundary, base);
    let fine = eigenvalues_at(q, boundary, 2 * base);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let (c, f) = (coarse[i], fine[i]);
        let scale = f.abs().max(1.0);
        if (c - f).abs() > drift_tol * scale {
            return Err(Error::Convergence(format!(
                "oracle basis {base} too small: eigenvalue {i} drifts {:e}",
                (c - f).abs()
            )));
        }
        out.push(match boundary {
            Boundary::Periodic2 => f,
            _ => f + (f - c) / 7.0,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_spectra() {
        let z = Potential::zero();
        let p = matrix_oracle_spectrum(&z, Boundary::Periodic2, 7).unwrap();
        let expect = [0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b * PI * PI).abs() < 1e-10);
        }
        let d = matrix_oracle_spectrum(&z, Boundary::Dirichlet, 5).unwrap();
        for (i, a) in d.iter().enumerate() {
            assert!((a - ((i + 1) as f64 * PI).powi(2)).abs() < 1e-10);
        }
        let n = matrix_oracle_spectrum(&z, Boundary::Neumann, 5).unwrap();
        for (i, a) in n.iter().enumerate() {
            assert!((a - (i as f64 * PI).powi(2)).abs() < 1e-10);
        }
    }

    #[test]
    fn mathieu_self_convergence() {
        let q = Potential::zero().with_trig(1, 0.6, 0.0);
        let a = eigenvalues_at(&q, Boundary::Periodic2, 64);
        let b = eigenvalues_at(&q, Boundary::Periodic2, 128);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn cos_moment_matches_quadrature() {
        let q = Potential::zero().with_trig(1, 0.4, -0.7).with_trig(3, 0.1, 0.3);
        for m in 0..9 {
            let n = 4000;
            let s: f64 = (0..n)
                .map(|j| {
                    let x = (j as f64 + 0.5) / n as f64;
                    q.eval(x) * (PI * m as f64 * x).cos()
                })
                .sum::<f64>()
                / n as f64;
            assert!((s - cos_moment(&q, m)).abs() < 1e-7, "{m}");
        }
    }
}
