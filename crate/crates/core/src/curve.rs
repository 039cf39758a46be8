//! Square-root branches on the spectral curve, the localized products
//! `χₙ`, `ζₙ`, and the zeros `σᵐₙ` of the normalized differentials `ψₙ`.
//!
//! Every infinite product is written in localized form: the factor of gap
//! `m` is `(a − λ)/((τₘ − λ)√(1 − wₘ²))` with `wₘ = γₘ/2(τₘ − λ)`, which is
//! exactly 1 for a closed gap with `a = τₘ`. Factors beyond `n_max` are 1.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::chebyshev_nodes;
use crate::spectrum::SpectralData;

/// The s-root of `(b − λ)(λ − a)`: `i(λ − τ)√₊(1 − w²)`, `w = (b − a)/2(λ − τ)`.
///
/// This expression is analytic off the segment `[a, b]`, so it is used on
/// the whole domain. Approaching the segment from above it tends to
/// `−√₊((b − λ)(λ − a))`; see [`s_root_rim`].
pub fn s_root(a: f64, b: f64, lambda: Complex64) -> Result<Complex64> {
    let tau = 0.5 * (a + b);
    if lambda.im == 0.0 && lambda.re >= a.min(b) && lambda.re <= a.max(b) {
        return Err(Error::Invalid(format!("λ = {} lies on the cut [{a}, {b}]", lambda.re)));
    }
    let d = lambda - tau;
    let w = (b - a) / (2.0 * d);
    Ok(Complex64::i() * d * (1.0 - w * w).sqrt())
}

/// Boundary values of [`s_root`] on the cut: upper rim `−√₊`, lower rim `+√₊`.
pub fn s_root_rim(a: f64, b: f64, lambda: f64, upper: bool) -> f64 {
    let r = ((b - lambda) * (lambda - a)).max(0.0).sqrt();
    if upper {
        -r
    } else {
        r
    }
}

/// `(a − λ)/((τ − λ)√(1 − w²))`.
#[inline]
pub(crate) fn localized_factor(a: f64, tau: f64, gamma: f64, lambda: f64) -> f64 {
    let d = tau - lambda;
    let w = gamma / (2.0 * d);
    (a - lambda) / (d * (1.0 - w * w).sqrt())
}

/// `1/((τ − λ)√(1 − w²))`.
#[inline]
pub(crate) fn localized_den(tau: f64, gamma: f64, lambda: f64) -> f64 {
    let d = tau - lambda;
    let w = gamma / (2.0 * d);
    1.0 / (d * (1.0 - w * w).sqrt())
}

fn localized_factor_c(a: f64, tau: f64, gamma: f64, lambda: Complex64) -> Complex64 {
    let d = tau - lambda;
    let w = gamma / (2.0 * d);
    (a - lambda) / (d * (1.0 - w * w).sqrt())
}

/// `nπ/√₊(λ − λ₀) · Π_{m≠n, open} f_m(λ)` with the zeros `a_m` of the numerator.
fn product_real(spec: &SpectralData, n: usize, zeros: impl Fn(usize) -> f64, lambda: f64) -> f64 {
    let mut p = n as f64 * PI / (lambda - spec.lambda0).sqrt();
    for g in spec.gaps.iter().filter(|g| g.open_gap && g.n != n) {
        p *= localized_factor(zeros(g.n), g.tau, g.gamma, lambda);
    }
    p
}

fn product_complex(
    spec: &SpectralData,
    n: usize,
    zeros: impl Fn(usize) -> f64,
    lambda: Complex64,
) -> Result<Complex64> {
    let (lo, hi) = spec.window(n);
    let center = Complex64::new(0.5 * (lo + hi), 0.0);
    if (lambda - center).norm() >= 0.5 * (hi - lo) {
        return Err(Error::Invalid(format!("λ = {lambda} outside window {n}")));
    }
    let mut p = n as f64 * PI / (lambda - spec.lambda0).sqrt();
    for g in spec.gaps.iter().filter(|g| g.open_gap && g.n != n) {
        p *= localized_factor_c(zeros(g.n), g.tau, g.gamma, lambda);
    }
    Ok(p)
}

/// `χₙ(λ) = (−1)^{n−1} nπ/√₊(λ−λ₀) Π_{m≠n} (λ̇ₘ − λ)/√₊((λ₂ₘ−λ)(λ₂ₘ₋₁−λ))`.
pub fn chi_n(spec: &SpectralData, n: usize, lambda: Complex64) -> Result<Complex64> {
    product_complex(spec, n, |m| spec.gap(m).lam_dot, lambda)
}

pub fn chi_n_real(spec: &SpectralData, n: usize, lambda: f64) -> f64 {
    product_real(spec, n, |m| spec.gap(m).lam_dot, lambda)
}

/// `ζₙ`: as [`chi_n`] with `λ̇ₘ` replaced by `σᵐₙ`.
pub fn zeta_n(spec: &SpectralData, psi: &PsiSystem, n: usize, lambda: Complex64) -> Result<Complex64> {
    let row = psi.row(n);
    product_complex(spec, n, |m| row.sigma[m - 1], lambda)
}

pub fn zeta_n_real(spec: &SpectralData, psi: &PsiSystem, n: usize, lambda: f64) -> f64 {
    let row = psi.row(n);
    product_real(spec, n, |m| row.sigma[m - 1], lambda)
}

/// Zeros of one `ψₙ`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PsiRow {
    pub n: usize,
    /// `σᵐₙ` for `m = 1..=n_max`; `τₘ` at closed gaps and at `m = n`.
    pub sigma: Vec<f64>,
    /// `σᵐₙ − τₘ`, solved for directly so that it keeps full relative accuracy.
    pub offset: Vec<f64>,
    /// Open gaps `m ≠ n` carrying a condition.
    pub conditions: Vec<usize>,
    /// `(1/2π)∮_{Γₘ} ψₙ/√(Δ²−4) dλ` for each entry of `conditions`.
    pub residuals: Vec<f64>,
    /// The `m = n` integral, which should equal 1.
    pub normalization: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PsiSystem {
    pub nodes: usize,
    pub rows: Vec<PsiRow>,
}

impl PsiSystem {
    pub fn row(&self, n: usize) -> &PsiRow {
        &self.rows[n - 1]
    }

    pub fn max_residual(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.residuals.iter()).fold(0.0, |a, &b| a.max(b.abs()))
    }

    /// The σ table restricted to open gaps, with residuals.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| {
                let entries: Vec<_> = r
                    .conditions
                    .iter()
                    .zip(&r.residuals)
                    .map(|(&m, &res)| serde_json::json!({ "m": m, "sigma": r.sigma[m - 1], "sigma_minus_tau": r.offset[m - 1], "residual": res }))
                    .collect();
                serde_json::json!({ "n": r.n, "sigma": entries, "normalization": r.normalization, "iterations": r.iterations })
            })
            .collect();
        serde_json::json!({ "schema": 1, "nodes": self.nodes, "rows": rows })
    }
}

/// Chebyshev nodes on every open gap together with the σ-independent
/// pieces of the localized weights.
struct GapGrid {
    open: Vec<usize>,
    tau: Vec<f64>,
    /// `lam[i][k]`: k-th node in gap `open[i]`.
    lam: Vec<Vec<f64>>,
    /// `h[i][k] = lam[i][k] − τ`, exact.
    h: Vec<Vec<f64>>,
    /// `1/√(λ − λ₀)` at the nodes.
    inv_root: Vec<Vec<f64>>,
    /// `den[j][i][k] = 1/((τ_j − λ)√(1 − w_j²))` at the nodes of gap `open[i]`.
    den: Vec<Vec<Vec<f64>>>,
}

impl GapGrid {
    fn new(spec: &SpectralData, nodes: usize) -> Self {
        let t = chebyshev_nodes(nodes);
        let open = spec.open_indices();
        let tau: Vec<f64> = open.iter().map(|&m| spec.gap(m).tau).collect();
        let h: Vec<Vec<f64>> = open
            .iter()
            .map(|&m| {
                let g = spec.gap(m);
                t.iter().map(|&t| 0.5 * g.gamma * t).collect()
            })
            .collect();
        let lam: Vec<Vec<f64>> = h.iter().zip(&tau).map(|(h, t)| h.iter().map(|h| t + h).collect()).collect();
        let inv_root = lam.iter().map(|l| l.iter().map(|&x| 1.0 / (x - spec.lambda0).sqrt()).collect()).collect();
        let den = open
            .iter()
            .map(|&j| {
                let g = spec.gap(j);
                lam.iter()
                    .map(|l| l.iter().map(|&x| localized_den(g.tau, g.gamma, x)).collect())
                    .collect()
            })
            .collect();
        Self { open, tau, lam, h, inv_root, den }
    }

    /// `1/((τₙ − λ)√(1 − wₙ²))` at the nodes of gap `open[i]`, for any `n`.
    fn den_of(&self, spec: &SpectralData, n: usize, i: usize) -> Vec<f64> {
        match self.open.iter().position(|&m| m == n) {
            Some(j) => self.den[j][i].clone(),
            None => self.lam[i].iter().map(|&x| 1.0 / (spec.gap(n).tau - x)).collect(),
        }
    }
}

/// Weights `nπ·Dₙ/√(λ−λ₀)·Π_{j≠m,n}(σⱼ−λ)Dⱼ` over the gap of condition `c`,
/// with `σⱼ − λ = (τⱼ − τₘ) + xⱼ − h` in offsets from the gap centres.
fn condition_weights(grid: &GapGrid, base: &[f64], idx: &[usize], x: &[f64], c: usize) -> Vec<f64> {
    let i = idx[c];
    let mut w = base.to_vec();
    for (d, &j) in idx.iter().enumerate() {
        if d == c {
            continue;
        }
        let dt = grid.tau[j] - grid.tau[i];
        for (k, wk) in w.iter_mut().enumerate() {
            *wk *= (dt + x[d] - grid.h[i][k]) * grid.den[j][i][k];
        }
    }
    w
}

fn solve_row(spec: &SpectralData, grid: &GapGrid, n: usize) -> Result<PsiRow> {
    let nodes = grid.lam.first().map_or(0, |l| l.len());
    // positions in grid.open of the conditions for this row
    let idx: Vec<usize> = (0..grid.open.len()).filter(|&i| grid.open[i] != n).collect();
    let bases: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| {
            let dn = grid.den_of(spec, n, i);
            dn.iter().zip(&grid.inv_root[i]).map(|(d, r)| n as f64 * PI * d * r).collect()
        })
        .collect();
    // unknowns are the offsets x_c = σ_c − τ_c
    let mut x: Vec<f64> = vec![0.0; idx.len()];
    let dim = idx.len();

    // R_c = x_c − E_c[h], E_c the weighted mean over gap c
    let eval = |x: &[f64], jac: bool| -> (Vec<f64>, Option<DMatrix<f64>>) {
        let mut r = vec![0.0; dim];
        let mut jm = if jac { Some(DMatrix::<f64>::identity(dim, dim)) } else { None };
        for c in 0..dim {
            let w = condition_weights(grid, &bases[c], &idx, x, c);
            let i = idx[c];
            let hs = &grid.h[i];
            let sw: f64 = w.iter().sum();
            let mean = w.iter().zip(hs).map(|(a, b)| a * b).sum::<f64>() / sw;
            r[c] = x[c] - mean;
            if let Some(j) = jm.as_mut() {
                for d in 0..dim {
                    if d == c {
                        continue;
                    }
                    let dt = grid.tau[idx[d]] - grid.tau[i];
                    let (mut e1, mut e2) = (0.0, 0.0);
                    for k in 0..nodes {
                        let inv = 1.0 / (dt + x[d] - hs[k]);
                        e1 += w[k] * hs[k] * inv;
                        e2 += w[k] * inv;
                    }
                    j[(c, d)] = -(e1 / sw - mean * e2 / sw);
                }
            }
        }
        (r, jm)
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    // offsets are O(γ²); measure convergence against the gap widths
    let scale = idx.iter().fold(f64::MIN_POSITIVE, |a, &i| a.max(spec.gap(grid.open[i]).gamma));

    let mut iterations = 0;
    if dim > 0 {
        let (mut r, _) = eval(&x, false);
        loop {
            if iterations >= 60 {
                break;
            }
            iterations += 1;
            let (_, j) = eval(&x, true);
            let rhs = DVector::from_iterator(dim, r.iter().map(|v| -v));
            let step = j
                .unwrap()
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Convergence(format!("singular ψ_{n} Jacobian")))?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..20 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
                let (rt, _) = eval(&trial, false);
                if norm(&rt) < norm(&r) || norm(&rt) <= 1e-16 * scale {
                    x = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            let small = step.amax() <= 4.0 * f64::EPSILON * scale;
            if !accepted || small || norm(&r) <= 2.0 * f64::EPSILON * scale {
                break;
            }
        }
    }

    let mut offset = vec![0.0; spec.n_max()];
    for (c, &i) in idx.iter().enumerate() {
        offset[grid.open[i] - 1] = x[c];
    }
    let sigma = spec.gaps.iter().zip(&offset).map(|(g, o)| g.tau + o).collect();
    let conditions: Vec<usize> = idx.iter().map(|&i| grid.open[i]).collect();
    let row = PsiRow { n, sigma, offset, conditions, residuals: vec![], normalization: f64::NAN, iterations };
    let (residuals, normalization) = conditions_at(spec, &row, nodes);
    if let Some(bad) = residuals.iter().find(|r| r.abs() > 1e-8) {
        return Err(Error::Convergence(format!("ψ_{n}: normalization residual {bad:e} after {iterations} iterations")));
    }
    Ok(PsiRow { residuals, normalization, ..row })
}

/// The normalization integrals of one row evaluated with `nodes` Chebyshev
/// points: the `m ≠ n` conditions (target 0) and the `m = n` value
/// `(1/π)∫ ζₙ dt/√(1−t²)` (target 1).
pub fn conditions_at(spec: &SpectralData, row: &PsiRow, nodes: usize) -> (Vec<f64>, f64) {
    let t = chebyshev_nodes(nodes);
    let n = row.n;
    let res = row
        .conditions
        .iter()
        .map(|&m| {
            let g = spec.gap(m);
            let gn = spec.gap(n);
            t.iter()
                .map(|&t| {
                    let dl = 0.5 * g.gamma * t;
                    let lam = g.tau + dl;
                    let mut h = n as f64 * PI / (lam - spec.lambda0).sqrt() * localized_den(gn.tau, gn.gamma, lam);
                    for o in spec.gaps.iter().filter(|o| o.open_gap && o.n != n && o.n != m) {
                        h *= localized_factor(row.sigma[o.n - 1], o.tau, o.gamma, lam);
                    }
                    (row.offset[m - 1] - dl) * h
                })
                .sum::<f64>()
                / nodes as f64
        })
        .collect();
    let gn = spec.gap(n);
    let norm = t
        .iter()
        .map(|&t| product_real(spec, n, |m| row.sigma[m - 1], gn.tau + 0.5 * gn.gamma * t))
        .sum::<f64>()
        / nodes as f64;
    (res, norm)
}

pub fn solve_psi_zeros(spec: &SpectralData) -> Result<PsiSystem> {
    solve_psi_zeros_with(spec, 64)
}

/// Newton solve of the normalization conditions, one independent system per `n`.
pub fn solve_psi_zeros_with(spec: &SpectralData, nodes: usize) -> Result<PsiSystem> {
    let grid = GapGrid::new(spec, nodes);
    let rows = (1..=spec.n_max()).into_par_iter().map(|n| solve_row(spec, &grid, n)).collect::<Result<_>>()?;
    Ok(PsiSystem { nodes, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::Potential;
    use crate::spectrum::compute_spectrum;

    #[test]
    fn s_root_squares_back() {
        let (a, b) = (-1.3, 2.1);
        for k in 0..100 {
            let lam = Complex64::new(-4.0 + 0.09 * k as f64, (k as f64 * 0.7).sin() * 3.0 + 1e-3);
            let s = s_root(a, b, lam).unwrap();
            assert!((s * s - (b - lam) * (lam - a)).norm() < 1e-12 * (1.0 + lam.norm_sqr()));
        }
        assert!(s_root(a, b, Complex64::new(0.5, 0.0)).is_err());
        // rim limits
        let up = s_root(a, b, Complex64::new(0.5, 1e-12)).unwrap();
        assert!((up.re - s_root_rim(a, b, 0.5, true)).abs() < 1e-9);
        let down = s_root(a, b, Complex64::new(0.5, -1e-12)).unwrap();
        assert!((down.re - s_root_rim(a, b, 0.5, false)).abs() < 1e-9);
    }

    #[test]
    fn s_root_flips_across_the_cut_only() {
        // continuing around one end point changes the sign of the root of
        // (b−λ)(λ−a) relative to the analytic s-root on the far side
        let (a, b) = (0.0, 1.0);
        let r = s_root(a, b, Complex64::new(3.0, 0.0)).unwrap();
        assert!(r.re.abs() < 1e-15 && r.im > 0.0);
        let l = s_root(a, b, Complex64::new(-2.0, 0.0)).unwrap();
        assert!(l.im < 0.0);
    }

    #[test]
    fn free_products() {
        let s = compute_spectrum(&Potential::zero(), 8).unwrap();
        let psi = solve_psi_zeros(&s).unwrap();
        for n in 1..=8 {
            let e = (n as f64 * PI).powi(2);
            assert!((chi_n_real(&s, n, e) - 1.0).abs() < 1e-12);
            assert!((zeta_n_real(&s, &psi, n, e) - 1.0).abs() < 1e-12);
            assert!(psi.row(n).conditions.is_empty());
        }
    }

    #[test]
    fn two_gap_system() {
        let q = Potential::zero().with_trig(1, 0.8, 0.3).with_trig(2, -0.5, 0.2);
        let s = compute_spectrum(&q, 12).unwrap();
        let psi = solve_psi_zeros(&s).unwrap();
        assert!(psi.max_residual() < 1e-8);
        for row in &psi.rows {
            assert!((row.normalization - 1.0).abs() < 1e-7, "n = {}: {}", row.n, row.normalization);
            for &m in &row.conditions {
                let g = s.gap(m);
                assert!(row.sigma[m - 1] >= g.lam_lo && row.sigma[m - 1] <= g.lam_hi);
            }
            let (r32, n32) = conditions_at(&s, row, 32);
            assert!(r32.iter().zip(&row.residuals).all(|(a, b)| (a - b).abs() < 1e-9));
            assert!((n32 - row.normalization).abs() < 1e-9);
        }
        let c = chi_n(&s, 3, Complex64::new(s.gap(3).tau, 0.0)).unwrap();
        assert!(c.im.abs() < 1e-14 && (c.re - chi_n_real(&s, 3, s.gap(3).tau)).abs() < 1e-13);
    }
}
