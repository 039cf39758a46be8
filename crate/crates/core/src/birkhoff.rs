//! Actions, the factorization `zₙ± = uₙ±vₙ±`, the angle sums `βₙ` and the
//! Birkhoff map `Φ` with its smoothing part `A = Φ − Φ₀`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{chi_n_real, localized_den, solve_psi_zeros_with, zeta_n_real, PsiSystem};
use crate::error::{Error, Result};
use crate::fourier::{phi0, Potential, SequenceVector};
use crate::quad::{chebyshev, gap_angle, legendre};
use crate::spectrum::{compute_spectrum, SpectralData};

/// Quadrature sizes for the gap integrals.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ActionQuadratureConfig {
    /// Chebyshev nodes for actions and the ψ conditions.
    pub cheb_nodes: usize,
    /// Starting Gauss–Legendre size for the partial-gap integrals; doubled
    /// up to 512 until two sizes agree.
    pub legendre_nodes: usize,
}

impl Default for ActionQuadratureConfig {
    fn default() -> Self {
        Self { cheb_nodes: 64, legendre_nodes: 32 }
    }
}

/// `δₙ = 2(λ̇ₙ − τₙ)/γₙ`, zero on closed gaps.
pub fn delta(spec: &SpectralData, n: usize) -> f64 {
    let g = spec.gap(n);
    if g.open_gap {
        2.0 * (g.lam_dot - g.tau) / g.gamma
    } else {
        0.0
    }
}

/// `(Iₙ, ξₙ)` from `ξₙ² = (2/π²n)∫(t − δₙ)² χₙ(τₙ + tγₙ/2) dt/√(1−t²)` and
/// `Iₙ = γₙ²ξₙ²/8`; the ξ formula stays finite on closed gaps.
pub fn action(spec: &SpectralData, n: usize, nodes: usize) -> Result<(f64, f64)> {
    let g = spec.gap(n);
    let d = delta(spec, n);
    let integral = chebyshev(nodes, |t| (t - d).powi(2) * chi_n_real(spec, n, g.tau + 0.5 * g.gamma * t));
    let xi2 = 2.0 * integral / (PI * PI * n as f64);
    if !(xi2 > 0.0) {
        return Err(Error::Mislocation(format!("ξ_{n}² = {xi2} is not positive")));
    }
    Ok((g.gamma * g.gamma * xi2 / 8.0, xi2.sqrt()))
}

/// `Δₙ(λ) = Δₙ⁰(λ) · (λ − λ₀)/λ · Π_{m≠n} (λ₂ₘ − λ)(λ₂ₘ₋₁ − λ)/(m²π² − λ)²`,
/// where `Δₙ⁰(λ) = 4n²π² sin²√λ/(n²π² − λ)²` is the free value.
///
/// Beyond `n_max` the gaps are negligible but `τₘ − m²π² ≈ C/m²` is not; the
/// tail of the product is summed with `τₘ − m²π² ≈ C/m² + D/m⁴` fitted on the
/// last two computed gaps, leaving a truncation error of `O(n_max⁻⁷)`.
pub fn delta_n(spec: &SpectralData, n: usize, lambda: f64) -> f64 {
    let npi = n as f64 * PI;
    let r = lambda.sqrt();
    // sin √λ/(√λ − nπ) = ±sinc(√λ − nπ)
    let x = (lambda - npi * npi) / (r + npi);
    let sinc = if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    let free = (2.0 * npi * sinc / (npi + r)).powi(2);
    let mut p = free * (lambda - spec.lambda0) / lambda;
    for g in spec.gaps.iter().filter(|g| g.n != n) {
        let e = (g.n as f64 * PI).powi(2) - lambda;
        p *= (g.lam_hi - lambda) / e * ((g.lam_lo - lambda) / e);
    }
    let big_m = spec.n_max();
    if big_m > n {
        let shift = |m: usize| {
            let m2 = (m * m) as f64;
            (spec.gap(m).tau - spec.mean - m2 * PI * PI) * m2
        };
        // τₘ − m²π² − mean ≈ C/m² + D/m⁴, fitted on the last two gaps
        let (c, d) = if big_m >= 4 {
            let (a, b) = (1.0 / ((big_m - 1) * (big_m - 1)) as f64, 1.0 / (big_m * big_m) as f64);
            let d = (shift(big_m - 1) - shift(big_m)) / (a - b);
            (shift(big_m) - d * b, d)
        } else {
            (shift(big_m), 0.0)
        };
        let last = 50 * big_m;
        let mut log = 0.0;
        for m in big_m + 1..=last {
            let m2 = (m * m) as f64;
            log += 2.0 * ((c + d / m2) / (m2 * (m2 * PI * PI - lambda))).ln_1p();
        }
        log += 2.0 * c / (3.0 * PI * PI * (last as f64).powi(3));
        p *= log.exp();
    }
    p
}

/// `uₙ± = 2(τₙ − μₙ) ± i(2πn/√Δₙ(μₙ))·2 sinh κₙ`.
pub fn u_pm(spec: &SpectralData, n: usize) -> Result<(Complex64, Complex64)> {
    let g = spec.gap(n);
    let dn = delta_n(spec, n, g.mu);
    if !(dn > 0.0) {
        return Err(Error::Mislocation(format!("Δ_{n}(μ_{n}) = {dn} is not positive")));
    }
    let re = 2.0 * (g.tau - g.mu);
    let im = 2.0 * PI * n as f64 / dn.sqrt() * 2.0 * g.kappa.sinh();
    Ok((Complex64::new(re, im), Complex64::new(re, -im)))
}

/// Sign of `√*((λ₂ₙ − λ)(λ − λ₂ₙ₋₁))` on the gap, fixed at `μₙ` by the value
/// `y₁(1,μₙ) − y₂'(1,μₙ)` of `√*(Δ² − 4)`.
pub fn star_sign(spec: &SpectralData, n: usize) -> f64 {
    let s = spec.gap(n).star_root_at_mu;
    let s = if n % 2 == 1 { s } else { -s };
    if s < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `∫₀^θ f(τ − (γ/2)cos φ) dφ`, doubling the Legendre size until stable.
/// `f` receives both `λ` and the exact offset `h = λ − τ`. `noise` is the
/// absolute round-off level of the integrand samples.
fn angle_integral<F: Fn(f64, f64) -> f64>(
    tau: f64,
    gamma: f64,
    theta: f64,
    start: usize,
    noise: f64,
    f: F,
) -> Result<f64> {
    let g = |phi: f64| {
        let h = -0.5 * gamma * phi.cos();
        f(tau + h, h)
    };
    let mut n = start.max(4);
    let mut prev = legendre(n).integrate(0.0, theta, &g);
    while n < 512 {
        n *= 2;
        let rule = legendre(n);
        let next = rule.integrate(0.0, theta, &g);
        // cancellation can make the value itself tiny; compare with ∫|f|
        let scale = rule.integrate(0.0, theta, |p| g(p).abs());
        if (next - prev).abs() <= 1e-13 * scale + 8.0 * noise * theta || scale == 0.0 {
            return Ok(next);
        }
        if n >= 512 {
            return Err(Error::Convergence(format!(
                "partial gap integral did not settle at {n} nodes ({prev:e} vs {next:e}, scale {scale:e}, θ = {theta})"
            )));
        }
        prev = next;
    }
    Err(Error::Convergence(format!("partial gap integral did not settle at {n} nodes")))
}

/// `vₙ± = exp(±i∫_{λ₂ₙ₋₁}^{μₙ} (ζₙ − 1)/√*((λ₂ₙ−λ)(λ−λ₂ₙ₋₁)) dλ)`; 1 on closed gaps.
pub fn v_pm(spec: &SpectralData, psi: &PsiSystem, n: usize, cfg: &ActionQuadratureConfig) -> Result<(Complex64, Complex64)> {
    let g = spec.gap(n);
    if !g.open_gap {
        return Ok((Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)));
    }
    let theta = gap_angle(g.lam_lo, g.lam_hi, g.mu);
    let j = angle_integral(g.tau, g.gamma, theta, cfg.legendre_nodes, f64::EPSILON, |l, _| zeta_n_real(spec, psi, n, l) - 1.0)?;
    let phase = star_sign(spec, n) * j;
    Ok((Complex64::from_polar(1.0, phase), Complex64::from_polar(1.0, -phase)))
}

/// `β_{n,k} = ∫_{λ₂ₖ₋₁}^{μₖ*} ψₙ/√(Δ² − 4) dλ` on the real gap `k ≠ n`.
pub fn beta_nk(spec: &SpectralData, psi: &PsiSystem, n: usize, k: usize, cfg: &ActionQuadratureConfig) -> Result<f64> {
    let gk = spec.gap(k);
    let gn = spec.gap(n);
    let row = psi.row(n);
    let offset_k = row.offset[k - 1];
    // ψₙ has one negative factor (σₘ − λ) for every m < k, m ≠ n
    let negatives = (k - 1) - usize::from(n < k);
    let parity = if negatives.is_multiple_of(2) { 1.0 } else { -1.0 };
    let root_sign = if gk.star_root_at_mu < 0.0 { -1.0 } else { 1.0 };
    let theta = gap_angle(gk.lam_lo, gk.lam_hi, gk.mu);
    let others: Vec<_> = spec.gaps.iter().filter(|o| o.open_gap && o.n != n && o.n != k).collect();
    let j = angle_integral(gk.tau, gk.gamma, theta, cfg.legendre_nodes, 0.0, |l, dl| {
        let mut h = n as f64 * PI / (l - spec.lambda0).sqrt() * localized_den(gn.tau, gn.gamma, l).abs();
        for o in &others {
            h *= ((row.sigma[o.n - 1] - l) * localized_den(o.tau, o.gamma, l)).abs();
        }
        (offset_k - dl) * h
    })?;
    Ok(parity * root_sign * j)
}

/// `βₙ = Σ_{k open, k≠n} β_{n,k}`.
pub fn beta_sum(spec: &SpectralData, psi: &PsiSystem, n: usize, cfg: &ActionQuadratureConfig) -> Result<f64> {
    spec.open_indices().into_iter().filter(|&k| k != n).map(|k| beta_nk(spec, psi, n, k, cfg)).sum()
}

/// Round-off floor for relative comparisons of gap-length quantities:
/// endpoints and `μₙ` carry absolute errors of a few ulps of `τₙ`, and `κₙ`
/// one of about `steps·ε` from the monodromy product, so `|uₙ|²/γₙ²` and
/// `Iₙ/(zₙz₋ₙ/2)` cannot be resolved better than this.
pub fn resolution_floor(spec: &SpectralData, n: usize) -> f64 {
    let g = spec.gap(n);
    if !(g.gamma > 0.0) {
        return f64::INFINITY;
    }
    let location = 16.0 * f64::EPSILON * g.tau.abs().max(1.0) / g.gamma;
    let dn = delta_n(spec, n, g.mu);
    let scale = 2.0 * PI * n as f64 / dn.max(f64::MIN_POSITIVE).sqrt();
    let im = scale * 2.0 * g.kappa.sinh();
    let d_im = scale * 2.0 * g.kappa.cosh() * spec.steps as f64 * f64::EPSILON;
    location + 2.0 * (im.abs() * d_im + d_im * d_im) / (g.gamma * g.gamma)
}

/// Per-index Birkhoff data.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BirkhoffEntry {
    pub n: usize,
    pub action: f64,
    pub xi: f64,
    pub u_plus: Complex64,
    pub u_minus: Complex64,
    pub v_plus: Complex64,
    pub v_minus: Complex64,
    pub z_plus: Complex64,
    pub z_minus: Complex64,
    pub beta_sum: f64,
    /// `zₙ`
    pub z: Complex64,
    /// `z₋ₙ`
    pub z_neg: Complex64,
    /// `Aₙ = zₙ − (Φ₀ q)ₙ`
    pub remainder: Complex64,
}

#[derive(Clone, Debug)]
pub struct BirkhoffData {
    pub spec: SpectralData,
    pub psi: PsiSystem,
    pub entries: Vec<BirkhoffEntry>,
}

impl BirkhoffData {
    pub fn entry(&self, n: usize) -> &BirkhoffEntry {
        &self.entries[n - 1]
    }

    /// `Φ(q)` as a sequence.
    pub fn z(&self) -> SequenceVector {
        SequenceVector { pos: self.entries.iter().map(|e| e.z).collect(), neg: self.entries.iter().map(|e| e.z_neg).collect() }
    }

    /// `A(q) = Φ(q) − Φ₀(q)`.
    pub fn remainder(&self) -> SequenceVector {
        SequenceVector {
            pos: self.entries.iter().map(|e| e.remainder).collect(),
            neg: self.entries.iter().map(|e| e.remainder.conj()).collect(),
        }
    }

    /// One JSON object per n: `{n, I, xi, z_re, z_im, A_re, A_im}`.
    pub fn to_json_rows(&self) -> Vec<serde_json::Value> {
        self.entries
            .iter()
            .map(|e| {
                serde_json::json!({
                    "n": e.n, "I": e.action, "xi": e.xi,
                    "z_re": e.z.re, "z_im": e.z.im, "A_re": e.remainder.re, "A_im": e.remainder.im,
                })
            })
            .collect()
    }
}

/// Birkhoff data from an already computed spectrum of a mean-free potential.
pub fn birkhoff_from_spectrum(q: &Potential, spec: SpectralData, cfg: &ActionQuadratureConfig) -> Result<BirkhoffData> {
    if spec.mean != 0.0 {
        return Err(Error::NonzeroMean(spec.mean));
    }
    let psi = solve_psi_zeros_with(&spec, cfg.cheb_nodes)?;
    let p0 = phi0(q, spec.n_max())?;
    let entries = (1..=spec.n_max())
        .into_par_iter()
        .map(|n| {
            let (action, xi) = action(&spec, n, cfg.cheb_nodes)?;
            let (u_plus, u_minus) = u_pm(&spec, n)?;
            let (v_plus, v_minus) = v_pm(&spec, &psi, n, cfg)?;
            let beta = beta_sum(&spec, &psi, n, cfg)?;
            let (z_plus, z_minus) = (u_plus * v_plus, u_minus * v_minus);
            let rot = Complex64::from_polar(1.0, beta);
            let z_neg = xi * 0.5 * z_plus * rot;
            let z = xi * 0.5 * z_minus * rot.conj();
            Ok(BirkhoffEntry {
                n,
                action,
                xi,
                u_plus,
                u_minus,
                v_plus,
                v_minus,
                z_plus,
                z_minus,
                beta_sum: beta,
                z,
                z_neg,
                remainder: z - p0.get(n as i64),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BirkhoffData { spec, psi, entries })
}

/// `Φ(q)` for `1 ≤ |n| ≤ n_max`; the mean of `q` is removed first.
pub fn birkhoff_map(q: &Potential, n_max: usize) -> Result<BirkhoffData> {
    birkhoff_map_with(q, n_max, &ActionQuadratureConfig::default())
}

pub fn birkhoff_map_with(q: &Potential, n_max: usize, cfg: &ActionQuadratureConfig) -> Result<BirkhoffData> {
    let q0 = q.mean_free();
    let spec = compute_spectrum(&q0, n_max)?;
    birkhoff_from_spectrum(&q0, spec, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::solve_psi_zeros;

    #[test]
    fn free_map() {
        let b = birkhoff_map(&Potential::zero(), 16).unwrap();
        for e in &b.entries {
            assert_eq!(e.action, 0.0);
            assert!((e.xi - 1.0 / (e.n as f64 * PI).sqrt()).abs() < 1e-12);
            assert!(e.z.norm() < 1e-12);
            assert!((e.v_plus - 1.0).norm() < 1e-15);
        }
        let s = &b.spec;
        for n in 1..=16 {
            assert!((delta_n(s, n, (n as f64 * PI).powi(2)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_n_matches_discriminant() {
        // Δₙ(μ) = −(Δ(μ)² − 4)n²π²/((λ₂ₙ − μ)(λ₂ₙ₋₁ − μ)) wherever μ is inside an open gap
        let q = Potential::zero().with_trig(1, 0.9, -0.4).with_trig(3, 0.3, 0.2);
        let s = compute_spectrum(&q, 40).unwrap();
        let solver = crate::hill::HillSolver::new(&q, 2e4);
        for n in [1, 2, 3] {
            let g = s.gap(n);
            assert!(g.gamma > 1e-3);
            let lam = g.tau + 0.1 * g.gamma;
            let fd = solver.fundamental(lam, false).unwrap();
            let rho = if n % 2 == 0 { 1.0 } else { -1.0 };
            // Δ² − 4 through the excess form, free of cancellation
            let d2 = fd.excess(rho) * (rho * fd.discriminant() + 2.0);
            let direct = -d2 * (n as f64 * PI).powi(2) / ((g.lam_hi - lam) * (g.lam_lo - lam));
            let prod = delta_n(&s, n, lam);
            assert!((direct / prod - 1.0).abs() < 1e-9, "n = {n}: {direct} vs {prod}");
        }
    }

    #[test]
    fn action_identity_and_reality() {
        let q = Potential::zero().with_trig(1, 0.6, 0.25).with_trig(2, -0.3, 0.1);
        let b = birkhoff_map(&q, 32).unwrap();
        for e in b.entries.iter().filter(|e| b.spec.gap(e.n).open_gap) {
            let i2 = 0.5 * (e.z * e.z_neg).re;
            let tol = resolution_floor(&b.spec, e.n).max(1e-7);
            assert!((i2 / e.action - 1.0).abs() < tol, "n = {}: {i2:e} vs {:e}", e.n, e.action);
            assert!((e.z_neg - e.z.conj()).norm() < 1e-12 * e.z.norm());
            assert!((e.u_plus.norm() / b.spec.gap(e.n).gamma - 1.0).abs() < tol);
        }
        let psi = solve_psi_zeros(&b.spec).unwrap();
        assert_eq!(psi, b.psi);
    }
}
