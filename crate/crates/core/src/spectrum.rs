//! Periodic, Dirichlet and Neumann spectra, gaps, Floquet exponents and the
//! critical points of the discriminant.
//!
//! Everything is located by shooting with [`HillSolver`]. Gap endpoints
//! solve `ρΔ − 2 = 0` through [`FundamentalData::excess`], which keeps the
//! gap length accurate in absolute terms even when the gap is tiny.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::Potential;
use crate::hill::{FundamentalData, HillSolver};
use crate::oracle::{matrix_oracle_spectrum, Boundary};
use crate::roots::{brent, newton_bracketed};

/// Gap-length threshold below which a gap counts as closed.
pub fn gap_tol(n: usize) -> f64 {
    1e-8 * (n as f64).max(1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GapData {
    pub n: usize,
    pub lam_lo: f64,
    pub lam_hi: f64,
    pub mu: f64,
    pub eta: f64,
    /// `λ₂ₙ − λ₂ₙ₋₁` on open gaps, exactly 0 on closed ones.
    pub gamma: f64,
    pub tau: f64,
    pub kappa: f64,
    pub lam_dot: f64,
    pub star_root_at_mu: f64,
    /// `γₙ ≥ gap_tol(n)`; closed gaps keep their resolved endpoints.
    pub open_gap: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpectralData {
    /// Mean `c` of the potential; every eigenvalue carries it as a shift.
    pub mean: f64,
    /// Bracketing window radius `r` in units of π².
    pub radius: f64,
    pub lambda0: f64,
    pub eta0: f64,
    /// Integrator steps behind every monodromy evaluation; sets the
    /// round-off level of `κₙ`.
    pub steps: usize,
    /// `gaps[n-1]` describes the n-th gap.
    pub gaps: Vec<GapData>,
}

impl SpectralData {
    pub fn n_max(&self) -> usize {
        self.gaps.len()
    }

    pub fn gap(&self, n: usize) -> &GapData {
        &self.gaps[n - 1]
    }

    /// `|λ − n²π² − c| < rπ²`, the region where the n-th gap lives.
    pub fn window(&self, n: usize) -> (f64, f64) {
        let center = (n as f64 * PI).powi(2) + self.mean;
        (center - self.radius * PI * PI, center + self.radius * PI * PI)
    }

    pub fn open_indices(&self) -> Vec<usize> {
        self.gaps.iter().filter(|g| g.open_gap).map(|g| g.n).collect()
    }

    /// CSV with one row per gap.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,lam_lo,lam_hi,mu,eta,gamma,tau,kappa,lam_dot,star_root_at_mu,open_gap\n");
        for g in &self.gaps {
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                g.n, g.lam_lo, g.lam_hi, g.mu, g.eta, g.gamma, g.tau, g.kappa, g.lam_dot, g.star_root_at_mu, g.open_gap
            ));
        }
        s
    }
}

/// Knobs for [`compute_spectrum`].
#[derive(Clone, Debug, Default)]
pub struct SpectrumConfig {
    /// Window radius in units of π²; `None` means `¼ + ‖q − c‖_{L²}`.
    pub window_radius: Option<f64>,
    /// Integrator density override (steps per unit of `√λ_max`).
    pub steps_per_root: Option<f64>,
}

/// Shooting context for one potential.
pub struct Shooter {
    pub q: Potential,
    pub solver: HillSolver,
    radius: f64,
}

impl Shooter {
    pub fn new(q: &Potential, n_max: usize, cfg: &SpectrumConfig) -> Result<Self> {
        let radius = cfg.window_radius.unwrap_or(0.25 + q.mean_free().l2());
        // neighbouring windows must not overlap, including the n = 1 window and λ₀
        if radius >= 1.5 {
            return Err(Error::Bracket(format!(
                "window radius {radius:.3}·π² overlaps neighbouring windows; potential too large for the bracketing scheme"
            )));
        }
        let sup = q.mean.abs() + 2.0 * q.pos.iter().map(|c| c.norm()).sum::<f64>();
        let lambda_max = ((n_max as f64 + radius + 1.0) * PI).powi(2) + sup + 1.0;
        let solver = match cfg.steps_per_root {
            Some(d) => HillSolver::with_density(q, lambda_max, d),
            None => HillSolver::new(q, lambda_max),
        };
        Ok(Self { q: q.clone(), solver, radius })
    }

    /// `[n²π² + c − rπ², n²π² + c + rπ²]`.
    pub fn window(&self, n: usize) -> (f64, f64) {
        let center = (n as f64 * PI).powi(2) + self.q.mean;
        (center - self.radius * PI * PI, center + self.radius * PI * PI)
    }

    pub fn at(&self, lambda: f64, deriv: bool) -> Result<FundamentalData<f64>> {
        self.solver.fundamental(lambda, deriv)
    }

    /// Lower bound for the whole spectrum.
    pub fn floor(&self) -> f64 {
        self.q.mean - 2.0 * self.q.pos.iter().map(|c| c.norm()).sum::<f64>() - 1.0
    }

    fn gap_root<G>(&self, g: G, lam_lo: f64, lam_hi: f64, window: (f64, f64)) -> Result<f64>
    where
        G: Fn(&FundamentalData<f64>) -> (f64, f64),
    {
        let f = |l: f64| -> Result<(f64, f64)> { Ok(g(&self.at(l, true)?)) };
        let mut pad = 1e-9 * lam_hi.abs().max(1.0) + 0.01 * (lam_hi - lam_lo);
        loop {
            let a = (lam_lo - pad).max(window.0);
            let b = (lam_hi + pad).min(window.1);
            let (fa, fb) = (f(a)?.0, f(b)?.0);
            if fa == 0.0 || fb == 0.0 || fa.signum() != fb.signum() {
                return newton_bracketed(f, a, b, 0.5 * (lam_lo + lam_hi));
            }
            if a <= window.0 && b >= window.1 {
                return Err(Error::Bracket(format!("no sign change on [{a}, {b}] ({fa:e}, {fb:e})")));
            }
            pad *= 8.0;
        }
    }

    fn gap(&self, n: usize) -> Result<GapData> {
        let (lo, hi) = self.window(n);
        let rho = if n.is_multiple_of(2) { 1.0 } else { -1.0 };

        let lam_dot = brent(|l| Ok(self.at(l, true)?.discriminant_dot().unwrap()), lo, hi)
            .map_err(|e| Error::Bracket(format!("critical point of gap {n}: {e}")))?;
        let d0 = self.at(lam_dot, false)?.excess(rho);
        // ρΔ − 2 ≈ D − (λ−λ̇)²/(4n²π²) near a small gap
        let gamma_est = 4.0 * n as f64 * PI * d0.max(0.0).sqrt();

        // Endpoints are resolved whenever ρΔ − 2 > 0 at λ̇, even for gaps below
        // gap_tol; such gaps keep their endpoints but count as closed.
        let (lam_lo, lam_hi) = if d0 <= 0.0 {
            (lam_dot, lam_dot)
        } else {
            let f = |l: f64| -> Result<(f64, f64)> {
                let fd = self.at(l, true)?;
                Ok((fd.excess(rho), fd.excess_dot(rho).unwrap()))
            };
            let a = newton_bracketed(f, lo, lam_dot, lam_dot - 0.5 * gamma_est)
                .map_err(|e| Error::Bracket(format!("λ_{} : {e}", 2 * n - 1)))?;
            let b = newton_bracketed(f, lam_dot, hi, lam_dot + 0.5 * gamma_est)
                .map_err(|e| Error::Bracket(format!("λ_{} : {e}", 2 * n)))?;
            (a, b)
        };
        let open = lam_hi - lam_lo >= gap_tol(n);
        let tau = 0.5 * (lam_lo + lam_hi);
        let lam_dot = if open { lam_dot } else { tau };

        // For real potentials μₙ and ηₙ lie in [λ₂ₙ₋₁, λ₂ₙ]; the bracket grows
        // from the gap outward so that neighbouring roots are never captured.
        let mu = self
            .gap_root(|fd| (fd.y2, fd.d_lambda.unwrap()[1]), lam_lo, lam_hi, (lo, hi))
            .map_err(|e| Error::Bracket(format!("μ_{n}: {e}")))?;
        let eta = self
            .gap_root(|fd| (fd.dy1, fd.d_lambda.unwrap()[2]), lam_lo, lam_hi, (lo, hi))
            .map_err(|e| Error::Bracket(format!("η_{n}: {e}")))?;
        // real potentials have λ₂ₙ₋₁ ≤ μₙ ≤ λ₂ₙ; clamp round-off overshoot only
        let slack = 1e-9 * lam_hi.abs().max(1.0);
        if mu < lam_lo - slack || mu > lam_hi + slack {
            return Err(Error::Mislocation(format!("μ_{n} = {mu} outside [{lam_lo}, {lam_hi}]")));
        }
        let mu = mu.clamp(lam_lo, lam_hi);

        let at_mu = self.at(mu, false)?;
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let arg = sign * at_mu.dy2;
        if arg <= 0.0 {
            return Err(Error::Mislocation(format!("(−1)^n y2'(1, μ_{n}) = {arg} ≤ 0")));
        }
        Ok(GapData {
            n,
            lam_lo,
            lam_hi,
            mu,
            eta,
            gamma: if open { lam_hi - lam_lo } else { 0.0 },
            tau,
            kappa: arg.ln(),
            lam_dot,
            star_root_at_mu: at_mu.y1 - at_mu.dy2,
            open_gap: open,
        })
    }

    fn ground(&self, lam1: f64) -> Result<(f64, f64)> {
        let floor = self.floor();
        let lambda0 = newton_bracketed(
            |l| {
                let fd = self.at(l, true)?;
                Ok((fd.excess(1.0), fd.excess_dot(1.0).unwrap()))
            },
            floor,
            lam1,
            floor.max(self.q.mean - 1.0),
        )?;
        let eta0 = newton_bracketed(
            |l| {
                let fd = self.at(l, true)?;
                Ok((fd.dy1, fd.d_lambda.unwrap()[2]))
            },
            floor,
            0.5 * (lambda0 + lam1),
            lambda0,
        )?;
        // η₀ = λ₀ for even potentials; round-off may put the root a hair above
        Ok((lambda0, eta0.min(lambda0)))
    }
}

/// Full spectral data for `n = 1..=n_max`.
pub fn compute_spectrum(q: &Potential, n_max: usize) -> Result<SpectralData> {
    compute_spectrum_with(q, n_max, &SpectrumConfig::default())
}

pub fn compute_spectrum_with(q: &Potential, n_max: usize, cfg: &SpectrumConfig) -> Result<SpectralData> {
    let sh = Shooter::new(q, n_max.max(1), cfg)?;
    let gaps: Vec<GapData> = (1..=n_max).into_par_iter().map(|n| sh.gap(n)).collect::<Result<_>>()?;
    let lam1 = gaps.first().map(|g| g.lam_lo).unwrap_or_else(|| sh.window(1).0);
    let (lambda0, eta0) = sh.ground(lam1)?;
    let spec = SpectralData { mean: q.mean, radius: sh.radius, lambda0, eta0, steps: sh.solver.steps(), gaps };
    check_ordering(&spec)?;
    Ok(spec)
}

fn check_ordering(s: &SpectralData) -> Result<()> {
    let mut prev = s.lambda0;
    if s.eta0 > s.lambda0 + 1e-12 * s.lambda0.abs().max(1.0) {
        return Err(Error::Mislocation(format!("η₀ = {} above λ₀ = {}", s.eta0, s.lambda0)));
    }
    for g in &s.gaps {
        if g.lam_lo <= prev || g.lam_hi < g.lam_lo {
            return Err(Error::Mislocation(format!("interlacing broken at gap {}", g.n)));
        }
        if g.lam_dot < g.lam_lo || g.lam_dot > g.lam_hi {
            return Err(Error::Mislocation(format!("λ̇_{} outside its gap", g.n)));
        }
        prev = g.lam_hi;
    }
    Ok(())
}

/// Compares the number of periodic/antiperiodic eigenvalues below
/// `(n_max + ½)²π² + c` with the matrix oracle; the windows are trusted only
/// when the counts agree.
pub fn verify_counts(q: &Potential, spec: &SpectralData) -> Result<()> {
    let n = spec.n_max();
    let cut = ((n as f64 + 0.5) * PI).powi(2) + q.mean;
    let oracle = matrix_oracle_spectrum(q, Boundary::Periodic2, 2 * n + 3)?;
    let count = oracle.iter().filter(|&&l| l <= cut).count();
    if count != 2 * n + 1 {
        return Err(Error::Bracket(format!("oracle finds {count} periodic eigenvalues below the cut, expected {}", 2 * n + 1)));
    }
    Ok(())
}

/// Residuals `(|Δ(λ₂ₙ₋₁)|−2, |Δ(λ₂ₙ)|−2, y₂(1,μₙ), y₁'(1,ηₙ), Δ̇(λ̇ₙ))` per gap.
pub fn residuals(q: &Potential, spec: &SpectralData) -> Result<Vec<[f64; 5]>> {
    let sh = Shooter::new(q, spec.n_max(), &SpectrumConfig::default())?;
    spec.gaps
        .par_iter()
        .map(|g| {
            let rho = if g.n % 2 == 0 { 1.0 } else { -1.0 };
            let a = sh.at(g.lam_lo, false)?.excess(rho);
            let b = sh.at(g.lam_hi, false)?.excess(rho);
            let m = sh.at(g.mu, false)?.y2;
            let e = sh.at(g.eta, false)?.dy1;
            let d = sh.at(g.lam_dot, true)?.discriminant_dot().unwrap();
            Ok([a, b, m, e, d])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_spectrum_is_exact() {
        let s = compute_spectrum(&Potential::zero(), 32).unwrap();
        assert!(s.lambda0.abs() < 1e-12 && s.eta0.abs() < 1e-12);
        for g in &s.gaps {
            let e = (g.n as f64 * PI).powi(2);
            for v in [g.lam_lo, g.lam_hi, g.mu, g.eta, g.lam_dot, g.tau] {
                assert!((v - e).abs() < 1e-9 * e, "n = {}: {v} vs {e}", g.n);
            }
            assert!(!g.open_gap && g.kappa.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_shift() {
        let s = compute_spectrum(&Potential::constant(0.7), 6).unwrap();
        assert!((s.lambda0 - 0.7).abs() < 1e-12);
        for g in &s.gaps {
            assert!((g.tau - (g.n as f64 * PI).powi(2) - 0.7).abs() < 1e-10);
        }
    }

    #[test]
    fn mathieu_against_oracle() {
        let q = Potential::zero().with_trig(1, 0.6, 0.0);
        let s = compute_spectrum(&q, 6).unwrap();
        let per = matrix_oracle_spectrum(&q, Boundary::Periodic2, 13).unwrap();
        assert!((s.lambda0 - per[0]).abs() < 1e-9);
        for g in &s.gaps {
            assert!((g.lam_lo - per[2 * g.n - 1]).abs() < 1e-9, "{}", g.n);
            assert!((g.lam_hi - per[2 * g.n]).abs() < 1e-9, "{}", g.n);
        }
        assert!(s.gap(1).open_gap && s.gap(2).open_gap);
        verify_counts(&q, &s).unwrap();
    }
}
