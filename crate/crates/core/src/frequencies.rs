//! KdV frequencies from spectral data, and their measurement along a trajectory.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curve::{solve_psi_zeros, PsiSystem};
use crate::error::{Error, Result};
use crate::flow::{airy_speed, FlowTrajectory};
use crate::fourier::{Potential, SequenceVector};
use crate::spectrum::{compute_spectrum, SpectralData};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FrequencyData {
    /// Mean `c` of the potential the shift was taken from.
    pub mean: f64,
    /// `omega[n-1] = ωₙ`; `ω₋ₙ = −ωₙ` and `ω₀ = 0` by convention.
    pub omega: Vec<f64>,
    /// `ωₙ + 12cnπ`
    pub omega_c: Vec<f64>,
    /// `(2πn)³ + 12cnπ`
    pub airy: Vec<f64>,
    pub gamma: Vec<f64>,
    pub measured: Option<Vec<Option<f64>>>,
}

impl FrequencyData {
    pub fn n_max(&self) -> usize {
        self.omega.len()
    }

    /// `ωₙ` for any integer `n`, odd in `n`.
    pub fn omega_at(&self, n: i64) -> f64 {
        match n {
            0 => 0.0,
            n if n > 0 => self.omega[n as usize - 1],
            n => -self.omega[(-n) as usize - 1],
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,omega,omega_c,airy,measured,abs_gap\n");
        for i in 0..self.n_max() {
            let m = self.measured.as_ref().and_then(|m| m.get(i).copied().flatten());
            let m = m.map(|v| format!("{v:.17e}")).unwrap_or_default();
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{},{:.17e}\n",
                i + 1,
                self.omega[i],
                self.omega_c[i],
                self.airy[i],
                m,
                self.gamma[i]
            ));
        }
        s
    }
}

/// `ωₙ = 8πn(τₙ + λ₀/2 − Σ_{m open}(σᵐₙ − τₘ))` from mean-free spectral data,
/// shifted by `12cnπ` with `c` the mean of `q`.
pub fn kdv_frequencies(q: &Potential, spec: &SpectralData, psi: &PsiSystem, n_max: usize) -> Result<FrequencyData> {
    if spec.mean != 0.0 {
        return Err(Error::NonzeroMean(spec.mean));
    }
    if psi.rows.len() < n_max || spec.n_max() < n_max {
        return Err(Error::Invalid(format!(
            "σ-table covers {} rows and the spectrum {} gaps; {n_max} requested",
            psi.rows.len(),
            spec.n_max()
        )));
    }
    let c = q.mean;
    let mut fd = FrequencyData {
        mean: c,
        omega: Vec::with_capacity(n_max),
        omega_c: Vec::with_capacity(n_max),
        airy: Vec::with_capacity(n_max),
        gamma: Vec::with_capacity(n_max),
        measured: None,
    };
    for n in 1..=n_max {
        let row = psi.row(n);
        // offsets vanish at closed gaps and at m = n
        let shift: f64 = row.offset.iter().sum();
        let g = spec.gap(n);
        let w = 8.0 * PI * n as f64 * (g.tau + 0.5 * spec.lambda0 - shift);
        fd.omega.push(w);
        fd.omega_c.push(w + 12.0 * c * n as f64 * PI);
        fd.airy.push(airy_speed(n, c));
        fd.gamma.push(g.gamma);
    }
    Ok(fd)
}

/// Spectrum, σ-table and frequencies of `q` in one call.
pub fn frequencies(q: &Potential, n_max: usize) -> Result<FrequencyData> {
    let p = q.mean_free();
    let spec = compute_spectrum(&p, n_max)?;
    let psi = solve_psi_zeros(&spec)?;
    kdv_frequencies(q, &spec, &psi, n_max)
}

/// Least-squares phase slopes of `zₙ(u(t))` along a trajectory.
///
/// `provider` maps a state to its Birkhoff coordinates. The sample spacing
/// must satisfy `δt·|sₙᶜ| < π` so consecutive phase increments are unambiguous.
pub fn measure_frequencies<F>(traj: &FlowTrajectory, provider: F, ns: &[usize]) -> Result<Vec<f64>>
where
    F: Fn(&Potential) -> Result<SequenceVector> + Sync,
{
    use rayon::prelude::*;

    let t = &traj.times;
    if t.len() < 16 {
        return Err(Error::Invalid(format!("phase fit needs at least 16 samples, got {}", t.len())));
    }
    let c = traj.states[0].mean;
    let dt = t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    for &n in ns {
        let s = airy_speed(n, c).abs();
        if dt * s >= PI {
            return Err(Error::Invalid(format!(
                "sample spacing {dt:e} aliases mode {n}; use δt < {:e}",
                PI / (2.0 * s)
            )));
        }
    }
    let zs: Vec<SequenceVector> = traj.states.par_iter().map(&provider).collect::<Result<_>>()?;
    ns.iter()
        .map(|&n| {
            let mut phases = Vec::with_capacity(t.len());
            let mut prev: Option<num_complex::Complex64> = None;
            let mut acc = 0.0;
            for z in &zs {
                let zn = z.get(n as i64);
                if zn.norm() <= 1e-8 {
                    return Err(Error::Invalid(format!("|z_{n}| = {:e} is too small for a phase fit", zn.norm())));
                }
                acc = match prev {
                    None => zn.arg(),
                    Some(p) => acc + (zn / p).arg(),
                };
                prev = Some(zn);
                phases.push(acc);
            }
            Ok(slope(t, &phases))
        })
        .collect()
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    linear_fit(x, y).0
}

/// `(slope, intercept, R²)` of the least-squares line.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let k = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (k, my - k * mx, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::airy_flow;
    use crate::fourier::phi0;

    #[test]
    fn free_frequencies() {
        let f = frequencies(&Potential::zero(), 8).unwrap();
        for n in 1..=8 {
            let w = 8.0 * PI.powi(3) * (n as f64).powi(3);
            assert!((f.omega[n - 1] - w).abs() < 1e-9 * w);
        }
        assert_eq!(f.omega_at(-3), -f.omega[2]);
    }

    #[test]
    fn mean_shift_is_exact() {
        let p = Potential::zero().with_trig(1, 0.4, 0.1).with_trig(2, 0.1, 0.0);
        let q = p.add(&Potential::constant(0.3));
        let (a, b) = (frequencies(&p, 6).unwrap(), frequencies(&q, 6).unwrap());
        for n in 1..=6 {
            assert_eq!(b.omega[n - 1], a.omega[n - 1]);
            assert_eq!(b.omega_c[n - 1], b.omega[n - 1] + 12.0 * 0.3 * n as f64 * PI);
        }
    }

    #[test]
    fn airy_phases_measure_exactly() {
        let q = Potential::zero().with_trig(1, 0.2, 0.0).with_trig(3, 0.0, 0.1);
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 1e-4).collect();
        let states = times.iter().map(|&t| airy_flow(&q, 0.0, t)).collect();
        let traj = FlowTrajectory {
            times: times.clone(),
            states,
            wkb: vec![],
            remainder: vec![],
            airy: None,
            conserved: vec![],
            dt: 1e-4,
            k_sim: 3,
        };
        let w = measure_frequencies(&traj, |u| phi0(u, 3), &[1, 3]).unwrap();
        assert!((w[0] / airy_speed(1, 0.0) - 1.0).abs() < 1e-10);
        assert!((w[1] / airy_speed(3, 0.0) - 1.0).abs() < 1e-10);
        let coarse: Vec<f64> = (0..20).map(|i| i as f64 * 1e-3).collect();
        let traj = FlowTrajectory { times: coarse, ..traj };
        assert!(measure_frequencies(&traj, |u| phi0(u, 3), &[3]).is_err());
    }
}
