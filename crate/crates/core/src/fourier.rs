//! Real 1-periodic potentials stored as finite Fourier data.
//!
//! A [`Potential`] keeps the mean `c = q̂₀` and the coefficients `q̂ₙ` for
//! `1 ≤ n ≤ K`; negative modes follow from reality, `q̂₋ₙ = conj(q̂ₙ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    pub mean: f64,
    /// `pos[n-1] = q̂ₙ`
    pub pos: Vec<Complex64>,
}

impl Potential {
    pub fn zero() -> Self {
        Self { mean: 0.0, pos: Vec::new() }
    }

    pub fn new(mean: f64, pos: Vec<Complex64>) -> Self {
        let mut p = Self { mean, pos };
        p.trim();
        p
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c, Vec::new())
    }

    /// `a·cos(2πnx) + b·sin(2πnx)` added onto `self`.
    pub fn with_trig(mut self, n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 1);
        if self.pos.len() < n {
            self.pos.resize(n, Complex64::new(0.0, 0.0));
        }
        self.pos[n - 1] += Complex64::new(a / 2.0, -b / 2.0);
        self.trim();
        self
    }

    pub fn k(&self) -> usize {
        self.pos.len()
    }

    fn trim(&mut self) {
        while matches!(self.pos.last(), Some(c) if c.norm() == 0.0) {
            self.pos.pop();
        }
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        match n {
            0 => Complex64::new(self.mean, 0.0),
            n if n > 0 => self.pos.get(n as usize - 1).copied().unwrap_or_default(),
            n => self.pos.get((-n) as usize - 1).map(|c| c.conj()).unwrap_or_default(),
        }
    }

    /// `⟨q, cos 2πnx⟩ = Re q̂ₙ`.
    pub fn cos_moment(&self, n: usize) -> f64 {
        self.coeff(n as i64).re
    }

    /// `⟨q, sin 2πnx⟩ = −Im q̂ₙ`.
    pub fn sin_moment(&self, n: usize) -> f64 {
        -self.coeff(n as i64).im
    }

    pub fn mean_free(&self) -> Self {
        Self { mean: 0.0, pos: self.pos.clone() }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.mean;
        let w = Complex64::from_polar(1.0, 2.0 * PI * x);
        let mut e = w;
        for c in &self.pos {
            v += 2.0 * (c * e).re;
            e *= w;
        }
        v
    }

    /// Derivative `q'(x)`.
    pub fn eval_dx(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for (i, c) in self.pos.iter().enumerate() {
            let n = (i + 1) as f64;
            let e = Complex64::from_polar(1.0, 2.0 * PI * n * x);
            v += 2.0 * (c * e * Complex64::new(0.0, 2.0 * PI * n)).re;
        }
        v
    }

    /// Samples on the uniform grid `x_j = j/m`.
    pub fn samples(&self, m: usize) -> Vec<f64> {
        assert!(m >= 2 * self.k() + 2, "grid too small for degree {}", self.k());
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        buf[0] = Complex64::new(self.mean, 0.0);
        for (i, c) in self.pos.iter().enumerate() {
            buf[i + 1] = *c;
            buf[m - i - 1] = c.conj();
        }
        FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Inverse of [`Potential::samples`], keeping modes `|n| ≤ k`.
    pub fn from_samples(values: &[f64], k: usize) -> Self {
        let m = values.len();
        assert!(m >= 2 * k + 2);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let s = 1.0 / m as f64;
        let pos = (1..=k).map(|n| buf[n] * s).collect();
        Self::new(buf[0].re * s, pos)
    }

    /// `(|q̂₀|² + Σ_{n≠0}|n|^{2s}|q̂ₙ|²)^{1/2}` with the mean term only when `include_mean`.
    pub fn sobolev_norm(&self, s: f64, include_mean: bool) -> f64 {
        let mut acc = if include_mean { self.mean * self.mean } else { 0.0 };
        for (i, c) in self.pos.iter().enumerate() {
            acc += 2.0 * ((i + 1) as f64).powf(2.0 * s) * c.norm_sqr();
        }
        acc.sqrt()
    }

    /// L² norm including the mean.
    pub fn l2(&self) -> f64 {
        self.sobolev_norm(0.0, true)
    }

    /// Orthogonal projection onto modes `|n| ≤ l`.
    pub fn project(&self, l: usize) -> Self {
        Self::new(self.mean, self.pos.iter().take(l).copied().collect())
    }

    /// `(Id − P_l) q`.
    pub fn tail(&self, l: usize) -> Self {
        let pos = self
            .pos
            .iter()
            .enumerate()
            .map(|(i, c)| if i < l { Complex64::new(0.0, 0.0) } else { *c })
            .collect();
        Self::new(0.0, pos)
    }

    /// Translate: `q(· + a)`.
    pub fn shift(&self, a: f64) -> Self {
        let pos = self
            .pos
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::from_polar(1.0, 2.0 * PI * (i + 1) as f64 * a))
            .collect();
        Self::new(self.mean, pos)
    }

    pub fn scale(&self, f: f64) -> Self {
        Self::new(self.mean * f, self.pos.iter().map(|c| c * f).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let k = self.k().max(other.k());
        let pos = (1..=k as i64).map(|n| self.coeff(n) + other.coeff(n)).collect();
        Self::new(self.mean + other.mean, pos)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Drop trailing coefficients below `tol` in modulus.
    pub fn truncated_below(&self, tol: f64) -> Self {
        let mut p = self.clone();
        while matches!(p.pos.last(), Some(c) if c.norm() < tol) {
            p.pos.pop();
        }
        p
    }

    pub fn to_json(&self) -> serde_json::Value {
        let f = PotentialFile {
            k: self.k(),
            mean: self.mean,
            coeffs: self.pos.iter().enumerate().map(|(i, c)| (i as i64 + 1, c.re, c.im)).collect(),
        };
        serde_json::to_value(f).expect("plain data")
    }

    /// Accepts coefficients for either sign of `n`; a pair `(n, −n)` must be conjugate.
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let f: PotentialFile = serde_json::from_value(v.clone())?;
        let mut pos = vec![None::<Complex64>; f.k];
        for &(n, re, im) in &f.coeffs {
            if n == 0 {
                if (re - f.mean).abs() > 1e-12 * (1.0 + f.mean.abs()) || im != 0.0 {
                    return Err(Error::Invalid("mode 0 disagrees with mean".into()));
                }
                continue;
            }
            let idx = n.unsigned_abs() as usize;
            if idx > f.k {
                return Err(Error::Invalid(format!("mode {n} exceeds K = {}", f.k)));
            }
            let c = if n > 0 { Complex64::new(re, im) } else { Complex64::new(re, -im) };
            match pos[idx - 1] {
                Some(prev) if (prev - c).norm() > 1e-12 * (1.0 + c.norm()) => {
                    return Err(Error::Invalid(format!("mode ±{idx} violates reality")));
                }
                _ => pos[idx - 1] = Some(c),
            }
        }
        Ok(Self::new(f.mean, pos.into_iter().map(Option::unwrap_or_default).collect()))
    }
}

#[derive(Serialize, Deserialize)]
struct PotentialFile {
    #[serde(rename = "K")]
    k: usize,
    mean: f64,
    coeffs: Vec<(i64, f64, f64)>,
}

/// A sequence `(zₙ)_{1≤|n|≤n_max}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceVector {
    /// `pos[n-1] = zₙ`
    pub pos: Vec<Complex64>,
    /// `neg[n-1] = z₋ₙ`
    pub neg: Vec<Complex64>,
}

impl SequenceVector {
    pub fn zeros(n_max: usize) -> Self {
        Self { pos: vec![Complex64::default(); n_max], neg: vec![Complex64::default(); n_max] }
    }

    pub fn n_max(&self) -> usize {
        self.pos.len()
    }

    pub fn get(&self, n: i64) -> Complex64 {
        match n {
            n if n > 0 => self.pos[n as usize - 1],
            n if n < 0 => self.neg[(-n) as usize - 1],
            _ => panic!("index 0 is not part of a sequence vector"),
        }
    }

    /// `‖z‖_α = (Σ_{n≠0}|n|^{2α}|zₙ|²)^{1/2}`.
    pub fn norm(&self, alpha: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_max() {
            let w = ((i + 1) as f64).powf(2.0 * alpha);
            acc += w * (self.pos[i].norm_sqr() + self.neg[i].norm_sqr());
        }
        acc.sqrt()
    }

    pub fn is_real_type(&self, tol: f64) -> bool {
        self.pos.iter().zip(&self.neg).all(|(a, b)| (a - b.conj()).norm() <= tol * (1.0 + a.norm()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.n_max().max(other.n_max());
        let at = |v: &Vec<Complex64>, i: usize| v.get(i).copied().unwrap_or_default();
        Self {
            pos: (0..n).map(|i| at(&self.pos, i) - at(&other.pos, i)).collect(),
            neg: (0..n).map(|i| at(&self.neg, i) - at(&other.neg, i)).collect(),
        }
    }
}

/// Weighted Fourier transform `(Φ₀ p)ₙ = p̂ₙ/√(|n|π)`, for `1 ≤ |n| ≤ n_max`.
pub fn phi0(p: &Potential, n_max: usize) -> Result<SequenceVector> {
    if p.mean.abs() > 1e-12 * p.l2().max(f64::MIN_POSITIVE) && p.mean != 0.0 {
        return Err(Error::NonzeroMean(p.mean));
    }
    let mut z = SequenceVector::zeros(n_max);
    for n in 1..=n_max {
        let w = 1.0 / (n as f64 * PI).sqrt();
        z.pos[n - 1] = p.coeff(n as i64) * w;
        z.neg[n - 1] = p.coeff(-(n as i64)) * w;
    }
    Ok(z)
}

/// `Φ₀⁻¹(z) = Σ √(|n|π) zₙ e^{2πinx}`; uses the positive modes, assuming reality.
pub fn phi0_inverse(z: &SequenceVector) -> Potential {
    let pos = z.pos.iter().enumerate().map(|(i, c)| c * ((i + 1) as f64 * PI).sqrt()).collect();
    Potential::new(0.0, pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_cosine() {
        let p = Potential::zero().with_trig(1, 2.0, 0.0);
        assert_eq!(p.coeff(1), Complex64::new(1.0, 0.0));
        assert!((p.sobolev_norm(0.0, false) - 2f64.sqrt()).abs() < 1e-15);
        assert!((p.sobolev_norm(1.0, false) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Potential::zero().sobolev_norm(2.0, true), 0.0);
    }

    #[test]
    fn samples_round_trip() {
        let p = Potential::new(0.3, vec![Complex64::new(0.2, -0.1), Complex64::new(0.0, 0.05)]);
        let s = p.samples(16);
        for (j, v) in s.iter().enumerate() {
            assert!((v - p.eval(j as f64 / 16.0)).abs() < 1e-14);
        }
        let back = Potential::from_samples(&s, 2);
        assert!(back.sub(&p).l2() < 1e-15);
        let l2grid = (s.iter().map(|v| v * v).sum::<f64>() / 16.0).sqrt();
        assert!((l2grid - p.l2()).abs() < 1e-14);
    }

    #[test]
    fn projection() {
        let p = Potential::zero().with_trig(1, 2.0, 0.0).with_trig(3, 2.0, 0.0);
        assert_eq!(p.project(2), Potential::zero().with_trig(1, 2.0, 0.0));
        assert_eq!(p.project(5), p);
        assert_eq!(p.tail(3), Potential::zero());
    }

    #[test]
    fn phi0_basics() {
        let p = Potential::zero().with_trig(1, 2.0, 0.0);
        let z = phi0(&p, 3).unwrap();
        assert!((z.get(1).re - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!((z.get(-1).re - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert_eq!(z.get(2), Complex64::default());
        assert!(phi0(&Potential::constant(1.0), 2).is_err());
        assert_eq!(phi0_inverse(&SequenceVector::zeros(4)), Potential::zero());
    }

    #[test]
    fn json_round_trip_and_reality() {
        let p = Potential::new(0.1, vec![Complex64::new(0.2, -0.1), Complex64::new(0.0, 0.05)]);
        let back = Potential::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        let bad = serde_json::json!({"K": 1, "mean": 0.0, "coeffs": [[1, 0.1, 0.2], [-1, 0.1, 0.2]]});
        assert!(Potential::from_json(&bad).is_err());
        let neg = serde_json::json!({"K": 1, "mean": 0.0, "coeffs": [[-1, 0.1, 0.2]]});
        assert_eq!(Potential::from_json(&neg).unwrap().coeff(1), Complex64::new(0.1, -0.2));
    }
}
