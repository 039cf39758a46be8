//! The KdV oracle `u_t = −u_xxx + 6uu_x` on the circle, and the linear
//! flows it is compared against.
//!
//! The oracle is pseudospectral: the `−∂ₓ³` term is integrated exactly and the
//! nonlinearity `3∂ₓ(u²)` enters through four exponential (ETDRK4) stages,
//! evaluated on a zero-padded grid so the product is alias free.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::Potential;
use crate::frequencies::FrequencyData;

/// `sₙᶜ = (2πn)³ + 12cnπ`, the phase speed of mode `n` under the Airy flow.
pub fn airy_speed(n: usize, c: f64) -> f64 {
    (2.0 * PI * n as f64).powi(3) + 12.0 * c * n as f64 * PI
}

/// `e^{tL_c}q` with `L_c = −∂ₓ³ + 6c∂ₓ`: every mode turns at `sₙᶜ`.
pub fn airy_flow(q: &Potential, c: f64, t: f64) -> Potential {
    let pos = q.pos.iter().enumerate().map(|(i, a)| a * Complex64::from_polar(1.0, airy_speed(i + 1, c) * t)).collect();
    Potential::new(q.mean, pos)
}

/// `Σ e^{iωₙᶜt}q̂ₙe^{2πinx}`; modes beyond the frequency table are kept fixed.
pub fn wkb_approximant(q: &Potential, freqs: &FrequencyData, t: f64) -> Potential {
    let pos = q
        .pos
        .iter()
        .enumerate()
        .map(|(i, a)| match freqs.omega_c.get(i) {
            Some(w) => a * Complex64::from_polar(1.0, w * t),
            None => *a,
        })
        .collect();
    Potential::new(q.mean, pos)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepControl {
    /// Modes carried by the oracle; default `8K`.
    pub k_sim: Option<usize>,
    /// Starting step; default from `(2πK)³δt ≤ 0.5`.
    pub dt_max: Option<f64>,
    /// Allowed relative drift of `‖u‖²` and of the mean per unit time.
    pub drift_tol: f64,
    /// Allowed relative drift of `𝓗` per unit time; the accuracy control.
    pub hamiltonian_tol: f64,
    pub max_halvings: u32,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { k_sim: None, dt_max: None, drift_tol: 1e-8, hamiltonian_tol: 1e-9, max_halvings: 8 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Conserved {
    pub mean: f64,
    pub l2_sq: f64,
    /// `∫(½u_x² + u³)dx`
    pub hamiltonian: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<Potential>,
    #[serde(skip)]
    pub wkb: Vec<Potential>,
    #[serde(skip)]
    pub remainder: Vec<Potential>,
    #[serde(skip)]
    pub airy: Option<Vec<Potential>>,
    pub conserved: Vec<Conserved>,
    pub dt: f64,
    pub k_sim: usize,
}

struct Stepper {
    k: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Stepper {
    fn new(k: usize) -> Self {
        // 3K+1 points make the quadratic and cubic products exact
        let m = (3 * k + 1).next_power_of_two().max(8);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self { k, m, fwd, inv, buf: vec![Complex64::default(); m], scratch: vec![Complex64::default(); len] }
    }

    fn to_grid(&mut self, u: &[Complex64]) {
        self.buf.fill(Complex64::default());
        self.buf[0] = u[0];
        for n in 1..=self.k {
            self.buf[n] = u[n];
            self.buf[self.m - n] = u[n].conj();
        }
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    /// `3∂ₓ(u²)` for modes `0..=K`.
    fn nonlinear(&mut self, u: &[Complex64], out: &mut [Complex64]) {
        self.to_grid(u);
        for v in self.buf.iter_mut() {
            *v = Complex64::new(v.re * v.re, 0.0);
        }
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        let s = 1.0 / self.m as f64;
        out[0] = Complex64::default();
        for n in 1..=self.k {
            out[n] = self.buf[n] * Complex64::new(0.0, 6.0 * PI * n as f64 * s);
        }
    }

    fn conserved(&mut self, u: &[Complex64]) -> Conserved {
        let mut l2 = u[0].re * u[0].re;
        let mut kin = 0.0;
        for n in 1..=self.k {
            l2 += 2.0 * u[n].norm_sqr();
            kin += (2.0 * PI * n as f64).powi(2) * u[n].norm_sqr();
        }
        self.to_grid(u);
        let cubic = self.buf.iter().map(|v| v.re.powi(3)).sum::<f64>() / self.m as f64;
        Conserved { mean: u[0].re, l2_sq: l2, hamiltonian: kin + cubic }
    }
}

/// ETDRK4 weights for `z = isₙh`: `e^{z/2}`, `e^z`, `Q` and `f₁, f₂, f₃`, all
/// carrying the factor `h`.
struct Etd {
    e2: Vec<Complex64>,
    e: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl Etd {
    fn new(k: usize, h: f64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let coeffs = |z: Complex64| -> [Complex64; 4] {
            let ez = z.exp();
            let z3 = z * z * z;
            [
                ((z / 2.0).exp() - one) / z,
                (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3,
                (2.0 + z + ez * (z - 2.0)) / z3,
                (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3,
            ]
        };
        let mut out = Self { e2: vec![], e: vec![], q: vec![], f1: vec![], f2: vec![], f3: vec![] };
        for n in 0..=k {
            let z = Complex64::new(0.0, airy_speed(n, 0.0) * h);
            let c = if z.norm() >= 0.5 {
                coeffs(z)
            } else {
                // small |z|: average over a unit circle around z to avoid cancellation
                let pts = 64;
                let mut acc = [Complex64::default(); 4];
                for j in 0..pts {
                    let r = Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / pts as f64);
                    let v = coeffs(z + r);
                    for i in 0..4 {
                        acc[i] += v[i] / pts as f64;
                    }
                }
                acc
            };
            out.e2.push((z / 2.0).exp());
            out.e.push(z.exp());
            out.q.push(c[0] * h);
            out.f1.push(c[1] * h);
            out.f2.push(c[2] * h);
            out.f3.push(c[3] * h);
        }
        out
    }
}

/// Cox–Matthews ETDRK4 across `steps` steps of the size behind `w`.
fn advance(st: &mut Stepper, u: &mut [Complex64], w: &Etd, steps: usize) {
    let k = u.len();
    let z = Complex64::default();
    let (mut nu, mut na, mut nb, mut nc) = (vec![z; k], vec![z; k], vec![z; k], vec![z; k]);
    let (mut a, mut b, mut c) = (vec![z; k], vec![z; k], vec![z; k]);
    for _ in 0..steps {
        st.nonlinear(u, &mut nu);
        for n in 0..k {
            a[n] = w.e2[n] * u[n] + w.q[n] * nu[n];
        }
        st.nonlinear(&a, &mut na);
        for n in 0..k {
            b[n] = w.e2[n] * u[n] + w.q[n] * na[n];
        }
        st.nonlinear(&b, &mut nb);
        for n in 0..k {
            c[n] = w.e2[n] * a[n] + w.q[n] * (2.0 * nb[n] - nu[n]);
        }
        st.nonlinear(&c, &mut nc);
        for n in 0..k {
            u[n] = w.e[n] * u[n] + w.f1[n] * nu[n] + 2.0 * w.f2[n] * (na[n] + nb[n]) + w.f3[n] * nc[n];
        }
    }
}

/// Runs the oracle over `times` (increasing, starting anywhere; the state at
/// `times[0]` is `q`). The step is halved until the `‖u‖²` and mean drift
/// per unit time meet `ctl.drift_tol`.
pub fn evolve_kdv(q: &Potential, times: &[f64], ctl: &StepControl) -> Result<FlowTrajectory> {
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("time grid must be non-empty and increasing".into()));
    }
    let k = ctl.k_sim.unwrap_or(8 * q.k()).max(q.k()).max(1);
    let dt0 = ctl.dt_max.unwrap_or(0.5 / (2.0 * PI * q.k().max(1) as f64).powi(3));
    if !(dt0 > 0.0) || !(ctl.drift_tol > 0.0) || !(ctl.hamiltonian_tol > 0.0) {
        return Err(Error::Invalid("step and drift tolerance must be positive".into()));
    }
    let span = times[times.len() - 1] - times[0];
    // pick the step on a short probe, then confirm on the full grid
    let probe = [times[0], times[0] + span.min(1.0)];
    let mut dt = dt0;
    let mut halvings = 0;
    loop {
        let on_probe = span > 1.0;
        let grid: &[f64] = if on_probe { &probe } else { times };
        let traj = run(q, grid, k, dt)?;
        if drift_ok(&traj, ctl) {
            if !on_probe {
                return Ok(traj);
            }
            let full = run(q, times, k, dt)?;
            if drift_ok(&full, ctl) {
                return Ok(full);
            }
        }
        if halvings == ctl.max_halvings {
            return Err(Error::Convergence(format!(
                "KdV oracle drift above tolerance ({:e} for ‖u‖², {:e} for 𝓗, per unit time) even at step {dt:e}",
                ctl.drift_tol, ctl.hamiltonian_tol
            )));
        }
        dt /= 2.0;
        halvings += 1;
    }
}

fn drift_ok(traj: &FlowTrajectory, ctl: &StepControl) -> bool {
    let c0 = traj.conserved[0];
    if c0.l2_sq == 0.0 {
        return true;
    }
    let span = (traj.times[traj.times.len() - 1] - traj.times[0]).max(1.0);
    let h_scale = c0.hamiltonian.abs().max(c0.l2_sq);
    traj.conserved.iter().all(|c| {
        let l2 = (c.l2_sq - c0.l2_sq).abs() / c0.l2_sq;
        let mean = (c.mean - c0.mean).abs() / c0.l2_sq.sqrt();
        let h = (c.hamiltonian - c0.hamiltonian).abs() / h_scale;
        l2.max(mean) <= ctl.drift_tol * span && h <= ctl.hamiltonian_tol * span
    })
}

fn run(q: &Potential, times: &[f64], k: usize, dt_max: f64) -> Result<FlowTrajectory> {
    let mut st = Stepper::new(k);
    let mut u = vec![Complex64::default(); k + 1];
    u[0] = Complex64::new(q.mean, 0.0);
    for (i, a) in q.pos.iter().enumerate() {
        u[i + 1] = *a;
    }
    let snapshot = |u: &[Complex64]| Potential::new(u[0].re, u[1..].to_vec());
    let mut states = vec![snapshot(&u)];
    let mut conserved = vec![st.conserved(&u)];
    let mut used = 0.0f64;
    for w in times.windows(2) {
        let gap = w[1] - w[0];
        let steps = (gap / dt_max).ceil().max(1.0) as usize;
        let h = gap / steps as f64;
        used = used.max(h);
        let etd = Etd::new(k, h);
        advance(&mut st, &mut u, &etd, steps);
        if u.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Convergence(format!("KdV oracle blew up before t = {}", w[1])));
        }
        states.push(snapshot(&u));
        conserved.push(st.conserved(&u));
    }
    Ok(FlowTrajectory {
        times: times.to_vec(),
        states,
        wkb: vec![],
        remainder: vec![],
        airy: None,
        conserved,
        dt: used,
        k_sim: k,
    })
}

/// `n` equally spaced samples on `[0, t_final]`.
pub fn uniform_times(t_final: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|i| t_final * i as f64 / (n - 1) as f64).collect()
}

impl FlowTrajectory {
    /// Fills the WKB approximant and `Rᵗ = u(t) − wkb(t)` from the initial state.
    pub fn with_wkb(mut self, freqs: &FrequencyData) -> Self {
        let q = &self.states[0];
        let t0 = self.times[0];
        self.wkb = self.times.iter().map(|t| wkb_approximant(q, freqs, t - t0)).collect();
        self.remainder = self.states.iter().zip(&self.wkb).map(|(u, w)| u.sub(w)).collect();
        self
    }

    /// Fills `e^{tL_c}q` with `c` the mean of the initial state.
    pub fn with_airy(mut self) -> Self {
        let q = &self.states[0];
        let t0 = self.times[0];
        self.airy = Some(self.times.iter().map(|t| airy_flow(q, q.mean, t - t0)).collect());
        self
    }

    /// One JSON object per time sample.
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.times.iter().enumerate() {
            let mut row = serde_json::json!({
                "t": t,
                "u": self.states[i].to_json(),
                "mean": self.conserved[i].mean,
                "l2_sq": self.conserved[i].l2_sq,
                "hamiltonian": self.conserved[i].hamiltonian,
            });
            if let Some(r) = self.remainder.get(i) {
                row["remainder"] = r.to_json();
            }
            s.push_str(&row.to_string());
            s.push('\n');
        }
        s
    }

    /// Largest relative change of `‖u‖²` and `𝓗` against `t = times[0]`.
    pub fn max_drift(&self) -> (f64, f64) {
        let c0 = self.conserved[0];
        let mut d = (0.0f64, 0.0f64);
        for c in &self.conserved {
            d.0 = d.0.max((c.l2_sq - c0.l2_sq).abs() / c0.l2_sq.max(f64::MIN_POSITIVE));
            d.1 = d.1.max((c.hamiltonian - c0.hamiltonian).abs() / c0.hamiltonian.abs().max(f64::MIN_POSITIVE));
        }
        d
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RemainderRow {
    pub t: f64,
    /// `‖Rᵗ‖_{H^{N+1}}`
    pub r_high: f64,
    /// `‖Rᵗ‖_{H^N}`
    pub r_base: f64,
    /// `‖∂ₜRᵗ‖_{H^{N−1}}`, fourth-order finite differences on the grid.
    pub dr_low: f64,
    /// `‖u(t) − e^{tL_c}q‖_{H^{N+1}}` when the Airy flow is attached.
    pub airy_high: Option<f64>,
}

/// Norm table of the remainder on a uniform grid of at least 5 samples.
pub fn remainder_table(traj: &FlowTrajectory, big_n: u32) -> Result<Vec<RemainderRow>> {
    let m = traj.times.len();
    if traj.remainder.len() != m {
        return Err(Error::Invalid("remainder not attached to the trajectory".into()));
    }
    if m < 5 {
        return Err(Error::Invalid("need at least 5 samples for ∂ₜR".into()));
    }
    let h = (traj.times[m - 1] - traj.times[0]) / (m - 1) as f64;
    let uniform = traj.times.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
    if !uniform {
        return Err(Error::Invalid("∂ₜR needs a uniform time grid".into()));
    }
    let nf = big_n as f64;
    // fourth-order stencils: central inside, one-sided at the two ends
    let stencil = |i: usize| -> (usize, [f64; 5]) {
        match i {
            0 => (0, [-25.0, 48.0, -36.0, 16.0, -3.0]),
            1 => (0, [-3.0, -10.0, 18.0, -6.0, 1.0]),
            i if i + 2 < m => (i - 2, [1.0, -8.0, 0.0, 8.0, -1.0]),
            i if i + 2 == m => (m - 5, [-1.0, 6.0, -18.0, 10.0, 3.0]),
            _ => (m - 5, [3.0, -16.0, 36.0, -48.0, 25.0]),
        }
    };
    let k = traj.remainder.iter().map(|r| r.k()).max().unwrap_or(0);
    let rows = (0..m)
        .map(|i| {
            let r = &traj.remainder[i];
            let (start, w) = stencil(i);
            let mut dr = Potential::zero();
            if k > 0 {
                let pos = (1..=k)
                    .map(|n| (0..5).map(|j| traj.remainder[start + j].coeff(n as i64) * w[j]).sum::<Complex64>() / (12.0 * h))
                    .collect();
                dr = Potential::new(0.0, pos);
            }
            let airy_high = traj.airy.as_ref().map(|a| traj.states[i].sub(&a[i]).sobolev_norm(nf + 1.0, true));
            RemainderRow {
                t: traj.times[i],
                r_high: r.sobolev_norm(nf + 1.0, true),
                r_base: r.sobolev_norm(nf, true),
                dr_low: dr.sobolev_norm((nf - 1.0).max(0.0), true),
                airy_high,
            }
        })
        .collect();
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TailRow {
    pub l: usize,
    pub initial: f64,
    pub sup: f64,
    pub inf: f64,
    /// `sup_t |‖(Id−P_L)u(t)‖ − ‖(Id−P_L)u(0)‖|`
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TailStudy {
    pub s: f64,
    pub rows: Vec<TailRow>,
    /// `sup_t ||ûₙ(t)| − |q̂ₙ||` for `n = 1..=K_sim`.
    pub bands: Vec<f64>,
}

pub fn tail_projection_study(traj: &FlowTrajectory, ls: &[usize], s: f64) -> TailStudy {
    let rows = ls
        .iter()
        .map(|&l| {
            let norms: Vec<f64> = traj.states.iter().map(|u| u.tail(l).sobolev_norm(s, false)).collect();
            let initial = norms[0];
            TailRow {
                l,
                initial,
                sup: norms.iter().cloned().fold(f64::MIN, f64::max),
                inf: norms.iter().cloned().fold(f64::MAX, f64::min),
                eps: norms.iter().map(|v| (v - initial).abs()).fold(0.0, f64::max),
            }
        })
        .collect();
    let q = &traj.states[0];
    let bands = (1..=traj.k_sim)
        .map(|n| {
            let a = q.coeff(n as i64).norm();
            traj.states.iter().map(|u| (u.coeff(n as i64).norm() - a).abs()).fold(0.0, f64::max)
        })
        .collect();
    TailStudy { s, rows, bands }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_fixed() {
        let q = Potential::constant(0.7);
        let tr = evolve_kdv(&q, &[0.0, 1.0, 2.0], &StepControl::default()).unwrap();
        for u in &tr.states {
            assert_eq!(u, &q);
        }
    }

    #[test]
    fn small_single_mode_conserves_l2() {
        let q = Potential::zero().with_trig(1, 0.02, 0.0);
        let tr = evolve_kdv(&q, &uniform_times(10.0, 11), &StepControl::default()).unwrap();
        let n0 = q.l2();
        for u in &tr.states {
            assert!((u.l2() / n0 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_flows_are_isometries() {
        let q = Potential::new(0.3, vec![Complex64::new(0.2, 0.1), Complex64::new(-0.05, 0.02)]);
        let a = airy_flow(&q, 0.3, 1.7);
        assert!((a.sobolev_norm(2.5, true) - q.sobolev_norm(2.5, true)).abs() < 1e-13);
        assert_eq!(airy_flow(&q, 0.3, 0.0), q);
        let one = Potential::zero().with_trig(1, 2.0, 0.0);
        let a = airy_flow(&one, 0.0, 1e-3);
        assert!((a.coeff(1).arg() - (2.0 * PI).powi(3) * 1e-3).abs() < 1e-12);
    }
}
