//! Fundamental solutions of `−y'' + q y = λ y` on `[0, 1]`.
//!
//! The transfer matrix `M(1, λ)` is built from sixth-order Magnus steps
//! (three Gauss nodes). Each step exponentiates a traceless 2×2 matrix in
//! closed form, so the free part `−λ` is propagated exactly and
//! `det M = 1` holds to round-off. The λ-derivative differentiates the
//! discrete propagator, which is what Newton iterations on Δ want.

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::Potential;

/// Scalars the integrator runs over: `f64` on the real axis, `Complex64` off it.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + Send
    + Sync
{
    fn real(x: f64) -> Self;
    fn modulus(self) -> f64;
    /// `(C, S, dC/dz, dS/dz)` with `C = cosh √z`, `S = sinh √z / √z`.
    fn cs(z: Self) -> (Self, Self, Self, Self);
}

// Series of S and dS/dz around 0; C and dC/dz = S/2 follow.
fn cs_series<T: Scalar>(z: T) -> (T, T, T, T) {
    let mut c = T::real(0.0);
    let mut s = T::real(0.0);
    let mut ds = T::real(0.0);
    let mut zk = T::real(1.0);
    let mut f2k = 1.0; // (2k)!
    for k in 0..12 {
        let kf = k as f64;
        let f2k1 = f2k * (2.0 * kf + 1.0);
        c = c + zk * (1.0 / f2k);
        s = s + zk * (1.0 / f2k1);
        let f2k3 = f2k1 * (2.0 * kf + 2.0) * (2.0 * kf + 3.0);
        ds = ds + zk * ((kf + 1.0) / f2k3);
        zk = zk * z;
        f2k = f2k1 * (2.0 * kf + 2.0);
    }
    (c, s, s * 0.5, ds)
}

impl Scalar for f64 {
    fn real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn cs(z: f64) -> (f64, f64, f64, f64) {
        if z.abs() < 0.05 {
            return cs_series(z);
        }
        let (c, s) = if z > 0.0 {
            let r = z.sqrt();
            (r.cosh(), r.sinh() / r)
        } else {
            let r = (-z).sqrt();
            (r.cos(), r.sin() / r)
        };
        (c, s, 0.5 * s, (c - s) / (2.0 * z))
    }
}

impl Scalar for Complex64 {
    fn real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn cs(z: Complex64) -> (Complex64, Complex64, Complex64, Complex64) {
        if z.norm() < 0.05 {
            return cs_series(z);
        }
        let r = z.sqrt();
        let c = r.cosh();
        let s = r.sinh() / r;
        (c, s, s * 0.5, (c - s) / (z * 2.0))
    }
}

#[derive(Clone, Copy, Debug)]
struct Mat<T>([[T; 2]; 2]);

impl<T: Scalar> Mat<T> {
    fn id() -> Self {
        let (o, z) = (T::real(1.0), T::real(0.0));
        Mat([[o, z], [z, o]])
    }
    fn zero() -> Self {
        let z = T::real(0.0);
        Mat([[z, z], [z, z]])
    }
    fn mul(&self, b: &Self) -> Self {
        let a = &self.0;
        let b = &b.0;
        Mat([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
    fn add(&self, b: &Self) -> Self {
        let (a, b) = (&self.0, &b.0);
        Mat([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
    fn scale(&self, f: f64) -> Self {
        let a = &self.0;
        Mat([[a[0][0] * f, a[0][1] * f], [a[1][0] * f, a[1][1] * f]])
    }
    fn scale_t(&self, f: T) -> Self {
        let a = &self.0;
        Mat([[a[0][0] * f, a[0][1] * f], [a[1][0] * f, a[1][1] * f]])
    }
    fn comm(&self, b: &Self) -> Self {
        self.mul(b).add(&b.mul(self).scale(-1.0))
    }
}

/// Entries of `M(1, λ)` and optionally their λ-derivatives.
#[derive(Clone, Copy, Debug)]
pub struct FundamentalData<T> {
    pub lambda: T,
    pub y1: T,
    pub y2: T,
    pub dy1: T,
    pub dy2: T,
    /// `∂_λ` of `(y1, y2, dy1, dy2)`.
    pub d_lambda: Option<[T; 4]>,
}

impl<T: Scalar> FundamentalData<T> {
    pub fn discriminant(&self) -> T {
        self.y1 + self.dy2
    }
    pub fn discriminant_dot(&self) -> Option<T> {
        self.d_lambda.map(|d| d[0] + d[3])
    }
    pub fn wronskian(&self) -> T {
        self.y1 * self.dy2 - self.y2 * self.dy1
    }
    /// `ρΔ − 2` for `ρ = ±1`, assembled from the small entries of `M − ρ·Id`.
    ///
    /// Near a nearly closed gap `M ≈ ρ·Id`, and the trace form loses
    /// all relative precision; `y2·y1' − (y1−ρ)(y2'−ρ)` keeps it.
    pub fn excess(&self, rho: f64) -> T {
        self.y2 * self.dy1 - (self.y1 - T::real(rho)) * (self.dy2 - T::real(rho))
    }
    /// `∂_λ` of [`FundamentalData::excess`].
    pub fn excess_dot(&self, rho: f64) -> Option<T> {
        self.d_lambda.map(|d| {
            let a = self.y1 - T::real(rho);
            let b = self.dy2 - T::real(rho);
            d[1] * self.dy1 + self.y2 * d[2] - d[0] * b - a * d[3]
        })
    }
}

const GAUSS_OFFSET: f64 = 0.387_298_334_620_741_7; // √15/10

/// Default resolution: steps per unit of `√λ_max`.
pub const DEFAULT_STEPS_PER_ROOT: f64 = 3.0;
const MIN_STEPS: usize = 64;

/// Transfer-matrix integrator for one potential on a fixed λ window.
#[derive(Clone, Debug)]
pub struct HillSolver {
    steps: usize,
    lambda_max: f64,
    /// `q` at the three Gauss nodes of every step.
    nodes: Vec<[f64; 3]>,
}

impl HillSolver {
    /// Resolution sized so that `|λ| ≤ lambda_max` is integrated at full accuracy.
    pub fn new(q: &Potential, lambda_max: f64) -> Self {
        Self::with_density(q, lambda_max, DEFAULT_STEPS_PER_ROOT)
    }

    pub fn with_density(q: &Potential, lambda_max: f64, steps_per_root: f64) -> Self {
        let k = q.k() as f64;
        let freq = lambda_max.abs().max(1.0).sqrt() + 2.0 * PI * k;
        let steps = ((steps_per_root * freq).ceil() as usize).max(MIN_STEPS);
        Self::with_steps(q, lambda_max, steps)
    }

    pub fn with_steps(q: &Potential, lambda_max: f64, steps: usize) -> Self {
        let h = 1.0 / steps as f64;
        let nodes = (0..steps)
            .map(|j| {
                let x0 = j as f64 * h;
                [
                    q.eval(x0 + (0.5 - GAUSS_OFFSET) * h),
                    q.eval(x0 + 0.5 * h),
                    q.eval(x0 + (0.5 + GAUSS_OFFSET) * h),
                ]
            })
            .collect();
        Self { steps, lambda_max: lambda_max.abs().max(1.0), nodes }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn check<T: Scalar>(&self, lambda: T) -> Result<()> {
        let m = lambda.modulus();
        if !m.is_finite() || m > self.lambda_max * (1.0 + 1e-12) {
            return Err(Error::StepOverflow { lambda: m, max: self.lambda_max });
        }
        Ok(())
    }

    /// One Magnus step propagator and, if asked, its λ-derivative.
    fn step<T: Scalar>(&self, j: usize, lambda: T, deriv: bool) -> (Mat<T>, Mat<T>) {
        let h = 1.0 / self.steps as f64;
        let [q1, q2, q3] = self.nodes[j];
        let z = T::real(0.0);
        let one = T::real(1.0);
        let e = |v: f64| Mat([[z, z], [T::real(v), z]]);
        let a1 = Mat([[z, one * h], [(T::real(q2) - lambda) * h, z]]);
        let a2 = e((15f64).sqrt() * h / 3.0 * (q3 - q1));
        let a3 = e(10.0 * h / 3.0 * (q3 - 2.0 * q2 + q1));
        let c1 = a1.comm(&a2);
        let c2 = a1.comm(&a3.scale(2.0).add(&c1)).scale(-1.0 / 60.0);
        let left = a1.scale(-20.0).add(&a3.scale(-1.0)).add(&c1);
        let right = a2.add(&c2);
        let omega = a1.add(&a3.scale(1.0 / 12.0)).add(&left.comm(&right).scale(1.0 / 240.0));

        let a = (omega.0[0][0] - omega.0[1][1]) * 0.5;
        let (b, c) = (omega.0[0][1], omega.0[1][0]);
        let zz = a * a + b * c;
        let (cc, ss, dcc, dss) = T::cs(zz);
        let traceless = Mat([[a, b], [c, -a]]);
        let p = Mat::id().scale_t(cc).add(&traceless.scale_t(ss));
        if !deriv {
            return (p, Mat::zero());
        }
        let da1 = e(-h);
        let dc1 = da1.comm(&a2);
        let dc2 = da1.comm(&a3.scale(2.0).add(&c1)).add(&a1.comm(&dc1)).scale(-1.0 / 60.0);
        let dleft = da1.scale(-20.0).add(&dc1);
        let domega = da1.add(&dleft.comm(&right).add(&left.comm(&dc2)).scale(1.0 / 240.0));
        let da = (domega.0[0][0] - domega.0[1][1]) * 0.5;
        let (db, dc) = (domega.0[0][1], domega.0[1][0]);
        let dz = a * da * 2.0 + b * dc + db * c;
        let dtraceless = Mat([[da, db], [dc, -da]]);
        let dp = Mat::id()
            .scale_t(dcc * dz)
            .add(&traceless.scale_t(dss * dz))
            .add(&dtraceless.scale_t(ss));
        (p, dp)
    }

    /// `M(1, λ)` with optional λ-derivatives.
    pub fn fundamental<T: Scalar>(&self, lambda: T, need_derivative: bool) -> Result<FundamentalData<T>> {
        self.check(lambda)?;
        let mut m = Mat::<T>::id();
        let mut dm = Mat::<T>::zero();
        for j in 0..self.steps {
            let (p, dp) = self.step(j, lambda, need_derivative);
            if need_derivative {
                dm = dp.mul(&m).add(&p.mul(&dm));
            }
            m = p.mul(&m);
        }
        let m = m.0;
        Ok(FundamentalData {
            lambda,
            y1: m[0][0],
            y2: m[0][1],
            dy1: m[1][0],
            dy2: m[1][1],
            d_lambda: need_derivative.then(|| [dm.0[0][0], dm.0[0][1], dm.0[1][0], dm.0[1][1]]),
        })
    }

    /// `M(x_k, λ)` at `checkpoints` equally spaced interior points plus `x = 1`.
    pub fn checkpoints<T: Scalar>(&self, lambda: T, checkpoints: usize) -> Result<Vec<(f64, [T; 4])>> {
        self.check(lambda)?;
        let mut out = Vec::new();
        let mut m = Mat::<T>::id();
        let every = (self.steps / (checkpoints + 1)).max(1);
        for j in 0..self.steps {
            m = self.step(j, lambda, false).0.mul(&m);
            if (j + 1) % every == 0 || j + 1 == self.steps {
                let x = (j + 1) as f64 / self.steps as f64;
                out.push((x, [m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1]]));
            }
        }
        Ok(out)
    }

    pub fn discriminant<T: Scalar>(&self, lambda: T) -> Result<T> {
        Ok(self.fundamental(lambda, false)?.discriminant())
    }

    /// `(Δ, Δ̇)`.
    pub fn discriminant_with_dot<T: Scalar>(&self, lambda: T) -> Result<(T, T)> {
        let f = self.fundamental(lambda, true)?;
        Ok((f.discriminant(), f.discriminant_dot().expect("derivative requested")))
    }
}

/// One-shot convenience: `M(1, λ)` for `q` with a window just large enough for `λ`.
pub fn fundamental_matrix(q: &Potential, lambda: Complex64, need_derivative: bool) -> Result<FundamentalData<Complex64>> {
    HillSolver::new(q, lambda.norm()).fundamental(lambda, need_derivative)
}

pub fn discriminant(q: &Potential, lambda: Complex64) -> Result<Complex64> {
    Ok(fundamental_matrix(q, lambda, false)?.discriminant())
}

pub fn discriminant_derivative(q: &Potential, lambda: Complex64) -> Result<Complex64> {
    Ok(fundamental_matrix(q, lambda, true)?.discriminant_dot().expect("derivative requested"))
}

/// CSV rows `lambda,delta_re,delta_im` on a real λ grid.
pub fn discriminant_csv(solver: &HillSolver, lambdas: &[f64]) -> Result<String> {
    let mut s = String::from("lambda,delta_re,delta_im\n");
    for &l in lambdas {
        let d = solver.discriminant(Complex64::new(l, 0.0))?;
        s.push_str(&format!("{l:.17e},{:.17e},{:.17e}\n", d.re, d.im));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(lambda: f64) -> (f64, f64, f64, f64) {
        let r = lambda.sqrt();
        (r.cos(), r.sin() / r, -r * r.sin(), r.cos())
    }

    #[test]
    fn free_operator_is_exact() {
        let s = HillSolver::new(&Potential::zero(), 5000.0);
        for &l in &[0.3, PI * PI, 4.0 * PI * PI, 1234.5, 4999.0] {
            let f = s.fundamental(l, false).unwrap();
            let (y1, y2, dy1, dy2) = free(l);
            assert!((f.y1 - y1).abs() < 1e-12);
            assert!((f.y2 - y2).abs() < 1e-12);
            assert!((f.dy1 - dy1).abs() < 1e-12 * l.sqrt());
            assert!((f.dy2 - dy2).abs() < 1e-12);
        }
        let d = s.discriminant(0.0).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
        assert!(s.discriminant(PI * PI / 4.0).unwrap().abs() < 1e-13);
    }

    #[test]
    fn overflow_is_reported() {
        let s = HillSolver::new(&Potential::zero(), 100.0);
        assert!(matches!(s.fundamental(200.0, false), Err(Error::StepOverflow { .. })));
    }

    #[test]
    fn complex_matches_real_on_axis() {
        let q = Potential::zero().with_trig(1, 0.6, 0.2).with_trig(2, -0.3, 0.1);
        let s = HillSolver::new(&q, 500.0);
        let a = s.fundamental(37.0, true).unwrap();
        let b = s.fundamental(Complex64::new(37.0, 0.0), true).unwrap();
        assert!((b.y2.re - a.y2).abs() < 1e-14 && b.y2.im.abs() < 1e-14);
        assert!((b.discriminant_dot().unwrap().re - a.discriminant_dot().unwrap()).abs() < 1e-13);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let q = Potential::zero().with_trig(1, 0.6, 0.2).with_trig(3, -0.3, 0.1);
        let s = HillSolver::new(&q, 3000.0);
        for &l in &[-2.0, 5.0, 60.0, 900.0, 2500.0] {
            let (_, dd) = s.discriminant_with_dot(l).unwrap();
            let h = 1e-5 * l.abs().max(1.0);
            let fd = (s.discriminant(l + h).unwrap() - s.discriminant(l - h).unwrap()) / (2.0 * h);
            assert!((dd - fd).abs() <= 1e-6 * dd.abs().max(1e-3), "{l}: {dd} vs {fd}");
        }
        let z = Complex64::new(40.0, 3.0);
        let f = s.fundamental(z, true).unwrap();
        let h = Complex64::new(1e-5, 0.0);
        let fd = (s.discriminant(z + h).unwrap() - s.discriminant(z - h).unwrap()) / (h * 2.0);
        assert!((f.discriminant_dot().unwrap() - fd).norm() < 1e-7);
    }

    #[test]
    fn wronskian_along_the_path() {
        let q = Potential::zero().with_trig(1, 1.0, -0.4).with_trig(4, 0.3, 0.0);
        let s = HillSolver::new(&q, 2e4);
        for &l in &[-5.0, 10.0, 1.9e4] {
            for (_, m) in s.checkpoints(l, 8).unwrap() {
                let w: f64 = m[0] * m[3] - m[1] * m[2];
                assert!((w - 1.0).abs() < 1e-10);
            }
        }
    }
}
