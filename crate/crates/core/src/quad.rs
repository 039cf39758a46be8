//! Quadrature rules for integrals over a gap.
//!
//! Gap integrals carry the weight `1/√((b−λ)(λ−a))`. Putting
//! `λ = τ − (γ/2)cos θ` turns that weight into `dθ`, so a partial gap
//! integral from `a` to any point becomes a smooth integral over `θ`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::{GaussChebyshevFirstKind, GaussLegendre};

/// Gauss–Chebyshev (first kind) nodes on `[-1, 1]`; every weight is `π/n`.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    GaussChebyshevFirstKind::new(NonZeroUsize::new(n.max(1)).unwrap()).nodes().copied().collect()
}

/// `∫_{-1}^{1} f(t) dt/√(1−t²)` with `n` Chebyshev nodes.
pub fn chebyshev<F: FnMut(f64) -> f64>(n: usize, mut f: F) -> f64 {
    chebyshev_nodes(n).into_iter().map(&mut f).sum::<f64>() * PI / n as f64
}

/// Gauss–Legendre rule of `n` points.
pub fn legendre(n: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap())
}

/// The angle `θ ∈ [0, π]` of `λ ∈ [a, b]` under `λ = τ − (γ/2)cos θ`,
/// computed without cancellation near either endpoint.
pub fn gap_angle(a: f64, b: f64, lambda: f64) -> f64 {
    2.0 * (lambda - a).max(0.0).sqrt().atan2((b - lambda).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_moments() {
        assert!((chebyshev(8, |_| 1.0) - PI).abs() < 1e-14);
        assert!((chebyshev(8, |t| t * t) - PI / 2.0).abs() < 1e-14);
        assert!(chebyshev(8, |t| t.powi(3)).abs() < 1e-14);
    }

    #[test]
    fn angle_endpoints() {
        assert_eq!(gap_angle(1.0, 3.0, 1.0), 0.0);
        assert!((gap_angle(1.0, 3.0, 3.0) - PI).abs() < 1e-15);
        assert!((gap_angle(1.0, 3.0, 2.0) - PI / 2.0).abs() < 1e-15);
        let lam = 1.0 + f64::EPSILON;
        // cos θ = (τ − λ)/(γ/2) stays consistent even at the edge
        assert!(gap_angle(1.0, 3.0, lam) > 0.0);
        assert!((legendre(10).integrate(0.0, PI, |x| x.sin()) - 2.0).abs() < 1e-14);
    }
}
