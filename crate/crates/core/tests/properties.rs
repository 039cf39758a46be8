use hill_birkhoff::birkhoff::{birkhoff_map, resolution_floor};
use hill_birkhoff::fourier::{phi0, phi0_inverse};
use hill_birkhoff::Potential;
use num_complex::Complex64;
use proptest::prelude::*;

fn potential(max_amp: f64) -> impl Strategy<Value = Potential> {
    prop::collection::vec((-max_amp..max_amp, -max_amp..max_amp), 1..4)
        .prop_map(|c| Potential::new(0.0, c.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn phi0_round_trip(q in potential(1.0)) {
        let back = phi0_inverse(&phi0(&q, q.k()).unwrap());
        prop_assert!(back.sub(&q).l2() <= 1e-14 * (1.0 + q.l2()));
    }

    #[test]
    fn sobolev_norms_increase_with_s(q in potential(1.0), s in 0.0f64..3.0) {
        prop_assert!(q.sobolev_norm(s, false) <= q.sobolev_norm(s + 0.5, false) * (1.0 + 1e-15));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    // translations rotate Birkhoff coordinates: zₙ(q(·+a)) = e^{2πina} zₙ(q)
    #[test]
    fn translation_rotates_coordinates(q in potential(0.4), a in 0.0f64..1.0) {
        let n_max = 8;
        let z = birkhoff_map(&q, n_max).unwrap();
        let zs = birkhoff_map(&q.shift(a), n_max).unwrap();
        for n in 1..=n_max {
            let (e, es) = (z.entry(n), zs.entry(n));
            // the step grid does not move with the potential, so allow discretization-level error
            let tol = 1e-8 * (1.0 + e.z.norm());
            let floor = resolution_floor(&z.spec, n).clamp(1e-7, 1.0);
            prop_assert!((e.action - es.action).abs() <= floor * e.action + 1e-20, "n = {}: I {} vs {}", n, e.action, es.action);
            let rot = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * n as f64 * a);
            prop_assert!((es.z - rot * e.z).norm() <= tol, "n = {}: {} vs {}", n, es.z, rot * e.z);
        }
    }
}
