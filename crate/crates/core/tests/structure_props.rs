use hypercollapse::structure::{graph_envelope, StructureProfile};
use hypercollapse::MixingDistribution;
use proptest::prelude::*;

/// Random finite-support laws, with or without a patch coefficient.
fn arb_law() -> impl Strategy<Value = MixingDistribution> {
    (proptest::collection::vec(0.0f64..1.0, 2..7), any::<bool>()).prop_filter_map(
        "needs mass on x or x²",
        |(mut c, drop_patch)| {
            if drop_patch {
                c[0] = 0.0;
            }
            if c[0] + c[1] < 1e-3 {
                return None;
            }
            let total: f64 = c.iter().sum();
            c.iter_mut().for_each(|x| *x /= total);
            MixingDistribution::probability(c).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn envelope_sandwich(m in arb_law()) {
        let p = StructureProfile::with_defaults(&m).unwrap();
        let xs: Vec<f64> = (1..500).map(|i| i as f64 / 500.0).collect();
        let ts: Vec<f64> = xs.iter().map(|&x| p.t(x)).collect();
        let s_max = 2.0 * p.t(0.95);
        let mut prev = (0.0, 0.0);
        for i in 0..200 {
            let s = s_max * i as f64 / 199.0;
            let (g, gs) = (p.lower(s), p.upper(s));
            prop_assert!(g <= gs + 1e-12, "s = {}: g = {} > g* = {}", s, g, gs);
            prop_assert!(g >= prev.0 && gs >= prev.1);
            for (&x, &t) in xs.iter().zip(&ts) {
                prop_assert!(!(x < g && t > s + 1e-9), "t({}) = {} > s = {} below g = {}", x, t, s, g);
                prop_assert!(!(x > gs && t < s - 1e-9), "t({}) = {} < s = {} above g* = {}", x, t, s, gs);
            }
            prev = (g, gs);
        }
    }

    #[test]
    fn jumps_are_root_pairs(m in arb_law()) {
        let p = StructureProfile::with_defaults(&m).unwrap();
        for j in &p.xi {
            prop_assert!(j.left < j.right);
            // g is right-continuous: g(s) is the right endpoint.
            prop_assert!((p.lower(j.s) - j.right).abs() < 1e-9 || j.right > 1.0 - 1e-9);
            let below = p.lower(j.s * (1.0 - 1e-7));
            prop_assert!(below <= j.left + 1e-3, "g just below s* = {} vs left {}", below, j.left);
            let h = |x: f64| j.s * m.derivative(x) + (-x).ln_1p();
            // Near x = 1 the slope of h is ~1/(1-x), so check the location
            // of the root rather than the residual.
            let is_root = |x: f64| {
                h(x).abs() < 1e-10 || {
                    let (a, b) = (h((x - 1e-10).max(0.0)), h((x + 1e-10).min(1.0 - 1e-13)));
                    a.signum() != b.signum() || a == 0.0 || b == 0.0
                }
            };
            if j.left > 0.0 {
                prop_assert!(is_root(j.left), "h(left = {}) = {}", j.left, h(j.left));
            }
            if j.right < 1.0 - 1e-9 {
                prop_assert!(is_root(j.right), "h(right = {}) = {}", j.right, h(j.right));
            }
        }
    }

    #[test]
    fn graph_envelope_is_continuous_and_monotone(rho2 in 0.05f64..1.0) {
        let mut prev = 0.0;
        for i in 0..2000 {
            let s = i as f64 * 0.005 / rho2;
            let g = graph_envelope(rho2, s);
            prop_assert!(g >= prev);
            prop_assert!(g - prev < 0.1, "step {} at s = {}", g - prev, s);
            prev = g;
        }
    }
}
