use proptest::prelude::*;

use fluidport::selection::evenly_spread_plan;
use fluidport::spo::{argmax, spo_loss, spo_plus_loss};

proptest! {
    // any feasible (n, k) yields a well-formed plan: k distinct sorted
    // in-range ports whose complement is the unobserved set
    #[test]
    fn evenly_spread_plan_is_well_formed(n in 2usize..200, frac in 0.0f64..1.0) {
        let k = 1 + (frac * (n - 1) as f64) as usize;
        let plan = evenly_spread_plan(n, k).unwrap();
        prop_assert_eq!(plan.observed().len(), k);
        prop_assert!(plan.observed().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(plan.observed().iter().all(|&p| (1..=n).contains(&p)));
        prop_assert_eq!(plan.observed().len() + plan.unobserved().len(), n);
        for &p in plan.unobserved() {
            prop_assert!(!plan.is_observed(p));
        }
    }

    // the surrogate upper-bounds the regret and both vanish at truth
    #[test]
    fn surrogate_dominates_regret(
        g in prop::collection::vec(0.0f64..3.0, 2..40),
        noise in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let p: Vec<f64> = g.iter().zip(&noise).map(|(a, b)| a + b).collect();
        prop_assert!(spo_plus_loss(&p, &g) >= spo_loss(&p, &g) - 1e-12);
        prop_assert!(spo_loss(&p, &g) >= -1e-12);
        prop_assert!(spo_plus_loss(&g, &g).abs() < 1e-12);
    }

    // decisions are scale-invariant
    #[test]
    fn argmax_scale_invariant(
        v in prop::collection::vec(-5.0f64..5.0, 1..60),
        c in 0.001f64..100.0,
    ) {
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        prop_assert_eq!(argmax(&scaled), argmax(&v));
    }
}
