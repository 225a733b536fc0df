use std::sync::Arc;

use lorenz_stab::cusp::{Doubling, IntervalMap, Logistic, SharedMap, SyntheticCusp, Tent};
use lorenz_stab::dynamics::check_lyapunov_bound;
use lorenz_stab::stats::{kendall_tau, linear_fit};
use lorenz_stab::transfer::{
    averaged_transfer_operator, build_ulam, l1_distance, quasi_holder_norm, reparametrized_family, sup_norm_bound,
};
use lorenz_stab::{Density, FieldSpec, Frame, NoiseLaw, NoiseSequence, PhaseState};
use proptest::prelude::*;

fn map(i: usize) -> Box<dyn IntervalMap> {
    match i {
        0 => Box::new(Doubling),
        1 => Box::new(Tent),
        2 => Box::new(Logistic),
        _ => Box::new(SyntheticCusp::default()),
    }
}

fn step_density(cuts: &[f64], heights: &[f64], n: usize) -> Vec<f64> {
    let mut cuts = cuts.to_vec();
    cuts.sort_by(f64::total_cmp);
    (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) / n as f64;
            heights[cuts.partition_point(|c| *c <= x) % heights.len()]
        })
        .collect()
}

proptest! {
    #[test]
    fn ulam_matrix_is_stochastic_and_keeps_mass(
        which in 0usize..4,
        n in 16usize..600,
        seed_vals in prop::collection::vec(0.0f64..10.0, 1..40),
    ) {
        let p = build_ulam(map(which).as_ref(), n).unwrap();
        prop_assert!(p.row_sum_error() <= 1e-12);
        prop_assert!(p.min_entry() >= 0.0);
        let f: Vec<f64> = (0..n).map(|i| seed_vals[i % seed_vals.len()]).collect();
        let g = p.apply(&f).unwrap();
        let (mf, mg): (f64, f64) = (f.iter().sum(), g.iter().sum());
        prop_assert!((mf - mg).abs() <= 1e-10 * mf.max(1.0));
        prop_assert!(g.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn quasi_holder_norm_dominates_sup_norm(
        cuts in prop::collection::vec(0.0f64..1.0, 0..12),
        heights in prop::collection::vec(0.0f64..5.0, 1..13),
        alpha in 0.05f64..=1.0,
        eps0 in 0.01f64..=0.5,
    ) {
        let v = step_density(&cuts, &heights, 512);
        prop_assume!(v.iter().any(|x| *x > 0.0));
        let d = Density::new(v).unwrap();
        let sup = d.values().iter().fold(0.0f64, |m, x| m.max(*x));
        let norm = quasi_holder_norm(d.values(), alpha, eps0).unwrap();
        let cs = eps0.powf(alpha).max(1.0) / eps0;
        prop_assert!((sup_norm_bound(alpha, eps0) - cs).abs() <= 1e-12 * cs);
        prop_assert!(sup <= cs * norm * (1.0 + 1e-12), "sup {sup} > {cs} * {norm}");
    }

    #[test]
    fn casimir_bound_holds_along_flows(
        y1 in -40.0f64..40.0,
        y2 in -40.0f64..40.0,
        y3 in -90.0f64..20.0,
        t in 0.0f64..5.0,
        eta in -1.0f64..1.0,
    ) {
        let field = FieldSpec::classical(Frame::YFrame).with_eta(eta);
        let r = check_lyapunov_bound(&field, PhaseState::new(y1, y2, y3), t, 1e-10).unwrap();
        prop_assert!(r.satisfied, "{} > {}", r.lhs, r.rhs);
    }

    #[test]
    fn noise_shift_is_an_index_offset(eps in 1e-4f64..1.0, seed in any::<u64>(), n in 0u64..1000, k in 0u64..1000) {
        let omega = NoiseSequence::new(NoiseLaw::uniform(eps), seed);
        prop_assert_eq!(omega.shift(n).get(k), omega.get(n + k));
        prop_assert_eq!(omega.shift(n).shift(k).first(), omega.get(n + k));
        prop_assert!(omega.get(k).abs() <= eps);
    }

    #[test]
    fn synthetic_cusp_is_unimodal_on_unit_interval(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let t = SyntheticCusp::default();
        let x0 = t.params().x0;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!((0.0..=1.0).contains(&t.eval(lo)) && (0.0..=1.0).contains(&t.eval(hi)));
        if hi <= x0 {
            prop_assert!(t.eval(lo) <= t.eval(hi));
        } else if lo >= x0 {
            prop_assert!(t.eval(lo) >= t.eval(hi));
        }
    }

    #[test]
    fn linear_fit_recovers_exact_lines(a in -5.0f64..5.0, b in -5.0f64..5.0, xs in prop::collection::btree_set(-1000i32..1000, 3..30)) {
        let x: Vec<f64> = xs.iter().map(|v| f64::from(*v) / 100.0).collect();
        let y: Vec<f64> = x.iter().map(|v| a + b * v).collect();
        let fit = linear_fit(&x, &y).unwrap();
        prop_assert!((fit.slope - b).abs() <= 1e-9 * (1.0 + b.abs()));
        prop_assert!((fit.intercept - a).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn kendall_tau_is_antisymmetric(v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let t = kendall_tau(&x, &y);
        prop_assert!((-1.0..=1.0).contains(&t));
        prop_assert!((t + kendall_tau(&x, &neg)).abs() <= 1e-12);
        prop_assert!((kendall_tau(&x, &x) - 1.0).abs() <= 1e-12 || x.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn l1_distance_is_a_metric(
        a in prop::collection::vec(0.01f64..5.0, 64),
        b in prop::collection::vec(0.01f64..5.0, 64),
        c in prop::collection::vec(0.01f64..5.0, 64),
    ) {
        let (a, b, c) = (Density::new(a).unwrap(), Density::new(b).unwrap(), Density::new(c).unwrap());
        let ab = l1_distance(&a, &b).unwrap();
        prop_assert!((ab - l1_distance(&b, &a).unwrap()).abs() <= 1e-15);
        prop_assert!(ab <= l1_distance(&a, &c).unwrap() + l1_distance(&c, &b).unwrap() + 1e-12);
        prop_assert!(ab <= 2.0 + 1e-12);
        prop_assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn averaged_operator_is_stochastic(eps in 1e-3f64..0.1, n in 32usize..256) {
        let base: SharedMap = Arc::new(SyntheticCusp::default());
        let family = reparametrized_family(base, 1.0);
        let p = averaged_transfer_operator(&family, &NoiseLaw::uniform(eps), n, 8).unwrap();
        prop_assert!(p.row_sum_error() <= 1e-12);
        prop_assert!(p.min_entry() >= 0.0);
    }
}
