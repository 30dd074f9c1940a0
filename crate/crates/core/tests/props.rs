mod common;

use adagoal::episode::GoalFrequencyLog;
use adagoal::mdp::{apply_transition_operator, goal_apply, GoalAbsorbedView, NonStationaryPolicy, ResettingPolicy};
use adagoal::oracle::{evaluate_resetting_policy, finite_horizon_optimal, ssp_optimal};
use adagoal::samplers::{adagoal_select, raregoal_probabilities, SamplerInput};
use adagoal::tabular::horizon_for;
use adagoal::{RngStream, TabularMdp};
use common::{random_mdp, random_policy};
use proptest::prelude::*;

fn mdp_strategy(reset: bool) -> impl Strategy<Value = TabularMdp> {
    (any::<u64>(), 1usize..7, 1usize..4, 0.2f64..1.0)
        .prop_map(move |(seed, n, na, dens)| random_mdp(&mut RngStream::new(seed, 0), n, na, reset, dens))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mdp_json_roundtrips(m in mdp_strategy(true)) {
        let text = serde_json::to_string(&m).unwrap();
        let back: TabularMdp = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn perturbed_rows_are_rejected(m in mdp_strategy(false), s in 0usize..7, bump in 1e-6f64..0.5) {
        let s = s % m.num_states();
        let mut p = m.to_nested();
        p[s][0][0] += bump;
        prop_assert!(TabularMdp::from_nested(m.num_states(), m.num_actions(), 0, None, &p).is_err());
    }

    #[test]
    fn horizon_grows_with_radius_and_precision(l in 1.0f64..200.0, dl in 0.0f64..50.0, eps in 0.01f64..1.0, f in 0.1f64..1.0) {
        let h = horizon_for(l, eps).unwrap();
        prop_assert!(horizon_for(l + dl, eps).unwrap() >= h);
        prop_assert!(horizon_for(l, eps * f).unwrap() >= h);
        prop_assert!(h as f64 >= l);
    }

    #[test]
    fn goal_operator_agrees_off_the_goal(m in mdp_strategy(true), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 1);
        let n = m.num_states();
        let g = rng.below(n);
        let mut v: Vec<f64> = (0..n).map(|_| rng.uniform() * 10.0).collect();
        v[g] = 0.0;
        let view = GoalAbsorbedView::new(&m, g).unwrap();
        for s in (0..n).filter(|&s| s != g) {
            for a in 0..m.num_actions() {
                prop_assert_eq!(goal_apply(&view, &v, s, a).unwrap(), apply_transition_operator(&m, &v, s, a).unwrap());
                prop_assert!((view.apply_absorbed(&v, s, a) - goal_apply(&view, &v, s, a).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn truncated_optimum_is_monotone_and_below_the_infinite_one(m in mdp_strategy(true), h in 1usize..30, seed in any::<u64>()) {
        let g = RngStream::new(seed, 2).below(m.num_states());
        let short = finite_horizon_optimal(&m, g, h);
        let long = finite_horizon_optimal(&m, g, h + 1);
        let inf = ssp_optimal(&m, g);
        for s in 0..m.num_states() {
            prop_assert!(short.value(1, s) <= long.value(1, s) + 1e-12);
            prop_assert!(short.value(1, s) <= h as f64 + 1e-12);
            if let Some(v) = inf.value(s) {
                prop_assert!(long.value(1, s) <= v + 1e-9);
            }
        }
    }

    #[test]
    fn resetting_policies_never_beat_the_optimum(m in mdp_strategy(true), h in 1usize..8, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 3);
        let n = m.num_states();
        let g = rng.below(n);
        let na = m.num_actions() - 1;
        let inner: NonStationaryPolicy = random_policy(&mut rng, h, n, na);
        let pol = ResettingPolicy { inner, reset_action: na };
        if let (Some(r), Some(v)) = (evaluate_resetting_policy(&m, g, &pol), ssp_optimal(&m, g).value(m.start())) {
            prop_assert!(r >= v - 1e-9 * v.max(1.0), "{} < {}", r, v);
        }
    }

    #[test]
    fn frequency_buckets_partition_the_history(
        history in proptest::collection::vec(0usize..6, 0..300),
        buckets in 1usize..7,
    ) {
        let goals: Vec<usize> = (0..6).collect();
        let log = GoalFrequencyLog::from_history(&goals, &history, buckets);
        prop_assert_eq!(log.total() as usize, history.len());
        prop_assert_eq!(log.bounds.len(), buckets);
        prop_assert_eq!(log.bounds[0].0, 0);
        prop_assert_eq!(log.bounds[buckets - 1].1, history.len());
        for w in log.bounds.windows(2) {
            prop_assert_eq!(w[0].1, w[1].0);
        }
        for j in 0..buckets {
            let (lo, hi) = log.bounds[j];
            prop_assert_eq!(log.bucket_total(j) as usize, hi - lo);
        }
        let csv = log.to_csv();
        prop_assert_eq!(csv.lines().count(), goals.len() + 1);
    }

    #[test]
    fn rarity_weights_form_a_distribution(visits in proptest::collection::vec(0u64..50, 2..10), alpha in 0.01f64..1.0) {
        let goals: Vec<usize> = (0..visits.len()).collect();
        let zeros = vec![0.0; goals.len()];
        let input = SamplerInput { goal_space: &goals, start: 0, d: &zeros, e: &zeros, visits: &visits, l: 1.0 };
        let p = raregoal_probabilities(&input, alpha);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(p[0], 0.0);
        for i in 1..p.len() {
            for j in 1..p.len() {
                if visits[i] < visits[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn adagoal_picks_the_largest_error_within_the_radius(
        d in proptest::collection::vec(0.0f64..10.0, 1..12),
        e_seed in any::<u64>(),
        l in 0.5f64..8.0,
    ) {
        let mut rng = RngStream::new(e_seed, 4);
        let e: Vec<f64> = d.iter().map(|_| (rng.below(5) as f64) * 0.5).collect();
        let goals: Vec<usize> = (0..d.len()).collect();
        let visits = vec![0; d.len()];
        let input = SamplerInput { goal_space: &goals, start: 0, d: &d, e: &e, visits: &visits, l };
        let i = adagoal_select(&input);
        if d.iter().all(|&x| x > l) {
            prop_assert_eq!(i, 0);
        } else {
            prop_assert!(d[i] <= l);
            for j in 0..d.len() {
                if d[j] <= l {
                    prop_assert!(e[j] < e[i] || (e[j] == e[i] && j >= i));
                }
            }
        }
    }
}
