mod common;

use adagoal::mdp::{NonStationaryPolicy, ResettingPolicy};
use adagoal::oracle::{
    evaluate_resetting_policy, finite_horizon_optimal, policy_finite_horizon_values, reachable_set, ssp_optimal,
    ssp_value_iteration, truncated_stats, verify_pac, V_MAX,
};
use adagoal::{RngStream, TabularMdp};
use common::*;
use std::collections::{BTreeMap, VecDeque};

fn deterministic_mdp(rng: &mut RngStream, n: usize, na: usize) -> TabularMdp {
    let mut p = vec![vec![vec![0.0; n]; na]; n];
    for row_s in p.iter_mut() {
        for row in row_s.iter_mut() {
            row[rng.below(n)] = 1.0;
        }
    }
    TabularMdp::from_nested(n, na, 0, None, &p).unwrap()
}

// Breadth-first hop counts over deterministic edges.
fn shortest_paths(mdp: &TabularMdp, g: usize) -> Vec<Option<usize>> {
    let n = mdp.num_states();
    let mut dist = vec![None; n];
    dist[g] = Some(0);
    let mut q = VecDeque::from([g]);
    while let Some(t) = q.pop_front() {
        for s in 0..n {
            if dist[s].is_none() && (0..mdp.num_actions()).any(|a| mdp.prob(s, a, t) == 1.0) {
                dist[s] = Some(dist[t].unwrap() + 1);
                q.push_back(s);
            }
        }
    }
    dist
}

#[test]
fn deterministic_values_are_path_lengths() {
    let mut rng = RngStream::new(11, 0);
    for _ in 0..40 {
        let n = 2 + rng.below(7);
        let na = 1 + rng.below(3);
        let mdp = deterministic_mdp(&mut rng, n, na);
        let g = rng.below(n);
        let sol = ssp_optimal(&mdp, g);
        let paths = shortest_paths(&mdp, g);
        for s in 0..n {
            match paths[s] {
                Some(k) => assert!((sol.value(s).unwrap() - k as f64).abs() < 1e-9, "s={s} k={k} {:?}", sol.value(s)),
                None => {
                    assert!(sol.unreachable[s]);
                    assert_eq!(sol.values[s], V_MAX);
                }
            }
        }
    }
}

#[test]
fn policy_iteration_matches_value_iteration() {
    let mut rng = RngStream::new(12, 0);
    for _ in 0..25 {
        let n = 2 + rng.below(6);
        let na = 1 + rng.below(3);
        let mdp = random_mdp(&mut rng, n, na, true, 0.5);
        let g = rng.below(n);
        let sol = ssp_optimal(&mdp, g);
        let vi = ssp_value_iteration(&mdp, g, 1_000_000, None);
        for s in 0..n {
            if let Some(v) = sol.value(s) {
                assert!((v - vi[s]).abs() <= 1e-6 * v.max(1.0), "s={s}: {v} vs {}", vi[s]);
            }
        }
    }
}

#[test]
fn ssp_policy_achieves_its_value_by_simulation() {
    let mut rng = RngStream::new(13, 0);
    let mut sim = RngStream::new(13, 1);
    for _ in 0..3 {
        let mdp = random_mdp(&mut rng, 5, 2, true, 1.0);
        let g = 4;
        let sol = ssp_optimal(&mdp, g);
        let runs = 40_000;
        let xs: Vec<f64> = (0..runs)
            .map(|_| {
                let mut s = mdp.start();
                let mut k = 0.0;
                while s != g {
                    s = adagoal::mdp::sample_step(&mdp, s, sol.policy[s], &mut sim);
                    k += 1.0;
                }
                k
            })
            .collect();
        let (m, se) = mean_se(&xs);
        let v = sol.value(mdp.start()).unwrap();
        assert!((m - v).abs() <= 4.0 * se, "{m} vs {v} (se {se})");
    }
}

#[test]
fn truncated_values_increase_to_the_shortest_path_value() {
    let mut rng = RngStream::new(14, 0);
    for _ in 0..10 {
        let n = 3 + rng.below(4);
        let mdp = random_mdp(&mut rng, n, 2, true, 0.8);
        let g = 1 + rng.below(n - 1);
        let v = ssp_optimal(&mdp, g).value(0).unwrap();
        let mut prev = 0.0;
        for h in [1, 2, 4, 8, 16, 64, 256, 2048] {
            let d = finite_horizon_optimal(&mdp, g, h).value(1, 0);
            assert!(d >= prev - 1e-12 && d <= v + 1e-9, "h={h}: {d} (prev {prev}, V* {v})");
            prev = d;
        }
        assert!((prev - v).abs() < 1e-6 * v, "{prev} vs {v}");
    }
}

#[test]
fn truncated_stats_agree_with_backward_evaluation() {
    let mut rng = RngStream::new(15, 0);
    for _ in 0..30 {
        let n = 2 + rng.below(5);
        let mdp = random_mdp(&mut rng, n, 3, false, 0.6);
        let g = rng.below(n);
        let horizon = 1 + rng.below(6);
        let policy = random_policy(&mut rng, horizon, n, 3);
        let st = truncated_stats(&mdp, g, &policy);
        let back = policy_finite_horizon_values(&mdp, g, &policy);
        assert!((st.cost - back[0][0]).abs() < 1e-12);
        assert!((st.cost - evaluate_policy(&mdp, g, &policy.actions)[0]).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&st.fail_prob));
    }
}

#[test]
fn resetting_value_of_the_ssp_policy_approaches_optimal() {
    let mut rng = RngStream::new(16, 0);
    let mdp = random_mdp(&mut rng, 5, 2, true, 1.0);
    let g = 3;
    let sol = ssp_optimal(&mdp, g);
    let v = sol.value(0).unwrap();
    let mut prev = f64::INFINITY;
    for h in [2, 5, 20, 80] {
        let inner = NonStationaryPolicy { horizon: h, actions: vec![sol.policy.clone(); h] };
        let r = evaluate_resetting_policy(&mdp, g, &ResettingPolicy { inner, reset_action: 2 }).unwrap();
        assert!(r >= v - 1e-9 && r <= prev + 1e-9, "h={h}: {r}");
        prev = r;
    }
    assert!(prev - v < 1e-6);
}

#[test]
fn policy_that_never_moves_is_unbounded() {
    // s0 loops under action 0, which the policy always plays
    let p = vec![
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
    ];
    let mdp = TabularMdp::from_nested(2, 3, 0, Some(2), &p).unwrap();
    let pol = ResettingPolicy { inner: NonStationaryPolicy::constant(4, 2, 0), reset_action: 2 };
    assert_eq!(evaluate_resetting_policy(&mdp, 1, &pol), None);
    let mut policies = BTreeMap::new();
    policies.insert(1, pol);
    let v = verify_pac(&mdp, &[0, 1], 2.0, 0.5, &[0, 1], &policies);
    assert!(!v.verdict);
    assert_eq!(v.gaps[&1], None);
}

#[test]
fn reachable_set_uses_the_tolerance() {
    // chain 0 -> 1 -> 2 -> 3, exact distances 1, 2, 3
    let mut p = vec![vec![vec![0.0; 4]; 2]; 4];
    for s in 0..4 {
        p[s][0][(s + 1).min(3)] = 1.0;
        p[s][1][0] = 1.0;
    }
    let mdp = TabularMdp::from_nested(4, 2, 0, Some(1), &p).unwrap();
    assert_eq!(reachable_set(&mdp, &[0, 1, 2, 3], 2.0, 0.0), vec![0, 1, 2]);
    assert_eq!(reachable_set(&mdp, &[0, 1, 2, 3], 2.0, 1.0), vec![0, 1, 2, 3]);
    assert_eq!(reachable_set(&mdp, &[1, 3], 2.5, 0.0), vec![1]);
}

#[test]
fn verify_flags_missing_and_spurious_goals() {
    let mut p = vec![vec![vec![0.0; 4]; 2]; 4];
    for s in 0..4 {
        p[s][0][(s + 1).min(3)] = 1.0;
        p[s][1][0] = 1.0;
    }
    let mdp = TabularMdp::from_nested(4, 2, 0, Some(1), &p).unwrap();
    let go = |h| ResettingPolicy { inner: NonStationaryPolicy::constant(h, 4, 0), reset_action: 1 };
    let mut pol = BTreeMap::new();
    for g in 0..4 {
        pol.insert(g, go(5));
    }
    let good = verify_pac(&mdp, &[0, 1, 2, 3], 2.0, 0.5, &[0, 1, 2], &pol);
    assert!(good.verdict, "{good:?}");
    let missing = verify_pac(&mdp, &[0, 1, 2, 3], 2.0, 0.5, &[0, 1], &pol);
    assert_eq!(missing.missing, vec![2]);
    assert!(!missing.verdict);
    let spurious = verify_pac(&mdp, &[0, 1, 2, 3], 2.0, 0.5, &[0, 1, 2, 3], &pol);
    assert_eq!(spurious.spurious, vec![3]);
    assert!(!spurious.c2_holds);
    // horizon 1 cannot reach state 2 before resetting
    pol.insert(2, go(1));
    let slow = verify_pac(&mdp, &[0, 1, 2, 3], 2.0, 0.5, &[0, 1, 2], &pol);
    assert!(!slow.c1_holds[&2]);
}
