use adagoal::envs::{build_grid_mixture, MixtureParams};
use adagoal::linear::{
    confidence_radius, psi, rebuild_lin_tables, run_linear, run_linear_with_observer, GoalRegressors, LinearOptions,
    Ridge,
};
use adagoal::oracle::finite_horizon_optimal;
use adagoal::samplers::GoalSampler;
use adagoal::tabular::AdaGoalConfig;
use adagoal::RngStream;

fn small_cfg(cap: usize) -> AdaGoalConfig {
    AdaGoalConfig { l: 4.0, epsilon: 0.5, delta: 0.1, max_episodes: cap, run_to_cap: true, ..Default::default() }
}

// Regressors whose value estimate equals `theta` up to the ridge shrinkage.
fn pinned(theta: &[f64]) -> GoalRegressors {
    let dim = theta.len();
    let mut regs = GoalRegressors::new(dim, 1e-12);
    for (i, &t) in theta.iter().enumerate() {
        let mut x = vec![0.0; dim];
        x[i] = 1.0;
        regs.value.push(&x, t);
        regs.error.push(&x, 0.0);
    }
    regs.refresh().unwrap();
    regs
}

#[test]
fn true_parameter_with_zero_radius_gives_truncated_optimal_values() {
    let model = build_grid_mixture(&MixtureParams::default()).unwrap();
    let regs = pinned(&model.augmented_theta());
    for g in 0..model.num_states {
        for horizon in [1, 3, 12] {
            let t = rebuild_lin_tables(&model, &regs, g, horizon, 0.0);
            let exact = finite_horizon_optimal(&model.mdp, g, horizon);
            for h in 1..=horizon {
                for s in 0..model.num_states {
                    let (lin, d) = (t.layer(h).v[s], exact.value(h, s));
                    assert!((lin - d).abs() < 1e-9, "g={g} H={horizon} h={h} s={s}: {lin} vs {d}");
                }
            }
        }
    }
}

#[test]
fn feature_aggregate_reproduces_the_kernel_expectation() {
    let model = build_grid_mixture(&MixtureParams { slips: vec![0.0, 0.2, 0.6], weights: vec![0.2, 0.5, 0.3], ..Default::default() }).unwrap();
    let theta = model.augmented_theta();
    let mut rng = RngStream::new(3, 0);
    for _ in 0..50 {
        let v: Vec<f64> = (0..model.num_states).map(|_| rng.uniform() * 5.0).collect();
        let g = rng.below(model.num_states);
        let (s, a) = (rng.below(model.num_states), rng.below(model.num_actions));
        let f = psi(&model, g, &v, s, a);
        let lin: f64 = f.iter().zip(&theta).map(|(x, y)| x * y).sum();
        let want = if s == g { v[g] } else { model.mdp.apply(&v, s, a) };
        assert!((lin - want).abs() < 1e-12, "{lin} vs {want}");
    }
}

#[test]
fn estimates_stay_inside_the_ellipsoid() {
    let model = build_grid_mixture(&MixtureParams::default()).unwrap();
    let cfg = small_cfg(40);
    let target = model.augmented_theta();
    let mut checked = 0;
    let mut rng = RngStream::new(5, 0);
    run_linear_with_observer(&model, &cfg, LinearOptions::default(), &GoalSampler::RareGoal { alpha: 0.1 }, &mut rng, |k, l| {
        for gi in 0..model.num_states {
            let dist = l.regressors(gi).value.sigma_distance(&target);
            assert!(dist <= l.radius(k), "k={k} goal {gi}: {dist} > {}", l.radius(k));
            checked += 1;
        }
    })
    .unwrap();
    assert_eq!(checked, 40 * model.num_states);
}

#[test]
fn optimistic_distances_never_exceed_the_truncated_optimum() {
    let model = build_grid_mixture(&MixtureParams::default()).unwrap();
    let cfg = small_cfg(25);
    let h = cfg.effective_horizon().unwrap();
    let d: Vec<f64> = (0..model.num_states).map(|g| finite_horizon_optimal(&model.mdp, g, h).value(1, 0)).collect();
    let mut rng = RngStream::new(6, 0);
    let out = run_linear(&model, &cfg, LinearOptions::default(), &GoalSampler::AdaGoal, &mut rng).unwrap();
    for (&g, &dk) in &out.d {
        assert!(dk <= d[g] + 1e-9, "goal {g}: {dk} > {}", d[g]);
    }
    assert_eq!(out.history.len(), 25);
}

#[test]
fn runs_repeat_under_a_fixed_seed() {
    let model = build_grid_mixture(&MixtureParams::default()).unwrap();
    let cfg = small_cfg(15);
    let go = || {
        let mut rng = RngStream::new(9, 0);
        run_linear(&model, &cfg, LinearOptions { confidence_scale: 0.05 }, &GoalSampler::UniGoal, &mut rng).unwrap()
    };
    let (a, b) = (go(), go());
    assert_eq!(a.history, b.history);
    assert_eq!(a.d, b.d);
    assert_eq!(a.e, b.e);
    assert_eq!(a.tau, b.tau);
}

#[test]
fn radius_grows_with_the_episode_index() {
    let mut prev = 0.0;
    for k in [1, 10, 100, 1000] {
        let b = confidence_radius(k, 2, 1.077, 208, 0.1);
        assert!(b > prev);
        prev = b;
    }
}

#[test]
fn ridge_rejects_an_indefinite_gram_matrix() {
    let mut r = Ridge::new(2, -1.0);
    r.push(&[1.0, 0.0], 1.0);
    assert!(r.refresh().is_err());
}
