use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use semas_core::detect::{EnsembleBank, EnsembleConfig};
use semas_core::evolve::{
    detect_drift, shapley_exact, validate_policy, value_loss_grad, DriftState, GaussianPolicy, MemberThresholds,
    PageHinkley, PageHinkleyConfig, PolicyAction, PolicyState, PpoAgent, PpoConfig, RecentMetrics, RejectReason,
    SurrogateSample, Transition, Tunables,
};
use semas_core::neural::{Activation, Mlp};

const H: f64 = 1e-6;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

fn state(f1: f64) -> PolicyState {
    PolicyState { f1, precision: 0.5, recall: 0.4, tunables: Tunables::new(0.42, 0.32, 0.5) }
}

#[test]
fn surrogate_gradient_matches_finite_differences() {
    let mut policy = GaussianPolicy::new(5, -1.0, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // old log-probs from a perturbed policy so some ratios fall outside the clip
    let mut old = policy.clone();
    let mut p = old.params();
    for v in p.iter_mut() {
        *v += rng.random_range(-0.05..0.05);
    }
    old.set_params(&p);
    let batch: Vec<SurrogateSample> = (0..12)
        .map(|i| {
            let s = state(i as f64 / 12.0).to_vec();
            let (u, lp) = old.sample(&s, &mut rng).unwrap();
            SurrogateSample { state: s, raw_action: u, old_logprob: lp, advantage: rng.random_range(-1.5..1.5) }
        })
        .collect();
    let eps = 0.2;
    let mut g = vec![0.0; policy.n_params()];
    policy.surrogate_loss_grad(&batch, eps, &mut g).unwrap();
    let base = policy.params();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut q = base.clone();
        q[k] = base[k] + H;
        policy.set_params(&q);
        let up = policy.surrogate_loss_grad(&batch, eps, &mut vec![0.0; base.len()]).unwrap().0;
        q[k] = base[k] - H;
        policy.set_params(&q);
        let down = policy.surrogate_loss_grad(&batch, eps, &mut vec![0.0; base.len()]).unwrap().0;
        let numeric = (up - down) / (2.0 * H);
        worst = worst.max(rel_err(g[k], numeric));
    }
    assert!(worst < 1e-4, "worst {worst}");
}

#[test]
fn value_gradient_matches_finite_differences() {
    let mut net = Mlp::new(&[7, 6, 6, 1], Activation::Tanh, Activation::Identity, 4);
    let states: Vec<Vec<f64>> = (0..6).map(|i| state(i as f64 / 6.0).to_vec()).collect();
    let targets = [0.3, -0.2, 0.9, 0.1, 0.0, 0.5];
    let mut g = vec![0.0; net.n_params()];
    value_loss_grad(&net, &states, &targets, &mut g).unwrap();
    let base = net.params();
    for k in 0..base.len() {
        let mut q = base.clone();
        q[k] += H;
        net.set_params(&q);
        let up = value_loss_grad(&net, &states, &targets, &mut vec![0.0; base.len()]).unwrap();
        q[k] -= 2.0 * H;
        net.set_params(&q);
        let down = value_loss_grad(&net, &states, &targets, &mut vec![0.0; base.len()]).unwrap();
        assert!(rel_err(g[k], (up - down) / (2.0 * H)) < 1e-4);
    }
}

#[test]
fn unit_ratio_gives_vanilla_policy_gradient() {
    let policy = GaussianPolicy::new(4, -1.0, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch: Vec<SurrogateSample> = (0..5)
        .map(|i| {
            let s = state(i as f64 / 5.0).to_vec();
            let (u, lp) = policy.sample(&s, &mut rng).unwrap();
            SurrogateSample { state: s, raw_action: u, old_logprob: lp, advantage: i as f64 - 2.0 }
        })
        .collect();
    let mut g = vec![0.0; policy.n_params()];
    policy.surrogate_loss_grad(&batch, 0.2, &mut g).unwrap();
    // -(1/n) Σ A ∇logπ computed independently for the log-std block
    let n = policy.mean_net.n_params();
    for j in 0..4 {
        let mut expect = 0.0;
        for s in &batch {
            let m = policy.mean(&s.state).unwrap();
            let var = (2.0 * policy.log_std[j]).exp();
            expect -= s.advantage * ((s.raw_action[j] - m[j]).powi(2) / var - 1.0) / batch.len() as f64;
        }
        assert!(rel_err(g[n + j], expect) < 1e-9);
    }
}

#[test]
fn two_state_bandit_moves_toward_optimum() {
    // state 0 wants Δτ = +0.03, state 1 wants Δτ = −0.03
    let target = |s: &PolicyState| if s.f1 < 0.5 { 0.03 } else { -0.03 };
    let cfg = PpoConfig { lr: 1e-3, seed: 5, ..PpoConfig::default() };
    let mut agent = PpoAgent::new(cfg).unwrap();
    let states = [state(0.0), state(1.0)];
    let dist = |agent: &PpoAgent| -> f64 {
        states.iter().map(|s| (agent.act_greedy(s).unwrap().deltas[3] - target(s)).abs()).sum()
    };
    let before = dist(&agent);
    for it in 0..200 {
        for k in 0..64 {
            let s = states[(it + k) % 2];
            let (a, u, lp) = agent.act(&s).unwrap();
            let r = -1e3 * (a.deltas[3] - target(&s)).powi(2);
            agent.observe(Transition {
                state: s,
                action: a,
                raw_action: u,
                reward: r,
                next_state: s,
                logprob: lp,
                done: true,
            });
        }
        agent.update().unwrap();
    }
    let after = dist(&agent);
    let hi = agent.act_greedy(&states[0]).unwrap().deltas[3];
    let lo = agent.act_greedy(&states[1]).unwrap().deltas[3];
    assert!(after < 0.5 * before, "before {before} after {after}");
    assert!(hi > 0.0 && lo < 0.0, "{hi} {lo}");
}

fn permutation_shapley(f: &dyn Fn(&[f64]) -> f64, base: &[f64], x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..m {
        perms = perms
            .into_iter()
            .flat_map(|p| (0..m).filter(|i| !p.contains(i)).map(|i| [p.clone(), vec![i]].concat()).collect::<Vec<_>>())
            .collect();
    }
    let mut phi = vec![0.0; m];
    for p in &perms {
        let mut cur = base.to_vec();
        let mut prev = f(&cur);
        for &i in p {
            cur[i] = x[i];
            let v = f(&cur);
            phi[i] += v - prev;
            prev = v;
        }
    }
    phi.iter().map(|v| v / perms.len() as f64).collect()
}

#[test]
fn shapley_matches_permutation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = move |x: &[f64]| -> f64 {
            w[0] * x[0] + w[1] * x[1] * x[2] + (w[2] * x[3]).tanh() + if x[0] > x[3] { w[3] } else { 0.0 }
        };
        let base: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact = shapley_exact(&f, &base, &x, &[0, 1, 2, 3]).unwrap();
        let oracle = permutation_shapley(&f, &base, &x);
        for (a, b) in exact.phi.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(exact.efficiency_residual.abs() < 1e-9);
    }
}

#[test]
fn page_hinkley_false_alarms_below_five_percent() {
    let normal = Normal::new(0.5, 0.1).unwrap();
    let mut alarms = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..1000).map(|_| normal.sample(&mut rng)).collect();
        if detect_drift(&s, PageHinkleyConfig::default()) == DriftState::Drift {
            alarms += 1;
        }
    }
    assert!(alarms < 5, "{alarms} alarms in 100 stationary runs");
}

#[test]
fn page_hinkley_catches_three_sigma_step() {
    let normal = Normal::new(0.5, 0.1).unwrap();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ph = PageHinkley::new(PageHinkleyConfig::default());
        for _ in 0..500 {
            ph.update(normal.sample(&mut rng));
        }
        assert_eq!(ph.state(), DriftState::Stable);
        for _ in 0..200 {
            ph.update(normal.sample(&mut rng) + 0.3);
        }
        let at = ph.drift_at().expect("drift detected");
        assert!(at > 500 && at <= 700);
    }
}

#[test]
fn significant_regression_rejected() {
    // means 0.8 vs 0.6, sample sd 0.02 each, n = 4 -> t ≈ 14.1 on ~6 dof
    let current = [0.78, 0.80, 0.82, 0.80];
    let candidate = [0.58, 0.60, 0.62, 0.60];
    let cur = Tunables::new(0.42, 0.32, 0.5);
    let cand = Tunables::new(0.42, 0.32, 0.7);
    let r = RecentMetrics { current_f1: current.to_vec(), candidate_f1: candidate.to_vec(), drift_window: None };
    let v = validate_policy(&cand, &cur, &r, None).unwrap();
    assert_eq!(v.reasons, vec![RejectReason::F1Regression]);
    let w = v.welch.unwrap();
    let sd = (0.0008f64 / 3.0).sqrt();
    let t = -0.2 / (2.0 * sd * sd / 4.0).sqrt();
    assert!((w.t - t).abs() < 1e-9);
    assert!(w.p < 0.05);
    // the reverse direction is an improvement and passes
    let r2 = RecentMetrics { current_f1: candidate.to_vec(), candidate_f1: current.to_vec(), drift_window: None };
    assert!(validate_policy(&cand, &cur, &r2, None).unwrap().accepted);
}

#[test]
fn member_thresholds_agree_with_bank() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let train: Vec<Vec<f64>> = (0..150).map(|_| (0..3).map(|_| normal.sample(&mut rng)).collect()).collect();
    let cfg = EnsembleConfig { n_trees: 20, max_samples: 64, rff_dim: 32, lof_k: 5, ..EnsembleConfig::default() };
    let bank = EnsembleBank::fit(&train, &cfg).unwrap();
    let mt = MemberThresholds::from_bank(&bank).unwrap();
    for rho in [0.25, 0.3, 0.32, 0.35] {
        assert_eq!(mt.at(rho), bank.thresholds_at(rho).unwrap());
    }
}

#[test]
fn action_squash_respects_limit() {
    let a = semas_core::evolve::squash(&[10.0, -10.0, 0.0, 0.5]);
    assert!(a.deltas.iter().all(|d| d.abs() <= 0.05));
    assert_eq!(a.deltas[2], 0.0);
    let _ = PolicyAction::zero();
}
