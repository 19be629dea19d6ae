//! End-to-end acceptance checks. Runs serially as a plain binary so the
//! latency comparison has the machine to itself and every verdict line is
//! printed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use semas_core::baselines::rule_update_threshold;
use semas_core::detect::{
    average_path_length, ensemble_vote, if_score_from_path, EnsembleBank, EnsembleConfig, LocalOutlierFactor,
};
use semas_core::evolve::{
    reward, shapley_exact, value_loss_grad, GaussianPolicy, PolicyState, RewardWeights, SurrogateSample, Tunables,
    INITIAL_RHO, RHO_RANGE, TAU_RANGE, W_RANGE,
};
use semas_core::federate::{aggregate, AgentContribution};
use semas_core::metrics::{cohen_d, delta_f1, roc_auc, welch_t};
use semas_core::neural::{Activation, HeadKind, Loss, LstmNet, Mlp, Trainable};
use semas_core::pipeline::{
    run_ablation_suite, run_experiment_with, Ablation, Prepared, RunConfig, Shift, System, SystemRun, Workbench,
    DEFAULT_SEEDS,
};

mod common;

type Outcome = Result<String, String>;

const EXACT_TOL: f64 = 1e-12;
const GRAD_H: f64 = 1e-6;
const LAYER_H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const GRAD_INSTANCES: u64 = 20;
const SHAPLEY_MODELS: usize = 56;
const SHAPLEY_TOL: f64 = 1e-9;
const VOTE_TOL: f64 = 0.05;
const OCSVM_NU: f64 = 0.25;
const LATENCY_REL_TOL: f64 = 0.10;
const LATENCY_ABS_MS: f64 = 5.0;
const SLOWDOWN: f64 = 100.0;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

fn gauss(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}

fn formulas() -> Outcome {
    let r = reward(0.5, 0.1, 0.0, 1.22, &RewardWeights::default());
    check((r - 0.48878).abs() < EXACT_TOL, format!("reward {r}"))?;
    let t = rule_update_threshold(0.75, 0.9, 0.7);
    check((t - 0.74).abs() < EXACT_TOL, format!("threshold rule {t}"))?;
    let g = aggregate(&[
        AgentContribution { agent_id: 0, n_samples: 1, params: vec![0.0] },
        AgentContribution { agent_id: 1, n_samples: 3, params: vec![4.0] },
    ])
    .map_err(|e| e.to_string())?;
    check((g[0] - 3.0).abs() < EXACT_TOL, format!("federated {}", g[0]))?;
    for n in [2, 64, 256, 4096] {
        let c = average_path_length(n);
        let s = if_score_from_path(c, c);
        check((s - 0.5).abs() < EXACT_TOL, format!("forest score {s} at n={n}"))?;
    }
    Ok(format!("reward={r:.5} tau'={t:.2} theta={:.1}", g[0]))
}

fn worst_model_error<M: Trainable>(model: &mut M, x: &M::Input, y: f64, loss: Loss) -> f64 {
    let mut analytic = vec![0.0; model.n_params()];
    model.loss_grad(x, y, loss, &mut analytic, None).expect("loss_grad");
    let base = model.params();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] = base[k] + LAYER_H;
        model.set_params(&p);
        let up = loss.value(model.predict(x).expect("predict"), y);
        p[k] = base[k] - LAYER_H;
        model.set_params(&p);
        let down = loss.value(model.predict(x).expect("predict"), y);
        worst = worst.max(rel_err(analytic[k], (up - down) / (2.0 * LAYER_H)));
    }
    model.set_params(&base);
    worst
}

fn policy_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
    PolicyState {
        f1: rng.random_range(0.0..1.0),
        precision: rng.random_range(0.0..1.0),
        recall: rng.random_range(0.0..1.0),
        tunables: Tunables::new(
            rng.random_range(W_RANGE.0..W_RANGE.1),
            rng.random_range(RHO_RANGE.0..RHO_RANGE.1),
            rng.random_range(TAU_RANGE.0..TAU_RANGE.1),
        ),
    }
    .to_vec()
}

fn policy_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
    let mut policy = GaussianPolicy::new(6, -1.0, seed);
    let mut old = policy.clone();
    let mut p = old.params();
    for v in p.iter_mut() {
        *v += rng.random_range(-0.05..0.05);
    }
    old.set_params(&p);
    let batch: Vec<SurrogateSample> = (0..10)
        .map(|_| {
            let s = policy_state(&mut rng);
            let (u, lp) = old.sample(&s, &mut rng).expect("sample");
            SurrogateSample { state: s, raw_action: u, old_logprob: lp, advantage: rng.random_range(-1.0..1.0) }
        })
        .collect();
    let eps = 0.2;
    let mut g = vec![0.0; policy.n_params()];
    policy.surrogate_loss_grad(&batch, eps, &mut g).expect("surrogate");
    let base = policy.params();
    let mut scratch = vec![0.0; base.len()];
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut q = base.clone();
        q[k] = base[k] + GRAD_H;
        policy.set_params(&q);
        let up = policy.surrogate_loss_grad(&batch, eps, &mut scratch).expect("surrogate").0;
        q[k] = base[k] - GRAD_H;
        policy.set_params(&q);
        let down = policy.surrogate_loss_grad(&batch, eps, &mut scratch).expect("surrogate").0;
        worst = worst.max(rel_err(g[k], (up - down) / (2.0 * GRAD_H)));
    }
    worst
}

fn value_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(8000 + seed);
    let mut net = Mlp::new(&[7, 6, 6, 1], Activation::Tanh, Activation::Identity, seed);
    let states: Vec<Vec<f64>> = (0..8).map(|_| policy_state(&mut rng)).collect();
    let targets: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut g = vec![0.0; net.n_params()];
    value_loss_grad(&net, &states, &targets, &mut g).expect("value grad");
    let base = net.params();
    let mut scratch = vec![0.0; base.len()];
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut q = base.clone();
        q[k] = base[k] + GRAD_H;
        net.set_params(&q);
        let up = value_loss_grad(&net, &states, &targets, &mut scratch).expect("value grad");
        q[k] = base[k] - GRAD_H;
        net.set_params(&q);
        let down = value_loss_grad(&net, &states, &targets, &mut scratch).expect("value grad");
        worst = worst.max(rel_err(g[k], (up - down) / (2.0 * GRAD_H)));
    }
    worst
}

fn gradients() -> Outcome {
    let mut worst = [0.0f64; 4];
    for seed in 0..GRAD_INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + seed);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut e = 0.0f64;
        for (hidden, out, loss, y) in [
            (Activation::Tanh, Activation::Identity, Loss::Mse, 0.4),
            (Activation::Relu, Activation::Identity, Loss::Mse, -0.2),
            (Activation::Sigmoid, Activation::Sigmoid, Loss::Bce, 1.0),
        ] {
            let mut m = Mlp::new(&[5, 7, 4, 1], hidden, out, seed);
            e = e.max(worst_model_error(&mut m, &x, y, loss));
        }
        worst[0] = worst[0].max(e);
        let mut reg = LstmNet::new(3, &[4, 3], 0.2, HeadKind::Linear, seed);
        let mut clf = LstmNet::new(3, &[5], 0.0, HeadKind::Sigmoid, seed);
        worst[1] = worst[1].max(worst_model_error(&mut reg, &xs, 0.6, Loss::Mse)).max(worst_model_error(
            &mut clf,
            &xs,
            0.0,
            Loss::Bce,
        ));
        worst[2] = worst[2].max(policy_error(seed));
        worst[3] = worst[3].max(value_error(seed));
    }
    let names = ["dense", "lstm", "policy", "value"];
    for (n, w) in names.iter().zip(worst) {
        check(w < GRAD_TOL, format!("{n} worst rel err {w:.2e}"))?;
    }
    Ok(format!(
        "{GRAD_INSTANCES} seeds, worst rel err dense {:.1e} lstm {:.1e} policy {:.1e} value {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

/// Average marginal contribution over every ordering, enumerated with
/// Heap's algorithm.
fn permutation_shapley(f: &dyn Fn(&[f64]) -> f64, base: &[f64], x: &[f64], set: &[usize]) -> Vec<f64> {
    let m = set.len();
    let mut order: Vec<usize> = (0..m).collect();
    let mut phi = vec![0.0; m];
    let mut count = 0.0;
    let mut visit = |order: &[usize]| {
        let mut z = x.to_vec();
        for &f in set {
            z[f] = base[f];
        }
        let mut prev = f(&z);
        for &j in order {
            z[set[j]] = x[set[j]];
            let next = f(&z);
            phi[j] += next - prev;
            prev = next;
        }
        count += 1.0;
    };
    let mut c = vec![0usize; m];
    visit(&order);
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                order.swap(0, i);
            } else {
                order.swap(c[i], i);
            }
            visit(&order);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    phi.iter().map(|p| p / count).collect()
}

fn shapley() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut worst_eff, mut worst_sym, mut worst_oracle) = (0.0f64, 0.0f64, 0.0f64);
    for model in 0..SHAPLEY_MODELS {
        let m = 2 + model % 7;
        let d = m + 2;
        let mut set: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            set.swap(i, rng.random_range(0..=i));
        }
        set.truncate(m);
        // the first two attributed features enter symmetrically
        let (si, sj) = (set[0], set[1]);
        let lin: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let inter: Vec<(usize, usize, f64)> =
            (0..4).map(|_| (rng.random_range(0..d), rng.random_range(0..d), rng.random_range(-1.0..1.0))).collect();
        let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let f = move |z: &[f64]| -> f64 {
            let mut v = (a * (z[si] + z[sj]) + b * z[si] * z[sj]).tanh();
            for (k, w) in lin.iter().enumerate() {
                if k != si && k != sj {
                    v += w * z[k];
                }
            }
            for &(p, q, w) in &inter {
                if [p, q].iter().all(|t| *t != si && *t != sj) {
                    v += w * (z[p] * z[q]).sin();
                }
            }
            v
        };
        let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut base: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        x[sj] = x[si];
        base[sj] = base[si];

        let rep = shapley_exact(&f, &base, &x, &set).map_err(|e| e.to_string())?;
        worst_eff = worst_eff.max(rep.efficiency_residual.abs());
        worst_sym = worst_sym.max((rep.phi[0] - rep.phi[1]).abs());
        let oracle = permutation_shapley(&f, &base, &x, &set);
        for (p, q) in rep.phi.iter().zip(&oracle) {
            worst_oracle = worst_oracle.max((p - q).abs());
        }
    }
    check(worst_eff < SHAPLEY_TOL, format!("efficiency residual {worst_eff:.2e}"))?;
    check(worst_sym < SHAPLEY_TOL, format!("symmetry gap {worst_sym:.2e}"))?;
    check(worst_oracle < SHAPLEY_TOL, format!("oracle gap {worst_oracle:.2e}"))?;
    Ok(format!(
        "{SHAPLEY_MODELS} models up to 8 features, efficiency {worst_eff:.1e} symmetry {worst_sym:.1e} oracle {worst_oracle:.1e}"
    ))
}

fn lof_reference(train: &[Vec<f64>], k: usize, queries: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let knn = |x: &[f64], skip: Option<usize>| -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> =
            train.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(i, t)| (i, dist(t, x))).collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    };
    let nb: Vec<_> = (0..train.len()).map(|i| knn(&train[i], Some(i))).collect();
    let kdist: Vec<f64> = nb.iter().map(|v| v[k - 1].1).collect();
    let lrd_of = |v: &[(usize, f64)]| 1.0 / (v.iter().map(|&(o, d)| d.max(kdist[o])).sum::<f64>() / k as f64 + 1e-10);
    let lrd: Vec<f64> = nb.iter().map(|v| lrd_of(v)).collect();
    let lof = |v: &[(usize, f64)], own: f64| v.iter().map(|&(o, _)| lrd[o]).sum::<f64>() / (k as f64 * own);
    let mut train_scores: Vec<f64> = nb.iter().zip(&lrd).map(|(v, &own)| lof(v, own)).collect();
    train_scores.sort_by(|a, b| b.total_cmp(a));
    let query_scores = queries
        .iter()
        .map(|q| {
            let v = knn(q, None);
            lof(&v, lrd_of(&v))
        })
        .collect();
    (train_scores, query_scores)
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let train = gauss(&mut rng, 500, 6, 1.0);
    let cfg = EnsembleConfig { n_trees: 60, rff_dim: 64, seed: 9, ..EnsembleConfig::default() };
    let bank = EnsembleBank::fit(&train, &cfg).map_err(|e| e.to_string())?;
    let members = (
        bank.iforest.as_ref().ok_or("no forest")?,
        bank.ocsvm.as_ref().ok_or("no svm")?,
        bank.lof.as_ref().ok_or("no lof")?,
        bank.elliptic.as_ref().ok_or("no envelope")?,
        bank.iforest2.as_ref().ok_or("no forest 2")?,
    );
    let mut vote_mismatch = 0;
    for z in gauss(&mut rng, 1000, 6, 1.5) {
        let count = [
            members.0.score(&z).unwrap() > members.0.threshold_at(cfg.contamination),
            members.1.decision(&z).unwrap() < 0.0,
            members.2.score(&z).unwrap() > members.2.threshold_at(cfg.contamination),
            members.3.score(&z).unwrap() > members.3.threshold_at(cfg.contamination),
            members.4.score(&z).unwrap() > members.4.threshold_at(cfg.contamination),
        ]
        .iter()
        .filter(|&&v| v)
        .count();
        if ensemble_vote(&bank, &z).unwrap() != count as f64 / 5.0 {
            vote_mismatch += 1;
        }
    }

    let mut lof_mismatch = 0;
    for (n, d, k) in [(80, 3, 5), (250, 4, 12), (500, 6, 20)] {
        let train = gauss(&mut rng, n, d, 1.0);
        let queries = gauss(&mut rng, 100, d, 1.5);
        let model = LocalOutlierFactor::fit(&train, k, 0.1).map_err(|e| e.to_string())?;
        let (want_train, want_q) = lof_reference(&train, k, &queries);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        lof_mismatch += model.training_scores().iter().zip(&want_train).filter(|(a, b)| !close(**a, **b)).count();
        let thr = model.threshold();
        for (q, want) in queries.iter().zip(want_q) {
            let got = model.score(q).unwrap();
            if !close(got, want) || (got > thr) != (want > thr) {
                lof_mismatch += 1;
            }
        }
    }

    let mut auc_mismatch = 0;
    let mut fixtures = 0;
    while fixtures < 200 {
        let n = rng.random_range(2..60);
        let levels = rng.random_range(2..10);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.35)).collect();
        let (pos, neg) = (labels.iter().filter(|&&y| y).count(), labels.iter().filter(|&&y| !y).count());
        if pos == 0 || neg == 0 {
            continue;
        }
        let mut wins = 0.0;
        for (si, _) in scores.iter().zip(&labels).filter(|(_, &y)| y) {
            for (sj, _) in scores.iter().zip(&labels).filter(|(_, &y)| !y) {
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
        let want = wins / (pos * neg) as f64;
        if (roc_auc(&scores, &labels).map_err(|e| e.to_string())? - want).abs() > 1e-12 {
            auc_mismatch += 1;
        }
        fixtures += 1;
    }
    check(
        vote_mismatch + lof_mismatch + auc_mismatch == 0,
        format!("mismatches vote {vote_mismatch} lof {lof_mismatch} auc {auc_mismatch}"),
    )?;
    Ok("0 mismatches over 1000 votes, 3 LOF sets (n<=500), 200 AUC fixtures".into())
}

fn tunables_ok(t: &Tunables) -> bool {
    t.w1 + t.w2 == 1.0 && t.in_range()
}

fn invariants(bench: &Workbench) -> Outcome {
    let cfg = RunConfig {
        seeds: vec![42],
        iterations: 3,
        shift: Some(Shift { magnitude: 2.0, stride: 2 }),
        ..RunConfig::default()
    };
    let semas = &run_experiment_with(&cfg, bench).map_err(|e| e.to_string())?.runs[0];
    let mut updates = 0;
    for log in &semas.cloud {
        for t in [Some(log.current), log.candidate, Some(log.applied)].into_iter().flatten() {
            check(tunables_ok(&t), format!("iteration {} fog {}: {t:?}", log.iteration, log.fog))?;
            updates += 1;
        }
    }
    for r in &semas.reports {
        let p = r.policy;
        check(tunables_ok(&Tunables { w1: p.w1, w2: p.w2, rho: p.rho, tau: p.tau }), format!("report policy {p:?}"))?;
    }
    let p = bench.prepared(&cfg, 42).map_err(|e| e.to_string())?;
    let mut rhos: Vec<f64> = semas.reports.iter().map(|r| r.policy.rho).collect();
    rhos.extend([RHO_RANGE.0, INITIAL_RHO, RHO_RANGE.1]);
    for rho in rhos {
        for raw in &p.test_raw {
            let a2 = p.vote_fraction(raw, rho);
            check((0..=5).any(|k| a2 == k as f64 / 5.0), format!("a2 {a2}"))?;
        }
    }

    let b2 = &run_experiment_with(&RunConfig { system: System::Baseline2, ..cfg.clone() }, bench)
        .map_err(|e| e.to_string())?
        .runs[0];
    for r in &b2.reports {
        let ok = (RHO_RANGE.0..=RHO_RANGE.1).contains(&r.policy.rho) && r.policy.tau > 0.0 && r.policy.tau < 1.0;
        check(ok, format!("baseline2 iteration {} policy {:?}", r.iteration, r.policy))?;
    }

    let b1 = &run_experiment_with(&RunConfig { system: System::Baseline1, ..cfg }, bench)
        .map_err(|e| e.to_string())?
        .runs[0];
    check(b1.predictions.windows(2).all(|w| w[0] == w[1]), "baseline1 predictions drift")?;
    let f1 = b1.f1s();
    check(f1.iter().all(|v| v.to_bits() == f1[0].to_bits()), format!("baseline1 F1 {f1:?}"))?;
    check(b1.delta_f1() == 0.0, format!("baseline1 dF1 {}", b1.delta_f1()))?;
    Ok(format!("{updates} tunable states checked, baseline1 dF1 = {:.4}", b1.delta_f1()))
}

fn calibration(bench: &Workbench) -> Outcome {
    let p: std::sync::Arc<Prepared> =
        bench.prepared(&RunConfig { seeds: vec![42], ..RunConfig::default() }, 42).map_err(|e| e.to_string())?;
    let train: Vec<&Vec<f64>> = p.fit.iter().filter(|s| !s.label).map(|s| &s.features).collect();
    let svm = p.bank.ocsvm.as_ref().ok_or("no svm")?;
    let svm_votes = train.iter().filter(|z| svm.vote(z).unwrap()).count() as f64 / train.len() as f64;
    check((svm_votes - OCSVM_NU).abs() <= VOTE_TOL, format!("ocsvm training vote fraction {svm_votes}"))?;

    let names = ["iforest", "ocsvm", "lof", "elliptic", "iforest2"];
    let scores = p.bank.training_scores().map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for rho in [RHO_RANGE.0, INITIAL_RHO, RHO_RANGE.1] {
        let thr = p.bank.thresholds_at(rho).map_err(|e| e.to_string())?;
        for i in [0, 2, 3, 4] {
            let frac = scores[i].iter().filter(|&&s| s > thr[i]).count() as f64 / scores[i].len() as f64;
            check((frac - rho).abs() <= VOTE_TOL, format!("{} at rho {rho}: {frac}", names[i]))?;
            worst = worst.max((frac - rho).abs());
        }
    }
    Ok(format!("ocsvm {svm_votes:.3} (nu {OCSVM_NU}), worst contamination gap {worst:.3}, n={}", train.len()))
}

fn shifted(seeds: Vec<u64>) -> RunConfig {
    RunConfig { seeds, shift: Some(Shift { magnitude: 2.0, stride: 2 }), ..RunConfig::default() }
}

fn stability(bench: &Workbench, semas: &[SystemRun]) -> Outcome {
    let b2 = run_experiment_with(&RunConfig { system: System::Baseline2, ..shifted(DEFAULT_SEEDS.to_vec()) }, bench)
        .map_err(|e| e.to_string())?;
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in DEFAULT_SEEDS {
        let s = semas.iter().find(|r| r.seed == seed).ok_or("missing semas run")?.delta_f1();
        let b = b2.runs.iter().find(|r| r.seed == seed).ok_or("missing baseline2 run")?.delta_f1();
        wins += usize::from(s.abs() < b.abs());
        detail.push(format!("{seed}: {s:+.4} vs {b:+.4}"));
    }
    check(wins >= 2, format!("{wins}/3 seeds; {}", detail.join(", ")))?;
    Ok(format!("{wins}/3 seeds, dF1 semas vs baseline2 {}", detail.join(", ")))
}

fn ablations(runs: &[SystemRun]) -> Outcome {
    let pick = |variant: &str, seed: u64| runs.iter().find(|r| r.variant == variant && r.seed == seed);
    let mut consensus_changes = 0;
    for seed in DEFAULT_SEEDS {
        let full = pick("full", seed).ok_or("missing full run")?;
        let no_resp = pick("no_response", seed).ok_or("missing no_response run")?;
        for (a, b) in full.reports.iter().zip(&no_resp.reports) {
            let same = [(a.f1, b.f1), (a.precision, b.precision), (a.recall, b.recall)]
                .iter()
                .all(|(x, y)| x.to_bits() == y.to_bits());
            check(same, format!("seed {seed} iteration {}: response removal changed metrics", a.iteration))?;
        }
        let no_cons = pick("no_consensus", seed).ok_or("missing no_consensus run")?;
        let changed = full.reports.iter().zip(&no_cons.reports).any(|(a, b)| a.f1 != b.f1);
        consensus_changes += usize::from(changed);

        let no_ppo = pick("no_ppo", seed).ok_or("missing no_ppo run")?;
        let first = no_ppo.reports[0].policy;
        check(no_ppo.reports.iter().all(|r| r.policy == first), format!("seed {seed}: policy moved without ppo"))?;
        check(
            no_ppo.cloud.iter().all(|c| c.candidate.is_none() && c.applied == c.current),
            format!("seed {seed}: cloud proposed a policy without ppo"),
        )?;
    }
    check(consensus_changes >= 2, format!("consensus removal changed F1 on {consensus_changes}/3 seeds"))?;
    Ok(format!("response identical, consensus changes F1 on {consensus_changes}/3, ppo frozen"))
}

fn latency(bench: &Workbench) -> Outcome {
    let cfg = |slowdown: f64| RunConfig {
        seeds: vec![42],
        iterations: 2,
        cloud_slowdown: slowdown,
        ppo_rounds_per_iter: 1,
        ppo: semas_core::evolve::PpoConfig { batch_size: 16, ..Default::default() },
        ..RunConfig::default()
    };
    let (mut base, mut slow) = (Vec::new(), Vec::new());
    let mut means = Vec::new();
    for slowdown in [1.0, SLOWDOWN, SLOWDOWN, 1.0] {
        let run = run_experiment_with(&cfg(slowdown), bench).map_err(|e| e.to_string())?.runs.remove(0);
        means.extend(run.reports.iter().map(|r| r.latency_ms));
        let samples = run.latencies.into_iter().flatten();
        if slowdown == 1.0 {
            base.extend(samples);
        } else {
            slow.extend(samples);
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            (v[m - 1] + v[m]) / 2.0
        }
    };
    let (mb, ms) = (median(&mut base), median(&mut slow));
    let change = (ms - mb).abs() / mb;
    let worst_mean = means.iter().copied().fold(0.0, f64::max);
    check(change < LATENCY_REL_TOL, format!("median {mb:.4} ms -> {ms:.4} ms ({:.1}%)", 100.0 * change))?;
    check(worst_mean < LATENCY_ABS_MS, format!("mean latency {worst_mean:.3} ms"))?;
    Ok(format!(
        "median {mb:.4} ms -> {ms:.4} ms at {SLOWDOWN}x ({:.1}%), worst mean {worst_mean:.3} ms",
        100.0 * change
    ))
}

fn statistics() -> Outcome {
    for (i, f) in common::FIXTURES.iter().enumerate() {
        let w = welch_t(f.a, f.b).map_err(|e| e.to_string())?;
        let d = cohen_d(f.a, f.b).map_err(|e| e.to_string())?;
        for (name, got, want) in [("t", w.t, f.t), ("dof", w.dof, f.dof), ("p", w.p, f.p), ("d", d, f.d)] {
            check((got - want).abs() < 1e-6, format!("fixture {i} {name}: {got} vs {want}"))?;
        }
    }
    let d = delta_f1(&[0.5031, 0.4795, 0.4792]).map_err(|e| e.to_string())?;
    check(format!("{d:.4}") == "-0.0239" && (d + 0.0239).abs() < EXACT_TOL, format!("dF1 {d}"))?;
    Ok(format!("10 fixtures within 1e-6, dF1 = {d:.4}"))
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as --list; only run the suite
    // for a plain invocation or an explicit filter on this binary's name.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }

    let bench = Workbench::new();
    let mut suite: Option<Vec<SystemRun>> = None;
    let mut ablation_suite = |bench: &Workbench| -> Result<Vec<SystemRun>, String> {
        if let Some(runs) = &suite {
            return Ok(runs.clone());
        }
        let runs = run_ablation_suite(&shifted(DEFAULT_SEEDS.to_vec()), bench).map_err(|e| e.to_string())?.runs;
        suite = Some(runs.clone());
        Ok(runs)
    };

    let mut failed = 0;
    let mut report = |n: usize, name: &str, limit: Option<Duration>, run: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let outcome = run();
        let took = t0.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(msg), Some(l)) if took > l => Err(format!("{msg}; took {took:.1?} over {l:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(msg) => println!("criterion {n:>2} {name:<22} PASS  {msg} ({took:.2?})"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n:>2} {name:<22} FAIL  {msg} ({took:.2?})");
            }
        }
    };

    report(1, "formula fidelity", Some(Duration::from_secs(1)), &mut formulas);
    report(2, "gradient checks", Some(Duration::from_secs(30)), &mut gradients);
    report(3, "shapley axioms", Some(Duration::from_secs(60)), &mut shapley);
    report(4, "oracle equivalence", None, &mut oracles);
    report(5, "invariants", None, &mut || invariants(&bench));
    report(6, "calibration", None, &mut || calibration(&bench));
    report(7, "comparative stability", Some(Duration::from_secs(600)), &mut || {
        let runs = ablation_suite(&bench)?;
        let full: Vec<SystemRun> = runs.into_iter().filter(|r| r.variant == Ablation::full().label()).collect();
        stability(&bench, &full)
    });
    report(8, "ablation contract", None, &mut || ablations(&ablation_suite(&bench)?));
    report(9, "latency contract", Some(Duration::from_secs(120)), &mut || latency(&bench));
    report(10, "statistics", None, &mut statistics);

    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
