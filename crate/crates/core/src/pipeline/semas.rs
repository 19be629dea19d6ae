//! Edge, Fog and Cloud workers wired over the bus, one iteration at a time.

use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, System};
use super::operator::AcceptanceTally;
use super::prepare::Prepared;
use super::results::{CloudLog, PhaseRecord, PhaseStatus, SystemRun};
use crate::bus::{Bus, ScoreSource, StreamId, Subscription, Topic};
use crate::consensus::{generate_response, AnomalyAlert, ConsensusPolicy, ResponseContext, ResponsePlan};
use crate::detect::{vote_fraction, EnsembleBank};
use crate::edge::{aggregate, EdgeAgent, EdgeMode, Features, DEFAULT_BANDS};
use crate::error::{Error, Result};
use crate::evolve::{
    apply_action, decisions_on, evaluate_on, select_features, shapley_exact, validate_policy, window_f1_on,
    FeedbackEnv, FeedbackRecord, PageHinkley, PageHinkleyConfig, PolicyState, PpoAgent, PpoConfig, RecentMetrics,
    ScorePath, ShapleyReport, StumpEnsemble, Transition, Tunables, EPISODE_LEN, MAX_EXACT_FEATURES,
};
use crate::federate::{aggregate_tunables, AgentContribution, RoundLog};
use crate::metrics::{roc_auc, ConfusionCounts, IterationReport};
use crate::rul::{rul_predict, window_ending_at, RulModel};

const POLICY_PUBLISH_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPayload {
    pub features: Features,
    pub extract_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub fog: usize,
    pub tick: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub fog: usize,
    pub alert: AnomalyAlert,
    pub raw: [f64; 5],
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub fog: usize,
    pub plan: ResponsePlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyUpdate {
    pub iteration: usize,
    pub fog: Option<usize>,
    pub tunables: Tunables,
    pub round: Option<RoundLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorLog {
    pub iteration: usize,
    pub kind: String,
    pub detail: serde_json::Value,
}

#[derive(Debug, Default, Clone, Copy)]
struct FogCounts {
    aggregated: usize,
    b1: usize,
    b2: usize,
    fused: usize,
    published: usize,
    responded: usize,
}

#[derive(Debug, Clone, Copy)]
struct FeedItem {
    tick: u64,
    record: FeedbackRecord,
    a_fog: f64,
    decision: bool,
    latency_ms: f64,
}

#[derive(Debug, Default)]
struct CloudIntake {
    items: Vec<FeedItem>,
    drift_at: Option<usize>,
}

fn worker_panic(name: &str) -> Error {
    Error::Worker(format!("{name} worker panicked"))
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const SLEEP_CHUNK: Duration = Duration::from_millis(20);

/// Stretches processing time by `factor`, paying the extra time in sleeps
/// of at least [`SLEEP_CHUNK`].
#[derive(Debug)]
struct Slowdown {
    factor: f64,
    debt: Duration,
}

impl Slowdown {
    fn new(factor: f64) -> Self {
        Self { factor, debt: Duration::ZERO }
    }

    fn charge(&mut self, spent: Duration) {
        if self.factor > 1.0 {
            self.debt += spent.mul_f64(self.factor - 1.0);
            if self.debt >= SLEEP_CHUNK {
                self.settle();
            }
        }
    }

    fn settle(&mut self) {
        if !self.debt.is_zero() {
            thread::sleep(std::mem::take(&mut self.debt));
        }
    }
}

fn score_path(cfg: &RunConfig) -> ScorePath {
    if cfg.ablation.no_consensus {
        ScorePath::PrimaryOnly
    } else {
        ScorePath::Consensus
    }
}

fn fog_policy(t: &Tunables, path: ScorePath) -> ConsensusPolicy {
    match path {
        ScorePath::Consensus => t.consensus(),
        ScorePath::PrimaryOnly => ConsensusPolicy { w1: 1.0, w2: 0.0, tau: t.tau },
    }
}

fn edge_worker(bus: &Bus, stream: StreamId, rows: &[Vec<f64>], lo: usize, hi: usize) -> Result<usize> {
    let mut agent = EdgeAgent::new(stream, EdgeMode::Tabular, DEFAULT_BANDS);
    let mut sent = 0;
    for (tick, row) in rows.iter().enumerate() {
        let t0 = Instant::now();
        let out = agent.push(row[lo..hi].to_vec(), tick as u64)?;
        let extract_ns = t0.elapsed().as_nanos() as u64;
        if let Some(features) = out {
            bus.publish_topic(Topic::Chunk(stream), &ChunkPayload { features, extract_ns })?;
            sent += 1;
        }
    }
    Ok(sent)
}

struct FogJob<'a> {
    fog: usize,
    fogs: usize,
    ticks: usize,
    bank: &'a EnsembleBank,
    thresholds: [f64; 5],
    policy: ConsensusPolicy,
    rul: Option<&'a RulModel>,
    context: ResponseContext,
}

fn recv_chunk(sub: &Subscription) -> Result<ChunkPayload> {
    let env = sub.recv().ok_or_else(|| Error::Worker("chunk stream closed early".into()))?;
    Ok(env.decode()?)
}

fn fog_worker(bus: &Bus, s1: Subscription, s2: Subscription, job: FogJob<'_>) -> Result<FogCounts> {
    let mut counts = FogCounts::default();
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(job.ticks);
    for _ in 0..job.ticks {
        let c1 = recv_chunk(&s1)?;
        let c2 = recv_chunk(&s2)?;
        if c1.features.end_tick != c2.features.end_tick {
            return Err(Error::Worker(format!(
                "stream ticks out of step: {} vs {}",
                c1.features.end_tick, c2.features.end_tick
            )));
        }
        let tick = c1.features.end_tick;
        let t0 = Instant::now();
        let z = aggregate(&c1.features, &c2.features)?;
        let mine = tick as usize % job.fogs == job.fog;
        if !mine {
            history.push(z.values);
            continue;
        }
        counts.aggregated += 1;
        let raw = job.bank.raw_scores(&z.values)?;
        let a1 = raw.0[0];
        counts.b1 += 1;
        let a2 = vote_fraction(&EnsembleBank::votes_from_raw(&raw, &job.thresholds));
        counts.b2 += 1;
        let alert = AnomalyAlert::evaluate(tick, a1, a2, &job.policy)?;
        counts.fused += 1;
        let compute_ns = t0.elapsed().as_nanos() as u64;
        let latency_ms = (c1.extract_ns.max(c2.extract_ns) + compute_ns) as f64 / 1e6;

        bus.publish_topic(Topic::Scores(ScoreSource::If), &ScoreRecord { fog: job.fog, tick, score: a1 })?;
        bus.publish_topic(Topic::Scores(ScoreSource::Lstm), &ScoreRecord { fog: job.fog, tick, score: a2 })?;
        bus.publish_topic(Topic::Anomalies, &AnomalyEvent { fog: job.fog, alert, raw: raw.0, latency_ms })?;
        counts.published += 1;
        history.push(z.values);

        if let (true, Some(model)) = (alert.decision, job.rul) {
            let end = history.len() - 1;
            let rul = rul_predict(model, &window_ending_at(&history, end, model.window))?;
            let ctx = ResponseContext { rul_hours: Some(rul), ..job.context.clone() };
            let plan = generate_response(&alert, &history[end], &ctx)?;
            bus.publish_topic(Topic::Actions, &ActionEvent { fog: job.fog, plan })?;
            counts.responded += 1;
        }
    }
    Ok(counts)
}

struct CloudJob<'a> {
    fog: usize,
    expected: usize,
    prepared: &'a Prepared,
    reward_latency_ms: f64,
    slowdown: f64,
    iteration: usize,
}

fn cloud_intake(bus: &Bus, sub: Subscription, job: CloudJob<'_>) -> Result<CloudIntake> {
    let mut out = CloudIntake { items: Vec::with_capacity(job.expected), drift_at: None };
    let mut ph = PageHinkley::new(PageHinkleyConfig::default());
    let mut slow = Slowdown::new(job.slowdown);
    while out.items.len() < job.expected {
        let env = sub.recv().ok_or_else(|| Error::Worker("anomaly stream closed early".into()))?;
        let ev: AnomalyEvent = env.decode()?;
        if ev.fog != job.fog {
            continue;
        }
        let t0 = Instant::now();
        let label = job.prepared.test[ev.alert.tick as usize].label;
        out.items.push(FeedItem {
            tick: ev.alert.tick,
            record: FeedbackRecord { a1: ev.alert.a1, raw: ev.raw, label, latency_ms: job.reward_latency_ms },
            a_fog: ev.alert.a_fog,
            decision: ev.alert.decision,
            latency_ms: ev.latency_ms,
        });
        let was = ph.drift_at();
        ph.update(ev.alert.a_fog);
        if was.is_none() {
            if let Some(at) = ph.drift_at() {
                out.drift_at = Some(at);
                let detail = serde_json::json!({
                    "fog": job.fog,
                    "tick": ev.alert.tick,
                    "position": at,
                    "edge_update": "refresh feature standardization for chunk/stream1 and chunk/stream2",
                });
                bus.publish_topic(
                    Topic::MonitorLogs,
                    &MonitorLog { iteration: job.iteration, kind: "drift".into(), detail },
                )?;
            }
        }
        slow.charge(t0.elapsed());
    }
    slow.settle();
    Ok(out)
}

struct StreamOutcome {
    intakes: Vec<CloudIntake>,
    counts: Vec<FogCounts>,
    edge_sent: usize,
    plans: Vec<ActionEvent>,
}

fn stream_iteration(
    bus: &Bus,
    p: &Prepared,
    cfg: &RunConfig,
    policies: &[Tunables],
    path: ScorePath,
    rul: Option<&RulModel>,
    iteration: usize,
) -> Result<StreamOutcome> {
    let k = cfg.fog_instances;
    let rows = p.test_rows();
    let n = rows.len();
    let d = p.n_features();
    let half = d / 2;
    let context = ResponseContext {
        equipment: p.dataset.clone(),
        feature_names: p.feature_names.clone(),
        ..ResponseContext::default()
    };

    let fog_subs: Vec<(Subscription, Subscription)> = (0..k)
        .map(|_| (bus.subscribe_topic(Topic::Chunk(StreamId::One)), bus.subscribe_topic(Topic::Chunk(StreamId::Two))))
        .collect();
    let cloud_subs: Vec<Subscription> = (0..k).map(|_| bus.subscribe_topic(Topic::Anomalies)).collect();
    let actions = bus.subscribe_topic(Topic::Actions);

    let (intakes, counts, edge_sent) = thread::scope(|s| -> Result<_> {
        let clouds: Vec<_> = cloud_subs
            .into_iter()
            .enumerate()
            .map(|(f, sub)| {
                let job = CloudJob {
                    fog: f,
                    expected: (0..n).filter(|t| t % k == f).count(),
                    prepared: p,
                    reward_latency_ms: cfg.reward_latency_ms,
                    slowdown: cfg.cloud_slowdown,
                    iteration,
                };
                s.spawn(move || {
                    let r = cloud_intake(bus, sub, job);
                    if r.is_err() {
                        bus.close();
                    }
                    r
                })
            })
            .collect();
        let fogs: Vec<_> = fog_subs
            .into_iter()
            .enumerate()
            .map(|(f, (s1, s2))| {
                let job = FogJob {
                    fog: f,
                    fogs: k,
                    ticks: n,
                    bank: &p.bank,
                    thresholds: p.thresholds.at(policies[f].rho),
                    policy: fog_policy(&policies[f], path),
                    rul,
                    context: context.clone(),
                };
                s.spawn(move || {
                    let r = fog_worker(bus, s1, s2, job);
                    if r.is_err() {
                        bus.close();
                    }
                    r
                })
            })
            .collect();
        let rows = &rows;
        let edges = [(StreamId::One, 0, half), (StreamId::Two, half, d)].map(|(id, lo, hi)| {
            s.spawn(move || {
                let r = edge_worker(bus, id, rows, lo, hi);
                if r.is_err() {
                    bus.close();
                }
                r
            })
        });
        let mut edge_sent = 0;
        for e in edges {
            edge_sent += e.join().map_err(|_| worker_panic("edge"))??;
        }
        let counts =
            fogs.into_iter().map(|h| h.join().map_err(|_| worker_panic("fog"))?).collect::<Result<Vec<_>>>()?;
        let intakes =
            clouds.into_iter().map(|h| h.join().map_err(|_| worker_panic("cloud"))?).collect::<Result<Vec<_>>>()?;
        Ok((intakes, counts, edge_sent))
    })?;
    let plans = actions.drain().iter().map(|e| e.decode()).collect::<std::result::Result<Vec<ActionEvent>, _>>()?;
    Ok(StreamOutcome { intakes, counts, edge_sent, plans })
}

/// PPO rounds on one Fog's feedback: each round collects whole episodes
/// from the current tunables until a batch is full, then updates.
fn ppo_rounds(
    agent: &mut PpoAgent,
    records: &[FeedbackRecord],
    p: &Prepared,
    current: Tunables,
    cfg: &RunConfig,
    path: ScorePath,
    env_seed: u64,
) -> Result<usize> {
    let mut transitions = 0;
    for round in 0..cfg.ppo_rounds_per_iter {
        let mut env =
            FeedbackEnv::new(records.to_vec(), p.thresholds.clone(), cfg.ppo.reward, mix(env_seed, round as u64))?
                .with_path(path);
        let mut s = env.reset(current);
        let mut collected = 0;
        loop {
            let (action, raw_action, logprob) = agent.act(&s)?;
            let (next, reward, done) = env.step(&action)?;
            agent.observe(Transition { state: s, action, raw_action, reward, next_state: next, logprob, done });
            collected += 1;
            s = if done { env.reset(current) } else { next };
            if done && collected >= cfg.ppo.batch_size {
                break;
            }
        }
        agent.update()?;
        transitions += collected;
    }
    Ok(transitions)
}

fn greedy_candidate(
    agent: &PpoAgent,
    records: &[FeedbackRecord],
    p: &Prepared,
    current: Tunables,
    path: ScorePath,
) -> Result<Tunables> {
    let mut t = current;
    for _ in 0..EPISODE_LEN {
        let e = evaluate_on(path, records, &p.thresholds, &t);
        let state = PolicyState { f1: e.f1, precision: e.precision, recall: e.recall, tunables: t };
        t = apply_action(&t, &agent.act_greedy(&state)?);
    }
    Ok(t)
}

/// Attribution of the candidate's decisions, distilled into a stump
/// surrogate, at the most anomalous sample against the feature means.
fn explain_candidate(
    p: &Prepared,
    items: &[FeedItem],
    records: &[FeedbackRecord],
    candidate: &Tunables,
    cfg: &RunConfig,
    path: ScorePath,
) -> Result<ShapleyReport> {
    let rows: Vec<Vec<f64>> = items.iter().map(|it| p.test[it.tick as usize].features.clone()).collect();
    let target: Vec<f64> =
        decisions_on(path, records, &p.thresholds, candidate).into_iter().map(|b| f64::from(u8::from(b))).collect();
    let features = select_features(&rows, &target, cfg.shapley_features.min(MAX_EXACT_FEATURES));
    let surrogate = StumpEnsemble::fit(&rows, &target, &features, cfg.surrogate_rounds, 0.1)?;
    let d = rows[0].len();
    let baseline: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect();
    let top = items
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.a_fog.total_cmp(&b.1.a_fog).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(shapley_exact(|x| surrogate.predict(x), &baseline, &rows[top], &features)?)
}

fn record(trace: &mut Vec<PhaseRecord>, iteration: usize, phase: &str, status: PhaseStatus, count: usize) {
    trace.push(PhaseRecord { iteration, phase: phase.to_string(), status, count });
}

/// Runs the full loop for one seed.
pub fn run_semas(p: &Prepared, cfg: &RunConfig) -> Result<SystemRun> {
    let k = cfg.fog_instances;
    let path = score_path(cfg);
    let initial = p.initial_tunables(path)?;
    let mut policies = vec![initial; k];
    let mut agents = (0..k)
        .map(|f| PpoAgent::new(PpoConfig { seed: mix(p.seed, 0x9900 + f as u64), ..cfg.ppo.clone() }))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let rul = if cfg.ablation.no_response { None } else { Some(p.rul_model()?) };
    let labels = p.test_labels();

    let mut reports: Vec<IterationReport> = Vec::new();
    let mut trace = Vec::new();
    let mut cloud_logs = Vec::new();
    let mut acceptance = AcceptanceTally::default();
    let mut predictions = Vec::new();
    let mut latencies = Vec::new();

    for it in 1..=cfg.iterations {
        let bus = Bus::new(cfg.queue_capacity);
        let policy_sub = bus.subscribe_topic(Topic::PolicyUpdates);
        let out = stream_iteration(&bus, p, cfg, &policies, path, rul, it)?;
        let sum = |f: fn(&FogCounts) -> usize| out.counts.iter().map(f).sum::<usize>();
        record(&mut trace, it, "extract", PhaseStatus::Ok, out.edge_sent);
        record(&mut trace, it, "publish_chunks", PhaseStatus::Ok, out.edge_sent);
        record(&mut trace, it, "aggregate", PhaseStatus::Ok, sum(|c| c.aggregated));
        record(&mut trace, it, "b1_score", PhaseStatus::Ok, sum(|c| c.b1));
        record(&mut trace, it, "b2_vote", PhaseStatus::Ok, sum(|c| c.b2));
        record(&mut trace, it, "fuse", PhaseStatus::Ok, sum(|c| c.fused));
        record(&mut trace, it, "publish_anomalies", PhaseStatus::Ok, sum(|c| c.published));
        let respond_status = if cfg.ablation.no_response { PhaseStatus::Skipped } else { PhaseStatus::Ok };
        record(&mut trace, it, "respond", respond_status, sum(|c| c.responded));
        let drifted = out.intakes.iter().filter(|c| c.drift_at.is_some()).count();
        let drift_status = if drifted > 0 { PhaseStatus::Drift } else { PhaseStatus::Stable };
        record(&mut trace, it, "drift_check", drift_status, drifted);

        for ev in &out.plans {
            let s = &p.test[ev.plan.tick as usize];
            acceptance.add(cfg.operator.judge(&ev.plan, s.label, s.severity()));
        }

        // iteration metrics over the whole stream, in tick order
        let mut all: Vec<FeedItem> = out.intakes.iter().flat_map(|c| c.items.iter().copied()).collect();
        all.sort_by_key(|i| i.tick);
        let preds: Vec<bool> = all.iter().map(|i| i.decision).collect();
        let scores: Vec<f64> = all.iter().map(|i| i.a_fog).collect();
        let ys: Vec<bool> = all.iter().map(|i| labels[i.tick as usize]).collect();
        let counts = ConfusionCounts::from_predictions(&preds, &ys)?;
        let warm: Vec<f64> =
            all.iter().filter(|i| i.tick as usize >= cfg.latency_warmup).map(|i| i.latency_ms).collect();
        let latency = if warm.is_empty() { 0.0 } else { warm.iter().sum::<f64>() / warm.len() as f64 };
        let f1 = counts.f1();
        let first = reports.first().map_or(f1, |r| r.f1);
        reports.push(IterationReport {
            iteration: it,
            f1,
            precision: counts.precision(),
            recall: counts.recall(),
            accuracy: counts.accuracy(),
            roc_auc: roc_auc(&scores, &ys)?,
            delta_f1: f1 - first,
            latency_ms: latency,
            policy: policies[0].snapshot(),
        });
        predictions.push(preds);
        latencies.push(warm);
        record(&mut trace, it, "collect_feedback", PhaseStatus::Ok, all.len());

        // Cloud barrier: evolve, validate, aggregate, apply
        let mut logs: Vec<CloudLog> = Vec::with_capacity(k);
        let mut transitions = 0;
        for f in 0..k {
            let t0 = Instant::now();
            let items = &out.intakes[f].items;
            let records: Vec<FeedbackRecord> = items.iter().map(|i| i.record).collect();
            let current = policies[f];
            let mut log = CloudLog {
                iteration: it,
                fog: f,
                records: records.len(),
                drift_at: out.intakes[f].drift_at,
                transitions: 0,
                current,
                candidate: None,
                accepted: false,
                reasons: Vec::new(),
                welch_p: None,
                shapley_residual: None,
                applied: current,
            };
            if !cfg.ablation.no_ppo && !records.is_empty() {
                let seed = mix(mix(p.seed, f as u64), it as u64);
                log.transitions = ppo_rounds(&mut agents[f], &records, p, current, cfg, path, seed)?;
                transitions += log.transitions;
                let candidate = greedy_candidate(&agents[f], &records, p, current, path)?;
                let report = explain_candidate(p, items, &records, &candidate, cfg, path)?;
                let w = cfg.validation_windows;
                let size = records.len().div_ceil(w);
                let recent = RecentMetrics {
                    current_f1: window_f1_on(path, &records, &p.thresholds, &current, w),
                    candidate_f1: window_f1_on(path, &records, &p.thresholds, &candidate, w),
                    drift_window: log.drift_at.map(|at| (at - 1) / size + 1),
                };
                let verdict = validate_policy(&candidate, &current, &recent, Some(&report))?;
                log.candidate = Some(candidate);
                log.accepted = verdict.accepted;
                log.reasons = verdict.reasons;
                log.welch_p = verdict.welch.map(|w| w.p);
                log.shapley_residual = Some(report.efficiency_residual);
                if log.accepted {
                    log.applied = candidate;
                }
            }
            let mut slow = Slowdown::new(cfg.cloud_slowdown);
            slow.charge(t0.elapsed());
            slow.settle();
            logs.push(log);
        }
        let ppo_status = if cfg.ablation.no_ppo { PhaseStatus::Skipped } else { PhaseStatus::Ok };
        record(&mut trace, it, "ppo_update", ppo_status, transitions);
        let accepted = logs.iter().filter(|l| l.accepted).count();
        record(&mut trace, it, "shap_validate", ppo_status, accepted);

        for l in logs.iter().filter(|l| l.accepted) {
            let msg = PolicyUpdate { iteration: it, fog: Some(l.fog), tunables: l.applied, round: None };
            bus.publish_blocking(Topic::PolicyUpdates, &msg, POLICY_PUBLISH_TIMEOUT)?;
        }
        record(
            &mut trace,
            it,
            "publish_policy",
            if accepted > 0 { PhaseStatus::Ok } else { PhaseStatus::Skipped },
            accepted,
        );

        let federate = accepted > 0 && !cfg.ablation.no_federated;
        if federate {
            let contributions: Vec<AgentContribution> = logs
                .iter()
                .map(|l| AgentContribution { agent_id: l.fog, n_samples: l.records as u64, params: l.applied.to_vec() })
                .collect();
            let (global, round) = aggregate_tunables(&contributions)?;
            let msg = PolicyUpdate { iteration: it, fog: None, tunables: global, round: Some(round) };
            bus.publish_blocking(Topic::PolicyUpdates, &msg, POLICY_PUBLISH_TIMEOUT)?;
            for l in &mut logs {
                l.applied = global;
            }
        }
        record(
            &mut trace,
            it,
            "federated_agg",
            if federate { PhaseStatus::Ok } else { PhaseStatus::Skipped },
            usize::from(federate),
        );

        // the Fog side picks up whatever reached policy/updates last
        let mut changed = 0;
        for (f, l) in logs.iter().enumerate() {
            if l.applied != policies[f] {
                changed += 1;
            }
            policies[f] = l.applied;
        }
        let delivered = policy_sub.drain().len();
        debug_assert!(delivered >= accepted);
        record(&mut trace, it, "apply_updates", PhaseStatus::Ok, changed);

        let detail = serde_json::to_value(reports.last())?;
        bus.publish_topic(Topic::MonitorLogs, &MonitorLog { iteration: it, kind: "metrics".into(), detail })?;
        record(&mut trace, it, "log_metrics", PhaseStatus::Ok, 1);
        cloud_logs.extend(logs);
    }

    Ok(SystemRun {
        system: System::Semas,
        variant: cfg.ablation.label(),
        dataset: p.dataset.clone(),
        seed: p.seed,
        reports,
        trace,
        cloud: cloud_logs,
        acceptance,
        predictions,
        latencies,
    })
}
