//! Independent reference computations shared by the integration tests and
//! the acceptance runner. Each check returns a one-line summary on success.
#![allow(dead_code, clippy::excessive_precision)]

use dsa_core::env::{input_pair, Action, EnvConfig, EnvState, Observation, SnrTable};
use dsa_core::nn::{
    log_softmax, ActorParams, CriticParams, HiddenState, RecurrentNet, IS_WEIGHT, NUM_TENSORS, TENSOR_NAMES,
};
use dsa_core::ppo::{actor_objective_gradient, clip_fn, compute_gae, rewards_to_go, AgentTrajectory, PpoConfig};
use dsa_core::pruning::{maybe_prune, prune_actor, PruneConfig, ScheduleKind, SparsitySchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

// ---------------------------------------------------------------------------
// Sparsity schedules

pub const SCHEDULE_POINTS: [usize; 8] = [0, 1, 50, 100, 200, 500, 999, 1000];

/// Reference values from a 50-digit mpmath evaluation with p_0 = 0,
/// p_final = 0.95, i_P = 1000, amplitude 0.1, period 200.
pub fn schedule_reference(kind: ScheduleKind, start: usize) -> [f64; 8] {
    match (kind, start) {
        (ScheduleKind::Linear, 0) => [0.0, 0.00095, 0.0475, 0.095, 0.19, 0.475, 0.94905, 0.95],
        (ScheduleKind::Polynomial, 0) => [
            0.0,
            0.00284715095,
            0.13549375,
            0.25745,
            0.4636,
            0.83125,
            0.94999999905,
            0.95,
        ],
        (ScheduleKind::Harmonic, 0) => [
            0.0,
            0.0031434199369302004808,
            0.10584803821730958006,
            0.023248154759802053245,
            0.090716927671899973551,
            0.475,
            0.94685658006306979952,
            0.95,
        ],
        (ScheduleKind::Linear, 200) => [0.0, 0.0, 0.0, 0.0, 0.0, 0.35625, 0.9488125, 0.95],
        (ScheduleKind::Polynomial, 200) => [0.0, 0.0, 0.0, 0.0, 0.0, 0.71806640625, 0.94999999814453125, 0.95],
        (ScheduleKind::Harmonic, 200) => [
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.29322536962658235843,
            0.94685526154838570989,
            0.95,
        ],
        _ => unreachable!("no reference for {kind} start {start}"),
    }
}

pub const KINDS: [ScheduleKind; 3] = [ScheduleKind::Linear, ScheduleKind::Polynomial, ScheduleKind::Harmonic];

pub fn check_schedules() -> Check {
    let mut worst = 0.0f64;
    for start in [0, 200] {
        for kind in KINDS {
            let s = SparsitySchedule::new(kind, 0.95, start, 1000);
            let want = schedule_reference(kind, start);
            for (&i, &w) in SCHEDULE_POINTS.iter().zip(&want) {
                let got = s.sparsity_at(i);
                let err = (got - w).abs();
                worst = worst.max(err);
                ensure!(err <= 1e-12, "{kind} start={start} i={i}: got {got:.17} want {w:.17}");
            }
            ensure!(
                s.sparsity_at(0) == 0.0,
                "{kind} start={start}: p(0) = {} not exactly 0",
                s.sparsity_at(0)
            );
            ensure!(
                s.sparsity_at(1000) == 0.95,
                "{kind} start={start}: p(1000) = {} not exactly 0.95",
                s.sparsity_at(1000)
            );
        }
        let h = SparsitySchedule::new(ScheduleKind::Harmonic, 0.95, start, 1000);
        ensure!(
            (0..1000).any(|i| h.sparsity_at(i + 1) < h.sparsity_at(i)),
            "harmonic start={start} is monotone"
        );
    }
    Ok(format!(
        "48 points, max abs error {worst:.1e}; endpoints exact; harmonic non-monotone"
    ))
}

// ---------------------------------------------------------------------------
// Environment

/// Brute-force slot outcome: (observation value, achieved SNR) per agent.
pub fn oracle_slot(actions: &[usize], pu: &[bool], snr: &[Vec<f64>]) -> (Vec<i8>, Vec<f64>, f64) {
    let mut obs = Vec::new();
    let mut got = Vec::new();
    for (n, &a) in actions.iter().enumerate() {
        if a == 0 {
            obs.push(0);
            got.push(0.0);
            continue;
        }
        let others = actions.iter().enumerate().filter(|&(m, &b)| m != n && b == a).count();
        if pu[a - 1] {
            obs.push(-2);
            got.push(0.0);
        } else if others > 0 {
            obs.push(-1);
            got.push(0.0);
        } else {
            obs.push(1);
            got.push(snr[n][a - 1]);
        }
    }
    let mut reward = 0.0;
    for &b in &got {
        reward += (1.0 + b).log2();
    }
    (obs, got, reward)
}

fn decode(mut code: usize, base: usize, len: usize) -> Vec<usize> {
    (0..len)
        .map(|_| {
            let d = code % base;
            code /= base;
            d
        })
        .collect()
}

pub fn check_env_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases = 0usize;
    for (n, k) in [(2, 1), (3, 2), (4, 3)] {
        let snr: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(30.0..40.0)).collect())
            .collect();
        let table = SnrTable::from_rows(snr.clone()).map_err(|e| e.to_string())?;
        let config = EnvConfig::new(n, k, 2);
        for pu_code in 0..(1usize << k) {
            let pu: Vec<bool> = (0..k).map(|c| pu_code >> c & 1 == 1).collect();
            for code in 0..(k + 1).pow(n as u32) {
                let joint = decode(code, k + 1, n);
                let mut state = EnvState::with_world(&config, table.clone(), pu.clone()).map_err(|e| e.to_string())?;
                let actions: Vec<Action> = joint.iter().map(|&a| Action(a)).collect();
                let res = state.step(&actions).map_err(|e| e.to_string())?;
                let (obs, got, reward) = oracle_slot(&joint, &pu, &snr);
                let obs_env: Vec<i8> = res.obs.iter().map(|o| o.value()).collect();
                ensure!(
                    obs_env == obs,
                    "N={n} K={k} pu={pu:?} a={joint:?}: obs {obs_env:?} vs {obs:?}"
                );
                ensure!(
                    res.achieved_snr
                        .iter()
                        .map(|v| v.to_bits())
                        .eq(got.iter().map(|v| v.to_bits())),
                    "N={n} K={k} pu={pu:?} a={joint:?}: snr {:?} vs {got:?}",
                    res.achieved_snr
                );
                ensure!(
                    res.reward.to_bits() == reward.to_bits(),
                    "N={n} K={k} pu={pu:?} a={joint:?}: reward {} vs {reward}",
                    res.reward
                );
                ensure!(!res.done, "episode ended after one of two slots");
                let want_inputs: Vec<[f64; 2]> = joint
                    .iter()
                    .zip(&obs)
                    .map(|(&a, &o)| input_pair(Action(a), Observation::from_value(o).unwrap()))
                    .collect();
                ensure!(
                    state.inputs() == want_inputs,
                    "inputs after step disagree for a={joint:?}"
                );
                let res2 = state.step(&actions).map_err(|e| e.to_string())?;
                ensure!(
                    res2.done && res2.reward.to_bits() == reward.to_bits(),
                    "second slot differs"
                );
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (world, joint action) cases bit-exact"))
}

// ---------------------------------------------------------------------------
// Gradients

pub const FD_STEP: f64 = 1e-5;
pub const KINK_MARGIN: f64 = 1e-3;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn random_inputs(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<[f64; 2]> {
    (0..len)
        .map(|_| [rng.random_range(0..=k) as f64, rng.random_range(-2..=1) as f64])
        .collect()
}

/// True when no second-layer output sits within the margin of the ReLU kink.
pub fn kink_free(net: &RecurrentNet, inputs: &[[f64; 2]]) -> bool {
    let mut h = HiddenState::zeros(net.hidden());
    for y in inputs {
        let (_, next) = net.forward(y, &h).unwrap();
        if next.layers[1].h.iter().any(|v| v.abs() < KINK_MARGIN) {
            return false;
        }
        h = next;
    }
    true
}

/// Network with perturbed biases so every coordinate carries gradient.
pub fn random_net(rng: &mut ChaCha8Rng, hidden: usize, outputs: usize) -> RecurrentNet {
    let mut net = RecurrentNet::init(hidden, outputs, rng);
    for t in net.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    net
}

/// Largest relative error between `analytic` and central differences of `f`.
pub fn fd_worst(net: &RecurrentNet, analytic: &RecurrentNet, f: impl Fn(&RecurrentNet) -> f64) -> (f64, String) {
    let mut worst = (0.0, String::new());
    for ti in 0..NUM_TENSORS {
        for j in 0..net.tensors()[ti].len() {
            let mut plus = net.clone();
            plus.tensors_mut()[ti][j] += FD_STEP;
            let mut minus = net.clone();
            minus.tensors_mut()[ti][j] -= FD_STEP;
            let fd = (f(&plus) - f(&minus)) / (2.0 * FD_STEP);
            let e = rel_err(analytic.tensors()[ti][j], fd);
            if e > worst.0 {
                worst = (e, format!("{}[{j}]", TENSOR_NAMES[ti]));
            }
        }
    }
    worst
}

/// BPTT against finite differences of a random linear functional of the outputs.
pub fn bptt_case(seed: u64, hidden: usize, len: usize) -> (f64, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (net, inputs) = loop {
        let net = random_net(&mut rng, hidden, 3);
        let inputs = random_inputs(&mut rng, len, 2);
        if kink_free(&net, &inputs) {
            break (net, inputs);
        }
    };
    let weights: Vec<Vec<f64>> = (0..len)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let h0 = HiddenState::zeros(hidden);
    let grad = net.backward_through_time(&inputs, &weights, &h0).unwrap();
    fd_worst(&net, &grad, |n| {
        let u = n.unroll(&inputs, &h0).unwrap();
        u.outputs
            .iter()
            .zip(&weights)
            .map(|(o, w)| o.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    })
}

pub const BPTT_CASES: [(u64, usize, usize); 7] = [
    (1, 4, 1),
    (2, 4, 3),
    (3, 4, 5),
    (4, 4, 6),
    (11, 8, 2),
    (12, 8, 5),
    (13, 8, 6),
];

/// Frozen PPO batch: behavior log-probabilities shifted away from the current
/// policy so both clipped and unclipped terms occur, screened away from the
/// clip and ReLU kinks.
pub struct FrozenBatch {
    pub net: RecurrentNet,
    pub trajectories: Vec<AgentTrajectory>,
    pub advantages: Vec<Vec<f64>>,
    pub ppo: PpoConfig,
}

pub fn frozen_ppo_batch(seed: u64, hidden: usize, len: usize, episodes: usize) -> FrozenBatch {
    let ppo = PpoConfig {
        entropy_coef: 0.01,
        ..PpoConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'retry: loop {
        let net = random_net(&mut rng, hidden, 3);
        let mut trajectories = Vec::new();
        let mut advantages = Vec::new();
        for _ in 0..episodes {
            let inputs = random_inputs(&mut rng, len, 2);
            if !kink_free(&net, &inputs) {
                continue 'retry;
            }
            let unroll = net.unroll(&inputs, &HiddenState::zeros(hidden)).unwrap();
            let mut traj = AgentTrajectory {
                inputs,
                actions: Vec::new(),
                logprobs: Vec::new(),
                values: vec![0.0; len],
            };
            let mut adv = Vec::new();
            for logits in &unroll.outputs {
                let logp = log_softmax(logits);
                let a = rng.random_range(0..3);
                let old = logp[a] + rng.random_range(-0.5..0.5);
                let ratio = (logp[a] - old).exp();
                let advantage: f64 = rng.random_range(-2.0..2.0);
                let bound = clip_fn(ppo.clip_epsilon, advantage) / advantage;
                if (ratio - bound).abs() < KINK_MARGIN || advantage.abs() < 0.05 {
                    continue 'retry;
                }
                traj.actions.push(a);
                traj.logprobs.push(old);
                adv.push(advantage);
            }
            trajectories.push(traj);
            advantages.push(adv);
        }
        return FrozenBatch {
            net,
            trajectories,
            advantages,
            ppo,
        };
    }
}

pub fn ppo_actor_fd_worst(batch: &FrozenBatch) -> (f64, String, usize) {
    let refs: Vec<&AgentTrajectory> = batch.trajectories.iter().collect();
    let (_, grad) = actor_objective_gradient(&batch.net, &refs, &batch.advantages, &batch.ppo).unwrap();
    let clipped = batch
        .trajectories
        .iter()
        .zip(&batch.advantages)
        .map(|(t, adv)| {
            let u = batch
                .net
                .unroll(&t.inputs, &HiddenState::zeros(batch.net.hidden()))
                .unwrap();
            u.outputs
                .iter()
                .enumerate()
                .filter(|(s, logits)| {
                    let ratio = (log_softmax(logits)[t.actions[*s]] - t.logprobs[*s]).exp();
                    ratio * adv[*s] > clip_fn(batch.ppo.clip_epsilon, adv[*s])
                })
                .count()
        })
        .sum();
    // The gradient is that of the negated objective.
    let (worst, at) = fd_worst(&batch.net, &grad, |n| {
        -actor_objective_gradient(n, &refs, &batch.advantages, &batch.ppo)
            .unwrap()
            .0
    });
    (worst, at, clipped)
}

pub fn check_gradients() -> Check {
    let mut bptt_worst = 0.0f64;
    for (seed, h, t) in BPTT_CASES {
        let (e, at) = bptt_case(seed, h, t);
        ensure!(e < 1e-4, "BPTT H={h} T={t}: rel error {e:.2e} at {at}");
        bptt_worst = bptt_worst.max(e);
    }
    let batch = frozen_ppo_batch(7, 4, 4, 2);
    let (ppo_worst, at, clipped) = ppo_actor_fd_worst(&batch);
    ensure!(ppo_worst < 1e-3, "PPO actor loss: rel error {ppo_worst:.2e} at {at}");
    Ok(format!(
        "BPTT max rel err {bptt_worst:.1e} (H in {{4,8}}, T<=6); PPO actor loss max rel err {ppo_worst:.1e} ({clipped}/8 steps clipped)"
    ))
}

// ---------------------------------------------------------------------------
// Returns and advantages

pub fn brute_rewards_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            (t..rewards.len())
                .map(|l| gamma.powi((l - t) as i32) * rewards[l])
                .sum()
        })
        .collect()
}

pub fn check_gae_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let gamma = 0.99;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let len = rng.random_range(1..=60);
        let rewards: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v_next = |t: usize| if t + 1 < len { values[t + 1] } else { 0.0 };

        let td = compute_gae(&values, &rewards, gamma, 0.0).map_err(|e| e.to_string())?;
        for t in 0..len {
            let e = (td[t] - (rewards[t] + gamma * v_next(t) - values[t])).abs();
            worst = worst.max(e);
            ensure!(e <= 1e-12, "lambda=0 identity off by {e:.2e} at t={t} (T={len})");
        }
        let mc = compute_gae(&values, &rewards, gamma, 1.0).map_err(|e| e.to_string())?;
        let brute = brute_rewards_to_go(&rewards, gamma);
        for t in 0..len {
            let e = (mc[t] - (brute[t] - values[t])).abs();
            worst = worst.max(e);
            ensure!(e <= 1e-12, "lambda=1 identity off by {e:.2e} at t={t} (T={len})");
        }
        let rtg = rewards_to_go(&rewards, gamma);
        for t in 0..len {
            let e = (rtg[t] - brute[t]).abs();
            worst = worst.max(e);
            ensure!(e <= 1e-12, "rewards_to_go off by {e:.2e} at t={t} (T={len})");
        }
    }
    Ok(format!("100 random sequences, max abs error {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// Pruning

/// `floor(num/den * size)` in exact integer arithmetic.
pub fn exact_floor(num: usize, den: usize, size: usize) -> usize {
    num * size / den
}

pub fn random_actor(seed: u64, hidden: usize, k: usize) -> ActorParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actor = ActorParams::init(&mut rng, k, hidden);
    for t in actor.net.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
    }
    actor
}

pub fn check_prune_actor(actor: &ActorParams, num: usize, den: usize) -> Result<(), String> {
    let p = num as f64 / den as f64;
    let before = actor.net.clone();
    let mut pruned = actor.clone();
    prune_actor(&mut pruned, p);
    let weights = (0..NUM_TENSORS).filter(|&t| IS_WEIGHT[t]);
    for (mi, ti) in weights.enumerate() {
        let orig = before.tensors()[ti];
        let now = pruned.net.tensors()[ti];
        let mask = &pruned.mask.tensors[mi];
        let want = exact_floor(num, den, orig.len());
        let masked = mask.iter().filter(|&&m| !m).count();
        ensure!(
            masked == want,
            "{} p={p}: {masked} masked, want {want}",
            TENSOR_NAMES[ti]
        );
        let zeros = now.iter().filter(|&&v| v == 0.0).count();
        ensure!(zeros >= want, "{} p={p}: only {zeros} zeros", TENSOR_NAMES[ti]);
        let max_masked = (0..orig.len())
            .filter(|&j| !mask[j])
            .map(|j| orig[j].abs())
            .fold(0.0, f64::max);
        let min_kept = (0..orig.len())
            .filter(|&j| mask[j])
            .map(|j| orig[j].abs())
            .fold(f64::INFINITY, f64::min);
        ensure!(
            max_masked <= min_kept,
            "{} p={p}: masked magnitude {max_masked} exceeds survivor {min_kept}",
            TENSOR_NAMES[ti]
        );
        for j in 0..orig.len() {
            let expect = if mask[j] { orig[j] } else { 0.0 };
            ensure!(
                now[j].to_bits() == expect.to_bits(),
                "{}[{j}] p={p}: survivor changed",
                TENSOR_NAMES[ti]
            );
        }
    }
    for ti in (0..NUM_TENSORS).filter(|&t| !IS_WEIGHT[t]) {
        ensure!(
            before.tensors()[ti] == pruned.net.tensors()[ti],
            "bias {} was modified",
            TENSOR_NAMES[ti]
        );
    }
    Ok(())
}

pub const PRUNE_LEVELS: [(usize, usize); 4] = [(25, 100), (50, 100), (90, 100), (95, 100)];

pub fn check_pruning() -> Check {
    for (hidden, k) in [(16, 5), (128, 5), (7, 2)] {
        let actor = random_actor(hidden as u64, hidden, k);
        for (num, den) in PRUNE_LEVELS {
            check_prune_actor(&actor, num, den)?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let critic = CriticParams::init(&mut rng, 16);
    let hash = critic.net.digest();
    let mut actors: Vec<ActorParams> = (0..3).map(|s| random_actor(s, 16, 5)).collect();
    let cfg = PruneConfig::uniform(SparsitySchedule::new(ScheduleKind::Harmonic, 0.95, 0, 100), 3, 5);
    let mut events = 0;
    for i in 0..=100 {
        if maybe_prune(i, &cfg, &mut actors).map_err(|e| e.to_string())? {
            events += 1;
        }
        ensure!(critic.net.digest() == hash, "critic changed at iteration {i}");
    }
    ensure!(events > 0, "no prune events fired");
    Ok(format!(
        "exact floor counts and magnitude order at 4 levels x 3 shapes; critic hash stable over {events} events"
    ))
}
