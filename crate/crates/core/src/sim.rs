//! Monte Carlo rollouts of a layered policy under a schedule.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::model::{MacroAction, Mdp};
use crate::schedule::Schedule;
use crate::solver::PolicyRecord;

pub const DEFAULT_HORIZON: usize = 512;

/// Sample `i` uses `ChaCha8Rng::seed_from_u64(seed)` on stream `i`.
pub const RNG_ALGORITHM: &str = "chacha8-seed_from_u64-stream_per_sample";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutStats {
    pub n: usize,
    pub mean_exec: f64,
    pub mean_checkin: f64,
    pub stderr_exec: f64,
    pub stderr_checkin: f64,
    pub truncated_fraction: f64,
    pub seed: u64,
    pub horizon_checkins: usize,
    pub rng: String,
}

/// One macro step of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub checkin: usize,
    pub state: usize,
    pub macro_action: Vec<usize>,
    pub exec_cost: f64,
    pub checkin_cost: f64,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    exec: f64,
    checkin: f64,
    truncated: bool,
}

fn check_inputs(
    mdp: &Mdp,
    schedule: &Schedule,
    policy: &PolicyRecord,
    dist: &[f64],
    horizon: usize,
) -> Result<WeightedIndex<f64>, SimError> {
    let bad = |m: String| Err(SimError::Input(m));
    if policy.layers.len() != schedule.len() {
        return bad(format!("policy has {} layers, schedule {schedule} has {}", policy.layers.len(), schedule.len()));
    }
    if horizon < schedule.len() {
        return bad(format!("horizon {horizon} is shorter than the schedule length {}", schedule.len()));
    }
    if let Some(l) = policy.layers.iter().find(|l| l.len() != mdp.n_states()) {
        return bad(format!("policy layer covers {} states, model has {}", l.len(), mdp.n_states()));
    }
    if dist.len() != mdp.n_states() {
        return bad(format!("distribution has {} entries, model has {} states", dist.len(), mdp.n_states()));
    }
    if dist.iter().any(|p| !p.is_finite() || *p < 0.0) || (dist.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return bad("distribution must be non-negative and sum to 1".into());
    }
    WeightedIndex::new(dist).map_err(|e| SimError::Input(e.to_string()))
}

fn step<R: Rng>(mdp: &Mdp, s: usize, a: usize, rng: &mut R) -> usize {
    let row = mdp.row(s, a);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(t, p) in row {
        acc += p;
        if u < acc {
            return t;
        }
    }
    row.last().map_or(s, |x| x.0)
}

fn run_one(
    mdp: &Mdp,
    schedule: &Schedule,
    policy: &PolicyRecord,
    start: &WeightedIndex<f64>,
    horizon: usize,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Sample {
    let (ge, gc) = (mdp.gamma_exec(), mdp.gamma_checkin());
    let mut s = start.sample(rng);
    let (mut exec, mut checkin) = (0.0, 0.0);
    let (mut de, mut dc) = (1.0, 1.0);
    for i in 0..horizon {
        if mdp.is_goal(s) {
            return Sample { exec, checkin, truncated: false };
        }
        let k = schedule.stride(i);
        let m = MacroAction::from_index(policy.layer(i)[s] as usize, k, mdp.n_actions());
        let s_check = s;
        let mut e = 0.0;
        for &a in m.steps() {
            e += de * mdp.cost(s, a);
            de *= ge;
            s = step(mdp, s, a, rng);
        }
        exec += e;
        checkin += dc;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceStep { checkin: i, state: s_check, macro_action: m.steps().to_vec(), exec_cost: e, checkin_cost: dc });
        }
        dc *= gc;
    }
    Sample { exec, checkin, truncated: !mdp.is_goal(s) }
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn rng_for(seed: u64, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    rng
}

/// Runs `n` independent trajectories and reports empirical discounted costs.
/// Results depend only on `seed` and `n`, not on the worker count.
pub fn rollout(
    mdp: &Mdp,
    schedule: &Schedule,
    policy: &PolicyRecord,
    dist: &[f64],
    n: usize,
    horizon_checkins: usize,
    seed: u64,
) -> Result<RolloutStats, SimError> {
    if n == 0 {
        return Err(SimError::Input("sample count must be positive".into()));
    }
    let start = check_inputs(mdp, schedule, policy, dist, horizon_checkins)?;
    let samples: Vec<Sample> = (0..n)
        .into_par_iter()
        .map(|i| run_one(mdp, schedule, policy, &start, horizon_checkins, &mut rng_for(seed, i), None))
        .collect();
    let exec: Vec<f64> = samples.iter().map(|s| s.exec).collect();
    let checkin: Vec<f64> = samples.iter().map(|s| s.checkin).collect();
    let (mean_exec, stderr_exec) = mean_stderr(&exec);
    let (mean_checkin, stderr_checkin) = mean_stderr(&checkin);
    let truncated = samples.iter().filter(|s| s.truncated).count();
    Ok(RolloutStats {
        n,
        mean_exec,
        mean_checkin,
        stderr_exec,
        stderr_checkin,
        truncated_fraction: truncated as f64 / n as f64,
        seed,
        horizon_checkins,
        rng: RNG_ALGORITHM.into(),
    })
}

/// Replays sample `sample` of a `rollout` call with the same seed, recording each macro step.
pub fn trace(
    mdp: &Mdp,
    schedule: &Schedule,
    policy: &PolicyRecord,
    dist: &[f64],
    horizon_checkins: usize,
    seed: u64,
    sample: usize,
) -> Result<Vec<TraceStep>, SimError> {
    let start = check_inputs(mdp, schedule, policy, dist, horizon_checkins)?;
    let mut out = Vec::new();
    run_one(mdp, schedule, policy, &start, horizon_checkins, &mut rng_for(seed, sample), Some(&mut out));
    Ok(out)
}

/// Upper bound on the (exec, checkin) cost a trajectory can still accrue after
/// `horizon_checkins` check-ins.
pub fn truncation_bound(mdp: &Mdp, schedule: &Schedule, horizon_checkins: usize) -> (f64, f64) {
    let steps: usize = (0..horizon_checkins).map(|i| schedule.stride(i)).sum();
    let max_cost = (0..mdp.n_states())
        .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
        .map(|(s, a)| mdp.cost(s, a).abs())
        .fold(0.0, f64::max);
    let (ge, gc) = (mdp.gamma_exec(), mdp.gamma_checkin());
    let exec = if ge < 1.0 { max_cost * ge.powi(steps as i32) / (1.0 - ge) } else { f64::INFINITY };
    let checkin = if gc < 1.0 { gc.powi(horizon_checkins as i32) / (1.0 - gc) } else { f64::INFINITY };
    (exec, checkin)
}
