//! Value iteration for recurrent tails and single-backup schedule extension.
//!
//! Execution cost is discounted by `gamma_exec^k` between strides (the
//! within-stride discount lives in the macro cost). Check-in cost is
//! discounted by `gamma_checkin` once per check-in event. All backups are
//! Jacobi-style: every state's new value reads only the previous vector, so a
//! parallel sweep gives bit-identical results to a sequential one.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::model::CompositeMdp;
use crate::schedule::Schedule;

/// Which macro cost a backup minimizes or evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Exec,
    Checkin,
}

impl Objective {
    pub fn stage_cost(self, comp: &CompositeMdp, s: usize, m: usize) -> f64 {
        match self {
            Objective::Exec => comp.exec_cost(s, m),
            Objective::Checkin => comp.checkin_cost(s),
        }
    }

    pub fn discount(self, comp: &CompositeMdp) -> f64 {
        match self {
            Objective::Exec => comp.gamma_exec_stride(),
            Objective::Checkin => comp.gamma_checkin(),
        }
    }

    /// Absolute convergence threshold for this objective.
    fn tolerance(self, comp: &CompositeMdp, eps: f64) -> f64 {
        match self {
            Objective::Exec => eps * comp.cost_scale(),
            Objective::Checkin => eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Convergence threshold, relative to the largest absolute base cost.
    pub eps: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { eps: 1e-9, max_iters: 100_000 }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<(), SolverError> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(SolverError::Options(format!("eps must be positive, got {}", self.eps)));
        }
        if self.max_iters == 0 {
            return Err(SolverError::Options("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Per-state execution and check-in values of one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuePair {
    pub exec: Vec<f64>,
    pub checkin: Vec<f64>,
}

impl ValuePair {
    pub fn zeros(n: usize) -> Self {
        Self { exec: vec![0.0; n], checkin: vec![0.0; n] }
    }
}

/// Which scalarization a policy optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "alpha", rename_all = "lowercase")]
pub enum PolicyKind {
    Exec,
    Checkin,
    Alpha(f64),
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Exec => "exec",
            PolicyKind::Checkin => "checkin",
            PolicyKind::Alpha(_) => "alpha",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            PolicyKind::Alpha(a) => Some(*a),
            _ => None,
        }
    }

    /// Parses `exec`, `checkin` or `alpha:<value>`.
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "exec" => Some(Self::Exec),
            "checkin" => Some(Self::Checkin),
            _ => {
                let a: f64 = text.strip_prefix("alpha:")?.parse().ok()?;
                (a > 0.0 && a < 1.0).then_some(Self::Alpha(a))
            }
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyKind::Alpha(a) => write!(f, "alpha:{a}"),
            other => f.write_str(other.label()),
        }
    }
}

/// One layer: macro-action index chosen at each state.
pub type Layer = Arc<[u32]>;

/// Layered policy for one schedule. Layer `i` is used at check-in interval
/// `i`; the last layer is the stationary tail policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRecord {
    pub kind: PolicyKind,
    pub layers: Vec<Layer>,
    pub values: ValuePair,
}

impl PolicyRecord {
    /// Layer used at check-in interval `i`.
    pub fn layer(&self, i: usize) -> &Layer {
        &self.layers[i.min(self.layers.len() - 1)]
    }
}

/// A schedule with its known policies: exec-optimal, checkin-optimal, then
/// one per configured alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvedSchedule {
    pub schedule: Schedule,
    pub policies: Vec<PolicyRecord>,
}

impl SolvedSchedule {
    pub fn policy(&self, kind: PolicyKind) -> Option<&PolicyRecord> {
        self.policies.iter().find(|p| p.kind == kind)
    }
}

/// Greedy policy and value vector from value iteration on a recurrent tail.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSolution {
    pub policy: Vec<u32>,
    pub values: Vec<f64>,
}

fn check_len(expected: usize, got: usize) -> Result<(), SolverError> {
    if expected == got {
        Ok(())
    } else {
        Err(SolverError::Dimension { expected, got })
    }
}

fn check_alpha(alpha: f64) -> Result<(), SolverError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(SolverError::Alpha(alpha))
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Minimizing backup at one state; ties go to the lowest macro index.
#[inline]
fn best_action(comp: &CompositeMdp, s: usize, v: &[f64], objective: Objective, discount: f64) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for m in 0..comp.n_macros() {
        let q = objective.stage_cost(comp, s, m) + discount * comp.expected(s, m, v);
        if q < best.1 {
            best = (m as u32, q);
        }
    }
    best
}

fn backup_min(comp: &CompositeMdp, v: &[f64], objective: Objective) -> (Vec<u32>, Vec<f64>) {
    let discount = objective.discount(comp);
    let pairs: Vec<(u32, f64)> = (0..comp.n_states())
        .into_par_iter()
        .map(|s| if comp.is_goal(s) { (0, 0.0) } else { best_action(comp, s, v, objective, discount) })
        .collect();
    pairs.into_iter().unzip()
}

fn backup_fixed(comp: &CompositeMdp, v: &[f64], layer: &[u32], objective: Objective) -> Vec<f64> {
    let discount = objective.discount(comp);
    (0..comp.n_states())
        .into_par_iter()
        .map(|s| {
            if comp.is_goal(s) {
                0.0
            } else {
                let m = layer[s] as usize;
                objective.stage_cost(comp, s, m) + discount * comp.expected(s, m, v)
            }
        })
        .collect()
}

fn check_layer(comp: &CompositeMdp, layer: &[u32]) -> Result<(), SolverError> {
    check_len(comp.n_states(), layer.len())?;
    if let Some(&m) = layer.iter().find(|&&m| m as usize >= comp.n_macros()) {
        return Err(SolverError::MacroOutOfRange { index: m, n_macros: comp.n_macros() });
    }
    Ok(())
}

/// Value iteration on the recurrent tail of `comp` for one objective.
pub fn solve_tail(comp: &CompositeMdp, objective: Objective, opts: &SolveOptions) -> Result<TailSolution, SolverError> {
    opts.validate()?;
    let tol = objective.tolerance(comp, opts.eps);
    let mut values = vec![0.0; comp.n_states()];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let (policy, next) = backup_min(comp, &values, objective);
        residual = sup_diff(&next, &values);
        values = next;
        if residual < tol {
            return Ok(TailSolution { policy, values });
        }
    }
    Err(SolverError::NotConverged { iterations: opts.max_iters, residual })
}

/// Iterative evaluation of a stationary tail policy.
pub fn policy_eval_tail(
    comp: &CompositeMdp,
    policy: &[u32],
    objective: Objective,
    opts: &SolveOptions,
) -> Result<Vec<f64>, SolverError> {
    opts.validate()?;
    check_layer(comp, policy)?;
    let tol = objective.tolerance(comp, opts.eps);
    let mut values = vec![0.0; comp.n_states()];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let next = backup_fixed(comp, &values, policy, objective);
        residual = sup_diff(&next, &values);
        values = next;
        if residual < tol {
            return Ok(values);
        }
    }
    Err(SolverError::NotConverged { iterations: opts.max_iters, residual })
}

/// One minimizing backup of `v_suffix` through stride `comp.stride()`.
pub fn extend_value(v_suffix: &[f64], comp: &CompositeMdp, objective: Objective) -> Result<(Vec<u32>, Vec<f64>), SolverError> {
    check_len(comp.n_states(), v_suffix.len())?;
    Ok(backup_min(comp, v_suffix, objective))
}

/// One backup of `v_suffix` under a fixed first layer.
pub fn extend_policy_eval(
    v_suffix: &[f64],
    comp: &CompositeMdp,
    layer: &[u32],
    objective: Objective,
) -> Result<Vec<f64>, SolverError> {
    check_len(comp.n_states(), v_suffix.len())?;
    check_layer(comp, layer)?;
    Ok(backup_fixed(comp, v_suffix, layer, objective))
}

/// Layer minimizing the alpha-blend of both backups, continuing with the
/// suffix's alpha-policy values; both components are then advanced with the
/// chosen layer.
pub fn extend_alpha(suffix: &ValuePair, comp: &CompositeMdp, alpha: f64) -> Result<(Vec<u32>, ValuePair), SolverError> {
    check_alpha(alpha)?;
    check_len(comp.n_states(), suffix.exec.len())?;
    check_len(comp.n_states(), suffix.checkin.len())?;
    let ge = comp.gamma_exec_stride();
    let gc = comp.gamma_checkin();
    let rows: Vec<(u32, f64, f64)> = (0..comp.n_states())
        .into_par_iter()
        .map(|s| {
            if comp.is_goal(s) {
                return (0, 0.0, 0.0);
            }
            let ck = comp.checkin_cost(s);
            let mut best = (0u32, f64::INFINITY, 0.0, 0.0);
            for m in 0..comp.n_macros() {
                let e = comp.exec_cost(s, m) + ge * comp.expected(s, m, &suffix.exec);
                let c = ck + gc * comp.expected(s, m, &suffix.checkin);
                let blended = alpha * e + (1.0 - alpha) * c;
                if blended < best.1 {
                    best = (m as u32, blended, e, c);
                }
            }
            (best.0, best.2, best.3)
        })
        .collect();
    let mut layer = Vec::with_capacity(rows.len());
    let mut pair = ValuePair { exec: Vec::with_capacity(rows.len()), checkin: Vec::with_capacity(rows.len()) };
    for (m, e, c) in rows {
        layer.push(m);
        pair.exec.push(e);
        pair.checkin.push(c);
    }
    Ok((layer, pair))
}

/// Fixed point of the alpha backup on a recurrent tail.
///
/// Exact when `gamma_checkin == gamma_exec^k` (the blend is then an ordinary
/// discounted cost); a heuristic otherwise.
pub fn solve_tail_alpha(comp: &CompositeMdp, alpha: f64, opts: &SolveOptions) -> Result<(Vec<u32>, ValuePair), SolverError> {
    opts.validate()?;
    check_alpha(alpha)?;
    let tol_exec = Objective::Exec.tolerance(comp, opts.eps);
    let tol_ck = Objective::Checkin.tolerance(comp, opts.eps);
    let mut pair = ValuePair::zeros(comp.n_states());
    let mut previous: Vec<u32> = Vec::new();
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let (layer, next) = extend_alpha(&pair, comp, alpha)?;
        let de = sup_diff(&next.exec, &pair.exec);
        let dc = sup_diff(&next.checkin, &pair.checkin);
        residual = (de / tol_exec).max(dc / tol_ck);
        pair = next;
        let settled = layer == previous;
        previous = layer;
        if residual < 1.0 && settled {
            return Ok((previous, pair));
        }
    }
    let (last, _) = extend_alpha(&pair, comp, alpha)?;
    Err(SolverError::AlphaCycle { alpha, iterations: opts.max_iters, residual, previous, last })
}

/// Known policies of a recurrent tail: exec-optimal and checkin-optimal, each
/// cross-evaluated under the other objective, then one per alpha.
pub fn solve_base(comp: &CompositeMdp, alphas: &[f64], opts: &SolveOptions) -> Result<Vec<PolicyRecord>, SolverError> {
    let ex = solve_tail(comp, Objective::Exec, opts)?;
    let ex_ck = policy_eval_tail(comp, &ex.policy, Objective::Checkin, opts)?;
    let ck = solve_tail(comp, Objective::Checkin, opts)?;
    let ck_ex = policy_eval_tail(comp, &ck.policy, Objective::Exec, opts)?;
    let mut out = vec![
        PolicyRecord {
            kind: PolicyKind::Exec,
            layers: vec![ex.policy.into()],
            values: ValuePair { exec: ex.values, checkin: ex_ck },
        },
        PolicyRecord {
            kind: PolicyKind::Checkin,
            layers: vec![ck.policy.into()],
            values: ValuePair { exec: ck_ex, checkin: ck.values },
        },
    ];
    for &alpha in alphas {
        let (layer, values) = solve_tail_alpha(comp, alpha, opts)?;
        out.push(PolicyRecord { kind: PolicyKind::Alpha(alpha), layers: vec![layer.into()], values });
    }
    Ok(out)
}

/// Extends every known policy of a suffix schedule by one stride.
pub fn extend_policies(suffix: &[PolicyRecord], comp: &CompositeMdp) -> Result<Vec<PolicyRecord>, SolverError> {
    suffix
        .iter()
        .map(|rec| {
            let (layer, values) = match rec.kind {
                PolicyKind::Exec => {
                    let (layer, exec) = extend_value(&rec.values.exec, comp, Objective::Exec)?;
                    let checkin = extend_policy_eval(&rec.values.checkin, comp, &layer, Objective::Checkin)?;
                    (layer, ValuePair { exec, checkin })
                }
                PolicyKind::Checkin => {
                    let (layer, checkin) = extend_value(&rec.values.checkin, comp, Objective::Checkin)?;
                    let exec = extend_policy_eval(&rec.values.exec, comp, &layer, Objective::Exec)?;
                    (layer, ValuePair { exec, checkin })
                }
                PolicyKind::Alpha(alpha) => extend_alpha(&rec.values, comp, alpha)?,
            };
            let mut layers = Vec::with_capacity(rec.layers.len() + 1);
            layers.push(Layer::from(layer));
            layers.extend(rec.layers.iter().cloned());
            Ok(PolicyRecord { kind: rec.kind, layers, values })
        })
        .collect()
}

/// Solves one schedule directly by backward induction from its tail.
pub fn solve_schedule(
    schedule: &Schedule,
    composite: impl Fn(usize) -> Result<Arc<CompositeMdp>, crate::error::Error>,
    alphas: &[f64],
    opts: &SolveOptions,
) -> Result<SolvedSchedule, crate::error::Error> {
    let tail = composite(schedule.tail())?;
    let mut policies = solve_base(&tail, alphas, opts)?;
    for &k in schedule.prefix().iter().rev() {
        let comp = composite(k)?;
        policies = extend_policies(&policies, &comp)?;
    }
    Ok(SolvedSchedule { schedule: schedule.clone(), policies })
}
