//! Base MDP and the composite (macro-action) system derived from it.
//!
//! A composite system for stride `k` has one action per length-`k` sequence of
//! base actions. Macro actions are indexed base-`|A|` little-endian: step `j`
//! contributes `steps[j] * |A|^j` to the index, so index 0 is "action 0
//! repeated". Every argmin over macro actions breaks ties to the lowest index.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::ModelError;

/// Tolerance for row-stochasticity checks.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Default cap on the number of macro actions enumerated for one stride.
pub const DEFAULT_MAX_MACRO_ACTIONS: usize = 200_000;

/// Sparse probability row: `(next state, probability)` sorted by state.
pub type SparseRow = Vec<(usize, f64)>;

/// Finite MDP with expected per-step costs, an absorbing goal set and the two
/// discounts used by the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    rows: Vec<SparseRow>,
    cost: Vec<f64>,
    goal: Vec<bool>,
    gamma_exec: f64,
    gamma_checkin: f64,
}

impl Mdp {
    /// Builds and validates an MDP.
    ///
    /// `rows[s * n_actions + a]` is the successor distribution of `(s, a)`;
    /// entries are merged, sorted and exact zeros dropped. `cost` is laid out
    /// the same way.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rows: Vec<SparseRow>,
        cost: Vec<f64>,
        goal: &[usize],
        gamma_exec: f64,
        gamma_checkin: f64,
    ) -> Result<Self, ModelError> {
        if n_states == 0 || n_actions == 0 {
            return Err(ModelError::Dimension(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        let n_pairs = n_states * n_actions;
        if rows.len() != n_pairs {
            return Err(ModelError::Dimension(format!(
                "expected {n_pairs} transition rows, got {}",
                rows.len()
            )));
        }
        if cost.len() != n_pairs {
            return Err(ModelError::Dimension(format!(
                "expected {n_pairs} costs, got {}",
                cost.len()
            )));
        }
        check_discount("gamma_exec", gamma_exec)?;
        check_discount("gamma_checkin", gamma_checkin)?;

        let mut goal_mask = vec![false; n_states];
        for &g in goal {
            if g >= n_states {
                return Err(ModelError::StateOutOfRange { state: g, n_states });
            }
            goal_mask[g] = true;
        }

        let mut clean_rows = Vec::with_capacity(n_pairs);
        for (idx, row) in rows.into_iter().enumerate() {
            let (s, a) = (idx / n_actions, idx % n_actions);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            let mut sorted = row;
            sorted.sort_by_key(|&(t, _)| t);
            for (t, p) in sorted {
                if t >= n_states {
                    return Err(ModelError::StateOutOfRange { state: t, n_states });
                }
                if !p.is_finite() || p < 0.0 {
                    return Err(ModelError::InvalidProbability { state: s, action: a, prob: p });
                }
                match merged.last_mut() {
                    Some(last) if last.0 == t => last.1 += p,
                    _ => merged.push((t, p)),
                }
            }
            merged.retain(|&(_, p)| p != 0.0);
            let sum: f64 = merged.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ModelError::RowNotStochastic { state: s, action: a, sum });
            }
            if !cost[idx].is_finite() {
                return Err(ModelError::NonFiniteCost { state: s, action: a });
            }
            if goal_mask[s] && (cost[idx] != 0.0 || merged.as_slice() != [(s, 1.0)]) {
                return Err(ModelError::GoalNotAbsorbing { state: s, action: a });
            }
            clean_rows.push(merged);
        }

        Ok(Self {
            n_states,
            n_actions,
            rows: clean_rows,
            cost,
            goal: goal_mask,
            gamma_exec,
            gamma_checkin,
        })
    }

    /// Builds an MDP from `(s, a, s', p)` and `(s, a, c)` triples. Missing cost
    /// entries default to 0; every `(s, a)` row must be present.
    pub fn from_triples(
        n_states: usize,
        n_actions: usize,
        transitions: &[(usize, usize, usize, f64)],
        costs: &[(usize, usize, f64)],
        goal: &[usize],
        gamma_exec: f64,
        gamma_checkin: f64,
    ) -> Result<Self, ModelError> {
        let n_pairs = n_states * n_actions;
        let mut rows = vec![Vec::new(); n_pairs];
        for &(s, a, t, p) in transitions {
            check_pair(s, a, n_states, n_actions)?;
            rows[s * n_actions + a].push((t, p));
        }
        let mut cost = vec![0.0; n_pairs];
        for &(s, a, c) in costs {
            check_pair(s, a, n_states, n_actions)?;
            cost[s * n_actions + a] = c;
        }
        Self::new(n_states, n_actions, rows, cost, goal, gamma_exec, gamma_checkin)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.rows[s * self.n_actions + a]
    }

    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.cost[s * self.n_actions + a]
    }

    pub fn is_goal(&self, s: usize) -> bool {
        self.goal[s]
    }

    pub fn goal_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.goal.iter().enumerate().filter(|(_, &g)| g).map(|(s, _)| s)
    }

    pub fn gamma_exec(&self) -> f64 {
        self.gamma_exec
    }

    pub fn gamma_checkin(&self) -> f64 {
        self.gamma_checkin
    }

    /// Largest absolute per-step cost, at least 1. Solver tolerances scale with it.
    pub fn cost_scale(&self) -> f64 {
        self.cost.iter().fold(1.0_f64, |m, c| m.max(c.abs()))
    }

    /// Copy of this MDP with different discounts.
    pub fn with_discounts(&self, gamma_exec: f64, gamma_checkin: f64) -> Result<Self, ModelError> {
        check_discount("gamma_exec", gamma_exec)?;
        check_discount("gamma_checkin", gamma_checkin)?;
        Ok(Self { gamma_exec, gamma_checkin, ..self.clone() })
    }

    /// Uniform distribution over all states.
    pub fn uniform_distribution(&self) -> Vec<f64> {
        vec![1.0 / self.n_states as f64; self.n_states]
    }

    pub(crate) fn check_state(&self, s: usize) -> Result<(), ModelError> {
        if s >= self.n_states {
            return Err(ModelError::StateOutOfRange { state: s, n_states: self.n_states });
        }
        Ok(())
    }
}

fn check_discount(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(ModelError::Discount { name, value })
    }
}

fn check_pair(s: usize, a: usize, n_states: usize, n_actions: usize) -> Result<(), ModelError> {
    if s >= n_states {
        return Err(ModelError::StateOutOfRange { state: s, n_states });
    }
    if a >= n_actions {
        return Err(ModelError::ActionOutOfRange { action: a, n_actions });
    }
    Ok(())
}

/// An ordered sequence of base actions executed without feedback.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MacroAction {
    steps: Vec<usize>,
}

impl MacroAction {
    pub fn new(steps: Vec<usize>, n_actions: usize) -> Result<Self, ModelError> {
        if steps.is_empty() {
            return Err(ModelError::EmptyMacro);
        }
        if let Some(&a) = steps.iter().find(|&&a| a >= n_actions) {
            return Err(ModelError::ActionOutOfRange { action: a, n_actions });
        }
        Ok(Self { steps })
    }

    /// Decodes a base-`|A|` little-endian index into a macro of `len` steps.
    pub fn from_index(index: usize, len: usize, n_actions: usize) -> Self {
        let mut rest = index;
        let steps = (0..len)
            .map(|_| {
                let a = rest % n_actions;
                rest /= n_actions;
                a
            })
            .collect();
        Self { steps }
    }

    pub fn index(&self, n_actions: usize) -> usize {
        self.steps.iter().rev().fold(0, |acc, &a| acc * n_actions + a)
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Pushes a sparse distribution through one base action.
fn step_distribution(mdp: &Mdp, dist: &[(usize, f64)], a: usize, scratch: &mut [f64], touched: &mut Vec<usize>) -> SparseRow {
    for &(s, p) in dist {
        for &(t, q) in mdp.row(s, a) {
            if scratch[t] == 0.0 {
                touched.push(t);
            }
            scratch[t] += p * q;
        }
    }
    touched.sort_unstable();
    touched.dedup();
    let mut out = Vec::with_capacity(touched.len());
    for &t in touched.iter() {
        let p = scratch[t];
        scratch[t] = 0.0;
        if p != 0.0 {
            out.push((t, p));
        }
    }
    touched.clear();
    out
}

fn expected_step_cost(mdp: &Mdp, dist: &[(usize, f64)], a: usize) -> f64 {
    dist.iter().map(|&(s, p)| p * mdp.cost(s, a)).sum()
}

fn validate_macro(mdp: &Mdp, a: &MacroAction) -> Result<(), ModelError> {
    if a.is_empty() {
        return Err(ModelError::EmptyMacro);
    }
    if let Some(&bad) = a.steps().iter().find(|&&x| x >= mdp.n_actions()) {
        return Err(ModelError::ActionOutOfRange { action: bad, n_actions: mdp.n_actions() });
    }
    Ok(())
}

/// Distribution of the state reached after executing `a` from each start state.
pub fn compose_transition(mdp: &Mdp, a: &MacroAction) -> Result<Vec<SparseRow>, ModelError> {
    validate_macro(mdp, a)?;
    let mut scratch = vec![0.0; mdp.n_states()];
    let mut touched = Vec::new();
    Ok((0..mdp.n_states())
        .map(|s| {
            let mut dist = vec![(s, 1.0)];
            for &step in a.steps() {
                dist = step_distribution(mdp, &dist, step, &mut scratch, &mut touched);
            }
            dist
        })
        .collect())
}

/// Expected within-stride cost `sum_j gamma_exec^j E[c(s_j, a_j)]` from `s`.
pub fn macro_exec_cost(mdp: &Mdp, s: usize, a: &MacroAction) -> Result<f64, ModelError> {
    validate_macro(mdp, a)?;
    mdp.check_state(s)?;
    let mut scratch = vec![0.0; mdp.n_states()];
    let mut touched = Vec::new();
    let mut dist = vec![(s, 1.0)];
    let mut total = 0.0;
    let mut discount = 1.0;
    for (j, &step) in a.steps().iter().enumerate() {
        total += discount * expected_step_cost(mdp, &dist, step);
        if j + 1 < a.len() {
            dist = step_distribution(mdp, &dist, step, &mut scratch, &mut touched);
            discount *= mdp.gamma_exec();
        }
    }
    Ok(total)
}

/// One check-in is charged per macro step started outside the goal.
pub fn macro_checkin_cost(mdp: &Mdp, s: usize) -> Result<f64, ModelError> {
    mdp.check_state(s)?;
    Ok(if mdp.is_goal(s) { 0.0 } else { 1.0 })
}

/// Limits applied when enumerating macro actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeLimits {
    pub stride_bound: usize,
    pub max_macro_actions: usize,
}

impl CompositeLimits {
    pub fn new(stride_bound: usize) -> Self {
        Self { stride_bound, max_macro_actions: DEFAULT_MAX_MACRO_ACTIONS }
    }
}

/// Composite system for one stride: all `|A|^k` macro actions with their
/// transition rows (CSR layout) and discounted execution costs.
#[derive(Debug, Clone)]
pub struct CompositeMdp {
    stride: usize,
    n_states: usize,
    n_actions: usize,
    n_macros: usize,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<f64>,
    exec_cost: Vec<f64>,
    checkin_cost: Vec<f64>,
    goal: Vec<bool>,
    gamma_exec_stride: f64,
    gamma_checkin: f64,
    cost_scale: f64,
}

impl CompositeMdp {
    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_macros(&self) -> usize {
        self.n_macros
    }

    pub fn n_base_actions(&self) -> usize {
        self.n_actions
    }

    pub fn macro_action(&self, index: usize) -> MacroAction {
        MacroAction::from_index(index, self.stride, self.n_actions)
    }

    /// Sparse successor row of `(s, m)`.
    pub fn row(&self, s: usize, m: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let i = s * self.n_macros + m;
        let range = self.offsets[i]..self.offsets[i + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.probs[range])
            .map(|(&t, &p)| (t as usize, p))
    }

    /// Dense copy of the successor row of `(s, m)`.
    pub fn row_dense(&self, s: usize, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        for (t, p) in self.row(s, m) {
            out[t] = p;
        }
        out
    }

    /// `sum_t T(t | s, m) v(t)`.
    #[inline]
    pub fn expected(&self, s: usize, m: usize, v: &[f64]) -> f64 {
        let i = s * self.n_macros + m;
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        let mut acc = 0.0;
        for k in lo..hi {
            acc += self.probs[k] * v[self.targets[k] as usize];
        }
        acc
    }

    pub fn exec_cost(&self, s: usize, m: usize) -> f64 {
        self.exec_cost[s * self.n_macros + m]
    }

    pub fn checkin_cost(&self, s: usize) -> f64 {
        self.checkin_cost[s]
    }

    pub fn is_goal(&self, s: usize) -> bool {
        self.goal[s]
    }

    /// Between-stride execution discount `gamma_exec^k`.
    pub fn gamma_exec_stride(&self) -> f64 {
        self.gamma_exec_stride
    }

    /// Discount applied per check-in event.
    pub fn gamma_checkin(&self) -> f64 {
        self.gamma_checkin
    }

    /// Largest absolute base cost (at least 1).
    pub fn cost_scale(&self) -> f64 {
        self.cost_scale
    }

    /// Largest absolute macro execution cost.
    pub fn max_abs_exec_cost(&self) -> f64 {
        self.exec_cost.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }
}

/// Enumerates all `|A|^k` macro actions of stride `k`.
pub fn build_composite(mdp: &Mdp, k: usize, limits: &CompositeLimits) -> Result<CompositeMdp, ModelError> {
    if k == 0 || k > limits.stride_bound {
        return Err(ModelError::StrideOutOfBounds { stride: k, bound: limits.stride_bound });
    }
    let count = (mdp.n_actions() as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if count > limits.max_macro_actions as u128 {
        return Err(ModelError::Capacity { stride: k, count, cap: limits.max_macro_actions });
    }
    let n_macros = count as usize;
    let n = mdp.n_states();

    // Per start state: rows and costs for every macro, in index order.
    let per_state: Vec<(Vec<SparseRow>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|s| enumerate_from(mdp, s, k, n_macros))
        .collect();

    let mut offsets = Vec::with_capacity(n * n_macros + 1);
    let mut targets = Vec::new();
    let mut probs = Vec::new();
    let mut exec_cost = Vec::with_capacity(n * n_macros);
    offsets.push(0);
    for (rows, costs) in per_state {
        for (row, c) in rows.into_iter().zip(costs) {
            for (t, p) in row {
                targets.push(t as u32);
                probs.push(p);
            }
            offsets.push(targets.len());
            exec_cost.push(c);
        }
    }
    let checkin_cost = (0..n).map(|s| if mdp.is_goal(s) { 0.0 } else { 1.0 }).collect();

    Ok(CompositeMdp {
        stride: k,
        n_states: n,
        n_actions: mdp.n_actions(),
        n_macros,
        offsets,
        targets,
        probs,
        exec_cost,
        checkin_cost,
        goal: (0..n).map(|s| mdp.is_goal(s)).collect(),
        gamma_exec_stride: mdp.gamma_exec().powi(k as i32),
        gamma_checkin: mdp.gamma_checkin(),
        cost_scale: mdp.cost_scale(),
    })
}

/// Depth-first walk of the macro prefix tree rooted at `s`, sharing the
/// propagated distribution of every common prefix.
fn enumerate_from(mdp: &Mdp, s: usize, k: usize, n_macros: usize) -> (Vec<SparseRow>, Vec<f64>) {
    struct Walk<'a> {
        mdp: &'a Mdp,
        k: usize,
        n_actions: usize,
        scratch: Vec<f64>,
        touched: Vec<usize>,
        rows: Vec<SparseRow>,
        costs: Vec<f64>,
    }

    impl Walk<'_> {
        fn visit(&mut self, depth: usize, dist: &[(usize, f64)], cost: f64, discount: f64, index: usize, place: usize) {
            for a in 0..self.n_actions {
                let c = cost + discount * expected_step_cost(self.mdp, dist, a);
                let next = step_distribution(self.mdp, dist, a, &mut self.scratch, &mut self.touched);
                let idx = index + a * place;
                if depth + 1 == self.k {
                    self.rows[idx] = next;
                    self.costs[idx] = c;
                } else {
                    let g = discount * self.mdp.gamma_exec();
                    self.visit(depth + 1, &next, c, g, idx, place * self.n_actions);
                }
            }
        }
    }

    let mut walk = Walk {
        mdp,
        k,
        n_actions: mdp.n_actions(),
        scratch: vec![0.0; mdp.n_states()],
        touched: Vec::new(),
        rows: vec![Vec::new(); n_macros],
        costs: vec![0.0; n_macros],
    };
    walk.visit(0, &[(s, 1.0)], 0.0, 1.0, 0, 1);
    (walk.rows, walk.costs)
}

/// Per-stride composite systems for one MDP, built on first use and shared.
#[derive(Debug)]
pub struct CompositeCache {
    mdp: Arc<Mdp>,
    limits: CompositeLimits,
    built: Mutex<HashMap<usize, Arc<CompositeMdp>>>,
}

impl CompositeCache {
    pub fn new(mdp: Arc<Mdp>, limits: CompositeLimits) -> Self {
        Self { mdp, limits, built: Mutex::new(HashMap::new()) }
    }

    pub fn mdp(&self) -> &Arc<Mdp> {
        &self.mdp
    }

    pub fn limits(&self) -> CompositeLimits {
        self.limits
    }

    pub fn get(&self, k: usize) -> Result<Arc<CompositeMdp>, ModelError> {
        if let Some(c) = self.built.lock().expect("composite cache poisoned").get(&k) {
            return Ok(Arc::clone(c));
        }
        let comp = Arc::new(build_composite(&self.mdp, k, &self.limits)?);
        let mut built = self.built.lock().expect("composite cache poisoned");
        Ok(Arc::clone(built.entry(k).or_insert(comp)))
    }
}
