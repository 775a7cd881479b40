//! Staged schedule search: solve every recurrent tail, prepend strides one
//! stage at a time with single backups, filter the pooled candidates, and
//! report the schedules whose optimistic front survives at the initial
//! distribution.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CompositeCache, CompositeLimits, Mdp, DEFAULT_MAX_MACRO_ACTIONS};
use crate::pareto::{self, CostPoint, DistFront, FilterConfig, ScheduleFront};
use crate::schedule::Schedule;
use crate::solver::{self, PolicyKind, SolveOptions, SolvedSchedule};

/// How a distribution over states is specified in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionSpec {
    Initial,
    Uniform,
    Explicit(Vec<f64>),
}

impl DistributionSpec {
    pub fn resolve(&self, n_states: usize, initial: &[f64]) -> Vec<f64> {
        match self {
            DistributionSpec::Initial => initial.to_vec(),
            DistributionSpec::Uniform => vec![1.0 / n_states as f64; n_states],
            DistributionSpec::Explicit(v) => v.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            DistributionSpec::Initial => "initial".into(),
            DistributionSpec::Uniform => "uniform".into(),
            DistributionSpec::Explicit(_) => "explicit".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strides: Vec<usize>,
    pub max_length: usize,
    pub initial_distribution: Vec<f64>,
    /// `None` disables filtering.
    pub filter: Option<FilterConfig>,
    pub alphas: Vec<f64>,
    pub solve: SolveOptions,
    pub max_macro_actions: usize,
}

impl SearchConfig {
    pub fn new(strides: Vec<usize>, max_length: usize, initial_distribution: Vec<f64>) -> Self {
        Self {
            strides,
            max_length,
            initial_distribution,
            filter: None,
            alphas: Vec::new(),
            solve: SolveOptions::default(),
            max_macro_actions: DEFAULT_MAX_MACRO_ACTIONS,
        }
    }

    pub fn with_filter(mut self, distributions: Vec<Vec<f64>>, margin: f64) -> Self {
        self.filter = Some(FilterConfig { distributions, margin });
        self
    }

    pub fn with_alphas(mut self, alphas: Vec<f64>) -> Self {
        self.alphas = alphas;
        self
    }

    /// Sorted, deduplicated strides.
    pub fn stride_set(&self) -> Vec<usize> {
        let mut s = self.strides.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn validate(&self, n_states: usize) -> Result<()> {
        if self.strides.is_empty() {
            return Err(Error::Config("at least one stride is required".into()));
        }
        if self.strides.contains(&0) {
            return Err(Error::Config("strides must be at least 1".into()));
        }
        if self.max_length == 0 {
            return Err(Error::Config("schedule length must be at least 1".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Config(format!("alpha {a} must lie strictly between 0 and 1")));
        }
        let bad = |e: crate::error::ParetoError| Error::Config(e.to_string());
        pareto::check_distribution(0, &self.initial_distribution, n_states).map_err(bad)?;
        if let Some(f) = &self.filter {
            f.validate(n_states).map_err(bad)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: usize,
    /// Extensions attempted (parents times strides).
    pub generated_raw: usize,
    /// New canonical schedules after deduplication.
    pub generated: usize,
    /// Schedules from this stage still alive after its filtering pass.
    pub stage_survivors: usize,
    /// Schedules removed from the global pool during this stage.
    pub dropped: usize,
    pub pool_size: usize,
}

/// A surviving schedule evaluated at the initial distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub schedule: Schedule,
    pub kinds: Vec<PolicyKind>,
    pub initial: DistFront,
    /// Fronts at the filter distributions, when filtering ran.
    pub filter_fronts: Option<Vec<DistFront>>,
    pub on_final_front: bool,
}

impl Candidate {
    pub fn point(&self, kind: PolicyKind) -> Option<CostPoint> {
        self.kinds.iter().position(|k| *k == kind).map(|i| self.initial.points[i])
    }

    pub fn realizable(&self) -> Vec<CostPoint> {
        self.initial.realizable_points().collect()
    }
}

/// Wall-clock measurements, kept apart from the deterministic report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub base_seconds: f64,
    pub stage_seconds: Vec<f64>,
    pub final_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub strides: Vec<usize>,
    pub max_length: usize,
    pub alphas: Vec<f64>,
    pub filtering: bool,
    pub margin: Option<f64>,
    pub filter_distributions: usize,
    pub stages: Vec<StageStats>,
    pub total_generated: usize,
    pub total_dropped: usize,
    pub filtered_fraction: f64,
    /// Surviving schedules in canonical text order.
    pub candidates: Vec<Candidate>,
    #[serde(skip)]
    pub telemetry: Telemetry,
}

impl SearchReport {
    pub fn final_front(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.on_final_front)
    }

    pub fn candidate(&self, schedule: &Schedule) -> Option<&Candidate> {
        self.candidates.iter().find(|c| &c.schedule == schedule)
    }

    pub fn on_front(&self, schedule: &Schedule) -> bool {
        self.candidate(schedule).is_some_and(|c| c.on_final_front)
    }
}

struct Entry {
    schedule: Schedule,
    kinds: Vec<PolicyKind>,
    initial: DistFront,
    filter_front: Option<ScheduleFront>,
}

fn make_entry(solved: &SolvedSchedule, cfg: &SearchConfig) -> Result<Entry> {
    let init = pareto::schedule_front(solved, std::slice::from_ref(&cfg.initial_distribution))?;
    let filter_front = match &cfg.filter {
        Some(f) => Some(pareto::schedule_front(solved, &f.distributions)?),
        None => None,
    };
    Ok(Entry {
        schedule: solved.schedule.clone(),
        kinds: init.kinds,
        initial: init.fronts.into_iter().next().expect("one distribution"),
        filter_front,
    })
}

/// Runs the staged search.
pub fn pareto_front_schedules(mdp: &Arc<Mdp>, cfg: &SearchConfig) -> Result<SearchReport> {
    cfg.validate(mdp.n_states())?;
    let started = Instant::now();
    let strides = cfg.stride_set();
    let bound = *strides.last().expect("validated");
    let cache = CompositeCache::new(
        Arc::clone(mdp),
        CompositeLimits { stride_bound: bound, max_macro_actions: cfg.max_macro_actions },
    );
    let mut comps = Vec::with_capacity(strides.len());
    for &k in &strides {
        comps.push(cache.get(k)?);
    }
    let mut telemetry = Telemetry::default();

    let base: Vec<SolvedSchedule> = comps
        .par_iter()
        .zip(&strides)
        .map(|(comp, &k)| {
            let policies = solver::solve_base(comp, &cfg.alphas, &cfg.solve)?;
            Ok(SolvedSchedule { schedule: Schedule::recurrent(k)?, policies })
        })
        .collect::<Result<_>>()?;
    let mut pool: Vec<Entry> = base.iter().map(|s| make_entry(s, cfg)).collect::<Result<_>>()?;
    let mut seen: HashSet<Schedule> = base.iter().map(|s| s.schedule.clone()).collect();
    let mut frontier = base;
    let mut stages = vec![StageStats {
        stage: 0,
        generated_raw: strides.len(),
        generated: strides.len(),
        stage_survivors: strides.len(),
        dropped: 0,
        pool_size: pool.len(),
    }];
    let mut total_generated = strides.len();
    let mut total_dropped = 0;
    telemetry.base_seconds = started.elapsed().as_secs_f64();

    for stage in 1..cfg.max_length {
        let t = Instant::now();
        frontier.sort_by(|a, b| a.schedule.cmp(&b.schedule));
        let mut jobs: Vec<(usize, usize, Schedule)> = Vec::new();
        let mut raw = 0;
        for (pi, parent) in frontier.iter().enumerate() {
            for (ki, &k) in strides.iter().enumerate() {
                raw += 1;
                let child = parent.schedule.prepend(k, bound)?;
                if seen.insert(child.clone()) {
                    jobs.push((pi, ki, child));
                }
            }
        }
        let next: Vec<SolvedSchedule> = jobs
            .into_par_iter()
            .map(|(pi, ki, schedule)| {
                let policies = solver::extend_policies(&frontier[pi].policies, &comps[ki])?;
                Ok(SolvedSchedule { schedule, policies })
            })
            .collect::<Result<_>>()?;
        // Parent value vectors are no longer needed.
        drop(std::mem::take(&mut frontier));
        let generated = next.len();
        total_generated += generated;
        let new_entries: Vec<Entry> = next.par_iter().map(|s| make_entry(s, cfg)).collect::<Result<_>>()?;
        pool.extend(new_entries);
        frontier = next;

        let mut dropped = 0;
        if let Some(f) = &cfg.filter {
            let fronts: Vec<ScheduleFront> =
                pool.iter().map(|e| e.filter_front.clone().expect("filter fronts are built when filtering")).collect();
            let outcome = pareto::filter(&fronts, f.margin)?;
            dropped = outcome.dropped;
            let mut keep = outcome.keep.into_iter();
            pool.retain(|_| keep.next().unwrap_or(false));
            let alive: HashSet<&Schedule> = pool.iter().map(|e| &e.schedule).collect();
            frontier.retain(|s| alive.contains(&s.schedule));
        }
        total_dropped += dropped;
        stages.push(StageStats {
            stage,
            generated_raw: raw,
            generated,
            stage_survivors: frontier.len(),
            dropped,
            pool_size: pool.len(),
        });
        telemetry.stage_seconds.push(t.elapsed().as_secs_f64());
    }
    drop(frontier);

    let t = Instant::now();
    if pool.is_empty() {
        return Err(Error::Internal("filtering removed every schedule".into()));
    }
    let on_front = final_front_flags(&pool);
    let mut candidates: Vec<Candidate> = pool
        .into_iter()
        .zip(on_front)
        .map(|(e, on)| Candidate {
            schedule: e.schedule,
            kinds: e.kinds,
            initial: e.initial,
            filter_fronts: e.filter_front.map(|f| f.fronts),
            on_final_front: on,
        })
        .collect();
    candidates.sort_by(|a, b| a.schedule.cmp(&b.schedule));
    if !candidates.iter().any(|c| c.on_final_front) {
        return Err(Error::Internal("final front is empty".into()));
    }
    telemetry.final_seconds = t.elapsed().as_secs_f64();
    telemetry.total_seconds = started.elapsed().as_secs_f64();

    Ok(SearchReport {
        strides,
        max_length: cfg.max_length,
        alphas: cfg.alphas.clone(),
        filtering: cfg.filter.is_some(),
        margin: cfg.filter.as_ref().map(|f| f.margin),
        filter_distributions: cfg.filter.as_ref().map_or(0, |f| f.distributions.len()),
        stages,
        total_generated,
        total_dropped,
        filtered_fraction: if total_generated == 0 { 0.0 } else { total_dropped as f64 / total_generated as f64 },
        candidates,
        telemetry,
    })
}

/// Schedules with an optimistic vertex not strictly dominated by the pooled
/// realizable front at the initial distribution.
fn final_front_flags(pool: &[Entry]) -> Vec<bool> {
    let cloud: Vec<Vec<f64>> =
        pool.iter().flat_map(|e| e.initial.realizable_points().map(|p| vec![p.exec, p.checkin])).collect();
    let pr: Vec<Vec<f64>> = pareto::nondominated_indices(&cloud).into_iter().map(|i| cloud[i].clone()).collect();
    pool.par_iter()
        .map(|e| {
            e.initial
                .optimistic
                .iter()
                .any(|v| !pr.iter().any(|q| pareto::dominates(q, &[v.exec, v.checkin])))
        })
        .collect()
}

/// Fraction of truth-front schedules whose realizable points are matched
/// within 1e-6 by some schedule on the filtered run's final front.
pub fn quality_metric(filtered: &SearchReport, truth: &SearchReport) -> Result<f64> {
    if filtered.strides != truth.strides || filtered.max_length != truth.max_length || filtered.alphas != truth.alphas {
        return Err(Error::Config("quality runs use different search settings".into()));
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0);
    let same = |x: &[CostPoint], y: &[CostPoint]| {
        x.len() == y.len() && x.iter().zip(y).all(|(p, q)| close(p.exec, q.exec) && close(p.checkin, q.checkin))
    };
    let got: Vec<Vec<CostPoint>> = filtered.final_front().map(|c| c.realizable()).collect();
    let (mut total, mut hit) = (0usize, 0usize);
    for c in truth.final_front() {
        total += 1;
        let pts = c.realizable();
        if got.iter().any(|g| same(g, &pts)) {
            hit += 1;
        }
    }
    if total == 0 {
        return Err(Error::Internal("truth front is empty".into()));
    }
    Ok(hit as f64 / total as f64)
}

/// Number of canonical schedules of length at most `n` over `k` strides
/// (the unfiltered candidate total).
pub fn canonical_count(k: usize, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    // Stage 0 has k schedules; stage i >= 1 adds (k - 1) k^i.
    let mut total = k;
    let mut pow = 1;
    for _ in 1..n {
        pow *= k;
        total += (k - 1) * pow;
    }
    total
}
