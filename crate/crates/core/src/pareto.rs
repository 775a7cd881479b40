//! Cost points, realizable and optimistic fronts, schedule dominance and
//! candidate filtering.

use serde::{Deserialize, Serialize};

use crate::error::ParetoError;
use crate::schedule::Schedule;
use crate::solver::{PolicyKind, SolvedSchedule};

/// Absolute tolerance for dominance comparisons.
pub const DOMINANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub exec: f64,
    pub checkin: f64,
}

impl CostPoint {
    pub fn new(exec: f64, checkin: f64) -> Self {
        Self { exec, checkin }
    }

    /// Strict dominance: both coordinates smaller by more than the tolerance.
    pub fn dominates(&self, other: &CostPoint) -> bool {
        self.exec < other.exec - DOMINANCE_TOL && self.checkin < other.checkin - DOMINANCE_TOL
    }

    pub fn near(&self, other: &CostPoint) -> bool {
        (self.exec - other.exec).abs() <= DOMINANCE_TOL && (self.checkin - other.checkin).abs() <= DOMINANCE_TOL
    }
}

/// Strict dominance in every coordinate.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| *x < *y - DOMINANCE_TOL)
}

/// `a <= b` in every coordinate, up to the tolerance.
pub fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= *y + DOMINANCE_TOL)
}

fn near(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DOMINANCE_TOL)
}

/// Expected value of `values` under `distribution`.
pub fn evaluate_at(values: &[f64], distribution: &[f64]) -> Result<f64, ParetoError> {
    if values.len() != distribution.len() {
        return Err(ParetoError::Dimension { expected: values.len(), got: distribution.len() });
    }
    Ok(values.iter().zip(distribution).map(|(v, p)| v * p).sum())
}

/// Indices of the non-dominated points, in insertion order. Among points
/// equal within the tolerance only the first inserted is kept.
pub fn nondominated_indices(points: &[Vec<f64>]) -> Vec<usize> {
    // A dominator always has a smaller coordinate sum, so scanning in sum
    // order only needs to compare against the front built so far.
    let mut order: Vec<usize> = (0..points.len()).collect();
    let sums: Vec<f64> = points.iter().map(|p| p.iter().sum()).collect();
    order.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]).then(a.cmp(&b)));
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        let p = &points[i];
        let beaten = front.iter().any(|&j| dominates(&points[j], p));
        if beaten {
            continue;
        }
        if let Some(pos) = front.iter().position(|&j| near(&points[j], p)) {
            // Keep the lowest insertion index among duplicates.
            if i < front[pos] {
                front[pos] = i;
            }
            continue;
        }
        front.push(i);
    }
    front.sort_unstable();
    front
}

/// Indices of the non-dominated points sorted by exec ascending, then
/// check-in descending.
pub fn realizable_indices(points: &[CostPoint]) -> Vec<usize> {
    let as_vec: Vec<Vec<f64>> = points.iter().map(|p| vec![p.exec, p.checkin]).collect();
    let mut idx = nondominated_indices(&as_vec);
    idx.sort_by(|&a, &b| {
        points[a].exec.total_cmp(&points[b].exec).then(points[b].checkin.total_cmp(&points[a].checkin))
    });
    idx
}

/// Non-dominated staircase of `points`.
pub fn realizable_front(points: &[CostPoint]) -> Vec<CostPoint> {
    realizable_indices(points).into_iter().map(|i| points[i]).collect()
}

fn scale_tol(x: f64) -> f64 {
    1e-9 * x.abs().max(1.0)
}

/// Vertices of the lower-left boundary of
/// `{E >= corner_exec.exec, C >= corner_ck.checkin, a*E + (1-a)*C >= a*p.exec + (1-a)*p.checkin}`
/// sorted by exec ascending. Supporting points on the boundary are included.
pub fn optimistic_front(
    corner_exec: CostPoint,
    corner_ck: CostPoint,
    supports: &[(f64, CostPoint)],
) -> Result<Vec<CostPoint>, ParetoError> {
    let (e0, c0) = (corner_exec.exec, corner_ck.checkin);
    if !e0.is_finite() || !c0.is_finite() || !corner_exec.checkin.is_finite() || !corner_ck.exec.is_finite() {
        return Err(ParetoError::NonFinite);
    }
    if e0 > corner_ck.exec + 1e-6 * corner_ck.exec.abs().max(1.0) {
        return Err(ParetoError::Corners { exec_corner: e0, ck_corner: corner_ck.exec });
    }
    // Each support is the line C = (b - a*E) / (1 - a) = q - m*E.
    let mut lines: Vec<(f64, f64)> = Vec::with_capacity(supports.len());
    for &(a, p) in supports {
        if !(a > 0.0 && a < 1.0) {
            return Err(ParetoError::Alpha(a));
        }
        if !p.exec.is_finite() || !p.checkin.is_finite() {
            return Err(ParetoError::NonFinite);
        }
        let b = a * p.exec + (1.0 - a) * p.checkin;
        lines.push((b / (1.0 - a), a / (1.0 - a)));
    }
    let envelope = |e: f64| lines.iter().fold(c0, |acc, &(q, m)| acc.max(q - m * e));

    let mut e_end = e0;
    for &(q, m) in &lines {
        e_end = e_end.max((q - c0) / m);
    }
    let mut xs = vec![e0, e_end];
    for (i, &(qi, mi)) in lines.iter().enumerate() {
        xs.push((qi - c0) / mi);
        for &(qj, mj) in &lines[i + 1..] {
            if (mi - mj).abs() > 1e-15 * mi.max(mj) {
                xs.push((qi - qj) / (mi - mj));
            }
        }
    }
    xs.retain(|x| x.is_finite() && *x >= e0 && *x <= e_end);
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= scale_tol(*b));

    let pts: Vec<CostPoint> = xs.iter().map(|&e| CostPoint::new(e, envelope(e))).collect();
    let mut vertices: Vec<CostPoint> = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        if i == 0 || i + 1 == pts.len() {
            vertices.push(*p);
            continue;
        }
        let (l, r) = (pts[i - 1], pts[i + 1]);
        let sl = (p.checkin - l.checkin) / (p.exec - l.exec);
        let sr = (r.checkin - p.checkin) / (r.exec - p.exec);
        if (sl - sr).abs() > 1e-9 * sl.abs().max(sr.abs()).max(1.0) {
            vertices.push(*p);
        }
    }
    for &(_, p) in supports {
        if p.exec >= e0 && p.exec <= e_end && (envelope(p.exec) - p.checkin).abs() <= scale_tol(p.checkin) {
            let on_boundary = CostPoint::new(p.exec, envelope(p.exec));
            if !vertices.iter().any(|v| v.near(&on_boundary)) {
                vertices.push(on_boundary);
            }
        }
    }
    vertices.sort_by(|a, b| a.exec.total_cmp(&b.exec));
    Ok(vertices)
}

/// True iff a point lies in the optimistic-feasible region spanned by the
/// same inputs as [`optimistic_front`].
pub fn optimistic_feasible(corner_exec: CostPoint, corner_ck: CostPoint, supports: &[(f64, CostPoint)], p: CostPoint) -> bool {
    p.exec >= corner_exec.exec
        && p.checkin >= corner_ck.checkin
        && supports.iter().all(|&(a, s)| a * p.exec + (1.0 - a) * p.checkin >= a * s.exec + (1.0 - a) * s.checkin)
}

/// Front of one schedule at one distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistFront {
    /// One point per known policy, aligned with the schedule's policies.
    pub points: Vec<CostPoint>,
    /// Indices into `points`, sorted along the staircase.
    pub realizable: Vec<usize>,
    pub optimistic: Vec<CostPoint>,
}

impl DistFront {
    pub fn realizable_points(&self) -> impl Iterator<Item = CostPoint> + '_ {
        self.realizable.iter().map(|&i| self.points[i])
    }

    /// True iff `p` is on or above the optimistic polyline.
    pub fn optimistic_contains(&self, p: CostPoint) -> bool {
        polyline_contains(&self.optimistic, p)
    }
}

/// Membership in the region above a convex, exec-sorted optimistic polyline;
/// right of the last vertex the boundary is flat.
pub fn polyline_contains(vertices: &[CostPoint], p: CostPoint) -> bool {
    let Some(first) = vertices.first() else { return false };
    if p.exec < first.exec {
        return false;
    }
    let i = vertices.partition_point(|v| v.exec <= p.exec);
    let floor = if i == vertices.len() {
        vertices[i - 1].checkin
    } else {
        let (l, r) = (vertices[i - 1], vertices[i]);
        l.checkin + (r.checkin - l.checkin) * (p.exec - l.exec) / (r.exec - l.exec)
    };
    p.checkin >= floor
}

/// Exact area of `{p in [lo, hi] : polyline_contains(vertices, p)}`.
pub fn optimistic_area_exact(vertices: &[CostPoint], lo: CostPoint, hi: CostPoint) -> f64 {
    let Some(first) = vertices.first() else { return 0.0 };
    let (a, b) = (lo.exec.max(first.exec), hi.exec);
    if !(b > a) || !(hi.checkin > lo.checkin) {
        return 0.0;
    }
    let floor = |e: f64| {
        let i = vertices.partition_point(|v| v.exec <= e);
        if i == vertices.len() {
            vertices[i - 1].checkin
        } else {
            let (l, r) = (vertices[i - 1], vertices[i]);
            l.checkin + (r.checkin - l.checkin) * (e - l.exec) / (r.exec - l.exec)
        }
    };
    let height = |e: f64| hi.checkin - floor(e).clamp(lo.checkin, hi.checkin);
    // Breakpoints: vertices, box edges, and where the floor crosses the box.
    let mut xs = vec![a, b];
    xs.extend(vertices.iter().map(|v| v.exec));
    for w in vertices.windows(2) {
        let (l, r) = (w[0], w[1]);
        for c in [lo.checkin, hi.checkin] {
            if (l.checkin - c) * (r.checkin - c) < 0.0 {
                xs.push(l.exec + (c - l.checkin) * (r.exec - l.exec) / (r.checkin - l.checkin));
            }
        }
    }
    xs.retain(|x| *x >= a && *x <= b);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (height(w[0]) + height(w[1]))).sum()
}

/// Monte Carlo area of `{p in [lo, hi] : polyline_contains(vertices, p)}`.
/// The sample points depend only on `seed` and `samples`, so regions compared
/// with the same arguments are measured on identical points.
pub fn optimistic_area(vertices: &[CostPoint], lo: CostPoint, hi: CostPoint, samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (hi.exec - lo.exec, hi.checkin - lo.checkin);
    if samples == 0 || !(w > 0.0 && h > 0.0) {
        return 0.0;
    }
    let hits = (0..samples)
        .filter(|_| {
            let p = CostPoint::new(lo.exec + w * rng.gen::<f64>(), lo.checkin + h * rng.gen::<f64>());
            polyline_contains(vertices, p)
        })
        .count();
    w * h * hits as f64 / samples as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFront {
    pub schedule: Schedule,
    pub kinds: Vec<PolicyKind>,
    /// One entry per evaluation distribution.
    pub fronts: Vec<DistFront>,
}

/// Builds one distribution's front from per-policy points. The corners
/// come from the exec-opt and checkin-opt policies; alpha points are
/// supports.
pub fn dist_front(kinds: &[PolicyKind], points: Vec<CostPoint>) -> Result<DistFront, ParetoError> {
    if kinds.len() != points.len() {
        return Err(ParetoError::Dimension { expected: kinds.len(), got: points.len() });
    }
    let find = |k: PolicyKind| kinds.iter().position(|x| *x == k).ok_or(ParetoError::Empty("corner policy"));
    let ex = points[find(PolicyKind::Exec)?];
    let ck = points[find(PolicyKind::Checkin)?];
    let supports: Vec<(f64, CostPoint)> =
        kinds.iter().zip(&points).filter_map(|(k, p)| k.alpha().map(|a| (a, *p))).collect();
    let corner_ck = CostPoint::new(ck.exec.max(ex.exec), ck.checkin);
    let optimistic = optimistic_front(ex, corner_ck, &supports)?;
    let realizable = realizable_indices(&points);
    Ok(DistFront { points, realizable, optimistic })
}

pub fn check_distribution(index: usize, d: &[f64], n_states: usize) -> Result<(), ParetoError> {
    if d.len() != n_states {
        return Err(ParetoError::Dimension { expected: n_states, got: d.len() });
    }
    let sum: f64 = d.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || d.iter().any(|p| !(*p >= 0.0)) {
        return Err(ParetoError::Distribution { index, sum });
    }
    Ok(())
}

/// Evaluates every known policy of `solved` at each distribution.
pub fn schedule_front(solved: &SolvedSchedule, distributions: &[Vec<f64>]) -> Result<ScheduleFront, ParetoError> {
    let kinds: Vec<PolicyKind> = solved.policies.iter().map(|p| p.kind).collect();
    let mut fronts = Vec::with_capacity(distributions.len());
    for d in distributions {
        let mut points = Vec::with_capacity(kinds.len());
        for rec in &solved.policies {
            let e = evaluate_at(&rec.values.exec, d)?;
            let c = evaluate_at(&rec.values.checkin, d)?;
            if !e.is_finite() || !c.is_finite() {
                return Err(ParetoError::NonFinite);
            }
            points.push(CostPoint::new(e, c));
        }
        fronts.push(dist_front(&kinds, points)?);
    }
    Ok(ScheduleFront { schedule: solved.schedule.clone(), kinds, fronts })
}

/// True iff every vertex of `b_optimistic` is strictly dominated by some
/// point of `a_realizable`.
pub fn schedule_dominates(a_realizable: &[CostPoint], b_optimistic: &[CostPoint]) -> bool {
    b_optimistic.iter().all(|v| a_realizable.iter().any(|p| p.dominates(v)))
}

/// [`schedule_dominates`] on stored fronts at distribution `d`.
pub fn front_dominates(a: &ScheduleFront, b: &ScheduleFront, d: usize) -> bool {
    let pts: Vec<CostPoint> = a.fronts[d].realizable_points().collect();
    schedule_dominates(&pts, &b.fronts[d].optimistic)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub distributions: Vec<Vec<f64>>,
    /// Fraction of the per-coordinate range of the candidate point cloud.
    pub margin: f64,
}

impl FilterConfig {
    pub fn validate(&self, n_states: usize) -> Result<(), ParetoError> {
        if self.distributions.is_empty() {
            return Err(ParetoError::Empty("filter distributions"));
        }
        for (i, d) in self.distributions.iter().enumerate() {
            check_distribution(i, d, n_states)?;
        }
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(ParetoError::Margin(self.margin));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub keep: Vec<bool>,
    /// Normalized distance of each candidate's optimistic front to the pooled
    /// realizable front (0 when some vertex is not dominated).
    pub distances: Vec<f64>,
    pub kept: usize,
    pub dropped: usize,
}

impl FilterOutcome {
    pub fn filtered_fraction(&self) -> f64 {
        let total = self.kept + self.dropped;
        if total == 0 {
            0.0
        } else {
            self.dropped as f64 / total as f64
        }
    }
}

/// Product-space points of each known policy: `(exec_d, checkin_d)` for each
/// distribution `d`, concatenated.
pub fn product_points(front: &ScheduleFront) -> Vec<Vec<f64>> {
    (0..front.kinds.len())
        .map(|i| front.fronts.iter().flat_map(|f| [f.points[i].exec, f.points[i].checkin]).collect())
        .collect()
}

/// Product-space optimistic vertices: every combination of one vertex per
/// distribution.
pub fn product_vertices(front: &ScheduleFront) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for f in &front.fronts {
        let mut next = Vec::with_capacity(out.len() * f.optimistic.len());
        for prefix in &out {
            for v in &f.optimistic {
                let mut p = prefix.clone();
                p.push(v.exec);
                p.push(v.checkin);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Normalized distance of an optimistic vertex set to `pr`: 0 if some
/// vertex is not weakly dominated by any `pr` point, otherwise the smallest
/// range-normalized Euclidean distance between a vertex and a `pr` point.
/// Coordinates with zero range contribute nothing.
pub fn front_distance(vertices: &[Vec<f64>], pr: &[Vec<f64>], ranges: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for v in vertices {
        if !pr.iter().any(|q| weakly_dominates(q, v)) {
            return 0.0;
        }
        for q in pr {
            let d2: f64 = v
                .iter()
                .zip(q)
                .zip(ranges)
                .map(|((a, b), r)| if *r > 0.0 { ((a - b) / r).powi(2) } else { 0.0 })
                .sum();
            best = best.min(d2.sqrt());
        }
    }
    best
}

/// Keeps candidates with an optimistic vertex outside the region dominated
/// by the pooled realizable front, or within `margin` of it.
pub fn filter(candidates: &[ScheduleFront], margin: f64) -> Result<FilterOutcome, ParetoError> {
    if candidates.is_empty() {
        return Err(ParetoError::Empty("filter candidates"));
    }
    if !(margin >= 0.0) || !margin.is_finite() {
        return Err(ParetoError::Margin(margin));
    }
    let dims = 2 * candidates[0].fronts.len();
    if let Some(bad) = candidates.iter().find(|c| 2 * c.fronts.len() != dims) {
        return Err(ParetoError::Dimension { expected: dims, got: 2 * bad.fronts.len() });
    }
    let cloud: Vec<Vec<f64>> = candidates.iter().flat_map(product_points).collect();
    let ranges: Vec<f64> = (0..dims)
        .map(|j| {
            let (lo, hi) = cloud.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
            hi - lo
        })
        .collect();
    let pr: Vec<Vec<f64>> = nondominated_indices(&cloud).into_iter().map(|i| cloud[i].clone()).collect();

    use rayon::prelude::*;
    let results: Vec<(bool, f64)> = candidates
        .par_iter()
        .map(|c| {
            let vertices = product_vertices(c);
            let open = vertices.iter().any(|v| !pr.iter().any(|q| dominates(q, v)));
            let dist = front_distance(&vertices, &pr, &ranges);
            (open || dist <= margin, dist)
        })
        .collect();
    let keep: Vec<bool> = results.iter().map(|r| r.0).collect();
    let distances = results.iter().map(|r| r.1).collect();
    let kept = keep.iter().filter(|k| **k).count();
    Ok(FilterOutcome { dropped: keep.len() - kept, kept, keep, distances })
}
