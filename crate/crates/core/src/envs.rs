//! Grid-world generators: the wall corridor, the two-sided splitter, and
//! conversion of any grid description into an [`Mdp`].
//!
//! Cells are `(x, y)` with `y = 0` on the top row. Actions are
//! `N, E, S, W, Noop` in that order.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::model::{MacroAction, Mdp};
use crate::solver::PolicyRecord;

pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;
pub const NOOP: usize = 4;
pub const N_ACTIONS: usize = 5;
pub const ACTION_NAMES: [&str; N_ACTIONS] = ["N", "E", "S", "W", "-"];

pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartCell {
    pub x: usize,
    pub y: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridCosts {
    pub move_cost: f64,
    pub noop_cost: f64,
    pub collision_cost: f64,
    pub goal_reward: f64,
    pub drift_left: f64,
    pub drift_right: f64,
    pub gamma_exec: f64,
    pub gamma_checkin: f64,
}

impl Default for GridCosts {
    fn default() -> Self {
        Self {
            move_cost: 1.0,
            noop_cost: 0.0,
            collision_cost: 300_000.0,
            goal_reward: 10_000.0,
            drift_left: 0.05,
            drift_right: 0.05,
            gamma_exec: 0.99_f64.sqrt(),
            gamma_checkin: DEFAULT_GAMMA_CHECKIN,
        }
    }
}

/// Check-in discount used by the bundled worlds.
pub const DEFAULT_GAMMA_CHECKIN: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<Cell>,
    pub start: Vec<StartCell>,
    pub goal_cells: Vec<Cell>,
    #[serde(flatten)]
    pub costs: GridCosts,
}

impl GridSpec {
    fn in_bounds(&self, (x, y): Cell) -> bool {
        x < self.width && y < self.height
    }

    fn wall_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.width * self.height];
        for &(x, y) in &self.walls {
            if self.in_bounds((x, y)) {
                mask[y * self.width + x] = true;
            }
        }
        mask
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let geo = |m: String| Err(EnvError::Geometry(m));
        let par = |m: String| Err(EnvError::Parameter(m));
        if self.width == 0 || self.height == 0 {
            return geo("grid must have at least one cell".into());
        }
        if let Some(c) = self.walls.iter().find(|c| !self.in_bounds(**c)) {
            return geo(format!("wall {c:?} outside the grid"));
        }
        let mask = self.wall_mask();
        let free = |c: &Cell| self.in_bounds(*c) && !mask[c.1 * self.width + c.0];
        if self.goal_cells.is_empty() {
            return geo("at least one goal cell is required".into());
        }
        if let Some(c) = self.goal_cells.iter().find(|c| !free(c)) {
            return geo(format!("goal cell {c:?} is not a free cell"));
        }
        if self.start.is_empty() {
            return geo("start distribution is empty".into());
        }
        if let Some(s) = self.start.iter().find(|s| !free(&(s.x, s.y))) {
            return geo(format!("start cell ({}, {}) is not a free cell", s.x, s.y));
        }
        if self.start.iter().any(|s| !(s.p >= 0.0)) {
            return par("start probabilities must be non-negative".into());
        }
        let total: f64 = self.start.iter().map(|s| s.p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return par(format!("start probabilities sum to {total}"));
        }
        let c = &self.costs;
        for (name, v) in [
            ("move_cost", c.move_cost),
            ("noop_cost", c.noop_cost),
            ("collision_cost", c.collision_cost),
            ("goal_reward", c.goal_reward),
        ] {
            if !v.is_finite() {
                return par(format!("{name} must be finite"));
            }
        }
        if c.goal_reward < 0.0 {
            return par("goal_reward must be non-negative".into());
        }
        if !(c.drift_left >= 0.0 && c.drift_right >= 0.0 && c.drift_left + c.drift_right <= 1.0) {
            return par(format!("drift probabilities {} and {} are invalid", c.drift_left, c.drift_right));
        }
        Ok(())
    }
}

/// A grid converted to an MDP, with the cell/state mapping.
#[derive(Debug, Clone)]
pub struct GridWorld {
    pub spec: GridSpec,
    pub mdp: Arc<Mdp>,
    /// Cell of each state, row-major over free cells.
    pub cells: Vec<Cell>,
    index: Vec<Option<usize>>,
    /// Start distribution over states.
    pub start: Vec<f64>,
    pub warnings: Vec<String>,
}

impl GridWorld {
    pub fn state_of(&self, (x, y): Cell) -> Option<usize> {
        if x < self.spec.width && y < self.spec.height {
            self.index[y * self.spec.width + x]
        } else {
            None
        }
    }

    /// The single start state, if the start distribution is a point mass.
    pub fn start_state(&self) -> Option<usize> {
        let mut it = self.start.iter().enumerate().filter(|(_, p)| **p > 0.0);
        match (it.next(), it.next()) {
            (Some((s, _)), None) => Some(s),
            _ => None,
        }
    }

    /// ASCII map: `#` wall, `.` free, `S` start, `G` goal.
    pub fn render(&self) -> String {
        render_ascii(&self.spec)
    }

    /// First non-noop action the policy's first layer takes from the start
    /// cell, or `NOOP` if it only waits. `None` when the start is not a single cell.
    pub fn first_move(&self, policy: &PolicyRecord, first_stride: usize) -> Option<usize> {
        let s = self.start_state()?;
        let m = MacroAction::from_index(policy.layer(0)[s] as usize, first_stride, N_ACTIONS);
        Some(m.steps().iter().copied().find(|a| *a != NOOP).unwrap_or(NOOP))
    }

    /// ASCII map with one action glyph per free non-goal cell.
    pub fn render_actions(&self, action_of_state: impl Fn(usize) -> usize) -> String {
        let mut out = String::new();
        for y in 0..self.spec.height {
            for x in 0..self.spec.width {
                let ch = match self.state_of((x, y)) {
                    None => '#',
                    Some(s) if self.mdp.is_goal(s) => 'G',
                    Some(s) => ['^', '>', 'v', '<', 'o'][action_of_state(s)],
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

fn step((x, y): Cell, dir: usize) -> Option<Cell> {
    match dir {
        NORTH => y.checked_sub(1).map(|y| (x, y)),
        EAST => Some((x + 1, y)),
        SOUTH => Some((x, y + 1)),
        WEST => x.checked_sub(1).map(|x| (x, y)),
        _ => Some((x, y)),
    }
}

/// Perpendicular directions (left, right) of a movement direction.
fn laterals(dir: usize) -> (usize, usize) {
    ((dir + 3) % 4, (dir + 1) % 4)
}

/// Builds the MDP for a grid. Unreachable goals produce warnings, not errors.
pub fn grid_to_mdp(spec: &GridSpec) -> Result<GridWorld, EnvError> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mask = spec.wall_mask();
    let mut index = vec![None; w * h];
    let mut cells = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask[y * w + x] {
                index[y * w + x] = Some(cells.len());
                cells.push((x, y));
            }
        }
    }
    let n = cells.len();
    let free = |c: Option<Cell>| -> Option<usize> {
        let (x, y) = c?;
        if x < w && y < h {
            index[y * w + x]
        } else {
            None
        }
    };
    let mut is_goal = vec![false; n];
    for &c in &spec.goal_cells {
        is_goal[free(Some(c)).expect("validated")] = true;
    }
    let goal: Vec<usize> = (0..n).filter(|&s| is_goal[s]).collect();
    let c = &spec.costs;

    let mut rows = Vec::with_capacity(n * N_ACTIONS);
    let mut cost = Vec::with_capacity(n * N_ACTIONS);
    for (s, &cell) in cells.iter().enumerate() {
        for a in 0..N_ACTIONS {
            if is_goal[s] {
                rows.push(vec![(s, 1.0)]);
                cost.push(0.0);
                continue;
            }
            if a == NOOP {
                rows.push(vec![(s, 1.0)]);
                cost.push(c.noop_cost);
                continue;
            }
            let Some(t) = free(step(cell, a)) else {
                rows.push(vec![(s, 1.0)]);
                cost.push(c.move_cost + c.collision_cost);
                continue;
            };
            let (left, right) = laterals(a);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(3);
            let mut add = |dst: usize, p: f64| {
                if p > 0.0 {
                    row.push((dst, p));
                }
            };
            add(t, 1.0 - c.drift_left - c.drift_right);
            add(free(step(cells[t], left)).unwrap_or(t), c.drift_left);
            add(free(step(cells[t], right)).unwrap_or(t), c.drift_right);
            let p_goal: f64 = row.iter().filter(|(d, _)| is_goal[*d]).map(|(_, p)| p).sum();
            rows.push(row);
            cost.push(c.move_cost - c.goal_reward * p_goal);
        }
    }
    let mdp = Mdp::new(n, N_ACTIONS, rows, cost, &goal, c.gamma_exec, c.gamma_checkin)?;

    let mut start = vec![0.0; n];
    for sc in &spec.start {
        start[free(Some((sc.x, sc.y))).expect("validated")] += sc.p;
    }
    let mut warnings = Vec::new();
    if !goal_reachable(&cells, &free, &start, &is_goal) {
        warnings.push("no goal cell is reachable from the start distribution".to_string());
    }
    Ok(GridWorld { spec: spec.clone(), mdp: Arc::new(mdp), cells, index, start, warnings })
}

fn goal_reachable(cells: &[Cell], free: &impl Fn(Option<Cell>) -> Option<usize>, start: &[f64], is_goal: &[bool]) -> bool {
    let mut seen = vec![false; cells.len()];
    let mut queue: VecDeque<usize> = (0..cells.len()).filter(|&s| start[s] > 0.0).collect();
    for &s in &queue {
        seen[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        if is_goal[s] {
            return true;
        }
        for d in 0..4 {
            if let Some(t) = free(step(cells[s], d)) {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    false
}

/// ASCII map: `#` wall, `.` free, `S` start, `G` goal.
pub fn render_ascii(spec: &GridSpec) -> String {
    let w = spec.width;
    let mut grid = vec![b'.'; w * spec.height];
    for &(x, y) in &spec.walls {
        grid[y * w + x] = b'#';
    }
    for &(x, y) in &spec.goal_cells {
        grid[y * w + x] = b'G';
    }
    for s in &spec.start {
        grid[s.y * w + s.x] = b'S';
    }
    let mut out = String::with_capacity((w + 1) * spec.height);
    for row in grid.chunks(w) {
        out.push_str(std::str::from_utf8(row).expect("ascii"));
        out.push('\n');
    }
    out
}

/// Corridor of full-height wall columns, each with one gap at `gap_row`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorridorParams {
    pub width: usize,
    pub height: usize,
    /// Column of the first wall.
    pub first_wall: usize,
    /// Horizontal steps between consecutive wall columns.
    pub cadences: Vec<usize>,
    pub gap_row: usize,
    pub start: Cell,
    pub goal: Cell,
    /// Make every free cell of the goal's column a goal cell.
    pub goal_column: bool,
    pub costs: GridCosts,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self {
            width: 20,
            height: 5,
            first_wall: 1,
            cadences: vec![2, 2, 3, 3, 3],
            gap_row: 2,
            start: (0, 2),
            goal: (19, 2),
            goal_column: true,
            costs: GridCosts::default(),
        }
    }
}

impl CorridorParams {
    pub fn wall_columns(&self) -> Vec<usize> {
        let mut cols = vec![self.first_wall];
        for &c in &self.cadences {
            cols.push(cols.last().unwrap() + c);
        }
        cols
    }
}

pub fn corridor_world(p: &CorridorParams) -> Result<GridSpec, EnvError> {
    let geo = |m: String| Err(EnvError::Geometry(m));
    if p.height < 2 {
        return geo("corridor height must be at least 2 to place a gap".into());
    }
    if p.gap_row >= p.height {
        return geo(format!("gap row {} outside height {}", p.gap_row, p.height));
    }
    if let Some(c) = p.cadences.iter().find(|c| **c < 2) {
        return geo(format!("cadence {c} is below 2"));
    }
    let cols = p.wall_columns();
    if *cols.last().unwrap() >= p.width {
        return geo(format!("wall column {} outside width {}", cols.last().unwrap(), p.width));
    }
    let mut walls = Vec::new();
    for &x in &cols {
        for y in (0..p.height).filter(|&y| y != p.gap_row) {
            walls.push((x, y));
        }
    }
    let goal_cells = if p.goal_column {
        (0..p.height).map(|y| (p.goal.0, y)).filter(|c| !walls.contains(c)).collect()
    } else {
        vec![p.goal]
    };
    let spec = GridSpec {
        width: p.width,
        height: p.height,
        walls,
        start: vec![StartCell { x: p.start.0, y: p.start.1, p: 1.0 }],
        goal_cells,
        costs: p.costs,
    };
    spec.validate()?;
    Ok(spec)
}

/// Two halves separated by a center wall column that is open only at the
/// start row. Each half has horizontal wall rows with one gap each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitterParams {
    pub width: usize,
    pub height: usize,
    /// Rows (from the bottom, exclusive of the start row) between horizontal
    /// walls on the west half.
    pub west_cadence: usize,
    pub east_cadence: usize,
    /// Gap column of the west walls, counted from the center wall.
    pub west_gap_offset: usize,
    pub east_gap_offset: usize,
    /// Free rows between the start row and the first wall on each side.
    pub west_lead: usize,
    pub east_lead: usize,
    pub costs: GridCosts,
}

impl Default for SplitterParams {
    fn default() -> Self {
        Self {
            width: 13,
            height: 11,
            west_cadence: 2,
            east_cadence: 3,
            west_gap_offset: 2,
            east_gap_offset: 2,
            west_lead: 3,
            east_lead: 1,
            costs: GridCosts::default(),
        }
    }
}

pub fn splitter_world(p: &SplitterParams) -> Result<GridSpec, EnvError> {
    let geo = |m: String| Err(EnvError::Geometry(m));
    if p.width < 5 || p.width % 2 == 0 {
        return geo("splitter width must be odd and at least 5".into());
    }
    if p.height < 4 {
        return geo("splitter height must be at least 4".into());
    }
    if p.west_cadence < 2 || p.east_cadence < 2 {
        return geo("cadences must be at least 2".into());
    }
    let mid = p.width / 2;
    if p.west_gap_offset == 0 || p.west_gap_offset > mid || p.east_gap_offset == 0 || p.east_gap_offset > mid {
        return geo("gap offsets must lie within each half".into());
    }
    let start_row = p.height - 1;
    let mut walls: Vec<Cell> = (0..start_row).map(|y| (mid, y)).collect();
    let mut add_rows = |lead: usize, cadence: usize, gap_x: usize, xs: std::ops::Range<usize>| {
        // Walls sit `lead` rows above the start row, then every `cadence` rows,
        // leaving the top row free for the goal.
        let mut y = start_row as isize - lead as isize - 1;
        while y >= 1 {
            for x in xs.clone().filter(|&x| x != gap_x) {
                walls.push((x, y as usize));
            }
            y -= cadence as isize;
        }
    };
    add_rows(p.west_lead, p.west_cadence, mid - p.west_gap_offset, 0..mid);
    add_rows(p.east_lead, p.east_cadence, mid + p.east_gap_offset, mid + 1..p.width);
    let goal_cells = (0..p.width).filter(|&x| x != mid).map(|x| (x, 0)).collect();
    let spec = GridSpec {
        width: p.width,
        height: p.height,
        walls,
        start: vec![StartCell { x: mid, y: start_row, p: 1.0 }],
        goal_cells,
        costs: p.costs,
    };
    spec.validate()?;
    Ok(spec)
}
