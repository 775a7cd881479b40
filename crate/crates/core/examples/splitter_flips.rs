//! Splitter world: which side the agent picks depends on the schedule.
//!
//! The west half has wall rows every 2 cells, the east half every 3. For
//! the family `2^m(3)` the first move from the start cell flips between
//! east and west as the prefix grows.
//!
//!     cargo run --release --example splitter_flips

use std::sync::Arc;

use checkin_planner::envs::{grid_to_mdp, splitter_world, SplitterParams, ACTION_NAMES, N_ACTIONS, NOOP};
use checkin_planner::model::{CompositeCache, CompositeLimits, MacroAction};
use checkin_planner::schedule::Schedule;
use checkin_planner::solver::{solve_schedule, PolicyKind, SolveOptions};

fn main() -> checkin_planner::Result<()> {
    let world = grid_to_mdp(&splitter_world(&SplitterParams::default())?)?;
    print!("{}", world.render());
    let cache = CompositeCache::new(Arc::clone(&world.mdp), CompositeLimits::new(3));
    let s0 = world.start_state().unwrap();

    let mut dirs = String::new();
    for m in 0..=9 {
        let schedule = Schedule::new(vec![2; m], 3)?;
        let solved = solve_schedule(&schedule, |k| Ok(cache.get(k)?), &[], &SolveOptions::default())?;
        let pol = solved.policy(PolicyKind::Exec).unwrap();
        let dir = world.first_move(pol, schedule.stride(0)).unwrap();
        let head = pol.values.exec[s0];
        println!("{:<14} first move {}  exec {:>10.3}", schedule.to_string(), ACTION_NAMES[dir], head);
        dirs.push_str(ACTION_NAMES[dir]);

        if m == 0 || m == 3 {
            // First action of each layer-0 macro, per cell.
            let first = |s: usize| {
                let mac = MacroAction::from_index(pol.layer(0)[s] as usize, schedule.stride(0), N_ACTIONS);
                mac.steps().iter().copied().find(|a| *a != NOOP).unwrap_or(NOOP)
            };
            print!("{}", world.render_actions(first));
        }
    }
    let flips = dirs.as_bytes().windows(2).filter(|w| w[0] != w[1]).count();
    println!("directions for m = 0..9: {dirs} ({flips} flips)");
    Ok(())
}
