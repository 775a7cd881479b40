//! Monte Carlo check of analytic schedule costs on the corridor world.
//!
//!     cargo run --release --example rollout_check [-- samples]

use std::sync::Arc;

use checkin_planner::envs::{corridor_world, grid_to_mdp, CorridorParams};
use checkin_planner::model::{CompositeCache, CompositeLimits};
use checkin_planner::schedule::Schedule;
use checkin_planner::sim::{rollout, DEFAULT_HORIZON};
use checkin_planner::solver::{solve_schedule, PolicyKind, SolveOptions};

fn main() -> checkin_planner::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let world = grid_to_mdp(&corridor_world(&CorridorParams::default())?)?;
    let cache = CompositeCache::new(Arc::clone(&world.mdp), CompositeLimits::new(4));
    let cases = [("22(3)", "exec"), ("(3)", "exec"), ("(2)", "checkin"), ("1(4)", "alpha:0.5"), ("12(2)", "exec")];

    println!("{:<7} {:<10} {:>12} {:>12} {:>6} {:>9} {:>9} {:>6}", "sched", "policy", "E analytic", "E sampled", "z", "C analytic", "C sampled", "z");
    for (text, kind) in cases {
        let schedule: Schedule = text.parse()?;
        let kind = PolicyKind::parse(kind).unwrap();
        let alphas: Vec<f64> = kind.alpha().into_iter().collect();
        let solved = solve_schedule(&schedule, |k| Ok(cache.get(k)?), &alphas, &SolveOptions::default())?;
        let pol = solved.policy(kind).unwrap();
        let s0 = world.start_state().unwrap();
        let st = rollout(&world.mdp, &schedule, pol, &world.start, n, DEFAULT_HORIZON, 2024)?;
        let (e, c) = (pol.values.exec[s0], pol.values.checkin[s0]);
        let z = |a: f64, m: f64, se: f64| if se > 0.0 { (m - a) / se } else { 0.0 };
        println!(
            "{:<7} {:<10} {:>12.3} {:>12.3} {:>6.2} {:>9.4} {:>9.4} {:>6.2}",
            text,
            kind.to_string(),
            e,
            st.mean_exec,
            z(e, st.mean_exec, st.stderr_exec),
            c,
            st.mean_checkin,
            z(c, st.mean_checkin, st.stderr_checkin)
        );
    }
    Ok(())
}
