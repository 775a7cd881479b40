//! Filtering quality and runtime against margin and filter distribution,
//! compared with one unfiltered run on the corridor world.
//!
//!     cargo run --release --example margin_sweep

use checkin_planner::envs::{corridor_world, grid_to_mdp, CorridorParams};
use checkin_planner::search::{pareto_front_schedules, quality_metric, SearchConfig};

fn main() -> checkin_planner::Result<()> {
    let world = grid_to_mdp(&corridor_world(&CorridorParams::default())?)?;
    let base = SearchConfig::new(vec![1, 2, 3, 4], 4, world.start.clone());
    let truth = pareto_front_schedules(&world.mdp, &base)?;
    let t0 = truth.telemetry.total_seconds;
    println!("unfiltered: {} schedules, {} on the front, {:.3}s", truth.candidates.len(), truth.final_front().count(), t0);

    let uniform = world.mdp.uniform_distribution();
    let modes = [
        ("uniform", vec![uniform.clone()]),
        ("initial", vec![world.start.clone()]),
        ("mixed", vec![world.start.clone(), uniform]),
    ];
    println!("{:<8} {:>6} {:>7} {:>7} {:>9}", "filter", "margin", "f", "quality", "time/unf");
    for (name, dists) in &modes {
        for margin in [0.0, 0.02, 0.05, 0.1, 0.2, 0.5] {
            let rep = pareto_front_schedules(&world.mdp, &base.clone().with_filter(dists.clone(), margin))?;
            println!(
                "{:<8} {:>6} {:>7.3} {:>7.3} {:>9.2}",
                name,
                margin,
                rep.filtered_fraction,
                quality_metric(&rep, &truth)?,
                rep.telemetry.total_seconds / t0
            );
        }
    }
    Ok(())
}
