//! Strides 1..=3 up to length 6: how much of the schedule space the
//! filtered search visits.
//!
//!     cargo run --release --example scaling

use checkin_planner::envs::{corridor_world, grid_to_mdp, CorridorParams};
use checkin_planner::search::{canonical_count, pareto_front_schedules, quality_metric, SearchConfig};

fn main() -> checkin_planner::Result<()> {
    let world = grid_to_mdp(&corridor_world(&CorridorParams::default())?)?;
    let alphas: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    let base = SearchConfig::new(vec![1, 2, 3], 6, world.start.clone()).with_alphas(alphas);
    let all = canonical_count(3, 6);
    let truth = pareto_front_schedules(&world.mdp, &base)?;
    println!("unfiltered: {} schedules in {:.2}s", truth.total_generated, truth.telemetry.total_seconds);

    let uniform = world.mdp.uniform_distribution();
    for (name, dists) in [
        ("initial", vec![world.start.clone()]),
        ("uniform", vec![uniform.clone()]),
        ("mixed", vec![world.start.clone(), uniform]),
    ] {
        let rep = pareto_front_schedules(&world.mdp, &base.clone().with_filter(dists, 0.0))?;
        println!(
            "{name:<8} visited {:>3}/{all} ({:.1}%)  f = {:.3}  quality {:.3}  {:.2}s",
            rep.total_generated,
            100.0 * rep.total_generated as f64 / all as f64,
            rep.filtered_fraction,
            quality_metric(&rep, &truth)?,
            rep.telemetry.total_seconds
        );
        for s in &rep.stages {
            println!("    stage {}: {} new, {} dropped, pool {}", s.stage, s.generated, s.dropped, s.pool_size);
        }
    }
    Ok(())
}
