//! Corridor world, unfiltered search over strides 1..=4 up to length 4.
//!
//! Prints the map, the cost points of a few schedules, the dominance
//! relations between them and the schedules on the final front.
//!
//!     cargo run --release --example corridor_front [-- out.svg]

use checkin_planner::envs::{corridor_world, grid_to_mdp, CorridorParams};
use checkin_planner::pareto::schedule_dominates;
use checkin_planner::plot;
use checkin_planner::schedule::Schedule;
use checkin_planner::search::{pareto_front_schedules, SearchConfig};
use checkin_planner::solver::PolicyKind;

fn main() -> checkin_planner::Result<()> {
    let world = grid_to_mdp(&corridor_world(&CorridorParams::default())?)?;
    print!("{}", world.render());

    let cfg = SearchConfig::new(vec![1, 2, 3, 4], 4, world.start.clone());
    let report = pareto_front_schedules(&world.mdp, &cfg)?;
    println!(
        "\n{} schedules searched in {:.2}s, {} on the final front",
        report.candidates.len(),
        report.telemetry.total_seconds,
        report.final_front().count()
    );

    let picks: Vec<Schedule> = ["(2)", "(3)", "22(3)"].iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    println!("\n{:<8} {:>14} {:>10} {:>14} {:>10}  front", "schedule", "exec-opt E", "C", "checkin-opt E", "C");
    for s in &picks {
        let c = report.candidate(s).expect("unfiltered runs keep every schedule");
        let ex = c.point(PolicyKind::Exec).unwrap();
        let ck = c.point(PolicyKind::Checkin).unwrap();
        println!(
            "{:<8} {:>14.3} {:>10.4} {:>14.1} {:>10.4}  {}",
            s.to_string(),
            ex.exec,
            ex.checkin,
            ck.exec,
            ck.checkin,
            c.on_final_front
        );
    }

    println!();
    for a in &picks {
        for b in &picks {
            if a == b {
                continue;
            }
            let ca = report.candidate(a).unwrap();
            let cb = report.candidate(b).unwrap();
            if schedule_dominates(&ca.realizable(), &cb.initial.optimistic) {
                println!("{a} dominates {b}");
            }
        }
    }

    let best = report
        .final_front()
        .map(|c| (c.point(PolicyKind::Exec).unwrap(), &c.schedule))
        .min_by(|a, b| a.0.exec.total_cmp(&b.0.exec))
        .unwrap();
    println!("\nlowest execution cost on the front: {} ({:.3})", best.1, best.0.exec);

    if let Some(path) = std::env::args().nth(1) {
        let series = plot::report_series(&report, 10);
        std::fs::write(&path, plot::render_svg("Corridor", &series)).map_err(|source| checkin_planner::Error::Io { path, source })?;
    }
    Ok(())
}
