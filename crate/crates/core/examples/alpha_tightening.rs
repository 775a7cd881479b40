//! Alpha-scalarized policies add supporting lines that cut the optimistic
//! region of a schedule. Areas are taken inside the box spanned by the
//! exec-optimal and checkin-optimal points.
//!
//!     cargo run --release --example alpha_tightening

use checkin_planner::envs::{corridor_world, grid_to_mdp, CorridorParams};
use checkin_planner::pareto::{optimistic_area, optimistic_area_exact, CostPoint};
use checkin_planner::search::{pareto_front_schedules, SearchConfig};
use checkin_planner::solver::PolicyKind;

fn main() -> checkin_planner::Result<()> {
    let world = grid_to_mdp(&corridor_world(&CorridorParams::default())?)?;
    let cfg = SearchConfig::new(vec![1, 2, 3, 4], 4, world.start.clone());
    let alphas: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    let plain = pareto_front_schedules(&world.mdp, &cfg)?;
    let cut = pareto_front_schedules(&world.mdp, &cfg.clone().with_alphas(alphas))?;

    println!("{:<8} {:>12} {:>12} {:>12} {:>10}", "schedule", "area", "with alphas", "cut", "sampled");
    let (mut shrunk, mut same, mut grown) = (0, 0, 0);
    for (a, b) in plain.candidates.iter().zip(&cut.candidates) {
        let ex = a.point(PolicyKind::Exec).unwrap();
        let ck = a.point(PolicyKind::Checkin).unwrap();
        let (lo, hi) = (CostPoint::new(ex.exec, ck.checkin), CostPoint::new(ck.exec, ex.checkin));
        let a0 = optimistic_area_exact(&a.initial.optimistic, lo, hi);
        let a1 = optimistic_area_exact(&b.initial.optimistic, lo, hi);
        match a1.partial_cmp(&a0) {
            Some(std::cmp::Ordering::Less) => shrunk += 1,
            Some(std::cmp::Ordering::Greater) => grown += 1,
            _ => same += 1,
        }
        if a.schedule.len() == 1 || ["22(3)", "1(4)", "2(1)"].contains(&a.schedule.to_string().as_str()) {
            let mc = optimistic_area(&b.initial.optimistic, lo, hi, 200_000, 1);
            println!("{:<8} {:>12.4} {:>12.4} {:>12.3e} {:>10.4}", a.schedule.to_string(), a0, a1, a0 - a1, mc);
        }
    }
    println!("{} schedules: {shrunk} shrank, {same} unchanged, {grown} grew", plain.candidates.len());
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-6 * x.abs().max(1.0);
    let alpha_equals_exec = cut.candidates.iter().all(|c| {
        let ex = c.point(PolicyKind::Exec).unwrap();
        c.kinds.iter().zip(&c.initial.points).filter(|(k, _)| k.alpha().is_some()).all(|(_, p)| close(p.exec, ex.exec) && close(p.checkin, ex.checkin))
    });
    println!("every alpha policy lands on the exec-optimal point: {alpha_equals_exec}");
    Ok(())
}
