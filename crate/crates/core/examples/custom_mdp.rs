//! Planning on a hand-written MDP loaded from JSON.
//!
//! A four-state chain where a "sprint" action is fast but sometimes slips
//! back to the start, and a "walk" action is slow and safe.
//!
//!     cargo run --release --example custom_mdp

use std::sync::Arc;

use checkin_planner::io::{self, MdpFile};
use checkin_planner::model::{CompositeCache, CompositeLimits};
use checkin_planner::schedule::Schedule;
use checkin_planner::search::{pareto_front_schedules, SearchConfig};
use checkin_planner::solver::{solve_schedule, PolicyKind, SolveOptions};

const MDP_JSON: &str = r#"{
  "n_states": 4, "n_actions": 2, "goal": [3],
  "gamma_exec": 0.95, "gamma_checkin": 0.9,
  "transitions": [
    [0, 0, 1, 0.9], [0, 0, 0, 0.1],  [0, 1, 2, 0.7], [0, 1, 0, 0.3],
    [1, 0, 2, 0.9], [1, 0, 1, 0.1],  [1, 1, 3, 0.7], [1, 1, 0, 0.3],
    [2, 0, 3, 0.9], [2, 0, 2, 0.1],  [2, 1, 3, 0.8], [2, 1, 0, 0.2],
    [3, 0, 3, 1.0], [3, 1, 3, 1.0]
  ],
  "costs": [[0, 0, 1], [1, 0, 1], [2, 0, 1], [0, 1, 1.5], [1, 1, 1.5], [2, 1, 1.5]]
}"#;

fn main() -> checkin_planner::Result<()> {
    let file: MdpFile = io::parse_json(MDP_JSON, "inline MDP")?;
    let mdp = Arc::new(file.to_mdp()?);
    let start = vec![1.0, 0.0, 0.0, 0.0];

    let cfg = SearchConfig::new(vec![1, 2, 3], 3, start.clone()).with_alphas(vec![0.25, 0.5, 0.75]);
    let report = pareto_front_schedules(&mdp, &cfg)?;
    println!("final front ({} of {} schedules):", report.final_front().count(), report.candidates.len());
    for c in report.final_front() {
        let pts: Vec<String> = c.realizable().iter().map(|p| format!("({:.3}, {:.3})", p.exec, p.checkin)).collect();
        println!("  {:<6} {}", c.schedule.to_string(), pts.join(" "));
    }

    // The layered policy of one schedule, spelled out per check-in.
    let schedule: Schedule = "1(2)".parse()?;
    let cache = CompositeCache::new(Arc::clone(&mdp), CompositeLimits::new(2));
    let solved = solve_schedule(&schedule, |k| Ok(cache.get(k)?), &[], &SolveOptions::default())?;
    let dump = io::policy_dump(&schedule, PolicyKind::Exec, solved.policy(PolicyKind::Exec).unwrap(), mdp.n_actions());
    print!("{}", io::to_json(&dump)?);
    Ok(())
}
