//! Command-line front end: configuration loading and the `front`, `rollout`,
//! `sweep` and `gen-env` commands.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::envs::{self, CorridorParams, GridSpec, GridWorld, SplitterParams};
use crate::error::{Error, Result};
use crate::io;
use crate::model::{CompositeCache, CompositeLimits, Mdp, DEFAULT_MAX_MACRO_ACTIONS};
use crate::plot;
use crate::schedule::Schedule;
use crate::search::{self, DistributionSpec, SearchConfig, SearchReport};
use crate::sim::{self, RolloutStats, DEFAULT_HORIZON};
use crate::solver::{self, PolicyKind, SolveOptions};

/// Worker-count override for the rayon pool.
pub const THREADS_ENV: &str = "CHECKIN_PLANNER_THREADS";

/// Where the MDP comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvSource {
    Grid(GridSpec),
    Corridor(CorridorParams),
    Splitter(SplitterParams),
    /// Relative paths resolve against the config file's directory.
    MdpFile {
        path: PathBuf,
        /// Defaults to uniform over all states.
        #[serde(default)]
        initial: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSection {
    pub strides: Vec<usize>,
    pub length: usize,
    pub alphas: Vec<f64>,
    pub filter: bool,
    pub margin: f64,
    pub distributions: Vec<DistributionSpec>,
    pub eps: f64,
    pub max_iters: usize,
    pub max_macro_actions: usize,
    /// Override the environment's discounts.
    pub gamma_exec: Option<f64>,
    pub gamma_checkin: Option<f64>,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            strides: vec![1, 2, 3, 4],
            length: 4,
            alphas: vec![],
            filter: true,
            margin: 0.0,
            distributions: vec![DistributionSpec::Initial],
            eps: SolveOptions::default().eps,
            max_iters: SolveOptions::default().max_iters,
            max_macro_actions: DEFAULT_MAX_MACRO_ACTIONS,
            gamma_exec: None,
            gamma_checkin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub margins: Vec<f64>,
    /// Each entry is one filter distribution set, e.g. `["initial", "uniform"]`.
    pub distributions: Vec<Vec<DistributionSpec>>,
    /// Empty means the search section's alphas.
    pub alpha_sets: Vec<Vec<f64>>,
    /// Empty means the search section's length.
    pub lengths: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            margins: vec![0.0, 0.05, 0.1],
            distributions: vec![
                vec![DistributionSpec::Uniform],
                vec![DistributionSpec::Initial],
                vec![DistributionSpec::Initial, DistributionSpec::Uniform],
            ],
            alpha_sets: vec![],
            lengths: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvSource,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "yes")]
    pub plot: bool,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

/// A loaded environment.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub mdp: Arc<Mdp>,
    pub initial: Vec<f64>,
    pub grid: Option<GridWorld>,
}

/// Reads a config file. `output` and `mdp_file` paths become relative to it.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let mut cfg: RunConfig = io::parse_json(&io::read_text(path)?, &path.display().to_string())?;
    let base = path.parent().unwrap_or(Path::new(""));
    if let EnvSource::MdpFile { path: p, .. } = &mut cfg.env {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if cfg.output.is_relative() {
        cfg.output = base.join(&cfg.output);
    }
    Ok(cfg)
}

/// Loads the environment and applies the search section's discount overrides.
pub fn prepare(cfg: &RunConfig) -> Result<Loaded> {
    let mut env = load_env(&cfg.env)?;
    let s = &cfg.search;
    if s.gamma_exec.is_some() || s.gamma_checkin.is_some() {
        let ge = s.gamma_exec.unwrap_or(env.mdp.gamma_exec());
        let gc = s.gamma_checkin.unwrap_or(env.mdp.gamma_checkin());
        let mdp = env.mdp.with_discounts(ge, gc).map_err(|e| Error::Config(e.to_string()))?;
        env.mdp = Arc::new(mdp);
        env.grid = None;
    }
    Ok(env)
}

pub fn load_env(src: &EnvSource) -> Result<Loaded> {
    let from_grid = |spec: GridSpec| -> Result<Loaded> {
        let g = envs::grid_to_mdp(&spec)?;
        Ok(Loaded { mdp: Arc::clone(&g.mdp), initial: g.start.clone(), grid: Some(g) })
    };
    match src {
        EnvSource::Grid(spec) => from_grid(spec.clone()),
        EnvSource::Corridor(p) => from_grid(envs::corridor_world(p)?),
        EnvSource::Splitter(p) => from_grid(envs::splitter_world(p)?),
        EnvSource::MdpFile { path, initial } => {
            let mdp = io::load_mdp(path)?;
            let initial = initial.clone().unwrap_or_else(|| mdp.uniform_distribution());
            Ok(Loaded { mdp: Arc::new(mdp), initial, grid: None })
        }
    }
}

/// Command-line overrides of the config's search section.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Disable filtering (unfiltered truth run).
    #[arg(long)]
    pub no_filter: bool,
    #[arg(long)]
    pub margin: Option<f64>,
    /// Comma-separated alphas in (0, 1).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Maximum schedule length.
    #[arg(long)]
    pub length: Option<usize>,
    /// Comma-separated strides.
    #[arg(long, value_delimiter = ',')]
    pub strides: Option<Vec<usize>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.search;
        if self.no_filter {
            s.filter = false;
        }
        if let Some(m) = self.margin {
            s.margin = m;
        }
        if let Some(a) = &self.alphas {
            s.alphas = a.clone();
        }
        if let Some(l) = self.length {
            s.length = l;
        }
        if let Some(k) = &self.strides {
            s.strides = k.clone();
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
    }
}

/// Builds the search configuration for a loaded environment.
pub fn search_config(s: &SearchSection, env: &Loaded) -> Result<SearchConfig> {
    let n = env.mdp.n_states();
    let mut cfg = SearchConfig::new(s.strides.clone(), s.length, env.initial.clone()).with_alphas(s.alphas.clone());
    cfg.solve = SolveOptions { eps: s.eps, max_iters: s.max_iters };
    cfg.max_macro_actions = s.max_macro_actions;
    if s.filter {
        if s.distributions.is_empty() {
            return Err(Error::Config("filtering needs at least one distribution".into()));
        }
        let d = s.distributions.iter().map(|d| d.resolve(n, &env.initial)).collect();
        cfg = cfg.with_filter(d, s.margin);
    }
    cfg.validate(n)?;
    Ok(cfg)
}

pub struct FrontOutput {
    pub report: SearchReport,
    pub files: Vec<PathBuf>,
}

pub fn cmd_front(config: &Path, ov: &Overrides) -> Result<FrontOutput> {
    let mut cfg = load_config(config)?;
    ov.apply(&mut cfg);
    let env = prepare(&cfg)?;
    let scfg = search_config(&cfg.search, &env)?;
    let report = search::pareto_front_schedules(&env.mdp, &scfg)?;
    let mut files = vec![cfg.output.join("report.json"), cfg.output.join("front.csv"), cfg.output.join("telemetry.json")];
    io::write_text(&files[0], &io::to_json(&report)?)?;
    io::write_text(&files[1], &io::front_csv(&report))?;
    io::write_text(&files[2], &io::to_json(&report.telemetry)?)?;
    if cfg.plot {
        let path = cfg.output.join("front.svg");
        io::write_text(&path, &plot::render_svg("Final front", &plot::report_series(&report, 12)))?;
        files.push(path);
    }
    Ok(FrontOutput { report, files })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutOutput {
    pub schedule: String,
    pub policy: String,
    pub analytic_exec: f64,
    pub analytic_checkin: f64,
    pub truncation_bound_exec: f64,
    pub truncation_bound_checkin: f64,
    pub stats: RolloutStats,
}

pub struct RolloutArgs<'a> {
    pub schedule: &'a str,
    pub policy: &'a str,
    pub n: usize,
    pub seed: u64,
    pub horizon: usize,
}

pub fn cmd_rollout(config: &Path, a: &RolloutArgs) -> Result<RolloutOutput> {
    let schedule: Schedule = a.schedule.parse()?;
    let kind = PolicyKind::parse(a.policy).ok_or_else(|| Error::Domain(format!("unknown policy kind '{}'", a.policy)))?;
    let cfg = load_config(config)?;
    let env = prepare(&cfg)?;
    let alphas: Vec<f64> = kind.alpha().into_iter().collect();
    let cache = CompositeCache::new(
        Arc::clone(&env.mdp),
        CompositeLimits { stride_bound: schedule.max_stride(), max_macro_actions: cfg.search.max_macro_actions },
    );
    let opts = SolveOptions { eps: cfg.search.eps, max_iters: cfg.search.max_iters };
    let solved = solver::solve_schedule(&schedule, |k| Ok(cache.get(k)?), &alphas, &opts)?;
    let rec = solved.policy(kind).ok_or_else(|| Error::Domain(format!("no policy '{kind}' for {schedule}")))?;
    let stats = sim::rollout(&env.mdp, &schedule, rec, &env.initial, a.n, a.horizon, a.seed)?;
    let head = |v: &[f64]| v.iter().zip(&env.initial).map(|(x, p)| x * p).sum();
    let (te, tc) = sim::truncation_bound(&env.mdp, &schedule, a.horizon);
    Ok(RolloutOutput {
        schedule: schedule.to_string(),
        policy: kind.to_string(),
        analytic_exec: head(&rec.values.exec),
        analytic_checkin: head(&rec.values.checkin),
        truncation_bound_exec: te,
        truncation_bound_checkin: tc,
        stats,
    })
}

pub const SWEEP_CSV_HEADER: &str = "margin,distributions,alphas,length,runtime_s,f,quality";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// `None` for the unfiltered truth run.
    pub margin: Option<f64>,
    pub distributions: String,
    pub alphas: Vec<f64>,
    pub length: usize,
    pub runtime_s: f64,
    pub f: f64,
    pub quality: f64,
}

pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// Places where quality dropped as the margin grew.
    pub violations: Vec<String>,
    pub file: PathBuf,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in rows {
        let alphas = if r.alphas.is_empty() {
            "none".to_string()
        } else {
            r.alphas.iter().map(|a| io::fmt_float(*a)).collect::<Vec<_>>().join(";")
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.margin.map(io::fmt_float).unwrap_or_default(),
            r.distributions,
            alphas,
            r.length,
            io::fmt_float(r.runtime_s),
            io::fmt_float(r.f),
            io::fmt_float(r.quality)
        );
    }
    out
}

fn dist_label(d: &[DistributionSpec]) -> String {
    d.iter().map(|x| x.label()).collect::<Vec<_>>().join("+")
}

pub fn cmd_sweep(config: &Path, ov: &Overrides) -> Result<SweepOutput> {
    let mut cfg = load_config(config)?;
    ov.apply(&mut cfg);
    let sweep = cfg.sweep.clone().ok_or_else(|| Error::Config("config has no sweep section".into()))?;
    if sweep.margins.is_empty() || sweep.distributions.is_empty() {
        return Err(Error::Config("sweep needs at least one margin and one distribution set".into()));
    }
    let env = prepare(&cfg)?;
    let alpha_sets = if sweep.alpha_sets.is_empty() { vec![cfg.search.alphas.clone()] } else { sweep.alpha_sets.clone() };
    let lengths = if sweep.lengths.is_empty() { vec![cfg.search.length] } else { sweep.lengths.clone() };
    let mut margins = sweep.margins.clone();
    margins.sort_by(f64::total_cmp);

    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for &length in &lengths {
        for alphas in &alpha_sets {
            let base = SearchSection { length, alphas: alphas.clone(), ..cfg.search.clone() };
            let truth_cfg = search_config(&SearchSection { filter: false, ..base.clone() }, &env)?;
            let truth = search::pareto_front_schedules(&env.mdp, &truth_cfg)?;
            rows.push(SweepRow {
                margin: None,
                distributions: "none".into(),
                alphas: alphas.clone(),
                length,
                runtime_s: truth.telemetry.total_seconds,
                f: 0.0,
                quality: 1.0,
            });
            for dists in &sweep.distributions {
                let mut last: Option<f64> = None;
                for &margin in &margins {
                    let s = SearchSection { filter: true, margin, distributions: dists.clone(), ..base.clone() };
                    let rep = search::pareto_front_schedules(&env.mdp, &search_config(&s, &env)?)?;
                    let quality = search::quality_metric(&rep, &truth)?;
                    if let Some(q) = last.filter(|q| quality < *q) {
                        violations.push(format!(
                            "quality fell from {q} to {quality} at margin {margin} ({}, length {length})",
                            dist_label(dists)
                        ));
                    }
                    last = Some(quality);
                    rows.push(SweepRow {
                        margin: Some(margin),
                        distributions: dist_label(dists),
                        alphas: alphas.clone(),
                        length,
                        runtime_s: rep.telemetry.total_seconds,
                        f: rep.filtered_fraction,
                        quality,
                    });
                }
            }
        }
    }
    let file = cfg.output.join("sweep.csv");
    io::write_text(&file, &sweep_csv(&rows))?;
    Ok(SweepOutput { rows, violations, file })
}

pub struct GenEnvOutput {
    pub spec: GridSpec,
    pub ascii: String,
    pub files: Vec<PathBuf>,
}

/// Writes `<kind>.json` and `<kind>.txt` for `corridor` or `splitter`.
/// `params` is an optional JSON file of generator parameters.
pub fn cmd_gen_env(kind: &str, params: Option<&Path>, out: &Path) -> Result<GenEnvOutput> {
    let text = params.map(io::read_text).transpose()?;
    let spec = match kind {
        "corridor" => {
            let p: CorridorParams = text.map_or(Ok(CorridorParams::default()), |t| io::parse_json(&t, "corridor parameters"))?;
            envs::corridor_world(&p)?
        }
        "splitter" => {
            let p: SplitterParams = text.map_or(Ok(SplitterParams::default()), |t| io::parse_json(&t, "splitter parameters"))?;
            envs::splitter_world(&p)?
        }
        other => return Err(Error::Config(format!("unknown environment kind '{other}' (expected corridor or splitter)"))),
    };
    let world = envs::grid_to_mdp(&spec)?;
    let ascii = world.render();
    let files = vec![out.join(format!("{kind}.json")), out.join(format!("{kind}.txt"))];
    io::write_text(&files[0], &io::to_json(&spec)?)?;
    io::write_text(&files[1], &ascii)?;
    Ok(GenEnvOutput { spec, ascii, files })
}

#[derive(Debug, Parser)]
#[command(name = "checkin-planner", version, about = "Pareto fronts of check-in schedules for MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the schedule search and write report.json, front.csv and front.svg.
    Front {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Simulate one schedule's policy and compare with its analytic costs.
    Rollout {
        #[arg(long)]
        config: PathBuf,
        /// Schedule text, e.g. `22(3)`.
        #[arg(long)]
        schedule: String,
        /// `exec`, `checkin` or `alpha:<a>`.
        #[arg(long, default_value = "exec")]
        policy: String,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: usize,
        /// Also write the stats JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Margin / distribution / alpha sweep against an unfiltered truth run.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a generated grid world as JSON and ASCII.
    GenEnv {
        /// `corridor` or `splitter`.
        kind: String,
        /// JSON file with generator parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV}={v} is not a thread count")))?;
    // A pool may already exist when embedded; that is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    configure_threads()?;
    match cmd {
        Command::Front { config, overrides } => {
            let o = cmd_front(&config, &overrides)?;
            let r = &o.report;
            println!(
                "{} candidates, {} on the final front, f = {}",
                r.candidates.len(),
                r.final_front().count(),
                io::fmt_float(r.filtered_fraction)
            );
            for c in r.final_front() {
                println!("  {}", c.schedule);
            }
            for f in &o.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Rollout { config, schedule, policy, n, seed, horizon, out } => {
            let o = cmd_rollout(&config, &RolloutArgs { schedule: &schedule, policy: &policy, n, seed, horizon })?;
            let json = io::to_json(&o)?;
            if let Some(p) = out {
                io::write_text(&p, &json)?;
            }
            print!("{json}");
        }
        Command::Sweep { config, overrides } => {
            let o = cmd_sweep(&config, &overrides)?;
            for v in &o.violations {
                eprintln!("warning: {v}");
            }
            print!("{}", sweep_csv(&o.rows));
            println!("wrote {}", o.file.display());
        }
        Command::GenEnv { kind, config, out } => {
            let o = cmd_gen_env(&kind, config.as_deref(), &out)?;
            print!("{}", o.ascii);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
