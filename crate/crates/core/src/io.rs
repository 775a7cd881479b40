//! File formats: MDP JSON, result JSON, front CSV and policy dumps.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{MacroAction, Mdp};
use crate::search::SearchReport;
use crate::solver::{PolicyKind, PolicyRecord};

/// On-disk MDP: transitions as `[s, a, s', p]`, costs as `[s, a, c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub goal: Vec<usize>,
    pub gamma_exec: f64,
    pub gamma_checkin: f64,
    pub transitions: Vec<(usize, usize, usize, f64)>,
    #[serde(default)]
    pub costs: Vec<(usize, usize, f64)>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &Mdp) -> Self {
        let mut transitions = Vec::new();
        let mut costs = Vec::new();
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                transitions.extend(mdp.row(s, a).iter().map(|&(t, p)| (s, a, t, p)));
                let c = mdp.cost(s, a);
                if c != 0.0 {
                    costs.push((s, a, c));
                }
            }
        }
        Self {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            goal: mdp.goal_states().collect(),
            gamma_exec: mdp.gamma_exec(),
            gamma_checkin: mdp.gamma_checkin(),
            transitions,
            costs,
        }
    }

    pub fn to_mdp(&self) -> Result<Mdp> {
        Ok(Mdp::from_triples(
            self.n_states,
            self.n_actions,
            &self.transitions,
            &self.costs,
            &self.goal,
            self.gamma_exec,
            self.gamma_checkin,
        )?)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{what}: {e}")))
}

pub fn load_mdp(path: &Path) -> Result<Mdp> {
    let file: MdpFile = parse_json(&read_text(path)?, &path.display().to_string())?;
    file.to_mdp()
}

/// Rounds to 12 significant digits, then prints the shortest text that
/// round-trips the rounded value.
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    format!("{}", round12(x))
}

fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round12).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(round_value),
        Value::Object(m) => m.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Internal(e.to_string()))?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub const FRONT_CSV_HEADER: &str = "schedule,policy_kind,alpha,distribution_id,exec_cost,checkin_cost,on_final_front";

/// One row per (schedule, policy, distribution). Distribution 0 is the
/// initial distribution; `i + 1` is the i-th filter distribution.
pub fn front_csv(report: &SearchReport) -> String {
    let mut out = String::from(FRONT_CSV_HEADER);
    out.push('\n');
    for c in &report.candidates {
        let mut fronts = vec![&c.initial];
        if let Some(f) = &c.filter_fronts {
            fronts.extend(f.iter());
        }
        for (d, front) in fronts.into_iter().enumerate() {
            for (kind, p) in c.kinds.iter().zip(&front.points) {
                let alpha = kind.alpha().map(fmt_float).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    c.schedule,
                    kind.label(),
                    alpha,
                    d,
                    fmt_float(p.exec),
                    fmt_float(p.checkin),
                    c.on_final_front
                );
            }
        }
    }
    out
}

/// A layered policy with its macro actions spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDump {
    pub schedule: String,
    pub policy: String,
    /// `layers[i][s]` is the action sequence taken from state `s` at check-in `i`.
    pub layers: Vec<Vec<Vec<usize>>>,
    pub value_exec: Vec<f64>,
    pub value_checkin: Vec<f64>,
}

pub fn policy_dump(schedule: &crate::schedule::Schedule, kind: PolicyKind, rec: &PolicyRecord, n_actions: usize) -> PolicyDump {
    let layers = rec
        .layers
        .iter()
        .enumerate()
        .map(|(i, layer)| {
            let k = schedule.stride(i);
            layer.iter().map(|&m| MacroAction::from_index(m as usize, k, n_actions).steps().to_vec()).collect()
        })
        .collect();
    PolicyDump {
        schedule: schedule.to_string(),
        policy: kind.to_string(),
        layers,
        value_exec: rec.values.exec.clone(),
        value_checkin: rec.values.checkin.clone(),
    }
}
