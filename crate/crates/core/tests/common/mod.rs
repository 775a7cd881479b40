//! Brute-force oracles shared by the integration tests. Nothing here uses the
//! composite machinery: macro effects come from explicit path enumeration.

#![allow(dead_code)]

use checkin_planner::model::Mdp;
use rand::Rng;

/// Random MDP whose last state is the only goal.
pub fn random_mdp<R: Rng>(rng: &mut R, n_states: usize, n_actions: usize, gamma_exec: f64, gamma_checkin: f64) -> Mdp {
    let goal = n_states - 1;
    let mut trans = Vec::new();
    let mut costs = Vec::new();
    for s in 0..n_states {
        for a in 0..n_actions {
            if s == goal {
                trans.push((s, a, s, 1.0));
                continue;
            }
            let k = rng.gen_range(1..=3.min(n_states));
            let mut w: Vec<(usize, f64)> = (0..k).map(|_| (rng.gen_range(0..n_states), rng.gen_range(0.1..1.0))).collect();
            let total: f64 = w.iter().map(|x| x.1).sum();
            for x in &mut w {
                x.1 /= total;
            }
            // Make the last entry absorb rounding so rows sum to 1.
            let head: f64 = w[..k - 1].iter().map(|x| x.1).sum();
            w[k - 1].1 = 1.0 - head;
            for (t, p) in w {
                trans.push((s, a, t, p));
            }
            costs.push((s, a, rng.gen_range(-0.5..2.0)));
        }
    }
    Mdp::from_triples(n_states, n_actions, &trans, &costs, &[goal], gamma_exec, gamma_checkin).unwrap()
}

/// Distribution after `steps` from `s` and the expected discounted cost,
/// by recursion over every state path.
pub fn macro_by_paths(mdp: &Mdp, s: usize, steps: &[usize]) -> (Vec<f64>, f64) {
    let mut dist = vec![0.0; mdp.n_states()];
    let mut cost = 0.0;
    fn walk(mdp: &Mdp, s: usize, steps: &[usize], j: usize, p: f64, dist: &mut [f64], cost: &mut f64) {
        if j == steps.len() {
            dist[s] += p;
            return;
        }
        *cost += p * mdp.gamma_exec().powi(j as i32) * mdp.cost(s, steps[j]);
        for &(t, q) in mdp.row(s, steps[j]) {
            walk(mdp, t, steps, j + 1, p * q, dist, cost);
        }
    }
    walk(mdp, s, steps, 0, 1.0, &mut dist, &mut cost);
    (dist, cost)
}

/// All macros of length `k`, base-|A| little-endian order.
pub fn macros(n_actions: usize, k: usize) -> Vec<Vec<usize>> {
    let total = n_actions.pow(k as u32);
    (0..total)
        .map(|mut i| {
            (0..k)
                .map(|_| {
                    let a = i % n_actions;
                    i /= n_actions;
                    a
                })
                .collect()
        })
        .collect()
}

/// Per-(state, macro) transition rows and exec costs for stride `k`.
pub struct Table {
    pub k: usize,
    pub rows: Vec<Vec<Vec<f64>>>,
    pub exec: Vec<Vec<f64>>,
}

pub fn table(mdp: &Mdp, k: usize) -> Table {
    let ms = macros(mdp.n_actions(), k);
    let mut rows = Vec::new();
    let mut exec = Vec::new();
    for s in 0..mdp.n_states() {
        let (r, c): (Vec<_>, Vec<_>) = ms.iter().map(|m| macro_by_paths(mdp, s, m)).unzip();
        rows.push(r);
        exec.push(c);
    }
    Table { k, rows, exec }
}

pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// Exact (exec, checkin) values of a stationary stride-`t.k` policy.
pub fn eval_stationary(mdp: &Mdp, t: &Table, policy: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = mdp.n_states();
    let ge = mdp.gamma_exec().powi(t.k as i32);
    let gc = mdp.gamma_checkin();
    let system = |g: f64, c: &dyn Fn(usize) -> f64| {
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for s in 0..n {
            a[s][s] = 1.0;
            if mdp.is_goal(s) {
                continue;
            }
            for (u, p) in t.rows[s][policy[s]].iter().enumerate() {
                a[s][u] -= g * p;
            }
            b[s] = c(s);
        }
        solve_linear(a, b)
    };
    let e = system(ge, &|s| t.exec[s][policy[s]]);
    let c = system(gc, &|_| 1.0);
    (e, c)
}

/// One layer of stride `t.k` in front of suffix values.
pub fn eval_layer(mdp: &Mdp, t: &Table, layer: &[usize], suffix: &(Vec<f64>, Vec<f64>)) -> (Vec<f64>, Vec<f64>) {
    let ge = mdp.gamma_exec().powi(t.k as i32);
    let gc = mdp.gamma_checkin();
    let n = mdp.n_states();
    let mut e = vec![0.0; n];
    let mut c = vec![0.0; n];
    for s in 0..n {
        if mdp.is_goal(s) {
            continue;
        }
        let row = &t.rows[s][layer[s]];
        e[s] = t.exec[s][layer[s]] + ge * row.iter().zip(&suffix.0).map(|(p, v)| p * v).sum::<f64>();
        c[s] = 1.0 + gc * row.iter().zip(&suffix.1).map(|(p, v)| p * v).sum::<f64>();
    }
    (e, c)
}

/// Every deterministic per-state choice among `m` options.
pub fn all_policies(n: usize, m: usize) -> Vec<Vec<usize>> {
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut i| {
            (0..n)
                .map(|_| {
                    let a = i % m;
                    i /= m;
                    a
                })
                .collect()
        })
        .collect()
}

/// Per-state minimum head value over every layered deterministic policy of
/// the schedule `prefix` then recurrent `tail`, for exec and checkin.
pub fn brute_layered(mdp: &Mdp, prefix: &[usize], tail: usize) -> (Vec<f64>, Vec<f64>) {
    let n = mdp.n_states();
    let tt = table(mdp, tail);
    let mut tails: Vec<(Vec<f64>, Vec<f64>)> =
        all_policies(n, tt.exec[0].len()).iter().map(|p| eval_stationary(mdp, &tt, p)).collect();
    for &k in prefix.iter().rev() {
        let t = table(mdp, k);
        let layers = all_policies(n, t.exec[0].len());
        tails = tails.iter().flat_map(|suf| layers.iter().map(|l| eval_layer(mdp, &t, l, suf))).collect();
    }
    let mut best_e = vec![f64::INFINITY; n];
    let mut best_c = vec![f64::INFINITY; n];
    for (e, c) in &tails {
        for s in 0..n {
            best_e[s] = best_e[s].min(e[s]);
            best_c[s] = best_c[s].min(c[s]);
        }
    }
    (best_e, best_c)
}
