mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use checkin_planner::model::{build_composite, CompositeCache, CompositeLimits, Mdp};
use checkin_planner::pareto::{realizable_front, schedule_dominates, CostPoint};
use checkin_planner::schedule::Schedule;
use checkin_planner::search::{canonical_count, pareto_front_schedules, SearchConfig};
use checkin_planner::solver::{extend_alpha, solve_schedule, PolicyKind, SolveOptions, ValuePair};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn composite_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..15 {
        let n = rng.gen_range(2..=6);
        let a = rng.gen_range(1..=3);
        let ge = rng.gen_range(0.5..1.0);
        let mdp = random_mdp(&mut rng, n, a, ge, 0.9);
        for k in 1..=3 {
            let comp = build_composite(&mdp, k, &CompositeLimits::new(3)).unwrap();
            let t = table(&mdp, k);
            for s in 0..n {
                for (m, steps) in macros(a, k).iter().enumerate() {
                    assert_eq!(comp.macro_action(m).steps(), &steps[..]);
                    let dense = comp.row_dense(s, m);
                    for u in 0..n {
                        assert!((dense[u] - t.rows[s][m][u]).abs() < 1e-12, "row {s} {m} {u}");
                    }
                    if !mdp.is_goal(s) {
                        assert!(close(comp.exec_cost(s, m), t.exec[s][m], 1e-12));
                    }
                }
            }
        }
    }
}

#[test]
fn two_state_chain_costs() {
    // Self-loop with probability 1/2 at cost 1; stride 2 with gamma 0.5.
    let mdp = Mdp::from_triples(2, 1, &[(0, 0, 0, 0.5), (0, 0, 1, 0.5), (1, 0, 1, 1.0)], &[(0, 0, 1.0)], &[1], 0.5, 0.9)
        .unwrap();
    let comp = build_composite(&mdp, 2, &CompositeLimits::new(2)).unwrap();
    assert!((comp.exec_cost(0, 0) - 1.25).abs() < 1e-15);
    assert!((comp.row_dense(0, 0)[1] - 0.75).abs() < 1e-15);
    assert_eq!(comp.checkin_cost(0), 1.0);
    assert_eq!(comp.checkin_cost(1), 0.0);
}

#[test]
fn layered_values_match_exhaustive_policies() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let schedules = ["(1)", "(2)", "1(2)", "2(1)"];
    for trial in 0..20 {
        let n = rng.gen_range(2..=5);
        let (ge, gc) = (rng.gen_range(0.6..0.97), rng.gen_range(0.6..0.97));
        let mdp = Arc::new(random_mdp(&mut rng, n, 2, ge, gc));
        let cache = CompositeCache::new(Arc::clone(&mdp), CompositeLimits::new(2));
        for text in schedules {
            let s: Schedule = text.parse().unwrap();
            let solved = solve_schedule(&s, |k| Ok(cache.get(k)?), &[], &SolveOptions::default()).unwrap();
            let (be, bc) = brute_layered(&mdp, s.prefix(), s.tail());
            let ex = &solved.policy(PolicyKind::Exec).unwrap().values.exec;
            let ck = &solved.policy(PolicyKind::Checkin).unwrap().values.checkin;
            for st in 0..n {
                assert!(close(ex[st], be[st], 1e-6), "trial {trial} {text} exec s{st}: {} vs {}", ex[st], be[st]);
                assert!(close(ck[st], bc[st], 1e-6), "trial {trial} {text} checkin s{st}: {} vs {}", ck[st], bc[st]);
            }
        }
    }
}

#[test]
fn cross_evaluation_matches_linear_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let n = rng.gen_range(2..=5);
        let mdp = Arc::new(random_mdp(&mut rng, n, 2, 0.9, 0.8));
        let cache = CompositeCache::new(Arc::clone(&mdp), CompositeLimits::new(2));
        let s = Schedule::recurrent(2).unwrap();
        let solved = solve_schedule(&s, |k| Ok(cache.get(k)?), &[], &SolveOptions::default()).unwrap();
        let t = table(&mdp, 2);
        for rec in &solved.policies {
            let pol: Vec<usize> = rec.layers[0].iter().map(|&m| m as usize).collect();
            let (e, c) = eval_stationary(&mdp, &t, &pol);
            for st in 0..n {
                assert!(close(rec.values.exec[st], e[st], 1e-6));
                assert!(close(rec.values.checkin[st], c[st], 1e-6));
            }
        }
    }
}

#[test]
fn alpha_layer_minimizes_blend() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let mdp = random_mdp(&mut rng, 4, 2, 0.9, 0.85);
        let comp = build_composite(&mdp, 2, &CompositeLimits::new(2)).unwrap();
        let t = table(&mdp, 2);
        let suffix = ValuePair {
            exec: (0..4).map(|s| if mdp.is_goal(s) { 0.0 } else { rng.gen_range(-1.0..5.0) }).collect(),
            checkin: (0..4).map(|s| if mdp.is_goal(s) { 0.0 } else { rng.gen_range(1.0..3.0) }).collect(),
        };
        let alpha = rng.gen_range(0.05..0.95);
        let (layer, pair) = extend_alpha(&suffix, &comp, alpha).unwrap();
        let blend = |v: &(Vec<f64>, Vec<f64>), s: usize| alpha * v.0[s] + (1.0 - alpha) * v.1[s];
        let got = (pair.exec.clone(), pair.checkin.clone());
        let suf = (suffix.exec.clone(), suffix.checkin.clone());
        let mut best = vec![f64::INFINITY; 4];
        for l in all_policies(4, 4) {
            let v = eval_layer(&mdp, &t, &l, &suf);
            for s in 0..4 {
                best[s] = best[s].min(blend(&v, s));
            }
        }
        let chosen: Vec<usize> = layer.iter().map(|&m| m as usize).collect();
        let direct = eval_layer(&mdp, &t, &chosen, &suf);
        for s in 0..4 {
            assert!(close(blend(&got, s), best[s], 1e-9));
            assert!(close(direct.0[s], got.0[s], 1e-9) && close(direct.1[s], got.1[s], 1e-9));
        }
    }
}

#[test]
fn alpha_tail_is_scalarized_optimum_when_discounts_agree() {
    // gamma_checkin = gamma_exec^k makes the blend an ordinary discounted cost.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let ge: f64 = rng.gen_range(0.8..0.95);
        let mdp = Arc::new(random_mdp(&mut rng, 4, 2, ge, ge * ge));
        let cache = CompositeCache::new(Arc::clone(&mdp), CompositeLimits::new(2));
        let alphas = [0.2, 0.5, 0.8];
        let s = Schedule::recurrent(2).unwrap();
        let solved = solve_schedule(&s, |k| Ok(cache.get(k)?), &alphas, &SolveOptions::default()).unwrap();
        let t = table(&mdp, 2);
        let all: Vec<_> = all_policies(4, 4).iter().map(|p| eval_stationary(&mdp, &t, p)).collect();
        for &a in &alphas {
            let rec = solved.policy(PolicyKind::Alpha(a)).unwrap();
            for st in 0..4 {
                let got = a * rec.values.exec[st] + (1.0 - a) * rec.values.checkin[st];
                let best = all.iter().map(|v| a * v.0[st] + (1.0 - a) * v.1[st]).fold(f64::INFINITY, f64::min);
                assert!(close(got, best, 1e-6), "alpha {a} s{st}: {got} vs {best}");
                // No known policy beats it under the same blend.
                for other in &solved.policies {
                    let o = a * other.values.exec[st] + (1.0 - a) * other.values.checkin[st];
                    assert!(got <= o + 1e-6 * o.abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn realizable_front_matches_quadratic_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let n = rng.gen_range(1..12);
        let pts: Vec<CostPoint> =
            (0..n).map(|_| CostPoint::new(rng.gen_range(0..6) as f64, rng.gen_range(0..6) as f64)).collect();
        let mut want: Vec<CostPoint> = Vec::new();
        for p in &pts {
            if !pts.iter().any(|q| q.dominates(p)) && !want.iter().any(|w| w.near(p)) {
                want.push(*p);
            }
        }
        want.sort_by(|a, b| a.exec.total_cmp(&b.exec).then(b.checkin.total_cmp(&a.checkin)));
        let got = realizable_front(&pts);
        assert_eq!(got.len(), want.len(), "{pts:?}");
        for (g, w) in got.iter().zip(&want) {
            assert!(g.near(w));
        }
    }
}

#[test]
fn schedule_dominance_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let a: Vec<CostPoint> = (0..rng.gen_range(1..4)).map(|_| CostPoint::new(rng.gen_range(0..5) as f64, rng.gen_range(0..5) as f64)).collect();
        let b: Vec<CostPoint> = (0..rng.gen_range(1..4)).map(|_| CostPoint::new(rng.gen_range(0..5) as f64, rng.gen_range(0..5) as f64)).collect();
        let mut want = true;
        for v in &b {
            let mut covered = false;
            for p in &a {
                if p.exec < v.exec && p.checkin < v.checkin {
                    covered = true;
                }
            }
            want &= covered;
        }
        assert_eq!(schedule_dominates(&a, &b), want);
    }
}

#[test]
fn canonical_count_matches_enumeration() {
    for k in 1..=4usize {
        for n in 1..=5usize {
            let mut set = BTreeSet::new();
            for len in 1..=n {
                let total = k.pow(len as u32);
                for mut i in 0..total {
                    let seq: Vec<usize> = (0..len)
                        .map(|_| {
                            let d = i % k + 1;
                            i /= k;
                            d
                        })
                        .collect();
                    let (tail, prefix) = seq.split_last().unwrap();
                    set.insert(Schedule::new(prefix.to_vec(), *tail).unwrap());
                }
            }
            assert_eq!(set.len(), canonical_count(k, n), "k={k} n={n}");
        }
    }
    assert_eq!(canonical_count(3, 6), 729);
    assert_eq!(canonical_count(4, 4), 256);
}

#[test]
fn unfiltered_stage_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mdp = Arc::new(random_mdp(&mut rng, 4, 2, 0.9, 0.9));
    let mut init = vec![0.0; 4];
    init[0] = 1.0;
    let rep = pareto_front_schedules(&mdp, &SearchConfig::new(vec![1, 2, 3], 4, init)).unwrap();
    let k = 3;
    assert_eq!(rep.total_generated, canonical_count(k, 4));
    assert_eq!(rep.stages[0].generated_raw, k);
    assert_eq!(rep.stages[1].generated_raw, k * k);
    for w in rep.stages.windows(2) {
        assert_eq!(w[1].generated_raw, w[0].generated * k);
        assert_eq!(w[1].generated, (k - 1) * k.pow(w[1].stage as u32));
    }
    assert_eq!(rep.total_dropped, 0);
}

#[test]
fn checkin_index_matches_expansion() {
    for text in ["(1)", "(3)", "12(2)", "321(1)", "2(4)"] {
        let s: Schedule = text.parse().unwrap();
        let strides = s.expand(64);
        for t in 0..60u64 {
            let mut elapsed = 0u64;
            let mut k = 0u64;
            while t >= elapsed {
                elapsed += strides[k as usize] as u64;
                k += 1;
            }
            assert_eq!(s.checkin_index(t), k, "{text} t={t}");
        }
    }
}
