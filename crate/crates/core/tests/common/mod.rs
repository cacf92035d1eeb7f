//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use num_traits::{One, Zero};
use wmp_core::bp::BpCertificate;
use wmp_core::graph::CollapsedMdp;
use wmp_core::lasso::{lasso_value, Lasso};
use wmp_core::rational::{int, rat, Rational};
use wmp_core::strategy::MealyStrategy;
use wmp_core::{Mdp, Objective, Vertex};

/// Values of the mean-payoff game where random vertices are adversarial, by enumerating
/// every pair of memoryless strategies.
pub fn mp_brute_force(mdp: &Mdp) -> Vec<Rational> {
    let n = mdp.num_vertices();
    let succ: Vec<Vec<Vertex>> = mdp.vertices().map(|v| mdp.successors(v).collect()).collect();
    let players: Vec<Vertex> = mdp.player_vertices().collect();
    let randoms: Vec<Vertex> = mdp.vertices().filter(|&v| !mdp.is_player(v)).collect();
    let all_choices = |vs: &[Vertex]| -> Vec<Vec<Vertex>> {
        let mut out = vec![vec![0; n]];
        for &v in vs {
            out = out
                .into_iter()
                .flat_map(|c| {
                    succ[v].iter().map(move |&u| {
                        let mut c = c.clone();
                        c[v] = u;
                        c
                    })
                })
                .collect();
        }
        out
    };
    let outcome = |sigma: &[Vertex], tau: &[Vertex], v: Vertex| -> Rational {
        let next = |x: Vertex| if mdp.is_player(x) { sigma[x] } else { tau[x] };
        let mut seen = HashMap::new();
        let mut path = vec![v];
        let mut x = v;
        loop {
            if let Some(&i) = seen.get(&x) {
                let cycle = &path[i..path.len() - 1];
                let sum: i64 = cycle.iter().map(|&a| mdp.weight(a, next(a)).unwrap()).sum();
                return rat(sum, cycle.len() as i64);
            }
            seen.insert(x, path.len() - 1);
            x = next(x);
            path.push(x);
        }
    };
    let sigmas = all_choices(&players);
    let taus = all_choices(&randoms);
    (0..n)
        .map(|v| {
            sigmas
                .iter()
                .map(|s| taus.iter().map(|t| outcome(s, t, v)).min().unwrap())
                .max()
                .unwrap()
        })
        .collect()
}

/// Probability of no `m` consecutive tails in `n` tosses, by enumerating all outcomes.
pub fn tails_by_enumeration(p: &Rational, m: usize, n: usize) -> Rational {
    let q = Rational::one() - p;
    let mut total = Rational::zero();
    for bits in 0u32..(1 << n) {
        let (mut run, mut ok) = (0, true);
        let mut weight = Rational::one();
        for i in 0..n {
            if bits >> i & 1 == 1 {
                run += 1;
                weight *= &q;
                if run >= m {
                    ok = false;
                    break;
                }
            } else {
                run = 0;
                weight *= p;
            }
        }
        if ok {
            total += weight;
        }
    }
    total
}

/// Product of a strategy with the model: nodes `(state before reading v, v)` reachable from `start`,
/// edges labelled with payoff and probability.
pub struct Product {
    pub nodes: Vec<(usize, Vertex)>,
    pub succ: Vec<Vec<(usize, i64, Rational)>>,
}

pub fn product(mdp: &Mdp, s: &MealyStrategy, start: Vertex) -> Product {
    let mut index = HashMap::new();
    let mut nodes = vec![(s.initial(), start)];
    index.insert(nodes[0], 0);
    let mut succ = Vec::new();
    let mut i = 0;
    while i < nodes.len() {
        let (q, v) = nodes[i];
        let q2 = s.next(q, v).expect("strategy defined along its runs");
        let targets: Vec<(Vertex, Rational)> = if mdp.is_player(v) {
            s.output(q, v).expect("strategy defined along its runs").clone()
        } else {
            mdp.successors(v).map(|u| (u, mdp.prob(v, u))).collect()
        };
        let mut row = Vec::new();
        for (u, pr) in targets {
            let key = (q2, u);
            let j = *index.entry(key).or_insert_with(|| {
                nodes.push(key);
                nodes.len() - 1
            });
            row.push((j, mdp.weight(v, u).unwrap(), pr));
        }
        succ.push(row);
        i += 1;
    }
    Product { nodes, succ }
}

/// Product with a tracker of the earliest open `λ`-window. An edge fails when it leaves a
/// window open for `l` steps; the tracker then restarts.
struct Tracked {
    base: Vec<usize>,
    succ: Vec<Vec<(usize, bool, Rational)>>,
}

fn track_windows(p: &Product, from: usize, l: usize, lambda: &Rational) -> Tracked {
    let (a, b): (i64, i64) = (lambda.numer().try_into().unwrap(), lambda.denom().try_into().unwrap());
    type S = (usize, Option<(usize, i64)>);
    let mut index: HashMap<S, usize> = HashMap::from([((from, None), 0)]);
    let mut states: Vec<S> = vec![(from, None)];
    let mut succ = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let (x, open) = states[i];
        let mut row = Vec::new();
        for (y, w, pr) in &p.succ[x] {
            let (steps, sum) = open.unwrap_or((0, 0));
            let (steps, sum) = (steps + 1, sum + b * w - a);
            let (next, fail) = if sum >= 0 {
                (None, false)
            } else if steps >= l {
                (None, true)
            } else {
                (Some((steps, sum)), false)
            };
            let key = (*y, next);
            let j = *index.entry(key).or_insert_with(|| {
                states.push(key);
                states.len() - 1
            });
            row.push((j, fail, pr.clone()));
        }
        succ.push(row);
        i += 1;
    }
    Tracked {
        base: states.iter().map(|s| s.0).collect(),
        succ,
    }
}

fn scc_ids(succ: &[Vec<usize>]) -> Vec<usize> {
    let mut g = petgraph::graph::DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..succ.len()).map(|_| g.add_node(())).collect();
    for (u, row) in succ.iter().enumerate() {
        for &v in row {
            g.add_edge(nodes[u], nodes[v], ());
        }
    }
    let mut comp = vec![0; succ.len()];
    for (c, scc) in petgraph::algo::tarjan_scc(&g).into_iter().enumerate() {
        for x in scc {
            comp[x.index()] = c;
        }
    }
    comp
}

/// Component id of each node and whether that component is bottom.
fn bottom_components(succ: &[Vec<usize>]) -> (Vec<usize>, Vec<bool>) {
    let comp = scc_ids(succ);
    let k = comp.iter().max().map_or(0, |m| m + 1);
    let mut bottom = vec![true; k];
    for (u, row) in succ.iter().enumerate() {
        for &v in row {
            if comp[u] != comp[v] {
                bottom[comp[u]] = false;
            }
        }
    }
    (comp, bottom)
}

fn fail_inside(t: &Tracked, bottom_only: bool) -> bool {
    let plain: Vec<Vec<usize>> = t.succ.iter().map(|r| r.iter().map(|e| e.0).collect()).collect();
    let (comp, bottom) = bottom_components(&plain);
    t.succ.iter().enumerate().any(|(u, row)| {
        row.iter()
            .any(|(v, fail, _)| *fail && comp[u] == comp[*v] && (!bottom_only || bottom[comp[u]]))
    })
}

/// Whether every run of `s` from `start` has objective value at least `lambda`,
/// whatever the random vertices do.
pub fn surely_wins(mdp: &Mdp, s: &MealyStrategy, start: Vertex, objective: Objective, lambda: &Rational) -> bool {
    let p = product(mdp, s, start);
    match objective {
        Objective::Fwmp(l) => !fail_inside(&track_windows(&p, 0, l, lambda), false),
        Objective::Bwmp => min_cycle_mean(&p, &vec![true; p.nodes.len()]).is_none_or(|m| m >= *lambda),
    }
}

/// Objective value of almost every run that ends in the bottom component of product node `x`.
fn bottom_value(p: &Product, members: &[bool], x: usize, objective: Objective, max_weight: i64) -> Rational {
    match objective {
        Objective::Bwmp => min_cycle_mean(p, members).expect("bottom components contain a cycle"),
        Objective::Fwmp(l) => {
            let w = max_weight;
            let mut candidates: Vec<Rational> = (1..=l as i64)
                .flat_map(|j| (-w * j..=w * j).map(move |k| rat(k, j)))
                .collect();
            candidates.sort();
            candidates.dedup();
            candidates
                .into_iter()
                .rev()
                .find(|lam| !fail_inside(&track_windows(p, x, l, lam), true))
                .expect("the least payoff is always met")
        }
    }
}

/// Probability of absorption into each target, solving `x = P x` exactly over transient nodes.
fn absorption(succ: &[Vec<(usize, Rational)>], target_value: &[Option<Rational>], start: usize) -> Rational {
    let n = succ.len();
    let transient: Vec<usize> = (0..n).filter(|&u| target_value[u].is_none()).collect();
    if let Some(v) = &target_value[start] {
        return v.clone();
    }
    let pos: HashMap<usize, usize> = transient.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let k = transient.len();
    let mut a = vec![vec![Rational::zero(); k + 1]; k];
    for (i, &u) in transient.iter().enumerate() {
        a[i][i] += Rational::one();
        for (v, pr) in &succ[u] {
            match &target_value[*v] {
                Some(val) => a[i][k] += pr * val,
                None => a[i][pos[v]] -= pr,
            }
        }
    }
    for c in 0..k {
        let r = (c..k).find(|&r| !a[r][c].is_zero()).expect("transient system is regular");
        a.swap(c, r);
        let pivot = a[c][c].clone();
        for x in a[c].iter_mut() {
            *x /= &pivot;
        }
        for r in 0..k {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                for j in c..=k {
                    let d = &f * &a[c][j];
                    a[r][j] -= d;
                }
            }
        }
    }
    a[pos[&start]][k].clone()
}

/// Probability that a run of `s` from `start` has objective value at least `lambda`.
pub fn satisfaction_probability(
    mdp: &Mdp,
    s: &MealyStrategy,
    start: Vertex,
    objective: Objective,
    lambda: &Rational,
) -> Rational {
    let p = product(mdp, s, start);
    match objective {
        Objective::Fwmp(l) => {
            let t = track_windows(&p, 0, l, lambda);
            let plain: Vec<Vec<usize>> = t.succ.iter().map(|r| r.iter().map(|e| e.0).collect()).collect();
            let (comp, bottom) = bottom_components(&plain);
            let mut bad = vec![false; bottom.len()];
            for (u, row) in t.succ.iter().enumerate() {
                for (v, fail, _) in row {
                    if *fail && comp[u] == comp[*v] {
                        bad[comp[u]] = true;
                    }
                }
            }
            let target: Vec<Option<Rational>> = comp
                .iter()
                .map(|&c| bottom[c].then(|| if bad[c] { int(0) } else { int(1) }))
                .collect();
            let succ: Vec<Vec<(usize, Rational)>> =
                t.succ.iter().map(|r| r.iter().map(|(v, _, pr)| (*v, pr.clone())).collect()).collect();
            absorption(&succ, &target, 0)
        }
        Objective::Bwmp => {
            let target = bottom_targets(&p, |members, _| {
                if min_cycle_mean(&p, members).unwrap() >= *lambda {
                    int(1)
                } else {
                    int(0)
                }
            });
            absorption(&plain_succ(&p), &target, 0)
        }
    }
}

/// Expected objective value of a run of `s` from `start`.
pub fn expected_value(mdp: &Mdp, s: &MealyStrategy, start: Vertex, objective: Objective) -> Rational {
    let p = product(mdp, s, start);
    let w = mdp.max_abs_weight();
    let target = bottom_targets(&p, |members, x| bottom_value(&p, members, x, objective, w));
    absorption(&plain_succ(&p), &target, 0)
}

fn plain_succ(p: &Product) -> Vec<Vec<(usize, Rational)>> {
    p.succ.iter().map(|r| r.iter().map(|(v, _, pr)| (*v, pr.clone())).collect()).collect()
}

fn bottom_targets(p: &Product, value: impl Fn(&[bool], usize) -> Rational) -> Vec<Option<Rational>> {
    let plain: Vec<Vec<usize>> = p.succ.iter().map(|r| r.iter().map(|e| e.0).collect()).collect();
    let (comp, bottom) = bottom_components(&plain);
    let mut cache: HashMap<usize, Rational> = HashMap::new();
    (0..p.nodes.len())
        .map(|x| {
            let c = comp[x];
            bottom[c].then(|| {
                cache
                    .entry(c)
                    .or_insert_with(|| value(&comp.iter().map(|&d| d == c).collect::<Vec<_>>(), x))
                    .clone()
            })
        })
        .collect()
}

/// Minimum cycle mean among product nodes in `members` (Karp).
pub fn min_cycle_mean(p: &Product, members: &[bool]) -> Option<Rational> {
    let n = p.nodes.len();
    let inf = i64::MAX / 4;
    let mut d = vec![vec![inf; n]; n + 1];
    d[0] = members.iter().map(|&m| if m { 0 } else { inf }).collect();
    for k in 1..=n {
        for u in 0..n {
            if !members[u] || d[k - 1][u] >= inf {
                continue;
            }
            for &(v, w, _) in &p.succ[u] {
                if members[v] {
                    d[k][v] = d[k][v].min(d[k - 1][u] + w);
                }
            }
        }
    }
    (0..n)
        .filter(|&v| members[v] && d[n][v] < inf)
        .map(|v| {
            (0..n)
                .filter(|&k| d[k][v] < inf)
                .map(|k| rat(d[n][v] - d[k][v], (n - k) as i64))
                .max()
                .unwrap()
        })
        .min()
}

/// Elementary cycles of the product, projected to vertex cycles (at most `limit`).
pub fn product_cycles(p: &Product, limit: usize) -> Vec<Vec<Vertex>> {
    let n = p.nodes.len();
    let mut out = Vec::new();
    for root in 0..n {
        let mut stack = vec![(root, 0usize)];
        let mut on_path = HashSet::from([root]);
        let mut path = vec![root];
        while let Some(&mut (u, ref mut i)) = stack.last_mut() {
            if out.len() >= limit {
                return out;
            }
            if *i < p.succ[u].len() {
                let v = p.succ[u][*i].0;
                *i += 1;
                if v == root {
                    out.push(path.iter().map(|&x| p.nodes[x].1).collect());
                } else if v > root && !on_path.contains(&v) {
                    on_path.insert(v);
                    path.push(v);
                    stack.push((v, 0));
                }
            } else {
                stack.pop();
                on_path.remove(&u);
                path.pop();
            }
        }
    }
    out
}

/// Every elementary cycle of the strategy product has lasso value at least `lambda`.
pub fn cycles_meet(mdp: &Mdp, s: &MealyStrategy, start: Vertex, objective: Objective, lambda: &Rational) -> bool {
    let p = product(mdp, s, start);
    product_cycles(&p, 20_000)
        .into_iter()
        .all(|c| lasso_value(mdp, &Lasso::cycle(c), objective).unwrap() >= *lambda)
}

/// Flow conservation of a certificate, recomputed from the collapsed model alone.
pub fn certificate_conserves_flow(c: &CollapsedMdp, start: Vertex, cert: &BpCertificate) -> bool {
    let m = &c.mdp;
    let mut visits = vec![Rational::zero(); m.num_vertices()];
    if !m.is_player(start) {
        visits[start] = Rational::one();
    }
    for (&(_, t), f) in &cert.edge_flow {
        visits[t] += f;
    }
    m.player_vertices().all(|v| {
        let mut inflow = if v == start { int(1) } else { int(0) };
        for e in m.edges().iter().filter(|e| e.target == v && !m.is_player(e.source)) {
            inflow += &visits[e.source] * e.prob.as_ref().unwrap();
        }
        let outflow: Rational = cert
            .edge_flow
            .iter()
            .filter(|((s, _), _)| *s == v)
            .map(|(_, f)| f.clone())
            .sum::<Rational>()
            + &cert.yes[v]
            + &cert.no[v];
        inflow == outflow
    })
}
