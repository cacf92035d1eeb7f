//! Finite-memory strategies as Mealy machines.
//!
//! The machine reads the run one vertex at a time. On reading a player vertex
//! it emits a distribution over successors using its current state; after
//! every vertex it moves to the next state.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::graph::SubMdp;
use crate::model::{Mdp, Vertex};
use crate::rational::{serde_str, Rational};

/// Successor distribution, sorted by vertex, positive weights only.
pub type Distribution = Vec<(Vertex, Rational)>;

pub fn dirac(v: Vertex) -> Distribution {
    vec![(v, Rational::one())]
}

/// Sorts, merges duplicates and drops zero weights.
pub fn canonical(mut d: Distribution) -> Distribution {
    d.sort_by_key(|(v, _)| *v);
    let mut out: Distribution = Vec::with_capacity(d.len());
    for (v, p) in d {
        match out.last_mut() {
            Some((u, q)) if *u == v => *q += p,
            _ => out.push((v, p)),
        }
    }
    out.retain(|(_, p)| !p.is_zero());
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MealyStrategy {
    initial: usize,
    next: Vec<Vec<Option<usize>>>,
    output: Vec<Vec<Option<Distribution>>>,
}

/// Behaviour of a strategy over an arbitrary memory type.
pub trait StrategyLogic {
    type Mem: Clone + Eq + Hash;

    fn initial(&self) -> Self::Mem;
    /// Choice at player vertex `v` with memory `mem`.
    fn output(&self, mem: &Self::Mem, v: Vertex) -> Distribution;
    fn update(&self, mem: &Self::Mem, v: Vertex) -> Self::Mem;
}

impl MealyStrategy {
    /// Tabulates `logic` on every vertex of `domain` for every memory value reachable
    /// from the initial one, then minimizes. The logic must be total on `domain`.
    pub fn from_logic<L: StrategyLogic>(mdp: &Mdp, logic: &L, domain: &[bool]) -> Self {
        let n = mdp.num_vertices();
        let mut ids: HashMap<L::Mem, usize> = HashMap::new();
        let mut mems: Vec<L::Mem> = Vec::new();
        let mut queue = VecDeque::new();
        let mut intern = |m: L::Mem, mems: &mut Vec<L::Mem>, queue: &mut VecDeque<usize>| -> usize {
            *ids.entry(m.clone()).or_insert_with(|| {
                mems.push(m);
                queue.push_back(mems.len() - 1);
                mems.len() - 1
            })
        };
        let q0 = intern(logic.initial(), &mut mems, &mut queue);
        let mut next: Vec<Vec<Option<usize>>> = Vec::new();
        let mut output: Vec<Vec<Option<Distribution>>> = Vec::new();
        while let Some(q) = queue.pop_front() {
            let mut row = vec![None; n];
            let mut out = vec![None; n];
            for v in (0..n).filter(|&v| domain[v]) {
                if mdp.is_player(v) {
                    out[v] = Some(canonical(logic.output(&mems[q], v)));
                }
                row[v] = Some(intern(logic.update(&mems[q], v), &mut mems, &mut queue));
            }
            next.push(row);
            output.push(out);
        }
        MealyStrategy {
            initial: q0,
            next,
            output,
        }
        .minimized()
    }

    /// One-state strategy playing `choice[v]` at every player vertex that has one.
    pub fn memoryless(mdp: &Mdp, choice: &[Option<Vertex>]) -> Self {
        let n = mdp.num_vertices();
        let output = (0..n)
            .map(|v| if mdp.is_player(v) { choice[v].map(dirac) } else { None })
            .collect();
        MealyStrategy {
            initial: 0,
            next: vec![vec![Some(0); n]],
            output: vec![output],
        }
    }

    pub fn from_parts(
        initial: usize,
        next: Vec<Vec<Option<usize>>>,
        output: Vec<Vec<Option<Distribution>>>,
    ) -> Self {
        MealyStrategy {
            initial,
            next,
            output,
        }
    }

    pub fn num_states(&self) -> usize {
        self.next.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn next(&self, q: usize, v: Vertex) -> Option<usize> {
        self.next[q][v]
    }

    pub fn output(&self, q: usize, v: Vertex) -> Option<&Distribution> {
        self.output[q][v].as_ref()
    }

    pub fn is_deterministic(&self) -> bool {
        self.output.iter().flatten().flatten().all(|d| d.len() == 1)
    }

    /// Number of distinct choices made at `v` across states.
    pub fn choices_at(&self, v: Vertex) -> usize {
        let mut seen: Vec<&Distribution> = Vec::new();
        for row in &self.output {
            if let Some(d) = &row[v] {
                if !seen.contains(&d) {
                    seen.push(d);
                }
            }
        }
        seen.len()
    }

    /// Checks that outputs are distributions over out-neighbours and transitions stay in range.
    pub fn audit(&self, mdp: &Mdp) -> Result<()> {
        let bad = |m: String| Err(SolverError::Strategy(m));
        for (q, row) in self.output.iter().enumerate() {
            for (v, d) in row.iter().enumerate() {
                let Some(d) = d else { continue };
                if !mdp.is_player(v) {
                    return bad(format!("output at random vertex {} in state {q}", mdp.name(v)));
                }
                let sum: Rational = d.iter().map(|(_, p)| p.clone()).sum();
                if !sum.is_one() || d.iter().any(|(_, p)| !p.is_positive()) {
                    return bad(format!("output at {} in state {q} is not a distribution", mdp.name(v)));
                }
                if let Some((u, _)) = d.iter().find(|(u, _)| mdp.edge(v, *u).is_none()) {
                    return bad(format!("output at {} moves to non-successor {}", mdp.name(v), mdp.name(*u)));
                }
            }
        }
        if self.next.iter().flatten().flatten().any(|&q| q >= self.num_states()) {
            return bad("transition to an unknown state".into());
        }
        Ok(())
    }

    /// Moves a strategy of `sub.mdp` to the model `sub` was restricted from.
    pub fn lift(&self, sub: &SubMdp, n: usize) -> Self {
        let widen = |row: &Vec<Option<usize>>| -> Vec<Option<usize>> {
            (0..n).map(|v| sub.local[v].and_then(|l| row[l])).collect()
        };
        let widen_out = |row: &Vec<Option<Distribution>>| -> Vec<Option<Distribution>> {
            (0..n)
                .map(|v| {
                    let d = sub.local[v].and_then(|l| row[l].as_ref())?;
                    Some(d.iter().map(|(u, p)| (sub.original[*u], p.clone())).collect())
                })
                .collect()
        };
        MealyStrategy {
            initial: self.initial,
            next: self.next.iter().map(widen).collect(),
            output: self.output.iter().map(widen_out).collect(),
        }
    }

    /// Keeps only the entries met on runs from `start` consistent with the strategy, then minimizes.
    pub fn trimmed(&self, mdp: &Mdp, start: Vertex) -> Self {
        let n = mdp.num_vertices();
        let k = self.num_states();
        let mut seen = vec![vec![false; n]; k];
        let mut stack = vec![(self.initial, start)];
        seen[self.initial][start] = true;
        while let Some((q, v)) = stack.pop() {
            let Some(q2) = self.next[q][v] else { continue };
            let succ: Vec<Vertex> = if mdp.is_player(v) {
                self.output[q][v].iter().flatten().map(|(u, _)| *u).collect()
            } else {
                mdp.successors(v).collect()
            };
            for u in succ {
                if !seen[q2][u] {
                    seen[q2][u] = true;
                    stack.push((q2, u));
                }
            }
        }
        let mut out = self.clone();
        for q in 0..k {
            for v in 0..n {
                if !seen[q][v] {
                    out.next[q][v] = None;
                    out.output[q][v] = None;
                }
            }
        }
        out.minimized_partial()
    }

    /// Merges pairs of states whose defined entries never conflict until no pair is left.
    /// Runs only meet defined entries, so their behaviour is unchanged.
    fn minimized_partial(&self) -> Self {
        let mut m = self.minimized();
        let n = m.next.first().map_or(0, Vec::len);
        let agree = |m: &MealyStrategy, a: usize, b: usize| {
            (0..n).all(|v| {
                let out = match (&m.output[a][v], &m.output[b][v]) {
                    (Some(x), Some(y)) => x == y,
                    _ => true,
                };
                let next = match (m.next[a][v], m.next[b][v]) {
                    (Some(x), Some(y)) => x == y,
                    _ => true,
                };
                out && next
            })
        };
        'search: loop {
            for a in 0..m.num_states() {
                for b in a + 1..m.num_states() {
                    if !agree(&m, a, b) {
                        continue;
                    }
                    for v in 0..n {
                        if m.next[a][v].is_none() {
                            m.next[a][v] = m.next[b][v];
                        }
                        if m.output[a][v].is_none() {
                            m.output[a][v] = m.output[b][v].clone();
                        }
                    }
                    let redirect = |t: usize| match t.cmp(&b) {
                        std::cmp::Ordering::Equal => a,
                        std::cmp::Ordering::Greater => t - 1,
                        std::cmp::Ordering::Less => t,
                    };
                    m.next.remove(b);
                    m.output.remove(b);
                    for t in m.next.iter_mut().flatten().flatten() {
                        *t = redirect(*t);
                    }
                    m.initial = redirect(m.initial);
                    continue 'search;
                }
            }
            return m;
        }
    }

    /// Moore-style partition refinement; undefined entries count as a distinct value.
    pub fn minimized(&self) -> Self {
        let k = self.num_states();
        let mut class: Vec<usize> = {
            let mut keys: HashMap<&Vec<Option<Distribution>>, usize> = HashMap::new();
            (0..k)
                .map(|q| {
                    let fresh = keys.len();
                    *keys.entry(&self.output[q]).or_insert(fresh)
                })
                .collect()
        };
        loop {
            let mut keys: HashMap<(usize, Vec<Option<usize>>), usize> = HashMap::new();
            let refined: Vec<usize> = (0..k)
                .map(|q| {
                    let sig = self.next[q].iter().map(|t| t.map(|t| class[t])).collect();
                    let fresh = keys.len();
                    *keys.entry((class[q], sig)).or_insert(fresh)
                })
                .collect();
            let stable = keys.len() == class.iter().max().map_or(0, |m| m + 1);
            class = refined;
            if stable {
                break;
            }
        }
        // Renumber so that the initial state is 0 and order follows first appearance.
        let mut order = vec![usize::MAX; k];
        let mut count = 0;
        let mut visit = |c: usize, order: &mut Vec<usize>| {
            if order[c] == usize::MAX {
                order[c] = count;
                count += 1;
            }
        };
        visit(class[self.initial], &mut order);
        for q in 0..k {
            visit(class[q], &mut order);
        }
        let m = count;
        let n = self.next.first().map_or(0, Vec::len);
        let mut next = vec![vec![None; n]; m];
        let mut output = vec![vec![None; n]; m];
        for q in 0..k {
            let c = order[class[q]];
            for v in 0..n {
                if let Some(t) = self.next[q][v] {
                    next[c][v] = Some(order[class[t]]);
                }
                if self.output[q][v].is_some() {
                    output[c][v] = self.output[q][v].clone();
                }
            }
        }
        MealyStrategy {
            initial: 0,
            next,
            output,
        }
    }

    pub fn to_document(&self, mdp: &Mdp) -> StrategyDocument {
        let mut transitions = Vec::new();
        for q in 0..self.num_states() {
            for v in mdp.vertices() {
                let Some(t) = self.next[q][v] else { continue };
                let output = self.output[q][v]
                    .iter()
                    .flatten()
                    .map(|(u, p)| WeightedVertex {
                        vertex: mdp.name(*u).to_string(),
                        prob: p.clone(),
                    })
                    .collect();
                transitions.push(Transition {
                    state: q,
                    input: mdp.name(v).to_string(),
                    next: t,
                    output,
                });
            }
        }
        StrategyDocument {
            states: self.num_states(),
            initial: self.initial,
            transitions,
        }
    }

    pub fn from_document(mdp: &Mdp, doc: &StrategyDocument) -> Result<Self> {
        let n = mdp.num_vertices();
        if doc.initial >= doc.states.max(1) {
            return Err(SolverError::Strategy("initial state out of range".into()));
        }
        let mut next = vec![vec![None; n]; doc.states];
        let mut output = vec![vec![None; n]; doc.states];
        for t in &doc.transitions {
            if t.state >= doc.states || t.next >= doc.states {
                return Err(SolverError::Strategy(format!("state out of range in transition on {}", t.input)));
            }
            let v = mdp.require_vertex(&t.input)?;
            next[t.state][v] = Some(t.next);
            if mdp.is_player(v) {
                let d = t
                    .output
                    .iter()
                    .map(|w| Ok((mdp.require_vertex(&w.vertex)?, w.prob.clone())))
                    .collect::<Result<Distribution>>()?;
                output[t.state][v] = Some(canonical(d));
            }
        }
        let s = MealyStrategy {
            initial: doc.initial,
            next,
            output,
        };
        s.audit(mdp)?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyDocument {
    pub states: usize,
    pub initial: usize,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub input: String,
    pub next: usize,
    pub output: Vec<WeightedVertex>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedVertex {
    pub vertex: String,
    #[serde(with = "serde_str")]
    pub prob: Rational,
}
