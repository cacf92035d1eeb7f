//! End components, restrictions, attractors, reachability and the MEC quotient.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Result, SolverError};
use crate::lp::{LinearProgram, Relation};
use crate::model::{Mdp, MdpBuilder, Owner, Vertex};
use crate::rational::{common_denominator, Rational};

/// Vertex subset as a membership mask.
pub type Region = Vec<bool>;

pub fn region_of(n: usize, members: impl IntoIterator<Item = Vertex>) -> Region {
    let mut r = vec![false; n];
    for v in members {
        r[v] = true;
    }
    r
}

pub fn members(region: &[bool]) -> Vec<Vertex> {
    region.iter().enumerate().filter(|(_, &b)| b).map(|(v, _)| v).collect()
}

/// Strongly connected components of the subgraph induced by `within`.
pub fn sccs(mdp: &Mdp, within: &[bool]) -> Vec<Vec<Vertex>> {
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(mdp.num_vertices(), mdp.edges().len());
    for _ in mdp.vertices() {
        g.add_node(());
    }
    for e in mdp.edges() {
        if within[e.source] && within[e.target] {
            g.add_edge(NodeIndex::new(e.source), NodeIndex::new(e.target), ());
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|c| c.into_iter().map(|n| n.index()).collect::<Vec<_>>())
        .filter(|c: &Vec<Vertex>| within[c[0]])
        .collect()
}

/// Maximal end components of the sub-arena `within`, each sorted, ordered by least member.
pub fn end_components(mdp: &Mdp, within: &[bool]) -> Vec<Vec<Vertex>> {
    let n = mdp.num_vertices();
    let mut alive = within.to_vec();
    loop {
        let comps = sccs(mdp, &alive);
        let mut comp = vec![usize::MAX; n];
        for (i, c) in comps.iter().enumerate() {
            for &v in c {
                comp[v] = i;
            }
        }
        let same = |v: Vertex, u: Vertex| alive[u] && comp[u] == comp[v];
        let doomed: Vec<Vertex> = members(&alive)
            .into_iter()
            .filter(|&v| match mdp.owner(v) {
                Owner::Random => !mdp.successors(v).all(|u| same(v, u)),
                Owner::Player => !mdp.successors(v).any(|u| same(v, u)),
            })
            .collect();
        if doomed.is_empty() {
            let mut ecs: Vec<Vec<Vertex>> = comps
                .into_iter()
                .map(|mut c| {
                    c.sort_unstable();
                    c
                })
                .collect();
            ecs.sort();
            return ecs;
        }
        for v in doomed {
            alive[v] = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MecDecomposition {
    pub mecs: Vec<Vec<Vertex>>,
    /// MEC index of each vertex, `None` for transient vertices.
    pub membership: Vec<Option<usize>>,
}

impl MecDecomposition {
    pub fn transient(&self) -> Vec<Vertex> {
        (0..self.membership.len())
            .filter(|&v| self.membership[v].is_none())
            .collect()
    }

    pub fn mec_of(&self, v: Vertex) -> Option<usize> {
        self.membership[v]
    }

    pub fn region(&self, i: usize) -> Region {
        region_of(self.membership.len(), self.mecs[i].iter().copied())
    }
}

pub fn mec_decomposition(mdp: &Mdp) -> MecDecomposition {
    let n = mdp.num_vertices();
    let mecs = end_components(mdp, &vec![true; n]);
    let mut membership = vec![None; n];
    for (i, m) in mecs.iter().enumerate() {
        for &v in m {
            membership[v] = Some(i);
        }
    }
    MecDecomposition { mecs, membership }
}

/// An induced sub-MDP with the index maps back to its parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubMdp {
    pub mdp: Mdp,
    pub original: Vec<Vertex>,
    pub local: Vec<Option<Vertex>>,
}

impl SubMdp {
    /// Lifts a region of the sub-MDP to the parent.
    pub fn lift(&self, region: &[bool]) -> Region {
        let mut r = vec![false; self.local.len()];
        for (i, &b) in region.iter().enumerate() {
            r[self.original[i]] = b;
        }
        r
    }

    /// Projects a parent region onto the sub-MDP.
    pub fn project(&self, region: &[bool]) -> Region {
        self.original.iter().map(|&v| region[v]).collect()
    }
}

/// Checks that `keep` can be used as a sub-arena.
pub fn check_closed(mdp: &Mdp, keep: &[bool]) -> Result<()> {
    for v in members(keep) {
        let ok = match mdp.owner(v) {
            Owner::Random => mdp.successors(v).all(|u| keep[u]),
            Owner::Player => mdp.successors(v).any(|u| keep[u]),
        };
        if !ok {
            return Err(SolverError::NotClosed(mdp.name(v).to_string()));
        }
    }
    Ok(())
}

/// Induced sub-MDP on a closed vertex set; names are kept.
pub fn restrict(mdp: &Mdp, keep: &[bool]) -> Result<SubMdp> {
    check_closed(mdp, keep)?;
    let original = members(keep);
    let mut local = vec![None; mdp.num_vertices()];
    let mut b = MdpBuilder::new();
    for &v in &original {
        local[v] = b.add_vertex(mdp.name(v), mdp.owner(v));
    }
    for e in mdp.edges() {
        if let (Some(s), Some(t)) = (local[e.source], local[e.target]) {
            b.add_edge(s, t, e.weight, e.prob.clone());
        }
    }
    Ok(SubMdp {
        mdp: b.build_unchecked(),
        original,
        local,
    })
}

/// Attractor of `target` for `controller` inside the sub-arena `within`.
///
/// `rank[v]` is the number of rounds after which `v` joined (0 on the target).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attractor {
    pub region: Region,
    pub rank: Vec<Option<usize>>,
}

pub fn attractor(mdp: &Mdp, within: &[bool], target: &[bool], controller: Owner) -> Attractor {
    let n = mdp.num_vertices();
    let pred = mdp.predecessors();
    let mut rank = vec![None; n];
    // Remaining successors that must still join, for the opponent's vertices.
    let mut pending: Vec<usize> = mdp
        .vertices()
        .map(|v| mdp.successors(v).filter(|&u| within[u]).count())
        .collect();
    let mut frontier: Vec<Vertex> = (0..n).filter(|&v| within[v] && target[v]).collect();
    for &v in &frontier {
        rank[v] = Some(0);
    }
    let mut round = 0;
    while !frontier.is_empty() {
        round += 1;
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in &pred[u] {
                if !within[v] || rank[v].is_some() {
                    continue;
                }
                let joins = if mdp.owner(v) == controller {
                    true
                } else {
                    pending[v] -= 1;
                    pending[v] == 0
                };
                if joins {
                    rank[v] = Some(round);
                    next.push(v);
                }
            }
        }
        // Opponent vertices with no successor inside `within` are trapped vacuously.
        if round == 1 {
            for v in 0..n {
                if within[v] && rank[v].is_none() && mdp.owner(v) != controller && pending[v] == 0 {
                    rank[v] = Some(round);
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    Attractor {
        region: rank.iter().map(Option::is_some).collect(),
        rank,
    }
}

/// Vertices of `within` with a path to `target` inside `within`.
pub fn can_reach(mdp: &Mdp, within: &[bool], target: &[bool]) -> Region {
    let pred = mdp.predecessors();
    let mut seen: Region = (0..mdp.num_vertices()).map(|v| within[v] && target[v]).collect();
    let mut stack = members(&seen);
    while let Some(u) = stack.pop() {
        for &v in &pred[u] {
            if within[v] && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Vertices from which the player reaches `target` with probability one.
pub fn almost_sure_reach_region(mdp: &Mdp, target: &[bool]) -> Region {
    let n = mdp.num_vertices();
    let mut alive = vec![true; n];
    loop {
        let reach = can_reach(mdp, &alive, target);
        let bad: Region = (0..n).map(|v| !reach[v]).collect();
        let lost = attractor(mdp, &vec![true; n], &bad, Owner::Random).region;
        let next: Region = lost.iter().map(|l| !l).collect();
        if next == alive {
            return alive;
        }
        alive = next;
    }
}

/// Maximal reachability probabilities with an optimal memoryless choice per player vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachTable {
    pub prob: Vec<Rational>,
    pub choice: Vec<Option<Vertex>>,
}

pub fn optimal_reach_probabilities(mdp: &Mdp, target: &[bool]) -> Result<ReachTable> {
    let n = mdp.num_vertices();
    let all = vec![true; n];
    let positive = can_reach(mdp, &all, target);
    let sure = almost_sure_reach_region(mdp, target);
    let mut prob: Vec<Rational> = (0..n)
        .map(|v| if sure[v] { Rational::one() } else { Rational::zero() })
        .collect();
    let unknown: Vec<Vertex> = (0..n).filter(|&v| positive[v] && !sure[v]).collect();
    if !unknown.is_empty() {
        let mut lp = LinearProgram::new();
        let mut var = vec![None; n];
        for &v in &unknown {
            var[v] = Some(lp.add_var(format!("x_{}", mdp.name(v))));
        }
        for &v in &unknown {
            let xv = var[v].unwrap();
            let rows: Vec<Vec<(Vertex, Rational)>> = match mdp.owner(v) {
                Owner::Player => mdp.successors(v).map(|u| vec![(u, Rational::one())]).collect(),
                Owner::Random => vec![mdp
                    .out_edges(v)
                    .map(|e| (e.target, e.prob.clone().unwrap()))
                    .collect()],
            };
            for row in rows {
                let mut coeffs = vec![(xv, Rational::one())];
                let mut rhs = Rational::zero();
                for (u, c) in row {
                    match var[u] {
                        Some(xu) => coeffs.push((xu, -c)),
                        None => rhs += c * &prob[u],
                    }
                }
                lp.add_constraint(format!("bellman_{}", mdp.name(v)), coeffs, Relation::Ge, rhs);
            }
        }
        lp.minimize(unknown.iter().map(|&v| (var[v].unwrap(), Rational::one())).collect());
        let sol = lp.solve()?;
        for &v in &unknown {
            prob[v] = sol.value(var[v].unwrap()).clone();
        }
    }
    let choice = rank_choices(mdp, target, |v, u| prob[u] == prob[v]);
    Ok(ReachTable { prob, choice })
}

/// Player choices that make progress towards `target` using only `allowed` edges:
/// successor of least distance, lowest index on ties. Unranked vertices take their
/// lowest allowed successor.
pub fn rank_choices(
    mdp: &Mdp,
    target: &[bool],
    allowed: impl Fn(Vertex, Vertex) -> bool,
) -> Vec<Option<Vertex>> {
    let n = mdp.num_vertices();
    let mut dist: Vec<Option<usize>> = (0..n).map(|v| target[v].then_some(0)).collect();
    let mut round = 0;
    loop {
        round += 1;
        let fresh: Vec<Vertex> = (0..n)
            .filter(|&v| dist[v].is_none())
            .filter(|&v| {
                mdp.successors(v).any(|u| {
                    dist[u].is_some_and(|d| d < round)
                        && (mdp.owner(v) == Owner::Random || allowed(v, u))
                })
            })
            .collect();
        if fresh.is_empty() {
            break;
        }
        for v in fresh {
            dist[v] = Some(round);
        }
    }
    (0..n)
        .map(|v| {
            if !mdp.is_player(v) {
                return None;
            }
            let mut cands: Vec<Vertex> = mdp.successors(v).filter(|&u| allowed(v, u)).collect();
            if cands.is_empty() {
                cands = mdp.successors(v).collect();
            }
            cands.into_iter().min_by_key(|&u| (dist[u].unwrap_or(usize::MAX), u))
        })
        .collect()
}

/// Where a vertex of the quotient comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Mec(usize),
    Vertex(Vertex),
    /// Auxiliary random vertex on the loop of a collapsed MEC.
    LoopAux(usize),
    /// Auxiliary random vertex restoring alternation between two player vertices.
    Bridge,
}

/// Quotient MDP with one looping player vertex per MEC.
///
/// Payoffs are multiplied by `scale` so that the rational loop payoffs become integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollapsedMdp {
    pub mdp: Mdp,
    pub origin: Vec<Origin>,
    pub mec_vertex: Vec<Vertex>,
    pub loop_payoff: Vec<Rational>,
    pub scale: BigInt,
    /// Quotient vertex of each original vertex.
    pub quotient_of: Vec<Vertex>,
    /// Original edge realized by each structural quotient edge.
    pub edge_origin: HashMap<(Vertex, Vertex), (Vertex, Vertex)>,
}

impl CollapsedMdp {
    pub fn loop_aux(&self, mec: usize) -> Vertex {
        self.mdp
            .successors(self.mec_vertex[mec])
            .find(|&u| self.origin[u] == Origin::LoopAux(mec))
            .expect("every collapsed MEC has a loop")
    }

    /// MEC collapsed into `v`, if any.
    pub fn mec_at(&self, v: Vertex) -> Option<usize> {
        match self.origin[v] {
            Origin::Mec(i) => Some(i),
            _ => None,
        }
    }
}

pub fn collapse_mecs(mdp: &Mdp, dec: &MecDecomposition, mu: &[Rational]) -> CollapsedMdp {
    assert_eq!(mu.len(), dec.mecs.len(), "one loop payoff per MEC");
    let scale = common_denominator(mu);
    let d = scale.to_i64().expect("loop payoff denominators fit in i64");
    let mut b = MdpBuilder::new();
    let mut origin = Vec::new();
    let mut add = |b: &mut MdpBuilder, base: String, owner: Owner, o: Origin| {
        let mut name = base;
        loop {
            if let Some(v) = b.add_vertex(name.clone(), owner) {
                origin.push(o);
                return v;
            }
            name.push('\'');
        }
    };
    let mut quotient_of = vec![0; mdp.num_vertices()];
    let mut mec_vertex = vec![0; dec.mecs.len()];
    for v in mdp.vertices() {
        match dec.membership[v] {
            Some(i) if dec.mecs[i][0] == v => {
                mec_vertex[i] = add(&mut b, format!("mec{i}"), Owner::Player, Origin::Mec(i));
                quotient_of[v] = mec_vertex[i];
            }
            Some(i) => quotient_of[v] = mec_vertex[i],
            None => quotient_of[v] = add(&mut b, mdp.name(v).to_string(), mdp.owner(v), Origin::Vertex(v)),
        }
    }
    let mut edge_origin = HashMap::new();
    for (i, m) in mu.iter().enumerate() {
        let w = (m * Rational::from_integer(scale.clone())).to_integer().to_i64().unwrap();
        let aux = add(&mut b, format!("mec{i}~loop"), Owner::Random, Origin::LoopAux(i));
        b.add_edge(mec_vertex[i], aux, w, None);
        b.add_edge(aux, mec_vertex[i], w, Some(Rational::one()));
    }
    // Random rows merge probability mass per quotient target.
    let mut random_rows: BTreeMap<(Vertex, Vertex), (i64, Rational, (Vertex, Vertex))> = BTreeMap::new();
    let mut player_edges: BTreeMap<(Vertex, Vertex), (i64, (Vertex, Vertex))> = BTreeMap::new();
    for e in mdp.edges() {
        let (s, t) = (e.source, e.target);
        if dec.membership[s].is_some() && dec.membership[s] == dec.membership[t] {
            continue;
        }
        let (qs, qt) = (quotient_of[s], quotient_of[t]);
        match &e.prob {
            Some(p) => {
                let entry = random_rows
                    .entry((qs, qt))
                    .or_insert((d * e.weight, Rational::zero(), (s, t)));
                entry.1 += p;
            }
            None => {
                player_edges.entry((qs, qt)).or_insert((d * e.weight, (s, t)));
            }
        }
    }
    for ((qs, qt), (w, p, orig)) in random_rows {
        b.add_edge(qs, qt, w, Some(p));
        edge_origin.insert((qs, qt), orig);
    }
    for ((qs, qt), (w, orig)) in player_edges {
        if b.owner(qt) == Owner::Player {
            let name = format!("{}~{}", qs, qt);
            let bridge = add(&mut b, name, Owner::Random, Origin::Bridge);
            b.add_edge(qs, bridge, w, None);
            b.add_edge(bridge, qt, 0, Some(Rational::one()));
            edge_origin.insert((qs, bridge), orig);
            edge_origin.insert((bridge, qt), orig);
        } else {
            b.add_edge(qs, qt, w, None);
            edge_origin.insert((qs, qt), orig);
        }
    }
    CollapsedMdp {
        mdp: b.build_unchecked(),
        origin,
        mec_vertex,
        loop_payoff: mu.to_vec(),
        scale,
        quotient_of,
        edge_origin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::{int, rat};

    fn ids(m: &Mdp, ns: &[&str]) -> Vec<Vertex> {
        ns.iter().map(|n| m.vertex(n).unwrap()).collect()
    }

    fn set(m: &Mdp, ns: &[&str]) -> Region {
        region_of(m.num_vertices(), ids(m, ns))
    }

    #[test]
    fn fig3_mecs() {
        let m = fixtures::fig3();
        let d = mec_decomposition(&m);
        assert_eq!(
            d.mecs,
            vec![
                ids(&m, &["v0", "v1", "v2", "v3"]),
                ids(&m, &["v5", "v7"]),
                ids(&m, &["v6", "v8"])
            ]
        );
        assert_eq!(d.transient(), ids(&m, &["v4"]));
    }

    #[test]
    fn fig1_mecs() {
        let m = fixtures::fig1();
        let d = mec_decomposition(&m);
        assert_eq!(
            d.mecs,
            vec![ids(&m, &["v0", "v1", "v2"]), ids(&m, &["v4", "v5", "v6", "v7", "v8"])]
        );
        assert_eq!(d.transient(), ids(&m, &["v3"]));
    }

    #[test]
    fn self_loop_is_one_mec() {
        let m = fixtures::self_loop(4);
        assert_eq!(mec_decomposition(&m).mecs, vec![vec![0, 1]]);
    }

    #[test]
    fn restriction() {
        let m = fixtures::fig1();
        let full = restrict(&m, &[true; 9]).unwrap();
        assert_eq!(full.mdp, m);
        let sub = restrict(&m, &set(&m, &["v4", "v5", "v6", "v7", "v8"])).unwrap();
        assert_eq!(sub.mdp.num_vertices(), 5);
        assert!(sub.mdp.validate().is_empty());
        let m3 = fixtures::fig3();
        assert_eq!(
            restrict(&m3, &set(&m3, &["v0", "v1", "v2"])).unwrap_err(),
            SolverError::NotClosed("v1".into())
        );
    }

    #[test]
    fn reachability_on_fig1() {
        let m = fixtures::fig1();
        let t = set(&m, &["v4"]);
        let table = optimal_reach_probabilities(&m, &t).unwrap();
        assert!(table.prob.iter().all(|p| *p == int(1)));
        assert_eq!(table.choice[m.vertex("v2").unwrap()], m.vertex("v3"));
        assert_eq!(table.choice[m.vertex("v0").unwrap()], m.vertex("v1"));
        assert!(almost_sure_reach_region(&m, &t)[m.vertex("v2").unwrap()]);
    }

    #[test]
    fn coin_reachability() {
        let m = crate::model::parse_mdp(
            "vertex s player\nvertex c random\nvertex t player\nvertex f player\nvertex lt random\nvertex lf random\n\
             edge s c weight 0\nedge c t weight 0 prob 1/2\nedge c f weight 0 prob 1/2\n\
             edge t lt weight 0\nedge lt t weight 0 prob 1\nedge f lf weight 0\nedge lf f weight 0 prob 1\n",
        )
        .unwrap();
        let table = optimal_reach_probabilities(&m, &set(&m, &["t"])).unwrap();
        assert_eq!(table.prob[0], rat(1, 2));
        assert_eq!(table.prob[3], int(0));
    }

    #[test]
    fn fig3_almost_sure_region() {
        let m = fixtures::fig3();
        let r = almost_sure_reach_region(&m, &set(&m, &["v6", "v8"]));
        assert!(!r[m.vertex("v4").unwrap()]);
        assert!(r[m.vertex("v6").unwrap()]);
        let all = vec![true; 9];
        assert_eq!(almost_sure_reach_region(&m, &all), all);
    }

    #[test]
    fn fig3_collapse() {
        let m = fixtures::fig3();
        let d = mec_decomposition(&m);
        let c = collapse_mecs(&m, &d, &[int(1), int(-1), int(9)]);
        assert!(c.mdp.validate().is_empty());
        let m1 = c.mec_vertex[0];
        let v4 = c.quotient_of[m.vertex("v4").unwrap()];
        assert_eq!(c.mdp.weight(m1, v4), Some(3));
        assert_eq!(c.mdp.prob(v4, c.mec_vertex[1]), rat(3, 5));
        assert_eq!(c.mdp.weight(c.mec_vertex[2], c.loop_aux(2)), Some(9));
        // The player edge v6 -> v7 joins two collapsed vertices through a bridge.
        let bridge = c.mdp.successors(c.mec_vertex[2]).find(|&u| c.origin[u] == Origin::Bridge).unwrap();
        assert_eq!(c.mdp.weight(c.mec_vertex[2], bridge), Some(20));
        assert_eq!(c.mdp.successors(bridge).collect::<Vec<_>>(), vec![c.mec_vertex[1]]);
        assert_eq!(c.mdp.num_vertices(), 8);
    }

    #[test]
    fn collapse_scales_rational_payoffs() {
        let m = fixtures::fig1();
        let d = mec_decomposition(&m);
        let c = collapse_mecs(&m, &d, &[rat(1, 3), rat(5, 2)]);
        assert_eq!(c.scale, BigInt::from(6));
        assert_eq!(c.mdp.weight(c.mec_vertex[0], c.loop_aux(0)), Some(2));
        assert_eq!(c.mdp.weight(c.mec_vertex[1], c.loop_aux(1)), Some(15));
        assert!(c.mdp.validate().is_empty());
        let v3 = c.mdp.vertex("v3").unwrap();
        assert_eq!(c.mdp.weight(v3, c.mec_vertex[1]), Some(24));
        assert_eq!(c.mdp.weight(v3, c.mec_vertex[0]), Some(-6));
        assert_eq!(c.mdp.num_vertices(), 5);
    }

    #[test]
    fn single_mec_collapse() {
        let m = fixtures::self_loop(0);
        let d = mec_decomposition(&m);
        let c = collapse_mecs(&m, &d, &[int(5)]);
        assert_eq!(c.mdp.num_vertices(), 2);
        assert_eq!(c.mdp.edges().len(), 2);
        assert!(c.mdp.edges().iter().all(|e| e.weight == 5));
    }
}
