//! Deciders for the three guarantee modes and their witness strategies.
//!
//! Every decider first shifts and scales payoffs so that the guarantee
//! threshold becomes 0, and reports values back in the original units.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, Zero};

use crate::bp::{bp_value, build_bp_lp, check_bp, BpCertificate, BpProgram};
use crate::error::{Result, SolverError};
use crate::games::{sure_region, sure_strategy_on_region, sure_values};
use crate::graph::{
    almost_sure_reach_region, collapse_mecs, members, rank_choices, region_of, restrict, CollapsedMdp, Origin,
    Region, SubMdp,
};
use crate::model::{AffineMap, Mdp, Owner, Vertex};
use crate::objective::{GuaranteeQuery, Mode, Objective};
use crate::rational::{int, Rational};
use crate::strategy::{dirac, Distribution, MealyStrategy, StrategyLogic};
use crate::values::{expected_mp_with_commit, mec_values, switch_step_bound, CommitSolution, MecValue, SwitchPlan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueReport {
    pub mode: Mode,
    pub objective: Objective,
    pub decision: bool,
    /// Supremum of the expectation under the guarantee, when some strategy meets the guarantee.
    pub value: Option<Rational>,
}

/// Intermediate tables, in original payoff units.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Vertices kept by the reduction.
    pub region: Vec<Vertex>,
    /// Sure value of each kept vertex.
    pub sure_values: Vec<Option<Rational>>,
    pub mecs: Vec<Vec<Vertex>>,
    pub mec_values: Vec<Rational>,
    /// Vertices where the optimal policy stops moving.
    pub commit: Vec<Vertex>,
    /// Largest probability of a non-negative loop under the expectation bound.
    pub max_probability: Option<Rational>,
    pub certificate: Option<BpCertificate>,
}

#[derive(Debug, Clone)]
enum Witness {
    None,
    Bwc(Box<BwcWitness>),
    Plans(Box<PlanWitness>),
}

#[derive(Debug, Clone)]
struct BwcWitness {
    game: Mdp,
    pruned: SubMdp,
    sure: Vec<Rational>,
    commit: CommitSolution,
    start: Vertex,
    objective: Objective,
}

/// Deterministic behaviour chosen at a collapsed vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Plan {
    Commit(usize),
    Exit(Vertex, Vertex),
}

#[derive(Debug, Clone)]
struct PlanWitness {
    game: Mdp,
    collapsed: CollapsedMdp,
    mecs: Vec<MecValue>,
    objective: Objective,
    mix: Vec<Vec<(Plan, Rational)>>,
    domain: Region,
    start: Vertex,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub report: ValueReport,
    pub diagnostics: Diagnostics,
    /// Map from original payoffs to the normalized ones.
    pub normalization: AffineMap,
    witness: Witness,
}

/// A synthesized strategy and, for BWC, the switching plan behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synthesized {
    pub strategy: MealyStrategy,
    pub switch: Option<SwitchPlan>,
}

fn check_start(mdp: &Mdp, start: Vertex) -> Result<()> {
    if start < mdp.num_vertices() {
        Ok(())
    } else {
        Err(SolverError::UnknownVertex(start.to_string()))
    }
}

/// Sure guarantee `{Φ ≥ α}` with the largest expectation.
pub fn decide_bwc(mdp: &Mdp, start: Vertex, objective: Objective, alpha: &Rational, beta: &Rational) -> Result<SynthesisResult> {
    check_start(mdp, start)?;
    let (game, map) = mdp.normalize_guarantee(alpha);
    let beta = map.apply(beta);
    let region = sure_region(&game, objective, &Rational::zero());
    let report = |decision, value| ValueReport {
        mode: Mode::Bwc,
        objective,
        decision,
        value,
    };
    if !region[start] {
        return Ok(SynthesisResult {
            report: report(false, None),
            diagnostics: Diagnostics::default(),
            normalization: map,
            witness: Witness::None,
        });
    }
    let pruned = restrict(&game, &region)?;
    let local_start = pruned.local[start].unwrap();
    let sure = sure_values(&pruned.mdp, objective);
    let loops: Vec<Option<Rational>> = pruned
        .mdp
        .vertices()
        .map(|v| pruned.mdp.is_player(v).then(|| sure[v].clone()))
        .collect();
    let commit = expected_mp_with_commit(&pruned.mdp, &loops, local_start)?;
    let value = commit.value(local_start).clone();
    let decision = !beta.is_positive() || value >= beta;
    let mut sure_orig = vec![None; mdp.num_vertices()];
    for (l, &v) in pruned.original.iter().enumerate() {
        sure_orig[v] = Some(map.invert(&sure[l]));
    }
    let diagnostics = Diagnostics {
        region: pruned.original.clone(),
        sure_values: sure_orig,
        commit: members(&commit.commit).into_iter().map(|l| pruned.original[l]).collect(),
        ..Diagnostics::default()
    };
    let witness = if decision {
        Witness::Bwc(Box::new(BwcWitness {
            game,
            pruned,
            sure,
            commit,
            start: local_start,
            objective,
        }))
    } else {
        Witness::None
    };
    Ok(SynthesisResult {
        report: report(decision, Some(map.invert(&value))),
        diagnostics,
        normalization: map,
        witness,
    })
}

struct Collapsed {
    game: Mdp,
    map: AffineMap,
    collapsed: CollapsedMdp,
    mecs: Vec<MecValue>,
    diagnostics: Diagnostics,
}

fn collapse_normalized(mdp: &Mdp, objective: Objective, alpha: &Rational) -> Collapsed {
    let (game, map) = mdp.normalize_guarantee(alpha);
    let (dec, mecs) = mec_values(&game, objective);
    let mu: Vec<Rational> = mecs.iter().map(|m| m.value.clone()).collect();
    let collapsed = collapse_mecs(&game, &dec, &mu);
    let diagnostics = Diagnostics {
        region: game.vertices().collect(),
        mec_values: mu.iter().map(|m| map.invert(m)).collect(),
        mecs: dec.mecs,
        ..Diagnostics::default()
    };
    Collapsed {
        game,
        map,
        collapsed,
        mecs,
        diagnostics,
    }
}

/// Guarantee `{Φ ≥ α}` with probability at least `p`, with the largest expectation.
pub fn decide_bp(
    mdp: &Mdp,
    start: Vertex,
    objective: Objective,
    p: &Rational,
    alpha: &Rational,
    beta: &Rational,
) -> Result<SynthesisResult> {
    check_start(mdp, start)?;
    if p.is_negative() || *p > Rational::one() {
        return Err(SolverError::Precondition(format!("probability {p} is outside [0, 1]")));
    }
    let Collapsed {
        game,
        map,
        collapsed,
        mecs,
        mut diagnostics,
    } = collapse_normalized(mdp, objective, alpha);
    let s = collapsed.quotient_of[start];
    let decision = check_bp(&collapsed, s, p, &map.apply(beta))?;
    let value = bp_value(&collapsed, s, p)?.map(|(v, _)| map.invert(&v));
    diagnostics.max_probability = decision.max_probability.clone();
    diagnostics.certificate = decision.certificate.clone();
    let witness = match &decision.certificate {
        Some(cert) => {
            let mix = certificate_mix(&collapsed, s, cert);
            Witness::Plans(Box::new(PlanWitness {
                domain: vec![true; game.num_vertices()],
                game,
                collapsed,
                mecs,
                objective,
                mix,
                start,
            }))
        }
        None => Witness::None,
    };
    Ok(SynthesisResult {
        report: ValueReport {
            mode: Mode::Bp,
            objective,
            decision: decision.feasible,
            value,
        },
        diagnostics,
        normalization: map,
        witness,
    })
}

/// The BP linear program behind [`decide_bp`], over the collapsed normalized model.
pub fn bp_program(
    mdp: &Mdp,
    start: Vertex,
    objective: Objective,
    p: &Rational,
    alpha: &Rational,
    beta: &Rational,
) -> Result<BpProgram> {
    check_start(mdp, start)?;
    let c = collapse_normalized(mdp, objective, alpha);
    build_bp_lp(&c.collapsed, c.collapsed.quotient_of[start], p, &c.map.apply(beta))
}

/// Plan for a structural collapsed edge out of `q`, if it is one.
fn exit_plan(c: &CollapsedMdp, q: Vertex, u: Vertex) -> Plan {
    match c.origin[u] {
        Origin::LoopAux(i) => Plan::Commit(i),
        _ => {
            let (s, t) = c.edge_origin[&(q, u)];
            Plan::Exit(s, t)
        }
    }
}

fn default_plan(c: &CollapsedMdp, q: Vertex) -> Plan {
    match c.mec_at(q) {
        Some(i) => Plan::Commit(i),
        None => exit_plan(c, q, c.mdp.successors(q).next().expect("player vertices have successors")),
    }
}

fn certificate_mix(c: &CollapsedMdp, start: Vertex, cert: &BpCertificate) -> Vec<Vec<(Plan, Rational)>> {
    c.mdp
        .vertices()
        .map(|q| {
            if !c.mdp.is_player(q) {
                return Vec::new();
            }
            let mut mix = Vec::new();
            if let Some(i) = c.mec_at(q) {
                mix.push((Plan::Commit(i), &cert.yes[q] + &cert.no[q]));
            }
            for (&(_, u), f) in cert.edge_flow.range((q, 0)..(q + 1, 0)) {
                mix.push((exit_plan(c, q, u), f.clone()));
            }
            mix.retain(|(_, w)| w.is_positive());
            if mix.is_empty() || cert.inflow(c, start, q).is_zero() {
                mix = vec![(default_plan(c, q), Rational::one())];
            }
            mix
        })
        .collect()
}

/// Guarantee `{Φ ≥ α}` almost surely, with the largest expectation.
pub fn decide_bas(mdp: &Mdp, start: Vertex, objective: Objective, alpha: &Rational, beta: &Rational) -> Result<SynthesisResult> {
    check_start(mdp, start)?;
    let Collapsed {
        game,
        map,
        collapsed,
        mecs,
        mut diagnostics,
    } = collapse_normalized(mdp, objective, alpha);
    let c = &collapsed;
    let s = c.quotient_of[start];
    let n = c.mdp.num_vertices();
    let good = region_of(
        n,
        (0..n).filter(|&q| c.mec_at(q).is_some_and(|i| !c.loop_payoff[i].is_negative())),
    );
    let safe = almost_sure_reach_region(&c.mdp, &good);
    let report = |decision, value| ValueReport {
        mode: Mode::Bas,
        objective,
        decision,
        value,
    };
    diagnostics.region = game.vertices().filter(|&v| safe[c.quotient_of[v]]).collect();
    if !safe[s] {
        return Ok(SynthesisResult {
            report: report(false, None),
            diagnostics,
            normalization: map,
            witness: Witness::None,
        });
    }
    let sub = restrict(&c.mdp, &safe)?;
    let loops: Vec<Option<Rational>> = sub
        .original
        .iter()
        .map(|&q| good[q].then(|| c.loop_payoff[c.mec_at(q).unwrap()].clone()))
        .collect();
    let sol = expected_mp_with_commit(&sub.mdp, &loops, sub.local[s].unwrap())?;
    let value = sol.value(sub.local[s].unwrap()).clone();
    let decision = value >= map.apply(beta);
    let mut mix = vec![Vec::new(); n];
    for (l, &q) in sub.original.iter().enumerate() {
        if !c.mdp.is_player(q) {
            continue;
        }
        let plan = if sol.commit[l] {
            Plan::Commit(c.mec_at(q).unwrap())
        } else {
            exit_plan(c, q, sub.original[sol.choice[l].expect("player vertex has a choice")])
        };
        mix[q] = vec![(plan, Rational::one())];
    }
    diagnostics.commit = game
        .vertices()
        .filter(|&v| sub.local[c.quotient_of[v]].is_some_and(|l| sol.commit[l]))
        .collect();
    let domain: Region = game.vertices().map(|v| safe[c.quotient_of[v]]).collect();
    let witness = if decision {
        Witness::Plans(Box::new(PlanWitness {
            game,
            collapsed,
            mecs,
            objective,
            mix,
            domain,
            start,
        }))
    } else {
        Witness::None
    };
    Ok(SynthesisResult {
        report: report(decision, Some(map.invert(&value))),
        diagnostics,
        normalization: map,
        witness,
    })
}

/// Runs the decider selected by `query`.
pub fn decide(mdp: &Mdp, query: &GuaranteeQuery) -> Result<SynthesisResult> {
    let start = mdp.require_vertex(&query.start)?;
    let (a, b) = (&query.alpha, &query.beta);
    match query.mode {
        Mode::Bwc => decide_bwc(mdp, start, query.objective, a, b),
        Mode::Bas => decide_bas(mdp, start, query.objective, a, b),
        Mode::Bp => {
            let p = query
                .prob
                .as_ref()
                .ok_or_else(|| SolverError::Precondition("BP needs a probability".into()))?;
            decide_bp(mdp, start, query.objective, p, a, b)
        }
    }
}

impl SynthesisResult {
    pub fn decision(&self) -> bool {
        self.report.decision
    }

    pub fn value(&self) -> Option<&Rational> {
        self.report.value.as_ref()
    }

    /// Collapsed model and collapsed start vertex behind a BP or BAS answer.
    pub fn collapsed(&self) -> Option<(&CollapsedMdp, Vertex)> {
        match &self.witness {
            Witness::Plans(w) => Some((&w.collapsed, w.collapsed.quotient_of[w.start])),
            _ => None,
        }
    }

    /// The same BP answer realized by another certificate of the same program.
    pub fn with_certificate(&self, cert: &BpCertificate) -> Result<SynthesisResult> {
        let Witness::Plans(w) = &self.witness else {
            return Err(SolverError::NoWitness);
        };
        if self.report.mode != Mode::Bp {
            return Err(SolverError::Precondition("certificates only back BP answers".into()));
        }
        let s = w.collapsed.quotient_of[w.start];
        let mut w = w.clone();
        w.mix = certificate_mix(&w.collapsed, s, cert);
        let mut out = self.clone();
        out.diagnostics.certificate = Some(cert.clone());
        out.witness = Witness::Plans(w);
        Ok(out)
    }

    /// Witness strategy for a yes answer. `epsilon` is the allowed loss in
    /// expectation and only matters for BWC.
    pub fn synthesize(&self, epsilon: &Rational) -> Result<Synthesized> {
        match &self.witness {
            Witness::None => Err(SolverError::NoWitness),
            Witness::Bwc(w) => bwc_strategy(w, epsilon),
            Witness::Plans(w) => Ok(Synthesized {
                strategy: plan_strategy(w),
                switch: None,
            }),
        }
    }
}

/// Phase one follows the commit-optimal choice for at most `steps` player moves;
/// phase two plays a sure strategy for the sure value of the vertex it switched at.
struct BwcLogic<'a> {
    pruned: &'a SubMdp,
    choice: Vec<Option<Vertex>>,
    commit: Region,
    steps: usize,
    machine_of: Vec<Option<usize>>,
    machines: Vec<MealyStrategy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum BwcMem {
    Count(usize),
    Follow(usize, usize),
}

impl BwcLogic<'_> {
    fn fresh(&self, v: Vertex) -> Option<(usize, usize)> {
        self.machine_of[v].map(|m| (m, self.machines[m].initial()))
    }

    fn follows(&self, mem: BwcMem, v: Vertex) -> Option<(usize, usize)> {
        match mem {
            BwcMem::Follow(m, q) if self.machines[m].next(q, v).is_some() => Some((m, q)),
            // Off the sure strategy's region: only on runs the strategy never produces.
            BwcMem::Follow(..) => self.fresh(v),
            BwcMem::Count(k) if self.commit[v] || k >= self.steps => self.fresh(v),
            BwcMem::Count(_) => None,
        }
    }
}

impl StrategyLogic for BwcLogic<'_> {
    type Mem = BwcMem;

    fn initial(&self) -> BwcMem {
        BwcMem::Count(0)
    }

    fn output(&self, mem: &BwcMem, v: Vertex) -> Distribution {
        match self.follows(*mem, v) {
            Some((m, q)) => self.machines[m].output(q, v).expect("sure strategy covers its region").clone(),
            None => dirac(self.choice[v].expect("phase one has a choice")),
        }
    }

    fn update(&self, mem: &BwcMem, v: Vertex) -> BwcMem {
        match (self.follows(*mem, v), *mem) {
            (Some((m, q)), _) => BwcMem::Follow(m, self.machines[m].next(q, v).unwrap()),
            (None, BwcMem::Count(k)) if self.is_player(v) => BwcMem::Count(k + 1),
            (None, BwcMem::Count(k)) => BwcMem::Count(k),
            (None, BwcMem::Follow(..)) => BwcMem::Count(self.steps),
        }
    }
}

impl BwcLogic<'_> {
    fn is_player(&self, v: Vertex) -> bool {
        self.pruned.mdp.is_player(self.pruned.local[v].unwrap())
    }
}

fn bwc_strategy(w: &BwcWitness, epsilon: &Rational) -> Result<Synthesized> {
    if !epsilon.is_positive() {
        return Err(SolverError::Precondition("epsilon must be positive".into()));
    }
    let g = &w.pruned.mdp;
    let n_orig = w.game.num_vertices();
    let big_w = w.game.max_abs_weight().max(1);
    let margin = epsilon / int(w.game.num_vertices() as i64 * big_w);
    let k = w.commit.commit.iter().filter(|&&c| c).count().max(1);
    let mut plan = switch_step_bound(g, &w.commit.choice, &w.commit.commit, w.start, &(&margin * int(k as i64)))?;
    plan.epsilon = epsilon.clone();
    plan.margin = margin;
    let lift = |local: &[Option<Vertex>]| -> Vec<Option<Vertex>> {
        let mut out = vec![None; n_orig];
        for (l, c) in local.iter().enumerate() {
            out[w.pruned.original[l]] = c.map(|u| w.pruned.original[u]);
        }
        out
    };
    let choice = lift(&w.commit.choice);
    let commit: Region = (0..n_orig)
        .map(|v| w.pruned.local[v].is_some_and(|l| w.commit.commit[l]))
        .collect();
    let mut by_value: BTreeMap<Rational, usize> = BTreeMap::new();
    let mut machines = Vec::new();
    let mut machine_of = vec![None; n_orig];
    for l in g.player_vertices() {
        let lambda = &w.sure[l];
        let m = *by_value.entry(lambda.clone()).or_insert_with(|| {
            let (s, _) = sure_strategy_on_region(g, w.objective, lambda);
            machines.push(s.lift(&w.pruned, n_orig));
            machines.len() - 1
        });
        machine_of[w.pruned.original[l]] = Some(m);
    }
    let logic = BwcLogic {
        pruned: &w.pruned,
        choice,
        commit,
        steps: plan.steps,
        machine_of,
        machines,
    };
    let domain = region_of(n_orig, w.pruned.original.iter().copied());
    let strategy = MealyStrategy::from_logic(&w.game, &logic, &domain).trimmed(&w.game, w.pruned.original[w.start]);
    Ok(Synthesized {
        strategy,
        switch: Some(plan),
    })
}

/// Reaches the witness end component of a MEC, then plays its sure strategy.
struct AlmostSureLogic {
    approach: Vec<Option<Vertex>>,
    witness: Region,
    inner: MealyStrategy,
}

impl StrategyLogic for AlmostSureLogic {
    type Mem = Option<usize>;

    fn initial(&self) -> Self::Mem {
        None
    }

    fn output(&self, mem: &Self::Mem, v: Vertex) -> Distribution {
        if !self.witness[v] {
            return dirac(self.approach[v].expect("approach choice inside the MEC"));
        }
        let q = mem.unwrap_or(self.inner.initial());
        self.inner.output(q, v).expect("inner strategy covers its end component").clone()
    }

    fn update(&self, mem: &Self::Mem, v: Vertex) -> Self::Mem {
        if !self.witness[v] {
            return None;
        }
        self.inner.next(mem.unwrap_or(self.inner.initial()), v)
    }
}

fn build_plan(w: &PlanWitness, plan: Plan) -> MealyStrategy {
    let g = &w.game;
    let n = g.num_vertices();
    let dec_member = |i: usize| region_of(n, w.collapsed.quotient_of.iter().enumerate().filter(|(_, &q)| w.collapsed.mec_at(q) == Some(i)).map(|(v, _)| v));
    match plan {
        Plan::Exit(s, t) => {
            let q = w.collapsed.quotient_of[s];
            let mut choice = match w.collapsed.mec_at(q) {
                Some(i) => {
                    let mec = dec_member(i);
                    rank_choices(g, &region_of(n, [s]), |_, u| mec[u])
                        .into_iter()
                        .enumerate()
                        .map(|(v, c)| if mec[v] { c } else { None })
                        .collect()
                }
                None => vec![None; n],
            };
            choice[s] = Some(t);
            MealyStrategy::memoryless(g, &choice)
        }
        Plan::Commit(i) => {
            let mec = dec_member(i);
            let mv = &w.mecs[i];
            let witness = region_of(n, mv.witness.iter().copied());
            let sub = restrict(g, &witness).expect("witness end components are closed");
            let (inner, _) = sure_strategy_on_region(&sub.mdp, w.objective, &mv.value);
            let approach = rank_choices(g, &witness, |_, u| mec[u]);
            let logic = AlmostSureLogic {
                approach,
                witness,
                inner: inner.lift(&sub, n),
            };
            MealyStrategy::from_logic(g, &logic, &mec)
        }
    }
}

/// Samples one plan per collapsed vertex lazily: the memory keeps the plans still
/// consistent with the moves made since the run entered that vertex.
struct PlanMix<'a> {
    quotient_of: &'a [Vertex],
    player_quotient: Vec<bool>,
    plans: Vec<MealyStrategy>,
    mix: Vec<Vec<(usize, Rational)>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct MixMem {
    quotient: Option<Vertex>,
    /// Plan, its state, and its move at the last player vertex.
    alive: Vec<(usize, usize, Option<Vertex>)>,
}

impl PlanMix<'_> {
    fn advance(&self, mem: &MixMem, v: Vertex) -> Vec<(usize, usize)> {
        let q = self.quotient_of[v];
        if !self.player_quotient[q] {
            return Vec::new();
        }
        if mem.quotient == Some(q) {
            let kept: Vec<_> = mem
                .alive
                .iter()
                .filter(|(_, _, moved)| moved.is_none_or(|u| u == v))
                .map(|&(p, s, _)| (p, s))
                .collect();
            if !kept.is_empty() {
                return kept;
            }
        }
        self.mix[q].iter().map(|&(p, _)| (p, self.plans[p].initial())).collect()
    }

    fn weight(&self, q: Vertex, plan: usize) -> &Rational {
        &self.mix[q].iter().find(|(p, _)| *p == plan).unwrap().1
    }
}

impl StrategyLogic for PlanMix<'_> {
    type Mem = MixMem;

    fn initial(&self) -> MixMem {
        MixMem {
            quotient: None,
            alive: Vec::new(),
        }
    }

    fn output(&self, mem: &MixMem, v: Vertex) -> Distribution {
        let q = self.quotient_of[v];
        let alive = self.advance(mem, v);
        let total: Rational = alive.iter().map(|&(p, _)| self.weight(q, p)).sum();
        alive
            .iter()
            .map(|&(p, s)| {
                let u = self.plans[p].output(s, v).expect("plan covers its collapsed vertex")[0].0;
                (u, self.weight(q, p) / &total)
            })
            .collect()
    }

    fn update(&self, mem: &MixMem, v: Vertex) -> MixMem {
        let alive = self
            .advance(mem, v)
            .into_iter()
            .map(|(p, s)| {
                let moved = self.plans[p].output(s, v).map(|d| d[0].0);
                (p, self.plans[p].next(s, v).expect("plan covers its collapsed vertex"), moved)
            })
            .collect();
        MixMem {
            quotient: Some(self.quotient_of[v]),
            alive,
        }
    }
}

fn plan_strategy(w: &PlanWitness) -> MealyStrategy {
    let mut ids: HashMap<Plan, usize> = HashMap::new();
    let mut plans = Vec::new();
    let mix: Vec<Vec<(usize, Rational)>> = w
        .mix
        .iter()
        .map(|row| {
            row.iter()
                .map(|(plan, weight)| {
                    let id = *ids.entry(*plan).or_insert_with(|| {
                        plans.push(build_plan(w, *plan));
                        plans.len() - 1
                    });
                    (id, weight.clone())
                })
                .collect()
        })
        .collect();
    let c = &w.collapsed;
    let logic = PlanMix {
        quotient_of: &c.quotient_of,
        player_quotient: c.mdp.vertices().map(|q| c.mdp.owner(q) == Owner::Player).collect(),
        plans,
        mix,
    };
    MealyStrategy::from_logic(&w.game, &logic, &w.domain).trimmed(&w.game, w.start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::rat;

    fn id(m: &Mdp, name: &str) -> Vertex {
        m.vertex(name).unwrap()
    }

    #[test]
    fn fig1_bwc() {
        let m = fixtures::fig1();
        let obj = Objective::Fwmp(3);
        let r = decide_bwc(&m, id(&m, "v2"), obj, &int(0), &int(2)).unwrap();
        assert!(r.decision());
        assert_eq!(r.value(), Some(&int(2)));
        assert_eq!(r.diagnostics.sure_values[id(&m, "v4")], Some(int(2)));
        let s = r.synthesize(&rat(1, 100)).unwrap();
        s.strategy.audit(&m).unwrap();
        assert!(s.strategy.is_deterministic());
        let plan = s.switch.unwrap();
        assert!(plan.steps > 0 && plan.miss <= plan.margin * int(r.diagnostics.commit.len() as i64));

        let r = decide_bwc(&m, id(&m, "v2"), obj, &int(0), &rat(21, 10)).unwrap();
        assert!(!r.decision());
        assert_eq!(r.synthesize(&rat(1, 100)), Err(SolverError::NoWitness));
        let r = decide_bwc(&m, id(&m, "v2"), obj, &int(11), &int(0)).unwrap();
        assert!(!r.decision() && r.value().is_none());
    }

    #[test]
    fn fig3_bp_and_bas() {
        let m = fixtures::fig3();
        let obj = Objective::Fwmp(2);
        let v3 = id(&m, "v3");
        for (p, beta, yes) in [(rat(1, 2), int(2), true), (int(1), int(2), false), (int(0), int(3), true)] {
            let r = decide_bp(&m, v3, obj, &p, &int(0), &beta).unwrap();
            assert_eq!(r.decision(), yes, "p = {p}, beta = {beta}");
        }
        let r = decide_bp(&m, v3, obj, &rat(1, 2), &int(0), &int(2)).unwrap();
        let s = r.synthesize(&int(0)).unwrap().strategy;
        s.audit(&m).unwrap();
        assert!(!s.is_deterministic());

        let r = decide_bas(&m, v3, obj, &int(0), &int(1)).unwrap();
        assert!(r.decision());
        assert_eq!(r.value(), Some(&int(1)));
        let s = r.synthesize(&int(0)).unwrap().strategy;
        s.audit(&m).unwrap();
        assert!(s.is_deterministic());
        assert!(s.num_states() <= 2, "{} states", s.num_states());
        assert!(!decide_bas(&m, v3, obj, &int(0), &rat(3, 2)).unwrap().decision());
    }

    #[test]
    fn fig2_bwmp_is_memoryless() {
        let m = fixtures::fig2();
        let v1 = id(&m, "v1");
        for r in [
            decide_bwc(&m, v1, Objective::Bwmp, &int(0), &int(0)).unwrap(),
            decide_bas(&m, v1, Objective::Bwmp, &int(0), &int(0)).unwrap(),
        ] {
            assert!(r.decision());
            let s = r.synthesize(&rat(1, 10)).unwrap().strategy;
            s.audit(&m).unwrap();
            assert_eq!(s.num_states(), 1);
        }
    }

    #[test]
    fn query_dispatch() {
        let m = fixtures::fig3();
        let q = GuaranteeQuery {
            mode: Mode::Bp,
            objective: Objective::Fwmp(2),
            alpha: int(0),
            beta: int(2),
            prob: None,
            start: "v3".into(),
        };
        assert!(matches!(decide(&m, &q), Err(SolverError::Precondition(_))));
        let q = GuaranteeQuery { start: "zz".into(), ..q };
        assert!(matches!(decide(&m, &q), Err(SolverError::UnknownVertex(_))));
    }
}
