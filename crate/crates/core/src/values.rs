//! Stochastic values: per-MEC almost-sure values, expected committed loop
//! values, switching bounds and the consecutive-tails recurrence.

use num_traits::{One, Signed, Zero};

use crate::error::{Result, SolverError};
use crate::games::sure_region;
use crate::graph::{
    can_reach, end_components, mec_decomposition, members, rank_choices, region_of, restrict,
    MecDecomposition, Region, SubMdp,
};
use crate::lp::{LinearProgram, Relation};
use crate::model::{Mdp, Owner, Vertex};
use crate::objective::Objective;
use crate::rational::{int, value_grid, Rational};

/// Largest sub-EC of `sub` on which `{Φ ≥ λ}` holds surely, if any (local indices).
fn stable_sub_ec(sub: &Mdp, objective: Objective, lambda: &Rational) -> Option<Region> {
    let n = sub.num_vertices();
    let mut cur = vec![true; n];
    loop {
        let inner: SubMdp = restrict(sub, &cur).expect("unions of end components are closed");
        let won = inner.lift(&sure_region(&inner.mdp, objective, lambda));
        let next = region_of(n, end_components(sub, &won).into_iter().flatten());
        if next == cur {
            return cur.contains(&true).then_some(cur);
        }
        cur = next;
    }
}

/// Almost-sure value of one MEC together with the sub-EC that witnesses it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MecValue {
    pub value: Rational,
    /// Vertices (of the whole model) of the end component where `{Φ ≥ value}` holds surely.
    pub witness: Vec<Vertex>,
}

fn grid_for(objective: Objective, n: usize, w: i64) -> Vec<Rational> {
    match objective {
        Objective::Fwmp(l) => value_grid(l as i64, w, false),
        Objective::Bwmp => value_grid(n as i64, w, false),
    }
}

fn mec_value_unchecked(mdp: &Mdp, mec: &[Vertex], objective: Objective) -> MecValue {
    let sub = restrict(mdp, &region_of(mdp.num_vertices(), mec.iter().copied()))
        .expect("end components are closed");
    let grid = grid_for(objective, sub.mdp.num_vertices(), sub.mdp.max_abs_weight());
    // The lowest grid point is always met: every window closes at once.
    let (mut lo, mut hi) = (0, grid.len());
    let mut witness = stable_sub_ec(&sub.mdp, objective, &grid[0]).expect("lowest threshold holds");
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        match stable_sub_ec(&sub.mdp, objective, &grid[mid]) {
            Some(w) => {
                lo = mid;
                witness = w;
            }
            None => hi = mid,
        }
    }
    MecValue {
        value: grid[lo].clone(),
        witness: members(&witness).into_iter().map(|v| sub.original[v]).collect(),
    }
}

/// Largest grid value `λ` such that `{Φ ≥ λ}` holds almost surely inside `mec`.
pub fn mec_almost_sure_value(mdp: &Mdp, mec: &[Vertex], objective: Objective) -> Result<Rational> {
    let mut sorted = mec.to_vec();
    sorted.sort_unstable();
    if !mec_decomposition(mdp).mecs.contains(&sorted) {
        return Err(SolverError::NotAMec);
    }
    Ok(mec_value_unchecked(mdp, &sorted, objective).value)
}

/// MEC decomposition with the almost-sure value of every MEC.
pub fn mec_values(mdp: &Mdp, objective: Objective) -> (MecDecomposition, Vec<MecValue>) {
    let dec = mec_decomposition(mdp);
    let vals = dec
        .mecs
        .iter()
        .map(|m| mec_value_unchecked(mdp, m, objective))
        .collect();
    (dec, vals)
}

/// Optimal commitment: value per vertex, where to commit, and how to move otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitSolution {
    pub values: Vec<Rational>,
    pub commit: Region,
    /// Move at uncommitted player vertices.
    pub choice: Vec<Option<Vertex>>,
}

impl CommitSolution {
    pub fn value(&self, v: Vertex) -> &Rational {
        &self.values[v]
    }
}

/// Optimal expected mean payoff when every structural edge pays `-1` and the
/// player may commit forever to a loop of payoff `loops[v]` at designated player vertices.
pub fn expected_mp_with_commit(mdp: &Mdp, loops: &[Option<Rational>], start: Vertex) -> Result<CommitSolution> {
    let n = mdp.num_vertices();
    let looping = region_of(n, (0..n).filter(|&v| loops[v].is_some()));
    if !can_reach(mdp, &vec![true; n], &looping)[start] {
        return Err(SolverError::NoLoopReachable(mdp.name(start).to_string()));
    }
    let minus_one = int(-1);
    // Shifted rewards: never committing is worth 0, committing at v is worth max(μ, -1) + 1.
    let reward: Vec<Option<Rational>> = loops
        .iter()
        .map(|m| m.as_ref().map(|m| m.max(&minus_one).clone() + Rational::one()))
        .collect();
    let mut lp = LinearProgram::new();
    let x: Vec<_> = mdp.vertices().map(|v| lp.add_var(format!("x_{}", mdp.name(v)))).collect();
    for v in mdp.vertices() {
        if let Some(r) = &reward[v] {
            lp.add_constraint(format!("commit_{}", mdp.name(v)), vec![(x[v], int(1))], Relation::Ge, r.clone());
        }
        match mdp.owner(v) {
            Owner::Player => {
                for u in mdp.successors(v) {
                    lp.add_constraint(
                        format!("move_{}_{}", mdp.name(v), mdp.name(u)),
                        vec![(x[v], int(1)), (x[u], int(-1))],
                        Relation::Ge,
                        Rational::zero(),
                    );
                }
            }
            Owner::Random => {
                let mut coeffs = vec![(x[v], int(1))];
                coeffs.extend(mdp.out_edges(v).map(|e| (x[e.target], -e.prob.clone().unwrap())));
                lp.add_constraint(format!("avg_{}", mdp.name(v)), coeffs, Relation::Ge, Rational::zero());
            }
        }
    }
    lp.minimize(x.iter().map(|&xv| (xv, int(1))).collect());
    let sol = lp.solve()?;
    let xs: Vec<Rational> = x.iter().map(|&xv| sol.value(xv).clone()).collect();
    let commit: Region = (0..n)
        .map(|v| reward[v].as_ref().is_some_and(|r| *r == xs[v]))
        .collect();
    let choice = rank_choices(mdp, &commit, |v, u| xs[u] == xs[v]);
    Ok(CommitSolution {
        values: xs.into_iter().map(|x| x - Rational::one()).collect(),
        commit,
        choice,
    })
}

/// Step bound for leaving a memoryless phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchPlan {
    /// Player steps after which the uncommitted mass is small enough.
    pub steps: usize,
    /// Target precision.
    pub epsilon: Rational,
    /// Bound on the uncommitted mass that was used.
    pub margin: Rational,
    /// Probability of not having committed after `steps` player steps.
    pub miss: Rational,
}

fn chain_step(mdp: &Mdp, choice: &[Option<Vertex>], v: Vertex) -> Vec<(Vertex, Rational)> {
    match mdp.owner(v) {
        Owner::Player => vec![(choice[v].expect("memoryless choice at every player vertex"), Rational::one())],
        Owner::Random => mdp.out_edges(v).map(|e| (e.target, e.prob.clone().unwrap())).collect(),
    }
}

/// Uncommitted mass after each player step, until `stop` accepts it.
fn miss_profile(
    mdp: &Mdp,
    choice: &[Option<Vertex>],
    commit: &[bool],
    start: Vertex,
    mut stop: impl FnMut(usize, &Rational) -> bool,
) -> Result<(usize, Rational)> {
    let n = mdp.num_vertices();
    // Every vertex the induced chain can reach must still be able to reach `commit`.
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        if commit[v] {
            continue;
        }
        for (u, _) in chain_step(mdp, choice, v) {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    let mut ok = commit.to_vec();
    loop {
        let next: Vec<bool> = (0..n)
            .map(|v| ok[v] || (seen[v] && chain_step(mdp, choice, v).iter().any(|(u, _)| ok[*u])))
            .collect();
        if next == ok {
            break;
        }
        ok = next;
    }
    if (0..n).any(|v| seen[v] && !ok[v]) {
        return Err(SolverError::CommitNotAlmostSure);
    }
    // Random vertices are resolved at once; a step is one player move.
    let settle = |mass: Vec<Rational>| -> Vec<Rational> {
        let mut out = vec![Rational::zero(); n];
        for v in (0..n).filter(|&v| !mass[v].is_zero()) {
            if mdp.is_player(v) || commit[v] {
                out[v] += &mass[v];
            } else {
                for (u, p) in chain_step(mdp, choice, v) {
                    out[u] += &mass[v] * p;
                }
            }
        }
        out
    };
    let mut mass = vec![Rational::zero(); n];
    mass[start] = Rational::one();
    mass = settle(mass);
    let mut steps = 0;
    loop {
        for v in (0..n).filter(|&v| commit[v]) {
            mass[v] = Rational::zero();
        }
        let miss: Rational = mass.iter().sum();
        if stop(steps, &miss) {
            return Ok((steps, miss));
        }
        let mut moved = vec![Rational::zero(); n];
        for v in (0..n).filter(|&v| !mass[v].is_zero()) {
            for (u, p) in chain_step(mdp, choice, v) {
                moved[u] += &mass[v] * p;
            }
        }
        mass = settle(moved);
        steps += 1;
    }
}

/// Least number of player steps after which the memoryless `choice` has entered
/// `commit` with probability at least `1 - ε`.
pub fn switch_step_bound(
    mdp: &Mdp,
    choice: &[Option<Vertex>],
    commit: &[bool],
    start: Vertex,
    epsilon: &Rational,
) -> Result<SwitchPlan> {
    let plan = |steps, miss| SwitchPlan {
        steps,
        epsilon: epsilon.clone(),
        margin: epsilon.clone(),
        miss,
    };
    if commit[start] || *epsilon >= Rational::one() {
        return Ok(plan(0, Rational::zero()));
    }
    let (steps, miss) = miss_profile(mdp, choice, commit, start, |_, miss| miss <= epsilon)?;
    Ok(plan(steps, miss))
}

/// Probability of not having entered `commit` within `steps` player steps.
pub fn uncommitted_mass(
    mdp: &Mdp,
    choice: &[Option<Vertex>],
    commit: &[bool],
    start: Vertex,
    steps: usize,
) -> Result<Rational> {
    Ok(miss_profile(mdp, choice, commit, start, |k, _| k == steps)?.1)
}

/// `T_0, T_1, ...` where `T_N` is the probability of no `m` consecutive tails in `N` tosses
/// of a coin showing heads with probability `p`.
fn tails_sequence(p: &Rational, m: usize) -> impl Iterator<Item = Rational> + '_ {
    assert!(m >= 1 && p.is_positive() && *p < Rational::one());
    let q = Rational::one() - p;
    let first_heads: Vec<Rational> = (0..m).map(|i| p * num_traits::pow(q.clone(), i)).collect();
    let mut t: Vec<Rational> = Vec::new();
    (0..).map(move |k| {
        let next = if k < m {
            Rational::one()
        } else {
            first_heads.iter().enumerate().map(|(i, h)| h * &t[k - 1 - i]).sum()
        };
        t.push(next.clone());
        next
    })
}

/// Probability of no `m` consecutive tails in `tosses` tosses of a coin showing heads with probability `p`.
pub fn consecutive_tails_prob(p: &Rational, m: usize, tosses: usize) -> Rational {
    tails_sequence(p, m).nth(tosses).expect("the sequence is infinite")
}

/// Least `N` with `T_N <= ε`.
pub fn tails_horizon(p: &Rational, m: usize, epsilon: &Rational) -> usize {
    tails_sequence(p, m)
        .position(|t| t <= *epsilon)
        .expect("T_N tends to zero")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::games::fwmp_sure_values;
    use crate::rational::rat;

    #[test]
    fn fig3_mec_values() {
        let m = fixtures::fig3();
        let (dec, vals) = mec_values(&m, Objective::Fwmp(2));
        assert_eq!(dec.mecs.len(), 3);
        let v: Vec<_> = vals.iter().map(|x| x.value.clone()).collect();
        assert_eq!(v, vec![int(1), int(-1), int(9)]);
        let ids: Vec<_> = ["v5", "v7"].iter().map(|n| m.vertex(n).unwrap()).collect();
        assert_eq!(mec_almost_sure_value(&m, &ids, Objective::Fwmp(2)).unwrap(), int(-1));
        assert_eq!(
            mec_almost_sure_value(&m, &ids[..1], Objective::Fwmp(2)),
            Err(SolverError::NotAMec)
        );
    }

    #[test]
    fn commit_on_fig1() {
        let m = fixtures::fig1();
        let sure = fwmp_sure_values(&m, 3).unwrap();
        let loops: Vec<_> = m.vertices().map(|v| m.is_player(v).then(|| sure[v].clone())).collect();
        let v2 = m.vertex("v2").unwrap();
        let sol = expected_mp_with_commit(&m, &loops, v2).unwrap();
        assert_eq!(sol.value(v2), &int(2));
        assert_eq!(sol.choice[v2], m.vertex("v3"));
        assert!(sol.commit[m.vertex("v4").unwrap()]);
    }

    #[test]
    fn commit_at_start_and_coin() {
        let m = fixtures::self_loop(0);
        let sol = expected_mp_with_commit(&m, &[Some(int(4)), None], 0).unwrap();
        assert_eq!(sol.value(0), &int(4));
        let coin = crate::model::parse_mdp(
            "vertex s player\nvertex c random\nvertex a player\nvertex b player\nvertex la random\nvertex lb random\n\
             edge s c weight 0\nedge c a weight 0 prob 1/2\nedge c b weight 0 prob 1/2\n\
             edge a la weight 0\nedge la a weight 0 prob 1\nedge b lb weight 0\nedge lb b weight 0 prob 1\n",
        )
        .unwrap();
        let loops = vec![None, None, Some(int(0)), Some(int(4)), None, None];
        assert_eq!(expected_mp_with_commit(&coin, &loops, 0).unwrap().value(0), &int(2));
        let none = vec![None; 6];
        assert!(matches!(
            expected_mp_with_commit(&coin, &none, 0),
            Err(SolverError::NoLoopReachable(_))
        ));
    }

    #[test]
    fn switch_bounds() {
        let chain = fixtures::reset_chain(1, &rat(1, 2));
        let id = |n: &str| chain.vertex(n).unwrap();
        let mut choice = vec![None; chain.num_vertices()];
        choice[id("u0")] = Some(id("v0"));
        choice[id("u1")] = Some(id("v1"));
        let commit = region_of(chain.num_vertices(), [id("u1")]);
        let plan = switch_step_bound(&chain, &choice, &commit, id("u0"), &rat(1, 1000)).unwrap();
        assert_eq!(plan.steps, 10);
        assert_eq!(plan.miss, rat(1, 1024));
        let before = uncommitted_mass(&chain, &choice, &commit, id("u0"), 9).unwrap();
        assert!(before > rat(1, 1000));
        assert_eq!(switch_step_bound(&chain, &choice, &commit, id("u1"), &rat(1, 1000)).unwrap().steps, 0);
        assert_eq!(switch_step_bound(&chain, &choice, &commit, id("u0"), &int(1)).unwrap().steps, 0);
        choice[id("u0")] = Some(id("vm1"));
        assert_eq!(
            switch_step_bound(&chain, &choice, &commit, id("u0"), &rat(1, 1000)),
            Err(SolverError::CommitNotAlmostSure)
        );

        let retry = fixtures::reset_chain(1, &rat(4, 5));
        let plan = switch_step_bound(
            &retry,
            &[Some(3), Some(4), None, None, None],
            &region_of(5, [1]),
            0,
            &rat(1, 100),
        )
        .unwrap();
        assert_eq!(plan.steps, 21);
    }

    #[test]
    fn tails_recurrence() {
        for m in 1..4 {
            for k in 0..m {
                assert_eq!(consecutive_tails_prob(&rat(1, 3), m, k), int(1));
            }
        }
        assert_eq!(consecutive_tails_prob(&rat(1, 2), 1, 3), rat(1, 8));
        assert_eq!(consecutive_tails_prob(&rat(1, 2), 2, 2), rat(3, 4));
        assert_eq!(tails_horizon(&rat(1, 2), 1, &rat(1, 1000)), 10);
    }
}
