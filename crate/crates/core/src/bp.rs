//! The flow program deciding probability/expectation trade-offs on a collapsed MDP.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Result, SolverError};
use crate::graph::{CollapsedMdp, Origin};
use crate::lp::{LinearProgram, LpStatus, Relation, Var};
use crate::model::Vertex;
use crate::rational::{int, Rational};

/// The program together with handles on its variables.
#[derive(Debug, Clone)]
pub struct BpProgram {
    pub lp: LinearProgram,
    /// Flow on each structural player edge.
    pub edge_vars: BTreeMap<(Vertex, Vertex), Var>,
    pub yes: Vec<Option<Var>>,
    pub no: Vec<Option<Var>>,
}

impl BpProgram {
    fn switch_terms(&self) -> Vec<(Var, Vertex)> {
        let mut t: Vec<_> = self.yes.iter().enumerate().filter_map(|(v, y)| y.map(|y| (y, v))).collect();
        t.extend(self.no.iter().enumerate().filter_map(|(v, y)| y.map(|y| (y, v))));
        t
    }

    fn yes_sum(&self) -> Vec<(Var, Rational)> {
        self.yes.iter().flatten().map(|&y| (y, int(1))).collect()
    }

    fn expectation(&self, c: &CollapsedMdp) -> Vec<(Var, Rational)> {
        self.switch_terms()
            .into_iter()
            .map(|(y, v)| (y, c.loop_payoff[c.mec_at(v).unwrap()].clone()))
            .collect()
    }
}

/// Flow certificate for a yes answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpCertificate {
    pub edge_flow: BTreeMap<(Vertex, Vertex), Rational>,
    /// Expected number of visits of each random vertex.
    pub visits: Vec<Rational>,
    pub yes: Vec<Rational>,
    pub no: Vec<Rational>,
    pub probability: Rational,
    pub expectation: Rational,
}

impl BpCertificate {
    /// Expected number of visits of player vertex `v`.
    pub fn inflow(&self, c: &CollapsedMdp, start: Vertex, v: Vertex) -> Rational {
        let mut total = if v == start { Rational::one() } else { Rational::zero() };
        for u in c.mdp.vertices().filter(|&u| !c.mdp.is_player(u)) {
            if let Some(e) = c.mdp.edge(u, v) {
                total += &self.visits[u] * e.prob.as_ref().unwrap();
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpDecision {
    pub feasible: bool,
    /// Largest probability of a non-negative loop compatible with the expectation bound.
    pub max_probability: Option<Rational>,
    pub certificate: Option<BpCertificate>,
}

fn base_program(c: &CollapsedMdp, start: Vertex) -> Result<BpProgram> {
    let m = &c.mdp;
    if start >= m.num_vertices() {
        return Err(SolverError::UnknownVertex(start.to_string()));
    }
    let mut lp = LinearProgram::new();
    let mut edge_vars = BTreeMap::new();
    for e in m.edges() {
        if m.is_player(e.source) && !matches!(c.origin[e.target], Origin::LoopAux(_)) {
            let x = lp.add_var(format!("x_{}_{}", m.name(e.source), m.name(e.target)));
            edge_vars.insert((e.source, e.target), x);
        }
    }
    let n = m.num_vertices();
    let (mut yes, mut no) = (vec![None; n], vec![None; n]);
    for v in m.vertices().filter(|&v| c.mec_at(v).is_some()) {
        yes[v] = Some(lp.add_var(format!("yes_{}", m.name(v))));
        no[v] = Some(lp.add_var(format!("no_{}", m.name(v))));
    }
    // Visits of random vertex u: 1_start(u) plus its inflow.
    let visits_of = |u: Vertex| -> (Vec<(Var, Rational)>, Rational) {
        let coeffs = edge_vars
            .iter()
            .filter(|((_, t), _)| *t == u)
            .map(|(_, &x)| (x, int(1)))
            .collect();
        (coeffs, if u == start { int(1) } else { int(0) })
    };
    for v in m.player_vertices() {
        // inflow - outflow = -1_start(v)
        let mut coeffs: Vec<(Var, Rational)> = Vec::new();
        let mut rhs = if v == start { int(-1) } else { int(0) };
        for u in m.vertices().filter(|&u| !m.is_player(u) && !matches!(c.origin[u], Origin::LoopAux(_))) {
            if let Some(e) = m.edge(u, v) {
                let p = e.prob.clone().unwrap();
                let (xs, one) = visits_of(u);
                coeffs.extend(xs.into_iter().map(|(x, a)| (x, a * &p)));
                rhs -= one * &p;
            }
        }
        for (&(s, _), &x) in edge_vars.range((v, 0)..(v + 1, 0)) {
            debug_assert_eq!(s, v);
            coeffs.push((x, int(-1)));
        }
        for y in [yes[v], no[v]].into_iter().flatten() {
            coeffs.push((y, int(-1)));
        }
        lp.add_constraint(format!("flow_{}", m.name(v)), coeffs, Relation::Eq, rhs);
    }
    let mut prog = BpProgram { lp, edge_vars, yes, no };
    let total: Vec<_> = prog.switch_terms().into_iter().map(|(y, _)| (y, int(1))).collect();
    prog.lp.add_constraint("switch", total, Relation::Eq, int(1));
    for v in m.vertices() {
        let Some(i) = c.mec_at(v) else { continue };
        let mu = &c.loop_payoff[i];
        if mu.is_zero() {
            continue;
        }
        let name = m.name(v).to_string();
        prog.lp.add_constraint(format!("sign_yes_{name}"), vec![(prog.yes[v].unwrap(), mu.clone())], Relation::Ge, int(0));
        prog.lp.add_constraint(format!("sign_no_{name}"), vec![(prog.no[v].unwrap(), mu.clone())], Relation::Le, int(0));
    }
    Ok(prog)
}

/// Feasibility program: flow conservation, almost-sure switching, expectation at least
/// `beta` and non-negative loops with probability at least `p`.
pub fn build_bp_lp(c: &CollapsedMdp, start: Vertex, p: &Rational, beta: &Rational) -> Result<BpProgram> {
    let mut prog = base_program(c, start)?;
    let exp = prog.expectation(c);
    prog.lp.add_constraint("expectation", exp, Relation::Ge, beta.clone());
    let ys = prog.yes_sum();
    prog.lp.add_constraint("probability", ys, Relation::Ge, p.clone());
    Ok(prog)
}

impl BpProgram {
    /// Reads a certificate off a solution of this program.
    pub fn certificate(&self, c: &CollapsedMdp, start: Vertex, x: &[Rational]) -> BpCertificate {
        certificate(self, c, start, x)
    }
}

fn certificate(prog: &BpProgram, c: &CollapsedMdp, start: Vertex, x: &[Rational]) -> BpCertificate {
    let n = c.mdp.num_vertices();
    let edge_flow: BTreeMap<_, _> = prog.edge_vars.iter().map(|(&e, &v)| (e, x[v].clone())).collect();
    let mut visits = vec![Rational::zero(); n];
    if !c.mdp.is_player(start) {
        visits[start] = Rational::one();
    }
    for (&(_, t), f) in &edge_flow {
        visits[t] += f;
    }
    let read = |ys: &[Option<Var>]| -> Vec<Rational> {
        ys.iter().map(|y| y.map_or_else(Rational::zero, |y| x[y].clone())).collect()
    };
    let (yes, no) = (read(&prog.yes), read(&prog.no));
    let probability = yes.iter().sum();
    let expectation = (0..n)
        .filter_map(|v| c.mec_at(v).map(|i| (&yes[v] + &no[v]) * &c.loop_payoff[i]))
        .sum();
    BpCertificate {
        edge_flow,
        visits,
        yes,
        no,
        probability,
        expectation,
    }
}

/// Decides the program by maximizing the non-negative switching mass under the
/// expectation bound and comparing the optimum with `p` (ties are feasible).
pub fn check_bp(c: &CollapsedMdp, start: Vertex, p: &Rational, beta: &Rational) -> Result<BpDecision> {
    let mut prog = base_program(c, start)?;
    let exp = prog.expectation(c);
    prog.lp.add_constraint("expectation", exp, Relation::Ge, beta.clone());
    let ys = prog.yes_sum();
    prog.lp.maximize(ys);
    let sol = prog.lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Ok(BpDecision {
            feasible: false,
            max_probability: None,
            certificate: None,
        });
    }
    let best = sol.objective.clone().unwrap();
    let feasible = best >= *p;
    Ok(BpDecision {
        feasible,
        max_probability: Some(best),
        certificate: feasible.then(|| certificate(&prog, c, start, &sol.values)),
    })
}

/// Largest expectation achievable while switching to non-negative loops with
/// probability at least `p`, with a certificate attaining it.
pub fn bp_value(c: &CollapsedMdp, start: Vertex, p: &Rational) -> Result<Option<(Rational, BpCertificate)>> {
    let mut prog = base_program(c, start)?;
    let ys = prog.yes_sum();
    prog.lp.add_constraint("probability", ys, Relation::Ge, p.clone());
    let exp = prog.expectation(c);
    prog.lp.maximize(exp);
    let sol = prog.lp.solve()?;
    Ok((sol.status == LpStatus::Optimal).then(|| {
        let cert = certificate(&prog, c, start, &sol.values);
        (sol.objective.unwrap(), cert)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::{collapse_mecs, mec_decomposition};
    use crate::rational::rat;

    fn fig3() -> (CollapsedMdp, Vertex) {
        let m = fixtures::fig3();
        let c = collapse_mecs(&m, &mec_decomposition(&m), &[int(1), int(-1), int(9)]);
        let s = c.quotient_of[m.vertex("v3").unwrap()];
        (c, s)
    }

    fn conserves_flow(c: &CollapsedMdp, start: Vertex, cert: &BpCertificate) -> bool {
        c.mdp.player_vertices().all(|v| {
            let out: Rational = cert
                .edge_flow
                .iter()
                .filter(|((s, _), _)| *s == v)
                .map(|(_, f)| f.clone())
                .sum::<Rational>()
                + &cert.yes[v]
                + &cert.no[v];
            cert.inflow(c, start, v) == out
        })
    }

    #[test]
    fn fig3_decisions() {
        let (c, s) = fig3();
        for (p, beta, expect) in [
            (rat(1, 2), int(2), true),
            (rat(7, 10), int(2), true),
            (rat(3, 4), int(2), false),
            (int(0), int(3), true),
            (int(1), int(2), false),
            (int(1), int(1), true),
        ] {
            let d = check_bp(&c, s, &p, &beta).unwrap();
            assert_eq!(d.feasible, expect, "p = {p}, beta = {beta}");
            if let Some(cert) = &d.certificate {
                assert!(cert.probability >= p && cert.expectation >= beta);
                assert!(conserves_flow(&c, s, cert));
                assert_eq!(cert.yes.iter().chain(&cert.no).sum::<Rational>(), int(1));
            }
        }
        assert_eq!(check_bp(&c, s, &rat(1, 2), &int(2)).unwrap().max_probability, Some(rat(7, 10)));
    }

    #[test]
    fn stay_probability_family() {
        let (c, s) = fig3();
        let stay = |prog: &BpProgram| vec![(prog.yes[s].unwrap(), int(1)), (prog.no[s].unwrap(), int(1))];
        for q in [rat(1, 6), rat(1, 4), rat(1, 3), rat(1, 2)] {
            let mut prog = build_bp_lp(&c, s, &rat(1, 2), &int(2)).unwrap();
            let t = stay(&prog);
            prog.lp.add_constraint("stay", t, Relation::Eq, q.clone());
            assert!(prog.lp.solve().unwrap().is_feasible(), "q = {q}");
        }
        let mut prog = build_bp_lp(&c, s, &rat(1, 2), &int(2)).unwrap();
        let t = stay(&prog);
        prog.lp.maximize(t.clone());
        assert_eq!(prog.lp.solve().unwrap().objective, Some(rat(1, 2)));
        prog.lp.minimize(t);
        assert_eq!(prog.lp.solve().unwrap().objective, Some(rat(1, 6)));
    }

    #[test]
    fn values_and_dump() {
        let (c, s) = fig3();
        assert_eq!(bp_value(&c, s, &int(0)).unwrap().unwrap().0, int(3));
        assert_eq!(bp_value(&c, s, &int(1)).unwrap().unwrap().0, int(1));
        assert_eq!(bp_value(&c, s, &rat(1, 2)).unwrap().unwrap().0, rat(8, 3));
        let text = build_bp_lp(&c, s, &rat(1, 2), &int(2)).unwrap().lp.to_text();
        assert!(text.contains("probability:") && text.contains("1/2"));
        assert!(matches!(check_bp(&c, 99, &int(0), &int(0)), Err(SolverError::UnknownVertex(_))));
    }
}
