//! Small models used throughout the tests, benchmarks and documentation.

use crate::model::{parse_mdp, Mdp, MdpBuilder, Owner};
use crate::rational::Rational;
use num_traits::One;

pub const FIG1: &str = include_str!("../fixtures/fig1.wmdp");
pub const FIG2: &str = include_str!("../fixtures/fig2.wmdp");
pub const FIG3: &str = include_str!("../fixtures/fig3.wmdp");

/// Retry loop next to a reachable high-payoff cycle.
pub fn fig1() -> Mdp {
    parse_mdp(FIG1).expect("fig1 fixture is valid")
}

/// Three-vertex arena with a bounded-window value of zero.
pub fn fig2() -> Mdp {
    parse_mdp(FIG2).expect("fig2 fixture is valid")
}

/// Three MECs behind a single random split.
pub fn fig3() -> Mdp {
    parse_mdp(FIG3).expect("fig3 fixture is valid")
}

/// Reset chain of length `m`: reaching `um` needs `m` consecutive right moves,
/// each taken with probability `1 - p`. `u0` can also idle through `vm1`.
pub fn reset_chain(m: usize, p: &Rational) -> Mdp {
    assert!(m >= 1);
    let mut b = MdpBuilder::new();
    let u: Vec<_> = (0..=m)
        .map(|i| b.add_vertex(format!("u{i}"), Owner::Player).unwrap())
        .collect();
    let idle = b.add_vertex("vm1", Owner::Random).unwrap();
    let v: Vec<_> = (0..=m)
        .map(|i| b.add_vertex(format!("v{i}"), Owner::Random).unwrap())
        .collect();
    let q = Rational::one() - p;
    b.add_edge(u[0], idle, -1, None);
    b.add_edge(idle, u[0], 1, Some(Rational::one()));
    for i in 0..=m {
        b.add_edge(u[i], v[i], -1, None);
    }
    for i in 0..m {
        b.add_edge(v[i], u[i + 1], -1, Some(q.clone()));
        b.add_edge(v[i], u[0], -1, Some(p.clone()));
    }
    b.add_edge(v[m], u[m], 3, Some(Rational::one()));
    b.build().expect("reset chain is valid")
}

/// One player vertex with a self-loop of payoff `c` through an auxiliary random vertex.
pub fn self_loop(c: i64) -> Mdp {
    let mut b = MdpBuilder::new();
    let s = b.add_vertex("s", Owner::Player).unwrap();
    let r = b.add_vertex("r", Owner::Random).unwrap();
    b.add_edge(s, r, c, None);
    b.add_edge(r, s, c, Some(Rational::one()));
    b.build().expect("self loop is valid")
}
