//! Brute-force reference solver for sure `FWMP(ℓ, λ)` on small games.
//!
//! The game is unfolded into an explicit product that tracks the oldest open
//! window. A window still open after `ℓ` steps is a failure; the player wins
//! iff failures can be kept finite (a co-Büchi condition).

use std::collections::HashMap;

use crate::error::{Result, SolverError};
use crate::graph::{attractor, Region};
use crate::model::{Mdp, MdpBuilder, Owner, Vertex};
use crate::rational::Rational;

/// Product states above this bound are refused.
pub const MAX_PRODUCT_STATES: usize = 200_000;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Tracker {
    Fresh,
    Open { steps: usize, sum: i64 },
}

pub fn oracle_fwmp_region(mdp: &Mdp, l: usize, lambda: &Rational) -> Result<Region> {
    let (game, _) = mdp.normalize_guarantee(lambda);
    let n = game.num_vertices();
    let wmax = game.max_abs_weight().max(1) as usize;
    let estimate = n * (1 + l * l * wmax) * 2;
    if estimate > MAX_PRODUCT_STATES {
        return Err(SolverError::TooLarge(estimate));
    }
    let mut index: HashMap<(Vertex, Tracker, bool), usize> = HashMap::new();
    let mut states: Vec<(Vertex, Tracker, bool)> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut stack = Vec::new();
    let mut intern = |s: (Vertex, Tracker, bool), states: &mut Vec<_>, stack: &mut Vec<usize>| {
        *index.entry(s).or_insert_with(|| {
            states.push(s);
            stack.push(states.len() - 1);
            states.len() - 1
        })
    };
    for v in game.vertices() {
        intern((v, Tracker::Fresh, false), &mut states, &mut stack);
    }
    while let Some(i) = stack.pop() {
        let (v, t, _) = states[i];
        for e in game.out_edges(v) {
            let (steps, sum) = match t {
                Tracker::Fresh => (1, e.weight),
                Tracker::Open { steps, sum } => (steps + 1, sum + e.weight),
            };
            let succ = if sum >= 0 {
                (e.target, Tracker::Fresh, false)
            } else if steps >= l {
                (e.target, Tracker::Fresh, true)
            } else {
                (e.target, Tracker::Open { steps, sum }, false)
            };
            let j = intern(succ, &mut states, &mut stack);
            edges.push((i, j));
        }
        if states.len() > MAX_PRODUCT_STATES {
            return Err(SolverError::TooLarge(states.len()));
        }
    }
    let mut b = MdpBuilder::new();
    for (i, &(v, _, _)) in states.iter().enumerate() {
        b.add_vertex(i.to_string(), game.owner(v));
    }
    for &(i, j) in &edges {
        b.add_edge(i, j, 0, None);
    }
    let product = b.build_unchecked();
    let failing: Region = states.iter().map(|s| s.2).collect();
    let lost = adversary_buchi(&product, &failing);
    Ok(game
        .vertices()
        .map(|v| !lost[index[&(v, Tracker::Fresh, false)]])
        .collect())
}

/// States from which the adversary visits `target` infinitely often.
fn adversary_buchi(g: &Mdp, target: &[bool]) -> Region {
    let n = g.num_vertices();
    let mut arena = vec![true; n];
    loop {
        let hit = attractor(g, &arena, target, Owner::Random).region;
        let safe: Region = (0..n).map(|v| arena[v] && !hit[v]).collect();
        if !safe.contains(&true) {
            return arena;
        }
        let won = attractor(g, &arena, &safe, Owner::Player).region;
        for (a, w) in arena.iter_mut().zip(won) {
            *a &= !w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::games::fwmp_sure_region;
    use crate::rational::int;

    #[test]
    fn agrees_on_fig1() {
        let m = fixtures::fig1();
        for l in 1..=3 {
            for lambda in [-1, 0, 1, 2] {
                assert_eq!(
                    oracle_fwmp_region(&m, l, &int(lambda)).unwrap(),
                    fwmp_sure_region(&m, l, &int(lambda)),
                    "l={l} lambda={lambda}"
                );
            }
        }
    }

    #[test]
    fn trivial_games() {
        assert_eq!(oracle_fwmp_region(&fixtures::self_loop(0), 2, &int(0)).unwrap(), vec![true; 2]);
        let m = crate::model::parse_mdp(
            "vertex a player\nvertex b random\nedge a b weight 0\nedge b a weight -1 prob 1\n",
        )
        .unwrap();
        assert_eq!(oracle_fwmp_region(&m, 1, &int(0)).unwrap(), vec![false; 2]);
    }

    #[test]
    fn refuses_large_instances() {
        let m = fixtures::reset_chain(40, &crate::rational::rat(1, 2)).map_weights(|w| w * 1000);
        assert!(matches!(oracle_fwmp_region(&m, 10, &int(0)), Err(SolverError::TooLarge(_))));
    }
}
