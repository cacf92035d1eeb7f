//! Exact values of ultimately periodic runs.

use crate::error::{Result, SolverError};
use crate::model::{Mdp, Vertex};
use crate::objective::Objective;
use crate::rational::{int, rat, Rational};

/// An ultimately periodic run `prefix · cycle^ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lasso {
    pub prefix: Vec<Vertex>,
    pub cycle: Vec<Vertex>,
}

impl Lasso {
    pub fn new(prefix: Vec<Vertex>, cycle: Vec<Vertex>) -> Self {
        Lasso { prefix, cycle }
    }

    pub fn cycle(cycle: Vec<Vertex>) -> Self {
        Lasso {
            prefix: Vec::new(),
            cycle,
        }
    }

    /// Payoffs along the cycle, including the wrap-around edge.
    pub fn cycle_weights(&self, mdp: &Mdp) -> Result<Vec<i64>> {
        if self.cycle.is_empty() {
            return Err(SolverError::InvalidLasso("empty cycle".into()));
        }
        let mut path: Vec<Vertex> = self.prefix.clone();
        path.extend(&self.cycle);
        path.push(self.cycle[0]);
        let mut weights = Vec::with_capacity(path.len());
        for pair in path.windows(2) {
            let w = mdp.weight(pair[0], pair[1]).ok_or_else(|| {
                SolverError::InvalidLasso(format!(
                    "no edge {} -> {}",
                    mdp.name(pair[0]),
                    mdp.name(pair[1])
                ))
            })?;
            weights.push(w);
        }
        Ok(weights.split_off(self.prefix.len()))
    }
}

/// Exact objective value of a lasso run.
pub fn lasso_value(mdp: &Mdp, run: &Lasso, objective: Objective) -> Result<Rational> {
    let weights = run.cycle_weights(mdp)?;
    Ok(match objective {
        Objective::Fwmp(l) => cyclic_window_value(&weights, l),
        Objective::Bwmp => rat(weights.iter().sum(), weights.len() as i64),
    })
}

/// Best mean over windows of length `1..=l` starting at each position of the
/// infinitely repeated `weights`, minimized over positions.
pub fn cyclic_window_value(weights: &[i64], l: usize) -> Rational {
    let k = weights.len();
    (0..k)
        .map(|i| best_window(l, |t| weights[(i + t) % k]))
        .min()
        .expect("nonempty cycle")
}

/// `max_{1<=j<=l} (w(0)+...+w(j-1))/j`.
pub fn best_window(l: usize, w: impl Fn(usize) -> i64) -> Rational {
    let mut sum = 0i64;
    let mut best: Option<Rational> = None;
    for j in 1..=l {
        sum += w(j - 1);
        let mean = rat(sum, j as i64);
        if best.as_ref().is_none_or(|b| &mean > b) {
            best = Some(mean);
        }
    }
    best.unwrap_or_else(|| int(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn names(m: &Mdp, ns: &[&str]) -> Vec<Vertex> {
        ns.iter().map(|n| m.vertex(n).unwrap()).collect()
    }

    #[test]
    fn alternating_cycle() {
        assert_eq!(cyclic_window_value(&[-1, 1], 2), int(0));
        assert_eq!(cyclic_window_value(&[-1, 1], 1), int(-1));
    }

    #[test]
    fn fig1_alternating_cycle() {
        let m = fixtures::fig1();
        let run = Lasso::new(
            names(&m, &["v2", "v3"]),
            names(&m, &["v4", "v5", "v7", "v8", "v7", "v6"]),
        );
        assert_eq!(run.cycle_weights(&m).unwrap(), vec![0, 0, 6, -4, 0, 10]);
        assert_eq!(lasso_value(&m, &run, Objective::Fwmp(3)).unwrap(), int(2));
        assert_eq!(lasso_value(&m, &run, Objective::Bwmp).unwrap(), int(2));
    }

    #[test]
    fn self_loops() {
        for c in [-3, 0, 7] {
            let m = fixtures::self_loop(c);
            let run = Lasso::cycle(vec![0, 1]);
            for l in 1..4 {
                assert_eq!(lasso_value(&m, &run, Objective::Fwmp(l)).unwrap(), int(c));
            }
            assert_eq!(lasso_value(&m, &run, Objective::Bwmp).unwrap(), int(c));
        }
    }

    #[test]
    fn rejects_missing_edges() {
        let m = fixtures::fig1();
        let bad = Lasso::cycle(names(&m, &["v0", "v2"]));
        assert!(matches!(
            lasso_value(&m, &bad, Objective::Bwmp),
            Err(SolverError::InvalidLasso(_))
        ));
        assert!(lasso_value(&m, &Lasso::cycle(vec![]), Objective::Bwmp).is_err());
    }
}
