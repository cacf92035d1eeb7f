//! Two-player readings of an MDP: random vertices become adversarial.
//!
//! Thresholds are rational; each solver first rescales payoffs with
//! `w ↦ b·w − a` for `λ = a/b` so that everything is decided against zero.

use std::collections::HashMap;

use num_traits::ToPrimitive;

use crate::error::{Result, SolverError};
use crate::graph::{attractor, members, Attractor, Region};
use crate::model::{Mdp, Owner, Vertex};
use crate::objective::Objective;
use crate::rational::{rat, value_grid, Rational};
use crate::strategy::{dirac, Distribution, MealyStrategy, StrategyLogic};

/// `opt` over successors inside `within`: max at player vertices, min at random ones.
fn best_over(g: &Mdp, v: Vertex, within: &[bool], value: impl Fn(Vertex, i64) -> i64) -> i64 {
    let vals = g
        .out_edges(v)
        .filter(|e| within[e.target])
        .map(|e| value(e.target, e.weight));
    let best = if g.is_player(v) { vals.max() } else { vals.min() };
    best.expect("sub-arena keeps a successor for every vertex")
}

/// `f[j-1][v]`: the best guaranteed maximum prefix sum over the next `j` edges.
/// A window opened at `v` can be closed within `j` steps iff `f[j-1][v] >= 0`.
pub fn window_table(g: &Mdp, within: &[bool], l: usize) -> Vec<Vec<i64>> {
    let n = g.num_vertices();
    let mut table: Vec<Vec<i64>> = Vec::with_capacity(l);
    for j in 0..l {
        let row = (0..n)
            .map(|v| {
                if !within[v] {
                    return 0;
                }
                best_over(g, v, within, |u, w| match j {
                    0 => w,
                    _ => w + table[j - 1][u].max(0),
                })
            })
            .collect();
        table.push(row);
    }
    table
}

/// Largest sub-arena of `within` where the player can close every window within `l` steps.
fn direct_region(g: &Mdp, within: &[bool], l: usize) -> (Region, Vec<Vec<i64>>) {
    let mut alive = within.to_vec();
    loop {
        let table = window_table(g, &alive, l);
        let bad: Region = (0..g.num_vertices())
            .map(|v| alive[v] && table[l - 1][v] < 0)
            .collect();
        if !bad.contains(&true) {
            return (alive, table);
        }
        let lost = attractor(g, &alive, &bad, Owner::Random).region;
        for (a, l) in alive.iter_mut().zip(lost) {
            *a &= !l;
        }
    }
}

#[derive(Debug, Clone)]
pub struct FwmpLayer {
    pub subgame: Region,
    pub direct: Region,
    pub attractor: Attractor,
    pub table: Vec<Vec<i64>>,
}

/// Sure winning region for `FWMP(ℓ, λ)`, kept with the data needed to play it.
#[derive(Debug, Clone)]
pub struct FwmpSolution {
    pub window: usize,
    /// The game with payoffs rescaled so that the threshold is zero.
    pub game: Mdp,
    pub region: Region,
    pub layers: Vec<FwmpLayer>,
    pub layer_of: Vec<Option<usize>>,
}

pub fn solve_fwmp(mdp: &Mdp, l: usize, lambda: &Rational) -> FwmpSolution {
    assert!(l >= 1, "window length must be positive");
    let (game, _) = mdp.normalize_guarantee(lambda);
    let n = game.num_vertices();
    let mut rest = vec![true; n];
    let mut layers = Vec::new();
    let mut layer_of = vec![None; n];
    loop {
        let (direct, table) = direct_region(&game, &rest, l);
        if !direct.contains(&true) {
            break;
        }
        let attr = attractor(&game, &rest, &direct, Owner::Player);
        for v in members(&attr.region) {
            layer_of[v] = Some(layers.len());
            rest[v] = false;
        }
        layers.push(FwmpLayer {
            subgame: rest.iter().zip(&attr.region).map(|(r, a)| *r || *a).collect(),
            direct,
            attractor: attr,
            table,
        });
    }
    FwmpSolution {
        window: l,
        game,
        region: layer_of.iter().map(Option::is_some).collect(),
        layers,
        layer_of,
    }
}

/// Vertices from which the player surely wins `FWMP(ℓ, λ)`.
pub fn fwmp_sure_region(mdp: &Mdp, l: usize, lambda: &Rational) -> Region {
    solve_fwmp(mdp, l, lambda).region
}

/// Largest grid value won from each vertex, by binary search over `grid`.
fn values_by_search(n: usize, grid: &[Rational], region: impl Fn(&Rational) -> Region) -> Vec<Rational> {
    let mut cache: HashMap<usize, Region> = HashMap::new();
    let mut wins = |i: usize, v: Vertex| cache.entry(i).or_insert_with(|| region(&grid[i]))[v];
    (0..n)
        .map(|v| {
            let (mut lo, mut hi) = (0, grid.len() - 1);
            if wins(hi, v) {
                return grid[hi].clone();
            }
            // Invariant: wins at lo, loses at hi.
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if wins(mid, v) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            grid[lo].clone()
        })
        .collect()
}

/// Sure `Φ_FWMPℓ` value of every vertex. Requires every vertex to win at threshold 0.
pub fn fwmp_sure_values(mdp: &Mdp, l: usize) -> Result<Vec<Rational>> {
    let zero = rat(0, 1);
    let at_zero = fwmp_sure_region(mdp, l, &zero);
    if let Some(v) = at_zero.iter().position(|w| !w) {
        return Err(SolverError::Precondition(format!(
            "{} does not surely win at threshold 0",
            mdp.name(v)
        )));
    }
    let grid = value_grid(l as i64, mdp.max_abs_weight(), true);
    Ok(values_by_search(mdp.num_vertices(), &grid, |x| {
        fwmp_sure_region(mdp, l, x)
    }))
}

/// Sure values without the non-negativity precondition (searches the signed grid).
pub fn sure_values(mdp: &Mdp, objective: Objective) -> Vec<Rational> {
    match objective {
        Objective::Fwmp(l) => {
            let grid = value_grid(l as i64, mdp.max_abs_weight(), false);
            values_by_search(mdp.num_vertices(), &grid, |x| fwmp_sure_region(mdp, l, x))
        }
        Objective::Bwmp => mp_game_values(mdp),
    }
}

/// Sure winning region of `{Φ ≥ λ}` for either objective.
pub fn sure_region(mdp: &Mdp, objective: Objective, lambda: &Rational) -> Region {
    match objective {
        Objective::Fwmp(l) => fwmp_sure_region(mdp, l, lambda),
        Objective::Bwmp => {
            let (game, _) = mdp.normalize_guarantee(lambda);
            energy_levels(&game).iter().map(Option::is_some).collect()
        }
    }
}

/// Exact mean-payoff game values by value iteration and rounding to the value grid.
pub fn mp_game_values(mdp: &Mdp) -> Vec<Rational> {
    let n = mdp.num_vertices();
    if n == 0 {
        return Vec::new();
    }
    let w = mdp.max_abs_weight() as i128;
    let nn = n as i128;
    let k = 4 * nn * nn * nn * w + 1;
    let all = vec![true; n];
    let mut vals = vec![0i64; n];
    for _ in 0..k {
        vals = (0..n)
            .map(|v| best_over(mdp, v, &all, |u, w| w + vals[u]))
            .collect();
    }
    vals.iter()
        .map(|&vk| {
            let vk = vk as i128;
            (1..=nn)
                .find_map(|b| {
                    let a = (2 * vk * b + k).div_euclid(2 * k);
                    // |a/b - vk/k| < 1/(2n²)
                    ((a * k - vk * b).abs() * 2 * nn * nn < b * k).then(|| {
                        rat(a.to_i64().unwrap(), b.to_i64().unwrap())
                    })
                })
                .expect("value iteration lands next to a grid point")
        })
        .collect()
}

/// Least initial credit keeping the energy non-negative forever (`None` = infinite).
pub fn energy_levels(g: &Mdp) -> Vec<Option<i64>> {
    let n = g.num_vertices();
    let top = n as i64 * g.max_abs_weight();
    let mut f: Vec<Option<i64>> = vec![Some(0); n];
    loop {
        let next: Vec<Option<i64>> = (0..n)
            .map(|v| {
                let need = g.out_edges(v).map(|e| f[e.target].map(|x| (x - e.weight).max(0)));
                let best = if g.is_player(v) {
                    need.flatten().min()
                } else {
                    need.collect::<Option<Vec<_>>>().and_then(|xs| xs.into_iter().max())
                };
                best.filter(|&x| x <= top).map(|x| x.max(f[v].unwrap_or(0)))
            })
            .collect();
        if next == f {
            return f;
        }
        f = next;
    }
}

/// Memoryless choice keeping the energy level: the successor of least required credit.
fn energy_choices(g: &Mdp, levels: &[Option<i64>]) -> Vec<Option<Vertex>> {
    g.vertices()
        .map(|v| {
            if !g.is_player(v) || levels[v].is_none() {
                return None;
            }
            g.out_edges(v)
                .filter_map(|e| levels[e.target].map(|x| ((x - e.weight).max(0), e.target)))
                .min()
                .map(|(_, u)| u)
        })
        .collect()
}

/// Memory of the sure FWMP strategy: the last vertex read and the window opened before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Window {
    Closed,
    Open { budget: usize, sum: i64 },
}

struct FwmpLogic<'a> {
    sol: &'a FwmpSolution,
}

impl FwmpLogic<'_> {
    fn in_direct(&self, v: Vertex) -> Option<usize> {
        self.sol.layer_of[v].filter(|&k| self.sol.layers[k].direct[v])
    }

    /// Window status on arriving at `v` from `last`.
    fn window_at(&self, mem: &(Option<Vertex>, Window), v: Vertex) -> Window {
        let (Some(last), status) = *mem else {
            return Window::Closed;
        };
        let (Some(k), Some(kl)) = (self.in_direct(v), self.in_direct(last)) else {
            return Window::Closed;
        };
        let Some(w) = self.sol.game.weight(last, v).filter(|_| k == kl) else {
            return Window::Closed;
        };
        let (budget, sum) = match status {
            Window::Closed => (self.sol.window, 0),
            Window::Open { budget, sum } => (budget, sum),
        };
        if sum + w >= 0 || budget <= 1 {
            Window::Closed
        } else {
            Window::Open {
                budget: budget - 1,
                sum: sum + w,
            }
        }
    }
}

impl StrategyLogic for FwmpLogic<'_> {
    type Mem = (Option<Vertex>, Window);

    fn initial(&self) -> Self::Mem {
        (None, Window::Closed)
    }

    fn output(&self, mem: &Self::Mem, v: Vertex) -> Distribution {
        let g = &self.sol.game;
        let k = self.sol.layer_of[v].expect("strategy is played inside the winning region");
        let layer = &self.sol.layers[k];
        if !layer.direct[v] {
            let rank = &layer.attractor.rank;
            let u = g
                .successors(v)
                .filter(|&u| layer.subgame[u] && rank[u].is_some())
                .min_by_key(|&u| (rank[u], u))
                .expect("attractor vertex has a successor closer to its target");
            return dirac(u);
        }
        let budget = match self.window_at(mem, v) {
            Window::Closed => self.sol.window,
            Window::Open { budget, .. } => budget,
        };
        let mut best: Option<(i64, Vertex)> = None;
        for e in g.out_edges(v).filter(|e| layer.direct[e.target]) {
            let gain = e.weight + if budget >= 2 { layer.table[budget - 2][e.target].max(0) } else { 0 };
            if best.is_none_or(|(b, _)| gain > b) {
                best = Some((gain, e.target));
            }
        }
        dirac(best.expect("direct region is closed for the player").1)
    }

    fn update(&self, mem: &Self::Mem, v: Vertex) -> Self::Mem {
        (Some(v), self.window_at(mem, v))
    }
}

/// Sure winning strategy for `{Φ ≥ λ}` on the winning region, which is returned with it.
pub fn sure_strategy_on_region(mdp: &Mdp, objective: Objective, lambda: &Rational) -> (MealyStrategy, Region) {
    match objective {
        Objective::Fwmp(l) => {
            let sol = solve_fwmp(mdp, l, lambda);
            let s = MealyStrategy::from_logic(mdp, &FwmpLogic { sol: &sol }, &sol.region);
            (s, sol.region)
        }
        Objective::Bwmp => {
            let (game, _) = mdp.normalize_guarantee(lambda);
            let levels = energy_levels(&game);
            let region: Region = levels.iter().map(Option::is_some).collect();
            (MealyStrategy::memoryless(mdp, &energy_choices(&game, &levels)), region)
        }
    }
}

/// Deterministic strategy surely winning `{Φ ≥ λ}` from every vertex of `mdp`.
pub fn sure_strategy(mdp: &Mdp, objective: Objective, lambda: &Rational) -> Result<MealyStrategy> {
    let (s, region) = sure_strategy_on_region(mdp, objective, lambda);
    match region.iter().position(|w| !w) {
        Some(v) => Err(SolverError::Precondition(format!(
            "{} does not surely win {objective} at threshold {lambda}",
            mdp.name(v)
        ))),
        None => Ok(s),
    }
}
