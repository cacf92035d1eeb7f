//! Monte Carlo simulation of strategies and finite-run window values.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, SolverError};
use crate::model::{Mdp, Vertex};
use crate::rational::{common_denominator, rat, serde_str, to_f64, Rational};
use crate::strategy::{Distribution, MealyStrategy};

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.5758;

/// A finite prefix of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FinitePath {
    /// `horizon + 1` vertices.
    pub vertices: Vec<Vertex>,
    /// Payoff of each of the `horizon` edges.
    pub payoffs: Vec<i64>,
    pub seed: u64,
}

impl FinitePath {
    /// Path along explicit vertices; fails on a non-edge.
    pub fn from_vertices(mdp: &Mdp, vertices: Vec<Vertex>) -> Result<Self> {
        let payoffs = vertices
            .windows(2)
            .map(|w| {
                mdp.weight(w[0], w[1]).ok_or_else(|| {
                    SolverError::InvalidLasso(format!("{} -> {} is not an edge", mdp.name(w[0]), mdp.name(w[1])))
                })
            })
            .collect::<Result<_>>()?;
        Ok(FinitePath {
            vertices,
            payoffs,
            seed: 0,
        })
    }

    pub fn horizon(&self) -> usize {
        self.payoffs.len()
    }
}

/// Exact sampler over a finite distribution.
#[derive(Debug, Clone)]
struct Sampler {
    den: u128,
    cumulative: Vec<(u128, Vertex)>,
}

impl Sampler {
    fn new(dist: &[(Vertex, Rational)]) -> Self {
        let den = common_denominator(dist.iter().map(|(_, p)| p));
        // Denominators beyond 2^100 are rounded to a 2^64 grid.
        let grid = match den.to_u128().filter(|d| *d <= 1 << 100) {
            Some(_) => den,
            None => BigInt::from(1u128 << 64),
        };
        let grid = Rational::from_integer(grid);
        let mut acc = 0u128;
        let cumulative = dist
            .iter()
            .map(|(v, p)| {
                acc += (p * &grid).round().to_integer().to_u128().unwrap();
                (acc, *v)
            })
            .collect();
        Sampler { den: acc, cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> Vertex {
        let x = rng.gen_range(0..self.den);
        self.cumulative.iter().find(|(c, _)| x < *c).map_or(self.cumulative.last().unwrap().1, |(_, v)| *v)
    }
}

/// Precomputed samplers for the model and a strategy.
struct Simulator<'a> {
    mdp: &'a Mdp,
    strategy: &'a MealyStrategy,
    random: Vec<Option<Sampler>>,
    player: Vec<Vec<Option<Sampler>>>,
}

impl<'a> Simulator<'a> {
    fn new(mdp: &'a Mdp, strategy: &'a MealyStrategy) -> Self {
        let random = mdp
            .vertices()
            .map(|v| {
                (!mdp.is_player(v)).then(|| {
                    let d: Distribution = mdp.out_edges(v).map(|e| (e.target, e.prob.clone().unwrap())).collect();
                    Sampler::new(&d)
                })
            })
            .collect();
        let player = (0..strategy.num_states())
            .map(|q| mdp.vertices().map(|v| strategy.output(q, v).map(|d| Sampler::new(d))).collect())
            .collect();
        Simulator {
            mdp,
            strategy,
            random,
            player,
        }
    }

    fn run(&self, start: Vertex, horizon: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<Vertex>, Vec<i64>)> {
        let mut q = self.strategy.initial();
        let mut v = start;
        let mut vertices = Vec::with_capacity(horizon + 1);
        let mut payoffs = Vec::with_capacity(horizon);
        vertices.push(v);
        for _ in 0..horizon {
            let undefined = || SolverError::Strategy(format!("undefined at {} in state {q}", self.mdp.name(v)));
            let u = if self.mdp.is_player(v) {
                self.player[q][v].as_ref().ok_or_else(undefined)?.sample(rng)
            } else {
                self.random[v].as_ref().unwrap().sample(rng)
            };
            q = self.strategy.next(q, v).ok_or_else(undefined)?;
            payoffs.push(self.mdp.weight(v, u).unwrap());
            vertices.push(u);
            v = u;
        }
        Ok((vertices, payoffs))
    }
}

fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Samples `horizon` steps from `start`; player moves come from `strategy`.
pub fn simulate(mdp: &Mdp, strategy: &MealyStrategy, start: Vertex, horizon: usize, seed: u64) -> Result<FinitePath> {
    let sim = Simulator::new(mdp, strategy);
    let (vertices, payoffs) = sim.run(start, horizon, &mut run_rng(seed, 0))?;
    Ok(FinitePath {
        vertices,
        payoffs,
        seed,
    })
}

/// `num/den` with `den > 0`, compared exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Frac(i64, i64);

impl Ord for Frac {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.0 as i128 * o.1 as i128).cmp(&(o.0 as i128 * self.1 as i128))
    }
}

impl PartialOrd for Frac {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn window_value(payoffs: &[i64], l: usize, burn_in: usize) -> Result<Frac> {
    let h = payoffs.len();
    if burn_in + l >= h || l == 0 {
        return Err(SolverError::Precondition(format!(
            "horizon {h} is too short for burn-in {burn_in} and window {l}"
        )));
    }
    let mut worst: Option<Frac> = None;
    for i in burn_in..=h - l {
        let mut sum = 0;
        let mut best: Option<Frac> = None;
        for j in 1..=l {
            sum += payoffs[i + j - 1];
            let m = Frac(sum, j as i64);
            if best.is_none_or(|b| m > b) {
                best = Some(m);
            }
        }
        let best = best.unwrap();
        if worst.is_none_or(|w| best < w) {
            worst = Some(best);
        }
    }
    Ok(worst.unwrap())
}

/// Least, over positions `burn_in..=horizon-l`, of the best window mean of length at most `l`.
///
/// On a finite path this only estimates the limit behaviour from below.
pub fn empirical_window_value(path: &FinitePath, l: usize, burn_in: usize) -> Result<Rational> {
    let Frac(n, d) = window_value(&path.payoffs, l, burn_in)?;
    Ok(rat(n, d))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonteCarlo {
    pub runs: usize,
    pub horizon: usize,
    pub seed: u64,
    pub threshold: Rational,
    pub window: usize,
    /// Defaults to a quarter of the horizon.
    pub burn_in: Option<usize>,
    pub workers: usize,
}

impl MonteCarlo {
    pub fn new(runs: usize, horizon: usize, seed: u64, threshold: Rational, window: usize) -> Self {
        MonteCarlo {
            runs,
            horizon,
            seed,
            threshold,
            window,
            burn_in: None,
            workers: 1,
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.horizon / 4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub runs: usize,
    pub horizon: usize,
    pub burn_in: usize,
    pub window: usize,
    #[serde(with = "serde_str")]
    pub threshold: Rational,
    pub confidence: f64,
    /// Fraction of runs whose empirical window value reaches the threshold.
    #[serde(with = "serde_str")]
    pub satisfaction: Rational,
    pub satisfaction_half_width: f64,
    /// Mean of the empirical window values.
    #[serde(with = "serde_str")]
    pub mean: Rational,
    pub mean_half_width: f64,
    #[serde(with = "serde_str")]
    pub min_value: Rational,
    /// Mean payoff per step after burn-in, averaged over runs.
    #[serde(with = "serde_str")]
    pub mean_payoff: Rational,
    #[serde(skip)]
    pub values: Vec<Rational>,
}

impl EstimateReport {
    pub fn satisfaction_f64(&self) -> f64 {
        to_f64(&self.satisfaction)
    }

    pub fn mean_f64(&self) -> f64 {
        to_f64(&self.mean)
    }
}

struct RunSummary {
    value: Frac,
    payoff_sum: i64,
}

/// Independent simulations summarized with 99% normal-approximation intervals.
/// Run `i` uses its own stream of `seed`, so results do not depend on `workers`.
pub fn monte_carlo(mdp: &Mdp, strategy: &MealyStrategy, start: Vertex, cfg: &MonteCarlo) -> Result<EstimateReport> {
    if cfg.runs == 0 {
        return Err(SolverError::Precondition("at least one run is needed".into()));
    }
    let burn_in = cfg.burn_in();
    window_value(&vec![0; cfg.horizon], cfg.window, burn_in)?;
    let sim = Simulator::new(mdp, strategy);
    let workers = cfg.workers.clamp(1, cfg.runs);
    let chunk = cfg.runs.div_ceil(workers);
    let one = |i: usize| -> Result<RunSummary> {
        let (_, payoffs) = sim.run(start, cfg.horizon, &mut run_rng(cfg.seed, i as u64))?;
        Ok(RunSummary {
            value: window_value(&payoffs, cfg.window, burn_in)?,
            payoff_sum: payoffs[burn_in..].iter().sum(),
        })
    };
    let summaries: Vec<RunSummary> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let one = &one;
                s.spawn(move || (w * chunk..((w + 1) * chunk).min(cfg.runs)).map(one).collect::<Result<Vec<_>>>())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation worker panicked"))
            .collect::<Result<Vec<Vec<_>>>>()
    })?
    .into_iter()
    .flatten()
    .collect();

    let n = cfg.runs as i64;
    let values: Vec<Rational> = summaries.iter().map(|r| rat(r.value.0, r.value.1)).collect();
    let hits = values.iter().filter(|v| **v >= cfg.threshold).count() as i64;
    let satisfaction = rat(hits, n);
    let mean: Rational = values.iter().sum::<Rational>() / Rational::from_integer(n.into());
    let p = to_f64(&satisfaction);
    let m = to_f64(&mean);
    let var = if n > 1 {
        values.iter().map(|v| (to_f64(v) - m).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let steps = (cfg.horizon - burn_in) as i64;
    let payoff_total: i64 = summaries.iter().map(|r| r.payoff_sum).sum();
    Ok(EstimateReport {
        runs: cfg.runs,
        horizon: cfg.horizon,
        burn_in,
        window: cfg.window,
        threshold: cfg.threshold.clone(),
        confidence: 0.99,
        satisfaction,
        satisfaction_half_width: Z_99 * (p * (1.0 - p) / n as f64).sqrt(),
        mean,
        mean_half_width: Z_99 * (var / n as f64).sqrt(),
        min_value: values.iter().min().cloned().unwrap_or_else(Rational::zero),
        mean_payoff: rat(payoff_total, n * steps),
        values,
    })
}
