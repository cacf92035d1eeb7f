//! Seeded random bipartite MDPs for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Mdp, MdpBuilder, Owner};
use crate::rational::rat;

#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    pub max_vertices: usize,
    pub max_weight: i64,
    /// Largest denominator of any transition probability.
    pub max_denominator: i64,
    pub max_out_degree: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            max_vertices: 6,
            max_weight: 2,
            max_denominator: 4,
            max_out_degree: 3,
        }
    }
}

/// A valid MDP with at least one player and one random vertex.
pub fn random_mdp(seed: u64, params: GenParams) -> Mdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=params.max_vertices.max(2));
    let players = rng.gen_range(1..n);
    let mut b = MdpBuilder::new();
    let p: Vec<_> = (0..players)
        .map(|i| b.add_vertex(format!("p{i}"), Owner::Player).unwrap())
        .collect();
    let r: Vec<_> = (0..n - players)
        .map(|i| b.add_vertex(format!("r{i}"), Owner::Random).unwrap())
        .collect();
    let w = params.max_weight;
    for &v in &p {
        let k = rng.gen_range(1..=params.max_out_degree.min(r.len()));
        for &u in r.choose_multiple(&mut rng, k) {
            b.add_edge(v, u, rng.gen_range(-w..=w), None);
        }
    }
    for &v in &r {
        let k = rng.gen_range(1..=params.max_out_degree.min(p.len()).min(params.max_denominator as usize));
        let den = rng.gen_range(k as i64..=params.max_denominator);
        // Split `den` into `k` positive parts.
        let mut cuts: Vec<i64> = (1..den).collect::<Vec<_>>().choose_multiple(&mut rng, k - 1).copied().collect();
        cuts.sort_unstable();
        cuts.insert(0, 0);
        cuts.push(den);
        let mut targets: Vec<_> = p.choose_multiple(&mut rng, k).copied().collect();
        targets.sort_unstable();
        for (i, &u) in targets.iter().enumerate() {
            b.add_edge(v, u, rng.gen_range(-w..=w), Some(rat(cuts[i + 1] - cuts[i], den)));
        }
    }
    b.build().expect("generator produces valid models")
}
