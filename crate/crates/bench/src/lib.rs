//! Benchmark inputs shared by the criterion suites in `benches/`.

use wmp_core::fixtures;
use wmp_core::gen::{random_mdp, GenParams};
use wmp_core::Mdp;

/// The three example models followed by `random` generated ones of up to `max_vertices` vertices.
pub fn instances(random: u64, max_vertices: usize) -> Vec<(String, Mdp)> {
    let mut out = vec![
        ("fig1".to_string(), fixtures::fig1()),
        ("fig2".to_string(), fixtures::fig2()),
        ("fig3".to_string(), fixtures::fig3()),
    ];
    let params = GenParams {
        max_vertices,
        ..GenParams::default()
    };
    out.extend((0..random).map(|seed| (format!("random{seed}"), random_mdp(seed, params))));
    out
}
