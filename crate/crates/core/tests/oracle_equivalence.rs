mod common;

use wmp_core::games::{fwmp_sure_region, mp_game_values, sure_region, sure_strategy_on_region, sure_values};
use wmp_core::gen::{random_mdp, GenParams};
use wmp_core::oracle::oracle_fwmp_region;
use wmp_core::rational::{int, rat, Rational};
use wmp_core::{fixtures, Objective};

fn thresholds() -> Vec<Rational> {
    vec![rat(-3, 2), int(-1), rat(-1, 2), rat(-1, 3), int(0), rat(1, 3), rat(1, 2), rat(2, 3), int(1), int(2)]
}

#[test]
fn fwmp_regions_match_the_product_oracle() {
    let wide = GenParams {
        max_weight: 3,
        ..GenParams::default()
    };
    for seed in 0..300 {
        for params in [GenParams::default(), wide] {
            let m = random_mdp(seed, params);
            for l in 1..=3 {
                for lam in thresholds() {
                    assert_eq!(
                        fwmp_sure_region(&m, l, &lam),
                        oracle_fwmp_region(&m, l, &lam).unwrap(),
                        "seed {seed}, l = {l}, lambda = {lam}\n{}",
                        m.to_wmdp()
                    );
                }
            }
        }
    }
}

#[test]
fn game_values_match_memoryless_enumeration() {
    for seed in 0..300 {
        let m = random_mdp(seed, GenParams::default());
        assert_eq!(mp_game_values(&m), common::mp_brute_force(&m), "seed {seed}\n{}", m.to_wmdp());
    }
    for m in [fixtures::fig1(), fixtures::fig2(), fixtures::fig3()] {
        assert_eq!(mp_game_values(&m), common::mp_brute_force(&m));
    }
}

#[test]
fn bounded_window_region_is_the_game_value_region() {
    for seed in 0..200 {
        let m = random_mdp(seed, GenParams::default());
        let values = common::mp_brute_force(&m);
        for lam in thresholds() {
            let expect: Vec<bool> = values.iter().map(|v| *v >= lam).collect();
            assert_eq!(sure_region(&m, Objective::Bwmp, &lam), expect, "seed {seed}, lambda = {lam}");
        }
    }
}

#[test]
fn sure_values_are_attained_by_the_sure_strategy() {
    for seed in 0..150 {
        let m = random_mdp(seed, GenParams::default());
        for l in 1..=3 {
            let values = sure_values(&m, Objective::Fwmp(l));
            for lam in thresholds() {
                let obj = Objective::Fwmp(l);
                let (s, region) = sure_strategy_on_region(&m, obj, &lam);
                for v in m.vertices() {
                    assert_eq!(region[v], values[v] >= lam, "seed {seed}, l = {l}, lambda = {lam}, v = {v}");
                    if region[v] {
                        assert!(common::surely_wins(&m, &s, v, obj, &lam), "seed {seed}, l = {l}, v = {v}");
                        assert!(common::cycles_meet(&m, &s, v, obj, &lam), "seed {seed}, l = {l}, v = {v}");
                    }
                }
            }
        }
    }
}

#[test]
fn bounded_window_strategies_keep_every_cycle_above_the_threshold() {
    for seed in 0..150 {
        let m = random_mdp(seed, GenParams::default());
        for lam in thresholds() {
            let (s, region) = sure_strategy_on_region(&m, Objective::Bwmp, &lam);
            assert_eq!(s.num_states(), 1);
            for v in m.vertices().filter(|&v| region[v]) {
                assert!(common::surely_wins(&m, &s, v, Objective::Bwmp, &lam), "seed {seed}, v = {v}");
            }
        }
    }
}
