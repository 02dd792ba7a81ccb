mod common;

use cfdivae::graph::{
    d_separated, find_cfd_conditioning_sets, is_backdoor_set, is_cfd_set, is_frontdoor_set,
    parse_dag, Dag, NodeSet,
};
use common::paths::{backdoor_oracle, cfd_oracle, d_separated_oracle, random_dag};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfd_graph() -> Dag {
    parse_dag("W -> T\nW -> Z\nW -> Y\nU -> T\nU -> Y\nT -> Z\nZ -> Y\nZ -> X").unwrap()
}

fn set(names: &[&str]) -> NodeSet {
    names.iter().copied().collect()
}

/// Random subset of `pool` with each member kept with probability `p`.
fn subset<R: Rng>(rng: &mut R, pool: &[String], p: f64) -> NodeSet {
    pool.iter()
        .filter(|_| rng.random::<f64>() < p)
        .cloned()
        .collect()
}

#[test]
fn cfd_graph_examples_match_the_path_oracle() {
    let g = cfd_graph();
    assert!(d_separated_oracle(&g, &set(&["Z"]), &set(&["U"]), &set(&["T", "W"])));
    assert!(!d_separated_oracle(&g, &set(&["T"]), &set(&["Y"]), &set(&["Z", "W"])));
    assert!(!backdoor_oracle(&g, "T", "Y", &set(&["W"])));
    assert!(!cfd_oracle(&g, "T", "Y", &set(&["Z"]), &NodeSet::new()));
    assert!(cfd_oracle(&g, "T", "Y", &set(&["Z"]), &set(&["W"])));
}

#[test]
fn criteria_agree_with_path_oracle_on_random_dags() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..400 {
        let n = rng.random_range(3..=6);
        let g = random_dag(&mut rng, n, 0.45);
        let names = g.nodes().to_vec();
        let t = names[rng.random_range(0..n)].clone();
        let y = loop {
            let c = &names[rng.random_range(0..n)];
            if *c != t {
                break c.clone();
            }
        };
        let rest: Vec<String> = names
            .iter()
            .filter(|n| **n != t && **n != y)
            .cloned()
            .collect();
        let z = subset(&mut rng, &rest, 0.4);
        let w_pool: Vec<String> = rest.iter().filter(|n| !z.contains(n)).cloned().collect();
        // W may include descendants of T on purpose.
        let w = subset(&mut rng, &w_pool, 0.5);

        assert_eq!(
            is_backdoor_set(&g, &t, &y, &z).unwrap(),
            backdoor_oracle(&g, &t, &y, &z),
            "back-door mismatch on {:?} t={t} y={y} z={z}",
            g.edges()
        );
        assert_eq!(
            is_cfd_set(&g, &t, &y, &z, &w).unwrap(),
            cfd_oracle(&g, &t, &y, &z, &w),
            "CFD mismatch on {:?} t={t} y={y} z={z} w={w}",
            g.edges()
        );
        assert_eq!(
            is_cfd_set(&g, &t, &y, &z, &NodeSet::new()).unwrap(),
            is_frontdoor_set(&g, &t, &y, &z).unwrap()
        );
        assert_eq!(
            is_frontdoor_set(&g, &t, &y, &z).unwrap(),
            cfd_oracle(&g, &t, &y, &z, &NodeSet::new())
        );

        let observed = NodeSet::from_iter(w_pool.iter().cloned());
        for found in find_cfd_conditioning_sets(&g, &t, &y, &z, &observed).unwrap() {
            assert!(is_cfd_set(&g, &t, &y, &z, &found).unwrap());
            for drop in found.iter() {
                let mut smaller = found.clone();
                smaller.remove(drop);
                assert!(!is_cfd_set(&g, &t, &y, &z, &smaller).unwrap());
            }
        }
    }
}

#[test]
fn d_separation_matches_oracle_for_set_queries() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let n = rng.random_range(3..=6);
        let g = random_dag(&mut rng, n, 0.5);
        let mut names = g.nodes().to_vec();
        names.sort_by_key(|_| rng.random::<u32>());
        let a_len = rng.random_range(1..=2).min(n - 2);
        let a: NodeSet = names[..a_len].iter().cloned().collect();
        let b: NodeSet = names[a_len..a_len + 1].iter().cloned().collect();
        let c = subset(&mut rng, &names[a_len + 1..], 0.5);
        assert_eq!(
            d_separated(&g, &a, &b, &c).unwrap(),
            d_separated_oracle(&g, &a, &b, &c)
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn d_separation_is_symmetric(seed in any::<u64>(), n in 3usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_dag(&mut rng, n, 0.4);
        let names = g.nodes().to_vec();
        let a = set(&[names[0].as_str()]);
        let b = set(&[names[1].as_str()]);
        let c = subset(&mut rng, &names[2..], 0.5);
        prop_assert_eq!(
            d_separated(&g, &a, &b, &c).unwrap(),
            d_separated(&g, &b, &a, &c).unwrap()
        );
    }

    #[test]
    fn mutilation_is_idempotent(seed in any::<u64>(), n in 2usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_dag(&mut rng, n, 0.5);
        let names = g.nodes().to_vec();
        let inc = subset(&mut rng, &names, 0.3);
        let out = subset(&mut rng, &names, 0.3);
        let once = g.mutilate(&inc, &out).unwrap();
        let twice = once.mutilate(&inc, &out).unwrap();
        prop_assert_eq!(once.edges(), twice.edges());
        for (a, b) in once.edges() {
            prop_assert!(!inc.contains(&b) && !out.contains(&a));
            prop_assert!(g.has_edge(&a, &b));
        }
    }
}
