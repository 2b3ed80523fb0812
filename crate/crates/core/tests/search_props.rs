use std::collections::HashSet;

use ian::rng::derive_seed;
use ian::search::{bfs_search, Architecture, NodeTrainer, SearchConfig};
use ian::Result;
use proptest::prelude::*;

/// Accuracy drawn from a hash of the architecture, so every landscape is
/// reproducible but arbitrary.
struct Landscape {
    salt: u64,
}

impl NodeTrainer for Landscape {
    type Model = ();

    fn fit(&self, arch: &Architecture, _seed: u64) -> Result<((), f64)> {
        let words: Vec<u64> = arch.0.iter().map(|&w| w as u64).collect();
        let h = derive_seed(self.salt, &words);
        Ok(((), (h % 1000) as f64 / 1000.0))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn search_log_invariants(salt in any::<u64>(), max_nodes in 1usize..80) {
        let cfg = SearchConfig { max_nodes, ..SearchConfig::default() };
        let out = bfs_search(&Landscape { salt }, &cfg);
        prop_assert!(out.log.len() <= max_nodes);
        let mut seen = HashSet::new();
        for e in &out.log {
            prop_assert!(seen.insert(e.arch.clone()), "{} visited twice", e.arch);
            if e.expanded {
                prop_assert!(e.patience_left > 0);
            }
        }
        let (arch, (), acc) = out.best.unwrap();
        let top = out.log.iter().filter_map(|e| e.accuracy).fold(0.0, f64::max);
        prop_assert_eq!(acc, top);
        prop_assert!(seen.contains(&arch));
    }
}
