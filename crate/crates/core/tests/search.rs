mod common;

use std::time::Instant;

use common::universe::{bfs_min_depth, generate, search, BUYABLE_THRESHOLD};
use mhnpath::chem::parse_smiles;
use mhnpath::scoring::ScoreWeights;
use mhnpath::search::{
    deserialize_tree, extract_routes, replay_route, serialize_tree, SearchConfig, TemperatureUnit, Termination,
};
use mhnpath::templates::DEFAULT_MAX_MATCHES;

fn s(x: &str) -> String {
    x.to_string()
}

#[test]
fn buyable_target_is_solved_without_expansion() {
    let out = search("CCO", &[s("[C:1]-[O:2]>>[C:1].[O:2]")], &[(s("CCO"), 5.0)], &SearchConfig::default());
    assert!(out.root.solved);
    assert_eq!(out.expansions, 0);
    assert!(out.root.subtrees.is_empty());
    assert_eq!(out.log.len(), 1);
    assert_eq!(extract_routes(&out.root, &ScoreWeights::default()).len(), 1);
}

#[test]
fn one_step_toy_universe() {
    let out = search(
        "CC(C)=O",
        &[s("[C:1]=[O:2]>>[C:1]-[O:2]")],
        &[(s("CC(C)O"), 1.0)],
        &SearchConfig::default(),
    );
    assert_eq!(out.root.subtrees.len(), 1);
    let (edge, child) = &out.root.subtrees[0];
    assert!(child.solved);
    assert_eq!(child.cost_usd_per_g, 1.0);
    assert_eq!(child.depth, 1);
    assert_eq!(edge.reaction_smiles, "CC(C)O>>CC(C)=O");
    assert_eq!(edge.label, 0);
    let routes = extract_routes(&out.root, &ScoreWeights::default());
    assert_eq!(routes.len(), 1);
    assert_eq!(routes[0].len(), 1);
    replay_route(&parse_smiles("CC(C)=O").unwrap(), &routes[0], DEFAULT_MAX_MATCHES).unwrap();
}

#[test]
fn cheaper_child_is_expanded_first() {
    // Both children are non-buyable so both get expanded; cost weight only.
    let templates = [s("[C:1]-[N:2]>>[C:1].[N:2]"), s("[C:1]-[O:2]>>[C:1].[O:2]")];
    let prices = [(s("CCO"), 400.0), (s("NCC"), 10.0), (s("C"), 150.0), (s("N"), 150.0), (s("O"), 150.0)];
    let cfg = SearchConfig {
        weights: ScoreWeights::new(1.0, 0.0, 0.0).unwrap(),
        policy: mhnpath::pricing::BuyabilityPolicy {
            buyable_threshold: 5.0,
            nonbuyable_cap: 500.0,
        },
        max_depth: 2,
        ..SearchConfig::default()
    };
    // NCCO: cut C-N gives N + CCO ($150 + $400), cut C-O gives NCC + O ($10 + $150).
    let out = search("NCCO", &templates, &prices, &cfg);
    let keys: Vec<&str> = out.log.iter().map(|r| r.node_key.as_str()).collect();
    let key = |x: &str| mhnpath::chem::canonicalize(x).unwrap();
    let cheap = keys.iter().position(|k| *k == key("NCC.O")).unwrap();
    let dear = keys.iter().position(|k| *k == key("CCO.N")).unwrap();
    assert!(cheap < dear, "{keys:?}");
    assert_eq!(out.log[0].popped_priority, f64::INFINITY);
}

#[test]
fn identity_result_is_a_cycle() {
    let out = search("CC=O", &[s("[C:1]=[O:2]>>[C:1]=[O:2]")], &[], &SearchConfig::default());
    assert!(out.root.subtrees.is_empty());
    assert_eq!(out.expansions, 1);
    assert_eq!(out.log[0].templates_tried, 1);
    assert_eq!(out.log[0].children_added, 0);
}

#[test]
fn same_precursors_from_two_templates_give_two_edges() {
    let templates = [s("[C:1]-[O:2]>>[C:1].[O:2]"), s("[C:1]-[O;H1:2]>>[C:1].[O:2]")];
    let out = search("CO", &templates, &[(s("C"), 1.0), (s("O"), 1.0)], &SearchConfig::default());
    assert_eq!(out.root.subtrees.len(), 2);
    assert_eq!(out.root.subtrees[0].1.molecule_set, out.root.subtrees[1].1.molecule_set);
    assert_ne!(out.root.subtrees[0].0.rule, out.root.subtrees[1].0.rule);
    assert_eq!(out.root.subtrees[1].0.label, 1);
}

#[test]
fn diamond_has_two_routes() {
    // COC -> CO + C or C + OC (one canonical set), then CO -> C + O.
    // Two templates produce the same first step, so two distinct 2-step routes exist.
    let templates = [s("[C:1]-[O:2]>>[C:1].[O:2]"), s("[C:1]-[O;D2:2]>>[C:1].[O:2]")];
    let cfg = SearchConfig::default();
    let out = search("COC", &templates, &[(s("C"), 1.0), (s("O"), 1.0)], &cfg);
    let routes = extract_routes(&out.root, &cfg.weights);
    assert_eq!(routes.len(), 2);
    for r in &routes {
        assert_eq!(r.len(), 2);
        replay_route(&parse_smiles("COC").unwrap(), r, DEFAULT_MAX_MATCHES).unwrap();
    }
}

#[test]
fn unsolved_tree_has_no_routes() {
    let out = search("CCN", &[s("[C:1]-[N:2]>>[C:1].[N:2]")], &[], &SearchConfig::default());
    assert!(!out.root.subtrees.is_empty());
    assert!(extract_routes(&out.root, &ScoreWeights::default()).is_empty());
}

#[test]
fn zero_time_limit_returns_partial_tree() {
    let cfg = SearchConfig {
        time_limit_s: Some(0.0),
        ..SearchConfig::default()
    };
    let out = search("CCN", &[s("[C:1]-[N:2]>>[C:1].[N:2]")], &[], &cfg);
    assert_eq!(out.termination, Termination::TimeLimit);
    assert!(out.root.subtrees.is_empty());
}

#[test]
fn pop_order_is_non_increasing_without_pushes() {
    let mut checked = 0;
    for seed in 0..20 {
        let u = generate(seed);
        let cfg = SearchConfig {
            max_depth: u.max_depth,
            ..SearchConfig::default()
        };
        let out = search(&u.target, &u.templates, &u.prices, &cfg);
        assert_eq!(out.log[0].popped_priority, f64::INFINITY);
        for w in out.log[1..].windows(2) {
            assert!(w[0].popped_priority.is_finite());
            if w[0].children_added == 0 {
                assert!(w[1].popped_priority <= w[0].popped_priority, "seed {seed}");
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn serialized_tree_round_trips() {
    let u = generate(11);
    let cfg = SearchConfig {
        max_depth: u.max_depth,
        ..SearchConfig::default()
    };
    let out = search(&u.target, &u.templates, &u.prices, &cfg);
    let text = serialize_tree(&out.root, TemperatureUnit::Celsius);
    let back = deserialize_tree(&text, TemperatureUnit::Celsius).unwrap();
    assert_eq!(serialize_tree(&back, TemperatureUnit::Celsius), text);
}

#[test]
fn search_agrees_with_breadth_first_oracle() {
    let start = Instant::now();
    let (mut solvable, mut agree) = (0, 0);
    for seed in 0..50 {
        let u = generate(seed);
        assert!(u.n_molecules <= 200 && u.templates.len() <= 50);
        let cfg = SearchConfig {
            max_depth: u.max_depth,
            top_n_templates: 50,
            ..SearchConfig::default()
        };
        let out = search(&u.target, &u.templates, &u.prices, &cfg);
        let routes = extract_routes(&out.root, &cfg.weights);
        let lib = u.library();
        let oracle = bfs_min_depth(
            &u.target,
            lib.templates(),
            &u.price_map(),
            BUYABLE_THRESHOLD,
            u.max_depth,
            cfg.max_matches,
        );
        let best = routes.iter().map(|r| r.len()).min();
        assert_eq!(best, oracle, "seed {seed}: {u:?}");
        agree += 1;
        solvable += usize::from(oracle.is_some());
        let target = parse_smiles(&u.target).unwrap();
        for r in &routes {
            replay_route(&target, r, cfg.max_matches).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        }
    }
    assert_eq!(agree, 50);
    assert!(solvable > 5 && solvable < 45, "degenerate universes: {solvable} solvable");
    println!("{solvable}/50 solvable, {:?}", start.elapsed());
}
