use std::collections::BTreeSet;

use mdss_core::{NetworkDoc, NodeSpec};
use mdss_learning::{learn_structure, sample, ConstraintSet, LearnConfig};
use proptest::prelude::*;

fn pair(a: &str, b: &str) -> (String, String) {
    (a.to_string(), b.to_string())
}

fn benchmark() -> NetworkDoc {
    let bin = ["0", "1"];
    NetworkDoc::new(
        "six",
        vec![
            NodeSpec::chance("A", &bin, &[], vec![0.5, 0.5]),
            NodeSpec::chance("B", &bin, &[], vec![0.4, 0.6]),
            NodeSpec::chance("C", &["0", "1", "2"], &["A", "B"], vec![
                0.8, 0.1, 0.1, //
                0.1, 0.8, 0.1, //
                0.1, 0.1, 0.8, //
                0.05, 0.15, 0.8,
            ]),
            NodeSpec::chance("D", &bin, &["C"], vec![0.9, 0.1, 0.5, 0.5, 0.1, 0.9]),
            NodeSpec::chance("E", &bin, &["C"], vec![0.2, 0.8, 0.85, 0.15, 0.5, 0.5]),
            NodeSpec::chance("F", &bin, &["D", "E"], vec![0.9, 0.1, 0.3, 0.7, 0.25, 0.75, 0.05, 0.95]),
        ],
        vec![],
    )
}

fn true_skeleton(doc: &NetworkDoc) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for n in &doc.nodes {
        for p in &n.parents {
            let (a, b) = if p < &n.name { (p.clone(), n.name.clone()) } else { (n.name.clone(), p.clone()) };
            out.insert((a, b));
        }
    }
    out
}

#[test]
fn independent_variables_give_empty_graph() {
    let doc = NetworkDoc::new(
        "pair",
        vec![
            NodeSpec::chance("X", &["0", "1"], &[], vec![0.3, 0.7]),
            NodeSpec::chance("Y", &["0", "1", "2"], &[], vec![0.2, 0.5, 0.3]),
        ],
        vec![],
    );
    let data = sample(&doc, 5000, 1).unwrap();
    let g = learn_structure(&data, &ConstraintSet::default(), &LearnConfig::default()).unwrap();
    assert!(g.edges.is_empty());
}

#[test]
fn tier_constraint_orients_years_before_sector() {
    let doc = NetworkDoc::new(
        "tiers",
        vec![
            NodeSpec::chance("Years", &["y1", "y2", "y3"], &[], vec![0.4, 0.33, 0.27]),
            NodeSpec::chance("ATECO", &["s1", "s2"], &["Years"], vec![0.8, 0.2, 0.5, 0.5, 0.2, 0.8]),
        ],
        vec![],
    );
    let data = sample(&doc, 3000, 2).unwrap();
    let c = ConstraintSet {
        forbidden: vec![pair("ATECO", "Years")],
        tiers: vec![vec!["Years".into()], vec!["ATECO".into()]],
        ..ConstraintSet::default()
    };
    let g = learn_structure(&data, &c, &LearnConfig::default()).unwrap();
    assert_eq!(g.edges.len(), 1);
    assert!(g.has_edge("Years", "ATECO"));
    // without the constraint the single edge is still found, direction by name order
    let free = learn_structure(&data, &ConstraintSet::default(), &LearnConfig::default()).unwrap();
    assert!(free.adjacent("Years", "ATECO"));
}

#[test]
fn six_node_skeleton_is_recovered() {
    let doc = benchmark();
    let truth = true_skeleton(&doc);
    let mut good = 0;
    for seed in 0..10u64 {
        let data = sample(&doc, 10_000, 500 + seed).unwrap();
        let g = learn_structure(&data, &ConstraintSet::default(), &LearnConfig::default()).unwrap();
        let errors = g.skeleton().symmetric_difference(&truth).count();
        if errors <= 1 {
            good += 1;
        }
    }
    assert!(good >= 8, "{good}/10 seeds within one edge error");
}

#[test]
fn v_structure_is_compelled() {
    let doc = benchmark();
    let data = sample(&doc, 10_000, 77).unwrap();
    let g = learn_structure(&data, &ConstraintSet::default(), &LearnConfig::default()).unwrap();
    assert!(g.has_edge("A", "C") && g.has_edge("B", "C"));
}

fn random_constraints(seed: u64, names: &[String]) -> ConstraintSet {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut tiers: Vec<Vec<String>> = vec![vec![]; 3];
    for n in names {
        if rng.gen_bool(0.7) {
            tiers[rng.gen_range(0..3)].push(n.clone());
        }
    }
    tiers.retain(|t| !t.is_empty());
    let mut c = ConstraintSet {
        tiers,
        within_tier_free: rng.gen_bool(0.5),
        ..ConstraintSet::default()
    };
    for _ in 0..3 {
        let a = &names[rng.gen_range(0..names.len())];
        let b = &names[rng.gen_range(0..names.len())];
        if a != b {
            if rng.gen_bool(0.5) {
                c.forbidden.push(pair(a, b));
            } else {
                let probe = ConstraintSet {
                    required: vec![pair(a, b)],
                    ..c.clone()
                };
                if c.allows(a, b) && !c.is_required(b, a) && probe.check(names).is_ok() {
                    c.required.push(pair(a, b));
                }
            }
        }
    }
    c.forbidden.retain(|(a, b)| !c.required.iter().any(|(x, y)| x == a && y == b));
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn constraints_always_hold(seed in 0u64..10_000, n in 50usize..600) {
        let doc = benchmark();
        let data = sample(&doc, n, seed).unwrap();
        let names: Vec<String> = doc.nodes.iter().map(|n| n.name.clone()).collect();
        let c = random_constraints(seed, &names);
        prop_assume!(c.check(&names).is_ok());
        let g = learn_structure(&data, &c, &LearnConfig::default()).unwrap();
        prop_assert!(g.satisfies(&c));
        for (a, b) in &c.required {
            prop_assert!(g.has_edge(a, b));
        }
        // a DAG extension exists
        prop_assert!(g.to_structure("g", &data).is_ok());
    }
}
