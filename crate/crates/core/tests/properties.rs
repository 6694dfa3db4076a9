use std::collections::BTreeMap;

use mdss_core::decision::POLICY_GUARD;
use mdss_core::enumeration::joint_marginals;
use mdss_core::oobn::{flatten, ClassDoc, InputDecl, InstanceDecl, Interface, Registry};
use mdss_core::{
    BayesNet, CptExpr, DecisionProblem, Elimination, Evidence, Factor, InferenceSession, JunctionTree,
    NetworkDoc, NodeSpec, Table, Variable,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn states(card: usize) -> Vec<String> {
    (0..card).map(|i| format!("s{i}")).collect()
}

fn row(rng: &mut ChaCha8Rng, card: usize, zeros: bool) -> Vec<f64> {
    let mut r: Vec<f64> = (0..card)
        .map(|_| if zeros && rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.05..1.0) })
        .collect();
    if r.iter().all(|v| *v == 0.0) {
        r[0] = 1.0;
    }
    let s: f64 = r.iter().sum();
    r.iter_mut().for_each(|v| *v /= s);
    r
}

/// Random DAG over at most `max_nodes` chance nodes, parents drawn from
/// earlier nodes.
fn random_net(seed: u64, max_nodes: usize, zeros: bool) -> NetworkDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_nodes);
    let mut nodes: Vec<NodeSpec> = Vec::new();
    for i in 0..n {
        let card = rng.gen_range(2..=3);
        let mut parents: Vec<String> = Vec::new();
        for j in 0..i {
            if parents.len() < 3 && rng.gen_bool(0.4) {
                parents.push(format!("X{j}"));
            }
        }
        let configs: usize = parents
            .iter()
            .map(|p| nodes.iter().find(|n| &n.name == p).unwrap().states.len())
            .product();
        let values: Vec<f64> = (0..configs).flat_map(|_| row(&mut rng, card, zeros)).collect();
        let st = states(card);
        let st: Vec<&str> = st.iter().map(String::as_str).collect();
        let pr: Vec<&str> = parents.iter().map(String::as_str).collect();
        nodes.push(NodeSpec::chance(format!("X{i}"), &st, &pr, values));
    }
    NetworkDoc::new(format!("random{seed}"), nodes, vec![])
}

fn random_evidence(doc: &NetworkDoc, seed: u64) -> Vec<Evidence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut out = Vec::new();
    for n in &doc.nodes {
        if rng.gen_bool(0.25) {
            let card = n.states.len();
            if rng.gen_bool(0.5) {
                out.push(Evidence::hard(n.name.clone(), rng.gen_range(0..card)));
            } else {
                out.push(Evidence::likelihood(
                    n.name.clone(),
                    (0..card).map(|_| rng.gen_range(0.1..3.0)).collect(),
                ));
            }
        }
    }
    out
}

fn var(name: &str, card: usize) -> Variable {
    Variable::new(name, states(card)).unwrap()
}

fn random_factor(rng: &mut ChaCha8Rng, scope: Vec<Variable>) -> Factor {
    let size: usize = scope.iter().map(Variable::cardinality).product();
    let values = (0..size).map(|_| rng.gen_range(0.0..2.0)).collect();
    Factor::new(scope, values).unwrap()
}

fn names(f: &Factor) -> Vec<&str> {
    f.scope().iter().map(Variable::name).collect()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
    }
}

fn marginals_match(doc: &NetworkDoc, evidence: &[Evidence], elimination: &Elimination) {
    let net = BayesNet::from_doc(doc).unwrap();
    let tree = JunctionTree::build(&net, elimination).unwrap();
    assert!(tree.has_running_intersection());
    let oracle = joint_marginals(doc, evidence);
    match tree.calibrate(&net, evidence) {
        Ok(cal) => {
            let (expect, pe) = oracle.expect("oracle agrees evidence is possible");
            assert!(cal.separator_discrepancy(&tree, &net).unwrap() <= TOL);
            assert!((cal.probability_of_evidence() - pe).abs() <= TOL * pe.max(1.0));
            let mut s = InferenceSession::with_tree(std::sync::Arc::new(net), std::sync::Arc::new(tree));
            for e in evidence {
                s.set_evidence(e.clone()).unwrap();
            }
            for (name, m) in &expect {
                assert_close(&s.marginal(name).unwrap(), m, TOL);
            }
        }
        Err(e) => {
            assert_eq!(e, mdss_core::CoreError::ImpossibleEvidence);
            assert!(oracle.is_err());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplication_commutes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (var("A", 2), var("B", 3), var("C", 2));
        let f = random_factor(&mut rng, vec![a.clone(), b.clone()]);
        let g = random_factor(&mut rng, vec![c.clone(), b.clone()]);
        let h = random_factor(&mut rng, vec![c, a]);
        let fg = f.multiply(&g).unwrap();
        let gf = g.multiply(&f).unwrap().permute(&names(&fg)).unwrap();
        assert_close(fg.values(), gf.values(), 1e-12);
        let left = fg.multiply(&h).unwrap();
        let right = f.multiply(&g.multiply(&h).unwrap()).unwrap().permute(&names(&left)).unwrap();
        for (x, y) in left.values().iter().zip(right.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn marginalization_order_is_irrelevant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_factor(&mut rng, vec![var("A", 2), var("B", 3), var("C", 2)]);
        let ab = f.marginalize(&["A"]).unwrap().marginalize(&["B"]).unwrap();
        let ba = f.marginalize(&["B"]).unwrap().marginalize(&["A"]).unwrap();
        let joint = f.marginalize(&["A", "B"]).unwrap();
        // direct enumeration over C
        let mut direct = [0.0; 2];
        for a in 0..2 { for b in 0..3 { for c in 0..2 { direct[c] += f.get(&[a, b, c]); } } }
        assert_close(ab.values(), &direct, 1e-12);
        assert_close(ba.values(), &direct, 1e-12);
        assert_close(joint.values(), &direct, 1e-12);
    }

    #[test]
    fn normalize_constant_is_weighted_sum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = var("B", 3);
        let f = random_factor(&mut rng, vec![var("A", 2), b.clone()]);
        let w: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..4.0)).collect();
        let e = Evidence::likelihood("B", w.clone());
        let mut direct = 0.0;
        for a in 0..2 { for s in 0..3 { direct += f.get(&[a, s]) * w[s]; } }
        match f.reduce(&e).unwrap().normalize() {
            Ok((n, z)) => {
                prop_assert!((z - direct).abs() <= 1e-12 * direct.max(1.0));
                prop_assert!((n.sum() - 1.0).abs() <= 1e-12);
            }
            Err(_) => prop_assert_eq!(direct, 0.0),
        }
    }

    #[test]
    fn junction_tree_matches_enumeration(seed in any::<u64>()) {
        let doc = random_net(seed, 10, true);
        let ev = random_evidence(&doc, seed);
        marginals_match(&doc, &ev, &Elimination::MinFill);
    }

    #[test]
    fn posteriors_do_not_depend_on_triangulation(seed in any::<u64>()) {
        let doc = random_net(seed, 8, false);
        let ev = random_evidence(&doc, seed);
        let mut reverse = doc.topological_order().unwrap();
        reverse.reverse();
        let net = BayesNet::from_doc(&doc).unwrap();
        let a = JunctionTree::build(&net, &Elimination::MinFill).unwrap().calibrate(&net, &ev).unwrap();
        let t = JunctionTree::build(&net, &Elimination::Fixed(reverse.clone())).unwrap();
        prop_assert!(t.has_running_intersection());
        let b = t.calibrate(&net, &ev).unwrap();
        prop_assert!((a.log_probability_of_evidence() - b.log_probability_of_evidence()).abs() <= TOL);
        marginals_match(&doc, &ev, &Elimination::Fixed(reverse));
    }

    #[test]
    fn evidence_order_and_likelihood_scale_do_not_matter(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let doc = random_net(seed, 7, false);
        let ev = random_evidence(&doc, seed);
        let mut fwd = InferenceSession::from_doc(&doc).unwrap();
        let mut rev = InferenceSession::from_doc(&doc).unwrap();
        let mut scaled = InferenceSession::from_doc(&doc).unwrap();
        for e in &ev { fwd.set_evidence(e.clone()).unwrap(); }
        for e in ev.iter().rev() { rev.set_evidence(e.clone()).unwrap(); }
        for e in &ev {
            let e = match &e.kind {
                mdss_core::EvidenceKind::Likelihood(w) => Evidence::likelihood(e.node.clone(), w.iter().map(|x| x * scale).collect()),
                _ => e.clone(),
            };
            scaled.set_evidence(e).unwrap();
        }
        let a = fwd.posterior_marginals(&[]).unwrap();
        let b = rev.posterior_marginals(&[]).unwrap();
        let c = scaled.posterior_marginals(&[]).unwrap();
        for (k, v) in &a {
            assert_close(v, &b[k], TOL);
            assert_close(v, &c[k], TOL);
        }
    }

    #[test]
    fn retract_restores_prior(seed in any::<u64>()) {
        let doc = random_net(seed, 7, false);
        let mut s = InferenceSession::from_doc(&doc).unwrap();
        let prior = s.posterior_marginals(&[]).unwrap();
        for e in random_evidence(&doc, seed) {
            let node = e.node.clone();
            s.set_evidence(e).unwrap();
            s.retract_evidence(&node);
        }
        let after = s.posterior_marginals(&[]).unwrap();
        for (k, v) in &prior { assert_close(v, &after[k], TOL); }
    }

    #[test]
    fn serialization_round_trip_validates(seed in any::<u64>()) {
        let doc = random_net(seed, 8, true);
        let back = NetworkDoc::parse(&doc.serialize()).unwrap();
        prop_assert!(back.validate().ok);
        prop_assert_eq!(back, doc);
    }

    #[test]
    fn expanded_expressions_are_normalized(labels in proptest::collection::btree_set(0u32..=100, 2..8)) {
        let grid: Vec<String> = labels.iter().map(|l| format!("{:.2}", *l as f64 / 100.0)).collect();
        let alpha = Variable::new("alpha", grid).unwrap();
        let stop = Variable::new("Stop", vec!["0", "1"]).unwrap();
        let bin = Variable::new("Coop", vec!["0", "1"]).unwrap();
        let cpt = CptExpr::bernoulli("alpha").expand(&bin, &[stop, alpha]).unwrap();
        for r in cpt.values().chunks(2) {
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn variable_elimination_matches_policy_enumeration(seed in any::<u64>()) {
        let doc = random_id(seed);
        let p = DecisionProblem::new(doc).unwrap();
        let fast = p.evaluate(&[]).unwrap();
        let (brute, _) = p.enumerate_policies(&[], POLICY_GUARD).unwrap();
        prop_assert!((fast.meu - brute.meu).abs() <= 1e-9 * fast.meu.abs().max(1.0));
        for (a, b) in fast.first_decision_eus.iter().zip(&brute.first_decision_eus) {
            prop_assert!((a.eu - b.eu).abs() <= 1e-9 * a.eu.abs().max(1.0), "{:?} vs {:?}", fast.first_decision_eus, brute.first_decision_eus);
        }
    }
}

/// Two sequential decisions: `R` observed before `D1`, `C` depends on `R`
/// and `D1` and is observed before `D2`, `Z` hidden.
fn random_id(seed: u64) -> NetworkDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let observe_r = rng.gen_bool(0.5);
    let observe_c = rng.gen_bool(0.5);
    let r = row(&mut rng, 2, false);
    let c: Vec<f64> = (0..4).flat_map(|_| row(&mut rng, 3, false)).collect();
    let z: Vec<f64> = (0..6).flat_map(|_| row(&mut rng, 2, false)).collect();
    let u1: Vec<f64> = (0..6).map(|_| rng.gen_range(-50.0..100.0)).collect();
    let u2: Vec<f64> = (0..4).map(|_| rng.gen_range(-50.0..100.0)).collect();
    let mut d1 = NodeSpec::decision("D1", &["a", "b"]);
    if observe_r {
        d1.parents.push("R".into());
    }
    let mut d2 = NodeSpec::decision("D2", &["x", "y"]);
    d2.parents.push("D1".into());
    if observe_c {
        d2.parents.push("C".into());
    }
    NetworkDoc::new(
        "random-id",
        vec![
            NodeSpec::chance("R", &["r0", "r1"], &[], r),
            d1,
            NodeSpec::chance("C", &["c0", "c1", "c2"], &["R", "D1"], c),
            d2,
            NodeSpec::chance("Z", &["z0", "z1"], &["C", "D2"], z),
            NodeSpec::utility("U1", &["D1", "C"], u1),
            NodeSpec::utility("U2", &["Z", "D2"], u2),
        ],
        vec!["D1".into(), "D2".into()],
    )
}

fn toy_classes() -> (ClassDoc, Registry) {
    let inner = ClassDoc {
        name: "Inner".into(),
        interface: Interface {
            inputs: vec![InputDecl {
                name: "In".into(),
                states: vec!["0".into(), "1".into()],
                prior: Some(vec![0.5, 0.5]),
            }],
            outputs: vec!["Out".into()],
        },
        nodes: vec![
            NodeSpec::chance("H", &["0", "1"], &["In"], vec![0.7, 0.3, 0.2, 0.8]),
            NodeSpec::chance("Out", &["0", "1"], &["H"], vec![0.9, 0.1, 0.4, 0.6]),
        ],
        decision_order: vec![],
        instances: vec![],
    };
    let pair = ClassDoc {
        name: "Pair".into(),
        interface: Interface {
            inputs: vec![InputDecl {
                name: "Seed".into(),
                states: vec!["0".into(), "1".into()],
                prior: None,
            }],
            outputs: vec!["Last".into()],
        },
        nodes: vec![NodeSpec::expression("Last", &["0", "1"], &["B.Out"], CptExpr::copy("B.Out"))],
        decision_order: vec![],
        instances: vec![
            InstanceDecl {
                name: "A".into(),
                class: "Inner".into(),
                bind: [("In".to_string(), "Seed".to_string())].into(),
            },
            InstanceDecl {
                name: "B".into(),
                class: "Inner".into(),
                bind: [("In".to_string(), "A.Out".to_string())].into(),
            },
        ],
    };
    let root = ClassDoc {
        name: "Root".into(),
        interface: Interface::default(),
        nodes: vec![NodeSpec::chance("S", &["0", "1"], &[], vec![0.35, 0.65])],
        decision_order: vec![],
        instances: vec![InstanceDecl {
            name: "P".into(),
            class: "Pair".into(),
            bind: [("Seed".to_string(), "S".to_string())].into(),
        }],
    };
    let mut reg = Registry::new();
    reg.insert("Inner".into(), inner);
    reg.insert("Pair".into(), pair);
    (root, reg)
}

#[test]
fn flattening_is_compositional() {
    let (root, mut reg) = toy_classes();
    let direct = flatten(&root, &reg).unwrap();
    let inlined = reg["Pair"].inline_instances(&reg).unwrap();
    assert!(inlined.instances.is_empty());
    reg.insert("Pair".into(), inlined);
    let staged = flatten(&root, &reg).unwrap();
    assert_eq!(direct.doc, staged.doc);
}

#[test]
fn flattened_marginals_match_hand_built_model() {
    let (root, reg) = toy_classes();
    let flat = flatten(&root, &reg).unwrap();
    // 1 top-level + (2 non-input nodes x 2 instances) + 1 body node of Pair
    assert_eq!(flat.doc.nodes.len(), 6);
    let hand = NetworkDoc::new(
        "hand",
        vec![
            NodeSpec::chance("S", &["0", "1"], &[], vec![0.35, 0.65]),
            NodeSpec::chance("AH", &["0", "1"], &["S"], vec![0.7, 0.3, 0.2, 0.8]),
            NodeSpec::chance("AO", &["0", "1"], &["AH"], vec![0.9, 0.1, 0.4, 0.6]),
            NodeSpec::chance("BH", &["0", "1"], &["AO"], vec![0.7, 0.3, 0.2, 0.8]),
            NodeSpec::chance("BO", &["0", "1"], &["BH"], vec![0.9, 0.1, 0.4, 0.6]),
            NodeSpec::chance("L", &["0", "1"], &["BO"], vec![1.0, 0.0, 0.0, 1.0]),
        ],
        vec![],
    );
    let (oracle, _) = joint_marginals(&hand, &[Evidence::hard("BH", 1)]).unwrap();
    let mut s = InferenceSession::from_doc(&flat.doc).unwrap();
    s.set_evidence(Evidence::hard("P.B.H", 1)).unwrap();
    let map: BTreeMap<&str, &str> = [
        ("S", "S"),
        ("AH", "P.A.H"),
        ("AO", "P.A.Out"),
        ("BO", "P.B.Out"),
        ("L", "P.Last"),
    ]
    .into();
    for (h, f) in map {
        assert_close(&s.marginal(f).unwrap(), &oracle[h], TOL);
    }
    assert_eq!(flat.provenance["P.B.H"].instance, "P.B");
}

#[test]
fn chain_has_expected_cliques() {
    let doc = NetworkDoc::new(
        "chain",
        vec![
            NodeSpec::chance("A", &["0", "1"], &[], vec![0.5, 0.5]),
            NodeSpec::chance("B", &["0", "1"], &["A"], vec![0.5, 0.5, 0.1, 0.9]),
            NodeSpec::chance("C", &["0", "1"], &["B"], vec![0.5, 0.5, 0.3, 0.7]),
        ],
        vec![],
    );
    let net = BayesNet::from_doc(&doc).unwrap();
    let t = JunctionTree::build(&net, &Elimination::MinFill).unwrap();
    let mut cl: Vec<Vec<usize>> = t.cliques().iter().map(|c| c.vars.clone()).collect();
    cl.sort();
    assert_eq!(cl, vec![vec![0, 1], vec![1, 2]]);
    let (a, b) = t.edges()[0];
    assert_eq!(t.separator(a, b), vec![1]);
}

#[test]
fn bayes_rule_two_nodes() {
    let doc = NetworkDoc::new(
        "ab",
        vec![
            NodeSpec::chance("A", &["0", "1"], &[], vec![0.7, 0.3]),
            NodeSpec::chance("B", &["0", "1"], &["A"], vec![0.8, 0.2, 0.1, 0.9]),
        ],
        vec![],
    );
    let mut s = InferenceSession::from_doc(&doc).unwrap();
    assert_close(&s.marginal("A").unwrap(), &[0.7, 0.3], 1e-15);
    s.observe("B", "1").unwrap();
    assert!((s.marginal("A").unwrap()[1] - 27.0 / 41.0).abs() < 1e-12);
    let mut s = InferenceSession::from_doc(&doc).unwrap();
    s.observe("A", "1").unwrap();
    assert!((s.probability_of_evidence().unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn evidence_on_independent_components_multiplies() {
    let doc = random_net(7, 4, false);
    let renamed: Vec<NodeSpec> = doc
        .nodes
        .iter()
        .map(|n| {
            let mut m = n.clone();
            m.name = format!("Y{}", &n.name[1..]);
            m.parents = n.parents.iter().map(|p| format!("Y{}", &p[1..])).collect();
            m
        })
        .collect();
    let mut both = doc.clone();
    both.nodes.extend(renamed);
    let e1 = Evidence::hard("X0", 1);
    let e2 = Evidence::likelihood("Y1", vec![0.3, 1.0, 0.5][..doc.nodes[1].states.len()].to_vec());
    let mut s = InferenceSession::from_doc(&both).unwrap();
    s.set_evidence(e1.clone()).unwrap();
    let p1 = s.probability_of_evidence().unwrap();
    s.clear_evidence();
    s.set_evidence(e2.clone()).unwrap();
    let p2 = s.probability_of_evidence().unwrap();
    s.set_evidence(e1).unwrap();
    assert!((s.probability_of_evidence().unwrap() - p1 * p2).abs() < 1e-12);
}

#[test]
fn factor_examples() {
    let a = var("A", 2);
    let b = var("B", 2);
    let f = Factor::new(vec![a.clone()], vec![0.6, 0.4]).unwrap();
    assert_eq!(f.multiply(&Factor::unit()).unwrap(), f);
    let g = Factor::new(vec![a, b], vec![0.5, 0.5, 0.2, 0.8]).unwrap();
    let fg = f.multiply(&g).unwrap();
    assert_close(fg.values(), &[0.30, 0.30, 0.08, 0.32], 1e-15);
    assert_close(fg.marginalize(&["A"]).unwrap().values(), &[0.38, 0.62], 1e-15);
    assert_eq!(fg.marginalize(&[]).unwrap(), fg);
    let hard = fg.reduce(&Evidence::hard("B", 0)).unwrap();
    assert_close(hard.values(), &[0.30, 0.0, 0.08, 0.0], 1e-15);
    assert_eq!(fg.reduce(&Evidence::likelihood("B", vec![1.0, 1.0])).unwrap(), fg);
    let (soft, _) = fg.reduce(&Evidence::likelihood("B", vec![2.0, 0.0])).unwrap().normalize().unwrap();
    let (n, z) = hard.normalize().unwrap();
    assert_close(soft.values(), n.values(), 1e-15);
    assert!((z - 0.38).abs() < 1e-15);
    assert!((n.values()[0] - 0.30 / 0.38).abs() < 1e-15);
    let (same, one) = Factor::new(vec![var("C", 2)], vec![0.25, 0.75]).unwrap().normalize().unwrap();
    assert_eq!(one, 1.0);
    assert_eq!(same.values(), &[0.25, 0.75]);
    assert!(Factor::new(vec![var("C", 2)], vec![0.0, 0.0]).unwrap().normalize().is_err());
    assert!(Table::new(vec![var("A", 2), Variable::new("A", vec!["x", "y", "z"]).unwrap()], vec![0.0; 6]).is_err());
}
