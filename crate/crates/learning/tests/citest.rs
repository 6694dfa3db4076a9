use mdss_core::{NetworkDoc, NodeSpec};
use mdss_learning::{chi_square_ci_test, sample};

#[test]
fn independent_coins_reject_at_nominal_rate() {
    let doc = NetworkDoc::new(
        "coins",
        vec![
            NodeSpec::chance("X", &["h", "t"], &[], vec![0.5, 0.5]),
            NodeSpec::chance("Y", &["h", "t"], &[], vec![0.5, 0.5]),
        ],
        vec![],
    );
    let alpha = 0.05;
    let rejected = (0..200u64)
        .filter(|&seed| {
            let d = sample(&doc, 10_000, seed).unwrap();
            chi_square_ci_test(&d, "X", "Y", &[]).unwrap().p_value < alpha
        })
        .count();
    let rate = rejected as f64 / 200.0;
    assert!((rate - alpha).abs() <= 0.04, "rejection rate {rate}");
}

#[test]
fn conditioning_on_common_cause_separates_children() {
    let doc = NetworkDoc::new(
        "fork",
        vec![
            NodeSpec::chance("A", &["0", "1"], &[], vec![0.4, 0.6]),
            NodeSpec::chance("B", &["0", "1"], &["A"], vec![0.85, 0.15, 0.2, 0.8]),
            NodeSpec::chance("C", &["0", "1"], &["A"], vec![0.75, 0.25, 0.1, 0.9]),
        ],
        vec![],
    );
    let mut kept = 0;
    let mut marginal_dependent = 0;
    for seed in 0..200u64 {
        let d = sample(&doc, 1000, 1000 + seed).unwrap();
        if chi_square_ci_test(&d, "B", "C", &["A"]).unwrap().p_value >= 0.05 {
            kept += 1;
        }
        if chi_square_ci_test(&d, "B", "C", &[]).unwrap().p_value < 0.05 {
            marginal_dependent += 1;
        }
    }
    assert!(kept >= 180, "{kept}/200 draws failed to reject");
    assert!(marginal_dependent >= 190);
}
