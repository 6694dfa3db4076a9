//! Ground-truth antitrust-authority network and synthetic case data.
//!
//! The conditional tables are smooth logistic and ordinal-logit functions of
//! the parents. Each intercept is solved by bisection over the exact parent
//! distribution so that the published marginals are met exactly.

use mdss_core::{BayesNet, Cpt, InferenceSession, NetworkDoc, NodeKind, NodeSpec, TableSpec, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::CaseDataset;
use crate::error::Result;
use crate::structure::ConstraintSet;

pub const YEARS: &str = "Years";
pub const ATECO: &str = "ATECO";
pub const GEO_SIZE: &str = "GeoSize";
pub const BUYER_POWER: &str = "BuyerPower";
pub const ENTRY_BARRIERS: &str = "EntryBarriers";
pub const VERTICAL_EFFECTS: &str = "VerticalEffects";
pub const POST_MARKET_SHARE: &str = "PostMarketShare";
pub const HHI_VARIATION: &str = "HHIVariation";
pub const AA_INTERVENTION: &str = "AAIntervention";

pub const YEAR_STATES: [&str; 3] = ["1991-1996", "1997-2000", "2001-2003"];
pub const GEO_STATES: [&str; 3] = ["sub-national", "national", "supra-national"];
pub const YES_NO: [&str; 2] = ["Yes", "No"];
pub const SHARE_STATES: [&str; 3] = ["<20%", "20-40%", ">40%"];
pub const HHI_STATES: [&str; 5] = ["0", "(0,100)", "[100,500)", "[500,1000)", ">=1000"];
pub const AA_STATES: [&str; 2] = ["0", "1"];
pub const ATECO_SECTORS: usize = 17;

/// Marginals the ground truth is calibrated to.
pub mod targets {
    pub const AA_INTERVENTION: f64 = 0.0189;
    pub const SHARE_BELOW_20: f64 = 0.7438;
    pub const SHARE_ABOVE_40: f64 = 0.0777;
    pub const ENTRY_BARRIERS_NO: f64 = 0.9793;
    pub const VERTICAL_EFFECTS_NO: f64 = 0.9268;
    pub const GEO_SUPRA: f64 = 0.1538;
    /// Combined mass of the two lowest HHI classes.
    pub const HHI_BELOW_100: f64 = 0.8785;
}

pub fn ateco_states() -> Vec<String> {
    (1..=ATECO_SECTORS).map(|i| format!("S{i:02}")).collect()
}

/// Parent lists of the AA structure.
pub fn aa_parents() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        (YEARS, vec![]),
        (ATECO, vec![YEARS]),
        (GEO_SIZE, vec![ATECO]),
        (BUYER_POWER, vec![ATECO]),
        (ENTRY_BARRIERS, vec![ATECO]),
        (VERTICAL_EFFECTS, vec![ATECO]),
        (POST_MARKET_SHARE, vec![ENTRY_BARRIERS, GEO_SIZE, ATECO]),
        (
            HHI_VARIATION,
            vec![ATECO, POST_MARKET_SHARE, YEARS, GEO_SIZE, ENTRY_BARRIERS, BUYER_POWER, VERTICAL_EFFECTS],
        ),
        (
            AA_INTERVENTION,
            vec![HHI_VARIATION, VERTICAL_EFFECTS, POST_MARKET_SHARE, GEO_SIZE, ENTRY_BARRIERS],
        ),
    ]
}

pub fn aa_variables() -> Vec<Variable> {
    let v = |n: &str, s: &[&str]| Variable::new(n, s.to_vec()).expect("static states");
    vec![
        v(YEARS, &YEAR_STATES),
        Variable::new(ATECO, ateco_states()).expect("static states"),
        v(GEO_SIZE, &GEO_STATES),
        v(BUYER_POWER, &YES_NO),
        v(ENTRY_BARRIERS, &YES_NO),
        v(VERTICAL_EFFECTS, &YES_NO),
        v(POST_MARKET_SHARE, &SHARE_STATES),
        v(HHI_VARIATION, &HHI_STATES),
        v(AA_INTERVENTION, &AA_STATES),
    ]
}

/// AA structure with no tables.
pub fn aa_structure() -> NetworkDoc {
    let vars = aa_variables();
    let nodes = aa_parents()
        .into_iter()
        .zip(&vars)
        .map(|((name, parents), var)| NodeSpec {
            name: name.to_string(),
            kind: NodeKind::Chance,
            states: var.states().to_vec(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            table: None,
        })
        .collect();
    NetworkDoc::new("AA", nodes, vec![])
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Root of an increasing function by bisection.
fn bisect(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (-100.0, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ordinal-logit probabilities for cut points `cuts` and linear predictor `eta`.
fn ordinal(cuts: &[f64], eta: f64) -> Vec<f64> {
    let cum: Vec<f64> = cuts.iter().map(|c| sigmoid(c - eta)).collect();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut prev = 0.0;
    for c in &cum {
        out.push(c - prev);
        prev = *c;
    }
    out.push(1.0 - prev);
    out
}

/// Sector effects of the ground truth.
struct Sector {
    weight: f64,
    geo: f64,
    entry: f64,
    vertical: f64,
    share: f64,
    buyer: f64,
    hhi: f64,
}

fn sector(i: usize) -> Sector {
    let x = i as f64;
    Sector {
        weight: 1.0 / (1.0 + 0.18 * x),
        geo: (1.3 * x + 0.4).sin(),
        entry: 0.8 * (0.9 * x + 1.1).cos(),
        vertical: 0.7 * (0.7 * x + 2.0).sin(),
        share: 0.5 * (1.9 * x + 0.3).cos(),
        buyer: 0.6 * (2.3 * x).sin(),
        hhi: 0.4 * (1.1 * x + 0.8).sin(),
    }
}

/// Coefficients of the share, HHI and intervention equations.
const SHARE_ENTRY: f64 = 3.4;
const SHARE_SUB: f64 = 0.6;
const SHARE_SUPRA: f64 = -0.3;
const HHI_SHARE: f64 = 1.6;
const HHI_ENTRY: f64 = 0.8;
const HHI_VERTICAL: f64 = 0.5;
const HHI_BUYER: f64 = -0.4;
const HHI_YEAR: f64 = 0.1;
const HHI_SUB: f64 = 0.2;
const HHI_GAPS: [f64; 4] = [-1.2, 0.0, 1.0, 2.0];
const AA_ENTRY: f64 = 18.7;
const AA_VERTICAL: f64 = 18.3;
const AA_SHARE: f64 = 2.4;
const AA_HHI: f64 = 4.3;
const AA_SUPRA: f64 = 0.3;
const GEO_GAP: f64 = 1.2;
const BUYER_BASE: f64 = -1.5;

fn yes(state: usize) -> f64 {
    if state == 0 {
        1.0
    } else {
        0.0
    }
}

/// Distribution over the parent configurations of `child` under the
/// partially built network `nodes`, in row-major parent order.
fn parent_joint(nodes: &[NodeSpec], child: &str, parents: &[&str], card: usize) -> Result<Vec<f64>> {
    let mut probe = nodes.to_vec();
    let doc0 = NetworkDoc::new("probe", probe.clone(), vec![]);
    let configs: usize = parents
        .iter()
        .map(|p| doc0.variable(p).map(|v| v.cardinality()))
        .product::<std::result::Result<usize, _>>()?;
    let states: Vec<String> = (0..card).map(|i| format!("s{i}")).collect();
    probe.push(NodeSpec {
        name: child.to_string(),
        kind: NodeKind::Chance,
        states,
        parents: parents.iter().map(|p| p.to_string()).collect(),
        table: Some(TableSpec::Explicit {
            values: vec![1.0 / card as f64; configs * card],
        }),
    });
    let doc = NetworkDoc::new("probe", probe, vec![]);
    let mut s = InferenceSession::new(BayesNet::from_doc(&doc)?)?;
    let fam = s.family_marginal(child)?;
    Ok(fam.values().chunks(card).map(|r| r.iter().sum()).collect())
}

fn decode(mut off: usize, cards: &[usize]) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for i in (0..cards.len()).rev() {
        out[i] = off % cards[i];
        off /= cards[i];
    }
    out
}

/// Builds the calibrated ground-truth network.
pub fn aa_ground_truth() -> Result<NetworkDoc> {
    let vars = aa_variables();
    let card = |n: &str| vars.iter().find(|v| v.name() == n).expect("AA variable").cardinality();
    let sectors: Vec<Sector> = (0..ATECO_SECTORS).map(sector).collect();
    let mut nodes: Vec<NodeSpec> = Vec::new();
    let push = |nodes: &mut Vec<NodeSpec>, name: &str, parents: &[&str], values: Vec<f64>| {
        let var = vars.iter().find(|v| v.name() == name).expect("AA variable");
        let states: Vec<&str> = var.states().iter().map(String::as_str).collect();
        nodes.push(NodeSpec::chance(name, &states, parents, values));
    };

    push(&mut nodes, YEARS, &[], vec![0.40, 0.33, 0.27]);

    let mut ateco = Vec::new();
    for y in 0..3 {
        let w: Vec<f64> = sectors
            .iter()
            .enumerate()
            .map(|(i, s)| s.weight * (1.0 + 0.3 * (i as f64 * 1.7 + y as f64 * 2.1).cos()))
            .collect();
        let total: f64 = w.iter().sum();
        ateco.extend(w.iter().map(|x| x / total));
    }
    push(&mut nodes, ATECO, &[YEARS], ateco);

    // single-parent nodes on ATECO
    let pa = parent_joint(&nodes, "probe", &[ATECO], 2)?;
    let t_geo = bisect(
        |t| -sectors.iter().zip(&pa).map(|(s, p)| p * (1.0 - sigmoid(t - s.geo))).sum::<f64>(),
        -targets::GEO_SUPRA,
    );
    let geo: Vec<f64> = sectors.iter().flat_map(|s| ordinal(&[t_geo - GEO_GAP, t_geo], s.geo)).collect();
    push(&mut nodes, GEO_SIZE, &[ATECO], geo);

    let buyer: Vec<f64> = sectors
        .iter()
        .flat_map(|s| {
            let p = sigmoid(BUYER_BASE + s.buyer);
            [p, 1.0 - p]
        })
        .collect();
    push(&mut nodes, BUYER_POWER, &[ATECO], buyer);

    let binary_on_sector = |effect: &dyn Fn(&Sector) -> f64, target_yes: f64| -> Vec<f64> {
        let t = bisect(
            |t| sectors.iter().zip(&pa).map(|(s, p)| p * sigmoid(t + effect(s))).sum::<f64>(),
            target_yes,
        );
        sectors
            .iter()
            .flat_map(|s| {
                let p = sigmoid(t + effect(s));
                [p, 1.0 - p]
            })
            .collect()
    };
    push(
        &mut nodes,
        ENTRY_BARRIERS,
        &[ATECO],
        binary_on_sector(&|s| s.entry, 1.0 - targets::ENTRY_BARRIERS_NO),
    );
    push(
        &mut nodes,
        VERTICAL_EFFECTS,
        &[ATECO],
        binary_on_sector(&|s| s.vertical, 1.0 - targets::VERTICAL_EFFECTS_NO),
    );

    // post-merger market share
    let share_parents = [ENTRY_BARRIERS, GEO_SIZE, ATECO];
    let share_cards: Vec<usize> = share_parents.iter().map(|p| card(p)).collect();
    let pj = parent_joint(&nodes, "probe", &share_parents, 2)?;
    let share_eta: Vec<f64> = (0..pj.len())
        .map(|off| {
            let c = decode(off, &share_cards);
            let geo_term = match c[1] {
                0 => SHARE_SUB,
                2 => SHARE_SUPRA,
                _ => 0.0,
            };
            SHARE_ENTRY * yes(c[0]) + geo_term + sectors[c[2]].share
        })
        .collect();
    let c0 = bisect(
        |c| pj.iter().zip(&share_eta).map(|(p, e)| p * sigmoid(c - e)).sum::<f64>(),
        targets::SHARE_BELOW_20,
    );
    let c1 = bisect(
        |c| -pj.iter().zip(&share_eta).map(|(p, e)| p * (1.0 - sigmoid(c - e))).sum::<f64>(),
        -targets::SHARE_ABOVE_40,
    );
    let share: Vec<f64> = share_eta.iter().flat_map(|e| ordinal(&[c0, c1], *e)).collect();
    push(&mut nodes, POST_MARKET_SHARE, &share_parents, share);

    // HHI variation
    let hhi_parents = [ATECO, POST_MARKET_SHARE, YEARS, GEO_SIZE, ENTRY_BARRIERS, BUYER_POWER, VERTICAL_EFFECTS];
    let hhi_cards: Vec<usize> = hhi_parents.iter().map(|p| card(p)).collect();
    let pj = parent_joint(&nodes, "probe", &hhi_parents, 2)?;
    let hhi_eta: Vec<f64> = (0..pj.len())
        .map(|off| {
            let c = decode(off, &hhi_cards);
            HHI_SHARE * c[1] as f64
                + HHI_ENTRY * yes(c[4])
                + HHI_VERTICAL * yes(c[6])
                + HHI_BUYER * yes(c[5])
                + HHI_YEAR * c[2] as f64
                + sectors[c[0]].hhi
                + if c[3] == 0 { HHI_SUB } else { 0.0 }
        })
        .collect();
    let t_h = bisect(
        |t| pj.iter().zip(&hhi_eta).map(|(p, e)| p * sigmoid(t + HHI_GAPS[1] - e)).sum::<f64>(),
        targets::HHI_BELOW_100,
    );
    let cuts: Vec<f64> = HHI_GAPS.iter().map(|g| t_h + g).collect();
    let hhi: Vec<f64> = hhi_eta.iter().flat_map(|e| ordinal(&cuts, *e)).collect();
    push(&mut nodes, HHI_VARIATION, &hhi_parents, hhi);

    // intervention
    let aa_parents = [HHI_VARIATION, VERTICAL_EFFECTS, POST_MARKET_SHARE, GEO_SIZE, ENTRY_BARRIERS];
    let aa_cards: Vec<usize> = aa_parents.iter().map(|p| card(p)).collect();
    let pj = parent_joint(&nodes, "probe", &aa_parents, 2)?;
    let aa_lin: Vec<f64> = (0..pj.len())
        .map(|off| {
            let c = decode(off, &aa_cards);
            AA_ENTRY * yes(c[4])
                + AA_VERTICAL * yes(c[1])
                + AA_SHARE * c[2] as f64
                + AA_HHI * c[0] as f64
                + if c[3] == 2 { AA_SUPRA } else { 0.0 }
        })
        .collect();
    let t_aa = bisect(
        |t| pj.iter().zip(&aa_lin).map(|(p, l)| p * sigmoid(t + l)).sum::<f64>(),
        targets::AA_INTERVENTION,
    );
    let aa: Vec<f64> = aa_lin
        .iter()
        .flat_map(|l| {
            let p = sigmoid(t_aa + l);
            [1.0 - p, p]
        })
        .collect();
    push(&mut nodes, AA_INTERVENTION, &aa_parents, aa);

    Ok(NetworkDoc::new("AA", nodes, vec![]))
}

/// Temporal tiers of the AA variables; the intervention is a sink.
pub fn aa_constraints() -> ConstraintSet {
    let tier = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    ConstraintSet {
        required: vec![],
        forbidden: vec![],
        tiers: vec![
            tier(&[YEARS]),
            tier(&[ATECO]),
            tier(&[GEO_SIZE, BUYER_POWER, ENTRY_BARRIERS, VERTICAL_EFFECTS]),
            tier(&[POST_MARKET_SHARE, HHI_VARIATION]),
            tier(&[AA_INTERVENTION]),
        ],
        within_tier_free: true,
    }
}

/// Forward sample `n` complete rows from a chance-only network.
pub fn sample(doc: &NetworkDoc, n: usize, seed: u64) -> Result<CaseDataset> {
    let order = doc
        .topological_order()
        .map_err(|v| crate::error::LearningError::Invalid(format!("cycle through `{v}`")))?;
    let chance: Vec<&str> = doc
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Chance)
        .map(|n| n.name.as_str())
        .collect();
    let cpts: Vec<(usize, Vec<usize>, Cpt)> = order
        .iter()
        .filter(|o| chance.contains(&o.as_str()))
        .map(|o| {
            let cpt = doc.cpt(o)?;
            let pos = |x: &str| chance.iter().position(|c| *c == x).expect("chance parent");
            let parents = cpt.parents().iter().map(|p| pos(p.name())).collect();
            Ok((pos(o), parents, cpt))
        })
        .collect::<std::result::Result<_, mdss_core::CoreError>>()?;
    let schema: Vec<Variable> = chance.iter().map(|c| doc.variable(c)).collect::<std::result::Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut assign = vec![0usize; chance.len()];
    for _ in 0..n {
        for (child, parents, cpt) in &cpts {
            let pstates: Vec<usize> = parents.iter().map(|&p| assign[p]).collect();
            let row = cpt.row(&pstates);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = row.len() - 1;
            for (i, p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            assign[*child] = pick;
        }
        rows.push(assign.iter().map(|s| Some(*s)).collect());
    }
    CaseDataset::new(schema, rows)
}

/// `n` synthetic cases drawn from the ground-truth AA network.
pub fn synth_aa_data(n: usize, seed: u64) -> Result<CaseDataset> {
    sample(&aa_ground_truth()?, n, seed)
}
