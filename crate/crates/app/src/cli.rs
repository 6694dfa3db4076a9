//! `mdss` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mdss_core::Coupling;
use mdss_learning::synth::{aa_constraints, aa_variables};
use mdss_learning::{em_fit, learn_structure, synth_aa_data, CaseDataset, ConstraintSet, EmConfig, LearnConfig};
use mdss_models::catalog::{ModelRequest, PayoffChoice, PayoffPreset, StrategyChoice, StrategyPreset};
use mdss_models::fixtures::{fixture_names, fixture_source};
use mdss_models::pd::StopRule;
use mdss_models::scenario::{render_decision, render_marginals};
use mdss_models::sweep::EvidencePath;
use mdss_models::{run_scenario, table6_sweep, ModelSession, ScenarioDoc, StopOverride, StrategyParams};

use crate::error::{ApiError, ApiResult};
use crate::grammar::{parse_evidence, EVIDENCE_GRAMMAR};
use crate::library::{machine, node_names, read_network, ModelLibrary};
use crate::store::SessionStore;
use crate::sweep_args::SweepRequest;

#[derive(Parser, Debug)]
#[command(name = "mdss", version, about = "Merger decision support: AA network, duopoly games, scenarios")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List bundled models and scenarios
    Models {
        #[arg(long)]
        json: bool,
    },
    /// Posterior marginals under evidence
    Infer {
        #[command(flatten)]
        model: ModelArgs,
        /// Evidence, `Node=State` or `Node~w1,w2,...`
        #[arg(short, long = "evidence")]
        evidence: Vec<String>,
        /// Query node (repeatable; all nodes when omitted)
        #[arg(short, long = "query")]
        query: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Expected utilities and optimal policy of a decision model
    Decide {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(short, long = "evidence")]
        evidence: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Fit CPTs of a structure to case data by EM
    LearnCpt {
        /// Network whose structure (nodes, states, parents) is fitted
        #[arg(long)]
        structure: PathBuf,
        /// CSV with one column per node; `?` or empty marks missing
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        pseudo_count: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Write the fitted network here instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Learn a structure with the constrained PC algorithm
    LearnStructure {
        #[arg(long)]
        data: PathBuf,
        /// Network providing the variable schema (the AA schema by default)
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Constraint file; the AA tiers apply when neither this nor `--no-constraints` is given
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long, conflicts_with = "constraints")]
        no_constraints: bool,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 3)]
        max_conditioning: usize,
        /// Emit a network document (uniform tables) instead of the PDAG
        #[arg(long)]
        network: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sample synthetic AA cases
    SynthData {
        #[arg(long, default_value_t = 6920)]
        rows: usize,
        #[arg(long, default_value_t = 6920)]
        seed: u64,
        /// Hide each cell with this probability
        #[arg(long)]
        missing: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Scenario documents
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Parameter sweeps
    Sweep {
        #[command(subcommand)]
        action: SweepAction,
    },
    /// Serve the HTTP API
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Networks (`*.json`) to offer next to the bundled models
        #[arg(long)]
        model_dir: Option<PathBuf>,
        /// Append-only session journal, replayed on start
        #[arg(long)]
        journal: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ScenarioAction {
    /// Run a scenario file or a bundled scenario by name
    Run {
        scenario: String,
        #[arg(long)]
        json: bool,
    },
    /// List bundled scenarios
    List,
    /// Print a bundled scenario document
    Show { name: String },
}

#[derive(Subcommand, Debug)]
enum SweepAction {
    /// First-move expected utilities over the alpha grid and evidence conditions
    Table6 {
        #[arg(long)]
        p_none: Option<f64>,
        #[arg(long)]
        p_e1: Option<f64>,
        #[arg(long)]
        p_e2: Option<f64>,
        #[arg(long)]
        stages: Option<usize>,
        #[arg(long, value_enum)]
        coupling: Option<CouplingArg>,
        #[arg(long, value_enum)]
        payoff: Option<PayoffArg>,
        /// Enter E1/E2 as market evidence in the fitted AA network
        #[arg(long)]
        full_model: bool,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CouplingArg {
    Shared,
    PerStage,
}

impl From<CouplingArg> for Coupling {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Shared => Coupling::SharedAa,
            CouplingArg::PerStage => Coupling::PerStageAa,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PayoffArg {
    Perfect,
    Imperfect,
}

impl From<PayoffArg> for PayoffChoice {
    fn from(p: PayoffArg) -> Self {
        PayoffChoice::Preset(match p {
            PayoffArg::Perfect => PayoffPreset::Perfect,
            PayoffArg::Imperfect => PayoffPreset::Imperfect,
        })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Tft,
    Likelihood,
    Generalized,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StopRuleArg {
    Memoryless,
    Absorbing,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Bundled model id or a network file (`.json`)
    #[arg(short, long)]
    model: String,
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long, value_enum)]
    coupling: Option<CouplingArg>,
    #[arg(long, value_enum, conflicts_with = "tft")]
    strategy: Option<StrategyArg>,
    /// Rival plays tit for tat
    #[arg(long)]
    tft: bool,
    /// Point value of alpha_C (generalized strategy)
    #[arg(long, requires = "alpha_d")]
    alpha_c: Option<f64>,
    /// Point value of alpha_D (generalized strategy)
    #[arg(long, requires = "alpha_c")]
    alpha_d: Option<f64>,
    #[arg(long, value_enum)]
    payoff: Option<PayoffArg>,
    #[arg(long, value_enum)]
    stop_rule: Option<StopRuleArg>,
    /// Replace the first AA instance by a Bernoulli stop signal
    #[arg(long)]
    stop_prob: Option<f64>,
    /// Stop probability of later per-stage instances under `--stop-prob`
    #[arg(long, requires = "stop_prob")]
    later_stop_prob: Option<f64>,
}

impl ModelArgs {
    fn request(&self) -> ModelRequest {
        let strategy = match (self.alpha_c, self.alpha_d, self.strategy, self.tft) {
            (Some(c), Some(d), _, _) => Some(StrategyChoice::Custom(StrategyParams::generalized(c, d))),
            (_, _, _, true) => Some(StrategyChoice::Preset(StrategyPreset::Tft)),
            (_, _, Some(s), _) => Some(StrategyChoice::Preset(match s {
                StrategyArg::Tft => StrategyPreset::Tft,
                StrategyArg::Likelihood => StrategyPreset::Likelihood,
                StrategyArg::Generalized => StrategyPreset::Generalized,
            })),
            _ => None,
        };
        ModelRequest {
            model: self.model.clone(),
            stages: self.stages,
            coupling: self.coupling.map(Into::into),
            strategy,
            payoff: self.payoff.map(Into::into),
            stop_rule: self.stop_rule.map(|r| match r {
                StopRuleArg::Memoryless => StopRule::Memoryless,
                StopRuleArg::Absorbing => StopRule::Absorbing,
            }),
        }
    }

    fn stop_override(&self) -> Option<StopOverride> {
        self.stop_prob.map(|p| StopOverride {
            p,
            later_stages: self.later_stop_prob,
        })
    }
}

/// Session built from CLI options, with override and evidence applied.
fn prepared_session(model: &ModelArgs, evidence: &[String]) -> ApiResult<ModelSession> {
    let mut s = ModelLibrary::default().session(&model.request())?;
    let inputs = evidence.iter().map(|e| parse_evidence(e)).collect::<ApiResult<Vec<_>>>()?;
    let names = node_names(&s);
    if let Some(o) = model.stop_override() {
        s.override_stop(Some(o))?;
    }
    for input in &inputs {
        s.set_evidence(input).map_err(|e| ApiError::from(e).with_nodes(&names))?;
    }
    Ok(s)
}

fn write_out(path: Option<&Path>, text: &str, out: &mut dyn Write) -> ApiResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| ApiError::io(p, e)),
        None => out.write_all(text.as_bytes()).map_err(|e| ApiError::new("io-error", e.to_string())),
    }
}

fn read_text(path: &Path) -> ApiResult<String> {
    std::fs::read_to_string(path).map_err(|e| ApiError::io(path, e))
}

fn load_scenario(arg: &str) -> ApiResult<ScenarioDoc> {
    let path = Path::new(arg);
    let text = if path.exists() {
        read_text(path)?
    } else if let Some(src) = fixture_source(arg) {
        src.to_string()
    } else {
        return Err(ApiError::usage(format!(
            "`{arg}` is neither a file nor a bundled scenario ({})",
            fixture_names().join(", ")
        )));
    };
    Ok(ScenarioDoc::parse(&text)?)
}

fn say(out: &mut dyn Write, text: &str) -> ApiResult<()> {
    out.write_all(text.as_bytes()).map_err(|e| ApiError::new("io-error", e.to_string()))
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> ApiResult<()> {
    match cli.command {
        Command::Models { json } => {
            let models = ModelLibrary::default().models();
            if json {
                say(out, &machine(&models))
            } else {
                let mut text = String::new();
                for m in &models {
                    text.push_str(&format!("{:<10} {:<9} {}\n", m.id, format!("{:?}", m.kind).to_lowercase(), m.description));
                }
                text.push_str(&format!("scenarios: {}\n", fixture_names().join(", ")));
                say(out, &text)
            }
        }
        Command::Infer {
            model,
            evidence,
            query,
            json,
        } => {
            let s = prepared_session(&model, &evidence)?;
            let names = node_names(&s);
            let m = s.marginals(&query).map_err(|e| ApiError::from(e).with_nodes(&names))?;
            if json {
                say(out, &machine(&m))
            } else {
                say(out, &format!("{}P(evidence) = {:.6}\n", render_marginals(&m), m.probability_of_evidence))
            }
        }
        Command::Decide { model, evidence, json } => {
            let s = prepared_session(&model, &evidence)?;
            let d = s.decision()?;
            if json {
                say(out, &machine(&d))
            } else {
                let mut text = render_decision(&d);
                for u in &d.utilities {
                    text.push_str(&format!("  E[{}] = {:.2}\n", u.node, u.expected));
                }
                say(out, &text)
            }
        }
        Command::LearnCpt {
            structure,
            data,
            pseudo_count,
            max_iter,
            tol,
            output,
        } => {
            let doc = read_network(&structure)?;
            let schema = doc
                .nodes
                .iter()
                .map(|n| doc.variable(&n.name))
                .collect::<Result<Vec<_>, _>>()?;
            let f = std::fs::File::open(&data).map_err(|e| ApiError::io(&data, e))?;
            let cases = CaseDataset::read_csv(f, &schema)?;
            let cfg = EmConfig {
                pseudo_count,
                tol,
                max_iter,
            };
            let fit = em_fit(&doc, &cases, &cfg)?;
            let _ = writeln!(
                err,
                "EM: {} rows, {:.1}% missing, {} iterations, converged: {}, log-likelihood {:.4}",
                cases.len(),
                100.0 * cases.missing_fraction(),
                fit.iterations,
                fit.converged,
                fit.loglik.last().copied().unwrap_or(f64::NAN)
            );
            write_out(output.as_deref(), &format!("{}\n", fit.network.serialize()), out)
        }
        Command::LearnStructure {
            data,
            schema,
            constraints,
            no_constraints,
            alpha,
            max_conditioning,
            network,
            output,
        } => {
            let vars = match &schema {
                Some(p) => {
                    let doc = read_network(p)?;
                    doc.nodes
                        .iter()
                        .map(|n| doc.variable(&n.name))
                        .collect::<Result<Vec<_>, _>>()?
                }
                None => aa_variables(),
            };
            let c = match (&constraints, no_constraints) {
                (Some(p), _) => ConstraintSet::parse(&read_text(p)?)?,
                (None, true) => ConstraintSet::default(),
                (None, false) if schema.is_none() => aa_constraints(),
                (None, false) => ConstraintSet::default(),
            };
            let f = std::fs::File::open(&data).map_err(|e| ApiError::io(&data, e))?;
            let cases = CaseDataset::read_csv(f, &vars)?;
            let cfg = LearnConfig { alpha, max_conditioning };
            let pdag = learn_structure(&cases, &c, &cfg)?;
            let _ = writeln!(err, "PC: {} variables, {} edges", pdag.variables.len(), pdag.edges.len());
            let text = if network {
                format!("{}\n", pdag.to_structure("learned", &cases)?.serialize())
            } else {
                machine(&pdag)
            };
            write_out(output.as_deref(), &text, out)
        }
        Command::SynthData {
            rows,
            seed,
            missing,
            output,
        } => {
            let mut d = synth_aa_data(rows, seed)?;
            if let Some(rate) = missing {
                if !(0.0..=1.0).contains(&rate) {
                    return Err(ApiError::new("invalid-probability", format!("missing rate {rate} outside [0, 1]")));
                }
                d = d.with_missing(rate, seed.wrapping_add(1));
            }
            let mut buf = Vec::new();
            d.write_csv(&mut buf)?;
            write_out(output.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"), out)
        }
        Command::Scenario { action } => match action {
            ScenarioAction::Run { scenario, json } => {
                let doc = load_scenario(&scenario)?;
                let r = run_scenario(&doc)?;
                if json {
                    say(out, &machine(&r))?;
                } else {
                    say(out, &r.render_text())?;
                }
                if r.passed {
                    Ok(())
                } else {
                    Err(ApiError::new("assertion-failed", format!("scenario `{}` failed an assertion", r.name)))
                }
            }
            ScenarioAction::List => say(out, &format!("{}\n", fixture_names().join("\n"))),
            ScenarioAction::Show { name } => match fixture_source(&name) {
                Some(src) => say(out, src),
                None => Err(ApiError::usage(format!("no bundled scenario `{name}`"))),
            },
        },
        Command::Sweep {
            action:
                SweepAction::Table6 {
                    p_none,
                    p_e1,
                    p_e2,
                    stages,
                    coupling,
                    payoff,
                    full_model,
                    json,
                },
        } => {
            let req = SweepRequest {
                p_none,
                p_e1,
                p_e2,
                stages,
                coupling: coupling.map(Into::into),
                payoff: payoff.map(Into::into),
                path: full_model.then_some(EvidencePath::FullModel),
            };
            let r = table6_sweep(&req.config())?;
            if json {
                say(out, &machine(&r))
            } else {
                say(out, &r.render_text())
            }
        }
        Command::Serve {
            port,
            host,
            model_dir,
            journal,
        } => {
            let library = match &model_dir {
                Some(d) => ModelLibrary::from_dir(d)?,
                None => ModelLibrary::default(),
            };
            let store = match &journal {
                Some(p) => SessionStore::with_journal(library, p)?,
                None => SessionStore::new(library),
            };
            let rt = tokio::runtime::Runtime::new().map_err(|e| ApiError::new("internal", e.to_string()))?;
            rt.block_on(crate::http::serve(Arc::new(store), &format!("{host}:{port}")))
        }
    }
}

/// Runs the CLI; returns the process exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            if code == 2 {
                let _ = writeln!(err, "({EVIDENCE_GRAMMAR})");
            }
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error [{}]: {}", e.code, e.message);
            if e.code == "usage" {
                let _ = writeln!(err, "({EVIDENCE_GRAMMAR})");
            }
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

