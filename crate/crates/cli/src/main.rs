//! Command-line interface: stream confidence sequences, scenario
//! simulation, best-arm identification, and prediction-powered inference.
//!
//! Exit codes: 0 success, 2 configuration errors, 3 data errors, 4 I/O
//! errors.

mod config;

use betcs::engine::{stream_csv_row, StepIntervals, STREAM_CSV_HEADER};
use betcs::lucb::{lucb_run, Arm, LucbConfig};
use betcs::ppi::{self, PpiStream, StopSummary};
use betcs::sim::{self, MethodName, PriorRegime, Scenario};
use betcs::{BettingConfig, CsStream, ErrorClass, MethodSpec, TrueLaw};
use clap::{Args, Parser, Subcommand};
use config::ConfigDocument;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "betcs", version, about = "Anytime-valid confidence sequences for bounded means via betting")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; all randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Method override: empirical | parametric | mdp | betel | retel | oracle.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Confidence parameter override.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Truncation parameter override.
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Inversion grid size override.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Output path (defaults to stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stream a confidence sequence over observations in [0, 1], one per
    /// line, from a file or stdin. Emits one CSV row per observation.
    Cs {
        /// Input file; stdin when omitted.
        input: Option<PathBuf>,
    },
    /// Run a simulation scenario and export per-step aggregates as CSV.
    Simulate,
    /// Best-arm identification over simulated or replayed arms. Writes a
    /// summary JSON (and a trace CSV next to --out).
    Lucb,
    /// Prediction-powered inference over labeled (y, f_x) pairs with an
    /// optional unlabeled prediction pool.
    Ppi {
        /// Labeled CSV with header y,f_x.
        labeled: Option<PathBuf>,
        /// Unlabeled CSV with header f_x; omitting it selects classical
        /// mode (labels fed directly).
        unlabeled: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct CliError {
    class: ErrorClass,
    message: String,
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Config,
            message: msg.into(),
        }
    }

    fn data(msg: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Data,
            message: msg.into(),
        }
    }

    fn io(msg: impl Into<String>) -> Self {
        CliError {
            class: ErrorClass::Io,
            message: msg.into(),
        }
    }
}

impl From<betcs::Error> for CliError {
    fn from(e: betcs::Error) -> Self {
        CliError {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            match e.class {
                ErrorClass::Config => ExitCode::from(2),
                ErrorClass::Data => ExitCode::from(3),
                ErrorClass::Io => ExitCode::from(4),
            }
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let doc = load_config(cli.common.config.as_deref())?;
    match &cli.command {
        Command::Cs { input } => cmd_cs(&cli.common, &doc, input.as_deref()),
        Command::Simulate => cmd_simulate(&cli.common, &doc),
        Command::Lucb => cmd_lucb(&cli.common, &doc),
        Command::Ppi { labeled, unlabeled } => {
            cmd_ppi(&cli.common, &doc, labeled.as_deref(), unlabeled.as_deref())
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ConfigDocument> {
    match path {
        None => Ok(ConfigDocument::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::io(format!("reading {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::config(format!("parsing {}: {e}", p.display())))
        }
    }
}

fn betting_config(common: &Common, doc: &ConfigDocument) -> CliResult<BettingConfig> {
    let alpha = common.alpha.unwrap_or(doc.betting.alpha);
    let c = common.c.unwrap_or(doc.betting.c);
    let grid = common.grid.unwrap_or(doc.betting.grid);
    Ok(BettingConfig::new(alpha, c, grid)?)
}

fn method_name(common: &Common, doc: &ConfigDocument) -> CliResult<MethodName> {
    let name = common
        .method
        .clone()
        .unwrap_or_else(|| doc.method.name.clone());
    config::parse_method(&name).map_err(CliError::config)
}

fn scenario_law(doc: &ConfigDocument) -> CliResult<TrueLaw> {
    let spec = doc
        .scenario
        .law
        .as_deref()
        .ok_or_else(|| CliError::config("scenario.law is required"))?;
    config::parse_law(spec).map_err(CliError::config)
}

fn require_seed(common: &Common, doc: &ConfigDocument) -> CliResult<u64> {
    common
        .seed
        .or(doc.scenario.seed)
        .ok_or_else(|| CliError::config("a seed is required (--seed or scenario.seed)"))
}

fn regime(section: Option<&str>, has_prior: bool) -> CliResult<PriorRegime> {
    match section {
        Some(s) => config::parse_regime(s).map_err(CliError::config),
        None if has_prior => Ok(PriorRegime::Custom),
        None => Ok(PriorRegime::NonInformative),
    }
}

/// Builds the method spec from an optionally resolved prior; `law` is only
/// needed by the oracle method.
fn build_spec(
    method: MethodName,
    doc: &ConfigDocument,
    prior: Option<sim::PriorSpec>,
    law: Option<&TrueLaw>,
) -> CliResult<MethodSpec> {
    let need_prior = || {
        prior.ok_or_else(|| {
            CliError::config(format!(
                "method `{method}` needs a [prior] section or a prior regime with a law"
            ))
        })
    };
    Ok(match method {
        MethodName::Empirical => MethodSpec::Empirical,
        MethodName::Parametric => MethodSpec::Parametric {
            prior: need_prior()?.beta_prior(),
            k_rho: doc.method.rho_grid,
            k_nu: doc.method.nu_grid,
        },
        MethodName::Mdp => MethodSpec::Mdp {
            prior: need_prior()?.beta_prior(),
            kappa: doc.method.kappa,
            k_rho: doc.method.rho_grid,
            k_nu: doc.method.nu_grid,
        },
        MethodName::Betel => MethodSpec::Etel {
            config: betcs::predictives::EtelConfig::betel(doc.method.g_etel, need_prior()?.mu)?,
        },
        MethodName::Retel => MethodSpec::Etel {
            config: betcs::predictives::EtelConfig::new(
                doc.method.tau,
                doc.method.g_etel,
                need_prior()?.mu,
            )?,
        },
        MethodName::Oracle => MethodSpec::Oracle {
            law: law
                .cloned()
                .ok_or_else(|| CliError::config("method `oracle` requires scenario.law"))?,
        },
    })
}

/// Prior for data-driven commands: the [prior] section wins; otherwise a
/// law plus regime selects a preset.
fn resolve_prior(
    method: MethodName,
    doc: &ConfigDocument,
    law: Option<&TrueLaw>,
) -> CliResult<Option<sim::PriorSpec>> {
    match (&doc.prior, law) {
        (Some(p), _) => Ok(Some(p.to_spec())),
        (None, Some(law)) => match doc.scenario.prior_regime.as_deref() {
            Some(r) => {
                let reg = config::parse_regime(r).map_err(CliError::config)?;
                Ok(Some(sim::preset_prior(law, reg, method)?))
            }
            None => Ok(Some(sim::preset_prior(
                law,
                PriorRegime::NonInformative,
                method,
            )?)),
        },
        (None, None) => Ok(None),
    }
}

/// Output sink that flushes after every row so truncated output remains a
/// valid prefix.
enum Sink {
    Stdout(std::io::Stdout),
    File(std::fs::File),
}

impl Sink {
    fn create(out: Option<&Path>) -> CliResult<Self> {
        match out {
            None => Ok(Sink::Stdout(std::io::stdout())),
            Some(p) => Ok(Sink::File(std::fs::File::create(p).map_err(|e| {
                CliError::io(format!("creating {}: {e}", p.display()))
            })?)),
        }
    }

    fn write_line(&mut self, line: &str) -> CliResult<()> {
        let res = match self {
            Sink::Stdout(s) => writeln!(s, "{line}").and_then(|_| s.flush()),
            Sink::File(f) => writeln!(f, "{line}").and_then(|_| f.flush()),
        };
        res.map_err(|e| CliError::io(format!("writing output: {e}")))
    }
}

fn cmd_cs(common: &Common, doc: &ConfigDocument, input: Option<&Path>) -> CliResult<()> {
    let config = betting_config(common, doc)?;
    let method = method_name(common, doc)?;
    let law = match method {
        MethodName::Oracle => Some(scenario_law(doc)?),
        _ => doc
            .scenario
            .law
            .as_deref()
            .map(|s| config::parse_law(s).map_err(CliError::config))
            .transpose()?,
    };
    let prior = resolve_prior(method, doc, law.as_ref())?;
    let spec = build_spec(method, doc, prior, law.as_ref())?;
    let mut stream = CsStream::new(&spec, config)?;

    let reader: Box<dyn BufRead> = match input {
        None => Box::new(std::io::stdin().lock()),
        Some(p) => Box::new(std::io::BufReader::new(std::fs::File::open(p).map_err(
            |e| CliError::io(format!("opening {}: {e}", p.display())),
        )?)),
    };
    let mut sink = Sink::create(common.out.as_deref())?;
    sink.write_line(STREAM_CSV_HEADER)?;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(format!("reading input: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let x: f64 = trimmed
            .parse()
            .map_err(|_| CliError::data(format!("malformed observation at line {}", idx + 1)))?;
        if !(0.0..=1.0).contains(&x) {
            return Err(CliError::data(format!(
                "observation {x} at line {} is outside [0, 1]",
                idx + 1
            )));
        }
        let rec = stream.step(x)?;
        let step = StepIntervals {
            raw: rec.raw,
            running: rec.running,
        };
        sink.write_line(&stream_csv_row(rec.n, rec.x, &step))?;
    }
    Ok(())
}

fn cmd_simulate(common: &Common, doc: &ConfigDocument) -> CliResult<()> {
    let config = betting_config(common, doc)?;
    let method = method_name(common, doc)?;
    let law = scenario_law(doc)?;
    let seed = require_seed(common, doc)?;
    let reg = regime(doc.scenario.prior_regime.as_deref(), doc.prior.is_some())?;

    let mut scenario = Scenario::new(
        law,
        method,
        reg,
        doc.scenario.horizon.unwrap_or(200),
        doc.scenario.repetitions.unwrap_or(100),
        seed,
    );
    scenario.config = config;
    scenario.custom_prior = doc.prior.as_ref().map(|p| p.to_spec());
    scenario.tracked_mus = doc.scenario.tracked_mus.clone();
    scenario.kappa = doc.method.kappa;
    scenario.etel_grid = doc.method.g_etel;
    scenario.k_rho = doc.method.rho_grid;
    scenario.k_nu = doc.method.nu_grid;

    let result = sim::run_scenario(&scenario)?;
    let csv = sim::render_results_csv(&result);
    match common.out.as_deref() {
        None => {
            print!("{csv}");
            Ok(())
        }
        Some(p) => std::fs::write(p, csv)
            .map_err(|e| CliError::io(format!("writing {}: {e}", p.display()))),
    }
}

#[derive(serde::Serialize)]
struct LucbSummary {
    method: String,
    alpha: f64,
    epsilon: f64,
    selected: Vec<usize>,
    selected_names: Vec<String>,
    total_pulls: u64,
    rounds: u64,
    truncated: bool,
    degenerate_interval: bool,
    seed: u64,
}

fn cmd_lucb(common: &Common, doc: &ConfigDocument) -> CliResult<()> {
    let method = method_name(common, doc)?;
    let seed = require_seed(common, doc)?;
    let lucb_cfg = LucbConfig {
        m: doc.lucb.m,
        alpha: common.alpha.unwrap_or(doc.betting.alpha),
        epsilon: doc.lucb.epsilon,
        max_pulls: doc.lucb.max_pulls,
        union_bound: doc.lucb.union_bound,
    };

    let mut arms: Vec<Arm> = Vec::new();
    if let Some(replay_path) = &doc.lucb.replay {
        let text = std::fs::read_to_string(replay_path)
            .map_err(|e| CliError::io(format!("reading {replay_path}: {e}")))?;
        let columns = betcs::lucb::parse_replay_csv(&text)?;
        let cs_config = BettingConfig::new(
            lucb_cfg.per_arm_alpha(columns.len()),
            common.c.unwrap_or(doc.betting.c),
            common.grid.unwrap_or(doc.betting.grid),
        )?;
        let prior = doc.prior.as_ref().map(|p| p.to_spec());
        let spec = build_spec(method, doc, prior, None)?;
        for (name, values) in columns {
            arms.push(Arm::replay(name, values, &spec, cs_config)?);
        }
    } else {
        if doc.lucb.arms.is_empty() {
            return Err(CliError::config(
                "lucb needs either lucb.arms (laws) or lucb.replay (csv path)",
            ));
        }
        let cs_config = BettingConfig::new(
            lucb_cfg.per_arm_alpha(doc.lucb.arms.len()),
            common.c.unwrap_or(doc.betting.c),
            common.grid.unwrap_or(doc.betting.grid),
        )?;
        for (i, law_spec) in doc.lucb.arms.iter().enumerate() {
            let law = config::parse_law(law_spec).map_err(CliError::config)?;
            // informative arm priors center on the arm's mean estimate, the
            // bandit analog of eliciting a prior from auxiliary evaluations
            let prior = match (&doc.prior, doc.lucb.prior_regime.as_deref()) {
                (_, Some("informative")) => Some(sim::elicited_prior(law.mean())?),
                (_, Some(r)) => {
                    let reg = config::parse_regime(r).map_err(CliError::config)?;
                    Some(sim::preset_prior(&law, reg, method)?)
                }
                (Some(p), None) => Some(p.to_spec()),
                (None, None) => None,
            };
            let spec = build_spec(method, doc, prior, Some(&law))?;
            arms.push(Arm::simulated(
                format!("arm{i}"),
                law,
                &spec,
                cs_config,
                betcs::num::split_seed(seed, i as u64),
            )?);
        }
    }

    let names: Vec<String> = arms.iter().map(|a| a.name.clone()).collect();
    let (outcome, state) = lucb_run(arms, lucb_cfg)?;
    let summary = LucbSummary {
        method: method.to_string(),
        alpha: lucb_cfg.alpha,
        epsilon: lucb_cfg.epsilon,
        selected_names: outcome.selected.iter().map(|&i| names[i].clone()).collect(),
        selected: outcome.selected,
        total_pulls: outcome.total_pulls,
        rounds: outcome.rounds,
        truncated: outcome.truncated,
        degenerate_interval: outcome.degenerate_interval,
        seed,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::io(format!("serializing summary: {e}")))?;
    if let Some(p) = common.out.as_deref() {
        std::fs::write(p, &json)
            .map_err(|e| CliError::io(format!("writing {}: {e}", p.display())))?;
        let trace_path = p.with_extension("trace.csv");
        std::fs::write(&trace_path, betcs::lucb::render_trace_csv(&state))
            .map_err(|e| CliError::io(format!("writing {}: {e}", trace_path.display())))?;
    }
    println!("{json}");
    Ok(())
}

fn cmd_ppi(
    common: &Common,
    doc: &ConfigDocument,
    labeled: Option<&Path>,
    unlabeled: Option<&Path>,
) -> CliResult<()> {
    let config = betting_config(common, doc)?;
    let method = method_name(common, doc)?;

    let labeled_path = labeled
        .map(Path::to_path_buf)
        .or_else(|| doc.ppi.labeled.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::config("ppi needs a labeled csv (positional or ppi.labeled)"))?;
    let labeled_text = std::fs::read_to_string(&labeled_path)
        .map_err(|e| CliError::io(format!("reading {}: {e}", labeled_path.display())))?;
    let pairs = ppi::parse_labeled_csv(&labeled_text)?;

    let unlabeled_path = unlabeled
        .map(Path::to_path_buf)
        .or_else(|| doc.ppi.unlabeled.as_ref().map(PathBuf::from));
    let classical = doc.ppi.classical || unlabeled_path.is_none();

    let bounds = (doc.ppi.bounds[0], doc.ppi.bounds[1]);
    let (stream_bounds, shift) = if classical {
        ((0.0, 1.0), 0.0)
    } else {
        let path = unlabeled_path.expect("checked above");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
        let preds = ppi::parse_unlabeled_csv(&text)?;
        let ds = ppi::PpiDataset {
            unlabeled_predictions: preds,
            labeled_pairs: pairs.clone(),
            residual_bounds: bounds,
        };
        ds.validate()?;
        (bounds, ppi::plugin_mean(&ds)?)
    };

    // Prior elicitation: an explicit [prior] section wins; otherwise the
    // zero-centered rectifier prior with concentration from n0, paired with
    // the Gamma(7.5, 1) concentration prior for the beta working model.
    let spec = match (&doc.prior, method) {
        (_, MethodName::Empirical) => MethodSpec::Empirical,
        (Some(p), _) => build_spec(method, doc, Some(p.to_spec()), None)?,
        (None, _) => {
            let z_prior = if classical {
                betcs::predictives::BetaParams { a: 1.0, b: 1.0 }
            } else {
                ppi::zscale_prior(doc.ppi.n0, stream_bounds)?
            };
            let prior = sim::PriorSpec {
                rho: z_prior,
                nu: betcs::predictives::GammaParams {
                    shape: 7.5,
                    rate: 1.0,
                },
                mu: z_prior,
            };
            build_spec(method, doc, Some(prior), None)?
        }
    };

    let mut stream = PpiStream::new(&spec, config, stream_bounds, shift)?;
    let mut sink = Sink::create(common.out.as_deref())?;
    sink.write_line(STREAM_CSV_HEADER)?;
    let mut stop_n: Option<usize> = None;
    for (i, &(y, fx)) in pairs.iter().enumerate() {
        let fx = if classical { 0.0 } else { fx };
        let rec = stream.step(y, fx)?;
        let step = StepIntervals {
            raw: rec.theta_raw,
            running: rec.theta,
        };
        sink.write_line(&stream_csv_row(rec.n, rec.z, &step))?;
        if stop_n.is_none() && (rec.theta.empty || rec.theta.lower > doc.ppi.null_threshold) {
            stop_n = Some(i + 1);
        }
    }
    let summary = StopSummary {
        method: method.to_string(),
        alpha: config.alpha,
        stop_n,
        seed: common.seed.or(doc.scenario.seed),
    };
    let json = ppi::stop_summary_json(&summary);
    if common.out.is_some() {
        println!("{json}");
    } else {
        eprintln!("{json}");
    }
    Ok(())
}
