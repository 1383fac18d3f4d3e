//! `margin-risk` command-line front end.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use margin_risk::io::{parse_dataset, write_dataset, write_log, LogReader, RecordWriter};
use margin_risk::{
    build_decision_map, default_variables, gen_dataset, learn_ruleset, simulate_flight,
    DecisionMap, DroneParams, IdwParams, PipelineConfig, Provenance, RiskEstimator, RiskModel,
    RuleSet, ScenarioGrid, TiePolicy, WindScenario,
};

const DEFAULT_SEED: u64 = 7;

#[derive(Parser, Debug)]
#[command(
    name = "margin-risk",
    version,
    about = "Disturbance risk from motor saturation margins"
)]
struct Cli {
    /// Base RNG seed for synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// TOML file with pipeline, drone and learning settings.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario grid and write one training pair per scenario.
    GenData(GenDataArgs),
    /// Simulate one flight and write its motor log.
    Simulate(SimulateArgs),
    /// Learn a rule set from training pairs.
    Learn(LearnArgs),
    /// Tabulate a rule set over the input plane.
    Map(MapArgs),
    /// Estimate risk along a motor log.
    Estimate(EstimateArgs),
    /// Print a rule set as a table.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Wind-mean levels x wind-variance levels.
    #[arg(long, default_value = "19x11", value_parser = parse_dims)]
    grid: (usize, usize),
    /// Seconds per scenario.
    #[arg(long)]
    duration: Option<f64>,
    /// Sample rate, Hz.
    #[arg(long)]
    rate: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Mean wind, m/s.
    #[arg(long, default_value_t = 0.0)]
    wind_mean: f64,
    /// Wind variance, m²/s².
    #[arg(long, default_value_t = 0.0)]
    wind_var: f64,
    /// Seconds.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// Extra wind `START:END:EXTRA` (seconds, seconds, m/s). Repeatable.
    #[arg(long, value_parser = parse_gust)]
    gust: Vec<(f64, f64, f64)>,
    /// Sample rate, Hz.
    #[arg(long)]
    rate: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LearnArgs {
    /// Training pairs CSV (`margin_mean,margin_std,risk`).
    #[arg(long)]
    data: PathBuf,
    /// Rule set JSON.
    #[arg(long)]
    out: PathBuf,
    /// Consequent kept when two candidates share an antecedent and a degree.
    #[arg(long, value_enum)]
    ties: Option<Ties>,
}

#[derive(Args, Debug)]
struct MapArgs {
    /// Rule set JSON.
    #[arg(long)]
    rules: PathBuf,
    /// Decision map JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write `mean,std,risk,covered` rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Grid rows (std) x columns (mean).
    #[arg(long, default_value = "101x101", value_parser = parse_dims)]
    size: (usize, usize),
    /// Inverse-distance power for uncovered cells.
    #[arg(long)]
    power: Option<f64>,
    /// Covered neighbours used per uncovered cell.
    #[arg(long)]
    neighbors: Option<usize>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Motor log CSV (`t,m1..mN[,roll_des,roll,pitch_des,pitch]`).
    #[arg(long)]
    log: PathBuf,
    /// Rule set JSON.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Decision map JSON, used where no rule fires.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Margin statistics window, seconds.
    #[arg(long)]
    window: Option<f64>,
    /// Records per second; one per frame when omitted.
    #[arg(long)]
    emit_rate: Option<f64>,
    /// Add a `source` column (inference, map or held).
    #[arg(long)]
    with_source: bool,
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// Rule set JSON.
    rules: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum Ties {
    LowerRisk,
    HigherRisk,
    FirstSeen,
}

impl From<Ties> for TiePolicy {
    fn from(t: Ties) -> Self {
        match t {
            Ties::LowerRisk => TiePolicy::LowerRisk,
            Ties::HigherRisk => TiePolicy::HigherRisk,
            Ties::FirstSeen => TiePolicy::FirstSeen,
        }
    }
}

/// Settings file. Command-line flags override it.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    seed: Option<u64>,
    pipeline: PipelineConfig,
    drone: DroneParams,
    synth: SynthConfig,
    learn: LearnConfig,
    map: IdwParams,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthConfig {
    /// Sample rate, Hz.
    rate: f64,
    /// Seconds per grid scenario.
    duration: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rate: 10.0,
            duration: 60.0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LearnConfig {
    ties: TiePolicy,
}

/// Failure with the exit code it maps to.
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        if is_input_error(&e) {
            Failure::Input(e)
        } else {
            Failure::Internal(e)
        }
    }
}

fn is_input_error(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        if let Some(err) = cause.downcast_ref::<margin_risk::Error>() {
            use margin_risk::Error::*;
            return matches!(
                err,
                Input(_)
                    | Config(_)
                    | InsufficientData(_)
                    | AttitudeUnavailable
                    | Parse { .. }
                    | Io(_)
                    | Csv(_)
                    | Json(_)
            );
        }
        cause.is::<io::Error>() || cause.is::<toml::de::Error>() || cause.is::<UsageError>()
    })
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => load_config(path)?,
        None => Config::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::GenData(args) => gen_data(args, &config, seed),
        Command::Simulate(args) => simulate(args, &config, seed),
        Command::Learn(args) => learn(args, &config),
        Command::Map(args) => map(args, &config),
        Command::Estimate(args) => estimate(args, &config),
        Command::Inspect(args) => inspect(args),
    }
    .map_err(Failure::from)
}

fn load_config(path: &Path) -> anyhow::Result<Config> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: Config =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    config.pipeline.validate()?;
    config.drone.validate()?;
    Ok(config)
}

fn gen_data(args: GenDataArgs, config: &Config, seed: u64) -> anyhow::Result<()> {
    let (mean_levels, var_levels) = args.grid;
    let mut grid = ScenarioGrid::new(mean_levels, var_levels, seed);
    grid.duration = args.duration.unwrap_or(config.synth.duration);
    let rate = args.rate.unwrap_or(config.synth.rate);
    let scenarios = grid.scenarios()?;
    log::info!("simulating {} scenarios at {rate} Hz", scenarios.len());
    let pairs = gen_dataset(&scenarios, &config.drone, rate)?;
    with_output(args.out.as_deref(), |w| Ok(write_dataset(w, &pairs)?))
}

fn simulate(args: SimulateArgs, config: &Config, seed: u64) -> anyhow::Result<()> {
    let mut scenario = WindScenario::new(args.wind_mean, args.wind_var, args.duration, seed);
    for (start, end, extra) in args.gust {
        scenario = scenario.with_gust(start, end, extra);
    }
    let rate = args.rate.unwrap_or(config.synth.rate);
    let frames = simulate_flight(&scenario, &config.drone, rate)?;
    with_output(args.out.as_deref(), |w| Ok(write_log(w, &frames)?))
}

fn learn(args: LearnArgs, config: &Config) -> anyhow::Result<()> {
    let pairs = parse_dataset(&args.data)?;
    let ties = args.ties.map(TiePolicy::from).unwrap_or(config.learn.ties);
    let rules = learn_ruleset(&pairs, &default_variables(), ties)?.with_provenance(Provenance {
        pairs: pairs.len(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs()),
        source: Some(args.data.display().to_string()),
    });
    log::info!("{} pairs -> {} rules", pairs.len(), rules.len());
    write_text(&args.out, &rules.to_json()?)
}

fn map(args: MapArgs, config: &Config) -> anyhow::Result<()> {
    let rules = read_rules(&args.rules)?;
    let idw = IdwParams {
        power: args.power.unwrap_or(config.map.power),
        neighbors: args.neighbors.unwrap_or(config.map.neighbors),
    };
    let (rows, cols) = args.size;
    let map = build_decision_map(&rules, rows, cols, idw)?;
    write_text(&args.out, &map.to_json()?)?;
    if let Some(path) = &args.csv {
        with_output(Some(path), |w| Ok(map.write_csv(w)?))?;
    }
    Ok(())
}

fn estimate(args: EstimateArgs, config: &Config) -> anyhow::Result<()> {
    if args.rules.is_none() && args.map.is_none() {
        return Err(UsageError("estimate needs --rules, --map or both".into()).into());
    }
    let rules = args.rules.as_deref().map(read_rules).transpose()?;
    let map = args.map.as_deref().map(read_map).transpose()?;
    let mut pipeline = config.pipeline;
    if let Some(w) = args.window {
        pipeline.window = w;
    }
    if args.emit_rate.is_some() {
        pipeline.emit_rate = args.emit_rate;
    }
    let mut estimator = RiskEstimator::new(pipeline, RiskModel::new(rules, map)?)?;
    let reader =
        LogReader::open(&args.log).with_context(|| format!("opening {}", args.log.display()))?;
    with_output(args.out.as_deref(), |w| {
        let mut out = RecordWriter::new(w, args.with_source)?;
        let mut frames = 0usize;
        for frame in reader {
            frames += 1;
            if let Some(record) = estimator.push(&frame?)? {
                out.write(&record)?;
            }
        }
        if frames == 0 {
            bail!(margin_risk::Error::Input(format!(
                "{} has no frames",
                args.log.display()
            )));
        }
        out.finish()?;
        Ok(())
    })
}

fn inspect(args: InspectArgs) -> anyhow::Result<()> {
    let rules = read_rules(&args.rules)?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    print_table(&mut w, &rules)?;
    w.flush()?;
    Ok(())
}

fn print_table(w: &mut impl Write, rules: &RuleSet) -> io::Result<()> {
    writeln!(
        w,
        "{:>4}  {:<11} {:<11} {:<11} {:>8}",
        "rule", "mean", "std", "risk", "degree"
    )?;
    for (i, rule) in rules.rules().iter().enumerate() {
        let (mean, std, risk) = rules.labels(rule);
        writeln!(
            w,
            "{:>4}  {mean:<11} {std:<11} {risk:<11} {:>8.4}",
            i + 1,
            rule.degree
        )?;
    }
    let p = &rules.provenance;
    if p.pairs > 0 {
        writeln!(w, "{} rules from {} pairs", rules.len(), p.pairs)?;
    }
    Ok(())
}

fn read_rules(path: &Path) -> anyhow::Result<RuleSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RuleSet::from_json(&text).with_context(|| format!("loading rules from {}", path.display()))
}

fn read_map(path: &Path) -> anyhow::Result<DecisionMap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    DecisionMap::from_json(&text).with_context(|| format!("loading map from {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Run `f` against a buffered file, or stdout when `path` is `None`.
fn with_output(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()
                .with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            Ok(w.flush()?)
        }
    }
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected AxB, got `{s}`"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("`{v}` is not a positive integer"))
    };
    Ok((parse(a)?, parse(b)?))
}

fn parse_gust(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [start, end, extra] => Ok((start, end, extra)),
        _ => Err(format!("expected START:END:EXTRA, got `{s}`")),
    }
}
