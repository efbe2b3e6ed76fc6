use std::fs::File;
use std::io::{self, BufRead, BufReader, LineWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hardnet_core::config::{
    ExperimentConfig, LearnerSpec, OmegaPolicy, TauPolicy, ThresholdPolicy,
};
use hardnet_core::distinguisher::{
    noise_levels, public_template, run_trial, summarize_advantage, Decision,
};
use hardnet_core::encoding::BitVector;
use hardnet_core::network::{assemble_depth2_target, assemble_depth3_target};
use hardnet_core::oracle::{OracleMode, PaddingMode};
use hardnet_core::prg::{sample_challenge, uniform_bits, ChallengeKind, Predicate};
use hardnet_core::rng::SeedStream;
use hardnet_core::smoothing::perturb_network;
use hardnet_core::verify::{run_suite, summary_table, SuiteOptions, VerifyReport};
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(
    name = "hardnet",
    version,
    about = "Build, attack and verify pseudorandom-generator-backed ReLU targets"
)]
struct Cli {
    /// Master seed; otherwise the config file's seed, then HARDNET_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent trials.
    #[arg(long, default_value_t = 1, global = true)]
    jobs: usize,
    /// Treat regime warnings as failures.
    #[arg(long, global = true)]
    strict: bool,
    /// Write JSON-lines output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit a serialized target network.
    BuildNet(BuildNetArgs),
    /// Emit a challenge sequence.
    Prg(PrgArgs),
    /// Run the distinguisher and emit one decision per trial.
    Distinguish(DistinguishArgs),
    /// Run the lemma-by-lemma verification suite.
    Verify(VerifyArgs),
    /// Aggregate JSON-lines reports into a summary.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Theorem1,
    Theorem2,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum KindArg {
    Pseudorandom,
    Random,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PaddingArg {
    Dense,
    Lazy,
}

#[derive(Args, Debug, Default)]
struct ProblemArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Predicate name or truth table; defaults to a standard choice for k.
    #[arg(long)]
    predicate: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args, Debug)]
struct BuildNetArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Secret as a bit string; drawn from the seed when absent.
    #[arg(long)]
    x: Option<String>,
    /// Apply parameter noise at the configured level.
    #[arg(long)]
    perturb: bool,
}

#[derive(Args, Debug)]
struct PrgArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Number of output bits.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value = "pseudorandom")]
    kind: KindArg,
    /// Omit the secret from the output.
    #[arg(long)]
    public: bool,
}

#[derive(Args, Debug)]
struct DistinguishArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    holdout_cap: Option<usize>,
    /// oracle, constant[:v] or random-features[:width[:ridge]].
    #[arg(long)]
    learner: Option<String>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    trials: Option<usize>,
    /// paper, midpoint, auto or a number.
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, value_enum)]
    padding: Option<PaddingArg>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    predicate: Option<String>,
    /// Enumerate where feasible and raise sample counts.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long)]
    secrets: Option<usize>,
    #[arg(long)]
    inputs: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    examples: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    holdout_cap: Option<usize>,
    /// Comma-separated matrix sizes for the singular value check.
    #[arg(long, value_delimiter = ',')]
    singular_dims: Option<Vec<usize>>,
    #[arg(long)]
    singular_trials: Option<usize>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// JSON-lines files; stdin when empty.
    files: Vec<PathBuf>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Assertion(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<hardnet_core::Error> for Failure {
    fn from(e: hardnet_core::Error) -> Self {
        Failure::Config(e.into())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Sink {
    out: Box<dyn Write>,
}

impl Sink {
    fn open(path: Option<&PathBuf>) -> anyhow::Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(LineWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(LineWriter::new(io::stdout())),
        };
        Ok(Self { out })
    }

    fn line(&mut self, s: &str) -> io::Result<()> {
        writeln!(self.out, "{s}")
    }
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn parse_kind(k: KindArg) -> Vec<ChallengeKind> {
    match k {
        KindArg::Pseudorandom => vec![ChallengeKind::Pseudorandom],
        KindArg::Random => vec![ChallengeKind::Random],
        KindArg::Both => vec![ChallengeKind::Pseudorandom, ChallengeKind::Random],
    }
}

fn parse_threshold(s: &str) -> anyhow::Result<ThresholdPolicy> {
    Ok(match s {
        "paper" => ThresholdPolicy::Paper,
        "midpoint" => ThresholdPolicy::Midpoint,
        "auto" => ThresholdPolicy::Auto,
        v => ThresholdPolicy::Explicit(v.parse().map_err(|_| anyhow!("bad threshold '{v}'"))?),
    })
}

/// `--seed`, else HARDNET_SEED, else 0.
fn fallback_seed(cli: &Cli) -> anyhow::Result<u64> {
    if let Some(s) = cli.seed {
        return Ok(s);
    }
    match std::env::var("HARDNET_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("HARDNET_SEED={v:?} is not a u64")),
        Err(_) => Ok(0),
    }
}

/// Config file, then flags, then the seed fallback chain.
fn load_config(cli: &Cli, p: &ProblemArgs) -> anyhow::Result<ExperimentConfig> {
    let mut file_seed = false;
    let mut cfg = match &p.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let cfg = serde_json::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            file_seed = serde_json::from_str::<Value>(&text)?.get("seed").is_some();
            cfg
        }
        None => ExperimentConfig::default(),
    };
    if let Some(n) = p.n {
        cfg.n = n;
    }
    match (&p.predicate, p.k) {
        (Some(pred), k) => {
            cfg.predicate = pred.clone();
            cfg.k = k.unwrap_or(Predicate::parse(pred)?.k());
        }
        (None, Some(k)) => {
            cfg.k = k;
            if p.config.is_none() || Predicate::parse(&cfg.predicate).map(|q| q.k()).ok() != Some(k)
            {
                cfg.predicate = Predicate::default_for_arity(k)?.name().to_string();
            }
        }
        (None, None) => {}
    }
    if let Some(m) = p.mode {
        cfg.mode = match m {
            ModeArg::Theorem1 => OracleMode::Theorem1,
            ModeArg::Theorem2 => OracleMode::Theorem2,
        };
    }
    if cli.seed.is_some() || !file_seed {
        cfg.seed = fallback_seed(cli)?;
    }
    Ok(cfg)
}

fn validated(cfg: ExperimentConfig) -> anyhow::Result<ExperimentConfig> {
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn build_net(cli: &Cli, a: &BuildNetArgs) -> Outcome {
    let cfg = validated(load_config(cli, &a.problem)?)?;
    let p = cfg.predicate()?;
    let seeds = SeedStream::new(cfg.seed).child("build-net", 0);
    let x = match &a.x {
        Some(s) => BitVector::parse(s).map_err(|e| anyhow!("bad --x: {e}"))?,
        None => uniform_bits(cfg.n, &mut seeds.rng("secret", 0)),
    };
    if x.len() != cfg.n {
        return Err(Failure::Config(anyhow!(
            "--x has {} bits but n = {}",
            x.len(),
            cfg.n
        )));
    }
    let mut net = match cfg.mode {
        OracleMode::Theorem1 => assemble_depth3_target(&p, &x, cfg.n)?,
        OracleMode::Theorem2 => assemble_depth2_target(&p, &x, cfg.n)?,
    };
    if a.perturb {
        let template = public_template(&p, cfg.n, cfg.mode)?;
        let (tau, _) = noise_levels(&template, &cfg)?;
        net = perturb_network(&net, tau, &mut seeds.rng("params", 0)).0;
    }
    let mut sink = Sink::open(cli.output.as_ref())?;
    sink.line(&net.to_json()?)?;
    Ok(())
}

fn prg(cli: &Cli, a: &PrgArgs) -> Outcome {
    let mut cfg = load_config(cli, &a.problem)?;
    if let Some(m) = a.m {
        cfg.m = m;
    }
    let cfg = validated(cfg)?;
    let p = cfg.predicate()?;
    let kinds = parse_kind(a.kind);
    let mut sink = Sink::open(cli.output.as_ref())?;
    for (i, kind) in kinds.into_iter().enumerate() {
        let seeds = SeedStream::new(cfg.seed).child("prg", i as u64);
        let ch = sample_challenge(&p, cfg.n, cfg.m, kind, &mut seeds.rng("challenge", 0))?;
        let ch = if a.public { ch.without_secret() } else { ch };
        sink.line(&serde_json::to_string(&ch).context("serializing challenge")?)?;
    }
    Ok(())
}

/// Runs trials `0..trials` in chunks of `jobs`, streaming results in index order.
fn stream_trials(
    cfg: &ExperimentConfig,
    kind: ChallengeKind,
    trials: usize,
    jobs: usize,
    mut emit: impl FnMut(Decision) -> io::Result<()>,
) -> Outcome {
    let jobs = jobs.max(1);
    let mut start = 0;
    while start < trials {
        let end = (start + jobs).min(trials);
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = (start..end)
                .map(|i| s.spawn(move || run_trial(cfg, kind, i)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("trial thread panicked"))
                .collect()
        });
        for r in results {
            emit(r?)?;
        }
        start = end;
    }
    Ok(())
}

fn distinguish(cli: &Cli, a: &DistinguishArgs) -> Outcome {
    let mut cfg = load_config(cli, &a.problem)?;
    if let Some(m) = a.m {
        cfg.m = m;
    }
    if let Some(c) = a.holdout_cap {
        cfg.holdout_cap = c;
    }
    if let Some(l) = &a.learner {
        cfg.learner = LearnerSpec::parse(l)?;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(t) = &a.threshold {
        cfg.threshold_policy = parse_threshold(t)?;
    }
    if let Some(t) = a.tau {
        cfg.tau_policy = TauPolicy::Explicit(t);
    }
    if let Some(w) = a.omega {
        cfg.omega_policy = OmegaPolicy::Explicit(w);
    }
    if let Some(p) = a.padding {
        cfg.padding = match p {
            PaddingArg::Dense => PaddingMode::Dense,
            PaddingArg::Lazy => PaddingMode::Lazy,
        };
    }
    let cfg = validated(cfg)?;
    let kinds = match a.kind {
        Some(k) => parse_kind(k),
        None => vec![cfg.kind],
    };
    let mut sink = Sink::open(cli.output.as_ref())?;
    let mut by_kind: Vec<Vec<Decision>> = Vec::new();
    let mut flagged = Vec::new();
    for kind in &kinds {
        let mut got = Vec::new();
        stream_trials(&cfg, *kind, cfg.trials, cli.jobs, |d| {
            sink.line(&serde_json::to_string(&d).map_err(io::Error::other)?)?;
            got.push(d);
            Ok(())
        })?;
        by_kind.push(got);
    }
    for d in by_kind.iter().flatten() {
        for f in &d.regime_flags {
            if !flagged.contains(f) {
                flagged.push(f.clone());
            }
        }
    }
    if let [pseudo, random] = by_kind.as_slice() {
        let adv = summarize_advantage(pseudo, random);
        let line = serde_json::json!({ "summary": adv });
        sink.line(&line.to_string())?;
    }
    for f in &flagged {
        warn(f);
    }
    if cli.strict && !flagged.is_empty() {
        return Err(Failure::Assertion(format!(
            "{} regime warning(s) under --strict",
            flagged.len()
        )));
    }
    Ok(())
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Outcome {
    let predicate = match (&a.predicate, a.k) {
        (Some(p), Some(k)) => {
            let q = Predicate::parse(p)?;
            if q.k() != k {
                return Err(Failure::Config(anyhow!(
                    "predicate {} has arity {}, but k = {k}",
                    q.name(),
                    q.k()
                )));
            }
            p.clone()
        }
        (Some(p), None) => Predicate::parse(p)?.name().to_string(),
        (None, k) => Predicate::default_for_arity(k.unwrap_or(3))?
            .name()
            .to_string(),
    };
    let d = SuiteOptions::default();
    let opts = SuiteOptions {
        n: a.n,
        predicate,
        seed: fallback_seed(cli)?,
        exhaustive: a.exhaustive,
        secrets: a.secrets.unwrap_or(d.secrets),
        inputs: a.inputs.unwrap_or(d.inputs),
        draws: a.draws.unwrap_or(d.draws),
        examples: a.examples.unwrap_or(d.examples),
        samples: a.samples.unwrap_or(d.samples),
        trials: a.trials.unwrap_or(d.trials),
        holdout_cap: a.holdout_cap.unwrap_or(d.holdout_cap),
        singular_dims: a.singular_dims.clone().unwrap_or(d.singular_dims),
        singular_trials: a.singular_trials.unwrap_or(d.singular_trials),
        jobs: cli.jobs,
    };
    let reports = run_suite(&opts)?;
    let mut sink = Sink::open(cli.output.as_ref())?;
    for r in &reports {
        sink.line(&r.to_json_line()?)?;
    }
    eprint!("{}", summary_table(&reports));
    judge(&reports, cli.strict)
}

fn judge(reports: &[VerifyReport], strict: bool) -> Outcome {
    for r in reports.iter().filter(|r| !r.regime_ok) {
        warn(&format!("{}: outside the asymptotic regime", r.lemma_id));
    }
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.lemma_id.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(Failure::Assertion(format!(
            "failed checks: {}",
            failed.join(", ")
        )));
    }
    if strict && reports.iter().any(|r| !r.regime_ok) {
        return Err(Failure::Assertion("regime warnings under --strict".into()));
    }
    Ok(())
}

#[derive(Default)]
struct KindTally {
    trials: usize,
    accepted: usize,
    loss: f64,
}

fn report(cli: &Cli, a: &ReportArgs) -> Outcome {
    let mut lines = Vec::new();
    if a.files.is_empty() {
        for l in io::stdin().lock().lines() {
            lines.push(l?);
        }
    } else {
        for f in &a.files {
            let file = File::open(f).with_context(|| format!("opening {}", f.display()))?;
            for l in BufReader::new(file).lines() {
                lines.push(l?);
            }
        }
    }
    let mut reports = Vec::new();
    let mut pseudo = KindTally::default();
    let mut random = KindTally::default();
    for (i, l) in lines.iter().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(l).with_context(|| format!("line {}", i + 1))?;
        if v.get("lemma_id").is_some() {
            reports.push(
                serde_json::from_value::<VerifyReport>(v)
                    .with_context(|| format!("line {}", i + 1))?,
            );
        } else if v.get("verdict").is_some() {
            let d: Decision =
                serde_json::from_value(v).with_context(|| format!("line {}", i + 1))?;
            let t = match d.kind {
                Some(ChallengeKind::Random) => &mut random,
                _ => &mut pseudo,
            };
            t.trials += 1;
            t.accepted += usize::from(d.verdict == 1);
            t.loss += d.loss;
        }
    }
    let rate = |t: &KindTally| {
        if t.trials == 0 {
            0.0
        } else {
            t.accepted as f64 / t.trials as f64
        }
    };
    let mean = |t: &KindTally| {
        if t.trials == 0 {
            0.0
        } else {
            t.loss / t.trials as f64
        }
    };
    let summary = serde_json::json!({
        "verify_reports": reports.len(),
        "verify_failed": reports.iter().filter(|r| !r.passed).map(|r| r.lemma_id.clone()).collect::<Vec<_>>(),
        "verify_regime_flags": reports.iter().filter(|r| !r.regime_ok).map(|r| r.lemma_id.clone()).collect::<Vec<_>>(),
        "pseudorandom_trials": pseudo.trials,
        "random_trials": random.trials,
        "accept_pseudorandom": rate(&pseudo),
        "accept_random": rate(&random),
        "advantage": (rate(&pseudo) - rate(&random)).abs(),
        "mean_loss_pseudorandom": mean(&pseudo),
        "mean_loss_random": mean(&random),
    });
    let mut sink = Sink::open(cli.output.as_ref())?;
    sink.line(&summary.to_string())?;
    if !reports.is_empty() {
        eprint!("{}", summary_table(&reports));
    }
    judge(&reports, cli.strict)
}

fn run(cli: &Cli) -> Outcome {
    if cli.jobs == 0 {
        bail_config("--jobs must be at least 1")?;
    }
    match &cli.command {
        Command::BuildNet(a) => build_net(cli, a),
        Command::Prg(a) => prg(cli, a),
        Command::Distinguish(a) => distinguish(cli, a),
        Command::Verify(a) => verify(cli, a),
        Command::Report(a) => report(cli, a),
    }
}

fn bail_config(msg: &str) -> anyhow::Result<()> {
    bail!("{msg}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
