//! `dpaudit`: run record/replay and distributional audits from the command line.
//!
//! Exit codes: 0 when the audit passes, 1 when violations were found, 2 on
//! usage or internal errors.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dpaudit::corpus::{all_cases, find_case, manifest, run_matrix, CorpusCase, MatrixConfig, Variant};
use dpaudit::distaudit::{blackbox_audit, distributional_audit, AuditVerdict, BlackboxConfig, BlackboxResult, DistAuditConfig};
use dpaudit::neighbors::{gen_neighbors, AdjacencyModel, Strategy, TabularDataset};
use dpaudit::recorder::{generate_traces, AuditContext, Budget, Trace};
use dpaudit::validator::{validate_records, AuditReport, ValidatorConfig, ViolationKind};

const SCHEMA_VERSION: u32 = 1;
const DEFAULT_GAMMA: f64 = 0.05;

#[derive(Parser)]
#[command(name = "dpaudit", version, about = "Grey-box auditor for differential-privacy pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit one corpus pipeline on a neighbouring pair.
    Audit(AuditArgs),
    /// Audit every corpus case on its designated pair and compare with the manifest.
    CorpusMatrix(MatrixArgs),
    /// Print the per-call table of a trace file.
    TraceDump(DumpArgs),
    /// Record a pipeline run (and optionally its replay) to trace files.
    Record(RecordArgs),
    /// Print the case manifest.
    Cases(CasesArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    RecordReplay,
    Distributional,
    Blackbox,
    Full,
}

#[derive(clap::Args)]
struct PairArgs {
    #[arg(long)]
    pipeline: String,
    #[arg(long, default_value = "buggy")]
    variant: Variant,
    /// Defaults to the case's own adjacency model.
    #[arg(long)]
    adjacency: Option<AdjacencyModel>,
    /// Generate the neighbour with this strategy instead of using the crafted pair.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long, env = "DPAUDIT_SEED")]
    seed: u64,
    /// Overrides the case's budget.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(clap::Args)]
struct AuditArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, value_enum, default_value = "record-replay")]
    mode: Mode,
    /// Samples per side (distributional) or total runs (blackbox).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip a validator check (fault injection).
    #[arg(long = "disable-check")]
    disable_check: Vec<ViolationKind>,
}

#[derive(clap::Args)]
struct MatrixArgs {
    #[arg(long, env = "DPAUDIT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Skip the distributional audit.
    #[arg(long)]
    record_replay_only: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "disable-check")]
    disable_check: Vec<ViolationKind>,
}

#[derive(clap::Args)]
struct DumpArgs {
    trace: PathBuf,
    /// `json` re-serializes the parsed trace.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(clap::Args)]
struct RecordArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also replay on the neighbour and write that trace here.
    #[arg(long)]
    replay_out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CasesArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

/// Failure that maps to exit code 2.
struct UsageError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Audit(a) => cmd_audit(a),
        Command::CorpusMatrix(a) => cmd_corpus_matrix(a),
        Command::TraceDump(a) => cmd_trace_dump(a),
        Command::Record(a) => cmd_record(a),
        Command::Cases(a) => cmd_cases(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn validator_config(disabled: &[ViolationKind]) -> ValidatorConfig {
    ValidatorConfig { disabled: disabled.iter().copied().collect::<BTreeSet<_>>() }
}

struct Resolved {
    case: Box<dyn CorpusCase>,
    adjacency: AdjacencyModel,
    strategy: Strategy,
    budget: Budget,
    claimed_epsilon: f64,
    d: TabularDataset,
    d_prime: TabularDataset,
}

fn resolve(p: &PairArgs) -> Result<Resolved> {
    let case = find_case(&p.pipeline).ok_or_else(|| anyhow!("unknown pipeline {:?} (see `dpaudit cases`)", p.pipeline))?;
    let info = case.info();
    let adjacency = p.adjacency.unwrap_or(info.adjacency);
    let strategy = p.strategy.unwrap_or(info.strategy);
    let (d, d_prime) = if adjacency == info.adjacency && strategy == info.strategy {
        case.designated_pair()
    } else {
        gen_neighbors(&case.base_dataset(), adjacency, strategy, p.seed, 1)?.remove(0)
    };
    let mut budget = info.budget;
    let mut claimed_epsilon = info.claimed_epsilon;
    if let Some(e) = p.epsilon {
        if !(e > 0.0 && e.is_finite()) {
            bail!("--epsilon must be positive and finite, got {e}");
        }
        budget.epsilon = e;
        claimed_epsilon = e;
    }
    if let Some(dl) = p.delta {
        if !(dl > 0.0 && dl < 1.0) {
            bail!("--delta must lie in (0, 1), got {dl}");
        }
        budget.delta = dl;
    }
    Ok(Resolved { case, adjacency, strategy, budget, claimed_epsilon, d, d_prime })
}

#[derive(Serialize)]
struct RunReport {
    schema_version: u32,
    pipeline: String,
    variant: Variant,
    adjacency: AdjacencyModel,
    strategy: Strategy,
    seed: u64,
    mode: Mode,
    epsilon: f64,
    delta: f64,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    record_replay: Option<AuditReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distributional: Option<AuditVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distributional_skipped: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blackbox: Option<BlackboxResult>,
}

fn first_leaf(out: &dpaudit::Value) -> f64 {
    out.leaves().first().copied().unwrap_or(f64::NAN)
}

fn cmd_audit(a: AuditArgs) -> Result<bool, UsageError> {
    let r = resolve(&a.pair)?;
    let needs_samples = matches!(a.mode, Mode::Distributional | Mode::Blackbox | Mode::Full);
    if needs_samples && a.samples.is_none() {
        return Err(anyhow!("--samples is required for the distributional and blackbox modes").into());
    }
    let pipeline = r.case.pipeline(a.pair.variant);
    let vcfg = validator_config(&a.disable_check);
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        pipeline: a.pair.pipeline.clone(),
        variant: a.pair.variant,
        adjacency: r.adjacency,
        strategy: r.strategy,
        seed: a.pair.seed,
        mode: a.mode,
        epsilon: r.claimed_epsilon,
        delta: r.budget.delta,
        passed: true,
        record_replay: None,
        distributional: None,
        distributional_skipped: None,
        blackbox: None,
    };

    if a.mode != Mode::Blackbox {
        let pair = generate_traces(pipeline.as_ref(), &r.d, &r.d_prime, r.budget, a.pair.seed);
        if a.mode != Mode::Distributional {
            let rr = validate_records(&pair.record, &pair.replay, &pair.record.specs, &vcfg)?;
            report.passed &= rr.passed();
            report.record_replay = Some(rr);
        }
        if let (Mode::Distributional | Mode::Full, Some(n)) = (a.mode, a.samples) {
            let cfg = DistAuditConfig::new(n, r.budget.delta, r.claimed_epsilon, a.pair.seed);
            match distributional_audit(&pair.record, &pair.replay, &pipeline.registry(), &cfg) {
                Ok(mut v) => {
                    v.findings.retain(|f| !vcfg.disabled.contains(&f.kind));
                    report.passed &= v.findings.is_empty();
                    report.distributional = Some(v);
                }
                Err(dpaudit::distaudit::DistAuditError::Stopped(why)) => report.distributional_skipped = Some(why),
                Err(e) => return Err(e.into()),
            }
        }
    }
    if let (Mode::Blackbox | Mode::Full, Some(n)) = (a.mode, a.samples) {
        let cfg = BlackboxConfig::new(n, r.budget.delta, DEFAULT_GAMMA, a.pair.seed);
        let run = |second: bool, seed: u64| {
            let data = if second { &r.d_prime } else { &r.d };
            let mut ctx = AuditContext::record(pipeline.name(), pipeline.registry(), seed);
            pipeline.run(data, r.budget, &mut ctx).map(|o| first_leaf(&o)).map_err(|h| h.to_string())
        };
        let b = blackbox_audit(run, &cfg, Default::default())?;
        report.passed &= b.eps_lower <= r.claimed_epsilon;
        report.blackbox = Some(b);
    }

    let text = match a.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&report)?),
        Format::Text => audit_text(&report),
    };
    emit(&text, a.out.as_deref())?;
    Ok(report.passed)
}

fn audit_text(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "pipeline {} ({}) adjacency={} strategy={} seed={}",
        r.pipeline, r.variant, r.adjacency, r.strategy, r.seed
    );
    if let Some(rr) = &r.record_replay {
        s.push_str(&rr.to_text());
    }
    if let Some(v) = &r.distributional {
        let _ = writeln!(s, "distributional: eps_hat={:.4} claimed={} delta={}", v.eps_hat, v.eps_claimed, v.delta);
        for f in &v.findings {
            let _ = writeln!(s, "  {}: {}", f.kind, f.message);
        }
    }
    if let Some(why) = &r.distributional_skipped {
        let _ = writeln!(s, "distributional: skipped ({why})");
    }
    if let Some(b) = &r.blackbox {
        let _ = writeln!(s, "blackbox: eps_lower={:.4} (alpha_ub={:.4}, beta_ub={:.4})", b.eps_lower, b.alpha_upper, b.beta_upper);
    }
    let _ = writeln!(s, "result: {}", if r.passed { "PASS" } else { "FAIL" });
    s
}

#[derive(Serialize)]
struct MatrixReport<'a> {
    schema_version: u32,
    seed: u64,
    samples: Option<usize>,
    #[serde(flatten)]
    matrix: &'a dpaudit::corpus::Matrix,
}

fn cmd_corpus_matrix(a: MatrixArgs) -> Result<bool, UsageError> {
    let cfg = MatrixConfig {
        seed: a.seed,
        samples: a.samples,
        distributional: !a.record_replay_only,
        validator: validator_config(&a.disable_check),
        ..Default::default()
    };
    let m = run_matrix(&all_cases(), &cfg);
    let text = match a.format {
        Format::Json => {
            let samples = (!a.record_replay_only).then_some(a.samples);
            let r = MatrixReport { schema_version: SCHEMA_VERSION, seed: a.seed, samples, matrix: &m };
            format!("{}\n", serde_json::to_string_pretty(&r)?)
        }
        Format::Text => m.to_text(),
    };
    emit(&text, a.out.as_deref())?;
    Ok(m.passed)
}

fn cmd_trace_dump(a: DumpArgs) -> Result<bool, UsageError> {
    let raw = std::fs::read_to_string(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?;
    let t = Trace::from_json(&raw).with_context(|| format!("parsing {}", a.trace.display()))?;
    match a.format {
        Format::Json => print!("{}", t.to_json()),
        Format::Text => print!("{}", dump_text(&t)),
    }
    Ok(true)
}

fn dump_text(t: &Trace) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "trace {} mode={:?} seed={} calls={}", t.pipeline, t.mode, t.seed, t.entries.len());
    let _ = writeln!(s, "{:>5}  {:<16} {:<40} {:<16} {:<16}", "index", "kind", "params", "input", "rng");
    for e in &t.entries {
        let params = match &e.params {
            Some(p) => {
                let mut x = format!("eps={} delta={} sens={}", p.epsilon, p.delta, p.sensitivity);
                if let Some(b) = p.scale {
                    let _ = write!(x, " scale={b}");
                }
                if let Some(sg) = p.sigma {
                    let _ = write!(x, " sigma={sg}");
                }
                x
            }
            None => "-".into(),
        };
        let _ = writeln!(s, "{:>5}  {:<16} {:<40} {:<16} {:<16}", e.index, e.kind, params, e.input_digest(), e.rng_digest);
    }
    if let Some(stop) = &t.stop_reason {
        let _ = writeln!(s, "stopped at call {}: {:?} ({})", stop.index, stop.kind, stop.detail);
    }
    s
}

fn cmd_record(a: RecordArgs) -> Result<bool, UsageError> {
    let r = resolve(&a.pair)?;
    let pipeline = r.case.pipeline(a.pair.variant);
    let pair = generate_traces(pipeline.as_ref(), &r.d, &r.d_prime, r.budget, a.pair.seed);
    emit(&pair.record.to_json(), Some(&a.out))?;
    if let Some(p) = &a.replay_out {
        emit(&pair.replay.to_json(), Some(p))?;
    }
    Ok(true)
}

fn cmd_cases(a: CasesArgs) -> Result<bool, UsageError> {
    let m = manifest();
    let text = match a.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&m)?),
        Format::Text => {
            let mut s = String::new();
            for e in &m {
                let expected = e.expected_violation.map_or("-".to_string(), |k| k.to_string());
                let _ = writeln!(s, "{:<20} {:<6} {:<24} {:<12} {}", e.name, e.variant, expected, e.adjacency, e.strategy);
            }
            s
        }
    };
    emit(&text, None)?;
    Ok(true)
}
