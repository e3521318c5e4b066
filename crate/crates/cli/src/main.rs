mod manifest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use seqreuse_core::cpc::{rs_cpc, select_params_prop1, select_params_prop2, tdma_set, ParamChoice, RsCpcParams};
use seqreuse_core::crt::{
    crt0_set, crt_set, expanded_set, product, unsplit_conflict_free_threshold, unsplit_gap_bound, ExpandedSetSpec,
    UNSPLIT_PREFIX,
};
use seqreuse_core::geo::{cluster_size, cell_spacing, check_fermion, HexCell, PlanFile, ReusePlan};
use seqreuse_core::netsim::{baseline_compare, check_block_free, frame_offset_audit, simulate, ScenarioConfig};
use seqreuse_core::verify::{
    is_ui, max_conflict_free_gap, min_conflict_free_count, separation_audit, xcorr_bound_audit,
    zero_column_window_audit, Mode, VerifyReport, DEFAULT_STATE_CAP,
};
use seqreuse_core::{Error, SequenceSet, SetMeta};

use manifest::{file_name, manifest_path, ManifestBuilder};

#[derive(Parser)]
#[command(name = "seqreuse", version, about = "Protocol sequences, reuse plans and slot-level simulation")]
struct Cli {
    /// Seed for every random choice; generated and recorded when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (or file prefix for `sim`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sequence set.
    Gen(GenArgs),
    /// Check a property of a sequence set.
    Verify(VerifyArgs),
    /// Cluster size and reuse plan, or the sequence index of one cell.
    Alloc(AllocArgs),
    /// Frame-length parameter selection.
    Params(ParamsArgs),
    /// Simulate a scenario and audit block-free service.
    Sim(SimArgs),
    /// Frame lengths of TDMA and the code-based schemes side by side.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Crt,
    Crt0,
    RsCpc,
    Product,
    Expanded,
    Tdma,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: Kind,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long = "G")]
    cells: Option<usize>,
    #[arg(long, default_value_t = 0)]
    delta: usize,
    /// Row factor for `product`: a dense sequence or a set file (first member).
    #[arg(long)]
    x: Option<String>,
    /// Column factor for `product`.
    #[arg(long)]
    y: Option<String>,
    /// Base set file for `expanded`.
    #[arg(long)]
    base: Option<PathBuf>,
    /// Comma-separated base labels to split (`expanded`); defaults to the
    /// first p members.
    #[arg(long, value_delimiter = ',')]
    split: Vec<String>,
    #[arg(long = "M")]
    max_users: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Property {
    Ui,
    Xcorr,
    Separation,
    Window,
    CfCount,
    CfGap,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Random,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    property: Property,
    /// Set file (JSON or one dense sequence per line).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Without `--input`: use crt0(p, q).
    #[arg(long)]
    p: Option<u64>,
    /// Defaults to 2p - 1.
    #[arg(long)]
    q: Option<u64>,
    #[arg(value_enum, default_value_t = ModeArg::Exhaustive)]
    mode: ModeArg,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// State cap for exhaustive mode.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    cap: u128,
    /// Correlation bound (xcorr), separation bound, gap bound (cf-gap).
    #[arg(long)]
    bound: Option<u64>,
    /// Window length (window); defaults to 2p.
    #[arg(long)]
    window: Option<usize>,
    /// Conflict-free threshold (cf-count).
    #[arg(long)]
    threshold: Option<u64>,
    /// Protected labels (cf-count, cf-gap).
    #[arg(long, value_delimiter = ',')]
    protected: Vec<String>,
}

#[derive(Args)]
struct AllocArgs {
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    /// Cell `m,n` to look up.
    #[arg(long, allow_hyphen_values = true)]
    cell: Option<String>,
    /// Plan file to use instead of sizing from R and h.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    Prop1,
    Prop2,
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(value_enum)]
    which: Which,
    #[arg(long = "M")]
    max_users: u64,
    #[arg(long = "G")]
    cells: u64,
    #[arg(long, default_value_t = 0)]
    delta: u64,
}

#[derive(Args)]
struct SimArgs {
    /// Scenario JSON.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long = "M")]
    max_users: u64,
    #[arg(long = "G")]
    cells: u64,
    #[arg(long, default_value_t = 0)]
    delta: u64,
}

/// Command failure mapped to the exit-code contract.
enum Failure {
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = match &e {
            Error::StateSpaceTooLarge { .. } => format!("{e} (pass `random` with --samples)"),
            _ => e.to_string(),
        };
        Failure::Usage(msg)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    match v {
        Some(v) => Ok(v),
        None => usage(format!("missing --{flag}")),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).or_else(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).or_else(|e| usage(format!("cannot write {}: {e}", path.display())))
}

struct Run {
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
    manifest: ManifestBuilder,
}

impl Run {
    fn manifest_name(&self) -> Option<String> {
        self.out.as_deref().map(|o| file_name(&manifest_path(o)))
    }

    /// Writes `text` to `--out` (recording it) or prints it.
    fn emit(&mut self, text: &str) -> Result<(), Failure> {
        match self.out.clone() {
            Some(path) => {
                write(&path, text)?;
                self.manifest.output(&path);
                Ok(())
            }
            None => {
                // a closed pipe downstream is not an error for us
                let _ = writeln!(std::io::stdout(), "{text}");
                Ok(())
            }
        }
    }

    /// JSON with a `manifest` reference when writing to a file.
    fn emit_json<T: Serialize>(&mut self, value: &T) -> Result<(), Failure> {
        let mut v = serde_json::to_value(value).expect("serialisable");
        if let (Some(name), Value::Object(map)) = (self.manifest_name(), &mut v) {
            map.insert("manifest".into(), Value::String(name));
        }
        let text = serde_json::to_string_pretty(&v).expect("serialisable");
        self.emit(&text)
    }

    fn finish(self) -> Result<(), Failure> {
        if let Some(out) = &self.out {
            let m = self.manifest.finish();
            write(&manifest_path(out), &serde_json::to_string_pretty(&m).expect("serialisable"))?;
        }
        Ok(())
    }
}

fn load_set(path: &Path, run: &mut Run) -> Result<SequenceSet, Failure> {
    let text = read(path)?;
    run.manifest.digest(text.as_bytes());
    Ok(SequenceSet::parse_any(&text)?)
}

fn summary(set: &SequenceSet) -> String {
    let weights: Vec<String> = set.weight_profile().iter().map(|w| w.to_string()).collect();
    format!(
        "{} sequences, period {}, weights {{{}}}",
        set.len(),
        set.period().unwrap_or(0),
        weights.join(",")
    )
}

fn factor(spec: &str, run: &mut Run) -> Result<seqreuse_core::BinarySequence, Failure> {
    let path = Path::new(spec);
    if path.exists() {
        let set = load_set(path, run)?;
        return match set.get(0) {
            Some(s) => Ok(s.clone()),
            None => usage(format!("{spec} holds no sequence")),
        };
    }
    Ok(seqreuse_core::BinarySequence::parse_dense(spec)?)
}

fn cmd_gen(a: GenArgs, run: &mut Run) -> Result<bool, Failure> {
    let set = match a.kind {
        Kind::Crt => crt_set(need(a.p, "p")?, need(a.q, "q")?)?,
        Kind::Crt0 => crt0_set(need(a.p, "p")?, need(a.q, "q")?)?,
        Kind::RsCpc => rs_cpc(RsCpcParams::new(need(a.n, "n")?, need(a.p, "p")?, need(a.k, "k")?)?)?,
        Kind::Tdma => tdma_set(need(a.cells, "G")?, a.delta)?,
        Kind::Product => {
            let x = factor(&need(a.x, "x")?, run)?;
            let y = factor(&need(a.y, "y")?, run)?;
            let z = product(&x, &y)?;
            let meta = SetMeta {
                p: Some(x.period() as u64),
                q: Some(y.period() as u64),
                ..SetMeta::named("product")
            };
            SequenceSet::new(meta, vec![("X.Y".into(), z)])?
        }
        Kind::Expanded => {
            let base = load_set(&need(a.base, "base")?, run)?;
            let p = need(a.p, "p")?;
            let split = if a.split.is_empty() {
                base.labels().iter().take(p as usize).cloned().collect()
            } else {
                a.split
            };
            let max_users = need(a.max_users, "M")?;
            expanded_set(&ExpandedSetSpec { base, split_labels: split, p, max_users })?.set
        }
    };
    eprintln!("{}", summary(&set));
    if run.format == Format::Csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "period", "ones"]).expect("in-memory write");
        for (label, s) in set.iter() {
            let ones: Vec<String> = s.ones().iter().map(|o| o.to_string()).collect();
            w.write_record([label, &s.period().to_string(), &ones.join(" ")]).expect("in-memory write");
        }
        let text = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
        run.emit(text.trim_end())?;
    } else {
        let mut set = set;
        set.manifest = run.manifest_name();
        let text = set.to_json();
        run.emit(&text)?;
    }
    Ok(true)
}

/// Members to audit and protected labels for the expanded-set checks:
/// every split member plus the first `M - 1` unsplit ones.
fn expanded_selection(set: &SequenceSet, protected: &[String]) -> Result<(SequenceSet, Vec<String>), Failure> {
    if !protected.is_empty() {
        return Ok((set.clone(), protected.to_vec()));
    }
    if set.meta.construction != "expanded" {
        return usage("--protected is required unless the set is an expanded set");
    }
    let m = need(set.meta.max_users, "protected (set has no M)")? as usize;
    let unsplit: Vec<&str> = set
        .labels()
        .iter()
        .filter(|l| l.starts_with(UNSPLIT_PREFIX))
        .map(String::as_str)
        .take(m.saturating_sub(1))
        .collect();
    let mut chosen = unsplit.clone();
    chosen.extend(set.labels().iter().filter(|l| !l.starts_with(UNSPLIT_PREFIX)).map(String::as_str));
    Ok((set.select(&chosen)?, unsplit.iter().map(|s| s.to_string()).collect()))
}

fn cmd_verify(a: VerifyArgs, run: &mut Run) -> Result<bool, Failure> {
    let set = match (&a.input, a.p) {
        (Some(path), _) => load_set(path, run)?,
        (None, Some(p)) => crt0_set(p, a.q.unwrap_or(2 * p - 1))?,
        (None, None) => return usage("give --input or --p"),
    };
    let mode = match a.mode {
        ModeArg::Exhaustive => Mode::Exhaustive { cap: a.cap },
        ModeArg::Random => Mode::random(a.samples, run.seed),
    };
    let split_p = || set.meta.p.or(a.p);
    let report: VerifyReport = match a.property {
        Property::Ui => is_ui(&set, mode)?,
        Property::Xcorr => xcorr_bound_audit(&set, need(a.bound, "bound")?)?,
        Property::Separation => {
            let bound = a.bound.or(set.meta.p);
            separation_audit(&set, need(bound, "bound")?)?
        }
        Property::Window => {
            let window = a.window.or(split_p().map(|p| 2 * p as usize));
            zero_column_window_audit(&set, need(window, "window")?, mode)?
        }
        Property::CfCount => {
            let (sel, protected) = expanded_selection(&set, &a.protected)?;
            let threshold = a.threshold.or(split_p().map(unsplit_conflict_free_threshold));
            min_conflict_free_count(&sel, &protected, need(threshold, "threshold")?, mode)?
        }
        Property::CfGap => {
            let (sel, protected) = expanded_selection(&set, &a.protected)?;
            let bound = a.bound.or(match (split_p(), set.meta.base_period) {
                (Some(p), Some(l)) => Some(unsplit_gap_bound(p, l)),
                _ => None,
            });
            max_conflict_free_gap(&sel, &protected, need(bound, "bound")?, mode)?
        }
    };
    eprintln!("{}: {:?} ({} samples)", report.property, report.verdict, report.samples);
    run.emit_json(&report)?;
    Ok(report.holds())
}

#[derive(Serialize)]
struct AllocSummary {
    #[serde(rename = "R")]
    r: f64,
    h: f64,
    /// `(2R/d)^2`.
    target: f64,
    #[serde(rename = "G")]
    g: u64,
    b1: u64,
    b2: u64,
    cochannel_distance: f64,
}

#[derive(Serialize)]
struct CellLookup {
    cell: String,
    coset: usize,
    index: usize,
    representative: String,
}

fn cmd_alloc(a: AllocArgs, run: &mut Run) -> Result<bool, Failure> {
    let plan = match &a.plan {
        Some(path) => {
            let text = read(path)?;
            run.manifest.digest(text.as_bytes());
            let file: PlanFile = serde_json::from_str(&text).or_else(|e| usage(format!("bad plan file: {e}")))?;
            ReusePlan::from_file(&file, None)?
        }
        None => {
            let (r, h) = (need(a.r, "R")?, need(a.h, "h")?);
            if !(r > 0.0 && h > 0.0) {
                return usage("--R and --h must be positive");
            }
            ReusePlan::new(r, h, cluster_size(r, h))?
        }
    };
    if let Some(cell) = a.cell {
        let cell = HexCell::parse(&cell)?;
        let coset = plan.coset_index(cell);
        let hit = CellLookup {
            cell: cell.to_string(),
            coset,
            index: plan.allocate(cell),
            representative: plan.representative(coset).to_string(),
        };
        eprintln!("cell {} -> sequence {}", hit.cell, hit.index);
        run.emit_json(&hit)?;
        return Ok(true);
    }
    let d = cell_spacing(plan.h);
    let target = (2.0 * plan.r / d).powi(2);
    eprintln!(
        "G = {} (b1 = {}, b2 = {}); target (2R/d)^2 = {target:.2}, excess {:.2}",
        plan.g,
        plan.b1,
        plan.b2,
        plan.g as f64 - target
    );
    if run.out.is_some() {
        let mut v = serde_json::to_value(plan.to_file(None)).expect("serialisable");
        if let (Some(name), Value::Object(map)) = (run.manifest_name(), &mut v) {
            map.insert("manifest".into(), Value::String(name));
        }
        run.emit(&serde_json::to_string_pretty(&v).expect("serialisable"))?;
    } else {
        let s = AllocSummary {
            r: plan.r,
            h: plan.h,
            target,
            g: plan.g,
            b1: plan.b1,
            b2: plan.b2,
            cochannel_distance: plan.cochannel_distance(),
        };
        run.emit_json(&s)?;
    }
    Ok(true)
}

#[derive(Serialize)]
struct ParamsOut {
    scheme: &'static str,
    #[serde(rename = "M")]
    max_users: u64,
    #[serde(rename = "G")]
    cells: u64,
    delta: u64,
    n: u64,
    p: u64,
    k: u64,
    #[serde(rename = "L")]
    period: u64,
}

fn cmd_params(a: ParamsArgs, run: &mut Run) -> Result<bool, Failure> {
    let (scheme, choice): (&str, ParamChoice) = match a.which {
        Which::Prop1 => ("prop1", select_params_prop1(a.max_users, a.cells, a.delta)?),
        Which::Prop2 => ("prop2", select_params_prop2(a.max_users, a.cells)?),
    };
    let RsCpcParams { n, p, k } = choice.params;
    let out = ParamsOut {
        scheme,
        max_users: a.max_users,
        cells: a.cells,
        delta: if a.which == Which::Prop1 { a.delta } else { 1 },
        n,
        p,
        k,
        period: choice.period,
    };
    eprintln!("{scheme}: n = {n}, p = {p}, k = {k}, L = {}", choice.period);
    run.emit_json(&out)?;
    Ok(true)
}

fn cmd_compare(a: CompareArgs, run: &mut Run) -> Result<bool, Failure> {
    let table = baseline_compare(a.max_users, a.cells, a.delta)?;
    for r in &table.rows {
        eprintln!("{:>6}  L = {}", r.scheme, r.frame_len);
    }
    eprintln!("floor {}, winner {}", table.floor, table.winner);
    if run.format == Format::Csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scheme", "L", "n", "p", "k", "shift_invariant", "meets_floor"]).expect("in-memory write");
        for r in &table.rows {
            let (n, p, k) = r.params.map_or((String::new(), String::new(), String::new()), |c| {
                (c.n.to_string(), c.p.to_string(), c.k.to_string())
            });
            w.write_record([
                r.scheme.clone(),
                r.frame_len.to_string(),
                n,
                p,
                k,
                r.shift_invariant.to_string(),
                r.meets_floor.to_string(),
            ])
            .expect("in-memory write");
        }
        let text = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
        run.emit(text.trim_end())?;
    } else {
        run.emit_json(&table)?;
    }
    Ok(true)
}

#[derive(Serialize)]
struct SimReport<'a> {
    seed: u64,
    users: usize,
    #[serde(rename = "L")]
    frame_len: usize,
    delta: u64,
    receptions: usize,
    contention_free: usize,
    frame_offset_ok: bool,
    fermion_violations: usize,
    block_free: &'a seqreuse_core::netsim::BlockFreeReport,
    log: Option<String>,
}

fn cmd_sim(a: SimArgs, run: &mut Run) -> Result<bool, Failure> {
    let text = read(&a.config)?;
    run.manifest.digest(text.as_bytes());
    let cfg = ScenarioConfig::from_json(&text)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let scenario = cfg.build(base)?;
    let log = simulate(&scenario, run.seed)?;
    let report = check_block_free(&log, &scenario)?;
    let fermion = check_fermion(&scenario.position_log(&log.states));

    let log_path = run.out.as_ref().map(|o| {
        let stem = o.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sim".into());
        o.with_file_name(format!("{stem}.log.csv"))
    });
    if let Some(path) = &log_path {
        let mut w = csv::Writer::from_path(path).or_else(|e| usage(format!("cannot write {}: {e}", path.display())))?;
        for r in &log.receptions {
            w.serialize(r).or_else(|e| usage(format!("cannot write log: {e}")))?;
        }
        w.flush().or_else(|e| usage(format!("cannot write log: {e}")))?;
        run.manifest.output(path);
    }
    let out = SimReport {
        seed: run.seed,
        users: scenario.users.len(),
        frame_len: scenario.timing.frame_len,
        delta: scenario.timing.delta(),
        receptions: log.receptions.len(),
        contention_free: log.receptions.iter().filter(|r| r.contention_free).count(),
        frame_offset_ok: frame_offset_audit(&log, &scenario),
        fermion_violations: fermion.len(),
        block_free: &report,
        log: log_path.as_deref().map(file_name),
    };
    eprintln!(
        "block-free: {:?} ({} violations over {} neighbour frames)",
        report.verdict,
        report.violations.len(),
        report.counts.len()
    );
    run.emit_json(&out)?;
    Ok(report.holds())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let (seed, generated) = match cli.seed {
        Some(s) => (s, false),
        None => (rand::random::<u64>(), true),
    };
    if generated {
        eprintln!("seed: {seed}");
    }
    let mut run = Run { seed, out: cli.out, format: cli.format, manifest: ManifestBuilder::new(seed, generated) };
    let csv_ok = matches!(cli.command, Command::Gen(_) | Command::Compare(_));
    if run.format == Format::Csv && !csv_ok {
        eprintln!("error: --format csv applies to gen and compare; sim always writes its log as CSV");
        return ExitCode::from(2);
    }
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a, &mut run),
        Command::Verify(a) => cmd_verify(a, &mut run),
        Command::Alloc(a) => cmd_alloc(a, &mut run),
        Command::Params(a) => cmd_params(a, &mut run),
        Command::Sim(a) => cmd_sim(a, &mut run),
        Command::Compare(a) => cmd_compare(a, &mut run),
    }
    .and_then(|holds| run.finish().map(|_| holds));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
