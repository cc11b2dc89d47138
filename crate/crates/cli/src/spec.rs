//! Run specification: flags, config file and defaults merged into one
//! validated [`RunSpec`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use aloha_core::{Nodes, SystemParams};
use clap::{Arg, ArgAction, ArgMatches};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Limits,
    SweepR,
    Curve,
    DelayCurve,
    Simulate,
    Starvation,
    Jump,
}

impl CommandKind {
    pub const ALL: [CommandKind; 7] = [
        CommandKind::Limits,
        CommandKind::SweepR,
        CommandKind::Curve,
        CommandKind::DelayCurve,
        CommandKind::Simulate,
        CommandKind::Starvation,
        CommandKind::Jump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Limits => "limits",
            CommandKind::SweepR => "sweep-r",
            CommandKind::Curve => "curve",
            CommandKind::DelayCurve => "delay-curve",
            CommandKind::Simulate => "simulate",
            CommandKind::Starvation => "starvation",
            CommandKind::Jump => "jump",
        }
    }

    fn about(self) -> &'static str {
        match self {
            CommandKind::Limits => "Saturation, BBMD and SBMD throughput limits",
            CommandKind::SweepR => "Throughput limits over a grid of backoff factors",
            CommandKind::Curve => "S-G curve with the saturation and BBMD points marked",
            CommandKind::DelayCurve => "Analytic and simulated mean delay over a grid of offered loads",
            CommandKind::Simulate => "Run the real or proxy simulator",
            CommandKind::Starvation => "Running means, divergence score and window counts of saturated runs",
            CommandKind::Jump => "Saturated then open-load attempt rates over a grid of backoff factors",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Open,
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimSystem {
    Real,
    Proxy,
}

/// Which table the `starvation` command emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Report {
    Scores,
    RunningMean,
    Windows,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sweep {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Sweep {
    /// Grid points `min, min + step, …` up to `max` inclusive, computed by
    /// index to avoid accumulating rounding.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.min + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOptions {
    pub slots: u64,
    pub warmup: Option<u64>,
    pub seed: u64,
    pub reps: usize,
    pub window: Option<u64>,
    pub mode: Option<SimMode>,
    pub system: SimSystem,
    /// Fixed collision probability for the proxy system.
    pub pc: Option<f64>,
    /// Packets per running-mean trace.
    pub np: usize,
    /// Keep every `stride`-th running-mean point.
    pub stride: usize,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Output {
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub command: CommandKind,
    pub params: SystemParams,
    pub sim: SimOptions,
    /// Grid over r (`sweep-r`, `jump`), S_o (`delay-curve`) or G (`curve`).
    pub sweep: Option<Sweep>,
    pub report: Report,
    pub output: Output,
}

/// Long flags accepted on the command line and as config-file keys.
pub const KEYS: &[(&str, &str)] = &[
    ("r", "Backoff factor r > 1"),
    ("r0", "Initial backoff divisor r0 >= 1 [default: 10]"),
    ("n", "Node count >= 2, or \"inf\" for the asymptotic regime"),
    ("offered-load", "System offered load S_o in packets per slot"),
    ("slots", "Simulated slots per replication"),
    ("warmup", "Slots discarded before measuring [default: 10% of slots]"),
    ("seed", "Base random seed [default: 1]"),
    ("reps", "Independent replications"),
    ("window", "Window length in slots for per-window departure counts"),
    ("mode", "Simulation mode: open or saturated"),
    ("system", "Simulated system: real or proxy [default: real]"),
    ("pc", "Collision probability for the proxy system [default: analytic]"),
    ("np", "Service samples per running-mean trace [default: 100000]"),
    ("stride", "Keep every k-th running-mean point [default: 1]"),
    ("trace", "Write the raw departure trace of replication 0 to this CSV file"),
    ("report", "Starvation table: scores, running-mean or windows [default: scores]"),
    ("r-min", "Lower end of the r grid"),
    ("r-max", "Upper end of the r grid"),
    ("s-min", "Lower end of the offered-load grid"),
    ("s-max", "Upper end of the offered-load grid"),
    ("g-max", "Upper end of the attempt-rate grid"),
    ("step", "Grid step"),
    ("format", "Output format: csv or json [default: csv]"),
    ("out", "Output file [default: standard output]"),
];

pub fn command() -> clap::Command {
    let mut cmd = clap::Command::new("aloha")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Throughput, delay and starvation analysis of slotted Aloha with exponential backoff")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("PATH")
                .help("Config file of key = value lines; flags override it"),
        );
    for &(key, help) in KEYS {
        cmd = cmd.arg(Arg::new(key).long(key).global(true).action(ArgAction::Set).help(help));
    }
    for kind in CommandKind::ALL {
        cmd = cmd.subcommand(clap::Command::new(kind.name()).about(kind.about()));
    }
    cmd
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("config line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.iter().any(|&(key, _)| key == k) {
            return Err(CliError::invalid(format!("config line {}: unknown key {k:?}", i + 1)));
        }
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

/// Flag values over config values over defaults.
struct Resolver {
    flags: BTreeMap<String, String>,
    config: BTreeMap<String, String>,
}

impl Resolver {
    fn raw(&self, key: &str) -> Option<&str> {
        self.flags.get(key).or_else(|| self.config.get(key)).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::invalid(format!("invalid value {v:?} for --{key}: expected {what}"))),
        }
    }

    fn number(&self, key: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Result<Option<f64>, CliError> {
        let v: Option<f64> = self.parse(key, "a number")?;
        match v {
            Some(x) if !(x.is_finite() && ok(x)) => Err(CliError::invalid(format!("invalid value {x} for --{key}: {rule}"))),
            other => Ok(other),
        }
    }

    fn count(&self, key: &str, min: u64) -> Result<Option<u64>, CliError> {
        let v: Option<u64> = self.parse(key, "a non-negative integer")?;
        match v {
            Some(x) if x < min => Err(CliError::invalid(format!("invalid value {x} for --{key}: must be >= {min}"))),
            other => Ok(other),
        }
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => options.iter().find(|(name, _)| *name == v).map(|&(_, t)| Some(t)).ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                CliError::invalid(format!("invalid value {v:?} for --{key}: expected one of {}", names.join(", ")))
            }),
        }
    }

    fn required<T>(&self, v: Option<T>, key: &str, command: CommandKind) -> Result<T, CliError> {
        v.ok_or_else(|| CliError::invalid(format!("missing required flag --{key} for {}", command.name())))
    }

    fn sweep(&self, lo: &str, hi: &str, defaults: Option<(f64, f64, f64)>, positive: bool) -> Result<Option<Sweep>, CliError> {
        let min = self.number(lo, |x| !positive || x > 0.0, "must be > 0")?;
        let max = self.number(hi, |x| !positive || x > 0.0, "must be > 0")?;
        let step = self.number("step", |x| x > 0.0, "must be > 0")?;
        let (dmin, dmax, dstep) = match defaults {
            Some(d) => d,
            None if min.is_none() && max.is_none() => return Ok(None),
            None => return Err(CliError::invalid(format!("--{lo} and --{hi} must be given together"))),
        };
        let sweep = Sweep { min: min.unwrap_or(dmin), max: max.unwrap_or(dmax), step: step.unwrap_or(dstep) };
        if sweep.min > sweep.max {
            return Err(CliError::invalid(format!("--{lo} must not exceed --{hi}")));
        }
        Ok(Some(sweep))
    }
}

fn flag_values(m: &ArgMatches) -> BTreeMap<String, String> {
    KEYS.iter()
        .filter_map(|&(k, _)| m.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect()
}

/// Parses argv (program name first) into a validated [`RunSpec`].
pub fn parse_run_spec<I, T>(args: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().try_get_matches_from(args).map_err(CliError::from_clap)?;
    let (name, _) = matches.subcommand().expect("a subcommand is required");
    let kind = CommandKind::ALL.into_iter().find(|k| k.name() == name).expect("registered subcommand");
    let config = match matches.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::invalid(format!("cannot read --config {path}: {e}")))?;
            parse_config(&text)?
        }
        None => BTreeMap::new(),
    };
    resolve(kind, Resolver { flags: flag_values(&matches), config })
}

/// Builds a spec from an explicit key/value map, as a config file would.
pub fn spec_from_pairs(kind: CommandKind, pairs: &BTreeMap<String, String>) -> Result<RunSpec, CliError> {
    for k in pairs.keys() {
        if !KEYS.iter().any(|&(key, _)| key == k) {
            return Err(CliError::invalid(format!("unknown key {k:?}")));
        }
    }
    resolve(kind, Resolver { flags: BTreeMap::new(), config: pairs.clone() })
}

fn resolve(kind: CommandKind, res: Resolver) -> Result<RunSpec, CliError> {
    use CommandKind::*;
    let needs_r = !matches!(kind, SweepR | Jump);
    let finite_n = matches!(kind, DelayCurve | Simulate | Starvation | Jump);

    let r = res.number("r", |x| x > 1.0, "backoff factor must be > 1")?;
    let r0 = res.number("r0", |x| x >= 1.0, "initial divisor must be >= 1")?.unwrap_or(10.0);
    let n: Option<Nodes> = res.parse("n", "an integer >= 2 or \"inf\"")?;
    let n = match (n, finite_n) {
        (Some(Nodes::Infinite), true) => {
            return Err(CliError::invalid(format!("invalid value \"inf\" for --n: {} needs a finite node count", kind.name())))
        }
        (Some(n), _) => n,
        (None, true) => return Err(res.required::<Nodes>(None, "n", kind).unwrap_err()),
        (None, false) => Nodes::Infinite,
    };
    let r = if needs_r { res.required(r, "r", kind)? } else { r.unwrap_or(2.0) };
    let mut params = SystemParams::new(r0, r, n).map_err(|e| CliError::invalid(e.to_string()))?;
    if let Some(s) = res.number("offered-load", |x| x > 0.0, "offered load must be > 0")? {
        params = params.with_offered_load(s).map_err(|e| CliError::invalid(e.to_string()))?;
    }

    let default_slots = match kind {
        Jump | DelayCurve | Simulate => 1_000_000,
        _ => 5_000_000,
    };
    let slots = res.count("slots", 1)?.unwrap_or(default_slots);
    let warmup = res.count("warmup", 0)?;
    if let Some(w) = warmup {
        if w >= slots {
            return Err(CliError::invalid(format!("invalid value {w} for --warmup: must be < --slots ({slots})")));
        }
    }
    let default_reps = match kind {
        DelayCurve | Starvation => 5,
        _ => 1,
    };
    let reps = res.count("reps", 1)?.map_or(default_reps, |v| v as usize);
    let window = res.count("window", 1)?.or((kind == Starvation).then_some(7500));
    let mode = res.choice("mode", &[("open", SimMode::Open), ("saturated", SimMode::Saturated)])?;
    let system = res.choice("system", &[("real", SimSystem::Real), ("proxy", SimSystem::Proxy)])?.unwrap_or(SimSystem::Real);
    let pc = res.number("pc", |x| (0.0..1.0).contains(&x), "collision probability must lie in [0, 1)")?;
    let np = res.count("np", 1)?.map_or(100_000, |v| v as usize);
    let stride = res.count("stride", 1)?.map_or(1, |v| v as usize);
    let trace = res.raw("trace").map(PathBuf::from);
    let seed = res.parse("seed", "a non-negative integer")?.unwrap_or(1);

    if mode == Some(SimMode::Open) && params.s_offered.is_none() {
        return Err(CliError::invalid("missing required flag --offered-load for --mode open"));
    }

    let sweep = match kind {
        SweepR => res.sweep("r-min", "r-max", Some((1.05, 3.0, 0.005)), true)?,
        Jump => res.sweep("r-min", "r-max", Some((1.04, 1.2, 0.02)), true)?,
        DelayCurve => res.sweep("s-min", "s-max", Some((0.02, 0.3, 0.02)), true)?,
        Curve => {
            let top = n.finite().map_or(5.0, |k| f64::from(k).min(5.0));
            let g_max = res.number("g-max", |x| x > 0.0, "must be > 0")?.unwrap_or(top);
            if let Some(k) = n.finite() {
                if g_max > f64::from(k) {
                    return Err(CliError::invalid(format!("invalid value {g_max} for --g-max: must be <= n ({k})")));
                }
            }
            let step = res.number("step", |x| x > 0.0, "must be > 0")?.unwrap_or(0.01);
            Some(Sweep { min: 0.0, max: g_max, step })
        }
        _ => None,
    };
    if let (Some(s), SweepR | Jump) = (sweep, kind) {
        if s.min <= 1.0 {
            return Err(CliError::invalid(format!("invalid value {} for --r-min: backoff factor must be > 1", s.min)));
        }
    }

    let report = res
        .choice("report", &[("scores", Report::Scores), ("running-mean", Report::RunningMean), ("windows", Report::Windows)])?
        .unwrap_or(Report::Scores);
    let format = res.choice("format", &[("csv", Format::Csv), ("json", Format::Json)])?.unwrap_or(Format::Csv);
    let path = res.raw("out").map(PathBuf::from);

    Ok(RunSpec {
        command: kind,
        params,
        sim: SimOptions { slots, warmup, seed, reps, window, mode, system, pc, np, stride, trace },
        sweep,
        report,
        output: Output { path, format },
    })
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}
