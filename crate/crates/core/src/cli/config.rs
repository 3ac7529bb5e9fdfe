//! Experiment configuration: a TOML file, overridden by command-line flags.
//!
//! ```toml
//! scheme = "ep"            # ep | wcs | pdc
//! trials = 1_000_000
//! seed = 0
//! workers = 0              # 0 = PDC_QKD_WORKERS or all cores
//! truncation_order = 2
//!
//! [channel]
//! eta_a = 0.5
//! eta_b = 0.5
//! eta_l = 0.2
//!
//! [ep]                     # also [pdc]; exactly one of g / mu
//! g = 0.1
//!
//! [wcs]
//! mu_prime = 0.1
//!
//! [attack]
//! kind = "pns"             # none | pns
//! block = "auto"           # or a probability
//! guarantee_delivery = true
//!
//! [sweep]
//! param = "mu"             # g mu mu_prime eta_a eta_b eta_l block
//! start = 0.005
//! stop = 0.02
//! steps = 3
//! spacing = "log"          # linear | log
//! # values = [0.005, 0.01] replaces start/stop/steps
//!
//! [output]
//! format = "csv"           # csv | json
//! path = "out.csv"
//! ```
//!
//! Only the section of the selected scheme is read; unknown keys anywhere
//! are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::detection::ChannelParams;
use crate::eavesdropper::{BlockPolicy, PnsConfig};
use crate::error::Error;
use crate::protocol_engine::Experiment;
use crate::source_model::{g_for_mean, mean_pairs, Gain, Scheme, SourceParams, DEFAULT_TRUNCATION};

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 0;

/// Where a configuration value came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Origin {
    File { path: String, line: usize },
    Flag { flag: String },
    Default,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{path}:{line}"),
            Origin::Flag { flag } => write!(f, "--{flag}"),
            Origin::Default => write!(f, "default"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub origins: Vec<Origin>,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)?;
        if !self.origins.is_empty() {
            let at: Vec<String> = self.origins.iter().map(|o| o.to_string()).collect();
            write!(f, " (at {})", at.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid configuration:\n  {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<ConfigIssue>),
}

impl ConfigError {
    pub fn issues(&self) -> &[ConfigIssue] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }

    pub fn names_field(&self, field: &str) -> bool {
        self.issues().iter().any(|i| i.field == field)
    }
}

// ---- raw file layer ----

type S<T> = Option<Spanned<T>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    scheme: S<String>,
    trials: S<i64>,
    seed: S<i64>,
    workers: S<i64>,
    truncation_order: S<i64>,
    channel: Option<RawChannel>,
    ep: Option<RawGain>,
    pdc: Option<RawGain>,
    wcs: Option<RawWcs>,
    attack: Option<RawAttack>,
    sweep: Option<RawSweep>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    eta_a: S<f64>,
    eta_b: S<f64>,
    eta_l: S<f64>,
    dark_count: S<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGain {
    g: S<f64>,
    mu: S<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWcs {
    mu_prime: S<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawBlock {
    Probability(f64),
    Word(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    kind: S<String>,
    block: S<RawBlock>,
    guarantee_delivery: S<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    param: S<String>,
    start: S<f64>,
    stop: S<f64>,
    steps: S<i64>,
    spacing: S<String>,
    values: S<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    format: S<String>,
    path: S<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Values supplied on the command line; each replaces its file counterpart.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scheme: Option<String>,
    pub g: Option<f64>,
    pub mu: Option<f64>,
    pub mu_prime: Option<f64>,
    pub eta_a: Option<f64>,
    pub eta_b: Option<f64>,
    pub eta_l: Option<f64>,
    pub dark_count: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub truncation_order: Option<u32>,
    pub attack: Option<String>,
    pub block: Option<String>,
    pub guarantee_delivery: Option<bool>,
    pub sweep: Option<String>,
    pub format: Option<String>,
    pub output: Option<PathBuf>,
}

/// A value with its provenance, before validation.
#[derive(Debug, Clone)]
struct Src<T> {
    value: T,
    origin: Origin,
}

struct Resolver<'a> {
    path: String,
    text: &'a str,
    issues: Vec<ConfigIssue>,
}

impl Resolver<'_> {
    fn file<T: Clone>(&self, s: &S<T>) -> Option<Src<T>> {
        s.as_ref().map(|sp| Src {
            value: sp.get_ref().clone(),
            origin: Origin::File {
                path: self.path.clone(),
                line: line_of(self.text, sp.span().start),
            },
        })
    }

    /// Flag value if given, else file value.
    fn pick<T: Clone>(&self, flag: &Option<T>, flag_name: &str, s: &S<T>) -> Option<Src<T>> {
        match flag {
            Some(v) => Some(Src {
                value: v.clone(),
                origin: Origin::Flag {
                    flag: flag_name.to_string(),
                },
            }),
            None => self.file(s),
        }
    }

    fn issue(&mut self, field: &str, message: impl Into<String>, origins: Vec<Origin>) {
        self.issues.push(ConfigIssue {
            field: field.to_string(),
            message: message.into(),
            origins,
        });
    }

    fn unit(&mut self, field: &str, v: Option<Src<f64>>, default: f64) -> f64 {
        match v {
            None => default,
            Some(s) if (0.0..=1.0).contains(&s.value) => s.value,
            Some(s) => {
                self.issue(field, format!("{} is outside [0, 1]", s.value), vec![s.origin]);
                default
            }
        }
    }

    fn count(&mut self, field: &str, v: Option<Src<i64>>, min: i64, default: i64) -> i64 {
        match v {
            None => default,
            Some(s) if s.value >= min => s.value,
            Some(s) => {
                self.issue(field, format!("{} is below the minimum {min}", s.value), vec![s.origin]);
                default
            }
        }
    }
}

// ---- resolved config ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    G,
    Mu,
    MuPrime,
    EtaA,
    EtaB,
    EtaL,
    Block,
}

impl SweepParam {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "g" => SweepParam::G,
            "mu" => SweepParam::Mu,
            "mu_prime" => SweepParam::MuPrime,
            "eta_a" => SweepParam::EtaA,
            "eta_b" => SweepParam::EtaB,
            "eta_l" => SweepParam::EtaL,
            "block" => SweepParam::Block,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::G => "g",
            SweepParam::Mu => "mu",
            SweepParam::MuPrime => "mu_prime",
            SweepParam::EtaA => "eta_a",
            SweepParam::EtaB => "eta_b",
            SweepParam::EtaL => "eta_l",
            SweepParam::Block => "block",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    /// Sweep points in ascending order.
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// `steps` points from `start` to `stop` inclusive.
    pub fn range(param: SweepParam, start: f64, stop: f64, steps: u32, spacing: Spacing) -> Self {
        let n = steps.max(1);
        let mut values: Vec<f64> = (0..n)
            .map(|i| {
                if i == 0 {
                    return start;
                }
                if i == n - 1 {
                    return stop;
                }
                let t = i as f64 / (n - 1) as f64;
                match spacing {
                    Spacing::Linear => start + t * (stop - start),
                    Spacing::Log => start * (stop / start).powf(t),
                }
            })
            .collect();
        values.sort_by(f64::total_cmp);
        SweepAxis { param, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSpec {
    pub format: OutputFormat,
    /// Standard output when absent.
    pub path: Option<PathBuf>,
}

/// Fully validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    /// Per-crystal gain; present for `ep` and `pdc`.
    pub g: Option<f64>,
    /// Mean pair number implied by `g`.
    pub mu: Option<f64>,
    pub mu_prime: Option<f64>,
    pub channel: ChannelParams,
    pub trials: u64,
    pub seed: u64,
    /// Requested worker count; 0 means automatic. Results do not depend on
    /// it, so it is left out of the echoed configuration.
    #[serde(skip)]
    pub workers: usize,
    pub truncation_order: u32,
    pub attack: Option<PnsConfig>,
    pub sweep: Option<SweepAxis>,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    /// Parses the file at `path` (if any) and applies `flags` on top.
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self, ConfigError> {
        match path {
            None => Self::parse("", "<none>", flags),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                Self::parse(&text, &p.display().to_string(), flags)
            }
        }
    }

    /// Parses configuration text; `path` only labels diagnostics.
    pub fn parse(text: &str, path: &str, flags: &Overrides) -> Result<Self, ConfigError> {
        let raw: RawFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        let mut r = Resolver {
            path: path.to_string(),
            text,
            issues: Vec::new(),
        };

        let scheme = match r.pick(&flags.scheme, "scheme", &raw.scheme) {
            None => {
                r.issue("scheme", "required (ep, wcs or pdc)", vec![]);
                Scheme::EntangledPairs
            }
            Some(s) => Scheme::parse(&s.value).unwrap_or_else(|| {
                r.issue("scheme", format!("unknown scheme {:?}", s.value), vec![s.origin]);
                Scheme::EntangledPairs
            }),
        };

        let ch = raw.channel.unwrap_or_default();
        let eta_a = r.pick(&flags.eta_a, "eta-a", &ch.eta_a);
        let eta_b = r.pick(&flags.eta_b, "eta-b", &ch.eta_b);
        let eta_l = r.pick(&flags.eta_l, "eta-l", &ch.eta_l);
        let dark = r.pick(&flags.dark_count, "dark-count", &ch.dark_count);
        let need = |r: &mut Resolver, name: &str, v: Option<Src<f64>>| {
            if v.is_none() {
                r.issue(&format!("channel.{name}"), "required", vec![]);
            }
            let field = format!("channel.{name}");
            r.unit(&field, v, 0.0)
        };
        let channel = ChannelParams {
            eta_a: need(&mut r, "eta_a", eta_a),
            eta_b: need(&mut r, "eta_b", eta_b),
            eta_l: need(&mut r, "eta_l", eta_l),
            dark_count: r.unit("channel.dark_count", dark, 0.0),
        };

        let trials = match flags.trials {
            Some(t) => t,
            None => r.count("trials", r.file(&raw.trials), 0, DEFAULT_TRIALS as i64) as u64,
        };
        let seed = match flags.seed {
            Some(s) => s,
            None => r.count("seed", r.file(&raw.seed), 0, DEFAULT_SEED as i64) as u64,
        };
        let workers = match flags.workers {
            Some(w) => w,
            None => r.count("workers", r.file(&raw.workers), 0, 0) as usize,
        };
        let truncation_order = match flags.truncation_order {
            Some(t) if t >= 1 => t,
            Some(t) => {
                let origin = Origin::Flag {
                    flag: "truncation".into(),
                };
                r.issue("truncation_order", format!("{t} is below the minimum 1"), vec![origin]);
                DEFAULT_TRUNCATION as u32
            }
            None => r.count(
                "truncation_order",
                r.file(&raw.truncation_order),
                1,
                DEFAULT_TRUNCATION as i64,
            ) as u32,
        };
        if scheme == Scheme::EntangledPairs && truncation_order < 2 {
            r.issue(
                "truncation_order",
                "entangled pairs need at least order 2 (two-pair terms carry the errors)",
                vec![],
            );
        }

        let (mut g, mut mu, mut mu_prime) = (None, None, None);
        match scheme {
            Scheme::EntangledPairs | Scheme::TriggeredPdc => {
                let section = if scheme == Scheme::EntangledPairs {
                    raw.ep
                } else {
                    raw.pdc
                }
                .unwrap_or_default();
                let key = scheme.as_str();
                // a gain flag replaces both of the file's g and mu
                let (gs, ms) = if flags.g.is_some() || flags.mu.is_some() {
                    (r.pick(&flags.g, "g", &None), r.pick(&flags.mu, "mu", &None))
                } else {
                    (r.file(&section.g), r.file(&section.mu))
                };
                match (gs, ms) {
                    (Some(a), Some(b)) => r.issue(
                        &format!("{key}.g, {key}.mu"),
                        "g and mu are mutually exclusive",
                        vec![a.origin, b.origin],
                    ),
                    (None, None) => r.issue(&format!("{key}.g"), "one of g or mu is required", vec![]),
                    (Some(s), None) => match Gain::new(s.value) {
                        Ok(gain) => {
                            g = Some(gain.value());
                            mu = Some(gain.mean_pairs());
                        }
                        Err(e) => r.issue(&format!("{key}.g"), e.to_string(), vec![s.origin]),
                    },
                    (None, Some(s)) => match g_for_mean(s.value) {
                        Ok(v) => {
                            g = Some(v);
                            mu = Some(s.value);
                        }
                        Err(e) => r.issue(&format!("{key}.mu"), e.to_string(), vec![s.origin]),
                    },
                }
            }
            Scheme::WeakCoherent => {
                let section = raw.wcs.unwrap_or_default();
                match r.pick(&flags.mu_prime, "mu-prime", &section.mu_prime) {
                    None => r.issue("wcs.mu_prime", "required", vec![]),
                    Some(s) if s.value >= 0.0 && s.value.is_finite() => mu_prime = Some(s.value),
                    Some(s) => r.issue(
                        "wcs.mu_prime",
                        format!("{} must be finite and >= 0", s.value),
                        vec![s.origin],
                    ),
                }
            }
        }

        let attack = resolve_attack(&mut r, flags, raw.attack.unwrap_or_default());
        let sweep = resolve_sweep(&mut r, flags, raw.sweep);
        if let Some(axis) = &sweep {
            check_sweep_applies(&mut r, scheme, attack.is_some(), axis);
        }
        let out = raw.output.unwrap_or_default();
        let format = match r.pick(&flags.format, "format", &out.format) {
            None => OutputFormat::Csv,
            Some(s) => match s.value.as_str() {
                "csv" => OutputFormat::Csv,
                "json" => OutputFormat::Json,
                other => {
                    r.issue(
                        "output.format",
                        format!("unknown format {other:?} (csv or json)"),
                        vec![s.origin],
                    );
                    OutputFormat::Csv
                }
            },
        };
        let path = flags
            .output
            .clone()
            .or_else(|| out.path.map(|p| PathBuf::from(p.into_inner())));

        if !r.issues.is_empty() {
            return Err(ConfigError::Invalid(r.issues));
        }
        Ok(ExperimentConfig {
            scheme,
            g,
            mu,
            mu_prime,
            channel,
            trials,
            seed,
            workers,
            truncation_order,
            attack,
            sweep,
            output: OutputSpec { format, path },
        })
    }

    pub fn source(&self) -> Result<SourceParams, Error> {
        let gain = || Gain::new(self.g.unwrap_or(f64::NAN));
        let source = match self.scheme {
            Scheme::EntangledPairs => SourceParams::EntangledPairs {
                g: gain()?,
                truncation_order: self.truncation_order as usize,
            },
            Scheme::TriggeredPdc => SourceParams::TriggeredPdc {
                g: gain()?,
                truncation_order: self.truncation_order as usize,
            },
            Scheme::WeakCoherent => SourceParams::WeakCoherent {
                mu_prime: self.mu_prime.unwrap_or(f64::NAN),
            },
        };
        source.validate()?;
        Ok(source)
    }

    pub fn experiment(&self) -> Result<Experiment, Error> {
        let mut e = Experiment::new(self.source()?, self.channel, self.trials, self.seed).with_workers(self.workers);
        e.attack = self.attack;
        e.validate()?;
        Ok(e)
    }

    /// Copy of this configuration with one parameter replaced.
    pub fn at(&self, param: SweepParam, value: f64) -> Result<Self, Error> {
        let mut c = self.clone();
        match param {
            SweepParam::G => {
                c.g = Some(value);
                c.mu = Some(mean_pairs(value)?);
            }
            SweepParam::Mu => {
                c.g = Some(g_for_mean(value)?);
                c.mu = Some(value);
            }
            SweepParam::MuPrime => c.mu_prime = Some(value),
            SweepParam::EtaA => c.channel.eta_a = value,
            SweepParam::EtaB => c.channel.eta_b = value,
            SweepParam::EtaL => c.channel.eta_l = value,
            SweepParam::Block => {
                let a = c.attack.get_or_insert_with(PnsConfig::default);
                a.block = BlockPolicy::Fixed(value);
            }
        }
        c.experiment()?;
        Ok(c)
    }
}

fn resolve_attack(r: &mut Resolver, flags: &Overrides, raw: RawAttack) -> Option<PnsConfig> {
    let kind = r.pick(&flags.attack, "attack", &raw.kind);
    let enabled = match &kind {
        None => false,
        Some(s) if s.value == "none" => false,
        Some(s) if s.value == "pns" => true,
        Some(s) => {
            r.issue(
                "attack.kind",
                format!("unknown attack {:?} (none or pns)", s.value),
                vec![s.origin.clone()],
            );
            false
        }
    };
    let block = match &flags.block {
        Some(b) => Some(Src {
            value: b
                .parse::<f64>()
                .map_or(RawBlock::Word(b.clone()), RawBlock::Probability),
            origin: Origin::Flag { flag: "block".into() },
        }),
        None => r.file(&raw.block),
    };
    let policy = match block {
        None => BlockPolicy::AutoSolve,
        Some(Src {
            value: RawBlock::Word(w),
            ..
        }) if w == "auto" => BlockPolicy::AutoSolve,
        Some(Src {
            value: RawBlock::Probability(p),
            ..
        }) if (0.0..=1.0).contains(&p) => BlockPolicy::Fixed(p),
        Some(s) => {
            let shown = match s.value {
                RawBlock::Probability(p) => p.to_string(),
                RawBlock::Word(w) => format!("{w:?}"),
            };
            r.issue(
                "attack.block",
                format!("{shown} is neither \"auto\" nor a probability in [0, 1]"),
                vec![s.origin],
            );
            BlockPolicy::AutoSolve
        }
    };
    let guarantee = flags
        .guarantee_delivery
        .or(raw.guarantee_delivery.map(|s| s.into_inner()))
        .unwrap_or(true);
    enabled.then_some(PnsConfig {
        block: policy,
        guarantee_delivery: guarantee,
    })
}

/// Parses `param=start:stop:steps[:linear|log]` or `param=v1,v2,...`.
fn parse_sweep_flag(text: &str) -> Result<(String, SweepShape), String> {
    let (param, rest) = text
        .split_once('=')
        .ok_or_else(|| format!("{text:?}: expected param=start:stop:steps[:spacing] or param=v1,v2,..."))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("{s:?} is not a number"));
    if rest.contains(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("{rest:?}: expected start:stop:steps[:spacing]"));
        }
        let steps = parts[2]
            .trim()
            .parse::<i64>()
            .map_err(|_| format!("{:?} is not an integer step count", parts[2]))?;
        Ok((
            param.trim().to_string(),
            SweepShape::Range {
                start: num(parts[0])?,
                stop: num(parts[1])?,
                steps,
                spacing: parts.get(3).map(|s| s.trim().to_string()),
            },
        ))
    } else {
        let values = rest.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
        Ok((param.trim().to_string(), SweepShape::Values(values)))
    }
}

enum SweepShape {
    Range {
        start: f64,
        stop: f64,
        steps: i64,
        spacing: Option<String>,
    },
    Values(Vec<f64>),
}

fn resolve_sweep(r: &mut Resolver, flags: &Overrides, raw: Option<RawSweep>) -> Option<SweepAxis> {
    let (param, shape, origin) = if let Some(text) = &flags.sweep {
        let origin = Origin::Flag { flag: "sweep".into() };
        match parse_sweep_flag(text) {
            Ok((p, s)) => (p, s, origin),
            Err(msg) => {
                r.issue("sweep", msg, vec![origin]);
                return None;
            }
        }
    } else {
        let raw = raw?;
        let origin = r.file(&raw.param).map_or(Origin::Default, |s| s.origin);
        let Some(param) = raw.param.map(|p| p.into_inner()) else {
            r.issue("sweep.param", "required when [sweep] is present", vec![]);
            return None;
        };
        let shape = match raw.values {
            Some(v) => SweepShape::Values(v.into_inner()),
            None => {
                let mut missing = |name: &str, v: &S<f64>| {
                    if v.is_none() {
                        r.issue(&format!("sweep.{name}"), "required without sweep.values", vec![]);
                    }
                    v.as_ref().map_or(0.0, |s| *s.get_ref())
                };
                let start = missing("start", &raw.start);
                let stop = missing("stop", &raw.stop);
                let steps = r.file(&raw.steps);
                if steps.is_none() {
                    r.issue("sweep.steps", "required without sweep.values", vec![]);
                }
                SweepShape::Range {
                    start,
                    stop,
                    steps: steps.map_or(1, |s| s.value),
                    spacing: raw.spacing.map(|s| s.into_inner()),
                }
            }
        };
        (param, shape, origin)
    };
    let Some(p) = SweepParam::parse(&param) else {
        r.issue(
            "sweep.param",
            format!("unknown sweep parameter {param:?}"),
            vec![origin],
        );
        return None;
    };
    match shape {
        SweepShape::Values(mut values) => {
            if values.is_empty() {
                r.issue("sweep.values", "at least one value required", vec![origin]);
                return None;
            }
            values.sort_by(f64::total_cmp);
            Some(SweepAxis { param: p, values })
        }
        SweepShape::Range {
            start,
            stop,
            steps,
            spacing,
        } => {
            if steps < 1 {
                r.issue("sweep.steps", format!("{steps} must be >= 1"), vec![origin]);
                return None;
            }
            let spacing = match spacing.as_deref() {
                None | Some("linear") => Spacing::Linear,
                Some("log") => Spacing::Log,
                Some(other) => {
                    r.issue(
                        "sweep.spacing",
                        format!("unknown spacing {other:?} (linear or log)"),
                        vec![origin],
                    );
                    return None;
                }
            };
            if spacing == Spacing::Log && !(start > 0.0 && stop > 0.0) {
                r.issue("sweep.start", "log spacing needs positive start and stop", vec![origin]);
                return None;
            }
            Some(SweepAxis::range(p, start, stop, steps as u32, spacing))
        }
    }
}

fn check_sweep_applies(r: &mut Resolver, scheme: Scheme, attacked: bool, axis: &SweepAxis) {
    let ok = match axis.param {
        SweepParam::G | SweepParam::Mu => scheme != Scheme::WeakCoherent,
        SweepParam::MuPrime => scheme == Scheme::WeakCoherent,
        SweepParam::Block => attacked,
        _ => true,
    };
    if !ok {
        r.issue(
            "sweep.param",
            format!(
                "{} does not apply to scheme {scheme}{}",
                axis.param.as_str(),
                if attacked { "" } else { " without an attack" }
            ),
            vec![],
        );
    }
}
