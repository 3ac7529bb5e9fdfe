//! Batch front-end: `analytic`, `simulate`, `sweep` and `compare`.
//!
//! Failures exit non-zero and print a JSON error block to stderr:
//! `{"error": {"kind": .., "message": .., ...}}`.

pub mod config;
pub mod output;
pub mod sweep;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, ExperimentConfig, Overrides};
use sweep::{run_sweep, SweepRow};

#[derive(Debug, Parser)]
#[command(
    name = "pdc-qkd",
    version,
    about = "QKD simulator for multi-pair down-conversion sources"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed forms and exact oracle only (no Monte Carlo).
    Analytic(CommonArgs),
    /// Monte Carlo at a single point, ignoring any sweep axis.
    Simulate(CommonArgs),
    /// Every point of the configured sweep axis.
    Sweep(CommonArgs),
    /// Monte Carlo against the oracle with a z-score table and verdict.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Largest |z| accepted by the verdict.
        #[arg(long, default_value_t = 3.0)]
        sigma: f64,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// ep, wcs or pdc.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long = "mu-prime", allow_negative_numbers = true)]
    pub mu_prime: Option<f64>,
    #[arg(long = "eta-a", allow_negative_numbers = true)]
    pub eta_a: Option<f64>,
    #[arg(long = "eta-b", allow_negative_numbers = true)]
    pub eta_b: Option<f64>,
    #[arg(long = "eta-l", allow_negative_numbers = true)]
    pub eta_l: Option<f64>,
    #[arg(long = "dark-count", allow_negative_numbers = true)]
    pub dark_count: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 or absent uses PDC_QKD_WORKERS or all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, alias = "truncation-order")]
    pub truncation: Option<u32>,
    /// none or pns.
    #[arg(long)]
    pub attack: Option<String>,
    /// auto or a probability of blocking single-photon signals.
    #[arg(long)]
    pub block: Option<String>,
    #[arg(long = "guarantee-delivery")]
    pub guarantee_delivery: Option<bool>,
    /// param=start:stop:steps[:linear|log] or param=v1,v2,...
    #[arg(long)]
    pub sweep: Option<String>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            scheme: self.scheme.clone(),
            g: self.g,
            mu: self.mu,
            mu_prime: self.mu_prime,
            eta_a: self.eta_a,
            eta_b: self.eta_b,
            eta_l: self.eta_l,
            dark_count: self.dark_count,
            trials: self.trials,
            seed: self.seed,
            workers: self.workers,
            truncation_order: self.truncation,
            attack: self.attack.clone(),
            block: self.block.clone(),
            guarantee_delivery: self.guarantee_delivery,
            sweep: self.sweep.clone(),
            format: self.format.clone(),
            output: self.output.clone(),
        }
    }

    pub fn load(&self) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::load(self.config.as_deref(), &self.overrides())
    }
}

fn error_block(kind: &str, message: String, extra: serde_json::Value) -> String {
    let mut body = json!({ "kind": kind, "message": message });
    if let (Some(b), Some(e)) = (body.as_object_mut(), extra.as_object()) {
        b.extend(e.clone());
    }
    json!({ "error": body }).to_string()
}

fn config_failure(e: &ConfigError) -> String {
    let extra = match e {
        ConfigError::Invalid(issues) => json!({ "issues": issues }),
        ConfigError::Parse { path, line, .. } => json!({ "path": path, "line": line }),
        ConfigError::Io { path, .. } => json!({ "path": path }),
    };
    error_block("config", e.to_string(), extra)
}

/// A quantity with both a Monte Carlo estimate and an oracle value.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub point: Option<f64>,
    pub quantity: &'static str,
    pub mc: f64,
    pub se: f64,
    pub oracle: f64,
    pub z: f64,
}

pub fn comparisons(rows: &[SweepRow]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for r in rows {
        let cols = [
            ("r_key", r.r_key_mc, r.r_key_se, r.r_key_oracle, r.r_key_z),
            ("r_err", r.r_err_mc, r.r_err_se, r.r_err_oracle, r.r_err_z),
            ("epsilon", r.epsilon_mc, r.epsilon_se, r.epsilon_oracle, r.epsilon_z),
            (
                "double_click_matched",
                r.double_click_matched_mc,
                r.double_click_matched_se,
                r.double_click_matched_oracle,
                r.double_click_matched_z,
            ),
            (
                "double_click_mismatched",
                r.double_click_mismatched_mc,
                r.double_click_mismatched_se,
                r.double_click_mismatched_oracle,
                r.double_click_mismatched_z,
            ),
            (
                "bob_no_click",
                r.bob_no_click_mc,
                r.bob_no_click_se,
                r.bob_no_click_oracle,
                r.bob_no_click_z,
            ),
            (
                "eve_touched",
                r.eve_touched_mc,
                r.eve_touched_se,
                r.eve_touched_oracle,
                r.eve_touched_z,
            ),
            ("p_ae", r.p_ae_mc, r.p_ae_se, r.p_ae_oracle, r.p_ae_z),
            ("p_eb", r.p_eb_mc, r.p_eb_se, r.p_eb_oracle, r.p_eb_z),
        ];
        for (quantity, mc, se, oracle, z) in cols {
            if let (Some(mc), Some(se), Some(oracle), Some(z)) = (mc, se, oracle, z) {
                out.push(Comparison {
                    point: r.sweep_value,
                    quantity,
                    mc,
                    se,
                    oracle,
                    z,
                });
            }
        }
    }
    out
}

fn compare_table(rows: &[SweepRow], sigma: f64) -> (String, bool) {
    let mut s = format!(
        "{:>12} {:<24} {:>14} {:>11} {:>14} {:>8}  verdict\n",
        "point", "quantity", "mc", "se", "oracle", "z"
    );
    let mut all = true;
    for c in comparisons(rows) {
        let ok = c.z.abs() <= sigma;
        all &= ok;
        let point = c.point.map_or("-".to_string(), |v| format!("{v:.6}"));
        s.push_str(&format!(
            "{point:>12} {:<24} {:>14.6e} {:>11.3e} {:>14.6e} {:>8.3}  {}\n",
            c.quantity,
            c.mc,
            c.se,
            c.oracle,
            c.z,
            if ok { "pass" } else { "FAIL" }
        ));
    }
    s.push_str(&format!(
        "overall: {} at {sigma} sigma\n",
        if all { "PASS" } else { "FAIL" }
    ));
    (s, all)
}

/// Runs the command line and returns the process exit code. Exit 0 means
/// every requested point completed; a failing `compare` verdict is reported
/// in the table, not the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                eprintln!("{}", error_block("usage", e.to_string().trim().to_string(), json!({})));
            }
            return code;
        }
    };
    let (common, mode) = match &cli.command {
        Command::Analytic(c) => (c, Mode::Analytic),
        Command::Simulate(c) => (c, Mode::Simulate),
        Command::Sweep(c) => (c, Mode::Sweep),
        Command::Compare { common, sigma } => (common, Mode::Compare(*sigma)),
    };
    let mut config = match common.load() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", config_failure(&e));
            return 2;
        }
    };
    match mode {
        Mode::Analytic => config.trials = 0,
        Mode::Simulate => config.sweep = None,
        Mode::Sweep if config.sweep.is_none() => {
            let e = ConfigError::Invalid(vec![config::ConfigIssue {
                field: "sweep".into(),
                message: "the sweep subcommand needs a [sweep] section or --sweep".into(),
                origins: vec![],
            }]);
            eprintln!("{}", config_failure(&e));
            return 2;
        }
        _ => {}
    }
    let rows = match run_sweep(&config) {
        Ok(r) => r,
        Err(e) => {
            let extra = json!({ "point": { "param": e.param, "value": e.value } });
            eprintln!("{}", error_block("point", e.to_string(), extra));
            return 1;
        }
    };
    if let Mode::Compare(sigma) = mode {
        let (table, _) = compare_table(&rows, sigma);
        let _ = std::io::stdout().write_all(table.as_bytes());
        if config.output.path.is_none() {
            return 0;
        }
    }
    match output::emit(&config, &rows, config.output.format, config.output.path.as_deref()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_block("io", e.to_string(), json!({})));
            1
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    Analytic,
    Simulate,
    Sweep,
    Compare(f64),
}
