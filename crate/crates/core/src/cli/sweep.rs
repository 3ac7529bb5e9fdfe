//! One row per parameter point: closed forms and oracle always, Monte Carlo
//! when trials > 0, and z-scores between the two.

use serde::{Deserialize, Serialize};

use crate::analytics::{analytic_report, oracle_for};
use crate::cli::config::{ExperimentConfig, SweepParam};
use crate::eavesdropper::BlockPolicy;
use crate::error::Error;
use crate::protocol_engine::{run_experiment, RateReport};
use crate::stats::Estimate;

/// Flattened analytic and Monte Carlo results for one point. Absent values
/// (not applicable, or Monte Carlo skipped) are `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub r_key_mc: Option<f64>,
    pub r_key_se: Option<f64>,
    pub r_key_oracle: Option<f64>,
    pub r_key_z: Option<f64>,
    pub r_err_mc: Option<f64>,
    pub r_err_se: Option<f64>,
    pub r_err_oracle: Option<f64>,
    pub r_err_z: Option<f64>,
    pub epsilon_mc: Option<f64>,
    pub epsilon_se: Option<f64>,
    pub epsilon_oracle: Option<f64>,
    pub epsilon_z: Option<f64>,
    pub double_click_matched_mc: Option<f64>,
    pub double_click_matched_se: Option<f64>,
    pub double_click_matched_oracle: Option<f64>,
    pub double_click_matched_z: Option<f64>,
    pub double_click_mismatched_mc: Option<f64>,
    pub double_click_mismatched_se: Option<f64>,
    pub double_click_mismatched_oracle: Option<f64>,
    pub double_click_mismatched_z: Option<f64>,
    pub bob_no_click_mc: Option<f64>,
    pub bob_no_click_se: Option<f64>,
    pub bob_no_click_oracle: Option<f64>,
    pub bob_no_click_z: Option<f64>,
    /// Fraction of sifted bits from signals Eve split.
    pub eve_touched_mc: Option<f64>,
    pub eve_touched_se: Option<f64>,
    pub eve_touched_oracle: Option<f64>,
    pub eve_touched_z: Option<f64>,
    pub p_ae_mc: Option<f64>,
    pub p_ae_se: Option<f64>,
    pub p_ae_oracle: Option<f64>,
    pub p_ae_z: Option<f64>,
    pub p_eb_mc: Option<f64>,
    pub p_eb_se: Option<f64>,
    pub p_eb_oracle: Option<f64>,
    pub p_eb_z: Option<f64>,
    pub i_ae_mc: Option<f64>,
    pub i_ae_oracle: Option<f64>,
    pub i_eb_mc: Option<f64>,
    pub i_eb_oracle: Option<f64>,
    pub block_probability: Option<f64>,
    pub attack_saturated: Option<bool>,
    pub truncation_exceeded_count: Option<u64>,
    // closed forms, unattacked
    pub r_key_formula: Option<f64>,
    pub r_err_formula: Option<f64>,
    pub epsilon_formula: Option<f64>,
    pub epsilon_leading: Option<f64>,
    pub r_key_deviation: Option<f64>,
    pub epsilon_deviation: Option<f64>,
    pub r_exp: Option<f64>,
    pub r_multi: Option<f64>,
    pub i_e: Option<f64>,
    pub i_e_leading: Option<f64>,
    pub leakage_saturated: Option<bool>,
    // closed forms for the entangled-pair splitting attack
    pub pns_p_ae: Option<f64>,
    pub pns_p_eb: Option<f64>,
    pub pns_i_ae: Option<f64>,
    pub pns_i_eb: Option<f64>,
    pub pns_epsilon_prime: Option<f64>,
    pub pns_epsilon_prime_leading: Option<f64>,
    pub pns_i_ab: Option<f64>,
    pub pns_saturated: Option<bool>,
    // the point itself
    pub scheme: String,
    pub g: Option<f64>,
    pub mu: Option<f64>,
    pub mu_prime: Option<f64>,
    pub eta_a: f64,
    pub eta_b: f64,
    pub eta_l: f64,
    pub dark_count: f64,
    pub truncation_order: u32,
    /// `none` or `pns`.
    pub attack: String,
    /// `auto` or the fixed probability, when attacked.
    pub block_policy: Option<String>,
    pub guarantee_delivery: Option<bool>,
    pub trials: u64,
    pub seed: u64,
}

/// A sweep point that could not be evaluated.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("point {param} = {value}: {error}")]
pub struct PointError {
    pub param: String,
    pub value: f64,
    pub error: Error,
}

type Columns = (Option<f64>, Option<f64>, Option<f64>, Option<f64>);

fn columns(mc: Option<Estimate>, oracle: Option<f64>) -> Columns {
    let z = match (mc, oracle) {
        (Some(e), Some(o)) => e.z_score(o),
        _ => None,
    };
    (mc.map(|e| e.value), mc.map(|e| e.se), oracle, z)
}

/// Evaluates one configuration (already set to the point's value).
pub fn evaluate(config: &ExperimentConfig, sweep: Option<(SweepParam, f64)>) -> Result<SweepRow, Error> {
    let experiment = config.experiment()?;
    let report = analytic_report(&experiment.source, &config.channel)?;
    let attack = experiment.resolve_attack()?;
    let oracle = match &attack {
        None => report.oracle,
        Some(a) => oracle_for(
            &experiment.source,
            &config.channel,
            Some(&a.attack_model(&config.channel)),
        )?,
    };
    let mc: Option<RateReport> = (config.trials > 0).then(|| run_experiment(&experiment)).transpose()?;
    let est = |f: fn(&RateReport) -> Option<Estimate>| mc.as_ref().and_then(f);
    let eve = mc.as_ref().and_then(|r| r.eve);
    let attacked = attack.is_some();

    let mut row = SweepRow {
        sweep_param: sweep.map_or("none", |(p, _)| p.as_str()).to_string(),
        sweep_value: sweep.map(|(_, v)| v),
        scheme: config.scheme.to_string(),
        g: config.g,
        mu: config.mu,
        mu_prime: config.mu_prime,
        eta_a: config.channel.eta_a,
        eta_b: config.channel.eta_b,
        eta_l: config.channel.eta_l,
        dark_count: config.channel.dark_count,
        truncation_order: config.truncation_order,
        attack: if config.attack.is_some() { "pns" } else { "none" }.to_string(),
        block_policy: config.attack.map(|a| match a.block {
            BlockPolicy::AutoSolve => "auto".to_string(),
            BlockPolicy::Fixed(p) => format!("{p:.16e}"),
        }),
        guarantee_delivery: config.attack.map(|a| a.guarantee_delivery),
        trials: config.trials,
        seed: config.seed,
        block_probability: attack.map(|a| a.block_probability),
        attack_saturated: attack.map(|a| a.saturated),
        truncation_exceeded_count: mc.as_ref().map(|r| r.truncation_exceeded_count),
        r_key_deviation: report.r_key_deviation,
        epsilon_deviation: report.epsilon_deviation,
        ..Default::default()
    };
    (row.r_key_mc, row.r_key_se, row.r_key_oracle, row.r_key_z) = columns(est(|r| r.r_key), Some(oracle.r_key));
    (row.r_err_mc, row.r_err_se, row.r_err_oracle, row.r_err_z) = columns(est(|r| r.r_err), Some(oracle.r_err));
    (row.epsilon_mc, row.epsilon_se, row.epsilon_oracle, row.epsilon_z) = columns(est(|r| r.epsilon), oracle.epsilon);
    (
        row.double_click_matched_mc,
        row.double_click_matched_se,
        row.double_click_matched_oracle,
        row.double_click_matched_z,
    ) = columns(est(|r| r.double_click_matched), Some(oracle.double_click_matched));
    (
        row.double_click_mismatched_mc,
        row.double_click_mismatched_se,
        row.double_click_mismatched_oracle,
        row.double_click_mismatched_z,
    ) = columns(est(|r| r.double_click_mismatched), Some(oracle.double_click_mismatched));
    (
        row.bob_no_click_mc,
        row.bob_no_click_se,
        row.bob_no_click_oracle,
        row.bob_no_click_z,
    ) = columns(est(|r| r.bob_no_click_rate), Some(oracle.bob_no_click));
    if attacked {
        (
            row.eve_touched_mc,
            row.eve_touched_se,
            row.eve_touched_oracle,
            row.eve_touched_z,
        ) = columns(eve.as_ref().map(|e| e.touched_fraction), oracle.eve_fraction());
        (row.p_ae_mc, row.p_ae_se, row.p_ae_oracle, row.p_ae_z) =
            columns(eve.as_ref().and_then(|e| e.p_ae), oracle.p_ae());
        (row.p_eb_mc, row.p_eb_se, row.p_eb_oracle, row.p_eb_z) =
            columns(eve.as_ref().and_then(|e| e.p_eb), oracle.p_eb());
        row.i_ae_mc = eve.as_ref().map(|e| e.i_ae);
        row.i_eb_mc = eve.as_ref().map(|e| e.i_eb);
        row.i_ae_oracle = oracle.i_ae();
        row.i_eb_oracle = oracle.i_eb();
    }
    if let Some(ep) = report.ep {
        row.r_key_formula = Some(ep.r_key);
        row.r_err_formula = Some(ep.r_err);
        row.epsilon_formula = Some(ep.epsilon);
        row.epsilon_leading = Some(ep.epsilon_leading);
    }
    if let Some(l) = report.leakage {
        row.r_exp = Some(l.r_exp);
        row.r_multi = Some(l.r_multi);
        row.i_e = l.i_e;
        row.i_e_leading = l.i_e_leading;
        row.leakage_saturated = Some(l.saturated);
    }
    if let Some(q) = report.ep_pns {
        row.r_exp = Some(q.r_exp);
        row.pns_p_ae = Some(q.p_ae);
        row.pns_p_eb = Some(q.p_eb);
        row.pns_i_ae = Some(q.i_ae);
        row.pns_i_eb = Some(q.i_eb);
        row.pns_epsilon_prime = Some(q.epsilon_prime);
        row.pns_epsilon_prime_leading = Some(q.epsilon_prime_leading);
        row.pns_i_ab = Some(q.i_ab);
        row.pns_saturated = Some(q.saturated);
    }
    Ok(row)
}

/// Every sweep point in ascending order, or the base point alone when no
/// axis is configured. The first failing point aborts the sweep.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>, PointError> {
    let Some(axis) = &config.sweep else {
        return evaluate(config, None).map(|r| vec![r]).map_err(|error| PointError {
            param: "none".into(),
            value: f64::NAN,
            error,
        });
    };
    axis.values
        .iter()
        .map(|&v| {
            let fail = |error| PointError {
                param: axis.param.as_str().into(),
                value: v,
                error,
            };
            let point = config.at(axis.param, v).map_err(fail)?;
            evaluate(&point, Some((axis.param, v))).map_err(fail)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::Overrides;

    fn config(extra: &str) -> ExperimentConfig {
        let text =
            format!("scheme = \"ep\"\n{extra}\n[channel]\neta_a = 0.5\neta_b = 0.5\neta_l = 0.1\n[ep]\ng = 0.1\n");
        ExperimentConfig::parse(&text, "t", &Overrides::default()).unwrap()
    }

    #[test]
    fn analytic_only_has_no_mc_columns() {
        let c = config("trials = 0");
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert!(r.r_key_mc.is_none() && r.r_key_z.is_none() && r.truncation_exceeded_count.is_none());
        assert!(r.r_key_oracle.is_some() && r.epsilon_formula.is_some());
    }

    #[test]
    fn epsilon_linear_in_mu() {
        let mut c = config("trials = 0");
        c.sweep = Some(crate::cli::config::SweepAxis {
            param: SweepParam::Mu,
            values: vec![0.005, 0.01, 0.02],
        });
        let rows = run_sweep(&c).unwrap();
        let k: Vec<f64> = rows
            .iter()
            .map(|r| r.epsilon_oracle.unwrap() / r.sweep_value.unwrap())
            .collect();
        assert!(k.iter().all(|&x| (x / k[0] - 1.0).abs() < 0.05), "{k:?}");
    }

    #[test]
    fn failing_point_is_named() {
        let mut c = config("trials = 0");
        c.sweep = Some(crate::cli::config::SweepAxis {
            param: SweepParam::EtaA,
            values: vec![0.5, 1.5],
        });
        let e = run_sweep(&c).unwrap_err();
        assert_eq!(e.value, 1.5);
        assert_eq!(e.param, "eta_a");
    }

    #[test]
    fn mc_columns_present_with_trials() {
        let r = &run_sweep(&config("trials = 20000")).unwrap()[0];
        assert!(r.r_key_mc.is_some() && r.r_key_z.is_some());
        assert!(r.p_ae_mc.is_none());
    }
}
