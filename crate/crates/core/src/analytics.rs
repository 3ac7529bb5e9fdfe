//! Closed-form rate and leakage formulas, and exact enumeration oracles.
//!
//! The `*_approx` evaluators reproduce the printed leading-order expressions.
//! The oracles enumerate every emission, click pattern and eavesdropper
//! branch with its exact weight; they are the reference for Monte Carlo.
//! All rates are normalized per emitted source event and include the factor
//! 1/2 for coinciding analyzer bases.

use serde::{Deserialize, Serialize};

use crate::detection::{ChannelParams, Detector};
use crate::error::{check_unit, Error, Result};
use crate::fock_measurement::{joint_count_distribution, pair_sector_state, Basis, JointCountDistribution};
use crate::source_model::{Gain, SourceParams};

/// `f(p) = 1 + p log2 p + (1 - p) log2 (1 - p)`, with `0 log 0 = 0`.
pub fn binary_information(p: f64) -> Result<f64> {
    check_unit("p", p)?;
    Ok(info(p))
}

pub(crate) fn info(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { q * q.log2() } else { 0.0 };
    1.0 + term(p) + term(1.0 - p)
}

/// Eavesdropper information over groups of `(fraction of bits, hit probability)`.
pub fn grouped_information(groups: &[(f64, f64)]) -> Result<f64> {
    let mut sum = 0.0;
    let mut total = 0.0;
    for &(r, p) in groups {
        if r.is_nan() || r < 0.0 {
            return Err(Error::OutOfRange {
                name: "r",
                value: r,
                expected: "r >= 0",
            });
        }
        sum += r * binary_information(p)?;
        total += r;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightSum { sum: total });
    }
    Ok(sum)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Leading-order entangled-pair rates as printed (prefactor `xi^2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpRatesApprox {
    pub r_key: f64,
    pub r_err: f64,
    /// Error rate in its ratio form.
    pub epsilon: f64,
    /// `(1 - eta_A)(1 - eta_B eta_L) mu / 2`.
    pub epsilon_leading: f64,
}

pub fn ep_rates_approx(g: Gain, eta_a: f64, eta_bl: f64) -> Result<EpRatesApprox> {
    check_unit("eta_a", eta_a)?;
    check_unit("eta_b * eta_l", eta_bl)?;
    let x = g.squared();
    let xi2 = g.xi_squared();
    let (a, b) = (eta_a, eta_bl);
    let r_key = xi2
        * x
        * (a * b + x * (1.0 - (1.0 - a).powi(2)) * (1.0 - (1.0 - b).powi(2)) + 2.0 * x * a * (1.0 - a) * b * (1.0 - b));
    let r_err = xi2 * x * x * a * (1.0 - a) * b * (1.0 - b);
    let epsilon = x * (1.0 - a - b + a * b) / (1.0 + x * (6.0 - 4.0 * a - 4.0 * b + 3.0 * a * b));
    let epsilon_leading = (1.0 - a) * (1.0 - b) / 2.0 * g.mean_pairs();
    Ok(EpRatesApprox {
        r_key,
        r_err,
        epsilon,
        epsilon_leading,
    })
}

/// Photon-number-splitting interposer as seen by the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    /// Probability of suppressing a single-photon signal.
    pub block_probability: f64,
    /// Detection probability per photon Eve forwards (1 when she controls
    /// Bob's detector).
    pub forwarded_efficiency: f64,
}

/// Exact expected values of every Monte Carlo statistic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleRates {
    pub r_key: f64,
    pub r_err: f64,
    pub epsilon: Option<f64>,
    /// Bob double clicks with coinciding bases, per emission.
    pub double_click_matched: f64,
    /// Bob double clicks with differing bases, per emission.
    pub double_click_mismatched: f64,
    pub bob_no_click: f64,
    /// Sifted bits carrying a photon stored by Eve, per emission.
    pub eve_touched: f64,
    pub eve_hit_alice: f64,
    pub eve_hit_bob: f64,
    /// Emission mass beyond the truncation order.
    pub truncated: f64,
}

impl OracleRates {
    fn finish(mut self) -> Self {
        self.epsilon = ratio(self.r_err, self.r_key);
        self
    }

    pub fn eve_fraction(&self) -> Option<f64> {
        ratio(self.eve_touched, self.r_key)
    }

    pub fn p_ae(&self) -> Option<f64> {
        ratio(self.eve_hit_alice, self.eve_touched)
    }

    pub fn p_eb(&self) -> Option<f64> {
        ratio(self.eve_hit_bob, self.eve_touched)
    }

    pub fn i_ae(&self) -> Option<f64> {
        Some(self.eve_fraction()? * info(self.p_ae()?))
    }

    pub fn i_eb(&self) -> Option<f64> {
        Some(self.eve_fraction()? * info(self.p_eb()?))
    }
}

/// One way Bob's arm content can reach his detectors.
struct Branch {
    prob: f64,
    counts: (u32, u32),
    detector: Detector,
    stored: Option<u8>,
}

fn bob_branches(b0: u32, b1: u32, bob: Detector, attack: Option<&AttackModel>) -> Vec<Branch> {
    let Some(atk) = attack else {
        return vec![Branch {
            prob: 1.0,
            counts: (b0, b1),
            detector: bob,
            stored: None,
        }];
    };
    let fwd = Detector {
        efficiency: atk.forwarded_efficiency,
        dark_count: bob.dark_count,
    };
    let t = b0 + b1;
    match t {
        0 => vec![Branch {
            prob: 1.0,
            counts: (0, 0),
            detector: bob,
            stored: None,
        }],
        1 => vec![
            Branch {
                prob: atk.block_probability,
                counts: (0, 0),
                detector: bob,
                stored: None,
            },
            Branch {
                prob: 1.0 - atk.block_probability,
                counts: (b0, b1),
                detector: fwd,
                stored: None,
            },
        ],
        _ => {
            let mut out = Vec::with_capacity(2);
            if b0 > 0 {
                out.push(Branch {
                    prob: b0 as f64 / t as f64,
                    counts: (b0 - 1, b1),
                    detector: fwd,
                    stored: Some(0),
                });
            }
            if b1 > 0 {
                out.push(Branch {
                    prob: b1 as f64 / t as f64,
                    counts: (b0, b1 - 1),
                    detector: fwd,
                    stored: Some(1),
                });
            }
            out
        }
    }
}

/// Inputs of the entangled-pair oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpOracleParams {
    pub gain: Gain,
    pub channel: ChannelParams,
    pub truncation: u32,
    pub attack: Option<AttackModel>,
}

impl EpOracleParams {
    /// Noiseless channel with Alice efficiency `eta_a` and Bob's combined
    /// transmittance `eta_bl`.
    pub fn new(gain: Gain, eta_a: f64, eta_bl: f64, truncation: u32) -> Result<Self> {
        Ok(EpOracleParams {
            gain,
            channel: ChannelParams::new(eta_a, eta_bl, 1.0)?,
            truncation,
            attack: None,
        })
    }

    pub fn with_attack(mut self, attack: AttackModel) -> Self {
        self.attack = Some(attack);
        self
    }
}

/// Mismatched-basis count tables, indexed `[combo][sector]` where combo 0
/// is Alice `+` / Bob `x` and combo 1 the reverse.
pub(crate) fn mismatched_tables(truncation: u32) -> [Vec<JointCountDistribution>; 2] {
    let combos = [(Basis::Plus, Basis::Cross), (Basis::Cross, Basis::Plus)];
    combos.map(|(ba, bb)| {
        (0..=truncation)
            .map(|t| joint_count_distribution(&pair_sector_state(t), ba, bb))
            .collect()
    })
}

/// Exact entangled-pair statistics with no leading-order drops.
pub fn exact_rates_oracle(params: &EpOracleParams) -> Result<OracleRates> {
    params.channel.validate()?;
    if params.truncation < 2 {
        return Err(Error::Truncation {
            min: 2,
            got: params.truncation as usize,
        });
    }
    ep_oracle(params)
}

fn ep_oracle(params: &EpOracleParams) -> Result<OracleRates> {
    params.channel.validate()?;
    let x = params.gain.squared();
    let xi4 = params.gain.xi_squared().powi(2);
    let alice = params.channel.alice_detector();
    let bob = params.channel.bob_detector();
    let attack = params.attack.as_ref();
    let mut r = OracleRates::default();
    let mut retained = 0.0;

    // Coinciding bases: each side holds m photons in mode0 and n in mode1.
    for t in 0..=params.truncation {
        let weight = xi4 * x.powi(t as i32);
        for m in 0..=t {
            let n = t - m;
            retained += weight;
            let w = 0.5 * weight;
            let pa = alice.outcome_probabilities(m, n);
            for br in bob_branches(m, n, bob, attack) {
                let pb = br.detector.outcome_probabilities(br.counts.0, br.counts.1);
                let wb = w * br.prob;
                r.double_click_matched += wb * pb[3];
                r.bob_no_click += wb * pb[0];
                for alice_bit in 0..2u8 {
                    for bob_bit in 0..2u8 {
                        let mass = wb * pa[1 + alice_bit as usize] * pb[1 + bob_bit as usize];
                        r.r_key += mass;
                        if alice_bit != bob_bit {
                            r.r_err += mass;
                        }
                        if let Some(s) = br.stored {
                            r.eve_touched += mass;
                            if s == alice_bit {
                                r.eve_hit_alice += mass;
                            }
                            if s == bob_bit {
                                r.eve_hit_bob += mass;
                            }
                        }
                    }
                }
            }
        }
    }

    // Differing bases: exact sector-wise Fock statistics.
    for tables in mismatched_tables(params.truncation) {
        for (t, table) in tables.iter().enumerate() {
            let w = 0.25 * (t as f64 + 1.0) * xi4 * x.powi(t as i32);
            if w == 0.0 {
                continue;
            }
            for (occ, q) in &table.entries {
                for br in bob_branches(occ[2], occ[3], bob, attack) {
                    let pb = br.detector.outcome_probabilities(br.counts.0, br.counts.1);
                    r.double_click_mismatched += w * q * br.prob * pb[3];
                    r.bob_no_click += w * q * br.prob * pb[0];
                }
            }
        }
    }
    r.truncated = 1.0 - retained;
    Ok(r.finish())
}

/// Prepare-and-measure schemes: photon number `n` with emission weight and
/// the probability that Alice accepts the round (trigger click for PDC).
fn prepare_measure_oracle(
    weights: impl Iterator<Item = (u32, f64, f64)>,
    bob: Detector,
    attack: Option<&AttackModel>,
) -> OracleRates {
    let mut r = OracleRates::default();
    let mut retained = 0.0;
    for (n, w, herald) in weights {
        retained += w;
        r.bob_no_click += w * (1.0 - herald);
        let h = w * herald;
        if h == 0.0 {
            continue;
        }
        // Alice's bit is mode0 without loss of generality.
        for br in bob_branches(n, 0, bob, attack) {
            let k = br.counts.0;
            let matched = br.detector.outcome_probabilities(k, 0);
            let wb = 0.5 * h * br.prob;
            r.r_key += wb * (matched[1] + matched[2]);
            r.r_err += wb * matched[2];
            r.double_click_matched += wb * matched[3];
            r.bob_no_click += wb * matched[0];
            if br.stored.is_some() {
                r.eve_touched += wb * (matched[1] + matched[2]);
                r.eve_hit_alice += wb * (matched[1] + matched[2]);
                r.eve_hit_bob += wb * matched[1];
            }
            // conjugate analyzer splits the k photons binomially
            let norm = 0.5f64.powi(k as i32);
            let mut binom = 1.0;
            for j in 0..=k {
                let pb = br.detector.outcome_probabilities(j, k - j);
                r.double_click_mismatched += wb * binom * norm * pb[3];
                r.bob_no_click += wb * binom * norm * pb[0];
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
    }
    r.truncated = (1.0 - retained).max(0.0);
    r.finish()
}

fn poisson_weights(mu: f64) -> impl Iterator<Item = (u32, f64)> {
    let nmax = (mu + 12.0 * mu.sqrt() + 40.0).ceil() as u32;
    let mut p = (-mu).exp();
    (0..=nmax).map(move |n| {
        if n > 0 {
            p *= mu / n as f64;
        }
        (n, p)
    })
}

/// Exact weak-coherent-pulse statistics.
pub fn wcs_oracle(mu_prime: f64, channel: &ChannelParams, attack: Option<&AttackModel>) -> Result<OracleRates> {
    channel.validate()?;
    check_mu(mu_prime)?;
    Ok(prepare_measure_oracle(
        poisson_weights(mu_prime).map(|(n, w)| (n, w, 1.0)),
        channel.bob_detector(),
        attack,
    ))
}

/// Largest photon number summed for an untruncated single-crystal source.
fn pdc_nmax(x: f64) -> u32 {
    if x <= 0.0 {
        return 0;
    }
    // x^n / (1 - x) below 1e-17
    let n = ((1e-17 * (1.0 - x)).ln() / x.ln()).ceil();
    n.clamp(1.0, 1e6) as u32
}

/// Exact triggered-PDC statistics; `truncation = None` sums the full series.
pub fn pdc_oracle(
    gain: Gain,
    channel: &ChannelParams,
    truncation: Option<u32>,
    attack: Option<&AttackModel>,
) -> Result<OracleRates> {
    channel.validate()?;
    let x = gain.squared();
    let xi2 = gain.xi_squared();
    let nmax = truncation.unwrap_or_else(|| pdc_nmax(x));
    let trigger = channel.alice_detector();
    let weights = (0..=nmax).map(move |n| (n, xi2 * x.powi(n as i32), trigger.fire_probability(n)));
    Ok(prepare_measure_oracle(weights, channel.bob_detector(), attack))
}

/// Exact expectation of the simulator's statistics for `source`, at the
/// same truncation the simulator samples with.
pub fn oracle_for(source: &SourceParams, channel: &ChannelParams, attack: Option<&AttackModel>) -> Result<OracleRates> {
    source.validate()?;
    match *source {
        SourceParams::EntangledPairs { g, truncation_order } => ep_oracle(&EpOracleParams {
            gain: g,
            channel: *channel,
            truncation: truncation_order as u32,
            attack: attack.copied(),
        }),
        SourceParams::WeakCoherent { mu_prime } => wcs_oracle(mu_prime, channel, attack),
        SourceParams::TriggeredPdc { g, truncation_order } => {
            pdc_oracle(g, channel, Some(truncation_order as u32), attack)
        }
    }
}

fn check_mu(mu_prime: f64) -> Result<f64> {
    if mu_prime >= 0.0 && mu_prime.is_finite() {
        Ok(mu_prime)
    } else {
        Err(Error::OutOfRange {
            name: "mu_prime",
            value: mu_prime,
            expected: "finite mu_prime >= 0",
        })
    }
}

/// Sifted rate, multi-photon rate and leakage of a prepare-and-measure scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leakage {
    pub r_exp: f64,
    pub r_multi: f64,
    /// `None` when `r_exp` is zero.
    pub i_e: Option<f64>,
    pub i_e_leading: Option<f64>,
    /// Eve cannot match `r_exp` without also forwarding single photons
    /// only when `r_exp > r_multi`; otherwise she learns everything.
    pub saturated: bool,
}

fn leakage(r_exp: f64, r_multi: f64, leading: Option<f64>) -> Leakage {
    let saturated = r_exp <= r_multi;
    let i_e = if r_exp <= 0.0 {
        None
    } else if saturated {
        Some(1.0)
    } else {
        Some(r_multi / r_exp)
    };
    Leakage {
        r_exp,
        r_multi,
        i_e,
        i_e_leading: leading,
        saturated,
    }
}

/// Weak-coherent-pulse sifted rate, multi-photon rate and leakage.
pub fn wcs_leakage(mu_prime: f64, eta_bl: f64) -> Result<Leakage> {
    check_mu(mu_prime)?;
    check_unit("eta_b * eta_l", eta_bl)?;
    let r_exp = -0.5 * (-eta_bl * mu_prime).exp_m1();
    let r_multi = 0.5 * (-(-mu_prime).exp_m1() - mu_prime * (-mu_prime).exp());
    let leading = ratio(mu_prime, 2.0 * eta_bl);
    Ok(leakage(r_exp, r_multi, leading))
}

/// Triggered-PDC rates from a geometric-series closed form, cross-checked
/// by direct summation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdcLeakage {
    pub leakage: Leakage,
    pub r_exp_series: f64,
    pub r_multi_series: f64,
}

pub fn pdc_leakage(gain: Gain, eta_a: f64, eta_bl: f64) -> Result<PdcLeakage> {
    check_unit("eta_a", eta_a)?;
    check_unit("eta_b * eta_l", eta_bl)?;
    let x = gain.squared();
    let xi2 = gain.xi_squared();
    let a = 1.0 - eta_a;
    let b = 1.0 - eta_bl;
    let geo = |r: f64| 1.0 / (1.0 - r);
    // sum x^n (1 - a^n)(1 - b^n) = sum x^n - (ax)^n - (bx)^n + (abx)^n
    let r_exp = 0.5 * xi2 * (geo(x) - geo(a * x) - geo(b * x) + geo(a * b * x));
    // sum_{n>=2} x^n (1 - a^n)
    let r_multi = 0.5 * xi2 * (x * x * geo(x) - a * a * x * x * geo(a * x));

    let nmax = pdc_nmax(x);
    let (mut s_exp, mut s_multi) = (0.0, 0.0);
    for n in 0..=nmax as i32 {
        let w = x.powi(n);
        s_exp += w * (1.0 - a.powi(n)) * (1.0 - b.powi(n));
        if n >= 2 {
            s_multi += w * (1.0 - a.powi(n));
        }
    }
    let leading = ratio((2.0 - eta_a) * gain.mean_pairs_single(), eta_bl);
    Ok(PdcLeakage {
        leakage: leakage(r_exp.max(0.0), r_multi.max(0.0), leading),
        r_exp_series: 0.5 * xi2 * s_exp,
        r_multi_series: 0.5 * xi2 * s_multi,
    })
}

/// Entangled-pair quantities under the photon-number-splitting attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpPnsQuantities {
    pub r_exp: f64,
    pub r_double: f64,
    pub r_err_eve: f64,
    pub p_ae: f64,
    pub p_eb: f64,
    pub i_ae: f64,
    pub i_eb: f64,
    pub i_ae_leading: f64,
    pub i_eb_leading: f64,
    pub epsilon_prime: f64,
    pub epsilon_prime_leading: f64,
    pub i_ab: f64,
    pub saturated: bool,
}

pub fn ep_pns_quantities(gain: Gain, eta_a: f64, eta_bl: f64) -> Result<EpPnsQuantities> {
    let approx = ep_rates_approx(gain, eta_a, eta_bl)?;
    let x = gain.squared();
    let xi2 = gain.xi_squared();
    let mu = gain.mean_pairs();
    let a = eta_a;
    let r_exp = approx.r_key;
    let r_double = xi2 * x * x * ((1.0 - (1.0 - a).powi(2)) + a * (1.0 - a));
    let r_err_eve = xi2 * x * x * a * (1.0 - a) / 2.0;
    let p_ae = (5.0 - 3.0 * a) / (6.0 - 4.0 * a);
    let p_eb = (2.0 - a) / (3.0 - 2.0 * a);
    let (f_ae, f_eb) = (info(p_ae), info(p_eb));
    let saturated = r_exp <= r_double;
    let share = if saturated { 1.0 } else { r_double / r_exp };
    let lead = (3.0 - 2.0 * a) / (2.0 * eta_bl) * mu;
    let (epsilon_prime, epsilon_prime_leading) = if saturated {
        let closed = (1.0 - a) / (6.0 - 4.0 * a);
        (closed, closed)
    } else {
        (r_err_eve / r_exp, (1.0 - a) / (4.0 * eta_bl) * mu)
    };
    Ok(EpPnsQuantities {
        r_exp,
        r_double,
        r_err_eve,
        p_ae,
        p_eb,
        i_ae: share * f_ae,
        i_eb: share * f_eb,
        i_ae_leading: if saturated { f_ae } else { lead * f_ae },
        i_eb_leading: if saturated { f_eb } else { lead * f_eb },
        epsilon_prime,
        epsilon_prime_leading,
        i_ab: info(epsilon_prime.clamp(0.0, 1.0)),
        saturated,
    })
}

/// Formula values for one parameter point, side by side with the oracle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub scheme: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ep: Option<EpRatesApprox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ep_pns: Option<EpPnsQuantities>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage: Option<Leakage>,
    /// Exact unattacked statistics.
    pub oracle: OracleRates,
    /// Relative gap `(formula - oracle) / oracle` for the sifted rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_key_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_deviation: Option<f64>,
}

impl AnalyticReport {
    pub fn r_exp(&self) -> Option<f64> {
        self.leakage.map(|l| l.r_exp).or(self.ep_pns.map(|q| q.r_exp))
    }
}

/// Every closed form applicable to `source`, plus the unattacked oracle.
pub fn analytic_report(source: &SourceParams, channel: &ChannelParams) -> Result<AnalyticReport> {
    source.validate()?;
    channel.validate()?;
    let eta_bl = channel.eta_b * channel.eta_l;
    let mut report = AnalyticReport {
        scheme: source.scheme().to_string(),
        ..Default::default()
    };
    match *source {
        SourceParams::EntangledPairs { g, truncation_order } => {
            let approx = ep_rates_approx(g, channel.eta_a, eta_bl)?;
            let oracle = exact_rates_oracle(&EpOracleParams {
                gain: g,
                channel: *channel,
                truncation: (truncation_order as u32).max(2),
                attack: None,
            })?;
            report.r_key_deviation = ratio(approx.r_key - oracle.r_key, oracle.r_key);
            report.epsilon_deviation = oracle.epsilon.and_then(|e| ratio(approx.epsilon - e, e));
            report.ep = Some(approx);
            report.ep_pns = Some(ep_pns_quantities(g, channel.eta_a, eta_bl)?);
            report.oracle = oracle;
        }
        SourceParams::WeakCoherent { mu_prime } => {
            let l = wcs_leakage(mu_prime, eta_bl)?;
            report.oracle = wcs_oracle(mu_prime, channel, None)?;
            report.r_key_deviation = ratio(l.r_exp - report.oracle.r_key, report.oracle.r_key);
            report.leakage = Some(l);
        }
        SourceParams::TriggeredPdc { g, .. } => {
            let l = pdc_leakage(g, channel.eta_a, eta_bl)?.leakage;
            report.oracle = pdc_oracle(g, channel, None, None)?;
            report.r_key_deviation = ratio(l.r_exp - report.oracle.r_key, report.oracle.r_key);
            report.leakage = Some(l);
        }
    }
    Ok(report)
}
