//! Photon-number statistics of the three source types.
//!
//! The two-crystal down-conversion source emits `m` vertical and `n`
//! horizontal pairs with probability `xi^4 g^(2(m+n))`, where
//! `xi^2 = 1 - g^2`. A single crystal emits `n` pairs with probability
//! `xi^2 g^(2n)`. Weak coherent pulses carry a Poisson photon number.
//!
//! Pump depletion behind the first crystal is ignored.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of pairs retained per emission.
pub const DEFAULT_TRUNCATION: usize = 2;

/// QKD scheme / source type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Two-crystal polarization-entangled pairs shared by Alice and Bob.
    #[serde(rename = "ep")]
    EntangledPairs,
    /// Attenuated laser pulses.
    #[serde(rename = "wcs")]
    WeakCoherent,
    /// Single-crystal source heralded by a trigger detector at Alice.
    #[serde(rename = "pdc")]
    TriggeredPdc,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::EntangledPairs => "ep",
            Scheme::WeakCoherent => "wcs",
            Scheme::TriggeredPdc => "pdc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ep" | "entangled" | "entangled-pairs" => Some(Scheme::EntangledPairs),
            "wcs" | "weak-coherent" => Some(Scheme::WeakCoherent),
            "pdc" | "triggered-pdc" => Some(Scheme::TriggeredPdc),
            _ => None,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Down-conversion gain `g = tanh(chi t)`, validated to `0 <= g < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Gain(f64);

impl Gain {
    pub fn new(g: f64) -> Result<Self> {
        if (0.0..1.0).contains(&g) {
            Ok(Gain(g))
        } else {
            Err(Error::OutOfRange {
                name: "g",
                value: g,
                expected: "0 <= g < 1",
            })
        }
    }

    /// Gain producing a two-crystal mean pair number `mu`.
    pub fn from_mean_pairs(mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::OutOfRange {
                name: "mu",
                value: mu,
                expected: "finite mu >= 0",
            });
        }
        Gain::new((mu / (2.0 + mu)).sqrt())
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `g^2`.
    pub fn squared(self) -> f64 {
        self.0 * self.0
    }

    /// `xi^2 = 1 - g^2`.
    pub fn xi_squared(self) -> f64 {
        1.0 - self.squared()
    }

    /// Mean pair number of the two-crystal source, `2 g^2 / (1 - g^2)`.
    pub fn mean_pairs(self) -> f64 {
        2.0 * self.squared() / self.xi_squared()
    }

    /// Mean pair number of a single crystal, `g^2 / (1 - g^2)`.
    pub fn mean_pairs_single(self) -> f64 {
        self.squared() / self.xi_squared()
    }
}

impl TryFrom<f64> for Gain {
    type Error = Error;
    fn try_from(g: f64) -> Result<Self> {
        Gain::new(g)
    }
}

impl From<Gain> for f64 {
    fn from(g: Gain) -> f64 {
        g.0
    }
}

/// Mean pair number for a raw gain value.
pub fn mean_pairs(g: f64) -> Result<f64> {
    Gain::new(g).map(Gain::mean_pairs)
}

/// Inverse of [`mean_pairs`]: `sqrt(mu / (2 + mu))`.
pub fn g_for_mean(mu: f64) -> Result<f64> {
    Gain::from_mean_pairs(mu).map(Gain::value)
}

/// Source parameters for one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum SourceParams {
    #[serde(rename = "ep")]
    EntangledPairs { g: Gain, truncation_order: usize },
    #[serde(rename = "wcs")]
    WeakCoherent { mu_prime: f64 },
    #[serde(rename = "pdc")]
    TriggeredPdc { g: Gain, truncation_order: usize },
}

impl SourceParams {
    pub fn scheme(&self) -> Scheme {
        match self {
            SourceParams::EntangledPairs { .. } => Scheme::EntangledPairs,
            SourceParams::WeakCoherent { .. } => Scheme::WeakCoherent,
            SourceParams::TriggeredPdc { .. } => Scheme::TriggeredPdc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceParams::EntangledPairs { truncation_order, .. }
            | SourceParams::TriggeredPdc { truncation_order, .. } => check_truncation(truncation_order),
            SourceParams::WeakCoherent { mu_prime } => check_mu_prime(mu_prime).map(|_| ()),
        }
    }
}

fn check_truncation(t: usize) -> Result<()> {
    if t >= 1 {
        Ok(())
    } else {
        Err(Error::Truncation { min: 1, got: t })
    }
}

fn check_mu_prime(mu_prime: f64) -> Result<f64> {
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

/// Pair content of one two-crystal emission: `m` V-pairs and `n` H-pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairConfiguration {
    pub m: u32,
    pub n: u32,
}

impl PairConfiguration {
    pub const VACUUM: Self = PairConfiguration { m: 0, n: 0 };

    pub fn new(m: u32, n: u32) -> Self {
        PairConfiguration { m, n }
    }

    /// Photons per side, `m + n`.
    pub fn total(self) -> u32 {
        self.m + self.n
    }
}

/// Truncated probability table over [`PairConfiguration`].
///
/// Mass beyond the truncation order is kept in `tail` and sampled as
/// "truncation exceeded"; it is never folded back into the table.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistribution {
    gain: Gain,
    truncation: usize,
    entries: Vec<(PairConfiguration, f64)>,
    cumulative: Vec<f64>,
    tail: f64,
}

/// Exact `P(m, n)` table for `m + n <= truncation`.
pub fn pair_distribution(gain: Gain, truncation: usize) -> Result<PairDistribution> {
    check_truncation(truncation)?;
    let x = gain.squared();
    let xi4 = gain.xi_squared().powi(2);
    let mut entries = Vec::with_capacity((truncation + 1) * (truncation + 2) / 2);
    for t in 0..=truncation as u32 {
        let p = xi4 * x.powi(t as i32);
        for m in 0..=t {
            entries.push((PairConfiguration::new(m, t - m), p));
        }
    }
    // sum_{t > T} (t + 1) xi^4 x^t, closed form
    let tail = x.powi(truncation as i32 + 1) * ((truncation as f64 + 2.0) - (truncation as f64 + 1.0) * x);
    let cumulative = entries
        .iter()
        .scan(0.0, |acc, &(_, p)| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    Ok(PairDistribution {
        gain,
        truncation,
        entries,
        cumulative,
        tail,
    })
}

impl PairDistribution {
    pub fn gain(&self) -> Gain {
        self.gain
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn entries(&self) -> &[(PairConfiguration, f64)] {
        &self.entries
    }

    /// Probability mass of configurations with `m + n > truncation`.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn probability(&self, config: PairConfiguration) -> f64 {
        self.entries.iter().find(|(c, _)| *c == config).map_or(0.0, |&(_, p)| p)
    }

    /// Mean `m + n` over the retained table.
    pub fn partial_mean(&self) -> f64 {
        self.entries.iter().map(|&(c, p)| c.total() as f64 * p).sum()
    }

    /// Inverse-CDF draw; `None` means the tail was hit.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<PairConfiguration> {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.entries.get(idx).map(|&(c, _)| c)
    }
}

/// Inverse-CDF draw from a pair table; `None` flags "truncation exceeded".
pub fn sample_pair_config<R: Rng + ?Sized>(rng: &mut R, dist: &PairDistribution) -> Option<PairConfiguration> {
    dist.sample(rng)
}

/// Single-crystal pair number table, `P(n) = xi^2 g^(2n)` for `n <= truncation`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmDistribution {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    tail: f64,
}

impl ArmDistribution {
    pub fn new(gain: Gain, truncation: usize) -> Result<Self> {
        check_truncation(truncation)?;
        let x = gain.squared();
        let xi2 = gain.xi_squared();
        let probabilities: Vec<f64> = (0..=truncation as i32).map(|n| xi2 * x.powi(n)).collect();
        let cumulative = probabilities
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(ArmDistribution {
            probabilities,
            cumulative,
            tail: x.powi(truncation as i32 + 1),
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u32> {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        (idx < self.probabilities.len()).then_some(idx as u32)
    }
}

/// Pair number of a single crystal; `None` flags "truncation exceeded".
pub fn sample_pdc_single_arm<R: Rng + ?Sized>(rng: &mut R, gain: Gain, truncation: usize) -> Result<Option<u32>> {
    Ok(ArmDistribution::new(gain, truncation)?.sample(rng))
}

/// Poisson photon-number source for weak coherent pulses.
#[derive(Debug, Clone, Copy)]
pub struct CoherentPulse {
    mu_prime: f64,
    poisson: Option<Poisson<f64>>,
}

impl CoherentPulse {
    pub fn new(mu_prime: f64) -> Result<Self> {
        let mu_prime = check_mu_prime(mu_prime)?;
        let poisson = if mu_prime > 0.0 {
            Some(Poisson::new(mu_prime).map_err(|_| Error::OutOfRange {
                name: "mu_prime",
                value: mu_prime,
                expected: "mu_prime accepted by the Poisson sampler",
            })?)
        } else {
            None
        };
        Ok(CoherentPulse { mu_prime, poisson })
    }

    pub fn mu_prime(&self) -> f64 {
        self.mu_prime
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match &self.poisson {
            Some(p) => p.sample(rng) as u32,
            None => 0,
        }
    }
}

/// Poisson photon count with mean `mu_prime`.
pub fn sample_wcs_photons<R: Rng + ?Sized>(rng: &mut R, mu_prime: f64) -> Result<u32> {
    Ok(CoherentPulse::new(mu_prime)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFactory;
    use proptest::prelude::*;

    fn g(v: f64) -> Gain {
        Gain::new(v).unwrap()
    }

    /// Asserts a frequency `k / n` lies within 5 binomial standard errors of `p`.
    fn assert_freq(k: usize, n: usize, p: f64) {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let f = k as f64 / n as f64;
        assert!((f - p).abs() <= 5.0 * se, "freq {f} vs {p} (se {se})");
    }

    #[test]
    fn vacuum_source() {
        let d = pair_distribution(g(0.0), 2).unwrap();
        assert_eq!(d.probability(PairConfiguration::VACUUM), 1.0);
        assert!(d.entries().iter().skip(1).all(|&(_, p)| p == 0.0));
        assert_eq!(d.tail(), 0.0);
        let mut rng = StreamFactory::new(1).stream(0);
        assert!((0..1000).all(|_| d.sample(&mut rng) == Some(PairConfiguration::VACUUM)));
    }

    #[test]
    fn pair_probabilities_at_g_0_1() {
        let d = pair_distribution(g(0.1), 2).unwrap();
        assert!((d.probability(PairConfiguration::new(0, 0)) - 0.9801).abs() < 1e-15);
        assert!((d.probability(PairConfiguration::new(1, 0)) - 0.009801).abs() < 1e-15);
        assert!((d.probability(PairConfiguration::new(0, 1)) - 0.009801).abs() < 1e-15);
        assert_eq!(d.entries().len(), 6);
    }

    #[test]
    fn rejects_invalid_gain_and_truncation() {
        assert!(Gain::new(1.0).is_err());
        assert!(Gain::new(-0.1).is_err());
        assert!(Gain::new(f64::NAN).is_err());
        assert!(pair_distribution(g(0.1), 0).is_err());
        assert!(g_for_mean(-1.0).is_err());
        assert!(mean_pairs(1.0).is_err());
        assert!(sample_wcs_photons(&mut StreamFactory::new(0).stream(0), -0.5).is_err());
    }

    #[test]
    fn mean_pair_values() {
        assert_eq!(mean_pairs(0.0).unwrap(), 0.0);
        assert!((mean_pairs(0.1).unwrap() - 0.02 / 0.99).abs() < 1e-15);
        assert_eq!(g_for_mean(0.0).unwrap(), 0.0);
        assert!((g_for_mean(2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((g_for_mean(0.02).unwrap() - 0.099_503_719_020_998_9).abs() < 1e-12);
        for i in 1..=50 {
            let gv = i as f64 * 0.01;
            assert!((g_for_mean(mean_pairs(gv).unwrap()).unwrap() - gv).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_mean_is_monotone_and_converges() {
        let gain = g(0.4);
        let mu = gain.mean_pairs();
        let means: Vec<f64> = (1..40)
            .map(|t| pair_distribution(gain, t).unwrap().partial_mean())
            .collect();
        assert!(means.windows(2).all(|w| w[0] <= w[1]));
        assert!(means.iter().all(|&m| m <= mu + 1e-12));
        assert!((means.last().unwrap() - mu).abs() < 1e-9);
    }

    #[test]
    fn pair_sampling_frequencies() {
        let d = pair_distribution(g(0.1), 2).unwrap();
        let f = StreamFactory::new(11);
        let mut rng = f.stream(0);
        let n = 1_000_000;
        let mut ones = 0;
        let mut tails = 0;
        for _ in 0..n {
            match d.sample(&mut rng) {
                Some(c) if c == PairConfiguration::new(1, 0) => ones += 1,
                None => tails += 1,
                _ => {}
            }
        }
        assert_freq(ones, n, 0.009801);
        assert_freq(tails, n, d.tail());
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = pair_distribution(g(0.3), 3).unwrap();
        let draw = || {
            let mut rng = StreamFactory::new(5).stream(9);
            (0..200).map(|_| d.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn wcs_photon_statistics() {
        let mut rng = StreamFactory::new(3).stream(0);
        assert!((0..1000).all(|_| sample_wcs_photons(&mut rng, 0.0).unwrap() == 0));
        let pulse = CoherentPulse::new(0.1).unwrap();
        let n = 1_000_000;
        let mut multi = 0;
        let mut sum = 0u64;
        for _ in 0..n {
            let k = pulse.sample(&mut rng);
            sum += k as u64;
            if k >= 2 {
                multi += 1;
            }
        }
        assert_freq(multi, n, 0.004_678_840_160_444_4);
        let mean = sum as f64 / n as f64;
        assert!((mean - 0.1).abs() <= 5.0 * (0.1f64 / n as f64).sqrt());
    }

    #[test]
    fn single_arm_statistics() {
        let mut rng = StreamFactory::new(4).stream(0);
        assert!((0..1000).all(|_| sample_pdc_single_arm(&mut rng, g(0.0), 2).unwrap() == Some(0)));
        let gain = g(0.1);
        let arm = ArmDistribution::new(gain, 30).unwrap();
        let n = 1_000_000;
        let mut ones = 0;
        let mut sum = 0u64;
        let mut sq = 0u64;
        for _ in 0..n {
            let k = arm.sample(&mut rng).unwrap();
            sum += k as u64;
            sq += (k as u64).pow(2);
            if k == 1 {
                ones += 1;
            }
        }
        assert_freq(ones, n, 0.0099);
        let mean = sum as f64 / n as f64;
        let var = sq as f64 / n as f64 - mean * mean;
        let mu = gain.mean_pairs_single();
        assert!((mean - mu).abs() <= 5.0 * (var / n as f64).sqrt());
    }

    proptest! {
        #[test]
        fn normalization_and_symmetry(gv in 0.0f64..0.99, t in 1usize..12) {
            let d = pair_distribution(g(gv), t).unwrap();
            let total: f64 = d.entries().iter().map(|&(_, p)| p).sum::<f64>() + d.tail();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for &(c, p) in d.entries() {
                prop_assert_eq!(p, d.probability(PairConfiguration::new(c.n, c.m)));
                prop_assert!(c.total() as usize <= t);
            }
            let arm = ArmDistribution::new(g(gv), t).unwrap();
            let arm_total: f64 = arm.probabilities().iter().sum::<f64>() + arm.tail();
            prop_assert!((arm_total - 1.0).abs() < 1e-12);
        }
    }
}
