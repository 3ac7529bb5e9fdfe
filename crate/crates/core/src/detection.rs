//! Polarization-insensitive loss and "yes/no" detectors.
//!
//! Losses are beam splitters acting independently on every photon, so they
//! are applied to sampled photon counts by binomial thinning. A detector fed
//! `n` photons fires with probability `1 - (1 - eta)^n`, which is exactly
//! thinning with survival `eta` followed by the test "survivors >= 1". Both
//! the loss and the detector POVM are diagonal in photon number, so this
//! count-level model reproduces the click statistics of the full state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Result};

/// Detector and line transmittances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub eta_a: f64,
    pub eta_b: f64,
    pub eta_l: f64,
    /// Per-detector spurious click probability. Zero in the noiseless model.
    #[serde(default)]
    pub dark_count: f64,
}

impl ChannelParams {
    pub fn new(eta_a: f64, eta_b: f64, eta_l: f64) -> Result<Self> {
        let c = ChannelParams {
            eta_a,
            eta_b,
            eta_l,
            dark_count: 0.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("eta_a", self.eta_a)?;
        check_unit("eta_b", self.eta_b)?;
        check_unit("eta_l", self.eta_l)?;
        check_unit("dark_count", self.dark_count)?;
        Ok(())
    }

    /// Alice's side sees no line loss; only her detector efficiency applies.
    pub fn alice_detector(&self) -> Detector {
        Detector {
            efficiency: self.eta_a,
            dark_count: self.dark_count,
        }
    }

    pub fn bob_detector(&self) -> Detector {
        Detector {
            efficiency: compose_bob_efficiency(self),
            dark_count: self.dark_count,
        }
    }
}

/// Single survival probability for line loss followed by Bob's detector.
pub fn compose_bob_efficiency(params: &ChannelParams) -> f64 {
    params.eta_l * params.eta_b
}

/// Logical bit carried by a polarization mode: mode0 is 0, mode1 is 1.
pub type Bit = u8;

/// Result of one side's pair of polarization detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClickOutcome {
    NoClick,
    Single(Bit),
    DoubleClick,
}

impl ClickOutcome {
    pub fn from_fired(fired0: bool, fired1: bool) -> Self {
        match (fired0, fired1) {
            (false, false) => ClickOutcome::NoClick,
            (true, false) => ClickOutcome::Single(0),
            (false, true) => ClickOutcome::Single(1),
            (true, true) => ClickOutcome::DoubleClick,
        }
    }

    pub fn bit(self) -> Option<Bit> {
        match self {
            ClickOutcome::Single(b) => Some(b),
            _ => None,
        }
    }
}

/// Binomial(count, p) survivors of a lossy element.
pub fn thin<R: Rng + ?Sized>(rng: &mut R, count: u32, p: f64) -> Result<u32> {
    check_unit("p", p)?;
    Ok(thin_unchecked(rng, count, p))
}

// Photon counts here are a handful at most, so per-photon Bernoulli trials
// are both exact and cheaper than a general binomial sampler.
#[inline]
pub(crate) fn thin_unchecked<R: Rng + ?Sized>(rng: &mut R, count: u32, p: f64) -> u32 {
    if p >= 1.0 {
        return count;
    }
    if p <= 0.0 {
        return 0;
    }
    (0..count).filter(|_| rng.random::<f64>() < p).count() as u32
}

/// A pair of identical yes/no detectors behind a polarizing splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detector {
    pub efficiency: f64,
    pub dark_count: f64,
}

impl Detector {
    pub fn ideal() -> Self {
        Detector {
            efficiency: 1.0,
            dark_count: 0.0,
        }
    }

    #[inline]
    fn fires<R: Rng + ?Sized>(&self, rng: &mut R, photons: u32) -> bool {
        let hit = thin_unchecked(rng, photons, self.efficiency) >= 1;
        hit || (self.dark_count > 0.0 && rng.random::<f64>() < self.dark_count)
    }

    pub fn detect<R: Rng + ?Sized>(&self, rng: &mut R, mode0: u32, mode1: u32) -> ClickOutcome {
        let f0 = self.fires(rng, mode0);
        let f1 = self.fires(rng, mode1);
        ClickOutcome::from_fired(f0, f1)
    }

    /// Exact probability that one detector fires for `photons` incident.
    pub fn fire_probability(&self, photons: u32) -> f64 {
        let miss = (1.0 - self.efficiency).powi(photons as i32) * (1.0 - self.dark_count);
        1.0 - miss
    }

    /// Exact outcome probabilities `[none, single0, single1, double]`.
    pub fn outcome_probabilities(&self, mode0: u32, mode1: u32) -> [f64; 4] {
        let p0 = self.fire_probability(mode0);
        let p1 = self.fire_probability(mode1);
        [(1.0 - p0) * (1.0 - p1), p0 * (1.0 - p1), (1.0 - p0) * p1, p0 * p1]
    }
}

/// Noiseless detection of `(mode0, mode1)` photons with efficiency `eta`.
pub fn detect_side<R: Rng + ?Sized>(rng: &mut R, mode0: u32, mode1: u32, eta: f64) -> Result<ClickOutcome> {
    check_unit("eta", eta)?;
    Ok(Detector {
        efficiency: eta,
        dark_count: 0.0,
    }
    .detect(rng, mode0, mode1))
}
