//! Photon-number-splitting attack on Bob's arm.
//!
//! Eve replaces the lossy line by a lossless one and counts the photons of
//! each signal. From two or more she removes one photon, picked uniformly
//! among the physical photons, and keeps it until the bases are announced.
//! Single photons are blocked with a fixed probability, tuned so that Bob's
//! sifted rate matches the unattacked one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::{info, oracle_for, AttackModel};
use crate::detection::{Bit, ChannelParams};
use crate::error::{check_unit, Error, Result};
use crate::fock_measurement::Basis;
use crate::protocol_engine::RoundRecord;
use crate::source_model::SourceParams;
use crate::stats::Estimate;

/// Bisection stops once the bracket is narrower than this.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// How Eve treats single-photon signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockPolicy {
    Fixed(f64),
    /// Match the unattacked sifted rate.
    AutoSolve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnsConfig {
    pub block: BlockPolicy,
    /// Eve controls Bob's detector: every forwarded photon is registered.
    pub guarantee_delivery: bool,
}

impl Default for PnsConfig {
    fn default() -> Self {
        PnsConfig {
            block: BlockPolicy::AutoSolve,
            guarantee_delivery: true,
        }
    }
}

impl PnsConfig {
    pub fn validate(&self) -> Result<()> {
        if let BlockPolicy::Fixed(p) = self.block {
            check_unit("block_probability", p)?;
        }
        Ok(())
    }

    /// Fixes the block probability, solving for it if requested.
    pub fn resolve(&self, source: &SourceParams, channel: &ChannelParams) -> Result<ResolvedPns> {
        self.validate()?;
        let (block_probability, saturated) = match self.block {
            BlockPolicy::Fixed(p) => (p, false),
            BlockPolicy::AutoSolve => match solve_block_probability(source, channel, self.guarantee_delivery)? {
                BlockSolution::Probability(p) => (p, false),
                BlockSolution::Saturated => (1.0, true),
            },
        };
        Ok(ResolvedPns {
            block_probability,
            guarantee_delivery: self.guarantee_delivery,
            saturated,
        })
    }
}

/// Attack settings with a concrete block probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPns {
    pub block_probability: f64,
    pub guarantee_delivery: bool,
    /// Rate matching was impossible; all single photons are blocked.
    pub saturated: bool,
}

impl ResolvedPns {
    pub fn attack_model(&self, channel: &ChannelParams) -> AttackModel {
        AttackModel {
            block_probability: self.block_probability,
            // without detector control only the line loss is removed
            forwarded_efficiency: if self.guarantee_delivery { 1.0 } else { channel.eta_b },
        }
    }
}

/// Outcome of [`solve_block_probability`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSolution {
    Probability(f64),
    /// Even with every single photon blocked Eve delivers at least the
    /// unattacked rate.
    Saturated,
}

/// Block probability that makes Bob's delivered sifted rate equal to the
/// unattacked one, by bisection on the exact delivered-rate function.
pub fn solve_block_probability(
    source: &SourceParams,
    channel: &ChannelParams,
    guarantee_delivery: bool,
) -> Result<BlockSolution> {
    let target = oracle_for(source, channel, None)?.r_key;
    if target <= 0.0 {
        return Err(Error::ZeroRate);
    }
    let cfg = |p: f64| ResolvedPns {
        block_probability: p,
        guarantee_delivery,
        saturated: false,
    };
    let delivered =
        |p: f64| -> Result<f64> { Ok(oracle_for(source, channel, Some(&cfg(p).attack_model(channel)))?.r_key) };
    if delivered(1.0)? >= target {
        return Ok(BlockSolution::Saturated);
    }
    if delivered(0.0)? <= target * (1.0 + 1e-12) {
        return Ok(BlockSolution::Probability(0.0));
    }
    // delivered rate decreases monotonically in p
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > SOLVE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if delivered(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BlockSolution::Probability(0.5 * (lo + hi)))
}

/// Which group of bits a stored photon belongs to, from the true source
/// content (Eve herself cannot tell the groups apart).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KnowledgeClass {
    /// All photons on the arm share one polarization.
    Certain,
    /// Both polarizations present; Eve's photon matches Alice's bit half
    /// the time.
    Half,
    None,
}

/// What Eve did to one signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveRecord {
    pub intercepted: bool,
    pub photons_seen: u32,
    /// Mode of the stored photon in the basis Bob's arm was prepared in.
    pub stored_polarization: Option<Bit>,
    pub blocked: bool,
    pub guess_bit_alice: Option<Bit>,
    pub guess_bit_on_bob: Option<Bit>,
    pub knowledge_class: KnowledgeClass,
}

impl EveRecord {
    fn idle(photons_seen: u32) -> Self {
        EveRecord {
            intercepted: photons_seen > 0,
            photons_seen,
            stored_polarization: None,
            blocked: false,
            guess_bit_alice: None,
            guess_bit_on_bob: None,
            knowledge_class: KnowledgeClass::None,
        }
    }
}

/// Splits one photon off Bob's arm, or blocks a lone photon. Returns the
/// counts Eve forwards.
pub fn pns_intercept<R: Rng + ?Sized>(rng: &mut R, arm: (u32, u32), cfg: &ResolvedPns) -> (EveRecord, (u32, u32)) {
    let (b0, b1) = arm;
    let total = b0 + b1;
    match total {
        0 => (EveRecord::idle(0), (0, 0)),
        1 => {
            let blocked = cfg.block_probability > 0.0 && rng.random::<f64>() < cfg.block_probability;
            let record = EveRecord {
                blocked,
                ..EveRecord::idle(1)
            };
            (record, if blocked { (0, 0) } else { arm })
        }
        _ => {
            let take0 = rng.random::<f64>() * (total as f64) < b0 as f64;
            let (stored, forwarded) = if take0 { (0, (b0 - 1, b1)) } else { (1, (b0, b1 - 1)) };
            let knowledge_class = if b0 > 0 && b1 > 0 {
                KnowledgeClass::Half
            } else {
                KnowledgeClass::Certain
            };
            let record = EveRecord {
                stored_polarization: Some(stored),
                knowledge_class,
                ..EveRecord::idle(total)
            };
            (record, forwarded)
        }
    }
}

/// Eve's reading of her stored photon once the basis is announced.
pub fn eve_measure_stored<R: Rng + ?Sized>(
    rng: &mut R,
    record: &EveRecord,
    announced: Basis,
    preparation: Basis,
) -> Option<Bit> {
    let stored = record.stored_polarization?;
    Some(if announced == preparation {
        stored
    } else {
        rng.random_bool(0.5) as Bit
    })
}

/// Count vector behind Eve's information estimates. Merging is field-wise
/// addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveTally {
    pub intercepted: u64,
    pub blocked: u64,
    pub sifted: u64,
    pub touched: u64,
    pub hit_alice: u64,
    pub hit_bob: u64,
    pub certain: u64,
    pub half: u64,
}

impl EveTally {
    pub fn record(&mut self, round: &RoundRecord) {
        let Some(eve) = &round.eve else { return };
        self.intercepted += eve.intercepted as u64;
        self.blocked += eve.blocked as u64;
        if !round.sifted {
            return;
        }
        self.sifted += 1;
        if let Some(g) = eve.guess_bit_alice {
            self.touched += 1;
            self.hit_alice += (Some(g) == round.bit_a) as u64;
            self.hit_bob += (eve.guess_bit_on_bob == round.bit_b) as u64;
            match eve.knowledge_class {
                KnowledgeClass::Certain => self.certain += 1,
                KnowledgeClass::Half => self.half += 1,
                KnowledgeClass::None => {}
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.intercepted += other.intercepted;
        self.blocked += other.blocked;
        self.sifted += other.sifted;
        self.touched += other.touched;
        self.hit_alice += other.hit_alice;
        self.hit_bob += other.hit_bob;
        self.certain += other.certain;
        self.half += other.half;
    }

    /// `None` when no bit was sifted.
    pub fn estimates(&self) -> Option<EveEstimates> {
        let touched_fraction = Estimate::binomial(self.touched, self.sifted)?;
        let p_ae = Estimate::binomial(self.hit_alice, self.touched);
        let p_eb = Estimate::binomial(self.hit_bob, self.touched);
        let share = touched_fraction.value;
        Some(EveEstimates {
            touched_fraction,
            i_ae: p_ae.map_or(0.0, |p| share * info(p.value)),
            i_eb: p_eb.map_or(0.0, |p| share * info(p.value)),
            p_ae,
            p_eb,
            tally: *self,
        })
    }
}

/// Eve's empirical knowledge of the sifted key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveEstimates {
    /// Sifted bits derived from a signal Eve split.
    pub touched_fraction: Estimate,
    pub p_ae: Option<Estimate>,
    pub p_eb: Option<Estimate>,
    pub i_ae: f64,
    pub i_eb: f64,
    pub tally: EveTally,
}

/// `(I_AE, I_EB, p_AE, p_EB)` over attacked rounds; `None` without sifted bits.
pub fn empirical_eve_information<'a>(records: impl IntoIterator<Item = &'a RoundRecord>) -> Option<EveEstimates> {
    let mut tally = EveTally::default();
    for r in records {
        tally.record(r);
    }
    tally.estimates()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::wcs_leakage;
    use crate::rng::StreamFactory;
    use crate::source_model::Gain;

    fn cfg(p: f64) -> ResolvedPns {
        ResolvedPns {
            block_probability: p,
            guarantee_delivery: true,
            saturated: false,
        }
    }

    #[test]
    fn intercept_edges() {
        let mut rng = StreamFactory::new(0).stream(0);
        let (rec, fwd) = pns_intercept(&mut rng, (0, 0), &cfg(0.5));
        assert!(!rec.intercepted);
        assert_eq!(fwd, (0, 0));
        for _ in 0..100 {
            let (rec, fwd) = pns_intercept(&mut rng, (2, 0), &cfg(0.5));
            assert_eq!(rec.stored_polarization, Some(0));
            assert_eq!(rec.knowledge_class, KnowledgeClass::Certain);
            assert_eq!(fwd, (1, 0));
            let (rec, fwd) = pns_intercept(&mut rng, (0, 1), &cfg(1.0));
            assert!(rec.blocked && rec.photons_seen == 1);
            assert_eq!(fwd, (0, 0));
            let (rec, fwd) = pns_intercept(&mut rng, (0, 1), &cfg(0.0));
            assert!(!rec.blocked);
            assert_eq!(fwd, (0, 1));
        }
    }

    #[test]
    fn mixed_pair_splits_fairly() {
        let mut rng = StreamFactory::new(1).stream(0);
        let n = 1_000_000;
        let mut mode0 = 0;
        for _ in 0..n {
            let (rec, fwd) = pns_intercept(&mut rng, (1, 1), &cfg(0.0));
            let s = rec.stored_polarization.unwrap();
            // forwarded photon is always the other polarization
            assert_eq!(fwd, if s == 0 { (0, 1) } else { (1, 0) });
            assert_eq!(rec.knowledge_class, KnowledgeClass::Half);
            mode0 += (s == 0) as usize;
        }
        let se = (0.25f64 / n as f64).sqrt();
        assert!((mode0 as f64 / n as f64 - 0.5).abs() < 5.0 * se);
    }

    #[test]
    fn stored_photon_readout() {
        let mut rng = StreamFactory::new(2).stream(0);
        let mut rec = EveRecord::idle(2);
        rec.stored_polarization = Some(0);
        assert_eq!(eve_measure_stored(&mut rng, &rec, Basis::Plus, Basis::Plus), Some(0));
        rec.stored_polarization = Some(1);
        assert_eq!(eve_measure_stored(&mut rng, &rec, Basis::Cross, Basis::Cross), Some(1));
        let n = 1_000_000;
        let ones = (0..n)
            .filter(|_| eve_measure_stored(&mut rng, &rec, Basis::Plus, Basis::Cross) == Some(1))
            .count();
        let se = (0.25f64 / n as f64).sqrt();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 5.0 * se);
        assert_eq!(
            eve_measure_stored(&mut rng, &EveRecord::idle(1), Basis::Plus, Basis::Plus),
            None
        );
    }

    #[test]
    fn solver_cases() {
        let lossless = ChannelParams::new(1.0, 1.0, 1.0).unwrap();
        let wcs = SourceParams::WeakCoherent { mu_prime: 0.1 };
        assert_eq!(
            solve_block_probability(&wcs, &lossless, true).unwrap(),
            BlockSolution::Probability(0.0)
        );
        let ch = ChannelParams::new(1.0, 0.5, 0.2).unwrap();
        let BlockSolution::Probability(p) = solve_block_probability(&wcs, &ch, true).unwrap() else {
            panic!("expected a rate-matching probability");
        };
        let l = wcs_leakage(0.1, 0.1).unwrap();
        // closed form: 2 R_exp = P(n>=2) + (1 - p) P(n=1)
        let p1 = 0.1 * (-0.1f64).exp();
        let expected = 1.0 - (2.0 * l.r_exp - 2.0 * l.r_multi) / p1;
        assert!((p - expected).abs() < 1e-9, "{p} vs {expected}");
        assert!(p > 0.0 && p < 1.0);
        let dark = ChannelParams::new(1.0, 0.1, 0.1).unwrap();
        assert_eq!(
            solve_block_probability(&wcs, &dark, true).unwrap(),
            BlockSolution::Saturated
        );
        let empty = ChannelParams::new(1.0, 0.5, 0.0).unwrap();
        assert_eq!(solve_block_probability(&wcs, &empty, true), Err(Error::ZeroRate));
        let ep = SourceParams::EntangledPairs {
            g: Gain::new(0.1).unwrap(),
            truncation_order: 2,
        };
        let ch = ChannelParams::new(0.6, 0.5, 0.2).unwrap();
        assert!(matches!(
            solve_block_probability(&ep, &ch, true).unwrap(),
            BlockSolution::Probability(p) if p > 0.0 && p < 1.0
        ));
    }

    #[test]
    fn tally_estimates() {
        assert!(EveTally::default().estimates().is_none());
        let t = EveTally {
            sifted: 10,
            ..Default::default()
        };
        let e = t.estimates().unwrap();
        assert_eq!(e.i_ae, 0.0);
        assert_eq!(e.i_eb, 0.0);
        assert!(e.p_ae.is_none());
    }
}
