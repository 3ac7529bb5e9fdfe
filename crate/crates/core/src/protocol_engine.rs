//! Event-level Monte Carlo of the three QKD schemes.
//!
//! Entangled-pair rounds with coinciding analyzers use the per-photon
//! picture: Alice and Bob each hold `m` photons in mode0 and `n` in mode1.
//! Identical basis changes on both sides leave the two-crystal state
//! invariant, so this is exact for either common basis. Rounds with
//! differing analyzers draw their counts from the exact Fock statistics of
//! the sampled pair sector, which captures two-photon interference.
//!
//! Trial `i` consumes its own counter-based stream `(master_seed, i)`, and
//! per-chunk tallies are merged by integer addition, so a report does not
//! depend on the worker count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{mismatched_tables, AttackModel};
use crate::detection::{Bit, ChannelParams, ClickOutcome, Detector};
use crate::eavesdropper::{
    eve_measure_stored, pns_intercept, EveEstimates, EveRecord, EveTally, PnsConfig, ResolvedPns,
};
use crate::error::{check_unit, Error, Result};
use crate::fock_measurement::{Basis, CountSampler, Occupation};
use crate::rng::{Stream, StreamFactory};
use crate::source_model::{
    pair_distribution, ArmDistribution, CoherentPulse, PairConfiguration, PairDistribution, Scheme, SourceParams,
};
use crate::stats::Estimate;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "PDC_QKD_WORKERS";

const CHUNK: u64 = 1 << 14;

/// Full trace of one protocol round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub scheme: Scheme,
    pub pairs: Option<PairConfiguration>,
    pub photons: Option<u32>,
    /// Entangled pairs only: photon counts per detector mode, in each side's
    /// analyzer basis, before any loss.
    pub counts: Option<Occupation>,
    pub basis_a: Basis,
    pub basis_b: Basis,
    pub outcome_a: ClickOutcome,
    pub outcome_b: ClickOutcome,
    pub sifted: bool,
    pub bit_a: Option<Bit>,
    pub bit_b: Option<Bit>,
    pub error: bool,
    pub eve: Option<EveRecord>,
    pub truncation_exceeded: bool,
}

impl RoundRecord {
    fn empty(scheme: Scheme) -> Self {
        RoundRecord {
            scheme,
            pairs: None,
            photons: None,
            counts: None,
            basis_a: Basis::Plus,
            basis_b: Basis::Plus,
            outcome_a: ClickOutcome::NoClick,
            outcome_b: ClickOutcome::NoClick,
            sifted: false,
            bit_a: None,
            bit_b: None,
            error: false,
            eve: None,
            truncation_exceeded: false,
        }
    }

    pub fn bases_match(&self) -> bool {
        self.basis_a == self.basis_b
    }

    pub fn eve_touched(&self) -> bool {
        self.eve.is_some_and(|e| e.stored_polarization.is_some())
    }

    pub fn eve_stored_pol(&self) -> Option<Bit> {
        self.eve.and_then(|e| e.stored_polarization)
    }

    fn sift(&mut self) {
        self.sifted = self.bases_match()
            && matches!(self.outcome_a, ClickOutcome::Single(_))
            && matches!(self.outcome_b, ClickOutcome::Single(_));
        if self.sifted {
            self.bit_a = self.outcome_a.bit();
            self.bit_b = self.outcome_b.bit();
            self.error = self.bit_a != self.bit_b;
        }
    }
}

enum PreparedSource {
    Pairs {
        table: PairDistribution,
        /// `[combo][sector]`, combo 0 = Alice `+` / Bob `x`.
        mismatched: [Vec<CountSampler>; 2],
    },
    Coherent(CoherentPulse),
    Triggered(ArmDistribution),
}

/// Pre-built distributions for repeated rounds of one configuration.
pub struct RoundSimulator {
    source: PreparedSource,
    scheme: Scheme,
    alice: Detector,
    bob: Detector,
    attack: Option<(ResolvedPns, Detector)>,
    basis_plus_probability: f64,
}

impl RoundSimulator {
    pub fn new(source: &SourceParams, channel: &ChannelParams, attack: Option<ResolvedPns>) -> Result<Self> {
        source.validate()?;
        channel.validate()?;
        let prepared = match *source {
            SourceParams::EntangledPairs { g, truncation_order } => PreparedSource::Pairs {
                table: pair_distribution(g, truncation_order)?,
                mismatched: mismatched_tables(truncation_order as u32)
                    .map(|tables| tables.iter().map(|t| t.sampler()).collect()),
            },
            SourceParams::WeakCoherent { mu_prime } => PreparedSource::Coherent(CoherentPulse::new(mu_prime)?),
            SourceParams::TriggeredPdc { g, truncation_order } => {
                PreparedSource::Triggered(ArmDistribution::new(g, truncation_order)?)
            }
        };
        let attack = attack.map(|a| {
            let AttackModel {
                forwarded_efficiency, ..
            } = a.attack_model(channel);
            let fwd = Detector {
                efficiency: forwarded_efficiency,
                dark_count: channel.dark_count,
            };
            (a, fwd)
        });
        Ok(RoundSimulator {
            source: prepared,
            scheme: source.scheme(),
            alice: channel.alice_detector(),
            bob: channel.bob_detector(),
            attack,
            basis_plus_probability: 0.5,
        })
    }

    /// Probability of choosing `+` on each side; 1/2 unless overridden.
    pub fn with_basis_plus_probability(mut self, p: f64) -> Result<Self> {
        self.basis_plus_probability = check_unit("basis_plus_probability", p)?;
        Ok(self)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn run_round(&self, rng: &mut Stream) -> RoundRecord {
        match &self.source {
            PreparedSource::Pairs { .. } => self.run_ep_round(rng),
            PreparedSource::Coherent(_) => self.run_wcs_round(rng),
            PreparedSource::Triggered(_) => self.run_pdc_round(rng),
        }
    }

    fn draw_basis<R: Rng + ?Sized>(&self, rng: &mut R) -> Basis {
        if rng.random::<f64>() < self.basis_plus_probability {
            Basis::Plus
        } else {
            Basis::Cross
        }
    }

    /// Passes Bob's arm through Eve (if present) and his detectors.
    fn deliver<R: Rng + ?Sized>(&self, rng: &mut R, arm: (u32, u32)) -> (Option<EveRecord>, ClickOutcome) {
        match &self.attack {
            None => (None, self.bob.detect(rng, arm.0, arm.1)),
            Some((cfg, fwd)) => {
                let (eve, out) = pns_intercept(rng, arm, cfg);
                let detector = if out == (0, 0) { &self.bob } else { fwd };
                (Some(eve), detector.detect(rng, out.0, out.1))
            }
        }
    }

    /// Entangled-pair round; `None` in `pairs` with `truncation_exceeded`
    /// marks an emission beyond the truncation order.
    pub fn run_ep_round(&self, rng: &mut Stream) -> RoundRecord {
        let PreparedSource::Pairs { table, mismatched } = &self.source else {
            panic!("run_ep_round on a {} simulator", self.scheme);
        };
        let mut rec = RoundRecord::empty(Scheme::EntangledPairs);
        let Some(pairs) = table.sample(rng) else {
            rec.truncation_exceeded = true;
            return rec;
        };
        rec.pairs = Some(pairs);
        rec.basis_a = self.draw_basis(rng);
        rec.basis_b = self.draw_basis(rng);
        let t = pairs.total();
        let counts = if rec.bases_match() {
            [pairs.m, pairs.n, pairs.m, pairs.n]
        } else if t == 0 {
            [0; 4]
        } else {
            mismatched[rec.basis_a.index()][t as usize].sample(rng)
        };
        rec.counts = Some(counts);
        rec.outcome_a = self.alice.detect(rng, counts[0], counts[1]);
        let (eve, outcome_b) = self.deliver(rng, (counts[2], counts[3]));
        rec.outcome_b = outcome_b;
        rec.eve = eve;
        rec.sift();
        // Bob's arm counts live in Bob's basis
        let bob_basis = rec.basis_b;
        self.eve_readout(rng, &mut rec, bob_basis);
        rec
    }

    pub fn run_wcs_round(&self, rng: &mut Stream) -> RoundRecord {
        let PreparedSource::Coherent(pulse) = &self.source else {
            panic!("run_wcs_round on a {} simulator", self.scheme);
        };
        let mut rec = RoundRecord::empty(Scheme::WeakCoherent);
        let n = pulse.sample(rng);
        rec.photons = Some(n);
        self.prepare_and_measure(rng, &mut rec, n);
        rec
    }

    pub fn run_pdc_round(&self, rng: &mut Stream) -> RoundRecord {
        let PreparedSource::Triggered(arm) = &self.source else {
            panic!("run_pdc_round on a {} simulator", self.scheme);
        };
        let mut rec = RoundRecord::empty(Scheme::TriggeredPdc);
        let Some(n) = arm.sample(rng) else {
            rec.truncation_exceeded = true;
            return rec;
        };
        rec.photons = Some(n);
        if self.alice.detect(rng, n, 0) == ClickOutcome::NoClick {
            return rec;
        }
        self.prepare_and_measure(rng, &mut rec, n);
        rec
    }

    /// Alice encodes a random bit on all `n` photons in her basis.
    fn prepare_and_measure(&self, rng: &mut Stream, rec: &mut RoundRecord, n: u32) {
        let bit: Bit = rng.random_bool(0.5) as Bit;
        rec.basis_a = self.draw_basis(rng);
        rec.basis_b = self.draw_basis(rng);
        rec.outcome_a = ClickOutcome::Single(bit);
        let arm = if bit == 0 { (n, 0) } else { (0, n) };
        let (eve, forwarded) = match &self.attack {
            None => (None, arm),
            Some((cfg, _)) => {
                let (e, f) = pns_intercept(rng, arm, cfg);
                (Some(e), f)
            }
        };
        let k = forwarded.0 + forwarded.1;
        let at_bob = if rec.bases_match() {
            forwarded
        } else {
            // each photon exits a conjugate analyzer either way with prob 1/2
            let k0 = (0..k).filter(|_| rng.random_bool(0.5)).count() as u32;
            (k0, k - k0)
        };
        let detector = match &self.attack {
            Some((_, fwd)) if k > 0 => fwd,
            _ => &self.bob,
        };
        rec.outcome_b = detector.detect(rng, at_bob.0, at_bob.1);
        rec.eve = eve;
        rec.sift();
        let alice_basis = rec.basis_a;
        self.eve_readout(rng, rec, alice_basis);
    }

    fn eve_readout(&self, rng: &mut Stream, rec: &mut RoundRecord, preparation: Basis) {
        if let Some(eve) = rec.eve.as_mut() {
            if eve.stored_polarization.is_some() {
                let guess = eve_measure_stored(rng, eve, rec.basis_a, preparation);
                eve.guess_bit_alice = guess;
                eve.guess_bit_on_bob = guess;
            }
        }
    }
}

/// Everything needed to run one Monte Carlo point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub source: SourceParams,
    pub channel: ChannelParams,
    pub attack: Option<PnsConfig>,
    pub trials: u64,
    pub master_seed: u64,
    /// 0 selects the default worker count.
    pub workers: usize,
    pub basis_plus_probability: f64,
}

impl Experiment {
    pub fn new(source: SourceParams, channel: ChannelParams, trials: u64, master_seed: u64) -> Self {
        Experiment {
            source,
            channel,
            attack: None,
            trials,
            master_seed,
            workers: 0,
            basis_plus_probability: 0.5,
        }
    }

    pub fn with_attack(mut self, attack: PnsConfig) -> Self {
        self.attack = Some(attack);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.channel.validate()?;
        check_unit("basis_plus_probability", self.basis_plus_probability)?;
        if let Some(a) = &self.attack {
            a.validate()?;
        }
        Ok(())
    }

    pub fn resolve_attack(&self) -> Result<Option<ResolvedPns>> {
        self.attack
            .as_ref()
            .map(|a| a.resolve(&self.source, &self.channel))
            .transpose()
    }

    pub fn simulator(&self) -> Result<RoundSimulator> {
        self.validate()?;
        RoundSimulator::new(&self.source, &self.channel, self.resolve_attack()?)?
            .with_basis_plus_probability(self.basis_plus_probability)
    }

    /// Records of the trials in `range`, in order.
    pub fn records(&self, range: std::ops::Range<u64>) -> Result<Vec<RoundRecord>> {
        let sim = self.simulator()?;
        let streams = StreamFactory::new(self.master_seed);
        Ok(range.map(|i| sim.run_round(&mut streams.stream(i))).collect())
    }
}

/// Default worker count: the environment override, else all cores.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Count vector aggregated over rounds; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTally {
    pub trials: u64,
    pub truncation_exceeded: u64,
    pub matched: u64,
    pub mismatched: u64,
    pub sifted: u64,
    pub errors: u64,
    pub bob_double_matched: u64,
    pub bob_double_mismatched: u64,
    pub bob_no_click: u64,
    pub eve: EveTally,
}

impl RoundTally {
    pub fn record(&mut self, r: &RoundRecord) {
        self.trials += 1;
        if r.truncation_exceeded {
            self.truncation_exceeded += 1;
            return;
        }
        let matched = r.bases_match();
        self.matched += matched as u64;
        self.mismatched += !matched as u64;
        self.sifted += r.sifted as u64;
        self.errors += r.error as u64;
        match r.outcome_b {
            ClickOutcome::DoubleClick if matched => self.bob_double_matched += 1,
            ClickOutcome::DoubleClick => self.bob_double_mismatched += 1,
            ClickOutcome::NoClick => self.bob_no_click += 1,
            ClickOutcome::Single(_) => {}
        }
        self.eve.record(r);
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.trials += other.trials;
        self.truncation_exceeded += other.truncation_exceeded;
        self.matched += other.matched;
        self.mismatched += other.mismatched;
        self.sifted += other.sifted;
        self.errors += other.errors;
        self.bob_double_matched += other.bob_double_matched;
        self.bob_double_mismatched += other.bob_double_mismatched;
        self.bob_no_click += other.bob_no_click;
        self.eve.merge(&other.eve);
        self
    }
}

/// Aggregated Monte Carlo statistics. Rates are per emitted source event;
/// emissions beyond the truncation order count in the denominator but
/// contribute to no numerator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub scheme: Scheme,
    pub trials: u64,
    pub r_key: Option<Estimate>,
    pub r_err: Option<Estimate>,
    /// Errors among sifted bits.
    pub epsilon: Option<Estimate>,
    pub double_click_matched: Option<Estimate>,
    pub double_click_mismatched: Option<Estimate>,
    pub bob_no_click_rate: Option<Estimate>,
    pub attack: Option<ResolvedPns>,
    pub eve: Option<EveEstimates>,
    pub truncation_exceeded_count: u64,
    pub tally: RoundTally,
}

impl RateReport {
    pub fn from_tally(scheme: Scheme, tally: RoundTally, attack: Option<ResolvedPns>) -> Self {
        let n = tally.trials;
        RateReport {
            scheme,
            trials: n,
            r_key: Estimate::binomial(tally.sifted, n),
            r_err: Estimate::binomial(tally.errors, n),
            epsilon: Estimate::binomial(tally.errors, tally.sifted),
            double_click_matched: Estimate::binomial(tally.bob_double_matched, n),
            double_click_mismatched: Estimate::binomial(tally.bob_double_mismatched, n),
            bob_no_click_rate: Estimate::binomial(tally.bob_no_click, n),
            eve: attack.and_then(|_| tally.eve.estimates()),
            attack,
            truncation_exceeded_count: tally.truncation_exceeded,
            tally,
        }
    }
}

/// Runs `experiment.trials` rounds and aggregates them.
pub fn run_experiment(experiment: &Experiment) -> Result<RateReport> {
    let sim = experiment.simulator()?;
    let attack = experiment.resolve_attack()?;
    let streams = StreamFactory::new(experiment.master_seed);
    let trials = experiment.trials;
    let chunks = trials.div_ceil(CHUNK);
    let run_chunk = |c: u64| {
        let mut tally = RoundTally::default();
        for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
            tally.record(&sim.run_round(&mut streams.stream(i)));
        }
        tally
    };
    let workers = match experiment.workers {
        0 => default_workers(),
        w => w,
    };
    let tally = if workers == 1 {
        (0..chunks)
            .map(run_chunk)
            .fold(RoundTally::default(), RoundTally::merge)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Scheme(format!("worker pool: {e}")))?;
        pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(run_chunk)
                .reduce(RoundTally::default, RoundTally::merge)
        })
    };
    Ok(RateReport::from_tally(sim.scheme(), tally, attack))
}
