//! Exact photon-count statistics of the truncated two-crystal state.
//!
//! A state is a sparse map from four-mode occupations
//! `(A mode0, A mode1, B mode0, B mode1)` to complex amplitudes. In the `+`
//! basis mode0/mode1 are V/H; in the `x` basis they are X/Y with
//! `a_X = (a_V + a_H)/sqrt 2` and `a_Y = (a_V - a_H)/sqrt 2`.
//!
//! Photon number per side is conserved by a basis change and the detectors
//! are number-diagonal, so the count distribution is the squared modulus of
//! the merged amplitudes after rotation.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::source_model::Gain;

/// Amplitudes below this magnitude are dropped after a merge.
pub const PRUNE_TOLERANCE: f64 = 1e-14;

/// Occupation tuple `(a0, a1, b0, b1)`.
pub type Occupation = [u32; 4];

/// Polarization analyzer setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Rectilinear, modes V/H.
    Plus,
    /// Diagonal, modes X/Y.
    Cross,
}

impl Basis {
    pub fn conjugate(self) -> Self {
        match self {
            Basis::Plus => Basis::Cross,
            Basis::Cross => Basis::Plus,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Basis::Plus => 0,
            Basis::Cross => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl Side {
    fn offset(self) -> usize {
        match self {
            Side::A => 0,
            Side::B => 2,
        }
    }
}

/// Truncated four-mode superposition with per-side basis labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FockSuperposition {
    terms: BTreeMap<Occupation, Complex64>,
    bases: [Basis; 2],
}

impl FockSuperposition {
    /// Builds a normalized state from raw terms in the `+/+` basis,
    /// merging duplicate occupations.
    pub fn from_terms(terms: impl IntoIterator<Item = (Occupation, Complex64)>) -> Self {
        let mut map: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (occ, amp) in terms {
            *map.entry(occ).or_default() += amp;
        }
        let mut state = FockSuperposition {
            terms: map,
            bases: [Basis::Plus, Basis::Plus],
        };
        state.prune();
        state.normalize();
        state
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, occ: Occupation) -> Complex64 {
        self.terms.get(&occ).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn basis(&self, side: Side) -> Basis {
        self.bases[side.offset() / 2]
    }

    pub fn norm_squared(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Projection onto the sector with `total` photons on each side,
    /// renormalized. Empty if the sector carries no amplitude.
    pub fn sector(&self, total: u32) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(occ, _)| occ[0] + occ[1] == total && occ[2] + occ[3] == total)
            .map(|(o, a)| (*o, *a))
            .collect();
        let mut s = FockSuperposition {
            terms,
            bases: self.bases,
        };
        s.normalize();
        s
    }

    fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm() >= PRUNE_TOLERANCE);
    }

    fn normalize(&mut self) {
        let norm = self.norm_squared().sqrt();
        if norm > 0.0 {
            for a in self.terms.values_mut() {
                *a /= norm;
            }
        }
    }
}

/// Two-crystal state with all terms up to `truncation` pairs, amplitudes
/// `xi^2 g^(m+n)` renormalized over the retained terms.
pub fn build_state(gain: Gain, truncation: u32) -> FockSuperposition {
    let g = gain.value();
    let xi2 = gain.xi_squared();
    let mut terms = Vec::new();
    for t in 0..=truncation {
        for m in 0..=t {
            let n = t - m;
            terms.push(([m, n, m, n], Complex64::new(xi2 * g.powi(t as i32), 0.0)));
        }
    }
    FockSuperposition::from_terms(terms)
}

/// The six-term state with at most two pairs.
pub fn build_truncated_state(gain: Gain) -> FockSuperposition {
    build_state(gain, 2)
}

/// Normalized `total`-pair sector of the two-crystal state. All its terms
/// carry the same amplitude, so it does not depend on the gain.
pub fn pair_sector_state(total: u32) -> FockSuperposition {
    FockSuperposition::from_terms((0..=total).map(|m| {
        let n = total - m;
        ([m, n, m, n], Complex64::new(1.0, 0.0))
    }))
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Amplitudes of `|j, K-j>` in the rotated modes for the input `|k0, k1>`.
fn rotate_modes(k0: u32, k1: u32) -> Vec<(u32, f64)> {
    let total = k0 + k1;
    let scale = (factorial(k0) * factorial(k1)).sqrt() * 2f64.powf(total as f64 / 2.0);
    (0..=total)
        .filter_map(|j| {
            // coefficient of x^j y^(K-j) in (x + y)^k0 (x - y)^k1
            let coeff: f64 = (0..=k1.min(j))
                .filter(|&l| j - l <= k0)
                .map(|l| {
                    let sign = if (k1 - l).is_multiple_of(2) { 1.0 } else { -1.0 };
                    sign * binomial(k0, j - l) * binomial(k1, l)
                })
                .sum();
            (coeff != 0.0).then(|| {
                let amp = coeff * (factorial(j) * factorial(total - j)).sqrt() / scale;
                (j, amp)
            })
        })
        .collect()
}

/// Changes the analyzer basis on one side, toggling its label.
pub fn rotate_side(state: &FockSuperposition, side: Side) -> FockSuperposition {
    let off = side.offset();
    let mut terms: BTreeMap<Occupation, Complex64> = BTreeMap::new();
    for (occ, amp) in &state.terms {
        let (k0, k1) = (occ[off], occ[off + 1]);
        let total = k0 + k1;
        for (j, c) in rotate_modes(k0, k1) {
            let mut out = *occ;
            out[off] = j;
            out[off + 1] = total - j;
            *terms.entry(out).or_default() += amp * c;
        }
    }
    let mut bases = state.bases;
    bases[off / 2] = bases[off / 2].conjugate();
    let mut rotated = FockSuperposition { terms, bases };
    rotated.prune();
    rotated
}

/// Probability table over photon-count tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCountDistribution {
    pub entries: BTreeMap<Occupation, f64>,
}

impl JointCountDistribution {
    pub fn probability(&self, occ: Occupation) -> f64 {
        self.entries.get(&occ).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Distribution of side A's counts `(a0, a1)` alone.
    pub fn marginal_a(&self) -> BTreeMap<[u32; 2], f64> {
        let mut out = BTreeMap::new();
        for (occ, p) in &self.entries {
            *out.entry([occ[0], occ[1]]).or_insert(0.0) += p;
        }
        out
    }

    /// Largest entry-wise absolute difference against `other`.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        self.entries
            .keys()
            .chain(other.entries.keys())
            .map(|&k| (self.probability(k) - other.probability(k)).abs())
            .fold(0.0, f64::max)
    }

    pub fn sampler(&self) -> CountSampler {
        let outcomes: Vec<Occupation> = self.entries.keys().copied().collect();
        let mut acc = 0.0;
        let cumulative = self
            .entries
            .values()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        CountSampler { outcomes, cumulative }
    }
}

/// Inverse-CDF sampler over a [`JointCountDistribution`].
#[derive(Debug, Clone)]
pub struct CountSampler {
    outcomes: Vec<Occupation>,
    cumulative: Vec<f64>,
}

impl CountSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Occupation {
        let total = self.cumulative.last().copied().unwrap_or(0.0);
        let u: f64 = rng.random::<f64>() * total;
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.outcomes.len().saturating_sub(1));
        self.outcomes[idx]
    }
}

/// Count statistics of `state` measured with the given analyzers.
pub fn joint_count_distribution(state: &FockSuperposition, basis_a: Basis, basis_b: Basis) -> JointCountDistribution {
    let mut s = state.clone();
    if s.basis(Side::A) != basis_a {
        s = rotate_side(&s, Side::A);
    }
    if s.basis(Side::B) != basis_b {
        s = rotate_side(&s, Side::B);
    }
    JointCountDistribution {
        entries: s.terms.iter().map(|(o, a)| (*o, a.norm_sqr())).collect(),
    }
}

/// Largest deviation between the `+/+` and `x/x` count tables at the given
/// truncation.
pub fn basis_invariance_deviation(gain: Gain, truncation: u32) -> f64 {
    let state = build_state(gain, truncation);
    let plus = joint_count_distribution(&state, Basis::Plus, Basis::Plus);
    let cross = joint_count_distribution(&state, Basis::Cross, Basis::Cross);
    plus.max_deviation(&cross)
}

/// [`basis_invariance_deviation`] for the two-pair state.
pub fn verify_basis_invariance(g: f64) -> Result<f64> {
    Ok(basis_invariance_deviation(Gain::new(g)?, 2))
}
