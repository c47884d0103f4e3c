//! Finite discrete distributions over integer time values.
//!
//! Probabilities are kept as exact rationals so that two states reached
//! through the same per-route history compare bit-equal, which is what
//! state deduplication in the MDP builder relies on.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModelError;

/// Probability distribution over integer times `0..=N`.
///
/// Entries sum to 1 (within 1e-9 when constructed from floats; exactly
/// thereafter, since every internal operation is rational arithmetic).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProbVec {
    mass: Vec<BigRational>,
}

// On the wire a distribution is a dense float array indexed from time 0.
impl Serialize for ProbVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_floats().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ProbVec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(deserializer)?;
        ProbVec::from_floats(&probs).map_err(D::Error::custom)
    }
}

impl ProbVec {
    /// Builds a distribution from float probabilities indexed by time.
    pub fn from_floats(probs: &[f64]) -> Result<Self, ModelError> {
        if probs.len() < 2 {
            return Err(ModelError::InvalidDistribution(
                "support bound must be at least 1".into(),
            ));
        }
        let mut mass = Vec::with_capacity(probs.len());
        for (i, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(ModelError::InvalidDistribution(format!(
                    "entry {i} = {p} outside [0, 1]"
                )));
            }
            mass.push(BigRational::from_float(p).ok_or_else(|| {
                ModelError::InvalidDistribution(format!("entry {i} = {p} not finite"))
            })?);
        }
        let v = Self { mass };
        let total = v.total_mass().to_f64().unwrap_or(f64::NAN);
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidDistribution(format!(
                "entries sum to {total}, expected 1"
            )));
        }
        Ok(v)
    }

    pub fn from_rationals(mass: Vec<BigRational>) -> Self {
        Self { mass }
    }

    /// Point mass at time 0, i.e. the completed-request distribution.
    pub fn completed(len: usize) -> Self {
        let mut mass = vec![BigRational::zero(); len];
        mass[0] = BigRational::one();
        Self { mass }
    }

    /// Empirical distribution `counts[i] / total`.
    pub fn from_counts(counts: &[u64], total: u64) -> Self {
        let mass = counts
            .iter()
            .map(|&c| BigRational::new(BigInt::from(c), BigInt::from(total)))
            .collect();
        Self { mass }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Largest index `N` of the support bound (distribution covers `0..=N`).
    pub fn bound(&self) -> usize {
        self.mass.len() - 1
    }

    pub fn get(&self, i: usize) -> &BigRational {
        &self.mass[i]
    }

    pub fn get_f64(&self, i: usize) -> f64 {
        self.mass[i].to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_floats(&self) -> Vec<f64> {
        self.mass
            .iter()
            .map(|r| r.to_f64().unwrap_or(f64::NAN))
            .collect()
    }

    pub fn total_mass(&self) -> BigRational {
        self.mass.iter().sum()
    }

    /// True iff all mass sits at index 0.
    pub fn is_point_at_zero(&self) -> bool {
        self.mass[0].is_one()
    }

    /// Number of entries with nonzero probability.
    pub fn nonzero_count(&self) -> usize {
        self.mass.iter().filter(|p| !p.is_zero()).count()
    }

    /// Degenerate immediate distribution `{1, 0, ..., 0}`.
    pub fn is_degenerate_immediate(&self) -> bool {
        self.is_point_at_zero()
    }

    /// Index shift: `v'[n] = v[n+1]`, `v'[N] = 0`.
    ///
    /// Used for the deterministic decrement when no event branch applies
    /// (`v[1] = 0`). Rejects vectors whose shift would drop nonzero mass
    /// off index 0, which signals a semantics bug in the caller.
    pub fn shift_decrement(&self) -> Result<Self, ModelError> {
        if !self.mass[0].is_zero() {
            return Err(ModelError::InvalidShift);
        }
        let mut mass: Vec<BigRational> = self.mass[1..].to_vec();
        mass.push(BigRational::zero());
        Ok(Self { mass })
    }

    /// Conditions the distribution on the event at time 1 not occurring.
    ///
    /// Returns the non-event successor and the event probability `v[1]`.
    /// The successor is the shifted vector with the completed mass at
    /// index 0 zeroed and `v[1] / (|v_nz| - 1)` added to each remaining
    /// nonzero entry, so that it sums to 1 again.
    pub fn condition_nonevent(&self) -> Result<(Self, BigRational), ModelError> {
        let event_prob = self.mass[1].clone();
        if event_prob.is_zero() {
            return Err(ModelError::InvalidDistribution(
                "condition_nonevent requires v[1] > 0".into(),
            ));
        }
        let nz = self.nonzero_count();
        if nz < 2 {
            return Err(ModelError::EventCertain);
        }
        let mut shifted: Vec<BigRational> = self.mass[1..].to_vec();
        shifted.push(BigRational::zero());
        shifted[0] = BigRational::zero();
        let boost = &event_prob / BigRational::from_integer(BigInt::from(nz as i64 - 1));
        for p in shifted.iter_mut() {
            if !p.is_zero() {
                *p += &boost;
            }
        }
        Ok((Self { mass: shifted }, event_prob))
    }

    /// Checks the ProbVec invariants, naming the offending entry.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.mass.len() < 2 {
            return Err(ModelError::InvalidDistribution(
                "support bound must be at least 1".into(),
            ));
        }
        for (i, p) in self.mass.iter().enumerate() {
            if p.is_negative() || p > &BigRational::one() {
                return Err(ModelError::InvalidDistribution(format!(
                    "entry {i} outside [0, 1]"
                )));
            }
        }
        let total = self.total_mass().to_f64().unwrap_or(f64::NAN);
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidDistribution(format!(
                "entries sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}
