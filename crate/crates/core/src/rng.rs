//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(seed, index, purpose)`. The ChaCha key comes from the seed and the 64-bit
//! stream id from `(index, purpose)`, so draws for one replication or one
//! simulation path never depend on how many others ran before it or on which
//! thread ran them.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// What a stream is used for. Distinct purposes never share values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Outcome and regressor draws for a synthetic data set.
    Data = 1,
    /// Simulation shocks for the indirect estimator.
    Shocks = 2,
    /// Shock paths inside a [`crate::ife::ShockStore`].
    Path = 3,
}

const PURPOSE_BITS: u32 = 4;

/// A stream for `(seed, index, purpose)`.
pub fn stream(seed: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((index << PURPOSE_BITS) | purpose as u64);
    rng
}

/// A derived 64-bit seed for `(seed, index, purpose)`, used when a whole
/// sub-experiment (e.g. one replication's shock store) needs its own seed.
pub fn derive_seed(seed: u64, index: u64, purpose: Purpose) -> u64 {
    stream(seed, index, purpose).next_u64()
}

/// Maps 64 random bits to the open interval (0, 1): the top 53 bits are
/// centred in their cell, so neither endpoint is reachable. For `f32` the
/// result is pulled back inside the interval after rounding.
#[inline]
pub fn open_unit<S: Scalar>(bits: u64) -> S {
    let u = ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    let s = S::lit(u);
    if s >= S::one() {
        S::one() - S::epsilon()
    } else if s <= S::zero() {
        S::min_positive_value()
    } else {
        s
    }
}

/// Standard normal by inversion.
#[inline]
pub fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    crate::special::norm_quantile(open_unit::<f64>(rng.next_u64()))
}

#[inline]
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * open_unit::<f64>(rng.next_u64())
}
