//! Adaptive climb/descent trajectory prediction.
//!
//! The crate is organised bottom-up:
//!
//! - [`atmosphere`]: ISA quantities and airspeed conversions.
//! - [`perfmodel`]: an open total-energy performance model and its RK4 integrator.
//! - [`lssm`]: the two-state discrete linear surrogate, discretisation and fit cost.
//! - [`optimizer`]: Nelder-Mead, single-trajectory identification and prior-set building.
//! - [`lwpf`]: the Liu-West particle filter with ensemble trajectory prediction.
//! - [`kalman`]: the constant-rate Kalman benchmark predictor.
//! - [`dataio`]: blips, trajectories, CSV I/O, day splits and the synthetic corpus.
//! - [`eval`]: metrics, method replay, hyperparameter sweeps and the speed benchmark.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atmosphere;
pub mod dataio;
pub mod diag;
pub mod eval;
pub mod kalman;
pub mod lssm;
pub mod lwpf;
pub mod optimizer;
pub mod perfmodel;
pub mod units;

mod error;

pub use error::{Error, Result};

/// Radar blip cadence in seconds.
pub const BLIP_DT: f64 = 6.0;

/// Legal minimum rate of climb or descent, ft/min. Predicted trajectories
/// slower than this count as failures.
pub const MIN_ROCD_FPM: f64 = 500.0;

/// Flight phase of a trajectory segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Climb,
    Descent,
}

impl Phase {
    /// +1 for climb, -1 for descent.
    pub fn sign(self) -> f64 {
        match self {
            Phase::Climb => 1.0,
            Phase::Descent => -1.0,
        }
    }

    /// True once `h` is at or beyond `target` in the direction of travel.
    pub fn reached(self, h: f64, target: f64) -> bool {
        match self {
            Phase::Climb => h >= target,
            Phase::Descent => h <= target,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Climb => "climb",
            Phase::Descent => "descent",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "climb" => Ok(Phase::Climb),
            "descent" => Ok(Phase::Descent),
            other => Err(Error::Format(format!("unknown phase '{other}'"))),
        }
    }
}

/// Stable 64-bit FNV-1a hash, used to derive per-item seeds that do not
/// depend on iteration order.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Mixes a base seed with an item key.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    let mut z = seed ^ stable_hash(key);
    // splitmix64 finaliser
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
