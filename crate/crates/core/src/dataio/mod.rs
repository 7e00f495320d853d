//! Blips, trajectories, the trajectory CSV format, day-level splitting and
//! the synthetic corpus generator.

mod corpus;
mod csvio;
mod split;

pub use corpus::{default_type_counts, generate_corpus, reference_span, CorpusJitter, TypeCounts};
pub use csvio::{read_trajectories, read_trajectories_from, write_trajectories, write_trajectories_to};
pub use split::{split_by_day, DatasetSplit};

use serde::{Deserialize, Serialize};

use crate::lssm::StateVec;
use crate::perfmodel::AircraftConfig;
use crate::{Error, Phase, Result, BLIP_DT};

/// One radar return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blip {
    /// Seconds since trajectory start.
    pub t: f64,
    /// Altitude, ft.
    pub h: f64,
    /// True airspeed, kt.
    pub tas: f64,
    /// Rate of climb/descent, ft/min.
    pub rocd: f64,
}

impl Blip {
    pub fn state(&self) -> StateVec {
        StateVec::new(self.h, self.tas)
    }
}

/// A pre-segmented climb or descent at fixed blip cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub aircraft_type: String,
    pub phase: Phase,
    pub day: String,
    pub blips: Vec<Blip>,
    pub h_target: f64,
}

impl Trajectory {
    pub(crate) fn reference(cfg: &AircraftConfig, phase: Phase, blips: Vec<Blip>, h_target: f64) -> Self {
        Trajectory {
            id: format!("{}-{}-ref", cfg.type_code, phase),
            aircraft_type: cfg.type_code.clone(),
            phase,
            day: "ref".into(),
            blips,
            h_target,
        }
    }

    pub fn len(&self) -> usize {
        self.blips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blips.is_empty()
    }

    pub fn states(&self) -> Vec<StateVec> {
        self.blips.iter().map(Blip::state).collect()
    }

    /// Checks time ordering, blip cadence, finiteness and phase direction.
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Format(format!("trajectory {}: {msg}", self.id)));
        for (i, b) in self.blips.iter().enumerate() {
            if ![b.t, b.h, b.tas, b.rocd].iter().all(|v| v.is_finite()) {
                return err(format!("blip {i} has non-finite fields"));
            }
        }
        for (i, w) in self.blips.windows(2).enumerate() {
            let gap = w[1].t - w[0].t;
            if gap <= 0.0 {
                return err(format!("time not increasing at blip {}", i + 1));
            }
            if (gap - BLIP_DT).abs() > 1e-6 {
                return err(format!("cadence violation at blip {}: gap {gap} s", i + 1));
            }
        }
        if let (Some(first), Some(last)) = (self.blips.first(), self.blips.last()) {
            if self.blips.len() > 1 && (last.h - first.h) * self.phase.sign() < 0.0 {
                return err(format!("{} label contradicts altitude change", self.phase));
            }
        }
        Ok(())
    }
}
