//! Per-blip JSON-lines diagnostics for single-trajectory replays.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dataio::{Blip, Trajectory};
use crate::kalman::{KalmanTracker, KfConfig};
use crate::lwpf::{EnsemblePrediction, FanPoint, LiuWestFilter, PredictionStatus};
use crate::{Error, Result};

pub const METHOD_LWPF: &str = "lwpf";
pub const METHOD_KF: &str = "kf-tp";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagState {
    pub h_ft: f64,
    pub tas_kt: f64,
    /// Absent for the particle filter, which does not track ROCD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rocd_fpm: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagEvents {
    pub resampled: bool,
    pub reinit: bool,
    /// Every likelihood underflowed and the weights were reset.
    pub degenerate: bool,
    /// Particles whose propagated state went non-finite.
    pub flagged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagPrediction {
    pub status: PredictionStatus,
    pub mean_time_s: f64,
    pub sd_time_s: f64,
    pub mean_distance_nmi: f64,
    pub sd_distance_nmi: f64,
    pub nonterminal_frac: f64,
}

impl From<&EnsemblePrediction> for DiagPrediction {
    fn from(e: &EnsemblePrediction) -> Self {
        DiagPrediction {
            status: e.status,
            mean_time_s: e.mean_time_s,
            sd_time_s: e.sd_time_s,
            mean_distance_nmi: e.mean_distance_nmi,
            sd_distance_nmi: e.sd_distance_nmi,
            nonterminal_frac: e.nonterminal_frac,
        }
    }
}

/// One line of a diagnostics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub method: String,
    pub trajectory_id: String,
    pub index: usize,
    pub t_s: f64,
    pub observation: DiagState,
    pub estimate: DiagState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_eff: Option<f64>,
    pub events: DiagEvents,
    /// Time and distance to the target; absent on failure.
    pub prediction: Option<DiagPrediction>,
    pub failure: Option<String>,
    /// Ensemble altitude and TAS envelope per prediction step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fan: Vec<FanPoint>,
}

fn observed(b: &Blip) -> DiagState {
    DiagState { h_ft: b.h, tas_kt: b.tas, rocd_fpm: Some(b.rocd) }
}

/// Replays a trajectory through a particle filter, predicting the capture
/// point after every blip. One record per blip.
pub fn lwpf_diagnostics(traj: &Trajectory, mut filter: LiuWestFilter, with_fan: bool) -> Result<Vec<DiagRecord>> {
    let mut out = Vec::with_capacity(traj.blips.len());
    for (k, b) in traj.blips.iter().enumerate() {
        let rep = filter.assimilate(b.state())?;
        let (prediction, failure, fan) = match filter.predict_to(traj.h_target, traj.phase, with_fan) {
            Ok(e) => (Some(DiagPrediction::from(&e)), None, e.fan),
            Err(Error::PredictionFailure(msg)) => (None, Some(msg), Vec::new()),
            Err(e) => return Err(e),
        };
        out.push(DiagRecord {
            method: METHOD_LWPF.into(),
            trajectory_id: traj.id.clone(),
            index: k,
            t_s: b.t,
            observation: observed(b),
            estimate: DiagState { h_ft: rep.estimate.h, tas_kt: rep.estimate.tas, rocd_fpm: None },
            n_eff: Some(rep.n_eff),
            events: DiagEvents { resampled: rep.resampled, reinit: rep.reinit, degenerate: rep.degenerate, flagged: rep.flagged },
            prediction,
            failure,
            fan,
        });
    }
    Ok(out)
}

/// Replays a trajectory through the Kalman benchmark. One record per blip.
pub fn kf_diagnostics(traj: &Trajectory, cfg: KfConfig) -> Result<Vec<DiagRecord>> {
    let mut kf = KalmanTracker::new(cfg, traj.phase)?;
    let mut out = Vec::with_capacity(traj.blips.len());
    for (k, b) in traj.blips.iter().enumerate() {
        let s = *kf.assimilate(b)?;
        let (prediction, failure) = match kf.predict_to(traj.h_target).expect("state after assimilation") {
            Ok((time, dist)) => (
                Some(DiagPrediction {
                    status: if time == 0.0 { PredictionStatus::Reached } else { PredictionStatus::Predicted },
                    mean_time_s: time,
                    sd_time_s: 0.0,
                    mean_distance_nmi: dist,
                    sd_distance_nmi: 0.0,
                    nonterminal_frac: 0.0,
                }),
                None,
            ),
            Err(f) => (None, Some(f.to_string())),
        };
        out.push(DiagRecord {
            method: METHOD_KF.into(),
            trajectory_id: traj.id.clone(),
            index: k,
            t_s: b.t,
            observation: observed(b),
            estimate: DiagState { h_ft: s.h(), tas_kt: s.tas(), rocd_fpm: Some(s.rocd()) },
            n_eff: None,
            events: DiagEvents::default(),
            prediction,
            failure,
            fan: Vec::new(),
        });
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(records: &[DiagRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<DiagRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}
