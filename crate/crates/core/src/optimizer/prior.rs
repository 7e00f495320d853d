use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_trajectory, SimplexConfig};
use crate::dataio::Trajectory;
use crate::lssm::{rollout, Lssm, ModelRecord, ScalingMatrix, Segment, Theta, RECORD_HEADER};
use crate::perfmodel::AircraftConfig;
use crate::{Error, Phase, Result, BLIP_DT};

/// Fewest blips a fitted segment may have.
pub const MIN_SEGMENT_BLIPS: usize = 10;
/// Half-width of the search window around the nominal crossover, ft.
const SPLIT_WINDOW_FT: f64 = 4_000.0;

/// The fitted model collection, grouped by aircraft type and phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriorSet {
    pub entries: Vec<ModelRecord>,
}

impl PriorSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn group(&self, aircraft_type: &str, phase: Phase) -> Vec<&ModelRecord> {
        self.entries.iter().filter(|r| r.aircraft_type == aircraft_type && r.phase == phase).collect()
    }

    pub fn thetas(&self, aircraft_type: &str, phase: Phase) -> Vec<Theta> {
        self.group(aircraft_type, phase).iter().map(|r| r.model.theta()).collect()
    }

    /// Entry counts keyed `type/phase`.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.entries {
            *out.entry(format!("{}/{}", r.aircraft_type, r.phase)).or_insert(0) += 1;
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{RECORD_HEADER}")?;
        for r in &self.entries {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Parses model records, skipping blank lines and `#` comments.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let s = line.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let rec: ModelRecord = s.parse().map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
            entries.push(rec);
        }
        Ok(PriorSet { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(fs::File::open(path)?))
    }
}

/// One row of the fit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub trajectory_id: String,
    pub aircraft_type: String,
    pub phase: Phase,
    pub segment: Segment,
    pub n_blips: usize,
    pub iters: usize,
    pub evals: usize,
    pub init_cost: f64,
    pub final_cost: f64,
    pub status: String,
}

pub fn write_fit_log<W: Write>(records: &[FitRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

fn slice(traj: &Trajectory, range: std::ops::Range<usize>) -> Trajectory {
    Trajectory { blips: traj.blips[range].to_vec(), ..traj.clone() }
}

/// Least-squares slope and residual sum of squares of TAS against altitude.
fn line_fit(traj: &Trajectory, range: std::ops::Range<usize>) -> (f64, f64) {
    let pts = &traj.blips[range];
    let n = pts.len() as f64;
    let mh = pts.iter().map(|b| b.h).sum::<f64>() / n;
    let mv = pts.iter().map(|b| b.tas).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|b| (b.h - mh).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|b| (b.h - mh) * (b.tas - mv)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse = pts.iter().map(|b| (b.tas - mv - slope * (b.h - mh)).powi(2)).sum();
    (slope, sse)
}

/// Splits a trajectory into the parts below and above the CAS/Mach
/// crossover.
///
/// The break is the blip near `crossover_ft` that best separates a rising
/// TAS-altitude line from a flat or falling one. Trajectories without a
/// clear break, or whose parts would be shorter than
/// [`MIN_SEGMENT_BLIPS`], come back whole.
pub fn split_segments(traj: &Trajectory, crossover_ft: Option<f64>) -> Vec<(Segment, Trajectory)> {
    let whole = || vec![(Segment::Whole, traj.clone())];
    let Some(x) = crossover_ft else { return whole() };
    let n = traj.blips.len();
    if n < 2 * MIN_SEGMENT_BLIPS {
        return whole();
    }
    let below_first = traj.blips[0].h < traj.blips[n - 1].h;
    let mut best: Option<(usize, f64)> = None;
    for k in MIN_SEGMENT_BLIPS..=n - MIN_SEGMENT_BLIPS {
        if (traj.blips[k].h - x).abs() > SPLIT_WINDOW_FT {
            continue;
        }
        let (s_left, e_left) = line_fit(traj, 0..k);
        let (s_right, e_right) = line_fit(traj, k..n);
        let (s_below, s_above) = if below_first { (s_left, s_right) } else { (s_right, s_left) };
        if !(s_below > 0.0 && s_above < 0.5 * s_below) {
            continue;
        }
        let sse = e_left + e_right;
        if best.is_none_or(|(_, b)| sse < b) {
            best = Some((k, sse));
        }
    }
    let Some((k, _)) = best else { return whole() };
    let (first, second) = (slice(traj, 0..k), slice(traj, k..n));
    if below_first {
        vec![(Segment::Below, first), (Segment::Above, second)]
    } else {
        vec![(Segment::Above, first), (Segment::Below, second)]
    }
}

/// Fits every trajectory segment and collects the successes.
///
/// When `fleet` has a config for a trajectory's type, the trajectory is split
/// near that type's crossover; otherwise it is fitted whole. Fits run in
/// parallel and merge in input order. Failures are logged and skipped.
pub fn build_prior(
    dataset: &[Trajectory],
    fleet: &[AircraftConfig],
    scale: &ScalingMatrix,
    cfg: &SimplexConfig,
) -> Result<(PriorSet, Vec<FitRecord>)> {
    if dataset.is_empty() {
        return Err(Error::Input("no trajectories to fit".into()));
    }
    cfg.validate()?;
    let init = Lssm::constant_rate(0.0, 0.0, BLIP_DT);
    let results: Vec<Vec<(FitRecord, Option<ModelRecord>)>> = dataset
        .par_iter()
        .map(|traj| {
            let crossover =
                fleet.iter().find(|c| c.type_code == traj.aircraft_type).and_then(|c| c.schedule(traj.phase).crossover_ft().ok());
            split_segments(traj, crossover)
                .into_iter()
                .filter(|(_, seg)| seg.blips.len() >= MIN_SEGMENT_BLIPS)
                .map(|(segment, seg)| fit_segment(traj, segment, &seg, &init, scale, cfg))
                .collect()
        })
        .collect();

    let mut prior = PriorSet::default();
    let mut log = Vec::new();
    for (rec, model) in results.into_iter().flatten() {
        if let Some(m) = model {
            prior.entries.push(m);
        } else {
            warn!("fit failed for {} ({}): {}", rec.trajectory_id, rec.segment.as_str(), rec.status);
        }
        log.push(rec);
    }
    if prior.is_empty() {
        return Err(Error::EmptyPrior(format!("none of {} fits succeeded", log.len())));
    }
    Ok((prior, log))
}

fn fit_segment(
    traj: &Trajectory,
    segment: Segment,
    seg: &Trajectory,
    init: &Lssm,
    scale: &ScalingMatrix,
    cfg: &SimplexConfig,
) -> (FitRecord, Option<ModelRecord>) {
    let mut rec = FitRecord {
        trajectory_id: traj.id.clone(),
        aircraft_type: traj.aircraft_type.clone(),
        phase: traj.phase,
        segment,
        n_blips: seg.blips.len(),
        iters: 0,
        evals: 0,
        init_cost: f64::NAN,
        final_cost: f64::NAN,
        status: "ok".into(),
    };
    let seeded = SimplexConfig { seed: crate::derive_seed(cfg.seed, segment.as_str()), ..*cfg };
    let outcome = fit_trajectory(seg, init, scale, &seeded).and_then(|o| {
        rollout(&o.model, seg.blips[0].state(), seg.blips.len() - 1)
            .map_err(|e| Error::FitFailure(format!("fitted model unstable: {e}")))?;
        Ok(o)
    });
    match outcome {
        Ok(o) => {
            rec.iters = o.iters;
            rec.evals = o.evals;
            rec.init_cost = o.init_cost;
            rec.final_cost = o.final_cost;
            let model = ModelRecord {
                aircraft_type: traj.aircraft_type.clone(),
                phase: traj.phase,
                segment,
                source_id: traj.id.clone(),
                final_cost: o.final_cost,
                model: o.model,
            };
            (rec, Some(model))
        }
        Err(e) => {
            rec.status = format!("failed: {e}");
            (rec, None)
        }
    }
}
