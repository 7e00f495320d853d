//! Prediction metrics, method replay, hyperparameter sweeps and the
//! surrogate speed benchmark.

mod bench;
mod report;
mod sweep;

pub use bench::{bench_cases, bench_speedup, BenchCase, BenchRow, BenchTable};
pub use report::{
    read_stream, write_aggregates, write_bench, write_errorbar_data, write_kf_sweep, write_method_table, write_particle_sweep,
    write_scatter_data, write_stream,
};
pub use sweep::{sweep_kf, sweep_particles, KfSweepRow, ParticleSweepRow, PhaseStats, DEFAULT_PARTICLE_COUNTS};

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Blip, Trajectory};
use crate::kalman::{KalmanTracker, KfConfig};
use crate::lwpf::{FilterConfig, LiuWestFilter};
use crate::optimizer::PriorSet;
use crate::perfmodel::{integrate_trajectory, AircraftConfig};
use crate::units::nmi;
use crate::{derive_seed, Error, Phase, Result, BLIP_DT};

/// Aggregate label covering every aircraft type.
pub const ALL_TYPES: &str = "ALL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Nominal performance model integrated once from the first blip.
    BadaT0,
    /// Nominal performance model re-integrated from each measured altitude.
    BadaReinit,
    KfTp,
    Lwpf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::BadaT0, Method::BadaReinit, Method::KfTp, Method::Lwpf];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::BadaT0 => "bada_t0",
            Method::BadaReinit => "bada_reinit",
            Method::KfTp => "kf_tp",
            Method::Lwpf => "lwpf",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL.into_iter().find(|m| m.as_str() == key).ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Scored prediction at one blip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpError {
    pub method: Method,
    pub trajectory_id: String,
    pub aircraft_type: String,
    pub phase: Phase,
    pub blip: usize,
    pub t_s: f64,
    pub pred_time_s: Option<f64>,
    pub pred_distance_nmi: Option<f64>,
    pub truth_time_s: f64,
    pub truth_distance_nmi: f64,
    /// Zero when `failed`.
    pub abs_time_err: f64,
    /// Zero when `failed`.
    pub abs_dist_err: f64,
    pub failed: bool,
    pub failure: Option<String>,
}

/// Summary over one (type, phase) group or over all types of a phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub aircraft_type: String,
    pub phase: Phase,
    /// NaN when nothing was scored.
    pub mae_time_s: f64,
    pub mae_distance_nmi: f64,
    pub failure_rate: f64,
    /// Successful predictions.
    pub n_points: usize,
    pub n_failed: usize,
    pub total: usize,
}

impl Aggregate {
    /// Bitwise comparison, so NaN aggregates compare equal.
    pub fn bit_eq(&self, other: &Aggregate) -> bool {
        self.method == other.method
            && self.aircraft_type == other.aircraft_type
            && self.phase == other.phase
            && self.mae_time_s.to_bits() == other.mae_time_s.to_bits()
            && self.mae_distance_nmi.to_bits() == other.mae_distance_nmi.to_bits()
            && self.failure_rate.to_bits() == other.failure_rate.to_bits()
            && (self.n_points, self.n_failed, self.total) == (other.n_points, other.n_failed, other.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    /// Sorted by trajectory id, then blip.
    pub stream: Vec<TpError>,
    pub aggregates: Vec<Aggregate>,
    /// Trajectories without a defined truth.
    pub excluded: Vec<String>,
}

impl MethodResult {
    pub fn from_stream(method: Method, mut stream: Vec<TpError>, excluded: Vec<String>) -> Self {
        stream.sort_by(|a, b| a.trajectory_id.cmp(&b.trajectory_id).then(a.blip.cmp(&b.blip)));
        let aggregates = aggregate(method, &stream);
        MethodResult { method, stream, aggregates, excluded }
    }

    pub fn get(&self, aircraft_type: &str, phase: Phase) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.aircraft_type == aircraft_type && a.phase == phase)
    }

    /// Aggregate over all types of a phase.
    pub fn overall(&self, phase: Phase) -> Option<&Aggregate> {
        self.get(ALL_TYPES, phase)
    }
}

/// Per-type aggregates followed by the all-types row, for each phase present
/// in the stream. Entries for other methods are ignored.
pub fn aggregate(method: Method, stream: &[TpError]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(Phase, String), Vec<&TpError>> = BTreeMap::new();
    for e in stream.iter().filter(|e| e.method == method) {
        groups.entry((e.phase, e.aircraft_type.clone())).or_default().push(e);
        groups.entry((e.phase, ALL_TYPES.to_string())).or_default().push(e);
    }
    let mut out: Vec<Aggregate> =
        groups.into_iter().map(|((phase, aircraft_type), es)| summarise(method, aircraft_type, phase, &es)).collect();
    // All-types row last within each phase.
    out.sort_by(|a, b| a.phase.cmp(&b.phase).then((a.aircraft_type == ALL_TYPES).cmp(&(b.aircraft_type == ALL_TYPES))));
    out
}

fn summarise(method: Method, aircraft_type: String, phase: Phase, es: &[&TpError]) -> Aggregate {
    let total = es.len();
    let ok: Vec<&&TpError> = es.iter().filter(|e| !e.failed).collect();
    let n_points = ok.len();
    let mean = |f: fn(&TpError) -> f64| {
        if n_points == 0 {
            f64::NAN
        } else {
            ok.iter().map(|e| f(e)).sum::<f64>() / n_points as f64
        }
    };
    Aggregate {
        method,
        aircraft_type,
        phase,
        mae_time_s: mean(|e| e.abs_time_err),
        mae_distance_nmi: mean(|e| e.abs_dist_err),
        failure_rate: if total == 0 { 0.0 } else { (total - n_points) as f64 / total as f64 },
        n_points,
        n_failed: total - n_points,
        total,
    }
}

/// Ground truth for the capture point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// Time of reaching the target, s since trajectory start.
    pub time_s: f64,
    /// Flown distance up to that time, nmi.
    pub distance_nmi: f64,
    /// Index of the first blip at or past the target.
    pub reached_index: usize,
    /// Cumulative flown distance at each blip up to `reached_index - 1`.
    pub cumulative_nmi: Vec<f64>,
}

impl Truth {
    /// Remaining time and distance at blip `k` (before the target is reached).
    pub fn remaining(&self, traj: &Trajectory, k: usize) -> (f64, f64) {
        (self.time_s - traj.blips[k].t, self.distance_nmi - self.cumulative_nmi[k])
    }
}

/// Time and flown distance to the target altitude. The crossing time is
/// linearly interpolated between straddling blips and distance is the
/// trapezoidal integral of TAS up to it.
pub fn truth_toc_bod(traj: &Trajectory) -> Result<(f64, f64)> {
    truth(traj).map(|t| (t.time_s, t.distance_nmi))
}

/// See [`truth_toc_bod`].
pub fn truth(traj: &Trajectory) -> Result<Truth> {
    let b = &traj.blips;
    let j = b
        .iter()
        .position(|x| traj.phase.reached(x.h, traj.h_target))
        .ok_or_else(|| Error::TruthUndefined(format!("trajectory {} never reaches {:.0} ft", traj.id, traj.h_target)))?;
    let mut cumulative = Vec::with_capacity(j);
    let mut d = 0.0;
    if j > 0 {
        cumulative.push(0.0);
    }
    for k in 1..j {
        d += trapezoid(&b[k - 1], &b[k]);
        cumulative.push(d);
    }
    if j == 0 {
        return Ok(Truth { time_s: b[0].t, distance_nmi: 0.0, reached_index: 0, cumulative_nmi: cumulative });
    }
    let (p, q) = (&b[j - 1], &b[j]);
    let s = if q.h == traj.h_target { 1.0 } else { (traj.h_target - p.h) / (q.h - p.h) };
    let t_star = p.t + s * (q.t - p.t);
    let tas_star = p.tas + s * (q.tas - p.tas);
    d += nmi(0.5 * (p.tas + tas_star), t_star - p.t);
    Ok(Truth { time_s: t_star, distance_nmi: d, reached_index: j, cumulative_nmi: cumulative })
}

fn trapezoid(a: &Blip, b: &Blip) -> f64 {
    nmi(0.5 * (a.tas + b.tas), b.t - a.t)
}

/// Nominal-model prediction computed once and then held fixed.
#[derive(Debug, Clone)]
pub struct FrozenPlan {
    pub path: Trajectory,
    pub truth: Truth,
}

impl FrozenPlan {
    pub fn new(cfg: &AircraftConfig, h0: f64, h_target: f64, phase: Phase) -> Result<Self> {
        let path = integrate_trajectory(cfg, h0, h_target, phase, BLIP_DT)?;
        let truth = truth(&path)?;
        Ok(FrozenPlan { path, truth })
    }

    /// Remaining time and distance at `t` seconds after the plan started.
    pub fn remaining(&self, t: f64) -> (f64, f64) {
        if t >= self.truth.time_s {
            return (0.0, 0.0);
        }
        let flown = self.distance_at(t);
        (self.truth.time_s - t, (self.truth.distance_nmi - flown).max(0.0))
    }

    /// Planned TAS at time `t`, held at the final value past the end.
    pub fn tas_at(&self, t: f64) -> f64 {
        let b = &self.path.blips;
        match b.iter().position(|x| x.t >= t) {
            Some(0) => b[0].tas,
            Some(i) => {
                let s = (t - b[i - 1].t) / (b[i].t - b[i - 1].t);
                b[i - 1].tas + s * (b[i].tas - b[i - 1].tas)
            }
            None => b[b.len() - 1].tas,
        }
    }

    fn distance_at(&self, t: f64) -> f64 {
        let b = &self.path.blips;
        let mut d = 0.0;
        for w in b.windows(2) {
            if t >= w[1].t {
                d += trapezoid(&w[0], &w[1]);
            } else {
                if t > w[0].t {
                    let s = (t - w[0].t) / (w[1].t - w[0].t);
                    let tas_t = w[0].tas + s * (w[1].tas - w[0].tas);
                    d += nmi(0.5 * (w[0].tas + tas_t), t - w[0].t);
                }
                break;
            }
        }
        d
    }
}

/// Inputs shared by the method replays.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    /// Nominal configs, used by the two performance-model baselines.
    pub fleet: &'a [AircraftConfig],
    /// Required by the particle filter.
    pub prior: Option<&'a PriorSet>,
    pub filter: FilterConfig,
    pub kf: KfConfig,
}

impl<'a> EvalContext<'a> {
    pub fn new(fleet: &'a [AircraftConfig], prior: Option<&'a PriorSet>) -> Self {
        EvalContext { fleet, prior, filter: FilterConfig::default(), kf: KfConfig::default() }
    }
}

type Prediction = std::result::Result<(f64, f64), String>;

/// Replays every trajectory blip by blip and scores the method's prediction
/// at each blip before the target is reached.
pub fn evaluate_method(method: Method, test_set: &[Trajectory], ctx: &EvalContext, seed: u64) -> Result<MethodResult> {
    if test_set.is_empty() {
        return Err(Error::Input("empty test set".into()));
    }
    if method == Method::Lwpf && ctx.prior.is_none() {
        return Err(Error::Config("the particle filter needs a prior set".into()));
    }
    ctx.filter.validate()?;
    ctx.kf.validate()?;
    let per_traj: Vec<std::result::Result<Vec<TpError>, String>> =
        test_set.par_iter().map(|t| score_trajectory(method, t, ctx, seed)).collect();
    let mut stream = Vec::new();
    let mut excluded = Vec::new();
    for (t, r) in test_set.iter().zip(per_traj) {
        match r {
            Ok(es) => stream.extend(es),
            Err(msg) => {
                warn!("{method}: excluding {}: {msg}", t.id);
                excluded.push(t.id.clone());
            }
        }
    }
    excluded.sort();
    Ok(MethodResult::from_stream(method, stream, excluded))
}

fn score_trajectory(method: Method, traj: &Trajectory, ctx: &EvalContext, seed: u64) -> std::result::Result<Vec<TpError>, String> {
    let truth = truth(traj).map_err(|e| e.to_string())?;
    let n = truth.reached_index;
    let preds = match method {
        Method::BadaT0 => predict_bada_t0(traj, n, ctx),
        Method::BadaReinit => predict_bada_reinit(traj, n, ctx),
        Method::KfTp => predict_kf(traj, n, ctx),
        Method::Lwpf => predict_lwpf(traj, n, ctx, seed),
    };
    Ok(preds
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let (rt, rd) = truth.remaining(traj, k);
            let base = TpError {
                method,
                trajectory_id: traj.id.clone(),
                aircraft_type: traj.aircraft_type.clone(),
                phase: traj.phase,
                blip: k,
                t_s: traj.blips[k].t,
                pred_time_s: None,
                pred_distance_nmi: None,
                truth_time_s: rt,
                truth_distance_nmi: rd,
                abs_time_err: 0.0,
                abs_dist_err: 0.0,
                failed: true,
                failure: None,
            };
            match p {
                Ok((pt, pd)) => TpError {
                    pred_time_s: Some(pt),
                    pred_distance_nmi: Some(pd),
                    abs_time_err: (pt - rt).abs(),
                    abs_dist_err: (pd - rd).abs(),
                    failed: false,
                    ..base
                },
                Err(msg) => TpError { failure: Some(msg), ..base },
            }
        })
        .collect())
}

fn nominal<'a>(traj: &Trajectory, ctx: &EvalContext<'a>) -> std::result::Result<&'a AircraftConfig, String> {
    ctx.fleet.iter().find(|c| c.type_code == traj.aircraft_type).ok_or_else(|| format!("no nominal config for {}", traj.aircraft_type))
}

fn fail_all(n: usize, msg: String) -> Vec<Prediction> {
    vec![Err(msg); n]
}

fn predict_bada_t0(traj: &Trajectory, n: usize, ctx: &EvalContext) -> Vec<Prediction> {
    let plan =
        nominal(traj, ctx).and_then(|cfg| FrozenPlan::new(cfg, traj.blips[0].h, traj.h_target, traj.phase).map_err(|e| e.to_string()));
    match plan {
        Ok(plan) => traj.blips[..n].iter().map(|b| Ok(plan.remaining(b.t - traj.blips[0].t))).collect(),
        Err(msg) => fail_all(n, msg),
    }
}

fn predict_bada_reinit(traj: &Trajectory, n: usize, ctx: &EvalContext) -> Vec<Prediction> {
    let cfg = match nominal(traj, ctx) {
        Ok(c) => c,
        Err(msg) => return fail_all(n, msg),
    };
    traj.blips[..n]
        .iter()
        .map(|b| {
            FrozenPlan::new(cfg, b.h, traj.h_target, traj.phase).map(|p| (p.truth.time_s, p.truth.distance_nmi)).map_err(|e| e.to_string())
        })
        .collect()
}

fn predict_kf(traj: &Trajectory, n: usize, ctx: &EvalContext) -> Vec<Prediction> {
    let mut kf = match KalmanTracker::new(ctx.kf, traj.phase) {
        Ok(k) => k,
        Err(e) => return fail_all(n, e.to_string()),
    };
    let mut out = Vec::with_capacity(n);
    for b in &traj.blips[..n] {
        let p = match kf.assimilate(b) {
            Ok(_) => match kf.predict_to(traj.h_target) {
                Some(Ok(v)) => Ok(v),
                Some(Err(f)) => Err(f.to_string()),
                None => Err("no state".into()),
            },
            Err(e) => Err(e.to_string()),
        };
        out.push(p);
    }
    out
}

/// Filter seed used for one trajectory.
pub fn trajectory_seed(seed: u64, traj: &Trajectory) -> u64 {
    derive_seed(seed, &traj.id)
}

fn predict_lwpf(traj: &Trajectory, n: usize, ctx: &EvalContext, seed: u64) -> Vec<Prediction> {
    let prior = ctx.prior.expect("checked by caller");
    let cfg = FilterConfig { seed: trajectory_seed(seed, traj), ..ctx.filter };
    let mut f = match LiuWestFilter::from_prior(prior, &traj.aircraft_type, traj.phase, cfg) {
        Ok(f) => f,
        Err(e) => return fail_all(n, e.to_string()),
    };
    let mut out = Vec::with_capacity(n);
    for b in &traj.blips[..n] {
        let p = f
            .assimilate(b.state())
            .and_then(|_| f.predict_to(traj.h_target, traj.phase, false))
            .map(|e| (e.mean_time_s, e.mean_distance_nmi))
            .map_err(|e| e.to_string());
        out.push(p);
    }
    out
}
