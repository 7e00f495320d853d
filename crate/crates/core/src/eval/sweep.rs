use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_method, EvalContext, Method, MethodResult, ALL_TYPES};
use crate::dataio::Trajectory;
use crate::kalman::{KfConfig, KfGrid};
use crate::lwpf::FilterConfig;
use crate::{Error, Phase, Result};

pub const DEFAULT_PARTICLE_COUNTS: [usize; 6] = [50, 100, 200, 400, 800, 1600];

/// One phase block of a sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub mae_time_s: f64,
    pub mae_distance_nmi: f64,
    pub failure_rate: f64,
    pub n_points: usize,
}

impl PhaseStats {
    const EMPTY: PhaseStats = PhaseStats { mae_time_s: f64::NAN, mae_distance_nmi: f64::NAN, failure_rate: 0.0, n_points: 0 };

    fn from_result(r: &MethodResult, aircraft_type: &str, phase: Phase) -> Self {
        r.get(aircraft_type, phase).map_or(Self::EMPTY, |a| PhaseStats {
            mae_time_s: a.mae_time_s,
            mae_distance_nmi: a.mae_distance_nmi,
            failure_rate: a.failure_rate,
            n_points: a.n_points,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfSweepRow {
    pub alpha_p: f64,
    pub alpha_q: f64,
    pub alpha_b: f64,
    pub aircraft_type: String,
    pub climb: PhaseStats,
    pub descent: PhaseStats,
    /// Lowest climb time error for this type across cells.
    pub best_climb: bool,
    pub best_descent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSweepRow {
    pub n_particles: usize,
    pub aircraft_type: String,
    pub climb: PhaseStats,
    pub descent: PhaseStats,
    pub best_climb: bool,
    pub best_descent: bool,
}

/// Aircraft types in the set, then the all-types label.
fn type_labels(set: &[Trajectory]) -> Vec<String> {
    let mut v: Vec<String> = set.iter().map(|t| t.aircraft_type.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    v.push(ALL_TYPES.to_string());
    v
}

/// Marks, per type and phase, the row with the smallest time error.
fn mark_best<R>(rows: &mut [R], get: impl Fn(&R) -> (&str, PhaseStats, PhaseStats), mut set: impl FnMut(&mut R, Phase)) {
    let types: BTreeSet<String> = rows.iter().map(|r| get(r).0.to_string()).collect();
    for ty in types {
        for phase in [Phase::Climb, Phase::Descent] {
            let mut best: Option<(usize, f64)> = None;
            for (i, r) in rows.iter().enumerate() {
                let (t, c, d) = get(r);
                let v = if phase == Phase::Climb { c.mae_time_s } else { d.mae_time_s };
                if t == ty && !v.is_nan() && best.is_none_or(|(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
            if let Some((i, _)) = best {
                set(&mut rows[i], phase);
            }
        }
    }
}

/// Kalman benchmark over every grid cell. The forcing value is used as the
/// magnitude in both phases. Rows are grouped by cell in grid order, one row
/// per aircraft type plus the all-types row.
pub fn sweep_kf(val_set: &[Trajectory], grid: &KfGrid, base: &KfConfig) -> Result<Vec<KfSweepRow>> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::Config("empty Kalman grid".into()));
    }
    let labels = type_labels(val_set);
    let results: Vec<Result<MethodResult>> = cells
        .par_iter()
        .map(|&(p, q, b)| {
            let kf = KfConfig { alpha_p: p, alpha_q: q, ..base.with_alpha_b(b) };
            let ctx = EvalContext { kf, ..EvalContext::new(&[], None) };
            evaluate_method(Method::KfTp, val_set, &ctx, 0)
        })
        .collect();
    let mut rows = Vec::new();
    for (&(p, q, b), r) in cells.iter().zip(results) {
        let r = r?;
        for ty in &labels {
            rows.push(KfSweepRow {
                alpha_p: p,
                alpha_q: q,
                alpha_b: b,
                aircraft_type: ty.clone(),
                climb: PhaseStats::from_result(&r, ty, Phase::Climb),
                descent: PhaseStats::from_result(&r, ty, Phase::Descent),
                best_climb: false,
                best_descent: false,
            });
        }
    }
    mark_best(
        &mut rows,
        |r| (r.aircraft_type.as_str(), r.climb, r.descent),
        |r, ph| match ph {
            Phase::Climb => r.best_climb = true,
            Phase::Descent => r.best_descent = true,
        },
    );
    Ok(rows)
}

/// Particle filter accuracy for each particle count.
pub fn sweep_particles(val_set: &[Trajectory], counts: &[usize], ctx: &EvalContext, seed: u64) -> Result<Vec<ParticleSweepRow>> {
    if counts.is_empty() {
        return Err(Error::Config("no particle counts".into()));
    }
    let labels = type_labels(val_set);
    let mut rows = Vec::new();
    for &n_p in counts {
        let c = EvalContext { filter: FilterConfig { n_p, ..ctx.filter }, ..*ctx };
        let r = evaluate_method(Method::Lwpf, val_set, &c, seed)?;
        for ty in &labels {
            rows.push(ParticleSweepRow {
                n_particles: n_p,
                aircraft_type: ty.clone(),
                climb: PhaseStats::from_result(&r, ty, Phase::Climb),
                descent: PhaseStats::from_result(&r, ty, Phase::Descent),
                best_climb: false,
                best_descent: false,
            });
        }
    }
    mark_best(
        &mut rows,
        |r| (r.aircraft_type.as_str(), r.climb, r.descent),
        |r, ph| match ph {
            Phase::Climb => r.best_climb = true,
            Phase::Descent => r.best_descent = true,
        },
    );
    Ok(rows)
}
