use std::hint::black_box;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataio::reference_span;
use crate::lssm::{rollout, Lssm, ScalingMatrix, StateVec};
use crate::optimizer::{fit_trajectory, SimplexConfig};
use crate::perfmodel::{integrate_trajectory, AircraftConfig};
use crate::{Error, Phase, Result, BLIP_DT};

/// Shortest wall time of one timed batch.
const MIN_BATCH: Duration = Duration::from_millis(2);
const MAX_BATCH_LEN: usize = 100_000;

/// One configuration and phase with its fitted surrogate.
#[derive(Debug, Clone)]
pub struct BenchCase {
    pub cfg: AircraftConfig,
    pub phase: Phase,
    pub h0: f64,
    pub h_target: f64,
    pub model: Lssm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub aircraft_type: String,
    pub phase: Phase,
    pub steps: usize,
    /// Median time of one performance-model integration, ms.
    pub perf_ms: f64,
    /// Median time of one surrogate rollout over the same steps, ms.
    pub lssm_ms: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub mean_ratio: f64,
}

impl BenchTable {
    pub fn mean_ratio_for(&self, phase: Phase) -> f64 {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.phase == phase).map(|r| r.ratio).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Fits one whole-span surrogate per configuration and phase over the
/// configuration's reference altitude band.
pub fn bench_cases(fleet: &[AircraftConfig], simplex: &SimplexConfig) -> Result<Vec<BenchCase>> {
    let mut out = Vec::new();
    for cfg in fleet {
        let (lo, hi) = reference_span(cfg)?;
        for phase in [Phase::Climb, Phase::Descent] {
            let (h0, h_target) = match phase {
                Phase::Climb => (lo, hi),
                Phase::Descent => (hi, lo),
            };
            let traj = integrate_trajectory(cfg, h0, h_target, phase, BLIP_DT)?;
            let init = Lssm::constant_rate(0.0, 0.0, BLIP_DT);
            let fit = fit_trajectory(&traj, &init, &ScalingMatrix::default(), simplex)?;
            out.push(BenchCase { cfg: cfg.clone(), phase, h0, h_target, model: fit.model });
        }
    }
    Ok(out)
}

/// Median per-call time in ms over `reps` timed batches, after one untimed
/// warm-up batch that also sets the batch length.
fn median_ms(reps: usize, mut op: impl FnMut()) -> f64 {
    let start = Instant::now();
    op();
    let single = start.elapsed().max(Duration::from_nanos(1));
    let batch = ((MIN_BATCH.as_secs_f64() / single.as_secs_f64()).ceil() as usize).clamp(1, MAX_BATCH_LEN);
    for _ in 0..batch {
        op();
    }
    let mut times: Vec<f64> = (0..reps)
        .map(|_| {
            let s = Instant::now();
            for _ in 0..batch {
                op();
            }
            s.elapsed().as_secs_f64() * 1e3 / batch as f64
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let m = times.len() / 2;
    if times.len() % 2 == 1 {
        times[m]
    } else {
        0.5 * (times[m - 1] + times[m])
    }
}

/// Times integration against surrogate rollout of the same step count.
/// A zero-length span reports a ratio of one.
pub fn bench_speedup(cases: &[BenchCase], n_reps: usize) -> Result<BenchTable> {
    if n_reps == 0 {
        return Err(Error::Input("need at least one repetition".into()));
    }
    let mut rows = Vec::with_capacity(cases.len());
    for c in cases {
        if c.h0 == c.h_target {
            rows.push(BenchRow {
                aircraft_type: c.cfg.type_code.clone(),
                phase: c.phase,
                steps: 0,
                perf_ms: 0.0,
                lssm_ms: 0.0,
                ratio: 1.0,
            });
            continue;
        }
        let traj = integrate_trajectory(&c.cfg, c.h0, c.h_target, c.phase, BLIP_DT)?;
        let steps = traj.blips.len() - 1;
        let x0 = StateVec::new(c.h0, traj.blips[0].tas);
        let perf_ms = median_ms(n_reps, || {
            black_box(integrate_trajectory(black_box(&c.cfg), c.h0, c.h_target, c.phase, BLIP_DT).ok());
        });
        let lssm_ms = median_ms(n_reps, || {
            black_box(rollout(black_box(&c.model), x0, steps).ok());
        });
        rows.push(BenchRow { aircraft_type: c.cfg.type_code.clone(), phase: c.phase, steps, perf_ms, lssm_ms, ratio: perf_ms / lssm_ms });
    }
    let mean_ratio = rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len().max(1) as f64;
    Ok(BenchTable { rows, mean_ratio })
}
