use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{BenchTable, KfSweepRow, MethodResult, ParticleSweepRow, PhaseStats, TpError, ALL_TYPES};
use crate::{Phase, Result};

/// Per-blip records of every result, in result order.
pub fn write_stream<W: Write>(results: &[MethodResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in results {
        for e in &r.stream {
            wtr.serialize(e)?;
        }
    }
    if results.iter().all(|r| r.stream.is_empty()) {
        wtr.write_record(STREAM_HEADER)?;
    }
    wtr.flush()?;
    Ok(())
}

const STREAM_HEADER: [&str; 14] = [
    "method",
    "trajectory_id",
    "aircraft_type",
    "phase",
    "blip",
    "t_s",
    "pred_time_s",
    "pred_distance_nmi",
    "truth_time_s",
    "truth_distance_nmi",
    "abs_time_err",
    "abs_dist_err",
    "failed",
    "failure",
];

pub fn read_stream<R: Read>(r: R) -> Result<Vec<TpError>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Per-type and all-types aggregates of every result.
pub fn write_aggregates<W: Write>(results: &[MethodResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "method",
        "aircraft_type",
        "phase",
        "mae_time_s",
        "mae_distance_nmi",
        "failure_rate",
        "n_points",
        "n_failed",
        "total",
    ])?;
    for r in results {
        for a in &r.aggregates {
            wtr.write_record([
                a.method.to_string(),
                a.aircraft_type.clone(),
                a.phase.to_string(),
                a.mae_time_s.to_string(),
                a.mae_distance_nmi.to_string(),
                a.failure_rate.to_string(),
                a.n_points.to_string(),
                a.n_failed.to_string(),
                a.total.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// One row per method with climb and descent error columns.
pub fn write_method_table<W: Write>(results: &[MethodResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "method",
        "climb_mae_time_s",
        "descent_mae_time_s",
        "climb_mae_distance_nmi",
        "descent_mae_distance_nmi",
        "climb_failure_rate",
        "descent_failure_rate",
        "climb_n_points",
        "descent_n_points",
    ])?;
    for r in results {
        let s = |p: Phase| {
            r.overall(p).map_or((f64::NAN, f64::NAN, 0.0, 0), |a| (a.mae_time_s, a.mae_distance_nmi, a.failure_rate, a.n_points))
        };
        let (c, d) = (s(Phase::Climb), s(Phase::Descent));
        wtr.write_record([
            r.method.to_string(),
            fmt2(c.0),
            fmt2(d.0),
            fmt2(c.1),
            fmt2(d.1),
            fmt2(c.2),
            fmt2(d.2),
            c.3.to_string(),
            d.3.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

const PHASE_COLS: [&str; 4] = ["mae_time_s", "mae_distance_nmi", "failure_rate", "n_points"];

fn phase_header(lead: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    for p in ["climb", "descent"] {
        h.extend(PHASE_COLS.iter().map(|c| format!("{p}_{c}")));
    }
    h.push("best_climb".into());
    h.push("best_descent".into());
    h
}

fn phase_fields(s: &PhaseStats) -> [String; 4] {
    [fmt2(s.mae_time_s), fmt2(s.mae_distance_nmi), fmt2(s.failure_rate), s.n_points.to_string()]
}

/// Kalman sweep table: cell values, aircraft type, then a climb block and a
/// descent block.
pub fn write_kf_sweep<W: Write>(rows: &[KfSweepRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(phase_header(&["alpha_p", "alpha_q", "alpha_b", "aircraft_type"]))?;
    for r in rows {
        let mut rec = vec![r.alpha_p.to_string(), r.alpha_q.to_string(), r.alpha_b.to_string(), r.aircraft_type.clone()];
        rec.extend(phase_fields(&r.climb));
        rec.extend(phase_fields(&r.descent));
        rec.push(r.best_climb.to_string());
        rec.push(r.best_descent.to_string());
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_particle_sweep<W: Write>(rows: &[ParticleSweepRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(phase_header(&["n_particles", "aircraft_type"]))?;
    for r in rows {
        let mut rec = vec![r.n_particles.to_string(), r.aircraft_type.clone()];
        rec.extend(phase_fields(&r.climb));
        rec.extend(phase_fields(&r.descent));
        rec.push(r.best_climb.to_string());
        rec.push(r.best_descent.to_string());
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_bench<W: Write>(table: &BenchTable, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["aircraft_type", "phase", "steps", "perf_ms", "lssm_ms", "ratio"])?;
    for r in &table.rows {
        wtr.write_record([
            r.aircraft_type.clone(),
            r.phase.to_string(),
            r.steps.to_string(),
            format!("{:.6}", r.perf_ms),
            format!("{:.6}", r.lssm_ms),
            format!("{:.3}", r.ratio),
        ])?;
    }
    wtr.write_record(["MEAN", "", "", "", "", &format!("{:.3}", table.mean_ratio)])?;
    wtr.flush()?;
    Ok(())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + f * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Error-bar data per method and phase: mean, standard deviation, standard
/// error and quantiles of the per-blip absolute errors.
pub fn write_errorbar_data<W: Write>(results: &[MethodResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "phase", "metric", "n", "mean", "sd", "se", "p05", "p25", "p50", "p75", "p95"])?;
    for r in results {
        for phase in [Phase::Climb, Phase::Descent] {
            let ok: Vec<&TpError> = r.stream.iter().filter(|e| e.phase == phase && !e.failed).collect();
            for (metric, get) in [("time_s", (|e: &TpError| e.abs_time_err) as fn(&TpError) -> f64), ("distance_nmi", |e| e.abs_dist_err)] {
                let mut v: Vec<f64> = ok.iter().map(|e| get(e)).collect();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                let mean = v.iter().sum::<f64>() / n as f64;
                let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                let mut rec = vec![r.method.to_string(), phase.to_string(), metric.to_string(), n.to_string()];
                rec.extend([mean, sd, sd / (n as f64).sqrt()].map(|x| format!("{x:.4}")));
                rec.extend([0.05, 0.25, 0.5, 0.75, 0.95].map(|q| format!("{:.4}", quantile(&v, q))));
                wtr.write_record(rec)?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Per-type comparison of two methods: both MAEs and the number of scored
/// blips, for scatter plots.
pub fn write_scatter_data<W: Write>(a: &MethodResult, b: &MethodResult, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let (ma, mb) = (a.method.as_str(), b.method.as_str());
    wtr.write_record([
        "aircraft_type".to_string(),
        "phase".to_string(),
        format!("{ma}_mae_time_s"),
        format!("{mb}_mae_time_s"),
        format!("{ma}_mae_distance_nmi"),
        format!("{mb}_mae_distance_nmi"),
        "n_blips".to_string(),
    ])?;
    let mut keys: BTreeMap<(Phase, String), ()> = BTreeMap::new();
    for ag in a.aggregates.iter().chain(&b.aggregates).filter(|g| g.aircraft_type != ALL_TYPES) {
        keys.insert((ag.phase, ag.aircraft_type.clone()), ());
    }
    for (phase, ty) in keys.into_keys() {
        let ga = a.get(&ty, phase);
        let gb = b.get(&ty, phase);
        let t = |g: Option<&super::Aggregate>| g.map_or(f64::NAN, |g| g.mae_time_s);
        let d = |g: Option<&super::Aggregate>| g.map_or(f64::NAN, |g| g.mae_distance_nmi);
        let n = ga.or(gb).map_or(0, |g| g.total);
        wtr.write_record([ty.clone(), phase.to_string(), fmt2(t(ga)), fmt2(t(gb)), fmt2(d(ga)), fmt2(d(gb)), n.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
