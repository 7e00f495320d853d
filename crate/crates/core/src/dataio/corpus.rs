use std::collections::BTreeMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::atmosphere::H_TROP_FT;
use crate::perfmodel::{integrate_trajectory, AircraftConfig, Engine};
use crate::{derive_seed, Error, Phase, Result, BLIP_DT, MIN_ROCD_FPM};

/// Trajectories per day and phase, keyed by type code.
pub type TypeCounts = BTreeMap<String, usize>;

/// Attempts per flight before a divergent sampled config is skipped.
const MAX_ATTEMPTS: usize = 5;
/// Smallest altitude change of a jitter-sampled span, ft.
const MIN_SPAN_FT: f64 = 3_000.0;
/// Highest altitude a jitter-sampled jet span may reach, ft.
const JET_SPAN_CEILING_FT: f64 = 37_000.0;

/// Per-flight perturbations and measurement noise for corpus generation.
///
/// Scale fields are half-widths of uniform draws; noise fields are Gaussian
/// standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusJitter {
    /// Relative mass spread.
    pub mass_frac: f64,
    /// Relative thrust spread per flight.
    pub thrust_frac: f64,
    /// Relative thrust offset shared by every flight of a day.
    pub day_thrust_frac: f64,
    pub cas_kt: f64,
    pub mach: f64,
    pub noise_h_ft: f64,
    pub noise_tas_kt: f64,
    pub noise_rocd_fpm: f64,
    /// Fraction of jet flights whose span straddles the CAS/Mach crossover.
    pub transition_frac: f64,
    /// Randomise start and target altitudes; otherwise use [`reference_span`].
    pub span_jitter: bool,
}

impl Default for CorpusJitter {
    fn default() -> Self {
        CorpusJitter {
            mass_frac: 0.2,
            thrust_frac: 0.1,
            day_thrust_frac: 0.03,
            cas_kt: 15.0,
            mach: 0.02,
            noise_h_ft: 100.0,
            noise_tas_kt: 2.5,
            noise_rocd_fpm: 100.0,
            transition_frac: 0.5,
            span_jitter: true,
        }
    }
}

impl CorpusJitter {
    /// No perturbation and no noise: every flight of a type reproduces the
    /// reference integration.
    pub fn zero() -> Self {
        CorpusJitter {
            mass_frac: 0.0,
            thrust_frac: 0.0,
            day_thrust_frac: 0.0,
            cas_kt: 0.0,
            mach: 0.0,
            noise_h_ft: 0.0,
            noise_tas_kt: 0.0,
            noise_rocd_fpm: 0.0,
            transition_frac: 1.0,
            span_jitter: false,
        }
    }

    /// Parameter jitter without measurement noise.
    pub fn noise_free() -> Self {
        CorpusJitter { noise_h_ft: 0.0, noise_tas_kt: 0.0, noise_rocd_fpm: 0.0, ..Self::default() }
    }

    /// Named profiles: `default`, `zero`, `noise-free`.
    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "zero" => Ok(Self::zero()),
            "noise-free" => Ok(Self::noise_free()),
            other => Err(Error::Config(format!("unknown jitter profile '{other}'"))),
        }
    }
}

/// Stock per-day counts for [`crate::perfmodel::synth_fleet`], weighted
/// toward the narrow-body jets.
pub fn default_type_counts() -> TypeCounts {
    [("JB73", 4), ("JA32", 3), ("JE19", 2), ("JC56", 1), ("JB78", 1), ("TPDH", 2), ("TPPC", 1)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

/// Low and high altitude of the unperturbed span for a type: FL210 to the
/// higher of the tropopause and 5 000 ft above the climb crossover for jets,
/// 12 000 to 25 000 ft for turboprops.
pub fn reference_span(cfg: &AircraftConfig) -> Result<(f64, f64)> {
    match cfg.engine {
        Engine::Jet => {
            let x = cfg.climb_schedule.crossover_ft()?;
            Ok((21_000.0, (x + 5_000.0).clamp(H_TROP_FT, JET_SPAN_CEILING_FT)))
        }
        Engine::Turboprop => Ok((12_000.0, 25_000.0)),
    }
}

fn day_tag(d: usize) -> String {
    format!("d{:02}", d + 1)
}

fn sym(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width > 0.0 {
        rng.random_range(-half_width..=half_width)
    } else {
        0.0
    }
}

fn perturb(base: &AircraftConfig, j: &CorpusJitter, day_thrust: f64, rng: &mut ChaCha8Rng) -> AircraftConfig {
    let mut c = base.clone();
    c.mass_kg *= 1.0 + sym(rng, j.mass_frac);
    c.thrust.c1 *= (1.0 + sym(rng, j.thrust_frac)) * (1.0 + day_thrust);
    if c.engine == Engine::Turboprop {
        c.thrust.c3 *= 1.0 + day_thrust;
    }
    let dcas = sym(rng, j.cas_kt);
    let dmach = sym(rng, j.mach);
    for s in [&mut c.climb_schedule, &mut c.descent_schedule] {
        s.cas_kt += dcas;
        s.mach += dmach;
    }
    c
}

fn sample_span(cfg: &AircraftConfig, phase: Phase, j: &CorpusJitter, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    if !j.span_jitter {
        return reference_span(cfg);
    }
    match cfg.engine {
        Engine::Turboprop => Ok((rng.random_range(10_000.0..14_000.0), rng.random_range(20_000.0..25_000.0))),
        Engine::Jet => {
            let x = cfg.schedule(phase).crossover_ft()?;
            let span = if rng.random::<f64>() < j.transition_frac {
                (x - rng.random_range(5_000.0..9_000.0), x + rng.random_range(3_000.0..6_000.0))
            } else if rng.random::<bool>() {
                let hi = x - rng.random_range(500.0..1_500.0);
                (hi - rng.random_range(6_000.0..10_000.0), hi)
            } else {
                let lo = x + rng.random_range(500.0..1_000.0);
                (lo, lo + rng.random_range(3_000.0..5_000.0))
            };
            let hi = span.1.min(JET_SPAN_CEILING_FT);
            Ok((span.0.min(hi - MIN_SPAN_FT), hi))
        }
    }
}

/// Ends the flight at the last blip still at or above the legal minimum rate,
/// as a controller would level off an aircraft that can no longer sustain
/// it. Fails if that leaves less than the minimum span.
fn level_off(mut t: Trajectory) -> Result<Trajectory> {
    let sign = t.phase.sign();
    let Some(i) = t.blips.iter().skip(1).position(|b| b.rocd * sign < MIN_ROCD_FPM).map(|i| i + 1) else {
        return Ok(t);
    };
    t.blips.truncate(i);
    let span = (t.blips[i - 1].h - t.blips[0].h).abs();
    if span < MIN_SPAN_FT {
        return Err(Error::Divergence(format!("rate falls below {MIN_ROCD_FPM} ft/min after {span:.0} ft")));
    }
    t.h_target = t.blips[i - 1].h;
    Ok(t)
}

fn add_noise(traj: &mut Trajectory, j: &CorpusJitter, rng: &mut ChaCha8Rng) {
    let n = traj.blips.len();
    let draw = |sd: f64, rng: &mut ChaCha8Rng| if sd > 0.0 { Normal::new(0.0, sd).expect("finite sd").sample(rng) } else { 0.0 };
    let sign = traj.phase.sign();
    for (i, b) in traj.blips.iter_mut().enumerate() {
        let dh = draw(j.noise_h_ft, rng);
        let dv = draw(j.noise_tas_kt, rng);
        let dr = draw(j.noise_rocd_fpm, rng);
        if i + 1 < n {
            // Keep the capture on the final blip.
            let h = b.h + dh;
            b.h = if (h - traj.h_target) * sign >= 0.0 { traj.h_target - sign } else { h };
        }
        b.tas += dv;
        b.rocd += dr;
    }
}

fn one_flight(
    base: &AircraftConfig,
    phase: Phase,
    id: String,
    day: &str,
    day_thrust: f64,
    j: &CorpusJitter,
    seed: u64,
) -> Option<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &id));
    let mut last_err = None;
    for _ in 0..MAX_ATTEMPTS {
        let cfg = perturb(base, j, day_thrust, &mut rng);
        let attempt = cfg.validate().and_then(|_| sample_span(&cfg, phase, j, &mut rng)).and_then(|(lo, hi)| {
            let (h0, h1) = match phase {
                Phase::Climb => (lo, hi),
                Phase::Descent => (hi, lo),
            };
            integrate_trajectory(&cfg, h0, h1, phase, BLIP_DT).and_then(level_off)
        });
        match attempt {
            Ok(mut t) => {
                t.id = id;
                t.day = day.to_string();
                add_noise(&mut t, j, &mut rng);
                return Some(t);
            }
            Err(e) => last_err = Some(e),
        }
    }
    warn!("skipping {id}: {}", last_err.map(|e| e.to_string()).unwrap_or_default());
    None
}

/// Synthetic corpus of climbs and descents over `days` day tags.
///
/// Each flight draws its own perturbed config from a seed derived from the
/// flight id, so the output is independent of thread scheduling. Days are
/// generated in parallel and concatenated in day order.
pub fn generate_corpus(
    fleet: &[AircraftConfig],
    days: usize,
    per_day_counts: &TypeCounts,
    jitter: &CorpusJitter,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if fleet.is_empty() {
        return Err(Error::Input("fleet is empty".into()));
    }
    for code in per_day_counts.keys() {
        if !fleet.iter().any(|c| &c.type_code == code) {
            return Err(Error::Config(format!("count given for unknown type '{code}'")));
        }
    }
    for c in fleet {
        c.validate()?;
    }
    let per_day: Vec<Vec<Trajectory>> = (0..days)
        .into_par_iter()
        .map(|d| {
            let day = day_tag(d);
            let mut day_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("day:{day}")));
            let day_thrust = sym(&mut day_rng, jitter.day_thrust_frac);
            let mut out = Vec::new();
            for cfg in fleet {
                let n = per_day_counts.get(&cfg.type_code).copied().unwrap_or(0);
                for phase in [Phase::Climb, Phase::Descent] {
                    for k in 0..n {
                        let id = format!("{day}-{}-{phase}-{k:02}", cfg.type_code);
                        out.extend(one_flight(cfg, phase, id, &day, day_thrust, jitter, seed));
                    }
                }
            }
            out
        })
        .collect();
    Ok(per_day.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perfmodel::synth_fleet;

    fn small_counts() -> TypeCounts {
        synth_fleet().iter().map(|c| (c.type_code.clone(), 1)).collect()
    }

    #[test]
    fn zero_jitter_reproduces_reference() {
        let fleet = synth_fleet();
        let corpus = generate_corpus(&fleet, 2, &small_counts(), &CorpusJitter::zero(), 5).unwrap();
        assert_eq!(corpus.len(), 2 * 2 * fleet.len());
        for t in &corpus {
            let cfg = fleet.iter().find(|c| c.type_code == t.aircraft_type).unwrap();
            let (lo, hi) = reference_span(cfg).unwrap();
            let (h0, h1) = if t.phase == Phase::Climb { (lo, hi) } else { (hi, lo) };
            let r = integrate_trajectory(cfg, h0, h1, t.phase, BLIP_DT).unwrap();
            let n = t.blips.len();
            assert_eq!(t.blips[..], r.blips[..n], "{}", t.id);
            if n < r.blips.len() {
                assert!(r.blips[n].rocd * t.phase.sign() < MIN_ROCD_FPM, "{}", t.id);
                assert_eq!(t.h_target, t.blips[n - 1].h);
            }
        }
    }

    #[test]
    fn seeded_generation_is_bit_identical() {
        let fleet = synth_fleet();
        let j = CorpusJitter::default();
        let a = generate_corpus(&fleet, 3, &small_counts(), &j, 11).unwrap();
        let b = generate_corpus(&fleet, 3, &small_counts(), &j, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_corpus(&fleet, 3, &small_counts(), &j, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generation_contract() {
        let fleet = synth_fleet();
        let corpus = generate_corpus(&fleet, 4, &default_type_counts(), &CorpusJitter::default(), 3).unwrap();
        let days: std::collections::BTreeSet<_> = corpus.iter().map(|t| t.day.clone()).collect();
        assert_eq!(days.len(), 4);
        for t in &corpus {
            t.validate().unwrap();
            let first = t.blips.first().unwrap();
            let last = t.blips.last().unwrap();
            assert_eq!(last.h, t.h_target);
            if t.phase == Phase::Climb {
                assert!(last.h - first.h >= 2_000.0, "{}", t.id);
            } else {
                assert!(first.h - last.h >= 2_000.0, "{}", t.id);
            }
        }
        // Flights that start below the crossover and end above it.
        let straddle = corpus
            .iter()
            .filter(|t| t.phase == Phase::Climb && t.aircraft_type.starts_with('J'))
            .filter(|t| {
                let x = fleet.iter().find(|c| c.type_code == t.aircraft_type).unwrap().climb_schedule.crossover_ft().unwrap();
                t.blips[0].h < x - 3_000.0 && t.h_target > x + 1_000.0
            })
            .count();
        assert!(straddle > 0);
    }

    #[test]
    fn rejects_bad_input() {
        let j = CorpusJitter::default();
        assert!(generate_corpus(&[], 1, &TypeCounts::new(), &j, 0).is_err());
        let mut counts = TypeCounts::new();
        counts.insert("NOPE".into(), 1);
        assert!(matches!(generate_corpus(&synth_fleet(), 1, &counts, &j, 0), Err(Error::Config(_))));
        assert!(CorpusJitter::profile("bogus").is_err());
    }
}
