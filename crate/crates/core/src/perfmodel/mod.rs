//! Open total-energy aircraft performance model.
//!
//! Rate of climb or descent follows the total-energy balance
//! `dh/dt = (T_HR - D) * V_TAS / (m * g0) * f(M)` with zero temperature
//! deviation. Thrust and drag use openly published functional forms with
//! synthetic coefficients; see [`fleet`] for the stock aircraft set.

mod fleet;

pub use fleet::synth_fleet;

use serde::{Deserialize, Serialize};

use crate::atmosphere::{self, AtmoState, G0, H_TROP_FT, KAPPA, LAPSE, R_AIR};
use crate::dataio::{Blip, Trajectory};
use crate::units::{KT_TO_MS, MS_TO_FPM};
use crate::{Error, Phase, Result};

/// Consecutive wrong-signed ROCD steps tolerated before integration gives up.
const MAX_WRONG_SIGN_STEPS: usize = 10;
const MAX_STEPS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Jet,
    Turboprop,
}

/// Climb thrust coefficients.
///
/// Jet: `T = c1 * (1 - h/c2_ft + c3 * h^2)` with `h` in ft, T in N.
/// Turboprop: `T = c1 / V_kt * (1 - h/c2_ft) + c3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrustCoeffs {
    pub c1: f64,
    pub c2_ft: f64,
    pub c3: f64,
}

/// Step change of available thrust at an altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrustBreak {
    pub altitude_ft: f64,
    /// Multiplier applied at and above `altitude_ft`.
    pub factor_above: f64,
}

/// Constant-CAS below the crossover, constant-Mach above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSchedule {
    pub cas_kt: f64,
    pub mach: f64,
}

impl SpeedSchedule {
    pub fn crossover_ft(&self) -> Result<f64> {
        atmosphere::crossover_altitude(self.cas_kt, self.mach)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftConfig {
    pub type_code: String,
    pub engine: Engine,
    pub mass_kg: f64,
    pub wing_area_m2: f64,
    /// Zero-lift drag coefficient.
    pub drag_cd0: f64,
    /// Induced drag coefficient (`CD = cd0 + cd2 * CL^2`).
    pub drag_cd2: f64,
    pub thrust: ThrustCoeffs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thrust_break: Option<ThrustBreak>,
    pub climb_schedule: SpeedSchedule,
    pub descent_schedule: SpeedSchedule,
    pub descent_thrust_fraction: f64,
    /// Descents are flown at this fixed rate instead of the energy balance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_descent_rocd_fpm: Option<f64>,
}

/// Energy share factor regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EsfBranch {
    ConstCasBelowTrop,
    ConstCasAboveTrop,
    ConstMachBelowTrop,
    ConstMachAboveTrop,
}

impl EsfBranch {
    pub fn select(const_mach: bool, h_ft: f64) -> Self {
        let above = h_ft >= H_TROP_FT;
        match (const_mach, above) {
            (false, false) => EsfBranch::ConstCasBelowTrop,
            (false, true) => EsfBranch::ConstCasAboveTrop,
            (true, false) => EsfBranch::ConstMachBelowTrop,
            (true, true) => EsfBranch::ConstMachAboveTrop,
        }
    }

    pub fn is_const_mach(self) -> bool {
        matches!(self, EsfBranch::ConstMachBelowTrop | EsfBranch::ConstMachAboveTrop)
    }
}

/// Energy share factor for the given regime.
pub fn esf(mach: f64, branch: EsfBranch) -> Result<f64> {
    if !(mach > 0.0 && mach < 1.0) {
        return Err(Error::Domain(format!("Mach {mach} outside (0, 1)")));
    }
    let m2 = mach * mach;
    let lapse_term = KAPPA * R_AIR * LAPSE / (2.0 * G0) * m2;
    let base = 1.0 + (KAPPA - 1.0) / 2.0 * m2;
    let compress = base.powf(-1.0 / (KAPPA - 1.0)) * (base.powf(KAPPA / (KAPPA - 1.0)) - 1.0);
    Ok(match branch {
        EsfBranch::ConstMachAboveTrop => 1.0,
        EsfBranch::ConstMachBelowTrop => 1.0 / (1.0 + lapse_term),
        EsfBranch::ConstCasBelowTrop => 1.0 / (1.0 + lapse_term + compress),
        EsfBranch::ConstCasAboveTrop => 1.0 / (1.0 + compress),
    })
}

impl AircraftConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.type_code)));
        if !(self.mass_kg > 0.0) {
            return bad(format!("mass {} must be positive", self.mass_kg));
        }
        if !(self.wing_area_m2 > 0.0) {
            return bad("wing area must be positive".into());
        }
        if !(self.drag_cd0 >= 0.0 && self.drag_cd2 >= 0.0) {
            return bad("drag coefficients must be non-negative".into());
        }
        if !(self.descent_thrust_fraction > 0.0 && self.descent_thrust_fraction < 1.0) {
            return bad("descent thrust fraction must be in (0, 1)".into());
        }
        for (name, s) in [("climb", &self.climb_schedule), ("descent", &self.descent_schedule)] {
            if !(s.mach > 0.0 && s.mach < 1.0) {
                return bad(format!("{name} Mach {} outside (0, 1)", s.mach));
            }
            let x = s.crossover_ft().map_err(|e| Error::Config(format!("{}: {e}", self.type_code)))?;
            if !(10_000.0 < x && x < 45_000.0) {
                return bad(format!("{name} crossover {x:.0} ft outside (10000, 45000)"));
            }
        }
        if let Some(r) = self.fixed_descent_rocd_fpm {
            if !(r > 0.0) {
                return bad("fixed descent rate must be a positive magnitude".into());
            }
        }
        Ok(())
    }

    pub fn schedule(&self, phase: Phase) -> &SpeedSchedule {
        match phase {
            Phase::Climb => &self.climb_schedule,
            Phase::Descent => &self.descent_schedule,
        }
    }

    /// Maximum climb thrust, N.
    pub fn climb_thrust(&self, h_ft: f64, tas_kt: f64) -> f64 {
        let c = &self.thrust;
        let t = match self.engine {
            Engine::Jet => c.c1 * (1.0 - h_ft / c.c2_ft + c.c3 * h_ft * h_ft),
            Engine::Turboprop => c.c1 / tas_kt * (1.0 - h_ft / c.c2_ft) + c.c3,
        };
        match self.thrust_break {
            Some(b) if h_ft >= b.altitude_ft => t * b.factor_above,
            _ => t,
        }
    }

    /// Drag from the parabolic polar, N.
    pub fn drag(&self, atm: &AtmoState, tas_kt: f64) -> f64 {
        let v = tas_kt * KT_TO_MS;
        let q = 0.5 * atm.rho * v * v;
        let cl = self.mass_kg * G0 / (q * self.wing_area_m2);
        q * self.wing_area_m2 * (self.drag_cd0 + self.drag_cd2 * cl * cl)
    }

    fn profile(&self, phase: Phase) -> Result<SpeedProfile> {
        let s = *self.schedule(phase);
        Ok(SpeedProfile { sched: s, crossover_ft: s.crossover_ft()? })
    }

    /// Scheduled TAS and ESF branch at altitude for a phase.
    pub fn scheduled_speed(&self, h_ft: f64, phase: Phase) -> Result<(f64, EsfBranch)> {
        self.profile(phase)?.at(h_ft)
    }
}

#[derive(Debug, Clone, Copy)]
struct SpeedProfile {
    sched: SpeedSchedule,
    crossover_ft: f64,
}

impl SpeedProfile {
    fn at(&self, h_ft: f64) -> Result<(f64, EsfBranch)> {
        let atm = atmosphere::isa_at(h_ft)?;
        let const_mach = h_ft >= self.crossover_ft;
        let tas = if const_mach { self.sched.mach * atm.a_sound } else { atmosphere::cas_to_tas_at(self.sched.cas_kt, &atm) };
        Ok((tas, EsfBranch::select(const_mach, h_ft)))
    }
}

/// Rate of climb or descent, ft/min.
///
/// Descent uses `descent_thrust_fraction` of climb thrust. Negative excess
/// power in climb is returned as is.
pub fn rocd(cfg: &AircraftConfig, h_ft: f64, tas_kt: f64, phase: Phase, branch: EsfBranch) -> Result<f64> {
    if !(tas_kt > 0.0) {
        return Err(Error::Domain(format!("TAS must be positive, got {tas_kt}")));
    }
    let atm = atmosphere::isa_at(h_ft)?;
    let f = esf(tas_kt / atm.a_sound, branch)?;
    let mut thrust = cfg.climb_thrust(h_ft, tas_kt);
    if phase == Phase::Descent {
        thrust *= cfg.descent_thrust_fraction;
    }
    let drag = cfg.drag(&atm, tas_kt);
    let v = tas_kt * KT_TO_MS;
    Ok((thrust - drag) * v / (cfg.mass_kg * G0) * f * MS_TO_FPM)
}

fn rate(cfg: &AircraftConfig, prof: &SpeedProfile, h: f64, phase: Phase) -> Result<(f64, f64)> {
    let (tas, branch) = prof.at(h)?;
    let r = match (phase, cfg.fixed_descent_rocd_fpm) {
        (Phase::Descent, Some(fixed)) => -fixed,
        _ => rocd(cfg, h, tas, phase, branch)?,
    };
    Ok((tas, r))
}

/// Result of [`integrate`]: the blip trajectory plus the linearly
/// interpolated time at which the target altitude was crossed.
#[derive(Debug, Clone)]
pub struct Integration {
    pub trajectory: Trajectory,
    pub crossing_time_s: f64,
}

/// Integrates a climb or descent from `h0` to `h_target` with fixed-step RK4.
///
/// Blips are emitted every `dt` seconds. The final blip sits on the first
/// step that reaches the target, with altitude clamped to `h_target` and TAS
/// and ROCD linearly interpolated to the crossing.
pub fn integrate_trajectory(cfg: &AircraftConfig, h0: f64, h_target: f64, phase: Phase, dt: f64) -> Result<Trajectory> {
    integrate(cfg, h0, h_target, phase, dt).map(|i| i.trajectory)
}

/// See [`integrate_trajectory`].
pub fn integrate(cfg: &AircraftConfig, h0: f64, h_target: f64, phase: Phase, dt: f64) -> Result<Integration> {
    if h0 == h_target {
        return Err(Error::Input("start and target altitude coincide".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Input(format!("step must be positive, got {dt}")));
    }
    if (h_target - h0) * phase.sign() < 0.0 {
        return Err(Error::Input(format!("{phase} from {h0} ft cannot reach {h_target} ft")));
    }
    let prof = cfg.profile(phase)?;
    let deriv = |h: f64| rate(cfg, &prof, h, phase).map(|(_, r)| r / 60.0);

    let (tas0, r0) = rate(cfg, &prof, h0, phase)?;
    let mut blips = vec![Blip { t: 0.0, h: h0, tas: tas0, rocd: r0 }];
    let mut h = h0;
    let mut wrong_sign = 0usize;
    for step in 1..=MAX_STEPS {
        let k1 = deriv(h)?;
        let k2 = deriv(h + 0.5 * dt * k1)?;
        let k3 = deriv(h + 0.5 * dt * k2)?;
        let k4 = deriv(h + dt * k3)?;
        let h_next = h + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t = step as f64 * dt;
        let prev = *blips.last().expect("non-empty");

        if phase.reached(h_next, h_target) {
            let (tas_n, r_n) = rate(cfg, &prof, h_next.clamp(0.0, atmosphere::H_MAX_FT), phase)?;
            let s = (h_target - h) / (h_next - h);
            blips.push(Blip { t, h: h_target, tas: prev.tas + s * (tas_n - prev.tas), rocd: prev.rocd + s * (r_n - prev.rocd) });
            return Ok(Integration { trajectory: Trajectory::reference(cfg, phase, blips, h_target), crossing_time_s: t - dt + s * dt });
        }

        let (tas_n, r_n) = rate(cfg, &prof, h_next, phase)?;
        if r_n * phase.sign() <= 0.0 {
            wrong_sign += 1;
            if wrong_sign > MAX_WRONG_SIGN_STEPS {
                return Err(Error::Divergence(format!("{}: {phase} ROCD has wrong sign near {h_next:.0} ft", cfg.type_code)));
            }
        } else {
            wrong_sign = 0;
        }
        blips.push(Blip { t, h: h_next, tas: tas_n, rocd: r_n });
        h = h_next;
    }
    Err(Error::Divergence(format!("{}: target not reached in {MAX_STEPS} steps", cfg.type_code)))
}

#[cfg(test)]
mod tests;
