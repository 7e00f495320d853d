//! International Standard Atmosphere and airspeed conversions.
//!
//! Two-layer ISA: a 6.5 K/km lapse up to the 11 km tropopause and an
//! isothermal layer above it. Altitudes are treated as geopotential for the
//! lookup. Temperature deviation from ISA is always zero.

use crate::units::{FT_TO_M, KT_TO_MS, MS_TO_KT};
use crate::{Error, Result};

pub const T0: f64 = 288.15;
pub const P0: f64 = 101_325.0;
pub const RHO0: f64 = P0 / (R_AIR * T0);
/// Temperature lapse rate below the tropopause, K/m.
pub const LAPSE: f64 = -0.0065;
pub const R_AIR: f64 = 287.052_87;
pub const KAPPA: f64 = 1.4;
pub const G0: f64 = 9.806_65;
pub const H_TROP_M: f64 = 11_000.0;
pub const H_TROP_FT: f64 = H_TROP_M / FT_TO_M;
pub const T_TROP: f64 = T0 + LAPSE * H_TROP_M;
pub const H_MAX_FT: f64 = 60_000.0;

const MU: f64 = (KAPPA - 1.0) / KAPPA;

/// Atmospheric state at one altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmoState {
    /// Altitude, ft.
    pub h: f64,
    /// Static temperature, K.
    pub t: f64,
    /// Static pressure, Pa.
    pub p: f64,
    /// Density, kg/m^3.
    pub rho: f64,
    /// Speed of sound, kt.
    pub a_sound: f64,
}

fn check_altitude(h_ft: f64) -> Result<()> {
    if !(0.0..=H_MAX_FT).contains(&h_ft) {
        return Err(Error::Domain(format!("altitude {h_ft} ft outside [0, {H_MAX_FT}]")));
    }
    Ok(())
}

/// ISA state at geopotential altitude `h_ft`.
pub fn isa_at(h_ft: f64) -> Result<AtmoState> {
    check_altitude(h_ft)?;
    let h = h_ft * FT_TO_M;
    let (t, p) = if h <= H_TROP_M {
        let t = T0 + LAPSE * h;
        (t, P0 * (t / T0).powf(-G0 / (LAPSE * R_AIR)))
    } else {
        let p_trop = P0 * (T_TROP / T0).powf(-G0 / (LAPSE * R_AIR));
        (T_TROP, p_trop * (-G0 / (R_AIR * T_TROP) * (h - H_TROP_M)).exp())
    };
    Ok(AtmoState { h: h_ft, t, p, rho: p / (R_AIR * t), a_sound: (KAPPA * R_AIR * t).sqrt() * MS_TO_KT })
}

/// Compressible calibrated-to-true airspeed conversion.
pub fn tas_from_cas(cas_kt: f64, h_ft: f64) -> Result<f64> {
    if !(cas_kt > 0.0) {
        return Err(Error::Domain(format!("CAS must be positive, got {cas_kt}")));
    }
    let atm = isa_at(h_ft)?;
    Ok(cas_to_tas_at(cas_kt, &atm))
}

pub(crate) fn cas_to_tas_at(cas_kt: f64, atm: &AtmoState) -> f64 {
    let v = cas_kt * KT_TO_MS;
    let inner = (1.0 + MU / 2.0 * RHO0 / P0 * v * v).powf(1.0 / MU) - 1.0;
    let outer = (1.0 + P0 / atm.p * inner).powf(MU) - 1.0;
    (2.0 / MU * atm.p / atm.rho * outer).sqrt() * MS_TO_KT
}

/// Inverse of [`tas_from_cas`].
pub fn cas_from_tas(tas_kt: f64, h_ft: f64) -> Result<f64> {
    if !(tas_kt > 0.0) {
        return Err(Error::Domain(format!("TAS must be positive, got {tas_kt}")));
    }
    let atm = isa_at(h_ft)?;
    let v = tas_kt * KT_TO_MS;
    let inner = (1.0 + MU / 2.0 * atm.rho / atm.p * v * v).powf(1.0 / MU) - 1.0;
    let outer = (1.0 + atm.p / P0 * inner).powf(MU) - 1.0;
    Ok((2.0 / MU * P0 / RHO0 * outer).sqrt() * MS_TO_KT)
}

/// Mach number for a true airspeed at altitude.
pub fn mach_from_tas(tas_kt: f64, h_ft: f64) -> Result<f64> {
    if !(tas_kt > 0.0) {
        return Err(Error::Domain(format!("TAS must be positive, got {tas_kt}")));
    }
    Ok(tas_kt / isa_at(h_ft)?.a_sound)
}

/// True airspeed for a Mach number at altitude.
pub fn tas_from_mach(mach: f64, h_ft: f64) -> Result<f64> {
    Ok(mach * isa_at(h_ft)?.a_sound)
}

fn mach_of_cas(cas_kt: f64, h_ft: f64) -> f64 {
    // h is always bracketed inside the valid range by the caller
    let atm = isa_at(h_ft).expect("bracketed altitude");
    cas_to_tas_at(cas_kt, &atm) / atm.a_sound
}

/// Altitude at which a constant-CAS climb reaches `mach`.
///
/// The Mach number of a constant CAS rises monotonically with altitude, so the
/// crossover is bracketed on [0, 60 000] ft and refined by bisection well
/// below a foot.
pub fn crossover_altitude(cas_kt: f64, mach: f64) -> Result<f64> {
    if !(cas_kt > 0.0) {
        return Err(Error::Domain(format!("CAS must be positive, got {cas_kt}")));
    }
    if !(mach > 0.0 && mach < 1.0) {
        return Err(Error::Domain(format!("Mach must be in (0, 1), got {mach}")));
    }
    let resid = |h: f64| mach_of_cas(cas_kt, h) - mach;
    let (mut lo, mut hi) = (0.0, H_MAX_FT);
    if resid(lo) > 0.0 {
        return Err(Error::NotFound(format!("crossover of {cas_kt} kt / M{mach} is below 0 ft")));
    }
    if resid(hi) < 0.0 {
        return Err(Error::NotFound(format!("crossover of {cas_kt} kt / M{mach} is above {H_MAX_FT} ft")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = resid(mid);
        if r == 0.0 {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-7 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
