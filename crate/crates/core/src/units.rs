//! Aviation/SI unit conversions. Public interfaces speak ft, kt, ft/min and nmi.

pub const FT_TO_M: f64 = 0.3048;
pub const M_TO_FT: f64 = 1.0 / FT_TO_M;
pub const KT_TO_MS: f64 = 1852.0 / 3600.0;
pub const MS_TO_KT: f64 = 3600.0 / 1852.0;
/// m/s to ft/min.
pub const MS_TO_FPM: f64 = 60.0 / FT_TO_M;

/// Distance in nautical miles covered at `tas_kt` for `seconds`.
#[inline]
pub fn nmi(tas_kt: f64, seconds: f64) -> f64 {
    tas_kt * seconds / 3600.0
}
