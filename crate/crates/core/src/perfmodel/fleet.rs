use super::{AircraftConfig, Engine, SpeedSchedule, ThrustBreak, ThrustCoeffs};

#[allow(clippy::too_many_arguments)]
fn cfg(
    type_code: &str,
    engine: Engine,
    mass_kg: f64,
    wing_area_m2: f64,
    drag: (f64, f64),
    thrust: (f64, f64, f64),
    climb: (f64, f64),
    descent: (f64, f64),
    descent_thrust_fraction: f64,
) -> AircraftConfig {
    AircraftConfig {
        type_code: type_code.into(),
        engine,
        mass_kg,
        wing_area_m2,
        drag_cd0: drag.0,
        drag_cd2: drag.1,
        thrust: ThrustCoeffs { c1: thrust.0, c2_ft: thrust.1, c3: thrust.2 },
        thrust_break: None,
        climb_schedule: SpeedSchedule { cas_kt: climb.0, mach: climb.1 },
        descent_schedule: SpeedSchedule { cas_kt: descent.0, mach: descent.1 },
        descent_thrust_fraction,
        fixed_descent_rocd_fpm: None,
    }
}

/// Stock synthetic fleet: five jets from business to heavy and two
/// turboprops. `TPPC` carries a thrust step near FL230 and flies fixed-rate
/// descents.
pub fn synth_fleet() -> Vec<AircraftConfig> {
    let mut tppc =
        cfg("TPPC", Engine::Turboprop, 4_100.0, 25.8, (0.022, 0.045), (1.9e6, 140_000.0, 600.0), (170.0, 0.50), (180.0, 0.52), 0.25);
    tppc.thrust_break = Some(ThrustBreak { altitude_ft: 23_000.0, factor_above: 0.85 });
    tppc.fixed_descent_rocd_fpm = Some(1_500.0);

    vec![
        cfg("JA32", Engine::Jet, 64_000.0, 122.6, (0.024, 0.0375), (150_000.0, 52_000.0, 3.0e-11), (300.0, 0.78), (290.0, 0.78), 0.15),
        cfg("JB73", Engine::Jet, 65_000.0, 124.65, (0.0255, 0.0358), (152_000.0, 53_000.0, 3.0e-11), (300.0, 0.78), (290.0, 0.78), 0.15),
        cfg("JB78", Engine::Jet, 220_000.0, 377.0, (0.020, 0.042), (540_000.0, 55_000.0, 3.0e-11), (310.0, 0.85), (300.0, 0.85), 0.15),
        cfg("JE19", Engine::Jet, 45_000.0, 92.5, (0.025, 0.040), (110_000.0, 50_000.0, 3.0e-11), (290.0, 0.76), (280.0, 0.76), 0.15),
        cfg("JC56", Engine::Jet, 8_000.0, 34.4, (0.024, 0.045), (25_000.0, 55_000.0, 3.0e-11), (275.0, 0.73), (270.0, 0.73), 0.15),
        cfg("TPDH", Engine::Turboprop, 26_000.0, 63.1, (0.025, 0.036), (9.5e6, 150_000.0, 3_000.0), (220.0, 0.58), (230.0, 0.60), 0.25),
        tppc,
    ]
}
