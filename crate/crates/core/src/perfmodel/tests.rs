use super::*;
use crate::atmosphere::{cas_from_tas, isa_at, tas_from_cas};

fn jet() -> AircraftConfig {
    synth_fleet().into_iter().find(|c| c.type_code == "JB73").unwrap()
}

#[test]
fn zero_excess_thrust_gives_zero_rocd() {
    let h = 25_000.0;
    let tas = 430.0;
    let mut cfg = jet();
    let drag = cfg.drag(&isa_at(h).unwrap(), tas);
    cfg.thrust = ThrustCoeffs { c1: drag, c2_ft: f64::INFINITY, c3: 0.0 };
    let r = rocd(&cfg, h, tas, Phase::Climb, EsfBranch::ConstCasBelowTrop).unwrap();
    assert!(r.abs() < 1e-9, "{r}");
}

#[test]
fn unit_esf_gives_specific_excess_power() {
    let cfg = jet();
    let (h, tas) = (38_000.0, 450.0);
    let atm = isa_at(h).unwrap();
    let excess = cfg.climb_thrust(h, tas) - cfg.drag(&atm, tas);
    let v = excess * tas * KT_TO_MS / (cfg.mass_kg * G0) * MS_TO_FPM;
    let r = rocd(&cfg, h, tas, Phase::Climb, EsfBranch::ConstMachAboveTrop).unwrap();
    assert!((r - v).abs() < 1e-9);
}

/// Hand evaluation of the energy balance with locally restated constants.
#[test]
fn jet_rocd_matches_hand_evaluation() {
    let cfg = jet();
    let h_ft = 20_000.0;
    let tas_kt = tas_from_cas(cfg.climb_schedule.cas_kt, h_ft).unwrap();

    let h_m = h_ft * 0.3048;
    let temp = 288.15 - 0.0065 * h_m;
    let p = 101_325.0 * (temp / 288.15f64).powf(9.80665 / (0.0065 * 287.05287));
    let rho = p / (287.05287 * temp);
    let v = tas_kt * 1852.0 / 3600.0;
    let mach = v / (1.4 * 287.05287 * temp).sqrt();
    let thrust = 152_000.0 * (1.0 - h_ft / 53_000.0 + 3.0e-11 * h_ft * h_ft);
    let q = 0.5 * rho * v * v;
    let cl = 65_000.0 * 9.80665 / (q * 124.65);
    let drag = q * 124.65 * (0.0255 + 0.0358 * cl * cl);
    let m2 = mach * mach;
    let esf =
        1.0 / (1.0 + 1.4 * 287.05287 * -0.0065 / (2.0 * 9.80665) * m2 + (1.0 + 0.2 * m2).powf(-2.5) * ((1.0 + 0.2 * m2).powf(3.5) - 1.0));
    let hand = (thrust - drag) * v / (65_000.0 * 9.80665) * esf / 0.3048 * 60.0;

    let r = rocd(&cfg, h_ft, tas_kt, Phase::Climb, EsfBranch::ConstCasBelowTrop).unwrap();
    assert!((r - hand).abs() < 0.1, "{r} vs {hand}");
    assert!(r > 1_500.0 && r < 3_500.0);
}

#[test]
fn esf_branches() {
    for m in [0.1, 0.5, 0.85] {
        assert_eq!(esf(m, EsfBranch::ConstMachAboveTrop).unwrap(), 1.0);
    }
    for b in [EsfBranch::ConstCasBelowTrop, EsfBranch::ConstCasAboveTrop] {
        assert!((esf(1e-4, b).unwrap() - 1.0).abs() < 1e-6);
    }
    for b in [EsfBranch::ConstCasBelowTrop, EsfBranch::ConstCasAboveTrop, EsfBranch::ConstMachBelowTrop, EsfBranch::ConstMachAboveTrop] {
        for m in [0.05, 0.3, 0.6, 0.9, 0.99] {
            let f = esf(m, b).unwrap();
            assert!(f > 0.0 && f <= 1.3, "{b:?} {m} {f}");
        }
    }
    assert!(matches!(esf(1.0, EsfBranch::ConstCasBelowTrop), Err(Error::Domain(_))));
    assert!(esf(0.0, EsfBranch::ConstCasBelowTrop).is_err());
}

/// f = 1 / (1 + (V/g) dV/dh) with dV/dh by central differences along the
/// constant-CAS curve.
#[test]
fn esf_const_cas_matches_finite_difference() {
    let h = 20_000.0;
    let a = isa_at(h).unwrap().a_sound;
    let cas = cas_from_tas(0.7 * a, h).unwrap();
    let dh_ft = 1.0;
    let v = |h: f64| tas_from_cas(cas, h).unwrap() * KT_TO_MS;
    let dvdh = (v(h + dh_ft) - v(h - dh_ft)) / (2.0 * dh_ft * 0.3048);
    let fd = 1.0 / (1.0 + v(h) / G0 * dvdh);
    let f = esf(0.7, EsfBranch::ConstCasBelowTrop).unwrap();
    assert!(f > 0.5 && f < 1.0);
    assert!((f - fd).abs() < 1e-3, "{f} vs {fd}");
}

#[test]
fn integrate_rejects_bad_input() {
    let cfg = jet();
    assert!(matches!(integrate_trajectory(&cfg, 21_000.0, 21_000.0, Phase::Climb, 6.0), Err(Error::Input(_))));
    assert!(integrate_trajectory(&cfg, 21_000.0, 30_000.0, Phase::Descent, 6.0).is_err());
    assert!(integrate_trajectory(&cfg, 21_000.0, 30_000.0, Phase::Climb, 0.0).is_err());
}

#[test]
fn climb_is_monotone_and_clamped() {
    let t = integrate_trajectory(&jet(), 21_000.0, 35_000.0, Phase::Climb, 6.0).unwrap();
    assert!(t.blips.windows(2).all(|w| w[1].h > w[0].h));
    assert_eq!(t.blips.last().unwrap().h, 35_000.0);
    assert!(t.blips.iter().enumerate().all(|(i, b)| b.t == 6.0 * i as f64));
    t.validate().unwrap();
}

#[test]
fn half_step_self_convergence() {
    let cfg = jet();
    let a = integrate(&cfg, 21_000.0, 35_000.0, Phase::Climb, 6.0).unwrap();
    let b = integrate(&cfg, 21_000.0, 35_000.0, Phase::Climb, 3.0).unwrap();
    assert!((a.crossing_time_s - b.crossing_time_s).abs() < 0.5);
}

#[test]
fn speed_schedule_energy_consistency() {
    let cfg = jet();
    let xc = cfg.climb_schedule.crossover_ft().unwrap();
    let t = integrate_trajectory(&cfg, 21_000.0, 40_000.0, Phase::Climb, 6.0).unwrap();
    let body = &t.blips[..t.blips.len() - 1];
    for w in body.windows(2) {
        if w[0].h >= atmosphere::H_TROP_FT {
            assert!((w[1].tas - w[0].tas).abs() < 0.01);
        }
        if w[1].h < xc {
            assert!(w[1].tas >= w[0].tas);
        }
    }
}

#[test]
fn rocd_is_smooth_within_branch() {
    let cfg = jet();
    let b = EsfBranch::ConstCasBelowTrop;
    let d = 1.0;
    let mut prev: Option<f64> = None;
    for i in 0..50 {
        let h = 21_000.0 + 100.0 * i as f64;
        let slope = (rocd(&cfg, h + d, 420.0, Phase::Climb, b).unwrap() - rocd(&cfg, h - d, 420.0, Phase::Climb, b).unwrap()) / (2.0 * d);
        assert!(slope.abs() < 1.0, "ft/min per ft: {slope}");
        if let Some(p) = prev {
            assert!((slope - p).abs() < 0.05);
        }
        prev = Some(slope);
    }
}

#[test]
fn deterministic_integration() {
    let cfg = jet();
    let a = integrate_trajectory(&cfg, 33_000.0, 22_000.0, Phase::Descent, 6.0).unwrap();
    let b = integrate_trajectory(&cfg, 33_000.0, 22_000.0, Phase::Descent, 6.0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn weak_config_diverges() {
    let mut cfg = jet();
    cfg.thrust.c1 *= 0.3;
    assert!(matches!(integrate_trajectory(&cfg, 21_000.0, 35_000.0, Phase::Climb, 6.0), Err(Error::Divergence(_))));
}

#[test]
fn fleet_contract() {
    let fleet = synth_fleet();
    assert!(fleet.len() >= 6);
    let jets: Vec<_> = fleet.iter().filter(|c| c.engine == Engine::Jet).collect();
    let props: Vec<_> = fleet.iter().filter(|c| c.engine == Engine::Turboprop).collect();
    assert!(jets.len() >= 4 && props.len() >= 2);
    for c in &fleet {
        c.validate().unwrap();
        integrate_trajectory(c, 21_000.0, 33_000.0, Phase::Climb, 6.0).unwrap();
        integrate_trajectory(c, 21_000.0, 35_000.0, Phase::Climb, 6.0).unwrap();
        integrate_trajectory(c, 35_000.0, 21_000.0, Phase::Descent, 6.0).unwrap();
    }
    for c in &jets {
        let x = c.climb_schedule.crossover_ft().unwrap();
        assert!(25_000.0 < x && x < 35_000.0, "{} {x}", c.type_code);
    }
    assert!(fleet.iter().filter(|c| c.thrust_break.is_some()).count() >= 1);
}

#[test]
fn turboprops_climb_slower_than_heavy_jet() {
    let fleet = synth_fleet();
    let mean_rocd = |c: &AircraftConfig| {
        let t = integrate_trajectory(c, 21_000.0, 25_000.0, Phase::Climb, 6.0).unwrap();
        t.blips.iter().map(|b| b.rocd).sum::<f64>() / t.blips.len() as f64
    };
    let heavy = fleet.iter().max_by(|a, b| a.mass_kg.total_cmp(&b.mass_kg)).unwrap();
    assert_eq!(heavy.engine, Engine::Jet);
    let heavy_rocd = mean_rocd(heavy);
    for c in fleet.iter().filter(|c| c.engine == Engine::Turboprop) {
        assert!(mean_rocd(c) < heavy_rocd, "{}", c.type_code);
    }
}

#[test]
fn toml_round_trip() {
    for c in synth_fleet() {
        let text = toml::to_string(&c).unwrap();
        let back: AircraftConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
