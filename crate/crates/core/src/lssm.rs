//! Two-state discrete-time linear surrogate `x' = Φ_A x + Φ_B` over
//! `x = [h ft, TAS kt]`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::dataio::Trajectory;
use crate::{Error, Phase, Result};

/// Packed parameters `[a11, a12, a21, a22, b1, b2]`.
pub type Theta = [f64; 6];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVec {
    /// Altitude, ft.
    pub h: f64,
    /// True airspeed, kt.
    pub tas: f64,
}

impl StateVec {
    pub const fn new(h: f64, tas: f64) -> Self {
        StateVec { h, tas }
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.tas.is_finite()
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.h, self.tas)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        StateVec::new(v[0], v[1])
    }
}

/// Continuous-time dynamics `ẋ = A x + B` with the input folded into a
/// constant forcing vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousLssm {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
}

/// Discrete-time surrogate. `phi_b` is already per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lssm {
    pub phi_a: Matrix2<f64>,
    pub phi_b: Vector2<f64>,
    pub dt: f64,
}

impl Lssm {
    pub fn new(phi_a: Matrix2<f64>, phi_b: Vector2<f64>, dt: f64) -> Self {
        Lssm { phi_a, phi_b, dt }
    }

    /// Identity dynamics with a constant per-step increment.
    pub fn constant_rate(dh: f64, dtas: f64, dt: f64) -> Self {
        Lssm::new(Matrix2::identity(), Vector2::new(dh, dtas), dt)
    }

    pub fn theta(&self) -> Theta {
        let a = &self.phi_a;
        [a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)], self.phi_b[0], self.phi_b[1]]
    }

    pub fn from_theta(theta: &Theta, dt: f64) -> Self {
        Lssm::new(Matrix2::new(theta[0], theta[1], theta[2], theta[3]), Vector2::new(theta[4], theta[5]), dt)
    }

    #[inline]
    pub fn step(&self, x: StateVec) -> StateVec {
        step_theta(&self.theta(), x)
    }

    /// Spectral radius of `phi_a`.
    pub fn spectral_radius(&self) -> f64 {
        let a = &self.phi_a;
        let tr = a.trace();
        let det = a.determinant();
        let disc = tr * tr / 4.0 - det;
        if disc >= 0.0 {
            let s = disc.sqrt();
            (tr / 2.0 + s).abs().max((tr / 2.0 - s).abs())
        } else {
            det.abs().sqrt()
        }
    }
}

/// One step of the packed model.
#[inline]
pub fn step_theta(t: &Theta, x: StateVec) -> StateVec {
    StateVec { h: t[0] * x.h + t[1] * x.tas + t[4], tas: t[2] * x.h + t[3] * x.tas + t[5] }
}

/// Diagonal scaling for the fit cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingMatrix {
    pub h_ft: f64,
    pub tas_kt: f64,
}

impl Default for ScalingMatrix {
    fn default() -> Self {
        ScalingMatrix { h_ft: 30_000.0, tas_kt: 400.0 }
    }
}

impl ScalingMatrix {
    pub fn new(h_ft: f64, tas_kt: f64) -> Result<Self> {
        if !(h_ft > 0.0 && tas_kt > 0.0) {
            return Err(Error::Input("scaling factors must be positive".into()));
        }
        Ok(ScalingMatrix { h_ft, tas_kt })
    }

    #[inline]
    pub fn weighted_sq(&self, dh: f64, dtas: f64) -> f64 {
        let a = dh / self.h_ft;
        let b = dtas / self.tas_kt;
        a * a + b * b
    }
}

const EXPM_TERMS: usize = 24;

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let norm = m.abs().row_sum().max();
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = m / 2f64.powi(squarings as i32);
    let mut sum = Matrix2::identity();
    let mut term = Matrix2::identity();
    for k in 1..=EXPM_TERMS {
        term = term * scaled / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

fn condition_number(a: &Matrix2<f64>) -> f64 {
    let sv = a.svd(false, false).singular_values;
    let (hi, lo) = (sv.max(), sv.min());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Continuous to discrete conversion at step `dt`.
pub fn discretize(c: &ContinuousLssm, dt: f64) -> Result<Lssm> {
    if !(dt > 0.0) {
        return Err(Error::Input(format!("step must be positive, got {dt}")));
    }
    let ad = c.a * dt;
    let phi_a = expm2(&ad);
    let phi_b = match c.a.try_inverse() {
        Some(inv) if condition_number(&c.a) < 1e12 => (phi_a - Matrix2::identity()) * inv * c.b,
        _ => {
            // dt * sum_k (dt A)^k / (k+1)!, exact once (dt A)^k vanishes
            let mut sum = Matrix2::identity();
            let mut pow = Matrix2::identity();
            let mut fact = 1.0;
            for k in 1..200 {
                pow *= ad;
                fact *= (k + 1) as f64;
                let term = pow / fact;
                sum += term;
                if term.abs().max() <= 1e-18 * sum.abs().max() {
                    break;
                }
            }
            sum * c.b * dt
        }
    };
    Ok(Lssm { phi_a, phi_b, dt })
}

/// `[x0, x1, ..., xn]` with `x_{k+1} = Φ_A x_k + Φ_B`.
pub fn rollout(m: &Lssm, x0: StateVec, n: usize) -> Result<Vec<StateVec>> {
    if n == 0 {
        return Err(Error::Input("rollout needs at least one step".into()));
    }
    let theta = m.theta();
    let mut out = Vec::with_capacity(n + 1);
    out.push(x0);
    let mut x = x0;
    for step in 1..=n {
        x = step_theta(&theta, x);
        if !x.is_finite() {
            return Err(Error::Overflow { step });
        }
        out.push(x);
    }
    Ok(out)
}

/// Scaled squared error of a free-running rollout against observed states.
/// Non-finite rollouts give `+inf`.
pub fn rollout_cost(theta: &Theta, states: &[StateVec], scale: &ScalingMatrix) -> f64 {
    let Some(&first) = states.first() else { return 0.0 };
    let mut x = first;
    let mut cost = 0.0;
    for obs in &states[1..] {
        x = step_theta(theta, x);
        cost += scale.weighted_sq(x.h - obs.h, x.tas - obs.tas);
    }
    if cost.is_finite() {
        cost
    } else {
        f64::INFINITY
    }
}

/// Fit objective: rollout from the first blip only, residuals summed over the
/// remaining blips.
pub fn fit_cost(m: &Lssm, traj: &Trajectory, scale: &ScalingMatrix) -> Result<f64> {
    check_cadence(traj, m.dt)?;
    Ok(rollout_cost(&m.theta(), &traj.states(), scale))
}

pub(crate) fn check_cadence(traj: &Trajectory, dt: f64) -> Result<()> {
    if traj.blips.len() < 2 {
        return Err(Error::Format(format!("trajectory {} has fewer than 2 blips", traj.id)));
    }
    for w in traj.blips.windows(2) {
        if ((w[1].t - w[0].t) - dt).abs() > 1e-6 {
            return Err(Error::Format(format!("trajectory {}: blip gap {} s does not match model step {dt} s", traj.id, w[1].t - w[0].t)));
        }
    }
    Ok(())
}

/// Root-mean-square altitude and TAS errors of a rollout against observations.
pub fn rollout_rmse(m: &Lssm, states: &[StateVec]) -> (f64, f64) {
    if states.len() < 2 {
        return (0.0, 0.0);
    }
    let theta = m.theta();
    let mut x = states[0];
    let (mut sh, mut sv) = (0.0, 0.0);
    for obs in &states[1..] {
        x = step_theta(&theta, x);
        sh += (x.h - obs.h).powi(2);
        sv += (x.tas - obs.tas).powi(2);
    }
    let n = (states.len() - 1) as f64;
    ((sh / n).sqrt(), (sv / n).sqrt())
}

/// Cubic TAS-versus-altitude fit, altitude normalised by 30 000 ft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicTasFit {
    /// `[λ1, λ2, λ3, λ4]` for `tas = λ1 z³ + λ2 z² + λ3 z + λ4`, `z = h / 30 000`.
    pub coeffs: [f64; 4],
    pub rmse: f64,
}

pub const CUBIC_H_NORM: f64 = 30_000.0;

pub fn cubic_tas_fit(traj: &Trajectory) -> Result<CubicTasFit> {
    let n = traj.blips.len();
    if n < 8 {
        return Err(Error::Input(format!("cubic fit needs 8 blips, got {n}")));
    }
    let (lo, hi) = traj.blips.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| (lo.min(b.h), hi.max(b.h)));
    if hi - lo == 0.0 {
        return Err(Error::Degenerate("all blips at one altitude".into()));
    }
    if hi - lo < 2_000.0 {
        return Err(Error::Input(format!("cubic fit needs a 2000 ft span, got {:.0} ft", hi - lo)));
    }
    let design = DMatrix::from_fn(n, 4, |i, j| (traj.blips[i].h / CUBIC_H_NORM).powi(3 - j as i32));
    let y = DVector::from_iterator(n, traj.blips.iter().map(|b| b.tas));
    let svd = design.clone().svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= 1e-12 * sv.max() {
        return Err(Error::Degenerate("rank-deficient cubic design".into()));
    }
    let sol = svd.solve(&y, 0.0).map_err(|e| Error::Numerical(e.to_string()))?;
    let resid = &design * &sol - &y;
    Ok(CubicTasFit { coeffs: [sol[0], sol[1], sol[2], sol[3]], rmse: (resid.norm_squared() / n as f64).sqrt() })
}

/// Which part of a trajectory a model was fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Whole,
    Below,
    Above,
}

impl Segment {
    pub fn as_str(self) -> &'static str {
        match self {
            Segment::Whole => "whole",
            Segment::Below => "below",
            Segment::Above => "above",
        }
    }
}

impl FromStr for Segment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" => Ok(Segment::Whole),
            "below" => Ok(Segment::Below),
            "above" => Ok(Segment::Above),
            other => Err(Error::Format(format!("unknown segment '{other}'"))),
        }
    }
}

/// A fitted model with its provenance; one line of a model file.
///
/// Line layout (whitespace separated):
/// `type phase segment source_id final_cost a11 a12 a21 a22 b1 b2 dt_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub aircraft_type: String,
    pub phase: Phase,
    pub segment: Segment,
    pub source_id: String,
    pub final_cost: f64,
    pub model: Lssm,
}

pub const RECORD_HEADER: &str = "# type phase segment source_id final_cost a11 a12 a21 a22 b1 b2 dt_s";

impl fmt::Display for ModelRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {} {:e}", self.aircraft_type, self.phase, self.segment.as_str(), self.source_id, self.final_cost)?;
        for v in self.model.theta() {
            write!(f, " {v:e}")?;
        }
        write!(f, " {}", self.model.dt)
    }
}

impl FromStr for ModelRecord {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 12 {
            return Err(Error::Format(format!("model record needs 12 fields, got {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|e| Error::Format(format!("field {} '{}': {e}", i + 1, fields[i])))
        };
        let mut theta = [0.0; 6];
        for (k, slot) in theta.iter_mut().enumerate() {
            *slot = num(5 + k)?;
        }
        Ok(ModelRecord {
            aircraft_type: fields[0].to_string(),
            phase: fields[1].parse()?,
            segment: fields[2].parse()?,
            source_id: fields[3].to_string(),
            final_cost: num(4)?,
            model: Lssm::from_theta(&theta, num(11)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Blip;

    fn traj_from(states: &[StateVec]) -> Trajectory {
        Trajectory {
            id: "x".into(),
            aircraft_type: "T".into(),
            phase: Phase::Climb,
            day: "d0".into(),
            blips: states.iter().enumerate().map(|(i, s)| Blip { t: 6.0 * i as f64, h: s.h, tas: s.tas, rocd: 0.0 }).collect(),
            h_target: states.last().unwrap().h,
        }
    }

    fn taylor(m: &Matrix2<f64>, terms: usize) -> Matrix2<f64> {
        let mut sum = Matrix2::identity();
        let mut term = Matrix2::identity();
        for k in 1..terms {
            term = term * m / k as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn zero_dynamics() {
        let c = ContinuousLssm { a: Matrix2::zeros(), b: Vector2::new(3.0, -1.5) };
        let d = discretize(&c, 6.0).unwrap();
        assert_eq!(d.phi_a, Matrix2::identity());
        assert!((d.phi_b - Vector2::new(18.0, -9.0)).abs().max() < 1e-15);
    }

    #[test]
    fn nilpotent_exact() {
        let c = ContinuousLssm { a: Matrix2::new(0.0, 1.0, 0.0, 0.0), b: Vector2::zeros() };
        let d = discretize(&c, 6.0).unwrap();
        assert_eq!(d.phi_a, Matrix2::new(1.0, 6.0, 0.0, 1.0));
        assert_eq!(d.phi_b, Vector2::zeros());
    }

    #[test]
    fn scalar_diagonal_matches_taylor() {
        let a = -0.07;
        let c = ContinuousLssm { a: Matrix2::new(a, 0.0, 0.0, a), b: Vector2::new(2.0, 0.5) };
        let d = discretize(&c, 6.0).unwrap();
        let phi = taylor(&(c.a * 6.0), 30);
        assert!((d.phi_a - phi).abs().max() < 1e-12);
        assert!((d.phi_a[(0, 0)] - (a * 6.0).exp()).abs() < 1e-12);
        let expect_b = (phi - Matrix2::identity()) * c.a.try_inverse().unwrap() * c.b;
        assert!((d.phi_b - expect_b).abs().max() < 1e-12);
    }

    #[test]
    fn semigroup() {
        let c = ContinuousLssm { a: Matrix2::new(-0.1, 0.02, 0.3, -0.05), b: Vector2::new(1.0, 1.0) };
        let one = discretize(&c, 6.0).unwrap().phi_a;
        let two = discretize(&c, 12.0).unwrap().phi_a;
        assert!((one * one - two).abs().max() < 1e-9);
    }

    #[test]
    fn rollout_examples() {
        let m = Lssm::constant_rate(10.0, 0.0, 6.0);
        let xs = rollout(&m, StateVec::new(20_000.0, 300.0), 3).unwrap();
        let hs: Vec<f64> = xs.iter().map(|x| x.h).collect();
        assert_eq!(hs, vec![20_000.0, 20_010.0, 20_020.0, 20_030.0]);
        assert!(xs.iter().all(|x| x.tas == 300.0));

        let m = Lssm::new(Matrix2::zeros(), Vector2::new(7.0, 8.0), 6.0);
        let xs = rollout(&m, StateVec::new(1.0, 2.0), 4).unwrap();
        assert!(xs[1..].iter().all(|x| *x == StateVec::new(7.0, 8.0)));
    }

    #[test]
    fn rollout_overflow_reports_step() {
        let m = Lssm::new(Matrix2::new(1e200, 0.0, 0.0, 1.0), Vector2::zeros(), 6.0);
        match rollout(&m, StateVec::new(1e200, 1.0), 5) {
            Err(Error::Overflow { step }) => assert_eq!(step, 1),
            other => panic!("{other:?}"),
        }
        assert!(rollout(&m, StateVec::new(1.0, 1.0), 0).is_err());
    }

    #[test]
    fn fit_cost_hand_values() {
        let scale = ScalingMatrix::default();
        let m = Lssm::constant_rate(0.0, 0.0, 6.0);
        let x0 = StateVec::new(20_000.0, 300.0);
        let t = traj_from(&[x0, StateVec::new(20_000.0 + 30_000.0, 300.0)]);
        assert!((fit_cost(&m, &t, &scale).unwrap() - 1.0).abs() < 1e-15);

        let t = traj_from(&[x0, StateVec::new(20_000.0 - 300.0, 300.0 - 4.0), StateVec::new(20_000.0 - 600.0, 300.0 - 8.0)]);
        let c = fit_cost(&m, &t, &scale).unwrap();
        assert!((c - 0.0010).abs() < 1e-12, "{c}");
    }

    #[test]
    fn fit_cost_rejects_cadence() {
        let mut t = traj_from(&[StateVec::new(1.0, 1.0), StateVec::new(2.0, 1.0)]);
        t.blips[1].t = 5.0;
        assert!(matches!(fit_cost(&Lssm::constant_rate(0.0, 0.0, 6.0), &t, &ScalingMatrix::default()), Err(Error::Format(_))));
    }

    #[test]
    fn cubic_nested_models() {
        let lin: Vec<StateVec> = (0..20)
            .map(|i| {
                let h = 20_000.0 + 150.0 * i as f64;
                StateVec::new(h, 100.0 + 0.01 * h)
            })
            .collect();
        let fit = cubic_tas_fit(&traj_from(&lin)).unwrap();
        assert!(fit.coeffs[0].abs() < 1e-9 && fit.coeffs[1].abs() < 1e-9);
        assert!(fit.rmse < 1e-9);

        let flat: Vec<StateVec> = (0..20).map(|i| StateVec::new(20_000.0 + 150.0 * i as f64, 320.0)).collect();
        let fit = cubic_tas_fit(&traj_from(&flat)).unwrap();
        assert!(fit.coeffs[..3].iter().all(|c| c.abs() < 1e-9));
        assert!((fit.coeffs[3] - 320.0).abs() < 1e-9);
    }

    #[test]
    fn cubic_degenerate() {
        let same: Vec<StateVec> = (0..10).map(|_| StateVec::new(25_000.0, 300.0)).collect();
        assert!(matches!(cubic_tas_fit(&traj_from(&same)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn record_round_trip() {
        let rec = ModelRecord {
            aircraft_type: "JB73".into(),
            phase: Phase::Descent,
            segment: Segment::Above,
            source_id: "f-001".into(),
            final_cost: 1.234_567_890_123e-5,
            model: Lssm::from_theta(&[0.999_1, 1.3e-3, -2.1e-4, 1.000_02, 152.3, -0.37], 6.0),
        };
        let back: ModelRecord = rec.to_string().parse().unwrap();
        assert_eq!(back, rec);
        assert!("a b c".parse::<ModelRecord>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn rollout_is_zero_cost(t in proptest::array::uniform6(-0.5f64..0.5), h in 10_000.0f64..40_000.0, v in 200.0f64..500.0, n in 1usize..60) {
            let theta = [1.0 + t[0] * 0.01, t[1] * 0.01, t[2] * 0.01, 1.0 + t[3] * 0.01, t[4] * 100.0, t[5]];
            let m = Lssm::from_theta(&theta, 6.0);
            let xs = rollout(&m, StateVec::new(h, v), n).unwrap();
            proptest::prop_assert_eq!(fit_cost(&m, &traj_from(&xs), &ScalingMatrix::default()).unwrap(), 0.0);
        }

        #[test]
        fn zero_a_is_linear_in_time(b1 in -50.0f64..50.0, b2 in -2.0f64..2.0, n in 1usize..100) {
            let c = ContinuousLssm { a: Matrix2::zeros(), b: Vector2::new(b1, b2) };
            let m = discretize(&c, 6.0).unwrap();
            let x0 = StateVec::new(21_000.0, 310.0);
            let xn = *rollout(&m, x0, n).unwrap().last().unwrap();
            let eh = x0.h + n as f64 * 6.0 * b1;
            let ev = x0.tas + n as f64 * 6.0 * b2;
            proptest::prop_assert!((xn.h - eh).abs() <= 1e-9 * eh.abs());
            proptest::prop_assert!((xn.tas - ev).abs() <= 1e-9 * ev.abs());
        }

        #[test]
        fn cost_ignores_metadata(id in "[a-z]{1,8}", ty in "[A-Z]{4}") {
            let xs = [StateVec::new(20_000.0, 300.0), StateVec::new(20_100.0, 301.0), StateVec::new(20_250.0, 301.5)];
            let mut t = traj_from(&xs);
            let m = Lssm::constant_rate(90.0, 0.4, 6.0);
            let base = fit_cost(&m, &t, &ScalingMatrix::default()).unwrap();
            t.id = id;
            t.aircraft_type = ty;
            proptest::prop_assert_eq!(fit_cost(&m, &t, &ScalingMatrix::default()).unwrap(), base);
        }
    }
}
