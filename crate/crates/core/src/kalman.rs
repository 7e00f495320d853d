//! Kalman filter on `[rocd, tas, h]` with constant-rate extrapolation to the
//! target altitude, the benchmark predictor.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::dataio::Blip;
use crate::units::nmi;
use crate::{Error, Phase, Result, BLIP_DT};

/// Smallest |ROCD| for a valid prediction, ft/min.
pub use crate::MIN_ROCD_FPM;

/// State component that receives the constant forcing in the prediction
/// step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForcingSlot {
    Altitude,
    Tas,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KfConfig {
    /// Initial covariance scale, `P0 = alpha_p I`.
    pub alpha_p: f64,
    /// Process noise scale, `Q = alpha_q I`.
    pub alpha_q: f64,
    /// Forcing magnitude in climb, ft/min.
    pub alpha_b_climb: f64,
    /// Forcing magnitude in descent, ft/min; applied with negative sign.
    pub alpha_b_descent: f64,
    pub forcing_slot: ForcingSlot,
    /// Measurement variances for (ROCD ft/min, TAS kt, altitude ft).
    pub r_meas: [f64; 3],
    pub dt: f64,
}

impl Default for KfConfig {
    fn default() -> Self {
        KfConfig {
            alpha_p: 1e5,
            alpha_q: 1.0,
            alpha_b_climb: 500.0,
            alpha_b_descent: 1_500.0,
            forcing_slot: ForcingSlot::Altitude,
            r_meas: [100.0 * 100.0, 2.5 * 2.5, 100.0 * 100.0],
            dt: BLIP_DT,
        }
    }
}

impl KfConfig {
    /// Signed forcing for a phase, ft/min.
    pub fn alpha_b(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Climb => self.alpha_b_climb,
            Phase::Descent => -self.alpha_b_descent,
        }
    }

    /// Same magnitude in both phases.
    pub fn with_alpha_b(self, alpha_b: f64) -> Self {
        KfConfig { alpha_b_climb: alpha_b, alpha_b_descent: alpha_b, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_p > 0.0 && self.alpha_q > 0.0 && self.dt > 0.0 && self.r_meas.iter().all(|r| *r >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Kalman config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfState {
    /// `[rocd ft/min, tas kt, h ft]`.
    pub x: Vector3<f64>,
    pub p: Matrix3<f64>,
}

impl KfState {
    pub fn new(x: Vector3<f64>, p: Matrix3<f64>) -> Self {
        KfState { x, p }
    }

    /// State at the first measurement with `P = alpha_p I`.
    pub fn init(y: Vector3<f64>, cfg: &KfConfig) -> Self {
        KfState { x: y, p: Matrix3::identity() * cfg.alpha_p }
    }

    pub fn rocd(&self) -> f64 {
        self.x[0]
    }

    pub fn tas(&self) -> f64 {
        self.x[1]
    }

    pub fn h(&self) -> f64 {
        self.x[2]
    }
}

/// Measurement vector of a blip, in state order.
pub fn measurement(b: &Blip) -> Vector3<f64> {
    Vector3::new(b.rocd, b.tas, b.h)
}

fn transition(dt: f64) -> Matrix3<f64> {
    let mut f = Matrix3::identity();
    f[(2, 0)] = dt / 60.0;
    f
}

/// Clips eigenvalues below zero after symmetrising. Fails if any is below
/// `-1e-9` relative to the largest.
fn clip_psd(p: Matrix3<f64>) -> Result<Matrix3<f64>> {
    let sym = 0.5 * (p + p.transpose());
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if eig.eigenvalues.iter().any(|l| *l < -1e-9 * scale) {
        return Err(Error::Numerical(format!("covariance lost definiteness: {:?}", eig.eigenvalues)));
    }
    if eig.eigenvalues.iter().all(|l| *l >= 0.0) {
        return Ok(sym);
    }
    let l = eig.eigenvalues.map(|v| v.max(0.0));
    Ok(eig.eigenvectors * Matrix3::from_diagonal(&l) * eig.eigenvectors.transpose())
}

/// Time update: altitude integrates ROCD, ROCD and TAS persist, and the
/// phase forcing `alpha_b dt / 60` is added to the configured slot.
pub fn kf_predict(s: &KfState, cfg: &KfConfig, phase: Phase) -> KfState {
    let f = transition(cfg.dt);
    let mut x = f * s.x;
    let forcing = cfg.alpha_b(phase) * cfg.dt / 60.0;
    match cfg.forcing_slot {
        ForcingSlot::Altitude => x[2] += forcing,
        ForcingSlot::Tas => x[1] += forcing,
    }
    let p = f * s.p * f.transpose() + Matrix3::identity() * cfg.alpha_q;
    KfState { x, p: 0.5 * (p + p.transpose()) }
}

/// Measurement update with `H = I` and a Joseph-form covariance.
pub fn kf_update(s: &KfState, y: &Vector3<f64>, cfg: &KfConfig) -> Result<KfState> {
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::Input(format!("non-finite measurement {y:?}")));
    }
    let r = Matrix3::from_diagonal(&Vector3::from(cfg.r_meas));
    let innov_cov = s.p + r;
    let inv = innov_cov
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numerical("innovation covariance is singular".into()))?;
    let k = s.p * inv;
    let x = s.x + k * (y - s.x);
    let i_k = Matrix3::identity() - k;
    let p = i_k * s.p * i_k.transpose() + k * r * k.transpose();
    Ok(KfState { x, p: clip_psd(p)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KfFailure {
    /// |ROCD| below [`MIN_ROCD_FPM`].
    SlowRocd,
    /// ROCD points away from the target.
    WrongSign,
}

impl std::fmt::Display for KfFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KfFailure::SlowRocd => "slow_rocd",
            KfFailure::WrongSign => "wrong_sign",
        })
    }
}

/// Time (s) and distance (nmi) to `h_target` at the filtered ROCD and TAS.
/// An estimate already at or past the target predicts zero.
pub fn kf_tp(s: &KfState, h_target: f64, phase: Phase) -> std::result::Result<(f64, f64), KfFailure> {
    let rocd = s.rocd();
    if rocd.abs() < MIN_ROCD_FPM {
        return Err(KfFailure::SlowRocd);
    }
    if rocd * phase.sign() < 0.0 {
        return Err(KfFailure::WrongSign);
    }
    if phase.reached(s.h(), h_target) {
        return Ok((0.0, 0.0));
    }
    let time = (h_target - s.h()) / rocd * 60.0;
    Ok((time, nmi(s.tas(), time)))
}

/// Hyperparameter grid for the benchmark sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfGrid {
    pub alpha_p: Vec<f64>,
    pub alpha_q: Vec<f64>,
    pub alpha_b: Vec<f64>,
}

impl Default for KfGrid {
    fn default() -> Self {
        KfGrid {
            alpha_p: vec![1.0, 1e2, 1e3, 1e4, 1e5],
            alpha_q: vec![1e-4, 1e-2, 1.0],
            alpha_b: vec![0.0, 500.0, 1_000.0, 1_500.0, 2_000.0],
        }
    }
}

impl KfGrid {
    /// Cells in row-major order (alpha_p outermost).
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &p in &self.alpha_p {
            for &q in &self.alpha_q {
                for &b in &self.alpha_b {
                    out.push((p, q, b));
                }
            }
        }
        out
    }
}

/// Filter over one trajectory's blips.
#[derive(Debug, Clone)]
pub struct KalmanTracker {
    pub cfg: KfConfig,
    pub phase: Phase,
    state: Option<KfState>,
}

impl KalmanTracker {
    pub fn new(cfg: KfConfig, phase: Phase) -> Result<Self> {
        cfg.validate()?;
        Ok(KalmanTracker { cfg, phase, state: None })
    }

    pub fn state(&self) -> Option<&KfState> {
        self.state.as_ref()
    }

    pub fn assimilate(&mut self, b: &Blip) -> Result<&KfState> {
        let y = measurement(b);
        let next = match &self.state {
            None => KfState::init(y, &self.cfg),
            Some(s) => kf_update(&kf_predict(s, &self.cfg, self.phase), &y, &self.cfg)?,
        };
        Ok(self.state.insert(next))
    }

    pub fn predict_to(&self, h_target: f64) -> Option<std::result::Result<(f64, f64), KfFailure>> {
        self.state.as_ref().map(|s| kf_tp(s, h_target, self.phase))
    }
}
