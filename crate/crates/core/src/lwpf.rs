//! Liu-West particle filter: joint tracking of the aircraft state and the
//! LSSM parameters, with ensemble prediction of time and distance to target.

use nalgebra::{SMatrix, SVector, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::lssm::{step_theta, ScalingMatrix, StateVec, Theta};
use crate::optimizer::PriorSet;
use crate::units::nmi;
use crate::{Error, Phase, Result, BLIP_DT, MIN_ROCD_FPM};

pub type Matrix6 = SMatrix<f64, 6, 6>;
type Vector6 = SVector<f64, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub state: StateVec,
    pub theta: Theta,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub n_p: usize,
    /// Kernel spread; the shrinkage factor is `1 - b^2`.
    pub b: f64,
    /// Resample when the effective particle count drops below this fraction
    /// of `n_p`.
    pub resample_frac: f64,
    /// Re-initialise when estimated and observed TAS differ by more, kt.
    pub reinit_tas_kt: f64,
    /// Diagonal observation covariance, (ft^2, kt^2).
    pub obs_noise_r: [f64; 2],
    pub ensemble_samples: usize,
    /// Standard deviations of the initial state spread, (ft, kt).
    pub init_state_sd: [f64; 2],
    /// Prediction horizon, steps.
    pub max_steps: usize,
    /// A sampled rollout whose rate of climb or descent falls below this,
    /// ft/min, is treated as a failed trajectory.
    pub min_rocd_fpm: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            n_p: 400,
            b: 0.2,
            resample_frac: 0.5,
            reinit_tas_kt: 5.0,
            obs_noise_r: [100.0 * 100.0, 2.5 * 2.5],
            ensemble_samples: 100,
            init_state_sd: [100.0, 2.5],
            max_steps: 600,
            min_rocd_fpm: MIN_ROCD_FPM,
            dt: BLIP_DT,
            seed: 0,
        }
    }
}

impl FilterConfig {
    /// Shrinkage factor.
    pub fn a(&self) -> f64 {
        1.0 - self.b * self.b
    }

    /// Uses the squared fit scaling as observation covariance.
    pub fn with_scaling_noise(self, l: &ScalingMatrix) -> Self {
        FilterConfig { obs_noise_r: [l.h_ft * l.h_ft, l.tas_kt * l.tas_kt], ..self }
    }

    /// A single particle is accepted for debugging sweeps.
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_p >= 1
            && self.b > 0.0
            && self.b < 1.0
            && self.resample_frac > 0.0
            && self.resample_frac <= 1.0
            && self.obs_noise_r.iter().all(|r| *r > 0.0)
            && self.init_state_sd.iter().all(|s| *s >= 0.0)
            && self.ensemble_samples >= 1
            && self.max_steps >= 1
            && self.min_rocd_fpm >= 0.0
            && self.dt > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid filter config {self:?}")))
        }
    }
}

/// Unnormalised Gaussian observation likelihood; 1 when `x == y`.
pub fn likelihood(x: StateVec, y: StateVec, r: &[f64; 2]) -> f64 {
    (-0.5 * ((y.h - x.h).powi(2) / r[0] + (y.tas - x.tas).powi(2) / r[1])).exp()
}

/// Indices picked by stratified resampling with one uniform in `[0, 1)` per
/// stratum.
pub fn stratified_indices(weights: &[f64], uniforms: &[f64]) -> Vec<usize> {
    let n = uniforms.len();
    let last = weights.len() - 1;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0usize;
    for (j, u) in uniforms.iter().enumerate() {
        let p = (j as f64 + u) / n as f64;
        while p >= cum && i < last {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub particles: Vec<Particle>,
    /// Observations assimilated so far.
    pub t: usize,
    pub last_observation: StateVec,
    pub estimate: StateVec,
    pub theta_mean: Theta,
    pub theta_var: Matrix6,
    /// Particles whose last propagation was non-finite.
    pub flagged: Vec<bool>,
    /// Set when every likelihood underflowed at the last update.
    pub degenerate: bool,
    pub reinit_count: usize,
}

fn theta_vec(t: &Theta) -> Vector6 {
    Vector6::from_column_slice(t)
}

impl FilterState {
    /// Particles around `x0` with parameters drawn uniformly with replacement
    /// from `prior`; uniform weights.
    pub fn init<R: Rng>(prior: &[Theta], x0: StateVec, cfg: &FilterConfig, rng: &mut R) -> Result<Self> {
        if prior.is_empty() {
            return Err(Error::Config("no prior models for this aircraft type and phase".into()));
        }
        cfg.validate()?;
        let w = 1.0 / cfg.n_p as f64;
        let draw = |sd: f64, rng: &mut R| if sd > 0.0 { Normal::new(0.0, sd).expect("finite sd").sample(rng) } else { 0.0 };
        let particles: Vec<Particle> = (0..cfg.n_p)
            .map(|_| {
                let theta = prior[rng.random_range(0..prior.len())];
                let state = StateVec::new(x0.h + draw(cfg.init_state_sd[0], rng), x0.tas + draw(cfg.init_state_sd[1], rng));
                Particle { state, theta, weight: w }
            })
            .collect();
        let mut fs = FilterState {
            flagged: vec![false; particles.len()],
            particles,
            t: 0,
            last_observation: x0,
            estimate: x0,
            theta_mean: [0.0; 6],
            theta_var: Matrix6::zeros(),
            degenerate: false,
            reinit_count: 0,
        };
        fs.refresh_moments();
        Ok(fs)
    }

    /// Weighted parameter mean and covariance. The mean is accumulated as an
    /// offset from the first particle so that identical parameters give an
    /// exact mean.
    fn refresh_moments(&mut self) {
        let base = theta_vec(&self.particles[0].theta);
        let mut mean = base;
        for p in &self.particles {
            mean += p.weight * (theta_vec(&p.theta) - base);
        }
        let mut var = Matrix6::zeros();
        for p in &self.particles {
            let d = theta_vec(&p.theta) - mean;
            var += p.weight * d * d.transpose();
        }
        self.theta_mean.copy_from_slice(mean.as_slice());
        self.theta_var = 0.5 * (var + var.transpose());
        self.estimate = self.weighted_state();
    }

    fn weighted_state(&self) -> StateVec {
        let (mut h, mut v) = (0.0, 0.0);
        for p in &self.particles {
            h += p.weight * p.state.h;
            v += p.weight * p.state.tas;
        }
        StateVec::new(h, v)
    }

    /// Advances every particle one step with its own parameters. A
    /// non-finite result keeps the previous state and flags the particle.
    pub fn predict(&mut self) {
        for (p, flag) in self.particles.iter_mut().zip(self.flagged.iter_mut()) {
            let next = step_theta(&p.theta, p.state);
            if next.is_finite() {
                p.state = next;
                *flag = false;
            } else {
                *flag = true;
            }
        }
        self.estimate = self.weighted_state();
    }

    /// Kernel shrinkage of the parameters toward their weighted mean plus
    /// Gaussian jitter with covariance `b^2 V`.
    pub fn shrink_parameters<R: Rng>(&mut self, cfg: &FilterConfig, rng: &mut R) {
        self.refresh_moments();
        let a = cfg.a();
        let mean = theta_vec(&self.theta_mean);
        let factor = jitter_factor(&self.theta_var);
        for p in &mut self.particles {
            let th = theta_vec(&p.theta);
            let mut next = th + (1.0 - a) * (mean - th);
            if let Some(s) = &factor {
                let z = Vector6::from_fn(|_, _| StandardNormal.sample(rng));
                next += cfg.b * s * z;
            }
            p.theta.copy_from_slice(next.as_slice());
        }
    }

    /// Replaces the weights by the normalised observation likelihoods.
    /// Flagged particles get zero weight. If every likelihood underflows the
    /// weights are reset to uniform and `degenerate` is set.
    pub fn update_weights(&mut self, y: StateVec, cfg: &FilterConfig) {
        let mut total = 0.0;
        for (p, flag) in self.particles.iter_mut().zip(&self.flagged) {
            p.weight = if *flag { 0.0 } else { likelihood(p.state, y, &cfg.obs_noise_r) };
            total += p.weight;
        }
        let n = self.particles.len() as f64;
        self.degenerate = !(total > 0.0 && total.is_finite());
        for p in &mut self.particles {
            p.weight = if self.degenerate { 1.0 / n } else { p.weight / total };
        }
        self.last_observation = y;
        self.estimate = self.weighted_state();
    }

    pub fn effective_n(&self) -> f64 {
        1.0 / self.particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
    }

    /// Stratified resampling when the effective count falls below the
    /// threshold. Returns whether it fired.
    pub fn maybe_resample<R: Rng>(&mut self, cfg: &FilterConfig, rng: &mut R) -> bool {
        let n = self.particles.len();
        if self.effective_n() >= cfg.resample_frac * n as f64 {
            return false;
        }
        let weights: Vec<f64> = self.particles.iter().map(|p| p.weight).collect();
        let uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let idx = stratified_indices(&weights, &uniforms);
        let w = 1.0 / n as f64;
        self.particles = idx.iter().map(|&i| Particle { weight: w, ..self.particles[i] }).collect();
        self.flagged = idx.iter().map(|&i| self.flagged[i]).collect();
        self.estimate = self.weighted_state();
        true
    }

    /// Restarts the filter around `y` when the TAS estimate is more than
    /// `reinit_tas_kt` away from it. Returns whether it fired.
    pub fn check_reinit<R: Rng>(&mut self, y: StateVec, prior: &[Theta], cfg: &FilterConfig, rng: &mut R) -> Result<bool> {
        if (self.estimate.tas - y.tas).abs() <= cfg.reinit_tas_kt {
            return Ok(false);
        }
        let mut fresh = FilterState::init(prior, y, cfg, rng)?;
        fresh.t = self.t;
        fresh.reinit_count = self.reinit_count + 1;
        log::debug!("filter re-initialised at observation {} (count {})", self.t, fresh.reinit_count);
        *self = fresh;
        Ok(true)
    }

    pub fn estimate(&self) -> StateVec {
        self.weighted_state()
    }

    /// Draws particles by weight and rolls each one forward until it reaches
    /// `h_target` or the horizon runs out.
    pub fn ensemble_predict<R: Rng>(
        &self,
        h_target: f64,
        phase: Phase,
        cfg: &FilterConfig,
        with_fan: bool,
        rng: &mut R,
    ) -> Result<EnsemblePrediction> {
        if phase.reached(self.estimate.h, h_target) {
            return Ok(EnsemblePrediction::reached());
        }
        let weights: Vec<f64> = self.particles.iter().map(|p| p.weight).collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::PredictionFailure(format!("bad weights: {e}")))?;
        let mut samples = Vec::with_capacity(cfg.ensemble_samples);
        let mut paths = Vec::new();
        for _ in 0..cfg.ensemble_samples {
            let p = &self.particles[pick.sample(rng)];
            let (sample, path) = roll_to_target(p, h_target, phase, cfg, with_fan);
            samples.push(sample);
            if with_fan {
                paths.push(path);
            }
        }
        let done: Vec<&EnsembleSample> = samples.iter().filter(|s| s.terminal).collect();
        if done.is_empty() {
            return Err(Error::PredictionFailure(format!(
                "no ensemble member reached {h_target:.0} ft within {} steps at the minimum rate",
                cfg.max_steps
            )));
        }
        let (mean_time_s, sd_time_s) = mean_sd(done.iter().map(|s| s.time_s));
        let (mean_distance_nmi, sd_distance_nmi) = mean_sd(done.iter().map(|s| s.distance_nmi));
        Ok(EnsemblePrediction {
            status: PredictionStatus::Predicted,
            nonterminal_frac: 1.0 - done.len() as f64 / samples.len() as f64,
            samples,
            mean_time_s,
            sd_time_s,
            mean_distance_nmi,
            sd_distance_nmi,
            fan: if with_fan { fan_summary(&paths) } else { Vec::new() },
        })
    }
}

/// Symmetric square root of a covariance, computed on the correlation matrix
/// for conditioning, with negative eigenvalues clipped to zero. `None` when
/// the covariance vanishes.
fn jitter_factor(v: &Matrix6) -> Option<Matrix6> {
    let d = Vector6::from_fn(|i, _| v[(i, i)].max(0.0).sqrt());
    if d.iter().all(|x| *x == 0.0) {
        return None;
    }
    let inv = d.map(|x| if x > 0.0 { 1.0 / x } else { 0.0 });
    let corr = Matrix6::from_fn(|i, j| v[(i, j)] * inv[i] * inv[j]);
    let eig = SymmetricEigen::new(0.5 * (corr + corr.transpose()));
    let sqrt_l = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let root = eig.eigenvectors * Matrix6::from_diagonal(&sqrt_l) * eig.eigenvectors.transpose();
    Some(Matrix6::from_diagonal(&d) * root)
}

/// Mean and population standard deviation, accumulated as offsets from the
/// first value so identical inputs give exactly zero spread.
fn mean_sd<I: Iterator<Item = f64> + Clone>(it: I) -> (f64, f64) {
    let n = it.clone().count() as f64;
    let first = it.clone().next().unwrap_or(0.0);
    let mean = first + it.clone().map(|v| v - first).sum::<f64>() / n;
    let var = it.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn roll_to_target(p: &Particle, h_target: f64, phase: Phase, cfg: &FilterConfig, keep: bool) -> (EnsembleSample, Vec<StateVec>) {
    let mut x = p.state;
    let mut path = if keep { vec![x] } else { Vec::new() };
    let mut dist = 0.0;
    if phase.reached(x.h, h_target) {
        return (EnsembleSample { time_s: 0.0, distance_nmi: 0.0, terminal: true }, path);
    }
    let min_step_ft = cfg.min_rocd_fpm * cfg.dt / 60.0;
    for step in 1..=cfg.max_steps {
        let next = step_theta(&p.theta, x);
        if !next.is_finite() || (next.h - x.h) * phase.sign() < min_step_ft {
            break;
        }
        dist += nmi(0.5 * (x.tas + next.tas), cfg.dt);
        x = next;
        if keep {
            path.push(x);
        }
        if phase.reached(x.h, h_target) {
            return (EnsembleSample { time_s: step as f64 * cfg.dt, distance_nmi: dist, terminal: true }, path);
        }
    }
    (EnsembleSample { time_s: f64::NAN, distance_nmi: f64::NAN, terminal: false }, path)
}

/// Per-step mean and spread of the sampled paths; finished paths hold their
/// last state.
fn fan_summary(paths: &[Vec<StateVec>]) -> Vec<FanPoint> {
    let len = paths.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let at = |p: &Vec<StateVec>| p[k.min(p.len() - 1)];
            let (h_mean, h_sd) = mean_sd(paths.iter().map(|p| at(p).h));
            let (tas_mean, tas_sd) = mean_sd(paths.iter().map(|p| at(p).tas));
            FanPoint { step: k, h_mean, h_sd, tas_mean, tas_sd }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionStatus {
    Predicted,
    /// The estimate is already at or past the target.
    Reached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub time_s: f64,
    pub distance_nmi: f64,
    /// Reached the target within the horizon.
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanPoint {
    pub step: usize,
    pub h_mean: f64,
    pub h_sd: f64,
    pub tas_mean: f64,
    pub tas_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub status: PredictionStatus,
    pub samples: Vec<EnsembleSample>,
    pub mean_time_s: f64,
    pub sd_time_s: f64,
    pub mean_distance_nmi: f64,
    pub sd_distance_nmi: f64,
    pub nonterminal_frac: f64,
    pub fan: Vec<FanPoint>,
}

impl EnsemblePrediction {
    fn reached() -> Self {
        EnsemblePrediction {
            status: PredictionStatus::Reached,
            samples: Vec::new(),
            mean_time_s: 0.0,
            sd_time_s: 0.0,
            mean_distance_nmi: 0.0,
            sd_distance_nmi: 0.0,
            nonterminal_frac: 0.0,
            fan: Vec::new(),
        }
    }
}

/// What happened during one assimilation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub index: usize,
    pub observation: StateVec,
    pub estimate: StateVec,
    /// Effective particle count after the weight update, before resampling.
    pub n_eff: f64,
    pub resampled: bool,
    /// Absolute TAS gap between estimate and observation tested for re-init.
    pub tas_gap: f64,
    pub reinit: bool,
    pub degenerate: bool,
    pub flagged: usize,
    pub weight_sum: f64,
}

/// Filter instance that owns its prior group and random stream.
#[derive(Debug, Clone)]
pub struct LiuWestFilter {
    pub cfg: FilterConfig,
    prior: Vec<Theta>,
    rng: ChaCha8Rng,
    state: Option<FilterState>,
}

impl LiuWestFilter {
    pub fn new(prior: Vec<Theta>, cfg: FilterConfig) -> Result<Self> {
        cfg.validate()?;
        if prior.is_empty() {
            return Err(Error::Config("empty prior group".into()));
        }
        Ok(LiuWestFilter { rng: ChaCha8Rng::seed_from_u64(cfg.seed), cfg, prior, state: None })
    }

    pub fn from_prior(prior: &PriorSet, aircraft_type: &str, phase: Phase, cfg: FilterConfig) -> Result<Self> {
        let thetas = prior.thetas(aircraft_type, phase);
        if thetas.is_empty() {
            return Err(Error::Config(format!("prior has no models for {aircraft_type} {phase}")));
        }
        Self::new(thetas, cfg)
    }

    pub fn state(&self) -> Option<&FilterState> {
        self.state.as_ref()
    }

    /// Assimilates one observation. The first call initialises the
    /// particles around it.
    pub fn assimilate(&mut self, y: StateVec) -> Result<StepReport> {
        let cfg = self.cfg;
        let Some(fs) = self.state.as_mut() else {
            let fs = FilterState::init(&self.prior, y, &cfg, &mut self.rng)?;
            let report = StepReport {
                index: 0,
                observation: y,
                estimate: fs.estimate,
                n_eff: fs.effective_n(),
                resampled: false,
                tas_gap: 0.0,
                reinit: false,
                degenerate: false,
                flagged: 0,
                weight_sum: fs.particles.iter().map(|p| p.weight).sum(),
            };
            self.state = Some(fs);
            return Ok(report);
        };
        fs.t += 1;
        fs.predict();
        fs.shrink_parameters(&cfg, &mut self.rng);
        fs.update_weights(y, &cfg);
        let n_eff = fs.effective_n();
        let flagged = fs.flagged.iter().filter(|f| **f).count();
        let degenerate = fs.degenerate;
        let resampled = fs.maybe_resample(&cfg, &mut self.rng);
        fs.estimate = fs.weighted_state();
        let tas_gap = (fs.estimate.tas - y.tas).abs();
        let reinit = fs.check_reinit(y, &self.prior, &cfg, &mut self.rng)?;
        if !reinit {
            fs.refresh_moments();
        }
        Ok(StepReport {
            index: fs.t,
            observation: y,
            estimate: fs.estimate,
            n_eff,
            resampled,
            tas_gap,
            reinit,
            degenerate,
            flagged,
            weight_sum: fs.particles.iter().map(|p| p.weight).sum(),
        })
    }

    pub fn predict_to(&mut self, h_target: f64, phase: Phase, with_fan: bool) -> Result<EnsemblePrediction> {
        let fs = self.state.as_ref().ok_or_else(|| Error::PredictionFailure("no observation assimilated yet".into()))?;
        fs.ensemble_predict(h_target, phase, &self.cfg, with_fan, &mut self.rng)
    }
}
