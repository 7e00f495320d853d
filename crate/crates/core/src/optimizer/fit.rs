use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{nelder_mead, SimplexConfig};
use crate::dataio::Trajectory;
use crate::lssm::{check_cadence, rollout_cost, Lssm, ScalingMatrix, StateVec, Theta};
use crate::{derive_seed, Error, Result};

/// Ridge weight on the dynamics part of the warm-start regression.
const RIDGE: f64 = 1e-8;
/// Penalty on the frame dynamics' deviation from identity. A single
/// trajectory only constrains the dynamics along its own path, so without it
/// the search can settle on fast, unstable modes off that path.
pub const FIT_RIDGE: f64 = 1e-2;
const JITTER_PHI_A: f64 = 0.01;
const JITTER_PHI_B: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: Lssm,
    pub final_cost: f64,
    /// Cost of the caller's initial model.
    pub init_cost: f64,
    pub iters: usize,
    pub evals: usize,
}

/// Search coordinates: states are offsets from the first observation scaled
/// by `L`, and dynamics are stored as a deviation from identity, so every
/// coordinate is of order one or smaller.
struct Frame {
    origin: Vector2<f64>,
    l: Vector2<f64>,
    /// Observations in frame coordinates.
    obs: Vec<Vector2<f64>>,
}

impl Frame {
    fn new(states: &[StateVec], scale: &ScalingMatrix) -> Self {
        let origin = states[0].to_vector();
        let l = Vector2::new(scale.h_ft, scale.tas_kt);
        let obs = states.iter().map(|s| (s.to_vector() - origin).component_div(&l)).collect();
        Frame { origin, l, obs }
    }

    fn to_theta(&self, p: &[f64]) -> Theta {
        let l = Matrix2::from_diagonal(&self.l);
        let l_inv = Matrix2::from_diagonal(&self.l.map(|v| 1.0 / v));
        let a_frame = Matrix2::new(1.0 + p[0], p[1], p[2], 1.0 + p[3]);
        let phi_a = l * a_frame * l_inv;
        let phi_b = (Matrix2::identity() - phi_a) * self.origin + l * Vector2::new(p[4], p[5]);
        [phi_a[(0, 0)], phi_a[(0, 1)], phi_a[(1, 0)], phi_a[(1, 1)], phi_b[0], phi_b[1]]
    }

    fn encode(&self, t: &Theta) -> [f64; 6] {
        let l = Matrix2::from_diagonal(&self.l);
        let l_inv = Matrix2::from_diagonal(&self.l.map(|v| 1.0 / v));
        let phi_a = Matrix2::new(t[0], t[1], t[2], t[3]);
        let a_frame = l_inv * phi_a * l;
        let c = l_inv * (Vector2::new(t[4], t[5]) - (Matrix2::identity() - phi_a) * self.origin);
        [a_frame[(0, 0)] - 1.0, a_frame[(0, 1)], a_frame[(1, 0)], a_frame[(1, 1)] - 1.0, c[0], c[1]]
    }

    /// Same objective as [`rollout_cost`], evaluated in frame coordinates.
    fn cost(&self, p: &[f64]) -> f64 {
        let (d11, d12, d21, d22, c1, c2) = (p[0], p[1], p[2], p[3], p[4], p[5]);
        let (mut x1, mut x2) = (0.0, 0.0);
        let mut cost = 0.0;
        for o in &self.obs[1..] {
            let n1 = x1 + d11 * x1 + d12 * x2 + c1;
            let n2 = x2 + d21 * x1 + d22 * x2 + c2;
            x1 = n1;
            x2 = n2;
            cost += (x1 - o[0]).powi(2) + (x2 - o[1]).powi(2);
        }
        if cost.is_finite() {
            cost
        } else {
            f64::INFINITY
        }
    }

    /// Search objective: rollout cost plus the identity-deviation penalty.
    fn objective(&self, p: &[f64]) -> f64 {
        self.cost(p) + FIT_RIDGE * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3])
    }

    /// One-step ridge regression of increments on `[x, 1]`.
    fn regression_start(&self) -> Option<[f64; 6]> {
        let mut gram = Matrix3::<f64>::zeros();
        let mut rhs = [Vector3::<f64>::zeros(); 2];
        for w in self.obs.windows(2) {
            let z = Vector3::new(w[0][0], w[0][1], 1.0);
            let d = w[1] - w[0];
            gram += z * z.transpose();
            rhs[0] += z * d[0];
            rhs[1] += z * d[1];
        }
        gram[(0, 0)] += RIDGE;
        gram[(1, 1)] += RIDGE;
        let chol = gram.cholesky()?;
        let r0 = chol.solve(&rhs[0]);
        let r1 = chol.solve(&rhs[1]);
        let p = [r0[0], r0[1], r1[0], r1[1], r0[2], r1[2]];
        p.iter().all(|v| v.is_finite()).then_some(p)
    }

    fn mean_step_start(&self) -> [f64; 6] {
        let n = (self.obs.len() - 1) as f64;
        let d = (self.obs[self.obs.len() - 1] - self.obs[0]) / n;
        [0.0, 0.0, 0.0, 0.0, d[0], d[1]]
    }
}

/// Fits an LSSM to one trajectory by minimising the rollout cost.
///
/// The search starts from the best of `init`, a one-step regression warm
/// start and constant-rate dynamics, then runs `cfg.restarts` more times from
/// jittered copies of the incumbent. The search minimises the rollout cost
/// plus [`FIT_RIDGE`] times the squared deviation of the frame dynamics from
/// identity; the result is judged on the rollout cost alone and never costs
/// more than `init`.
pub fn fit_trajectory(traj: &Trajectory, init: &Lssm, scale: &ScalingMatrix, cfg: &SimplexConfig) -> Result<FitOutcome> {
    if traj.blips.len() < super::MIN_SEGMENT_BLIPS {
        return Err(Error::Input(format!(
            "trajectory {} has {} blips, need at least {}",
            traj.id,
            traj.blips.len(),
            super::MIN_SEGMENT_BLIPS
        )));
    }
    check_cadence(traj, init.dt)?;
    let states = traj.states();
    let frame = Frame::new(&states, scale);
    let init_theta = init.theta();
    let init_cost = rollout_cost(&init_theta, &states, scale);

    let mut starts = vec![frame.encode(&init_theta), frame.mean_step_start()];
    starts.extend(frame.regression_start());
    let (mut best_p, mut best_f) = starts
        .into_iter()
        .map(|p| {
            let f = frame.objective(&p);
            (p, f)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one start");

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &traj.id));
    let (mut iters, mut evals) = (0usize, 0usize);
    let mut any_ok = false;
    for run in 0..=cfg.restarts {
        let mut start = best_p;
        if run > 0 {
            for (i, v) in start.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += if i < 4 { JITTER_PHI_A * z } else { JITTER_PHI_B * v.abs() * z };
            }
        }
        if !frame.objective(&start).is_finite() {
            continue;
        }
        let r = nelder_mead(|p| frame.objective(p), &start, cfg)?;
        iters += r.iters;
        evals += r.evals;
        any_ok = true;
        if r.f < best_f {
            best_f = r.f;
            best_p.copy_from_slice(&r.x);
        }
    }
    if !any_ok && !best_f.is_finite() {
        return Err(Error::FitFailure(format!("trajectory {}: no finite rollout found", traj.id)));
    }

    let theta = frame.to_theta(&best_p);
    let cost = rollout_cost(&theta, &states, scale);
    let (model, final_cost) = if cost.is_finite() && cost < init_cost {
        (Lssm::from_theta(&theta, init.dt), cost)
    } else if init_cost.is_finite() {
        (*init, init_cost)
    } else {
        return Err(Error::FitFailure(format!("trajectory {}: all restarts diverged", traj.id)));
    };
    Ok(FitOutcome { model, final_cost, init_cost, iters, evals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Blip;
    use crate::lssm::{rollout, rollout_rmse};
    use crate::perfmodel::{integrate_trajectory, synth_fleet};
    use crate::{Phase, BLIP_DT};
    use nalgebra::{Matrix2, Vector2};

    fn known_model() -> Lssm {
        Lssm::new(Matrix2::new(1.0005, 0.2, -2.0e-6, 0.999), Vector2::new(-60.0, 0.5), BLIP_DT)
    }

    fn as_traj(states: &[StateVec]) -> Trajectory {
        Trajectory {
            id: "synthetic".into(),
            aircraft_type: "T".into(),
            phase: Phase::Climb,
            day: "d".into(),
            blips: states.iter().enumerate().map(|(i, s)| Blip { t: BLIP_DT * i as f64, h: s.h, tas: s.tas, rocd: 0.0 }).collect(),
            h_target: states.last().unwrap().h,
        }
    }

    #[test]
    fn frame_round_trip_and_cost_agree() {
        let m = known_model();
        let states = rollout(&m, StateVec::new(21_000.0, 400.0), 40).unwrap();
        let scale = ScalingMatrix::default();
        let frame = Frame::new(&states, &scale);
        let p = frame.encode(&m.theta());
        let back = frame.to_theta(&p);
        for (a, b) in back.iter().zip(m.theta()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        let perturbed = [p[0] + 1e-4, p[1], p[2] - 2e-4, p[3], p[4] * 1.1, p[5]];
        let direct = rollout_cost(&frame.to_theta(&perturbed), &states, &scale);
        assert!((frame.cost(&perturbed) - direct).abs() <= 1e-9 * direct);
    }

    #[test]
    fn exact_init_is_kept() {
        let m = known_model();
        let traj = as_traj(&rollout(&m, StateVec::new(21_000.0, 400.0), 40).unwrap());
        let r = fit_trajectory(&traj, &m, &ScalingMatrix::default(), &SimplexConfig::default()).unwrap();
        assert_eq!(r.final_cost, 0.0);
        assert_eq!(r.model, m);
    }

    #[test]
    fn self_identification_from_identity() {
        let m = known_model();
        let states = rollout(&m, StateVec::new(21_000.0, 400.0), 60).unwrap();
        let traj = as_traj(&states);
        let init = Lssm::constant_rate(0.0, 0.0, BLIP_DT);
        let r = fit_trajectory(&traj, &init, &ScalingMatrix::default(), &SimplexConfig::default()).unwrap();
        let (eh, ev) = rollout_rmse(&r.model, &states);
        assert!(eh < 10.0 && ev < 0.5, "{eh} {ev}");
        assert!(r.final_cost <= r.init_cost);
    }

    #[test]
    fn jet_climb_above_crossover_improves_tenfold() {
        let cfg = synth_fleet().into_iter().find(|c| c.type_code == "JB73").unwrap();
        let x = cfg.climb_schedule.crossover_ft().unwrap();
        let traj = integrate_trajectory(&cfg, x + 10.0, x + 6_000.0, Phase::Climb, BLIP_DT).unwrap();
        let states = traj.states();
        let init = Lssm::constant_rate(0.0, 0.0, BLIP_DT);
        let r = fit_trajectory(&traj, &init, &ScalingMatrix::default(), &SimplexConfig::default()).unwrap();
        let (h_fit, _) = rollout_rmse(&r.model, &states);
        let (h_init, _) = rollout_rmse(&init, &states);
        assert!(h_fit * 10.0 < h_init, "{h_fit} vs {h_init}");
    }

    #[test]
    fn short_or_irregular_trajectories_rejected() {
        let m = known_model();
        let mut traj = as_traj(&rollout(&m, StateVec::new(21_000.0, 400.0), 5).unwrap());
        assert!(matches!(fit_trajectory(&traj, &m, &ScalingMatrix::default(), &SimplexConfig::default()), Err(Error::Input(_))));
        traj = as_traj(&rollout(&m, StateVec::new(21_000.0, 400.0), 20).unwrap());
        traj.blips[3].t += 1.0;
        assert!(matches!(fit_trajectory(&traj, &m, &ScalingMatrix::default(), &SimplexConfig::default()), Err(Error::Format(_))));
    }
}
