//! Nelder-Mead simplex search and the LSSM identification drivers built on it.

mod fit;
mod prior;

pub use fit::{fit_trajectory, FitOutcome};
pub use prior::{build_prior, split_segments, write_fit_log, FitRecord, PriorSet, MIN_SEGMENT_BLIPS};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Simplex coefficients, stopping rules and restart policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_iters: usize,
    /// Stop when the spread of vertex costs falls to this value.
    pub f_tol: f64,
    /// Stop when every vertex lies within this distance of the best, per
    /// coordinate.
    pub x_tol: f64,
    /// Extra jittered runs after the first, used by [`fit_trajectory`].
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        SimplexConfig {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_iters: 2_000,
            f_tol: 1e-12,
            x_tol: 1e-9,
            restarts: 3,
            seed: 0,
        }
    }
}

impl SimplexConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.expansion > self.reflection
            && self.reflection > self.contraction
            && self.contraction > 0.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.f_tol >= 0.0
            && self.x_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid simplex coefficients {self:?}")))
        }
    }
}

/// Why a simplex run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FTol,
    XTol,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
    /// Best vertex cost after setup and after every iteration.
    pub history: Vec<f64>,
    pub stop: StopReason,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Minimises `f` from `x0`.
///
/// The initial simplex adds one vertex per coordinate, displaced by 5% of
/// the coordinate or 1e-4, whichever is larger. Non-finite costs count as
/// `+inf`. Ties keep the earlier vertex, so a flat function returns `x0`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], cfg: &SimplexConfig) -> Result<NmResult>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let k = x0.len();
    if k == 0 {
        return Err(Error::Input("empty parameter vector".into()));
    }
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(Error::Input(format!("cost is not finite at the start point ({f0})")));
    }
    let mut evals = 1usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        finite_or_inf(f(x))
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..k {
        let mut v = x0.to_vec();
        v[i] += (0.05 * x0[i].abs()).max(1e-4);
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut history = vec![simplex[0].1];
    let mut iters = 0usize;
    let stop = loop {
        let best = simplex[0].1;
        let worst = simplex[k].1;
        if worst - best <= cfg.f_tol {
            break StopReason::FTol;
        }
        let spread = simplex[1..].iter().flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs())).fold(0.0f64, f64::max);
        if spread <= cfg.x_tol {
            break StopReason::XTol;
        }
        if iters >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        iters += 1;

        let mut c = vec![0.0; k];
        for (v, _) in &simplex[..k] {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi / k as f64;
            }
        }
        let along = |t: f64, from: &[f64]| -> Vec<f64> { c.iter().zip(from).map(|(ci, fi)| ci + t * (ci - fi)).collect() };
        let xw = simplex[k].0.clone();
        let xr = along(cfg.reflection, &xw);
        let fr = eval(&xr, &mut evals);

        let replacement = if fr < best {
            let xe = along(cfg.reflection * cfg.expansion, &xw);
            let fe = eval(&xe, &mut evals);
            Some(if fe < fr { (xe, fe) } else { (xr, fr) })
        } else if fr < simplex[k - 1].1 {
            Some((xr, fr))
        } else if fr < worst {
            let xc = along(cfg.reflection * cfg.contraction, &xw);
            let fc = eval(&xc, &mut evals);
            (fc <= fr).then_some((xc, fc))
        } else {
            let xc = along(-cfg.contraction, &xw);
            let fc = eval(&xc, &mut evals);
            (fc < worst).then_some((xc, fc))
        };

        match replacement {
            Some(v) => simplex[k] = v,
            None => {
                let x_best = simplex[0].0.clone();
                for (v, fv) in simplex[1..].iter_mut() {
                    for (vi, bi) in v.iter_mut().zip(&x_best) {
                        *vi = bi + cfg.shrink * (*vi - bi);
                    }
                    *fv = eval(v, &mut evals);
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
    };

    let (x, fx) = simplex.swap_remove(0);
    Ok(NmResult { x, f: fx, iters, evals, history, stop })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monotone(h: &[f64]) -> bool {
        h.windows(2).all(|w| w[1] <= w[0])
    }

    #[test]
    fn quadratic_from_minimum() {
        let c = [1.5, -2.0, 0.25];
        let f = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let r = nelder_mead(f, &c, &SimplexConfig::default()).unwrap();
        assert_eq!(r.history[0], 0.0);
        assert!(r.f < 1e-12);
        assert_eq!(r.x, c.to_vec());
        assert!(monotone(&r.history));
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let cfg = SimplexConfig { max_iters: 500, f_tol: 0.0, x_tol: 0.0, ..Default::default() };
        let r = nelder_mead(f, &[-1.2, 1.0], &cfg).unwrap();
        assert!(r.f < 1e-6, "{}", r.f);
        assert!(r.iters <= 500);
        assert!(monotone(&r.history));
    }

    #[test]
    fn constant_function_stops_on_f_tol() {
        let x0 = [3.0, 4.0];
        let r = nelder_mead(|_| 7.0, &x0, &SimplexConfig::default()).unwrap();
        assert_eq!(r.stop, StopReason::FTol);
        assert_eq!(r.x, x0.to_vec());
        assert_eq!(r.iters, 0);
    }

    #[test]
    fn non_finite_start_rejected_and_nan_treated_as_inf() {
        assert!(matches!(nelder_mead(|_| f64::NAN, &[1.0], &SimplexConfig::default()), Err(Error::Input(_))));
        let f = |x: &[f64]| if x[0] > 1.02 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let r = nelder_mead(f, &[1.0], &SimplexConfig::default()).unwrap();
        assert!((r.x[0] - 0.5).abs() < 1e-4);
        assert!(monotone(&r.history));
    }

    #[test]
    fn coefficient_ordering_checked() {
        let cfg = SimplexConfig { expansion: 0.9, ..Default::default() };
        assert!(nelder_mead(|x| x[0] * x[0], &[1.0], &cfg).is_err());
        let cfg = SimplexConfig { shrink: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
