use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::{Error, Result};

/// Day tags assigned to each split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn days(&self, which: &str) -> Result<&[String]> {
        match which {
            "train" => Ok(&self.train),
            "val" | "validation" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => Err(Error::Input(format!("unknown split '{other}'"))),
        }
    }

    /// Trajectories whose day belongs to the named split, in input order.
    pub fn select<'a>(&self, trajs: &'a [Trajectory], which: &str) -> Result<Vec<&'a Trajectory>> {
        let days: BTreeSet<&str> = self.days(which)?.iter().map(String::as_str).collect();
        Ok(trajs.iter().filter(|t| days.contains(t.day.as_str())).collect())
    }
}

/// Shuffles distinct days with `seed` and partitions them.
///
/// Test receives `round(ratio.2 * n)` days, validation `floor(ratio.1 * n)`,
/// training the remainder; 29 days give 21/2/6.
pub fn split_by_day(trajs: &[Trajectory], ratio: (f64, f64, f64), seed: u64) -> Result<DatasetSplit> {
    let mut days: Vec<String> = trajs.iter().map(|t| t.day.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let n = days.len();
    if n < 3 {
        return Err(Error::Split(format!("need at least 3 distinct days, got {n}")));
    }
    let total = ratio.0 + ratio.1 + ratio.2;
    if !(ratio.0 >= 0.0 && ratio.1 >= 0.0 && ratio.2 >= 0.0 && total > 0.0) {
        return Err(Error::Split(format!("invalid ratio {ratio:?}")));
    }
    let n_test = ((ratio.2 / total * n as f64) + 1e-9).round() as usize;
    let n_val = ((ratio.1 / total * n as f64) + 1e-9).floor() as usize;
    let n_test = n_test.min(n);
    let n_val = n_val.min(n - n_test);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    days.shuffle(&mut rng);
    let n_train = n - n_val - n_test;
    let test = days.split_off(n_train + n_val);
    let val = days.split_off(n_train);
    Ok(DatasetSplit { train: days, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Blip;
    use crate::Phase;

    fn corpus(days: usize) -> Vec<Trajectory> {
        (0..days * 2)
            .map(|i| Trajectory {
                id: format!("t{i}"),
                aircraft_type: "X".into(),
                phase: Phase::Climb,
                day: format!("d{:02}", i % days),
                blips: vec![Blip { t: 0.0, h: 1.0, tas: 1.0, rocd: 1.0 }],
                h_target: 2.0,
            })
            .collect()
    }

    #[test]
    fn paper_day_counts() {
        let s = split_by_day(&corpus(29), (0.7, 0.1, 0.2), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (21, 2, 6));
        let s = split_by_day(&corpus(10), (0.7, 0.1, 0.2), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 1, 2));
    }

    #[test]
    fn deterministic_disjoint_covering() {
        let c = corpus(17);
        let a = split_by_day(&c, (0.7, 0.1, 0.2), 42).unwrap();
        assert_eq!(a, split_by_day(&c, (0.7, 0.1, 0.2), 42).unwrap());
        let mut all: Vec<_> = a.train.iter().chain(&a.val).chain(&a.test).cloned().collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 17);
        let n: usize = ["train", "val", "test"].iter().map(|w| a.select(&c, w).unwrap().len()).sum();
        assert_eq!(n, c.len());
    }

    #[test]
    fn too_few_days() {
        assert!(matches!(split_by_day(&corpus(2), (0.7, 0.1, 0.2), 0), Err(Error::Split(_))));
    }
}
