//! Resampling and the target/shadow/attack-evaluation split.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::TabularDataset;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Default cap on each side of the balanced attack-evaluation set.
pub const DEFAULT_EVAL_CAP: usize = 2500;

/// Disjoint index sets for one experiment: target train/holdout, shadow
/// IN/OUT, and the balanced membership-evaluation subsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSplit {
    pub target_train: Vec<usize>,
    pub target_holdout: Vec<usize>,
    pub shadow_in: Vec<usize>,
    pub shadow_out: Vec<usize>,
    /// Subset of `target_train`; paired with `attack_eval_nonmembers` at
    /// equal size so chance accuracy is 0.5.
    pub attack_eval_members: Vec<usize>,
    /// Subset of `target_holdout`.
    pub attack_eval_nonmembers: Vec<usize>,
}

/// Uniform sampling without replacement to a target size, optionally forcing
/// a class share exactly (up to one record).
pub fn resample_to(
    data: &TabularDataset,
    class_balance: Option<f64>,
    size: usize,
    seed: u64,
) -> Result<TabularDataset> {
    if size == 0 || size > data.num_records() {
        return Err(Error::InvalidArgument(format!(
            "size must lie in 1..={}, got {size}",
            data.num_records()
        )));
    }
    let mut rng = rng_for(seed, &[0x5245_5341, size as u64]);
    let mut picked: Vec<usize> = match class_balance {
        None => {
            let mut all: Vec<usize> = (0..data.num_records()).collect();
            all.shuffle(&mut rng);
            all.truncate(size);
            all
        }
        Some(b) => {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!("class balance {b} out of [0,1]")));
            }
            let want1 = (b * size as f64).round() as usize;
            let want0 = size - want1;
            let mut ones: Vec<usize> = (0..data.num_records())
                .filter(|&i| data.label(i) == 1)
                .collect();
            let mut zeros: Vec<usize> = (0..data.num_records())
                .filter(|&i| data.label(i) == 0)
                .collect();
            if ones.len() < want1 || zeros.len() < want0 {
                return Err(Error::Insufficient(format!(
                    "need {want1} of class 1 and {want0} of class 0, have {} and {}",
                    ones.len(),
                    zeros.len()
                )));
            }
            ones.shuffle(&mut rng);
            zeros.shuffle(&mut rng);
            let mut picked: Vec<usize> =
                ones.into_iter().take(want1).chain(zeros.into_iter().take(want0)).collect();
            picked.shuffle(&mut rng);
            picked
        }
    };
    picked.shrink_to_fit();
    data.subset(&picked)
}

/// [`make_split`] with the default evaluation cap.
pub fn make_split(
    data: &TabularDataset,
    target_size: usize,
    shadow_size: usize,
    seed: u64,
) -> Result<ExperimentSplit> {
    make_split_with_eval_cap(data, target_size, shadow_size, DEFAULT_EVAL_CAP, seed)
}

/// Partitions record indices into disjoint target and shadow sets at the
/// 75% member rate, then draws the balanced attack-evaluation subsets.
///
/// `target_train` gets 75% of `target_size` (rounded), `target_holdout` the
/// rest; the shadow pool is halved into IN/OUT. Each evaluation side has
/// `min(|target_train|, |target_holdout|, eval_cap)` records.
pub fn make_split_with_eval_cap(
    data: &TabularDataset,
    target_size: usize,
    shadow_size: usize,
    eval_cap: usize,
    seed: u64,
) -> Result<ExperimentSplit> {
    let n = data.num_records();
    if target_size < 4 {
        return Err(Error::InvalidArgument("target_size must be at least 4".into()));
    }
    if shadow_size < 2 || shadow_size % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "shadow_size must be even and positive, got {shadow_size}"
        )));
    }
    if eval_cap == 0 {
        return Err(Error::InvalidArgument("eval_cap must be positive".into()));
    }
    if target_size + shadow_size > n {
        return Err(Error::Insufficient(format!(
            "pool of {n} records cannot host target {target_size} + shadow {shadow_size}"
        )));
    }

    let mut rng = rng_for(seed, &[0x53_504c_4954, target_size as u64, shadow_size as u64]);
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(&mut rng);

    let train_size = (0.75 * target_size as f64).round() as usize;
    let target_train = all[..train_size].to_vec();
    let target_holdout = all[train_size..target_size].to_vec();
    let half = shadow_size / 2;
    let shadow_in = all[target_size..target_size + half].to_vec();
    let shadow_out = all[target_size + half..target_size + shadow_size].to_vec();

    let eval_n = train_size.min(target_size - train_size).min(eval_cap);
    let mut members = target_train.clone();
    members.shuffle(&mut rng);
    members.truncate(eval_n);
    let mut nonmembers = target_holdout.clone();
    nonmembers.shuffle(&mut rng);
    nonmembers.truncate(eval_n);

    Ok(ExperimentSplit {
        target_train,
        target_holdout,
        shadow_in,
        shadow_out,
        attack_eval_members: members,
        attack_eval_nonmembers: nonmembers,
    })
}

/// A split whose member pools carry a chosen class balance while the
/// non-member pools keep the source mix.
///
/// `target_train` and `shadow_in` are drawn with class-1 share
/// `train_balance` (exact up to rounding); `target_holdout` and
/// `shadow_out` are uniform draws from the rest of the pool. This models a
/// training-set selection bias: members follow the rebalanced distribution,
/// non-members the natural one, so the two populations differ in class
/// composition and an attack can exploit the class label itself.
pub fn make_biased_split(
    data: &TabularDataset,
    target_size: usize,
    shadow_size: usize,
    train_balance: f64,
    eval_cap: usize,
    seed: u64,
) -> Result<ExperimentSplit> {
    let n = data.num_records();
    if target_size < 4 {
        return Err(Error::InvalidArgument("target_size must be at least 4".into()));
    }
    if shadow_size < 2 || shadow_size % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "shadow_size must be even and positive, got {shadow_size}"
        )));
    }
    if eval_cap == 0 {
        return Err(Error::InvalidArgument("eval_cap must be positive".into()));
    }
    if !(0.0..=1.0).contains(&train_balance) {
        return Err(Error::InvalidArgument(format!(
            "train balance {train_balance} out of [0,1]"
        )));
    }
    if target_size + shadow_size > n {
        return Err(Error::Insufficient(format!(
            "pool of {n} records cannot host target {target_size} + shadow {shadow_size}"
        )));
    }

    let mut rng =
        rng_for(seed, &[0x42_5350_4c54, target_size as u64, shadow_size as u64]);
    let mut ones: Vec<usize> = (0..n).filter(|&i| data.label(i) == 1).collect();
    let mut zeros: Vec<usize> = (0..n).filter(|&i| data.label(i) == 0).collect();
    ones.shuffle(&mut rng);
    zeros.shuffle(&mut rng);

    let train_size = (0.75 * target_size as f64).round() as usize;
    let hold_size = target_size - train_size;
    let half = shadow_size / 2;

    // Exact class counts for both member pools, drawn from the front of the
    // shuffled per-class lists.
    let mut draw_biased = |size: usize,
                           ones: &mut Vec<usize>,
                           zeros: &mut Vec<usize>|
     -> Result<Vec<usize>> {
        let want1 = (train_balance * size as f64).round() as usize;
        let want0 = size - want1;
        if ones.len() < want1 || zeros.len() < want0 {
            return Err(Error::Insufficient(format!(
                "member pool of {size} at balance {train_balance} needs {want1} of class 1 \
                 and {want0} of class 0; {} and {} remain",
                ones.len(),
                zeros.len()
            )));
        }
        let mut out: Vec<usize> =
            ones.drain(..want1).chain(zeros.drain(..want0)).collect();
        out.shuffle(&mut rng);
        Ok(out)
    };
    let target_train = draw_biased(train_size, &mut ones, &mut zeros)?;
    let shadow_in = draw_biased(half, &mut ones, &mut zeros)?;

    // Non-members: uniform over whatever the member draws left behind.
    let mut rest: Vec<usize> = ones.into_iter().chain(zeros).collect();
    if rest.len() < hold_size + half {
        return Err(Error::Insufficient(format!(
            "{} records remain for {} non-members",
            rest.len(),
            hold_size + half
        )));
    }
    rest.shuffle(&mut rng);
    let target_holdout = rest[..hold_size].to_vec();
    let shadow_out = rest[hold_size..hold_size + half].to_vec();

    let eval_n = train_size.min(hold_size).min(eval_cap);
    let mut members = target_train.clone();
    members.shuffle(&mut rng);
    members.truncate(eval_n);
    let mut nonmembers = target_holdout.clone();
    nonmembers.shuffle(&mut rng);
    nonmembers.truncate(eval_n);

    Ok(ExperimentSplit {
        target_train,
        target_holdout,
        shadow_in,
        shadow_out,
        attack_eval_members: members,
        attack_eval_nonmembers: nonmembers,
    })
}
