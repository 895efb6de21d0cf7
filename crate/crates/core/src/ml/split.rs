//! Stratified hold-out splits and k-fold partitions.

use rand::seq::SliceRandom;

use super::MlError;
use crate::seed;

fn classes(y: &[u8], rows: &[usize]) -> [Vec<usize>; 2] {
    let mut c = [Vec::new(), Vec::new()];
    for &r in rows {
        c[(y[r] != 0) as usize].push(r);
    }
    c
}

/// Split rows `0..y.len()` into (train, test), holding out `round(n_c·test_fraction)`
/// of each class, clamped so both sides keep at least one member. Both index
/// lists come back sorted.
pub fn stratified_split(y: &[u8], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), MlError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(MlError::InvalidParams(format!(
            "test_fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let all: Vec<usize> = (0..y.len()).collect();
    let mut rng = seed::rng(seed::derive(seed, &["split"]));
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut members) in classes(y, &all).into_iter().enumerate() {
        if members.len() < 2 {
            return Err(MlError::CannotStratify {
                class: class as u8,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let k = ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1);
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Partition `rows` into `k` folds with per-class round-robin assignment over
/// a shuffled order. The assignment offset carries over from one class to the
/// next, so fold sizes differ by at most one.
pub fn stratified_kfold(y: &[u8], rows: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, MlError> {
    if k < 2 {
        return Err(MlError::InfeasibleFolds {
            folds: k,
            reason: "at least 2 folds are needed".into(),
        });
    }
    let by_class = classes(y, rows);
    let minority = by_class[0].len().min(by_class[1].len());
    if k > minority {
        return Err(MlError::InfeasibleFolds {
            folds: k,
            reason: format!("the minority class has {minority} member(s)"),
        });
    }
    let mut rng = seed::rng(seed::derive(seed, &["kfold"]));
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut members in by_class {
        members.shuffle(&mut rng);
        for r in members {
            folds[next].push(r);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}
