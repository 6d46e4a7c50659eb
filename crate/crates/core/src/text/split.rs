use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::RngState;

/// Stratified seeded split. `train_fraction` of every class (rounded, but
/// at least one sample on each side) goes to the first part. Both parts
/// are shuffled.
pub fn split_train_test<T>(
    samples: Vec<T>,
    label: impl Fn(&T) -> usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_class.entry(label(s)).or_default().push(i);
    }
    if let Some((class, idx)) = by_class.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::Data(format!(
            "class {class} has {} sample(s); stratified splitting needs at least 2",
            idx.len()
        )));
    }
    let mut rng = RngState::new(seed);
    let mut side = vec![false; samples.len()];
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for idx in by_class.values_mut() {
        rng.shuffle(idx);
        let n = idx.len();
        let k = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
        for &i in &idx[..k] {
            side[i] = true;
        }
        train_idx.extend_from_slice(&idx[..k]);
        test_idx.extend_from_slice(&idx[k..]);
    }
    rng.shuffle(&mut train_idx);
    rng.shuffle(&mut test_idx);

    let mut slots: Vec<Option<T>> = samples.into_iter().map(Some).collect();
    let mut take = |ids: &[usize]| -> Vec<T> {
        ids.iter()
            .map(|&i| slots[i].take().expect("each index used once"))
            .collect()
    };
    let train = take(&train_idx);
    let test = take(&test_idx);
    Ok((train, test))
}
