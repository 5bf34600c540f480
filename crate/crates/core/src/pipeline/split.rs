use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Label;
use crate::error::{Error, Result};

/// Patient-level train/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub ratio: f64,
    pub seed: u64,
    /// Patient ids in input order.
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Assignment of train patients to `k` folds.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// `(patient_id, fold)` in input order.
    pub assignment: Vec<(String, usize)>,
}

impl FoldPlan {
    pub fn fold_of(&self, patient_id: &str) -> Option<usize> {
        self.assignment.iter().find(|(p, _)| p == patient_id).map(|(_, f)| *f)
    }

    pub fn fold_patients(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, f)| *f == fold)
            .map(|(p, _)| p.as_str())
            .collect()
    }
}

fn by_class(patients: &[(String, Label)]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, (_, l)) in patients.iter().enumerate() {
        out[l.as_u8() as usize].push(i);
    }
    out
}

fn class_rng(seed: u64, class: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class as u64);
    rng
}

/// Stratified split: in each class `round(ratio·n)` patients go to training,
/// but at least one patient stays on each side.
pub fn patient_split(patients: &[(String, Label)], ratio: f64, seed: u64) -> Result<SplitPlan> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut is_train = vec![false; patients.len()];
    for (class, mut members) in by_class(patients).into_iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::InsufficientClass {
                label: class as u8,
                count: members.len(),
                needed: 2,
            });
        }
        let n = members.len();
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        members.shuffle(&mut class_rng(seed, class));
        for &i in &members[..n_train] {
            is_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for ((id, _), t) in patients.iter().zip(is_train) {
        if t { train.push(id.clone()) } else { test.push(id.clone()) }
    }
    Ok(SplitPlan { ratio, seed, train, test })
}

/// Stratified round-robin over shuffled patients of each class. The second
/// class starts where the first left off, so total fold sizes stay balanced too.
pub fn make_folds(patients: &[(String, Label)], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need k >= 2 folds, got {k}")));
    }
    let mut fold = vec![0usize; patients.len()];
    let mut start = 0;
    for (class, mut members) in by_class(patients).into_iter().enumerate() {
        if members.len() < k {
            return Err(Error::InsufficientClass {
                label: class as u8,
                count: members.len(),
                needed: k,
            });
        }
        // stream offset keeps fold shuffles independent of split shuffles with the same seed
        members.shuffle(&mut class_rng(seed, class + 2));
        for (pos, &i) in members.iter().enumerate() {
            fold[i] = (start + pos) % k;
        }
        start = (start + members.len()) % k;
    }
    Ok(FoldPlan {
        k,
        seed,
        assignment: patients.iter().map(|(p, _)| p.clone()).zip(fold).collect(),
    })
}

/// Patient label lookup restricted to the given ids, in the order given.
pub(crate) fn labelled(ids: &[String], labels: &HashMap<String, Label>) -> Vec<(String, Label)> {
    ids.iter().map(|p| (p.clone(), labels[p])).collect()
}
