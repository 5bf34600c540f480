//! Relevance and redundancy filtering of feature columns.
//!
//! Relevance: a feature whose values look normal (KS p >= alpha) within both
//! classes is compared with Welch's t-test, otherwise with Mann-Whitney U; it
//! is kept when that p-value is below alpha. Redundancy: kept features are
//! visited by ascending p (name breaks ties) and a feature is dropped when it
//! correlates with an already accepted one at |r| >= threshold with p < alpha.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{FeatureMatrix, Label};
use crate::error::{Error, Result};
use crate::stats::{ks_normality, mann_whitney_u, pearson, t_test};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub alpha: f64,
    pub redundancy_r: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            alpha: 0.05,
            redundancy_r: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestUsed {
    WelchT,
    MannWhitney,
}

impl TestUsed {
    pub fn as_str(self) -> &'static str {
        match self {
            TestUsed::WelchT => "t",
            TestUsed::MannWhitney => "mann-whitney",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDecision {
    pub name: String,
    pub normal_in_both_classes: bool,
    pub test_used: TestUsed,
    pub p_value: f64,
    pub selected: bool,
    pub dropped_for_redundancy_with: Option<String>,
    /// Correlation with the redundancy partner.
    pub partner_r: Option<f64>,
}

impl FeatureDecision {
    pub fn decision(&self) -> &'static str {
        if self.selected {
            "selected"
        } else if self.dropped_for_redundancy_with.is_some() {
            "redundant"
        } else {
            "not-relevant"
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub alpha: f64,
    pub redundancy_r: f64,
    /// One entry per input feature, in input column order.
    pub features: Vec<FeatureDecision>,
}

impl SelectionReport {
    pub fn selected_names(&self) -> Vec<String> {
        self.features
            .iter()
            .filter(|f| f.selected)
            .map(|f| f.name.clone())
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&FeatureDecision> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Tab-separated table: feature, test, p, decision, partner.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("feature\ttest\tp\tdecision\tpartner\n");
        for f in &self.features {
            let _ = writeln!(
                out,
                "{}\t{}\t{:e}\t{}\t{}",
                f.name,
                f.test_used.as_str(),
                f.p_value,
                f.decision(),
                f.dropped_for_redundancy_with.as_deref().unwrap_or("-")
            );
        }
        out
    }
}

fn looks_normal(values: &[f64], alpha: f64) -> bool {
    ks_normality(values).map(|r| r.p >= alpha).unwrap_or(false)
}

fn relevance(name: &str, a: &[f64], b: &[f64], alpha: f64) -> Result<FeatureDecision> {
    let normal = looks_normal(a, alpha) && looks_normal(b, alpha);
    let (test_used, p_value) = if normal {
        (TestUsed::WelchT, t_test(a, b)?.p)
    } else {
        (TestUsed::MannWhitney, mann_whitney_u(a, b)?.p)
    };
    Ok(FeatureDecision {
        name: name.to_string(),
        normal_in_both_classes: normal,
        test_used,
        p_value,
        selected: p_value < alpha,
        dropped_for_redundancy_with: None,
        partner_r: None,
    })
}

/// Runs both selection stages and returns the surviving columns (in input
/// order) together with the per-feature report.
pub fn select_features(
    matrix: &FeatureMatrix,
    labels: &[Label],
    config: &SelectionConfig,
) -> Result<(FeatureMatrix, SelectionReport)> {
    if labels.len() != matrix.n_instances() {
        return Err(Error::DimensionMismatch {
            expected: matrix.n_instances(),
            actual: labels.len(),
        });
    }
    for label in [Label::Normal, Label::Glaucoma] {
        let count = labels.iter().filter(|&&l| l == label).count();
        if count < 2 {
            return Err(Error::InsufficientClass {
                label: label.as_u8(),
                count,
                needed: 2,
            });
        }
    }
    let alpha = config.alpha;
    let mut decisions: Vec<FeatureDecision> = (0..matrix.n_features())
        .into_par_iter()
        .map(|j| {
            let col = matrix.column(j);
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (v, l) in col.iter().zip(labels) {
                if l.is_positive() { b.push(*v) } else { a.push(*v) }
            }
            relevance(&matrix.feature_names()[j], &a, &b, alpha)
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..decisions.len()).filter(|&j| decisions[j].selected).collect();
    order.sort_by(|&x, &y| {
        decisions[x]
            .p_value
            .total_cmp(&decisions[y].p_value)
            .then_with(|| decisions[x].name.cmp(&decisions[y].name))
    });
    let mut accepted: Vec<(usize, Vec<f64>)> = Vec::new();
    for j in order {
        let col = matrix.column(j);
        let partner = accepted.iter().find_map(|(k, other)| match pearson(&col, other) {
            Ok(r) if r.statistic.abs() >= config.redundancy_r && r.p < alpha => {
                Some((*k, r.statistic))
            }
            _ => None,
        });
        match partner {
            Some((k, r)) => {
                let d = &mut decisions[j];
                d.selected = false;
                d.dropped_for_redundancy_with = Some(matrix.feature_names()[k].clone());
                d.partner_r = Some(r);
            }
            None => accepted.push((j, col)),
        }
    }

    let kept: Vec<usize> = (0..decisions.len()).filter(|&j| decisions[j].selected).collect();
    Ok((
        matrix.select_columns(&kept),
        SelectionReport {
            alpha,
            redundancy_r: config.redundancy_r,
            features: decisions,
        },
    ))
}
