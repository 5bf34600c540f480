use std::fmt::Write as _;

use crate::data::Label;
use crate::error::{Error, Result};

/// Confusion counts at threshold 0.5 and the derived figures of merit.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub sn: f64,
    pub spc: f64,
    pub fs: f64,
    pub acc: f64,
    /// `None` when the labels hold a single class.
    pub auc: Option<f64>,
    /// `(FPR, TPR)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub roc: Vec<(f64, f64)>,
}

pub const THRESHOLD: f64 = 0.5;

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn auc(&self) -> Result<f64> {
        self.auc.ok_or(Error::AucUndefined)
    }

    /// `(name, value)` pairs in reporting order; AUC is `NaN` when undefined.
    pub fn metrics(&self) -> [(&'static str, f64); 5] {
        [
            ("SN", self.sn),
            ("SPC", self.spc),
            ("FS", self.fs),
            ("ACC", self.acc),
            ("AUC", self.auc.unwrap_or(f64::NAN)),
        ]
    }

    pub fn metrics_table(&self) -> String {
        let mut out = String::from("metric\tvalue\n");
        for (k, v) in self.metrics() {
            let _ = writeln!(out, "{k}\t{v:.6}");
        }
        let _ = writeln!(out, "TP\t{}\nFP\t{}\nTN\t{}\nFN\t{}", self.tp, self.fp, self.tn, self.fn_);
        out
    }

    pub fn roc_table(&self) -> String {
        let mut out = String::from("fpr\ttpr\n");
        for (x, y) in &self.roc {
            let _ = writeln!(out, "{x:.17e}\t{y:.17e}");
        }
        out
    }
}

/// Metrics of probability scores against labels; glaucoma is the positive class.
pub fn evaluate_scores(scores: &[f64], labels: &[Label]) -> EvalReport {
    assert_eq!(scores.len(), labels.len(), "one score per label");
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= THRESHOLD, l.is_positive()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let sn = ratio(tp, tp + fn_);
    let fs = if precision + sn > 0.0 {
        2.0 * precision * sn / (precision + sn)
    } else {
        0.0
    };
    let (roc, auc) = roc_curve(scores, labels);
    EvalReport {
        tp,
        fp,
        tn,
        fn_,
        sn,
        spc: ratio(tn, tn + fp),
        fs,
        acc: ratio(tp + tn, scores.len()),
        auc,
        roc,
    }
}

/// Tie-aware ROC: equal scores move FPR and TPR together in one step, and the
/// area is integrated with the trapezoid rule.
fn roc_curve(scores: &[f64], labels: &[Label]) -> (Vec<(f64, f64)>, Option<f64>) {
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return (Vec::new(), None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut roc = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // trapezoid in count units, normalized once at the end
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        roc.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    (roc, Some(area / (n_pos * n_neg) as f64))
}

/// `(#correctly ordered pairs + 0.5·#ties) / (n_pos·n_neg)` by direct enumeration.
pub fn pairwise_auc(scores: &[f64], labels: &[Label]) -> Option<f64> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.is_positive())
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| !l.is_positive())
        .map(|(s, _)| *s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut acc = 0.0;
    for p in &pos {
        for n in &neg {
            acc += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(acc / (pos.len() * neg.len()) as f64)
}
