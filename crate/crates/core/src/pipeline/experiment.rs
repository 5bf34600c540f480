use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::classifier::{
    apply_standardizer, evaluate_scores, fit_standardizer, mlp_train, EvalReport, TrainTrace, TrainedModel,
};
use crate::data::{Dataset, FeatureMatrix, Label};
use crate::error::{Error, Result};
use crate::pipeline::config::{ExperimentConfig, Mode};
use crate::pipeline::embed::EmbeddingTable;
use crate::pipeline::extract::extract_all;
use crate::pipeline::split::{labelled, make_folds, patient_split, FoldPlan, SplitPlan};
use crate::selection::{select_features, SelectionReport};
use crate::stats::{mean, sample_variance};

/// Which rows each statistic of one fit was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct FitAudit {
    /// `fold<k>` or `final`.
    pub stage: String,
    pub train_ids: Vec<String>,
    pub selection_ids: Vec<String>,
    pub standardizer_ids: Vec<String>,
    pub network_ids: Vec<String>,
    pub eval_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: TrainedModel,
    pub selection: SelectionReport,
    pub trace: TrainTrace,
    pub scores: Vec<f64>,
    pub eval: EvalReport,
    pub audit: FitAudit,
}

/// Selection, standardization and training on `train` only, then scoring of
/// `eval`. With `early_stopping`, `eval` also picks the best epoch.
pub fn fit_and_evaluate(
    stage: &str,
    train: &FeatureMatrix,
    train_labels: &[Label],
    eval: &FeatureMatrix,
    eval_labels: &[Label],
    config: &ExperimentConfig,
    early_stopping: bool,
) -> Result<FitOutcome> {
    let (selected, selection) = select_features(train, train_labels, &config.selection)?;
    let standardizer = fit_standardizer(&selected)?;
    let x = apply_standardizer(&standardizer, &selected)?;
    let val = if early_stopping {
        Some(apply_standardizer(&standardizer, &eval.select_named(&standardizer.names)?)?)
    } else {
        None
    };
    let (mlp, trace) = mlp_train(&x, train_labels, &config.train, val.as_ref().map(|v| (v, eval_labels)))?;
    let audit = FitAudit {
        stage: stage.to_string(),
        train_ids: train.instance_ids().to_vec(),
        selection_ids: train.instance_ids().to_vec(),
        standardizer_ids: selected.instance_ids().to_vec(),
        network_ids: x.instance_ids().to_vec(),
        eval_ids: eval.instance_ids().to_vec(),
    };
    let model = TrainedModel { standardizer, mlp };
    let scores = model.predict(eval)?;
    let report = evaluate_scores(&scores, eval_labels);
    Ok(FitOutcome {
        model,
        selection,
        trace,
        scores,
        eval: report,
        audit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub selected: Vec<String>,
    pub eval: EvalReport,
}

/// Mean and sample standard deviation of each metric over the folds.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSummary {
    /// `(metric, mean, std, folds used)`.
    pub rows: Vec<(String, f64, f64, usize)>,
}

impl CvSummary {
    fn from_folds(folds: &[FoldResult]) -> Self {
        let names = ["SN", "SPC", "FS", "ACC", "AUC"];
        let rows = names
            .iter()
            .enumerate()
            .map(|(m, name)| {
                let v: Vec<f64> = folds
                    .iter()
                    .map(|f| f.eval.metrics()[m].1)
                    .filter(|x| !x.is_nan())
                    .collect();
                let sd = if v.len() > 1 { sample_variance(&v).sqrt() } else { 0.0 };
                let mu = if v.is_empty() { f64::NAN } else { mean(&v) };
                (name.to_string(), mu, sd, v.len())
            })
            .collect();
        CvSummary { rows }
    }

    pub fn get(&self, metric: &str) -> Option<(f64, f64)> {
        self.rows.iter().find(|r| r.0 == metric).map(|r| (r.1, r.2))
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("metric\tmean\tstd\tfolds\tsummary\n");
        for (name, mu, sd, n) in &self.rows {
            let _ = writeln!(out, "{name}\t{mu:.6}\t{sd:.6}\t{n}\t{mu:.4} ± {sd:.4}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredScan {
    pub scan_id: String,
    pub patient_id: String,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// Every input column, before selection.
    pub feature_names: Vec<String>,
    pub split: SplitPlan,
    pub folds: FoldPlan,
    pub cv: Vec<FoldResult>,
    pub cv_summary: CvSummary,
    pub final_selection: SelectionReport,
    pub model: TrainedModel,
    pub trace: TrainTrace,
    pub test: EvalReport,
    pub test_scores: Vec<ScoredScan>,
    pub audit: Vec<FitAudit>,
}

impl ExperimentReport {
    pub fn folds_table(&self) -> String {
        let mut out = String::from("fold\tn_train\tn_val\tSN\tSPC\tFS\tACC\tAUC\tn_selected\n");
        for f in &self.cv {
            let _ = write!(out, "{}\t{}\t{}", f.fold, f.n_train, f.n_val);
            for (_, v) in f.eval.metrics() {
                let _ = write!(out, "\t{v:.6}");
            }
            let _ = writeln!(out, "\t{}", f.selected.len());
        }
        out
    }

    pub fn scores_table(&self) -> String {
        let mut out = String::from("scan_id\tpatient_id\tlabel\tscore\n");
        for s in &self.test_scores {
            let _ = writeln!(out, "{}\t{}\t{}\t{:.17e}", s.scan_id, s.patient_id, s.label, s.score);
        }
        out
    }

    pub fn split_table(&self) -> String {
        let mut out = String::from("patient_id\tset\tfold\n");
        for p in &self.split.train {
            let fold = self.folds.fold_of(p).map_or("-".to_string(), |f| f.to_string());
            let _ = writeln!(out, "{p}\ttrain\t{fold}");
        }
        for p in &self.split.test {
            let _ = writeln!(out, "{p}\ttest\t-");
        }
        out
    }
}

/// Rows of `features` reordered to dataset order, with labels and patients.
pub fn training_matrix(dataset: &Dataset, features: &FeatureMatrix) -> Result<FeatureMatrix> {
    let index: HashMap<&str, usize> = features
        .instance_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let rows = dataset
        .records()
        .iter()
        .map(|r| {
            index
                .get(r.scan_id.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidParameter(format!("feature matrix has no row for {}", r.scan_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(features.select_rows(&rows))
}

fn subset(matrix: &FeatureMatrix, labels: &[Label], rows: &[usize]) -> (FeatureMatrix, Vec<Label>) {
    (matrix.select_rows(rows), rows.iter().map(|&r| labels[r]).collect())
}

/// The full protocol on a precomputed feature matrix: patient split, k-fold CV
/// on the training patients with per-fold selection and standardization, a
/// refit on all training patients, one evaluation on the test patients.
pub fn run_protocol(dataset: &Dataset, features: &FeatureMatrix, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let matrix = training_matrix(dataset, features)?;
    let labels = dataset.labels();
    let patient_of: Vec<&str> = dataset.records().iter().map(|r| r.patient_id.as_str()).collect();

    let split = patient_split(&dataset.patients(), config.split_ratio, config.split_seed)?;
    let patient_labels: HashMap<String, Label> = dataset.patients().into_iter().collect();
    let folds = make_folds(&labelled(&split.train, &patient_labels), config.folds, config.fold_seed)?;
    let train_set: HashSet<&str> = split.train.iter().map(String::as_str).collect();
    let fold_of: HashMap<&str, usize> = folds.assignment.iter().map(|(p, f)| (p.as_str(), *f)).collect();
    let train_rows: Vec<usize> = (0..labels.len()).filter(|&i| train_set.contains(patient_of[i])).collect();
    let test_rows: Vec<usize> = (0..labels.len()).filter(|&i| !train_set.contains(patient_of[i])).collect();

    let fold_outcomes: Vec<(FoldResult, FitAudit)> = (0..folds.k)
        .into_par_iter()
        .map(|k| {
            let (fit_rows, val_rows): (Vec<usize>, Vec<usize>) =
                train_rows.iter().partition(|&&i| fold_of[patient_of[i]] != k);
            let (xt, yt) = subset(&matrix, &labels, &fit_rows);
            let (xv, yv) = subset(&matrix, &labels, &val_rows);
            let stage = format!("fold{k}");
            let out = fit_and_evaluate(&stage, &xt, &yt, &xv, &yv, config, config.early_stopping)?;
            if out.eval.auc.is_none() {
                log::warn!("{stage}: validation set holds a single class; AUC skipped");
            }
            Ok((
                FoldResult {
                    fold: k,
                    n_train: fit_rows.len(),
                    n_val: val_rows.len(),
                    selected: out.selection.selected_names(),
                    eval: out.eval,
                },
                out.audit,
            ))
        })
        .collect::<Result<_>>()?;
    let (cv, mut audit): (Vec<FoldResult>, Vec<FitAudit>) = fold_outcomes.into_iter().unzip();

    let (xt, yt) = subset(&matrix, &labels, &train_rows);
    let (xs, ys) = subset(&matrix, &labels, &test_rows);
    let fin = fit_and_evaluate("final", &xt, &yt, &xs, &ys, config, false)?;
    audit.push(fin.audit);
    let test_scores = test_rows
        .iter()
        .zip(&fin.scores)
        .map(|(&i, &score)| ScoredScan {
            scan_id: matrix.instance_ids()[i].clone(),
            patient_id: patient_of[i].to_string(),
            label: labels[i],
            score,
        })
        .collect();

    Ok(ExperimentReport {
        feature_names: matrix.feature_names().to_vec(),
        split,
        folds,
        cv_summary: CvSummary::from_folds(&cv),
        cv,
        final_selection: fin.selection,
        model: fin.model,
        trace: fin.trace,
        test: fin.eval,
        test_scores,
        audit,
    })
}

/// Extracts descriptors (plus embeddings in hybrid mode) and runs the protocol.
pub fn run_experiment(
    dataset: &Dataset,
    mode: Mode,
    config: &ExperimentConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<ExperimentReport> {
    let mut features = extract_all(dataset, &config.descriptors)?;
    if mode == Mode::Hybrid {
        let table = embeddings.ok_or_else(|| Error::InvalidParameter("hybrid mode needs an embedding table".into()))?;
        features = features.hconcat(&table.to_matrix(features.instance_ids())?)?;
    }
    run_protocol(dataset, &features, config)
}
