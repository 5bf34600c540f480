//! `glaucoct` command-line entry point.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric degeneracy.
//! Failures print a single `error[<category>]: <message>` line on stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use glaucoct::classifier::{
    apply_standardizer, evaluate, fit_standardizer, mlp_train, TrainedModel,
};
use glaucoct::data::{
    load_dataset, read_feature_matrix, write_dataset, write_feature_matrix, Dataset, FeatureMatrix, Label,
};
use glaucoct::pipeline::{
    extract_all, load_embeddings, run_protocol, standin_embedder, EmbeddingSource, EmbeddingTable,
    ExperimentConfig, ExperimentReport, Mode,
};
use glaucoct::selection::select_features;
use glaucoct::stats::pearson;
use glaucoct::synth::{generate, SynthParams};
use glaucoct::{Error, ErrorCategory};

#[derive(Parser)]
#[command(name = "glaucoct", version, about = "Glaucoma detection on circumpapillary OCT B-scans")]
struct Cli {
    /// Worker threads for extraction, selection and folds (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        patients_per_class: usize,
        #[arg(long, default_value_t = 2)]
        scans_per_patient: usize,
        #[arg(long, default_value_t = 384)]
        width: usize,
        #[arg(long, default_value_t = 248)]
        height: usize,
        #[arg(long)]
        glaucoma_thickness_mean: Option<f64>,
        #[arg(long)]
        glaucoma_age_mean: Option<f64>,
        #[arg(long)]
        texture_contrast_offset: Option<f64>,
    },
    /// Compute the descriptor matrix of a dataset.
    Extract {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run relevance and redundancy selection on a feature matrix.
    Select {
        #[arg(long)]
        features: PathBuf,
        /// Manifest providing the labels.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Standardize and train the MLP on every row of a feature matrix.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        /// Run feature selection first instead of using every column.
        #[arg(long)]
        select: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Score a feature matrix with a trained model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// End-to-end experiment: split, cross-validation, refit, test.
    Run {
        #[arg(long, value_parser = ["hdl", "hybrid"])]
        mode: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Embedding file with `scan_id,v0,...` rows.
        #[arg(long, conflicts_with = "standin_embedder")]
        embeddings: Option<PathBuf>,
        /// Use the seeded random-projection embedder.
        #[arg(long)]
        standin_embedder: bool,
        #[command(flatten)]
        common: Common,
    },
}

type CliResult<T> = Result<T, Failure>;

struct Failure {
    category: ErrorCategory,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        category: ErrorCategory::Usage,
        message: message.into(),
    }
}

fn exit_code(c: ErrorCategory) -> u8 {
    match c {
        ErrorCategory::Usage => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numeric => 4,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Lines written as `# ...` at the top of every output.
struct Provenance(Vec<String>);

impl Provenance {
    fn new(command: &str, config_text: &str, seeds: &str, inputs: &[&Path]) -> CliResult<Self> {
        let mut lines = vec![
            format!("glaucoct {}", env!("CARGO_PKG_VERSION")),
            format!("command {command}"),
            format!("config-sha256 {}", sha256_hex(config_text.as_bytes())),
            format!("seed {seeds}"),
        ];
        for p in inputs {
            let bytes = fs::read(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            lines.push(format!("input {name} sha256 {}", sha256_hex(&bytes)));
        }
        Ok(Provenance(lines))
    }

    fn header(&self) -> String {
        self.0.iter().map(|l| format!("# {l}\n")).collect()
    }

    fn write(&self, path: &Path, body: &str) -> CliResult<()> {
        fs::write(path, format!("{}{body}", self.header())).map_err(|e| {
            Error::Io {
                path: path.to_path_buf(),
                source: e,
            }
            .into()
        })
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut config = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        config.set_seed(s);
    }
    Ok(config)
}

fn seeds(c: &ExperimentConfig) -> String {
    format!(
        "split={} cv={} mlp={} embed={}",
        c.split_seed, c.fold_seed, c.train.seed, c.embedding_seed
    )
}

/// Labels for the rows of `matrix`, taken from the dataset.
fn labels_for(matrix: &FeatureMatrix, dataset: &Dataset) -> CliResult<Vec<Label>> {
    let map = dataset.label_map();
    matrix
        .instance_ids()
        .iter()
        .map(|id| {
            map.get(id)
                .copied()
                .ok_or_else(|| usage(format!("scan {id:?} is not in the dataset manifest")))
        })
        .collect()
}

fn correlation_table(matrix: &FeatureMatrix) -> String {
    let names = matrix.feature_names();
    let cols: Vec<Vec<f64>> = (0..names.len()).map(|j| matrix.column(j)).collect();
    let mut out = format!("feature\t{}\n", names.join("\t"));
    for (i, a) in cols.iter().enumerate() {
        out.push_str(&names[i]);
        for b in &cols {
            let r = pearson(a, b).map(|t| t.statistic).unwrap_or(f64::NAN);
            let _ = write!(out, "\t{r:.6}");
        }
        out.push('\n');
    }
    out
}

/// Long-format table of the selected columns, ready for per-class boxplots.
fn boxplot_table(matrix: &FeatureMatrix, labels: &[Label]) -> String {
    let mut out = String::from("feature\tscan_id\tlabel\tvalue\n");
    for (j, name) in matrix.feature_names().iter().enumerate() {
        for (i, id) in matrix.instance_ids().iter().enumerate() {
            let _ = writeln!(out, "{name}\t{id}\t{}\t{}", labels[i], matrix.get(i, j));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    out: &Path,
    seed: u64,
    patients_per_class: usize,
    scans_per_patient: usize,
    width: usize,
    height: usize,
    glaucoma_thickness_mean: Option<f64>,
    glaucoma_age_mean: Option<f64>,
    texture_contrast_offset: Option<f64>,
) -> CliResult<()> {
    let d = SynthParams::default();
    let params = SynthParams {
        patients_per_class,
        scans_per_patient,
        width,
        height,
        glaucoma_thickness_mean: glaucoma_thickness_mean.unwrap_or(d.glaucoma_thickness_mean),
        glaucoma_age_mean: glaucoma_age_mean.unwrap_or(d.glaucoma_age_mean),
        texture_contrast_offset: texture_contrast_offset.unwrap_or(d.texture_contrast_offset),
        seed,
        ..d
    };
    let dataset = generate(&params)?;
    create_dir(out)?;
    let manifest = write_dataset(&dataset, out)?;
    let params_text = format!("{params:?}\n");
    let prov = Provenance::new("synth", &params_text, &seed.to_string(), &[])?;
    let body = fs::read_to_string(&manifest).map_err(|e| Error::Io {
        path: manifest.clone(),
        source: e,
    })?;
    prov.write(&manifest, &body)?;
    prov.write(&out.join("synth_params.txt"), &params_text)?;
    println!("wrote {} scans to {}", dataset.len(), manifest.display());
    Ok(())
}

fn cmd_extract(data: &Path, out: &Path, common: &Common) -> CliResult<()> {
    let config = load_config(common)?;
    let dataset = load_dataset(data)?;
    let matrix = extract_all(&dataset, &config.descriptors)?;
    let prov = Provenance::new("extract", &config.to_text(), &seeds(&config), &[data])?;
    write_feature_matrix(&matrix, out, &prov.0)?;
    println!("{} scans x {} features -> {}", matrix.n_instances(), matrix.n_features(), out.display());
    Ok(())
}

fn cmd_select(features: &Path, data: &Path, out: &Path, common: &Common) -> CliResult<()> {
    let config = load_config(common)?;
    let matrix = read_feature_matrix(features)?;
    let labels = labels_for(&matrix, &load_dataset(data)?)?;
    let (selected, report) = select_features(&matrix, &labels, &config.selection)?;
    create_dir(out)?;
    let prov = Provenance::new("select", &config.to_text(), &seeds(&config), &[features, data])?;
    prov.write(&out.join("selection.tsv"), &report.to_tsv())?;
    write_feature_matrix(&selected, &out.join("selected.csv"), &prov.0)?;
    prov.write(&out.join("boxplot.tsv"), &boxplot_table(&selected, &labels))?;
    prov.write(&out.join("correlation.tsv"), &correlation_table(&selected))?;
    println!("selected {} of {} features", selected.n_features(), matrix.n_features());
    Ok(())
}

fn cmd_train(features: &Path, data: &Path, out: &Path, select: bool, common: &Common) -> CliResult<()> {
    let config = load_config(common)?;
    let mut matrix = read_feature_matrix(features)?;
    let labels = labels_for(&matrix, &load_dataset(data)?)?;
    if select {
        matrix = select_features(&matrix, &labels, &config.selection)?.0;
    }
    let standardizer = fit_standardizer(&matrix)?;
    let x = apply_standardizer(&standardizer, &matrix)?;
    let (mlp, trace) = mlp_train(&x, &labels, &config.train, None)?;
    let model = TrainedModel { standardizer, mlp };
    let prov = Provenance::new("train", &config.to_text(), &seeds(&config), &[features, data])?;
    prov.write(out, &model.to_text())?;
    println!(
        "trained on {} rows x {} features, final loss {:.6}",
        x.n_instances(),
        x.n_features(),
        trace.train_loss.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_eval(model_path: &Path, features: &Path, data: &Path, out: &Path) -> CliResult<()> {
    let text = fs::read_to_string(model_path).map_err(|e| Error::Io {
        path: model_path.to_path_buf(),
        source: e,
    })?;
    let model = TrainedModel::from_text(&text).map_err(|e| Failure {
        category: ErrorCategory::Data,
        message: e.to_string(),
    })?;
    let matrix = read_feature_matrix(features)?;
    let labels = labels_for(&matrix, &load_dataset(data)?)?;
    let report = evaluate(&model, &matrix, &labels)?;
    if report.auc.is_none() {
        log::warn!("labels hold a single class; AUC undefined");
    }
    create_dir(out)?;
    let prov = Provenance::new("eval", "", "-", &[model_path, features, data])?;
    prov.write(&out.join("metrics.tsv"), &report.metrics_table())?;
    prov.write(&out.join("roc.tsv"), &report.roc_table())?;
    print!("{}", report.metrics_table());
    Ok(())
}

fn write_run_outputs(out: &Path, prov: &Provenance, config_text: &str, r: &ExperimentReport, dataset: &Dataset) -> CliResult<()> {
    prov.write(&out.join("config.txt"), config_text)?;
    prov.write(&out.join("cv_metrics.tsv"), &r.cv_summary.to_table())?;
    prov.write(&out.join("cv_folds.tsv"), &r.folds_table())?;
    prov.write(&out.join("test_metrics.tsv"), &r.test.metrics_table())?;
    prov.write(&out.join("test_roc.tsv"), &r.test.roc_table())?;
    prov.write(&out.join("test_scores.tsv"), &r.scores_table())?;
    prov.write(&out.join("selection.tsv"), &r.final_selection.to_tsv())?;
    prov.write(&out.join("split.tsv"), &r.split_table())?;
    prov.write(&out.join("model.txt"), &r.model.to_text())?;

    // plot tables over the training patients, restricted to the final selection
    let names = r.final_selection.selected_names();
    let train: std::collections::HashSet<&str> = r.split.train.iter().map(String::as_str).collect();
    let rows: Vec<usize> = dataset
        .records()
        .iter()
        .enumerate()
        .filter(|(_, rec)| train.contains(rec.patient_id.as_str()))
        .map(|(i, _)| i)
        .collect();
    let labels: Vec<Label> = rows.iter().map(|&i| dataset.records()[i].label).collect();
    let feats = out.join("features.csv");
    let all = read_feature_matrix(&feats)?;
    let selected = all.select_named(&names)?.select_rows(&rows);
    prov.write(&out.join("boxplot.tsv"), &boxplot_table(&selected, &labels))?;
    prov.write(&out.join("correlation.tsv"), &correlation_table(&selected))?;
    Ok(())
}

fn cmd_run(
    mode: &str,
    data: &Path,
    out: &Path,
    embeddings: Option<&Path>,
    standin: bool,
    common: &Common,
) -> CliResult<()> {
    let mode = Mode::parse(mode).ok_or_else(|| usage(format!("unknown mode {mode:?}")))?;
    let mut config = load_config(common)?;
    if let Some(p) = embeddings {
        config.embedding = EmbeddingSource::File(p.to_path_buf());
    } else if standin {
        config.embedding = EmbeddingSource::Standin;
    }
    if mode == Mode::Hybrid && config.embedding == EmbeddingSource::None {
        return Err(usage("run --mode hybrid needs --embeddings <file> or --standin-embedder"));
    }
    let dataset = load_dataset(data)?;
    let mut inputs: Vec<&Path> = vec![data];
    let table: Option<EmbeddingTable> = match (&config.embedding, mode) {
        (_, Mode::Hdl) | (EmbeddingSource::None, _) => None,
        (EmbeddingSource::Standin, Mode::Hybrid) => {
            Some(standin_embedder(&dataset, config.embedding_dim, config.embedding_seed)?)
        }
        (EmbeddingSource::File(p), Mode::Hybrid) => Some(load_embeddings(p, config.embedding_dim)?),
    };
    if let (EmbeddingSource::File(p), Mode::Hybrid) = (&config.embedding, mode) {
        inputs.push(p.as_path());
    }
    // the embedding path is covered by the input hash, not the config hash
    let mut hashed = config.clone();
    if let EmbeddingSource::File(_) = hashed.embedding {
        hashed.embedding = EmbeddingSource::File(PathBuf::from("<input>"));
    }
    let config_text = hashed.to_text();
    let prov = Provenance::new(&format!("run --mode {}", mode.as_str()), &config_text, &seeds(&config), &inputs)?;

    let features = extract_all(&dataset, &config.descriptors)?;
    create_dir(out)?;
    let features = match &table {
        Some(t) => {
            if matches!(config.embedding, EmbeddingSource::Standin) {
                prov.write(&out.join("embeddings.csv"), &t.to_text())?;
            }
            features.hconcat(&t.to_matrix(features.instance_ids())?)?
        }
        None => features,
    };
    write_feature_matrix(&features, &out.join("features.csv"), &prov.0)?;
    let report = run_protocol(&dataset, &features, &config)?;
    write_run_outputs(out, &prov, &config_text, &report, &dataset)?;

    println!("mode {}: {} input features, {} selected", mode.as_str(), features.n_features(), report.final_selection.selected_names().len());
    println!("cross-validation (k={}):", config.folds);
    print!("{}", report.cv_summary.to_table());
    println!("test:");
    print!("{}", report.test.metrics_table());
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth {
            out,
            seed,
            patients_per_class,
            scans_per_patient,
            width,
            height,
            glaucoma_thickness_mean,
            glaucoma_age_mean,
            texture_contrast_offset,
        } => cmd_synth(
            &out,
            seed,
            patients_per_class,
            scans_per_patient,
            width,
            height,
            glaucoma_thickness_mean,
            glaucoma_age_mean,
            texture_contrast_offset,
        ),
        Command::Extract { data, out, common } => cmd_extract(&data, &out, &common),
        Command::Select {
            features,
            data,
            out,
            common,
        } => cmd_select(&features, &data, &out, &common),
        Command::Train {
            features,
            data,
            out,
            select,
            common,
        } => cmd_train(&features, &data, &out, select, &common),
        Command::Eval {
            model,
            features,
            data,
            out,
        } => cmd_eval(&model, &features, &data, &out),
        Command::Run {
            mode,
            data,
            out,
            embeddings,
            standin_embedder,
            common,
        } => cmd_run(&mode, &data, &out, embeddings.as_deref(), standin_embedder, &common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error[usage]: --workers must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error[usage]: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.category.as_str(), f.message.replace('\n', " "));
            ExitCode::from(exit_code(f.category))
        }
    }
}
