use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn glaucoct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glaucoct")).args(args).output().unwrap()
}

fn synth(dir: &Path, patients: usize) -> String {
    let out = dir.join("data");
    let o = glaucoct(&[
        "synth",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
        "--patients-per-class",
        &patients.to_string(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("manifest.csv").display().to_string()
}

fn table(path: &Path) -> Vec<(String, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let mut f = l.split('\t');
            (f.next().unwrap().to_string(), f.next().unwrap().parse().unwrap())
        })
        .collect()
}

#[test]
fn run_hdl_writes_metric_tables() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 8);
    let out = dir.path().join("run");
    let o = glaucoct(&["run", "--mode", "hdl", "--data", &manifest, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let metrics = table(&out.join("test_metrics.tsv"));
    let names: Vec<&str> = metrics.iter().map(|(n, _)| n.as_str()).take(5).collect();
    assert_eq!(names, ["SN", "SPC", "FS", "ACC", "AUC"]);
    assert!(metrics.iter().take(5).all(|(_, v)| (0.0..=1.0).contains(v)));

    let cv = fs::read_to_string(out.join("cv_metrics.tsv")).unwrap();
    assert!(cv.contains("AUC\t") && cv.contains(" ± "));
    let header = fs::read_to_string(out.join("split.tsv")).unwrap();
    assert!(header.starts_with("# glaucoct "));
    assert!(header.contains("# config-sha256 "));
    for f in ["model.txt", "selection.tsv", "test_roc.tsv", "test_scores.tsv", "boxplot.tsv", "correlation.tsv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn stepwise_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 6);
    let p = |name: &str| dir.path().join(name).display().to_string();
    let steps: [Vec<String>; 4] = [
        vec!["extract".into(), "--data".into(), manifest.clone(), "--out".into(), p("f.csv")],
        vec!["select".into(), "--features".into(), p("f.csv"), "--data".into(), manifest.clone(), "--out".into(), p("sel")],
        vec![
            "train".into(),
            "--features".into(),
            p("f.csv"),
            "--data".into(),
            manifest.clone(),
            "--out".into(),
            p("m.txt"),
            "--select".into(),
        ],
        vec![
            "eval".into(),
            "--model".into(),
            p("m.txt"),
            "--features".into(),
            p("f.csv"),
            "--data".into(),
            manifest.clone(),
            "--out".into(),
            p("eval"),
        ],
    ];
    for s in &steps {
        let args: Vec<&str> = s.iter().map(String::as_str).collect();
        let o = glaucoct(&args);
        assert!(o.status.success(), "{}: {}", s[0], String::from_utf8_lossy(&o.stderr));
    }
    assert!(Path::new(&p("sel")).join("selection.tsv").is_file());
    let m = table(&Path::new(&p("eval")).join("metrics.tsv"));
    let tp = m.iter().find(|(n, _)| n == "TP").unwrap().1;
    let fn_ = m.iter().find(|(n, _)| n == "FN").unwrap().1;
    assert_eq!(tp + fn_, 12.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 2);
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let o = glaucoct(&["run", "--mode", "hybrid", "--data", &manifest, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[usage]"));

    let missing = dir.path().join("absent.csv");
    let o = glaucoct(&["extract", "--data", missing.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing file"));

    assert_eq!(glaucoct(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(glaucoct(&["run", "--mode", "cnn", "--data", &manifest, "--out", out]).status.code(), Some(2));
    assert_eq!(glaucoct(&["--workers", "0", "extract", "--data", &manifest, "--out", out]).status.code(), Some(2));

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "cv.k = 5\nno_such_key = 1\n").unwrap();
    let o = glaucoct(&["extract", "--data", &manifest, "--out", out, "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));
}

#[test]
fn embedding_file_must_cover_every_scan() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 2);
    let emb = dir.path().join("emb.csv");
    let row: Vec<String> = (0..128).map(|i| format!("{}", i as f64 / 100.0)).collect();
    fs::write(&emb, format!("p000_s0,{}\n", row.join(","))).unwrap();
    let o = glaucoct(&[
        "run",
        "--mode",
        "hybrid",
        "--embeddings",
        emb.to_str().unwrap(),
        "--data",
        &manifest,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
