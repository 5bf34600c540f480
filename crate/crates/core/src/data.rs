//! Scans, datasets and feature matrices, plus their on-disk formats.
//!
//! A dataset lives in a directory with a `manifest.csv` whose columns are
//! `scan_id, patient_id, label, age, gender, image_path, upper_boundary_path,
//! lower_boundary_path, retina_mask_path, axial_scale`. Paths are resolved
//! relative to the manifest. Images and masks are 8-bit PGM (`P5` or `P2`),
//! boundaries are single-line whitespace-separated row indices.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(v) = pixels
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 255.0)
        {
            return Err(Error::InvalidImage(format!("intensity {v} outside [0, 255]")));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from `f(row, col)`; values are validated like [`GrayImage::new`].
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        GrayImage::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Applies `f` to every intensity. The result must stay inside `[0, 255]`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        GrayImage::new(self.width, self.height, self.pixels.iter().map(|&v| f(v)).collect())
    }

    /// Rotates by 90 degrees counter-clockwise.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut pixels = Vec::with_capacity(w * h);
        for r in 0..w {
            for c in 0..h {
                pixels.push(self.get(c, w - 1 - r));
            }
        }
        GrayImage {
            width: h,
            height: w,
            pixels,
        }
    }
}

/// Boolean region grid with the same geometry as an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: cells.len(),
            });
        }
        Ok(Mask {
            width,
            height,
            cells,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            cells: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut cells = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                cells.push(f(r, c));
            }
        }
        Mask {
            width,
            height,
            cells,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col]
    }

    /// Bounds-checked lookup with signed coordinates; out-of-image is `false`.
    #[inline]
    pub fn contains(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.get(row as usize, col as usize)
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn matches(&self, image: &GrayImage) -> bool {
        self.width == image.width() && self.height == image.height()
    }

    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut cells = Vec::with_capacity(w * h);
        for r in 0..w {
            for c in 0..h {
                cells.push(self.get(c, w - 1 - r));
            }
        }
        Mask {
            width: h,
            height: w,
            cells,
        }
    }
}

/// A B-scan with its RNFL boundaries and retina region.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedScan {
    image: GrayImage,
    rnfl_upper: Vec<usize>,
    rnfl_lower: Vec<usize>,
    retina_mask: Mask,
    axial_scale: f64,
}

impl SegmentedScan {
    pub fn new(
        image: GrayImage,
        rnfl_upper: Vec<usize>,
        rnfl_lower: Vec<usize>,
        retina_mask: Mask,
        axial_scale: f64,
    ) -> Result<Self> {
        let w = image.width();
        if rnfl_upper.len() != w || rnfl_lower.len() != w {
            return Err(Error::InvalidScan(format!(
                "boundary lengths {}/{} do not match image width {w}",
                rnfl_upper.len(),
                rnfl_lower.len()
            )));
        }
        for (j, (&u, &l)) in rnfl_upper.iter().zip(&rnfl_lower).enumerate() {
            if u > l || l >= image.height() {
                return Err(Error::InvalidScan(format!(
                    "column {j}: need upper <= lower < height, got {u}, {l}, {}",
                    image.height()
                )));
            }
        }
        if !retina_mask.matches(&image) {
            return Err(Error::InvalidScan("retina mask size differs from image".into()));
        }
        if !(axial_scale.is_finite() && axial_scale > 0.0) {
            return Err(Error::InvalidScan(format!(
                "axial_scale must be positive, got {axial_scale}"
            )));
        }
        Ok(SegmentedScan {
            image,
            rnfl_upper,
            rnfl_lower,
            retina_mask,
            axial_scale,
        })
    }

    pub fn image(&self) -> &GrayImage {
        &self.image
    }

    pub fn rnfl_upper(&self) -> &[usize] {
        &self.rnfl_upper
    }

    pub fn rnfl_lower(&self) -> &[usize] {
        &self.rnfl_lower
    }

    pub fn retina_mask(&self) -> &Mask {
        &self.retina_mask
    }

    pub fn axial_scale(&self) -> f64 {
        self.axial_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Glaucoma,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Glaucoma => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Glaucoma
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Normal),
            1 => Some(Label::Glaucoma),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "normal" => Some(Label::Normal),
            "1" | "glaucoma" => Some(Label::Glaucoma),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub scan_id: String,
    pub patient_id: String,
    pub label: Label,
    pub age: f64,
    pub gender: u8,
    pub scan: SegmentedScan,
}

/// An ordered collection of scans in which every patient has one label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    records: Vec<ScanRecord>,
}

impl Dataset {
    pub fn new(records: Vec<ScanRecord>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut patients: HashMap<&str, Label> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if !ids.insert(r.scan_id.as_str()) {
                return Err(Error::DuplicateScanId {
                    scan_id: r.scan_id.clone(),
                    row: i + 1,
                });
            }
            match patients.get(r.patient_id.as_str()) {
                Some(&l) if l != r.label => {
                    return Err(Error::ConflictingLabels {
                        patient_id: r.patient_id.clone(),
                        row: i + 1,
                    })
                }
                _ => {
                    patients.insert(&r.patient_id, r.label);
                }
            }
            if r.gender > 1 || !(r.age.is_finite() && r.age >= 0.0) {
                return Err(Error::InvalidScan(format!(
                    "record {}: age must be >= 0 and gender 0/1",
                    r.scan_id
                )));
            }
        }
        Ok(Dataset { records })
    }

    pub fn records(&self) -> &[ScanRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Distinct patients with their label, in first-appearance order.
    pub fn patients(&self) -> Vec<(String, Label)> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.patient_id.as_str()))
            .map(|r| (r.patient_id.clone(), r.label))
            .collect()
    }

    /// Label lookup by scan id.
    pub fn label_map(&self) -> HashMap<String, Label> {
        self.records
            .iter()
            .map(|r| (r.scan_id.clone(), r.label))
            .collect()
    }

    /// Returns a copy where every patient's label is replaced by `f(patient_id, label)`.
    pub fn relabel(&self, f: impl Fn(&str, Label) -> Label) -> Result<Self> {
        let records = self
            .records
            .iter()
            .map(|r| ScanRecord {
                label: f(&r.patient_id, r.label),
                ..r.clone()
            })
            .collect();
        Dataset::new(records)
    }
}

/// Named feature columns over learning instances, stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    instance_ids: Vec<String>,
    feature_names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        instance_ids: Vec<String>,
        feature_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for n in &feature_names {
            if !seen.insert(n.as_str()) {
                return Err(Error::DuplicateColumn { name: n.clone() });
            }
        }
        let expected = instance_ids.len() * feature_names.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let f = feature_names.len();
            return Err(Error::InvalidParameter(format!(
                "non-finite value for instance {:?}, feature {:?}",
                instance_ids[pos / f],
                feature_names[pos % f]
            )));
        }
        Ok(FeatureMatrix {
            instance_ids,
            feature_names,
            values,
        })
    }

    pub fn from_rows(
        instance_ids: Vec<String>,
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let f = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * f);
        for row in &rows {
            if row.len() != f {
                return Err(Error::DimensionMismatch {
                    expected: f,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        FeatureMatrix::new(instance_ids, feature_names, values)
    }

    pub fn n_instances(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.feature_names.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let f = self.feature_names.len();
        &self.values[row * f..(row + 1) * f]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_instances()).map(|r| self.get(r, col)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let names = cols.iter().map(|&c| self.feature_names[c].clone()).collect();
        let mut values = Vec::with_capacity(self.n_instances() * cols.len());
        for r in 0..self.n_instances() {
            values.extend(cols.iter().map(|&c| self.get(r, c)));
        }
        FeatureMatrix {
            instance_ids: self.instance_ids.clone(),
            feature_names: names,
            values,
        }
    }

    /// Columns by name, in the order given.
    pub fn select_named(&self, names: &[String]) -> Result<FeatureMatrix> {
        let cols = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::InvalidParameter(format!("no feature named {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let f = self.n_features();
        let mut values = Vec::with_capacity(rows.len() * f);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            instance_ids: rows.iter().map(|&r| self.instance_ids[r].clone()).collect(),
            feature_names: self.feature_names.clone(),
            values,
        }
    }

    /// Appends the columns of `other`, joining rows by instance id.
    pub fn hconcat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        let index: HashMap<&str, usize> = other
            .instance_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut names = self.feature_names.clone();
        names.extend(other.feature_names.iter().cloned());
        let mut values = Vec::with_capacity(self.n_instances() * names.len());
        for (r, id) in self.instance_ids.iter().enumerate() {
            let o = *index
                .get(id.as_str())
                .ok_or_else(|| Error::MissingEmbedding(id.clone()))?;
            values.extend_from_slice(self.row(r));
            values.extend_from_slice(other.row(o));
        }
        FeatureMatrix::new(self.instance_ids.clone(), names, values)
    }
}

/// Family prefix of a feature name (`thick`, `glcm`, `lbpv`, `hurst`, `demo`, `emb`).
pub fn feature_family(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}

// ---------------------------------------------------------------------------
// PGM images

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|reason| Error::InvalidImage(format!("{}: {reason}", path.display())))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> std::result::Result<String, String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                break;
            }
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err("unexpected end of header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = token(&mut pos)?;
    let num = |s: String| s.parse::<usize>().map_err(|_| format!("bad header field {s:?}"));
    let width = num(token(&mut pos)?)?;
    let height = num(token(&mut pos)?)?;
    let maxval = num(token(&mut pos)?)?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("only 8-bit maxval supported, got {maxval}"));
    }
    let scale = 255.0 / maxval as f64;
    let n = width * height;
    let pixels: Vec<f64> = match magic.as_str() {
        "P5" => {
            pos += 1;
            let data = bytes
                .get(pos..pos + n)
                .ok_or_else(|| "truncated pixel data".to_string())?;
            data.iter().map(|&b| b as f64 * scale).collect()
        }
        "P2" => {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let v = num(token(&mut pos)?)?;
                if v > maxval {
                    return Err(format!("pixel {v} exceeds maxval"));
                }
                out.push(v as f64 * scale);
            }
            out
        }
        other => return Err(format!("unsupported magic {other:?}")),
    };
    GrayImage::new(width, height, pixels).map_err(|e| e.to_string())
}

/// Writes a binary `P5` map; intensities are rounded to the nearest integer.
pub fn write_pgm(image: &GrayImage, path: &Path) -> Result<()> {
    let mut buf = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    buf.extend(image.pixels().iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    let img = read_pgm(path)?;
    Mask::new(
        img.width(),
        img.height(),
        img.pixels().iter().map(|&v| v > 0.0).collect(),
    )
}

pub fn write_mask(mask: &Mask, path: &Path) -> Result<()> {
    let img = GrayImage {
        width: mask.width,
        height: mask.height,
        pixels: mask.cells.iter().map(|&b| if b { 255.0 } else { 0.0 }).collect(),
    };
    write_pgm(&img, path)
}

pub fn read_boundary(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<usize>().map_err(|_| Error::MalformedRow {
                path: path.to_path_buf(),
                row: 1,
                reason: format!("boundary value {i} is not a row index: {tok:?}"),
            })
        })
        .collect()
}

pub fn write_boundary(values: &[usize], path: &Path) -> Result<()> {
    let line: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    fs::write(path, line.join(" ") + "\n").map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Manifest

const MANIFEST_COLUMNS: [&str; 9] = [
    "scan_id",
    "patient_id",
    "label",
    "age",
    "gender",
    "image_path",
    "upper_boundary_path",
    "lower_boundary_path",
    "retina_mask_path",
];

/// Loads a dataset from its manifest, resolving file paths relative to the manifest.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    if !manifest_path.is_file() {
        return Err(Error::MissingFile {
            path: manifest_path.to_path_buf(),
            row: 0,
        });
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(manifest_path)
        .map_err(|e| csv_error(manifest_path, 1, e))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_error(manifest_path, 1, e))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 9];
    for (slot, name) in idx.iter_mut().zip(MANIFEST_COLUMNS) {
        *slot = col(name).ok_or_else(|| Error::MalformedRow {
            path: manifest_path.to_path_buf(),
            row: 1,
            reason: format!("header lacks column {name:?}"),
        })?;
    }
    let scale_col = col("axial_scale");

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    let mut patient_labels: HashMap<String, Label> = HashMap::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(manifest_path, row, e))?;
        let malformed = |reason: String| Error::MalformedRow {
            path: manifest_path.to_path_buf(),
            row,
            reason,
        };
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let scan_id = field(0).to_string();
        let patient_id = field(1).to_string();
        if scan_id.is_empty() || patient_id.is_empty() {
            return Err(malformed("empty scan_id or patient_id".into()));
        }
        let label = Label::parse(field(2))
            .ok_or_else(|| malformed(format!("label {:?} is not 0/1/normal/glaucoma", field(2))))?;
        let age: f64 = field(3)
            .parse()
            .map_err(|_| malformed(format!("age {:?} is not a number", field(3))))?;
        let gender: u8 = field(4)
            .parse()
            .ok()
            .filter(|g| *g <= 1)
            .ok_or_else(|| malformed(format!("gender {:?} is not 0 or 1", field(4))))?;
        let axial_scale = match scale_col.and_then(|c| rec.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| malformed(format!("axial_scale {s:?} is not a number")))?,
            None => 1.0,
        };
        if !ids.insert(scan_id.clone()) {
            return Err(Error::DuplicateScanId { scan_id, row });
        }
        match patient_labels.get(&patient_id) {
            Some(&l) if l != label => {
                return Err(Error::ConflictingLabels { patient_id, row });
            }
            _ => {
                patient_labels.insert(patient_id.clone(), label);
            }
        }
        let resolve = |k: usize| -> Result<PathBuf> {
            let p = base.join(field(k));
            if p.is_file() {
                Ok(p)
            } else {
                Err(Error::MissingFile { path: p, row })
            }
        };
        let image = read_pgm(&resolve(5)?)?;
        let upper = read_boundary(&resolve(6)?)?;
        let lower = read_boundary(&resolve(7)?)?;
        let mask = read_mask(&resolve(8)?)?;
        let scan = SegmentedScan::new(image, upper, lower, mask, axial_scale)
            .map_err(|e| malformed(e.to_string()))?;
        records.push(ScanRecord {
            scan_id,
            patient_id,
            label,
            age,
            gender,
            scan,
        });
    }
    Dataset::new(records)
}

fn csv_error(path: &Path, row: usize, e: csv::Error) -> Error {
    Error::MalformedRow {
        path: path.to_path_buf(),
        row,
        reason: e.to_string(),
    }
}

/// Writes every scan's files under `dir` and a `manifest.csv` referencing them.
/// Returns the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    for sub in ["images", "boundaries", "masks"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let manifest = dir.join("manifest.csv");
    let mut w = csv::Writer::from_path(&manifest).map_err(|e| csv_error(&manifest, 0, e))?;
    let mut header: Vec<&str> = MANIFEST_COLUMNS.to_vec();
    header.push("axial_scale");
    w.write_record(&header).map_err(|e| csv_error(&manifest, 0, e))?;
    for (i, r) in dataset.records().iter().enumerate() {
        let image = format!("images/{}.pgm", r.scan_id);
        let upper = format!("boundaries/{}_upper.txt", r.scan_id);
        let lower = format!("boundaries/{}_lower.txt", r.scan_id);
        let mask = format!("masks/{}_retina.pgm", r.scan_id);
        write_pgm(r.scan.image(), &dir.join(&image))?;
        write_boundary(r.scan.rnfl_upper(), &dir.join(&upper))?;
        write_boundary(r.scan.rnfl_lower(), &dir.join(&lower))?;
        write_mask(r.scan.retina_mask(), &dir.join(&mask))?;
        w.write_record([
            r.scan_id.as_str(),
            r.patient_id.as_str(),
            &r.label.to_string(),
            &r.age.to_string(),
            &r.gender.to_string(),
            &image,
            &upper,
            &lower,
            &mask,
            &r.scan.axial_scale().to_string(),
        ])
        .map_err(|e| csv_error(&manifest, i + 1, e))?;
    }
    w.flush().map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Feature matrix files

/// Writes `matrix` as CSV: `scan_id` followed by feature names, then one row per
/// instance. Each `header_comments` entry is emitted first as a `# ` line.
/// Values use the shortest decimal form that parses back to the same `f64`.
pub fn write_feature_matrix(
    matrix: &FeatureMatrix,
    path: &Path,
    header_comments: &[String],
) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for c in header_comments {
        writeln!(file, "# {c}").map_err(|e| Error::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["scan_id".to_string()];
    header.extend(matrix.feature_names().iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, 0, e))?;
    for r in 0..matrix.n_instances() {
        let mut rec = vec![matrix.instance_ids()[r].clone()];
        rec.extend(matrix.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_error(path, r + 1, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::MalformedRow {
                path: path.to_path_buf(),
                row: 0,
                reason: format!("{other:?}"),
            },
        })?;
    let headers = reader.headers().map_err(|e| csv_error(path, 0, e))?.clone();
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(Error::DuplicateColumn { name: n.clone() });
        }
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(path, row, e))?;
        if rec.len() != names.len() + 1 {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                row,
                reason: format!("expected {} fields, got {}", names.len() + 1, rec.len()),
            });
        }
        ids.push(rec[0].to_string());
        for tok in rec.iter().skip(1) {
            values.push(tok.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
                path: path.to_path_buf(),
                row,
                reason: format!("{tok:?} is not a number"),
            })?);
        }
    }
    FeatureMatrix::new(ids, names, values)
}
