//! Grey-level co-occurrence statistics and rotation-invariant uniform LBP with
//! local variance (LBPV histograms), all restricted to a region mask.

use crate::data::{GrayImage, Mask};
use crate::error::{Error, Result};

/// Dense grid where `None` marks cells outside the region of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    cells: Vec<Option<T>>,
}

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, cells: Vec<Option<T>>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: cells.len(),
            });
        }
        Ok(Grid {
            width,
            height,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        self.cells[row * self.width + col]
    }

    #[inline]
    fn get_signed(&self, row: isize, col: isize) -> Option<T> {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            None
        } else {
            self.get(row as usize, col as usize)
        }
    }

    pub fn cells(&self) -> &[Option<T>] {
        &self.cells
    }

    pub fn valid(&self) -> impl Iterator<Item = T> + '_ {
        self.cells.iter().filter_map(|c| *c)
    }

    pub fn valid_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }
}

fn check_mask(image: &GrayImage, region: &Mask) -> Result<()> {
    if !region.matches(image) {
        return Err(Error::DimensionMismatch {
            expected: image.width() * image.height(),
            actual: region.width() * region.height(),
        });
    }
    Ok(())
}

/// Maps in-region intensities to `floor(v * levels / 256)`, clamped to `levels - 1`.
pub fn quantize(image: &GrayImage, region: &Mask, levels: usize) -> Result<Grid<u8>> {
    if !(2..=256).contains(&levels) {
        return Err(Error::InvalidParameter(format!(
            "levels must be in 2..=256, got {levels}"
        )));
    }
    check_mask(image, region)?;
    let mut cells = Vec::with_capacity(image.pixels().len());
    for r in 0..image.height() {
        for c in 0..image.width() {
            cells.push(region.get(r, c).then(|| {
                let q = (image.get(r, c) * levels as f64 / 256.0).floor() as usize;
                q.min(levels - 1) as u8
            }));
        }
    }
    let grid = Grid::new(image.width(), image.height(), cells)?;
    if grid.valid_count() == 0 {
        return Err(Error::EmptyRegion("quantization region"));
    }
    Ok(grid)
}

/// Normalized symmetric co-occurrence matrix for one offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    offset: (i32, i32),
    matrix: Vec<f64>,
}

impl Glcm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn offset(&self) -> (i32, i32) {
        self.offset
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.levels + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Builds a GLCM from an explicit normalized `levels × levels` grid.
    pub fn from_matrix(levels: usize, offset: (i32, i32), matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != levels * levels {
            return Err(Error::DimensionMismatch {
                expected: levels * levels,
                actual: matrix.len(),
            });
        }
        if matrix.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("GLCM entries must be >= 0".into()));
        }
        Ok(Glcm {
            levels,
            offset,
            matrix,
        })
    }
}

/// Counts pairs `(p, p + offset)` with `offset = (row_shift, col_shift)`.
/// Both orders are counted, so the result is symmetric.
pub fn glcm(grid: &Grid<u8>, levels: usize, offset: (i32, i32)) -> Result<Glcm> {
    if offset == (0, 0) {
        return Err(Error::InvalidParameter("GLCM offset must be nonzero".into()));
    }
    let (dr, dc) = (offset.0 as isize, offset.1 as isize);
    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            let Some(a) = grid.get(r, c) else { continue };
            let Some(b) = grid.get_signed(r as isize + dr, c as isize + dc) else {
                continue;
            };
            let (a, b) = (a as usize, b as usize);
            if a >= levels || b >= levels {
                return Err(Error::InvalidParameter(format!(
                    "grid level {} exceeds {levels} levels",
                    a.max(b)
                )));
            }
            counts[a * levels + b] += 1;
            counts[b * levels + a] += 1;
            total += 2;
        }
    }
    if total == 0 {
        return Err(Error::EmptyPairs(offset.0, offset.1));
    }
    let matrix = counts.iter().map(|&n| n as f64 / total as f64).collect();
    Ok(Glcm {
        levels,
        offset,
        matrix,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmFeatures {
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub homogeneity: f64,
    pub entropy: f64,
    pub mean: f64,
    pub std: f64,
}

impl GlcmFeatures {
    pub const NAMES: [&'static str; 7] = [
        "contrast",
        "correlation",
        "energy",
        "homogeneity",
        "entropy",
        "mean",
        "std",
    ];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.contrast,
            self.correlation,
            self.energy,
            self.homogeneity,
            self.entropy,
            self.mean,
            self.std,
        ]
    }
}

/// The seven statistics over a symmetric normalized GLCM. Correlation is 0
/// when the marginal variance is 0.
pub fn glcm_features(g: &Glcm) -> GlcmFeatures {
    let l = g.levels();
    let marginal: Vec<f64> = (0..l).map(|i| (0..l).map(|j| g.get(i, j)).sum()).collect();
    let mean: f64 = marginal.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    let var: f64 = marginal
        .iter()
        .enumerate()
        .map(|(i, p)| (i as f64 - mean).powi(2) * p)
        .sum();

    let mut f = GlcmFeatures {
        contrast: 0.0,
        correlation: 0.0,
        energy: 0.0,
        homogeneity: 0.0,
        entropy: 0.0,
        mean,
        std: var.sqrt(),
    };
    let mut cov = 0.0;
    for i in 0..l {
        for j in 0..l {
            let p = g.get(i, j);
            let d = i as f64 - j as f64;
            f.contrast += d * d * p;
            cov += (i as f64 - mean) * (j as f64 - mean) * p;
            f.energy += p * p;
            f.homogeneity += p / (1.0 + d.abs());
            if p > 0.0 {
                f.entropy -= p * p.log2();
            }
        }
    }
    f.correlation = if var > 0.0 { cov / var } else { 0.0 };
    f
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbpParams {
    pub points: usize,
    pub radius: f64,
}

impl LbpParams {
    pub fn new(points: usize, radius: f64) -> Result<Self> {
        if !(4..=64).contains(&points) || !(radius.is_finite() && radius >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "LBP needs 4 <= P <= 64 and R >= 1, got P={points}, R={radius}"
            )));
        }
        Ok(LbpParams { points, radius })
    }

    pub fn n_labels(&self) -> usize {
        self.points + 2
    }
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams {
            points: 8,
            radius: 1.0,
        }
    }
}

/// One interpolated neighbour: lattice offsets with bilinear weights.
type Sample = Vec<(isize, isize, f64)>;

fn snap(v: f64) -> f64 {
    let s = (v * 1e12).round() / 1e12;
    if (s - s.round()).abs() < 1e-9 {
        s.round()
    } else {
        s
    }
}

/// Lattice points and weights along one axis for a signed offset. The weights
/// depend only on `|d|`, so mirrored offsets produce identical values.
fn axis_weights(d: f64) -> Vec<(isize, f64)> {
    if d == d.round() {
        return vec![(d as isize, 1.0)];
    }
    let a = d.abs();
    let frac = a - a.floor();
    let near = a.floor() as isize;
    let sign = if d < 0.0 { -1 } else { 1 };
    vec![(sign * near, 1.0 - frac), (sign * (near + 1), frac)]
}

fn circle_samples(params: &LbpParams) -> Vec<Sample> {
    let p = params.points;
    (0..p)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / p as f64;
            let dy = snap(-params.radius * theta.sin());
            let dx = snap(params.radius * theta.cos());
            let mut terms = Vec::with_capacity(4);
            for (oy, wy) in axis_weights(dy) {
                for &(ox, wx) in &axis_weights(dx) {
                    terms.push((oy, ox, wy * wx));
                }
            }
            terms
        })
        .collect()
}

/// Signed neighbour-minus-centre differences for every interpolated sample, or
/// `None` when any contributing pixel leaves the image or region.
struct Neighbourhood {
    samples: Vec<Sample>,
    reach: isize,
}

impl Neighbourhood {
    fn new(params: &LbpParams) -> Self {
        let samples = circle_samples(params);
        let reach = samples
            .iter()
            .flatten()
            .map(|&(dy, dx, _)| dy.abs().max(dx.abs()))
            .max()
            .unwrap_or(0);
        Neighbourhood { samples, reach }
    }

    fn inside(&self, region: &Mask, r: usize, c: usize) -> bool {
        let (r, c) = (r as isize, c as isize);
        for dy in -self.reach..=self.reach {
            for dx in -self.reach..=self.reach {
                if !region.contains(r + dy, c + dx) {
                    return false;
                }
            }
        }
        true
    }

    fn differences(&self, image: &GrayImage, r: usize, c: usize, out: &mut Vec<f64>) {
        let centre = image.get(r, c);
        out.clear();
        let mut terms: Vec<(f64, f64)> = Vec::with_capacity(4);
        for s in &self.samples {
            terms.clear();
            terms.extend(s.iter().map(|&(dy, dx, w)| {
                let v = image.get((r as isize + dy) as usize, (c as isize + dx) as usize);
                (w, v - centre)
            }));
            // canonical order makes the sum independent of how the
            // neighbourhood is oriented
            terms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            out.push(terms.iter().map(|(w, d)| w * d).sum());
        }
    }
}

fn riu2_label(diffs: &[f64]) -> u8 {
    let p = diffs.len();
    let bits: Vec<bool> = diffs.iter().map(|&d| d >= 0.0).collect();
    let transitions = (0..p).filter(|&i| bits[i] != bits[(i + 1) % p]).count();
    if transitions <= 2 {
        bits.iter().filter(|&&b| b).count() as u8
    } else {
        (p + 1) as u8
    }
}

fn population_variance(diffs: &[f64]) -> f64 {
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n
}

fn neighbourhood_map<T: Copy>(
    image: &GrayImage,
    region: &Mask,
    params: &LbpParams,
    f: impl Fn(&[f64]) -> T,
) -> Result<Grid<T>> {
    check_mask(image, region)?;
    let nb = Neighbourhood::new(params);
    let mut diffs = Vec::with_capacity(params.points);
    let mut cells = Vec::with_capacity(image.pixels().len());
    let mut any = false;
    for r in 0..image.height() {
        for c in 0..image.width() {
            if nb.inside(region, r, c) {
                nb.differences(image, r, c, &mut diffs);
                cells.push(Some(f(&diffs)));
                any = true;
            } else {
                cells.push(None);
            }
        }
    }
    if !any {
        return Err(Error::EmptyRegion("LBP interior"));
    }
    Grid::new(image.width(), image.height(), cells)
}

/// Rotation-invariant uniform LBP labels in `0..=P+1` over the region interior.
pub fn lbp_riu2(image: &GrayImage, region: &Mask, params: &LbpParams) -> Result<Grid<u8>> {
    neighbourhood_map(image, region, params, riu2_label)
}

/// Variance of the `P` interpolated neighbours around each interior pixel.
pub fn local_variance(image: &GrayImage, region: &Mask, params: &LbpParams) -> Result<Grid<f64>> {
    neighbourhood_map(image, region, params, population_variance)
}

/// Labels and variances in one pass over the neighbourhoods.
pub fn lbp_and_variance(
    image: &GrayImage,
    region: &Mask,
    params: &LbpParams,
) -> Result<(Grid<u8>, Grid<f64>)> {
    let both = neighbourhood_map(image, region, params, |d| (riu2_label(d), population_variance(d)))?;
    let labels = both.cells.iter().map(|c| c.map(|x| x.0)).collect();
    let vars = both.cells.iter().map(|c| c.map(|x| x.1)).collect();
    Ok((
        Grid::new(both.width, both.height, labels)?,
        Grid::new(both.width, both.height, vars)?,
    ))
}

/// Count of each riu2 label over the valid cells.
pub fn lbp_histogram(labels: &Grid<u8>, params: &LbpParams) -> Vec<usize> {
    let mut h = vec![0; params.n_labels()];
    for l in labels.valid() {
        h[l as usize] += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbpvHistogram {
    pub bins: Vec<f64>,
    pub normalized: bool,
    /// Set when the total variance weight is zero (all bins are then zero).
    pub degenerate: bool,
}

/// Variance-weighted label histogram, normalized to sum 1.
pub fn lbpv_histogram(labels: &Grid<u8>, vars: &Grid<f64>, params: &LbpParams) -> Result<LbpvHistogram> {
    if labels.width() != vars.width() || labels.height() != vars.height() {
        return Err(Error::DimensionMismatch {
            expected: labels.width() * labels.height(),
            actual: vars.width() * vars.height(),
        });
    }
    let mut bins = vec![0.0; params.n_labels()];
    for (l, v) in labels.cells().iter().zip(vars.cells()) {
        match (l, v) {
            (Some(l), Some(v)) => {
                let k = *l as usize;
                if k >= bins.len() {
                    return Err(Error::InvalidParameter(format!("LBP label {k} out of range")));
                }
                bins[k] += v;
            }
            (None, None) => {}
            _ => {
                return Err(Error::DimensionMismatch {
                    expected: labels.valid_count(),
                    actual: vars.valid_count(),
                })
            }
        }
    }
    let total: f64 = bins.iter().sum();
    if total > 0.0 {
        bins.iter_mut().for_each(|b| *b /= total);
        Ok(LbpvHistogram {
            bins,
            normalized: true,
            degenerate: false,
        })
    } else {
        Ok(LbpvHistogram {
            bins: vec![0.0; params.n_labels()],
            normalized: true,
            degenerate: true,
        })
    }
}
