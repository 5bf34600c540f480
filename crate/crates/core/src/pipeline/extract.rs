use rayon::prelude::*;

use crate::data::{Dataset, FeatureMatrix, ScanRecord};
use crate::error::{Error, Result};
use crate::fractal::{directional_hurst, DirectionSet};
use crate::structural::{compute_thickness_profile, thickness_extrema, thickness_histogram, ThicknessEdges};
use crate::texture::{glcm, glcm_features, lbp_and_variance, lbpv_histogram, quantize, GlcmFeatures, LbpParams};

/// GLCM offsets as `(row shift, col shift)`.
pub const GLCM_OFFSETS: [(i32, i32); 2] = [(-2, 0), (-2, 2)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Thickness,
    Glcm,
    Lbpv,
    Hurst,
    Demographic,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Thickness,
        Family::Glcm,
        Family::Lbpv,
        Family::Hurst,
        Family::Demographic,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            Family::Thickness => "thick",
            Family::Glcm => "glcm",
            Family::Lbpv => "lbpv",
            Family::Hurst => "hurst",
            Family::Demographic => "demo",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.prefix() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorConfig {
    pub families: Vec<Family>,
    pub thickness_edges: ThicknessEdges,
    /// Emit thickness bins as proportions of the profile length instead of counts.
    pub thickness_proportions: bool,
    pub glcm_levels: usize,
    /// The first pair gets plain `lbpv.b<k>` names, later ones a `p<P>r<R>` suffix.
    pub lbp: Vec<LbpParams>,
    pub hurst_angles: DirectionSet,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            families: Family::ALL.to_vec(),
            thickness_edges: ThicknessEdges::default(),
            thickness_proportions: false,
            glcm_levels: 8,
            lbp: vec![LbpParams::default()],
            hurst_angles: DirectionSet::default(),
        }
    }
}

impl DescriptorConfig {
    fn has(&self, f: Family) -> bool {
        self.families.contains(&f)
    }
}

fn fmt_num(x: f64) -> String {
    x.to_string().replace('.', "_")
}

/// Column names produced by [`extract_all`] for this configuration, in order.
pub fn feature_names(config: &DescriptorConfig) -> Vec<String> {
    let mut names = Vec::new();
    if config.has(Family::Thickness) {
        names.extend((1..=config.thickness_edges.n_bins()).map(|p| format!("thick.h{p}")));
        names.push("thick.min".into());
        names.push("thick.max".into());
    }
    if config.has(Family::Glcm) {
        for o in 1..=GLCM_OFFSETS.len() {
            names.extend(GlcmFeatures::NAMES.iter().map(|s| format!("glcm.{s}.o{o}")));
        }
    }
    if config.has(Family::Lbpv) {
        for (i, p) in config.lbp.iter().enumerate() {
            let suffix = if i == 0 {
                String::new()
            } else {
                format!(".p{}r{}", p.points, fmt_num(p.radius))
            };
            names.extend((0..p.n_labels()).map(|k| format!("lbpv.b{k}{suffix}")));
        }
    }
    if config.has(Family::Hurst) {
        names.extend(config.hurst_angles.angles().iter().map(|a| format!("hurst.a{}", fmt_num(*a))));
    }
    if config.has(Family::Demographic) {
        names.push("demo.age".into());
        names.push("demo.gender".into());
    }
    names
}

/// One feature row for a single scan, in [`feature_names`] order.
pub fn extract_scan(record: &ScanRecord, config: &DescriptorConfig) -> Result<Vec<f64>> {
    let scan = &record.scan;
    let (image, region) = (scan.image(), scan.retina_mask());
    let mut row = Vec::new();
    if config.has(Family::Thickness) {
        let profile = compute_thickness_profile(scan);
        let hist = thickness_histogram(&profile, &config.thickness_edges)?;
        if hist.clipped > 0 {
            log::debug!("{}: {} thickness values clipped into the last bin", record.scan_id, hist.clipped);
        }
        let n = profile.len() as f64;
        row.extend(
            hist.counts
                .iter()
                .map(|c| if config.thickness_proportions { c / n } else { *c }),
        );
        let (lo, hi) = thickness_extrema(&profile)?;
        row.push(lo);
        row.push(hi);
    }
    if config.has(Family::Glcm) {
        let grid = quantize(image, region, config.glcm_levels)?;
        for offset in GLCM_OFFSETS {
            let g = glcm(&grid, config.glcm_levels, offset)?;
            row.extend(glcm_features(&g).to_array());
        }
    }
    if config.has(Family::Lbpv) {
        for params in &config.lbp {
            let (labels, vars) = lbp_and_variance(image, region, params)?;
            let hist = lbpv_histogram(&labels, &vars, params)?;
            if hist.degenerate {
                log::warn!("{}: LBPV total variance is zero", record.scan_id);
            }
            row.extend(hist.bins);
        }
    }
    if config.has(Family::Hurst) {
        for &angle in config.hurst_angles.angles() {
            let est = directional_hurst(image, region, angle)?;
            if est.out_of_range {
                log::debug!("{}: Hurst at {angle} deg is {} (outside [0, 1])", record.scan_id, est.h);
            }
            row.push(est.h);
        }
    }
    if config.has(Family::Demographic) {
        row.push(record.age);
        row.push(record.gender as f64);
    }
    Ok(row)
}

/// Descriptor matrix with one row per scan, in dataset order.
pub fn extract_all(dataset: &Dataset, config: &DescriptorConfig) -> Result<FeatureMatrix> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let rows: Vec<Vec<f64>> = dataset
        .records()
        .par_iter()
        .map(|r| extract_scan(r, config).map_err(|e| e.in_scan(&r.scan_id)))
        .collect::<Result<_>>()?;
    let ids = dataset.records().iter().map(|r| r.scan_id.clone()).collect();
    FeatureMatrix::from_rows(ids, feature_names(config), rows)
}
