//! RNFL thickness profile, thickness histogram and extrema.

use crate::data::SegmentedScan;
use crate::error::{Error, Result};

/// Per-column RNFL thickness in `axial_scale × pixels` units.
#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessProfile {
    values: Vec<f64>,
    unit_note: String,
}

impl ThicknessProfile {
    pub fn new(values: Vec<f64>, unit_note: impl Into<String>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "thickness {v} must be finite and >= 0"
            )));
        }
        Ok(ThicknessProfile {
            values,
            unit_note: unit_note.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit_note(&self) -> &str {
        &self.unit_note
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Strictly increasing bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessEdges(Vec<f64>);

impl ThicknessEdges {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidParameter("need at least two edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "edges must be finite and strictly increasing: {edges:?}"
            )));
        }
        Ok(ThicknessEdges(edges))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn n_bins(&self) -> usize {
        self.0.len() - 1
    }
}

impl Default for ThicknessEdges {
    fn default() -> Self {
        ThicknessEdges(vec![0.0, 15.0, 30.0, 45.0, 100.0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThicknessHistogram {
    pub counts: Vec<f64>,
    /// Values above the last edge, folded into the last bin.
    pub clipped: usize,
    /// Values below the first edge; these are not counted.
    pub below: usize,
}

pub fn compute_thickness_profile(scan: &SegmentedScan) -> ThicknessProfile {
    let scale = scan.axial_scale();
    let values = scan
        .rnfl_upper()
        .iter()
        .zip(scan.rnfl_lower())
        .map(|(&u, &l)| (l - u) as f64 * scale)
        .collect();
    let unit_note = if scale == 1.0 {
        "pixels".to_string()
    } else {
        format!("pixels x {scale}")
    };
    ThicknessProfile { values, unit_note }
}

/// Counts values per bin. Bins are `[e_p, e_{p+1})` except the last, which is
/// closed and also absorbs anything above the final edge.
pub fn thickness_histogram(
    profile: &ThicknessProfile,
    edges: &ThicknessEdges,
) -> Result<ThicknessHistogram> {
    if profile.is_empty() {
        return Err(Error::EmptyInput("thickness profile"));
    }
    let e = edges.as_slice();
    let last = edges.n_bins() - 1;
    let mut counts = vec![0.0; edges.n_bins()];
    let mut clipped = 0;
    let mut below = 0;
    for &t in profile.values() {
        if t < e[0] {
            below += 1;
            continue;
        }
        if t > e[last + 1] {
            clipped += 1;
            counts[last] += 1.0;
            continue;
        }
        // first edge strictly greater than t, minus one
        let bin = e.partition_point(|&edge| edge <= t) - 1;
        counts[bin.min(last)] += 1.0;
    }
    if clipped > 0 {
        log::debug!("{clipped} thickness values above {} folded into last bin", e[last + 1]);
    }
    Ok(ThicknessHistogram {
        counts,
        clipped,
        below,
    })
}

/// `(min, max)` of the profile.
pub fn thickness_extrema(profile: &ThicknessProfile) -> Result<(f64, f64)> {
    if profile.is_empty() {
        return Err(Error::EmptyInput("thickness profile"));
    }
    Ok(profile
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        }))
}
