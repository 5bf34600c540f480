//! Directional Hurst exponents by rescaled-range analysis.
//!
//! A direction becomes a set of parallel sampling lines across the region.
//! Angles are in degrees, measured from the +column axis towards +row (image
//! rows grow downwards), so 0° walks along rows and 90° walks down columns.
//! Lines advance one pixel along their dominant axis and interpolate linearly
//! along the other.

use crate::data::{GrayImage, Mask};
use crate::error::{Error, Result};

/// Shortest in-region run kept as a profile.
pub const MIN_RUN: usize = 32;
/// Smallest rescaled-range window.
pub const MIN_WINDOW: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet(Vec<f64>);

impl DirectionSet {
    pub fn new(angles_deg: Vec<f64>) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(Error::InvalidParameter("no Hurst directions given".into()));
        }
        for (i, a) in angles_deg.iter().enumerate() {
            if !(a.is_finite() && (0.0..180.0).contains(a)) {
                return Err(Error::InvalidParameter(format!("angle {a} outside [0, 180)")));
            }
            if angles_deg[..i].contains(a) {
                return Err(Error::InvalidParameter(format!("duplicate angle {a}")));
            }
        }
        Ok(DirectionSet(angles_deg))
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }
}

impl Default for DirectionSet {
    fn default() -> Self {
        DirectionSet(vec![0.0, 30.0, 45.0, 60.0, 90.0])
    }
}

fn snap(v: f64) -> f64 {
    if (v - v.round()).abs() < 1e-9 {
        v.round()
    } else {
        v
    }
}

/// Samples one point; `major` is the integer coordinate along the line's
/// dominant axis, `minor` the interpolated one.
fn sample(image: &GrayImage, region: &Mask, major: usize, minor: f64, rows_major: bool) -> Option<f64> {
    let limit = if rows_major { image.width() } else { image.height() };
    if minor < 0.0 || minor > (limit - 1) as f64 {
        return None;
    }
    let lo = minor.floor() as usize;
    let frac = minor - lo as f64;
    let at = |m: usize| -> Option<f64> {
        let (r, c) = if rows_major { (major, m) } else { (m, major) };
        region.get(r, c).then(|| image.get(r, c))
    };
    let a = at(lo)?;
    if frac == 0.0 {
        return Some(a);
    }
    let b = at(lo + 1)?;
    Some(a + frac * (b - a))
}

/// In-region runs of length >= [`MIN_RUN`] along parallel lines at `angle_deg`.
pub fn directional_profiles(image: &GrayImage, region: &Mask, angle_deg: f64) -> Result<Vec<Vec<f64>>> {
    if !region.matches(image) {
        return Err(Error::DimensionMismatch {
            expected: image.width() * image.height(),
            actual: region.width() * region.height(),
        });
    }
    if region.count() == 0 {
        return Err(Error::EmptyRegion("fractal region"));
    }
    let theta = angle_deg.to_radians();
    let (s, c) = (theta.sin(), theta.cos());
    // shallow lines step along columns, steep ones along rows
    let rows_major = s.abs() > c.abs();
    let (n_major, n_minor) = if rows_major {
        (image.height(), image.width())
    } else {
        (image.width(), image.height())
    };
    let slope = snap(if rows_major { c / s } else { s / c });
    // intercepts of every line that touches the image
    let span = slope * (n_major - 1) as f64;
    let first = (-span.max(0.0)).floor();
    let last = ((n_minor - 1) as f64 - span.min(0.0)).ceil();

    let mut out = Vec::new();
    let mut run = Vec::new();
    let mut offset = first;
    while offset <= last {
        for m in 0..n_major {
            let minor = snap(offset + slope * m as f64);
            match sample(image, region, m, minor, rows_major) {
                Some(v) => run.push(v),
                None => flush(&mut run, &mut out),
            }
        }
        flush(&mut run, &mut out);
        offset += 1.0;
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no in-region run of length >= {MIN_RUN} at {angle_deg} degrees"
        )));
    }
    Ok(out)
}

fn flush(run: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
    if run.len() >= MIN_RUN {
        out.push(std::mem::take(run));
    } else {
        run.clear();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HurstEstimate {
    /// Raw least-squares slope, not clamped.
    pub h: f64,
    /// `(window size, mean R/S)` points used in the fit.
    pub points: Vec<(usize, f64)>,
    /// Windows skipped because their standard deviation was zero.
    pub skipped_windows: usize,
    /// `h` fell outside `[0, 1]`.
    pub out_of_range: bool,
}

fn rescaled_range(window: &[f64]) -> Option<f64> {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let mut acc = 0.0;
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let mut ss = 0.0;
    for &x in window {
        let d = x - mean;
        acc += d;
        lo = lo.min(acc);
        hi = hi.max(acc);
        ss += d * d;
    }
    let sd = (ss / n).sqrt();
    (sd > 0.0).then(|| (hi - lo) / sd)
}

/// Pooled R/S Hurst exponent over all sequences on a doubling window ladder
/// starting at [`MIN_WINDOW`].
pub fn hurst_exponent(sequences: &[Vec<f64>]) -> Result<HurstEstimate> {
    let max_len = sequences.iter().map(Vec::len).max().unwrap_or(0);
    if max_len < MIN_RUN {
        return Err(Error::InsufficientData(format!(
            "need a sequence of length >= {MIN_RUN}, longest is {max_len}"
        )));
    }
    let mut points = Vec::new();
    let mut skipped = 0;
    let mut windows_seen = 0;
    let mut n = MIN_WINDOW;
    while n <= max_len {
        let mut sum = 0.0;
        let mut used = 0usize;
        for seq in sequences {
            for w in seq.chunks_exact(n) {
                windows_seen += 1;
                match rescaled_range(w) {
                    Some(rs) => {
                        sum += rs;
                        used += 1;
                    }
                    None => skipped += 1,
                }
            }
        }
        if used > 0 {
            points.push((n, sum / used as f64));
        }
        n *= 2;
    }
    if windows_seen > 0 && skipped == windows_seen {
        return Err(Error::DegenerateSignal("every window has zero variance".into()));
    }
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable window sizes, need 2",
            points.len()
        )));
    }
    let h = ols_slope(
        &points.iter().map(|&(n, _)| (n as f64).ln()).collect::<Vec<_>>(),
        &points.iter().map(|&(_, rs)| rs.ln()).collect::<Vec<_>>(),
    );
    Ok(HurstEstimate {
        h,
        out_of_range: !(0.0..=1.0).contains(&h),
        points,
        skipped_windows: skipped,
    })
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Hurst exponent of the region's profiles at one angle.
pub fn directional_hurst(image: &GrayImage, region: &Mask, angle_deg: f64) -> Result<HurstEstimate> {
    let profiles = directional_profiles(image, region, angle_deg)?;
    let est = hurst_exponent(&profiles)?;
    if est.out_of_range {
        log::debug!("Hurst slope {} at {angle_deg} degrees is outside [0, 1]", est.h);
    }
    Ok(est)
}
