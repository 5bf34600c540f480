//! Seeded generator of OCT-like B-scans with RNFL thinning in the glaucoma class.
//!
//! Each scan has a dark vitreous, a bright RNFL band between the two boundaries,
//! a layered outer retina and a dim choroid, all under multiplicative speckle.
//! Patients get their own random stream derived from the master seed and the
//! patient index, so output does not depend on how many threads run.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::data::{Dataset, GrayImage, Label, Mask, ScanRecord, SegmentedScan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub patients_per_class: usize,
    pub scans_per_patient: usize,
    pub width: usize,
    pub height: usize,
    pub normal_thickness_mean: f64,
    pub normal_thickness_std: f64,
    pub glaucoma_thickness_mean: f64,
    pub glaucoma_thickness_std: f64,
    /// Relative amplitude of the double-hump thickness modulation.
    pub tsnit_amplitude: f64,
    /// Standard deviation of the multiplicative speckle factor.
    pub speckle: f64,
    /// Outer-retina layer amplitude lost in the glaucoma class.
    pub texture_contrast_offset: f64,
    pub normal_age_mean: f64,
    pub glaucoma_age_mean: f64,
    pub age_std: f64,
    pub axial_scale: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            patients_per_class: 50,
            scans_per_patient: 2,
            width: 384,
            height: 248,
            normal_thickness_mean: 55.0,
            normal_thickness_std: 8.0,
            glaucoma_thickness_mean: 30.0,
            glaucoma_thickness_std: 8.0,
            tsnit_amplitude: 0.3,
            speckle: 0.25,
            texture_contrast_offset: 12.0,
            normal_age_mean: 55.0,
            glaucoma_age_mean: 65.0,
            age_std: 10.0,
            axial_scale: 1.0,
            seed: 0,
        }
    }
}

const VITREOUS: f64 = 12.0;
const RNFL: f64 = 185.0;
const OUTER_RETINA: f64 = 105.0;
const LAYER_AMPLITUDE: f64 = 40.0;
const CHOROID: f64 = 45.0;

impl SynthParams {
    fn upper_base(&self) -> f64 {
        0.15 * self.height as f64
    }

    fn outer_depth(&self) -> f64 {
        0.3 * self.height as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.width < 64 || self.height < 64 {
            return bad(format!("image size {}x{} below 64x64", self.width, self.height));
        }
        if !(self.normal_thickness_mean > 0.0 && self.glaucoma_thickness_mean > 0.0) {
            return bad("thickness means must be > 0".into());
        }
        if self.normal_thickness_std < 0.0 || self.glaucoma_thickness_std < 0.0 || self.age_std < 0.0 {
            return bad("standard deviations must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.tsnit_amplitude) || !(0.0..1.0).contains(&self.speckle) {
            return bad("tsnit_amplitude and speckle must be in [0, 1)".into());
        }
        if self.texture_contrast_offset.abs() > LAYER_AMPLITUDE {
            return bad(format!("texture_contrast_offset beyond ±{LAYER_AMPLITUDE}"));
        }
        if self.patients_per_class == 0 || self.scans_per_patient == 0 || !(self.axial_scale > 0.0) {
            return bad("patients_per_class, scans_per_patient and axial_scale must be positive".into());
        }
        let worst = [
            self.normal_thickness_mean + 4.0 * self.normal_thickness_std,
            self.glaucoma_thickness_mean + 4.0 * self.glaucoma_thickness_std,
        ]
        .into_iter()
        .fold(0.0, f64::max)
            * (1.0 + self.tsnit_amplitude)
            + 12.0;
        // boundary rows are pixels; thickness in scaled units maps back through axial_scale
        let room = self.height as f64 - 2.0 - self.upper_base() - 0.04 * self.height as f64 - 4.0;
        if worst / self.axial_scale > room {
            return bad(format!(
                "thickness up to {worst:.1} does not fit in image height {}",
                self.height
            ));
        }
        Ok(())
    }
}

/// Sum of a few random low-frequency sinusoids with the given total amplitude.
fn smooth_wiggle(rng: &mut ChaCha8Rng, width: usize, amplitude: f64) -> Vec<f64> {
    let comps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(1.0..6.0),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.3..1.0),
            )
        })
        .collect();
    let norm: f64 = comps.iter().map(|c| c.2).sum();
    (0..width)
        .map(|j| {
            let x = j as f64 / width as f64;
            comps
                .iter()
                .map(|(f, ph, a)| a * (2.0 * PI * f * x + ph).sin())
                .sum::<f64>()
                * amplitude
                / norm
        })
        .collect()
}

fn gen_scan(p: &SynthParams, label: Label, patient_mean: f64, rng: &mut ChaCha8Rng) -> Result<SegmentedScan> {
    let (w, h) = (p.width, p.height);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    let phase = rng.random_range(0.0..2.0 * PI);
    let upper_wiggle = smooth_wiggle(rng, w, 2.0);
    let upper: Vec<usize> = (0..w)
        .map(|j| {
            let x = 2.0 * PI * j as f64 / w as f64;
            let v = p.upper_base() + 0.04 * h as f64 * (x + phase).sin() + upper_wiggle[j];
            v.round().max(1.0) as usize
        })
        .collect();

    let scan_mean = (patient_mean + 2.0 * noise.sample(rng)).max(1.0);
    let thick_wiggle = smooth_wiggle(rng, w, 3.0);
    let lower: Vec<usize> = (0..w)
        .map(|j| {
            let x = 4.0 * PI * j as f64 / w as f64;
            let t = scan_mean * (1.0 - p.tsnit_amplitude * x.cos())
                + thick_wiggle[j]
                + 1.5 * noise.sample(rng);
            let px = (t.max(0.0) / p.axial_scale).round() as usize;
            (upper[j] + px).min(h - 2)
        })
        .collect();

    let outer = p.outer_depth();
    let bottom: Vec<usize> = lower
        .iter()
        .map(|&l| ((l as f64 + outer).round() as usize).min(h - 1))
        .collect();
    let amplitude = match label {
        Label::Normal => LAYER_AMPLITUDE,
        Label::Glaucoma => LAYER_AMPLITUDE - p.texture_contrast_offset,
    };
    let period = rng.random_range(9.0..13.0);

    let mut pixels = Vec::with_capacity(w * h);
    for r in 0..h {
        for j in 0..w {
            let base = if r < upper[j] {
                VITREOUS
            } else if r <= lower[j] {
                RNFL
            } else if r <= bottom[j] {
                let depth = (r - lower[j]) as f64;
                OUTER_RETINA + amplitude * (2.0 * PI * depth / period).sin()
            } else {
                CHOROID
            };
            let v = base * (1.0 + p.speckle * noise.sample(rng));
            pixels.push(v.clamp(0.0, 255.0).round());
        }
    }
    let image = GrayImage::new(w, h, pixels)?;
    let mask = Mask::from_fn(w, h, |r, j| r >= upper[j] && r <= bottom[j]);
    SegmentedScan::new(image, upper, lower, mask, p.axial_scale)
}

fn gen_patient(p: &SynthParams, index: usize, label: Label) -> Result<Vec<ScanRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(index as u64 + 1);
    let (mean, std, age_mean) = match label {
        Label::Normal => (p.normal_thickness_mean, p.normal_thickness_std, p.normal_age_mean),
        Label::Glaucoma => (p.glaucoma_thickness_mean, p.glaucoma_thickness_std, p.glaucoma_age_mean),
    };
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let patient_mean = (mean + std * noise.sample(&mut rng)).max(1.0);
    let age = (age_mean + p.age_std * noise.sample(&mut rng)).clamp(40.0, 90.0).round();
    let gender = rng.random_range(0..2u8);
    let patient_id = format!("p{index:03}");
    (0..p.scans_per_patient)
        .map(|k| {
            Ok(ScanRecord {
                scan_id: format!("{patient_id}_s{k}"),
                patient_id: patient_id.clone(),
                label,
                age,
                gender,
                scan: gen_scan(p, label, patient_mean, &mut rng)?,
            })
        })
        .collect()
}

/// Normal patients come first (`p000..`), then glaucoma patients.
pub fn generate(params: &SynthParams) -> Result<Dataset> {
    params.validate()?;
    let n = params.patients_per_class;
    let patients: Vec<Vec<ScanRecord>> = (0..2 * n)
        .into_par_iter()
        .map(|i| gen_patient(params, i, if i < n { Label::Normal } else { Label::Glaucoma }))
        .collect::<Result<_>>()?;
    Dataset::new(patients.into_iter().flatten().collect())
}
