//! Brute-force reference implementations used by the integration and
//! acceptance tests. Each follows the textbook definition directly and shares
//! no code with the library.
#![allow(dead_code)]

use glaucoct::data::{Dataset, GrayImage, Label, Mask};
use glaucoct::synth::{generate, SynthParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    let px = (0..w * h).map(|_| rng.random_range(0.0..255.0)).collect();
    GrayImage::new(w, h, px).unwrap()
}

pub fn random_int_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    let px = (0..w * h).map(|_| rng.random_range(0..256u32) as f64).collect();
    GrayImage::new(w, h, px).unwrap()
}

/// Mask with roughly `keep` of the pixels set, always keeping a central block.
pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, keep: f64) -> Mask {
    let cells: Vec<bool> = (0..w * h)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            (r > h / 4 && r < 3 * h / 4 && c > w / 4 && c < 3 * w / 4) || rng.random_bool(keep)
        })
        .collect();
    Mask::new(w, h, cells).unwrap()
}

// ---------------------------------------------------------------------------
// GLCM

/// Symmetric normalized co-occurrence matrix by direct pair enumeration.
pub fn glcm_oracle(img: &GrayImage, mask: &Mask, levels: usize, offset: (i32, i32)) -> Vec<f64> {
    let q = |r: usize, c: usize| -> usize {
        let v = (img.get(r, c) * levels as f64 / 256.0).floor() as usize;
        v.min(levels - 1)
    };
    let mut m = vec![0.0; levels * levels];
    let mut total = 0.0;
    for r in 0..img.height() {
        for c in 0..img.width() {
            let r2 = r as i64 + offset.0 as i64;
            let c2 = c as i64 + offset.1 as i64;
            if r2 < 0 || c2 < 0 || r2 >= img.height() as i64 || c2 >= img.width() as i64 {
                continue;
            }
            let (r2, c2) = (r2 as usize, c2 as usize);
            if !mask.get(r, c) || !mask.get(r2, c2) {
                continue;
            }
            let (a, b) = (q(r, c), q(r2, c2));
            m[a * levels + b] += 1.0;
            m[b * levels + a] += 1.0;
            total += 2.0;
        }
    }
    m.iter().map(|x| x / total).collect()
}

/// contrast, correlation, energy, homogeneity, entropy, mean, std
pub fn glcm_features_oracle(m: &[f64], levels: usize) -> [f64; 7] {
    let p = |i: usize, j: usize| m[i * levels + j];
    let (mut mx, mut my) = (0.0, 0.0);
    for i in 0..levels {
        for j in 0..levels {
            mx += i as f64 * p(i, j);
            my += j as f64 * p(i, j);
        }
    }
    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
    let (mut contrast, mut energy, mut homog, mut entropy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..levels {
        for j in 0..levels {
            let v = p(i, j);
            let (fi, fj) = (i as f64, j as f64);
            vx += (fi - mx) * (fi - mx) * v;
            vy += (fj - my) * (fj - my) * v;
            cov += (fi - mx) * (fj - my) * v;
            contrast += (fi - fj) * (fi - fj) * v;
            energy += v * v;
            homog += v / (1.0 + (fi - fj).abs());
            if v > 0.0 {
                entropy -= v * v.log2();
            }
        }
    }
    let corr = if vx > 0.0 && vy > 0.0 { cov / (vx.sqrt() * vy.sqrt()) } else { 0.0 };
    [contrast, corr, energy, homog, entropy, mx, vx.sqrt()]
}

// ---------------------------------------------------------------------------
// LBP / VAR

/// Circle offset rounded to twelve decimals, the sampling convention of the
/// operator (keeps mirrored neighbours at identical distances).
fn circle_offset(v: f64) -> f64 {
    let s = (v * 1e12).round() / 1e12;
    if (s - s.round()).abs() < 1e-9 {
        s.round()
    } else {
        s
    }
}

fn bilinear(img: &GrayImage, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as usize, x0 as usize);
    let at = |dy: usize, dx: usize, w: f64| if w == 0.0 { 0.0 } else { w * img.get(y0 + dy, x0 + dx) };
    at(0, 0, (1.0 - fy) * (1.0 - fx)) + at(0, 1, (1.0 - fy) * fx) + at(1, 0, fy * (1.0 - fx)) + at(1, 1, fy * fx)
}

/// riu2 labels and VAR for every pixel of a full-image region whose
/// neighbourhood square stays inside the image.
pub fn lbp_oracle(img: &GrayImage, points: usize, radius: f64) -> (Vec<Option<u8>>, Vec<Option<f64>>) {
    let reach = (radius - 1e-9).ceil() as usize;
    let offsets: Vec<(f64, f64)> = (0..points)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
            (circle_offset(-radius * t.sin()), circle_offset(radius * t.cos()))
        })
        .collect();
    let n = img.width() * img.height();
    let (mut labels, mut vars) = (vec![None; n], vec![None; n]);
    for r in reach..img.height().saturating_sub(reach) {
        for c in reach..img.width().saturating_sub(reach) {
            let g: Vec<f64> = offsets
                .iter()
                .map(|(dy, dx)| bilinear(img, r as f64 + dy, c as f64 + dx))
                .collect();
            let center = img.get(r, c);
            let bits: Vec<u8> = g.iter().map(|&v| (v - center >= 0.0) as u8).collect();
            let transitions = (0..points).filter(|&k| bits[k] != bits[(k + 1) % points]).count();
            let ones = bits.iter().map(|&b| b as usize).sum::<usize>();
            let label = if transitions <= 2 { ones } else { points + 1 };
            let u = g.iter().sum::<f64>() / points as f64;
            let var = g.iter().map(|v| (v - u) * (v - u)).sum::<f64>() / points as f64;
            labels[r * img.width() + c] = Some(label as u8);
            vars[r * img.width() + c] = Some(var);
        }
    }
    (labels, vars)
}

pub fn lbpv_oracle(labels: &[Option<u8>], vars: &[Option<f64>], n_bins: usize) -> Vec<f64> {
    let mut bins = vec![0.0; n_bins];
    for (l, v) in labels.iter().zip(vars) {
        if let (Some(l), Some(v)) = (l, v) {
            bins[*l as usize] += v;
        }
    }
    let total: f64 = bins.iter().sum();
    bins.iter().map(|b| b / total).collect()
}

// ---------------------------------------------------------------------------
// Statistics

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Two-sided Student-t tail `P(|T| > |t|)` by integrating the unnormalized
/// density on `[0, inf)` after the map `x = s + u / (1 - u)`.
pub fn t_two_sided_oracle(t: f64, df: f64) -> f64 {
    let g = |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let tail_from = |s: f64| {
        let h = move |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let x = s + u / (1.0 - u);
            g(x) / ((1.0 - u) * (1.0 - u))
        };
        integrate(&h, 0.0, 1.0, 1e-13)
    };
    // split at |t| so the two pieces are integrated separately
    let s = t.abs();
    let head = integrate(&g, 0.0, s, 1e-13);
    let tail = tail_from(s);
    tail / (head + tail)
}

pub fn welch_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let m = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let v = |x: &[f64]| {
        let mu = m(x);
        x.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (v(a) / na, v(b) / nb);
    let t = (m(a) - m(b)) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    (t, t_two_sided_oracle(t, df))
}

pub fn pearson_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|x| x * x).sum();
    let r = (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt());
    let t = r * ((n - 2.0) / (1.0 - r * r)).sqrt();
    (r, t_two_sided_oracle(t, n - 2.0))
}

/// U of sample `a` when `a` occupies the pooled ranks in `mask` (bit i set
/// means rank i belongs to `a`).
fn u_of_mask(mask: u32, n: usize) -> usize {
    let mut u = 0;
    for i in 0..n {
        if mask >> i & 1 == 1 {
            u += (0..i).filter(|&j| mask >> j & 1 == 0).count();
        }
    }
    u
}

/// Exact null distribution of U by enumerating every rank assignment.
pub fn u_counts_oracle(na: usize, nb: usize) -> Vec<u64> {
    let n = na + nb;
    let mut counts = vec![0u64; na * nb + 1];
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == na {
            counts[u_of_mask(mask, n)] += 1;
        }
    }
    counts
}

/// The samples realizing rank assignment `mask`, plus the oracle p-value.
pub fn mw_case(mask: u32, na: usize, nb: usize, counts: &[u64]) -> (Vec<f64>, Vec<f64>, usize, f64) {
    let n = na + nb;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for i in 0..n {
        if mask >> i & 1 == 1 { a.push(i as f64 + 0.5) } else { b.push(i as f64 + 0.5) }
    }
    let u = u_of_mask(mask, n);
    let total: u64 = counts.iter().sum();
    let le: u64 = counts[..=u].iter().sum();
    let ge: u64 = counts[u..].iter().sum();
    let p = (2.0 * le.min(ge) as f64 / total as f64).min(1.0);
    (a, b, u, p)
}

// ---------------------------------------------------------------------------
// Classification

/// `(#correct pairs + 0.5 #tied pairs) / (n_pos n_neg)`.
pub fn auc_pairs_oracle(scores: &[f64], labels: &[Label]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == Label::Glaucoma && labels[j] == Label::Normal {
                den += 1.0;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

// ---------------------------------------------------------------------------
// Data

/// Small images so that pipeline tests stay fast.
pub fn small_params(patients_per_class: usize, seed: u64) -> SynthParams {
    SynthParams {
        patients_per_class,
        width: 128,
        height: 96,
        normal_thickness_mean: 22.0,
        normal_thickness_std: 3.0,
        glaucoma_thickness_mean: 12.0,
        glaucoma_thickness_std: 3.0,
        seed,
        ..Default::default()
    }
}

pub fn small_dataset(patients_per_class: usize, seed: u64) -> Dataset {
    generate(&small_params(patients_per_class, seed)).unwrap()
}
