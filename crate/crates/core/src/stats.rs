//! Two-sample tests, normality check and correlation used by feature selection.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest pooled sample size for which Mann-Whitney p-values are enumerated.
pub const MWU_EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// `#{a_i > b_j} + 0.5·#{a_i == b_j}`.
    pub u_a: f64,
    pub u_b: f64,
    pub p: f64,
    pub exact: bool,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Survival function of the asymptotic Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi-theta form converges fast for small x
        let f = -PI * PI / (8.0 * x * x);
        let mut cdf = 0.0;
        for k in 1..=50 {
            let m = (2 * k - 1) as f64;
            let term = (f * m * m).exp();
            cdf += term;
            if term < 1e-18 {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / x * cdf).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sf += sign * term;
            if term < 1e-18 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov-Smirnov test of the z-scored sample against N(0, 1),
/// with the p-value from the asymptotic Kolmogorov distribution.
pub fn ks_normality(values: &[f64]) -> Result<TestResult> {
    let n = values.len();
    if n < 8 {
        return Err(Error::DegenerateSample(format!("KS needs n >= 8, got {n}")));
    }
    let m = mean(values);
    let sd = sample_variance(values).sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample("constant sample".into()));
    }
    let mut z: Vec<f64> = values.iter().map(|v| (v - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &zi)| {
            let f = standard_normal_cdf(zi);
            ((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    Ok(TestResult {
        statistic: d,
        p: kolmogorov_sf(nf.sqrt() * d),
    })
}

/// Two-sided Welch t-test. Both samples constant: p = 1 for equal means and
/// p = 0 otherwise.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs >= 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let va = sample_variance(a) / a.len() as f64;
    let vb = sample_variance(b) / b.len() as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            TestResult { statistic: 0.0, p: 1.0 }
        } else {
            TestResult {
                statistic: (ma - mb).signum() * f64::INFINITY,
                p: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    Ok(TestResult {
        statistic: t,
        p: student_t_two_sided(t, df),
    })
}

/// Number of arrangements giving each `U` value for sample sizes `(m, n)`
/// without ties; index `u` runs over `0..=m*n`.
fn u_distribution(m: usize, n: usize) -> Vec<u64> {
    // f[i][j] is the count polynomial for sizes (i, j)
    let mut prev: Vec<Vec<u64>> = (0..=n).map(|_| vec![1u64]).collect();
    for i in 1..=m {
        let mut cur: Vec<Vec<u64>> = Vec::with_capacity(n + 1);
        cur.push(vec![1u64]);
        for j in 1..=n {
            // a new largest element either belongs to `a` (adds j to U) or `b`
            let mut poly = vec![0u64; i * j + 1];
            for (u, &c) in prev[j].iter().enumerate() {
                poly[u + j] += c;
            }
            for (u, &c) in cur[j - 1].iter().enumerate() {
                poly[u] += c;
            }
            cur.push(poly);
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("Mann-Whitney needs non-empty samples".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut has_ties = false;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let t = (j - i) as f64;
        if j - i > 1 {
            has_ties = true;
            tie_term += t * t * t - t;
        }
        let mid_rank = (i + j + 1) as f64 / 2.0;
        rank_sum_a += mid_rank * pooled[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;

    if n <= MWU_EXACT_MAX_N && !has_ties {
        let dist = u_distribution(na, nb);
        let total: u64 = dist.iter().sum();
        let u = u_a.round() as usize;
        let le: u64 = dist[..=u].iter().sum();
        let ge: u64 = dist[u..].iter().sum();
        let p = (2.0 * le.min(ge) as f64 / total as f64).min(1.0);
        return Ok(MannWhitney {
            u_a,
            u_b,
            p,
            exact: true,
        });
    }

    let (naf, nbf, nf) = (na as f64, nb as f64, n as f64);
    let mu = naf * nbf / 2.0;
    let var = naf * nbf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u_a - mu).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MannWhitney {
        u_a,
        u_b,
        p,
        exact: false,
    })
}

/// Sample Pearson correlation with a two-sided p-value from the t transform.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("Pearson needs n >= 3, got {n}")));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateSample("zero variance in correlation".into()));
    }
    let r = (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0);
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        student_t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(TestResult { statistic: r, p })
}
