mod common;

use common::*;
use glaucoct::data::{FeatureMatrix, Label};
use glaucoct::selection::{select_features, SelectionConfig, TestUsed};
use glaucoct::stats::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal_sample(r: &mut impl Rng, n: usize, mu: f64, sd: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(r);
            mu + sd * z
        })
        .collect()
}

#[test]
fn exact_mann_whitney_matches_enumeration() {
    let mut cases = 0;
    for n in 2..=10usize {
        for na in 1..n {
            let nb = n - na;
            let counts = u_counts_oracle(na, nb);
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != na {
                    continue;
                }
                let (a, b, u, p) = mw_case(mask, na, nb, &counts);
                let got = mann_whitney_u(&a, &b).unwrap();
                assert!(got.exact);
                assert_eq!(got.u_a, u as f64);
                assert_eq!(got.p, p, "na={na} nb={nb} mask={mask:b}");
                cases += 1;
            }
        }
    }
    assert!(cases > 1000);
}

#[test]
fn mann_whitney_small_example() {
    let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
    assert_eq!(r.u_a, 0.0);
    assert!((r.p - 1.0 / 3.0).abs() < 1e-15);
    let same = mann_whitney_u(&[1.0, 2.0, 2.0, 5.0], &[1.0, 2.0, 2.0, 5.0]).unwrap();
    assert_eq!(same.u_a, 8.0);
}

#[test]
fn u_statistics_are_complementary() {
    let mut r = rng(31);
    for _ in 0..1000 {
        let na = r.random_range(1..30);
        let nb = r.random_range(1..30);
        // coarse values so that ties are common
        let a: Vec<f64> = (0..na).map(|_| r.random_range(0..12) as f64).collect();
        let b: Vec<f64> = (0..nb).map(|_| r.random_range(0..12) as f64).collect();
        let m = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(m.u_a + m.u_b, (na * nb) as f64);
        assert!((0.0..=1.0).contains(&m.p));
    }
}

#[test]
fn welch_and_pearson_match_integration_oracle() {
    let mut r = rng(32);
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let na = r.random_range(3..40);
        let nb = r.random_range(3..40);
        let shift = r.random_range(-1.5..1.5);
        let (sa, sb) = (r.random_range(0.5..2.0), r.random_range(0.5..2.0));
        let a = normal_sample(&mut r, na, 0.0, sa);
        let b = normal_sample(&mut r, nb, shift, sb);
        let (t, p) = welch_oracle(&a, &b);
        let got = t_test(&a, &b).unwrap();
        assert!((got.statistic - t).abs() <= 1e-9 * t.abs().max(1.0));
        worst.0 = worst.0.max((got.p - p).abs());

        let n = r.random_range(5..60);
        let x = normal_sample(&mut r, n, 0.0, 1.0);
        let rho = r.random_range(-0.9..0.9);
        let y: Vec<f64> = x
            .iter()
            .map(|&v| {
                let e: f64 = StandardNormal.sample(&mut r);
                rho * v + e
            })
            .collect();
        let (rr, pp) = pearson_oracle(&x, &y);
        let got = pearson(&x, &y).unwrap();
        assert!((got.statistic - rr).abs() <= 1e-12);
        worst.1 = worst.1.max((got.p - pp).abs());
    }
    assert!(worst.0 <= 1e-6, "Welch p error {}", worst.0);
    assert!(worst.1 <= 1e-6, "Pearson p error {}", worst.1);
}

#[test]
fn t_test_examples() {
    let a = [1.0, 2.0, 3.0, 4.0];
    let b = [2.0, 3.0, 4.0, 5.0];
    let (_, p) = welch_oracle(&a, &b);
    let got = t_test(&a, &b).unwrap();
    assert!((got.p - p).abs() < 1e-6);
    assert_eq!(got.p, t_test(&b, &a).unwrap().p);
    let same = t_test(&a, &a).unwrap();
    assert_eq!((same.statistic, same.p), (0.0, 1.0));
    assert_eq!(t_test(&[2.0, 2.0], &[2.0, 2.0]).unwrap().p, 1.0);
    assert_eq!(t_test(&[2.0, 2.0], &[3.0, 3.0]).unwrap().p, 0.0);
}

#[test]
fn pearson_examples() {
    let a = [1.0, 2.0, 3.0];
    let b = [1.0, 2.0, 4.0];
    // r = 3 / sqrt(2 * 4.6667)
    let want = 3.0 / (2.0f64 * 14.0 / 3.0).sqrt();
    assert!((pearson(&a, &b).unwrap().statistic - want).abs() < 1e-12);
    let x = [0.3, -1.0, 2.5, 4.0, 1.1];
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!((pearson(&x, &x).unwrap().statistic - 1.0).abs() < 1e-15);
    assert!((pearson(&x, &neg).unwrap().statistic + 1.0).abs() < 1e-15);
    assert!(pearson(&x, &[1.0; 5]).is_err());
}

#[test]
fn ks_calibration() {
    let mut r = rng(33);
    let mut pass = 0;
    for _ in 0..200 {
        let x = normal_sample(&mut r, 500, 3.0, 2.0);
        if ks_normality(&x).unwrap().p >= 0.05 {
            pass += 1;
        }
    }
    assert!(pass >= 190, "{pass} of 200 normal samples passed");

    let u: Vec<f64> = (0..500).map(|_| r.random::<f64>()).collect();
    assert!(ks_normality(&u).unwrap().p < 0.05);
    assert!(ks_normality(&[4.0; 20]).is_err());
}

#[test]
fn kolmogorov_sf_reference_points() {
    // reference values from scipy.special.kolmogorov
    let table = [
        (0.5, 0.963_945_243_664_875_1),
        (1.0, 0.269_999_671_677_354_56),
        (1.358_098_8, 0.049_999_956_358_897_264),
        (2.0, 0.000_670_925_255_779_695_3),
    ];
    for (x, sf) in table {
        assert!((kolmogorov_sf(x) - sf).abs() < 1e-9, "x={x}");
    }
    // the two series agree where they switch
    let below = kolmogorov_sf(1.18 - 1e-12);
    let above = kolmogorov_sf(1.18);
    assert!((below - above).abs() < 1e-10);
}

fn noise_matrix(r: &mut impl Rng, n: usize) -> (FeatureMatrix, Vec<Label>) {
    let labels: Vec<Label> = (0..n).map(|i| if i < n / 2 { Label::Normal } else { Label::Glaucoma }).collect();
    let mut names = vec!["signal".to_string()];
    names.extend((0..9).map(|k| format!("noise{k}")));
    let rows = labels
        .iter()
        .map(|l| {
            let z: f64 = StandardNormal.sample(r);
            let mut row = vec![z + 2.0 * l.as_u8() as f64];
            row.extend((0..9).map(|_| {
                let e: f64 = StandardNormal.sample(r);
                e
            }));
            row
        })
        .collect();
    let ids = (0..n).map(|i| format!("s{i}")).collect();
    (FeatureMatrix::from_rows(ids, names, rows).unwrap(), labels)
}

#[test]
fn selection_recovers_signal_feature() {
    let mut r = rng(34);
    let mut good = 0;
    for _ in 0..100 {
        let (m, labels) = noise_matrix(&mut r, 100);
        let (sel, report) = select_features(&m, &labels, &SelectionConfig::default()).unwrap();
        assert!(report.get("signal").unwrap().selected);
        let noise_kept = sel.feature_names().iter().filter(|n| n.starts_with("noise")).count();
        if noise_kept <= 1 {
            good += 1;
        }
    }
    // about 93% of trials keep at most one noise column at alpha = 0.05
    assert!(good >= 85, "{good} of 100 trials");
}

#[test]
fn selection_drops_duplicates_and_flat_columns() {
    let mut r = rng(35);
    let (m, labels) = noise_matrix(&mut r, 60);
    let signal = m.column(0);
    let flat = vec![1.5; 60];
    let ids = m.instance_ids().to_vec();
    let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![signal[i], 3.0 * signal[i] - 1.0, flat[i]]).collect();
    let names = vec!["a".to_string(), "b".to_string(), "flat".to_string()];
    let mm = FeatureMatrix::from_rows(ids, names, rows).unwrap();
    let (sel, report) = select_features(&mm, &labels, &SelectionConfig::default()).unwrap();
    assert_eq!(sel.n_features(), 1);
    assert!(!report.get("flat").unwrap().selected);
    let dropped = report.features.iter().find(|f| f.dropped_for_redundancy_with.is_some()).unwrap();
    let partner = dropped.dropped_for_redundancy_with.as_ref().unwrap();
    assert!(report.get(partner).unwrap().selected);
    assert!(dropped.partner_r.unwrap().abs() >= 0.95);
}

#[test]
fn mann_whitney_route_is_rank_invariant() {
    let mut r = rng(36);
    for _ in 0..20 {
        let n = 40;
        let labels: Vec<Label> = (0..n).map(|i| if i % 2 == 0 { Label::Normal } else { Label::Glaucoma }).collect();
        // exponential-looking columns fail the normality check
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|l| {
                (0..4)
                    .map(|k| {
                        let u: f64 = r.random();
                        -(1.0 - u).ln() * (1.0 + 0.6 * l.as_u8() as f64 * (k % 2) as f64)
                    })
                    .collect()
            })
            .collect();
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let names: Vec<String> = (0..4).map(|k| format!("f{k}")).collect();
        let m = FeatureMatrix::from_rows(ids.clone(), names.clone(), rows.clone()).unwrap();
        let (_, rep) = select_features(&m, &labels, &SelectionConfig::default()).unwrap();
        let mw: Vec<usize> = (0..4).filter(|&k| rep.features[k].test_used == TestUsed::MannWhitney).collect();
        let transformed: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| row.iter().enumerate().map(|(k, &v)| if mw.contains(&k) { v.powi(3) + v } else { v }).collect())
            .collect();
        let m2 = FeatureMatrix::from_rows(ids, names, transformed).unwrap();
        let (_, rep2) = select_features(&m2, &labels, &SelectionConfig::default()).unwrap();
        for &k in &mw {
            assert_eq!(rep.features[k].p_value, rep2.features[k].p_value);
        }
    }
}

#[test]
fn selection_needs_two_per_class() {
    let m = FeatureMatrix::from_rows(
        vec!["a".into(), "b".into(), "c".into()],
        vec!["x".into()],
        vec![vec![1.0], vec![2.0], vec![3.0]],
    )
    .unwrap();
    let labels = [Label::Normal, Label::Normal, Label::Glaucoma];
    assert!(select_features(&m, &labels, &SelectionConfig::default()).is_err());
}
