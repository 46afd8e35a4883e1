use itsforge_core::interval::Interval;
use itsforge_core::stats::{arv_interval, one_way_anova, tukey_hsd, ReplicateResults};
use itsforge_testkit::oracle;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn groups(named: &[(&str, &[f64])]) -> Vec<ReplicateResults> {
    named
        .iter()
        .map(|(m, v)| ReplicateResults {
            method: m.to_string(),
            horizon: 1,
            arv_values: v.to_vec(),
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// Reference values produced with scipy.stats.f_oneway and scipy.stats.tukey_hsd.
const A: [&[f64]; 3] = [
    &[0.31, 0.29, 0.35, 0.30, 0.33, 0.28],
    &[0.36, 0.34, 0.39, 0.33, 0.37, 0.35],
    &[0.30, 0.32, 0.29, 0.34, 0.31, 0.31],
];
const A_F: f64 = 8.741339491916861;
const A_P: f64 = 0.0030429557837750457;
const A_PAIRS: [(usize, usize, f64); 3] = [
    (0, 1, 0.0058748424719929915),
    (0, 2, 0.9905022837606212),
    (1, 2, 0.0076484325091912275),
];

const B: [&[f64]; 3] = [
    &[1.2, 1.5, 1.1, 1.4, 1.3],
    &[1.6, 1.9, 1.7, 1.5, 1.8, 2.0, 1.6],
    &[1.25, 1.45, 1.35, 1.2],
];
const B_F: f64 = 13.836377729846323;
const B_P: f64 = 0.000602779423421396;
const B_PAIRS: [(usize, usize, f64); 3] = [
    (0, 1, 0.0013789352007675948),
    (0, 2, 0.9925178286548612),
    (1, 2, 0.002994736820294275),
];

#[test]
fn two_group_anova_matches_reference() {
    let g = groups(&[("a", &[1.0, 2.0, 3.0]), ("b", &[4.0, 5.0, 6.0])]);
    let r = one_way_anova(&g).unwrap();
    assert!(rel(r.f_statistic, 13.5) < 1e-12);
    assert!(rel(r.p_value, 0.02131164112875672) < 1e-6);
    assert_eq!((r.df_between, r.df_within), (1, 4));
}

#[test]
fn committed_fixtures_match_reference() {
    for (data, f, p, pairs) in [(A, A_F, A_P, A_PAIRS), (B, B_F, B_P, B_PAIRS)] {
        let g = groups(&[("M1", data[0]), ("M2", data[1]), ("M3", data[2])]);
        let r = one_way_anova(&g).unwrap();
        assert!(rel(r.f_statistic, f) < 1e-6, "F {} vs {f}", r.f_statistic);
        assert!(rel(r.p_value, p) < 1e-6, "p {} vs {p}", r.p_value);
        let (of, _, _) = oracle::anova_f(&data.iter().map(|g| g.to_vec()).collect::<Vec<_>>());
        assert!(rel(r.f_statistic, of) < 1e-12);

        let t = tukey_hsd(&g, 0.05).unwrap();
        for (i, j, pv) in pairs {
            let pc = t.pair(i, j).unwrap();
            assert!(rel(pc.p_value, pv) < 1e-6, "pair {i},{j}: {} vs {pv}", pc.p_value);
            assert_eq!(pc.significant, pv < 0.05);
        }
        assert!(t.warning.is_none());
    }
}

#[test]
fn ranking_lines_render_markers() {
    let t = tukey_hsd(&groups(&[("M1", A[0]), ("M2", A[1]), ("M3", A[2])]), 0.05).unwrap();
    assert_eq!(t.ranks(), vec![1, 3, 2]);
    assert_eq!(t.ranking_line(), "M1 < M3 <* M2");
    let t = tukey_hsd(&groups(&[("M1", B[0]), ("M2", B[1]), ("M3", B[2])]), 0.05).unwrap();
    assert_eq!(t.ranking_line(), "M1 < M3 <* M2");
}

#[test]
fn identical_groups_are_not_different() {
    let v = [0.2, 0.4, 0.3, 0.5];
    let t = tukey_hsd(&groups(&[("x", &v), ("y", &v)]), 0.05).unwrap();
    assert!(!t.pairs[0].significant);
    assert!(t.warning.is_some());
    let r = one_way_anova(&groups(&[("a", &v), ("b", &v), ("c", &v), ("d", &v), ("e", &v)])).unwrap();
    assert_eq!(r.f_statistic, 0.0);
}

#[test]
fn separated_means_are_significant() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let a: Vec<f64> = (0..50).map(|_| 0.2 + noise.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..50).map(|_| 1.0 + noise.sample(&mut rng)).collect();
    let t = tukey_hsd(&groups(&[("lo", &a), ("hi", &b)]), 0.05).unwrap();
    assert!(t.pairs[0].significant);
    assert_eq!(t.ranking_line(), "lo <* hi");
    let t = tukey_hsd(&groups(&[("a", &[0.3, 0.31]), ("b", &[0.5, 0.52]), ("c", &[0.4, 0.39])]), 0.05).unwrap();
    assert_eq!(t.ranks(), vec![1, 3, 2]);
}

fn intervals(v: &[(f64, f64)]) -> Vec<Interval> {
    v.iter().map(|&(l, u)| Interval::new(l.min(u), l.max(u))).collect()
}

proptest! {
    #[test]
    fn arv_is_affine_and_order_invariant(
        pairs in prop::collection::vec(((-5.0f64..5.0, -5.0f64..5.0), (-5.0f64..5.0, -5.0f64..5.0)), 3..20),
        a in prop_oneof![0.1f64..10.0, -10.0f64..-0.1],
        b in -100.0f64..100.0,
        rot in 0usize..20,
    ) {
        let act = intervals(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let pred = intervals(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        let base = arv_interval(&act, &pred).unwrap();
        prop_assume!(base.is_finite() && base > 1e-9);

        let f = |v: &[Interval]| v.iter().map(|iv| Interval::new(a * iv.lower + b, a * iv.upper + b)).collect::<Vec<_>>();
        let scaled = arv_interval(&f(&act), &f(&pred)).unwrap();
        prop_assert!((scaled - base).abs() <= 1e-8 * base);

        let r = rot % act.len();
        let mut act2 = act.clone();
        let mut pred2 = pred.clone();
        act2.rotate_left(r);
        pred2.rotate_left(r);
        let rotated = arv_interval(&act2, &pred2).unwrap();
        prop_assert!((rotated - base).abs() <= 1e-12 * base);
    }

    #[test]
    fn anova_is_shift_invariant(
        g in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2..8), 2..5),
        c in -10.0f64..10.0,
    ) {
        let named: Vec<ReplicateResults> = g.iter().enumerate().map(|(i, v)| ReplicateResults {
            method: format!("m{i}"), horizon: 1, arv_values: v.clone() }).collect();
        let shifted: Vec<ReplicateResults> = named.iter().map(|r| ReplicateResults {
            arv_values: r.arv_values.iter().map(|v| v + c).collect(), ..r.clone() }).collect();
        let a = one_way_anova(&named).unwrap();
        let b = one_way_anova(&shifted).unwrap();
        prop_assume!(a.f_statistic > 1e-6 && !a.degenerate);
        prop_assert!((a.f_statistic - b.f_statistic).abs() <= 1e-6 * a.f_statistic);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tukey_matrix_is_symmetric_and_thresholded(
        g in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2..8), 2..5),
    ) {
        let named: Vec<ReplicateResults> = g.iter().enumerate().map(|(i, v)| ReplicateResults {
            method: format!("m{i}"), horizon: 1, arv_values: v.clone() }).collect();
        let t = tukey_hsd(&named, 0.05).unwrap();
        let m = t.significance_matrix();
        for i in 0..m.len() {
            for j in 0..m.len() {
                prop_assert_eq!(m[i][j], m[j][i]);
            }
        }
        for p in &t.pairs {
            if p.significant {
                prop_assert!(p.mean_diff.abs() > p.threshold);
            }
        }
    }
}
