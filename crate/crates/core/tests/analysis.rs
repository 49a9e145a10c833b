mod common;

use std::collections::BTreeMap;

use biasprobe::analysis::{
    compare_domains, emit_report, gender_direction, gendered_neighbors, parse_report, DirectionMethod, DomainReport,
    GenderDirection, ReportFormat,
};
use biasprobe::corpus::Domain;
use biasprobe::embed::{EmbeddingSpace, ZeroNormPolicy};
use biasprobe::lexicon::GenderPairList;
use biasprobe::weat::{run_weat, WeatConfig};
use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;

/// Space with `pairs` (m_i, f_i) pairs and `extra` other words.
fn pair_space(seed: u64, pairs: usize, extra: usize, m: usize, planted: f64) -> (EmbeddingSpace, GenderPairList) {
    let mut r = rng(seed);
    let axis = normal_vec(&mut r, m);
    let mut rows = Vec::new();
    let mut list = Vec::new();
    for i in 0..pairs {
        let base = normal_vec(&mut r, m);
        let noise = normal_vec(&mut r, m);
        let masc: Vec<f64> = base.iter().zip(&axis).map(|(b, a)| b + planted * a).collect();
        let fem: Vec<f64> = base.iter().zip(&noise).map(|(b, n)| b + 0.3 * n).collect();
        rows.push((format!("m{i}"), masc));
        rows.push((format!("f{i}"), fem));
        list.push((format!("m{i}"), format!("f{i}")));
    }
    for i in 0..extra {
        rows.push((format!("w{i}"), normal_vec(&mut r, m)));
    }
    (
        EmbeddingSpace::from_rows(m, rows, ZeroNormPolicy::Error).unwrap(),
        GenderPairList::new("en", list).unwrap(),
    )
}

fn diffs(space: &EmbeddingSpace, pairs: &GenderPairList) -> Vec<Vec<f64>> {
    pairs
        .pairs()
        .iter()
        .map(|(m, f)| {
            let (a, b) = (space.lookup(m).unwrap(), space.lookup(f).unwrap());
            a.iter().zip(b).map(|(x, y)| x - y).collect()
        })
        .collect()
}

/// Leading eigenpair of the uncentered second-moment matrix, dense solver.
fn dense_top(diffs: &[Vec<f64>]) -> (Vec<f64>, f64, f64) {
    let m = diffs[0].len();
    let mut mat = DMatrix::<f64>::zeros(m, m);
    for d in diffs {
        let v = nalgebra::DVector::from_column_slice(d);
        mat += &v * v.transpose();
    }
    mat /= diffs.len() as f64;
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let top = eig.eigenvectors.column(order[0]).iter().copied().collect();
    let second = if m > 1 { eig.eigenvalues[order[1]] } else { 0.0 };
    (top, eig.eigenvalues[order[0]], second)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn pca_matches_dense_eigensolver() {
    let mut checked = 0;
    for seed in 0..40 {
        let (space, pairs) = pair_space(seed, 6 + seed as usize % 5, 0, 8, 2.0);
        let d = diffs(&space, &pairs);
        let (top, l1, l2) = dense_top(&d);
        if l2 / l1 > 0.8 {
            continue;
        }
        let got = gender_direction(&space, &pairs, DirectionMethod::FirstPrincipalComponent).unwrap();
        assert!((norm(&got.vector) - 1.0).abs() < 1e-12);
        let cos: f64 = got.vector.iter().zip(&top).map(|(a, b)| a * b).sum();
        assert!(1.0 - cos.abs() < 1e-7, "seed {seed}: |cos| = {}", cos.abs());
        // sign follows the mean difference
        let mean: Vec<f64> = (0..8).map(|j| d.iter().map(|v| v[j]).sum::<f64>()).collect();
        assert!(got.vector.iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>() >= 0.0);
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} well-separated cases");
}

#[test]
fn pca_rank_one_equals_mean_difference() {
    let mut r = rng(8);
    let delta = normal_vec(&mut r, 6);
    let mut rows = Vec::new();
    let mut list = Vec::new();
    for i in 0..5 {
        let base = normal_vec(&mut r, 6);
        rows.push((format!("m{i}"), base.iter().zip(&delta).map(|(b, d)| b + d).collect()));
        rows.push((format!("f{i}"), base));
        list.push((format!("m{i}"), format!("f{i}")));
    }
    let space = EmbeddingSpace::from_rows(6, rows, ZeroNormPolicy::Error).unwrap();
    let pairs = GenderPairList::new("en", list).unwrap();
    let pca = gender_direction(&space, &pairs, DirectionMethod::FirstPrincipalComponent).unwrap();
    let mean = gender_direction(&space, &pairs, DirectionMethod::MeanDifference).unwrap();
    let (top, _, _) = dense_top(&diffs(&space, &pairs));
    let sign = if top.iter().zip(&mean.vector).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for ((p, m), t) in pca.vector.iter().zip(&mean.vector).zip(&top) {
        assert!((p - m).abs() < 1e-9);
        assert!((sign * t - m).abs() < 1e-9);
    }
}

#[test]
fn neighbor_example_matches_hand_cosines() {
    let space = EmbeddingSpace::from_rows(
        2,
        [
            ("he", [1.0, 0.0]),
            ("she", [0.0, 1.0]),
            ("king", [0.9, 0.1]),
            ("queen", [0.1, 0.9]),
        ]
        .map(|(t, v)| (t.to_string(), v.to_vec())),
        ZeroNormPolicy::Error,
    )
    .unwrap();
    let pairs = GenderPairList::new("en", vec![("he".into(), "she".into())]).unwrap();
    let dir = gender_direction(&space, &pairs, DirectionMethod::MeanDifference).unwrap();
    let n = gendered_neighbors(&space, &dir, 1, None).unwrap();
    assert_eq!(n.masculine_top[0].token, "king");
    assert_eq!(n.feminine_top[0].token, "queen");
    let u = [0.5f64.sqrt(), -(0.5f64.sqrt())];
    assert!((n.masculine_top[0].score - naive_cosine(&[0.9, 0.1], &u)).abs() < 1e-12);
    assert!((n.feminine_top[0].score - naive_cosine(&[0.1, 0.9], &u)).abs() < 1e-12);
}

fn report_with(domain: Domain, metrics: &[(&str, u64)]) -> DomainReport {
    let weat_results = metrics
        .iter()
        .map(|(name, seed)| {
            let mut r = rng(*seed);
            let case = WeatCase::random(&mut r, 3, 2, 2, 5);
            let [x, y, a, b] = case.specs();
            (name.to_string(), run_weat(&case.space, &x, &y, &a, &b, &WeatConfig::default()).unwrap())
        })
        .collect::<BTreeMap<_, _>>();
    DomainReport {
        domain_id: domain,
        weat_results,
        tgbi_result: None,
        masculine_top: vec![],
        feminine_top: vec![],
        embedding_provenance: String::new(),
        parameters_digest: None,
    }
}

#[test]
fn empty_optional_fields_render_everywhere() {
    let r = compare_domains(
        vec![report_with(Domain::News, &[("m", 1)]), report_with(Domain::Sports, &[("m", 2)])],
        None,
    )
    .unwrap();
    for f in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown] {
        assert!(!emit_report(&r, f).unwrap().is_empty());
    }
    let json: serde_json::Value = serde_json::from_slice(&emit_report(&r, ReportFormat::Json).unwrap()).unwrap();
    assert!(json["generated_at"].is_null());
    assert!(json["domains"][0]["tgbi_result"].is_null());
}

fn direction_close(a: &GenderDirection, b: &GenderDirection) -> f64 {
    a.vector.iter().zip(&b.vector).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn direction_and_neighbors_are_scale_invariant(seed in any::<u64>(), log_c in -3.0f64..3.0, pca in any::<bool>()) {
        let (space, pairs) = pair_space(seed, 5, 30, 10, 1.5);
        let c = 10f64.powf(log_c);
        let scaled = space.scaled(c).unwrap();
        let method = if pca { DirectionMethod::FirstPrincipalComponent } else { DirectionMethod::MeanDifference };
        let d1 = gender_direction(&space, &pairs, method).unwrap();
        let d2 = gender_direction(&scaled, &pairs, method).unwrap();
        prop_assert!((norm(&d1.vector) - 1.0).abs() < 1e-12);
        prop_assert!(direction_close(&d1, &d2) < 1e-12);

        let n1 = gendered_neighbors(&space, &d1, 8, None).unwrap();
        let n2 = gendered_neighbors(&scaled, &d2, 8, None).unwrap();
        for (a, b) in [(&n1.masculine_top, &n2.masculine_top), (&n1.feminine_top, &n2.feminine_top)] {
            let ta: Vec<&str> = a.iter().map(|t| t.token.as_str()).collect();
            let tb: Vec<&str> = b.iter().map(|t| t.token.as_str()).collect();
            prop_assert_eq!(ta, tb);
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x.score - y.score).abs() < 1e-12);
            }
        }
        // sorted by |score| within sign, pair tokens excluded, scores are cosines
        for list in [&n1.masculine_top, &n1.feminine_top] {
            prop_assert!(list.windows(2).all(|w| w[0].score.abs() >= w[1].score.abs()));
            prop_assert!(list.iter().all(|t| t.token.starts_with('w') && t.score.abs() <= 1.0));
        }
    }

    #[test]
    fn rankings_recompute_from_contained_results(seeds in prop::collection::vec(any::<u64>(), 2..=4), drop_last in any::<bool>()) {
        let reports: Vec<DomainReport> = seeds
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let mut metrics = vec![("alpha", s), ("beta", s.wrapping_add(1))];
                if drop_last && i == seeds.len() - 1 {
                    metrics.pop();
                }
                report_with(Domain::ALL[i], &metrics)
            })
            .collect();
        let report = compare_domains(reports, None).unwrap();
        for (metric, ranking) in &report.rankings {
            let mut expect: Vec<(f64, &str)> = report
                .domains
                .iter()
                .filter_map(|d| d.weat_results.get(metric).map(|w| (w.effect_size, d.domain_id.as_str())))
                .collect();
            expect.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
            let got: Vec<(f64, &str)> = ranking.signed.iter().map(|e| (e.effect_size, e.domain.as_str())).collect();
            prop_assert_eq!(got, expect);
            prop_assert!(ranking.absolute.windows(2).all(|w| w[0].effect_size.abs() >= w[1].effect_size.abs()));
            prop_assert_eq!(ranking.signed.len() + ranking.omitted.len(), report.domains.len());
        }
        let csv = emit_report(&report, ReportFormat::Csv).unwrap();
        let rows: usize = report.domains.iter().map(|d| d.weat_results.len()).sum();
        prop_assert_eq!(csv.iter().filter(|&&b| b == b'\n').count(), rows + 1);
        let json = emit_report(&report, ReportFormat::Json).unwrap();
        prop_assert_eq!(parse_report(&json).unwrap(), report);
    }
}

#[test]
fn neighbors_truncate_with_small_vocabulary() {
    let (space, pairs) = pair_space(3, 3, 4, 5, 1.0);
    let dir = gender_direction(&space, &pairs, DirectionMethod::MeanDifference).unwrap();
    let n = gendered_neighbors(&space, &dir, 50, None).unwrap();
    assert!(n.truncated);
    assert_eq!(n.masculine_top.len() + n.feminine_top.len(), 4);
    let _ = rng(0).gen::<u8>();
}
