use super::*;
use crate::data::{generate_synthetic, SyntheticSpec};
use proptest::prelude::*;

fn small_cohort() -> Cohort {
    let spec = SyntheticSpec {
        n_subjects: 6,
        n_clusters: 2,
        obs_per_subject: (30, 50),
        feature_dim: 3,
        base_rate: 0.3,
        seed: 4,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec).unwrap().cohort
}

fn subject_only(c: &Cohort, s: u64) -> Cohort {
    c.select(&c.subject_index()[&s])
}

/// Plain Newton iterations on the same penalized objective.
fn newton_oracle(x: &[Vec<f64>], y: &[bool], l2: f64) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let d = x[0].len() + 1;
    let mut theta = DVector::zeros(d);
    for _ in 0..50 {
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        for (xi, &yi) in x.iter().zip(y) {
            let mut a = DVector::from_element(d, 1.0);
            a.rows_mut(1, d - 1).copy_from_slice(xi);
            let p = 1.0 / (1.0 + (-a.dot(&theta)).exp());
            g += &a * ((yi as u8 as f64) - p);
            h += &a * a.transpose() * (p * (1.0 - p));
        }
        for j in 1..d {
            g[j] -= l2 * theta[j];
            h[(j, j)] += l2;
        }
        theta += h.lu().solve(&g).unwrap();
    }
    theta.iter().copied().collect()
}

#[test]
fn lr_matches_newton_solution() {
    let c = small_cohort();
    let rows = c.feature_rows();
    let y = c.labels();
    let (unit, _) = fit_lr(&rows, &y, 3, &LrHyper::default());
    let std_rows: Vec<Vec<f64>> = rows.iter().map(|r| unit.standardizer.apply(r)).collect();
    let theta = newton_oracle(&std_rows, &y, 1.0);
    assert!((unit.intercept - theta[0]).abs() < 1e-5, "{} vs {}", unit.intercept, theta[0]);
    for (w, t) in unit.weights.iter().zip(&theta[1..]) {
        assert!((w - t).abs() < 1e-5);
    }
}

#[test]
fn lr_objective_never_decreases() {
    let c = small_cohort();
    for l2 in [0.0, 1.0] {
        let hyper = LrHyper { l2, ..LrHyper::default() };
        let (_, trace) = fit_lr(&c.feature_rows(), &c.labels(), 3, &hyper);
        assert!(trace.len() > 2);
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn idiographic_equals_per_subject_single() {
    let c = small_cohort();
    let kind = BaselineKind::Lr(LrHyper::default());
    let idio = fit_baseline(kind, FittingScope::Idiographic, &c).unwrap();
    for s in c.subject_ids() {
        let own = subject_only(&c, s);
        let single = fit_baseline(kind, FittingScope::Single, &own).unwrap();
        assert_eq!(idio.predict_cohort(&own).unwrap(), single.predict_cohort(&own).unwrap());
    }
}

#[test]
fn grouped_extremes_match_other_scopes() {
    let c = small_cohort();
    for family in [BaselineFamily::Lr, BaselineFamily::Knn] {
        let kind = family.grid()[0];
        let one: BTreeMap<u64, usize> = c.subject_ids().into_iter().map(|s| (s, 0)).collect();
        let each: BTreeMap<u64, usize> =
            c.subject_ids().into_iter().enumerate().map(|(g, s)| (s, g)).collect();
        let p = |scope| fit_baseline(kind, scope, &c).unwrap().predict_cohort(&c).unwrap();
        assert_eq!(p(FittingScope::Grouped(one)), p(FittingScope::Single));
        assert_eq!(p(FittingScope::Grouped(each)), p(FittingScope::Idiographic));
    }
}

#[test]
fn single_class_unit_is_clipped_constant() {
    let obs: Vec<Observation> = (0..5)
        .map(|i| Observation {
            subject_id: 1,
            timestamp: i as f64,
            responses: vec![i as u8],
            label: false,
        })
        .collect();
    let c = Cohort::new(obs, 1).unwrap();
    let m = fit_baseline(BaselineKind::Lr(LrHyper::default()), FittingScope::Idiographic, &c).unwrap();
    assert_eq!(m.predict(1, &[3.0]).unwrap(), CONSTANT_CLIP);
}

#[test]
fn unknown_subject_is_a_scope_error() {
    let c = small_cohort();
    let m = fit_baseline(BaselineFamily::Knn.grid()[0], FittingScope::Idiographic, &c).unwrap();
    assert!(matches!(m.predict(999, &[1.0, 2.0, 3.0]), Err(Error::Scope(999))));
    let single = fit_baseline(BaselineFamily::Knn.grid()[0], FittingScope::Single, &c).unwrap();
    assert!(single.predict(999, &[1.0, 2.0, 3.0]).is_ok());
}

#[test]
fn knn_ties_go_to_lower_index() {
    let rows = vec![vec![1.0], vec![-1.0], vec![1.0]];
    let labels = vec![true, false, false];
    let hyper = KnnHyper { k: 1, distance: Distance::Euclidean };
    let unit = KnnUnit::fit(&rows, &labels, 1, hyper);
    assert_eq!(unit.votes(&[1.0]), (1, 1));
    assert_eq!(unit.predict(&[1.0]), 0.75);
}

#[test]
fn model_json_round_trip() {
    let c = small_cohort();
    for family in [BaselineFamily::Lr, BaselineFamily::Knn] {
        let m = fit_baseline(family.grid()[0], FittingScope::Idiographic, &c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = BaselineModel::load(&path).unwrap();
        assert_eq!(back.predict_cohort(&c).unwrap(), m.predict_cohort(&c).unwrap());
    }
}

#[test]
fn selection_picks_best_validation_auc() {
    let c = small_cohort();
    let train = c.select(&(0..c.len()).filter(|i| i % 3 != 0).collect::<Vec<_>>());
    let val = c.select(&(0..c.len()).filter(|i| i % 3 == 0).collect::<Vec<_>>());
    let aucs: Vec<f64> = BaselineFamily::Knn
        .grid()
        .into_iter()
        .map(|k| {
            let m = fit_baseline(k, FittingScope::Single, &train).unwrap();
            roc_auc(&m.predict_cohort(&val).unwrap(), &val.labels())
        })
        .collect();
    let best = aucs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = aucs.iter().position(|&a| a == best).unwrap();
    let m = fit_selected(&BaselineFamily::Knn.grid(), &FittingScope::Single, &train, &val).unwrap();
    assert_eq!(m.kind, BaselineFamily::Knn.grid()[first]);
}

proptest! {
    #[test]
    fn knn_vote_fraction_survives_duplication(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, any::<bool>()), 4..20),
        q in (-3.0f64..3.0, -3.0f64..3.0),
        k in 1usize..4,
        manhattan in any::<bool>(),
    ) {
        let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
        let labels: Vec<bool> = pts.iter().map(|p| p.2).collect();
        let distance = if manhattan { Distance::Manhattan } else { Distance::Euclidean };
        let once = KnnUnit::fit(&rows, &labels, 2, KnnHyper { k, distance });
        let rows2: Vec<Vec<f64>> = rows.iter().chain(&rows).cloned().collect();
        let labels2: Vec<bool> = labels.iter().chain(&labels).copied().collect();
        let twice = KnnUnit::fit(&rows2, &labels2, 2, KnnHyper { k: 2 * k, distance });
        let query = [q.0, q.1];
        // float noise in the scale can reorder near-ties, so only check clear gaps
        let mut d: Vec<f64> = once.points.iter()
            .map(|p| distance.between(p, &once.standardizer.apply(&query))).collect();
        d.sort_by(f64::total_cmp);
        if k < d.len() && d[k] - d[k - 1] > 1e-9 {
            prop_assert_eq!(once.vote_fraction(&query), twice.vote_fraction(&query));
        }
    }
}
