use proptest::prelude::*;

use lsgp::data::{make_splits, read_cohort_csv, write_cohort_csv, Cohort, CsvSchema, Observation, SplitOrder};

fn cohort_strategy() -> impl Strategy<Value = Cohort> {
    (1usize..4, prop::collection::vec((0u64..6, -1e6f64..1e6, any::<bool>()), 1..40)).prop_flat_map(|(dim, rows)| {
        let n = rows.len();
        prop::collection::vec(prop::collection::vec(0u8..=10, dim), n).prop_map(move |resp| {
            let obs = rows
                .iter()
                .zip(resp)
                .map(|(&(s, t, l), r)| Observation {
                    subject_id: s,
                    timestamp: t,
                    responses: r,
                    label: l,
                })
                .collect();
            Cohort::new(obs, dim).unwrap()
        })
    })
}

/// Subjects with at least `min` observations of each class.
fn splittable_strategy() -> impl Strategy<Value = Cohort> {
    prop::collection::vec((3usize..12, 3usize..12), 1..6).prop_map(|sizes| {
        let mut obs = Vec::new();
        for (s, &(pos, neg)) in sizes.iter().enumerate() {
            for k in 0..pos + neg {
                obs.push(Observation {
                    subject_id: s as u64 * 10,
                    timestamp: k as f64,
                    responses: vec![(k % 11) as u8],
                    label: k < pos,
                });
            }
        }
        Cohort::new(obs, 1).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(cohort in cohort_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_cohort_csv(&cohort, &path).unwrap();
        let back = read_cohort_csv(&path, &CsvSchema::default()).unwrap();
        prop_assert_eq!(back, cohort);
    }

    #[test]
    fn splits_partition_and_cover_classes(cohort in splittable_strategy(), seed in any::<u64>(), chrono in any::<bool>()) {
        let order = if chrono { SplitOrder::Chronological } else { SplitOrder::Random };
        let splits = make_splits(&cohort, (0.5, 0.25, 0.25), 2, seed, order).unwrap();
        prop_assert_eq!(&splits, &make_splits(&cohort, (0.5, 0.25, 0.25), 2, seed, order).unwrap());
        for s in &splits {
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..cohort.len()).collect::<Vec<_>>());
            for part in [&s.train, &s.validation, &s.test] {
                let sub = cohort.select(part);
                for subject in cohort.subject_ids() {
                    let (pos, neg) = sub.class_counts(subject);
                    prop_assert!(pos >= 1 && neg >= 1);
                }
            }
        }
    }
}
