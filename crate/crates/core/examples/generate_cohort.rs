//! Generates a synthetic cohort, writes it as CSV, reads it back and makes
//! class-stratified splits.
//!
//! cargo run --example generate_cohort -- [output-dir]

use std::path::PathBuf;

use lsgp::data::{
    apply_inclusion_filter, make_splits, read_cohort_csv, write_cohort_csv, write_group_csv, CsvSchema,
    SplitOrder, SyntheticSpec,
};

fn main() -> lsgp::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let spec = SyntheticSpec {
        n_subjects: 20,
        n_clusters: 2,
        seed: 3,
        ..SyntheticSpec::default()
    };
    let generated = lsgp::data::generate_synthetic(&spec)?;
    let path = dir.join("cohort.csv");
    write_cohort_csv(&generated.cohort, &path)?;
    write_group_csv(&generated.clusters, "cluster", dir.join("ground_truth.csv"))?;

    let cohort = read_cohort_csv(&path, &CsvSchema::default())?;
    println!(
        "{}: {} subjects, {} observations, {} responses each, positive rate {:.3}",
        path.display(),
        cohort.n_subjects(),
        cohort.len(),
        cohort.feature_dim(),
        cohort.positive_rate()
    );

    let kept = apply_inclusion_filter(&cohort, 3, 3);
    println!("{} subjects have at least 3 events and 3 non-events", kept.n_subjects());
    for (k, split) in make_splits(&kept, (0.5, 0.25, 0.25), 3, 0, SplitOrder::Random)?.iter().enumerate() {
        println!(
            "cut {k}: train {}  validation {}  test {}",
            split.train.len(),
            split.validation.len(),
            split.test.len()
        );
    }
    Ok(())
}
