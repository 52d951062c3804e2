//! Fits one logistic regression per group of subjects, for random groupings
//! of increasing size and for the true cluster labels.
//!
//! cargo run --release --example grouping_experiment

use lsgp::baselines::BaselineFamily;
use lsgp::data::{apply_inclusion_filter, generate_synthetic, make_splits, SplitOrder, SyntheticSpec};
use lsgp::eval::{run_grouping_experiment, GroupingMode};

fn main() -> lsgp::Result<()> {
    let generated = generate_synthetic(&SyntheticSpec::default())?;
    let cohort = apply_inclusion_filter(&generated.cohort, 3, 3);
    let split = &make_splits(&cohort, (0.5, 0.25, 0.25), 1, 0, SplitOrder::Random)?[0];
    let lr = BaselineFamily::Lr.into();

    let n = cohort.n_subjects();
    let random = run_grouping_experiment(&lr, &cohort, split, &[1, 2, 4, 8, 16, n], 10, &GroupingMode::Random, 0)?;
    for (g, auc) in random.medians("auc") {
        println!("random   G = {g:>2}: median auc {auc:.4}");
    }

    let labeled = GroupingMode::Labeled(generated.clusters.clone());
    let by_cluster = run_grouping_experiment(&lr, &cohort, split, &[], 1, &labeled, 0)?;
    for (g, auc) in by_cluster.medians("auc") {
        println!("clusters G = {g:>2}: auc {auc:.4}");
    }
    Ok(())
}
