//! Single vs. idiographic logistic regression and KNN on a clustered
//! synthetic cohort, summarized over five cuts.
//!
//! cargo run --release --example baselines_comparison

use lsgp::baselines::BaselineFamily;
use lsgp::data::{apply_inclusion_filter, generate_synthetic, make_splits, SplitOrder, SyntheticSpec};
use lsgp::eval::compare_single_vs_idiographic;

fn main() -> lsgp::Result<()> {
    let generated = generate_synthetic(&SyntheticSpec::default())?;
    let cohort = apply_inclusion_filter(&generated.cohort, 3, 3);
    let splits = make_splits(&cohort, (0.5, 0.25, 0.25), 5, 0, SplitOrder::Random)?;

    let cmp = compare_single_vs_idiographic(&[BaselineFamily::Lr.into(), BaselineFamily::Knn.into()], &cohort, &splits)?;
    for runs in &cmp.runs {
        println!(
            "{:>4} {:<12} auc {}  ll bottom {}  ll top {}",
            runs.method,
            runs.scope,
            runs.summary("auc").display(),
            runs.summary("ll_bottom").display(),
            runs.summary("ll_top").display()
        );
    }
    for row in cmp.deltas.iter().filter(|r| r.metric == "auc") {
        println!("{} idiographic - single auc: {}", row.method, row.delta.display());
    }

    Ok(())
}
