//! Fits SV-LSGP, reads the subject covariance off the latent kernel, scores
//! its modularity against the generating clusters and writes a pruned graph.
//!
//! cargo run --release --example similarity_graph -- [output-stem]
//! dot -Tsvg similarity.dot > similarity.svg

use std::path::PathBuf;

use lsgp::data::{apply_inclusion_filter, generate_synthetic, make_splits, SplitOrder, SyntheticSpec};
use lsgp::eval::split_parts;
use lsgp::similarity::{modularity, patient_covariance, prune_and_export, ModularityOptions, Normalization};
use lsgp::svlsgp::{fit, LsgpConfig};

fn main() -> lsgp::Result<()> {
    let stem = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("similarity"), PathBuf::from);
    let generated = generate_synthetic(&SyntheticSpec::default())?;
    let cohort = apply_inclusion_filter(&generated.cohort, 3, 3);
    let split = &make_splits(&cohort, (0.5, 0.25, 0.25), 1, 0, SplitOrder::Random)?[0];
    let (train, validation, _) = split_parts(&cohort, split);
    let (model, _) = fit(&LsgpConfig::desk(), &train, &validation)?;

    let graph = patient_covariance(&model)?.with_group_map(&generated.clusters)?;
    for normalization in [Normalization::Paper, Normalization::Standard] {
        let options = ModularityOptions {
            normalization,
            exclude_diagonal: false,
        };
        println!("Q ({normalization:?}) = {:.4}", modularity(&graph, options)?);
    }

    let threshold = graph.off_diagonal_quantile(0.75);
    let export = prune_and_export(&graph, threshold, &stem)?;
    let within = export
        .edges
        .iter()
        .filter(|e| generated.clusters[&e.a] == generated.clusters[&e.b])
        .count();
    println!(
        "kept {} edges above {threshold:.3} ({within} within a cluster) -> {}.dot",
        export.edges.len(),
        stem.display()
    );
    Ok(())
}
