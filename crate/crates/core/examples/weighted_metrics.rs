//! Support-weighted precision, recall and F1 with the confusion matrix.
//!
//! cargo run --example weighted_metrics

use epirisk::metrics::weighted_metrics;

fn main() -> epirisk::Result<()> {
    let truth = [0, 0, 1, 1, 2, 2];
    let pred = [0, 0, 1, 1, 1, 1];
    let m = weighted_metrics(&truth, &pred, 3)?;
    println!("confusion (rows = truth): {:?}", m.confusion.rows());
    for c in &m.per_class {
        println!(
            "class {}: precision {:.3} recall {:.3} f1 {:.3} support {}",
            c.class, c.precision, c.recall, c.f1, c.support
        );
    }
    println!(
        "weighted: precision {:.4} recall {:.4} f1 {:.4} (accuracy {:.4})",
        m.weighted_precision,
        m.weighted_recall,
        m.weighted_f1,
        m.accuracy()
    );
    println!("{}", serde_json::to_string(&m)?);
    Ok(())
}
