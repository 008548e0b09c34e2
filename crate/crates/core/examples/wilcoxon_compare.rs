//! Compares per-trial localization errors of two detectors with the
//! one-sided Wilcoxon signed-rank test.
//!
//! cargo run --example wilcoxon_compare

use tanksweep::tuning::{signed_ranks, wilcoxon_signed_rank, Alternative};

fn main() -> tanksweep::Result<()> {
    let a = [0.061, 0.094, 0.052, 0.120, 0.071, 0.083, 0.049, 0.102, 0.066, 0.058, 0.090, 0.077];
    let b = [0.074, 0.101, 0.088, 0.115, 0.069, 0.140, 0.083, 0.133, 0.091, 0.057, 0.104, 0.099];

    let sr = signed_ranks(&a, &b)?;
    println!("{} non-zero differences, W+ = {}", sr.ranks.len(), sr.w_plus);
    let p = wilcoxon_signed_rank(&a, &b, Alternative::Less)?;
    println!("p (a smaller than b) = {p:.4}");
    let p = wilcoxon_signed_rank(&a, &b, Alternative::Greater)?;
    println!("p (a larger than b)  = {p:.4}");
    Ok(())
}
