//! One-sided Wilcoxon signed-rank test for paired samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `a` tends to be smaller than `b`.
    Less,
    /// `a` tends to be larger than `b`.
    Greater,
}

/// Largest sample (after dropping zero differences) tested exactly.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedRanks {
    /// Non-zero differences `a - b`.
    pub differences: Vec<f64>,
    /// Average ranks of `|d|`, aligned with `differences`.
    pub ranks: Vec<f64>,
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
}

/// Ranks the absolute non-zero differences, giving tied values their
/// average rank.
pub fn signed_ranks(a: &[f64], b: &[f64]) -> Result<SignedRanks> {
    if a.len() != b.len() {
        return Err(Error::param("paired samples must have equal length"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(Error::DegenerateSample);
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0.0; d.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let w_plus = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    Ok(SignedRanks {
        differences: d,
        ranks,
        w_plus,
    })
}

/// Exact one-sided p-value: the share of the `2ⁿ` equally likely sign
/// assignments whose W+ is at least (greater) or at most (less) the
/// observed value. Counted over doubled ranks, which are integers.
pub fn exact_p_value(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w = (2.0 * w_plus).round() as usize;
    let hits: u64 = match alternative {
        Alternative::Greater => counts[w..].iter().sum(),
        Alternative::Less => counts[..=w].iter().sum(),
    };
    hits as f64 / 2f64.powi(ranks.len() as i32)
}

/// Normal approximation with tie correction and continuity correction.
pub fn normal_p_value(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie / 48.0;
    let sd = var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    match alternative {
        Alternative::Greater => 1.0 - std.cdf((w_plus - mean - 0.5) / sd),
        Alternative::Less => std.cdf((w_plus - mean + 0.5) / sd),
    }
}

/// One-sided signed-rank p-value of `a` against `b`. Exact for up to
/// [`EXACT_MAX_N`] non-zero differences, normal approximation beyond.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alternative: Alternative) -> Result<f64> {
    let sr = signed_ranks(a, b)?;
    let n = sr.ranks.len();
    if n < 5 {
        return Err(Error::InsufficientPoints { needed: 5, got: n });
    }
    Ok(if n <= EXACT_MAX_N {
        exact_p_value(&sr.ranks, sr.w_plus, alternative)
    } else {
        normal_p_value(&sr.ranks, sr.w_plus, alternative)
    })
}
