//! One-sided Wilcoxon signed-rank test for paired differences.

use crate::error::WilcoxonError;

/// Smallest input accepted, counting zeros.
pub const MIN_SAMPLES: usize = 5;
/// Nonzero differences up to this count use the exact null distribution.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub statistic: f64,
    /// `P(W+ >= statistic)` under the symmetric null.
    pub p_value: f64,
    /// Nonzero differences that were ranked.
    pub n_used: usize,
    pub method: Method,
}

/// Test `H0: median <= 0` against `HA: median > 0`.
///
/// Zeros are dropped, tied magnitudes share their average rank. With at
/// most [`EXACT_LIMIT`] nonzero differences the p-value comes from the
/// exact permutation distribution of the (possibly tied) ranks; beyond
/// that a normal approximation with tie-corrected variance and a 0.5
/// continuity correction is used.
pub fn wilcoxon_one_sided(deltas: &[f64]) -> Result<WilcoxonResult, WilcoxonError> {
    if deltas.len() < MIN_SAMPLES {
        return Err(WilcoxonError::TooFewSamples { required: MIN_SAMPLES, found: deltas.len() });
    }
    if let Some(index) = deltas.iter().position(|d| !d.is_finite()) {
        return Err(WilcoxonError::NonFinite { index });
    }
    let nonzero: Vec<f64> = deltas.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(WilcoxonError::AllZeroDeltas);
    }
    let n = nonzero.len();
    let doubled = doubled_ranks(&nonzero);
    let w2: u64 = nonzero.iter().zip(&doubled).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).sum();
    let statistic = w2 as f64 / 2.0;

    if n <= EXACT_LIMIT {
        return Ok(WilcoxonResult {
            statistic,
            p_value: exact_upper_tail(&doubled, w2),
            n_used: n,
            method: Method::Exact,
        });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut ties = 0.0;
    let mut sorted = doubled.clone();
    sorted.sort_unstable();
    for run in sorted.chunk_by(|a, b| a == b) {
        let t = run.len() as f64;
        ties += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let z = (statistic - mean - 0.5) / var.sqrt();
    Ok(WilcoxonResult { statistic, p_value: upper_normal_tail(z), n_used: n, method: Method::Normal })
}

/// Twice the average rank of each `|d|`, so ties stay integral.
pub fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    let mut ranks = vec![0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]].abs() == values[order[start]].abs() {
            end += 1;
        }
        // Positions start+1 ..= end share rank (start + 1 + end) / 2.
        let twice = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = twice;
        }
        start = end;
    }
    ranks
}

/// `P(sum of a random subset of doubled ranks >= threshold)`.
fn exact_upper_tail(doubled: &[u64], threshold: u64) -> f64 {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0.0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    let upper: f64 = counts[threshold as usize..].iter().sum();
    upper / (doubled.len() as f64).exp2()
}

fn upper_normal_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_hits_the_smallest_tail() {
        let d: Vec<f64> = (1..=10).map(|i| i as f64 * 0.01).collect();
        let r = wilcoxon_one_sided(&d).unwrap();
        assert_eq!(r.statistic, 55.0);
        assert_eq!(r.p_value, 1.0 / 1024.0);
        assert_eq!(r.method, Method::Exact);
    }

    #[test]
    fn ties_share_average_ranks() {
        assert_eq!(doubled_ranks(&[0.5, -0.5, 0.1, 2.0]), vec![5, 5, 2, 8]);
    }

    #[test]
    fn input_validation() {
        assert_eq!(wilcoxon_one_sided(&[1.0, 2.0, 3.0]), Err(WilcoxonError::TooFewSamples { required: 5, found: 3 }));
        assert_eq!(wilcoxon_one_sided(&[0.0; 6]), Err(WilcoxonError::AllZeroDeltas));
        assert!(matches!(
            wilcoxon_one_sided(&[1.0, f64::NAN, 1.0, 1.0, 1.0]),
            Err(WilcoxonError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn normal_branch_is_close_to_exact_at_the_boundary() {
        // 26 values: the normal tail should sit near the exact one for 25.
        let d: Vec<f64> = (1..=26).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
        let normal = wilcoxon_one_sided(&d).unwrap();
        assert_eq!(normal.method, Method::Normal);
        let doubled = doubled_ranks(&d);
        let w2 = (normal.statistic * 2.0) as u64;
        let exact = exact_upper_tail(&doubled, w2);
        assert!((normal.p_value - exact).abs() < 2e-3, "{} vs {}", normal.p_value, exact);
    }
}
