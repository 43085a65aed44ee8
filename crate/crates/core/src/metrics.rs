//! Prediction quality: Kendall's tau-b, mean squared error and rank tables.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(y: &[f64], yhat: &[f64], min_len: usize) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    if y.len() < min_len {
        return Err(Error::TooFewSamples {
            need: min_len,
            got: y.len(),
        });
    }
    if let Some(row) = y.iter().chain(yhat).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: row % y.len() });
    }
    Ok(())
}

fn tie_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Kendall's tau-b in `O(n log n)` (Knight's merge-sort method).
///
/// `(C - D) / sqrt((n0 - n1) (n0 - n2))` where `n0 = n(n-1)/2`, `n1` and
/// `n2` count pairs tied in `y` and in `yhat`. Equals tau-a without ties.
pub fn kendall_tau(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 2)?;
    // fold -0.0 into 0.0 so sorting and tie detection agree
    let y: Vec<f64> = y.iter().map(|v| v + 0.0).collect();
    let yhat: Vec<f64> = yhat.iter().map(|v| v + 0.0).collect();
    let n = y.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(yhat[a].total_cmp(&yhat[b])));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let xs: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let n1 = tie_pairs(&xs);

    // pairs tied in both
    let mut n3 = 0u64;
    let mut run = 1u64;
    for w in idx.windows(2) {
        if y[w[0]] == y[w[1]] && yhat[w[0]] == yhat[w[1]] {
            run += 1;
        } else {
            n3 += run * (run - 1) / 2;
            run = 1;
        }
    }
    n3 += run * (run - 1) / 2;

    let mut ys: Vec<f64> = idx.iter().map(|&i| yhat[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tie_pairs(&ys);

    let a = n0 - n1;
    let b = n0 - n2;
    if a == 0 || b == 0 {
        return Err(Error::AllTied);
    }
    let num = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    Ok(tau_from_counts(num, a, b))
}

/// Shared final step so that every route producing the same integer counts
/// yields the same float.
pub(crate) fn tau_from_counts(num: i64, a: u64, b: u64) -> f64 {
    let t = num as f64 / (a as f64 * b as f64).sqrt();
    t.clamp(-1.0, 1.0)
}

/// Bottom-up merge sort; returns the number of inversions (strict).
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if v[j].total_cmp(&v[i]) == Ordering::Less {
                    buf[k] = v[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + hi - j].copy_from_slice(&v[j..hi]);
            lo = hi;
        }
        v.copy_from_slice(buf);
        width *= 2;
    }
    swaps
}

/// Mean of squared differences.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 1)?;
    let s: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / y.len() as f64)
}

fn ordinal_ranks(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    // descending, stable so ties keep index order
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    let mut rank = vec![0; v.len()];
    for (r, &i) in idx.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

/// Per-item `(true_rank, predicted_rank)`. Rank 1 is the highest value; tied
/// values are ranked in index order, so each column is a permutation of
/// `1..=n`.
pub fn rank_table(y: &[f64], yhat: &[f64]) -> Result<Vec<(usize, usize)>> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: yhat.len(),
        });
    }
    Ok(ordinal_ranks(y).into_iter().zip(ordinal_ranks(yhat)).collect())
}

/// Writes `true_rank,predicted_rank` rows with a header and LF endings.
pub fn write_rank_csv<W: Write>(mut w: W, ranks: &[(usize, usize)]) -> std::io::Result<()> {
    writeln!(w, "true_rank,predicted_rank")?;
    for (t, p) in ranks {
        writeln!(w, "{t},{p}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ktau: f64,
    pub mse: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_pairs: Option<Vec<(usize, usize)>>,
}

impl EvalReport {
    pub fn compute(y: &[f64], yhat: &[f64], with_ranks: bool) -> Result<Self> {
        Ok(EvalReport {
            ktau: kendall_tau(y, yhat)?,
            mse: mse(y, yhat)?,
            n: y.len(),
            rank_pairs: if with_ranks { Some(rank_table(y, yhat)?) } else { None },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_extremes() {
        let y = [0.1, 0.5, 0.3, 0.9];
        assert_eq!(kendall_tau(&y, &y).unwrap(), 1.0);
        let rev: Vec<f64> = y.iter().map(|v| -v).collect();
        assert_eq!(kendall_tau(&y, &rev).unwrap(), -1.0);
    }

    #[test]
    fn tau_one_swap() {
        let t = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((t - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn tau_errors() {
        assert!(matches!(kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::AllTied)));
        assert!(matches!(kendall_tau(&[1.0], &[1.0]), Err(Error::TooFewSamples { .. })));
        assert!(matches!(kendall_tau(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch { .. })));
        assert!(kendall_tau(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn tau_with_ties_matches_hand_count() {
        // pairs: (0,1) tied in y; (0,2) C; (1,2) C; (0,3) C; (1,3) C; (2,3) tied in yhat
        let y = [1.0, 1.0, 2.0, 3.0];
        let yhat = [1.0, 2.0, 3.0, 3.0];
        let t = kendall_tau(&y, &yhat).unwrap();
        assert!((t - 4.0 / 25.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mse_values() {
        assert_eq!(mse(&[0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(mse(&[0.3, 0.2], &[0.3, 0.2]).unwrap(), 0.0);
        assert!(mse(&[], &[]).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ranks() {
        let y = [0.9, 0.8, 0.7];
        assert_eq!(rank_table(&y, &y).unwrap(), vec![(1, 1), (2, 2), (3, 3)]);
        assert_eq!(rank_table(&y, &[0.1, 0.2, 0.3]).unwrap(), vec![(1, 3), (2, 2), (3, 1)]);
        assert_eq!(rank_table(&[0.9, 0.9], &[0.5, 0.6]).unwrap(), vec![(1, 2), (2, 1)]);
        let mut buf = Vec::new();
        write_rank_csv(&mut buf, &[(1, 2), (2, 1)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "true_rank,predicted_rank\n1,2\n2,1\n");
    }
}
