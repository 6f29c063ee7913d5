//! Tie-corrected Kendall's tau (tau-b) in O(n log n).

use crate::error::{Error, Result};

/// Number of tied pairs implied by runs of equal values in a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for i in 1..sorted.len() {
        if sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort of `v`, returning the number of inversions.
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        sort_count_swaps(l, bl) + sort_count_swaps(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
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
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b of paired samples (Knight's algorithm).
pub fn kendall_tau_pairs(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Argument("Kendall's tau needs equally long columns".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData { have: n, need: 2 });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let xy: Vec<(f64, f64)> = idx.iter().map(|&i| (x[i], y[i])).collect();
    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tied_pairs(&xs);
    let n3 = tied_pairs(&xy);
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);
    if n1 == n0 || n2 == n0 {
        return Err(Error::Degenerate("Kendall's tau undefined for a constant column".into()));
    }
    let num = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let den = ((n0 - n1) as f64).sqrt() * ((n0 - n2) as f64).sqrt();
    Ok((num / den).clamp(-1.0, 1.0))
}

pub fn empirical_kendall_tau(sample: &super::PseudoSample) -> Result<f64> {
    kendall_tau_pairs(&sample.u, &sample.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut conc, mut disc, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in i + 1..n {
                let dx = x[i] - x[j];
                let dy = y[i] - y[j];
                if dx == 0.0 && dy == 0.0 {
                    continue;
                } else if dx == 0.0 {
                    tx += 1.0;
                } else if dy == 0.0 {
                    ty += 1.0;
                } else if dx * dy > 0.0 {
                    conc += 1.0;
                } else {
                    disc += 1.0;
                }
            }
        }
        (conc - disc) / ((conc + disc + tx) * (conc + disc + ty)).sqrt()
    }

    #[test]
    fn extremes() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau_pairs(&x, &x).unwrap(), 1.0);
        assert_eq!(kendall_tau_pairs(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn five_points_match_pair_count() {
        let x = [0.3, 0.1, 0.9, 0.5, 0.7];
        let y = [0.2, 0.4, 0.8, 0.1, 0.95];
        assert!((kendall_tau_pairs(&x, &y).unwrap() - brute_force(&x, &y)).abs() < 1e-14);
    }

    #[test]
    fn constant_column_is_degenerate() {
        assert!(matches!(
            kendall_tau_pairs(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
    }

    proptest! {
        #[test]
        fn matches_quadratic_oracle_with_ties(
            pairs in proptest::collection::vec((0u8..6, 0u8..6), 3..60)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let fast = kendall_tau_pairs(&x, &y);
            let slow = brute_force(&x, &y);
            match fast {
                Ok(t) => prop_assert!((t - slow).abs() < 1e-12, "{} vs {}", t, slow),
                Err(_) => prop_assert!(slow.is_nan()),
            }
        }
    }
}
