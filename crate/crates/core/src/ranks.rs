//! Rank statistics: average ranks, rank correlations and Chatterjee's
//! coefficient.

/// Ranks `1..=n` with ties sharing their average rank; also reports whether
/// any tie occurred.
pub fn average_ranks(x: &[f64]) -> (Vec<f64>, bool) {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = false;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        if j - i > 1 {
            ties = true;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    (ranks, ties)
}

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Spearman's rho as the Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x).0, &average_ranks(y).0)
}

fn tie_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
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

// merge sort counting inversions (pairs out of order)
fn sort_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps =
        sort_count(&mut v[..mid], &mut buf[..mid]) + sort_count(&mut v[mid..], &mut buf[mid..]);
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

/// Kendall's tau-b in `O(n log n)` (Knight's algorithm); equals tau-a
/// without ties.
pub fn kendall(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let total = (n as u64) * (n as u64 - 1) / 2;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let x_ties = tie_pairs(&xs);
    let joint_ties = tie_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let discordant = sort_count(&mut ys, &mut buf);
    let y_ties = tie_pairs(&ys);
    let num =
        total as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * discordant as f64;
    let den = ((total - x_ties) as f64).sqrt() * ((total - y_ties) as f64).sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Chatterjee's `xi_n = 1 - 3 sum |r_{i+1} - r_i| / (n^2 - 1)`, with `r` the
/// ranks of `y` after ordering the pairs by `x` (no-ties form).
pub fn chatterjee_xi(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let (ry, _) = average_ranks(y);
    let sum: f64 = idx.windows(2).map(|w| (ry[w[1]] - ry[w[0]]).abs()).sum();
    let nf = n as f64;
    1.0 - 3.0 * sum / (nf * nf - 1.0)
}
