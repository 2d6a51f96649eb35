//! Maximum-weight perfect matching on a square matrix.

use ndarray::Array2;

/// Permutation `sigma` maximizing `sum_i m[i, sigma(i)]`. Non-square input
/// is padded with zeros; the returned flag reports padding. Entries of
/// `sigma` that point at padded columns are `None`.
pub fn hungarian_assign(m: &Array2<f64>) -> (Vec<Option<usize>>, bool) {
    let (rows, cols) = m.dim();
    let n = rows.max(cols);
    let padded = rows != cols;
    if n == 0 {
        return (Vec::new(), padded);
    }
    let max = m.iter().copied().fold(0.0f64, f64::max);
    // Minimize cost = max - weight.
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            max - m[[i, j]]
        } else {
            max
        }
    };
    let sigma = solve_min(n, cost);
    let out = (0..rows)
        .map(|i| Some(sigma[i]).filter(|&j| j < cols))
        .collect();
    (out, padded)
}

/// Square assignment; panics on non-square input.
pub fn hungarian_square(m: &Array2<f64>) -> Vec<usize> {
    assert_eq!(m.nrows(), m.ncols(), "square matrix required");
    hungarian_assign(m).0.into_iter().map(|j| j.expect("square")).collect()
}

/// Shortest augmenting path with row and column potentials, O(n^3).
fn solve_min(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let inf = f64::INFINITY;
    // 1-based arrays; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0; n];
    for j in 1..=n {
        sigma[owner[j] - 1] = j - 1;
    }
    sigma
}
