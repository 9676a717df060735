//! Dense square linear assignment by shortest augmenting paths.
//!
//! Rows are inserted one at a time; each insertion runs a Dijkstra-like
//! search over reduced costs `c[i][j] - u[i] - v[j]` and augments along the
//! cheapest path, keeping the dual potentials feasible. O(n³) overall.
//! Entries equal to `f64::INFINITY` are never selected as long as a finite
//! perfect matching exists.

/// Minimum-cost perfect matching of an `n × n` row-major matrix.
///
/// Returns `row_to_col`. Rows are processed in index order and ties resolve to
/// the lowest column index, so the result is a pure function of the input.
pub(crate) fn solve_square(costs: &[f64], n: usize) -> Vec<usize> {
    debug_assert_eq!(costs.len(), n * n);
    if n == 0 {
        return Vec::new();
    }

    // 1-based arrays with index 0 as the virtual source column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_slack = vec![f64::INFINITY; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        min_slack.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|u| *u = false);

        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let row_costs = &costs[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;

            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row_costs[j - 1] - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }

            assert!(
                delta.is_finite(),
                "assignment matrix has no finite perfect matching"
            );

            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }

            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }

        // Flip the augmenting path back to the source.
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if col_owner[j] > 0 {
            row_to_col[col_owner[j] - 1] = j - 1;
        }
    }
    row_to_col
}
