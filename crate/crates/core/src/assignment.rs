//! Exact minimum-cost assignment for small square cost matrices.
//!
//! [`hungarian`] is the O(n³) shortest-augmenting-path method with dual
//! potentials. [`assign_lex_min`] adds the deterministic tie-break used for
//! witnesses: among optimal assignments, the lexicographically least.

/// Relative tolerance under which two assignment costs count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Minimum-cost perfect assignment of a square `n × n` row-major matrix.
/// Returns the cost and `assign[row] = column`.
pub fn hungarian(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), n * n, "cost matrix must be square");
    if n == 0 {
        return (0.0, Vec::new());
    }
    // 1-based arrays; column 0 is the virtual start.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[row_of[j] - 1] = j - 1;
    }
    let total = assign
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[r * n + c])
        .sum();
    (total, assign)
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Optimal assignment, ties broken towards the lexicographically least
/// `assign` vector.
pub fn assign_lex_min(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    match n {
        0 => (0.0, Vec::new()),
        1 => (cost[0], vec![0]),
        2 => {
            let straight = cost[0] + cost[3];
            let crossed = cost[1] + cost[2];
            if straight <= crossed || tied(straight, crossed) {
                (straight, vec![0, 1])
            } else {
                (crossed, vec![1, 0])
            }
        }
        _ => lex_fix(cost, n),
    }
}

fn lex_fix(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    let (best, _) = hungarian(cost, n);
    let mut assign = Vec::with_capacity(n);
    let mut free: Vec<usize> = (0..n).collect();
    let mut fixed = 0.0;
    for row in 0..n {
        let rest_rows = n - row - 1;
        let mut chosen = None;
        for (slot, &col) in free.iter().enumerate() {
            let head = fixed + cost[row * n + col];
            let cols: Vec<usize> = free.iter().copied().filter(|&c| c != col).collect();
            let sub: Vec<f64> = (row + 1..n)
                .flat_map(|r| cols.iter().map(move |&c| cost[r * n + c]))
                .collect();
            let (tail, _) = hungarian(&sub, rest_rows);
            if tied(head + tail, best) || head + tail < best {
                chosen = Some((slot, col, head));
                break;
            }
        }
        // The optimum is always reachable; fall back to the solver if float
        // noise rejected every column.
        let Some((slot, col, head)) = chosen else {
            return hungarian(cost, n);
        };
        assign.push(col);
        free.remove(slot);
        fixed = head;
    }
    let total = assign
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[r * n + c])
        .sum();
    (total, assign)
}
