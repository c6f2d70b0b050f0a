//! One-to-one overlay allocation of U2N links onto free subchannels.

use super::{link_valid_prob, Assignment, ChannelGains, PowerVector, RrmProblem};

/// Maximum-weight assignment of rows to columns on a rectangular utility
/// matrix (Hungarian method on the padded square cost matrix). Returns the
/// column chosen for each row, `None` for rows left out.
pub fn max_weight_assignment(utility: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = utility.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = utility[0].len();
    let n = rows.max(cols);
    let top = utility.iter().flatten().fold(0.0f64, |m, &u| m.max(u));
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            top - utility[i][j]
        } else {
            top
        }
    };

    // Shortest augmenting path formulation, 1-based with a sentinel column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; rows];
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i <= rows && j <= cols {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

/// Assigns the U2N links in `u2n` one-to-one to free subchannels, maximizing
/// the weighted sum of interference-free expected valid transmissions at
/// `p_max`. Surplus links stay unassigned.
pub fn allocate_u2n_overlay(problem: &RrmProblem, gains: &ChannelGains, u2n: &[usize], weights: &[f64]) -> Assignment {
    let n = problem.links.len();
    let mut assignment = Assignment::empty(n);
    let free: Vec<usize> = (0..problem.subchannels()).filter(|&j| problem.is_free(j)).collect();
    if free.is_empty() || u2n.is_empty() {
        return assignment;
    }
    let powers = PowerVector::uniform(n, problem.p_max_mw());
    let empty = Assignment::empty(n);
    let utility: Vec<Vec<f64>> = u2n
        .iter()
        .map(|&i| free.iter().map(|&j| weights[i] * link_valid_prob(problem, gains, &empty, &powers, i, j)).collect())
        .collect();
    for (row, col) in max_weight_assignment(&utility).into_iter().enumerate() {
        if let Some(c) = col {
            assignment.channel_of[u2n[row]] = Some(free[c]);
        }
    }
    assignment
}
