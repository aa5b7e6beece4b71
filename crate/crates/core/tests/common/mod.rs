// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code, clippy::needless_range_loop)]

use microlp::{ComparisonOp, OptimizationDirection, Problem};

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Min-cost perfect matching of every row (rows <= cols) by successive
/// shortest paths on the residual graph with Johnson potentials.
/// Returns the optimal total and the row-to-column mapping.
pub fn oracle_lap(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    let m = cost[0].len();
    assert!(n <= m);
    // Nodes: rows 0..n, columns n..n+m.
    let total_nodes = n + m;
    let mut pot = vec![0.0f64; total_nodes];
    let mut col_of_row: Vec<Option<usize>> = vec![None; n];
    let mut row_of_col: Vec<Option<usize>> = vec![None; m];
    for source in 0..n {
        let mut dist = vec![f64::INFINITY; total_nodes];
        let mut prev = vec![usize::MAX; total_nodes];
        let mut done = vec![false; total_nodes];
        dist[source] = 0.0;
        let end = loop {
            let u = (0..total_nodes)
                .filter(|&v| !done[v] && dist[v].is_finite())
                .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
                .expect("a free column is always reachable");
            done[u] = true;
            if u >= n {
                let c = u - n;
                match row_of_col[c] {
                    None => break u,
                    Some(r) => {
                        // Matched edge col -> row carries cost -c(r, c).
                        let w = -cost[r][c] + pot[u] - pot[r];
                        let cand = dist[u] + w.max(0.0);
                        if !done[r] && cand < dist[r] {
                            dist[r] = cand;
                            prev[r] = u;
                        }
                    }
                }
            } else {
                for c in 0..m {
                    if col_of_row[u] == Some(c) {
                        continue;
                    }
                    let v = n + c;
                    let w = cost[u][c] + pot[u] - pot[v];
                    let cand = dist[u] + w.max(0.0);
                    if !done[v] && cand < dist[v] {
                        dist[v] = cand;
                        prev[v] = u;
                    }
                }
            }
        };
        let bound = dist[end];
        for v in 0..total_nodes {
            pot[v] += dist[v].min(bound);
        }
        // Flip the alternating path source -> ... -> end.
        let mut v = end;
        loop {
            let r = prev[v];
            let old = col_of_row[r];
            col_of_row[r] = Some(v - n);
            row_of_col[v - n] = Some(r);
            if r == source {
                break;
            }
            v = n + old.expect("interior rows are matched");
        }
    }
    let mapping: Vec<usize> = col_of_row
        .into_iter()
        .map(|c| c.expect("matched"))
        .collect();
    let total = mapping.iter().enumerate().map(|(i, &c)| cost[i][c]).sum();
    (total, mapping)
}

/// Optimal value of the assignment linear program.
pub fn lp_assignment_value(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let m = cost[0].len();
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let x: Vec<Vec<_>> = (0..n)
        .map(|i| (0..m).map(|j| p.add_var(cost[i][j], (0.0, 1.0))).collect())
        .collect();
    for row in &x {
        p.add_constraint(
            row.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(),
            ComparisonOp::Eq,
            1.0,
        );
    }
    for j in 0..m {
        p.add_constraint(
            (0..n).map(|i| (x[i][j], 1.0)).collect::<Vec<_>>(),
            ComparisonOp::Le,
            1.0,
        );
    }
    p.solve().unwrap().into_solution().unwrap().objective()
}
