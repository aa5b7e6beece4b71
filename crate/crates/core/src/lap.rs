// SPDX-License-Identifier: Apache-2.0

//! Exact linear assignment.
//!
//! Rectangular problems (`rows <= cols`) are padded with zero-cost dummy
//! rows and solved with the shortest augmenting path method of Jonker and
//! Volgenant in its dense O(n^3) form. Among all optimal assignments the
//! lexicographically smallest row-to-column mapping is returned, which makes
//! fitted artifacts reproducible in the presence of duplicated columns.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense non-negative cost table, rows are sources and columns are targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> CostMatrix<T> {
    /// Builds a matrix from row-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::Input("cost matrix needs at least one row".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if rows > cols {
            return Err(Error::Shape(format!(
                "more rows than columns ({rows} > {cols})"
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite cost at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        if let Some(pos) = data.iter().position(|&x| x < T::zero()) {
            return Err(Error::Input(format!(
                "negative cost at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("ragged cost rows".into()));
        }
        Self::new(n, m, rows.iter().flatten().copied().collect())
    }

    /// Builds a matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    /// Copy of the matrix with column `k` deleted.
    pub fn without_column(&self, k: usize) -> Result<Self> {
        if k >= self.cols {
            return Err(Error::Index {
                index: k,
                len: self.cols,
            });
        }
        let data = (0..self.rows)
            .flat_map(|i| (0..self.cols).filter(move |&j| j != k).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Self::new(self.rows, self.cols - 1, data)
    }

    fn max_entry(&self) -> T {
        self.data.iter().copied().fold(T::zero(), T::max)
    }
}

/// Injective row-to-column map together with its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    /// `mapping[row]` is the column assigned to `row`.
    pub mapping: Vec<usize>,
    pub total_cost: T,
}

/// Globally optimal assignment; ties resolve to the lexicographically
/// smallest mapping.
pub fn solve_assignment<T: Scalar>(cost: &CostMatrix<T>) -> Assignment<T> {
    let n = cost.rows;
    let m = cost.cols;
    let entry = |i: usize, j: usize| if i < n { cost.get(i, j) } else { T::zero() };

    // 1-based potentials and matching, index 0 is the virtual root.
    let inf = T::infinity();
    let mut u = vec![T::zero(); m + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![inf; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=m {
        row_of[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = entry(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] = u[row_of[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
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

    // Back to 0-based square matching.
    let mut col_of = vec![0usize; m];
    let mut owner = vec![0usize; m];
    for j in 1..=m {
        col_of[row_of[j] - 1] = j - 1;
        owner[j - 1] = row_of[j] - 1;
    }

    let scale = T::one().max(cost.max_entry());
    let tol = T::epsilon() * T::of_usize(16 * (m + 1)) * scale;
    let reduced = |i: usize, j: usize| entry(i, j) - u[i + 1] - v[j + 1];
    lexicographic_minimum(n, m, &reduced, tol, &mut col_of, &mut owner);

    col_of.truncate(n);
    let total_cost = col_of
        .iter()
        .enumerate()
        .map(|(i, &j)| cost.get(i, j))
        .sum();
    Assignment {
        mapping: col_of,
        total_cost,
    }
}

/// Rewrites an optimal square matching into the lexicographically smallest
/// perfect matching of the tight subgraph `reduced(i, j) <= tol`.
fn lexicographic_minimum<T: Scalar>(
    real_rows: usize,
    m: usize,
    reduced: &impl Fn(usize, usize) -> T,
    tol: T,
    col_of: &mut [usize],
    owner: &mut [usize],
) {
    let mut fixed_col = vec![false; m];
    let mut fixed_row = vec![false; m];
    let mut via_row = vec![usize::MAX; m];
    let mut queue = Vec::with_capacity(m);

    for i in 0..real_rows {
        for j in 0..m {
            if fixed_col[j] || reduced(i, j) > tol {
                continue;
            }
            if col_of[i] == j {
                break;
            }
            // Row `r` hands `j` to `i`; look for an alternating path that
            // ends in `i`'s current column.
            let target = col_of[i];
            let r = owner[j];
            via_row.iter_mut().for_each(|x| *x = usize::MAX);
            queue.clear();
            queue.push(r);
            via_row[r] = i;
            let mut head = 0;
            let mut found = None;
            'bfs: while head < queue.len() {
                let x = queue[head];
                head += 1;
                for c in 0..m {
                    if fixed_col[c] || c == j || reduced(x, c) > tol {
                        continue;
                    }
                    if c == target {
                        found = Some(x);
                        break 'bfs;
                    }
                    let y = owner[c];
                    if c == col_of[x] || fixed_row[y] || via_row[y] != usize::MAX {
                        continue;
                    }
                    via_row[y] = x;
                    queue.push(y);
                }
            }
            if let Some(last) = found {
                let mut row = last;
                let mut take = target;
                loop {
                    let give = col_of[row];
                    col_of[row] = take;
                    owner[take] = row;
                    if row == r {
                        break;
                    }
                    take = give;
                    row = via_row[row];
                }
                col_of[i] = j;
                owner[j] = i;
                break;
            }
        }
        fixed_row[i] = true;
        fixed_col[col_of[i]] = true;
    }
}

/// Optimal assignment with column `k` removed; columns in the returned
/// mapping refer to the original matrix.
pub fn solve_without_column_assignment<T: Scalar>(
    cost: &CostMatrix<T>,
    k: usize,
) -> Result<Assignment<T>> {
    let reduced = cost.without_column(k)?;
    let mut sol = solve_assignment(&reduced);
    for c in &mut sol.mapping {
        if *c >= k {
            *c += 1;
        }
    }
    Ok(sol)
}

/// Leave-one-column-out optimal cost `C_k`.
pub fn solve_without_column<T: Scalar>(cost: &CostMatrix<T>, k: usize) -> Result<T> {
    solve_without_column_assignment(cost, k).map(|a| a.total_cost)
}
