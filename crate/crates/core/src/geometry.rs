// SPDX-License-Identifier: Apache-2.0

//! Positive-spanning tests used to certify polyhedron (un)boundedness.
//!
//! A polyhedron `{Z : <Z, a_k> <= b_k}` is bounded iff the normals `a_k`
//! positively span the space, i.e. no direction `v != 0` has
//! `<v, a_k> <= 0` for every `k`.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Relative optimum below which the witness program counts as zero.
const LP_TOL: f64 = 1e-9;
const RAY_SEED: u64 = 0x5eed_0ff5;
/// Number of sampled directions for the ray falsification test.
pub const RAY_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum Spanning {
    /// The vectors positively span the space.
    Yes,
    /// `<v, a_k> <= tol` for all `k`, with the witness direction `v`.
    No(Vec<f64>),
    Unknown,
}

/// Witness check: `v` is a recession direction of the polyhedron.
pub fn is_recession_direction(v: &[f64], normals: &[Vec<f64>], tol: f64) -> bool {
    normals
        .iter()
        .all(|a| a.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() <= tol)
}

/// Decides whether `normals` positively span `R^d`.
///
/// One and two dimensions use exact sign and angular-gap tests. From three
/// dimensions on, a linear program maximizes `-sum_k <a_k, v>` over the box
/// `|v_i| <= 1` subject to `<a_k, v> <= 0`; a positive optimum is a witness,
/// and a zero optimum reduces the question to the rank of the normals.
/// `hints` are tried as witnesses first.
pub fn positive_spanning(normals: &[Vec<f64>], d: usize, hints: &[Vec<f64>], tol: f64) -> Spanning {
    let nonzero: Vec<&Vec<f64>> = normals
        .iter()
        .filter(|a| a.iter().any(|x| x.abs() > tol))
        .collect();
    for h in hints {
        if h.iter().any(|x| x.abs() > 0.0) && is_recession_direction(h, normals, tol) {
            return Spanning::No(h.clone());
        }
    }
    if nonzero.len() <= d {
        if let Some(v) = null_vector(&nonzero, d) {
            return Spanning::No(v);
        }
        return match sampled_witness(normals, d, tol) {
            Some(v) => Spanning::No(v),
            None => lp_spanning(&nonzero, normals, d, tol),
        };
    }
    match d {
        1 => {
            let pos = nonzero.iter().any(|a| a[0] > tol);
            let neg = nonzero.iter().any(|a| a[0] < -tol);
            match (pos, neg) {
                (true, true) => Spanning::Yes,
                (true, false) => Spanning::No(vec![-1.0]),
                _ => Spanning::No(vec![1.0]),
            }
        }
        2 => {
            let mut angles: Vec<f64> = nonzero.iter().map(|a| a[1].atan2(a[0])).collect();
            angles.sort_by(f64::total_cmp);
            let mut gap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
            let mut start = angles[angles.len() - 1];
            for w in angles.windows(2) {
                if w[1] - w[0] > gap {
                    gap = w[1] - w[0];
                    start = w[0];
                }
            }
            if gap < std::f64::consts::PI - 1e-12 {
                return Spanning::Yes;
            }
            let mid = start + gap / 2.0;
            let v = vec![mid.cos(), mid.sin()];
            if is_recession_direction(&v, normals, tol) {
                Spanning::No(v)
            } else {
                Spanning::Unknown
            }
        }
        _ => lp_spanning(&nonzero, normals, d, tol),
    }
}

fn lp_spanning(nonzero: &[&Vec<f64>], normals: &[Vec<f64>], d: usize, tol: f64) -> Spanning {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..d)
        .map(|i| {
            let c: f64 = -nonzero.iter().map(|a| a[i]).sum::<f64>();
            problem.add_var(c, (-1.0, 1.0))
        })
        .collect();
    for a in nonzero {
        let row: Vec<_> = vars.iter().zip(a.iter()).map(|(&v, &x)| (v, x)).collect();
        problem.add_constraint(row, ComparisonOp::Le, 0.0);
    }
    let solution = match problem.solve().ok().and_then(|s| s.into_solution().ok()) {
        Some(s) => s,
        None => return Spanning::Unknown,
    };
    let scale = nonzero
        .iter()
        .map(|a| a.iter().map(|x| x.abs()).sum::<f64>())
        .fold(1.0, f64::max);
    if solution.objective() > LP_TOL * scale {
        let v: Vec<f64> = vars.iter().map(|&x| solution.var_value(x)).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v: Vec<f64> = v.iter().map(|x| x / len).collect();
        if is_recession_direction(&v, normals, tol.max(LP_TOL * scale)) {
            return Spanning::No(v);
        }
        return Spanning::Unknown;
    }
    match null_vector(nonzero, d) {
        Some(v) => Spanning::No(v),
        None => Spanning::Yes,
    }
}

/// A unit `v` with `<a, v> = 0` for every row, when the rows do not span `R^d`.
fn null_vector(rows: &[&Vec<f64>], d: usize) -> Option<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let scale = m.iter().flatten().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..d {
        if row == m.len() {
            break;
        }
        let piv = (row..m.len()).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= 1e-10 * scale {
            continue;
        }
        m.swap(row, piv);
        let p = m[row][col];
        for x in m[row].iter_mut() {
            *x /= p;
        }
        for r in 0..m.len() {
            if r != row {
                let f = m[r][col];
                if f != 0.0 {
                    let pivot_row = m[row].clone();
                    for (x, p) in m[r].iter_mut().zip(&pivot_row) {
                        *x -= f * p;
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free = (0..d).find(|c| !pivots.contains(c))?;
    let mut v = vec![0.0; d];
    v[free] = 1.0;
    for (r, &pc) in pivots.iter().enumerate() {
        v[pc] = -m[r][free];
    }
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Some(v.into_iter().map(|x| x / len).collect())
}

fn sampled_witness(normals: &[Vec<f64>], d: usize, tol: f64) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(RAY_SEED);
    (0..RAY_SAMPLES).find_map(|_| {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let len = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v: Vec<f64> = g.iter().map(|x| x / len).collect();
        is_recession_direction(&v, normals, tol).then_some(v)
    })
}
