//! Brute-force reference solvers used only by test suites.
//!
//! Nothing here shares code with the production solve paths: the
//! enumeration oracle factors its linear systems with its own Gaussian
//! elimination, so agreement between the two routes is meaningful
//! evidence.

use dset_core::qp::QpProblem;
use dset_core::rng::Rng;
use dset_core::Matrix;

/// Exhaustive active-set enumeration for small projection programs.
///
/// Tries every subset of inequality rows as a candidate active set (with
/// all equality rows always active), solves the equality-constrained
/// projection by dense elimination, and returns the unique candidate that
/// satisfies the KKT conditions. `None` means no subset is consistent,
/// i.e. the program is infeasible.
pub fn enumerate_projection(problem: &QpProblem) -> Option<Vec<f64>> {
    let y = problem.target();
    let (a, b) = problem.ineq();
    let (e, d) = problem.eq();
    let m = a.rows();
    assert!(m <= 20, "enumeration oracle is for small problems");

    for mask in 0u32..(1u32 << m) {
        let mut normals: Vec<&[f64]> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        let mut ineq_slots: Vec<usize> = Vec::new();
        for j in 0..e.rows() {
            normals.push(e.row(j));
            rhs.push(d[j]);
        }
        for i in 0..m {
            if mask & (1 << i) != 0 {
                ineq_slots.push(normals.len());
                normals.push(a.row(i));
                rhs.push(b[i]);
            }
        }

        let x = match solve_projection_subset(y, &normals, &rhs) {
            Some((x, nu)) => {
                // dual feasibility on the inequality slots
                if ineq_slots.iter().any(|&s| nu[s] < -1e-9) {
                    continue;
                }
                x
            }
            None => continue,
        };

        // primal feasibility of every constraint
        let feasible = (0..m).all(|i| dot(a.row(i), &x) >= b[i] - 1e-8)
            && (0..e.rows()).all(|j| (dot(e.row(j), &x) - d[j]).abs() <= 1e-8);
        if feasible {
            return Some(x);
        }
    }
    None
}

/// Solves `min ½‖x − y‖²` subject to `normals·x = rhs` through the normal
/// equations, by Gaussian elimination with partial pivoting. Returns the
/// point and the multipliers, or `None` when the normals are dependent.
fn solve_projection_subset(
    y: &[f64],
    normals: &[&[f64]],
    rhs: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let s = normals.len();
    if s == 0 {
        return Some((y.to_vec(), Vec::new()));
    }
    // gram system (N N^T) nu = rhs - N y
    let mut aug = vec![0.0; s * (s + 1)];
    for i in 0..s {
        for j in 0..s {
            aug[i * (s + 1) + j] = dot(normals[i], normals[j]);
        }
        aug[i * (s + 1) + s] = rhs[i] - dot(normals[i], y);
    }
    let nu = gauss_solve(&mut aug, s)?;
    let mut x = y.to_vec();
    for (i, n) in normals.iter().enumerate() {
        for (xk, nk) in x.iter_mut().zip(*n) {
            *xk += nu[i] * nk;
        }
    }
    Some((x, nu))
}

/// Row-major augmented system `[A | b]` of size `n × (n+1)`; returns the
/// solution or `None` when a pivot collapses.
fn gauss_solve(aug: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let w = n + 1;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                aug[r1 * w + col]
                    .abs()
                    .partial_cmp(&aug[r2 * w + col].abs())
                    .expect("finite entries")
            })
            .expect("nonempty range");
        if aug[pivot_row * w + col].abs() < 1e-10 {
            return None;
        }
        if pivot_row != col {
            for k in 0..w {
                aug.swap(col * w + k, pivot_row * w + k);
            }
        }
        let pivot = aug[col * w + col];
        for row in col + 1..n {
            let factor = aug[row * w + col] / pivot;
            for k in col..w {
                aug[row * w + k] -= factor * aug[col * w + k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut v = aug[row * w + n];
        for k in row + 1..n {
            v -= aug[row * w + k] * x[k];
        }
        x[row] = v / aug[row * w + row];
    }
    Some(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random projection problem with dim <= 4 and <= 6 inequalities at unit
/// row scale; roughly 80% are feasible by construction (offsets derived
/// from a witness point), the rest may be inconsistent.
pub fn random_projection_problem(rng: &mut Rng) -> QpProblem {
    let dim = 1 + (rng.next_u64() % 4) as usize;
    let m = 1 + (rng.next_u64() % 6) as usize;
    let with_eq = dim >= 2 && rng.uniform() < 0.25;

    fn unit_row(rng: &mut Rng, a: &mut Matrix, i: usize, dim: usize) {
        loop {
            let row: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-3 {
                for (j, v) in row.iter().enumerate() {
                    a.set(i, j, v / norm);
                }
                return;
            }
        }
    }
    let mut a = Matrix::zeros(m, dim);
    for i in 0..m {
        unit_row(rng, &mut a, i, dim);
    }
    let b: Vec<f64> = if rng.uniform() < 0.8 {
        let witness: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        (0..m)
            .map(|i| {
                let ax: f64 = a.row(i).iter().zip(&witness).map(|(r, w)| r * w).sum();
                ax - rng.uniform() * 2.0
            })
            .collect()
    } else {
        (0..m).map(|_| 2.0 * rng.normal()).collect()
    };

    let (e, d) = if with_eq {
        let mut e = Matrix::zeros(1, dim);
        unit_row(rng, &mut e, 0, dim);
        let witness: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let ex: f64 = e.row(0).iter().zip(&witness).map(|(r, w)| r * w).sum();
        (e, vec![ex])
    } else {
        (Matrix::zeros(0, dim), vec![])
    };

    let target: Vec<f64> = (0..dim).map(|_| 3.0 * rng.normal()).collect();
    QpProblem::new(target, a, b, e, d).expect("consistent dimensions")
}
