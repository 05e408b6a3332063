//! Constraint sets as projection operators.
//!
//! A constraint set is anything we can project onto in Euclidean norm. The
//! squared distance to the set and its gradient `θ − P(θ)` are derived from
//! the projection, which is all downstream samplers and optimizers need.
//! Closed-form projections are used where they exist (balls, spheres, boxes,
//! the probability simplex); polyhedral sets go through the dual active-set
//! quadratic program in [`crate::qp`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::qp::QpProblem;

/// Distances below this are treated as "on the set" by the unsquared
/// subgradient, which is exactly the numerical hazard the unsquared
/// comparator exists to demonstrate.
pub const NEAR_BOUNDARY_EPS: f64 = 1e-12;

/// A closed constraint set with a computable Euclidean projection.
///
/// All kinds except `Sphere` are convex. The sphere is closed but
/// non-convex; its projection is single-valued away from the center and a
/// fixed selection is made at the center itself.
#[derive(Debug, Clone)]
pub enum ConstraintSet {
    /// Euclidean ball `{x : ‖x − center‖ ≤ radius}`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Sphere `{x : ‖x − center‖ = radius}` (non-convex).
    Sphere { center: Vec<f64>, radius: f64 },
    /// Axis-aligned box `{x : lower ≤ x ≤ upper}`; infinite bounds allowed.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Probability simplex `{x ≥ 0, Σx = 1}` in the given dimension.
    Simplex { dim: usize },
    /// Halfspace intersection `{x : A x ≥ b, E x = d}`, validated nonempty
    /// at construction.
    Polyhedron(Polyhedron),
    /// Stochastic-dominance cone for an `rows × cols` table: cumulative row
    /// sums ordered across consecutive rows, entries nonnegative.
    StochasticDominance { rows: usize, cols: usize },
}

/// Validated polyhedron `A x ≥ b`, `E x = d`.
#[derive(Debug, Clone)]
pub struct Polyhedron {
    a: Matrix,
    b: Vec<f64>,
    e: Matrix,
    d: Vec<f64>,
}

/// Result of projecting a point onto a constraint set.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// Nearest point of the set.
    pub point: Vec<f64>,
    /// Euclidean distance `‖θ − point‖`.
    pub distance: f64,
    /// False only where the projection is multi-valued and a selection was
    /// made (the sphere center).
    pub unique: bool,
}

/// Subgradient of the unsquared distance, with the near-boundary hazard
/// surfaced as a flag.
#[derive(Debug, Clone)]
pub struct UnsquaredSubgrad {
    /// `(θ − P(θ)) / ‖θ − P(θ)‖` outside the set, zero on it.
    pub direction: Vec<f64>,
    /// Set when `0 < dist < 1e−12`: the subgradient was zeroed because the
    /// normalization would be numerically meaningless.
    pub near_boundary: bool,
}

impl ConstraintSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter("ball radius must be positive and finite"));
        }
        Ok(ConstraintSet::Ball { center, radius })
    }

    pub fn sphere(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter("sphere radius must be positive and finite"));
        }
        Ok(ConstraintSet::Sphere { center, radius })
    }

    /// Unit sphere centered at the origin.
    pub fn unit_sphere(dim: usize) -> Self {
        ConstraintSet::Sphere { center: vec![0.0; dim], radius: 1.0 }
    }

    /// Unit ball centered at the origin.
    pub fn unit_ball(dim: usize) -> Self {
        ConstraintSet::Ball { center: vec![0.0; dim], radius: 1.0 }
    }

    pub fn box_bounds(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidParameter("box requires lower <= upper componentwise"));
        }
        Ok(ConstraintSet::Box { lower, upper })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("simplex dimension must be positive"));
        }
        Ok(ConstraintSet::Simplex { dim })
    }

    /// Builds a polyhedron and verifies it is nonempty with one feasibility
    /// solve, so projection never fails later.
    pub fn polyhedron(a: Matrix, b: Vec<f64>, e: Matrix, d: Vec<f64>) -> Result<Self> {
        let n = a.cols();
        let probe = QpProblem::new(vec![0.0; n], a.clone(), b.clone(), e.clone(), d.clone())?;
        probe.solve().map_err(|err| match err {
            Error::Infeasible { conflicting } => Error::Infeasible { conflicting },
            other => other,
        })?;
        Ok(ConstraintSet::Polyhedron(Polyhedron { a, b, e, d }))
    }

    pub fn stochastic_dominance(rows: usize, cols: usize) -> Result<Self> {
        if rows < 2 || cols < 1 {
            return Err(Error::InvalidParameter(
                "stochastic dominance needs at least 2 rows and 1 column",
            ));
        }
        Ok(ConstraintSet::StochasticDominance { rows, cols })
    }

    /// Ambient dimension of points this set lives in.
    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::Ball { center, .. } | ConstraintSet::Sphere { center, .. } => {
                center.len()
            }
            ConstraintSet::Box { lower, .. } => lower.len(),
            ConstraintSet::Simplex { dim } => *dim,
            ConstraintSet::Polyhedron(p) => p.a.cols(),
            ConstraintSet::StochasticDominance { rows, cols } => rows * cols,
        }
    }

    /// True for every kind except the sphere.
    pub fn is_convex(&self) -> bool {
        !matches!(self, ConstraintSet::Sphere { .. })
    }

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: theta.len() });
        }
        Ok(())
    }

    /// Euclidean projection of `theta` onto the set.
    pub fn project(&self, theta: &[f64]) -> Result<ProjectionResult> {
        self.check_dim(theta)?;
        let (point, unique) = match self {
            ConstraintSet::Ball { center, radius } => {
                let offset = linalg::sub(theta, center);
                let r = linalg::norm2(&offset);
                if r <= *radius {
                    (theta.to_vec(), true)
                } else {
                    let scale = radius / r;
                    let point = center
                        .iter()
                        .zip(&offset)
                        .map(|(c, o)| c + scale * o)
                        .collect();
                    (point, true)
                }
            }
            ConstraintSet::Sphere { center, radius } => {
                let offset = linalg::sub(theta, center);
                let r = linalg::norm2(&offset);
                if r == 0.0 {
                    // multi-valued at the center; fixed selection along e1
                    let mut point = center.clone();
                    point[0] += radius;
                    (point, false)
                } else {
                    let scale = radius / r;
                    let point = center
                        .iter()
                        .zip(&offset)
                        .map(|(c, o)| c + scale * o)
                        .collect();
                    (point, true)
                }
            }
            ConstraintSet::Box { lower, upper } => {
                let point = theta
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(t, (l, u))| t.max(*l).min(*u))
                    .collect();
                (point, true)
            }
            ConstraintSet::Simplex { .. } => (project_simplex(theta), true),
            ConstraintSet::Polyhedron(p) => {
                let problem =
                    QpProblem::new(theta.to_vec(), p.a.clone(), p.b.clone(), p.e.clone(), p.d.clone())?;
                (problem.solve()?.x, true)
            }
            ConstraintSet::StochasticDominance { rows, cols } => {
                let problem = dominance_qp(*rows, *cols, theta.to_vec())?;
                (problem.solve()?.x, true)
            }
        };
        let distance = linalg::dist2(theta, &point);
        Ok(ProjectionResult { point, distance, unique })
    }

    /// Gradient of `½ dist(θ, Θ)²`, which is `θ − P(θ)`. Zero on the set.
    pub fn dist_sq_grad(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let proj = self.project(theta)?;
        Ok(linalg::sub(theta, &proj.point))
    }

    /// Squared distance `dist(θ, Θ)²`.
    pub fn dist_sq(&self, theta: &[f64]) -> Result<f64> {
        let proj = self.project(theta)?;
        Ok(proj.distance * proj.distance)
    }

    /// Subgradient of the unsquared distance: the unit outward normal
    /// `(θ − P(θ))/‖θ − P(θ)‖` off the set, zero on it. Within `1e−12` of
    /// the boundary the direction is zeroed and flagged; the jump at the
    /// boundary is the instability the squared penalty avoids.
    pub fn unsquared_dist_subgrad(&self, theta: &[f64]) -> Result<UnsquaredSubgrad> {
        let proj = self.project(theta)?;
        if proj.distance == 0.0 {
            return Ok(UnsquaredSubgrad { direction: vec![0.0; theta.len()], near_boundary: false });
        }
        if proj.distance < NEAR_BOUNDARY_EPS {
            return Ok(UnsquaredSubgrad { direction: vec![0.0; theta.len()], near_boundary: true });
        }
        let direction = theta
            .iter()
            .zip(&proj.point)
            .map(|(t, p)| (t - p) / proj.distance)
            .collect();
        Ok(UnsquaredSubgrad { direction, near_boundary: false })
    }

    /// Membership test up to the feasibility tolerance used by projections.
    pub fn contains(&self, theta: &[f64], tol: f64) -> Result<bool> {
        Ok(self.project(theta)?.distance <= tol)
    }

    /// Halfspace description `(A, b)` with `A x ≥ b` for the dominance cone;
    /// exposed so oracles can check residuals row by row.
    pub fn dominance_halfspaces(rows: usize, cols: usize) -> (Matrix, Vec<f64>) {
        dominance_rows(rows, cols)
    }
}

/// Euclidean projection onto the probability simplex by sorting and
/// thresholding. O(n log n) and exact, cross-validated against the
/// quadratic-program route in tests.
fn project_simplex(theta: &[f64]) -> Vec<f64> {
    let mut sorted = theta.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite coordinates"));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    let mut k = 0usize;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
            k = i + 1;
        }
    }
    debug_assert!(k > 0);
    theta.iter().map(|&t| (t - tau).max(0.0)).collect()
}

/// Inequality rows for the stochastic-dominance cone: for every pair of
/// consecutive rows `i, i+1` and every column prefix `j`, the cumulative sum
/// of row `i+1` dominates that of row `i`; plus entrywise nonnegativity.
fn dominance_rows(rows: usize, cols: usize) -> (Matrix, Vec<f64>) {
    let dim = rows * cols;
    let m = (rows - 1) * cols + dim;
    let mut a = Matrix::zeros(m, dim);
    let mut row = 0usize;
    for i in 0..rows - 1 {
        for j in 0..cols {
            for k in 0..=j {
                a.set(row, (i + 1) * cols + k, 1.0);
                a.set(row, i * cols + k, -1.0);
            }
            row += 1;
        }
    }
    for t in 0..dim {
        a.set(row, t, 1.0);
        row += 1;
    }
    (a, vec![0.0; m])
}

fn dominance_qp(rows: usize, cols: usize, target: Vec<f64>) -> Result<QpProblem> {
    let (a, b) = dominance_rows(rows, cols);
    QpProblem::with_ineq(target, a, b)
}
