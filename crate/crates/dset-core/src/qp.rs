//! Dual active-set solver for projection-form quadratic programs.
//!
//! Solves `min ½‖x − y‖²  s.t.  A x ≥ b,  E x = d`. The Hessian is fixed to
//! the identity because every use in this crate is a Euclidean projection;
//! this keeps the active-set linear algebra small and direct. The method is
//! the dual algorithm of Goldfarb and Idnani specialized to `G = I`: start
//! from the unconstrained minimizer `x = y`, repeatedly activate the most
//! violated constraint, and take combined primal/dual steps that keep the
//! active multipliers nonnegative. Each step increases the dual objective,
//! so the iteration terminates on any consistent system.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Feasibility tolerance used when deciding that a constraint is violated.
const VIOLATION_TOL: f64 = 1e-10;
/// Threshold on dual step directions below which a normal is treated as
/// linearly dependent on the active set.
const DEPENDENCE_TOL: f64 = 1e-12;

/// Projection-form quadratic program `min ½‖x − y‖²` subject to
/// `A x ≥ b` and `E x = d`. Either constraint block may be empty.
#[derive(Debug, Clone)]
pub struct QpProblem {
    target: Vec<f64>,
    a: Matrix,
    b: Vec<f64>,
    e: Matrix,
    d: Vec<f64>,
    /// Cached row norms of `A`, used to normalize violation comparisons.
    row_scale: Vec<f64>,
}

impl QpProblem {
    /// Builds a problem with both constraint blocks.
    pub fn new(target: Vec<f64>, a: Matrix, b: Vec<f64>, e: Matrix, d: Vec<f64>) -> Result<Self> {
        let n = target.len();
        if a.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.cols() });
        }
        if e.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: e.cols() });
        }
        if a.rows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.rows(), got: b.len() });
        }
        if e.rows() != d.len() {
            return Err(Error::DimensionMismatch { expected: e.rows(), got: d.len() });
        }
        let row_scale = (0..a.rows())
            .map(|i| linalg::norm2(a.row(i)).max(f64::MIN_POSITIVE))
            .collect();
        Ok(QpProblem { target, a, b, e, d, row_scale })
    }

    /// Inequality-only problem.
    pub fn with_ineq(target: Vec<f64>, a: Matrix, b: Vec<f64>) -> Result<Self> {
        let n = target.len();
        Self::new(target, a, b, Matrix::zeros(0, n), Vec::new())
    }

    /// Unconstrained problem (projection is the identity).
    pub fn unconstrained(target: Vec<f64>) -> Self {
        let n = target.len();
        QpProblem {
            target,
            a: Matrix::zeros(0, n),
            b: Vec::new(),
            e: Matrix::zeros(0, n),
            d: Vec::new(),
            row_scale: Vec::new(),
        }
    }

    /// Re-targets the same constraint system at a new point. Constraint
    /// blocks are shared unchanged, which is the common pattern when
    /// projecting a moving point onto a fixed set.
    pub fn retarget(&self, target: Vec<f64>) -> Result<Self> {
        if target.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: target.len() });
        }
        let mut p = self.clone();
        p.target = target;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.a.rows()
    }

    pub fn num_eq(&self) -> usize {
        self.e.rows()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn ineq(&self) -> (&Matrix, &[f64]) {
        (&self.a, &self.b)
    }

    pub fn eq(&self) -> (&Matrix, &[f64]) {
        (&self.e, &self.d)
    }

    fn iteration_cap(&self) -> usize {
        50 * (self.num_ineq() + self.num_eq() + self.dim())
    }

    /// True iff the constraint system admits a feasible point. Runs the
    /// solver from the target and reports whether it found a projection.
    pub fn check_feasible(&self) -> bool {
        self.solve().is_ok()
    }

    /// Solves the projection program from scratch.
    pub fn solve(&self) -> Result<QpSolution> {
        self.solve_inner(&[])
    }

    /// Solves the projection program warm-started from a previous active set.
    /// Warm starting is an optimization only; the result is the same
    /// projection that [`QpProblem::solve`] returns.
    pub fn solve_warm(&self, active: &[usize]) -> Result<QpSolution> {
        self.solve_inner(active)
    }

    fn solve_inner(&self, warm: &[usize]) -> Result<QpSolution> {
        let cap = self.iteration_cap().max(64);
        let mut state = ActiveSet::new(self, warm)?;
        let mut iterations = 0usize;

        loop {
            // most violated inactive inequality, lowest index on ties
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..self.num_ineq() {
                if state.is_active(i) {
                    continue;
                }
                let slack = linalg::dot(self.a.row(i), &state.x) - self.b[i];
                let scaled = slack / self.row_scale[i];
                if scaled < -VIOLATION_TOL && worst.map_or(true, |(_, w)| scaled < w) {
                    worst = Some((i, scaled));
                }
            }
            let Some((p, _)) = worst else {
                state.polish(self);
                return Ok(state.into_solution(self, iterations));
            };

            // bring constraint p into the active set through combined
            // primal/dual steps, dropping blocking constraints on the way
            let mut u_p = 0.0;
            loop {
                iterations += 1;
                if iterations > cap {
                    return Err(Error::NonConvergence { what: "qp dual active set", iterations });
                }
                let normal = self.a.row(p);
                let (z, r) = state.directions(self, normal);
                let znorm2 = linalg::dot(&z, &z);
                let slack = linalg::dot(normal, &state.x) - self.b[p];

                // dual step length before an active inequality multiplier hits zero
                let mut t1 = f64::INFINITY;
                let mut blocker = None;
                for (slot, &w) in state.active.iter().enumerate() {
                    if let Handle::Ineq(_) = w {
                        if r[slot] > DEPENDENCE_TOL {
                            let t = state.u[slot] / r[slot];
                            if t < t1 {
                                t1 = t;
                                blocker = Some(slot);
                            }
                        }
                    }
                }
                // primal step length to reach feasibility of p
                let t2 = if znorm2 > DEPENDENCE_TOL { -slack / znorm2 } else { f64::INFINITY };

                let t = t1.min(t2);
                if !t.is_finite() {
                    let mut conflicting = state.ineq_indices();
                    conflicting.push(p);
                    return Err(Error::Infeasible { conflicting });
                }

                if t > 0.0 {
                    linalg::axpy(t, &z, &mut state.x);
                    for (slot, uv) in state.u.iter_mut().enumerate() {
                        *uv -= t * r[slot];
                    }
                    u_p += t;
                }

                if t2 <= t1 {
                    state.push(Handle::Ineq(p), u_p);
                    break;
                }
                state.drop_slot(blocker.expect("finite t1 implies a blocking slot"));
            }
        }
    }
}

/// Constraint handle inside the active set. Equalities are activated up
/// front and never dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Handle {
    Eq(usize),
    Ineq(usize),
}

fn normal(problem: &QpProblem, h: Handle) -> &[f64] {
    match h {
        Handle::Eq(j) => problem.e.row(j),
        Handle::Ineq(i) => problem.a.row(i),
    }
}

fn rhs(problem: &QpProblem, h: Handle) -> f64 {
    match h {
        Handle::Eq(j) => problem.d[j],
        Handle::Ineq(i) => problem.b[i],
    }
}

struct ActiveSet {
    active: Vec<Handle>,
    u: Vec<f64>,
    x: Vec<f64>,
}

impl ActiveSet {
    fn new(problem: &QpProblem, warm: &[usize]) -> Result<Self> {
        let mut state = ActiveSet {
            active: Vec::new(),
            u: Vec::new(),
            x: problem.target.to_vec(),
        };
        for j in 0..problem.num_eq() {
            state.active.push(Handle::Eq(j));
            state.u.push(0.0);
        }
        let mut seeded: Vec<usize> = warm
            .iter()
            .copied()
            .filter(|&i| i < problem.num_ineq())
            .collect();
        seeded.dedup();
        for i in seeded {
            if !state.is_active(i) {
                state.active.push(Handle::Ineq(i));
                state.u.push(0.0);
            }
        }
        // resolve the seeded set exactly, dropping anything that factors
        // badly or picks up a negative multiplier
        loop {
            match state.resolve(problem) {
                Ok(()) => {}
                Err(()) => {
                    // dependent seed; drop the most recently added inequality
                    let last_ineq = state
                        .active
                        .iter()
                        .rposition(|h| matches!(h, Handle::Ineq(_)));
                    match last_ineq {
                        Some(slot) => {
                            state.drop_slot(slot);
                            continue;
                        }
                        None => {
                            // equality rows themselves are dependent
                            return Err(Error::InvalidParameter(
                                "equality constraint rows must be linearly independent",
                            ));
                        }
                    }
                }
            }
            match state.most_negative_ineq() {
                Some(slot) => state.drop_slot(slot),
                None => break,
            }
        }
        Ok(state)
    }

    fn is_active(&self, ineq: usize) -> bool {
        self.active.iter().any(|h| *h == Handle::Ineq(ineq))
    }

    fn ineq_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .active
            .iter()
            .filter_map(|h| match h {
                Handle::Ineq(i) => Some(*i),
                Handle::Eq(_) => None,
            })
            .collect();
        v.sort_unstable();
        v
    }

    /// Gram matrix `N N^T` of the active normals, Cholesky-factored.
    /// Returns `Err(())` if the normals are numerically dependent.
    fn gram_factor(&self, problem: &QpProblem) -> core::result::Result<Matrix, ()> {
        let m = self.active.len();
        let mut g = Matrix::zeros(m, m);
        for i in 0..m {
            let ni = normal(problem, self.active[i]);
            for j in i..m {
                let v = linalg::dot(ni, normal(problem, self.active[j]));
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        if linalg::cholesky_in_place(&mut g) {
            Ok(g)
        } else {
            Err(())
        }
    }

    /// Recomputes `(x, u)` exactly from the current active set:
    /// `x = y + N^T u` with `N N^T u = rhs − N y`.
    fn resolve(&mut self, problem: &QpProblem) -> core::result::Result<(), ()> {
        let m = self.active.len();
        self.x = problem.target.to_vec();
        self.u = vec![0.0; m];
        if m == 0 {
            return Ok(());
        }
        let l = self.gram_factor(problem)?;
        let targets: Vec<f64> = self
            .active
            .iter()
            .map(|&h| rhs(problem, h) - linalg::dot(normal(problem, h), &problem.target))
            .collect();
        self.u = linalg::cholesky_solve(&l, &targets);
        {
            let ActiveSet { active, u, x } = self;
            for (slot, &h) in active.iter().enumerate() {
                linalg::axpy(u[slot], normal(problem, h), x);
            }
        }
        // iterative refinement of the KKT system against the measured
        // residuals; keeps active-constraint slacks near machine precision
        // even when the active normals are badly conditioned
        for _ in 0..3 {
            // stationarity residual r1 = y − x + N^T u
            let mut r1 = problem.target.to_vec();
            for (xi, ri) in self.x.iter().zip(r1.iter_mut()) {
                *ri -= xi;
            }
            for (slot, &h) in self.active.iter().enumerate() {
                linalg::axpy(self.u[slot], normal(problem, h), &mut r1);
            }
            // constraint residual r2 = rhs − N x, corrected for r1
            let rhs2: Vec<f64> = self
                .active
                .iter()
                .map(|&h| {
                    rhs(problem, h)
                        - linalg::dot(normal(problem, h), &self.x)
                        - linalg::dot(normal(problem, h), &r1)
                })
                .collect();
            let du = linalg::cholesky_solve(&l, &rhs2);
            let mut dx = r1;
            for (slot, &h) in self.active.iter().enumerate() {
                linalg::axpy(du[slot], normal(problem, h), &mut dx);
            }
            let ActiveSet { active: _, u, x } = self;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            for (ui, di) in u.iter_mut().zip(&du) {
                *ui += di;
            }
        }
        Ok(())
    }

    fn most_negative_ineq(&self) -> Option<usize> {
        let mut worst: Option<(usize, f64)> = None;
        for (slot, h) in self.active.iter().enumerate() {
            if let Handle::Ineq(_) = h {
                let u = self.u[slot];
                if u < -VIOLATION_TOL && worst.map_or(true, |(_, w)| u < w) {
                    worst = Some((slot, u));
                }
            }
        }
        worst.map(|(slot, _)| slot)
    }

    /// Step directions for activating a constraint with normal `a`:
    /// dual direction `r = (N N^T)^{-1} N a` and primal direction
    /// `z = a − N^T r` (the projection of `a` onto the null space of the
    /// active normals).
    fn directions(&self, problem: &QpProblem, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.active.len();
        if m == 0 {
            return (a.to_vec(), Vec::new());
        }
        let l = self
            .gram_factor(problem)
            .expect("active set normals stay independent by construction");
        let na: Vec<f64> = self
            .active
            .iter()
            .map(|&h| linalg::dot(normal(problem, h), a))
            .collect();
        let r = linalg::cholesky_solve(&l, &na);
        let mut z = a.to_vec();
        for (slot, &h) in self.active.iter().enumerate() {
            linalg::axpy(-r[slot], normal(problem, h), &mut z);
        }
        (z, r)
    }

    fn push(&mut self, h: Handle, u: f64) {
        self.active.push(h);
        self.u.push(u);
    }

    fn drop_slot(&mut self, slot: usize) {
        self.active.remove(slot);
        self.u.remove(slot);
    }

    /// One exact re-solve from the final active set to squeeze out the
    /// drift accumulated by incremental steps.
    fn polish(&mut self, problem: &QpProblem) {
        let _ = self.resolve(problem);
        // clamp roundoff-negative multipliers
        for (slot, h) in self.active.iter().enumerate() {
            if let Handle::Ineq(_) = h {
                if self.u[slot] < 0.0 && self.u[slot] > -1e-9 {
                    self.u[slot] = 0.0;
                }
            }
        }
    }

    fn into_solution(self, problem: &QpProblem, iterations: usize) -> QpSolution {
        let mut lambda = vec![0.0; problem.num_ineq()];
        let mut mu = vec![0.0; problem.num_eq()];
        for (slot, h) in self.active.iter().enumerate() {
            match *h {
                Handle::Ineq(i) => lambda[i] = self.u[slot],
                Handle::Eq(j) => mu[j] = self.u[slot],
            }
        }
        QpSolution {
            active_set: self.ineq_indices(),
            x: self.x,
            lambda,
            mu,
            iterations,
        }
    }
}

/// Solution of a projection program together with its KKT certificate.
#[derive(Debug, Clone)]
pub struct QpSolution {
    /// The projection of the target onto the feasible region.
    pub x: Vec<f64>,
    /// Indices of active inequality constraints, sorted.
    pub active_set: Vec<usize>,
    /// Inequality multipliers (zero off the active set).
    pub lambda: Vec<f64>,
    /// Equality multipliers.
    pub mu: Vec<f64>,
    /// Number of active-set changes performed.
    pub iterations: usize,
}

impl QpSolution {
    /// Max-norm stationarity residual `‖(x − y) − A^T λ − E^T μ‖_∞`.
    pub fn stationarity_residual(&self, problem: &QpProblem) -> f64 {
        let mut res: Vec<f64> = linalg::sub(&self.x, problem.target());
        let (a, _) = problem.ineq();
        let (e, _) = problem.eq();
        for i in 0..a.rows() {
            linalg::axpy(-self.lambda[i], a.row(i), &mut res);
        }
        for j in 0..e.rows() {
            linalg::axpy(-self.mu[j], e.row(j), &mut res);
        }
        res.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Worst primal constraint violation (nonnegative).
    pub fn primal_residual(&self, problem: &QpProblem) -> f64 {
        let (a, b) = problem.ineq();
        let (e, d) = problem.eq();
        let mut worst: f64 = 0.0;
        for i in 0..a.rows() {
            worst = worst.max(b[i] - linalg::dot(a.row(i), &self.x));
        }
        for j in 0..e.rows() {
            worst = worst.max((linalg::dot(e.row(j), &self.x) - d[j]).abs());
        }
        worst
    }

    /// Worst complementary-slackness violation `|λ_i (a_i^T x − b_i)|`.
    pub fn complementarity_residual(&self, problem: &QpProblem) -> f64 {
        let (a, b) = problem.ineq();
        (0..a.rows())
            .map(|i| (self.lambda[i] * (linalg::dot(a.row(i), &self.x) - b[i])).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(x: &[f64], y: &[f64], tol: f64) {
        assert_eq!(x.len(), y.len());
        for (a, b) in x.iter().zip(y) {
            assert!((a - b).abs() <= tol, "{x:?} vs {y:?}");
        }
    }

    #[test]
    fn projects_onto_halfspace_diagonal() {
        // x2 - x1 >= 0 through the origin, target (1, 0)
        let a = Matrix::new(1, 2, vec![-1.0, 1.0]);
        let p = QpProblem::with_ineq(vec![1.0, 0.0], a, vec![0.0]).unwrap();
        let sol = p.solve().unwrap();
        assert_close(&sol.x, &[0.5, 0.5], 1e-12);
        assert_eq!(sol.active_set, vec![0]);
    }

    #[test]
    fn projects_onto_box_face() {
        // x1 <= 1 (as -x1 >= -1), x2 >= 0, target (2, 0)
        let a = Matrix::new(2, 2, vec![-1.0, 0.0, 0.0, 1.0]);
        let p = QpProblem::with_ineq(vec![2.0, 0.0], a, vec![-1.0, 0.0]).unwrap();
        let sol = p.solve().unwrap();
        assert_close(&sol.x, &[1.0, 0.0], 1e-12);
    }

    #[test]
    fn feasible_point_is_fixed() {
        let a = Matrix::new(1, 2, vec![1.0, 0.0]);
        let p = QpProblem::with_ineq(vec![0.25, -3.0], a, vec![0.0]).unwrap();
        let sol = p.solve().unwrap();
        assert_close(&sol.x, &[0.25, -3.0], 0.0);
        assert!(sol.active_set.is_empty());
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn equality_constraints_are_honored() {
        // project (1, 1) onto the line x1 + x2 = 1
        let e = Matrix::new(1, 2, vec![1.0, 1.0]);
        let p = QpProblem::new(vec![1.0, 1.0], Matrix::zeros(0, 2), vec![], e, vec![1.0]).unwrap();
        let sol = p.solve().unwrap();
        assert_close(&sol.x, &[0.5, 0.5], 1e-12);
        assert!(sol.stationarity_residual(&p) < 1e-12);
    }

    #[test]
    fn detects_contradictory_halfspaces() {
        // x1 >= 0 and -x1 >= 1
        let a = Matrix::new(2, 1, vec![1.0, -1.0]);
        let p = QpProblem::with_ineq(vec![0.0], a, vec![0.0, 1.0]).unwrap();
        match p.solve() {
            Err(Error::Infeasible { conflicting }) => {
                assert!(!conflicting.is_empty());
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
        assert!(!p.check_feasible());
    }

    #[test]
    fn empty_problem_is_feasible() {
        let p = QpProblem::unconstrained(vec![1.0, 2.0]);
        assert!(p.check_feasible());
        assert_eq!(p.solve().unwrap().x, vec![1.0, 2.0]);
    }

    #[test]
    fn stochastic_dominance_two_by_two() {
        // rows are distributions; the violated constraint x21 >= x11 becomes
        // active and both entries meet in the middle
        let a = Matrix::new(
            2,
            4,
            vec![
                -1.0, 0.0, 1.0, 0.0, // x21 - x11 >= 0
                -1.0, -1.0, 1.0, 1.0, // (x21+x22) - (x11+x12) >= 0
            ],
        );
        let p =
            QpProblem::with_ineq(vec![0.7, 0.3, 0.4, 0.6], a, vec![0.0, 0.0]).unwrap();
        let sol = p.solve().unwrap();
        assert_close(&sol.x, &[0.55, 0.3, 0.55, 0.6], 1e-12);
        assert_eq!(sol.active_set, vec![0]);
    }

    #[test]
    fn kkt_residuals_small_on_active_faces() {
        let a = Matrix::new(
            3,
            3,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0],
        );
        let p = QpProblem::with_ineq(vec![-1.0, -2.0, 0.0], a, vec![0.0, 0.0, 1.0]).unwrap();
        let sol = p.solve().unwrap();
        assert!(sol.stationarity_residual(&p) < 1e-10);
        assert!(sol.primal_residual(&p) < 1e-10);
        assert!(sol.complementarity_residual(&p) < 1e-10);
        assert!(sol.lambda.iter().all(|&l| l >= -1e-10));
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let a = Matrix::new(
            4,
            3,
            vec![
                1.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, //
                0.0, 0.0, 1.0, //
                -1.0, -1.0, -1.0,
            ],
        );
        let b = vec![0.0, 0.0, 0.0, -1.0];
        let p = QpProblem::with_ineq(vec![-0.3, 0.8, 0.9], a, b).unwrap();
        let cold = p.solve().unwrap();
        let warm = p.solve_warm(&cold.active_set).unwrap();
        assert_close(&warm.x, &cold.x, 1e-9);
        // warm starting from a wrong-but-valid guess also converges
        let warm2 = p.solve_warm(&[3]).unwrap();
        assert_close(&warm2.x, &cold.x, 1e-9);
    }
}
