//! Relaxed posteriors: differentiable log-targets composed with
//! constraint-relaxation penalties.
//!
//! A [`LogTarget`] is an unnormalized log-density `log L(θ|y)π(θ)` with a
//! gradient and a support indicator. A [`RelaxedPosterior`] subtracts a
//! penalty derived from a [`ConstraintSet`]:
//!
//! - squared distance `(ρ/2)·dist(θ,Θ)²` — the smooth relaxation this crate
//!   is built around;
//! - unsquared distance `(ρ/2)·dist(θ,Θ)` — comparator with a subgradient
//!   jump at the boundary;
//! - the algebraic level-set relaxation `ρ·|θᵀθ − 1|` of the unit sphere —
//!   comparator baseline;
//! - sharp — the exact indicator, `−∞` off the set.
//!
//! All densities are unnormalized; samplers and importance weights only ever
//! use ratios, so normalizing constants are never computed.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::sets::ConstraintSet;

/// A differentiable unnormalized log-density.
pub trait LogTarget {
    fn dim(&self) -> usize;

    /// Unnormalized log-density. May return `−∞` off the support.
    fn logp(&self, theta: &[f64]) -> f64;

    /// Gradient of [`LogTarget::logp`]; only called where
    /// [`LogTarget::domain_check`] holds.
    fn grad(&self, theta: &[f64]) -> Vec<f64>;

    /// Support indicator (e.g. the open simplex interior for the
    /// contingency-table model). Defaults to the whole space.
    fn domain_check(&self, _theta: &[f64]) -> bool {
        true
    }

    /// Closed-form proximal map of `f = −logp`:
    /// `argmin_x f(x) + (ρ/2)‖x − anchor‖²`, when one exists.
    fn prox_neg_logp(&self, _rho: f64, _anchor: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// A strictly interior point used to seed sampler initialization.
    fn init_anchor(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// Scale of the initialization jitter around the anchor.
    fn init_spread(&self) -> f64 {
        1.0
    }

    /// Short name used in error messages.
    fn name(&self) -> &'static str {
        "custom"
    }
}

impl<T: LogTarget + ?Sized> LogTarget for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn logp(&self, theta: &[f64]) -> f64 {
        (**self).logp(theta)
    }
    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        (**self).grad(theta)
    }
    fn domain_check(&self, theta: &[f64]) -> bool {
        (**self).domain_check(theta)
    }
    fn prox_neg_logp(&self, rho: f64, anchor: &[f64]) -> Option<Vec<f64>> {
        (**self).prox_neg_logp(rho, anchor)
    }
    fn init_anchor(&self) -> Vec<f64> {
        (**self).init_anchor()
    }
    fn init_spread(&self) -> f64 {
        (**self).init_spread()
    }
    fn name(&self) -> &'static str {
        (**self).name()
    }
}

/// How the constraint is relaxed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyFlavor {
    /// `(ρ/2)·dist(θ,Θ)²`: continuously differentiable (the projection is
    /// single-valued on convex sets), vanishing on Θ.
    SquaredDistance { rho: f64 },
    /// `(ρ/2)·dist(θ,Θ)`: comparator with a subgradient of norm `ρ/2`
    /// jumping to zero across the boundary.
    UnsquaredDistance { rho: f64 },
    /// `ρ·|θᵀθ − 1|`: the algebraic level-set relaxation of the unit
    /// sphere, kept solely as the comparator baseline.
    LevelSetSphere { rho: f64 },
    /// The exact indicator: `−∞` off Θ.
    Sharp,
}

impl PenaltyFlavor {
    pub fn rho(&self) -> Option<f64> {
        match self {
            PenaltyFlavor::SquaredDistance { rho }
            | PenaltyFlavor::UnsquaredDistance { rho }
            | PenaltyFlavor::LevelSetSphere { rho } => Some(*rho),
            PenaltyFlavor::Sharp => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(rho) = self.rho() {
            if !(rho > 0.0) || !rho.is_finite() {
                return Err(Error::InvalidParameter("penalty rho must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// A base log-target combined with a constraint set and a penalty flavor.
#[derive(Debug, Clone)]
pub struct RelaxedPosterior<T: LogTarget> {
    base: T,
    set: ConstraintSet,
    flavor: PenaltyFlavor,
}

impl<T: LogTarget> RelaxedPosterior<T> {
    pub fn new(base: T, set: ConstraintSet, flavor: PenaltyFlavor) -> Result<Self> {
        flavor.validate()?;
        if set.dim() != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: set.dim() });
        }
        if matches!(flavor, PenaltyFlavor::LevelSetSphere { .. }) {
            let is_unit_sphere = match &set {
                ConstraintSet::Sphere { center, radius } => {
                    *radius == 1.0 && center.iter().all(|&c| c == 0.0)
                }
                _ => false,
            };
            if !is_unit_sphere {
                return Err(Error::InvalidParameter(
                    "the level-set relaxation is defined only for the unit sphere",
                ));
            }
        }
        Ok(RelaxedPosterior { base, set, flavor })
    }

    pub fn base(&self) -> &T {
        &self.base
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn flavor(&self) -> PenaltyFlavor {
        self.flavor
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Squared distance of `theta` to the constraint set.
    pub fn dist_sq(&self, theta: &[f64]) -> Result<f64> {
        self.set.dist_sq(theta)
    }

    /// The penalty value subtracted from the base log-density. Returns
    /// `+∞` for a sharp flavor off the set.
    pub fn penalty(&self, theta: &[f64]) -> Result<f64> {
        match self.flavor {
            PenaltyFlavor::SquaredDistance { rho } => Ok(0.5 * rho * self.set.dist_sq(theta)?),
            PenaltyFlavor::UnsquaredDistance { rho } => {
                Ok(0.5 * rho * self.set.project(theta)?.distance)
            }
            PenaltyFlavor::LevelSetSphere { rho } => {
                Ok(rho * (linalg::dot(theta, theta) - 1.0).abs())
            }
            PenaltyFlavor::Sharp => {
                let on_set = self.set.project(theta)?.distance <= 1e-9;
                Ok(if on_set { 0.0 } else { f64::INFINITY })
            }
        }
    }

    /// Relaxed unnormalized log-density `base.logp − penalty`. Off-support
    /// points evaluate to `−∞` so samplers can reject them rather than
    /// handle an error path.
    pub fn logp_relaxed(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: theta.len() });
        }
        if !self.base.domain_check(theta) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.base.logp(theta) - self.penalty(theta)?)
    }

    /// Gradient of the relaxed log-density. Undefined for the sharp flavor.
    pub fn grad_relaxed(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: theta.len() });
        }
        let mut g = self.base.grad(theta);
        match self.flavor {
            PenaltyFlavor::SquaredDistance { rho } => {
                let pg = self.set.dist_sq_grad(theta)?;
                linalg::axpy(-rho, &pg, &mut g);
            }
            PenaltyFlavor::UnsquaredDistance { rho } => {
                let sg = self.set.unsquared_dist_subgrad(theta)?;
                linalg::axpy(-0.5 * rho, &sg.direction, &mut g);
            }
            PenaltyFlavor::LevelSetSphere { rho } => {
                let level = linalg::dot(theta, theta) - 1.0;
                let sign = if level > 0.0 {
                    1.0
                } else if level < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                linalg::axpy(-2.0 * rho * sign, theta, &mut g);
            }
            PenaltyFlavor::Sharp => return Err(Error::SharpFlavorUnsupported),
        }
        Ok(g)
    }
}

/// Declarative description of the model families shipped with the crate.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// `y | β ∼ N(Xβ, σ²I)` with a flat prior on β.
    GaussianLinear { x: Matrix, y: Vec<f64>, sigma2: f64 },
    /// Multivariate Student-t location kernel
    /// `(1 + ‖F − θ‖²/(mσ²))^{−(m+p)/2}` with `θ ∈ R^{p+1}`, taken verbatim
    /// as the unnormalized target.
    StudentTLocation { location: Vec<f64>, dof: f64, sigma2: f64 },
    /// Independent per-row multinomial counts with Dirichlet priors,
    /// reduced to the first `J−1` columns of each row.
    MultinomialDirichletTable { counts: Vec<Vec<u64>>, alpha: Vec<Vec<f64>> },
}

impl ModelSpec {
    /// Checks the invariants and builds the corresponding target.
    pub fn build(self) -> Result<Model> {
        match self {
            ModelSpec::GaussianLinear { x, y, sigma2 } => {
                Ok(Model::GaussianLinear(GaussianLinear::new(x, y, sigma2)?))
            }
            ModelSpec::StudentTLocation { location, dof, sigma2 } => {
                Ok(Model::StudentTLocation(StudentTLocation::new(location, dof, sigma2)?))
            }
            ModelSpec::MultinomialDirichletTable { counts, alpha } => Ok(
                Model::MultinomialDirichletTable(MultinomialDirichletTable::new(counts, alpha)?),
            ),
        }
    }
}

/// A built model target; enum dispatch keeps samplers monomorphic.
#[derive(Debug, Clone)]
pub enum Model {
    GaussianLinear(GaussianLinear),
    StudentTLocation(StudentTLocation),
    MultinomialDirichletTable(MultinomialDirichletTable),
}

macro_rules! model_delegate {
    ($self:ident, $inner:ident => $body:expr) => {
        match $self {
            Model::GaussianLinear($inner) => $body,
            Model::StudentTLocation($inner) => $body,
            Model::MultinomialDirichletTable($inner) => $body,
        }
    };
}

impl LogTarget for Model {
    fn dim(&self) -> usize {
        model_delegate!(self, m => m.dim())
    }
    fn logp(&self, theta: &[f64]) -> f64 {
        model_delegate!(self, m => m.logp(theta))
    }
    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        model_delegate!(self, m => m.grad(theta))
    }
    fn domain_check(&self, theta: &[f64]) -> bool {
        model_delegate!(self, m => m.domain_check(theta))
    }
    fn prox_neg_logp(&self, rho: f64, anchor: &[f64]) -> Option<Vec<f64>> {
        model_delegate!(self, m => m.prox_neg_logp(rho, anchor))
    }
    fn init_anchor(&self) -> Vec<f64> {
        model_delegate!(self, m => m.init_anchor())
    }
    fn init_spread(&self) -> f64 {
        model_delegate!(self, m => m.init_spread())
    }
    fn name(&self) -> &'static str {
        model_delegate!(self, m => m.name())
    }
}

/// Gaussian linear model with a flat prior:
/// `logp(β) = −‖y − Xβ‖²/(2σ²)`.
#[derive(Debug, Clone)]
pub struct GaussianLinear {
    x: Matrix,
    y: Vec<f64>,
    sigma2: f64,
    xtx: Matrix,
    xty: Vec<f64>,
}

impl GaussianLinear {
    pub fn new(x: Matrix, y: Vec<f64>, sigma2: f64) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::InvalidParameter("design matrix needs at least one row"));
        }
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.rows(), got: y.len() });
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidParameter("sigma2 must be positive"));
        }
        let xtx = x.gram();
        let xty = x.tr_matvec(&y);
        Ok(GaussianLinear { x, y, sigma2, xtx, xty })
    }

    pub fn design(&self) -> (&Matrix, &[f64]) {
        (&self.x, &self.y)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let fitted = self.x.matvec(beta);
        linalg::sub(&self.y, &fitted)
    }
}

impl LogTarget for GaussianLinear {
    fn dim(&self) -> usize {
        self.x.cols()
    }

    fn logp(&self, beta: &[f64]) -> f64 {
        let r = self.residual(beta);
        -0.5 * linalg::dot(&r, &r) / self.sigma2
    }

    fn grad(&self, beta: &[f64]) -> Vec<f64> {
        let r = self.residual(beta);
        let mut g = self.x.tr_matvec(&r);
        for v in &mut g {
            *v /= self.sigma2;
        }
        g
    }

    /// Ridge solve `(XᵀX/σ² + ρI)⁻¹ (Xᵀy/σ² + ρ·anchor)`.
    fn prox_neg_logp(&self, rho: f64, anchor: &[f64]) -> Option<Vec<f64>> {
        let p = self.dim();
        let mut a = self.xtx.clone();
        let mut rhs = vec![0.0; p];
        for i in 0..p {
            for j in 0..p {
                a.set(i, j, a.get(i, j) / self.sigma2);
            }
        }
        for i in 0..p {
            a.set(i, i, a.get(i, i) + rho);
            rhs[i] = self.xty[i] / self.sigma2 + rho * anchor[i];
        }
        linalg::solve_spd(&a, &rhs)
    }

    fn name(&self) -> &'static str {
        "gaussian-linear"
    }
}

/// Student-t location kernel on `R^{p+1}`, the robust von Mises-Fisher
/// surrogate: `logp(θ) = −((m+p)/2)·log(1 + ‖F − θ‖²/(mσ²))`.
#[derive(Debug, Clone)]
pub struct StudentTLocation {
    location: Vec<f64>,
    dof: f64,
    sigma2: f64,
    exponent: f64,
}

impl StudentTLocation {
    pub fn new(location: Vec<f64>, dof: f64, sigma2: f64) -> Result<Self> {
        if location.is_empty() {
            return Err(Error::InvalidParameter("location vector must be nonempty"));
        }
        if !(dof > 0.0) {
            return Err(Error::InvalidParameter("degrees of freedom must be positive"));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidParameter("sigma2 must be positive"));
        }
        let p = (location.len() - 1) as f64;
        let exponent = 0.5 * (dof + p);
        Ok(StudentTLocation { location, dof, sigma2, exponent })
    }

    pub fn location(&self) -> &[f64] {
        &self.location
    }

    fn scaled_sq(&self, theta: &[f64]) -> f64 {
        let diff = linalg::sub(&self.location, theta);
        linalg::dot(&diff, &diff) / (self.dof * self.sigma2)
    }
}

impl LogTarget for StudentTLocation {
    fn dim(&self) -> usize {
        self.location.len()
    }

    fn logp(&self, theta: &[f64]) -> f64 {
        -self.exponent * (1.0 + self.scaled_sq(theta)).ln()
    }

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let u = 1.0 + self.scaled_sq(theta);
        let coeff = 2.0 * self.exponent / (self.dof * self.sigma2 * u);
        self.location
            .iter()
            .zip(theta)
            .map(|(f, t)| coeff * (f - t))
            .collect()
    }

    fn init_anchor(&self) -> Vec<f64> {
        self.location.clone()
    }

    fn init_spread(&self) -> f64 {
        self.sigma2.sqrt()
    }

    fn name(&self) -> &'static str {
        "student-t-location"
    }
}

/// Independent multinomial rows with Dirichlet priors over an `I × J`
/// contingency table, in the reduced parameterization over the first
/// `J − 1` columns (the last column is `1 − Σ_{j<J} θ_ij` per row).
///
/// `logp(θ̃) = Σ_i [(n_iJ + α_iJ − 1)·log(1 − s_i) + Σ_{j<J} (n_ij + α_ij − 1)·log θ_ij]`
/// with `s_i` the reduced row sum; the support is the open simplex interior
/// per row.
#[derive(Debug, Clone)]
pub struct MultinomialDirichletTable {
    rows: usize,
    cols: usize,
    /// `n_ij + α_ij − 1`, row-major over the full table.
    coeff: Vec<f64>,
}

impl MultinomialDirichletTable {
    pub fn new(counts: Vec<Vec<u64>>, alpha: Vec<Vec<f64>>) -> Result<Self> {
        let rows = counts.len();
        if rows == 0 {
            return Err(Error::InvalidParameter("counts table must be nonempty"));
        }
        let cols = counts[0].len();
        if cols < 2 {
            return Err(Error::InvalidParameter("counts table needs at least two columns"));
        }
        if counts.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("counts rows must have equal length"));
        }
        if alpha.len() != rows || alpha.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: alpha.iter().map(|r| r.len()).sum(),
            });
        }
        if alpha.iter().flatten().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidParameter("dirichlet parameters must be positive"));
        }
        let coeff = counts
            .iter()
            .zip(&alpha)
            .flat_map(|(nr, ar)| nr.iter().zip(ar).map(|(&n, &a)| n as f64 + a - 1.0))
            .collect();
        Ok(MultinomialDirichletTable { rows, cols, coeff })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Reduced dimension `I·(J−1)`.
    pub fn reduced_dim(&self) -> usize {
        self.rows * (self.cols - 1)
    }

    /// Reconstructs the full `I × J` table from a reduced point, appending
    /// `1 − Σ` per row.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let w = self.cols - 1;
        let mut full = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            let row = &reduced[i * w..(i + 1) * w];
            let s: f64 = row.iter().sum();
            full.extend_from_slice(row);
            full.push(1.0 - s);
        }
        full
    }

    #[inline]
    fn coeff(&self, i: usize, j: usize) -> f64 {
        self.coeff[i * self.cols + j]
    }
}

impl LogTarget for MultinomialDirichletTable {
    fn dim(&self) -> usize {
        self.reduced_dim()
    }

    fn logp(&self, theta: &[f64]) -> f64 {
        let w = self.cols - 1;
        let mut total = 0.0;
        for i in 0..self.rows {
            let row = &theta[i * w..(i + 1) * w];
            let s: f64 = row.iter().sum();
            if s >= 1.0 || row.iter().any(|&t| t <= 0.0) {
                return f64::NEG_INFINITY;
            }
            total += self.coeff(i, self.cols - 1) * (1.0 - s).ln();
            for (j, &t) in row.iter().enumerate() {
                total += self.coeff(i, j) * t.ln();
            }
        }
        total
    }

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let w = self.cols - 1;
        let mut g = vec![0.0; theta.len()];
        for i in 0..self.rows {
            let row = &theta[i * w..(i + 1) * w];
            let s: f64 = row.iter().sum();
            let last = self.coeff(i, self.cols - 1) / (1.0 - s);
            for (j, &t) in row.iter().enumerate() {
                g[i * w + j] = self.coeff(i, j) / t - last;
            }
        }
        g
    }

    fn domain_check(&self, theta: &[f64]) -> bool {
        let w = self.cols - 1;
        theta.chunks(w).all(|row| {
            let s: f64 = row.iter().sum();
            s < 1.0 && row.iter().all(|&t| t > 0.0)
        })
    }

    /// Uniform table `1/J` per cell, strictly interior per row.
    fn init_anchor(&self) -> Vec<f64> {
        vec![1.0 / self.cols as f64; self.reduced_dim()]
    }

    fn init_spread(&self) -> f64 {
        0.1 / self.cols as f64
    }

    fn name(&self) -> &'static str {
        "multinomial-dirichlet-table"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::ConstraintSet;

    /// 1-D standard normal target used across the crate's oracles.
    #[derive(Debug, Clone)]
    pub struct StdNormal;

    impl LogTarget for StdNormal {
        fn dim(&self) -> usize {
            1
        }
        fn logp(&self, theta: &[f64]) -> f64 {
            -0.5 * theta[0] * theta[0]
        }
        fn grad(&self, theta: &[f64]) -> Vec<f64> {
            vec![-theta[0]]
        }
    }

    #[derive(Debug, Clone)]
    struct Flat(usize);

    impl LogTarget for Flat {
        fn dim(&self) -> usize {
            self.0
        }
        fn logp(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn grad(&self, _: &[f64]) -> Vec<f64> {
            vec![0.0; self.0]
        }
    }

    #[test]
    fn squared_penalty_hand_arithmetic() {
        // standard normal base, unit ball, rho = 2, theta = 2:
        // logp = -4/2 - (2/2)*1 = -3
        let post = RelaxedPosterior::new(
            StdNormal,
            ConstraintSet::unit_ball(1),
            PenaltyFlavor::SquaredDistance { rho: 2.0 },
        )
        .unwrap();
        let v = post.logp_relaxed(&[2.0]).unwrap();
        assert!((v - (-3.0)).abs() < 1e-12);
    }

    #[test]
    fn penalty_vanishes_on_the_set() {
        let post = RelaxedPosterior::new(
            StdNormal,
            ConstraintSet::unit_ball(1),
            PenaltyFlavor::SquaredDistance { rho: 100.0 },
        )
        .unwrap();
        assert_eq!(post.penalty(&[0.3]).unwrap(), 0.0);
        assert_eq!(post.logp_relaxed(&[0.3]).unwrap(), StdNormal.logp(&[0.3]));
    }

    #[test]
    fn squared_relaxation_bounded_by_base() {
        let post = RelaxedPosterior::new(
            StdNormal,
            ConstraintSet::unit_ball(1),
            PenaltyFlavor::SquaredDistance { rho: 3.0 },
        )
        .unwrap();
        for t in [-5.0, -1.0, 0.0, 0.4, 1.0, 2.5, 7.0] {
            assert!(post.logp_relaxed(&[t]).unwrap() <= StdNormal.logp(&[t]) + 1e-15);
        }
    }

    #[test]
    fn flat_base_penalty_gradient() {
        let post = RelaxedPosterior::new(
            Flat(2),
            ConstraintSet::unit_ball(2),
            PenaltyFlavor::SquaredDistance { rho: 4.0 },
        )
        .unwrap();
        let g = post.grad_relaxed(&[2.0, 0.0]).unwrap();
        assert_eq!(g, vec![-4.0, 0.0]);
        // interior: base gradient only
        let g0 = post.grad_relaxed(&[0.2, 0.1]).unwrap();
        assert_eq!(g0, vec![0.0, 0.0]);
    }

    #[test]
    fn sharp_flavor_rejects_off_set() {
        let post =
            RelaxedPosterior::new(StdNormal, ConstraintSet::unit_ball(1), PenaltyFlavor::Sharp)
                .unwrap();
        assert_eq!(post.logp_relaxed(&[2.0]).unwrap(), f64::NEG_INFINITY);
        assert!(post.logp_relaxed(&[0.5]).unwrap().is_finite());
        assert!(matches!(post.grad_relaxed(&[0.5]), Err(Error::SharpFlavorUnsupported)));
    }

    #[test]
    fn relaxed_density_integrates_like_a_proper_one() {
        // desk-scale properness: the mass of the relaxed density over
        // [-20, 20] already captures everything the wider window adds
        let flavors = [
            PenaltyFlavor::SquaredDistance { rho: 2.0 },
            PenaltyFlavor::UnsquaredDistance { rho: 2.0 },
            PenaltyFlavor::Sharp,
        ];
        for flavor in flavors {
            let post =
                RelaxedPosterior::new(StdNormal, ConstraintSet::unit_ball(1), flavor).unwrap();
            let integrate = |lo: f64, hi: f64| {
                let n = 400_000;
                let h = (hi - lo) / n as f64;
                (0..n)
                    .map(|i| {
                        let t = lo + (i as f64 + 0.5) * h;
                        let lp = post.logp_relaxed(&[t]).unwrap();
                        if lp.is_finite() {
                            lp.exp() * h
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
            };
            let narrow = integrate(-20.0, 20.0);
            let wide = integrate(-40.0, 40.0);
            assert!(narrow.is_finite() && narrow > 0.0);
            assert!((wide - narrow).abs() < 1e-6, "{flavor:?}: {narrow} vs {wide}");
        }
    }

    #[test]
    fn penalty_factor_pointwise_limit() {
        // exp(-rho/2 dist^2) falls to zero off the set as rho grows and is
        // identically one on it
        let set = ConstraintSet::unit_ball(1);
        let outside = [1.5];
        let inside = [0.5];
        let mut last = 1.0;
        for rho in [1.0, 10.0, 100.0, 1000.0, 1e6] {
            let post = RelaxedPosterior::new(
                StdNormal,
                set.clone(),
                PenaltyFlavor::SquaredDistance { rho },
            )
            .unwrap();
            let factor = (-post.penalty(&outside).unwrap()).exp();
            assert!(factor < last);
            last = factor;
            assert_eq!((-post.penalty(&inside).unwrap()).exp(), 1.0);
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn monotone_in_rho_off_set() {
        let mk = |rho| {
            RelaxedPosterior::new(
                StdNormal,
                ConstraintSet::unit_ball(1),
                PenaltyFlavor::SquaredDistance { rho },
            )
            .unwrap()
        };
        let theta = [1.7];
        let mut last = f64::INFINITY;
        for rho in [0.5, 1.0, 5.0, 50.0, 500.0] {
            let v = mk(rho).logp_relaxed(&theta).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn level_set_requires_unit_sphere() {
        let err = RelaxedPosterior::new(
            StdNormal,
            ConstraintSet::unit_ball(1),
            PenaltyFlavor::LevelSetSphere { rho: 1.0 },
        );
        assert!(err.is_err());
        let post = RelaxedPosterior::new(
            Flat(3),
            ConstraintSet::unit_sphere(3),
            PenaltyFlavor::LevelSetSphere { rho: 2.0 },
        )
        .unwrap();
        // gradient of rho*|theta'theta - 1| off the sphere
        let g = post.grad_relaxed(&[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(g, vec![-4.0, -4.0, 0.0]);
    }

    #[test]
    fn gaussian_linear_identity_design() {
        let model = GaussianLinear::new(Matrix::identity(3), vec![0.0, 0.0, 0.0], 1.0).unwrap();
        let theta = [0.3, -1.0, 2.0];
        let expect = -0.5 * theta.iter().map(|t| t * t).sum::<f64>();
        assert!((model.logp(&theta) - expect).abs() < 1e-14);
        let g = model.grad(&theta);
        for (gi, ti) in g.iter().zip(&theta) {
            assert!((gi + ti).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_linear_prox_is_ridge_solve() {
        // prox at rho: minimize ||y - X b||^2/(2 sigma2) + (rho/2)||b - a||^2
        let x = Matrix::new(3, 2, vec![1.0, 0.5, -0.2, 1.0, 0.7, -0.3]);
        let model = GaussianLinear::new(x, vec![1.0, -1.0, 0.5], 2.0).unwrap();
        let anchor = [0.1, -0.4];
        let rho = 3.0;
        let prox = model.prox_neg_logp(rho, &anchor).unwrap();
        // stationarity: -grad logp(prox) + rho (prox - anchor) = 0
        let g = model.grad(&prox);
        for i in 0..2 {
            let station = -g[i] + rho * (prox[i] - anchor[i]);
            assert!(station.abs() < 1e-10, "residual {station}");
        }
    }

    #[test]
    fn student_t_mode_at_location() {
        let f = 1.0 / 3f64.sqrt();
        let model = StudentTLocation::new(vec![f, f, f], 3.0, 0.1).unwrap();
        let g = model.grad(&[f, f, f]);
        assert!(g.iter().all(|&v| v.abs() < 1e-14));
        // the kernel exponent is (m+p)/2 = (3+2)/2
        let theta = [0.1, 0.2, -0.3];
        let diff: f64 = model
            .location()
            .iter()
            .zip(&theta)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let expect = -2.5 * (1.0 + diff / 0.3).ln();
        assert!((model.logp(&theta) - expect).abs() < 1e-14);
    }

    #[test]
    fn table_gradient_symmetry_point() {
        // 2x2 table, all counts 1, alpha = 1: coefficients are 1, so
        // grad_ij = 1/theta - 1/(1-s); at theta = (0.5, 0.5) both vanish
        let model = MultinomialDirichletTable::new(
            vec![vec![1, 1], vec![1, 1]],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap();
        assert_eq!(model.dim(), 2);
        let g = model.grad(&[0.5, 0.5]);
        assert!(g.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn table_domain_is_open_simplex() {
        let model = MultinomialDirichletTable::new(
            vec![vec![2, 3, 4], vec![1, 1, 1]],
            vec![vec![1.0; 3], vec![1.0; 3]],
        )
        .unwrap();
        assert_eq!(model.dim(), 4);
        assert!(model.domain_check(&[0.2, 0.3, 0.1, 0.4]));
        assert!(!model.domain_check(&[0.6, 0.5, 0.1, 0.1]));
        assert!(!model.domain_check(&[0.0, 0.3, 0.1, 0.1]));
        assert_eq!(model.logp(&[0.6, 0.5, 0.1, 0.1]), f64::NEG_INFINITY);
    }

    #[test]
    fn table_expand_appends_complement() {
        let model = MultinomialDirichletTable::new(
            vec![vec![1, 1, 1], vec![1, 1, 1]],
            vec![vec![1.0; 3], vec![1.0; 3]],
        )
        .unwrap();
        let full = model.expand(&[0.2, 0.3, 0.25, 0.5]);
        assert_eq!(full.len(), 6);
        assert!((full[2] - 0.5).abs() < 1e-15);
        assert!((full[5] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = Matrix::new(4, 2, vec![1.0, 0.2, -0.5, 1.3, 0.8, -1.0, 0.0, 0.6]);
        let models: Vec<Model> = vec![
            ModelSpec::GaussianLinear { x, y: vec![0.5, -0.2, 1.0, 0.3], sigma2: 1.5 }
                .build()
                .unwrap(),
            ModelSpec::StudentTLocation {
                location: vec![0.5, -0.3, 0.8],
                dof: 3.0,
                sigma2: 0.1,
            }
            .build()
            .unwrap(),
            ModelSpec::MultinomialDirichletTable {
                counts: vec![vec![3, 2, 5], vec![1, 4, 2]],
                alpha: vec![vec![1.0, 2.0, 1.5], vec![1.0, 1.0, 1.0]],
            }
            .build()
            .unwrap(),
        ];
        let points: Vec<Vec<f64>> = vec![
            vec![0.4, -0.9],
            vec![0.2, 0.1, 0.5],
            vec![0.3, 0.25, 0.2, 0.35],
        ];
        for (model, theta) in models.iter().zip(&points) {
            let g = model.grad(theta);
            let h = 1e-6;
            for k in 0..theta.len() {
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[k] += h;
                minus[k] -= h;
                let fd = (model.logp(&plus) - model.logp(&minus)) / (2.0 * h);
                let scale = g[k].abs().max(1.0);
                assert!(
                    (g[k] - fd).abs() / scale < 1e-5,
                    "{} coord {k}: {} vs {}",
                    model.name(),
                    g[k],
                    fd
                );
            }
        }
    }
}
