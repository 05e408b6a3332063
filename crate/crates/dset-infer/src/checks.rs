//! Desk-scale oracle suites: MAP convergence on a closed-form family,
//! total-variation convergence on a quadrature grid, and analytic-vs-
//! finite-difference gradient checks across every model and smooth
//! penalty flavor. The `check` subcommand runs these; the acceptance
//! suite reuses them with its own thresholds.

use anyhow::{Context, Result};

use dset_core::diagnostics::{tv_distance_grid, GridDensity};
use dset_core::posterior::{
    GaussianLinear, LogTarget, Model, ModelSpec, PenaltyFlavor, RelaxedPosterior,
};
use dset_core::rng::Rng;
use dset_core::sets::ConstraintSet;
use dset_core::{mm, Matrix};

/// Gaussian with mean 1 and variance 1 expressed as a linear model, the
/// base of the closed-form oracle family.
pub fn unit_gaussian_mean_one() -> GaussianLinear {
    GaussianLinear::new(Matrix::identity(1), vec![1.0], 1.0).expect("valid 1-D model")
}

/// MAP errors of the proximal-distance solve against the closed form
/// `1/(1+rho)` on the halfline-constrained family. Returns
/// `(rho, map, closed_form)` triples.
pub fn map_convergence_closed_form(rhos: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    let base = unit_gaussian_mean_one();
    let set = ConstraintSet::box_bounds(vec![f64::NEG_INFINITY], vec![0.0])
        .context("halfline constraint")?;
    let mut out = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let post = RelaxedPosterior::new(&base, set.clone(), PenaltyFlavor::SquaredDistance { rho })
            .context("composing relaxed posterior")?;
        let map = mm::map_fixed_rho(&post, &[1.0], 1e-12).context("MAP solve")?;
        out.push((rho, map[0], 1.0 / (1.0 + rho)));
    }
    Ok(out)
}

/// Total variation between the relaxed and sharply constrained densities
/// of the mean-one Gaussian over `Θ = [−1, 1]`, on a uniform grid.
/// Returns `(rho, tv)` pairs.
pub fn tv_convergence_curve(rhos: &[f64], cells: usize) -> Result<Vec<(f64, f64)>> {
    let base = unit_gaussian_mean_one();
    let set = ConstraintSet::box_bounds(vec![-1.0], vec![1.0]).context("interval constraint")?;
    let sharp = RelaxedPosterior::new(&base, set.clone(), PenaltyFlavor::Sharp)?;
    let constrained = GridDensity::from_logp_1d(-8.0, 8.0, cells, |t| {
        sharp.logp_relaxed(&[t]).expect("1-D evaluation")
    })
    .context("constrained grid")?;
    let mut out = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let relaxed_post =
            RelaxedPosterior::new(&base, set.clone(), PenaltyFlavor::SquaredDistance { rho })?;
        let relaxed = GridDensity::from_logp_1d(-8.0, 8.0, cells, |t| {
            relaxed_post.logp_relaxed(&[t]).expect("1-D evaluation")
        })
        .context("relaxed grid")?;
        out.push((rho, tv_distance_grid(&relaxed, &constrained)?));
    }
    Ok(out)
}

/// One gradient-check combination: a model, a constraint set for the
/// squared flavor, and a sampler for valid test points.
struct GradCase {
    name: &'static str,
    model: Model,
    squared_set: ConstraintSet,
}

fn gradient_cases() -> Result<Vec<GradCase>> {
    let x = Matrix::new(
        6,
        2,
        vec![1.0, 0.3, -0.4, 1.1, 0.9, -0.7, 0.2, 0.8, -1.2, 0.1, 0.5, 0.5],
    );
    let gaussian = ModelSpec::GaussianLinear {
        x,
        y: vec![0.7, -0.3, 1.2, 0.4, -0.9, 0.2],
        sigma2: 1.0,
    }
    .build()?;
    let f = 1.0 / 3f64.sqrt();
    let student = ModelSpec::StudentTLocation {
        location: vec![f, f, f],
        dof: 3.0,
        sigma2: 0.1,
    }
    .build()?;
    let table = ModelSpec::MultinomialDirichletTable {
        counts: vec![vec![6, 3, 5], vec![2, 7, 4]],
        alpha: vec![vec![1.0; 3]; 2],
    }
    .build()?;
    Ok(vec![
        GradCase {
            name: "gaussian-linear",
            model: gaussian,
            squared_set: ConstraintSet::unit_ball(2),
        },
        GradCase {
            name: "student-t-location",
            model: student,
            squared_set: ConstraintSet::unit_sphere(3),
        },
        GradCase {
            name: "multinomial-table",
            model: table,
            squared_set: ConstraintSet::stochastic_dominance(2, 2)?,
        },
    ])
}

/// Draws a point in the model's domain with enough margin from penalty
/// kinks for central differences to be meaningful.
fn sample_point(model: &Model, rng: &mut Rng) -> Vec<f64> {
    match model {
        Model::MultinomialDirichletTable(t) => loop {
            let w = t.shape().1 - 1;
            let candidate: Vec<f64> = (0..t.reduced_dim())
                .map(|_| 0.05 + 0.9 * rng.uniform() / w as f64)
                .collect();
            let interior = candidate.chunks(w).all(|row| {
                let s: f64 = row.iter().sum();
                s < 0.95 && row.iter().all(|&v| v > 0.03)
            });
            if interior {
                return candidate;
            }
        },
        Model::GaussianLinear(m) => (0..m.dim()).map(|_| 1.5 * rng.normal()).collect(),
        Model::StudentTLocation(m) => (0..m.dim()).map(|_| 1.2 * rng.normal()).collect(),
    }
}

/// A point is usable when the finite-difference stencil cannot straddle a
/// penalty kink: squared flavor needs the distance to be zero with margin
/// or above the margin; the level-set flavor needs `|θᵀθ − 1|` above it.
const KINK_MARGIN: f64 = 1e-3;

fn margin_ok(flavor: &PenaltyFlavor, set: &ConstraintSet, theta: &[f64]) -> bool {
    match flavor {
        PenaltyFlavor::SquaredDistance { .. } => {
            let dist = set.project(theta).map(|p| p.distance).unwrap_or(f64::NAN);
            match set {
                // the sphere projection also kinks at the center
                ConstraintSet::Sphere { .. } => {
                    let norm: f64 = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                    dist > KINK_MARGIN && norm > 0.1
                }
                _ => dist > KINK_MARGIN || interior_with_margin(set, theta),
            }
        }
        PenaltyFlavor::LevelSetSphere { .. } => {
            let level: f64 = theta.iter().map(|t| t * t).sum::<f64>() - 1.0;
            level.abs() > KINK_MARGIN
        }
        _ => false,
    }
}

/// Strict interior with margin, where the squared penalty is identically
/// zero on the whole stencil.
fn interior_with_margin(set: &ConstraintSet, theta: &[f64]) -> bool {
    match set {
        ConstraintSet::Ball { center, radius } => {
            let r: f64 = theta
                .iter()
                .zip(center)
                .map(|(t, c)| (t - c) * (t - c))
                .sum::<f64>()
                .sqrt();
            r < radius - KINK_MARGIN
        }
        ConstraintSet::StochasticDominance { rows, cols } => {
            let (a, b) = ConstraintSet::dominance_halfspaces(*rows, *cols);
            (0..a.rows()).all(|i| {
                let s: f64 = a.row(i).iter().zip(theta).map(|(r, t)| r * t).sum();
                s - b[i] > KINK_MARGIN
            })
        }
        _ => false,
    }
}

/// Worst relative error observed for one model-flavor combination.
#[derive(Debug, Clone)]
pub struct GradCheckRow {
    pub model: &'static str,
    pub flavor: &'static str,
    pub points: usize,
    pub worst_rel_err: f64,
}

/// Checks analytic gradients of the relaxed posterior against central
/// finite differences at `points_per_case` random valid points for every
/// model and each smooth penalty flavor. Relative error is measured in
/// the vector norm, `‖g − g_fd‖ / max(1, ‖g‖)`.
pub fn gradient_checks(points_per_case: usize, seed: u64) -> Result<Vec<GradCheckRow>> {
    let mut rng = Rng::new(seed);
    let mut rows = Vec::new();
    for case in gradient_cases()? {
        for (flavor_name, mk_flavor) in [
            ("squared", PenaltyFlavor::SquaredDistance { rho: 50.0 }),
            ("level_set", PenaltyFlavor::LevelSetSphere { rho: 50.0 }),
        ] {
            let dim = case.model.dim();
            let set = match mk_flavor {
                PenaltyFlavor::LevelSetSphere { .. } => ConstraintSet::unit_sphere(dim),
                _ => case.squared_set.clone(),
            };
            let post = RelaxedPosterior::new(&case.model, set.clone(), mk_flavor)?;
            let mut worst: f64 = 0.0;
            let mut accepted = 0usize;
            let mut attempts = 0usize;
            while accepted < points_per_case {
                attempts += 1;
                if attempts > 200 * points_per_case {
                    anyhow::bail!("could not sample enough valid points for {}", case.name);
                }
                let theta = sample_point(&case.model, &mut rng);
                if !margin_ok(&mk_flavor, &set, &theta) {
                    continue;
                }
                let g = post.grad_relaxed(&theta)?;
                let mut fd = vec![0.0; dim];
                let mut ok = true;
                for k in 0..dim {
                    let h = 1e-6 * theta[k].abs().max(1.0);
                    let mut plus = theta.clone();
                    let mut minus = theta.clone();
                    plus[k] += h;
                    minus[k] -= h;
                    let (lp, lm) = (post.logp_relaxed(&plus)?, post.logp_relaxed(&minus)?);
                    if !lp.is_finite() || !lm.is_finite() {
                        ok = false;
                        break;
                    }
                    fd[k] = (lp - lm) / (2.0 * h);
                }
                if !ok {
                    continue;
                }
                let gnorm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let diff: f64 = g
                    .iter()
                    .zip(&fd)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(diff / gnorm.max(1.0));
                accepted += 1;
            }
            rows.push(GradCheckRow {
                model: case.name,
                flavor: flavor_name,
                points: points_per_case,
                worst_rel_err: worst,
            });
        }
    }
    Ok(rows)
}

/// One named check with its pass flag and a short detail line.
pub struct CheckLine {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// The `check` subcommand body: runs the oracle suites and returns one
/// line per check.
pub fn run_all() -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();

    let rhos = [1.0, 10.0, 100.0, 1000.0, 10_000.0];
    let t1 = map_convergence_closed_form(&rhos)?;
    let worst = t1
        .iter()
        .map(|(_, map, expect)| (map - expect).abs())
        .fold(0.0f64, f64::max);
    lines.push(CheckLine {
        name: "map-convergence (closed form)",
        passed: worst <= 1e-8 && t1.last().map(|(_, m, _)| m.abs() < 2e-4).unwrap_or(false),
        detail: format!("worst |MAP - 1/(1+rho)| = {worst:.2e} over rho in 1..1e4"),
    });

    let curve = tv_convergence_curve(&[1.0, 10.0, 100.0, 1000.0], 100_000)?;
    let decreasing = curve.windows(2).all(|w| w[1].1 < w[0].1);
    let tvs: Vec<String> = curve.iter().map(|(r, tv)| format!("tv({r})={tv:.4}")).collect();
    lines.push(CheckLine {
        name: "tv-convergence (grid quadrature)",
        passed: decreasing,
        detail: tvs.join(", "),
    });

    let grads = gradient_checks(100, 20_240_817)?;
    let worst_grad = grads.iter().map(|r| r.worst_rel_err).fold(0.0f64, f64::max);
    lines.push(CheckLine {
        name: "gradient finite differences",
        passed: worst_grad < 1e-5,
        detail: format!(
            "worst relative error {worst_grad:.2e} across {} model-flavor pairs",
            grads.len()
        ),
    });

    Ok(lines)
}
