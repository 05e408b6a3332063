//! Chain summaries and grid-density oracles.
//!
//! Effective sample size uses Geyer's initial-positive-sequence estimator
//! on autocovariances, pooled across chains with a between-chain variance
//! term when more than one chain is supplied. This differs slightly from
//! other ESS conventions; it is the fixed choice for everything in this
//! workspace. Quantiles are empirical with linear interpolation, giving
//! equi-tailed credible intervals.
//!
//! [`GridDensity`] discretizes a log-density on a uniform 1-D or 2-D
//! lattice for total-variation comparisons against sharply constrained
//! references; it is the workhorse behind the desk-scale convergence
//! checks of the MAP and distribution limits.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hmc::SampleChain;
use crate::linalg;
use crate::mm;
use crate::posterior::LogTarget;
use crate::sets::ConstraintSet;

/// Largest autocorrelation lag reported in summaries.
pub const MAX_ACF_LAG: usize = 50;

/// Per-coordinate chain statistics.
#[derive(Debug, Clone)]
pub struct CoordinateSummary {
    pub mean: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
    pub ess: f64,
    /// Lag-k autocorrelations for k = 1..=50 (averaged over chains).
    pub acf: Vec<f64>,
    /// Constant-coordinate flag; ESS is reported as the draw count.
    pub degenerate: bool,
}

/// Summary of one or more chains over a shared target.
#[derive(Debug, Clone)]
pub struct ChainSummary {
    pub coords: Vec<CoordinateSummary>,
    pub acceptance_rate: f64,
    pub num_draws: usize,
    pub num_chains: usize,
    pub degenerate: bool,
}

/// Summarizes a single chain. Requires at least 100 draws.
pub fn summarize(chain: &SampleChain) -> Result<ChainSummary> {
    summarize_pooled(core::slice::from_ref(chain))
}

/// Summarizes several chains of equal length, pooling draws for means and
/// quantiles and combining autocovariances for the ESS.
pub fn summarize_pooled(chains: &[SampleChain]) -> Result<ChainSummary> {
    if chains.is_empty() {
        return Err(Error::InsufficientDraws { needed: 100, got: 0 });
    }
    let total: usize = chains.iter().map(SampleChain::num_draws).sum();
    if total < 100 {
        return Err(Error::InsufficientDraws { needed: 100, got: total });
    }
    let dim = chains[0].dim();
    let mut coords = Vec::with_capacity(dim);
    let mut any_degenerate = false;
    for k in 0..dim {
        let series: Vec<Vec<f64>> = chains.iter().map(|c| c.coordinate(k)).collect();
        let pooled: Vec<f64> = series.iter().flatten().copied().collect();
        let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
        let mut sorted = pooled.clone();
        sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite draws"));
        let variance =
            pooled.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / pooled.len() as f64;
        let degenerate = variance == 0.0;
        any_degenerate |= degenerate;
        let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
        let ess = if degenerate { total as f64 } else { multichain_ess(&refs) };
        let acf = averaged_acf(&refs, MAX_ACF_LAG);
        coords.push(CoordinateSummary {
            mean,
            q025: quantile(&sorted, 0.025),
            median: quantile(&sorted, 0.5),
            q975: quantile(&sorted, 0.975),
            ess,
            acf,
            degenerate,
        });
    }
    let acceptance_rate =
        chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / chains.len() as f64;
    Ok(ChainSummary {
        coords,
        acceptance_rate,
        num_draws: total,
        num_chains: chains.len(),
        degenerate: any_degenerate,
    })
}

/// Empirical quantile with linear interpolation on a sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Biased autocovariances `γ_k = (1/n)Σ(x_t − x̄)(x_{t+k} − x̄)`.
fn autocovariances(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    (0..=max_lag.min(n - 1))
        .map(|k| {
            centered[..n - k]
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Lag-k autocorrelations of one series.
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Vec<f64> {
    let acov = autocovariances(x, max_lag);
    if acov[0] == 0.0 {
        return vec![0.0; max_lag];
    }
    acov[1..].iter().map(|g| g / acov[0]).collect()
}

fn averaged_acf(chains: &[&[f64]], max_lag: usize) -> Vec<f64> {
    let mut acc = vec![0.0; max_lag];
    for chain in chains {
        let lag = max_lag.min(chain.len().saturating_sub(1));
        let acf = autocorrelations(chain, lag);
        for (a, v) in acc.iter_mut().zip(acf.iter()) {
            *a += v / chains.len() as f64;
        }
    }
    acc
}

/// Multi-chain ESS with Geyer's initial positive sequence on the combined
/// autocorrelations. Capped at the total number of draws.
pub fn multichain_ess(chains: &[&[f64]]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let total = (m * n) as f64;

    let mut chain_acov = Vec::with_capacity(m);
    let mut chain_mean = Vec::with_capacity(m);
    let mut chain_var = Vec::with_capacity(m);
    for chain in chains {
        let acov = autocovariances(&chain[..n], n - 1);
        chain_mean.push(chain.iter().take(n).sum::<f64>() / n as f64);
        chain_var.push(acov[0] * n as f64 / (n - 1) as f64);
        chain_acov.push(acov);
    }
    let within = chain_var.iter().sum::<f64>() / m as f64;
    let mut var_plus = within * (n - 1) as f64 / n as f64;
    if m > 1 {
        let grand = chain_mean.iter().sum::<f64>() / m as f64;
        let between = chain_mean
            .iter()
            .map(|mu| (mu - grand) * (mu - grand))
            .sum::<f64>()
            / (m - 1) as f64;
        var_plus += between;
    }
    if var_plus <= 0.0 {
        return total;
    }

    let rho = |k: usize| -> f64 {
        let mean_acov = chain_acov.iter().map(|a| a[k]).sum::<f64>() / m as f64;
        1.0 - (within - mean_acov) / var_plus
    };

    // initial positive sequence: sum consecutive lag pairs while positive
    let mut tau = 1.0;
    let mut k = 1usize;
    while k + 1 < n - 1 {
        let pair = rho(k) + rho(k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    (total / tau).min(total).max(1e-12)
}

/// Normalized density on a uniform 1-D or 2-D lattice of cell centers.
#[derive(Debug, Clone)]
pub struct GridDensity {
    bounds: Vec<(f64, f64)>,
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl GridDensity {
    /// Discretizes `exp(logp)` over `[lo, hi]` with `cells` centers and
    /// normalizes. Errors when the boundary cells carry 1e−8 or more of
    /// the mass, which means the bounds truncate the density.
    pub fn from_logp_1d(lo: f64, hi: f64, cells: usize, logp: impl Fn(f64) -> f64) -> Result<Self> {
        if !(hi > lo) || cells < 2 {
            return Err(Error::InvalidParameter("grid needs hi > lo and at least 2 cells"));
        }
        let h = (hi - lo) / cells as f64;
        let logs: Vec<f64> = (0..cells)
            .map(|i| logp(lo + (i as f64 + 0.5) * h))
            .collect();
        let probs = normalize_logs(&logs)?;
        let boundary = probs[0] + probs[cells - 1];
        if boundary >= 1e-8 {
            return Err(Error::GridTruncation { boundary_mass: boundary });
        }
        Ok(GridDensity { bounds: vec![(lo, hi)], shape: vec![cells], probs })
    }

    /// 2-D variant over a rectangle with `cells` per axis; boundary ring
    /// mass must stay below 1e−8.
    pub fn from_logp_2d(
        xb: (f64, f64),
        yb: (f64, f64),
        cells: (usize, usize),
        logp: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let (nx, ny) = cells;
        if !(xb.1 > xb.0) || !(yb.1 > yb.0) || nx < 2 || ny < 2 {
            return Err(Error::InvalidParameter("grid needs positive extents and 2+ cells"));
        }
        let hx = (xb.1 - xb.0) / nx as f64;
        let hy = (yb.1 - yb.0) / ny as f64;
        let mut logs = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let x = xb.0 + (i as f64 + 0.5) * hx;
            for j in 0..ny {
                let y = yb.0 + (j as f64 + 0.5) * hy;
                logs.push(logp(x, y));
            }
        }
        let probs = normalize_logs(&logs)?;
        let mut boundary = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                    boundary += probs[i * ny + j];
                }
            }
        }
        if boundary >= 1e-8 {
            return Err(Error::GridTruncation { boundary_mass: boundary });
        }
        Ok(GridDensity { bounds: vec![xb, yb], shape: vec![nx, ny], probs })
    }

    /// Builds a density from raw nonnegative weights on an existing grid
    /// geometry (no boundary check; meant for synthetic references).
    pub fn from_weights_1d(lo: f64, hi: f64, weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 || !(hi > lo) {
            return Err(Error::InvalidParameter("grid needs hi > lo and at least 2 cells"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite and nonnegative"));
        }
        let total: f64 = compensated_sum(&weights);
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("weights must not all vanish"));
        }
        let cells = weights.len();
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(GridDensity { bounds: vec![(lo, hi)], shape: vec![cells], probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Center of 1-D cell `i`.
    pub fn center_1d(&self, i: usize) -> f64 {
        let (lo, hi) = self.bounds[0];
        let h = (hi - lo) / self.shape[0] as f64;
        lo + (i as f64 + 0.5) * h
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.shape == other.shape && self.bounds == other.bounds
    }
}

fn normalize_logs(logs: &[f64]) -> Result<Vec<f64>> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InvalidParameter("log-density is nowhere finite on the grid"));
    }
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total = compensated_sum(&weights);
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Neumaier compensated summation; keeps grid normalizations exact to a
/// few ulps even over 1e5 cells.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Total variation distance `½ Σ |p_i − q_i|` between densities on the
/// same lattice.
pub fn tv_distance_grid(p: &GridDensity, q: &GridDensity) -> Result<f64> {
    if !p.same_grid(q) {
        return Err(Error::GridMismatch);
    }
    let diffs: Vec<f64> = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(0.5 * compensated_sum(&diffs))
}

/// A low-dimensional problem for empirical MAP-convergence checks:
/// the constrained MAP comes from a grid search, the relaxed MAPs from the
/// proximal-distance optimizer.
pub struct MapConvergenceProblem<'a, T: LogTarget> {
    pub base: &'a T,
    pub set: &'a ConstraintSet,
    /// Per-axis grid bounds (1 or 2 entries).
    pub bounds: Vec<(f64, f64)>,
    /// Cells per axis for the constrained grid search.
    pub cells: usize,
}

/// Outcome of [`map_convergence_check`].
#[derive(Debug, Clone)]
pub struct MapConvergenceReport {
    pub rhos: Vec<f64>,
    /// Relaxed MAP per penalty value.
    pub maps: Vec<Vec<f64>>,
    /// Distances `‖MAP_ρ − MAP_constrained‖`.
    pub errors: Vec<f64>,
    pub constrained_map: Vec<f64>,
    pub monotone: bool,
    pub final_error: f64,
}

impl MapConvergenceReport {
    /// True when the error sequence decreases monotonically to below `tol`.
    pub fn passed(&self, tol: f64) -> bool {
        self.monotone && self.final_error <= tol
    }
}

/// Verifies empirically that relaxed MAPs approach the constrained MAP as
/// the penalty grows: computes the constrained MAP by feasible grid search
/// and the relaxed MAPs by warm-started proximal-distance solves.
pub fn map_convergence_check<T: LogTarget>(
    problem: &MapConvergenceProblem<'_, T>,
    rho_schedule: &[f64],
    inner_tol: f64,
) -> Result<MapConvergenceReport> {
    let dim = problem.base.dim();
    if dim != problem.bounds.len() || !(1..=2).contains(&dim) {
        return Err(Error::InvalidParameter("grid search supports 1-D and 2-D problems"));
    }

    // constrained MAP: best feasible grid center
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut visit = |point: Vec<f64>| -> Result<()> {
        if problem.set.project(&point)?.distance <= 1e-9 && problem.base.domain_check(&point) {
            let value = problem.base.logp(&point);
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                best = Some((value, point));
            }
        }
        Ok(())
    };
    let (lo0, hi0) = problem.bounds[0];
    let h0 = (hi0 - lo0) / problem.cells as f64;
    if dim == 1 {
        for i in 0..problem.cells {
            visit(vec![lo0 + (i as f64 + 0.5) * h0])?;
        }
    } else {
        let (lo1, hi1) = problem.bounds[1];
        let h1 = (hi1 - lo1) / problem.cells as f64;
        for i in 0..problem.cells {
            for j in 0..problem.cells {
                visit(vec![lo0 + (i as f64 + 0.5) * h0, lo1 + (j as f64 + 0.5) * h1])?;
            }
        }
    }
    let (_, constrained_map) = best.ok_or(Error::InvalidParameter(
        "no feasible grid point; widen the bounds or refine the grid",
    ))?;

    let init = constrained_map.clone();
    let schedule = mm::map_rho_schedule(problem.base, problem.set, rho_schedule, &init, inner_tol)?;
    let maps: Vec<Vec<f64>> = schedule.per_rho.iter().map(|(_, x)| x.clone()).collect();
    let errors: Vec<f64> = maps
        .iter()
        .map(|x| linalg::dist2(x, &constrained_map))
        .collect();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0]));
    let final_error = *errors.last().expect("nonempty schedule");
    Ok(MapConvergenceReport {
        rhos: rho_schedule.to_vec(),
        maps,
        errors,
        constrained_map,
        monotone,
        final_error,
    })
}
