//! Penalty calibration by exponential tilting.
//!
//! Given draws from the unconstrained posterior, reweighting draw `θ_i` by
//! `w_i ∝ exp(−λ·dist(θ_i,Θ)²/2)` turns sample averages into expectations
//! under the tilted density — which is exactly the relaxed posterior with
//! penalty λ. Solving `E_tilted[½dist²] = D` for λ therefore calibrates the
//! penalty strength ρ := λ from an interpretable expected-distance budget.
//! The tilted moment is non-increasing in λ on any fixed sample, so a
//! bracketed bisection suffices.
//!
//! When the importance weights collapse (weight ESS below 50) the
//! calibration can re-sample from an intermediate relaxed posterior and
//! continue tilting relative to it ("staged tilting", at most five stages).

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hmc::{self, HmcConfig, SampleChain};
use crate::posterior::{LogTarget, PenaltyFlavor, RelaxedPosterior};
use crate::sets::ConstraintSet;

/// Minimum trustworthy importance-weight effective sample size.
pub const MIN_WEIGHT_ESS: f64 = 50.0;
/// Bracket expansion gives up beyond this tilt strength.
pub const LAMBDA_CAP: f64 = 1e12;
/// Maximum number of staged re-sampling rounds.
pub const MAX_STAGES: usize = 5;

/// Moment-matching problem: find λ with `E_tilted[½dist²] = D`.
pub struct TiltingProblem<'a, T: LogTarget> {
    base: &'a T,
    set: &'a ConstraintSet,
    budget: f64,
    bracket: (f64, f64),
    /// Half squared distances of the reference draws.
    half_sq: Vec<f64>,
    /// Sampler settings for staged re-sampling; `None` disables staging.
    stage_config: Option<HmcConfig>,
}

/// Self-normalized estimate of the tilted moment.
#[derive(Debug, Clone, Copy)]
pub struct TiltEstimate {
    pub moment: f64,
    pub std_error: f64,
    pub weight_ess: f64,
}

/// Calibration result; `lambda` is the penalty ρ to use downstream.
#[derive(Debug, Clone, Copy)]
pub struct TiltingSolution {
    pub lambda: f64,
    pub achieved_moment: f64,
    pub mc_std_error: f64,
    pub ess_of_weights: f64,
    /// Staged re-sampling rounds that were needed (0 = plain reweighting).
    pub stages: usize,
}

impl<'a, T: LogTarget> TiltingProblem<'a, T> {
    /// Builds the problem from reference chains drawn from the
    /// unconstrained posterior.
    pub fn new(
        base: &'a T,
        set: &'a ConstraintSet,
        budget: f64,
        reference: &[SampleChain],
        bracket: (f64, f64),
    ) -> Result<Self> {
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(Error::InvalidParameter("budget must be positive and finite"));
        }
        if !(bracket.0 >= 0.0 && bracket.1 > bracket.0) {
            return Err(Error::InvalidParameter("bracket must satisfy 0 <= lo < hi"));
        }
        let half_sq = half_squared_distances(set, reference)?;
        if half_sq.is_empty() {
            return Err(Error::InsufficientDraws { needed: 1, got: 0 });
        }
        Ok(TiltingProblem { base, set, budget, bracket, half_sq, stage_config: None })
    }

    /// Enables staged tilting with the given sampler settings.
    pub fn with_staging(mut self, config: HmcConfig) -> Self {
        self.stage_config = Some(config);
        self
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Self-normalized importance estimate of `E[½dist²]` under the tilt
    /// `exp(−λ·½dist²)` of the reference draws. Errors when the weights
    /// have collapsed.
    pub fn tilted_moment(&self, lambda: f64) -> Result<TiltEstimate> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter("lambda must be nonnegative"));
        }
        tilt_estimate(&self.half_sq, 0.0, lambda)
    }

    /// Normalized tilt weights over the reference draws (sum to one).
    pub fn normalized_weights(&self, lambda: f64) -> Vec<f64> {
        normalized_weights(&self.half_sq, 0.0, lambda)
    }

    /// Finds λ with the achieved moment within
    /// `max(3·SE, 1e−3·budget)` of the budget by monotone bisection,
    /// expanding the upper bracket by doubling as needed.
    pub fn calibrate(&self) -> Result<TiltingSolution> {
        let mut work: Vec<f64> = self.half_sq.clone();
        let mut lambda_base = 0.0;
        let mut stages = 0usize;

        // the tilt only tightens, so the budget must sit below the
        // unconstrained moment, estimated from the reference draws
        let at_zero = tilt_estimate(&work, 0.0, 0.0)?;
        if at_zero.moment <= self.budget {
            return Err(Error::CalibrationRefused { unconstrained_moment: at_zero.moment });
        }

        let estimate = |lambda: f64,
                            work: &mut Vec<f64>,
                            lambda_base: &mut f64,
                            stages: &mut usize|
         -> Result<TiltEstimate> {
            loop {
                match tilt_estimate(work, *lambda_base, lambda) {
                    Ok(e) => return Ok(e),
                    Err(Error::UnreliableEstimate { weight_ess }) => {
                        let Some(config) = &self.stage_config else {
                            return Err(Error::UnreliableEstimate { weight_ess });
                        };
                        if *stages >= MAX_STAGES {
                            return Err(Error::UnreliableEstimate { weight_ess });
                        }
                        *stages += 1;
                        let mut config = config.clone();
                        config.seed = config.seed.wrapping_add(*stages as u64);
                        let post = RelaxedPosterior::new(
                            self.base,
                            self.set.clone(),
                            PenaltyFlavor::SquaredDistance { rho: lambda },
                        )?;
                        let chains = hmc::sample(&post, &config)?;
                        *work = half_squared_distances(self.set, &chains)?;
                        *lambda_base = lambda;
                    }
                    Err(e) => return Err(e),
                }
            }
        };

        let tol_met = |e: &TiltEstimate, budget: f64| {
            (e.moment - budget).abs() <= (3.0 * e.std_error).max(1e-3 * budget)
        };

        // bracket: moment(lo) >= budget >= moment(hi)
        let (mut lo, mut hi) = self.bracket;
        let lo_est = estimate(lo, &mut work, &mut lambda_base, &mut stages)?;
        if lo_est.moment < self.budget {
            lo = 0.0;
        }
        loop {
            let hi_est = estimate(hi, &mut work, &mut lambda_base, &mut stages)?;
            if tol_met(&hi_est, self.budget) {
                return Ok(solution(hi, hi_est, stages));
            }
            if hi_est.moment <= self.budget {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > LAMBDA_CAP {
                return Err(Error::BudgetUnreachable { lambda_cap: LAMBDA_CAP });
            }
        }

        // bisection; the tilted moment is monotone in lambda per sample
        let mut best = None;
        for _ in 0..200 {
            let mid = if lo == 0.0 { 0.5 * hi } else { (lo * hi).sqrt() };
            let est = estimate(mid, &mut work, &mut lambda_base, &mut stages)?;
            best = Some((mid, est));
            if tol_met(&est, self.budget) {
                return Ok(solution(mid, est, stages));
            }
            if est.moment > self.budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if lo > 0.0 && (hi - lo) <= 1e-3 * hi {
                break;
            }
        }
        let (lambda, est) = best.expect("bisection ran at least once");
        Ok(solution(lambda, est, stages))
    }
}

fn solution(lambda: f64, e: TiltEstimate, stages: usize) -> TiltingSolution {
    TiltingSolution {
        lambda,
        achieved_moment: e.moment,
        mc_std_error: e.std_error,
        ess_of_weights: e.weight_ess,
        stages,
    }
}

fn half_squared_distances(set: &ConstraintSet, chains: &[SampleChain]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for chain in chains {
        for draw in &chain.draws {
            out.push(0.5 * set.dist_sq(draw)?);
        }
    }
    Ok(out)
}

/// Normalized weights `w_i ∝ exp(−(λ − λ_base)·d_i)` with a max-shift for
/// stability.
fn normalized_weights(half_sq: &[f64], lambda_base: f64, lambda: f64) -> Vec<f64> {
    let delta = lambda - lambda_base;
    let max_exp = half_sq
        .iter()
        .map(|d| -delta * d)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = half_sq.iter().map(|d| (-delta * d - max_exp).exp()).collect();
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    w
}

fn tilt_estimate(half_sq: &[f64], lambda_base: f64, lambda: f64) -> Result<TiltEstimate> {
    let w = normalized_weights(half_sq, lambda_base, lambda);
    let ess = 1.0 / w.iter().map(|wi| wi * wi).sum::<f64>();
    if ess < MIN_WEIGHT_ESS {
        return Err(Error::UnreliableEstimate { weight_ess: ess });
    }
    let moment: f64 = w.iter().zip(half_sq).map(|(wi, d)| wi * d).sum();
    let variance: f64 = w
        .iter()
        .zip(half_sq)
        .map(|(wi, d)| wi * wi * (d - moment) * (d - moment))
        .sum();
    Ok(TiltEstimate { moment, std_error: variance.sqrt(), weight_ess: ess })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[derive(Debug, Clone)]
    struct StdNormal;

    impl LogTarget for StdNormal {
        fn dim(&self) -> usize {
            1
        }
        fn logp(&self, theta: &[f64]) -> f64 {
            -0.5 * theta[0] * theta[0]
        }
        fn grad(&self, theta: &[f64]) -> Vec<f64> {
            alloc::vec![-theta[0]]
        }
    }

    fn halfline() -> ConstraintSet {
        ConstraintSet::box_bounds(alloc::vec![f64::NEG_INFINITY], alloc::vec![0.0]).unwrap()
    }

    /// i.i.d. standard normal draws wrapped as a chain.
    fn normal_reference(n: usize, seed: u64) -> SampleChain {
        let mut rng = Rng::new(seed);
        let draws: Vec<Vec<f64>> = (0..n).map(|_| alloc::vec![rng.normal()]).collect();
        SampleChain {
            chain_index: 0,
            accept_flags: alloc::vec![true; n],
            energies: alloc::vec![0.0; n],
            penalty_values: alloc::vec![0.0; n],
            acceptance_rate: 1.0,
            divergences: 0,
            step_size: 1.0,
            draws,
        }
    }

    /// Quadrature of `E[½ max(θ,0)²]` under `φ(θ)·exp(−λ·max(θ,0)²/2)`.
    fn quadrature_moment(lambda: f64) -> f64 {
        let n = 400_000;
        let (lo, hi) = (-10.0, 10.0);
        let h = (hi - lo) / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let t = lo + (i as f64 + 0.5) * h;
            let d = 0.5 * t.max(0.0) * t.max(0.0);
            let w = (-0.5 * t * t - lambda * d).exp();
            num += d * w;
            den += w;
        }
        num / den
    }

    #[test]
    fn zero_tilt_is_the_plain_average() {
        let set = halfline();
        let chain = normal_reference(5000, 11);
        let problem = TiltingProblem::new(&StdNormal, &set, 0.05, &[chain.clone()], (0.1, 10.0))
            .unwrap();
        let est = problem.tilted_moment(0.0).unwrap();
        let plain: f64 = chain
            .draws
            .iter()
            .map(|d| 0.5 * d[0].max(0.0) * d[0].max(0.0))
            .sum::<f64>()
            / chain.draws.len() as f64;
        assert!((est.moment - plain).abs() < 1e-12);
        assert!((est.weight_ess - chain.draws.len() as f64).abs() < 1e-6);
    }

    #[test]
    fn weights_normalize_and_moment_is_monotone() {
        let set = halfline();
        let chain = normal_reference(4000, 3);
        let problem =
            TiltingProblem::new(&StdNormal, &set, 0.05, &[chain], (0.1, 10.0)).unwrap();
        let w = problem.normalized_weights(2.5);
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);

        let mut last = f64::INFINITY;
        for lambda in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let m = problem.tilted_moment(lambda).unwrap().moment;
            assert!(m <= last + 1e-15, "moment not monotone at {lambda}");
            last = m;
        }
    }

    #[test]
    fn tilted_moment_matches_quadrature() {
        let set = halfline();
        let chain = normal_reference(200_000, 7);
        let problem =
            TiltingProblem::new(&StdNormal, &set, 0.05, &[chain], (0.1, 10.0)).unwrap();
        let est = problem.tilted_moment(1.0).unwrap();
        let oracle = quadrature_moment(1.0);
        assert!(
            (est.moment - oracle).abs() <= 3.0 * est.std_error.max(1e-4),
            "estimate {} vs quadrature {oracle}",
            est.moment
        );
    }

    #[test]
    fn calibrate_hits_budget_and_quadrature_root() {
        let set = halfline();
        let chain = normal_reference(200_000, 19);
        let problem =
            TiltingProblem::new(&StdNormal, &set, 0.05, &[chain], (0.5, 8.0)).unwrap();
        let sol = problem.calibrate().unwrap();
        assert!(
            (sol.achieved_moment - 0.05).abs()
                <= (3.0 * sol.mc_std_error).max(1e-3 * 0.05)
        );
        // root of the quadrature moment for D = 0.05
        let (mut lo, mut hi) = (0.1f64, 100.0f64);
        for _ in 0..80 {
            let mid = (lo * hi).sqrt();
            if quadrature_moment(mid) > 0.05 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = (lo * hi).sqrt();
        assert!(
            (sol.lambda - root).abs() / root < 0.1,
            "lambda {} vs quadrature root {root}",
            sol.lambda
        );
    }

    #[test]
    fn lambda_decreases_with_budget() {
        let set = halfline();
        let chain = normal_reference(100_000, 23);
        let mut lambdas = Vec::new();
        for budget in [0.01, 0.05, 0.1] {
            let problem =
                TiltingProblem::new(&StdNormal, &set, budget, &[chain.clone()], (0.5, 8.0))
                    .unwrap();
            lambdas.push(problem.calibrate().unwrap().lambda);
        }
        assert!(lambdas[0] > lambdas[1] && lambdas[1] > lambdas[2], "{lambdas:?}");
    }

    #[test]
    fn refuses_budget_above_unconstrained_moment() {
        let set = halfline();
        let chain = normal_reference(10_000, 31);
        // E[half sq dist] is about 0.25 for the standard normal
        let problem = TiltingProblem::new(&StdNormal, &set, 5.0, &[chain], (0.1, 10.0)).unwrap();
        assert!(matches!(problem.calibrate(), Err(Error::CalibrationRefused { .. })));
    }

    #[test]
    fn tiny_reference_sample_is_unreliable_at_strong_tilt() {
        let set = halfline();
        let chain = normal_reference(60, 41);
        let problem =
            TiltingProblem::new(&StdNormal, &set, 0.001, &[chain], (0.1, 10.0)).unwrap();
        // strong tilt concentrates all weight on a handful of draws
        assert!(matches!(
            problem.tilted_moment(5e4),
            Err(Error::UnreliableEstimate { .. })
        ));
    }

    #[test]
    fn budget_below_sample_floor_is_unreachable() {
        // singleton set with a cluster of ties at the smallest distance:
        // the tilted moment plateaus at that distance with healthy weight
        // ESS, so no finite tilt reaches a smaller budget
        let set = ConstraintSet::box_bounds(alloc::vec![0.0], alloc::vec![0.0]).unwrap();
        let mut draws: Vec<Vec<f64>> = alloc::vec![alloc::vec![1.0]; 100];
        let mut rng = Rng::new(61);
        draws.extend((0..1000).map(|_| alloc::vec![2.0 + rng.uniform()]));
        let n = draws.len();
        let chain = SampleChain {
            chain_index: 0,
            accept_flags: alloc::vec![true; n],
            energies: alloc::vec![0.0; n],
            penalty_values: alloc::vec![0.0; n],
            acceptance_rate: 1.0,
            divergences: 0,
            step_size: 1.0,
            draws,
        };
        // the floor is dist^2/2 = 0.5 at theta = 1
        let problem = TiltingProblem::new(&StdNormal, &set, 0.1, &[chain], (0.5, 8.0)).unwrap();
        assert!(matches!(problem.calibrate(), Err(Error::BudgetUnreachable { .. })));
    }

    #[test]
    fn staged_tilting_recovers_from_weight_collapse() {
        // singleton set {0}: every reference draw carries positive distance,
        // so a strong tilt collapses the weights and forces re-sampling;
        // the tilted density is N(0, 1/(1+lambda)) with moment 0.5/(1+lambda)
        let set = ConstraintSet::box_bounds(alloc::vec![0.0], alloc::vec![0.0]).unwrap();
        let chain = normal_reference(2000, 53);
        let stage = HmcConfig {
            num_warmup: 300,
            num_samples: 2000,
            num_chains: 1,
            num_steps: 16,
            seed: 99,
            ..HmcConfig::default()
        };
        let budget = 1e-4;
        let problem = TiltingProblem::new(&StdNormal, &set, budget, &[chain], (0.5, 8.0))
            .unwrap()
            .with_staging(stage);
        let sol = problem.calibrate().unwrap();
        assert!(sol.stages >= 1, "expected staging, got {}", sol.stages);
        assert!(
            (sol.achieved_moment - budget).abs() <= (3.0 * sol.mc_std_error).max(1e-3 * budget)
        );
        // analytic root: lambda = 0.5/budget - 1
        let root = 0.5 / budget - 1.0;
        assert!((sol.lambda - root).abs() / root < 0.2, "lambda {} vs {root}", sol.lambda);
    }
}
