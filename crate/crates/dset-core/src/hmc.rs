//! Hamiltonian Monte Carlo with leapfrog integration.
//!
//! The sampler works over anything implementing [`HmcTarget`]; in practice
//! that is a [`RelaxedPosterior`] (penalty included in the log-density and
//! its gradient) or an [`UnconstrainedTarget`] wrapper used for reference
//! chains. Step size can be adapted during warmup by dual averaging toward
//! a target acceptance rate; the number of leapfrog steps is fixed.
//!
//! Dynamics follow the standard Hamiltonian system
//! `dθ/dt = M⁻¹p`, `dp/dt = ∇_θ log π̃(θ)` with `H(θ,p) = −log π̃(θ) +
//! ½pᵀM⁻¹p`, discretized by the leapfrog scheme (half-step momentum,
//! full-step position, half-step momentum). Proposals are accepted with
//! probability `min{1, exp(H_current − H_proposal)}`.
//!
//! Trajectories abort early when an intermediate position leaves the
//! support of the base target (simplex-supported models), and proposals
//! with non-finite gradients or `|ΔH| > 1000` are rejected and counted as
//! divergent.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::posterior::{LogTarget, PenaltyFlavor, RelaxedPosterior};
use crate::rng::Rng;

/// Energy-error threshold beyond which a transition is recorded as
/// divergent and rejected.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Sampler configuration.
#[derive(Debug, Clone)]
pub struct HmcConfig {
    /// Leapfrog step size ε. With adaptation enabled this seeds the search;
    /// set to zero to pick the seed automatically.
    pub step_size: f64,
    /// Number of leapfrog steps L per proposal.
    pub num_steps: usize,
    /// Diagonal of the mass matrix; empty means identity.
    pub mass_diag: Vec<f64>,
    pub num_warmup: usize,
    pub num_samples: usize,
    pub num_chains: usize,
    pub seed: u64,
    /// Dual-averaging adaptation of ε during warmup.
    pub step_size_adapt: bool,
    /// Acceptance rate targeted by the adaptation.
    pub target_accept: f64,
    /// Per-iteration uniform jitter of ε as a fraction of its value, which
    /// breaks resonances of the fixed-length integrator on stiff targets.
    pub step_jitter: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        HmcConfig {
            step_size: 0.0,
            num_steps: 32,
            mass_diag: Vec::new(),
            num_warmup: 1000,
            num_samples: 1000,
            num_chains: 2,
            seed: 0,
            step_size_adapt: true,
            target_accept: 0.8,
            step_jitter: 0.0,
        }
    }
}

impl HmcConfig {
    fn validate(&self, dim: usize) -> Result<()> {
        if self.num_steps == 0 {
            return Err(Error::InvalidParameter("num_steps must be at least 1"));
        }
        if self.num_samples == 0 || self.num_chains == 0 {
            return Err(Error::InvalidParameter("need at least one sample and one chain"));
        }
        if !self.mass_diag.is_empty() {
            if self.mass_diag.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: self.mass_diag.len() });
            }
            if self.mass_diag.iter().any(|&m| !(m > 0.0)) {
                return Err(Error::InvalidParameter("mass matrix entries must be positive"));
            }
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParameter("target acceptance must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.step_jitter) {
            return Err(Error::InvalidParameter("step jitter must lie in [0, 1)"));
        }
        if !self.step_size_adapt && !(self.step_size > 0.0) {
            return Err(Error::InvalidParameter(
                "step_size must be positive when adaptation is disabled",
            ));
        }
        Ok(())
    }
}

/// What the sampler needs from a target density.
pub trait HmcTarget {
    fn dim(&self) -> usize;

    /// Penalized unnormalized log-density; `−∞` marks off-support points.
    fn logp(&self, theta: &[f64]) -> f64;

    /// Gradient used for integration. Non-finite entries flag a divergent
    /// trajectory and reject the proposal.
    fn grad(&self, theta: &[f64]) -> Vec<f64>;

    /// Hard support check; trajectories terminate when an intermediate
    /// position fails it.
    fn in_domain(&self, theta: &[f64]) -> bool;

    /// Squared distance to the constraint set, recorded per draw.
    fn dist_sq(&self, theta: &[f64]) -> f64;

    /// Draws a starting candidate (over-dispersed around an interior
    /// anchor, projected onto the set where one exists).
    fn init_candidate(&self, rng: &mut Rng) -> Vec<f64>;

    /// Model name used in initialization errors.
    fn name(&self) -> &'static str {
        "custom"
    }
}

impl<T: LogTarget> HmcTarget for RelaxedPosterior<T> {
    fn dim(&self) -> usize {
        RelaxedPosterior::dim(self)
    }

    fn logp(&self, theta: &[f64]) -> f64 {
        self.logp_relaxed(theta).unwrap_or(f64::NEG_INFINITY)
    }

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        // the sharp flavor integrates with the base gradient and lets the
        // Metropolis step reject off-set proposals
        let result = match self.flavor() {
            PenaltyFlavor::Sharp => Ok(self.base().grad(theta)),
            _ => self.grad_relaxed(theta),
        };
        result.unwrap_or_else(|_| vec![f64::NAN; theta.len()])
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        self.base().domain_check(theta)
    }

    fn dist_sq(&self, theta: &[f64]) -> f64 {
        RelaxedPosterior::dist_sq(self, theta).unwrap_or(f64::NAN)
    }

    fn init_candidate(&self, rng: &mut Rng) -> Vec<f64> {
        let anchor = self.base().init_anchor();
        let spread = self.base().init_spread();
        let jittered: Vec<f64> = anchor.iter().map(|a| a + spread * rng.normal()).collect();
        match self.set().project(&jittered) {
            Ok(proj) => proj.point,
            Err(_) => jittered,
        }
    }

    fn name(&self) -> &'static str {
        self.base().name()
    }
}

/// Penalty-free wrapper so reference chains for tilting calibration can run
/// on the unconstrained posterior with the same machinery.
#[derive(Debug, Clone)]
pub struct UnconstrainedTarget<T: LogTarget>(pub T);

impl<T: LogTarget> HmcTarget for UnconstrainedTarget<T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn logp(&self, theta: &[f64]) -> f64 {
        if self.0.domain_check(theta) {
            self.0.logp(theta)
        } else {
            f64::NEG_INFINITY
        }
    }
    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        self.0.grad(theta)
    }
    fn in_domain(&self, theta: &[f64]) -> bool {
        self.0.domain_check(theta)
    }
    fn dist_sq(&self, _theta: &[f64]) -> f64 {
        0.0
    }
    fn init_candidate(&self, rng: &mut Rng) -> Vec<f64> {
        let anchor = self.0.init_anchor();
        let spread = self.0.init_spread();
        anchor.iter().map(|a| a + spread * rng.normal()).collect()
    }
    fn name(&self) -> &'static str {
        self.0.name()
    }
}

/// One chain of retained draws with per-draw diagnostics.
#[derive(Debug, Clone)]
pub struct SampleChain {
    pub chain_index: usize,
    /// Exactly `num_samples` post-warmup positions.
    pub draws: Vec<Vec<f64>>,
    /// Whether the proposal at each retained iteration was accepted.
    pub accept_flags: Vec<bool>,
    /// Hamiltonian at the proposal for each retained iteration (infinite
    /// when the trajectory aborted off-support).
    pub energies: Vec<f64>,
    /// Squared distance to the constraint set of each retained draw.
    pub penalty_values: Vec<f64>,
    /// Mean of `accept_flags`.
    pub acceptance_rate: f64,
    /// Post-warmup transitions with `|ΔH|` above the divergence threshold.
    pub divergences: usize,
    /// Step size in effect after warmup.
    pub step_size: f64,
}

impl SampleChain {
    pub fn num_draws(&self) -> usize {
        self.draws.len()
    }

    pub fn dim(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    /// Values of one coordinate across draws.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[k]).collect()
    }
}

/// Outcome of a leapfrog trajectory.
#[derive(Debug, Clone)]
pub struct LeapfrogOutcome {
    pub theta: Vec<f64>,
    pub momentum: Vec<f64>,
    /// An intermediate position left the support; the proposal is void.
    pub off_support: bool,
    /// A gradient evaluated to a non-finite value along the way.
    pub divergent: bool,
}

/// Runs `steps` leapfrog updates from `(theta, momentum)` with step size
/// `eps` under the diagonal mass matrix `mass` (empty = identity).
pub fn leapfrog<T: HmcTarget>(
    target: &T,
    theta: &[f64],
    momentum: &[f64],
    eps: f64,
    steps: usize,
    mass: &[f64],
) -> LeapfrogOutcome {
    let dim = theta.len();
    let mut q = theta.to_vec();
    let mut p = momentum.to_vec();
    let inv_mass: Vec<f64> = if mass.is_empty() {
        vec![1.0; dim]
    } else {
        mass.iter().map(|m| 1.0 / m).collect()
    };

    let mut grad = target.grad(&q);
    if !all_finite(&grad) {
        return LeapfrogOutcome { theta: q, momentum: p, off_support: false, divergent: true };
    }
    for _ in 0..steps {
        for i in 0..dim {
            p[i] += 0.5 * eps * grad[i];
        }
        for i in 0..dim {
            q[i] += eps * inv_mass[i] * p[i];
        }
        if !target.in_domain(&q) {
            return LeapfrogOutcome { theta: q, momentum: p, off_support: true, divergent: false };
        }
        grad = target.grad(&q);
        if !all_finite(&grad) {
            return LeapfrogOutcome { theta: q, momentum: p, off_support: false, divergent: true };
        }
        for i in 0..dim {
            p[i] += 0.5 * eps * grad[i];
        }
    }
    LeapfrogOutcome { theta: q, momentum: p, off_support: false, divergent: false }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn kinetic(p: &[f64], mass: &[f64]) -> f64 {
    if mass.is_empty() {
        0.5 * p.iter().map(|x| x * x).sum::<f64>()
    } else {
        0.5 * p.iter().zip(mass).map(|(x, m)| x * x / m).sum::<f64>()
    }
}

fn draw_momentum(rng: &mut Rng, dim: usize, mass: &[f64]) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let scale = if mass.is_empty() { 1.0 } else { mass[i].sqrt() };
            scale * rng.normal()
        })
        .collect()
}

/// Crude doubling/halving search for a step size whose one-step acceptance
/// straddles one half, used to seed dual averaging.
fn find_initial_step<T: HmcTarget>(
    target: &T,
    theta: &[f64],
    mass: &[f64],
    rng: &mut Rng,
    seed_eps: f64,
) -> f64 {
    let mut eps = if seed_eps > 0.0 { seed_eps } else { 0.1 };
    let h0 = -target.logp(theta);
    let ratio = |eps: f64, rng: &mut Rng| -> f64 {
        let p = draw_momentum(rng, theta.len(), mass);
        let h_cur = h0 + kinetic(&p, mass);
        let out = leapfrog(target, theta, &p, eps, 1, mass);
        if out.off_support || out.divergent {
            return 0.0;
        }
        let h_prop = -target.logp(&out.theta) + kinetic(&out.momentum, mass);
        if !h_prop.is_finite() {
            return 0.0;
        }
        (h_cur - h_prop).exp().min(1.0)
    };
    let first = ratio(eps, rng);
    let go_up = first > 0.5;
    for _ in 0..60 {
        eps *= if go_up { 2.0 } else { 0.5 };
        if !(1e-12..=1e6).contains(&eps) {
            break;
        }
        let r = ratio(eps, rng);
        if go_up && r <= 0.5 {
            eps *= 0.5;
            break;
        }
        if !go_up && r > 0.5 {
            break;
        }
    }
    eps.clamp(1e-12, 1e6)
}

/// Dual-averaging state (Nesterov averaging of log step sizes).
struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_avg: f64,
    h_avg: f64,
    m: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, delta: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_avg: eps0.ln(),
            h_avg: 0.0,
            m: 0.0,
            delta,
        }
    }

    fn update(&mut self, accept_prob: f64) {
        self.m += 1.0;
        let eta = 1.0 / (self.m + Self::T0);
        self.h_avg = (1.0 - eta) * self.h_avg + eta * (self.delta - accept_prob);
        self.log_eps = self.mu - self.m.sqrt() / Self::GAMMA * self.h_avg;
        let weight = self.m.powf(-Self::KAPPA);
        self.log_eps_avg = weight * self.log_eps + (1.0 - weight) * self.log_eps_avg;
    }

    fn current(&self) -> f64 {
        self.log_eps.exp().clamp(1e-12, 1e6)
    }

    fn averaged(&self) -> f64 {
        self.log_eps_avg.exp().clamp(1e-12, 1e6)
    }
}

/// Runs all configured chains sequentially. Chains are independent and
/// derive their RNG streams from `(seed, chain_index)`, so the result is
/// reproducible bit for bit.
pub fn sample<T: HmcTarget>(target: &T, config: &HmcConfig) -> Result<Vec<SampleChain>> {
    config.validate(target.dim())?;
    (0..config.num_chains)
        .map(|c| sample_chain(target, config, c))
        .collect()
}

/// Runs a single chain with the RNG stream for `chain_index`.
pub fn sample_chain<T: HmcTarget>(
    target: &T,
    config: &HmcConfig,
    chain_index: usize,
) -> Result<SampleChain> {
    config.validate(target.dim())?;
    let mut rng = Rng::for_chain(config.seed, chain_index as u64);
    let mass = &config.mass_diag;
    let dim = target.dim();

    // initialization: over-dispersed candidates until one is usable
    let mut theta = None;
    for _ in 0..100 {
        let candidate = target.init_candidate(&mut rng);
        if target.in_domain(&candidate) && target.logp(&candidate).is_finite() {
            theta = Some(candidate);
            break;
        }
    }
    let mut theta = theta.ok_or(Error::InitializationFailed { model: target.name() })?;
    let mut logp_cur = target.logp(&theta);

    let mut eps = if config.step_size_adapt {
        find_initial_step(target, &theta, mass, &mut rng, config.step_size)
    } else {
        config.step_size
    };
    let mut adapter = config
        .step_size_adapt
        .then(|| DualAveraging::new(eps, config.target_accept));

    let total = config.num_warmup + config.num_samples;
    let mut draws = Vec::with_capacity(config.num_samples);
    let mut accept_flags = Vec::with_capacity(config.num_samples);
    let mut energies = Vec::with_capacity(config.num_samples);
    let mut penalties = Vec::with_capacity(config.num_samples);
    let mut divergences = 0usize;

    for iter in 0..total {
        let warmup = iter < config.num_warmup;
        if !warmup {
            if let Some(adapter) = adapter.take() {
                eps = adapter.averaged();
            }
        }
        let eps_iter = if config.step_jitter > 0.0 {
            eps * (1.0 + config.step_jitter * (2.0 * rng.uniform() - 1.0))
        } else {
            eps
        };

        let p0 = draw_momentum(&mut rng, dim, mass);
        let h_cur = -logp_cur + kinetic(&p0, mass);
        let out = leapfrog(target, &theta, &p0, eps_iter, config.num_steps, mass);

        let mut accept = false;
        let mut h_prop = f64::INFINITY;
        let mut accept_prob = 0.0;
        let mut divergent = out.divergent;
        if !out.off_support && !out.divergent {
            let logp_prop = target.logp(&out.theta);
            if logp_prop > f64::NEG_INFINITY {
                h_prop = -logp_prop + kinetic(&out.momentum, mass);
                let delta_h = h_prop - h_cur;
                if !delta_h.is_finite() || delta_h.abs() > DIVERGENCE_THRESHOLD {
                    divergent = true;
                } else {
                    accept_prob = (-delta_h).exp().min(1.0);
                    accept = accept_prob >= 1.0 || rng.uniform() < accept_prob;
                    if accept {
                        theta = out.theta;
                        logp_cur = logp_prop;
                    }
                }
            }
            // a zero-density proposal (sharp flavor off the set, or off
            // support) is a plain rejection, not a divergence
        }

        if let Some(adapter) = adapter.as_mut() {
            adapter.update(accept_prob);
            eps = adapter.current();
        }

        if !warmup {
            if divergent {
                divergences += 1;
            }
            draws.push(theta.clone());
            accept_flags.push(accept);
            energies.push(h_prop);
            penalties.push(target.dist_sq(&theta));
        }
    }

    let acceptance_rate =
        accept_flags.iter().filter(|&&a| a).count() as f64 / accept_flags.len() as f64;
    Ok(SampleChain {
        chain_index,
        draws,
        accept_flags,
        energies,
        penalty_values: penalties,
        acceptance_rate,
        divergences,
        step_size: eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::{LogTarget, PenaltyFlavor, RelaxedPosterior};
    use crate::sets::ConstraintSet;

    #[derive(Debug, Clone)]
    struct Gaussian1D;

    impl LogTarget for Gaussian1D {
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

    fn harmonic() -> UnconstrainedTarget<Gaussian1D> {
        UnconstrainedTarget(Gaussian1D)
    }

    #[test]
    fn leapfrog_conserves_energy_at_small_step() {
        let target = harmonic();
        let theta = [1.3];
        let p = [0.4];
        let h0 = -target.logp(&theta) + kinetic(&p, &[]);
        let out = leapfrog(&target, &theta, &p, 1e-4, 1, &[]);
        let h1 = -target.logp(&out.theta) + kinetic(&out.momentum, &[]);
        assert!((h1 - h0).abs() < 1e-8, "dH = {}", h1 - h0);
    }

    #[test]
    fn leapfrog_is_reversible() {
        let target = harmonic();
        let theta = [0.7];
        let p = [-1.1];
        let fwd = leapfrog(&target, &theta, &p, 0.05, 40, &[]);
        let neg_p: Vec<f64> = fwd.momentum.iter().map(|v| -v).collect();
        let back = leapfrog(&target, &fwd.theta, &neg_p, 0.05, 40, &[]);
        assert!((back.theta[0] - theta[0]).abs() < 1e-10);
        assert!((back.momentum[0] + p[0]).abs() < 1e-10);
    }

    #[test]
    fn leapfrog_energy_error_scales_quadratically() {
        // fixed integration time, halving eps: |dH| ~ eps^2
        let target = harmonic();
        let theta = [1.0];
        let p = [0.5];
        let time = 1.0;
        let mut errors = Vec::new();
        let mut epss = Vec::new();
        for k in 3..9 {
            let steps = 1usize << k;
            let eps = time / steps as f64;
            let out = leapfrog(&target, &theta, &p, eps, steps, &[]);
            let h0 = -target.logp(&theta) + kinetic(&p, &[]);
            let h1 = -target.logp(&out.theta) + kinetic(&out.momentum, &[]);
            errors.push((h1 - h0).abs());
            epss.push(eps);
        }
        // slope of log|dH| vs log eps should be 2 +- 0.2
        let n = errors.len() as f64;
        let xs: Vec<f64> = epss.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let xbar = xs.iter().sum::<f64>() / n;
        let ybar = ys.iter().sum::<f64>() / n;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - xbar) * (y - ybar))
            .sum::<f64>()
            / xs.iter().map(|x| (x - xbar) * (x - xbar)).sum::<f64>();
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn standard_normal_moments_recovered() {
        let target = harmonic();
        let config = HmcConfig {
            num_warmup: 500,
            num_samples: 4000,
            num_chains: 1,
            num_steps: 16,
            seed: 99,
            ..HmcConfig::default()
        };
        let chains = sample(&target, &config).unwrap();
        let chain = &chains[0];
        assert_eq!(chain.num_draws(), 4000);
        let xs = chain.coordinate(0);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        // 3 MC standard errors with a generous correlation allowance
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.15, "var {var}");
        assert!(chain.acceptance_rate > 0.5);
    }

    #[test]
    fn seeded_chains_are_bit_identical() {
        let target = harmonic();
        let config = HmcConfig {
            num_warmup: 50,
            num_samples: 100,
            num_chains: 2,
            num_steps: 8,
            seed: 1234,
            step_jitter: 0.2,
            ..HmcConfig::default()
        };
        let a = sample(&target, &config).unwrap();
        let b = sample(&target, &config).unwrap();
        for (ca, cb) in a.iter().zip(&b) {
            assert_eq!(ca.draws, cb.draws);
            assert_eq!(ca.accept_flags, cb.accept_flags);
            assert_eq!(ca.step_size, cb.step_size);
        }
        // different chains differ
        assert_ne!(a[0].draws, a[1].draws);
    }

    #[test]
    fn sharp_flavor_keeps_draws_on_the_set() {
        let post = RelaxedPosterior::new(
            Gaussian1D,
            ConstraintSet::box_bounds(vec![f64::NEG_INFINITY], vec![0.0]).unwrap(),
            PenaltyFlavor::Sharp,
        )
        .unwrap();
        let config = HmcConfig {
            num_warmup: 200,
            num_samples: 500,
            num_chains: 1,
            num_steps: 8,
            seed: 7,
            ..HmcConfig::default()
        };
        let chain = &sample(&post, &config).unwrap()[0];
        assert!(chain.draws.iter().all(|d| d[0] <= 0.0));
        assert!(chain.penalty_values.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn domain_violations_reject_draws() {
        // flat target restricted to the unit interval through domain_check
        #[derive(Debug, Clone)]
        struct OpenInterval;
        impl LogTarget for OpenInterval {
            fn dim(&self) -> usize {
                1
            }
            fn logp(&self, theta: &[f64]) -> f64 {
                if self.domain_check(theta) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            fn grad(&self, _: &[f64]) -> Vec<f64> {
                vec![0.0]
            }
            fn domain_check(&self, theta: &[f64]) -> bool {
                theta[0] > 0.0 && theta[0] < 1.0
            }
            fn init_anchor(&self) -> Vec<f64> {
                vec![0.5]
            }
            fn init_spread(&self) -> f64 {
                0.05
            }
        }
        let target = UnconstrainedTarget(OpenInterval);
        let config = HmcConfig {
            num_warmup: 100,
            num_samples: 400,
            num_chains: 1,
            num_steps: 4,
            seed: 3,
            ..HmcConfig::default()
        };
        let chain = &sample(&target, &config).unwrap()[0];
        assert!(chain.draws.iter().all(|d| d[0] > 0.0 && d[0] < 1.0));
        // the sampler must move despite boundary rejections
        assert!(chain.acceptance_rate > 0.2);
    }

    #[test]
    fn stationary_penalty_matches_quadrature() {
        // flat base on R, Theta = [-1, 1]: the relaxed density is flat on
        // the interval with half-gaussian tails of scale 1/sqrt(rho)
        let rho = 1.0;
        let post = RelaxedPosterior::new(
            Flat(1),
            ConstraintSet::unit_ball(1),
            PenaltyFlavor::SquaredDistance { rho },
        )
        .unwrap();
        let config = HmcConfig {
            num_warmup: 500,
            num_samples: 10_000,
            num_chains: 1,
            num_steps: 16,
            seed: 21,
            ..HmcConfig::default()
        };
        let chain = &sample(&post, &config).unwrap()[0];
        let mean_pen =
            chain.penalty_values.iter().sum::<f64>() / chain.penalty_values.len() as f64;

        // quadrature oracle for E[dist^2] under the exact relaxed density
        let dist = |t: f64| (t.abs() - 1.0).max(0.0);
        let n = 400_000;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let t = lo + (i as f64 + 0.5) * h;
            let d2 = dist(t) * dist(t);
            let w = (-0.5 * rho * d2).exp();
            num += d2 * w;
            den += w;
        }
        let oracle = num / den;
        assert!(
            (mean_pen - oracle).abs() < 0.08,
            "empirical {mean_pen} vs quadrature {oracle}"
        );
        assert!(mean_pen > 0.5 / rho && mean_pen < 3.0 / rho);
    }

    #[test]
    fn initialization_failure_names_the_model() {
        #[derive(Debug, Clone)]
        struct Nowhere;
        impl LogTarget for Nowhere {
            fn dim(&self) -> usize {
                1
            }
            fn logp(&self, _: &[f64]) -> f64 {
                f64::NEG_INFINITY
            }
            fn grad(&self, _: &[f64]) -> Vec<f64> {
                vec![0.0]
            }
            fn domain_check(&self, _: &[f64]) -> bool {
                false
            }
            fn name(&self) -> &'static str {
                "nowhere"
            }
        }
        let target = UnconstrainedTarget(Nowhere);
        let err = sample(&target, &HmcConfig::default()).unwrap_err();
        assert_eq!(err, crate::Error::InitializationFailed { model: "nowhere" });
    }

    #[test]
    fn divergences_are_counted_and_rejected() {
        // a target with a gradient cliff: logp fine, grad NaN beyond 2
        #[derive(Debug, Clone)]
        struct Cliff;
        impl LogTarget for Cliff {
            fn dim(&self) -> usize {
                1
            }
            fn logp(&self, theta: &[f64]) -> f64 {
                -0.5 * theta[0] * theta[0]
            }
            fn grad(&self, theta: &[f64]) -> Vec<f64> {
                if theta[0].abs() > 2.0 {
                    vec![f64::NAN]
                } else {
                    vec![-theta[0]]
                }
            }
        }
        let target = UnconstrainedTarget(Cliff);
        let config = HmcConfig {
            num_warmup: 0,
            num_samples: 2000,
            num_chains: 1,
            num_steps: 32,
            step_size: 0.9,
            step_size_adapt: false,
            seed: 5,
            ..HmcConfig::default()
        };
        let chain = &sample(&target, &config).unwrap()[0];
        assert!(chain.divergences > 0);
        assert!(chain.draws.iter().all(|d| d[0].is_finite()));
    }
}
