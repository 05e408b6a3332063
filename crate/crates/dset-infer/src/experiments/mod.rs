//! Experiment drivers: each takes a validated config, runs chains, and
//! writes a self-contained report directory.

pub mod contingency;
pub mod custom;
pub mod ridge;
pub mod vmf;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use dset_core::hmc::{self, HmcConfig, UnconstrainedTarget};
use dset_core::mm;
use dset_core::posterior::{Model, ModelSpec, PenaltyFlavor, RelaxedPosterior};
use dset_core::sets::ConstraintSet;
use dset_core::tilting::TiltingProblem;
use dset_core::Matrix;

use crate::config::{Config, ConstraintSection, ExperimentKind, FlavorName, ModelSection};
use crate::io;
use crate::report;

/// Result of `run`, kept in memory so test suites can assert on values
/// without re-parsing the emitted files.
pub enum Outcome {
    Ridge(ridge::RidgeOutcome),
    Vmf(vmf::VmfOutcome),
    Contingency(contingency::ContingencyOutcome),
    Custom(custom::CustomOutcome),
}

/// Runs the configured experiment, writing its report under `out_dir`.
pub fn run(config: &Config, config_dir: &Path, out_dir: &Path) -> Result<Outcome> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    report::write_metadata(
        &out_dir.join("metadata.txt"),
        &config.to_toml().context("serializing config")?,
        config.experiment.seed,
    )?;
    match config.experiment.kind {
        ExperimentKind::RidgeBall => Ok(Outcome::Ridge(
            ridge::run(config, out_dir).context("stage: ridge experiment")?,
        )),
        ExperimentKind::RobustVmf => {
            Ok(Outcome::Vmf(vmf::run(config, out_dir).context("stage: vmf experiment")?))
        }
        ExperimentKind::Contingency => Ok(Outcome::Contingency(
            contingency::run(config, config_dir, out_dir)
                .context("stage: contingency experiment")?,
        )),
        ExperimentKind::Custom => Ok(Outcome::Custom(
            custom::run(config, config_dir, out_dir).context("stage: custom experiment")?,
        )),
    }
}

/// Model/set pair for the MAP and calibration paths.
pub struct BuiltProblem {
    pub model: Model,
    pub set: ConstraintSet,
    pub labels: Vec<String>,
}

/// Builds the (model, constraint) pair an experiment samples, without
/// running anything.
pub fn build_problem(config: &Config, config_dir: &Path) -> Result<BuiltProblem> {
    match config.experiment.kind {
        ExperimentKind::RidgeBall => {
            let (model, set, _) = ridge::simulate_problem(config)?;
            let labels = (0..model_dim(&model)).map(|k| format!("beta_{k}")).collect();
            Ok(BuiltProblem { model, set, labels })
        }
        ExperimentKind::RobustVmf => {
            let section = config.vmf.clone().unwrap_or_default();
            let model = ModelSpec::StudentTLocation {
                location: section.location.clone(),
                dof: section.dof,
                sigma2: section.sigma2,
            }
            .build()
            .context("building student-t target")?;
            let set = ConstraintSet::unit_sphere(section.location.len());
            let labels = ["x", "y", "z", "w"]
                .iter()
                .take(section.location.len())
                .map(|s| s.to_string())
                .collect();
            Ok(BuiltProblem { model, set, labels })
        }
        ExperimentKind::Contingency => contingency::build_problem(config, config_dir),
        ExperimentKind::Custom => build_custom_problem(config, config_dir),
    }
}

fn model_dim(model: &Model) -> usize {
    use dset_core::posterior::LogTarget;
    model.dim()
}

fn build_custom_problem(config: &Config, config_dir: &Path) -> Result<BuiltProblem> {
    let model_section = config
        .model
        .as_ref()
        .context("custom experiment needs a [model] section")?;
    let model = match model_section {
        ModelSection::GaussianLinear { x, y, sigma2 } => {
            let rows = x.len();
            let cols = x.first().map_or(0, Vec::len);
            if x.iter().any(|r| r.len() != cols) {
                bail!("model.x rows have unequal lengths");
            }
            let flat: Vec<f64> = x.iter().flatten().copied().collect();
            ModelSpec::GaussianLinear {
                x: Matrix::new(rows, cols, flat),
                y: y.clone(),
                sigma2: *sigma2,
            }
            .build()?
        }
        ModelSection::StudentT { location, dof, sigma2 } => ModelSpec::StudentTLocation {
            location: location.clone(),
            dof: *dof,
            sigma2: *sigma2,
        }
        .build()?,
        ModelSection::MultinomialTable { counts_csv, alpha } => {
            let counts = io::read_counts_csv(&resolve(config_dir, counts_csv))?;
            let alpha_table = vec![vec![*alpha; counts[0].len()]; counts.len()];
            ModelSpec::MultinomialDirichletTable { counts, alpha: alpha_table }.build()?
        }
    };
    let set = build_constraint(
        config
            .constraint
            .as_ref()
            .context("custom experiment needs a [constraint] section")?,
    )?;
    let labels = (0..model_dim(&model)).map(|k| format!("theta_{k}")).collect();
    Ok(BuiltProblem { model, set, labels })
}

pub fn build_constraint(section: &ConstraintSection) -> Result<ConstraintSet> {
    let set = match section {
        ConstraintSection::Ball { center, radius } => {
            ConstraintSet::ball(center.clone(), *radius)?
        }
        ConstraintSection::Sphere { center, radius } => {
            ConstraintSet::sphere(center.clone(), *radius)?
        }
        ConstraintSection::Box { lower, upper } => {
            ConstraintSet::box_bounds(lower.clone(), upper.clone())?
        }
        ConstraintSection::Simplex { dim } => ConstraintSet::simplex(*dim)?,
        ConstraintSection::Polyhedron { a, b, e, d } => {
            let cols = a.first().map_or(0, Vec::len);
            let a_mat = Matrix::new(a.len(), cols, a.iter().flatten().copied().collect());
            let e_cols = e.first().map_or(cols, Vec::len);
            let e_mat = Matrix::new(e.len(), e_cols, e.iter().flatten().copied().collect());
            ConstraintSet::polyhedron(a_mat, b.clone(), e_mat, d.clone())?
        }
        ConstraintSection::StochasticDominance { rows, cols } => {
            ConstraintSet::stochastic_dominance(*rows, *cols)?
        }
    };
    Ok(set)
}

/// Resolves a possibly relative data path against the config location.
pub fn resolve(config_dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_dir.join(p)
    }
}

pub fn flavor_from(name: FlavorName, rho: f64) -> PenaltyFlavor {
    match name {
        FlavorName::Squared => PenaltyFlavor::SquaredDistance { rho },
        FlavorName::Unsquared => PenaltyFlavor::UnsquaredDistance { rho },
        FlavorName::LevelSet => PenaltyFlavor::LevelSetSphere { rho },
        FlavorName::Sharp => PenaltyFlavor::Sharp,
    }
}

/// Outcome of the `map` subcommand.
pub struct MapOutcome {
    pub theta: Vec<f64>,
    pub trace_len: usize,
}

/// Proximal-distance MAP for the configured experiment, with the iterate
/// trace written as CSV.
pub fn run_map(config: &Config, config_dir: &Path, out_dir: &Path) -> Result<MapOutcome> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    let problem = build_problem(config, config_dir).context("stage: building problem")?;
    let rho = config
        .rho_or_default()
        .or_else(|| config.vmf.as_ref().and_then(|v| v.rhos.first().copied()))
        .context("map needs penalty.rho (or an experiment default)")?;
    if config.penalty.flavor != FlavorName::Squared {
        bail!("the proximal-distance MAP is defined for the squared flavor only");
    }
    let post = RelaxedPosterior::new(
        &problem.model,
        problem.set.clone(),
        PenaltyFlavor::SquaredDistance { rho },
    )
    .context("stage: composing relaxed posterior")?;
    let init = {
        use dset_core::posterior::LogTarget;
        problem.model.init_anchor()
    };
    let (theta, trace) =
        mm::map_fixed_rho_traced(&post, &init, 1e-10).context("stage: proximal-distance MAP")?;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(trace.len());
    for state in &trace {
        let mut row = vec![state.iteration as f64, state.objective, state.step_norm];
        row.extend_from_slice(&state.theta);
        rows.push(row);
    }
    io::write_matrix_csv(&out_dir.join("map_trace.csv"), &rows)?;
    io::write_matrix_csv(&out_dir.join("map.csv"), &[theta.clone()])?;
    report::write_metadata(
        &out_dir.join("metadata.txt"),
        &config.to_toml()?,
        config.experiment.seed,
    )?;
    Ok(MapOutcome { theta, trace_len: trace.len() })
}

/// Outcome of the calibration stage.
pub struct CalibrationOutcome {
    pub lambda: f64,
    pub achieved_moment: f64,
    pub mc_std_error: f64,
    pub ess_of_weights: f64,
    pub stages: usize,
    pub unconstrained_moment: f64,
}

/// Runs an unconstrained reference chain, calibrates the penalty from the
/// configured budget, then runs the experiment at `rho = lambda`.
pub fn calibrate_then_run(
    config: &Config,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<(CalibrationOutcome, Outcome)> {
    let budget = config
        .penalty
        .budget
        .context("calibrate needs penalty.budget (and no penalty.rho)")?;
    if config.penalty.rho.is_some() {
        bail!("calibrate needs penalty.budget without penalty.rho");
    }
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    let problem = build_problem(config, config_dir).context("stage: building problem")?;
    let reference_config = HmcConfig {
        seed: config.experiment.seed.wrapping_add(0x7e57),
        ..config.hmc.to_core(config.experiment.seed)
    };
    let target = UnconstrainedTarget(&problem.model);
    let reference =
        hmc::sample(&target, &reference_config).context("stage: unconstrained reference chain")?;
    io::write_chains_csv(&out_dir.join("reference_chains.csv"), &reference)?;

    let tilting = TiltingProblem::new(&problem.model, &problem.set, budget, &reference, (1.0, 64.0))
        .context("stage: tilting setup")?
        .with_staging(reference_config.clone());
    let unconstrained_moment = tilting
        .tilted_moment(0.0)
        .map(|e| e.moment)
        .unwrap_or(f64::NAN);
    let solution = tilting.calibrate().context("stage: tilting calibration")?;

    let calibration = CalibrationOutcome {
        lambda: solution.lambda,
        achieved_moment: solution.achieved_moment,
        mc_std_error: solution.mc_std_error,
        ess_of_weights: solution.ess_of_weights,
        stages: solution.stages,
        unconstrained_moment,
    };
    let mut text = String::new();
    use std::fmt::Write as _;
    writeln!(text, "budget:               {budget}").unwrap();
    writeln!(text, "unconstrained moment: {unconstrained_moment}").unwrap();
    writeln!(text, "calibrated lambda:    {}", calibration.lambda).unwrap();
    writeln!(text, "achieved moment:      {}", calibration.achieved_moment).unwrap();
    writeln!(text, "mc std error:         {}", calibration.mc_std_error).unwrap();
    writeln!(text, "weight ess:           {}", calibration.ess_of_weights).unwrap();
    writeln!(text, "stages:               {}", calibration.stages).unwrap();
    fs::write(out_dir.join("calibration.txt"), text)?;

    let mut run_config = config.clone();
    run_config.penalty.budget = None;
    run_config.penalty.rho = Some(calibration.lambda);
    let outcome = run(&run_config, config_dir, out_dir)?;
    Ok((calibration, outcome))
}
