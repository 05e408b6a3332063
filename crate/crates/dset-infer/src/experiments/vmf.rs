//! Robust von Mises-Fisher comparison: Student-t location kernel over the
//! unit sphere, sampled under the squared distance-to-set penalty and the
//! algebraic level-set relaxation across a penalty sweep.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use dset_core::diagnostics::{self, ChainSummary};
use dset_core::hmc::{self, SampleChain};
use dset_core::posterior::{ModelSpec, PenaltyFlavor, RelaxedPosterior};
use dset_core::sets::ConstraintSet;

use crate::config::{Config, VmfSection};
use crate::io;
use crate::report::{self, ComparisonRow};
use crate::svg;

pub struct VmfRun {
    pub flavor: &'static str,
    pub rho: f64,
    pub summary: ChainSummary,
    pub chains: Vec<SampleChain>,
}

pub struct VmfOutcome {
    pub runs: Vec<VmfRun>,
    pub rows: Vec<ComparisonRow>,
}

/// Leapfrog steps sized to the penalty stiffness: the radial frequency
/// grows like sqrt(rho), so holding the integration time near one means
/// L of about 1.2·sqrt(rho) once the step size adapts to stability.
pub fn steps_for(rho: f64) -> usize {
    let l = (1.2 * rho.sqrt()).round() as usize;
    l.clamp(32, 1024)
}

pub fn run(config: &Config, out_dir: &Path) -> Result<VmfOutcome> {
    let section = config.vmf.clone().unwrap_or_default();
    let outcome = run_section(config, &section, out_dir)?;

    let table = report::comparison_table(&outcome.rows);
    fs::write(out_dir.join("comparison.txt"), &table)?;
    let mut csv = String::from("rho,flavor,axis,mean,q2.5,q97.5,ess,acceptance\n");
    for row in &outcome.rows {
        use std::fmt::Write as _;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            row.rho, row.flavor, row.axis, row.mean, row.q025, row.q975, row.ess, row.acceptance
        )
        .unwrap();
    }
    fs::write(out_dir.join("comparison.csv"), csv)?;
    Ok(outcome)
}

pub fn run_section(config: &Config, section: &VmfSection, out_dir: &Path) -> Result<VmfOutcome> {
    let model = ModelSpec::StudentTLocation {
        location: section.location.clone(),
        dof: section.dof,
        sigma2: section.sigma2,
    }
    .build()
    .context("building student-t target")?;
    let dim = section.location.len();
    let set = ConstraintSet::unit_sphere(dim);
    let axes = ["x", "y", "z", "w"];

    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for (rho_idx, &rho) in section.rhos.iter().enumerate() {
        for (flavor_idx, flavor_name) in ["squared", "level_set"].iter().enumerate() {
            let flavor = if flavor_idx == 0 {
                PenaltyFlavor::SquaredDistance { rho }
            } else {
                PenaltyFlavor::LevelSetSphere { rho }
            };
            let post = RelaxedPosterior::new(&model, set.clone(), flavor)
                .context("composing relaxed posterior")?;
            let mut hmc_config = config.hmc.to_core(config.experiment.seed);
            hmc_config.num_steps = steps_for(rho);
            // decouple the streams of the sweep entries
            hmc_config.seed = config
                .experiment
                .seed
                .wrapping_add(1000 * flavor_idx as u64 + rho_idx as u64);
            let chains = hmc::sample(&post, &hmc_config)
                .with_context(|| format!("sampling {flavor_name} at rho={rho}"))?;
            let summary = diagnostics::summarize_pooled(&chains)?;

            let label = format!("{flavor_name}_{}", rho_label(rho));
            io::write_chains_csv(&out_dir.join(format!("chains_{label}.csv")), &chains)?;
            for (axis_idx, coord) in summary.coords.iter().enumerate() {
                rows.push(ComparisonRow {
                    rho,
                    flavor: if flavor_idx == 0 { "squared" } else { "level_set" },
                    axis: axes[axis_idx.min(axes.len() - 1)],
                    mean: coord.mean,
                    q025: coord.q025,
                    q975: coord.q975,
                    ess: coord.ess,
                    acceptance: summary.acceptance_rate,
                });
            }
            runs.push(VmfRun {
                flavor: if flavor_idx == 0 { "squared" } else { "level_set" },
                rho,
                summary,
                chains,
            });
        }
    }

    // diagnostics plots for the squared flavor at the stiffest penalty
    if let Some(run) = runs
        .iter()
        .filter(|r| r.flavor == "squared")
        .max_by(|a, b| a.rho.partial_cmp(&b.rho).expect("finite rho"))
    {
        let points: Vec<(f64, f64)> = run
            .chains
            .iter()
            .flat_map(|c| c.draws.iter().map(|d| (d[0], d[1])))
            .collect();
        fs::write(
            out_dir.join("scatter_xy.svg"),
            svg::scatter_plot(
                &format!("squared flavor draws (x, y) at rho={}", run.rho),
                &points,
                Some((0.0, 0.0, 1.0)),
                None,
            ),
        )?;
        let series: Vec<(String, Vec<f64>)> = run
            .chains
            .iter()
            .map(|c| (format!("chain {}", c.chain_index), c.coordinate(0)))
            .collect();
        let refs: Vec<(&str, &[f64])> =
            series.iter().map(|(l, v)| (l.as_str(), v.as_slice())).collect();
        fs::write(
            out_dir.join("trace_x.svg"),
            svg::trace_plot(&format!("x trace, squared flavor, rho={}", run.rho), &refs),
        )?;
        fs::write(
            out_dir.join("acf_x.svg"),
            svg::acf_plot("x autocorrelation, squared flavor", &run.summary.coords[0].acf),
        )?;
    }

    Ok(VmfOutcome { runs, rows })
}

fn rho_label(rho: f64) -> String {
    format!("{rho:e}").replace('.', "p")
}
