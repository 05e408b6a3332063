//! Contingency table under stochastic-dominance constraints: independent
//! multinomial rows with Dirichlet priors, sampled in the reduced
//! parameterization with the squared distance-to-set penalty on the
//! dominance cone, reporting quantile matrices of cumulative sums.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use dset_core::diagnostics::{self, quantile, ChainSummary};
use dset_core::hmc::{self, SampleChain};
use dset_core::posterior::{Model, ModelSpec, MultinomialDirichletTable, RelaxedPosterior};
use dset_core::sets::ConstraintSet;

use crate::config::Config;
use crate::experiments::{flavor_from, resolve, BuiltProblem};
use crate::io;
use crate::report;
use crate::svg;

pub struct ContingencyOutcome {
    pub rows: usize,
    pub cols: usize,
    pub chains: Vec<SampleChain>,
    pub summary: ChainSummary,
    /// Quantile matrices of per-row cumulative sums, I x J each.
    pub cumsum_q025: Vec<Vec<f64>>,
    pub cumsum_median: Vec<Vec<f64>>,
    pub cumsum_q975: Vec<Vec<f64>>,
    /// Cell medians derived as adjacent differences of the cumulative
    /// medians, so each row sums to one by construction.
    pub theta_median: Vec<Vec<f64>>,
}

pub fn build_problem(config: &Config, config_dir: &Path) -> Result<BuiltProblem> {
    let section = config.contingency.clone().unwrap_or_default();
    let counts = io::read_counts_csv(&resolve(config_dir, &section.counts_csv))?;
    let rows = counts.len();
    let cols = counts[0].len();
    if rows < 2 || cols < 2 {
        bail!("contingency table needs at least 2 rows and 2 columns");
    }
    if !(section.alpha > 0.0) {
        bail!("contingency.alpha must be positive");
    }
    let alpha = vec![vec![section.alpha; cols]; rows];
    let model = ModelSpec::MultinomialDirichletTable { counts, alpha }
        .build()
        .context("building table target")?;
    // the sampler works on the first J-1 columns; the dominance cone over
    // those columns is exactly the reduced constraint set
    let set = ConstraintSet::stochastic_dominance(rows, cols - 1)?;
    let mut labels = Vec::with_capacity(rows * (cols - 1));
    for i in 1..=rows {
        for j in 1..cols {
            labels.push(format!("theta_{i}{j}"));
        }
    }
    Ok(BuiltProblem { model, set, labels })
}

pub fn run(config: &Config, config_dir: &Path, out_dir: &Path) -> Result<ContingencyOutcome> {
    let problem = build_problem(config, config_dir)?;
    let table = match &problem.model {
        Model::MultinomialDirichletTable(t) => t.clone(),
        _ => unreachable!("contingency problems build table targets"),
    };
    let (rows, cols) = table.shape();
    let rho = config.rho_or_default().context("contingency needs penalty.rho")?;
    let flavor = flavor_from(config.penalty.flavor, rho);
    let post = RelaxedPosterior::new(&problem.model, problem.set.clone(), flavor)
        .context("composing relaxed posterior")?;

    let hmc_config = config.hmc.to_core(config.experiment.seed);
    let chains = hmc::sample(&post, &hmc_config).context("sampling")?;
    let summary = diagnostics::summarize_pooled(&chains).context("summarizing chains")?;

    let quantiles = cumulative_quantiles(&table, &chains);

    io::write_chains_csv(&out_dir.join("chains.csv"), &chains)?;
    io::write_summary_csv(&out_dir.join("summary.csv"), &summary)?;
    fs::write(
        out_dir.join("summary.txt"),
        report::summary_table(&problem.labels, &summary),
    )?;
    io::write_matrix_csv(&out_dir.join("cumsum_q025.csv"), &quantiles.q025)?;
    io::write_matrix_csv(&out_dir.join("cumsum_median.csv"), &quantiles.median)?;
    io::write_matrix_csv(&out_dir.join("cumsum_q975.csv"), &quantiles.q975)?;
    io::write_matrix_csv(&out_dir.join("theta_median.csv"), &quantiles.theta_median)?;

    // trace and acf for the first cell, plus the credible-interval ladder
    let series: Vec<(String, Vec<f64>)> = chains
        .iter()
        .map(|c| (format!("chain {}", c.chain_index), c.coordinate(0)))
        .collect();
    let refs: Vec<(&str, &[f64])> =
        series.iter().map(|(l, v)| (l.as_str(), v.as_slice())).collect();
    fs::write(out_dir.join("trace_theta11.svg"), svg::trace_plot("theta_11 trace", &refs))?;
    fs::write(
        out_dir.join("acf_theta11.svg"),
        svg::acf_plot("theta_11 autocorrelation", &summary.coords[0].acf),
    )?;
    let ladder: Vec<(String, f64, f64, f64)> = problem
        .labels
        .iter()
        .zip(&summary.coords)
        .map(|(l, c)| (l.clone(), c.q025, c.median, c.q975))
        .collect();
    fs::write(
        out_dir.join("intervals.svg"),
        svg::interval_ladder("95% credible intervals", &ladder),
    )?;

    Ok(ContingencyOutcome {
        rows,
        cols,
        chains,
        summary,
        cumsum_q025: quantiles.q025,
        cumsum_median: quantiles.median,
        cumsum_q975: quantiles.q975,
        theta_median: quantiles.theta_median,
    })
}

struct CumulativeQuantiles {
    q025: Vec<Vec<f64>>,
    median: Vec<Vec<f64>>,
    q975: Vec<Vec<f64>>,
    theta_median: Vec<Vec<f64>>,
}

/// Per-cell quantiles of the cumulative row sums over all pooled draws.
/// The reduced draws are expanded with the complement column first, so the
/// J-th cumulative column is identically one.
fn cumulative_quantiles(
    table: &MultinomialDirichletTable,
    chains: &[SampleChain],
) -> CumulativeQuantiles {
    let (rows, cols) = table.shape();
    let total: usize = chains.iter().map(SampleChain::num_draws).sum();
    let mut per_cell: Vec<Vec<f64>> = vec![Vec::with_capacity(total); rows * cols];
    for chain in chains {
        for draw in &chain.draws {
            let full = table.expand(draw);
            for i in 0..rows {
                let mut cum = 0.0;
                for j in 0..cols {
                    cum += full[i * cols + j];
                    per_cell[i * cols + j].push(cum);
                }
            }
        }
    }
    let mut pick = |q: f64| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|i| {
                (0..cols)
                    .map(|j| {
                        let cell = &mut per_cell[i * cols + j];
                        cell.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite draws"));
                        quantile(cell, q)
                    })
                    .collect()
            })
            .collect()
    };
    let q025 = pick(0.025);
    let median = pick(0.5);
    let q975 = pick(0.975);
    // cell medians as differences of cumulative medians: rows sum to the
    // J-th cumulative median, which is one by construction
    let theta_median: Vec<Vec<f64>> = median
        .iter()
        .map(|row| {
            let mut prev = 0.0;
            row.iter()
                .map(|&c| {
                    let cell = c - prev;
                    prev = c;
                    cell
                })
                .collect()
        })
        .collect();
    CumulativeQuantiles { q025, median, q975, theta_median }
}
