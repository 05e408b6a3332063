//! Generic experiment over a configured model, constraint and penalty.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use dset_core::diagnostics::{self, ChainSummary};
use dset_core::hmc::{self, SampleChain};
use dset_core::posterior::RelaxedPosterior;

use crate::config::Config;
use crate::experiments::{build_problem, flavor_from};
use crate::io;
use crate::report;
use crate::svg;

pub struct CustomOutcome {
    pub chains: Vec<SampleChain>,
    pub summary: ChainSummary,
}

pub fn run(config: &Config, config_dir: &Path, out_dir: &Path) -> Result<CustomOutcome> {
    let problem = build_problem(config, config_dir)?;
    let rho = config.penalty.rho.context("custom run needs penalty.rho")?;
    let flavor = flavor_from(config.penalty.flavor, rho);
    let post = RelaxedPosterior::new(&problem.model, problem.set.clone(), flavor)
        .context("composing relaxed posterior")?;

    let hmc_config = config.hmc.to_core(config.experiment.seed);
    let chains = hmc::sample(&post, &hmc_config).context("sampling")?;
    let summary = diagnostics::summarize_pooled(&chains).context("summarizing chains")?;

    io::write_chains_csv(&out_dir.join("chains.csv"), &chains)?;
    io::write_summary_csv(&out_dir.join("summary.csv"), &summary)?;
    fs::write(
        out_dir.join("summary.txt"),
        report::summary_table(&problem.labels, &summary),
    )?;
    let series: Vec<(String, Vec<f64>)> = chains
        .iter()
        .map(|c| (format!("chain {}", c.chain_index), c.coordinate(0)))
        .collect();
    let refs: Vec<(&str, &[f64])> =
        series.iter().map(|(l, v)| (l.as_str(), v.as_slice())).collect();
    fs::write(out_dir.join("trace.svg"), svg::trace_plot("first coordinate trace", &refs))?;
    fs::write(
        out_dir.join("acf.svg"),
        svg::acf_plot("first coordinate autocorrelation", &summary.coords[0].acf),
    )?;

    Ok(CustomOutcome { chains, summary })
}
