//! CSV readers and writers for chains, summaries and count tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, which is
//! deterministic, so identical configs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use dset_core::diagnostics::ChainSummary;
use dset_core::hmc::SampleChain;

/// Writes all chains to one CSV: `chain,iteration,theta_0..,accept,energy,dist_sq`.
pub fn write_chains_csv(path: &Path, chains: &[SampleChain]) -> Result<()> {
    let dim = chains.first().map_or(0, SampleChain::dim);
    let mut out = String::new();
    out.push_str("chain,iteration");
    for k in 0..dim {
        write!(out, ",theta_{k}").unwrap();
    }
    out.push_str(",accept,energy,dist_sq\n");
    for chain in chains {
        for (iter, draw) in chain.draws.iter().enumerate() {
            write!(out, "{},{}", chain.chain_index, iter).unwrap();
            for v in draw {
                write!(out, ",{v}").unwrap();
            }
            writeln!(
                out,
                ",{},{},{}",
                u8::from(chain.accept_flags[iter]),
                chain.energies[iter],
                chain.penalty_values[iter]
            )
            .unwrap();
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes per-coordinate summary rows:
/// `coord,mean,q2.5,median,q97.5,ess`.
pub fn write_summary_csv(path: &Path, summary: &ChainSummary) -> Result<()> {
    let mut out = String::from("coord,mean,q2.5,median,q97.5,ess\n");
    for (k, c) in summary.coords.iter().enumerate() {
        writeln!(out, "{k},{},{},{},{},{}", c.mean, c.q025, c.median, c.q975, c.ess).unwrap();
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes a dense matrix as CSV (no header).
pub fn write_matrix_csv(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Reads an integer count table: I rows of J comma-separated entries.
pub fn read_counts_csv(path: &Path) -> Result<Vec<Vec<u64>>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading counts {}", path.display()))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<u64> = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<u64>()
                    .with_context(|| format!("line {}: bad count '{cell}'", lineno + 1))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("counts file {} is empty", path.display());
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        bail!("counts file {} has ragged rows", path.display());
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_chain() -> SampleChain {
        SampleChain {
            chain_index: 0,
            draws: vec![vec![1.0, 2.0], vec![1.5, -0.25]],
            accept_flags: vec![true, false],
            energies: vec![3.25, f64::INFINITY],
            penalty_values: vec![0.0, 0.125],
            acceptance_rate: 0.5,
            divergences: 0,
            step_size: 0.1,
        }
    }

    #[test]
    fn chains_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chains.csv");
        write_chains_csv(&path, &[tiny_chain()]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "chain,iteration,theta_0,theta_1,accept,energy,dist_sq");
        assert_eq!(lines.next().unwrap(), "0,0,1,2,1,3.25,0");
        assert_eq!(lines.next().unwrap(), "0,1,1.5,-0.25,0,inf,0.125");
    }

    #[test]
    fn counts_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("counts.csv");
        fs::write(&path, "# comment\n1, 2,3\n4,5, 6\n").unwrap();
        assert_eq!(read_counts_csv(&path).unwrap(), vec![vec![1, 2, 3], vec![4, 5, 6]]);

        fs::write(&path, "1,2\n3\n").unwrap();
        assert!(read_counts_csv(&path).is_err());
        fs::write(&path, "1,-2\n").unwrap();
        assert!(read_counts_csv(&path).is_err());
    }
}
