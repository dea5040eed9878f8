//! Artifact emission: per-round CSV and the machine-readable summary.
//!
//! CSV schema is fixed: `round,mean_alpha_err,median_alpha_err,mean_loss,n_trials`.
//! Rounds above 10^3 are thinned onto a log-spaced grid to keep files small;
//! rate fits always use the full in-memory trajectory, never the thinned
//! file. All writes go through a temp file and an atomic rename, and every
//! float is formatted with Rust's shortest-roundtrip formatter so identical
//! runs emit identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use airgd::trainer::TrajectoryStats;

pub const CSV_HEADER: &str = "round,mean_alpha_err,median_alpha_err,mean_loss,n_trials";

/// Rounds to emit: everything up to 10^3, then a 128-points-per-decade log
/// grid, and always the final round.
pub fn rounds_to_emit(last_round: usize) -> Vec<usize> {
    let dense_limit = 1000.min(last_round);
    let mut rounds: Vec<usize> = (0..=dense_limit).collect();
    if last_round > 1000 {
        let per_decade = 128.0;
        let mut x = 3.0 + 1.0 / per_decade;
        let top = (last_round as f64).log10();
        while x < top {
            let k = 10f64.powf(x).round() as usize;
            if k > 1000 && k < last_round {
                rounds.push(k);
            }
            x += 1.0 / per_decade;
        }
        rounds.push(last_round);
    }
    rounds.dedup();
    rounds
}

/// Render the per-round CSV body (including header and trailing newline).
pub fn render_csv(stats: &TrajectoryStats) -> String {
    let last = stats.mean_alpha_err.len() - 1;
    let mut out = String::with_capacity(64 * last.min(2000));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for k in rounds_to_emit(last) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            k,
            stats.mean_alpha_err[k],
            stats.median_alpha_err[k],
            stats.mean_loss[k],
            stats.trials_alive[k]
        ));
    }
    out
}

/// Write-then-rename so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)
        .with_context(|| format!("creating output directory {}", parent.display()))?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)
            .with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(contents.as_bytes())
            .with_context(|| format!("writing {}", tmp.display()))?;
        f.sync_all().ok();
    }
    fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} into place", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub k_min: usize,
    pub k_max: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseMomentSummary {
    pub value: f64,
    pub draws: usize,
    pub quantile: f64,
    /// The untruncated moment diverges for exact alpha-stable noise; this
    /// note rides along with every report that quotes the constant.
    pub note: &'static str,
}

pub const C_HAT_NOTE: &str =
    "empirical mean of ||xi||_alpha^alpha truncated at the stated quantile; \
     the untruncated moment diverges at order alpha";

#[derive(Debug, Clone, Serialize)]
pub struct BoundPoint {
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsSummary {
    pub c_hat: Option<NoiseMomentSummary>,
    pub grad_bound: f64,
    pub region_radius: f64,
    pub contraction_l: f64,
    pub theorem1: Vec<BoundPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<Vec<BoundPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generalization: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalSummary {
    pub mean: f64,
    pub median: f64,
    pub trimmed_mean_5pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub config: BTreeMap<String, String>,
    pub rounds: usize,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_exponent: Option<f64>,
    pub bounds: BoundsSummary,
    pub final_error: FinalSummary,
    pub truncated_trials: Vec<(u64, usize)>,
    pub csv: String,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    pub label: String,
    pub slope: Option<f64>,
    pub final_median: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub axis: String,
    pub entries: Vec<SweepEntry>,
    /// Name and outcome of each monotonicity check for this axis.
    pub verdicts: Vec<(String, bool)>,
    pub wall_time_seconds: f64,
}

/// Artifact paths for one run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

pub fn write_run_artifacts(
    out_dir: &Path,
    label: &str,
    stats: &TrajectoryStats,
    summary: &RunSummary,
) -> Result<RunArtifacts> {
    let csv_path = out_dir.join(format!("{label}.csv"));
    let summary_path = out_dir.join(format!("{label}.summary.json"));
    write_atomic(&csv_path, &render_csv(stats))?;
    let json = serde_json::to_string_pretty(summary).context("serializing summary")?;
    write_atomic(&summary_path, &format!("{json}\n"))?;
    Ok(RunArtifacts { csv_path, summary_path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emitted_rounds_are_dense_then_log_spaced() {
        assert_eq!(rounds_to_emit(10), (0..=10).collect::<Vec<_>>());
        let rounds = rounds_to_emit(100_000);
        assert_eq!(rounds[0], 0);
        assert_eq!(*rounds.last().unwrap(), 100_000);
        assert!(rounds.windows(2).all(|w| w[0] < w[1]), "strictly increasing");
        assert!(rounds.contains(&1000));
        // Dense region intact, thinned region much smaller than the range.
        assert!(rounds.iter().filter(|k| **k <= 1000).count() == 1001);
        let sparse = rounds.iter().filter(|k| **k > 1000).count();
        assert!(sparse < 300, "sparse region has {sparse} rows");
    }
}
