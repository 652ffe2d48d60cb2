use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::schema::ProblemFile;
use super::SimulateArgs;
use crate::engine::EngineOptions;
use crate::error::{Error, Result};
use crate::montecarlo::{estimate_fdr, SimDependence, SimModel, SimReport};

/// Simulation configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Layer structure; its p-values may be omitted (they are redrawn).
    pub problem: ProblemFile,
    pub model: ModelFile,
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Levels at which every layer is re-run for the plot data.
    #[serde(default)]
    pub alpha_grid: Vec<f64>,
}

fn default_reps() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    /// Indices of the non-null hypotheses.
    #[serde(default)]
    pub non_nulls: Vec<usize>,
    pub dependence: SimDependence,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub report: SimReport,
    /// One report per entry of the α grid.
    pub grid: Vec<(f64, SimReport)>,
}

/// Runs the configured simulation; `reps` and `seed` override the file.
pub fn simulate(config: &SimConfig, reps: Option<usize>, seed: Option<u64>, options: &EngineOptions) -> Result<SimOutput> {
    let mut file = config.problem.clone();
    let n = match (file.n, file.p.len()) {
        (Some(n), 0) => n,
        (_, len) => len,
    };
    if file.p.is_empty() {
        file.p = vec![1.0; n];
    }
    let template = file.to_problem()?;
    let mut nulls = vec![true; n];
    for &i in &config.model.non_nulls {
        *nulls
            .get_mut(i)
            .ok_or_else(|| Error::Config(format!("model.non_nulls: index {i} out of range")))? = false;
    }
    let model = SimModel::new(
        nulls,
        config.model.dependence,
        config.model.mu,
        seed.unwrap_or(config.model.seed),
    );
    let reps = reps.unwrap_or(config.reps);
    let report = estimate_fdr(&template, &model, reps, options)?;
    let grid = config
        .alpha_grid
        .iter()
        .map(|&alpha| {
            let mut t = template.clone();
            for l in &mut t.layers {
                l.alpha = alpha;
            }
            Ok((alpha, estimate_fdr(&t, &model, reps, options)?))
        })
        .collect::<Result<_>>()?;
    Ok(SimOutput { report, grid })
}

/// `alpha,layer,fdr,fdr_se,power,power_se` rows, one per layer and level.
pub fn plot_csv(output: &SimOutput) -> String {
    let mut s = String::from("alpha,layer,fdr,fdr_se,power,power_se\n");
    let rows: Vec<&SimReport> = if output.grid.is_empty() {
        vec![&output.report]
    } else {
        output.grid.iter().map(|(_, r)| r).collect()
    };
    for r in rows {
        for l in &r.layers {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                l.alpha, l.layer, l.fdr.mean, l.fdr.se, l.power.mean, l.power.se
            );
        }
    }
    s
}

fn plot_path(output: &Path) -> PathBuf {
    let mut name = output.file_stem().unwrap_or_default().to_os_string();
    name.push(".plot.csv");
    output.with_file_name(name)
}

pub(super) fn run(args: &SimulateArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    let config: SimConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("config: {e}")))?;
    let out = simulate(&config, args.reps, args.seed, &args.engine.options()?)?;
    for l in &out.report.layers {
        println!(
            "layer {}: alpha {} fdr {:.5} (se {:.5}) power {:.5} (se {:.5})",
            l.layer, l.alpha, l.fdr.mean, l.fdr.se, l.power.mean, l.power.se
        );
    }
    fs::write(&args.output, serde_json::to_string_pretty(&out)? + "\n")?;
    fs::write(plot_path(&args.output), plot_csv(&out))?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_path_sits_next_to_report() {
        assert_eq!(plot_path(Path::new("/tmp/x/report.json")), PathBuf::from("/tmp/x/report.plot.csv"));
    }

    #[test]
    fn config_parses_without_pvalues() {
        let text = r#"{
          "problem": {"n": 4, "p": [], "layers": [{"groups": "finest", "alpha": 0.2}]},
          "model": {"non_nulls": [0], "dependence": {"gaussian_equicorrelated": 0.5}, "mu": 3.0, "seed": 9},
          "reps": 1000
        }"#;
        let config: SimConfig = serde_json::from_str(text).unwrap();
        let out = simulate(&config, None, None, &EngineOptions::default()).unwrap();
        assert_eq!(out.report.reps, 1000);
        assert_eq!(out.report.seed, 9);
        assert!(plot_csv(&out).lines().count() == 2);
    }
}
