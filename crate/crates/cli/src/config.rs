//! Resolved experiment configuration; loadable from a JSON file, mirrored
//! into every run manifest.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use palace_core::cover::TauStrategy;
use palace_core::svm::cv::{KernelChoice, SigmaSelect, TauSource};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauSpec {
    MedianHalfPersistence,
    CrossClassQuantile { q: f64, n_pairs: usize, seed: u64 },
    MeanStrongestFeature,
    Fixed { value: f64 },
}

impl TauSpec {
    pub fn to_source(&self) -> TauSource {
        match self {
            TauSpec::MedianHalfPersistence => {
                TauSource::Strategy(TauStrategy::MedianHalfPersistence)
            }
            TauSpec::CrossClassQuantile { q, n_pairs, seed } => {
                TauSource::Strategy(TauStrategy::CrossClassQuantile {
                    q: *q,
                    n_pairs: *n_pairs,
                    seed: *seed,
                })
            }
            TauSpec::MeanStrongestFeature => {
                TauSource::Strategy(TauStrategy::MeanStrongestFeature)
            }
            TauSpec::Fixed { value } => TauSource::Fixed(*value),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaSpec {
    Grid { values: Vec<f64> },
    Quantiles { values: Vec<f64> },
}

impl SigmaSpec {
    pub fn to_select(&self) -> SigmaSelect {
        match self {
            SigmaSpec::Grid { values } => SigmaSelect::Grid(values.clone()),
            SigmaSpec::Quantiles { values } => SigmaSelect::Quantiles(values.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSpec {
    Lk,
    Rbf,
    Linear,
}

impl KernelSpec {
    pub fn to_choice(self) -> KernelChoice {
        match self {
            KernelSpec::Lk => KernelChoice::Landmark,
            KernelSpec::Rbf => KernelChoice::Rbf,
            KernelSpec::Linear => KernelChoice::Linear,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub outer_folds: usize,
    pub seeds: Vec<u64>,
    pub k: usize,
    pub alpha: f64,
    pub sigma: SigmaSpec,
    pub tau: TauSpec,
    pub c_grid: Vec<f64>,
    pub n_max: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            outer_folds: 10,
            seeds: vec![42],
            k: 200,
            alpha: 0.75,
            sigma: SigmaSpec::Quantiles { values: vec![0.25] },
            tau: TauSpec::MedianHalfPersistence,
            c_grid: vec![1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0],
            n_max: 50,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_folds < 2 {
            bail!("outer_folds must be at least 2, got {}", self.outer_folds);
        }
        if self.c_grid.is_empty() {
            bail!("C grid is empty");
        }
        let sigma_empty = match &self.sigma {
            SigmaSpec::Grid { values } | SigmaSpec::Quantiles { values } => values.is_empty(),
        };
        if sigma_empty {
            bail!("sigma grid is empty");
        }
        if self.seeds.is_empty() {
            bail!("seeds list is empty");
        }
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
