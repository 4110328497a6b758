//! Experiment configuration.
//!
//! A TOML file with the sections `[paths]`, `[experiment]`, `[logreg]`,
//! `[cart]`, `[rf]`, `[gbt]` and `[output]`. Every key has a default and
//! unknown keys are rejected. Command-line flags are applied on top.

use std::path::{Path, PathBuf};

use ids_core::ensemble::{ForestParams, GbtParams, RowSampling};
use ids_core::linear::LogRegTrainConfig;
use ids_core::model::ModelKind;
use ids_core::tree::TreeParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: Paths,
    pub experiment: Experiment,
    pub logreg: LogRegSection,
    pub cart: CartSection,
    pub rf: RfSection,
    pub gbt: GbtSection,
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: PathBuf,
    pub test: PathBuf,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            train: PathBuf::from("data/nsl-kdd/KDDTrain+.txt"),
            test: PathBuf::from("data/nsl-kdd/KDDTest+.txt"),
            out: PathBuf::from("runs/default"),
        }
    }
}

/// `logreg`, `cart`, `rf`, `gbt` or `all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSelection {
    Logreg,
    Cart,
    Rf,
    Gbt,
    All,
}

impl ModelSelection {
    pub fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelSelection::Logreg => vec![ModelKind::Logreg],
            ModelSelection::Cart => vec![ModelKind::Cart],
            ModelSelection::Rf => vec![ModelKind::Rf],
            ModelSelection::Gbt => vec![ModelKind::Gbt],
            ModelSelection::All => ModelKind::ALL.to_vec(),
        }
    }

    pub fn parse(s: &str) -> Result<ModelSelection, CliError> {
        match s {
            "all" => Ok(ModelSelection::All),
            _ => match s.parse::<ModelKind>() {
                Ok(ModelKind::Logreg) => Ok(ModelSelection::Logreg),
                Ok(ModelKind::Cart) => Ok(ModelSelection::Cart),
                Ok(ModelKind::Rf) => Ok(ModelSelection::Rf),
                Ok(ModelKind::Gbt) => Ok(ModelSelection::Gbt),
                Err(_) => Err(CliError::Usage(format!(
                    "unknown model {s:?}; expected logreg, cart, rf, gbt or all"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    pub model: ModelSelection,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            model: ModelSelection::All,
            validation_fraction: 0.10,
            seed: 42,
            threads: 0,
        }
    }
}

/// Logistic regression. `c` is the inverse regularization strength on the
/// summed loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegSection {
    pub c: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for LogRegSection {
    fn default() -> Self {
        LogRegSection {
            c: 1.0,
            max_iters: 200,
            tolerance: 1e-6,
        }
    }
}

impl LogRegSection {
    pub fn train_config(&self, n_rows: usize, seed: u64) -> LogRegTrainConfig {
        LogRegTrainConfig {
            lambda: LogRegTrainConfig::lambda_from_c(self.c, n_rows),
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            seed,
            ..LogRegTrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartSection {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for CartSection {
    fn default() -> Self {
        let d = TreeParams::cart_default();
        CartSection {
            max_depth: d.max_depth,
            min_samples_leaf: d.min_samples_leaf,
            min_samples_split: d.min_samples_split,
        }
    }
}

impl CartSection {
    pub fn params(&self, seed: u64) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            min_samples_split: self.min_samples_split,
            mtry: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfSection {
    pub n_trees: usize,
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for RfSection {
    fn default() -> Self {
        let d = ForestParams::default();
        RfSection {
            n_trees: d.n_trees,
            mtry: d.mtry,
            max_depth: d.max_depth,
            min_samples_leaf: d.min_samples_leaf,
            min_samples_split: d.min_samples_split,
        }
    }
}

impl RfSection {
    pub fn params(&self, seed: u64) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            mtry: self.mtry,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            min_samples_split: self.min_samples_split,
            sampling: RowSampling::Bootstrap,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtSection {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for GbtSection {
    fn default() -> Self {
        let d = GbtParams::default();
        GbtSection {
            n_rounds: d.n_rounds,
            max_depth: d.max_depth,
            learning_rate: d.learning_rate,
            subsample: d.subsample,
            colsample_bytree: d.colsample_bytree,
            lambda: d.lambda,
            min_child_weight: d.min_child_weight,
        }
    }
}

impl GbtSection {
    pub fn params(&self, seed: u64) -> GbtParams {
        GbtParams {
            n_rounds: self.n_rounds,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            subsample: self.subsample,
            colsample_bytree: self.colsample_bytree,
            lambda: self.lambda,
            min_child_weight: self.min_child_weight,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub csv: bool,
    pub report: bool,
    pub roc: bool,
    pub plots: bool,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            csv: true,
            report: true,
            roc: true,
            plots: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let f = self.experiment.validation_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::Usage(format!("validation_fraction must lie in (0,1), got {f}")));
        }
        if !(self.logreg.c > 0.0) {
            return Err(CliError::Usage("logreg.c must be > 0".into()));
        }
        self.gbt.params(0).validate()?;
        Ok(())
    }

    pub fn models_dir(&self) -> PathBuf {
        self.paths.out.join("models")
    }

    pub fn pipeline_path(&self) -> PathBuf {
        self.paths.out.join("pipeline.json")
    }

    pub fn model_path(&self, kind: ModelKind) -> PathBuf {
        self.models_dir().join(format!("{kind}.json"))
    }

    pub fn eval_dir(&self, label: &str, split: &str) -> PathBuf {
        self.paths.out.join("eval").join(format!("{label}-{split}"))
    }
}
