//! Persisted models.
//!
//! A model file is a single JSON document carrying the format version, the
//! model kind, the class order, the digest of the pipeline the model was
//! trained behind, the hyperparameters and seed, and the fitted payload.
//! Nothing time-dependent is stored, so retraining with the same inputs
//! reproduces the file byte for byte.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::ClassLabel;
use crate::ensemble::{forest_predict_proba, gbt_predict_proba, ForestModel, GbtModel};
use crate::error::{Error, Result};
use crate::linear::{self, argmax, ClassScores, LogRegModel};
use crate::matrix::DesignMatrix;
use crate::preprocess::PipelineState;
use crate::scalar::Scalar;
use crate::tree::{self, ClassLeaf, ClassificationTree, Tree, TreeNode};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logreg,
    Cart,
    Rf,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Logreg, ModelKind::Cart, ModelKind::Rf, ModelKind::Gbt];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Cart => "cart",
            ModelKind::Rf => "rf",
            ModelKind::Gbt => "gbt",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown model kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound(deserialize = "T: Scalar"))]
pub enum TrainedModel<T> {
    Logreg(LogRegModel<T>),
    Cart(ClassificationTree<T>),
    Rf(ForestModel<T>),
    Gbt(GbtModel<T>),
}

impl<T: Scalar> TrainedModel<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Logreg(_) => ModelKind::Logreg,
            TrainedModel::Cart(_) => ModelKind::Cart,
            TrainedModel::Rf(_) => ModelKind::Rf,
            TrainedModel::Gbt(_) => ModelKind::Gbt,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Logreg(m) => m.dim,
            TrainedModel::Cart(m) => m.dim,
            TrainedModel::Rf(m) => m.dim,
            TrainedModel::Gbt(m) => m.dim,
        }
    }

    pub fn is_finite(&self) -> bool {
        let class_leaf = |l: &ClassLeaf<T>| all_finite(&l.probabilities);
        match self {
            TrainedModel::Logreg(m) => m.is_finite(),
            TrainedModel::Cart(t) => tree_is_finite(t, class_leaf),
            TrainedModel::Rf(f) => all_finite(&f.importance) && f.trees.iter().all(|t| tree_is_finite(t, class_leaf)),
            TrainedModel::Gbt(g) => {
                all_finite(&g.base_score)
                    && g.learning_rate.is_finite()
                    && g.rounds.iter().flatten().all(|t| tree_is_finite(t, |v: &T| v.is_finite()))
            }
        }
    }

    pub fn predict_proba(&self, x: &DesignMatrix<T>) -> Result<Vec<ClassScores<T>>> {
        match self {
            TrainedModel::Logreg(m) => linear::predict_proba(m, x),
            TrainedModel::Cart(m) => tree::predict_proba(m, x),
            TrainedModel::Rf(m) => forest_predict_proba(m, x),
            TrainedModel::Gbt(m) => gbt_predict_proba(m, x),
        }
    }

    pub fn predict(&self, x: &DesignMatrix<T>) -> Result<Vec<ClassLabel>> {
        Ok(self.predict_proba(x)?.iter().map(|p| argmax(p)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Scalar"))]
pub struct ModelFile<T> {
    pub format_version: u32,
    pub kind: ModelKind,
    pub class_order: Vec<String>,
    pub pipeline_digest: String,
    pub scalar: String,
    pub seed: u64,
    pub hyperparameters: serde_json::Value,
    pub model: TrainedModel<T>,
}

impl<T: Scalar> ModelFile<T> {
    pub fn new(
        model: TrainedModel<T>,
        hyperparameters: &impl Serialize,
        seed: u64,
        pipeline: &PipelineState,
    ) -> Result<ModelFile<T>> {
        if model.dim() != pipeline.width() {
            return Err(Error::Dimension {
                expected: pipeline.width(),
                found: model.dim(),
            });
        }
        Ok(ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            kind: model.kind(),
            class_order: ClassLabel::ALL.iter().map(|c| c.name().to_string()).collect(),
            pipeline_digest: pipeline.digest(),
            scalar: T::NAME.to_string(),
            seed,
            hyperparameters: serde_json::to_value(hyperparameters)?,
            model,
        })
    }

    /// Compact JSON plus a trailing newline. Fails on non-finite parameters,
    /// which JSON cannot carry.
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        if !self.model.is_finite() {
            return Err(Error::NonFinite("model contains a non-finite parameter".into()));
        }
        let mut bytes = serde_json::to_vec(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<ModelFile<T>> {
        let file: ModelFile<T> = serde_json::from_slice(bytes)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.scalar != T::NAME {
            return Err(Error::Format(format!("model stored as {}, loaded as {}", file.scalar, T::NAME)));
        }
        let expected: Vec<&str> = ClassLabel::ALL.iter().map(|c| c.name()).collect();
        if file.class_order != expected {
            return Err(Error::Format(format!("unexpected class order {:?}", file.class_order)));
        }
        if file.kind != file.model.kind() {
            return Err(Error::Format(format!(
                "kind tag {} does not match payload {}",
                file.kind,
                file.model.kind()
            )));
        }
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelFile<T>> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_bytes(&bytes)
    }

    /// Rejects a pipeline other than the one the model was trained behind.
    pub fn check_pipeline(&self, pipeline: &PipelineState) -> Result<()> {
        self.check_digest(&pipeline.digest())
    }

    pub fn check_digest(&self, digest: &str) -> Result<()> {
        if self.pipeline_digest != digest {
            return Err(Error::DigestMismatch {
                expected: self.pipeline_digest.clone(),
                found: digest.to_string(),
            });
        }
        Ok(())
    }
}

fn tree_is_finite<T: Scalar, L>(t: &Tree<T, L>, leaf_ok: impl Fn(&L) -> bool) -> bool {
    t.nodes.iter().all(|n| match n {
        TreeNode::Internal { threshold, .. } => threshold.is_finite(),
        TreeNode::Leaf(l) => leaf_ok(l),
    })
}

fn all_finite<T: Scalar>(values: &[T]) -> bool {
    values.iter().all(|v| v.is_finite())
}
