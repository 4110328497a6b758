//! Training-only fitting of one-hot vocabularies and min-max ranges, the
//! transform that applies them, and the stratified validation split.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Cell, ClassLabel, FeatureKind, FeatureSchema, LabeledDataset, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::matrix::DesignMatrix;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

pub const PIPELINE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumericColumn {
    pub feature: usize,
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub feature: usize,
    pub name: String,
    /// First-appearance order in the fitting data.
    pub tokens: Vec<String>,
}

/// Encoded layout: numeric columns in schema order, then one indicator block
/// per categorical feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderState {
    pub numeric: Vec<NumericColumn>,
    pub vocabularies: Vec<Vocabulary>,
}

impl EncoderState {
    pub fn width(&self) -> usize {
        self.numeric.len() + self.vocabularies.iter().map(|v| v.tokens.len()).sum::<usize>()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.numeric.iter().map(|c| c.name.clone()).collect();
        for vocab in &self.vocabularies {
            names.extend(vocab.tokens.iter().map(|t| format!("{}={}", vocab.name, t)));
        }
        names
    }

    pub fn vocabulary(&self, name: &str) -> Option<&Vocabulary> {
        self.vocabularies.iter().find(|v| v.name == name)
    }

    fn lookups(&self) -> Vec<HashMap<&str, usize>> {
        self.vocabularies
            .iter()
            .map(|v| v.tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect())
            .collect()
    }
}

pub fn fit_encoder(train: &LabeledDataset) -> Result<EncoderState> {
    if train.is_empty() {
        return Err(Error::Empty);
    }
    let schema = &train.schema;
    let numeric = schema
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind != FeatureKind::Categorical)
        .map(|(i, f)| NumericColumn {
            feature: i,
            name: f.name.clone(),
            kind: f.kind,
        })
        .collect();
    let mut vocabularies = Vec::new();
    for feature in schema.categorical_indices() {
        let mut seen = HashMap::new();
        let mut tokens = Vec::new();
        for rec in &train.records {
            let token = rec.values[feature]
                .as_token()
                .ok_or_else(|| Error::Format(format!("feature {feature} is not categorical")))?;
            if !seen.contains_key(token) {
                seen.insert(token.to_string(), tokens.len());
                tokens.push(token.to_string());
            }
        }
        vocabularies.push(Vocabulary {
            feature,
            name: schema.features[feature].name.clone(),
            tokens,
        });
    }
    Ok(EncoderState {
        numeric,
        vocabularies,
    })
}

/// Categorical tokens that were absent from the fitting vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct UnseenCounts {
    /// Rows with at least one all-zero indicator block.
    pub rows: usize,
    /// Occurrences per `feature=token`.
    pub tokens: BTreeMap<String, usize>,
}

impl UnseenCounts {
    pub fn total(&self) -> usize {
        self.tokens.values().sum()
    }
}

/// One-hot encodes `ds`. Unseen categorical tokens become all-zero blocks.
pub fn encode<T: Scalar>(
    ds: &LabeledDataset,
    enc: &EncoderState,
) -> Result<(DesignMatrix<T>, UnseenCounts)> {
    let width = enc.width();
    let lookups = enc.lookups();
    let mut values = vec![T::zero(); ds.len() * width];
    let unseen_per_row: Vec<Vec<String>> = values
        .par_chunks_mut(width)
        .zip(ds.records.par_iter())
        .map(|(out, rec)| -> Result<Vec<String>> {
            for (j, col) in enc.numeric.iter().enumerate() {
                let v = rec.values[col.feature].as_number().ok_or_else(|| {
                    Error::Format(format!("column {} is not numeric", col.name))
                })?;
                out[j] = T::from_f64_lossy(v);
            }
            let mut offset = enc.numeric.len();
            let mut unseen = Vec::new();
            for (vocab, lookup) in enc.vocabularies.iter().zip(&lookups) {
                let token = match &rec.values[vocab.feature] {
                    Cell::Token(t) => t.as_str(),
                    Cell::Number(_) => {
                        return Err(Error::Format(format!("column {} is not categorical", vocab.name)))
                    }
                };
                match lookup.get(token) {
                    Some(&k) => out[offset + k] = T::one(),
                    None => unseen.push(format!("{}={}", vocab.name, token)),
                }
                offset += vocab.tokens.len();
            }
            Ok(unseen)
        })
        .collect::<Result<_>>()?;

    let mut counts = UnseenCounts::default();
    for row in unseen_per_row {
        if !row.is_empty() {
            counts.rows += 1;
        }
        for key in row {
            *counts.tokens.entry(key).or_insert(0) += 1;
        }
    }
    let matrix = DesignMatrix::new(values, width, ds.labels(), enc.column_names())?;
    Ok((matrix, counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub column: usize,
    pub min: f64,
    pub max: f64,
}

/// Min-max ranges for the continuous-origin columns of the encoded layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub width: usize,
    pub ranges: Vec<ColumnRange>,
}

pub fn fit_scaler<T: Scalar>(train: &DesignMatrix<T>, enc: &EncoderState) -> Result<ScalerState> {
    train.ensure_cols(enc.width())?;
    if train.n_rows() == 0 {
        return Err(Error::Empty);
    }
    let ranges = enc
        .numeric
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == FeatureKind::Continuous)
        .map(|(j, _)| {
            let (min, max) = train.column(j).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let v = v.to_f64_lossy();
                (lo.min(v), hi.max(v))
            });
            ColumnRange { column: j, min, max }
        })
        .collect();
    Ok(ScalerState {
        width: enc.width(),
        ranges,
    })
}

#[inline]
fn scale_value(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (x - min) / (max - min)
    } else {
        0.0
    }
}

/// Applies min-max scaling in place. Values outside the fitted range are
/// not clamped.
pub fn scale<T: Scalar>(mut m: DesignMatrix<T>, s: &ScalerState) -> Result<DesignMatrix<T>> {
    m.ensure_cols(s.width)?;
    let width = s.width;
    m.values_mut().par_chunks_mut(width).for_each(|row| {
        for r in &s.ranges {
            let x = row[r.column].to_f64_lossy();
            row[r.column] = T::from_f64_lossy(scale_value(x, r.min, r.max));
        }
    });
    Ok(m)
}

/// Fitted preprocessing state, persisted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineState {
    pub format_version: u32,
    pub schema: FeatureSchema,
    pub encoder: EncoderState,
    pub scaler: ScalerState,
}

impl PipelineState {
    /// Fits encoder and scaler on training data only.
    pub fn fit(train: &LabeledDataset) -> Result<PipelineState> {
        let encoder = fit_encoder(train)?;
        let (raw, _) = encode::<f64>(train, &encoder)?;
        let scaler = fit_scaler(&raw, &encoder)?;
        Ok(PipelineState {
            format_version: PIPELINE_FORMAT_VERSION,
            schema: train.schema.clone(),
            encoder,
            scaler,
        })
    }

    pub fn width(&self) -> usize {
        self.encoder.width()
    }

    pub fn transform<T: Scalar>(&self, ds: &LabeledDataset) -> Result<(DesignMatrix<T>, UnseenCounts)> {
        if ds.schema != self.schema {
            return Err(Error::Format("dataset schema differs from pipeline schema".into()));
        }
        let (m, unseen) = encode(ds, &self.encoder)?;
        Ok((scale(m, &self.scaler)?, unseen))
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("pipeline state serializes");
        bytes.push(b'\n');
        bytes
    }

    /// SHA-256 of the canonical serialized form, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json_bytes()))
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<PipelineState> {
        let state: PipelineState = serde_json::from_slice(bytes)?;
        if state.format_version != PIPELINE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported pipeline format version {}",
                state.format_version
            )));
        }
        Ok(state)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PipelineState> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_bytes(&bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub validation_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(validation_fraction: f64, seed: u64) -> Result<SplitSpec> {
        if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
            return Err(Error::InvalidParam(format!(
                "validation fraction must lie in (0,1), got {validation_fraction}"
            )));
        }
        Ok(SplitSpec {
            validation_fraction,
            seed,
        })
    }
}

/// Row indices of the two parts, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
}

/// Validation size for a class of `n` rows.
pub fn validation_quota(n: usize, fraction: f64) -> usize {
    // The small bias keeps products such as 0.57 * 100 from flooring to 56.
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Per class, shuffles that class's row indices with its own seed stream and
/// sends the first `floor(fraction * n_c)` to validation.
pub fn stratified_split(labels: &[ClassLabel], spec: &SplitSpec) -> SplitIndices {
    let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    let mut train = Vec::with_capacity(labels.len());
    let mut valid = Vec::new();
    for (class, mut idx) in by_class.into_iter().enumerate() {
        let quota = validation_quota(idx.len(), spec.validation_fraction);
        let mut rng = stream_rng(spec.seed, class as u64);
        idx.shuffle(&mut rng);
        valid.extend_from_slice(&idx[..quota]);
        train.extend_from_slice(&idx[quota..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    SplitIndices { train, valid }
}
