//! NSL-KDD ingestion: the 41-feature schema, the five-class taxonomy and the
//! comma-separated record format.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of classes in the taxonomy.
pub const NUM_CLASSES: usize = 5;

/// Number of raw features per record.
pub const NUM_FEATURES: usize = 41;

/// Traffic class. The discriminant is the global class index used by every
/// matrix and report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    Normal = 0,
    DoS = 1,
    Probe = 2,
    R2L = 3,
    U2R = 4,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::Normal,
        ClassLabel::DoS,
        ClassLabel::Probe,
        ClassLabel::R2L,
        ClassLabel::U2R,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<ClassLabel> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "Normal",
            ClassLabel::DoS => "DoS",
            ClassLabel::Probe => "Probe",
            ClassLabel::R2L => "R2L",
            ClassLabel::U2R => "U2R",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown class name {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Basic,
    Content,
    TimeWindow,
    HostWindow,
}

impl FeatureGroup {
    /// Group for a 1-based column position.
    pub fn for_position(position: usize) -> FeatureGroup {
        match position {
            1..=9 => FeatureGroup::Basic,
            10..=22 => FeatureGroup::Content,
            23..=31 => FeatureGroup::TimeWindow,
            _ => FeatureGroup::HostWindow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    pub group: FeatureGroup,
}

/// Canonical column order and kinds. `su_attempted` is continuous because the
/// real files contain the value 2 in that column.
const NSL_KDD_COLUMNS: [(&str, FeatureKind); NUM_FEATURES] = {
    use FeatureKind::*;
    [
        ("duration", Continuous),
        ("protocol_type", Categorical),
        ("service", Categorical),
        ("flag", Categorical),
        ("src_bytes", Continuous),
        ("dst_bytes", Continuous),
        ("land", Binary),
        ("wrong_fragment", Continuous),
        ("urgent", Continuous),
        ("hot", Continuous),
        ("num_failed_logins", Continuous),
        ("logged_in", Binary),
        ("num_compromised", Continuous),
        ("root_shell", Binary),
        ("su_attempted", Continuous),
        ("num_root", Continuous),
        ("num_file_creations", Continuous),
        ("num_shells", Continuous),
        ("num_access_files", Continuous),
        ("num_outbound_cmds", Continuous),
        ("is_host_login", Binary),
        ("is_guest_login", Binary),
        ("count", Continuous),
        ("srv_count", Continuous),
        ("serror_rate", Continuous),
        ("srv_serror_rate", Continuous),
        ("rerror_rate", Continuous),
        ("srv_rerror_rate", Continuous),
        ("same_srv_rate", Continuous),
        ("diff_srv_rate", Continuous),
        ("srv_diff_host_rate", Continuous),
        ("dst_host_count", Continuous),
        ("dst_host_srv_count", Continuous),
        ("dst_host_same_srv_rate", Continuous),
        ("dst_host_diff_srv_rate", Continuous),
        ("dst_host_same_src_port_rate", Continuous),
        ("dst_host_srv_diff_host_rate", Continuous),
        ("dst_host_serror_rate", Continuous),
        ("dst_host_srv_serror_rate", Continuous),
        ("dst_host_rerror_rate", Continuous),
        ("dst_host_srv_rerror_rate", Continuous),
    ]
};

/// Ordered feature descriptors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureDescriptor>,
}

impl FeatureSchema {
    pub fn nsl_kdd() -> FeatureSchema {
        let features = NSL_KDD_COLUMNS
            .iter()
            .enumerate()
            .map(|(i, &(name, kind))| FeatureDescriptor {
                name: name.to_string(),
                kind,
                group: FeatureGroup::for_position(i + 1),
            })
            .collect();
        FeatureSchema { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn categorical_indices(&self) -> Vec<usize> {
        self.indices_of(FeatureKind::Categorical)
    }

    pub fn indices_of(&self, kind: FeatureKind) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    /// Checks the structural invariants of the NSL-KDD layout.
    pub fn validate(&self) -> Result<()> {
        if self.features.len() != NUM_FEATURES {
            return Err(Error::Format(format!(
                "schema must have {NUM_FEATURES} features, has {}",
                self.features.len()
            )));
        }
        let categorical: Vec<&str> = self
            .features
            .iter()
            .filter(|f| f.kind == FeatureKind::Categorical)
            .map(|f| f.name.as_str())
            .collect();
        if categorical != ["protocol_type", "service", "flag"] {
            return Err(Error::Format(format!(
                "categorical features must be protocol_type, service, flag; got {categorical:?}"
            )));
        }
        for (i, f) in self.features.iter().enumerate() {
            if f.group != FeatureGroup::for_position(i + 1) {
                return Err(Error::Format(format!(
                    "feature {} at position {} has group {:?}",
                    f.name,
                    i + 1,
                    f.group
                )));
            }
        }
        Ok(())
    }
}

const TAXONOMY_ASSET: &str = include_str!("../data/attack_taxonomy.v1.csv");

/// Attack name to class mapping.
#[derive(Debug, Clone)]
pub struct AttackTaxonomy {
    map: HashMap<String, ClassLabel>,
}

impl AttackTaxonomy {
    /// The bundled NSL-KDD table (`data/attack_taxonomy.v1.csv`).
    pub fn nsl_kdd() -> AttackTaxonomy {
        Self::parse(TAXONOMY_ASSET).expect("bundled taxonomy is well formed")
    }

    /// Parses `name,category` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<AttackTaxonomy> {
        let mut map = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, category) = line.split_once(',').ok_or_else(|| {
                Error::Format(format!("taxonomy line {}: missing comma", lineno + 1))
            })?;
            let label: ClassLabel = category.trim().parse()?;
            if map.insert(name.trim().to_string(), label).is_some() {
                return Err(Error::Format(format!(
                    "taxonomy line {}: duplicate name {name:?}",
                    lineno + 1
                )));
            }
        }
        Ok(AttackTaxonomy { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, ClassLabel)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Resolves an attack name (exact, case-sensitive, after trimming).
pub fn map_attack_category(name: &str, taxonomy: &AttackTaxonomy) -> Result<ClassLabel> {
    let name = name.trim();
    taxonomy
        .map
        .get(name)
        .copied()
        .ok_or_else(|| Error::UnknownAttack(name.to_string()))
}

/// One parsed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Token(String),
}

impl Cell {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            Cell::Token(_) => None,
        }
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            Cell::Token(t) => Some(t),
            Cell::Number(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub values: Vec<Cell>,
    pub label: ClassLabel,
    pub attack_name: String,
    /// Auxiliary difficulty score; never used as a feature.
    pub difficulty: Option<i64>,
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub schema: FeatureSchema,
    pub records: Vec<RawRecord>,
    pub source: Option<PathBuf>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// New dataset holding the records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            source: self.source.clone(),
        }
    }
}

fn parse_cell(
    raw: &str,
    row: usize,
    column: usize,
    descriptor: &FeatureDescriptor,
) -> Result<Cell> {
    let token = raw.trim();
    let fail = |message: String| Error::Cell {
        row,
        column,
        name: descriptor.name.clone(),
        message,
    };
    match descriptor.kind {
        FeatureKind::Categorical => {
            if token.is_empty() {
                Err(fail("empty categorical token".into()))
            } else {
                Ok(Cell::Token(token.to_string()))
            }
        }
        FeatureKind::Continuous => {
            let v: f64 = token
                .parse()
                .map_err(|_| fail(format!("unparsable number {token:?}")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(fail(format!("expected finite non-negative number, got {v}")));
            }
            Ok(Cell::Number(v))
        }
        FeatureKind::Binary => {
            let v: f64 = token
                .parse()
                .map_err(|_| fail(format!("unparsable number {token:?}")))?;
            if v != 0.0 && v != 1.0 {
                return Err(fail(format!("binary feature must be 0 or 1, got {v}")));
            }
            Ok(Cell::Number(v))
        }
    }
}

/// Parses one comma-separated line. `row` is 0-based and only used in errors.
pub fn parse_record(
    line: &str,
    row: usize,
    schema: &FeatureSchema,
    taxonomy: &AttackTaxonomy,
) -> Result<RawRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    let n = schema.len();
    if fields.len() != n + 1 && fields.len() != n + 2 {
        return Err(Error::FieldCount {
            row,
            found: fields.len(),
        });
    }
    let values = schema
        .features
        .iter()
        .zip(&fields)
        .enumerate()
        .map(|(column, (desc, raw))| parse_cell(raw, row, column, desc))
        .collect::<Result<Vec<_>>>()?;
    let attack_name = fields[n].trim().to_string();
    let label = map_attack_category(&attack_name, taxonomy).map_err(|e| Error::Row {
        row,
        source: Box::new(e),
    })?;
    let difficulty = match fields.get(n + 1) {
        Some(raw) => {
            let token = raw.trim();
            Some(token.parse::<i64>().map_err(|_| Error::Cell {
                row,
                column: n + 1,
                name: "difficulty".into(),
                message: format!("unparsable integer {token:?}"),
            })?)
        }
        None => None,
    };
    Ok(RawRecord {
        values,
        label,
        attack_name,
        difficulty,
    })
}

/// Reads NSL-KDD records from any reader. Blank lines are skipped but still
/// count towards the row index reported in errors.
pub fn read_nslkdd<R: Read>(
    reader: R,
    schema: &FeatureSchema,
    taxonomy: &AttackTaxonomy,
    source: Option<PathBuf>,
) -> Result<LabeledDataset> {
    let path_for_err = source.clone().unwrap_or_default();
    let mut records = Vec::new();
    for (row, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path_for_err, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line, row, schema, taxonomy)?);
    }
    if records.is_empty() {
        return Err(Error::Empty);
    }
    Ok(LabeledDataset {
        schema: schema.clone(),
        records,
        source,
    })
}

pub fn load_nslkdd(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    taxonomy: &AttackTaxonomy,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_nslkdd(file, schema, taxonomy, Some(path.to_path_buf()))
}

/// Writes records back in the NSL-KDD text format.
pub fn write_nslkdd<W: Write>(mut writer: W, ds: &LabeledDataset) -> std::io::Result<()> {
    for rec in &ds.records {
        let mut line = String::new();
        for cell in &rec.values {
            match cell {
                Cell::Number(v) => line.push_str(&v.to_string()),
                Cell::Token(t) => line.push_str(t),
            }
            line.push(',');
        }
        line.push_str(&rec.attack_name);
        if let Some(d) = rec.difficulty {
            line.push(',');
            line.push_str(&d.to_string());
        }
        line.push('\n');
        writer.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDistribution {
    pub counts: [usize; NUM_CLASSES],
    pub fractions: [f64; NUM_CLASSES],
    pub total: usize,
}

impl ClassDistribution {
    pub fn from_labels(labels: impl IntoIterator<Item = ClassLabel>) -> ClassDistribution {
        let mut counts = [0usize; NUM_CLASSES];
        for l in labels {
            counts[l.index()] += 1;
        }
        let total: usize = counts.iter().sum();
        let mut fractions = [0.0; NUM_CLASSES];
        if total > 0 {
            for (f, &c) in fractions.iter_mut().zip(&counts) {
                *f = c as f64 / total as f64;
            }
        }
        ClassDistribution {
            counts,
            fractions,
            total,
        }
    }

    pub fn count(&self, class: ClassLabel) -> usize {
        self.counts[class.index()]
    }
}

pub fn class_distribution(ds: &LabeledDataset) -> ClassDistribution {
    ClassDistribution::from_labels(ds.records.iter().map(|r| r.label))
}
