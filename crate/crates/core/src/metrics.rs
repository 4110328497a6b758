//! Evaluation for imbalanced multiclass problems.
//!
//! Conventions: precision, recall and F1 are 0 when their denominator is 0;
//! macro values are unweighted means over the five classes and macro F1 is
//! the mean of per-class F1 scores. ROC curves group tied scores, so the
//! trapezoidal AUC equals the Mann-Whitney statistic with half credit for
//! ties. A class with no positives (or no negatives) in the evaluated rows
//! has an undefined AUC and is left out of the macro AUC.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const K: usize = NUM_CLASSES;

/// `counts[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }

    pub fn get(&self, actual: ClassLabel, predicted: ClassLabel) -> u64 {
        self.counts[actual.index()][predicted.index()]
    }

    /// Headered CSV: `actual,Normal,DoS,Probe,R2L,U2R`, one row per true class.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<&str> = ClassLabel::ALL.iter().map(|c| c.name()).collect();
        writeln!(w, "actual,{}", header.join(","))?;
        for class in ClassLabel::ALL {
            let row: Vec<String> = self.counts[class.index()].iter().map(u64::to_string).collect();
            writeln!(w, "{},{}", class.name(), row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<ConfusionMatrix> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Format("empty confusion CSV".into()))?;
        let expected = format!(
            "actual,{}",
            ClassLabel::ALL.iter().map(|c| c.name()).collect::<Vec<_>>().join(",")
        );
        if header.trim() != expected {
            return Err(Error::Format(format!("unexpected confusion CSV header {header:?}")));
        }
        let mut counts = [[0u64; K]; K];
        for (i, line) in lines.enumerate() {
            if i >= K {
                return Err(Error::Format("too many confusion CSV rows".into()));
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != K + 1 || fields[0].trim() != ClassLabel::ALL[i].name() {
                return Err(Error::Format(format!("bad confusion CSV row {line:?}")));
            }
            for (j, f) in fields[1..].iter().enumerate() {
                counts[i][j] = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("bad count {f:?}")))?;
            }
        }
        Ok(ConfusionMatrix { counts })
    }
}

pub fn confusion_matrix(y_true: &[ClassLabel], y_pred: &[ClassLabel]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Length {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let mut counts = [[0u64; K]; K];
    for (t, p) in y_true.iter().zip(y_pred) {
        counts[t.index()][p.index()] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// `trace(C) / sum(C)`.
pub fn accuracy(c: &ConfusionMatrix) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Empty);
    }
    Ok(c.trace() as f64 / total as f64)
}

#[inline]
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassMetrics {
    pub class: ClassLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub per_class: Vec<PerClassMetrics>,
}

impl ClassMetrics {
    pub fn class(&self, c: ClassLabel) -> &PerClassMetrics {
        &self.per_class[c.index()]
    }
}

pub fn per_class_prf(c: &ConfusionMatrix) -> Result<ClassMetrics> {
    let accuracy = accuracy(c)?;
    let per_class: Vec<PerClassMetrics> = ClassLabel::ALL
        .iter()
        .map(|&class| {
            let k = class.index();
            let tp = c.counts[k][k];
            let precision = ratio(tp, c.col_sum(k));
            let recall = ratio(tp, c.row_sum(k));
            PerClassMetrics {
                class,
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: c.row_sum(k),
            }
        })
        .collect();
    let mean = |f: fn(&PerClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / K as f64;
    Ok(ClassMetrics {
        accuracy,
        precision_macro: mean(|m| m.precision),
        recall_macro: mean(|m| m.recall),
        f1_macro: mean(|m| m.f1),
        per_class,
    })
}

/// ROC points from `(0,0)` to `(1,1)` and the trapezoidal area under them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` pairs.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "fpr,tpr")?;
        for (fpr, tpr) in &self.points {
            writeln!(w, "{fpr},{tpr}")?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<RocCurve> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("fpr,tpr") {
            return Err(Error::Format("ROC CSV must start with header fpr,tpr".into()));
        }
        let points = lines
            .map(|line| {
                let (a, b) = line
                    .split_once(',')
                    .ok_or_else(|| Error::Format(format!("bad ROC row {line:?}")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("bad ROC value {s:?}")))
                };
                Ok((parse(a)?, parse(b)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let auc = trapezoid(&points);
        Ok(RocCurve { points, auc })
    }
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum()
}

/// One-vs-rest ROC curve. Rows are visited by descending score; all rows
/// sharing a score enter together and emit one point.
pub fn roc_points<T: Scalar>(scores: &[T], positive: &[bool]) -> Result<RocCurve> {
    if scores.len() != positive.len() {
        return Err(Error::Length {
            left: scores.len(),
            right: positive.len(),
        });
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as u64;
    let n_neg = positive.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels(format!(
            "{n_pos} positive and {n_neg} negative rows"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
    }
    let auc = trapezoid(&points);
    Ok(RocCurve { points, auc })
}

/// Trapezoidal area under a curve's points.
pub fn auc(curve: &RocCurve) -> f64 {
    trapezoid(&curve.points)
}

/// Unweighted mean over the defined curves; `None` if none are defined.
pub fn macro_auc(curves: &[Option<RocCurve>]) -> Option<f64> {
    let defined: Vec<f64> = curves.iter().flatten().map(auc).collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRoc {
    pub class: ClassLabel,
    /// `None` when the class has no positives or no negatives.
    pub auc: Option<f64>,
    pub points: usize,
    #[serde(skip)]
    pub curve: Option<RocCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: u64,
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub auc_macro: Option<f64>,
    pub auc_undefined: Vec<ClassLabel>,
    pub per_class: Vec<PerClassMetrics>,
    pub roc: Vec<ClassRoc>,
    pub confusion: ConfusionMatrix,
}

impl EvaluationReport {
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }
}

pub fn full_report<T: Scalar>(
    y_true: &[ClassLabel],
    y_pred: &[ClassLabel],
    probabilities: &[[T; NUM_CLASSES]],
) -> Result<EvaluationReport> {
    if probabilities.len() != y_true.len() {
        return Err(Error::Length {
            left: y_true.len(),
            right: probabilities.len(),
        });
    }
    let confusion = confusion_matrix(y_true, y_pred)?;
    let metrics = per_class_prf(&confusion)?;
    let mut roc = Vec::with_capacity(K);
    let mut curves = Vec::with_capacity(K);
    let mut undefined = Vec::new();
    for class in ClassLabel::ALL {
        let k = class.index();
        let scores: Vec<T> = probabilities.iter().map(|p| p[k]).collect();
        let positive: Vec<bool> = y_true.iter().map(|&y| y == class).collect();
        let curve = match roc_points(&scores, &positive) {
            Ok(c) => Some(c),
            Err(Error::DegenerateLabels(_)) => {
                undefined.push(class);
                None
            }
            Err(e) => return Err(e),
        };
        roc.push(ClassRoc {
            class,
            auc: curve.as_ref().map(|c| c.auc),
            points: curve.as_ref().map_or(0, |c| c.points.len()),
            curve: curve.clone(),
        });
        curves.push(curve);
    }
    Ok(EvaluationReport {
        rows: confusion.total(),
        accuracy: metrics.accuracy,
        precision_macro: metrics.precision_macro,
        recall_macro: metrics.recall_macro,
        f1_macro: metrics.f1_macro,
        auc_macro: macro_auc(&curves),
        auc_undefined: undefined,
        per_class: metrics.per_class,
        roc,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(idx: &[usize]) -> Vec<ClassLabel> {
        idx.iter().map(|&i| ClassLabel::from_index(i).unwrap()).collect()
    }

    #[test]
    fn confusion_example() {
        let c = confusion_matrix(&labels(&[0, 0, 1, 2]), &labels(&[0, 1, 1, 2])).unwrap();
        let mut expected = [[0u64; 5]; 5];
        expected[0][0] = 1;
        expected[0][1] = 1;
        expected[1][1] = 1;
        expected[2][2] = 1;
        assert_eq!(c.counts, expected);
        assert!(confusion_matrix(&labels(&[0]), &labels(&[0, 1])).is_err());
    }

    #[test]
    fn identical_labels_give_diagonal() {
        let y = labels(&[0, 1, 2, 3, 4, 4]);
        let c = confusion_matrix(&y, &y).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(c.counts[i][j], 0);
                }
            }
        }
        assert_eq!(accuracy(&c).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_edge_cases() {
        let c = confusion_matrix(&labels(&[0, 1]), &labels(&[1, 0])).unwrap();
        assert_eq!(accuracy(&c).unwrap(), 0.0);
        assert!(accuracy(&ConfusionMatrix { counts: [[0; 5]; 5] }).is_err());
    }

    fn reference_figure() -> ConfusionMatrix {
        // Diagonal and stated off-diagonal cells of the reference XGBoost
        // test-set matrix; the remaining errors are placed in column Normal.
        let mut c = [[0u64; 5]; 5];
        c[0] = [9600, 0, 0, 110, 0];
        c[1] = [58, 7400, 0, 0, 0];
        c[2] = [122, 0, 2300, 0, 0];
        c[3] = [320, 0, 0, 2500, 67];
        c[4] = [5, 0, 0, 2, 60];
        ConfusionMatrix { counts: c }
    }

    #[test]
    fn reference_matrix_values() {
        let c = reference_figure();
        assert_eq!(c.row_sum(4), 67);
        assert_eq!(c.total(), 22_544);
        assert!((accuracy(&c).unwrap() - 21_860.0 / 22_544.0).abs() < 1e-15);
        assert!((accuracy(&c).unwrap() - 0.9697).abs() < 5e-5);
        let m = per_class_prf(&c).unwrap();
        assert!((m.class(ClassLabel::U2R).recall - 60.0 / 67.0).abs() < 1e-15);
        assert!((m.class(ClassLabel::U2R).recall - 0.8955).abs() < 5e-5);
    }

    #[test]
    fn f1_examples() {
        assert!((f1_score(0.5, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
        let y = labels(&[0, 1, 2, 3, 4]);
        let m = per_class_prf(&confusion_matrix(&y, &y).unwrap()).unwrap();
        assert_eq!(m.f1_macro, 1.0);
    }

    #[test]
    fn zero_denominators_give_zero() {
        // nothing predicted as U2R and no U2R rows
        let c = confusion_matrix(&labels(&[0, 1]), &labels(&[0, 0])).unwrap();
        let m = per_class_prf(&c).unwrap();
        assert_eq!(m.class(ClassLabel::U2R).precision, 0.0);
        assert_eq!(m.class(ClassLabel::U2R).recall, 0.0);
        assert_eq!(m.class(ClassLabel::DoS).recall, 0.0);
        assert_eq!(m.class(ClassLabel::Normal).precision, 0.5);
    }

    #[test]
    fn roc_perfect_ranking() {
        let c = roc_points(&[0.9f64, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]);
        assert_eq!(c.auc, 1.0);
    }

    #[test]
    fn roc_all_tied_is_diagonal() {
        let c = roc_points(&[0.4f64; 4], &[true, false, true, false]).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(c.auc, 0.5);
    }

    #[test]
    fn roc_partial_ranking() {
        let c = roc_points(&[0.9f64, 0.4, 0.6, 0.3], &[true, true, false, false]).unwrap();
        assert!((c.auc - 0.75).abs() < 1e-15);
        assert_eq!(auc(&c), c.auc);
    }

    #[test]
    fn roc_degenerate_labels() {
        assert!(matches!(roc_points(&[0.1f64, 0.2], &[true, true]), Err(Error::DegenerateLabels(_))));
        assert!(matches!(roc_points(&[0.1f64, 0.2], &[false, false]), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn macro_auc_skips_undefined() {
        let perfect = roc_points(&[0.9f64, 0.1], &[true, false]).unwrap();
        let diag = roc_points(&[0.5f64, 0.5], &[true, false]).unwrap();
        assert_eq!(macro_auc(&[Some(perfect), None, Some(diag)]), Some(0.75));
        assert_eq!(macro_auc(&[None, None]), None);
    }

    #[test]
    fn perfect_classifier_report() {
        let y = labels(&[0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
        let probs: Vec<[f64; 5]> = y
            .iter()
            .map(|l| {
                let mut p = [0.0; 5];
                p[l.index()] = 1.0;
                p
            })
            .collect();
        let r = full_report(&y, &y, &probs).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.f1_macro, 1.0);
        assert_eq!(r.auc_macro, Some(1.0));
        let order: Vec<ClassLabel> = r.per_class.iter().map(|m| m.class).collect();
        assert_eq!(order, ClassLabel::ALL.to_vec());
    }

    #[test]
    fn constant_classifier_report() {
        let y = labels(&[0, 0, 0, 1, 2, 3]);
        let probs = vec![[0.6f64, 0.1, 0.1, 0.1, 0.1]; y.len()];
        let pred = vec![ClassLabel::Normal; y.len()];
        let r = full_report(&y, &pred, &probs).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.auc_undefined, vec![ClassLabel::U2R]);
        for roc in &r.roc[..4] {
            assert_eq!(roc.auc, Some(0.5));
        }
        assert_eq!(r.auc_macro, Some(0.5));
    }

    #[test]
    fn csv_round_trips() {
        let c = reference_figure();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(ConfusionMatrix::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), c);
        let roc = roc_points(&[0.9f64, 0.4, 0.6, 0.3], &[true, true, false, false]).unwrap();
        let mut buf = Vec::new();
        roc.write_csv(&mut buf).unwrap();
        assert_eq!(RocCurve::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), roc);
    }
}
