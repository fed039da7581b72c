//! Confusion matrix, threshold metrics and rank-based AUC.
//!
//! For the class under evaluation `c`, a sample is positive when its label is
//! `c` and predicted positive when the prediction is `c`; every other class
//! counts as negative.
//!
//! Ratios whose denominator is zero evaluate to 0 and carry a `degenerate`
//! flag instead of becoming NaN.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

/// Counts for one class against the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

/// A ratio that may have had a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub degenerate: bool,
}

impl Ratio {
    fn of(num: usize, den: usize) -> Self {
        if den == 0 {
            Ratio {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Ratio {
                value: num as f64 / den as f64,
                degenerate: false,
            }
        }
    }
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Positives in the evaluated labels.
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }

    /// TN / (TN + FP)
    pub fn spec(&self) -> Ratio {
        Ratio::of(self.tn, self.tn + self.fp)
    }

    /// TP / (TP + FN)
    pub fn sens(&self) -> Ratio {
        Ratio::of(self.tp, self.tp + self.fn_)
    }

    /// TP / (TP + FP)
    pub fn precision(&self) -> Ratio {
        Ratio::of(self.tp, self.tp + self.fp)
    }

    /// Harmonic mean of precision and recall.
    pub fn f1(&self) -> Ratio {
        let (p, r) = (self.precision(), self.sens());
        let sum = p.value + r.value;
        if sum == 0.0 {
            Ratio {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Ratio {
                value: 2.0 * p.value * r.value / sum,
                degenerate: p.degenerate || r.degenerate,
            }
        }
    }

    /// √(Spec · Sens)
    pub fn g_mean(&self) -> Ratio {
        let (s, r) = (self.spec(), self.sens());
        Ratio {
            value: (s.value * r.value).sqrt(),
            degenerate: s.degenerate || r.degenerate,
        }
    }
}

fn check_lengths(left: usize, right: usize, what: &'static str) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(Error::EmptyInput(what));
    }
    Ok(())
}

pub fn confusion(labels: &[usize], predictions: &[usize], positive: usize) -> Result<ConfusionMatrix> {
    check_lengths(labels.len(), predictions.len(), "confusion")?;
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y == positive, p == positive) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, ties counting one half.
///
/// Computed from average ranks in O(n log n). Doubled ranks are summed as
/// integers, so the only rounding is the final division.
pub fn auc(is_positive: &[bool], scores: &[f64]) -> Result<f64> {
    check_lengths(is_positive.len(), scores.len(), "auc")?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("auc scores"));
    }
    let n_pos = is_positive.iter().filter(|&&p| p).count() as u128;
    let n_neg = is_positive.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // A tie group occupying 0-based positions [start, end) has average
    // 1-based rank (start + 1 + end) / 2.
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let doubled = (start + 1 + end) as u128;
        let positives = order[start..end].iter().filter(|&&i| is_positive[i]).count() as u128;
        doubled_rank_sum += doubled * positives;
        start = end;
    }
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// AUC of `scores` for `positive` against every other label.
pub fn auc_for_class(labels: &[usize], scores: &[f64], positive: usize) -> Result<f64> {
    let is_positive: Vec<bool> = labels.iter().map(|&y| y == positive).collect();
    auc(&is_positive, scores)
}

/// Whether a class was the smaller side of the model that scored it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Majority,
    Minority,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Majority => "majority",
            Role::Minority => "minority",
        })
    }
}

/// Metrics for one evaluated class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: usize,
    pub role: Role,
    pub confusion: ConfusionMatrix,
    pub spec: f64,
    pub sens: f64,
    pub precision: f64,
    pub f1: f64,
    pub g_mean: f64,
    pub auc: f64,
    /// Set when any ratio above had a zero denominator.
    pub degenerate: bool,
}

impl ClassMetrics {
    /// `scores[i]` is the model's score for `class` on sample `i`.
    pub fn compute(
        class: usize,
        role: Role,
        labels: &[usize],
        predictions: &[usize],
        scores: &[f64],
    ) -> Result<Self> {
        let cm = confusion(labels, predictions, class)?;
        let auc = auc_for_class(labels, scores, class)?;
        let ratios = [cm.spec(), cm.sens(), cm.precision(), cm.f1(), cm.g_mean()];
        Ok(ClassMetrics {
            class,
            role,
            confusion: cm,
            spec: ratios[0].value,
            sens: ratios[1].value,
            precision: ratios[2].value,
            f1: ratios[3].value,
            g_mean: ratios[4].value,
            auc,
            degenerate: ratios.iter().any(|r| r.degenerate),
        })
    }
}

const CSV_HEADER: &str = "class,role,support,tp,fp,fn,tn,spec,sens,precision,f1,g_mean,auc,degenerate";

/// One row per evaluated class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub rows: Vec<ClassMetrics>,
}

impl MetricsReport {
    pub fn row(&self, class: usize) -> Option<&ClassMetrics> {
        self.rows.iter().find(|r| r.class == class)
    }

    /// Flat `key=value` records, one line per class, six decimals.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let c = &r.confusion;
            out.push_str(&format!(
                "class={} role={} support={} tp={} fp={} fn={} tn={} spec={:.6} sens={:.6} \
                 precision={:.6} f1={:.6} g_mean={:.6} auc={:.6} degenerate={}\n",
                r.class,
                r.role,
                c.support(),
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                r.spec,
                r.sens,
                r.precision,
                r.f1,
                r.g_mean,
                r.auc,
                r.degenerate
            ));
        }
        out
    }

    /// CSV with full-precision floats.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            let c = &r.confusion;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.class,
                r.role,
                c.support(),
                c.tp,
                c.fp,
                c.fn_,
                c.tn,
                r.spec,
                r.sens,
                r.precision,
                r.f1,
                r.g_mean,
                r.auc,
                r.degenerate
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("report is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn counting_small_case() {
        let cm = confusion(&[1, 1, 0], &[1, 0, 0], 1).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 1, fn_: 1, fp: 0, tn: 1 });
        let all = confusion(&[0, 2, 1, 2], &[0, 2, 1, 2], 2).unwrap();
        assert_eq!((all.fp, all.fn_, all.total()), (0, 0, 4));
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(confusion(&[1], &[1, 0], 1), Err(Error::LengthMismatch { .. })));
        assert!(matches!(confusion(&[], &[], 1), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn metric_arithmetic() {
        let cm = ConfusionMatrix { tp: 9, fn_: 1, fp: 2, tn: 8 };
        assert!(close(cm.sens().value, 0.9, 1e-15));
        assert!(close(cm.spec().value, 0.8, 1e-15));
        assert!(close(cm.precision().value, 9.0 / 11.0, 1e-15));
        assert!(close(cm.f1().value, 0.857143, 1e-6));
        assert!(close(cm.g_mean().value, 0.848528, 1e-6));
        assert!(!cm.g_mean().degenerate);
    }

    #[test]
    fn perfect_and_zero_sensitivity() {
        let perfect = ConfusionMatrix { tp: 5, fn_: 0, fp: 0, tn: 7 };
        for r in [perfect.spec(), perfect.sens(), perfect.precision(), perfect.f1(), perfect.g_mean()] {
            assert_eq!(r.value, 1.0);
        }
        let blind = ConfusionMatrix { tp: 0, fn_: 4, fp: 0, tn: 9 };
        assert_eq!(blind.g_mean().value, 0.0);
        assert_eq!(blind.spec().value, 1.0);
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let no_pos = ConfusionMatrix { tp: 0, fn_: 0, fp: 0, tn: 3 };
        let s = no_pos.sens();
        assert_eq!((s.value, s.degenerate), (0.0, true));
        assert!(no_pos.precision().degenerate);
        assert!(no_pos.f1().degenerate);
        assert!(no_pos.g_mean().degenerate);
        assert!(no_pos.f1().value.is_finite());
    }

    #[test]
    fn auc_examples() {
        let labels = [true, true, false, false];
        assert_eq!(auc(&labels, &[0.9, 0.8, 0.3, 0.1]).unwrap(), 1.0);
        assert_eq!(auc(&labels, &[0.5; 4]).unwrap(), 0.5);
        assert_eq!(auc(&labels, &[0.1, 0.3, 0.8, 0.9]).unwrap(), 0.0);
        // one tie between a positive and a negative
        assert_eq!(auc(&labels, &[0.9, 0.3, 0.3, 0.1]).unwrap(), 0.875);
    }

    #[test]
    fn auc_errors() {
        assert!(matches!(auc(&[true, true], &[0.1, 0.2]), Err(Error::UndefinedAuc)));
        assert!(matches!(auc(&[true], &[0.1, 0.2]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(auc(&[true, false], &[f64::NAN, 0.2]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn report_rows_serialize() {
        let labels = [0, 0, 0, 1, 1];
        let preds = [0, 0, 1, 1, 1];
        let scores = [0.1, 0.2, 0.6, 0.7, 0.9];
        let row = ClassMetrics::compute(1, Role::Minority, &labels, &preds, &scores).unwrap();
        assert_eq!(row.auc, 1.0);
        assert!(close(row.g_mean * row.g_mean, row.spec * row.sens, 1e-12));
        let report = MetricsReport { rows: vec![row] };
        let kv = report.to_key_value();
        assert!(kv.starts_with("class=1 role=minority support=2 tp=2 fp=1 fn=0 tn=2 spec=0.666667"));
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert!(lines.next().unwrap().starts_with("1,minority,2,2,1,0,2,0.6666666666666666,1,"));
        assert!(report.row(1).is_some() && report.row(0).is_none());
    }
}
