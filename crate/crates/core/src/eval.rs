//! Classification metrics: confusion matrices, precision/recall/F1, ROC and
//! precision-recall curves, and macro-F1 threshold optimization.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    /// Actual positives.
    pub fn p_c(&self) -> u64 {
        self.tp + self.fn_
    }

    /// Actual negatives.
    pub fn n_c(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.p_c() + self.n_c()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// The same matrix with the roles of the two classes swapped.
    pub fn flipped(&self) -> Self {
        Self { tp: self.tn, fp: self.fn_, fn_: self.fp, tn: self.tp }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn check_inputs(y: &[bool], p: &[f64]) -> Result<()> {
    if y.len() != p.len() {
        return Err(Error::LengthMismatch(y.len(), p.len()));
    }
    if let Some(bad) = p.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(format!("score {bad}")));
    }
    Ok(())
}

/// Predicts positive iff `p >= threshold`.
pub fn confusion(y: &[bool], p: &[f64], threshold: f64) -> Result<ConfusionMatrix> {
    check_inputs(y, p)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    let mut cm = ConfusionMatrix::default();
    for (&yi, &pi) in y.iter().zip(p) {
        match (yi, pi >= threshold) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    /// Conflict class.
    pub positive: ClassMetrics,
    /// Non-conflict class.
    pub negative: ClassMetrics,
    pub macro_f1: f64,
    pub accuracy: f64,
}

pub fn prf(cm: &ConfusionMatrix) -> Prf {
    let positive = ClassMetrics::from_counts(cm.tp, cm.fp, cm.fn_);
    let negative = ClassMetrics::from_counts(cm.tn, cm.fn_, cm.fp);
    Prf { positive, negative, macro_f1: 0.5 * (positive.f1 + negative.f1), accuracy: cm.accuracy() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// `None` for the start point above every score.
    pub threshold: Option<f64>,
    pub x: f64,
    pub y: f64,
}

/// ROC points are (false positive rate, true positive rate); PR points are
/// (recall, precision). `auc` is the trapezoid area for ROC and average
/// precision for PR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
    pub auc: f64,
}

impl Curve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,x,y\n");
        for pt in &self.points {
            let t = pt.threshold.map(|t| t.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{t},{},{}", pt.x, pt.y);
        }
        out
    }
}

/// Cumulative (threshold, tp, fp) at each distinct score, highest first.
fn steps(y: &[bool], p: &[f64]) -> Vec<(f64, u64, u64)> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    let mut out: Vec<(f64, u64, u64)> = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in idx.iter().enumerate() {
        if y[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = k + 1 == idx.len() || p[idx[k + 1]] != p[i];
        if last_of_group {
            out.push((p[i], tp, fp));
        }
    }
    out
}

fn class_counts(y: &[bool]) -> (u64, u64) {
    let pos = y.iter().filter(|&&v| v).count() as u64;
    (pos, y.len() as u64 - pos)
}

pub fn roc_curve(y: &[bool], p: &[f64]) -> Result<Curve> {
    check_inputs(y, p)?;
    let (pos, neg) = class_counts(y);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut points = vec![CurvePoint { threshold: None, x: 0.0, y: 0.0 }];
    // Twice the area in units of (1/neg) x (1/pos), accumulated exactly.
    let mut area2: u128 = 0;
    let (mut tp0, mut fp0) = (0u64, 0u64);
    for (t, tp, fp) in steps(y, p) {
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(CurvePoint { threshold: Some(t), x: fp as f64 / neg as f64, y: tp as f64 / pos as f64 });
        tp0 = tp;
        fp0 = fp;
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(Curve { points, auc })
}

/// Precision-recall curve with average precision Σ (R_k - R_{k-1}) P_k.
pub fn pr_curve(y: &[bool], p: &[f64]) -> Result<Curve> {
    check_inputs(y, p)?;
    let (pos, _) = class_counts(y);
    if pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut points = vec![CurvePoint { threshold: None, x: 0.0, y: 1.0 }];
    let mut ap = 0.0;
    let mut r0 = 0.0;
    for (t, tp, fp) in steps(y, p) {
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / pos as f64;
        ap += (recall - r0) * precision;
        r0 = recall;
        points.push(CurvePoint { threshold: Some(t), x: recall, y: precision });
    }
    Ok(Curve { points, auc: ap })
}

pub fn average_precision(y: &[bool], p: &[f64]) -> Result<f64> {
    Ok(pr_curve(y, p)?.auc)
}

/// Curves for the conflict class, the non-conflict class (labels flipped,
/// scores reflected) and the mean of their areas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub positive: Curve,
    pub negative: Curve,
    pub macro_auc: f64,
}

fn flip(y: &[bool], p: &[f64]) -> (Vec<bool>, Vec<f64>) {
    (y.iter().map(|v| !v).collect(), p.iter().map(|v| 1.0 - v).collect())
}

pub fn roc_curves(y: &[bool], p: &[f64]) -> Result<CurveSet> {
    let positive = roc_curve(y, p)?;
    let (fy, fp) = flip(y, p);
    let negative = roc_curve(&fy, &fp)?;
    let macro_auc = 0.5 * (positive.auc + negative.auc);
    Ok(CurveSet { positive, negative, macro_auc })
}

pub fn pr_curves(y: &[bool], p: &[f64]) -> Result<CurveSet> {
    let positive = pr_curve(y, p)?;
    let (fy, fp) = flip(y, p);
    let negative = pr_curve(&fy, &fp).map_err(|_| Error::SingleClass)?;
    let macro_auc = 0.5 * (positive.auc + negative.auc);
    Ok(CurveSet { positive, negative, macro_auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweep {
    pub thresholds: Vec<f64>,
    pub macro_f1: Vec<f64>,
    pub best_threshold: f64,
    pub best_macro_f1: f64,
}

pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// Thresholds i/n for n = round(1/step), with 0.5 added when absent.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(format!("grid step must lie in (0, 1], got {step}")));
    }
    let n = (1.0 / step).round() as u64;
    let mut grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    if !grid.contains(&0.5) {
        grid.push(0.5);
        grid.sort_by(f64::total_cmp);
    }
    Ok(grid)
}

/// Macro F1 over the threshold grid; ties go to the lowest threshold.
pub fn optimize_threshold(y: &[bool], p: &[f64], step: f64) -> Result<ThresholdSweep> {
    check_inputs(y, p)?;
    let (pos, neg) = class_counts(y);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let thresholds = threshold_grid(step)?;
    let macro_f1 = thresholds
        .iter()
        .map(|&t| confusion(y, p, t).map(|cm| prf(&cm).macro_f1))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, &f) in macro_f1.iter().enumerate() {
        if f > macro_f1[best] {
            best = i;
        }
    }
    Ok(ThresholdSweep { best_threshold: thresholds[best], best_macro_f1: macro_f1[best], thresholds, macro_f1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: Prf,
}

impl ThresholdRow {
    pub fn at(y: &[bool], p: &[f64], threshold: f64) -> Result<Self> {
        let confusion = confusion(y, p, threshold)?;
        Ok(Self { threshold, metrics: prf(&confusion), confusion })
    }
}

/// Metrics at 0.50 and at the macro-F1-optimal threshold plus both curve
/// families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub positives: usize,
    pub at_default: ThresholdRow,
    pub at_optimized: ThresholdRow,
    pub sweep: ThresholdSweep,
    pub roc: CurveSet,
    pub pr: CurveSet,
}

impl EvaluationReport {
    /// `fixed` replaces the optimized threshold when given.
    pub fn build(y: &[bool], p: &[f64], grid_step: f64, fixed: Option<f64>) -> Result<Self> {
        let sweep = optimize_threshold(y, p, grid_step)?;
        let t = fixed.unwrap_or(sweep.best_threshold);
        Ok(Self {
            n: y.len(),
            positives: y.iter().filter(|&&v| v).count(),
            at_default: ThresholdRow::at(y, p, 0.5)?,
            at_optimized: ThresholdRow::at(y, p, t)?,
            roc: roc_curves(y, p)?,
            pr: pr_curves(y, p)?,
            sweep,
        })
    }

    /// Text table with per-class precision, recall and F1 at both
    /// thresholds, followed by the macro scores and curve areas.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<9}  {:<12}  {:>9}  {:>6}  {:>6}  {:>8}  {:>8}",
            "Threshold", "Class", "Precision", "Recall", "F1", "Macro F1", "Accuracy"
        );
        for row in [&self.at_default, &self.at_optimized] {
            for (i, (name, m)) in
                [("conflict", row.metrics.positive), ("no conflict", row.metrics.negative)].into_iter().enumerate()
            {
                let (t, macro_f1, acc) = if i == 0 {
                    (format!("{:.2}", row.threshold), format!("{:.3}", row.metrics.macro_f1), format!("{:.3}", row.metrics.accuracy))
                } else {
                    (String::new(), String::new(), String::new())
                };
                let _ = writeln!(
                    out,
                    "{:<9}  {:<12}  {:>9.3}  {:>6.3}  {:>6.3}  {:>8}  {:>8}",
                    t, name, m.precision, m.recall, m.f1, macro_f1, acc
                );
            }
        }
        let _ = writeln!(
            out,
            "ROC AUC: conflict {:.3}, no conflict {:.3}, macro {:.3}",
            self.roc.positive.auc, self.roc.negative.auc, self.roc.macro_auc
        );
        let _ = writeln!(
            out,
            "PR AUC:  conflict {:.3}, no conflict {:.3}, macro {:.3}",
            self.pr.positive.auc, self.pr.negative.auc, self.pr.macro_auc
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    const Y5: [bool; 5] = [true, true, false, false, false];
    const P5: [f64; 5] = [0.6, 0.4, 0.55, 0.2, 0.1];

    #[test]
    fn confusion_cases() {
        let cm = confusion(&[true, false], &[0.9, 0.1], 0.5).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 1, fp: 0, fn_: 0, tn: 1 });
        let cm = confusion(&Y5, &P5, 0.0).unwrap();
        assert_eq!((cm.tn, cm.fn_), (0, 0));
        let cm = confusion(&Y5, &P5, 0.5).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 1, fp: 1, fn_: 1, tn: 2 });
        assert_eq!(cm.accuracy(), 0.6);
        assert!(matches!(confusion(&Y5, &P5[..3], 0.5), Err(Error::LengthMismatch(5, 3))));
        assert!(confusion(&Y5, &P5, 1.5).is_err());
        // Inclusive rule.
        assert_eq!(confusion(&[true], &[0.5], 0.5).unwrap().tp, 1);
    }

    #[test]
    fn prf_cases() {
        let perfect = prf(&ConfusionMatrix { tp: 3, fp: 0, fn_: 0, tn: 4 });
        assert_eq!(perfect.positive, ClassMetrics { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(perfect.macro_f1, 1.0);
        let none = prf(&ConfusionMatrix { tp: 0, fp: 0, fn_: 5, tn: 3 });
        assert_eq!(none.positive, ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0 });
        let m = prf(&ConfusionMatrix { tp: 2, fp: 1, fn_: 2, tn: 0 }).positive;
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1 - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn roc_cases() {
        let y = [false, false, true, true];
        assert_eq!(roc_curve(&y, &[0.1, 0.2, 0.8, 0.9]).unwrap().auc, 1.0);
        assert_eq!(roc_curve(&y, &[0.3; 4]).unwrap().auc, 0.5);
        assert!(matches!(roc_curve(&[true, true], &[0.1, 0.2]), Err(Error::SingleClass)));
        let c = roc_curve(&Y5, &P5).unwrap();
        assert_eq!(c.points.first().map(|p| (p.x, p.y)), Some((0.0, 0.0)));
        assert_eq!(c.points.last().map(|p| (p.x, p.y)), Some((1.0, 1.0)));
    }

    #[test]
    fn average_precision_cases() {
        assert_eq!(average_precision(&[false, true, true], &[0.1, 0.7, 0.9]).unwrap(), 1.0);
        let n = 1470;
        let y: Vec<bool> = (0..n).map(|i| i < 89).collect();
        let ap = average_precision(&y, &vec![0.3; n]).unwrap();
        assert!((ap - 89.0 / 1470.0).abs() < 1e-12);
        assert!(matches!(average_precision(&[false], &[0.2]), Err(Error::NoPositives)));
    }

    /// Average precision by enumerating every candidate threshold.
    fn ap_bruteforce(y: &[bool], p: &[f64]) -> f64 {
        let mut ts: Vec<f64> = p.to_vec();
        ts.sort_by(|a, b| b.total_cmp(a));
        ts.dedup();
        let pos = y.iter().filter(|&&v| v).count() as f64;
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for t in ts {
            let cm = confusion(y, p, t.clamp(0.0, 1.0)).unwrap();
            let recall = cm.tp as f64 / pos;
            let precision = cm.tp as f64 / (cm.tp + cm.fp) as f64;
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        ap
    }

    #[test]
    fn five_point_average_precision() {
        // Ranking 0.6(+) 0.55(-) 0.4(+): AP = 0.5 * 1 + 0.5 * 2/3.
        let ap = average_precision(&Y5, &P5).unwrap();
        assert!((ap - ap_bruteforce(&Y5, &P5)).abs() < 1e-15);
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn threshold_sweep() {
        let sweep = optimize_threshold(&Y5, &P5, 0.01).unwrap();
        assert_eq!(sweep.thresholds.len(), 101);
        let at_half = sweep.macro_f1[50];
        assert!(sweep.best_macro_f1 >= at_half);
        // t in (0.2, 0.4]: tp=2, fp=1, tn=2 so both class F1s are 0.8; the
        // lowest grid point in that range wins.
        assert!((sweep.best_threshold - 0.21).abs() < 1e-12);
        assert!((sweep.best_macro_f1 - 0.8).abs() < 1e-12);
        let sep = optimize_threshold(&[false, true], &[0.2, 0.7], 0.01).unwrap();
        assert_eq!(sep.best_macro_f1, 1.0);
        let g = threshold_grid(0.3).unwrap();
        assert!(g.contains(&0.5) && g.contains(&0.0) && g.contains(&1.0));
        assert!(optimize_threshold(&[true], &[0.4], 0.01).is_err());
    }

    #[test]
    fn report_text() {
        let r = EvaluationReport::build(&Y5, &P5, 0.05, None).unwrap();
        let text = r.to_text();
        assert!(text.contains("0.50"));
        assert!(text.contains("Macro F1"));
        assert_eq!(r.at_default.threshold, 0.5);
        let fixed = EvaluationReport::build(&Y5, &P5, 0.05, Some(0.3)).unwrap();
        assert_eq!(fixed.at_optimized.threshold, 0.3);
        assert!(r.roc.positive.to_csv().starts_with("threshold,x,y\n"));
    }

    fn mann_whitney(y: &[bool], p: &[f64]) -> f64 {
        let mut s = 0.0;
        let mut pairs = 0.0;
        for i in (0..y.len()).filter(|&i| y[i]) {
            for j in (0..y.len()).filter(|&j| !y[j]) {
                pairs += 1.0;
                if p[i] > p[j] {
                    s += 1.0;
                } else if p[i] == p[j] {
                    s += 0.5;
                }
            }
        }
        s / pairs
    }

    fn dataset(seed: u64) -> (Vec<bool>, Vec<f64>) {
        let mut rng = seed::rng(seed);
        let n = rng.random_range(2..=50);
        let mut y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        y[0] = true;
        y[1] = false;
        // Coarse scores force ties.
        let p = (0..n).map(|_| f64::from(rng.random_range(0..8u8)) / 8.0).collect();
        (y, p)
    }

    proptest! {
        #[test]
        fn auc_matches_mann_whitney(seed in any::<u64>()) {
            let (y, p) = dataset(seed);
            prop_assert!((roc_curve(&y, &p).unwrap().auc - mann_whitney(&y, &p)).abs() < 1e-12);
        }

        #[test]
        fn curve_invariances(seed in any::<u64>()) {
            let (y, p) = dataset(seed);
            let roc = roc_curve(&y, &p).unwrap().auc;
            let cubed: Vec<f64> = p.iter().map(|v| v.powi(3) + 2.0).collect();
            prop_assert_eq!(roc_curve(&y, &cubed).unwrap().auc, roc);
            let rev_y: Vec<bool> = y.iter().rev().copied().collect();
            let rev_p: Vec<f64> = p.iter().rev().copied().collect();
            prop_assert_eq!(roc_curve(&rev_y, &rev_p).unwrap().auc, roc);
            prop_assert_eq!(average_precision(&rev_y, &rev_p).unwrap(), average_precision(&y, &p).unwrap());
            prop_assert!((average_precision(&y, &p).unwrap() - ap_bruteforce(&y, &p)).abs() < 1e-12);
        }

        #[test]
        fn accuracy_and_flip_symmetry(seed in any::<u64>(), t in 0.0f64..1.0) {
            let (y, p) = dataset(seed);
            let cm = confusion(&y, &p, t).unwrap();
            let n = y.len() as f64;
            prop_assert!((cm.accuracy() - (1.0 - (cm.fp + cm.fn_) as f64 / n)).abs() < 1e-12);
            prop_assert_eq!(cm.total() as usize, y.len());
            // Flipping labels and reflecting scores swaps the classes exactly
            // when no score sits on the threshold.
            if p.iter().all(|&v| v != t) {
                let (fy, fp) = flip(&y, &p);
                let flipped = confusion(&fy, &fp, 1.0 - t).unwrap();
                prop_assert_eq!(flipped, cm.flipped());
                prop_assert!((prf(&flipped).macro_f1 - prf(&cm).macro_f1).abs() < 1e-15);
            }
            let sweep = optimize_threshold(&y, &p, 0.01).unwrap();
            prop_assert!(sweep.best_macro_f1 >= prf(&confusion(&y, &p, 0.5).unwrap()).macro_f1);
        }
    }
}
