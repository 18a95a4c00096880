//! Confusion counts and the six evaluation metrics.
//!
//! Class 1 is the positive class. A metric whose denominator is zero is
//! reported as 0 and named in [`MetricsReport::undefined`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "AC")]
    Ac,
    #[serde(rename = "SE")]
    Se,
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "F1")]
    F1,
    #[serde(rename = "PR")]
    Pr,
    #[serde(rename = "RE")]
    Re,
}

impl Metric {
    /// Row order of the logistic-regression table.
    pub const TABLE_ORDER: [Metric; 6] = [
        Metric::Ac,
        Metric::Se,
        Metric::Sp,
        Metric::F1,
        Metric::Pr,
        Metric::Re,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Ac => "AC",
            Metric::Se => "SE",
            Metric::Sp => "SP",
            Metric::F1 => "F1",
            Metric::Pr => "PR",
            Metric::Re => "RE",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The six metrics of one evaluation, each in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ac: f64,
    pub se: f64,
    pub sp: f64,
    pub pr: f64,
    pub re: f64,
    pub f1: f64,
    #[serde(default)]
    pub undefined: BTreeSet<Metric>,
}

impl MetricsReport {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Ac => self.ac,
            Metric::Se => self.se,
            Metric::Sp => self.sp,
            Metric::F1 => self.f1,
            Metric::Pr => self.pr,
            Metric::Re => self.re,
        }
    }
}

/// Tallies predictions against ground truth.
pub fn confusion(predicted: &[u8], actual: &[u8]) -> Result<ConfusionCounts> {
    if predicted.len() != actual.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Contract("cannot score an empty prediction".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (1, 0) => c.fp += 1,
            (0, 1) => c.fn_ += 1,
            _ => {
                return Err(Error::Contract(format!(
                    "labels must be 0 or 1, got predicted {p} / actual {a}"
                )))
            }
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64, metric: Metric, undefined: &mut BTreeSet<Metric>) -> f64 {
    if den == 0 {
        undefined.insert(metric);
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(c: &ConfusionCounts) -> Result<MetricsReport> {
    if c.total() == 0 {
        return Err(Error::Contract("confusion counts are all zero".into()));
    }
    let mut undefined = BTreeSet::new();
    let se = ratio(c.tp, c.tp + c.fn_, Metric::Se, &mut undefined);
    let sp = ratio(c.tn, c.tn + c.fp, Metric::Sp, &mut undefined);
    let ac = ratio(c.tp + c.tn, c.total(), Metric::Ac, &mut undefined);
    let pr = ratio(c.tp, c.tp + c.fp, Metric::Pr, &mut undefined);
    let re = ratio(c.tp, c.tp + c.fn_, Metric::Re, &mut undefined);
    let f1 = if pr + re == 0.0 {
        undefined.insert(Metric::F1);
        0.0
    } else {
        2.0 * (pr * re) / (pr + re)
    };
    Ok(MetricsReport {
        ac,
        se,
        sp,
        pr,
        re,
        f1,
        undefined,
    })
}

/// Convenience: confusion counts then metrics.
pub fn evaluate(predicted: &[u8], actual: &[u8]) -> Result<MetricsReport> {
    compute_metrics(&confusion(predicted, actual)?)
}

/// Formats a fraction as a percentage with two decimals, rounding half up.
///
/// Rounding works on the shortest decimal representation of `x`, so
/// `0.59035` renders as `59.04%` even though its binary value lies slightly
/// below the midpoint.
pub fn render_percent(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}%");
    }
    let negative = x < 0.0;
    // Display for f64 prints the shortest round-tripping decimal, never in
    // exponent form.
    let text = format!("{}", x.abs());
    let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
    // value * 10^4 as a decimal digit string: shift the point four places
    let mut frac: Vec<u8> = frac_part.bytes().collect();
    let tail = if frac.len() > 4 {
        frac.split_off(4)
    } else {
        Vec::new()
    };
    frac.resize(4, b'0');
    let mut digits: Vec<u8> = int_part.bytes().chain(frac).map(|b| b - b'0').collect();
    if tail.first().is_some_and(|&b| b >= b'5') {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    // digits now hold round(x * 10^4); percent has two decimals
    let scaled: String = digits.iter().map(|d| char::from(b'0' + d)).collect();
    let scaled = scaled.trim_start_matches('0');
    let scaled = format!("{scaled:0>3}");
    let (whole, cents) = scaled.split_at(scaled.len() - 2);
    let sign = if negative && scaled.bytes().any(|b| b != b'0') {
        "-"
    } else {
        ""
    };
    format!("{sign}{whole}.{cents}%")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let c = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 2,
                tn: 1,
                fp: 0,
                fn_: 0
            }
        );
        let c = confusion(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 1,
                tn: 1,
                fp: 1,
                fn_: 1
            }
        );
    }

    #[test]
    fn confusion_contract_errors() {
        assert!(matches!(confusion(&[1, 0], &[1]), Err(Error::Contract(_))));
        assert!(matches!(confusion(&[], &[]), Err(Error::Contract(_))));
        assert!(matches!(confusion(&[2], &[1]), Err(Error::Contract(_))));
    }

    #[test]
    fn confusion_matches_counting_loop() {
        let mut rng = crate::tensor::Rng::new(17);
        let pred: Vec<u8> = (0..200).map(|_| (rng.next_u64() & 1) as u8).collect();
        let act: Vec<u8> = (0..200).map(|_| (rng.next_u64() & 1) as u8).collect();
        let c = confusion(&pred, &act).unwrap();
        let mut cells = [[0u64; 2]; 2];
        for i in 0..200 {
            cells[pred[i] as usize][act[i] as usize] += 1;
        }
        assert_eq!(
            (c.tp, c.tn, c.fp, c.fn_),
            (cells[1][1], cells[0][0], cells[1][0], cells[0][1])
        );
    }

    #[test]
    fn metrics_by_substitution() {
        let m = compute_metrics(&ConfusionCounts {
            tp: 3,
            tn: 2,
            fp: 1,
            fn_: 2,
        })
        .unwrap();
        assert_eq!(m.se, 0.6);
        assert_eq!(m.sp, 2.0 / 3.0);
        assert_eq!(m.ac, 5.0 / 8.0);
        assert_eq!(m.pr, 0.75);
        assert_eq!(m.re, 0.6);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(m.undefined.is_empty());
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let m = compute_metrics(&ConfusionCounts {
            tp: 0,
            tn: 4,
            fp: 0,
            fn_: 3,
        })
        .unwrap();
        assert_eq!(m.pr, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.undefined, BTreeSet::from([Metric::Pr, Metric::F1]));
        assert!(compute_metrics(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn f1_from_table_values() {
        let (pr, re): (f64, f64) = (0.6667, 0.5297);
        let f1 = 2.0 * pr * re / (pr + re);
        // published F1 for this pair is 59.01%
        assert!((f1 - 0.5901).abs() <= 1e-3);
    }

    #[test]
    fn percent_rendering() {
        assert_eq!(render_percent(33.0 / 52.0), "63.46%");
        assert_eq!(render_percent(1.0), "100.00%");
        assert_eq!(render_percent(0.59035), "59.04%");
        assert_eq!(render_percent(0.0), "0.00%");
        assert_eq!(render_percent(0.99999), "100.00%");
        assert_eq!(render_percent(0.00004), "0.00%");
        assert_eq!(render_percent(0.00005), "0.01%");
        assert_eq!(render_percent(1e-20), "0.00%");
        assert_eq!(render_percent(0.5), "50.00%");
    }
}
