//! CSV ingestion for the three sleep datasets and synthetic stand-ins.
//!
//! Each dataset has a registered schema: a fixed list of columns with a cell
//! grammar (`ColumnKind`) and a role. Header matching is case-insensitive
//! after trimming; columns in the file that are not registered are ignored,
//! as are registered columns with role `Excluded`. Missing cells in feature
//! or target columns are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{NumArray, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetId {
    SleepStudy,
    SleepDeprivation,
    SleepCycle,
}

impl DatasetId {
    pub const ALL: [DatasetId; 3] = [
        DatasetId::SleepStudy,
        DatasetId::SleepDeprivation,
        DatasetId::SleepCycle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::SleepStudy => "sleep_study",
            DatasetId::SleepDeprivation => "sleep_deprivation",
            DatasetId::SleepCycle => "sleep_cycle",
        }
    }

    /// Column heading used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            DatasetId::SleepStudy => "Sleep-Study",
            DatasetId::SleepDeprivation => "Sleep Deprivation",
            DatasetId::SleepCycle => "Sleep Cycle Data",
        }
    }

    /// Record count of the original public dataset.
    pub fn original_rows(self) -> usize {
        match self {
            DatasetId::SleepStudy => 104,
            DatasetId::SleepDeprivation => 86,
            DatasetId::SleepCycle => 50,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Param(format!("unknown dataset id '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    YesNo,
    Percent,
    ClockTime,
    Ordinal1To5,
    Ignored,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Feature,
    Target,
    Excluded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
}

fn col(name: &str, kind: ColumnKind, role: ColumnRole) -> ColumnSchema {
    ColumnSchema {
        name: name.to_string(),
        kind,
        role,
    }
}

/// Registered columns for a dataset, in file order.
pub fn schema(id: DatasetId) -> Vec<ColumnSchema> {
    use ColumnKind::*;
    use ColumnRole::*;
    match id {
        DatasetId::SleepStudy => vec![
            col("Enough", YesNo, Target),
            col("Hours", Numeric, Feature),
            col("PhoneReach", YesNo, Feature),
            col("PhoneTime", YesNo, Feature),
            col("Tired", Ordinal1To5, Feature),
            col("Breakfast", YesNo, Feature),
        ],
        DatasetId::SleepDeprivation => vec![
            col("Age_Group", Numeric, Feature),
            col("Anxiety_Rate", Numeric, Feature),
            col("Depression_Rate", Numeric, Feature),
            col("Panic", Numeric, Feature),
            col("Worry", Numeric, Feature),
            col("Health_Problems", YesNo, Feature),
            col("Nap_Duration", Numeric, Feature),
            col("Enough_Sleep", YesNo, Target),
            col("Overall_Sleep_Quality", Numeric, Excluded),
        ],
        DatasetId::SleepCycle => vec![
            col("Start", ClockTime, Feature),
            col("End", ClockTime, Feature),
            col("Sleep quality", Percent, Target),
            col("Time in bed", ClockTime, Feature),
            col("Wake up", Ordinal1To5, Feature),
            col("Sleep Notes", Ignored, Excluded),
            col("Heart rate", Numeric, Feature),
            col("Activity (steps)", Numeric, Feature),
        ],
    }
}

/// Features plus binary labels for one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub id: DatasetId,
    pub features: NumArray,
    pub labels: Vec<u8>,
    pub schema: Vec<ColumnSchema>,
}

impl Dataset {
    pub fn new(
        id: DatasetId,
        features: NumArray,
        labels: Vec<u8>,
        schema: Vec<ColumnSchema>,
    ) -> Result<Self> {
        features.expect_rank(2, "Dataset")?;
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::Shape(format!(
                "{n} feature rows but {} labels",
                labels.len()
            )));
        }
        if n < 2 {
            return Err(Error::Ingestion(format!(
                "{id}: need at least 2 rows, got {n}"
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Contract("labels must be 0 or 1".into()));
        }
        check_two_classes(&labels, id.as_str())?;
        let d = schema
            .iter()
            .filter(|c| c.role == ColumnRole::Feature)
            .count();
        if features.ncols() != d {
            return Err(Error::Shape(format!(
                "{id}: schema has {d} feature columns, matrix has {}",
                features.ncols()
            )));
        }
        if !features.all_finite() {
            return Err(Error::Numeric(format!("{id}: non-finite feature value")));
        }
        Ok(Dataset {
            id,
            features,
            labels,
            schema,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.schema
            .iter()
            .filter(|c| c.role == ColumnRole::Feature)
            .map(|c| c.name.as_str())
            .collect()
    }

    /// Rows at `indices` without re-checking class balance.
    pub(crate) fn subset_unchecked(&self, indices: &[usize]) -> Result<Dataset> {
        Ok(Dataset {
            id: self.id,
            features: self.features.select_rows(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            schema: self.schema.clone(),
        })
    }
}

fn check_two_classes(labels: &[u8], what: &str) -> Result<()> {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == labels.len() {
        return Err(Error::SingleClass(format!(
            "{what}: all {} rows have label {}",
            labels.len(),
            labels.first().copied().unwrap_or(0)
        )));
    }
    Ok(())
}

/// A cell that does not fit its column's grammar.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct CellError(String);

/// Encodes one raw cell according to its column kind.
///
/// * `yes_no`: "yes" -> 1, "no" -> 0 (case-insensitive)
/// * `percent`: "72%" -> 72
/// * `clock_time`: "7:23" -> 443 minutes since midnight; seconds become a
///   fraction of a minute and an optional leading `YYYY-MM-DD ` date is
///   dropped. Also used for durations such as "8:32".
/// * `ordinal_1_5`: an integer 1..=5, or a mood icon `:(` = 1, `:|` = 3,
///   `:)` = 5
/// * `numeric`: any finite decimal
pub fn encode_cell(raw: &str, kind: ColumnKind) -> std::result::Result<f64, CellError> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(CellError("missing value".into()));
    }
    let bad = |what: &str| CellError(format!("'{s}' is not a valid {what}"));
    match kind {
        ColumnKind::YesNo => {
            if s.eq_ignore_ascii_case("yes") {
                Ok(1.0)
            } else if s.eq_ignore_ascii_case("no") {
                Ok(0.0)
            } else {
                Err(bad("yes/no value"))
            }
        }
        ColumnKind::Percent => s
            .strip_suffix('%')
            .and_then(|v| parse_finite(v.trim_end()))
            .ok_or_else(|| bad("percentage")),
        ColumnKind::ClockTime => parse_clock(s).ok_or_else(|| bad("clock time")),
        ColumnKind::Ordinal1To5 => match s {
            ":(" => Ok(1.0),
            ":|" => Ok(3.0),
            ":)" => Ok(5.0),
            _ => parse_finite(s)
                .filter(|v| v.fract() == 0.0 && (1.0..=5.0).contains(v))
                .ok_or_else(|| bad("rating in 1..=5")),
        },
        ColumnKind::Numeric => parse_finite(s).ok_or_else(|| bad("number")),
        ColumnKind::Ignored => Err(CellError("ignored columns are not encoded".into())),
    }
}

fn parse_finite(s: &str) -> Option<f64> {
    // reject forms like "inf", "nan", "+.5e"
    if !s
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
    {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_clock(s: &str) -> Option<f64> {
    // optional "YYYY-MM-DD " prefix
    let time = match s.split_once(' ') {
        Some((date, time)) => {
            let parts: Vec<&str> = date.split('-').collect();
            let ok = parts.len() == 3
                && parts
                    .iter()
                    .all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()));
            if !ok {
                return None;
            }
            time.trim()
        }
        None => s,
    };
    let parts: Vec<&str> = time.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return None;
    }
    let digits = |p: &str, lo: usize, hi: usize| -> Option<u32> {
        if p.len() < lo || p.len() > hi || !p.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        p.parse().ok()
    };
    let hours = digits(parts[0], 1, 2)?;
    let minutes = digits(parts[1], 2, 2).filter(|&m| m < 60)?;
    let seconds = match parts.get(2) {
        Some(p) => digits(p, 2, 2).filter(|&v| v < 60)?,
        None => 0,
    };
    Some(f64::from(hours * 60 + minutes) + f64::from(seconds) / 60.0)
}

/// Binary labels from an encoded target column.
///
/// `yes_no` targets pass through. Every other kind is split at the median of
/// the whole column: label 1 iff value > median.
pub fn derive_label(column: &[f64], kind: ColumnKind) -> Result<Vec<u8>> {
    if column.len() < 2 {
        return Err(Error::Ingestion(format!(
            "target column needs at least 2 values, got {}",
            column.len()
        )));
    }
    let labels: Vec<u8> = match kind {
        ColumnKind::YesNo => column
            .iter()
            .map(|&v| match v {
                v if v == 1.0 => Ok(1),
                v if v == 0.0 => Ok(0),
                v => Err(Error::Contract(format!("yes/no target holds {v}"))),
            })
            .collect::<Result<_>>()?,
        ColumnKind::Ignored => {
            return Err(Error::Schema("an ignored column cannot be a target".into()))
        }
        _ => {
            let m = median(column);
            column.iter().map(|&v| u8::from(v > m)).collect()
        }
    };
    check_two_classes(&labels, "target")?;
    Ok(labels)
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn load_csv(path: impl AsRef<Path>, id: DatasetId) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, id)
}

/// Parses CSV text under the registered schema for `id`.
pub fn parse_csv(text: &str, id: DatasetId) -> Result<Dataset> {
    if text.trim().is_empty() {
        return Err(Error::Ingestion(format!("{id}: empty file")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Ingestion(format!("{id}: unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_lowercase())
        .collect();

    let schema = schema(id);
    let mut features = Vec::new();
    let mut target = None;
    for column in &schema {
        if column.role == ColumnRole::Excluded {
            continue;
        }
        let position = header
            .iter()
            .position(|h| *h == column.name.to_lowercase())
            .ok_or_else(|| Error::Schema(format!("{id}: missing column '{}'", column.name)))?;
        match column.role {
            ColumnRole::Feature => features.push((position, column)),
            ColumnRole::Target => target = Some((position, column)),
            ColumnRole::Excluded => unreachable!(),
        }
    }
    let (target_pos, target_col) =
        target.ok_or_else(|| Error::Schema(format!("{id}: schema has no target")))?;

    let mut rows = Vec::new();
    let mut target_values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // row numbers are 1-based data rows (the header is row 0)
        let row = i + 1;
        let record = record.map_err(|e| Error::Ingestion(format!("{id}: row {row}: {e}")))?;
        let cell = |pos: usize, column: &ColumnSchema| -> Result<f64> {
            encode_cell(record.get(pos).unwrap_or(""), column.kind).map_err(|e| Error::Parse {
                row,
                column: column.name.clone(),
                message: e.0,
            })
        };
        let encoded = features
            .iter()
            .map(|(pos, column)| cell(*pos, column))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(encoded);
        target_values.push(cell(target_pos, target_col)?);
    }
    if rows.is_empty() {
        return Err(Error::Ingestion(format!("{id}: no data rows")));
    }
    let labels = derive_label(&target_values, target_col.kind).map_err(|e| match e {
        Error::SingleClass(msg) => Error::SingleClass(format!("{id} {msg}")),
        other => other,
    })?;
    let d = features.len();
    let matrix = NumArray::new(vec![rows.len(), d], rows.concat())?;
    Dataset::new(id, matrix, labels, schema)
}

/// Size and label noise of a synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub rows: usize,
    /// Fraction of rows, in `[0, 0.5]`, whose target is taken from the
    /// opposite mixture component. Exactly `round(noise * rows)` rows are
    /// flipped. 0 makes the label a deterministic function of the features.
    pub noise: f64,
}

/// Label noise that puts the eight classifiers roughly in the 55-75%
/// accuracy range.
pub const MODERATE_NOISE: f64 = 0.25;

impl FixtureSpec {
    pub fn original(id: DatasetId, noise: f64) -> Self {
        FixtureSpec {
            rows: id.original_rows(),
            noise,
        }
    }
}

/// How a fixture column is rendered from the row's latent value `v`.
enum Render {
    /// `center + scale * v`, rounded to `decimals`, clamped to `[lo, hi]`.
    Number {
        center: f64,
        scale: f64,
        decimals: i32,
        lo: f64,
        hi: f64,
    },
    YesNo,
    Rating,
    Mood,
    /// Minutes, rendered as `H:MM`.
    Clock {
        center: f64,
        scale: f64,
        lo: f64,
        hi: f64,
    },
    Notes,
}

struct ColumnGen {
    /// Weight of the shared latent score in this column.
    loading: f64,
    render: Render,
}

fn num(center: f64, scale: f64, decimals: i32, lo: f64, hi: f64) -> Render {
    Render::Number {
        center,
        scale,
        decimals,
        lo,
        hi,
    }
}

fn generators(id: DatasetId) -> Vec<ColumnGen> {
    let g = |loading: f64, render: Render| ColumnGen { loading, render };
    match id {
        DatasetId::SleepStudy => vec![
            g(1.0, Render::YesNo),
            g(0.9, num(7.0, 1.0, 0, 2.0, 12.0)),
            g(-0.6, Render::YesNo),
            g(-0.6, Render::YesNo),
            g(-0.9, Render::Rating),
            g(0.5, Render::YesNo),
        ],
        DatasetId::SleepDeprivation => vec![
            g(-0.4, num(2.5, 0.8, 0, 1.0, 4.0)),
            g(-0.9, num(5.0, 2.0, 0, 0.0, 10.0)),
            g(-0.8, num(4.0, 2.0, 0, 0.0, 10.0)),
            g(-0.6, num(2.5, 1.2, 0, 0.0, 5.0)),
            g(-0.7, num(3.0, 1.2, 0, 0.0, 5.0)),
            g(-0.5, Render::YesNo),
            g(0.5, num(30.0, 15.0, 0, 0.0, 120.0)),
            g(1.0, Render::YesNo),
            g(1.0, num(3.0, 1.0, 0, 1.0, 5.0)),
        ],
        DatasetId::SleepCycle => vec![
            g(
                -0.7,
                Render::Clock {
                    center: 1365.0,
                    scale: 25.0,
                    lo: 1260.0,
                    hi: 1439.0,
                },
            ),
            g(
                0.6,
                Render::Clock {
                    center: 420.0,
                    scale: 30.0,
                    lo: 300.0,
                    hi: 600.0,
                },
            ),
            g(1.0, num(70.0, 12.0, 0, 0.0, 100.0)),
            g(
                0.9,
                Render::Clock {
                    center: 480.0,
                    scale: 45.0,
                    lo: 240.0,
                    hi: 720.0,
                },
            ),
            g(0.8, Render::Mood),
            g(0.0, Render::Notes),
            g(-0.6, num(60.0, 6.0, 0, 40.0, 100.0)),
            g(0.5, num(6000.0, 2500.0, 0, 0.0, 20000.0)),
        ],
    }
}

const NOTES: [&str; 4] = [
    "",
    "Drank coffee",
    "Stressful day",
    "Drank coffee, Worked out",
];

/// Synthetic, schema-conformant CSV for `id`.
///
/// Each row draws a latent score `s` from a two-component mixture centred at
/// -1 and +1. Feature columns encode `loading * s` plus per-cell jitter; the
/// target encodes `s`, or `-s` on a random `noise` fraction of rows. With
/// `noise == 0` the label is a deterministic linear function of the latent
/// score the features carry.
pub fn make_fixture(id: DatasetId, spec: &FixtureSpec, rng: &mut Rng) -> Result<String> {
    if spec.rows < 10 {
        return Err(Error::Param(format!(
            "fixtures need at least 10 rows, got {}",
            spec.rows
        )));
    }
    if !(0.0..=0.5).contains(&spec.noise) {
        return Err(Error::Param(format!(
            "noise must be in [0, 0.5], got {}",
            spec.noise
        )));
    }
    let columns = schema(id);
    let gens = generators(id);
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Ingestion(format!("writing fixture: {e}"));
    writer
        .write_record(columns.iter().map(|c| c.name.as_str()))
        .map_err(csv_err)?;

    // Alternate the mixture component so both classes are always present.
    let mut components: Vec<f64> = (0..spec.rows)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    rng.shuffle(&mut components);
    let n_flip = (spec.noise * spec.rows as f64).round() as usize;
    let mut flipped: Vec<bool> = (0..spec.rows).map(|i| i < n_flip).collect();
    rng.shuffle(&mut flipped);

    for (sign, flip) in components.into_iter().zip(flipped) {
        let latent = sign * (1.0 + 0.4 * rng.standard_normal());
        let noisy = if flip { -latent } else { latent };
        let mut record = Vec::with_capacity(columns.len());
        for (column, gen) in columns.iter().zip(&gens) {
            // targets and excluded quality scores follow the noisy score
            let v = if column.role != ColumnRole::Feature {
                gen.loading * noisy
            } else {
                gen.loading * latent + 0.3 * rng.standard_normal()
            };
            record.push(render(&gen.render, v, column.kind, rng));
        }
        writer.write_record(&record).map_err(csv_err)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Ingestion(format!("writing fixture: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Ingestion(e.to_string()))
}

fn render(r: &Render, v: f64, kind: ColumnKind, rng: &mut Rng) -> String {
    match *r {
        Render::Number {
            center,
            scale,
            decimals,
            lo,
            hi,
        } => {
            let p = 10f64.powi(decimals);
            let x = ((center + scale * v) * p).round() / p;
            let x = x.clamp(lo, hi);
            if kind == ColumnKind::Percent {
                format!("{x}%")
            } else {
                format!("{x}")
            }
        }
        Render::YesNo => if v > 0.0 { "Yes" } else { "No" }.to_string(),
        Render::Rating => format!("{}", (3.0 + v).round().clamp(1.0, 5.0)),
        Render::Mood => match v {
            v if v > 0.5 => ":)",
            v if v < -0.5 => ":(",
            _ => ":|",
        }
        .to_string(),
        Render::Clock {
            center,
            scale,
            lo,
            hi,
        } => {
            let minutes = (center + scale * v).round().clamp(lo, hi) as u32;
            format!("{}:{:02}", minutes / 60, minutes % 60)
        }
        Render::Notes => NOTES[(rng.next_u64() % NOTES.len() as u64) as usize].to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_examples() {
        assert_eq!(encode_cell("Yes", ColumnKind::YesNo), Ok(1.0));
        assert_eq!(encode_cell(" no ", ColumnKind::YesNo), Ok(0.0));
        assert_eq!(encode_cell("7:23", ColumnKind::ClockTime), Ok(443.0));
        assert_eq!(encode_cell("72%", ColumnKind::Percent), Ok(72.0));
        assert_eq!(encode_cell("4", ColumnKind::Ordinal1To5), Ok(4.0));
        assert_eq!(encode_cell(":)", ColumnKind::Ordinal1To5), Ok(5.0));
        assert_eq!(encode_cell("-3.5", ColumnKind::Numeric), Ok(-3.5));
        assert_eq!(
            encode_cell("2014-12-29 22:57:30", ColumnKind::ClockTime),
            Ok(22.0 * 60.0 + 57.5)
        );
    }

    #[test]
    fn encode_rejects_out_of_grammar() {
        for (raw, kind) in [
            ("maybe", ColumnKind::YesNo),
            ("72", ColumnKind::Percent),
            ("abc%", ColumnKind::Percent),
            ("7:3", ColumnKind::ClockTime),
            ("7:60", ColumnKind::ClockTime),
            ("723", ColumnKind::ClockTime),
            ("6", ColumnKind::Ordinal1To5),
            ("2.5", ColumnKind::Ordinal1To5),
            ("inf", ColumnKind::Numeric),
            ("NaN", ColumnKind::Numeric),
            ("1,5", ColumnKind::Numeric),
            ("", ColumnKind::Numeric),
            ("x", ColumnKind::Ignored),
        ] {
            assert!(encode_cell(raw, kind).is_err(), "{raw:?} as {kind:?}");
        }
    }

    #[test]
    fn derive_label_examples() {
        assert_eq!(
            derive_label(&[0.0, 1.0, 1.0], ColumnKind::YesNo).unwrap(),
            vec![0, 1, 1]
        );
        assert_eq!(
            derive_label(&[60.0, 70.0, 80.0, 90.0], ColumnKind::Percent).unwrap(),
            vec![0, 0, 1, 1]
        );
        assert!(matches!(
            derive_label(&[5.0, 5.0, 5.0], ColumnKind::Numeric),
            Err(Error::SingleClass(_))
        ));
        assert!(matches!(
            derive_label(&[1.0, 1.0], ColumnKind::YesNo),
            Err(Error::SingleClass(_))
        ));
        assert!(derive_label(&[1.0], ColumnKind::YesNo).is_err());
    }

    #[test]
    fn derive_label_counts_values_above_median() {
        let mut rng = Rng::new(5);
        for _ in 0..50 {
            let v: Vec<f64> = (0..21).map(|_| (rng.next_f64() * 5.0).floor()).collect();
            let m = median(&v);
            match derive_label(&v, ColumnKind::Numeric) {
                Ok(labels) => {
                    let ones = labels.iter().filter(|&&l| l == 1).count();
                    assert_eq!(ones, v.iter().filter(|&&x| x > m).count());
                }
                Err(Error::SingleClass(_)) => assert!(v.iter().all(|&x| x <= m)),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn hand_encoded_rows() {
        let text = "\
Enough,Hours,PhoneReach,PhoneTime,Tired,Breakfast
Yes,8,Yes,No,2,Yes
No,5,Yes,Yes,5,No
Yes,9,No,No,1,Yes
No,6,No,Yes,4,No
";
        let ds = parse_csv(text, DatasetId::SleepStudy).unwrap();
        assert_eq!(ds.labels, vec![1, 0, 1, 0]);
        let expected = [
            [8.0, 1.0, 0.0, 2.0, 1.0],
            [5.0, 1.0, 1.0, 5.0, 0.0],
            [9.0, 0.0, 0.0, 1.0, 1.0],
            [6.0, 0.0, 1.0, 4.0, 0.0],
        ];
        assert_eq!(ds.features.data(), expected.concat().as_slice());
        assert_eq!(
            ds.feature_names(),
            ["Hours", "PhoneReach", "PhoneTime", "Tired", "Breakfast"]
        );
    }

    #[test]
    fn header_is_case_insensitive_and_extra_columns_ignored() {
        let text = " enough ,ID,HOURS,phonereach,PhoneTime,Tired,Breakfast\n\
                    Yes,1,8,Yes,No,2,Yes\nNo,2,5,Yes,Yes,5,No\n";
        let ds = parse_csv(text, DatasetId::SleepStudy).unwrap();
        assert_eq!((ds.n(), ds.d()), (2, 5));
    }

    #[test]
    fn load_errors() {
        let missing = "Enough,Hours,PhoneReach,PhoneTime,Tired\nYes,8,Yes,No,2\n";
        let err = parse_csv(missing, DatasetId::SleepStudy).unwrap_err();
        assert!(
            matches!(&err, Error::Schema(m) if m.contains("Breakfast")),
            "{err}"
        );

        let bad = "Enough,Hours,PhoneReach,PhoneTime,Tired,Breakfast\n\
                   Yes,8,Yes,No,2,Yes\nNo,5,Yes,sometimes,5,No\n";
        match parse_csv(bad, DatasetId::SleepStudy).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "PhoneTime");
            }
            e => panic!("unexpected {e}"),
        }

        assert!(matches!(
            parse_csv("", DatasetId::SleepStudy),
            Err(Error::Ingestion(_))
        ));
        let header_only = "Enough,Hours,PhoneReach,PhoneTime,Tired,Breakfast\n";
        assert!(matches!(
            parse_csv(header_only, DatasetId::SleepStudy),
            Err(Error::Ingestion(_))
        ));

        let one_class = "Enough,Hours,PhoneReach,PhoneTime,Tired,Breakfast\n\
                         Yes,8,Yes,No,2,Yes\nyes,5,Yes,No,5,No\nYES,7,No,No,3,No\n";
        assert!(matches!(
            parse_csv(one_class, DatasetId::SleepStudy),
            Err(Error::SingleClass(_))
        ));

        let blank = "Enough,Hours,PhoneReach,PhoneTime,Tired,Breakfast\n\
                     Yes,,Yes,No,2,Yes\nNo,5,Yes,No,5,No\n";
        assert!(matches!(
            parse_csv(blank, DatasetId::SleepStudy),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn quoted_fields_are_accepted() {
        let text =
            "Start,End,Sleep quality,Time in bed,Wake up,Sleep Notes,Heart rate,Activity (steps)\n\
                    22:57,7:10,80%,8:13,:),\"Drank coffee, Worked out\",59,7000\n\
                    23:30,6:10,55%,6:40,:(,,65,3000\n";
        let ds = parse_csv(text, DatasetId::SleepCycle).unwrap();
        assert_eq!(ds.labels, vec![1, 0]);
        assert_eq!(
            ds.features.row(0),
            &[1377.0, 430.0, 493.0, 5.0, 59.0, 7000.0]
        );
    }

    #[test]
    fn schemas_are_well_formed() {
        for (id, d) in [
            (DatasetId::SleepStudy, 5),
            (DatasetId::SleepDeprivation, 7),
            (DatasetId::SleepCycle, 6),
        ] {
            let s = schema(id);
            assert_eq!(s.iter().filter(|c| c.role == ColumnRole::Target).count(), 1);
            assert_eq!(
                s.iter().filter(|c| c.role == ColumnRole::Feature).count(),
                d
            );
            assert!(s
                .iter()
                .all(|c| c.kind != ColumnKind::Ignored || c.role == ColumnRole::Excluded));
            assert_eq!(generators(id).len(), s.len());
        }
    }

    #[test]
    fn fixtures_round_trip_and_are_deterministic() {
        for id in DatasetId::ALL {
            let spec = FixtureSpec::original(id, MODERATE_NOISE);
            let a = make_fixture(id, &spec, &mut Rng::new(7)).unwrap();
            let b = make_fixture(id, &spec, &mut Rng::new(7)).unwrap();
            assert_eq!(a, b);
            let ds = parse_csv(&a, id).unwrap();
            assert_eq!(ds.n(), id.original_rows());
        }
        let study = make_fixture(
            DatasetId::SleepStudy,
            &FixtureSpec {
                rows: 104,
                noise: 0.0,
            },
            &mut Rng::new(7),
        )
        .unwrap();
        let ds = parse_csv(&study, DatasetId::SleepStudy).unwrap();
        assert_eq!((ds.n(), ds.d()), (104, 5));
    }

    #[test]
    fn sleep_cycle_fixture_is_balanced() {
        for seed in 0..20 {
            let text = make_fixture(
                DatasetId::SleepCycle,
                &FixtureSpec::original(DatasetId::SleepCycle, MODERATE_NOISE),
                &mut Rng::new(seed),
            )
            .unwrap();
            let ds = parse_csv(&text, DatasetId::SleepCycle).unwrap();
            let frac = ds.labels.iter().filter(|&&l| l == 1).count() as f64 / ds.n() as f64;
            assert!((0.3..=0.7).contains(&frac), "seed {seed}: {frac}");
        }
    }

    #[test]
    fn fixture_parameter_errors() {
        let mut rng = Rng::new(0);
        let spec = FixtureSpec {
            rows: 9,
            noise: 0.0,
        };
        assert!(matches!(
            make_fixture(DatasetId::SleepStudy, &spec, &mut rng),
            Err(Error::Param(_))
        ));
        assert!(matches!(
            "sleep_apnea".parse::<DatasetId>(),
            Err(Error::Param(_))
        ));
        assert_eq!(
            "Sleep_Cycle".parse::<DatasetId>().unwrap(),
            DatasetId::SleepCycle
        );
    }
}
