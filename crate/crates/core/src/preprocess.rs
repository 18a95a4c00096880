//! 50-50 train/test split and per-feature normalization fitted on the
//! training half only.

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::tensor::{NumArray, Rng};
use crate::{Error, Result};

/// Maximum number of permutations tried before giving up on a split whose
/// halves both contain two classes.
pub const MAX_SPLIT_DRAWS: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    /// `(x - mean) / std`, population standard deviation.
    #[default]
    ZScore,
    /// `(x - min) / (max - min)`.
    MinMax,
}

/// Per-column statistics of the training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub method: NormMethod,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    /// Columns that carry no spread under the chosen method; they normalize
    /// to all zeros.
    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.is_constant(j)).collect()
    }

    fn is_constant(&self, j: usize) -> bool {
        match self.method {
            NormMethod::ZScore => self.stds[j] == 0.0,
            NormMethod::MinMax => self.maxs[j] == self.mins[j],
        }
    }
}

/// Z-score statistics of a rank-2 feature matrix.
pub fn fit_normalizer(train_features: &NumArray) -> Result<NormStats> {
    fit_normalizer_with(train_features, NormMethod::ZScore)
}

pub fn fit_normalizer_with(train_features: &NumArray, method: NormMethod) -> Result<NormStats> {
    train_features.expect_rank(2, "fit_normalizer")?;
    let (n, d) = (train_features.nrows(), train_features.ncols());
    if n < 2 {
        return Err(Error::Shape(format!(
            "normalization needs at least 2 rows, got {n}"
        )));
    }
    let mut sums = vec![0.0; d];
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for row in train_features.rows() {
        for (j, &x) in row.iter().enumerate() {
            sums[j] += x;
            mins[j] = mins[j].min(x);
            maxs[j] = maxs[j].max(x);
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let mut sq = vec![0.0; d];
    for row in train_features.rows() {
        for (j, &x) in row.iter().enumerate() {
            sq[j] += (x - means[j]).powi(2);
        }
    }
    let stds = sq
        .iter()
        .zip(&mins)
        .zip(&maxs)
        .map(|((s, lo), hi)| if lo == hi { 0.0 } else { (s / n as f64).sqrt() })
        .collect();
    Ok(NormStats {
        method,
        means,
        stds,
        mins,
        maxs,
    })
}

pub fn apply_normalizer(features: &NumArray, stats: &NormStats) -> Result<NumArray> {
    features.expect_rank(2, "apply_normalizer")?;
    if features.ncols() != stats.dim() {
        return Err(Error::Shape(format!(
            "features have {} columns, normalizer was fitted on {}",
            features.ncols(),
            stats.dim()
        )));
    }
    let d = stats.dim();
    let mut out = features.clone();
    for (i, x) in out.data_mut().iter_mut().enumerate() {
        let j = i % d;
        *x = if stats.is_constant(j) {
            0.0
        } else {
            match stats.method {
                NormMethod::ZScore => (*x - stats.means[j]) / stats.stds[j],
                NormMethod::MinMax => (*x - stats.mins[j]) / (stats.maxs[j] - stats.mins[j]),
            }
        };
    }
    Ok(out)
}

/// Train and test halves of one dataset.
///
/// `stats` is `None` until [`TrainTestSplit::normalized`] fits it on the
/// training rows.
#[derive(Clone, Debug)]
pub struct TrainTestSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub stats: Option<NormStats>,
    pub seed: u64,
}

impl TrainTestSplit {
    /// Fits the normalizer on the training half and applies it to both
    /// halves.
    pub fn normalized(mut self, method: NormMethod) -> Result<Self> {
        if self.stats.is_some() {
            return Err(Error::Contract("split is already normalized".into()));
        }
        let stats = fit_normalizer_with(&self.train.features, method)?;
        self.train.features = apply_normalizer(&self.train.features, &stats)?;
        self.test.features = apply_normalizer(&self.test.features, &stats)?;
        self.stats = Some(stats);
        Ok(self)
    }
}

fn has_both_classes(labels: &[u8], indices: &[usize]) -> bool {
    let ones = indices.iter().filter(|&&i| labels[i] == 1).count();
    ones > 0 && ones < indices.len()
}

/// Random 50-50 partition; the first `ceil(n / 2)` shuffled rows train.
///
/// Permutations that leave either half single-class are redrawn, up to
/// [`MAX_SPLIT_DRAWS`] attempts in total.
pub fn split_50_50(data: &Dataset, rng: &mut Rng) -> Result<TrainTestSplit> {
    let n = data.n();
    if n < 4 {
        return Err(Error::Degenerate(format!(
            "a 50-50 split needs at least 4 rows, got {n}"
        )));
    }
    let n_train = n.div_ceil(2);
    for _ in 0..MAX_SPLIT_DRAWS {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let (train_idx, test_idx) = order.split_at(n_train);
        if has_both_classes(&data.labels, train_idx) && has_both_classes(&data.labels, test_idx) {
            return Ok(TrainTestSplit {
                train: data.subset_unchecked(train_idx)?,
                test: data.subset_unchecked(test_idx)?,
                train_indices: train_idx.to_vec(),
                test_indices: test_idx.to_vec(),
                stats: None,
                seed: rng.seed(),
            });
        }
    }
    Err(Error::Degenerate(format!(
        "{}: no split with two classes in both halves after {MAX_SPLIT_DRAWS} draws",
        data.id
    )))
}
