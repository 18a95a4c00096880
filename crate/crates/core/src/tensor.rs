//! Dense row-major `f64` arrays of rank 1 to 3 and the seeded generator used
//! throughout the crate.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense array with 1, 2 or 3 axes stored row-major.
///
/// Element `(i, j)` of an `[r, c]` array lives at `data[i * c + j]`, and
/// element `(b, ch, t)` of a `[n, c, l]` array at `data[(b * c + ch) * l + t]`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArray", into = "RawArray")]
pub struct NumArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<RawArray> for NumArray {
    type Error = Error;

    fn try_from(raw: RawArray) -> Result<Self> {
        NumArray::new(raw.shape, raw.data)
    }
}

impl From<NumArray> for RawArray {
    fn from(a: NumArray) -> Self {
        RawArray {
            shape: a.shape,
            data: a.data,
        }
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > 3 {
        return Err(Error::Shape(format!(
            "rank must be 1..=3, got shape {shape:?}"
        )));
    }
    if shape.contains(&0) {
        return Err(Error::Shape(format!(
            "every extent must be >= 1, got shape {shape:?}"
        )));
    }
    Ok(())
}

impl NumArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape)?;
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(NumArray { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Result<Self> {
        check_shape(shape)?;
        let len = shape.iter().product();
        Ok(NumArray {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    /// Builds an `[rows.len(), d]` matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Shape(format!(
                "row {bad} has {} columns, expected {d}",
                rows[bad].len()
            )));
        }
        Self::new(vec![n, d], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn flat_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() {
            return Err(Error::Shape(format!(
                "index {index:?} has rank {}, array has shape {:?}",
                index.len(),
                self.shape
            )));
        }
        let mut flat = 0;
        for (&i, &extent) in index.iter().zip(&self.shape) {
            if i >= extent {
                return Err(Error::Shape(format!(
                    "index {index:?} out of bounds for shape {:?}",
                    self.shape
                )));
            }
            flat = flat * extent + i;
        }
        Ok(flat)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.flat_index(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let i = self.flat_index(index)?;
        self.data[i] = value;
        Ok(())
    }

    /// Number of rows of a rank-2 array (first extent otherwise).
    pub fn nrows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a rank-2 array; 1 for rank-1.
    pub fn ncols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1]
        } else {
            1
        }
    }

    /// Row `i` of a rank-2 array.
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.ncols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.ncols())
    }

    /// Gathers the given rows of a rank-2 array into a new array.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        self.expect_rank(2, "select_rows")?;
        if indices.is_empty() {
            return Err(Error::Shape("cannot select zero rows".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.ncols());
        for &i in indices {
            if i >= self.nrows() {
                return Err(Error::Shape(format!(
                    "row {i} out of bounds for shape {:?}",
                    self.shape
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(vec![indices.len(), self.ncols()], data)
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub(crate) fn expect_rank(&self, rank: usize, what: &str) -> Result<()> {
        if self.rank() != rank {
            return Err(Error::Shape(format!(
                "{what} expects a rank-{rank} array, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Result<Self> {
        self.expect_rank(2, "transpose")?;
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Self::new(vec![c, r], out)
    }

    /// Matrix product of two rank-2 arrays.
    pub fn matmul(&self, other: &NumArray) -> Result<NumArray> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::Shape(format!(
                "cannot multiply {:?} by {:?}",
                self.shape, other.shape
            )));
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        NumArray::new(vec![m, n], out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> NumArray {
        NumArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl fmt::Debug for NumArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumArray")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

/// Seeded deterministic generator.
///
/// ChaCha with 8 rounds, keyed by `rand_core`'s `seed_from_u64` expansion of a
/// 64-bit seed. Independent streams for the same seed are selected with the
/// ChaCha stream counter, so `Rng::with_stream(s, k)` for distinct `k` never
/// overlap. Uniform doubles take the top 53 bits of `next_u64` scaled by
/// 2^-53. The output is identical on every platform.
#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
    seed: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            inner: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    /// Seed this generator was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { inner, seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let x = lo + (hi - lo) * self.next_f64();
        // lo + (hi - lo) * u can round up to hi
        if x >= hi {
            hi.next_down()
        } else {
            x
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        rand_distr::StandardNormal.sample(&mut self.inner)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// Array of the given shape with elements drawn uniformly from `[lo, hi)`.
pub fn rand_uniform(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Result<NumArray> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Param(format!(
            "uniform range requires finite lo < hi, got [{lo}, {hi})"
        )));
    }
    check_shape(shape)?;
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.uniform(lo, hi)).collect();
    NumArray::new(shape.to_vec(), data)
}

/// Matrix product; free-function form of [`NumArray::matmul`].
pub fn matmul(a: &NumArray, b: &NumArray) -> Result<NumArray> {
    a.matmul(b)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::Rng;
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> NumArray {
        NumArray::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn triple_loop(a: &NumArray, b: &NumArray) -> Vec<f64> {
        let (r, k, c) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                let mut s = 0.0;
                for p in 0..k {
                    s += a.get(&[i, p]).unwrap() * b.get(&[p, j]).unwrap();
                }
                out[i * c + j] = s;
            }
        }
        out
    }

    #[test]
    fn matmul_identity() {
        let id = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = m(&[&[5.0, 6.0], &[7.0, 8.0]]);
        assert_eq!(id.matmul(&b).unwrap(), b);
    }

    #[test]
    fn matmul_row_by_column() {
        let a = m(&[&[1.0, 2.0]]);
        let b = m(&[&[3.0], &[4.0]]);
        let p = matmul(&a, &b).unwrap();
        assert_eq!(p.shape(), &[1, 1]);
        assert_eq!(p.data(), &[11.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = Rng::new(3);
        let a = rand_uniform(&mut rng, &[4, 3], -1.0, 1.0).unwrap();
        let b = rand_uniform(&mut rng, &[3, 2], -1.0, 1.0).unwrap();
        let p = a.matmul(&b).unwrap();
        for (x, y) in p.data().iter().zip(triple_loop(&a, &b)) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = NumArray::zeros(&[2, 3]).unwrap();
        let b = NumArray::zeros(&[2, 3]).unwrap();
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(
            msg.contains("[2, 3]") && msg.matches("[2, 3]").count() == 2,
            "{msg}"
        );
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(NumArray::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(NumArray::zeros(&[1, 1, 1, 1]).is_err());
        assert!(NumArray::zeros(&[2, 0]).is_err());
        assert!(NumArray::zeros(&[]).is_err());
    }

    #[test]
    fn rand_uniform_is_deterministic() {
        let a = rand_uniform(&mut Rng::new(42), &[5, 4], 0.0, 1.0).unwrap();
        let b = rand_uniform(&mut Rng::new(42), &[5, 4], 0.0, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rand_uniform_range_and_mean() {
        let mut rng = Rng::new(1);
        let small = rand_uniform(&mut rng, &[2, 3], 0.0, 1.0).unwrap();
        assert_eq!(small.len(), 6);
        assert!(small.data().iter().all(|&x| (0.0..1.0).contains(&x)));

        let big = rand_uniform(&mut rng, &[10_000], 0.0, 1.0).unwrap();
        let mean = big.data().iter().sum::<f64>() / 10_000.0;
        assert!((mean - 0.5).abs() <= 0.02, "mean {mean}");
    }

    #[test]
    fn rand_uniform_rejects_empty_range() {
        let mut rng = Rng::new(0);
        assert!(matches!(
            rand_uniform(&mut rng, &[3], 1.0, 1.0),
            Err(Error::Param(_))
        ));
        assert!(rand_uniform(&mut rng, &[3], 2.0, 1.0).is_err());
    }

    #[test]
    fn streams_differ() {
        let a = Rng::with_stream(9, 0).next_u64();
        let b = Rng::with_stream(9, 1).next_u64();
        assert_ne!(a, b);
        assert_eq!(Rng::with_stream(9, 0).next_u64(), Rng::new(9).next_u64());
    }

    #[test]
    fn matmul_associative() {
        let mut rng = Rng::new(11);
        let a = rand_uniform(&mut rng, &[3, 4], -1.0, 1.0).unwrap();
        let b = rand_uniform(&mut rng, &[4, 2], -1.0, 1.0).unwrap();
        let c = rand_uniform(&mut rng, &[2, 5], -1.0, 1.0).unwrap();
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        for (x, y) in left.data().iter().zip(right.data()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    proptest! {
        #[test]
        fn get_set_round_trip(r in 1usize..5, c in 1usize..5, l in 1usize..4) {
            let mut a = NumArray::zeros(&[r, c, l]).unwrap();
            for i in 0..r { for j in 0..c { for t in 0..l {
                a.set(&[i, j, t], (i * 100 + j * 10 + t) as f64).unwrap();
            }}}
            for i in 0..r { for j in 0..c { for t in 0..l {
                prop_assert_eq!(a.get(&[i, j, t]).unwrap(), (i * 100 + j * 10 + t) as f64);
                prop_assert_eq!(a.data()[(i * c + j) * l + t], (i * 100 + j * 10 + t) as f64);
            }}}
            let mut b = NumArray::zeros(&[r, c]).unwrap();
            b.set(&[r - 1, c - 1], 7.0).unwrap();
            prop_assert_eq!(b.data()[(r - 1) * c + c - 1], 7.0);
        }
    }
}
