//! Gaussian sufficient statistics.
//!
//! A cluster is summarized by `(n, Σx, Σxxᵀ)`. The mean `T` and the centered
//! scatter `S = Σ(x − T)(x − T)ᵀ` are derived on demand. Keeping raw sums
//! makes point removal an exact subtraction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    n: usize,
    sum: DVector<f64>,
    sum_outer: DMatrix<f64>,
}

impl SufficientStats {
    pub fn zero(dim: usize) -> Self {
        Self {
            n: 0,
            sum: DVector::zeros(dim),
            sum_outer: DMatrix::zeros(dim, dim),
        }
    }

    /// Statistics of a non-empty set of points sharing one dimension.
    pub fn from_points<'a, I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut points = points.into_iter();
        let first = points.next().ok_or(Error::EmptyCluster)?;
        let mut stats = Self::zero(first.len());
        stats.add_point(first)?;
        for x in points {
            stats.add_point(x)?;
        }
        Ok(stats)
    }

    /// Field-wise sum of one or more statistics.
    pub fn merge_all<'a, I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a SufficientStats>,
    {
        let mut parts = parts.into_iter();
        let mut total = parts.next().ok_or(Error::EmptyCluster)?.clone();
        for part in parts {
            total.merge(part)?;
        }
        Ok(total)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn sum(&self) -> &DVector<f64> {
        &self.sum
    }

    pub fn sum_outer(&self) -> &DMatrix<f64> {
        &self.sum_outer
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }

    pub fn add_point(&mut self, x: &[f64]) -> Result<()> {
        self.check_dim(x.len())?;
        self.n += 1;
        self.accumulate(x, 1.0);
        Ok(())
    }

    /// Removes a previously added point. Removing the last point resets the
    /// sums to exact zeros.
    pub fn remove_point(&mut self, x: &[f64]) -> Result<()> {
        self.check_dim(x.len())?;
        if self.n == 0 {
            return Err(Error::RemoveFromEmpty);
        }
        self.n -= 1;
        if self.n == 0 {
            self.clear();
        } else {
            self.accumulate(x, -1.0);
        }
        Ok(())
    }

    #[inline]
    fn accumulate(&mut self, x: &[f64], sign: f64) {
        let d = x.len();
        for (s, &xi) in self.sum.iter_mut().zip(x) {
            *s += sign * xi;
        }
        let outer = self.sum_outer.as_mut_slice();
        for j in 0..d {
            let xj = sign * x[j];
            for i in 0..d {
                outer[j * d + i] += x[i] * xj;
            }
        }
    }

    fn clear(&mut self) {
        self.sum.fill(0.0);
        self.sum_outer.fill(0.0);
    }

    pub fn merge(&mut self, other: &SufficientStats) -> Result<()> {
        self.check_dim(other.dim())?;
        self.n += other.n;
        self.sum += &other.sum;
        self.sum_outer += &other.sum_outer;
        Ok(())
    }

    /// Inverse of [`merge`](Self::merge); `other` must be a sub-collection.
    pub fn subtract(&mut self, other: &SufficientStats) -> Result<()> {
        self.check_dim(other.dim())?;
        if other.n > self.n {
            return Err(Error::RemoveFromEmpty);
        }
        self.n -= other.n;
        if self.n == 0 {
            self.clear();
        } else {
            self.sum -= &other.sum;
            self.sum_outer -= &other.sum_outer;
        }
        Ok(())
    }

    /// Cluster mean `T`, or `None` for empty statistics.
    pub fn mean(&self) -> Option<DVector<f64>> {
        (self.n > 0).then(|| &self.sum / self.n as f64)
    }

    /// Centered scatter `S = Σxxᵀ − n·T·Tᵀ`; zero for empty statistics.
    pub fn scatter(&self) -> DMatrix<f64> {
        match self.mean() {
            None => DMatrix::zeros(self.dim(), self.dim()),
            Some(mean) => {
                let mut s = self.sum_outer.clone();
                add_outer(&mut s, mean.as_slice(), -(self.n as f64));
                s
            }
        }
    }
}

/// `m += c · v vᵀ`, evaluated so that the result stays exactly symmetric.
pub(crate) fn add_outer(m: &mut DMatrix<f64>, v: &[f64], c: f64) {
    let d = v.len();
    let data = m.as_mut_slice();
    for j in 0..d {
        for i in 0..d {
            data[j * d + i] += c * (v[i] * v[j]);
        }
    }
}
