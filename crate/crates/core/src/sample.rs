use crate::error::{Error, Result};

/// A finite set of `d`-dimensional points stored row-major.
///
/// Represents the empirical measure `(1/n) Σ δ_{x_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    /// Builds a set from a flat row-major buffer. `data.len()` must be a
    /// multiple of `dim`.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("sample dimension must be at least 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::input(format!(
                "buffer of length {} is not a whole number of {dim}-dimensional points",
                data.len()
            )));
        }
        Ok(SampleSet { dim, data })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::input("cannot infer dimension of an empty point list"))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::input(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            data.extend_from_slice(p);
        }
        Self::from_flat(dim, data)
    }

    /// An empty set of the given dimension.
    pub fn empty(dim: usize) -> Result<Self> {
        Self::from_flat(dim, Vec::new())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Gathers the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        SampleSet {
            dim: self.dim,
            data,
        }
    }

    /// Per-coordinate arithmetic mean, summed in index order.
    pub fn mean(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::input("mean of an empty sample set"));
        }
        let mut acc = vec![0.0; self.dim];
        for p in self.points() {
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        Ok(acc.into_iter().map(|s| s / n).collect())
    }

    /// Per-coordinate standard deviation with the unbiased `n - 1` divisor.
    /// A single point has SD 0.
    pub fn std_dev(&self) -> Result<Vec<f64>> {
        let mean = self.mean()?;
        let n = self.len();
        if n < 2 {
            return Ok(vec![0.0; self.dim]);
        }
        let mut acc = vec![0.0; self.dim];
        for p in self.points() {
            for ((a, v), m) in acc.iter_mut().zip(p).zip(&mean) {
                let dev = v - m;
                *a += dev * dev;
            }
        }
        Ok(acc.into_iter().map(|s| (s / (n - 1) as f64).sqrt()).collect())
    }

    pub(crate) fn check_same_dim(&self, other: &SampleSet) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::input(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_point_dims(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::input("points must have dimension at least 1"));
    }
    Ok(())
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_buffer_rejected() {
        assert!(SampleSet::from_flat(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(SampleSet::from_points(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn moments() {
        let s = SampleSet::from_points(&[[1.0, 0.0], [3.0, 0.0]]).unwrap();
        assert_eq!(s.mean().unwrap(), vec![2.0, 0.0]);
        assert_eq!(s.std_dev().unwrap(), vec![2f64.sqrt(), 0.0]);
    }
}
