//! Information distances between categorical distributions.
//!
//! All logarithms are base 2, so the Jensen-Shannon distance lies in `[0, 1]`.
//! Terms with zero probability contribute nothing.

use crate::error::{Error, Result};
use crate::sample::{Batch, CategoricalDistribution};

/// Which batch summary a distance is computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Prediction,
    Output,
}

impl Space {
    pub fn dist(self, batch: &Batch) -> &CategoricalDistribution {
        match self {
            Space::Prediction => &batch.pred_dist,
            Space::Output => &batch.out_dist,
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

/// KL divergence in bits.
pub fn kl_divergence(p: &CategoricalDistribution, m: &CategoricalDistribution) -> Result<f64> {
    check_lengths(p.len(), m.len())?;
    let mut total = 0.0;
    for (bin, (&pi, &mi)) in p.probs().iter().zip(m.probs()).enumerate() {
        if pi > 0.0 {
            if mi <= 0.0 {
                return Err(Error::UndefinedDivergence { bin });
            }
            total += pi * (pi / mi).log2();
        }
    }
    Ok(total)
}

/// Jensen-Shannon distance. Bitwise symmetric in its arguments.
pub fn jsd(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<f64> {
    check_lengths(p.len(), q.len())?;
    Ok(jsd_slices(p.probs(), q.probs()))
}

pub(crate) fn jsd_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = 0.5 * (pi + qi);
        if pi > 0.0 {
            kl_p += pi * (pi / mi).log2();
        }
        if qi > 0.0 {
            kl_q += qi * (qi / mi).log2();
        }
    }
    (0.5 * (kl_p + kl_q)).clamp(0.0, 1.0).sqrt()
}

/// L2 distance between two batch-mean feature vectors.
pub fn euclidean_mean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Dense symmetric matrix of pairwise batch distances with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Evaluates `f` once per unordered pair `i < j` and mirrors it.
    pub fn from_pairs<F>(n: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j)?;
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Ok(Self { n, values })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Restriction to the given rows and columns, in the given order.
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let n = keep.len();
        let mut values = Vec::with_capacity(n * n);
        for &i in keep {
            values.extend(keep.iter().map(|&j| self.get(i, j)));
        }
        Self { n, values }
    }
}

/// Pairwise Jensen-Shannon distances of the batches in one space.
pub fn distance_matrix(batches: &[Batch], space: Space) -> Result<DistanceMatrix> {
    if let Some(first) = batches.first() {
        let k = space.dist(first).len();
        for b in batches {
            check_lengths(k, space.dist(b).len())?;
        }
    }
    DistanceMatrix::from_pairs(batches.len(), |i, j| {
        Ok(jsd_slices(
            space.dist(&batches[i]).probs(),
            space.dist(&batches[j]).probs(),
        ))
    })
}

/// Pairwise Euclidean distances of batch-mean features.
pub fn euclidean_matrix(batches: &[Batch]) -> Result<DistanceMatrix> {
    DistanceMatrix::from_pairs(batches.len(), |i, j| {
        euclidean_mean_distance(&batches[i].mean_features, &batches[j].mean_features)
    })
}
