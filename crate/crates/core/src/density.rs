//! Gaussian kernel density estimates over batch distance matrices.

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

/// 1/√(2π), the Gaussian kernel normalization and the largest possible density.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn kernel(distance: f64, bandwidth: f64) -> f64 {
    (-(distance * distance) / (2.0 * bandwidth * bandwidth)).exp()
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::NonPositiveBandwidth(h));
    }
    Ok(())
}

/// Density at every batch, including the batch's own kernel term.
pub fn kde(distances: &DistanceMatrix, h: f64) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    let n = distances.dimension();
    let norm = INV_SQRT_2PI / n as f64;
    Ok((0..n)
        .map(|i| norm * distances.row(i).iter().map(|&d| kernel(d, h)).sum::<f64>())
        .collect())
}

/// Density of a reference set evaluated at outside points.
///
/// `cross[i][j]` is the distance from point `i` to reference member `j`.
/// An empty reference set has density zero everywhere.
pub fn cross_kde(cross: &[Vec<f64>], reference_len: usize, h: f64) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    if reference_len == 0 {
        return Ok(vec![0.0; cross.len()]);
    }
    let norm = INV_SQRT_2PI / reference_len as f64;
    cross
        .iter()
        .map(|row| {
            if row.len() != reference_len {
                return Err(Error::LengthMismatch {
                    expected: reference_len,
                    actual: row.len(),
                });
            }
            Ok(norm * row.iter().map(|&d| kernel(d, h)).sum::<f64>())
        })
        .collect()
}

pub fn aggregate_min(rho_pred: &[f64], rho_out: &[f64]) -> Result<Vec<f64>> {
    if rho_pred.len() != rho_out.len() {
        return Err(Error::LengthMismatch {
            expected: rho_pred.len(),
            actual: rho_out.len(),
        });
    }
    Ok(rho_pred.iter().zip(rho_out).map(|(a, b)| a.min(*b)).collect())
}

/// Densities in one distance space, indexed by live position.
#[derive(Clone, Debug)]
struct SpaceDensity {
    matrix: DistanceMatrix,
    rho: Vec<f64>,
}

/// Per-space densities of a shrinking batch set, updated exactly on removal.
///
/// The distance matrices are never compacted; `live` maps positions in the
/// current batch list to their original matrix rows.
#[derive(Clone, Debug)]
pub struct DensityState {
    spaces: Vec<SpaceDensity>,
    rho_min: Vec<f64>,
    live: Vec<usize>,
    bandwidth: f64,
}

impl DensityState {
    /// One matrix per space; all must share a dimension.
    pub fn new(matrices: Vec<DistanceMatrix>, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        let first = matrices.first().ok_or(Error::EmptyInput)?;
        let n = first.dimension();
        let mut spaces = Vec::with_capacity(matrices.len());
        for matrix in matrices {
            if matrix.dimension() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: matrix.dimension(),
                });
            }
            let rho = kde(&matrix, bandwidth)?;
            spaces.push(SpaceDensity { matrix, rho });
        }
        let mut state = Self {
            spaces,
            rho_min: Vec::new(),
            live: (0..n).collect(),
            bandwidth,
        };
        state.recompute_min();
        Ok(state)
    }

    fn recompute_min(&mut self) {
        let n = self.live.len();
        self.rho_min = (0..n)
            .map(|i| {
                self.spaces
                    .iter()
                    .map(|s| s.rho[i])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
    }

    pub fn count(&self) -> usize {
        self.live.len()
    }

    pub fn rho_min(&self) -> &[f64] {
        &self.rho_min
    }

    /// Densities in the `space`-th distance space.
    pub fn rho(&self, space: usize) -> &[f64] {
        &self.spaces[space].rho
    }

    /// Original matrix rows of the live batches, in order.
    pub fn live(&self) -> &[usize] {
        &self.live
    }

    /// Removes the batch at position `j` and renormalizes the survivors:
    /// ρ'(b) = (n·ρ(b) − k(d(b, j))/√(2π)) / (n − 1).
    pub fn remove_batch(&mut self, j: usize) -> Result<()> {
        let n = self.live.len();
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        if n < 2 {
            return Err(Error::LastBatch);
        }
        let removed = self.live[j];
        let count = n as f64;
        let h = self.bandwidth;
        for space in &mut self.spaces {
            let row = space.matrix.row(removed);
            for (pos, &orig) in self.live.iter().enumerate() {
                let rho = &mut space.rho[pos];
                *rho = (count * *rho - INV_SQRT_2PI * kernel(row[orig], h)) / (count - 1.0);
            }
            space.rho.remove(j);
        }
        self.live.remove(j);
        self.rho_min.remove(j);
        for (pos, m) in self.rho_min.iter_mut().enumerate() {
            *m = self
                .spaces
                .iter()
                .map(|s| s.rho[pos])
                .fold(f64::INFINITY, f64::min);
        }
        Ok(())
    }
}
