//! Dynamic time warping over proprioceptive sequences and the trajectory
//! pair weights that drive temporally aligned sampling.

use std::collections::HashMap;

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{sq_euclid_unchecked, Matrix};
use crate::scalar::Scalar;
use crate::synth::Trajectory;

/// Optimal warping of two sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult<T> {
    pub distance: T,
    /// Monotone index pairs from `(0, 0)` to `(|X|−1, |Y|−1)`.
    pub path: Vec<(usize, usize)>,
}

fn check_sequences<T>(x: &[Vec<T>], y: &[Vec<T>]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("dtw sequence"));
    }
    let d = x[0].len();
    for v in x.iter().chain(y) {
        ensure_dim("dtw element", d, v.len())?;
    }
    Ok(())
}

/// Accumulated cost table `D(i,j) = ‖x_i − y_j‖ + min(D(i−1,j), D(i,j−1), D(i−1,j−1))`.
fn cost_table<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>]) -> Matrix<T> {
    let (n, m) = (x.len(), y.len());
    let mut acc = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let step = sq_euclid_unchecked(&x[i], &y[j]).sqrt();
            let prev = match (i, j) {
                (0, 0) => T::zero(),
                (0, _) => acc.get(0, j - 1),
                (_, 0) => acc.get(i - 1, 0),
                _ => acc
                    .get(i - 1, j - 1)
                    .min(acc.get(i - 1, j))
                    .min(acc.get(i, j - 1)),
            };
            acc.set(i, j, step + prev);
        }
    }
    acc
}

/// DTW with Euclidean step cost. The path is recovered by backtracking,
/// preferring the diagonal, then `(i−1, j)`, then `(i, j−1)` on ties.
pub fn dtw<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>]) -> Result<DtwResult<T>> {
    check_sequences(x, y)?;
    let acc = cost_table(x, y);
    let (mut i, mut j) = (x.len() - 1, y.len() - 1);
    let distance = acc.get(i, j);
    let mut path = vec![(i, j)];
    while (i, j) != (0, 0) {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc.get(i - 1, j - 1);
            let up = acc.get(i - 1, j);
            let left = acc.get(i, j - 1);
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwResult { distance, path })
}

/// DTW distance without path recovery.
pub fn dtw_distance<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>]) -> Result<T> {
    check_sequences(x, y)?;
    Ok(cost_table(x, y).get(x.len() - 1, y.len() - 1))
}

/// DTW distance divided by the longer sequence length.
pub fn normalized_dtw<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>]) -> Result<T> {
    Ok(dtw_distance(x, y)? / T::count(x.len().max(y.len())))
}

/// Logistic map from normalized DTW distance to sampling weight,
/// `1 / (1 + exp(10·(d − 0.01)))`.
pub fn weight_transform<T: Scalar>(d_bar: T) -> T {
    T::one() / (T::one() + (T::lit(10.0) * (d_bar - T::lit(0.01))).exp())
}

/// Paths are cached only for pairs at least this likely to be sampled.
pub const PATH_WEIGHT_FLOOR: f64 = 1e-6;

/// Source × target trajectory similarity table.
#[derive(Debug, Clone, PartialEq)]
pub struct PairWeights {
    pub weights: Matrix<f64>,
    pub norm_dists: Matrix<f64>,
    paths: HashMap<(usize, usize), Vec<(usize, usize)>>,
}

impl PairWeights {
    pub fn shape(&self) -> (usize, usize) {
        self.weights.shape()
    }

    /// Builds a table from raw weights without any cached paths.
    pub fn from_weights(weights: Matrix<f64>) -> Result<Self> {
        if weights.as_slice().iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "pair weights must be finite and nonnegative".into(),
            ));
        }
        let norm_dists = Matrix::zeros(weights.rows(), weights.cols());
        Ok(Self {
            weights,
            norm_dists,
            paths: HashMap::new(),
        })
    }

    pub fn cached_path(&self, k: usize, l: usize) -> Option<&[(usize, usize)]> {
        self.paths.get(&(k, l)).map(Vec::as_slice)
    }

    /// Cached pairs in `(src, tgt)` order.
    pub fn cached_pairs(&self) -> Vec<(usize, usize)> {
        let mut keys: Vec<_> = self.paths.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    /// Warping path between `src[k]` and `tgt[l]`, recomputed when it was
    /// not cached.
    pub fn path(
        &self,
        k: usize,
        l: usize,
        src: &[Trajectory],
        tgt: &[Trajectory],
    ) -> Result<Vec<(usize, usize)>> {
        match self.paths.get(&(k, l)) {
            Some(p) => Ok(p.clone()),
            None => Ok(dtw(&src[k].proprio, &tgt[l].proprio)?.path),
        }
    }
}

/// Normalized DTW distances and weights for every source/target pair.
pub fn build_pair_weights(src: &[Trajectory], tgt: &[Trajectory]) -> Result<PairWeights> {
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::Empty("trajectory dataset"));
    }
    let mut weights = Matrix::zeros(src.len(), tgt.len());
    let mut norm_dists = Matrix::zeros(src.len(), tgt.len());
    let mut paths = HashMap::new();
    for (k, s) in src.iter().enumerate() {
        for (l, t) in tgt.iter().enumerate() {
            let res = dtw(&s.proprio, &t.proprio)?;
            let d_bar = res.distance / s.len().max(t.len()) as f64;
            let w = weight_transform(d_bar);
            norm_dists.set(k, l, d_bar);
            weights.set(k, l, w);
            if w >= PATH_WEIGHT_FLOOR {
                paths.insert((k, l), res.path);
            }
        }
    }
    Ok(PairWeights {
        weights,
        norm_dists,
        paths,
    })
}
