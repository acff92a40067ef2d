//! Dense matrices, distances and the joint latent/proprioceptive ground cost.

use std::io::{Read, Write};

use crate::error::{ensure_dim, Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        ensure_dim("matrix buffer", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            ensure_dim("matrix row", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Outer product `p qᵀ`.
    pub fn outer(p: &[T], q: &[T]) -> Self {
        Self::from_fn(p.len(), q.len(), |i, j| p[i] * q[j])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (acc, &x) in out.iter_mut().zip(self.row(i)) {
                *acc = *acc + x;
            }
        }
        out
    }

    /// Largest absolute entrywise difference. Shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        ensure_dim("matrix rows", self.rows, other.rows)?;
        ensure_dim("matrix cols", self.cols, other.cols)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Writes the matrix as CSV, one row per line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.rows {
            w.write_record(self.row(i).iter().map(|x| format!("{x:?}")))
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Reads a rectangular CSV of numbers. Blank lines are skipped.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|field| {
                    field
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|_| Error::Parse(format!("not a number: `{field}`")))
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Parses a single CSV row of numbers (a vector).
pub fn read_csv_vector<T: Scalar, R: Read>(input: R) -> Result<Vec<T>> {
    let m = Matrix::<T>::read_csv(input)?;
    if m.rows() != 1 {
        return Err(Error::Parse(format!(
            "expected a single CSV row, got {}",
            m.rows()
        )));
    }
    Ok(m.into_vec())
}

/// Nonnegative, finite ground-cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T>(Matrix<T>);

impl<T: Scalar> CostMatrix<T> {
    pub fn new(m: Matrix<T>) -> Result<Self> {
        for &x in m.as_slice() {
            if !x.is_finite() {
                return Err(Error::NonFinite("cost matrix"));
            }
            if x < T::zero() {
                return Err(Error::InvalidArgument(format!(
                    "cost entries must be nonnegative, got {x}"
                )));
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.0.get(i, j)
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

/// Squared Euclidean distance `Σ (u_k − v_k)²`.
pub fn sq_euclid<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    ensure_dim("sq_euclid", u.len(), v.len())?;
    Ok(sq_euclid_unchecked(u, v))
}

#[inline]
pub(crate) fn sq_euclid_unchecked<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            let d = a - b;
            d * d
        })
        .fold(T::zero(), |acc, x| acc + x)
}

/// Euclidean distance.
pub fn euclid<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    sq_euclid(u, v).map(T::sqrt)
}

fn uniform_dim<T>(context: &'static str, vs: &[Vec<T>]) -> Result<usize> {
    let d = vs.first().map_or(0, Vec::len);
    for v in vs {
        ensure_dim(context, d, v.len())?;
    }
    Ok(d)
}

/// Joint ground cost between source and target samples:
/// `C_ij = α1·‖z_src_i − z_tgt_j‖² + α2·‖x_src_i − x_tgt_j‖²`.
pub fn joint_cost_matrix<T: Scalar>(
    z_src: &[Vec<T>],
    x_src: &[Vec<T>],
    z_tgt: &[Vec<T>],
    x_tgt: &[Vec<T>],
    alpha1: T,
    alpha2: T,
) -> Result<CostMatrix<T>> {
    ensure_dim("source latents vs proprio", z_src.len(), x_src.len())?;
    ensure_dim("target latents vs proprio", z_tgt.len(), x_tgt.len())?;
    if !(alpha1 >= T::zero() && alpha2 >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "cost weights must be nonnegative, got α1={alpha1}, α2={alpha2}"
        )));
    }
    let dz = uniform_dim("source latent", z_src)?;
    let dx = uniform_dim("source proprio", x_src)?;
    if !z_tgt.is_empty() {
        ensure_dim("target latent", dz, uniform_dim("target latent", z_tgt)?)?;
        ensure_dim("target proprio", dx, uniform_dim("target proprio", x_tgt)?)?;
    }
    let m = Matrix::from_fn(z_src.len(), z_tgt.len(), |i, j| {
        alpha1 * sq_euclid_unchecked(&z_src[i], &z_tgt[j])
            + alpha2 * sq_euclid_unchecked(&x_src[i], &x_tgt[j])
    });
    CostMatrix::new(m)
}
