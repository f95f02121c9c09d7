//! Dense linear algebra on `Float` matrices: Cholesky and pivoted LU.

use rug::Float;

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<Float>,
}

impl Matrix {
    pub fn zeros(n: usize, prec: u32) -> Self {
        Matrix {
            n,
            data: vec![Float::new(prec); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Float) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Float {
        &self.data[i * self.n + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Float {
        &mut self.data[i * self.n + j]
    }

    pub fn mul_vec(&self, v: &[Float]) -> Vec<Float> {
        (0..self.n)
            .map(|i| {
                let prec = self.get(i, 0).prec();
                let mut acc = Float::new(prec);
                for (j, vj) in v.iter().enumerate() {
                    acc += Float::with_val(prec, self.get(i, j) * vj);
                }
                acc
            })
            .collect()
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.dim();
        let prec = a.get(0, 0).prec();
        let mut l = Matrix::zeros(n, prec);
        for j in 0..n {
            let mut d = Float::with_val(prec, a.get(j, j));
            for k in 0..j {
                d -= Float::with_val(prec, l.get(j, k).square_ref());
            }
            if !(d > 0) {
                return Err(Error::Precision {
                    bits: prec,
                    detail: format!("Cholesky pivot {j} is not positive"),
                });
            }
            let d = d.sqrt();
            for i in j + 1..n {
                let mut s = Float::with_val(prec, a.get(i, j));
                for k in 0..j {
                    s -= Float::with_val(prec, l.get(i, k) * l.get(j, k));
                }
                *l.get_mut(i, j) = s / &d;
            }
            *l.get_mut(j, j) = d;
        }
        Ok(Cholesky { l })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Float]) -> Vec<Float> {
        let n = self.l.dim();
        let prec = self.l.get(0, 0).prec();
        let mut y: Vec<Float> = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = Float::with_val(prec, &b[i]);
            for (k, yk) in y.iter().enumerate() {
                s -= Float::with_val(prec, self.l.get(i, k) * yk);
            }
            y.push(s / self.l.get(i, i));
        }
        for i in (0..n).rev() {
            let mut s = y[i].clone();
            for k in i + 1..n {
                s -= Float::with_val(prec, self.l.get(k, i) * &y[k]);
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }

    /// `log det A`.
    pub fn log_det(&self) -> Float {
        let n = self.l.dim();
        let prec = self.l.get(0, 0).prec();
        let mut acc = Float::new(prec);
        for i in 0..n {
            acc += Float::with_val(prec, self.l.get(i, i).ln_ref());
        }
        acc * 2u32
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[Float]) -> Result<Vec<Float>> {
    let n = a.dim();
    let prec = a.get(0, 0).prec();
    let mut m = a.clone();
    let mut rhs: Vec<Float> = b.iter().map(|v| Float::with_val(prec, v)).collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                m.get(i, col)
                    .as_abs()
                    .partial_cmp(&*m.get(j, col).as_abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if m.get(pivot, col).is_zero() {
            return Err(Error::Precision {
                bits: prec,
                detail: format!("singular matrix at column {col}"),
            });
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m.get(col, j).clone();
                *m.get_mut(col, j) = m.get(pivot, j).clone();
                *m.get_mut(pivot, j) = tmp;
            }
            rhs.swap(col, pivot);
        }
        let p = m.get(col, col).clone();
        for i in col + 1..n {
            let factor = Float::with_val(prec, m.get(i, col) / &p);
            if factor.is_zero() {
                continue;
            }
            for j in col..n {
                let delta = Float::with_val(prec, &factor * m.get(col, j));
                *m.get_mut(i, j) -= delta;
            }
            let delta = Float::with_val(prec, &factor * &rhs[col]);
            rhs[i] -= delta;
        }
    }
    for i in (0..n).rev() {
        let mut s = rhs[i].clone();
        for j in i + 1..n {
            s -= Float::with_val(prec, m.get(i, j) * &rhs[j]);
        }
        rhs[i] = s / m.get(i, i);
    }
    Ok(rhs)
}
