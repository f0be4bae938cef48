//! Small dense symmetric matrices. Parameter vectors here have a handful of
//! entries, so a row-major `Vec` and an unpivoted Cholesky are all we need.

use crate::scalar::Scalar;

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![S::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix must be square");
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> Vec<Vec<S>> {
        self.data.chunks(self.dim.max(1)).map(|r| r.to_vec()).take(self.dim).collect()
    }

    pub fn scale(&self, factor: S) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|v| *v * factor).collect() }
    }

    pub fn neg(&self) -> Self {
        self.scale(-S::one())
    }

    /// Replaces the matrix by `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let half = S::lit(0.5);
        for r in 0..self.dim {
            for c in (r + 1)..self.dim {
                let v = (self[(r, c)] + self[(c, r)]) * half;
                self[(r, c)] = v;
                self[(c, r)] = v;
            }
        }
    }

    pub fn max_asymmetry(&self) -> S {
        let mut worst = S::zero();
        for r in 0..self.dim {
            for c in 0..self.dim {
                worst = worst.max((self[(r, c)] - self[(c, r)]).abs());
            }
        }
        worst
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix, or the
    /// index of the first pivot that is not positive.
    pub fn cholesky(&self) -> Result<Matrix<S>, usize> {
        let n = self.dim;
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            let scale = self[(j, j)].abs().max(S::min_positive_value());
            if !(d > S::epsilon() * scale * S::lit(16.0)) || !d.is_finite() {
                return Err(j);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }

    /// Solves `A x = b` for symmetric positive definite `A`.
    pub fn solve_spd(&self, b: &[S]) -> Option<Vec<S>> {
        let l = self.cholesky().ok()?;
        Some(cholesky_solve(&l, b))
    }

    /// Inverse of a symmetric positive definite matrix.
    pub fn inverse_spd(&self) -> Option<Matrix<S>> {
        let l = self.cholesky().ok()?;
        let n = self.dim;
        let mut inv = Matrix::zeros(n);
        let mut e = vec![S::zero(); n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = S::zero());
            e[c] = S::one();
            let col = cholesky_solve(&l, &e);
            for r in 0..n {
                inv[(r, c)] = col[r];
            }
        }
        inv.symmetrize();
        Some(inv)
    }

    pub fn is_negative_definite(&self) -> bool {
        self.neg().cholesky().is_ok()
    }
}

fn cholesky_solve<S: Scalar>(l: &Matrix<S>, b: &[S]) -> Vec<S> {
    let n = l.dim;
    let mut y = vec![S::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s = s - l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

impl<S> std::ops::Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (r, c): (usize, usize)) -> &S {
        &self.data[r * self.dim + c]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        &mut self.data[r * self.dim + c]
    }
}

/// Indices of columns of a Gram matrix that are (numerically) linear
/// combinations of earlier columns, found by a Cholesky sweep that skips
/// deficient pivots. A pivot is deficient when it falls below `rel_tol` times
/// the column's `reference` scale (e.g. its raw sum of squares before
/// centring).
pub fn dependent_columns<S: Scalar>(gram: &Matrix<S>, reference: &[S], rel_tol: S) -> Vec<usize> {
    let n = gram.dim();
    let mut l = Matrix::zeros(n);
    let mut active = vec![false; n];
    let mut dependent = Vec::new();
    for j in 0..n {
        let mut d = gram[(j, j)];
        for k in 0..j {
            if active[k] {
                d = d - l[(j, k)] * l[(j, k)];
            }
        }
        if !(d > rel_tol * reference[j].abs()) || gram[(j, j)] <= S::zero() {
            dependent.push(j);
            continue;
        }
        active[j] = true;
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = gram[(i, j)];
            for k in 0..j {
                if active[k] {
                    s = s - l[(i, k)] * l[(j, k)];
                }
            }
            l[(i, j)] = s / djj;
        }
    }
    dependent
}
