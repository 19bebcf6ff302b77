//! Dense complex matrices sized for desk-scale Fock spaces.
//!
//! Everything the oracle needs fits comfortably below ~10³ rows, so the
//! operations here are plain row-major loops: products, Kronecker products,
//! adjoints, and a cyclic Jacobi eigensolver for Hermitian matrices (used by
//! the fidelity metric and positivity checks).

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Diagonal matrix from a vector of entries.
    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must match");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for x in &mut out.data {
            *x *= factor;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x += y;
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, factor: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += factor * y;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x -= y;
        }
        out
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let aij = self[(i, j)];
                if aij == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = aij * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// `(A + A†)/2`; suppresses roundoff drift after chained products.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from Hermiticity, `max |A_ij − conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    fn off_diagonal_norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    acc += self[(i, j)].norm_sqr();
                }
            }
        }
        acc
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and the matching eigenvectors
    /// as columns of a unitary matrix.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        assert!(self.is_square(), "eigendecomposition needs a square matrix");
        let n = self.rows;
        let mut a = self.symmetrized();
        let mut v = Self::identity(n);
        if n <= 1 {
            let values = (0..n).map(|i| a[(i, i)].re).collect();
            return (values, v);
        }

        let scale: f64 = a.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let tol = (1e-30 * scale * scale).max(f64::MIN_POSITIVE);
        for _sweep in 0..100 {
            if a.off_diagonal_norm_sqr() <= tol {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let g = a[(p, q)];
                    let mag = g.norm();
                    if mag <= 1e-300 {
                        continue;
                    }
                    let alpha = a[(p, p)].re;
                    let beta = a[(q, q)].re;
                    let theta = 0.5 * (2.0 * mag).atan2(alpha - beta);
                    let c = theta.cos();
                    let s = theta.sin();
                    let phase = g.conj() / mag;

                    // Columns transform by J, rows by J†, with
                    // J[p][p] = c, J[p][q] = −s, J[q][p] = phase·s,
                    // J[q][q] = phase·c.
                    for i in 0..n {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = c * aip + phase * s * aiq;
                        a[(i, q)] = -s * aip + phase * c * aiq;
                    }
                    for j in 0..n {
                        let apj = a[(p, j)];
                        let aqj = a[(q, j)];
                        a[(p, j)] = c * apj + phase.conj() * s * aqj;
                        a[(q, j)] = -s * apj + phase.conj() * c * aqj;
                    }
                    a[(p, q)] = Complex64::new(0.0, 0.0);
                    a[(q, p)] = Complex64::new(0.0, 0.0);
                    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
                    for i in 0..n {
                        let vip = v[(i, p)];
                        let viq = v[(i, q)];
                        v[(i, p)] = c * vip + phase * s * viq;
                        v[(i, q)] = -s * vip + phase * c * viq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
        let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = Self::from_fn(n, n, |i, j| v[(i, order[j])]);
        (values, vectors)
    }

    /// Positive-semidefinite square root of a Hermitian matrix; negative
    /// eigenvalues from roundoff are clamped to zero.
    pub fn hermitian_sqrt(&self) -> ComplexMatrix {
        let (values, vectors) = self.hermitian_eigen();
        let roots: Vec<Complex64> = values
            .iter()
            .map(|&v| Complex64::new(v.max(0.0).sqrt(), 0.0))
            .collect();
        vectors
            .mul(&Self::from_diagonal(&roots))
            .mul(&vectors.adjoint())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}
