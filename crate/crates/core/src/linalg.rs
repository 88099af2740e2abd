//! Dense complex linear algebra shared by the quantum and channel modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::tolerances::TOLERANCES;

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(LabError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &CMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LabError::NonFinite(what))
    }
}

/// max |A − A†| over entries.
pub fn hermitian_violation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// (A + A†)/2
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn from_real_diagonal(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(
        d.len(),
        d.iter().map(|&x| c(x, 0.0)),
    ))
}

pub fn from_rows(rows: &[&[Complex64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn pauli_x() -> CMatrix {
    from_rows(&[&[ZERO, ONE], &[ONE, ZERO]])
}

pub fn pauli_y() -> CMatrix {
    from_rows(&[&[ZERO, -I], &[I, ZERO]])
}

pub fn pauli_z() -> CMatrix {
    from_real_diagonal(&[1.0, -1.0])
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// Decomposes the Hermitian part of `m`; callers validate hermiticity.
    pub fn of_hermitian(m: &CMatrix) -> Self {
        let eig = hermitian_part(m).symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let eigenvectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// V·diag(f(λ))·V†
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let w = f(l);
            scaled.column_mut(j).scale_mut(w);
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|l| l)
    }
}

/// Orthonormal basis of traceless Hermitian n×n matrices under Tr[A†B]
/// (generalized Gell-Mann matrices scaled to unit norm); n² − 1 elements.
pub fn traceless_hermitian_basis(n: usize) -> Vec<CMatrix> {
    let mut basis = Vec::with_capacity(n * n - 1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..n {
        for k in (j + 1)..n {
            let mut sym = CMatrix::zeros(n, n);
            sym[(j, k)] = c(s, 0.0);
            sym[(k, j)] = c(s, 0.0);
            basis.push(sym);
            let mut anti = CMatrix::zeros(n, n);
            anti[(j, k)] = c(0.0, -s);
            anti[(k, j)] = c(0.0, s);
            basis.push(anti);
        }
    }
    for l in 1..n {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut d = vec![0.0; n];
        for x in d.iter_mut().take(l) {
            *x = norm;
        }
        d[l] = -(l as f64) * norm;
        basis.push(from_real_diagonal(&d));
    }
    basis
}

/// Projects a Hermitian matrix onto the traceless subspace.
pub fn traceless_part(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let shift = trace(m) / n as f64;
    let mut out = m.clone();
    for i in 0..n {
        out[(i, i)] -= shift;
    }
    out
}

pub fn random_complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

/// (G + G†)/2 for complex Gaussian G.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    hermitian_part(&random_complex_gaussian(rng, n, n))
}

/// Number of singular values above `relative_cutoff` times the largest.
pub fn numerical_rank(m: &DMatrix<f64>, relative_cutoff: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter()
        .filter(|&&s| s > relative_cutoff * largest)
        .count()
}

/// Row-space basis of `m` (right singular vectors above the relative cutoff),
/// returned as columns.
pub fn row_space(m: &DMatrix<f64>, relative_cutoff: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 || cols == 0 {
        return DMatrix::zeros(cols, 0);
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let largest = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| largest > 0.0 && s > relative_cutoff * largest)
        .map(|(k, _)| k)
        .collect();
    DMatrix::from_fn(cols, keep.len(), |i, j| v_t[(keep[j], i)])
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Trace distance ½‖A − B‖₁ of Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = SpectralDecomposition::of_hermitian(&(a - b));
    0.5 * diff.eigenvalues.iter().map(|l| l.abs()).sum::<f64>()
}

/// Wire form of a complex matrix: row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            dim: m.nrows(),
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }
}

impl TryFrom<MatrixJson> for CMatrix {
    type Error = LabError;

    fn try_from(j: MatrixJson) -> Result<Self> {
        let n = j.dim;
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if n == 0 || !shape_ok(&j.re) || !shape_ok(&j.im) {
            return Err(LabError::InvalidParameter(format!(
                "matrix JSON must carry {n}x{n} \"re\" and \"im\" arrays"
            )));
        }
        Ok(CMatrix::from_fn(n, n, |r, col| {
            c(j.re[r][col], j.im[r][col])
        }))
    }
}

/// Serde adapter for `CMatrix` fields using [`MatrixJson`].
pub mod matrix_serde {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        CMatrix::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// `NotHermitian` when the violation exceeds the shared tolerance.
pub fn check_hermitian(m: &CMatrix) -> Result<()> {
    let v = hermitian_violation(m);
    if v > TOLERANCES.hermitian {
        return Err(LabError::NotHermitian { violation: v });
    }
    Ok(())
}
