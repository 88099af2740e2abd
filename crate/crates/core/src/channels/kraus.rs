//! Kraus maps and their unconstrained isometry parameterization.
//!
//! A raw vector of 2·n²·r reals is read as an (nr)×n complex matrix A
//! (row-major, interleaved real/imaginary parts). Gram–Schmidt gives
//! A = V·R with V†V = I; the r stacked n×n blocks of V are Kraus operators
//! and Σ K†K = V†V = I holds for every full-rank A.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ControlMap;
use crate::error::{LabError, Result};
use crate::linalg::{self, c, CMatrix, MatrixJson};
use crate::quantum::{DensityMatrix, HermitianOperand};
use crate::state::{Regime, State, StateGradient};
use crate::tolerances::TOLERANCES;

/// Wire form: a JSON list of `{"dim", "re", "im"}` matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MatrixJson>", into = "Vec<MatrixJson>")]
pub struct KrausMap {
    operators: Vec<CMatrix>,
}

impl TryFrom<Vec<MatrixJson>> for KrausMap {
    type Error = LabError;

    fn try_from(ops: Vec<MatrixJson>) -> Result<Self> {
        Self::new(
            ops.into_iter()
                .map(CMatrix::try_from)
                .collect::<Result<_>>()?,
        )
    }
}

impl From<KrausMap> for Vec<MatrixJson> {
    fn from(map: KrausMap) -> Self {
        map.operators.iter().map(MatrixJson::from).collect()
    }
}

impl KrausMap {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let n = operators.first().map(|k| k.nrows()).ok_or_else(|| {
            LabError::InvalidParameter("a Kraus map needs at least one operator".into())
        })?;
        let mut sum = CMatrix::zeros(n, n);
        for k in &operators {
            if k.nrows() != n || k.ncols() != n {
                return Err(LabError::DimensionMismatch {
                    expected: n,
                    found: k.nrows().max(k.ncols()),
                });
            }
            linalg::ensure_finite(k, "Kraus operator")?;
            sum += k.adjoint() * k;
        }
        let violation = linalg::max_abs_diff(&sum, &CMatrix::identity(n, n));
        if violation > TOLERANCES.trace_preservation {
            return Err(LabError::NotTracePreserving { violation });
        }
        Ok(Self { operators })
    }

    pub fn dim(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn rank(&self) -> usize {
        self.operators.len()
    }

    pub fn operators(&self) -> impl Iterator<Item = &CMatrix> {
        self.operators.iter()
    }

    pub fn identity(n: usize) -> Self {
        Self {
            operators: vec![CMatrix::identity(n, n)],
        }
    }
}

/// Σ K ρ K†
pub fn apply_kraus(map: &KrausMap, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if map.dim() != rho.dim() {
        return Err(LabError::DimensionMismatch {
            expected: map.dim(),
            found: rho.dim(),
        });
    }
    let mut out = CMatrix::zeros(rho.dim(), rho.dim());
    for k in map.operators() {
        out += k * rho.matrix() * k.adjoint();
    }
    DensityMatrix::new(out)
}

/// The map `second ∘ first` with operators K²_j K¹_i.
pub fn compose(first: &KrausMap, second: &KrausMap) -> Result<KrausMap> {
    if first.dim() != second.dim() {
        return Err(LabError::DimensionMismatch {
            expected: first.dim(),
            found: second.dim(),
        });
    }
    let ops = second
        .operators()
        .flat_map(|b| first.operators().map(move |a| b * a))
        .collect();
    KrausMap::new(ops)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicParams {
    dim: usize,
    rank: usize,
    raw: Vec<f64>,
}

impl KinematicParams {
    pub fn new(dim: usize, rank: usize, raw: Vec<f64>) -> Result<Self> {
        if dim == 0 || rank == 0 {
            return Err(LabError::InvalidParameter(
                "dim and rank must be positive".into(),
            ));
        }
        let expected = 2 * dim * dim * rank;
        if raw.len() != expected {
            return Err(LabError::DimensionMismatch {
                expected,
                found: raw.len(),
            });
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(LabError::NonFinite("kinematic parameters"));
        }
        Ok(Self { dim, rank, raw })
    }

    /// Encodes an (nr)×n matrix.
    pub fn from_matrix(a: &CMatrix, rank: usize) -> Result<Self> {
        let n = a.ncols();
        if a.nrows() != n * rank {
            return Err(LabError::DimensionMismatch {
                expected: n * rank,
                found: a.nrows(),
            });
        }
        let mut raw = Vec::with_capacity(2 * a.len());
        for i in 0..a.nrows() {
            for j in 0..n {
                raw.push(a[(i, j)].re);
                raw.push(a[(i, j)].im);
            }
        }
        Self::new(n, rank, raw)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn matrix(&self) -> CMatrix {
        raw_to_matrix(&self.raw, self.dim, self.rank)
    }
}

fn raw_to_matrix(raw: &[f64], n: usize, r: usize) -> CMatrix {
    CMatrix::from_fn(n * r, n, |i, j| {
        let k = 2 * (i * n + j);
        c(raw[k], raw[k + 1])
    })
}

/// Classical Gram–Schmidt with one re-orthogonalization pass: A = Q·R, Q
/// with orthonormal columns and R upper triangular with positive diagonal.
pub fn orthonormalize(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(LabError::RankDeficientInput { needed: cols });
    }
    let scale = (0..cols).map(|j| a.column(j).norm()).fold(0.0, f64::max);
    let mut q = CMatrix::zeros(rows, cols);
    let mut r = CMatrix::zeros(cols, cols);
    for j in 0..cols {
        let mut v = a.column(j).into_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let coeff = qi.dotc(&v);
                v.axpy(-coeff, &qi, ONE_C);
                r[(i, j)] += coeff;
            }
        }
        let norm = v.norm();
        if !(norm > 1e-12 * scale) {
            return Err(LabError::RankDeficientInput { needed: cols });
        }
        r[(j, j)] = c(norm, 0.0);
        q.set_column(j, &v.unscale(norm));
    }
    Ok((q, r))
}

const ONE_C: Complex64 = Complex64::new(1.0, 0.0);

/// Orthonormalizes the raw matrix and slices it into r Kraus operators.
pub fn kraus_from_params(p: &KinematicParams) -> Result<KrausMap> {
    let (v, _) = orthonormalize(&p.matrix())?;
    KrausMap::new(blocks(&v, p.dim, p.rank))
}

fn blocks(v: &CMatrix, n: usize, r: usize) -> Vec<CMatrix> {
    (0..r).map(|i| v.rows(i * n, n).into_owned()).collect()
}

/// Kinematic control map u ↦ Σ K(u) ρᵢ K(u)† from a fixed initial state.
#[derive(Debug, Clone)]
pub struct KinematicMap {
    rank: usize,
    initial: DensityMatrix,
}

impl KinematicMap {
    pub fn new(initial: DensityMatrix, rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(LabError::InvalidParameter(
                "Kraus rank must be positive".into(),
            ));
        }
        Ok(Self { rank, initial })
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn initial(&self) -> &DensityMatrix {
        &self.initial
    }

    /// 2·n·r, the expected squared column norm of standard-normal raw
    /// coordinates. Control gradients scale with its inverse, so it is the
    /// natural ascent step for this chart.
    pub fn typical_step(&self) -> f64 {
        (2 * self.dim() * self.rank) as f64
    }

    fn isometry(&self, params: &[f64]) -> Result<(CMatrix, CMatrix)> {
        let p = KinematicParams::new(self.dim(), self.rank, params.to_vec())?;
        orthonormalize(&p.matrix())
    }

    /// Raw coordinates whose isometry is `v` itself (R = I).
    pub fn params_for_isometry(&self, v: &CMatrix) -> Result<Vec<f64>> {
        Ok(KinematicParams::from_matrix(v, self.rank)?.raw)
    }
}

impl ControlMap for KinematicMap {
    fn regime(&self) -> Regime {
        Regime::Quantum
    }

    fn n_params(&self) -> usize {
        2 * self.dim() * self.dim() * self.rank
    }

    fn state(&self, params: &[f64]) -> Result<State> {
        let (v, _) = self.isometry(params)?;
        let n = self.dim();
        let rho = self.initial.matrix();
        let mut out = CMatrix::zeros(n, n);
        for k in blocks(&v, n, self.rank) {
            out += &k * rho * k.adjoint();
        }
        Ok(State::Quantum(DensityMatrix::project(
            &out,
            TOLERANCES.trace_preservation,
        )?))
    }

    fn pullback(&self, params: &[f64], gradient: &StateGradient) -> Option<Result<Vec<f64>>> {
        let StateGradient::Quantum(gamma) = gradient else {
            return Some(Err(LabError::RegimeMismatch));
        };
        Some(self.isometry(params).and_then(|(q, r)| {
            let n = self.dim();
            if gamma.nrows() != n {
                return Err(LabError::DimensionMismatch {
                    expected: n,
                    found: gamma.nrows(),
                });
            }
            // dJ = Re⟨2 (I⊗Γ) V ρ, dV⟩
            let rho = self.initial.matrix();
            let mut g_v = CMatrix::zeros(n * self.rank, n);
            for i in 0..self.rank {
                let k = q.rows(i * n, n);
                g_v.rows_mut(i * n, n)
                    .copy_from(&(gamma * k * rho).scale(2.0));
            }
            let g_a = qr_backward(&q, &r, &g_v)?;
            let mut out = Vec::with_capacity(2 * g_a.len());
            for i in 0..g_a.nrows() {
                for j in 0..n {
                    out.push(g_a[(i, j)].re);
                    out.push(g_a[(i, j)].im);
                }
            }
            Ok(out)
        }))
    }
}

/// Reverse-mode step through A = QR: given G_Q with dL = Re⟨G_Q, dQ⟩,
/// returns G_A with dL = Re⟨G_A, dA⟩.
///
/// Q†dQ is skew-Hermitian and dR·R⁻¹ is upper triangular with a real
/// diagonal, which fixes Q†dQ = L − L† + i·Im diag(C) for
/// C = Q†dA·R⁻¹ and L its strictly lower part. Hence
/// G_A = [(I − QQ†)G_Q + Q·B]·R^{−†} with M = Q†G_Q and
/// B = strictly_lower(M − M†) + i·Im diag(M).
fn qr_backward(q: &CMatrix, r: &CMatrix, g_q: &CMatrix) -> Result<CMatrix> {
    let n = r.nrows();
    let m = q.adjoint() * g_q;
    let mut b = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            b[(i, j)] = m[(i, j)] - m[(j, i)].conj();
        }
        b[(i, i)] = c(0.0, m[(i, i)].im);
    }
    let y = g_q - q * &m + q * b;
    let r_inv = r
        .clone()
        .solve_upper_triangular(&CMatrix::identity(n, n))
        .ok_or(LabError::RankDeficientInput { needed: n })?;
    Ok(y * r_inv.adjoint())
}
