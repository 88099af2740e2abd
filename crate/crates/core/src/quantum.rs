//! Finite-dimensional quantum states and observables.
//!
//! A [`DensityMatrix`] is a validated element of the convex set of
//! Hermitian, positive semidefinite, unit-trace n×n matrices. An
//! [`Observable`] is any Hermitian n×n matrix.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::entropy::EntropyFamily;
use crate::error::{LabError, Result};
use crate::linalg::{
    self, c, ensure_finite, ensure_square, hermitian_part, hermitian_violation, CMatrix,
    MatrixJson, SpectralDecomposition,
};
use crate::tolerances::TOLERANCES;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    entries: CMatrix,
}

/// Matrices that can enter the Hilbert–Schmidt inner product.
pub trait HermitianOperand {
    fn entries(&self) -> &CMatrix;

    fn dim(&self) -> usize {
        self.entries().nrows()
    }
}

impl HermitianOperand for DensityMatrix {
    fn entries(&self) -> &CMatrix {
        &self.entries
    }
}

impl HermitianOperand for Observable {
    fn entries(&self) -> &CMatrix {
        &self.entries
    }
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity, in that order.
    pub fn new(entries: CMatrix) -> Result<Self> {
        ensure_square(&entries)?;
        ensure_finite(&entries, "density matrix")?;
        let violation = hermitian_violation(&entries);
        if violation > TOLERANCES.hermitian {
            return Err(LabError::NotHermitian { violation });
        }
        let entries = hermitian_part(&entries);
        let deviation = (linalg::trace(&entries).re - 1.0).abs();
        if deviation > TOLERANCES.trace {
            return Err(LabError::TraceNotOne { deviation });
        }
        let min_eigenvalue = SpectralDecomposition::of_hermitian(&entries).min();
        if min_eigenvalue < -TOLERANCES.positivity {
            return Err(LabError::NotPositive { min_eigenvalue });
        }
        Ok(Self { entries })
    }

    /// Nearest-state repair for small numerical drift: Hermitian part,
    /// eigenvalues clamped at zero, trace renormalized. Fails when the
    /// drift (negative mass or trace error) exceeds `max_drift`.
    pub fn project(entries: &CMatrix, max_drift: f64) -> Result<Self> {
        ensure_square(entries)?;
        ensure_finite(entries, "density matrix")?;
        let h = hermitian_part(entries);
        let tr = linalg::trace(&h).re;
        if (tr - 1.0).abs() > max_drift {
            return Err(LabError::TraceNotOne {
                deviation: (tr - 1.0).abs(),
            });
        }
        let sd = SpectralDecomposition::of_hermitian(&h);
        if sd.min() < -max_drift {
            return Err(LabError::NotPositive {
                min_eigenvalue: sd.min(),
            });
        }
        let total: f64 = sd.eigenvalues.iter().map(|l| l.max(0.0)).sum();
        Self::new(sd.map(|l| l.max(0.0) / total))
    }

    /// Diagonal state diag(p); `p` must be a probability vector.
    pub fn diagonal(p: &[f64]) -> Result<Self> {
        Self::new(linalg::from_real_diagonal(p))
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) vector ψ.
    pub fn pure(psi: &[num_complex::Complex64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(LabError::InvalidState("zero state vector".into()));
        }
        let n = psi.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            psi[i] * psi[j].conj() / norm2
        }))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            entries: CMatrix::identity(n, n).unscale(n as f64),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn spectrum(&self) -> SpectralDecomposition {
        SpectralDecomposition::of_hermitian(&self.entries)
    }

    /// Eigenvalues, ascending, with [−floor, 0) clamped to zero.
    pub fn populations(&self) -> Vec<f64> {
        self.spectrum()
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0))
            .collect()
    }
}

impl Observable {
    pub fn new(entries: CMatrix) -> Result<Self> {
        ensure_square(&entries)?;
        ensure_finite(&entries, "observable")?;
        let violation = hermitian_violation(&entries);
        if violation > TOLERANCES.hermitian {
            return Err(LabError::NotHermitian { violation });
        }
        Ok(Self {
            entries: hermitian_part(&entries),
        })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self {
            entries: linalg::from_real_diagonal(values),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        Self {
            entries: linalg::random_hermitian(rng, n),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn spectrum(&self) -> SpectralDecomposition {
        SpectralDecomposition::of_hermitian(&self.entries)
    }
}

/// ρ_λ = (1 − λ)ρ₀ + λρ₁, re-validated as a state.
pub fn convex_combine_q(
    rho0: &DensityMatrix,
    rho1: &DensityMatrix,
    lambda: f64,
) -> Result<DensityMatrix> {
    if rho0.dim() != rho1.dim() {
        return Err(LabError::DimensionMismatch {
            expected: rho0.dim(),
            found: rho1.dim(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(LabError::LambdaOutOfRange(lambda));
    }
    DensityMatrix::new(rho0.matrix().scale(1.0 - lambda) + rho1.matrix().scale(lambda))
}

/// ⟨X, Y⟩ = Tr[X†Y], real for Hermitian arguments.
pub fn inner_product(x: &impl HermitianOperand, y: &impl HermitianOperand) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(LabError::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let (a, b) = (x.entries(), y.entries());
    // Tr[A†B] = Σ conj(a_ij) b_ij
    let z: num_complex::Complex64 = a.iter().zip(b.iter()).map(|(p, q)| p.conj() * q).sum();
    if z.im.abs() > TOLERANCES.non_real {
        return Err(LabError::NonRealResult(z.im));
    }
    Ok(z.re)
}

/// Entropy of a quantum state evaluated on its spectrum.
pub fn entropy_q(rho: &DensityMatrix, family: EntropyFamily) -> Result<f64> {
    let spectrum = rho.spectrum();
    family.evaluate(spectrum.eigenvalues.as_slice())
}

/// exp(−O/T) / Tr exp(−O/T).
pub fn gibbs_state(observable: &Observable, temperature: f64) -> Result<DensityMatrix> {
    check_temperature(temperature)?;
    let sd = observable.spectrum();
    let weights = boltzmann_weights(sd.eigenvalues.as_slice(), temperature);
    let mut v = sd.eigenvectors.clone();
    for (j, w) in weights.iter().enumerate() {
        v.column_mut(j).scale_mut(w.sqrt());
    }
    DensityMatrix::new(&v * v.adjoint())
}

/// T·ln Tr exp(−O/T), the maximum of −Tr[ρO] + T·S_vN(ρ) over states.
pub fn free_energy_optimum(observable: &Observable, temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    Ok(log_partition(
        observable.spectrum().eigenvalues.as_slice(),
        temperature,
    ))
}

pub(crate) fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!(
            "temperature must be positive and finite (got {t})"
        )))
    }
}

/// Normalized exp(−v/T), shifted by min v for stability.
pub(crate) fn boltzmann_weights(values: &[f64], temperature: f64) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = values
        .iter()
        .map(|v| (-(v - lo) / temperature).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// T·ln Σ exp(−v/T), shifted by min v for stability.
pub(crate) fn log_partition(values: &[f64], temperature: f64) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let z: f64 = values.iter().map(|v| (-(v - lo) / temperature).exp()).sum();
    -lo + temperature * z.ln()
}

/// Hilbert–Schmidt random state G G† / Tr(G G†) with complex Gaussian G.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DensityMatrix {
    let g = linalg::random_complex_gaussian(rng, n, n);
    let w = &g * g.adjoint();
    let tr = linalg::trace(&w).re;
    DensityMatrix {
        entries: hermitian_part(&w.unscale(tr)),
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(&self.entries).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = CMatrix::try_from(MatrixJson::deserialize(d)?).map_err(serde::de::Error::custom)?;
        Self::new(m).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Observable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(&self.entries).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Observable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = CMatrix::try_from(MatrixJson::deserialize(d)?).map_err(serde::de::Error::custom)?;
        Self::new(m).map_err(serde::de::Error::custom)
    }
}

/// σ_x, σ_y, σ_z as observables.
pub fn pauli(axis: char) -> Observable {
    let entries = match axis {
        'x' => linalg::pauli_x(),
        'y' => linalg::pauli_y(),
        _ => linalg::pauli_z(),
    };
    Observable { entries }
}

/// |+⟩⟨+| = [[½, ½], [½, ½]].
pub fn plus_state() -> DensityMatrix {
    DensityMatrix {
        entries: CMatrix::from_element(2, 2, c(0.5, 0.0)),
    }
}
