//! Classical open-system states on a finite partition of phase space.
//!
//! Phase space is a set of `m` cells whose σ-algebra is the power set, so a
//! probability measure is a weight vector and the Kolmogorov axioms reduce
//! to nonnegativity, normalization and finite additivity.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::entropy::EntropyFamily;
use crate::error::{LabError, Result};
use crate::quantum::{
    boltzmann_weights, check_temperature, log_partition, DensityMatrix, Observable,
};
use crate::tolerances::TOLERANCES;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpace {
    cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl PhaseSpace {
    pub fn new(cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(LabError::InvalidSpace(
                "phase space needs at least one cell".into(),
            ));
        }
        Ok(Self {
            cells,
            labels: None,
        })
    }

    pub fn labelled(labels: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(LabError::InvalidSpace(format!(
                "duplicate cell label {dup:?}"
            )));
        }
        let mut space = Self::new(labels.len())?;
        space.labels = Some(labels);
        Ok(space)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    space: PhaseSpace,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomFunction {
    space: PhaseSpace,
    values: Vec<f64>,
}

impl Distribution {
    /// Checks nonnegativity (weights above −clamp are set to zero) and
    /// normalization.
    pub fn new(space: PhaseSpace, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.cells() {
            return Err(LabError::DimensionMismatch {
                expected: space.cells(),
                found: weights.len(),
            });
        }
        for w in weights.iter_mut() {
            if !w.is_finite() {
                return Err(LabError::NonFinite("distribution"));
            }
            if *w < -TOLERANCES.weight_clamp {
                return Err(LabError::InvalidDistribution(format!(
                    "negative weight {w}"
                )));
            }
            *w = w.max(0.0);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > TOLERANCES.normalization {
            return Err(LabError::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        Ok(Self { space, weights })
    }

    pub fn uniform(space: PhaseSpace) -> Self {
        let m = space.cells();
        Self {
            space,
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn point_mass(space: PhaseSpace, cell: usize) -> Result<Self> {
        if cell >= space.cells() {
            return Err(LabError::InvalidParameter(format!(
                "cell {cell} out of range"
            )));
        }
        let mut weights = vec![0.0; space.cells()];
        weights[cell] = 1.0;
        Ok(Self { space, weights })
    }

    /// Flat Dirichlet sample (normalized unit exponentials).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, space: PhaseSpace) -> Self {
        let raw: Vec<f64> = (0..space.cells())
            .map(|_| rng.sample::<f64, _>(Exp1))
            .collect();
        let total: f64 = raw.iter().sum();
        Self {
            space,
            weights: raw.into_iter().map(|x| x / total).collect(),
        }
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// P(E) for a set of cell indices.
    pub fn measure(&self, cells: &[usize]) -> f64 {
        let mut seen = vec![false; self.weights.len()];
        cells
            .iter()
            .filter(|&&c| c < seen.len() && !std::mem::replace(&mut seen[c], true))
            .map(|&c| self.weights[c])
            .sum()
    }

    /// diag(p) as a density matrix.
    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::diagonal(&self.weights).expect("distribution embeds as a diagonal state")
    }
}

impl RandomFunction {
    pub fn new(space: PhaseSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.cells() {
            return Err(LabError::DimensionMismatch {
                expected: space.cells(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("random function"));
        }
        Ok(Self { space, values })
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_observable(&self) -> Observable {
        Observable::diagonal(&self.values)
    }
}

/// Σ_i O(ω_i) p_i.
pub fn expectation(dist: &Distribution, f: &RandomFunction) -> Result<f64> {
    if dist.space != f.space {
        return Err(LabError::SpaceMismatch);
    }
    Ok(dist.weights.iter().zip(&f.values).map(|(p, v)| p * v).sum())
}

pub fn convex_combine_c(d0: &Distribution, d1: &Distribution, lambda: f64) -> Result<Distribution> {
    if d0.space != d1.space {
        return Err(LabError::SpaceMismatch);
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(LabError::LambdaOutOfRange(lambda));
    }
    let weights = d0
        .weights
        .iter()
        .zip(&d1.weights)
        .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
        .collect();
    Distribution::new(d0.space.clone(), weights)
}

pub fn entropy_c(dist: &Distribution, family: EntropyFamily) -> Result<f64> {
    family
        .evaluate(&dist.weights)
        .map_err(|e| LabError::InvalidDistribution(e.to_string()))
}

/// p_i ∝ exp(−O(ω_i)/T).
pub fn gibbs_distribution(f: &RandomFunction, temperature: f64) -> Result<Distribution> {
    check_temperature(temperature)?;
    Distribution::new(f.space.clone(), boltzmann_weights(&f.values, temperature))
}

/// T·ln Σ exp(−O(ω_i)/T).
pub fn free_energy_optimum_c(f: &RandomFunction, temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    Ok(log_partition(&f.values, temperature))
}

#[derive(Serialize)]
struct WireOut<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<&'a [String]>,
    #[serde(flatten)]
    body: WireBody<'a>,
}

#[derive(Serialize)]
enum WireBody<'a> {
    #[serde(rename = "weights")]
    Weights(&'a [f64]),
    #[serde(rename = "values")]
    Values(&'a [f64]),
}

impl Serialize for Distribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WireOut {
            labels: self.space.labels(),
            body: WireBody::Weights(&self.weights),
        }
        .serialize(s)
    }
}

impl Serialize for RandomFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WireOut {
            labels: self.space.labels(),
            body: WireBody::Values(&self.values),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            #[serde(default)]
            labels: Option<Vec<String>>,
            weights: Vec<f64>,
        }
        let w = Wire::deserialize(d)?;
        let space = wire_space(w.labels, w.weights.len()).map_err(serde::de::Error::custom)?;
        Distribution::new(space, w.weights).map_err(serde::de::Error::custom)
    }
}

impl<'de> Deserialize<'de> for RandomFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            #[serde(default)]
            labels: Option<Vec<String>>,
            values: Vec<f64>,
        }
        let w = Wire::deserialize(d)?;
        let space = wire_space(w.labels, w.values.len()).map_err(serde::de::Error::custom)?;
        RandomFunction::new(space, w.values).map_err(serde::de::Error::custom)
    }
}

fn wire_space(labels: Option<Vec<String>>, len: usize) -> Result<PhaseSpace> {
    match labels {
        Some(labels) if labels.len() != len => Err(LabError::DimensionMismatch {
            expected: labels.len(),
            found: len,
        }),
        Some(labels) => PhaseSpace::labelled(labels),
        None => PhaseSpace::new(len),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{entropy_q, inner_product};
    use crate::rng;

    fn space(m: usize) -> PhaseSpace {
        PhaseSpace::new(m).unwrap()
    }

    #[test]
    fn expectation_examples() {
        let f = RandomFunction::new(space(4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((expectation(&Distribution::uniform(space(4)), &f).unwrap() - 2.5).abs() < 1e-15);
        let delta = Distribution::point_mass(space(4), 2).unwrap();
        assert_eq!(expectation(&delta, &f).unwrap(), 3.0);
        let d = Distribution::new(space(2), vec![0.2, 0.8]).unwrap();
        let g = RandomFunction::new(space(2), vec![5.0, -5.0]).unwrap();
        assert!((expectation(&d, &g).unwrap() + 3.0).abs() < 1e-14);
        assert_eq!(expectation(&d, &f), Err(LabError::SpaceMismatch));
    }

    #[test]
    fn labelled_spaces_must_match() {
        let a = PhaseSpace::labelled(vec!["x".into(), "y".into()]).unwrap();
        let b = PhaseSpace::labelled(vec!["x".into(), "z".into()]).unwrap();
        let d = Distribution::uniform(a);
        let f = RandomFunction::new(b, vec![1.0, 2.0]).unwrap();
        assert_eq!(expectation(&d, &f), Err(LabError::SpaceMismatch));
        assert!(PhaseSpace::labelled(vec!["x".into(), "x".into()]).is_err());
        assert!(PhaseSpace::new(0).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(space(2), vec![1.0 + 1e-13, -1e-13]).is_ok());
        assert!(Distribution::new(space(2), vec![1.1, -0.1]).is_err());
        assert!(Distribution::new(space(2), vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(space(2), vec![0.5]).is_err());
        let clamped = Distribution::new(space(2), vec![1.0, -1e-13]).unwrap();
        assert_eq!(clamped.weights()[1], 0.0);
    }

    #[test]
    fn convex_combine_examples() {
        let d0 = Distribution::point_mass(space(3), 0).unwrap();
        let d1 = Distribution::point_mass(space(3), 2).unwrap();
        assert_eq!(convex_combine_c(&d0, &d1, 0.0).unwrap(), d0);
        assert_eq!(
            convex_combine_c(&d0, &d1, 0.5).unwrap().weights(),
            &[0.5, 0.0, 0.5]
        );
        assert!(matches!(
            convex_combine_c(&d0, &d1, -0.1),
            Err(LabError::LambdaOutOfRange(_))
        ));
        let other = Distribution::uniform(space(4));
        assert_eq!(
            convex_combine_c(&d0, &other, 0.5),
            Err(LabError::SpaceMismatch)
        );
    }

    #[test]
    fn entropy_examples() {
        let s = entropy_c(&Distribution::uniform(space(4)), EntropyFamily::Shannon).unwrap();
        assert!((s - 4f64.ln()).abs() < 1e-12 && (s - 1.386294).abs() < 1e-6);
        let delta = Distribution::point_mass(space(4), 1).unwrap();
        assert_eq!(entropy_c(&delta, EntropyFamily::Shannon).unwrap(), 0.0);
        let d = Distribution::new(space(2), vec![0.75, 0.25]).unwrap();
        let oracle = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((entropy_c(&d, EntropyFamily::Shannon).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn gibbs_examples() {
        let f = RandomFunction::new(space(2), vec![1.0, -1.0]).unwrap();
        let g = gibbs_distribution(&f, 1.0).unwrap();
        assert!((g.weights()[0] - 0.119203).abs() < 1e-6);
        assert!((g.weights()[1] - 0.880797).abs() < 1e-6);
        let flat = RandomFunction::new(space(5), vec![2.0; 5]).unwrap();
        assert!(gibbs_distribution(&flat, 0.7)
            .unwrap()
            .weights()
            .iter()
            .all(|w| (w - 0.2).abs() < 1e-15));
        let bounded = RandomFunction::new(space(3), vec![1.0, -0.3, 0.9]).unwrap();
        let hot = gibbs_distribution(&bounded, 1e6).unwrap();
        assert!(hot.weights().iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-5));
        assert!(gibbs_distribution(&f, -1.0).is_err());
    }

    #[test]
    fn kolmogorov_axioms_hold_for_random_distributions() {
        let mut r = rng::stream(9, 0);
        for m in [1, 2, 5, 8] {
            for _ in 0..50 {
                let d = Distribution::random(&mut r, space(m));
                assert!(d.weights().iter().all(|&w| w >= 0.0));
                let all: Vec<usize> = (0..m).collect();
                assert!((d.measure(&all) - 1.0).abs() <= 1e-10);
                let (left, right) = all.split_at(m / 2);
                assert!((d.measure(left) + d.measure(right) - d.measure(&all)).abs() < 1e-15);
                assert_eq!(d.measure(&[]), 0.0);
            }
        }
    }

    #[test]
    fn diagonal_embedding_matches_quantum_formulas() {
        let mut r = rng::stream(10, 0);
        for m in [2, 3, 7] {
            for _ in 0..20 {
                let d = Distribution::random(&mut r, space(m));
                let values: Vec<f64> = (0..m).map(|_| r.random_range(-3.0..3.0)).collect();
                let f = RandomFunction::new(space(m), values).unwrap();
                let classical = expectation(&d, &f).unwrap();
                let quantum = inner_product(&d.to_density(), &f.to_observable()).unwrap();
                assert!((classical - quantum).abs() <= 1e-10);
                let sc = entropy_c(&d, EntropyFamily::Shannon).unwrap();
                let sq = entropy_q(&d.to_density(), EntropyFamily::VonNeumann).unwrap();
                assert!((sc - sq).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn wire_format_round_trip() {
        let space = PhaseSpace::labelled(vec!["a".into(), "b".into()]).unwrap();
        let d = Distribution::new(space, vec![0.25, 0.75]).unwrap();
        let text = serde_json::to_string(&d).unwrap();
        let back: Distribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }
}
