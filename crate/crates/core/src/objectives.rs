//! Type-one (linear) and type-two (free-energy) landscape functions.
//!
//! Type one: J = ⟨state, O⟩. Type two: J = −⟨state, O⟩ + T·S(state), the
//! negated free energy, concave whenever S is. Both are maximized.

use serde::{Deserialize, Serialize};

use crate::channels::ControlMap;
use crate::classical::{entropy_c, expectation, free_energy_optimum_c, RandomFunction};
use crate::entropy::EntropyFamily;
use crate::error::{LabError, Result};
use crate::linalg::CMatrix;
use crate::quantum::{
    check_temperature, entropy_q, free_energy_optimum, inner_product, DensityMatrix,
    HermitianOperand, Observable,
};
use crate::state::{Regime, State, StateGradient};
use crate::tolerances::TOLERANCES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectiveObservable {
    Quantum(Observable),
    Classical(RandomFunction),
}

impl From<Observable> for ObjectiveObservable {
    fn from(o: Observable) -> Self {
        Self::Quantum(o)
    }
}

impl From<RandomFunction> for ObjectiveObservable {
    fn from(f: RandomFunction) -> Self {
        Self::Classical(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    TypeOne,
    TypeTwo {
        temperature: f64,
        entropy: EntropyFamily,
    },
}

/// Wire form: `{"regime", "kind", "observable", "temperature"?, "entropy"?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub observable: ObjectiveObservable,
}

impl ObjectiveSpec {
    pub fn type_one(observable: impl Into<ObjectiveObservable>) -> Self {
        Self {
            kind: ObjectiveKind::TypeOne,
            observable: observable.into(),
        }
    }

    pub fn type_two(
        observable: impl Into<ObjectiveObservable>,
        temperature: f64,
        entropy: EntropyFamily,
    ) -> Result<Self> {
        check_temperature(temperature)?;
        Ok(Self {
            kind: ObjectiveKind::TypeTwo {
                temperature,
                entropy,
            },
            observable: observable.into(),
        })
    }

    pub fn regime(&self) -> Regime {
        match self.observable {
            ObjectiveObservable::Quantum(_) => Regime::Quantum,
            ObjectiveObservable::Classical(_) => Regime::Classical,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, ObjectiveKind::TypeOne)
    }

    /// Number of cells or Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        match &self.observable {
            ObjectiveObservable::Quantum(o) => o.dim(),
            ObjectiveObservable::Classical(f) => f.values().len(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SpecRepr {
    regime: Regime,
    kind: KindTag,
    observable: ObjectiveObservable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entropy: Option<EntropyFamily>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
enum KindTag {
    TypeOne,
    TypeTwo,
}

impl TryFrom<SpecRepr> for ObjectiveSpec {
    type Error = LabError;

    fn try_from(r: SpecRepr) -> Result<Self> {
        let spec = match (r.kind, r.temperature) {
            (KindTag::TypeOne, None) => Self::type_one(r.observable),
            (KindTag::TypeOne, Some(_)) => {
                return Err(LabError::InvalidParameter(
                    "temperature is only meaningful for typeTwo".into(),
                ))
            }
            (KindTag::TypeTwo, None) => {
                return Err(LabError::InvalidParameter(
                    "typeTwo objectives need a temperature".into(),
                ))
            }
            (KindTag::TypeTwo, Some(t)) => {
                let entropy = r.entropy.unwrap_or(match r.regime {
                    Regime::Quantum => EntropyFamily::VonNeumann,
                    Regime::Classical => EntropyFamily::Shannon,
                });
                Self::type_two(r.observable, t, entropy)?
            }
        };
        if spec.regime() != r.regime {
            return Err(LabError::RegimeMismatch);
        }
        Ok(spec)
    }
}

impl From<ObjectiveSpec> for SpecRepr {
    fn from(s: ObjectiveSpec) -> Self {
        let regime = s.regime();
        let (kind, temperature, entropy) = match s.kind {
            ObjectiveKind::TypeOne => (KindTag::TypeOne, None, None),
            ObjectiveKind::TypeTwo {
                temperature,
                entropy,
            } => (KindTag::TypeTwo, Some(temperature), Some(entropy)),
        };
        Self {
            regime,
            kind,
            observable: s.observable,
            temperature,
            entropy,
        }
    }
}

pub fn evaluate(spec: &ObjectiveSpec, state: &State) -> Result<f64> {
    let (mean, entropy) = match (&spec.observable, state) {
        (ObjectiveObservable::Quantum(o), State::Quantum(rho)) => {
            let mean = inner_product(rho, o)?;
            let s = match spec.kind {
                ObjectiveKind::TypeOne => 0.0,
                ObjectiveKind::TypeTwo { entropy, .. } => entropy_q(rho, entropy)?,
            };
            (mean, s)
        }
        (ObjectiveObservable::Classical(f), State::Classical(d)) => {
            let mean = expectation(d, f)?;
            let s = match spec.kind {
                ObjectiveKind::TypeOne => 0.0,
                ObjectiveKind::TypeTwo { entropy, .. } => entropy_c(d, entropy)?,
            };
            (mean, s)
        }
        _ => return Err(LabError::RegimeMismatch),
    };
    Ok(match spec.kind {
        ObjectiveKind::TypeOne => mean,
        ObjectiveKind::TypeTwo { temperature, .. } => -mean + temperature * entropy,
    })
}

/// Global maximum of the objective over the full state space.
pub fn optimum_value(spec: &ObjectiveSpec) -> Result<f64> {
    match (&spec.observable, spec.kind) {
        (ObjectiveObservable::Quantum(o), ObjectiveKind::TypeOne) => Ok(o.spectrum().max()),
        (ObjectiveObservable::Classical(f), ObjectiveKind::TypeOne) => {
            Ok(f.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        }
        (obs, ObjectiveKind::TypeTwo { temperature, entropy }) if entropy.is_logarithmic() => match obs {
            ObjectiveObservable::Quantum(o) => free_energy_optimum(o, temperature),
            ObjectiveObservable::Classical(f) => free_energy_optimum_c(f, temperature),
        },
        _ => Err(LabError::InvalidParameter(
            "closed-form optimum is only known for type-one and logarithmic-entropy type-two objectives".into(),
        )),
    }
}

/// State-space gradient together with whether the state was regularized.
#[derive(Debug, Clone)]
pub struct GradientOutcome {
    pub gradient: StateGradient,
    pub regularized: bool,
}

/// dJ/dstate. Type one: the observable. Type two: −O + T·S'(state), which
/// needs eigenvalues (weights) ≥ the entropy floor for singular families.
pub fn gradient_state(spec: &ObjectiveSpec, state: &State) -> Result<StateGradient> {
    gradient_with_floor(spec, state, false).map(|g| g.gradient)
}

/// As [`gradient_state`], but a state below the entropy floor is mixed with
/// the maximally mixed state (weight n·floor) first and the outcome flagged.
pub fn gradient_state_regularized(spec: &ObjectiveSpec, state: &State) -> Result<GradientOutcome> {
    gradient_with_floor(spec, state, true)
}

fn gradient_with_floor(
    spec: &ObjectiveSpec,
    state: &State,
    regularize: bool,
) -> Result<GradientOutcome> {
    let floor = TOLERANCES.entropy_floor;
    match (&spec.observable, state, spec.kind) {
        (ObjectiveObservable::Quantum(o), State::Quantum(rho), kind) => {
            if o.dim() != rho.dim() {
                return Err(LabError::DimensionMismatch {
                    expected: o.dim(),
                    found: rho.dim(),
                });
            }
            let ObjectiveKind::TypeTwo {
                temperature,
                entropy,
            } = kind
            else {
                return Ok(GradientOutcome {
                    gradient: StateGradient::Quantum(o.matrix().clone()),
                    regularized: false,
                });
            };
            let mut sd = rho.spectrum();
            let mut regularized = false;
            if singular_at_boundary(entropy) && sd.min() < floor {
                if !regularize {
                    return Err(LabError::SingularState {
                        min_eigenvalue: sd.min(),
                    });
                }
                let n = rho.dim() as f64;
                let w = n * floor;
                sd.eigenvalues
                    .apply(|l| *l = (1.0 - w) * l.max(0.0) + w / n);
                regularized = true;
            }
            let ds: CMatrix = sd.map(|l| entropy.derivative(l.max(0.0)));
            let g = ds.scale(temperature) - o.matrix();
            Ok(GradientOutcome {
                gradient: StateGradient::Quantum(g),
                regularized,
            })
        }
        (ObjectiveObservable::Classical(f), State::Classical(d), kind) => {
            if f.space() != d.space() {
                return Err(LabError::SpaceMismatch);
            }
            let ObjectiveKind::TypeTwo {
                temperature,
                entropy,
            } = kind
            else {
                return Ok(GradientOutcome {
                    gradient: StateGradient::Classical(f.values().to_vec()),
                    regularized: false,
                });
            };
            let mut p = d.weights().to_vec();
            let mut regularized = false;
            let low = p.iter().cloned().fold(f64::INFINITY, f64::min);
            if singular_at_boundary(entropy) && low < floor {
                if !regularize {
                    return Err(LabError::SingularState {
                        min_eigenvalue: low,
                    });
                }
                let m = p.len() as f64;
                let w = m * floor;
                p.iter_mut().for_each(|x| *x = (1.0 - w) * *x + w / m);
                regularized = true;
            }
            let g = p
                .iter()
                .zip(f.values())
                .map(|(&pi, &v)| -v + temperature * entropy.derivative(pi))
                .collect();
            Ok(GradientOutcome {
                gradient: StateGradient::Classical(g),
                regularized,
            })
        }
        _ => Err(LabError::RegimeMismatch),
    }
}

fn singular_at_boundary(entropy: EntropyFamily) -> bool {
    match entropy {
        EntropyFamily::VonNeumann | EntropyFamily::Shannon => true,
        EntropyFamily::Tsallis { q } => q < 1.0,
    }
}

/// How control gradients are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GradientMethod {
    /// Analytic chain rule when the map provides one, otherwise differences.
    Auto,
    FiniteDifference,
}

/// J ∘ ξ as a function of the controls.
#[derive(Clone, Copy)]
pub struct ControlledObjective<'a> {
    pub spec: &'a ObjectiveSpec,
    pub map: &'a dyn ControlMap,
    pub method: GradientMethod,
}

impl<'a> ControlledObjective<'a> {
    pub fn new(spec: &'a ObjectiveSpec, map: &'a dyn ControlMap) -> Result<Self> {
        if spec.regime() != map.regime() {
            return Err(LabError::RegimeMismatch);
        }
        Ok(Self {
            spec,
            map,
            method: GradientMethod::Auto,
        })
    }

    pub fn with_method(mut self, method: GradientMethod) -> Self {
        self.method = method;
        self
    }

    pub fn value(&self, params: &[f64]) -> Result<f64> {
        let state = self.map.state(params)?;
        evaluate(self.spec, &state)
    }

    /// Gradient plus whether any state regularization happened.
    pub fn gradient_outcome(&self, params: &[f64]) -> Result<(Vec<f64>, bool)> {
        if self.method == GradientMethod::Auto {
            let state = self.map.state(params)?;
            let outcome = gradient_state_regularized(self.spec, &state)?;
            if let Some(g) = self.map.pullback(params, &outcome.gradient) {
                return Ok((g?, outcome.regularized));
            }
        }
        Ok((self.finite_difference(params, TOLERANCES.fd_step)?, false))
    }

    pub fn gradient(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.gradient_outcome(params).map(|(g, _)| g)
    }

    pub fn finite_difference(&self, params: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut probe = params.to_vec();
        let mut out = Vec::with_capacity(params.len());
        for k in 0..params.len() {
            probe[k] = params[k] + h;
            let plus = self.value(&probe);
            probe[k] = params[k] - h;
            let minus = self.value(&probe);
            probe[k] = params[k];
            let (plus, minus) = (plus.map_err(eval_failure)?, minus.map_err(eval_failure)?);
            out.push((plus - minus) / (2.0 * h));
        }
        Ok(out)
    }
}

fn eval_failure(e: LabError) -> LabError {
    match e {
        LabError::EvaluationFailure(_) => e,
        other => LabError::EvaluationFailure(other.to_string()),
    }
}

/// d J(ξ(u)) / du; see [`ControlledObjective::gradient`].
pub fn gradient_controls(
    spec: &ObjectiveSpec,
    map: &dyn ControlMap,
    params: &[f64],
) -> Result<Vec<f64>> {
    ControlledObjective::new(spec, map)?.gradient(params)
}

/// Random Hermitian-basis direction in the tangent space at a state, or a
/// zero-sum vector for distributions. Used by gradient checks.
pub fn tangent_direction<R: rand::Rng + ?Sized>(rng: &mut R, state: &State) -> StateGradient {
    match state {
        State::Quantum(rho) => {
            let h = crate::linalg::random_hermitian(rng, rho.dim());
            StateGradient::Quantum(crate::linalg::traceless_part(&h))
        }
        State::Classical(d) => {
            let v: Vec<f64> = (0..d.weights().len())
                .map(|_| rng.sample(rand_distr::StandardNormal))
                .collect();
            StateGradient::Classical(v).tangential()
        }
    }
}

/// state + t·direction, assuming the result stays a state.
pub fn displace(state: &State, direction: &StateGradient, t: f64) -> Result<State> {
    match (state, direction) {
        (State::Quantum(rho), StateGradient::Quantum(d)) => Ok(State::Quantum(DensityMatrix::new(
            rho.matrix() + d.scale(t),
        )?)),
        (State::Classical(p), StateGradient::Classical(d)) => {
            let w = p.weights().iter().zip(d).map(|(a, b)| a + t * b).collect();
            Ok(State::Classical(crate::classical::Distribution::new(
                p.space().clone(),
                w,
            )?))
        }
        _ => Err(LabError::RegimeMismatch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{Distribution, PhaseSpace};
    use crate::quantum::{gibbs_state, pauli};

    #[test]
    fn type_one_quantum_example() {
        let spec = ObjectiveSpec::type_one(Observable::diagonal(&[1.0, -1.0]));
        let rho = State::Quantum(DensityMatrix::diagonal(&[1.0, 0.0]).unwrap());
        assert_eq!(evaluate(&spec, &rho).unwrap(), 1.0);
    }

    #[test]
    fn type_two_at_gibbs_state_is_the_free_energy_optimum() {
        let spec = ObjectiveSpec::type_two(pauli('z'), 1.0, EntropyFamily::VonNeumann).unwrap();
        let g = State::Quantum(gibbs_state(&pauli('z'), 1.0).unwrap());
        let e = std::f64::consts::E;
        let oracle = (e + e.recip()).ln();
        assert!((evaluate(&spec, &g).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 1.126928).abs() < 1e-6);
    }

    #[test]
    fn type_two_classical_constant_observable() {
        let space = PhaseSpace::new(5).unwrap();
        let f = RandomFunction::new(space.clone(), vec![2.0; 5]).unwrap();
        let spec = ObjectiveSpec::type_two(f, 0.5, EntropyFamily::Shannon).unwrap();
        let uniform = State::Classical(Distribution::uniform(space.clone()));
        let expect = -2.0 + 0.5 * 5f64.ln();
        assert!((evaluate(&spec, &uniform).unwrap() - expect).abs() < 1e-14);
        assert!((optimum_value(&spec).unwrap() - expect).abs() < 1e-14);
        let delta = State::Classical(Distribution::point_mass(space, 0).unwrap());
        assert!((evaluate(&spec, &delta).unwrap() + 2.0).abs() < 1e-15);
    }

    #[test]
    fn regime_mismatch_is_an_error() {
        let spec = ObjectiveSpec::type_one(pauli('z'));
        let d = State::Classical(Distribution::uniform(PhaseSpace::new(2).unwrap()));
        assert_eq!(evaluate(&spec, &d), Err(LabError::RegimeMismatch));
    }

    #[test]
    fn type_one_gradient_is_the_observable() {
        let o = pauli('x');
        let spec = ObjectiveSpec::type_one(o.clone());
        let g = gradient_state(&spec, &State::Quantum(DensityMatrix::maximally_mixed(2))).unwrap();
        assert_eq!(g, StateGradient::Quantum(o.matrix().clone()));
    }

    #[test]
    fn type_two_gradient_at_gibbs_is_proportional_to_identity() {
        let o = Observable::diagonal(&[0.3, -1.2, 2.0]);
        let t = 0.8;
        let spec = ObjectiveSpec::type_two(o.clone(), t, EntropyFamily::VonNeumann).unwrap();
        let g = gradient_state(&spec, &State::Quantum(gibbs_state(&o, t).unwrap())).unwrap();
        // −O − T(log ρ* + I) = (T ln Z − T)·I with ln Z = ln Σ e^{−o/T}
        let ln_z: f64 = [0.3f64, -1.2, 2.0]
            .iter()
            .map(|v| (-v / t).exp())
            .sum::<f64>()
            .ln();
        let StateGradient::Quantum(m) = &g else {
            panic!()
        };
        for i in 0..3 {
            assert!((m[(i, i)].re - (t * ln_z - t)).abs() < 1e-12);
        }
        assert!(g.tangential().max_abs() <= 1e-9);
    }

    #[test]
    fn type_two_classical_gradient_vanishes_tangentially_at_uniform() {
        let space = PhaseSpace::new(4).unwrap();
        let f = RandomFunction::new(space.clone(), vec![-1.5; 4]).unwrap();
        let spec = ObjectiveSpec::type_two(f, 2.0, EntropyFamily::Shannon).unwrap();
        let g = gradient_state(&spec, &State::Classical(Distribution::uniform(space))).unwrap();
        assert!(g.tangential().max_abs() < 1e-15);
    }

    #[test]
    fn singular_states_need_regularization() {
        let spec = ObjectiveSpec::type_two(pauli('z'), 1.0, EntropyFamily::VonNeumann).unwrap();
        let pure = State::Quantum(DensityMatrix::diagonal(&[1.0, 0.0]).unwrap());
        assert!(matches!(
            gradient_state(&spec, &pure),
            Err(LabError::SingularState { .. })
        ));
        let out = gradient_state_regularized(&spec, &pure).unwrap();
        assert!(out.regularized);
        assert!(out.gradient.max_abs().is_finite());
        let tsallis =
            ObjectiveSpec::type_two(pauli('z'), 1.0, EntropyFamily::tsallis(2.0).unwrap()).unwrap();
        assert!(gradient_state(&tsallis, &pure).is_ok());
    }

    #[test]
    fn spec_json_round_trip_and_validation() {
        let spec =
            ObjectiveSpec::type_two(pauli('z'), 1.5, EntropyFamily::tsallis(2.0).unwrap()).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains(r#""kind":"typeTwo""#) && text.contains(r#""regime":"quantum""#));
        assert_eq!(serde_json::from_str::<ObjectiveSpec>(&text).unwrap(), spec);

        let missing_t = r#"{"regime":"classical","kind":"typeTwo","observable":{"values":[1,2]}}"#;
        assert!(serde_json::from_str::<ObjectiveSpec>(missing_t).is_err());
        let mismatch = r#"{"regime":"quantum","kind":"typeOne","observable":{"values":[1,2]}}"#;
        assert!(serde_json::from_str::<ObjectiveSpec>(mismatch).is_err());
        let classical = r#"{"regime":"classical","kind":"typeOne","observable":{"values":[1,2]}}"#;
        assert!(serde_json::from_str::<ObjectiveSpec>(classical).is_ok());
    }
}
