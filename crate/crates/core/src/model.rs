//! Generative model parameters: likelihood (A), transitions (B),
//! context-conditioned preferences (C), initial states (D) and the policy
//! space, plus structural validation and the JSON model-file format.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::{conditional_entropy_term, SUM_TOLERANCE};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor};

/// Default upper bound on the number of enumerated policies.
pub const POLICY_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub num_factors: usize,
    pub states_per_factor: Vec<usize>,
    pub num_modalities: usize,
    pub outcomes_per_modality: Vec<usize>,
    /// Number of decision steps in a trial.
    pub trial_length: usize,
    /// Planning depth in steps.
    pub horizon: usize,
}

impl ModelShape {
    pub fn num_joint_states(&self) -> usize {
        self.states_per_factor.iter().product()
    }

    /// Likelihood dims for one modality: (outcome, s_F1, s_F2, ...).
    pub fn likelihood_dims(&self, modality: usize) -> Vec<usize> {
        let mut dims = vec![self.outcomes_per_modality[modality]];
        dims.extend(&self.states_per_factor);
        dims
    }

    /// Splits a row-major joint state index into per-factor indices.
    pub fn unravel(&self, mut joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.states_per_factor.len()];
        for (slot, n) in out.iter_mut().zip(&self.states_per_factor).rev() {
            *slot = joint % n;
            joint /= n;
        }
        out
    }

    pub fn ravel(&self, states: &[usize]) -> usize {
        states
            .iter()
            .zip(&self.states_per_factor)
            .fold(0, |acc, (s, n)| acc * n + s)
    }
}

/// Per-modality P(outcome | s_F1, ..., s_Fn).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LikelihoodTensor(pub Vec<Tensor>);

/// Per-factor, per-action matrices indexed (next_state, current_state).
/// Factors the agent does not control carry a single matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransitionSet(pub Vec<Vec<Matrix>>);

impl TransitionSet {
    pub fn num_actions(&self, factor: usize) -> usize {
        self.0[factor].len()
    }
}

/// Additive log-preferences per modality, indexed (outcome, context_state),
/// where the context is a latent state of `context_factor`. Larger values
/// are more preferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTensor {
    pub context_factor: usize,
    pub modalities: Vec<Tensor>,
}

impl PreferenceTensor {
    /// Preference column for one modality, mixed over a context belief.
    pub fn mixed_column(&self, modality: usize, context_belief: &[f64]) -> Vec<f64> {
        let c = &self.modalities[modality];
        let (outcomes, contexts) = (c.dims()[0], c.dims()[1]);
        (0..outcomes)
            .map(|o| {
                (0..contexts)
                    .map(|k| c.get(&[o, k]) * context_belief[k])
                    .sum()
            })
            .collect()
    }
}

/// Prior over each factor's initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InitialStateVector(pub Vec<Vec<f64>>);

/// A sequence of actions on the controllable factor, one per planning step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn first_action(&self) -> usize {
        self.0[0]
    }
}

/// All `num_actions^horizon` action sequences in lexicographic order.
pub fn enumerate_policies(num_actions: usize, horizon: usize) -> Result<Vec<Policy>> {
    enumerate_policies_capped(num_actions, horizon, POLICY_CAP)
}

pub fn enumerate_policies_capped(
    num_actions: usize,
    horizon: usize,
    cap: usize,
) -> Result<Vec<Policy>> {
    if num_actions == 0 || horizon == 0 {
        return Err(Error::invalid("policy enumeration needs at least one action and one step"));
    }
    let requested = (num_actions as u128)
        .checked_pow(horizon as u32)
        .unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::Capacity { requested, cap });
    }
    let mut out = Vec::with_capacity(requested as usize);
    let mut seq = vec![0usize; horizon];
    loop {
        out.push(Policy(seq.clone()));
        // odometer increment, last position fastest
        let mut pos = horizon;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < num_actions {
                break;
            }
            seq[pos] = 0;
        }
    }
}

/// One structural problem found by [`ModelParts::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroCount { what: String },
    HorizonExceedsTrial { horizon: usize, trial_length: usize },
    CountMismatch { what: String, expected: usize, found: usize },
    LikelihoodDims { modality: usize, expected: Vec<usize>, found: Vec<usize> },
    LikelihoodColumn { modality: usize, state: Vec<usize>, sum: f64 },
    NegativeOrNonFinite { tensor: String, detail: String },
    TransitionDims { factor: usize, action: usize, expected: usize, found: (usize, usize) },
    TransitionColumn { factor: usize, action: usize, column: usize, sum: f64 },
    NoActions { factor: usize },
    MultipleControlledFactors { factors: Vec<usize> },
    ContextFactorOutOfRange { factor: usize },
    PreferenceDims { modality: usize, expected: Vec<usize>, found: Vec<usize> },
    PreferencesFlat,
    InitialDims { factor: usize, expected: usize, found: usize },
    InitialColumn { factor: usize, sum: f64 },
    NoPolicies,
    PolicyLength { policy: usize, expected: usize, found: usize },
    PolicyAction { policy: usize, step: usize, action: usize, num_actions: usize },
    DuplicatePolicy { first: usize, second: usize },
    PolicyHorizon { policy_horizon: usize, horizon: usize },
    PolicySpace(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            ZeroCount { what } => write!(f, "shape: {what} must be at least 1"),
            HorizonExceedsTrial { horizon, trial_length } => write!(
                f,
                "shape: horizon {horizon} exceeds trial length {trial_length}"
            ),
            CountMismatch { what, expected, found } => {
                write!(f, "{what}: expected {expected}, found {found}")
            }
            LikelihoodDims { modality, expected, found } => write!(
                f,
                "A[modality {modality}]: dims {found:?}, expected {expected:?}"
            ),
            LikelihoodColumn { modality, state, sum } => write!(
                f,
                "A[modality {modality}] at state {state:?}: outcome column sums to {sum}"
            ),
            NegativeOrNonFinite { tensor, detail } => write!(f, "{tensor}: {detail}"),
            TransitionDims { factor, action, expected, found } => write!(
                f,
                "B[factor {factor}, action {action}]: dims {}x{}, expected {expected}x{expected}",
                found.0, found.1
            ),
            TransitionColumn { factor, action, column, sum } => write!(
                f,
                "B[factor {factor}, action {action}] column {column} sums to {sum}"
            ),
            NoActions { factor } => write!(f, "B[factor {factor}]: no transition matrices"),
            MultipleControlledFactors { factors } => write!(
                f,
                "B: factors {factors:?} all carry several actions; only one may be controlled"
            ),
            ContextFactorOutOfRange { factor } => {
                write!(f, "C: context factor {factor} does not exist")
            }
            PreferenceDims { modality, expected, found } => write!(
                f,
                "C[modality {modality}]: dims {found:?}, expected {expected:?}"
            ),
            PreferencesFlat => write!(f, "C: every modality's preferences are constant"),
            InitialDims { factor, expected, found } => write!(
                f,
                "D[factor {factor}]: length {found}, expected {expected}"
            ),
            InitialColumn { factor, sum } => write!(f, "D[factor {factor}] sums to {sum}"),
            NoPolicies => write!(f, "policies: empty policy set"),
            PolicyLength { policy, expected, found } => write!(
                f,
                "policy {policy}: length {found}, expected horizon {expected}"
            ),
            PolicyAction { policy, step, action, num_actions } => write!(
                f,
                "policy {policy} step {step}: action {action} out of range (0..{num_actions})"
            ),
            DuplicatePolicy { first, second } => {
                write!(f, "policies {first} and {second} are identical")
            }
            PolicyHorizon { policy_horizon, horizon } => write!(
                f,
                "policy_horizon {policy_horizon} differs from shape horizon {horizon}"
            ),
            PolicySpace(msg) => write!(f, "policies: {msg}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Unvalidated model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParts {
    pub shape: ModelShape,
    pub likelihood: LikelihoodTensor,
    pub transitions: TransitionSet,
    pub preferences: PreferenceTensor,
    pub initial: InitialStateVector,
    pub policies: Vec<Policy>,
}

fn column_ok(sum: f64) -> bool {
    (sum - 1.0).abs() <= SUM_TOLERANCE
}

fn bad_entries(values: &[f64]) -> Option<usize> {
    values.iter().position(|x| !x.is_finite() || *x < 0.0)
}

impl ModelParts {
    /// Reports every dimension and stochasticity violation.
    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let shape = &self.shape;

        if shape.num_factors == 0 {
            v.push(Violation::ZeroCount { what: "num_factors".into() });
        }
        if shape.num_modalities == 0 {
            v.push(Violation::ZeroCount { what: "num_modalities".into() });
        }
        if shape.trial_length == 0 {
            v.push(Violation::ZeroCount { what: "trial_length".into() });
        }
        if shape.horizon == 0 {
            v.push(Violation::ZeroCount { what: "horizon".into() });
        }
        if shape.horizon > shape.trial_length {
            v.push(Violation::HorizonExceedsTrial {
                horizon: shape.horizon,
                trial_length: shape.trial_length,
            });
        }
        for (f, n) in shape.states_per_factor.iter().enumerate() {
            if *n == 0 {
                v.push(Violation::ZeroCount { what: format!("states of factor {f}") });
            }
        }
        for (m, n) in shape.outcomes_per_modality.iter().enumerate() {
            if *n == 0 {
                v.push(Violation::ZeroCount { what: format!("outcomes of modality {m}") });
            }
        }
        if shape.states_per_factor.len() != shape.num_factors {
            v.push(Violation::CountMismatch {
                what: "shape.states_per_factor".into(),
                expected: shape.num_factors,
                found: shape.states_per_factor.len(),
            });
        }
        if shape.outcomes_per_modality.len() != shape.num_modalities {
            v.push(Violation::CountMismatch {
                what: "shape.outcomes_per_modality".into(),
                expected: shape.num_modalities,
                found: shape.outcomes_per_modality.len(),
            });
        }
        // Everything below indexes through the shape lists, so stop on a
        // malformed shape.
        if !v.is_empty() {
            return ValidationReport { violations: v };
        }

        self.validate_likelihood(&mut v);
        let controlled = self.validate_transitions(&mut v);
        self.validate_preferences(&mut v);
        self.validate_initial(&mut v);
        self.validate_policies(controlled, &mut v);
        ValidationReport { violations: v }
    }

    fn validate_likelihood(&self, v: &mut Vec<Violation>) {
        let shape = &self.shape;
        if self.likelihood.0.len() != shape.num_modalities {
            v.push(Violation::CountMismatch {
                what: "A modalities".into(),
                expected: shape.num_modalities,
                found: self.likelihood.0.len(),
            });
        }
        let joint = shape.num_joint_states();
        for (m, a) in self.likelihood.0.iter().enumerate().take(shape.num_modalities) {
            let expected = shape.likelihood_dims(m);
            if a.dims() != expected.as_slice() {
                v.push(Violation::LikelihoodDims {
                    modality: m,
                    expected,
                    found: a.dims().to_vec(),
                });
                continue;
            }
            if let Some(i) = bad_entries(a.data()) {
                v.push(Violation::NegativeOrNonFinite {
                    tensor: format!("A[modality {m}]"),
                    detail: format!("flat entry {i} is {}", a.data()[i]),
                });
                continue;
            }
            for s in 0..joint {
                let sum: f64 = (0..expected[0]).map(|o| a.data()[o * joint + s]).sum();
                if !column_ok(sum) {
                    v.push(Violation::LikelihoodColumn {
                        modality: m,
                        state: shape.unravel(s),
                        sum,
                    });
                }
            }
        }
    }

    /// Returns the controlled factor, if the transition set names one.
    fn validate_transitions(&self, v: &mut Vec<Violation>) -> Option<usize> {
        let shape = &self.shape;
        let b = &self.transitions.0;
        if b.len() != shape.num_factors {
            v.push(Violation::CountMismatch {
                what: "B factors".into(),
                expected: shape.num_factors,
                found: b.len(),
            });
        }
        let mut controlled = Vec::new();
        for (f, actions) in b.iter().enumerate().take(shape.num_factors) {
            let n = shape.states_per_factor[f];
            if actions.is_empty() {
                v.push(Violation::NoActions { factor: f });
            }
            if actions.len() > 1 {
                controlled.push(f);
            }
            for (a, m) in actions.iter().enumerate() {
                if m.rows() != n || m.cols() != n {
                    v.push(Violation::TransitionDims {
                        factor: f,
                        action: a,
                        expected: n,
                        found: (m.rows(), m.cols()),
                    });
                    continue;
                }
                for c in 0..n {
                    let col = m.column(c);
                    if let Some(r) = bad_entries(&col) {
                        v.push(Violation::NegativeOrNonFinite {
                            tensor: format!("B[factor {f}, action {a}]"),
                            detail: format!("entry ({r}, {c}) is {}", col[r]),
                        });
                        continue;
                    }
                    let sum: f64 = col.iter().sum();
                    if !column_ok(sum) {
                        v.push(Violation::TransitionColumn {
                            factor: f,
                            action: a,
                            column: c,
                            sum,
                        });
                    }
                }
            }
        }
        match controlled.len() {
            0 => Some(0),
            1 => Some(controlled[0]),
            _ => {
                v.push(Violation::MultipleControlledFactors { factors: controlled });
                None
            }
        }
    }

    fn validate_preferences(&self, v: &mut Vec<Violation>) {
        let shape = &self.shape;
        let c = &self.preferences;
        if c.context_factor >= shape.num_factors {
            v.push(Violation::ContextFactorOutOfRange { factor: c.context_factor });
            return;
        }
        if c.modalities.len() != shape.num_modalities {
            v.push(Violation::CountMismatch {
                what: "C modalities".into(),
                expected: shape.num_modalities,
                found: c.modalities.len(),
            });
        }
        let contexts = shape.states_per_factor[c.context_factor];
        let mut any_varies = false;
        for (m, t) in c.modalities.iter().enumerate().take(shape.num_modalities) {
            let expected = vec![shape.outcomes_per_modality[m], contexts];
            if t.dims() != expected.as_slice() {
                v.push(Violation::PreferenceDims {
                    modality: m,
                    expected,
                    found: t.dims().to_vec(),
                });
                continue;
            }
            if let Some(i) = t.data().iter().position(|x| !x.is_finite()) {
                v.push(Violation::NegativeOrNonFinite {
                    tensor: format!("C[modality {m}]"),
                    detail: format!("flat entry {i} is not finite"),
                });
                continue;
            }
            let first = t.data()[0];
            any_varies |= t.data().iter().any(|x| *x != first);
        }
        if !any_varies && !c.modalities.is_empty() {
            v.push(Violation::PreferencesFlat);
        }
    }

    fn validate_initial(&self, v: &mut Vec<Violation>) {
        let shape = &self.shape;
        let d = &self.initial.0;
        if d.len() != shape.num_factors {
            v.push(Violation::CountMismatch {
                what: "D factors".into(),
                expected: shape.num_factors,
                found: d.len(),
            });
        }
        for (f, p) in d.iter().enumerate().take(shape.num_factors) {
            let n = shape.states_per_factor[f];
            if p.len() != n {
                v.push(Violation::InitialDims { factor: f, expected: n, found: p.len() });
                continue;
            }
            if let Some(i) = bad_entries(p) {
                v.push(Violation::NegativeOrNonFinite {
                    tensor: format!("D[factor {f}]"),
                    detail: format!("entry {i} is {}", p[i]),
                });
                continue;
            }
            let sum: f64 = p.iter().sum();
            if !column_ok(sum) {
                v.push(Violation::InitialColumn { factor: f, sum });
            }
        }
    }

    fn validate_policies(&self, controlled: Option<usize>, v: &mut Vec<Violation>) {
        if self.policies.is_empty() {
            v.push(Violation::NoPolicies);
            return;
        }
        let num_actions = controlled
            .and_then(|f| self.transitions.0.get(f))
            .map(Vec::len);
        let mut seen: HashSet<&Policy> = HashSet::new();
        for (i, p) in self.policies.iter().enumerate() {
            if p.0.len() != self.shape.horizon {
                v.push(Violation::PolicyLength {
                    policy: i,
                    expected: self.shape.horizon,
                    found: p.0.len(),
                });
            }
            if let Some(n) = num_actions {
                for (step, a) in p.0.iter().enumerate() {
                    if *a >= n {
                        v.push(Violation::PolicyAction {
                            policy: i,
                            step,
                            action: *a,
                            num_actions: n,
                        });
                    }
                }
            }
            if !seen.insert(p) {
                let first = self.policies.iter().position(|q| q == p).unwrap_or(0);
                v.push(Violation::DuplicatePolicy { first, second: i });
            }
        }
    }
}

/// Validated, immutable generative model with the joint-state views the
/// engine works on precomputed.
#[derive(Debug, Clone)]
pub struct GenerativeModel {
    parts: ModelParts,
    control_factor: usize,
    joint_states: usize,
    /// Per modality, outcome × joint-state likelihood.
    joint_likelihood: Vec<Matrix>,
    /// Per modality, entropy of the outcome column at each joint state.
    joint_ambiguity: Vec<Vec<f64>>,
    /// Per action on the controlled factor, joint transition matrix.
    joint_transitions: Vec<Matrix>,
    joint_initial: Vec<f64>,
    /// Context-factor state of each joint state.
    context_of_joint: Vec<usize>,
}

impl GenerativeModel {
    pub fn new(parts: ModelParts) -> Result<Self> {
        let report = parts.validate();
        if !report.is_ok() {
            return Err(Error::Validation(report));
        }
        let shape = &parts.shape;
        let joint = shape.num_joint_states();
        let control_factor = (0..shape.num_factors)
            .find(|f| parts.transitions.0[*f].len() > 1)
            .unwrap_or(0);

        let joint_likelihood: Vec<Matrix> = parts
            .likelihood
            .0
            .iter()
            .map(|a| {
                let rows = a
                    .data()
                    .chunks(joint)
                    .map(<[f64]>::to_vec)
                    .collect::<Vec<_>>();
                Matrix::from_rows(rows).expect("validated likelihood dims")
            })
            .collect();
        let joint_ambiguity = joint_likelihood
            .iter()
            .map(|a| (0..joint).map(|s| conditional_entropy_term(&a.column(s))).collect())
            .collect();

        let num_actions = parts.transitions.0[control_factor].len();
        let joint_transitions = (0..num_actions)
            .map(|action| {
                parts
                    .transitions
                    .0
                    .iter()
                    .enumerate()
                    .map(|(f, mats)| {
                        if f == control_factor {
                            &mats[action]
                        } else {
                            &mats[0]
                        }
                    })
                    .fold(Matrix::identity(1), |acc, m| acc.kron(m))
            })
            .collect();

        let joint_initial = parts.initial.0.iter().fold(vec![1.0], |acc, d| {
            acc.iter()
                .flat_map(|a| d.iter().map(move |b| a * b))
                .collect()
        });
        let context_of_joint = (0..joint)
            .map(|s| shape.unravel(s)[parts.preferences.context_factor])
            .collect();

        Ok(GenerativeModel {
            control_factor,
            joint_states: joint,
            joint_likelihood,
            joint_ambiguity,
            joint_transitions,
            joint_initial,
            context_of_joint,
            parts,
        })
    }

    /// Re-runs validation; always ok for a constructed model.
    pub fn validate(&self) -> ValidationReport {
        self.parts.validate()
    }

    pub fn parts(&self) -> &ModelParts {
        &self.parts
    }

    pub fn shape(&self) -> &ModelShape {
        &self.parts.shape
    }

    pub fn policies(&self) -> &[Policy] {
        &self.parts.policies
    }

    pub fn likelihood(&self) -> &LikelihoodTensor {
        &self.parts.likelihood
    }

    pub fn transitions(&self) -> &TransitionSet {
        &self.parts.transitions
    }

    pub fn preferences(&self) -> &PreferenceTensor {
        &self.parts.preferences
    }

    pub fn initial(&self) -> &InitialStateVector {
        &self.parts.initial
    }

    pub fn control_factor(&self) -> usize {
        self.control_factor
    }

    pub fn num_actions(&self) -> usize {
        self.joint_transitions.len()
    }

    pub fn num_joint_states(&self) -> usize {
        self.joint_states
    }

    pub fn joint_likelihood(&self, modality: usize) -> &Matrix {
        &self.joint_likelihood[modality]
    }

    pub fn joint_ambiguity(&self, modality: usize) -> &[f64] {
        &self.joint_ambiguity[modality]
    }

    pub fn joint_transition(&self, action: usize) -> &Matrix {
        &self.joint_transitions[action]
    }

    pub fn joint_initial(&self) -> &[f64] {
        &self.joint_initial
    }

    /// Marginal over one factor of a joint-state distribution.
    pub fn factor_marginal(&self, joint: &[f64], factor: usize) -> Vec<f64> {
        let shape = self.shape();
        let n = shape.states_per_factor[factor];
        let inner: usize = shape.states_per_factor[factor + 1..].iter().product();
        let mut out = vec![0.0; n];
        for (s, p) in joint.iter().enumerate() {
            out[(s / inner) % n] += p;
        }
        out
    }

    /// Marginal over the preference-conditioning factor.
    pub fn context_marginal(&self, joint: &[f64]) -> Vec<f64> {
        let n = self.shape().states_per_factor[self.parts.preferences.context_factor];
        let mut out = vec![0.0; n];
        for (p, k) in joint.iter().zip(&self.context_of_joint) {
            out[*k] += p;
        }
        out
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            shape: self.parts.shape.clone(),
            likelihood: self.parts.likelihood.clone(),
            transitions: self.parts.transitions.clone(),
            preferences: self.parts.preferences.clone(),
            initial: self.parts.initial.clone(),
            policy_horizon: self.parts.shape.horizon,
        }
    }
}

/// On-disk model format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub shape: ModelShape,
    #[serde(rename = "A")]
    pub likelihood: LikelihoodTensor,
    #[serde(rename = "B")]
    pub transitions: TransitionSet,
    #[serde(rename = "C")]
    pub preferences: PreferenceTensor,
    #[serde(rename = "D")]
    pub initial: InitialStateVector,
    pub policy_horizon: usize,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Builds unvalidated parts, enumerating the policy space. Problems with
    /// the policy space itself are returned as violations.
    pub fn into_parts(self) -> std::result::Result<ModelParts, ValidationReport> {
        let mut violations = Vec::new();
        if self.policy_horizon != self.shape.horizon {
            violations.push(Violation::PolicyHorizon {
                policy_horizon: self.policy_horizon,
                horizon: self.shape.horizon,
            });
        }
        let controlled: Vec<usize> = self
            .transitions
            .0
            .iter()
            .enumerate()
            .filter(|(_, m)| m.len() > 1)
            .map(|(f, _)| f)
            .collect();
        let num_actions = match controlled.as_slice() {
            [] => 1,
            [f] => self.transitions.0[*f].len(),
            _ => {
                violations.push(Violation::MultipleControlledFactors { factors: controlled });
                1
            }
        };
        let policies = match enumerate_policies(num_actions, self.policy_horizon) {
            Ok(p) => p,
            Err(e) => {
                violations.push(Violation::PolicySpace(e.to_string()));
                Vec::new()
            }
        };
        if !violations.is_empty() {
            return Err(ValidationReport { violations });
        }
        Ok(ModelParts {
            shape: self.shape,
            likelihood: self.likelihood,
            transitions: self.transitions,
            preferences: self.preferences,
            initial: self.initial,
            policies,
        })
    }

    /// Parts plus full validation, in one report.
    pub fn into_model(self) -> Result<GenerativeModel> {
        let parts = self.into_parts().map_err(Error::Validation)?;
        GenerativeModel::new(parts)
    }
}
