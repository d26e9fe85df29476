//! The perception-action cycle: state inference under each policy,
//! expected free energy, policy precision, the policy posterior and action
//! selection.
//!
//! State inference runs on the joint state space (the product of all
//! factors). Each sweep passes forward messages through the policy's
//! transitions and backward messages through their transposes, and sweeps
//! repeat until the marginals stop moving. Timepoints after the current
//! step carry no likelihood, so their beliefs are pure predictions.

use serde::{Deserialize, Serialize};

use crate::belief::{kl_divergence, softmax, Categorical};
use crate::error::{Error, Result};
use crate::model::{GenerativeModel, Policy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Cap on state-inference sweeps.
    pub max_state_iterations: usize,
    /// Max-abs belief change that counts as converged.
    pub state_tolerance: f64,
    /// Prior rate β₀ of the precision; γ₀ = 1/β₀.
    pub beta_prior: f64,
    pub precision_iterations: usize,
    pub precision_tolerance: f64,
    /// Floor applied to likelihood entries during state inference.
    pub epsilon: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_state_iterations: 16,
            state_tolerance: 1e-4,
            beta_prior: 1.0,
            precision_iterations: 16,
            precision_tolerance: 1e-6,
            epsilon: 1e-16,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("state_tolerance", self.state_tolerance),
            ("beta_prior", self.beta_prior),
            ("precision_tolerance", self.precision_tolerance),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("engine {name} must be positive, got {v}")));
            }
        }
        if self.max_state_iterations == 0 || self.precision_iterations == 0 {
            return Err(Error::invalid("engine iteration counts must be positive"));
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let float = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("engine {key}: cannot parse {value:?}")))
        };
        let count = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("engine {key}: cannot parse {value:?}")))
        };
        match key {
            "max_state_iterations" => self.max_state_iterations = count()?,
            "state_tolerance" => self.state_tolerance = float()?,
            "beta_prior" => self.beta_prior = float()?,
            "precision_iterations" => self.precision_iterations = count()?,
            "precision_tolerance" => self.precision_tolerance = float()?,
            "epsilon" => self.epsilon = float()?,
            other => return Err(Error::invalid(format!("unknown engine key {other:?}"))),
        }
        self.validate()
    }
}

/// Beliefs under one policy over timepoints `0..=current_step + horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBeliefs {
    pub current_step: usize,
    /// Joint-state posterior per timepoint.
    pub joint: Vec<Vec<f64>>,
    /// Per timepoint, per factor marginal.
    pub factors: Vec<Vec<Categorical>>,
    pub iterations: usize,
    pub final_delta: f64,
    pub converged: bool,
}

impl PolicyBeliefs {
    pub fn marginal(&self, timepoint: usize, factor: usize) -> &Categorical {
        &self.factors[timepoint][factor]
    }
}

/// Beliefs for every policy in the model's policy list.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub policies: Vec<PolicyBeliefs>,
}

impl BeliefState {
    pub fn marginal(&self, policy: usize, factor: usize, timepoint: usize) -> &Categorical {
        self.policies[policy].marginal(timepoint, factor)
    }
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let total: f64 = v.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::InvalidState("belief lost all probability mass".into()));
    }
    v.iter_mut().for_each(|x| *x /= total);
    Ok(())
}

fn check_observation(model: &GenerativeModel, obs: &[usize]) -> Result<()> {
    let outcomes = &model.shape().outcomes_per_modality;
    if obs.len() != outcomes.len() {
        return Err(Error::invalid(format!(
            "observation has {} modalities, model has {}",
            obs.len(),
            outcomes.len()
        )));
    }
    for (m, (o, n)) in obs.iter().zip(outcomes).enumerate() {
        if o >= n {
            return Err(Error::invalid(format!(
                "outcome {o} out of range for modality {m} ({n} outcomes)"
            )));
        }
    }
    Ok(())
}

/// Posterior over hidden states under `policy`, given the observations so
/// far (one per elapsed step, the last being the current step) and the
/// actions already taken between them.
pub fn infer_states(
    model: &GenerativeModel,
    policy: &Policy,
    observations: &[Vec<usize>],
    past_actions: &[usize],
    config: &EngineConfig,
) -> Result<PolicyBeliefs> {
    let horizon = model.shape().horizon;
    if observations.is_empty() {
        return Err(Error::invalid("state inference needs at least one observation"));
    }
    if policy.0.len() != horizon {
        return Err(Error::invalid(format!(
            "policy length {} differs from horizon {horizon}",
            policy.0.len()
        )));
    }
    let current = observations.len() - 1;
    if past_actions.len() != current {
        return Err(Error::invalid(format!(
            "{} observations need {current} past actions, got {}",
            observations.len(),
            past_actions.len()
        )));
    }
    if let Some(a) = past_actions.iter().chain(&policy.0).find(|a| **a >= model.num_actions()) {
        return Err(Error::invalid(format!("action {a} out of range")));
    }
    for obs in observations {
        check_observation(model, obs)?;
    }

    let n = model.num_joint_states();
    let window = current + horizon + 1;

    let likelihood: Vec<Option<Vec<f64>>> = (0..window)
        .map(|tau| {
            observations.get(tau).map(|obs| {
                let mut lik = vec![1.0; n];
                for (m, o) in obs.iter().enumerate() {
                    let a = model.joint_likelihood(m);
                    for (s, l) in lik.iter_mut().enumerate() {
                        *l *= a.get(*o, s).max(config.epsilon);
                    }
                }
                lik
            })
        })
        .collect();
    // action taken on the transition out of timepoint tau
    let action_at = |tau: usize| {
        if tau < current {
            past_actions[tau]
        } else {
            policy.0[tau - current]
        }
    };

    // Start from pure predictions.
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(window);
    q.push(model.joint_initial().to_vec());
    for tau in 1..window {
        let next = model.joint_transition(action_at(tau - 1)).mul_vec(&q[tau - 1]);
        q.push(next);
    }

    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    let mut forward = vec![vec![0.0; n]; window];
    let mut backward = vec![vec![1.0; n]; window];
    while iterations < config.max_state_iterations {
        iterations += 1;

        for tau in 0..window {
            let mut msg = if tau == 0 {
                model.joint_initial().to_vec()
            } else {
                model.joint_transition(action_at(tau - 1)).mul_vec(&forward[tau - 1])
            };
            if let Some(lik) = &likelihood[tau] {
                msg.iter_mut().zip(lik).for_each(|(m, l)| *m *= l);
            }
            normalize(&mut msg)?;
            forward[tau] = msg;
        }
        for tau in (0..window.saturating_sub(1)).rev() {
            let mut weighted = backward[tau + 1].clone();
            if let Some(lik) = &likelihood[tau + 1] {
                weighted.iter_mut().zip(lik).for_each(|(w, l)| *w *= l);
            }
            let mut msg = model.joint_transition(action_at(tau)).tr_mul_vec(&weighted);
            normalize(&mut msg)?;
            backward[tau] = msg;
        }

        delta = 0.0;
        for tau in 0..window {
            let mut post: Vec<f64> = forward[tau]
                .iter()
                .zip(&backward[tau])
                .map(|(f, b)| f * b)
                .collect();
            normalize(&mut post)?;
            for (new, old) in post.iter().zip(&q[tau]) {
                delta = delta.max((new - old).abs());
            }
            q[tau] = post;
        }
        if delta < config.state_tolerance {
            break;
        }
    }

    let factors = q
        .iter()
        .map(|joint| {
            (0..model.shape().num_factors)
                .map(|f| Categorical::from_weights(model.factor_marginal(joint, f)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PolicyBeliefs {
        current_step: current,
        joint: q,
        factors,
        iterations,
        final_delta: delta,
        converged: delta < config.state_tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimepointEfe {
    pub risk: f64,
    pub ambiguity: f64,
}

/// Expected free energy of one policy, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEfe {
    pub total: f64,
    pub risk: f64,
    pub ambiguity: f64,
    pub per_timepoint: Vec<TimepointEfe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfeBreakdown {
    pub policies: Vec<PolicyEfe>,
}

impl EfeBreakdown {
    /// Breakdown with the given totals, each spread over a single timepoint
    /// as pure risk.
    pub fn from_totals(totals: &[f64]) -> Self {
        EfeBreakdown {
            policies: totals
                .iter()
                .map(|g| PolicyEfe {
                    total: *g,
                    risk: *g,
                    ambiguity: 0.0,
                    per_timepoint: vec![TimepointEfe { risk: *g, ambiguity: 0.0 }],
                })
                .collect(),
        }
    }

    pub fn totals(&self) -> Vec<f64> {
        self.policies.iter().map(|p| p.total).collect()
    }

    /// Per-policy free energy averaged over evaluated timepoints.
    pub fn per_timepoint_means(&self) -> Vec<f64> {
        self.policies
            .iter()
            .map(|p| p.total / p.per_timepoint.len().max(1) as f64)
            .collect()
    }
}

/// Risk plus ambiguity over the timepoints after `current_step`.
///
/// Risk is KL(predicted outcomes ‖ preferred outcomes), where the preferred
/// distribution is the softmax of the preference column mixed over the
/// predicted context belief. Ambiguity is the expected entropy of the
/// likelihood under the predicted states.
pub fn expected_free_energy(
    model: &GenerativeModel,
    beliefs: &PolicyBeliefs,
    current_step: usize,
) -> Result<PolicyEfe> {
    let horizon = model.shape().horizon;
    let last = current_step + horizon;
    if beliefs.joint.len() <= last {
        return Err(Error::InvalidState(format!(
            "beliefs cover timepoints 0..{}, need up to {last}",
            beliefs.joint.len()
        )));
    }
    let mut per_timepoint = Vec::with_capacity(horizon);
    for q in &beliefs.joint[current_step + 1..=last] {
        let context = model.context_marginal(q);
        let mut tp = TimepointEfe { risk: 0.0, ambiguity: 0.0 };
        for m in 0..model.shape().num_modalities {
            let predicted = model.joint_likelihood(m).mul_vec(q);
            let preferred = softmax(&model.preferences().mixed_column(m, &context))?;
            tp.risk += kl_divergence(&predicted, preferred.probs())?;
            tp.ambiguity += model
                .joint_ambiguity(m)
                .iter()
                .zip(q)
                .map(|(h, p)| h * p)
                .sum::<f64>();
        }
        per_timepoint.push(tp);
    }
    let risk: f64 = per_timepoint.iter().map(|t| t.risk).sum();
    let ambiguity: f64 = per_timepoint.iter().map(|t| t.ambiguity).sum();
    Ok(PolicyEfe {
        total: risk + ambiguity,
        risk,
        ambiguity,
        per_timepoint,
    })
}

/// softmax(−γ · G)
pub fn policy_posterior(efe: &EfeBreakdown, gamma: f64) -> Result<Categorical> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::invalid(format!("precision must be positive, got {gamma}")));
    }
    let scaled: Vec<f64> = efe.policies.iter().map(|p| -gamma * p.total).collect();
    softmax(&scaled)
}

/// Precision solve for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecord {
    pub gamma: f64,
    /// γ after each fixed-point iteration, starting from the prior.
    pub iterates: Vec<f64>,
    pub converged: bool,
    /// β hit its positive floor.
    pub clamped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecisionTrace {
    pub records: Vec<PrecisionRecord>,
    /// γ change per step; the first entry is measured from the prior γ₀.
    pub rates: Vec<f64>,
}

impl PrecisionTrace {
    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }
}

const BETA_FLOOR: f64 = 1e-6;

/// Solves β = β₀ + π(γ)·Ḡ with γ = 1/β, where π(γ) = softmax(−γG) and Ḡ is
/// each policy's free energy per evaluated timepoint. Confidence rises as
/// the free energy the agent expects to incur falls.
pub fn update_precision(efe: &EfeBreakdown, config: &EngineConfig) -> Result<(f64, PrecisionRecord)> {
    if efe.policies.is_empty() {
        return Err(Error::invalid("precision update over an empty policy set"));
    }
    if efe.policies.iter().any(|p| !p.total.is_finite()) {
        return Err(Error::invalid("expected free energy must be finite"));
    }
    let means = efe.per_timepoint_means();
    let mut beta = config.beta_prior;
    let mut iterates = vec![1.0 / beta];
    let mut converged = false;
    let mut clamped = false;
    for _ in 0..config.precision_iterations {
        let pi = policy_posterior(efe, 1.0 / beta)?;
        let mut next = config.beta_prior
            + pi.probs().iter().zip(&means).map(|(p, g)| p * g).sum::<f64>();
        if next <= BETA_FLOOR {
            next = BETA_FLOOR;
            clamped = true;
        }
        let delta = (next - beta).abs();
        beta = next;
        iterates.push(1.0 / beta);
        if delta < config.precision_tolerance {
            converged = true;
            break;
        }
    }
    let gamma = 1.0 / beta;
    Ok((
        gamma,
        PrecisionRecord {
            gamma,
            iterates,
            converged,
            clamped,
        },
    ))
}

/// Posterior mass on each first action.
pub fn first_action_marginal(posterior: &Categorical, policies: &[Policy]) -> Result<Vec<f64>> {
    if posterior.len() != policies.len() {
        return Err(Error::invalid(format!(
            "posterior over {} policies, {} policies given",
            posterior.len(),
            policies.len()
        )));
    }
    let num_actions = policies.iter().map(|p| p.first_action() + 1).max().unwrap_or(0);
    let mut marginal = vec![0.0; num_actions];
    for (p, policy) in posterior.probs().iter().zip(policies) {
        marginal[policy.first_action()] += p;
    }
    Ok(marginal)
}

/// Most probable first action; ties go to the lowest action index.
pub fn select_action(posterior: &Categorical, policies: &[Policy]) -> Result<usize> {
    let marginal = first_action_marginal(posterior, policies)?;
    Ok(crate::belief::argmax(&marginal))
}

/// Everything the agent computed in one step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Zero-based step index.
    pub step: usize,
    pub action: usize,
    pub beliefs: BeliefState,
    /// Per-factor posterior at the current step.
    pub current: Vec<Categorical>,
    pub efe: EfeBreakdown,
    pub posterior: Categorical,
    pub action_marginal: Vec<f64>,
    pub precision: PrecisionRecord,
    pub gamma_rate: f64,
}

/// Engine state for one trial. Holds the observation and action history;
/// the model is shared and immutable.
#[derive(Debug, Clone)]
pub struct Agent<'m> {
    model: &'m GenerativeModel,
    config: EngineConfig,
    observations: Vec<Vec<usize>>,
    actions: Vec<usize>,
    precision: PrecisionTrace,
}

impl<'m> Agent<'m> {
    pub fn new(model: &'m GenerativeModel, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Agent {
            model,
            config,
            observations: Vec::new(),
            actions: Vec::new(),
            precision: PrecisionTrace::default(),
        })
    }

    pub fn model(&self) -> &GenerativeModel {
        self.model
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn precision(&self) -> &PrecisionTrace {
        &self.precision
    }

    /// Takes the current observation and commits to an action.
    pub fn step(&mut self, observation: &[usize]) -> Result<StepOutput> {
        let trial_length = self.model.shape().trial_length;
        if self.observations.len() >= trial_length {
            return Err(Error::TrialComplete(trial_length));
        }
        check_observation(self.model, observation)?;
        self.observations.push(observation.to_vec());
        let step = self.observations.len() - 1;

        let result = self.evaluate(step);
        if result.is_err() {
            self.observations.pop();
        }
        let out = result?;
        self.actions.push(out.action);
        self.precision.records.push(out.precision.clone());
        self.precision.rates.push(out.gamma_rate);
        Ok(out)
    }

    fn evaluate(&self, step: usize) -> Result<StepOutput> {
        let policies = self.model.policies();
        let beliefs = BeliefState {
            policies: policies
                .iter()
                .map(|p| infer_states(self.model, p, &self.observations, &self.actions, &self.config))
                .collect::<Result<_>>()?,
        };
        let efe = EfeBreakdown {
            policies: beliefs
                .policies
                .iter()
                .map(|b| expected_free_energy(self.model, b, step))
                .collect::<Result<_>>()?,
        };
        let (gamma, precision) = update_precision(&efe, &self.config)?;
        let posterior = policy_posterior(&efe, gamma)?;
        let action_marginal = first_action_marginal(&posterior, policies)?;
        let action = crate::belief::argmax(&action_marginal);
        let previous = self
            .precision
            .records
            .last()
            .map_or(1.0 / self.config.beta_prior, |r| r.gamma);
        let current = beliefs.policies[0].factors[step].clone();
        Ok(StepOutput {
            step,
            action,
            beliefs,
            current,
            efe,
            posterior,
            action_marginal,
            precision,
            gamma_rate: gamma - previous,
        })
    }
}
