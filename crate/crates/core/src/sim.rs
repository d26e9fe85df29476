//! Runs the agent against a scripted condition and records the trace.

use crate::engine::{Agent, EngineConfig};
use crate::environment::{build_condition, env_step, ConditionScript, GenerativeProcess, ObservationMode};
use crate::error::{Error, Result};
use crate::model::GenerativeModel;
use crate::scenario::{build_model, ScenarioParams};
use crate::trace::{EfeRecord, StepRecord, TrialTrace, TrueState, SCHEMA};

pub fn run_trial(
    model: &GenerativeModel,
    params: &ScenarioParams,
    config: &EngineConfig,
    script: &ConditionScript,
    mode: ObservationMode,
) -> Result<TrialTrace> {
    let process = GenerativeProcess::new(model)?;
    let trial_length = process.trial_length();
    if script.len() < trial_length {
        return Err(Error::invalid(format!(
            "condition {} scripts {} steps, the trial needs {trial_length}",
            script.id,
            script.len()
        )));
    }
    let mut agent = Agent::new(model, config.clone())?;
    let mut world = process.world(mode);
    let mut observation = process.observe(&mut world, script)?;
    let mut steps = Vec::with_capacity(trial_length);

    for t in 0..trial_length {
        let out = agent.step(observation.as_slice())?;
        steps.push(StepRecord {
            step: t + 1,
            observation: observation.0.clone(),
            true_state: TrueState {
                location: world.location + 1,
                context1: script.context1[t],
                context2: script.context2[t],
            },
            beliefs: out.current.iter().map(|c| c.probs().to_vec()).collect(),
            policy_posterior: out.posterior.probs().to_vec(),
            efe: out
                .efe
                .policies
                .iter()
                .map(|g| EfeRecord {
                    total: g.total,
                    risk: g.risk,
                    ambiguity: g.ambiguity,
                })
                .collect(),
            gamma: out.precision.gamma,
            gamma_rate: out.gamma_rate,
            gamma_iterates: out.precision.iterates.clone(),
            gamma_converged: out.precision.converged,
            gamma_clamped: out.precision.clamped,
            action: out.action,
        });
        if t + 1 < trial_length {
            observation = env_step(&mut world, script, out.action, &process)?;
        }
    }

    Ok(TrialTrace {
        schema: SCHEMA.to_string(),
        condition: script.id,
        params: params.clone(),
        engine: config.clone(),
        mode,
        policies: model.policies().iter().map(|p| p.0.clone()).collect(),
        steps,
    })
}

/// Builds the scenario and plays one of the seven conditions.
pub fn run_condition(
    params: &ScenarioParams,
    config: &EngineConfig,
    condition: u8,
    mode: ObservationMode,
) -> Result<TrialTrace> {
    let script = build_condition(condition)?;
    let model = build_model(params)?;
    run_trial(&model, params, config, &script, mode)
}

/// All seven conditions in deterministic mode, in condition order.
pub fn run_all_deterministic(params: &ScenarioParams, config: &EngineConfig) -> Result<Vec<TrialTrace>> {
    let model = build_model(params)?;
    (1..=crate::environment::NUM_CONDITIONS)
        .map(|id| {
            let script = build_condition(id)?;
            run_trial(&model, params, config, &script, ObservationMode::Deterministic)
        })
        .collect()
}
