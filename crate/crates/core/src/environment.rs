//! The generative process: scripted legal contexts, the true location, and
//! observation generation.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::argmax;
use crate::error::{Error, Result};
use crate::model::GenerativeModel;

pub const TRIAL_LENGTH: usize = 10;
pub const NUM_CONDITIONS: u8 = 7;

/// First-order context: what the centre line permits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneRule {
    Stay,
    Cross,
}

/// Second-order context: whether an emergency licenses yielding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Urgency {
    Normal,
    Emergency,
}

impl LaneRule {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl Urgency {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Exogenous context sequences for one experimental condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionScript {
    pub id: u8,
    pub context1: Vec<LaneRule>,
    pub context2: Vec<Urgency>,
}

impl ConditionScript {
    pub fn len(&self) -> usize {
        self.context1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.context1.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn repeat<T: Copy>(runs: &[(T, usize)]) -> Vec<T> {
    runs.iter()
        .flat_map(|(v, n)| std::iter::repeat_n(*v, *n))
        .collect()
}

/// The seven scripted conditions: full, dashed, then mixed centre lines,
/// each with and without an emergency.
pub fn build_condition(id: u8) -> Result<ConditionScript> {
    use LaneRule::*;
    use Urgency::*;
    let t = TRIAL_LENGTH;
    let (context1, context2) = match id {
        1 => (repeat(&[(Stay, t)]), repeat(&[(Normal, t)])),
        2 => (repeat(&[(Stay, t)]), repeat(&[(Emergency, t)])),
        3 => (repeat(&[(Cross, t)]), repeat(&[(Normal, t)])),
        4 => (repeat(&[(Cross, t)]), repeat(&[(Emergency, t)])),
        5 => (repeat(&[(Stay, 6), (Cross, 4)]), repeat(&[(Normal, t)])),
        6 => (repeat(&[(Stay, 6), (Cross, 4)]), repeat(&[(Emergency, t)])),
        7 => (
            repeat(&[(Stay, 6), (Cross, 4)]),
            repeat(&[(Normal, 3), (Emergency, 7)]),
        ),
        other => {
            return Err(Error::invalid(format!(
                "condition {other} does not exist (expected 1..={NUM_CONDITIONS})"
            )))
        }
    };
    Ok(ConditionScript { id, context1, context2 })
}

/// How observations are drawn from the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ObservationMode {
    /// Most likely outcome, lowest index on ties.
    Deterministic,
    /// Seeded draws. `stream` separates trials sharing a seed.
    Sampled { seed: u64, stream: u64 },
}

impl fmt::Display for ObservationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservationMode::Deterministic => write!(f, "deterministic"),
            ObservationMode::Sampled { seed, stream } => write!(f, "sampled(seed={seed}, stream={stream})"),
        }
    }
}

/// One outcome index per modality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationVector(pub Vec<usize>);

impl ObservationVector {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// True state of the world during a trial.
#[derive(Debug, Clone)]
pub struct WorldState {
    /// Zero-based location index.
    pub location: usize,
    /// Zero-based step index.
    pub step: usize,
    rng: Option<ChaCha8Rng>,
}

impl WorldState {
    pub fn new(location: usize, mode: ObservationMode) -> Self {
        let rng = match mode {
            ObservationMode::Deterministic => None,
            ObservationMode::Sampled { seed, stream } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                Some(rng)
            }
        };
        WorldState { location, step: 0, rng }
    }

    pub fn is_deterministic(&self) -> bool {
        self.rng.is_none()
    }

    fn draw(&mut self, probs: &[f64]) -> usize {
        match &mut self.rng {
            None => argmax(probs),
            Some(rng) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i;
                    }
                }
                // rounding left u past the last bucket
                probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
            }
        }
    }
}

/// The world side of a trial: it shares the agent's likelihood and its
/// transitions for the controlled factor.
#[derive(Debug, Clone, Copy)]
pub struct GenerativeProcess<'m> {
    model: &'m GenerativeModel,
}

impl<'m> GenerativeProcess<'m> {
    pub fn new(model: &'m GenerativeModel) -> Result<Self> {
        let shape = model.shape();
        if shape.num_factors != 3 || model.control_factor() != 0 {
            return Err(Error::invalid(
                "the scripted process needs three factors with the first one controlled",
            ));
        }
        if shape.states_per_factor[1] != 2 || shape.states_per_factor[2] != 2 {
            return Err(Error::invalid("scripted contexts are binary"));
        }
        Ok(GenerativeProcess { model })
    }

    /// Start location: the mode of the prior over the controlled factor.
    pub fn start_location(&self) -> usize {
        argmax(&self.model.initial().0[0])
    }

    pub fn trial_length(&self) -> usize {
        self.model.shape().trial_length
    }

    pub fn world(&self, mode: ObservationMode) -> WorldState {
        WorldState::new(self.start_location(), mode)
    }

    /// Joint hidden state at the world's current step.
    pub fn true_state(&self, world: &WorldState, script: &ConditionScript) -> Result<[usize; 3]> {
        let t = world.step;
        match (script.context1.get(t), script.context2.get(t)) {
            (Some(c1), Some(c2)) => Ok([world.location, c1.index(), c2.index()]),
            _ => Err(Error::TrialComplete(script.len())),
        }
    }

    /// Emits the observation for the world's current step.
    pub fn observe(&self, world: &mut WorldState, script: &ConditionScript) -> Result<ObservationVector> {
        let state = self.true_state(world, script)?;
        let joint = self.model.shape().ravel(&state);
        let outcomes = (0..self.model.shape().num_modalities)
            .map(|m| {
                let column = self.model.joint_likelihood(m).column(joint);
                world.draw(&column)
            })
            .collect();
        Ok(ObservationVector(outcomes))
    }

    /// Moves the true location under `action` and advances the clock.
    pub fn advance(&self, world: &mut WorldState, action: usize) -> Result<()> {
        let limit = self.trial_length();
        if world.step + 1 >= limit {
            return Err(Error::TrialComplete(limit));
        }
        let matrices = &self.model.transitions().0[0];
        let b = matrices
            .get(action)
            .ok_or_else(|| Error::invalid(format!("action {action} out of range")))?;
        let column = b.column(world.location);
        world.location = world.draw(&column);
        world.step += 1;
        Ok(())
    }
}

/// Applies `action`, then observes the new step.
pub fn env_step(
    world: &mut WorldState,
    script: &ConditionScript,
    action: usize,
    process: &GenerativeProcess<'_>,
) -> Result<ObservationVector> {
    process.advance(world, action)?;
    process.observe(world, script)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_model, ScenarioParams, HONK, LINE, SIREN, STAY, STEER};

    #[test]
    fn condition_scripts() {
        use LaneRule::*;
        use Urgency::*;
        let c1 = build_condition(1).unwrap();
        assert_eq!(c1.context1, vec![Stay; 10]);
        assert_eq!(c1.context2, vec![Normal; 10]);

        let c5 = build_condition(5).unwrap();
        assert_eq!(c5.context1, [vec![Stay; 6], vec![Cross; 4]].concat());
        assert_eq!(c5.context2, vec![Normal; 10]);

        let c7 = build_condition(7).unwrap();
        assert_eq!(c7.context1, [vec![Stay; 6], vec![Cross; 4]].concat());
        assert_eq!(c7.context2, [vec![Normal; 3], vec![Emergency; 7]].concat());

        assert!(build_condition(0).is_err());
        assert!(build_condition(8).is_err());
    }

    #[test]
    fn script_json() {
        let json = build_condition(3).unwrap().to_json().unwrap();
        assert!(json.starts_with(r#"{"id":3,"context1":["cross","#));
        let back: ConditionScript = serde_json::from_str(&json).unwrap();
        assert_eq!(back, build_condition(3).unwrap());
    }

    fn walk_to(process: &GenerativeProcess, world: &mut WorldState, location: usize) {
        while world.location < location {
            process.advance(world, STEER).unwrap();
        }
    }

    #[test]
    fn honk_at_location_three_under_stay() {
        let model = build_model(&ScenarioParams::default()).unwrap();
        let process = GenerativeProcess::new(&model).unwrap();
        let script = build_condition(1).unwrap();
        let mut world = process.world(ObservationMode::Deterministic);
        walk_to(&process, &mut world, 2);
        let obs = process.observe(&mut world, &script).unwrap();
        assert_eq!(obs.0[HONK], 1);
    }

    #[test]
    fn full_line_at_location_two_under_stay() {
        let model = build_model(&ScenarioParams::default()).unwrap();
        let process = GenerativeProcess::new(&model).unwrap();
        let script = build_condition(1).unwrap();
        for seed in 0..20 {
            let mut world = process.world(ObservationMode::Sampled { seed, stream: 1 });
            walk_to(&process, &mut world, 1);
            assert_eq!(process.observe(&mut world, &script).unwrap().0[LINE], 0);
        }
    }

    #[test]
    fn siren_on_in_emergency_when_deterministic() {
        let model = build_model(&ScenarioParams::default()).unwrap();
        let process = GenerativeProcess::new(&model).unwrap();
        let script = build_condition(2).unwrap();
        let mut world = process.world(ObservationMode::Deterministic);
        for step in 0..TRIAL_LENGTH {
            let obs = process.observe(&mut world, &script).unwrap();
            assert_eq!(obs.0[SIREN], 1);
            assert_eq!(obs.0[0], world.location);
            if step + 1 < TRIAL_LENGTH {
                process.advance(&mut world, STEER).unwrap();
            }
        }
    }

    #[test]
    fn env_step_overflows_at_trial_end() {
        let model = build_model(&ScenarioParams::default()).unwrap();
        let process = GenerativeProcess::new(&model).unwrap();
        let script = build_condition(4).unwrap();
        let mut world = process.world(ObservationMode::Deterministic);
        for _ in 1..TRIAL_LENGTH {
            env_step(&mut world, &script, STAY, &process).unwrap();
        }
        assert!(matches!(
            env_step(&mut world, &script, STAY, &process),
            Err(Error::TrialComplete(10))
        ));
    }

    #[test]
    fn steering_follows_the_lane_permutation() {
        let model = build_model(&ScenarioParams::default()).unwrap();
        let process = GenerativeProcess::new(&model).unwrap();
        let mut world = process.world(ObservationMode::Deterministic);
        let mut path = vec![world.location];
        for _ in 0..5 {
            process.advance(&mut world, STEER).unwrap();
            path.push(world.location);
        }
        assert_eq!(path, vec![0, 1, 2, 3, 2, 3]);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let model = build_model(&ScenarioParams::default()).unwrap();
        let process = GenerativeProcess::new(&model).unwrap();
        let script = build_condition(7).unwrap();
        let run = |seed| {
            let mut world = process.world(ObservationMode::Sampled { seed, stream: 7 });
            let mut out = vec![process.observe(&mut world, &script).unwrap()];
            for _ in 1..TRIAL_LENGTH {
                out.push(env_step(&mut world, &script, STAY, &process).unwrap());
            }
            out
        };
        assert_eq!(run(42), run(42));
        // the siren is noisy, so some seed must differ from another
        assert!((0..10).any(|s| run(s) != run(s + 100)));
    }
}
