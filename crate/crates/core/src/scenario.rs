//! The lane-yield scenario: an autonomous car in the left lane must decide
//! whether to cross a centre line into the right lane, weighing the line
//! marking, a possible siren, and the chance of being honked at.
//!
//! Factors: location (4), lane rule stay/cross (2), urgency
//! normal/emergency (2). Modalities: seen location (4), line full/dashed
//! (2), siren off/on (2), honk off/on (2). Only location is controlled,
//! by the actions stay and steer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    enumerate_policies, GenerativeModel, InitialStateVector, LikelihoodTensor, ModelParts,
    ModelShape, PreferenceTensor, TransitionSet,
};
use crate::tensor::{Matrix, Tensor};

pub const NUM_LOCATIONS: usize = 4;

// factors
pub const LOCATION: usize = 0;
pub const LANE_RULE: usize = 1;
pub const URGENCY: usize = 2;

// modalities (LOCATION doubles as the seen-location modality)
pub const LINE: usize = 1;
pub const SIREN: usize = 2;
pub const HONK: usize = 3;

// actions on the location factor
pub const STAY: usize = 0;
pub const STEER: usize = 1;

// outcome and state orderings
pub const FULL: usize = 0;
pub const DASHED: usize = 1;
pub const OFF: usize = 0;
pub const ON: usize = 1;
pub const NORMAL: usize = 0;
pub const EMERGENCY: usize = 1;
const RULE_STAY: usize = 0;

/// Target lane, zero-based.
pub const TARGET: usize = 3;
/// Crossing position where a honk can occur, zero-based.
pub const CROSSING: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    /// P(siren off | normal) = P(siren on | emergency).
    pub siren_reliability: f64,
    /// Log-preference for the target lane in a normal context.
    pub pref_target_normal: f64,
    /// Log-preference for the target lane in an emergency.
    pub pref_target_emergency: f64,
    /// Log-preference for hearing a honk.
    pub pref_honk_on: f64,
    /// Per-step switch probability of both legal contexts in the agent's model.
    pub context_switch_prob: f64,
    pub horizon: usize,
    pub trial_length: usize,
}

impl Default for ScenarioParams {
    /// The calibrated defaults; see `calibration/sweep.csv`.
    fn default() -> Self {
        ScenarioParams {
            siren_reliability: 0.875,
            pref_target_normal: 0.5,
            pref_target_emergency: 4.0,
            pref_honk_on: -4.0,
            context_switch_prob: 0.05,
            horizon: 4,
            trial_length: 10,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, p: f64| {
            if p > 0.0 && p < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie strictly between 0 and 1, got {p}")))
            }
        };
        open_unit("siren_reliability", self.siren_reliability)?;
        open_unit("context_switch_prob", self.context_switch_prob)?;
        let prefs = [self.pref_target_normal, self.pref_target_emergency, self.pref_honk_on];
        if prefs.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("preferences must be finite"));
        }
        if self.pref_target_normal <= 0.0 {
            return Err(Error::invalid("pref_target_normal must be positive"));
        }
        if self.pref_target_emergency <= self.pref_target_normal {
            return Err(Error::invalid(
                "pref_target_emergency must exceed pref_target_normal",
            ));
        }
        // zero is allowed so the honk-aversion mechanism can be switched off
        if self.pref_honk_on > 0.0 {
            return Err(Error::invalid("pref_honk_on must not be positive"));
        }
        if self.horizon == 0 || self.trial_length == 0 {
            return Err(Error::invalid("horizon and trial_length must be positive"));
        }
        if self.horizon > self.trial_length {
            return Err(Error::invalid("horizon cannot exceed trial_length"));
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let float = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("param {key}: cannot parse {value:?}")))
        };
        let count = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("param {key}: cannot parse {value:?}")))
        };
        match key {
            "siren_reliability" => self.siren_reliability = float()?,
            "pref_target_normal" => self.pref_target_normal = float()?,
            "pref_target_emergency" => self.pref_target_emergency = float()?,
            "pref_honk_on" => self.pref_honk_on = float()?,
            "context_switch_prob" => self.context_switch_prob = float()?,
            "horizon" => self.horizon = count()?,
            "trial_length" => self.trial_length = count()?,
            other => return Err(Error::invalid(format!("unknown scenario param {other:?}"))),
        }
        Ok(())
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            num_factors: 3,
            states_per_factor: vec![NUM_LOCATIONS, 2, 2],
            num_modalities: 4,
            outcomes_per_modality: vec![NUM_LOCATIONS, 2, 2, 2],
            trial_length: self.trial_length,
            horizon: self.horizon,
        }
    }
}

/// Likelihood per modality, indexed (outcome, location, lane rule, urgency).
pub fn build_likelihood(params: &ScenarioParams) -> LikelihoodTensor {
    let dims = |outcomes| vec![outcomes, NUM_LOCATIONS, 2, 2];
    let mut location = Tensor::zeros(dims(NUM_LOCATIONS));
    let mut line = Tensor::zeros(dims(2));
    let mut siren = Tensor::zeros(dims(2));
    let mut honk = Tensor::zeros(dims(2));
    let r = params.siren_reliability;

    for loc in 0..NUM_LOCATIONS {
        for rule in 0..2 {
            for urgency in 0..2 {
                let s = [loc, rule, urgency];
                let at = |o: usize| [o, s[0], s[1], s[2]];

                location.set(&at(loc), 1.0);

                // the line is only visible while at or past the decision point
                if loc == 0 || loc == TARGET {
                    line.set(&at(FULL), 0.5);
                    line.set(&at(DASHED), 0.5);
                } else {
                    line.set(&at(if rule == RULE_STAY { FULL } else { DASHED }), 1.0);
                }

                let p_on = if urgency == EMERGENCY { r } else { 1.0 - r };
                siren.set(&at(OFF), 1.0 - p_on);
                siren.set(&at(ON), p_on);

                let honked = loc == CROSSING && rule == RULE_STAY;
                honk.set(&at(if honked { ON } else { OFF }), 1.0);
            }
        }
    }
    LikelihoodTensor(vec![location, line, siren, honk])
}

/// Stay is the identity; steer moves 1→2→3→4 and bounces 4→3.
/// Both contexts share one symmetric switching matrix.
pub fn build_transitions(params: &ScenarioParams) -> TransitionSet {
    let stay = Matrix::identity(NUM_LOCATIONS);
    let mut steer = Matrix::zeros(NUM_LOCATIONS, NUM_LOCATIONS);
    for (from, to) in [(0, 1), (1, 2), (2, 3), (3, 2)] {
        steer.set(to, from, 1.0);
    }
    let p = params.context_switch_prob;
    let switch = Matrix::from_rows(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
        .expect("square 2x2");
    TransitionSet(vec![vec![stay, steer], vec![switch.clone()], vec![switch]])
}

/// Preferences conditioned on urgency. Only the target lane and honking
/// carry non-zero values.
pub fn build_preferences(params: &ScenarioParams) -> PreferenceTensor {
    let mut location = Tensor::zeros(vec![NUM_LOCATIONS, 2]);
    location.set(&[TARGET, NORMAL], params.pref_target_normal);
    location.set(&[TARGET, EMERGENCY], params.pref_target_emergency);
    let line = Tensor::zeros(vec![2, 2]);
    let siren = Tensor::zeros(vec![2, 2]);
    let mut honk = Tensor::zeros(vec![2, 2]);
    honk.set(&[ON, NORMAL], params.pref_honk_on);
    honk.set(&[ON, EMERGENCY], params.pref_honk_on);
    PreferenceTensor {
        context_factor: URGENCY,
        modalities: vec![location, line, siren, honk],
    }
}

/// Starts in lane position 1, unsure of the lane rule, and mildly
/// confident there is no emergency (the siren reliability again).
pub fn build_initial_states(params: &ScenarioParams) -> InitialStateVector {
    let mut location = vec![0.0; NUM_LOCATIONS];
    location[0] = 1.0;
    let r = params.siren_reliability;
    InitialStateVector(vec![location, vec![0.5, 0.5], vec![r, 1.0 - r]])
}

pub fn build_model(params: &ScenarioParams) -> Result<GenerativeModel> {
    params.validate()?;
    GenerativeModel::new(ModelParts {
        shape: params.shape(),
        likelihood: build_likelihood(params),
        transitions: build_transitions(params),
        preferences: build_preferences(params),
        initial: build_initial_states(params),
        policies: enumerate_policies(2, params.horizon)?,
    })
}
