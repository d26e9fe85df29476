//! The seven-condition behavior table, checked against deterministic traces.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TrialTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} criterion {}: {}", self.id, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    pub criteria: Vec<CriterionResult>,
}

impl BehaviorReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn failed_ids(&self) -> Vec<u8> {
        self.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect()
    }

    pub fn get(&self, id: u8) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

fn fmt_step(step: Option<usize>) -> String {
    step.map_or_else(|| "none".to_string(), |s| s.to_string())
}

fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Trajectory opens 1 → 2 → 3 → 4.
fn direct_route(trace: &TrialTrace) -> bool {
    trace.locations().starts_with(&[1, 2, 3, 4])
}

fn final_location(trace: &TrialTrace) -> usize {
    trace.steps.last().map_or(0, |s| s.true_state.location)
}

fn criterion(id: u8, passed: bool, detail: String) -> CriterionResult {
    CriterionResult { id, passed, detail }
}

/// Evaluates criteria 1–7. `traces` must hold conditions 1..=7 in order.
pub fn evaluate(traces: &[TrialTrace]) -> Result<BehaviorReport> {
    let ids: Vec<u8> = traces.iter().map(|t| t.condition).collect();
    if ids != [1, 2, 3, 4, 5, 6, 7] {
        return Err(Error::invalid(format!(
            "behavior table needs conditions 1..=7 in order, got {ids:?}"
        )));
    }
    let c = |id: usize| &traces[id - 1];
    let mut criteria = Vec::with_capacity(7);

    let locs1 = c(1).locations();
    let mut expected1 = vec![2; locs1.len()];
    expected1[0] = 1;
    criteria.push(criterion(
        1,
        locs1 == expected1 && c(1).honk_count() == 0,
        format!("locations {locs1:?}, honks {}", c(1).honk_count()),
    ));

    let g2 = c(2).gammas();
    let g1_max = max(&c(1).gammas());
    let cross2 = c(2).first_cross_step();
    let spike = cross2.is_some_and(|s| {
        let at = g2[s - 1];
        g2[..s - 1].iter().all(|g| at > *g) && at > g1_max
    });
    criteria.push(criterion(
        2,
        direct_route(c(2)) && c(2).honk_count() == 1 && spike,
        format!(
            "locations {:?}, honks {}, γ at crossing step {} = {}, C1 max γ {g1_max:.6}",
            c(2).locations(),
            c(2).honk_count(),
            fmt_step(cross2),
            cross2.map_or_else(|| "n/a".to_string(), |s| format!("{:.6}", g2[s - 1])),
        ),
    ));

    let mean3 = mean(&c(3).gammas());
    let mean4 = mean(&c(4).gammas());
    criteria.push(criterion(
        3,
        direct_route(c(3)) && c(3).honk_count() == 0 && mean3 < mean4,
        format!(
            "locations {:?}, honks {}, mean γ C3 {mean3:.6} vs C4 {mean4:.6}",
            c(3).locations(),
            c(3).honk_count()
        ),
    ));

    let g4 = c(4).gammas();
    let (first4, last4) = (g4[0], g4[g4.len() - 1]);
    criteria.push(criterion(
        4,
        c(4).locations() == c(3).locations() && last4 > first4,
        format!("locations {:?}, γ first {first4:.6} last {last4:.6}", c(4).locations()),
    ));

    let cross5 = c(5).first_cross_step();
    criteria.push(criterion(
        5,
        cross5.is_some_and(|s| s >= 7) && c(5).honk_count() == 0 && final_location(c(5)) == 4,
        format!(
            "first cross {}, honks {}, final location {}",
            fmt_step(cross5),
            c(5).honk_count(),
            final_location(c(5))
        ),
    ));

    let cross6 = c(6).first_cross_step();
    criteria.push(criterion(
        6,
        cross6.is_some_and(|s| s <= 4) && c(6).honk_count() >= 1 && final_location(c(6)) == 4,
        format!(
            "first cross {}, honks {}, final location {}",
            fmt_step(cross6),
            c(6).honk_count(),
            final_location(c(6))
        ),
    ));

    let cross7 = c(7).first_cross_step();
    let ordered = match (cross6, cross7) {
        (Some(s6), Some(s7)) => s7 >= s6 && s7 >= 4,
        _ => false,
    };
    criteria.push(criterion(
        7,
        ordered,
        format!("first cross C7 {} vs C6 {}", fmt_step(cross7), fmt_step(cross6)),
    ));

    Ok(BehaviorReport { criteria })
}
