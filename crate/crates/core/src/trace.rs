//! Trial traces: what the agent saw, believed and did at each step, plus
//! JSON/CSV export and per-trial summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::belief::check_categorical;
use crate::engine::EngineConfig;
use crate::environment::{LaneRule, ObservationMode, Urgency};
use crate::error::{Error, Result};
use crate::scenario::{ScenarioParams, CROSSING, HONK, ON, TARGET};

pub const SCHEMA: &str = "normact-trace/1";

const EFE_TOLERANCE: f64 = 1e-9;
const NEGATIVE_SLACK: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueState {
    /// One-based lane position.
    pub location: usize,
    pub context1: LaneRule,
    pub context2: Urgency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfeRecord {
    pub total: f64,
    pub risk: f64,
    pub ambiguity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// One-based.
    pub step: usize,
    pub observation: Vec<usize>,
    pub true_state: TrueState,
    /// Current-step posterior, one distribution per factor.
    pub beliefs: Vec<Vec<f64>>,
    pub policy_posterior: Vec<f64>,
    pub efe: Vec<EfeRecord>,
    pub gamma: f64,
    pub gamma_rate: f64,
    pub gamma_iterates: Vec<f64>,
    pub gamma_converged: bool,
    /// β hit its positive floor during the precision solve.
    pub gamma_clamped: bool,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub schema: String,
    pub condition: u8,
    pub params: ScenarioParams,
    pub engine: EngineConfig,
    pub mode: ObservationMode,
    pub policies: Vec<Vec<usize>>,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Json,
    Csv,
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(TraceFormat::Json),
            "csv" => Ok(TraceFormat::Csv),
            other => Err(Error::invalid(format!("unsupported trace format {other:?}"))),
        }
    }
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Json => "trace.json",
            TraceFormat::Csv => "trace.csv",
        }
    }
}

pub fn trace_file_name(condition: u8, format: TraceFormat) -> String {
    format!("condition-{condition}.{}", format.extension())
}

impl TrialTrace {
    /// Checks the schema tag, the step count and every embedded
    /// distribution and free-energy decomposition.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::invalid(format!(
                "unknown trace schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        if self.steps.is_empty() {
            return Err(Error::invalid("trace has no step records"));
        }
        if self.steps.len() != self.params.trial_length {
            return Err(Error::invalid(format!(
                "trace has {} step records, trial length is {}",
                self.steps.len(),
                self.params.trial_length
            )));
        }
        for (i, rec) in self.steps.iter().enumerate() {
            let at = |what: &str, e: Error| Error::invalid(format!("step {}: {what}: {e}", rec.step));
            if rec.step != i + 1 {
                return Err(Error::invalid(format!(
                    "step record {i} is numbered {}",
                    rec.step
                )));
            }
            for (f, b) in rec.beliefs.iter().enumerate() {
                check_categorical(b).map_err(|e| at(&format!("belief over factor {f}"), e))?;
            }
            check_categorical(&rec.policy_posterior).map_err(|e| at("policy posterior", e))?;
            if rec.policy_posterior.len() != self.policies.len()
                || rec.efe.len() != self.policies.len()
            {
                return Err(Error::invalid(format!(
                    "step {}: per-policy series do not match {} policies",
                    rec.step,
                    self.policies.len()
                )));
            }
            for (k, g) in rec.efe.iter().enumerate() {
                if (g.total - (g.risk + g.ambiguity)).abs() > EFE_TOLERANCE
                    || g.risk < NEGATIVE_SLACK
                    || g.ambiguity < NEGATIVE_SLACK
                {
                    return Err(Error::invalid(format!(
                        "step {}: policy {k} free energy {g:?} is inconsistent",
                        rec.step
                    )));
                }
            }
            if !(rec.gamma > 0.0 && rec.gamma.is_finite()) {
                return Err(Error::invalid(format!("step {}: gamma {}", rec.step, rec.gamma)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let trace: TrialTrace = serde_json::from_str(text)?;
        trace.validate()?;
        Ok(trace)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Long format: one row per (step, series, index).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,series,index,value\n");
        let mut row = |step: usize, series: &str, index: usize, value: f64| {
            let _ = writeln!(out, "{step},{series},{index},{value}");
        };
        for rec in &self.steps {
            let t = rec.step;
            for (m, o) in rec.observation.iter().enumerate() {
                row(t, "observation", m, *o as f64);
            }
            row(t, "true_location", 0, rec.true_state.location as f64);
            row(t, "context1", 0, rec.true_state.context1.index() as f64);
            row(t, "context2", 0, rec.true_state.context2.index() as f64);
            for (f, belief) in rec.beliefs.iter().enumerate() {
                let series = format!("belief_f{}", f + 1);
                for (s, p) in belief.iter().enumerate() {
                    row(t, &series, s, *p);
                }
            }
            for (k, p) in rec.policy_posterior.iter().enumerate() {
                row(t, "policy_posterior", k, *p);
            }
            for (k, g) in rec.efe.iter().enumerate() {
                row(t, "efe_total", k, g.total);
                row(t, "efe_risk", k, g.risk);
                row(t, "efe_ambiguity", k, g.ambiguity);
            }
            row(t, "gamma", 0, rec.gamma);
            row(t, "gamma_rate", 0, rec.gamma_rate);
            row(t, "action", 0, rec.action as f64);
        }
        out
    }

    pub fn export(&self, format: TraceFormat) -> Result<String> {
        match format {
            TraceFormat::Json => self.to_json(),
            TraceFormat::Csv => Ok(self.to_csv()),
        }
    }

    pub fn write(&self, dir: &Path, format: TraceFormat) -> Result<PathBuf> {
        let path = dir.join(trace_file_name(self.condition, format));
        std::fs::write(&path, self.export(format)?)?;
        Ok(path)
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.gamma).collect()
    }

    /// One-based true locations, step by step.
    pub fn locations(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.true_state.location).collect()
    }

    pub fn honk_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.observation.get(HONK) == Some(&ON))
            .count()
    }

    /// First one-based step at the crossing position, if any.
    pub fn first_cross_step(&self) -> Option<usize> {
        self.steps
            .iter()
            .find(|s| s.true_state.location == CROSSING + 1)
            .map(|s| s.step)
    }

    /// First step at the target lane, if any.
    pub fn arrival_step(&self) -> Option<usize> {
        self.steps
            .iter()
            .find(|s| s.true_state.location == TARGET + 1)
            .map(|s| s.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub condition: u8,
    pub first_cross_step: Option<usize>,
    pub final_location: usize,
    pub honk_count: usize,
    pub mean_gamma: f64,
    pub peak_gamma: f64,
    pub peak_gamma_step: usize,
}

pub fn summarize(trace: &TrialTrace) -> SummaryRow {
    let gammas = trace.gammas();
    let mean_gamma = gammas.iter().sum::<f64>() / gammas.len().max(1) as f64;
    let (peak_index, peak_gamma) = gammas
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, g)| if *g > best.1 { (i, *g) } else { best });
    SummaryRow {
        condition: trace.condition,
        first_cross_step: trace.first_cross_step(),
        final_location: trace.steps.last().map_or(0, |s| s.true_state.location),
        honk_count: trace.honk_count(),
        mean_gamma,
        peak_gamma,
        peak_gamma_step: trace.steps.get(peak_index).map_or(0, |s| s.step),
    }
}

pub const SUMMARY_HEADER: &str =
    "condition,first_cross_step,final_location,honk_count,mean_gamma,peak_gamma,peak_gamma_step";

impl SummaryRow {
    pub fn to_csv_line(&self) -> String {
        let cross = self.first_cross_step.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "{},{},{},{},{},{},{}",
            self.condition,
            cross,
            self.final_location,
            self.honk_count,
            self.mean_gamma,
            self.peak_gamma,
            self.peak_gamma_step
        )
    }
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

const SPARKS: [char; 8] = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'];

/// Block sparkline scaled to the given range.
pub fn sparkline(values: &[f64], lo: f64, hi: f64) -> String {
    let span = hi - lo;
    values
        .iter()
        .map(|v| {
            if span <= 0.0 {
                return SPARKS[0];
            }
            let level = ((v - lo) / span * (SPARKS.len() - 1) as f64).round();
            SPARKS[level.clamp(0.0, (SPARKS.len() - 1) as f64) as usize]
        })
        .collect()
}

/// Terminal table with one row per trace; sparklines share one γ scale.
pub fn render_table(traces: &[TrialTrace]) -> String {
    let all: Vec<f64> = traces.iter().flat_map(TrialTrace::gammas).collect();
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = String::from("cond  cross  final  honks  mean γ   peak γ (step)  γ\n");
    for trace in traces {
        let row = summarize(trace);
        let cross = row.first_cross_step.map_or_else(|| "none".to_string(), |s| s.to_string());
        let _ = writeln!(
            out,
            "{:>4}  {:>5}  {:>5}  {:>5}  {:.4}   {:.4} ({:>2})    {}",
            row.condition,
            cross,
            row.final_location,
            row.honk_count,
            row.mean_gamma,
            row.peak_gamma,
            row.peak_gamma_step,
            sparkline(&trace.gammas(), lo, hi)
        );
    }
    out
}
