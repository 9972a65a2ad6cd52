use std::path::Path;

use appa_core::certificates::ergodic_gap_bound;
use appa_core::problem::PrimalDualPoint;
use appa_core::schedule::{FeasibilityReport, ScheduleKind};
use appa_core::solver::on_cadence;
use appa_core::{RunRecord, SaddleProblem, StopReason};
use serde::Serialize;

pub const TRACE_HEADER: [&str; 12] = [
    "k",
    "tau",
    "sigma",
    "lambda",
    "theta",
    "t",
    "inc_x",
    "inc_y",
    "dist_to_ref",
    "gap_ergodic",
    "a_k",
    "c_k",
];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes the trace at the state cadence, always including the last step.
pub fn write_trace_csv(path: &Path, record: &RunRecord) -> Result<(), String> {
    let err = |e: &dyn std::fmt::Display| format!("{}: {e}", path.display());
    let mut w = csv::Writer::from_path(path).map_err(|e| err(&e))?;
    w.write_record(TRACE_HEADER).map_err(|e| err(&e))?;
    let last = record.trace.len().saturating_sub(1);
    for (i, row) in record.trace.iter().enumerate() {
        if !on_cadence(row.k + 1) && i != last {
            continue;
        }
        let dist = match (row.dist_x_sq, row.dist_y_sq) {
            (Some(dx), Some(dy)) => Some((dx + dy).sqrt()),
            _ => None,
        };
        let p = &row.params;
        w.write_record([
            row.k.to_string(),
            num(p.tau),
            num(p.sigma),
            num(p.lambda),
            num(p.theta),
            num(row.ln_t.exp()),
            num(row.inc_x_sq.sqrt()),
            num(row.inc_y_sq.sqrt()),
            opt(dist),
            opt(row.gap_ergodic),
            opt(row.a_k),
            num(row.c_k),
        ])
        .map_err(|e| err(&e))?;
    }
    w.flush().map_err(|e| err(&e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    std::fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub stop_reason: StopReason,
    pub iters: usize,
    pub certified: bool,
    pub init_projected: bool,
    pub schedule: ScheduleKind,
    pub theta: f64,
    pub feasibility: FeasibilityReport,
    pub final_gap: Option<f64>,
    /// Ergodic bound at the final `K` (needs a reference).
    pub gap_bound: Option<f64>,
    pub gap_within_bound: Option<bool>,
    pub final_objective: Option<f64>,
    pub final_point: PrimalDualPoint,
    pub ergodic_point: Option<PrimalDualPoint>,
}

impl Summary {
    pub fn new(problem: &SaddleProblem, record: &RunRecord) -> Self {
        let base = record.schedule.base();
        let gap_bound = match (&record.reference, record.iters) {
            (Some(r), k) if k >= 1 => Some(ergodic_gap_bound(k, base.tau, base.sigma, &record.init, r)),
            _ => None,
        };
        let final_gap = record.final_gap();
        let gap_within_bound = match (final_gap, gap_bound) {
            (Some(g), Some(b)) => Some(g >= -1e-9 && g <= b + 1e-9),
            _ => None,
        };
        let final_objective = problem.eval_f(record.final_point()).ok().filter(|v| v.is_finite());
        Self {
            stop_reason: record.stop_reason,
            iters: record.iters,
            certified: record.certified,
            init_projected: record.init_projected,
            schedule: record.schedule.kind(),
            theta: record.schedule.theta_ratio(),
            feasibility: record.feasibility,
            final_gap,
            gap_bound,
            gap_within_bound,
            final_objective,
            final_point: record.final_point().clone(),
            ergodic_point: record.final_ergodic().cloned(),
        }
    }
}
