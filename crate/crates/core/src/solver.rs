//! The iteration itself, ergodic averaging, stopping rules and run records.

use serde::Serialize;

use crate::certificates::{self, CertificateInputs};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, dist, dist_sq, CompensatedSum};
use crate::problem::{GradPair, PrimalDualPoint, SaddleProblem};
use crate::schedule::{FeasibilityReport, StepParams, StepSchedule};

/// Accumulators are rescaled once their total weight passes this.
const RENORMALIZE_AT: f64 = 1e300;

/// Running `Σ t_j x^{j+1}`, `Σ t_j y^{j+1}`, `Σ t_j`, stored as
/// `exp(ln_scale) · acc` so geometric weights never overflow.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicSum {
    x: Vec<CompensatedSum>,
    y: Vec<CompensatedSum>,
    weight: CompensatedSum,
    ln_scale: f64,
    terms: usize,
}

impl ErgodicSum {
    fn new(n: usize, m: usize) -> Self {
        Self {
            x: vec![CompensatedSum::default(); n],
            y: vec![CompensatedSum::default(); m],
            weight: CompensatedSum::default(),
            ln_scale: 0.0,
            terms: 0,
        }
    }

    /// Adds `exp(ln_t) · p`.
    fn add(&mut self, ln_t: f64, p: &PrimalDualPoint) {
        let mut lw = ln_t - self.ln_scale;
        if lw > RENORMALIZE_AT.ln() || self.weight.value() > RENORMALIZE_AT {
            let shift = lw.max(self.weight.value().ln());
            let s = (-shift).exp();
            self.x.iter_mut().chain(self.y.iter_mut()).for_each(|a| a.scale(s));
            self.weight.scale(s);
            self.ln_scale += shift;
            lw -= shift;
        }
        let w = lw.exp();
        for (a, v) in self.x.iter_mut().zip(&p.x) {
            a.add(w * v);
        }
        for (a, v) in self.y.iter_mut().zip(&p.y) {
            a.add(w * v);
        }
        self.weight.add(w);
        self.terms += 1;
    }

    /// Number of iterates accumulated so far.
    pub fn terms(&self) -> usize {
        self.terms
    }

    /// `ln Σ t_j`.
    pub fn ln_total_weight(&self) -> f64 {
        self.ln_scale + self.weight.value().ln()
    }

    /// `(x̂, ŷ)`, or `None` before the first step.
    pub fn point(&self) -> Option<PrimalDualPoint> {
        if self.terms == 0 {
            return None;
        }
        let w = self.weight.value();
        Some(PrimalDualPoint::new(
            self.x.iter().map(|a| a.value() / w).collect(),
            self.y.iter().map(|a| a.value() / w).collect(),
        ))
    }
}

/// Iterate `k` with its one-step memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub k: usize,
    pub current: PrimalDualPoint,
    pub previous: PrimalDualPoint,
    pub grad_current: GradPair,
    pub grad_previous: GradPair,
    pub ergodic_sum: ErgodicSum,
}

impl SolverState {
    /// State at `k = 0` with `(x^{−1}, y^{−1}) = (x^0, y^0)`.
    pub fn new(problem: &SaddleProblem, init: PrimalDualPoint) -> Result<Self> {
        problem.check_dims(&init)?;
        if !init.is_finite() {
            return Err(Error::NonFinite("initial point".into()));
        }
        let g = problem.grads(&init);
        Ok(Self {
            k: 0,
            previous: init.clone(),
            current: init,
            grad_previous: g.clone(),
            grad_current: g,
            ergodic_sum: ErgodicSum::new(problem.n(), problem.m()),
        })
    }

    /// `(x̂_k, ŷ_k)`; errors at `k = 0`.
    pub fn ergodic_point(&self) -> Result<PrimalDualPoint> {
        self.ergodic_sum.point().ok_or(Error::EmptyErgodic(self.k))
    }

    /// The next iterate and the gradients there, without mutating `self`.
    fn propose(
        &self,
        problem: &SaddleProblem,
        p: &StepParams,
    ) -> Result<(PrimalDualPoint, GradPair)> {
        let (gc, gp) = (&self.grad_current, &self.grad_previous);
        let vx: Vec<f64> = self
            .current
            .x
            .iter()
            .zip(gc.gx.iter().zip(&gp.gx))
            .map(|(x, (g, h))| x - p.tau * ((1.0 + p.lambda) * g - p.lambda * h))
            .collect();
        // reads the gradients at (x^k, y^k), not at (x^{k+1}, y^k)
        let vy: Vec<f64> = self
            .current
            .y
            .iter()
            .zip(gc.gy.iter().zip(&gp.gy))
            .map(|(y, (g, h))| y + p.sigma * ((1.0 + p.theta) * g - p.theta * h))
            .collect();
        let diverged = || Error::Diverged { k: self.k };
        if !all_finite(&vx) || !all_finite(&vy) {
            return Err(diverged());
        }
        let x = problem.f1().prox(p.tau, &vx).map_err(|_| diverged())?;
        let y = problem.f2().prox(p.sigma, &vy).map_err(|_| diverged())?;
        let next = PrimalDualPoint::new(x, y);
        let g = problem.grads(&next);
        if !next.is_finite() || !g.is_finite() {
            return Err(diverged());
        }
        Ok((next, g))
    }

    fn commit(&mut self, next: PrimalDualPoint, g: GradPair, ln_t: f64) {
        self.ergodic_sum.add(ln_t, &next);
        self.previous = std::mem::replace(&mut self.current, next);
        self.grad_previous = std::mem::replace(&mut self.grad_current, g);
        self.k += 1;
    }

    /// Advances one iteration in place.
    pub fn advance(&mut self, problem: &SaddleProblem, schedule: &StepSchedule) -> Result<()> {
        let p = schedule.step_params(self.k)?;
        let (next, g) = self.propose(problem, &p)?;
        self.commit(next, g, schedule.ln_t(self.k));
        Ok(())
    }
}

/// One iteration of the scheme.
pub fn step(
    problem: &SaddleProblem,
    schedule: &StepSchedule,
    state: &SolverState,
) -> Result<SolverState> {
    let mut next = state.clone();
    next.advance(problem, schedule)?;
    Ok(next)
}

/// Weighted average of `x^1..x^K` with weights `t_0..t_{K−1}`.
pub fn ergodic_from_iterates(
    iterates: &[PrimalDualPoint],
    schedule: &StepSchedule,
) -> Result<PrimalDualPoint> {
    let first = iterates.first().ok_or(Error::EmptyErgodic(0))?;
    let mut sum = ErgodicSum::new(first.x.len(), first.y.len());
    for (j, p) in iterates.iter().enumerate() {
        sum.add(schedule.ln_t(j), p);
    }
    Ok(sum.point().expect("non-empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    IncrementTol,
    GapTol,
    Diverged,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::MaxIters => "max_iters",
            StopReason::IncrementTol => "increment_tol",
            StopReason::GapTol => "gap_tol",
            StopReason::Diverged => "diverged",
        })
    }
}

/// Composite stopping rule. The optional reference also drives the
/// certificate trace.
#[derive(Debug, Clone, PartialEq)]
pub struct StopRule {
    pub max_iters: usize,
    pub increment_tol: Option<f64>,
    pub gap_tol: Option<f64>,
    pub reference: Option<PrimalDualPoint>,
}

pub fn stop_rules(
    max_iters: usize,
    increment_tol: Option<f64>,
    gap_tol: Option<f64>,
    reference: Option<PrimalDualPoint>,
) -> Result<StopRule> {
    if gap_tol.is_some() && reference.is_none() {
        return Err(Error::Config("gap_tol requires a reference saddle point".into()));
    }
    for (name, v) in [("increment_tol", increment_tol), ("gap_tol", gap_tol)] {
        if let Some(v) = v {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
    }
    if let Some(r) = &reference {
        if !r.is_finite() {
            return Err(Error::Config("reference point must be finite".into()));
        }
    }
    Ok(StopRule {
        max_iters,
        increment_tol,
        gap_tol,
        reference,
    })
}

impl StopRule {
    pub fn max_iters(max_iters: usize) -> Self {
        Self {
            max_iters,
            increment_tol: None,
            gap_tol: None,
            reference: None,
        }
    }

    pub fn with_reference(mut self, reference: PrimalDualPoint) -> Self {
        self.reference = Some(reference);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Keep every iterate `x^0..x^K` (needed by the ergodic sandwich).
    pub full_history: bool,
}

/// Per-step record for step `k → k+1`.
///
/// `a_k`, `b_k1` and `descent_lhs` are taken at the run's reference; the
/// distances and the gap refer to `(x^{k+1}, y^{k+1})` and to the ergodic
/// point with `K = k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub params: StepParams,
    pub ln_t: f64,
    pub inc_x_sq: f64,
    pub inc_y_sq: f64,
    pub c_k: f64,
    pub dist_x_sq: Option<f64>,
    pub dist_y_sq: Option<f64>,
    pub a_k: Option<f64>,
    pub b_k1: Option<f64>,
    pub descent_lhs: Option<f64>,
    pub gap_ergodic: Option<f64>,
}

impl TraceRow {
    pub fn increment(&self) -> f64 {
        self.inc_x_sq.sqrt() + self.inc_y_sq.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub k: usize,
    pub point: PrimalDualPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    /// Starting point actually used (after projection).
    pub init: PrimalDualPoint,
    pub init_projected: bool,
    pub states: Vec<Snapshot>,
    /// Ergodic points `(x̂_K, ŷ_K)` at the recorded `K ≥ 1`.
    pub ergodic_points: Vec<Snapshot>,
    pub trace: Vec<TraceRow>,
    /// `a_K` at the final iterate (reference runs only).
    pub a_final: Option<f64>,
    pub history: Option<Vec<PrimalDualPoint>>,
    pub reference: Option<PrimalDualPoint>,
    pub stop_reason: StopReason,
    pub iters: usize,
    pub certified: bool,
    pub feasibility: FeasibilityReport,
    pub schedule: StepSchedule,
}

impl RunRecord {
    pub fn final_point(&self) -> &PrimalDualPoint {
        &self.states.last().expect("initial state is always recorded").point
    }

    pub fn final_ergodic(&self) -> Option<&PrimalDualPoint> {
        self.ergodic_points.last().map(|s| &s.point)
    }

    /// Ergodic point after `k` iterations, from the recorded points or the
    /// full history.
    pub fn ergodic_point(&self, k: usize) -> Result<PrimalDualPoint> {
        if k == 0 || k > self.iters {
            return Err(Error::EmptyErgodic(k));
        }
        if let Ok(i) = self.ergodic_points.binary_search_by_key(&k, |s| s.k) {
            return Ok(self.ergodic_points[i].point.clone());
        }
        match &self.history {
            Some(h) => ergodic_from_iterates(&h[1..=k], &self.schedule),
            None => Err(Error::InvalidParameter(format!(
                "ergodic point for K = {k} was not recorded; rerun with full history"
            ))),
        }
    }

    /// Gap of the last ergodic point, when a reference was given.
    pub fn final_gap(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.gap_ergodic)
    }
}

/// Whether state `k` is kept: all of the first thousand, then every
/// `⌈k/1000⌉`-th.
pub fn on_cadence(k: usize) -> bool {
    k <= 1000 || k.is_multiple_of(k.div_ceil(1000))
}

pub fn run(
    problem: &SaddleProblem,
    schedule: &StepSchedule,
    init: PrimalDualPoint,
    stop: &StopRule,
) -> Result<RunRecord> {
    run_with(problem, schedule, init, stop, RunOptions::default())
}

pub fn run_with(
    problem: &SaddleProblem,
    schedule: &StepSchedule,
    init: PrimalDualPoint,
    stop: &StopRule,
    opts: RunOptions,
) -> Result<RunRecord> {
    problem.check_dims(&init)?;
    if !init.is_finite() {
        return Err(Error::NonFinite("initial point".into()));
    }
    if let Some(r) = &stop.reference {
        problem.check_dims(r)?;
    }
    // c_k reads the parameters at k + 1
    let horizon = schedule.horizon().max(stop.max_iters + 1);
    let schedule = schedule.clone().with_horizon(horizon)?;
    let l = problem.lipschitz();
    let feasibility = schedule.validate(&l);
    let moduli_ok = schedule.mu1() <= problem.mu1() && schedule.mu2() <= problem.mu2();
    let certified = feasibility.feasible && moduli_ok && problem.lipschitz_certified();

    let init_projected = !problem.in_domain(&init);
    let init = if init_projected {
        PrimalDualPoint::new(problem.f1().project(&init.x), problem.f2().project(&init.y))
    } else {
        init
    };

    let mut state = SolverState::new(problem, init.clone())?;
    let reference = stop.reference.as_ref();
    let mut record = RunRecord {
        init: init.clone(),
        init_projected,
        states: vec![Snapshot {
            k: 0,
            point: init.clone(),
        }],
        ergodic_points: Vec::new(),
        trace: Vec::with_capacity(stop.max_iters.min(1 << 20)),
        a_final: None,
        history: opts.full_history.then(|| vec![init]),
        reference: stop.reference.clone(),
        stop_reason: StopReason::MaxIters,
        iters: 0,
        certified,
        feasibility,
        schedule: schedule.clone(),
    };

    let mut reason = StopReason::MaxIters;
    while state.k < stop.max_iters {
        let k = state.k;
        let params = schedule.step_params(k)?;
        let next_params = schedule.step_params(k + 1)?;
        let (next, g) = match state.propose(problem, &params) {
            Ok(v) => v,
            Err(Error::Diverged { .. }) => {
                reason = StopReason::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };

        let inc_x_sq = dist_sq(&next.x, &state.current.x);
        let inc_y_sq = dist_sq(&next.y, &state.current.y);
        let ln_t = schedule.ln_t(k);
        let mut row = TraceRow {
            k,
            params,
            ln_t,
            inc_x_sq,
            inc_y_sq,
            c_k: certificates::c_k_parts(&params, &next_params, &l, inc_x_sq, inc_y_sq),
            dist_x_sq: None,
            dist_y_sq: None,
            a_k: None,
            b_k1: None,
            descent_lhs: None,
            gap_ergodic: None,
        };
        if let Some(r) = reference {
            let inputs = CertificateInputs {
                prev: &state.previous,
                cur: &state.current,
                next: &next,
                grad_prev: &state.grad_previous,
                grad_cur: &state.grad_current,
                grad_next: &g,
                reference: r,
                params,
                next_params,
                lipschitz: l,
                mu1: problem.mu1(),
                mu2: problem.mu2(),
            };
            row.a_k = Some(certificates::a_k(&inputs)?);
            row.b_k1 = Some(certificates::b_k1(&inputs)?);
            row.dist_x_sq = Some(dist_sq(&next.x, &r.x));
            row.dist_y_sq = Some(dist_sq(&next.y, &r.y));
            let lhs = problem.eval_unchecked(&next.x, &r.y) - problem.eval_unchecked(&r.x, &next.y);
            row.descent_lhs = lhs.is_finite().then_some(lhs);
        }

        let increment = dist(&next.x, &state.current.x) + dist(&next.y, &state.current.y);
        state.commit(next, g, ln_t);
        let ergodic = state.ergodic_sum.point().expect("one step taken");
        if let Some(r) = reference {
            let gap = certificates::gap_unchecked(problem, &ergodic, r);
            row.gap_ergodic = gap.is_finite().then_some(gap);
        }
        if let Some(h) = record.history.as_mut() {
            h.push(state.current.clone());
        }

        let gap_hit = matches!((stop.gap_tol, row.gap_ergodic), (Some(tol), Some(g)) if g <= tol);
        let inc_hit = stop.increment_tol.is_some_and(|tol| increment <= tol);
        record.trace.push(row);
        let fired = if gap_hit {
            Some(StopReason::GapTol)
        } else if inc_hit {
            Some(StopReason::IncrementTol)
        } else {
            None
        };
        let last = fired.is_some() || state.k >= stop.max_iters;
        if on_cadence(state.k) || last {
            record.states.push(Snapshot {
                k: state.k,
                point: state.current.clone(),
            });
            record.ergodic_points.push(Snapshot {
                k: state.k,
                point: ergodic,
            });
        }
        if let Some(r) = fired {
            reason = r;
            break;
        }
    }

    // a_K at the final iterate closes the telescoping chain
    if let Some(r) = reference {
        if reason != StopReason::Diverged {
            let params = schedule.step_params(state.k)?;
            let inputs = CertificateInputs {
                prev: &state.previous,
                cur: &state.current,
                next: &state.current,
                grad_prev: &state.grad_previous,
                grad_cur: &state.grad_current,
                grad_next: &state.grad_current,
                reference: r,
                params,
                next_params: params,
                lipschitz: l,
                mu1: problem.mu1(),
                mu2: problem.mu2(),
            };
            record.a_final = Some(certificates::a_k(&inputs)?);
        }
    }
    if reason == StopReason::Diverged && record.states.last().map(|s| s.k) != Some(state.k) {
        record.states.push(Snapshot {
            k: state.k,
            point: state.current.clone(),
        });
        if let Some(p) = state.ergodic_sum.point() {
            record.ergodic_points.push(Snapshot {
                k: state.k,
                point: p,
            });
        }
    }
    record.stop_reason = reason;
    record.iters = state.k;
    Ok(record)
}
