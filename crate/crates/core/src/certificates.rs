//! Certificate quantities `a_k`, `b_{k+1}`, `c_k`, the minimax gap, rate
//! envelopes, and checks of all of them over completed runs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dist_sq, dot_diff, CompensatedSum};
use crate::problem::{GradPair, LipschitzQuad, PrimalDualPoint, SaddleProblem};
use crate::schedule::{ScheduleKind, StepParams, StepSchedule};
use crate::solver::RunRecord;

/// Relative tolerance of every inequality check: `slack ≥ −TOL·(1 + |rhs|)`.
pub const TOL: f64 = 1e-9;

/// Everything the certificate formulas read at iteration `k`.
#[derive(Debug, Clone, Copy)]
pub struct CertificateInputs<'a> {
    pub prev: &'a PrimalDualPoint,
    pub cur: &'a PrimalDualPoint,
    pub next: &'a PrimalDualPoint,
    pub grad_prev: &'a GradPair,
    pub grad_cur: &'a GradPair,
    pub grad_next: &'a GradPair,
    pub reference: &'a PrimalDualPoint,
    pub params: StepParams,
    pub next_params: StepParams,
    pub lipschitz: LipschitzQuad,
    pub mu1: f64,
    pub mu2: f64,
}

impl CertificateInputs<'_> {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.next_params.validate()?;
        let (n, m) = (self.cur.x.len(), self.cur.y.len());
        let pts = [self.prev, self.cur, self.next, self.reference];
        if pts.iter().any(|p| p.x.len() != n || p.y.len() != m) {
            return Err(Error::Dimension("certificate points disagree in dimension".into()));
        }
        let grads = [self.grad_prev, self.grad_cur, self.grad_next];
        if grads.iter().any(|g| g.gx.len() != n || g.gy.len() != m) {
            return Err(Error::Dimension("certificate gradients disagree in dimension".into()));
        }
        if !pts.iter().all(|p| p.is_finite()) || !grads.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite("certificate inputs".into()));
        }
        Ok(())
    }
}

pub fn a_k(inp: &CertificateInputs) -> Result<f64> {
    inp.validate()?;
    let (p, l, r) = (&inp.params, &inp.lipschitz, inp.reference);
    let (cur, prev) = (inp.cur, inp.prev);
    Ok(dist_sq(&r.x, &cur.x) / (2.0 * p.tau)
        + dist_sq(&r.y, &cur.y) / (2.0 * p.sigma)
        + (p.lambda * l.lxx / (2.0 * p.alpha) + p.theta * l.lyx / (2.0 * p.gamma))
            * dist_sq(&cur.x, &prev.x)
        + (p.lambda * l.lxy / (2.0 * p.beta) + p.theta * l.lyy / (2.0 * p.delta))
            * dist_sq(&cur.y, &prev.y)
        + p.lambda * dot_diff(&inp.grad_cur.gx, &inp.grad_prev.gx, &r.x, &cur.x)
        - p.theta * dot_diff(&inp.grad_cur.gy, &inp.grad_prev.gy, &r.y, &cur.y))
}

pub fn b_k1(inp: &CertificateInputs) -> Result<f64> {
    inp.validate()?;
    let (p, q, l, r) = (&inp.params, &inp.next_params, &inp.lipschitz, inp.reference);
    let (cur, next) = (inp.cur, inp.next);
    Ok(0.5 * (1.0 / p.tau + inp.mu1) * dist_sq(&r.x, &next.x)
        + 0.5 * (1.0 / p.sigma + inp.mu2) * dist_sq(&r.y, &next.y)
        + (l.lxx / (2.0 * q.alpha) + l.lyx / (2.0 * q.gamma)) * dist_sq(&next.x, &cur.x)
        + (l.lxy / (2.0 * q.beta) + l.lyy / (2.0 * q.delta)) * dist_sq(&next.y, &cur.y)
        + dot_diff(&inp.grad_next.gx, &inp.grad_cur.gx, &r.x, &next.x)
        - dot_diff(&inp.grad_next.gy, &inp.grad_cur.gy, &r.y, &next.y))
}

pub fn c_k(inp: &CertificateInputs) -> Result<f64> {
    inp.validate()?;
    Ok(c_k_parts(
        &inp.params,
        &inp.next_params,
        &inp.lipschitz,
        dist_sq(&inp.next.x, &inp.cur.x),
        dist_sq(&inp.next.y, &inp.cur.y),
    ))
}

/// `c_k` from the squared increments alone.
pub fn c_k_parts(p: &StepParams, q: &StepParams, l: &LipschitzQuad, inc_x_sq: f64, inc_y_sq: f64) -> f64 {
    let wx = 1.0 / p.tau
        - p.lambda * p.alpha * l.lxx
        - p.lambda * p.beta * l.lxy
        - l.lxx / q.alpha
        - l.lyx / q.gamma;
    let wy = 1.0 / p.sigma
        - p.theta * p.gamma * l.lyx
        - p.theta * p.delta * l.lyy
        - l.lxy / q.beta
        - l.lyy / q.delta;
    0.5 * wx * inc_x_sq + 0.5 * wy * inc_y_sq
}

/// Guaranteed lower bound on `a_k` in terms of the reference distances.
pub fn a_lower_bound(inp: &CertificateInputs) -> f64 {
    let (p, l, r) = (&inp.params, &inp.lipschitz, inp.reference);
    0.5 * (1.0 / p.tau - l.lxx * p.lambda * p.alpha - l.lxy * p.lambda * p.beta)
        * dist_sq(&r.x, &inp.cur.x)
        + 0.5 * (1.0 / p.sigma - l.lyx * p.theta * p.gamma - l.lyy * p.theta * p.delta)
            * dist_sq(&r.y, &inp.cur.y)
}

/// `½(η_x/τ‖Δx‖² + η_y/σ‖Δy‖²)`, the guaranteed floor of `c_k`.
pub fn c_floor(eta: (f64, f64), p: &StepParams, inc_x_sq: f64, inc_y_sq: f64) -> f64 {
    0.5 * (eta.0 / p.tau * inc_x_sq + eta.1 / p.sigma * inc_y_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

fn within(slack: f64, rhs: f64) -> bool {
    slack >= -TOL * (1.0 + rhs.abs())
}

/// `f(x^{k+1}, y) − f(x, y^{k+1}) ≤ a_k − b_{k+1} − c_k` at the reference.
pub fn descent_check(problem: &SaddleProblem, inp: &CertificateInputs) -> Result<DescentReport> {
    let r = inp.reference;
    let lhs = problem.eval_f(&PrimalDualPoint::new(inp.next.x.clone(), r.y.clone()))?
        - problem.eval_f(&PrimalDualPoint::new(r.x.clone(), inp.next.y.clone()))?;
    if !lhs.is_finite() {
        return Err(Error::InapplicableReference(
            "objective is infinite at the reference pairing".into(),
        ));
    }
    let rhs = a_k(inp)? - b_k1(inp)? - c_k(inp)?;
    Ok(descent_report(lhs, rhs))
}

fn descent_report(lhs: f64, rhs: f64) -> DescentReport {
    let slack = rhs - lhs;
    DescentReport {
        lhs,
        rhs,
        slack,
        pass: within(slack, rhs),
    }
}

/// `f(x̂, y*) − f(x*, ŷ)`, signed.
pub fn gap(problem: &SaddleProblem, candidate: &PrimalDualPoint, saddle: &PrimalDualPoint) -> Result<f64> {
    problem.check_dims(candidate)?;
    problem.check_dims(saddle)?;
    let g = gap_unchecked(problem, candidate, saddle);
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::InapplicableReference("gap involves an infinite objective value".into()))
    }
}

pub(crate) fn gap_unchecked(problem: &SaddleProblem, candidate: &PrimalDualPoint, saddle: &PrimalDualPoint) -> f64 {
    problem.eval_unchecked(&candidate.x, &saddle.y) - problem.eval_unchecked(&saddle.x, &candidate.y)
}

/// `(1/K)(‖x* − x⁰‖²/(2τ0) + ‖y* − y⁰‖²/(2σ0))`.
pub fn ergodic_gap_bound(
    k: usize,
    tau0: f64,
    sigma0: f64,
    init: &PrimalDualPoint,
    saddle: &PrimalDualPoint,
) -> f64 {
    assert!(k >= 1, "ergodic bound needs K >= 1");
    (dist_sq(&saddle.x, &init.x) / (2.0 * tau0) + dist_sq(&saddle.y, &init.y) / (2.0 * sigma0)) / k as f64
}

/// `θᴷ · init_dist_sq / eta_min`.
pub fn linear_envelope(k: usize, theta: f64, eta_min: f64, init_dist_sq: f64) -> f64 {
    theta.powi(k as i32) * init_dist_sq / eta_min
}

/// Right-hand sides `(upper, lower)` of the two-sided ergodic bound
/// `−lower ≤ f(x̂_K, ŷ_K) − f(x*, y*) ≤ upper`. Needs the full iterate
/// history.
pub fn ergodic_sandwich(
    problem: &SaddleProblem,
    record: &RunRecord,
    k: usize,
    saddle: &PrimalDualPoint,
) -> Result<(f64, f64)> {
    let history = record.history.as_ref().ok_or_else(|| {
        Error::InvalidParameter("ergodic sandwich needs a run with full history".into())
    })?;
    if k == 0 || k > record.iters {
        return Err(Error::EmptyErgodic(k));
    }
    problem.check_dims(saddle)?;
    let hat = record.ergodic_point(k)?;
    let schedule = &record.schedule;
    // weights relative to the largest one
    let ln_top = (0..k).map(|j| schedule.ln_t(j)).fold(f64::NEG_INFINITY, f64::max);
    let mut upper = CompensatedSum::default();
    let mut lower = CompensatedSum::default();
    let mut total = CompensatedSum::default();
    for j in 0..k {
        let w = (schedule.ln_t(j) - ln_top).exp();
        let it = &history[j + 1];
        let u = problem.eval_unchecked(&it.x, &hat.y) - problem.eval_unchecked(&saddle.x, &it.y);
        let v = problem.eval_unchecked(&it.x, &saddle.y) - problem.eval_unchecked(&hat.x, &it.y);
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::InapplicableReference(format!(
                "infinite objective along the trace at j = {j}"
            )));
        }
        upper.add(w * u);
        lower.add(w * v);
        total.add(w);
    }
    Ok((upper.value() / total.value(), lower.value() / total.value()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckFailure {
    pub check: String,
    pub k: usize,
    pub slack: f64,
}

/// Result of checking one family of inequalities over a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub checked: usize,
    pub failures: Vec<CheckFailure>,
    /// Smallest `slack / (1 + |rhs|)` seen (`+∞` when nothing was checked).
    pub worst_slack: f64,
    /// Whether the theorem hypotheses held; failures of an uncertified
    /// check are expected, not bugs.
    pub certified: bool,
}

impl CheckReport {
    fn new(check: &str, certified: bool) -> Self {
        Self {
            check: check.into(),
            checked: 0,
            failures: Vec::new(),
            worst_slack: f64::INFINITY,
            certified,
        }
    }

    /// Records `lhs ≤ rhs` at `k` with tolerance `TOL·(1 + |rhs|)`.
    fn le(&mut self, k: usize, lhs: f64, rhs: f64) {
        self.checked += 1;
        let slack = rhs - lhs;
        let scaled = slack / (1.0 + rhs.abs());
        self.worst_slack = self.worst_slack.min(scaled);
        if !within(slack, rhs) || slack.is_nan() {
            self.failures.push(CheckFailure {
                check: self.check.clone(),
                k,
                slack,
            });
        }
    }

    /// Records `lhs ≤ rhs + abs_tol` at `k`.
    fn le_abs(&mut self, k: usize, lhs: f64, rhs: f64, abs_tol: f64) {
        self.checked += 1;
        let slack = rhs - lhs;
        self.worst_slack = self.worst_slack.min(slack);
        if !(slack >= -abs_tol) {
            self.failures.push(CheckFailure {
                check: self.check.clone(),
                k,
                slack,
            });
        }
    }

    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

fn require_reference<'a>(record: &'a RunRecord, saddle: &PrimalDualPoint) -> Result<&'a PrimalDualPoint> {
    match &record.reference {
        Some(r) if r == saddle => Ok(r),
        Some(_) => Err(Error::InapplicableReference(
            "run was traced against a different reference".into(),
        )),
        None => Err(Error::InapplicableReference("run has no reference trace".into())),
    }
}

/// `t_k a_k ≥ t_{k+1} a_{k+1} + (t0/2)(η_x/τ_k‖Δx‖² + η_y/σ_k‖Δy‖²)` at every
/// step, plus `t_k a_k` nonincreasing and `≥ −1e−9`.
///
/// Everything is divided through by `t_k`, so geometric weights never
/// overflow.
pub fn telescoping_check(
    record: &RunRecord,
    schedule: &StepSchedule,
    saddle: &PrimalDualPoint,
    eta: (f64, f64),
) -> Result<CheckReport> {
    require_reference(record, saddle)?;
    let certified = record.certified && eta.0 > 0.0 && eta.1 > 0.0;
    let mut rep = CheckReport::new("telescoping", certified);
    let a: Vec<f64> = record
        .trace
        .iter()
        .map(|r| r.a_k.expect("reference runs trace a_k"))
        .chain(record.a_final)
        .collect();
    for row in &record.trace {
        let k = row.k;
        let growth = schedule.t_growth(k);
        let ratio0 = schedule.t0_over_t(k);
        let surplus = ratio0 * c_floor(eta, &row.params, row.inc_x_sq, row.inc_y_sq);
        rep.le(k, growth * a[k + 1] + surplus, a[k]);
        rep.le(k, growth * a[k + 1], a[k]);
    }
    for (k, ak) in a.iter().enumerate() {
        // t_k a_k ≥ −1e−9
        let ln_t = schedule.ln_t(k);
        let scaled = if ln_t < 700.0 { ln_t.exp() * ak } else { *ak };
        rep.le_abs(k, 0.0, scaled, TOL);
    }
    Ok(rep)
}

/// `c_k ≥ ½(η_x/τ_k‖Δx‖² + η_y/σ_k‖Δy‖²) ≥ 0` at every step.
pub fn c_positivity_check(record: &RunRecord, eta: (f64, f64)) -> CheckReport {
    let mut rep = CheckReport::new("c_k_positivity", record.certified);
    for row in &record.trace {
        let floor = c_floor(eta, &row.params, row.inc_x_sq, row.inc_y_sq);
        rep.le_abs(row.k, floor, row.c_k, TOL);
        rep.le_abs(row.k, 0.0, floor, TOL);
    }
    rep
}

/// The descent inequality at every traced step.
pub fn descent_trace_check(record: &RunRecord) -> CheckReport {
    let mut rep = CheckReport::new("descent", true);
    for row in &record.trace {
        if let (Some(lhs), Some(a), Some(b)) = (row.descent_lhs, row.a_k, row.b_k1) {
            let rhs = a - b - row.c_k;
            rep.le(row.k, lhs, rhs);
        }
    }
    rep
}

/// `−1e−9 ≤ gap(x̂_K, ŷ_K) ≤ bound(K) + 1e−9` at every `K`.
pub fn ergodic_bound_check(record: &RunRecord, saddle: &PrimalDualPoint) -> Result<CheckReport> {
    require_reference(record, saddle)?;
    let base = record.schedule.base();
    let mut rep = CheckReport::new("ergodic_gap_bound", record.certified);
    for row in &record.trace {
        let big_k = row.k + 1;
        let Some(g) = row.gap_ergodic else { continue };
        let bound = ergodic_gap_bound(big_k, base.tau, base.sigma, &record.init, saddle);
        rep.le_abs(big_k, g, bound, TOL);
        rep.le_abs(big_k, 0.0, g, TOL);
    }
    Ok(rep)
}

/// `η_x‖x* − x^K‖² + η_y‖y* − y^K‖² ≤ θᴷ(‖x* − x⁰‖² + ‖y* − y⁰‖²) + 1e−9`.
pub fn linear_envelope_check(
    record: &RunRecord,
    saddle: &PrimalDualPoint,
    eta: (f64, f64),
) -> Result<CheckReport> {
    require_reference(record, saddle)?;
    let theta = record.schedule.theta_ratio();
    let mut rep = CheckReport::new("linear_envelope", record.certified);
    let d0 = record.init.dist_sq(saddle);
    for row in &record.trace {
        let (Some(dx), Some(dy)) = (row.dist_x_sq, row.dist_y_sq) else { continue };
        let big_k = row.k + 1;
        rep.le_abs(big_k, eta.0 * dx + eta.1 * dy, linear_envelope(big_k, theta, 1.0, d0), TOL);
    }
    Ok(rep)
}

/// `|f(x̂_K, ŷ_K) − f(x*, y*)| ≤ θ^{K−1}/(2σ)·(max(‖x*−x⁰‖², ‖x̂_K−x⁰‖²)
/// + max(‖y*−y⁰‖², ‖ŷ_K−y⁰‖²)) + 1e−9` at every recorded `K`.
pub fn objective_linear_check(
    problem: &SaddleProblem,
    record: &RunRecord,
    saddle: &PrimalDualPoint,
) -> Result<CheckReport> {
    require_reference(record, saddle)?;
    let f_star = problem.eval_f(saddle)?;
    let theta = record.schedule.theta_ratio();
    let sigma = record.schedule.base().sigma;
    let x0 = &record.init;
    let mut rep = CheckReport::new("objective_linear", record.certified);
    for snap in &record.ergodic_points {
        let hat = &snap.point;
        let err = (problem.eval_f(hat)? - f_star).abs();
        let dx = dist_sq(&saddle.x, &x0.x).max(dist_sq(&hat.x, &x0.x));
        let dy = dist_sq(&saddle.y, &x0.y).max(dist_sq(&hat.y, &x0.y));
        let bound = theta.powi(snap.k as i32 - 1) / (2.0 * sigma) * (dx + dy);
        rep.le_abs(snap.k, err, bound, TOL);
    }
    Ok(rep)
}

/// Everything checkable on a finished run with a reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub per_k_failures: Vec<CheckFailure>,
    pub worst_slack: f64,
    pub theorems_checked: Vec<String>,
    pub checks: Vec<CheckReport>,
    pub certified: bool,
    pub pass: bool,
    pub eta_x: f64,
    pub eta_y: f64,
    pub iters: usize,
}

pub fn certify_record(problem: &SaddleProblem, record: &RunRecord) -> Result<CertifyReport> {
    let saddle = record
        .reference
        .clone()
        .ok_or_else(|| Error::InapplicableReference("certification needs a reference".into()))?;
    let eta = record.schedule.eta_margins(&problem.lipschitz());
    let mut checks = vec![
        descent_trace_check(record),
        c_positivity_check(record, eta),
        telescoping_check(record, &record.schedule, &saddle, eta)?,
        ergodic_bound_check(record, &saddle)?,
    ];
    let strongly_convex = record.schedule.kind() == ScheduleKind::Geometric;
    if strongly_convex {
        checks.push(linear_envelope_check(record, &saddle, eta)?);
        checks.push(objective_linear_check(problem, record, &saddle)?);
    }
    let per_k_failures: Vec<CheckFailure> = checks.iter().flat_map(|c| c.failures.clone()).collect();
    let worst_slack = checks.iter().map(|c| c.worst_slack).fold(f64::INFINITY, f64::min);
    Ok(CertifyReport {
        pass: per_k_failures.is_empty(),
        per_k_failures,
        worst_slack,
        theorems_checked: checks.iter().map(|c| c.check.clone()).collect(),
        checks,
        certified: record.certified,
        eta_x: eta.0,
        eta_y: eta.1,
        iters: record.iters,
    })
}

/// Least-squares slope of `ln y` against `x`, skipping points with
/// `y <= floor`. `None` with fewer than two usable points.
pub fn log_linear_slope(points: &[(f64, f64)], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > floor && y.is_finite())
        .map(|&(x, y)| (x, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
