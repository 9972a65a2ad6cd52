//! Parameter sequences `(τ_k, σ_k, λ_k, θ_k, α_k, β_k, γ_k, δ_k, t_k)` and
//! their feasibility margins.
//!
//! Two closed-form families are supported: a constant schedule
//! (`λ = θ ≡ 1`, `t ≡ t0`) and a geometric one for strongly convex problems
//! (`τ = σ`, `λ_k = θ_k = 1/(1+μσ)` for `k ≥ 1`, `t_k = t0/θᵏ`).
//! Both use `λ_0 = θ_0 = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::LipschitzQuad;

pub const DEFAULT_HORIZON: usize = 10_000;
pub const DEFAULT_SAFETY: f64 = 0.9;

const RECURSION_TOL: f64 = 1e-12;
const T_CONSISTENCY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub tau: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Ergodic weight. May overflow to `+∞` far into a geometric schedule;
    /// use [`StepSchedule::ln_t`] or the ratio helpers there.
    pub t: f64,
}

impl StepParams {
    fn check_splitting(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Fails unless every entry is strictly positive (`t` may be `+∞`).
    pub fn validate(&self) -> Result<()> {
        self.check_splitting()?;
        for (name, v) in [
            ("tau", self.tau),
            ("sigma", self.sigma),
            ("lambda", self.lambda),
            ("theta", self.theta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.t > 0.0) {
            return Err(Error::InvalidParameter(format!("t must be > 0, got {}", self.t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    kind: ScheduleKind,
    base: StepParams,
    mu1: f64,
    mu2: f64,
    theta_ratio: f64,
    horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub eta_x: f64,
    pub eta_y: f64,
    pub recursion_tau_ok: bool,
    pub recursion_sigma_ok: bool,
    pub theta_le_one_ok: bool,
    pub t_consistent_ok: bool,
    pub feasible: bool,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
    }
}

/// Splitting parameters `(α, β, γ, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Splitting {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for Splitting {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            delta: 1.0,
        }
    }
}

impl Splitting {
    /// `Lxx·α + Lxy·β + Lxx/α + Lyx/γ`, the factor multiplying `τ` in `η_x`.
    pub fn x_load(&self, l: &LipschitzQuad) -> f64 {
        l.lxx * self.alpha + l.lxy * self.beta + l.lxx / self.alpha + l.lyx / self.gamma
    }

    /// `Lyx·γ + Lyy·δ + Lxy/β + Lyy/δ`, the factor multiplying `σ` in `η_y`.
    pub fn y_load(&self, l: &LipschitzQuad) -> f64 {
        l.lyx * self.gamma + l.lyy * self.delta + l.lxy / self.beta + l.lyy / self.delta
    }
}

/// Largest-margin steps `τ = safety/x_load`, `σ = safety/y_load` for a
/// constant schedule (each defaults to 1 when its load is zero).
///
/// For a bilinear coupling with unit splitting this is
/// `safety / ((β + 1/γ)‖A‖)`.
pub fn default_steps(l: &LipschitzQuad, s: &Splitting, safety: f64) -> (f64, f64) {
    let pick = |load: f64| if load > 0.0 { safety / load } else { 1.0 };
    (pick(s.x_load(l)), pick(s.y_load(l)))
}

/// Common step `σ` for a geometric schedule, leaving margin `1 − safety`
/// on both sides.
pub fn default_geometric_sigma(l: &LipschitzQuad, s: &Splitting, safety: f64) -> f64 {
    let load = s.x_load(l).max(s.y_load(l));
    if load > 0.0 {
        safety / load
    } else {
        1.0
    }
}

pub fn make_constant(
    tau0: f64,
    sigma0: f64,
    t0: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
) -> Result<StepSchedule> {
    for (name, v) in [
        ("tau", tau0),
        ("sigma", sigma0),
        ("t0", t0),
        ("alpha", alpha),
        ("beta", beta),
        ("gamma", gamma),
        ("delta", delta),
    ] {
        positive(name, v)?;
    }
    Ok(StepSchedule {
        kind: ScheduleKind::Constant,
        base: StepParams {
            tau: tau0,
            sigma: sigma0,
            lambda: 1.0,
            theta: 1.0,
            alpha,
            beta,
            gamma,
            delta,
            t: t0,
        },
        mu1: 0.0,
        mu2: 0.0,
        theta_ratio: 1.0,
        horizon: DEFAULT_HORIZON,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn make_geometric(
    sigma: f64,
    mu1: f64,
    mu2: f64,
    t0: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
) -> Result<StepSchedule> {
    if !(mu1.is_finite() && mu2.is_finite() && mu1 >= 0.0 && mu2 >= 0.0) {
        return Err(Error::InvalidParameter("moduli must be finite and >= 0".into()));
    }
    let mu = mu1.min(mu2);
    if mu <= 0.0 {
        return Err(Error::NotStronglyConvex);
    }
    for (name, v) in [
        ("sigma", sigma),
        ("t0", t0),
        ("alpha", alpha),
        ("beta", beta),
        ("gamma", gamma),
        ("delta", delta),
    ] {
        positive(name, v)?;
    }
    Ok(StepSchedule {
        kind: ScheduleKind::Geometric,
        base: StepParams {
            tau: sigma,
            sigma,
            lambda: 1.0,
            theta: 1.0,
            alpha,
            beta,
            gamma,
            delta,
            t: t0,
        },
        mu1,
        mu2,
        theta_ratio: 1.0 / (1.0 + mu * sigma),
        horizon: DEFAULT_HORIZON,
    })
}

impl StepSchedule {
    pub fn constant(tau: f64, sigma: f64, t0: f64, s: Splitting) -> Result<Self> {
        make_constant(tau, sigma, t0, s.alpha, s.beta, s.gamma, s.delta)
    }

    pub fn geometric(sigma: f64, mu1: f64, mu2: f64, t0: f64, s: Splitting) -> Result<Self> {
        make_geometric(sigma, mu1, mu2, t0, s.alpha, s.beta, s.gamma, s.delta)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn base(&self) -> StepParams {
        self.base
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn theta_ratio(&self) -> f64 {
        self.theta_ratio
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn t0(&self) -> f64 {
        self.base.t
    }

    pub fn splitting(&self) -> Splitting {
        Splitting {
            alpha: self.base.alpha,
            beta: self.base.beta,
            gamma: self.base.gamma,
            delta: self.base.delta,
        }
    }

    /// `θ_k` (and `λ_k`), without the horizon check.
    fn theta_at(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.theta_ratio
        }
    }

    pub fn step_params(&self, k: usize) -> Result<StepParams> {
        if k > self.horizon {
            return Err(Error::BeyondHorizon {
                k,
                horizon: self.horizon,
            });
        }
        let theta = self.theta_at(k);
        Ok(StepParams {
            lambda: theta,
            theta,
            t: self.t_at(k),
            ..self.base
        })
    }

    fn t_at(&self, k: usize) -> f64 {
        match self.kind {
            ScheduleKind::Constant => self.base.t,
            ScheduleKind::Geometric => self.base.t / self.t0_over_t(k),
        }
    }

    /// `ln t_k`, finite even where `t_k` itself overflows.
    pub fn ln_t(&self, k: usize) -> f64 {
        match self.kind {
            ScheduleKind::Constant => self.base.t.ln(),
            ScheduleKind::Geometric => self.base.t.ln() - k as f64 * self.theta_ratio.ln(),
        }
    }

    /// `t_{k+1} / t_k`.
    pub fn t_growth(&self, k: usize) -> f64 {
        1.0 / self.theta_at(k + 1)
    }

    /// `t0 / t_k = θ_1⋯θ_k`.
    pub fn t0_over_t(&self, k: usize) -> f64 {
        match self.kind {
            ScheduleKind::Constant => 1.0,
            ScheduleKind::Geometric => self.theta_ratio.powi(k as i32),
        }
    }

    /// `(η_x, η_y)` from the suprema and infima of the sequences over
    /// `0..=horizon`. With `λ_0 = θ_0 = 1` the supremum of `λ_kα_k` is `α`.
    pub fn eta_margins(&self, l: &LipschitzQuad) -> (f64, f64) {
        let p = &self.base;
        // sup λ_k = sup θ_k = 1 for both kinds, attained at k = 0
        let (sup_lambda, sup_theta) = (1.0, 1.0);
        let eta_x = 1.0
            - p.tau
                * (l.lxx * sup_lambda * p.alpha
                    + l.lxy * sup_lambda * p.beta
                    + l.lxx / p.alpha
                    + l.lyx / p.gamma);
        let eta_y = 1.0
            - p.sigma
                * (l.lyx * sup_theta * p.gamma
                    + l.lyy * sup_theta * p.delta
                    + l.lxy / p.beta
                    + l.lyy / p.delta);
        (eta_x, eta_y)
    }

    pub fn validate(&self, l: &LipschitzQuad) -> FeasibilityReport {
        let (eta_x, eta_y) = self.eta_margins(l);
        let mut theta_ok = true;
        let mut t_ok = true;
        let mut tau_ok = true;
        let mut sigma_ok = true;
        let ln_t0 = self.base.t.ln();
        let mut ln_prod = 0.0;
        for k in 0..=self.horizon {
            let p = self.unchecked(k);
            theta_ok &= p.theta <= 1.0 && p.lambda == p.theta;
            if k > 0 {
                ln_prod += p.theta.ln();
            }
            // t_k·θ_1⋯θ_k = t0, compared in log space so overflow cannot hide a mismatch
            let ln_err = self.ln_t(k) + ln_prod - ln_t0;
            t_ok &= ln_err.abs() <= T_CONSISTENCY_RTOL * (1.0 + k as f64).max(ln_t0.abs());
            if k < self.horizon {
                let next = self.unchecked(k + 1);
                tau_ok &=
                    next.tau >= p.tau / (next.theta * (1.0 + self.mu1 * p.tau)) - RECURSION_TOL;
                sigma_ok &= next.sigma
                    >= p.sigma / (next.theta * (1.0 + self.mu2 * p.sigma)) - RECURSION_TOL;
            }
        }
        FeasibilityReport {
            eta_x,
            eta_y,
            recursion_tau_ok: tau_ok,
            recursion_sigma_ok: sigma_ok,
            theta_le_one_ok: theta_ok,
            t_consistent_ok: t_ok,
            feasible: eta_x > 0.0 && eta_y > 0.0 && tau_ok && sigma_ok && theta_ok && t_ok,
        }
    }

    fn unchecked(&self, k: usize) -> StepParams {
        let theta = self.theta_at(k);
        StepParams {
            lambda: theta,
            theta,
            t: self.t_at(k),
            ..self.base
        }
    }
}

pub fn eta_margins(schedule: &StepSchedule, l: &LipschitzQuad) -> (f64, f64) {
    schedule.eta_margins(l)
}

pub fn validate(schedule: &StepSchedule, l: &LipschitzQuad) -> FeasibilityReport {
    schedule.validate(l)
}
