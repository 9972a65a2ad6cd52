//! JSON run configuration.

use std::path::{Path, PathBuf};

use appa_core::oracle::saddle_reference;
use appa_core::schedule::{default_geometric_sigma, default_steps, DEFAULT_SAFETY};
use appa_core::{
    Coupling, CouplingKind, Error, Matrix, PrimalDualPoint, Regularizer, Result, SaddleProblem,
    ScheduleKind, Splitting, StepSchedule, StopRule,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    /// CSV file with one matrix row per line, relative to the config file.
    #[serde(rename = "A_csv", default, skip_serializing_if = "Option::is_none")]
    pub a_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub coupling: CouplingSpec,
    pub f1: Regularizer,
    pub f2: Regularizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemRef {
    Path(PathBuf),
    Inline(ProblemSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitName {
    Zeros,
    UniformSimplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInit {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Named(InitName),
    Random { random: RandomInit },
    Point { x: Vec<f64>, y: Vec<f64> },
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Named(InitName::Zeros)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceName {
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReferenceSpec {
    Named(ReferenceName),
    Point { x: Vec<f64>, y: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    pub max_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub increment_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify_json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemRef,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub init: InitSpec,
    pub stop: StopSpec,
    #[serde(default)]
    pub reference: Option<ReferenceSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

/// A config with everything resolved into solver inputs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub problem: SaddleProblem,
    pub schedule: StepSchedule,
    pub init: PrimalDualPoint,
    pub stop: StopRule,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    /// Loads the problem, resolving relative paths against `base`.
    pub fn problem_spec(&self, base: &Path) -> Result<ProblemSpec> {
        match &self.problem {
            ProblemRef::Inline(p) => Ok(p.clone()),
            ProblemRef::Path(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
                let mut spec: ProblemSpec = serde_json::from_str(&text)
                    .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                // CSV paths inside a problem file are relative to that file;
                // build() joins the result onto `base` again
                if let Some(csv) = &spec.coupling.a_csv {
                    let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                    spec.coupling.a_csv = Some(dir.join(csv));
                }
                Ok(spec)
            }
        }
    }

    pub fn prepare(&self, base: &Path) -> Result<Prepared> {
        let problem = self.problem_spec(base)?.build(base)?;
        let schedule = self.schedule.build(&problem)?;
        let reference = match &self.reference {
            None => None,
            Some(ReferenceSpec::Named(ReferenceName::Oracle)) => Some(
                saddle_reference(&problem).map_err(|e| config_err(format!("reference oracle: {e}")))?,
            ),
            Some(ReferenceSpec::Point { x, y }) => Some(PrimalDualPoint::new(x.clone(), y.clone())),
        };
        if let Some(r) = &reference {
            problem.check_dims(r).map_err(|e| config_err(format!("reference: {e}")))?;
        }
        let stop = appa_core::stop_rules(
            self.stop.max_iters,
            self.stop.increment_tol,
            self.stop.gap_tol,
            reference,
        )?;
        let init = self.init_point(&problem)?;
        Ok(Prepared {
            problem,
            schedule,
            init,
            stop,
        })
    }

    fn init_point(&self, problem: &SaddleProblem) -> Result<PrimalDualPoint> {
        let (n, m) = (problem.n(), problem.m());
        let p = match &self.init {
            InitSpec::Named(InitName::Zeros) => PrimalDualPoint::zeros(n, m),
            InitSpec::Named(InitName::UniformSimplex) => {
                PrimalDualPoint::new(vec![1.0 / n as f64; n], vec![1.0 / m as f64; m])
            }
            InitSpec::Random { random } => {
                let mut rng = ChaCha8Rng::seed_from_u64(random.seed.unwrap_or(self.seed));
                problem.sample_point(&mut rng, random.radius.unwrap_or(1.0))
            }
            InitSpec::Point { x, y } => PrimalDualPoint::new(x.clone(), y.clone()),
        };
        problem.check_dims(&p).map_err(|e| config_err(format!("init: {e}")))?;
        Ok(p)
    }
}

/// Reads a dense matrix from CSV, one row per record, no header.
pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| config_err(format!("{} row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

impl ProblemSpec {
    pub fn build(&self, base: &Path) -> Result<SaddleProblem> {
        let cs = &self.coupling;
        let rows = match (&cs.a, &cs.a_csv) {
            (Some(a), None) => a.clone(),
            (None, Some(p)) => read_matrix_csv(&base.join(p))?,
            (Some(_), Some(_)) => return Err(config_err("give either A or A_csv, not both")),
            (None, None) => vec![vec![0.0; self.m]; self.n],
        };
        let a = if rows.is_empty() {
            Matrix::zeros(self.n, self.m)
        } else {
            Matrix::from_rows(&rows)?
        };
        if (a.rows(), a.cols()) != (self.n, self.m) {
            return Err(Error::Dimension(format!(
                "A is {}x{} but the problem declares n = {}, m = {}",
                a.rows(),
                a.cols(),
                self.n,
                self.m
            )));
        }
        let b = cs.b.clone().unwrap_or_else(|| vec![0.0; self.n]);
        let c = cs.c.clone().unwrap_or_else(|| vec![0.0; self.m]);
        let coupling = match cs.kind {
            CouplingKind::Bilinear => {
                if cs.rho1.unwrap_or(0.0) != 0.0 || cs.rho2.unwrap_or(0.0) != 0.0 {
                    return Err(config_err("bilinear coupling takes no rho1/rho2"));
                }
                Coupling::bilinear(a, b, c)?
            }
            CouplingKind::QuadraticRegularizedBilinear => {
                Coupling::quadratic(a, b, c, cs.rho1.unwrap_or(0.0), cs.rho2.unwrap_or(0.0))?
            }
        };
        SaddleProblem::new(coupling, self.f1.clone(), self.f2.clone())
    }
}

impl ScheduleSpec {
    pub fn splitting(&self) -> Splitting {
        let d = Splitting::default();
        Splitting {
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta.unwrap_or(d.beta),
            gamma: self.gamma.unwrap_or(d.gamma),
            delta: self.delta.unwrap_or(d.delta),
        }
    }

    pub fn safety(&self) -> f64 {
        self.safety.unwrap_or(DEFAULT_SAFETY)
    }

    pub fn build(&self, problem: &SaddleProblem) -> Result<StepSchedule> {
        let split = self.splitting();
        let l = problem.lipschitz();
        let t0 = self.t0.unwrap_or(1.0);
        match self.kind {
            ScheduleKind::Constant => {
                let (tau, sigma) = default_steps(&l, &split, self.safety());
                StepSchedule::constant(self.tau.unwrap_or(tau), self.sigma.unwrap_or(sigma), t0, split)
            }
            ScheduleKind::Geometric => {
                let sigma = match (self.tau, self.sigma) {
                    (Some(t), Some(s)) if t != s => {
                        return Err(config_err("geometric schedules use tau = sigma"))
                    }
                    (t, s) => s.or(t),
                };
                let sigma = sigma.unwrap_or_else(|| default_geometric_sigma(&l, &split, self.safety()));
                StepSchedule::geometric(sigma, problem.mu1(), problem.mu2(), t0, split)
            }
        }
    }
}
