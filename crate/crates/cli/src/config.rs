//! JSON experiment configuration.

use std::path::PathBuf;

use dcflow::{
    make_double_well, make_quadratic, make_shifted_decomposition, DcProblem, FlowConfig, Matrix, NewtonConfig,
    SchemeConfig, Vector,
};
use serde::Deserialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub experiment: Experiment,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Extra starts drawn uniformly from the problem region (or the start box).
    #[serde(default)]
    pub random_starts: usize,
    /// Half width of the start box for problems without a region.
    #[serde(default = "default_start_half_width")]
    pub start_half_width: f64,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default)]
    pub etas: Option<Vec<f64>>,
    #[serde(default)]
    pub x_star: Option<Vec<f64>>,
    #[serde(default)]
    pub local: LocalSpec,
    #[serde(default)]
    pub rate: RateSpec,
    #[serde(default)]
    pub compare: Option<CompareSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_start_half_width() -> f64 {
    2.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("dcflow-out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Experiment {
    RunScheme,
    RunFlow,
    EtaSweep,
    RefinementStudy,
    Linearize,
    RateCertify,
    DecompositionCompare,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::RunScheme => "RunScheme",
            Experiment::RunFlow => "RunFlow",
            Experiment::EtaSweep => "EtaSweep",
            Experiment::RefinementStudy => "RefinementStudy",
            Experiment::Linearize => "Linearize",
            Experiment::RateCertify => "RateCertify",
            Experiment::DecompositionCompare => "DecompositionCompare",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `g = ½xᵀAx`, `h = ½xᵀBx`; rows of each matrix as nested arrays.
    Quadratic {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default)]
        shift: Option<Vec<f64>>,
    },
    DoubleWell {
        q: Vec<f64>,
        #[serde(default)]
        shift: Option<Vec<f64>>,
    },
}

/// A built problem plus the matrices of its linear flow, when it has one.
pub struct Problem {
    pub inner: Box<dyn DcProblem<f64>>,
    pub linear: Option<(Matrix, Matrix)>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!("{what} must be a non-empty square matrix")));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem, CliError> {
        let invalid = |e: dcflow::DcError| CliError::Config(format!("invalid problem: {e}"));
        let (base, linear, shift): (Box<dyn DcProblem<f64>>, _, _) = match self {
            ProblemSpec::Quadratic { a, b, shift } => {
                let (a, b) = (matrix(a, "a")?, matrix(b, "b")?);
                let p = make_quadratic(a.clone(), b.clone()).map_err(invalid)?;
                (Box::new(p), Some((a, b)), shift)
            }
            ProblemSpec::DoubleWell { q, shift } => {
                let p = make_double_well(Vector::from_vec(q.clone())).map_err(invalid)?;
                (Box::new(p), None, shift)
            }
        };
        match shift {
            None => Ok(Problem { inner: base, linear }),
            Some(d) => {
                let d = Vector::from_vec(d.clone());
                let linear = linear.map(|(a, b)| {
                    let dm = Matrix::from_diagonal(&d);
                    (a + &dm, b + dm)
                });
                let shifted = make_shifted_decomposition(base, d).map_err(invalid)?;
                Ok(Problem { inner: Box::new(shifted), linear })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemeMode {
    #[default]
    Primal,
    Dual,
    /// Run both forms and compare them iterate by iterate.
    Both,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSpec {
    pub tol_grad: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
}

impl Default for NewtonSpec {
    fn default() -> Self {
        let d = NewtonConfig::<f64>::default();
        Self { tol_grad: d.tol_grad, max_iter: d.max_iter, armijo_c: d.armijo_c, armijo_shrink: d.armijo_shrink }
    }
}

impl NewtonSpec {
    pub fn to_config(self) -> NewtonConfig<f64> {
        NewtonConfig {
            tol_grad: self.tol_grad,
            max_iter: self.max_iter,
            armijo_c: self.armijo_c,
            armijo_shrink: self.armijo_shrink,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSpec {
    pub eta: f64,
    pub max_iter: usize,
    pub stop_grad_tol: f64,
    pub mode: SchemeMode,
    pub newton: NewtonSpec,
}

impl Default for SchemeSpec {
    fn default() -> Self {
        let d = SchemeConfig::<f64>::default();
        Self {
            eta: d.eta,
            max_iter: d.max_iter,
            stop_grad_tol: d.stop_grad_tol,
            mode: SchemeMode::Primal,
            newton: NewtonSpec::default(),
        }
    }
}

impl SchemeSpec {
    pub fn to_config(self) -> SchemeConfig<f64> {
        self.with_eta(self.eta)
    }

    pub fn with_eta(self, eta: f64) -> SchemeConfig<f64> {
        SchemeConfig { eta, max_iter: self.max_iter, stop_grad_tol: self.stop_grad_tol, newton: self.newton.to_config() }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSpec {
    pub t_end: f64,
    pub step_init: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub record_stride: f64,
    pub equilibrium_tol: f64,
    pub min_step: f64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        let d = FlowConfig::<f64>::default();
        Self {
            t_end: d.t_end,
            step_init: d.step_init,
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            record_stride: d.record_stride,
            equilibrium_tol: d.equilibrium_tol,
            min_step: d.min_step,
        }
    }
}

impl FlowSpec {
    pub fn to_config(self, newton: NewtonSpec) -> FlowConfig<f64> {
        FlowConfig {
            t_end: self.t_end,
            step_init: self.step_init,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            newton: newton.to_config(),
            record_stride: self.record_stride,
            equilibrium_tol: self.equilibrium_tol,
            min_step: self.min_step,
        }
    }
}

/// Settings for local analyses around a critical point.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalSpec {
    pub radius: f64,
    pub n_steps: usize,
    pub fd_step: f64,
    /// Half width of the box used for the local exponential certificate.
    pub box_half_width: f64,
    /// Flow starts sampled inside that box.
    pub box_starts: usize,
}

impl Default for LocalSpec {
    fn default() -> Self {
        Self { radius: 1e-3, n_steps: 60, fd_step: 1e-4, box_half_width: 0.1, box_starts: 10 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSpec {
    pub theta: f64,
    /// Constant of the metric relative-error bound; derived from σ when absent.
    pub c: Option<f64>,
    /// Sample count for empirical σ estimates.
    pub sigma_samples: usize,
}

impl Default for RateSpec {
    fn default() -> Self {
        Self { theta: 0.5, c: None, sigma_samples: 256 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub shift: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.x0.is_none() && self.random_starts == 0 {
            return bad("either x0 or random_starts > 0 is required".into());
        }
        if !(self.start_half_width > 0.0 && self.start_half_width.is_finite()) {
            return bad("start_half_width must be positive".into());
        }
        self.scheme.to_config().validate().map_err(|e| CliError::Config(format!("scheme: {e}")))?;
        self.flow.to_config(self.scheme.newton).validate().map_err(|e| CliError::Config(format!("flow: {e}")))?;
        if let Some(etas) = &self.etas {
            if etas.is_empty() || etas.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
                return bad("etas must be a non-empty list in (0, 1]".into());
            }
        }
        let l = &self.local;
        if !(l.radius > 0.0 && l.fd_step > 0.0 && l.box_half_width > 0.0) || l.n_steps < 2 {
            return bad("local: radius, fd_step and box_half_width must be positive, n_steps >= 2".into());
        }
        if !(self.rate.theta >= 0.5 && self.rate.theta < 1.0) {
            return bad("rate.theta must lie in [0.5, 1)".into());
        }
        if self.rate.c.is_some_and(|c| !(c > 0.0)) {
            return bad("rate.c must be positive".into());
        }
        if self.experiment == Experiment::DecompositionCompare
            && self.compare.as_ref().is_none_or(|c| c.problem.is_none() && c.shift.is_none())
        {
            return bad("DecompositionCompare needs compare.problem or compare.shift".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema_version": 1, "problem": {"name": "double_well", "q": [1, 4]},
        "experiment": "RunFlow", "x0": [0.5, 0.5]}"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, Experiment::RunFlow);
        assert_eq!(cfg.flow.rel_tol, 1e-8);
        assert_eq!(cfg.scheme.newton.tol_grad, 1e-10);
        assert_eq!(cfg.problem.build().unwrap().inner.dim(), 2);
    }

    #[test]
    fn schema_version_is_mandatory() {
        let text = MINIMAL.replace("\"schema_version\": 1,", "");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
        let text = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(ExperimentConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_fields_and_problems_rejected() {
        let text = MINIMAL.replace("\"x0\"", "\"xzero\"");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = MINIMAL.replace("double_well", "rosenbrock");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn shifted_quadratic_keeps_linear_flow() {
        let spec = ProblemSpec::Quadratic {
            a: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            b: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            shift: Some(vec![2.0, 2.0]),
        };
        let p = spec.build().unwrap();
        let (a, b) = p.linear.unwrap();
        assert_eq!(a[(0, 0)], 4.0);
        assert_eq!(b[(1, 1)], 3.0);
        assert_eq!(p.inner.mu(), 4.0);
    }

    #[test]
    fn invalid_matrices_rejected() {
        let spec = ProblemSpec::Quadratic { a: vec![vec![1.0, 0.0]], b: vec![vec![0.0]], shift: None };
        assert!(spec.build().is_err());
        let spec = ProblemSpec::Quadratic { a: vec![vec![1.0]], b: vec![vec![2.0]], shift: None };
        assert!(spec.build().is_err());
    }
}
