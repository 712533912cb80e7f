//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::FitFloor;
use crate::error::{Error, Result};
use crate::optimizers::{self, Method};
use crate::problems::{self, DeblurSpec, Penalty, Problem};

/// Methods a config can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodSpec {
    Gd,
    Nesterov,
    NesterovPhase,
    Fista,
    Ode,
}

impl MethodSpec {
    pub fn name(self) -> &'static str {
        match self {
            MethodSpec::Gd => "gd",
            MethodSpec::Nesterov => "nesterov",
            MethodSpec::NesterovPhase => "nesterov-phase",
            MethodSpec::Fista => "fista",
            MethodSpec::Ode => "ode",
        }
    }

    /// The discrete method, if this is not the ODE.
    pub fn discrete(self) -> Option<Method> {
        match self {
            MethodSpec::Gd => Some(Method::Gd),
            MethodSpec::Nesterov => Some(Method::Nesterov),
            MethodSpec::NesterovPhase => Some(Method::NesterovPhase),
            MethodSpec::Fista => Some(Method::Fista),
            MethodSpec::Ode => None,
        }
    }

    pub fn uses_momentum(self) -> bool {
        self.discrete().map(|m| m.uses_momentum()).unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `Σ cᵢ(xᵢ − shiftᵢ)²`
    Quadratic {
        diag: Vec<f64>,
        #[serde(default)]
        shift: Option<Vec<f64>>,
    },
    /// `½‖Ax − b‖² + (ridge/2)‖x‖² + λ‖x‖₁` with circular blur `A`.
    LassoDeblur {
        kernel: Vec<f64>,
        /// Defaults to [`problems::blocky_signal`] of length `signal_len`.
        #[serde(default)]
        signal: Option<Vec<f64>>,
        #[serde(default = "default_signal_len")]
        signal_len: usize,
        lambda: f64,
        ridge: f64,
        #[serde(default = "default_noise_std")]
        noise_std: f64,
        /// Replace `g` by zero while keeping the composite structure.
        #[serde(default)]
        zero_penalty: bool,
    },
}

fn default_signal_len() -> usize {
    64
}

fn default_noise_std() -> f64 {
    0.01
}

fn default_r() -> Vec<f64> {
    vec![2.0]
}

fn default_max_iter() -> usize {
    10_000
}

/// Which verdicts to compute and their tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Lyapunov certificate for the momentum methods.
    pub certify: bool,
    pub contraction_window: usize,
    pub tolerance: f64,
    /// Relative tolerance of fitted slopes against the spectral prediction
    /// (quadratics only).
    pub rate_tolerance: Option<f64>,
    /// Relative tolerance of the spread of slopes across `r`.
    pub r_independence_tolerance: Option<f64>,
    pub theorem3_tolerance: f64,
    /// Richardson order check for ODE runs.
    pub order_check: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            certify: true,
            contraction_window: 2000,
            tolerance: crate::lyapunov::CONTRACTION_TOL,
            rate_tolerance: None,
            r_independence_tolerance: Some(0.05),
            theorem3_tolerance: 1e-3,
            order_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<MethodSpec>,
    /// Absolute step sizes.
    #[serde(default)]
    pub s: Vec<f64>,
    /// Step sizes as fractions of `1/L`.
    #[serde(default)]
    pub s_fraction: Vec<f64>,
    #[serde(default = "default_r")]
    pub r: Vec<f64>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub record_every: Option<usize>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub ode_dt: Option<f64>,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub fit_floor: Option<FitFloor>,
    /// Start integer negative `r` at `k = 1 − r`.
    #[serde(default)]
    pub shifted_start: bool,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Noise seed of the deblur instance.
    #[serde(default)]
    pub seed: u64,
}

fn field(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        match &self.problem {
            ProblemSpec::Quadratic { diag, shift } => {
                let shift = shift.clone().unwrap_or_else(|| vec![0.0; diag.len()]);
                if shift.len() != diag.len() {
                    return Err(field("problem.shift", "length differs from problem.diag"));
                }
                Ok(problems::make_quadratic(diag, &shift)?.into())
            }
            ProblemSpec::LassoDeblur {
                kernel,
                signal,
                signal_len,
                lambda,
                ridge,
                noise_std,
                zero_penalty,
            } => {
                let signal = signal.clone().unwrap_or_else(|| problems::blocky_signal(*signal_len));
                let spec = DeblurSpec {
                    noise_std: *noise_std,
                    ..DeblurSpec::new(kernel.clone(), signal, self.seed, *lambda, *ridge)
                };
                let c = problems::make_lasso_deblur(&spec)?;
                let c = if *zero_penalty { c.with_penalty(Penalty::Zero)? } else { c };
                Ok(c.into())
            }
        }
    }

    /// Absolute step sizes: `s` followed by `s_fraction/L`.
    pub fn step_sizes(&self, lipschitz: f64) -> Vec<f64> {
        self.s
            .iter()
            .copied()
            .chain(self.s_fraction.iter().map(|f| f / lipschitz))
            .collect()
    }

    pub fn x0(&self, dim: usize) -> Result<Vec<f64>> {
        match &self.x0 {
            Some(x) if x.len() != dim => Err(field(
                "x0",
                format!("length {} differs from problem dimension {dim}", x.len()),
            )),
            Some(x) => Ok(x.clone()),
            None => Ok(match self.problem {
                ProblemSpec::Quadratic { .. } => vec![1.0; dim],
                ProblemSpec::LassoDeblur { .. } => vec![0.0; dim],
            }),
        }
    }

    /// Checks everything that can be checked before any run starts.
    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if self.methods.is_empty() {
            return Err(field("methods", "at least one method is required"));
        }
        let steps = self.step_sizes(problem.lipschitz());
        if steps.is_empty() {
            return Err(field("s", "give at least one value in s or s_fraction"));
        }
        let discrete = self.methods.iter().any(|m| m.discrete().is_some());
        for &s in &steps {
            if !(s > 0.0 && s.is_finite()) {
                return Err(field("s", format!("step size {s} must be positive")));
            }
            if discrete && s * problem.lipschitz() >= 1.0 {
                return Err(field(
                    "s",
                    format!("step size {s} is not below 1/L = {}", 1.0 / problem.lipschitz()),
                ));
            }
        }
        if self.r.is_empty() {
            return Err(field("r", "at least one value is required"));
        }
        if self.methods.iter().any(|m| m.uses_momentum()) {
            for &r in &self.r {
                let start = if self.shifted_start { optimizers::shifted_start_index(r) } else { 0 };
                optimizers::validate_momentum(r, start, self.max_iter).map_err(|e| field("r", e.to_string()))?;
            }
        }
        if self.methods.contains(&MethodSpec::Ode) {
            match self.t_end {
                Some(t) if t > 0.0 => {}
                _ => return Err(field("t_end", "ode runs need a positive t_end")),
            }
            if !problem.penalty().is_zero() {
                return Err(field("methods", "the ODE needs a smooth problem (no l1 term)"));
            }
        }
        if self.methods.contains(&MethodSpec::Fista) && !problem.is_composite() {
            return Err(field("methods", "fista needs a composite problem (lasso-deblur)"));
        }
        if self.record_every == Some(0) {
            return Err(field("record_every", "must be at least 1"));
        }
        self.x0(problem.dim())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SLOW_QUADRATIC: &str = r#"{
        "problem": {"kind": "quadratic", "diag": [0.02, 0.0005]},
        "methods": ["nesterov"],
        "s": [1.0],
        "r": [2.0],
        "max_iter": 100000
    }"#;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::from_json(SLOW_QUADRATIC).unwrap();
        let p = c.build_problem().unwrap();
        c.validate(&p).unwrap();
        assert_eq!(c.x0(2).unwrap(), vec![1.0, 1.0]);
        assert_eq!(c.checks, Checks::default());
    }

    #[test]
    fn rejects_large_step() {
        let c = ExperimentConfig::from_json(&SLOW_QUADRATIC.replace("[1.0]", "[25.0]")).unwrap();
        let p = c.build_problem().unwrap();
        assert!(matches!(c.validate(&p), Err(Error::Config { field, .. }) if field == "s"));
    }

    #[test]
    fn rejects_singular_r() {
        let c = ExperimentConfig::from_json(&SLOW_QUADRATIC.replace("\"r\": [2.0]", "\"r\": [-3.0]")).unwrap();
        let p = c.build_problem().unwrap();
        assert!(matches!(c.validate(&p), Err(Error::Config { field, .. }) if field == "r"));
        let c = ExperimentConfig { shifted_start: true, ..c };
        c.validate(&p).unwrap();
    }

    #[test]
    fn unknown_field_reports_position() {
        let err = ExperimentConfig::from_json("{\n \"problem\": {\"kind\": \"quadratic\", \"diag\": [1]},\n \"methods\": [\"gd\"],\n \"stepsize\": 1\n}")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("stepsize") && msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn deblur_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"problem": {"kind": "lasso-deblur", "kernel": [0.3333333333333333, 0.3333333333333333, 0.3333333333333333], "lambda": 0.1, "ridge": 0.5},
                "methods": ["fista"], "s_fraction": [0.9], "seed": 7}"#,
        )
        .unwrap();
        let p = c.build_problem().unwrap();
        c.validate(&p).unwrap();
        assert_eq!(p.dim(), 64);
        assert_eq!(p.mu(), 0.5);
        assert_eq!(c.x0(64).unwrap(), vec![0.0; 64]);
    }

    #[test]
    fn ode_needs_horizon() {
        let c = ExperimentConfig::from_json(&SLOW_QUADRATIC.replace("[\"nesterov\"]", "[\"ode\"]")).unwrap();
        let p = c.build_problem().unwrap();
        assert!(matches!(c.validate(&p), Err(Error::Config { field, .. }) if field == "t_end"));
    }
}
