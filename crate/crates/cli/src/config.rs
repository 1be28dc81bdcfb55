//! JSON run configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tspec_core::verify::VerifySettings;
use tspec_core::{validate_problem, Coefficients, PerturbationSpec, TransmissionProblem};

/// Perturbations reachable from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationEntry {
    #[default]
    Zero,
    /// `q(x) = c`
    MultConst { c: f64 },
    /// `q(x) = c cos(omega x)`
    MultCos { c: f64, omega: f64 },
    /// `(A u)(x) = c u'(x)`
    FirstOrderConst { c: f64 },
    /// `K(x, y) = amplitude exp(-((x - y) / width)^2)`
    GaussKernel { amplitude: f64, width: f64 },
}

impl PerturbationEntry {
    pub fn to_spec(self) -> PerturbationSpec {
        match self {
            PerturbationEntry::Zero => PerturbationSpec::Zero,
            PerturbationEntry::MultConst { c } => PerturbationSpec::multiplication(move |_| c),
            PerturbationEntry::MultCos { c, omega } => {
                PerturbationSpec::multiplication(move |x| c * (omega * x).cos())
            }
            PerturbationEntry::FirstOrderConst { c } => PerturbationSpec::first_order(move |_| c),
            PerturbationEntry::GaussKernel { amplitude, width } => {
                PerturbationSpec::integral_kernel(move |x, y| {
                    amplitude * (-((x - y) / width).powi(2)).exp()
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub coefficients: Coefficients,
    #[serde(default)]
    pub perturbation: PerturbationEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationBlock {
    pub n_per_interval: usize,
}

impl Default for DiscretizationBlock {
    fn default() -> Self {
        DiscretizationBlock {
            n_per_interval: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Shooting,
    Matrix,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBlock {
    /// Real-part window for the shooting engine; derived from `count` when absent.
    pub window: Option<[f64; 2]>,
    /// Eigenvalues kept per branch.
    pub count: usize,
    pub engine: Engine,
    /// Sample points of the real scan.
    pub grid_points: usize,
}

impl Default for SearchBlock {
    fn default() -> Self {
        SearchBlock {
            window: None,
            count: 10,
            engine: Engine::Shooting,
            grid_points: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbelBlock {
    pub alpha: f64,
    pub theta: f64,
    pub t_values: Vec<f64>,
    pub mode_count: usize,
    /// Eigenfunctions (0-based, by modulus) summed into the test function.
    pub components: Vec<usize>,
}

impl Default for AbelBlock {
    fn default() -> Self {
        AbelBlock {
            alpha: 1.5,
            theta: PI / 4.0,
            t_values: vec![1e-4, 1e-3, 1e-2, 1e-1],
            mode_count: 40,
            components: vec![0, 1, 2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: None,
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    #[serde(default)]
    pub discretization: DiscretizationBlock,
    #[serde(default)]
    pub search: SearchBlock,
    #[serde(default)]
    pub abel: AbelBlock,
    #[serde(default)]
    pub verify: VerifySettings,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.problem()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn problem(&self) -> Result<TransmissionProblem, String> {
        validate_problem(
            self.problem.coefficients,
            self.problem.perturbation.to_spec(),
        )
        .map_err(|e| e.to_string())
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }
}
