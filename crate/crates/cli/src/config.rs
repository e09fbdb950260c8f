use std::fmt;
use std::path::{Path, PathBuf};

use ddform::coeff::CoefficientField;
use ddform::zsolver::SolverConfig;
use ddform::{Cx, Error, Result};
use serde::{Deserialize, Serialize};

/// Coefficient family with its parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    Identity,
    G {
        kappa: f64,
        s: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    K {
        kappa: f64,
        s: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    Angular {
        #[serde(default = "identity_base")]
        base: Box<FamilySpec>,
        amplitude_re: f64,
        #[serde(default)]
        amplitude_im: f64,
        s: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_epsilon() -> f64 {
    0.2
}

fn identity_base() -> Box<FamilySpec> {
    Box::new(FamilySpec::Identity)
}

impl FamilySpec {
    pub fn build(&self) -> Result<CoefficientField<f64>> {
        match self {
            FamilySpec::Identity => Ok(CoefficientField::identity(3)),
            FamilySpec::G { kappa, s, epsilon } => CoefficientField::g_family(*kappa, *s, *epsilon),
            FamilySpec::K { kappa, s, epsilon } => CoefficientField::k_family(*kappa, *s, *epsilon),
            FamilySpec::Angular { base, amplitude_re, amplitude_im, s, epsilon } => {
                CoefficientField::angular_family(base.build()?, Cx::new(*amplitude_re, *amplitude_im), *s, *epsilon)
            }
        }
    }
}

/// One experiment of a suite; the runner orders them omega → profiles → solve → analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CheckOmega,
    BuildZ,
    CompareAsymptotic,
    CorollaryScan,
    WeakResidual,
    Decompose,
    Envelope,
}

impl Experiment {
    pub fn needs_solution(self) -> bool {
        !matches!(self, Experiment::CheckOmega)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeSpec {
    /// Fit window `(r_lo, r_hi)` inside `(r_min, 1)`.
    pub window: (f64, f64),
    /// Weight of the auxiliary solution in `u = Z + weight·u_aux`.
    pub aux_weight: f64,
    pub eps1: f64,
    pub slope_tol: f64,
    /// Allowed `|C − 1|`.
    pub c_tol: f64,
}

impl Default for DecomposeSpec {
    fn default() -> Self {
        Self { window: (1e-3, 1e-1), aux_weight: 0.1, eps1: 0.1, slope_tol: 0.1, c_tol: 0.01 }
    }
}

/// Tolerances of the per-experiment checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckTolerances {
    pub oracle: f64,
    pub residual: f64,
    pub consistency: f64,
    pub far_field_margin: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self { oracle: 1e-3, residual: 1e-4, consistency: 1e-8, far_field_margin: 0.3 }
    }
}

/// A complete experiment suite as read from one JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    /// Space dimension; only 3 is supported.
    pub n: usize,
    pub solver: SolverConfig,
    pub experiments: Vec<Experiment>,
    pub output: PathBuf,
    /// Offset of the quasi-random test-function placement.
    pub seed: u64,
    pub battery_size: usize,
    /// Radii per decade of the criterion table.
    pub criterion_per_decade: usize,
    /// Far-field fit window.
    pub far_window: (f64, f64),
    pub decompose: DecomposeSpec,
    pub tolerances: CheckTolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: FamilySpec::Identity,
            n: 3,
            solver: SolverConfig::default(),
            experiments: Vec::new(),
            output: PathBuf::from("out"),
            seed: 0,
            battery_size: 24,
            criterion_per_decade: 15,
            far_window: (2.0, 10.0),
            decompose: DecomposeSpec::default(),
            tolerances: CheckTolerances::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 3 {
            return Err(Error::Unsupported(format!("dimension n = {} (only n = 3 is implemented)", self.n)));
        }
        self.solver.validate()?;
        let (lo, hi) = self.decompose.window;
        if self.experiments.contains(&Experiment::Decompose) && !(lo >= self.solver.mesh.r_min && lo < hi && hi < 1.0) {
            return Err(Error::Validation(format!("decompose window ({lo}, {hi}) must lie inside [r_min, 1)")));
        }
        if self.criterion_per_decade == 0 {
            return Err(Error::Validation("criterion_per_decade must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"family": {"name": "k", "kappa": 0.1, "s": 0.75}}"#).unwrap();
        assert!(matches!(cfg.family, FamilySpec::K { epsilon, .. } if epsilon == 0.2));
        assert_eq!(cfg.solver.p, 2.0);
        assert!(cfg.experiments.is_empty());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"famly": {"name": "identity"}}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"solver": {"mesh": {"rmin": 1e-3}}}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiments": ["solve"]}"#).is_err());
    }

    #[test]
    fn nested_angular_family_builds() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"family": {"name": "angular", "base": {"name": "g", "kappa": 0.05, "s": 0.75}, "amplitude_re": 0.05, "s": 0.75}}"#,
        )
        .unwrap();
        assert!(cfg.family.build().is_ok());
    }

    #[test]
    fn other_dimensions_are_unsupported() {
        let cfg = ExperimentConfig { n: 4, ..ExperimentConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn experiment_names() {
        assert_eq!(Experiment::CompareAsymptotic.to_string(), "compare-asymptotic");
        assert!(Experiment::CheckOmega < Experiment::BuildZ);
    }
}
