//! Experiment configuration: a flat TOML file with one experiment per file.
//!
//! All quantities are in the nondimensional units of the problem (unit torus,
//! unit mass). Everything is optional except `id` and `suite`; what is left
//! out falls back to the suite element's documented defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::LabError;

/// Names accepted in `suite = [...]`.
pub const KNOWN_ELEMENTS: &[&str] = &[
    "heat_kernel",
    "cole_hopf",
    "thm_stability",
    "thm_main2_dual",
    "thm_one_sided",
    "thm_hjlip",
    "superquadratic",
    "gradient_corollary",
    "l1_theorem",
    "ii_and_iii",
    "benton",
];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    /// Suite elements to execute, in order.
    pub suite: Vec<String>,
    /// Base seed; element seeds derive from it deterministically.
    #[serde(default)]
    pub seed: u64,
    /// Seed count for seeded sweeps (elements cap this to their protocol).
    #[serde(default)]
    pub seeds: Option<usize>,
    /// Viscosity sweep override.
    #[serde(default)]
    pub epsilons: Option<Vec<f64>>,
    /// Margin sweep override for the stability suite.
    #[serde(default)]
    pub margins: Option<Vec<f64>>,
    /// Norm exponent sweep override.
    #[serde(default)]
    pub ps: Option<Vec<f64>>,
    /// Run at doubled resolution and halved step (the refinement variant).
    #[serde(default)]
    pub refine: bool,
    /// Write trajectory binaries alongside manifests.
    #[serde(default = "default_true")]
    pub write_trajectories: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, LabError> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| LabError::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, LabError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            LabError::Config(msg) => {
                LabError::Config(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    fn validate(&self) -> Result<(), LabError> {
        if self.id.is_empty() {
            return Err(LabError::Config("experiment id must be nonempty".into()));
        }
        for el in &self.suite {
            if !KNOWN_ELEMENTS.contains(&el.as_str()) {
                return Err(LabError::UnknownElement(el.clone()));
            }
        }
        if let Some(eps) = &self.epsilons {
            if eps.iter().any(|e| *e < 0.0) {
                return Err(LabError::Config("epsilons must be nonnegative".into()));
            }
        }
        if let Some(ms) = &self.margins {
            if ms.iter().any(|m| !(*m > 0.0 && *m <= 1.0)) {
                return Err(LabError::Config("margins must lie in (0, 1]".into()));
            }
        }
        if let Some(ps) = &self.ps {
            if ps.iter().any(|p| *p < 1.0) {
                return Err(LabError::Config("norm exponents must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Direct single-run simulation description (`lab simulate`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub id: String,
    pub kind: SimKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Uniform step; ignored when `geometric` is set.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub geometric: Option<GeometricMeshCfg>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_amp")]
    pub data_amplitude: f64,
    pub drift: DriftCfg,
    #[serde(default = "default_stride")]
    pub record_every: usize,
    #[serde(default)]
    pub second_order: bool,
}

fn default_dim() -> usize {
    1
}
fn default_n() -> usize {
    64
}
fn default_eps() -> f64 {
    1.0
}
fn default_t_end() -> f64 {
    0.25
}
fn default_amp() -> f64 {
    0.5
}
fn default_stride() -> usize {
    25
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimKind {
    FokkerPlanck,
    TransportDiffusion,
    HamiltonJacobi,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GeometricMeshCfg {
    pub sigma: f64,
    pub steps: usize,
}

/// Drift constructor selection, mirroring the field constructors.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftCfg {
    Zero,
    Divfree { amplitude: f64 },
    Lrlq { q: String, r: String, margin: f64 },
    OneSided { c1: f64, c2: f64 },
}

impl SimulateConfig {
    pub fn parse(text: &str) -> Result<SimulateConfig, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(format!("{e}")))
    }

    pub fn load(path: &Path) -> Result<SimulateConfig, LabError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            LabError::Config(msg) => LabError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// The bundled configuration that executes every acceptance element.
pub fn acceptance_config() -> ExperimentConfig {
    ExperimentConfig {
        id: "acceptance".into(),
        suite: KNOWN_ELEMENTS.iter().map(|s| s.to_string()).collect(),
        seed: 0,
        seeds: None,
        epsilons: None,
        margins: None,
        ps: None,
        refine: false,
        write_trajectories: true,
    }
}

/// TOML text matching [`acceptance_config`], bundled for `lab verify`.
pub const ACCEPTANCE_TOML: &str = r#"id = "acceptance"
suite = [
    "heat_kernel",
    "cole_hopf",
    "thm_stability",
    "thm_main2_dual",
    "thm_one_sided",
    "thm_hjlip",
    "superquadratic",
    "gradient_corollary",
    "l1_theorem",
    "ii_and_iii",
    "benton",
]
seed = 0
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_acceptance_toml_parses_to_the_same_config() {
        let parsed = ExperimentConfig::parse(ACCEPTANCE_TOML).unwrap();
        let built = acceptance_config();
        assert_eq!(parsed.id, built.id);
        assert_eq!(parsed.suite, built.suite);
        assert_eq!(parsed.seed, built.seed);
    }

    #[test]
    fn unknown_element_rejected_with_name() {
        let text = "id = \"x\"\nsuite = [\"nope\"]\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert!(matches!(err, LabError::UnknownElement(n) if n == "nope"));
    }

    #[test]
    fn bad_margin_rejected() {
        let text = "id = \"x\"\nsuite = [\"benton\"]\nmargins = [0.0]\n";
        assert!(ExperimentConfig::parse(text).is_err());
    }

    #[test]
    fn toml_syntax_error_carries_location() {
        let err = ExperimentConfig::parse("id = \n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line"), "diagnostic should name a line: {msg}");
    }
}
