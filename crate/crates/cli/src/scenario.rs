//! Scenario files: TOML, versioned, unknown keys rejected.
//!
//! A parsed [`Scenario`] is already fully resolved (every default is
//! explicit), so `to_toml` followed by `parse` gives back an equal value.

use std::path::{Path, PathBuf};

use qdnls::problem::{parse_exact, CoefficientTensor, ExactComplex, MassTriple};
use qdnls::solver::{GridSpec, InitialDataSpec, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Run directory (relative paths are taken from the working directory).
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Analyses `simulate` runs on the finished trajectory.
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
    /// Exact masses, e.g. `["1", "1", "2"]` or `["1/2", "-1", "-1/2"]`.
    pub masses: [String; 3],
    pub grid: GridSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub coefficients: Vec<CoefficientEntry>,
    #[serde(default)]
    pub decay: DecaySection,
    #[serde(default)]
    pub scatter: ScatterSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifespan: Option<LifespanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast: Option<ContrastSection>,
    #[serde(default)]
    pub identities: IdentitiesSection,
    #[serde(default)]
    pub checks: Checks,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/default")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diagnostic {
    Decay,
    Scatter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSection {
    Gaussian {
        width: f64,
        #[serde(default)]
        phases: [f64; 3],
    },
    ModulatedGaussian {
        centers: [[f64; 2]; 3],
        widths: [f64; 3],
        #[serde(default)]
        wavevectors: [[f64; 2]; 3],
        #[serde(default)]
        phases: [f64; 3],
    },
    /// Seeded from the scenario's `seed`.
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        band: Option<usize>,
    },
    Snapshot {
        path: PathBuf,
    },
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection::Gaussian { width: 1.0, phases: [0.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub nu: f64,
    pub dealias: bool,
    pub cadence: usize,
    pub norm_order: usize,
    pub stop_on_boundary: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            dt: 0.01,
            t_final: 1.0,
            nu: 0.0,
            dealias: true,
            cadence: 100,
            norm_order: 1,
            stop_on_boundary: true,
        }
    }
}

/// One nonzero entry `C[equation][alpha][beta] = re + i im`; slot 0 is the
/// underived factor, slot `a` is `∂_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    pub equation: usize,
    pub alpha: usize,
    pub beta: usize,
    #[serde(default = "zero_text")]
    pub re: String,
    #[serde(default = "zero_text")]
    pub im: String,
}

fn zero_text() -> String {
    "0".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayQuantity {
    /// Sum of component sup norms.
    Sup,
    /// `Σ_j Σ_{|α| ≤ order} ‖Γ^α F_j‖`.
    Nonlinearity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySection {
    pub quantity: DecayQuantity,
    pub order: usize,
    pub window: [f64; 2],
}

impl Default for DecaySection {
    fn default() -> Self {
        Self { quantity: DecayQuantity::Sup, order: 5, window: [4.0, 64.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterSection {
    /// Convergence is measured in `Σ^{s-1}`.
    pub s: usize,
    pub window: [f64; 2],
    /// End of the decade reported as the final-decade ratio.
    pub decade_end: f64,
}

impl Default for ScatterSection {
    fn default() -> Self {
        Self { s: 7, window: [4.0, 40.0], decade_end: 40.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifespanSection {
    /// Strictly decreasing amplitudes.
    pub epsilons: Vec<f64>,
    pub cap: f64,
}

/// Paired runs for the null/non-null comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastSection {
    pub null: PathBuf,
    pub nonnull: PathBuf,
    #[serde(default = "default_contrast_s")]
    pub s: usize,
    #[serde(default = "default_contrast_window")]
    pub window: [f64; 2],
}

fn default_contrast_s() -> usize {
    6
}

fn default_contrast_window() -> [f64; 2] {
    [4.0, 64.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentitiesSection {
    /// Mass triples to sweep; the scenario masses when empty.
    pub masses: Vec<[String; 3]>,
    pub times: Vec<f64>,
    /// `[dim, n, length]` grids.
    pub grids: Vec<[f64; 3]>,
    pub ceiling: f64,
}

impl Default for IdentitiesSection {
    fn default() -> Self {
        Self {
            masses: Vec::new(),
            times: vec![0.5, 1.0, 2.0],
            grids: vec![[1.0, 1024.0, 40.0], [2.0, 128.0, 40.0]],
            ceiling: 1e-7,
        }
    }
}

/// Optional numerical acceptance thresholds; a violated one makes the
/// command exit with status 3.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_se_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_slope_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonnull_slope_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_exponent_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_decade_ratio_max: Option<f64>,
    /// Lower bound on `D(end)/D(end/10)` for the dyadic drift `D`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_decade_ratio_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lifespan_increasing: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lifespan_capped: Option<bool>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are all serializable")
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.version != FORMAT_VERSION {
            return Err(CliError::Config(format!(
                "unsupported scenario version {} (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        self.mass_triple()?;
        self.tensor()?;
        for m in &self.identities.masses {
            masses_from(m)?;
        }
        for g in &self.identities.grids {
            if g[0].fract() != 0.0 || g[1].fract() != 0.0 {
                return Err(CliError::Config(format!("identities.grids entry {g:?}: dim and n must be integers")));
            }
        }
        if let Some(l) = &self.lifespan {
            if l.epsilons.iter().any(|&e| !(e > 0.0)) || l.epsilons.windows(2).any(|w| w[1] >= w[0]) {
                return Err(CliError::Config("lifespan.epsilons must be positive and strictly decreasing".into()));
            }
        }
        let cfg = self.solver_config_unchecked(Path::new("."));
        cfg.grid.build().map_err(|e| CliError::Config(format!("grid: {e}")))?;
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn mass_triple(&self) -> Result<MassTriple, CliError> {
        masses_from(&self.masses)
    }

    pub fn tensor(&self) -> Result<CoefficientTensor, CliError> {
        let mut c = CoefficientTensor::zeros(self.grid.dim).map_err(|e| CliError::Config(format!("grid.dim: {e}")))?;
        for (k, e) in self.coefficients.iter().enumerate() {
            let ctx = |msg: String| CliError::Config(format!("coefficients[{k}]: {msg}"));
            let re = parse_exact(&e.re).map_err(|err| ctx(err.to_string()))?;
            let im = parse_exact(&e.im).map_err(|err| ctx(err.to_string()))?;
            c.add(e.equation, e.alpha, e.beta, &ExactComplex::new(re, im)).map_err(|err| ctx(err.to_string()))?;
        }
        Ok(c)
    }

    /// Solver configuration; relative snapshot paths resolve against `base`.
    pub fn solver_config(&self, base: &Path) -> Result<SolverConfig, CliError> {
        let cfg = self.solver_config_unchecked(base);
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    fn solver_config_unchecked(&self, base: &Path) -> SolverConfig {
        let data = match &self.data {
            DataSection::Gaussian { width, phases } => InitialDataSpec::Gaussian { width: *width, phases: *phases },
            DataSection::ModulatedGaussian { centers, widths, wavevectors, phases } => {
                InitialDataSpec::ModulatedGaussian {
                    centers: *centers,
                    widths: *widths,
                    wavevectors: *wavevectors,
                    phases: *phases,
                }
            }
            DataSection::Random { band } => InitialDataSpec::Random { seed: self.seed, band: *band },
            DataSection::Snapshot { path } => InitialDataSpec::Snapshot { path: base.join(path) },
        };
        let s = &self.solver;
        SolverConfig {
            masses: self.mass_triple().unwrap_or_else(|_| MassTriple::from_integers(1, 1, 2).unwrap()),
            coefficients: self.tensor().unwrap_or_else(|_| CoefficientTensor::zeros(self.grid.dim.max(1)).unwrap()),
            grid: GridSpec { dim: self.grid.dim, n: self.grid.n, length: self.grid.length },
            data,
            epsilon: s.epsilon,
            dt: s.dt,
            t_final: s.t_final,
            nu: s.nu,
            dealias: s.dealias,
            cadence: s.cadence,
            norm_order: s.norm_order,
            stop_on_boundary: s.stop_on_boundary,
        }
    }
}

pub fn masses_from(text: &[String; 3]) -> Result<MassTriple, CliError> {
    let parse = |k: usize| parse_exact(&text[k]).map_err(|e| CliError::Config(format!("masses[{k}]: {e}")));
    MassTriple::new(parse(0)?, parse(1)?, parse(2)?).map_err(|e| CliError::Config(format!("masses: {e}")))
}
