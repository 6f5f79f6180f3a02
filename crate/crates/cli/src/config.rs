//! Run configuration: one JSON file per run.

use std::path::{Path, PathBuf};

use beckner_core::fields::{GridSpec, SampleFamily, DEFAULT_LEVELS};
use beckner_core::inequality::{OptimizerConfig, VerifyConfig};
use beckner_core::{CoefficientSystem, Grid, IndexSet};
use serde::Deserialize;

use crate::error::{config_error, CliError};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: CoefficientSystem,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub sigma_override: Option<f64>,
    #[serde(default)]
    pub separation_rho: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub experiment: Experiment,
}

fn default_grid() -> GridSpec {
    GridSpec {
        extents: vec![1.0, 1.0],
        resolution: vec![32, 32],
    }
}

fn default_p() -> f64 {
    2.0
}

/// Per-subcommand settings; every section is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    pub coarea: CoareaSpec,
    pub isoperimetric: IsoperimetricSpec,
    pub regimes: FieldSpec,
    pub blowup: BlowupSpec,
    pub estimate_c: EstimateSpec,
    pub verify: VerifySpec,
    pub entropy: FieldSpec,
}

/// Scalar test functions for the coarea table, on cell centres.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    X,
    XPlusY,
    /// Distance to the centre of the domain.
    Radial,
}

impl TestFunction {
    pub fn name(self) -> &'static str {
        match self {
            TestFunction::X => "x",
            TestFunction::XPlusY => "x_plus_y",
            TestFunction::Radial => "radial",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoareaSpec {
    pub resolutions: Vec<usize>,
    pub function: TestFunction,
    pub levels: usize,
    /// Level window; defaults to the range of the function over the domain.
    pub window: Option<[f64; 2]>,
}

impl Default for CoareaSpec {
    fn default() -> Self {
        CoareaSpec {
            resolutions: vec![32, 64, 128, 256],
            function: TestFunction::XPlusY,
            levels: DEFAULT_LEVELS,
            window: None,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsoperimetricSpec {
    /// Defaults to the standard families seeded with the run seed.
    pub families: Option<Vec<SampleFamily>>,
}

/// A field for `regimes` and `entropy`.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// The constant degenerate state `u_I`; the empty set gives coexistence.
    Degenerate {
        #[serde(default)]
        set: IndexSet,
    },
    Constant {
        values: Vec<f64>,
    },
    /// Linear in the first coordinate from `from` at `x = 0` to `to` at the far end.
    Ramp {
        from: Vec<f64>,
        to: Vec<f64>,
    },
    /// A field dump in CSV form.
    Csv {
        path: PathBuf,
    },
    /// A field dump in binary form; extents come from the grid section.
    Binary {
        path: PathBuf,
    },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Degenerate {
            set: IndexSet::EMPTY,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupSpec {
    /// Target set (one-based); defaults to all species.
    pub set: Option<IndexSet>,
    pub steps: usize,
}

impl Default for BlowupSpec {
    fn default() -> Self {
        BlowupSpec {
            set: None,
            steps: 8,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSpec {
    /// Separations for the `C(ρ)` curve; defaults to `[separation_rho]`.
    pub rhos: Vec<f64>,
    /// The optimizer seed is taken from the run seed.
    pub optimizer: OptimizerConfig,
    pub binary_dump: bool,
}

impl Default for EstimateSpec {
    fn default() -> Self {
        EstimateSpec {
            rhos: Vec::new(),
            optimizer: OptimizerConfig::default(),
            binary_dump: true,
        }
    }
}

/// Sampling settings; seed, `p` and `σ` come from the run.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub samples: usize,
    pub bins: Vec<f64>,
    pub eps0_candidates: Vec<f64>,
    pub delta: f64,
    pub rays: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        let d = VerifyConfig::default();
        VerifySpec {
            samples: d.samples,
            bins: d.bins,
            eps0_candidates: d.eps0_candidates,
            delta: d.delta,
            rays: d.rays,
        }
    }
}

impl RunConfig {
    /// Parse and validate; relative paths resolve against the config's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = base.join(&cfg.output_dir);
        for spec in [&mut cfg.experiment.regimes, &mut cfg.experiment.entropy] {
            if let FieldSpec::Csv { path } | FieldSpec::Binary { path } = spec {
                *path = base.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(config_error(format!(
                "p = {} must be finite and ≥ 1",
                self.p
            )));
        }
        if let Some(s) = self.sigma_override {
            if !(s > 0.0 && s.is_finite()) {
                return Err(config_error("sigma_override must be positive"));
            }
        }
        if let Some(r) = self.separation_rho {
            if !(r > 0.0 && r.is_finite()) {
                return Err(config_error("separation_rho must be positive"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::try_from(self.grid.clone())?)
    }

    /// The seed, required by sampling and optimization experiments.
    pub fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| config_error(format!("`{what}` needs a seed")))
    }

    pub fn verify_config(&self, seed: u64) -> VerifyConfig {
        let v = &self.experiment.verify;
        VerifyConfig {
            samples: v.samples,
            seed,
            p: self.p,
            bins: v.bins.clone(),
            eps0_candidates: v.eps0_candidates.clone(),
            delta: v.delta,
            rays: v.rays,
            sigma: self.sigma_override,
        }
    }

    pub fn separations(&self) -> Result<Vec<f64>, CliError> {
        let rhos = &self.experiment.estimate_c.rhos;
        if !rhos.is_empty() {
            return Ok(rhos.clone());
        }
        self.separation_rho.map(|r| vec![r]).ok_or_else(|| {
            config_error("`estimate-c` needs separation_rho or experiment.estimate_c.rhos")
        })
    }
}
