//! Run configuration files.
//!
//! A run config is a TOML document:
//!
//! ```toml
//! problem = "bending"          # bending | vibration | buckling
//! seeds = [0]                  # network initialisations; best loss wins
//! n_interior = 4096
//! n_boundary = 256             # per boundary segment
//!
//! [domain]
//! kind = "rectangle"
//! a = 1.0
//! b = 1.0
//!
//! [boundary]
//! edges = "SSSS"               # bottom, right, top, left
//!
//! [plate]
//! poisson = 0.3
//!
//! [load]
//! kind = "sinusoidal"
//! p0 = 1.0
//! a = 1.0
//! b = 1.0
//!
//! [network]
//! encoder = [40, 20]
//! activation = "scaled_tanh"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::Activation;
use crate::error::{Error, Result};
use crate::geometry::{BoundarySegment, BoundarySpec, DomainSpec};
use crate::losses::{LossConfig, Problem};
use crate::network::{InputScaling, Layout, NetworkConfig};
use crate::optimizer::OptimConfig;
use crate::plate::{InPlane, Load, PlateSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateSection {
    pub poisson: f64,
    /// Material constants; when all are omitted the plate is nondimensional
    /// (`D = 1`, `ρh = 1`).
    #[serde(default)]
    pub youngs_modulus: Option<f64>,
    #[serde(default)]
    pub thickness: Option<f64>,
    #[serde(default)]
    pub density: Option<f64>,
    /// Winkler foundation modulus.
    #[serde(default)]
    pub foundation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub encoder: Vec<usize>,
    #[serde(default)]
    pub decoder: Option<Vec<usize>>,
    pub activation: Activation,
    #[serde(default = "default_layout")]
    pub layout: Layout,
}

fn default_layout() -> Layout {
    Layout::Autoencoder
}

/// Penalty continuation: warm-up stages with scaled boundary weights before
/// the final stage at the configured weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationSection {
    #[serde(default)]
    pub factors: Vec<f64>,
    /// Iteration cap of each warm-up stage.
    #[serde(default = "default_stage_iter")]
    pub max_iter: usize,
}

fn default_stage_iter() -> usize {
    500
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seed of the frozen quadrature points.
    #[serde(default)]
    pub sample_seed: u64,
    #[serde(default = "default_n_interior")]
    pub n_interior: usize,
    #[serde(default = "default_n_boundary")]
    pub n_boundary: usize,
    /// Points per axis of the exported evaluation grid.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub domain: DomainSpec,
    pub boundary: BoundarySpec,
    pub plate: PlateSection,
    #[serde(default = "default_load")]
    pub load: Load,
    #[serde(default)]
    pub inplane: InPlane,
    pub network: NetworkSection,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub continuation: ContinuationSection,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_n_interior() -> usize {
    4096
}

fn default_n_boundary() -> usize {
    256
}

fn default_grid() -> usize {
    101
}

fn default_load() -> Load {
    Load::None
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))
    }

    /// Reads and validates a config file. Relative output directories are
    /// resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = &cfg.output_dir {
            if dir.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                cfg.output_dir = Some(base.join(dir));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn plate_spec(&self) -> PlateSpec {
        let p = &self.plate;
        let base = match (p.youngs_modulus, p.thickness, p.density) {
            (None, None, None) => PlateSpec::nondimensional(p.poisson),
            (e, h, rho) => {
                PlateSpec::from_material(e.unwrap_or(f64::NAN), p.poisson, h.unwrap_or(f64::NAN), rho.unwrap_or(1.0))
            }
        };
        base.with_foundation(p.foundation).with_load(self.load).with_inplane(self.inplane)
    }

    pub fn network_config(&self) -> NetworkConfig {
        let n = &self.network;
        let (lo, hi) = self.domain.bbox();
        NetworkConfig {
            encoder: n.encoder.clone(),
            decoder: n.decoder.clone(),
            activation: n.activation,
            layout: n.layout,
            scaling: InputScaling::from_bbox(lo, hi),
        }
    }

    pub fn segments(&self) -> Result<Vec<BoundarySegment>> {
        self.domain.segments(&self.boundary)
    }

    /// Checks every field and their mutual consistency before any compute.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let p = &self.plate;
        if p.youngs_modulus.is_some() != p.thickness.is_some() {
            return bad("plate: youngs_modulus and thickness must be given together".into());
        }
        if p.youngs_modulus.is_none() && p.density.is_some() {
            return bad("plate: density needs youngs_modulus and thickness".into());
        }
        self.plate_spec().validate()?;
        self.domain.validate()?;
        self.segments()?;
        self.network_config().validate()?;
        self.loss.validate(self.problem)?;
        self.optim.validate()?;
        if self.seeds.is_empty() {
            return bad("seeds must list at least one seed".into());
        }
        if self.n_interior == 0 {
            return bad("n_interior must be positive".into());
        }
        if self.n_boundary == 0 {
            return bad("n_boundary must be positive".into());
        }
        if self.grid < 2 {
            return bad("grid needs at least 2 points per axis".into());
        }
        if let Load::Sinusoidal { a, b, .. } = self.load {
            if !(a > 0.0 && b > 0.0) {
                return bad("sinusoidal load needs positive a and b".into());
            }
        }
        for &f in &self.continuation.factors {
            if !(f > 0.0 && f.is_finite()) {
                return bad(format!("continuation factor {f} must be positive"));
            }
        }
        if !self.continuation.factors.is_empty() && self.continuation.max_iter == 0 {
            return bad("continuation max_iter must be positive".into());
        }
        match self.problem {
            Problem::Bending => {
                if !self.inplane.is_zero() {
                    return bad("bending runs do not take in-plane forces".into());
                }
            }
            Problem::Vibration | Problem::Buckling => {
                if self.load != Load::None {
                    return bad(format!("{:?} runs do not take a transverse load", self.problem));
                }
                if p.foundation != 0.0 {
                    return bad("a foundation is only supported for bending".into());
                }
                let b = &self.boundary;
                if b.shear_load != 0.0 || b.moment_load != 0.0 || b.w_target != 0.0 || b.theta_target != 0.0 {
                    return bad("eigenvalue runs need homogeneous boundary conditions".into());
                }
            }
        }
        if self.problem == Problem::Buckling && self.inplane.is_zero() {
            return bad("buckling requires nonzero in-plane forces".into());
        }
        Ok(())
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.problem != Problem::Bending && self.loss.kp_out_of_band() {
            w.push(format!("kp = {} is outside the usual [1, 100] range", self.loss.kp));
        }
        w
    }
}
