use serde::{Deserialize, Serialize};

use super::dataset::Geometry;
use crate::baseline::EncodingConfig;
use crate::equirect::EquirectLevelSpec;
use crate::healpix::{HealpixSpec, MAX_LEVEL};
use crate::nn::{AdamWConfig, MlpConfig};
use crate::{Error, Result};

/// Input encoding: a learnable grid stack or a closed-form baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderConfig {
    Equirect {
        levels: u32,
        feature_dim: usize,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_base_lat")]
        base_lat: usize,
        /// Defaults to twice `base_lat`.
        #[serde(default)]
        base_lon: Option<usize>,
    },
    Healpix {
        levels: u32,
        feature_dim: usize,
        /// Level of the coarsest grid; level `ℓ` has `n_side = 2^(ℓ−1)`.
        #[serde(default = "default_first_level")]
        first_level: u32,
    },
    Positional {
        levels: usize,
    },
    Fourier {
        features: usize,
        sigma: f64,
        #[serde(default)]
        seed: u64,
    },
    SphericalHarmonics {
        degree: usize,
    },
}

fn default_gamma() -> f64 {
    1.5
}

fn default_base_lat() -> usize {
    16
}

fn default_first_level() -> u32 {
    1
}

impl EncoderConfig {
    pub fn baseline(&self) -> Option<EncodingConfig> {
        match *self {
            EncoderConfig::Positional { levels } => Some(EncodingConfig::Positional { levels }),
            EncoderConfig::Fourier { features, sigma, seed } => Some(EncodingConfig::Fourier { features, sigma, seed }),
            EncoderConfig::SphericalHarmonics { degree } => Some(EncodingConfig::SphericalHarmonics { degree }),
            _ => None,
        }
    }

    pub fn equirect_specs(&self) -> Result<Option<Vec<EquirectLevelSpec>>> {
        match *self {
            EncoderConfig::Equirect {
                levels,
                gamma,
                base_lat,
                base_lon,
                ..
            } => Ok(Some(EquirectLevelSpec::schedule(
                base_lat,
                base_lon.unwrap_or(2 * base_lat),
                gamma,
                levels,
            )?)),
            _ => Ok(None),
        }
    }

    pub fn healpix_specs(&self) -> Result<Option<Vec<HealpixSpec>>> {
        match *self {
            EncoderConfig::Healpix {
                levels, first_level, ..
            } => {
                if levels < 1 || first_level < 1 || first_level + levels - 1 > MAX_LEVEL {
                    return Err(Error::InvalidConfig(format!(
                        "healpix levels {first_level}..{} outside 1..={MAX_LEVEL}",
                        first_level as i64 + levels as i64 - 1
                    )));
                }
                (first_level..first_level + levels)
                    .map(HealpixSpec::from_level)
                    .collect::<Result<Vec<_>>>()
                    .map(Some)
            }
            _ => Ok(None),
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, EncoderConfig::Equirect { .. } | EncoderConfig::Healpix { .. })
    }

    /// Grid encoders must match the data layout; baselines fit any geometry.
    pub fn check_geometry(&self, geometry: &Geometry) -> Result<()> {
        match (self, geometry) {
            (EncoderConfig::Equirect { .. }, Geometry::Healpix { .. }) => Err(Error::GeometryMismatch(
                "equirect feature grid cannot be used with HEALPix data".into(),
            )),
            (EncoderConfig::Healpix { .. }, Geometry::Equirect { .. }) => Err(Error::GeometryMismatch(
                "HEALPix feature grid cannot be used with equirect data".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum TaskConfig {
    /// Fit and evaluate on the whole field.
    #[default]
    Fit,
    Regression {
        #[serde(default = "default_ratio")]
        ratio: f64,
    },
    Superres {
        factor: usize,
    },
    Temporal,
}

fn default_ratio() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub steps: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    /// Points per optimization step; 0 uses the full training set.
    #[serde(default)]
    pub batch_size: usize,
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub model: MlpConfig,
    #[serde(default)]
    pub optimizer: AdamWConfig,
    #[serde(default)]
    pub task: TaskConfig,
}

fn default_eval_every() -> u64 {
    500
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks that do not depend on the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be positive".into()));
        }
        self.optimizer.validate()?;
        match self.encoder {
            EncoderConfig::Equirect { feature_dim, .. } | EncoderConfig::Healpix { feature_dim, .. }
                if feature_dim == 0 =>
            {
                return Err(Error::InvalidConfig("feature_dim must be positive".into()))
            }
            _ => {}
        }
        self.encoder.equirect_specs()?;
        self.encoder.healpix_specs()?;
        if let Some(b) = self.encoder.baseline() {
            crate::baseline::BaselineEncoder::new(b)?;
        }
        match self.task {
            TaskConfig::Regression { ratio } if !(ratio > 0.0 && ratio < 1.0) => {
                Err(Error::InvalidConfig(format!("split ratio {ratio} must lie in (0, 1)")))
            }
            TaskConfig::Superres { factor: 0 } => {
                Err(Error::InvalidConfig("super-resolution factor must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Full validation against the dataset the run will use.
    pub fn check_dataset(&self, geometry: &Geometry, channels: usize) -> Result<()> {
        self.validate()?;
        self.encoder.check_geometry(geometry)?;
        if self.model.output_dim != channels {
            return Err(Error::InvalidConfig(format!(
                "model output_dim {} does not match {channels} data channels",
                self.model.output_dim
            )));
        }
        Ok(())
    }
}
