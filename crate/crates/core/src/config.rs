//! Simulation configuration: a TOML document with one section per module.
//!
//! Every field has a default, so an empty file is a complete configuration.
//! Angles are in degrees here and converted to radians when building
//! [`SceneParams`]. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{ArrayGeometry, ArrayOrientation, ReceiverOrientation, Vector3};
use crate::optics::{
    pattern_from_luminous, Concentrator, FilterGain, LedSpectrum, RadiationPattern, RxOptics, SourceSpectrum,
    SpectralCurve, TabulatedPattern,
};
use crate::scene::{
    AngleDistribution, ClusterParams, EvolutionParams, LedArray, Motion, ReceiverConfig, SceneParams, SpectrumParams,
};
use crate::statistics::FrequencyGrid;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Validation(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    /// Spacing between rows, m.
    pub spacing_h_m: f64,
    /// Spacing between columns, m.
    pub spacing_v_m: f64,
    pub row_azimuth_deg: f64,
    pub row_elevation_deg: f64,
    pub column_azimuth_deg: f64,
    pub column_elevation_deg: f64,
    pub transmit_power_w: f64,
    pub lambertian_order: f64,
    /// Optional luminous-intensity grid replacing the Lambertian pattern.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern_file: Option<PathBuf>,
    pub luminous_efficacy_lm_per_w: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            spacing_h_m: 1.0,
            spacing_v_m: 1.0,
            row_azimuth_deg: 90.0,
            row_elevation_deg: 0.0,
            column_azimuth_deg: 180.0,
            column_elevation_deg: 90.0,
            transmit_power_w: 1.0,
            lambertian_order: 1.0,
            pattern_file: None,
            luminous_efficacy_lm_per_w: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentratorKind {
    None,
    Ideal,
    AsPrinted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverSection {
    /// Initial distance along `+x` from the benchmark LED, m.
    pub distance_m: f64,
    pub area_m2: f64,
    pub fov_deg: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub pd_count: usize,
    pub inclination_deg: f64,
    pub azimuth_rate_deg_s: f64,
    pub elevation_rate_deg_s: f64,
    pub speed_m_s: f64,
    pub motion_azimuth_deg: f64,
    pub motion_elevation_deg: f64,
    pub concentrator: ConcentratorKind,
    pub refractive_index: f64,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        Self {
            distance_m: 2.0,
            area_m2: 1e-4,
            fov_deg: 85.0,
            azimuth_deg: 180.0,
            elevation_deg: 0.0,
            pd_count: 1,
            inclination_deg: 45.0,
            azimuth_rate_deg_s: 0.0,
            elevation_rate_deg_s: 0.0,
            speed_m_s: 0.0,
            motion_azimuth_deg: 0.0,
            motion_elevation_deg: 0.0,
            concentrator: ConcentratorKind::None,
            refractive_index: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub birth_rate_per_m: f64,
    pub death_rate_per_m: f64,
    pub correlation_distance_m: f64,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            birth_rate_per_m: 80.0,
            death_rate_per_m: 4.0,
            correlation_distance_m: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub tx_azimuth_mean_deg: f64,
    pub tx_azimuth_std_deg: f64,
    pub tx_elevation_mean_deg: f64,
    pub tx_elevation_std_deg: f64,
    pub rx_azimuth_mean_deg: f64,
    pub rx_azimuth_std_deg: f64,
    pub rx_elevation_mean_deg: f64,
    pub rx_elevation_std_deg: f64,
    /// Mean cluster distance; half the Tx-Rx distance when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_mean_m: Option<f64>,
    pub sigma_ds_m: f64,
    pub sigma_as_m: f64,
    pub sigma_es_m: f64,
    pub scatterers_per_cluster: usize,
    pub cluster_area_m2: f64,
    pub sb_ratio: f64,
    pub speed_m_s: f64,
    pub motion_azimuth_deg: f64,
    pub motion_elevation_deg: f64,
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self {
            tx_azimuth_mean_deg: 0.0,
            tx_azimuth_std_deg: 40.0,
            tx_elevation_mean_deg: 0.0,
            tx_elevation_std_deg: 40.0,
            rx_azimuth_mean_deg: 180.0,
            rx_azimuth_std_deg: 40.0,
            rx_elevation_mean_deg: 0.0,
            rx_elevation_std_deg: 40.0,
            distance_mean_m: None,
            sigma_ds_m: 1.0,
            sigma_as_m: 1.0,
            sigma_es_m: 1.0,
            scatterers_per_cluster: 100,
            cluster_area_m2: 1.0,
            sb_ratio: 0.9,
            speed_m_s: 0.0,
            motion_azimuth_deg: 0.0,
            motion_elevation_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    White,
    Red,
    Green,
    Blue,
    Monochromatic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub source: SourceKind,
    /// Used when `source = "monochromatic"`.
    pub wavelength_nm: f64,
    /// Used when `source = "file"`; normalized on load.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psd_file: Option<PathBuf>,
    /// Floor, pine wood, plaster, plate glass.
    pub material_weights: [f64; 4],
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            source: SourceKind::White,
            wavelength_nm: 445.0,
            psd_file: None,
            material_weights: crate::optics::DEFAULT_MATERIAL_WEIGHTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub start_s: f64,
    pub end_s: f64,
    pub step_s: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            start_s: 0.0,
            end_s: 2.0,
            step_s: 0.01,
        }
    }
}

impl TimeSection {
    /// Sample instants `start + k·step` up to `end` (inclusive within a
    /// millionth of a step).
    pub fn samples(&self) -> Vec<f64> {
        let n = ((self.end_s - self.start_s) / self.step_s + 1e-6).floor() as usize;
        (0..=n).map(|k| self.start_s + k as f64 * self.step_s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencySection {
    pub start_hz: f64,
    pub end_hz: f64,
    pub points: usize,
}

impl Default for FrequencySection {
    fn default() -> Self {
        Self {
            start_hz: 0.0,
            end_hz: 200e6,
            points: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub size: usize,
    pub seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { size: 500, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub array: ArrayConfig,
    pub receiver: ReceiverSection,
    pub evolution: EvolutionSection,
    pub clusters: ClusterSection,
    pub spectrum: SpectrumSection,
    pub time: TimeSection,
    pub frequency: FrequencySection,
    pub ensemble: EnsembleSection,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl SimulationConfig {
    /// Parse and validate TOML text. Relative file references stay relative
    /// to the working directory.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimulationConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configuration serializes to JSON");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid, ConfigError> {
        let f = &self.frequency;
        FrequencyGrid::new(f.start_hz, f.end_hz, f.points).map_err(|e| invalid(format!("frequency: {e}")))
    }

    /// Check ranges not covered by the scene builder.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.time;
        if !(t.step_s > 0.0 && t.end_s >= t.start_s && t.start_s >= 0.0) {
            return Err(invalid("time: need 0 ≤ start_s ≤ end_s and step_s > 0"));
        }
        if t.samples().len() > 1_000_000 {
            return Err(invalid("time: more than 10^6 samples"));
        }
        self.frequency_grid()?;
        if self.ensemble.size == 0 {
            return Err(invalid("ensemble: size must be at least 1"));
        }
        let r = &self.receiver;
        if !(r.distance_m > 0.0) {
            return Err(invalid("receiver: distance_m must be positive"));
        }
        if !(r.fov_deg > 0.0 && r.fov_deg <= 90.0) {
            return Err(invalid("receiver: fov_deg must lie in (0, 90]"));
        }
        if !(r.elevation_deg.abs() <= 90.0) {
            return Err(invalid("receiver: elevation_deg must lie in [-90, 90]"));
        }
        if !(self.array.lambertian_order >= 0.0) {
            return Err(invalid("array: lambertian_order must be non-negative"));
        }
        if self.spectrum.source == SourceKind::File && self.spectrum.psd_file.is_none() {
            return Err(invalid("spectrum: source = \"file\" needs psd_file"));
        }
        Ok(())
    }

    fn pattern(&self) -> Result<RadiationPattern, ConfigError> {
        match &self.array.pattern_file {
            None => RadiationPattern::lambertian(self.array.lambertian_order).map_err(|e| invalid(format!("array: {e}"))),
            Some(path) => {
                let grid = TabulatedPattern::from_csv_str(&read(path)?)
                    .map_err(|e| invalid(format!("array.pattern_file: {e}")))?;
                pattern_from_luminous(grid, self.array.luminous_efficacy_lm_per_w)
                    .map_err(|e| invalid(format!("array.pattern_file: {e}")))
            }
        }
    }

    fn source(&self) -> Result<SourceSpectrum, ConfigError> {
        let s = &self.spectrum;
        let bundled = |l: LedSpectrum| SourceSpectrum::Continuous(l.curve().clone());
        Ok(match s.source {
            SourceKind::White => bundled(LedSpectrum::White),
            SourceKind::Red => bundled(LedSpectrum::Red),
            SourceKind::Green => bundled(LedSpectrum::Green),
            SourceKind::Blue => bundled(LedSpectrum::Blue),
            SourceKind::Monochromatic => SourceSpectrum::Monochromatic(s.wavelength_nm),
            SourceKind::File => {
                let path = s.psd_file.as_ref().expect("checked in validate");
                let curve = SpectralCurve::from_csv_str(&read(path)?)
                    .and_then(|c| c.normalized())
                    .map_err(|e| invalid(format!("spectrum.psd_file: {e}")))?;
                SourceSpectrum::Continuous(curve)
            }
        })
    }

    /// Scene parameters with the given radiation pattern.
    pub fn scene_params_with_pattern(&self, pattern: RadiationPattern) -> Result<SceneParams, ConfigError> {
        self.validate()?;
        let a = &self.array;
        let geometry = ArrayGeometry {
            rows: a.rows,
            cols: a.cols,
            spacing_h: a.spacing_h_m,
            spacing_v: a.spacing_v_m,
            orientation: ArrayOrientation {
                row_azimuth: a.row_azimuth_deg.to_radians(),
                row_elevation: a.row_elevation_deg.to_radians(),
                column_azimuth: a.column_azimuth_deg.to_radians(),
                column_elevation: a.column_elevation_deg.to_radians(),
            },
        };
        let array = LedArray::uniform(geometry, pattern, a.transmit_power_w).map_err(|e| invalid(format!("array: {e}")))?;

        let r = &self.receiver;
        let concentrator = match r.concentrator {
            ConcentratorKind::None => Concentrator::None,
            ConcentratorKind::Ideal => Concentrator::Ideal {
                refractive_index: r.refractive_index,
            },
            ConcentratorKind::AsPrinted => Concentrator::AsPrinted {
                refractive_index: r.refractive_index,
            },
        };
        let optics = RxOptics::new(r.fov_deg.to_radians(), concentrator, FilterGain::Unity)
            .map_err(|e| invalid(format!("receiver: {e}")))?;
        let receiver = ReceiverConfig {
            orientation: ReceiverOrientation {
                azimuth: r.azimuth_deg.to_radians(),
                elevation: r.elevation_deg.to_radians(),
                pd_count: r.pd_count,
                inclination: r.inclination_deg.to_radians(),
                azimuth_rate: r.azimuth_rate_deg_s.to_radians(),
                elevation_rate: r.elevation_rate_deg_s.to_radians(),
            },
            area: r.area_m2,
            optics,
            motion: Motion {
                speed: r.speed_m_s,
                azimuth: r.motion_azimuth_deg.to_radians(),
                elevation: r.motion_elevation_deg.to_radians(),
            },
            initial_position: Vector3::new(r.distance_m, 0.0, 0.0),
        };

        let e = &self.evolution;
        let c = &self.clusters;
        let angles = |am: f64, asd: f64, em: f64, esd: f64| AngleDistribution {
            azimuth_mean: am.to_radians(),
            azimuth_std: asd.to_radians(),
            elevation_mean: em.to_radians(),
            elevation_std: esd.to_radians(),
        };
        let params = SceneParams {
            array,
            receiver,
            evolution: EvolutionParams {
                birth_rate: e.birth_rate_per_m,
                death_rate: e.death_rate_per_m,
                correlation_distance: e.correlation_distance_m,
            },
            clusters: ClusterParams {
                tx_angles: angles(
                    c.tx_azimuth_mean_deg,
                    c.tx_azimuth_std_deg,
                    c.tx_elevation_mean_deg,
                    c.tx_elevation_std_deg,
                ),
                rx_angles: angles(
                    c.rx_azimuth_mean_deg,
                    c.rx_azimuth_std_deg,
                    c.rx_elevation_mean_deg,
                    c.rx_elevation_std_deg,
                ),
                distance_mean: c.distance_mean_m.unwrap_or(r.distance_m / 2.0),
                spread: [c.sigma_ds_m, c.sigma_as_m, c.sigma_es_m],
                scatterers_per_cluster: c.scatterers_per_cluster,
                cluster_area: c.cluster_area_m2,
                sb_ratio: c.sb_ratio,
                motion: Motion {
                    speed: c.speed_m_s,
                    azimuth: c.motion_azimuth_deg.to_radians(),
                    elevation: c.motion_elevation_deg.to_radians(),
                },
            },
            spectrum: SpectrumParams {
                source: self.source()?,
                material_weights: self.spectrum.material_weights,
            },
        };
        params.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(params)
    }

    pub fn scene_params(&self) -> Result<Arc<SceneParams>, ConfigError> {
        Ok(Arc::new(self.scene_params_with_pattern(self.pattern()?)?))
    }
}

pub fn load_config(path: &Path) -> Result<SimulationConfig, ConfigError> {
    SimulationConfig::from_toml_str(&read(path)?)
}

pub fn save_config(config: &SimulationConfig, path: &Path) -> Result<(), ConfigError> {
    std::fs::write(path, config.to_toml_string()).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}
