//! Single-file TOML configuration with named parameter profiles.
//!
//! A file may name a base `profile`; its own tables are merged over that
//! profile key by key, so only deviations need to be written. Tables with a
//! `kind` key (tagged variants) replace the profile's table wholesale.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covariance::{Neighborhood, SmoothingConfig, SmoothingMode};
use crate::discrepancy::{DiscrepancyConfig, Downsample, Metric};
use crate::error::{Error, Result};
use crate::geom::{IcpParams, OutlierParams};
use crate::reference::{RegistrationTarget, SampleMergeParams};
use crate::tuning::{linspace, GridSpec};
use crate::waypoint::WaypointConfig;

pub const PROFILES: [&str; 3] = ["sim", "physical", "physical-l2"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseConfig {
    pub enabled: bool,
    pub k: usize,
    pub std_ratio: f64,
}

impl DenoiseConfig {
    pub fn off() -> Self {
        let d = OutlierParams::default();
        Self {
            enabled: false,
            k: d.k,
            std_ratio: d.std_ratio,
        }
    }

    pub fn on() -> Self {
        Self {
            enabled: true,
            ..Self::off()
        }
    }

    pub fn params(&self) -> Option<OutlierParams> {
        self.enabled.then_some(OutlierParams {
            k: self.k,
            std_ratio: self.std_ratio,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistrationConfig {
    pub enabled: bool,
    pub max_corr_dist: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl RegistrationConfig {
    pub fn on() -> Self {
        let d = IcpParams::default();
        Self {
            enabled: true,
            max_corr_dist: d.max_corr_dist,
            max_iter: d.max_iter,
            tol: d.tol,
        }
    }

    pub fn params(&self) -> Option<IcpParams> {
        self.enabled.then_some(IcpParams {
            max_corr_dist: self.max_corr_dist,
            max_iter: self.max_iter,
            tol: self.tol,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    Mesh,
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub source: ReferenceSource,
    /// Points drawn from a CAD mesh.
    pub mesh_points: usize,
    pub mesh_seed: u64,
    pub voxel_size: f64,
    pub occupancy_quantile: f64,
    pub target: RegistrationTarget,
    pub denoise: DenoiseConfig,
    pub registration: RegistrationConfig,
}

impl ReferenceConfig {
    pub fn merge_params(&self) -> SampleMergeParams {
        SampleMergeParams {
            voxel_size: self.voxel_size,
            occupancy_quantile: self.occupancy_quantile,
            denoise: self.denoise.params(),
            icp: self.registration.params(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    pub smoothing: SmoothingConfig,
    /// Voxel size for fitting on a thinned reference; 0 fits at full size.
    pub reference_voxel: f64,
    pub training_denoise: DenoiseConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscrepancySection {
    pub metric: Metric,
    pub threshold: f64,
    pub cutoff: f64,
    pub min_count: u32,
    pub smoothing_k: usize,
    pub denoise: DenoiseConfig,
    pub downsample: Downsample,
}

impl DiscrepancySection {
    pub fn to_config(&self) -> DiscrepancyConfig {
        DiscrepancyConfig {
            metric: self.metric,
            threshold: self.threshold,
            cutoff: self.cutoff,
            min_count: self.min_count,
            smoothing_k: self.smoothing_k,
            denoise: self.denoise.params(),
            downsample: self.downsample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    pub lambda: f64,
    /// Distance charged per FOD when a trial yields no candidates; 0 uses
    /// the reference bounding-box diagonal.
    pub penalty_distance: f64,
    /// FODs within this distance of a candidate count as photographed.
    pub view_radius: f64,
    pub n_thresholds: usize,
    /// Lowest threshold = min over trials of this percentile of smoothed scores.
    pub threshold_percentile: f64,
    /// Highest threshold; 0 uses 3 for the M-distance and 0.05 m for L2.
    pub threshold_max: f64,
    pub cutoff_min: f64,
    pub cutoff_max: f64,
    pub n_cutoffs: usize,
    pub min_counts: Vec<u32>,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            penalty_distance: 0.0,
            view_radius: 0.5,
            n_thresholds: 20,
            threshold_percentile: 0.25,
            threshold_max: 0.0,
            cutoff_min: 0.05,
            cutoff_max: 1.0,
            n_cutoffs: 30,
            min_counts: (0..=9).collect(),
        }
    }
}

impl TuningConfig {
    /// Grid for a set of smoothed-score samples.
    pub fn grid(&self, smoothed: &[&[f64]], metric: Metric) -> Result<GridSpec> {
        let lower = smoothed
            .iter()
            .filter_map(|s| crate::tuning::percentile(s, self.threshold_percentile))
            .fold(f64::INFINITY, f64::min);
        let upper = if self.threshold_max > 0.0 {
            self.threshold_max
        } else {
            crate::tuning::threshold_upper_bound(metric)
        };
        if !(lower < upper) {
            return Err(Error::Config(format!("threshold range [{lower}, {upper}] is empty")));
        }
        GridSpec::new(
            linspace(lower, upper, self.n_thresholds),
            linspace(self.cutoff_min, self.cutoff_max, self.n_cutoffs),
            self.min_counts.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Align the query to the reference with ICP before scoring.
    pub pre_register: bool,
    pub registration: RegistrationConfig,
    /// Reviewer label choices offered besides "No FOD" and "Not sure".
    pub vocabulary: Vec<String>,
    /// Half-size of the top-down map crop stored with each candidate.
    pub crop_half_size: f64,
    /// Most member points stored per candidate.
    pub max_points_per_candidate: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pre_register: true,
            registration: RegistrationConfig::on(),
            vocabulary: ["Hammer", "Power drill", "Tape measure", "Screwdriver", "Sander", "Crimper", "Wrench", "Level"]
                .into_iter()
                .map(String::from)
                .collect(),
            crop_half_size: 0.75,
            max_points_per_candidate: 20_000,
        }
    }
}

/// Artifact locations for a full run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPaths {
    pub reference: Option<PathBuf>,
    pub covariance: Option<PathBuf>,
    pub query: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub profile: String,
    pub reference: ReferenceConfig,
    pub covariance: CovarianceConfig,
    pub discrepancy: DiscrepancySection,
    pub waypoint: WaypointConfig,
    pub tuning: TuningConfig,
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub run: RunPaths,
}

impl Config {
    /// Built-in parameter profile.
    pub fn profile(name: &str) -> Result<Self> {
        let physical = Config {
            profile: "physical".into(),
            reference: ReferenceConfig {
                source: ReferenceSource::Samples,
                mesh_points: 100_000,
                mesh_seed: 0,
                voxel_size: 0.05,
                occupancy_quantile: 0.25,
                target: RegistrationTarget::FirstSample,
                denoise: DenoiseConfig::on(),
                registration: RegistrationConfig::on(),
            },
            covariance: CovarianceConfig {
                smoothing: SmoothingConfig::mean_knn(250),
                reference_voxel: 0.0,
                training_denoise: DenoiseConfig::on(),
            },
            discrepancy: DiscrepancySection {
                metric: Metric::MDistance,
                threshold: 2.75,
                cutoff: 0.345,
                min_count: 0,
                smoothing_k: 50,
                denoise: DenoiseConfig::on(),
                downsample: Downsample::Voxel { size: 0.02 },
            },
            waypoint: WaypointConfig::default(),
            tuning: TuningConfig::default(),
            pipeline: PipelineConfig::default(),
            run: RunPaths::default(),
        };
        match name {
            "physical" => Ok(physical),
            "physical-l2" => {
                let mut c = physical;
                c.profile = name.into();
                c.discrepancy.metric = Metric::L2;
                c.discrepancy.threshold = 0.030;
                c.discrepancy.cutoff = 0.279;
                c.discrepancy.min_count = 4;
                Ok(c)
            }
            "sim" => {
                let mut c = physical;
                c.profile = name.into();
                c.reference.source = ReferenceSource::Mesh;
                c.reference.target = RegistrationTarget::Cad;
                c.reference.denoise = DenoiseConfig::off();
                c.covariance.smoothing = SmoothingConfig::gaussian(Neighborhood::Sphere { radius: 0.2 }, 0.05);
                c.covariance.training_denoise = DenoiseConfig::off();
                c.discrepancy = DiscrepancySection {
                    metric: Metric::MDistance,
                    threshold: 1.75,
                    cutoff: 0.275,
                    min_count: 0,
                    smoothing_k: 50,
                    denoise: DenoiseConfig::off(),
                    downsample: Downsample::Random { ratio: 0.1, seed: 0 },
                };
                Ok(c)
            }
            other => Err(Error::Config(format!(
                "unknown profile '{other}' (expected one of {})",
                PROFILES.join(", ")
            ))),
        }
    }

    /// Parses a config file body. `profile` overrides the file's own
    /// `profile` key; with neither, "physical" is the base.
    pub fn from_toml_str(text: &str, profile: Option<&str>) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let name = match (profile, user.get("profile")) {
            (Some(p), _) => p.to_string(),
            (None, Some(toml::Value::String(s))) => s.clone(),
            (None, Some(_)) => return Err(Error::Config("profile must be a string".into())),
            (None, None) => "physical".to_string(),
        };
        let base = Self::profile(&name)?;
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, user);
        merged.insert("profile".into(), toml::Value::String(name));
        let cfg: Config = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, profile: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| Error::MissingArtifact(format!("config file {}", path.display())))?;
        Self::from_toml_str(&text, profile)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.covariance.smoothing.validate()?;
        self.discrepancy.to_config().validate()?;
        self.waypoint.validate()?;
        if !(self.tuning.lambda > 0.0) {
            return Err(Error::Config("tuning.lambda must be > 0".into()));
        }
        if self.covariance.smoothing.mode == SmoothingMode::Gaussian && !(self.covariance.smoothing.sigma > 0.0) {
            return Err(Error::Config("covariance sigma must be > 0".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !o.contains_key("kind") => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_carry_preset_values() {
        let p = Config::profile("physical").unwrap();
        assert_eq!(p.reference.voxel_size, 0.05);
        assert_eq!(p.reference.occupancy_quantile, 0.25);
        assert_eq!(p.covariance.smoothing.neighborhood, Neighborhood::Knn { k: 250 });
        assert_eq!(p.discrepancy.smoothing_k, 50);
        assert_eq!((p.discrepancy.threshold, p.discrepancy.cutoff, p.discrepancy.min_count), (2.75, 0.345, 0));
        assert_eq!(p.discrepancy.downsample, Downsample::Voxel { size: 0.02 });
        assert_eq!(p.tuning.lambda, 0.05);
        let l = Config::profile("physical-l2").unwrap();
        assert_eq!((l.discrepancy.threshold, l.discrepancy.cutoff, l.discrepancy.min_count), (0.030, 0.279, 4));
        let s = Config::profile("sim").unwrap();
        assert_eq!(s.covariance.smoothing.sigma, 0.05);
        assert_eq!(s.covariance.smoothing.neighborhood, Neighborhood::Sphere { radius: 0.2 });
        assert_eq!((s.discrepancy.threshold, s.discrepancy.cutoff), (1.75, 0.275));
        assert!(!s.discrepancy.denoise.enabled);
        assert!(Config::profile("lab").is_err());
    }

    #[test]
    fn overrides_merge_over_profile() {
        let c = Config::from_toml_str(
            "profile = \"sim\"\n[discrepancy]\nthreshold = 2.0\ndownsample = { kind = \"voxel\", size = 0.05 }\n",
            None,
        )
        .unwrap();
        assert_eq!(c.discrepancy.threshold, 2.0);
        assert_eq!(c.discrepancy.cutoff, 0.275);
        assert_eq!(c.discrepancy.downsample, Downsample::Voxel { size: 0.05 });
        let forced = Config::from_toml_str("profile = \"sim\"\n", Some("physical")).unwrap();
        assert_eq!(forced.profile, "physical");
    }

    #[test]
    fn toml_roundtrip_and_errors() {
        for name in PROFILES {
            let c = Config::profile(name).unwrap();
            assert_eq!(Config::from_toml_str(&c.to_toml().unwrap(), None).unwrap(), c);
        }
        assert!(Config::from_toml_str("[discrepancy]\nthresold = 1.0\n", None).is_err());
        assert!(Config::from_toml_str("[discrepancy]\nthreshold = -1.0\n", None).is_err());
    }

    #[test]
    fn tuning_grid_bounds() {
        let t = TuningConfig::default();
        let a = [0.5, 0.6, 0.7, 0.8];
        let b = [0.2, 0.9, 1.0, 1.1];
        let g = t.grid(&[&a, &b], Metric::MDistance).unwrap();
        assert_eq!(g.thresholds[0], 0.2);
        assert_eq!(*g.thresholds.last().unwrap(), 3.0);
        assert_eq!(g.cutoffs.len(), 30);
    }
}
