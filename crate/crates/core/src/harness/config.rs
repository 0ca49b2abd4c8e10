use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{Environment, FadingConfig, LargeScaleTables};
use crate::error::{Error, Result};
use crate::geometry::{OrbitConfig, PassGeometry};
use crate::linkmodel::{noise_variance, NoiseConfig};
use crate::maxmin_gp::SolverConfig;
use crate::schemes::{Scheme, SchemeConfig};

/// Satellite pass and user layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub altitude_km: f64,
    pub earth_radius_km: f64,
    pub inclination_deg: f64,
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    pub cross_track_offset_km: f64,
    pub descending: bool,
    pub mask_deg: f64,
    /// Users are placed with a Gaussian spread of half this radius and
    /// redrawn until they fall inside it.
    pub user_radius_km: f64,
    pub environment: String,
    /// CSV of large-scale tables; empty selects the shipped tables.
    pub tables_path: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let orbit = OrbitConfig::default();
        let pass = PassGeometry::default();
        Self {
            altitude_km: orbit.altitude_km,
            earth_radius_km: orbit.earth_radius_km,
            inclination_deg: orbit.inclination_deg,
            center_lat_deg: pass.center_lat_deg,
            center_lon_deg: pass.center_lon_deg,
            cross_track_offset_km: pass.cross_track_offset_km,
            descending: pass.descending,
            mask_deg: pass.mask_deg,
            user_radius_km: 50.0,
            environment: "rural".into(),
            tables_path: String::new(),
        }
    }
}

/// Link-level system parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_users: usize,
    pub n_slots: usize,
    pub coherence_s: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_temperature_k: f64,
    /// Per-slot power budget, W.
    pub eirp_w: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_users: 20,
            n_slots: 30,
            coherence_s: 5.0,
            carrier_hz: 27.5e9,
            bandwidth_hz: 5e6,
            noise_temperature_k: 290.0,
            eirp_w: 5e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub schemes: Vec<Scheme>,
    /// Normalised prediction-error variances to sweep.
    pub sigma_e2: Vec<f64>,
    pub n_trials: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub uniform_horizon_weights: bool,
    /// Worker threads; 0 uses the `APASS_WORKERS` variable or all cores.
    pub workers: usize,
    /// Fraction of failed rows above which the run reports failure.
    pub max_failure_fraction: f64,
    /// Fill the `solve_ms` column. Off keeps outputs byte-reproducible.
    pub record_timing: bool,
    pub dump_allocations: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            sigma_e2: vec![0.05, 0.10, 0.25],
            n_trials: 50,
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            uniform_horizon_weights: false,
            workers: 0,
            max_failure_fraction: 0.05,
            record_timing: false,
            dump_allocations: false,
        }
    }
}

/// Named presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// K=6, N=10, 50 trials.
    Desk,
    /// K=20, N=30.
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile '{other}' (expected desk or paper)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub system: SystemConfig,
    pub fading: FadingConfig,
    pub solver: SolverConfig,
    pub campaign: CampaignConfig,
}

impl ExperimentConfig {
    pub fn profile(profile: Profile) -> Self {
        let mut cfg = Self::default();
        if profile == Profile::Desk {
            cfg.system.n_users = 6;
            cfg.system.n_slots = 10;
            cfg.campaign.n_trials = 50;
        }
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        if s.n_users == 0 || s.n_slots == 0 {
            return Err(Error::Config("n_users and n_slots must be >= 1".into()));
        }
        if !(s.coherence_s > 0.0 && s.bandwidth_hz > 0.0 && s.noise_temperature_k > 0.0 && s.eirp_w > 0.0) {
            return Err(Error::Config("coherence_s, bandwidth_hz, noise_temperature_k and eirp_w must be > 0".into()));
        }
        if self.campaign.n_trials == 0 {
            return Err(Error::Config("n_trials must be >= 1".into()));
        }
        if self.campaign.schemes.is_empty() {
            return Err(Error::Config("no schemes configured".into()));
        }
        if self.campaign.sigma_e2.is_empty() || self.campaign.sigma_e2.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("sigma_e2 needs at least one finite value >= 0".into()));
        }
        if !(self.scenario.user_radius_km >= 0.0) {
            return Err(Error::Config("user_radius_km must be >= 0".into()));
        }
        self.orbit().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.fading.validate()?;
        self.solver.validate()?;
        self.environment()?;
        Ok(())
    }

    pub fn orbit(&self) -> OrbitConfig {
        OrbitConfig {
            altitude_km: self.scenario.altitude_km,
            earth_radius_km: self.scenario.earth_radius_km,
            inclination_deg: self.scenario.inclination_deg,
            carrier_hz: self.system.carrier_hz,
        }
    }

    pub fn pass(&self) -> PassGeometry {
        PassGeometry {
            center_lat_deg: self.scenario.center_lat_deg,
            center_lon_deg: self.scenario.center_lon_deg,
            cross_track_offset_km: self.scenario.cross_track_offset_km,
            descending: self.scenario.descending,
            mask_deg: self.scenario.mask_deg,
        }
    }

    pub fn environment(&self) -> Result<Environment> {
        self.scenario.environment.parse()
    }

    pub fn tables(&self) -> Result<LargeScaleTables> {
        let tables = if self.scenario.tables_path.is_empty() {
            LargeScaleTables::shipped()
        } else {
            LargeScaleTables::from_path(Path::new(&self.scenario.tables_path))?
        };
        let env = self.environment()?;
        if !tables.has_environment(env) {
            return Err(Error::Config(format!("tables have no rows for environment '{env}'")));
        }
        Ok(tables)
    }

    pub fn sigma2(&self) -> f64 {
        noise_variance(&NoiseConfig {
            temperature_k: self.system.noise_temperature_k,
            bandwidth_hz: self.system.bandwidth_hz,
        })
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            solver: self.solver,
            uniform_horizon_weights: self.campaign.uniform_horizon_weights,
        }
    }
}
