//! Elevation-banded large-scale parameter tables.
//!
//! The numbers live in a CSV data file rather than in code. A copy of the
//! default file is compiled in and can be replaced at run time.
//!
//! Schema (one header row, `#` comment lines allowed):
//!
//! ```text
//! environment,band_low_deg,band_high_deg,p_los,sigma_los_db,sigma_nlos_db,clutter_db,gas_zenith_db
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SHIPPED_TABLES: &str = include_str!("../../data/ntn_tables.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Rural,
    Suburban,
    Urban,
}

impl FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rural" => Ok(Environment::Rural),
            "suburban" => Ok(Environment::Suburban),
            "urban" => Ok(Environment::Urban),
            other => Err(Error::Config(format!("unknown environment '{other}'"))),
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Environment::Rural => "rural",
            Environment::Suburban => "suburban",
            Environment::Urban => "urban",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkState {
    Los,
    Nlos,
}

impl fmt::Display for LinkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkState::Los => "LOS",
            LinkState::Nlos => "NLOS",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub environment: Environment,
    pub band_low_deg: f64,
    pub band_high_deg: f64,
    pub p_los: f64,
    pub sigma_los_db: f64,
    pub sigma_nlos_db: f64,
    pub clutter_db: f64,
    pub gas_zenith_db: f64,
}

impl BandRow {
    pub fn shadow_sigma_db(&self, state: LinkState) -> f64 {
        match state {
            LinkState::Los => self.sigma_los_db,
            LinkState::Nlos => self.sigma_nlos_db,
        }
    }

    fn contains(&self, alpha_deg: f64) -> bool {
        alpha_deg >= self.band_low_deg
            && (alpha_deg < self.band_high_deg || (self.band_high_deg >= 90.0 && alpha_deg <= 90.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleTables {
    rows: Vec<BandRow>,
}

impl LargeScaleTables {
    /// The tables compiled into the crate.
    pub fn shipped() -> Self {
        Self::from_csv_str(SHIPPED_TABLES).expect("shipped channel tables are valid")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in reader.deserialize::<BandRow>() {
            rows.push(rec.map_err(|e| Error::Table(format!("bad table row: {e}")))?);
        }
        Self::from_rows(rows)
    }

    pub fn from_rows(mut rows: Vec<BandRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Table("no rows".into()));
        }
        rows.sort_by(|a, b| {
            a.environment
                .cmp(&b.environment)
                .then(a.band_low_deg.total_cmp(&b.band_low_deg))
        });
        for r in &rows {
            let losses = [r.sigma_los_db, r.sigma_nlos_db, r.clutter_db, r.gas_zenith_db];
            if losses.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Table(format!("negative loss entry in {r:?}")));
            }
            if !(0.0..=1.0).contains(&r.p_los) {
                return Err(Error::Table(format!("LoS probability outside [0,1] in {r:?}")));
            }
            if !(r.band_low_deg < r.band_high_deg) {
                return Err(Error::Table(format!("empty band in {r:?}")));
            }
        }
        for env_rows in rows.chunk_by(|a, b| a.environment == b.environment) {
            for pair in env_rows.windows(2) {
                if pair[0].band_high_deg != pair[1].band_low_deg {
                    return Err(Error::Table(format!(
                        "{}: gap or overlap between bands ending {} and starting {}",
                        pair[0].environment, pair[0].band_high_deg, pair[1].band_low_deg
                    )));
                }
            }
            let last = env_rows.last().expect("chunk is non-empty");
            if last.band_high_deg < 90.0 {
                return Err(Error::Table(format!("{}: bands stop at {} deg", last.environment, last.band_high_deg)));
            }
        }
        Ok(Self { rows })
    }

    /// Single band over [0, 90] for one environment. Handy for controlled
    /// experiments.
    pub fn uniform(
        environment: Environment,
        p_los: f64,
        sigma_los_db: f64,
        sigma_nlos_db: f64,
        clutter_db: f64,
        gas_zenith_db: f64,
    ) -> Result<Self> {
        Self::from_rows(vec![BandRow {
            environment,
            band_low_deg: 0.0,
            band_high_deg: 90.0,
            p_los,
            sigma_los_db,
            sigma_nlos_db,
            clutter_db,
            gas_zenith_db,
        }])
    }

    pub fn rows(&self) -> &[BandRow] {
        &self.rows
    }

    pub fn has_environment(&self, env: Environment) -> bool {
        self.rows.iter().any(|r| r.environment == env)
    }

    /// Row whose band contains `alpha_deg`.
    pub fn band(&self, env: Environment, alpha_deg: f64) -> Result<&BandRow> {
        if !self.has_environment(env) {
            return Err(Error::Config(format!("no table rows for environment '{env}'")));
        }
        self.rows
            .iter()
            .find(|r| r.environment == env && r.contains(alpha_deg))
            .ok_or_else(|| Error::Table(format!("{env}: no band covers {alpha_deg} deg")))
    }

    /// Checks that `[mask_deg, 90]` is covered for `env`.
    pub fn check_coverage(&self, env: Environment, mask_deg: f64) -> Result<()> {
        self.band(env, mask_deg).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_tables_load_and_cover() {
        let t = LargeScaleTables::shipped();
        for env in [Environment::Rural, Environment::Suburban, Environment::Urban] {
            t.check_coverage(env, 10.0).unwrap();
            for a in 0..=90 {
                t.band(env, a as f64).unwrap();
            }
        }
        assert_eq!(t.band(Environment::Rural, 90.0).unwrap().p_los, 0.998);
        assert_eq!(t.band(Environment::Rural, 14.9).unwrap().band_low_deg, 0.0);
        assert_eq!(t.band(Environment::Rural, 15.0).unwrap().band_low_deg, 15.0);
    }

    #[test]
    fn los_sigma_not_above_nlos_sigma() {
        for r in LargeScaleTables::shipped().rows() {
            assert!(r.sigma_los_db <= r.sigma_nlos_db, "{r:?}");
        }
    }

    #[test]
    fn rejects_gaps_and_bad_values() {
        let header = "environment,band_low_deg,band_high_deg,p_los,sigma_los_db,sigma_nlos_db,clutter_db,gas_zenith_db\n";
        let gap = format!("{header}rural,0,40,0.5,1,2,3,0.1\nrural,50,90,0.5,1,2,3,0.1\n");
        assert!(matches!(LargeScaleTables::from_csv_str(&gap), Err(Error::Table(_))));
        let short = format!("{header}rural,0,80,0.5,1,2,3,0.1\n");
        assert!(LargeScaleTables::from_csv_str(&short).is_err());
        let prob = format!("{header}rural,0,90,1.5,1,2,3,0.1\n");
        assert!(LargeScaleTables::from_csv_str(&prob).is_err());
        let neg = format!("{header}rural,0,90,0.5,-1,2,3,0.1\n");
        assert!(LargeScaleTables::from_csv_str(&neg).is_err());
    }

    #[test]
    fn unknown_environment_is_config_error() {
        let t = LargeScaleTables::uniform(Environment::Rural, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(t.band(Environment::Urban, 45.0), Err(Error::Config(_))));
        assert!(matches!("mars".parse::<Environment>(), Err(Error::Config(_))));
    }
}
