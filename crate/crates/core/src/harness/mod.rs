//! Seeded Monte Carlo campaigns over satellite passes.
//!
//! Each trial draws user positions and one channel realization from its own
//! seed subtree, computes the genie bound, then runs every configured scheme
//! at every prediction-error level on that same realization.

mod config;
mod output;
mod stats;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{generate_realization, ChannelModel, ChannelRealization, Environment, IndependentStates, LargeScaleTables};
use crate::error::{Error, Result};
use crate::geometry::{elevation_profile, offset_point, GroundUser, OrbitConfig, PassGeometry};
use crate::maxmin_gp::{genie_bound, sca_maxmin, MaxMinProblem, ScaOutcome};
use crate::rng::{Purpose, SeedTree};
use crate::schemes::{run_apass, run_equal_power, run_sts, run_water_filling, PredictionModel, Scheme, SchemeResult};

pub use config::{CampaignConfig, ExperimentConfig, Profile, ScenarioConfig, SystemConfig};
pub use output::{write_allocations_csv, write_cdf_files, write_genie_csv, write_outputs, write_ratio_csv, write_rows_csv, write_summary_csv};
pub use stats::{cdf_points, mean, paired_mean_ratio, RatioEntry};

/// Environment variable overriding the worker count when the config leaves
/// it at 0.
pub const WORKERS_ENV: &str = "APASS_WORKERS";

/// Resolved, immutable inputs shared by all trials.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: ExperimentConfig,
    pub orbit: OrbitConfig,
    pub pass: PassGeometry,
    pub tables: LargeScaleTables,
    pub environment: Environment,
    pub sigma2: f64,
    pub p_total: f64,
    pub seeds: SeedTree,
}

impl Scenario {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            orbit: cfg.orbit(),
            pass: cfg.pass(),
            tables: cfg.tables()?,
            environment: cfg.environment()?,
            sigma2: cfg.sigma2(),
            p_total: cfg.system.eirp_w,
            seeds: SeedTree::new(cfg.campaign.master_seed),
            cfg: cfg.clone(),
        })
    }

    pub fn trial_seeds(&self, trial: usize) -> SeedTree {
        self.seeds.trial(trial as u64)
    }

    /// Users scattered around the pass centre: independent Gaussian east and
    /// north offsets with standard deviation `radius/2`, redrawn until inside
    /// `radius`.
    pub fn place_users(&self, seeds: &SeedTree) -> Vec<GroundUser> {
        let radius = self.cfg.scenario.user_radius_km;
        (0..self.cfg.system.n_users)
            .map(|k| {
                let mut rng = seeds.stream(k as u64, Purpose::UserPlacement, 0);
                let (east, north) = if radius > 0.0 {
                    let normal = Normal::new(0.0, radius / 2.0).expect("positive spread");
                    loop {
                        let (e, n): (f64, f64) = (normal.sample(&mut rng), normal.sample(&mut rng));
                        if e.hypot(n) <= radius {
                            break (e, n);
                        }
                    }
                } else {
                    // keep the stream consumption uniform
                    let _: f64 = rng.random();
                    (0.0, 0.0)
                };
                let (lat_deg, lon_deg) = offset_point(self.pass.center_lat_deg, self.pass.center_lon_deg, east, north, self.orbit.earth_radius_km);
                GroundUser { id: k, lat_deg, lon_deg }
            })
            .collect()
    }

    pub fn realization(&self, trial: usize) -> Result<ChannelRealization> {
        let seeds = self.trial_seeds(trial);
        let users = self.place_users(&seeds);
        let grid = elevation_profile(&self.orbit, &users, &self.pass, self.cfg.system.n_slots, self.cfg.system.coherence_s)?;
        let model = ChannelModel {
            orbit: &self.orbit,
            tables: &self.tables,
            environment: self.environment,
            fading: &self.cfg.fading,
        };
        generate_realization(&grid, &model, &IndependentStates, &seeds)
    }

    pub fn genie(&self, realization: &ChannelRealization) -> Result<ScaOutcome> {
        let sigma2 = MaxMinProblem::uniform_noise(realization.n_users(), realization.n_slots(), self.sigma2);
        genie_bound(&realization.g, &sigma2, self.p_total, &self.cfg.solver)
    }

    pub fn run_scheme(&self, scheme: Scheme, realization: &ChannelRealization, sigma_e2: f64, trial: usize) -> Result<SchemeResult> {
        let model = PredictionModel { error_variance_normalized: sigma_e2 };
        let seeds = self.trial_seeds(trial);
        let cfg = self.cfg.scheme_config();
        match scheme {
            Scheme::Apass => run_apass(realization, &model, self.p_total, self.sigma2, &cfg, &seeds),
            Scheme::Sts => run_sts(realization, &model, self.p_total, self.sigma2, &cfg, &seeds),
            Scheme::EqualPower => run_equal_power(realization, self.p_total, self.sigma2),
            Scheme::WaterFilling => run_water_filling(realization, self.p_total, self.sigma2),
        }
    }
}

/// One emitted result line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub scheme: Scheme,
    pub sigma_e2: f64,
    pub min_rate: f64,
    pub genie_fraction: f64,
    pub fairness: f64,
    pub solve_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationRow {
    pub trial: usize,
    pub scheme: Scheme,
    pub sigma_e2: f64,
    pub slot: usize,
    pub user: usize,
    pub power: f64,
    pub scheduled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub genie_min_rate: Option<f64>,
    pub rows: Vec<TrialRow>,
    pub allocations: Vec<AllocationRow>,
    /// `(rows lost, message)` per failure.
    pub failures: Vec<(usize, String)>,
}

/// Runs every configured scheme and sweep point on one trial.
pub fn run_trial(scenario: &Scenario, trial: usize) -> TrialOutcome {
    let campaign = &scenario.cfg.campaign;
    let per_trial = campaign.schemes.len() * campaign.sigma_e2.len();
    let mut outcome = TrialOutcome {
        trial,
        genie_min_rate: None,
        rows: Vec::new(),
        allocations: Vec::new(),
        failures: Vec::new(),
    };
    let prepared = scenario.realization(trial).and_then(|r| scenario.genie(&r).map(|g| (r, g)));
    let (realization, genie) = match prepared {
        Ok(v) => v,
        Err(e) => {
            outcome.failures.push((per_trial, format!("trial {trial}: {e}")));
            return outcome;
        }
    };

    // (scheme, sweep index) -> result and elapsed milliseconds
    let mut results: BTreeMap<(Scheme, usize), (SchemeResult, f64)> = BTreeMap::new();
    for &scheme in &campaign.schemes {
        if scheme.uses_predictions() {
            for (i, &sigma_e2) in campaign.sigma_e2.iter().enumerate() {
                let t0 = Instant::now();
                match scenario.run_scheme(scheme, &realization, sigma_e2, trial) {
                    Ok(r) => {
                        results.insert((scheme, i), (r, t0.elapsed().as_secs_f64() * 1e3));
                    }
                    Err(e) => outcome.failures.push((1, format!("trial {trial}, {scheme}, sigma_e2 {sigma_e2}: {e}"))),
                }
            }
        } else {
            let t0 = Instant::now();
            match scenario.run_scheme(scheme, &realization, 0.0, trial) {
                Ok(r) => {
                    let ms = t0.elapsed().as_secs_f64() * 1e3;
                    for i in 0..campaign.sigma_e2.len() {
                        results.insert((scheme, i), (r.clone(), ms));
                    }
                }
                Err(e) => outcome.failures.push((campaign.sigma_e2.len(), format!("trial {trial}, {scheme}: {e}"))),
            }
        }
    }

    let bound = dominating_genie_rate(scenario, &realization, &genie, results.values().map(|(r, _)| r));
    outcome.genie_min_rate = Some(bound);
    for ((scheme, i), (result, ms)) in results {
        let sigma_e2 = campaign.sigma_e2[i];
        outcome.rows.push(TrialRow {
            trial,
            scheme,
            sigma_e2,
            min_rate: result.report.min_rate,
            genie_fraction: if bound > 0.0 { result.report.min_rate / bound } else { 1.0 },
            fairness: result.report.fairness,
            solve_ms: campaign.record_timing.then_some(ms),
        });
        if campaign.dump_allocations {
            let threshold = scenario.cfg.solver.truncate_below * scenario.p_total;
            for (user, row) in result.power.p.iter().enumerate() {
                for (slot, &power) in row.iter().enumerate() {
                    outcome.allocations.push(AllocationRow {
                        trial,
                        scheme,
                        sigma_e2,
                        slot,
                        user,
                        power,
                        scheduled: power > threshold,
                    });
                }
            }
        }
    }
    outcome
}

/// The genie solver only finds a KKT point. When a causal scheme does better
/// on the same channel, restart the genie from that allocation; the bound is
/// the best value found.
fn dominating_genie_rate<'a>(
    scenario: &Scenario,
    realization: &ChannelRealization,
    genie: &ScaOutcome,
    results: impl Iterator<Item = &'a SchemeResult>,
) -> f64 {
    let mut best = genie.min_rate;
    let best_scheme = results.max_by(|a, b| a.report.min_rate.total_cmp(&b.report.min_rate));
    if let Some(r) = best_scheme {
        if r.report.min_rate > best {
            log::debug!("{} beats the genie start ({} > {}), restarting", r.scheme_name, r.report.min_rate, best);
            let sigma2 = MaxMinProblem::uniform_noise(realization.n_users(), realization.n_slots(), scenario.sigma2);
            let problem = MaxMinProblem::genie(realization.g.clone(), sigma2, scenario.p_total);
            if let Ok(out) = sca_maxmin(&problem, &scenario.cfg.solver, Some(&r.power)) {
                best = best.max(out.min_rate);
            }
            best = best.max(r.report.min_rate);
        }
    }
    best
}

/// Aggregate for one (scheme, sweep point).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub scheme: Scheme,
    pub sigma_e2: f64,
    pub trials: usize,
    pub mean_min_rate: f64,
    pub mean_genie_fraction: f64,
    pub mean_fairness: f64,
    /// Sorted per-trial minimum rates.
    #[serde(skip)]
    pub cdf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    /// Sorted by trial, scheme, sweep index.
    pub rows: Vec<TrialRow>,
    pub points: Vec<PointSummary>,
    /// `(trial, genie minimum rate)` for trials with a bound.
    pub genie: Vec<(usize, f64)>,
    pub allocations: Vec<AllocationRow>,
    pub failed_rows: usize,
    pub failure_messages: Vec<String>,
    pub expected_rows: usize,
}

impl CampaignSummary {
    pub fn failure_fraction(&self) -> f64 {
        self.failed_rows as f64 / self.expected_rows.max(1) as f64
    }

    pub fn point(&self, scheme: Scheme, sigma_e2: f64) -> Option<&PointSummary> {
        self.points.iter().find(|p| p.scheme == scheme && p.sigma_e2 == sigma_e2)
    }

    fn per_trial(&self, scheme: Scheme, sigma_e2: f64) -> BTreeMap<usize, f64> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme && r.sigma_e2 == sigma_e2)
            .map(|r| (r.trial, r.min_rate))
            .collect()
    }

    /// Ratio of mean minimum rates over trials where both schemes succeeded.
    pub fn ratio(&self, numerator: Scheme, denominator: Scheme, sigma_e2: f64) -> RatioEntry {
        let num = self.per_trial(numerator, sigma_e2);
        let den = self.per_trial(denominator, sigma_e2);
        let pairs: Vec<(f64, f64)> = num.iter().filter_map(|(t, a)| den.get(t).map(|b| (*a, *b))).collect();
        RatioEntry {
            sigma_e2,
            numerator: numerator.name().into(),
            denominator: denominator.name().into(),
            ratio: paired_mean_ratio(&pairs),
            paired_trials: pairs.len(),
        }
    }
}

/// Every ordered scheme pair at every sweep point.
pub fn ratio_table(summary: &CampaignSummary, schemes: &[Scheme], sweep: &[f64]) -> Vec<RatioEntry> {
    let mut out = Vec::new();
    for &s in sweep {
        for &a in schemes {
            for &b in schemes {
                out.push(summary.ratio(a, b, s));
            }
        }
    }
    out
}

fn summarise(cfg: &ExperimentConfig, outcomes: Vec<TrialOutcome>) -> CampaignSummary {
    let campaign = &cfg.campaign;
    let mut rows = Vec::new();
    let mut genie = Vec::new();
    let mut allocations = Vec::new();
    let mut failed_rows = 0;
    let mut failure_messages = Vec::new();
    for o in outcomes {
        if let Some(g) = o.genie_min_rate {
            genie.push((o.trial, g));
        }
        rows.extend(o.rows);
        allocations.extend(o.allocations);
        for (lost, msg) in o.failures {
            failed_rows += lost;
            failure_messages.push(msg);
        }
    }
    let sweep_index = |s: f64| campaign.sigma_e2.iter().position(|v| *v == s).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| (a.trial, a.scheme, sweep_index(a.sigma_e2)).cmp(&(b.trial, b.scheme, sweep_index(b.sigma_e2))));
    genie.sort_by_key(|g| g.0);

    let mut points = Vec::new();
    for &scheme in &campaign.schemes {
        for &sigma_e2 in &campaign.sigma_e2 {
            let sel: Vec<&TrialRow> = rows.iter().filter(|r| r.scheme == scheme && r.sigma_e2 == sigma_e2).collect();
            let rates: Vec<f64> = sel.iter().map(|r| r.min_rate).collect();
            let mut cdf = rates.clone();
            cdf.sort_by(f64::total_cmp);
            points.push(PointSummary {
                scheme,
                sigma_e2,
                trials: sel.len(),
                mean_min_rate: mean(&rates),
                mean_genie_fraction: mean(&sel.iter().map(|r| r.genie_fraction).collect::<Vec<_>>()),
                mean_fairness: mean(&sel.iter().map(|r| r.fairness).collect::<Vec<_>>()),
                cdf,
            });
        }
    }
    CampaignSummary {
        rows,
        points,
        genie,
        allocations,
        failed_rows,
        failure_messages,
        expected_rows: campaign.n_trials * campaign.schemes.len() * campaign.sigma_e2.len(),
    }
}

fn worker_count(cfg: &CampaignConfig) -> usize {
    if cfg.workers > 0 {
        return cfg.workers;
    }
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}

/// Runs all trials, in parallel up to the configured worker count.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<CampaignSummary> {
    let scenario = Scenario::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(&cfg.campaign))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let n = cfg.campaign.n_trials;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|t| {
                let o = run_trial(&scenario, t);
                for (_, msg) in &o.failures {
                    log::warn!("{msg}");
                }
                log::debug!("trial {t} done");
                o
            })
            .collect()
    });
    let summary = summarise(cfg, outcomes);
    log::info!("{} rows, {} failed", summary.rows.len(), summary.failed_rows);
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::profile(Profile::Desk);
        cfg.system.n_users = 3;
        cfg.system.n_slots = 4;
        cfg.campaign.n_trials = 2;
        cfg.campaign.workers = 1;
        cfg
    }

    #[test]
    fn users_stay_within_radius() {
        let mut cfg = small();
        cfg.system.n_users = 40;
        let sc = Scenario::new(&cfg).unwrap();
        let users = sc.place_users(&sc.trial_seeds(0));
        let c = (sc.pass.center_lat_deg.to_radians(), sc.pass.center_lon_deg.to_radians());
        for u in users {
            let (la, lo) = (u.lat_deg.to_radians(), u.lon_deg.to_radians());
            let cos_d = la.sin() * c.0.sin() + la.cos() * c.0.cos() * (lo - c.1).cos();
            let d = cos_d.clamp(-1.0, 1.0).acos() * sc.orbit.earth_radius_km;
            assert!(d <= 50.0 + 1e-6, "{d}");
        }
    }

    #[test]
    fn one_row_per_sweep_point() {
        let mut cfg = small();
        cfg.campaign.n_trials = 1;
        cfg.campaign.schemes = vec![Scheme::EqualPower];
        let s = run_campaign(&cfg).unwrap();
        assert_eq!(s.rows.len(), cfg.campaign.sigma_e2.len());
        assert!(s.rows.iter().all(|r| r.genie_fraction <= 1.0 + 1e-6));
    }

    #[test]
    fn ratio_against_self_is_one() {
        let s = run_campaign(&small()).unwrap();
        for sc in Scheme::ALL {
            assert_eq!(s.ratio(sc, sc, 0.05).ratio, Some(1.0));
        }
    }
}
