//! Space-to-ground channel generator.
//!
//! Large-scale loss (free space, shadowing, clutter, gases) comes from the
//! elevation-banded tables; small-scale fading is a sum of sinusoids whose
//! Doppler spread follows the satellite's line-of-sight velocity. The LoS
//! state is redrawn independently for each user and slot.

mod tables;

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{max_doppler, slant_range, OrbitConfig, SlotGrid, SPEED_OF_LIGHT};
use crate::rng::{Purpose, SeedTree};

pub use tables::{BandRow, Environment, LargeScaleTables, LinkState, SHIPPED_TABLES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FadingConfig {
    /// Sinusoids per quadrature.
    pub n_sinusoids: usize,
    /// Rician K-factor (linear) used in the LoS state. `f64::INFINITY`
    /// leaves only the direct ray.
    pub rician_k: f64,
    /// Scale the scattered component to unit mean power. Off by default,
    /// in which case each quadrature carries unit power.
    pub normalize_unit_power: bool,
}

impl Default for FadingConfig {
    fn default() -> Self {
        Self {
            n_sinusoids: 10,
            rician_k: 10.0,
            normalize_unit_power: false,
        }
    }
}

impl FadingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sinusoids == 0 {
            return Err(Error::Config("n_sinusoids must be >= 1".into()));
        }
        if !(self.rician_k >= 0.0) {
            return Err(Error::Config(format!("rician_k must be >= 0, got {}", self.rician_k)));
        }
        Ok(())
    }
}

/// Random phases of one sum-of-sinusoids process, `theta[i][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SosPhases {
    pub theta: [Vec<f64>; 2],
}

impl SosPhases {
    pub fn draw<R: Rng + ?Sized>(n_sinusoids: usize, rng: &mut R) -> Self {
        let mut one = || (0..n_sinusoids).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
        let a = one();
        let b = one();
        Self { theta: [a, b] }
    }

    pub fn zeros(n_sinusoids: usize) -> Self {
        Self { theta: [vec![0.0; n_sinusoids], vec![0.0; n_sinusoids]] }
    }
}

/// Free-space path loss in dB at elevation `alpha_deg`.
pub fn fspl_db(alpha_deg: f64, orbit: &OrbitConfig) -> Result<f64> {
    let d_m = slant_range(alpha_deg, orbit)? * 1e3;
    Ok(20.0 * (4.0 * PI * d_m * orbit.carrier_hz / SPEED_OF_LIGHT).log10())
}

pub fn sample_shadow_fading_db<R: Rng + ?Sized>(
    state: LinkState,
    alpha_deg: f64,
    env: Environment,
    tables: &LargeScaleTables,
    rng: &mut R,
) -> Result<f64> {
    let sigma = tables.band(env, alpha_deg)?.shadow_sigma_db(state);
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Table(e.to_string()))?;
    Ok(normal.sample(rng))
}

/// Total path loss in dB for a given shadow-fading draw.
///
/// Clutter loss applies only without line of sight; gaseous attenuation
/// scales the zenith value by `1 / sin(alpha)`.
pub fn path_loss_db_with_shadow(
    state: LinkState,
    alpha_deg: f64,
    orbit: &OrbitConfig,
    env: Environment,
    tables: &LargeScaleTables,
    shadow_db: f64,
) -> Result<f64> {
    let row = tables.band(env, alpha_deg)?;
    let fspl = fspl_db(alpha_deg, orbit)?;
    let clutter = match state {
        LinkState::Los => 0.0,
        LinkState::Nlos => row.clutter_db,
    };
    let sin_a = alpha_deg.to_radians().sin();
    if !(sin_a > 0.0) {
        return Err(Error::Domain(format!("gaseous loss undefined at elevation {alpha_deg} deg")));
    }
    let gas = if alpha_deg == 90.0 { row.gas_zenith_db } else { row.gas_zenith_db / sin_a };
    Ok(fspl + shadow_db + clutter + gas)
}

pub fn total_path_loss_db<R: Rng + ?Sized>(
    state: LinkState,
    alpha_deg: f64,
    orbit: &OrbitConfig,
    env: Environment,
    tables: &LargeScaleTables,
    rng: &mut R,
) -> Result<f64> {
    let sf = sample_shadow_fading_db(state, alpha_deg, env, tables, rng)?;
    path_loss_db_with_shadow(state, alpha_deg, orbit, env, tables, sf)
}

/// Doppler frequencies of the sinusoids in quadrature `i` (0 or 1).
pub fn sos_frequencies(nu_max: f64, n_sinusoids: usize, quadrature: usize) -> Vec<f64> {
    let l_f = n_sinusoids as f64;
    let sign = if quadrature == 0 { 1.0 } else { -1.0 };
    (1..=n_sinusoids)
        .map(|l| nu_max * (PI / (2.0 * l_f) * (l as f64 - 0.5) + sign * PI / (12.0 * l_f)).cos())
        .collect()
}

/// Sum-of-sinusoids fading sample `a(t) = a1(t) + j a2(t)`.
pub fn sos_fading(t: f64, nu_max: f64, config: &FadingConfig, phases: &SosPhases) -> Result<Complex64> {
    let l = config.n_sinusoids;
    if l == 0 {
        return Err(Error::Config("n_sinusoids must be >= 1".into()));
    }
    if phases.theta.iter().any(|p| p.len() != l) {
        return Err(Error::Config(format!("expected {l} phases per quadrature")));
    }
    let amp = (2.0 / l as f64).sqrt();
    let mut parts = [0.0; 2];
    for (i, part) in parts.iter_mut().enumerate() {
        let freqs = sos_frequencies(nu_max, l, i);
        *part = amp
            * freqs
                .iter()
                .zip(&phases.theta[i])
                .map(|(nu, th)| (2.0 * PI * nu * t + th).cos())
                .sum::<f64>();
    }
    let mut a = Complex64::new(parts[0], parts[1]);
    if config.normalize_unit_power {
        a /= 2f64.sqrt();
    }
    Ok(a)
}

/// Complex channel gain for one fading sample and path loss.
///
/// NLoS: `a / sqrt(Gamma)`. LoS: the scattered part is scaled by
/// `1/sqrt(K+1)` and a direct ray of power `K/(K+1)` rotating at the maximum
/// Doppler is added.
pub fn channel_gain(
    t: f64,
    state: LinkState,
    path_loss_db: f64,
    nu_max: f64,
    rician_k: f64,
    a: Complex64,
    phi_r: f64,
) -> Result<Complex64> {
    let gamma = 10f64.powf(path_loss_db / 10.0);
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Numeric(format!("path loss {path_loss_db} dB has no finite linear value")));
    }
    let inv = 1.0 / gamma.sqrt();
    let h = match state {
        LinkState::Nlos => a,
        LinkState::Los => {
            let ray = Complex64::from_polar(1.0, 2.0 * PI * nu_max * t + phi_r);
            if rician_k.is_infinite() {
                ray
            } else {
                a / (rician_k + 1.0).sqrt() + ray * (rician_k / (rician_k + 1.0)).sqrt()
            }
        }
    };
    Ok(h * inv)
}

/// Pluggable LoS/NLoS state process.
pub trait LinkStateModel: Sync {
    fn sample(&self, user: usize, slot: usize, p_los: f64, rng: &mut dyn RngCore) -> LinkState;
}

/// States drawn independently per user and slot.
#[derive(Debug, Clone, Copy, Default)]
pub struct IndependentStates;

impl LinkStateModel for IndependentStates {
    fn sample(&self, _user: usize, _slot: usize, p_los: f64, rng: &mut dyn RngCore) -> LinkState {
        sample_los_state_p(p_los, rng)
    }
}

fn sample_los_state_p(p_los: f64, rng: &mut dyn RngCore) -> LinkState {
    if p_los >= 1.0 {
        return LinkState::Los;
    }
    if p_los <= 0.0 {
        return LinkState::Nlos;
    }
    if rng.random::<f64>() < p_los {
        LinkState::Los
    } else {
        LinkState::Nlos
    }
}

pub fn sample_los_state<R: RngCore>(
    alpha_deg: f64,
    env: Environment,
    tables: &LargeScaleTables,
    rng: &mut R,
) -> Result<LinkState> {
    let p = tables.band(env, alpha_deg)?.p_los;
    Ok(sample_los_state_p(p, rng))
}

/// Block-fading channel of `K` users over `N` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: Vec<Vec<Complex64>>,
    pub g: Vec<Vec<f64>>,
    pub state: Vec<Vec<LinkState>>,
    pub elevation_deg: Vec<Vec<f64>>,
}

impl ChannelRealization {
    /// Builds a realization from complex gains, deriving `g = |h|^2`.
    pub fn from_h(h: Vec<Vec<Complex64>>, state: Vec<Vec<LinkState>>, elevation_deg: Vec<Vec<f64>>) -> Self {
        let g = h.iter().map(|row| row.iter().map(|x| x.norm_sqr()).collect()).collect();
        Self { h, g, state, elevation_deg }
    }

    /// Realization from power gains alone (real, non-negative `h`). Used for
    /// hand-built instances; state and elevation are placeholders.
    pub fn from_power_gains(g: Vec<Vec<f64>>) -> Self {
        let h = g.iter().map(|row| row.iter().map(|&x| Complex64::new(x.sqrt(), 0.0)).collect()).collect();
        let state = g.iter().map(|row| vec![LinkState::Los; row.len()]).collect();
        let elevation = g.iter().map(|row| vec![90.0; row.len()]).collect();
        Self { h, g, state, elevation_deg: elevation }
    }

    pub fn n_users(&self) -> usize {
        self.g.len()
    }

    pub fn n_slots(&self) -> usize {
        self.g.first().map_or(0, Vec::len)
    }

    /// Writes `user, slot, state, g_linear, h_re, h_im, elevation_deg` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user", "slot", "state", "g_linear", "h_re", "h_im", "elevation_deg"])?;
        for k in 0..self.n_users() {
            for n in 0..self.n_slots() {
                let h = self.h[k][n];
                w.write_record([
                    k.to_string(),
                    n.to_string(),
                    self.state[k][n].to_string(),
                    format!("{:e}", self.g[k][n]),
                    format!("{:e}", h.re),
                    format!("{:e}", h.im),
                    format!("{:.6}", self.elevation_deg[k][n]),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Everything needed to draw channels for a scenario.
#[derive(Debug, Clone)]
pub struct ChannelModel<'a> {
    pub orbit: &'a OrbitConfig,
    pub tables: &'a LargeScaleTables,
    pub environment: Environment,
    pub fading: &'a FadingConfig,
}

/// Draws one realization over `grid`.
///
/// Each user owns independent streams for fading phases, shadowing and LoS
/// draws, derived from `seeds` and the user's row index, so users can be
/// generated in any order with identical results.
pub fn generate_realization(
    grid: &SlotGrid,
    model: &ChannelModel<'_>,
    state_model: &dyn LinkStateModel,
    seeds: &SeedTree,
) -> Result<ChannelRealization> {
    model.orbit.validate()?;
    model.fading.validate()?;
    let k_users = grid.n_users();
    let mut h = Vec::with_capacity(k_users);
    let mut state = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let row_alpha = &grid.elevation_deg[k];
        if row_alpha.len() != grid.n_slots {
            return Err(Error::Scenario(format!("elevation row {k} has {} slots, expected {}", row_alpha.len(), grid.n_slots)));
        }
        let mut phase_rng = seeds.stream(k as u64, Purpose::FadingPhases, 0);
        let mut shadow_rng = seeds.stream(k as u64, Purpose::ShadowFading, 0);
        let mut los_rng = seeds.stream(k as u64, Purpose::LosState, 0);
        let phases = SosPhases::draw(model.fading.n_sinusoids, &mut phase_rng);
        let phi_r = phase_rng.random::<f64>() * 2.0 * PI;

        let mut h_row = Vec::with_capacity(grid.n_slots);
        let mut s_row = Vec::with_capacity(grid.n_slots);
        for (n, &alpha) in row_alpha.iter().enumerate() {
            let t = grid.slot_epoch_s[n];
            let band = model.tables.band(model.environment, alpha)?;
            let s = state_model.sample(k, n, band.p_los, &mut los_rng);
            let sf = sample_shadow_fading_db(s, alpha, model.environment, model.tables, &mut shadow_rng)?;
            let pl = path_loss_db_with_shadow(s, alpha, model.orbit, model.environment, model.tables, sf)?;
            let nu = max_doppler(alpha, model.orbit)?;
            let a = sos_fading(t, nu, model.fading, &phases)?;
            h_row.push(channel_gain(t, s, pl, nu, model.fading.rician_k, a, phi_r)?);
            s_row.push(s);
        }
        h.push(h_row);
        state.push(s_row);
    }
    Ok(ChannelRealization::from_h(h, state, grid.elevation_deg.clone()))
}
