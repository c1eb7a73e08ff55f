//! Browser bindings: each entry point takes a `key = value` config and returns JSON.

use ionring::experiments::{default_negativity_times, run_negativity_trace, RunOptions};
use ionring::modes::DispersionTable;
use ionring::profile::{HawkingTemperature, Horizon, Profile, SoundModel};
use ionring::{Interaction, RingConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Res<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn parse(config: &str) -> Res<RingConfig> {
    let mut cfg = RingConfig::parse(config).map_err(err)?;
    if let Some(r) = cfg.ramp.take() {
        cfg.v_min_frac = r.target_v_min_frac;
    }
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

fn to_json<T: Serialize>(value: &T) -> Res<String> {
    serde_json::to_string(value).map_err(err)
}

fn js(r: Res<String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[derive(Serialize)]
struct HorizonRow {
    horizon: Horizon,
    temperature: HawkingTemperature,
}

#[derive(Serialize)]
struct ProfileView {
    theta: Vec<f64>,
    velocity: Vec<f64>,
    sound: Vec<f64>,
    horizons: Vec<HorizonRow>,
}

/// Velocity and continuum sound speed against angle, plus every horizon.
#[wasm_bindgen]
pub fn profile(config: &str, samples: usize) -> Result<String, JsError> {
    js(profile_json(config, samples))
}

fn profile_json(config: &str, samples: usize) -> Res<String> {
    let cfg = parse(config)?;
    let p = Profile::new(&cfg).map_err(err)?;
    let rows = p.table(samples.clamp(16, 4096));
    let horizons = p
        .find_horizons(SoundModel::Continuum)
        .into_iter()
        .map(|h| HorizonRow {
            horizon: h,
            temperature: p.hawking_temperature(&h, SoundModel::Continuum),
        })
        .collect();
    to_json(&ProfileView {
        theta: rows.iter().map(|r| r[1]).collect(),
        velocity: rows.iter().map(|r| r[2]).collect(),
        sound: rows.iter().map(|r| r[3]).collect(),
        horizons,
    })
}

#[derive(Serialize)]
struct Branch {
    interaction: &'static str,
    n: Vec<i64>,
    omega: Vec<f64>,
    group_velocity: Vec<f64>,
}

/// Subsonic-region dispersion for both interaction models, `n ≥ 0`.
#[wasm_bindgen]
pub fn dispersion(config: &str) -> Result<String, JsError> {
    js(dispersion_json(config))
}

fn dispersion_json(config: &str) -> Res<String> {
    let cfg = parse(config)?;
    let branches: Vec<Branch> = [Interaction::NearestNeighbor, Interaction::FullCoulomb]
        .into_iter()
        .map(|inter| {
            let rows: Vec<_> =
                DispersionTable::dispersion(cfg.n_ions, cfg.kappa, cfg.v_min_frac, inter)
                    .rows()
                    .into_iter()
                    .filter(|r| r.0 >= 0)
                    .collect();
            Branch {
                interaction: inter.as_str(),
                n: rows.iter().map(|r| r.0).collect(),
                omega: rows.iter().map(|r| r.2).collect(),
                group_velocity: rows.iter().map(|r| r.3).collect(),
            }
        })
        .collect();
    to_json(&branches)
}

/// Negativity across the black-hole horizon after the quench, for one initial temperature in `T_H`.
#[wasm_bindgen]
pub fn negativity(config: &str, temperature_over_th: f64) -> Result<String, JsError> {
    js(negativity_json(config, temperature_over_th))
}

fn negativity_json(config: &str, temperature_over_th: f64) -> Res<String> {
    let cfg = RingConfig::parse(config).map_err(err)?;
    cfg.validate().map_err(err)?;
    let times = default_negativity_times(&cfg);
    let trace = run_negativity_trace(
        &cfg,
        temperature_over_th,
        None,
        &times,
        RunOptions::default(),
    )
    .map_err(err)?;
    to_json(&trace)
}
