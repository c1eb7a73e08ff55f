use std::time::Instant;

use ionring::config::DEFAULT_PULSE_WIDTH_MODES;
use ionring::dynamics::monodromy_stability;
use ionring::experiments::{
    default_negativity_times, run_backward_thermality, run_negativity_trace, CorrelationKind,
    QuenchRun, THERMALITY_SOUND,
};
use ionring::lattice::Lattice;
use ionring::modes::{ascending_slots, mode_index, DispersionTable, NormSpectrum};
use ionring::profile::{Profile, SoundModel};
use ionring::{Interaction, RingConfig};
use serde_json::{json, Value};

use crate::output::{fmt_f64, Emitter};
use crate::units::Physical;
use crate::{CliError, Common};

const NATURAL_UNITS: &str = "m = L = T = 1; angles in rad; frequencies in 1/T";

fn emitter(common: &Common, cfg: Option<&RingConfig>) -> Result<Emitter, CliError> {
    Emitter::new(&common.out, cfg)
}

fn run_info(common: &Common) -> Value {
    json!({
        "seedless": true,
        "seedless_flag": common.seedless,
        "threads": common.threads,
        "external_hessian": !common.no_external_hessian,
        "out": common.out.display().to_string(),
    })
}

/// Static version of `cfg`: a ramp is replaced by its target profile.
fn static_config(cfg: &RingConfig) -> RingConfig {
    let mut c = cfg.clone();
    if let Some(r) = c.ramp.take() {
        log::info!(
            "using the post-quench profile (v_min_frac = {})",
            r.target_v_min_frac
        );
        c.v_min_frac = r.target_v_min_frac;
    }
    c
}

pub fn profile(common: &Common) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = static_config(&common.load()?);
    let profile = Profile::new(&cfg)?;
    let lattice = Lattice::new(&cfg)?.with_external_hessian(!common.no_external_hessian);
    let mut out = emitter(common, Some(&cfg))?;

    let samples = cfg.n_ions.max(1000);
    out.csv(
        "profile.csv",
        NATURAL_UNITS,
        &["x", "theta", "v", "c_continuum", "g2"],
        profile.table(samples).into_iter().map(|r| r.to_vec()),
    )?;

    let frame = lattice.frame(0.0)?;
    let f = lattice.force_matrix(&frame)?;
    let n = cfg.n_ions;
    out.csv(
        "forces.csv",
        "generalised forces in mL²/T² per rad; stiffness in mL²/T² per rad²",
        &["i", "theta_i", "Fe_i", "f_ii", "f_i_i1"],
        (0..n).map(|i| {
            vec![
                i as f64,
                frame.theta[i],
                frame.external_force[i],
                f.get(i, i),
                f.get(i, (i + 1) % n),
            ]
        }),
    )?;

    let horizons = |model: SoundModel| -> Value {
        let hs = profile.find_horizons(model);
        let t: Vec<Value> = hs
            .iter()
            .map(|h| json!({ "horizon": h, "hawking_temperature": profile.hawking_temperature(h, model) }))
            .collect();
        json!({ "model": model, "horizon_velocity": profile.horizon_velocity(model), "horizons": t })
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let summary = json!({
        "v_min": profile.v_min(),
        "v_max": profile.v_max(),
        "v_min_frac": profile.v_min() / two_pi,
        "v_max_frac": profile.v_max() / two_pi,
        "homogeneous": cfg.is_homogeneous(),
        "subsonic_interval": profile.subsonic_interval(),
        "supersonic_interval": profile.supersonic_interval(),
        "continuum": horizons(SoundModel::Continuum),
        "lattice": horizons(THERMALITY_SOUND),
    });
    out.json("profile.json", &summary)?;
    println!(
        "v_min·T/2π = {}  v_max·T/2π = {}",
        fmt_f64(profile.v_min() / two_pi),
        fmt_f64(profile.v_max() / two_pi)
    );
    out.manifest(
        "profile",
        &[("total", start.elapsed().as_secs_f64())],
        run_info(common),
    )
}

pub fn dispersion(common: &Common) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = static_config(&common.load()?);
    let mut out = emitter(common, Some(&cfg))?;
    let table = |i| DispersionTable::dispersion(cfg.n_ions, cfg.kappa, cfg.v_min_frac, i);
    let nn = table(Interaction::NearestNeighbor);
    let fc = table(Interaction::FullCoulomb);
    let rows_nn = nn.rows();
    let rows_fc = fc.rows();
    out.csv(
        "dispersion.csv",
        "k in label units (mode n has k = 2πn); omega, vgroup in 1/T",
        &[
            "n",
            "k",
            "omega_nn",
            "vgroup_nn",
            "omega_coulomb",
            "vgroup_coulomb",
        ],
        rows_nn
            .iter()
            .zip(&rows_fc)
            .map(|(a, b)| vec![a.0 as f64, a.1, a.2, a.3, b.2, b.3]),
    )?;
    let low = |t: &DispersionTable| {
        t.rows()
            .into_iter()
            .filter(|r| r.0 >= 1)
            .take(5)
            .map(|r| r.3)
            .collect::<Vec<_>>()
    };
    let summary = json!({
        "v_frac": cfg.v_min_frac,
        "omega_max_nn": nn.ring().omega_max(),
        "omega_max_coulomb": fc.ring().omega_max(),
        "vgroup_lowest_nn": low(&nn),
        "vgroup_lowest_coulomb": low(&fc),
    });
    out.json("dispersion.json", &summary)?;
    out.manifest(
        "dispersion",
        &[("total", start.elapsed().as_secs_f64())],
        run_info(common),
    )
}

pub fn stability(common: &Common) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = static_config(&common.load()?);
    let lattice = Lattice::new(&cfg)?.with_external_hessian(!common.no_external_hessian);
    let n_sub = cfg.n_sub.unwrap_or_else(|| lattice.default_n_sub());
    let report = monodromy_stability(&lattice, n_sub)?;
    let mut out = emitter(common, Some(&cfg))?;
    let mut eig = report.eigenvalues.clone();
    eig.sort_by(|a, b| b.0.hypot(b.1).total_cmp(&a.0.hypot(a.1)));
    out.csv(
        "monodromy.csv",
        "full-period monodromy eigenvalues",
        &["re", "im", "modulus"],
        eig.iter().map(|&(re, im)| vec![re, im, re.hypot(im)]),
    )?;
    let summary = json!({
        "classification": report.classification,
        "max_modulus": report.max_modulus,
        "growth_rate": report.growth_rate,
        "pairing_defect": report.pairing_defect,
        "deflated": report.deflated,
        "n_sub": report.n_sub,
        "diagnostic": report.diagnostic,
        "tolerance": ionring::dynamics::STABILITY_TOL,
    });
    out.json("stability.json", &summary)?;
    println!(
        "classification: {}  max|λ| = {}  growth = {}/T",
        serde_json::to_value(report.classification)
            .unwrap_or_default()
            .as_str()
            .unwrap_or("?"),
        fmt_f64(report.max_modulus),
        fmt_f64(report.growth_rate)
    );
    out.manifest(
        "stability",
        &[("total", start.elapsed().as_secs_f64())],
        run_info(common),
    )
}

fn spectrum_rows(spec: &NormSpectrum) -> impl Iterator<Item = Vec<f64>> + '_ {
    let n = spec.n_ions;
    ascending_slots(n).into_iter().map(move |j| {
        let th = spec.plus_modes.theta[j] + spec.minus_modes.theta[j];
        let td = spec.plus_modes.theta_dot[j] + spec.minus_modes.theta_dot[j];
        vec![
            mode_index(j, n) as f64,
            spec.k(j),
            th.re,
            th.im,
            td.re,
            td.im,
            spec.plus[j],
            spec.minus[j],
        ]
    })
}

const SPECTRUM_COLUMNS: &[&str] = &[
    "n",
    "k",
    "re_theta_k",
    "im_theta_k",
    "re_theta_dot_k",
    "im_theta_dot_k",
    "n_plus",
    "n_minus",
];

pub fn thermality(common: &Common, s: Option<u32>) -> Result<(), CliError> {
    let start = Instant::now();
    let mut cfg = common.load()?;
    if let Some(s) = s {
        cfg = cfg.with_override("pulse.s", &s.to_string())?;
    }
    let s = cfg.pulse.s;
    let report = run_backward_thermality(&cfg, s, common.options())?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut out = emitter(common, Some(&cfg))?;

    let final_name = format!("spectrum_final_s{s}.csv");
    let initial_name = format!("spectrum_initial_s{s}.csv");
    out.csv(
        &final_name,
        &format!(
            "mode amplitudes at t = {}",
            fmt_f64(report.final_spectrum.t)
        ),
        SPECTRUM_COLUMNS,
        spectrum_rows(&report.final_spectrum),
    )?;
    out.csv(
        &initial_name,
        &format!(
            "mode amplitudes at t = {}",
            fmt_f64(report.initial_spectrum.t)
        ),
        SPECTRUM_COLUMNS,
        spectrum_rows(&report.initial_spectrum),
    )?;

    let mut value = serde_json::to_value(&report).map_err(|e| CliError::Output(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("final_spectrum");
        obj.remove("initial_spectrum");
        obj.insert("final_spectrum_file".into(), json!(final_name));
        obj.insert("initial_spectrum_file".into(), json!(initial_name));
        obj.insert(
            "pulse_width_modes".into(),
            json!(cfg
                .pulse
                .width_override
                .unwrap_or(DEFAULT_PULSE_WIDTH_MODES)),
        );
    }
    out.json(&format!("thermality_s{s}.json"), &value)?;
    println!(
        "epsilon = {}  (single-frequency {})  back time {}  T_H = {}",
        fmt_f64(report.epsilon),
        fmt_f64(report.epsilon_single),
        fmt_f64(report.back_time),
        fmt_f64(report.hawking_temperature)
    );
    out.manifest("thermality", &[("total", elapsed)], run_info(common))
}

pub fn quench(
    common: &Common,
    temperature_over_th: f64,
    displacement: bool,
) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = common.load()?;
    let kind = if displacement {
        CorrelationKind::Displacement
    } else {
        CorrelationKind::Momentum
    };
    let mut times: Vec<f64> = cfg.times.iter().copied().filter(|t| *t > 0.0).collect();
    if times.is_empty() {
        times.push(0.5);
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let run = QuenchRun::new(&cfg, common.options())?;
    let temperature = temperature_over_th * run.hawking_temperature;
    let state = run.initial_state(temperature, cfg.hbar)?;
    let mut all = vec![0.0];
    all.extend(&times);
    let states = run.evolve(&state, &all)?;
    let maps = states
        .iter()
        .map(|s| run.correlation_map(s, kind))
        .collect::<ionring::Result<Vec<_>>>()?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut out = emitter(common, Some(&cfg))?;

    let background = maps[0].cross_peak;
    let n = cfg.n_ions;
    let columns: Vec<String> = (0..n).map(|j| format!("c{j}")).collect();
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut summaries = Vec::new();
    for m in &maps {
        let tag = fmt_f64(m.t);
        out.csv(
            &format!("correlations_t{tag}.csv"),
            &format!("{:?} correlations at t = {tag}, row-major N×N", m.kind),
            &columns,
            (0..m.matrix.nrows()).map(|i| m.matrix.row(i).iter().copied().collect()),
        )?;
        out.csv(
            &format!("angles_t{tag}.csv"),
            "lab angles in rad",
            &["i", "theta"],
            m.theta
                .iter()
                .enumerate()
                .map(|(i, th)| vec![i as f64, *th]),
        )?;
        summaries.push(json!({
            "map": m,
            "band_detected": m.cross_peak > 5.0 * background,
            "correlations_file": format!("correlations_t{tag}.csv"),
            "angles_file": format!("angles_t{tag}.csv"),
        }));
    }
    if states.len() < all.len() {
        log::warn!(
            "evolution stopped early; {} of {} maps written",
            states.len(),
            all.len()
        );
    }
    let summary = json!({
        "hawking_temperature": run.hawking_temperature,
        "temperature": temperature,
        "temperature_over_th": temperature_over_th,
        "pre_quench_background": background,
        "n_sub": run.n_sub,
        "maps": summaries,
    });
    out.json("quench.json", &summary)?;
    for m in maps.iter().skip(1) {
        match &m.measured {
            Some(r) => println!(
                "t = {}: cross peak {}  ridge slope {} (predicted {})",
                fmt_f64(m.t),
                fmt_f64(m.cross_peak),
                fmt_f64(r.slope),
                fmt_f64(m.ridge.map_or(f64::NAN, |p| p.slope))
            ),
            None => println!(
                "t = {}: cross peak {}  no ridge fit",
                fmt_f64(m.t),
                fmt_f64(m.cross_peak)
            ),
        }
    }
    out.manifest("quench", &[("total", elapsed)], run_info(common))
}

pub fn negativity(
    common: &Common,
    temperatures: &[f64],
    times: Option<&[f64]>,
    width: Option<usize>,
) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = common.load()?;
    if temperatures.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(CliError::Usage(
            "--temperatures must be finite and non-negative".into(),
        ));
    }
    let times = times.map_or_else(|| default_negativity_times(&cfg), <[f64]>::to_vec);
    let mut traces = Vec::new();
    for &t in temperatures {
        traces.push(run_negativity_trace(
            &cfg,
            t,
            width,
            &times,
            common.options(),
        )?);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mut out = emitter(common, Some(&cfg))?;
    out.csv(
        "negativity.csv",
        "E_N in bits; T_init as k_B T·T/ħ",
        &["t", "E_N", "T_init", "T_init_over_TH"],
        traces.iter().flat_map(|tr| {
            tr.times
                .iter()
                .zip(&tr.negativity)
                .map(move |(t, e)| vec![*t, *e, tr.temperature, tr.temperature_over_th])
        }),
    )?;
    let summary: Vec<Value> = traces
        .iter()
        .map(|tr| {
            json!({
                "temperature_over_th": tr.temperature_over_th,
                "temperature": tr.temperature,
                "hawking_temperature": tr.hawking_temperature,
                "region_width": tr.region_width,
                "increasing": tr.is_increasing(1e-9),
                "first": tr.negativity.first(),
                "last": tr.negativity.last(),
                "max": tr.negativity.iter().copied().fold(0.0, f64::max),
            })
        })
        .collect();
    out.json("negativity.json", &summary)?;
    for tr in &traces {
        println!(
            "T = {}·T_H: E_N {} → {}",
            fmt_f64(tr.temperature_over_th),
            fmt_f64(*tr.negativity.first().unwrap_or(&f64::NAN)),
            fmt_f64(*tr.negativity.last().unwrap_or(&f64::NAN))
        );
    }
    out.manifest("negativity", &[("total", elapsed)], run_info(common))
}

pub fn units(
    common: &Common,
    mass_amu: f64,
    charge: f64,
    spacing_m: f64,
    rotation_hz: f64,
) -> Result<(), CliError> {
    for (name, v) in [
        ("--mass-amu", mass_amu),
        ("--spacing-m", spacing_m),
        ("--rotation-hz", rotation_hz),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Usage(format!("{name} must be positive")));
        }
    }
    let cfg = match &common.config {
        Some(_) => Some(static_config(&common.load()?)),
        None => None,
    };
    let n_ions = cfg.as_ref().map_or(1000, |c| c.n_ions);
    let hawking = match &cfg {
        Some(c) => {
            let p = Profile::new(c)?;
            p.black_hole_horizon(THERMALITY_SOUND)
                .map(|h| p.hawking_temperature(&h, THERMALITY_SOUND).value())
        }
        None => None,
    };
    let phys = Physical {
        n_ions,
        mass_amu,
        charge,
        spacing_m,
        rotation_hz,
    };
    let map = phys.map(hawking);
    let mut out = emitter(common, cfg.as_ref())?;
    out.json("units.json", &map)?;
    println!(
        "circumference L = {} m, period T = {} s",
        fmt_f64(map.circumference_m),
        fmt_f64(map.period_s)
    );
    println!(
        "ħ̃ = {}  κ̃ = {}",
        fmt_f64(map.hbar_tilde),
        fmt_f64(map.kappa_tilde)
    );
    if let (Some(n), Some(k)) = (map.hawking_temperature_natural, map.hawking_temperature_k) {
        println!("T_H·T = {} → T_H = {} K", fmt_f64(n), fmt_f64(k));
    }
    out.manifest("units", &[], run_info(common))
}
