//! The two numerical experiments and their analyses.
//!
//! * Backward thermality: a final low-wave-number pulse is propagated
//!   backwards through a static black-hole profile and the Klein-Gordon
//!   norm of the positive-frequency incoming pulse is compared with the
//!   Bose factor at the Hawking temperature.
//! * Quench: the covariance of a thermal (or vacuum) state is carried
//!   through a ramp of `v_min`; correlation maps and the logarithmic
//!   negativity between horizon-adjacent regions are read off.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::RingConfig;
use crate::dynamics::{
    symplectic_eigenvalues, DirectSource, GaussianState, Integrator, PhaseBlock, StaticForceCache,
};
use crate::error::{Error, Result};
use crate::lattice::{wrap_angle, Lattice, M_EFF};
use crate::modes::{
    analyse, build_final_pulse, dominant_cluster, frequency_roots, from_modes, label_in,
    mode_index, to_modes, Cluster, ComplexField, DispersionTable, FinalPulse, FrequencyRoot,
    FrequencySign, NormSpectrum,
};
use crate::profile::{Profile, SoundModel};

const TWO_PI: f64 = 2.0 * PI;

/// Default label offset of the final pulse from the black-hole horizon,
/// towards the subsonic side.
pub const DEFAULT_PULSE_OFFSET: f64 = 0.1;

/// Longest backward evolution the localisation monitor tries, in `T`.
pub const BACKWARD_BUDGET: f64 = 2.0;

/// Monitor resolution, in `T`.
pub const MONITOR_STEP: f64 = 0.01;

/// Maximum `|δθ|²` weight outside the subsonic plateau for a localised field.
pub const LOCALISATION_TOL: f64 = 1e-2;

/// Per-mode norm floor, relative to each branch's peak, delimiting an incoming pulse.
pub const INCOMING_FLOOR: f64 = 1e-3;

/// Sound model used for the Hawking temperature of a thermality run: the
/// group velocity of the lowest lattice mode.
pub const THERMALITY_SOUND: SoundModel = SoundModel::DiscreteGroupVelocity { k_ref: TWO_PI };

/// Switches shared by the experiment runners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Include the spline-interpolated curvature of the external potential.
    pub external_hessian: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            external_hessian: true,
        }
    }
}

// ---------------------------------------------------------------------------
// thermal states

/// Thermal (or, at zero temperature, vacuum) state of the homogeneous
/// reference ring seen by `lattice` at `t`.
///
/// `temperature` is `k_B T·T/ħ`. With a leapfrog step `h ≠ 0` the state is
/// the exact fixed point of the drift-kick-drift map: occupations use the
/// map's rotation frequency `ω̄ = (2/h)·asin(ωh/2)` and the quadratures are
/// reweighted by `√(1 − h²ω²/4)`. `h = 0` gives the continuous-time state.
///
/// The uniform mode has no restoring force. It gets the minimum-uncertainty
/// displacement spread of the lowest phonon and the free-particle thermal
/// momentum spread (never below that minimum).
pub fn thermal_state(
    lattice: &Lattice,
    t: f64,
    temperature: f64,
    hbar_tilde: f64,
    h: f64,
) -> Result<GaussianState> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be finite and ≥ 0, got {temperature}"
        )));
    }
    if !(hbar_tilde > 0.0) {
        return Err(Error::Domain(format!(
            "ħ̃ must be positive, got {hbar_tilde}"
        )));
    }
    let n = lattice.n_ions;
    let ring = lattice.subsonic_reference(t);
    let hbar = M_EFF * hbar_tilde;
    let mut var_q = vec![0.0; n];
    let mut var_p = vec![0.0; n];
    for j in 1..n {
        let w = ring.omega(TWO_PI * mode_index(j, n) as f64);
        let x = 0.5 * w * h;
        if x.abs() >= 1.0 {
            return Err(Error::Domain(format!("step {h} unstable for ω = {w}")));
        }
        let wb = if h == 0.0 { w } else { 2.0 * x.asin() / h };
        let coth = if temperature == 0.0 {
            1.0
        } else {
            1.0 / (wb.abs() / (2.0 * temperature)).tanh()
        };
        let r = (1.0 - x * x).sqrt();
        var_q[j] = hbar / (2.0 * M_EFF * w) * coth * r;
        var_p[j] = hbar * M_EFF * w / 2.0 * coth / r;
    }
    let w1 = ring.omega(TWO_PI);
    var_q[0] = hbar / (2.0 * M_EFF * w1);
    var_p[0] = (M_EFF * hbar * temperature).max(hbar * M_EFF * w1 / 2.0);

    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    cov.view_mut((0, 0), (n, n))
        .copy_from(&circulant_from_spectrum(&var_q));
    cov.view_mut((n, n), (n, n))
        .copy_from(&circulant_from_spectrum(&var_p));
    let state = GaussianState {
        t,
        mean: DVector::zeros(2 * n),
        cov,
        hbar,
    };
    state.check_uncertainty(1e-8)?;
    Ok(state)
}

/// Real symmetric circulant `C_ij = (1/N) Σ_k λ_k cos(2πk(i−j)/N)`.
fn circulant_from_spectrum(lambda: &[f64]) -> DMatrix<f64> {
    let n = lambda.len();
    let row: Vec<f64> = (0..n)
        .map(|d| {
            lambda
                .iter()
                .enumerate()
                .map(|(k, l)| l * (TWO_PI * ((k * d) % n) as f64 / n as f64).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| row[(i + n - j) % n])
}

// ---------------------------------------------------------------------------
// backward thermality

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Incoming pulses are upstream movers at high `|k|` inside the zone.
    Normal,
    /// The upstream roots fall outside the zone; incoming pulses are
    /// downstream movers near the zone edge.
    Bloch,
}

/// One lab-frequency bin of the spectrally resolved comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalBin {
    pub omega_lo: f64,
    pub omega_hi: f64,
    /// `|N|`-weighted mean `|Ω|` of the final pulse in the bin.
    pub omega: f64,
    pub final_norm: f64,
    pub measured: f64,
    pub predicted: f64,
    /// `(measured − predicted)/predicted`.
    pub deviation: f64,
}

/// Distance of an incoming cluster from the nearest frequency-condition root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootMatch {
    pub branch: FrequencySign,
    pub central_k: f64,
    /// Norm-weighted standard deviation of `k` across the cluster.
    pub k_width: f64,
    pub root: Option<FrequencyRoot>,
    /// `|k − k_root|` in units of the pulse family's Gaussian width `2πw`.
    pub offset_in_widths: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalityReport {
    pub s: u32,
    pub n_ions: usize,
    pub interaction: crate::config::Interaction,
    pub kappa: f64,
    pub pulse_center: f64,
    pub pulse_branch: FrequencySign,
    pub pulse_probe_velocity: f64,
    pub back_time: f64,
    /// `|δθ|²` fraction outside the subsonic plateau at `back_time`.
    pub leakage: f64,
    /// Uniform-mode content removed before the split, relative to the
    /// largest mode amplitude.
    pub zero_mode: f64,
    /// Norm left on the final pulse's own band at `back_time`.
    pub residual: f64,
    pub final_spectrum: NormSpectrum,
    pub initial_spectrum: NormSpectrum,
    /// Positive-norm total of the initial field.
    pub n_plus: f64,
    /// Negative-norm total of the initial field.
    pub n_minus: f64,
    /// Total norm of the final pulse.
    pub n_final: f64,
    /// `|N⁺ + N⁻ − N_final| / |N_final|`.
    pub bookkeeping_defect: f64,
    /// Norm-weighted central lab frequency of the final pulse.
    pub omega0: f64,
    pub hawking_temperature: f64,
    pub hawking_profile_form: f64,
    /// `1/(e^{|ω₀|/T_H} − 1)`.
    pub bose_factor: f64,
    /// Mode-resolved prediction `Σ_k |N_final,k|·n_B(|Ω_k|)`.
    pub n_plus_pred: f64,
    /// `|N⁺ − N⁺_pred| / N⁺_pred`.
    pub epsilon: f64,
    /// Single-frequency prediction `|N_final|·n_B(|ω₀|)`.
    pub n_plus_pred_single: f64,
    pub epsilon_single: f64,
    pub bins: Vec<ThermalBin>,
    pub incoming_plus: Option<Cluster>,
    pub incoming_minus: Option<Cluster>,
    /// The two strongest incoming clusters carry opposite wave-number signs.
    pub opposite_k_signs: bool,
    pub regime: Regime,
    pub outside_bz: bool,
    pub roots: Vec<FrequencyRoot>,
    pub root_matches: Vec<RootMatch>,
}

fn bose(omega: f64, temperature: f64) -> f64 {
    1.0 / (omega.abs() / temperature).exp_m1()
}

fn weighted_mean(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (sw, swx) = pairs.fold((0.0, 0.0), |(a, b), (w, x)| (a + w, b + w * x));
    if sw > 0.0 {
        swx / sw
    } else {
        0.0
    }
}

fn branch_norms(spec: &NormSpectrum, branch: FrequencySign) -> &[f64] {
    match branch {
        FrequencySign::Plus => &spec.plus,
        FrequencySign::Minus => &spec.minus,
    }
}

/// Whether the field has left the horizon: localised on the subsonic
/// plateau, with at most 1% of its norm left on the final pulse's band.
fn scattered(
    field: &ComplexField,
    profile: &Profile,
    spec: &NormSpectrum,
    fin: &FinalPulse,
) -> (bool, f64, f64) {
    let (lo, hi) = profile.subsonic_interval();
    let leak = field.fraction_outside(lo, hi);
    let band = fin.width_modes * 3.0 + 5.0;
    let residual: f64 = (0..spec.n_ions)
        .filter(|&j| {
            let m = mode_index(j, spec.n_ions) as f64;
            m >= 1.0 && m <= band
        })
        .map(|j| branch_norms(spec, fin.branch)[j].abs())
        .sum();
    (leak < LOCALISATION_TOL && residual < 1e-2, leak, residual)
}

/// Propagates the final pulse of `config` backwards and compares the
/// positive-norm incoming part with the thermal prediction.
pub fn run_backward_thermality(
    config: &RingConfig,
    s: u32,
    opts: RunOptions,
) -> Result<ThermalityReport> {
    let mut config = config.clone();
    config.pulse.s = s;
    config.validate()?;
    let profile = Profile::new(&config)?;
    let lattice = Lattice::new(&config)?.with_external_hessian(opts.external_hessian);
    if !lattice.schedule.is_static() {
        return Err(Error::Schedule(
            "thermality runs need a static profile".into(),
        ));
    }
    let n = config.n_ions;
    let n_sub = config.n_sub.unwrap_or_else(|| lattice.default_n_sub());
    let cache = StaticForceCache::new(&lattice, n_sub, 0.0)?;
    let integ = Integrator::new(&cache, n_sub);
    let disp = DispersionTable::new(lattice.subsonic_reference(0.0));

    let horizon = profile
        .black_hole_horizon(THERMALITY_SOUND)
        .ok_or_else(|| Error::NoHorizon("profile has no black-hole horizon".into()))?;
    let center = config
        .pulse
        .center
        .unwrap_or_else(|| (horizon.label - DEFAULT_PULSE_OFFSET).rem_euclid(1.0));
    let fin = build_final_pulse(
        &config.pulse,
        center,
        &profile,
        THERMALITY_SOUND,
        &disp,
        &integ,
    )?;
    let final_spectrum = analyse(&fin.field, &disp)?;
    let n_final = final_spectrum.total();

    // localisation monitor, or the configured time if one is given
    let requested = config.times.iter().copied().find(|t| *t < 0.0);
    let mut block = fin.field.to_block();
    let (field, back_time, leak, residual) = match requested {
        Some(t) => {
            integ.evolve_block(&mut block, t)?;
            let field = ComplexField::from_block(&block);
            let spec = analyse(&strip_zero_mode(&field).0, &disp)?;
            let (ok, leak, residual) = scattered(&field, &profile, &spec, &fin);
            if !ok {
                log::warn!(
                    "field not fully scattered at t = {t}: leakage {leak:e}, residual {residual:e}"
                );
            }
            (field, t, leak, residual)
        }
        None => monitor(&integ, &mut block, &profile, &disp, &fin)?,
    };
    let (field, zero_mode) = strip_zero_mode(&field);
    let initial_spectrum = analyse(&field, &disp)?;

    let n_plus = initial_spectrum.total_plus;
    let n_minus = initial_spectrum.total_minus;
    let bookkeeping_defect = (n_plus + n_minus - n_final).abs() / n_final.abs();

    let fnorm = branch_norms(&final_spectrum, fin.branch);
    let omega0 = weighted_mean(
        (0..n).map(|j| (fnorm[j].abs(), final_spectrum.lab_frequency(j, fin.branch))),
    );
    let th = profile.hawking_temperature(&horizon, THERMALITY_SOUND);
    let t_h = th.value();
    let bose_factor = bose(omega0, t_h);
    let n_plus_pred_single = n_final.abs() * bose_factor;
    let epsilon_single = (n_plus - n_plus_pred_single).abs() / n_plus_pred_single;
    let n_plus_pred: f64 = (0..n)
        .filter(|&j| fnorm[j] != 0.0)
        .map(|j| fnorm[j].abs() * bose(final_spectrum.lab_frequency(j, fin.branch), t_h))
        .sum();
    let epsilon = (n_plus - n_plus_pred).abs() / n_plus_pred;
    let bins = thermal_bins(&final_spectrum, &initial_spectrum, fin.branch, t_h);

    let incoming_plus = dominant_cluster(&initial_spectrum, FrequencySign::Plus, INCOMING_FLOOR);
    let incoming_minus = dominant_cluster(&initial_spectrum, FrequencySign::Minus, INCOMING_FLOOR);
    let opposite_k_signs = match (&incoming_plus, &incoming_minus) {
        (Some(p), Some(m)) => p.central_k * m.central_k < 0.0,
        _ => false,
    };

    let roots = frequency_roots(omega0, disp.ring());
    let k_final = weighted_mean((0..n).map(|j| (fnorm[j].abs(), final_spectrum.k(j).abs())));
    let high: Vec<&FrequencyRoot> = roots.iter().filter(|r| r.k.abs() > 3.0 * k_final).collect();
    let upstream_inside = high
        .iter()
        .any(|r| r.branch == crate::modes::Branch::LeftMoving && r.in_bz);
    let outside_bz = !high.is_empty() && !upstream_inside;
    let regime = if outside_bz {
        Regime::Bloch
    } else {
        Regime::Normal
    };
    let root_matches = [&incoming_plus, &incoming_minus]
        .into_iter()
        .flatten()
        .map(|c| match_root(c, &initial_spectrum, &roots, TWO_PI * fin.width_modes))
        .collect();

    Ok(ThermalityReport {
        s,
        n_ions: n,
        interaction: config.interaction,
        kappa: config.kappa,
        pulse_center: fin.center,
        pulse_branch: fin.branch,
        pulse_probe_velocity: fin.probe_velocity,
        back_time,
        leakage: leak,
        zero_mode,
        residual,
        final_spectrum,
        initial_spectrum,
        n_plus,
        n_minus,
        n_final,
        bookkeeping_defect,
        omega0,
        hawking_temperature: t_h,
        hawking_profile_form: th.profile_form,
        bose_factor,
        n_plus_pred,
        epsilon,
        n_plus_pred_single,
        epsilon_single,
        bins,
        incoming_plus,
        incoming_minus,
        opposite_k_signs,
        regime,
        outside_bz,
        roots,
        root_matches,
    })
}

/// Removes the uniform translation from a field; returns the removed
/// amplitude relative to the largest mode amplitude.
fn strip_zero_mode(field: &ComplexField) -> (ComplexField, f64) {
    let mut modes = to_modes(field);
    let scale = modes
        .theta
        .iter()
        .chain(&modes.theta_dot)
        .skip(1)
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let zero = modes.theta[0].norm().max(modes.theta_dot[0].norm());
    modes.theta[0] = Default::default();
    modes.theta_dot[0] = Default::default();
    let rel = if scale > 0.0 { zero / scale } else { 0.0 };
    (from_modes(&modes), rel)
}

fn monitor(
    integ: &Integrator<'_>,
    block: &mut PhaseBlock,
    profile: &Profile,
    disp: &DispersionTable,
    fin: &FinalPulse,
) -> Result<(ComplexField, f64, f64, f64)> {
    let steps = (BACKWARD_BUDGET / MONITOR_STEP).round() as usize;
    let mut last_leak = 1.0;
    for k in 1..=steps {
        let t = -(k as f64) * MONITOR_STEP;
        integ.evolve_block(block, t)?;
        let field = ComplexField::from_block(block);
        let spec = analyse(&strip_zero_mode(&field).0, disp)?;
        let (ok, leak, residual) = scattered(&field, profile, &spec, fin);
        last_leak = leak;
        if ok {
            return Ok((field, t, leak, residual));
        }
    }
    Err(Error::Inconclusive(format!(
        "pulse clusters not separated from the horizon within {BACKWARD_BUDGET} T (leakage {last_leak:e})"
    )))
}

/// Lab-frequency bins of width `T_H/2` over the final pulse's support;
/// the incoming positive-norm content is collected by `|Ω|`.
fn thermal_bins(
    fin: &NormSpectrum,
    init: &NormSpectrum,
    branch: FrequencySign,
    t_h: f64,
) -> Vec<ThermalBin> {
    let n = fin.n_ions;
    let fnorm = branch_norms(fin, branch);
    let peak = fnorm.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let nodes: Vec<(f64, f64)> = (0..n)
        .filter(|&j| fnorm[j].abs() > 1e-6 * peak)
        .map(|j| (fin.lab_frequency(j, branch).abs(), fnorm[j].abs()))
        .collect();
    let measured: Vec<(f64, f64)> = (0..n)
        .filter(|&j| init.plus[j] > 0.0)
        .map(|j| {
            (
                init.lab_frequency(j, FrequencySign::Plus).abs(),
                init.plus[j],
            )
        })
        .collect();
    let lo = nodes.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
    let hi = nodes.iter().map(|x| x.0).fold(0.0, f64::max);
    if !(hi > lo) {
        return Vec::new();
    }
    let width = 0.5 * t_h;
    let count = ((hi - lo) / width).floor() as usize + 1;
    (0..count)
        .map(|b| {
            let (a, z) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
            let inside = |w: f64| w >= a && w < z;
            let here = || nodes.iter().filter(|(w, _)| inside(*w));
            let final_norm: f64 = here().map(|x| x.1).sum();
            let predicted: f64 = here().map(|&(w, x)| x * bose(w, t_h)).sum();
            let measured: f64 = measured
                .iter()
                .filter(|(w, _)| inside(*w))
                .map(|x| x.1)
                .sum();
            ThermalBin {
                omega_lo: a,
                omega_hi: z,
                omega: weighted_mean(here().map(|&(w, x)| (x, w))),
                final_norm,
                measured,
                predicted,
                deviation: (measured - predicted) / predicted,
            }
        })
        .collect()
}

fn match_root(
    c: &Cluster,
    spec: &NormSpectrum,
    roots: &[FrequencyRoot],
    pulse_width: f64,
) -> RootMatch {
    let n = spec.n_ions as f64;
    let norms = branch_norms(spec, c.branch);
    let (mut sw, mut sv) = (0.0, 0.0);
    for &j in &c.slots {
        let d = wrap_zone(spec.k(j) - c.central_k, n);
        sw += norms[j].abs();
        sv += norms[j].abs() * d * d;
    }
    let k_width = if sw > 0.0 { (sv / sw).sqrt() } else { 0.0 };
    let root = roots
        .iter()
        .min_by(|a, b| {
            wrap_zone(a.k_folded - c.central_k, n)
                .abs()
                .total_cmp(&wrap_zone(b.k_folded - c.central_k, n).abs())
        })
        .copied();
    let offset_in_widths = root
        .map(|r| wrap_zone(r.k_folded - c.central_k, n).abs() / pulse_width)
        .unwrap_or(f64::INFINITY);
    RootMatch {
        branch: c.branch,
        central_k: c.central_k,
        k_width,
        root,
        offset_in_widths,
    }
}

/// `k` reduced to `(−πN, πN]`.
fn wrap_zone(k: f64, n: f64) -> f64 {
    let z = TWO_PI * n;
    k - z * (k / z).round()
}

// ---------------------------------------------------------------------------
// quench correlations

/// Which covariance block a correlation map is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    /// `⟨p_i p_j⟩` in linear-momentum units over `ħ`.
    #[default]
    Momentum,
    /// `⟨δθ_i δθ_j⟩` scaled so that the vacuum diagonal is comparable; for
    /// comparison only.
    Displacement,
}

/// A predicted correlation ridge: the locus `θ_b − θ_H = slope·(θ_a − θ_H)`
/// of phonon pairs emitted together at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedRidge {
    pub theta_h: f64,
    /// Lab angular velocity of the upstream Hawking phonon, `v_sub − c_sub`.
    pub velocity_out: f64,
    /// Lab angular velocity of the partner, `v_sup − c_sup`.
    pub velocity_partner: f64,
    pub slope: f64,
}

/// Least-squares ridge through the row maxima of `|C|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredRidge {
    pub slope: f64,
    pub intercept: f64,
    pub rows: usize,
    /// `|slope − predicted| / |predicted|`.
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationMap {
    pub t: f64,
    pub kind: CorrelationKind,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    /// Lab angle of each ion at `t`.
    pub theta: Vec<f64>,
    pub horizon_theta: Vec<f64>,
    pub ridge: Option<PredictedRidge>,
    pub measured: Option<MeasuredRidge>,
    /// Largest `|C_ij|` between subsonic-plateau and supersonic-plateau ions
    /// outside the diagonal mask.
    pub cross_peak: f64,
    /// Mean `|C|` on the predicted ridge over the subsonic rows.
    pub ridge_band_mean: f64,
    /// Median cross-block `|C|` outside the diagonal mask.
    pub cross_median: f64,
}

/// Half-width of the diagonal mask, in ions.
pub fn diagonal_mask(n_ions: usize) -> usize {
    ((0.02 * n_ions as f64).round() as usize).max(1)
}

/// Initial conditions and outputs of a covariance run.
#[derive(Debug, Clone)]
pub struct QuenchRun {
    pub lattice: Lattice,
    pub profile_after: Profile,
    pub hawking_temperature: f64,
    pub n_sub: usize,
}

impl QuenchRun {
    pub fn new(config: &RingConfig, opts: RunOptions) -> Result<Self> {
        config.validate()?;
        let ramp = config
            .ramp
            .ok_or_else(|| Error::Schedule("quench runs need a ramp schedule".into()))?;
        let lattice = Lattice::new(config)?.with_external_hessian(opts.external_hessian);
        let mut after = config.clone();
        after.ramp = None;
        after.v_min_frac = ramp.target_v_min_frac;
        let profile_after = Profile::new(&after)?;
        let horizon = profile_after
            .black_hole_horizon(THERMALITY_SOUND)
            .ok_or_else(|| {
                Error::NoHorizon("the quench target profile has no black-hole horizon".into())
            })?;
        let hawking_temperature = profile_after
            .hawking_temperature(&horizon, THERMALITY_SOUND)
            .value();
        let n_sub = config.n_sub.unwrap_or_else(|| lattice.default_n_sub());
        Ok(QuenchRun {
            lattice,
            profile_after,
            hawking_temperature,
            n_sub,
        })
    }

    /// Initial thermal state at `temperature` (`k_B T·T/ħ`), stationary
    /// under the integrator.
    pub fn initial_state(&self, temperature: f64, hbar_tilde: f64) -> Result<GaussianState> {
        let h = 1.0 / (self.lattice.n_ions * self.n_sub) as f64;
        thermal_state(&self.lattice, 0.0, temperature, hbar_tilde, h)
    }

    /// Covariances at each of `times` (ascending, ≥ 0), evolved through the ramp.
    pub fn evolve(&self, state: &GaussianState, times: &[f64]) -> Result<Vec<GaussianState>> {
        let source = DirectSource {
            lattice: &self.lattice,
        };
        let integ = Integrator::new(&source, self.n_sub);
        let n = self.lattice.n_ions;
        let mut phi = PhaseBlock::identity(n, state.t);
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            if t < phi.t {
                return Err(Error::Schedule(format!(
                    "output times must ascend; {t} < {}",
                    phi.t
                )));
            }
            if let Err(e) = integ.evolve_block(&mut phi, t) {
                log::error!("covariance evolution stopped at t = {}: {e}", phi.t);
                if out.is_empty() {
                    return Err(e);
                }
                break;
            }
            let tm = crate::dynamics::TransferMatrix {
                t0: state.t,
                t1: t,
                m: phi.stacked(),
            };
            out.push(state.transformed(&tm));
        }
        Ok(out)
    }

    /// Lab angles of the ions at `t`.
    pub fn angles(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.lattice.frame(t)?.theta)
    }

    pub fn predicted_ridge(&self) -> Option<PredictedRidge> {
        let p = &self.profile_after;
        let h = p.black_hole_horizon(THERMALITY_SOUND)?;
        let c = |v: f64| p.sound_speed_for_velocity(v, THERMALITY_SOUND);
        let out = p.v_min() - c(p.v_min());
        let partner = p.v_max() - c(p.v_max());
        Some(PredictedRidge {
            theta_h: h.theta,
            velocity_out: out,
            velocity_partner: partner,
            slope: partner / out,
        })
    }

    /// Correlation map of `state` with the ridge analysis.
    pub fn correlation_map(
        &self,
        state: &GaussianState,
        kind: CorrelationKind,
    ) -> Result<CorrelationMap> {
        let n = state.n();
        let matrix = correlation_matrix(state, kind);
        let theta = self.angles(state.t)?;
        let ridge = self.predicted_ridge();
        let horizon_theta = self
            .profile_after
            .find_horizons(THERMALITY_SOUND)
            .iter()
            .map(|h| h.theta)
            .collect();
        let (sub, sup) = self.plateau_ions(state.t);
        let mask = diagonal_mask(n);
        let cross_peak = cross_block_peak(&matrix, &sub, &sup, mask);
        let measured = ridge.and_then(|r| measure_ridge(&matrix, &theta, &sub, &sup, mask, &r));
        let ridge_band_mean =
            ridge.map_or(0.0, |r| ridge_band_mean(&matrix, &theta, &sub, &sup, &r));
        let cross_median = cross_block_median(&matrix, &sub, &sup, mask);
        Ok(CorrelationMap {
            t: state.t,
            kind,
            matrix,
            theta,
            horizon_theta,
            ridge,
            measured,
            cross_peak,
            ridge_band_mean,
            cross_median,
        })
    }

    /// Ions on the subsonic and supersonic plateaus of the target profile at `t`.
    pub fn plateau_ions(&self, t: f64) -> (Vec<usize>, Vec<usize>) {
        let n = self.lattice.n_ions;
        let (slo, shi) = self.profile_after.subsonic_interval();
        let (plo, phi) = self.profile_after.supersonic_interval();
        let x = |i: usize| i as f64 / n as f64 + t;
        let sub = (0..n).filter(|&i| label_in(x(i), slo, shi)).collect();
        let sup = (0..n).filter(|&i| label_in(x(i), plo, phi)).collect();
        (sub, sup)
    }

    /// Ion windows of `width` ions on either side of the black-hole horizon
    /// at `t`: `(outside, inside)`.
    pub fn horizon_regions(&self, t: f64, width: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let n = self.lattice.n_ions;
        let h = self
            .profile_after
            .black_hole_horizon(THERMALITY_SOUND)
            .ok_or_else(|| Error::NoHorizon("no black-hole horizon".into()))?;
        if width == 0 || 2 * width > n {
            return Err(Error::Domain(format!(
                "region width {width} invalid for {n} ions"
            )));
        }
        // first ion at or past the horizon label
        let first = ((h.label - t) * n as f64).ceil().rem_euclid(n as f64) as usize;
        let outside = (1..=width).rev().map(|k| (first + n - k) % n).collect();
        let inside = (0..width).map(|k| (first + k) % n).collect();
        Ok((outside, inside))
    }
}

/// `C_ij = (2π)²⟨p_i p_j⟩/ħ` (momentum) or `⟨δθ_i δθ_j⟩/(ħ/m_eff)·(2π)⁻²`
/// (displacement), from the symmetrised covariance.
pub fn correlation_matrix(state: &GaussianState, kind: CorrelationKind) -> DMatrix<f64> {
    let n = state.n();
    match kind {
        CorrelationKind::Momentum => {
            state.cov.view((n, n), (n, n)).into_owned() * (TWO_PI * TWO_PI / state.hbar)
        }
        CorrelationKind::Displacement => {
            state.cov.view((0, 0), (n, n)).into_owned() * (M_EFF / (state.hbar * TWO_PI * TWO_PI))
        }
    }
}

fn cross_block_peak(c: &DMatrix<f64>, a: &[usize], b: &[usize], mask: usize) -> f64 {
    let n = c.nrows();
    let mut peak: f64 = 0.0;
    for &i in a {
        for &j in b {
            if ring_distance(i, j, n) > mask {
                peak = peak.max(c[(i, j)].abs());
            }
        }
    }
    peak
}

fn cross_block_median(c: &DMatrix<f64>, a: &[usize], b: &[usize], mask: usize) -> f64 {
    let n = c.nrows();
    let mut vals: Vec<f64> = a
        .iter()
        .flat_map(|&i| b.iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| ring_distance(i, j, n) > mask)
        .map(|(i, j)| c[(i, j)].abs())
        .collect();
    if vals.is_empty() {
        return 0.0;
    }
    vals.sort_by(f64::total_cmp);
    vals[vals.len() / 2]
}

/// For each subsonic row, `|C|` at the supersonic ion closest to the
/// predicted partner angle; averaged over rows whose partner lands on the plateau.
fn ridge_band_mean(
    c: &DMatrix<f64>,
    theta: &[f64],
    sub: &[usize],
    sup: &[usize],
    predicted: &PredictedRidge,
) -> f64 {
    let rel = |th: f64| wrap_angle(th - predicted.theta_h);
    let (lo, hi) = sup
        .iter()
        .map(|&j| rel(theta[j]))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
            (a.min(x), b.max(x))
        });
    let hits: Vec<f64> = sub
        .iter()
        .filter_map(|&i| {
            let target = predicted.slope * rel(theta[i]);
            if !(target >= lo && target <= hi) {
                return None;
            }
            sup.iter()
                .min_by(|&&a, &&b| {
                    (rel(theta[a]) - target)
                        .abs()
                        .total_cmp(&(rel(theta[b]) - target).abs())
                })
                .map(|&j| c[(i, j)].abs())
        })
        .collect();
    if hits.is_empty() {
        0.0
    } else {
        hits.iter().sum::<f64>() / hits.len() as f64
    }
}

fn ring_distance(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(n - d)
}

/// Rows over the subsonic plateau whose cross-block maximum exceeds half the
/// global cross peak; a weighted line is fitted through the row maxima in
/// horizon-relative lab angles.
fn measure_ridge(
    c: &DMatrix<f64>,
    theta: &[f64],
    sub: &[usize],
    sup: &[usize],
    mask: usize,
    predicted: &PredictedRidge,
) -> Option<MeasuredRidge> {
    let n = c.nrows();
    let rel = |th: f64| wrap_angle(th - predicted.theta_h);
    let rows: Vec<(f64, f64, f64)> = sub
        .iter()
        .filter_map(|&i| {
            sup.iter()
                .filter(|&&j| ring_distance(i, j, n) > mask)
                .map(|&j| (j, c[(i, j)].abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(j, w)| (rel(theta[i]), rel(theta[j]), w))
        })
        .collect();
    let peak = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    let band: Vec<&(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.2 >= RIDGE_ROW_FLOOR * peak)
        .collect();
    if band.len() < 3 {
        return None;
    }
    let sw: f64 = band.iter().map(|r| r.2).sum();
    let mx = band.iter().map(|r| r.2 * r.0).sum::<f64>() / sw;
    let my = band.iter().map(|r| r.2 * r.1).sum::<f64>() / sw;
    let sxx: f64 = band.iter().map(|r| r.2 * (r.0 - mx).powi(2)).sum();
    let sxy: f64 = band.iter().map(|r| r.2 * (r.0 - mx) * (r.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(MeasuredRidge {
        slope,
        intercept: my - slope * mx,
        rows: band.len(),
        relative_error: (slope - predicted.slope).abs() / predicted.slope.abs(),
    })
}

/// Row-maximum floor, relative to the largest, for rows entering the ridge fit.
pub const RIDGE_ROW_FLOOR: f64 = 0.5;

/// Evolves `config`'s quench from a thermal state at `temperature` and
/// returns a correlation map at each of `times`.
pub fn run_quench_correlations(
    config: &RingConfig,
    times: &[f64],
    temperature: f64,
    kind: CorrelationKind,
    opts: RunOptions,
) -> Result<Vec<CorrelationMap>> {
    let run = QuenchRun::new(config, opts)?;
    let state = run.initial_state(temperature, config.hbar)?;
    let states = run.evolve(&state, times)?;
    states
        .iter()
        .map(|s| run.correlation_map(s, kind))
        .collect()
}

// ---------------------------------------------------------------------------
// logarithmic negativity

/// `E_N = Σ_j max(0, −log₂(2ν̃_j/ħ))` between ion windows `a` and `b`, with
/// `ν̃` the symplectic eigenvalues of the partial transpose (momentum sign
/// flip on `b`) of the reduced covariance.
pub fn log_negativity(state: &GaussianState, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("negativity regions must be non-empty".into()));
    }
    if a.iter().any(|i| b.contains(i)) {
        return Err(Error::Domain("negativity regions overlap".into()));
    }
    let n = state.n();
    let ions: Vec<usize> = a.iter().chain(b).copied().collect();
    if ions.iter().any(|&i| i >= n) {
        return Err(Error::Domain(format!("region index beyond {n} ions")));
    }
    let m = ions.len();
    let index = |r: usize| if r < m { ions[r] } else { n + ions[r - m] };
    let flip = |r: usize| if r >= m + a.len() { -1.0 } else { 1.0 };
    let reduced = DMatrix::from_fn(2 * m, 2 * m, |r, c| state.cov[(index(r), index(c))]);
    let nu = symplectic_eigenvalues(&reduced)?;
    if let Some(&low) = nu.first() {
        if low < 0.5 * state.hbar * (1.0 - 1e-6) {
            return Err(Error::InvalidState(format!(
                "reduced covariance violates the uncertainty relation: ν = {low:e}"
            )));
        }
    }
    let transposed = DMatrix::from_fn(2 * m, 2 * m, |r, c| flip(r) * flip(c) * reduced[(r, c)]);
    let nu = symplectic_eigenvalues(&transposed)?;
    Ok(nu
        .iter()
        .map(|&v| (-(2.0 * v / state.hbar).log2()).max(0.0))
        .sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct NegativityTrace {
    pub times: Vec<f64>,
    /// Initial temperature, `k_B T·T/ħ`.
    pub temperature: f64,
    /// Initial temperature in units of `T_H`.
    pub temperature_over_th: f64,
    pub hawking_temperature: f64,
    pub region_width: usize,
    pub outside: Vec<Vec<usize>>,
    pub inside: Vec<Vec<usize>>,
    pub negativity: Vec<f64>,
}

impl NegativityTrace {
    /// Non-decreasing within `tol` and strictly larger at the end.
    pub fn is_increasing(&self, tol: f64) -> bool {
        let v = &self.negativity;
        v.len() >= 2 && v.windows(2).all(|w| w[1] >= w[0] - tol) && v[v.len() - 1] > v[0]
    }
}

/// Post-quench sampling `[τ, 3τ]` at multiples of the ion period `T/N`.
///
/// Off-grid samples alias against the lattice passing the fixed regions.
pub fn default_negativity_times(config: &RingConfig) -> Vec<f64> {
    let tau = config.ramp.map_or(0.05, |r| r.tau);
    let n = config.n_ions as f64;
    let first = (tau * n).ceil() as usize;
    let last = (3.0 * tau * n).floor() as usize;
    (first..=last).map(|k| k as f64 / n).collect()
}

/// Negativity between the horizon-adjacent windows at each of `times`,
/// starting from a thermal state at `temperature_over_th·T_H`.
pub fn run_negativity_trace(
    config: &RingConfig,
    temperature_over_th: f64,
    region_width: Option<usize>,
    times: &[f64],
    opts: RunOptions,
) -> Result<NegativityTrace> {
    let run = QuenchRun::new(config, opts)?;
    let width = region_width.unwrap_or_else(|| {
        ((config.regions_width_frac * config.n_ions as f64).round() as usize).max(1)
    });
    let temperature = temperature_over_th * run.hawking_temperature;
    let state = run.initial_state(temperature, config.hbar)?;
    let states = run.evolve(&state, times)?;
    let mut trace = NegativityTrace {
        times: Vec::with_capacity(states.len()),
        temperature,
        temperature_over_th,
        hawking_temperature: run.hawking_temperature,
        region_width: width,
        outside: Vec::new(),
        inside: Vec::new(),
        negativity: Vec::new(),
    };
    for s in &states {
        let (a, b) = run.horizon_regions(s.t, width)?;
        trace.negativity.push(log_negativity(s, &a, &b)?);
        trace.times.push(s.t);
        trace.outside.push(a);
        trace.inside.push(b);
    }
    Ok(trace)
}
