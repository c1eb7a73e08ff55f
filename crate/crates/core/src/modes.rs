//! Label-space Fourier analysis and Klein-Gordon norm bookkeeping.
//!
//! Modes are indexed by `n ∈ (−N/2, N/2]` with label wave number `k = 2πn`,
//! stored in FFT order. The transform is unitary:
//! `δθ_k = N^{-1/2} Σ_i δθ_i e^{−ik i/N}`.
//!
//! A mode on the `+` branch evolves as `e^{−iωt}` in the co-moving frame.
//! Its lab frequency is `Ω = k + ω` (label units with `T = 1`); on the `−`
//! branch `Ω = k − ω`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::config::{Interaction, PulseSettings, DEFAULT_PULSE_WIDTH_MODES};
use crate::dynamics::{Integrator, PhaseBlock, PhaseVector};
use crate::error::{Error, Result};
use crate::lattice::{ReferenceRing, M_EFF};
use crate::profile::{Profile, SoundModel};

const TWO_PI: f64 = 2.0 * PI;

/// Mode index of FFT slot `j`.
pub fn mode_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// FFT slot of mode `m`.
pub fn fft_slot(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

/// FFT slots ordered by ascending mode index.
pub fn ascending_slots(n: usize) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..n).collect();
    slots.sort_by_key(|&j| mode_index(j, n));
    slots
}

/// Frequencies and group velocities of a homogeneous reference ring.
#[derive(Debug, Clone, Serialize)]
pub struct DispersionTable {
    pub interaction: Interaction,
    pub n_ions: usize,
    /// `v·T/2π` of the reference flat region.
    pub v_frac: f64,
    /// FFT order.
    pub omega: Vec<f64>,
    /// `dω/dk`, FFT order.
    pub vgroup: Vec<f64>,
    #[serde(skip)]
    ring: ReferenceRing,
}

impl DispersionTable {
    pub fn new(ring: ReferenceRing) -> Self {
        let n = ring.n_ions;
        let k = |j| TWO_PI * mode_index(j, n) as f64;
        let omega = (0..n)
            .map(|j| if j == 0 { 0.0 } else { ring.omega(k(j)) })
            .collect();
        let vgroup = (0..n).map(|j| ring.group_velocity(k(j))).collect();
        DispersionTable {
            interaction: ring.interaction,
            n_ions: n,
            v_frac: ring.v_frac,
            omega,
            vgroup,
            ring,
        }
    }

    pub fn dispersion(n_ions: usize, kappa: f64, v_frac: f64, interaction: Interaction) -> Self {
        Self::new(ReferenceRing::new(n_ions, kappa, v_frac, interaction))
    }

    pub fn ring(&self) -> &ReferenceRing {
        &self.ring
    }

    pub fn k(&self, j: usize) -> f64 {
        TWO_PI * mode_index(j, self.n_ions) as f64
    }

    /// Rows `(n, k, ω, dω/dk)` in ascending `n`.
    pub fn rows(&self) -> Vec<(i64, f64, f64, f64)> {
        ascending_slots(self.n_ions)
            .into_iter()
            .map(|j| {
                (
                    mode_index(j, self.n_ions),
                    self.k(j),
                    self.omega[j],
                    self.vgroup[j],
                )
            })
            .collect()
    }
}

/// Complex displacement and velocity fields over ion labels at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub t: f64,
    pub theta: Vec<Complex64>,
    pub theta_dot: Vec<Complex64>,
}

impl ComplexField {
    pub fn from_real(v: &PhaseVector) -> Self {
        ComplexField {
            t: v.t,
            theta: v.q.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            theta_dot: v
                .p
                .iter()
                .map(|&x| Complex64::new(x / M_EFF, 0.0))
                .collect(),
        }
    }

    /// Two-column block: real part in column 0, imaginary part in column 1.
    pub fn to_block(&self) -> PhaseBlock {
        let n = self.theta.len();
        PhaseBlock {
            t: self.t,
            q: DMatrix::from_fn(n, 2, |i, c| {
                if c == 0 {
                    self.theta[i].re
                } else {
                    self.theta[i].im
                }
            }),
            p: DMatrix::from_fn(n, 2, |i, c| {
                M_EFF
                    * if c == 0 {
                        self.theta_dot[i].re
                    } else {
                        self.theta_dot[i].im
                    }
            }),
        }
    }

    pub fn from_block(b: &PhaseBlock) -> Self {
        let n = b.q.nrows();
        ComplexField {
            t: b.t,
            theta: (0..n)
                .map(|i| Complex64::new(b.q[(i, 0)], b.q[(i, 1)]))
                .collect(),
            theta_dot: (0..n)
                .map(|i| Complex64::new(b.p[(i, 0)], b.p[(i, 1)]) / M_EFF)
                .collect(),
        }
    }

    /// Fraction of `Σ|δθ_i|²` whose lab label `i/N + t` lies outside `[lo, hi]` (mod 1).
    pub fn fraction_outside(&self, lo: f64, hi: f64) -> f64 {
        let n = self.theta.len() as f64;
        let total: f64 = self.theta.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let outside: f64 = self
            .theta
            .iter()
            .enumerate()
            .filter(|(i, _)| !label_in(*i as f64 / n + self.t, lo, hi))
            .map(|(_, z)| z.norm_sqr())
            .sum();
        outside / total
    }

    /// Circular mean of the lab label weighted by `|δθ_i|²`, in `[0, 1)`.
    pub fn centroid(&self) -> f64 {
        let n = self.theta.len() as f64;
        let z: Complex64 = self
            .theta
            .iter()
            .enumerate()
            .map(|(i, a)| {
                a.norm_sqr() * Complex64::from_polar(1.0, TWO_PI * (i as f64 / n + self.t))
            })
            .sum();
        (z.arg() / TWO_PI).rem_euclid(1.0)
    }

    /// Standard deviation in ions of the amplitude envelope `|δθ_i|`,
    /// taken as `√2` times that of `|δθ_i|²` about the circular centroid.
    pub fn envelope_width_ions(&self) -> f64 {
        let n = self.theta.len() as f64;
        let c = self.centroid() * n - self.t * n;
        let (mut tot, mut var) = (0.0, 0.0);
        for (i, z) in self.theta.iter().enumerate() {
            let d = (i as f64 - c + 0.5 * n).rem_euclid(n) - 0.5 * n;
            tot += z.norm_sqr();
            var += z.norm_sqr() * d * d;
        }
        (2.0 * var / tot).sqrt()
    }

    /// `−Σ_i Im(δθ_i* δθ̇_i)`: the field's total Klein-Gordon norm.
    pub fn kg_norm(&self) -> f64 {
        -self
            .theta
            .iter()
            .zip(&self.theta_dot)
            .map(|(a, b)| (a.conj() * b).im)
            .sum::<f64>()
    }
}

/// `x` inside the interval `[lo, hi]` taken modulo 1; `hi` may exceed 1.
pub fn label_in(x: f64, lo: f64, hi: f64) -> bool {
    let y = (x - lo).rem_euclid(1.0);
    y <= hi - lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeAmplitudes {
    pub t: f64,
    /// FFT order.
    pub theta: Vec<Complex64>,
    pub theta_dot: Vec<Complex64>,
}

fn fft(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    plan.process(data);
    let s = 1.0 / (n as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= s);
}

pub fn to_modes(field: &ComplexField) -> ModeAmplitudes {
    let mut a = field.theta.clone();
    let mut b = field.theta_dot.clone();
    fft(&mut a, false);
    fft(&mut b, false);
    ModeAmplitudes {
        t: field.t,
        theta: a,
        theta_dot: b,
    }
}

pub fn from_modes(modes: &ModeAmplitudes) -> ComplexField {
    let mut a = modes.theta.clone();
    let mut b = modes.theta_dot.clone();
    fft(&mut a, true);
    fft(&mut b, true);
    ComplexField {
        t: modes.t,
        theta: a,
        theta_dot: b,
    }
}

/// `2δθ^± = δθ ± iδθ̇/ω`, `2δθ̇^± = δθ̇ ∓ iωδθ`.
pub fn frequency_split(
    modes: &ModeAmplitudes,
    disp: &DispersionTable,
) -> Result<(ModeAmplitudes, ModeAmplitudes)> {
    let scale = modes
        .theta
        .iter()
        .chain(&modes.theta_dot)
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let zero = modes.theta[0].norm().max(modes.theta_dot[0].norm());
    if zero > 1e-12 * scale {
        return Err(Error::ZeroMode { amplitude: zero });
    }
    let i = Complex64::i();
    let n = modes.theta.len();
    let mut plus = ModeAmplitudes {
        t: modes.t,
        theta: vec![Complex64::default(); n],
        theta_dot: vec![Complex64::default(); n],
    };
    let mut minus = plus.clone();
    for j in 1..n {
        let w = disp.omega[j];
        let (a, b) = (modes.theta[j], modes.theta_dot[j]);
        plus.theta[j] = 0.5 * (a + i * b / w);
        plus.theta_dot[j] = 0.5 * (b - i * w * a);
        minus.theta[j] = 0.5 * (a - i * b / w);
        minus.theta_dot[j] = 0.5 * (b + i * w * a);
    }
    Ok((plus, minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencySign {
    Plus,
    Minus,
}

impl FrequencySign {
    fn sign(self) -> f64 {
        match self {
            FrequencySign::Plus => 1.0,
            FrequencySign::Minus => -1.0,
        }
    }
}

/// Contiguous group of modes on one frequency branch.
#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    pub branch: FrequencySign,
    /// First and last mode index in ascending (circular) order.
    pub n_first: i64,
    pub n_last: i64,
    pub n_modes: usize,
    pub norm: f64,
    /// `|N|`-weighted mean wave number, in `(−πN, πN]`.
    pub central_k: f64,
    /// `|N|`-weighted mean lab frequency.
    pub lab_frequency: f64,
    /// `dΩ/dk` at the central mode, label units per `T`.
    pub lab_group_velocity: f64,
    pub peak_amplitude: f64,
    #[serde(skip)]
    pub slots: Vec<usize>,
}

impl Cluster {
    pub fn moves_left(&self) -> bool {
        self.lab_group_velocity < 0.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormSpectrum {
    pub t: f64,
    pub n_ions: usize,
    /// `N_k^+ ≥ 0` per FFT slot.
    pub plus: Vec<f64>,
    /// `N_k^- ≤ 0` per FFT slot.
    pub minus: Vec<f64>,
    #[serde(skip)]
    pub plus_modes: ModeAmplitudes,
    #[serde(skip)]
    pub minus_modes: ModeAmplitudes,
    #[serde(skip)]
    pub omega: Vec<f64>,
    #[serde(skip)]
    pub vgroup: Vec<f64>,
    pub total_plus: f64,
    pub total_minus: f64,
    pub clusters: Vec<Cluster>,
}

pub const CLUSTER_FLOOR: f64 = 1e-8;
pub const CLUSTER_MERGE_GAP: usize = 3;

impl NormSpectrum {
    pub fn total(&self) -> f64 {
        self.total_plus + self.total_minus
    }

    pub fn k(&self, j: usize) -> f64 {
        TWO_PI * mode_index(j, self.n_ions) as f64
    }

    pub fn lab_frequency(&self, j: usize, branch: FrequencySign) -> f64 {
        self.k(j) + branch.sign() * self.omega[j]
    }

    /// Norm of an explicit set of slots on one branch.
    pub fn norm_of(&self, slots: &[usize], branch: FrequencySign) -> f64 {
        let v = match branch {
            FrequencySign::Plus => &self.plus,
            FrequencySign::Minus => &self.minus,
        };
        slots.iter().map(|&j| v[j]).sum()
    }

    pub fn clusters_on(&self, branch: FrequencySign) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(move |c| c.branch == branch)
    }
}

fn kg(theta: Complex64, theta_dot: Complex64) -> f64 {
    // (δθ̇*δθ − δθ*δθ̇)/(2i)
    ((theta_dot.conj() * theta - theta.conj() * theta_dot) / Complex64::new(0.0, 2.0)).re
}

pub fn kg_norms(
    plus: &ModeAmplitudes,
    minus: &ModeAmplitudes,
    disp: &DispersionTable,
) -> NormSpectrum {
    let n = plus.theta.len();
    let np: Vec<f64> = (0..n)
        .map(|j| kg(plus.theta[j], plus.theta_dot[j]))
        .collect();
    let nm: Vec<f64> = (0..n)
        .map(|j| kg(minus.theta[j], minus.theta_dot[j]))
        .collect();
    let mut spec = NormSpectrum {
        t: plus.t,
        n_ions: n,
        total_plus: np.iter().sum(),
        total_minus: nm.iter().sum(),
        plus: np,
        minus: nm,
        plus_modes: plus.clone(),
        minus_modes: minus.clone(),
        omega: disp.omega.clone(),
        vgroup: disp.vgroup.clone(),
        clusters: Vec::new(),
    };
    spec.clusters = segment(&spec);
    spec
}

fn segment(spec: &NormSpectrum) -> Vec<Cluster> {
    let n = spec.n_ions;
    let order = ascending_slots(n);
    let amp = |m: &ModeAmplitudes, j: usize| m.theta[j].norm();
    let peak = (0..n)
        .map(|j| amp(&spec.plus_modes, j).max(amp(&spec.minus_modes, j)))
        .fold(0.0, f64::max);
    if peak == 0.0 {
        return Vec::new();
    }
    let floor = CLUSTER_FLOOR * peak;
    let mut out = Vec::new();
    for branch in [FrequencySign::Plus, FrequencySign::Minus] {
        let modes = match branch {
            FrequencySign::Plus => &spec.plus_modes,
            FrequencySign::Minus => &spec.minus_modes,
        };
        let above: Vec<bool> = order.iter().map(|&j| amp(modes, j) > floor).collect();
        for run in circular_runs(&above, CLUSTER_MERGE_GAP) {
            let slots: Vec<usize> = run.iter().map(|&p| order[p]).collect();
            out.push(summarise(spec, branch, slots));
        }
    }
    out
}

/// Runs of `true` in circular order, bridging gaps shorter than `gap`.
/// Returns positions of the `true` entries in each run.
fn circular_runs(above: &[bool], gap: usize) -> Vec<Vec<usize>> {
    let n = above.len();
    let hits: Vec<usize> = (0..n).filter(|&p| above[p]).collect();
    if hits.is_empty() {
        return Vec::new();
    }
    let mut runs: Vec<Vec<usize>> = vec![vec![hits[0]]];
    for w in hits.windows(2) {
        if w[1] - w[0] - 1 < gap {
            runs.last_mut().unwrap().push(w[1]);
        } else {
            runs.push(vec![w[1]]);
        }
    }
    if runs.len() > 1 {
        let first = hits[0];
        let last = *hits.last().unwrap();
        if first + (n - 1 - last) < gap {
            let head = runs.remove(0);
            runs.last_mut().unwrap().extend(head);
        }
    }
    runs
}

fn summarise(spec: &NormSpectrum, branch: FrequencySign, slots: Vec<usize>) -> Cluster {
    let n = spec.n_ions;
    let norms = match branch {
        FrequencySign::Plus => &spec.plus,
        FrequencySign::Minus => &spec.minus,
    };
    let modes = match branch {
        FrequencySign::Plus => &spec.plus_modes,
        FrequencySign::Minus => &spec.minus_modes,
    };
    let weight: f64 = slots.iter().map(|&j| norms[j].abs()).sum();
    // circular mean of k keeps clusters straddling the zone edge intact
    let phase: Complex64 = slots
        .iter()
        .map(|&j| norms[j].abs() * Complex64::from_polar(1.0, spec.k(j) / n as f64))
        .sum();
    let central_k = phase.arg() * n as f64;
    let lab_frequency = if weight > 0.0 {
        slots
            .iter()
            .map(|&j| norms[j].abs() * spec.lab_frequency(j, branch))
            .sum::<f64>()
            / weight
    } else {
        0.0
    };
    let central = fft_slot((central_k / TWO_PI).round() as i64, n);
    let lab_group_velocity = 1.0 + branch.sign() * spec.vgroup[central];
    let peak_amplitude = slots
        .iter()
        .map(|&j| modes.theta[j].norm())
        .fold(0.0, f64::max);
    Cluster {
        branch,
        n_first: mode_index(slots[0], n),
        n_last: mode_index(*slots.last().unwrap(), n),
        n_modes: slots.len(),
        norm: norms_sum(norms, &slots),
        central_k,
        lab_frequency,
        lab_group_velocity,
        peak_amplitude,
        slots,
    }
}

/// The contiguous run around the mode of `branch` with the largest `|N_k|`,
/// extended while `|N_k|` stays above `rel_floor` times that peak.
pub fn dominant_cluster(
    spec: &NormSpectrum,
    branch: FrequencySign,
    rel_floor: f64,
) -> Option<Cluster> {
    let n = spec.n_ions;
    let norms = match branch {
        FrequencySign::Plus => &spec.plus,
        FrequencySign::Minus => &spec.minus,
    };
    let order = ascending_slots(n);
    let amp: Vec<f64> = order.iter().map(|&j| norms[j].abs()).collect();
    let (top, &peak) = amp.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if peak == 0.0 {
        return None;
    }
    let floor = rel_floor * peak;
    let mut run = std::collections::VecDeque::from([top]);
    let (mut lo, mut hi) = (top, top);
    for _ in 1..n {
        let next = (hi + 1) % n;
        if next == lo || amp[next] <= floor {
            break;
        }
        hi = next;
        run.push_back(hi);
    }
    for _ in 1..n {
        let prev = (lo + n - 1) % n;
        if prev == hi || amp[prev] <= floor {
            break;
        }
        lo = prev;
        run.push_front(lo);
    }
    let slots = run.into_iter().map(|p| order[p]).collect();
    Some(summarise(spec, branch, slots))
}

fn norms_sum(v: &[f64], slots: &[usize]) -> f64 {
    slots.iter().map(|&j| v[j]).sum()
}

/// Full analysis of a field against a dispersion table.
pub fn analyse(field: &ComplexField, disp: &DispersionTable) -> Result<NormSpectrum> {
    let modes = to_modes(field);
    let (p, m) = frequency_split(&modes, disp)?;
    Ok(kg_norms(&p, &m, disp))
}

/// Real-space amplitude width (standard deviation, ions) of the Gaussian
/// envelope for a mode width `w`.
pub fn envelope_width_ions(n_ions: usize, width_modes: f64) -> f64 {
    n_ions as f64 / (width_modes * PI * 2f64.sqrt())
}

/// The normalised final pulse together with its construction data.
#[derive(Debug, Clone)]
pub struct FinalPulse {
    pub field: ComplexField,
    pub branch: FrequencySign,
    pub center: f64,
    pub width_modes: f64,
    /// Label drift over the direction probe, per `T`.
    pub probe_velocity: f64,
}

/// Gaussian pulse `a_n = k_n·exp(−((n − s)/w)²)·e^{−ik_n·x_c}` on `n ≥ 1`,
/// a single frequency branch, normalised to total norm `∓1`.
///
/// The branch is the one whose forward evolution carries the pulse away from
/// the black-hole horizon; `integ` runs that short probe.
pub fn build_final_pulse(
    settings: &PulseSettings,
    center: f64,
    profile: &Profile,
    model: SoundModel,
    disp: &DispersionTable,
    integ: &Integrator<'_>,
) -> Result<FinalPulse> {
    let n = disp.n_ions;
    let w = settings.width_override.unwrap_or(DEFAULT_PULSE_WIDTH_MODES);
    let (lo, hi) = profile.subsonic_interval();
    let probe = synthesise(settings.s as f64, w, center, FrequencySign::Minus, disp);
    let clearance = 3.0 * probe.envelope_width_ions() / n as f64;
    if !label_in(center, lo + clearance, hi - clearance) {
        return Err(Error::Placement(format!(
            "centre {center} needs {clearance:.4} of clearance inside the subsonic region [{lo}, {hi}]"
        )));
    }
    let horizon = profile
        .black_hole_horizon(model)
        .ok_or_else(|| Error::NoHorizon("final pulse needs a black-hole horizon".into()))?;

    let try_branch = |branch: FrequencySign| -> Result<FinalPulse> {
        let field = synthesise(settings.s as f64, w, center, branch, disp);
        let probe_t = 0.02;
        let mut b = field.to_block();
        integ.evolve_block(&mut b, probe_t)?;
        let moved = ComplexField::from_block(&b);
        let du = wrap_half(moved.centroid() - field.centroid());
        let velocity = du / probe_t;
        Ok(FinalPulse {
            field,
            branch,
            center,
            width_modes: w,
            probe_velocity: velocity,
        })
    };
    // away from the horizon: the centroid separation from u_H grows
    let away = |p: &FinalPulse| {
        let side = wrap_half(center - horizon.label).signum();
        p.probe_velocity * side > 0.0
    };
    let first = try_branch(FrequencySign::Minus)?;
    if first.probe_velocity.abs() < 1e-6 {
        return Err(Error::Direction {
            velocity: first.probe_velocity,
        });
    }
    if away(&first) {
        return Ok(first);
    }
    let second = try_branch(FrequencySign::Plus)?;
    if second.probe_velocity.abs() >= 1e-6 && away(&second) {
        return Ok(second);
    }
    Err(Error::Direction {
        velocity: first.probe_velocity,
    })
}

fn wrap_half(x: f64) -> f64 {
    x - x.round()
}

/// Mode-space synthesis of the pulse at `t = 0`.
pub fn synthesise(
    s: f64,
    w: f64,
    center: f64,
    branch: FrequencySign,
    disp: &DispersionTable,
) -> ComplexField {
    let n = disp.n_ions;
    let mut theta = vec![Complex64::default(); n];
    let mut theta_dot = vec![Complex64::default(); n];
    let i = Complex64::i();
    for m in 1..=(n as i64 / 2) {
        let j = fft_slot(m, n);
        let k = TWO_PI * m as f64;
        let a = k * (-((m as f64 - s) / w).powi(2)).exp() * Complex64::from_polar(1.0, -k * center);
        theta[j] = a;
        // + branch: δθ̇ = −iωδθ; − branch: +iωδθ
        theta_dot[j] = -branch.sign() * i * disp.omega[j] * a;
    }
    let norm: f64 = (0..n).map(|j| kg(theta[j], theta_dot[j])).sum();
    let scale = 1.0 / norm.abs().sqrt();
    theta
        .iter_mut()
        .chain(theta_dot.iter_mut())
        .for_each(|z| *z *= scale);
    from_modes(&ModeAmplitudes {
        t: 0.0,
        theta,
        theta_dot,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `Ω = k − D_odd(k)`: upstream-moving in a subsonic region.
    LeftMoving,
    /// `Ω = k + D_odd(k)`.
    RightMoving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyRoot {
    pub k: f64,
    pub branch: Branch,
    /// `dΩ/dk`, label units per `T`.
    pub lab_group_velocity: f64,
    pub in_bz: bool,
    /// `k` folded into `(−πN, πN]`.
    pub k_folded: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Subsonic,
    Supersonic,
}

/// Roots of `Ω₀ = k ± D_odd(k)` over the extended zone `(−2πN, 2πN)` for
/// the flat `region` of `profile`.
pub fn solve_frequency_condition(
    omega0: f64,
    profile: &Profile,
    region: Region,
) -> Vec<FrequencyRoot> {
    let v = match region {
        Region::Subsonic => profile.v_min(),
        Region::Supersonic => profile.v_max(),
    };
    let ring = ReferenceRing::new(
        profile.n_ions,
        profile.kappa,
        v / TWO_PI,
        profile.interaction,
    );
    frequency_roots(omega0, &ring)
}

pub fn frequency_roots(omega0: f64, ring: &ReferenceRing) -> Vec<FrequencyRoot> {
    let n = ring.n_ions as f64;
    let kmax = TWO_PI * n;
    let d_odd = |k: f64| ring.omega(k) * k.signum();
    let samples = 64 * ring.n_ions;
    let mut roots = Vec::new();
    for (branch, sgn) in [(Branch::LeftMoving, -1.0), (Branch::RightMoving, 1.0)] {
        let f = |k: f64| k + sgn * d_odd(k) - omega0;
        let grid: Vec<f64> = (0..=samples)
            .map(|i| -kmax + 2.0 * kmax * i as f64 / samples as f64)
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&k| f(k)).collect();
        let mut push = |k: f64| {
            let dk = 1e-6 * kmax;
            let vg = (f(k + dk) - f(k - dk)) / (2.0 * dk);
            let folded = k - kmax * (k / kmax).round();
            roots.push(FrequencyRoot {
                k,
                branch,
                lab_group_velocity: vg,
                in_bz: k.abs() <= PI * n,
                k_folded: folded,
            });
        };
        for i in 0..samples {
            let (a, b) = (grid[i], grid[i + 1]);
            let (fa, fb) = (vals[i], vals[i + 1]);
            if fa == 0.0 && i > 0 {
                push(a);
            } else if fa * fb < 0.0 {
                let (mut lo, mut hi, mut flo) = (a, b, fa);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(mid);
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (fm < 0.0) == (flo < 0.0) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * kmax {
                        break;
                    }
                }
                push(0.5 * (lo + hi));
            }
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RingConfig;
    use crate::dynamics::StaticForceCache;
    use crate::lattice::Lattice;
    use proptest::prelude::*;

    fn random_field(n: usize, seed: u64) -> ComplexField {
        let mut x = seed;
        let mut next = || {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        ComplexField {
            t: 0.0,
            theta: (0..n).map(|_| Complex64::new(next(), next())).collect(),
            theta_dot: (0..n).map(|_| Complex64::new(next(), next())).collect(),
        }
    }

    fn baseline_disp(n: usize) -> DispersionTable {
        DispersionTable::dispersion(n, 1.2591, 5.0 / 6.0, Interaction::NearestNeighbor)
    }

    #[test]
    fn cosine_lands_on_two_modes() {
        let n = 64;
        let field = ComplexField {
            t: 0.0,
            theta: (0..n)
                .map(|i| Complex64::new((TWO_PI * 3.0 * i as f64 / n as f64).cos(), 0.0))
                .collect(),
            theta_dot: vec![Complex64::default(); n],
        };
        let m = to_modes(&field);
        for j in 0..n {
            let expect = if mode_index(j, n).abs() == 3 {
                (n as f64).sqrt() / 2.0
            } else {
                0.0
            };
            assert!((m.theta[j].norm() - expect).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn dft_round_trip_and_parseval(seed in any::<u64>(), n in 8usize..300) {
            let f = random_field(n, seed);
            let m = to_modes(&f);
            let back = from_modes(&m);
            for (a, b) in f.theta.iter().zip(&back.theta) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            let e1: f64 = f.theta.iter().map(|z| z.norm_sqr()).sum();
            let e2: f64 = m.theta.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((e1 - e2).abs() < 1e-12 * e1);
        }

        #[test]
        fn split_sums_back_and_norms_add(seed in any::<u64>()) {
            let n = 128;
            let disp = baseline_disp(n);
            let mut m = to_modes(&random_field(n, seed));
            m.theta[0] = Complex64::default();
            m.theta_dot[0] = Complex64::default();
            let (p, q) = frequency_split(&m, &disp).unwrap();
            for j in 0..n {
                let scale = 1.0 + m.theta[j].norm() + m.theta_dot[j].norm() / disp.omega[j].max(1.0);
                prop_assert!((p.theta[j] + q.theta[j] - m.theta[j]).norm() < 1e-14 * scale);
                let scale = 1.0 + m.theta_dot[j].norm() + disp.omega[j] * m.theta[j].norm();
                prop_assert!((p.theta_dot[j] + q.theta_dot[j] - m.theta_dot[j]).norm() < 1e-14 * scale);
            }
            let spec = kg_norms(&p, &q, &disp);
            prop_assert!(spec.plus.iter().all(|&x| x >= 0.0));
            prop_assert!(spec.minus.iter().all(|&x| x <= 0.0));
            let field = from_modes(&m);
            let direct = field.kg_norm();
            prop_assert!((spec.total() - direct).abs() < 1e-10 * (1.0 + direct.abs()));
            let by_cluster: f64 = spec.clusters.iter().map(|c| c.norm).sum();
            let scale: f64 = spec.plus.iter().chain(&spec.minus).map(|x| x.abs()).sum();
            prop_assert!((by_cluster - spec.total()).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn single_branch_content() {
        let n = 64;
        let disp = baseline_disp(n);
        let mut m = ModeAmplitudes {
            t: 0.0,
            theta: vec![Complex64::default(); n],
            theta_dot: vec![Complex64::default(); n],
        };
        let a = Complex64::new(0.3, -0.2);
        m.theta[5] = a;
        m.theta_dot[5] = -Complex64::i() * disp.omega[5] * a;
        let (p, q) = frequency_split(&m, &disp).unwrap();
        assert!(q.theta.iter().chain(&q.theta_dot).all(|z| z.norm() < 1e-15));
        let spec = kg_norms(&p, &q, &disp);
        assert!((spec.plus[5] - disp.omega[5] * a.norm_sqr()).abs() < 1e-12 * spec.plus[5]);
        assert_eq!(spec.clusters.len(), 1);
    }

    #[test]
    fn standing_wave_splits_evenly() {
        let n = 64;
        let disp = baseline_disp(n);
        let mut m = ModeAmplitudes {
            t: 0.0,
            theta: vec![Complex64::default(); n],
            theta_dot: vec![Complex64::default(); n],
        };
        m.theta[7] = Complex64::new(1.0, 0.5);
        let (p, q) = frequency_split(&m, &disp).unwrap();
        let spec = kg_norms(&p, &q, &disp);
        assert!((spec.total_plus + spec.total_minus).abs() < 1e-14);
        let zero = kg_norms(
            &ModeAmplitudes {
                t: 0.0,
                theta: vec![Complex64::default(); n],
                theta_dot: vec![Complex64::default(); n],
            },
            &ModeAmplitudes {
                t: 0.0,
                theta: vec![Complex64::default(); n],
                theta_dot: vec![Complex64::default(); n],
            },
            &disp,
        );
        assert_eq!(zero.total(), 0.0);
        assert!(zero.clusters.is_empty());
    }

    #[test]
    fn zero_mode_amplitude_is_rejected() {
        let disp = baseline_disp(16);
        let mut m = to_modes(&random_field(16, 9));
        m.theta[0] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            frequency_split(&m, &disp),
            Err(Error::ZeroMode { .. })
        ));
    }

    #[test]
    fn nn_dispersion_matches_sine_law() {
        let n = 1000;
        let disp = baseline_disp(n);
        let k1 = disp.ring().nearest_neighbor_stiffness();
        assert_eq!(disp.omega[0], 0.0);
        for j in 0..n {
            let m = mode_index(j, n) as f64;
            let exact = 2.0 * (k1 / M_EFF).sqrt() * (PI * m / n as f64).sin().abs();
            assert!((disp.omega[j] - exact).abs() < 1e-10 * exact.max(1.0));
            assert!((disp.omega[j] - disp.omega[fft_slot(-(m as i64), n)]).abs() < 1e-9);
        }
    }

    #[test]
    fn circulant_matches_dense_eigenvalues() {
        for inter in [Interaction::NearestNeighbor, Interaction::FullCoulomb] {
            let n = 48;
            let cfg = RingConfig {
                n_ions: n,
                v_min_frac: 1.0,
                interaction: inter,
                ..RingConfig::thermality_reference()
            };
            let l = Lattice::new(&cfg).unwrap();
            let f = l.force_matrix_at(0.0).unwrap().to_dense() / M_EFF;
            let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(f)
                .eigenvalues
                .iter()
                .map(|x| x.max(0.0).sqrt())
                .collect();
            let disp = DispersionTable::dispersion(n, cfg.kappa, 1.0, inter);
            let mut om = disp.omega.clone();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            om.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let scale = om[n - 1];
            for (a, b) in ev.iter().zip(&om) {
                assert!((a - b).abs() < 1e-8 * scale, "{inter:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn coulomb_group_velocity_rises_toward_small_k() {
        let disp = DispersionTable::dispersion(1000, 1.2591, 5.0 / 6.0, Interaction::FullCoulomb);
        let vg: Vec<f64> = (1..=5).map(|m| disp.vgroup[m]).collect();
        assert!(vg.windows(2).all(|w| w[0] > w[1]), "{vg:?}");
    }

    #[test]
    fn cluster_runs_bridge_small_gaps_and_wrap() {
        let mut above = vec![false; 20];
        for p in [0, 1, 2, 4, 5, 10, 11, 18, 19] {
            above[p] = true;
        }
        let runs = circular_runs(&above, 3);
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0], vec![10, 11]);
        assert_eq!(runs[1], vec![18, 19, 0, 1, 2, 4, 5]);
    }

    #[test]
    fn frequency_condition_zero_has_zero_root() {
        let ring = ReferenceRing::new(100, 1.2591, 5.0 / 6.0, Interaction::NearestNeighbor);
        let roots = frequency_roots(0.0, &ring);
        assert!(roots.iter().any(|r| r.k.abs() < 1e-9));
        for r in &roots {
            let sgn = if r.branch == Branch::LeftMoving {
                -1.0
            } else {
                1.0
            };
            let resid = r.k + sgn * ring.omega(r.k) * r.k.signum();
            assert!(resid.abs() < 1e-9 * TWO_PI * 100.0);
        }
    }

    #[test]
    fn scan_finds_every_sign_change() {
        let ring = ReferenceRing::new(60, 1.2591, 5.0 / 6.0, Interaction::NearestNeighbor);
        let kmax = TWO_PI * 60.0;
        for w in 0..1000 {
            let omega0 = -200.0 + 0.4 * w as f64;
            let roots = frequency_roots(omega0, &ring);
            // independent count on a coarser grid must not exceed what was found
            for (branch, sgn) in [(Branch::LeftMoving, -1.0), (Branch::RightMoving, 1.0)] {
                let f = |k: f64| k + sgn * ring.omega(k) * k.signum() - omega0;
                let m = 2000;
                let changes = (0..m)
                    .filter(|&i| {
                        let a = -kmax + 2.0 * kmax * i as f64 / m as f64;
                        let b = -kmax + 2.0 * kmax * (i + 1) as f64 / m as f64;
                        f(a) * f(b) < 0.0
                    })
                    .count();
                let found = roots.iter().filter(|r| r.branch == branch).count();
                assert!(found >= changes, "Ω₀ = {omega0}: {found} < {changes}");
            }
        }
    }

    #[test]
    fn final_pulse_properties() {
        let cfg = RingConfig::thermality_reference();
        let profile = Profile::new(&cfg).unwrap();
        let lattice = Lattice::new(&cfg).unwrap();
        let disp = baseline_disp(cfg.n_ions);
        let n_sub = lattice.default_n_sub();
        let cache = StaticForceCache::new(&lattice, n_sub, 0.0).unwrap();
        let integ = Integrator::new(&cache, n_sub);
        let u_h = profile
            .black_hole_horizon(crate::profile::SoundModel::Continuum)
            .unwrap()
            .label;
        let pulse = build_final_pulse(
            &cfg.pulse,
            u_h - 0.1,
            &profile,
            SoundModel::Continuum,
            &disp,
            &integ,
        )
        .unwrap();
        assert_eq!(pulse.branch, FrequencySign::Minus);
        assert!(pulse.probe_velocity < 0.0);
        let spec = analyse(&pulse.field, &disp).unwrap();
        assert!((spec.total() + 1.0).abs() < 1e-12);
        assert!(spec.total_plus.abs() < 1e-14);
        let m = to_modes(&pulse.field);
        let peak = m.theta.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(m.theta[0].norm() < 1e-14 * peak);

        // the full Gaussian, synthesised directly, has the Fourier width
        let n = cfg.n_ions;
        let full = ModeAmplitudes {
            t: 0.0,
            theta: (0..n)
                .map(|j| {
                    Complex64::new(
                        (-((mode_index(j, n) as f64 - 5.0) / 20.0).powi(2)).exp(),
                        0.0,
                    )
                })
                .collect(),
            theta_dot: vec![Complex64::default(); n],
        };
        let width = from_modes(&full).envelope_width_ions();
        let expect = envelope_width_ions(n, 20.0);
        assert!((width / expect - 1.0).abs() < 1e-3, "{width} vs {expect}");
        // the one-sided, k-weighted pulse is broader
        let actual = pulse.field.envelope_width_ions();
        assert!(actual > expect && actual < 2.0 * expect, "{actual}");

        // Gaussian envelope whose edge sits 20 ions inside the subsonic window
        let (lo, hi) = profile.subsonic_interval();
        let edge = (expect + 20.0) / n as f64;
        let c = lo + edge;
        let placed = ModeAmplitudes {
            t: 0.0,
            theta: (0..n)
                .map(|j| {
                    let m = mode_index(j, n) as f64;
                    (-((m - 5.0) / 20.0).powi(2)).exp()
                        * Complex64::from_polar(1.0, -TWO_PI * m * c)
                })
                .collect(),
            theta_dot: vec![Complex64::default(); n],
        };
        let out = from_modes(&placed).fraction_outside(lo, hi);
        assert!(out < 1e-4, "{out}");
        // the final pulse's spectral kink at n = 0 leaves algebraic tails
        let out = pulse.field.fraction_outside(lo, hi);
        assert!(out < 1e-3, "{out}");
    }

    #[test]
    fn misplaced_pulse_is_rejected() {
        let cfg = RingConfig::thermality_reference();
        let profile = Profile::new(&cfg).unwrap();
        let lattice = Lattice::new(&cfg).unwrap();
        let disp = baseline_disp(cfg.n_ions);
        let cache = StaticForceCache::new(&lattice, 4, 0.0).unwrap();
        let integ = Integrator::new(&cache, 4);
        assert!(matches!(
            build_final_pulse(
                &cfg.pulse,
                0.5,
                &profile,
                SoundModel::Continuum,
                &disp,
                &integ
            ),
            Err(Error::Placement(_))
        ));
    }
}
