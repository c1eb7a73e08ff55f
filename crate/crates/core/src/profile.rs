//! Imposed rotation profile of the ring.
//!
//! Ion `i` sits at `θ_i(t) = g(i/N + t/T)`. The slope `g′` is flat at
//! `v_min` (subsonic) and `v_max` (supersonic) and switches between the two
//! through quintic smooth steps of half-widths `γ₁` and `γ₂` centred on the
//! labels `σ` and `1 − σ`. `g` itself is the exact antiderivative, so no
//! quadrature enters anywhere; `v_max` is fixed by requiring `g(1) = 2π`.
//!
//! Natural units throughout: `m = L = T = 1`, so angular velocities are in
//! rad per rotation period and `g′(x)` is the angular velocity of the ion
//! at label `x`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::config::RingConfig;
use crate::error::{Error, Result};
use crate::lattice::ReferenceRing;

const TWO_PI: f64 = 2.0 * PI;

/// Quintic step `h(s) = 15/8 s − 5/4 s³ + 3/8 s⁵` and its first two derivatives.
pub fn smooth_step(s: f64) -> Result<(f64, f64, f64)> {
    if !(s.abs() <= 1.0) {
        return Err(Error::Domain(format!(
            "smooth_step argument {s} outside [-1, 1]"
        )));
    }
    Ok(smooth_step_unchecked(s))
}

#[inline]
fn smooth_step_unchecked(s: f64) -> (f64, f64, f64) {
    let s2 = s * s;
    let h = s * (15.0 / 8.0 - s2 * (5.0 / 4.0 - s2 * 3.0 / 8.0));
    let dh = 15.0 / 8.0 * (1.0 - s2) * (1.0 - s2);
    let d2h = -15.0 / 2.0 * s * (1.0 - s2);
    (h, dh, d2h)
}

/// `∫₀ˢ h`.
#[inline]
fn smooth_step_integral(s: f64) -> f64 {
    let s2 = s * s;
    s2 * (15.0 / 16.0 - s2 * (5.0 / 16.0 - s2 / 16.0))
}

/// Piecewise analytic profile: `g′(x) = v_min + (v_max − v_min)·w(x)` with
/// `w` the supersonic weight (0 subsonic, 1 supersonic).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileShape {
    pub v_min: f64,
    pub v_max: f64,
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Value, slope and curvature of the supersonic weight plus its integral.
#[derive(Debug, Clone, Copy)]
struct Weight {
    w: f64,
    dw: f64,
    d2w: f64,
    integral: f64,
}

impl ProfileShape {
    /// Builds the shape with `v_max` fixed by closure,
    /// `2σ·v_min + (1 − 2σ)·v_max = 2π`.
    pub fn from_closure(v_min: f64, sigma: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        let v_max = Self::closure_v_max(v_min, sigma);
        let shape = ProfileShape {
            v_min,
            v_max,
            sigma,
            gamma1,
            gamma2,
        };
        if v_min == TWO_PI {
            return Ok(shape);
        }
        if v_max <= v_min {
            return Err(Error::InfeasibleProfile(format!(
                "derived v_max = {v_max} does not exceed v_min = {v_min}"
            )));
        }
        if v_max <= TWO_PI {
            return Err(Error::InfeasibleProfile(format!(
                "derived v_max = {v_max} leaves no supersonic region"
            )));
        }
        Ok(shape)
    }

    pub fn closure_v_max(v_min: f64, sigma: f64) -> f64 {
        (TWO_PI - 2.0 * sigma * v_min) / (1.0 - 2.0 * sigma)
    }

    /// `∂v_max/∂v_min` under closure.
    pub fn closure_slope(sigma: f64) -> f64 {
        -2.0 * sigma / (1.0 - 2.0 * sigma)
    }

    pub fn homogeneous(sigma: f64, gamma1: f64, gamma2: f64) -> Self {
        ProfileShape {
            v_min: TWO_PI,
            v_max: TWO_PI,
            sigma,
            gamma1,
            gamma2,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.v_max == self.v_min
    }

    /// Region boundaries `[σ−γ₁, σ+γ₁, 1−σ−γ₂, 1−σ+γ₂]`.
    pub fn boundaries(&self) -> [f64; 4] {
        [
            self.sigma - self.gamma1,
            self.sigma + self.gamma1,
            1.0 - self.sigma - self.gamma2,
            1.0 - self.sigma + self.gamma2,
        ]
    }

    fn weight(&self, x: f64) -> Weight {
        let [a1, b1, a2, b2] = self.boundaries();
        let (g1, g2) = (self.gamma1, self.gamma2);
        if x <= a1 {
            Weight {
                w: 0.0,
                dw: 0.0,
                d2w: 0.0,
                integral: 0.0,
            }
        } else if x < b1 {
            let s = (x - self.sigma) / g1;
            let (h, dh, d2h) = smooth_step_unchecked(s);
            Weight {
                w: 0.5 * (1.0 + h),
                dw: 0.5 * dh / g1,
                d2w: 0.5 * d2h / (g1 * g1),
                integral: 0.5 * g1 * ((s + 1.0) + smooth_step_integral(s) - 11.0 / 16.0),
            }
        } else if x <= a2 {
            Weight {
                w: 1.0,
                dw: 0.0,
                d2w: 0.0,
                integral: g1 + (x - b1),
            }
        } else if x < b2 {
            let s = (x - (1.0 - self.sigma)) / g2;
            let (h, dh, d2h) = smooth_step_unchecked(s);
            Weight {
                w: 0.5 * (1.0 - h),
                dw: -0.5 * dh / g2,
                d2w: -0.5 * d2h / (g2 * g2),
                integral: g1
                    + (a2 - b1)
                    + 0.5 * g2 * ((s + 1.0) - smooth_step_integral(s) + 11.0 / 16.0),
            }
        } else {
            Weight {
                w: 0.0,
                dw: 0.0,
                d2w: 0.0,
                integral: 1.0 - 2.0 * self.sigma,
            }
        }
    }

    fn split(x: f64) -> (f64, f64) {
        let wraps = x.floor();
        (wraps, x - wraps)
    }

    /// `g(x)`, continued periodically with `g(x + 1) = g(x) + 2π`.
    pub fn g(&self, x: f64) -> f64 {
        let (wraps, frac) = Self::split(x);
        let wt = self.weight(frac);
        TWO_PI * wraps + self.v_min * frac + (self.v_max - self.v_min) * wt.integral
    }

    pub fn g1(&self, x: f64) -> f64 {
        let (_, frac) = Self::split(x);
        self.v_min + (self.v_max - self.v_min) * self.weight(frac).w
    }

    pub fn g2(&self, x: f64) -> f64 {
        let (_, frac) = Self::split(x);
        (self.v_max - self.v_min) * self.weight(frac).dw
    }

    pub fn g3(&self, x: f64) -> f64 {
        let (_, frac) = Self::split(x);
        (self.v_max - self.v_min) * self.weight(frac).d2w
    }

    /// `(∂g/∂v_min, ∂g′/∂v_min)` at fixed label with `v_max` tied by closure.
    pub fn d_dvmin(&self, x: f64) -> (f64, f64) {
        let (_, frac) = Self::split(x);
        let wt = self.weight(frac);
        let c = Self::closure_slope(self.sigma) - 1.0;
        (frac + c * wt.integral, 1.0 + c * wt.w)
    }
}

/// Which side of the supersonic region a horizon bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HorizonKind {
    /// The flow enters the supersonic region.
    BlackHole,
    /// The flow leaves it.
    WhiteHole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Horizon {
    pub kind: HorizonKind,
    /// Label `u_H = g⁻¹(θ_H)` in `[0, 1)`.
    pub label: f64,
    pub theta: f64,
    /// Flow velocity, equal to the sound speed, at the horizon.
    pub velocity: f64,
}

/// How the local sound speed is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SoundModel {
    /// Long-wavelength nearest-neighbour limit, `c² = (2π)³κ̃/v`.
    Continuum,
    /// Group velocity of the lattice at local spacing, at label wave number `k_ref`.
    DiscreteGroupVelocity { k_ref: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HawkingTemperature {
    /// `(1/4πv) d(v² − c²)/dθ` at the horizon.
    pub surface_gravity_form: f64,
    /// `(3/4πT) g″/g′` at the horizon.
    pub profile_form: f64,
    /// `|a − b| / max(|a|, |b|)`.
    pub relative_gap: f64,
}

impl HawkingTemperature {
    /// The value used downstream: the surface-gravity form, which is the
    /// one that remains meaningful for the lattice sound speed.
    pub fn value(&self) -> f64 {
        self.surface_gravity_form
    }
}

/// A profile bound to a ring configuration.
#[derive(Debug, Clone)]
pub struct Profile {
    pub shape: ProfileShape,
    pub n_ions: usize,
    pub kappa: f64,
    pub interaction: crate::config::Interaction,
    table_x: Vec<f64>,
    table_g: Vec<f64>,
}

impl Profile {
    pub fn new(config: &RingConfig) -> Result<Self> {
        let shape = if config.is_homogeneous() {
            ProfileShape::homogeneous(config.sigma, config.gamma1, config.gamma2)
        } else {
            ProfileShape::from_closure(
                TWO_PI * config.v_min_frac,
                config.sigma,
                config.gamma1,
                config.gamma2,
            )?
        };
        Ok(Self::from_shape(shape, config))
    }

    pub fn from_shape(shape: ProfileShape, config: &RingConfig) -> Self {
        let m = (16 * config.n_ions).max(1 << 14);
        let table_x: Vec<f64> = (0..=m).map(|j| j as f64 / m as f64).collect();
        let table_g = table_x.iter().map(|&x| shape.g(x)).collect();
        Profile {
            shape,
            n_ions: config.n_ions,
            kappa: config.kappa,
            interaction: config.interaction,
            table_x,
            table_g,
        }
    }

    pub fn v_min(&self) -> f64 {
        self.shape.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.shape.v_max
    }

    pub fn g(&self, x: f64) -> f64 {
        self.shape.g(x)
    }

    /// `g⁻¹(θ)`, periodic: `g⁻¹(θ + 2π) = g⁻¹(θ) + 1`.
    pub fn g_inv(&self, theta: f64) -> f64 {
        let wraps = (theta / TWO_PI).floor();
        let th = theta - TWO_PI * wraps;
        let j = match self
            .table_g
            .binary_search_by(|g| g.partial_cmp(&th).unwrap())
        {
            Ok(j) => return wraps + self.table_x[j],
            Err(j) => j.clamp(1, self.table_g.len() - 1),
        };
        let (mut lo, mut hi) = (self.table_x[j - 1], self.table_x[j]);
        let mut x =
            lo + (hi - lo) * (th - self.table_g[j - 1]) / (self.table_g[j] - self.table_g[j - 1]);
        for _ in 0..60 {
            let r = self.shape.g(x) - th;
            if r.abs() < 1e-15 * TWO_PI {
                break;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = x - r / self.shape.g1(x);
            x = if step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-16 {
                break;
            }
        }
        wraps + x
    }

    /// Angular flow velocity at angle `θ`.
    pub fn velocity_at(&self, theta: f64) -> f64 {
        self.shape.g1(self.g_inv(theta))
    }

    /// Ions per unit of `θ/2π`: `n = N/(vT)`.
    pub fn density(&self, theta: f64) -> f64 {
        self.n_ions as f64 / self.velocity_at(theta)
    }

    /// `ρ = n·mL²/(2π)²`.
    pub fn conformal_factor(&self, theta: f64) -> f64 {
        self.density(theta) / (TWO_PI * TWO_PI)
    }

    /// Long-wavelength sound speed `√((2π)³ κ̃ / v)` at angle `θ`.
    pub fn sound_speed_continuum(&self, theta: f64) -> f64 {
        continuum_sound_speed(self.kappa, self.velocity_at(theta))
    }

    /// Sound speed as a function of local flow velocity.
    pub fn sound_speed_for_velocity(&self, v: f64, model: SoundModel) -> f64 {
        match model {
            SoundModel::Continuum => continuum_sound_speed(self.kappa, v),
            SoundModel::DiscreteGroupVelocity { k_ref } => {
                let ring =
                    ReferenceRing::new(self.n_ions, self.kappa, v / TWO_PI, self.interaction);
                v * ring.group_velocity(k_ref)
            }
        }
    }

    /// Velocity at which flow and sound speed coincide, if any lies in
    /// `(v_min, v_max)`.
    pub fn horizon_velocity(&self, model: SoundModel) -> Option<f64> {
        if self.shape.is_homogeneous() {
            return None;
        }
        let f = |v: f64| v - self.sound_speed_for_velocity(v, model);
        let (mut lo, mut hi) = (self.v_min(), self.v_max());
        let (flo, fhi) = (f(lo), f(hi));
        if !(flo < 0.0 && fhi > 0.0) {
            return None;
        }
        if let SoundModel::Continuum = model {
            return Some(TWO_PI * self.kappa.cbrt());
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Roots of `v(θ) = c(θ)`, black hole first.
    pub fn find_horizons(&self, model: SoundModel) -> Vec<Horizon> {
        let Some(v_h) = self.horizon_velocity(model) else {
            return Vec::new();
        };
        let [a1, b1, a2, b2] = self.shape.boundaries();
        let mut out = Vec::with_capacity(2);
        for (kind, lo, hi, rising) in [
            (HorizonKind::BlackHole, a1, b1, true),
            (HorizonKind::WhiteHole, a2, b2, false),
        ] {
            let (mut lo, mut hi) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let above = self.shape.g1(mid) > v_h;
                if above == rising {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-16 {
                    break;
                }
            }
            let u = 0.5 * (lo + hi);
            out.push(Horizon {
                kind,
                label: u,
                theta: self.shape.g(u),
                velocity: self.shape.g1(u),
            });
        }
        out
    }

    pub fn black_hole_horizon(&self, model: SoundModel) -> Option<Horizon> {
        self.find_horizons(model)
            .into_iter()
            .find(|h| h.kind == HorizonKind::BlackHole)
    }

    /// Both expressions for `k_B T_H / ħ` (units of `1/T`) at `horizon`.
    pub fn hawking_temperature(&self, horizon: &Horizon, model: SoundModel) -> HawkingTemperature {
        let u = horizon.label;
        let g1 = self.shape.g1(u);
        let g2 = self.shape.g2(u);
        if g2 == 0.0 {
            log::warn!("horizon at label {u} lies in a flat region; T_H degenerates to zero");
        }
        let profile_form = 3.0 / (4.0 * PI) * g2 / g1;

        let width = if horizon.kind == HorizonKind::BlackHole {
            self.shape.gamma1
        } else {
            self.shape.gamma2
        };
        let du = 1e-5 * width;
        let f = |x: f64| {
            let v = self.shape.g1(x);
            let c = self.sound_speed_for_velocity(v, model);
            v * v - c * c
        };
        // d/dθ = (1/g′) d/du
        let dfdtheta = (f(u + du) - f(u - du)) / (2.0 * du) / g1;
        let surface_gravity_form = dfdtheta / (4.0 * PI * horizon.velocity);
        let scale = surface_gravity_form.abs().max(profile_form.abs());
        let relative_gap = if scale > 0.0 {
            (surface_gravity_form - profile_form).abs() / scale
        } else {
            0.0
        };
        HawkingTemperature {
            surface_gravity_form,
            profile_form,
            relative_gap,
        }
    }

    /// Flat-region label intervals `(start, end)`, with `end` possibly past 1.
    pub fn subsonic_interval(&self) -> (f64, f64) {
        let [a1, _, _, b2] = self.shape.boundaries();
        (b2, 1.0 + a1)
    }

    pub fn supersonic_interval(&self) -> (f64, f64) {
        let [_, b1, a2, _] = self.shape.boundaries();
        (b1, a2)
    }

    /// Rows `(x, θ, v, c_continuum, g″)` at `samples` equally spaced labels.
    pub fn table(&self, samples: usize) -> Vec<[f64; 5]> {
        (0..samples)
            .map(|j| {
                let x = j as f64 / samples as f64;
                let v = self.shape.g1(x);
                [
                    x,
                    self.shape.g(x),
                    v,
                    continuum_sound_speed(self.kappa, v),
                    self.shape.g2(x),
                ]
            })
            .collect()
    }
}

pub fn continuum_sound_speed(kappa: f64, v: f64) -> f64 {
    (TWO_PI.powi(3) * kappa / v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn config(sigma: f64, kappa: f64) -> RingConfig {
        RingConfig {
            sigma,
            kappa,
            ..RingConfig::thermality_reference()
        }
    }

    #[test]
    fn smooth_step_values() {
        assert_eq!(smooth_step(0.0).unwrap(), (0.0, 15.0 / 8.0, 0.0));
        let (h, dh, d2h) = smooth_step(1.0).unwrap();
        assert_relative_eq!(h, 1.0, epsilon = 1e-15);
        assert_eq!(dh, 0.0);
        assert_eq!(d2h, 0.0);
        let (h, dh, _) = smooth_step(-1.0).unwrap();
        assert_relative_eq!(h, -1.0, epsilon = 1e-15);
        assert_eq!(dh, 0.0);
        assert!(smooth_step(1.2).is_err());
    }

    #[test]
    fn v_max_from_closure() {
        let p = Profile::new(&config(0.45, 1.2591)).unwrap();
        assert_relative_eq!(p.v_max() / TWO_PI, 2.5, epsilon = 1e-12);
        let p = Profile::new(&config(0.3, 1.127)).unwrap();
        assert_relative_eq!(p.v_max() / TWO_PI, 1.25, epsilon = 1e-12);
    }

    #[test]
    fn homogeneous_ring_is_linear() {
        let cfg = RingConfig {
            v_min_frac: 1.0,
            ..config(0.45, 1.0)
        };
        let p = Profile::new(&cfg).unwrap();
        assert_eq!(p.v_max(), p.v_min());
        for &x in &[0.0, 0.1, 0.44, 0.5, 0.93] {
            assert_relative_eq!(p.g(x), TWO_PI * x, epsilon = 1e-13);
        }
        assert!(p.find_horizons(SoundModel::Continuum).is_empty());
    }

    #[test]
    fn infeasible_profiles_are_rejected() {
        assert!(matches!(
            ProfileShape::from_closure(TWO_PI * 1.1, 0.3, 0.02, 0.05),
            Err(Error::InfeasibleProfile(_))
        ));
    }

    #[test]
    fn continuum_sound_speed_consistency() {
        assert_relative_eq!(continuum_sound_speed(1.0, TWO_PI), TWO_PI, epsilon = 1e-12);
        // c = v at v_H = 2π κ̃^(1/3)
        for &(kappa, expect) in &[(1.2591, 1.0798), (1.127, 1.0406)] {
            let p = Profile::new(&config(0.45, kappa)).unwrap();
            let h = p.black_hole_horizon(SoundModel::Continuum).unwrap();
            assert!((h.velocity / TWO_PI - expect).abs() < 1e-4);
            let c = p.sound_speed_continuum(h.theta);
            assert!((c - h.velocity).abs() / h.velocity < 1e-8);
        }
    }

    #[test]
    fn reference_horizon_sits_in_first_transition() {
        let p = Profile::new(&config(0.45, 1.2591)).unwrap();
        let hs = p.find_horizons(SoundModel::Continuum);
        assert_eq!(hs.len(), 2);
        let bh = hs[0];
        assert_eq!(bh.kind, HorizonKind::BlackHole);
        assert!(bh.label > 0.43 && bh.label < 0.47);
        // close to σ·v_min·T = 2π × 0.375
        assert!((bh.theta / TWO_PI - 0.375).abs() < 0.02);
        assert_eq!(hs[1].kind, HorizonKind::WhiteHole);
    }

    #[test]
    fn strong_coupling_removes_horizon() {
        let p = Profile::new(&config(0.45, 30.0)).unwrap();
        assert!(p.find_horizons(SoundModel::Continuum).is_empty());
    }

    #[test]
    fn hawking_temperature_of_quench_profile() {
        // Oracle: 3αh′(s_H)/(4πγ₁v_H) with h(s_H) = (v_H − β)/α, solved by bisection.
        let cfg = RingConfig {
            v_min_frac: 5.0 / 6.0,
            gamma1: 0.02,
            ..config(0.3, 1.127)
        };
        let p = Profile::new(&cfg).unwrap();
        let (vmin, vmax) = (p.v_min(), p.v_max());
        let (alpha, beta) = (0.5 * (vmax - vmin), 0.5 * (vmax + vmin));
        let vh = TWO_PI * 1.127f64.cbrt();
        let target = (vh - beta) / alpha;
        let (mut lo, mut hi) = (-1.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if smooth_step(mid).unwrap().0 < target {
                lo = mid
            } else {
                hi = mid
            }
        }
        let sh = 0.5 * (lo + hi);
        let oracle = 3.0 * alpha * smooth_step(sh).unwrap().1 / (4.0 * PI * 0.02 * vh);

        let h = p.black_hole_horizon(SoundModel::Continuum).unwrap();
        let th = p.hawking_temperature(&h, SoundModel::Continuum);
        assert_relative_eq!(th.profile_form, oracle, max_relative = 1e-9);
        assert!(th.relative_gap < 1e-6);
        assert!((th.value() - 4.48).abs() < 0.05, "{:?}", th);
    }

    #[test]
    fn inverse_map_and_periodicity() {
        let p = Profile::new(&config(0.45, 1.2591)).unwrap();
        for j in 0..200 {
            let x = j as f64 / 200.0 + 0.0013;
            assert!((p.g_inv(p.g(x)) - x).abs() < 1e-12);
            assert_relative_eq!(p.g(x + 1.0), p.g(x) + TWO_PI, epsilon = 1e-12);
        }
        assert!((p.g_inv(p.g(0.3) + TWO_PI) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_matches_at_boundaries() {
        let p = Profile::new(&config(0.45, 1.2591)).unwrap();
        for b in p.shape.boundaries() {
            let eps = 1e-9;
            assert!(p.shape.g2(b - eps).abs() < 1e-6);
            assert!(p.shape.g2(b + eps).abs() < 1e-6);
            assert!((p.shape.g1(b - eps) - p.shape.g1(b + eps)).abs() < 1e-6);
        }
    }

    #[test]
    fn discrete_model_tracks_continuum_for_nearest_neighbours() {
        let p = Profile::new(&config(0.45, 1.2591)).unwrap();
        let vc = p.horizon_velocity(SoundModel::Continuum).unwrap();
        let vd = p
            .horizon_velocity(SoundModel::DiscreteGroupVelocity {
                k_ref: TWO_PI * 5.0,
            })
            .unwrap();
        assert!((vd - vc).abs() / vc < 1e-3);
    }

    fn valid_shape() -> impl Strategy<Value = ProfileShape> {
        (0.1f64..0.45, 0.005f64..0.05, 0.005f64..0.05, 0.3f64..0.95).prop_filter_map(
            "ordered regions",
            |(sigma, g1, g2, vfrac)| {
                let ok = sigma - g1 > 0.0 && sigma + g1 < 1.0 - sigma - g2 && g2 < sigma;
                if !ok {
                    return None;
                }
                ProfileShape::from_closure(TWO_PI * vfrac, sigma, g1, g2).ok()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn closure_and_monotonicity(shape in valid_shape()) {
            prop_assert!((shape.g(1.0 - 1e-15) - TWO_PI).abs() < 1e-10);
            prop_assert!(shape.g(0.0).abs() < 1e-15);
            // Gauss-Legendre on each region: ∫g′ = 2π independent of the closed form.
            let mut edges = vec![0.0];
            edges.extend(shape.boundaries());
            edges.push(1.0);
            let nodes = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
            let weights = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];
            let mut total = 0.0;
            for w in edges.windows(2) {
                let (a, b) = (w[0], w[1]);
                for (xn, wn) in nodes.iter().zip(weights) {
                    total += 0.5 * (b - a) * wn * shape.g1(0.5 * (a + b) + 0.5 * (b - a) * xn);
                }
            }
            prop_assert!((total - TWO_PI).abs() < 1e-10, "quadrature {}", total);
            for j in 0..50 {
                let x = j as f64 / 50.0;
                let v = shape.g1(x);
                prop_assert!(v > 0.0 && v >= shape.v_min - 1e-12 && v <= shape.v_max + 1e-12);
            }
        }

        #[test]
        fn hawking_forms_agree(shape in valid_shape(), kfrac in 0.0f64..1.0) {
            // κ̃ chosen so that v_H lies strictly inside (v_min, v_max).
            let lo = (shape.v_min / TWO_PI).powi(3);
            let hi = (shape.v_max / TWO_PI).powi(3);
            let kappa = lo + (hi - lo) * (0.05 + 0.9 * kfrac);
            let cfg = RingConfig { kappa, n_ions: 100, ..RingConfig::thermality_reference() };
            let p = Profile::from_shape(shape, &cfg);
            let hs = p.find_horizons(SoundModel::Continuum);
            prop_assert_eq!(hs.len(), 2);
            for h in &hs {
                let c = p.sound_speed_continuum(h.theta);
                prop_assert!((h.velocity - c).abs() / h.velocity < 1e-8);
                let t = p.hawking_temperature(h, SoundModel::Continuum);
                prop_assert!(t.relative_gap < 1e-6, "{:?}", t);
                prop_assert!((p.g_inv(h.theta) - h.label).abs() < 1e-9);
            }
        }
    }
}
