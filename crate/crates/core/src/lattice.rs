//! Equilibrium trajectories, Coulomb pair terms and the linearised force matrix.
//!
//! The generalised coordinate of ion `i` is its angle; its inertia is
//! `m_eff = m(L/2π)² = (2π)⁻²` and the conjugate momentum `p = m_eff·δθ̇`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::config::{Interaction, RampSchedule, RingConfig};
use crate::error::{Error, Result};
use crate::profile::{Profile, ProfileShape};
use crate::spline::periodic_slopes;

const TWO_PI: f64 = 2.0 * PI;

/// Angle-space inertia `(2π)⁻²`.
pub const M_EFF: f64 = 1.0 / (TWO_PI * TWO_PI);

/// Coulomb strength `q² = κ̃/(2N)` (units `mL³T⁻²`).
pub fn coulomb_strength(kappa: f64, n_ions: usize) -> f64 {
    kappa / (2.0 * n_ions as f64)
}

/// `Δθ` reduced to `(−π, π]`.
#[inline]
pub fn wrap_angle(delta: f64) -> f64 {
    let r = delta - TWO_PI * (delta / TWO_PI).round();
    if r <= -PI {
        r + TWO_PI
    } else {
        r
    }
}

/// Pair potential `q²/d` with chord distance `d = (1/π)|sin(Δθ/2)|` and its
/// first two derivatives in `Δθ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerms {
    pub potential: f64,
    /// `dV/dΔθ`.
    pub derivative: f64,
    /// `d²V/dΔθ²`.
    pub stiffness: f64,
}

pub fn coulomb_pair(delta_theta: f64, q2: f64) -> Result<PairTerms> {
    let delta = wrap_angle(delta_theta);
    let (s, c) = (0.5 * delta).sin_cos();
    if s == 0.0 {
        return Err(Error::Domain(format!(
            "coincident ions at Δθ = {delta_theta}"
        )));
    }
    Ok(pair_unchecked(s, c, q2))
}

#[inline]
fn pair_unchecked(s: f64, c: f64, q2: f64) -> PairTerms {
    let d = s.abs() / PI;
    let dd = c * s.signum() / TWO_PI;
    PairTerms {
        potential: q2 / d,
        derivative: -q2 * dd / (d * d),
        stiffness: q2 * (2.0 * dd * dd / (d * d * d) + 0.25 / d),
    }
}

#[inline]
fn pair_checked(theta_i: f64, theta_j: f64, q2: f64, i: usize, j: usize) -> Result<PairTerms> {
    let delta = wrap_angle(theta_i - theta_j);
    let (s, c) = (0.5 * delta).sin_cos();
    if s == 0.0 {
        return Err(Error::CoincidentIons { i, j });
    }
    Ok(pair_unchecked(s, c, q2))
}

/// Homogeneous ring of `N` ions at angular spacing `2π·v_frac/N`, i.e. the
/// flat region of a profile with flow velocity `2π·v_frac`, seen in the
/// displacement coordinate `δθ`.
#[derive(Debug, Clone)]
pub struct ReferenceRing {
    pub n_ions: usize,
    pub v_frac: f64,
    pub interaction: Interaction,
    /// `K_s`, stiffness between ions `s` apart, for `s = 1..=N/2`.
    stiffness: Vec<f64>,
}

impl ReferenceRing {
    pub fn new(n_ions: usize, kappa: f64, v_frac: f64, interaction: Interaction) -> Self {
        let q2 = coulomb_strength(kappa, n_ions);
        let half = n_ions / 2;
        let smax = match interaction {
            Interaction::NearestNeighbor => 1,
            Interaction::FullCoulomb => half,
        };
        // A ring of radius v_frac·R: V scales as 1/v_frac, and δφ = δθ/v_frac.
        let stiffness = (1..=smax)
            .map(|s| {
                let phi = TWO_PI * s as f64 / n_ions as f64;
                let (sn, cs) = (0.5 * phi).sin_cos();
                pair_unchecked(sn, cs, q2).stiffness / v_frac.powi(3)
            })
            .collect();
        ReferenceRing {
            n_ions,
            v_frac,
            interaction,
            stiffness,
        }
    }

    pub fn nearest_neighbor_stiffness(&self) -> f64 {
        self.stiffness[0]
    }

    /// Signed minimum-image separations `s` and their stiffness, one entry per
    /// other ion.
    fn couplings(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.n_ions;
        (1..n).filter_map(move |j| {
            let s = if j <= n / 2 {
                j as isize
            } else {
                j as isize - n as isize
            };
            self.stiffness
                .get(s.unsigned_abs() - 1)
                .map(|&k| (s as f64, k))
        })
    }

    /// `ω(k)` for label wave number `k` (mode `n` has `k = 2πn`).
    pub fn omega(&self, k: f64) -> f64 {
        let n = self.n_ions as f64;
        let w2: f64 = self
            .couplings()
            .map(|(s, kk)| kk * (1.0 - (s * k / n).cos()))
            .sum::<f64>()
            / M_EFF;
        w2.max(0.0).sqrt()
    }

    /// `dω/dk` in label units per period.
    pub fn group_velocity(&self, k: f64) -> f64 {
        let n = self.n_ions as f64;
        let w = self.omega(k);
        if w < 1e-9 * self.omega_scale() {
            let sum: f64 = self.couplings().map(|(s, kk)| kk * s * s).sum();
            let sign = if k < 0.0 { -1.0 } else { 1.0 };
            return sign * (sum / (2.0 * M_EFF * n * n)).sqrt();
        }
        let sum: f64 = self
            .couplings()
            .map(|(s, kk)| kk * (s / n) * (s * k / n).sin())
            .sum();
        sum / (2.0 * M_EFF * w)
    }

    fn omega_scale(&self) -> f64 {
        (self.stiffness[0] / M_EFF).sqrt()
    }

    /// Largest frequency over the zone.
    pub fn omega_max(&self) -> f64 {
        let n = self.n_ions;
        (0..=n / 2)
            .map(|m| self.omega(TWO_PI * m as f64))
            .fold(0.0, f64::max)
    }
}

/// Quench of the subsonic velocity with closure held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ramp {
    pub schedule: RampSchedule,
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Ramp {
    pub fn v_target(&self) -> f64 {
        TWO_PI * self.schedule.target_v_min_frac
    }

    /// `(v_min, v̇_min, v̈_min)` at time `t`.
    pub fn v_min(&self, t: f64) -> (f64, f64, f64) {
        if t < 0.0 {
            return (TWO_PI, 0.0, 0.0);
        }
        let a = 3.0 / self.schedule.tau;
        let amp = TWO_PI - self.v_target();
        let e = (-(a * t).powi(2)).exp();
        (
            self.v_target() + amp * e,
            -2.0 * a * a * t * amp * e,
            amp * (4.0 * a.powi(4) * t * t - 2.0 * a * a) * e,
        )
    }

    pub fn shape_at(&self, t: f64) -> ProfileShape {
        let (v, _, _) = self.v_min(t);
        if t < 0.0 {
            return ProfileShape::homogeneous(self.sigma, self.gamma1, self.gamma2);
        }
        ProfileShape {
            v_min: v,
            v_max: ProfileShape::closure_v_max(v, self.sigma),
            sigma: self.sigma,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Static(ProfileShape),
    Ramp(Ramp),
}

impl Schedule {
    pub fn from_config(config: &RingConfig) -> Result<Self> {
        match config.ramp {
            Some(schedule) => Ok(Schedule::Ramp(Ramp {
                schedule,
                sigma: config.sigma,
                gamma1: config.gamma1,
                gamma2: config.gamma2,
            })),
            None => Ok(Schedule::Static(Profile::new(config)?.shape)),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Schedule::Static(_))
    }

    /// Instantaneous label→angle map.
    pub fn shape_at(&self, t: f64) -> ProfileShape {
        match self {
            Schedule::Static(s) => *s,
            Schedule::Ramp(r) => r.shape_at(t),
        }
    }
}

/// Equilibrium snapshot at time `t`.
#[derive(Debug, Clone)]
pub struct EquilibriumFrame {
    pub t: f64,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub theta_ddot: Vec<f64>,
    /// `F^c_i = −∂V^c/∂θ_i`.
    pub coulomb_force: Vec<f64>,
    /// Force the external potential must supply, `m_eff·θ̈ − F^c`.
    pub external_force: Vec<f64>,
}

/// Symmetric stiffness matrix of the linearised dynamics, `ṗ = −f·δθ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceMatrix {
    /// Nearest-neighbour circulant band: `f_ii = diag[i]`, `f_{i,i+1} = upper[i]` (indices mod N).
    Banded {
        diag: Vec<f64>,
        upper: Vec<f64>,
    },
    Dense(DMatrix<f64>),
}

impl ForceMatrix {
    pub fn n(&self) -> usize {
        match self {
            ForceMatrix::Banded { diag, .. } => diag.len(),
            ForceMatrix::Dense(m) => m.nrows(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            ForceMatrix::Banded { diag, upper } => {
                let n = diag.len();
                if i == j {
                    diag[i]
                } else if j == (i + 1) % n {
                    upper[i]
                } else if i == (j + 1) % n {
                    upper[j]
                } else {
                    0.0
                }
            }
            ForceMatrix::Dense(m) => m[(i, j)],
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            ForceMatrix::Dense(m) => m.clone(),
            ForceMatrix::Banded { .. } => {
                let n = self.n();
                DMatrix::from_fn(n, n, |i, j| self.get(i, j))
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|i| self.get(i, (i + 1) % n)).collect()
    }

    /// `out = f(t + shift·T/N)·y`, using `f_ij(t + T/N) = f_{i+1,j+1}(t)`.
    pub fn apply(&self, y: &DMatrix<f64>, shift: isize, out: &mut DMatrix<f64>) {
        let n = self.n();
        let m = shift.rem_euclid(n as isize) as usize;
        match self {
            ForceMatrix::Banded { diag, upper } => {
                let cols = y.ncols();
                let body = |c: usize, col: &mut [f64]| {
                    let yc = y.column(c);
                    for (i, o) in col.iter_mut().enumerate() {
                        let ip = (i + 1) % n;
                        let im = (i + n - 1) % n;
                        *o = diag[(i + m) % n] * yc[i]
                            + upper[(i + m) % n] * yc[ip]
                            + upper[(im + m) % n] * yc[im];
                    }
                };
                let slice = out.as_mut_slice();
                #[cfg(feature = "parallel")]
                if cols > 1 && n * cols > 1 << 14 {
                    slice
                        .par_chunks_mut(n)
                        .enumerate()
                        .for_each(|(c, col)| body(c, col));
                    return;
                }
                slice
                    .chunks_mut(n)
                    .enumerate()
                    .take(cols)
                    .for_each(|(c, col)| body(c, col));
            }
            ForceMatrix::Dense(f) => {
                if m == 0 {
                    out.gemm(1.0, f, y, 0.0);
                    return;
                }
                // z_l = y_{l−m}; w = f z; out_i = w_{i+m}
                let z = DMatrix::from_fn(n, y.ncols(), |l, c| y[((l + n - m) % n, c)]);
                let w = f * z;
                for c in 0..y.ncols() {
                    for i in 0..n {
                        out[(i, c)] = w[((i + m) % n, c)];
                    }
                }
            }
        }
    }
}

/// The ring: geometry schedule plus interaction model.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub n_ions: usize,
    pub kappa: f64,
    pub q2: f64,
    pub interaction: Interaction,
    pub schedule: Schedule,
    pub external_hessian: bool,
}

impl Lattice {
    pub fn new(config: &RingConfig) -> Result<Self> {
        Ok(Lattice {
            n_ions: config.n_ions,
            kappa: config.kappa,
            q2: coulomb_strength(config.kappa, config.n_ions),
            interaction: config.interaction,
            schedule: Schedule::from_config(config)?,
            external_hessian: true,
        })
    }

    pub fn with_external_hessian(mut self, on: bool) -> Self {
        self.external_hessian = on;
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    fn labels(&self, t: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_ions as f64;
        (0..self.n_ions).map(move |i| i as f64 / n + t)
    }

    pub fn frame(&self, t: f64) -> Result<EquilibriumFrame> {
        if !t.is_finite() {
            return Err(Error::Schedule(format!("time {t} is not finite")));
        }
        let n = self.n_ions;
        let (theta, theta_dot, theta_ddot): (Vec<f64>, Vec<f64>, Vec<f64>) = match &self.schedule {
            Schedule::Static(shape) => {
                let mut th = Vec::with_capacity(n);
                let mut v = Vec::with_capacity(n);
                let mut a = Vec::with_capacity(n);
                for u in self.labels(t) {
                    th.push(shape.g(u));
                    v.push(shape.g1(u));
                    a.push(shape.g2(u));
                }
                (th, v, a)
            }
            Schedule::Ramp(ramp) => {
                let shape = ramp.shape_at(t);
                let (_, vd, vdd) = ramp.v_min(t);
                let mut th = Vec::with_capacity(n);
                let mut v = Vec::with_capacity(n);
                let mut a = Vec::with_capacity(n);
                for u in self.labels(t) {
                    let (dg, dg1) = shape.d_dvmin(u);
                    th.push(shape.g(u));
                    v.push(shape.g1(u) + dg * vd);
                    a.push(shape.g2(u) + 2.0 * dg1 * vd + dg * vdd);
                }
                (th, v, a)
            }
        };
        let coulomb_force = self.coulomb_forces(&theta)?;
        let external_force = theta_ddot
            .iter()
            .zip(&coulomb_force)
            .map(|(a, fc)| M_EFF * a - fc)
            .collect();
        Ok(EquilibriumFrame {
            t,
            theta,
            theta_dot,
            theta_ddot,
            coulomb_force,
            external_force,
        })
    }

    fn coulomb_forces(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let n = theta.len();
        match self.interaction {
            Interaction::NearestNeighbor => {
                let mut f = vec![0.0; n];
                for i in 0..n {
                    let j = (i + 1) % n;
                    let dv = pair_checked(theta[i], theta[j], self.q2, i, j)?.derivative;
                    f[i] -= dv;
                    f[j] += dv;
                }
                Ok(f)
            }
            Interaction::FullCoulomb => {
                let row = |i: usize| -> Result<f64> {
                    let mut acc = 0.0;
                    for j in (0..n).filter(|&j| j != i) {
                        acc -= pair_checked(theta[i], theta[j], self.q2, i, j)?.derivative;
                    }
                    Ok(acc)
                };
                #[cfg(feature = "parallel")]
                return (0..n).into_par_iter().map(row).collect();
                #[cfg(not(feature = "parallel"))]
                (0..n).map(row).collect()
            }
        }
    }

    /// Hessian of the total potential at the frame.
    pub fn force_matrix(&self, frame: &EquilibriumFrame) -> Result<ForceMatrix> {
        let theta = &frame.theta;
        let n = theta.len();
        let mut fm = match self.interaction {
            Interaction::NearestNeighbor => {
                let mut diag = vec![0.0; n];
                let mut upper = vec![0.0; n];
                for i in 0..n {
                    let j = (i + 1) % n;
                    let k = pair_checked(theta[i], theta[j], self.q2, i, j)?.stiffness;
                    upper[i] = -k;
                    diag[i] += k;
                    diag[j] += k;
                }
                ForceMatrix::Banded { diag, upper }
            }
            Interaction::FullCoulomb => {
                let row = |i: usize| -> Result<Vec<f64>> {
                    let mut r = vec![0.0; n];
                    let mut d = 0.0;
                    for j in (0..n).filter(|&j| j != i) {
                        let k = pair_checked(theta[i], theta[j], self.q2, i, j)?.stiffness;
                        r[j] = -k;
                        d += k;
                    }
                    r[i] = d;
                    Ok(r)
                };
                #[cfg(feature = "parallel")]
                let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(row).collect::<Result<_>>()?;
                #[cfg(not(feature = "parallel"))]
                let rows: Vec<Vec<f64>> = (0..n).map(row).collect::<Result<_>>()?;
                let mut m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                for i in 0..n {
                    for j in i + 1..n {
                        m[(j, i)] = m[(i, j)];
                    }
                }
                ForceMatrix::Dense(m)
            }
        };
        if self.external_hessian {
            let curv = self.external_curvature(frame);
            match &mut fm {
                ForceMatrix::Banded { diag, .. } => {
                    diag.iter_mut().zip(&curv).for_each(|(d, c)| *d += c)
                }
                ForceMatrix::Dense(m) => (0..n).for_each(|i| m[(i, i)] += curv[i]),
            }
        }
        Ok(fm)
    }

    /// `V^e″(θ_i) = −dF^e/dθ` from the periodic cubic spline of the required
    /// forces over the ion angles.
    pub fn external_curvature(&self, frame: &EquilibriumFrame) -> Vec<f64> {
        periodic_slopes(&frame.theta, &frame.external_force, TWO_PI)
            .into_iter()
            .map(|s| -s)
            .collect()
    }

    pub fn force_matrix_at(&self, t: f64) -> Result<ForceMatrix> {
        self.force_matrix(&self.frame(t)?)
    }

    /// Total Coulomb energy at angles `theta`.
    pub fn coulomb_energy(&self, theta: &[f64]) -> Result<f64> {
        let n = theta.len();
        let mut e = 0.0;
        for i in 0..n {
            match self.interaction {
                Interaction::NearestNeighbor => {
                    let j = (i + 1) % n;
                    e += pair_checked(theta[i], theta[j], self.q2, i, j)?.potential;
                }
                Interaction::FullCoulomb => {
                    for j in i + 1..n {
                        e += pair_checked(theta[i], theta[j], self.q2, i, j)?.potential;
                    }
                }
            }
        }
        Ok(e)
    }

    /// Homogeneous ring seen by the flat subsonic region.
    pub fn subsonic_reference(&self, t: f64) -> ReferenceRing {
        let v = self.schedule.shape_at(t).v_min;
        ReferenceRing::new(self.n_ions, self.kappa, v / TWO_PI, self.interaction)
    }

    /// Largest phonon frequency over the densest spacing the schedule reaches.
    pub fn omega_max(&self) -> f64 {
        let v_frac = match &self.schedule {
            Schedule::Static(s) => s.v_min / TWO_PI,
            Schedule::Ramp(r) => r.schedule.target_v_min_frac,
        };
        ReferenceRing::new(self.n_ions, self.kappa, v_frac.min(1.0), self.interaction).omega_max()
    }

    /// Substeps per ion period with `ω_max·Δt < 0.1`.
    pub fn default_n_sub(&self) -> usize {
        let n = self.n_ions as f64;
        ((10.0 * self.omega_max() / n).floor() as usize + 1).max(4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn homogeneous(n: usize, interaction: Interaction) -> RingConfig {
        RingConfig {
            n_ions: n,
            v_min_frac: 1.0,
            interaction,
            ..RingConfig::thermality_reference()
        }
    }

    fn baseline(n: usize, interaction: Interaction) -> RingConfig {
        RingConfig {
            n_ions: n,
            interaction,
            ..RingConfig::thermality_reference()
        }
    }

    #[test]
    fn antipodal_pair_exerts_no_tangential_force() {
        let p = coulomb_pair(PI, 1.0).unwrap();
        assert!(p.derivative.abs() < 1e-15);
        assert!(matches!(coulomb_pair(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn small_separation_matches_linear_chain() {
        let q2 = 0.7;
        for &d in &[0.05, 0.02, 0.001] {
            let p = coulomb_pair(d, q2).unwrap();
            // 2q²/a³ in position, times R² for the angle coordinate, a = R·Δθ.
            let r = 1.0 / TWO_PI;
            let chain = 2.0 * q2 / (r * d).powi(3) * r * r;
            assert!((p.stiffness / chain - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn pair_derivatives_match_finite_differences() {
        let q2 = 0.3;
        for &d in &[0.3, 1.0, 2.5, -0.7, 5.9] {
            let h = 1e-5;
            let v = |x: f64| coulomb_pair(x, q2).unwrap().potential;
            let p = coulomb_pair(d, q2).unwrap();
            let d1 = (v(d + h) - v(d - h)) / (2.0 * h);
            let d2 = (v(d + h) - 2.0 * v(d) + v(d - h)) / (h * h);
            assert!((p.derivative - d1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!((p.stiffness - d2).abs() < 1e-4 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn homogeneous_frame_has_no_external_force() {
        for inter in [Interaction::NearestNeighbor, Interaction::FullCoulomb] {
            let l = Lattice::new(&homogeneous(64, inter)).unwrap();
            let f = l.frame(0.37).unwrap();
            let scale = l.force_matrix(&f).unwrap().get(0, 0);
            for i in 0..64 {
                let gap = wrap_angle(f.theta[(i + 1) % 64] - f.theta[i]);
                assert!((gap - TWO_PI / 64.0).abs() < 1e-12);
                assert!(f.external_force[i].abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn homogeneous_nn_matrix_is_circulant_laplacian() {
        let l = Lattice::new(&homogeneous(32, Interaction::NearestNeighbor)).unwrap();
        let f = l.force_matrix_at(0.0).unwrap();
        for i in 0..32 {
            let d = f.get(i, i);
            let u = f.get(i, (i + 1) % 32);
            assert!((d + 2.0 * u).abs() < 1e-9 * d);
            assert!((u - f.get(0, 1)).abs() < 1e-9 * d);
        }
    }

    #[test]
    fn static_frame_shifts_by_one_ion() {
        let l = Lattice::new(&baseline(200, Interaction::NearestNeighbor)).unwrap();
        let t = 0.123;
        let a = l.frame(t).unwrap();
        let b = l.frame(t + 1.0 / 200.0).unwrap();
        for i in 0..199 {
            assert!((b.theta[i] - a.theta[i + 1]).abs() < 1e-12);
            assert!((b.external_force[i] - a.external_force[i + 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn external_force_decays_into_flat_region() {
        let l = Lattice::new(&baseline(1000, Interaction::NearestNeighbor)).unwrap();
        let f = l.frame(0.0).unwrap();
        let peak = f.external_force.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        // labels 0.75..0.85 (subsonic) and 0.05..0.2 (subsonic, wrapped side)
        let deep = |range: std::ops::Range<usize>| {
            range.map(|i| f.external_force[i].abs()).fold(0.0, f64::max)
        };
        assert!(deep(750..850) < 1e-6 * peak);
        assert!(deep(50..200) < 1e-6 * peak);
        assert!(deep(440..460) > 1e6 * deep(250..350));
    }

    #[test]
    fn force_matrix_shift_covariance() {
        for inter in [Interaction::NearestNeighbor, Interaction::FullCoulomb] {
            let n = 120;
            let l = Lattice::new(&baseline(n, inter)).unwrap();
            let t = 0.0321;
            let a = l.force_matrix_at(t).unwrap().to_dense();
            let b = l.force_matrix_at(t + 1.0 / n as f64).unwrap().to_dense();
            let scale = a.amax();
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((b[(i, j)] - a[((i + 1) % n, (j + 1) % n)]).abs());
                }
            }
            assert!(worst < 1e-10 * scale, "{inter:?}: {worst}");
        }
    }

    #[test]
    fn shifted_application_matches_explicit_matrix() {
        for inter in [Interaction::NearestNeighbor, Interaction::FullCoulomb] {
            let n = 40;
            let l = Lattice::new(&baseline(n, inter)).unwrap();
            let f = l.force_matrix_at(0.01).unwrap();
            let y = DMatrix::from_fn(n, 3, |i, c| ((i * 7 + c * 3) % 11) as f64 - 5.0);
            for shift in [-3isize, 0, 1, 5, 41] {
                let fs = l
                    .force_matrix_at(0.01 + shift as f64 / n as f64)
                    .unwrap()
                    .to_dense();
                let mut out = DMatrix::zeros(n, 3);
                f.apply(&y, shift, &mut out);
                let expect = &fs * &y;
                assert!((out - expect).amax() < 1e-8 * fs.amax());
            }
        }
    }

    fn fd_hessian(l: &Lattice, frame: &EquilibriumFrame) -> DMatrix<f64> {
        // V = V^c + V^e with V^e linearised through the spline of F^e: only its
        // curvature enters, exactly −dF^e/dθ on the diagonal.
        let n = frame.theta.len();
        let h = 1e-4 * TWO_PI / n as f64;
        let e = |th: &[f64]| l.coulomb_energy(th).unwrap();
        let mut m = DMatrix::zeros(n, n);
        let base = frame.theta.clone();
        for i in 0..n {
            for j in i..n {
                let mut val = 0.0;
                for (si, sj, w) in [
                    (1.0, 1.0, 1.0),
                    (1.0, -1.0, -1.0),
                    (-1.0, 1.0, -1.0),
                    (-1.0, -1.0, 1.0),
                ] {
                    let mut th = base.clone();
                    th[i] += si * h;
                    th[j] += sj * h;
                    val += w * e(&th);
                }
                m[(i, j)] = val / (4.0 * h * h);
                m[(j, i)] = m[(i, j)];
            }
        }
        if l.external_hessian {
            let slope = periodic_slopes(&frame.theta, &frame.external_force, TWO_PI);
            for i in 0..n {
                m[(i, i)] -= slope[i];
            }
        }
        m
    }

    #[test]
    fn hessian_oracle_full_coulomb_homogeneous_n8() {
        let l = Lattice::new(&homogeneous(8, Interaction::FullCoulomb)).unwrap();
        let fr = l.frame(0.0).unwrap();
        let f = l.force_matrix(&fr).unwrap().to_dense();
        let fd = fd_hessian(&l, &fr);
        assert!((&f - &fd).amax() < 1e-6 * f.amax());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn hessian_oracle_random_configs(
            n in 8usize..=16,
            vfrac in 0.6f64..0.95,
            kappa in 0.5f64..2.0,
            t in 0.0f64..1.0,
            full in any::<bool>(),
        ) {
            let cfg = RingConfig {
                n_ions: n,
                v_min_frac: vfrac,
                kappa,
                sigma: 0.3,
                gamma1: 0.1,
                gamma2: 0.1,
                interaction: if full { Interaction::FullCoulomb } else { Interaction::NearestNeighbor },
                ..RingConfig::thermality_reference()
            };
            let l = Lattice::new(&cfg).unwrap();
            let fr = l.frame(t).unwrap();
            let f = l.force_matrix(&fr).unwrap().to_dense();
            let fd = fd_hessian(&l, &fr);
            prop_assert!((&f - &fd).amax() < 1e-6 * f.amax());
            prop_assert!((&f - f.transpose()).amax() == 0.0);
        }
    }

    #[test]
    fn ramp_closure_and_endpoints() {
        let cfg = RingConfig::quench_reference(200);
        let l = Lattice::new(&cfg).unwrap();
        let Schedule::Ramp(r) = l.schedule.clone() else {
            panic!()
        };
        assert_eq!(r.v_min(-0.1).0, TWO_PI);
        assert!((r.v_min(0.0).0 - TWO_PI).abs() < 1e-15);
        let tail = (r.v_min(0.05).0 - r.v_target()) / (TWO_PI - r.v_target());
        assert!((tail - (-9.0f64).exp()).abs() < 1e-12);
        for &t in &[0.0, 0.01, 0.02, 0.05, 0.3] {
            let s = r.shape_at(t);
            assert!((s.g(1.0 - 1e-15) - TWO_PI).abs() < 1e-10);
        }
    }

    #[test]
    fn ramp_kinematics_match_finite_differences() {
        let l = Lattice::new(&RingConfig::quench_reference(64)).unwrap();
        let t = 0.021;
        let h = 1e-6;
        let (a, b, c) = (
            l.frame(t - h).unwrap(),
            l.frame(t).unwrap(),
            l.frame(t + h).unwrap(),
        );
        for i in 0..64 {
            let v = (c.theta[i] - a.theta[i]) / (2.0 * h);
            let acc = (c.theta[i] - 2.0 * b.theta[i] + a.theta[i]) / (h * h);
            assert!((v - b.theta_dot[i]).abs() < 1e-6 * b.theta_dot[i].abs().max(1.0));
            assert!(
                (acc - b.theta_ddot[i]).abs()
                    < 1e-2 * b.theta_ddot.iter().fold(1.0f64, |m, x| m.max(x.abs()))
            );
        }
    }

    #[test]
    fn nn_reference_dispersion_is_sine_law() {
        let r = ReferenceRing::new(100, 1.2591, 5.0 / 6.0, Interaction::NearestNeighbor);
        let k1 = r.nearest_neighbor_stiffness();
        for n in 0..=50 {
            let w = r.omega(TWO_PI * n as f64);
            let exact = 2.0 * (k1 / M_EFF).sqrt() * (PI * n as f64 / 100.0).sin().abs();
            assert!((w - exact).abs() < 1e-10 * exact.max(1.0));
        }
    }

    #[test]
    fn group_velocity_matches_finite_difference() {
        for inter in [Interaction::NearestNeighbor, Interaction::FullCoulomb] {
            let r = ReferenceRing::new(200, 1.2591, 5.0 / 6.0, inter);
            for &k in &[7.0, 60.0, 500.0, 1200.0] {
                let h = 1e-4;
                let fd = (r.omega(k + h) - r.omega(k - h)) / (2.0 * h);
                assert!((r.group_velocity(k) - fd).abs() < 1e-6 * fd.abs());
            }
        }
    }
}
