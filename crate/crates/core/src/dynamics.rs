//! Symplectic evolution of the linearised phonon dynamics.
//!
//! Equations of motion `δθ̇ = p/m_eff`, `ṗ = −f(t)·δθ`, integrated with a
//! drift-kick-drift leapfrog whose kick uses `f` at the step midpoint. The
//! step is `Δt = T/(N·n_sub)` and may be negative.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{ForceMatrix, Lattice, M_EFF};

/// Provides `f(t)·y` for the integrator.
pub trait ForceSource: Send + Sync {
    fn n(&self) -> usize;
    /// `out = f(t)·y` for a block of column vectors.
    fn apply(&self, t: f64, y: &DMatrix<f64>, out: &mut DMatrix<f64>) -> Result<()>;
}

/// Assembles the force matrix afresh at every call; used for ramps.
pub struct DirectSource<'a> {
    pub lattice: &'a Lattice,
}

impl ForceSource for DirectSource<'_> {
    fn n(&self) -> usize {
        self.lattice.n_ions
    }

    fn apply(&self, t: f64, y: &DMatrix<f64>, out: &mut DMatrix<f64>) -> Result<()> {
        self.lattice.force_matrix_at(t)?.apply(y, 0, out);
        Ok(())
    }
}

/// Force matrices of a static profile at the `n_sub` step midpoints of one
/// ion period `T/N`, reused at every later period through index shifts.
pub struct StaticForceCache<'a> {
    lattice: &'a Lattice,
    n_sub: usize,
    t_ref: f64,
    h: f64,
    phases: Vec<ForceMatrix>,
}

impl<'a> StaticForceCache<'a> {
    pub fn new(lattice: &'a Lattice, n_sub: usize, t_ref: f64) -> Result<Self> {
        if !lattice.schedule.is_static() {
            return Err(Error::Schedule(
                "force cache requires a static profile".into(),
            ));
        }
        let h = 1.0 / (lattice.n_ions * n_sub) as f64;
        let build = |j: usize| lattice.force_matrix_at(t_ref + (j as f64 + 0.5) * h);
        #[cfg(feature = "parallel")]
        let phases = {
            use rayon::prelude::*;
            (0..n_sub)
                .into_par_iter()
                .map(build)
                .collect::<Result<Vec<_>>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let phases = (0..n_sub).map(build).collect::<Result<Vec<_>>>()?;
        Ok(StaticForceCache {
            lattice,
            n_sub,
            t_ref,
            h,
            phases,
        })
    }

    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    /// `(phase, shift)` when `t` is a cached midpoint.
    fn locate(&self, t: f64) -> Option<(usize, isize)> {
        let s = (t - self.t_ref) / self.h - 0.5;
        let k = s.round();
        if (s - k).abs() > 1e-6 {
            return None;
        }
        let k = k as i64;
        let n_sub = self.n_sub as i64;
        Some((k.rem_euclid(n_sub) as usize, k.div_euclid(n_sub) as isize))
    }
}

impl ForceSource for StaticForceCache<'_> {
    fn n(&self) -> usize {
        self.lattice.n_ions
    }

    fn apply(&self, t: f64, y: &DMatrix<f64>, out: &mut DMatrix<f64>) -> Result<()> {
        match self.locate(t) {
            Some((j, shift)) => self.phases[j].apply(y, shift, out),
            None => {
                log::debug!("force cache miss at t = {t}");
                self.lattice.force_matrix_at(t)?.apply(y, 0, out)
            }
        }
        Ok(())
    }
}

/// Zero force; free drift.
pub struct FreeSource {
    pub n: usize,
}

impl ForceSource for FreeSource {
    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, _t: f64, _y: &DMatrix<f64>, out: &mut DMatrix<f64>) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }
}

/// A constant force matrix.
pub struct FixedSource(pub ForceMatrix);

impl ForceSource for FixedSource {
    fn n(&self) -> usize {
        self.0.n()
    }

    fn apply(&self, _t: f64, y: &DMatrix<f64>, out: &mut DMatrix<f64>) -> Result<()> {
        self.0.apply(y, 0, out);
        Ok(())
    }
}

/// Displacements and momenta of one or more phase-space vectors, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBlock {
    pub t: f64,
    pub q: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl PhaseBlock {
    pub fn identity(n: usize, t: f64) -> Self {
        let id = DMatrix::<f64>::identity(2 * n, 2 * n);
        PhaseBlock::from_stacked(&id, t)
    }

    /// Splits a `2N × c` matrix whose top half is `δθ` and bottom half `p`.
    pub fn from_stacked(m: &DMatrix<f64>, t: f64) -> Self {
        let n = m.nrows() / 2;
        PhaseBlock {
            t,
            q: m.rows(0, n).into_owned(),
            p: m.rows(n, n).into_owned(),
        }
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        let (n, c) = self.q.shape();
        let mut m = DMatrix::zeros(2 * n, c);
        m.rows_mut(0, n).copy_from(&self.q);
        m.rows_mut(n, n).copy_from(&self.p);
        m
    }
}

/// A single phase vector `(δθ₁…δθ_N, p₁…p_N)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    pub t: f64,
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhaseVector {
    pub fn new(t: f64, q: DVector<f64>, p: DVector<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Domain("δθ and p lengths differ".into()));
        }
        if q.iter().chain(p.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Domain("phase vector has non-finite entries".into()));
        }
        Ok(PhaseVector { t, q, p })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(2 * n, |i, _| if i < n { self.q[i] } else { self.p[i - n] })
    }

    pub fn norm(&self) -> f64 {
        (self.q.norm_squared() + self.p.norm_squared()).sqrt()
    }

    fn into_block(self) -> PhaseBlock {
        let n = self.n();
        PhaseBlock {
            t: self.t,
            q: DMatrix::from_column_slice(n, 1, self.q.as_slice()),
            p: DMatrix::from_column_slice(n, 1, self.p.as_slice()),
        }
    }

    fn from_block(b: PhaseBlock) -> Self {
        PhaseVector {
            t: b.t,
            q: b.q.column(0).into_owned(),
            p: b.p.column(0).into_owned(),
        }
    }
}

/// Leapfrog driver bound to a force source.
pub struct Integrator<'a> {
    source: &'a dyn ForceSource,
    n_sub: usize,
    finite_check_every: usize,
}

impl<'a> Integrator<'a> {
    pub fn new(source: &'a dyn ForceSource, n_sub: usize) -> Self {
        Integrator {
            source,
            n_sub: n_sub.max(1),
            finite_check_every: 64,
        }
    }

    /// Nominal step magnitude `T/(N·n_sub)`.
    pub fn step(&self) -> f64 {
        1.0 / (self.source.n() * self.n_sub) as f64
    }

    fn plan(&self, t0: f64, t1: f64) -> (usize, f64) {
        let dt = t1 - t0;
        let h = self.step();
        if dt == 0.0 {
            return (0, 0.0);
        }
        let steps = (dt.abs() / h).round().max(1.0);
        if ((steps * h) - dt.abs()).abs() > 1e-9 * h {
            let steps = (dt.abs() / h).ceil();
            return (steps as usize, dt / steps);
        }
        (steps as usize, dt / steps)
    }

    /// Evolves every column of `block` to `t1`, forwards or backwards.
    pub fn evolve_block(&self, block: &mut PhaseBlock, t1: f64) -> Result<()> {
        let t0 = block.t;
        let (steps, h) = self.plan(t0, t1);
        let half = 0.5 * h / M_EFF;
        let mut fq = DMatrix::zeros(block.q.nrows(), block.q.ncols());
        for k in 0..steps {
            let t_mid = t0 + (k as f64 + 0.5) * h;
            axpy(&mut block.q, half, &block.p);
            self.source.apply(t_mid, &block.q, &mut fq)?;
            axpy(&mut block.p, -h, &fq);
            axpy(&mut block.q, half, &block.p);
            let check = (k + 1) % self.finite_check_every == 0 || k + 1 == steps;
            if check && (!all_finite(&block.q) || !all_finite(&block.p)) {
                return Err(Error::Divergence {
                    time: t0 + (k + 1) as f64 * h,
                });
            }
        }
        block.t = t1;
        Ok(())
    }

    pub fn evolve_phase(&self, state: &PhaseVector, t1: f64) -> Result<PhaseVector> {
        let mut b = state.clone().into_block();
        self.evolve_block(&mut b, t1)?;
        Ok(PhaseVector::from_block(b))
    }

    /// Evolves and records the state at each of `times` (in the order given).
    pub fn trajectory(&self, state: &PhaseVector, times: &[f64]) -> Result<Vec<PhaseVector>> {
        let mut b = state.clone().into_block();
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            self.evolve_block(&mut b, t)?;
            out.push(PhaseVector::from_block(b.clone()));
        }
        Ok(out)
    }

    pub fn transfer_matrix(&self, t0: f64, t1: f64) -> Result<TransferMatrix> {
        let mut b = PhaseBlock::identity(self.source.n(), t0);
        self.evolve_block(&mut b, t1)?;
        Ok(TransferMatrix {
            t0,
            t1,
            m: b.stacked(),
        })
    }

    pub fn evolve_covariance(&self, state: &GaussianState, t1: f64) -> Result<GaussianState> {
        let tm = self.transfer_matrix(state.t, t1)?;
        Ok(state.transformed(&tm))
    }
}

/// `y += a·x`.
fn axpy(y: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    y.as_mut_slice()
        .iter_mut()
        .zip(x.as_slice())
        .for_each(|(y, x)| *y += a * x);
}

fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Standard symplectic form `J = [[0, I], [−I, 0]]`.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub t0: f64,
    pub t1: f64,
    pub m: DMatrix<f64>,
}

impl TransferMatrix {
    /// `‖MᵀJM − J‖_max`.
    pub fn symplectic_defect(&self) -> f64 {
        let n = self.m.nrows() / 2;
        let j = symplectic_form(n);
        (self.m.transpose() * &j * &self.m - j).amax()
    }

    /// `self ∘ earlier`, mapping `earlier.t0` to `self.t1`.
    pub fn after(&self, earlier: &TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            t0: earlier.t0,
            t1: self.t1,
            m: &self.m * &earlier.m,
        }
    }
}

/// Quasi-free state: mean phase vector plus covariance
/// `Γ_ab = ½⟨{ξ_a − ⟨ξ_a⟩, ξ_b − ⟨ξ_b⟩}⟩`, `ξ = (δθ, p)`.
#[derive(Debug, Clone)]
pub struct GaussianState {
    pub t: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Canonical `ħ` for the `(δθ, p)` pair, equal to `m_eff·ħ̃`.
    pub hbar: f64,
}

impl GaussianState {
    pub fn n(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn transformed(&self, tm: &TransferMatrix) -> GaussianState {
        let cov = &tm.m * &self.cov * tm.m.transpose();
        GaussianState {
            t: tm.t1,
            mean: &tm.m * &self.mean,
            cov: 0.5 * (&cov + cov.transpose()),
            hbar: self.hbar,
        }
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(&self.cov)
    }

    /// Fails unless every symplectic eigenvalue is at least `ħ/2` within `tol·ħ`.
    pub fn check_uncertainty(&self, tol: f64) -> Result<()> {
        let nu = self.symplectic_eigenvalues()?;
        let min = nu.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < 0.5 * self.hbar - tol * self.hbar {
            return Err(Error::InvalidState(format!(
                "smallest symplectic eigenvalue {min:e} below ħ/2 = {:e}",
                0.5 * self.hbar
            )));
        }
        Ok(())
    }
}

/// Symplectic eigenvalues `ν_j` (ascending) of a positive-definite `2n × 2n` matrix.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = cov.nrows() / 2;
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidState("covariance is not positive definite".into()))?;
    let l = chol.l();
    let j = symplectic_form(n);
    let a = l.transpose() * &j * &l;
    let sym = a.transpose() * &a;
    let sym = 0.5 * (&sym + sym.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .map(|x| x.max(0.0).sqrt())
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ev.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// Full-period monodromy eigenvalues as `(re, im)`.
    pub eigenvalues: Vec<(f64, f64)>,
    pub max_modulus: f64,
    pub classification: Stability,
    /// `log|λ_max|/T`, zero when stable.
    pub growth_rate: f64,
    /// `max_λ min_μ |1/λ* − μ|` over the spectrum.
    pub pairing_defect: f64,
    /// True when the uniform translation subspace was split off.
    pub deflated: bool,
    pub n_sub: usize,
    pub diagnostic: Option<String>,
}

pub const STABILITY_TOL: f64 = 1e-6;

/// Floquet classification of a static profile from one ion period and the
/// index shift: `M(T) = (S⁻¹Φ(T/N, 0))^N`.
pub fn monodromy_stability(lattice: &Lattice, n_sub: usize) -> Result<StabilityReport> {
    let n = lattice.n_ions;
    let cache = StaticForceCache::new(lattice, n_sub, 0.0)?;
    let integ = Integrator::new(&cache, n_sub);
    let phi = match integ.transfer_matrix(0.0, 1.0 / n as f64) {
        Ok(tm) => tm.m,
        Err(Error::Divergence { time }) => {
            return Ok(StabilityReport {
                eigenvalues: Vec::new(),
                max_modulus: f64::INFINITY,
                classification: Stability::Unstable,
                growth_rate: f64::INFINITY,
                pairing_defect: f64::NAN,
                deflated: false,
                n_sub,
                diagnostic: Some(format!(
                    "diverged at t = {time} while building the monodromy"
                )),
            })
        }
        Err(e) => return Err(e),
    };
    // B = S⁻¹Φ with (S⁻¹z)_i = z_{i−1} in each block
    let b = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let (blk, i) = (r / n, r % n);
        phi[(blk * n + (i + n - 1) % n, c)]
    });

    let f0 = lattice.force_matrix_at(0.5 / (n * n_sub) as f64)?;
    let scale = f0.diagonal().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let translation_invariant = (0..n)
        .map(|i| (0..n).map(|j| f0.get(i, j)).sum::<f64>().abs())
        .fold(0.0, f64::max)
        < 1e-9 * scale;

    // p scaled by 1/(m_eff·ω) so both blocks are of comparable size
    let omega = (scale / M_EFF).sqrt().max(1.0);
    let alpha = 1.0 / (M_EFF * omega);
    let mut bal = b;
    for r in 0..2 * n {
        for c in 0..2 * n {
            let (rp, cp) = (r >= n, c >= n);
            if rp && !cp {
                bal[(r, c)] *= alpha;
            } else if cp && !rp {
                bal[(r, c)] /= alpha;
            }
        }
    }

    let (reduced, deflated) = if translation_invariant {
        (deflate_uniform(&bal, n), true)
    } else {
        (bal, false)
    };
    let mu = reduced.complex_eigenvalues();
    let mut lambdas: Vec<Complex64> = mu.iter().map(|m| m.powu(n as u32)).collect();
    if deflated {
        lambdas.push(Complex64::new(1.0, 0.0));
        lambdas.push(Complex64::new(1.0, 0.0));
    }
    let max_modulus = lambdas.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let pairing_defect = lambdas
        .iter()
        .map(|l| {
            let target = 1.0 / l.conj();
            lambdas
                .iter()
                .map(|m| (m - target).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let stable = max_modulus <= 1.0 + STABILITY_TOL;
    Ok(StabilityReport {
        eigenvalues: lambdas.iter().map(|l| (l.re, l.im)).collect(),
        max_modulus,
        classification: if stable {
            Stability::Stable
        } else {
            Stability::Unstable
        },
        growth_rate: if stable { 0.0 } else { max_modulus.ln() },
        pairing_defect,
        deflated,
        n_sub,
        diagnostic: None,
    })
}

/// Restriction of `b` to the complement of the uniform vectors in each block,
/// through the Householder reflection taking `e₀` to `1/√N`.
fn deflate_uniform(b: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let s = 1.0 / (n as f64).sqrt();
    let mut w = DVector::from_element(n, s);
    w[0] -= 1.0;
    let wn = w.norm_squared();
    // H = I − 2wwᵀ/|w|², applied blockwise on both sides
    let mut hb = b.clone();
    for blk in 0..2 {
        let mut rows = hb.rows_mut(blk * n, n);
        let proj = w.transpose() * &rows;
        rows -= (2.0 / wn) * &w * proj;
    }
    for blk in 0..2 {
        let mut cols = hb.columns_mut(blk * n, n);
        let proj = &cols * &w;
        cols -= (2.0 / wn) * proj * w.transpose();
    }
    let keep: Vec<usize> = (0..2 * n).filter(|&r| r % n != 0).collect();
    DMatrix::from_fn(keep.len(), keep.len(), |r, c| hb[(keep[r], keep[c])])
}

/// Quadratic energy `pᵀp/2m + ½δθᵀfδθ`.
pub fn energy(f: &ForceMatrix, state: &PhaseVector) -> f64 {
    let n = state.n();
    let q = DMatrix::from_column_slice(n, 1, state.q.as_slice());
    let mut fq = DMatrix::zeros(n, 1);
    f.apply(&q, 0, &mut fq);
    0.5 * state.p.norm_squared() / M_EFF + 0.5 * state.q.dot(&fq.column(0))
}

/// Invariant of the drift-kick-drift map for constant `f` and step `h`:
/// `pᵀ(I − h²f/4m)p/2m + ½δθᵀfδθ`.
pub fn shadow_energy(f: &ForceMatrix, state: &PhaseVector, h: f64) -> f64 {
    let n = state.n();
    let p = DMatrix::from_column_slice(n, 1, state.p.as_slice());
    let mut fp = DMatrix::zeros(n, 1);
    f.apply(&p, 0, &mut fp);
    energy(f, state) - h * h / (8.0 * M_EFF * M_EFF) * state.p.dot(&fp.column(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Interaction, RingConfig};
    use crate::lattice::ReferenceRing;
    use std::f64::consts::PI;

    fn baseline(n: usize) -> RingConfig {
        RingConfig {
            n_ions: n,
            ..RingConfig::thermality_reference()
        }
    }

    fn homogeneous(n: usize, interaction: Interaction) -> RingConfig {
        RingConfig {
            v_min_frac: 1.0,
            interaction,
            ..baseline(n)
        }
    }

    fn pseudo_random(n: usize, seed: u64) -> DVector<f64> {
        let mut x = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        DVector::from_fn(n, |_, _| {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn free_drift() {
        let src = FreeSource { n: 5 };
        let integ = Integrator::new(&src, 3);
        let q = pseudo_random(5, 1);
        let p = pseudo_random(5, 2);
        let s = PhaseVector::new(0.0, q.clone(), p.clone()).unwrap();
        let out = integ.evolve_phase(&s, 0.8).unwrap();
        let expect = &q + &p * (0.8 / M_EFF);
        assert!((out.q - expect).amax() < 1e-12);
        assert_eq!(out.p, p);
    }

    #[test]
    fn cache_matches_direct_assembly() {
        let l = Lattice::new(&baseline(60)).unwrap();
        let cache = StaticForceCache::new(&l, 7, 0.0).unwrap();
        let direct = DirectSource { lattice: &l };
        let y = DMatrix::from_fn(60, 2, |i, c| ((i + 3 * c) % 5) as f64);
        let (mut a, mut b) = (DMatrix::zeros(60, 2), DMatrix::zeros(60, 2));
        let h = 1.0 / (60.0 * 7.0);
        for k in [-200i64, -1, 0, 3, 7, 400, 4321] {
            let t = (k as f64 + 0.5) * h;
            cache.apply(t, &y, &mut a).unwrap();
            direct.apply(t, &y, &mut b).unwrap();
            assert!((&a - &b).amax() < 1e-9 * b.amax(), "k = {k}");
        }
    }

    #[test]
    fn single_mode_oscillates_at_circulant_frequency() {
        let n = 64;
        let l = Lattice::new(&homogeneous(n, Interaction::NearestNeighbor)).unwrap();
        let cache = StaticForceCache::new(&l, 40, 0.0).unwrap();
        let integ = Integrator::new(&cache, 40);
        let ring = ReferenceRing::new(n, l.kappa, 1.0, Interaction::NearestNeighbor);
        let mode = 3.0;
        let w = ring.omega(2.0 * PI * mode);
        let h = integ.step();
        // map-consistent frequency of the leapfrog orbit
        let wbar = 2.0 / h * (0.5 * w * h).asin();
        let q0 = DVector::from_fn(n, |i, _| (2.0 * PI * mode * i as f64 / n as f64).cos());
        let s = PhaseVector::new(0.0, q0.clone(), DVector::zeros(n)).unwrap();
        let t_end = (10.0 * 2.0 * PI / w * n as f64).round() / n as f64;
        let out = integ.evolve_phase(&s, t_end).unwrap();
        let expect_q = &q0 * (wbar * t_end).cos();
        let expect_p =
            &q0 * (-M_EFF * w * (wbar * t_end).sin() / (1.0 - 0.25 * (w * h).powi(2)).sqrt());
        assert!((&out.q - expect_q).amax() < 1e-6);
        assert!((&out.p - expect_p).amax() / (M_EFF * w) < 1e-6);
        let amp = (out.q.norm_squared() + out.p.norm_squared() / (M_EFF * w).powi(2)).sqrt();
        assert!((amp / q0.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn homogeneous_energy_is_conserved() {
        let n = 48;
        let l = Lattice::new(&homogeneous(n, Interaction::FullCoulomb)).unwrap();
        let f = l.force_matrix_at(0.0).unwrap();
        let n_sub = l.default_n_sub();
        let cache = StaticForceCache::new(&l, n_sub, 0.0).unwrap();
        let integ = Integrator::new(&cache, n_sub);
        let s =
            PhaseVector::new(0.0, pseudo_random(n, 3) * 1e-3, pseudo_random(n, 4) * 1e-4).unwrap();
        let e0 = shadow_energy(&f, &s, integ.step());
        let out = integ.evolve_phase(&s, 10.0).unwrap();
        let fe = l.force_matrix_at(10.0).unwrap();
        let e1 = shadow_energy(&fe, &out, integ.step());
        assert!((e1 - e0).abs() / e0 < 1e-8, "{e0} {e1}");
    }

    #[test]
    fn round_trip_is_reversible() {
        let n = 100;
        let l = Lattice::new(&baseline(n)).unwrap();
        let n_sub = l.default_n_sub();
        let cache = StaticForceCache::new(&l, n_sub, 0.0).unwrap();
        let integ = Integrator::new(&cache, n_sub);
        let s = PhaseVector::new(0.0, pseudo_random(n, 5), pseudo_random(n, 6) * 0.01).unwrap();
        let back = integ.evolve_phase(&s, -0.67).unwrap();
        let fwd = integ.evolve_phase(&back, 0.0).unwrap();
        let dev = (fwd.stacked() - s.stacked()).amax();
        assert!(dev < 1e-7 * s.norm(), "{dev}");
    }

    #[test]
    fn transfer_matrix_identity_and_composition() {
        let n = 20;
        let l = Lattice::new(&baseline(n)).unwrap();
        let cache = StaticForceCache::new(&l, 8, 0.0).unwrap();
        let integ = Integrator::new(&cache, 8);
        let id = integ.transfer_matrix(0.3, 0.3).unwrap();
        assert_eq!(id.m, DMatrix::identity(2 * n, 2 * n));
        let a = integ.transfer_matrix(0.0, 0.25).unwrap();
        let b = integ.transfer_matrix(0.25, 0.6).unwrap();
        let c = integ.transfer_matrix(0.0, 0.6).unwrap();
        assert!((b.after(&a).m - &c.m).amax() < 1e-8 * c.m.amax());
        assert!(c.symplectic_defect() < 1e-8);
    }

    #[test]
    fn vacuum_symplectic_spectrum() {
        let n = 4;
        let hbar = 0.3;
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let w = 1.0 + i as f64;
            cov[(i, i)] = 0.5 * hbar / w;
            cov[(n + i, n + i)] = 0.5 * hbar * w;
        }
        let nu = symplectic_eigenvalues(&cov).unwrap();
        assert!(nu.iter().all(|v| (v - 0.5 * hbar).abs() < 1e-12));
    }

    #[test]
    fn monodromy_from_shift_matches_full_period() {
        let n = 16;
        let cfg = RingConfig {
            sigma: 0.3,
            gamma1: 0.1,
            gamma2: 0.1,
            ..baseline(n)
        };
        let l = Lattice::new(&cfg).unwrap();
        let n_sub = 12;
        let cache = StaticForceCache::new(&l, n_sub, 0.0).unwrap();
        let integ = Integrator::new(&cache, n_sub);
        let full = integ.transfer_matrix(0.0, 1.0).unwrap().m;
        let rep = monodromy_stability(&l, n_sub).unwrap();
        let mut direct: Vec<f64> = full
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .collect();
        let mut viashift: Vec<f64> = rep.eigenvalues.iter().map(|(r, i)| r.hypot(*i)).collect();
        direct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        viashift.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in direct.iter().zip(&viashift) {
            assert!((a - b).abs() < 1e-6 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn homogeneous_ring_is_stable_on_the_unit_circle() {
        let l = Lattice::new(&homogeneous(32, Interaction::NearestNeighbor)).unwrap();
        let rep = monodromy_stability(&l, l.default_n_sub()).unwrap();
        assert!(rep.deflated);
        assert_eq!(rep.classification, Stability::Stable);
        for (re, im) in rep.eigenvalues {
            assert!((re.hypot(im) - 1.0).abs() < 1e-8);
        }
    }
}
