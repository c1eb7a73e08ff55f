//! Mapping between natural units (`m = L = T = 1`) and SI.

use serde::Serialize;

const HBAR: f64 = 1.054_571_817e-34;
const K_B: f64 = 1.380_649e-23;
const E_CHARGE: f64 = 1.602_176_634e-19;
const EPS0: f64 = 8.854_187_812_8e-12;
const AMU: f64 = 1.660_539_066_60e-27;

/// Physical ring: ion species, spacing and rotation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Physical {
    pub n_ions: usize,
    pub mass_amu: f64,
    pub charge: f64,
    /// Mean ion spacing `L/N` in metres.
    pub spacing_m: f64,
    /// Rotation frequency `1/T` in hertz.
    pub rotation_hz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitMap {
    pub input: Physical,
    pub mass_kg: f64,
    pub circumference_m: f64,
    pub ring_radius_m: f64,
    pub period_s: f64,
    /// Energy unit `mL²/T²` in joules.
    pub energy_unit_j: f64,
    /// `ħ̃ = ħ·T·(2π/L)²/m`.
    pub hbar_tilde: f64,
    /// `κ̃ = 2N·(Z²e²/4πε₀)·T²/(mL³)`.
    pub kappa_tilde: f64,
    /// `k_B T_H` in kelvin for the given `T_H·T`, if any.
    pub hawking_temperature_k: Option<f64>,
    pub hawking_temperature_natural: Option<f64>,
}

impl Physical {
    /// Singly charged ⁹Be, 10 µm spacing, rotating at 5.5 kHz.
    #[cfg(test)]
    pub fn beryllium(n_ions: usize) -> Self {
        Physical {
            n_ions,
            mass_amu: 9.012_183,
            charge: 1.0,
            spacing_m: 10e-6,
            rotation_hz: 5.5e3,
        }
    }

    pub fn map(&self, hawking_natural: Option<f64>) -> UnitMap {
        let m = self.mass_amu * AMU;
        let l = self.n_ions as f64 * self.spacing_m;
        let t = 1.0 / self.rotation_hz;
        let two_pi = 2.0 * std::f64::consts::PI;
        let coulomb = (self.charge * E_CHARGE).powi(2) / (4.0 * std::f64::consts::PI * EPS0);
        UnitMap {
            input: *self,
            mass_kg: m,
            circumference_m: l,
            ring_radius_m: l / two_pi,
            period_s: t,
            energy_unit_j: m * l * l / (t * t),
            hbar_tilde: HBAR * t * (two_pi / l).powi(2) / m,
            kappa_tilde: 2.0 * self.n_ions as f64 * coulomb * t * t / (m * l.powi(3)),
            hawking_temperature_k: hawking_natural.map(|th| th * HBAR / (K_B * t)),
            hawking_temperature_natural: hawking_natural,
        }
    }
}
