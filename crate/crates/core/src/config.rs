//! Run configuration: a flat `key = value` text format.
//!
//! All quantities are nondimensional. Natural units are ion mass `m = 1`,
//! ring circumference `L = 1` and rotation period `T = 1`; angles run over
//! `[0, 2π)` and ion labels `x = i/N` over `[0, 1)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Which Coulomb pairs enter the potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interaction {
    NearestNeighbor,
    FullCoulomb,
}

impl Interaction {
    pub fn as_str(self) -> &'static str {
        match self {
            Interaction::NearestNeighbor => "nearest-neighbor",
            Interaction::FullCoulomb => "full-coulomb",
        }
    }
}

impl std::str::FromStr for Interaction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "nearest-neighbor" | "nn" => Ok(Interaction::NearestNeighbor),
            "full-coulomb" | "coulomb" => Ok(Interaction::FullCoulomb),
            other => Err(format!(
                "expected `nearest-neighbor` or `full-coulomb`, got `{other}`"
            )),
        }
    }
}

/// Quench that lowers the subsonic velocity from the homogeneous value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RampSchedule {
    /// Quench duration in units of `T`.
    pub tau: f64,
    /// Final `v_min·T/2π`.
    pub target_v_min_frac: f64,
}

/// Final-pulse settings for the backward thermality run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseSettings {
    /// Central mode index of the Gaussian, `1..=20`.
    pub s: u32,
    /// Label position of the pulse at `t = 0`; chosen automatically if absent.
    pub center: Option<f64>,
    /// Gaussian width in modes; the default is 20 (a width of `40π` in `k`).
    pub width_override: Option<f64>,
}

impl Default for PulseSettings {
    fn default() -> Self {
        PulseSettings {
            s: 5,
            center: None,
            width_override: None,
        }
    }
}

pub const DEFAULT_PULSE_WIDTH_MODES: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingConfig {
    pub n_ions: usize,
    /// `κ̃` in `e²/4πε₀ = κ̃/(2N) · mL³T⁻²`.
    pub kappa: f64,
    /// `v_min·T/2π`.
    pub v_min_frac: f64,
    pub sigma: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// `ħ̃ = ħ·T·(2π/L)²/m`.
    pub hbar: f64,
    pub interaction: Interaction,
    /// Integrator substeps per ion period `T/N`; derived from the spectrum if absent.
    pub n_sub: Option<usize>,
    pub ramp: Option<RampSchedule>,
    pub pulse: PulseSettings,
    /// Negativity region width as a fraction of `N`, per side of the horizon.
    pub regions_width_frac: f64,
    /// Output (or analysis) times in units of `T`.
    pub times: Vec<f64>,
}

const KEYS: &[&str] = &[
    "n_ions",
    "kappa",
    "v_min_frac",
    "sigma",
    "gamma1",
    "gamma2",
    "hbar",
    "interaction",
    "n_sub",
    "ramp.tau",
    "ramp.target_v_min_frac",
    "pulse.s",
    "pulse.center",
    "pulse.width_override",
    "regions.width_frac",
    "times",
];

const REQUIRED: &[&str] = &[
    "n_ions",
    "kappa",
    "v_min_frac",
    "sigma",
    "gamma1",
    "gamma2",
    "interaction",
];

impl RingConfig {
    /// The headline backward-propagation setup: `N = 1000`, nearest
    /// neighbours, `κ̃ = 1.2591`, `σ·v_min·T = 2π × 0.375`.
    pub fn thermality_reference() -> Self {
        RingConfig {
            n_ions: 1000,
            kappa: 1.2591,
            v_min_frac: 5.0 / 6.0,
            sigma: 0.45,
            gamma1: 0.02,
            gamma2: 0.05,
            hbar: 1.0,
            interaction: Interaction::NearestNeighbor,
            n_sub: None,
            ramp: None,
            pulse: PulseSettings::default(),
            regions_width_frac: 0.05,
            times: vec![-0.67],
        }
    }

    /// The quench setup behind the correlation maps: `σ·v_min·T = 2π × 0.25`,
    /// `τ = 0.05 T`, nearest neighbours with `κ̃ = 1.127`.
    pub fn quench_reference(n_ions: usize) -> Self {
        RingConfig {
            n_ions,
            kappa: 1.127,
            v_min_frac: 5.0 / 6.0,
            sigma: 0.3,
            gamma1: 0.02,
            gamma2: 0.05,
            hbar: 1.0,
            interaction: Interaction::NearestNeighbor,
            n_sub: None,
            ramp: Some(RampSchedule {
                tau: 0.05,
                target_v_min_frac: 5.0 / 6.0,
            }),
            pulse: PulseSettings::default(),
            regions_width_frac: 0.05,
            times: vec![0.5],
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(line, format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::config(key, "unknown key"));
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::config(key, "duplicate key"));
            }
        }
        Self::from_entries(&entries)
    }

    /// Applies one `key=value` override on top of an existing config.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        if !KEYS.contains(&key) {
            return Err(Error::config(key, "unknown key"));
        }
        let mut entries = self.entries();
        entries.insert(key.to_string(), value.to_string());
        if value.is_empty() {
            entries.remove(key);
        }
        Self::from_entries(&entries)
    }

    fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self> {
        for key in REQUIRED {
            if !entries.contains_key(*key) {
                return Err(Error::config(key, "missing required key"));
            }
        }
        let get = |k: &str| entries.get(k).map(String::as_str);

        let ramp = match (get("ramp.tau"), get("ramp.target_v_min_frac")) {
            (None, None) => None,
            (Some(_), None) => {
                return Err(Error::config(
                    "ramp.target_v_min_frac",
                    "required when ramp.tau is set",
                ))
            }
            (None, Some(_)) => {
                return Err(Error::config(
                    "ramp.tau",
                    "required when ramp.target_v_min_frac is set",
                ))
            }
            (Some(tau), Some(target)) => Some(RampSchedule {
                tau: parse_f64("ramp.tau", tau)?,
                target_v_min_frac: parse_f64("ramp.target_v_min_frac", target)?,
            }),
        };

        let times = match get("times") {
            None | Some("") => Vec::new(),
            Some(v) => v
                .split(',')
                .map(|t| parse_f64("times", t.trim()))
                .collect::<Result<Vec<_>>>()?,
        };

        let cfg = RingConfig {
            n_ions: parse_usize("n_ions", get("n_ions").unwrap())?,
            kappa: parse_f64("kappa", get("kappa").unwrap())?,
            v_min_frac: parse_f64("v_min_frac", get("v_min_frac").unwrap())?,
            sigma: parse_f64("sigma", get("sigma").unwrap())?,
            gamma1: parse_f64("gamma1", get("gamma1").unwrap())?,
            gamma2: parse_f64("gamma2", get("gamma2").unwrap())?,
            hbar: get("hbar")
                .map(|v| parse_f64("hbar", v))
                .transpose()?
                .unwrap_or(1.0),
            interaction: get("interaction")
                .unwrap()
                .parse()
                .map_err(|e: String| Error::config("interaction", e))?,
            n_sub: get("n_sub").map(|v| parse_usize("n_sub", v)).transpose()?,
            ramp,
            pulse: PulseSettings {
                s: get("pulse.s")
                    .map(|v| parse_usize("pulse.s", v).map(|s| s as u32))
                    .transpose()?
                    .unwrap_or(5),
                center: get("pulse.center")
                    .map(|v| parse_f64("pulse.center", v))
                    .transpose()?,
                width_override: get("pulse.width_override")
                    .map(|v| parse_f64("pulse.width_override", v))
                    .transpose()?,
            },
            regions_width_frac: get("regions.width_frac")
                .map(|v| parse_f64("regions.width_frac", v))
                .transpose()?
                .unwrap_or(0.05),
            times,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every constraint, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.n_ions < 8 {
            return Err(Error::config("n_ions", "must be at least 8"));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::config("kappa", "must be positive"));
        }
        if !(self.v_min_frac > 0.0 && self.v_min_frac <= 1.0) {
            return Err(Error::config(
                "v_min_frac",
                "must lie in (0, 1]; 1 selects the homogeneous ring",
            ));
        }
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return Err(Error::config("sigma", "must lie in (0, 0.5)"));
        }
        if !(self.gamma1 > 0.0) || self.sigma - self.gamma1 <= 0.0 {
            return Err(Error::config("gamma1", "need 0 < gamma1 < sigma"));
        }
        if !(self.gamma2 > 0.0) || self.gamma2 >= self.sigma {
            return Err(Error::config("gamma2", "need 0 < gamma2 < sigma"));
        }
        if self.sigma + self.gamma1 >= 1.0 - self.sigma - self.gamma2 {
            return Err(Error::config(
                "sigma",
                "transition regions overlap: need sigma + gamma1 < 1 - sigma - gamma2",
            ));
        }
        if !(self.hbar > 0.0) {
            return Err(Error::config("hbar", "must be positive"));
        }
        if self.n_sub == Some(0) {
            return Err(Error::config("n_sub", "must be at least 1"));
        }
        if let Some(ramp) = &self.ramp {
            if !(ramp.tau > 0.0) {
                return Err(Error::config("ramp.tau", "must be positive"));
            }
            if !(ramp.target_v_min_frac > 0.0 && ramp.target_v_min_frac < 1.0) {
                return Err(Error::config(
                    "ramp.target_v_min_frac",
                    "must lie in (0, 1)",
                ));
            }
        }
        if !(1..=20).contains(&self.pulse.s) {
            return Err(Error::config("pulse.s", "must lie in 1..=20"));
        }
        if let Some(c) = self.pulse.center {
            if !(0.0..1.0).contains(&c) {
                return Err(Error::config("pulse.center", "must lie in [0, 1)"));
            }
        }
        if let Some(w) = self.pulse.width_override {
            if !(w > 0.0) {
                return Err(Error::config("pulse.width_override", "must be positive"));
            }
        }
        if !(self.regions_width_frac > 0.0 && self.regions_width_frac < 0.5) {
            return Err(Error::config("regions.width_frac", "must lie in (0, 0.5)"));
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("times", "entries must be finite"));
        }
        Ok(())
    }

    fn entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("n_ions", self.n_ions.to_string());
        put("kappa", self.kappa.to_string());
        put("v_min_frac", self.v_min_frac.to_string());
        put("sigma", self.sigma.to_string());
        put("gamma1", self.gamma1.to_string());
        put("gamma2", self.gamma2.to_string());
        put("hbar", self.hbar.to_string());
        put("interaction", self.interaction.as_str().to_string());
        if let Some(n) = self.n_sub {
            put("n_sub", n.to_string());
        }
        if let Some(r) = &self.ramp {
            put("ramp.tau", r.tau.to_string());
            put("ramp.target_v_min_frac", r.target_v_min_frac.to_string());
        }
        put("pulse.s", self.pulse.s.to_string());
        if let Some(c) = self.pulse.center {
            put("pulse.center", c.to_string());
        }
        if let Some(w) = self.pulse.width_override {
            put("pulse.width_override", w.to_string());
        }
        put("regions.width_frac", self.regions_width_frac.to_string());
        if !self.times.is_empty() {
            let t: Vec<String> = self.times.iter().map(|t| t.to_string()).collect();
            put("times", t.join(","));
        }
        m
    }

    /// Canonical text form; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        let entries = self.entries();
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = entries.get(*key) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of [`RingConfig::emit`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.emit().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.v_min_frac == 1.0
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::config(key, format!("expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(Error::config(key, "must be finite"));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::config(key, format!("expected a non-negative integer, got `{v}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2A: &str = "\
# backward propagation setup
n_ions = 1000
kappa = 1.2591
sigma = 0.45
gamma1 = 0.02
gamma2 = 0.05
v_min_frac = 0.833333
interaction = nearest-neighbor
";

    #[test]
    fn parses_reference_file() {
        let cfg = RingConfig::parse(FIG2A).unwrap();
        assert_eq!(cfg.n_ions, 1000);
        assert_eq!(cfg.interaction, Interaction::NearestNeighbor);
        assert_eq!(cfg.hbar, 1.0);
        assert!(cfg.ramp.is_none());
    }

    #[test]
    fn sigma_above_half_is_rejected() {
        let text = FIG2A.replace("sigma = 0.45", "sigma = 0.6");
        match RingConfig::parse(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "sigma"),
            other => panic!("expected sigma error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{FIG2A}foo = 3\n");
        match RingConfig::parse(&text) {
            Err(Error::Config { key, msg }) => {
                assert_eq!(key, "foo");
                assert!(msg.contains("unknown"));
            }
            other => panic!("expected unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn missing_and_mistyped_keys() {
        let text = FIG2A.replace("kappa = 1.2591\n", "");
        assert!(
            matches!(RingConfig::parse(&text), Err(Error::Config { key, .. }) if key == "kappa")
        );
        let text = FIG2A.replace("n_ions = 1000", "n_ions = many");
        assert!(
            matches!(RingConfig::parse(&text), Err(Error::Config { key, .. }) if key == "n_ions")
        );
        let text = format!("{FIG2A}ramp.tau = 0.05\n");
        assert!(matches!(
            RingConfig::parse(&text),
            Err(Error::Config { key, .. }) if key == "ramp.target_v_min_frac"
        ));
    }

    #[test]
    fn emit_round_trips() {
        let mut cfg = RingConfig::quench_reference(200);
        cfg.times = vec![0.1, 0.25, 0.5];
        cfg.pulse.center = Some(0.3);
        cfg.n_sub = Some(40);
        let back = RingConfig::parse(&cfg.emit()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn override_replaces_value() {
        let cfg = RingConfig::thermality_reference();
        let c2 = cfg.with_override("pulse.s", "7").unwrap();
        assert_eq!(c2.pulse.s, 7);
        assert_ne!(c2.hash(), cfg.hash());
        assert!(cfg.with_override("bogus", "1").is_err());
    }
}
