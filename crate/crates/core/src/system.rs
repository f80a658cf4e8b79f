//! Physical parameter model and derived scalar quantities.
//!
//! Every frequency and rate stored here is an angular frequency in rad/s.
//! Files and the command line use ordinary frequencies in Hz; the
//! conversion happens once, in [`ParamFile::resolve`].

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Reduced Planck constant, J s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (CODATA 2018, exact).
pub const K_B: f64 = 1.380_649e-23;

/// Mechanical bath, given either as a temperature or directly as an occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bath {
    Temperature(f64),
    Occupancy(f64),
}

/// Optical drive, given either as a mean intracavity photon number or as an
/// input power at a drive frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drive {
    PhotonNumber(f64),
    Power { power_w: f64, omega_d: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub kappa: f64,
    pub kappa_e: f64,
    pub delta: f64,
    pub g1: f64,
    pub g2: f64,
    pub bath: Bath,
    pub drive: Drive,
    pub mass: Option<f64>,
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter {
            key: key.into(),
            reason: format!("must be finite and > 0, got {v}"),
        })
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter {
            key: key.into(),
            reason: format!("must be finite and >= 0, got {v}"),
        })
    }
}

impl SystemParams {
    /// The 2 GHz / 500 MHz sideband-resolved benchmark: Γ_m/2π = 1 kHz,
    /// n̄_th = 0.25, Δ = 0, N̄ = 100, g₁/2π = 50 kHz, g₂/2π = 100 kHz.
    pub fn reference() -> Self {
        Self {
            omega_m: TAU * 2.0e9,
            gamma_m: TAU * 1.0e3,
            kappa: TAU * 500.0e6,
            kappa_e: TAU * 250.0e6,
            delta: 0.0,
            g1: TAU * 50.0e3,
            g2: TAU * 100.0e3,
            bath: Bath::Occupancy(0.25),
            drive: Drive::PhotonNumber(100.0),
            mass: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("omega_m", self.omega_m)?;
        positive("gamma_m", self.gamma_m)?;
        positive("kappa", self.kappa)?;
        positive("kappa_e", self.kappa_e)?;
        if self.kappa_e > self.kappa {
            return Err(Error::Parameter {
                key: "kappa_e".into(),
                reason: "external decay rate exceeds total decay rate".into(),
            });
        }
        if !self.delta.is_finite() {
            return Err(Error::Parameter {
                key: "delta".into(),
                reason: "must be finite".into(),
            });
        }
        non_negative("g1", self.g1)?;
        non_negative("g2", self.g2)?;
        match self.bath {
            Bath::Temperature(t) => positive("temperature", t)?,
            Bath::Occupancy(n) => non_negative("nbar_th", n)?,
        }
        match self.drive {
            Drive::PhotonNumber(n) => non_negative("nbar_photon", n)?,
            Drive::Power { power_w, omega_d } => {
                non_negative("power_w", power_w)?;
                positive("omega_d", omega_d)?;
            }
        }
        if let Some(m) = self.mass {
            positive("mass", m)?;
        }
        Ok(())
    }

    /// Bath occupancy n̄_th.
    pub fn nbar_th(&self) -> f64 {
        match self.bath {
            Bath::Occupancy(n) => n,
            // validated T > 0, so this cannot fail
            Bath::Temperature(t) => thermal_occupancy(self.omega_m, t).unwrap_or(0.0),
        }
    }

    /// Mean intracavity photon number N̄.
    pub fn nbar_photon(&self) -> f64 {
        mean_photon_number(self)
    }

    pub fn with_photon_number(mut self, nbar: f64) -> Self {
        self.drive = Drive::PhotonNumber(nbar);
        self
    }

    pub fn with_occupancy(mut self, nbar_th: f64) -> Self {
        self.bath = Bath::Occupancy(nbar_th);
        self
    }

    pub fn with_couplings(mut self, g1: f64, g2: f64) -> Self {
        self.g1 = g1;
        self.g2 = g2;
        self
    }

    /// Ground-state thermal decoherence rate Γ_th⁰ = n̄_th Γ_m.
    pub fn gamma_th0(&self) -> f64 {
        self.nbar_th() * self.gamma_m
    }

    pub fn zero_point_amplitude(&self) -> Result<f64> {
        let mass = self.mass.ok_or(Error::MassRequired)?;
        zero_point_amplitude(mass, self.omega_m)
    }
}

/// Bose-Einstein occupancy n̄_th = 1/(exp(ħω_m/k_B T) − 1).
pub fn thermal_occupancy(omega_m: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return domain(format!(
            "temperature must be > 0 K (got {temperature}); give nbar_th = 0 for a zero-temperature bath"
        ));
    }
    if !(omega_m > 0.0) {
        return domain("omega_m must be > 0");
    }
    let x = HBAR * omega_m / (K_B * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Inverse of [`thermal_occupancy`]: the temperature at which the bath
/// occupancy equals `nbar`.
pub fn temperature_for_occupancy(omega_m: f64, nbar: f64) -> Result<f64> {
    if !(nbar > 0.0) {
        return domain("occupancy must be > 0 to define a finite temperature");
    }
    let x = (1.0 / nbar).ln_1p();
    Ok(HBAR * omega_m / (K_B * x))
}

/// Mean intracavity photon number, N̄ = κ_e/(Δ² + (κ/2)²) · P/(ħω_d).
pub fn mean_photon_number(params: &SystemParams) -> f64 {
    match params.drive {
        Drive::PhotonNumber(n) => n,
        Drive::Power { power_w, omega_d } => photon_number_from_power(
            params.kappa,
            params.kappa_e,
            params.delta,
            power_w,
            omega_d,
        ),
    }
}

pub fn photon_number_from_power(kappa: f64, kappa_e: f64, delta: f64, power_w: f64, omega_d: f64) -> f64 {
    let half = 0.5 * kappa;
    kappa_e / (delta * delta + half * half) * power_w / (HBAR * omega_d)
}

/// Input power needed for a target photon number (inverse of the above).
pub fn power_for_photon_number(kappa: f64, kappa_e: f64, delta: f64, nbar: f64, omega_d: f64) -> f64 {
    let half = 0.5 * kappa;
    nbar * (delta * delta + half * half) * HBAR * omega_d / kappa_e
}

/// x_zpf = sqrt(ħ / 2 m ω_m).
pub fn zero_point_amplitude(mass: f64, omega_m: f64) -> Result<f64> {
    if !(mass > 0.0) {
        return domain("mass must be > 0");
    }
    if !(omega_m > 0.0) {
        return domain("omega_m must be > 0");
    }
    Ok((HBAR / (2.0 * mass * omega_m)).sqrt())
}

/// A quantum cooperativity C̄/n̄_th, which is unbounded for a zero-temperature bath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantumCooperativity {
    Finite(f64),
    Infinite,
}

impl QuantumCooperativity {
    fn new(c: f64, nbar_th: f64) -> Self {
        if nbar_th > 0.0 {
            Self::Finite(c / nbar_th)
        } else {
            Self::Infinite
        }
    }

    /// Value as f64, with the infinite case mapped to `f64::INFINITY`.
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(v) => v,
            Self::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cooperativities {
    /// C̄₁ = 4N̄g₁²/(κΓ_m)
    pub c1: f64,
    /// C̄₂ = 4N̄g₂²/(κΓ_m)
    pub c2: f64,
    pub quantum_c1: QuantumCooperativity,
    pub quantum_c2: QuantumCooperativity,
}

pub fn cooperativities(params: &SystemParams) -> Cooperativities {
    let nbar = params.nbar_photon();
    let denom = params.kappa * params.gamma_m;
    let c1 = 4.0 * nbar * params.g1 * params.g1 / denom;
    let c2 = 4.0 * nbar * params.g2 * params.g2 / denom;
    let nth = params.nbar_th();
    Cooperativities {
        c1,
        c2,
        quantum_c1: QuantumCooperativity::new(c1, nth),
        quantum_c2: QuantumCooperativity::new(c2, nth),
    }
}

/// Flat key-value parameter file. Frequencies are in Hz (the "/2π"
/// convention) and are multiplied by 2π on resolution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    pub omega_m_hz: Option<f64>,
    pub gamma_m_hz: Option<f64>,
    pub kappa_hz: Option<f64>,
    pub kappa_e_hz: Option<f64>,
    pub delta_hz: Option<f64>,
    pub g1_hz: Option<f64>,
    pub g2_hz: Option<f64>,
    pub temperature_k: Option<f64>,
    pub nbar_th: Option<f64>,
    pub nbar_photon: Option<f64>,
    pub power_w: Option<f64>,
    pub omega_d_hz: Option<f64>,
    pub mass_kg: Option<f64>,
}

/// Keys accepted in a parameter file, in canonical order.
pub const PARAM_KEYS: [&str; 13] = [
    "omega_m_hz",
    "gamma_m_hz",
    "kappa_hz",
    "kappa_e_hz",
    "delta_hz",
    "g1_hz",
    "g2_hz",
    "temperature_k",
    "nbar_th",
    "nbar_photon",
    "power_w",
    "omega_d_hz",
    "mass_kg",
];

fn required(key: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::Parameter {
        key: key.into(),
        reason: "missing required key".into(),
    })
}

fn magnitude(key: &str, v: f64) -> Result<f64> {
    if v < 0.0 {
        Err(Error::Parameter {
            key: key.into(),
            reason: format!("coupling must be >= 0 (only its magnitude enters), got {v}"),
        })
    } else {
        Ok(v)
    }
}

impl ParamFile {
    pub fn resolve(&self) -> Result<SystemParams> {
        let omega_m = TAU * required("omega_m_hz", self.omega_m_hz)?;
        let gamma_m = TAU * required("gamma_m_hz", self.gamma_m_hz)?;
        let kappa = TAU * required("kappa_hz", self.kappa_hz)?;
        // critical coupling unless overridden
        let kappa_e = self.kappa_e_hz.map(|k| TAU * k).unwrap_or(0.5 * kappa);
        let delta = TAU * required("delta_hz", self.delta_hz)?;
        let g1 = TAU * magnitude("g1_hz", required("g1_hz", self.g1_hz)?)?;
        let g2 = TAU * magnitude("g2_hz", required("g2_hz", self.g2_hz)?)?;

        let bath = match (self.temperature_k, self.nbar_th) {
            (Some(t), None) => Bath::Temperature(t),
            (None, Some(n)) => Bath::Occupancy(n),
            (Some(_), Some(_)) => {
                return Err(Error::Parameter {
                    key: "temperature_k".into(),
                    reason: "give exactly one of temperature_k, nbar_th".into(),
                })
            }
            (None, None) => {
                return Err(Error::Parameter {
                    key: "nbar_th".into(),
                    reason: "missing: give exactly one of temperature_k, nbar_th".into(),
                })
            }
        };

        let drive = match (self.nbar_photon, self.power_w, self.omega_d_hz) {
            (Some(n), None, None) => Drive::PhotonNumber(n),
            (None, Some(p), Some(f)) => Drive::Power {
                power_w: p,
                omega_d: TAU * f,
            },
            (None, Some(_), None) => {
                return Err(Error::Parameter {
                    key: "omega_d_hz".into(),
                    reason: "power_w requires omega_d_hz".into(),
                })
            }
            (None, None, Some(_)) => {
                return Err(Error::Parameter {
                    key: "power_w".into(),
                    reason: "omega_d_hz requires power_w".into(),
                })
            }
            (None, None, None) => {
                return Err(Error::Parameter {
                    key: "nbar_photon".into(),
                    reason: "missing: give nbar_photon or power_w + omega_d_hz".into(),
                })
            }
            (Some(_), _, _) => {
                return Err(Error::Parameter {
                    key: "nbar_photon".into(),
                    reason: "give either nbar_photon or power_w + omega_d_hz, not both".into(),
                })
            }
        };

        let params = SystemParams {
            omega_m,
            gamma_m,
            kappa,
            kappa_e,
            delta,
            g1,
            g2,
            bath,
            drive,
            mass: self.mass_kg,
        };
        params.validate()?;
        Ok(params)
    }

    /// Inverse of [`ParamFile::resolve`], used to write resolved parameters back out.
    pub fn from_params(p: &SystemParams) -> Self {
        let (temperature_k, nbar_th) = match p.bath {
            Bath::Temperature(t) => (Some(t), None),
            Bath::Occupancy(n) => (None, Some(n)),
        };
        let (nbar_photon, power_w, omega_d_hz) = match p.drive {
            Drive::PhotonNumber(n) => (Some(n), None, None),
            Drive::Power { power_w, omega_d } => (None, Some(power_w), Some(omega_d / TAU)),
        };
        Self {
            omega_m_hz: Some(p.omega_m / TAU),
            gamma_m_hz: Some(p.gamma_m / TAU),
            kappa_hz: Some(p.kappa / TAU),
            kappa_e_hz: Some(p.kappa_e / TAU),
            delta_hz: Some(p.delta / TAU),
            g1_hz: Some(p.g1 / TAU),
            g2_hz: Some(p.g2 / TAU),
            temperature_k,
            nbar_th,
            nbar_photon,
            power_w,
            omega_d_hz,
            mass_kg: p.mass,
        }
    }

    /// Set one key by name; used by parameter sweeps.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "omega_m_hz" => &mut self.omega_m_hz,
            "gamma_m_hz" => &mut self.gamma_m_hz,
            "kappa_hz" => &mut self.kappa_hz,
            "kappa_e_hz" => &mut self.kappa_e_hz,
            "delta_hz" => &mut self.delta_hz,
            "g1_hz" => &mut self.g1_hz,
            "g2_hz" => &mut self.g2_hz,
            "temperature_k" => &mut self.temperature_k,
            "nbar_th" => &mut self.nbar_th,
            "nbar_photon" => &mut self.nbar_photon,
            "power_w" => &mut self.power_w,
            "omega_d_hz" => &mut self.omega_d_hz,
            "mass_kg" => &mut self.mass_kg,
            _ => {
                return Err(Error::Parameter {
                    key: key.into(),
                    reason: format!("unknown key; valid keys: {}", PARAM_KEYS.join(", ")),
                })
            }
        };
        *slot = Some(value);
        Ok(())
    }
}
