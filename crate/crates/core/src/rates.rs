//! Analytic per-Fock-state transition rates, the measurement rate, the
//! largest continuously monitorable Fock state, and the QND feasibility
//! hierarchy.
//!
//! Transition rates always use the exact Lorentzian S_NN. The sideband
//! resolved closed forms for the ground state (Γ₁ ≈ N̄g₁²κ/ω_m²,
//! Γ₂ ≈ N̄g₂²κ/8ω_m²) are reported separately and labeled as approximations.

use serde::{Deserialize, Serialize};

use crate::cavity_response::CavityResponse;
use crate::system::{cooperativities, SystemParams};

/// Default numerical meaning of "≫": A ≫ B iff A ≥ 10·B.
pub const DEFAULT_DOMINANCE: f64 = 10.0;

/// Rates out of Fock state `n`, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub n: usize,
    /// Γ_{n+1}
    pub gamma_up1: f64,
    /// Γ_{n−1}
    pub gamma_down1: f64,
    /// Γ_{n+2}
    pub gamma_up2: f64,
    /// Γ_{n−2}
    pub gamma_down2: f64,
    /// Thermal absorption Γ_m n̄_th (n+1).
    pub gamma_th_up: f64,
    /// Thermal emission Γ_m (n̄_th+1) n.
    pub gamma_th_down: f64,
    /// Γ_th = Γ_m[(n̄_th+1)n + n̄_th(n+1)]
    pub gamma_th: f64,
    pub gamma_meas: f64,
    /// Γ_{n+1} + Γ_{n−1} + Γ_{n+2} + Γ_{n−2} + Γ_th
    pub total_decoherence: f64,
}

impl RateSet {
    pub fn optical_total(&self) -> f64 {
        self.gamma_up1 + self.gamma_down1 + self.gamma_up2 + self.gamma_down2
    }
}

/// Per-state rates, Γ_{n±1} = g₁² S_NN(∓ω_m)·{n+1, n} and
/// Γ_{n±2} = (g₂²/4) S_NN(∓2ω_m)·{(n+1)(n+2), n(n−1)}.
pub fn transition_rates(params: &SystemParams, n: usize) -> RateSet {
    let resp = CavityResponse::from_params(params);
    let wm = params.omega_m;
    let g1sq = params.g1 * params.g1;
    let g2sq_4 = 0.25 * params.g2 * params.g2;
    let nf = n as f64;
    let nth = params.nbar_th();

    let gamma_up1 = (nf + 1.0) * g1sq * resp.photon_spectral_density(-wm);
    let gamma_down1 = nf * g1sq * resp.photon_spectral_density(wm);
    let gamma_up2 = (nf + 1.0) * (nf + 2.0) * g2sq_4 * resp.photon_spectral_density(-2.0 * wm);
    let gamma_down2 = if n >= 2 {
        nf * (nf - 1.0) * g2sq_4 * resp.photon_spectral_density(2.0 * wm)
    } else {
        0.0
    };
    let gamma_th_up = params.gamma_m * nth * (nf + 1.0);
    let gamma_th_down = params.gamma_m * (nth + 1.0) * nf;
    let gamma_th = gamma_th_up + gamma_th_down;

    RateSet {
        n,
        gamma_up1,
        gamma_down1,
        gamma_up2,
        gamma_down2,
        gamma_th_up,
        gamma_th_down,
        gamma_th,
        gamma_meas: measurement_rate(params),
        total_decoherence: gamma_up1 + gamma_down1 + gamma_up2 + gamma_down2 + gamma_th,
    }
}

/// Γ_meas = C̄₂Γ_m = 4N̄g₂²/κ.
pub fn measurement_rate(params: &SystemParams) -> f64 {
    4.0 * params.nbar_photon() * params.g2 * params.g2 / params.kappa
}

/// Coefficient of D[b†b] in the reduced master equation, N̄g₂²Re{χ_c(0)}.
///
/// At Δ = 0 this is half of [`measurement_rate`]. The two are separate
/// quantities and never substituted for one another.
pub fn dephasing_coefficient(params: &SystemParams) -> f64 {
    let resp = CavityResponse::from_params(params);
    params.nbar_photon() * params.g2 * params.g2 * resp.susceptibility(0.0).re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateRates {
    /// Γ_th⁰ = n̄_th Γ_m
    pub gamma_th0: f64,
    /// Exact Lorentzian 0 → 1 rate.
    pub gamma1: f64,
    /// Exact Lorentzian 0 → 2 rate.
    pub gamma2: f64,
    /// N̄g₁²κ/ω_m², only meaningful at Δ = 0.
    pub gamma1_approx: Option<f64>,
    /// N̄g₂²κ/8ω_m², only meaningful at Δ = 0.
    pub gamma2_approx: Option<f64>,
    /// Set when Δ ≠ 0: the closed forms do not apply.
    pub detuned: bool,
}

pub fn ground_state_rates(params: &SystemParams) -> GroundStateRates {
    let r0 = transition_rates(params, 0);
    let detuned = params.delta != 0.0;
    let nbar = params.nbar_photon();
    let wm2 = params.omega_m * params.omega_m;
    let (gamma1_approx, gamma2_approx) = if detuned {
        (None, None)
    } else {
        (
            Some(nbar * params.g1 * params.g1 * params.kappa / wm2),
            Some(nbar * params.g2 * params.g2 * params.kappa / (8.0 * wm2)),
        )
    };
    GroundStateRates {
        gamma_th0: params.gamma_th0(),
        gamma1: r0.gamma_up1,
        gamma2: r0.gamma_up2,
        gamma1_approx,
        gamma2_approx,
        detuned,
    }
}

/// Largest continuously monitorable Fock state, n_max = (C̄₂ − n̄_th)/(2n̄_th + 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorableBound {
    pub raw: f64,
    /// `None` when the raw value is negative: no state can be monitored.
    pub floor: Option<u64>,
}

pub fn max_monitorable_state(params: &SystemParams) -> MonitorableBound {
    let c2 = cooperativities(params).c2;
    let nth = params.nbar_th();
    let raw = (c2 - nth) / (2.0 * nth + 1.0);
    let floor = if raw >= 0.0 { Some(raw.floor() as u64) } else { None };
    MonitorableBound { raw, floor }
}

/// One "A ≫ B" test: the ratio A/B and whether it clears the dominance factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub ratio: f64,
    pub pass: bool,
}

impl Check {
    fn new(ratio: f64, dominance: f64) -> Self {
        Self {
            ratio,
            pass: ratio >= dominance,
        }
    }

    fn ratio_of(a: f64, b: f64, dominance: f64) -> Self {
        let ratio = if b == 0.0 {
            if a > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            a / b
        };
        Self::new(ratio, dominance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub n: usize,
    pub dominance: f64,
    pub n_max: MonitorableBound,
    /// Γ_meas ≫ Γ_th(n)
    pub fast_measurement: Check,
    /// Γ_th(n) ≫ Γ_{n±1}
    pub linear_coupling: Check,
    /// Γ_th(n) ≫ Γ_{n±2}
    pub quadratic_coupling: Check,
    /// 𝒞₂ ≫ 1
    pub ground_quantum_cooperativity: Check,
    /// 1 ≫ 𝒞₁κ²/4ω_m²
    pub ground_linear: Check,
    /// 1 ≫ 𝒞₂κ²/32ω_m²
    pub ground_quadratic: Check,
    /// g₂ ≫ g₁κ/2ω_m, ratio g₂·2ω_m/(g₁κ)
    pub linear_limit: Check,
    /// 32ω_m² ≫ κ²
    pub sideband: Check,
    /// Γ_meas/Γ_th⁰, the ratio used to label trajectory regimes.
    pub meas_over_th0: f64,
}

impl FeasibilityReport {
    pub fn checks(&self) -> [(&'static str, Check); 8] {
        [
            ("fast_measurement", self.fast_measurement),
            ("linear_coupling", self.linear_coupling),
            ("quadratic_coupling", self.quadratic_coupling),
            ("ground_quantum_cooperativity", self.ground_quantum_cooperativity),
            ("ground_linear", self.ground_linear),
            ("ground_quadratic", self.ground_quadratic),
            ("linear_limit", self.linear_limit),
            ("sideband", self.sideband),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.pass)
    }
}

/// Linear-coupling limit margin g₂/(g₁κ/2ω_m); infinite when g₁ = 0 and g₂ > 0.
pub fn linear_limit_margin(params: &SystemParams) -> f64 {
    let num = params.g2 * 2.0 * params.omega_m;
    let den = params.g1 * params.kappa;
    if den == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        num / den
    }
}

pub fn feasibility(params: &SystemParams, n: usize, dominance: f64) -> FeasibilityReport {
    assert!(dominance > 1.0, "dominance factor must exceed 1");
    let r = transition_rates(params, n);
    let coop = cooperativities(params);
    let sideband_ratio = params.kappa * params.kappa / (params.omega_m * params.omega_m);

    let q1 = coop.quantum_c1.value();
    let q2 = coop.quantum_c2.value();
    let ground_lin = q1 * sideband_ratio / 4.0;
    let ground_quad = q2 * sideband_ratio / 32.0;

    FeasibilityReport {
        n,
        dominance,
        n_max: max_monitorable_state(params),
        fast_measurement: Check::ratio_of(r.gamma_meas, r.gamma_th, dominance),
        linear_coupling: Check::ratio_of(r.gamma_th, r.gamma_up1.max(r.gamma_down1), dominance),
        quadratic_coupling: Check::ratio_of(r.gamma_th, r.gamma_up2.max(r.gamma_down2), dominance),
        ground_quantum_cooperativity: Check::new(q2, dominance),
        ground_linear: Check::ratio_of(1.0, ground_lin, dominance),
        ground_quadratic: Check::ratio_of(1.0, ground_quad, dominance),
        linear_limit: Check::new(linear_limit_margin(params), dominance),
        sideband: Check::new(32.0 / sideband_ratio, dominance),
        meas_over_th0: r.gamma_meas / params.gamma_th0(),
    }
}
