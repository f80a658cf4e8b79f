//! Cavity susceptibility χ_c(ω) and photon-number spectral density S_NN(ω).
//!
//! Both are evaluated in variables scaled by κ so that extreme ratios
//! (ω_m/κ ~ 4, Γ_m/κ ~ 1e-6) do not lose precision.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::system::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityResponse {
    pub kappa: f64,
    pub delta: f64,
    pub nbar: f64,
}

impl CavityResponse {
    pub fn new(kappa: f64, delta: f64, nbar: f64) -> Self {
        debug_assert!(kappa > 0.0 && nbar >= 0.0);
        Self { kappa, delta, nbar }
    }

    pub fn from_params(p: &SystemParams) -> Self {
        Self::new(p.kappa, p.delta, p.nbar_photon())
    }

    /// χ_c(ω) = 1/(i(Δ + ω) + κ/2), in seconds.
    pub fn susceptibility(&self, omega: f64) -> Complex64 {
        let u = (omega + self.delta) / self.kappa;
        let d = u * u + 0.25;
        Complex64::new(0.5 / d, -u / d) / self.kappa
    }

    /// S_NN(ω) = N̄κ/((ω − Δ)² + (κ/2)²), in seconds.
    pub fn photon_spectral_density(&self, omega: f64) -> f64 {
        let u = (omega - self.delta) / self.kappa;
        self.nbar / (self.kappa * (u * u + 0.25))
    }
}
