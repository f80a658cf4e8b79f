//! Two optical modes coupled at rate ν plus one mechanical mode: supermode
//! basis, membrane-in-the-middle and whispering-gallery forms, quasistatic
//! branch frequencies, backscatter occupancy and the single-mode mapping.
//!
//! Operators act on a₁ ⊗ a₂ ⊗ b (or a₊ ⊗ a₋ ⊗ b) with x̂ = x_zpf(b + b†);
//! Hamiltonians are H/ħ in rad/s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{kron, ladder, FockOperator};
use crate::rates::DEFAULT_DOMINANCE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeParams {
    pub omega_1: f64,
    pub omega_2: f64,
    pub nu: f64,
    /// rad/s/m
    pub g1_a1: f64,
    pub g1_a2: f64,
    /// rad/s/m²
    pub g2_a1: f64,
    pub g2_a2: f64,
    pub kappa: f64,
    pub delta: f64,
    pub omega_m: f64,
    /// Meters.
    pub x_zpf: f64,
}

impl TwoModeParams {
    /// Degenerate membrane-in-the-middle: G₁^(a₁) = −G₁^(a₂) = G₁, no G₂.
    pub fn mim(omega_0: f64, nu: f64, g1: f64) -> Self {
        Self {
            omega_1: omega_0,
            omega_2: omega_0,
            nu,
            g1_a1: g1,
            g1_a2: -g1,
            g2_a1: 0.0,
            g2_a2: 0.0,
            kappa: 0.0,
            delta: 0.0,
            omega_m: 0.0,
            x_zpf: 0.0,
        }
    }

    /// Degenerate whispering-gallery pair with identical couplings.
    pub fn wgm(omega_0: f64, nu: f64, g1: f64, g2: f64) -> Self {
        Self {
            g1_a1: g1,
            g1_a2: g1,
            g2_a1: g2,
            g2_a2: g2,
            ..Self::mim(omega_0, nu, 0.0)
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.omega_1 == self.omega_2
    }

    /// Linear coupling that mixes the supermodes, (G₁^(a₁) − G₁^(a₂))/2.
    pub fn g1_cross(&self) -> f64 {
        0.5 * (self.g1_a1 - self.g1_a2)
    }
}

fn position(dim: usize, x_zpf: f64) -> Result<FockOperator> {
    let (b, bd, _) = ladder(dim)?;
    Ok(b.add(&bd).scale(x_zpf))
}

/// Hamiltonian in the original a₁, a₂ basis; valid for non-degenerate modes.
pub fn two_mode_hamiltonian(p: &TwoModeParams, dim: usize) -> Result<FockOperator> {
    let (a, ad, n) = ladder(dim)?;
    let (_, _, nb) = ladder(dim)?;
    let id = FockOperator::identity(dim);
    let x = position(dim, p.x_zpf)?;
    let x2 = x.mul(&x);
    let on1 = |o: &FockOperator| kron(&kron(o, &id), &id);
    let on2 = |o: &FockOperator| kron(&kron(&id, o), &id);
    let onb = |o: &FockOperator| kron(&kron(&id, &id), o);
    let n1 = on1(&n);
    let n2 = on2(&n);
    let hop = on1(&ad).mul(&on2(&a)).add(&on2(&ad).mul(&on1(&a)));
    let h = n1
        .scale(p.omega_1)
        .add(&n2.scale(p.omega_2))
        .add(&onb(&nb).scale(p.omega_m))
        .add(&hop.scale(p.nu))
        .add(&n1.scale(p.g1_a1).add(&n2.scale(p.g1_a2)).mul(&onb(&x)))
        .add(&n1.scale(0.5 * p.g2_a1).add(&n2.scale(0.5 * p.g2_a2)).mul(&onb(&x2)));
    Ok(FockOperator::new(h.mat, "H_2mode"))
}

/// Supermode form with a± = (a₁ ± a₂)/√2 and ω± = ω₀ ± ν.
pub fn supermode_hamiltonian(p: &TwoModeParams, dim: usize) -> Result<FockOperator> {
    if !p.is_degenerate() {
        return Err(Error::NonDegenerate);
    }
    let (a, ad, n) = ladder(dim)?;
    let (_, _, nb) = ladder(dim)?;
    let id = FockOperator::identity(dim);
    let x = position(dim, p.x_zpf)?;
    let x2 = x.mul(&x);
    let onp = |o: &FockOperator| kron(&kron(o, &id), &id);
    let onm = |o: &FockOperator| kron(&kron(&id, o), &id);
    let onb = |o: &FockOperator| kron(&kron(&id, &id), o);
    let (np, nm) = (onp(&n), onm(&n));
    let self_terms = np.add(&nm);
    let cross = onp(&ad).mul(&onm(&a)).add(&onm(&ad).mul(&onp(&a)));
    let w0 = p.omega_1;
    let h = np
        .scale(w0 + p.nu)
        .add(&nm.scale(w0 - p.nu))
        .add(&onb(&nb).scale(p.omega_m))
        .add(&self_terms.scale(0.5 * (p.g1_a1 + p.g1_a2)).mul(&onb(&x)))
        .add(&cross.scale(0.5 * (p.g1_a1 - p.g1_a2)).mul(&onb(&x)))
        .add(&self_terms.scale(0.25 * (p.g2_a1 + p.g2_a2)).mul(&onb(&x2)))
        .add(&cross.scale(0.25 * (p.g2_a1 - p.g2_a2)).mul(&onb(&x2)));
    Ok(FockOperator::new(h.mat, "H_±"))
}

/// Membrane-in-the-middle form: ω± a±†a± + ω_m b†b + G₁(a₊†a₋ + a₋†a₊)x̂.
pub fn mim_hamiltonian(omega_0: f64, nu: f64, g1: f64, omega_m: f64, x_zpf: f64, dim: usize) -> Result<FockOperator> {
    let (a, ad, n) = ladder(dim)?;
    let id = FockOperator::identity(dim);
    let x = position(dim, x_zpf)?;
    let (_, _, nb) = ladder(dim)?;
    let onp = |o: &FockOperator| kron(&kron(o, &id), &id);
    let onm = |o: &FockOperator| kron(&kron(&id, o), &id);
    let onb = |o: &FockOperator| kron(&kron(&id, &id), o);
    let cross = onp(&ad).mul(&onm(&a)).add(&onm(&ad).mul(&onp(&a)));
    let h = onp(&n)
        .scale(omega_0 + nu)
        .add(&onm(&n).scale(omega_0 - nu))
        .add(&onb(&nb).scale(omega_m))
        .add(&cross.scale(g1).mul(&onb(&x)));
    Ok(FockOperator::new(h.mat, "H_MIM"))
}

/// Whispering-gallery form: already diagonal in the supermodes.
pub fn wgm_hamiltonian(
    omega_0: f64,
    nu: f64,
    g1: f64,
    g2: f64,
    omega_m: f64,
    x_zpf: f64,
    dim: usize,
) -> Result<FockOperator> {
    let (_, _, n) = ladder(dim)?;
    let id = FockOperator::identity(dim);
    let x = position(dim, x_zpf)?;
    let x2 = x.mul(&x);
    let (_, _, nb) = ladder(dim)?;
    let onp = |o: &FockOperator| kron(&kron(o, &id), &id);
    let onm = |o: &FockOperator| kron(&kron(&id, o), &id);
    let onb = |o: &FockOperator| kron(&kron(&id, &id), o);
    let total = onp(&n).add(&onm(&n));
    let h = onp(&n)
        .scale(omega_0 + nu)
        .add(&onm(&n).scale(omega_0 - nu))
        .add(&onb(&nb).scale(omega_m))
        .add(&total.scale(g1).mul(&onb(&x)))
        .add(&total.scale(0.5 * g2).mul(&onb(&x2)));
    Ok(FockOperator::new(h.mat, "H_WGM"))
}

/// Quasistatic branch frequencies (ω′₊, ω′₋) at displacement x.
///
/// For the membrane-in-the-middle signs this is ω₀ ± √(ν² + G₁²x²).
pub fn mim_frequencies(p: &TwoModeParams, x: f64) -> (f64, f64) {
    let mean = 0.5 * (p.omega_1 + p.omega_2)
        + 0.5 * (p.g1_a1 + p.g1_a2) * x
        + 0.25 * (p.g2_a1 + p.g2_a2) * x * x;
    let half_gap = 0.5 * (p.omega_1 - p.omega_2) + p.g1_cross() * x + 0.25 * (p.g2_a1 - p.g2_a2) * x * x;
    let root = p.nu.hypot(half_gap);
    (mean + root, mean - root)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MimCoupling {
    /// G₂′ = G₁²/2ν, rad/s/m², the x² coefficient of ω′±.
    pub g2_prime: f64,
    /// g₂ = g₁²/2ν with g₁ = G₁x_zpf, when x_zpf is known.
    pub g2_single_photon: Option<f64>,
}

pub fn mim_effective_g2(p: &TwoModeParams) -> Result<MimCoupling> {
    if !(p.nu > 0.0) {
        return Err(Error::Singular(
            "nu = 0: the supermodes are degenerate and the avoided crossing vanishes, so no quadratic coefficient exists"
                .into(),
        ));
    }
    let g1 = p.g1_cross();
    let g2_single_photon = (p.x_zpf > 0.0).then(|| {
        let g1s = g1 * p.x_zpf;
        g1s * g1s / (2.0 * p.nu)
    });
    Ok(MimCoupling {
        g2_prime: g1 * g1 / (2.0 * p.nu),
        g2_single_photon,
    })
}

/// Linear-limit margin g₂·2ω_m/(g₁κ) after substituting g₂ = g₁²/2ν,
/// which is (g₁/κ)(ω_m/ν).
pub fn mim_linear_limit_margin(g1: f64, nu: f64, omega_m: f64, kappa: f64) -> f64 {
    g1 * omega_m / (nu * kappa)
}

/// N̄₂ = ν²/(Δ² + (κ/2)²)·N̄₁.
pub fn backscatter_occupancy(nu: f64, delta: f64, kappa: f64, n1: f64) -> f64 {
    nu * nu / (delta * delta + 0.25 * kappa * kappa) * n1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mapping {
    /// Photon number to use in the single-mode rates.
    pub nbar: f64,
    /// Multiplies Γ_meas only.
    pub measurement_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum SingleModeMapping {
    /// 2ν ≪ κ
    Weak(Mapping),
    /// 2ν ≫ κ
    Strong(Mapping),
    Unclassified { weak: Mapping, strong: Mapping },
}

impl SingleModeMapping {
    pub fn mapping(&self) -> Option<Mapping> {
        match self {
            Self::Weak(m) | Self::Strong(m) => Some(*m),
            Self::Unclassified { .. } => None,
        }
    }
}

pub fn single_mode_mapping(nu: f64, kappa: f64, delta: f64, n1: f64) -> SingleModeMapping {
    single_mode_mapping_with(nu, kappa, delta, n1, DEFAULT_DOMINANCE)
}

/// Weak when 2ν/κ ≤ 1/dominance, strong when ≥ dominance.
pub fn single_mode_mapping_with(nu: f64, kappa: f64, delta: f64, n1: f64, dominance: f64) -> SingleModeMapping {
    let nbar = n1 + backscatter_occupancy(nu, delta, kappa, n1);
    let weak = Mapping {
        nbar,
        measurement_factor: 1.0,
    };
    let strong = Mapping {
        nbar,
        measurement_factor: 0.5,
    };
    let ratio = 2.0 * nu / kappa;
    if ratio * dominance <= 1.0 {
        SingleModeMapping::Weak(weak)
    } else if ratio >= dominance {
        SingleModeMapping::Strong(strong)
    } else {
        SingleModeMapping::Unclassified { weak, strong }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::max_abs;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn sorted_eigs(h: &FockOperator) -> Vec<f64> {
        let mut e: Vec<f64> = h.mat.clone().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    fn generic() -> TwoModeParams {
        TwoModeParams {
            omega_1: 5.0,
            omega_2: 5.0,
            nu: 0.7,
            g1_a1: 0.3,
            g1_a2: -0.1,
            g2_a1: 0.05,
            g2_a2: 0.02,
            kappa: 1.0,
            delta: 0.0,
            omega_m: 1.3,
            x_zpf: 0.8,
        }
    }

    #[test]
    fn bare_splitting_is_two_nu() {
        let mut p = generic();
        p.g1_a1 = 0.0;
        p.g1_a2 = 0.0;
        p.g2_a1 = 0.0;
        p.g2_a2 = 0.0;
        p.omega_m = 0.0;
        let e = sorted_eigs(&supermode_hamiltonian(&p, 2).unwrap());
        // single-photon sector: ω₀ − ν and ω₀ + ν
        let single: Vec<f64> = e.iter().copied().filter(|v| (v - 5.0).abs() < 1.0).collect();
        assert!((single.last().unwrap() - single[0] - 1.4).abs() < 1e-12);
    }

    /// Photon number is conserved, so the sectors with n₁ + n₂ < dim are
    /// complete in both bases and the rotation must preserve their spectrum.
    fn complete_sectors(h: &FockOperator, dim: usize) -> FockOperator {
        let keep: Vec<usize> = (0..dim.pow(3)).filter(|i| i / dim / dim + (i / dim) % dim < dim).collect();
        let sub = crate::fock::CMatrix::from_fn(keep.len(), keep.len(), |r, c| h.mat[(keep[r], keep[c])]);
        FockOperator::new(sub, "sector")
    }

    #[test]
    fn supermode_transform_preserves_spectrum() {
        for dim in [2, 3, 4] {
            let p = generic();
            let a = sorted_eigs(&complete_sectors(&two_mode_hamiltonian(&p, dim).unwrap(), dim));
            let b = sorted_eigs(&complete_sectors(&supermode_hamiltonian(&p, dim).unwrap(), dim));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn mim_and_wgm_reductions() {
        let mut p = TwoModeParams::mim(5.0, 0.7, 0.3);
        p.omega_m = 1.1;
        p.x_zpf = 0.5;
        let h = supermode_hamiltonian(&p, 3).unwrap();
        let m = mim_hamiltonian(5.0, 0.7, 0.3, 1.1, 0.5, 3).unwrap();
        assert!(max_abs(&(&h.mat - &m.mat)) < 1e-14);

        let mut w = TwoModeParams::wgm(5.0, 0.7, 0.3, 0.04);
        w.omega_m = 1.1;
        w.x_zpf = 0.5;
        let h = supermode_hamiltonian(&w, 3).unwrap();
        let m = wgm_hamiltonian(5.0, 0.7, 0.3, 0.04, 1.1, 0.5, 3).unwrap();
        assert!(max_abs(&(&h.mat - &m.mat)) < 1e-14);
    }

    #[test]
    fn non_degenerate_rejected() {
        let mut p = generic();
        p.omega_2 = 5.1;
        assert_eq!(supermode_hamiltonian(&p, 2), Err(Error::NonDegenerate));
        assert!(two_mode_hamiltonian(&p, 2).is_ok());
    }

    #[test]
    fn branch_frequencies() {
        let p = TwoModeParams::mim(TAU * 200e12, TAU * 10e9, TAU * 1e9);
        let (wp, wm) = mim_frequencies(&p, 0.0);
        assert_relative_eq!(wp - p.omega_1, p.nu, max_relative = 1e-9);
        assert_relative_eq!(p.omega_1 - wm, p.nu, max_relative = 1e-9);
        let (wp, _) = mim_frequencies(&p, 1.0);
        let exact = (wp - p.omega_1) / TAU;
        assert!((exact - 10.0499e9).abs() < 1e5, "{exact}");
        let approx = (p.nu + mim_effective_g2(&p).unwrap().g2_prime) / TAU;
        assert_relative_eq!(approx, 10.05e9, max_relative = 1e-12);
        for x in [0.1, 0.5, 2.0] {
            assert_eq!(mim_frequencies(&p, x), mim_frequencies(&p, -x));
        }
    }

    #[test]
    fn quadratic_approximation_error_bound() {
        let p = TwoModeParams::mim(0.0, 1.0, 1.0);
        let g2 = mim_effective_g2(&p).unwrap().g2_prime;
        for k in 1..=100 {
            let x = 0.1 * k as f64 / 100.0;
            let exact = mim_frequencies(&p, x).0;
            let approx = p.nu + g2 * x * x;
            assert!((exact - approx).abs() / p.nu <= (x / p.nu).powi(4));
        }
    }

    #[test]
    fn effective_g2_scaling_and_singularity() {
        let mut p = TwoModeParams::mim(0.0, 2.0, 3.0);
        p.x_zpf = 0.1;
        let c = mim_effective_g2(&p).unwrap();
        assert_eq!(c.g2_prime, 9.0 / 4.0);
        assert_relative_eq!(c.g2_single_photon.unwrap(), 0.09 / 4.0, max_relative = 1e-14);
        p.nu = 4.0;
        assert_eq!(mim_effective_g2(&p).unwrap().g2_prime, 9.0 / 8.0);
        p.nu = 0.0;
        assert!(matches!(mim_effective_g2(&p), Err(Error::Singular(_))));
    }

    #[test]
    fn curvature_matches_g2_prime() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let nu = rng.random_range(0.5..5.0);
            let g1 = rng.random_range(0.1..3.0);
            let p = TwoModeParams::mim(rng.random_range(-3.0..3.0), nu, g1);
            let h = 1e-3 * nu / g1;
            let f = |x: f64| mim_frequencies(&p, x).0;
            let d2 = (-f(-2.0 * h) + 16.0 * f(-h) - 30.0 * f(0.0) + 16.0 * f(h) - f(2.0 * h)) / (12.0 * h * h);
            assert_relative_eq!(0.5 * d2, mim_effective_g2(&p).unwrap().g2_prime, max_relative = 1e-6);
        }
    }

    #[test]
    fn backscatter_examples() {
        let kappa = 3.0;
        assert_relative_eq!(backscatter_occupancy(kappa / 20.0, 0.0, kappa, 1.0), 0.01, max_relative = 1e-14);
        assert_eq!(backscatter_occupancy(0.0, 0.3, kappa, 5.0), 0.0);
        let nu = 50.0 * kappa;
        let r = backscatter_occupancy(nu, nu, kappa, 1.0);
        assert_relative_eq!(r, 1.0 / (1.0 + (kappa / (2.0 * nu)).powi(2)), max_relative = 1e-14);
    }

    #[test]
    fn mapping_regimes() {
        let kappa = 2.0;
        match single_mode_mapping(0.005 * kappa, kappa, 0.0, 10.0) {
            SingleModeMapping::Weak(m) => {
                assert_relative_eq!(m.nbar, 10.0 * (1.0 + 1e-4), max_relative = 1e-12);
                assert_eq!(m.measurement_factor, 1.0);
            }
            other => panic!("{other:?}"),
        }
        let nu = 50.0 * kappa;
        match single_mode_mapping(nu, kappa, nu, 10.0) {
            SingleModeMapping::Strong(m) => {
                assert!((m.nbar - 20.0).abs() < 1e-3);
                assert_eq!(m.measurement_factor, 0.5);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            single_mode_mapping(0.0, kappa, 0.0, 7.0),
            SingleModeMapping::Weak(Mapping {
                nbar: 7.0,
                measurement_factor: 1.0
            })
        );
        assert!(single_mode_mapping(kappa, kappa, 0.0, 1.0).mapping().is_none());
    }
}
