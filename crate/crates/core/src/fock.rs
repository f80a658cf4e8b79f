//! Dense operators on truncated Fock spaces.
//!
//! Hamiltonians are stored as H/ħ in rad/s. Bipartite operators use the
//! ordering cavity ⊗ mechanics, so the basis index is `i_c * dim_m + i_m`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::system::SystemParams;

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub dim: usize,
    pub mat: CMatrix,
    pub label: String,
}

impl FockOperator {
    pub fn new(mat: CMatrix, label: impl Into<String>) -> Self {
        assert!(mat.is_square());
        Self {
            dim: mat.nrows(),
            mat,
            label: label.into(),
        }
    }

    pub fn zeros(dim: usize, label: impl Into<String>) -> Self {
        Self::new(CMatrix::zeros(dim, dim), label)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(CMatrix::identity(dim, dim), "1")
    }

    pub fn from_diagonal(diag: &[f64], label: impl Into<String>) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        Self::new(m, label)
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.mat.adjoint(), format!("({})†", self.label))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::new(&self.mat * &other.mat, format!("{}{}", self.label, other.label))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.mat.scale(s), self.label.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::new(&self.mat + &other.mat, format!("{}+{}", self.label, other.label))
    }

    pub fn is_diagonal(&self) -> bool {
        self.mat
            .iter()
            .enumerate()
            .all(|(k, z)| k % self.dim == k / self.dim || *z == ZERO)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mat)
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.mat - self.mat.adjoint()))
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Annihilation, creation and number operators on `dim` levels.
pub fn ladder(dim: usize) -> Result<(FockOperator, FockOperator, FockOperator)> {
    if dim < 2 {
        return domain(format!("truncation dimension must be >= 2, got {dim}"));
    }
    let mut b = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        b[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let b = FockOperator::new(b, "b");
    let bd = FockOperator::new(b.mat.adjoint(), "b†");
    let n: Vec<f64> = (0..dim).map(|k| k as f64).collect();
    Ok((b, bd, FockOperator::from_diagonal(&n, "n")))
}

pub fn kron(a: &FockOperator, b: &FockOperator) -> FockOperator {
    FockOperator::new(a.mat.kronecker(&b.mat), format!("{}⊗{}", a.label, b.label))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// QND part H₀ and contaminant part H′ of the optomechanical Hamiltonian on
/// cavity ⊗ mechanics, in rad/s.
///
/// H₀ = [ω_c + g₂(b†b + ½)]a†a + ω_m b†b,
/// H′ = g₁(b + b†)a†a + (g₂/2)(bb + b†b†)a†a.
pub fn hamiltonian_split(
    params: &SystemParams,
    omega_c: f64,
    dim_c: usize,
    dim_m: usize,
) -> Result<(FockOperator, FockOperator)> {
    let (_, _, na) = ladder(dim_c)?;
    let (b, bd, _) = ladder(dim_m)?;

    // H₀ is diagonal in the product basis
    let mut h0 = vec![0.0; dim_c * dim_m];
    for ic in 0..dim_c {
        for im in 0..dim_m {
            let (nc, nm) = (ic as f64, im as f64);
            h0[ic * dim_m + im] = (omega_c + params.g2 * (nm + 0.5)) * nc + params.omega_m * nm;
        }
    }
    let h0 = FockOperator::from_diagonal(&h0, "H0");

    let x = b.add(&bd).scale(params.g1);
    let sq = b.mul(&b).add(&bd.mul(&bd)).scale(0.5 * params.g2);
    let hp = kron(&na, &x.add(&sq));
    Ok((h0, FockOperator::new(hp.mat, "H'")))
}

/// D[o]ρ = 2oρo† − o†oρ − ρo†o.
pub fn dissipator_action(o: &FockOperator, rho: &CMatrix) -> Result<CMatrix> {
    if rho.nrows() != o.dim || rho.ncols() != o.dim {
        return Err(Error::ShapeMismatch {
            expected: o.dim,
            got: rho.nrows(),
        });
    }
    let od = o.mat.adjoint();
    let odo = &od * &o.mat;
    Ok((&o.mat * rho * &od).scale(2.0) - &odo * rho - rho * &odo)
}

/// Smallest dimension whose Bose-Einstein tail mass beyond it is below `tol`.
pub fn suggest_dim_with_tol(nbar_th: f64, tol: f64) -> usize {
    if nbar_th <= 0.0 {
        return 2;
    }
    // P(n ≥ d) = (n̄/(n̄+1))^d
    let q = nbar_th / (nbar_th + 1.0);
    let d = (tol.ln() / q.ln()).ceil() as usize;
    d.max(2)
}

/// Dimension with Bose-Einstein tail mass below 1e-6.
pub fn suggest_dim(nbar_th: f64) -> usize {
    suggest_dim_with_tol(nbar_th, 1e-6)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub dim: usize,
    pub mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::ShapeMismatch {
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        Ok(Self {
            dim: mat.nrows(),
            mat,
        })
    }

    pub fn fock(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return domain(format!("Fock index {k} outside truncation {dim}"));
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(k, k)] = ONE;
        Self::new(m)
    }

    pub fn from_populations(p: &[f64]) -> Result<Self> {
        if p.iter().any(|&x| !(x >= 0.0)) {
            return domain("populations must be non-negative");
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return domain(format!("populations sum to {total}, expected 1"));
        }
        Self::new(FockOperator::from_diagonal(p, "ρ").mat)
    }

    /// Bose-Einstein state truncated to `dim` levels and renormalized.
    pub fn thermal(dim: usize, nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) {
            return domain("thermal occupancy must be >= 0");
        }
        let q = if nbar == 0.0 { 0.0 } else { nbar / (nbar + 1.0) };
        let mut p: Vec<f64> = (0..dim).map(|n| q.powi(n as i32)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        Self::from_populations(&p)
    }

    /// |0_c⟩⟨0_c| ⊗ ρ_m.
    pub fn cavity_vacuum_product(dim_c: usize, rho_m: &DensityMatrix) -> Self {
        let mut vac = CMatrix::zeros(dim_c, dim_c);
        vac[(0, 0)] = ONE;
        Self {
            dim: dim_c * rho_m.dim,
            mat: vac.kronecker(&rho_m.mat),
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.mat[(i, i)].re).collect()
    }

    /// Mechanical populations of a cavity ⊗ mechanics state.
    pub fn mechanical_populations(&self, dim_m: usize) -> Vec<f64> {
        let mut p = vec![0.0; dim_m];
        for i in 0..self.dim {
            p[i % dim_m] += self.mat[(i, i)].re;
        }
        p
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.mat - self.mat.adjoint()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.mat + self.mat.adjoint()).scale(0.5);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Hermitian to 1e-12, unit trace to 1e-10, eigenvalues ≥ −1e-10.
    pub fn certify(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-12 {
            return domain(format!("density matrix not Hermitian ({herm:e})"));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > 1e-10 {
            return domain(format!("density matrix trace {tr} != 1"));
        }
        let ev = self.min_eigenvalue();
        if ev < -1e-10 {
            return domain(format!("density matrix has negative eigenvalue {ev:e}"));
        }
        Ok(())
    }

    pub fn mean_number(&self) -> f64 {
        self.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_op(rng: &mut ChaCha8Rng, dim: usize) -> FockOperator {
        let m = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        FockOperator::new(m, "X")
    }

    #[test]
    fn ladder_entries() {
        let (b, bd, n) = ladder(3).unwrap();
        assert_eq!(b.mat[(0, 1)], c(1.0));
        assert!((b.mat[(1, 2)] - c(2f64.sqrt())).norm() < 1e-15);
        let nonzero = b.mat.iter().filter(|z| **z != ZERO).count();
        assert_eq!(nonzero, 2);
        assert_eq!(bd.mat, b.mat.adjoint());
        assert_eq!((&n.mat * DMatrix::from_column_slice(3, 1, &[ZERO, ZERO, ONE]))[2], c(2.0));
        assert!(max_abs(&(&bd.mat * &b.mat - &n.mat)) < 1e-15);
        assert!(ladder(1).is_err());
    }

    #[test]
    fn truncated_commutator() {
        let dim = 6;
        let (b, bd, _) = ladder(dim).unwrap();
        let comm = commutator(&b.mat, &bd.mat);
        for i in 0..dim {
            for j in 0..dim {
                let expected = match (i == j, i == dim - 1) {
                    (true, false) => 1.0,
                    (true, true) => -((dim - 1) as f64),
                    _ => 0.0,
                };
                assert!((comm[(i, j)] - c(expected)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = random_op(&mut rng, 3);
            let b = random_op(&mut rng, 4);
            let lhs = kron(&a, &FockOperator::identity(4)).mat * kron(&FockOperator::identity(3), &b).mat;
            assert!(max_abs(&(lhs - kron(&a, &b).mat)) < 1e-13);
        }
    }

    #[test]
    fn qnd_split() {
        let p = SystemParams::reference().with_couplings(0.3, 0.7);
        let mut p = p;
        p.omega_m = 5.0;
        let (dc, dm) = (3, 6);
        let (h0, hp) = hamiltonian_split(&p, 11.0, dc, dm).unwrap();
        let (_, _, n) = ladder(dm).unwrap();
        let nm = kron(&FockOperator::identity(dc), &n);
        assert!(max_abs(&commutator(&h0.mat, &nm.mat)) < 1e-12 * h0.max_abs());
        assert!(max_abs(&commutator(&hp.mat, &nm.mat)) > 0.1);
        assert!(h0.hermiticity_error() == 0.0 && hp.hermiticity_error() < 1e-15);
        for k in 0..dm {
            let shift = h0.mat[(dm + k, dm + k)] - h0.mat[(k, k)];
            assert!((shift - c(11.0 + 0.7 * (k as f64 + 0.5))).norm() < 1e-12);
        }

        let (_, hp0) = hamiltonian_split(&p.with_couplings(0.0, 0.0), 11.0, dc, dm).unwrap();
        assert_eq!(hp0.max_abs(), 0.0);
    }

    #[test]
    fn dissipator_examples() {
        let (b, bd, n) = ladder(4).unwrap();
        let rho = DensityMatrix::fock(4, 1).unwrap();
        let d = dissipator_action(&b, &rho.mat).unwrap();
        assert_eq!(d[(0, 0)], c(2.0));
        assert_eq!(d[(1, 1)], c(-2.0));
        assert_eq!(max_abs(&d), 2.0);

        let diag = DensityMatrix::from_populations(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(max_abs(&dissipator_action(&n, &diag.mat).unwrap()) < 1e-14);

        let vac = DensityMatrix::fock(4, 0).unwrap();
        let d2 = dissipator_action(&bd.mul(&bd), &vac.mat).unwrap();
        assert!((d2[(2, 2)] - c(4.0)).norm() < 1e-14);
        assert!((d2[(0, 0)] + c(4.0)).norm() < 1e-14);

        assert!(matches!(
            dissipator_action(&b, &CMatrix::zeros(3, 3)),
            Err(Error::ShapeMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn dissipator_traceless_and_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let o = random_op(&mut rng, 5);
            let x = random_op(&mut rng, 5);
            let rho = &x.mat + x.mat.adjoint();
            let d = dissipator_action(&o, &rho).unwrap();
            assert!(d.trace().norm() < 1e-12);
            assert!(max_abs(&(&d - d.adjoint())) < 1e-12);
        }
    }

    #[test]
    fn suggested_dim_tail() {
        for &nbar in &[0.01, 0.25, 1.0, 5.0] {
            let d = suggest_dim(nbar);
            let q: f64 = nbar / (nbar + 1.0);
            assert!(q.powi(d as i32) < 1e-6);
            assert!(q.powi(d as i32 - 1) >= 1e-6 || d == 2);
        }
        assert_eq!(suggest_dim(0.0), 2);
    }

    #[test]
    fn density_matrix_helpers() {
        let t = DensityMatrix::thermal(40, 0.25).unwrap();
        t.certify().unwrap();
        assert!((t.mean_number() - 0.25).abs() < 1e-12);
        let prod = DensityMatrix::cavity_vacuum_product(3, &t);
        let pm = prod.mechanical_populations(40);
        for (a, b) in pm.iter().zip(t.populations()) {
            assert_eq!(*a, b);
        }
        assert!(DensityMatrix::from_populations(&[0.5, 0.4]).is_err());
        assert!(DensityMatrix::fock(3, 3).is_err());
    }
}
