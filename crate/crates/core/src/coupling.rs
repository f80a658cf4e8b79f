//! Perturbative optomechanical couplings from sampled 1D mode fields.
//!
//! Volume integrals are trapezoidal line integrals on a shared grid and
//! surface integrals are sums over interface points. Fields are transverse
//! (parallel to interfaces) unless a mode carries normal D samples.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Relative tolerance for grid equality, symmetry and interface alignment.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeField {
    /// Meters, strictly increasing, at least 3 points.
    pub grid: Vec<f64>,
    pub field: Vec<Complex64>,
    /// Unperturbed frequency, rad/s.
    pub frequency: f64,
    pub label: String,
    /// Normal displacement field D⊥, continuous across interfaces.
    pub normal_d: Option<Vec<Complex64>>,
}

impl ModeField {
    pub fn new(grid: Vec<f64>, field: Vec<Complex64>, frequency: f64, label: impl Into<String>) -> Result<Self> {
        validate_grid(&grid)?;
        if field.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: field.len(),
            });
        }
        if field.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("mode field must be finite");
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return domain(format!("mode frequency must be positive, got {frequency}"));
        }
        Ok(Self {
            grid,
            field,
            frequency,
            label: label.into(),
            normal_d: None,
        })
    }

    pub fn with_normal_d(mut self, d: Vec<Complex64>) -> Result<Self> {
        if d.len() != self.grid.len() {
            return Err(Error::ShapeMismatch {
                expected: self.grid.len(),
                got: d.len(),
            });
        }
        self.normal_d = Some(d);
        Ok(self)
    }

    /// E → cE (and D⊥ → cD⊥).
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.field.iter_mut().for_each(|z| *z *= c);
        if let Some(d) = out.normal_d.as_mut() {
            d.iter_mut().for_each(|z| *z *= c);
        }
        out
    }

    pub fn span(&self) -> f64 {
        self.grid[self.grid.len() - 1] - self.grid[0]
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return domain(format!("grid needs at least 3 points, got {}", grid.len()));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return domain("grid must be finite and strictly increasing");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    /// Meters; must coincide with a grid point.
    pub position: f64,
    /// ±1, orientation of the outward normal of the displaced dielectric.
    pub normal_sign: f64,
    /// Permittivity of the dielectric side.
    pub eps_d: f64,
    /// Permittivity of the surrounding side.
    pub eps_s: f64,
    /// Modeshape displacement along the normal, per unit amplitude.
    pub qu: f64,
}

impl Interface {
    /// Δε = ε_d − ε_s
    pub fn delta_eps(&self) -> f64 {
        self.eps_d - self.eps_s
    }

    /// Δ(ε⁻¹) = 1/ε_d − 1/ε_s
    pub fn delta_inv_eps(&self) -> f64 {
        1.0 / self.eps_d - 1.0 / self.eps_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermittivityPerturbation {
    pub grid: Vec<f64>,
    /// Relative permittivity, > 0.
    pub epsilon: Vec<f64>,
    /// dε_r/dx per unit mechanical displacement, 1/m.
    pub depsilon_dx: Vec<f64>,
    pub interfaces: Vec<Interface>,
}

impl PermittivityPerturbation {
    pub fn new(grid: Vec<f64>, epsilon: Vec<f64>, depsilon_dx: Vec<f64>) -> Result<Self> {
        validate_grid(&grid)?;
        for v in [&epsilon, &depsilon_dx] {
            if v.len() != grid.len() {
                return Err(Error::ShapeMismatch {
                    expected: grid.len(),
                    got: v.len(),
                });
            }
        }
        if epsilon.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return domain("permittivity must be positive and finite");
        }
        if depsilon_dx.iter().any(|e| !e.is_finite()) {
            return domain("permittivity derivative must be finite");
        }
        Ok(Self {
            grid,
            epsilon,
            depsilon_dx,
            interfaces: Vec::new(),
        })
    }

    pub fn with_interfaces(mut self, interfaces: Vec<Interface>) -> Result<Self> {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        for i in &interfaces {
            if !(i.position >= lo && i.position <= hi) {
                return domain(format!("interface at {} lies outside the grid [{lo}, {hi}]", i.position));
            }
            if !(i.eps_d > 0.0 && i.eps_s > 0.0) {
                return domain("interface permittivities must be positive");
            }
        }
        self.interfaces = interfaces;
        Ok(self)
    }
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    let span = (a[a.len() - 1] - a[0]).abs();
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= GRID_TOL * span)
}

/// Trapezoidal ∫E_a* w E_b dx.
pub fn inner_product(a: &ModeField, w: &[f64], b: &ModeField) -> Result<Complex64> {
    if !same_grid(&a.grid, &b.grid) || w.len() != a.grid.len() {
        return Err(Error::GridMismatch);
    }
    let f = |i: usize| a.field[i].conj() * b.field[i] * w[i];
    Ok(a.grid
        .windows(2)
        .enumerate()
        .map(|(i, x)| 0.5 * (x[1] - x[0]) * (f(i) + f(i + 1)))
        .sum())
}

fn check_pair(mode: &ModeField, pert: &PermittivityPerturbation) -> Result<()> {
    if same_grid(&mode.grid, &pert.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// ⟨E|ε|E⟩, the stored-energy normalization.
fn norm(mode: &ModeField, pert: &PermittivityPerturbation) -> Result<f64> {
    let n = inner_product(mode, &pert.epsilon, mode)?.re;
    if n == 0.0 {
        return Err(Error::ZeroDenominator(format!(
            "<E|eps|E> vanishes for mode '{}'",
            mode.label
        )));
    }
    Ok(n)
}

/// G₁ = −(ω/2)⟨E|ε′|E⟩/⟨E|ε|E⟩, rad/s/m.
pub fn g1_coefficient(mode: &ModeField, pert: &PermittivityPerturbation) -> Result<f64> {
    check_pair(mode, pert)?;
    let n = norm(mode, pert)?;
    let num = inner_product(mode, &pert.depsilon_dx, mode)?;
    // real weights make the self-overlap real up to rounding
    debug_assert!(num.im.abs() <= 1e-12 * num.norm().max(f64::MIN_POSITIVE));
    Ok(-0.5 * mode.frequency * num.re / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTerm {
    pub label: String,
    pub frequency: f64,
    /// G_ij, rad/s/m².
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoupling {
    pub g1: f64,
    /// 3G₁²/ω
    pub self_term: f64,
    pub cross: Vec<CrossTerm>,
    /// d²ω/dx², rad/s/m².
    pub g2: f64,
    /// |G_ij| of the last listed mode; the sum is truncated, not bounded.
    pub truncation: f64,
}

impl QuadraticCoupling {
    pub fn cross_sum(&self) -> f64 {
        self.cross.iter().map(|c| c.value).sum()
    }
}

/// G₂ = 3G₁²/ω_i + Σ_j ω_i³/(ω_i² − ω_j²)·|⟨E_j|ε′|E_i⟩|²/(N_i N_j).
pub fn g2_coefficient(
    mode: &ModeField,
    others: &[ModeField],
    pert: &PermittivityPerturbation,
) -> Result<QuadraticCoupling> {
    let g1 = g1_coefficient(mode, pert)?;
    let wi = mode.frequency;
    let ni = norm(mode, pert)?;
    let mut cross = Vec::with_capacity(others.len());
    for other in others {
        check_pair(other, pert)?;
        let wj = other.frequency;
        if (wi - wj).abs() <= 1e-12 * wi {
            return Err(Error::DegenerateModes { omega: wj });
        }
        let overlap = inner_product(other, &pert.depsilon_dx, mode)?;
        let nj = norm(other, pert)?;
        cross.push(CrossTerm {
            label: other.label.clone(),
            frequency: wj,
            value: wi.powi(3) / (wi * wi - wj * wj) * overlap.norm_sqr() / (ni * nj),
        });
    }
    let self_term = 3.0 * g1 * g1 / wi;
    let truncation = cross.last().map_or(0.0, |c| c.value.abs());
    let g2 = self_term + cross.iter().map(|c| c.value).sum::<f64>();
    Ok(QuadraticCoupling {
        g1,
        self_term,
        cross,
        g2,
        truncation,
    })
}

/// Σ_interfaces sign·(q·u)[Δε E∥,a* E∥,b − Δ(ε⁻¹) D⊥,a* D⊥,b].
///
/// E∥ and D⊥ are continuous across an interface, so the sample at the
/// aligned grid point is the one-sided limit from either side.
pub fn boundary_overlap(a: &ModeField, b: &ModeField, pert: &PermittivityPerturbation) -> Result<Complex64> {
    check_pair(a, pert)?;
    check_pair(b, pert)?;
    if pert.interfaces.is_empty() {
        return Err(Error::Parameter {
            key: "interfaces".into(),
            reason: "boundary overlap needs at least one interface".into(),
        });
    }
    let span = a.span();
    let mut total = Complex64::new(0.0, 0.0);
    for s in &pert.interfaces {
        let idx = a.grid.partition_point(|&x| x < s.position);
        let nearest = [idx.saturating_sub(1), idx.min(a.grid.len() - 1)]
            .into_iter()
            .min_by(|&i, &j| (a.grid[i] - s.position).abs().total_cmp(&(a.grid[j] - s.position).abs()))
            .unwrap_or(0);
        if (a.grid[nearest] - s.position).abs() > GRID_TOL * span {
            return Err(Error::InterfaceMisaligned { position: s.position });
        }
        let mut bracket = s.delta_eps() * a.field[nearest].conj() * b.field[nearest];
        if let (Some(da), Some(db)) = (&a.normal_d, &b.normal_d) {
            bracket -= s.delta_inv_eps() * da[nearest].conj() * db[nearest];
        }
        total += s.normal_sign * s.qu * bracket;
    }
    Ok(total)
}

/// dω/dx from the moving-boundary form, −(ω/2)·boundary/⟨E|ε|E⟩.
pub fn boundary_g1(mode: &ModeField, pert: &PermittivityPerturbation) -> Result<f64> {
    let b = boundary_overlap(mode, mode, pert)?;
    Ok(-0.5 * mode.frequency * b.re / norm(mode, pert)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    LinearDominant,
    QuadraticCapable,
    Indeterminate,
}

/// Quadratic-capable when G₁ vanishes below |G₁| < 1e-8·ω/span while the
/// cross terms against `others` do not. Asymmetric grids are indeterminate.
pub fn classify_symmetry(
    mode: &ModeField,
    others: &[ModeField],
    pert: &PermittivityPerturbation,
) -> Result<Symmetry> {
    let g = &mode.grid;
    let n = g.len();
    let span = mode.span();
    let symmetric = (0..n).all(|i| (g[i] + g[n - 1 - i] - g[0] - g[n - 1]).abs() <= GRID_TOL * span);
    if !symmetric {
        return Ok(Symmetry::Indeterminate);
    }
    let q = g2_coefficient(mode, others, pert)?;
    let g1_zero = 1e-8 * mode.frequency / span;
    if q.g1.abs() >= g1_zero {
        return Ok(Symmetry::LinearDominant);
    }
    if q.cross_sum().abs() >= g1_zero / span {
        Ok(Symmetry::QuadraticCapable)
    } else {
        Ok(Symmetry::Indeterminate)
    }
}

/// (g₁, g₂) = (G₁x_zpf, G₂x_zpf²).
pub fn single_photon_couplings(g1: f64, g2: f64, x_zpf: f64) -> (f64, f64) {
    (g1 * x_zpf, g2 * x_zpf * x_zpf)
}
