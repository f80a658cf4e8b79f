//! Lindblad generators for the reduced phonon master equation and the
//! bipartite cavity ⊗ mechanics model, plus integration, steady states and
//! rate extraction.
//!
//! Convention: dρ/dt = −i[H, ρ] + Σ_k (w_k/2) D[o_k]ρ with H in rad/s.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity_response::CavityResponse;
use crate::error::{domain, Error, Result};
use crate::fock::{dissipator_action, kron, ladder, max_abs, CMatrix, DensityMatrix, FockOperator};
use crate::system::SystemParams;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    /// b at Γ_m(n̄_th+1)
    ThermalDown,
    /// b† at Γ_m n̄_th
    ThermalUp,
    /// b, optical
    OptDown1,
    /// b†, optical
    OptUp1,
    /// bb
    OptDown2,
    /// b†b†
    OptUp2,
    /// b†b
    Dephasing,
    /// cavity d
    CavityDecay,
    Other,
}

impl ChannelKind {
    /// Net change in phonon number, when the channel has a definite one.
    pub fn phonon_step(self) -> Option<i64> {
        match self {
            Self::ThermalDown | Self::OptDown1 => Some(-1),
            Self::ThermalUp | Self::OptUp1 => Some(1),
            Self::OptDown2 => Some(-2),
            Self::OptUp2 => Some(2),
            Self::Dephasing => Some(0),
            Self::CavityDecay | Self::Other => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub op: FockOperator,
    /// w ≥ 0 in rad/s; the dissipator enters as (w/2)·D[op].
    pub weight: f64,
    pub kind: ChannelKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladGenerator {
    pub dim: usize,
    pub hamiltonian: FockOperator,
    pub channels: Vec<Channel>,
    /// Rate (rad/s) used to make time dimensionless during integration.
    pub time_scale: f64,
    /// `(dim_c, dim_m)` for cavity ⊗ mechanics generators.
    pub bipartite: Option<(usize, usize)>,
}

impl LindbladGenerator {
    pub fn new(hamiltonian: FockOperator, channels: Vec<Channel>, time_scale: f64) -> Result<Self> {
        let dim = hamiltonian.dim;
        if hamiltonian.hermiticity_error() > 1e-12 * hamiltonian.max_abs().max(1.0) {
            return domain("Hamiltonian is not Hermitian");
        }
        for c in &channels {
            if c.op.dim != dim {
                return Err(Error::ShapeMismatch {
                    expected: dim,
                    got: c.op.dim,
                });
            }
            if !(c.weight >= 0.0) || !c.weight.is_finite() {
                return domain(format!("channel {:?} has invalid weight {}", c.kind, c.weight));
            }
        }
        if !(time_scale > 0.0) {
            return domain("time scale must be positive");
        }
        Ok(Self {
            dim,
            hamiltonian,
            channels,
            time_scale,
            bipartite: None,
        })
    }

    /// Keep only the listed channel kinds, leaving the Hamiltonian unchanged.
    pub fn retain_kinds(&self, kinds: &[ChannelKind]) -> Self {
        let mut g = self.clone();
        g.channels.retain(|c| kinds.contains(&c.kind));
        g
    }

    pub fn without_hamiltonian(&self) -> Self {
        let mut g = self.clone();
        g.hamiltonian = FockOperator::zeros(self.dim, "0");
        g
    }

    pub fn channel(&self, kind: ChannelKind) -> Option<&Channel> {
        self.channels.iter().find(|c| c.kind == kind)
    }

    pub fn max_weight(&self) -> f64 {
        self.channels.iter().fold(0.0, |a, c| a.max(c.weight))
    }

    /// L(ρ) in rad/s, assembled from `dissipator_action`.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: self.dim,
                got: rho.nrows(),
            });
        }
        let h = &self.hamiltonian.mat;
        let mut out = (h * rho - rho * h) * (-I);
        for c in &self.channels {
            out += dissipator_action(&c.op, rho)?.scale(0.5 * c.weight);
        }
        Ok(out)
    }

    /// Superoperator acting on column-major vec(ρ), in units of `time_scale`.
    pub fn superoperator(&self) -> CMatrix {
        let n = self.dim;
        let id = CMatrix::identity(n, n);
        let h = self.hamiltonian.mat.unscale(self.time_scale);
        let mut l = id.kronecker(&h) * (-I) + h.transpose().kronecker(&id) * I;
        for c in &self.channels {
            if c.weight == 0.0 {
                continue;
            }
            let o = &c.op.mat;
            let odo = o.adjoint() * o;
            let w = 0.5 * c.weight / self.time_scale;
            l += (o.conjugate().kronecker(o).scale(2.0) - id.kronecker(&odo) - odo.transpose().kronecker(&id))
                .scale(w);
        }
        l
    }

    /// Rate matrix M with dp/dt = M p for number-diagonal states; M[(m, n)]
    /// is the rate n → m for m ≠ n.
    pub fn population_restriction(&self) -> Result<DMatrix<f64>> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = CMatrix::zeros(n, n);
            e[(j, j)] = Complex64::new(1.0, 0.0);
            let out = self.apply(&e)?;
            for i in 0..n {
                m[(i, j)] = out[(i, i)].re;
            }
        }
        Ok(m)
    }

    pub fn compile(&self) -> CompiledGenerator {
        CompiledGenerator::new(self)
    }
}

type Sparse = Vec<(usize, usize, Complex64)>;

fn sparse(m: &CMatrix) -> Sparse {
    let mut s = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != ZERO {
                s.push((i, j, v));
            }
        }
    }
    s
}

/// Sparse form of a generator in dimensionless time: with the effective
/// non-Hermitian K = H − (i/2)Σ w o†o,
/// L(ρ) = −iKρ + iρK† + Σ w oρo†.
#[derive(Debug, Clone)]
pub struct CompiledGenerator {
    pub dim: usize,
    pub k: CMatrix,
    k_sparse: Sparse,
    jumps: Vec<(Sparse, f64)>,
}

impl CompiledGenerator {
    fn new(g: &LindbladGenerator) -> Self {
        let mut k = g.hamiltonian.mat.unscale(g.time_scale);
        let mut jumps = Vec::new();
        for c in &g.channels {
            if c.weight == 0.0 {
                continue;
            }
            let w = c.weight / g.time_scale;
            let odo = c.op.mat.adjoint() * &c.op.mat;
            k -= odo.scale(0.5 * w) * I;
            jumps.push((sparse(&c.op.mat), w));
        }
        Self {
            dim: g.dim,
            k_sparse: sparse(&k),
            k,
            jumps,
        }
    }

    pub fn rhs(&self, rho: &CMatrix, out: &mut CMatrix) {
        let n = self.dim;
        out.fill(ZERO);
        for &(i, j, v) in &self.k_sparse {
            let a = -I * v;
            let b = I * v.conj();
            for c in 0..n {
                // −iK ρ
                out[(i, c)] += a * rho[(j, c)];
                // iρK†: (ρK†)_{c,i} = Σ_j ρ_{c,j} conj(K_{i,j})
                out[(c, i)] += b * rho[(c, j)];
            }
        }
        for (o, w) in &self.jumps {
            for &(a, i, u) in o {
                let wu = u * *w;
                for &(b, j, v) in o {
                    out[(a, b)] += wu * rho[(i, j)] * v.conj();
                }
            }
        }
    }
}

/// Reduced phonon-only generator with the photon-induced channels and the
/// Lamb-shift Hamiltonian N̄·H_r.
pub fn reduced_generator(params: &SystemParams, dim: usize) -> Result<LindbladGenerator> {
    let (b, bd, n_op) = ladder(dim)?;
    let resp = CavityResponse::from_params(params);
    let nbar = params.nbar_photon();
    let nth = params.nbar_th();
    let wm = params.omega_m;
    let g1sq = params.g1 * params.g1;
    let g2sq = params.g2 * params.g2;
    let chi = |w: f64| resp.susceptibility(w);

    // H_r is diagonal; the operator products are evaluated on |n⟩ directly
    // so the top truncation level carries no artifacts.
    let lin = g1sq * (chi(wm).im + chi(-wm).im);
    let kerr = g2sq * chi(0.0).im;
    let up2 = 0.25 * g2sq * chi(2.0 * wm).im;
    let down2 = 0.25 * g2sq * chi(-2.0 * wm).im;
    let hr: Vec<f64> = (0..dim)
        .map(|k| {
            let n = k as f64;
            nbar * (lin * n + kerr * n * n + up2 * (n + 1.0) * (n + 2.0) + down2 * n * (n - 1.0))
        })
        .collect();
    let h = FockOperator::from_diagonal(&hr, "N̄H_r");

    let b2 = b.mul(&b);
    let bd2 = bd.mul(&bd);
    let channels = vec![
        Channel {
            op: b.clone(),
            weight: params.gamma_m * (nth + 1.0),
            kind: ChannelKind::ThermalDown,
        },
        Channel {
            op: bd.clone(),
            weight: params.gamma_m * nth,
            kind: ChannelKind::ThermalUp,
        },
        Channel {
            op: bd,
            weight: 2.0 * nbar * g1sq * chi(wm).re,
            kind: ChannelKind::OptUp1,
        },
        Channel {
            op: b,
            weight: 2.0 * nbar * g1sq * chi(-wm).re,
            kind: ChannelKind::OptDown1,
        },
        Channel {
            op: n_op,
            weight: 2.0 * nbar * g2sq * chi(0.0).re,
            kind: ChannelKind::Dephasing,
        },
        Channel {
            op: bd2,
            weight: 0.5 * nbar * g2sq * chi(2.0 * wm).re,
            kind: ChannelKind::OptUp2,
        },
        Channel {
            op: b2,
            weight: 0.5 * nbar * g2sq * chi(-2.0 * wm).re,
            kind: ChannelKind::OptDown2,
        },
    ];
    let scale = if params.gamma_m > 0.0 { params.gamma_m } else { 1.0 };
    LindbladGenerator::new(h, channels, scale)
}

/// Cavity ⊗ mechanics generator in the displaced frame:
/// H = Δd†d + ω_m b†b + ā[g₁(b + b†) + (g₂/2)(2b†b + bb + b†b†)](d + d†).
pub fn bipartite_generator(params: &SystemParams, dim_c: usize, dim_m: usize) -> Result<LindbladGenerator> {
    let (d, dd, nd) = ladder(dim_c)?;
    let (b, bd, nb) = ladder(dim_m)?;
    let ic = FockOperator::identity(dim_c);
    let im = FockOperator::identity(dim_m);
    let abar = params.nbar_photon().sqrt();
    let nth = params.nbar_th();

    let mech = b
        .add(&bd)
        .scale(params.g1)
        .add(&nb.scale(2.0).add(&b.mul(&b)).add(&bd.mul(&bd)).scale(0.5 * params.g2));
    let h = kron(&nd, &im)
        .scale(params.delta)
        .add(&kron(&ic, &nb).scale(params.omega_m))
        .add(&kron(&d.add(&dd), &mech).scale(abar));
    let h = FockOperator::new(h.mat, "H_om");

    let channels = vec![
        Channel {
            op: kron(&d, &im),
            weight: params.kappa,
            kind: ChannelKind::CavityDecay,
        },
        Channel {
            op: kron(&ic, &b),
            weight: params.gamma_m * (nth + 1.0),
            kind: ChannelKind::ThermalDown,
        },
        Channel {
            op: kron(&ic, &bd),
            weight: params.gamma_m * nth,
            kind: ChannelKind::ThermalUp,
        },
    ];
    let mut g = LindbladGenerator::new(h, channels, params.kappa)?;
    g.bipartite = Some((dim_c, dim_m));
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub keep_snapshots: bool,
    /// Compute the minimum eigenvalue at every grid point.
    pub certify_positivity: bool,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-12,
            keep_snapshots: false,
            certify_positivity: false,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// `None` unless positivity was certified.
    pub min_eigenvalue: Option<f64>,
    pub steps: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    /// Seconds.
    pub times: Vec<f64>,
    /// Phonon populations per grid point (mechanics marginal for bipartite
    /// generators).
    pub populations: Vec<Vec<f64>>,
    #[serde(skip)]
    pub snapshots: Option<Vec<CMatrix>>,
    #[serde(skip)]
    pub final_state: Option<CMatrix>,
    pub diagnostics: Diagnostics,
}

impl EvolutionResult {
    /// A run fails when positivity was certified and an eigenvalue dropped
    /// below −1e-6.
    pub fn failed(&self) -> bool {
        self.diagnostics.min_eigenvalue.is_some_and(|e| e < -1e-6)
    }

    pub fn population(&self, n: usize) -> Vec<f64> {
        self.populations.iter().map(|p| p[n]).collect()
    }
}

// Dormand–Prince 5(4) tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo(base: &CMatrix, h: f64, terms: &[(f64, &CMatrix)], out: &mut CMatrix) {
    out.copy_from(base);
    for (c, k) in terms {
        if *c != 0.0 {
            let hc = h * c;
            out.iter_mut().zip(k.iter()).for_each(|(o, x)| *o += x * hc);
        }
    }
}

fn populations_of(gen: &LindbladGenerator, rho: &CMatrix) -> Vec<f64> {
    let dm = DensityMatrix {
        dim: gen.dim,
        mat: rho.clone(),
    };
    match gen.bipartite {
        Some((_, dim_m)) => dm.mechanical_populations(dim_m),
        None => dm.populations(),
    }
}

/// Adaptive Dormand–Prince integration from ρ₀ to `t_final` seconds,
/// sampling `grid` equally spaced points including both endpoints.
///
/// The trace is never renormalized; its drift is reported.
pub fn evolve(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    t_final: f64,
    grid: usize,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    if rho0.dim != gen.dim {
        return Err(Error::ShapeMismatch {
            expected: gen.dim,
            got: rho0.dim,
        });
    }
    if !(t_final > 0.0) {
        return domain("t_final must be positive");
    }
    if grid < 2 {
        return domain("grid must have at least 2 points");
    }
    let cg = gen.compile();
    let n = gen.dim;
    let tau_final = t_final * gen.time_scale;
    let stiffness_ratio = gen.max_weight() * t_final;

    let mut y = rho0.mat.clone();
    let mut k: Vec<CMatrix> = (0..7).map(|_| CMatrix::zeros(n, n)).collect();
    let mut tmp = CMatrix::zeros(n, n);
    let mut y_new = CMatrix::zeros(n, n);

    let mut times = Vec::with_capacity(grid);
    let mut pops = Vec::with_capacity(grid);
    let mut snaps = opts.keep_snapshots.then(Vec::new);
    let mut diag = Diagnostics {
        max_trace_error: 0.0,
        max_hermiticity_error: 0.0,
        min_eigenvalue: None,
        steps: 0,
        rejected: 0,
    };

    let record = |y: &CMatrix,
                  tau: f64,
                  times: &mut Vec<f64>,
                  pops: &mut Vec<Vec<f64>>,
                  snaps: &mut Option<Vec<CMatrix>>,
                  diag: &mut Diagnostics| {
        times.push(tau / gen.time_scale);
        pops.push(populations_of(gen, y));
        diag.max_trace_error = diag.max_trace_error.max((y.trace() - Complex64::new(1.0, 0.0)).norm());
        diag.max_hermiticity_error = diag.max_hermiticity_error.max(max_abs(&(y - y.adjoint())));
        if opts.certify_positivity {
            let ev = DensityMatrix {
                dim: n,
                mat: y.clone(),
            }
            .min_eigenvalue();
            diag.min_eigenvalue = Some(diag.min_eigenvalue.map_or(ev, |m: f64| m.min(ev)));
        }
        if let Some(s) = snaps.as_mut() {
            s.push(y.clone());
        }
    };

    record(&y, 0.0, &mut times, &mut pops, &mut snaps, &mut diag);

    let dtau_grid = tau_final / (grid - 1) as f64;
    let mut tau = 0.0;
    let mut h = (0.01 / cg_rate_bound(&cg)).min(dtau_grid);
    cg.rhs(&y, &mut k[0]);

    for gi in 1..grid {
        let target = if gi == grid - 1 { tau_final } else { gi as f64 * dtau_grid };
        while tau < target {
            let last = target - tau <= h * (1.0 + 1e-12);
            let step = if last { target - tau } else { h };
            if step < 1e-13 * tau_final.max(1.0) || diag.steps >= opts.max_steps {
                return Err(Error::StepUnderflow {
                    time: tau / gen.time_scale,
                    stiffness_ratio,
                });
            }

            let (k0, rest) = k.split_at_mut(1);
            let k0 = &k0[0];
            combo(&y, step, &[(A21, k0)], &mut tmp);
            cg.rhs(&tmp, &mut rest[0]);
            combo(&y, step, &[(A31, k0), (A32, &rest[0])], &mut tmp);
            cg.rhs(&tmp, &mut rest[1]);
            combo(&y, step, &[(A41, k0), (A42, &rest[0]), (A43, &rest[1])], &mut tmp);
            cg.rhs(&tmp, &mut rest[2]);
            combo(
                &y,
                step,
                &[(A51, k0), (A52, &rest[0]), (A53, &rest[1]), (A54, &rest[2])],
                &mut tmp,
            );
            cg.rhs(&tmp, &mut rest[3]);
            combo(
                &y,
                step,
                &[(A61, k0), (A62, &rest[0]), (A63, &rest[1]), (A64, &rest[2]), (A65, &rest[3])],
                &mut tmp,
            );
            cg.rhs(&tmp, &mut rest[4]);
            combo(
                &y,
                step,
                &[(B1, k0), (B3, &rest[1]), (B4, &rest[2]), (B5, &rest[3]), (B6, &rest[4])],
                &mut y_new,
            );
            cg.rhs(&y_new, &mut rest[5]);

            // error estimate, scaled by the state's largest entry
            let scale = opts.atol + opts.rtol * max_abs(&y).max(max_abs(&y_new));
            let mut err: f64 = 0.0;
            for idx in 0..n * n {
                let e = k0[idx] * E1
                    + rest[1][idx] * E3
                    + rest[2][idx] * E4
                    + rest[3][idx] * E5
                    + rest[4][idx] * E6
                    + rest[5][idx] * E7;
                let e = e.norm() * step / scale;
                err = if e.is_finite() { err.max(e) } else { f64::INFINITY };
            }
            diag.steps += 1;
            if err <= 1.0 {
                tau = if last { target } else { tau + step };
                std::mem::swap(&mut y, &mut y_new);
                let (k0, rest) = k.split_at_mut(1);
                std::mem::swap(&mut k0[0], &mut rest[5]);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = step * fac;
                }
            } else {
                diag.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h = step * fac;
            }
        }
        record(&y, tau, &mut times, &mut pops, &mut snaps, &mut diag);
    }

    Ok(EvolutionResult {
        times,
        populations: pops,
        snapshots: snaps,
        final_state: Some(y),
        diagnostics: diag,
    })
}

fn cg_rate_bound(cg: &CompiledGenerator) -> f64 {
    let kmax = cg.k_sparse.iter().fold(0.0f64, |a, &(_, _, v)| a.max(v.norm()));
    kmax.max(1e-300) * cg.dim as f64
}

/// Unique fixed point of the generator, via the vectorized superoperator
/// with one row replaced by the trace constraint.
pub fn steady_state(gen: &LindbladGenerator) -> Result<DensityMatrix> {
    let n = gen.dim;
    let mut l = gen.superoperator();
    for j in 0..n * n {
        l[(0, j)] = ZERO;
    }
    for i in 0..n {
        l[(0, i + i * n)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::zeros(n * n);
    rhs[0] = Complex64::new(1.0, 0.0);

    let lu = l.clone().lu();
    let u = lu.u();
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
    for i in 0..n * n {
        let p = u[(i, i)].norm();
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }
    if !(pmin > 1e-11 * pmax) {
        return Err(Error::NonUniqueSteadyState);
    }
    let x = lu.solve(&rhs).ok_or(Error::NonUniqueSteadyState)?;
    let mut rho = CMatrix::from_column_slice(n, n, x.as_slice());
    rho = (&rho + rho.adjoint()).scale(0.5);

    let resid = max_abs(&gen.apply(&rho)?) / gen.time_scale;
    if resid > 1e-10 {
        return Err(Error::Singular(format!("steady-state residual {resid:e}")));
    }
    let dm = DensityMatrix::new(rho)?;
    dm.certify()?;
    Ok(dm)
}

/// Initial basis state for rate extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisState {
    /// Phonon Fock state; for bipartite generators the cavity starts in vacuum.
    Phonon(usize),
    /// |n_c, n_m⟩
    Product { cavity: usize, phonon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fit window start, seconds.
    pub t_start: f64,
    /// Fit window end, seconds.
    pub t_end: f64,
    pub points: usize,
    pub min_r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// d p_to / dt at t = 0 of the fitted quadratic, rad/s.
    pub rate: f64,
    pub intercept: f64,
    pub curvature: f64,
    pub r_squared: f64,
}

/// Least-squares fit p(t) = a + b t + c t² returning (a, b, c, R²).
pub fn quadratic_fit(t: &[f64], p: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let m = t.len();
    if m < 4 || p.len() != m {
        return domain("quadratic fit needs at least 4 points");
    }
    let ts = t.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    let x = DMatrix::from_fn(m, 3, |i, j| (t[i] / ts).powi(j as i32));
    let y = DVector::from_column_slice(p);
    let coef = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let fit = &x * &coef;
    let mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fit.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((coef[0], coef[1] / ts, coef[2] / (ts * ts), r2))
}

/// Growth rate of the `to` phonon population starting from `from`, read off
/// a quadratic fit over the window; the intercept absorbs fast transients.
pub fn extract_transition_rate(
    gen: &LindbladGenerator,
    from: BasisState,
    to: usize,
    fit: &RateFit,
    opts: &EvolveOptions,
) -> Result<RateEstimate> {
    if !(fit.t_end > fit.t_start && fit.t_start >= 0.0) {
        return domain("fit window must satisfy 0 <= t_start < t_end");
    }
    let rho0 = match (from, gen.bipartite) {
        (BasisState::Phonon(k), None) => DensityMatrix::fock(gen.dim, k)?,
        (BasisState::Phonon(k), Some((dc, dm))) => {
            DensityMatrix::cavity_vacuum_product(dc, &DensityMatrix::fock(dm, k)?)
        }
        (BasisState::Product { cavity, phonon }, Some((dc, dm))) => {
            if cavity >= dc {
                return domain("cavity index outside truncation");
            }
            DensityMatrix::fock(gen.dim, cavity * dm + phonon.min(dm))?
        }
        (BasisState::Product { .. }, None) => return domain("product state needs a bipartite generator"),
    };
    let dim_m = gen.bipartite.map_or(gen.dim, |(_, m)| m);
    if to >= dim_m {
        return domain("target level outside truncation");
    }
    let points = fit.points.max(4);
    // integrate to t_end on a grid fine enough to contain the window samples
    let steps = ((points - 1) as f64 * fit.t_end / (fit.t_end - fit.t_start)).ceil() as usize;
    let res = evolve(gen, &rho0, fit.t_end, steps + 1, opts)?;
    let (t, p): (Vec<f64>, Vec<f64>) = res
        .times
        .iter()
        .zip(res.populations.iter())
        .filter(|(t, _)| **t >= fit.t_start * (1.0 - 1e-12))
        .map(|(t, p)| (*t, p[to]))
        .unzip();
    let (a, b, c, r2) = quadratic_fit(&t, &p)?;
    if r2 < fit.min_r_squared {
        return Err(Error::NonlinearWindow { r_squared: r2 });
    }
    Ok(RateEstimate {
        rate: b,
        intercept: a,
        curvature: c,
        r_squared: r2,
    })
}
