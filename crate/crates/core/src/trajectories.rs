//! Stochastic phonon-number trajectories: an exact Gillespie sampler for the
//! number-diagonal dynamics and a quantum-jump unraveling of any generator.
//!
//! Random streams come from ChaCha8 seeded with `seed_from_u64`; the stream
//! for trajectory `i` of an ensemble uses seed `seed_base.wrapping_add(i)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fock::CMatrix;
use crate::lindblad::{ChannelKind, LindbladGenerator};
use crate::rates::transition_rates;
use crate::system::SystemParams;

pub type StateVector = DVector<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpChannel {
    ThermalUp,
    ThermalDown,
    OptUp1,
    OptDown1,
    OptUp2,
    OptDown2,
}

impl JumpChannel {
    pub const ALL: [JumpChannel; 6] = [
        Self::ThermalUp,
        Self::ThermalDown,
        Self::OptUp1,
        Self::OptDown1,
        Self::OptUp2,
        Self::OptDown2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn step(self) -> i64 {
        match self {
            Self::ThermalUp | Self::OptUp1 => 1,
            Self::ThermalDown | Self::OptDown1 => -1,
            Self::OptUp2 => 2,
            Self::OptDown2 => -2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ThermalUp => "thermal_up",
            Self::ThermalDown => "thermal_down",
            Self::OptUp1 => "opt_up1",
            Self::OptDown1 => "opt_down1",
            Self::OptUp2 => "opt_up2",
            Self::OptDown2 => "opt_down2",
        }
    }

    pub fn from_kind(kind: ChannelKind) -> Option<Self> {
        match kind {
            ChannelKind::ThermalUp => Some(Self::ThermalUp),
            ChannelKind::ThermalDown => Some(Self::ThermalDown),
            ChannelKind::OptUp1 => Some(Self::OptUp1),
            ChannelKind::OptDown1 => Some(Self::OptDown1),
            ChannelKind::OptUp2 => Some(Self::OptUp2),
            ChannelKind::OptDown2 => Some(Self::OptDown2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Seconds.
    pub time: f64,
    pub new_n: usize,
    pub channel: JumpChannel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub initial_n: usize,
    /// Seconds.
    pub t_final: f64,
    pub events: Vec<Event>,
}

impl Trajectory {
    /// Checks ordering, step sizes and non-negativity of the record.
    pub fn validate(&self) -> Result<()> {
        let mut n = self.initial_n as i64;
        let mut t = 0.0;
        for e in &self.events {
            if !(e.time > t) || e.time > self.t_final {
                return domain(format!("event time {} out of order", e.time));
            }
            n += e.channel.step();
            if n < 0 || n as usize != e.new_n {
                return domain(format!("event at {} inconsistent with channel {:?}", e.time, e.channel));
            }
            t = e.time;
        }
        Ok(())
    }

    pub fn n_at(&self, t: f64) -> usize {
        let k = self.events.partition_point(|e| e.time <= t);
        if k == 0 {
            self.initial_n
        } else {
            self.events[k - 1].new_n
        }
    }

    /// Time spent in each phonon number.
    pub fn occupancy_time(&self) -> Vec<f64> {
        let mut occ = Vec::new();
        let mut add = |n: usize, dt: f64| {
            if occ.len() <= n {
                occ.resize(n + 1, 0.0);
            }
            occ[n] += dt;
        };
        let (mut t, mut n) = (0.0, self.initial_n);
        for e in &self.events {
            add(n, e.time - t);
            t = e.time;
            n = e.new_n;
        }
        add(n, self.t_final - t);
        occ
    }

    fn integral(&self, t: f64) -> f64 {
        let (mut acc, mut t0, mut n) = (0.0, 0.0, self.initial_n as f64);
        for e in &self.events {
            if e.time >= t {
                break;
            }
            acc += n * (e.time - t0);
            t0 = e.time;
            n = e.new_n as f64;
        }
        acc + n * (t - t0)
    }

    /// Boxcar average of n(t) over `window` seconds, sampled every `dt`;
    /// `window = 0` samples n(t) itself.
    pub fn staircase(&self, dt: f64, window: f64) -> Vec<(f64, f64)> {
        assert!(dt > 0.0 && window >= 0.0);
        let steps = (self.t_final / dt).floor() as usize;
        (0..=steps)
            .map(|k| {
                let t = k as f64 * dt;
                let a = (t - 0.5 * window).max(0.0);
                let b = (t + 0.5 * window).min(self.t_final);
                let avg = if b > a {
                    (self.integral(b) - self.integral(a)) / (b - a)
                } else {
                    self.n_at(t) as f64
                };
                (t, avg)
            })
            .collect()
    }
}

/// n_cap = max(20, 4 × smallest n whose Bose-Einstein tail mass is < 1e-9).
pub fn default_n_cap(nbar_th: f64) -> usize {
    let tail = if nbar_th <= 0.0 {
        1
    } else {
        let q = nbar_th / (nbar_th + 1.0);
        // P(n' ≥ n) = qⁿ
        ((1e-9f64).ln() / q.ln()).ceil().max(1.0) as usize
    };
    (4 * tail).max(20)
}

/// Per-state channel rates for n = 0..n_cap, in s⁻¹.
#[derive(Debug, Clone)]
pub struct RateTable {
    rates: Vec<[f64; 6]>,
}

impl RateTable {
    pub fn new(params: &SystemParams, n_cap: usize) -> Self {
        let rates = (0..n_cap)
            .map(|n| {
                let r = transition_rates(params, n);
                [
                    r.gamma_th_up,
                    r.gamma_th_down,
                    r.gamma_up1,
                    r.gamma_down1,
                    r.gamma_up2,
                    r.gamma_down2,
                ]
            })
            .collect();
        Self { rates }
    }

    pub fn n_cap(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self, n: usize) -> &[f64; 6] {
        &self.rates[n]
    }

    pub fn total(&self, n: usize) -> f64 {
        self.rates[n].iter().sum()
    }
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let dt = -u.ln() / rate;
        if dt > 0.0 {
            return dt;
        }
    }
}

/// Exact Gillespie sampling of the phonon-number Markov chain with the
/// default truncation cap.
pub fn simulate_jump_trajectory(params: &SystemParams, n0: usize, t_final: f64, seed: u64) -> Result<Trajectory> {
    let table = RateTable::new(params, default_n_cap(params.nbar_th()));
    simulate_jump_trajectory_with(&table, n0, t_final, seed)
}

pub fn simulate_jump_trajectory_with(table: &RateTable, n0: usize, t_final: f64, seed: u64) -> Result<Trajectory> {
    if !(t_final > 0.0) {
        return domain("t_final must be positive");
    }
    let n_cap = table.n_cap();
    if n0 >= n_cap {
        return Err(Error::TruncationReached { n_cap });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let (mut t, mut n) = (0.0, n0);
    loop {
        let rates = table.rates(n);
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            break;
        }
        t += exp_sample(&mut rng, total);
        if t > t_final {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = JumpChannel::ALL[0];
        for (k, &r) in rates.iter().enumerate() {
            if r > 0.0 {
                pick = JumpChannel::ALL[k];
                if u < r {
                    break;
                }
                u -= r;
            }
        }
        let next = n as i64 + pick.step();
        n = next as usize;
        if n >= n_cap {
            return Err(Error::TruncationReached { n_cap });
        }
        events.push(Event {
            time: t,
            new_n: n,
            channel: pick,
        });
    }
    Ok(Trajectory {
        seed,
        initial_n: n0,
        t_final,
        events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumJumpOptions {
    /// Upper bound on (tick length) × (largest possible jump rate).
    pub resolution: f64,
    /// Number of equally spaced state samples including t = 0 and t_final;
    /// 0 stores none.
    pub samples: usize,
}

impl Default for QuantumJumpOptions {
    fn default() -> Self {
        Self {
            resolution: 1e-4,
            samples: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumJump {
    /// Seconds.
    pub time: f64,
    pub kind: ChannelKind,
    /// Phonon number after the jump when the post-jump state is a Fock state.
    pub n_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumJumpTrajectory {
    pub seed: u64,
    pub t_final: f64,
    pub initial_n: Option<usize>,
    pub jumps: Vec<QuantumJump>,
    /// (time in seconds, normalized state)
    pub samples: Vec<(f64, StateVector)>,
}

impl QuantumJumpTrajectory {
    /// Phonon-number record; dephasing jumps leave n unchanged and are
    /// dropped.
    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let initial_n = self
            .initial_n
            .ok_or_else(|| Error::Domain("initial state is not a Fock state".into()))?;
        let mut events = Vec::new();
        for j in &self.jumps {
            if j.kind == ChannelKind::Dephasing {
                continue;
            }
            let channel = JumpChannel::from_kind(j.kind)
                .ok_or_else(|| Error::Domain(format!("jump {:?} has no phonon-number label", j.kind)))?;
            let new_n = j
                .n_after
                .ok_or_else(|| Error::Domain("post-jump state is not a Fock state".into()))?;
            events.push(Event {
                time: j.time,
                new_n,
                channel,
            });
        }
        Ok(Trajectory {
            seed: self.seed,
            initial_n,
            t_final: self.t_final,
            events,
        })
    }
}

enum Propagator {
    Dense(Vec<CMatrix>),
    Diagonal(Vec<Vec<Complex64>>),
}

impl Propagator {
    fn apply(&self, level: usize, psi: &StateVector, out: &mut StateVector) {
        match self {
            Self::Dense(u) => u[level].mul_to(psi, out),
            Self::Diagonal(d) => {
                for (o, (x, y)) in out.iter_mut().zip(psi.iter().zip(&d[level])) {
                    *o = x * y;
                }
            }
        }
    }
}

fn fock_index(psi: &StateVector) -> Option<usize> {
    let norm: f64 = psi.norm_squared();
    let mut found = None;
    for (i, z) in psi.iter().enumerate() {
        if z.norm_sqr() > 1e-20 * norm {
            if found.is_some() {
                return None;
            }
            found = Some(i);
        }
    }
    found
}

/// Jump operator stored as its nonzero entries (row, column, value).
struct JumpOp {
    entries: Vec<(usize, usize, Complex64)>,
    weight: f64,
    kind: ChannelKind,
}

impl JumpOp {
    fn new(mat: &CMatrix, weight: f64, kind: ChannelKind) -> Self {
        let entries = (0..mat.ncols())
            .flat_map(|c| (0..mat.nrows()).map(move |r| (r, c)))
            .filter(|&(r, c)| mat[(r, c)].norm() != 0.0)
            .map(|(r, c)| (r, c, mat[(r, c)]))
            .collect();
        Self { entries, weight, kind }
    }

    fn apply(&self, psi: &StateVector, out: &mut StateVector) {
        out.fill(Complex64::new(0.0, 0.0));
        for &(r, c, v) in &self.entries {
            out[r] += v * psi[c];
        }
    }

    /// max_i (o†o)_ii
    fn max_column_weight(&self, dim: usize) -> f64 {
        let mut col = vec![0.0; dim];
        for &(_, c, v) in &self.entries {
            col[c] += v.norm_sqr();
        }
        col.into_iter().fold(0.0, f64::max)
    }
}

/// Precomputed propagators for one generator; reusable across trajectories
/// with the same t_final and options.
pub struct QuantumJumpEngine {
    dim: usize,
    tick: f64,
    total_ticks: u64,
    sample_ticks: u64,
    levels: usize,
    prop: Propagator,
    jumps: Vec<JumpOp>,
    time_scale: f64,
}

impl QuantumJumpEngine {
    pub fn new(gen: &LindbladGenerator, t_final: f64, opts: &QuantumJumpOptions) -> Result<Self> {
        if !(t_final > 0.0) {
            return domain("t_final must be positive");
        }
        let cg = gen.compile();
        let tau_final = t_final * gen.time_scale;
        let jumps: Vec<JumpOp> = gen
            .channels
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| JumpOp::new(&c.op.mat, c.weight / gen.time_scale, c.kind))
            .collect();
        let rate_bound: f64 = jumps
            .iter()
            .map(|j| j.weight * j.max_column_weight(gen.dim))
            .sum();

        // ticks per sample interval is a power of two so samples fall on ticks
        let intervals = opts.samples.saturating_sub(1).max(1) as u64;
        let interval = tau_final / intervals as f64;
        let mut m = 0u32;
        while interval / 2f64.powi(m as i32) * rate_bound > opts.resolution {
            m += 1;
            if m > 52 {
                return Err(Error::StepUnderflow {
                    time: 0.0,
                    stiffness_ratio: rate_bound * tau_final,
                });
            }
        }
        let sample_ticks = 1u64 << m;
        let total_ticks = sample_ticks * intervals;
        let tick = interval / sample_ticks as f64;
        let levels = 64 - total_ticks.leading_zeros() as usize;

        let k = &cg.k;
        let is_diag = k.iter().enumerate().all(|(idx, z)| idx % gen.dim == idx / gen.dim || z.norm() == 0.0);
        let minus_i = Complex64::new(0.0, -1.0);
        let prop = if is_diag {
            Propagator::Diagonal(
                (0..levels)
                    .map(|j| {
                        let dt = tick * (1u64 << j) as f64;
                        (0..gen.dim).map(|i| (minus_i * k[(i, i)] * dt).exp()).collect()
                    })
                    .collect(),
            )
        } else {
            Propagator::Dense(
                (0..levels)
                    .map(|j| {
                        let dt = tick * (1u64 << j) as f64;
                        (k * (minus_i * dt)).exp()
                    })
                    .collect(),
            )
        };
        Ok(Self {
            dim: gen.dim,
            tick,
            total_ticks,
            sample_ticks,
            levels,
            prop,
            jumps,
            time_scale: gen.time_scale,
        })
    }

    pub fn run(&self, psi0: &StateVector, seed: u64, keep_samples: bool) -> Result<QuantumJumpTrajectory> {
        if psi0.len() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: self.dim,
                got: psi0.len(),
            });
        }
        let n0 = psi0.norm();
        if (n0 - 1.0).abs() > 1e-10 {
            return domain("initial state must be normalized");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut psi = psi0.clone();
        let mut trial = StateVector::zeros(self.dim);
        let mut r: f64 = rng.random();
        let mut ticks = 0u64;
        let mut jumps = Vec::new();
        let mut samples = Vec::new();
        let to_seconds = |ticks: u64| ticks as f64 * self.tick / self.time_scale;

        if keep_samples {
            samples.push((0.0, psi.clone()));
        }
        while ticks < self.total_ticks {
            let limit = ((ticks / self.sample_ticks) + 1) * self.sample_ticks;
            let limit = limit.min(self.total_ticks);
            let mut crossed = false;
            'descent: for j in (0..self.levels).rev() {
                let len = 1u64 << j;
                while ticks + len <= limit {
                    self.prop.apply(j, &psi, &mut trial);
                    if trial.norm_squared() > r {
                        std::mem::swap(&mut psi, &mut trial);
                        ticks += len;
                    } else {
                        if j == 0 {
                            // the crossing lies inside this tick
                            std::mem::swap(&mut psi, &mut trial);
                            ticks += 1;
                            crossed = true;
                            break 'descent;
                        }
                        break;
                    }
                }
            }

            if crossed {
                let mut probs = Vec::with_capacity(self.jumps.len());
                for jop in &self.jumps {
                    jop.apply(&psi, &mut trial);
                    probs.push(jop.weight * trial.norm_squared());
                }
                let total: f64 = probs.iter().sum();
                if total > 0.0 {
                    let mut u = rng.random::<f64>() * total;
                    let mut pick = 0;
                    for (k, &p) in probs.iter().enumerate() {
                        if p > 0.0 {
                            pick = k;
                            if u < p {
                                break;
                            }
                            u -= p;
                        }
                    }
                    self.jumps[pick].apply(&psi, &mut trial);
                    psi = trial.unscale(trial.norm());
                    jumps.push(QuantumJump {
                        time: to_seconds(ticks),
                        kind: self.jumps[pick].kind,
                        n_after: fock_index(&psi),
                    });
                } else {
                    psi = psi.unscale(psi.norm());
                }
                r = rng.random();
            }

            if keep_samples && ticks == limit {
                samples.push((to_seconds(ticks), psi.unscale(psi.norm())));
            }
        }
        Ok(QuantumJumpTrajectory {
            seed,
            t_final: to_seconds(self.total_ticks),
            initial_n: fock_index(psi0),
            jumps,
            samples,
        })
    }
}

/// Monte Carlo wave-function unraveling: drift under the non-Hermitian
/// K = H − (i/2)Σ w o†o until ‖ψ‖² falls to a uniform draw, then jump
/// through a channel chosen with probability ∝ w‖oψ‖².
pub fn simulate_quantum_jump(
    gen: &LindbladGenerator,
    psi0: &StateVector,
    t_final: f64,
    seed: u64,
    opts: &QuantumJumpOptions,
) -> Result<QuantumJumpTrajectory> {
    QuantumJumpEngine::new(gen, t_final, opts)?.run(psi0, seed, opts.samples > 0)
}

pub fn fock_vector(dim: usize, n: usize) -> StateVector {
    let mut v = StateVector::zeros(dim);
    v[n] = Complex64::new(1.0, 0.0);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub count: usize,
    pub seed_base: u64,
    /// Σ t_final over trajectories, seconds.
    pub total_time: f64,
    pub total_events: u64,
    /// Fraction of trajectory time spent in each n; sums to 1.
    pub occupancy: Vec<f64>,
    /// Seconds spent in each n.
    pub time_in: Vec<f64>,
    /// Jumps out of n per channel, indexed by `JumpChannel::index`.
    pub counts: Vec<[u64; 6]>,
    /// counts / time_in, s⁻¹.
    pub empirical_rates: Vec<[f64; 6]>,
    /// Mean length of completed sojourns in n, seconds.
    pub mean_dwell: Vec<Option<f64>>,
    /// Number of completed sojourns in n.
    pub dwell_count: Vec<u64>,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    total_time: f64,
    events: u64,
    time_in: Vec<f64>,
    counts: Vec<[u64; 6]>,
    dwell_sum: Vec<f64>,
    dwell_count: Vec<u64>,
}

impl Tally {
    fn grow(&mut self, n: usize) {
        if self.time_in.len() <= n {
            self.time_in.resize(n + 1, 0.0);
            self.counts.resize(n + 1, [0; 6]);
            self.dwell_sum.resize(n + 1, 0.0);
            self.dwell_count.resize(n + 1, 0);
        }
    }

    fn add(&mut self, tr: &Trajectory) {
        self.total_time += tr.t_final;
        self.events += tr.events.len() as u64;
        let (mut t, mut n) = (0.0, tr.initial_n);
        for e in &tr.events {
            self.grow(n);
            let dt = e.time - t;
            self.time_in[n] += dt;
            self.counts[n][e.channel.index()] += 1;
            self.dwell_sum[n] += dt;
            self.dwell_count[n] += 1;
            t = e.time;
            n = e.new_n;
        }
        self.grow(n);
        self.time_in[n] += tr.t_final - t;
    }

    fn merge(mut self, other: &Tally) -> Self {
        self.total_time += other.total_time;
        self.events += other.events;
        if let Some(n) = other.time_in.len().checked_sub(1) {
            self.grow(n);
        }
        for n in 0..other.time_in.len() {
            self.time_in[n] += other.time_in[n];
            self.dwell_sum[n] += other.dwell_sum[n];
            self.dwell_count[n] += other.dwell_count[n];
            for c in 0..6 {
                self.counts[n][c] += other.counts[n][c];
            }
        }
        self
    }

    fn finish(self, count: usize, seed_base: u64) -> EnsembleStats {
        let total: f64 = self.time_in.iter().sum();
        EnsembleStats {
            count,
            seed_base,
            total_time: self.total_time,
            total_events: self.events,
            occupancy: self.time_in.iter().map(|t| t / total).collect(),
            empirical_rates: self
                .counts
                .iter()
                .zip(&self.time_in)
                .map(|(c, &t)| {
                    let mut r = [0.0; 6];
                    for k in 0..6 {
                        if t > 0.0 {
                            r[k] = c[k] as f64 / t;
                        }
                    }
                    r
                })
                .collect(),
            mean_dwell: self
                .dwell_sum
                .iter()
                .zip(&self.dwell_count)
                .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
                .collect(),
            dwell_count: self.dwell_count,
            time_in: self.time_in,
            counts: self.counts,
        }
    }
}

impl EnsembleStats {
    pub fn from_trajectories(trajectories: &[Trajectory], seed_base: u64) -> Self {
        let mut t = Tally::default();
        for tr in trajectories {
            t.add(tr);
        }
        t.finish(trajectories.len(), seed_base)
    }

    pub fn mean_occupancy(&self) -> f64 {
        self.occupancy.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Jumps out of n (all channels).
    pub fn visits(&self, n: usize) -> u64 {
        self.counts.get(n).map_or(0, |c| c.iter().sum())
    }

    pub fn count(&self, n: usize, channel: JumpChannel) -> u64 {
        self.counts.get(n).map_or(0, |c| c[channel.index()])
    }

    pub fn time(&self, n: usize) -> f64 {
        self.time_in.get(n).copied().unwrap_or(0.0)
    }

    pub fn rate(&self, n: usize, channel: JumpChannel) -> f64 {
        self.empirical_rates.get(n).map_or(0.0, |r| r[channel.index()])
    }

    /// Total-variation distance to a reference distribution.
    pub fn total_variation(&self, reference: &[f64]) -> f64 {
        let len = self.occupancy.len().max(reference.len());
        0.5 * (0..len)
            .map(|n| (self.occupancy.get(n).unwrap_or(&0.0) - reference.get(n).unwrap_or(&0.0)).abs())
            .sum::<f64>()
    }
}

fn reduce(tallies: Vec<Tally>, count: usize, seed_base: u64) -> EnsembleStats {
    // fixed index order keeps the floating-point sums independent of threads
    tallies
        .iter()
        .fold(Tally::default(), |acc, t| acc.merge(t))
        .finish(count, seed_base)
}

/// Gillespie ensemble; trajectory i uses seed `seed_base + i`.
pub fn ensemble_jump(
    params: &SystemParams,
    n0: usize,
    t_final: f64,
    count: usize,
    seed_base: u64,
) -> Result<EnsembleStats> {
    let table = RateTable::new(params, default_n_cap(params.nbar_th()));
    ensemble_jump_with(&table, n0, t_final, count, seed_base)
}

pub fn ensemble_jump_with(
    table: &RateTable,
    n0: usize,
    t_final: f64,
    count: usize,
    seed_base: u64,
) -> Result<EnsembleStats> {
    if count == 0 {
        return domain("ensemble count must be >= 1");
    }
    let tallies = (0..count)
        .into_par_iter()
        .map(|i| {
            let tr = simulate_jump_trajectory_with(table, n0, t_final, seed_base.wrapping_add(i as u64))?;
            let mut t = Tally::default();
            t.add(&tr);
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(tallies, count, seed_base))
}

/// Quantum-jump ensemble from a Fock state of a number-diagonal generator.
pub fn ensemble_quantum_jump(
    gen: &LindbladGenerator,
    n0: usize,
    t_final: f64,
    count: usize,
    seed_base: u64,
    opts: &QuantumJumpOptions,
) -> Result<EnsembleStats> {
    if count == 0 {
        return domain("ensemble count must be >= 1");
    }
    if n0 >= gen.dim {
        return Err(Error::TruncationReached { n_cap: gen.dim });
    }
    let engine = QuantumJumpEngine::new(gen, t_final, opts)?;
    let psi0 = fock_vector(gen.dim, n0);
    let tallies = (0..count)
        .into_par_iter()
        .map(|i| {
            let tr = engine.run(&psi0, seed_base.wrapping_add(i as u64), false)?.to_trajectory()?;
            if tr.events.iter().any(|e| e.new_n + 1 >= gen.dim) {
                return Err(Error::TruncationReached { n_cap: gen.dim - 1 });
            }
            let mut t = Tally::default();
            t.add(&tr);
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(tallies, count, seed_base))
}

/// Ensemble average of |ψ⟩⟨ψ| at the sample times.
pub fn quantum_jump_density(
    gen: &LindbladGenerator,
    psi0: &StateVector,
    t_final: f64,
    samples: usize,
    count: usize,
    seed_base: u64,
    resolution: f64,
) -> Result<(Vec<f64>, Vec<CMatrix>)> {
    if samples < 2 || count == 0 {
        return domain("need at least 2 samples and 1 trajectory");
    }
    let opts = QuantumJumpOptions { resolution, samples };
    let engine = QuantumJumpEngine::new(gen, t_final, &opts)?;
    let runs = (0..count)
        .into_par_iter()
        .map(|i| engine.run(psi0, seed_base.wrapping_add(i as u64), true))
        .collect::<Result<Vec<_>>>()?;
    let times: Vec<f64> = runs[0].samples.iter().map(|(t, _)| *t).collect();
    let mut rhos = vec![DMatrix::zeros(gen.dim, gen.dim); times.len()];
    for run in &runs {
        for (k, (_, psi)) in run.samples.iter().enumerate() {
            rhos[k] += psi * psi.adjoint();
        }
    }
    for r in &mut rhos {
        *r = r.unscale(count as f64);
    }
    Ok((times, rhos))
}

/// Relative difference of two Poisson rate estimates and its 1σ error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateComparison {
    pub relative_difference: f64,
    pub sigma: f64,
}

impl RateComparison {
    /// Compares an empirical count over `time` against an exact rate.
    pub fn against_exact(count: u64, time: f64, exact: f64) -> Self {
        let est = count as f64 / time;
        Self {
            relative_difference: (est - exact) / exact,
            sigma: 1.0 / (count.max(1) as f64).sqrt(),
        }
    }

    /// Compares two independent empirical rates.
    pub fn between(count_a: u64, time_a: f64, count_b: u64, time_b: f64) -> Self {
        let (a, b) = (count_a as f64 / time_a, count_b as f64 / time_b);
        Self {
            relative_difference: (a - b) / b,
            sigma: (1.0 / count_a.max(1) as f64 + 1.0 / count_b.max(1) as f64).sqrt(),
        }
    }

    /// Within `tol`, or within 3σ when the statistics cannot resolve `tol`
    /// at 3σ.
    pub fn agrees(&self, tol: f64) -> bool {
        let d = self.relative_difference.abs();
        if 3.0 * self.sigma <= tol {
            d <= tol
        } else {
            d <= 3.0 * self.sigma
        }
    }
}
