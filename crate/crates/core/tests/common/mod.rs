//! Exact 1D dielectric-cavity oracle: a perfectly conducting box on [0, 1]
//! (c = 1, so ω = k) holding a thin high-index membrane between two cells.
//! Mode frequencies are roots of the transfer-matrix dispersion relation
//! E(1) = 0 for a TE field launched as (E, E′) = (0, 1) at x = 0.

#![allow(dead_code)]

use num_complex::Complex64;
use qnd_core::coupling::{Interface, ModeField, PermittivityPerturbation};

/// Width and relative permittivity of each layer, left to right.
pub type Layers = Vec<(f64, f64)>;

#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub membrane_eps: f64,
    pub membrane_thickness: f64,
    pub membrane_center: f64,
    /// dε/dX of the left and right cells.
    pub slope_left: f64,
    pub slope_right: f64,
}

impl Cell {
    pub fn centered(slope_left: f64, slope_right: f64) -> Self {
        Self {
            membrane_eps: 100.0,
            membrane_thickness: 0.01,
            membrane_center: 0.5,
            slope_left,
            slope_right,
        }
    }

    /// Cells perturbed as ε = 1 + X·slope.
    pub fn layers(&self, x: f64) -> Layers {
        let half = 0.5 * self.membrane_thickness;
        vec![
            (self.membrane_center - half, 1.0 + x * self.slope_left),
            (self.membrane_thickness, self.membrane_eps),
            (1.0 - self.membrane_center - half, 1.0 + x * self.slope_right),
        ]
    }

    /// Membrane displaced rigidly by X.
    pub fn shifted_layers(&self, x: f64) -> Layers {
        Cell {
            membrane_center: self.membrane_center + x,
            ..*self
        }
        .layers(0.0)
    }

    pub fn interfaces(&self) -> [f64; 2] {
        let half = 0.5 * self.membrane_thickness;
        [self.membrane_center - half, self.membrane_center + half]
    }
}

fn step(k: f64, width: f64, eps: f64, (e, de): (f64, f64)) -> (f64, f64) {
    let q = k * eps.sqrt();
    let (s, c) = (q * width).sin_cos();
    (c * e + s / q * de, -q * s * e + c * de)
}

pub fn end_field(k: f64, layers: &Layers) -> f64 {
    layers.iter().fold((0.0, 1.0), |st, &(w, eps)| step(k, w, eps, st)).0
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "root not bracketed in [{lo}, {hi}]");
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
}

/// All roots of E(1; k) for k in [0.1, 60], ascending.
pub fn mode_wavenumbers(layers: &Layers) -> Vec<f64> {
    let n = 30_000;
    let ks: Vec<f64> = (0..n).map(|i| 0.1 + (60.0 - 0.1) * i as f64 / (n - 1) as f64).collect();
    let fv: Vec<f64> = ks.iter().map(|&k| end_field(k, layers)).collect();
    (0..n - 1)
        .filter(|&i| fv[i] * fv[i + 1] < 0.0)
        .map(|i| bisect(|k| end_field(k, layers), ks[i], ks[i + 1]))
        .collect()
}

/// Root near `k0` of the dispersion relation for `layers`.
pub fn track_root(k0: f64, layers: &Layers) -> f64 {
    bisect(|k| end_field(k, layers), k0 - 0.01, k0 + 0.01)
}

/// Five-point first and second derivatives of X ↦ ω(X) at X = 0.
pub fn derivatives(f: impl Fn(f64) -> f64, h: f64) -> (f64, f64) {
    let v: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|&j| f(j * h)).collect();
    let d1 = (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h);
    let d2 = (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h);
    (d1, d2)
}

/// Field of mode `k` at position `x`, piecewise sin/cos.
pub fn field_at(k: f64, layers: &Layers, x: f64) -> f64 {
    let mut st = (0.0, 1.0);
    let mut x0 = 0.0;
    for (i, &(w, eps)) in layers.iter().enumerate() {
        if x <= x0 + w || i + 1 == layers.len() {
            return step(k, x - x0, eps, st).0;
        }
        st = step(k, w, eps, st);
        x0 += w;
    }
    unreachable!()
}

/// Uniform points per layer; internal boundaries are split into a pair
/// 1e-12 apart so each side carries its own permittivity.
pub fn layer_grid(layers: &Layers, per_unit: usize) -> (Vec<f64>, Vec<usize>) {
    let (mut grid, mut layer_of) = (Vec::new(), Vec::new());
    let mut x0 = 0.0;
    let last = layers.len() - 1;
    for (i, &(w, _)) in layers.iter().enumerate() {
        let m = ((w * per_unit as f64).ceil() as usize).max(8);
        for j in 0..=m {
            let mut x = x0 + w * j as f64 / m as f64;
            if j == 0 && i > 0 {
                x += 1e-12;
            }
            if j == m && i < last {
                x -= 1e-12;
            }
            grid.push(x);
            layer_of.push(i);
        }
        x0 += w;
    }
    (grid, layer_of)
}

pub struct Discretized {
    pub modes: Vec<ModeField>,
    pub pert: PermittivityPerturbation,
}

/// Samples every mode in `ks` and the cell perturbation on a shared grid.
pub fn discretize(cell: &Cell, ks: &[f64], per_unit: usize) -> Discretized {
    let layers = cell.layers(0.0);
    let (grid, layer_of) = layer_grid(&layers, per_unit);
    let slopes = [cell.slope_left, 0.0, cell.slope_right];
    let eps: Vec<f64> = layer_of.iter().map(|&i| layers[i].1).collect();
    let deps: Vec<f64> = layer_of.iter().map(|&i| slopes[i]).collect();
    let modes = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let f = grid.iter().map(|&x| Complex64::new(field_at(k, &layers, x), 0.0)).collect();
            ModeField::new(grid.clone(), f, k, format!("k{i}")).unwrap()
        })
        .collect();
    let pert = PermittivityPerturbation::new(grid, eps, deps)
        .unwrap()
        .with_interfaces(
            cell.interfaces()
                .iter()
                .zip([-1.0, 1.0])
                .map(|(&position, normal_sign)| Interface {
                    position,
                    normal_sign,
                    eps_d: cell.membrane_eps,
                    eps_s: 1.0,
                    qu: 1.0,
                })
                .collect(),
        )
        .unwrap();
    Discretized { modes, pert }
}

/// Indices of the `count` modes closest in frequency to mode `i`.
pub fn nearest(ks: &[f64], i: usize, count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ks.len()).filter(|&j| j != i).collect();
    idx.sort_by(|&a, &b| (ks[a] - ks[i]).abs().total_cmp(&(ks[b] - ks[i]).abs()));
    idx.truncate(count);
    idx
}
