mod common;

use common::{derivatives, discretize, mode_wavenumbers, nearest, track_root, Cell};
use qnd_core::coupling::{boundary_g1, g1_coefficient, g2_coefficient};

const MODE: usize = 4;
const PER_UNIT: usize = 20_000;

fn check(cell: Cell) -> (f64, f64, f64, f64) {
    let ks = mode_wavenumbers(&cell.layers(0.0));
    let k = ks[MODE];
    let (d1, d2) = derivatives(|x| track_root(k, &cell.layers(x)), 1e-5);
    let others = nearest(&ks, MODE, 3);
    let mut pick = vec![k];
    pick.extend(others.iter().map(|&j| ks[j]));
    let d = discretize(&cell, &pick, PER_UNIT);
    let q = g2_coefficient(&d.modes[0], &d.modes[1..], &d.pert).unwrap();
    (q.g1, d1, q.g2, d2)
}

#[test]
fn oracle_mode_spectrum() {
    let ks = mode_wavenumbers(&Cell::centered(1.0, -1.0).layers(0.0));
    assert!(ks.len() > 10);
    assert!((ks[MODE] - 12.9587).abs() < 1e-4, "{}", ks[MODE]);
}

#[test]
fn odd_perturbation_is_purely_quadratic() {
    let (g1, d1, g2, d2) = check(Cell::centered(1.0, -1.0));
    assert!(d1.abs() < 1e-6, "{d1}");
    assert!(g1.abs() < 1e-9, "{g1}");
    assert!(((g2 - d2) / d2).abs() < 0.02, "{g2} vs {d2}");
}

#[test]
fn one_sided_perturbation_has_both_orders() {
    let (g1, d1, g2, d2) = check(Cell::centered(1.0, 0.0));
    assert!(((g1 - d1) / d1).abs() < 1e-4, "{g1} vs {d1}");
    assert!((g1 + 3.08987).abs() < 1e-4, "{g1}");
    assert!(((g2 - d2) / d2).abs() < 0.02, "{g2} vs {d2}");
}

#[test]
fn moving_membrane_boundary_shift() {
    let cell = Cell {
        membrane_center: 0.37,
        ..Cell::centered(0.0, 0.0)
    };
    let ks = mode_wavenumbers(&cell.layers(0.0));
    let k = ks[MODE];
    let (d1, _) = derivatives(|x| track_root(k, &cell.shifted_layers(x)), 1e-5);
    let d = discretize(&cell, &[k], PER_UNIT);
    let g1 = boundary_g1(&d.modes[0], &d.pert).unwrap();
    assert!(d1.abs() > 1e-2, "{d1}");
    assert!(((g1 - d1) / d1).abs() < 1e-3, "{g1} vs {d1}");
    // a rigid shift leaves the bulk permittivity derivative zero
    assert_eq!(g1_coefficient(&d.modes[0], &d.pert).unwrap(), 0.0);
}
