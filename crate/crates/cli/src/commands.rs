//! Subcommand bodies. Each returns a [`Report`] plus the resolved inputs
//! that go into the run manifest.

use std::f64::consts::TAU;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use qnd_core::coupling::{
    boundary_g1, boundary_overlap, classify_symmetry, g2_coefficient, ModeField, PermittivityPerturbation,
};
use qnd_core::fock::{suggest_dim, DensityMatrix};
use qnd_core::lindblad::{bipartite_generator, evolve, reduced_generator, EvolveOptions};
use qnd_core::rates::{feasibility, linear_limit_margin, max_monitorable_state, measurement_rate, transition_rates};
use qnd_core::system::{cooperativities, ParamFile, SystemParams};
use qnd_core::trajectories::{
    default_n_cap, fock_vector, simulate_jump_trajectory_with, EnsembleStats, QuantumJumpEngine, QuantumJumpOptions,
    RateTable, Trajectory,
};
use qnd_core::twomode::{
    backscatter_occupancy, mim_effective_g2, mim_frequencies, mim_linear_limit_margin, single_mode_mapping_with,
    TwoModeParams,
};
use qnd_core::Error;

use crate::output::{num, to_value, Cell, Report, Table};
use crate::parse::{parse_axis, parse_field_spec, parse_initial, read_field, read_interfaces, InitialState};
use crate::{Cli, CliError, Command, CouplingArgs, EvolveArgs, Method, RatesArgs, SweepArgs, TrajectArgs, TwomodeArgs};

pub fn dispatch(cli: &Cli) -> Result<(Report, Option<Value>), CliError> {
    match &cli.command {
        Command::Rates(a) => with_params(cli, |p| rates(p, a)),
        Command::Feasibility(a) => with_params(cli, |p| feasibility_report(p, a.n, cli.dominance)),
        Command::Evolve(a) => with_params(cli, |p| evolve_cmd(p, a, cli.dim)),
        Command::Traject(a) => with_params(cli, |p| traject(p, a, cli.dim, cli.seed)),
        Command::Sweep(a) => {
            let file = load_param_file(cli)?;
            let report = sweep(&file, a, cli.dominance)?;
            Ok((report, Some(to_value(&file))))
        }
        Command::Twomode(a) => {
            let path = config_path(cli)?;
            let file: TwoModeFile = parse_toml(path)?;
            Ok((twomode(&file, a, cli.dominance)?, Some(to_value(&file))))
        }
        Command::Coupling(a) => coupling(a),
    }
}

fn config_path(cli: &Cli) -> Result<&Path, CliError> {
    cli.config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required for this subcommand".into()))
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

fn load_param_file(cli: &Cli) -> Result<ParamFile, CliError> {
    parse_toml(config_path(cli)?)
}

fn with_params(
    cli: &Cli,
    f: impl FnOnce(&SystemParams) -> Result<Report, CliError>,
) -> Result<(Report, Option<Value>), CliError> {
    let file = load_param_file(cli)?;
    let params = file.resolve()?;
    let report = f(&params)?;
    Ok((report, Some(to_value(&ParamFile::from_params(&params)))))
}

fn hz(rate: f64) -> f64 {
    rate / TAU
}

fn rates(p: &SystemParams, a: &RatesArgs) -> Result<Report, CliError> {
    let th0 = p.gamma_th0();
    if !a.absolute && !(th0 > 0.0) {
        return Err(CliError::Input(
            "normalizing by Γ_th⁰ needs n̄_th > 0; use --absolute for rates in Hz".into(),
        ));
    }
    let unit = if a.absolute { TAU } else { th0 };
    let cols = [
        "n",
        "gamma_meas",
        "gamma_th",
        "gamma_up1",
        "gamma_down1",
        "gamma_up2",
        "gamma_down2",
        "gamma_th_up",
        "gamma_th_down",
        "total_decoherence",
    ];
    let mut t = Table::new(&cols);
    for n in 0..=a.n_max {
        let r = transition_rates(p, n);
        t.push(vec![
            n.into(),
            (r.gamma_meas / unit).into(),
            (r.gamma_th / unit).into(),
            (r.gamma_up1 / unit).into(),
            (r.gamma_down1 / unit).into(),
            (r.gamma_up2 / unit).into(),
            (r.gamma_down2 / unit).into(),
            (r.gamma_th_up / unit).into(),
            (r.gamma_th_down / unit).into(),
            (r.total_decoherence / unit).into(),
        ]);
    }
    Ok(Report {
        summary: Some(json!({
            "units": if a.absolute { "Hz" } else { "gamma_th0" },
            "gamma_th0_hz": num(hz(th0)),
        })),
        table: Some(t),
        sidecar: None,
        passed: true,
    })
}

fn feasibility_report(p: &SystemParams, n: usize, dominance: f64) -> Result<Report, CliError> {
    let r = feasibility(p, n, dominance);
    let passed = r.all_pass();
    let failing: Vec<&str> = r.checks().iter().filter(|(_, c)| !c.pass).map(|(k, _)| *k).collect();
    Ok(Report {
        summary: Some(json!({
            "report": to_value(&r),
            "cooperativities": to_value(&cooperativities(p)),
            "all_pass": passed,
            "failing": failing,
        })),
        table: None,
        sidecar: None,
        passed,
    })
}

fn evolve_cmd(p: &SystemParams, a: &EvolveArgs, dim: Option<usize>) -> Result<Report, CliError> {
    let init = parse_initial(&a.initial)?;
    let auto = suggest_dim(p.nbar_th()).max(8);
    let dim = match (&init, dim) {
        (_, Some(d)) => d,
        (InitialState::Fock(k), None) => auto.max(k + 8),
        (InitialState::Thermal(n), None) => auto.max(suggest_dim(*n)),
        (InitialState::Diagonal(v), None) => auto.max(v.len() + 4),
    };
    let rho_m = match &init {
        InitialState::Fock(k) if *k >= dim => return Err(Error::TruncationReached { n_cap: dim }.into()),
        InitialState::Fock(k) => DensityMatrix::fock(dim, *k)?,
        InitialState::Thermal(n) => DensityMatrix::thermal(dim, *n)?,
        InitialState::Diagonal(v) if v.len() > dim => return Err(Error::TruncationReached { n_cap: dim }.into()),
        InitialState::Diagonal(v) => {
            let mut full = v.clone();
            full.resize(dim, 0.0);
            DensityMatrix::from_populations(&full)?
        }
    };
    let (gen, rho0) = match a.cavity_dim {
        Some(dc) => (
            bipartite_generator(p, dc, dim)?,
            DensityMatrix::cavity_vacuum_product(dc, &rho_m),
        ),
        None => (reduced_generator(p, dim)?, rho_m),
    };
    let opts = EvolveOptions {
        rtol: a.rtol,
        atol: a.atol,
        certify_positivity: a.certify,
        ..Default::default()
    };
    let res = evolve(&gen, &rho0, a.t_final, a.grid, &opts)?;
    let mut cols: Vec<String> = vec!["t_s".into()];
    cols.extend((0..dim).map(|n| format!("p_{n}")));
    cols.push("mean_n".into());
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    for (time, pops) in res.times.iter().zip(&res.populations) {
        let mut row: Vec<Cell> = vec![(*time).into()];
        row.extend(pops.iter().map(|&x| Cell::Num(x)));
        row.push(pops.iter().enumerate().map(|(n, x)| n as f64 * x).sum::<f64>().into());
        t.push(row);
    }
    Ok(Report {
        summary: Some(json!({
            "dim": dim,
            "cavity_dim": a.cavity_dim,
            "diagnostics": to_value(&res.diagnostics),
            "failed": res.failed(),
        })),
        table: Some(t),
        sidecar: None,
        passed: !res.failed(),
    })
}

fn traject(p: &SystemParams, a: &TrajectArgs, dim: Option<usize>, seed: u64) -> Result<Report, CliError> {
    if a.count == 0 {
        return Err(CliError::Input("--count must be >= 1".into()));
    }
    if !(a.t_final > 0.0) {
        return Err(CliError::Input("--t-final must be > 0".into()));
    }
    let cap = dim.unwrap_or_else(|| default_n_cap(p.nbar_th()));
    let trajectories: Vec<Trajectory> = match a.method {
        Method::Gillespie => {
            let table = RateTable::new(p, cap);
            (0..a.count)
                .into_par_iter()
                .map(|i| simulate_jump_trajectory_with(&table, a.n0, a.t_final, seed.wrapping_add(i as u64)))
                .collect::<Result<_, _>>()?
        }
        Method::QuantumJump => {
            if a.n0 >= cap {
                return Err(Error::TruncationReached { n_cap: cap }.into());
            }
            let gen = reduced_generator(p, cap)?;
            let engine = QuantumJumpEngine::new(&gen, a.t_final, &QuantumJumpOptions::default())?;
            let psi0 = fock_vector(cap, a.n0);
            (0..a.count)
                .into_par_iter()
                .map(|i| {
                    let tr = engine.run(&psi0, seed.wrapping_add(i as u64), false)?.to_trajectory()?;
                    if tr.events.iter().any(|e| e.new_n + 1 >= cap) {
                        return Err(Error::TruncationReached { n_cap: cap - 1 });
                    }
                    Ok(tr)
                })
                .collect::<Result<_, _>>()?
        }
    };
    let stats = EnsembleStats::from_trajectories(&trajectories, seed);
    let dt = a.dt.unwrap_or(a.t_final / 1000.0);
    if !(dt > 0.0) || a.window < 0.0 {
        return Err(CliError::Input("--dt must be > 0 and --window >= 0".into()));
    }
    let mut t = Table::new(&["trajectory", "seed", "t_s", "n"]);
    for (i, tr) in trajectories.iter().enumerate() {
        for (time, n) in tr.staircase(dt, a.window) {
            t.push(vec![i.into(), tr.seed.into(), time.into(), n.into()]);
        }
    }
    let th0 = p.gamma_th0();
    let stats_json = json!({
        "method": to_value(&a.method),
        "n_cap": cap,
        "meas_over_th0": if th0 > 0.0 { num(measurement_rate(p) / th0) } else { num(f64::INFINITY) },
        "stats": to_value(&stats),
    });
    Ok(Report {
        summary: Some(stats_json.clone()),
        table: Some(t),
        sidecar: Some(stats_json),
        passed: true,
    })
}

fn sweep(base: &ParamFile, a: &SweepArgs, dominance: f64) -> Result<Report, CliError> {
    let axes = a.axes.iter().map(|s| parse_axis(s)).collect::<Result<Vec<_>, _>>()?;
    for ax in &axes {
        base.clone().set(&ax.key, 0.0)?;
    }
    let mut cols: Vec<String> = axes.iter().map(|ax| ax.key.clone()).collect();
    let probe = feasibility(&SystemParams::reference(), 0, dominance);
    cols.extend(
        [
            "gamma_th0_hz",
            "gamma_meas_hz",
            "gamma_th_hz",
            "gamma_up1_hz",
            "gamma_down1_hz",
            "gamma_up2_hz",
            "gamma_down2_hz",
            "meas_over_th0",
            "c1",
            "c2",
            "n_max",
            "linear_limit_margin",
        ]
        .map(String::from),
    );
    for (name, _) in probe.checks() {
        cols.push(format!("{name}_ratio"));
        cols.push(format!("{name}_pass"));
    }
    cols.push("all_pass".into());

    // row-major: the first axis varies slowest
    let total: usize = axes.iter().map(|ax| ax.values.len()).product();
    let points: Vec<Vec<f64>> = (0..if axes.is_empty() { 0 } else { total })
        .map(|mut idx| {
            let mut v = vec![0.0; axes.len()];
            for (k, ax) in axes.iter().enumerate().rev() {
                v[k] = ax.values[idx % ax.values.len()];
                idx /= ax.values.len();
            }
            v
        })
        .collect();
    let rows = points
        .par_iter()
        .map(|point| -> Result<Vec<Cell>, CliError> {
            let mut file = base.clone();
            for (ax, &v) in axes.iter().zip(point) {
                file.set(&ax.key, v)?;
            }
            let p = file.resolve()?;
            let r = transition_rates(&p, a.n);
            let c = cooperativities(&p);
            let f = feasibility(&p, a.n, dominance);
            let th0 = p.gamma_th0();
            let mut row: Vec<Cell> = point.iter().map(|&v| Cell::Num(v)).collect();
            row.extend(
                [
                    hz(th0),
                    hz(r.gamma_meas),
                    hz(r.gamma_th),
                    hz(r.gamma_up1),
                    hz(r.gamma_down1),
                    hz(r.gamma_up2),
                    hz(r.gamma_down2),
                    if th0 > 0.0 { r.gamma_meas / th0 } else { f64::INFINITY },
                    c.c1,
                    c.c2,
                    max_monitorable_state(&p).raw,
                    linear_limit_margin(&p),
                ]
                .map(Cell::Num),
            );
            for (_, chk) in f.checks() {
                row.push(chk.ratio.into());
                row.push(chk.pass.into());
            }
            row.push(f.all_pass().into());
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report {
        summary: None,
        table: Some(Table { columns: cols, rows }),
        sidecar: None,
        passed: true,
    })
}

/// Two-mode parameter file; frequencies in Hz, couplings per meter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoModeFile {
    pub omega_1_hz: f64,
    pub omega_2_hz: f64,
    pub nu_hz: f64,
    pub g1_a1_hz_per_m: f64,
    pub g1_a2_hz_per_m: f64,
    #[serde(default)]
    pub g2_a1_hz_per_m2: f64,
    #[serde(default)]
    pub g2_a2_hz_per_m2: f64,
    pub kappa_hz: f64,
    #[serde(default)]
    pub delta_hz: f64,
    pub omega_m_hz: Option<f64>,
    pub x_zpf_m: Option<f64>,
    /// Photons in the driven mode a₁.
    pub n1: Option<f64>,
}

impl TwoModeFile {
    fn params(&self) -> TwoModeParams {
        TwoModeParams {
            omega_1: TAU * self.omega_1_hz,
            omega_2: TAU * self.omega_2_hz,
            nu: TAU * self.nu_hz,
            g1_a1: TAU * self.g1_a1_hz_per_m,
            g1_a2: TAU * self.g1_a2_hz_per_m,
            g2_a1: TAU * self.g2_a1_hz_per_m2,
            g2_a2: TAU * self.g2_a2_hz_per_m2,
            kappa: TAU * self.kappa_hz,
            delta: TAU * self.delta_hz,
            omega_m: TAU * self.omega_m_hz.unwrap_or(0.0),
            x_zpf: self.x_zpf_m.unwrap_or(0.0),
        }
    }
}

fn twomode(file: &TwoModeFile, a: &TwomodeArgs, dominance: f64) -> Result<Report, CliError> {
    let p = file.params();
    if !(p.kappa > 0.0) || !(p.nu >= 0.0) {
        return Err(CliError::Input("kappa_hz must be > 0 and nu_hz >= 0".into()));
    }
    let mut summary = serde_json::Map::new();
    summary.insert("splitting_hz".into(), num(2.0 * file.nu_hz));
    summary.insert("g1_cross_hz_per_m".into(), num(hz(p.g1_cross())));
    match mim_effective_g2(&p) {
        Ok(c) => {
            summary.insert("g2_prime_hz_per_m2".into(), num(hz(c.g2_prime)));
            if let Some(g2) = c.g2_single_photon {
                summary.insert("g2_single_photon_hz".into(), num(hz(g2)));
                let g1 = p.g1_cross() * p.x_zpf;
                summary.insert("g1_single_photon_hz".into(), num(hz(g1)));
                if p.omega_m > 0.0 {
                    summary.insert(
                        "linear_limit_margin".into(),
                        num(mim_linear_limit_margin(g1, p.nu, p.omega_m, p.kappa)),
                    );
                }
            }
        }
        Err(e) => {
            summary.insert("g2_prime_hz_per_m2".into(), Value::Null);
            summary.insert("note".into(), Value::from(e.to_string()));
        }
    }
    if let Some(n1) = file.n1 {
        summary.insert("n2_backscatter".into(), num(backscatter_occupancy(p.nu, p.delta, p.kappa, n1)));
        summary.insert(
            "single_mode_mapping".into(),
            to_value(&single_mode_mapping_with(p.nu, p.kappa, p.delta, n1, dominance)),
        );
    }
    let table = match a.x_max {
        None => None,
        Some(x_max) => {
            if !(x_max > 0.0) || a.points < 2 {
                return Err(CliError::Input("--x-max must be > 0 and --points >= 2".into()));
            }
            let g2p = mim_effective_g2(&p).map(|c| c.g2_prime).unwrap_or(f64::NAN);
            let mut t = Table::new(&["x_m", "omega_plus_hz", "omega_minus_hz", "quadratic_plus_hz"]);
            for i in 0..a.points {
                let x = -x_max + 2.0 * x_max * i as f64 / (a.points - 1) as f64;
                let (hi, lo) = mim_frequencies(&p, x);
                let mean = 0.5 * (p.omega_1 + p.omega_2);
                let quad = mean + (p.nu.powi(2) + (0.5 * (p.omega_1 - p.omega_2)).powi(2)).sqrt() + g2p * x * x;
                t.push(vec![x.into(), hz(hi).into(), hz(lo).into(), hz(quad).into()]);
            }
            Some(t)
        }
    };
    Ok(Report {
        summary: Some(Value::Object(summary)),
        table,
        sidecar: None,
        passed: true,
    })
}

fn coupling(a: &CouplingArgs) -> Result<(Report, Option<Value>), CliError> {
    let mut inputs = serde_json::Map::new();
    let mut digest = |path: &Path| -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        inputs.insert(path.display().to_string(), Value::from(hex::encode(Sha256::digest(&bytes))));
        Ok(())
    };
    let mut modes = Vec::new();
    let mut pert = None;
    for arg in &a.fields {
        let (path, f_hz) = parse_field_spec(arg)?;
        digest(&path)?;
        let ff = read_field(&path)?;
        let label = path.file_stem().map_or_else(|| arg.clone(), |s| s.to_string_lossy().into_owned());
        if pert.is_none() {
            pert = Some(PermittivityPerturbation::new(ff.grid.clone(), ff.epsilon, ff.depsilon_dx)?);
        }
        modes.push(ModeField::new(ff.grid, ff.field, TAU * f_hz, label)?);
    }
    let mut pert = pert.ok_or_else(|| CliError::Input("at least one --field is required".into()))?;
    if let Some(path) = &a.interfaces {
        digest(path)?;
        pert = pert.with_interfaces(read_interfaces(path)?)?;
    }
    let (target, others) = modes.split_first().expect("at least one mode");
    let q = g2_coefficient(target, others, &pert)?;
    let mut summary = json!({
        "mode": target.label,
        "g1_hz_per_m": num(hz(q.g1)),
        "self_term_hz_per_m2": num(hz(q.self_term)),
        "g2_hz_per_m2": num(hz(q.g2)),
        "truncation_hz_per_m2": num(hz(q.truncation)),
        "cross": q.cross.iter().map(|c| json!({
            "label": c.label,
            "frequency_hz": num(hz(c.frequency)),
            "g_ij_hz_per_m2": num(hz(c.value)),
        })).collect::<Vec<_>>(),
        "symmetry": to_value(&classify_symmetry(target, others, &pert)?),
    });
    if !pert.interfaces.is_empty() {
        let b = boundary_overlap(target, target, &pert)?;
        summary["boundary_overlap"] = json!({"re": num(b.re), "im": num(b.im)});
        summary["boundary_g1_hz_per_m"] = num(hz(boundary_g1(target, &pert)?));
    }
    let mut t = Table::new(&["label", "frequency_hz", "g_ij_hz_per_m2"]);
    for c in &q.cross {
        t.push(vec![c.label.as_str().into(), hz(c.frequency).into(), hz(c.value).into()]);
    }
    let report = Report {
        summary: Some(summary),
        table: if q.cross.is_empty() { None } else { Some(t) },
        sidecar: None,
        passed: true,
    };
    Ok((report, Some(json!({ "inputs": Value::Object(inputs) }))))
}
