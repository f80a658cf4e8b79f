use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_qnd");

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_env(args: &[&str], threads: &str) -> Output {
    Command::new(BIN)
        .args(args)
        .env("QND_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Header plus rows of a numeric CSV, skipping the manifest comment.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (h, rows) = csv(text);
    let i = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn config_with(dir: &Path, edit: impl Fn(&str) -> String) -> PathBuf {
    let text = std::fs::read_to_string(reference_config()).unwrap();
    let p = dir.join("params.toml");
    std::fs::write(&p, edit(&text)).unwrap();
    p
}

#[test]
fn rates_table_in_thermal_units() {
    let cfg = reference_config();
    let o = run(&["rates", "--config", cfg.to_str().unwrap(), "--n-max", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# manifest_sha256="));
    let th = column(&text, "gamma_th");
    let meas = column(&text, "gamma_meas");
    assert!((th[0] - 1.0).abs() < 1e-12);
    assert!(meas.iter().all(|m| (m - 32.0).abs() < 1e-9));
    // Γ_th(n) = 1 + 6n crosses the measurement rate between n = 5 and 6
    assert!(th[5] < meas[5] && th[6] > meas[6]);
}

#[test]
fn feasibility_exit_codes() {
    let cfg = reference_config();
    let c = cfg.to_str().unwrap();
    assert_eq!(run(&["feasibility", "--config", c]).status.code(), Some(2));
    let ok = run(&["feasibility", "--config", c, "--dominance", "5"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));

    let dir = tempfile::tempdir().unwrap();
    let strong = config_with(dir.path(), |t| t.replace("g1_hz = 50.0e3", "g1_hz = 5.0e6"));
    let o = run(&["feasibility", "--config", strong.to_str().unwrap(), "--dominance", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("report.linear_limit.pass,false"));

    let missing = config_with(dir.path(), |t| t.replace("kappa_hz = 500.0e6\n", ""));
    let o = run(&["feasibility", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kappa_hz"), "{}", stderr(&o));

    let unknown = config_with(dir.path(), |t| format!("{t}bogus = 1.0\n"));
    let o = run(&["feasibility", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn sweep_over_photon_number_and_coupling() {
    let cfg = reference_config();
    let c = cfg.to_str().unwrap();
    let o = run(&["sweep", "--config", c, "--axis", "nbar_photon=list:1,10,100"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ratio = column(&stdout(&o), "meas_over_th0");
    for (r, want) in ratio.iter().zip([0.32, 3.2, 32.0]) {
        assert!((r / want - 1.0).abs() < 1e-9, "{r} vs {want}");
    }

    let o = run(&["sweep", "--config", c, "--axis", "g1_hz=log:1e3:1e5:5"]);
    let text = stdout(&o);
    let g1 = column(&text, "g1_hz");
    let up = column(&text, "gamma_up1_hz");
    let slope = (up[4] / up[0]).ln() / (g1[4] / g1[0]).ln();
    assert!((slope - 2.0).abs() < 0.01, "exponent {slope}");
}

#[test]
fn sweep_grid_order_and_empty_axis() {
    let cfg = reference_config();
    let c = cfg.to_str().unwrap();
    let o = run(&[
        "sweep", "--config", c, "--axis", "nbar_th=list:0.1,0.2", "--axis", "g2_hz=list:1e4,2e4,3e4",
    ]);
    let text = stdout(&o);
    let a = column(&text, "nbar_th");
    let b = column(&text, "g2_hz");
    assert_eq!(a, vec![0.1, 0.1, 0.1, 0.2, 0.2, 0.2]);
    assert_eq!(b, vec![1e4, 2e4, 3e4, 1e4, 2e4, 3e4]);

    let o = run(&["sweep", "--config", c, "--axis", "nbar_photon=list:"]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv(&stdout(&o));
    assert!(rows.is_empty());
    assert_eq!(header[0], "nbar_photon");

    let o = run(&["sweep", "--config", c, "--axis", "bogus=list:1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("valid keys"));
}

#[test]
fn outputs_are_deterministic_across_threads() {
    let cfg = reference_config();
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}.csv"));
        let o = run_env(
            &[
                "traject", "--config", cfg.to_str().unwrap(), "--n0", "3", "--t-final", "2e-3", "--count", "6",
                "--seed", "11", "--out", out.to_str().unwrap(),
            ],
            threads,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let body = std::fs::read(&out).unwrap();
        let stats = std::fs::read(dir.path().join(format!("run{i}.csv.stats.json"))).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join(format!("run{i}.csv.manifest.json"))).unwrap())
                .unwrap();
        let hash = manifest["manifest_sha256"].as_str().unwrap();
        assert!(String::from_utf8_lossy(&body).starts_with(&format!("# manifest_sha256={hash}\n")));
        assert_eq!(manifest["seed"], 11);
        bodies.push((body, stats));
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn seeds_change_the_trajectories() {
    let cfg = reference_config();
    let c = cfg.to_str().unwrap();
    let a = run(&["traject", "--config", c, "--n0", "3", "--t-final", "2e-3", "--seed", "1"]);
    let b = run(&["traject", "--config", c, "--n0", "3", "--t-final", "2e-3", "--seed", "2"]);
    assert_ne!(stdout(&a), stdout(&b));
}

#[test]
fn invalid_inputs_exit_one() {
    let cfg = reference_config();
    let c = cfg.to_str().unwrap();
    let o = run(&["feasibility", "--config", c, "--n", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(">= 0"));

    let o = run(&["evolve", "--config", c, "--initial", "diag:0.5,0.6", "--t-final", "1e-4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sum"));

    let o = run(&["rates"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--config"));

    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn failed_runs_leave_no_output() {
    let cfg = reference_config();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = run(&[
        "evolve", "--config", cfg.to_str().unwrap(), "--initial", "fock:9", "--dim", "4", "--t-final", "1e-4",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn evolution_conserves_probability() {
    let cfg = reference_config();
    let o = run(&[
        "evolve", "--config", cfg.to_str().unwrap(), "--initial", "fock:2", "--t-final", "2e-4", "--grid", "5",
        "--certify",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (h, rows) = csv(&stdout(&o));
    let pops: Vec<usize> = (0..h.len()).filter(|&i| h[i].starts_with("p_")).collect();
    for r in &rows {
        let total: f64 = pops.iter().map(|&i| r[i].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn twomode_summary() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/membrane_in_middle.toml");
    let o = run(&["twomode", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let f = |k: &str| v[k].as_f64().unwrap();
    // G₂′ = G₁²/(2ν), x_zpf = 1 fm
    assert!((f("g2_prime_hz_per_m2") / 5e26 - 1.0).abs() < 1e-12);
    assert!((f("g2_single_photon_hz") / 5e-4 - 1.0).abs() < 1e-12);
    assert!((f("linear_limit_margin") / 1e-6 - 1.0).abs() < 1e-12);
    assert!((f("n2_backscatter") / 4e10 - 1.0).abs() < 1e-12);
    assert_eq!(v["single_mode_mapping"]["regime"], "strong");
}

fn write_mode(path: &Path, k: f64, slope: f64) {
    let mut s = String::from("x_m,re_e,im_e,epsilon,depsilon_dx\n");
    let n = 401;
    for i in 0..n {
        let x = i as f64 / (n - 1) as f64 * 1e-6;
        s.push_str(&format!("{x:e},{:e},0,2.25,{slope:e}\n", (k * x).sin()));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn coupling_for_a_uniform_index_gradient() {
    // E = sin(kx) on a uniform medium: G₁ = −(ω/2)·(dε/dx)/ε
    let dir = tempfile::tempdir().unwrap();
    let k = std::f64::consts::PI / 1e-6;
    let (a, b) = (dir.path().join("m1.csv"), dir.path().join("m2.csv"));
    write_mode(&a, 2.0 * k, 1e5);
    write_mode(&b, 3.0 * k, 1e5);
    let fa = format!("{}@2e14", a.display());
    let fb = format!("{}@3e14", b.display());
    let o = run(&["coupling", "--field", &fa, "--field", &fb, "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let g1 = v["g1_hz_per_m"].as_f64().unwrap();
    let want = -0.5 * 2e14 * 1e5 / 2.25;
    assert!((g1 / want - 1.0).abs() < 1e-3, "{g1} vs {want}");
    assert_eq!(v["cross"].as_array().unwrap().len(), 1);

    let bad = format!("{}@x", a.display());
    assert_eq!(run(&["coupling", "--field", &bad]).status.code(), Some(1));
}
