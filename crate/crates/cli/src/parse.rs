//! Parsers for the small textual forms accepted on the command line and the
//! field/interface CSV inputs.

use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::CliError;

/// Phonon number; negative values are a domain error.
pub fn parse_n(s: &str) -> Result<usize, String> {
    let v: i64 = s.trim().parse().map_err(|_| format!("'{s}' is not an integer"))?;
    usize::try_from(v).map_err(|_| format!("phonon number must be >= 0, got {v}"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fock(usize),
    Thermal(f64),
    Diagonal(Vec<f64>),
}

pub fn parse_initial(s: &str) -> Result<InitialState, CliError> {
    let bad = |why: &str| CliError::Input(format!("initial state '{s}': {why}"));
    let (kind, rest) = s.split_once(':').ok_or_else(|| bad("expected fock:k, thermal:nbar or diag:p0,p1,..."))?;
    match kind {
        "fock" => Ok(InitialState::Fock(parse_n(rest).map_err(|e| bad(&e))?)),
        "thermal" => {
            let n: f64 = rest.trim().parse().map_err(|_| bad("occupancy is not a number"))?;
            if !(n >= 0.0 && n.is_finite()) {
                return Err(bad("occupancy must be >= 0"));
            }
            Ok(InitialState::Thermal(n))
        }
        "diag" => {
            let p = rest
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("populations must be numbers"))?;
            if p.iter().any(|x| !(*x >= 0.0)) {
                return Err(bad("populations must be >= 0"));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(bad(&format!("populations sum to {total}, not 1")));
            }
            Ok(InitialState::Diagonal(p))
        }
        _ => Err(bad("unknown kind")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<f64>,
}

/// key=log:a:b:n, key=lin:a:b:n or key=list:v1,v2,... (n = 0 or an empty
/// list gives an empty axis).
pub fn parse_axis(s: &str) -> Result<Axis, CliError> {
    let bad = |why: &str| CliError::Input(format!("axis '{s}': {why}"));
    let (key, grid) = s.split_once('=').ok_or_else(|| bad("expected key=kind:..."))?;
    let (kind, rest) = grid.split_once(':').ok_or_else(|| bad("expected log:, lin: or list:"))?;
    let float = |x: &str| x.trim().parse::<f64>().map_err(|_| bad(&format!("'{x}' is not a number")));
    let values = match kind {
        "log" | "lin" => {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("expected a:b:n"));
            }
            let (a, b) = (float(parts[0])?, float(parts[1])?);
            let n: usize = parts[2].trim().parse().map_err(|_| bad("point count must be an integer"))?;
            if kind == "log" && !(a > 0.0 && b > 0.0) {
                return Err(bad("log axis bounds must be > 0"));
            }
            (0..n)
                .map(|i| {
                    let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                    if kind == "log" {
                        (a.ln() + f * (b.ln() - a.ln())).exp()
                    } else {
                        a + f * (b - a)
                    }
                })
                .collect()
        }
        "list" if rest.trim().is_empty() => Vec::new(),
        "list" => rest.split(',').map(float).collect::<Result<_, _>>()?,
        _ => return Err(bad("expected log:, lin: or list:")),
    };
    Ok(Axis {
        key: key.trim().to_string(),
        values,
    })
}

/// PATH@FREQ_HZ
pub fn parse_field_spec(s: &str) -> Result<(PathBuf, f64), CliError> {
    let (path, f) = s
        .rsplit_once('@')
        .ok_or_else(|| CliError::Input(format!("field '{s}': expected PATH@FREQ_HZ")))?;
    let f: f64 = f
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("field '{s}': frequency is not a number")))?;
    Ok((PathBuf::from(path), f))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Numeric rows of a CSV with the given header; '#' lines are comments.
fn numeric_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let text = read(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let at = |line: usize, why: String| CliError::Input(format!("{}:{}: {why}", path.display(), line + 1));
    let (hl, head) = lines.next().ok_or_else(|| at(0, "empty file".into()))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols != header {
        return Err(at(hl, format!("expected header '{}'", header.join(","))));
    }
    lines
        .map(|(i, l)| {
            let v = l
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| at(i, "non-numeric value".into()))?;
            if v.len() != header.len() {
                return Err(at(i, format!("expected {} columns, got {}", header.len(), v.len())));
            }
            Ok(v)
        })
        .collect()
}

pub const FIELD_HEADER: [&str; 5] = ["x_m", "re_e", "im_e", "epsilon", "depsilon_dx"];
pub const INTERFACE_HEADER: [&str; 5] = ["position_m", "normal_sign", "eps_d", "eps_s", "qu"];

pub struct FieldFile {
    pub grid: Vec<f64>,
    pub field: Vec<Complex64>,
    pub epsilon: Vec<f64>,
    pub depsilon_dx: Vec<f64>,
}

pub fn read_field(path: &Path) -> Result<FieldFile, CliError> {
    let rows = numeric_rows(path, &FIELD_HEADER)?;
    Ok(FieldFile {
        grid: rows.iter().map(|r| r[0]).collect(),
        field: rows.iter().map(|r| Complex64::new(r[1], r[2])).collect(),
        epsilon: rows.iter().map(|r| r[3]).collect(),
        depsilon_dx: rows.iter().map(|r| r[4]).collect(),
    })
}

pub fn read_interfaces(path: &Path) -> Result<Vec<qnd_core::coupling::Interface>, CliError> {
    Ok(numeric_rows(path, &INTERFACE_HEADER)?
        .into_iter()
        .map(|r| qnd_core::coupling::Interface {
            position: r[0],
            normal_sign: r[1],
            eps_d: r[2],
            eps_s: r[3],
            qu: r[4],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phonon_numbers() {
        assert_eq!(parse_n("3"), Ok(3));
        assert!(parse_n("-1").unwrap_err().contains(">= 0"));
        assert!(parse_n("x").is_err());
    }

    #[test]
    fn initial_states() {
        assert_eq!(parse_initial("fock:2").unwrap(), InitialState::Fock(2));
        assert_eq!(parse_initial("thermal:0.25").unwrap(), InitialState::Thermal(0.25));
        assert_eq!(
            parse_initial("diag:0.5,0.5").unwrap(),
            InitialState::Diagonal(vec![0.5, 0.5])
        );
        assert!(parse_initial("diag:0.5,0.6").is_err());
        assert!(parse_initial("fock:-1").is_err());
        assert!(parse_initial("coherent:1").is_err());
    }

    #[test]
    fn axes() {
        let a = parse_axis("nbar_photon=log:1:100:3").unwrap();
        assert_eq!(a.key, "nbar_photon");
        assert!((a.values[1] - 10.0).abs() < 1e-12);
        assert_eq!(parse_axis("g1_hz=lin:0:10:3").unwrap().values, vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_axis("g1_hz=list:1,2").unwrap().values, vec![1.0, 2.0]);
        assert!(parse_axis("g1_hz=list:").unwrap().values.is_empty());
        assert!(parse_axis("g1_hz=lin:0:1:0").unwrap().values.is_empty());
        assert!(parse_axis("g1_hz=log:0:1:3").is_err());
        assert!(parse_axis("g1_hz").is_err());
    }

    #[test]
    fn field_arguments() {
        assert_eq!(
            parse_field_spec("a@b.csv@1e9").unwrap(),
            (PathBuf::from("a@b.csv"), 1e9)
        );
        assert!(parse_field_spec("a.csv").is_err());
    }
}
