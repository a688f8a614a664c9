//! Plot-ready CSV files. Every real is written with 17 significant digits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::density::{Grid, GridDensity, QuantileFunction};
use crate::diagnostics::{DiagnosticsRow, SteadyState};
use crate::error::{Error, Result};
use crate::particles::ParticleEnsemble;
use crate::toy::ToyTrajectory;

pub const DIAGNOSTICS_HEADER: [&str; 8] = ["t", "mass", "linf", "l2sq", "m2", "energy", "dissipation", "w2_to_ref"];

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e.to_string()),
        other => Error::Csv {
            line,
            reason: format!("{other:?}"),
        },
    }
}

/// Writes a header row and one row per record; `None` becomes an empty field.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<Option<f64>>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Precondition(format!(
                "row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|v| v.map(format_real).unwrap_or_default()))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn write_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<Option<f64>>>) -> Result<()> {
    write_table(File::create(path)?, header, rows)
}

/// A parsed table: header names and rows of optional reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_reader(File::open(path)?);
    let header = r.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let row = rec
            .iter()
            .map(|field| {
                if field.is_empty() {
                    Ok(None)
                } else {
                    field.trim().parse::<f64>().map(Some).map_err(|e| Error::Csv {
                        line: k + 2,
                        reason: format!("`{field}`: {e}"),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// `snap_t<time>.csv`.
pub fn snapshot_name(t: f64) -> String {
    format!("snap_t{t}.csv")
}

/// `x,rho` at the cell centres.
pub fn write_density(path: &Path, rho: &GridDensity) -> Result<()> {
    let g = *rho.grid();
    write_file(
        path,
        &["x", "rho"],
        rho.values().iter().enumerate().map(|(i, v)| vec![Some(g.center(i)), Some(*v)]),
    )
}

/// Reads an `x,rho` file written by [`write_density`], recovering the grid
/// from the (uniformly spaced) centres.
pub fn read_density(path: &Path) -> Result<GridDensity> {
    let t = read_table(path)?;
    let (xi, ri) = match (t.column("x"), t.column("rho")) {
        (Some(x), Some(r)) => (x, r),
        _ => {
            return Err(Error::Csv {
                line: 1,
                reason: "expected columns x,rho".into(),
            })
        }
    };
    let field = |row: &Vec<Option<f64>>, c: usize, line: usize| {
        row.get(c).copied().flatten().ok_or(Error::Csv {
            line,
            reason: "missing value".into(),
        })
    };
    let mut xs = Vec::with_capacity(t.rows.len());
    let mut values = Vec::with_capacity(t.rows.len());
    for (k, row) in t.rows.iter().enumerate() {
        xs.push(field(row, xi, k + 2)?);
        values.push(field(row, ri, k + 2)?);
    }
    if xs.len() < 2 {
        return Err(Error::Csv {
            line: 2,
            reason: "need at least two cells".into(),
        });
    }
    let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let left = xs[0] - 0.5 * dx;
    let grid = Grid::new(left, left + dx * xs.len() as f64, dx)?;
    GridDensity::new(grid, values)
}

/// `z,u` at the quantile nodes.
pub fn write_quantiles(path: &Path, q: &QuantileFunction) -> Result<()> {
    write_file(
        path,
        &["z", "u"],
        q.nodes().zip(q.values()).map(|(z, u)| vec![Some(z), Some(*u)]),
    )
}

pub fn write_diagnostics(path: &Path, rows: &[DiagnosticsRow]) -> Result<()> {
    write_table(File::create(path)?, &DIAGNOSTICS_HEADER, rows.iter().map(diagnostics_record))
}

fn diagnostics_record(r: &DiagnosticsRow) -> Vec<Option<f64>> {
    vec![
        Some(r.t),
        Some(r.mass),
        Some(r.linf),
        Some(r.l2sq),
        Some(r.m2),
        Some(r.energy),
        Some(r.dissipation),
        r.w2_to_ref,
    ]
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let t = read_table(path)?;
    if t.header != DIAGNOSTICS_HEADER {
        return Err(Error::Csv {
            line: 1,
            reason: format!("expected header {}", DIAGNOSTICS_HEADER.join(",")),
        });
    }
    t.rows
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let req = |c: usize| {
                row.get(c).copied().flatten().ok_or(Error::Csv {
                    line: k + 2,
                    reason: format!("missing `{}`", DIAGNOSTICS_HEADER[c]),
                })
            };
            Ok(DiagnosticsRow {
                t: req(0)?,
                mass: req(1)?,
                linf: req(2)?,
                l2sq: req(3)?,
                m2: req(4)?,
                energy: req(5)?,
                dissipation: req(6)?,
                w2_to_ref: row.get(7).copied().flatten(),
            })
        })
        .collect()
}

/// `t,X_1,...,X_N`, one row per ensemble.
pub fn write_trajectory(path: &Path, snapshots: &[ParticleEnsemble]) -> Result<()> {
    let n = snapshots.first().map_or(0, ParticleEnsemble::len);
    let names: Vec<String> = std::iter::once("t".to_owned()).chain((1..=n).map(|i| format!("X_{i}"))).collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    write_file(
        path,
        &header,
        snapshots
            .iter()
            .map(|e| std::iter::once(e.time()).chain(e.positions().iter().copied()).map(Some).collect()),
    )
}

/// `epsilon,C,residual,support_left,support_right`.
pub fn write_steady_meta(path: &Path, epsilon: f64, steady: &SteadyState) -> Result<()> {
    let (l, r) = match steady.support() {
        Some((l, r)) => (Some(l), Some(r)),
        None => (None, None),
    };
    write_file(
        path,
        &["epsilon", "C", "residual", "support_left", "support_right"],
        [vec![Some(epsilon), Some(steady.lagrange_constant), Some(steady.residual), l, r]],
    )
}

/// `epsilon,a,b,fold`; missing equilibria are left empty.
pub fn write_toy_equilibria(path: &Path, epsilon: f64, a: Option<f64>, b: Option<f64>, fold: f64) -> Result<()> {
    write_file(path, &["epsilon", "a", "b", "fold"], [vec![Some(epsilon), a, b, Some(fold)]])
}

/// `t,X`.
pub fn write_toy_trajectory(path: &Path, traj: &ToyTrajectory) -> Result<()> {
    write_file(
        path,
        &["t", "X"],
        traj.times.iter().zip(&traj.positions).map(|(t, x)| vec![Some(*t), Some(*x)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::InitialDatum;

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_real(0.1), "1.0000000000000001e-1");
        assert_eq!(format_real(-2.0), "-2.0000000000000000e0");
        let x = std::f64::consts::PI / 7.0;
        assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn density_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(-1.0, 1.0, 0.01).unwrap();
        let rho = InitialDatum::parabola(9.0 / 8.0, 9.0 / 4.0).build(&grid).unwrap();
        let p = dir.path().join(snapshot_name(0.5));
        write_density(&p, &rho).unwrap();
        assert!(p.ends_with("snap_t0.5.csv"));
        let back = read_density(&p).unwrap();
        assert_eq!(back.values(), rho.values());
        assert!((back.grid().dx() - 0.01).abs() < 1e-15);
        assert_eq!(back.grid().len(), 200);
    }

    #[test]
    fn diagnostics_round_trip_with_missing_column() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            DiagnosticsRow {
                t: 0.0,
                mass: 1.0,
                linf: 2.0,
                l2sq: 3.0,
                m2: 4.0,
                energy: -5.0,
                dissipation: 6.0,
                w2_to_ref: None,
            },
            DiagnosticsRow {
                t: 1.0,
                mass: 1.0,
                linf: 1.5,
                l2sq: 2.5,
                m2: 4.5,
                energy: -5.5,
                dissipation: 0.25,
                w2_to_ref: Some(1e-3),
            },
        ];
        let p = dir.path().join("diagnostics.csv");
        write_diagnostics(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,mass,linf,l2sq,m2,energy,dissipation,w2_to_ref\n"));
        assert_eq!(read_diagnostics(&p).unwrap(), rows);
    }

    #[test]
    fn malformed_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "x,rho\n0.0,abc\n").unwrap();
        assert!(matches!(read_density(&p), Err(Error::Csv { line: 2, .. })));
    }

    #[test]
    fn trajectory_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trajectory.csv");
        let e = ParticleEnsemble::new(vec![-1.0, 0.0, 1.0], 0.0).unwrap();
        write_trajectory(&p, &[e]).unwrap();
        let t = read_table(&p).unwrap();
        assert_eq!(t.header, vec!["t", "X_1", "X_2", "X_3"]);
        assert_eq!(t.rows[0], vec![Some(0.0), Some(-1.0), Some(0.0), Some(1.0)]);
    }
}
