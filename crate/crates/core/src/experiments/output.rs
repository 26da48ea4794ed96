//! Output files: time-series CSV, field dumps (VTK legacy ASCII and CSV) and
//! result tables. Floats are written with 17 significant digits, which is
//! enough to read every value back exactly.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::{EnergyReport, Extrema, RateTable};
use crate::error::{Error, Result};
use crate::mesh::PeriodicMesh;
use crate::stepper::SimState;

/// Formats with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One line of the time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRow {
    pub step: usize,
    pub time: f64,
    pub energy: EnergyReport,
    pub c_mass: f64,
    pub phi_mu_combo: f64,
    pub extrema: Extrema,
    pub newton_iters: usize,
}

pub const TIME_SERIES_HEADER: [&str; 16] = [
    "step",
    "time",
    "energy_gradient",
    "energy_potential",
    "energy_nutrient",
    "energy_stabilization",
    "energy_total",
    "dissipation_m",
    "dissipation_g",
    "c_mass",
    "phi_mu_combo",
    "phi_min",
    "phi_max",
    "c_min",
    "c_max",
    "newton_iters",
];

impl TimeSeriesRow {
    pub fn to_csv(&self) -> String {
        let e = &self.energy;
        let x = &self.extrema;
        let floats = [
            self.time,
            e.gradient_part,
            e.potential_part,
            e.nutrient_part,
            e.stabilization_part,
            e.total,
            e.dissipation_m,
            e.dissipation_g,
            self.c_mass,
            self.phi_mu_combo,
            x.phi_min,
            x.phi_max,
            x.c_min,
            x.c_max,
        ];
        let mut line = self.step.to_string();
        for v in floats {
            line.push(',');
            line.push_str(&fmt_f64(v));
        }
        let _ = write!(line, ",{}", self.newton_iters);
        line
    }
}

/// Streams time-series rows to a CSV file.
pub struct TimeSeriesWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TimeSeriesWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        let header = TIME_SERIES_HEADER.join(",");
        w.line(&header)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, row: &TimeSeriesRow) -> Result<()> {
        self.line(&row.to_csv())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// VTK legacy ASCII unstructured grid of the unrolled periodic square.
///
/// Periodic images of the boundary nodes are written as separate points so
/// that no triangle wraps across the domain: `(M+1)²` points carrying the
/// point data `phi`, `c` and `mu`.
pub fn write_vtk(path: &Path, mesh: &PeriodicMesh, state: &SimState) -> Result<()> {
    let m = mesh.cells_per_side();
    let h = mesh.spacing();
    let side = m + 1;
    let point = |i: usize, j: usize| j * side + i;
    let node = |i: usize, j: usize| (j % m) * m + (i % m);

    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "step {} time {}", state.step, fmt_f64(state.time));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", side * side);
    for j in 0..side {
        for i in 0..side {
            let _ = writeln!(s, "{} {} 0", fmt_f64(i as f64 * h), fmt_f64(j as f64 * h));
        }
    }
    let n_tri = 2 * m * m;
    let _ = writeln!(s, "CELLS {} {}", n_tri, 4 * n_tri);
    for j in 0..m {
        for i in 0..m {
            let (a, b, c, d) = (point(i, j), point(i + 1, j), point(i + 1, j + 1), point(i, j + 1));
            let _ = writeln!(s, "3 {a} {b} {c}");
            let _ = writeln!(s, "3 {a} {c} {d}");
        }
    }
    let _ = writeln!(s, "CELL_TYPES {n_tri}");
    for _ in 0..n_tri {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {}", side * side);
    for (name, field) in [("phi", &state.phi), ("c", &state.c), ("mu", &state.mu)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for j in 0..side {
            for i in 0..side {
                let _ = writeln!(s, "{}", fmt_f64(field[node(i, j)]));
            }
        }
    }
    write_file(path, &s)
}

pub const FIELD_CSV_HEADER: &str = "node_index,x,y,phi,c,mu";

/// Nodal values as CSV: `node_index,x,y,phi,c,mu`.
pub fn write_field_csv(path: &Path, mesh: &PeriodicMesh, state: &SimState) -> Result<()> {
    let mut s = String::with_capacity(mesh.node_count() * 130);
    s.push_str(FIELD_CSV_HEADER);
    s.push('\n');
    for (k, xy) in mesh.node_coords().iter().enumerate() {
        let _ = writeln!(
            s,
            "{k},{},{},{},{},{}",
            fmt_f64(xy[0]),
            fmt_f64(xy[1]),
            fmt_f64(state.phi[k]),
            fmt_f64(state.c[k]),
            fmt_f64(state.mu[k])
        );
    }
    write_file(path, &s)
}

/// Contents of a CSV field dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub coords: Vec<[f64; 2]>,
    pub phi: Vec<f64>,
    pub c: Vec<f64>,
    pub mu: Vec<f64>,
}

pub fn read_field_csv(path: &Path) -> Result<FieldDump> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == FIELD_CSV_HEADER => {}
        other => return Err(bad(1, format!("expected header `{FIELD_CSV_HEADER}`, got {other:?}"))),
    }
    let mut dump = FieldDump {
        coords: Vec::new(),
        phi: Vec::new(),
        c: Vec::new(),
        mu: Vec::new(),
    };
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(bad(lineno, format!("expected 6 columns, got {}", cols.len())));
        }
        let index: usize = cols[0]
            .trim()
            .parse()
            .map_err(|_| bad(lineno, format!("bad node index `{}`", cols[0])))?;
        if index != dump.phi.len() {
            return Err(bad(lineno, format!("node index {index} out of order")));
        }
        let mut v = [0.0; 5];
        for (slot, raw) in v.iter_mut().zip(&cols[1..]) {
            *slot = raw
                .trim()
                .parse()
                .map_err(|_| bad(lineno, format!("bad number `{raw}`")))?;
        }
        dump.coords.push([v[0], v[1]]);
        dump.phi.push(v[2]);
        dump.c.push(v[3]);
        dump.mu.push(v[4]);
    }
    Ok(dump)
}

pub fn write_rate_table(path: &Path, table: &RateTable) -> Result<()> {
    let opt = |r: Option<f64>| r.map(fmt_f64).unwrap_or_default();
    let mut s = String::from("tau,error_phi,rate_phi,error_c,rate_c\n");
    for row in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(row.tau),
            fmt_f64(row.error_phi),
            opt(row.rate_phi),
            fmt_f64(row.error_c),
            opt(row.rate_c)
        );
    }
    write_file(path, &s)
}

/// Plain CSV with a header and preformatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    write_file(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / (1u64 << 53) as f64
    }

    fn state(mesh: &PeriodicMesh, seed: &mut u64) -> SimState {
        let n = mesh.node_count();
        let mut f = |scale: f64| mesh.field((0..n).map(|_| scale * (lcg(seed) - 0.3)).collect()).unwrap();
        SimState::new(f(1.0), f(1e-7), f(1e5)).unwrap()
    }

    #[test]
    fn seventeen_digits_round_trip() {
        let mut seed = 1;
        for _ in 0..1000 {
            let v = (lcg(&mut seed) - 0.5) * 10f64.powi((lcg(&mut seed) * 40.0) as i32 - 20);
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
            let digits = s
                .split('e')
                .next()
                .unwrap()
                .chars()
                .filter(|c| c.is_ascii_digit())
                .count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn field_csv_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_mesh(5, 2.0 * std::f64::consts::PI).unwrap();
        let mut seed = 3;
        let s = state(&mesh, &mut seed);
        let path = dir.path().join("f.csv");
        write_field_csv(&path, &mesh, &s).unwrap();
        let d = read_field_csv(&path).unwrap();
        assert_eq!(d.phi, s.phi.values());
        assert_eq!(d.c, s.c.values());
        assert_eq!(d.mu, s.mu.values());
        assert_eq!(d.coords, mesh.node_coords());
    }

    #[test]
    fn malformed_dump_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "node_index,x,y,phi,c,mu\n0,1,2,3,4\n").unwrap();
        let err = read_field_csv(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert_eq!(err.exit_code(), 4);
        fs::write(&path, "a,b\n").unwrap();
        assert!(read_field_csv(&path).is_err());
        assert_eq!(read_field_csv(&dir.path().join("none.csv")).unwrap_err().exit_code(), 4);
    }

    #[test]
    fn vtk_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_mesh(3, 1.0).unwrap();
        let mut seed = 9;
        let s = state(&mesh, &mut seed);
        let path = dir.path().join("a/b.vtk");
        write_vtk(&path, &mesh, &s).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 16 double"));
        assert!(text.contains("CELLS 18 72"));
        assert!(text.contains("POINT_DATA 16"));
        for name in ["phi", "c", "mu"] {
            assert!(text.contains(&format!("SCALARS {name} double 1")));
        }
        // the periodic image of node 0 at (L, L) carries node 0's value
        let phi_block: Vec<&str> = text
            .split("SCALARS phi double 1\nLOOKUP_TABLE default\n")
            .nth(1)
            .unwrap()
            .lines()
            .take(16)
            .collect();
        assert_eq!(phi_block[15].parse::<f64>().unwrap(), s.phi[0]);
        assert_eq!(phi_block[5].parse::<f64>().unwrap(), s.phi[4]);
    }

    #[test]
    fn time_series_header_matches_row() {
        let row = TimeSeriesRow {
            step: 3,
            time: 0.003,
            energy: EnergyReport::default(),
            c_mass: 1.0,
            phi_mu_combo: 2.0,
            extrema: Extrema {
                phi_min: 0.1,
                phi_max: 0.2,
                c_min: 0.3,
                c_max: 0.4,
            },
            newton_iters: 2,
        };
        let line = row.to_csv();
        assert_eq!(line.split(',').count(), TIME_SERIES_HEADER.len());
        assert!(line.starts_with("3,3.0000000000000001e-3,"));
        assert!(line.ends_with(",2"));
    }
}
