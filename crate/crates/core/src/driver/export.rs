//! Density, log and report files.
//!
//! 2D densities go to binary PGM (P5, solid = black) and CSV (row-major
//! from the top row, 9 decimal places); 3D densities to legacy-VTK
//! structured points with one cell scalar per element. All writers are
//! deterministic byte-for-byte for identical inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::driver::{IterationRow, RunResult};
use crate::error::{Error, Result};
use crate::fem::SolveStats;
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityFormat {
    Pgm,
    Csv,
    Vtk,
}

/// Writes a density field in the requested format.
pub fn export_density(
    field: &[f64],
    mesh: &Mesh,
    path: &Path,
    format: DensityFormat,
) -> Result<()> {
    if field.len() != mesh.n_elements() {
        return Err(Error::InvalidArgument(format!(
            "field has {} values for {} elements",
            field.len(),
            mesh.n_elements()
        )));
    }
    if let Some(bad) = field.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!(
            "density {bad} outside [0, 1]"
        )));
    }
    let bytes = match format {
        DensityFormat::Pgm => {
            if mesh.is_3d() {
                return Err(Error::InvalidArgument(
                    "PGM export is two-dimensional".into(),
                ));
            }
            pgm_bytes(field, mesh)
        }
        DensityFormat::Csv => {
            if mesh.is_3d() {
                return Err(Error::InvalidArgument(
                    "CSV export is two-dimensional".into(),
                ));
            }
            csv_bytes(field, mesh).into_bytes()
        }
        DensityFormat::Vtk => vtk_bytes(field, mesh).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// 8-bit grayscale: byte = 255 (1 - density) rounded half-up, so solid is
/// black. Raster rows run from the top of the domain.
fn pgm_bytes(field: &[f64], mesh: &Mesh) -> Vec<u8> {
    let (w, h) = (mesh.nelx(), mesh.nely());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h);
    for y in (0..h).rev() {
        for x in 0..w {
            let v = field[mesh.element_id(x, y, 0)];
            out.push((255.0 * (1.0 - v)).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

fn csv_bytes(field: &[f64], mesh: &Mesh) -> String {
    let (w, h) = (mesh.nelx(), mesh.nely());
    let mut out = String::new();
    for y in (0..h).rev() {
        for x in 0..w {
            if x > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.9}", field[mesh.element_id(x, y, 0)]);
        }
        out.push('\n');
    }
    out
}

/// Legacy-VTK structured points with cell data, x fastest.
fn vtk_bytes(field: &[f64], mesh: &Mesh) -> String {
    let (nx, ny, nz) = (mesh.nelx(), mesh.nely(), mesh.nelz().unwrap_or(1));
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("density\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_POINTS\n");
    let _ = writeln!(out, "DIMENSIONS {} {} {}", nx + 1, ny + 1, nz + 1);
    out.push_str("ORIGIN 0 0 0\n");
    out.push_str("SPACING 1 1 1\n");
    let _ = writeln!(out, "CELL_DATA {}", mesh.n_elements());
    out.push_str("SCALARS density double 1\n");
    out.push_str("LOOKUP_TABLE default\n");
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let _ = writeln!(out, "{:.9}", field[mesh.element_id(x, y, z)]);
            }
        }
    }
    out
}

/// Reads a density CSV back (row-major from the top row).
pub fn read_density_csv(path: &Path, mesh: &Mesh) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut field = vec![0.0; mesh.n_elements()];
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let y = mesh.nely() - 1 - i;
        for (x, cell) in line.split(',').enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("bad density cell: {e}")))?;
            field[mesh.element_id(x, y, 0)] = v;
        }
        rows += 1;
    }
    if rows != mesh.nely() {
        return Err(Error::InvalidArgument(format!(
            "expected {} rows, got {rows}",
            mesh.nely()
        )));
    }
    Ok(field)
}

/// Iteration log: one CSV row per design iteration.
pub fn write_log(rows: &[IterationRow], labels: &[String], n_degrees: usize, path: &Path) -> Result<()> {
    let mut out = String::from("k,f");
    for label in labels {
        let _ = write!(out, ",g_{label}");
    }
    out.push_str(",change,kkt");
    for i in 1..=n_degrees {
        let _ = write!(out, ",E_{i}");
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{},{:.9e}", row.k, row.f);
        for gi in &row.g {
            let _ = write!(out, ",{:.9e}", gi);
        }
        let _ = write!(out, ",{:.9e},{:.9e}", row.change, row.kkt);
        for e in &row.energies {
            let _ = write!(out, ",{:.9e}", e);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Summary of a finished run, persisted as JSON. Other runs may reference
/// it (allowable stress as a fraction of `max_vm`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub nelx: usize,
    pub nely: usize,
    pub nelz: Option<usize>,
    pub doc: Vec<String>,
    pub dof: Vec<String>,
    pub emax: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: Option<String>,
    pub feasible: bool,
    pub change: f64,
    pub kkt: f64,
    pub f: f64,
    pub g: Vec<f64>,
    pub constraint_labels: Vec<String>,
    pub alphas: Vec<f64>,
    pub reference_energies: Vec<f64>,
    pub energies: Vec<f64>,
    pub max_vm_per_dof: Vec<f64>,
    pub max_vm: f64,
    pub mnd: f64,
    pub sigma_bar: Option<f64>,
    pub factorizations: usize,
    pub substitutions: usize,
    pub adjoint_substitutions: usize,
}

impl RunReport {
    pub fn from_result(result: &RunResult) -> RunReport {
        let SolveStats {
            factorizations,
            substitutions,
            adjoint_substitutions,
        } = result.stats;
        RunReport {
            mode: format!("{:?}", result.config.variant.mode).to_lowercase(),
            nelx: result.config.nelx,
            nely: result.config.nely,
            nelz: result.config.nelz,
            doc: result.config.doc.iter().map(|d| d.to_string()).collect(),
            dof: result.config.dof.iter().map(|d| d.to_string()).collect(),
            emax: result.config.emax.clone(),
            iterations: result.iterations,
            converged: result.termination.converged,
            stop_reason: result.termination.reason.map(|r| format!("{r:?}").to_lowercase()),
            feasible: result.termination.feasible,
            change: result.termination.change,
            kkt: result.termination.kkt_norm,
            f: result.f,
            g: result.g.clone(),
            constraint_labels: result.constraint_labels.clone(),
            alphas: result.alphas.clone(),
            reference_energies: result.reference_energies.clone(),
            energies: result.energies.clone(),
            max_vm_per_dof: result.max_vm_per_dof.clone(),
            max_vm: result.max_vm,
            mnd: result.mnd,
            sigma_bar: result.sigma_bar,
            factorizations,
            substitutions,
            adjoint_substitutions,
        }
    }
}

pub fn write_report(result: &RunResult, path: &Path) -> Result<()> {
    let report = RunReport::from_result(result);
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("cannot parse report {}: {e}", path.display())))
}

/// Writes the full output set of a run into a directory and returns the
/// paths: density exports, iteration log and report.
pub fn export_all(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mesh = crate::mesh::build_mesh(result.config.nelx, result.config.nely, result.config.nelz)?;
    let mut paths = Vec::new();
    let export_field = |name: &str, field: &[f64], paths: &mut Vec<PathBuf>| -> Result<()> {
        if mesh.is_3d() {
            let p = dir.join(format!("{name}.vtk"));
            export_density(field, &mesh, &p, DensityFormat::Vtk)?;
            paths.push(p);
        } else {
            let p = dir.join(format!("{name}.pgm"));
            export_density(field, &mesh, &p, DensityFormat::Pgm)?;
            paths.push(p);
            let p = dir.join(format!("{name}.csv"));
            export_density(field, &mesh, &p, DensityFormat::Csv)?;
            paths.push(p);
        }
        Ok(())
    };
    export_field("density", &result.design.nominal, &mut paths)?;
    if let Some(eroded) = &result.design.eroded {
        export_field("density_eroded", eroded, &mut paths)?;
    }
    if let Some(dilated) = &result.design.dilated {
        export_field("density_dilated", dilated, &mut paths)?;
    }
    let log_path = dir.join("log.csv");
    write_log(&result.log, &result.constraint_labels, result.degrees.len(), &log_path)?;
    paths.push(log_path);
    let report_path = dir.join("report.json");
    write_report(result, &report_path)?;
    paths.push(report_path);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn tmpdir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("flexopt_export_{name}_{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn uniform_half_density_is_mid_gray() {
        let mesh = build_mesh(3, 2, None).unwrap();
        let dir = tmpdir("pgm");
        let path = dir.join("d.pgm");
        export_density(&[0.5; 6], &mesh, &path, DensityFormat::Pgm).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert!(bytes[header.len()..].iter().all(|&b| b == 128));
    }

    #[test]
    fn solid_is_black_and_void_is_white() {
        let mesh = build_mesh(2, 1, None).unwrap();
        let dir = tmpdir("bw");
        let path = dir.join("d.pgm");
        export_density(&[1.0, 0.0], &mesh, &path, DensityFormat::Pgm).unwrap();
        let bytes = fs::read(&path).unwrap();
        let data = &bytes[bytes.len() - 2..];
        assert_eq!(data, &[0u8, 255]);
    }

    #[test]
    fn csv_round_trips_to_nine_decimals() {
        let mesh = build_mesh(4, 3, None).unwrap();
        let field: Vec<f64> = (0..12).map(|i| (i as f64 / 11.0) * 0.987654321).collect();
        let dir = tmpdir("csv");
        let path = dir.join("d.csv");
        export_density(&field, &mesh, &path, DensityFormat::Csv).unwrap();
        let back = read_density_csv(&path, &mesh).unwrap();
        for (a, b) in field.iter().zip(back.iter()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn vtk_cell_scalars_for_a_solid_cube() {
        let mesh = build_mesh(2, 2, Some(2)).unwrap();
        let dir = tmpdir("vtk");
        let path = dir.join("d.vtk");
        export_density(&[1.0; 8], &mesh, &path, DensityFormat::Vtk).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("DIMENSIONS 3 3 3"));
        assert!(text.contains("CELL_DATA 8"));
        let scalars: Vec<&str> = text
            .lines()
            .skip_while(|l| !l.starts_with("LOOKUP_TABLE"))
            .skip(1)
            .collect();
        assert_eq!(scalars.len(), 8);
        assert!(scalars.iter().all(|s| *s == "1.000000000"));
    }

    #[test]
    fn rejects_out_of_range_densities() {
        let mesh = build_mesh(2, 1, None).unwrap();
        let dir = tmpdir("bad");
        let path = dir.join("d.pgm");
        let out = export_density(&[0.5, 1.2], &mesh, &path, DensityFormat::Pgm);
        assert!(out.is_err());
    }

    #[test]
    fn log_header_and_first_row() {
        let rows = vec![IterationRow {
            k: 0,
            f: 2.0,
            g: vec![-0.1],
            change: 0.2,
            kkt: 1.0,
            energies: vec![3.0, 4.0, 5.0],
        }];
        let dir = tmpdir("log");
        let path = dir.join("log.csv");
        write_log(&rows, &["energy_ty".into()], 3, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,f,g_energy_ty,change,kkt,E_1,E_2,E_3"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,2.000000000e0,"));
    }
}
