//! Result export: diagnostics CSV, legacy-VTK centerline polylines, and a
//! contact-force point cloud. A minimal VTK reader backs the round-trip test.

use crate::contact::abc::{ContactForceSample, ForceKind};
use crate::diagnostics::{StepReport, CSV_HEADER};
use crate::error::{Error, Result};
use crate::geometry::interpolate;
use crate::solver::Mesh;
use crate::Vec3;
use nalgebra::DVector;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, report: &StepReport) -> Result<()> {
        writeln!(self.out, "{}", report.csv_row())?;
        self.out.flush()?;
        Ok(())
    }
}

/// Centerlines as one polyline per element, sampled at equispaced parameter
/// values so the Hermite curvature is visible.
pub fn write_vtk_polylines(
    path: &Path,
    mesh: &Mesh,
    d: &DVector<f64>,
    samples_per_element: usize,
) -> Result<()> {
    let n_s = samples_per_element.max(2);
    let mut points: Vec<Vec3> = Vec::new();
    let mut lines: Vec<Vec<usize>> = Vec::new();
    for k in 0..mesh.elements.len() {
        let dofs = mesh.element_dofs(d, k)?;
        let base = points.len();
        for i in 0..n_s {
            let xi = -1.0 + 2.0 * i as f64 / (n_s - 1) as f64;
            points.push(interpolate(&dofs, xi, 0)?);
        }
        lines.push((base..base + n_s).collect());
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "centerlines")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET POLYDATA")?;
    writeln!(out, "POINTS {} double", points.len())?;
    for p in &points {
        writeln!(out, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z)?;
    }
    let total: usize = lines.iter().map(|l| l.len() + 1).sum();
    writeln!(out, "LINES {} {}", lines.len(), total)?;
    for l in &lines {
        write!(out, "{}", l.len())?;
        for i in l {
            write!(out, " {i}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Contact forces as a vertex cloud with a force vector and a kind scalar
/// (0 point, 1 line Gauss point, 2 endpoint) per sample.
pub fn write_vtk_forces(path: &Path, forces: &[ContactForceSample]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "contact forces")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET POLYDATA")?;
    writeln!(out, "POINTS {} double", forces.len())?;
    for s in forces {
        writeln!(
            out,
            "{:.17e} {:.17e} {:.17e}",
            s.position.x, s.position.y, s.position.z
        )?;
    }
    writeln!(out, "VERTICES {} {}", forces.len(), 2 * forces.len())?;
    for i in 0..forces.len() {
        writeln!(out, "1 {i}")?;
    }
    writeln!(out, "POINT_DATA {}", forces.len())?;
    writeln!(out, "VECTORS force double")?;
    for s in forces {
        writeln!(
            out,
            "{:.17e} {:.17e} {:.17e}",
            s.force.x, s.force.y, s.force.z
        )?;
    }
    writeln!(out, "SCALARS kind int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for s in forces {
        let k = match s.kind {
            ForceKind::Point => 0,
            ForceKind::LineGauss => 1,
            ForceKind::Endpoint => 2,
        };
        writeln!(out, "{k}")?;
    }
    out.flush()?;
    Ok(())
}

/// Minimal legacy-VTK polydata reader; only what the writer emits.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkPolyData {
    pub points: Vec<Vec3>,
    pub lines: Vec<Vec<usize>>,
}

pub fn read_vtk_polylines(path: &Path) -> Result<VtkPolyData> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines_iter = reader.lines();
    let mut points = Vec::new();
    let mut lines = Vec::new();
    let bad = |msg: &str| Error::Scenario(format!("vtk read {}: {msg}", path.display()));
    while let Some(line) = lines_iter.next() {
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("POINTS") => {
                let n: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("POINTS count"))?;
                for _ in 0..n {
                    let row = lines_iter.next().ok_or_else(|| bad("short POINTS"))??;
                    let vals: Vec<f64> = row
                        .split_whitespace()
                        .map(|s| s.parse().map_err(|_| bad("point value")))
                        .collect::<Result<_>>()?;
                    if vals.len() != 3 {
                        return Err(bad("point arity"));
                    }
                    points.push(Vec3::new(vals[0], vals[1], vals[2]));
                }
            }
            Some("LINES") => {
                let n: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("LINES count"))?;
                for _ in 0..n {
                    let row = lines_iter.next().ok_or_else(|| bad("short LINES"))??;
                    let vals: Vec<usize> = row
                        .split_whitespace()
                        .map(|s| s.parse().map_err(|_| bad("line index")))
                        .collect::<Result<_>>()?;
                    let (count, rest) = vals.split_first().ok_or_else(|| bad("empty line"))?;
                    if *count != rest.len() {
                        return Err(bad("line length mismatch"));
                    }
                    lines.push(rest.to_vec());
                }
            }
            _ => {}
        }
    }
    Ok(VtkPolyData { points, lines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BeamSection;
    use crate::solver::{MeshElement, DOFS_PER_NODE};
    use approx::assert_relative_eq;

    fn two_element_rod() -> Mesh {
        let section = BeamSection::circular(0.01, 1e6, 1.0).unwrap();
        let mut initial = DVector::zeros(DOFS_PER_NODE * 3);
        for i in 0..3 {
            initial[DOFS_PER_NODE * i] = i as f64;
            initial[DOFS_PER_NODE * i + 3] = 1.0;
        }
        Mesh {
            n_nodes: 3,
            elements: (0..2)
                .map(|i| MeshElement {
                    nodes: [i, i + 1],
                    fiber: 0,
                    section: 0,
                    l0: 1.0,
                })
                .collect(),
            sections: vec![section],
            initial,
        }
    }

    #[test]
    fn vtk_round_trip() {
        let mesh = two_element_rod();
        let dir = std::env::temp_dir().join("abc_rods_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("lines.vtk");
        write_vtk_polylines(&path, &mesh, &mesh.initial, 5).unwrap();
        let data = read_vtk_polylines(&path).unwrap();
        assert_eq!(data.points.len(), 10);
        assert_eq!(data.lines.len(), 2);
        assert_eq!(data.lines[0], (0..5).collect::<Vec<_>>());
        assert_eq!(data.lines[1], (5..10).collect::<Vec<_>>());
        // Straight rod: sampled points sit on the x axis at the right spots.
        assert_relative_eq!(data.points[0].x, 0.0);
        assert_relative_eq!(data.points[4].x, 1.0, epsilon = 1e-14);
        assert_relative_eq!(data.points[9].x, 2.0, epsilon = 1e-14);
        assert!(data.points.iter().all(|p| p.y == 0.0 && p.z == 0.0));
    }

    #[test]
    fn empty_force_cloud_still_written() {
        let dir = std::env::temp_dir().join("abc_rods_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("forces_empty.vtk");
        write_vtk_forces(&path, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("POINTS 0 double"));
    }

    #[test]
    fn csv_line_count_is_steps_plus_header() {
        use crate::diagnostics::StepReport;
        let dir = std::env::temp_dir().join("abc_rods_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("diag.csv");
        let mut w = CsvWriter::create(&path).unwrap();
        for step in 1..=4 {
            w.write(&StepReport {
                step,
                t: step as f64,
                e_kin: 0.0,
                e_int: 0.0,
                pi_c: 0.0,
                w_con: 0.0,
                linear_momentum: Vec3::zeros(),
                angular_momentum: Vec3::zeros(),
                n_point: 0,
                n_line_gp: 0,
                n_endpoint: 0,
                alpha_min: f64::INFINITY,
                alpha_max: f64::NEG_INFINITY,
                newton_iters: 1,
                dd_inf: 0.0,
                total_contact_force: Vec3::zeros(),
            })
            .unwrap();
        }
        drop(w);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("step,t,"));
    }
}
