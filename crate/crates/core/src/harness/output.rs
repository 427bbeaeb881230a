//! CSV and legacy VTK writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::StepReport;
use crate::error::{Error, Result};
use crate::mesh::TriMesh;

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn reports_csv(reports: &[StepReport]) -> String {
    let mut s = String::with_capacity(64 * (reports.len() + 1));
    s.push_str(StepReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, reports: &[StepReport]) -> Result<()> {
    write_text(path, &reports_csv(reports))
}

/// ASCII legacy VTK unstructured grid of triangles with nodal scalar fields.
pub fn vtk_string(mesh: &TriMesh, title: &str, fields: &[(&str, &[f64])]) -> String {
    let n = mesh.num_nodes();
    let m = mesh.triangles.len();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {m} {}", 4 * m);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        let _ = writeln!(s, "5");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
        for (name, values) in fields {
            assert_eq!(values.len(), n, "field {name} has wrong length");
            let _ = writeln!(s, "SCALARS {name} double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for v in values.iter() {
                let _ = writeln!(s, "{v:e}");
            }
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &TriMesh, phi: &[f64], mu: &[f64]) -> Result<()> {
    write_text(
        path,
        &vtk_string(mesh, "savch phase field", &[("phi", phi), ("mu", mu)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vtk_counts_match_mesh() {
        let mesh = TriMesh::unit_square(3).unwrap();
        let phi = vec![0.5; mesh.num_nodes()];
        let s = vtk_string(&mesh, "t", &[("phi", &phi), ("mu", &phi)]);
        assert!(s.contains("POINTS 16 double"));
        assert!(s.contains("CELLS 18 72"));
        assert!(s.contains("CELL_TYPES 18"));
        assert!(s.contains("POINT_DATA 16"));
        assert!(s.contains("SCALARS phi double 1"));
        assert!(s.contains("SCALARS mu double 1"));
        let lines = s.lines().count();
        // header 5, points 16, cells 1 + 18, types 1 + 18, point data 1 + 2 * (2 + 16)
        assert_eq!(lines, 5 + 16 + 19 + 19 + 1 + 36);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = reports_csv(&[]);
        assert_eq!(s, format!("{}\n", StepReport::CSV_HEADER));
    }
}
