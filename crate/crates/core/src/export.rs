//! Text exports of nodal fields and polar samples of the exact mode.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exact::ModeSolution;
use crate::fem::ComplexField;
use crate::mesh::TriMesh;

fn check(mesh: &TriMesh, field: &ComplexField) -> Result<()> {
    if field.len() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch { expected: mesh.vertex_count(), got: field.len() });
    }
    Ok(())
}

/// `vertex_index,x,y,re,im`, one line per vertex.
pub fn field_csv(mesh: &TriMesh, field: &ComplexField) -> Result<String> {
    check(mesh, field)?;
    let mut s = String::from("vertex_index,x,y,re,im\n");
    for (i, (p, u)) in mesh.vertices().iter().zip(&field.values).enumerate() {
        let _ = writeln!(s, "{i},{:.12e},{:.12e},{:.12e},{:.12e}", p[0], p[1], u.re, u.im);
    }
    Ok(s)
}

/// Legacy ASCII VTK unstructured grid with `re`, `im` and `abs` point scalars.
pub fn field_vtk(mesh: &TriMesh, field: &ComplexField, title: &str) -> Result<String> {
    check(mesh, field)?;
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let mut s = format!("# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.vertex_count());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:.12e} {:.12e} 0", p[0], p[1]);
    }
    let nt = mesh.triangle_count();
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.vertex_count());
    for (name, f) in
        [("re", (|u: &num_complex::Complex64| u.re) as fn(&_) -> f64), ("im", |u| u.im), ("abs", |u| u.norm())]
    {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for u in &field.values {
            let _ = writeln!(s, "{:.12e}", f(u));
        }
    }
    Ok(s)
}

/// Samples the mode on `n_r x n_theta` polar nodes over `[r_hat, r_max] x [0, 2 pi)`
/// as `r,theta,x,y,re,im`. The first radius is exactly `r_hat`.
pub fn exact_polar_csv(mode: &ModeSolution, r_max: f64, n_r: usize, n_theta: usize) -> Result<String> {
    if !(r_max > mode.r_hat) || n_r < 2 || n_theta == 0 {
        return Err(Error::InvalidDomain(format!(
            "polar grid needs r_max > {} and at least 2 radii, 1 angle",
            mode.r_hat
        )));
    }
    let mut s = String::from("r,theta,x,y,re,im\n");
    for i in 0..n_r {
        let r = if i == 0 { mode.r_hat } else { mode.r_hat + (r_max - mode.r_hat) * i as f64 / (n_r - 1) as f64 };
        for l in 0..n_theta {
            let theta = std::f64::consts::TAU * l as f64 / n_theta as f64;
            let p = [r * theta.cos(), r * theta.sin()];
            let u = mode.value(p)?;
            let _ = writeln!(s, "{r:.12e},{theta:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", p[0], p[1], u.re, u.im);
        }
    }
    Ok(s)
}
