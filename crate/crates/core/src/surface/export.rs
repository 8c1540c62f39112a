//! Writers for OBJ, PLY, SVG and CSV. Files are written to a temporary
//! sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::grid::{sample_grid, Window};
use super::singular::{SectorSet, SingularCurve};
use super::{stereographic, surface_sample, SurfaceError, SurfaceSample, S31_TOL};
use crate::face::Face;
use crate::mink::{Mat2, MinkowskiVec};

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), SurfaceError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| SurfaceError::Io(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(res?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshVertex {
    pub z: Complex64,
    /// The point of de Sitter space before projection.
    pub raw: MinkowskiVec,
    /// `Pi(raw)` when `x0 > 1`, otherwise `(x1, x2, x3)`.
    pub pos: [f64; 3],
    pub projected: bool,
    /// `|g|^2 - 1`.
    pub sing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<MeshVertex>,
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn projected_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.projected).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeshOptions {
    /// Drop cells whose corners lie on both sides of `|g| = 1`.
    pub skip_singular_cells: bool,
    /// Vertices with `||g|^2 - 1|` at or below this are dropped.
    pub singular_band: f64,
}

fn vertex_of(s: &SurfaceSample) -> Option<MeshVertex> {
    if !(s.f.de_sitter_residual() <= S31_TOL) {
        return None;
    }
    let (pos, projected) = match stereographic(&s.f) {
        Ok(p) => (p, true),
        Err(_) => ([s.f.0[1], s.f.0[2], s.f.0[3]], false),
    };
    Some(MeshVertex {
        z: s.z,
        raw: s.f,
        pos,
        projected,
        sing: s.sing,
    })
}

/// Samples the face on an `n1 x n2` cell grid and triangulates it.
pub fn build_mesh(face: &Face, window: &Window, n1: usize, n2: usize, opts: MeshOptions) -> Result<Mesh, SurfaceError> {
    window.validate().map_err(SurfaceError::BadWindow)?;
    let grid = sample_grid(face, window, n1, n2, |st| {
        let p = face.point(st).ok()?;
        vertex_of(&surface_sample(&p).ok()?).filter(|v| v.sing.abs() > opts.singular_band)
    });
    let m = window.row_len(n2);
    let mut index = vec![vec![None; m]; n1 + 1];
    let mut vertices = Vec::new();
    for (i, row) in grid.rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if let Some(v) = v {
                index[i][j] = Some(vertices.len());
                vertices.push(*v);
            }
        }
    }
    if vertices.is_empty() {
        return Err(SurfaceError::NoValidVertices);
    }
    let mut triangles = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            let j1 = (j + 1) % m;
            let c = [index[i][j], index[i + 1][j], index[i + 1][j1], index[i][j1]];
            let Some(c) = c.into_iter().collect::<Option<Vec<usize>>>() else {
                continue;
            };
            if opts.skip_singular_cells {
                let signs: Vec<bool> = c.iter().map(|&k| vertices[k].sing > 0.0).collect();
                if signs.iter().any(|&s| s != signs[0]) {
                    continue;
                }
            }
            triangles.push([c[0], c[1], c[2]]);
            triangles.push([c[0], c[2], c[3]]);
        }
    }
    let mesh = Mesh { vertices, triangles };
    log::info!(
        "mesh: {} projected vertices, {} raw vertices (x0 <= 1), {} triangles",
        mesh.projected_count(),
        mesh.vertices.len() - mesh.projected_count(),
        mesh.triangles.len()
    );
    Ok(mesh)
}

/// Vertex order used by the writers: projected vertices first.
fn ordering(mesh: &Mesh) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..mesh.vertices.len()).collect();
    order.sort_by_key(|&k| !mesh.vertices[k].projected);
    let mut new_index = vec![0; order.len()];
    for (n, &k) in order.iter().enumerate() {
        new_index[k] = n;
    }
    (order, new_index)
}

pub fn to_obj(mesh: &Mesh) -> String {
    let (order, idx) = ordering(mesh);
    let np = mesh.projected_count();
    let mut s = String::new();
    let _ = writeln!(s, "# {} vertices ({} stereographic, {} raw x1 x2 x3 with x0 <= 1)", order.len(), np, order.len() - np);
    for (n, &k) in order.iter().enumerate() {
        if n == np {
            let _ = writeln!(s, "# raw vertices follow");
        }
        let p = mesh.vertices[k].pos;
        let _ = writeln!(s, "v {:.12} {:.12} {:.12}", p[0], p[1], p[2]);
    }
    let (proj, raw): (Vec<&[usize; 3]>, Vec<&[usize; 3]>) =
        mesh.triangles.iter().partition(|t| t.iter().all(|&k| mesh.vertices[k].projected));
    for (name, tris) in [("projected", proj), ("raw", raw)] {
        if tris.is_empty() {
            continue;
        }
        let _ = writeln!(s, "g {name}");
        for t in tris {
            let _ = writeln!(s, "f {} {} {}", idx[t[0]] + 1, idx[t[1]] + 1, idx[t[2]] + 1);
        }
    }
    s
}

pub fn to_ply(mesh: &Mesh) -> String {
    let (order, idx) = ordering(mesh);
    let mut s = String::new();
    let _ = writeln!(s, "ply\nformat ascii 1.0");
    let _ = writeln!(s, "comment projected=1 marks stereographic vertices; others are raw (x1,x2,x3)");
    let _ = writeln!(s, "element vertex {}", order.len());
    let _ = writeln!(s, "property float x\nproperty float y\nproperty float z");
    let _ = writeln!(s, "property float sing\nproperty uchar projected");
    let _ = writeln!(s, "element face {}", mesh.triangles.len());
    let _ = writeln!(s, "property list uchar int vertex_indices\nend_header");
    for &k in &order {
        let v = &mesh.vertices[k];
        let _ = writeln!(s, "{:.12} {:.12} {:.12} {:.12} {}", v.pos[0], v.pos[1], v.pos[2], v.sing, v.projected as u8);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", idx[t[0]], idx[t[1]], idx[t[2]]);
    }
    s
}

/// Singular curves in the domain with optional sector overlay
/// `(puncture, sectors, radius)`.
pub fn to_svg(curves: &[SingularCurve], window: &Window, sectors: Option<(Complex64, SectorSet, f64)>) -> String {
    let (lo, hi) = match *window {
        Window::Annulus { center, r_max, .. } => (center - Complex64::new(r_max, r_max), center + Complex64::new(r_max, r_max)),
        Window::Rect { min, max } => (min, max),
    };
    let size = 800.0;
    let scale = size / (hi.re - lo.re).max(hi.im - lo.im);
    let map = |z: Complex64| ((z.re - lo.re) * scale, (hi.im - z.im) * scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#,
        w = (hi.re - lo.re) * scale,
        h = (hi.im - lo.im) * scale
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some((p, set, radius)) = sectors {
        let (cx, cy) = map(p);
        let r = radius * scale;
        for k in 0..(2 * set.m) {
            let axis = k as f64 * std::f64::consts::PI / set.m as f64 + set.delta;
            let (a0, a1) = (axis - set.eps, axis + set.eps);
            // y axis points down in SVG
            let (x0, y0) = (cx + r * a0.cos(), cy - r * a0.sin());
            let (x1, y1) = (cx + r * a1.cos(), cy - r * a1.sin());
            let _ = writeln!(
                s,
                r#"<path d="M {cx:.3} {cy:.3} L {x0:.3} {y0:.3} A {r:.3} {r:.3} 0 0 0 {x1:.3} {y1:.3} Z" fill="lightblue" fill-opacity="0.5" stroke="none"/>"#
            );
        }
    }
    if let Window::Annulus { center, r_min, .. } = *window {
        let (cx, cy) = map(center);
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="gray" stroke-dasharray="4 4"/>"#,
            r_min * scale
        );
    }
    for c in curves {
        let pts: Vec<String> = c
            .points
            .iter()
            .chain(c.closed.then(|| &c.points[0]))
            .map(|&z| {
                let (x, y) = map(z);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2"/>"#, pts.join(" "));
    }
    s.push_str("</svg>\n");
    s
}

/// `re11,im11,re12,im12,re21,im21,re22,im22` rows with a label column.
pub fn matrices_csv(rows: &[(String, Mat2)]) -> String {
    let mut s = String::from("label,re11,im11,re12,im12,re21,im21,re22,im22\n");
    for (label, m) in rows {
        let e = [m.a11(), m.a12(), m.a21(), m.a22()];
        let vals: Vec<String> = e.iter().flat_map(|c| [c.re, c.im]).map(|x| format!("{x:.17e}")).collect();
        let _ = writeln!(s, "{},{}", label.replace(',', ";"), vals.join(","));
    }
    s
}

/// One row per sample: domain point, `f`, metric factors and `|g|^2 - 1`.
pub fn samples_csv(samples: &[SurfaceSample]) -> String {
    let mut s = String::from("re_z,im_z,x0,x1,x2,x3,ds2,dshat2,dsigma2,ds_lift2,sing\n");
    for p in samples {
        let m = &p.metrics;
        let _ = writeln!(
            s,
            "{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
            p.z.re, p.z.im, p.f.0[0], p.f.0[1], p.f.0[2], p.f.0[3], m.ds2, m.dshat2, m.dsigma2, m.ds_lift2, p.sing
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};
    use crate::frames::GaussPair;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn catenoid_mesh_formats() {
        let face = Face::from_gauss_pair(GaussPair::new(Expr::z(), parse("z^0.5").unwrap()).unwrap()).unwrap();
        let w = Window::annulus(Complex64::new(0.0, 0.0), 0.3, 0.9);
        let mesh = build_mesh(&face, &w, 8, 16, MeshOptions::default()).unwrap();
        assert_eq!(mesh.vertices.len(), 9 * 16);
        assert_eq!(mesh.triangles.len(), 2 * 8 * 16);
        let obj = to_obj(&mesh);
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 9 * 16);
        let ply = to_ply(&mesh);
        assert!(ply.contains("property float sing"));
        assert_eq!(ply.lines().filter(|l| l.starts_with("3 ")).count(), mesh.triangles.len());
    }
}
