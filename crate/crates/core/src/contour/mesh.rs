use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Triangle mesh with per-face unit normals.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub normals: Vec<Vec3>,
}

impl TriangleMesh {
    /// Validate indices, drop zero-area faces and compute normals.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::DegenerateInput(
                "mesh has no vertices or faces".into(),
            ));
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::DegenerateInput(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len();
        let scale = bbox(&vertices)
            .map(|(lo, hi)| (hi - lo).norm())
            .unwrap_or(1.0)
            .max(1e-300);
        let mut kept = Vec::with_capacity(faces.len());
        let mut normals = Vec::with_capacity(faces.len());
        for f in faces {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::DegenerateInput(format!(
                    "face {f:?} references a vertex out of range ({n} vertices)"
                )));
            }
            let c = (vertices[f[1]] - vertices[f[0]]).cross(&(vertices[f[2]] - vertices[f[0]]));
            let area2 = c.norm();
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || area2 <= 1e-14 * scale * scale {
                continue;
            }
            kept.push(f);
            normals.push(c / area2);
        }
        if kept.is_empty() {
            return Err(Error::DegenerateInput("all faces are degenerate".into()));
        }
        Ok(Self {
            vertices,
            faces: kept,
            normals,
        })
    }

    /// Center the bounding box at the origin and scale so the largest half
    /// extent is 1, fitting the shape into [-1, 1]^3.
    pub fn normalized(mut self) -> Self {
        if let Some((lo, hi)) = bbox(&self.vertices) {
            let center = (lo + hi) * 0.5;
            let half = ((hi - lo) * 0.5).amax();
            let s = if half > 0.0 { 1.0 / half } else { 1.0 };
            for v in &mut self.vertices {
                *v = (*v - center) * s;
            }
        }
        self
    }

    pub fn bbox(&self) -> (Vec3, Vec3) {
        bbox(&self.vertices).unwrap_or((Vec3::zeros(), Vec3::zeros()))
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    /// Undirected edges (sorted vertex pair) with their adjacent faces, in
    /// lexicographic order.
    pub fn edges(&self) -> Vec<((usize, usize), Vec<usize>)> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        map.into_iter().collect()
    }

    pub fn parse_obj(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let c: Vec<f64> = it
                        .take(3)
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::Parse(format!("OBJ line {}: {e}", ln + 1)))?;
                    if c.len() != 3 {
                        return Err(Error::Parse(format!(
                            "OBJ line {}: vertex needs 3 coordinates",
                            ln + 1
                        )));
                    }
                    vertices.push(Vec3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in it {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 = first
                            .parse()
                            .map_err(|e| Error::Parse(format!("OBJ line {}: {e}", ln + 1)))?;
                        let resolved = if i > 0 {
                            i - 1
                        } else if i < 0 {
                            vertices.len() as i64 + i
                        } else {
                            return Err(Error::Parse(format!("OBJ line {}: index 0", ln + 1)));
                        };
                        if resolved < 0 {
                            return Err(Error::Parse(format!(
                                "OBJ line {}: bad index {i}",
                                ln + 1
                            )));
                        }
                        idx.push(resolved as usize);
                    }
                    if idx.len() < 3 {
                        return Err(Error::Parse(format!(
                            "OBJ line {}: face with < 3 vertices",
                            ln + 1
                        )));
                    }
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Ok(Self::new(vertices, faces)?.normalized())
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::parse_obj(&text)
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        s
    }

    /// Axis-aligned cube spanning [-1, 1]^3, two triangles per side.
    pub fn cube() -> Self {
        let v: Vec<Vec3> = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 != 0 { 1.0 } else { -1.0 },
                    if i & 2 != 0 { 1.0 } else { -1.0 },
                    if i & 4 != 0 { 1.0 } else { -1.0 },
                )
            })
            .collect();
        // outward-facing quads (counter-clockwise seen from outside)
        let quads = [
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
        ];
        let faces = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        Self::new(v, faces).expect("cube is valid")
    }

    /// Unit icosphere after `level` rounds of 4-to-1 subdivision.
    pub fn icosphere(level: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut f: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            let mut next = Vec::with_capacity(f.len() * 4);
            let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vec3>| {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    v.push(((v[a] + v[b]) * 0.5).normalize());
                    v.len() - 1
                })
            };
            for tri in &f {
                let ab = midpoint(tri[0], tri[1], &mut v);
                let bc = midpoint(tri[1], tri[2], &mut v);
                let ca = midpoint(tri[2], tri[0], &mut v);
                next.push([tri[0], ab, ca]);
                next.push([tri[1], bc, ab]);
                next.push([tri[2], ca, bc]);
                next.push([ab, bc, ca]);
            }
            f = next;
        }
        Self::new(v, f).expect("icosphere is valid")
    }

    /// Torus around the y axis, normalized to the unit box.
    pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> Self {
        let mut v = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            let u = 2.0 * PI * i as f64 / nu as f64;
            for j in 0..nv {
                let w = 2.0 * PI * j as f64 / nv as f64;
                let r = major + minor * w.cos();
                v.push(Vec3::new(r * u.cos(), minor * w.sin(), r * u.sin()));
            }
        }
        let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
        let mut f = Vec::with_capacity(2 * nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                f.push([a, c, b]);
                f.push([a, d, c]);
            }
        }
        Self::new(v, f).expect("torus is valid").normalized()
    }

    /// Closed surface of revolution about the y axis through the profile
    /// `(radius, height)` pairs listed bottom to top, capped at both ends.
    pub fn revolve(profile: &[(f64, f64)], segments: usize) -> Result<Self> {
        if profile.len() < 2 || segments < 3 {
            return Err(Error::DegenerateInput(
                "profile needs 2 rings and 3 segments".into(),
            ));
        }
        let mut v = Vec::new();
        for &(r, y) in profile {
            for s in 0..segments {
                let a = 2.0 * PI * s as f64 / segments as f64;
                v.push(Vec3::new(r * a.cos(), y, -r * a.sin()));
            }
        }
        let ring = |k: usize, s: usize| k * segments + s % segments;
        let mut f = Vec::new();
        for k in 0..profile.len() - 1 {
            for s in 0..segments {
                let (a, b, c, d) = (
                    ring(k, s),
                    ring(k, s + 1),
                    ring(k + 1, s + 1),
                    ring(k + 1, s),
                );
                f.push([a, b, c]);
                f.push([a, c, d]);
            }
        }
        let bottom = v.len();
        v.push(Vec3::new(0.0, profile[0].1, 0.0));
        let top = v.len();
        v.push(Vec3::new(0.0, profile[profile.len() - 1].1, 0.0));
        let last = profile.len() - 1;
        for s in 0..segments {
            f.push([bottom, ring(0, s + 1), ring(0, s)]);
            f.push([top, ring(last, s), ring(last, s + 1)]);
        }
        Ok(Self::new(v, f)?.normalized())
    }

    /// A bottle: cylindrical body, tapered shoulder and a narrow neck.
    pub fn bottle(segments: usize) -> Self {
        let profile = [
            (0.45, -1.0),
            (0.5, -0.9),
            (0.5, 0.2),
            (0.42, 0.4),
            (0.2, 0.6),
            (0.16, 0.65),
            (0.16, 0.95),
            (0.18, 1.0),
        ];
        Self::revolve(&profile, segments).expect("bottle profile is valid")
    }
}

fn bbox(v: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = v.first()?;
    Some(
        v.iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p))),
    )
}
