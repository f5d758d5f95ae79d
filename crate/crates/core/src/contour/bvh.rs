//! Bounding volume hierarchy over mesh faces for ray queries.

use super::TriangleMesh;
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: Vec3::repeat(f64::INFINITY),
            hi: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.lo = self.lo.inf(&o.lo);
        self.hi = self.hi.sup(&o.hi);
    }

    /// Slab test; returns whether the ray overlaps the box within [tmin, tmax].
    fn hit(&self, o: &Vec3, inv: &Vec3, mut tmin: f64, mut tmax: f64) -> bool {
        for k in 0..3 {
            let mut t0 = (self.lo[k] - o[k]) * inv[k];
            let mut t1 = (self.hi[k] - o[k]) * inv[k];
            if inv[k] < 0.0 {
                std::mem::swap(&mut t0, &mut t1);
            }
            // NaN from 0 * inf means the ray lies in the slab plane
            if t0.is_nan() || t1.is_nan() {
                if o[k] < self.lo[k] || o[k] > self.hi[k] {
                    return false;
                }
                continue;
            }
            tmin = tmin.max(t0);
            tmax = tmax.min(t1);
            if tmax < tmin {
                return false;
            }
        }
        true
    }
}

enum Node {
    Leaf {
        bounds: Aabb,
        faces: Vec<usize>,
    },
    Inner {
        bounds: Aabb,
        left: usize,
        right: usize,
    },
}

pub struct Bvh<'m> {
    mesh: &'m TriangleMesh,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl<'m> Bvh<'m> {
    pub fn build(mesh: &'m TriangleMesh) -> Self {
        let mut bvh = Self {
            mesh,
            nodes: Vec::new(),
        };
        let mut ids: Vec<usize> = (0..mesh.faces.len()).collect();
        bvh.build_node(&mut ids);
        bvh
    }

    fn face_bounds(&self, f: usize) -> Aabb {
        let mut b = Aabb::empty();
        for &v in &self.mesh.faces[f] {
            b.grow(&self.mesh.vertices[v]);
        }
        b
    }

    fn centroid(&self, f: usize) -> Vec3 {
        let t = &self.mesh.faces[f];
        (self.mesh.vertices[t[0]] + self.mesh.vertices[t[1]] + self.mesh.vertices[t[2]]) / 3.0
    }

    fn build_node(&mut self, ids: &mut [usize]) -> usize {
        let mut bounds = Aabb::empty();
        for &f in ids.iter() {
            bounds.merge(&self.face_bounds(f));
        }
        if ids.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                bounds,
                faces: ids.to_vec(),
            });
            return self.nodes.len() - 1;
        }
        let ext = bounds.hi - bounds.lo;
        let axis = ext.imax();
        ids.sort_by(|&a, &b| {
            self.centroid(a)[axis]
                .total_cmp(&self.centroid(b)[axis])
                .then(a.cmp(&b))
        });
        let mid = ids.len() / 2;
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            bounds,
            faces: Vec::new(),
        });
        let (l, r) = ids.split_at_mut(mid);
        let left = self.build_node(l);
        let right = self.build_node(r);
        self.nodes[slot] = Node::Inner {
            bounds,
            left,
            right,
        };
        slot
    }

    /// Nearest intersection with `t` in the open interval (tmin, tmax):
    /// returns (t, face).
    pub fn first_hit(&self, o: &Vec3, d: &Vec3, tmin: f64, tmax: f64) -> Option<(f64, usize)> {
        let inv = Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let limit = best.map(|b| b.0).unwrap_or(tmax);
            match &self.nodes[n] {
                Node::Leaf { bounds, faces } => {
                    if !bounds.hit(o, &inv, tmin, limit) {
                        continue;
                    }
                    for &f in faces {
                        if let Some(t) = self.intersect(f, o, d) {
                            let cur = best.map(|b| b.0).unwrap_or(tmax);
                            if t > tmin && t < cur {
                                best = Some((t, f));
                            }
                        }
                    }
                }
                Node::Inner {
                    bounds,
                    left,
                    right,
                } => {
                    if bounds.hit(o, &inv, tmin, limit) {
                        stack.push(*right);
                        stack.push(*left);
                    }
                }
            }
        }
        best
    }

    pub fn occluded(&self, o: &Vec3, d: &Vec3, tmin: f64, tmax: f64) -> bool {
        self.first_hit(o, d, tmin, tmax).is_some()
    }

    /// Double-sided Moller-Trumbore intersection.
    fn intersect(&self, f: usize, o: &Vec3, d: &Vec3) -> Option<f64> {
        let t = &self.mesh.faces[f];
        let (a, b, c) = (
            self.mesh.vertices[t[0]],
            self.mesh.vertices[t[1]],
            self.mesh.vertices[t[2]],
        );
        let e1 = b - a;
        let e2 = c - a;
        let p = d.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-14 {
            return None;
        }
        let inv = 1.0 / det;
        let s = o - a;
        let u = s.dot(&p) * inv;
        if !(-1e-12..=1.0 + 1e-12).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = d.dot(&q) * inv;
        if v < -1e-12 || u + v > 1.0 + 1e-12 {
            return None;
        }
        Some(e2.dot(&q) * inv)
    }
}
