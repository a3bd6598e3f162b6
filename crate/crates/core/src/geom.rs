//! Planar polygon helpers shared by scene validation and the tracer.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

#[inline]
pub fn vec3(p: [f64; 3]) -> Vec3 {
    Vec3::new(p[0], p[1], p[2])
}

#[inline]
pub fn arr3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// A polygon with its supporting plane and an in-plane 2D frame.
#[derive(Debug, Clone)]
pub struct PlanarPolygon {
    vertices: Vec<Vec3>,
    /// Unit normal (Newell orientation).
    normal: Vec3,
    /// Plane offset: `normal · p == offset` on the plane.
    offset: f64,
    origin: Vec3,
    u: Vec3,
    v: Vec3,
    outline: Vec<[f64; 2]>,
}

impl PlanarPolygon {
    /// Builds the polygon; `None` when fewer than 3 vertices or zero area.
    pub fn new(points: &[[f64; 3]]) -> Option<Self> {
        if points.len() < 3 {
            return None;
        }
        let vertices: Vec<Vec3> = points.iter().copied().map(vec3).collect();
        // Newell's method: robust normal for non-convex, slightly warped loops.
        let mut n = Vec3::zeros();
        for (i, a) in vertices.iter().enumerate() {
            let b = &vertices[(i + 1) % vertices.len()];
            n.x += (a.y - b.y) * (a.z + b.z);
            n.y += (a.z - b.z) * (a.x + b.x);
            n.z += (a.x - b.x) * (a.y + b.y);
        }
        let norm = n.norm();
        if !(norm > 1e-12) {
            return None;
        }
        let normal = n / norm;
        let origin = vertices.iter().fold(Vec3::zeros(), |acc, p| acc + p) / vertices.len() as f64;
        let offset = normal.dot(&origin);

        let helper = if normal.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        let u = normal.cross(&helper).normalize();
        let v = normal.cross(&u);
        let outline = vertices
            .iter()
            .map(|p| {
                let d = p - origin;
                [d.dot(&u), d.dot(&v)]
            })
            .collect();

        Some(Self {
            vertices,
            normal,
            offset,
            origin,
            u,
            v,
            outline,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn normal(&self) -> &Vec3 {
        &self.normal
    }

    #[inline]
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Mirror image of `p` across the supporting plane.
    #[inline]
    pub fn mirror(&self, p: &Vec3) -> Vec3 {
        p - self.normal * (2.0 * self.signed_distance(p))
    }

    #[inline]
    pub fn project(&self, p: &Vec3) -> [f64; 2] {
        let d = p - self.origin;
        [d.dot(&self.u), d.dot(&self.v)]
    }

    /// Largest vertex distance from the fitted plane.
    pub fn planarity_error(&self) -> f64 {
        self.vertices
            .iter()
            .map(|p| self.signed_distance(p).abs())
            .fold(0.0, f64::max)
    }

    /// True when no two non-adjacent edges touch (in-plane projection).
    pub fn is_simple(&self) -> bool {
        let n = self.outline.len();
        for i in 0..n {
            let a0 = self.outline[i];
            let a1 = self.outline[(i + 1) % n];
            if dist2(a0, a1) == 0.0 {
                return false;
            }
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let b0 = self.outline[j];
                let b1 = self.outline[(j + 1) % n];
                if segments_touch(a0, a1, b0, b1) {
                    return false;
                }
            }
        }
        true
    }

    /// Even-odd containment of an in-plane point, requiring a clearance of
    /// more than `margin` from every edge.
    pub fn contains_strict(&self, q: [f64; 2], margin: f64) -> bool {
        let n = self.outline.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.outline[i];
            let b = self.outline[(i + 1) % n];
            if point_segment_distance(q, a, b) <= margin {
                return false;
            }
            if (a[1] > q[1]) != (b[1] > q[1]) {
                let x = a[0] + (q[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if q[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Containment including the boundary band of width `margin`.
    pub fn contains_closed(&self, q: [f64; 2], margin: f64) -> bool {
        let n = self.outline.len();
        (0..n).any(|i| point_segment_distance(q, self.outline[i], self.outline[(i + 1) % n]) <= margin)
            || self.contains_strict(q, 0.0)
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = [a[0] + t * ab[0], a[1] + t * ab[1]];
    dist2(p, c).sqrt()
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_touch(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> bool {
    const EPS: f64 = 1e-12;
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    let on = |p: [f64; 2], a: [f64; 2], b: [f64; 2]| point_segment_distance(p, a, b) <= 1e-12;
    on(a0, b0, b1) || on(a1, b0, b1) || on(b0, a0, a1) || on(b1, a0, a1)
}
