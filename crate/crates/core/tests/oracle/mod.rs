//! Independent reference implementations and random-instance generators
//! shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use risemf_core::scene::{Material, Wall};

pub type V3 = Vector3<f64>;

/// One specular path found by direct length minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePath {
    pub length_m: f64,
    pub loss_db: f64,
    pub reflections: usize,
    pub transmissions: usize,
}

struct Plane {
    origin: V3,
    e1: V3,
    e2: V3,
    normal: V3,
    vertices: Vec<V3>,
}

impl Plane {
    fn of(wall: &Wall) -> Plane {
        let v: Vec<V3> = wall.vertices.iter().map(|p| V3::from(*p)).collect();
        let normal = (v[1] - v[0]).cross(&(v[2] - v[0])).normalize();
        let e1 = (v[1] - v[0]).normalize();
        let e2 = normal.cross(&e1);
        Plane {
            origin: v[0],
            e1,
            e2,
            normal,
            vertices: v,
        }
    }

    fn at(&self, u: f64, w: f64) -> V3 {
        self.origin + self.e1 * u + self.e2 * w
    }

    fn distance(&self, p: &V3) -> f64 {
        (p - self.origin).dot(&self.normal)
    }

    /// Convex polygon, vertices counter-clockwise about `normal`; every
    /// in-plane edge distance must exceed `margin`.
    fn inside(&self, p: &V3, margin: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let edge = b - a;
            edge.cross(&(p - a)).dot(&self.normal) / edge.norm() > margin
        })
    }

    fn centroid(&self) -> (f64, f64) {
        let c = self.vertices.iter().sum::<V3>() / self.vertices.len() as f64;
        ((c - self.origin).dot(&self.e1), (c - self.origin).dot(&self.e2))
    }
}

fn chain_points(planes: &[&Plane], tx: &V3, rx: &V3, x: &DVector<f64>) -> Vec<V3> {
    let mut pts = vec![*tx];
    for (i, p) in planes.iter().enumerate() {
        pts.push(p.at(x[2 * i], x[2 * i + 1]));
    }
    pts.push(*rx);
    pts
}

fn chain_length(pts: &[V3]) -> f64 {
    pts.windows(2).map(|s| (s[1] - s[0]).norm()).sum()
}

fn smoothed_length(pts: &[V3], mu: f64) -> f64 {
    pts.windows(2).map(|s| ((s[1] - s[0]).norm_squared() + mu * mu).sqrt()).sum()
}

/// Minimizes the total length of tx → plane_1 → … → plane_m → rx over the
/// in-plane coordinates of each bounce point (Fermat). The objective is a
/// sum of norms of affine maps, hence convex. Each norm is smoothed to
/// `sqrt(|d|² + μ²)` so damped Newton stays well defined when a segment
/// collapses (bounces near a wall intersection), and μ is driven towards 0
/// with warm starts.
fn fermat_points(planes: &[&Plane], tx: &V3, rx: &V3) -> Vec<V3> {
    let m = planes.len();
    let mut x = DVector::zeros(2 * m);
    for (i, p) in planes.iter().enumerate() {
        let (u, w) = p.centroid();
        x[2 * i] = u;
        x[2 * i + 1] = w;
    }
    for mu in [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8, 1e-10, 1e-12] {
        newton(planes, tx, rx, &mut x, mu);
    }
    chain_points(planes, tx, rx, &x)
}

fn newton(planes: &[&Plane], tx: &V3, rx: &V3, x: &mut DVector<f64>, mu: f64) {
    let m = planes.len();
    for _ in 0..100 {
        let pts = chain_points(planes, tx, rx, x);
        let mut grad = DVector::zeros(2 * m);
        let mut hess = DMatrix::zeros(2 * m, 2 * m);
        for s in 0..=m {
            let d = pts[s + 1] - pts[s];
            let len = (d.norm_squared() + mu * mu).sqrt();
            let dir = d / len;
            let h = (nalgebra::Matrix3::identity() - dir * dir.transpose()) / len;
            // Segment s joins bounce s-1 (start) and bounce s (end).
            let ends = [(s.checked_sub(1), -1.0), ((s < m).then_some(s), 1.0)];
            for (a, sa) in ends {
                let Some(a) = a else { continue };
                let ea = [planes[a].e1, planes[a].e2];
                for (i, e) in ea.iter().enumerate() {
                    grad[2 * a + i] += sa * dir.dot(e);
                }
                for (b, sb) in ends {
                    let Some(b) = b else { continue };
                    let eb = [planes[b].e1, planes[b].e2];
                    for (i, ei) in ea.iter().enumerate() {
                        for (j, ej) in eb.iter().enumerate() {
                            hess[(2 * a + i, 2 * b + j)] += sa * sb * ei.dot(&(h * ej));
                        }
                    }
                }
            }
        }
        if grad.norm() < 1e-15 {
            return;
        }
        let step = hess.lu().solve(&(-&grad)).unwrap_or(-&grad);
        let f0 = smoothed_length(&pts, mu);
        let mut t = 1.0;
        loop {
            let cand = &*x + &step * t;
            if smoothed_length(&chain_points(planes, tx, rx, &cand), mu) < f0 {
                *x = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-14 {
                return;
            }
        }
    }
}

/// Brute-force enumeration of every wall sequence without immediate
/// repeats, up to `max_order` bounces.
pub fn brute_force_paths(walls: &[Wall], tx: [f64; 3], rx: [f64; 3], max_order: usize) -> Vec<OraclePath> {
    let planes: Vec<Plane> = walls.iter().map(Plane::of).collect();
    let (tx, rx) = (V3::from(tx), V3::from(rx));
    let mut sequences: Vec<Vec<usize>> = vec![vec![]];
    let mut frontier = sequences.clone();
    for _ in 0..max_order {
        let mut next = Vec::new();
        for seq in &frontier {
            for w in 0..walls.len() {
                if seq.last() != Some(&w) {
                    let mut s = seq.clone();
                    s.push(w);
                    next.push(s);
                }
            }
        }
        sequences.extend(next.iter().cloned());
        frontier = next;
    }

    let mut out = Vec::new();
    'seq: for seq in sequences {
        let chain: Vec<&Plane> = seq.iter().map(|&i| &planes[i]).collect();
        let pts = fermat_points(&chain, &tx, &rx);
        let mut loss_db = 0.0;
        for (i, &w) in seq.iter().enumerate() {
            let p = &planes[w];
            let (before, after) = (p.distance(&pts[i]), p.distance(&pts[i + 2]));
            if before * after <= 0.0 || before.abs() < 1e-9 || after.abs() < 1e-9 {
                continue 'seq;
            }
            if !p.inside(&pts[i + 1], 1e-9) {
                continue 'seq;
            }
            loss_db += walls[w].material.reflection_loss_db;
        }
        let mut transmissions = 0;
        for s in pts.windows(2) {
            for (w, p) in planes.iter().enumerate() {
                let (da, db) = (p.distance(&s[0]), p.distance(&s[1]));
                if da.abs() < 1e-9 || db.abs() < 1e-9 || da * db > 0.0 {
                    continue;
                }
                let hit = s[0] + (s[1] - s[0]) * (da / (da - db));
                if p.inside(&hit, 0.0) {
                    transmissions += 1;
                    loss_db += walls[w].material.transmission_loss_db;
                }
            }
        }
        out.push(OraclePath {
            length_m: chain_length(&pts),
            loss_db,
            reflections: seq.len(),
            transmissions,
        });
    }
    out.sort_by(|a, b| a.length_m.total_cmp(&b.length_m));
    out
}

/// Random rectangle: center in a 6 m cube, random orientation, sides 4-12 m.
pub fn random_wall(rng: &mut ChaCha8Rng) -> Wall {
    let center = random_point(rng, 3.0);
    let normal = random_unit(rng);
    let helper = if normal.x.abs() < 0.9 { V3::x() } else { V3::y() };
    let e1 = normal.cross(&helper).normalize();
    let e2 = normal.cross(&e1);
    let (a, b) = (rng.gen_range(2.0..6.0), rng.gen_range(2.0..6.0));
    let corner = |s: f64, t: f64| {
        let p = center + e1 * (s * a) + e2 * (t * b);
        [p.x, p.y, p.z]
    };
    Wall {
        vertices: vec![corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0)],
        material: Material {
            reflection_loss_db: rng.gen_range(0.0..20.0),
            transmission_loss_db: rng.gen_range(0.0..40.0),
        },
    }
}

pub fn random_point(rng: &mut ChaCha8Rng, half_extent: f64) -> V3 {
    V3::new(
        rng.gen_range(-half_extent..half_extent),
        rng.gen_range(-half_extent..half_extent),
        rng.gen_range(-half_extent..half_extent),
    )
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> V3 {
    loop {
        let v = random_point(rng, 1.0);
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Endpoint at least 1 mm away from every wall plane.
pub fn random_endpoint(rng: &mut ChaCha8Rng, walls: &[Wall]) -> [f64; 3] {
    let planes: Vec<Plane> = walls.iter().map(Plane::of).collect();
    loop {
        let p = random_point(rng, 5.0);
        if planes.iter().all(|pl| pl.distance(&p).abs() > 1e-3) {
            return [p.x, p.y, p.z];
        }
    }
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len).map(|_| random_complex(rng)).collect()
}

/// `g[n] = h[n] + Σ_k q[k][n] b[k] w[k]` by explicit scalar loops.
pub fn equivalent_channel_loops(
    h: &[Complex64],
    w: &[Complex64],
    q: &[Vec<Complex64>],
    b: &[Complex64],
) -> Vec<Complex64> {
    let mut g = Vec::with_capacity(h.len());
    for n in 0..h.len() {
        let mut re = h[n].re;
        let mut im = h[n].im;
        for k in 0..w.len() {
            let (qr, qi) = (q[k][n].re, q[k][n].im);
            let (br, bi) = (b[k].re, b[k].im);
            let (wr, wi) = (w[k].re, w[k].im);
            let (tr, ti) = (qr * br - qi * bi, qr * bi + qi * br);
            re += tr * wr - ti * wi;
            im += tr * wi + ti * wr;
        }
        g.push(Complex64::new(re, im));
    }
    g
}

/// Largest elementwise deviation relative to the largest magnitude in `want`.
pub fn relative_error(got: &[Complex64], want: &[Complex64]) -> f64 {
    let scale = want.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    got.iter().zip(want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
}
