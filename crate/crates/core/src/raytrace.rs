//! Deterministic image-method tracer.
//!
//! Every path is the direct segment or a specular chain of reflections of
//! order `1..=max_order`, found by mirroring the transmitter across the
//! reflecting walls and back-projecting from the receiver. Each segment also
//! records the walls it passes through. Paths are converted to complex
//! narrowband amplitudes by [`path_amplitude`].

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{PlanarPolygon, Vec3};
use crate::scene::{AntennaPattern, PatternKind, Wall};
use crate::SPEED_OF_LIGHT;

/// Reflection points closer than this to a polygon edge are rejected, and
/// segment endpoints within this distance of a plane do not cross it.
pub const GEOMETRY_EPS: f64 = 1e-9;

/// Minimum separation between trace endpoints.
pub const MIN_ENDPOINT_SEPARATION_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Reflection,
    Transmission,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub wall: usize,
    pub point: Vec3,
    /// Power loss applied at this interaction (dB), copied from the wall material.
    pub loss_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    /// TX, interaction points in traversal order, RX.
    pub points: Vec<Vec3>,
    pub length_m: f64,
    pub interactions: Vec<Interaction>,
    /// Unit propagation direction leaving the transmitter.
    pub departure: Vec3,
    /// Unit propagation direction entering the receiver.
    pub arrival: Vec3,
}

impl Path {
    pub fn reflection_count(&self) -> usize {
        self.interactions
            .iter()
            .filter(|i| i.kind == InteractionKind::Reflection)
            .count()
    }

    fn signature(&self) -> impl Iterator<Item = (InteractionKind, usize)> + '_ {
        self.interactions.iter().map(|i| (i.kind, i.wall))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathTrace {
    pub tx: Vec3,
    pub rx: Vec3,
    pub paths: Vec<Path>,
}

/// A pattern together with the direction its boresight points to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPattern {
    pub pattern: AntennaPattern,
    pub boresight: Vec3,
}

impl OrientedPattern {
    pub fn new(pattern: AntennaPattern, boresight: Vec3) -> Self {
        Self { pattern, boresight }
    }

    /// 0 dBi isotropic element.
    pub fn isotropic() -> Self {
        Self::new(AntennaPattern::isotropic(0.0), Vec3::x())
    }

    /// Linear power gain towards `direction` (pointing away from the antenna).
    pub fn gain(&self, direction: &Vec3) -> f64 {
        let cos_theta = self.boresight.dot(direction) / (self.boresight.norm() * direction.norm());
        pattern_gain(&self.pattern, cos_theta)
    }
}

/// Linear power gain for a direction at angle θ from boresight, given as `cos θ`.
pub fn pattern_gain(pattern: &AntennaPattern, cos_theta: f64) -> f64 {
    let peak = 10f64.powf(pattern.peak_gain_dbi / 10.0);
    match pattern.kind {
        PatternKind::Isotropic => peak,
        PatternKind::CosPow => {
            if cos_theta > 0.0 {
                peak * cos_theta.min(1.0).powf(pattern.exponent)
            } else {
                peak * 10f64.powf(pattern.backlobe_floor_db / 10.0)
            }
        }
    }
}

/// Complex narrowband amplitude of one path: antenna gains, spherical
/// spreading, interaction losses and propagation phase.
pub fn path_amplitude(path: &Path, frequency_hz: f64, tx: &OrientedPattern, rx: &OrientedPattern) -> Complex64 {
    let wavelength = SPEED_OF_LIGHT / frequency_hz;
    let gains = (tx.gain(&path.departure) * rx.gain(&(-path.arrival))).sqrt();
    let spreading = wavelength / (4.0 * PI * path.length_m);
    let loss_db: f64 = path.interactions.iter().map(|i| i.loss_db).sum();
    let losses = 10f64.powf(-loss_db / 20.0);
    let phase = -2.0 * PI * (path.length_m / wavelength).fract();
    Complex64::from_polar(gains * spreading * losses, phase)
}

struct PreparedWall {
    index: usize,
    polygon: PlanarPolygon,
    reflection_loss_db: f64,
    transmission_loss_db: f64,
}

/// Reflection chain rooted at the transmitter: `images[i]` is the TX image
/// after mirroring across `walls[..=i]` (indices into the prepared list).
struct ImageNode {
    parent: Option<usize>,
    wall: usize,
    image: Vec3,
}

/// Walls prepared for repeated tracing.
pub struct Tracer {
    walls: Vec<PreparedWall>,
}

impl Tracer {
    /// Degenerate polygons are skipped; validated scenes have none.
    pub fn new(walls: &[Wall]) -> Self {
        let walls = walls
            .iter()
            .enumerate()
            .filter_map(|(index, w)| {
                PlanarPolygon::new(&w.vertices).map(|polygon| PreparedWall {
                    index,
                    polygon,
                    reflection_loss_db: w.material.reflection_loss_db,
                    transmission_loss_db: w.material.transmission_loss_db,
                })
            })
            .collect();
        Self { walls }
    }

    pub fn trace(&self, tx: Vec3, rx: Vec3, max_order: usize) -> Result<PathTrace> {
        Ok(self.trace_many(tx, &[rx], max_order)?.pop().expect("one receiver"))
    }

    /// Traces one transmitter to several receivers, sharing the image tree.
    pub fn trace_many(&self, tx: Vec3, receivers: &[Vec3], max_order: usize) -> Result<Vec<PathTrace>> {
        for rx in receivers {
            let distance = (rx - tx).norm();
            if !(distance >= MIN_ENDPOINT_SEPARATION_M) {
                return Err(Error::DegenerateEndpoints { distance });
            }
        }
        let tree = self.image_tree(&tx, max_order);
        Ok(receivers
            .iter()
            .map(|rx| self.trace_with_tree(&tree, tx, *rx))
            .collect())
    }

    fn image_tree(&self, tx: &Vec3, max_order: usize) -> Vec<ImageNode> {
        let mut nodes: Vec<ImageNode> = Vec::new();
        let mut level_start = 0;
        for depth in 0..max_order {
            let level_end = nodes.len();
            if depth == 0 {
                for (w, wall) in self.walls.iter().enumerate() {
                    nodes.push(ImageNode {
                        parent: None,
                        wall: w,
                        image: wall.polygon.mirror(tx),
                    });
                }
            } else {
                for parent in level_start..level_end {
                    let (pw, pimage) = (nodes[parent].wall, nodes[parent].image);
                    for (w, wall) in self.walls.iter().enumerate() {
                        if w == pw {
                            continue;
                        }
                        nodes.push(ImageNode {
                            parent: Some(parent),
                            wall: w,
                            image: wall.polygon.mirror(&pimage),
                        });
                    }
                }
            }
            level_start = level_end;
            if nodes.len() == level_end {
                break;
            }
        }
        nodes
    }

    fn trace_with_tree(&self, tree: &[ImageNode], tx: Vec3, rx: Vec3) -> PathTrace {
        let mut paths = Vec::new();
        paths.push(self.build_path(vec![tx, rx], &[]));

        let mut chain = Vec::new();
        let mut reflection_points = Vec::new();
        for leaf in 0..tree.len() {
            chain.clear();
            let mut cursor = Some(leaf);
            while let Some(i) = cursor {
                chain.push(i);
                cursor = tree[i].parent;
            }
            // chain is leaf-first, i.e. the last reflection first.
            reflection_points.clear();
            let mut target = rx;
            let mut valid = true;
            for &node in &chain {
                let wall = &self.walls[tree[node].wall];
                match reflection_point(&wall.polygon, &tree[node].image, &target) {
                    Some(p) => {
                        reflection_points.push(p);
                        target = p;
                    }
                    None => {
                        valid = false;
                        break;
                    }
                }
            }
            if !valid {
                continue;
            }
            let mut points = Vec::with_capacity(chain.len() + 2);
            points.push(tx);
            points.extend(reflection_points.iter().rev());
            points.push(rx);
            if points.windows(2).any(|s| (s[1] - s[0]).norm() < GEOMETRY_EPS) {
                continue;
            }
            let walls: Vec<usize> = chain.iter().rev().map(|&n| tree[n].wall).collect();
            paths.push(self.build_path(points, &walls));
        }

        paths.sort_by(compare_paths);
        paths.dedup_by(|b, a| a.signature().eq(b.signature()));
        PathTrace { tx, rx, paths }
    }

    /// `reflecting[i]` is the prepared-wall index hit at `points[i + 1]`.
    fn build_path(&self, points: Vec<Vec3>, reflecting: &[usize]) -> Path {
        let mut interactions = Vec::new();
        let mut length = 0.0;
        let mut crossings: Vec<(f64, usize, Vec3)> = Vec::new();
        for (s, seg) in points.windows(2).enumerate() {
            let (a, b) = (seg[0], seg[1]);
            length += (b - a).norm();
            crossings.clear();
            for (w, wall) in self.walls.iter().enumerate() {
                if let Some((t, p)) = segment_crossing(&wall.polygon, &a, &b) {
                    crossings.push((t, w, p));
                }
            }
            crossings.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            for &(_, w, p) in &crossings {
                let wall = &self.walls[w];
                interactions.push(Interaction {
                    kind: InteractionKind::Transmission,
                    wall: wall.index,
                    point: p,
                    loss_db: wall.transmission_loss_db,
                });
            }
            if let Some(&w) = reflecting.get(s) {
                let wall = &self.walls[w];
                interactions.push(Interaction {
                    kind: InteractionKind::Reflection,
                    wall: wall.index,
                    point: b,
                    loss_db: wall.reflection_loss_db,
                });
            }
        }
        let n = points.len();
        let departure = (points[1] - points[0]).normalize();
        let arrival = (points[n - 1] - points[n - 2]).normalize();
        Path {
            points,
            length_m: length,
            interactions,
            departure,
            arrival,
        }
    }
}

/// Convenience wrapper preparing the walls on every call.
pub fn trace_paths(walls: &[Wall], tx: Vec3, rx: Vec3, max_order: usize) -> Result<PathTrace> {
    Tracer::new(walls).trace(tx, rx, max_order)
}

fn compare_paths(a: &Path, b: &Path) -> Ordering {
    a.length_m
        .total_cmp(&b.length_m)
        .then(a.interactions.len().cmp(&b.interactions.len()))
        .then_with(|| a.signature().cmp(b.signature()))
}

/// Where the segment image→target meets the wall, if that point is a valid
/// specular reflection: endpoints strictly on opposite sides and the hit
/// strictly inside the polygon.
fn reflection_point(polygon: &PlanarPolygon, image: &Vec3, target: &Vec3) -> Option<Vec3> {
    let di = polygon.signed_distance(image);
    let dt = polygon.signed_distance(target);
    if !((di > GEOMETRY_EPS && dt < -GEOMETRY_EPS) || (di < -GEOMETRY_EPS && dt > GEOMETRY_EPS)) {
        return None;
    }
    let t = dt / (dt - di);
    let p = target + (image - target) * t;
    polygon
        .contains_strict(polygon.project(&p), GEOMETRY_EPS)
        .then_some(p)
}

/// Open-segment crossing of the polygon interior; grazing contacts ignored.
fn segment_crossing(polygon: &PlanarPolygon, a: &Vec3, b: &Vec3) -> Option<(f64, Vec3)> {
    let da = polygon.signed_distance(a);
    let db = polygon.signed_distance(b);
    if !((da > GEOMETRY_EPS && db < -GEOMETRY_EPS) || (da < -GEOMETRY_EPS && db > GEOMETRY_EPS)) {
        return None;
    }
    let t = da / (da - db);
    let p = a + (b - a) * t;
    polygon
        .contains_strict(polygon.project(&p), GEOMETRY_EPS)
        .then_some((t, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Material;

    fn wall(vertices: Vec<[f64; 3]>, refl: f64, trans: f64) -> Wall {
        Wall {
            vertices,
            material: Material {
                reflection_loss_db: refl,
                transmission_loss_db: trans,
            },
        }
    }

    fn big_floor() -> Wall {
        let l = 1e4;
        wall(vec![[-l, -l, 0.0], [l, -l, 0.0], [l, l, 0.0], [-l, l, 0.0]], 0.0, 0.0)
    }

    #[test]
    fn free_space_single_path() {
        let t = trace_paths(&[], Vec3::new(0.0, 0.0, 1.0), Vec3::new(10.0, 0.0, 1.0), 3).unwrap();
        assert_eq!(t.paths.len(), 1);
        assert_eq!(t.paths[0].length_m, 10.0);
        assert!(t.paths[0].interactions.is_empty());
        assert_eq!(t.paths[0].departure, Vec3::x());
        assert_eq!(t.paths[0].arrival, Vec3::x());
    }

    #[test]
    fn floor_bounce_via_image() {
        let t = trace_paths(&[big_floor()], Vec3::new(0.0, 0.0, 1.0), Vec3::new(10.0, 0.0, 1.0), 1).unwrap();
        assert_eq!(t.paths.len(), 2);
        assert_eq!(t.paths[0].length_m, 10.0);
        let bounce = &t.paths[1];
        assert!((bounce.length_m - 104f64.sqrt()).abs() < 1e-9);
        assert!((bounce.length_m - 10.198039).abs() < 1e-6);
        assert_eq!(bounce.interactions.len(), 1);
        assert_eq!(bounce.interactions[0].kind, InteractionKind::Reflection);
        assert!((bounce.interactions[0].point - Vec3::new(5.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn wall_between_endpoints_is_transmission() {
        let w = wall(vec![[5.0, -5.0, -5.0], [5.0, 5.0, -5.0], [5.0, 5.0, 5.0], [5.0, -5.0, 5.0]], 3.0, 7.0);
        let t = trace_paths(&[w], Vec3::new(0.0, 0.0, 1.0), Vec3::new(10.0, 0.0, 1.0), 0).unwrap();
        assert_eq!(t.paths.len(), 1);
        let i = &t.paths[0].interactions;
        assert_eq!(i.len(), 1);
        assert_eq!(i[0].kind, InteractionKind::Transmission);
        assert_eq!(i[0].loss_db, 7.0);
        assert!((i[0].point - Vec3::new(5.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn coincident_endpoints_rejected() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let err = trace_paths(&[], p, p + Vec3::new(1e-12, 0.0, 0.0), 1).unwrap_err();
        assert_eq!(err.code(), "DEGENERATE_ENDPOINTS");
    }

    #[test]
    fn edge_hit_is_rejected() {
        // Floor ends exactly under the specular point.
        let w = wall(vec![[-10.0, -10.0, 0.0], [5.0, -10.0, 0.0], [5.0, 10.0, 0.0], [-10.0, 10.0, 0.0]], 0.0, 0.0);
        let t = trace_paths(&[w], Vec3::new(0.0, 0.0, 1.0), Vec3::new(10.0, 0.0, 1.0), 1).unwrap();
        assert_eq!(t.paths.len(), 1);
    }

    #[test]
    fn parallel_walls_second_order() {
        // Two mirrors facing each other: order 2 adds zig-zag paths.
        let a = wall(vec![[-50.0, -1.0, -50.0], [50.0, -1.0, -50.0], [50.0, -1.0, 50.0], [-50.0, -1.0, 50.0]], 0.0, 0.0);
        let b = wall(vec![[-50.0, 1.0, -50.0], [50.0, 1.0, -50.0], [50.0, 1.0, 50.0], [-50.0, 1.0, 50.0]], 0.0, 0.0);
        let walls = [a, b];
        let tx = Vec3::new(0.0, 0.0, 0.0);
        let rx = Vec3::new(4.0, 0.0, 0.0);
        let t1 = trace_paths(&walls, tx, rx, 1).unwrap();
        let t2 = trace_paths(&walls, tx, rx, 2).unwrap();
        assert_eq!(t1.paths.len(), 3);
        assert_eq!(t2.paths.len(), 5);
        // Single bounce off y = ±1: image at distance 2 across.
        assert!((t1.paths[1].length_m - 20f64.sqrt()).abs() < 1e-12);
        // Double bounce: image displaced by 4 across.
        assert!((t2.paths[3].length_m - 32f64.sqrt()).abs() < 1e-12);
        for p in &t2.paths {
            let sum: f64 = p.points.windows(2).map(|s| (s[1] - s[0]).norm()).sum();
            assert!((sum - p.length_m).abs() <= 1e-9 * p.length_m);
        }
    }

    #[test]
    fn pattern_gains() {
        let iso = AntennaPattern::isotropic(0.0);
        assert_eq!(pattern_gain(&iso, -0.3), 1.0);
        let p = AntennaPattern::cos_pow(2.0, 5.0, -20.0);
        assert!((pattern_gain(&p, 1.0) - 3.162278).abs() < 1e-6);
        let at60 = pattern_gain(&p, 60f64.to_radians().cos());
        assert!((at60 - 10f64.powf(0.5) * 0.25).abs() < 1e-12);
        assert!((pattern_gain(&p, -0.5) - 10f64.powf(0.5) * 0.01).abs() < 1e-12);
        assert!((pattern_gain(&p, 0.0) - 10f64.powf(0.5) * 0.01).abs() < 1e-12);
    }

    #[test]
    fn friis_at_one_meter() {
        let t = trace_paths(&[], Vec3::zeros(), Vec3::x(), 0).unwrap();
        let a = path_amplitude(&t.paths[0], 3.7e9, &OrientedPattern::isotropic(), &OrientedPattern::isotropic());
        let lambda = SPEED_OF_LIGHT / 3.7e9;
        let expected = -20.0 * (4.0 * PI / lambda).log10();
        assert!((10.0 * a.norm_sqr().log10() - expected).abs() < 1e-9);
        assert!((expected + 43.81).abs() < 0.005);
    }

    #[test]
    fn full_wavelength_phase_is_unity() {
        let lambda = SPEED_OF_LIGHT / 3.7e9;
        let t = trace_paths(&[], Vec3::zeros(), Vec3::new(lambda, 0.0, 0.0), 0).unwrap();
        let a = path_amplitude(&t.paths[0], 3.7e9, &OrientedPattern::isotropic(), &OrientedPattern::isotropic());
        let unit = a / a.norm();
        assert!((unit - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn reflection_loss_scales_power() {
        let t = trace_paths(&[], Vec3::zeros(), Vec3::x() * 3.0, 0).unwrap();
        let mut lossy = t.paths[0].clone();
        lossy.interactions.push(Interaction {
            kind: InteractionKind::Reflection,
            wall: 0,
            point: Vec3::x(),
            loss_db: 3.0,
        });
        let iso = OrientedPattern::isotropic();
        let p0 = path_amplitude(&t.paths[0], 3.7e9, &iso, &iso).norm_sqr();
        let p1 = path_amplitude(&lossy, 3.7e9, &iso, &iso).norm_sqr();
        assert!((10.0 * (p0 / p1).log10() - 3.0).abs() < 1e-12);
    }
}
