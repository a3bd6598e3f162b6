mod oracle;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risemf_core::geom::vec3;
use risemf_core::raytrace::{path_amplitude, trace_paths, InteractionKind, OrientedPattern, Path, PathTrace};
use risemf_core::scene::{AntennaPattern, Material, Wall};

use oracle::{brute_force_paths, random_endpoint, random_wall};

fn random_case(seed: u64) -> (Vec<Wall>, [f64; 3], [f64; 3]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(0..=2);
    let walls: Vec<Wall> = (0..count).map(|_| random_wall(&mut rng)).collect();
    let tx = random_endpoint(&mut rng, &walls);
    let rx = random_endpoint(&mut rng, &walls);
    (walls, tx, rx)
}

fn loss(p: &Path) -> f64 {
    p.interactions.iter().map(|i| i.loss_db).sum()
}

fn transmissions(p: &Path) -> usize {
    p.interactions
        .iter()
        .filter(|i| i.kind == InteractionKind::Transmission)
        .count()
}

/// (length, reflection count, interaction count) in canonical order.
fn profile(t: &PathTrace) -> Vec<(f64, usize, usize)> {
    let mut v: Vec<_> = t
        .paths
        .iter()
        .map(|p| (p.length_m, p.reflection_count(), p.interactions.len()))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    v
}

#[test]
fn matches_brute_force_enumeration() {
    let (mut first, mut second) = (0, 0);
    for seed in 0..1000 {
        let (walls, tx, rx) = random_case(seed);
        let order = if seed % 10 == 0 { 0 } else { 1 + (seed % 2) as usize };
        let traced = trace_paths(&walls, vec3(tx), vec3(rx), order).unwrap();
        let want = brute_force_paths(&walls, tx, rx, order);
        assert_eq!(traced.paths.len(), want.len(), "seed {seed}: path count");
        let mut got = traced.paths.clone();
        got.sort_by(|a, b| a.length_m.total_cmp(&b.length_m));
        for (g, w) in got.iter().zip(&want) {
            assert!((g.length_m - w.length_m).abs() < 1e-9, "seed {seed}: {} vs {}", g.length_m, w.length_m);
            assert_eq!(g.reflection_count(), w.reflections, "seed {seed}");
            assert_eq!(transmissions(g), w.transmissions, "seed {seed}");
            assert!((loss(g) - w.loss_db).abs() < 1e-9, "seed {seed}");
        }
        first += want.iter().filter(|p| p.reflections == 1).count();
        second += want.iter().filter(|p| p.reflections == 2).count();
    }
    assert!(first > 100 && second > 20, "too few reflected paths: {first} first-order, {second} second-order");
}

// Intersecting walls: the double bounce sits a few cm from the shared edge.
#[test]
fn wedge_double_bounce_matches_brute_force() {
    let (walls, tx, rx) = random_case(722);
    let traced = trace_paths(&walls, vec3(tx), vec3(rx), 2).unwrap();
    let want = brute_force_paths(&walls, tx, rx, 2);
    assert_eq!(traced.paths.len(), want.len());
    assert!(want.iter().any(|p| p.reflections == 2));
}

#[test]
fn path_geometry_is_consistent() {
    for seed in 0..100 {
        let (walls, tx, rx) = random_case(seed);
        for p in trace_paths(&walls, vec3(tx), vec3(rx), 2).unwrap().paths {
            let sum: f64 = p.points.windows(2).map(|s| (s[1] - s[0]).norm()).sum();
            assert!((sum - p.length_m).abs() <= 1e-9 * p.length_m);
            assert_eq!(p.points.len(), p.reflection_count() + 2);
            assert!((p.departure.norm() - 1.0).abs() < 1e-12);
            assert!((p.arrival.norm() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn reciprocity() {
    let pattern = OrientedPattern::new(AntennaPattern::cos_pow(2.0, 5.0, -20.0), vec3([0.3, -1.0, 0.2]));
    for seed in 0..150 {
        let (walls, a, b) = random_case(seed);
        let order = (seed % 3) as usize;
        let ab = trace_paths(&walls, vec3(a), vec3(b), order).unwrap();
        let ba = trace_paths(&walls, vec3(b), vec3(a), order).unwrap();
        let (pa, pb) = (profile(&ab), profile(&ba));
        assert_eq!(pa.len(), pb.len(), "seed {seed}");
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x.0 - y.0).abs() < 1e-9);
            assert_eq!((x.1, x.2), (y.1, y.2));
        }
        let sum = |t: &PathTrace| -> num_complex::Complex64 {
            t.paths.iter().map(|p| path_amplitude(p, 3.7e9, &pattern, &pattern)).sum()
        };
        let (fwd, rev) = (sum(&ab), sum(&ba));
        assert!((fwd - rev).norm() <= 1e-9 * fwd.norm().max(1e-300), "seed {seed}: {fwd} vs {rev}");
    }
}

#[test]
fn order_monotonicity() {
    for seed in 0..100 {
        let (walls, tx, rx) = random_case(seed);
        let mut previous: Vec<(f64, usize, usize)> = Vec::new();
        for order in 0..=3 {
            let now = profile(&trace_paths(&walls, vec3(tx), vec3(rx), order).unwrap());
            for p in &previous {
                assert!(
                    now.iter().any(|q| (q.0 - p.0).abs() < 1e-12 && q.1 == p.1 && q.2 == p.2),
                    "seed {seed}: path lost when raising order to {order}"
                );
            }
            previous = now;
        }
    }
}

#[test]
fn deterministic_across_runs_and_threads() {
    let (walls, tx, rx) = random_case(7);
    let reference = format!("{:?}", trace_paths(&walls, vec3(tx), vec3(rx), 3).unwrap());
    let threads: Vec<String> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|_| s.spawn(|| format!("{:?}", trace_paths(&walls, vec3(tx), vec3(rx), 3).unwrap())))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for t in threads {
        assert_eq!(t, reference);
    }
}

fn slab(x: f64, refl: f64, trans: f64) -> Wall {
    Wall {
        vertices: vec![[x, -5.0, -5.0], [x, 5.0, -5.0], [x, 5.0, 5.0], [x, -5.0, 5.0]],
        material: Material {
            reflection_loss_db: refl,
            transmission_loss_db: trans,
        },
    }
}

#[test]
fn friis_free_space_at_one_meter() {
    let trace = trace_paths(&[], vec3([0.0; 3]), vec3([1.0, 0.0, 0.0]), 3).unwrap();
    let iso = OrientedPattern::isotropic();
    let a = path_amplitude(&trace.paths[0], 3.7e9, &iso, &iso);
    let db = 20.0 * a.norm().log10();
    let lambda = risemf_core::SPEED_OF_LIGHT / 3.7e9;
    let want = 20.0 * (lambda / (4.0 * std::f64::consts::PI)).log10();
    assert!((db - want).abs() < 1e-6);
    assert_eq!((db * 100.0).round() / 100.0, -43.81);
}

proptest! {
    #[test]
    fn interactions_never_add_energy(
        refl in 0.0f64..30.0,
        trans in 0.0f64..60.0,
        extra in 0.0f64..30.0,
    ) {
        let iso = OrientedPattern::isotropic();
        let tx = vec3([-3.0, 0.3, 0.2]);
        let rx = vec3([4.0, -0.4, 0.1]);
        let amp = |walls: &[Wall]| -> Vec<f64> {
            trace_paths(walls, tx, rx, 1)
                .unwrap()
                .paths
                .iter()
                .map(|p| path_amplitude(p, 3.7e9, &iso, &iso).norm())
                .collect()
        };
        let free = amp(&[])[0];
        let through = amp(&[slab(0.0, refl, trans)]);
        prop_assert_eq!(through.len(), 1);
        prop_assert!(through[0] <= free);
        let thicker = amp(&[slab(0.0, refl, trans + extra)]);
        prop_assert!(thicker[0] <= through[0]);

        let mirror = [slab(6.0, refl, trans)];
        let bounced = trace_paths(&mirror, tx, rx, 1).unwrap();
        prop_assert_eq!(bounced.paths.len(), 2);
        let r = &bounced.paths[1];
        let lossless_spread = free * bounced.paths[0].length_m / r.length_m;
        prop_assert!(path_amplitude(r, 3.7e9, &iso, &iso).norm() <= lossless_spread * (1.0 + 1e-12));
    }
}
