//! Per-room breakdown of the two-room demo: baseline vs. each RIS placement.
//!
//! cargo run --release -p risemf-core --example room_report -- scenes/demo_location1.json scenes/demo.json

use std::time::Instant;

use risemf_core::link::LinkStatus;
use risemf_core::mapper::{classify, compute_map, Category, CoverageMap, Variant, DEFAULT_EPSILON_DB};
use risemf_core::scene::parse_scene;

fn room(x: f64) -> &'static str {
    if x < 10.0 {
        "room1"
    } else {
        "room2"
    }
}

fn status_counts(map: &CoverageMap, name: &str) -> [usize; 3] {
    let mut c = [0; 3];
    for cell in map.cells.iter().filter(|c| room(c.position[0]) == name) {
        c[match cell.status {
            LinkStatus::Covered => 0,
            LinkStatus::CoveredMinPower => 1,
            LinkStatus::OutOfCoverage => 2,
        }] += 1;
    }
    c
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut baseline = None;
    for path in std::env::args().skip(1) {
        let scene = parse_scene(&std::fs::read_to_string(&path)?)?;
        if baseline.is_none() {
            let t = Instant::now();
            let b = compute_map(&scene, Variant::Baseline)?;
            println!("baseline ({:.2?})", t.elapsed());
            for r in ["room1", "room2"] {
                println!("  {r}: [covered, min_power, out] = {:?}", status_counts(&b, r));
            }
            baseline = Some(b);
        }
        let base = baseline.as_ref().unwrap();
        let t = Instant::now();
        let v = compute_map(&scene, Variant::WithRis)?;
        println!("{path} with RIS ({:.2?})", t.elapsed());
        let c = classify(base, &v, DEFAULT_EPSILON_DB)?;
        for r in ["room1", "room2"] {
            let cells: Vec<_> = c.cells.iter().filter(|x| room(x.position[0]) == r).collect();
            let n = |k: Category| cells.iter().filter(|x| x.category == k).count();
            let max_red = cells.iter().filter_map(|x| x.reduction_db).fold(0.0, f64::max);
            println!(
                "  {r}: status {:?}; reduced {} extended {} unchanged {} max reduction {:.2} dB",
                status_counts(&v, r),
                n(Category::ReducedExposure),
                n(Category::ExtendedCoverage),
                n(Category::NoChange),
                max_red
            );
        }
    }
    Ok(())
}
