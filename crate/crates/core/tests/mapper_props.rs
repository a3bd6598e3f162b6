use std::path::PathBuf;

use proptest::prelude::*;
use risemf_core::channel::compute_h;
use risemf_core::geom::vec3;
use risemf_core::link::{evaluate_link, LinkStatus};
use risemf_core::mapper::*;
use risemf_core::scene::{parse_scene, GridSpec, Scene, WeightMode};
use risemf_core::to_db;

fn load(name: &str) -> Scene {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenes").join(name);
    parse_scene(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn coarse(mut scene: Scene) -> Scene {
    scene.tracer.max_reflections = 1;
    scene.grid.step_m = 2.0;
    scene
}

#[test]
fn single_cell_matches_direct_composition() {
    let mut scene = load("demo.json");
    scene.walls.clear();
    scene.ris = None;
    scene.grid = GridSpec {
        x_min: 3.0,
        x_max: 4.0,
        y_min: 5.0,
        y_max: 6.0,
        step_m: 1.0,
        height_m: 1.5,
    };
    let map = compute_map(&scene, Variant::Baseline).unwrap();
    assert_eq!((map.nx, map.ny, map.cells.len()), (1, 1, 1));
    let cell = &map.cells[0];
    assert_eq!(cell.position, [3.5, 5.5, 1.5]);
    let link = evaluate_link(&compute_h(&scene, vec3([3.5, 5.5, 1.5])).unwrap(), &scene.budget);
    assert_eq!(cell.gain_db, to_db(link.gain_linear));
    assert_eq!(cell.p_tx_dbm, link.p_tx_dbm);
    assert_eq!(cell.status, link.status);
    assert_eq!(cell.ue_ris_power_db, None);
}

#[test]
fn with_ris_requires_a_ris() {
    let mut scene = load("demo.json");
    scene.ris = None;
    assert_eq!(compute_map(&scene, Variant::WithRis).unwrap_err().code(), "RIS_ABSENT");
}

#[test]
fn output_independent_of_thread_count() {
    let scene = coarse(load("demo.json"));
    let opts = |threads| MapOptions {
        weight_mode: None,
        threads: Some(threads),
    };
    let reference = map_csv_string(&compute_map_with(&scene, Variant::WithRis, &opts(1), &|_| {}).unwrap());
    for threads in [2, 3, 8] {
        let again = compute_map_with(&scene, Variant::WithRis, &opts(threads), &|_| {}).unwrap();
        assert_eq!(map_csv_string(&again), reference);
    }
    assert_eq!(map_csv_string(&compute_map(&scene, Variant::WithRis).unwrap()), reference);
}

#[test]
fn progress_reaches_cell_count() {
    let scene = coarse(load("demo.json"));
    let seen = std::sync::Mutex::new(Vec::new());
    let map = compute_map_with(&scene, Variant::Baseline, &MapOptions::default(), &|n| seen.lock().unwrap().push(n))
        .unwrap();
    let mut seen = seen.into_inner().unwrap();
    seen.sort();
    assert_eq!(seen, (1..=map.cells.len()).collect::<Vec<_>>());
}

#[test]
fn refined_grid_reproduces_coarse_cells() {
    let mut scene = load("demo.json");
    scene.tracer.max_reflections = 1;
    scene.grid.step_m = 1.0;
    let fine_scene = {
        let mut s = scene.clone();
        s.grid.step_m = 0.5;
        s.grid.x_min += 0.25;
        s.grid.y_min += 0.25;
        s.grid.x_max -= 0.25;
        s.grid.y_max -= 0.25;
        s
    };
    for variant in [Variant::Baseline, Variant::WithRis] {
        let c = compute_map(&scene, variant).unwrap();
        let f = compute_map(&fine_scene, variant).unwrap();
        let mut matched = 0;
        for cell in &c.cells {
            let twin = f.cells.iter().find(|x| x.position == cell.position).expect("coincident fine cell");
            assert_eq!(twin, cell);
            matched += 1;
        }
        assert_eq!(matched, c.cells.len());
    }
}

#[test]
fn self_comparison_is_neutral() {
    let scene = coarse(load("demo.json"));
    let m = compute_map(&scene, Variant::WithRis).unwrap();
    assert!(improvement_map(&m, &m).unwrap().improvement_db.iter().all(|v| *v == 0.0));
    let c = classify(&m, &m, DEFAULT_EPSILON_DB).unwrap();
    assert!(c.cells.iter().all(|x| x.category == Category::NoChange));
    assert_eq!(classification_summary(&c).reduced_exposure_count, 0);
}

#[test]
fn grid_mismatch_is_rejected() {
    let scene = coarse(load("demo.json"));
    let a = compute_map(&scene, Variant::Baseline).unwrap();
    let mut shifted = scene.clone();
    shifted.grid.x_min += 0.5;
    shifted.grid.x_max += 0.5;
    let b = compute_map(&shifted, Variant::Baseline).unwrap();
    assert_eq!(classify(&a, &b, 0.01).unwrap_err().code(), "GRID_MISMATCH");
    assert_eq!(improvement_map(&a, &b).unwrap_err().code(), "GRID_MISMATCH");
}

#[test]
fn csv_round_trip_is_stable() {
    let scene = coarse(load("demo.json"));
    for variant in [Variant::Baseline, Variant::WithRis] {
        let m = compute_map(&scene, variant).unwrap();
        let text = map_csv_string(&m);
        assert!(text.starts_with(COVERAGE_HEADER));
        let back = parse_map_csv(&text).unwrap();
        assert_eq!((back.nx, back.ny, back.variant), (m.nx, m.ny, m.variant));
        assert_eq!(map_csv_string(&back), text);
    }
}

fn record(p_tx: Option<f64>, x: f64) -> CellRecord {
    CellRecord {
        position: [x, 0.5, 1.0],
        gain_db: -120.0,
        ue_ris_power_db: None,
        p_target_dbm: p_tx.unwrap_or(40.0),
        p_tx_dbm: p_tx,
        status: match p_tx {
            None => LinkStatus::OutOfCoverage,
            Some(p) if p <= 0.0 => LinkStatus::CoveredMinPower,
            Some(_) => LinkStatus::Covered,
        },
    }
}

fn power() -> impl Strategy<Value = Option<f64>> {
    prop::option::weighted(0.8, prop_oneof![Just(0.0), Just(23.0), 0.0f64..23.0])
}

proptest! {
    #[test]
    fn classification_partitions_cells(pairs in prop::collection::vec((power(), power()), 1..200), eps in 0.0f64..1.0) {
        let cells = |pick: fn(&(Option<f64>, Option<f64>)) -> Option<f64>| CoverageMap {
            variant: Variant::Baseline,
            nx: pairs.len(),
            ny: 1,
            cells: pairs.iter().enumerate().map(|(i, p)| record(pick(p), i as f64 + 0.5)).collect(),
        };
        let (base, var) = (cells(|p| p.0), cells(|p| p.1));
        let c = classify(&base, &var, eps).unwrap();
        let s = classification_summary(&c);
        prop_assert_eq!(s.cell_count, pairs.len());
        prop_assert_eq!(s.no_change_count + s.reduced_exposure_count + s.extended_coverage_count, s.cell_count);
        for ((cell, b), v) in c.cells.iter().zip(&base.cells).zip(&var.cells) {
            match cell.category {
                Category::ReducedExposure => {
                    let r = cell.reduction_db.unwrap();
                    prop_assert!(r > eps && r <= 23.0);
                }
                Category::ExtendedCoverage => {
                    prop_assert!(!b.status.is_covered() && v.status.is_covered());
                    prop_assert!(cell.reduction_db.is_none());
                }
                Category::NoChange => prop_assert!(cell.reduction_db.is_none()),
            }
        }
        let text = classification_csv_string(&c);
        prop_assert!(text.starts_with(CLASSIFICATION_HEADER));
        prop_assert_eq!(classification_csv_string(&parse_classification_csv(&text).unwrap()), text);
    }
}

#[test]
fn weight_mode_override_changes_result() {
    let scene = coarse(load("demo.json"));
    let run = |mode| {
        let opts = MapOptions {
            weight_mode: Some(mode),
            threads: None,
        };
        compute_map_with(&scene, Variant::WithRis, &opts, &|_| {}).unwrap()
    };
    let cascade = run(WeightMode::CascadeConjugate);
    assert_eq!(map_csv_string(&cascade), map_csv_string(&compute_map(&scene, Variant::WithRis).unwrap()));
    assert_ne!(map_csv_string(&run(WeightMode::Literal)), map_csv_string(&cascade));
}
