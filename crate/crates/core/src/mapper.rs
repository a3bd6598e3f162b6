//! Grid sweeps over UE positions and the maps derived from them.
//!
//! A coverage map evaluates every cell center independently, so the sweep is
//! data-parallel and the result does not depend on worker count: each cell is
//! written to its own slot in a pre-sized, row-major buffer (y outer, x inner).

use std::fmt::Write as _;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_power, ChannelModel};
use crate::error::{Error, Result};
use crate::geom::vec3;
use crate::link::{evaluate_link, LinkStatus};
use crate::ris::{equivalent_channel, ris_weights_cascade, ris_weights_literal, strongest_cascade_antenna};
use crate::scene::{Scene, WeightMode};
use crate::to_db;

/// Default tie-break for calling a power drop a reduction (dB).
pub const DEFAULT_EPSILON_DB: f64 = 0.01;

/// Cell positions from different maps must agree to this (m); CSV files
/// carry 6 decimals.
const POSITION_TOLERANCE_M: f64 = 1e-6;

pub const COVERAGE_HEADER: &str = "x_m,y_m,z_m,gain_db,ue_ris_power_db,p_target_dbm,p_tx_dbm,status";
pub const CLASSIFICATION_HEADER: &str = "x_m,y_m,z_m,category,reduction_db";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    WithRis,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::WithRis => "with_ris",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRecord {
    pub position: [f64; 3],
    pub gain_db: f64,
    /// `wᴴw` in dB, with-RIS maps only.
    pub ue_ris_power_db: Option<f64>,
    pub p_target_dbm: f64,
    pub p_tx_dbm: Option<f64>,
    pub status: LinkStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    pub variant: Variant,
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MapOptions {
    /// Overrides the scene's RIS weight mode.
    pub weight_mode: Option<WeightMode>,
    /// Worker count; `None` uses the global pool.
    pub threads: Option<usize>,
}

pub fn compute_map(scene: &Scene, variant: Variant) -> Result<CoverageMap> {
    compute_map_with(scene, variant, &MapOptions::default(), &|_| {})
}

/// Sweeps the grid; `progress` receives the number of finished cells and may
/// be called from several workers concurrently.
pub fn compute_map_with(
    scene: &Scene,
    variant: Variant,
    options: &MapOptions,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<CoverageMap> {
    if variant == Variant::WithRis && scene.ris.is_none() {
        return Err(Error::RisAbsent);
    }
    let model = ChannelModel::new(scene);
    let weight_mode = options
        .weight_mode
        .or(scene.ris.as_ref().map(|r| r.weight_mode))
        .unwrap_or_default();
    if variant == Variant::WithRis {
        // Fill the q cache before fanning out.
        model.q()?;
    }

    let centers = scene.grid.centers();
    let done = AtomicUsize::new(0);
    let sweep = || {
        centers
            .par_iter()
            .map(|p| {
                let cell = evaluate_cell(&model, variant, weight_mode, *p);
                progress(done.fetch_add(1, Ordering::Relaxed) + 1);
                cell
            })
            .collect::<Result<Vec<_>>>()
    };
    let cells = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?
            .install(sweep)?,
        None => sweep()?,
    };

    Ok(CoverageMap {
        variant,
        nx: scene.grid.nx(),
        ny: scene.grid.ny(),
        cells,
    })
}

fn evaluate_cell(model: &ChannelModel, variant: Variant, mode: WeightMode, position: [f64; 3]) -> Result<CellRecord> {
    let ue = vec3(position);
    let h = model.compute_h(ue)?;
    let (g, ue_ris_power_db) = match variant {
        Variant::Baseline => (h, None),
        Variant::WithRis => {
            let w = model.compute_w(ue)?;
            let q = model.q()?;
            let weights = match mode {
                WeightMode::Literal => ris_weights_literal(&w),
                WeightMode::CascadeConjugate => {
                    ris_weights_cascade(&w, q, &h, strongest_cascade_antenna(&w, q))?
                }
            };
            let g = equivalent_channel(&h, &w, q, Some(&weights))?;
            (g, Some(to_db(channel_power(&w))))
        }
    };
    let link = evaluate_link(&g, &model.scene().budget);
    Ok(CellRecord {
        position,
        gain_db: to_db(link.gain_linear),
        ue_ris_power_db,
        p_target_dbm: link.p_target_dbm,
        p_tx_dbm: link.p_tx_dbm,
        status: link.status,
    })
}

fn check_same_grid(a: &[[f64; 3]], b: &[[f64; 3]], dims_a: (usize, usize), dims_b: (usize, usize)) -> Result<()> {
    if dims_a != dims_b {
        return Err(Error::GridMismatch(format!(
            "{}x{} cells vs {}x{} cells",
            dims_a.0, dims_a.1, dims_b.0, dims_b.1
        )));
    }
    for (i, (p, q)) in a.iter().zip(b).enumerate() {
        if p.iter().zip(q).any(|(x, y)| (x - y).abs() > POSITION_TOLERANCE_M) {
            return Err(Error::GridMismatch(format!(
                "cell {i} at {p:?} vs {q:?}"
            )));
        }
    }
    Ok(())
}

impl CoverageMap {
    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.cells.iter().map(|c| c.position).collect()
    }

    fn ensure_same_grid(&self, other: &CoverageMap) -> Result<()> {
        check_same_grid(&self.positions(), &other.positions(), (self.nx, self.ny), (other.nx, other.ny))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementMap {
    pub nx: usize,
    pub ny: usize,
    pub positions: Vec<[f64; 3]>,
    /// `variant.gain_db - baseline.gain_db`, may be negative.
    pub improvement_db: Vec<f64>,
}

pub fn improvement_map(baseline: &CoverageMap, variant: &CoverageMap) -> Result<ImprovementMap> {
    baseline.ensure_same_grid(variant)?;
    Ok(ImprovementMap {
        nx: baseline.nx,
        ny: baseline.ny,
        positions: baseline.positions(),
        improvement_db: baseline
            .cells
            .iter()
            .zip(&variant.cells)
            .map(|(b, v)| v.gain_db - b.gain_db)
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    NoChange,
    ReducedExposure,
    ExtendedCoverage,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::NoChange => "NO_CHANGE",
            Category::ReducedExposure => "REDUCED_EXPOSURE",
            Category::ExtendedCoverage => "EXTENDED_COVERAGE",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "NO_CHANGE" => Some(Category::NoChange),
            "REDUCED_EXPOSURE" => Some(Category::ReducedExposure),
            "EXTENDED_COVERAGE" => Some(Category::ExtendedCoverage),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassCell {
    pub position: [f64; 3],
    pub category: Category,
    /// Transmit power drop (dB), reduced-exposure cells only.
    pub reduction_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationMap {
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<ClassCell>,
}

/// Three-way comparison of a RIS variant against the baseline. Cells where
/// the variant needs more power, or both are out of coverage, are `NO_CHANGE`.
pub fn classify(baseline: &CoverageMap, variant: &CoverageMap, epsilon_db: f64) -> Result<ClassificationMap> {
    baseline.ensure_same_grid(variant)?;
    let cells = baseline
        .cells
        .iter()
        .zip(&variant.cells)
        .map(|(b, v)| {
            let (category, reduction_db) = match (b.p_tx_dbm, v.p_tx_dbm) {
                (None, Some(_)) => (Category::ExtendedCoverage, None),
                (Some(pb), Some(pv)) if pb - pv > epsilon_db => (Category::ReducedExposure, Some(pb - pv)),
                _ => (Category::NoChange, None),
            };
            ClassCell {
                position: b.position,
                category,
                reduction_db,
            }
        })
        .collect();
    Ok(ClassificationMap {
        nx: baseline.nx,
        ny: baseline.ny,
        cells,
    })
}

fn fixed6(out: &mut String, v: f64) {
    let start = out.len();
    write!(out, "{v:.6}").expect("write to String");
    if &out[start..] == "-0.000000" {
        out.replace_range(start.., "0.000000");
    }
}

fn push_opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v.filter(|v| v.is_finite()) {
        fixed6(out, v);
    }
}

fn push_position(out: &mut String, p: &[f64; 3]) {
    for c in p {
        fixed6(out, *c);
        out.push(',');
    }
}

pub fn map_csv_string(map: &CoverageMap) -> String {
    let mut out = String::with_capacity(64 * (map.cells.len() + 1));
    out.push_str(COVERAGE_HEADER);
    out.push('\n');
    for c in &map.cells {
        push_position(&mut out, &c.position);
        fixed6(&mut out, c.gain_db);
        out.push(',');
        push_opt(&mut out, c.ue_ris_power_db);
        out.push(',');
        push_opt(&mut out, Some(c.p_target_dbm));
        out.push(',');
        push_opt(&mut out, c.p_tx_dbm);
        out.push(',');
        out.push_str(c.status.as_str());
        out.push('\n');
    }
    out
}

pub fn export_map_csv(map: &CoverageMap, mut out: impl Write) -> Result<()> {
    out.write_all(map_csv_string(map).as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn classification_csv_string(map: &ClassificationMap) -> String {
    let mut out = String::with_capacity(48 * (map.cells.len() + 1));
    out.push_str(CLASSIFICATION_HEADER);
    out.push('\n');
    for c in &map.cells {
        push_position(&mut out, &c.position);
        out.push_str(c.category.as_str());
        out.push(',');
        push_opt(&mut out, c.reduction_db);
        out.push('\n');
    }
    out
}

pub fn export_classification_csv(map: &ClassificationMap, mut out: impl Write) -> Result<()> {
    out.write_all(classification_csv_string(map).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn csv_records(text: &str, header: &str) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| Error::MapFormat(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(Error::MapFormat(format!("unexpected header `{found}`")));
    }
    reader
        .records()
        .map(|r| r.map_err(|e| Error::MapFormat(e.to_string())))
        .collect()
}

fn field_f64(rec: &csv::StringRecord, i: usize, row: usize) -> Result<f64> {
    rec[i]
        .parse()
        .map_err(|_| Error::MapFormat(format!("row {row}: bad number `{}`", &rec[i])))
}

fn field_opt(rec: &csv::StringRecord, i: usize, row: usize) -> Result<Option<f64>> {
    if rec[i].is_empty() {
        Ok(None)
    } else {
        field_f64(rec, i, row).map(Some)
    }
}

fn field_position(rec: &csv::StringRecord, row: usize) -> Result<[f64; 3]> {
    Ok([field_f64(rec, 0, row)?, field_f64(rec, 1, row)?, field_f64(rec, 2, row)?])
}

/// Recovers (nx, ny) from row-major cell positions.
fn infer_dims(positions: &[[f64; 3]]) -> Result<(usize, usize)> {
    let Some(first) = positions.first() else {
        return Err(Error::MapFormat("no cells".into()));
    };
    let nx = positions
        .iter()
        .take_while(|p| (p[1] - first[1]).abs() <= POSITION_TOLERANCE_M)
        .count();
    if positions.len() % nx != 0 {
        return Err(Error::MapFormat(format!(
            "{} cells do not form rows of {nx}",
            positions.len()
        )));
    }
    let ny = positions.len() / nx;
    for (i, p) in positions.iter().enumerate() {
        let (row_start, col_ref) = (&positions[(i / nx) * nx], &positions[i % nx]);
        if (p[1] - row_start[1]).abs() > POSITION_TOLERANCE_M || (p[0] - col_ref[0]).abs() > POSITION_TOLERANCE_M {
            return Err(Error::MapFormat(format!("cell {i} breaks the row-major grid")));
        }
    }
    Ok((nx, ny))
}

pub fn parse_map_csv(text: &str) -> Result<CoverageMap> {
    let records = csv_records(text, COVERAGE_HEADER)?;
    let mut cells = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate() {
        let row = row + 2;
        let status = LinkStatus::parse(&rec[7])
            .ok_or_else(|| Error::MapFormat(format!("row {row}: unknown status `{}`", &rec[7])))?;
        let p_target_dbm = field_opt(rec, 5, row)?.unwrap_or(if status.is_covered() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        });
        let p_tx_dbm = field_opt(rec, 6, row)?;
        if p_tx_dbm.is_some() != status.is_covered() {
            return Err(Error::MapFormat(format!("row {row}: p_tx_dbm inconsistent with status")));
        }
        cells.push(CellRecord {
            position: field_position(rec, row)?,
            gain_db: field_f64(rec, 3, row)?,
            ue_ris_power_db: field_opt(rec, 4, row)?,
            p_target_dbm,
            p_tx_dbm,
            status,
        });
    }
    let variant = if cells.iter().any(|c| c.ue_ris_power_db.is_some()) {
        Variant::WithRis
    } else {
        Variant::Baseline
    };
    let (nx, ny) = infer_dims(&cells.iter().map(|c| c.position).collect::<Vec<_>>())?;
    Ok(CoverageMap { variant, nx, ny, cells })
}

pub fn parse_classification_csv(text: &str) -> Result<ClassificationMap> {
    let records = csv_records(text, CLASSIFICATION_HEADER)?;
    let mut cells = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate() {
        let row = row + 2;
        let category = Category::parse(&rec[3])
            .ok_or_else(|| Error::MapFormat(format!("row {row}: unknown category `{}`", &rec[3])))?;
        cells.push(ClassCell {
            position: field_position(rec, row)?,
            category,
            reduction_db: field_opt(rec, 4, row)?,
        });
    }
    let (nx, ny) = infer_dims(&cells.iter().map(|c| c.position).collect::<Vec<_>>())?;
    Ok(ClassificationMap { nx, ny, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Stats {
    fn over(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            n += 1;
        }
        (n > 0).then(|| Stats {
            min,
            max,
            mean: sum / n as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub variant: Variant,
    pub cell_count: usize,
    pub covered_count: usize,
    pub covered_min_power_count: usize,
    pub out_of_coverage_count: usize,
    /// Over covered cells.
    pub gain_db: Option<Stats>,
    pub p_tx_dbm: Option<Stats>,
}

pub fn map_summary(map: &CoverageMap) -> MapSummary {
    let count = |s: LinkStatus| map.cells.iter().filter(|c| c.status == s).count();
    let covered = || map.cells.iter().filter(|c| c.status.is_covered());
    MapSummary {
        variant: map.variant,
        cell_count: map.cells.len(),
        covered_count: count(LinkStatus::Covered),
        covered_min_power_count: count(LinkStatus::CoveredMinPower),
        out_of_coverage_count: count(LinkStatus::OutOfCoverage),
        gain_db: Stats::over(covered().map(|c| c.gain_db)),
        p_tx_dbm: Stats::over(covered().filter_map(|c| c.p_tx_dbm)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub cell_count: usize,
    pub no_change_count: usize,
    pub reduced_exposure_count: usize,
    pub extended_coverage_count: usize,
    pub max_reduction_db: Option<f64>,
}

pub fn classification_summary(map: &ClassificationMap) -> ClassificationSummary {
    let count = |c: Category| map.cells.iter().filter(|x| x.category == c).count();
    ClassificationSummary {
        cell_count: map.cells.len(),
        no_change_count: count(Category::NoChange),
        reduced_exposure_count: count(Category::ReducedExposure),
        extended_coverage_count: count(Category::ExtendedCoverage),
        max_reduction_db: map.cells.iter().filter_map(|c| c.reduction_db).reduce(f64::max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapColumn {
    GainDb,
    UeRisPowerDb,
    PTargetDbm,
    PTxDbm,
}

impl std::str::FromStr for MapColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gain_db" => Ok(MapColumn::GainDb),
            "ue_ris_power_db" => Ok(MapColumn::UeRisPowerDb),
            "p_target_dbm" => Ok(MapColumn::PTargetDbm),
            "p_tx_dbm" => Ok(MapColumn::PTxDbm),
            other => Err(Error::MapFormat(format!("no image column `{other}`"))),
        }
    }
}

/// Plain-text graymap of one column: min/max normalized to 1..=255, with 0
/// for absent or non-finite values; north (largest y) is the top row.
pub fn export_pgm(map: &CoverageMap, column: MapColumn) -> String {
    let value = |c: &CellRecord| -> Option<f64> {
        match column {
            MapColumn::GainDb => Some(c.gain_db),
            MapColumn::UeRisPowerDb => c.ue_ris_power_db,
            MapColumn::PTargetDbm => Some(c.p_target_dbm),
            MapColumn::PTxDbm => c.p_tx_dbm,
        }
        .filter(|v| v.is_finite())
    };
    let values: Vec<Option<f64>> = map.cells.iter().map(value).collect();
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let span = hi - lo;

    let mut out = format!("P2\n{} {}\n255\n", map.nx, map.ny);
    for iy in (0..map.ny).rev() {
        let row: Vec<String> = (0..map.nx)
            .map(|ix| match values[iy * map.nx + ix] {
                None => 0,
                Some(_) if !(span > 0.0) => 255,
                Some(v) => 1 + ((v - lo) / span * 254.0).round() as u32,
            })
            .map(|g| g.to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
