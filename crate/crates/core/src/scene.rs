//! World model: walls and materials, the BS array, the optional RIS panel,
//! the UE sampling grid, link budget and tracer settings.
//!
//! A [`Scene`] is plain data. It is parsed from JSON with every optional
//! field defaulted, then checked by [`validate_scene`]; once built it is never
//! mutated, so it can be shared freely across worker threads.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::geom::{vec3, PlanarPolygon, Vec3};
use crate::SPEED_OF_LIGHT;

/// Clearance used when checking that array positions stay off wall planes.
pub const WALL_CLEARANCE_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Power loss per specular bounce (dB).
    pub reflection_loss_db: f64,
    /// Power loss per wall crossing (dB).
    pub transmission_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wall {
    #[serde(deserialize_with = "polygon_vertices")]
    pub vertices: Vec<[f64; 3]>,
    pub material: Material,
}

fn polygon_vertices<'de, D>(deserializer: D) -> std::result::Result<Vec<[f64; 3]>, D::Error>
where
    D: Deserializer<'de>,
{
    let vertices = Vec::<[f64; 3]>::deserialize(deserializer)?;
    if vertices.len() < 3 {
        return Err(serde::de::Error::custom(format!(
            "a wall needs at least 3 vertices, got {}",
            vertices.len()
        )));
    }
    Ok(vertices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Isotropic,
    CosPow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaPattern {
    pub kind: PatternKind,
    /// Power exponent of the cosine lobe (`cos_pow` only).
    #[serde(default)]
    pub exponent: f64,
    #[serde(default)]
    pub peak_gain_dbi: f64,
    /// Gain behind the element plane, relative to the peak (dB, ≤ 0).
    #[serde(default = "default_backlobe_floor_db")]
    pub backlobe_floor_db: f64,
}

fn default_backlobe_floor_db() -> f64 {
    -30.0
}

impl Default for AntennaPattern {
    fn default() -> Self {
        Self::isotropic(0.0)
    }
}

impl AntennaPattern {
    pub fn isotropic(peak_gain_dbi: f64) -> Self {
        Self {
            kind: PatternKind::Isotropic,
            exponent: 0.0,
            peak_gain_dbi,
            backlobe_floor_db: default_backlobe_floor_db(),
        }
    }

    pub fn cos_pow(exponent: f64, peak_gain_dbi: f64, backlobe_floor_db: f64) -> Self {
        Self {
            kind: PatternKind::CosPow,
            exponent,
            peak_gain_dbi,
            backlobe_floor_db,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boresight {
    /// Counter-clockwise from +x in the horizontal plane.
    pub azimuth_deg: f64,
    /// Positive tilts the beam below the horizon.
    #[serde(default)]
    pub downtilt_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsArraySpec {
    pub reference_position: [f64; 3],
    pub boresight: Boresight,
    #[serde(default = "default_bs_rows")]
    pub rows: usize,
    #[serde(default = "default_bs_cols")]
    pub cols: usize,
    #[serde(default = "default_row_spacing")]
    pub row_spacing_wavelengths: f64,
    #[serde(default = "default_col_spacing")]
    pub col_spacing_wavelengths: f64,
    #[serde(default)]
    pub element_pattern: AntennaPattern,
}

fn default_bs_rows() -> usize {
    8
}
fn default_bs_cols() -> usize {
    4
}
fn default_row_spacing() -> f64 {
    0.5
}
fn default_col_spacing() -> f64 {
    0.8
}

impl BsArraySpec {
    pub fn element_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Unit boresight vector.
    pub fn boresight_vector(&self) -> Vec3 {
        let az = self.boresight.azimuth_deg.to_radians();
        let tilt = self.boresight.downtilt_deg.to_radians();
        Vec3::new(tilt.cos() * az.cos(), tilt.cos() * az.sin(), -tilt.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Conjugate the UE→RIS phase only.
    #[default]
    Literal,
    /// Also compensate the RIS→BS and direct-path phases at a reference antenna.
    CascadeConjugate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RisSpec {
    pub center_position: [f64; 3],
    pub normal: [f64; 3],
    pub up: [f64; 3],
    #[serde(default = "default_ris_side")]
    pub rows: usize,
    #[serde(default = "default_ris_side")]
    pub cols: usize,
    #[serde(default = "default_ris_spacing")]
    pub element_spacing_m: f64,
    #[serde(default)]
    pub element_pattern: AntennaPattern,
    #[serde(default)]
    pub weight_mode: WeightMode,
}

fn default_ris_side() -> usize {
    100
}
fn default_ris_spacing() -> f64 {
    0.20
}

impl RisSpec {
    pub fn element_count(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    #[serde(default = "default_noise_psd")]
    pub noise_psd_dbm_hz: f64,
    #[serde(default = "default_noise_figure")]
    pub noise_figure_db: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_rate")]
    pub rate_bps: f64,
    #[serde(default = "default_p_min")]
    pub p_min_dbm: f64,
    #[serde(default = "default_p_max")]
    pub p_max_dbm: f64,
}

fn default_noise_psd() -> f64 {
    -174.0
}
fn default_noise_figure() -> f64 {
    5.0
}
fn default_bandwidth() -> f64 {
    30_000.0
}
fn default_rate() -> f64 {
    30_000.0
}
fn default_p_min() -> f64 {
    0.0
}
fn default_p_max() -> f64 {
    23.0
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            noise_psd_dbm_hz: default_noise_psd(),
            noise_figure_db: default_noise_figure(),
            bandwidth_hz: default_bandwidth(),
            rate_bps: default_rate(),
            p_min_dbm: default_p_min(),
            p_max_dbm: default_p_max(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step_m: f64,
    #[serde(default = "default_grid_height")]
    pub height_m: f64,
}

fn default_grid_height() -> f64 {
    1.0
}

impl GridSpec {
    /// Cells along x; a partial trailing cell is dropped.
    pub fn nx(&self) -> usize {
        cell_count(self.x_max - self.x_min, self.step_m)
    }

    pub fn ny(&self) -> usize {
        cell_count(self.y_max - self.y_min, self.step_m)
    }

    pub fn cell_count(&self) -> usize {
        self.nx() * self.ny()
    }

    /// Center of the cell at (`ix`, `iy`).
    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 3] {
        [
            self.x_min + (ix as f64 + 0.5) * self.step_m,
            self.y_min + (iy as f64 + 0.5) * self.step_m,
            self.height_m,
        ]
    }

    /// Row-major (y outer, x inner) cell centers.
    pub fn centers(&self) -> Vec<[f64; 3]> {
        let (nx, ny) = (self.nx(), self.ny());
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                out.push(self.cell_center(ix, iy));
            }
        }
        out
    }
}

fn cell_count(extent: f64, step: f64) -> usize {
    if !(extent > 0.0) || !(step > 0.0) || !extent.is_finite() || !step.is_finite() {
        return 0;
    }
    // Tolerate extents that are a whole number of steps up to rounding.
    (extent / step + 1e-9).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisChannelMode {
    /// Trace every unit cell individually.
    PerElement,
    /// Trace the panel center once and apply far-field phase offsets.
    #[default]
    PlaneWave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracerSettings {
    #[serde(default = "default_max_reflections")]
    pub max_reflections: usize,
    #[serde(default)]
    pub ris_mode: RisChannelMode,
}

fn default_max_reflections() -> usize {
    3
}

impl Default for TracerSettings {
    fn default() -> Self {
        Self {
            max_reflections: default_max_reflections(),
            ris_mode: RisChannelMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default)]
    pub walls: Vec<Wall>,
    pub bs: BsArraySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ris: Option<RisSpec>,
    pub grid: GridSpec,
    #[serde(rename = "link_budget", default)]
    pub budget: LinkBudget,
    #[serde(rename = "raytracer", default)]
    pub tracer: TracerSettings,
}

fn default_frequency() -> f64 {
    3.7e9
}

impl Scene {
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }
}

/// Parses a scene document, fills defaults and rejects invariant violations.
pub fn parse_scene(document: &str) -> Result<Scene> {
    let scene = parse_scene_unchecked(document)?;
    let errors: Vec<Issue> = validate_scene(&scene)
        .into_iter()
        .filter(|i| i.severity == Severity::Error)
        .collect();
    if errors.is_empty() {
        Ok(scene)
    } else {
        Err(Error::Invariant(errors))
    }
}

/// Syntax and schema checks only.
pub fn parse_scene_unchecked(document: &str) -> Result<Scene> {
    let value: serde_json::Value = serde_json::from_str(document).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    serde_path_to_error::deserialize(value).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Pretty JSON with every default written out.
pub fn serialize_scene(scene: &Scene) -> String {
    serde_json::to_string_pretty(scene).expect("scene is always serializable")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    FrequencyInvalid,
    MaterialInvalid,
    WallDegenerate,
    WallNotPlanar,
    WallSelfIntersecting,
    PatternInvalid,
    BsArrayEmpty,
    BsSpacing,
    BsInWall,
    RisArrayEmpty,
    RisSpacing,
    RisFrame,
    RisInWall,
    BudgetRange,
    BudgetBandwidth,
    BudgetRate,
    BudgetNonFinite,
    GridBounds,
    GridStep,
    GridEmpty,
    GridLarge,
    TracerOrderHigh,
}

impl IssueCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            IssueCode::FrequencyInvalid => "FREQUENCY_INVALID",
            IssueCode::MaterialInvalid => "MATERIAL_INVALID",
            IssueCode::WallDegenerate => "WALL_DEGENERATE",
            IssueCode::WallNotPlanar => "WALL_NOT_PLANAR",
            IssueCode::WallSelfIntersecting => "WALL_SELF_INTERSECTING",
            IssueCode::PatternInvalid => "PATTERN_INVALID",
            IssueCode::BsArrayEmpty => "BS_ARRAY_EMPTY",
            IssueCode::BsSpacing => "BS_SPACING",
            IssueCode::BsInWall => "BS_IN_WALL",
            IssueCode::RisArrayEmpty => "RIS_ARRAY_EMPTY",
            IssueCode::RisSpacing => "RIS_SPACING",
            IssueCode::RisFrame => "RIS_FRAME",
            IssueCode::RisInWall => "RIS_IN_WALL",
            IssueCode::BudgetRange => "BUDGET_RANGE",
            IssueCode::BudgetBandwidth => "BUDGET_BANDWIDTH",
            IssueCode::BudgetRate => "BUDGET_RATE",
            IssueCode::BudgetNonFinite => "BUDGET_NON_FINITE",
            IssueCode::GridBounds => "GRID_BOUNDS",
            IssueCode::GridStep => "GRID_STEP",
            IssueCode::GridEmpty => "GRID_EMPTY",
            IssueCode::GridLarge => "GRID_LARGE",
            IssueCode::TracerOrderHigh => "TRACER_ORDER_HIGH",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub code: IssueCode,
    pub message: String,
}

impl Issue {
    fn error(code: IssueCode, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            code,
            message: message.into(),
        }
    }

    fn warning(code: IssueCode, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            code,
            message: message.into(),
        }
    }
}

const GRID_LARGE_CELLS: usize = 250_000;
const TRACER_ORDER_HIGH: usize = 4;

/// Collects every invariant violation; an empty list means the scene is valid.
pub fn validate_scene(scene: &Scene) -> Vec<Issue> {
    let mut issues = Vec::new();

    if !(scene.frequency_hz > 0.0 && scene.frequency_hz.is_finite()) {
        issues.push(Issue::error(
            IssueCode::FrequencyInvalid,
            format!("frequency_hz must be positive and finite, got {}", scene.frequency_hz),
        ));
    }

    let mut polygons = Vec::with_capacity(scene.walls.len());
    for (i, wall) in scene.walls.iter().enumerate() {
        let m = &wall.material;
        if !(m.reflection_loss_db >= 0.0
            && m.transmission_loss_db >= 0.0
            && m.reflection_loss_db.is_finite()
            && m.transmission_loss_db.is_finite())
        {
            issues.push(Issue::error(
                IssueCode::MaterialInvalid,
                format!("walls[{i}]: losses must be finite and non-negative"),
            ));
        }
        if wall.vertices.iter().flatten().any(|c| !c.is_finite()) {
            issues.push(Issue::error(
                IssueCode::WallDegenerate,
                format!("walls[{i}]: non-finite vertex coordinate"),
            ));
            continue;
        }
        match PlanarPolygon::new(&wall.vertices) {
            None => issues.push(Issue::error(
                IssueCode::WallDegenerate,
                format!("walls[{i}]: polygon has zero area"),
            )),
            Some(poly) => {
                let err = poly.planarity_error();
                if err > WALL_CLEARANCE_M {
                    issues.push(Issue::error(
                        IssueCode::WallNotPlanar,
                        format!("walls[{i}]: vertex deviates {err:.3e} m from the wall plane"),
                    ));
                } else if !poly.is_simple() {
                    issues.push(Issue::error(
                        IssueCode::WallSelfIntersecting,
                        format!("walls[{i}]: polygon edges intersect"),
                    ));
                }
                polygons.push((i, poly));
            }
        }
    }

    let bs = &scene.bs;
    check_pattern(&mut issues, "bs.element_pattern", &bs.element_pattern);
    if bs.element_count() == 0 {
        issues.push(Issue::error(IssueCode::BsArrayEmpty, "bs: rows and cols must be positive"));
    }
    if !(bs.row_spacing_wavelengths > 0.0 && bs.col_spacing_wavelengths > 0.0)
        || !bs.row_spacing_wavelengths.is_finite()
        || !bs.col_spacing_wavelengths.is_finite()
    {
        issues.push(Issue::error(IssueCode::BsSpacing, "bs: element spacings must be positive"));
    }
    if let Some(i) = wall_containing(&polygons, &vec3(bs.reference_position)) {
        issues.push(Issue::error(
            IssueCode::BsInWall,
            format!("bs.reference_position lies on walls[{i}]"),
        ));
    }

    if let Some(ris) = &scene.ris {
        check_pattern(&mut issues, "ris.element_pattern", &ris.element_pattern);
        if ris.element_count() == 0 {
            issues.push(Issue::error(IssueCode::RisArrayEmpty, "ris: rows and cols must be positive"));
        }
        if !(ris.element_spacing_m > 0.0 && ris.element_spacing_m.is_finite()) {
            issues.push(Issue::error(IssueCode::RisSpacing, "ris: element_spacing_m must be positive"));
        }
        let n = vec3(ris.normal);
        let up = vec3(ris.up);
        let unit = (n.norm() - 1.0).abs() < 1e-9 && (up.norm() - 1.0).abs() < 1e-9;
        if !unit || n.dot(&up).abs() > 1e-9 {
            issues.push(Issue::error(
                IssueCode::RisFrame,
                "ris: normal and up must be orthogonal unit vectors",
            ));
        }
        if let Some(i) = wall_containing(&polygons, &vec3(ris.center_position)) {
            issues.push(Issue::error(
                IssueCode::RisInWall,
                format!("ris.center_position lies on walls[{i}]"),
            ));
        }
    }

    let b = &scene.budget;
    let all_finite = [
        b.noise_psd_dbm_hz,
        b.noise_figure_db,
        b.bandwidth_hz,
        b.rate_bps,
        b.p_min_dbm,
        b.p_max_dbm,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !all_finite {
        issues.push(Issue::error(IssueCode::BudgetNonFinite, "link_budget: all values must be finite"));
    }
    if b.p_min_dbm > b.p_max_dbm {
        issues.push(Issue::error(
            IssueCode::BudgetRange,
            format!("link_budget: p_min_dbm {} exceeds p_max_dbm {}", b.p_min_dbm, b.p_max_dbm),
        ));
    }
    if !(b.bandwidth_hz > 0.0) {
        issues.push(Issue::error(IssueCode::BudgetBandwidth, "link_budget: bandwidth_hz must be positive"));
    }
    if !(b.rate_bps >= 0.0) {
        issues.push(Issue::error(IssueCode::BudgetRate, "link_budget: rate_bps must be non-negative"));
    }

    let g = &scene.grid;
    let bounds = [g.x_min, g.x_max, g.y_min, g.y_max, g.height_m];
    if !bounds.iter().all(|v| v.is_finite()) || !(g.x_min < g.x_max && g.y_min < g.y_max) {
        issues.push(Issue::error(IssueCode::GridBounds, "grid: require x_min < x_max and y_min < y_max"));
    } else if !(g.step_m > 0.0 && g.step_m.is_finite()) {
        issues.push(Issue::error(IssueCode::GridStep, "grid: step_m must be positive"));
    } else if g.cell_count() == 0 {
        issues.push(Issue::error(IssueCode::GridEmpty, "grid: step_m exceeds the grid extent"));
    } else if g.cell_count() > GRID_LARGE_CELLS {
        issues.push(Issue::warning(
            IssueCode::GridLarge,
            format!("grid: {} cells; expect long map runs", g.cell_count()),
        ));
    }

    if scene.tracer.max_reflections > TRACER_ORDER_HIGH {
        issues.push(Issue::warning(
            IssueCode::TracerOrderHigh,
            format!(
                "raytracer: max_reflections {} grows the path search exponentially",
                scene.tracer.max_reflections
            ),
        ));
    }

    issues
}

fn check_pattern(issues: &mut Vec<Issue>, field: &str, p: &AntennaPattern) {
    let ok = p.peak_gain_dbi.is_finite()
        && p.exponent.is_finite()
        && p.exponent >= 0.0
        && p.backlobe_floor_db.is_finite()
        && p.backlobe_floor_db <= 0.0;
    if !ok {
        issues.push(Issue::error(
            IssueCode::PatternInvalid,
            format!("{field}: need finite peak, exponent >= 0 and backlobe_floor_db <= 0"),
        ));
    }
}

fn wall_containing(polygons: &[(usize, PlanarPolygon)], p: &Vec3) -> Option<usize> {
    polygons.iter().find_map(|(i, poly)| {
        let on_plane = poly.signed_distance(p).abs() <= WALL_CLEARANCE_M;
        (on_plane && poly.contains_closed(poly.project(p), WALL_CLEARANCE_M)).then_some(*i)
    })
}

/// One array element: position and boresight direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayElement {
    pub position: Vec3,
    pub boresight: Vec3,
}

/// BS lattice, column-major: column 0 is the leftmost seen from behind the
/// array looking along boresight, rows run bottom to top within a column.
pub fn bs_element_positions(spec: &BsArraySpec, wavelength_m: f64) -> Vec<ArrayElement> {
    let boresight = spec.boresight_vector();
    let az = spec.boresight.azimuth_deg.to_radians();
    let horizontal = Vec3::new(-az.sin(), az.cos(), 0.0);
    let vertical = boresight.cross(&horizontal);
    let right = boresight.cross(&vertical);

    let center = vec3(spec.reference_position);
    let dv = spec.row_spacing_wavelengths * wavelength_m;
    let dh = spec.col_spacing_wavelengths * wavelength_m;
    let row_mid = (spec.rows as f64 - 1.0) / 2.0;
    let col_mid = (spec.cols as f64 - 1.0) / 2.0;

    let mut out = Vec::with_capacity(spec.element_count());
    for col in 0..spec.cols {
        for row in 0..spec.rows {
            let position = center
                + right * ((col as f64 - col_mid) * dh)
                + vertical * ((row as f64 - row_mid) * dv);
            out.push(ArrayElement {
                position,
                boresight,
            });
        }
    }
    out
}

/// RIS lattice, row-major: rows step along `up` (bottom first), columns
/// along `normal × up`.
pub fn ris_element_positions(spec: &RisSpec) -> Vec<Vec3> {
    let normal = vec3(spec.normal);
    let up = vec3(spec.up);
    let across = normal.cross(&up);
    let center = vec3(spec.center_position);
    let s = spec.element_spacing_m;
    let row_mid = (spec.rows as f64 - 1.0) / 2.0;
    let col_mid = (spec.cols as f64 - 1.0) / 2.0;

    let mut out = Vec::with_capacity(spec.element_count());
    for row in 0..spec.rows {
        for col in 0..spec.cols {
            out.push(center + up * ((row as f64 - row_mid) * s) + across * ((col as f64 - col_mid) * s));
        }
    }
    out
}
