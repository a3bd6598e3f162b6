//! Channel assembly: `h` (UE→BS, N), `w` (UE→RIS, K) and `q` (RIS→BS, K×N).
//!
//! Entries are sums of traced path amplitudes. RIS-side channels either trace
//! every unit cell ([`RisChannelMode::PerElement`]) or trace the panel center
//! once and shift each path's phase by the element's excess length along the
//! path direction ([`RisChannelMode::PlaneWave`]).

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geom::{vec3, Vec3};
use crate::raytrace::{path_amplitude, OrientedPattern, Path, Tracer};
use crate::scene::{bs_element_positions, ris_element_positions, ArrayElement, RisChannelMode, Scene};
use crate::to_db;

pub type ChannelMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<Complex64>,
    pub w: Vec<Complex64>,
    /// K×N, row k = unit cell, column n = BS element.
    pub q: ChannelMatrix,
    pub ue_position: Vec3,
}

struct RisGeometry {
    center: Vec3,
    elements: Vec<Vec3>,
    pattern: OrientedPattern,
}

/// Per-scene channel context: prepared walls, element lattices and the
/// lazily computed, UE-independent `q`.
pub struct ChannelModel<'s> {
    scene: &'s Scene,
    tracer: Tracer,
    wavelength: f64,
    bs_elements: Vec<ArrayElement>,
    bs_center: Vec3,
    bs_pattern: OrientedPattern,
    ris: Option<RisGeometry>,
    q: OnceLock<ChannelMatrix>,
}

impl<'s> ChannelModel<'s> {
    pub fn new(scene: &'s Scene) -> Self {
        let wavelength = scene.wavelength_m();
        let bs_elements = bs_element_positions(&scene.bs, wavelength);
        let bs_pattern = OrientedPattern::new(scene.bs.element_pattern, scene.bs.boresight_vector());
        let ris = scene.ris.as_ref().map(|spec| RisGeometry {
            center: vec3(spec.center_position),
            elements: ris_element_positions(spec),
            pattern: OrientedPattern::new(spec.element_pattern, vec3(spec.normal)),
        });
        Self {
            scene,
            tracer: Tracer::new(&scene.walls),
            wavelength,
            bs_elements,
            bs_center: vec3(scene.bs.reference_position),
            bs_pattern,
            ris,
            q: OnceLock::new(),
        }
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    pub fn bs_elements(&self) -> &[ArrayElement] {
        &self.bs_elements
    }

    pub fn ris_elements(&self) -> Option<&[Vec3]> {
        self.ris.as_ref().map(|r| r.elements.as_slice())
    }

    fn order(&self) -> usize {
        self.scene.tracer.max_reflections
    }

    fn amplitude(&self, path: &Path, tx: &OrientedPattern, rx: &OrientedPattern) -> Complex64 {
        path_amplitude(path, self.scene.frequency_hz, tx, rx)
    }

    /// UE→BS channel without the RIS, one exact trace per BS element.
    pub fn compute_h(&self, ue: Vec3) -> Result<Vec<Complex64>> {
        let receivers: Vec<Vec3> = self.bs_elements.iter().map(|e| e.position).collect();
        let traces = self.tracer.trace_many(ue, &receivers, self.order())?;
        let ue_pattern = OrientedPattern::isotropic();
        Ok(traces
            .iter()
            .map(|t| t.paths.iter().map(|p| self.amplitude(p, &ue_pattern, &self.bs_pattern)).sum())
            .collect())
    }

    /// UE→RIS channel.
    pub fn compute_w(&self, ue: Vec3) -> Result<Vec<Complex64>> {
        let ris = self.ris.as_ref().ok_or(Error::RisAbsent)?;
        let ue_pattern = OrientedPattern::isotropic();
        match self.scene.tracer.ris_mode {
            RisChannelMode::PerElement => {
                let traces = self.tracer.trace_many(ue, &ris.elements, self.order())?;
                Ok(traces
                    .iter()
                    .map(|t| t.paths.iter().map(|p| self.amplitude(p, &ue_pattern, &ris.pattern)).sum())
                    .collect())
            }
            RisChannelMode::PlaneWave => {
                let trace = self.tracer.trace(ue, ris.center, self.order())?;
                let mut w = vec![Complex64::new(0.0, 0.0); ris.elements.len()];
                for path in &trace.paths {
                    let a = self.amplitude(path, &ue_pattern, &ris.pattern);
                    for (wk, el) in w.iter_mut().zip(&ris.elements) {
                        let excess = path.arrival.dot(&(el - ris.center));
                        *wk += a * self.phase_shift(excess);
                    }
                }
                Ok(w)
            }
        }
    }

    /// RIS→BS channel, computed once per model.
    pub fn q(&self) -> Result<&ChannelMatrix> {
        if let Some(q) = self.q.get() {
            return Ok(q);
        }
        let q = self.compute_q()?;
        Ok(self.q.get_or_init(|| q))
    }

    fn compute_q(&self) -> Result<ChannelMatrix> {
        let ris = self.ris.as_ref().ok_or(Error::RisAbsent)?;
        let (k_count, n_count) = (ris.elements.len(), self.bs_elements.len());
        let mut q = ChannelMatrix::zeros(k_count, n_count);
        match self.scene.tracer.ris_mode {
            RisChannelMode::PerElement => {
                let receivers: Vec<Vec3> = self.bs_elements.iter().map(|e| e.position).collect();
                for (k, el) in ris.elements.iter().enumerate() {
                    let traces = self.tracer.trace_many(*el, &receivers, self.order())?;
                    for (n, t) in traces.iter().enumerate() {
                        q[(k, n)] = t
                            .paths
                            .iter()
                            .map(|p| self.amplitude(p, &ris.pattern, &self.bs_pattern))
                            .sum();
                    }
                }
            }
            RisChannelMode::PlaneWave => {
                let trace = self.tracer.trace(ris.center, self.bs_center, self.order())?;
                for path in &trace.paths {
                    let a = self.amplitude(path, &ris.pattern, &self.bs_pattern);
                    let departure: Vec<Complex64> = ris
                        .elements
                        .iter()
                        .map(|el| self.phase_shift(-path.departure.dot(&(el - ris.center))))
                        .collect();
                    let arrival: Vec<Complex64> = self
                        .bs_elements
                        .iter()
                        .map(|e| self.phase_shift(path.arrival.dot(&(e.position - self.bs_center))))
                        .collect();
                    for (k, dk) in departure.iter().enumerate() {
                        let ak = a * dk;
                        for (n, an) in arrival.iter().enumerate() {
                            q[(k, n)] += ak * an;
                        }
                    }
                }
            }
        }
        Ok(q)
    }

    /// All three channels at one UE position.
    pub fn channel_set(&self, ue: Vec3) -> Result<ChannelSet> {
        Ok(ChannelSet {
            h: self.compute_h(ue)?,
            w: self.compute_w(ue)?,
            q: self.q()?.clone(),
            ue_position: ue,
        })
    }

    /// `e^{-j 2π δ/λ}` for an excess length δ.
    fn phase_shift(&self, excess_m: f64) -> Complex64 {
        Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * excess_m / self.wavelength)
    }
}

pub fn compute_h(scene: &Scene, ue: Vec3) -> Result<Vec<Complex64>> {
    ChannelModel::new(scene).compute_h(ue)
}

pub fn compute_w(scene: &Scene, ue: Vec3) -> Result<Vec<Complex64>> {
    ChannelModel::new(scene).compute_w(ue)
}

pub fn compute_q(scene: &Scene) -> Result<ChannelMatrix> {
    ChannelModel::new(scene).q().cloned()
}

/// `vᴴv`, linear.
pub fn channel_power(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

pub fn channel_power_db(v: &[Complex64]) -> f64 {
    to_db(channel_power(v))
}
