//! RIS reflection weights and the equivalent UE→BS channel.

use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::scene::WeightMode;

/// Magnitudes below this are treated as a dead element / absent path.
pub const DEAD_MAGNITUDE: f64 = 1e-300;

/// Diagonal of the RIS reflection matrix; every entry has unit modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct RisWeights {
    pub b: Vec<Complex64>,
    pub mode: WeightMode,
    /// BS element whose cascade is phase-aligned (cascade mode only).
    pub reference_antenna: Option<usize>,
}

impl RisWeights {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

fn unit_phase(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// `b[k] = conj(w[k]) / |w[k]|`; dead elements get `1 + 0j`.
pub fn ris_weights_literal(w: &[Complex64]) -> RisWeights {
    let b = w
        .iter()
        .map(|wk| {
            let m = wk.norm();
            if m < DEAD_MAGNITUDE {
                Complex64::new(1.0, 0.0)
            } else {
                unit_phase(-wk.arg())
            }
        })
        .collect();
    RisWeights {
        b,
        mode: WeightMode::Literal,
        reference_antenna: None,
    }
}

/// Aligns every cascade term `q[k][n_ref]·b[k]·w[k]` with `h[n_ref]`.
pub fn ris_weights_cascade(
    w: &[Complex64],
    q: &ChannelMatrix,
    h: &[Complex64],
    n_ref: usize,
) -> Result<RisWeights> {
    check_dims(h, w, q)?;
    if n_ref >= h.len() {
        return Err(Error::IndexOutOfRange {
            index: n_ref,
            len: h.len(),
        });
    }
    let h_phase = if h[n_ref].norm() < DEAD_MAGNITUDE {
        0.0
    } else {
        h[n_ref].arg()
    };
    let b = w
        .iter()
        .enumerate()
        .map(|(k, wk)| {
            if wk.norm() < DEAD_MAGNITUDE {
                Complex64::new(1.0, 0.0)
            } else {
                let qk = q[(k, n_ref)];
                let q_phase = if qk.norm() < DEAD_MAGNITUDE { 0.0 } else { qk.arg() };
                unit_phase(-(wk.arg() + q_phase - h_phase))
            }
        })
        .collect();
    Ok(RisWeights {
        b,
        mode: WeightMode::CascadeConjugate,
        reference_antenna: Some(n_ref),
    })
}

/// BS element with the strongest incoherent cascade `Σ_k |q[k][n]|·|w[k]|`;
/// ties go to the lowest index.
pub fn strongest_cascade_antenna(w: &[Complex64], q: &ChannelMatrix) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for n in 0..q.ncols() {
        let s: f64 = w.iter().enumerate().map(|(k, wk)| q[(k, n)].norm() * wk.norm()).sum();
        if s > best.1 {
            best = (n, s);
        }
    }
    best.0
}

/// `g[n] = h[n] + Σ_k q[k][n]·b[k]·w[k]`; with no weights `g = h`.
pub fn equivalent_channel(
    h: &[Complex64],
    w: &[Complex64],
    q: &ChannelMatrix,
    weights: Option<&RisWeights>,
) -> Result<Vec<Complex64>> {
    let Some(weights) = weights else {
        return Ok(h.to_vec());
    };
    if w.is_empty() && weights.is_empty() {
        return Ok(h.to_vec());
    }
    check_dims(h, w, q)?;
    if weights.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} unit cells",
            weights.len(),
            w.len()
        )));
    }
    let cascade: Vec<Complex64> = weights.b.iter().zip(w).map(|(b, w)| b * w).collect();
    Ok(h
        .iter()
        .enumerate()
        .map(|(n, hn)| hn + cascade.iter().enumerate().map(|(k, c)| q[(k, n)] * c).sum::<Complex64>())
        .collect())
}

fn check_dims(h: &[Complex64], w: &[Complex64], q: &ChannelMatrix) -> Result<()> {
    if q.nrows() != w.len() || q.ncols() != h.len() {
        return Err(Error::DimensionMismatch(format!(
            "q is {}x{}, expected {}x{} (K x N)",
            q.nrows(),
            q.ncols(),
            w.len(),
            h.len()
        )));
    }
    Ok(())
}
