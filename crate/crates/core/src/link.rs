//! Uplink budget: MRC output SNR, Shannon target SNR, required transmit
//! power and closed-loop power control.
//!
//! I/O is in dB/dBm; the SNR and required-power kernels work on linear
//! quantities. A zero channel gain maps to a `+inf` required power and a zero
//! target SNR to `-inf`; these sentinels never reach output files.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::channel_power;
use crate::scene::LinkBudget;

/// Required powers within this margin above `p_max` are treated as `p_max`,
/// so the exact coverage boundary survives dB/linear round trips.
pub const BOUNDARY_TOLERANCE_DB: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkStatus {
    Covered,
    CoveredMinPower,
    OutOfCoverage,
}

impl LinkStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinkStatus::Covered => "COVERED",
            LinkStatus::CoveredMinPower => "COVERED_MIN_POWER",
            LinkStatus::OutOfCoverage => "OUT_OF_COVERAGE",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "COVERED" => Some(LinkStatus::Covered),
            "COVERED_MIN_POWER" => Some(LinkStatus::CoveredMinPower),
            "OUT_OF_COVERAGE" => Some(LinkStatus::OutOfCoverage),
            _ => None,
        }
    }

    pub fn is_covered(&self) -> bool {
        !matches!(self, LinkStatus::OutOfCoverage)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkResult {
    /// `gᴴg`, linear.
    pub gain_linear: f64,
    /// Unclamped required power; may be ±inf.
    pub p_target_dbm: f64,
    /// Present iff covered.
    pub p_tx_dbm: Option<f64>,
    pub status: LinkStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetService {
    pub rate_bps: f64,
    pub bandwidth_hz: f64,
}

impl TargetService {
    pub fn from_budget(budget: &LinkBudget) -> Self {
        Self {
            rate_bps: budget.rate_bps,
            bandwidth_hz: budget.bandwidth_hz,
        }
    }

    /// Spectral efficiency R/W (bit/s/Hz).
    pub fn se_bps_hz(&self) -> f64 {
        self.rate_bps / self.bandwidth_hz
    }

    pub fn snr_target_linear(&self) -> f64 {
        target_snr(self.rate_bps, self.bandwidth_hz)
    }
}

/// `N_o + 10·log10(W) + N_f` in dBm.
pub fn noise_power_dbm(budget: &LinkBudget) -> f64 {
    budget.noise_psd_dbm_hz + 10.0 * budget.bandwidth_hz.log10() + budget.noise_figure_db
}

/// Shannon inverse: `2^(R/W) - 1`.
pub fn target_snr(rate_bps: f64, bandwidth_hz: f64) -> f64 {
    (rate_bps / bandwidth_hz).exp2() - 1.0
}

/// MRC output SNR (linear) for a given transmit power.
pub fn snr(g: &[Complex64], p_tx_dbm: f64, budget: &LinkBudget) -> f64 {
    snr_from_gain(channel_power(g), p_tx_dbm, budget)
}

pub fn snr_from_gain(gain_linear: f64, p_tx_dbm: f64, budget: &LinkBudget) -> f64 {
    gain_linear * 10f64.powf((p_tx_dbm - noise_power_dbm(budget)) / 10.0)
}

/// Transmit power (dBm) that exactly meets `snr_target_linear`.
pub fn target_power_dbm(gain_linear: f64, snr_target_linear: f64, budget: &LinkBudget) -> f64 {
    if !(gain_linear > 0.0) {
        return f64::INFINITY;
    }
    if !(snr_target_linear > 0.0) {
        return f64::NEG_INFINITY;
    }
    noise_power_dbm(budget) + 10.0 * snr_target_linear.log10() - 10.0 * gain_linear.log10()
}

/// Same quantity computed with linear noise terms (mW), for cross-checks.
pub fn target_power_linear_mw(gain_linear: f64, snr_target_linear: f64, budget: &LinkBudget) -> f64 {
    let n0_mw_hz = 10f64.powf(budget.noise_psd_dbm_hz / 10.0);
    let nf = 10f64.powf(budget.noise_figure_db / 10.0);
    snr_target_linear * nf * n0_mw_hz * budget.bandwidth_hz / gain_linear
}

/// Clamps to `[p_min, p_max]`; above `p_max` the UE is out of coverage.
pub fn apply_power_control(p_target_dbm: f64, budget: &LinkBudget) -> (Option<f64>, LinkStatus) {
    if p_target_dbm > budget.p_max_dbm + BOUNDARY_TOLERANCE_DB || p_target_dbm.is_nan() {
        (None, LinkStatus::OutOfCoverage)
    } else if p_target_dbm < budget.p_min_dbm {
        (Some(budget.p_min_dbm), LinkStatus::CoveredMinPower)
    } else {
        (Some(p_target_dbm.min(budget.p_max_dbm)), LinkStatus::Covered)
    }
}

pub fn evaluate_link(g: &[Complex64], budget: &LinkBudget) -> LinkResult {
    evaluate_gain(channel_power(g), budget)
}

pub fn evaluate_gain(gain_linear: f64, budget: &LinkBudget) -> LinkResult {
    let snr_target = TargetService::from_budget(budget).snr_target_linear();
    let p_target_dbm = target_power_dbm(gain_linear, snr_target, budget);
    let (p_tx_dbm, status) = apply_power_control(p_target_dbm, budget);
    LinkResult {
        gain_linear,
        p_target_dbm,
        p_tx_dbm,
        status,
    }
}
