//! Uplink self-exposure mapping for RIS-assisted massive-MIMO deployments.
//!
//! The pipeline runs bottom-up:
//!
//! - [`scene`]: world model (walls, BS array, optional RIS, UE grid, link budget)
//! - [`raytrace`]: image-method specular tracer with wall transmissions
//! - [`channel`]: per-position channels `h` (UE→BS), `w` (UE→RIS), `q` (RIS→BS)
//! - [`ris`]: unit-modulus reflection weights and the equivalent channel `g`
//! - [`link`]: MRC SNR, Shannon target, required power and power control
//! - [`mapper`]: grid sweeps, improvement/classification maps and CSV/PGM export

pub mod channel;
pub mod error;
pub mod geom;
pub mod link;
pub mod mapper;
pub mod raytrace;
pub mod ris;
pub mod scene;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// dB value reported for a zero (or negative) linear power.
pub const DB_FLOOR: f64 = -400.0;

/// Linear power ratio to dB, with [`DB_FLOOR`] standing in for `-inf`.
pub fn to_db(linear: f64) -> f64 {
    if linear > 0.0 {
        10.0 * linear.log10()
    } else {
        DB_FLOOR
    }
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
