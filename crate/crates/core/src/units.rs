//! Conversions between laboratory units and the SI values used internally.
//!
//! Every routine in this crate works in radians, meters and inverse meters.
//! Front ends accept milliradians, millimeters, inverse micrometers and
//! nanometers and convert at the boundary with these helpers.

pub fn mrad_to_rad(v: f64) -> f64 {
    v * 1e-3
}

pub fn rad_to_mrad(v: f64) -> f64 {
    v * 1e3
}

pub fn rad_to_urad(v: f64) -> f64 {
    v * 1e6
}

pub fn mm_to_m(v: f64) -> f64 {
    v * 1e-3
}

pub fn m_to_mm(v: f64) -> f64 {
    v * 1e3
}

/// Inverse micrometers to inverse meters.
pub fn per_um_to_per_m(v: f64) -> f64 {
    v * 1e6
}

/// Inverse meters to inverse micrometers.
pub fn per_m_to_per_um(v: f64) -> f64 {
    v * 1e-6
}

pub fn nm_to_m(v: f64) -> f64 {
    v * 1e-9
}

pub fn um_to_m(v: f64) -> f64 {
    v * 1e-6
}

/// A density over Δk in inverse meters (units of m) re-expressed per
/// inverse micrometer (units of µm).
pub fn density_per_m_to_per_um(v: f64) -> f64 {
    v * 1e6
}
