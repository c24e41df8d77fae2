//! Unit conversions used throughout the crate. Internal units are SI.

use std::f64::consts::PI;

pub const MPS_PER_MPH: f64 = 0.44704;
pub const RAD_S_PER_RPM: f64 = PI / 30.0;
pub const METERS_PER_MILE: f64 = 1609.344;
pub const LITERS_PER_GALLON: f64 = 3.785_411_784;

pub fn mph_to_mps(v: f64) -> f64 {
    v * MPS_PER_MPH
}

pub fn mps_to_mph(v: f64) -> f64 {
    v / MPS_PER_MPH
}

pub fn rpm_to_rad_s(n: f64) -> f64 {
    n * RAD_S_PER_RPM
}

pub fn rad_s_to_rpm(w: f64) -> f64 {
    w / RAD_S_PER_RPM
}

/// Miles per gallon from a distance in meters and a fuel mass in kg.
/// `None` when either quantity is zero.
pub fn miles_per_gallon(distance_m: f64, fuel_kg: f64, fuel_density_kg_per_l: f64) -> Option<f64> {
    if distance_m <= 0.0 || fuel_kg <= 0.0 {
        return None;
    }
    let gallons = fuel_kg / fuel_density_kg_per_l / LITERS_PER_GALLON;
    Some(distance_m / METERS_PER_MILE / gallons)
}
