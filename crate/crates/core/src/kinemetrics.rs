//! Finite-difference kinematics of sampled trajectories: velocity,
//! acceleration, jerk and snap, plus per-trial mean magnitudes.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::geometry::{Vec2, Vec3};

pub const MAX_ORDER: usize = 4;

/// Uniformly sampled 3-D positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub points: Vec<Vec3>,
}

impl Trajectory {
    pub fn new(dt: f64, points: Vec<Vec3>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(domain(format!("dt must be > 0, got {dt}")));
        }
        Ok(Trajectory { dt, points })
    }
}

/// Mean magnitudes of the first four derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MotionSummary {
    pub mean_speed: f64,
    pub mean_accel: f64,
    pub mean_jerk: f64,
    pub mean_snap: f64,
}

/// Centered moving average; output has `len - (window - 1)` points.
fn smooth(points: &[Vec3], window: usize) -> Result<Vec<Vec3>> {
    if window.is_multiple_of(2) {
        return Err(domain(format!(
            "smoothing window must be odd, got {window}"
        )));
    }
    if window >= points.len() {
        return Err(domain(format!(
            "smoothing window {window} must be shorter than the trajectory ({})",
            points.len()
        )));
    }
    let w = window as f64;
    Ok(points
        .windows(window)
        .map(|win| win.iter().sum::<Vec3>() / w)
        .collect())
}

fn central_difference(series: &[Vec3], dt: f64) -> Vec<Vec3> {
    let inv = 1.0 / (2.0 * dt);
    series.windows(3).map(|w| (w[2] - w[0]) * inv).collect()
}

/// `order`-th derivative by iterated central differences, after optional
/// centered smoothing. Element `k` of the result is aligned with input
/// sample `k + order + (window - 1) / 2`.
pub fn derivative_series(
    traj: &Trajectory,
    order: usize,
    smoothing_window: Option<usize>,
) -> Result<Vec<Vec3>> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(domain(format!(
            "derivative order must be 1..=4, got {order}"
        )));
    }
    let mut series = match smoothing_window {
        Some(w) => smooth(&traj.points, w)?,
        None => traj.points.clone(),
    };
    if series.len() < 2 * order + 1 {
        return Err(domain(format!(
            "order {order} needs at least {} points, have {}",
            2 * order + 1,
            series.len()
        )));
    }
    for _ in 0..order {
        series = central_difference(&series, traj.dt);
    }
    Ok(series)
}

fn mean_norm(series: &[Vec3]) -> f64 {
    series.iter().map(|v| v.norm()).sum::<f64>() / series.len() as f64
}

pub fn motion_summary(traj: &Trajectory, smoothing_window: Option<usize>) -> Result<MotionSummary> {
    let m = |order| derivative_series(traj, order, smoothing_window).map(|s| mean_norm(&s));
    Ok(MotionSummary {
        mean_speed: m(1)?,
        mean_accel: m(2)?,
        mean_jerk: m(3)?,
        mean_snap: m(4)?,
    })
}

/// Mean horizontal distance between aligned drone and pad tracks.
pub fn mean_tracking_distance(drone_xy: &[Vec2], pad_xy: &[Vec2]) -> Result<f64> {
    if drone_xy.len() != pad_xy.len() {
        return Err(domain(format!(
            "series lengths differ ({} vs {})",
            drone_xy.len(),
            pad_xy.len()
        )));
    }
    if drone_xy.is_empty() {
        return Err(domain("empty series"));
    }
    let total: f64 = drone_xy
        .iter()
        .zip(pad_xy)
        .map(|(d, p)| (d - p).norm())
        .sum();
    Ok(total / drone_xy.len() as f64)
}
