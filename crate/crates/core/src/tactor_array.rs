//! The seven-unit sensor-tactor pad.
//!
//! Each unit pairs an upward photo-transistor with a linear resonant actuator
//! driven at a fixed 150 Hz carrier; the information channel is the drive
//! amplitude, linear in photocurrent. Six units sit on a 40 mm ring with one
//! in the center.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::flightworld::DroneState;
use crate::geometry::{plate_normal, tilt_rotation, Vec2, Vec3};
use crate::photometry::{illuminance, photocurrent, PhotometricParams, SensorPose};

pub const UNIT_COUNT: usize = 7;
pub const CENTER_UNIT: usize = 6;
/// Carrier frequency of every actuator, Hz.
pub const CARRIER_HZ: f64 = 150.0;
/// Total amplitude below which a frame counts as "no signal".
pub const ACTIVATION_EPSILON: f64 = 1e-6;
/// Smallest allowed spacing between neighbouring units, m.
pub const MIN_UNIT_SPACING: f64 = 0.02;

pub type Amplitudes = [f64; UNIT_COUNT];

#[derive(Debug, Clone, PartialEq)]
pub struct PadGeometry {
    pub plate_radius: f64,
    pub ring_radius: f64,
    unit_positions: [Vec2; UNIT_COUNT],
}

impl Default for PadGeometry {
    fn default() -> Self {
        PadGeometry::new(0.080, 0.040).expect("default pad geometry is valid")
    }
}

impl PadGeometry {
    /// Units 0–5 on the ring every 60° starting on pad +X, unit 6 at the center.
    pub fn new(plate_radius: f64, ring_radius: f64) -> Result<Self> {
        if !(ring_radius > 0.0 && plate_radius >= ring_radius) {
            return Err(Error::Config(format!(
                "need 0 < ring_radius <= plate_radius (got {ring_radius}, {plate_radius})"
            )));
        }
        let mut unit_positions = [Vec2::zeros(); UNIT_COUNT];
        for (k, p) in unit_positions.iter_mut().take(6).enumerate() {
            let a = k as f64 * std::f64::consts::FRAC_PI_3;
            *p = Vec2::new(ring_radius * a.cos(), ring_radius * a.sin());
        }
        let g = PadGeometry {
            plate_radius,
            ring_radius,
            unit_positions,
        };
        if g.min_spacing() < MIN_UNIT_SPACING {
            return Err(Error::Config(format!(
                "unit spacing {:.4} m below {MIN_UNIT_SPACING} m",
                g.min_spacing()
            )));
        }
        Ok(g)
    }

    pub fn unit_positions(&self) -> &[Vec2; UNIT_COUNT] {
        &self.unit_positions
    }

    pub fn min_spacing(&self) -> f64 {
        let p = &self.unit_positions;
        let mut best = f64::INFINITY;
        for i in 0..UNIT_COUNT {
            for j in i + 1..UNIT_COUNT {
                best = best.min((p[i] - p[j]).norm());
            }
        }
        best
    }
}

/// Where the pad is and how it is tilted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadPose {
    pub center: Vec3,
    /// (roll, pitch), rad.
    pub tilt: Vec2,
}

impl PadPose {
    /// World poses of the seven photo-transistors; all face along the plate normal.
    pub fn sensor_poses(&self, geometry: &PadGeometry) -> [SensorPose; UNIT_COUNT] {
        let rot = tilt_rotation(self.tilt);
        let normal = plate_normal(self.tilt);
        geometry.unit_positions.map(|p| SensorPose {
            position: self.center + rot * Vec3::new(p.x, p.y, 0.0),
            normal,
        })
    }
}

/// Haptic state of one pad: seven amplitude fractions at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TactileFrame {
    pub t: f64,
    pub amplitudes: Amplitudes,
}

impl TactileFrame {
    pub fn silent(t: f64) -> Self {
        TactileFrame {
            t,
            amplitudes: [0.0; UNIT_COUNT],
        }
    }

    pub fn total_activation(&self) -> f64 {
        self.amplitudes.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorParams {
    /// First-order lag time constant, s. Zero means instantaneous.
    pub lag_time_constant: f64,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        ActuatorParams {
            lag_time_constant: 0.020,
        }
    }
}

/// Target amplitudes for every unit given the drones overhead.
///
/// Light from every LED-on drone is summed at each sensor before the
/// photocurrent saturates.
pub fn raw_frame<'a>(
    drones: impl IntoIterator<Item = &'a DroneState>,
    pad: &PadPose,
    geometry: &PadGeometry,
    photo: &PhotometricParams,
) -> Result<Amplitudes> {
    let sensors = pad.sensor_poses(geometry);
    let lit: Vec<&DroneState> = drones.into_iter().filter(|d| d.led_on).collect();
    let mut out = [0.0; UNIT_COUNT];
    if lit.is_empty() {
        return Ok(out);
    }
    for (amp, sensor) in out.iter_mut().zip(sensors.iter()) {
        let mut e = 0.0;
        for d in &lit {
            e += illuminance(d.position, -Vec3::z(), sensor, photo)?;
        }
        *amp = photocurrent(e, photo)?;
    }
    Ok(out)
}

/// Advance the actuator amplitudes toward `target` with a first-order lag.
pub fn step_frame(
    prev: &TactileFrame,
    target: &Amplitudes,
    dt: f64,
    a: &ActuatorParams,
) -> Result<TactileFrame> {
    if !(dt > 0.0) {
        return Err(domain(format!("dt must be > 0, got {dt}")));
    }
    let alpha = if a.lag_time_constant > 0.0 {
        1.0 - (-dt / a.lag_time_constant).exp()
    } else {
        1.0
    };
    let mut amplitudes = prev.amplitudes;
    for (amp, &tgt) in amplitudes.iter_mut().zip(target) {
        *amp = if alpha == 1.0 {
            tgt
        } else {
            *amp + (tgt - *amp) * alpha
        }
        .clamp(0.0, 1.0);
    }
    Ok(TactileFrame {
        t: prev.t + dt,
        amplitudes,
    })
}

/// Amplitude-weighted mean of unit positions in the pad frame, or `None`
/// when the pad is silent.
pub fn activation_centroid(frame: &TactileFrame, geometry: &PadGeometry) -> Option<Vec2> {
    let total = frame.total_activation();
    if total <= ACTIVATION_EPSILON {
        return None;
    }
    let weighted = frame
        .amplitudes
        .iter()
        .zip(geometry.unit_positions.iter())
        .fold(Vec2::zeros(), |acc, (&a, p)| acc + p * a);
    Some(weighted / total)
}
