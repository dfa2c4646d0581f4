//! Optical channel between a drone's downward LED and one recessed
//! photo-transistor.
//!
//! The LED is a point source with a hard emission cone; the sensor sits at
//! the bottom of a bore that limits its acceptance cone. Inside both cones
//! illuminance falls off as `cos(θ_emit) / D²`; outside either cone only the
//! ambient floor reaches the sensor.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::Vec3;

/// Bore diameter above each photo-transistor, m.
pub const APERTURE_DIAMETER: f64 = 0.003;
/// Bore depth, m.
pub const APERTURE_DEPTH: f64 = 0.010;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotometricParams {
    /// Radiant intensity along the LED axis (arbitrary units · m²).
    pub source_intensity: f64,
    /// Half-angle of the LED emission cone, rad.
    pub emit_half_angle: f64,
    /// Half-angle of the sensor acceptance cone, rad.
    pub accept_half_angle: f64,
    pub ambient_floor: f64,
    pub saturation_current: f64,
    /// Photocurrent per unit illuminance.
    pub responsivity: f64,
}

impl Default for PhotometricParams {
    fn default() -> Self {
        PhotometricParams {
            source_intensity: 1.0,
            emit_half_angle: 60f64.to_radians(),
            accept_half_angle: (APERTURE_DIAMETER / APERTURE_DEPTH).atan(),
            ambient_floor: 0.0,
            // Full drive at 0.1 m on-axis.
            saturation_current: 100.0,
            responsivity: 1.0,
        }
    }
}

impl PhotometricParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("source_intensity", self.source_intensity),
            ("saturation_current", self.saturation_current),
            ("responsivity", self.responsivity),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.ambient_floor >= 0.0 && self.ambient_floor.is_finite()) {
            return Err(Error::Config(format!(
                "ambient_floor must be >= 0, got {}",
                self.ambient_floor
            )));
        }
        for (name, v) in [
            ("emit_half_angle", self.emit_half_angle),
            ("accept_half_angle", self.accept_half_angle),
        ] {
            if !(v > 0.0 && v < std::f64::consts::FRAC_PI_2) {
                return Err(Error::Config(format!(
                    "{name} must lie in (0, pi/2), got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Position and sensing axis of one photo-transistor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPose {
    pub position: Vec3,
    pub normal: Vec3,
}

impl SensorPose {
    pub fn new(position: Vec3, normal: Vec3) -> Result<Self> {
        if (normal.norm() - 1.0).abs() > 1e-9 {
            return Err(domain(format!(
                "sensor normal must be a unit vector (|n| = {})",
                normal.norm()
            )));
        }
        Ok(SensorPose { position, normal })
    }

    /// Sensor facing straight up.
    pub fn upward(position: Vec3) -> Self {
        SensorPose {
            position,
            normal: Vec3::z(),
        }
    }
}

fn angle_between(u: &Vec3, v: &Vec3) -> f64 {
    // atan2 form stays accurate near 0 where acos loses precision.
    u.cross(v).norm().atan2(u.dot(v))
}

/// Illuminance at `sensor` from a point LED at `led_position` aimed along
/// `led_axis` (unit vector).
pub fn illuminance(
    led_position: Vec3,
    led_axis: Vec3,
    sensor: &SensorPose,
    p: &PhotometricParams,
) -> Result<f64> {
    let to_sensor = sensor.position - led_position;
    let d2 = to_sensor.norm_squared();
    if d2 == 0.0 || !d2.is_finite() {
        return Err(domain("LED and sensor coincide"));
    }
    let theta_emit = angle_between(&led_axis, &to_sensor);
    let theta_accept = angle_between(&sensor.normal, &(-to_sensor));
    if theta_emit > p.emit_half_angle || theta_accept > p.accept_half_angle {
        return Ok(p.ambient_floor);
    }
    Ok(p.ambient_floor + p.source_intensity * theta_emit.cos() / d2)
}

/// Photocurrent as a fraction of the saturation current.
pub fn photocurrent(e: f64, p: &PhotometricParams) -> Result<f64> {
    if !(e >= 0.0) {
        return Err(domain(format!("illuminance must be >= 0, got {e}")));
    }
    Ok((p.responsivity * e).min(p.saturation_current) / p.saturation_current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn wide() -> PhotometricParams {
        PhotometricParams {
            emit_half_angle: 1.5,
            accept_half_angle: 1.5,
            ..PhotometricParams::default()
        }
    }

    fn down() -> Vec3 {
        -Vec3::z()
    }

    #[test]
    fn on_axis_inverse_square() {
        let s = SensorPose::upward(Vec3::zeros());
        let near = illuminance(Vec3::new(0.0, 0.0, 0.5), down(), &s, &wide()).unwrap();
        let far = illuminance(Vec3::new(0.0, 0.0, 1.0), down(), &s, &wide()).unwrap();
        assert_relative_eq!(near, 4.0, epsilon = 1e-15);
        assert_relative_eq!(far, 1.0, epsilon = 1e-15);
        assert_relative_eq!(far, near / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn aperture_blocks_oblique_light() {
        let p = PhotometricParams {
            ambient_floor: 0.0,
            ..PhotometricParams::default()
        };
        assert_relative_eq!(p.accept_half_angle, 0.2914567944778671, epsilon = 1e-15);
        // θ_accept = atan(0.04 / 0.1) = atan(0.4) ≈ 0.3805 rad, outside the bore cone.
        let theta: f64 = 0.4f64.atan();
        assert!(theta > p.accept_half_angle);
        let s = SensorPose::upward(Vec3::zeros());
        let e = illuminance(Vec3::new(0.04, 0.0, 0.1), down(), &s, &p).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn coincident_is_domain_error() {
        let s = SensorPose::upward(Vec3::zeros());
        assert!(matches!(
            illuminance(Vec3::zeros(), down(), &s, &wide()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn photocurrent_examples() {
        let p = PhotometricParams {
            responsivity: 1.0,
            saturation_current: 10.0,
            ..PhotometricParams::default()
        };
        assert_eq!(photocurrent(0.0, &p).unwrap(), 0.0);
        assert_eq!(photocurrent(5.0, &p).unwrap(), 0.5);
        assert_eq!(photocurrent(25.0, &p).unwrap(), 1.0);
        assert!(photocurrent(-1e-9, &p).is_err());
        assert!(photocurrent(f64::NAN, &p).is_err());
    }

    #[test]
    fn non_unit_normal_rejected() {
        assert!(SensorPose::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 2.0)).is_err());
        assert!(SensorPose::new(Vec3::zeros(), Vec3::new(0.0, 0.6, 0.8)).is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(PhotometricParams::default().validate().is_ok());
        let bad = PhotometricParams {
            emit_half_angle: 2.0,
            ..PhotometricParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = PhotometricParams {
            ambient_floor: -1.0,
            ..PhotometricParams::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn inverse_square_constant(d in 0.01f64..5.0, i0 in 0.1f64..10.0) {
            let p = PhotometricParams { source_intensity: i0, ..wide() };
            let s = SensorPose::upward(Vec3::zeros());
            let e = illuminance(Vec3::new(0.0, 0.0, d), down(), &s, &p).unwrap();
            prop_assert!(((e * d * d) - i0).abs() <= 1e-12 * i0);
        }

        #[test]
        fn out_of_cone_returns_floor(
            x in -1.0f64..1.0, y in -1.0f64..1.0, z in 0.01f64..2.0, floor in 0.0f64..3.0
        ) {
            let p = PhotometricParams { ambient_floor: floor, ..PhotometricParams::default() };
            let s = SensorPose::upward(Vec3::zeros());
            let led = Vec3::new(x, y, z);
            let r = (x * x + y * y).sqrt();
            let accept = r.atan2(z);
            let e = illuminance(led, down(), &s, &p).unwrap();
            if accept > p.accept_half_angle + 1e-12 {
                prop_assert_eq!(e, floor);
            }
            prop_assert!(e >= floor);
        }

        #[test]
        fn strictly_decreasing_along_ray(
            ang in 0.0f64..0.25, d1 in 0.02f64..3.0, step in 0.001f64..1.0
        ) {
            // Same ray from the sensor: both angles stay fixed as D varies.
            let p = PhotometricParams::default();
            let s = SensorPose::upward(Vec3::zeros());
            let dir = Vec3::new(ang.sin(), 0.0, ang.cos());
            let e1 = illuminance(dir * d1, down(), &s, &p).unwrap();
            let e2 = illuminance(dir * (d1 + step), down(), &s, &p).unwrap();
            prop_assert!(e2 < e1);
        }

        #[test]
        fn photocurrent_monotone_bounded(a in 0.0f64..500.0, b in 0.0f64..500.0) {
            let p = PhotometricParams::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let ilo = photocurrent(lo, &p).unwrap();
            let ihi = photocurrent(hi, &p).unwrap();
            prop_assert!(ilo <= ihi);
            prop_assert!((0.0..=1.0).contains(&ilo) && (0.0..=1.0).contains(&ihi));
            if hi < p.saturation_current / p.responsivity {
                prop_assert!((ihi - hi * p.responsivity / p.saturation_current).abs() < 1e-15);
            } else {
                prop_assert_eq!(ihi, 1.0);
            }
        }
    }
}
