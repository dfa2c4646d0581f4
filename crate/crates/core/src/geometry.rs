//! Shared vector aliases and plate-tilt helpers.

use nalgebra::{Rotation3, Vector2, Vector3};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Rotation of a plate tilted by `tilt = (roll, pitch)`: roll about world X
/// first, then pitch about world Y.
pub fn tilt_rotation(tilt: Vec2) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), tilt.y)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), tilt.x)
}

/// Unit normal of a plate with the given tilt.
pub fn plate_normal(tilt: Vec2) -> Vec3 {
    tilt_rotation(tilt) * Vec3::z()
}

/// Height of the plate plane through `center` at horizontal location `xy`.
pub fn plate_height_at(center: Vec3, tilt: Vec2, xy: Vec2) -> f64 {
    let n = plate_normal(tilt);
    center.z - (n.x * (xy.x - center.x) + n.y * (xy.y - center.y)) / n.z
}

/// Angle between the plate normal and vertical.
pub fn tilt_angle(tilt: Vec2) -> f64 {
    plate_normal(tilt).z.clamp(-1.0, 1.0).acos()
}

/// Horizontal unit vector pointing down the slope, or `None` for a level plate.
pub fn downhill_direction(tilt: Vec2) -> Option<Vec2> {
    let n = plate_normal(tilt);
    let h = Vec2::new(n.x, n.y);
    let norm = h.norm();
    (norm > 0.0).then(|| h / norm)
}
