//! Synthetic operators standing in for the human hand.
//!
//! * visual (V): pursue a noisy, operator-biased estimate of the drone's XY;
//! * tactile (T): steer toward the activation centroid of the pad, dithering
//!   while the signal is weak and searching when it is absent;
//! * combined (VT): blend the two, handing over to touch as the pad lights up.
//!
//! With two drones the operator can look at only one at a time; the
//! [`HeadTracker`] switches attention on a fixed dwell and produces the head
//! trajectory.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Vec2, Vec3};
use crate::tactor_array::{activation_centroid, PadGeometry, TactileFrame};

/// Heading diffusion of the tactile search walk, rad/√s.
const SEARCH_HEADING_DIFFUSION: f64 = 1.0;

/// What one pad's operator is entitled to know at a step.
#[derive(Debug, Clone)]
pub struct PadObservation<'a> {
    pub t: f64,
    pub pad_xy: Vec2,
    pub operator_xy: Vec2,
    pub frame: &'a TactileFrame,
    /// True XY of this pad's drone; `None` when vision is unavailable.
    pub drone_xy: Option<Vec2>,
    /// Whether the operator is currently looking at this pad's drone.
    pub attended: bool,
}

/// A controller producing a horizontal velocity command for one pad.
pub trait PadPolicy: Send {
    fn command(&mut self, obs: &PadObservation<'_>, rng: &mut ChaCha8Rng, dt: f64) -> Vec2;
}

/// Holds the pad still.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroMotion;

impl PadPolicy for ZeroMotion {
    fn command(&mut self, _: &PadObservation<'_>, _: &mut ChaCha8Rng, _: f64) -> Vec2 {
        Vec2::zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisualPolicyParams {
    /// Per-axis standard deviation of the perceived drone position, m.
    pub position_noise_sd: f64,
    /// Fraction of the drone→operator vector added to the perceived position.
    pub operator_bias_gain: f64,
    /// 1/s.
    pub pursuit_gain: f64,
    /// Seconds spent looking at one drone before switching (two drones).
    pub attention_dwell: f64,
    /// Hold the last estimate of a drone while looking at the other one.
    pub unattended_estimate_freeze: bool,
}

impl Default for VisualPolicyParams {
    fn default() -> Self {
        VisualPolicyParams {
            position_noise_sd: 0.01,
            operator_bias_gain: 0.1,
            pursuit_gain: 2.0,
            attention_dwell: 0.8,
            unattended_estimate_freeze: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TactilePolicyParams {
    /// 1/s.
    pub centroid_gain: f64,
    /// Radius of the exploratory circle, m.
    pub dither_amplitude: f64,
    /// Hz.
    pub dither_frequency: f64,
    /// Speed of the search walk when the pad is dark, m/s.
    pub search_speed: f64,
}

impl Default for TactilePolicyParams {
    fn default() -> Self {
        TactilePolicyParams {
            centroid_gain: 3.0,
            dither_amplitude: 0.015,
            dither_frequency: 1.0,
            search_speed: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombinedPolicyParams {
    pub visual: VisualPolicyParams,
    pub tactile: TactilePolicyParams,
    /// Total pad activation at which control is fully tactile.
    pub handover_activation: f64,
}

impl Default for CombinedPolicyParams {
    fn default() -> Self {
        CombinedPolicyParams {
            visual: VisualPolicyParams::default(),
            tactile: TactilePolicyParams::default(),
            handover_activation: 0.5,
        }
    }
}

impl CombinedPolicyParams {
    pub fn validate(&self) -> Result<()> {
        let v = &self.visual;
        let t = &self.tactile;
        let fields = [
            ("position_noise_sd", v.position_noise_sd),
            ("operator_bias_gain", v.operator_bias_gain),
            ("pursuit_gain", v.pursuit_gain),
            ("attention_dwell", v.attention_dwell),
            ("centroid_gain", t.centroid_gain),
            ("dither_amplitude", t.dither_amplitude),
            ("dither_frequency", t.dither_frequency),
            ("search_speed", t.search_speed),
        ];
        for (name, x) in fields {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {x}")));
            }
        }
        if v.operator_bias_gain > 1.0 {
            return Err(Error::Config("operator_bias_gain must be <= 1".into()));
        }
        if !(self.handover_activation > 0.0) {
            return Err(Error::Config("handover_activation must be > 0".into()));
        }
        Ok(())
    }
}

/// Where the operator believes the drone is.
pub fn perceive(
    true_drone_xy: Vec2,
    operator_xy: Vec2,
    params: &VisualPolicyParams,
    rng: &mut ChaCha8Rng,
) -> Vec2 {
    // Always draw both normals so noise levels share one random sequence.
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    true_drone_xy
        + Vec2::new(nx, ny) * params.position_noise_sd
        + (operator_xy - true_drone_xy) * params.operator_bias_gain
}

/// One visual pursuit command toward a freshly perceived drone position.
pub fn visual_step(
    true_drone_xy: Vec2,
    operator_xy: Vec2,
    pad_xy: Vec2,
    params: &VisualPolicyParams,
    rng: &mut ChaCha8Rng,
    _dt: f64,
) -> Vec2 {
    let perceived = perceive(true_drone_xy, operator_xy, params, rng);
    (perceived - pad_xy) * params.pursuit_gain
}

#[derive(Debug, Clone)]
pub struct VisualPolicy {
    pub params: VisualPolicyParams,
    estimate: Option<Vec2>,
}

impl VisualPolicy {
    pub fn new(params: VisualPolicyParams) -> Self {
        VisualPolicy {
            params,
            estimate: None,
        }
    }

    pub fn estimate(&self) -> Option<Vec2> {
        self.estimate
    }
}

impl PadPolicy for VisualPolicy {
    fn command(&mut self, obs: &PadObservation<'_>, rng: &mut ChaCha8Rng, _dt: f64) -> Vec2 {
        let frozen = self.params.unattended_estimate_freeze && !obs.attended;
        match (obs.drone_xy, frozen, self.estimate) {
            (Some(xy), false, _) | (Some(xy), true, None) => {
                self.estimate = Some(perceive(xy, obs.operator_xy, &self.params, rng));
            }
            _ => {}
        }
        self.estimate
            .map_or_else(Vec2::zeros, |e| (e - obs.pad_xy) * self.params.pursuit_gain)
    }
}

/// Internal state of the tactile controller.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TactileState {
    /// Dither oscillator phase, rad.
    pub phase: f64,
    /// Heading of the search walk; `None` while the pad has signal.
    pub search_heading: Option<f64>,
}

/// One tactile command in the pad frame.
pub fn tactile_step(
    frame: &TactileFrame,
    geometry: &PadGeometry,
    state: &mut TactileState,
    params: &TactilePolicyParams,
    rng: &mut ChaCha8Rng,
    dt: f64,
) -> Vec2 {
    match activation_centroid(frame, geometry) {
        Some(centroid) => {
            state.search_heading = None;
            let omega = TAU * params.dither_frequency;
            let scale = (1.0 - frame.total_activation()).clamp(0.0, 1.0);
            let dither = Vec2::new(-state.phase.sin(), state.phase.cos())
                * (params.dither_amplitude * omega * scale);
            state.phase = (state.phase + omega * dt) % TAU;
            centroid * params.centroid_gain + dither
        }
        None => {
            let heading = match state.search_heading {
                None => rng.random::<f64>() * TAU,
                Some(h) => {
                    let n: f64 = rng.sample(StandardNormal);
                    h + n * SEARCH_HEADING_DIFFUSION * dt.sqrt()
                }
            };
            state.search_heading = Some(heading);
            Vec2::new(heading.cos(), heading.sin()) * params.search_speed
        }
    }
}

#[derive(Debug, Clone)]
pub struct TactilePolicy {
    pub params: TactilePolicyParams,
    geometry: PadGeometry,
    state: TactileState,
}

impl TactilePolicy {
    pub fn new(params: TactilePolicyParams, geometry: PadGeometry) -> Self {
        TactilePolicy {
            params,
            geometry,
            state: TactileState::default(),
        }
    }
}

impl PadPolicy for TactilePolicy {
    fn command(&mut self, obs: &PadObservation<'_>, rng: &mut ChaCha8Rng, dt: f64) -> Vec2 {
        tactile_step(
            obs.frame,
            &self.geometry,
            &mut self.state,
            &self.params,
            rng,
            dt,
        )
    }
}

/// Blend weight toward tactile control.
pub fn handover_weight(total_activation: f64, handover_activation: f64) -> f64 {
    (total_activation / handover_activation).clamp(0.0, 1.0)
}

pub fn combined_step(
    visual_command: Vec2,
    tactile_command: Vec2,
    total_activation: f64,
    handover_activation: f64,
) -> Vec2 {
    let w = handover_weight(total_activation, handover_activation);
    visual_command * (1.0 - w) + tactile_command * w
}

#[derive(Debug, Clone)]
pub struct CombinedPolicy {
    visual: VisualPolicy,
    tactile: TactilePolicy,
    handover_activation: f64,
}

impl CombinedPolicy {
    pub fn new(params: CombinedPolicyParams, geometry: PadGeometry) -> Self {
        CombinedPolicy {
            visual: VisualPolicy::new(params.visual),
            tactile: TactilePolicy::new(params.tactile, geometry),
            handover_activation: params.handover_activation,
        }
    }
}

impl PadPolicy for CombinedPolicy {
    fn command(&mut self, obs: &PadObservation<'_>, rng: &mut ChaCha8Rng, dt: f64) -> Vec2 {
        let v = self.visual.command(obs, rng, dt);
        let t = self.tactile.command(obs, rng, dt);
        combined_step(v, t, obs.frame.total_activation(), self.handover_activation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadParams {
    /// Yaw lag time constant, s.
    pub yaw_time_constant: f64,
    /// Distance from the neck pivot to the tracked head point, m.
    pub sway_lever: f64,
    pub pivot_height: f64,
}

impl Default for HeadParams {
    fn default() -> Self {
        HeadParams {
            yaw_time_constant: 0.15,
            sway_lever: 0.05,
            pivot_height: 1.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Heading of the face, rad from world +X toward +Y.
    pub yaw: f64,
}

impl HeadPose {
    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// Mutable part of the head model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadState {
    pub pivot: Vec3,
    pub yaw: f64,
    pub elapsed: f64,
    pub next_switch: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Advance attention and head yaw by `dt`.
///
/// With two drones the gaze toggles every `dwell` seconds; yaw follows the
/// bearing to the attended drone with a first-order lag.
pub fn attention_head_step(
    attended: usize,
    drone_xys: &[Vec2],
    head: &mut HeadState,
    dwell: f64,
    params: &HeadParams,
    dt: f64,
) -> (usize, HeadPose) {
    let mut attended = attended.min(drone_xys.len().saturating_sub(1));
    head.elapsed += dt;
    if drone_xys.len() > 1 && dwell > 0.0 {
        while head.elapsed >= head.next_switch - 1e-9 {
            attended = (attended + 1) % drone_xys.len();
            head.next_switch += dwell;
        }
    }
    if let Some(target) = drone_xys.get(attended) {
        let bearing = (target.y - head.pivot.y).atan2(target.x - head.pivot.x);
        let alpha = if params.yaw_time_constant > 0.0 {
            1.0 - (-dt / params.yaw_time_constant).exp()
        } else {
            1.0
        };
        head.yaw += wrap_angle(bearing - head.yaw) * alpha;
    }
    let pose = HeadPose {
        x: head.pivot.x + params.sway_lever * head.yaw.cos(),
        y: head.pivot.y + params.sway_lever * head.yaw.sin(),
        z: head.pivot.z,
        yaw: head.yaw,
    };
    (attended, pose)
}

/// Operator gaze and head model for one trial.
#[derive(Debug, Clone)]
pub struct HeadTracker {
    params: HeadParams,
    dwell: f64,
    attended: usize,
    state: HeadState,
    started: bool,
}

impl HeadTracker {
    pub fn new(operator_xy: Vec2, dwell: f64, params: HeadParams) -> Self {
        HeadTracker {
            state: HeadState {
                pivot: Vec3::new(operator_xy.x, operator_xy.y, params.pivot_height),
                yaw: PI / 2.0,
                elapsed: 0.0,
                next_switch: dwell,
            },
            params,
            dwell,
            attended: 0,
            started: false,
        }
    }

    /// Start from a given yaw instead of snapping to the first drone.
    pub fn with_yaw(mut self, yaw: f64) -> Self {
        self.state.yaw = yaw;
        self.started = true;
        self
    }

    pub fn attended(&self) -> usize {
        self.attended
    }

    pub fn state(&self) -> &HeadState {
        &self.state
    }

    /// Advance by `dt` (zero on the first call of a trial) and return the head pose.
    pub fn observe(&mut self, drone_xys: &[Vec2], dt: f64) -> HeadPose {
        if !self.started {
            self.started = true;
            if let Some(target) = drone_xys.first() {
                let p = self.state.pivot;
                self.state.yaw = (target.y - p.y).atan2(target.x - p.x);
            }
        }
        let (attended, pose) = attention_head_step(
            self.attended,
            drone_xys,
            &mut self.state,
            self.dwell,
            &self.params,
            dt,
        );
        self.attended = attended;
        pose
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flightworld::trial_rng;
    use crate::tactor_array::UNIT_COUNT;
    use approx::assert_relative_eq;

    fn no_noise() -> VisualPolicyParams {
        VisualPolicyParams {
            position_noise_sd: 0.0,
            operator_bias_gain: 0.0,
            ..VisualPolicyParams::default()
        }
    }

    #[test]
    fn visual_equilibrium() {
        let mut rng = trial_rng(1, 1);
        let d = Vec2::new(0.1, 0.5);
        let c = visual_step(d, Vec2::zeros(), d, &no_noise(), &mut rng, 0.01);
        assert_eq!(c, Vec2::zeros());
    }

    #[test]
    fn visual_bias_pulls_toward_operator() {
        let mut rng = trial_rng(1, 1);
        let p = VisualPolicyParams {
            operator_bias_gain: 0.1,
            ..no_noise()
        };
        let drone = Vec2::new(0.0, 0.5);
        let perceived = perceive(drone, Vec2::zeros(), &p, &mut rng);
        assert_relative_eq!(perceived, Vec2::new(0.0, 0.45), epsilon = 1e-15);
    }

    #[test]
    fn visual_noise_is_unbiased() {
        let p = VisualPolicyParams {
            position_noise_sd: 0.01,
            operator_bias_gain: 0.0,
            ..VisualPolicyParams::default()
        };
        let mut rng = trial_rng(42, 1);
        let drone = Vec2::new(0.02, 0.5);
        let pad = Vec2::new(0.0, 0.48);
        let noiseless = (drone - pad) * p.pursuit_gain;
        let n = 10_000;
        let mean = (0..n)
            .map(|_| visual_step(drone, Vec2::zeros(), pad, &p, &mut rng, 0.01))
            .fold(Vec2::zeros(), |a, c| a + c)
            / n as f64;
        let sigma = p.pursuit_gain * p.position_noise_sd;
        let bound = 3.0 * sigma / (n as f64).sqrt();
        assert!((mean - noiseless).x.abs() < bound);
        assert!((mean - noiseless).y.abs() < bound);
    }

    #[test]
    fn unattended_estimate_holds() {
        let mut pol = VisualPolicy::new(no_noise());
        let mut rng = trial_rng(0, 1);
        let frame = TactileFrame::silent(0.0);
        let mut obs = PadObservation {
            t: 0.0,
            pad_xy: Vec2::zeros(),
            operator_xy: Vec2::zeros(),
            frame: &frame,
            drone_xy: Some(Vec2::new(0.1, 0.0)),
            attended: true,
        };
        pol.command(&obs, &mut rng, 0.01);
        obs.attended = false;
        obs.drone_xy = Some(Vec2::new(0.3, 0.0));
        let c = pol.command(&obs, &mut rng, 0.01);
        assert_relative_eq!(c, Vec2::new(0.2, 0.0), epsilon = 1e-15);
    }

    fn frame(a: [f64; UNIT_COUNT]) -> TactileFrame {
        TactileFrame {
            t: 0.0,
            amplitudes: a,
        }
    }

    #[test]
    fn tactile_search_mode_speed() {
        let mut rng = trial_rng(3, 1);
        let mut st = TactileState::default();
        let g = PadGeometry::default();
        let p = TactilePolicyParams::default();
        let mut headings = Vec::new();
        for _ in 0..5 {
            let c = tactile_step(&TactileFrame::silent(0.0), &g, &mut st, &p, &mut rng, 0.01);
            assert_relative_eq!(c.norm(), 0.05, epsilon = 1e-12);
            headings.push(st.search_heading.unwrap());
        }
        let mut other = trial_rng(4, 1);
        let mut st2 = TactileState::default();
        tactile_step(
            &TactileFrame::silent(0.0),
            &g,
            &mut st2,
            &p,
            &mut other,
            0.01,
        );
        assert_ne!(st2.search_heading.unwrap(), headings[0]);
    }

    #[test]
    fn tactile_center_unit_gives_pure_dither() {
        let mut rng = trial_rng(3, 1);
        let g = PadGeometry::default();
        let p = TactilePolicyParams::default();
        let mut a = [0.0; UNIT_COUNT];
        a[6] = 0.5;
        let mut st = TactileState {
            phase: 0.3,
            search_heading: None,
        };
        let c = tactile_step(&frame(a), &g, &mut st, &p, &mut rng, 0.01);
        let expected = Vec2::new(-(0.3f64).sin(), 0.3f64.cos()) * (0.015 * TAU * 0.5);
        assert_relative_eq!(c, expected, epsilon = 1e-15);
        // Full amplitude suppresses the dither entirely.
        a[6] = 1.0;
        let c = tactile_step(&frame(a), &g, &mut st, &p, &mut rng, 0.01);
        assert_eq!(c, Vec2::zeros());
    }

    #[test]
    fn tactile_single_unit_pull() {
        let mut rng = trial_rng(3, 1);
        let p = TactilePolicyParams {
            dither_amplitude: 0.0,
            ..TactilePolicyParams::default()
        };
        let mut a = [0.0; UNIT_COUNT];
        a[0] = 0.4;
        let mut st = TactileState::default();
        let c = tactile_step(
            &frame(a),
            &PadGeometry::default(),
            &mut st,
            &p,
            &mut rng,
            0.01,
        );
        assert_relative_eq!(c, Vec2::new(0.12, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn combined_blend() {
        let v = Vec2::new(1.0, 0.0);
        let t = Vec2::new(0.0, 2.0);
        assert_eq!(combined_step(v, t, 0.0, 0.5), v);
        assert_eq!(combined_step(v, t, 0.5, 0.5), t);
        assert_eq!(combined_step(v, t, 3.0, 0.5), t);
        assert_relative_eq!(
            combined_step(v, t, 0.25, 0.5),
            (v + t) / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn params_validation() {
        assert!(CombinedPolicyParams::default().validate().is_ok());
        let mut p = CombinedPolicyParams::default();
        p.visual.operator_bias_gain = 1.5;
        assert!(p.validate().is_err());
        let p = CombinedPolicyParams {
            handover_activation: 0.0,
            ..CombinedPolicyParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn attention_schedule_toggles_on_dwell() {
        let mut head = HeadTracker::new(Vec2::zeros(), 0.8, HeadParams::default());
        let drones = [Vec2::new(-0.5, 0.5), Vec2::new(0.5, 0.5)];
        head.observe(&drones, 0.0);
        let mut switches = Vec::new();
        let mut last = head.attended();
        for k in 1..=400 {
            head.observe(&drones, 0.01);
            if head.attended() != last {
                switches.push(k as f64 * 0.01);
                last = head.attended();
            }
        }
        assert_eq!(switches.len(), 5);
        for (i, t) in switches.iter().enumerate() {
            assert!((t - 0.8 * (i + 1) as f64).abs() < 1e-9, "{switches:?}");
        }
    }

    #[test]
    fn single_drone_head_converges() {
        let mut head = HeadTracker::new(Vec2::zeros(), 0.8, HeadParams::default()).with_yaw(0.0);
        let drone = [Vec2::new(0.2, 0.5)];
        let bearing = 0.5f64.atan2(0.2);
        let mut pose = head.observe(&drone, 0.0);
        for _ in 0..300 {
            pose = head.observe(&drone, 0.01);
            assert_eq!(head.attended(), 0);
        }
        assert!((pose.yaw - bearing).abs() < 1e-6);
    }

    #[test]
    fn yaw_lag_is_first_order() {
        let params = HeadParams::default();
        let mut head = HeadTracker::new(Vec2::zeros(), 0.8, params.clone()).with_yaw(0.0);
        let drone = [Vec2::new(0.0, 1.0)];
        let initial_err = PI / 2.0;
        // τ = 0.15 s is exactly 15 steps of 0.01 s.
        let mut pose = head.observe(&drone, 0.0);
        for _ in 0..15 {
            pose = head.observe(&drone, 0.01);
        }
        let err = PI / 2.0 - pose.yaw;
        assert_relative_eq!(err / initial_err, (-1.0f64).exp(), epsilon = 1e-12);
        let p = pose.position();
        assert_relative_eq!((p.xy()).norm(), params.sway_lever, epsilon = 1e-12);
    }
}
