//! Deterministic fixed-step landing world.
//!
//! Drones hover at the start height, then descend vertically at a constant
//! speed with their XY locked. Each pad is a velocity-tracking hand plant with
//! acceleration and speed limits. When a drone's legs come within the
//! shutdown gap of its pad surface the motors cut and the touchdown is
//! recorded. Drone `i` is caught by pad `i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::condition::{ConditionSpec, SpeedClass};
use crate::error::{domain, Error, Result};
use crate::geometry::{downhill_direction, plate_height_at, tilt_angle, Vec2, Vec3};
use crate::photometry::PhotometricParams;
use crate::policies::{HeadPose, HeadTracker, PadObservation, PadPolicy};
use crate::tactor_array::{
    raw_frame, step_frame, ActuatorParams, PadGeometry, PadPose, TactileFrame,
};
use crate::trial_log::{DroneOutcome, TrialHeader, TrialLog};

/// Largest plate tilt the hand plant accepts, rad.
pub const MAX_TILT: f64 = 0.35;
/// Tilt above which the final approach drifts downhill, rad.
pub const GROUND_EFFECT_TILT_THRESHOLD: f64 = 0.02;
/// Operator position in the world XY plane; drones are placed along +Y.
pub const OPERATOR_XY: [f64; 2] = [0.0, 0.0];

#[derive(Debug, Clone, PartialEq)]
pub struct DroneState {
    pub id: usize,
    pub position: Vec3,
    /// m/s; zero once the motors are off.
    pub descent_speed: f64,
    pub led_on: bool,
    pub motors_on: bool,
    /// Vertical distance from the body origin (and LED) down to the leg tips, m.
    pub leg_offset: f64,
}

impl DroneState {
    pub fn new(id: usize, position: Vec3, descent_speed: f64) -> Self {
        DroneState {
            id,
            position,
            descent_speed,
            led_on: true,
            motors_on: true,
            leg_offset: 0.02,
        }
    }

    pub fn xy(&self) -> Vec2 {
        self.position.xy()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PadState {
    pub id: usize,
    pub center: Vec3,
    /// (roll, pitch), rad.
    pub tilt: Vec2,
    /// Horizontal velocity, m/s.
    pub velocity: Vec2,
}

impl PadState {
    pub fn pose(&self) -> PadPose {
        PadPose {
            center: self.center,
            tilt: self.tilt,
        }
    }
}

/// Geometry, timing and plant limits of one landing scenario.
///
/// `drone_count` and `speed_class` are overwritten per condition by
/// [`ScenarioSpec::for_condition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub drone_count: u8,
    pub speed_class: SpeedClass,
    /// Drone hover height before descent, m.
    pub start_height: f64,
    /// Half-width of the square spawn jitter, m.
    pub spawn_jitter: f64,
    pub two_drone_separation: f64,
    /// Leg-to-plate gap at which motors shut down, m.
    pub shutdown_gap: f64,
    /// Distance of the nominal drone position in front of the operator, m.
    pub nominal_offset: f64,
    pub dt: f64,
    /// Touchdown drift per radian of plate tilt, m/rad.
    pub ground_effect_gain: f64,
    pub max_hand_speed: f64,
    pub hand_accel_limit: f64,
    /// Height at which the operator holds the pads, m.
    pub pad_height: f64,
    /// Static plate tilt (roll, pitch) applied to every pad, rad.
    pub pad_tilt: [f64; 2],
    pub leg_offset: f64,
    pub plate_radius: f64,
    pub ring_radius: f64,
    pub photometry: PhotometricParams,
    pub actuator: ActuatorParams,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            drone_count: 1,
            speed_class: SpeedClass::Slow,
            start_height: 2.0,
            spawn_jitter: 0.06,
            two_drone_separation: 1.0,
            shutdown_gap: 0.005,
            nominal_offset: 0.5,
            dt: 0.01,
            ground_effect_gain: 0.02,
            max_hand_speed: 0.5,
            hand_accel_limit: 3.0,
            pad_height: 1.0,
            pad_tilt: [0.0, 0.0],
            leg_offset: 0.02,
            plate_radius: 0.080,
            ring_radius: 0.040,
            photometry: PhotometricParams::default(),
            actuator: ActuatorParams::default(),
        }
    }
}

impl ScenarioSpec {
    pub fn for_condition(&self, condition: &ConditionSpec) -> ScenarioSpec {
        ScenarioSpec {
            drone_count: condition.drone_count,
            speed_class: condition.speed_class,
            ..self.clone()
        }
    }

    pub fn descent_speed(&self) -> f64 {
        self.speed_class.descent_speed()
    }

    /// Simulated-time budget after which a trial is abandoned, s.
    pub fn timeout(&self) -> f64 {
        3.0 * self.start_height / self.descent_speed()
    }

    pub fn geometry(&self) -> Result<PadGeometry> {
        PadGeometry::new(self.plate_radius, self.ring_radius)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(1..=2).contains(&self.drone_count) {
            return cfg(format!(
                "drone_count must be 1 or 2, got {}",
                self.drone_count
            ));
        }
        let positive = [
            ("dt", self.dt),
            ("shutdown_gap", self.shutdown_gap),
            ("start_height", self.start_height),
            ("max_hand_speed", self.max_hand_speed),
            ("hand_accel_limit", self.hand_accel_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return cfg(format!("{name} must be > 0, got {v}"));
            }
        }
        let non_negative = [
            ("spawn_jitter", self.spawn_jitter),
            ("two_drone_separation", self.two_drone_separation),
            ("ground_effect_gain", self.ground_effect_gain),
            ("leg_offset", self.leg_offset),
            ("pad_height", self.pad_height),
            ("nominal_offset", self.nominal_offset),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return cfg(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.pad_tilt.iter().any(|t| !(t.abs() <= MAX_TILT)) {
            return cfg(format!(
                "pad_tilt components must be within ±{MAX_TILT} rad"
            ));
        }
        if self.start_height - self.leg_offset - self.pad_height <= self.shutdown_gap {
            return cfg("drones would spawn already inside the shutdown gap".into());
        }
        self.geometry()?;
        self.photometry.validate()?;
        if !(self.actuator.lag_time_constant >= 0.0) {
            return cfg("lag_time_constant must be >= 0".into());
        }
        Ok(())
    }

    /// Nominal drone XY positions (before jitter), one per drone.
    pub fn nominal_positions(&self) -> Vec<Vec2> {
        let y = OPERATOR_XY[1] + self.nominal_offset;
        match self.drone_count {
            1 => vec![Vec2::new(OPERATOR_XY[0], y)],
            _ => {
                let h = self.two_drone_separation / 2.0;
                vec![
                    Vec2::new(OPERATOR_XY[0] - h, y),
                    Vec2::new(OPERATOR_XY[0] + h, y),
                ]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Touchdown {
        drone: usize,
        pad: usize,
        t: f64,
        /// Touchdown point in world XY, including ground-effect drift.
        position: Vec2,
        /// Plate center → touchdown point, pad frame.
        displacement: Vec2,
    },
    Timeout {
        t: f64,
    },
}

/// Full simulation state of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub spec: ScenarioSpec,
    pub geometry: PadGeometry,
    pub step_index: u64,
    pub drones: Vec<DroneState>,
    pub pads: Vec<PadState>,
    pub frames: Vec<TactileFrame>,
    pub outcomes: Vec<Option<DroneOutcome>>,
    pub timed_out: bool,
}

impl World {
    pub fn t(&self) -> f64 {
        self.step_index as f64 * self.spec.dt
    }

    pub fn all_landed(&self) -> bool {
        self.outcomes.iter().all(Option::is_some)
    }

    pub fn finished(&self) -> bool {
        self.all_landed() || self.timed_out
    }

    /// Leg-to-plate gap of drone `i` over its own pad.
    pub fn leg_gap(&self, i: usize) -> f64 {
        let d = &self.drones[i];
        let pad = &self.pads[i];
        d.position.z - d.leg_offset - plate_height_at(pad.center, pad.tilt, d.xy())
    }
}

/// Per-trial stream for the world itself; policies get streams 1, 2, ….
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Place drones at the start height over jittered nominal positions and pads
/// at rest beneath the nominal positions.
pub fn spawn_trial(spec: &ScenarioSpec, seed: u64) -> Result<World> {
    spec.validate()?;
    let geometry = spec.geometry()?;
    let mut rng = trial_rng(seed, 0);
    let nominal = spec.nominal_positions();
    let mut drones = Vec::with_capacity(nominal.len());
    let mut pads = Vec::with_capacity(nominal.len());
    for (i, home) in nominal.iter().enumerate() {
        let jx: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let jy: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let xy = home + Vec2::new(jx, jy) * spec.spawn_jitter;
        let mut d = DroneState::new(
            i,
            Vec3::new(xy.x, xy.y, spec.start_height),
            spec.descent_speed(),
        );
        d.leg_offset = spec.leg_offset;
        drones.push(d);
        pads.push(PadState {
            id: i,
            center: Vec3::new(home.x, home.y, spec.pad_height),
            tilt: Vec2::new(spec.pad_tilt[0], spec.pad_tilt[1]),
            velocity: Vec2::zeros(),
        });
    }
    let n = drones.len();
    Ok(World {
        spec: spec.clone(),
        geometry,
        step_index: 0,
        drones,
        pads,
        frames: vec![TactileFrame::silent(0.0); n],
        outcomes: vec![None; n],
        timed_out: false,
    })
}

fn clamp_norm(v: Vec2, max: f64) -> Vec2 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Advance the world by one `dt`.
pub fn step(world: &mut World, commands: &[Vec2]) -> Result<Vec<Event>> {
    if commands.len() != world.pads.len() {
        return Err(domain(format!(
            "expected {} pad commands, got {}",
            world.pads.len(),
            commands.len()
        )));
    }
    if commands
        .iter()
        .any(|c| !(c.x.is_finite() && c.y.is_finite()))
    {
        return Err(domain("non-finite pad command"));
    }
    let spec = &world.spec;
    let dt = spec.dt;
    let max_dv = spec.hand_accel_limit * dt;

    // Commands are capped first so the accelerated velocity stays inside the speed disc.
    for (pad, cmd) in world.pads.iter_mut().zip(commands) {
        let target = clamp_norm(*cmd, spec.max_hand_speed);
        pad.velocity += clamp_norm(target - pad.velocity, max_dv);
        pad.center.x += pad.velocity.x * dt;
        pad.center.y += pad.velocity.y * dt;
    }

    world.step_index += 1;
    let t = world.t();
    let mut events = Vec::new();

    for i in 0..world.drones.len() {
        if !world.drones[i].motors_on {
            continue;
        }
        let speed = world.drones[i].descent_speed;
        world.drones[i].position.z -= speed * dt;
        if world.leg_gap(i) < spec.shutdown_gap {
            let pad = &world.pads[i];
            let drift = match downhill_direction(pad.tilt) {
                Some(dir) if tilt_angle(pad.tilt) > GROUND_EFFECT_TILT_THRESHOLD => {
                    dir * (spec.ground_effect_gain * tilt_angle(pad.tilt))
                }
                _ => Vec2::zeros(),
            };
            let drone = &mut world.drones[i];
            drone.motors_on = false;
            drone.descent_speed = 0.0;
            let position = drone.xy() + drift;
            drone.position.x = position.x;
            drone.position.y = position.y;
            let displacement = position - pad.center.xy();
            world.outcomes[i] = Some(DroneOutcome {
                drone: drone.id,
                pad: pad.id,
                touchdown_x: position.x,
                touchdown_y: position.y,
                t,
                disp_x: displacement.x,
                disp_y: displacement.y,
            });
            events.push(Event::Touchdown {
                drone: drone.id,
                pad: pad.id,
                t,
                position,
                displacement,
            });
        }
    }

    for (frame, pad) in world.frames.iter_mut().zip(&world.pads) {
        let target = raw_frame(
            &world.drones,
            &pad.pose(),
            &world.geometry,
            &spec.photometry,
        )?;
        let mut next = step_frame(frame, &target, dt, &spec.actuator)?;
        next.t = t;
        *frame = next;
    }

    if !world.all_landed() && t >= spec.timeout() - 0.5 * dt {
        world.timed_out = true;
        events.push(Event::Timeout { t });
    }
    Ok(events)
}

/// Which drone each pad's operator may see this step.
fn observations<'a>(
    world: &'a World,
    sees_drone: bool,
    attended: Option<usize>,
) -> Vec<PadObservation<'a>> {
    let operator = Vec2::new(OPERATOR_XY[0], OPERATOR_XY[1]);
    world
        .pads
        .iter()
        .enumerate()
        .map(|(i, pad)| PadObservation {
            t: world.t(),
            pad_xy: pad.center.xy(),
            operator_xy: operator,
            frame: &world.frames[i],
            drone_xy: sees_drone.then(|| world.drones[i].xy()),
            attended: attended.is_none_or(|a| a == i),
        })
        .collect()
}

/// Run one trial to completion (all touchdowns or timeout).
///
/// `policies` holds one controller per pad. Under tactile-only feedback the
/// policies never receive drone coordinates. `head`, when given, models the
/// operator's gaze switching between drones and produces the head samples.
pub fn run_trial(
    scenario: &ScenarioSpec,
    condition: &ConditionSpec,
    policies: &mut [Box<dyn PadPolicy>],
    mut head: Option<&mut HeadTracker>,
    seed: u64,
) -> Result<TrialLog> {
    condition.validate()?;
    let spec = scenario.for_condition(condition);
    let mut world = spawn_trial(&spec, seed)?;
    if policies.len() != world.pads.len() {
        return Err(domain(format!(
            "need one policy per pad ({}), got {}",
            world.pads.len(),
            policies.len()
        )));
    }
    let mut rngs: Vec<ChaCha8Rng> = (0..policies.len())
        .map(|i| trial_rng(seed, 1 + i as u64))
        .collect();
    let sees_drone = condition.feedback.sees_drone();

    let mut log = TrialLog::new(TrialHeader::new(*condition, seed, spec.clone()));
    let mut head_pose: Option<HeadPose> = head
        .as_deref_mut()
        .map(|h| h.observe(&drone_xys(&world), 0.0));
    log.push_sample(&world, head_pose.as_ref());

    while !world.finished() {
        let attended = head.as_ref().map(|h| h.attended());
        let obs = observations(&world, sees_drone, attended);
        let commands: Vec<Vec2> = policies
            .iter_mut()
            .zip(rngs.iter_mut())
            .zip(&obs)
            .map(|((p, rng), o)| p.command(o, rng, spec.dt))
            .collect();
        drop(obs);
        step(&mut world, &commands)?;
        if let Some(h) = head.as_deref_mut() {
            head_pose = Some(h.observe(&drone_xys(&world), spec.dt));
        }
        log.push_sample(&world, head_pose.as_ref());
    }
    log.finish(&world);
    Ok(log)
}

fn drone_xys(world: &World) -> Vec<Vec2> {
    world.drones.iter().map(DroneState::xy).collect()
}
