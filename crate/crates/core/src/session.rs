//! Interactive session actor: one human-steered trial with server-side
//! information masking.
//!
//! The actor is transport-free. A server feeds it inbound messages and
//! timer ticks and forwards whatever outbound messages it returns.

use serde::{Deserialize, Serialize};

use crate::condition::{ConditionSpec, Feedback, SpeedClass};
use crate::error::{Error, Result};
use crate::flightworld::{spawn_trial, step, ScenarioSpec, World};
use crate::geometry::Vec2;
use crate::tactor_array::Amplitudes;
use crate::trial_log::{TrialHeader, TrialLog};

pub const DEFAULT_STREAM_RATE_HZ: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    StartTrial {
        condition: Feedback,
        speed: SpeedClass,
        drones: u8,
        #[serde(default)]
        seed: Option<u64>,
    },
    PadCmd {
        pad: usize,
        vx: f64,
        vy: f64,
    },
    EndSession,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Waiting,
    Descending,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneView {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    pub led: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadView {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub drone: usize,
    pub displacement_mm: f64,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    State {
        t: f64,
        drones: Vec<DroneView>,
        pads: Vec<PadView>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tactile: Option<Vec<Amplitudes>>,
        phase: Phase,
    },
    TrialResult {
        outcomes: Vec<ResultEntry>,
        #[serde(default)]
        timed_out: bool,
        /// Where the finished log can be downloaded, when served.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log: Option<String>,
    },
    Error {
        code: String,
        message: String,
    },
}

impl Outbound {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Outbound::Error {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub scenario: ScenarioSpec,
    pub stream_rate_hz: f64,
    /// Send drone altitude under tactile-only feedback.
    pub reveal_altitude_in_tactile: bool,
    /// Seed used when the client does not supply one.
    pub default_seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            scenario: ScenarioSpec::default(),
            stream_rate_hz: DEFAULT_STREAM_RATE_HZ,
            reveal_altitude_in_tactile: false,
            default_seed: 0,
        }
    }
}

/// Simulation steps per outbound state message, at least one.
pub fn steps_per_message(stream_rate_hz: f64, dt: f64) -> usize {
    ((1.0 / (stream_rate_hz * dt)).round() as usize).max(1)
}

#[derive(Debug)]
pub struct Session {
    id: String,
    config: SessionConfig,
    phase: Phase,
    condition: Option<ConditionSpec>,
    world: Option<World>,
    log: Option<TrialLog>,
    latched: Vec<Vec2>,
    ended: bool,
}

impl Session {
    pub fn new(id: impl Into<String>, config: SessionConfig) -> Result<Self> {
        if !(config.stream_rate_hz.is_finite() && config.stream_rate_hz > 0.0) {
            return Err(Error::Config("stream rate must be positive".into()));
        }
        config.scenario.validate()?;
        Ok(Session {
            id: id.into(),
            config,
            phase: Phase::Waiting,
            condition: None,
            world: None,
            log: None,
            latched: Vec::new(),
            ended: false,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn condition(&self) -> Option<ConditionSpec> {
        self.condition
    }

    pub fn world(&self) -> Option<&World> {
        self.world.as_ref()
    }

    /// Set once the client sent `end_session`.
    pub fn ended(&self) -> bool {
        self.ended
    }

    pub fn steps_per_message(&self) -> usize {
        steps_per_message(self.config.stream_rate_hz, self.config.scenario.dt)
    }

    /// Wall-clock period between ticks, seconds.
    pub fn tick_period(&self) -> f64 {
        self.steps_per_message() as f64 * self.config.scenario.dt
    }

    /// The full unmasked log, available once the trial finished.
    pub fn finished_log(&self) -> Option<&TrialLog> {
        (self.phase == Phase::Finished)
            .then_some(self.log.as_ref())
            .flatten()
    }

    pub fn handle(&mut self, msg: Inbound) -> Vec<Outbound> {
        match msg {
            Inbound::StartTrial {
                condition,
                speed,
                drones,
                seed,
            } => self.start_trial(condition, speed, drones, seed),
            Inbound::PadCmd { pad, vx, vy } => self.pad_command(pad, vx, vy).into_iter().collect(),
            Inbound::EndSession => {
                self.ended = true;
                Vec::new()
            }
        }
    }

    /// Parse and handle one text frame.
    pub fn handle_text(&mut self, text: &str) -> Vec<Outbound> {
        match serde_json::from_str::<Inbound>(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => vec![Outbound::error("bad_message", e.to_string())],
        }
    }

    fn start_trial(
        &mut self,
        feedback: Feedback,
        speed: SpeedClass,
        drones: u8,
        seed: Option<u64>,
    ) -> Vec<Outbound> {
        match self.phase {
            Phase::Descending => {
                return vec![Outbound::error(
                    "already_started",
                    "a trial is already running",
                )]
            }
            Phase::Finished => {
                return vec![Outbound::error(
                    "session_finished",
                    "this session's trial has finished",
                )]
            }
            Phase::Waiting => {}
        }
        let condition = match ConditionSpec::new(feedback, speed, drones) {
            Ok(c) => c,
            Err(e) => return vec![Outbound::error("invalid_condition", e.to_string())],
        };
        let spec = self.config.scenario.for_condition(&condition);
        let seed = seed.unwrap_or(self.config.default_seed);
        let world = match spawn_trial(&spec, seed) {
            Ok(w) => w,
            Err(e) => return vec![Outbound::error("invalid_condition", e.to_string())],
        };
        let mut log = TrialLog::new(TrialHeader::new(condition, seed, spec));
        log.push_sample(&world, None);
        self.latched = vec![Vec2::zeros(); world.pads.len()];
        self.condition = Some(condition);
        self.world = Some(world);
        self.log = Some(log);
        self.phase = Phase::Descending;
        vec![self.state_message()]
    }

    fn pad_command(&mut self, pad: usize, vx: f64, vy: f64) -> Option<Outbound> {
        match self.phase {
            Phase::Waiting => return Some(Outbound::error("not_started", "no trial is running")),
            Phase::Finished => {
                return Some(Outbound::error(
                    "trial_finished",
                    "trial finished; pad command ignored",
                ))
            }
            Phase::Descending => {}
        }
        if pad >= self.latched.len() {
            return Some(Outbound::error(
                "unknown_pad",
                format!("no pad with id {pad}"),
            ));
        }
        if !(vx.is_finite() && vy.is_finite()) {
            return Some(Outbound::error(
                "invalid_command",
                "pad velocity must be finite",
            ));
        }
        let v = Vec2::new(vx, vy);
        let max = self.config.scenario.max_hand_speed;
        self.latched[pad] = if v.norm() > max {
            v * (max / v.norm())
        } else {
            v
        };
        None
    }

    /// Latched command of `pad` as it will be applied at the next tick.
    pub fn latched_command(&self, pad: usize) -> Option<Vec2> {
        self.latched.get(pad).copied()
    }

    /// Advance by one stream period. Returns nothing outside a running trial.
    pub fn tick(&mut self) -> Result<Vec<Outbound>> {
        if self.phase != Phase::Descending {
            return Ok(Vec::new());
        }
        let n = self.steps_per_message();
        let world = self.world.as_mut().expect("descending session has a world");
        let log = self.log.as_mut().expect("descending session has a log");
        for _ in 0..n {
            step(world, &self.latched)?;
            log.push_sample(world, None);
            if world.finished() {
                break;
            }
        }
        if !world.finished() {
            return Ok(vec![self.state_message()]);
        }
        log.finish(world);
        self.phase = Phase::Finished;
        let outcomes = world
            .outcomes
            .iter()
            .flatten()
            .map(|o| ResultEntry {
                drone: o.drone,
                displacement_mm: o.displacement().norm() * 1000.0,
                dx: o.disp_x,
                dy: o.disp_y,
            })
            .collect();
        let timed_out = world.timed_out;
        Ok(vec![
            self.state_message(),
            Outbound::TrialResult {
                outcomes,
                timed_out,
                log: None,
            },
        ])
    }

    /// Current world state with fields hidden per feedback condition.
    pub fn state_message(&self) -> Outbound {
        let (Some(world), Some(condition)) = (&self.world, self.condition) else {
            return Outbound::State {
                t: 0.0,
                drones: Vec::new(),
                pads: Vec::new(),
                tactile: None,
                phase: self.phase,
            };
        };
        let sees = condition.feedback.sees_drone();
        let show_z = sees || self.config.reveal_altitude_in_tactile;
        Outbound::State {
            t: world.t(),
            drones: world
                .drones
                .iter()
                .map(|d| DroneView {
                    id: d.id,
                    x: sees.then_some(d.position.x),
                    y: sees.then_some(d.position.y),
                    z: show_z.then_some(d.position.z),
                    led: d.led_on,
                })
                .collect(),
            pads: world
                .pads
                .iter()
                .map(|p| PadView {
                    id: p.id,
                    x: p.center.x,
                    y: p.center.y,
                })
                .collect(),
            tactile: condition
                .feedback
                .feels_pad()
                .then(|| world.frames.iter().map(|f| f.amplitudes).collect()),
            phase: self.phase,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> Session {
        Session::new("s", SessionConfig::default()).unwrap()
    }

    fn start(s: &mut Session, feedback: Feedback, drones: u8) -> Vec<Outbound> {
        s.handle(Inbound::StartTrial {
            condition: feedback,
            speed: SpeedClass::Fast,
            drones,
            seed: Some(3),
        })
    }

    fn is_error(out: &[Outbound], code: &str) -> bool {
        matches!(out, [Outbound::Error { code: c, .. }] if c == code)
    }

    #[test]
    fn rate_arithmetic() {
        assert_eq!(steps_per_message(50.0, 0.01), 2);
        assert_eq!(steps_per_message(100.0, 0.01), 1);
        assert_eq!(steps_per_message(500.0, 0.01), 1);
        assert_eq!(session().tick_period(), 0.02);
    }

    #[test]
    fn start_acknowledges_with_state() {
        let mut s = session();
        let out = start(&mut s, Feedback::VisualTactile, 1);
        assert!(matches!(
            out.as_slice(),
            [Outbound::State {
                phase: Phase::Descending,
                ..
            }]
        ));
        assert_eq!(s.phase(), Phase::Descending);
    }

    #[test]
    fn duplicate_start_is_rejected_without_state_change() {
        let mut s = session();
        start(&mut s, Feedback::Visual, 1);
        s.tick().unwrap();
        let before = s.world().unwrap().clone();
        assert!(is_error(
            &start(&mut s, Feedback::Tactile, 2),
            "already_started"
        ));
        assert_eq!(s.world().unwrap(), &before);
        assert_eq!(s.condition().unwrap().feedback, Feedback::Visual);
    }

    #[test]
    fn tactile_condition_hides_drone_position() {
        let mut s = session();
        start(&mut s, Feedback::Tactile, 2);
        let json = serde_json::to_value(s.tick().unwrap()[0].clone()).unwrap();
        for d in json["drones"].as_array().unwrap() {
            assert!(d.get("x").is_none() && d.get("y").is_none() && d.get("z").is_none());
        }
        assert_eq!(json["tactile"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn altitude_flag_reveals_only_z() {
        let cfg = SessionConfig {
            reveal_altitude_in_tactile: true,
            ..SessionConfig::default()
        };
        let mut s = Session::new("s", cfg).unwrap();
        start(&mut s, Feedback::Tactile, 1);
        let json = serde_json::to_value(s.state_message()).unwrap();
        let d = &json["drones"][0];
        assert!(d.get("x").is_none() && d["z"].as_f64().is_some());
    }

    #[test]
    fn visual_condition_hides_tactile() {
        let mut s = session();
        start(&mut s, Feedback::Visual, 1);
        let json = serde_json::to_value(s.tick().unwrap()[0].clone()).unwrap();
        assert!(json.get("tactile").is_none());
        assert!(json["drones"][0]["x"].as_f64().is_some());
    }

    #[test]
    fn pad_command_errors() {
        let mut s = session();
        assert!(is_error(
            &s.handle(Inbound::PadCmd {
                pad: 0,
                vx: 0.0,
                vy: 0.0
            }),
            "not_started"
        ));
        start(&mut s, Feedback::VisualTactile, 1);
        assert!(is_error(
            &s.handle(Inbound::PadCmd {
                pad: 1,
                vx: 0.0,
                vy: 0.0
            }),
            "unknown_pad"
        ));
        assert!(is_error(
            &s.handle(Inbound::PadCmd {
                pad: 0,
                vx: f64::NAN,
                vy: 0.0
            }),
            "invalid_command"
        ));
        assert!(is_error(
            &s.handle_text("{\"type\":\"wiggle\"}"),
            "bad_message"
        ));
    }

    #[test]
    fn large_command_is_clamped() {
        let mut s = session();
        start(&mut s, Feedback::VisualTactile, 1);
        s.handle(Inbound::PadCmd {
            pad: 0,
            vx: 10.0,
            vy: 0.0,
        });
        assert_eq!(s.latched_command(0).unwrap(), Vec2::new(0.5, 0.0));
    }

    #[test]
    fn last_command_in_a_tick_wins() {
        let mut s = session();
        start(&mut s, Feedback::VisualTactile, 1);
        s.handle(Inbound::PadCmd {
            pad: 0,
            vx: 0.3,
            vy: 0.0,
        });
        s.handle(Inbound::PadCmd {
            pad: 0,
            vx: 0.0,
            vy: -0.2,
        });
        let x0 = s.world().unwrap().pads[0].center;
        s.tick().unwrap();
        let x1 = s.world().unwrap().pads[0].center;
        assert_eq!(x1.x, x0.x);
        assert!(x1.y < x0.y);
    }

    #[test]
    fn zero_command_decelerates_to_rest() {
        let mut s = session();
        start(&mut s, Feedback::VisualTactile, 1);
        s.handle(Inbound::PadCmd {
            pad: 0,
            vx: 0.4,
            vy: 0.0,
        });
        for _ in 0..10 {
            s.tick().unwrap();
        }
        s.handle(Inbound::PadCmd {
            pad: 0,
            vx: 0.0,
            vy: 0.0,
        });
        let mut last = s.world().unwrap().pads[0].velocity.norm();
        for _ in 0..20 {
            s.tick().unwrap();
            let v = s.world().unwrap().pads[0].velocity.norm();
            assert!(v <= last);
            // Accel limit 3 m/s² over 2 steps of 10 ms.
            assert!(last - v <= 0.06 + 1e-12);
            last = v;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn completes_and_reports_displacement_from_log() {
        let mut s = session();
        start(&mut s, Feedback::VisualTactile, 1);
        let mut result = None;
        for _ in 0..10_000 {
            for m in s.tick().unwrap() {
                if let Outbound::TrialResult { outcomes, .. } = m {
                    result = Some(outcomes);
                }
            }
            if s.phase() == Phase::Finished {
                break;
            }
        }
        let outcomes = result.expect("trial finished");
        let log = s.finished_log().unwrap();
        let o = log.outcomes()[0].clone().unwrap();
        assert_eq!(
            outcomes[0].displacement_mm,
            o.displacement().norm() * 1000.0
        );
        assert!(is_error(
            &s.handle(Inbound::PadCmd {
                pad: 0,
                vx: 0.0,
                vy: 0.0
            }),
            "trial_finished"
        ));
        assert!(is_error(
            &start(&mut s, Feedback::Visual, 1),
            "session_finished"
        ));
        assert!(s.tick().unwrap().is_empty());
    }

    #[test]
    fn wire_format_shapes() {
        let m: Inbound = serde_json::from_str(
            r#"{"type":"start_trial","condition":"VT","speed":"slow","drones":2}"#,
        )
        .unwrap();
        assert_eq!(
            m,
            Inbound::StartTrial {
                condition: Feedback::VisualTactile,
                speed: SpeedClass::Slow,
                drones: 2,
                seed: None
            }
        );
        let e = serde_json::to_value(Outbound::error("x", "y")).unwrap();
        assert_eq!(
            e,
            serde_json::json!({"type":"error","code":"x","message":"y"})
        );
        let m: Inbound = serde_json::from_str(r#"{"type":"end_session"}"#).unwrap();
        assert_eq!(m, Inbound::EndSession);
    }
}
