//! Line-delimited JSON trial logs.
//!
//! A log is one header record, one sample record per simulation step
//! (starting at t = 0), and one trailing outcome record:
//!
//! ```text
//! {"type":"header","schema_version":1,"condition":{...},"seed":…,"dt":0.01,"scenario":{...}}
//! {"type":"sample","t":0.0,"drones":[{"id":0,"x":…,"y":…,"z":…,"led":true,"motors":true}],
//!  "pads":[{"id":0,"x":…,"y":…,"z":…,"tiltx":0.0,"tilty":0.0,"tactile":[…7…]}],"head":{…}}
//! {"type":"outcome","outcomes":[{"drone":0,"pad":0,"touchdown_x":…,"touchdown_y":…,"t":…,"disp_x":…,"disp_y":…}],"timed_out":false}
//! ```
//!
//! Lengths are metres, times seconds, angles radians, all in the world frame
//! except `disp_*`, which is pad frame (axes aligned with the world).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::condition::ConditionSpec;
use crate::error::{Error, Result};
use crate::flightworld::{ScenarioSpec, World};
use crate::geometry::{Vec2, Vec3};
use crate::policies::HeadPose;
use crate::tactor_array::Amplitudes;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHeader {
    pub schema_version: u32,
    pub condition: ConditionSpec,
    pub seed: u64,
    pub dt: f64,
    pub scenario: ScenarioSpec,
}

impl TrialHeader {
    pub fn new(condition: ConditionSpec, seed: u64, scenario: ScenarioSpec) -> Self {
        TrialHeader {
            schema_version: SCHEMA_VERSION,
            condition,
            seed,
            dt: scenario.dt,
            scenario,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSample {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub led: bool,
    pub motors: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadSample {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub tiltx: f64,
    pub tilty: f64,
    pub tactile: Amplitudes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub drones: Vec<DroneSample>,
    pub pads: Vec<PadSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<HeadPose>,
}

/// Touchdown of one drone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneOutcome {
    pub drone: usize,
    pub pad: usize,
    pub touchdown_x: f64,
    pub touchdown_y: f64,
    pub t: f64,
    pub disp_x: f64,
    pub disp_y: f64,
}

impl DroneOutcome {
    pub fn displacement(&self) -> Vec2 {
        Vec2::new(self.disp_x, self.disp_y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trailer {
    /// Touchdowns only; drones that never landed are absent.
    pub outcomes: Vec<DroneOutcome>,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Record {
    Header(TrialHeader),
    Sample(Sample),
    Outcome(Trailer),
}

/// In-memory form of one trial log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub header: TrialHeader,
    samples: Vec<Sample>,
    trailer: Option<Trailer>,
}

impl TrialLog {
    pub fn new(header: TrialHeader) -> Self {
        TrialLog {
            header,
            samples: Vec::new(),
            trailer: None,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn trailer(&self) -> Option<&Trailer> {
        self.trailer.as_ref()
    }

    pub fn drone_count(&self) -> usize {
        self.header.condition.drone_count as usize
    }

    /// Per-drone touchdown, indexed by drone id.
    pub fn outcomes(&self) -> Vec<Option<DroneOutcome>> {
        let mut out = vec![None; self.drone_count()];
        if let Some(tr) = &self.trailer {
            for o in &tr.outcomes {
                if let Some(slot) = out.get_mut(o.drone) {
                    *slot = Some(o.clone());
                }
            }
        }
        out
    }

    pub fn timed_out(&self) -> bool {
        self.trailer.as_ref().is_some_and(|t| t.timed_out)
    }

    pub fn push_sample(&mut self, world: &World, head: Option<&HeadPose>) {
        self.samples.push(sample_of(world, head));
    }

    pub fn finish(&mut self, world: &World) {
        self.trailer = Some(Trailer {
            outcomes: world.outcomes.iter().flatten().cloned().collect(),
            timed_out: world.timed_out,
        });
    }

    /// Pad center series of one pad.
    pub fn pad_track(&self, pad: usize) -> Vec<Vec3> {
        self.samples
            .iter()
            .filter_map(|s| s.pads.get(pad).map(|p| Vec3::new(p.x, p.y, p.z)))
            .collect()
    }

    pub fn drone_track(&self, drone: usize) -> Vec<Vec3> {
        self.samples
            .iter()
            .filter_map(|s| s.drones.get(drone).map(|d| Vec3::new(d.x, d.y, d.z)))
            .collect()
    }

    pub fn head_track(&self) -> Option<Vec<Vec3>> {
        self.samples
            .iter()
            .map(|s| s.head.map(|h| h.position()))
            .collect()
    }

    /// Samples up to and including the touchdown of `drone` (whole log if it
    /// never landed).
    pub fn landing_stage_len(&self, drone: usize) -> usize {
        self.samples
            .iter()
            .position(|s| s.drones.get(drone).is_some_and(|d| !d.motors))
            .map_or(self.samples.len(), |i| i + 1)
    }

    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        std::iter::once(Record::Header(self.header.clone()))
            .chain(self.samples.iter().cloned().map(Record::Sample))
            .chain(self.trailer.iter().cloned().map(Record::Outcome))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Parse a log. With `strict` off, malformed sample lines are skipped with
    /// a warning; header and trailer problems are always errors.
    pub fn parse(reader: impl BufRead, path: &Path, strict: bool) -> Result<TrialLog> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut log: Option<TrialLog> = None;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = match serde_json::from_str::<Record>(&line) {
                Ok(r) => r,
                Err(e) if strict || log.is_none() => return Err(parse_err(lineno, e.to_string())),
                Err(e) => {
                    log::warn!("{}:{lineno}: skipping corrupt record: {e}", path.display());
                    continue;
                }
            };
            match (rec, log.as_mut()) {
                (Record::Header(h), None) => {
                    if h.schema_version != SCHEMA_VERSION {
                        return Err(parse_err(
                            lineno,
                            format!("unsupported schema version {}", h.schema_version),
                        ));
                    }
                    log = Some(TrialLog::new(h));
                }
                (Record::Header(_), Some(_)) => {
                    return Err(parse_err(lineno, "duplicate header".into()))
                }
                (_, None) => {
                    return Err(parse_err(lineno, "first record must be the header".into()))
                }
                (_, Some(l)) if l.trailer.is_some() => {
                    return Err(parse_err(lineno, "record after outcome trailer".into()))
                }
                (Record::Sample(s), Some(l)) => l.samples.push(s),
                (Record::Outcome(t), Some(l)) => l.trailer = Some(t),
            }
        }
        let log = log.ok_or_else(|| parse_err(0, "empty log".into()))?;
        if log.trailer.is_none() {
            return Err(parse_err(0, "missing outcome trailer".into()));
        }
        Ok(log)
    }

    pub fn load(path: &Path, strict: bool) -> Result<TrialLog> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        TrialLog::parse(BufReader::new(f), path, strict)
    }
}

fn sample_of(world: &World, head: Option<&HeadPose>) -> Sample {
    Sample {
        t: world.t(),
        drones: world
            .drones
            .iter()
            .map(|d| DroneSample {
                id: d.id,
                x: d.position.x,
                y: d.position.y,
                z: d.position.z,
                led: d.led_on,
                motors: d.motors_on,
            })
            .collect(),
        pads: world
            .pads
            .iter()
            .zip(&world.frames)
            .map(|(p, f)| PadSample {
                id: p.id,
                x: p.center.x,
                y: p.center.y,
                z: p.center.z,
                tiltx: p.tilt.x,
                tilty: p.tilt.y,
                tactile: f.amplitudes,
            })
            .collect(),
        head: head.copied(),
    }
}
