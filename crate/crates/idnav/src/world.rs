//! Deterministic 2D maze world: map loading, differential-drive kinematics
//! with swept collision, ray-cast laser/sonar, the door-marker camera model
//! and door sealing once a marker has been passed.
//!
//! Map files are line oriented:
//! ```text
//! # comment
//! bounds xmin ymin xmax ymax
//! start x y heading_deg
//! wall x1 y1 x2 y2
//! door x1 y1 x2 y2 marker_order
//! ```
//! All units are metres and degrees.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{
    crossing_parameter, point_segment_distance, ray_segment_distance, Segment, Vec2,
};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("map parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("degenerate segment at line {line}")]
    Degenerate { line: usize },
    #[error("map validation failed: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub pos: Vec2,
    /// Heading in degrees, counter-clockwise positive, 0 = +x.
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Door {
    pub opening: Segment,
    pub order: u32,
    /// The marker plane has been crossed; the marker is retired.
    pub crossed: bool,
    /// The doorway is walled off. Sealing waits until the robot disc is
    /// clear of the opening so the new wall never traps it.
    pub sealed: bool,
    /// Sign of the side of the opening the robot crossed to.
    far_side: f64,
}

impl Door {
    /// Cyan marker sits at the middle of the doorway plane.
    pub fn marker(&self) -> Vec2 {
        self.opening.midpoint()
    }

    fn side(&self, p: Vec2) -> f64 {
        (p - self.opening.a).cross(self.opening.b - self.opening.a).signum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    /// xmin, ymin, xmax, ymax.
    pub bounds: [f64; 4],
    pub walls: Vec<Segment>,
    pub doors: Vec<Door>,
    pub start: Pose,
}

impl WorldMap {
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let mut bounds = None;
        let mut start = None;
        let mut walls = Vec::new();
        let mut doors = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let nums = |need: usize| -> Result<Vec<f64>, MapError> {
                if toks.len() != need + 1 {
                    return Err(MapError::Parse {
                        line: line_no,
                        msg: format!("{} expects {need} fields", toks[0]),
                    });
                }
                toks[1..]
                    .iter()
                    .map(|t| {
                        t.parse::<f64>().map_err(|e| MapError::Parse {
                            line: line_no,
                            msg: format!("bad number {t:?}: {e}"),
                        })
                    })
                    .collect()
            };
            match toks[0] {
                "bounds" => {
                    let v = nums(4)?;
                    bounds = Some([v[0], v[1], v[2], v[3]]);
                }
                "start" => {
                    let v = nums(3)?;
                    start = Some(Pose {
                        pos: Vec2::new(v[0], v[1]),
                        heading: v[2],
                    });
                }
                "wall" => {
                    let v = nums(4)?;
                    let seg = Segment::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]));
                    if seg.length() < 1e-9 {
                        return Err(MapError::Degenerate { line: line_no });
                    }
                    walls.push(seg);
                }
                "door" => {
                    let v = nums(5)?;
                    let seg = Segment::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]));
                    if seg.length() < 1e-9 {
                        return Err(MapError::Degenerate { line: line_no });
                    }
                    if v[4] < 0.0 || v[4].fract() != 0.0 {
                        return Err(MapError::Parse {
                            line: line_no,
                            msg: "marker_order must be a nonnegative integer".into(),
                        });
                    }
                    doors.push(Door {
                        opening: seg,
                        order: v[4] as u32,
                        crossed: false,
                        sealed: false,
                        far_side: 0.0,
                    });
                }
                other => {
                    return Err(MapError::Parse {
                        line: line_no,
                        msg: format!("unknown record {other:?}"),
                    });
                }
            }
        }
        let bounds = bounds.ok_or_else(|| MapError::Validation("missing bounds".into()))?;
        let start = start.ok_or_else(|| MapError::Validation("missing start".into()))?;
        if walls.is_empty() {
            return Err(MapError::Validation("no walls".into()));
        }
        if doors.is_empty() {
            return Err(MapError::Validation(
                "no door markers; room progression undefined".into(),
            ));
        }
        Ok(WorldMap {
            bounds,
            walls,
            doors,
            start,
        })
    }

    pub fn load(path: &Path) -> Result<Self, MapError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "bounds {} {} {} {}",
            self.bounds[0], self.bounds[1], self.bounds[2], self.bounds[3]
        )
        .unwrap();
        writeln!(
            out,
            "start {} {} {}",
            self.start.pos.x, self.start.pos.y, self.start.heading
        )
        .unwrap();
        for w in &self.walls {
            writeln!(out, "wall {} {} {} {}", w.a.x, w.a.y, w.b.x, w.b.y).unwrap();
        }
        for d in &self.doors {
            writeln!(
                out,
                "door {} {} {} {} {}",
                d.opening.a.x, d.opening.a.y, d.opening.b.x, d.opening.b.y, d.order
            )
            .unwrap();
        }
        out
    }

    /// Every segment that blocks motion and sensing: walls plus sealed doors.
    pub fn solid_segments(&self) -> impl Iterator<Item = &Segment> {
        self.walls
            .iter()
            .chain(self.doors.iter().filter(|d| d.sealed).map(|d| &d.opening))
    }

    pub fn final_order(&self) -> u32 {
        self.doors.iter().map(|d| d.order).max().unwrap_or(0)
    }

    /// Update room progression for a move: retire the marker of any doorway
    /// plane that was crossed, and wall off a crossed doorway once the
    /// robot disc (of the given radius) is clear of it on the far side.
    /// Returns the orders passed and whether the final marker has now been
    /// passed.
    pub fn advance_progression(&mut self, from: Vec2, to: Vec2, radius: f64) -> ProgressionEvents {
        let mut events = ProgressionEvents::default();
        let final_order = self.final_order();
        for i in 0..self.doors.len() {
            if self.doors[i].sealed {
                continue;
            }
            if from != to && crossing_parameter(from, to, &self.doors[i].opening).is_some() {
                let first = !self.doors[i].crossed;
                self.doors[i].crossed = true;
                self.doors[i].far_side = self.doors[i].side(to);
                if first {
                    events.passed.push(self.doors[i].order);
                    if self.doors[i].order == final_order {
                        events.completed = true;
                    }
                }
            } else if self.doors[i].crossed
                && self.doors[i].side(to) == self.doors[i].far_side
                && point_segment_distance(to, &self.doors[i].opening) > radius + 0.05
            {
                self.doors[i].sealed = true;
            }
        }
        events
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProgressionEvents {
    pub passed: Vec<u32>,
    pub completed: bool,
}

/// Fixed simulator geometry and sensor envelope.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub control_dt: f64,
    pub substep_dt: f64,
    pub robot_radius: f64,
    pub laser_rays: usize,
    pub laser_max: f64,
    pub sonar_max: f64,
    pub camera_fov: f64,
    pub camera_range: f64,
    pub max_speed: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            control_dt: 0.5,
            substep_dt: 0.05,
            robot_radius: 0.25,
            laser_rays: 181,
            laser_max: 8.0,
            sonar_max: 5.0,
            camera_fov: 60.0,
            camera_range: 5.0,
            max_speed: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Robot {
    pub pose: Pose,
    pub radius: f64,
    /// Distance travelled during the current control interval.
    pub interval_distance: f64,
}

impl Robot {
    pub fn at(pose: Pose, cfg: &SimConfig) -> Self {
        Robot {
            pose,
            radius: cfg.robot_radius,
            // Sentinel so the very first interval does not read as a stall.
            interval_distance: 1.0,
        }
    }
}

/// Angular speed in degrees per second (CCW positive) and linear speed in
/// metres per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub angular: f64,
    pub linear: f64,
}

/// Advance the robot by `dt`. Heading integrates freely; translation stops
/// at wall contact (the swept disc never ends inside a wall). Returns the
/// distance actually travelled.
pub fn step_physics(world: &WorldMap, robot: &mut Robot, cmd: Command, dt: f64, cfg: &SimConfig) -> f64 {
    assert!(dt > 0.0);
    let linear = cmd.linear.clamp(-cfg.max_speed, cfg.max_speed);
    robot.pose.heading = wrap_deg(robot.pose.heading + cmd.angular * dt);
    let step = linear * dt;
    if step == 0.0 {
        return 0.0;
    }
    let dir = Vec2::from_heading_deg(robot.pose.heading) * step.signum();
    let want = step.abs();
    let free = free_travel(world, robot.pose.pos, dir, want, robot.radius);
    robot.pose.pos = robot.pose.pos + dir * free;
    robot.interval_distance += free;
    free
}

// Longest prefix of the move that keeps the disc clear of every solid
// segment, found by bisection against a point-to-segment clearance test.
// A pose already in contact may still move as long as the move does not
// deepen the contact.
fn free_travel(world: &WorldMap, from: Vec2, dir: Vec2, want: f64, radius: f64) -> f64 {
    let penetration = |p: Vec2| {
        world
            .solid_segments()
            .map(|seg| radius - point_segment_distance(p, seg))
            .fold(0.0f64, f64::max)
    };
    let allowance = penetration(from).max(0.0) + 1e-9;
    let ok = |d: f64| penetration(from + dir * d) <= allowance;
    if ok(want) {
        return want;
    }
    if !ok(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, want);
    for _ in 0..32 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn wrap_deg(mut h: f64) -> f64 {
    while h > 180.0 {
        h -= 360.0;
    }
    while h <= -180.0 {
        h += 360.0;
    }
    h
}

/// Frontal 180-degree scan. Index 0 is the leftmost ray; scan angles run
/// from -90 (left) to +90 (right) in the sector convention used by the
/// antigen table, where sectors 1-2 are the robot's left.
#[derive(Debug, Clone)]
pub struct LaserScan {
    pub ranges: Vec<f64>,
}

impl LaserScan {
    pub fn rays(&self) -> usize {
        self.ranges.len()
    }

    /// Scan angle of ray `i` in the sector convention (-90 left .. +90 right).
    pub fn scan_angle(&self, i: usize) -> f64 {
        -90.0 + 180.0 * i as f64 / (self.rays() - 1) as f64
    }

    /// Bearing of ray `i` relative to the heading, CCW positive (left > 0).
    pub fn bearing(&self, i: usize) -> f64 {
        -self.scan_angle(i)
    }

    /// 30-degree subsector 1..=6 containing ray `i`.
    pub fn sector(&self, i: usize) -> u8 {
        let a = self.scan_angle(i);
        (1.0 + ((a + 90.0) / 30.0).floor()).clamp(1.0, 6.0) as u8
    }
}

pub fn sense_laser(world: &WorldMap, pose: &Pose, cfg: &SimConfig) -> LaserScan {
    let mut ranges = Vec::with_capacity(cfg.laser_rays);
    for i in 0..cfg.laser_rays {
        let scan = -90.0 + 180.0 * i as f64 / (cfg.laser_rays - 1) as f64;
        let dir = Vec2::from_heading_deg(pose.heading - scan);
        ranges.push(cast(world, pose.pos, dir, cfg.laser_max));
    }
    LaserScan { ranges }
}

/// Eight rays fanned evenly across the rear 180-degree arc.
pub fn sense_sonar(world: &WorldMap, pose: &Pose, cfg: &SimConfig) -> Vec<f64> {
    (0..8)
        .map(|k| {
            let offset = 90.0 + 11.25 + 22.5 * k as f64;
            let dir = Vec2::from_heading_deg(pose.heading + offset);
            cast(world, pose.pos, dir, cfg.sonar_max)
        })
        .collect()
}

fn cast(world: &WorldMap, origin: Vec2, dir: Vec2, max: f64) -> f64 {
    world
        .solid_segments()
        .filter_map(|seg| ray_segment_distance(origin, dir, seg))
        .fold(max, f64::min)
        .max(1e-6)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobDetection {
    pub visible: bool,
    /// Bearing to the marker centre relative to the heading, CCW positive.
    pub bearing: f64,
}

impl BlobDetection {
    pub fn none() -> Self {
        BlobDetection {
            visible: false,
            bearing: 0.0,
        }
    }
}

/// Nearest unretired door marker inside the frontal field of view with a
/// clear line of sight.
pub fn sense_camera(world: &WorldMap, pose: &Pose, cfg: &SimConfig) -> BlobDetection {
    let mut best: Option<(f64, f64)> = None; // (distance, bearing)
    for door in world.doors.iter().filter(|d| !d.crossed) {
        let marker = door.marker();
        let rel = marker - pose.pos;
        let dist = rel.norm();
        if dist > cfg.camera_range || dist < 1e-9 {
            continue;
        }
        let bearing = wrap_deg(rel.y.atan2(rel.x).to_degrees() - pose.heading);
        if bearing.abs() > cfg.camera_fov / 2.0 {
            continue;
        }
        let dir = rel * (1.0 / dist);
        let occluded = world
            .solid_segments()
            .filter_map(|seg| ray_segment_distance(pose.pos, dir, seg))
            .any(|t| t < dist - 1e-9);
        if occluded {
            continue;
        }
        if best.map_or(true, |(d, _)| dist < d) {
            best = Some((dist, bearing));
        }
    }
    match best {
        Some((_, bearing)) => BlobDetection {
            visible: true,
            bearing,
        },
        None => BlobDetection::none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stall {
    None,
    Stalled,
    BlockedBehind,
}

/// Stall classification from the last control interval's odometry and the
/// mean rear sonar range.
/// Travel per control interval below which the robot counts as stalled.
/// Contact sliding can still creep a few nanometres per step, so an exact
/// zero test never fires in practice.
pub const STALL_DISTANCE: f64 = 0.01;

pub fn detect_stall(interval_distance: f64, rear_average: f64) -> Stall {
    if interval_distance > STALL_DISTANCE {
        Stall::None
    } else if rear_average < 0.35 {
        Stall::BlockedBehind
    } else {
        Stall::Stalled
    }
}
