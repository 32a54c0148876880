//! Sensor-to-antigen mapping, antibody action table and the RL verdict.
//!
//! Antigens 0-7 encode the environmental situation (objects left/centre/
//! right, open or confined space, stalls, door marker in view), each with a
//! fixed priority. Antibodies 0-15 are the robot's behaviours; fourteen are
//! fixed angular/linear pairs and three steer from the live scan (wander
//! toward the longest ray, away from the shortest ray, toward the marker).

use std::fmt::Write as _;

use thiserror::Error;

use crate::immune::AntigenPresentation;
use crate::world::{BlobDetection, Command, LaserScan, STALL_DISTANCE};

pub const NUM_ANTIGENS: usize = 8;
pub const NUM_ANTIBODIES: usize = 16;

/// Priority of each antigen; higher is more urgent.
pub const ANTIGEN_PRIORITIES: [u8; NUM_ANTIGENS] = [2, 2, 2, 0, 3, 4, 5, 1];

/// Maximum permitted speed M (m/s).
pub const MAX_SPEED: f64 = 2.0;
/// Minimum-laser threshold for the object antigens (m).
pub const OBJECT_RANGE: f64 = 0.55;
/// Average-laser threshold splitting open from confined space (m).
pub const OPEN_SPACE: f64 = 0.45;
/// Rear-sonar threshold for blocked-behind (m).
pub const REAR_BLOCKED: f64 = 0.35;
/// Magnitude of the RL reinforcement score tau.
pub const TAU: f64 = 0.05;
/// Distance per control interval that counts as real progress in open
/// space (m); slow or reversing gaits fall short of it.
pub const PROGRESS_DISTANCE: f64 = 0.2;
/// Steering gain (deg/s per degree of bearing error) for variable antibodies.
pub const STEER_GAIN: f64 = 1.5;
/// Saturation for variable angular commands (deg/s).
pub const STEER_LIMIT: f64 = 90.0;

#[derive(Debug, Error)]
pub enum BehaviorError {
    #[error("no presenting antigens")]
    EmptyPresentation,
    #[error("unknown antibody index {0}")]
    UnknownAntibody(usize),
}

/// Per-interval sensor summary.
#[derive(Debug, Clone)]
pub struct SensorMetrics {
    pub z_min: f64,
    pub z_av: f64,
    pub z_max: f64,
    /// Subsector (1..=6) containing the minimum laser ray.
    pub r_min: u8,
    /// Mean rear sonar range.
    pub e_av: f64,
    /// Distance travelled over the last control interval.
    pub distance: f64,
    pub marker: BlobDetection,
    /// Bearing of the maximum laser ray, CCW positive.
    pub bearing_z_max: f64,
    /// Bearing of the minimum laser ray, CCW positive.
    pub bearing_z_min: f64,
}

pub fn compute_metrics(
    laser: &LaserScan,
    sonar: &[f64],
    distance: f64,
    marker: BlobDetection,
) -> SensorMetrics {
    let n = laser.rays();
    let mut min_i = 0;
    let mut max_i = 0;
    let mut sum = 0.0;
    for i in 0..n {
        let r = laser.ranges[i];
        sum += r;
        if r < laser.ranges[min_i] {
            min_i = i;
        }
        if r > laser.ranges[max_i] {
            max_i = i;
        }
    }
    SensorMetrics {
        z_min: laser.ranges[min_i],
        z_av: sum / n as f64,
        z_max: laser.ranges[max_i],
        r_min: laser.sector(min_i),
        e_av: sonar.iter().sum::<f64>() / sonar.len() as f64,
        distance,
        marker,
        bearing_z_max: laser.bearing(max_i),
        bearing_z_min: laser.bearing(min_i),
    }
}

/// Presenting antigen set for the metrics, sorted ascending.
pub fn detect_antigens(m: &SensorMetrics) -> Vec<usize> {
    let mut set = Vec::with_capacity(4);
    if m.z_min < OBJECT_RANGE {
        match m.r_min {
            1 | 2 => set.push(0),
            3 | 4 => set.push(1),
            _ => set.push(2),
        }
    }
    if m.z_av >= OPEN_SPACE {
        set.push(3);
    } else {
        set.push(4);
    }
    if m.distance <= STALL_DISTANCE {
        set.push(5);
        if m.e_av < REAR_BLOCKED {
            set.push(6);
        }
    }
    if m.marker.visible {
        set.push(7);
    }
    set.sort_unstable();
    set
}

/// Dominant antigen: maximal priority, ties to the lowest index.
pub fn dominant_antigen(set: &[usize]) -> Result<AntigenPresentation, BehaviorError> {
    let d = set
        .iter()
        .copied()
        .max_by_key(|&a| (ANTIGEN_PRIORITIES[a], std::cmp::Reverse(a)))
        .ok_or(BehaviorError::EmptyPresentation)?;
    Ok(AntigenPresentation::new(set, d).expect("dominant drawn from set"))
}

fn steer(bearing_error: f64) -> f64 {
    (STEER_GAIN * bearing_error).clamp(-STEER_LIMIT, STEER_LIMIT)
}

/// Fixed angular/linear pairs for antibodies 0-10, 14, 15 (None marks the
/// variable-steering antibodies 11-13).
pub const FIXED_ACTIONS: [Option<(f64, f64)>; NUM_ANTIBODIES] = [
    Some((-90.0, -0.15)),         // 0  Reverse spin 1
    Some((-15.0, 0.06)),          // 1  Slow right 15
    Some((15.0, 0.06)),           // 2  Slow left 15
    Some((0.0, MAX_SPEED / 2.0)), // 3  Fast centre
    Some((15.0, MAX_SPEED / 2.0)), // 4  Fast left 15
    Some((-15.0, MAX_SPEED / 2.0)), // 5  Fast right 15
    Some((-35.0, 0.06)),          // 6  Slow right 35
    Some((35.0, 0.06)),           // 7  Slow left 35
    Some((35.0, MAX_SPEED / 2.0)), // 8  Fast left 35
    Some((-35.0, MAX_SPEED / 2.0)), // 9  Fast right 35
    Some((90.0, -0.15)),          // 10 Reverse spin 2
    None,                         // 11 Wander max
    None,                         // 12 Wander min
    None,                         // 13 Track blobs
    Some((-25.0, -0.15)),         // 14 Reverse 1
    Some((25.0, -0.15)),          // 15 Reverse 2
];

pub fn action_for(antibody: usize, m: &SensorMetrics) -> Result<Command, BehaviorError> {
    if antibody >= NUM_ANTIBODIES {
        return Err(BehaviorError::UnknownAntibody(antibody));
    }
    if let Some((angular, linear)) = FIXED_ACTIONS[antibody] {
        return Ok(Command { angular, linear });
    }
    Ok(match antibody {
        11 => Command {
            angular: steer(m.bearing_z_max),
            linear: MAX_SPEED,
        },
        12 => {
            // Turn toward the direction opposite the closest obstacle.
            let away = if m.bearing_z_min >= 0.0 {
                m.bearing_z_min - 180.0
            } else {
                m.bearing_z_min + 180.0
            };
            Command {
                angular: steer(away),
                linear: MAX_SPEED / 2.0,
            }
        }
        13 => Command {
            angular: steer(m.marker.bearing),
            linear: MAX_SPEED,
        },
        _ => unreachable!(),
    })
}

/// RL verdict: +TAU when the situation the dominant antigen flagged has
/// improved half a second later, -TAU otherwise. `progressed` reports
/// whether a doorway marker was passed during the interval.
pub fn score_outcome(
    before: &SensorMetrics,
    after: &SensorMetrics,
    dominant: usize,
    progressed: bool,
) -> f64 {
    let improved = match dominant {
        // Object antigens: backed away from the obstacle or cleared it.
        0 | 1 | 2 => after.z_min > before.z_min + 1e-9 || after.z_min >= OBJECT_RANGE,
        // Open space: still open, still obstacle free, and covering ground.
        3 => after.z_av >= OPEN_SPACE && after.z_min >= OBJECT_RANGE && after.distance >= PROGRESS_DISTANCE,
        // Confined space: gained room.
        4 => after.z_av > before.z_av + 1e-9,
        // Stalls: motion resumed.
        5 | 6 => after.distance > STALL_DISTANCE,
        // Marker in view: passed it, or closed on its centre line.
        7 => {
            progressed
                || (after.marker.visible
                    && after.distance > STALL_DISTANCE
                    && (after.marker.bearing.abs() < before.marker.bearing.abs() - 1e-9
                        || after.marker.bearing.abs() <= 5.0))
        }
        _ => false,
    };
    if improved {
        TAU
    } else {
        -TAU
    }
}

/// Machine-readable transcription of the antigen priorities, the fixed
/// antibody actions and the idiotope matrix, used by documentation tests.
pub fn tables_manifest() -> String {
    let mut out = String::new();
    for (i, p) in ANTIGEN_PRIORITIES.iter().enumerate() {
        writeln!(out, "antigen {i} priority {p}").unwrap();
    }
    for (i, act) in FIXED_ACTIONS.iter().enumerate() {
        match act {
            Some((a, l)) => writeln!(out, "antibody {i} angular {a} linear {l}").unwrap(),
            None => writeln!(out, "antibody {i} variable").unwrap(),
        }
    }
    let idio = crate::immune::default_idiotope();
    for i in 0..idio.rows() {
        let row: Vec<String> = (0..idio.cols())
            .map(|j| format!("{:.2}", idio.get(i, j)))
            .collect();
        writeln!(out, "idiotope {i} {}", row.join(" ")).unwrap();
    }
    out
}
