//! Experiment harness: runs control loops to completion, aggregates
//! time/stall/fitness statistics, classifies runs and emits report files.
//!
//! The protocol for one world is twelve runs per control system, six from
//! each of two initial random paratopes. Fitness combines completion time
//! and stall count through the batch-level time-to-stall ratio, and each
//! baseline is compared to the idiotypic system with a one-tailed t-test.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::behaviors::{
    action_for, compute_metrics, detect_antigens, dominant_antigen, score_outcome, SensorMetrics,
};
use crate::immune::{
    antigen_weights, match_strength_s1, reinforce, select_alpha, AntigenPresentation, ImmuneError,
    ImmuneParams, ImmuneState,
};
use crate::matrix::Matrix;
use crate::selectors::{
    observed_mu_rate, select_scheme, PrevOutcome, SchemeId, SelectionOutcome, SelectorContext,
    SelectorError,
};
use crate::stats::{fitness, mean, time_to_stall_ratio, welch_one_tailed_level};
use crate::world::{
    detect_stall, sense_camera, sense_laser, sense_sonar, step_physics, Command, MapError, Robot,
    SimConfig, Stall, WorldMap,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Immune(#[from] ImmuneError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error("behavior error: {0}")]
    Behavior(#[from] crate::behaviors::BehaviorError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("unknown system {0:?} (expected id or r1..r9)")]
    UnknownSystem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemId {
    Idiotypic,
    Scheme(SchemeId),
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemId::Idiotypic => write!(f, "id"),
            SystemId::Scheme(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for SystemId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("id") {
            Ok(SystemId::Idiotypic)
        } else {
            s.parse::<SchemeId>()
                .map(SystemId::Scheme)
                .map_err(|_| HarnessError::UnknownSystem(s.to_string()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub system: SystemId,
    pub paratope_seed: u64,
    pub rng_seed: u64,
    /// Simulated-time budget per trial (s).
    pub max_duration: f64,
    pub params: ImmuneParams,
    pub sim: SimConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemId::Idiotypic,
            paratope_seed: 1,
            rng_seed: 1,
            max_duration: 1200.0,
            params: ImmuneParams::default(),
            sim: SimConfig::default(),
        }
    }
}

/// One trial's outcome plus the per-step selection statistics needed for
/// idiotypic-difference analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub system: String,
    pub world: String,
    pub seed: u64,
    /// Completion time (s); equals the budget for timeouts.
    pub time: f64,
    pub stalls: u32,
    /// Non-alpha selection rate (idiotypic difference rate for the
    /// idiotypic system).
    pub mu: f64,
    pub completed: bool,
    /// Filled once the batch-level time-to-stall ratio is known.
    pub fitness: Option<f64>,
    pub good: bool,
    pub bad: bool,
    pub stall_steps: u64,
    pub stall_diffs: u64,
    pub free_steps: u64,
    pub free_diffs: u64,
}

fn sense(world: &WorldMap, robot: &Robot, sim: &SimConfig) -> SensorMetrics {
    let laser = sense_laser(world, &robot.pose, sim);
    let sonar = sense_sonar(world, &robot.pose, sim);
    let camera = sense_camera(world, &robot.pose, sim);
    compute_metrics(&laser, &sonar, robot.interval_distance, camera)
}

// Lowest-index antibody with a nonzero score against the dominant antigen;
// used when every S1 entry is zero.
fn degenerate_alpha(paratope: &Matrix, dominant: usize) -> usize {
    (0..paratope.rows())
        .find(|&i| paratope.get(i, dominant) > 0.0)
        .unwrap_or(0)
}

fn scheme_alpha(paratope: &Matrix, presentation: &AntigenPresentation) -> usize {
    let g = antigen_weights(presentation, paratope);
    let s1 = match_strength_s1(paratope, &g);
    let (alpha, degenerate) = select_alpha(&s1);
    if degenerate {
        degenerate_alpha(paratope, presentation.dominant().unwrap_or(0))
    } else {
        alpha
    }
}

/// Run one trial to marker completion or timeout. If `trace` is given, a
/// `t,x,y,heading,antigen_d,antibody,stall` row is appended per control
/// interval.
pub fn run_trial(
    cfg: &ExperimentConfig,
    world_template: &WorldMap,
    world_name: &str,
    mut trace: Option<&mut String>,
) -> Result<RunRecord, HarnessError> {
    let mut world = world_template.clone();
    let sim = cfg.sim;
    let mut robot = Robot::at(world.start, &sim);
    let mut immune = ImmuneState::seeded(cfg.paratope_seed, cfg.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    if let Some(buf) = trace.as_deref_mut() {
        buf.push_str("t,x,y,heading,antigen_d,antibody,stall\n");
    }

    let substeps = (sim.control_dt / sim.substep_dt).round().max(1.0) as usize;
    let mut metrics = sense(&world, &robot, &sim);
    let mut t = 0.0;
    let mut stalls = 0u32;
    let mut previous_stall = Stall::None;
    let mut stalled_last_step = false;
    let mut prev_outcome = PrevOutcome::None;
    let mut selections: Vec<SelectionOutcome> = Vec::new();
    let (mut stall_steps, mut stall_diffs, mut free_steps, mut free_diffs) = (0u64, 0u64, 0u64, 0u64);
    let mut diff_count = 0u64;
    let mut total_steps = 0u64;
    let mut completed = false;
    let mut completion_time = cfg.max_duration;

    while t < cfg.max_duration {
        let set = detect_antigens(&metrics);
        let presentation = dominant_antigen(&set)?;
        let dominant = presentation.dominant().expect("nonempty presentation");

        let stall_state = detect_stall(metrics.distance, metrics.e_av);
        if stall_state != Stall::None && previous_stall == Stall::None {
            stalls += 1;
        }
        previous_stall = stall_state;
        let stall_now = set.contains(&5) || set.contains(&6);
        let stall_window = stall_now || stalled_last_step;

        total_steps += 1;
        let chosen = match cfg.system {
            SystemId::Idiotypic => {
                let report = immune.step(&presentation)?;
                log::debug!(
                    "t={t} set={set:?} alpha={} beta={} window={stall_window}",
                    report.alpha,
                    report.beta
                );
                if report.differed {
                    diff_count += 1;
                }
                // The difference-rate split uses the intervals where a stall
                // antigen actually presents; the two-step window only gates
                // the scheme branches.
                if stall_now {
                    stall_steps += 1;
                    stall_diffs += u64::from(report.differed);
                } else {
                    free_steps += 1;
                    free_diffs += u64::from(report.differed);
                }
                report.beta
            }
            SystemId::Scheme(scheme) => {
                let alpha = scheme_alpha(&immune.paratope, &presentation);
                let ctx = SelectorContext {
                    previous_outcome: prev_outcome,
                    stall_window,
                };
                let outcome =
                    select_scheme(scheme, &immune.paratope, dominant, alpha, &ctx, &mut rng);
                selections.push(outcome);
                outcome.chosen
            }
        };

        let command: Command = action_for(chosen, &metrics)?;
        if let Some(buf) = trace.as_deref_mut() {
            writeln!(
                buf,
                "{t},{},{},{},{dominant},{chosen},{}",
                robot.pose.pos.x,
                robot.pose.pos.y,
                robot.pose.heading,
                u8::from(stall_state != Stall::None)
            )
            .unwrap();
        }

        robot.interval_distance = 0.0;
        let mut progressed = false;
        for s in 0..substeps {
            let from = robot.pose.pos;
            step_physics(&world, &mut robot, command, sim.substep_dt, &sim);
            let events = world.advance_progression(from, robot.pose.pos, robot.radius);
            if !events.passed.is_empty() {
                progressed = true;
            }
            if events.completed {
                completed = true;
                completion_time = t + (s + 1) as f64 * sim.substep_dt;
                break;
            }
        }

        let after = sense(&world, &robot, &sim);
        let tau = score_outcome(&metrics, &after, dominant, progressed);
        reinforce(&mut immune.paratope, chosen, dominant, tau);
        prev_outcome = if tau > 0.0 {
            PrevOutcome::Success
        } else {
            PrevOutcome::Failure
        };
        stalled_last_step = stall_now;
        metrics = after;
        t += sim.control_dt;
        if completed {
            break;
        }
    }

    let mu = match cfg.system {
        SystemId::Idiotypic => {
            if total_steps == 0 {
                0.0
            } else {
                diff_count as f64 / total_steps as f64
            }
        }
        SystemId::Scheme(_) => observed_mu_rate(&selections)?,
    };

    Ok(RunRecord {
        system: cfg.system.to_string(),
        world: world_name.to_string(),
        seed: cfg.rng_seed,
        time: if completed { completion_time } else { cfg.max_duration },
        stalls,
        mu,
        completed,
        fitness: None,
        good: false,
        bad: false,
        stall_steps,
        stall_diffs,
        free_steps,
        free_diffs,
    })
}

/// Run a batch for one system: `runs` trials, the first half from the base
/// paratope seed and the second half from the next one, with consecutive
/// rng seeds.
pub fn run_batch(
    base: &ExperimentConfig,
    world: &WorldMap,
    world_name: &str,
    runs: usize,
) -> Result<Vec<RunRecord>, HarnessError> {
    let mut records = Vec::with_capacity(runs);
    for k in 0..runs {
        let cfg = ExperimentConfig {
            paratope_seed: base.paratope_seed + (k / 6) as u64,
            rng_seed: base.rng_seed + k as u64,
            ..base.clone()
        };
        records.push(run_trial(&cfg, world, world_name, None)?);
    }
    Ok(records)
}

/// Time-to-stall ratio over every completed run in one world's batch.
pub fn compute_phi(records: &[RunRecord]) -> Option<f64> {
    let completed: Vec<&RunRecord> = records.iter().filter(|r| r.completed).collect();
    if completed.is_empty() {
        return None;
    }
    let times: Vec<f64> = completed.iter().map(|r| r.time).collect();
    let stalls: Vec<f64> = completed.iter().map(|r| r.stalls as f64).collect();
    time_to_stall_ratio(&times, &stalls)
}

/// Fill in fitness and good/bad classification per world. Timeout runs get
/// no fitness and are excluded from the batch mean and decile.
pub fn finalize_batch(records: &mut [RunRecord]) {
    let worlds: BTreeSet<String> = records.iter().map(|r| r.world.clone()).collect();
    for world in worlds {
        let idx: Vec<usize> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.world == world && r.completed)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let subset: Vec<&RunRecord> = idx.iter().map(|&i| &records[i]).collect();
        let phi = compute_phi(&subset.iter().map(|r| (*r).clone()).collect::<Vec<_>>());
        for &i in &idx {
            let r = &records[i];
            let f = match phi {
                Some(p) => fitness(r.time, r.stalls as f64, p),
                None => {
                    // No stalls anywhere in the batch: F degenerates to T/2.
                    log::warn!("phi undefined for world {world}; using F = T/2");
                    r.time / 2.0
                }
            };
            records[i].fitness = Some(f);
        }
        let fs: Vec<f64> = idx.iter().map(|&i| records[i].fitness.unwrap()).collect();
        let mean_f = mean(&fs);
        let bad_count = fs.len() / 10;
        let mut order: Vec<usize> = (0..fs.len()).collect();
        order.sort_by(|&a, &b| fs[b].partial_cmp(&fs[a]).unwrap());
        let bad_set: BTreeSet<usize> = order.into_iter().take(bad_count).collect();
        for (pos, &i) in idx.iter().enumerate() {
            records[i].good = records[i].fitness.unwrap() < mean_f;
            records[i].bad = bad_set.contains(&pos);
        }
    }
}

pub const CSV_HEADER: &str = "system,world,seed,T,sigma,mu,F,completed,good,bad";

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let f = r.fitness.map(|v| format!("{v}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.system, r.world, r.seed, r.time, r.stalls, r.mu, f, r.completed, r.good, r.bad
        )
        .unwrap();
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<RunRecord>, HarnessError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != CSV_HEADER {
                return Err(HarnessError::Csv {
                    line: 1,
                    msg: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(HarnessError::Csv {
                line: idx + 1,
                msg: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let bad_field = |msg: String| HarnessError::Csv { line: idx + 1, msg };
        records.push(RunRecord {
            system: fields[0].to_string(),
            world: fields[1].to_string(),
            seed: fields[2].parse().map_err(|e| bad_field(format!("seed: {e}")))?,
            time: fields[3].parse().map_err(|e| bad_field(format!("T: {e}")))?,
            stalls: fields[4].parse().map_err(|e| bad_field(format!("sigma: {e}")))?,
            mu: fields[5].parse().map_err(|e| bad_field(format!("mu: {e}")))?,
            fitness: if fields[6].is_empty() {
                None
            } else {
                Some(fields[6].parse().map_err(|e| bad_field(format!("F: {e}")))?)
            },
            completed: fields[7].parse().map_err(|e| bad_field(format!("completed: {e}")))?,
            good: fields[8].parse().map_err(|e| bad_field(format!("good: {e}")))?,
            bad: fields[9].parse().map_err(|e| bad_field(format!("bad: {e}")))?,
            stall_steps: 0,
            stall_diffs: 0,
            free_steps: 0,
            free_diffs: 0,
        });
    }
    Ok(records)
}

/// Per-system mean summary for one world, mirroring the result-table layout.
pub fn summary_table(records: &[RunRecord]) -> String {
    let mut out = String::from("system world mean_T mean_sigma mean_F mu_pct good_pct bad_pct timeouts\n");
    let mut keys: Vec<(String, String)> = records
        .iter()
        .map(|r| (r.world.clone(), r.system.clone()))
        .collect();
    keys.sort();
    keys.dedup();
    // Idiotypic system first inside each world.
    keys.sort_by_key(|(w, s)| (w.clone(), s != "id", s.clone()));
    for (world, system) in keys {
        let all: Vec<&RunRecord> = records
            .iter()
            .filter(|r| r.world == world && r.system == system)
            .collect();
        let done: Vec<&&RunRecord> = all.iter().filter(|r| r.completed).collect();
        let timeouts = all.len() - done.len();
        if done.is_empty() {
            writeln!(out, "{system} {world} - - - - - - {timeouts}").unwrap();
            continue;
        }
        let m = |f: &dyn Fn(&RunRecord) -> f64| mean(&done.iter().map(|r| f(r)).collect::<Vec<_>>());
        let pct = |f: &dyn Fn(&RunRecord) -> bool| {
            100.0 * done.iter().filter(|r| f(r)).count() as f64 / done.len() as f64
        };
        writeln!(
            out,
            "{system} {world} {:.1} {:.1} {:.1} {:.1} {:.0} {:.0} {timeouts}",
            m(&|r| r.time),
            m(&|r| r.stalls as f64),
            m(&|r| r.fitness.unwrap_or(f64::NAN)),
            100.0 * m(&|r| r.mu),
            pct(&|r| r.good),
            pct(&|r| r.bad),
        )
        .unwrap();
    }
    out
}

/// One-tailed significance levels (baseline better) for T, sigma and F of
/// each system against the baseline, per world.
pub fn significance_table(records: &[RunRecord], baseline: &str) -> String {
    let mut out = String::from("system world level_T level_sigma level_F\n");
    let worlds: BTreeSet<String> = records.iter().map(|r| r.world.clone()).collect();
    for world in worlds {
        let base: Vec<&RunRecord> = records
            .iter()
            .filter(|r| r.world == world && r.system == baseline && r.completed)
            .collect();
        if base.len() < 2 {
            continue;
        }
        let base_t: Vec<f64> = base.iter().map(|r| r.time).collect();
        let base_s: Vec<f64> = base.iter().map(|r| r.stalls as f64).collect();
        let base_f: Vec<f64> = base.iter().map(|r| r.fitness.unwrap()).collect();
        let mut systems: Vec<String> = records
            .iter()
            .filter(|r| r.world == world && r.system != baseline)
            .map(|r| r.system.clone())
            .collect();
        systems.sort();
        systems.dedup();
        for system in systems {
            let other: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.world == world && r.system == system && r.completed)
                .collect();
            if other.len() < 2 {
                continue;
            }
            let t: Vec<f64> = other.iter().map(|r| r.time).collect();
            let s: Vec<f64> = other.iter().map(|r| r.stalls as f64).collect();
            let f: Vec<f64> = other.iter().map(|r| r.fitness.unwrap()).collect();
            writeln!(
                out,
                "{system} {world} {:.1} {:.1} {:.1}",
                welch_one_tailed_level(&base_t, &t),
                welch_one_tailed_level(&base_s, &s),
                welch_one_tailed_level(&base_f, &f),
            )
            .unwrap();
        }
    }
    out
}

/// Write report.csv, summary.txt and (with a baseline) significance.txt.
pub fn emit_report(
    dir: &Path,
    records: &[RunRecord],
    baseline: Option<&str>,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.csv"), records_to_csv(records))?;
    std::fs::write(dir.join("summary.txt"), summary_table(records))?;
    if let Some(base) = baseline {
        if records.iter().any(|r| r.system == base) {
            std::fs::write(dir.join("significance.txt"), significance_table(records, base))?;
        }
    }
    Ok(())
}
