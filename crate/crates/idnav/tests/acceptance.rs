//! Acceptance suite: one test per release criterion, each printing a single
//! `acceptance N (<name>): pass|fail` line. The numeric oracles here are
//! written as independent straight-line evaluations, not calls back into the
//! library code paths they check.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use idnav::behaviors::{tables_manifest, SensorMetrics};
use idnav::harness::{
    compute_phi, finalize_batch, run_batch, ExperimentConfig, RunRecord, SystemId,
};
use idnav::immune::{
    antigen_weights, competing_set, default_idiotope, global_strength, match_strength_s1,
    normalize, random_paratope, reinforce, select_alpha, select_beta, stimulation_s3,
    suppression_s2, update_concentrations, AntigenPresentation, ImmuneParams, ImmuneState,
};
use idnav::matrix::Matrix;
use idnav::selectors::{
    select_scheme, PrevOutcome, SchemeId, SelectorContext,
};
use idnav::stats::welch_one_tailed_level;
use idnav::world::WorldMap;

fn report(number: u32, name: &str, ok: bool) {
    println!(
        "acceptance {number} ({name}): {}",
        if ok { "pass" } else { "fail" }
    );
    assert!(ok, "acceptance {number} ({name}) failed");
}

fn m1_map() -> WorldMap {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("maps/m1.map");
    WorldMap::load(&path).expect("shipped map loads")
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Direct evaluation of one arbitration step: antigen weighting, raw and
/// global strengths, concentration update and both argmax selections, all as
/// plain loops over the definitions.
#[allow(clippy::too_many_arguments)]
fn oracle_step(
    paratope: &[Vec<f64>],
    idiotope: &[Vec<f64>],
    conc: &[f64],
    presenting: &[usize],
    dominant: usize,
    params: &ImmuneParams,
) -> (usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, usize) {
    let n = paratope.len();
    let l = paratope[0].len();
    let mut g = vec![vec![0.0; l]; n];
    for i in 0..n {
        for &j in presenting {
            g[i][j] = if j == dominant {
                if paratope[i][j] > 0.0 {
                    2.0
                } else {
                    0.0
                }
            } else {
                0.25
            };
        }
    }
    let s1: Vec<f64> = (0..n)
        .map(|i| (0..l).map(|j| paratope[i][j] * g[i][j]).sum())
        .collect();
    let alpha = argmax(&s1);
    let competing: Vec<bool> = (0..n)
        .map(|i| {
            i != alpha && presenting.iter().map(|&j| paratope[i][j]).sum::<f64>() > 0.0
        })
        .collect();
    let mut s2 = vec![0.0; n];
    let mut s3 = vec![0.0; n];
    for i in 0..n {
        if !competing[i] {
            continue;
        }
        let mut sup = 0.0;
        let mut stim = 0.0;
        for j in 0..l {
            sup += paratope[alpha][j] * idiotope[i][j];
            stim += (1.0 - paratope[i][j]) * idiotope[alpha][j];
        }
        s2[i] = sup * conc[i] * conc[alpha];
        s3[i] = stim * conc[i] * conc[alpha];
    }
    let sg: Vec<f64> = (0..n).map(|i| s1[i] - params.k1 * s2[i] + s3[i]).collect();
    let raw: Vec<f64> = (0..n)
        .map(|i| (conc[i] + params.b * sg[i] - params.k2 * conc[i]).max(params.floor))
        .collect();
    let total: f64 = raw.iter().sum();
    let updated: Vec<f64> = raw.iter().map(|&c| n as f64 * c / total).collect();
    let beta = argmax(&updated);
    (alpha, s2, s3, sg, updated, beta)
}

#[test]
fn acceptance_1_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut ok = true;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=5usize);
        let l = rng.gen_range(1..=3usize);
        let p_rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..l)
                    .map(|_| {
                        if rng.gen::<f64>() < 0.25 {
                            0.0
                        } else {
                            rng.gen::<f64>()
                        }
                    })
                    .collect()
            })
            .collect();
        let i_rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..l).map(|_| *[0.0, 0.5, 1.0].choose(&mut rng).unwrap()).collect())
            .collect();
        let conc: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let mut presenting: Vec<usize> = (0..l).filter(|_| rng.gen::<bool>()).collect();
        if presenting.is_empty() {
            presenting.push(rng.gen_range(0..l));
        }
        let dominant = *presenting.choose(&mut rng).unwrap();
        let params = ImmuneParams {
            b: rng.gen_range(1.0..120.0),
            k1: rng.gen_range(0.0..1.0),
            k2: rng.gen_range(0.01..0.5),
            num_antibodies: n,
            num_antigens: l,
            ..ImmuneParams::default()
        };

        let paratope = Matrix::from_rows(&p_rows).unwrap();
        let idiotope = Matrix::from_rows(&i_rows).unwrap();
        let pres = AntigenPresentation::new(&presenting, dominant).unwrap();
        let g = antigen_weights(&pres, &paratope);
        let s1 = match_strength_s1(&paratope, &g);
        let (alpha, _) = select_alpha(&s1);
        let h = competing_set(&paratope, &pres, alpha);
        let s2 = suppression_s2(&paratope, &idiotope, alpha, &h, &conc);
        let s3 = stimulation_s3(&paratope, &idiotope, alpha, &h, &conc);
        let sg = global_strength(&s1, &s2, &s3, params.k1);
        let updated =
            normalize(&update_concentrations(&conc, &sg, &params).unwrap(), &params);
        let beta = select_beta(&updated);

        let (oa, os2, os3, osg, oc, ob) =
            oracle_step(&p_rows, &i_rows, &conc, &presenting, dominant, &params);
        ok &= alpha == oa && beta == ob;
        for i in 0..n {
            ok &= (s2[i] - os2[i]).abs() <= 1e-9
                && (s3[i] - os3[i]).abs() <= 1e-9
                && (sg[i] - osg[i]).abs() <= 1e-9
                && (updated[i] - oc[i]).abs() <= 1e-9;
        }
    }
    ok &= start.elapsed().as_secs_f64() < 10.0;
    report(1, "oracle equivalence", ok);
}

#[test]
fn acceptance_2_normalization_and_clamps() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut state = ImmuneState::seeded(1, ImmuneParams::default()).unwrap();
    let mut ok = true;
    for _ in 0..10_000 {
        let mut presenting: Vec<usize> = (0..8).filter(|_| rng.gen::<f64>() < 0.3).collect();
        if presenting.is_empty() {
            presenting.push(rng.gen_range(0..8));
        }
        let dominant = *presenting.choose(&mut rng).unwrap();
        let pres = AntigenPresentation::new(&presenting, dominant).unwrap();
        let rep = state.step(&pres).unwrap();
        let tau = if rng.gen::<bool>() { 0.05 } else { -0.05 };
        reinforce(&mut state.paratope, rep.beta, dominant, tau);

        let sum: f64 = state.concentrations.iter().sum();
        ok &= (sum - 16.0).abs() <= 1e-9;
        ok &= (0..16).all(|i| (0..8).all(|j| state.paratope.get(i, j) >= 0.0));
    }
    report(2, "normalization and clamps", ok);
}

#[test]
fn acceptance_3_decay_law() {
    let params = ImmuneParams::default();
    let mut c = vec![1.0; 16];
    let mut ok = true;
    for t in 1..=100 {
        c = update_concentrations(&c, &[0.0; 16], &params).unwrap();
        let expect = 0.95f64.powi(t);
        ok &= c.iter().all(|&v| (v - expect).abs() <= 1e-12);
    }
    report(3, "decay law", ok);
}

#[test]
fn acceptance_4_scheme_probabilities() {
    let start = Instant::now();
    let draws = 100_000usize;
    let paratope = random_paratope(16, 8, 7);
    let dominant = 3usize;
    // Rank order against the dominant antigen, computed directly.
    let mut order: Vec<usize> = (0..16).collect();
    order.sort_by(|&a, &b| {
        paratope
            .get(b, dominant)
            .partial_cmp(&paratope.get(a, dominant))
            .unwrap()
            .then(a.cmp(&b))
    });
    let alpha = order[0];

    let free = SelectorContext::default();
    let stall = SelectorContext {
        stall_window: true,
        ..Default::default()
    };
    let failed = SelectorContext {
        previous_outcome: PrevOutcome::Failure,
        ..Default::default()
    };
    // (scheme, context, expected probability of ranks 1..4).
    let branches: Vec<(SchemeId, SelectorContext, [f64; 4])> = vec![
        (SchemeId::R3, free, [0.80, 0.20, 0.0, 0.0]),
        (SchemeId::R4, free, [0.80, 0.10, 0.10, 0.0]),
        (SchemeId::R5, free, [0.80, 0.10, 0.05, 0.05]),
        (SchemeId::R6, failed, [0.72, 0.14, 0.07, 0.07]),
        (SchemeId::R6, free, [0.86, 0.07, 0.035, 0.035]),
        (SchemeId::R7, stall, [0.67, 0.165, 0.0825, 0.0825]),
        (SchemeId::R7, free, [0.85, 0.075, 0.0375, 0.0375]),
        (SchemeId::R8, stall, [0.50, 0.25, 0.125, 0.125]),
        (SchemeId::R8, free, [0.87, 0.065, 0.0325, 0.0325]),
        (SchemeId::R9, stall, [0.25, 0.375, 0.1875, 0.1875]),
        (SchemeId::R9, free, [0.98, 0.01, 0.005, 0.005]),
    ];

    let mut ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for (scheme, ctx, expected) in &branches {
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let out = select_scheme(*scheme, &paratope, dominant, alpha, ctx, &mut rng);
            if let Some(pos) = order.iter().position(|&i| i == out.chosen) {
                if pos < 4 {
                    counts[pos] += 1;
                }
            }
        }
        for (rank, &want) in expected.iter().enumerate() {
            let got = counts[rank] as f64 / draws as f64;
            ok &= (got - want).abs() <= 0.01;
        }
    }

    // R1: 20% uniform over the 15 non-alpha antibodies.
    let mut non_alpha = 0usize;
    let mut per_antibody = [0usize; 16];
    for _ in 0..draws {
        let out = select_scheme(SchemeId::R1, &paratope, dominant, alpha, &free, &mut rng);
        if out.chosen != alpha {
            non_alpha += 1;
        }
        per_antibody[out.chosen] += 1;
    }
    ok &= (non_alpha as f64 / draws as f64 - 0.20).abs() <= 0.01;
    for i in 0..16 {
        if i != alpha {
            ok &= (per_antibody[i] as f64 / draws as f64 - 0.20 / 15.0).abs() <= 0.01;
        }
    }

    // R2: 20% roulette over the non-alpha paratope scores.
    let col_sum: f64 = (0..16)
        .filter(|&i| i != alpha)
        .map(|i| paratope.get(i, dominant))
        .sum();
    per_antibody = [0; 16];
    for _ in 0..draws {
        let out = select_scheme(SchemeId::R2, &paratope, dominant, alpha, &free, &mut rng);
        per_antibody[out.chosen] += 1;
    }
    ok &= (per_antibody[alpha] as f64 / draws as f64 - 0.80).abs() <= 0.01;
    for i in 0..16 {
        if i != alpha {
            let want = 0.20 * paratope.get(i, dominant) / col_sum;
            ok &= (per_antibody[i] as f64 / draws as f64 - want).abs() <= 0.01;
        }
    }

    ok &= start.elapsed().as_secs_f64() < 30.0;
    report(4, "scheme probabilities", ok);
}

#[test]
fn acceptance_5_fitness_cross_check() {
    // Published first-world batch means: task time, stall count, fitness.
    let t = [
        218.0, 414.0, 317.0, 295.0, 290.0, 296.0, 313.0, 302.0, 259.0, 293.0,
    ];
    let sigma = [21.0, 62.0, 39.0, 55.0, 45.0, 43.0, 54.0, 42.0, 39.0, 48.0];
    let f_published = [
        180.0, 419.0, 293.0, 335.0, 298.0, 296.0, 342.0, 296.0, 263.0, 312.0,
    ];

    let records: Vec<RunRecord> = t
        .iter()
        .zip(&sigma)
        .map(|(&time, &stalls)| RunRecord {
            system: "x".into(),
            world: "m1".into(),
            seed: 1,
            time,
            stalls: stalls as u32,
            mu: 0.0,
            completed: true,
            fitness: None,
            good: false,
            bad: false,
            stall_steps: 0,
            stall_diffs: 0,
            free_steps: 0,
            free_diffs: 0,
        })
        .collect();
    let phi = compute_phi(&records).unwrap();
    let mut ok = (phi - 6.69).abs() < 0.01;
    for i in 0..t.len() {
        let f = (t[i] + phi * sigma[i]) / 2.0;
        ok &= (f - f_published[i]).abs() <= 6.0;
    }
    report(5, "fitness cross-check", ok);
}

#[test]
fn acceptance_6_table_fidelity() {
    let manifest = include_str!("../assets/tables_manifest.txt");
    let mut ok = tables_manifest() == manifest;

    // The idiotope and the fixed action commands, checked entry by entry
    // against the transcription rather than through string comparison alone.
    let idio = default_idiotope();
    let m = SensorMetrics {
        z_min: 8.0,
        z_av: 8.0,
        z_max: 8.0,
        r_min: 1,
        e_av: 5.0,
        distance: 1.0,
        marker: idnav::world::BlobDetection {
            visible: false,
            bearing: 0.0,
        },
        bearing_z_max: 0.0,
        bearing_z_min: 0.0,
    };
    for line in manifest.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts[0] {
            "antibody" if parts[2] != "variable" => {
                let i: usize = parts[1].parse().unwrap();
                let angular: f64 = parts[3].parse().unwrap();
                let linear: f64 = parts[5].parse().unwrap();
                let cmd = idnav::behaviors::action_for(i, &m).unwrap();
                ok &= cmd.angular == angular && cmd.linear == linear;
            }
            "idiotope" => {
                let i: usize = parts[1].parse().unwrap();
                for (j, v) in parts[2..].iter().enumerate() {
                    ok &= idio.get(i, j) == v.parse::<f64>().unwrap();
                }
            }
            _ => {}
        }
    }
    report(6, "table fidelity", ok);
}

#[test]
fn acceptance_7_soft_reproduction() {
    let start = Instant::now();
    let world = m1_map();
    let base = ExperimentConfig::default();
    let id_cfg = ExperimentConfig {
        system: SystemId::Idiotypic,
        ..base.clone()
    };
    let r1_cfg = ExperimentConfig {
        system: SystemId::Scheme(SchemeId::R1),
        ..base
    };
    let mut records = run_batch(&id_cfg, &world, "m1", 12).unwrap();
    records.extend(run_batch(&r1_cfg, &world, "m1", 12).unwrap());
    finalize_batch(&mut records);

    let mean_f = |system: &str| {
        let fs: Vec<f64> = records
            .iter()
            .filter(|r| r.system == system)
            .filter_map(|r| r.fitness)
            .collect();
        fs.iter().sum::<f64>() / fs.len() as f64
    };
    let ok_fitness = mean_f("id") <= mean_f("r1");

    let id_records: Vec<&RunRecord> = records.iter().filter(|r| r.system == "id").collect();
    let mean_mu =
        id_records.iter().map(|r| r.mu).sum::<f64>() / id_records.len() as f64;
    let ok_rate = (0.10..=0.35).contains(&mean_mu);

    let stall_steps: u64 = id_records.iter().map(|r| r.stall_steps).sum();
    let stall_diffs: u64 = id_records.iter().map(|r| r.stall_diffs).sum();
    let free_steps: u64 = id_records.iter().map(|r| r.free_steps).sum();
    let free_diffs: u64 = id_records.iter().map(|r| r.free_diffs).sum();
    let ok_stall = stall_steps > 0
        && free_steps > 0
        && stall_diffs as f64 / stall_steps as f64 > free_diffs as f64 / free_steps as f64;

    let ok_budget = start.elapsed().as_secs_f64() < 900.0;
    report(
        7,
        "soft reproduction",
        ok_fitness && ok_rate && ok_stall && ok_budget,
    );
}

/// One-tailed permutation level for mean(a) < mean(b): the percentage of
/// label reshuffles whose mean difference falls below the observed one, with
/// ties counted half.
fn permutation_level(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> f64 {
    let observed = b.iter().sum::<f64>() / b.len() as f64
        - a.iter().sum::<f64>() / a.len() as f64;
    let mut pool: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut below = 0.0;
    for _ in 0..resamples {
        pool.shuffle(&mut rng);
        let ma = pool[..a.len()].iter().sum::<f64>() / a.len() as f64;
        let mb = pool[a.len()..].iter().sum::<f64>() / b.len() as f64;
        let d = mb - ma;
        if d < observed {
            below += 1.0;
        } else if d == observed {
            below += 0.5;
        }
    }
    100.0 * below / resamples as f64
}

#[test]
fn acceptance_8_t_test_vs_permutation() {
    let pairs: [([f64; 12], [f64; 12]); 3] = [
        (
            [218.0, 231.0, 202.0, 240.0, 215.0, 199.0, 226.0, 210.0, 238.0, 205.0, 222.0, 214.0],
            [259.0, 240.0, 271.0, 248.0, 266.0, 255.0, 280.0, 244.0, 262.0, 251.0, 274.0, 247.0],
        ),
        (
            [290.0, 310.0, 270.0, 305.0, 285.0, 295.0, 315.0, 280.0, 300.0, 275.0, 320.0, 288.0],
            [296.0, 312.0, 278.0, 306.0, 290.0, 300.0, 318.0, 284.0, 302.0, 281.0, 322.0, 292.0],
        ),
        (
            [31.8, 35.2, 29.4, 38.1, 33.0, 30.6, 36.7, 32.2, 34.5, 28.9, 37.3, 31.1],
            [70.5, 77.4, 64.2, 82.0, 68.8, 74.1, 79.6, 66.3, 72.9, 62.7, 84.2, 69.5],
        ),
    ];
    let mut ok = true;
    for (i, (a, b)) in pairs.iter().enumerate() {
        let welch = welch_one_tailed_level(a, b);
        let perm = permutation_level(a, b, 100_000, 808 + i as u64);
        ok &= (welch - perm).abs() <= 1.0;
    }
    report(8, "t-test vs permutation", ok);
}

#[test]
fn acceptance_9_determinism() {
    let bin = env!("CARGO_BIN_EXE_idnav");
    let map = Path::new(env!("CARGO_MANIFEST_DIR")).join("maps/m1.map");
    let mut outputs: Vec<Vec<u8>> = Vec::new();
    for pass in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        for system in ["id", "r1"] {
            let status = std::process::Command::new(bin)
                .args([
                    "run",
                    "--system",
                    system,
                    "--world",
                    map.to_str().unwrap(),
                    "--runs",
                    "12",
                    "--out",
                    dir.path().to_str().unwrap(),
                ])
                .status()
                .unwrap();
            assert!(status.success(), "pass {pass} system {system}");
        }
        let mut bytes = Vec::new();
        for system in ["id", "r1"] {
            bytes.extend(
                std::fs::read(dir.path().join(format!("runs_{system}.csv"))).unwrap(),
            );
        }
        outputs.push(bytes);
    }
    report(9, "determinism", outputs[0] == outputs[1]);
}
