use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use idnav::harness::{
    emit_report, finalize_batch, records_from_csv, records_to_csv, run_trial, ExperimentConfig,
    RunRecord, SystemId,
};
use idnav::immune::{
    self, update_concentrations, AntigenPresentation, ImmuneParams, ImmuneState,
};
use idnav::selectors::{select_scheme, SchemeId, SelectorContext};
use idnav::world::WorldMap;

#[derive(Parser)]
#[command(name = "idnav", about = "Idiotypic and probabilistic behaviour-arbitration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run a batch of trials for one control system.
    Run {
        /// Control system: id or r1..r9.
        #[arg(long)]
        system: String,
        /// Map file.
        #[arg(long)]
        world: PathBuf,
        /// Number of runs (half from each of two initial paratopes).
        #[arg(long, default_value_t = 12)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        paratope_seed: u64,
        #[arg(long, default_value_t = 1)]
        rng_seed: u64,
        #[arg(long, default_value_t = 80.0)]
        b: f64,
        #[arg(long, default_value_t = 0.65)]
        k1: f64,
        #[arg(long, default_value_t = 0.05)]
        k2: f64,
        /// Simulated-time budget per trial (s).
        #[arg(long, default_value_t = 1200.0)]
        max_duration: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Also write a per-run trajectory trace CSV.
        #[arg(long)]
        trace: bool,
    },
    /// Aggregate run CSVs into summary and significance tables.
    Compare {
        /// Directory containing runs_*.csv files.
        #[arg(long = "in")]
        input: PathBuf,
        /// Baseline system for the significance table.
        #[arg(long, default_value = "id")]
        baseline: String,
    },
    /// Run built-in consistency checks.
    Selftest,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Commands::Run {
            system,
            world,
            runs,
            paratope_seed,
            rng_seed,
            b,
            k1,
            k2,
            max_duration,
            out,
            trace,
        } => {
            let system: SystemId = system.parse()?;
            let map = WorldMap::load(&world)?;
            let world_name = world
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "world".into());
            let base = ExperimentConfig {
                system,
                paratope_seed,
                rng_seed,
                max_duration,
                params: ImmuneParams {
                    b,
                    k1,
                    k2,
                    ..ImmuneParams::default()
                },
                ..ExperimentConfig::default()
            };
            std::fs::create_dir_all(&out)?;
            let mut records: Vec<RunRecord> = Vec::with_capacity(runs);
            for k in 0..runs {
                let cfg = ExperimentConfig {
                    paratope_seed: base.paratope_seed + (k / 6) as u64,
                    rng_seed: base.rng_seed + k as u64,
                    ..base.clone()
                };
                let mut trace_buf = trace.then(String::new);
                let record = run_trial(&cfg, &map, &world_name, trace_buf.as_mut())?;
                if let Some(buf) = trace_buf {
                    let path = out.join(format!("trace_{system}_{}.csv", cfg.rng_seed));
                    std::fs::write(path, buf)?;
                }
                println!(
                    "run {k}: T={} sigma={} mu={:.3} completed={}",
                    record.time, record.stalls, record.mu, record.completed
                );
                records.push(record);
            }
            finalize_batch(&mut records);
            let path = out.join(format!("runs_{system}.csv"));
            std::fs::write(&path, records_to_csv(&records))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Commands::Compare { input, baseline } => {
            let mut records = Vec::new();
            let mut entries: Vec<PathBuf> = std::fs::read_dir(&input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .map(|n| {
                            let n = n.to_string_lossy();
                            n.starts_with("runs_") && n.ends_with(".csv")
                        })
                        .unwrap_or(false)
                })
                .collect();
            entries.sort();
            if entries.is_empty() {
                return Err(format!("no runs_*.csv files in {}", input.display()).into());
            }
            for path in entries {
                records.extend(records_from_csv(&std::fs::read_to_string(&path)?)?);
            }
            // F and classification are batch-level quantities; recompute
            // them over the pooled records.
            for r in &mut records {
                r.fitness = None;
            }
            finalize_batch(&mut records);
            emit_report(&input, &records, Some(&baseline))?;
            print!("{}", std::fs::read_to_string(input.join("summary.txt"))?);
            println!("wrote report.csv, summary.txt, significance.txt in {}", input.display());
            Ok(())
        }
        Commands::Selftest => selftest(),
    }
}

// Small built-in consistency suite; the full oracle suites live in the
// crate's test targets.
fn selftest() -> Result<(), Box<dyn std::error::Error>> {
    use rand::{Rng, SeedableRng};

    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("{}: {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // Normalization invariant over idiotypic steps.
    let mut state = ImmuneState::seeded(3, ImmuneParams::default())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut ok = true;
    for _ in 0..1000 {
        let d = rng.gen_range(0..8usize);
        let p = AntigenPresentation::new(&[d], d)?;
        state.step(&p)?;
        let sum: f64 = state.concentrations.iter().sum();
        if (sum - 16.0).abs() > 1e-9 {
            ok = false;
        }
    }
    check("concentration sum stays at N over 1000 steps", ok);

    // Geometric decay with no stimulation.
    let params = ImmuneParams::default();
    let mut c = vec![1.0; 4];
    let mut ok = true;
    for t in 1..=100 {
        c = update_concentrations(&c, &[0.0; 4], &params)?;
        if c.iter().any(|&v| (v - 0.95f64.powi(t)).abs() > 1e-12) {
            ok = false;
        }
    }
    check("decay follows 0.95^t", ok);

    // R8 stall-branch selection frequencies.
    let paratope = immune::random_paratope(16, 8, 1);
    let ctx = SelectorContext {
        stall_window: true,
        ..Default::default()
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
    let draws = 20_000;
    let mut alpha_hits = 0;
    for _ in 0..draws {
        let o = select_scheme(SchemeId::R8, &paratope, 0, 0, &ctx, &mut rng);
        alpha_hits += usize::from(!o.was_mu);
    }
    let rate = alpha_hits as f64 / draws as f64;
    check("r8 stall branch keeps alpha about half the time", (rate - 0.50).abs() < 0.02);

    // Fixed tables match the shipped manifest.
    let manifest = include_str!("../assets/tables_manifest.txt");
    check(
        "antibody/antigen/idiotope tables match the manifest",
        idnav::behaviors::tables_manifest() == manifest,
    );

    if failures > 0 {
        return Err(format!("{failures} selftest check(s) failed").into());
    }
    Ok(())
}
