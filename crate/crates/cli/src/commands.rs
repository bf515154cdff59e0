use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use msms_core::codec::CostDescriptor;
use msms_core::fault::{run_attack, AttackSetup};
use msms_core::monitor::{Digest, StateDump, Strategy};
use msms_core::sim::{execute, theoretical_cost, CostRow, CsvWriter, SimulationConfig};
use msms_core::sweep::ComparisonReport;
use serde::Serialize;

use crate::config::ConfigFile;
use crate::report::{self, now, write_json, RunManifest};
use crate::{AttackArgs, AuditArgs, CostModelArgs, SimulateArgs, EXIT_ATTACK_SUCCEEDED};

const DEFAULT_OUT: &str = "msms-out";
const SEED_ENV: &str = "MSMS_SEED";

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(raw) => Ok(Some(raw.trim().parse().with_context(|| format!("{SEED_ENV}={raw:?} is not a u64"))?)),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: Option<u64>, file: &ConfigFile) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(seed) = file.get("seed")? {
        return Ok(seed);
    }
    Ok(env_seed()?.unwrap_or(0))
}

#[derive(Debug, Serialize)]
struct SimulateEcho {
    simulation: SimulationConfig,
    compare: bool,
    out: PathBuf,
}

pub fn simulate(args: SimulateArgs) -> Result<u8> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let d = SimulationConfig::default();
    let config = SimulationConfig {
        n_ops: args.n.or(file.get("n")?).unwrap_or(d.n_ops),
        word_width: args.width.or(file.get("width")?).unwrap_or(d.word_width),
        priority_fraction: args.p_priority.or(file.get("p-priority")?).unwrap_or(d.priority_fraction),
        per_op_probability: args.error_prob.or(file.get("error-prob")?).unwrap_or(d.per_op_probability),
        strategy: args.strategy.or(file.get("strategy")?).unwrap_or(d.strategy),
        codec: args.codec.or(file.get("codec")?).unwrap_or(d.codec),
        seed: resolve_seed(args.seed, &file)?,
        priority_mode: args.priority_mode.or(file.get("priority-mode")?).unwrap_or(d.priority_mode),
        read_policy: args.policy.or(file.get("policy")?).unwrap_or(d.read_policy),
        check_zone_injection: args.inject_check_zone || file.get("inject-check-zone")?.unwrap_or(false),
        words_per_page: args.words_per_page.or(file.get("words-per-page")?).unwrap_or(d.words_per_page),
    };
    config.validate()?;
    let compare = args.compare || file.get("compare")?.unwrap_or(false);
    let out = args.out.or(file.get("out")?).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    let started_at = now();
    fs::create_dir_all(&out).with_context(|| format!("creating output directory {}", out.display()))?;
    let strategies = if compare { Strategy::ALL.to_vec() } else { vec![config.strategy] };
    let mut manifest = RunManifest::new(
        "simulate",
        config.seed,
        SimulateEcho { simulation: config, compare, out: out.clone() },
        started_at,
    );

    let mut reports = Vec::new();
    for strategy in strategies {
        let run_config = config.with_strategy(strategy);
        let csv_path = out.join(format!("records-{strategy}.csv"));
        let csv_file = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
        let mut csv = CsvWriter::new(BufWriter::new(csv_file))?;
        let mut write_error = None;
        let run = execute(&run_config, |record| {
            if write_error.is_none() {
                write_error = csv.write_record(record).err();
            }
        })?;
        if let Some(err) = write_error {
            return Err(err).with_context(|| format!("writing {}", csv_path.display()));
        }
        csv.into_inner().with_context(|| format!("writing {}", csv_path.display()))?;

        let state_path = out.join(format!("state-{strategy}.json"));
        write_json(&state_path, &run.store.dump())?;
        manifest.artifacts.extend([csv_path, state_path]);
        reports.push(run.report);
    }

    let comparison = ComparisonReport::from_reports(config.seed, reports);
    let report_path = out.join("report.json");
    write_json(&report_path, &comparison)?;
    manifest.artifacts.push(report_path);
    print!("{}", report::summary_table(&comparison));
    let manifest_path = manifest.finish(&out)?;
    println!("wrote {}", manifest_path.display());
    Ok(0)
}

pub fn cost_model(args: CostModelArgs) -> Result<u8> {
    if !(0.0..=1.0).contains(&args.p_priority) {
        bail!("--p-priority must lie in [0, 1], got {}", args.p_priority);
    }
    if !(args.time_mult >= 1.0 && args.space_mult >= 1.0) {
        bail!("multipliers must be at least 1");
    }
    let technique = CostDescriptor::multipliers(args.time_mult, args.space_mult);
    let base = CostRow { time: args.base_time, space: args.base_space };
    let result = theoretical_cost(args.p_priority, &technique, base, args.formula)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&result)?);
    } else {
        print!("{}", report::cost_table(&result));
    }
    Ok(0)
}

pub fn attack(args: AttackArgs) -> Result<u8> {
    let seed = match args.seed {
        Some(seed) => seed,
        None => env_seed()?.unwrap_or(0),
    };
    let setup = AttackSetup {
        strategy: args.strategy,
        protect_page: args.protect_page,
        priority_victim: args.priority_victim,
        read_policy: args.policy,
        words_per_page: args.words_per_page,
        seed,
        ..AttackSetup::default()
    };
    let started_at = now();
    let (outcome, store) = run_attack(&setup)?;
    println!("{}", serde_json::to_string_pretty(&outcome)?);

    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
        let mut manifest = RunManifest::new("attack", seed, setup, started_at);
        let outcome_path = out.join("attack-outcome.json");
        write_json(&outcome_path, &outcome)?;
        let state_path = out.join("attack-state.json");
        write_json(&state_path, &store.dump())?;
        manifest.artifacts.extend([outcome_path, state_path]);
        manifest.finish(out)?;
    }

    if args.force_merge && !outcome.merged {
        bail!("--force-merge: the attacker page was not merged with the victim page");
    }
    Ok(if outcome.attack_succeeded() { EXIT_ATTACK_SUCCEEDED } else { 0 })
}

pub fn audit(args: AuditArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.dump).with_context(|| format!("reading dump {}", args.dump.display()))?;
    let dump: StateDump =
        serde_json::from_str(&text).with_context(|| format!("parsing dump {}", args.dump.display()))?;
    let verdict = dump.verify_audit();
    let audit = &dump.audit;
    match verdict.first_break {
        None if audit.entries.is_empty() && audit.anchor == Digest::GENESIS && audit.first_sequence == 0 => {
            println!("chain OK (genesis)");
            Ok(0)
        }
        None => {
            println!(
                "chain OK ({} entries, sequences {}..{}, {})",
                audit.entries.len(),
                audit.first_sequence,
                audit.first_sequence + audit.entries.len() as u64,
                audit.digest_algorithm
            );
            Ok(0)
        }
        Some(sequence) => {
            println!("chain broken at sequence {sequence}");
            Ok(1)
        }
    }
}
