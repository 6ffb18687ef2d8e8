use std::process::ExitCode;

use capset_core::capacity::capacity_sets;
use capset_core::sampling::{oracle_sweep, OracleSweepConfig, OracleSweepReport, ORACLE_MAX_SUPPORT};
use capset_core::{CapsetError, SolverConfig};
use serde::Serialize;

use crate::args::OracleArgs;
use crate::dict::{self, DictDescriptor};
use crate::{thread_pool, write_file, CliError, CliResult};

/// Default caps for the oracle suite; `--force` lifts them.
const MAX_ROWS: usize = 8;
const MAX_COLS: usize = 16;

#[derive(Debug, Serialize)]
struct OracleReport {
    dictionary: DictDescriptor,
    supports: usize,
    max_support: usize,
    seed: u64,
    capacity_scale: f64,
    certified: usize,
    reconstructible: usize,
    matchings_checked: usize,
    violations: Vec<String>,
}

pub fn run(mut args: OracleArgs) -> CliResult<ExitCode> {
    if args.dict.load.is_none() && args.dict.n.is_none() {
        args.dict.n = Some(6);
        args.dict.l = args.dict.l.or(Some(12));
    }
    if args.max_support == 0 || args.max_support > ORACLE_MAX_SUPPORT {
        return Err(CapsetError::TooLarge {
            size: args.max_support,
            cap: ORACLE_MAX_SUPPORT,
        }
        .into());
    }
    let pool = thread_pool(args.jobs)?;
    pool.install(|| sweep(args))
}

fn sweep(args: OracleArgs) -> CliResult<ExitCode> {
    let (dict, descriptor) = dict::build(&args.dict)?;
    if !args.force && (dict.rows() > MAX_ROWS || dict.cols() > MAX_COLS) {
        return Err(CliError::Core(CapsetError::TooLarge {
            size: dict.rows().max(dict.cols()),
            cap: if dict.rows() > MAX_ROWS { MAX_ROWS } else { MAX_COLS },
        }));
    }
    let solver = SolverConfig::default();
    log::info!("oracle: capacity sets for {} ({} LPs)", dict.label(), dict.cols() * dict.cols());
    let (q, qm) = capacity_sets(&dict, &solver)?;
    let config = OracleSweepConfig {
        supports: args.supports,
        max_support: args.max_support,
        seed: args.dict.seed,
        capacity_scale: if args.inject_fault { 0.5 } else { 1.0 },
        solver,
        ..OracleSweepConfig::default()
    };
    log::info!("oracle: sweeping {} supports of size ≤ {}", config.supports, config.max_support);
    let OracleSweepReport {
        supports,
        certified,
        reconstructible,
        matchings_checked,
        violations,
    } = oracle_sweep(&dict, &q, &qm, &config)?;
    let report = OracleReport {
        dictionary: descriptor,
        supports,
        max_support: config.max_support,
        seed: config.seed,
        capacity_scale: config.capacity_scale,
        certified,
        reconstructible,
        matchings_checked,
        violations: violations.iter().map(|v| format!("{v:?}")).collect(),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Output(e.to_string()))? + "\n";
    if let Some(path) = &args.out {
        write_file(path, &json)?;
    }
    print!("{json}");
    if report.violations.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        log::error!("{} oracle violations", report.violations.len());
        Ok(ExitCode::from(1))
    }
}
