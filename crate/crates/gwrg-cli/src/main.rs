//! `gwrg`: reproducible experiment runner. Exit codes: 0 success, 1 usage
//! error, 2 resource limit, 3 oracle-suite disagreement.

mod config;
mod experiments;
mod output;
mod suite;

use std::time::Instant;

use clap::Parser;

use config::{Args, Experiment, Resolved};
use experiments::Rows;
use gwrg_core::Error;

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match config::resolve(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(threads) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return 1;
        }
    }
    match execute(&cfg) {
        Ok(true) => 0,
        Ok(false) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::VertexCap { .. } | Error::OracleTooLarge { .. } | Error::Io(_) => 2,
        _ => 1,
    }
}

fn execute(cfg: &Resolved) -> gwrg_core::Result<bool> {
    let started = Instant::now();
    // Every experiment except the suite produces a result file.
    if cfg.experiment != Experiment::OracleSuite {
        cfg.require_out()?;
    }
    let run = experiments::run(cfg)?;
    if let Some(path) = &cfg.out {
        let written = match &run.rows {
            Rows::Stats(rows) => {
                output::write_rows(path, cfg.format, rows)?;
                rows.len()
            }
            Rows::Connectivity(rows) => {
                output::write_rows(path, cfg.format, rows)?;
                rows.len()
            }
            Rows::Estimates(rows) => {
                output::write_rows(path, cfg.format, rows)?;
                rows.len()
            }
        };
        let mut pairs = cfg.manifest_pairs();
        pairs.extend(run.manifest_extra.iter().cloned());
        pairs.push(("version".into(), env!("CARGO_PKG_VERSION").into()));
        pairs.push(("wall_ms".into(), started.elapsed().as_millis().to_string()));
        output::write_manifest(path, &pairs)?;
        println!("wrote {} ({written} rows)", path.display());
    }
    Ok(run.suite_ok)
}
