//! `fracmem` command line: forward solves, single reconstructions, table and
//! figure reproductions, and gradient validation.
//!
//! Usage:
//!   fracmem forward   <config.ini> [--out DIR] [--seed S] [--vtk]
//!   fracmem invert    <config.ini> [--out DIR] [--seed S] [--vtk]
//!   fracmem figure3   <config.ini> [--out DIR] [--seed S] [--vtk]
//!   fracmem table1    <config.ini> [--seeds s1,s2,...] [--out DIR]
//!   fracmem table2    <config.ini> [--seeds s1,s2,...] [--out DIR]
//!   fracmem table3    <config.ini> [--seeds s1,s2,...] [--out DIR]
//!   fracmem gradcheck <config.ini> [--out DIR] [--trials N]
//!
//! On failure a single machine-readable line `error\t<kind>\t<message>` goes
//! to stderr and the exit code is nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use fracmem::error::{Error, Result};
use fracmem::harness::{
    run_experiment, run_forward, run_gradcheck, run_table, ExperimentConfig,
};

struct Cli {
    command: String,
    config_path: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    seeds: Option<Vec<u64>>,
    trials: usize,
    vtk: bool,
}

fn usage() -> &'static str {
    "usage: fracmem <forward|invert|figure3|table1|table2|table3|gradcheck> <config.ini> \
     [--out DIR] [--seed S] [--seeds s1,s2,...] [--trials N] [--vtk]"
}

fn parse_args(args: &[String]) -> Result<Cli> {
    if args.len() < 2 {
        return Err(Error::config(usage()));
    }
    let command = args[0].clone();
    let config_path = PathBuf::from(&args[1]);
    let mut cli = Cli {
        command,
        config_path,
        out: None,
        seed: None,
        seeds: None,
        trials: 8,
        vtk: false,
    };
    let mut i = 2;
    while i < args.len() {
        match args[i].as_str() {
            "--out" => {
                i += 1;
                let v = args.get(i).ok_or_else(|| Error::config("--out needs a value"))?;
                cli.out = Some(PathBuf::from(v));
            }
            "--seed" => {
                i += 1;
                let v = args.get(i).ok_or_else(|| Error::config("--seed needs a value"))?;
                cli.seed = Some(
                    v.parse()
                        .map_err(|_| Error::config(format!("bad seed `{v}`")))?,
                );
            }
            "--seeds" => {
                i += 1;
                let v = args
                    .get(i)
                    .ok_or_else(|| Error::config("--seeds needs a value"))?;
                let seeds: Result<Vec<u64>> = v
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| Error::config(format!("bad seed `{s}`")))
                    })
                    .collect();
                cli.seeds = Some(seeds?);
            }
            "--trials" => {
                i += 1;
                let v = args
                    .get(i)
                    .ok_or_else(|| Error::config("--trials needs a value"))?;
                cli.trials = v
                    .parse()
                    .map_err(|_| Error::config(format!("bad trial count `{v}`")))?;
            }
            "--vtk" => cli.vtk = true,
            other => return Err(Error::config(format!("unknown flag `{other}`"))),
        }
        i += 1;
    }
    Ok(cli)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&cli.config_path)
        .map_err(|e| Error::Io(format!("{}: {e}", cli.config_path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.vtk {
        cfg.vtk = true;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out_dir = cfg.out_dir.clone();
    match cli.command.as_str() {
        "forward" => {
            let u = run_forward(&cfg, &out_dir)?;
            println!(
                "forward solve done: {} steps, {} dofs, max |u| = {:.6e}",
                u.n_rows() - 1,
                u.ndof(),
                u.max_abs()
            );
        }
        "invert" | "figure3" => {
            let out = run_experiment(&cfg, &out_dir)?;
            println!(
                "reconstruction done: rel_error = {:.6e}, final_cost = {:.6e}, iterations = {}, stop = {}",
                out.metrics.rel_error,
                out.metrics.final_cost,
                out.metrics.iterations,
                out.state.stop.as_str()
            );
        }
        "table1" | "table2" | "table3" => {
            let id: u8 = cli.command.as_bytes()[5] - b'0';
            let seeds = cli
                .seeds
                .clone()
                .unwrap_or_else(|| vec![cfg.rng_seed]);
            let rows = run_table(id, &cfg, &seeds, &out_dir)?;
            for (i, row) in rows.iter().enumerate() {
                match &row.error {
                    None => println!(
                        "row {i} [{}]: median rel_error = {:.4e} (min {:.4e}, max {:.4e})",
                        row.label, row.median_rel_error, row.min_rel_error, row.max_rel_error
                    ),
                    Some(e) => println!("row {i} [{}]: FAILED ({e})", row.label),
                }
            }
        }
        "gradcheck" => {
            let rows = run_gradcheck(&cfg, cli.trials, &out_dir)?;
            let worst = rows.iter().map(|r| r.rel_diff).fold(0.0f64, f64::max);
            for (i, r) in rows.iter().enumerate() {
                println!(
                    "trial {i}: adjoint = {:.8e}, fd = {:.8e}, rel diff = {:.3e}",
                    r.adjoint_value, r.fd_value, r.rel_diff
                );
            }
            println!("worst relative difference: {worst:.3e}");
        }
        other => {
            return Err(Error::config(format!(
                "unknown subcommand `{other}`; {}",
                usage()
            )))
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse_args(&args) {
        Ok(cli) => cli,
        Err(e) => {
            eprintln!("error\t{}\t{e}", e.kind());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error\t{}\t{e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
