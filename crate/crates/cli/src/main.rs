use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sphere_lrd::harness::{
    emit_sidecar, emit_table, run_consistency_experiment, run_power_experiment,
    run_size_experiment, ExperimentConfig, ResultTable, RunOptions, Setup,
};
use sphere_lrd::par::with_threads;
use sphere_lrd::reconstruct::{design_matrix, mass_matrix_deviation};
use sphere_lrd::seed::{child_seed, stream};
use sphere_lrd::simulate::simulate_series;
use sphere_lrd::LrdError;

#[derive(Parser)]
#[command(name = "sphere-lrd", version, about = "Spectral LRD testing for functional time series on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a coefficient series and write it as CSV.
    Simulate(Common),
    /// Simulate, observe and reconstruct one series; write the reconstruction.
    Reconstruct(Common),
    /// Run the test on one simulated data set.
    Test(Common),
    /// Empirical size under the SPHARMA(1,1) null.
    Size(Common),
    /// Empirical power under an example alternative.
    Power(Common),
    /// Median statistic norm along a grid of series lengths.
    Consistency(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON file with per-replicate values.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress progress and diagnostics on stderr.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn load(&self, base: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path, base)?,
            None => base,
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.reps {
            cfg.reps = r;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn options(&self) -> RunOptions {
        let mut opts = RunOptions::default();
        if !self.quiet {
            opts.progress = Some(Box::new(|done, total| {
                eprint!("\r{done}/{total} replicates");
                if done == total {
                    eprintln!();
                }
            }));
        }
        opts
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| LrdError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(std::io::BufWriter::new(f))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LrdError + '_ {
    move |e| LrdError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn finish_table(common: &Common, table: &ResultTable) -> Result<()> {
    for w in &table.warnings {
        common.note(format!("warning: {w}"));
    }
    emit_table(table, &common.out)?;
    if let Some(json) = &common.json {
        emit_sidecar(table, json)?;
    }
    common.note(table.to_csv().trim_end());
    Ok(())
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = common.load(ExperimentConfig::size_defaults())?;
    let sieve = cfg.sieve.sieve(cfg.len);
    let model = cfg.generator(sieve)?;
    let series = with_threads(cfg.threads, || {
        simulate_series(&model, cfg.len, cfg.burn_in, child_seed(child_seed(cfg.seed, 0), stream::SERIES))
    })?;
    let mut w = create(&common.out)?;
    series.write_csv(&mut w).map_err(io_err(&common.out))?;
    w.flush().map_err(io_err(&common.out))?;
    common.note(format!(
        "simulated T = {} over {} harmonics (degrees 0..={})",
        series.len(),
        series.dim(),
        series.sieve().max_degree()
    ));
    Ok(())
}

fn reconstruct(common: &Common) -> Result<()> {
    let cfg = common.load(ExperimentConfig::size_defaults())?;
    let setup = Setup::new(&cfg, cfg.len, cfg.sieve.sieve(cfg.len), false)?;
    for w in setup.warnings() {
        common.note(format!("warning: {w}"));
    }
    let data = with_threads(cfg.threads, || setup.replicate_data(0))?;
    let mut w = create(&common.out)?;
    data.estimate.write_csv(&mut w).map_err(io_err(&common.out))?;
    w.flush().map_err(io_err(&common.out))?;
    let k = setup.sieve.size();
    let truth = data.truth.values().columns(0, k);
    let mse = (data.estimate.values() - truth).norm_squared() / cfg.len as f64;
    let design = design_matrix(data.observations.locations(), setup.sieve)?;
    common.note(format!(
        "M = {}, k = {}, rank = {}, mass-matrix deviation = {:.4e}, mean squared coefficient error = {:.4e}",
        setup.locations,
        k,
        data.reconstructor.rank(),
        mass_matrix_deviation(&design),
        mse
    ));
    if let Some(json) = &common.json {
        let mut w = create(json)?;
        serde_json::to_writer_pretty(
            &mut w,
            &serde_json::json!({
                "locations": setup.locations,
                "k": k,
                "rank": data.reconstructor.rank(),
                "mass_matrix_deviation": mass_matrix_deviation(&design),
                "mse": mse,
            }),
        )?;
        w.flush().map_err(io_err(json))?;
    }
    Ok(())
}

fn test(common: &Common) -> Result<()> {
    let cfg = common.load(ExperimentConfig::size_defaults())?;
    let setup = Setup::new(&cfg, cfg.len, cfg.sieve.sieve(cfg.len), true)?;
    for w in setup.warnings() {
        common.note(format!("warning: {w}"));
    }
    let outcome = with_threads(cfg.threads, || setup.test_replicate(0))?;
    let mut w = create(&common.out)?;
    let write = |w: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        writeln!(w, "projection,z,reject,statistic,center,variance")?;
        for i in 0..outcome.z.len() {
            writeln!(
                w,
                "{},{:.6},{},{:.6e},{:.6e},{:.6e}",
                i + 1,
                outcome.z[i],
                outcome.reject[i],
                outcome.projected[i],
                outcome.center[i],
                outcome.variance[i]
            )?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(&common.out))?;
    if let Some(json) = &common.json {
        let mut w = create(json)?;
        serde_json::to_writer_pretty(&mut w, &outcome)?;
        w.flush().map_err(io_err(json))?;
    }
    common.note(format!(
        "HS norm {:.4e}; rejections {}/{} at critical value {:.4}",
        outcome.hs_norm,
        outcome.reject.iter().filter(|&&r| r).count(),
        outcome.reject.len(),
        outcome.critical_value
    ));
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Reconstruct(c) => reconstruct(c),
        Command::Test(c) => test(c),
        Command::Size(c) => {
            let cfg = c.load(ExperimentConfig::size_defaults())?;
            let table = run_size_experiment(&cfg, &c.options()).context("size study")?;
            finish_table(c, &table)
        }
        Command::Power(c) => {
            let cfg = c.load(ExperimentConfig::power_defaults())?;
            let table = run_power_experiment(&cfg, &c.options()).context("power study")?;
            finish_table(c, &table)
        }
        Command::Consistency(c) => {
            let cfg = c.load(ExperimentConfig::consistency_defaults())?;
            let table = run_consistency_experiment(&cfg, &c.options()).context("consistency study")?;
            finish_table(c, &table)
        }
    }
}

/// 2 for configuration problems, 3 for I/O failures, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<LrdError>()) {
        Some(LrdError::Config(_)) => 2,
        Some(LrdError::Io { .. }) => 3,
        _ => {
            if err.chain().any(|e| e.downcast_ref::<std::io::Error>().is_some()) {
                3
            } else {
                1
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
