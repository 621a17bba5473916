//! `lorroll`: geodesics, development, rolling and holonomy from the command line.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_list, ConfigError, OutFormat, RunConfig};

const MANIFOLD_HELP: &str = "Manifold: flat:n,nu | s:n,nu,r | h:n,nu,r | clifton-pohl | inline JSON | path to .json";

#[derive(Parser)]
#[command(
    name = "lorroll",
    version,
    about = "Rolling of pseudo-Riemannian manifolds and holonomy tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a geodesic (CSV by default; --probe reports completeness).
    Geodesic(Common),
    /// Develop a curve into the flat model space.
    Develop(Common),
    /// Roll along a curve without slipping or twisting.
    Roll(Common),
    /// Estimate the holonomy algebra, or the holonomy of one loop with --loop.
    Holonomy(Common),
    /// Decide whether a finitely generated subgroup of SE0(n,1) is the whole group.
    ClassifyGroup(Common),
    /// Controllability verdict for rolling on the flat model space.
    Controllability(Common),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct Common {
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, help = MANIFOLD_HELP)]
    manifold: Option<String>,
    /// Base point, comma separated.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    x: Option<::std::vec::Vec<f64>>,
    /// Initial velocity, comma separated.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    v: Option<::std::vec::Vec<f64>>,
    /// Final time.
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_enum)]
    out: Option<OutFormat>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Holonomy method: loops | curvature.
    #[arg(long)]
    method: Option<String>,
    /// Closed loop rect:i,j,s (coordinate or frame rectangle of side s).
    #[arg(long = "loop")]
    loop_spec: Option<String>,
    /// Curve: geodesic[:T], or a .json / .csv file.
    #[arg(long)]
    curve: Option<String>,
    /// Rolling target (defaults to the flat space of the same signature).
    #[arg(long)]
    target: Option<String>,
    /// Report completeness instead of the geodesic.
    #[arg(long)]
    probe: bool,
    /// Generators: JSON list of {y, C}, a .json file, family:full:n or family:fixed-point:n.
    #[arg(long, allow_hyphen_values = true)]
    generators: Option<String>,
    /// Longest word tried by classify-group.
    #[arg(long)]
    word_len: Option<usize>,
}

impl Common {
    fn into_config(self) -> Result<RunConfig, ConfigError> {
        let file = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            manifold: self.manifold.map(serde_json::Value::String),
            x: self.x,
            v: self.v,
            t: self.t,
            step: self.step,
            tol: self.tol,
            seed: self.seed,
            budget: self.budget,
            out: self.out,
            output: self.output,
            method: self.method,
            loop_spec: self.loop_spec,
            curve: self.curve,
            target: self.target.map(serde_json::Value::String),
            probe: self.probe.then_some(true),
            generators: self.generators.map(serde_json::Value::String),
            word_len: self.word_len,
        };
        Ok(flags.or(file))
    }
}

fn run(cli: Cli) -> Result<u8, Box<dyn std::error::Error>> {
    let (common, cmd): (Common, fn(&RunConfig) -> commands::CmdResult) = match cli.command {
        Command::Geodesic(c) => (c, commands::geodesic_cmd),
        Command::Develop(c) => (c, commands::develop_cmd),
        Command::Roll(c) => (c, commands::roll_cmd),
        Command::Holonomy(c) => (c, commands::holonomy_cmd),
        Command::ClassifyGroup(c) => (c, commands::classify_cmd),
        Command::Controllability(c) => (c, commands::controllability_cmd),
    };
    let cfg = common.into_config()?;
    let report = cmd(&cfg)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, &report.text)?,
        None => std::io::stdout().lock().write_all(report.text.as_bytes())?,
    }
    Ok(report.exit)
}

fn main() -> ExitCode {
    // usage errors exit 1; 2 is reserved for inconclusive results
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
