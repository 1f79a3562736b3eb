use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use lcesim::checkpoint;
use lcesim::harness::{self, presets, PlotFormat};
use lcesim::run::{run_stepper, RunOptions, RunOutput};
use lcesim::timestepper::{RunConfig, Stepper};

#[derive(Parser)]
#[command(
    name = "lcesim",
    version,
    about = "Hyperbolic liquid crystal elastomer simulator and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Plot {
    None,
    Svg,
    Gnuplot,
}

#[derive(clap::Args)]
struct Output {
    /// Directory for the CSV series and plots.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Plot::Svg)]
    plot: Plot,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// List or run registered presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Run one acceptance suite and print its JSON summary.
    Verify { name: String },
    /// Continue a run from a checkpoint.
    Resume {
        checkpoint: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Run {
        name: String,
        #[command(flatten)]
        output: Output,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            let summary = json!({ "status": "error", "error": e.to_string() });
            eprintln!("error: {e}");
            println!("{summary}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> lcesim::Result<ExitCode> {
    match cmd {
        Command::Run { config, output } => {
            let cfg = harness::load_config(&config)?;
            finish(Stepper::new(cfg)?, &output)
        }
        Command::Preset {
            action: PresetAction::List,
        } => {
            for p in presets::all() {
                println!("{:<24} criterion {:>2}  {}", p.name, p.criterion, p.description);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Preset {
            action: PresetAction::Run { name, output },
        } => {
            let p = presets::find(&name).ok_or(lcesim::Error::UnknownPreset(name))?;
            finish(Stepper::new(p.config)?, &output)
        }
        Command::Verify { name } => {
            let r = harness::verify(&name)?;
            eprintln!("{}", r.summary_line());
            println!("{}", serde_json::to_string_pretty(&r).expect("reports serialize"));
            Ok(if r.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Resume {
            checkpoint: path,
            output,
        } => {
            let st = checkpoint::resume(checkpoint::read(&path)?)?;
            finish(st, &output)
        }
    }
}

fn finish(st: Stepper, output: &Output) -> lcesim::Result<ExitCode> {
    let cfg: RunConfig = st.config.clone();
    let out = run_stepper(st, &RunOptions::default())?;
    write_outputs(&out, &output.out, output.plot)?;
    let max = out.series.max_constraints();
    let summary = json!({
        "status": "ok",
        "formulation": cfg.run.formulation.name(),
        "t": out.state.time(),
        "dt": out.dt,
        "rows": out.series.rows.len(),
        "energy_drift": out.series.energy_drift(),
        "max_constraints": max.named().iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "checkpoints": out.checkpoints,
        "series": output.out.join("series.csv"),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summaries serialize")
    );
    Ok(ExitCode::SUCCESS)
}

fn write_outputs(out: &RunOutput, dir: &Path, plot: Plot) -> lcesim::Result<()> {
    let csv = dir.join("series.csv");
    harness::emit_series(&out.series, &csv)?;
    match plot {
        Plot::None => {}
        Plot::Svg => {
            harness::emit_plots(&out.series, &csv, PlotFormat::Svg)?;
        }
        Plot::Gnuplot => {
            harness::emit_plots(&out.series, &csv, PlotFormat::Gnuplot)?;
        }
    }
    Ok(())
}
