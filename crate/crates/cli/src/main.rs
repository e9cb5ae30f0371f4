//! `rhq`: runs, validates and lists quaternionic Schrödinger scenarios.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rhq_core::scenario::{
    builtin_names, builtin_source, emit_report, parse_scenario, run_scenario, summary_text, Format, RunOptions, Scenario,
};
use rhq_core::Error;

const CONFIG_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "rhq", version, about = "Real-bracket quaternionic quantum mechanics: scenario runner")]
struct Cli {
    /// Multiplies every check tolerance; recorded in the manifest.
    #[arg(long, global = true, value_name = "FACTOR", default_value_t = 1.0)]
    tolerance_scale: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs scenarios and writes their report bundles.
    Run {
        /// Scenario files or built-in names. Several scenarios run in parallel.
        #[arg(required = true)]
        scenarios: Vec<String>,
        /// Output directory. With several scenarios each gets a subdirectory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Report format; defaults to the scenario's own setting.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Parses and validates scenarios without running them.
    Verify {
        #[arg(required = true)]
        scenarios: Vec<String>,
    },
    /// Lists the built-in scenarios.
    ListScenarios {
        /// Prints the source of one built-in scenario instead.
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Table,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Table => Format::Table,
        }
    }
}

/// Reads `arg` as a file, falling back to a built-in scenario of that name.
fn load(arg: &str) -> Result<Scenario, Error> {
    let path = Path::new(arg);
    let text = if path.exists() {
        std::fs::read_to_string(path)?
    } else if let Some(source) = builtin_source(arg) {
        source.to_string()
    } else {
        let known: Vec<&str> = builtin_names().collect();
        return Err(Error::Config(format!("{arg}: no such file or built-in scenario (built-ins: {})", known.join(", "))));
    };
    parse_scenario(&text)
}

fn out_dir(scenario: &Scenario, out: Option<&Path>, several: bool) -> PathBuf {
    match (out, &scenario.output.directory) {
        (Some(dir), _) if several => dir.join(&scenario.name),
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => Path::new("rhq-out").join(&scenario.name),
    }
}

/// Runs one scenario; returns its exit code and the text to print.
fn run_one(arg: &str, options: &RunOptions, out: Option<&Path>, format: Option<Format>, several: bool) -> (u8, String) {
    let scenario = match load(arg) {
        Ok(s) => s,
        Err(e) => return (CONFIG_ERROR, format!("{arg}: {e}\n")),
    };
    let bundle = match run_scenario(&scenario, options) {
        Ok(b) => b,
        Err(e) => return (CONFIG_ERROR, format!("{arg}: {e}\n")),
    };
    let dir = out_dir(&scenario, out, several);
    let format = format.unwrap_or(scenario.output.format);
    let mut text = summary_text(&bundle);
    match emit_report(&bundle, format, &dir) {
        Ok(files) => text.push_str(&format!("wrote {} files to {}\n", files.len(), dir.display())),
        Err(e) => return (CONFIG_ERROR, format!("{text}{}: {e}\n", dir.display())),
    }
    (bundle.exit_code() as u8, text)
}

fn run(scenarios: &[String], options: &RunOptions, out: Option<&Path>, format: Option<Format>) -> u8 {
    let several = scenarios.len() > 1;
    let results: Vec<(u8, String)> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|arg| scope.spawn(move || run_one(arg, options, out, format, several)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    });
    let mut code = 0;
    for (n, (c, text)) in results.iter().enumerate() {
        if n > 0 {
            println!();
        }
        if *c == CONFIG_ERROR {
            eprint!("{text}");
        } else {
            print!("{text}");
        }
        code = code.max(*c);
    }
    code
}

fn verify(scenarios: &[String]) -> u8 {
    let mut code = 0;
    for arg in scenarios {
        match load(arg) {
            Ok(s) => {
                let formulations: Vec<&str> = s.run_formulations().iter().map(|f| f.name()).collect();
                println!(
                    "{arg}: ok ({}, {} steps, {} checks, formulations {})",
                    s.name,
                    s.time.steps(),
                    s.checks.len(),
                    formulations.join(", ")
                );
            }
            Err(e) => {
                eprintln!("{arg}: {e}");
                code = CONFIG_ERROR;
            }
        }
    }
    code
}

fn list(show: Option<&str>) -> u8 {
    if let Some(name) = show {
        return match builtin_source(name) {
            Some(source) => {
                print!("{source}");
                0
            }
            None => {
                eprintln!("no built-in scenario {name:?}");
                CONFIG_ERROR
            }
        };
    }
    for name in builtin_names() {
        let description = parse_scenario(builtin_source(name).unwrap_or_default())
            .map(|s| s.description)
            .unwrap_or_else(|e| format!("(invalid: {e})"));
        println!("{name:<26}{description}");
    }
    0
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !(cli.tolerance_scale.is_finite() && cli.tolerance_scale > 0.0) {
        eprintln!("--tolerance-scale must be a positive number, got {}", cli.tolerance_scale);
        return ExitCode::from(CONFIG_ERROR);
    }
    let options = RunOptions { tolerance_scale: cli.tolerance_scale };
    let code = match &cli.command {
        Command::Run { scenarios, out, format } => run(scenarios, &options, out.as_deref(), format.map(Format::from)),
        Command::Verify { scenarios } => verify(scenarios),
        Command::ListScenarios { show } => list(show.as_deref()),
    };
    ExitCode::from(code)
}
