use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shared_control::parallel::Execution;
use shared_control::risk::{assess, RiskQuery};
use shared_control::sim::sweep::{parse_values, sweep};
use shared_control::sim::{run_with, write_summary_json, write_trace_csv, Mode, RunOptions, ScenarioConfig, SimError};
use shared_control::{fis_alpha, FuzzySets, RuleBase};

#[derive(Parser)]
#[command(name = "shared-control", version, about = "Shared-control driving simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv and summary.json.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's mode.
        #[arg(long)]
        mode: Option<Mode>,
        /// Also write geometry.json with the triangulation and corridor.
        #[arg(long)]
        dump_geometry: bool,
        /// Steps between geometry snapshots.
        #[arg(long, default_value_t = 20)]
        geometry_every: usize,
    },
    /// Read a JSON risk query (file or stdin) and print the risk report.
    RiskEval {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Read `r_y,r_x` rows and write `r_y,r_x,alpha` rows.
    FisEval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Take fuzzy sets and rules from this scenario instead of the defaults.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Run a scenario once per value of one dotted parameter.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        /// Directory for one summary file per value.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => Failure::Config(e.to_string()),
            SimError::Numerical { .. } => Failure::Numerical(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Config(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            out,
            mode,
            dump_geometry,
            geometry_every,
        } => simulate(&scenario, &out, mode, dump_geometry.then_some(geometry_every)),
        Command::RiskEval { input } => risk_eval(input.as_deref()),
        Command::FisEval {
            input,
            output,
            scenario,
        } => fis_eval(&input, output.as_deref(), scenario.as_deref()),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
            sequential,
        } => run_sweep(&scenario, &param, &values, out.as_deref(), sequential),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn simulate(scenario: &Path, out: &Path, mode: Option<Mode>, geometry_every: Option<usize>) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::load(scenario)?;
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if cfg.name.is_empty() {
        cfg.name = scenario
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let result = run_with(&cfg, &RunOptions { geometry_every });
    let output = match result {
        Ok(o) => o,
        Err(SimError::Numerical { step, message, record }) => {
            if let Some(rec) = record {
                let path = out.join("abort_record.json");
                let text = serde_json::to_string_pretty(&rec).expect("record serialises");
                std::fs::write(&path, text).map_err(io_err(&path))?;
            }
            return Err(Failure::Numerical(format!(
                "numerical failure at step {step}: {message}"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let trace_path = out.join("trace.csv");
    write_trace_csv(&trace_path, &output.trace).map_err(io_err(&trace_path))?;
    let summary_path = out.join("summary.json");
    write_summary_json(&summary_path, &output.summary).map_err(io_err(&summary_path))?;
    if geometry_every.is_some() {
        let path = out.join("geometry.json");
        let text = serde_json::to_string(&output.geometry).expect("geometry serialises");
        std::fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(())
}

fn risk_eval(input: Option<&Path>) -> Result<(), Failure> {
    let text = match input {
        Some(p) => std::fs::read_to_string(p).map_err(io_err(p))?,
        None => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::Config(format!("stdin: {e}")))?;
            s
        }
    };
    let query: RiskQuery = serde_json::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
    query.validate().map_err(Failure::Config)?;
    let report = assess(&query);
    println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    Ok(())
}

fn fis_eval(input: &Path, output: Option<&Path>, scenario: Option<&Path>) -> Result<(), Failure> {
    let (sets, rules) = match scenario {
        Some(p) => {
            let cfg = ScenarioConfig::load(p)?;
            (cfg.fis.sets, cfg.fis.rules)
        }
        None => (FuzzySets::default(), RuleBase::default()),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(input)
        .map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Failure::Config(e.to_string()))?;
        let parsed: Option<(f64, f64)> = match (rec.get(0), rec.get(1), rec.len()) {
            (Some(a), Some(b), 2) => a.parse().ok().zip(b.parse().ok()),
            _ => None,
        };
        match parsed {
            Some((r_y, r_x)) if (0.0..=1.0).contains(&r_y) && (0.0..=1.0).contains(&r_x) => rows.push((r_y, r_x)),
            // A non-numeric first row is a header.
            None if i == 0 => {}
            _ => return Err(Failure::Config(format!("row {}: expected two risks in [0, 1]", i + 1))),
        }
    }
    let alphas = shared_control::parallel::map(Execution::Parallel, &rows, |&(y, x)| fis_alpha(y, x, &sets, &rules));
    let sink: Box<dyn std::io::Write> = match output {
        Some(p) => Box::new(std::fs::File::create(p).map_err(io_err(p))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let write_err = |e: csv::Error| Failure::Config(e.to_string());
    w.write_record(["r_y", "r_x", "alpha"]).map_err(write_err)?;
    for ((y, x), a) in rows.iter().zip(alphas) {
        w.write_record([format!("{y:.11e}"), format!("{x:.11e}"), format!("{a:.11e}")])
            .map_err(write_err)?;
    }
    w.flush().map_err(|e| Failure::Config(e.to_string()))
}

fn run_sweep(scenario: &Path, param: &str, values: &str, out: Option<&Path>, sequential: bool) -> Result<(), Failure> {
    let cfg = ScenarioConfig::load(scenario)?;
    let values = parse_values(values)?;
    if values.is_empty() {
        return Err(Failure::Config("no sweep values given".into()));
    }
    let exec = if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let results = sweep(&cfg, param, &values, exec)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut listing = Vec::new();
    let mut failure = None;
    for (i, r) in results.iter().enumerate() {
        match &r.summary {
            Ok(s) => {
                if let Some(dir) = out {
                    let path = dir.join(format!("summary_{i}.json"));
                    write_summary_json(&path, s).map_err(io_err(&path))?;
                }
                listing.push(serde_json::json!({ "value": r.value, "summary": s }));
            }
            Err(e) => {
                listing.push(serde_json::json!({ "value": r.value, "error": e.to_string() }));
                failure.get_or_insert_with(|| e.to_string());
            }
        }
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&listing).expect("listing serialises")
    );
    match failure {
        Some(m) => Err(Failure::Numerical(m)),
        None => Ok(()),
    }
}
