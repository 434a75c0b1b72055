use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sagin_core::energy::recompute_totals;
use sagin_core::experiment::{
    compare_selection, policy_for, read_rows, run_pipeline, summary_path, sweep,
    write_selection_events, write_selection_summary, ExperimentSpec, OffloadMode, PipelineOptions,
    Scheme, Solution,
};
use sagin_core::scenario::{Scenario, ScenarioConfig};
use sagin_core::selection::{write_decisions_csv, SelectionKind};
use sagin_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sagin",
    version,
    about = "UAV data collection and LEO offloading simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario snapshot.
    Gen {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Snapshot file to write (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one pipeline and print its energy report.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Load this snapshot instead of generating a scenario.
        #[arg(long)]
        scenario_file: Option<PathBuf>,
        #[arg(long, default_value = "proposed")]
        scheme: Scheme,
        #[arg(long, default_value = "max-throughput")]
        selection: SelectionKind,
        #[arg(long, default_value = "batch")]
        offload_mode: OffloadMode,
        /// Directory for solution.toml, report.csv and decisions.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scheme, selection, device count and seed; write CSV rows.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated schemes.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "proposed,r-scheme,f-scheme"
        )]
        scheme: Vec<Scheme>,
        /// Comma-separated selection policies.
        #[arg(long, value_delimiter = ',', default_value = "max-throughput")]
        selection: Vec<SelectionKind>,
        #[arg(long, default_value = "batch")]
        offload_mode: OffloadMode,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Compare selection policies over per-hover offload events.
    CompareSelection {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "max-throughput,random,unchanging"
        )]
        selection: Vec<SelectionKind>,
        #[arg(long, default_value = "selection.csv")]
        out: PathBuf,
    },
    /// Re-check a saved solution (.toml) or sweep results (.csv).
    Validate { file: PathBuf },
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    devices: Option<usize>,
    #[arg(long)]
    uavs: Option<usize>,
    #[arg(long)]
    sats: Option<usize>,
    /// Draw the constellation from this TLE file.
    #[arg(long)]
    tle: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// First seed of the panel.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Comma-separated device counts.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
    devices: Vec<usize>,
    #[arg(long)]
    uavs: Option<usize>,
    #[arg(long)]
    sats: Option<usize>,
    #[arg(long)]
    tle: Option<PathBuf>,
}

fn base_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

impl ScenarioArgs {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut cfg = base_config(self.config.as_deref())?;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.devices {
            cfg.devices = v;
        }
        if let Some(v) = self.uavs {
            cfg.uavs = v;
        }
        if let Some(v) = self.sats {
            cfg.sats = v;
        }
        if let Some(p) = &self.tle {
            cfg.tle_path = Some(p.display().to_string());
        }
        Ok(cfg)
    }
}

impl GridArgs {
    fn spec(
        &self,
        schemes: Vec<Scheme>,
        selections: Vec<SelectionKind>,
        mode: OffloadMode,
        out: PathBuf,
    ) -> Result<ExperimentSpec> {
        let mut base = base_config(self.config.as_deref())?;
        if let Some(v) = self.uavs {
            base.uavs = v;
        }
        if let Some(v) = self.sats {
            base.sats = v;
        }
        if let Some(p) = &self.tle {
            base.tle_path = Some(p.display().to_string());
        }
        let mut pipeline = PipelineOptions::from_config(&base);
        pipeline.offload_mode = mode;
        Ok(ExperimentSpec {
            base,
            schemes,
            selections,
            device_counts: self.devices.clone(),
            seeds: (self.seed..self.seed + self.seeds).collect(),
            output_path: out,
            pipeline,
        })
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen { scenario, out } => {
            let s = scenario.config()?.generate()?;
            match out {
                Some(path) => s.save(&path)?,
                None => print!("{}", s.to_snapshot_string()?),
            }
            Ok(true)
        }
        Command::Run {
            scenario,
            scenario_file,
            scheme,
            selection,
            offload_mode,
            out,
        } => {
            let cfg = scenario.config()?;
            let s = match scenario_file {
                Some(p) => Scenario::load(&p)?,
                None => cfg.generate()?,
            };
            let mut opts = PipelineOptions::from_config(&cfg);
            opts.offload_mode = offload_mode;
            let result = run_pipeline(&s, scheme, &policy_for(&s, selection), &opts)?;
            println!("{}", result.report);
            println!("flight distance     {:>14.3} m", result.flight_distance());
            println!(
                "offload events      {:>14}",
                result.artifacts.decisions.len()
            );
            let violations = result.violations(&s);
            for v in &violations {
                eprintln!("violation {v}");
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                let report = dir.join("report.csv");
                let mut w = csv::Writer::from_path(&report)?;
                w.write_record(result.report.items().map(|(k, _)| k))?;
                w.write_record(result.report.items().map(|(_, v)| v.to_string()))?;
                w.flush().map_err(|e| Error::Io {
                    path: report.clone(),
                    source: e,
                })?;
                write_decisions_csv(&dir.join("decisions.csv"), &result.artifacts.decisions)?;
                let solution = Solution {
                    scheme,
                    selection,
                    scenario: s,
                    artifacts: result.artifacts,
                };
                write_file(&dir.join("solution.toml"), &solution.to_toml_string()?)?;
            }
            Ok(violations.is_empty())
        }
        Command::Sweep {
            grid,
            scheme,
            selection,
            offload_mode,
            out,
        } => {
            let spec = grid.spec(scheme, selection, offload_mode, out)?;
            let result = sweep(&spec)?;
            eprintln!(
                "{} rows -> {}, summary -> {}",
                result.rows.len(),
                spec.output_path.display(),
                result.summary_path.display()
            );
            Ok(true)
        }
        Command::CompareSelection {
            grid,
            selection,
            out,
        } => {
            let spec = grid.spec(
                vec![Scheme::Proposed],
                selection,
                OffloadMode::PerHover,
                out,
            )?;
            let cmp = compare_selection(&spec)?;
            write_selection_events(&spec.output_path, &cmp)?;
            write_selection_summary(&summary_path(&spec.output_path), &cmp)?;
            for (kind, n, mean) in &cmp.means {
                println!("{kind:<15} events {n:>6}  mean t_tr {mean:.6} s");
            }
            println!(
                "max-throughput dominance exceptions: {}",
                cmp.dominance_exceptions
            );
            Ok(cmp.dominance_exceptions == 0)
        }
        Command::Validate { file } => validate_file(&file),
    }
}

fn validate_file(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if path.extension().is_some_and(|e| e == "csv") {
        let rows = read_rows(path)?;
        let mut bad = 0;
        for r in &rows {
            let sum = r.hover_p1_j + r.flight_j + r.device_j + r.sat_j + r.hover_p2_j;
            if (sum - r.total_j).abs() > 1e-9 * r.total_j.abs().max(1.0) {
                bad += 1;
                eprintln!(
                    "seed {} K {} {}: items sum to {sum}, total {}",
                    r.seed, r.k, r.scheme, r.total_j
                );
            }
        }
        println!("{} rows checked, {bad} inconsistent", rows.len());
        return Ok(bad == 0);
    }
    let sol = Solution::from_toml_str(&text)?;
    let a = &sol.artifacts;
    let s = &sol.scenario;
    let violations = sagin_core::energy::validate(
        &a.association,
        &a.hover_plan,
        &a.trajectory,
        &a.decisions,
        s,
    );
    for v in &violations {
        println!("violation {v}");
    }
    let report = sagin_core::energy::assemble(
        &a.association,
        &a.hover_plan,
        &a.trajectory,
        &a.decisions,
        s,
    )?;
    let (e_iu, e_su) = recompute_totals(&a.hover_plan, &a.trajectory, &a.decisions, s)?;
    let agree = ((e_iu + e_su) - report.total).abs() <= 1e-12 * report.total.abs().max(1.0);
    println!("{report}");
    println!(
        "recomputed total    {:>14.3} J ({})",
        e_iu + e_su,
        if agree { "agrees" } else { "DIFFERS" }
    );
    println!("{} violation(s)", violations.len());
    Ok(violations.is_empty() && agree)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
