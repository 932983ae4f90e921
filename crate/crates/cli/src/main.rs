use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cmj_core::config::Config;
use cmj_core::exec::Execution;
use cmj_core::kinemetrics::{bland_altman, icc_2_1};
use cmj_core::model::Task;
use cmj_core::pipeline::run_session;
use cmj_core::report::{run_study, write_session};
use cmj_core::synth::{cohort, generate, SynthJumpSpec, MANIFEST_FILE};
use walkdir::WalkDir;

#[derive(Parser)]
#[command(
    name = "cmj",
    version,
    about = "Countermovement-jump height and method agreement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one session manifest.
    Analyze {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Analyze many sessions and emit the agreement tables.
    Study {
        /// Directories searched for manifest.txt, manifest files, or text
        /// files listing one manifest path per line.
        #[arg(long, num_args = 1.., required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Analyze sessions one at a time.
        #[arg(long)]
        sequential: bool,
    },
    /// Write synthetic recordings with known ground truth.
    Synth(SynthArgs),
    /// Statistics on a table of heights.
    Stats {
        #[arg(value_enum)]
        statistic: Statistic,
        #[arg(long)]
        input: PathBuf,
        /// Columns to use, by header name; default is every numeric column.
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20.0)]
    height_cm: f64,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 3.5)]
    scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "S01")]
    participant: String,
    #[arg(long, default_value = "bilateral")]
    task: Task,
    #[arg(long, default_value_t = 0.0)]
    noise_px: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_mm: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_n: f64,
    #[arg(long, default_value_t = 0)]
    spikes: usize,
    /// Generate this many participants with varied heights and scales,
    /// one subdirectory each.
    #[arg(long)]
    cohort: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Statistic {
    Icc,
    Ba,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(Config::default()),
    }
}

/// Expands directories and list files into manifest paths, sorted.
fn collect_manifests(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for entry in WalkDir::new(input).sort_by_file_name() {
                let entry = entry?;
                if entry.file_type().is_file() && entry.file_name() == MANIFEST_FILE {
                    found.push(entry.into_path());
                }
            }
        } else if input.file_name().is_some_and(|n| n == MANIFEST_FILE) {
            found.push(input.clone());
        } else {
            let text = fs::read_to_string(input)
                .with_context(|| format!("reading {}", input.display()))?;
            let base = input.parent().unwrap_or(Path::new("."));
            found.extend(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(|l| base.join(l)),
            );
        }
    }
    found.sort();
    found.dedup();
    if found.is_empty() {
        bail!("no session manifests found");
    }
    Ok(found)
}

fn analyze(manifest: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let report = run_session(manifest, &cfg)
        .with_context(|| format!("reading manifest {}", manifest.display()))?;
    write_session(&report, &cfg, out)?;
    println!(
        "{} {}: {} repetitions, {} measurements, {} exclusions",
        report.participant,
        report.task,
        report.repetitions.len(),
        report.measurements.len(),
        report.exclusions.len()
    );
    Ok(())
}

fn study(inputs: &[PathBuf], config: Option<&Path>, out: &Path, sequential: bool) -> Result<()> {
    let cfg = load_config(config)?;
    let manifests = collect_manifests(inputs)?;
    let exec = if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let report = run_study(&manifests, &cfg, exec)?;
    report.write_to(out)?;
    println!(
        "{} sessions, {} repetitions",
        report.sessions.len(),
        report.repetitions
    );
    for e in report.table3.iter().filter(|e| e.icc.is_some()) {
        let icc = e.icc.as_ref().map_or(f64::NAN, |r| r.icc);
        let bias = e.bland_altman.as_ref().map_or(f64::NAN, |b| b.bias_cm);
        println!(
            "{:<6} {}-{}: n={} ICC={icc:.3} bias={bias:.2} cm",
            e.group, e.reference, e.other, e.n
        );
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let base = SynthJumpSpec {
        participant: args.participant.clone(),
        task: args.task,
        true_height_cm: args.height_cm,
        reps: args.reps,
        scale_mm_per_px: args.scale,
        noise_px_sd: args.noise_px,
        noise_mm_sd: args.noise_mm,
        noise_n_sd: args.noise_n,
        spikes: args.spikes,
        seed: args.seed,
        ..SynthJumpSpec::default()
    };
    let specs = match args.cohort {
        Some(n) => cohort(n, args.task, &base),
        None => vec![base],
    };
    for spec in &specs {
        let dir = if args.cohort.is_some() {
            args.out.join(format!("{}_{}", spec.participant, spec.task))
        } else {
            args.out.clone()
        };
        let manifest = generate(spec)?.write_to(&dir)?;
        println!("{}", manifest.display());
    }
    Ok(())
}

/// Reads a header row and numeric rows; non-numeric columns are skipped
/// unless named explicitly.
fn read_table(path: &Path, wanted: &[String]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> =
        reader.records().collect::<std::result::Result<_, _>>()?;
    let numeric = |c: usize| {
        records
            .iter()
            .all(|r| r.get(c).is_some_and(|v| v.parse::<f64>().is_ok()))
    };
    let columns: Vec<usize> = if wanted.is_empty() {
        (0..header.len()).filter(|&c| numeric(c)).collect()
    } else {
        wanted
            .iter()
            .map(|w| {
                header
                    .iter()
                    .position(|h| h == w)
                    .with_context(|| format!("no column named {w:?}"))
            })
            .collect::<Result<_>>()?
    };
    let rows = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            columns
                .iter()
                .map(|&c| {
                    let cell = r.get(c).unwrap_or("");
                    cell.parse::<f64>().with_context(|| {
                        format!(
                            "row {}, column {:?}: cannot read {cell:?}",
                            i + 2,
                            header[c]
                        )
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((columns.iter().map(|&c| header[c].clone()).collect(), rows))
}

fn stats(statistic: Statistic, input: &Path, columns: &[String]) -> Result<()> {
    let (names, rows) = read_table(input, columns)?;
    match statistic {
        Statistic::Icc => {
            let r = icc_2_1(&rows)?;
            let out = serde_json::json!({
                "columns": names, "icc_2_1": r.icc, "n": r.n, "k": r.k,
                "msr": r.msr, "msc": r.msc, "mse": r.mse, "negative": r.is_negative(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Statistic::Ba => {
            if names.len() != 2 {
                bail!(
                    "Bland-Altman needs exactly two columns, got {}: {names:?}",
                    names.len()
                );
            }
            let a: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            let b: Vec<f64> = rows.iter().map(|r| r[1]).collect();
            let r = bland_altman(&a, &b)?;
            let out = serde_json::json!({
                "reference": names[0], "other": names[1], "n": r.n, "bias_cm": r.bias_cm,
                "sd_cm": r.sd_cm, "loa_low_cm": r.loa_low_cm, "loa_high_cm": r.loa_high_cm,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze {
            manifest,
            config,
            out,
        } => analyze(&manifest, config.as_deref(), &out),
        Command::Study {
            manifests,
            config,
            out,
            sequential,
        } => study(&manifests, config.as_deref(), &out, sequential),
        Command::Synth(args) => synth(&args),
        Command::Stats {
            statistic,
            input,
            columns,
        } => stats(statistic, &input, &columns),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
