mod config;
mod report;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use pcvstream::model::fit_rate_lod;
use pcvstream::sim::{format_metrics, load_metrics, Policy};
use pcvstream::traces::{
    load_bandwidth_trace, load_fov_trace, load_video, save_bandwidth_trace, save_fov_trace, save_video,
};

use config::Manifest;
use report::{comparison_table, Outputs};

const OUT_ENV: &str = "PCVSTREAM_OUT";
const DEFAULT_OUT: &str = "pcvstream-out";

/// Bad invocation or input: missing files, invalid settings. Exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "pcvstream",
    version,
    about = "Progressive FoV-adaptive point cloud video streaming simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate policies and write one metrics file per policy plus a comparison table.
    Run {
        /// TOML experiment manifest.
        config: Option<PathBuf>,
        /// Restrict to these policies (repeatable or comma-separated).
        #[arg(long, value_delimiter = ',')]
        policy: Vec<Policy>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory [default: $PCVSTREAM_OUT or ./pcvstream-out].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tile metadata file instead of a synthetic video.
        #[arg(long)]
        video: Option<PathBuf>,
        /// FoV trace instead of a synthetic one.
        #[arg(long)]
        fov: Option<PathBuf>,
        /// Bandwidth trace instead of a synthetic one.
        #[arg(long)]
        bandwidth: Option<PathBuf>,
    },
    /// Fit `H = a ln(b r + 1)` to `rate lod` samples, one pair per line.
    Fit {
        samples: PathBuf,
        /// Coefficients file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic video, FoV and bandwidth traces of a manifest.
    Gen {
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Comparison table of existing metrics files (or directories of them).
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(flag: Option<PathBuf>, manifest: &Manifest) -> PathBuf {
    flag.or_else(|| manifest.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn input_error(e: pcvstream::Error) -> anyhow::Error {
    match e {
        pcvstream::Error::Config(_) | pcvstream::Error::Parse { .. } | pcvstream::Error::Input(_) => {
            UsageError(e.to_string()).into()
        }
        e => e.into(),
    }
}

fn cmd_run(
    config: Option<&Path>,
    policies: Vec<Policy>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    traces: [Option<PathBuf>; 3],
) -> Result<()> {
    let mut m = Manifest::load(config)?;
    if !policies.is_empty() {
        m.policies = policies;
    }
    m.seed = seed.unwrap_or(m.seed);
    let [video, fov, bandwidth] = traces;
    m.traces.video = video.or(m.traces.video);
    m.traces.fov = fov.or(m.traces.fov);
    m.traces.bandwidth = bandwidth.or(m.traces.bandwidth);
    m.check_paths()?;

    let mut inputs = m.scenario.inputs(m.seed).map_err(input_error)?;
    if let Some(p) = &m.traces.video {
        inputs.video = load_video(p).map_err(input_error)?;
        // The FoV span belongs to the viewer, not the tiles file.
        inputs.video.tiling.fov_span_deg = m.scenario.video.tiling.fov_span_deg;
    }
    if let Some(p) = &m.traces.fov {
        inputs.fov = load_fov_trace(p).map_err(input_error)?;
    }
    if let Some(p) = &m.traces.bandwidth {
        inputs.bandwidth = load_bandwidth_trace(p).map_err(input_error)?;
    }

    let policies = m.policies();
    let results: Vec<Result<_>> = thread::scope(|s| {
        let handles: Vec<_> = policies
            .iter()
            .map(|&p| {
                let (sc, inputs) = (&m.scenario, &inputs);
                s.spawn(move || sc.run_on(inputs, p, m.seed).with_context(|| format!("policy {p}")))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(anyhow!("simulation thread panicked"))))
            .collect()
    });

    let mut outputs = Outputs::new(&out_dir(out, &m))?;
    let mut runs = Vec::new();
    for r in results {
        let o = r?;
        let path = outputs.write(
            &format!("{}.metrics", o.policy),
            &format_metrics(o.policy.name(), &o.frames),
        )?;
        // Read back so the table matches what `report` computes from the files.
        runs.push(load_metrics(&path)?);
    }
    let table = comparison_table(&runs);
    outputs.write("comparison.txt", &table)?;
    print!("{table}");
    for f in outputs.commit() {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn parse_samples(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed = match fields[..] {
            [r, h] => r.parse::<f64>().ok().zip(h.parse::<f64>().ok()),
            _ => None,
        };
        let pair = parsed.ok_or_else(|| {
            UsageError(format!(
                "{}:{}: expected `rate lod`, got `{line}`",
                path.display(),
                i + 1
            ))
        })?;
        out.push(pair);
    }
    Ok(out)
}

fn cmd_fit(samples: &Path, out: Option<PathBuf>) -> Result<()> {
    let data = parse_samples(samples)?;
    let fit = fit_rate_lod(&data).map_err(|e| UsageError(e.to_string()))?;
    let text = format!(
        "# pcvstream-fit v1 samples={}\n# a b rms\n{:.9e} {:.9e} {:.9e}\n",
        data.len(),
        fit.a,
        fit.b,
        fit.rms
    );
    match out {
        Some(path) => {
            fs::write(&path, &text).with_context(|| format!("cannot write {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_gen(config: Option<&Path>, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut m = Manifest::load(config)?;
    m.seed = seed.unwrap_or(m.seed);
    m.scenario.validate().map_err(input_error)?;
    let inputs = m.scenario.inputs(m.seed).map_err(input_error)?;
    let mut outputs = Outputs::new(&out_dir(out, &m))?;
    let (v, f, b) = (
        outputs.path("video.tiles"),
        outputs.path("fov.trace"),
        outputs.path("bandwidth.trace"),
    );
    outputs.track(v.clone());
    save_video(&v, &inputs.video)?;
    outputs.track(f.clone());
    save_fov_trace(&f, &inputs.fov)?;
    outputs.track(b.clone());
    save_bandwidth_trace(&b, &inputs.bandwidth)?;
    for f in outputs.commit() {
        println!("{}", f.display());
    }
    Ok(())
}

fn metric_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "metrics"))
                .collect();
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(UsageError(format!("not found: {}", p.display())).into());
        }
    }
    if files.is_empty() {
        return Err(UsageError("no metrics files given".into()).into());
    }
    Ok(files)
}

fn cmd_report(inputs: &[PathBuf], out: Option<PathBuf>) -> Result<()> {
    let mut runs = Vec::new();
    for f in metric_files(inputs)? {
        runs.push(load_metrics(&f).map_err(input_error)?);
    }
    let table = comparison_table(&runs);
    match out {
        Some(path) => fs::write(&path, &table).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{table}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run {
            config,
            policy,
            seed,
            out,
            video,
            fov,
            bandwidth,
        } => cmd_run(config.as_deref(), policy, seed, out, [video, fov, bandwidth]),
        Command::Fit { samples, out } => cmd_fit(&samples, out),
        Command::Gen { config, seed, out } => cmd_gen(config.as_deref(), seed, out),
        Command::Report { inputs, out } => cmd_report(&inputs, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
