//! `magloc` command-line tool.
//!
//! Exit codes: 0 success, 1 domain failure (saturation, localization, empty
//! map), 2 usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use magloc::body::{generate_phantom_with, phantom_header, PhantomSpec};
use magloc::config::ScenarioConfig;
use magloc::fieldmodel::validate_saturation;
use magloc::geometry::Axis;
use magloc::sim::{self, MapMode};
use magloc::Error;

#[derive(Parser)]
#[command(
    name = "magloc",
    version,
    about = "Localization of in-body nano-machines with DC wire anchors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a voxel phantom and write it as a text file.
    Phantom {
        /// Standing height in meters.
        #[arg(long, default_value_t = 1.75)]
        height: f64,
        /// Voxel edge length in meters.
        #[arg(long, default_value_t = 0.005)]
        resolution: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the strongest in-body field against the magnetometer range.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run the Monte Carlo study and write points.csv, summary.txt, manifest.txt.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long, env = "MAGLOC_THREADS")]
        threads: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Turn a run directory into a 2D mean-error grid (cm).
    Report {
        /// Directory written by `magloc run`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Slice through the body, e.g. `z=1.0`.
        #[arg(
            long,
            conflicts_with = "projection",
            required_unless_present = "projection"
        )]
        slice: Option<String>,
        /// Projection plane, e.g. `xz` (columns x, rows z).
        #[arg(long)]
        projection: Option<String>,
        /// Grid CSV path; defaults to a file inside the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Scenario selection shared by `validate` and `run`. Flags win over the file.
#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin cage: W3, W6, W9, W15 or W30.
    #[arg(long, conflicts_with = "wires")]
    arrangement: Option<String>,
    /// Wire file with [[wire]] records.
    #[arg(long)]
    wires: Option<PathBuf>,
    /// Current in every wire, amperes.
    #[arg(long)]
    current: Option<f64>,
    /// Phantom voxel size in meters.
    #[arg(long)]
    resolution: Option<f64>,
    /// Voxel file to use instead of the procedural phantom.
    #[arg(long)]
    phantom: Option<PathBuf>,
}

impl ScenarioArgs {
    fn resolve(&self) -> magloc::Result<ScenarioConfig> {
        let mut config = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(name) = &self.arrangement {
            config.wires.arrangement = Some(name.clone());
            config.wires.file = None;
        }
        if let Some(path) = &self.wires {
            config.wires.file = Some(path.clone());
            config.wires.arrangement = None;
        }
        if let Some(c) = self.current {
            config.wires.current = Some(c);
        }
        if let Some(r) = self.resolution {
            config.phantom.resolution = r;
        }
        if let Some(path) = &self.phantom {
            config.phantom.file = Some(path.clone());
        }
        // re-parse so overrides get the same validation as the file
        ScenarioConfig::from_toml_str(&config.to_toml_string())
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Saturation { .. }
        | Error::OnWireAxis { .. }
        | Error::Singular { .. }
        | Error::Unlocalizable(_)
        | Error::InvalidMeasurement(_)
        | Error::Arity { .. }
        | Error::MeasurementCount { .. }
        | Error::EmptySlice { .. }
        | Error::EmptyResults => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Phantom {
            height,
            resolution,
            out,
        } => phantom(height, resolution, &out),
        Command::Validate { scenario } => validate(&scenario),
        Command::Run {
            scenario,
            out,
            seed,
            threads,
            runs,
        } => run(&scenario, &out, seed, threads, runs),
        Command::Report {
            input,
            slice,
            projection,
            out,
        } => report(&input, slice.as_deref(), projection.as_deref(), out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn phantom(height: f64, resolution: f64, out: &Path) -> magloc::Result<u8> {
    let spec = PhantomSpec::new(height, resolution);
    let body = generate_phantom_with(&spec)?;
    body.save(out, &phantom_header(&spec, body.len()))?;
    println!("{} voxels written to {}", body.len(), out.display());
    Ok(0)
}

fn validate(args: &ScenarioArgs) -> magloc::Result<u8> {
    let config = args.resolve()?;
    let scenario = config.scenario()?;
    let params = &scenario.params;
    let report = validate_saturation(
        &scenario.wireset,
        &scenario.body,
        params.saturation_limit,
        params.mu,
    )?;
    let v = report.worst_voxel;
    println!("wires = {}", scenario.wireset.len());
    println!("voxels = {}", scenario.body.len());
    println!("max field = {:.3} uT", report.max_field * 1e6);
    println!("limit = {:.3} uT", report.limit * 1e6);
    println!(
        "worst = wire {} at voxel ({:.4}, {:.4}, {:.4})",
        report.worst_wire, v.x, v.y, v.z
    );
    if report.ok {
        println!("ok");
        Ok(0)
    } else {
        println!("SATURATED");
        Ok(1)
    }
}

fn run(
    args: &ScenarioArgs,
    out: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
    runs: Option<usize>,
) -> magloc::Result<u8> {
    let mut config = args.resolve()?;
    if let Some(s) = seed {
        config.simulation.seed = s;
    }
    if let Some(t) = threads {
        config.simulation.threads = t;
    }
    if let Some(r) = runs {
        config.simulation.runs_per_point = r;
    }
    let config = ScenarioConfig::from_toml_str(&config.to_toml_string())?;
    let scenario = config.scenario()?;
    let result = sim::run_scenario(&scenario, config.simulation.threads)?;
    sim::write_outputs(&result, &config.manifest(&scenario), out)?;
    print!("{}", result.stats.to_summary_text());
    Ok(0)
}

fn parse_slice(s: &str) -> magloc::Result<MapMode> {
    let (axis, coord) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("slice must look like z=1.0, got {s:?}")))?;
    let axis: Axis = axis.trim().parse()?;
    let coordinate: f64 = coord
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad slice coordinate {coord:?}")))?;
    Ok(MapMode::Slice { axis, coordinate })
}

fn parse_projection(s: &str) -> magloc::Result<MapMode> {
    let axes = s
        .chars()
        .map(|c| c.to_string().parse::<Axis>())
        .collect::<magloc::Result<Vec<_>>>()?;
    match axes[..] {
        [a, b] if a != b => Ok(MapMode::Projection { plane: [a, b] }),
        _ => Err(Error::Config(format!(
            "projection must name two axes, got {s:?}"
        ))),
    }
}

fn report(
    input: &Path,
    slice: Option<&str>,
    projection: Option<&str>,
    out: Option<PathBuf>,
) -> magloc::Result<u8> {
    let (mode, tag) = match (slice, projection) {
        (Some(s), _) => (parse_slice(s)?, format!("slice_{}", s.replace('=', "_"))),
        (None, Some(p)) => (parse_projection(p)?, format!("projection_{p}")),
        (None, None) => unreachable!("clap requires one of --slice/--projection"),
    };
    let points = sim::load_points(input.join("points.csv"))?;
    let resolution = sim::infer_resolution(&points).ok_or(Error::EmptyResults)?;
    let grid = sim::export_error_map(&points, resolution, mode)?;
    let out = out.unwrap_or_else(|| input.join(format!("map_{tag}.csv")));
    std::fs::write(&out, grid.to_csv()).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    println!(
        "{} x {} grid written to {}",
        grid.col_coords.len(),
        grid.row_coords.len(),
        out.display()
    );
    Ok(0)
}
