use std::path::{Path, PathBuf};
use std::process::ExitCode;

use circle_renorm::maps::MapSpec;
use circle_renorm::renorm::critical_orbit;
use circle_renorm::rotation::{ContinuedFraction, DEFAULT_BUDGET};
use circle_renorm::{AdaptiveReal, Error, Result};
use circle_renorm_cli::config::{resolve_precision, RunConfig};
use circle_renorm_cli::emit::{write_csv, write_json};
use circle_renorm_cli::pipeline::{self, exit_code, TraceFrom};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "circle-renorm", version, about = "Renormalization experiments for bi-critical circle maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output file or directory.
    #[arg(long)]
    out: PathBuf,
    /// Working precision in bits (raised to $CIRCLE_RENORM_PRECISION).
    #[arg(long)]
    precision: Option<u32>,
    /// Map evaluations allowed per orbit.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceArg {
    Endpoint,
    Value,
}

#[derive(Subcommand)]
enum Command {
    /// Tune the parameter of a family to a continued-fraction prefix.
    Tune {
        /// Map JSON, inline or a file path; `a` is ignored.
        #[arg(long)]
        family: String,
        /// Partial quotients, e.g. "1,1,1,30,1,1".
        #[arg(long)]
        cf: String,
        #[arg(long)]
        depth: Option<usize>,
        /// Ones appended to the prefix while tuning.
        #[arg(long, default_value_t = 6)]
        tail: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Dynamical partitions of a map up to a level.
    Partition {
        #[arg(long)]
        map: String,
        #[arg(long)]
        levels: usize,
        /// Emit the two-bridges partitions instead of the classical ones.
        #[arg(long)]
        two_bridges: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Renormalizations of a map, optionally compared with a second map.
    Renorm {
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 0)]
        critical: usize,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        distance_to: Option<String>,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = circle_renorm::renorm::DEFAULT_GRID)]
        grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Tubular set, chart and parabolic traces at one level.
    Tubular {
        #[arg(long)]
        map: String,
        #[arg(long)]
        level: usize,
        /// Integer or "auto".
        #[arg(long = "L", default_value = "auto")]
        l: String,
        #[arg(long, value_enum, default_value = "endpoint")]
        trace_from: TraceArg,
        #[command(flatten)]
        common: Common,
    },
    /// Build the conjugacy between two maps and run its audits.
    Conjugacy {
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        depth: usize,
        /// Only "all" is accepted.
        #[arg(long, default_value = "all")]
        audits: String,
        #[arg(long, default_value_t = circle_renorm::conjugacy::DEFAULT_BAND)]
        band: f64,
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run the full pipeline from a configuration file.
    Run {
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn map_spec(arg: &str) -> Result<MapSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Error::Config(format!("cannot read {arg}: {e}")))?
    };
    MapSpec::from_json(&text)
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    Ok(())
}

fn parent_dir(p: &Path) -> Result<()> {
    if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| Error::Config(format!("{}: {e}", d.display())))?;
    }
    Ok(())
}

/// `parts.json` → `parts_audit.csv`.
fn sibling(p: &Path, suffix: &str) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    p.with_file_name(format!("{stem}{suffix}"))
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Tune { family, cf, depth, tail, common } => {
            set_jobs(common.jobs)?;
            let spec = map_spec(&family)?;
            let target = ContinuedFraction::parse(&cf)?;
            let depth = depth.unwrap_or(target.len());
            if depth == 0 || depth > target.len() {
                return Err(Error::Config(format!("depth {depth} outside 1..={}", target.len())));
            }
            let bits = resolve_precision(common.precision)?;
            let s = pipeline::tune_subject(&spec, &target.prefix(depth), tail, bits, common.budget)?;
            parent_dir(&common.out)?;
            write_json(&common.out, &pipeline::tune_json(&s))?;
        }
        Command::Partition { map, levels, two_bridges, common } => {
            set_jobs(common.jobs)?;
            let bits = resolve_precision(common.precision)?;
            let s = pipeline::measure_subject(&map_spec(&map)?, levels + 2, bits, common.budget)?;
            let (json, rows) = pipeline::partition_audit_rows(&s.orb, levels, two_bridges)?;
            parent_dir(&common.out)?;
            write_json(&common.out, &json)?;
            write_csv(&sibling(&common.out, "_audit.csv"), &["level", "metric", "value"], &rows)?;
        }
        Command::Renorm { map, critical, levels, distance_to, r, grid, common } => {
            set_jobs(common.jobs)?;
            if r > 2 {
                return Err(Error::Config(format!("--r {r} must be 0, 1 or 2")));
            }
            let bits = resolve_precision(common.precision)?;
            let depth = levels + 2;
            let f = critical_orbit(map_spec(&map)?.build::<AdaptiveReal>(bits)?, critical, depth, common.budget)?;
            let g = match distance_to {
                Some(g) => Some(critical_orbit(map_spec(&g)?.build::<AdaptiveReal>(bits)?, critical, depth, common.budget)?),
                None => None,
            };
            let (rows, _) = pipeline::renorm_rows(&f, g.as_ref(), 1..=levels, r, grid)?;
            parent_dir(&common.out)?;
            write_csv(&common.out, &pipeline::RENORM_HEADER, &rows)?;
        }
        Command::Tubular { map, level, l, trace_from, common } => {
            set_jobs(common.jobs)?;
            let l = match l.as_str() {
                "auto" => None,
                v => Some(v.parse::<u64>().map_err(|_| Error::Config(format!("--L {v:?} is neither auto nor an integer")))?),
            };
            let bits = resolve_precision(common.precision)?;
            let s = pipeline::measure_subject(&map_spec(&map)?, level + 3, bits, common.budget)?;
            let from = match trace_from {
                TraceArg::Endpoint => TraceFrom::Endpoint,
                TraceArg::Value => TraceFrom::Value,
            };
            let (summary, rows) = pipeline::tubular_outputs(&s.orb, level, l, &[from])?;
            parent_dir(&common.out)?;
            write_csv(&common.out, &pipeline::TRACE_HEADER, &rows)?;
            write_json(&sibling(&common.out, "_summary.json"), &summary)?;
        }
        Command::Conjugacy { f, g, depth, audits, band, svg, common } => {
            set_jobs(common.jobs)?;
            if audits != "all" {
                return Err(Error::Config(format!("--audits {audits:?}: only \"all\" is supported")));
            }
            let bits = resolve_precision(common.precision)?;
            let levels = depth + 3;
            let fs = pipeline::measure_subject(&map_spec(&f)?, levels, bits, common.budget)?;
            let gs = pipeline::measure_subject(&map_spec(&g)?, levels, bits, common.budget)?;
            std::fs::create_dir_all(&common.out).map_err(|e| Error::Config(format!("{}: {e}", common.out.display())))?;
            pipeline::conjugacy_outputs(&fs.orb, &gs.orb, depth, band, svg, &common.out)?;
        }
        Command::Run { config, jobs } => {
            set_jobs(jobs)?;
            let cfg = RunConfig::load(&config)?;
            let manifest = pipeline::run(&cfg)?;
            if let Some(f) = &manifest.failure {
                eprintln!("stage {} failed: {}", f.stage, f.message);
                return Ok(f.exit_code);
            }
            println!("{} files written to {}", manifest.files.len(), cfg.out.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
