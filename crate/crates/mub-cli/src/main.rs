//! `mub` — command-line front end for the census toolkit.
//!
//! Three subcommands drive the library pipeline end to end:
//!
//! * `sweep`  — census every point of a parameter grid into a resumable
//!   JSONL store (already-stored points are skipped, so a killed run can
//!   simply be restarted).
//! * `point`  — census a single parameter point and print its record.
//! * `export` — convert a store to plot-ready CSV or lossless JSONL.
//!
//! Every flag of `sweep` and `point` can also be supplied through a JSON
//! config file (`--config run.json`) whose keys mirror the long flag names;
//! explicit flags win over config values. The `MUB_BUDGET_MEM` environment
//! variable (bytes, optional K/M/G suffix) overrides any configured engine
//! memory budget.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mub::catalog::{Family, Sign};
use mub::harness::{
    export, import_jsonl, run_grid, run_point, Engine, ExportFormat, GridKind, GridSpec,
    ResultStore, RunConfig,
};
use mub::polysys::CoeffMode;
use mub::rat::{rat_from_decimal, Rat};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(
    name = "mub",
    version,
    about = "Census of vectors mutually unbiased to the basis pair {I, H} of a complex Hadamard matrix",
    after_help = "EXAMPLES:\n    \
        mub sweep --family D --grid gamma_D --mode approx --digits 5 --engine groebner --jobs 8 --store results.jsonl\n    \
        mub point --family D --params 1/8 --engine numcheck --store results.jsonl\n    \
        mub export results.jsonl --format csv --out fig2.csv"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Census every point of a parameter grid, resuming from the store
    Sweep(SweepArgs),
    /// Census a single parameter point and print its record as JSON
    Point(PointArgs),
    /// Export a result store to CSV or JSONL
    Export(ExportArgs),
}

/// Flags shared by `sweep` and `point`; each maps onto one field of the
/// engine run configuration.
#[derive(Args)]
struct EngineArgs {
    /// Matrix family, by name or letter: fourier/F, fourier_t/FT, dita/D,
    /// hermitean/B, symmetric/M, szollosi/X, szollosi_t/XT, circulant/C,
    /// spectral/S
    #[arg(long)]
    family: Option<String>,

    /// Matrix dimension [default: 6]
    #[arg(long)]
    dim: Option<usize>,

    /// Coefficient mode: exact, approx, or approx(K) [default: approx]
    #[arg(long)]
    mode: Option<String>,

    /// Significant digits: coefficient rounding for --mode approx and the
    /// refinement target for the certified engine [default: 5]
    #[arg(long)]
    digits: Option<u32>,

    /// Solution engine: groebner (certified) or numcheck (multistart
    /// Newton lower bound) [default: groebner]
    #[arg(long)]
    engine: Option<String>,

    /// Multistart count for the numcheck engine and cross-checks
    /// [default: 2000]
    #[arg(long)]
    starts: Option<u64>,

    /// Campaign seed; per-point engine seeds derive from it [default: 42]
    #[arg(long)]
    seed: Option<u64>,

    /// Sign branch for two-branch families: + or -
    #[arg(long)]
    branch: Option<String>,

    /// Census classification threshold; defaults per mode and engine
    #[arg(long)]
    threshold: Option<f64>,

    /// Worker threads for grid sweeps [default: 1]
    #[arg(long)]
    jobs: Option<usize>,

    /// After a certified solve, cross-check against the multistart oracle
    /// and record any mismatch as an error
    #[arg(long)]
    crosscheck: bool,

    /// Engine memory budget in bytes, with optional K/M/G suffix; the
    /// MUB_BUDGET_MEM environment variable overrides this
    #[arg(long)]
    mem_budget: Option<String>,

    /// JSON config file whose keys mirror the long flag names; explicit
    /// flags override it
    #[arg(long)]
    config: Option<PathBuf>,

    /// Append-only JSONL result store
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    eng: EngineArgs,

    /// Grid name: gamma_D, gamma_F, gamma_M, gamma_B, lambda, lambda_prime,
    /// random
    #[arg(long)]
    grid: Option<String>,

    /// Point count for the sampled grid kinds (lambda, lambda_prime, random)
    #[arg(long)]
    n: Option<usize>,

    /// Cap on new points this invocation; the rest stay pending for a
    /// later resume
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    eng: EngineArgs,

    /// Comma-separated parameters, each a rational (1/8), decimal (0.125),
    /// or integer; omit for parameter-free families
    #[arg(long, allow_hyphen_values = true)]
    params: Option<String>,
}

#[derive(Args)]
struct ExportArgs {
    /// JSONL result store to read
    store: PathBuf,

    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    /// Output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy)]
enum FormatArg {
    Csv,
    Jsonl,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), String> {
    match cli.cmd {
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Point(a) => cmd_point(a),
        Cmd::Export(a) => cmd_export(a),
    }
}

// ---------------------------------------------------------------------------
// Config file

/// Keys accepted in a `--config` file: exactly the long flag names of
/// `sweep` and `point`.
const CONFIG_KEYS: [&str; 17] = [
    "family", "dim", "mode", "digits", "engine", "starts", "seed", "branch", "threshold", "jobs",
    "crosscheck", "mem_budget", "store", "grid", "n", "limit", "params",
];

/// Parsed `--config` JSON object; absent file behaves as an empty object.
struct FileCfg(Map<String, Value>);

impl FileCfg {
    fn load(path: Option<&Path>) -> Result<FileCfg, String> {
        let Some(path) = path else {
            return Ok(FileCfg(Map::new()));
        };
        let text =
            fs::read_to_string(path).map_err(|e| format!("read {}: {e}", path.display()))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| format!("parse {}: {e}", path.display()))?;
        let Value::Object(map) = v else {
            return Err(format!("{}: config must be a JSON object", path.display()));
        };
        for key in map.keys() {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(format!("{}: unknown config key {key:?}", path.display()));
            }
        }
        Ok(FileCfg(map))
    }

    fn str_of(&self, key: &str) -> Result<Option<String>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(format!("config key {key:?}: expected a string, got {v}")),
        }
    }

    fn u64_of(&self, key: &str) -> Result<Option<u64>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| format!("config key {key:?}: expected an unsigned integer, got {v}")),
        }
    }

    fn f64_of(&self, key: &str) -> Result<Option<f64>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| format!("config key {key:?}: expected a number, got {v}")),
        }
    }

    fn bool_of(&self, key: &str) -> Result<Option<bool>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(v) => Err(format!("config key {key:?}: expected a boolean, got {v}")),
        }
    }

    fn usize_of(&self, key: &str) -> Result<Option<usize>, String> {
        Ok(self.u64_of(key)?.map(|v| v as usize))
    }

    /// The memory budget may be a JSON number (bytes) or a suffixed string.
    fn mem_of(&self, key: &str) -> Result<Option<String>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) if v.as_u64().is_some() => Ok(Some(v.to_string())),
            Some(v) => Err(format!("config key {key:?}: expected bytes, got {v}")),
        }
    }
}

// ---------------------------------------------------------------------------
// Flag resolution

/// Merges flags over config over built-in defaults into a run configuration
/// plus the family and store path every engine command needs.
fn resolve(
    args: &EngineArgs,
    file: &FileCfg,
    limit: Option<usize>,
) -> Result<(Family, RunConfig, PathBuf), String> {
    let family_s = args
        .family
        .clone()
        .or(file.str_of("family")?)
        .ok_or("missing --family (or \"family\" in the config file)")?;
    let family = Family::from_name(&family_s)
        .ok_or_else(|| format!("unknown family {family_s:?}; see `mub sweep --help`"))?;

    let digits = args.digits.or(file.u64_of("digits")?.map(|v| v as u32)).unwrap_or(5);
    let mode_s = args.mode.clone().or(file.str_of("mode")?).unwrap_or_else(|| "approx".into());
    let mode = match mode_s.as_str() {
        "approx" => CoeffMode::Approx(digits),
        s => CoeffMode::parse(s).map_err(|e| format!("--mode: {e}"))?,
    };

    let engine_s =
        args.engine.clone().or(file.str_of("engine")?).unwrap_or_else(|| "groebner".into());
    let engine = Engine::from_name(&engine_s)
        .ok_or_else(|| format!("unknown engine {engine_s:?} (groebner or numcheck)"))?;

    let branch = match args.branch.clone().or(file.str_of("branch")?) {
        None => None,
        Some(s) => Some(
            Sign::from_str(&s).ok_or_else(|| format!("bad --branch {s:?} (use + or -)"))?,
        ),
    };

    let mem_budget = match args.mem_budget.clone().or(file.mem_of("mem_budget")?) {
        None => None,
        Some(s) => Some(parse_mem(&s)?),
    };

    let store = args
        .store
        .clone()
        .or(file.str_of("store")?.map(PathBuf::from))
        .ok_or("missing --store (or \"store\" in the config file)")?;

    let cfg = RunConfig {
        dim: args.dim.or(file.usize_of("dim")?).unwrap_or(6),
        mode,
        digits,
        engine,
        starts: args.starts.or(file.u64_of("starts")?).unwrap_or(2_000),
        seed: args.seed.or(file.u64_of("seed")?).unwrap_or(42),
        branch,
        threshold: args.threshold.or(file.f64_of("threshold")?),
        jobs: args.jobs.or(file.usize_of("jobs")?).unwrap_or(1),
        crosscheck: args.crosscheck || file.bool_of("crosscheck")?.unwrap_or(false),
        mem_budget,
        limit,
    };
    Ok((family, cfg, store))
}

fn parse_mem(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let (num, mult) = match t.chars().last() {
        Some('k' | 'K') => (&t[..t.len() - 1], 1u64 << 10),
        Some('m' | 'M') => (&t[..t.len() - 1], 1 << 20),
        Some('g' | 'G') => (&t[..t.len() - 1], 1 << 30),
        _ => (t, 1),
    };
    num.trim()
        .parse::<u64>()
        .map(|n| n.saturating_mul(mult))
        .map_err(|_| format!("bad memory budget {s:?} (bytes, optional K/M/G suffix)"))
}

fn parse_params(s: &str) -> Result<Vec<Rat>, String> {
    let t = s.trim();
    if t.is_empty() {
        return Ok(Vec::new());
    }
    t.split(',').map(|p| parse_rat(p.trim())).collect()
}

fn parse_rat(p: &str) -> Result<Rat, String> {
    if p.contains('.') {
        rat_from_decimal(p).map_err(|e| format!("bad parameter {p:?}: {e}"))
    } else {
        Rat::from_str(p).map_err(|_| format!("bad parameter {p:?} (rational, decimal, or integer)"))
    }
}

// ---------------------------------------------------------------------------
// Subcommands

fn cmd_sweep(args: SweepArgs) -> Result<(), String> {
    let file = FileCfg::load(args.eng.config.as_deref())?;
    let limit = args.limit.or(file.usize_of("limit")?);
    let (family, cfg, store_path) = resolve(&args.eng, &file, limit)?;

    let grid_s = args
        .grid
        .clone()
        .or(file.str_of("grid")?)
        .ok_or("missing --grid (or \"grid\" in the config file)")?;
    let n = args.n.or(file.usize_of("n")?).unwrap_or(0);
    let kind = GridKind::by_name(&grid_s, n, cfg.seed)
        .ok_or_else(|| format!("unknown grid {grid_s:?}; see `mub sweep --help`"))?;
    let sampled = matches!(
        kind,
        GridKind::LambdaLine { .. } | GridKind::LambdaPrimeLine { .. } | GridKind::Random { .. }
    );
    if sampled && n == 0 {
        return Err(format!("grid {grid_s:?} needs --n, the number of points to sample"));
    }

    let spec = GridSpec { family, kind };
    let total = spec.points().map_err(|e| e.to_string())?.len();
    let store = ResultStore::open(&store_path).map_err(|e| e.to_string())?;
    let records = run_grid(&spec, &cfg, &store).map_err(|e| e.to_string())?;

    let failed: Vec<&str> = records.iter().filter_map(|r| r.error.as_deref()).collect();
    println!(
        "store covers {} of {} grid points ({} with recorded errors) -> {}",
        records.len(),
        total,
        failed.len(),
        store_path.display()
    );
    if !failed.is_empty() {
        let mut by_class: Vec<(&str, usize)> = Vec::new();
        for e in failed {
            let class = e.split(':').next().unwrap_or(e);
            match by_class.iter_mut().find(|(c, _)| *c == class) {
                Some((_, n)) => *n += 1,
                None => by_class.push((class, 1)),
            }
        }
        for (class, n) in by_class {
            println!("  {class}: {n}");
        }
    }
    Ok(())
}

fn cmd_point(args: PointArgs) -> Result<(), String> {
    let file = FileCfg::load(args.eng.config.as_deref())?;
    let (family, cfg, store_path) = resolve(&args.eng, &file, None)?;
    let params = match args.params.clone().or(file.str_of("params")?) {
        Some(s) => parse_params(&s)?,
        None => Vec::new(),
    };

    let store = ResultStore::open(&store_path).map_err(|e| e.to_string())?;
    let rec = run_point(family, &params, &cfg, &store).map_err(|e| e.to_string())?;
    println!("{}", rec.to_json());
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<(), String> {
    let mut records = import_jsonl(&args.store).map_err(|e| e.to_string())?;
    // Canonical row order (family, then parameters, then key), so exports of
    // the same store contents are byte-identical no matter how worker
    // scheduling or kill-and-resume interleaved the appends.
    records.sort_by(|a, b| {
        a.family
            .name()
            .cmp(b.family.name())
            .then_with(|| a.params.cmp(&b.params))
            .then_with(|| a.key.cmp(&b.key))
    });
    let format = match args.format {
        FormatArg::Csv => ExportFormat::Csv,
        FormatArg::Jsonl => ExportFormat::Jsonl,
    };
    export(&records, format, &args.out).map_err(|e| e.to_string())?;
    println!("exported {} records -> {}", records.len(), args.out.display());
    Ok(())
}
