//! Campaign orchestration: parameter grids over the Hadamard families, a
//! resumable append-only JSONL results store, and CSV/JSONL export.
//!
//! A grid point runs the full census pipeline (build → system → solve →
//! analyze) under a chosen engine and writes one [`ResultRecord`] to the
//! store before returning; engine failures become recorded error classes, not
//! panics or dropped points. Completed points are identified by a content
//! hash of (family, params, config), so a killed sweep resumes where it
//! stopped and never recomputes or duplicates finished work.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::analyzer::analyze_solutions_at;
use crate::catalog::{self, Family, FundamentalRegion, Sign};
use crate::groebner::{lex_groebner_with, BuchbergerOptions, GroebnerError};
use crate::numcheck::{crosscheck, multistart_solve, SearchConfig};
use crate::polysys::{mu_system, CoeffMode};
use crate::rat::{rat_to_decimal, Rat};
use crate::realroots::solve_triangular;
use crate::VERSION;

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error("bad grid spec: {0}")]
    BadSpec(String),
    #[error("io failure: {0}")]
    IOFailure(String),
    #[error("bad data: {0}")]
    BadData(String),
}

fn io_err(context: &str, e: std::io::Error) -> HarnessError {
    HarnessError::IOFailure(format!("{context}: {e}"))
}

// ---------------------------------------------------------------------------
// Grids

/// Solution engine for a campaign point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    /// Certified: Gröbner elimination plus interval back-substitution.
    Groebner,
    /// Heuristic lower bound: multistart Newton.
    Numcheck,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Groebner => "groebner",
            Engine::Numcheck => "numcheck",
        }
    }

    pub fn from_name(s: &str) -> Option<Engine> {
        match s {
            "groebner" => Some(Engine::Groebner),
            "numcheck" => Some(Engine::Numcheck),
            _ => None,
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The sampled parameter sets reported in the tables and figures, plus
/// random and explicit grids.
#[derive(Clone, Debug)]
pub enum GridKind {
    /// Dita line: {a/144 : a = ±1..±18}, 36 points.
    GammaD,
    /// Fourier triangle: {(a,b)/144 : a = 1..24, b = 0..12, a ≥ 2b}, 168 points.
    GammaF,
    /// Symmetric line: {a/144 : a = 1..71, a ≠ 36}, 70 points.
    GammaM,
    /// Hermitean line: {a/144 : a = 55..89, a ≠ 72}, 34 points.
    GammaB,
    /// Szollosi cut arg(a+ib) = π/6 (toward the circulant matrix), n random
    /// radii truncated at the deltoid boundary.
    LambdaLine { n: usize, seed: u64 },
    /// Szollosi cut arg(a+ib) = 0.3510 (toward the Hermitean boundary).
    LambdaPrimeLine { n: usize, seed: u64 },
    /// n points uniform over the family's fundamental region.
    Random { n: usize, seed: u64 },
    Explicit(Vec<Vec<Rat>>),
}

impl GridKind {
    pub fn name(&self) -> &'static str {
        match self {
            GridKind::GammaD => "gamma_D",
            GridKind::GammaF => "gamma_F",
            GridKind::GammaM => "gamma_M",
            GridKind::GammaB => "gamma_B",
            GridKind::LambdaLine { .. } => "lambda",
            GridKind::LambdaPrimeLine { .. } => "lambda_prime",
            GridKind::Random { .. } => "random",
            GridKind::Explicit(_) => "explicit",
        }
    }

    /// Named grid for CLI use; `n`/`seed` feed the random kinds.
    pub fn by_name(name: &str, n: usize, seed: u64) -> Option<GridKind> {
        Some(match name {
            "gamma_D" | "gamma_d" => GridKind::GammaD,
            "gamma_F" | "gamma_f" => GridKind::GammaF,
            "gamma_M" | "gamma_m" => GridKind::GammaM,
            "gamma_B" | "gamma_b" => GridKind::GammaB,
            "lambda" => GridKind::LambdaLine { n, seed },
            "lambda_prime" => GridKind::LambdaPrimeLine { n, seed },
            "random" => GridKind::Random { n, seed },
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub family: Family,
    pub kind: GridKind,
}

/// One enumerated grid point: parameters plus a provenance string that,
/// together with the sweep config, reproduces the point in isolation.
#[derive(Clone, Debug)]
pub struct GridPoint {
    pub index: usize,
    pub params: Vec<Rat>,
    pub provenance: String,
}

const LAMBDA_ARG: f64 = std::f64::consts::FRAC_PI_6;
const LAMBDA_PRIME_ARG: f64 = 0.3510;

/// Per-point generator keyed by (family, seed, index): any grid point is
/// reproducible without generating its predecessors.
fn point_rng(family: Family, seed: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&fnv64(family.name().as_bytes()).to_le_bytes());
    key[8..16].copy_from_slice(&seed.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Deltoid discriminant along the ray r·e^{iθ}: r⁴ − 8cos(3θ)r³ + 18r² − 27.
/// Strictly increasing in r > 0, so the admissible segment is r ∈ [0, rmax].
fn ray_deltoid(r: f64, cos3t: f64) -> f64 {
    r.powi(4) - 8.0 * cos3t * r.powi(3) + 18.0 * r * r - 27.0
}

/// Largest radius on the ray at angle `theta` with both D(α) ≤ 0 and
/// D(−α) ≤ 0.
fn ray_rmax(theta: f64) -> f64 {
    let c = (3.0 * theta).cos();
    let worst = |r: f64| ray_deltoid(r, c).max(ray_deltoid(r, -c));
    let mut hi = 0.5;
    while worst(hi) < 0.0 {
        hi *= 1.5;
    }
    let mut lo = hi / 1.5;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if worst(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn rat_f64(v: f64) -> Rat {
    Rat::from_f64(v).expect("finite parameter")
}

impl GridSpec {
    /// Enumerates the grid deterministically. Order is ascending in the
    /// underlying integer grid (or in sample index for random kinds), so
    /// exports line up with the plotted step functions.
    pub fn points(&self) -> Result<Vec<GridPoint>, HarnessError> {
        self.check_family()?;
        let fam = self.family;
        let raw: Vec<(Vec<Rat>, String)> = match &self.kind {
            GridKind::GammaD => (-18..=18i32)
                .filter(|&a| a != 0)
                .map(|a| (vec![Rat::from((a, 144))], format!("gamma_D a={a}")))
                .collect(),
            GridKind::GammaF => {
                let mut v = Vec::new();
                for a in 1..=24i32 {
                    for b in 0..=(a / 2).min(12) {
                        v.push((
                            vec![Rat::from((a, 144)), Rat::from((b, 144))],
                            format!("gamma_F a={a} b={b}"),
                        ));
                    }
                }
                v
            }
            GridKind::GammaM => (1..=71i32)
                .filter(|&a| a != 36)
                .map(|a| (vec![Rat::from((a, 144))], format!("gamma_M a={a}")))
                .collect(),
            GridKind::GammaB => (55..=89i32)
                .filter(|&a| a != 72)
                .map(|a| (vec![Rat::from((a, 144))], format!("gamma_B a={a}")))
                .collect(),
            GridKind::LambdaLine { n, seed } => self.line(*n, *seed, LAMBDA_ARG, "lambda")?,
            GridKind::LambdaPrimeLine { n, seed } => {
                self.line(*n, *seed, LAMBDA_PRIME_ARG, "lambda_prime")?
            }
            GridKind::Random { n, seed } => self.random(*n, *seed)?,
            GridKind::Explicit(list) => list
                .iter()
                .enumerate()
                .map(|(i, p)| (p.clone(), format!("explicit index={i}")))
                .collect(),
        };
        Ok(raw
            .into_iter()
            .enumerate()
            .map(|(index, (params, provenance))| GridPoint { index, params, provenance })
            .map(|mut p| {
                p.provenance = format!("family={fam} {}", p.provenance);
                p
            })
            .collect())
    }

    fn check_family(&self) -> Result<(), HarnessError> {
        let allowed: &[Family] = match self.kind {
            GridKind::GammaD => &[Family::Dita],
            GridKind::GammaF => &[Family::Fourier, Family::FourierT],
            GridKind::GammaM => &[Family::Symmetric],
            GridKind::GammaB => &[Family::Hermitean],
            GridKind::LambdaLine { .. } | GridKind::LambdaPrimeLine { .. } => {
                &[Family::Szollosi, Family::SzollosiT]
            }
            GridKind::Random { .. } | GridKind::Explicit(_) => return Ok(()),
        };
        if allowed.contains(&self.family) {
            Ok(())
        } else {
            Err(HarnessError::BadSpec(format!(
                "grid {} belongs to {:?}, not {}",
                self.kind.name(),
                allowed.iter().map(|f| f.name()).collect::<Vec<_>>(),
                self.family
            )))
        }
    }

    fn line(
        &self,
        n: usize,
        seed: u64,
        theta: f64,
        tag: &str,
    ) -> Result<Vec<(Vec<Rat>, String)>, HarnessError> {
        let rmax = ray_rmax(theta);
        let region = FundamentalRegion::new(self.family);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = point_rng(self.family, seed, i as u64);
            let mut r = rng.gen::<f64>() * rmax;
            let params = loop {
                let p = vec![rat_f64(r * theta.cos()), rat_f64(r * theta.sin())];
                if region.contains(&p, 15).unwrap_or(false) {
                    break p;
                }
                r *= 1.0 - 1e-9; // float rounding landed outside; step inward
            };
            out.push((params, format!("{tag} index={i} seed={seed}")));
        }
        Ok(out)
    }

    fn random(&self, n: usize, seed: u64) -> Result<Vec<(Vec<Rat>, String)>, HarnessError> {
        let region = FundamentalRegion::new(self.family);
        let nparams = match self.family {
            Family::Dita | Family::Symmetric | Family::Hermitean => 1,
            Family::Fourier | Family::FourierT | Family::Szollosi | Family::SzollosiT => 2,
            _ => {
                return Err(HarnessError::BadSpec(format!(
                    "{} has no parameters to sample",
                    self.family
                )))
            }
        };
        let theta0 = catalog::theta0(30).to_f64();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = point_rng(self.family, seed, i as u64);
            // rejection sample a bounding box of the region; exact membership
            // check keeps the rounded rationals strictly admissible
            let params = loop {
                let draw: Vec<f64> = (0..nparams).map(|_| rng.gen::<f64>()).collect();
                let cand: Vec<Rat> = match self.family {
                    Family::Dita => vec![rat_f64(0.25 * draw[0] - 0.125)],
                    Family::Symmetric => vec![rat_f64(0.5 * draw[0])],
                    Family::Hermitean => {
                        vec![rat_f64(theta0 + 1e-9 + (1.0 - 2.0 * (theta0 + 1e-9)) * draw[0])]
                    }
                    Family::Fourier | Family::FourierT => {
                        vec![rat_f64(draw[0] / 6.0), rat_f64(draw[1] / 12.0)]
                    }
                    Family::Szollosi | Family::SzollosiT => {
                        let phi = draw[1] * std::f64::consts::FRAC_PI_3;
                        let r = draw[0] * ray_rmax(phi);
                        vec![rat_f64(r * phi.cos()), rat_f64(r * phi.sin())]
                    }
                    _ => unreachable!(),
                };
                if region.contains(&cand, 15).unwrap_or(false) {
                    break cand;
                }
            };
            out.push((params, format!("random index={i} seed={seed}")));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Point execution

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dim: usize,
    pub mode: CoeffMode,
    /// Refinement digits for the certified engine.
    pub digits: u32,
    pub engine: Engine,
    /// Multistart count for the numcheck engine and cross-checks.
    pub starts: u64,
    pub seed: u64,
    pub branch: Option<Sign>,
    /// Census classification threshold; None picks the per-mode default.
    pub threshold: Option<f64>,
    /// Worker threads for grid sweeps.
    pub jobs: usize,
    /// After a certified solve, also run the multistart oracle and record a
    /// point-set mismatch as an error.
    pub crosscheck: bool,
    /// Engine memory budget in bytes; the MUB_BUDGET_MEM environment
    /// variable overrides it.
    pub mem_budget: Option<u64>,
    /// Cap on new points computed per `run_grid` call; the rest stay
    /// pending for a later resume.
    pub limit: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 6,
            mode: CoeffMode::Approx(5),
            digits: 10,
            engine: Engine::Groebner,
            starts: 2_000,
            seed: 42,
            branch: None,
            threshold: None,
            jobs: 1,
            crosscheck: false,
            mem_budget: None,
            limit: None,
        }
    }
}

/// Census classification threshold when none is configured. Certified
/// coordinates afford the strict default; k-digit coefficient rounding
/// shifts every solution by roughly the rounding scale, so approximate
/// modes classify at 10^(2−k); the heuristic engine never claims better
/// than 1e-8.
pub fn default_threshold(mode: CoeffMode, engine: Engine) -> f64 {
    let coeff = match mode {
        CoeffMode::Exact => 1e-10,
        CoeffMode::Approx(k) => 10f64.powi(2 - k as i32),
    };
    let floor = match engine {
        Engine::Groebner => 1e-10,
        Engine::Numcheck => 1e-8,
    };
    coeff.max(floor)
}

/// Memory budget resolution: MUB_BUDGET_MEM (bytes, with optional K/M/G
/// suffix) beats the config value.
pub fn mem_budget_bytes(cfg: &RunConfig) -> Option<u64> {
    match std::env::var("MUB_BUDGET_MEM") {
        Ok(s) => parse_bytes(&s),
        Err(_) => cfg.mem_budget,
    }
}

fn parse_bytes(s: &str) -> Option<u64> {
    let t = s.trim();
    let (num, mult) = match t.chars().last()? {
        'k' | 'K' => (&t[..t.len() - 1], 1u64 << 10),
        'm' | 'M' => (&t[..t.len() - 1], 1 << 20),
        'g' | 'G' => (&t[..t.len() - 1], 1 << 30),
        _ => (t, 1),
    };
    num.trim().parse::<u64>().ok().map(|n| n.saturating_mul(mult))
}

/// Everything one row of the tables needs: the census counts with full
/// provenance, or a recorded error class.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRecord {
    /// Content hash identifying (family, params, config); the resume key.
    pub key: String,
    pub family: Family,
    pub params: Vec<Rat>,
    pub mode: CoeffMode,
    pub n_v: Option<u64>,
    pub n_t: Option<u64>,
    pub n_p: Option<u64>,
    pub four_bases_found: Option<bool>,
    pub wall_time_s: f64,
    pub engine: Engine,
    pub version: String,
    pub seed_provenance: String,
    /// Error class with detail ("ResourceBudgetExceeded: …") when the point
    /// failed; counts are then absent.
    pub error: Option<String>,
}

impl ResultRecord {
    pub fn to_json(&self) -> Value {
        json!({
            "key": self.key,
            "family": self.family.name(),
            "params": self.params.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "mode": self.mode.to_string(),
            "n_v": self.n_v,
            "n_t": self.n_t,
            "n_p": self.n_p,
            "four_bases_found": self.four_bases_found,
            "wall_time_s": self.wall_time_s,
            "engine": self.engine.name(),
            "version": self.version,
            "seed_provenance": self.seed_provenance,
            "error": self.error,
        })
    }

    pub fn from_json(v: &Value) -> Result<ResultRecord, HarnessError> {
        let field = |k: &str| -> Result<&Value, HarnessError> {
            let f = &v[k];
            if f.is_null() && !matches!(k, "error") {
                return Err(HarnessError::BadData(format!("missing field {k}")));
            }
            Ok(f)
        };
        let s = |k: &str| -> Result<String, HarnessError> {
            field(k)?
                .as_str()
                .map(str::to_owned)
                .ok_or_else(|| HarnessError::BadData(format!("field {k} not a string")))
        };
        let family = Family::from_name(&s("family")?)
            .ok_or_else(|| HarnessError::BadData("unknown family".into()))?;
        let engine = Engine::from_name(&s("engine")?)
            .ok_or_else(|| HarnessError::BadData("unknown engine".into()))?;
        let mode = CoeffMode::parse(&s("mode")?)
            .map_err(|e| HarnessError::BadData(format!("bad mode: {e}")))?;
        let params = field("params")?
            .as_array()
            .ok_or_else(|| HarnessError::BadData("params not an array".into()))?
            .iter()
            .map(|p| {
                p.as_str()
                    .and_then(|t| t.parse::<Rat>().ok())
                    .ok_or_else(|| HarnessError::BadData("bad param".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ResultRecord {
            key: s("key")?,
            family,
            params,
            mode,
            n_v: v["n_v"].as_u64(),
            n_t: v["n_t"].as_u64(),
            n_p: v["n_p"].as_u64(),
            four_bases_found: v["four_bases_found"].as_bool(),
            wall_time_s: field("wall_time_s")?
                .as_f64()
                .ok_or_else(|| HarnessError::BadData("bad wall_time_s".into()))?,
            engine,
            version: s("version")?,
            seed_provenance: s("seed_provenance")?,
            error: v["error"].as_str().map(str::to_owned),
        })
    }
}

/// Resume identity of a point under a config: family, dimension, parameters,
/// and everything that changes the census output.
pub fn point_key(family: Family, params: &[Rat], cfg: &RunConfig) -> String {
    let params_s: Vec<String> = params.iter().map(|p| p.to_string()).collect();
    let threshold = cfg
        .threshold
        .unwrap_or_else(|| default_threshold(cfg.mode, cfg.engine));
    let engine_s = match cfg.engine {
        Engine::Groebner => format!("groebner|digits={}", cfg.digits),
        Engine::Numcheck => format!("numcheck|starts={}|seed={}", cfg.starts, cfg.seed),
    };
    let id = format!(
        "v1|{}|{}|{}|{}|{engine_s}|thr={threshold:e}|branch={:?}",
        family.name(),
        cfg.dim,
        params_s.join(";"),
        cfg.mode,
        cfg.branch,
    );
    format!("{:016x}", fnv64(id.as_bytes()))
}

fn groebner_class(e: GroebnerError) -> String {
    match e {
        GroebnerError::ResourceBudgetExceeded(d) => format!("ResourceBudgetExceeded: {d}"),
        GroebnerError::NotZeroDimensional => "NotZeroDimensional".into(),
        other => format!("GroebnerFailure: {other}"),
    }
}

/// The pipeline for one point; Err carries the recorded error class.
fn point_census(
    family: Family,
    params: &[Rat],
    cfg: &RunConfig,
    engine_seed: u64,
) -> Result<crate::analyzer::AnalysisReport, String> {
    let build_digits = match cfg.mode {
        CoeffMode::Exact => 40,
        CoeffMode::Approx(k) => (k + 10).max(40),
    }
    .max(cfg.digits + 10);
    let h = catalog::build(family, cfg.dim, params, cfg.branch, build_digits)
        .map_err(|e| format!("BuildFailure: {e}"))?;
    let sys = mu_system(&h, cfg.mode).map_err(|e| format!("SystemFailure: {e}"))?;
    let threshold = cfg
        .threshold
        .unwrap_or_else(|| default_threshold(cfg.mode, cfg.engine));

    let sol = match cfg.engine {
        Engine::Groebner => {
            let mut opts = BuchbergerOptions::default();
            if let Some(b) = mem_budget_bytes(cfg) {
                opts.budget.max_mem_bytes = b;
            }
            let gb = lex_groebner_with(&sys, &opts).map_err(groebner_class)?;
            let sol = solve_triangular(&gb, &sys, cfg.digits)
                .map_err(|e| format!("SolveFailure: {e}"))?;
            if cfg.crosscheck {
                let sc = SearchConfig { starts: cfg.starts, seed: engine_seed, ..Default::default() };
                match multistart_solve(&sys, &sc) {
                    Ok(approx) => {
                        let report = crosscheck(&sol, &approx, 1e-6);
                        if !report.unmatched_approx.is_empty() {
                            return Err(format!(
                                "CrosscheckMismatch: oracle found {} points outside the certified set",
                                report.unmatched_approx.len()
                            ));
                        }
                    }
                    Err(crate::numcheck::NumError::NoConvergence) => {}
                    Err(e) => return Err(format!("CrosscheckMismatch: {e}")),
                }
            }
            sol
        }
        Engine::Numcheck => {
            let sc = SearchConfig { starts: cfg.starts, seed: engine_seed, ..Default::default() };
            multistart_solve(&sys, &sc).map_err(|e| format!("NoConvergence: {e}"))?
        }
    };
    let (_vectors, report) =
        analyze_solutions_at(&sol, threshold).map_err(|e| format!("AnalyzeFailure: {e}"))?;
    Ok(report)
}

fn compute_point(
    family: Family,
    params: &[Rat],
    cfg: &RunConfig,
    key: String,
    provenance: String,
) -> ResultRecord {
    let engine_seed = fnv64(format!("{}|{}|{provenance}", family.name(), cfg.seed).as_bytes());
    let t0 = Instant::now();
    let outcome = point_census(family, params, cfg, engine_seed);
    let wall_time_s = t0.elapsed().as_secs_f64();
    let (report, error) = match outcome {
        Ok(r) => (Some(r), None),
        Err(class) => (None, Some(class)),
    };
    ResultRecord {
        key,
        family,
        params: params.to_vec(),
        mode: cfg.mode,
        n_v: report.as_ref().map(|r| r.n_v as u64),
        n_t: report.as_ref().map(|r| r.n_t as u64),
        n_p: report.as_ref().map(|r| r.n_p as u64),
        four_bases_found: report.as_ref().map(|r| r.four_bases_found),
        wall_time_s,
        engine: cfg.engine,
        version: VERSION.to_owned(),
        seed_provenance: format!("{provenance} engine_seed={engine_seed:#018x}"),
        error,
    }
}

/// Runs one point and appends its record to the store before returning.
/// Engine failures are recorded in the result, not raised; the only error
/// path is the store itself.
pub fn run_point(
    family: Family,
    params: &[Rat],
    cfg: &RunConfig,
    store: &ResultStore,
) -> Result<ResultRecord, HarnessError> {
    let key = point_key(family, params, cfg);
    let rec = compute_point(
        family,
        params,
        cfg,
        key,
        format!("family={family} single seed={}", cfg.seed),
    );
    store.append(&rec)?;
    Ok(rec)
}

/// Sweeps a grid: skips points whose key is already stored, runs the rest on
/// a pool of `cfg.jobs` workers (each record hits the store as soon as it
/// finishes), and returns the completed records in grid order. With
/// `cfg.limit` set, at most that many new points run; the returned slice of
/// the grid grows on each resumed call until complete.
pub fn run_grid(
    spec: &GridSpec,
    cfg: &RunConfig,
    store: &ResultStore,
) -> Result<Vec<ResultRecord>, HarnessError> {
    let points = spec.points()?;
    let mut by_key: HashMap<String, ResultRecord> = store
        .load()?
        .into_iter()
        .map(|r| (r.key.clone(), r))
        .collect();

    let todo: Vec<(&GridPoint, String)> = points
        .iter()
        .map(|p| (p, point_key(spec.family, &p.params, cfg)))
        .filter(|(_, k)| !by_key.contains_key(k))
        .take(cfg.limit.unwrap_or(usize::MAX))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::BadSpec(format!("worker pool: {e}")))?;
    let fresh: Vec<ResultRecord> = pool.install(|| {
        todo.par_iter()
            .map(|(p, key)| {
                let rec =
                    compute_point(spec.family, &p.params, cfg, key.clone(), p.provenance.clone());
                store.append(&rec)?;
                Ok(rec)
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    by_key.extend(fresh.into_iter().map(|r| (r.key.clone(), r)));

    Ok(points
        .iter()
        .filter_map(|p| by_key.remove(&point_key(spec.family, &p.params, cfg)))
        .collect())
}

// ---------------------------------------------------------------------------
// Store

/// Append-only JSONL store; one record per line, written in a single
/// syscall and fsynced, so a killed run leaves at worst a truncated final
/// line (ignored on load) and never a corrupt earlier record.
pub struct ResultStore {
    path: PathBuf,
    file: Mutex<File>,
}

impl ResultStore {
    pub fn open(path: &Path) -> Result<ResultStore, HarnessError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io_err(&format!("open {}", path.display()), e))?;
        Ok(ResultStore { path: path.to_path_buf(), file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, rec: &ResultRecord) -> Result<(), HarnessError> {
        let mut line = rec.to_json().to_string();
        line.push('\n');
        let mut f = self.file.lock().expect("store lock");
        f.write_all(line.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(|e| io_err("append", e))
    }

    pub fn load(&self) -> Result<Vec<ResultRecord>, HarnessError> {
        read_records(&self.path)
    }
}

fn read_records(path: &Path) -> Result<Vec<ResultRecord>, HarnessError> {
    let f = File::open(path).map_err(|e| io_err(&format!("open {}", path.display()), e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| io_err("read", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(_) => continue, // torn tail line from a killed run
        };
        out.push(ResultRecord::from_json(&v)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Export

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

/// Plot-ready columns; wall time and provenance stay in the JSONL records,
/// so resumed and uninterrupted runs of the same grid export byte-identical
/// CSV.
const CSV_COLUMNS: [&str; 10] = [
    "family", "param1", "param2", "mode", "engine", "n_v", "n_t", "n_p", "four_bases_found",
    "error",
];

/// Writes records in a stable column order. CSV carries 17-significant-digit
/// decimal parameters for plotting; JSONL carries the full records and
/// round-trips losslessly through [`import_jsonl`].
pub fn export(
    records: &[ResultRecord],
    format: ExportFormat,
    path: &Path,
) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::IOFailure(format!(
            "no records to export to {}",
            path.display()
        )));
    }
    match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_path(path)
                .map_err(|e| HarnessError::IOFailure(format!("create csv: {e}")))?;
            w.write_record(CSV_COLUMNS)
                .map_err(|e| HarnessError::IOFailure(format!("csv header: {e}")))?;
            let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in records {
                let dec =
                    |i: usize| r.params.get(i).map(|p| rat_to_decimal(p, 17)).unwrap_or_default();
                w.write_record([
                    r.family.name().to_owned(),
                    dec(0),
                    dec(1),
                    r.mode.to_string(),
                    r.engine.name().to_owned(),
                    opt(r.n_v),
                    opt(r.n_t),
                    opt(r.n_p),
                    r.four_bases_found.map(|b| b.to_string()).unwrap_or_default(),
                    r.error.clone().unwrap_or_default(),
                ])
                .map_err(|e| HarnessError::IOFailure(format!("csv row: {e}")))?;
            }
            w.flush().map_err(|e| io_err("csv flush", e))
        }
        ExportFormat::Jsonl => {
            let mut f = File::create(path)
                .map_err(|e| io_err(&format!("create {}", path.display()), e))?;
            for r in records {
                writeln!(f, "{}", r.to_json()).map_err(|e| io_err("write", e))?;
            }
            f.sync_data().map_err(|e| io_err("sync", e))
        }
    }
}

/// Reads back a JSONL export (or store file).
pub fn import_jsonl(path: &Path) -> Result<Vec<ResultRecord>, HarnessError> {
    read_records(path)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn contains(family: Family, params: &[Rat]) -> bool {
        FundamentalRegion::new(family).contains(params, 15).unwrap()
    }

    #[test]
    fn family_grid_cardinalities() {
        let cases = [
            (Family::Dita, GridKind::GammaD, 36),
            (Family::Fourier, GridKind::GammaF, 168),
            (Family::Symmetric, GridKind::GammaM, 70),
            (Family::Hermitean, GridKind::GammaB, 34),
        ];
        for (family, kind, n) in cases {
            let pts = GridSpec { family, kind }.points().unwrap();
            assert_eq!(pts.len(), n, "{family}");
            for p in &pts {
                assert!(contains(family, &p.params), "{family} point outside region");
            }
        }
    }

    #[test]
    fn gamma_grids_match_their_definitions() {
        let gd = GridSpec { family: Family::Dita, kind: GridKind::GammaD }.points().unwrap();
        assert_eq!(gd[0].params[0], Rat::from((-18, 144)));
        assert_eq!(gd[35].params[0], Rat::from((1, 8)));
        assert!(gd.iter().all(|p| p.params[0] != 0));

        let gf = GridSpec { family: Family::Fourier, kind: GridKind::GammaF }.points().unwrap();
        for p in &gf {
            let (a, b) = (&p.params[0], &p.params[1]);
            assert!(Rat::from(b * 2u32) <= *a, "a >= 2b violated");
        }

        let gm = GridSpec { family: Family::Symmetric, kind: GridKind::GammaM }.points().unwrap();
        assert!(!gm.iter().any(|p| p.params[0] == Rat::from((36, 144))));

        let gb = GridSpec { family: Family::Hermitean, kind: GridKind::GammaB }.points().unwrap();
        assert!(!gb.iter().any(|p| p.params[0] == Rat::from((1, 2))));
    }

    #[test]
    fn grid_family_mismatch_rejected() {
        let err = GridSpec { family: Family::Fourier, kind: GridKind::GammaD }
            .points()
            .unwrap_err();
        assert!(matches!(err, HarnessError::BadSpec(_)));
    }

    #[test]
    fn line_grids_stay_on_ray_inside_deltoid() {
        for (kind, arg) in [
            (GridKind::LambdaLine { n: 25, seed: 3 }, LAMBDA_ARG),
            (GridKind::LambdaPrimeLine { n: 25, seed: 3 }, LAMBDA_PRIME_ARG),
        ] {
            let pts = GridSpec { family: Family::Szollosi, kind }.points().unwrap();
            assert_eq!(pts.len(), 25);
            let rmax = ray_rmax(arg);
            for p in &pts {
                assert!(contains(Family::Szollosi, &p.params));
                let (a, b) = (p.params[0].to_f64(), p.params[1].to_f64());
                let r = (a * a + b * b).sqrt();
                if r > 1e-12 {
                    assert!((b.atan2(a) - arg).abs() < 1e-9, "off the ray");
                }
                assert!(r <= rmax);
            }
        }
    }

    #[test]
    fn random_grids_reproducible_and_admissible() {
        for family in [
            Family::Dita,
            Family::Fourier,
            Family::Symmetric,
            Family::Hermitean,
            Family::Szollosi,
        ] {
            let spec = GridSpec { family, kind: GridKind::Random { n: 12, seed: 5 } };
            let a = spec.points().unwrap();
            let b = spec.points().unwrap();
            assert_eq!(a.len(), 12);
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.params, y.params, "same seed must reproduce");
            }
            for p in &a {
                assert!(contains(family, &p.params), "{family} sample outside region");
            }
            let other = GridSpec { family, kind: GridKind::Random { n: 12, seed: 6 } }
                .points()
                .unwrap();
            assert!(
                a.iter().zip(other.iter()).any(|(x, y)| x.params != y.params),
                "different seed should move the samples"
            );
        }
        let parameterless =
            GridSpec { family: Family::Circulant, kind: GridKind::Random { n: 2, seed: 1 } };
        assert!(parameterless.points().is_err());
    }

    #[test]
    fn record_round_trips_through_json() {
        let rec = ResultRecord {
            key: "00ff".into(),
            family: Family::Dita,
            params: vec![Rat::from((17, 144))],
            mode: CoeffMode::Approx(5),
            n_v: Some(72),
            n_t: Some(4),
            n_p: Some(0),
            four_bases_found: Some(false),
            wall_time_s: 12.625,
            engine: Engine::Groebner,
            version: VERSION.into(),
            seed_provenance: "gamma_D a=17".into(),
            error: None,
        };
        let back = ResultRecord::from_json(&rec.to_json()).unwrap();
        assert_eq!(back, rec);

        let failed = ResultRecord {
            n_v: None,
            n_t: None,
            n_p: None,
            four_bases_found: None,
            error: Some("ResourceBudgetExceeded: basis exceeded 1000 bytes".into()),
            ..rec
        };
        let back = ResultRecord::from_json(&failed.to_json()).unwrap();
        assert_eq!(back, failed);
    }

    #[test]
    fn store_appends_and_loads() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResultStore::open(&dir.path().join("r.jsonl")).unwrap();
        let cfg = RunConfig { dim: 3, mode: CoeffMode::Exact, ..Default::default() };
        let mk = |a: i32| ResultRecord {
            key: point_key(Family::Dita, &[Rat::from((a, 144))], &cfg),
            family: Family::Dita,
            params: vec![Rat::from((a, 144))],
            mode: cfg.mode,
            n_v: Some(1),
            n_t: Some(0),
            n_p: Some(0),
            four_bases_found: Some(false),
            wall_time_s: 0.5,
            engine: Engine::Groebner,
            version: VERSION.into(),
            seed_provenance: format!("a={a}"),
            error: None,
        };
        let recs: Vec<ResultRecord> = (1..=3).map(mk).collect();
        for r in &recs {
            store.append(r).unwrap();
        }
        assert_eq!(store.load().unwrap(), recs);
    }

    #[test]
    fn run_point_dim3_census_and_budget_failure() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResultStore::open(&dir.path().join("r.jsonl")).unwrap();
        let cfg = RunConfig {
            dim: 3,
            mode: CoeffMode::Exact,
            digits: 15,
            engine: Engine::Groebner,
            crosscheck: true,
            starts: 200,
            ..Default::default()
        };
        let rec = run_point(Family::Fourier, &[], &cfg, &store).unwrap();
        assert_eq!((rec.n_v, rec.n_t, rec.n_p), (Some(6), Some(2), Some(9)));
        assert_eq!(rec.four_bases_found, Some(true));
        assert!(rec.error.is_none());
        assert!(rec.wall_time_s > 0.0);

        let starved = RunConfig { mem_budget: Some(1_000), ..cfg };
        let rec = run_point(Family::Fourier, &[], &starved, &store).unwrap();
        assert!(rec.error.as_deref().unwrap().starts_with("ResourceBudgetExceeded"));
        assert_eq!(rec.n_v, None);
        assert_eq!(store.load().unwrap().len(), 2, "failures are stored too");
    }

    #[test]
    fn grid_resumes_without_recomputing() {
        let spec = GridSpec {
            family: Family::Symmetric,
            kind: GridKind::Random { n: 3, seed: 9 },
        };
        let cfg = RunConfig {
            engine: Engine::Numcheck,
            mode: CoeffMode::Approx(15),
            starts: 60,
            jobs: 2,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();

        let resumed_store = ResultStore::open(&dir.path().join("a.jsonl")).unwrap();
        let partial = run_grid(
            &spec,
            &RunConfig { limit: Some(2), ..cfg.clone() },
            &resumed_store,
        )
        .unwrap();
        assert_eq!(partial.len(), 2);
        let resumed = run_grid(&spec, &cfg, &resumed_store).unwrap();
        assert_eq!(resumed.len(), 3);
        assert_eq!(&resumed[..2], &partial[..], "finished points must not rerun");
        assert_eq!(resumed_store.load().unwrap().len(), 3, "no duplicate records");

        let fresh_store = ResultStore::open(&dir.path().join("b.jsonl")).unwrap();
        let fresh = run_grid(&spec, &cfg, &fresh_store).unwrap();

        let resumed_csv = dir.path().join("a.csv");
        let fresh_csv = dir.path().join("b.csv");
        export(&resumed, ExportFormat::Csv, &resumed_csv).unwrap();
        export(&fresh, ExportFormat::Csv, &fresh_csv).unwrap();
        assert_eq!(
            std::fs::read(&resumed_csv).unwrap(),
            std::fs::read(&fresh_csv).unwrap(),
            "interrupted and uninterrupted sweeps must export identically"
        );
    }

    #[test]
    fn export_jsonl_round_trips_and_empty_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        let rec = ResultRecord {
            key: "k".into(),
            family: Family::Spectral,
            params: vec![],
            mode: CoeffMode::Approx(15),
            n_v: Some(90),
            n_t: Some(0),
            n_p: Some(1115),
            four_bases_found: Some(false),
            wall_time_s: 1.0 / 3.0,
            engine: Engine::Numcheck,
            version: VERSION.into(),
            seed_provenance: "single".into(),
            error: None,
        };
        export(&[rec.clone()], ExportFormat::Jsonl, &path).unwrap();
        assert_eq!(import_jsonl(&path).unwrap(), vec![rec]);

        let err = export(&[], ExportFormat::Jsonl, &dir.path().join("e.jsonl")).unwrap_err();
        assert!(matches!(err, HarnessError::IOFailure(_)));
        let err = export(&[], ExportFormat::Csv, &dir.path().join("e.csv")).unwrap_err();
        assert!(matches!(err, HarnessError::IOFailure(_)));
    }

    #[test]
    fn budget_parsing_and_threshold_defaults() {
        assert_eq!(parse_bytes("1024"), Some(1024));
        assert_eq!(parse_bytes("8G"), Some(8 << 30));
        assert_eq!(parse_bytes(" 512m "), Some(512 << 20));
        assert_eq!(parse_bytes("2k"), Some(2048));
        assert_eq!(parse_bytes("many"), None);

        assert_eq!(default_threshold(CoeffMode::Exact, Engine::Groebner), 1e-10);
        assert_eq!(default_threshold(CoeffMode::Exact, Engine::Numcheck), 1e-8);
        assert_eq!(default_threshold(CoeffMode::Approx(5), Engine::Groebner), 1e-3);
        assert_eq!(default_threshold(CoeffMode::Approx(15), Engine::Groebner), 1e-10);
    }

    // Observed regression, not a theorem: the census is symmetric in the
    // sign of the Dita parameter. A change here means behaviour moved, not
    // necessarily that it broke.
    #[test]
    fn dita_census_symmetric_in_parameter_sign_change_detector() {
        let cfg = RunConfig {
            engine: Engine::Numcheck,
            mode: CoeffMode::Approx(15),
            starts: 3_000,
            ..Default::default()
        };
        let x = Rat::from((1, 8));
        let plus = point_census(Family::Dita, &[x.clone()], &cfg, 1).unwrap();
        let minus = point_census(Family::Dita, &[-x], &cfg, 2).unwrap();
        assert_eq!(
            (plus.n_v, plus.n_t, plus.n_p),
            (minus.n_v, minus.n_t, minus.n_p),
            "D(x) and D(-x) censuses diverged"
        );
    }

    // Proven symmetry: M(t) and M(-t mod 1) are equivalent, so their
    // censuses agree.
    #[test]
    fn symmetric_family_census_even_in_t() {
        let t = Rat::from((17, 144));
        let cfg = RunConfig {
            engine: Engine::Numcheck,
            mode: CoeffMode::Approx(15),
            starts: 3_000,
            ..Default::default()
        };
        let here = point_census(Family::Symmetric, &[t.clone()], &cfg, 1).unwrap();

        let digits = 25;
        let h = catalog::build_unchecked(
            Family::Symmetric,
            6,
            &[Rat::from(1) - t],
            None,
            digits + 15,
        )
        .unwrap();
        let sys = mu_system(&h, CoeffMode::Approx(15)).unwrap();
        let sc = SearchConfig { starts: 3_000, seed: 7, ..Default::default() };
        let sol = multistart_solve(&sys, &sc).unwrap();
        let (_v, there) = analyze_solutions_at(&sol, 1e-8).unwrap();

        assert_eq!((here.n_v, here.n_t, here.n_p), (there.n_v, there.n_t, there.n_p));
    }
}
