use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lshlab_core::bounds::{bound_rows_to_table, bound_table, BOUND_TABLE_HEADER};
use lshlab_core::dataset::read_points;
use lshlab_core::hash::{
    bit_sampling_profile, exact_sensitivity, rho_of, FamilyDescriptor, HashFamily, Rho, SensitivityProfile,
};
use lshlab_core::index::{plan, planted_experiment, ExperimentConfig, IndexParams, IndexStats, NNIndex};
use lshlab_core::report::{fmt12, OutputFormat, Table};
use lshlab_core::rng::DEFAULT_SEED;
use lshlab_core::sampling::mc_collision_at_distance;
use lshlab_core::spectral::{check_log_convexity, family_spectrum, linear_grid, stability_curve, SpectrumMode};
use lshlab_core::verify::{self, Suite, VerifyOptions};
use lshlab_core::LshError;

const THREADS_VAR: &str = "LSHLAB_THREADS";

#[derive(Parser)]
#[command(
    name = "lshlab",
    version,
    about = "Locality-sensitive hashing on the Hamming cube: bounds, noise stability, sensitivity, and a near-neighbor index"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file (standard output if absent). For `index build`, the index file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    JsonLines,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::JsonLines => OutputFormat::JsonLines,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyKind {
    BitSampling,
    Constant,
    Parity,
    Minhash,
    Trivial,
    RandomTables,
}

#[derive(Args)]
struct FamilyArgs {
    /// Built-in family.
    #[arg(long, value_enum, conflicts_with = "family_file")]
    family: Option<FamilyKind>,
    /// JSON family descriptor.
    #[arg(long)]
    family_file: Option<PathBuf>,
    /// Dimension of a built-in family.
    #[arg(long)]
    d: Option<usize>,
    /// Parity order.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Label count of random tables.
    #[arg(long, default_value_t = 4)]
    labels: u64,
    /// Function count of random tables.
    #[arg(long, default_value_t = 4)]
    functions: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Table of upper and lower bounds on rho as a function of c.
    Bounds {
        #[arg(long, default_value_t = 1.0)]
        c_min: f64,
        #[arg(long, default_value_t = 10.0)]
        c_max: f64,
        #[arg(long, default_value_t = 19)]
        steps: usize,
        #[arg(long, default_value_t = 1e6)]
        d: f64,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        /// Constant in front of the lambda^(1/3) correction.
        #[arg(long = "K", default_value_t = 1.0)]
        big_k: f64,
        /// Exponents s of the l_s reference curve (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "1")]
        s: Vec<f64>,
    },
    /// Noise-stability curve K(t) and its log-convexity certificate.
    Stability {
        #[command(flatten)]
        family: FamilyArgs,
        /// Power the family k times.
        #[arg(long)]
        k: Option<usize>,
        /// Radius of the trivial family.
        #[arg(long)]
        r: Option<usize>,
        /// Explicit grid (comma separated); overrides --t-min/--t-max/--t-steps.
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.0)]
        t_min: f64,
        #[arg(long, default_value_t = 3.0)]
        t_max: f64,
        #[arg(long, default_value_t = 21)]
        t_steps: usize,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Where to write the certificate (standard error if absent).
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// The (r, cr, p, q) profile of a family.
    Sensitivity {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        cr: usize,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Near-neighbor index.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Run an invariant suite.
    Verify {
        /// parseval, oracle, log-convexity, sandwich, chernoff, powering, bit-sampling or full.
        #[arg(default_value = "full")]
        suite: String,
        #[arg(long, hide = true)]
        corrupt_spectrum: bool,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Build an index over a dataset and write it to --out.
    Build {
        /// Points, one 0/1 string per line, or the binary format.
        #[arg(long)]
        data: PathBuf,
        /// Base family (bit sampling of the data dimension if absent).
        #[command(flatten)]
        family: FamilyArgs,
        /// Near radius.
        #[arg(long)]
        r: f64,
        /// Far radius.
        #[arg(long, conflicts_with = "c")]
        cr: Option<f64>,
        /// Approximation factor, so that the far radius is c * r.
        #[arg(long)]
        c: Option<f64>,
        /// Allowed failure probability per query.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Override the planned concatenation length.
        #[arg(long)]
        k: Option<usize>,
        /// Override the planned table count.
        #[arg(long = "L")]
        tables: Option<usize>,
    },
    /// Query a saved index with every point of a file.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
    },
    /// Statistics of a saved index.
    Stats {
        #[arg(long)]
        index: PathBuf,
    },
    /// Planted near-neighbor experiment with bit sampling.
    Experiment {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        r: usize,
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 200)]
        queries: usize,
    },
}

enum Failure {
    Usage(String),
    Verification,
}

impl From<LshError> for Failure {
    fn from(e: LshError) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Prefixes a failure with the file it came from.
fn at(path: &Path) -> impl Fn(LshError) -> Failure + '_ {
    move |e| usage(format!("{}: {e}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build_family(args: &FamilyArgs, r: Option<usize>, default_d: Option<usize>) -> Result<HashFamily, Failure> {
    let descriptor = if let Some(path) = &args.family_file {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        FamilyDescriptor::from_json(&text)?
    } else {
        let d = args
            .d
            .or(default_d)
            .ok_or_else(|| usage("--d is required for a built-in family"))?;
        match args.family.unwrap_or(FamilyKind::BitSampling) {
            FamilyKind::BitSampling => FamilyDescriptor::BitSampling { d },
            FamilyKind::Constant => FamilyDescriptor::Constant { d },
            FamilyKind::Parity => FamilyDescriptor::Parity { d, order: args.order },
            FamilyKind::Minhash => FamilyDescriptor::MinHash { d },
            FamilyKind::Trivial => FamilyDescriptor::Trivial {
                d,
                r: r.ok_or_else(|| usage("--r is required for the trivial family"))?,
            },
            FamilyKind::RandomTables => FamilyDescriptor::RandomTables {
                d,
                labels: args.labels,
                functions: args.functions,
                seed: DEFAULT_SEED,
            },
        }
    };
    Ok(HashFamily::from_descriptor(&descriptor)?)
}

fn powered(family: HashFamily, k: Option<usize>) -> Result<HashFamily, Failure> {
    match k {
        Some(k) => Ok(family.power(k)?),
        None => Ok(family),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bounds(cli: &Cli, c_min: f64, c_max: f64, steps: usize, d: f64, q: f64, big_k: f64, s: &[f64]) -> CmdResult {
    if c_min >= c_max || c_min.is_nan() || c_max.is_nan() {
        return Err(usage(format!("need c_min < c_max, got {c_min} and {c_max}")));
    }
    if c_min < 1.0 {
        return Err(usage(format!("need c_min >= 1, got {c_min}")));
    }
    if steps < 2 {
        return Err(usage("need at least 2 steps"));
    }
    if s.is_empty() {
        return Err(usage("need at least one value of s"));
    }
    let grid = linear_grid(c_min, c_max, steps)?;
    let table = if let [s] = s {
        bound_rows_to_table(&bound_table(&grid, d, q, *s, big_k)?)
    } else {
        // one diim column per s
        let mut header: Vec<String> = BOUND_TABLE_HEADER[..3].iter().map(|h| h.to_string()).collect();
        header.extend(s.iter().map(|s| format!("diim_s{s}")));
        header.extend(["mnp".to_string(), "main".to_string()]);
        let per_s = s
            .iter()
            .map(|&s| bound_table(&grid, d, q, s, big_k))
            .collect::<Result<Vec<_>, _>>()?;
        let mut table = Table::new(header);
        for (i, row) in per_s[0].iter().enumerate() {
            let mut cells = vec![fmt12(row.c), fmt12(row.im), fmt12(row.ai)];
            cells.extend(per_s.iter().map(|rows| fmt12(rows[i].diim)));
            cells.extend([fmt12(row.mnp), fmt12(row.main)]);
            table.push(cells);
        }
        table
    };
    emit(cli.out.as_deref(), &table.render(cli.format.into()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_stability(
    cli: &Cli,
    family: &FamilyArgs,
    k: Option<usize>,
    r: Option<usize>,
    t: &Option<Vec<f64>>,
    (t_min, t_max, t_steps): (f64, f64, usize),
    mode: Mode,
    samples: usize,
    certificate: Option<&Path>,
) -> CmdResult {
    let family = powered(build_family(family, r, None)?, k)?;
    let grid = match t {
        Some(t) if t.is_empty() => return Err(usage("the t grid is empty")),
        Some(t) => t.clone(),
        None => linear_grid(t_min, t_max, t_steps)?,
    };
    match mode {
        Mode::Exact => {
            let spectrum = family_spectrum(&family, SpectrumMode::Exact)?;
            let curve = stability_curve(&spectrum, &grid)?;
            emit(cli.out.as_deref(), &curve.to_table().render(cli.format.into()))?;
            if curve.grid.len() < 3 {
                eprintln!("certificate: skipped (fewer than 3 grid points)");
                return Ok(());
            }
            let cert = check_log_convexity(&curve)?;
            let mut text = format!(
                "log-convexity: {}\nchecks: {}\nworst slack: {}\n",
                if cert.passed { "PASS" } else { "FAIL" },
                cert.checks,
                fmt12(cert.worst_slack)
            );
            if let Some([a, m, b]) = cert.violation {
                text.push_str(&format!("first violation: t = {a}, {m}, {b}\n"));
            }
            if cert.pruned.count > 0 {
                text.push_str(&format!(
                    "pruned coefficients: {} (mass {})\n",
                    cert.pruned.count,
                    fmt12(cert.pruned.mass)
                ));
            }
            match certificate {
                Some(path) => emit(Some(path), &text)?,
                None => eprint!("{text}"),
            }
            if !cert.passed {
                return Err(Failure::Verification);
            }
            Ok(())
        }
        Mode::Mc => {
            let curve = lshlab_core::sampling::mc_stability_curve(&family, &grid, samples, cli.seed)?;
            emit(cli.out.as_deref(), &curve.to_table().render(cli.format.into()))
        }
    }
}

fn profile_table(family: &HashFamily, mode: &str, profile: &SensitivityProfile) -> Table {
    let mut t = Table::new([
        "family", "mode", "r", "cr", "p", "q", "p_exact", "q_exact", "rho", "note",
    ]);
    let (rho, note) = match &profile.rho {
        Rho::Defined { value } => (fmt12(*value), String::new()),
        Rho::Undefined { reason } => ("undefined".to_string(), reason.clone()),
    };
    t.push(vec![
        family.description(),
        mode.to_string(),
        profile.r.to_string(),
        profile.cr.to_string(),
        fmt12(profile.p),
        fmt12(profile.q),
        profile.p_exact.map(|f| f.to_string()).unwrap_or_default(),
        profile.q_exact.map(|f| f.to_string()).unwrap_or_default(),
        rho,
        note,
    ]);
    t
}

fn cmd_sensitivity(
    cli: &Cli,
    family: &FamilyArgs,
    k: Option<usize>,
    r: usize,
    cr: usize,
    mode: Mode,
    samples: usize,
) -> CmdResult {
    let family = powered(build_family(family, Some(r), None)?, k)?;
    let table = match mode {
        Mode::Exact => {
            let profile = exact_sensitivity(&family, r, cr).map_err(|e| match e {
                LshError::TooLarge { .. } => usage(format!("{e} (--mode mc)")),
                e => e.into(),
            })?;
            profile_table(&family, "exact", &profile)
        }
        Mode::Mc => {
            if r >= cr {
                return Err(usage(format!("need r < cr, got r={r}, cr={cr}")));
            }
            let p = mc_collision_at_distance(&family, r, samples, cli.seed)?;
            let q = mc_collision_at_distance(&family, cr, samples, cli.seed.wrapping_add(1))?;
            let mut profile = SensitivityProfile::hamming(r as f64, cr as f64, p.estimate, q.estimate)?;
            profile.rho = rho_of(p.estimate, q.estimate);
            profile_table(&family, "mc", &profile)
        }
    };
    emit(cli.out.as_deref(), &table.render(cli.format.into()))
}

fn stats_table(stats: &IndexStats) -> Table {
    let mut t = Table::new(["metric", "value"]);
    let mut row = |k: &str, v: String| t.push(vec![k.to_string(), v]);
    row("points", stats.points.to_string());
    row("d", stats.dim.to_string());
    row("k", stats.k.to_string());
    row("L", stats.tables.to_string());
    row("buckets", stats.buckets.to_string());
    row("entries", stats.entries.to_string());
    row("mean_bucket_size", fmt12(stats.mean_bucket_size));
    row("max_bucket_size", stats.max_bucket_size.to_string());
    row("memory_bytes", stats.memory_bytes.to_string());
    if let Some(e) = stats.measured_space_exponent {
        row("measured_space_exponent", fmt12(e));
    }
    if let Some(e) = stats.predicted_space_exponent {
        row("predicted_space_exponent", fmt12(e));
    }
    t
}

#[allow(clippy::too_many_arguments)]
fn cmd_index_build(
    cli: &Cli,
    data: &Path,
    family: &FamilyArgs,
    r: f64,
    cr: Option<f64>,
    c: Option<f64>,
    delta: f64,
    k: Option<usize>,
    tables: Option<usize>,
) -> CmdResult {
    let out = cli
        .out
        .as_deref()
        .ok_or_else(|| usage("index build needs --out for the index file"))?;
    let points = read_points(data).map_err(at(data))?;
    let first = points.first().ok_or_else(|| usage("the dataset is empty"))?;
    let ri = if r >= 0.0 && r.fract() == 0.0 {
        Some(r as usize)
    } else {
        None
    };
    let fam = build_family(family, ri, Some(first.dim()))?;
    let cr = match (cr, c) {
        (Some(cr), _) => cr,
        (None, Some(c)) => c * r,
        (None, None) => return Err(usage("give --cr or --c")),
    };
    let mut params = match (k, tables) {
        (Some(k), Some(l)) => IndexParams::new(r, cr, k, l, delta, cli.seed)?,
        _ => {
            let profile = match fam.descriptor() {
                FamilyDescriptor::BitSampling { d } => bit_sampling_profile(*d, r, cr / r)?,
                _ => {
                    let (Some(ri), true) = (ri, cr.fract() == 0.0) else {
                        return Err(usage("planning needs integer r and cr, or explicit --k and --L"));
                    };
                    exact_sensitivity(&fam, ri, cr as usize)
                        .map_err(|e| usage(format!("cannot plan for this family ({e}); give --k and --L")))?
                }
            };
            plan(points.len(), &profile, delta)?.with_seed(cli.seed)
        }
    };
    if let Some(k) = k {
        params.k = k;
    }
    if let Some(l) = tables {
        params.tables = l;
    }
    let index = NNIndex::build(points, &fam, params)?;
    index.save(out).map_err(at(out))?;
    print!("{}", stats_table(&index.stats()).render(cli.format.into()));
    Ok(())
}

fn cmd_index_query(cli: &Cli, index: &Path, queries: &Path) -> CmdResult {
    let index = NNIndex::load(index).map_err(at(index))?;
    let queries = read_points(queries).map_err(at(queries))?;
    let mut t = Table::new([
        "query",
        "id",
        "distance",
        "candidates",
        "tables_probed",
        "hash_evaluations",
    ]);
    for (i, q) in queries.iter().enumerate() {
        let res = index.query(q)?;
        t.push(vec![
            i.to_string(),
            res.hit.map(|h| h.id.to_string()).unwrap_or_default(),
            res.hit.map(|h| h.distance.to_string()).unwrap_or_default(),
            res.candidates_examined.to_string(),
            res.tables_probed.to_string(),
            res.hash_evaluations.to_string(),
        ]);
    }
    emit(cli.out.as_deref(), &t.render(cli.format.into()))
}

fn cmd_verify(cli: &Cli, suite: &str, corrupt_spectrum: bool) -> CmdResult {
    let suite: Suite = suite.parse()?;
    let options = VerifyOptions {
        seed: cli.seed,
        corrupt_spectrum,
    };
    let report = verify::run(suite, &options)?;
    emit(cli.out.as_deref(), &report.to_text())?;
    if report.passed() {
        Ok(())
    } else {
        for c in report.failed() {
            eprintln!("verification failed: {}", c.invariant);
        }
        Err(Failure::Verification)
    }
}

fn configure_threads() -> CmdResult {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| usage(format!("{THREADS_VAR} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| usage(format!("cannot configure thread pool: {e}")))
}

fn run(cli: &Cli) -> CmdResult {
    configure_threads()?;
    match &cli.command {
        Command::Bounds {
            c_min,
            c_max,
            steps,
            d,
            q,
            big_k,
            s,
        } => cmd_bounds(cli, *c_min, *c_max, *steps, *d, *q, *big_k, s),
        Command::Stability {
            family,
            k,
            r,
            t,
            t_min,
            t_max,
            t_steps,
            mode,
            samples,
            certificate,
        } => cmd_stability(
            cli,
            family,
            *k,
            *r,
            t,
            (*t_min, *t_max, *t_steps),
            *mode,
            *samples,
            certificate.as_deref(),
        ),
        Command::Sensitivity {
            family,
            k,
            r,
            cr,
            mode,
            samples,
        } => cmd_sensitivity(cli, family, *k, *r, *cr, *mode, *samples),
        Command::Index { command } => match command {
            IndexCommand::Build {
                data,
                family,
                r,
                cr,
                c,
                delta,
                k,
                tables,
            } => cmd_index_build(cli, data, family, *r, *cr, *c, *delta, *k, *tables),
            IndexCommand::Query { index, queries } => cmd_index_query(cli, index, queries),
            IndexCommand::Stats { index } => {
                let index = NNIndex::load(index).map_err(at(index))?;
                emit(
                    cli.out.as_deref(),
                    &stats_table(&index.stats()).render(cli.format.into()),
                )
            }
            IndexCommand::Experiment {
                n,
                d,
                r,
                c,
                delta,
                queries,
            } => {
                let config = ExperimentConfig {
                    n: *n,
                    d: *d,
                    r: *r,
                    c: *c,
                    delta: *delta,
                    queries: *queries,
                    seed: cli.seed,
                };
                let report = planted_experiment(&config)?;
                emit(cli.out.as_deref(), &report.to_table().render(cli.format.into()))
            }
        },
        Command::Verify {
            suite,
            corrupt_spectrum,
        } => cmd_verify(cli, suite, *corrupt_spectrum),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
