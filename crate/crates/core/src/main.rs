use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use kdisc::aggregate::{self, ReportKind, DEFAULT_TERM_BUDGET};
use kdisc::config::{ExperimentConfig, THREADS_ENV};
use kdisc::discrepancy::{
    self, BoxMode, ConvexPolygon, Disc, GridOffsets, Region, TorusBox,
};
use kdisc::kloosterman::{self, Query};
use kdisc::pointset;
use kdisc::{fmt17, Error, Result};

#[derive(Parser)]
#[command(name = "kdisc", about = "Kloosterman sums and modular-inverse discrepancy", disable_help_subcommand = true)]
struct Cli {
    /// Worker threads (0 = number of cores); overrides KDISC_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a single Kloosterman sum S(m,n;c).
    Eval(EvalArgs),
    /// Aggregate sums over moduli with envelope ratios.
    Scan(ScanArgs),
    /// Generate the modular-inverse point set S(X).
    Points(PointsArgs),
    /// Discrepancy measurements and count-error bounds.
    Disc(DiscArgs),
    /// Run the full verification suite and print a pass/fail report.
    Report(ReportArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    m: i64,
    #[arg(long)]
    n: i64,
    #[arg(long)]
    c: u64,
    #[arg(long, value_enum, default_value_t = EvalMethod::Fast)]
    method: EvalMethod,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalMethod {
    Direct,
    Fast,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(value_enum)]
    kind: ScanKind,
    /// First argument m (sum kind only).
    #[arg(long = "m")]
    m: Option<i64>,
    /// Second argument n (sum kind only).
    #[arg(long = "n")]
    n: Option<i64>,
    /// Dyadic base M (triple kind).
    #[arg(long = "M")]
    m_base: Option<u64>,
    /// Dyadic base N (triple, moment2 kinds).
    #[arg(long = "N")]
    n_base: Option<u64>,
    #[arg(long = "X")]
    x: u64,
    /// Inner-loop term budget.
    #[arg(long, default_value_t = DEFAULT_TERM_BUDGET)]
    budget: u64,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanKind {
    Sum,
    Triple,
    Moment2,
    Linnik,
}

#[derive(Args)]
struct PointsArgs {
    #[arg(long = "X")]
    x: u64,
    /// Largest accepted X.
    #[arg(long, default_value_t = pointset::DEFAULT_POINT_CAP)]
    cap: u64,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct DiscArgs {
    #[arg(value_enum)]
    kind: DiscKind,
    #[arg(long = "X")]
    x: u64,
    /// Box discrepancy mode.
    #[arg(long, value_enum, default_value_t = DiscBoxMode::Search)]
    mode: DiscBoxMode,
    /// Cap on distinct-coordinate work for exact-small mode.
    #[arg(long, default_value_t = discrepancy::DEFAULT_EXACT_SMALL_CAP)]
    exact_small_cap: usize,
    /// Grid seeds per axis for the ball search.
    #[arg(long, default_value_t = 24)]
    seeds: u32,
    /// Frequency cutoff for the Koksma-Szusz bound.
    #[arg(long = "M")]
    m_max: Option<i64>,
    /// Convex polygon vertices as JSON [[x,y],...] or @file.
    #[arg(long)]
    vertices: Option<String>,
    /// Dyadic cover depth for convex counting.
    #[arg(long, default_value_t = 12)]
    depth: u32,
    /// Query box "xi,zeta,alpha,beta" for the bmv kind.
    #[arg(long = "box")]
    query_box: Option<String>,
    #[arg(long)]
    l1: Option<u64>,
    #[arg(long)]
    l2: Option<u64>,
    /// Disc center "cx,cy" for the harman kind.
    #[arg(long)]
    center: Option<String>,
    #[arg(long)]
    radius: Option<f64>,
    /// Frequency cutoff L for the harman kind.
    #[arg(long)]
    l: Option<f64>,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiscKind {
    Box,
    Ball,
    Convex,
    Hyperbola,
    KsBound,
    Bmv,
    Harman,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiscBoxMode {
    ExactSmall,
    Search,
}

#[derive(Args)]
struct ReportArgs {
    /// Config file (flat `key = value`); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep clap's rendering but claim exit code 3 for usage errors
            // (2 is reserved for capacity); --help/--version still exit 0
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Error::Capacity(msg)) => {
            eprintln!("error: capacity exceeded: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let env_threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok());
    if let Command::Report(a) = cli.command {
        // precedence: --threads > KDISC_THREADS > config file > default
        return cmd_report(a, cli.threads.or(env_threads));
    }
    init_threads(cli.threads.or(env_threads).unwrap_or(0))?;
    match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Points(a) => cmd_points(a),
        Command::Disc(a) => cmd_disc(a),
        Command::Report(_) => unreachable!(),
    }
}

fn init_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(Error::from),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn cmd_eval(a: EvalArgs) -> Result<ExitCode> {
    let q = Query::new(a.m, a.n, a.c);
    let v = match a.method {
        EvalMethod::Direct => kloosterman::direct(q)?,
        EvalMethod::Fast => kloosterman::fast(q)?,
    };
    println!("{}", fmt17(v.value));
    Ok(ExitCode::SUCCESS)
}

fn cmd_scan(a: ScanArgs) -> Result<ExitCode> {
    match a.kind {
        ScanKind::Sum => {
            let (m, n) = match (a.m, a.n) {
                (Some(m), Some(n)) => (m, n),
                _ => {
                    return Err(Error::InvalidInput(
                        "scan sum needs --m and --n".into(),
                    ))
                }
            };
            let series = aggregate::complete_sum_series(m, n, a.x, a.budget)?;
            if let Some(path) = &a.out {
                let mut csv = String::from("c,partial\n");
                for (i, p) in series.partial.iter().enumerate() {
                    csv.push_str(&format!("{},{}\n", i + 1, fmt17(*p)));
                }
                fs::write(path, csv)?;
            }
            println!("{}", fmt17(series.total()));
        }
        ScanKind::Triple | ScanKind::Moment2 | ScanKind::Linnik => {
            let (kind, m_base, n_base) = match a.kind {
                ScanKind::Triple => {
                    let (m, n) = match (a.m_base, a.n_base) {
                        (Some(m), Some(n)) => (m, n),
                        _ => {
                            return Err(Error::InvalidInput(
                                "scan triple needs --M and --N".into(),
                            ))
                        }
                    };
                    (ReportKind::Triple, m, n)
                }
                ScanKind::Moment2 => {
                    let n = a.n_base.ok_or_else(|| {
                        Error::InvalidInput("scan moment2 needs --N".into())
                    })?;
                    (ReportKind::Moment2, 1, n)
                }
                ScanKind::Linnik => (ReportKind::Linnik, 1, 1),
                ScanKind::Sum => unreachable!(),
            };
            let rows = aggregate::bound_ratio_report(
                &[(m_base, n_base, a.x, kind)],
                a.budget,
            )?;
            let mut csv = Vec::new();
            aggregate::write_report_csv(&rows, &mut csv)?;
            let text = String::from_utf8(csv).expect("csv is utf-8");
            emit(a.out.as_ref(), &text)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_points(a: PointsArgs) -> Result<ExitCode> {
    let ps = pointset::generate_with_cap(a.x, a.cap)?;
    if let Some(path) = &a.csv {
        let mut buf = Vec::new();
        ps.write_csv(&mut buf)?;
        fs::write(path, buf)?;
    }
    if let Some(path) = &a.svg {
        let mut buf = Vec::new();
        ps.write_svg(&mut buf)?;
        fs::write(path, buf)?;
    }
    println!("{}", ps.count());
    Ok(ExitCode::SUCCESS)
}

fn parse_floats(spec: &str, want: usize, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidInput(format!("{what}: {e}")))?;
    if parts.len() != want {
        return Err(Error::InvalidInput(format!(
            "{what}: expected {want} comma-separated numbers"
        )));
    }
    Ok(parts)
}

fn parse_vertices(spec: &str) -> Result<ConvexPolygon> {
    let text = match spec.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)?,
        None => spec.to_string(),
    };
    let verts: Vec<[f64; 2]> = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("vertices: {e}")))?;
    ConvexPolygon::from_f64(&verts)
}

fn json_box(b: &TorusBox) -> serde_json::Value {
    json!({
        "xi": fmt17(b.xi),
        "zeta": fmt17(b.zeta),
        "alpha": fmt17(b.alpha),
        "beta": fmt17(b.beta),
    })
}

fn cmd_disc(a: DiscArgs) -> Result<ExitCode> {
    let ps = pointset::generate(a.x)?;
    let report = match a.kind {
        DiscKind::Box => {
            let mode = match a.mode {
                DiscBoxMode::ExactSmall => BoxMode::ExactSmall,
                DiscBoxMode::Search => BoxMode::Search,
            };
            let d = discrepancy::box_discrepancy_with_cap(&ps, mode, a.exact_small_cap)?;
            json!({
                "operation": "box_discrepancy",
                "params": { "X": a.x, "mode": match mode {
                    BoxMode::ExactSmall => "exact-small",
                    BoxMode::Search => "search",
                } },
                "value": fmt17(d.value),
                "witness": json_box(&d.witness),
                "certified": d.certified,
            })
        }
        DiscKind::Ball => {
            let d = discrepancy::ball_discrepancy_search(&ps, a.seeds)?;
            json!({
                "operation": "ball_discrepancy_search",
                "params": { "X": a.x, "seeds": a.seeds },
                "value": fmt17(d.value),
                "witness": {
                    "center": [fmt17(d.witness.center[0]), fmt17(d.witness.center[1])],
                    "radius": fmt17(d.witness.radius),
                },
                "certified": d.certified,
            })
        }
        DiscKind::Convex => {
            let spec = a.vertices.as_deref().ok_or_else(|| {
                Error::InvalidInput("disc convex needs --vertices".into())
            })?;
            let poly = parse_vertices(spec)?;
            let region = Region::Polygon(poly);
            let cover = discrepancy::dyadic_cover(&region, a.depth, GridOffsets::default())?;
            let (exact, covered) = discrepancy::convex_count(&ps, &region, &cover);
            let n = ps.count() as f64;
            json!({
                "operation": "convex_count",
                "params": { "X": a.x, "depth": a.depth },
                "area": fmt17(region.area()),
                "covered_area": fmt17(cover.covered_area()),
                "exact_count": exact,
                "covered_count": covered,
                "deviation": fmt17((exact as f64 / n - region.area()).abs()),
            })
        }
        DiscKind::Hyperbola => {
            let b = discrepancy::hyperbola_convex_lower_bound(&ps)?;
            json!({
                "operation": "hyperbola_convex_lower_bound",
                "params": { "X": a.x },
                "count": b.count,
                "area": fmt17(b.area),
                "measured": fmt17(b.measured),
                "floor": fmt17(b.floor),
            })
        }
        DiscKind::KsBound => {
            let m_max = a.m_max.ok_or_else(|| {
                Error::InvalidInput("disc ks-bound needs --M".into())
            })?;
            let v = discrepancy::koksma_szusz_bound(&ps, m_max)?;
            json!({
                "operation": "koksma_szusz_bound",
                "params": { "X": a.x, "M": m_max },
                "value": fmt17(v),
            })
        }
        DiscKind::Bmv => {
            let spec = a.query_box.as_deref().ok_or_else(|| {
                Error::InvalidInput("disc bmv needs --box xi,zeta,alpha,beta".into())
            })?;
            let f = parse_floats(spec, 4, "--box")?;
            let b = TorusBox::new(f[0], f[1], f[2], f[3])?;
            let (l1, l2) = match (a.l1, a.l2) {
                (Some(l1), Some(l2)) => (l1, l2),
                _ => return Err(Error::InvalidInput("disc bmv needs --l1 and --l2".into())),
            };
            let e = discrepancy::bmv_error(&ps, &b, l1, l2)?;
            json!({
                "operation": "bmv_error",
                "params": { "X": a.x, "box": json_box(&b), "l1": l1, "l2": l2 },
                "error_bound": fmt17(e.error_bound),
                "measured": fmt17(e.measured),
                "absolute_fallback": e.absolute_fallback,
            })
        }
        DiscKind::Harman => {
            let center = a.center.as_deref().ok_or_else(|| {
                Error::InvalidInput("disc harman needs --center cx,cy".into())
            })?;
            let f = parse_floats(center, 2, "--center")?;
            let radius = a.radius.ok_or_else(|| {
                Error::InvalidInput("disc harman needs --radius".into())
            })?;
            let l = a
                .l
                .ok_or_else(|| Error::InvalidInput("disc harman needs --l".into()))?;
            let d = Disc::new([f[0], f[1]], radius)?;
            let e = discrepancy::harman_error(&ps, &d, l)?;
            json!({
                "operation": "harman_error",
                "params": {
                    "X": a.x,
                    "center": [fmt17(f[0]), fmt17(f[1])],
                    "radius": fmt17(radius),
                    "l": fmt17(l),
                },
                "error_bound": fmt17(e.error_bound),
                "measured": fmt17(e.measured),
                "absolute_fallback": e.absolute_fallback,
            })
        }
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    emit(a.out.as_ref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(a: ReportArgs, threads: Option<usize>) -> Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    init_threads(cfg.threads)?;
    let run = kdisc::report::run_all(&cfg)?;
    println!("{}", run.to_json());
    Ok(if run.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
