//! `peacock` — command-line front end: shadows, shadow-martingale builds,
//! sampling, verification, MOT oracles, discretization and parametrization
//! checks, with JSON/CSV file interfaces.

use clap::{Parser, Subcommand, ValueEnum};
use peacock_core::martingale::{
    self, aux_cost, build_with_table, check_slice_ordering, discretize, sample_range,
    verify_marginals, verify_martingale, DistributionSpec, MartingaleMixture,
};
use peacock_core::measure::Measure;
use peacock_core::mot::{mot_lp, mot_lp_multistep, MsmCost};
use peacock_core::parametrization::{check_cs_convex, Kind, Parametrization};
use peacock_core::shadow::{obstructed_shadow, simple_shadow, Peacock, ShadowTable};
use peacock_core::{dilation, tol, Error};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "peacock", version, about = "shadows and shadow martingales of atomic measures")]
struct Cli {
    /// Absolute comparison tolerance (overrides the SHADOW_TOL env var).
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    /// Output format for measures and tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Worker threads for sampling.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Shadow of a measure through a peacock's marginals.
    Shadow {
        /// Measure JSON for ν.
        #[arg(long)]
        nu: PathBuf,
        /// Peacock JSON providing the obstruction chain.
        #[arg(long)]
        peacock: PathBuf,
        /// Simple shadow in the final marginal only.
        #[arg(long, conflicts_with = "obstructed")]
        simple: bool,
        /// Obstructed shadow through all marginals (default).
        #[arg(long)]
        obstructed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the shadow-martingale mixture for a peacock + parametrization.
    Build {
        #[arg(long)]
        peacock: PathBuf,
        #[arg(long)]
        param: PathBuf,
        /// Explicit α grid, comma separated (must start at 0 and end at 1).
        #[arg(long, conflicts_with = "subdivide")]
        alphas: Option<String>,
        /// Subdivisions of the default breakpoint grid.
        #[arg(long, default_value_t = 1)]
        subdivide: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample trajectories from a built mixture into CSV.
    Sample {
        #[arg(long)]
        mixture: PathBuf,
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample even if some links failed the binomial audit.
        #[arg(long)]
        force: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-audit a built mixture against its provenance.
    Verify {
        #[arg(long)]
        mixture: PathBuf,
    },
    /// Martingale optimal transport oracle.
    Mot {
        #[arg(long)]
        mu0: Option<PathBuf>,
        #[arg(long)]
        mu1: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = CostArg::Cubic)]
        cost: CostArg,
        /// Peacock JSON for the multi-step path LP.
        #[arg(long)]
        multistep: Option<PathBuf>,
        /// Target time index for the multi-step objective (default: last).
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantile discretization of a distribution spec.
    Discretize {
        /// Distribution spec JSON ({"family": "uniform", ...}).
        #[arg(long)]
        spec: PathBuf,
        #[arg(short, long)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite NSI check of a peacock.
    Nsi {
        #[arg(long)]
        peacock: PathBuf,
    },
    /// Dump marginals as plot CSV rows (t, x, weight).
    Marginals {
        /// Peacock JSON (explicit or family form).
        #[arg(long, conflicts_with = "mixture")]
        peacock: Option<PathBuf>,
        /// Built mixture JSON: slice marginals, one block per slice.
        #[arg(long)]
        mixture: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit or check a parametrization of an initial marginal.
    Param {
        #[arg(long)]
        mu0: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Evaluate ν^α at this level and write it to --out.
        #[arg(long)]
        alpha: Option<f64>,
        /// Check ≤_{c,s}-convexity on a uniform grid of this many points.
        #[arg(long)]
        check_cs_convex: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum CostArg {
    Cubic,
    TanhSqrt,
    ExpDiff,
}

impl From<CostArg> for MsmCost {
    fn from(c: CostArg) -> Self {
        match c {
            CostArg::Cubic => MsmCost::Cubic,
            CostArg::TanhSqrt => MsmCost::TanhSqrt,
            CostArg::ExpDiff => MsmCost::ExpDiff,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum KindArg {
    LeftCurtain,
    Sunset,
    MiddleCurtain,
    RightCurtain,
}

/// Failure with its process exit code: 2 order violation, 3 parse error,
/// 4 verification failure, 5 LP infeasible/unbounded, 1 anything else.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(msg: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: msg.into(),
        }
    }

    fn verify(msg: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::OrderViolation { .. }
            | Error::NotASubmeasure { .. }
            | Error::ResidualNotPeacock(_)
            | Error::NegativeSlice { .. } => 2,
            Error::Infeasible | Error::Unbounded | Error::IterationLimit => 5,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("SHADOW_TOL") {
        match v.parse::<f64>() {
            Ok(t) if t > 0.0 => tol::set_tolerance(t),
            _ => {
                eprintln!("error: SHADOW_TOL must be a positive number, got {v:?}");
                return ExitCode::from(3);
            }
        }
    }
    if let Some(t) = cli.tolerance {
        tol::set_tolerance(t);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::parse(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Peacock files are either explicit marginals or a continuous family
/// expanded through the quantile discretizer at load time.
#[derive(Deserialize)]
#[serde(untagged)]
enum PeacockFile {
    Explicit(Peacock),
    Family {
        family: String,
        times: Vec<f64>,
        m: usize,
    },
}

fn load_peacock(path: &Path) -> Result<Peacock, Failure> {
    match read_json::<PeacockFile>(path)? {
        PeacockFile::Explicit(p) => Ok(p),
        PeacockFile::Family { family, times, m } => {
            let spec_at = |t: f64| -> Result<DistributionSpec, Failure> {
                match family.as_str() {
                    "uniform_growing" => Ok(DistributionSpec::Uniform {
                        lo: -1.0 - t,
                        hi: 1.0 + t,
                    }),
                    "brownian" => Ok(DistributionSpec::Gaussian {
                        mean: 0.0,
                        var: 1.0 + t,
                    }),
                    other => Err(Failure::parse(format!("unknown peacock family {other:?}"))),
                }
            };
            let marginals = times
                .iter()
                .map(|&t| Ok(discretize(&spec_at(t)?, m)?))
                .collect::<Result<Vec<_>, Failure>>()?;
            Ok(Peacock::new(times, marginals)?)
        }
    }
}

fn measure_text(m: &Measure, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(m).expect("measure serializes"),
        Format::Csv => {
            let mut out = String::from("x,w\n");
            for &(x, w) in m.atoms() {
                let _ = writeln!(out, "{x},{w}");
            }
            out
        }
    }
}

fn summarize(m: &Measure) -> String {
    format!(
        "mass {:.12}, barycenter {}, {} atoms on [{}, {}]",
        m.mass(),
        m.barycenter()
            .map_or("n/a".to_string(), |b| format!("{b:.12}")),
        m.atoms().len(),
        m.atoms().first().map_or(f64::NAN, |a| a.0),
        m.atoms().last().map_or(f64::NAN, |a| a.0),
    )
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Shadow {
            nu,
            peacock,
            simple,
            out,
            ..
        } => {
            let nu: Measure = read_json(nu)?;
            let p = load_peacock(peacock)?;
            let result = if *simple {
                simple_shadow(&nu, p.marginals().last().expect("nonempty peacock"))?
            } else {
                obstructed_shadow(&nu, p.marginals())?
            };
            eprintln!("shadow: {}", summarize(&result));
            write_out(out.as_ref(), &measure_text(&result, cli.format))
        }
        Command::Build {
            peacock,
            param,
            alphas,
            subdivide,
            out,
        } => {
            let p = load_peacock(peacock)?;
            let param: Parametrization = read_json(param)?;
            let grid = match alphas {
                Some(spec) => parse_grid(spec)?,
                None => martingale::default_alpha_grid(&param, *subdivide),
            };
            let (mixture, _) = build_with_table(&p, &param, &grid)?;
            let bad = mixture.non_binomial_links().len();
            let total = mixture.slices.len() * mixture.num_links();
            eprintln!(
                "built {} slices x {} links, binomial audit: {}/{} ok",
                mixture.slices.len(),
                mixture.num_links(),
                total - bad,
                total
            );
            write_out(
                Some(out),
                &serde_json::to_string_pretty(&mixture).expect("mixture serializes"),
            )
        }
        Command::Sample {
            mixture,
            n,
            seed,
            force,
            out,
        } => {
            let mixture: MartingaleMixture = read_json(mixture)?;
            let paths = sample_parallel(&mixture, *n, *seed, *force, cli.threads)?;
            let mut csv = String::from("path_id,slice,t,x\n");
            for (id, path) in paths.iter().enumerate() {
                for (t, x) in mixture.times.iter().zip(&path.values) {
                    let _ = writeln!(csv, "{id},{},{t},{x}", path.slice);
                }
            }
            write_out(Some(out), &csv)
        }
        Command::Verify { mixture } => verify_command(mixture),
        Command::Mot {
            mu0,
            mu1,
            cost,
            multistep,
            target,
            out,
        } => {
            let cost: MsmCost = (*cost).into();
            if let Some(pfile) = multistep {
                let p = load_peacock(pfile)?;
                let target = target.unwrap_or(p.len() - 1);
                let (value, _law) = mot_lp_multistep(&p, &cost, target)?;
                println!("optimal value (X0, X_{target}): {value:.12}");
                Ok(())
            } else {
                let (Some(mu0), Some(mu1)) = (mu0, mu1) else {
                    return Err(Failure::parse("--mu0 and --mu1 are required without --multistep"));
                };
                let mu0: Measure = read_json(mu0)?;
                let mu1: Measure = read_json(mu1)?;
                let (value, coupling) = mot_lp(&mu0, &mu1, &cost)?;
                println!("optimal value: {value:.12}");
                let text = match cli.format {
                    Format::Json => {
                        serde_json::to_string_pretty(&coupling).expect("coupling serializes")
                    }
                    Format::Csv => {
                        let mut s = String::from("x,y,w\n");
                        for (i, &x) in coupling.xs.iter().enumerate() {
                            for (j, &y) in coupling.ys.iter().enumerate() {
                                if coupling.w[i][j] > 0.0 {
                                    let _ = writeln!(s, "{x},{y},{}", coupling.w[i][j]);
                                }
                            }
                        }
                        s
                    }
                };
                write_out(out.as_ref(), &text)
            }
        }
        Command::Discretize { spec, m, out } => {
            let spec: DistributionSpec = read_json(spec)?;
            let measure = discretize(&spec, *m)?;
            eprintln!("discretized: {}", summarize(&measure));
            write_out(out.as_ref(), &measure_text(&measure, cli.format))
        }
        Command::Marginals {
            peacock,
            mixture,
            out,
        } => {
            let mut csv = String::new();
            match (peacock, mixture) {
                (Some(pfile), None) => {
                    csv.push_str("t,x,weight\n");
                    let p = load_peacock(pfile)?;
                    for (t, marginal) in p.times().iter().zip(p.marginals()) {
                        for &(x, w) in marginal.atoms() {
                            let _ = writeln!(csv, "{t},{x},{w}");
                        }
                    }
                }
                (None, Some(mfile)) => {
                    csv.push_str("slice,t,x,weight\n");
                    let mx: MartingaleMixture = read_json(mfile)?;
                    for (k, slice) in mx.slices.iter().enumerate() {
                        for (t, marginal) in mx.times.iter().zip(&slice.marginals) {
                            for &(x, w) in marginal.atoms() {
                                let _ = writeln!(csv, "{k},{t},{x},{w}");
                            }
                        }
                    }
                }
                _ => return Err(Failure::parse("exactly one of --peacock or --mixture")),
            }
            write_out(out.as_ref(), &csv)
        }
        Command::Nsi { peacock } => {
            let p = load_peacock(peacock)?;
            let (ok, report) = dilation::finite_nsi(&p)?;
            println!("NSI: {ok}");
            for (t, d) in report.times.iter().zip(&report.deviations) {
                println!("  t={t}: deviation {d:.3e}");
            }
            if !ok {
                println!(
                    "  failing times: {:?}",
                    report.failing_times()
                );
            }
            Ok(())
        }
        Command::Param {
            mu0,
            kind,
            alpha,
            check_cs_convex: check,
            out,
        } => {
            let mu0: Measure = read_json(mu0)?;
            let param = Parametrization::new(
                mu0,
                match kind {
                    KindArg::LeftCurtain => Kind::LeftCurtain,
                    KindArg::Sunset => Kind::Sunset,
                    KindArg::MiddleCurtain => Kind::MiddleCurtain,
                    KindArg::RightCurtain => Kind::RightCurtain,
                },
            )?;
            if let Some(points) = check {
                let n = (*points).max(3);
                let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
                let (ok, witness) = check_cs_convex(&param, &grid)?;
                println!("cs-convex: {ok}");
                if let Some(w) = witness {
                    println!(
                        "  witness triple: ({}, {}, {})",
                        w.triple.0, w.triple.1, w.triple.2
                    );
                }
            }
            if let Some(a) = alpha {
                let nu = param.at_alpha(*a)?;
                eprintln!("nu^{a}: {}", summarize(&nu));
                return write_out(out.as_ref(), &measure_text(&nu, cli.format));
            }
            if check.is_none() || out.is_some() {
                return write_out(
                    out.as_ref(),
                    &serde_json::to_string_pretty(&param).expect("parametrization serializes"),
                );
            }
            Ok(())
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let grid: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::parse(format!("bad alpha grid {spec:?}: {e}")))?;
    ShadowTable::check_grid(&grid)?;
    Ok(grid)
}

fn sample_parallel(
    mixture: &MartingaleMixture,
    n: usize,
    seed: u64,
    force: bool,
    threads: usize,
) -> Result<Vec<peacock_core::martingale::Trajectory>, Failure> {
    let threads = threads.max(1).min(n.max(1));
    if threads == 1 {
        return Ok(sample_range(mixture, 0, n, seed, force)?);
    }
    let chunk = n.div_ceil(threads);
    let mut results: Vec<Result<Vec<_>, Error>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let lo = t * chunk;
                let hi = ((t + 1) * chunk).min(n);
                scope.spawn(move || sample_range(mixture, lo, hi, seed, force))
            })
            .collect();
        for h in handles {
            results.push(h.join().expect("sampler thread panicked"));
        }
    });
    let mut out = Vec::with_capacity(n);
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn verify_command(path: &Path) -> Result<(), Failure> {
    let mixture: MartingaleMixture = read_json(path)?;

    // structural invariants first: contiguous slices covering [0,1]
    let mut cursor = 0.0;
    for (k, s) in mixture.slices.iter().enumerate() {
        if (s.a_lo - cursor).abs() > 1e-12 || s.a_hi <= s.a_lo {
            return Err(Failure::verify(format!(
                "invariant violated: slice {k} bounds [{}, {}] do not tile [0,1]",
                s.a_lo, s.a_hi
            )));
        }
        cursor = s.a_hi;
    }
    if (cursor - 1.0).abs() > 1e-12 {
        return Err(Failure::verify(format!(
            "invariant violated: slices end at {cursor}, expected 1"
        )));
    }

    let prov = &mixture.provenance;
    let table = ShadowTable::build(&prov.peacock, &prov.parametrization, &prov.alphas)?;

    let dev = verify_marginals(&mixture, &table)
        .map_err(|e| Failure::verify(format!("invariant violated: marginal audit: {e}")))?;
    println!("marginal deviation: {dev:.3e}");

    let audit = verify_martingale(&mixture)
        .map_err(|e| Failure::verify(format!("invariant violated: martingale audit: {e}")))?;
    println!(
        "kernel barycenter error: {:.3e}",
        audit.max_kernel_barycenter_error
    );
    let total = mixture.slices.len() * mixture.num_links();
    println!(
        "binomial links: {}/{} ok (max link W1 {:.3e})",
        total - audit.non_binomial.len(),
        total,
        audit.max_link_w1
    );
    for &(slice, link) in &audit.non_binomial {
        println!("  non-binomial: slice {slice}, link {link}");
    }

    // stored binomial flags must match a fresh push-forward audit
    for (k, s) in mixture.slices.iter().enumerate() {
        for link in 0..s.kernels.len() {
            let kernel = peacock_core::dilation::DilationKernel::new(s.kernels[link].clone())?;
            let image = kernel.push_forward(&s.marginals[link])?;
            let ok = image.approx_eq(&s.marginals[link + 1]);
            if ok != s.binomial_ok[link] {
                return Err(Failure::verify(format!(
                    "invariant violated: stored binomial flag at slice {k}, link {link} \
                     disagrees with the push-forward audit"
                )));
            }
        }
    }

    let (nsi_ok, nsi_report) = dilation::finite_nsi(&prov.peacock)?;
    println!("peacock NSI: {nsi_ok}");
    if !nsi_ok {
        println!("  failing times: {:?}", nsi_report.failing_times());
    }

    let (ordering_ok, witness) = check_slice_ordering(&mixture)?;
    println!("slice ordering: {}", if ordering_ok { "ok" } else { "violated" });
    if let Some(w) = witness {
        println!(
            "  witness: slices {}..{} at time index {}",
            w.lower_slice,
            w.lower_slice + 1,
            w.time_index
        );
    }

    let cost_total: f64 = mixture
        .slices
        .iter()
        .map(|s| s.width() * aux_cost(s.a_lo, s.marginals.last().expect("nonempty")))
        .sum();
    println!("terminal auxiliary cost: {cost_total:.9}");

    if dev > tol::tolerance() {
        return Err(Failure::verify(format!(
            "invariant violated: marginal deviation {dev:.3e} exceeds tolerance"
        )));
    }
    if audit.max_kernel_barycenter_error > tol::tolerance() {
        return Err(Failure::verify(format!(
            "invariant violated: kernel barycenter error {:.3e} exceeds tolerance",
            audit.max_kernel_barycenter_error
        )));
    }
    Ok(())
}
