use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sighyp::bessel::{h_general_domain, numerator_ball, theta};
use sighyp::config::load_mc_config;
use sighyp::development::polyline_development;
use sighyp::pde::{compare_mc_pde, solve_cascade, write_fields_csv, MaskedGrid};
use sighyp::signature::{polyline_signature, Polyline};
use sighyp::stopped_bm::{mc_domain_averaged_development, mc_estimate, with_threads, McConfig, Outputs};
use sighyp::verify::{self, McSuiteSettings, Report, Which};
use sighyp::Error;

#[derive(Parser)]
#[command(name = "sighyp", version, about = "Expected signatures and hyperbolic developments of stopped Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Clone)]
struct Global {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; results go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: $SIGHYP_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Truncated signature of a polyline (CSV x1,...,xd).
    Sig {
        #[arg(long)]
        path: PathBuf,
        #[arg(long, default_value_t = 3)]
        level: usize,
    },
    /// Development of a polyline onto the hyperboloid.
    Develop {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
    /// Monte-Carlo estimate of E[τ], the expected signature and the development.
    Mc,
    /// Grid solution of the expected-signature PDE cascade (2-D domains).
    Pde {
        /// Also compare with a Monte-Carlo estimate at the start point.
        #[arg(long)]
        compare: bool,
    },
    /// Reproduce the reference values and certify the sign claims.
    Verify {
        #[arg(value_enum)]
        which: VerifyWhich,
        #[command(flatten)]
        opts: VerifyOpts,
    },
    /// Θ(λ), 𝒩(λ) and h^(d+1)(0) over a λ range.
    Profile {
        #[arg(long, short)]
        d: usize,
        #[arg(long, default_value_t = 2.4)]
        from: f64,
        #[arg(long, default_value_t = 3.0)]
        to: f64,
        #[arg(long, default_value_t = 601)]
        samples: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyWhich {
    Table1,
    Table2,
    Table4,
    Lemma2d,
    Brackets,
    Blowup,
    ClosedForms,
    Mc,
    All,
}

#[derive(Args, Clone)]
struct VerifyOpts {
    /// Blow-up scan for one dimension with boundary data (p, q) on B(0, eps).
    #[arg(long, short)]
    d: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Paths for the Monte-Carlo cross-checks.
    #[arg(long, default_value_t = 100_000)]
    paths: u64,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    /// Include the Monte-Carlo cross-checks in `all`.
    #[arg(long)]
    with_mc: bool,
}

enum Failure {
    Usage(String),
    Check,
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::Shape(_) | Error::Range(_) | Error::Dimension(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn threads(g: &Global) -> Result<usize, Failure> {
    if let Some(t) = g.threads {
        return Ok(t);
    }
    match std::env::var("SIGHYP_THREADS") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("SIGHYP_THREADS: not a thread count: {s:?}"))),
        Err(_) => Ok(0),
    }
}

/// Writes `name` into the output directory, or to stdout without one.
struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn new(dir: Option<PathBuf>) -> Result<Self, Failure> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| Failure::Usage(format!("--out {}: {e}", d.display())))?;
        }
        Ok(Sink { dir })
    }

    fn emit(&self, name: &str, f: impl FnOnce(&mut dyn Write) -> sighyp::Result<()>) -> Result<(), Failure> {
        match &self.dir {
            Some(d) => {
                let mut w = BufWriter::new(File::create(d.join(name))?);
                f(&mut w)?;
                w.flush()?;
            }
            None => {
                let stdout = io::stdout();
                let mut w = stdout.lock();
                f(&mut w)?;
            }
        }
        Ok(())
    }

    /// The effective configuration, only written next to file outputs.
    fn record(&self, v: &serde_json::Value) -> Result<(), Failure> {
        if let Some(d) = &self.dir {
            let s = serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))?;
            fs::write(d.join("config.json"), s + "\n")?;
        }
        Ok(())
    }
}

fn read_polyline(p: &Path) -> Result<Polyline, Failure> {
    let f = File::open(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
    Ok(Polyline::read_csv(BufReader::new(f))?)
}

fn mc_config(g: &Global) -> Result<McConfig, Failure> {
    let path = g.config.as_ref().ok_or_else(|| Failure::Usage("--config FILE is required".into()))?;
    let mut cfg = load_mc_config(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn report_out(sink: &Sink, reports: &[Report]) -> Result<(), Failure> {
    let text = verify::reports_text(reports);
    if sink.dir.is_some() {
        sink.emit("verify.txt", |w| Ok(w.write_all(text.as_bytes())?))?;
        sink.emit("verify.csv", |w| verify::write_reports_csv(reports, w))?;
        for r in reports {
            println!("{:<60} {}", r.title, if r.passed() { "PASS" } else { "FAIL" });
        }
    } else {
        print!("{text}");
    }
    if reports.iter().all(Report::passed) {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = cli.global.clone();
    let nthreads = threads(&g)?;
    let sink = Sink::new(g.out.clone())?;
    match cli.command {
        Command::Sig { path, level } => {
            let p = read_polyline(&path)?;
            let s = polyline_signature(&p, level)?;
            sink.record(&json!({"command": "sig", "path": path, "level": level}))?;
            sink.emit("signature.csv", |w| s.write_csv(w))
        }
        Command::Develop { path, lambda } => {
            let p = read_polyline(&path)?;
            let h = polyline_development(&p, lambda)?;
            sink.record(&json!({"command": "develop", "path": path, "lambda": lambda}))?;
            sink.emit("development.csv", |w| {
                writeln!(w, "component,value")?;
                for (i, x) in h.iter().enumerate() {
                    writeln!(w, "{},{x:e}", i + 1)?;
                }
                Ok(())
            })
        }
        Command::Mc => {
            let cfg = mc_config(&g)?;
            let est = with_threads(nthreads, || -> sighyp::Result<_> {
                let out = Outputs {
                    tau: true,
                    signature: Some(cfg.level),
                    development: if cfg.rotations.is_none() { Some(cfg.lambda) } else { None },
                };
                let mut e = mc_estimate(&cfg.domain, &cfg, out)?;
                if let Some(k) = cfg.rotations {
                    let a = mc_domain_averaged_development(&cfg.domain, &cfg, k)?;
                    e.labels.extend(a.labels);
                    e.mean.extend(a.mean);
                    e.stderr.extend(a.stderr);
                }
                Ok(e)
            })??;
            sink.record(&serde_json::to_value(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?)?;
            sink.emit("mc.csv", |w| est.write_csv(w))
        }
        Command::Pde { compare } => {
            let cfg = mc_config(&g)?;
            let settings = cfg.pde.unwrap_or_default();
            let grid = MaskedGrid::new(&cfg.domain, settings.h)?;
            let fields = solve_cascade(&grid, cfg.level, &settings)?;
            sink.record(&serde_json::to_value(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?)?;
            sink.emit("pde.csv", |w| write_fields_csv(&grid, &fields, w))?;
            if compare {
                let rows = with_threads(nthreads, || compare_mc_pde(&cfg.domain, cfg.level, &cfg))??;
                sink.emit("compare.csv", |w| {
                    writeln!(w, "word,mc,stderr,pde,grid_err,score,flagged")?;
                    for r in &rows {
                        writeln!(w, "{},{:e},{:e},{:e},{:e},{:e},{}", r.word, r.mc, r.stderr, r.pde, r.grid_err, r.score, r.flagged)?;
                    }
                    Ok(())
                })?;
                if rows.iter().any(|r| r.flagged) {
                    return Err(Failure::Check);
                }
            }
            Ok(())
        }
        Command::Verify { which, opts } => {
            let seed = g.seed.unwrap_or(McSuiteSettings::default().seed);
            let suite = McSuiteSettings { paths: opts.paths, step: opts.step, seed, ..McSuiteSettings::default() };
            let mc = |reports: &mut Vec<Report>| -> Result<(), Failure> {
                reports.push(with_threads(nthreads, || verify::mc_crosscheck_suite(&suite))??);
                Ok(())
            };
            let mut reports = vec![];
            let name = match which {
                VerifyWhich::Table1 => "table1",
                VerifyWhich::Table2 => "table2",
                VerifyWhich::Table4 => "table4",
                VerifyWhich::Lemma2d => "lemma2d",
                VerifyWhich::Brackets => "brackets",
                VerifyWhich::Blowup => "blowup",
                VerifyWhich::ClosedForms => "closed-forms",
                VerifyWhich::Mc => "mc",
                VerifyWhich::All => "all",
            };
            match which {
                VerifyWhich::Mc => mc(&mut reports)?,
                VerifyWhich::Blowup if opts.d.is_some() => {
                    let d = opts.d.unwrap_or(2);
                    reports.push(verify::blowup_scan(d, opts.eps, opts.p, opts.q, &verify::DEFAULT_DELTAS)?);
                }
                _ => {
                    let w = match which {
                        VerifyWhich::Table1 => Which::Table1,
                        VerifyWhich::Table2 => Which::Table2,
                        VerifyWhich::Table4 => Which::Table4,
                        VerifyWhich::Lemma2d => Which::Lemma2d,
                        VerifyWhich::Brackets => Which::Brackets,
                        VerifyWhich::Blowup => Which::Blowup,
                        VerifyWhich::ClosedForms => Which::ClosedForms,
                        _ => Which::All,
                    };
                    reports = verify::run(w)?;
                    if matches!(which, VerifyWhich::All) && opts.with_mc {
                        mc(&mut reports)?;
                    }
                }
            }
            sink.record(&json!({
                "command": "verify", "which": name, "d": opts.d, "eps": opts.eps, "p": opts.p, "q": opts.q,
                "paths": opts.paths, "step": opts.step, "with_mc": opts.with_mc, "seed": seed,
            }))?;
            report_out(&sink, &reports)
        }
        Command::Profile { d, from, to, samples } => {
            if !(samples >= 2 && from < to) {
                return Err(Failure::Usage("profile: need --samples >= 2 and --from < --to".into()));
            }
            sink.record(&json!({"command": "profile", "d": d, "from": from, "to": to, "samples": samples}))?;
            let mut rows = vec![];
            for k in 0..samples {
                let l = from + (to - from) * k as f64 / (samples - 1) as f64;
                let th = theta(l, d)?;
                let n = numerator_ball(l, d)?;
                let h = h_general_domain(0.0, 1.0, l, d, 0.0, 1.0).map(|x| x.1).unwrap_or(f64::NAN);
                rows.push((l, th, n, h));
            }
            sink.emit("profile.csv", |w| {
                writeln!(w, "lambda,theta,numerator,hd1_zero")?;
                for (l, th, n, h) in &rows {
                    writeln!(w, "{l:e},{th:e},{n:e},{h:e}")?;
                }
                Ok(())
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
