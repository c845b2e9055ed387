//! One pass/fail line per acceptance criterion. Criteria listed in KNOWN_RED
//! are printed as failures but do not fail the run; see the README.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;

use sighyp::bessel::{bessel_j, remainder_bound};
use sighyp::development::{
    apply_morphism, h_basis_all, minkowski_form, polyline_development, polyline_development_matrix,
};
use sighyp::rng::GaussianStream;
use sighyp::signature::{polyline_signature, Polyline};
use sighyp::verify::{self, McSuiteSettings, Report};

/// Criteria that cannot hold as stated; they stay red.
const KNOWN_RED: &[usize] = &[4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn from_reports(reports: &[Report]) -> Outcome {
    let fails: Vec<String> = reports
        .iter()
        .flat_map(|r| r.failures().map(|c| format!("{}: {}", r.title, c.item)))
        .collect();
    Outcome {
        pass: fails.is_empty(),
        detail: if fails.is_empty() {
            format!("{} checks", reports.iter().map(|r| r.checks.len()).sum::<usize>())
        } else {
            fails.join("; ")
        },
    }
}

fn c1() -> Outcome {
    let t0 = Instant::now();
    let t = verify::reproduce_table1().unwrap();
    let el = t0.elapsed();
    let mut o = from_reports(&[t.report(), verify::certify_table1().unwrap()]);
    o.pass &= el < Duration::from_secs(1);
    o.detail = format!("{}, reproduction in {:.1} ms", o.detail, el.as_secs_f64() * 1e3);
    o
}

fn c2() -> Outcome {
    from_reports(&[verify::reproduce_table2().unwrap().report(), verify::certify_table2().unwrap()])
}

fn c3() -> Outcome {
    from_reports(&[verify::reproduce_table4().unwrap().report(), verify::certify_table4().unwrap()])
}

fn c4() -> Outcome {
    let r = verify::verify_2d_lemma().unwrap();
    let reported = r.checks.iter().any(|c| c.item.contains("tail constant used"));
    let mut o = from_reports(&[r]);
    o.pass &= reported;
    o
}

fn c5() -> Outcome {
    from_reports(&[verify::verify_brackets().unwrap()])
}

fn c6() -> Outcome {
    from_reports(&[verify::verify_blowup().unwrap()])
}

fn c7() -> Outcome {
    from_reports(&[verify::verify_closed_forms().unwrap()])
}

fn random_polyline(g: &mut GaussianStream, d: usize, segs: usize, scale: f64) -> Polyline {
    let mut v = vec![vec![0.0; d]];
    for _ in 0..segs {
        let last = v.last().unwrap().clone();
        v.push(last.iter().map(|x| x + scale * g.gaussian()).collect());
    }
    Polyline::new(v).unwrap()
}

fn c8() -> Outcome {
    let mut g = GaussianStream::new(8, 0);
    let mut fails = vec![];
    let n = 4;
    for case in 0..200 {
        let d = 2 + case % 3;
        let p = random_polyline(&mut g, d, 1 + case % 4, 0.5);
        let q = random_polyline(&mut g, d, 1 + (case / 4) % 4, 0.5);
        let sp = polyline_signature(&p, n).unwrap();
        let sq = polyline_signature(&q, n).unwrap();
        // Chen
        let chen = polyline_signature(&p.concat(&q).unwrap(), n).unwrap().max_abs_diff(&sp.tensor_mul(&sq).unwrap()).unwrap();
        if chen > 1e-10 {
            fails.push(format!("chen {chen:e}"));
        }
        // scaling
        let sc = polyline_signature(&p.scaled(1.7), n).unwrap().max_abs_diff(&sp.dilation(1.7)).unwrap();
        if sc > 1e-10 {
            fails.push(format!("scaling {sc:e}"));
        }
        // reversal
        let one = sp.tensor_mul(&polyline_signature(&p.reverse(), n).unwrap()).unwrap();
        let rev = one.max_abs_diff(&sighyp::tensor::TruncatedTensor::unit(d, n).unwrap()).unwrap();
        if rev > 1e-10 {
            fails.push(format!("reversal {rev:e}"));
        }
        // hyperboloid and h^{d+1} ≥ max(1, |h1|)
        let lam = 0.3 * (case % 10) as f64;
        let h = polyline_development(&p, lam).unwrap();
        if (minkowski_form(&h) + 1.0).abs() > 1e-9 * h[d] * h[d] {
            fails.push("hyperboloid".into());
        }
        if h[d] < 1.0 || h[d] < h[0].abs() {
            fails.push("h^{d+1} bound".into());
        }
        // morphism, on short paths where truncation at 16 is exact to 1e-10
        if case % 10 == 0 && d == 2 {
            let a = random_polyline(&mut g, 2, 2, 0.2);
            let m = apply_morphism(&polyline_signature(&a, 16).unwrap(), 1.0, &h_basis_all(2)).unwrap();
            let e = (m - polyline_development_matrix(&a, 1.0).unwrap()).amax();
            if e > 1e-10 {
                fails.push(format!("morphism {e:e}"));
            }
        }
    }
    // remainder soundness
    let mut cases = 0;
    let mut u = GaussianStream::new(8, 1);
    while cases < 2000 {
        let z = C64::new(10.0 * u.uniform() - 5.0, 10.0 * u.uniform() - 5.0);
        if z.norm() > 5.0 {
            continue;
        }
        let nu = (8.0 * u.uniform()).floor() / 2.0;
        let n = 4 + (7.0 * u.uniform()) as usize;
        let diff = (bessel_j(nu, z, n).unwrap() - bessel_j(nu, z, 60).unwrap()).norm();
        let e = remainder_bound(nu, z, n).unwrap();
        if diff > e * (1.0 + 1e-12) + 1e-15 {
            fails.push(format!("remainder ν={nu} z={z} n={n}"));
        }
        cases += 1;
    }
    Outcome {
        pass: fails.is_empty(),
        detail: if fails.is_empty() { format!("200 path cases, {cases} remainder cases") } else { fails.join("; ") },
    }
}

fn c9() -> Outcome {
    let t0 = Instant::now();
    let r = verify::mc_crosscheck_suite(&McSuiteSettings::default()).unwrap();
    let el = t0.elapsed();
    let mut o = from_reports(&[r]);
    o.pass &= el <= Duration::from_secs(600);
    o.detail = format!("{}, {:.0} s", o.detail, el.as_secs_f64());
    o
}

fn run_cli(args: &[&str], env_threads: Option<&str>) -> i32 {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sighyp"));
    c.args(args);
    match env_threads {
        Some(t) => c.env("SIGHYP_THREADS", t),
        None => c.env_remove("SIGHYP_THREADS"),
    };
    c.output().expect("run sighyp").status.code().unwrap_or(-1)
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> bool {
    names.iter().all(|n| std::fs::read(a.join(n)).ok() == std::fs::read(b.join(n)).ok() && a.join(n).exists())
}

fn c10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("mc.json");
    std::fs::write(
        &cfg,
        r#"{"seed":7,"paths":3000,"step":1e-3,"level":3,"lambda":0.8,"start":[0.2,-0.1],
            "domain":{"kind":"ellipsoid","semi_axes":[1.0,0.6]}}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = |n: &str| root.join(n).to_str().unwrap().to_string();
    let mut ok = true;
    let mut codes = vec![];
    for (name, threads, env) in [("v1", Some("1"), None), ("v2", None, Some("2")), ("v3", Some("4"), None)] {
        let mut args = vec!["verify", "all", "--out"];
        let o = out(name);
        args.push(&o);
        if let Some(t) = threads {
            args.extend(["--threads", t]);
        }
        codes.push(run_cli(&args, env));
    }
    for (name, threads, env) in [("m1", Some("1"), None), ("m2", None, Some("3")), ("m3", Some("2"), None)] {
        let o = out(name);
        let mut args = vec!["mc", "--config", cfg, "--out", &o];
        if let Some(t) = threads {
            args.extend(["--threads", t]);
        }
        codes.push(run_cli(&args, env));
    }
    ok &= codes[3..].iter().all(|&c| c == 0) && codes[..3].iter().all(|&c| c == codes[0]);
    ok &= same_files(&root.join("v1"), &root.join("v2"), &["verify.csv", "verify.txt"]);
    ok &= same_files(&root.join("v1"), &root.join("v3"), &["verify.csv", "verify.txt"]);
    ok &= same_files(&root.join("m1"), &root.join("m2"), &["mc.csv", "config.json"]);
    ok &= same_files(&root.join("m1"), &root.join("m3"), &["mc.csv", "config.json"]);
    Outcome { pass: ok, detail: format!("exit codes {codes:?}") }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Theta table reproduction and sign change", c1),
        ("ball numerator table and certified sup < 0", c2),
        ("general-domain numerator table and |N1| > |N2|", c3),
        ("two-dimensional lemma constants", c4),
        ("certified root brackets of Theta, d = 2..8", c5),
        ("blow-up of h^(d+1)(0) at the root, d = 2..8", c6),
        ("closed-form ODE residuals and boundary values", c7),
        ("property suites", c8),
        ("Monte-Carlo cross-checks at 1e5 paths", c9),
        ("determinism across runs and thread counts", c10),
    ];
    let mut unexpected = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let k = i + 1;
        let o = f();
        let tag = match (o.pass, KNOWN_RED.contains(&k)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("criterion {k:>2}: {tag:<12} {name} — {}", o.detail);
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
