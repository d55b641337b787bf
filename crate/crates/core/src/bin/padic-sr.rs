//! Command-line front end: analyze, certify, validate, and batch-run covers.
//!
//! Exit codes: 0 on success (everything certified, no violations), 1 when a
//! certificate, validator or conductor bound fails or the input is rejected
//! mathematically, 2 on usage and input errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;

use padic_sr::config::RunConfig;
use padic_sr::cyclic::{
    analyze, branch_signature, certify_one_disk, certify_tail, conductor_bound, stab_field_tower, CoverError, CoverSpec,
};
use padic_sr::graph::{
    check_local_vanishing, check_vanishing_cycles, export_graph, radius_checks, validate, DecoratedGraph, ExportFormat,
};
use padic_sr::metacyclic::{moduli_and_tails_note, signature_solver, MetacyclicSpec};
use padic_sr::ramification::{evaluate_tower, FieldTower};
use padic_sr::rat::fmt_q;
use padic_sr::series::VerdictKind;

#[derive(Parser, Debug)]
#[command(name = "padic-sr", version)]
#[command(about = "Stable reduction of three-point Z/p^n and Z/p^n ⋊ Z/m covers, with exact certificates")]
struct Cli {
    /// Series truncation (overrides PADIC_SR_TRUNCATION)
    #[arg(long, global = true)]
    truncation: Option<usize>,

    /// Extra digits for the Hensel power test (overrides PADIC_SR_HENSEL_DEPTH)
    #[arg(long, global = true)]
    hensel_depth: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CoverArgs {
    /// The prime p
    #[arg(long)]
    p: u64,
    /// Exponent n of the group order p^n
    #[arg(long)]
    n: u32,
    /// Exponent of x in y^(p^n) = x^a (x-1)^b
    #[arg(long, allow_hyphen_values = true)]
    a: BigInt,
    /// Exponent of (x-1)
    #[arg(long, allow_hyphen_values = true)]
    b: BigInt,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stable reduction, certificates, field tower and conductor of one cover
    Analyze {
        #[command(flatten)]
        cover: CoverArgs,
        /// Write the report here instead of stdout
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also write the stable graph as DOT
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Reduction of the cover on its new-tail disk (and on the disk at x = 1 when s < n)
    Certify {
        #[command(flatten)]
        cover: CoverArgs,
    },
    /// Run every validator on a graph JSON file
    ValidateGraph {
        /// Graph JSON, as in the `graph` field of an analyze report
        graph: PathBuf,
        /// Also write the graph as DOT
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Field tower and conductor, for a cover or for a tower JSON file
    Conductor {
        /// Field tower JSON to evaluate instead of a cover
        #[arg(long, conflicts_with_all = ["p", "n", "a", "b"])]
        tower: Option<PathBuf>,
        /// The prime p
        #[arg(long, required_unless_present = "tower")]
        p: Option<u64>,
        /// Exponent n of the group order p^n
        #[arg(long, required_unless_present = "tower")]
        n: Option<u32>,
        /// Exponent of x
        #[arg(long, required_unless_present = "tower", allow_hyphen_values = true)]
        a: Option<BigInt>,
        /// Exponent of (x-1)
        #[arg(long, required_unless_present = "tower", allow_hyphen_values = true)]
        b: Option<BigInt>,
    },
    /// Deformation-datum signature of a Z/p^n ⋊ Z/m cover
    Signature {
        /// The prime p
        #[arg(long)]
        p: u64,
        /// Exponent n of the p-Sylow subgroup Z/p^n
        #[arg(long)]
        n: u32,
        /// Order of the prime-to-p quotient
        #[arg(long)]
        m: u64,
        /// Exponents of the Z/m-cover at 0, 1 and ∞ (summing to 0 mod m)
        #[arg(long, allow_hyphen_values = true)]
        a1: i64,
        #[arg(long, allow_hyphen_values = true)]
        a2: i64,
        #[arg(long, allow_hyphen_values = true)]
        a3: i64,
    },
    /// Analyze a grid of covers for one prime and print a summary table
    Batch {
        /// The prime p
        #[arg(long)]
        p: u64,
        /// Largest n in the grid
        #[arg(long, default_value_t = 3)]
        n_max: u32,
        /// Covers per (n, s) cell
        #[arg(long, default_value_t = 5)]
        per_cell: usize,
        /// Worker threads (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
        /// Write the per-cover summaries as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Rejected(String),
}

impl From<CoverError> for Failure {
    fn from(e: CoverError) -> Self {
        Failure::Rejected(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Rejected(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    };
    ExitCode::from(code)
}

fn config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::from_env().map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(t) = cli.truncation {
        if t == 0 {
            return Err(Failure::Usage("--truncation must be positive".into()));
        }
        cfg.truncation = Some(t);
    }
    if let Some(h) = cli.hensel_depth {
        cfg.hensel_depth = h;
    }
    Ok(cfg)
}

fn spec_of(c: &CoverArgs) -> Result<CoverSpec, Failure> {
    Ok(branch_signature(c.p, c.n, &c.a, &c.b)?)
}

fn to_json<T: Serialize>(x: &T) -> String {
    serde_json::to_string_pretty(x).expect("reports serialize")
}

/// Print to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn run(cli: Cli) -> Outcome {
    let cfg = config(&cli)?;
    match cli.command {
        Command::Analyze { cover, json, dot } => {
            let spec = spec_of(&cover)?;
            let report = analyze(&spec, &cfg)?;
            let text = to_json(&report);
            match json {
                Some(path) => write_file(&path, &text)?,
                None => emit(&text),
            }
            if let Some(path) = dot {
                write_file(&path, &export_graph(&report.graph, ExportFormat::Dot))?;
            }
            if !report.all_certified {
                eprintln!("not all certifications passed");
            }
            Ok(report.all_certified)
        }
        Command::Certify { cover } => {
            let spec = spec_of(&cover)?;
            let tail = certify_tail(&spec, &cfg)?;
            let one = if spec.s < spec.n { Some(certify_one_disk(&spec, &cfg)?) } else { None };
            let ok = [Some(&tail), one.as_ref()]
                .into_iter()
                .flatten()
                .all(|v| !matches!(v.kind, VerdictKind::NotCertified { .. }));
            emit(&to_json(&serde_json::json!({ "spec": spec, "new_tail": tail, "branch_point_one": one })));
            Ok(ok)
        }
        Command::ValidateGraph { graph, dot } => {
            let text = read_file(&graph)?;
            let g: DecoratedGraph = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{} is not a graph: {e}", graph.display())))?;
            let mut violations = validate(&g);
            violations.extend(radius_checks(&g));
            let mut errors = Vec::new();
            let vc = check_vanishing_cycles(&g).map(|r| fmt_q(&r)).map_err(|e| errors.push(e.to_string())).ok();
            let local = check_local_vanishing(&g)
                .map(|v| v.into_iter().map(|(id, r)| (id, fmt_q(&r))).collect::<Vec<_>>())
                .map_err(|e| errors.push(e.to_string()))
                .ok();
            let residuals_zero =
                vc.as_deref() == Some("0") && local.as_ref().is_some_and(|l| l.iter().all(|(_, r)| r == "0"));
            emit(&to_json(&serde_json::json!({
                "violations": violations,
                "vanishing_cycles_residual": vc,
                "local_vanishing_residuals": local,
                "errors": errors,
            })));
            for v in &violations {
                eprintln!("{}: {}", v.code, v.detail);
            }
            if let Some(path) = dot {
                write_file(&path, &export_graph(&g, ExportFormat::Dot))?;
            }
            Ok(violations.is_empty() && residuals_zero)
        }
        Command::Conductor { tower, p, n, a, b } => match tower {
            Some(path) => {
                let text = read_file(&path)?;
                let ft: FieldTower = serde_json::from_str(&text)
                    .map_err(|e| Failure::Usage(format!("{} is not a field tower: {e}", path.display())))?;
                let rep = evaluate_tower(&ft).map_err(|e| Failure::Rejected(e.to_string()))?;
                emit(&to_json(&rep));
                Ok(rep.vanishes_at_n)
            }
            None => {
                let cover = CoverArgs {
                    p: p.expect("required"),
                    n: n.expect("required"),
                    a: a.expect("required"),
                    b: b.expect("required"),
                };
                let spec = spec_of(&cover)?;
                let ft = stab_field_tower(&spec)?;
                let verdict = conductor_bound(&spec, &ft)?;
                let (ft, _) = ft.annotated().map_err(|e| Failure::Rejected(e.to_string()))?;
                emit(&to_json(&serde_json::json!({ "tower": ft, "conductor": verdict })));
                Ok(verdict.vanishes_at_n)
            }
        },
        Command::Signature { p, n, m, a1, a2, a3 } => {
            let spec = MetacyclicSpec::new(p, n, m, [a1, a2, a3]).map_err(|e| Failure::Rejected(e.to_string()))?;
            let sol = signature_solver(&spec).map_err(|e| Failure::Rejected(e.to_string()))?;
            let note = moduli_and_tails_note(&spec).map_err(|e| Failure::Rejected(e.to_string()))?;
            emit(&to_json(&serde_json::json!({ "solution": sol, "note": note })));
            Ok(note.delegated_to_cyclic || note.vanishes_at_n)
        }
        Command::Batch { p, n_max, per_cell, threads, json } => {
            batch(p, n_max, per_cell, threads.or(cfg.threads), json, &cfg)
        }
    }
}

#[derive(Serialize)]
struct BatchRow {
    p: u64,
    n: u32,
    s: u32,
    a: String,
    b: String,
    certified: bool,
    graph_ok: bool,
    vanishes_at_n: bool,
    conductor: Option<String>,
    error: Option<String>,
    millis: u128,
}

/// The first `k` pairs `(a, b)` with `v(a) = v(a+b) = 0` and `v(b) = n - s`.
fn cell_specs(p: u64, n: u32, s: u32, k: usize) -> Vec<(u64, u64)> {
    let pk = p.pow(n - s);
    let mut out = Vec::new();
    for total in 2u64.. {
        for a in 1..total {
            let u = total - a;
            if a % p == 0 || u % p == 0 || (a + pk * u).is_multiple_of(p) {
                continue;
            }
            out.push((a, pk * u));
            if out.len() == k {
                return out;
            }
        }
        if total > 64 * (k as u64 + 1) {
            break;
        }
    }
    out
}

fn batch(
    p: u64,
    n_max: u32,
    per_cell: usize,
    threads: Option<usize>,
    json: Option<PathBuf>,
    cfg: &RunConfig,
) -> Outcome {
    if n_max == 0 || per_cell == 0 {
        return Err(Failure::Usage("--n-max and --per-cell must be positive".into()));
    }
    let mut jobs = Vec::new();
    for n in 1..=n_max {
        for s in 1..=n {
            for (a, b) in cell_specs(p, n, s, per_cell) {
                jobs.push((n, s, a, b));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let rows: Vec<BatchRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, s, a, b)| {
                let t0 = Instant::now();
                let res = branch_signature(p, n, &BigInt::from(a), &BigInt::from(b)).and_then(|sp| analyze(&sp, cfg));
                let mut row = BatchRow {
                    p,
                    n,
                    s,
                    a: a.to_string(),
                    b: b.to_string(),
                    certified: false,
                    graph_ok: false,
                    vanishes_at_n: false,
                    conductor: None,
                    error: None,
                    millis: 0,
                };
                match res {
                    Ok(r) => {
                        row.certified = r.all_certified;
                        row.graph_ok = r.graph_checks.passed();
                        row.vanishes_at_n = r.conductor.vanishes_at_n;
                        row.conductor = r.conductor.report.conductor.value.as_ref().map(fmt_q);
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
                row.millis = t0.elapsed().as_millis();
                row
            })
            .collect()
    });
    if rows.is_empty() {
        return Err(Failure::Usage(format!("no admissible covers for p = {p} up to n = {n_max}")));
    }
    emit(&format!(
        "{:>4} {:>3} {:>3} {:>6} {:>10} {:>9} {:>9} {:>10}",
        "p", "n", "s", "covers", "certified", "graph ok", "cond < n", "max ms"
    ));
    let mut all = true;
    for n in 1..=n_max {
        for s in 1..=n {
            let cell: Vec<&BatchRow> = rows.iter().filter(|r| r.n == n && r.s == s).collect();
            if cell.is_empty() {
                continue;
            }
            let cert = cell.iter().filter(|r| r.certified).count();
            let gok = cell.iter().filter(|r| r.graph_ok).count();
            let van = cell.iter().filter(|r| r.vanishes_at_n).count();
            let ms = cell.iter().map(|r| r.millis).max().unwrap_or(0);
            all &= cert == cell.len();
            emit(&format!("{p:>4} {n:>3} {s:>3} {:>6} {cert:>10} {gok:>9} {van:>9} {ms:>10}", cell.len()));
        }
    }
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("({}, {}, {}, {}): {}", r.p, r.n, r.a, r.b, r.error.as_deref().unwrap_or(""));
    }
    if let Some(path) = json {
        write_file(&path, &to_json(&rows))?;
    }
    Ok(all)
}
