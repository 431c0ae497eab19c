//! Command-line front end for the staged-flow toolkit.
//!
//! One command per process. Artifacts are written under --out-dir via a
//! temp-file-and-rename, so a failed run never leaves a partial file, and
//! every artifact starts with a `generated-unix` comment line unless
//! --no-timestamp asks for byte-reproducible output.
//!
//! Exit codes: 0 when a verdict-producing command reproduces REFUTES, 1 when
//! it does not (or an oracle stayed inconclusive within budget), 2 for input
//! or usage errors.

use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use stageflow::canonical::{canonical_counterexample, canonical_hcp_seed, canonical_seed_tsp};
use stageflow::certificate::{build_certificate, ConditionalFlow, StageFlow, StagePlan};
use stageflow::graph::{HcpInstance, TspInstance};
use stageflow::lift::lift_certificate;
use stageflow::model::{export_lp, ExportMode};
use stageflow::oracle::{exact_tsp, hamiltonian_cycle, HcpAnswer, TspOutcome};
use stageflow::rat::{fmt_rat, parse_rat, Rat};
use stageflow::verify::{
    check_symmetry, full_verdict, integral_bound, verify_all_threaded, verify_family_with,
    RefutationVerdict, SymmetryReport, Verdict,
};

#[derive(Parser)]
#[command(
    name = "stageflow",
    version,
    about = "Build, lift and verify fractional certificates for the staged-flow tour relaxation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full run: bound oracle, certificate, lift, verification, verdict
    Pipeline(Common),
    /// Exact integral optimum of the instance
    Solve(Common),
    /// Hamiltonian-cycle decision on the instance's small-arc graph
    Hcp(Common),
    /// Build the fractional x certificate and write it out
    Certificate(Common),
    /// Lift the x certificate to the conditional y certificate
    Lift(Common),
    /// Verify certificate files from --out-dir against the instance
    Verify(Common),
    /// Write the LP text model
    Export(ExportArgs),
    /// Verify both stage plans and write the per-plan family matrix
    Report(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Instance: `canonical`, `seed`, or a path to an instance file
    #[arg(long, default_value = "canonical")]
    instance: String,

    /// Total flow injected at the origin, as an integer or num/den
    #[arg(long, value_parser = parse_rat, default_value = "192")]
    flow_constant: Rat,

    /// Reprice the instance's fill arcs to this cost
    #[arg(long)]
    large_cost: Option<i64>,

    /// balanced (alias repaired) or overlapped (alias annex-c)
    #[arg(long, value_parser = parse_plan, default_value = "balanced")]
    stage_plan: StagePlan,

    /// Budget in seconds for integral oracles
    #[arg(long, default_value_t = 300)]
    budget: u64,

    /// Worker threads for family verification
    #[arg(long, default_value_t = 1)]
    threads: usize,

    /// Directory artifacts are written to (and read from by `verify`)
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,

    /// Omit the generated-unix header line from artifacts
    #[arg(long)]
    no_timestamp: bool,

    /// List every violating row instead of the first ten per family
    #[arg(long)]
    all_witnesses: bool,
}

#[derive(Args, Clone)]
struct ExportArgs {
    #[command(flatten)]
    common: Common,

    /// Export only the x variables and BASE rows (any instance size)
    #[arg(long)]
    x_only: bool,
}

fn parse_plan(s: &str) -> Result<StagePlan, String> {
    match s {
        "balanced" | "repaired" => Ok(StagePlan::Balanced),
        "overlapped" | "annex-c" => Ok(StagePlan::Overlapped),
        _ => Err(format!(
            "unknown stage plan {s:?} (expected balanced/repaired or overlapped/annex-c)"
        )),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Cmd::Pipeline(c) => cmd_pipeline(&c),
        Cmd::Solve(c) => cmd_solve(&c),
        Cmd::Hcp(c) => cmd_hcp(&c),
        Cmd::Certificate(c) => cmd_certificate(&c),
        Cmd::Lift(c) => cmd_lift(&c),
        Cmd::Verify(c) => cmd_verify(&c),
        Cmd::Export(a) => cmd_export(&a),
        Cmd::Report(c) => cmd_report(&c),
    }
}

fn resolve_instance(c: &Common) -> Result<TspInstance> {
    let mut t = match c.instance.as_str() {
        "canonical" => canonical_counterexample(),
        "seed" => canonical_seed_tsp(),
        path => TspInstance::load(Path::new(path))
            .with_context(|| format!("reading instance {path}"))?,
    };
    if let Some(new_large) = c.large_cost {
        if new_large <= 0 {
            return Err(anyhow!("--large-cost must be positive"));
        }
        let old = t.large;
        for i in 1..=t.n {
            for j in 1..=t.n {
                if i != j && t.cost(i, j) == old {
                    t.set_cost(i, j, new_large);
                }
            }
        }
        t.large = new_large;
    }
    Ok(t)
}

fn budget_of(c: &Common) -> Duration {
    Duration::from_secs(c.budget)
}

fn witness_cap(c: &Common) -> usize {
    if c.all_witnesses {
        usize::MAX
    } else {
        stageflow::verify::WITNESS_CAP
    }
}

/// Atomic artifact write with the optional timestamp header. `comment` is
/// the file format's comment leader.
fn write_artifact(c: &Common, name: &str, body: &str, comment: char) -> Result<PathBuf> {
    std::fs::create_dir_all(&c.out_dir)
        .with_context(|| format!("creating {}", c.out_dir.display()))?;
    let path = c.out_dir.join(name);
    let tmp = c.out_dir.join(format!("{name}.tmp"));
    let content = if c.no_timestamp {
        body.to_string()
    } else {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("{comment} generated-unix={secs}\n{body}")
    };
    std::fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(path)
}

fn symmetry_line(sym: &SymmetryReport) -> String {
    format!(
        "symmetry: entries={} pairs={} mirrored={} max={} ok={}",
        sym.entries,
        sym.pairs_checked,
        sym.mirrored_pairs,
        fmt_rat(sym.max_asymmetry),
        sym.symmetric()
    )
}

/// Report body: notes, the verdict block, the symmetry line, and on request
/// the full witness lists for every violated family.
fn render_report(
    t: &TspInstance,
    x: &StageFlow,
    y: &ConditionalFlow,
    v: &RefutationVerdict,
    notes: &[String],
    cap: usize,
) -> String {
    let mut out = String::new();
    for n in notes {
        out.push_str(&format!("note: {n}\n"));
    }
    out.push_str(&v.text_report());
    out.push_str(&symmetry_line(&check_symmetry(y)));
    out.push('\n');
    for rep in v.families.iter().filter(|r| !r.passed()) {
        let full = verify_family_with(t, x, y, rep.family, cap);
        for (label, residual) in &full.witnesses {
            out.push_str(&format!(
                "witness: family={} row={} residual={}\n",
                full.family,
                label,
                fmt_rat(*residual)
            ));
        }
    }
    out
}

fn cmd_pipeline(c: &Common) -> Result<i32> {
    let t = resolve_instance(c)?;
    write_artifact(c, "instance.txt", &t.to_text(), '#')?;

    let x = match build_certificate(&t, c.flow_constant, c.stage_plan) {
        Ok(x) => x,
        Err(e) => {
            let body = format!(
                "note: no fractional certificate for this instance: {e}\nverdict: DOES-NOT-REFUTE\n"
            );
            write_artifact(c, "report.txt", &body, '#')?;
            print!("{body}");
            return Ok(1);
        }
    };
    write_artifact(c, "certificate_x.txt", &x.to_text(), '#')?;

    let mut notes = Vec::new();
    let y = match lift_certificate(&t, &x) {
        Ok(y) => y,
        Err(e) => {
            notes.push(format!("no conditional lift: {e}"));
            ConditionalFlow::new()
        }
    };
    write_artifact(c, "certificate_y.txt", &y.to_text(), '#')?;

    let bound = integral_bound(&t, budget_of(c));
    let v = full_verdict(&t, &x, &y, bound, c.threads);
    let body = render_report(&t, &x, &y, &v, &notes, witness_cap(c));
    write_artifact(c, "report.txt", &body, '#')?;
    print!("{body}");
    Ok(v.exit_code())
}

fn cmd_solve(c: &Common) -> Result<i32> {
    let t = resolve_instance(c)?;
    match exact_tsp(&t, budget_of(c)) {
        TspOutcome::Solved(r) => {
            println!("optimum={} large_arcs={}", r.value, r.large_arcs);
            println!(
                "order={}",
                r.order
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            Ok(0)
        }
        TspOutcome::Timeout {
            incumbent,
            lower_bound,
        } => {
            match incumbent {
                Some(r) => println!(
                    "inconclusive: incumbent={} lower_bound={lower_bound}",
                    r.value
                ),
                None => println!("inconclusive: lower_bound={lower_bound}"),
            }
            Ok(1)
        }
    }
}

fn small_arc_graph(t: &TspInstance) -> HcpInstance {
    let mut h = HcpInstance::new(t.n);
    for i in 1..=t.n {
        for j in t.small_out(i) {
            h.add_arc(i, j);
        }
    }
    h
}

fn cmd_hcp(c: &Common) -> Result<i32> {
    let h = match c.instance.as_str() {
        "canonical" | "seed" => canonical_hcp_seed(),
        path => small_arc_graph(
            &TspInstance::load(Path::new(path))
                .with_context(|| format!("reading instance {path}"))?,
        ),
    };
    match hamiltonian_cycle(&h, budget_of(c)) {
        HcpAnswer::Cycle(cycle) => {
            println!(
                "YES {}",
                cycle
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            Ok(0)
        }
        HcpAnswer::None => {
            println!("NO");
            Ok(0)
        }
        HcpAnswer::Timeout => {
            println!("TIMEOUT");
            Ok(1)
        }
    }
}

fn cmd_certificate(c: &Common) -> Result<i32> {
    let t = resolve_instance(c)?;
    let x = build_certificate(&t, c.flow_constant, c.stage_plan)
        .map_err(|e| anyhow!("building certificate: {e}"))?;
    let path = write_artifact(c, "certificate_x.txt", &x.to_text(), '#')?;
    println!(
        "wrote {} (per-unit objective {}, max support cost {})",
        path.display(),
        fmt_rat(x.per_unit(&t)),
        x.max_support_cost(&t)
            .map(|v| v.to_string())
            .unwrap_or_else(|| "-".into())
    );
    Ok(0)
}

fn cmd_lift(c: &Common) -> Result<i32> {
    let t = resolve_instance(c)?;
    let x_path = c.out_dir.join("certificate_x.txt");
    let x = if x_path.exists() {
        StageFlow::load(&x_path).with_context(|| format!("reading {}", x_path.display()))?
    } else {
        build_certificate(&t, c.flow_constant, c.stage_plan)
            .map_err(|e| anyhow!("building certificate: {e}"))?
    };
    let y = lift_certificate(&t, &x).map_err(|e| anyhow!("lifting certificate: {e}"))?;
    let path = write_artifact(c, "certificate_y.txt", &y.to_text(), '#')?;
    println!(
        "wrote {} ({} entries, {})",
        path.display(),
        y.entry_count(),
        symmetry_line(&check_symmetry(&y))
    );
    Ok(0)
}

fn cmd_verify(c: &Common) -> Result<i32> {
    let t = resolve_instance(c)?;
    let x_path = c.out_dir.join("certificate_x.txt");
    let y_path = c.out_dir.join("certificate_y.txt");
    let x = StageFlow::load(&x_path).with_context(|| format!("reading {}", x_path.display()))?;
    let y = ConditionalFlow::load(&y_path)
        .with_context(|| format!("reading {}", y_path.display()))?;

    let bound = integral_bound(&t, budget_of(c));
    let v = full_verdict(&t, &x, &y, bound, c.threads);
    let body = render_report(&t, &x, &y, &v, &[], witness_cap(c));
    write_artifact(c, "report.txt", &body, '#')?;
    print!("{body}");
    Ok(v.exit_code())
}

fn cmd_export(a: &ExportArgs) -> Result<i32> {
    let c = &a.common;
    let t = resolve_instance(c)?;
    let mode = if a.x_only {
        ExportMode::XOnly
    } else {
        ExportMode::Full
    };
    let text = export_lp(&t, c.flow_constant, mode).map_err(|e| anyhow!("export: {e}"))?;
    let path = write_artifact(c, "model.lp", &text, '\\')?;
    println!("wrote {}", path.display());
    Ok(0)
}

/// Both plans, one matrix. The exit code reports whether any plan yields a
/// full refutation; the matrix itself presents each plan's residuals as-is.
fn cmd_report(c: &Common) -> Result<i32> {
    let t = resolve_instance(c)?;
    let bound = integral_bound(&t, budget_of(c));
    let mut body = String::new();
    body.push_str(&format!("integral lower bound: {}\n", bound.value));
    for s in &bound.sources {
        body.push_str(&format!("  bound source: {s}\n"));
    }

    let mut refuted = false;
    for plan in [StagePlan::Balanced, StagePlan::Overlapped] {
        let x = match build_certificate(&t, c.flow_constant, plan) {
            Ok(x) => x,
            Err(e) => {
                body.push_str(&format!("plan={plan} error: {e}\n"));
                continue;
            }
        };
        let y = lift_certificate(&t, &x).unwrap_or_default();
        body.push_str(&format!(
            "plan={plan} per-unit-objective={}\n",
            fmt_rat(x.per_unit(&t))
        ));
        for rep in verify_all_threaded(&t, &x, &y, c.threads) {
            body.push_str(&format!("plan={plan} {}\n", rep.machine_line()));
        }
        let v = full_verdict(&t, &x, &y, bound.clone(), c.threads);
        if v.verdict == Verdict::Refutes {
            refuted = true;
        }
        body.push_str(&format!("plan={plan} verdict: {}\n", v.verdict));
    }

    write_artifact(c, "plan_matrix.txt", &body, '#')?;
    print!("{body}");
    Ok(if refuted { 0 } else { 1 })
}
