//! `ck-embed`: command-line workbench over problem files.
//!
//! Exit status is 0 when every clause passes, 1 when any clause fails and 2
//! on usage or parse errors.

use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use ck_embed::constructions::{
    check_onto_at_m, check_phi_r, filtration, phi_r, pi_base, top_level_witness,
    DEFAULT_SEARCH_BOUND,
};
use ck_embed::format::{self, kernel_body, setmap_body, KernelDecl, ProblemFile};
use ck_embed::norms::{embedding_constant, lattice_oracle, norming_check};
use ck_embed::random::DEFAULT_SEED;
use ck_embed::reductions::{
    adjoin_and_lift, envelope, envelope_report, pipeline, positive_reduction,
};
use ck_embed::selftest::{self, Counts};
use ck_embed::{
    gallery, setmap, validate_kernel, Clause, Kernel, Report, Space, Subset, Verdict, Q,
};
use clap::{Parser, Subcommand, ValueEnum};
use num_traits::{One, Zero};

const DEFAULT_WINDOW: u64 = 2;

#[derive(Parser)]
#[command(
    name = "ck-embed",
    version,
    about = "Exact embedding constants, filtrations and reductions for C(K) operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Exception budget per block for candidate functions.
    #[arg(long, global = true)]
    window: Option<u64>,
    /// Denominator of the lattice oracle.
    #[arg(long, global = true)]
    oracle: Option<u64>,
    /// Seed for the property suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Emit one JSON object per clause instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Largest index examined when searching for clopen neighbourhoods.
    #[arg(long = "search-bound", global = true)]
    search_bound: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate every kernel and set map in the file.
    Validate { input: Option<PathBuf> },
    /// Summarize the kernel.
    Info { input: Option<PathBuf> },
    /// Operator norm, windowed embedding constants and witness.
    Norms { input: Option<PathBuf> },
    /// The set map of atoms of mass at least r.
    Phi {
        input: Option<PathBuf>,
        #[arg(long)]
        r: String,
    },
    /// The filtration at the working constant and its top-level witness.
    Filtration {
        input: Option<PathBuf>,
        /// Working constant; computed at the window when absent.
        #[arg(long)]
        m: Option<String>,
    },
    /// A clopen subset of the target carrying a continuous-image witness.
    Pibase {
        input: Option<PathBuf>,
        /// Subset literal on the domain, or the name of a declared subset.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        m: Option<String>,
    },
    /// Row variations and their continuity.
    Envelope { input: Option<PathBuf> },
    /// Positive kernel into the doubled codomain.
    Reduce { input: Option<PathBuf> },
    /// Kernel on the domain with one isolated point adjoined.
    Lift { input: Option<PathBuf> },
    /// Lift, reduce, normalize, filter and collect witnesses.
    Pipeline { input: Option<PathBuf> },
    /// Print a built-in problem file.
    Example {
        name: ExampleName,
        /// Blocks of the space for `identity`, e.g. "block X seq; block W fin 2;".
        space: Option<String>,
    },
    /// Run the seeded property suites.
    Selftest {
        /// One tenth of the default instance counts.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    Ex52,
    Identity,
    Cancel,
    Signed,
}

/// A report plus named objects in file syntax.
#[derive(Default)]
struct Outcome {
    artifacts: Vec<(String, String)>,
    report: Report,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ck_embed::Error> for Failure {
    fn from(e: ck_embed::Error) -> Self {
        let code = if matches!(e, ck_embed::Error::Parse { .. }) {
            2
        } else {
            1
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn read_input(path: &Option<PathBuf>) -> Result<String, Failure> {
    let mut text = String::new();
    match path {
        Some(p) if p.as_os_str() != "-" => {
            text =
                std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        }
        _ => {
            io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| usage(format!("stdin: {e}")))?;
        }
    }
    Ok(text)
}

struct Ctx {
    file: ProblemFile,
    window: u64,
    oracle: Option<u64>,
    search_bound: u64,
}

impl Ctx {
    fn load(cli: &Cli, path: &Option<PathBuf>) -> Result<Ctx, Failure> {
        let file = format::parse(&read_input(path)?)?;
        let s = &file.settings;
        Ok(Ctx {
            window: cli.window.or(s.window).unwrap_or(DEFAULT_WINDOW),
            oracle: cli.oracle.or(s.oracle),
            search_bound: cli
                .search_bound
                .or(s.search_bound)
                .unwrap_or(DEFAULT_SEARCH_BOUND),
            file,
        })
    }

    /// The first kernel, provided it validates.
    fn kernel(&self) -> Result<Result<&KernelDecl, Report>, Failure> {
        let decl = self.file.kernel()?;
        let report = validate_kernel(&decl.kernel);
        Ok(if report.is_ok() {
            Ok(decl)
        } else {
            Err(report)
        })
    }

    fn constant(&self, kernel: &Kernel, given: &Option<String>) -> Result<Q, Failure> {
        match given {
            Some(text) => Ok(format::parse_rational(text)?),
            None => Ok(embedding_constant(kernel, self.window)?.value),
        }
    }
}

fn kernel_artifact(name: &str, domain: &str, codomain: &str, kernel: &Kernel) -> String {
    format!(
        "kernel {name} : {domain} -> {codomain} {}",
        kernel_body(kernel)
    )
}

fn space_artifact(name: &str, space: &Space) -> String {
    format!("space {name} {space}")
}

fn error_clause(report: &mut Report, anchor: &str, stage: &str, e: ck_embed::Error) {
    report.fail(anchor, stage).add("error", e.to_string());
}

fn validate(ctx: &Ctx) -> Outcome {
    let mut out = Outcome::default();
    for k in &ctx.file.kernels {
        let mut r = validate_kernel(&k.kernel);
        for c in &mut r.clauses {
            c.values.insert(0, ("kernel".into(), k.name.clone()));
        }
        out.report.extend(r);
    }
    for m in &ctx.file.setmaps {
        let mut r = setmap::validate_setmap(&m.map);
        if r.is_ok() {
            r.extend(setmap::check_usc(&m.map));
        }
        for c in &mut r.clauses {
            c.values.insert(0, ("setmap".into(), m.name.clone()));
        }
        out.report.extend(r);
    }
    if out.report.clauses.is_empty() {
        out.report.push(Clause::new(
            "validate",
            "nothing to validate",
            Verdict::Skipped,
        ));
    }
    out
}

fn info(decl: &KernelDecl) -> Outcome {
    let k = &decl.kernel;
    let mut out = Outcome::default();
    let r = &mut out.report;
    r.pass("info", "kernel")
        .add("name", decl.name.clone())
        .add("domain", format!("{} {}", decl.domain, k.domain()))
        .add("codomain", format!("{} {}", decl.codomain, k.codomain()))
        .add("explicit rows", k.rows().len().to_string())
        .add("templates", k.templates().len().to_string());
    r.pass("info", "properties")
        .add("positive", k.is_positive().to_string())
        .add("unital", k.is_unital().to_string())
        .add("||T||", k.operator_norm().to_string());
    for b in k.codomain().seq_blocks() {
        r.pass("info", "horizon")
            .add("block", b.id.clone())
            .add("horizon", k.horizon(&b.id).to_string());
    }
    out
}

fn norms(ctx: &Ctx, k: &Kernel) -> Result<Outcome, Failure> {
    let mut out = Outcome::default();
    let r = &mut out.report;
    r.pass("norms", "operator norm")
        .add("||T||", k.operator_norm().to_string());
    let mut previous: Option<Q> = None;
    let mut monotone = true;
    let mut sequence = Vec::new();
    let mut last = None;
    for w in 0..=ctx.window {
        let est = embedding_constant(k, w)?;
        if let Some(p) = &previous {
            monotone &= est.value <= *p;
        }
        sequence.push(format!("{w}: {}", est.value));
        previous = Some(est.value.clone());
        last = Some(est);
    }
    let est = last.expect("window range is nonempty");
    r.check("norms", "non-increasing in the window", monotone)
        .add("m(W)", sequence.join(", "));
    let clause = r.pass("norms", "embedding constant");
    clause
        .add("window", ctx.window.to_string())
        .add("m", est.value.to_string())
        .add("witness", est.witness.to_string());
    if let Some(inv) = est.inverse_bound() {
        clause.add("1/m", inv.to_string());
    }
    let image = k.apply(&est.witness)?;
    r.check(
        "norms",
        "witness soundness",
        est.witness.norm() == Q::one() && image.norm() == est.value,
    )
    .add("||g||", est.witness.norm().to_string())
    .add("||Tg||", image.norm().to_string());
    let (check, _) = norming_check(k, &est.value, std::slice::from_ref(&est.witness))?;
    r.extend(check);
    if let Some(d) = ctx.oracle {
        match lattice_oracle(k, ctx.window, d) {
            Ok(o) => {
                r.check(
                    "norms",
                    "lattice oracle bounds the constant",
                    o >= est.value,
                )
                .add("denominator", d.to_string())
                .add("oracle", o.to_string())
                .add("agrees", (o == est.value).to_string());
            }
            Err(e) => error_clause(r, "norms", "lattice oracle", e),
        }
    }
    Ok(out)
}

fn phi(decl: &KernelDecl, r_text: &str) -> Result<Outcome, Failure> {
    let r = format::parse_rational(r_text)?;
    let mut out = Outcome::default();
    match phi_r(&decl.kernel, &r) {
        Ok(map) => {
            out.artifacts.push((
                "phi".into(),
                format!(
                    "setmap phi : {} -> {} bound {} {}",
                    decl.codomain,
                    decl.domain,
                    map.bound(),
                    setmap_body(&map)
                ),
            ));
            out.report.extend(check_phi_r(&map));
            let image = map.image_union();
            out.report
                .pass("phi_r", "image")
                .add("r", r.to_string())
                .add("image", image.set.to_string());
        }
        Err(e) => error_clause(&mut out.report, "phi_r", "construct", e),
    }
    Ok(out)
}

fn filtration_cmd(ctx: &Ctx, k: &Kernel, m: &Option<String>) -> Result<Outcome, Failure> {
    let m = ctx.constant(k, m)?;
    let mut out = Outcome::default();
    if m.is_zero() {
        out.report
            .fail("filtration", "positive working constant")
            .add("m", "0");
        return Ok(out);
    }
    match check_onto_at_m(k, &m) {
        Ok(r) => out.report.extend(r),
        Err(e) => {
            error_clause(&mut out.report, "phi_r", "onto at the working constant", e);
            return Ok(out);
        }
    }
    let f = match filtration(k, &m) {
        Ok(f) => f,
        Err(e) => {
            error_clause(&mut out.report, "filtration", "filtration", e);
            return Ok(out);
        }
    };
    out.report.extend(f.report.clone());
    match top_level_witness(k, &f) {
        Ok(w) => {
            out.report
                .pass("top-level witness", "continuous surjection onto K_p")
                .add("source", w.source.to_string())
                .add("target", w.target.to_string())
                .add("map", setmap_body(&w.map));
        }
        Err(e) => error_clause(&mut out.report, "top-level witness", "top-level witness", e),
    }
    Ok(out)
}

fn pibase_cmd(
    ctx: &Ctx,
    decl: &KernelDecl,
    target: &Option<String>,
    m: &Option<String>,
) -> Result<Outcome, Failure> {
    let k = &decl.kernel;
    let w = match target {
        None => Subset::whole(k.domain()),
        Some(t) => match ctx.file.subset(t) {
            Some(lit) => lit.value.clone(),
            None => format::parse_subset(t, k.domain())?,
        },
    };
    let mut out = Outcome::default();
    let m = ctx.constant(k, m)?;
    if m.is_zero() {
        out.report
            .fail("pi-base", "positive working constant")
            .add("m", "0");
        return Ok(out);
    }
    let f = match filtration(k, &m) {
        Ok(f) => f,
        Err(e) => {
            error_clause(&mut out.report, "filtration", "filtration", e);
            return Ok(out);
        }
    };
    match pi_base(k, &f, &w, ctx.search_bound) {
        Ok(el) => {
            out.report
                .pass("pi-base", "clopen U ⊆ W with closure a continuous image")
                .add("W", w.to_string())
                .add("level", el.level.to_string())
                .add("U", el.set.to_string())
                .add("source", el.witness.source.to_string())
                .add("map", setmap_body(&el.witness.map));
        }
        Err(e) => error_clause(&mut out.report, "pi-base", "pi-base element", e),
    }
    Ok(out)
}

fn envelope_cmd(k: &Kernel) -> Outcome {
    let env = envelope(k);
    let mut out = Outcome::default();
    out.report.extend(envelope_report(&env));
    out
}

fn normalized(k: &Kernel) -> Kernel {
    let n = k.operator_norm();
    if n.is_zero() {
        k.clone()
    } else {
        k.scale(&n.recip())
    }
}

fn reduce_cmd(ctx: &Ctx, k: &Kernel) -> Result<Outcome, Failure> {
    let t = normalized(k);
    let m = embedding_constant(&t, ctx.window)?.value;
    let mut out = Outcome::default();
    out.report
        .pass("positive-reduction", "input constant")
        .add("m", m.to_string());
    match positive_reduction(&t, &m, ctx.window) {
        Ok(red) => {
            out.report.extend(red.report);
            out.artifacts
                .push(("K".into(), space_artifact("K", red.kernel.domain())));
            out.artifacts
                .push(("L2".into(), space_artifact("L2", red.kernel.codomain())));
            out.artifacts
                .push(("S".into(), kernel_artifact("S", "K", "L2", &red.kernel)));
        }
        Err(e) => error_clause(&mut out.report, "positive-reduction", "hypothesis", e),
    }
    Ok(out)
}

fn lift_cmd(ctx: &Ctx, k: &Kernel) -> Result<Outcome, Failure> {
    let m = embedding_constant(k, ctx.window)?.value;
    let mut out = Outcome::default();
    match adjoin_and_lift(k, &m, ctx.window) {
        Ok(lift) => {
            out.report
                .pass("lift", "adjoined point")
                .add("z", lift.point.to_string());
            out.report.extend(lift.report);
            out.artifacts
                .push(("K1".into(), space_artifact("K1", lift.kernel.domain())));
            out.artifacts
                .push(("L".into(), space_artifact("L", lift.kernel.codomain())));
            out.artifacts
                .push(("S".into(), kernel_artifact("S", "K1", "L", &lift.kernel)));
        }
        Err(e) => error_clause(&mut out.report, "lift", "adjoin and lift", e),
    }
    Ok(out)
}

fn example(name: ExampleName, space: &Option<String>) -> Result<String, Failure> {
    let kernel = match name {
        ExampleName::Ex52 => return Ok(gallery::EX52_FILE.to_string()),
        ExampleName::Cancel => gallery::cancellation(),
        ExampleName::Signed => gallery::two_point_signed(),
        ExampleName::Identity => {
            let body = space
                .clone()
                .unwrap_or_else(|| "block X seq; block Y seq;".into());
            let body = body.trim();
            let text = if body.starts_with('{') {
                format!("space K {body}")
            } else {
                format!("space K {{ {body} }}")
            };
            let file = format::parse(&text)?;
            gallery::identity(&Arc::clone(&file.spaces[0].1))
        }
    };
    let label = match name {
        ExampleName::Ex52 => "T",
        ExampleName::Cancel => "cancel",
        ExampleName::Signed => "signed",
        ExampleName::Identity => "id",
    };
    Ok(format::serialize(&ProblemFile::from_kernel(label, &kernel)))
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let with_kernel =
        |path: &Option<PathBuf>, f: &dyn Fn(&Ctx, &KernelDecl) -> Result<Outcome, Failure>| {
            let ctx = Ctx::load(cli, path)?;
            match ctx.kernel()? {
                Ok(decl) => f(&ctx, decl),
                Err(report) => Ok(Outcome {
                    artifacts: Vec::new(),
                    report,
                }),
            }
        };
    match &cli.command {
        Command::Validate { input } => Ok(validate(&Ctx::load(cli, input)?)),
        Command::Info { input } => with_kernel(input, &|_, d| Ok(info(d))),
        Command::Norms { input } => with_kernel(input, &|c, d| norms(c, &d.kernel)),
        Command::Phi { input, r } => with_kernel(input, &|_, d| phi(d, r)),
        Command::Filtration { input, m } => {
            with_kernel(input, &|c, d| filtration_cmd(c, &d.kernel, m))
        }
        Command::Pibase { input, target, m } => {
            with_kernel(input, &|c, d| pibase_cmd(c, d, target, m))
        }
        Command::Envelope { input } => with_kernel(input, &|_, d| Ok(envelope_cmd(&d.kernel))),
        Command::Reduce { input } => with_kernel(input, &|c, d| reduce_cmd(c, &d.kernel)),
        Command::Lift { input } => with_kernel(input, &|c, d| lift_cmd(c, &d.kernel)),
        Command::Pipeline { input } => {
            with_kernel(input, &|c, d| Ok(pipeline_outcome(c, &d.kernel)))
        }
        Command::Example { .. } | Command::Selftest { .. } => {
            unreachable!("handled before loading input")
        }
    }
}

fn pipeline_outcome(ctx: &Ctx, k: &Kernel) -> Outcome {
    let p = pipeline(k, ctx.window, ctx.search_bound);
    let mut out = Outcome {
        artifacts: Vec::new(),
        report: p.report,
    };
    if let (Some(m), Some(f)) = (&p.constant, &p.filtration) {
        let clause = out.report.pass("pipeline", "summary");
        clause.add("m", m.to_string()).add("p", f.p.to_string());
        let chain: Vec<String> = f.chain.iter().map(ToString::to_string).collect();
        clause.add("chain", chain.join(" ⊇ "));
    }
    out
}

fn emit(cli: &Cli, out: &Outcome) -> io::Result<()> {
    let stdout = io::stdout();
    let mut w = stdout.lock();
    if cli.json {
        for (name, text) in &out.artifacts {
            writeln!(
                w,
                "{}",
                serde_json::json!({ "artifact": name, "text": text })
            )?;
        }
        w.write_all(out.report.to_json_lines().as_bytes())?;
    } else {
        for (_, text) in &out.artifacts {
            writeln!(w, "{text}")?;
        }
        if !out.artifacts.is_empty() {
            writeln!(w)?;
        }
        write!(w, "{}", out.report)?;
        let total = out.report.clauses.len();
        let failed = out.report.failures().count();
        if failed == 0 {
            writeln!(w, "PASS ({total} clauses)")?;
        } else {
            writeln!(w, "FAIL ({failed} of {total} clauses failed)")?;
        }
    }
    w.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Example { name, space } => match example(*name, space) {
            Ok(text) => {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            Err(e) => Err(e),
        },
        Command::Selftest { quick } => {
            let seed = cli.seed.unwrap_or(DEFAULT_SEED);
            let mut counts = Counts::default();
            if *quick {
                counts = Counts {
                    phi_r: counts.phi_r / 10,
                    paths: counts.paths / 10,
                    reductions: counts.reductions / 10,
                    lifts: counts.lifts / 10,
                    oracle: counts.oracle / 10,
                };
            }
            Ok(Outcome {
                artifacts: Vec::new(),
                report: selftest::run(seed, counts),
            })
        }
        _ => run(&cli),
    };
    match result {
        Ok(out) => {
            if emit(&cli, &out).is_err() {
                return ExitCode::from(2);
            }
            if out.report.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
