//! The `taxoalign` command line.
//!
//! Exit codes: 0 success or consistent, 1 usage, input or I/O error,
//! 2 inconsistent alignment, 3 solver budget exhausted.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use taxoalign::analysis::{self, mir_to_csv, AnalysisError, ReductionSession};
use taxoalign::engine::{check_consistency, enumerate_worlds, Budget, EngineError};
use taxoalign::model::{Diagnosis, World};
use taxoalign::parser::render_errors;
use taxoalign::synth::{self, Pattern, SynthError};
use taxoalign::viz::{build_rcg, cluster_worlds, rcg_to_dot_styled, RcgStyle};
use taxoalign::{parse_alignment, serialize_alignment, Alignment, RelationMask};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONSISTENT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

pub const BUDGET_ENV: &str = "TAXOALIGN_BUDGET";

#[derive(Parser, Debug)]
#[command(name = "taxoalign", version, about = "Align two taxonomies under RCC-5 articulations")]
struct Cli {
    /// Drop the covering constraint (parents may have members outside their children).
    #[arg(long, global = true)]
    no_coverage: bool,
    /// Seed for commands that randomize.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide consistency; exit 0 if consistent, 2 if not.
    Check { file: PathBuf },
    /// Explain an inconsistency and suggest repairs.
    Explain { file: PathBuf },
    /// Maximally informative relations over all possible worlds.
    Mir {
        file: PathBuf,
        /// Print the support of one entry instead, e.g. `--provenance 1.A,2.B`.
        #[arg(long)]
        provenance: Option<String>,
    },
    /// Enumerate possible worlds and their containment graphs.
    Worlds {
        file: PathBuf,
        /// Stop after this many worlds.
        #[arg(long)]
        limit: Option<usize>,
        /// Write worlds.json and world_<id>.dot here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        style: StyleArgs,
    },
    /// World distance matrix and network.
    Cluster {
        file: PathBuf,
        /// Write distances.csv and cluster.dot here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Answer questions at the terminal until one world remains.
    Reduce { file: PathBuf },
    /// Generate a synthetic benchmark alignment.
    Gen {
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value_t = 2)]
        branch: u32,
        #[arg(long, default_value = "included")]
        pattern: String,
        /// Write the alignment here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Skip the single-world check.
        #[arg(long)]
        no_verify: bool,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Origin allowed to call the API from a browser.
        #[arg(long)]
        allow_origin: Option<String>,
    },
}

#[derive(Args, Debug, Default)]
struct StyleArgs {
    /// Node style override as `kind=shape:color` (kinds: merged, first, second).
    #[arg(long = "node-style")]
    node_style: Vec<String>,
    /// Edge color override as `kind=color` (kinds: input, inferred).
    #[arg(long = "edge-color")]
    edge_color: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("the alignment is inconsistent")]
    Inconsistent,
    #[error("more than {0} possible worlds; raise the limit with {BUDGET_ENV}=worlds=N")]
    WorldLimit(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let budget = |e: &EngineError| matches!(e, EngineError::BudgetExceeded { .. });
        match self {
            CliError::Engine(e) if budget(e) => EXIT_BUDGET,
            CliError::Analysis(AnalysisError::Engine(e)) if budget(e) => EXIT_BUDGET,
            CliError::Synth(SynthError::Engine(e)) if budget(e) => EXIT_BUDGET,
            CliError::WorldLimit(_) => EXIT_BUDGET,
            CliError::Inconsistent | CliError::Analysis(AnalysisError::Inconsistent) => EXIT_INCONSISTENT,
            _ => EXIT_ERROR,
        }
    }
}

/// Reads `branches=N,worlds=M`; a bare number sets the branch limit.
pub fn parse_budget(spec: &str) -> Result<Budget, CliError> {
    let mut b = Budget::default();
    let bad = || CliError::Usage(format!("invalid {BUDGET_ENV} value `{spec}`"));
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('=') {
            Some(("branches", v)) => b.max_branches = v.trim().parse().map_err(|_| bad())?,
            Some(("worlds", v)) => b.max_worlds = v.trim().parse().map_err(|_| bad())?,
            None => b.max_branches = part.parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
    }
    Ok(b)
}

fn budget_from_env() -> Result<Budget, CliError> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => parse_budget(&v),
        Err(_) => Ok(Budget::default()),
    }
}

struct Ctx<'a> {
    json: bool,
    coverage: bool,
    seed: u64,
    budget: Budget,
    input: &'a mut dyn BufRead,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let budget = match budget_from_env() {
        Ok(b) => b,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let mut ctx = Ctx {
        json: cli.json,
        coverage: !cli.no_coverage,
        seed: cli.seed,
        budget,
        input,
        out,
        err,
    };
    match dispatch(&mut ctx, cli.command) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(ctx: &mut Ctx<'_>, command: Command) -> Result<i32, CliError> {
    match command {
        Command::Check { file } => check(ctx, &file),
        Command::Explain { file } => explain(ctx, &file),
        Command::Mir { file, provenance } => mir(ctx, &file, provenance.as_deref()),
        Command::Worlds {
            file,
            limit,
            output,
            style,
        } => worlds(ctx, &file, limit, output.as_deref(), &style),
        Command::Cluster { file, output } => cluster(ctx, &file, output.as_deref()),
        Command::Reduce { file } => reduce(ctx, &file),
        Command::Gen {
            depth,
            branch,
            pattern,
            output,
            no_verify,
        } => gen(ctx, depth, branch, &pattern, output.as_deref(), no_verify),
        Command::Serve {
            port,
            host,
            data_dir,
            allow_origin,
        } => serve(ctx, &host, port, data_dir, allow_origin),
    }
}

fn load(ctx: &Ctx<'_>, path: &Path) -> Result<Alignment, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut a = parse_alignment(&text).map_err(|errs| {
        CliError::Parse(format!("{}: {} parse error(s)\n{}", path.display(), errs.len(), render_errors(&errs).trim_end()))
    })?;
    a.flags.coverage = ctx.coverage;
    Ok(a)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn print_json(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    writeln!(out, "{text}")?;
    Ok(())
}

fn articulation_line(a: &Alignment, index: usize) -> String {
    match a.articulation(index) {
        Some(art) => format!("[{index}] {art}"),
        None => format!("[{index}]"),
    }
}

fn check(ctx: &mut Ctx<'_>, file: &Path) -> Result<i32, CliError> {
    let a = load(ctx, file)?;
    if check_consistency(&a, &ctx.budget)?.consistent {
        if ctx.json {
            print_json(ctx.out, &json!({ "consistent": true }))?;
        } else {
            writeln!(ctx.out, "consistent")?;
        }
        return Ok(EXIT_OK);
    }
    let d = analysis::diagnose(&a, &ctx.budget)?;
    if ctx.json {
        print_json(ctx.out, &json!({ "consistent": false, "mus": d.mus }))?;
    } else {
        writeln!(ctx.out, "inconsistent")?;
        writeln!(ctx.out, "minimal conflict:")?;
        for &i in &d.mus {
            writeln!(ctx.out, "  {}", articulation_line(&a, i))?;
        }
    }
    Ok(EXIT_INCONSISTENT)
}

fn explain_prose(a: &Alignment, d: &Diagnosis) -> String {
    let mut s = String::from("The alignment is inconsistent.\nThese articulations cannot hold together:\n");
    for &i in &d.mus {
        s.push_str(&format!("  {}\n", articulation_line(a, i)));
    }
    if !d.structural_facts.is_empty() {
        s.push_str("given the taxonomy facts:\n");
        for f in &d.structural_facts {
            s.push_str(&format!("  {} is_a {}\n", f.child, f.parent));
        }
    }
    if d.repairs.is_empty() {
        s.push_str("No single removal restores consistency.\n");
    } else {
        s.push_str("Removing any one of these restores consistency:\n");
        for r in &d.repairs {
            for &i in &r.remove {
                s.push_str(&format!("  {}\n", articulation_line(a, i)));
            }
        }
    }
    if let Some(all) = &d.all_conflicts {
        let others: Vec<&Vec<usize>> = all.iter().filter(|c| **c != d.mus).collect();
        if !others.is_empty() {
            s.push_str("Other minimal conflicts:\n");
            for c in others {
                let items: Vec<String> = c.iter().map(|i| format!("[{i}]")).collect();
                s.push_str(&format!("  {}\n", items.join(" ")));
            }
        }
    }
    s
}

fn explain(ctx: &mut Ctx<'_>, file: &Path) -> Result<i32, CliError> {
    let a = load(ctx, file)?;
    if check_consistency(&a, &ctx.budget)?.consistent {
        if ctx.json {
            print_json(ctx.out, &json!({ "consistent": true }))?;
        } else {
            writeln!(ctx.out, "The alignment is consistent; there is nothing to explain.")?;
        }
        return Ok(EXIT_OK);
    }
    let d = analysis::diagnose(&a, &ctx.budget)?;
    if ctx.json {
        print_json(ctx.out, &d)?;
    } else {
        write!(ctx.out, "{}", explain_prose(&a, &d))?;
    }
    Ok(EXIT_INCONSISTENT)
}

fn all_worlds(ctx: &Ctx<'_>, a: &Alignment) -> Result<Vec<World>, CliError> {
    let e = enumerate_worlds(a, &ctx.budget)?;
    if e.truncated {
        return Err(CliError::WorldLimit(ctx.budget.max_worlds));
    }
    if e.worlds.is_empty() {
        return Err(CliError::Inconsistent);
    }
    Ok(e.worlds)
}

fn mir(ctx: &mut Ctx<'_>, file: &Path, provenance: Option<&str>) -> Result<i32, CliError> {
    let a = load(ctx, file)?;
    if let Some(spec) = provenance {
        return mir_provenance(ctx, &a, spec);
    }
    let table = analysis::mir(&all_worlds(ctx, &a)?)?;
    if ctx.json {
        print_json(ctx.out, &table)?;
    } else {
        write!(ctx.out, "{}", mir_to_csv(&table))?;
    }
    Ok(EXIT_OK)
}

/// `1.A,2.B` or `1.A,2.B,<mask>`; the mask defaults to the MIR entry.
fn mir_provenance(ctx: &mut Ctx<'_>, a: &Alignment, spec: &str) -> Result<i32, CliError> {
    let parts: Vec<&str> = spec.splitn(3, ',').map(str::trim).collect();
    let bad = || CliError::Usage(format!("expected `left,right[,mask]`, got `{spec}`"));
    if parts.len() < 2 {
        return Err(bad());
    }
    let left = taxoalign::ConceptRef::parse_key(parts[0]).ok_or_else(bad)?;
    let right = taxoalign::ConceptRef::parse_key(parts[1]).ok_or_else(bad)?;
    let mask = match parts.get(2) {
        Some(m) => RelationMask::from_str(m).map_err(|e| CliError::Usage(e.to_string()))?,
        None => {
            let table = analysis::mir(&all_worlds(ctx, a)?)?;
            table
                .entry(&left, &right)
                .ok_or_else(|| AnalysisError::UnknownPair(left.key(), right.key()))?
                .mask
        }
    };
    let support = analysis::mir_provenance(a, &left, &right, mask, &ctx.budget)?;
    if ctx.json {
        print_json(
            ctx.out,
            &json!({ "left": left, "right": right, "mask": mask, "articulations": support }),
        )?;
    } else {
        writeln!(ctx.out, "{left} {} {right} follows from:", mask.long_form())?;
        if support.is_empty() {
            writeln!(ctx.out, "  the taxonomies alone")?;
        }
        for i in support {
            writeln!(ctx.out, "  {}", articulation_line(a, i))?;
        }
    }
    Ok(EXIT_OK)
}

fn style_from(args: &StyleArgs) -> Result<RcgStyle, CliError> {
    let mut style = RcgStyle::default();
    for spec in &args.node_style {
        let bad = || CliError::Usage(format!("invalid --node-style `{spec}`"));
        let (kind, rest) = spec.split_once('=').ok_or_else(bad)?;
        let (shape, color) = rest.split_once(':').ok_or_else(bad)?;
        let slot = match kind {
            "merged" => &mut style.merged,
            "first" => &mut style.unique_first,
            "second" => &mut style.unique_second,
            _ => return Err(bad()),
        };
        *slot = (shape.to_string(), color.to_string());
    }
    for spec in &args.edge_color {
        let bad = || CliError::Usage(format!("invalid --edge-color `{spec}`"));
        match spec.split_once('=').ok_or_else(bad)? {
            ("input", c) => style.input_edge = c.to_string(),
            ("inferred", c) => style.inferred_edge = c.to_string(),
            _ => return Err(bad()),
        }
    }
    Ok(style)
}

fn worlds(
    ctx: &mut Ctx<'_>,
    file: &Path,
    limit: Option<usize>,
    output: Option<&Path>,
    style: &StyleArgs,
) -> Result<i32, CliError> {
    let style = style_from(style)?;
    let a = load(ctx, file)?;
    let budget = match limit {
        Some(n) => ctx.budget.with_max_worlds(n),
        None => ctx.budget,
    };
    let e = enumerate_worlds(&a, &budget)?;
    if e.worlds.is_empty() {
        writeln!(ctx.err, "the alignment is inconsistent; run `explain` for details")?;
        return Ok(EXIT_INCONSISTENT);
    }
    if e.truncated {
        writeln!(ctx.err, "warning: stopped after {} worlds", e.worlds.len())?;
        if limit.is_none() {
            return Err(CliError::WorldLimit(budget.max_worlds));
        }
    }
    match output {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| CliError::Write {
                path: dir.to_path_buf(),
                source,
            })?;
            let text = serde_json::to_string_pretty(&e).expect("serializable") + "\n";
            write_file(&dir.join("worlds.json"), &text)?;
            for w in &e.worlds {
                let dot = rcg_to_dot_styled(&build_rcg(w, &a)?, &style);
                write_file(&dir.join(format!("world_{}.dot", w.id)), &dot)?;
            }
            if !ctx.json {
                writeln!(ctx.out, "{} world(s) written to {}", e.worlds.len(), dir.display())?;
            } else {
                print_json(ctx.out, &json!({ "worlds": e.worlds.len(), "truncated": e.truncated }))?;
            }
        }
        None if ctx.json => print_json(ctx.out, &e)?,
        None => {
            for w in &e.worlds {
                writeln!(ctx.out, "world {}:", w.id)?;
                for p in &w.relations {
                    writeln!(ctx.out, "  {} {} {}", p.left, p.relation.symbol(), p.right)?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}

fn cluster(ctx: &mut Ctx<'_>, file: &Path, output: Option<&Path>) -> Result<i32, CliError> {
    let a = load(ctx, file)?;
    let c = cluster_worlds(&all_worlds(ctx, &a)?)?;
    match output {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| CliError::Write {
                path: dir.to_path_buf(),
                source,
            })?;
            write_file(&dir.join("distances.csv"), &c.matrix_csv)?;
            write_file(&dir.join("cluster.dot"), &c.dot)?;
        }
        None if ctx.json => print_json(ctx.out, &c)?,
        None => write!(ctx.out, "{}\n{}", c.matrix_csv, c.dot)?,
    }
    Ok(EXIT_OK)
}

fn reduce(ctx: &mut Ctx<'_>, file: &Path) -> Result<i32, CliError> {
    let a = load(ctx, file)?;
    let mut session = ReductionSession::new(all_worlds(ctx, &a)?);
    let mut line = String::new();
    while let Some(q) = session.next_question() {
        writeln!(ctx.out, "{} possible worlds remain.", session.surviving.len())?;
        writeln!(ctx.out, "Which relation holds between {} and {}?", q.left, q.right)?;
        for (i, c) in q.candidates.iter().enumerate() {
            writeln!(
                ctx.out,
                "  {}) {} {} {}  ({} world{})",
                i + 1,
                q.left,
                c.mask,
                q.right,
                c.surviving,
                if c.surviving == 1 { "" } else { "s" }
            )?;
        }
        writeln!(ctx.out, "  q) stop")?;
        write!(ctx.out, "> ")?;
        ctx.out.flush()?;
        line.clear();
        if ctx.input.read_line(&mut line)? == 0 {
            writeln!(ctx.out)?;
            break;
        }
        let reply = line.trim();
        if reply == "q" {
            break;
        }
        let mask = match reply.parse::<usize>() {
            Ok(n) if (1..=q.candidates.len()).contains(&n) => q.candidates[n - 1].mask,
            _ => match reply.parse::<RelationMask>() {
                Ok(m) => m,
                Err(_) => {
                    writeln!(ctx.out, "Please pick one of the numbers or type a relation.")?;
                    continue;
                }
            },
        };
        match session.apply_answer(&q.left, &q.right, mask) {
            Ok(()) => {}
            Err(AnalysisError::NoMatchingWorld) => writeln!(ctx.out, "No possible world matches this choice.")?,
            Err(e) => writeln!(ctx.out, "{e}")?,
        }
    }
    let left = session.surviving.len();
    writeln!(ctx.out, "{left} possible world{} remain{}.", if left == 1 { "" } else { "s" }, if left == 1 { "s" } else { "" })?;
    if let [only] = session.surviving.as_slice() {
        let w = &session.worlds[*only];
        writeln!(ctx.out, "world {}:", w.id)?;
        for p in &w.relations {
            writeln!(ctx.out, "  {} {} {}", p.left, p.relation.symbol(), p.right)?;
        }
    }
    Ok(EXIT_OK)
}

fn gen(
    ctx: &mut Ctx<'_>,
    depth: u32,
    branch: u32,
    pattern: &str,
    output: Option<&Path>,
    no_verify: bool,
) -> Result<i32, CliError> {
    let pattern: Pattern = pattern.parse()?;
    let mut a = synth::generate_synthetic(depth, branch, pattern, ctx.seed)?;
    a.flags.coverage = ctx.coverage;
    if !no_verify {
        synth::verify_single_world(&a, &ctx.budget)?;
    }
    let text = serialize_alignment(&a);
    match output {
        Some(path) => write_file(path, &text)?,
        None => write!(ctx.out, "{text}")?,
    }
    Ok(EXIT_OK)
}

fn serve(
    ctx: &mut Ctx<'_>,
    host: &str,
    port: u16,
    data_dir: Option<PathBuf>,
    allow_origin: Option<String>,
) -> Result<i32, CliError> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid address {host}:{port}")))?;
    let config = taxoalign_service::ServiceConfig {
        data_dir,
        budget: ctx.budget,
        job_wait: Duration::from_secs(2),
        allow_origin,
    };
    writeln!(ctx.err, "listening on http://{addr}")?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(taxoalign_service::serve(config, addr))?;
    Ok(EXIT_OK)
}
