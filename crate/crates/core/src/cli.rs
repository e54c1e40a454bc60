//! Command-line front end: run analyses on CDL/MDL files and emit JSON
//! verdicts, SVG renderings and PGM rasters.
//!
//! Exit codes: 0 pass/success, 1 analysis-level violation, 2 input error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::analysis::{declared_limits, detect_theta, numeric_limit_scan, ThetaConfig};
use crate::cdl::{parse_compactum, parse_map, print_compactum, CompactumSpec};
use crate::dynamics::{build_system, codomain_depth, induced_map, verify_equivariance, verify_semiconjugacy};
use crate::geometry::Scalar;
use crate::raster::{check_unshielded, raster_hull};
use crate::relations::{
    check_fs_at_scale, class_graph, collapse_continuum, collapse_thin_teeth, comp_relation,
    fs_relation, quotient_metric, refines, verify_collapse, CollapseCheck, Partition,
};
use crate::render::render_svg;
use crate::truncation::{truncate, Depth, TruncateOptions, TruncatedCompactum};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser)]
#[command(name = "fsmodel", version, about = "Finite-scale finitely Suslinian models of planar compacta")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// CDL source file.
    input: PathBuf,
    /// Depth parameters N,K[,k]: integer bound, dyadic denominator exponent,
    /// word length.
    #[arg(long, default_value = "4,4,4", value_name = "N,K[,k]")]
    depth: String,
    /// Atom granularity.
    #[arg(long, default_value = "1/16", value_name = "p/q")]
    atom_delta: String,
    /// Instantiate zero-depth families empty instead of failing.
    #[arg(long)]
    allow_empty: bool,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write the JSON report here.
    #[arg(long, value_name = "path")]
    json: Option<PathBuf>,
    /// Write an SVG rendering here.
    #[arg(long, value_name = "path")]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a CDL file and print its canonical form.
    Parse {
        input: PathBuf,
        #[arg(long, value_name = "path")]
        json: Option<PathBuf>,
    },
    /// List declared limit continua and scan for undeclared candidates.
    Limits {
        #[command(flatten)]
        input: InputArgs,
        /// Scan threshold diameter.
        #[arg(long, default_value = "1/2", value_name = "p/q[,p/q...]")]
        eps: String,
        /// Scan chain length.
        #[arg(long, default_value = "4", value_name = "k")]
        count: usize,
        #[arg(long, value_name = "path")]
        json: Option<PathBuf>,
    },
    /// Search for a θ-configuration; exits 1 when one is found.
    Theta {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_name = "path")]
        json: Option<PathBuf>,
    },
    /// Decide unshieldedness at raster resolution; exits 1 when shielded.
    Unshielded {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "1/64", value_name = "p/q")]
        raster_delta: String,
        #[arg(long, value_name = "path")]
        json: Option<PathBuf>,
        /// Write the raster decomposition as PGM (P2).
        #[arg(long, value_name = "path")]
        pgm: Option<PathBuf>,
    },
    /// Topological hull of selected pieces' atoms at raster resolution.
    Hull {
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated piece labels (e.g. H,Hn:2,V:1/2).
        #[arg(long, value_name = "labels")]
        pieces: String,
        #[arg(long, default_value = "1/64", value_name = "p/q")]
        raster_delta: String,
        #[arg(long, value_name = "path")]
        json: Option<PathBuf>,
        #[arg(long, value_name = "path")]
        pgm: Option<PathBuf>,
    },
    /// Compute a quotient partition and report its classes.
    Quotient {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "fs", value_name = "fs|comp|h|phi:N|identity|file.json")]
        relation: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare two partitions in the refinement order.
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_name = "relation")]
        left: String,
        #[arg(long, value_name = "relation")]
        right: String,
        #[arg(long, value_name = "path")]
        json: Option<PathBuf>,
    },
    /// Finitely-Suslinian check of a quotient at scale (ε, k); exits 1 on
    /// violation.
    Check {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "fs", value_name = "relation")]
        relation: String,
        /// ε grid.
        #[arg(long, default_value = "1/2,1/4,1/8", value_name = "p/q[,p/q...]")]
        eps: String,
        /// Disjoint-member threshold standing in for "infinitely many".
        #[arg(long, default_value = "8", value_name = "k")]
        count: usize,
        /// Also verify that every nondegenerate limit continuum collapses.
        #[arg(long)]
        fs: bool,
        #[arg(long, value_name = "path")]
        json: Option<PathBuf>,
    },
    /// Verify map equivariance and the induced quotient map; exits 1 on
    /// violation.
    Dynamics {
        #[command(flatten)]
        input: InputArgs,
        /// MDL source file.
        #[arg(long, value_name = "file.mdl")]
        map: PathBuf,
        #[arg(long, default_value = "fs", value_name = "relation")]
        relation: String,
        #[arg(long, value_name = "path")]
        json: Option<PathBuf>,
    },
    /// Render the truncation with classes colored.
    Render {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "fs", value_name = "relation")]
        relation: String,
        #[arg(long, value_name = "path")]
        svg: PathBuf,
    },
}

struct CliFailure {
    code: i32,
    message: String,
}

fn input_error(message: impl Into<String>) -> CliFailure {
    CliFailure { code: EXIT_INPUT, message: message.into() }
}

type CliResult = Result<i32, CliFailure>;

pub fn run_from_env() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    run(&args)
}

pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success exits.
            let code = if e.exit_code() == 0 { 0 } else { EXIT_INPUT };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("fsmodel: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.cmd {
        Cmd::Parse { input, json } => cmd_parse(&input, json.as_deref()),
        Cmd::Limits { input, eps, count, json } => cmd_limits(&input, &eps, count, json.as_deref()),
        Cmd::Theta { input, json } => cmd_theta(&input, json.as_deref()),
        Cmd::Unshielded { input, raster_delta, json, pgm } => {
            cmd_unshielded(&input, &raster_delta, json.as_deref(), pgm.as_deref())
        }
        Cmd::Hull { input, pieces, raster_delta, json, pgm } => {
            cmd_hull(&input, &pieces, &raster_delta, json.as_deref(), pgm.as_deref())
        }
        Cmd::Quotient { input, relation, out } => cmd_quotient(&input, &relation, &out),
        Cmd::Compare { input, left, right, json } => {
            cmd_compare(&input, &left, &right, json.as_deref())
        }
        Cmd::Check { input, relation, eps, count, fs, json } => {
            cmd_check(&input, &relation, &eps, count, fs, json.as_deref())
        }
        Cmd::Dynamics { input, map, relation, json } => {
            cmd_dynamics(&input, &map, &relation, json.as_deref())
        }
        Cmd::Render { input, relation, svg } => cmd_render(&input, &relation, &svg),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn read_file(path: &Path) -> Result<String, CliFailure> {
    std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

fn parse_scalar(text: &str, what: &str) -> Result<Scalar, CliFailure> {
    let v = Scalar::parse(text).map_err(|e| input_error(format!("invalid {what}: {e}")))?;
    if !v.is_positive() {
        return Err(input_error(format!("{what} must be positive")));
    }
    Ok(v)
}

fn parse_eps_grid(text: &str) -> Result<Vec<Scalar>, CliFailure> {
    text.split(',')
        .map(|s| parse_scalar(s.trim(), "eps"))
        .collect()
}

fn parse_depth(text: &str) -> Result<Depth, CliFailure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(input_error("depth must be N,K or N,K,k"));
    }
    let parse = |s: &str| -> Result<u32, CliFailure> {
        s.parse().map_err(|_| input_error(format!("invalid depth component {s:?}")))
    };
    let n = parse(parts[0])?;
    let k = parse(parts[1])?;
    let w = if parts.len() == 3 { parse(parts[2])? } else { 0 };
    Ok(Depth::new(n, k, w))
}

fn load_truncation(args: &InputArgs) -> Result<(CompactumSpec, TruncatedCompactum), CliFailure> {
    let source = read_file(&args.input)?;
    let spec = parse_compactum(&source).map_err(|e| input_error(e.to_string()))?;
    let depth = parse_depth(&args.depth)?;
    let delta = parse_scalar(&args.atom_delta, "atom-delta")?;
    let t = truncate(
        &spec,
        depth,
        &delta,
        TruncateOptions { allow_empty: args.allow_empty },
    )
    .map_err(|e| input_error(e.to_string()))?;
    Ok((spec, t))
}

fn build_partition(t: &TruncatedCompactum, name: &str) -> Result<Partition, CliFailure> {
    let p = match name {
        "fs" => fs_relation(t).map_err(|e| input_error(e.to_string()))?,
        "comp" => comp_relation(t).map_err(|e| input_error(e.to_string()))?,
        "identity" => Partition::identity(t),
        "h" => collapse_continuum(t, "H").map_err(|e| input_error(e.to_string()))?,
        other => {
            if let Some(n) = other.strip_prefix("phi:") {
                let n: u32 = n
                    .parse()
                    .map_err(|_| input_error(format!("invalid phi denominator {n:?}")))?;
                collapse_thin_teeth(t, n).map_err(|e| input_error(e.to_string()))?
            } else if other.ends_with(".json") {
                let text = read_file(Path::new(other))?;
                let value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| input_error(format!("invalid partition JSON: {e}")))?;
                // Accept both bare partition objects and full quotient
                // reports as produced by the quotient subcommand.
                let value = value
                    .pointer("/report/partition")
                    .or_else(|| value.pointer("/partition"))
                    .unwrap_or(&value);
                Partition::from_json(t, value).map_err(|e| input_error(e.to_string()))?
            } else {
                return Err(input_error(format!(
                    "unknown relation {other:?}; expected fs|comp|h|phi:N|identity|file.json"
                )));
            }
        }
    };
    Ok(p)
}

/// Atomic write: temp file in the target directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliFailure> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        )),
        None => PathBuf::from(format!(".{}.tmp", path.display())),
    };
    let mut f = std::fs::File::create(&tmp)
        .map_err(|e| input_error(format!("cannot create {}: {e}", tmp.display())))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| input_error(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| input_error(format!("cannot move into place {}: {e}", path.display())))?;
    Ok(())
}

fn emit_json(path: Option<&Path>, value: &serde_json::Value) -> Result<(), CliFailure> {
    let text = format!("{}\n", serde_json::to_string_pretty(value).expect("serializable"));
    match path {
        Some(p) => write_atomic(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_parse(input: &Path, json: Option<&Path>) -> CliResult {
    let source = read_file(input)?;
    let spec = parse_compactum(&source).map_err(|e| input_error(e.to_string()))?;
    print!("{}", print_compactum(&spec));
    if json.is_some() {
        let value = json!({
            "name": spec.name,
            "continua": spec.continua.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
            "families": spec.families.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
        });
        emit_json(json, &value)?;
    }
    Ok(EXIT_PASS)
}

fn cmd_limits(input: &InputArgs, eps: &str, count: usize, json: Option<&Path>) -> CliResult {
    let (_, t) = load_truncation(input)?;
    let eps = parse_eps_grid(eps)?;
    let limits = declared_limits(&t);
    let scan = if count >= 3 {
        numeric_limit_scan(&t, &eps[0], count)
    } else {
        Vec::new()
    };
    let value = json!({
        "declared": limits.iter().map(|l| json!({
            "label": l.label(),
            "family": l.family,
            "nondegenerate": l.nondegenerate,
            "witness": l.witness_params.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "scan": scan.iter().map(|c| json!({
            "witness": c.witness,
        })).collect::<Vec<_>>(),
    });
    emit_json(json, &value)?;
    Ok(EXIT_PASS)
}

fn cmd_theta(input: &InputArgs, json: Option<&Path>) -> CliResult {
    let (_, t) = load_truncation(input)?;
    let witness = detect_theta(&t, ThetaConfig::default());
    let value = match &witness {
        Some(w) => json!({
            "theta": true,
            "x1": w.x1_pieces,
            "x2": w.x2_pieces,
            "connectors": w.connector_pieces,
        }),
        None => json!({ "theta": false }),
    };
    emit_json(json, &value)?;
    Ok(if witness.is_some() { EXIT_VIOLATION } else { EXIT_PASS })
}

fn cmd_unshielded(
    input: &InputArgs,
    raster_delta: &str,
    json: Option<&Path>,
    pgm: Option<&Path>,
) -> CliResult {
    let (_, t) = load_truncation(input)?;
    let delta = parse_scalar(raster_delta, "raster-delta")?;
    let report = check_unshielded(&t, &delta);
    let value = json!({
        "unshielded": report.unshielded,
        "resolution": delta.to_string(),
        "resolution_warning": report.resolution_warning,
        "witness_cell": report.shielded_witness,
    });
    emit_json(json, &value)?;
    if let Some(p) = pgm {
        write_atomic(p, &report.raster.to_pgm())?;
    }
    Ok(if report.unshielded { EXIT_PASS } else { EXIT_VIOLATION })
}

fn cmd_hull(
    input: &InputArgs,
    pieces: &str,
    raster_delta: &str,
    json: Option<&Path>,
    pgm: Option<&Path>,
) -> CliResult {
    let (_, t) = load_truncation(input)?;
    let delta = parse_scalar(raster_delta, "raster-delta")?;
    let mut atoms = Vec::new();
    for label in pieces.split(',').map(str::trim) {
        let piece = t
            .piece_by_label(label)
            .ok_or_else(|| input_error(format!("no piece labeled {label:?}")))?;
        atoms.extend(t.piece_atoms[piece.id as usize].iter().copied());
    }
    if atoms.is_empty() || !t.atom_set_connected(&atoms) {
        return Err(input_error("hull selection must be a nonempty connected atom set"));
    }
    let hull = raster_hull(&t, &atoms, &delta);
    let enclosed = hull
        .cells
        .iter()
        .filter(|&&(c, r)| hull.raster.label(c, r) == crate::raster::CellLabel::BoundedComplement)
        .count();
    let value = json!({
        "cells": hull.cells.len(),
        "enclosed_cells": enclosed,
        "resolution": delta.to_string(),
    });
    emit_json(json, &value)?;
    if let Some(p) = pgm {
        write_atomic(p, &hull.raster.to_pgm())?;
    }
    Ok(EXIT_PASS)
}

fn partition_report(t: &TruncatedCompactum, p: &Partition) -> serde_json::Value {
    let graph = class_graph(p);
    json!({
        "atoms": t.atoms.len(),
        "classes": p.class_count(),
        "nondegenerate": p
            .classes()
            .filter(|(_, c)| c.geometry.diameter() > t.delta)
            .map(|(rep, c)| json!({
                "class": rep,
                "atoms": c.atoms.len(),
                "diameter": c.geometry.diameter().to_string(),
            }))
            .collect::<Vec<_>>(),
        "class_graph_edges": graph.edges.len(),
        "partition": p.to_json(),
    })
}

fn cmd_quotient(input: &InputArgs, relation: &str, out: &OutputArgs) -> CliResult {
    let (_, t) = load_truncation(input)?;
    let p = build_partition(&t, relation)?;
    let value = json!({
        "relation": relation,
        "report": partition_report(&t, &p),
    });
    emit_json(out.json.as_deref(), &value)?;
    if let Some(svg) = &out.svg {
        write_atomic(svg, &render_svg(&t, &p))?;
    }
    Ok(EXIT_PASS)
}

fn cmd_compare(input: &InputArgs, left: &str, right: &str, json: Option<&Path>) -> CliResult {
    let (_, t) = load_truncation(input)?;
    let pl = build_partition(&t, left)?;
    let pr = build_partition(&t, right)?;
    let l_fine = refines(&pl, &pr).map_err(|e| input_error(e.to_string()))?;
    let r_fine = refines(&pr, &pl).map_err(|e| input_error(e.to_string()))?;
    let verdict = match (l_fine, r_fine) {
        (true, true) => "equal",
        (true, false) => "left-finer",
        (false, true) => "right-finer",
        (false, false) => "incomparable",
    };
    println!("{verdict}");
    let value = json!({
        "left": left,
        "right": right,
        "verdict": verdict,
    });
    if json.is_some() {
        emit_json(json, &value)?;
    }
    Ok(EXIT_PASS)
}

fn worker_count(jobs: usize) -> usize {
    match std::env::var("FSMODEL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n >= 1 => n.min(jobs),
        _ => jobs.max(1),
    }
}

fn cmd_check(
    input: &InputArgs,
    relation: &str,
    eps: &str,
    count: usize,
    fs_flag: bool,
    json: Option<&Path>,
) -> CliResult {
    let (_, t) = load_truncation(input)?;
    if count < 3 {
        return Err(input_error("count must be at least 3"));
    }
    let eps_grid = parse_eps_grid(eps)?;
    let p = build_partition(&t, relation)?;
    let qm = quotient_metric(&t, &p);

    // Independent ε values evaluate on worker threads; results are joined in
    // grid order so output bytes never depend on scheduling.
    let workers = worker_count(eps_grid.len());
    let mut reports: Vec<Option<crate::relations::QuotientReport>> = Vec::new();
    reports.resize_with(eps_grid.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<crate::relations::QuotientReport>>> =
        (0..eps_grid.len()).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= eps_grid.len() {
                    break;
                }
                let report = check_fs_at_scale(&t, &p, &qm, &eps_grid[i], count);
                *slots[i].lock().unwrap() = Some(report);
            });
        }
    });
    for (i, slot) in slots.into_iter().enumerate() {
        reports[i] = slot.into_inner().unwrap();
    }
    let reports: Vec<crate::relations::QuotientReport> =
        reports.into_iter().map(|r| r.expect("worker filled slot")).collect();

    let collapse = if fs_flag {
        Some(verify_collapse(&t, &p))
    } else {
        None
    };
    let collapse_pass = !matches!(collapse, Some(CollapseCheck::Violation { .. }));
    let pass = reports.iter().all(|r| r.pass) && collapse_pass;
    let value = json!({
        "relation": relation,
        "k": count,
        "pass": pass,
        "checks": reports.iter().map(|r| json!({
            "epsilon": r.epsilon.to_string(),
            "pass": r.pass,
            "classes": r.class_count,
            "violations": r.violations.iter().map(|v| json!({
                "family": v.family,
                "witness": v.witness,
                "diameters": v.diameters.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "collapse": collapse.as_ref().map(|c| match c {
            CollapseCheck::Pass => json!({ "pass": true }),
            CollapseCheck::Violation { limit, classes } => json!({
                "pass": false,
                "limit": limit,
                "classes": classes,
            }),
        }),
    });
    emit_json(json, &value)?;
    Ok(if pass { EXIT_PASS } else { EXIT_VIOLATION })
}

fn cmd_dynamics(
    input: &InputArgs,
    map_path: &Path,
    relation: &str,
    json: Option<&Path>,
) -> CliResult {
    let (spec, dom) = load_truncation(input)?;
    let map_source = read_file(map_path)?;
    let map = parse_map(&map_source, &spec).map_err(|e| input_error(e.to_string()))?;
    let depth = parse_depth(&input.depth)?;
    let cod_depth = codomain_depth(&map, depth).map_err(|e| input_error(e.to_string()))?;
    let delta = parse_scalar(&input.atom_delta, "atom-delta")?;
    let cod = truncate(
        &spec,
        cod_depth,
        &delta,
        TruncateOptions { allow_empty: input.allow_empty },
    )
    .map_err(|e| input_error(e.to_string()))?;
    let system = build_system(&map, &dom, &cod).map_err(|e| input_error(e.to_string()))?;
    let p_dom = build_partition(&dom, relation)?;
    let p_cod = build_partition(&cod, relation)?;
    let report = verify_equivariance(&system, &p_dom, &p_cod);
    let mut value = json!({
        "map": map.name,
        "relation": relation,
        "equivariant": report.pass,
        "into_violations": report.into_violations.len(),
        "onto_violations": report.onto_violations.len(),
    });
    if report.pass {
        let im = induced_map(&system, &p_dom, &p_cod).expect("equivariance verified");
        let semi = verify_semiconjugacy(&system, &p_dom, &p_cod, &im, None);
        value["induced"] = im.to_json();
        value["semiconjugate"] = json!(semi.is_ok());
        emit_json(json, &value)?;
        Ok(if semi.is_ok() { EXIT_PASS } else { EXIT_VIOLATION })
    } else {
        emit_json(json, &value)?;
        Ok(EXIT_VIOLATION)
    }
}

fn cmd_render(input: &InputArgs, relation: &str, svg: &Path) -> CliResult {
    let (_, t) = load_truncation(input)?;
    let p = build_partition(&t, relation)?;
    write_atomic(svg, &render_svg(&t, &p))?;
    Ok(EXIT_PASS)
}
