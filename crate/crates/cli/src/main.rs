use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use cmcface::expr::{parse, Puncture, Tape};
use cmcface::gallery::{self, VerifyOptions};
use cmcface::mink::Mat2;
use cmcface::monodromy::{completeness_probe, end_classify, Accumulation, CompletenessReport, EndOptions, DEFAULT_STEPS};
use cmcface::osserman::global_report;
use cmcface::spec::SurfaceSpec;
use cmcface::su11::{classify_with, conjugator, CLASSIFY_TOL, TRACE_TOL};
use cmcface::surface::export::{atomic_write, build_mesh, to_obj, to_ply, to_svg, MeshOptions};
use cmcface::surface::{trace_singular_set, SectorSet, TraceOptions};

#[derive(Parser)]
#[command(name = "cmcface", version, about = "CMC-1 faces in de Sitter 3-space")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecArg {
    /// A JSON spec file, or `gallery:NAME`.
    spec: String,
}

#[derive(Args)]
struct LoopArgs {
    /// Loop radius in the local coordinate (default: half the distance to the nearest other puncture, at most 0.5).
    #[arg(long)]
    radius: Option<f64>,
    /// Integration steps around each loop.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshFormat {
    Obj,
    Ply,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the face and optionally write a mesh.
    Build {
        #[command(flatten)]
        spec: SpecArg,
        /// Grid size as `N1,N2` (default: the spec's resolution).
        #[arg(long, value_parser = parse_resolution)]
        resolution: Option<[usize; 2]>,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "obj")]
        format: MeshFormat,
        /// Leave out cells that straddle the singular set.
        #[arg(long)]
        skip_singular: bool,
    },
    /// Classify every declared end.
    Ends {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        looping: LoopArgs,
        /// Also probe completeness along rays.
        #[arg(long)]
        completeness: bool,
    },
    /// Monodromy and end report for one puncture.
    Monodromy {
        #[command(flatten)]
        spec: SpecArg,
        /// Index into the spec's punctures.
        #[arg(long, default_value_t = 0)]
        puncture: usize,
        #[command(flatten)]
        looping: LoopArgs,
    },
    /// Trace the singular set `|g| = 1` over the spec's window.
    Singular {
        #[command(flatten)]
        spec: SpecArg,
        /// Marching-squares grid size (default: the larger spec resolution).
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Osserman-type inequality, local orders and windings.
    Osserman {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Classify a matrix of SU(1,1), given by four complex entries such as `0.5+2i`.
    #[command(name = "classify-su11", allow_negative_numbers = true)]
    ClassifySu11 {
        a11: String,
        a12: String,
        a21: String,
        a22: String,
        /// Relative tolerance for SU(1,1) membership.
        #[arg(long, default_value_t = CLASSIFY_TOL)]
        tol: f64,
    },
    /// Built-in examples.
    Gallery {
        #[command(subcommand)]
        action: GalleryAction,
    },
}

#[derive(Subcommand)]
enum GalleryAction {
    /// Names of the built-in entries.
    List,
    /// Print an entry's spec as JSON.
    Emit {
        name: String,
        /// Write to this file instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Emit the entry together with its expected results.
        #[arg(long)]
        expected: bool,
    },
    /// Run every entry's comparisons (or only the named ones).
    Verify {
        names: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print one JSON object per check.
        #[arg(long)]
        json: bool,
    },
}

/// Failure with its exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Spec(String),
    Numeric(String),
    Mismatch(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Spec(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Mismatch(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Spec(m) | Failure::Numeric(m) | Failure::Mismatch(m) => m,
        }
    }
}

fn numeric(e: impl std::fmt::Display) -> Failure {
    Failure::Numeric(e.to_string())
}

fn parse_resolution(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s.split_once([',', 'x']).unwrap_or((s, s));
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")).and_then(|v| if v == 0 { Err("resolution must be positive".into()) } else { Ok(v) });
    Ok([n(a)?, n(b)?])
}

fn load_spec(arg: &str) -> Result<SurfaceSpec, Failure> {
    if let Some(name) = arg.strip_prefix("gallery:") {
        return gallery::entry(name).map(|e| e.spec).map_err(|e| Failure::Spec(e.to_string()));
    }
    let text = std::fs::read_to_string(arg).map_err(|e| Failure::Spec(format!("{arg}: {e}")))?;
    SurfaceSpec::from_json(&text).map_err(|e| Failure::Spec(format!("{arg}: {e}")))
}

fn parse_complex(s: &str) -> Result<Complex64, Failure> {
    let e = parse(s).map_err(|e| Failure::Usage(format!("{s:?}: {e}")))?;
    if !e.is_constant() {
        return Err(Failure::Usage(format!("{s:?} is not a constant")));
    }
    let v = Tape::new(std::slice::from_ref(&e)).eval_fresh(Complex64::new(0.0, 0.0)).map_err(|e| Failure::Usage(format!("{s:?}: {e}")))?;
    v.0[0].c().ok_or_else(|| Failure::Usage(format!("{s:?} is infinite")))
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    atomic_write(path, text.as_bytes()).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(v: &Value) {
    emit(&(serde_json::to_string_pretty(v).expect("json values serialize") + "\n"));
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn end_options(l: &LoopArgs) -> Result<EndOptions, Failure> {
    if let Some(r) = l.radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Failure::Usage(format!("--radius must be positive (got {r})")));
        }
    }
    Ok(EndOptions {
        radius: l.radius,
        steps: l.steps,
        ..Default::default()
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Build {
            spec,
            resolution,
            mesh,
            format,
            skip_singular,
        } => {
            let spec = load_spec(&spec.spec)?;
            let face = spec.face().map_err(|e| Failure::Spec(e.to_string()))?;
            let [n1, n2] = resolution.unwrap_or(spec.domain.resolution);
            let m = build_mesh(
                &face,
                &spec.domain.window,
                n1,
                n2,
                MeshOptions {
                    skip_singular_cells: skip_singular,
                    ..Default::default()
                },
            )
            .map_err(numeric)?;
            if let Some(path) = &mesh {
                let text = match format {
                    MeshFormat::Obj => to_obj(&m),
                    MeshFormat::Ply => to_ply(&m),
                };
                write_out(path, &text)?;
            }
            let worst = m.vertices.iter().map(|v| v.raw.de_sitter_residual()).fold(0.0, f64::max);
            print_json(&json!({
                "name": spec.name,
                "resolution": [n1, n2],
                "vertices": m.vertices.len(),
                "projected": m.projected_count(),
                "triangles": m.triangles.len(),
                "max_de_sitter_residual": worst,
                "mesh": mesh,
            }));
        }
        Command::Ends {
            spec,
            looping,
            completeness,
        } => {
            let opts = end_options(&looping)?;
            let spec = load_spec(&spec.spec)?;
            let face = spec.face().map_err(|e| Failure::Spec(e.to_string()))?;
            let obstacles = spec.obstacles();
            let mut out = Vec::new();
            let reports: Vec<_> = spec.punctures().par_iter().map(|p| end_classify(&face, p, &obstacles, &opts)).collect();
            for (p, r) in spec.punctures().iter().zip(reports) {
                let r = r.map_err(numeric)?;
                let mut v = to_value(&r);
                if completeness {
                    let c: CompletenessReport = if spec.flags.horosphere {
                        CompletenessReport::by_definition()
                    } else {
                        completeness_probe(&face, p, &obstacles, 6, looping.radius).map_err(numeric)?
                    };
                    v["completeness"] = to_value(&c);
                }
                out.push(v);
            }
            print_json(&Value::Array(out));
        }
        Command::Monodromy { spec, puncture, looping } => {
            let opts = end_options(&looping)?;
            let spec = load_spec(&spec.spec)?;
            let ps = spec.punctures();
            let p = ps
                .get(puncture)
                .ok_or_else(|| Failure::Usage(format!("puncture index {puncture} out of range (spec has {})", ps.len())))?;
            let face = spec.face().map_err(|e| Failure::Spec(e.to_string()))?;
            let r = end_classify(&face, p, &spec.obstacles(), &opts).map_err(numeric)?;
            print_json(&to_value(&r));
        }
        Command::Singular { spec, resolution, svg } => {
            let spec = load_spec(&spec.spec)?;
            let face = spec.face().map_err(|e| Failure::Spec(e.to_string()))?;
            let n = resolution.unwrap_or(spec.domain.resolution[0].max(spec.domain.resolution[1]));
            if n == 0 {
                return Err(Failure::Usage("--resolution must be positive".into()));
            }
            // overlay the sector set of the first finite end whose singular set accumulates in sectors
            let obstacles = spec.obstacles();
            let mut overlay = None;
            for p in spec.punctures() {
                let Puncture::Finite(c) = p else { continue };
                if let Ok(r) = end_classify(&face, &p, &obstacles, &EndOptions::default()) {
                    if let Accumulation::Sectors { m, delta, .. } = r.accumulation {
                        overlay = Some((c, SectorSet { m, eps: 0.2, delta }, r.monodromy.radius));
                        break;
                    }
                }
            }
            let curves = trace_singular_set(
                &face,
                &spec.domain.window,
                n,
                &TraceOptions {
                    sectors: overlay,
                    ..Default::default()
                },
            )
            .map_err(numeric)?;
            if let Some(path) = &svg {
                write_out(path, &to_svg(&curves, &spec.domain.window, overlay))?;
            }
            let summary: Vec<Value> = curves
                .iter()
                .map(|c| {
                    json!({
                        "points": c.points.len(),
                        "closed": c.closed,
                        "max_residual": c.max_residual,
                        "annotation": to_value(&c.annotation),
                    })
                })
                .collect();
            print_json(&json!({
                "name": spec.name,
                "resolution": n,
                "curves": summary,
                "sectors": overlay.map(|(c, s, r)| json!({"center": [c.re, c.im], "set": to_value(&s), "radius": r})),
                "svg": svg,
            }));
        }
        Command::Osserman { spec, seed } => {
            let spec = load_spec(&spec.spec)?;
            let face = spec.face().map_err(|e| Failure::Spec(e.to_string()))?;
            let obstacles = spec.obstacles();
            let ends = spec
                .punctures()
                .iter()
                .map(|p| end_classify(&face, p, &obstacles, &EndOptions::default()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(numeric)?;
            let r = global_report(&face, spec.genus, spec.flags.complete, &ends, seed).map_err(numeric)?;
            let consistent = r.consistent;
            print_json(&to_value(&r));
            if !consistent {
                return Err(Failure::Mismatch("declared complete, but the inequality is violated".into()));
            }
        }
        Command::ClassifySu11 { a11, a12, a21, a22, tol } => {
            if !(tol > 0.0) {
                return Err(Failure::Usage(format!("--tol must be positive (got {tol})")));
            }
            let a = Mat2::new(parse_complex(&a11)?, parse_complex(&a12)?, parse_complex(&a21)?, parse_complex(&a22)?);
            let class = classify_with(&a, tol, TRACE_TOL).map_err(numeric)?;
            let witness = conjugator(&a).ok().map(|(w, _, canon)| json!({"p": to_value(&w.p), "residual": w.residual, "canonical": to_value(&canon)}));
            print_json(&json!({
                "class": to_value(&class),
                "name": class.name(),
                "witness": witness,
            }));
        }
        Command::Gallery { action } => match action {
            GalleryAction::List => {
                for e in gallery::gallery() {
                    emit(&format!("{:<22} {}\n", e.spec.name, e.description));
                }
            }
            GalleryAction::Emit { name, out, expected } => {
                let e = gallery::entry(&name).map_err(|e| Failure::Spec(e.to_string()))?;
                let text = if expected {
                    serde_json::to_string_pretty(&e).expect("entries serialize") + "\n"
                } else {
                    e.spec.to_json()
                };
                match out {
                    Some(p) => write_out(&p, &text)?,
                    None => emit(&text),
                }
            }
            GalleryAction::Verify { names, steps, seed, json } => {
                let entries = if names.is_empty() {
                    gallery::gallery()
                } else {
                    names
                        .iter()
                        .map(|n| gallery::entry(n).map_err(|e| Failure::Spec(e.to_string())))
                        .collect::<Result<Vec<_>, _>>()?
                };
                let opts = VerifyOptions {
                    steps,
                    seed,
                    ..Default::default()
                };
                let checks: Vec<_> = entries.par_iter().flat_map(|e| gallery::verify_entry(e, &opts)).collect();
                let failed = checks.iter().filter(|c| !c.passed).count();
                for c in &checks {
                    if json {
                        emit(&(serde_json::to_string(c).expect("checks serialize") + "\n"));
                    } else {
                        emit(&format!("{} {:<22} {} ({})\n", if c.passed { "ok  " } else { "FAIL" }, c.entry, c.name, c.detail));
                    }
                }
                if failed > 0 {
                    return Err(Failure::Mismatch(format!("{failed} of {} checks failed", checks.len())));
                }
                eprintln!("all {} checks passed", checks.len());
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
