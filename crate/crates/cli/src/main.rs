//! `risemf`: validate scenes, trace paths, compute and compare coverage maps,
//! or run the HTTP workbench.
//!
//! Exit codes: 0 success, 1 usage error, 2 scene validation error,
//! 3 runtime or computation error.

use std::fmt::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use risemf_core::geom::{arr3, vec3};
use risemf_core::mapper::{
    classification_csv_string, classification_summary, classify, compute_map_with, export_pgm, map_csv_string,
    map_summary, parse_classification_csv, parse_map_csv, MapColumn, MapOptions, Variant, CLASSIFICATION_HEADER,
    COVERAGE_HEADER, DEFAULT_EPSILON_DB,
};
use risemf_core::raytrace::trace_paths;
use risemf_core::scene::{parse_scene, validate_scene, Scene, Severity, WeightMode};

#[derive(Parser)]
#[command(name = "risemf", version, about = "RIS uplink exposure and coverage mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scene file and report every issue.
    Validate { scene: PathBuf },
    /// Print the propagation paths between two points as JSON lines.
    Trace {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        tx: [f64; 3],
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        rx: [f64; 3],
        /// Defaults to the scene's raytracer.max_reflections.
        #[arg(long)]
        max_order: Option<usize>,
    },
    /// Compute a coverage/exposure map over the scene grid.
    Map {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, value_enum)]
        weight_mode: Option<WeightModeArg>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
        threads: Option<u16>,
        #[arg(long)]
        out: PathBuf,
        /// Also write one column as a P2 graymap, e.g. `p_tx_dbm=ptx.pgm`.
        #[arg(long, value_parser = parse_pgm)]
        pgm: Vec<(MapColumn, PathBuf)>,
    },
    /// Compare a RIS map against a baseline map.
    Classify {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        variant: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON_DB)]
        epsilon_db: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate counts and ranges of a coverage or classification CSV.
    Summary {
        #[arg(long)]
        map: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Persist scene snapshots in this directory.
        #[arg(long)]
        state_dir: Option<PathBuf>,
        /// Serve static UI assets from this directory.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum VariantArg {
    Baseline,
    WithRis,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightModeArg {
    Literal,
    Cascade,
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got `{s}`"));
    }
    let mut p = [0.0; 3];
    for (slot, part) in p.iter_mut().zip(parts) {
        *slot = part
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("invalid coordinate `{part}`"))?;
    }
    Ok(p)
}

fn parse_pgm(s: &str) -> Result<(MapColumn, PathBuf), String> {
    let (column, file) = s.split_once('=').ok_or_else(|| format!("expected COLUMN=FILE, got `{s}`"))?;
    let column = column.parse::<MapColumn>().map_err(|e| e.to_string())?;
    Ok((column, PathBuf::from(file)))
}

/// Scene problems exit with 2, everything else with 3.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<risemf_core::Error>() {
        Some(e) if matches!(e.code(), "SYNTAX" | "SCHEMA" | "INVARIANT") => 2,
        _ => 3,
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_scene(path: &Path) -> Result<Scene> {
    let text = read(path)?;
    parse_scene(&text).map_err(|e| {
        if let risemf_core::Error::Invariant(issues) = &e {
            for i in issues {
                eprintln!("{}: {}", i.code.as_str(), i.message);
            }
        }
        anyhow::Error::new(e).context(format!("invalid scene {}", path.display()))
    })
}

fn validate(path: &Path) -> Result<()> {
    let scene = load_scene(path)?;
    for w in validate_scene(&scene).iter().filter(|i| i.severity == Severity::Warning) {
        eprintln!("warning {}: {}", w.code.as_str(), w.message);
    }
    println!("OK");
    Ok(())
}

fn fixed9(out: &mut String, v: f64) {
    let start = out.len();
    write!(out, "{v:.9}").unwrap();
    if &out[start..] == "-0.000000000" {
        out.replace_range(start.., "0.000000000");
    }
}

fn point_json(out: &mut String, p: &[f64; 3]) {
    out.push('[');
    for (i, c) in p.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        fixed9(out, *c);
    }
    out.push(']');
}

fn trace(scene: &Path, tx: [f64; 3], rx: [f64; 3], max_order: Option<usize>) -> Result<()> {
    let scene = load_scene(scene)?;
    let order = max_order.unwrap_or(scene.tracer.max_reflections);
    let result = trace_paths(&scene.walls, vec3(tx), vec3(rx), order)?;
    let mut out = String::new();
    for path in &result.paths {
        out.push_str("{\"length_m\":");
        fixed9(&mut out, path.length_m);
        out.push_str(",\"interactions\":[");
        for (i, it) in path.interactions.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let kind = serde_json::to_string(&it.kind)?;
            write!(out, "{{\"kind\":{kind},\"wall\":{},\"point\":", it.wall)?;
            point_json(&mut out, &arr3(&it.point));
            out.push_str(",\"loss_db\":");
            fixed9(&mut out, it.loss_db);
            out.push('}');
        }
        out.push_str("],\"points\":[");
        for (i, p) in path.points.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            point_json(&mut out, &arr3(p));
        }
        out.push_str("]}\n");
    }
    print!("{out}");
    Ok(())
}

fn map(
    scene: &Path,
    variant: VariantArg,
    weight_mode: Option<WeightModeArg>,
    threads: Option<u16>,
    out: &Path,
    pgm: &[(MapColumn, PathBuf)],
) -> Result<()> {
    let scene = load_scene(scene)?;
    let variant = match variant {
        VariantArg::Baseline => Variant::Baseline,
        VariantArg::WithRis => Variant::WithRis,
    };
    let options = MapOptions {
        weight_mode: weight_mode.map(|m| match m {
            WeightModeArg::Literal => WeightMode::Literal,
            WeightModeArg::Cascade => WeightMode::CascadeConjugate,
        }),
        threads: threads.map(usize::from),
    };
    let started = std::time::Instant::now();
    let result = compute_map_with(&scene, variant, &options, &|_| {})?;
    write(out, &map_csv_string(&result))?;
    for (column, file) in pgm {
        write(file, &export_pgm(&result, *column))?;
    }
    let s = map_summary(&result);
    eprintln!(
        "{} cells ({} covered, {} at minimum power, {} out of coverage) in {:.2?} -> {}",
        s.cell_count,
        s.covered_count,
        s.covered_min_power_count,
        s.out_of_coverage_count,
        started.elapsed(),
        out.display()
    );
    Ok(())
}

fn classify_files(baseline: &Path, variant: &Path, epsilon_db: f64, out: &Path) -> Result<()> {
    let b = parse_map_csv(&read(baseline)?).with_context(|| baseline.display().to_string())?;
    let v = parse_map_csv(&read(variant)?).with_context(|| variant.display().to_string())?;
    let c = classify(&b, &v, epsilon_db)?;
    write(out, &classification_csv_string(&c))?;
    let s = classification_summary(&c);
    eprintln!(
        "{} reduced exposure, {} extended coverage, {} unchanged -> {}",
        s.reduced_exposure_count,
        s.extended_coverage_count,
        s.no_change_count,
        out.display()
    );
    Ok(())
}

fn summary(path: &Path) -> Result<()> {
    let text = read(path)?;
    let header = text.lines().next().unwrap_or("");
    let json = if header == COVERAGE_HEADER {
        serde_json::to_string_pretty(&map_summary(&parse_map_csv(&text)?))?
    } else if header == CLASSIFICATION_HEADER {
        serde_json::to_string_pretty(&classification_summary(&parse_classification_csv(&text)?))?
    } else {
        return Err(risemf_core::Error::MapFormat(format!("unrecognised header `{header}`")).into());
    };
    println!("{json}");
    Ok(())
}

fn serve(port: u16, bind: IpAddr, state_dir: Option<PathBuf>, ui_dir: Option<PathBuf>) -> Result<()> {
    let state = match state_dir {
        Some(dir) => risemf_service::AppState::with_state_dir(&dir)
            .with_context(|| format!("cannot use state dir {}", dir.display()))?,
        None => risemf_service::AppState::new(),
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(risemf_service::serve(SocketAddr::new(bind, port), state, ui_dir))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { scene } => validate(&scene),
        Command::Trace {
            scene,
            tx,
            rx,
            max_order,
        } => trace(&scene, tx, rx, max_order),
        Command::Map {
            scene,
            variant,
            weight_mode,
            threads,
            out,
            pgm,
        } => map(&scene, variant, weight_mode, threads, &out, &pgm),
        Command::Classify {
            baseline,
            variant,
            epsilon_db,
            out,
        } => classify_files(&baseline, &variant, epsilon_db, &out),
        Command::Summary { map } => summary(&map),
        Command::Serve {
            port,
            bind,
            state_dir,
            ui_dir,
        } => serve(port, bind, state_dir, ui_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let tag = e
                .downcast_ref::<risemf_core::Error>()
                .map(|c| c.code())
                .unwrap_or("ERROR");
            eprintln!("error [{tag}]: {e:#}");
            ExitCode::from(code)
        }
    }
}
