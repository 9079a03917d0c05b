use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cyverify::checklist::{run_checklist, RunOptions};
use cyverify::report::{self, DiscrepancyPolicy, Policy, EXIT_INPUT, EXIT_OPEN, EXIT_PASS};
use cyverify::scene::{bundled, load_scene, Check, Loaded};
use cyverify::search::{self, render_survivors, SearchConfig};
use cyverify::{stability, Error, Result};

/// Directory that receives a JSON copy of every report.
const REPORT_DIR_VAR: &str = "CYVERIFY_REPORT_DIR";

#[derive(Parser)]
#[command(name = "cyverify", version, about = "Check the condition list for split bundles on elliptic threefolds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the checklist on a scene file or a bundled scene (k3-product, enriques-quotient, enriques-sphere).
    Verify {
        scene: String,
        /// Checks to run instead of the scene's own list.
        #[arg(long = "check", value_delimiter = ',', value_parser = parse_check)]
        checks: Vec<Check>,
        /// Half-width of the line-bundle box used by the stability certificates.
        #[arg(long = "box", default_value_t = stability::DEFAULT_BOX)]
        box_size: u32,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        report: Format,
        /// Treat every verdict-affecting discrepancy as a failure.
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value_t = DiscrepancyPolicy::Open)]
        discrepancy: DiscrepancyPolicy,
    },
    /// Enumerate candidate bundles F with the required c2.
    Search {
        scene: String,
        #[arg(long, default_value_t = search::DEFAULT_RANK_MAX)]
        rank_max: u32,
        #[arg(long = "box", default_value_t = search::DEFAULT_BOX)]
        box_size: u32,
        /// Checkpoint file; the run continues from it when it exists.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Write the survivor list here.
        #[arg(long)]
        emit_survivors: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Stop after this many candidates.
        #[arg(long)]
        limit: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        report: Format,
    },
}

fn parse_check(s: &str) -> std::result::Result<Check, String> {
    Check::parse(s).ok_or_else(|| {
        let all: Vec<&str> = Check::ALL.iter().map(|c| c.name()).collect();
        format!("unknown check {s:?}; expected one of {}", all.join(", "))
    })
}

fn load(scene: &str) -> Result<Loaded> {
    let text = match bundled(scene) {
        Some(t) if !Path::new(scene).exists() => t.to_string(),
        _ => std::fs::read_to_string(scene).map_err(|e| Error::Input(format!("{scene}: {e}")))?,
    };
    load_scene(&text)
}

fn save_report(name: &str, json: &str) -> Result<()> {
    let Some(dir) = std::env::var_os(REPORT_DIR_VAR) else { return Ok(()) };
    let dir = PathBuf::from(dir);
    std::fs::create_dir_all(&dir)?;
    let stem = if name.is_empty() { "report" } else { name };
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Verify { scene, checks, box_size, report: fmt, strict, discrepancy } => {
            let mut loaded = load(&scene)?;
            let opts = RunOptions {
                checks: (!checks.is_empty()).then_some(checks),
                stability_box: box_size,
                search: None,
            };
            let r = run_checklist(&mut loaded, &opts)?;
            let policy = Policy { strict, discrepancy };
            let json = report::render_json(&r, policy);
            save_report(&r.scene, &json)?;
            match fmt {
                Format::Text => print!("{}", report::render_text(&r, policy)),
                Format::Json => print!("{json}"),
            }
            Ok(report::exit_code(&r, policy))
        }
        Cmd::Search { scene, rank_max, box_size, resume, emit_survivors, workers, limit, report: fmt } => {
            let mut loaded = load(&scene)?;
            let e = loaded.e().ok_or_else(|| Error::Input("the scene declares no summands".into()))?;
            let omega = loaded.omega.clone().ok_or_else(|| Error::Input("the scene declares no omega".into()))?;
            let target = search::required_c2(&e)?;
            let cfg = SearchConfig { rank_max, box_size, workers, limit };
            let r = search::run_search(&target, &omega, Some(&mut loaded.ledger), &cfg, resume.as_deref(), true)?;
            if let Some(p) = emit_survivors {
                std::fs::write(p, render_survivors(&r))?;
            }
            let json = report::to_canonical_json(&r);
            save_report(&format!("{}-search", loaded.scene.name), &json)?;
            match fmt {
                Format::Text => print!("{}", report::render_search(&r)),
                Format::Json => print!("{json}"),
            }
            Ok(if r.completion.complete { EXIT_PASS } else { EXIT_OPEN })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    let code = match run(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cyverify: {e}");
            EXIT_INPUT
        }
    };
    ExitCode::from(code as u8)
}
