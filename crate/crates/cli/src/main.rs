use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use ghost_core::executor::RobotExecutor;
use ghost_core::protocol::{self, WireMessage};
use ghost_core::session::{self, SessionState};
use ghost_core::{Config, Scene};

mod serve;

#[derive(Parser)]
#[command(name = "ghost", version, about = "GhostObjects engine: replay, verify, execute, serve")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a controller trace and write the instruction log.
    Replay {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-run golden scenarios and diff their outputs byte for byte.
    Verify {
        #[arg(long)]
        golden: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run an instruction log through the simulated robot.
    Execute {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        instructions: PathBuf,
        #[arg(long)]
        status_out: PathBuf,
        #[arg(long)]
        scene_out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve a live session over WebSocket or raw TCP lines.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::from_json(&read(p)?).with_context(|| format!("config {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn load_scene(path: &Path) -> Result<Scene> {
    Scene::from_json(&read(path)?).with_context(|| format!("scene {}", path.display()))
}

/// Feeds instruction lines to a fresh executor and returns the status lines.
fn execute_lines(scene: Scene, step_count: u32, instructions: &str) -> Result<(Scene, Vec<String>)> {
    let mut executor = RobotExecutor::new(scene, step_count);
    let mut statuses = Vec::new();
    for (i, line) in instructions.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match protocol::decode(line) {
            Ok(WireMessage::Instruction(_)) => statuses.extend(executor.handle_line(line)),
            Ok(WireMessage::Status(_)) => bail!("line {}: status where an instruction was expected", i + 1),
            Err(e) => bail!("line {}: {e}", i + 1),
        }
    }
    Ok((executor.into_scene(), statuses))
}

fn replay(scene: &Path, trace: &Path, out: &Path, config: Option<&Path>) -> Result<()> {
    let config = load_config(config)?;
    let result = session::replay(&read(scene)?, &read(trace)?, &config)?;
    fs::write(out, result.instructions_jsonl()).with_context(|| format!("writing {}", out.display()))?;
    for w in result.state.warnings() {
        eprintln!("warning: {w}");
    }
    println!("instructions {}", result.instructions().len());
    println!("digest {}", result.digest);
    Ok(())
}

fn golden_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join("trace.jsonl").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .with_context(|| format!("listing {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("trace.jsonl").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no golden scenarios under {}", root.display());
    }
    Ok(dirs)
}

fn compare(dir: &Path, name: &str, actual: &str, failures: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    if !path.is_file() {
        return Ok(());
    }
    if read(&path)? != actual {
        failures.push(format!("{}: {name} differs", dir.display()));
    }
    Ok(())
}

/// Replays, executes and re-compiles one scenario. Returns mismatches.
fn verify_one(dir: &Path, default_config: &Config) -> Result<Vec<String>> {
    let config_path = dir.join("config.json");
    let config = if config_path.is_file() { load_config(Some(&config_path))? } else { default_config.clone() };
    let scene_text = read(&dir.join("scene.json"))?;
    let result = session::replay(&scene_text, &read(&dir.join("trace.jsonl"))?, &config)?;
    let again = session::replay(&scene_text, &read(&dir.join("trace.jsonl"))?, &config)?;
    let mut failures = Vec::new();
    let instructions = result.instructions_jsonl();
    if instructions != again.instructions_jsonl() || result.digest != again.digest {
        failures.push(format!("{}: replay is not deterministic", dir.display()));
    }
    compare(dir, "expected_instructions.jsonl", &instructions, &mut failures)?;
    compare(dir, "expected_digest.txt", &format!("{}\n", result.digest), &mut failures)?;

    let (_, statuses) = execute_lines(result.state.scene.clone(), config.step_count, &instructions)?;
    let status_text: String = statuses.iter().map(|s| format!("{s}\n")).collect();
    compare(dir, "expected_status.jsonl", &status_text, &mut failures)?;

    let mut state: SessionState = result.state;
    for line in &statuses {
        if let Ok(WireMessage::Status(s)) = protocol::decode(line) {
            state.apply_status(&s);
        }
    }
    let ghosts: Vec<_> = state.ghosts().cloned().collect();
    let leftover = protocol::compile_instructions(&ghosts, &state.scene)?;
    if !leftover.is_empty() {
        failures.push(format!("{}: {} instructions remain after execution", dir.display(), leftover.len()));
    }
    Ok(failures)
}

fn verify(golden: &Path, config: Option<&Path>) -> Result<bool> {
    let config = load_config(config)?;
    let mut ok = true;
    for dir in golden_dirs(golden)? {
        let failures = verify_one(&dir, &config)?;
        if failures.is_empty() {
            println!("ok    {}", dir.display());
        } else {
            ok = false;
            for f in failures {
                println!("FAIL  {f}");
            }
        }
    }
    Ok(ok)
}

fn execute(scene: &Path, instructions: &Path, status_out: &Path, scene_out: Option<&Path>, config: Option<&Path>) -> Result<()> {
    let config = load_config(config)?;
    let (final_scene, statuses) = execute_lines(load_scene(scene)?, config.step_count, &read(instructions)?)?;
    let text: String = statuses.iter().map(|s| format!("{s}\n")).collect();
    fs::write(status_out, text).with_context(|| format!("writing {}", status_out.display()))?;
    if let Some(p) = scene_out {
        fs::write(p, final_scene.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("statuses {}", statuses.len());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Replay { scene, trace, out, config } => replay(&scene, &trace, &out, config.as_deref()).map(|_| true),
        Command::Verify { golden, config } => verify(&golden, config.as_deref()),
        Command::Execute { scene, instructions, status_out, scene_out, config } => {
            execute(&scene, &instructions, &status_out, scene_out.as_deref(), config.as_deref()).map(|_| true)
        }
        Command::Serve { scene, port, host, config } => {
            let config = load_config(config.as_deref())?;
            serve::run(load_scene(&scene)?, config, &host, port).map(|_| true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
