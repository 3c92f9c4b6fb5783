//! Argument parsing and dispatch for the `dexfit` binary.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures
//! (including a failed gradient gate). Every command that writes results
//! also writes a run manifest; the manifest records wall time and is the
//! only output that may differ between identical reruns.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::checkgrad::{self, GRADIENT_TOLERANCE};
use crate::formats::config::{load_config, ConfigRecord};
use crate::formats::curve::save_curve;
use crate::formats::poses::{load_solution, save_solution};
use crate::formats::report::save_report;
use crate::manifest::{write_atomic, write_manifest, RunManifest};
use crate::pipeline::{self, InitSpec};
use crate::threads::worker_cap;
use dexfit_core::solver::SolveConfig;

#[derive(Parser)]
#[command(
    name = "dexfit",
    about = "Multi-view hand-object pose fitting pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand a scene spec into a directory of meshes, cameras, poses,
    /// annotations, depth maps, and grasp candidates.
    GenScene {
        /// Scene spec file (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output scene directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit every frame of a generated scene and write poses plus the
    /// per-iteration energy trace.
    Solve {
        /// Scene directory from gen-scene.
        #[arg(long)]
        scene: PathBuf,
        /// Starting pose: `gt` or `perturbed:<mm>`.
        #[arg(long, default_value = "gt")]
        init: InitSpec,
        /// Output solution file (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Optimizer configuration file (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed for the init perturbation; defaults to the scene seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score solved poses for safe handover: precision and coverage over
    /// the hand-clearance sweep.
    EvalGrasps {
        /// Scene directory from gen-scene.
        #[arg(long)]
        scene: PathBuf,
        /// Solution file from solve.
        #[arg(long)]
        poses: PathBuf,
        /// Output curve file (CSV).
        #[arg(long)]
        out: PathBuf,
        /// Number of clearance samples over [0, 0.07] m; default 15.
        #[arg(long)]
        eps_grid: Option<usize>,
    },
    /// Compare solved poses against the scene's ground truth.
    Metrics {
        /// Scene directory from gen-scene.
        #[arg(long)]
        scene: PathBuf,
        /// Solution file from solve.
        #[arg(long)]
        poses: PathBuf,
        /// Output report file (CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit analytic gradients against central finite differences and
    /// print the worst relative error per derivative.
    CheckGrad {
        /// Number of random scenes to audit.
        #[arg(long, default_value_t = 50)]
        scenes: usize,
        /// Seed for the audited scenes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses and runs one invocation; returns the process exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits; everything
            // else is a usage error.
            let _ = e.print();
            return if e.exit_code() == 0 { 0 } else { 1 };
        }
    };
    let command_line = argv.join(" ");
    let started = Instant::now();
    match run(cli.command, &command_line, started) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// `out.ext` gets its manifest at `out.manifest.json` in the same
/// directory.
fn sibling_manifest(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn run(
    command: Command,
    command_line: &str,
    started: Instant,
) -> Result<(), Box<dyn std::error::Error>> {
    match command {
        Command::GenScene { spec, out, seed } => {
            let (resolved, outputs) = pipeline::gen_scene(&spec, &out, seed)?;
            println!(
                "wrote {} files to {} ({} frames, {} views)",
                outputs.len(),
                out.display(),
                resolved.frames,
                resolved.rig.views
            );
            let manifest = RunManifest {
                command: command_line.into(),
                config: serde_json::to_value(&resolved)?,
                seed: Some(resolved.seed),
                inputs: vec![spec.display().to_string()],
                outputs,
                wall_time_s: started.elapsed().as_secs_f64(),
            };
            write_manifest(&out.join("manifest.json"), &manifest)?;
        }
        Command::Solve {
            scene,
            init,
            out,
            config,
            seed,
        } => {
            let solve_config = match &config {
                Some(path) => load_config(path)?,
                None => SolveConfig::default(),
            };
            let outcome = pipeline::solve(&scene, init, &solve_config, seed)?;
            save_solution(&out, &outcome.init, &outcome.frames)?;
            let final_energy = outcome
                .frames
                .last()
                .and_then(|f| f.trace.last())
                .map(|r| r.e_total)
                .unwrap_or(0.0);
            println!(
                "solved {} frames, final energy {final_energy:.6}",
                outcome.frames.len()
            );
            let mut inputs = vec![scene.display().to_string()];
            if let Some(path) = &config {
                inputs.push(path.display().to_string());
            }
            let manifest = RunManifest {
                command: command_line.into(),
                config: serde_json::to_value(ConfigRecord::from_config(&solve_config))?,
                seed: outcome.seed,
                inputs,
                outputs: vec![out.display().to_string()],
                wall_time_s: started.elapsed().as_secs_f64(),
            };
            write_manifest(&sibling_manifest(&out), &manifest)?;
        }
        Command::EvalGrasps {
            scene,
            poses,
            out,
            eps_grid,
        } => {
            let (_, frames) = load_solution(&poses)?;
            let curve = pipeline::eval_grasps(&scene, &frames, eps_grid)?;
            save_curve(&out, &curve)?;
            println!(
                "wrote {} curve points to {}",
                curve.len(),
                out.display()
            );
            let manifest = RunManifest {
                command: command_line.into(),
                config: serde_json::json!({
                    "eps_grid_points": curve.len(),
                    "sigma_t_m": 0.05,
                    "sigma_q_deg": 15.0,
                }),
                seed: None,
                inputs: vec![scene.display().to_string(), poses.display().to_string()],
                outputs: vec![out.display().to_string()],
                wall_time_s: started.elapsed().as_secs_f64(),
            };
            write_manifest(&sibling_manifest(&out), &manifest)?;
        }
        Command::Metrics { scene, poses, out } => {
            let (_, frames) = load_solution(&poses)?;
            let rows = pipeline::metrics(&scene, &frames)?;
            save_report(&out, &rows)?;
            println!("wrote {} metric rows to {}", rows.len(), out.display());
            let manifest = RunManifest {
                command: command_line.into(),
                config: serde_json::json!({}),
                seed: None,
                inputs: vec![scene.display().to_string(), poses.display().to_string()],
                outputs: vec![out.display().to_string()],
                wall_time_s: started.elapsed().as_secs_f64(),
            };
            write_manifest(&sibling_manifest(&out), &manifest)?;
        }
        Command::CheckGrad { scenes, seed, out } => {
            let report = checkgrad::run(scenes, seed, worker_cap());
            for (name, value) in report.rows() {
                println!("{name}: {value:.3e}");
            }
            println!("max relative error: {:.3e}", report.max());
            if let Some(out) = &out {
                let mut payload = serde_json::Map::new();
                for (name, value) in report.rows() {
                    payload.insert(name.into(), value.into());
                }
                payload.insert("max".into(), report.max().into());
                payload.insert("tolerance".into(), GRADIENT_TOLERANCE.into());
                let mut text =
                    serde_json::to_string_pretty(&serde_json::Value::Object(payload))?;
                text.push('\n');
                write_atomic(out, text.as_bytes())?;
                let manifest = RunManifest {
                    command: command_line.into(),
                    config: serde_json::json!({
                        "scenes": scenes,
                        "tolerance": GRADIENT_TOLERANCE,
                    }),
                    seed: Some(seed),
                    inputs: vec![],
                    outputs: vec![out.display().to_string()],
                    wall_time_s: started.elapsed().as_secs_f64(),
                };
                write_manifest(&sibling_manifest(out), &manifest)?;
            }
            if report.max() > GRADIENT_TOLERANCE {
                return Err(format!(
                    "gradient audit failed: {:.3e} exceeds {GRADIENT_TOLERANCE:.1e}",
                    report.max()
                )
                .into());
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(line: &str) -> Vec<String> {
        line.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(dispatch(args("dexfit no-such-command")), 1);
        assert_eq!(dispatch(args("dexfit solve --scene x")), 1); // missing --out
        assert_eq!(dispatch(args("dexfit solve --scene x --out y --init nope")), 1);
        assert_eq!(dispatch(args("dexfit")), 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(dispatch(args("dexfit --help")), 0);
        assert_eq!(dispatch(args("dexfit solve --help")), 0);
    }

    #[test]
    fn runtime_errors_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.json");
        let out = dir.path().join("out");
        assert_eq!(
            dispatch(args(&format!(
                "dexfit gen-scene --spec {} --out {}",
                missing.display(),
                out.display()
            ))),
            2
        );
    }

    #[test]
    fn check_grad_runs_a_small_audit() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("grad.json");
        let code = dispatch(args(&format!(
            "dexfit check-grad --scenes 2 --seed 3 --out {}",
            out.display()
        )));
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&out).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(value["max"].as_f64().unwrap() <= GRADIENT_TOLERANCE);
        assert!(dir.path().join("grad.manifest.json").exists());
    }
}
