//! Subcommand bodies shared by the binary and the acceptance suite.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bounds::{compute_ledger, validate_all, validate_sup_moment, write_validations_csv, BoundCheck};
use crate::config::{unix_now, ExperimentConfig, RunManifest, SimTarget};
use crate::coupling::{coupled_simulate, CoupledRun};
use crate::ensemble::{simulate, System};
use crate::error::Result;
use crate::experiments::{emit_report, grid_sensitivity, run_convergence_study_with};
use crate::scaling::{distribution_match, time_change, unscaled_simulate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Converge,
    ValidateBounds,
    ScalingCheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Converge => "converge",
            Command::ValidateBounds => "validate-bounds",
            Command::ScalingCheck => "scaling-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub outputs: Vec<PathBuf>,
    /// One line per check, for the terminal.
    pub lines: Vec<String>,
}

/// Runs `command` and writes its artifacts plus `manifest.json` into `dir`.
pub fn run(command: Command, config: &ExperimentConfig, dir: &Path, workers: Option<usize>) -> Result<Outcome> {
    let started = unix_now();
    fs::create_dir_all(dir)?;
    let mut out = match command {
        Command::Simulate => cmd_simulate(config, dir)?,
        Command::Converge => cmd_converge(config, dir)?,
        Command::ValidateBounds => cmd_validate_bounds(config, dir)?,
        Command::ScalingCheck => cmd_scaling_check(config, dir)?,
    };
    let manifest_path = dir.join("manifest.json");
    let mut outputs = out.outputs.clone();
    outputs.push(manifest_path.clone());
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: command.name().to_string(),
        seed: config.sim.seed,
        workers,
        started_unix: started,
        finished_unix: unix_now(),
        outputs: outputs.clone(),
        passed: out.passed,
        config: config.clone(),
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    out.outputs = outputs;
    Ok(out)
}

fn check_line(c: &BoundCheck) -> String {
    format!(
        "{} beta={} {}: lhs={:.6e} rhs={:.6e} [{}]",
        if c.passes { "PASS" } else { "FAIL" },
        c.beta,
        c.name,
        c.lhs,
        c.rhs,
        c.relation
    )
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    system: SimTarget,
    n_points: usize,
    n_particles: usize,
    final_mean: f64,
    error_mean: Option<f64>,
    checks: &'a [BoundCheck],
    passes: bool,
}

fn cmd_simulate(config: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let sim = config.sim_config()?;
    let ledger = compute_ledger(sim.init.m, sim.kernel.kappa(), sim.t_end)?;
    let mut outputs = Vec::new();
    let mut checks = Vec::new();
    let (bundle, error_mean) = match config.sim.system {
        SimTarget::SecondOrder | SimTarget::Limit => {
            let system = if config.sim.system == SimTarget::Limit {
                System::Limit
            } else {
                System::SecondOrder
            };
            let b = simulate(&sim, system)?;
            let p = dir.join("paths.csv");
            b.write_csv(&p)?;
            outputs.push(p);
            (b, None)
        }
        SimTarget::Coupled => {
            let run = coupled_simulate(&sim)?;
            for (name, b) in [("paths_x.csv", &run.x_bundle), ("paths_y.csv", &run.y_bundle)] {
                let p = dir.join(name);
                b.write_csv(&p)?;
                outputs.push(p);
            }
            let p = dir.join("errors.csv");
            run.write_errors_csv(&p)?;
            outputs.push(p);
            let e = run.estimate()?.mean;
            (run.x_bundle, Some(e))
        }
    };
    if bundle.system == System::SecondOrder && sim.beta > 1.0 && sim.n_particles >= 2 {
        checks.push(validate_sup_moment(&bundle, &ledger)?);
    }
    let passes = checks.iter().all(|c| c.passes);
    let summary = SimulateSummary {
        system: config.sim.system,
        n_points: bundle.n_points(),
        n_particles: bundle.n_particles(),
        final_mean: *bundle.mu_hat.last().expect("grid has t = 0"),
        error_mean,
        checks: &checks,
        passes,
    };
    let p = dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(&summary)?)?;
    outputs.push(p);
    let mut lines: Vec<String> = checks.iter().map(check_line).collect();
    lines.push(format!("wrote {} grid points for {} particles", summary.n_points, summary.n_particles));
    Ok(Outcome {
        passed: passes,
        outputs,
        lines,
    })
}

fn cmd_converge(config: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let study = config.study_config()?;
    let ledger = study.ledger()?;
    let mut validations = Vec::new();
    let fit = run_convergence_study_with(&study, |run: &CoupledRun| {
        validations.extend(validate_all(run, &ledger)?);
        Ok(())
    })?;
    let grid = if config.sim.grid_check {
        Some(grid_sensitivity(&study)?)
    } else {
        None
    };
    let (mut outputs, passed) = emit_report(&fit, &ledger, &validations, grid.as_ref(), dir)?;
    let p = dir.join("validations.csv");
    write_validations_csv(&validations, &p)?;
    outputs.push(p);

    let mut lines = Vec::new();
    for pt in &fit.per_beta {
        lines.push(format!(
            "beta={} error={:.6e} ci={:.2e} bound={:.3e} sharp={:.3e}",
            pt.beta, pt.error_mean, pt.ci_halfwidth, pt.bound_printed, pt.bound_sharp
        ));
    }
    let verdict = |b: bool| if b { "PASS" } else { "FAIL" };
    lines.push(format!("{} slope {:.4} (band [-1.2, -0.75], r2 {:.4})", verdict(fit.slope_in_band()), fit.slope, fit.r_squared));
    lines.push(format!("{} errors below printed bound", verdict(fit.bound_dominance())));
    lines.push(format!("{} errors decreasing up to CI overlap", verdict(fit.decreasing_up_to_overlap())));
    if let Some(g) = &grid {
        lines.push(format!(
            "{} grid refinement at beta={}: {:.6e} -> {:.6e} (ci {:.2e})",
            verdict(g.passes),
            g.beta,
            g.error_mean,
            g.error_mean_refined,
            g.ci_halfwidth
        ));
    }
    lines.extend(validations.iter().map(check_line));
    Ok(Outcome { passed, outputs, lines })
}

fn cmd_validate_bounds(config: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let mut checks = Vec::new();
    for beta in config.betas() {
        let sim = config.sim_config_at(beta)?;
        let ledger = compute_ledger(sim.init.m, sim.kernel.kappa(), sim.t_end)?;
        let run = coupled_simulate(&sim)?;
        checks.extend(validate_all(&run, &ledger)?);
    }
    let p = dir.join("validations.csv");
    write_validations_csv(&checks, &p)?;
    let passed = checks.iter().all(|c| c.passes);
    let s = dir.join("summary.json");
    fs::write(&s, serde_json::to_string_pretty(&serde_json::json!({ "validations": checks, "passes": passed }))?)?;
    Ok(Outcome {
        passed,
        outputs: vec![p, s],
        lines: checks.iter().map(check_line).collect(),
    })
}

fn cmd_scaling_check(config: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let (section, setup) = config.scaling()?;
    let gamma = setup.map.gamma();
    let transformed = time_change(&unscaled_simulate(&setup.map, &setup.unscaled)?, gamma)?;
    let direct = simulate(&setup.direct, System::SecondOrder)?;
    let report = distribution_match(&transformed, &direct, &section.checkpoints)?;

    let p = dir.join("scaling.csv");
    let mut w = csv::Writer::from_path(&p)?;
    w.write_record(["t", "ks_distance", "ks_critical", "m1_z", "m2_z", "m3_z", "m4_z", "passes"])?;
    for c in &report.checkpoints {
        w.serialize((c.t, c.ks_distance, c.ks_critical, c.moment_z[0], c.moment_z[1], c.moment_z[2], c.moment_z[3], c.passes))?;
    }
    w.flush()?;
    let s = dir.join("scaling.json");
    fs::write(&s, serde_json::to_string_pretty(&report)?)?;
    let lines = report
        .checkpoints
        .iter()
        .map(|c| {
            format!(
                "{} t={} gamma={} vs beta={}: ks={:.4} (critical {:.4}) moment z={:?}",
                if c.passes { "PASS" } else { "FAIL" },
                c.t,
                gamma,
                setup.direct.beta,
                c.ks_distance,
                c.ks_critical,
                c.moment_z.map(|z| (z * 100.0).round() / 100.0)
            )
        })
        .collect();
    Ok(Outcome {
        passed: report.passes,
        outputs: vec![p, s],
        lines,
    })
}
