use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use conformal_qw::curved::{snapshot_csv, Pipeline, Sector, Trajectory};
use conformal_qw::experiments::{
    amplitude_sweep, curved_convergence_sweep, fit_order, flat_convergence_sweep, successive_ratios, AmplitudeSweep,
    CurvedTemplate, ExperimentTable, FlatSweep,
};
use conformal_qw::metric::{christoffel, ricci_scalar, OmegaNormalizer, TimeWindow};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{LoadedConfig, RunConfig, SweepKind};
use crate::failure::{Failure, Outcome};

pub const METRIC_HEADER: &str = "t,x,omega2,omega,gamma_t,gamma_x,ricci";

/// Drift allowed per thousand steps of a pipeline run.
const DRIFT_PER_KILOSTEP: f64 = 1e-12;

/// Options shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Global {
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub per_step: bool,
}

impl Global {
    fn load(&self) -> Outcome<LoadedConfig> {
        let path = self.config.as_deref().context("this subcommand needs --config PATH")?;
        Ok(LoadedConfig::read(path)?)
    }

    pub fn write_file(&self, name: &str, contents: &str) -> Outcome<String> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating output directory {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(name.to_string())
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_path: Option<&'a Path>,
    config: Option<&'a RunConfig>,
    outputs: Vec<String>,
    norm_drift: Option<f64>,
    wallclock_s: f64,
    summary: Value,
}

impl Manifest<'_> {
    fn write(&self, global: &Global) -> Outcome {
        let text = serde_json::to_string_pretty(self).context("serializing manifest")?;
        global.write_file(&format!("{}_manifest.json", self.command), &(text + "\n"))?;
        Ok(())
    }
}

fn require(ok: bool, msg: &str) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(anyhow!("{msg}").into())
    }
}

fn drift_budget(steps: usize) -> f64 {
    DRIFT_PER_KILOSTEP * (steps as f64 / 1000.0).max(1.0)
}

pub fn simulate(global: &Global, steps: Option<usize>) -> Outcome {
    let clock = Instant::now();
    let mut loaded = global.load()?;
    if let Some(steps) = steps {
        loaded.config.steps = steps;
    }
    let c = &loaded.config;
    let pipeline = Pipeline::new(loaded.pipeline(loaded.metric()?)?)?;
    let cadence = if c.snapshot_cadence == 0 { c.steps.max(1) } else { c.snapshot_cadence };
    let traj =
        if global.per_step { pipeline.run_per_step(cadence)? } else { pipeline.run_telescoped_snapshots(cadence)? };

    let mut outputs = vec![
        global.write_file("snapshots_psi.csv", &snapshot_csv(&traj, Sector::Psi))?,
        global.write_file("snapshots_phi.csv", &snapshot_csv(&traj, Sector::Phi))?,
    ];
    if c.export_flat_frame {
        let flat = Trajectory {
            snapshots: vec![(c.steps, pipeline.time(c.steps), pipeline.run_flat_frame()?)],
            norm_drift: 0.0,
        };
        outputs.push(global.write_file("flat_frame_psi.csv", &snapshot_csv(&flat, Sector::Psi))?);
        outputs.push(global.write_file("flat_frame_phi.csv", &snapshot_csv(&flat, Sector::Phi))?);
    }

    let budget = drift_budget(c.steps);
    let mode = if global.per_step { "per_step" } else { "telescoped" };
    Manifest {
        command: "simulate",
        config_path: global.config.as_deref(),
        config: Some(c),
        outputs,
        norm_drift: Some(traj.norm_drift),
        wallclock_s: clock.elapsed().as_secs_f64(),
        summary: json!({ "mode": mode, "steps": c.steps, "omega2_max": pipeline.scale(), "drift_budget": budget }),
    }
    .write(global)?;
    println!("simulate ({mode}): {} steps, norm drift {:.3e}", c.steps, traj.norm_drift);
    if traj.norm_drift > budget {
        return Err(Failure::Invariant(format!("norm drift {:.3e} exceeds {budget:.1e}", traj.norm_drift)));
    }
    Ok(())
}

pub fn converge(global: &Global, selftest_order: bool) -> Outcome {
    if selftest_order {
        return converge_selftest(global);
    }
    let clock = Instant::now();
    let loaded = global.load()?;
    let c = &loaded.config;
    let sweep = c.sweep.as_ref().context("config has no `sweep` section")?;
    require(!sweep.eps_list.is_empty(), "`sweep.eps_list` is missing or empty")?;

    let (table, summary) = match sweep.kind {
        SweepKind::Flat => {
            let mut plan = FlatSweep::new(sweep.mass, sweep.eps_list.clone());
            plan.packet = c.packet.into();
            plan.domain_length = sweep.domain_length.unwrap_or(plan.domain_length);
            plan.horizon = sweep.horizon.unwrap_or(plan.horizon);
            let table = flat_convergence_sweep(&plan)?;
            let summary = fit_summary(&table);
            (table, summary)
        }
        SweepKind::Curved => {
            let mut template = CurvedTemplate::new(loaded.metric()?);
            template.packet = c.packet.into();
            template.t_start = c.t_start;
            template.domain_length = sweep.domain_length.unwrap_or(template.domain_length);
            template.horizon = sweep.horizon.unwrap_or(template.horizon);
            let etas = if sweep.eta_list.is_empty() { vec![c.eta] } else { sweep.eta_list.clone() };
            let table = curved_convergence_sweep(&template, &sweep.eps_list, &etas)?;
            let summary = fit_summary(&table);
            (table, summary)
        }
        SweepKind::Amplitude => {
            require(sweep.eps_list.len() == 1, "an amplitude sweep takes exactly one entry in `sweep.eps_list`")?;
            require(!sweep.amplitudes.is_empty(), "`sweep.amplitudes` is missing or empty")?;
            let mut plan = AmplitudeSweep::new(sweep.eps_list[0], sweep.amplitudes.clone());
            plan.eta = c.eta;
            plan.width = sweep.width;
            plan.template.packet = c.packet.into();
            plan.template.domain_length = sweep.domain_length.unwrap_or(plan.template.domain_length);
            plan.template.horizon = sweep.horizon.unwrap_or(plan.template.horizon);
            let table = amplitude_sweep(&plan)?;
            let ratios = successive_ratios(&table);
            let summary = json!({ "max_error": table.max_error(), "error_ratios": ratios });
            (table, summary)
        }
    };

    let outputs = vec![global.write_file("convergence.csv", &table.to_csv(c.record_wallclock))?];
    let drift = table.max_norm_drift();
    Manifest {
        command: "converge",
        config_path: global.config.as_deref(),
        config: Some(c),
        outputs,
        norm_drift: Some(drift),
        wallclock_s: clock.elapsed().as_secs_f64(),
        summary: summary.clone(),
    }
    .write(global)?;

    let mut line =
        format!("converge: {} rows, max error {:.3e}, max norm drift {drift:.3e}", table.rows.len(), table.max_error());
    if let Some(fit) = table.fit {
        let _ = write!(line, ", fitted order {:.4} (r2 {:.5})", fit.slope, fit.r2);
    }
    if let Some(ratios) = summary.get("error_ratios") {
        let _ = write!(line, ", error ratios {ratios}");
    }
    println!("{line}");
    if drift > DRIFT_PER_KILOSTEP {
        return Err(Failure::Invariant(format!("sweep norm drift {drift:.3e} exceeds {DRIFT_PER_KILOSTEP:.1e}")));
    }
    Ok(())
}

fn fit_summary(table: &ExperimentTable) -> Value {
    json!({
        "max_error": table.max_error(),
        "fitted_order": table.fit.map(|f| f.slope),
        "r2": table.fit.map(|f| f.r2),
    })
}

fn converge_selftest(global: &Global) -> Outcome {
    let clock = Instant::now();
    let eps: Vec<f64> = (3..8).map(|k| 0.5f64.powi(k)).collect();
    let errors: Vec<f64> = eps.iter().map(|e| 0.3 * e * e).collect();
    let fit = fit_order(&eps, &errors)?;
    Manifest {
        command: "converge",
        config_path: None,
        config: None,
        outputs: Vec::new(),
        norm_drift: None,
        wallclock_s: clock.elapsed().as_secs_f64(),
        summary: json!({ "selftest": "quadratic", "fitted_order": fit.slope, "r2": fit.r2 }),
    }
    .write(global)?;
    println!("selftest: fitted order {:.12} (r2 {:.12})", fit.slope, fit.r2);
    if (fit.slope - 2.0).abs() > 1e-10 {
        return Err(Failure::Invariant(format!("self-test slope {} is not 2", fit.slope)));
    }
    Ok(())
}

pub fn metric(global: &Global) -> Outcome {
    let clock = Instant::now();
    let loaded = global.load()?;
    let c = &loaded.config;
    let cf = loaded.metric()?;
    let grid = loaded.grid()?;
    let window = TimeWindow::new(c.t_start, c.steps);
    let normalizer = OmegaNormalizer::new(&cf, grid, window)?;
    let cadence = c.snapshot_cadence.max(1);

    let mut out = String::from(METRIC_HEADER);
    out.push('\n');
    let levels = (0..=c.steps).filter(|k| k % cadence == 0 || *k == c.steps);
    for k in levels {
        let t = window.time(&grid, k);
        let omega = normalizer.slice(t)?;
        for (x, w) in grid.positions().zip(&omega.values) {
            let omega2 = cf.positive_value(t, x)?;
            let (gt, gx) = christoffel(&cf, t, x)?;
            let ricci = ricci_scalar(&cf, t, x)?;
            let _ = writeln!(out, "{t:.16e},{x:.16e},{omega2:.16e},{w:.16e},{gt:.16e},{gx:.16e},{ricci:.16e}");
        }
    }
    let outputs = vec![global.write_file("metric.csv", &out)?];
    Manifest {
        command: "metric",
        config_path: global.config.as_deref(),
        config: Some(c),
        outputs,
        norm_drift: None,
        wallclock_s: clock.elapsed().as_secs_f64(),
        summary: json!({ "metric_id": cf.id(), "omega2_max": normalizer.scale() }),
    }
    .write(global)?;
    println!("metric: {} ({} sites, {} steps)", cf.id(), grid.n_sites(), c.steps);
    Ok(())
}
