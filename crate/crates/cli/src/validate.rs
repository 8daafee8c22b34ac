//! Built-in invariant suite.

use std::time::Instant;

use conformal_qw::curved::{AncillaInit, Pipeline, PipelineConfig};
use conformal_qw::encoder::{build_encoder, conditions_residual, EncoderParams, EncodingOperator};
use conformal_qw::experiments::zeroth_order_sweep;
use conformal_qw::lattice::{gaussian_packet, l2_distance, Grid, PacketParams};
use conformal_qw::metric::{ConformalField, MetricTable, OmegaNormalizer, TimeWindow};
use conformal_qw::reference::transport_exact;
use conformal_qw::Result;
use serde_json::json;

use crate::commands::Global;
use crate::failure::{Failure, Outcome};

pub const CHECKS: [&str; 6] = [
    "encoder_unitarity",
    "encoder_conditions",
    "telescoping_equivalence",
    "pipeline_unitarity",
    "zeroth_order_scaling",
    "constant_metric_exactness",
];

/// Test hook: every encoder the suite builds is scaled by this factor.
#[derive(Debug, Clone, Copy)]
pub struct Fault(pub f64);

struct Report {
    passed: bool,
    detail: String,
}

fn packet() -> PacketParams<f64> {
    PacketParams { x0: -0.5, sigma: 0.5, k0: 1.0, chi: 0.8, phase: 0.4 }
}

fn bump() -> ConformalField<f64> {
    ConformalField::gaussian_bump(0.6, 1.0, 0.25)
}

fn encoders(fault: Fault) -> Result<Vec<(EncodingOperator<f64>, EncoderParams<f64>)>> {
    let grid = Grid::new(128, 1.0 / 16.0)?;
    let normalizer = OmegaNormalizer::new(&bump(), grid, TimeWindow::new(0.0, 0))?;
    let omega = normalizer.slice(0.0)?;
    let mut out = Vec::new();
    for eps in [1.0, 0.1, 1e-3] {
        for eta in [0.5, 1.0, 2.0] {
            let params = EncoderParams::new(eps, eta)?;
            let op = build_encoder(&omega.values, grid, params)?;
            out.push((if fault.0 == 1.0 { op } else { op.scaled(fault.0) }, params));
        }
    }
    Ok(out)
}

fn encoder_unitarity(fault: Fault) -> Result<Report> {
    let worst = encoders(fault)?.iter().map(|(op, _)| op.unitarity_defect()).fold(0.0, f64::max);
    Ok(Report { passed: worst <= 1e-12, detail: format!("max unitarity defect {worst:.3e}") })
}

fn encoder_conditions(fault: Fault) -> Result<Report> {
    let worst = encoders(fault)?.iter().map(|(op, p)| conditions_residual(op, *p).max()).fold(0.0, f64::max);
    Ok(Report { passed: worst <= 1e-12, detail: format!("max residual {worst:.3e}") })
}

fn pipeline(metric: ConformalField<f64>, steps: usize, t_start: f64) -> Result<Pipeline<f64>> {
    let grid = Grid::new(256, 1.0 / 32.0)?;
    let mut cfg = PipelineConfig::lattice_units(grid, steps, 0.9, 1.0, metric, packet())?;
    cfg.t_start = t_start;
    cfg.ancilla_init = AncillaInit::Packet;
    Pipeline::new(cfg)
}

fn metrics() -> Vec<(ConformalField<f64>, f64)> {
    vec![(bump(), 0.0), (ConformalField::exponential_time(1.0, 0.03), 0.0), (ConformalField::power_time(1.0, 1.5), 1.0)]
}

fn telescoping() -> Result<Report> {
    let mut worst: f64 = 0.0;
    for (metric, t_start) in metrics() {
        let p = pipeline(metric, 1000, t_start)?;
        let a = p.run_per_step(1000)?;
        worst = worst.max(a.last().l2_distance(&p.run_telescoped()?)?);
    }
    Ok(Report { passed: worst <= 1e-10, detail: format!("max per-step vs telescoped distance {worst:.3e}") })
}

fn unitarity() -> Result<Report> {
    let mut worst: f64 = 0.0;
    for (metric, t_start) in metrics() {
        worst = worst.max(pipeline(metric, 1000, t_start)?.run_per_step(1000)?.norm_drift);
    }
    Ok(Report { passed: worst <= 1e-12, detail: format!("max norm drift {worst:.3e} over 1000 steps") })
}

fn zeroth_order() -> Result<Report> {
    let eps = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    let ratios = |r: Vec<(f64, f64)>| r.windows(2).map(|w| w[0].1 / w[1].1).collect::<Vec<_>>();
    let smooth = ratios(zeroth_order_sweep(&eps, 8.0, 1.0, 0.0, 0.0, |_| Ok(bump()))?);
    let step = |g: &Grid<f64>| {
        let table =
            MetricTable::from_fn(vec![-1.0, 1.0], g.positions().collect(), |_, x| if x < 0.0 { 1.0 } else { 2.0 })?;
        Ok(ConformalField::tabulated(table))
    };
    let control = ratios(zeroth_order_sweep(&eps, 8.0, 1.0, 0.0, 0.0, step)?);
    Ok(Report {
        passed: smooth.iter().all(|r| (1.6..=2.4).contains(r)) && control.iter().all(|&r| r <= 1.1),
        detail: format!("smooth halving ratios {smooth:.3?}, step control {control:.3?}"),
    })
}

fn constant_exactness() -> Result<Report> {
    let mut worst: f64 = 0.0;
    for value in [0.25, 1.0, 4.0] {
        let grid = Grid::new(256, 1.0 / 32.0)?;
        let cfg = PipelineConfig::lattice_units(grid, 100, 0.0, 1.0, ConformalField::constant(value), packet())?;
        let out = Pipeline::new(cfg)?.run_telescoped()?;
        let exact = transport_exact(&gaussian_packet(grid, packet())?, 100.0 / 32.0)?;
        worst = worst.max(l2_distance(&out.psi, &exact)?);
    }
    Ok(Report { passed: worst <= 1e-12, detail: format!("max error vs exact transport {worst:.3e}") })
}

fn run_check(name: &str, fault: Fault) -> Result<Report> {
    match name {
        "encoder_unitarity" => encoder_unitarity(fault),
        "encoder_conditions" => encoder_conditions(fault),
        "telescoping_equivalence" => telescoping(),
        "pipeline_unitarity" => unitarity(),
        "zeroth_order_scaling" => zeroth_order(),
        "constant_metric_exactness" => constant_exactness(),
        other => unreachable!("unknown check {other}"),
    }
}

pub fn validate(global: &Global, list: bool, fault: Fault) -> Outcome {
    if list {
        for name in CHECKS {
            println!("{name}");
        }
        return Ok(());
    }
    let clock = Instant::now();
    let mut results = Vec::new();
    let mut failed = Vec::new();
    for name in CHECKS {
        let report = run_check(name, fault)?;
        println!("{} {name}: {}", if report.passed { "PASS" } else { "FAIL" }, report.detail);
        if !report.passed {
            failed.push(name);
        }
        results.push(json!({ "check": name, "passed": report.passed, "detail": report.detail }));
    }
    let manifest = json!({
        "command": "validate",
        "fault_scale": fault.0,
        "checks": results,
        "wallclock_s": clock.elapsed().as_secs_f64(),
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(anyhow::Error::from)?;
    global.write_file("validate_manifest.json", &(text + "\n"))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("failed checks: {}", failed.join(", "))))
    }
}
