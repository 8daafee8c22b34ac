//! Convergence and validation sweeps over `ε`, `η` and metric amplitude.
//!
//! Every sweep point is an independent job. Jobs run on the ambient rayon
//! pool and results are merged into [`ExperimentTable`]'s deterministic row
//! order, so the CSV output does not depend on scheduling.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::curved::{Pipeline, PipelineConfig};
use crate::error::{Error, Result};
use crate::lattice::{fidelity, gaussian_packet, l2_distance, prob_norm, Grid, PacketParams};
use crate::metric::ConformalField;
use crate::reference::{conformal_oracle, flat_dirac_exact};
use crate::walk::{CoinParams, FlatWalk};

pub const TABLE_HEADER: &str = "eps,eta,metric_id,amplitude,l2_error,fidelity,norm_drift,wallclock_s";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub eps: f64,
    pub eta: f64,
    pub metric_id: String,
    pub amplitude: f64,
    pub l2_error: f64,
    pub fidelity: f64,
    pub norm_drift: f64,
    pub wallclock_s: f64,
}

/// Least-squares fit of `log(error)` against `log(eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    pub fit: Option<OrderFit>,
}

impl ExperimentTable {
    pub fn new(mut rows: Vec<ExperimentRow>) -> Self {
        rows.sort_by(|a, b| {
            a.metric_id
                .cmp(&b.metric_id)
                .then(a.eta.total_cmp(&b.eta))
                .then(b.eps.total_cmp(&a.eps))
                .then(b.amplitude.total_cmp(&a.amplitude))
        });
        Self { rows, fit: None }
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.l2_error).fold(0.0, f64::max)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.rows.iter().map(|r| r.norm_drift).fold(0.0, f64::max)
    }

    /// CSV with 17 significant digits. With `include_wallclock = false` the
    /// wallclock column is written as zero so reruns are byte-identical.
    pub fn to_csv(&self, include_wallclock: bool) -> String {
        let mut out = String::from(TABLE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let wall = if include_wallclock { r.wallclock_s } else { 0.0 };
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.eps, r.eta, r.metric_id, r.amplitude, r.l2_error, r.fidelity, r.norm_drift, wall
            );
        }
        out
    }
}

/// Slope and `r²` of the least-squares line through `(log eps, log error)`.
pub fn fit_order(eps_list: &[f64], errors: &[f64]) -> Result<OrderFit> {
    if eps_list.len() != errors.len() {
        return Err(Error::InvalidParameter("eps and error lists differ in length".into()));
    }
    if eps_list.len() < 3 {
        return Err(Error::InvalidParameter("order fit needs at least 3 points".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("eps list must be strictly decreasing".into()));
    }
    if let Some(e) = errors.iter().find(|&&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter(format!("error {e} is not positive; log-log fit undefined")));
    }
    let xs: Vec<f64> = eps_list.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    // Constant data is fit exactly by a flat line.
    let r2 = if ss_tot <= f64::EPSILON * f64::EPSILON * n { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(OrderFit { slope, r2 })
}

fn check_decreasing(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("eps list must be non-empty and strictly decreasing".into()));
    }
    Ok(())
}

fn steps_for(horizon: f64, eps: f64) -> Result<usize> {
    let ratio = horizon / eps;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} is not a multiple of eps {eps}")));
    }
    Ok(n as usize)
}

fn fit_if_possible(table: &mut ExperimentTable) {
    let eps: Vec<f64> = table.rows.iter().map(|r| r.eps).collect();
    let err: Vec<f64> = table.rows.iter().map(|r| r.l2_error).collect();
    table.fit = fit_order(&eps, &err).ok();
}

/// Flat walk against the spectral Dirac solution at fixed physical domain
/// and horizon, with `Δx = Δt = ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatSweep {
    pub mass: f64,
    pub eps_list: Vec<f64>,
    pub domain_length: f64,
    pub horizon: f64,
    pub packet: PacketParams<f64>,
}

impl FlatSweep {
    pub fn new(mass: f64, eps_list: Vec<f64>) -> Self {
        Self {
            mass,
            eps_list,
            domain_length: 8.0,
            horizon: 2.0,
            packet: PacketParams { x0: 0.0, sigma: 0.5, k0: 2.0, chi: 0.6, phase: 0.5 },
        }
    }
}

pub fn flat_convergence_sweep(plan: &FlatSweep) -> Result<ExperimentTable> {
    check_decreasing(&plan.eps_list)?;
    let rows = plan
        .eps_list
        .par_iter()
        .map(|&eps| {
            let clock = Instant::now();
            let grid = Grid::with_length(plan.domain_length, eps)?;
            let psi0 = gaussian_packet(grid, plan.packet)?;
            let steps = steps_for(plan.horizon, eps)?;
            let mut walked = psi0.clone();
            FlatWalk::new(CoinParams::new(eps, plan.mass)).run(&mut walked, steps);
            let exact = flat_dirac_exact(&psi0, plan.mass, plan.horizon);
            Ok(ExperimentRow {
                eps,
                eta: 0.0,
                metric_id: "flat".into(),
                amplitude: 0.0,
                l2_error: l2_distance(&walked, &exact)?,
                fidelity: fidelity(&walked, &exact)?,
                norm_drift: (prob_norm(&walked) - prob_norm(&psi0)).abs(),
                wallclock_s: clock.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ExperimentTable::new(rows);
    fit_if_possible(&mut table);
    Ok(table)
}

/// Template for massless curved runs compared against the conformal oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvedTemplate {
    pub metric: ConformalField<f64>,
    pub domain_length: f64,
    pub horizon: f64,
    pub t_start: f64,
    pub packet: PacketParams<f64>,
}

impl CurvedTemplate {
    pub fn new(metric: ConformalField<f64>) -> Self {
        Self {
            metric,
            domain_length: 16.0,
            horizon: 3.0,
            t_start: 0.0,
            packet: PacketParams { x0: -1.5, sigma: 0.5, k0: 0.0, chi: std::f64::consts::FRAC_PI_4, phase: 0.0 },
        }
    }

    fn config(&self, metric: ConformalField<f64>, eps: f64, eta: f64) -> Result<PipelineConfig<f64>> {
        let grid = Grid::with_length(self.domain_length, eps)?;
        let steps = steps_for(self.horizon, eps)?;
        let mut cfg = PipelineConfig::lattice_units(grid, steps, 0.0, eta, metric, self.packet)?;
        cfg.t_start = self.t_start;
        Ok(cfg)
    }
}

/// Outcome of one telescoped run compared with the conformal oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub l2_error: f64,
    pub fidelity: f64,
    pub norm_drift: f64,
}

/// Runs the telescoped pipeline and compares the decoded Ψ̃ sector with
/// `conformal_oracle` built from the same normalized weights.
pub fn compare_with_oracle(cfg: &PipelineConfig<f64>) -> Result<OracleComparison> {
    let pipeline = Pipeline::new(cfg.clone())?;
    let initial = pipeline.initial_state()?;
    let decoded = pipeline.run_telescoped_from(initial.clone())?;
    let omega0 = crate::metric::OmegaNormalizer::new(&cfg.metric, cfg.grid, cfg.window())?;
    let w0 = omega0.slice(pipeline.time(0))?;
    let wt = omega0.slice(pipeline.time(cfg.steps))?;
    let duration = pipeline.time(cfg.steps) - pipeline.time(0);
    let oracle = conformal_oracle(&initial.psi, &w0.values, &wt.values, duration)?;
    Ok(OracleComparison {
        l2_error: l2_distance(&decoded.psi, &oracle)?,
        fidelity: fidelity(&decoded.psi, &oracle)?,
        norm_drift: (decoded.total_norm() - initial.total_norm()).abs(),
    })
}

pub fn curved_convergence_sweep(
    template: &CurvedTemplate,
    eps_list: &[f64],
    eta_list: &[f64],
) -> Result<ExperimentTable> {
    check_decreasing(eps_list)?;
    if eta_list.is_empty() {
        return Err(Error::InvalidParameter("eta list is empty".into()));
    }
    let points: Vec<(f64, f64)> =
        eta_list.iter().flat_map(|&eta| eps_list.iter().map(move |&eps| (eps, eta))).collect();
    let rows = points
        .par_iter()
        .map(|&(eps, eta)| {
            let clock = Instant::now();
            let cfg = template.config(template.metric.clone(), eps, eta)?;
            let cmp = compare_with_oracle(&cfg)?;
            Ok(ExperimentRow {
                eps,
                eta,
                metric_id: template.metric.id().into(),
                amplitude: bump_amplitude(&template.metric),
                l2_error: cmp.l2_error,
                fidelity: cmp.fidelity,
                norm_drift: cmp.norm_drift,
                wallclock_s: clock.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ExperimentTable::new(rows);
    if eta_list.len() == 1 {
        fit_if_possible(&mut table);
    }
    Ok(table)
}

fn bump_amplitude(metric: &ConformalField<f64>) -> f64 {
    match metric.kind() {
        crate::metric::MetricKind::GaussianBumpStatic { amplitude, .. } => *amplitude,
        _ => 0.0,
    }
}

/// Gaussian-bump amplitude sweep at fixed `ε` and `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSweep {
    pub eps: f64,
    pub eta: f64,
    pub amplitudes: Vec<f64>,
    pub width: f64,
    pub center: f64,
    pub template: CurvedTemplate,
}

impl AmplitudeSweep {
    pub fn new(eps: f64, amplitudes: Vec<f64>) -> Self {
        Self {
            eps,
            eta: 1.0,
            amplitudes,
            width: 1.0,
            center: 0.0,
            template: CurvedTemplate::new(ConformalField::constant(1.0)),
        }
    }
}

pub fn amplitude_sweep(plan: &AmplitudeSweep) -> Result<ExperimentTable> {
    if plan.amplitudes.windows(2).any(|w| !(w[1] < w[0])) || plan.amplitudes.iter().any(|&a| a < 0.0) {
        return Err(Error::InvalidParameter("amplitudes must be decreasing and nonnegative".into()));
    }
    let rows = plan
        .amplitudes
        .par_iter()
        .map(|&amplitude| {
            let clock = Instant::now();
            let metric = ConformalField::gaussian_bump(amplitude, plan.width, plan.center);
            let cfg = plan.template.config(metric.clone(), plan.eps, plan.eta)?;
            let cmp = compare_with_oracle(&cfg)?;
            Ok(ExperimentRow {
                eps: plan.eps,
                eta: plan.eta,
                metric_id: metric.id().into(),
                amplitude,
                l2_error: cmp.l2_error,
                fidelity: cmp.fidelity,
                norm_drift: cmp.norm_drift,
                wallclock_s: clock.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentTable::new(rows))
}

/// Successive ratios `error(A_{i+1}) / error(A_i)` in row order.
pub fn successive_ratios(table: &ExperimentTable) -> Vec<f64> {
    table.rows.windows(2).map(|w| w[1].l2_error / w[0].l2_error).collect()
}

/// Zeroth-order residual at `t` for each `ε`, with the metric rebuilt per
/// grid by `metric_for` (so step-function tables can follow the lattice).
pub fn zeroth_order_sweep<F>(
    eps_list: &[f64],
    domain_length: f64,
    eta: f64,
    theta: f64,
    t: f64,
    metric_for: F,
) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&Grid<f64>) -> Result<ConformalField<f64>> + Sync,
{
    check_decreasing(eps_list)?;
    let packet = PacketParams { x0: 0.0, sigma: 0.5, k0: 0.0, chi: 0.0, phase: 0.0 };
    eps_list
        .par_iter()
        .map(|&eps| {
            let grid = Grid::with_length(domain_length, eps)?;
            let mut cfg = PipelineConfig::lattice_units(grid, 1, theta, eta, metric_for(&grid)?, packet)?;
            cfg.t_start = t;
            Ok((eps, Pipeline::new(cfg)?.zeroth_order_residual(t)?))
        })
        .collect()
}
