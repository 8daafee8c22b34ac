//! Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::{FRAC_PI_4, PI};
use std::process::ExitCode;
use std::time::Instant;

use conformal_qw::curved::{AncillaInit, Pipeline, PipelineConfig};
use conformal_qw::encoder::{build_encoder, conditions_residual, EncoderParams};
use conformal_qw::experiments::{
    amplitude_sweep, curved_convergence_sweep, fit_order, flat_convergence_sweep, successive_ratios,
    zeroth_order_sweep, AmplitudeSweep, CurvedTemplate, FlatSweep,
};
use conformal_qw::lattice::{gaussian_packet, l2_distance, Grid, Matrix2, PacketParams, SpinorField};
use conformal_qw::metric::{ricci_scalar, ConformalField, MetricTable};
use conformal_qw::reference::{cn_evolve, conformal_oracle, transport_exact};
use conformal_qw::walk::{CoinParams, FlatWalk};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const SWEEP_EPS: [f64; 4] = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0];

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn packet() -> PacketParams<f64> {
    PacketParams { x0: -1.0, sigma: 0.5, k0: 1.5, chi: 0.7, phase: 0.3 }
}

fn random_smooth_metric(rng: &mut ChaCha8Rng) -> (ConformalField<f64>, f64) {
    match rng.gen_range(0..4) {
        0 => (
            ConformalField::gaussian_bump(rng.gen_range(0.05..2.0), rng.gen_range(0.4..2.0), rng.gen_range(-2.0..2.0)),
            0.0,
        ),
        1 => (ConformalField::exponential_time(rng.gen_range(0.5..2.0), rng.gen_range(-0.05..0.05)), 0.0),
        2 => (ConformalField::power_time(rng.gen_range(0.5..2.0), rng.gen_range(0.5..3.0)), 1.0),
        _ => (ConformalField::constant(rng.gen_range(0.1..5.0)), 0.0),
    }
}

fn unitarity() -> Outcome {
    let grid = Grid::new(256, 1.0 / 32.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (metric, t_start) = random_smooth_metric(&mut rng);
        let eta = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let mut cfg = PipelineConfig::lattice_units(grid, 1000, rng.gen_range(0.0..3.0), eta, metric, packet())
            .map_err(|e| e.to_string())?;
        cfg.t_start = t_start;
        if rng.gen_bool(0.5) {
            cfg.ancilla_init = AncillaInit::Packet;
        }
        let traj = Pipeline::new(cfg).and_then(|p| p.run_per_step(1000)).map_err(|e| e.to_string())?;
        worst = worst.max(traj.norm_drift);
    }
    check(worst <= 1e-12, format!("max norm drift {worst:.3e} over 20 seeds x 1000 steps"))
}

fn smooth_table() -> ConformalField<f64> {
    let times: Vec<f64> = (0..=40).map(|k| k as f64).collect();
    let xs: Vec<f64> = (0..=64).map(|k| -8.0 + 0.25 * k as f64).collect();
    let table = MetricTable::from_fn(times, xs, |t, x| 1.0 + 0.3 * (x / 2.0).sin() * (-t / 20.0).exp())
        .expect("positive table");
    ConformalField::tabulated(table)
}

fn telescoping() -> Outcome {
    let grid = Grid::new(512, 1.0 / 32.0).map_err(|e| e.to_string())?;
    let cases = [
        (ConformalField::constant(2.0), 0.0),
        (ConformalField::gaussian_bump(0.8, 1.0, 0.5), 0.0),
        (ConformalField::exponential_time(1.0, 0.04), 0.0),
        (ConformalField::power_time(1.0, 2.0), 1.0),
        (smooth_table(), 0.0),
    ];
    let mut worst: f64 = 0.0;
    for (metric, t_start) in cases {
        let mut cfg =
            PipelineConfig::lattice_units(grid, 1000, 0.7, 1.0, metric, packet()).map_err(|e| e.to_string())?;
        cfg.t_start = t_start;
        cfg.ancilla_init = AncillaInit::Packet;
        let p = Pipeline::new(cfg).map_err(|e| e.to_string())?;
        let per_step = p.run_per_step(1000).map_err(|e| e.to_string())?;
        let telescoped = p.run_telescoped().map_err(|e| e.to_string())?;
        worst = worst.max(per_step.last().l2_distance(&telescoped).map_err(|e| e.to_string())?);
    }
    check(worst <= 1e-10, format!("max per-step vs telescoped distance {worst:.3e} over 5 metric kinds"))
}

fn encoder_conditions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = Grid::new(4, 0.5).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let omega = rng.gen_range(0.05..=1.0);
        let eps = if k == 0 { 1.0 } else { 10f64.powf(rng.gen_range(-3.0..=0.0)) };
        let eta = [0.5, 1.0, 2.0][k % 3];
        let params = EncoderParams::new(eps, eta).map_err(|e| e.to_string())?;
        let op = build_encoder(&[omega; 4], grid, params).map_err(|e| e.to_string())?;
        worst = worst.max(conditions_residual(&op, params).max());
    }
    check(worst <= 1e-12, format!("max residual {worst:.3e} over 1000 (omega, eps, eta) triples"))
}

fn random_unitary(rng: &mut ChaCha8Rng) -> Matrix2<f64> {
    let (a, b) = (rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI));
    let (c, g) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
    let u = Complex::from_polar(a.cos(), b);
    let v = Complex::from_polar(a.sin(), c);
    let phase = Complex::from_polar(1.0, g);
    Matrix2::new(u * phase, -v.conj() * phase, v * phase, u.conj() * phase)
}

fn no_go() -> Outcome {
    let grid = Grid::new(256, 1.0 / 16.0).map_err(|e| e.to_string())?;
    let field = gaussian_packet(grid, packet()).map_err(|e| e.to_string())?;
    let rho = field.density();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mats: Vec<_> = (0..grid.n_sites()).map(|_| random_unitary(&mut rng)).collect();
        let moved = field.apply_site_matrices(&mats).map_err(|e| e.to_string())?;
        let diff = moved.density().iter().zip(&rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    check(worst <= 1e-15, format!("max site-wise density change {worst:.3e} over 100 random unitaries"))
}

fn flat_convergence() -> Outcome {
    let table = flat_convergence_sweep(&FlatSweep::new(0.5, SWEEP_EPS.to_vec())).map_err(|e| e.to_string())?;
    let fit = table.fit.ok_or("order fit unavailable")?;
    check(fit.slope >= 0.9 && fit.r2 >= 0.98, format!("order {:.3}, r2 {:.5}", fit.slope, fit.r2))
}

fn massless_flat() -> Outcome {
    let mut worst: f64 = 0.0;
    for eps in SWEEP_EPS {
        let grid = Grid::with_length(8.0, eps).map_err(|e| e.to_string())?;
        let psi0 = gaussian_packet(grid, packet()).map_err(|e| e.to_string())?;
        let mut walked = psi0.clone();
        let steps = (2.0 / eps).round() as usize;
        FlatWalk::new(CoinParams::massless(eps)).run(&mut walked, steps);
        let exact = transport_exact(&psi0, 2.0).map_err(|e| e.to_string())?;
        worst = worst.max(l2_distance(&walked, &exact).map_err(|e| e.to_string())?);
    }
    check(worst <= 1e-12, format!("max error {worst:.3e} over 4 levels"))
}

fn constant_metric_pipeline() -> Outcome {
    let grid = Grid::new(256, 1.0 / 32.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for omega2 in [0.25, 1.0, 4.0] {
        for eta in [0.5, 1.0, 2.0] {
            let cfg = PipelineConfig::lattice_units(grid, 128, 0.0, eta, ConformalField::constant(omega2), packet())
                .map_err(|e| e.to_string())?;
            let decoded = Pipeline::new(cfg).and_then(|p| p.run_telescoped()).map_err(|e| e.to_string())?;
            let psi0 = gaussian_packet(grid, packet()).map_err(|e| e.to_string())?;
            let exact = transport_exact(&psi0, 4.0).map_err(|e| e.to_string())?;
            worst = worst.max(l2_distance(&decoded.psi, &exact).map_err(|e| e.to_string())?);
        }
    }
    check(worst <= 1e-12, format!("max error {worst:.3e} over 9 (omega2, eta) pairs"))
}

fn oracle_consistency() -> Outcome {
    let cf = ConformalField::gaussian_bump(0.1, 1.0, 0.0);
    let p = PacketParams { x0: -1.5, sigma: 0.5, k0: 0.0, chi: FRAC_PI_4, phase: 0.0 };
    let duration = 3.0;
    let run = |eps: f64, substeps: usize| -> Result<(SpinorField<f64>, SpinorField<f64>), String> {
        let grid = Grid::with_length(16.0, eps).map_err(|e| e.to_string())?;
        let psi = gaussian_packet(grid, p).map_err(|e| e.to_string())?;
        let w: Vec<f64> = grid.positions().map(|x| cf.value(0.0, x).sqrt()).collect();
        let oracle = conformal_oracle(&psi, &w, &w, duration).map_err(|e| e.to_string())?;
        let cn = cn_evolve(&psi, &cf, 0.0, 0.0, duration, substeps).map_err(|e| e.to_string())?;
        Ok((cn.field, oracle))
    };

    let levels = [128usize, 256, 512, 1024];
    let fields = levels.iter().map(|&s| run(1.0 / 32.0, s).map(|r| r.0)).collect::<Result<Vec<_>, _>>()?;
    let diffs = fields
        .windows(2)
        .map(|w| l2_distance(&w[0], &w[1]).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let dts: Vec<f64> = levels[..3].iter().map(|&s| duration / s as f64).collect();
    let order = fit_order(&dts, &diffs).map_err(|e| e.to_string())?.slope;

    let mut oracle_err = Vec::new();
    for (eps, substeps) in [(1.0 / 16.0, 96usize), (1.0 / 32.0, 192), (1.0 / 64.0, 384)] {
        let (cn, oracle) = run(eps, substeps)?;
        oracle_err.push(l2_distance(&cn, &oracle).map_err(|e| e.to_string())?);
    }
    let refines = oracle_err.windows(2).all(|w| w[1] < w[0]);
    check(
        (order - 2.0).abs() <= 0.3 && refines,
        format!("self-convergence order {order:.3}; oracle errors under joint refinement [{}]", sci(&oracle_err)),
    )
}

fn weak_field() -> Outcome {
    let table =
        amplitude_sweep(&AmplitudeSweep::new(1.0 / 256.0, vec![0.2, 0.1, 0.05, 0.025])).map_err(|e| e.to_string())?;
    let ratios = successive_ratios(&table);
    let fid_ok = table.rows.windows(2).all(|w| w[1].fidelity >= w[0].fidelity);

    let curved = curved_convergence_sweep(
        &CurvedTemplate::new(ConformalField::gaussian_bump(0.1, 1.0, 0.0)),
        &[1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0],
        &[1.0],
    )
    .map_err(|e| e.to_string())?;
    let findings = curved.fit.map(|f| format!("{:.3}", f.slope)).unwrap_or_else(|| "n/a".into());
    check(
        ratios.iter().all(|&r| r <= 0.6) && fid_ok,
        format!(
            "error ratios {ratios:.3?}, fidelity nondecreasing {fid_ok}; curved eps-sweep order (finding) {findings}"
        ),
    )
}

fn step_table(grid: &Grid<f64>) -> conformal_qw::Result<ConformalField<f64>> {
    let xs: Vec<f64> = grid.positions().collect();
    let table = MetricTable::from_fn(vec![-1.0, 1.0], xs, |_, x| if x < 0.0 { 1.0 } else { 2.0 })?;
    Ok(ConformalField::tabulated(table))
}

fn zeroth_order() -> Outcome {
    let eps = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
    let bump = ConformalField::gaussian_bump(0.5, 1.0, 0.0);
    let ratios = |res: Vec<(f64, f64)>| res.windows(2).map(|w| w[0].1 / w[1].1).collect::<Vec<_>>();
    let smooth = ratios(zeroth_order_sweep(&eps, 8.0, 1.0, 0.0, 0.0, |_| Ok(bump.clone())).map_err(|e| e.to_string())?);
    let control = ratios(zeroth_order_sweep(&eps, 8.0, 1.0, 0.0, 0.0, step_table).map_err(|e| e.to_string())?);
    check(
        smooth.iter().all(|r| (1.6..=2.4).contains(r)) && control.iter().all(|&r| r <= 1.1),
        format!("smooth ratios {smooth:.3?}; step control ratios {control:.3?}"),
    )
}

fn curvature() -> Outcome {
    let cf = ConformalField::power_time(1.0, 2.0);
    let mut worst: f64 = 0.0;
    for k in 0..=100 {
        let t = 1.0 + k as f64 / 100.0;
        let r = ricci_scalar(&cf, t, 0.3).map_err(|e| e.to_string())?;
        worst = worst.max((r - 4.0 / t.powi(6)).abs());
    }
    let flat = ricci_scalar(&ConformalField::constant(3.0), 0.5, 0.3).map_err(|e| e.to_string())?;
    check(worst <= 1e-10 && flat == 0.0, format!("max |R - 4/t^6| {worst:.3e}; constant metric R = {flat}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("unitarity of conjugated steps", unitarity),
        ("per-step equals telescoped", telescoping),
        ("encoder block conditions", encoder_conditions),
        ("per-site unitary leaves densities invariant", no_go),
        ("flat massive convergence order", flat_convergence),
        ("massless flat walk is exact transport", massless_flat),
        ("constant metric pipeline is exact", constant_metric_pipeline),
        ("Crank-Nicolson vs conformal oracle", oracle_consistency),
        ("weak-field amplitude sweep", weak_field),
        ("zeroth-order residual scaling", zeroth_order),
        ("curvature diagnostics", curvature),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let outcome = run();
        let secs = clock.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
