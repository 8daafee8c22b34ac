//! Encode once, run the homogeneous doubled walk, decode once.
//!
//! The per-step form applies `U(t+Δt)·(I₂⊗S)𝒬_ε·U†(t)` at every step; the
//! telescoped form applies `U(T)·[(I₂⊗S)𝒬_ε]^n·U†(0)`. Both build their
//! encoders through [`Pipeline::encoder_at`], so the two agree up to
//! floating-point accumulation.

use num_complex::Complex;

use crate::encoder::{self, build_encoder, EncoderParams, EncodingOperator};
use crate::error::{Error, Result};
use crate::lattice::{gaussian_packet, DoubledField, Grid, PacketParams, SpinorField};
use crate::metric::{ConformalField, OmegaNormalizer, TimeWindow};
use crate::real::Real;
use crate::walk::{coin_matrix, CoinParams, DoubledWalk};

/// Initial content of the ancilla sector `Φ̃(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AncillaInit {
    #[default]
    Zero,
    Packet,
}

/// Which encoded sector carries the initial packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sector {
    #[default]
    Psi,
    Phi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T> {
    pub grid: Grid<T>,
    pub steps: usize,
    pub t_start: T,
    pub coin: CoinParams<T>,
    /// Coin of the Φ sector; `None` uses `coin`.
    pub coin_phi: Option<CoinParams<T>>,
    pub encoder: EncoderParams<T>,
    pub metric: ConformalField<T>,
    pub initial: PacketParams<T>,
    pub ancilla_init: AncillaInit,
    pub sector: Sector,
}

impl<T: Real> PipelineConfig<T> {
    /// Configuration in lattice units: the coin and encoder `ε` both equal
    /// the grid spacing.
    pub fn lattice_units(
        grid: Grid<T>,
        steps: usize,
        theta: T,
        eta: T,
        metric: ConformalField<T>,
        initial: PacketParams<T>,
    ) -> Result<Self> {
        Ok(Self {
            grid,
            steps,
            t_start: T::zero(),
            coin: CoinParams::new(grid.spacing(), theta),
            coin_phi: None,
            encoder: EncoderParams::new(grid.spacing(), eta)?,
            metric,
            initial,
            ancilla_init: AncillaInit::Zero,
            sector: Sector::Psi,
        })
    }

    pub fn window(&self) -> TimeWindow<T> {
        TimeWindow::new(self.t_start, self.steps)
    }

    pub fn t_end(&self) -> T {
        self.window().t_end(&self.grid)
    }
}

/// Encoded-frame states recorded along a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    /// `(step index, time, state)` in increasing step order; always contains
    /// step 0 and the final step.
    pub snapshots: Vec<(usize, T, DoubledField<T>)>,
    /// Largest `|total_norm − initial|` seen along the run.
    pub norm_drift: T,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &DoubledField<T> {
        &self.snapshots.last().expect("trajectory is never empty").2
    }
}

/// Validated pipeline with the `Ω_max` normalization of its window.
#[derive(Debug, Clone)]
pub struct Pipeline<T> {
    cfg: PipelineConfig<T>,
    normalizer: OmegaNormalizer<T>,
    bulk: DoubledWalk<T>,
}

impl<T: Real> Pipeline<T> {
    pub fn new(cfg: PipelineConfig<T>) -> Result<Self> {
        let dt = cfg.grid.dt();
        for coin in std::iter::once(cfg.coin).chain(cfg.coin_phi) {
            if (coin.eps - dt).abs() > T::lit(1e-12) * dt {
                return Err(Error::InvalidParameter(format!(
                    "coin eps = {} differs from the lattice step {dt}",
                    coin.eps
                )));
            }
        }
        let normalizer = OmegaNormalizer::new(&cfg.metric, cfg.grid, cfg.window())?;
        let bulk = DoubledWalk::new(cfg.coin, cfg.coin_phi.unwrap_or(cfg.coin));
        Ok(Self { cfg, normalizer, bulk })
    }

    pub fn config(&self) -> &PipelineConfig<T> {
        &self.cfg
    }

    /// `Ω_max` over the window.
    pub fn scale(&self) -> T {
        self.normalizer.scale()
    }

    pub fn time(&self, step: usize) -> T {
        self.cfg.window().time(&self.cfg.grid, step)
    }

    /// The encoder at time `t`. Every run mode goes through this routine.
    pub fn encoder_at(&self, t: T) -> Result<EncodingOperator<T>> {
        let omega = self.normalizer.slice(t)?;
        build_encoder(&omega.values, self.cfg.grid, self.cfg.encoder)
    }

    /// `Λ̃(0)`: the packet in the configured sector, the other sector per
    /// [`AncillaInit`].
    pub fn initial_state(&self) -> Result<DoubledField<T>> {
        let packet = gaussian_packet(self.cfg.grid, self.cfg.initial)?;
        let zeros = SpinorField::zeros(self.cfg.grid);
        let other = match self.cfg.ancilla_init {
            AncillaInit::Zero => zeros,
            AncillaInit::Packet => packet.clone(),
        };
        match self.cfg.sector {
            Sector::Psi => DoubledField::new(packet, other),
            Sector::Phi => DoubledField::new(other, packet),
        }
    }

    /// `U(t+Δt)·(I₂⊗S)𝒬_ε·U†(t)·Λ̃`.
    pub fn conjugated_step(&self, state_tilde: &DoubledField<T>, t: T) -> Result<DoubledField<T>> {
        let before = self.encoder_at(t)?;
        let after = self.encoder_at(t + self.cfg.grid.dt())?;
        let mut s = encoder::encode(state_tilde, &before)?;
        self.bulk.step(&mut s);
        encoder::decode(&s, &after)
    }

    /// Iterates [`Self::conjugated_step`] from `Λ̃(0)`, recording every
    /// `cadence`-th step (and the last one).
    pub fn run_per_step(&self, cadence: usize) -> Result<Trajectory<T>> {
        self.run_per_step_from(self.initial_state()?, cadence)
    }

    pub fn run_per_step_from(&self, initial: DoubledField<T>, cadence: usize) -> Result<Trajectory<T>> {
        let cadence = cadence.max(1);
        let n0 = initial.total_norm();
        let mut drift = T::zero();
        let mut snapshots = vec![(0, self.time(0), initial.clone())];
        let mut state = initial;
        let mut current = self.encoder_at(self.time(0))?;
        for k in 0..self.cfg.steps {
            let next = self.encoder_at(self.time(k + 1))?;
            encoder::apply_adjoint_in_place(&mut state, &current);
            self.bulk.step(&mut state);
            encoder::apply_in_place(&mut state, &next);
            current = next;
            drift = drift.max((state.total_norm() - n0).abs());
            if (k + 1) % cadence == 0 || k + 1 == self.cfg.steps {
                snapshots.push((k + 1, self.time(k + 1), state.clone()));
            }
        }
        Ok(Trajectory { snapshots, norm_drift: drift })
    }

    /// `U(T)·[(I₂⊗S)𝒬_ε]^n·U†(0)·Λ̃(0)`: two encoder constructions in total.
    pub fn run_telescoped(&self) -> Result<DoubledField<T>> {
        self.run_telescoped_from(self.initial_state()?)
    }

    pub fn run_telescoped_from(&self, initial: DoubledField<T>) -> Result<DoubledField<T>> {
        let mut flat = encoder::encode(&initial, &self.encoder_at(self.time(0))?)?;
        homogeneous_bulk(&mut flat, &self.bulk, self.cfg.steps);
        encoder::decode(&flat, &self.encoder_at(self.time(self.cfg.steps))?)
    }

    /// Telescoped run that also decodes (without re-encoding) at every
    /// `cadence`-th step for output.
    pub fn run_telescoped_snapshots(&self, cadence: usize) -> Result<Trajectory<T>> {
        let cadence = cadence.max(1);
        let initial = self.initial_state()?;
        let n0 = initial.total_norm();
        let mut flat = encoder::encode(&initial, &self.encoder_at(self.time(0))?)?;
        let mut snapshots = vec![(0, self.time(0), encoder::decode(&flat, &self.encoder_at(self.time(0))?)?)];
        let mut drift = (snapshots[0].2.total_norm() - n0).abs();
        let mut done = 0;
        while done < self.cfg.steps {
            let chunk = cadence.min(self.cfg.steps - done);
            homogeneous_bulk(&mut flat, &self.bulk, chunk);
            done += chunk;
            let t = self.time(done);
            let decoded = encoder::decode(&flat, &self.encoder_at(t)?)?;
            drift = drift.max((decoded.total_norm() - n0).abs());
            snapshots.push((done, t, decoded));
        }
        Ok(Trajectory { snapshots, norm_drift: drift })
    }

    /// Flat-frame state `Λ(T)` (before the final decode).
    pub fn run_flat_frame(&self) -> Result<DoubledField<T>> {
        let mut flat = encoder::encode(&self.initial_state()?, &self.encoder_at(self.time(0))?)?;
        homogeneous_bulk(&mut flat, &self.bulk, self.cfg.steps);
        Ok(flat)
    }

    /// Largest Frobenius distance from `I₄` of the single-site map
    /// `S⁻¹·U(t+Δt)·(I₂⊗S)𝒬_ε·U†(t)`, assembled column by column from inputs
    /// localized on one site and one internal state.
    pub fn zeroth_order_residual(&self, t: T) -> Result<T> {
        let before = self.encoder_at(t)?;
        let after = self.encoder_at(t + self.cfg.grid.dt())?;
        let coin_psi = coin_matrix(self.cfg.coin);
        let coin_phi = coin_matrix(self.cfg.coin_phi.unwrap_or(self.cfg.coin));
        let grid = self.cfg.grid;
        let zero = Complex::new(T::zero(), T::zero());
        let mut worst = T::zero();
        for j in 0..grid.n_sites() {
            let (a, b, c, d) = before.coefficients(j);
            // Up amplitudes land on j−1, down amplitudes on j+1.
            let up_after = after.coefficients(grid.wrap(j, -1));
            let dn_after = after.coefficients(grid.wrap(j, 1));
            let mut defect = T::zero();
            for col in 0..4 {
                // basis order: ψ↑, ψ↓, φ↑, φ↓
                let mut v = [zero; 4];
                v[col] = Complex::new(T::one(), T::zero());
                let mix = |x: Complex<T>, y: Complex<T>, m: (T, T, T, T)| {
                    (x.scale(m.0) + y.scale(m.1), x.scale(m.2) + y.scale(m.3))
                };
                let adj = (a, -c, b, d);
                let (pu, fu) = mix(v[0], v[2], adj);
                let (pd, fd) = mix(v[1], v[3], adj);
                let (pu, pd) = coin_psi.apply(pu, pd);
                let (fu, fd) = coin_phi.apply(fu, fd);
                let fwd = |m: (T, T, T, T)| (m.0, m.1, -m.2, m.3);
                let (pu, fu) = mix(pu, fu, fwd(up_after));
                let (pd, fd) = mix(pd, fd, fwd(dn_after));
                let out = [pu, pd, fu, fd];
                for (row, z) in out.iter().enumerate() {
                    let target = if row == col { T::one() } else { T::zero() };
                    defect = defect + (*z - Complex::new(target, T::zero())).norm_sqr();
                }
            }
            worst = worst.max(defect.sqrt());
        }
        Ok(worst)
    }
}

pub const SNAPSHOT_HEADER: &str = "t,x,re_up,im_up,re_dn,im_dn,prob";

/// Snapshot CSV of one sector: a row per site per recorded time.
pub fn snapshot_csv<T: Real>(traj: &Trajectory<T>, sector: Sector) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(SNAPSHOT_HEADER);
    out.push('\n');
    for (_, t, state) in &traj.snapshots {
        let field = match sector {
            Sector::Psi => &state.psi,
            Sector::Phi => &state.phi,
        };
        for ((x, u), d) in field.grid().positions().zip(field.up()).zip(field.down()) {
            let prob = u.norm_sqr() + d.norm_sqr();
            let _ =
                writeln!(out, "{t:.16e},{x:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{prob:.16e}", u.re, u.im, d.re, d.im);
        }
    }
    out
}

/// The homogeneous part of the pipeline. It takes no metric input.
pub fn homogeneous_bulk<T: Real>(state: &mut DoubledField<T>, walk: &DoubledWalk<T>, steps: usize) {
    walk.run(state, steps);
}

pub fn conjugated_step<T: Real>(
    state_tilde: &DoubledField<T>,
    t: T,
    cfg: &PipelineConfig<T>,
) -> Result<DoubledField<T>> {
    Pipeline::new(cfg.clone())?.conjugated_step(state_tilde, t)
}

pub fn run_per_step<T: Real>(cfg: &PipelineConfig<T>, cadence: usize) -> Result<Trajectory<T>> {
    Pipeline::new(cfg.clone())?.run_per_step(cadence)
}

pub fn run_telescoped<T: Real>(cfg: &PipelineConfig<T>) -> Result<DoubledField<T>> {
    Pipeline::new(cfg.clone())?.run_telescoped()
}

pub fn zeroth_order_residual<T: Real>(cfg: &PipelineConfig<T>, t: T) -> Result<T> {
    Pipeline::new(cfg.clone())?.zeroth_order_residual(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{l2_distance, prob_norm};
    use crate::walk::shift_apply;

    fn packet() -> PacketParams<f64> {
        PacketParams { x0: -1.0, sigma: 0.5, k0: 2.0, chi: 0.9, phase: 0.4 }
    }

    fn cfg(metric: ConformalField<f64>, theta: f64, steps: usize) -> PipelineConfig<f64> {
        let grid = Grid::with_length(8.0, 1.0 / 16.0).unwrap();
        PipelineConfig::lattice_units(grid, steps, theta, 1.0, metric, packet()).unwrap()
    }

    #[test]
    fn constant_metric_single_step_is_shift() {
        let p = Pipeline::new(cfg(ConformalField::constant(2.0), 0.0, 1)).unwrap();
        let s0 = p.initial_state().unwrap();
        let s1 = p.conjugated_step(&s0, 0.0).unwrap();
        assert!(l2_distance(&s1.psi, &shift_apply(&s0.psi)).unwrap() < 1e-15);
        assert!(prob_norm(&s1.phi) < 1e-30);
    }

    #[test]
    fn conjugated_step_preserves_norm() {
        let p = Pipeline::new(cfg(ConformalField::gaussian_bump(0.8, 0.7, 0.0), 1.0, 4)).unwrap();
        let s0 = p.initial_state().unwrap();
        let s1 = p.conjugated_step(&s0, 0.0).unwrap();
        assert!((s1.total_norm() - s0.total_norm()).abs() < 1e-14);
    }

    #[test]
    fn static_metric_step_is_time_independent() {
        let p = Pipeline::new(cfg(ConformalField::gaussian_bump(0.8, 0.7, 0.0), 1.0, 40)).unwrap();
        let s0 = p.initial_state().unwrap();
        assert_eq!(p.conjugated_step(&s0, 0.0).unwrap(), p.conjugated_step(&s0, 1.5).unwrap());
    }

    #[test]
    fn zero_initial_field_stays_zero() {
        let p = Pipeline::new(cfg(ConformalField::gaussian_bump(0.8, 0.7, 0.0), 1.0, 20)).unwrap();
        let zero = DoubledField::zeros(p.config().grid);
        let tr = p.run_per_step_from(zero.clone(), 5).unwrap();
        assert!(tr.snapshots.iter().all(|(_, _, s)| *s == zero));
        assert_eq!(tr.snapshots.len(), 5);
    }

    #[test]
    fn zero_steps_is_identity() {
        let p = Pipeline::new(cfg(ConformalField::exponential_time(1.0, 0.5), 0.7, 0)).unwrap();
        let s0 = p.initial_state().unwrap();
        assert!(p.run_telescoped().unwrap().l2_distance(&s0).unwrap() < 1e-14);
    }

    #[test]
    fn per_step_matches_telescoped() {
        let p = Pipeline::new(cfg(ConformalField::exponential_time(1.0, 0.3), 0.8, 200)).unwrap();
        let per = p.run_per_step(50).unwrap();
        let tel = p.run_telescoped().unwrap();
        assert!(per.last().l2_distance(&tel).unwrap() < 1e-12);
        assert!(per.norm_drift < 1e-13);
        let snaps = p.run_telescoped_snapshots(50).unwrap();
        assert_eq!(snaps.snapshots.len(), per.snapshots.len());
        for ((k1, _, a), (k2, _, b)) in per.snapshots.iter().zip(&snaps.snapshots) {
            assert_eq!(k1, k2);
            assert!(a.l2_distance(b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn phi_sector_constant_metric_is_exact_transport() {
        let mut c = cfg(ConformalField::constant(0.5), 0.0, 37);
        c.sector = Sector::Phi;
        let p = Pipeline::new(c).unwrap();
        let s0 = p.initial_state().unwrap();
        let out = p.run_telescoped().unwrap();
        let mut expect = s0.phi.clone();
        for _ in 0..37 {
            expect = shift_apply(&expect);
        }
        assert!(l2_distance(&out.phi, &expect).unwrap() < 1e-14);
    }

    #[test]
    fn zeroth_order_residual_vanishes_for_constant_metric() {
        let p = Pipeline::new(cfg(ConformalField::constant(3.0), 0.0, 10)).unwrap();
        assert!(p.zeroth_order_residual(0.0).unwrap() <= 1e-14);
    }

    #[test]
    fn rejects_mismatched_coin_step() {
        let mut c = cfg(ConformalField::constant(1.0), 0.0, 10);
        c.coin.eps = 0.1;
        assert!(Pipeline::new(c).is_err());
    }

    #[test]
    fn rejects_nonpositive_metric() {
        let c = cfg(ConformalField::constant(0.0), 0.0, 10);
        assert!(matches!(Pipeline::new(c), Err(Error::NonpositiveConformalFactor { .. })));
    }

    #[test]
    fn snapshot_csv_has_a_row_per_site_per_time() {
        let grid = Grid::new(16, 0.25).unwrap();
        let p = PacketParams { x0: 0.0, sigma: 0.5, k0: 0.0, chi: 0.0, phase: 0.0 };
        let cfg = PipelineConfig::lattice_units(grid, 4, 0.0, 1.0, ConformalField::constant(1.0), p).unwrap();
        let traj = Pipeline::new(cfg).unwrap().run_telescoped_snapshots(2).unwrap();
        let csv = snapshot_csv(&traj, Sector::Psi);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], SNAPSHOT_HEADER);
        assert_eq!(lines.len(), 1 + 3 * 16);
        assert!(lines[1].split(',').all(|f| f.parse::<f64>().is_ok()));
    }
}
