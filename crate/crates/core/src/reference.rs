//! Independent solvers used as oracles for the walk.
//!
//! * [`transport_exact`]: massless flat propagation, an exact lattice shift.
//! * [`flat_dirac_exact`]: massive flat Dirac equation
//!   `i∂_tΨ = iσ_z∂_xΨ − mσ_xΨ`, solved mode by mode in momentum space.
//! * [`conformal_oracle`]: massless curved solution by conformal weight,
//!   `Ψ(T) = transport(ω₀·Ψ₀)/ω_T`.
//! * [`cn_evolve`]: Crank–Nicolson integration of
//!   `i(∂_t + Ω̇/2Ω)Ψ = iσ_z(∂_x + Ω′/2Ω)Ψ − Ω·m·σ_xΨ`.
//!
//! The curved equation couples the mass through `σ_x` so that `Ω ≡ 1`
//! reduces it to the flat equation above.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::lattice::{Grid, Matrix2, SpinorField};
use crate::metric::{ConformalField, Derivative};
use crate::real::Real;

/// Smallest conformal weight accepted as a divisor.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Number of whole lattice sites in a displacement `distance`.
fn lattice_sites<T: Real>(grid: &Grid<T>, distance: T) -> Result<isize> {
    let ratio = distance / grid.dx();
    let n = ratio.round();
    if (ratio - n).abs() > T::lit(1e-9) * ratio.abs().max(T::one()) {
        return Err(Error::InvalidParameter(format!(
            "transport time {distance} is not a multiple of the lattice step {}",
            grid.dx()
        )));
    }
    n.to_isize().ok_or_else(|| Error::InvalidParameter(format!("transport time {distance} out of range")))
}

/// Up component translated by `−T`, down by `+T`. `T` must be a multiple
/// of the time step.
pub fn transport_exact<T: Real>(psi0: &SpinorField<T>, duration: T) -> Result<SpinorField<T>> {
    let grid = *psi0.grid();
    let n = grid.n_sites() as isize;
    let s = lattice_sites(&grid, duration)?.rem_euclid(n) as usize;
    let mut out = psi0.clone();
    let (up, down) = out.components_mut();
    up.rotate_left(s);
    down.rotate_right(s);
    Ok(out)
}

/// Wavenumber of DFT bin `m` on `grid`, in `[−π/dx, π/dx)`.
fn wavenumber<T: Real>(grid: &Grid<T>, m: usize) -> T {
    let n = grid.n_sites();
    let signed = if m < n.div_ceil(2) { m as f64 } else { m as f64 - n as f64 };
    T::lit(2.0) * T::PI() * T::lit(signed) / grid.length()
}

/// Exact propagator `exp(−iT·H_k)` of one momentum mode, `H_k = −kσ_z − mσ_x`.
pub fn mode_propagator<T: Real>(k: T, mass: T, duration: T) -> Matrix2<T> {
    let energy = (k * k + mass * mass).sqrt();
    if energy == T::zero() {
        return Matrix2::identity();
    }
    let (s, c) = (energy * duration).sin_cos();
    let ks = s * k / energy;
    let ms = s * mass / energy;
    Matrix2::new(Complex::new(c, ks), Complex::new(T::zero(), ms), Complex::new(T::zero(), ms), Complex::new(c, -ks))
}

/// Massive flat Dirac evolution by discrete Fourier decomposition.
pub fn flat_dirac_exact<T: Real>(psi0: &SpinorField<T>, mass: T, duration: T) -> SpinorField<T> {
    let grid = *psi0.grid();
    let n = grid.n_sites();
    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut up = psi0.up().to_vec();
    let mut down = psi0.down().to_vec();
    forward.process(&mut up);
    forward.process(&mut down);
    for m in 0..n {
        let prop = mode_propagator(wavenumber(&grid, m), mass, duration);
        let (u, d) = prop.apply(up[m], down[m]);
        up[m] = u;
        down[m] = d;
    }
    inverse.process(&mut up);
    inverse.process(&mut down);
    let norm = T::from_count(n).recip();
    up.iter_mut().chain(down.iter_mut()).for_each(|a| *a = a.scale(norm));
    SpinorField::from_components(grid, up, down).expect("lengths preserved by the transform")
}

/// Massless curved solution by conformal weight:
/// `transport_exact(ω₀ ⊙ ψ̃₀, T) ⊘ ω_T`.
pub fn conformal_oracle<T: Real>(
    psi_tilde0: &SpinorField<T>,
    omega0: &[T],
    omega_t: &[T],
    duration: T,
) -> Result<SpinorField<T>> {
    let floor = T::lit(WEIGHT_FLOOR);
    if let Some((site, &w)) = omega_t.iter().enumerate().find(|(_, &w)| !(w >= floor)) {
        return Err(Error::WeightBelowFloor { site, value: w.to_f64().unwrap_or(f64::NAN), floor: WEIGHT_FLOOR });
    }
    let weighted = psi_tilde0.weighted(omega0)?;
    let moved = transport_exact(&weighted, duration)?;
    let inverse: Vec<T> = omega_t.iter().map(|w| w.recip()).collect();
    moved.weighted(&inverse)
}

/// Result of a Crank–Nicolson run.
#[derive(Debug, Clone, PartialEq)]
pub struct CnOutcome<T> {
    pub field: SpinorField<T>,
    /// `Σ Ω|Ψ|² dx` at the start and the end of the run.
    pub weighted_norm: (T, T),
    /// Whether the metric gradients were found to be under-resolved.
    pub under_resolved: bool,
}

/// Periodic block-tridiagonal system `A_j x_{j−1} + B_j x_j + C_j x_{j+1} = r_j`
/// with 2×2 blocks.
struct PeriodicBlockSystem<T> {
    lower: Vec<Matrix2<T>>,
    diag: Vec<Matrix2<T>>,
    upper: Vec<Matrix2<T>>,
}

/// LU-style factorization of a [`PeriodicBlockSystem`] by block Thomas
/// elimination on the first `n−1` unknowns plus a 2×2 Schur complement for
/// the last one.
struct PeriodicBlockFactor<T> {
    lower: Vec<Matrix2<T>>,
    last_row_upper: Matrix2<T>,
    last_row_lower: Matrix2<T>,
    pivot_inv: Vec<Matrix2<T>>,
    upper_mod: Vec<Matrix2<T>>,
    coupling: Vec<Matrix2<T>>,
    schur_inv: Matrix2<T>,
}

type Vec2<T> = (Complex<T>, Complex<T>);

fn sub2<T: Real>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    (a.0 - b.0, a.1 - b.1)
}

impl<T: Real> PeriodicBlockSystem<T> {
    fn factorize(&self) -> Result<PeriodicBlockFactor<T>> {
        let n = self.diag.len();
        let m = n - 1;
        let singular = |j: usize| Error::LinearSolve(format!("singular pivot block at site {j}"));
        let mut pivot_inv = Vec::with_capacity(m);
        let mut upper_mod = Vec::with_capacity(m);
        for j in 0..m {
            let pivot = if j == 0 {
                self.diag[0]
            } else {
                self.diag[j].add(&self.lower[j].mul(&upper_mod[j - 1]).scale(Complex::new(-T::one(), T::zero())))
            };
            let inv = pivot.inverse().ok_or_else(|| singular(j))?;
            let c = if j + 1 < m { self.upper[j] } else { Matrix2::zero() };
            upper_mod.push(inv.mul(&c));
            pivot_inv.push(inv);
        }
        let neg = Complex::new(-T::one(), T::zero());
        // Z solves the reduced system with RHS columns coupling to x_{n−1}.
        let mut rhs = vec![Matrix2::zero(); m];
        rhs[0] = self.lower[0];
        rhs[m - 1] = rhs[m - 1].add(&self.upper[m - 1]);
        let mut coupling = Vec::with_capacity(m);
        for j in 0..m {
            let r = if j == 0 { rhs[0] } else { rhs[j].add(&self.lower[j].mul(&coupling[j - 1]).scale(neg)) };
            coupling.push(pivot_inv[j].mul(&r));
        }
        for j in (0..m - 1).rev() {
            coupling[j] = coupling[j].add(&upper_mod[j].mul(&coupling[j + 1]).scale(neg));
        }
        let schur = self.diag[m]
            .add(&self.lower[m].mul(&coupling[m - 1]).scale(neg))
            .add(&self.upper[m].mul(&coupling[0]).scale(neg));
        let schur_inv = schur.inverse().ok_or_else(|| singular(m))?;
        Ok(PeriodicBlockFactor {
            lower: self.lower.clone(),
            last_row_upper: self.upper[m],
            last_row_lower: self.lower[m],
            pivot_inv,
            upper_mod,
            coupling,
            schur_inv,
        })
    }
}

impl<T: Real> PeriodicBlockFactor<T> {
    fn solve(&self, rhs: &[Vec2<T>]) -> Vec<Vec2<T>> {
        let m = self.pivot_inv.len();
        let mut y: Vec<Vec2<T>> = Vec::with_capacity(m + 1);
        for j in 0..m {
            let r = if j == 0 { rhs[0] } else { sub2(rhs[j], self.lower[j].apply(y[j - 1].0, y[j - 1].1)) };
            y.push(self.pivot_inv[j].apply(r.0, r.1));
        }
        for j in (0..m - 1).rev() {
            y[j] = sub2(y[j], self.upper_mod[j].apply(y[j + 1].0, y[j + 1].1));
        }
        let r = sub2(
            sub2(rhs[m], self.last_row_lower.apply(y[m - 1].0, y[m - 1].1)),
            self.last_row_upper.apply(y[0].0, y[0].1),
        );
        let last = self.schur_inv.apply(r.0, r.1);
        for (yj, cj) in y.iter_mut().zip(&self.coupling) {
            *yj = sub2(*yj, cj.apply(last.0, last.1));
        }
        y.push(last);
        y
    }
}

/// Site-local part `σ_z·Ω′/2Ω − Ω̇/2Ω + i·Ω·m·σ_x` of the generator at time `t`.
fn local_generator<T: Real>(cf: &ConformalField<T>, grid: &Grid<T>, mass: T, t: T) -> Result<(Vec<Matrix2<T>>, T)> {
    let two = T::lit(2.0);
    let mut max_gradient = T::zero();
    let mats = grid
        .positions()
        .map(|x| {
            let omega = cf.positive_value(t, x)?;
            let g = cf.derivative(Derivative::X, t, x) / (two * omega);
            let h = cf.derivative(Derivative::T, t, x) / (two * omega);
            max_gradient = max_gradient.max(g.abs()).max(h.abs());
            let coupling = Complex::new(T::zero(), omega * mass);
            Ok(Matrix2::new(Complex::new(g - h, T::zero()), coupling, coupling, Complex::new(-g - h, T::zero())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((mats, max_gradient))
}

/// Crank–Nicolson (implicit midpoint) integration of the curved Dirac
/// equation with centered spatial differences, `substeps` equal steps
/// spanning `[t_start, t_start + duration]`.
pub fn cn_evolve<T: Real>(
    psi0: &SpinorField<T>,
    cf: &ConformalField<T>,
    mass: T,
    t_start: T,
    duration: T,
    substeps: usize,
) -> Result<CnOutcome<T>> {
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be positive".into()));
    }
    let grid = *psi0.grid();
    let n = grid.n_sites();
    let dt = duration / T::from_count(substeps);
    let half = dt / T::lit(2.0);
    let hop = Complex::new(half / (T::lit(2.0) * grid.dx()), T::zero());
    let sz = Matrix2::sigma_z();
    let one = Matrix2::identity();
    let neg = Complex::new(-T::one(), T::zero());
    let half_c = Complex::new(half, T::zero());

    let weighted_norm = |f: &SpinorField<T>, t: T| -> Result<T> {
        let rho = f.density();
        grid.positions().zip(rho).try_fold(T::zero(), |acc, (x, r)| Ok(acc + cf.positive_value(t, x)? * r * grid.dx()))
    };
    let w0 = weighted_norm(psi0, t_start)?;

    let build = |t: T| -> Result<(PeriodicBlockFactor<T>, Vec<Matrix2<T>>, T)> {
        let (local, grad) = local_generator(cf, &grid, mass, t)?;
        let system = PeriodicBlockSystem {
            lower: vec![sz.scale(hop); n],
            diag: local.iter().map(|d| one.add(&d.scale(half_c).scale(neg))).collect(),
            upper: vec![sz.scale(hop * neg); n],
        };
        Ok((system.factorize()?, local, grad))
    };

    let mut cache = None;
    let mut under_resolved = false;
    let mut state: Vec<Vec2<T>> = psi0.up().iter().zip(psi0.down()).map(|(u, d)| (*u, *d)).collect();
    for k in 0..substeps {
        let t_mid = t_start + (T::from_count(k) + T::lit(0.5)) * dt;
        if cache.is_none() || !cf.is_static() {
            let built = build(t_mid)?;
            if built.2 * grid.dx().max(dt) > T::lit(0.5) && !under_resolved {
                under_resolved = true;
                log::warn!("metric gradient {} under-resolved by dx = {}, dt = {}", built.2, grid.dx(), dt);
            }
            cache = Some(built);
        }
        let (factor, local, _) = cache.as_ref().expect("built above");
        let rhs: Vec<Vec2<T>> = (0..n)
            .map(|j| {
                let (u, d) = state[j];
                let (lu, ld) = local[j].apply(u, d);
                let (pu, pd) = state[grid.wrap(j, 1)];
                let (mu, md) = state[grid.wrap(j, -1)];
                // (I + τL)ψ with L = D + σ_z·δ_x
                (u + lu * half_c + (pu - mu) * hop, d + ld * half_c - (pd - md) * hop)
            })
            .collect();
        state = factor.solve(&rhs);
    }
    let (up, down) = state.into_iter().unzip();
    let field = SpinorField::from_components(grid, up, down)?;
    let w1 = weighted_norm(&field, t_start + duration)?;
    Ok(CnOutcome { field, weighted_norm: (w0, w1), under_resolved })
}
