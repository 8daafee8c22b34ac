//! Periodic one-dimensional lattice, two-component spinor fields and the
//! norms and overlaps used throughout the crate.
//!
//! Lattice units are fixed: the space step, the time step and the walk's
//! expansion parameter are one and the same number, stored once as
//! [`Grid::spacing`]. Site `j` sits at `x_j = (j - n/2)·spacing`, so the
//! domain is `[-L/2, L/2)` with `L = n·spacing` and `x = 0` is site `n/2`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::Real;

/// Boundary condition of the lattice. Only periodic wraparound is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    n_sites: usize,
    spacing: T,
    boundary: Boundary,
}

impl<T: Real> Grid<T> {
    pub const MIN_SITES: usize = 4;

    pub fn new(n_sites: usize, spacing: T) -> Result<Self> {
        if n_sites < Self::MIN_SITES {
            return Err(Error::InvalidGrid(format!("n_sites = {n_sites}, need at least {}", Self::MIN_SITES)));
        }
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing = {spacing} must be positive")));
        }
        Ok(Self { n_sites, spacing, boundary: Boundary::Periodic })
    }

    /// Grid covering a domain of physical length `length` with step `eps`.
    /// `length / eps` must be (numerically) an integer.
    pub fn with_length(length: T, eps: T) -> Result<Self> {
        let ratio = length / eps;
        let n = ratio.round();
        if (ratio - n).abs() > T::lit(1e-9) * ratio.max(T::one()) {
            return Err(Error::InvalidGrid(format!("length {length} is not a multiple of eps {eps}")));
        }
        Self::new(n.to_usize().unwrap_or(0), eps)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Lattice spacing Δx.
    pub fn dx(&self) -> T {
        self.spacing
    }

    /// Time step Δt (equal to Δx in lattice units).
    pub fn dt(&self) -> T {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn length(&self) -> T {
        T::from_count(self.n_sites) * self.spacing
    }

    pub fn x_min(&self) -> T {
        -T::from_count(self.n_sites / 2) * self.spacing
    }

    pub fn position(&self, site: usize) -> T {
        self.x_min() + T::from_count(site) * self.spacing
    }

    pub fn positions(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n_sites).map(move |j| self.position(j))
    }

    /// Whether `x` lies in the half-open extent `[x_min, x_min + L)`.
    pub fn contains(&self, x: T) -> bool {
        x >= self.x_min() && x < self.x_min() + self.length()
    }

    /// Site index `site + offset` with periodic wraparound.
    #[inline]
    pub fn wrap(&self, site: usize, offset: isize) -> usize {
        let n = self.n_sites as isize;
        (site as isize + offset).rem_euclid(n) as usize
    }
}

/// 2×2 complex matrix acting on the internal (spin) space of one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix2<T> {
    pub m: [[Complex<T>; 2]; 2],
}

impl<T: Real> Matrix2<T> {
    pub fn new(m00: Complex<T>, m01: Complex<T>, m10: Complex<T>, m11: Complex<T>) -> Self {
        Self { m: [[m00, m01], [m10, m11]] }
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero()));
        Self::new(o, z, z, o)
    }

    pub fn sigma_x() -> Self {
        let (o, z) = (Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero()));
        Self::new(z, o, o, z)
    }

    pub fn sigma_z() -> Self {
        let (o, z) = (Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero()));
        Self::new(o, z, z, -o)
    }

    pub fn zero() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self::new(z, z, z, z)
    }

    #[inline]
    pub fn apply(&self, up: Complex<T>, down: Complex<T>) -> (Complex<T>, Complex<T>) {
        (self.m[0][0] * up + self.m[0][1] * down, self.m[1][0] * up + self.m[1][1] * down)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = self.m[i][0] * rhs.m[0][j] + self.m[i][1] * rhs.m[1][j];
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = out.m[i][j] + rhs.m[i][j];
            }
        }
        out
    }

    pub fn scale(&self, z: Complex<T>) -> Self {
        let mut out = *self;
        out.m.iter_mut().flatten().for_each(|e| *e = *e * z);
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.m[0][0].conj(), self.m[1][0].conj(), self.m[0][1].conj(), self.m[1][1].conj())
    }

    pub fn det(&self) -> Complex<T> {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.norm() == T::zero() || !det.norm().is_finite() {
            return None;
        }
        let inv = Complex::new(T::one(), T::zero()) / det;
        Some(Self::new(self.m[1][1] * inv, -self.m[0][1] * inv, -self.m[1][0] * inv, self.m[0][0] * inv))
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Self) -> T {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .fold(T::zero(), |acc, (a, b)| acc + (*a - *b).norm_sqr())
            .sqrt()
    }

    /// Frobenius distance of `M†M` from the identity.
    pub fn unitarity_defect(&self) -> T {
        self.adjoint().mul(self).distance(&Self::identity())
    }
}

fn finite<T: Real>(z: &Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Two-component complex amplitude per lattice site.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField<T> {
    grid: Grid<T>,
    up: Vec<Complex<T>>,
    down: Vec<Complex<T>>,
}

impl<T: Real> SpinorField<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        let z = vec![Complex::new(T::zero(), T::zero()); grid.n_sites()];
        Self { grid, up: z.clone(), down: z }
    }

    pub fn from_components(grid: Grid<T>, up: Vec<Complex<T>>, down: Vec<Complex<T>>) -> Result<Self> {
        if up.len() != grid.n_sites() || down.len() != grid.n_sites() {
            return Err(Error::GridMismatch(format!(
                "component lengths ({}, {}) vs n_sites {}",
                up.len(),
                down.len(),
                grid.n_sites()
            )));
        }
        if let Some(site) = up.iter().zip(&down).position(|(u, d)| !(finite(u) && finite(d))) {
            return Err(Error::NonFinite(site));
        }
        Ok(Self { grid, up, down })
    }

    /// Field with a single unit amplitude in one component at `site`.
    pub fn delta(grid: Grid<T>, site: usize, spin_up: bool) -> Self {
        let mut f = Self::zeros(grid);
        let one = Complex::new(T::one(), T::zero());
        if spin_up {
            f.up[site] = one;
        } else {
            f.down[site] = one;
        }
        f
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn up(&self) -> &[Complex<T>] {
        &self.up
    }

    pub fn down(&self) -> &[Complex<T>] {
        &self.down
    }

    pub fn up_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.up
    }

    pub fn down_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.down
    }

    pub fn components_mut(&mut self) -> (&mut [Complex<T>], &mut [Complex<T>]) {
        (&mut self.up, &mut self.down)
    }

    pub fn into_components(self) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        (self.up, self.down)
    }

    /// Site-wise probability density `|ψ↑|² + |ψ↓|²`.
    pub fn density(&self) -> Vec<T> {
        self.up.iter().zip(&self.down).map(|(u, d)| u.norm_sqr() + d.norm_sqr()).collect()
    }

    pub fn scaled(&self, z: Complex<T>) -> Self {
        let mut out = self.clone();
        out.up.iter_mut().chain(out.down.iter_mut()).for_each(|a| *a = *a * z);
        out
    }

    /// Multiplies both components at each site by a real per-site weight.
    pub fn weighted(&self, weights: &[T]) -> Result<Self> {
        self.check_len(weights.len())?;
        let mut out = self.clone();
        for ((u, d), &w) in out.up.iter_mut().zip(out.down.iter_mut()).zip(weights) {
            *u = u.scale(w);
            *d = d.scale(w);
        }
        Ok(out)
    }

    /// Applies an independent 2×2 matrix at every site.
    pub fn apply_site_matrices(&self, mats: &[Matrix2<T>]) -> Result<Self> {
        self.check_len(mats.len())?;
        let mut out = self.clone();
        for ((u, d), m) in out.up.iter_mut().zip(out.down.iter_mut()).zip(mats) {
            let (nu, nd) = m.apply(*u, *d);
            *u = nu;
            *d = nd;
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.up.iter().chain(&self.down).all(finite)
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.grid.n_sites() {
            return Err(Error::GridMismatch(format!("per-site data of length {len} on {} sites", self.grid.n_sites())));
        }
        Ok(())
    }
}

/// The pair `(Ψ, Φ)` living in the doubled Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledField<T> {
    pub psi: SpinorField<T>,
    pub phi: SpinorField<T>,
}

impl<T: Real> DoubledField<T> {
    pub fn new(psi: SpinorField<T>, phi: SpinorField<T>) -> Result<Self> {
        psi.same_grid(&phi)?;
        Ok(Self { psi, phi })
    }

    pub fn zeros(grid: Grid<T>) -> Self {
        Self { psi: SpinorField::zeros(grid), phi: SpinorField::zeros(grid) }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.psi.grid()
    }

    /// `prob_norm(psi) + prob_norm(phi)`.
    pub fn total_norm(&self) -> T {
        prob_norm(&self.psi) + prob_norm(&self.phi)
    }

    /// Combined L2 distance over both sectors, with the same `dx` weight as
    /// [`l2_distance`].
    pub fn l2_distance(&self, other: &Self) -> Result<T> {
        let a = l2_distance(&self.psi, &other.psi)?;
        let b = l2_distance(&self.phi, &other.phi)?;
        Ok((a * a + b * b).sqrt())
    }
}

/// Initial wave-packet parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketParams<T> {
    pub x0: T,
    pub sigma: T,
    pub k0: T,
    /// Spin mixing angle: `(cos χ, e^{i·phase} sin χ)`.
    pub chi: T,
    pub phase: T,
}

/// Normalized Gaussian packet
/// `ψ(x) ∝ exp(−(x−x0)²/(4σ²) + i·k0·x)·(cos χ, e^{i·phase} sin χ)`.
pub fn gaussian_packet<T: Real>(grid: Grid<T>, p: PacketParams<T>) -> Result<SpinorField<T>> {
    if !(p.sigma >= T::lit(2.0) * grid.dx()) {
        return Err(Error::InvalidParameter(format!(
            "packet width sigma = {} is under-resolved (need >= 2*dx = {})",
            p.sigma,
            T::lit(2.0) * grid.dx()
        )));
    }
    if !grid.contains(p.x0) {
        return Err(Error::InvalidParameter(format!("packet centre x0 = {} outside grid extent", p.x0)));
    }
    let spin_up = Complex::new(p.chi.cos(), T::zero());
    let spin_down = Complex::from_polar(p.chi.sin(), p.phase);
    let four = T::lit(4.0);
    let envelope: Vec<Complex<T>> = grid
        .positions()
        .map(|x| {
            let d = x - p.x0;
            Complex::from_polar((-(d * d) / (four * p.sigma * p.sigma)).exp(), p.k0 * x)
        })
        .collect();
    let up = envelope.iter().map(|e| *e * spin_up).collect();
    let down = envelope.iter().map(|e| *e * spin_down).collect();
    let field = SpinorField::from_components(grid, up, down)?;
    let norm = prob_norm(&field);
    if norm == T::zero() {
        return Err(Error::ZeroNorm);
    }
    Ok(field.scaled(Complex::new(norm.sqrt().recip(), T::zero())))
}

/// `Σ_x (|ψ↑(x)|² + |ψ↓(x)|²)`.
pub fn prob_norm<T: Real>(field: &SpinorField<T>) -> T {
    field.up.iter().chain(&field.down).fold(T::zero(), |acc, a| acc + a.norm_sqr())
}

/// `sqrt(Σ_x dx·(|a↑−b↑|² + |a↓−b↓|²))`.
pub fn l2_distance<T: Real>(a: &SpinorField<T>, b: &SpinorField<T>) -> Result<T> {
    a.same_grid(b)?;
    let sum =
        a.up.iter()
            .zip(&b.up)
            .chain(a.down.iter().zip(&b.down))
            .fold(T::zero(), |acc, (x, y)| acc + (*x - *y).norm_sqr());
    Ok((a.grid.dx() * sum).sqrt())
}

/// Squared normalized overlap `|⟨a|b⟩|² / (‖a‖²‖b‖²)`.
pub fn fidelity<T: Real>(a: &SpinorField<T>, b: &SpinorField<T>) -> Result<T> {
    a.same_grid(b)?;
    let (na, nb) = (prob_norm(a), prob_norm(b));
    if na == T::zero() || nb == T::zero() {
        return Err(Error::ZeroNorm);
    }
    let overlap =
        a.up.iter()
            .zip(&b.up)
            .chain(a.down.iter().zip(&b.down))
            .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y);
    Ok((overlap.norm_sqr() / (na * nb)).min(T::one()))
}
