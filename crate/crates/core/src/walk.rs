//! Homogeneous walk operators: coin, spin-dependent shift, the single-particle
//! step `S·Q` and its block-diagonal doubled version.

use num_complex::Complex;

use crate::lattice::{DoubledField, Matrix2, SpinorField};
use crate::real::Real;

/// Coin parameters `(ε, θ)`; `θ` is the Dirac mass in lattice units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinParams<T> {
    pub eps: T,
    pub theta: T,
}

impl<T: Real> CoinParams<T> {
    pub fn new(eps: T, theta: T) -> Self {
        Self { eps, theta }
    }

    pub fn massless(eps: T) -> Self {
        Self { eps, theta: T::zero() }
    }
}

/// `[[cos εθ, i sin εθ], [i sin εθ, cos εθ]]`.
pub fn coin_matrix<T: Real>(params: CoinParams<T>) -> Matrix2<T> {
    let angle = params.eps * params.theta;
    let c = Complex::new(angle.cos(), T::zero());
    let s = Complex::new(T::zero(), angle.sin());
    Matrix2::new(c, s, s, c)
}

/// Spin-dependent shift: the up component at `x` is taken from `x+Δx`, the
/// down component from `x−Δx`, periodically.
pub fn shift_apply<T: Real>(field: &SpinorField<T>) -> SpinorField<T> {
    let mut out = field.clone();
    shift_in_place(&mut out);
    out
}

/// In-place [`shift_apply`]: rotations of the two component vectors.
pub fn shift_in_place<T: Real>(field: &mut SpinorField<T>) {
    let (up, down) = field.components_mut();
    up.rotate_left(1);
    down.rotate_right(1);
}

/// Applies the coin at every site in place.
pub fn coin_in_place<T: Real>(field: &mut SpinorField<T>, coin: &Matrix2<T>) {
    if *coin == Matrix2::identity() {
        return;
    }
    let (up, down) = field.components_mut();
    for (u, d) in up.iter_mut().zip(down.iter_mut()) {
        let (nu, nd) = coin.apply(*u, *d);
        *u = nu;
        *d = nd;
    }
}

/// One flat step `Ψ ↦ S·Q_ε·Ψ`.
pub fn flat_step<T: Real>(field: &SpinorField<T>, params: CoinParams<T>) -> SpinorField<T> {
    let mut out = field.clone();
    FlatWalk::new(params).step(&mut out);
    out
}

/// Block-diagonal step on the doubled field, each sector with its own coin.
pub fn doubled_step<T: Real>(
    state: &DoubledField<T>,
    coin_psi: CoinParams<T>,
    coin_phi: CoinParams<T>,
) -> DoubledField<T> {
    let mut out = state.clone();
    DoubledWalk::new(coin_psi, coin_phi).step(&mut out);
    out
}

/// Precomputed flat walk operator for repeated in-place stepping.
#[derive(Debug, Clone, Copy)]
pub struct FlatWalk<T> {
    coin: Matrix2<T>,
}

impl<T: Real> FlatWalk<T> {
    pub fn new(params: CoinParams<T>) -> Self {
        Self { coin: coin_matrix(params) }
    }

    pub fn step(&self, field: &mut SpinorField<T>) {
        coin_in_place(field, &self.coin);
        shift_in_place(field);
    }

    pub fn run(&self, field: &mut SpinorField<T>, steps: usize) {
        for _ in 0..steps {
            self.step(field);
        }
    }
}

/// `(I₂⊗S)·𝒬_ε`: independent flat walks on the Ψ and Φ sectors.
///
/// Nothing here depends on position or time; this is the homogeneous bulk.
#[derive(Debug, Clone, Copy)]
pub struct DoubledWalk<T> {
    psi: FlatWalk<T>,
    phi: FlatWalk<T>,
}

impl<T: Real> DoubledWalk<T> {
    pub fn new(coin_psi: CoinParams<T>, coin_phi: CoinParams<T>) -> Self {
        Self { psi: FlatWalk::new(coin_psi), phi: FlatWalk::new(coin_phi) }
    }

    pub fn symmetric(coin: CoinParams<T>) -> Self {
        Self::new(coin, coin)
    }

    pub fn step(&self, state: &mut DoubledField<T>) {
        self.psi.step(&mut state.psi);
        self.phi.step(&mut state.phi);
    }

    pub fn run(&self, state: &mut DoubledField<T>, steps: usize) {
        for _ in 0..steps {
            self.step(state);
        }
    }
}
