//! Site-local unitary encoding of the conformal weight into the doubled field.
//!
//! At each site the encoder is the 4×4 block matrix
//!
//! ```text
//! U = [[ a·I₂, b·I₂ ],
//!      [−c·I₂, d·I₂ ]]
//! ```
//!
//! with `a = √(1−ε^η)·N`, `b = √(ε^η)·H`, `c = √(ε^η)·T`, `d = √(1−ε^η)·V`.
//! [`build_encoder`] uses the scalar blocks `N = V = ω` and `H = T = τ` with
//! `τ = √((1−(1−ε^η)ω²)/ε^η)`. This satisfies all three algebraic conditions
//! exactly, and `ε^η·H†H = (1−ω²) + O(ε^η)`. The alternative
//! `H†H = 1−ω²` (see [`build_unbalanced_encoder`]) breaks the cross
//! condition `N†H = T†V` whenever `0 < ω < 1`.

use crate::error::{Error, Result};
use crate::lattice::{DoubledField, Grid, SpinorField};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderParams<T> {
    pub eps: T,
    pub eta: T,
}

impl<T: Real> EncoderParams<T> {
    pub fn new(eps: T, eta: T) -> Result<Self> {
        if !(eps > T::zero() && eps <= T::one()) {
            return Err(Error::InvalidParameter(format!("encoder eps = {eps} not in (0, 1]")));
        }
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!("encoder eta = {eta} must be positive")));
        }
        Ok(Self { eps, eta })
    }

    /// `ε^η`.
    pub fn weight(&self) -> T {
        self.eps.powf(self.eta)
    }
}

/// Per-site coefficients of the encoding operator.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingOperator<T> {
    grid: Grid<T>,
    a: Vec<T>,
    b: Vec<T>,
    c: Vec<T>,
    d: Vec<T>,
}

/// Maximum-over-sites residuals of the three block conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionResiduals<T> {
    /// `|(1−ε^η)N†N + ε^η T†T − I|`
    pub psi_normalization: T,
    /// `|(1−ε^η)V†V + ε^η H†H − I|`
    pub phi_normalization: T,
    /// `|N†H − T†V|`
    pub cross: T,
}

impl<T: Real> ConditionResiduals<T> {
    pub fn max(&self) -> T {
        self.psi_normalization.max(self.phi_normalization).max(self.cross)
    }
}

impl<T: Real> EncodingOperator<T> {
    /// Operator from raw coefficients, without any unitarity check.
    pub fn from_coefficients(grid: Grid<T>, a: Vec<T>, b: Vec<T>, c: Vec<T>, d: Vec<T>) -> Result<Self> {
        let n = grid.n_sites();
        if [a.len(), b.len(), c.len(), d.len()].iter().any(|&l| l != n) {
            return Err(Error::GridMismatch(format!("coefficient arrays must have {n} entries")));
        }
        Ok(Self { grid, a, b, c, d })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// `(a, b, c, d)` at `site`.
    pub fn coefficients(&self, site: usize) -> (T, T, T, T) {
        (self.a[site], self.b[site], self.c[site], self.d[site])
    }

    /// Rotation angle `α` with `(a, c) = (cos α, sin α)`.
    pub fn rotation_angle(&self, site: usize) -> T {
        self.c[site].atan2(self.a[site])
    }

    /// Every coefficient multiplied by `factor`. Used for fault injection.
    pub fn scaled(&self, factor: T) -> Self {
        let s = |v: &[T]| v.iter().map(|&x| x * factor).collect();
        Self { grid: self.grid, a: s(&self.a), b: s(&self.b), c: s(&self.c), d: s(&self.d) }
    }

    /// Max-over-sites Frobenius distance of the per-site `U†U` from `I₄`.
    pub fn unitarity_defect(&self) -> T {
        // U†U = [[a²+c², ab−cd], [ab−cd, b²+d²]] ⊗ I₂.
        let two = T::lit(2.0);
        (0..self.grid.n_sites())
            .map(|j| {
                let (a, b, c, d) = self.coefficients(j);
                let p = a * a + c * c - T::one();
                let q = b * b + d * d - T::one();
                let r = a * b - c * d;
                (two * (p * p + q * q + two * r * r)).sqrt()
            })
            .fold(T::zero(), T::max)
    }
}

fn check_weights<T: Real>(omega: &[T], grid: &Grid<T>, params: &EncoderParams<T>) -> Result<T> {
    if omega.len() != grid.n_sites() {
        return Err(Error::GridMismatch(format!("{} weights for {} sites", omega.len(), grid.n_sites())));
    }
    if let Some((j, w)) = omega.iter().enumerate().find(|(_, &w)| !(w > T::zero() && w <= T::one())) {
        return Err(Error::InvalidParameter(format!("omega = {w} at site {j} outside (0, 1]")));
    }
    let e = params.weight();
    if !(e > T::zero()) {
        return Err(Error::InvalidParameter("eps^eta = 0 leaves the encoder undefined".into()));
    }
    Ok(e)
}

/// Encoder with blocks `N = V = ω`, `H = T = τ`.
pub fn build_encoder<T: Real>(omega: &[T], grid: Grid<T>, params: EncoderParams<T>) -> Result<EncodingOperator<T>> {
    let e = check_weights(omega, &grid, &params)?;
    let keep = (T::one() - e).sqrt();
    let a: Vec<T> = omega.iter().map(|&w| keep * w).collect();
    let c: Vec<T> = a.iter().map(|&x| (T::one() - x * x).max(T::zero()).sqrt()).collect();
    Ok(EncodingOperator { grid, b: c.clone(), d: a.clone(), a, c })
}

/// Encoder with blocks `N = ω`, `H = √(1−ω²)` and `T`, `V` fixed by the two
/// normalization conditions. Satisfies those two but not the cross
/// condition, so it is not unitary for `0 < ω < 1`.
pub fn build_unbalanced_encoder<T: Real>(
    omega: &[T],
    grid: Grid<T>,
    params: EncoderParams<T>,
) -> Result<EncodingOperator<T>> {
    let e = check_weights(omega, &grid, &params)?;
    if e >= T::one() {
        return Err(Error::InvalidParameter("eps^eta must be below 1".into()));
    }
    let keep = T::one() - e;
    let mut coef = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &w in omega {
        let h = (T::one() - w * w).sqrt();
        let t = ((T::one() - keep * w * w) / e).sqrt();
        let v = ((T::one() - e * h * h) / keep).sqrt();
        coef.0.push(keep.sqrt() * w);
        coef.1.push(e.sqrt() * h);
        coef.2.push(e.sqrt() * t);
        coef.3.push(keep.sqrt() * v);
    }
    EncodingOperator::from_coefficients(grid, coef.0, coef.1, coef.2, coef.3)
}

/// Residuals of the three block conditions, recovering `N, H, T, V` from the
/// stored coefficients. When `ε^η ∈ {0, 1}` one pair of blocks is undefined
/// and the cross residual is reported in the scaled form `|ab − cd|`.
pub fn conditions_residual<T: Real>(op: &EncodingOperator<T>, params: EncoderParams<T>) -> ConditionResiduals<T> {
    let e = params.weight();
    let keep = T::one() - e;
    let scale = (e * keep).sqrt();
    let mut r = ConditionResiduals { psi_normalization: T::zero(), phi_normalization: T::zero(), cross: T::zero() };
    for j in 0..op.grid.n_sites() {
        let (a, b, c, d) = op.coefficients(j);
        r.psi_normalization = r.psi_normalization.max((a * a + c * c - T::one()).abs());
        r.phi_normalization = r.phi_normalization.max((d * d + b * b - T::one()).abs());
        let cross = if scale > T::zero() { (a * b - c * d) / scale } else { a * b - c * d };
        r.cross = r.cross.max(cross.abs());
    }
    r
}

fn check_grid<T: Real>(state: &DoubledField<T>, op: &EncodingOperator<T>) -> Result<()> {
    if state.grid() != op.grid() {
        return Err(Error::GridMismatch("state and encoder grids differ".into()));
    }
    Ok(())
}

/// Flat-frame state `Λ = U†·Λ̃`.
pub fn encode<T: Real>(state_tilde: &DoubledField<T>, op: &EncodingOperator<T>) -> Result<DoubledField<T>> {
    check_grid(state_tilde, op)?;
    let mut out = state_tilde.clone();
    apply_adjoint_in_place(&mut out, op);
    Ok(out)
}

/// Encoded-frame state `Λ̃ = U·Λ`.
pub fn decode<T: Real>(state: &DoubledField<T>, op: &EncodingOperator<T>) -> Result<DoubledField<T>> {
    check_grid(state, op)?;
    let mut out = state.clone();
    apply_in_place(&mut out, op);
    Ok(out)
}

/// In-place `U†` (caller guarantees matching grids).
pub(crate) fn apply_adjoint_in_place<T: Real>(state: &mut DoubledField<T>, op: &EncodingOperator<T>) {
    // ψ' = a ψ − c φ ; φ' = b ψ + d φ
    mix_sectors(state, |j| {
        let (a, b, c, d) = op.coefficients(j);
        (a, -c, b, d)
    });
}

/// In-place `U`.
pub(crate) fn apply_in_place<T: Real>(state: &mut DoubledField<T>, op: &EncodingOperator<T>) {
    // ψ' = a ψ + b φ ; φ' = −c ψ + d φ
    mix_sectors(state, |j| {
        let (a, b, c, d) = op.coefficients(j);
        (a, b, -c, d)
    });
}

fn mix_sectors<T: Real>(state: &mut DoubledField<T>, row: impl Fn(usize) -> (T, T, T, T)) {
    let DoubledField { psi, phi } = state;
    let mix = |p: &mut SpinorField<T>, q: &mut SpinorField<T>, up: bool| {
        let (ps, qs) = if up { (p.up_mut(), q.up_mut()) } else { (p.down_mut(), q.down_mut()) };
        for (j, (x, y)) in ps.iter_mut().zip(qs.iter_mut()).enumerate() {
            let (m00, m01, m10, m11) = row(j);
            let (u, v) = (*x, *y);
            *x = u.scale(m00) + v.scale(m01);
            *y = u.scale(m10) + v.scale(m11);
        }
    };
    mix(psi, phi, true);
    mix(psi, phi, false);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{gaussian_packet, PacketParams};
    use num_complex::Complex;

    fn grid() -> Grid<f64> {
        Grid::new(32, 0.25).unwrap()
    }

    fn ramp() -> Vec<f64> {
        (0..32).map(|j| 0.05 + 0.95 * j as f64 / 31.0).collect()
    }

    fn state() -> DoubledField<f64> {
        let p = PacketParams { x0: 0.0, sigma: 0.6, k0: 1.0, chi: 0.4, phase: 0.2 };
        let q = PacketParams { x0: 1.0, sigma: 0.8, k0: -2.0, chi: 1.1, phase: 0.0 };
        DoubledField::new(gaussian_packet(grid(), p).unwrap(), gaussian_packet(grid(), q).unwrap()).unwrap()
    }

    #[test]
    fn unit_weight_closed_form() {
        let params = EncoderParams::new(0.1, 1.0).unwrap();
        let op = build_encoder(&[1.0; 32], grid(), params).unwrap();
        let (a, b, c, d) = op.coefficients(7);
        assert!((a - 0.9f64.sqrt()).abs() < 1e-15 && (d - a).abs() == 0.0);
        assert!((b - 0.1f64.sqrt()).abs() < 1e-15 && (c - b).abs() == 0.0);
        let r = conditions_residual(&op, params);
        assert!(r.max() <= 1e-15, "{r:?}");
    }

    #[test]
    fn full_weight_is_antisymmetric_swap() {
        let params = EncoderParams::new(1.0, 1.0).unwrap();
        let op = build_encoder(&ramp(), grid(), params).unwrap();
        for j in 0..32 {
            assert_eq!(op.coefficients(j), (0.0, 1.0, 1.0, 0.0));
        }
        assert!(conditions_residual(&op, params).max() < 1e-15);
    }

    #[test]
    fn built_encoder_is_unitary_and_satisfies_conditions() {
        for (eps, eta) in [(0.01, 1.0), (0.5, 0.5), (0.001, 2.0), (0.9, 1.0)] {
            let params = EncoderParams::new(eps, eta).unwrap();
            let op = build_encoder(&ramp(), grid(), params).unwrap();
            assert!(op.unitarity_defect() < 1e-14);
            assert!(conditions_residual(&op, params).max() <= 1e-12);
        }
    }

    #[test]
    fn rotation_angle_matches_weight() {
        let params = EncoderParams::new(0.05, 1.0).unwrap();
        let w = ramp();
        let op = build_encoder(&w, grid(), params).unwrap();
        for (j, &wj) in w.iter().enumerate() {
            let alpha = ((1.0 - 0.05f64).sqrt() * wj).acos();
            assert!((op.rotation_angle(j) - alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn unbalanced_blocks_violate_cross_condition() {
        let params = EncoderParams::new(0.01, 1.0).unwrap();
        let op = build_unbalanced_encoder(&[0.8; 32], grid(), params).unwrap();
        let r = conditions_residual(&op, params);
        assert!(r.psi_normalization < 1e-12 && r.phi_normalization < 1e-12);
        // |ω√(1−ω²) − τ·v| at ω = 0.8, ε^η = 0.01
        let tau = ((1.0 - 0.99 * 0.64) / 0.01f64).sqrt();
        let v = ((1.0 - 0.01 * 0.36) / 0.99f64).sqrt();
        let expect = (0.8 * 0.6 - tau * v).abs();
        assert!((r.cross - expect).abs() < 1e-10);
        assert!(r.cross > 5.0);
    }

    #[test]
    fn rejects_invalid_weights_and_params() {
        let params = EncoderParams::new(0.1, 1.0).unwrap();
        assert!(build_encoder(&[0.0; 32], grid(), params).is_err());
        assert!(build_encoder(&[1.1; 32], grid(), params).is_err());
        assert!(build_encoder(&[1.0; 31], grid(), params).is_err());
        assert!(EncoderParams::new(0.0, 1.0).is_err());
        assert!(EncoderParams::new(1.5, 1.0).is_err());
        assert!(EncoderParams::new(0.5, 0.0).is_err());
        // underflowing weight
        let tiny = EncoderParams { eps: 1e-300, eta: 4.0 };
        assert!(build_encoder(&[1.0; 32], grid(), tiny).is_err());
    }

    #[test]
    fn encode_unit_weight_splits_amplitude() {
        let params = EncoderParams::new(0.1, 1.0).unwrap();
        let op = build_encoder(&[1.0; 32], grid(), params).unwrap();
        let s = state();
        let input = DoubledField::new(s.psi.clone(), SpinorField::zeros(grid())).unwrap();
        let out = encode(&input, &op).unwrap();
        let a = Complex::new(0.9f64.sqrt(), 0.0);
        let b = Complex::new(0.1f64.sqrt(), 0.0);
        for j in 0..32 {
            assert!((out.psi.up()[j] - s.psi.up()[j] * a).norm() < 1e-15);
            assert!((out.phi.down()[j] - s.psi.down()[j] * b).norm() < 1e-15);
        }
    }

    #[test]
    fn encode_decode_roundtrip_and_norm() {
        let params = EncoderParams::new(0.2, 0.5).unwrap();
        let op = build_encoder(&ramp(), grid(), params).unwrap();
        let s = state();
        let enc = encode(&s, &op).unwrap();
        assert!((enc.total_norm() - s.total_norm()).abs() < 1e-14);
        let back = decode(&enc, &op).unwrap();
        assert!(back.l2_distance(&s).unwrap() < 1e-14);
        let other = encode(&decode(&s, &op).unwrap(), &op).unwrap();
        assert!(other.l2_distance(&s).unwrap() < 1e-14);
        let zero = DoubledField::zeros(grid());
        assert_eq!(decode(&zero, &op).unwrap(), zero);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let params = EncoderParams::new(0.2, 1.0).unwrap();
        let op = build_encoder(&[1.0; 32], grid(), params).unwrap();
        let other = DoubledField::zeros(Grid::new(16, 0.25).unwrap());
        assert!(encode(&other, &op).is_err());
        assert!(decode(&other, &op).is_err());
    }

    #[test]
    fn scaled_operator_is_not_unitary() {
        let params = EncoderParams::new(0.2, 1.0).unwrap();
        let op = build_encoder(&ramp(), grid(), params).unwrap().scaled(1.01);
        assert!(op.unitarity_defect() > 1e-2);
    }
}
