//! Conformal factors `Ω(t, x)` with `g_{μν} = Ω·η_{μν}` and the curvature
//! diagnostics derived from them.
//!
//! The Christoffel classes are reported as `Ω̇/Ω` and `Ω′/Ω`. The textbook
//! result for `g = Ω·η` carries an extra factor `1/2`; the values here
//! deliberately omit it. [`ricci_scalar`] evaluates
//! `2·((Ω̇/Ω)² − Ω̈/Ω)/Ω²`, which only involves time derivatives. For
//! spatially varying factors use [`ricci_conformal_general`], a separately
//! named diagnostic with its own sign and normalization convention.

use std::io::Read;

use crate::error::{Error, Result};
use crate::lattice::Grid;
use crate::real::Real;

/// Bilinearly interpolated table of `Ω` values on a rectangular `(t, x)` mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable<T> {
    times: Vec<T>,
    xs: Vec<T>,
    /// Row-major in `t` then `x`.
    values: Vec<T>,
}

impl<T: Real> MetricTable<T> {
    pub fn new(times: Vec<T>, xs: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.is_empty() || xs.len() < 2 {
            return Err(Error::Table("need at least one time row and two x columns".into()));
        }
        if values.len() != times.len() * xs.len() {
            return Err(Error::Table(format!("{} values for a {}x{} mesh", values.len(), times.len(), xs.len())));
        }
        let increasing = |v: &[T]| v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&times) || !increasing(&xs) {
            return Err(Error::Table("t and x coordinates must be strictly increasing".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v > T::zero()) || !v.is_finite() {
                let (t, x) = (times[i / xs.len()], xs[i % xs.len()]);
                return Err(Error::NonpositiveConformalFactor {
                    t: t.to_f64().unwrap_or(f64::NAN),
                    x: x.to_f64().unwrap_or(f64::NAN),
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Self { times, xs, values })
    }

    /// Samples `f` on the mesh.
    pub fn from_fn(times: Vec<T>, xs: Vec<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let values = times.iter().flat_map(|&t| xs.iter().map(move |&x| (t, x))).map(|(t, x)| f(t, x)).collect();
        Self::new(times, xs, values)
    }

    /// Reads a CSV with header `t,x,omega2`, rows ordered by `t` then `x`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Table(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "x", "omega2"] {
            return Err(Error::Table(format!(
                "expected header t,x,omega2, found {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Table(e.to_string()))?;
            let parse = |i: usize| -> Result<T> {
                let s = rec.get(i).unwrap_or("");
                s.parse::<f64>().map(T::lit).map_err(|_| Error::Table(format!("unparsable number {s:?}")))
            };
            rows.push((parse(0)?, parse(1)?, parse(2)?));
        }
        if rows.is_empty() {
            return Err(Error::Table("no data rows".into()));
        }
        let mut times: Vec<T> = Vec::new();
        for &(t, _, _) in &rows {
            if times.last() != Some(&t) {
                times.push(t);
            }
        }
        let nx = rows.len() / times.len();
        if nx * times.len() != rows.len() {
            return Err(Error::Table("rows do not form a rectangular t-by-x mesh".into()));
        }
        let xs: Vec<T> = rows[..nx].iter().map(|r| r.1).collect();
        for (i, r) in rows.iter().enumerate() {
            if r.0 != times[i / nx] || r.1 != xs[i % nx] {
                return Err(Error::Table(format!("row {} breaks the t-major mesh ordering", i + 1)));
            }
        }
        Self::new(times, xs, rows.into_iter().map(|r| r.2).collect())
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Bilinear interpolation; coordinates outside the mesh are clamped.
    pub fn interpolate(&self, t: T, x: T) -> T {
        let (it, wt) = bracket(&self.times, t);
        let (ix, wx) = bracket(&self.xs, x);
        let nx = self.xs.len();
        let at = |i: usize, j: usize| self.values[i * nx + j];
        let row = |i: usize| at(i, ix) * (T::one() - wx) + at(i, ix + 1) * wx;
        if self.times.len() == 1 {
            row(0)
        } else {
            row(it) * (T::one() - wt) + row(it + 1) * wt
        }
    }
}

/// Lower bracket index and interpolation weight of `v` in sorted `knots`.
fn bracket<T: Real>(knots: &[T], v: T) -> (usize, T) {
    let n = knots.len();
    if n < 2 || v <= knots[0] {
        return (0, T::zero());
    }
    if v >= knots[n - 1] {
        return (n - 2, T::one());
    }
    let i = knots.partition_point(|&k| k <= v) - 1;
    (i, (v - knots[i]) / (knots[i + 1] - knots[i]))
}

/// Family of conformal factors.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind<T> {
    /// `Ω = value`.
    Constant {
        value: T,
    },
    /// `Ω = 1 + A·exp(−(x−c)²/(2s²))`.
    GaussianBumpStatic {
        amplitude: T,
        width: T,
        center: T,
    },
    /// `Ω = scale·exp(rate·t)`.
    ExponentialTime {
        scale: T,
        rate: T,
    },
    /// `Ω = scale·t^power`, defined for `t > 0`.
    PowerTime {
        scale: T,
        power: T,
    },
    Tabulated(MetricTable<T>),
}

/// A conformal factor with value and derivative access.
///
/// Analytic kinds return exact derivatives; tabulated ones use centered
/// differences of step `fd_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalField<T> {
    kind: MetricKind<T>,
    fd_step: T,
}

/// Partial derivatives requested from a [`ConformalField`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    T,
    X,
    TT,
    XX,
}

impl<T: Real> ConformalField<T> {
    pub fn new(kind: MetricKind<T>) -> Self {
        Self { kind, fd_step: T::lit(1e-4) }
    }

    pub fn constant(value: T) -> Self {
        Self::new(MetricKind::Constant { value })
    }

    pub fn gaussian_bump(amplitude: T, width: T, center: T) -> Self {
        Self::new(MetricKind::GaussianBumpStatic { amplitude, width, center })
    }

    pub fn exponential_time(scale: T, rate: T) -> Self {
        Self::new(MetricKind::ExponentialTime { scale, rate })
    }

    pub fn power_time(scale: T, power: T) -> Self {
        Self::new(MetricKind::PowerTime { scale, power })
    }

    pub fn tabulated(table: MetricTable<T>) -> Self {
        Self::new(MetricKind::Tabulated(table))
    }

    pub fn with_fd_step(mut self, h: T) -> Self {
        self.fd_step = h;
        self
    }

    pub fn kind(&self) -> &MetricKind<T> {
        &self.kind
    }

    pub fn fd_step(&self) -> T {
        self.fd_step
    }

    /// Short identifier used in tables and file names.
    pub fn id(&self) -> &'static str {
        match self.kind {
            MetricKind::Constant { .. } => "constant",
            MetricKind::GaussianBumpStatic { .. } => "gaussian_bump_static",
            MetricKind::ExponentialTime { .. } => "exponential_time",
            MetricKind::PowerTime { .. } => "power_time",
            MetricKind::Tabulated(_) => "tabulated",
        }
    }

    /// Whether `Ω` does not depend on `t`.
    pub fn is_static(&self) -> bool {
        match &self.kind {
            MetricKind::Constant { .. } | MetricKind::GaussianBumpStatic { .. } => true,
            MetricKind::ExponentialTime { rate, .. } => *rate == T::zero(),
            MetricKind::PowerTime { power, .. } => *power == T::zero(),
            MetricKind::Tabulated(table) => table.times().len() == 1,
        }
    }

    /// Raw `Ω(t, x)`; may be nonpositive or NaN for invalid parameters.
    pub fn value(&self, t: T, x: T) -> T {
        match &self.kind {
            MetricKind::Constant { value } => *value,
            MetricKind::GaussianBumpStatic { amplitude, width, center } => {
                let d = (x - *center) / *width;
                T::one() + *amplitude * (-(d * d) / T::lit(2.0)).exp()
            }
            MetricKind::ExponentialTime { scale, rate } => *scale * (*rate * t).exp(),
            MetricKind::PowerTime { scale, power } => {
                if t > T::zero() {
                    *scale * t.powf(*power)
                } else {
                    T::nan()
                }
            }
            MetricKind::Tabulated(table) => table.interpolate(t, x),
        }
    }

    /// `Ω(t, x)`, rejecting nonpositive or non-finite values.
    pub fn positive_value(&self, t: T, x: T) -> Result<T> {
        let v = self.value(t, x);
        if v > T::zero() && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonpositiveConformalFactor {
                t: t.to_f64().unwrap_or(f64::NAN),
                x: x.to_f64().unwrap_or(f64::NAN),
                value: v.to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    /// Partial derivative of `Ω`; analytic where available.
    pub fn derivative(&self, which: Derivative, t: T, x: T) -> T {
        let two = T::lit(2.0);
        match &self.kind {
            MetricKind::Constant { .. } => T::zero(),
            MetricKind::GaussianBumpStatic { amplitude, width, center } => {
                let s2 = *width * *width;
                let d = x - *center;
                let g = *amplitude * (-(d * d) / (two * s2)).exp();
                match which {
                    Derivative::T | Derivative::TT => T::zero(),
                    Derivative::X => -g * d / s2,
                    Derivative::XX => g * (d * d / (s2 * s2) - T::one() / s2),
                }
            }
            MetricKind::ExponentialTime { rate, .. } => {
                let v = self.value(t, x);
                match which {
                    Derivative::T => *rate * v,
                    Derivative::TT => *rate * *rate * v,
                    Derivative::X | Derivative::XX => T::zero(),
                }
            }
            MetricKind::PowerTime { scale, power } => {
                if !(t > T::zero()) {
                    return T::nan();
                }
                match which {
                    Derivative::T => *scale * *power * t.powf(*power - T::one()),
                    Derivative::TT => *scale * *power * (*power - T::one()) * t.powf(*power - two),
                    Derivative::X | Derivative::XX => T::zero(),
                }
            }
            MetricKind::Tabulated(_) => self.finite_difference(which, t, x, self.fd_step),
        }
    }

    /// Centered finite-difference derivative of `Ω` with step `h`.
    pub fn finite_difference(&self, which: Derivative, t: T, x: T, h: T) -> T {
        let two = T::lit(2.0);
        let f = |t, x| self.value(t, x);
        match which {
            Derivative::T => (f(t + h, x) - f(t - h, x)) / (two * h),
            Derivative::X => (f(t, x + h) - f(t, x - h)) / (two * h),
            Derivative::TT => (f(t + h, x) - two * f(t, x) + f(t - h, x)) / (h * h),
            Derivative::XX => (f(t, x + h) - two * f(t, x) + f(t, x - h)) / (h * h),
        }
    }

    /// Largest `Ω` sampled at every site of `grid` and every time level of
    /// `window`, failing on the first nonpositive sample.
    pub fn window_max(&self, grid: &Grid<T>, window: TimeWindow<T>) -> Result<T> {
        let mut max = T::zero();
        for t in window.times(grid) {
            for x in grid.positions() {
                max = max.max(self.positive_value(t, x)?);
            }
            if self.is_static() {
                break;
            }
        }
        Ok(max)
    }
}

/// The time levels `t_start + k·Δt`, `k = 0..=steps`, of a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow<T> {
    pub t_start: T,
    pub steps: usize,
}

impl<T: Real> TimeWindow<T> {
    pub fn new(t_start: T, steps: usize) -> Self {
        Self { t_start, steps }
    }

    pub fn time(&self, grid: &Grid<T>, k: usize) -> T {
        self.t_start + T::from_count(k) * grid.dt()
    }

    pub fn t_end(&self, grid: &Grid<T>) -> T {
        self.time(grid, self.steps)
    }

    pub fn times<'a>(&'a self, grid: &'a Grid<T>) -> impl Iterator<Item = T> + 'a {
        (0..=self.steps).map(move |k| self.time(grid, k))
    }
}

/// Normalized amplitude weights `ω(x) = sqrt(Ω(t,x)/Ω_max)` on one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSlice<T> {
    pub values: Vec<T>,
    /// `Ω_max` over the simulated window.
    pub scale: T,
}

/// Holds `Ω_max` for a window so that slices can be produced repeatedly.
#[derive(Debug, Clone)]
pub struct OmegaNormalizer<T> {
    metric: ConformalField<T>,
    grid: Grid<T>,
    scale: T,
}

impl<T: Real> OmegaNormalizer<T> {
    pub fn new(metric: &ConformalField<T>, grid: Grid<T>, window: TimeWindow<T>) -> Result<Self> {
        let scale = metric.window_max(&grid, window)?;
        Ok(Self { metric: metric.clone(), grid, scale })
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn metric(&self) -> &ConformalField<T> {
        &self.metric
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn slice(&self, t: T) -> Result<OmegaSlice<T>> {
        let values = self
            .grid
            .positions()
            .map(|x| {
                let v = self.metric.positive_value(t, x)?;
                // Samples outside the window may exceed the normalization.
                Ok((v / self.scale).sqrt().min(T::one()))
            })
            .collect::<Result<Vec<T>>>()?;
        Ok(OmegaSlice { values, scale: self.scale })
    }
}

/// `ω(x) = sqrt(Ω(t,x)/Ω_max)` with `Ω_max` taken over `window`.
pub fn omega_field<T: Real>(
    cf: &ConformalField<T>,
    t: T,
    grid: Grid<T>,
    window: TimeWindow<T>,
) -> Result<OmegaSlice<T>> {
    OmegaNormalizer::new(cf, grid, window)?.slice(t)
}

/// Christoffel classes and Ricci scalar at one spacetime point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureReport<T> {
    /// Common value `Ω̇/Ω` of Γ⁰₀₀, Γ⁰₁₁, Γ¹₀₁, Γ¹₁₀.
    pub christoffel_time_class: T,
    /// Common value `Ω′/Ω` of Γ⁰₀₁, Γ⁰₁₀, Γ¹₀₀, Γ¹₁₁.
    pub christoffel_space_class: T,
    pub ricci: T,
}

/// `(Ω̇/Ω, Ω′/Ω)`.
pub fn christoffel<T: Real>(cf: &ConformalField<T>, t: T, x: T) -> Result<(T, T)> {
    let v = cf.positive_value(t, x)?;
    Ok((cf.derivative(Derivative::T, t, x) / v, cf.derivative(Derivative::X, t, x) / v))
}

/// `R = 2·((Ω̇/Ω)² − Ω̈/Ω)/Ω²`.
pub fn ricci_scalar<T: Real>(cf: &ConformalField<T>, t: T, x: T) -> Result<T> {
    let v = cf.positive_value(t, x)?;
    let rate = cf.derivative(Derivative::T, t, x) / v;
    let accel = cf.derivative(Derivative::TT, t, x) / v;
    Ok(T::lit(2.0) * (rate * rate - accel) / (v * v))
}

/// Extension diagnostic `−(∂_t² − ∂_x²) ln Ω / Ω`, valid for spatially
/// varying factors. Not interchangeable with [`ricci_scalar`].
pub fn ricci_conformal_general<T: Real>(cf: &ConformalField<T>, t: T, x: T) -> Result<T> {
    let v = cf.positive_value(t, x)?;
    let d = |w| cf.derivative(w, t, x) / v;
    let log_tt = d(Derivative::TT) - d(Derivative::T).powi(2);
    let log_xx = d(Derivative::XX) - d(Derivative::X).powi(2);
    Ok(-(log_tt - log_xx) / v)
}

pub fn curvature_report<T: Real>(cf: &ConformalField<T>, t: T, x: T) -> Result<CurvatureReport<T>> {
    let (christoffel_time_class, christoffel_space_class) = christoffel(cf, t, x)?;
    Ok(CurvatureReport { christoffel_time_class, christoffel_space_class, ricci: ricci_scalar(cf, t, x)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> ConformalField<f64> {
        ConformalField::gaussian_bump(0.5, 1.0, 0.0)
    }

    #[test]
    fn constant_metric_is_flat() {
        let cf = ConformalField::constant(4.0);
        let r = curvature_report(&cf, 0.3, -1.2).unwrap();
        assert_eq!(r.christoffel_time_class, 0.0);
        assert_eq!(r.christoffel_space_class, 0.0);
        assert_eq!(r.ricci, 0.0);
        assert_eq!(ricci_conformal_general(&cf, 0.3, -1.2).unwrap(), 0.0);
    }

    #[test]
    fn exponential_time_christoffel_and_ricci() {
        let cf = ConformalField::<f64>::exponential_time(1.0, 2.0);
        for t in [0.0, 0.4, 1.3] {
            let (gt, gx) = christoffel(&cf, t, 0.7).unwrap();
            assert!((gt - 2.0).abs() < 1e-14);
            assert_eq!(gx, 0.0);
            assert!(ricci_scalar(&cf, t, 0.7).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn power_time_ricci() {
        let cf = ConformalField::<f64>::power_time(1.0, 2.0);
        assert!((ricci_scalar(&cf, 1.0, 0.0).unwrap() - 4.0).abs() < 1e-14);
        for t in [1.25f64, 1.5, 2.0] {
            let r = ricci_scalar(&cf, t, 0.0).unwrap();
            assert!((r - 4.0 / t.powi(6)).abs() < 1e-14);
        }
        assert!(matches!(ricci_scalar(&cf, 0.0, 0.0), Err(Error::NonpositiveConformalFactor { .. })));
    }

    #[test]
    fn bump_christoffel_space_class() {
        let (a, s) = (0.5, 1.0);
        let cf = bump();
        for x in [-2.0, -0.3, 0.0, 0.9] {
            let (gt, gx) = christoffel(&cf, 5.0, x).unwrap();
            let e = (-x * x / (2.0 * s * s)).exp();
            let expect = -(a * x / (s * s)) * e / (1.0 + a * e);
            assert_eq!(gt, 0.0);
            assert!((gx - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn nonpositive_factor_rejected() {
        let cf = ConformalField::constant(-1.0);
        assert!(christoffel(&cf, 0.0, 0.0).is_err());
        assert!(ricci_scalar(&cf, 0.0, 0.0).is_err());
        let g = Grid::new(8, 0.25).unwrap();
        assert!(omega_field(&cf, 0.0, g, TimeWindow::new(0.0, 2)).is_err());
    }

    #[test]
    fn omega_field_constant_normalizes_to_one() {
        let g = Grid::new(16, 0.25).unwrap();
        let s = omega_field(&ConformalField::constant(4.0), 0.0, g, TimeWindow::new(0.0, 4)).unwrap();
        assert_eq!(s.scale, 4.0);
        assert!(s.values.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn omega_field_bump_extremes() {
        let a = 0.5;
        let g = Grid::new(256, 1.0 / 16.0).unwrap();
        let s = omega_field(&bump(), 0.0, g, TimeWindow::new(0.0, 1)).unwrap();
        assert!((s.scale - (1.0 + a)).abs() < 1e-15);
        assert!((s.values[128] - 1.0).abs() < 1e-15);
        // x = -8: exp(-32) is negligible.
        assert!((s.values[0] - (1.0 / (1.0 + a)).sqrt()).abs() < 1e-12);
        assert!(s.values.iter().all(|&w| w > 0.0 && w <= 1.0));
    }

    #[test]
    fn omega_field_scale_covariance() {
        let g = Grid::new(64, 0.125).unwrap();
        let w = TimeWindow::new(0.0, 10);
        let cf = ConformalField::<f64>::exponential_time(1.0, 0.3);
        let cf3 = ConformalField::exponential_time(3.0, 0.3);
        let (a, b) = (omega_field(&cf, 0.5, g, w).unwrap(), omega_field(&cf3, 0.5, g, w).unwrap());
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((b.scale - 3.0 * a.scale).abs() < 1e-12);
    }

    #[test]
    fn window_max_covers_time_dependence() {
        let g = Grid::new(8, 0.25).unwrap();
        let cf = ConformalField::exponential_time(1.0, 1.0);
        let m = cf.window_max(&g, TimeWindow::new(0.0, 4)).unwrap();
        assert!((m - 1f64.exp()).abs() < 1e-14);
        let s = omega_field(&cf, 1.0, g, TimeWindow::new(0.0, 4)).unwrap();
        assert!(s.values.iter().all(|&w| (w - 1.0).abs() < 1e-15));
    }

    #[test]
    fn finite_differences_converge_at_second_order() {
        let fields = [bump(), ConformalField::exponential_time(1.0, 0.8), ConformalField::power_time(2.0, 2.5)];
        let (t, x) = (1.3, 0.6);
        for cf in &fields {
            for which in [Derivative::T, Derivative::X, Derivative::TT, Derivative::XX] {
                let exact = cf.derivative(which, t, x);
                if exact == 0.0 {
                    continue;
                }
                let err = |h: f64| (cf.finite_difference(which, t, x, h) - exact).abs();
                let (e1, e2, e3) = (err(0.04), err(0.02), err(0.01));
                for ratio in [e1 / e2, e2 / e3] {
                    assert!((3.5..=4.5).contains(&ratio), "{} {:?}: ratio {ratio}", cf.id(), which);
                }
            }
        }
    }

    #[test]
    fn table_interpolation_and_csv() {
        let csv = "t,x,omega2\n0,0,1\n0,1,3\n1,0,2\n1,1,4\n";
        let table = MetricTable::<f64>::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(table.times(), &[0.0, 1.0]);
        assert!((table.interpolate(0.5, 0.5) - 2.5).abs() < 1e-15);
        assert_eq!(table.interpolate(-1.0, 2.0), 3.0);
        let cf = ConformalField::tabulated(table);
        assert!((cf.derivative(Derivative::X, 0.5, 0.5) - 2.0).abs() < 1e-9);
        assert!((cf.derivative(Derivative::T, 0.5, 0.5) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn table_rejects_nonpositive_and_bad_header() {
        let bad = "t,x,omega2\n0,0,1\n0,1,0\n";
        assert!(matches!(
            MetricTable::<f64>::from_csv_reader(bad.as_bytes()),
            Err(Error::NonpositiveConformalFactor { .. })
        ));
        let hdr = "t,x,omega\n0,0,1\n0,1,1\n";
        assert!(matches!(MetricTable::<f64>::from_csv_reader(hdr.as_bytes()), Err(Error::Table(_))));
        let ragged = "t,x,omega2\n0,0,1\n0,1,1\n1,0,1\n";
        assert!(MetricTable::<f64>::from_csv_reader(ragged.as_bytes()).is_err());
    }
}
