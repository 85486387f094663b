//! Shift operators and the difference stencils that stand in for gradients.
//!
//! Both lattice axes are periodic. `shift_k`/`shift_x` move data by `steps`
//! grid points (a delta at `n = 0` shifted by `+1` lands on `n = +1`), so the
//! shift operator `T^s f(K) = f(K + sΔK)` is `shift_k(f, -s)`.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Sub};

use ndarray::Array2;
use num_complex::Complex64;
use num_traits::Zero;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid_basis::GridSpec;

/// Scalar types a [`LatticeField`] can hold.
pub trait FieldValue:
    Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + AddAssign
{
}

impl<T> FieldValue for T where T: Copy + Zero + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> + AddAssign {}

/// Values on the `[m][j]` lattice, `j = n + n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField<T = f64> {
    spec: GridSpec,
    values: Array2<T>,
}

impl<T: FieldValue> LatticeField<T> {
    pub fn new(spec: GridSpec, values: Array2<T>) -> Result<Self> {
        let shape = (spec.num_cells(), spec.num_momenta());
        if values.dim() != shape {
            return Err(Error::ShapeMismatch { expected: format!("{shape:?}"), found: format!("{:?}", values.dim()) });
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: Array2::zeros((spec.num_cells(), spec.num_momenta())) }
    }

    /// Build from `f(m, n)` with `n` the signed momentum index.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, i64) -> T) -> Self {
        let values = Array2::from_shape_fn((spec.num_cells(), spec.num_momenta()), |(m, j)| f(m, spec.n_of_column(j)));
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<T> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    pub fn get(&self, m: usize, n: i64) -> T {
        self.values[[m, self.spec.column_of_n(n)]]
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U) -> LatticeField<U> {
        LatticeField { spec: self.spec, values: self.values.mapv(f) }
    }

    fn check_same_grid(&self, other: &GridSpec) -> Result<()> {
        if &self.spec != other {
            return Err(Error::ShapeMismatch { expected: format!("{:?}", other), found: format!("{:?}", self.spec) });
        }
        Ok(())
    }
}

impl LatticeField<f64> {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(other.values.iter()).fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

fn wrap(i: isize, len: usize) -> usize {
    i.rem_euclid(len as isize) as usize
}

/// Move the momentum axis by `steps` points, periodically.
pub fn shift_k<T: FieldValue>(field: &LatticeField<T>, steps: i64) -> Result<LatticeField<T>> {
    let nk = field.spec.num_momenta();
    if steps.unsigned_abs() as usize > nk {
        return Err(Error::InvalidArgument(format!(
            "|steps| = {} exceeds the momentum axis length {nk}",
            steps.unsigned_abs()
        )));
    }
    let v = &field.values;
    let values = Array2::from_shape_fn(v.dim(), |(m, j)| v[[m, wrap(j as isize - steps as isize, nk)]]);
    Ok(LatticeField { spec: field.spec, values })
}

/// Move the position axis by `steps` cells, periodically.
pub fn shift_x<T: FieldValue>(field: &LatticeField<T>, steps: i64) -> Result<LatticeField<T>> {
    let mm = field.spec.num_cells();
    if steps.unsigned_abs() as usize > mm {
        return Err(Error::InvalidArgument(format!(
            "|steps| = {} exceeds the number of cells {mm}",
            steps.unsigned_abs()
        )));
    }
    let v = &field.values;
    let values = Array2::from_shape_fn(v.dim(), |(m, j)| v[[wrap(m as isize - steps as isize, mm), j]]);
    Ok(LatticeField { spec: field.spec, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilKind {
    /// `(-1)^j/(jΔK)` for `j = 1..=min(M/2, n_max)`.
    Truncated,
    /// The same series with every periodic image folded onto the momentum
    /// ring; equals the Fourier differentiation stencil for an odd ring.
    Periodic,
}

/// Antisymmetric momentum-difference stencil. `coefficients[j-1]` multiplies
/// `f(K - jΔK) - f(K + jΔK)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftStencil {
    coefficients: Vec<f64>,
    kind: StencilKind,
}

impl DriftStencil {
    /// The raw alternating stencil `c_j = (-1)^j/(jΔK)` with half-width
    /// `min(M/2, n_max)`.
    pub fn truncated(spec: &GridSpec) -> Self {
        let half_width = (spec.num_cells() / 2).min(spec.n_max());
        Self::truncated_with(half_width, spec.delta_k())
    }

    pub fn truncated_with(half_width: usize, delta_k: f64) -> Self {
        let coefficients = (1..=half_width).map(|j| alternating_sign(j) / (j as f64 * delta_k)).collect();
        Self { coefficients, kind: StencilKind::Truncated }
    }

    /// Folded stencil on a ring of `num_points` (odd) momenta:
    /// `c_j = Σ_p (-1)^{j+pN}/((j+pN)ΔK) = (-1)^j·π/(N·ΔK·sin(πj/N))`.
    pub fn periodic(num_points: usize, delta_k: f64) -> Result<Self> {
        if num_points < 3 || num_points.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "periodic drift stencil needs an odd ring of >= 3 points, got {num_points}"
            )));
        }
        let n = num_points as f64;
        let coefficients = (1..=(num_points - 1) / 2)
            .map(|j| alternating_sign(j) * PI / (n * delta_k * (PI * j as f64 / n).sin()))
            .collect();
        Ok(Self { coefficients, kind: StencilKind::Periodic })
    }

    /// The stencil used by [`drift_apply`] on `spec`.
    pub fn for_spec(spec: &GridSpec) -> Self {
        Self::periodic(spec.num_momenta(), spec.delta_k()).expect("2*n_max+1 is odd and >= 3")
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn half_width(&self) -> usize {
        self.coefficients.len()
    }

    pub fn kind(&self) -> StencilKind {
        self.kind
    }

    /// `Σ_j 2|c_j|`, the Gershgorin radius of the stencil.
    pub fn abs_row_sum(&self) -> f64 {
        self.coefficients.iter().map(|c| 2.0 * c.abs()).sum()
    }

    /// `Σ_j c_j (f[i-j] - f[i+j])` on a periodic row: the momentum derivative.
    pub fn derivative_row<T: FieldValue>(&self, row: &[T], out: &mut [T]) {
        let len = row.len();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (jm1, &c) in self.coefficients.iter().enumerate() {
                let j = (jm1 + 1) as isize;
                let back = row[wrap(i as isize - j, len)];
                let fwd = row[wrap(i as isize + j, len)];
                acc += (back - fwd) * c;
            }
            *o = acc;
        }
    }
}

fn alternating_sign(j: usize) -> f64 {
    if j.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Drift term `-E(X(m))·Σ_j c_j [f(m, K - jΔK) - f(m, K + jΔK)]` with the
/// periodic stencil of [`DriftStencil::for_spec`].
pub fn drift_apply<T: FieldValue>(field: &LatticeField<T>, e_profile: &[f64]) -> Result<LatticeField<T>> {
    drift_apply_with(field, e_profile, &DriftStencil::for_spec(&field.spec))
}

pub fn drift_apply_with<T: FieldValue>(
    field: &LatticeField<T>,
    e_profile: &[f64],
    stencil: &DriftStencil,
) -> Result<LatticeField<T>> {
    let spec = field.spec;
    if e_profile.len() != spec.num_cells() {
        return Err(Error::ShapeMismatch {
            expected: format!("E profile of length {}", spec.num_cells()),
            found: format!("length {}", e_profile.len()),
        });
    }
    let nk = spec.num_momenta();
    let mut out = LatticeField::zeros(spec);
    let mut row = vec![T::zero(); nk];
    let mut deriv = vec![T::zero(); nk];
    for (m, &e) in e_profile.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        for (j, r) in row.iter_mut().enumerate() {
            *r = field.values[[m, j]];
        }
        stencil.derivative_row(&row, &mut deriv);
        for (j, &dv) in deriv.iter().enumerate() {
            out.values[[m, j]] = dv * (-e);
        }
    }
    Ok(out)
}

/// `D_X f = (f(m) - f(m+1))/(2d)` per momentum column, periodic in `m`.
pub fn stream_d<T: FieldValue>(field: &LatticeField<T>) -> LatticeField<T> {
    one_sided(field, 1)
}

/// `D_{-X} f = (f(m) - f(m-1))/(2d)`.
pub fn stream_d_minus<T: FieldValue>(field: &LatticeField<T>) -> LatticeField<T> {
    one_sided(field, -1)
}

fn one_sided<T: FieldValue>(field: &LatticeField<T>, dir: isize) -> LatticeField<T> {
    let mm = field.spec.num_cells();
    let scale = 0.5 / field.spec.d();
    let v = &field.values;
    let values = Array2::from_shape_fn(v.dim(), |(m, j)| (v[[m, j]] - v[[wrap(m as isize + dir, mm), j]]) * scale);
    LatticeField { spec: field.spec, values }
}

/// `D²_X f = (f(m+1) + f(m-1) - 2f(m))/d²`.
pub fn stream_d2<T: FieldValue>(field: &LatticeField<T>) -> LatticeField<T> {
    let mm = field.spec.num_cells();
    let inv_d2 = 1.0 / (field.spec.d() * field.spec.d());
    let v = &field.values;
    let values = Array2::from_shape_fn(v.dim(), |(m, j)| {
        let up = v[[wrap(m as isize + 1, mm), j]];
        let down = v[[wrap(m as isize - 1, mm), j]];
        (up + down - v[[m, j]] * 2.0) * inv_d2
    });
    LatticeField { spec: field.spec, values }
}

/// `D_{-X} f - D_X f = (f(m+1) - f(m-1))/(2d)`, the centred first difference.
pub fn centered_difference<T: FieldValue>(field: &LatticeField<T>) -> LatticeField<T> {
    let minus = stream_d_minus(field);
    let plus = stream_d(field);
    let values = Array2::from_shape_fn(field.values.dim(), |ij| minus.values[ij] - plus.values[ij]);
    LatticeField { spec: field.spec, values }
}

/// Spectral derivative of periodic samples: forward DFT, multiply mode `j`
/// by `i·2πj/period` (symmetric numbering, Nyquist mode zeroed for even
/// lengths), inverse DFT.
pub fn dft_derivative_oracle(samples: &[Complex64], period: f64) -> Result<Vec<Complex64>> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!("spectral derivative needs at least 4 samples, got {n}")));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidArgument(format!("period must be > 0, got {period}")));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = samples.to_vec();
    fwd.process(&mut buf);
    let base = 2.0 * PI / period;
    for (j, c) in buf.iter_mut().enumerate() {
        let mode = if 2 * j < n {
            j as f64
        } else if 2 * j == n {
            0.0
        } else {
            j as f64 - n as f64
        };
        *c *= Complex64::new(0.0, base * mode / n as f64);
    }
    inv.process(&mut buf);
    Ok(buf)
}

/// [`dft_derivative_oracle`] along the momentum axis of a real field
/// (`∂f/∂K`, period `(2n_max+1)·ΔK`).
pub fn spectral_derivative_k(field: &LatticeField<f64>) -> Result<LatticeField<f64>> {
    let spec = field.spec;
    let period = spec.num_momenta() as f64 * spec.delta_k();
    let mut out = LatticeField::zeros(spec);
    for m in 0..spec.num_cells() {
        let row: Vec<Complex64> = field.values.row(m).iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let d = dft_derivative_oracle(&row, period)?;
        for (j, z) in d.into_iter().enumerate() {
            out.values[[m, j]] = z.re;
        }
    }
    Ok(out)
}

/// [`dft_derivative_oracle`] along the position axis (`∂f/∂X`, period `L`).
pub fn spectral_derivative_x(field: &LatticeField<f64>) -> Result<LatticeField<f64>> {
    let spec = field.spec;
    let mut out = LatticeField::zeros(spec);
    for j in 0..spec.num_momenta() {
        let col: Vec<Complex64> = field.values.column(j).iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let d = dft_derivative_oracle(&col, spec.length())?;
        for (m, z) in d.into_iter().enumerate() {
            out.values[[m, j]] = z.re;
        }
    }
    Ok(out)
}

pub(crate) fn ensure_same_grid<T: FieldValue>(field: &LatticeField<T>, spec: &GridSpec) -> Result<()> {
    field.check_same_grid(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(m: usize, n: usize) -> GridSpec {
        GridSpec::new(1.0, m, n).unwrap()
    }

    fn delta_k(s: GridSpec) -> LatticeField<f64> {
        LatticeField::from_fn(s, |_, n| if n == 0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn shift_k_examples() {
        let s = spec(4, 3);
        let f = LatticeField::from_fn(s, |m, n| m as f64 * 10.0 + n as f64);
        assert_eq!(shift_k(&f, 0).unwrap(), f);
        assert_eq!(shift_k(&shift_k(&f, 1).unwrap(), -1).unwrap(), f);
        let moved = shift_k(&delta_k(s), 1).unwrap();
        for m in 0..4 {
            assert_eq!(moved.get(m, 1), 1.0);
            assert_eq!(moved.get(m, 0), 0.0);
        }
        assert!(shift_k(&f, 8).is_err());
    }

    #[test]
    fn shift_x_examples() {
        let s = spec(4, 1);
        let f = LatticeField::from_fn(s, |m, n| (m * 3) as f64 - n as f64);
        assert_eq!(shift_x(&f, 4).unwrap(), f);
        let d = LatticeField::from_fn(s, |m, _| if m == 0 { 1.0 } else { 0.0 });
        let moved = shift_x(&d, 1).unwrap();
        assert_eq!(moved.values().column(0).to_vec(), vec![0.0, 1.0, 0.0, 0.0]);
        let c = LatticeField::from_fn(s, |_, _| 0.3);
        assert_eq!(shift_x(&c, -3).unwrap(), c);
    }

    #[test]
    fn truncated_stencil_coefficients() {
        let s = GridSpec::new(0.5, 8, 6).unwrap();
        let st = DriftStencil::truncated(&s);
        let dk = s.delta_k();
        assert_eq!(st.half_width(), 4);
        assert!((st.coefficients()[0] + 1.0 / dk).abs() < 1e-15);
        assert!((st.coefficients()[1] - 0.5 / dk).abs() < 1e-15);
        for w in st.coefficients().windows(2) {
            assert!(w[0] * w[1] < 0.0);
        }
    }

    #[test]
    fn periodic_stencil_tends_to_truncated_coefficients() {
        let big = DriftStencil::periodic(2001, 1.0).unwrap();
        assert!((big.coefficients()[0] + 1.0).abs() < 1e-5);
        assert!((big.coefficients()[1] - 0.5).abs() < 1e-5);
        assert!(DriftStencil::periodic(10, 1.0).is_err());
    }

    #[test]
    fn drift_annihilates_k_constants_and_zero_field() {
        let s = spec(4, 5);
        let f = LatticeField::from_fn(s, |m, _| 1.0 + m as f64);
        let e = vec![0.3, -1.0, 2.0, 0.0];
        let out = drift_apply(&f, &e).unwrap();
        assert!(out.values().iter().all(|v| v.abs() < 1e-12));
        let out = drift_apply_with(&f, &e, &DriftStencil::truncated(&s)).unwrap();
        assert!(out.values().iter().all(|v| v.abs() < 1e-12));
        let g = LatticeField::from_fn(s, |_, n| (n as f64).sin());
        let out = drift_apply(&g, &[0.0; 4]).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
        assert!(drift_apply(&g, &[1.0; 3]).is_err());
    }

    #[test]
    fn stream_d_delta() {
        let s = spec(4, 1);
        let d = LatticeField::from_fn(s, |m, _| if m == 0 { 1.0 } else { 0.0 });
        let out = stream_d(&d);
        assert_eq!(out.values().column(1).to_vec(), vec![0.5, 0.0, 0.0, -0.5]);
        let back = stream_d_minus(&d);
        assert_eq!(back.values().column(1).to_vec(), vec![0.5, -0.5, 0.0, 0.0]);
        let c = LatticeField::from_fn(s, |_, _| 2.5);
        assert!(stream_d(&c).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stream_d_on_linear_interior() {
        let s = GridSpec::new(0.5, 8, 1).unwrap();
        let slope = 3.0;
        let f = LatticeField::from_fn(s, |m, _| slope * s.x(m));
        let out = stream_d(&f);
        for m in 1..6 {
            assert!((out.values()[[m, 0]] + slope / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn stream_d2_examples() {
        let s = spec(4, 1);
        let d = LatticeField::from_fn(s, |m, _| if m == 0 { 1.0 } else { 0.0 });
        assert_eq!(stream_d2(&d).values().column(0).to_vec(), vec![-2.0, 1.0, 0.0, 1.0]);
        let c = LatticeField::from_fn(s, |_, _| 7.0);
        assert!(stream_d2(&c).values().iter().all(|&v| v == 0.0));
        let s = GridSpec::new(0.25, 16, 1).unwrap();
        let q = LatticeField::from_fn(s, |m, _| s.x(m) * s.x(m));
        let out = stream_d2(&q);
        for m in 1..15 {
            assert!((out.values()[[m, 2]] - 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn stream_d2_is_composition_of_shifts() {
        let s = GridSpec::new(0.5, 6, 2).unwrap();
        let f = LatticeField::from_fn(s, |m, n| ((m * 7 + 3) as f64).sin() * (n as f64 + 0.5));
        let up = shift_x(&f, -1).unwrap();
        let down = shift_x(&f, 1).unwrap();
        let inv_d2 = 1.0 / (s.d() * s.d());
        let built = Array2::from_shape_fn(f.values().dim(), |ij| {
            (up.values()[ij] + down.values()[ij] - f.values()[ij] * 2.0) * inv_d2
        });
        assert_eq!(&built, stream_d2(&f).values());
    }

    #[test]
    fn oracle_examples() {
        let c = vec![Complex64::new(2.0, -1.0); 8];
        assert!(dft_derivative_oracle(&c, 3.0).unwrap().iter().all(|z| z.norm() < 1e-14));
        assert!(dft_derivative_oracle(&c[..3], 3.0).is_err());
        let n = 16;
        let period = 2.5;
        let w = 2.0 * PI / period;
        let mode: Vec<Complex64> =
            (0..n).map(|i| Complex64::from_polar(1.0, w * period * i as f64 / n as f64)).collect();
        let d = dft_derivative_oracle(&mode, period).unwrap();
        for (a, b) in d.iter().zip(&mode) {
            assert!((a - Complex64::new(0.0, w) * b).norm() < 1e-13);
        }
    }
}
