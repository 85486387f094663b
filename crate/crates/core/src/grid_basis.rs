//! The quantized phase-space lattice and the plane-wavelet basis.
//!
//! A wavelet `|X, K⟩` is the plane wave `e^{iKx}/√d` cut to the cell
//! `[X - d/2, X + d/2)`. Cells are centred at `X(m) = (m - (M-1)/2)·d` for
//! `m = 0..M` and momenta are `K(n) = 2πn/d` for `|n| ≤ n_max`. Because the
//! momentum step is exactly `2π/d`, wavelets in one cell are orthonormal and
//! wavelets in different cells have disjoint support.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{composite_nodes, GaussLegendre};

/// Nodes per Gauss–Legendre panel used by the quadrature oracles.
const PANEL_NODES: usize = 16;

/// Smallest accepted `quad_points` for the quadrature oracles.
pub const MIN_QUAD_POINTS: usize = 64;

/// The phase-space lattice: `M` cells of width `d` and momenta `|n| ≤ n_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    d: f64,
    num_cells: usize,
    n_max: usize,
}

/// A single basis state `|X(m), K(n)⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WaveletIndex {
    pub m: usize,
    pub n: i64,
}

impl WaveletIndex {
    pub fn new(m: usize, n: i64) -> Self {
        Self { m, n }
    }
}

impl GridSpec {
    /// `num_cells` must be even and at least 2, `n_max` at least 1.
    pub fn new(d: f64, num_cells: usize, n_max: usize) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidGrid(format!("cell width d must be > 0, got {d}")));
        }
        if num_cells < 2 || !num_cells.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("num_cells must be even and >= 2, got {num_cells}")));
        }
        if n_max < 1 {
            return Err(Error::InvalidGrid("n_max must be >= 1".into()));
        }
        Ok(Self { d, num_cells, n_max })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// System length `L = M·d`.
    pub fn length(&self) -> f64 {
        self.num_cells as f64 * self.d
    }

    /// Number of momenta per cell, `2·n_max + 1`.
    pub fn num_momenta(&self) -> usize {
        2 * self.n_max + 1
    }

    /// Total number of basis states `M·(2·n_max + 1)`.
    pub fn num_states(&self) -> usize {
        self.num_cells * self.num_momenta()
    }

    /// Momentum step of the basis, `2π/d`.
    pub fn delta_k(&self) -> f64 {
        2.0 * PI / self.d
    }

    /// Plane-wave (q-vector) spacing `2π/L`.
    pub fn delta_q(&self) -> f64 {
        2.0 * PI / self.length()
    }

    pub fn k_max(&self) -> f64 {
        self.n_max as f64 * self.delta_k()
    }

    /// Centre of cell `m`.
    pub fn x(&self, m: usize) -> f64 {
        (m as f64 - 0.5 * (self.num_cells as f64 - 1.0)) * self.d
    }

    /// Momentum of index `n`.
    pub fn k(&self, n: i64) -> f64 {
        n as f64 * self.delta_k()
    }

    /// Momentum of column `j` of a `[m][j]` table (`n = j - n_max`).
    pub fn k_of_column(&self, j: usize) -> f64 {
        self.k(self.n_of_column(j))
    }

    pub fn n_of_column(&self, j: usize) -> i64 {
        j as i64 - self.n_max as i64
    }

    pub fn column_of_n(&self, n: i64) -> usize {
        (n + self.n_max as i64) as usize
    }

    pub fn contains(&self, idx: WaveletIndex) -> bool {
        idx.m < self.num_cells && idx.n.unsigned_abs() as usize <= self.n_max
    }

    /// Flat index `m·(2n_max+1) + (n + n_max)`.
    pub fn flat(&self, idx: WaveletIndex) -> usize {
        debug_assert!(self.contains(idx));
        idx.m * self.num_momenta() + self.column_of_n(idx.n)
    }

    pub fn unflat(&self, flat: usize) -> WaveletIndex {
        let nk = self.num_momenta();
        WaveletIndex { m: flat / nk, n: self.n_of_column(flat % nk) }
    }

    /// All basis states in flat order.
    pub fn indices(&self) -> impl Iterator<Item = WaveletIndex> + '_ {
        (0..self.num_states()).map(|f| self.unflat(f))
    }

    /// Cell containing `x` under the closed-left/open-right convention.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let s = (x / self.d + 0.5 * self.num_cells as f64).floor();
        if s >= 0.0 && s < self.num_cells as f64 {
            let m = s as usize;
            // floor can land one cell off for x within rounding of an edge
            if in_cell(x, self.x(m), self.d) {
                return Some(m);
            }
            if m > 0 && in_cell(x, self.x(m - 1), self.d) {
                return Some(m - 1);
            }
            if m + 1 < self.num_cells && in_cell(x, self.x(m + 1), self.d) {
                return Some(m + 1);
            }
        }
        None
    }
}

/// `θ₋(x - X + d/2)·θ₊(X + d/2 - x)`.
fn in_cell(x: f64, center: f64, d: f64) -> bool {
    x - center + 0.5 * d >= 0.0 && center + 0.5 * d - x > 0.0
}

/// `sin(x)/x`, equal to 1 at 0.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `Ψ_{X,K}(x)`: `e^{iKx}/√d` inside the cell, exactly zero outside.
pub fn wavelet_eval(spec: &GridSpec, idx: WaveletIndex, x: f64) -> Complex64 {
    let center = spec.x(idx.m);
    if in_cell(x, center, spec.d) {
        Complex64::from_polar(1.0 / spec.d.sqrt(), spec.k(idx.n) * x)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Closed-form `⟨X,K|X',K'⟩ = δ_{X,X'}·sinc(d(K-K')/2)`; on the lattice the
/// sinc vanishes unless `n = n'`, so the result is exactly 0 or 1.
pub fn inner_product(_spec: &GridSpec, a: WaveletIndex, b: WaveletIndex) -> Complex64 {
    if a.m != b.m {
        return Complex64::new(0.0, 0.0);
    }
    // d(K-K')/2 = π(n-n'): zero of the sinc for every n ≠ n'.
    if a.n == b.n {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

fn panels_for(quad_points: usize, max_freq: f64, d: f64) -> usize {
    // at most half a period of the integrand per 16-node panel
    let by_freq = (max_freq * d / PI).ceil() as usize + 1;
    quad_points.div_ceil(PANEL_NODES).max(by_freq)
}

/// Quadrature of `∫ Ψ_a*(x) g(x) Ψ_b(x) dx` over the shared support.
/// `g_freq` bounds the angular frequency of `g` so the panel count can
/// resolve the integrand.
pub fn matrix_element_quadrature<G>(
    spec: &GridSpec,
    a: WaveletIndex,
    b: WaveletIndex,
    g: G,
    g_freq: f64,
    quad_points: usize,
) -> Result<Complex64>
where
    G: Fn(f64) -> Complex64,
{
    if quad_points < MIN_QUAD_POINTS {
        return Err(Error::InvalidArgument(format!("quad_points must be >= {MIN_QUAD_POINTS}, got {quad_points}")));
    }
    if a.m != b.m {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let center = spec.x(a.m);
    let freq = (spec.k(a.n) - spec.k(b.n)).abs() + g_freq.abs();
    let rule = GaussLegendre::new(PANEL_NODES);
    let (xs, ws) =
        composite_nodes(&rule, center - 0.5 * spec.d, center + 0.5 * spec.d, panels_for(quad_points, freq, spec.d));
    // Evaluate the in-cell formula directly: Gauss nodes never touch the
    // open right endpoint.
    let ka = spec.k(a.n);
    let kb = spec.k(b.n);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&x, &w) in xs.iter().zip(&ws) {
        let phase = Complex64::from_polar(1.0 / spec.d, (kb - ka) * x);
        acc += phase * g(x) * w;
    }
    Ok(acc)
}

/// `⟨a|b⟩` by composite Gauss–Legendre quadrature. Oracle for
/// [`inner_product`].
pub fn inner_product_quadrature(
    spec: &GridSpec,
    a: WaveletIndex,
    b: WaveletIndex,
    quad_points: usize,
) -> Result<Complex64> {
    matrix_element_quadrature(spec, a, b, |_| Complex64::new(1.0, 0.0), 0.0, quad_points)
}

/// Expansion coefficients `a[m][j] = ⟨X(m),K(n)|k⟩` of the normalized plane
/// wave `e^{ikx}/√L`:
///
/// `a = √(d/L)·e^{i(k-K)X}·sinc(d(k-K)/2)`.
pub fn expand_plane_wave(spec: &GridSpec, k: f64) -> Array2<Complex64> {
    expand_plane_wave_with_prefactor(spec, k, (spec.d / spec.length()).sqrt())
}

pub(crate) fn expand_plane_wave_with_prefactor(spec: &GridSpec, k: f64, prefactor: f64) -> Array2<Complex64> {
    let (m_len, nk) = (spec.num_cells, spec.num_momenta());
    Array2::from_shape_fn((m_len, nk), |(m, j)| {
        let dk = k - spec.k_of_column(j);
        let steps = dk / spec.delta_k();
        if steps.round() != 0.0 && (steps - steps.round()).abs() < 1e-12 * steps.abs().max(1.0) {
            // on a sinc zero
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(prefactor * sinc(0.5 * spec.d * dk), dk * spec.x(m))
    })
}

/// `⟨X,K|k⟩` for the plane wave `e^{ikx}/√L`, by quadrature.
pub fn plane_wave_coefficient_quadrature(
    spec: &GridSpec,
    idx: WaveletIndex,
    k: f64,
    quad_points: usize,
) -> Result<Complex64> {
    // ⟨X,K|k⟩ = ∫ Ψ_{X,K}* · (e^{ikx}/√L) dx, written as a matrix element
    // against the constant-momentum state so the shared quadrature is reused:
    // Ψ_{X,K}* Ψ_{X,0} = e^{-iKx}/d, so g = √d·e^{ikx}/√L.
    let zero = WaveletIndex::new(idx.m, 0);
    let scale = (spec.d / spec.length()).sqrt();
    matrix_element_quadrature(spec, idx, zero, |x| Complex64::from_polar(scale, k * x), k, quad_points)
}

/// Project `f` onto every wavelet, `a[m][j] = ⟨X(m),K(n)|f⟩`, by
/// composite Gauss–Legendre quadrature on each cell.
pub fn project<F>(spec: &GridSpec, f: F, quad_points: usize) -> Result<Array2<Complex64>>
where
    F: Fn(f64) -> Complex64,
{
    if quad_points < MIN_QUAD_POINTS {
        return Err(Error::InvalidArgument(format!("quad_points must be >= {MIN_QUAD_POINTS}, got {quad_points}")));
    }
    let (m_len, nk) = (spec.num_cells, spec.num_momenta());
    let rule = GaussLegendre::new(PANEL_NODES);
    // band-limited f plus the highest basis momentum
    let panels = panels_for(quad_points, 2.0 * spec.k_max(), spec.d);
    let inv_sqrt_d = 1.0 / spec.d.sqrt();
    let mut coeffs = Array2::zeros((m_len, nk));
    for m in 0..m_len {
        let c = spec.x(m);
        let (xs, ws) = composite_nodes(&rule, c - 0.5 * spec.d, c + 0.5 * spec.d, panels);
        let mut acc = vec![Complex64::new(0.0, 0.0); nk];
        for (&x, &w) in xs.iter().zip(&ws) {
            let fx = f(x) * (w * inv_sqrt_d);
            // e^{-iKx} for K = -n_max..n_max by repeated multiplication
            let step = Complex64::from_polar(1.0, -spec.delta_k() * x);
            let mut e = Complex64::from_polar(1.0, spec.k_max() * x);
            for a in acc.iter_mut() {
                *a += fx * e;
                e *= step;
            }
        }
        for (j, a) in acc.into_iter().enumerate() {
            coeffs[[m, j]] = a;
        }
    }
    Ok(coeffs)
}

/// `Σ a[m][n]·Ψ_{m,n}(x)`. Only the cell containing `x` contributes.
pub fn reconstruct(spec: &GridSpec, coeffs: &Array2<Complex64>, x: f64) -> Result<Complex64> {
    let shape = (spec.num_cells, spec.num_momenta());
    if coeffs.dim() != shape {
        return Err(Error::ShapeMismatch { expected: format!("{shape:?}"), found: format!("{:?}", coeffs.dim()) });
    }
    let Some(m) = spec.cell_of(x) else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..spec.num_momenta() {
        let idx = WaveletIndex::new(m, spec.n_of_column(j));
        acc += coeffs[[m, j]] * wavelet_eval(spec, idx, x);
    }
    Ok(acc)
}

/// Matrix element of `e^{iqx}` in the form `e^{iqX}·δ_{m,m'}·sinc(d(K+q-K₁)/2)`
/// with `K = K(a.n)`, `K₁ = K(b.n)`.
///
/// It differs from the literal integral `∫Ψ_b* e^{iqx} Ψ_a` by the on-grid
/// sign `e^{i(K-K₁)X} = ±1`; both have the same modulus.
pub fn phase_matrix_element(spec: &GridSpec, q: f64, a: WaveletIndex, b: WaveletIndex) -> Complex64 {
    if a.m != b.m {
        return Complex64::new(0.0, 0.0);
    }
    let arg = 0.5 * spec.d * (spec.k(a.n) + q - spec.k(b.n));
    Complex64::from_polar(1.0, q * spec.x(a.m)) * sinc(arg)
}

/// Largest `|reconstruct(project(f))(x) - f(x)|` over `sample_xs`, the
/// finite-cutoff stand-in for the closure relation.
pub fn closure_defect<F>(spec: &GridSpec, f: F, sample_xs: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
{
    let coeffs = project(spec, &f, MIN_QUAD_POINTS)?;
    let mut worst: f64 = 0.0;
    for &x in sample_xs {
        let r = reconstruct(spec, &coeffs, x)?;
        worst = worst.max((r - f(x)).norm());
    }
    Ok(worst)
}
