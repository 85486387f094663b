//! Browser demo: three interactive views of the lattice.
//!
//! Each export returns a flat `Float64Array` so the page can draw it
//! without any glue beyond `wasm-bindgen`.

use dke_core::difference_ops::{dft_derivative_oracle, DriftStencil, LatticeField};
use dke_core::evolution::{self, IntegratorConfig, Scheme};
use dke_core::grid_basis::{expand_plane_wave, reconstruct};
use dke_core::kinetic_terms::PotentialProfile;
use dke_core::{Complex64, GridSpec};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Rows `[x, Re exact, Re reconstructed, Im exact, Im reconstructed]` for
/// the plane wave `e^{ikx}/√L` rebuilt from its wavelet coefficients.
pub fn plane_wave_rows(d: f64, cells: usize, n_max: usize, k: f64, samples: usize) -> dke_core::Result<Vec<f64>> {
    let spec = GridSpec::new(d, cells, n_max)?;
    let coeffs = expand_plane_wave(&spec, k);
    let norm = 1.0 / spec.length().sqrt();
    let left = -0.5 * spec.length();
    let mut out = Vec::with_capacity(samples * 5);
    for i in 0..samples {
        let x = left + spec.length() * i as f64 / samples as f64;
        let exact = Complex64::from_polar(norm, k * x);
        let r = reconstruct(&spec, &coeffs, x)?;
        out.extend_from_slice(&[x, exact.re, r.re, exact.im, r.im]);
    }
    Ok(out)
}

/// Rows `[K, exact, periodic stencil, truncated stencil, spectral]` for
/// `∂/∂K` of a Gaussian of width `sigma` (in grid steps) on an odd periodic
/// grid of `points` momenta with unit spacing.
pub fn drift_rows(points: usize, sigma: f64) -> dke_core::Result<Vec<f64>> {
    let periodic = DriftStencil::periodic(points, 1.0)?;
    let truncated = DriftStencil::truncated_with(points / 2, 1.0);
    let half = (points / 2) as f64;
    let ks: Vec<f64> = (0..points).map(|j| j as f64 - half).collect();
    let f: Vec<f64> = ks.iter().map(|k| (-k * k / (2.0 * sigma * sigma)).exp()).collect();
    let mut by_periodic = vec![0.0; points];
    let mut by_truncated = vec![0.0; points];
    periodic.derivative_row(&f, &mut by_periodic);
    truncated.derivative_row(&f, &mut by_truncated);
    let samples: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let spectral = dft_derivative_oracle(&samples, points as f64)?;
    let mut out = Vec::with_capacity(points * 5);
    for j in 0..points {
        let exact = -ks[j] / (sigma * sigma) * f[j];
        out.extend_from_slice(&[ks[j], exact, by_periodic[j], by_truncated[j], spectral[j].re]);
    }
    Ok(out)
}

/// Occupation of the `K = 2π·column/d` column under free streaming, one row
/// of `cells` values per frame. The packet sits on a 0.2 background.
pub fn streaming_frames(
    cells: usize,
    column: i64,
    sigma_r: f64,
    t_end: f64,
    frames: usize,
) -> dke_core::Result<Vec<f64>> {
    let n_max = column.unsigned_abs().max(1) as usize;
    let spec = GridSpec::new(1.0, cells, n_max)?;
    let x_c = -0.25 * spec.length();
    let n0 = LatticeField::from_fn(spec, |m, n| {
        let dx = spec.x(m) - x_c;
        0.2 + if n == column { 0.5 * (-dx * dx / (2.0 * sigma_r * sigma_r)).exp() } else { 0.0 }
    });
    let bound = 0.5 * spec.d() / spec.k_max();
    let steps_per_frame = ((t_end / frames.max(1) as f64) / (0.8 * bound)).ceil().max(1.0) as usize;
    let total_steps = steps_per_frame * frames.max(1);
    let config = IntegratorConfig::new(t_end / total_steps as f64, t_end, Scheme::Rk4, steps_per_frame)?;
    let trajectory = evolution::run_distribution(&n0, &PotentialProfile::zero(&spec), None, &config)?;
    let j = spec.column_of_n(column);
    Ok(trajectory.iter().flat_map(|s| s.state.values().column(j).to_vec()).collect())
}

#[wasm_bindgen(js_name = planeWave)]
pub fn plane_wave(d: f64, cells: usize, n_max: usize, k: f64, samples: usize) -> Result<Vec<f64>, JsValue> {
    plane_wave_rows(d, cells, n_max, k, samples).map_err(js_err)
}

#[wasm_bindgen(js_name = driftComparison)]
pub fn drift_comparison(points: usize, sigma: f64) -> Result<Vec<f64>, JsValue> {
    drift_rows(points, sigma).map_err(js_err)
}

#[wasm_bindgen(js_name = freeStreaming)]
pub fn free_streaming(cells: usize, column: i32, sigma_r: f64, t_end: f64, frames: usize) -> Result<Vec<f64>, JsValue> {
    streaming_frames(cells, column as i64, sigma_r, t_end, frames).map_err(js_err)
}
