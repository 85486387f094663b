//! Right-hand sides of the kinetic equations on the wavelet lattice.
//!
//! * [`dbe_rhs`]: the difference Boltzmann equation for the occupation
//!   `n(R, K)`: streaming by the centred `D_{-R} - D_R` difference, drift by
//!   the momentum stencil, and the Pauli master collision integral.
//! * [`classical_rhs`]: the differential Boltzmann equation with spectral
//!   gradients, used as the continuum-limit oracle for [`dbe_rhs`].
//! * [`meanfield_rhs`]: `dP/dt = i(hᵀP - Phᵀ)` for the full polarization
//!   matrix, where `h` is the mean-field one-particle Hamiltonian written
//!   with the same difference operators.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;

use crate::difference_ops::{
    centered_difference, drift_apply, ensure_same_grid, spectral_derivative_k, spectral_derivative_x, DriftStencil,
    LatticeField,
};
use crate::error::{Error, Result};
use crate::grid_basis::{phase_matrix_element, GridSpec, WaveletIndex};

/// Occupation numbers `n(R, K)`.
pub type DistributionField = LatticeField<f64>;

/// Tolerance on occupations accepted by the collision integral.
pub const OCCUPATION_SLACK: f64 = 1e-12;

/// Hermiticity tolerance for [`meanfield_rhs`] inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Potential energy `V(R)` and field `E(R) = -∇V(R)` at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialProfile {
    v: Vec<f64>,
    e: Vec<f64>,
}

impl PotentialProfile {
    pub fn zero(spec: &GridSpec) -> Self {
        let n = spec.num_cells();
        Self { v: vec![0.0; n], e: vec![0.0; n] }
    }

    /// Uniform field `E0`, potential `V = -E0·x`.
    pub fn uniform_field(spec: &GridSpec, e0: f64) -> Self {
        let m = spec.num_cells();
        Self { v: (0..m).map(|i| -e0 * spec.x(i)).collect(), e: vec![e0; m] }
    }

    /// `V = k x²/2`, `E = -k x`.
    pub fn harmonic(spec: &GridSpec, k_spring: f64) -> Self {
        let m = spec.num_cells();
        Self {
            v: (0..m).map(|i| 0.5 * k_spring * spec.x(i).powi(2)).collect(),
            e: (0..m).map(|i| -k_spring * spec.x(i)).collect(),
        }
    }

    /// Field from centred differences of `v` (one-sided at the two ends).
    pub fn from_potential(spec: &GridSpec, v: Vec<f64>) -> Result<Self> {
        let m = spec.num_cells();
        if v.len() != m {
            return Err(Error::ShapeMismatch {
                expected: format!("potential of length {m}"),
                found: format!("length {}", v.len()),
            });
        }
        let d = spec.d();
        let e = (0..m)
            .map(|i| {
                if i == 0 {
                    -(v[1] - v[0]) / d
                } else if i == m - 1 {
                    -(v[m - 1] - v[m - 2]) / d
                } else {
                    -(v[i + 1] - v[i - 1]) / (2.0 * d)
                }
            })
            .collect();
        Ok(Self { v, e })
    }

    /// Both arrays supplied; interior points must satisfy
    /// `|E + (V(m+1) - V(m-1))/2d| ≤ tol`.
    pub fn new(spec: &GridSpec, v: Vec<f64>, e: Vec<f64>, tol: f64) -> Result<Self> {
        let m = spec.num_cells();
        if v.len() != m || e.len() != m {
            return Err(Error::ShapeMismatch {
                expected: format!("V and E of length {m}"),
                found: format!("lengths {} and {}", v.len(), e.len()),
            });
        }
        for i in 1..m - 1 {
            let grad = (v[i + 1] - v[i - 1]) / (2.0 * spec.d());
            if (e[i] + grad).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "E inconsistent with -dV/dx at cell {i}: E = {}, -dV/dx = {}",
                    e[i], -grad
                )));
            }
        }
        Ok(Self { v, e })
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn max_abs_e(&self) -> f64 {
        self.e.iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

/// Single-particle energy `K²/2`.
pub fn kinetic_energy(k: f64) -> f64 {
    0.5 * k * k
}

pub fn fermi_dirac(energy: f64, mu: f64, temperature: f64) -> f64 {
    let x = (energy - mu) / temperature;
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Fermi–Dirac occupations `f(K²/2)` on every cell.
pub fn fermi_dirac_field(spec: &GridSpec, mu: f64, temperature: f64) -> DistributionField {
    LatticeField::from_fn(*spec, |_, n| fermi_dirac(kinetic_energy(spec.k(n)), mu, temperature))
}

/// Chemical potential giving `Σ_j f(ε_j) = target`, by bisection.
pub fn chemical_potential(energies: &[f64], target: f64, temperature: f64) -> Result<f64> {
    if !(target > 0.0 && target < energies.len() as f64) {
        return Err(Error::InvalidArgument(format!(
            "particle number {target} must lie strictly between 0 and {}",
            energies.len()
        )));
    }
    let count = |mu: f64| energies.iter().map(|&e| fermi_dirac(e, mu, temperature)).sum::<f64>();
    let lo_e = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_e = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = lo_e - 50.0 * temperature - 1.0;
    let mut hi = hi_e + 50.0 * temperature + 1.0;
    while count(lo) > target {
        lo -= (hi - lo).max(1.0);
    }
    while count(hi) < target {
        hi += (hi - lo).max(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionKind {
    UserTable,
    StaticScreenedCoulomb { epsilon_static: f64, eta: f64, q_max: usize },
}

/// Transition rates `W[k][k']` (probability per unit time of `k' → k`) over
/// flat indices.
#[derive(Debug, Clone)]
pub struct CollisionModel {
    rates: Array2<f64>,
    energies: Vec<f64>,
    temperature: f64,
    kind: CollisionKind,
    detailed_balance: bool,
    // (k, k1, W(k,k1), W(k1,k)) for k < k1 with at least one nonzero rate
    pairs: Vec<(usize, usize, f64, f64)>,
}

/// Relative tolerance of the detailed-balance check.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;

impl CollisionModel {
    /// A user-supplied table. When `detailed_balance` is set the ratio
    /// `W(k,k')/W(k',k) = exp((ε_k' - ε_k)/T)` is verified pairwise.
    pub fn from_table(
        rates: Array2<f64>,
        energies: Vec<f64>,
        temperature: f64,
        detailed_balance: bool,
    ) -> Result<Self> {
        let n = energies.len();
        if rates.dim() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: format!("({n}, {n}) rate table"),
                found: format!("{:?}", rates.dim()),
            });
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!("temperature must be > 0, got {temperature}")));
        }
        if let Some(((k, k1), w)) = rates.indexed_iter().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("rate W[{k}][{k1}] = {w} must be finite and >= 0")));
        }
        let model = Self::assemble(rates, energies, temperature, CollisionKind::UserTable, detailed_balance);
        if detailed_balance {
            model.check_detailed_balance()?;
        }
        Ok(model)
    }

    fn assemble(
        rates: Array2<f64>,
        energies: Vec<f64>,
        temperature: f64,
        kind: CollisionKind,
        detailed_balance: bool,
    ) -> Self {
        let n = energies.len();
        let mut pairs = Vec::new();
        for k in 0..n {
            for k1 in k + 1..n {
                let (fwd, bwd) = (rates[[k, k1]], rates[[k1, k]]);
                if fwd != 0.0 || bwd != 0.0 {
                    pairs.push((k, k1, fwd, bwd));
                }
            }
        }
        Self { rates, energies, temperature, kind, detailed_balance, pairs }
    }

    /// Pairwise check of `W(k,k')·e^{-Δ/2T} = W(k',k)·e^{Δ/2T}`,
    /// `Δ = ε_k' - ε_k`, relative to the larger side.
    pub fn check_detailed_balance(&self) -> Result<()> {
        let t = self.temperature;
        for &(k, k1, fwd, bwd) in &self.pairs {
            let half = 0.5 * (self.energies[k1] - self.energies[k]) / t;
            let a = fwd * (-half).exp();
            let b = bwd * half.exp();
            let scale = a.abs().max(b.abs());
            if scale > 0.0 && (a - b).abs() > DETAILED_BALANCE_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "detailed balance violated for pair ({k}, {k1}): W = {fwd}, reverse W = {bwd}"
                )));
            }
        }
        Ok(())
    }

    pub fn rates(&self) -> &Array2<f64> {
        &self.rates
    }

    pub fn rate(&self, k: usize, k1: usize) -> f64 {
        self.rates[[k, k1]]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn kind(&self) -> CollisionKind {
        self.kind
    }

    pub fn detailed_balance(&self) -> bool {
        self.detailed_balance
    }

    pub fn num_states(&self) -> usize {
        self.energies.len()
    }

    /// `max_k Σ_k1 (W(k,k1) + W(k1,k))`.
    pub fn max_total_rate(&self) -> f64 {
        let n = self.num_states();
        let mut totals = vec![0.0; n];
        for &(k, k1, fwd, bwd) in &self.pairs {
            totals[k] += fwd + bwd;
            totals[k1] += fwd + bwd;
        }
        totals.into_iter().fold(0.0, f64::max)
    }

    /// Smallest strictly positive rate in the table.
    pub fn min_positive_rate(&self) -> Option<f64> {
        self.pairs
            .iter()
            .flat_map(|&(_, _, a, b)| [a, b])
            .filter(|&w| w > 0.0)
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.min(w))))
    }
}

/// Normalized Lorentzian of half-width `eta`.
pub fn lorentzian(omega: f64, eta: f64) -> f64 {
    eta / (PI * (omega * omega + eta * eta))
}

/// Thermal weight of a transition releasing energy `omega` into a bath at
/// `temperature`: `[n(ω)+1]·tanh(ω/2T)·L_η(ω) = L_η(ω)/(1 + e^{-ω/T})`.
/// The ratio `g(ω)/g(-ω)` is `e^{ω/T}`.
pub fn thermal_weight(omega: f64, temperature: f64, eta: f64) -> f64 {
    let x = -omega / temperature;
    let occ = if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    };
    lorentzian(omega, eta) * occ
}

/// Golden-rule rates for statically screened Coulomb scattering with
/// `q = 2πj/L`, `1 ≤ |j| ≤ 4·n_max`.
pub fn build_screened_coulomb_rates(
    spec: &GridSpec,
    epsilon_static: f64,
    temperature: f64,
    eta: f64,
) -> Result<CollisionModel> {
    build_screened_coulomb_rates_with_q_max(spec, epsilon_static, temperature, eta, 4 * spec.n_max())
}

/// `W(k,k') = 2 Σ_q (V_q/ε_s)·|⟨e^{iqx}⟩_{k,k'}|²·g(ε_k' - ε_k)` with
/// `V_q = 4π/(L q²)` and the thermal weight `g` of [`thermal_weight`].
pub fn build_screened_coulomb_rates_with_q_max(
    spec: &GridSpec,
    epsilon_static: f64,
    temperature: f64,
    eta: f64,
    q_max: usize,
) -> Result<CollisionModel> {
    for (name, v) in [("epsilon_static", epsilon_static), ("temperature", temperature), ("eta", eta)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
        }
    }
    if q_max < 1 {
        return Err(Error::InvalidArgument("q_max must be >= 1".into()));
    }
    let n_states = spec.num_states();
    let nk = spec.num_momenta();
    let energies: Vec<f64> = spec.indices().map(|i| kinetic_energy(spec.k(i.n))).collect();
    let length = spec.length();
    let qs: Vec<(f64, f64)> = (1..=q_max as i64)
        .flat_map(|j| [j, -j])
        .map(|j| {
            let q = spec.delta_q() * j as f64;
            (q, 4.0 * PI / (length * q * q) / epsilon_static)
        })
        .collect();

    // the rate only depends on (n, n1) within a cell; compute one block
    let mut block = Array2::<f64>::zeros((nk, nk));
    for a in 0..nk {
        for b in 0..nk {
            if a == b {
                continue;
            }
            let ka = WaveletIndex::new(0, spec.n_of_column(a));
            let kb = WaveletIndex::new(0, spec.n_of_column(b));
            let form: f64 = qs.iter().map(|&(q, vq)| vq * phase_matrix_element(spec, q, ka, kb).norm_sqr()).sum();
            let released = kinetic_energy(spec.k(kb.n)) - kinetic_energy(spec.k(ka.n));
            block[[a, b]] = 2.0 * form * thermal_weight(released, temperature, eta);
        }
    }
    let mut rates = Array2::<f64>::zeros((n_states, n_states));
    for m in 0..spec.num_cells() {
        let off = m * nk;
        for a in 0..nk {
            for b in 0..nk {
                rates[[off + a, off + b]] = block[[a, b]];
            }
        }
    }
    let model = CollisionModel::assemble(
        rates,
        energies,
        temperature,
        CollisionKind::StaticScreenedCoulomb { epsilon_static, eta, q_max },
        true,
    );
    Ok(model)
}

/// Pauli master collision integral on flat occupations:
/// `Σ_k1 [W(k,k1) n_k1 (1-n_k) - W(k1,k)(1-n_k1) n_k]`.
pub fn collision_rhs_flat(n: &[f64], model: &CollisionModel) -> Result<Vec<f64>> {
    if n.len() != model.num_states() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} occupations", model.num_states()),
            found: format!("{}", n.len()),
        });
    }
    check_occupations(n)?;
    Ok(collision_fluxes(n, model))
}

/// The collision integral without the range check on `n`, for integrator
/// stage values. Lengths must already agree.
pub(crate) fn collision_fluxes(n: &[f64], model: &CollisionModel) -> Vec<f64> {
    let mut out = vec![0.0; n.len()];
    for &(k, k1, fwd, bwd) in &model.pairs {
        let flux = fwd * n[k1] * (1.0 - n[k]) - bwd * (1.0 - n[k1]) * n[k];
        out[k] += flux;
        out[k1] -= flux;
    }
    out
}

fn check_occupations(n: &[f64]) -> Result<()> {
    for (index, &value) in n.iter().enumerate() {
        if !(-OCCUPATION_SLACK..=1.0 + OCCUPATION_SLACK).contains(&value) {
            return Err(Error::OccupationOutOfRange { index, value });
        }
    }
    Ok(())
}

/// [`collision_rhs_flat`] on a lattice field.
pub fn collision_rhs(n: &DistributionField, model: &CollisionModel) -> Result<DistributionField> {
    let flat: Vec<f64> = n.values().iter().copied().collect();
    let out = collision_rhs_flat(&flat, model)?;
    let values = Array2::from_shape_vec(n.values().dim(), out).expect("same length");
    LatticeField::new(*n.spec(), values)
}

fn check_profile(spec: &GridSpec, profile: &PotentialProfile) -> Result<()> {
    if profile.e.len() != spec.num_cells() {
        return Err(Error::ShapeMismatch {
            expected: format!("profile over {} cells", spec.num_cells()),
            found: format!("{} cells", profile.e.len()),
        });
    }
    Ok(())
}

/// Streaming term `-K·(f(m+1) - f(m-1))/2d`, the `K₁ = K` part of
/// `-Σ_K1 (K·D_{-R} - K₁·D_R) n`.
pub fn streaming_term(n: &DistributionField) -> DistributionField {
    let spec = *n.spec();
    let mut out = centered_difference(n);
    for (j, mut col) in out.values_mut().columns_mut().into_iter().enumerate() {
        let k = spec.k_of_column(j);
        col.mapv_inplace(|v| -k * v);
    }
    out
}

/// Right-hand side of the difference Boltzmann equation:
/// streaming + drift + collisions.
pub fn dbe_rhs(
    n: &DistributionField,
    profile: &PotentialProfile,
    model: Option<&CollisionModel>,
) -> Result<DistributionField> {
    check_profile(n.spec(), profile)?;
    let mut out = streaming_term(n);
    let drift = drift_apply(n, &profile.e)?;
    *out.values_mut() += drift.values();
    if let Some(model) = model {
        let coll = collision_rhs(n, model)?;
        *out.values_mut() += coll.values();
    }
    Ok(out)
}

/// Right-hand side of the differential Boltzmann equation,
/// `-K·∂_R n - E·∂_K n + collisions`, with both gradients spectral.
pub fn classical_rhs(
    n: &DistributionField,
    profile: &PotentialProfile,
    model: Option<&CollisionModel>,
) -> Result<DistributionField> {
    let spec = *n.spec();
    check_profile(&spec, profile)?;
    let dx = spectral_derivative_x(n)?;
    let dk = spectral_derivative_k(n)?;
    let mut out = LatticeField::zeros(spec);
    for m in 0..spec.num_cells() {
        let e = profile.e[m];
        for j in 0..spec.num_momenta() {
            out.values_mut()[[m, j]] = -spec.k_of_column(j) * dx.values()[[m, j]] - e * dk.values()[[m, j]];
        }
    }
    if let Some(model) = model {
        let coll = collision_rhs(n, model)?;
        *out.values_mut() += coll.values();
    }
    Ok(out)
}

/// Expectation values `P_{kk'} = ⟨a_k⁺ a_k'⟩` over flat wavelet indices,
/// in the cell-centred gauge (basis phases `e^{iK(x-X)}`).
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationMatrix {
    spec: GridSpec,
    entries: Array2<Complex64>,
}

impl PolarizationMatrix {
    pub fn new(spec: GridSpec, entries: Array2<Complex64>) -> Result<Self> {
        let n = spec.num_states();
        if entries.dim() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: format!("({n}, {n})"),
                found: format!("{:?}", entries.dim()),
            });
        }
        Ok(Self { spec, entries })
    }

    /// Diagonal matrix carrying the occupations of `n`.
    pub fn from_distribution(n: &DistributionField) -> Self {
        let spec = *n.spec();
        let mut entries = Array2::zeros((spec.num_states(), spec.num_states()));
        for (f, &v) in n.values().iter().enumerate() {
            entries[[f, f]] = Complex64::new(v, 0.0);
        }
        Self { spec, entries }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<Complex64> {
        self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diag().iter().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.entries)
    }

    /// Diagonal as an occupation field.
    pub fn diagonal(&self) -> DistributionField {
        let d: Vec<f64> = self.entries.diag().iter().map(|z| z.re).collect();
        let values = Array2::from_shape_vec((self.spec.num_cells(), self.spec.num_momenta()), d)
            .expect("diagonal length is num_states");
        LatticeField::new(self.spec, values).expect("shape matches spec")
    }
}

/// `max |A - A†|`.
pub fn hermiticity_defect(a: &Array2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Mean-field one-particle Hamiltonian in the wavelet basis, stored as the
/// sparse rows of `hᵀ`.
///
/// `h = V(R) + K²/2 - iK·∂_R - ½∂²_R + iE(R)·D_{K_b - K_a}`, where
/// `∂_R = D_{-R} - D_R` (centred), `∂²_R = D²_R`, both diagonal in `K`, and
/// `D` is the periodic momentum stencil coupling momenta inside a cell.
#[derive(Debug, Clone)]
pub struct MeanFieldHamiltonian {
    n_states: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl MeanFieldHamiltonian {
    pub fn new(spec: &GridSpec, profile: &PotentialProfile) -> Result<Self> {
        check_profile(spec, profile)?;
        let n_states = spec.num_states();
        let nk = spec.num_momenta();
        let mm = spec.num_cells();
        let d = spec.d();
        let stencil = DriftStencil::for_spec(spec);
        let c = stencil.coefficients();
        // D_{K_b - K_a} for ring offset o = n_a - n_b
        let d_of = |o: isize| -> f64 {
            let o = o.rem_euclid(nk as isize) as usize;
            let half = (nk - 1) / 2;
            if o == 0 {
                0.0
            } else if o <= half {
                -c[o - 1]
            } else {
                c[nk - o - 1]
            }
        };
        // h as dense rows of (col, value) with accumulation for M = 2 wrap
        let mut h: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n_states];
        let push = |row: &mut Vec<(usize, Complex64)>, col: usize, v: Complex64| {
            if let Some(slot) = row.iter_mut().find(|(c, _)| *c == col) {
                slot.1 += v;
            } else {
                row.push((col, v));
            }
        };
        for m in 0..mm {
            let e = profile.e[m];
            let up = (m + 1) % mm;
            let down = (m + mm - 1) % mm;
            for a in 0..nk {
                let k = spec.k_of_column(a);
                let row_idx = m * nk + a;
                let row = &mut h[row_idx];
                let diag = profile.v[m] + kinetic_energy(k) + 1.0 / (d * d);
                push(row, row_idx, Complex64::new(diag, 0.0));
                push(row, up * nk + a, Complex64::new(-0.5 / (d * d), -k / (2.0 * d)));
                push(row, down * nk + a, Complex64::new(-0.5 / (d * d), k / (2.0 * d)));
                if e != 0.0 {
                    for b in 0..nk {
                        if b != a {
                            let w = d_of(a as isize - b as isize);
                            push(row, m * nk + b, Complex64::new(0.0, e * w));
                        }
                    }
                }
            }
        }
        // transpose into rows of hᵀ
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n_states];
        for (r, entries) in h.into_iter().enumerate() {
            for (c, v) in entries {
                rows[c].push((r, v));
            }
        }
        for row in &mut rows {
            row.sort_by_key(|(c, _)| *c);
        }
        Ok(Self { n_states, rows })
    }

    /// Dense `h` (not transposed), mostly for tests.
    pub fn to_dense(&self) -> Array2<Complex64> {
        let mut h = Array2::zeros((self.n_states, self.n_states));
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                h[[c, r]] = v;
            }
        }
        h
    }

    /// Gershgorin bound on the spectral radius of `h`.
    pub fn gershgorin_bound(&self) -> f64 {
        let mut col_sums = vec![0.0; self.n_states];
        for row in &self.rows {
            for &(c, v) in row {
                col_sums[c] += v.norm();
            }
        }
        let row_max = self.rows.iter().map(|r| r.iter().map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max);
        row_max.max(col_sums.into_iter().fold(0.0, f64::max))
    }

    /// `i(hᵀP - Phᵀ)`.
    pub fn commutator_rhs(&self, p: &Array2<Complex64>) -> Array2<Complex64> {
        let n = self.n_states;
        let mut hp = Array2::<Complex64>::zeros((n, n));
        for (k, row) in self.rows.iter().enumerate() {
            let mut out_row = hp.row_mut(k);
            for &(a, v) in row {
                out_row.scaled_add(v, &p.row(a));
            }
        }
        let mut ph = Array2::<Complex64>::zeros((n, n));
        for k in 0..n {
            let p_row = p.row(k);
            let mut out_row = ph.row_mut(k);
            for (a, row) in self.rows.iter().enumerate() {
                let pka = p_row[a];
                if pka == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for &(c, v) in row {
                    out_row[c] += pka * v;
                }
            }
        }
        let i = Complex64::new(0.0, 1.0);
        let mut out = hp;
        out.zip_mut_with(&ph, |a, &b| *a = i * (*a - b));
        out
    }
}

/// `dP/dt` from the mean-field Hamiltonian. Rejects `P` whose Hermiticity
/// defect exceeds 1e-10.
pub fn meanfield_rhs(p: &PolarizationMatrix, profile: &PotentialProfile) -> Result<Array2<Complex64>> {
    let defect = p.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect, tolerance: HERMITIAN_TOL });
    }
    let h = MeanFieldHamiltonian::new(&p.spec, profile)?;
    Ok(h.commutator_rhs(&p.entries))
}

pub(crate) fn ensure_grid(field: &DistributionField, spec: &GridSpec) -> Result<()> {
    ensure_same_grid(field, spec)
}
