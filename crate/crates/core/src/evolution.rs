//! Explicit time integration of the kinetic equations with conservation
//! diagnostics.

use ndarray::Array2;
use num_complex::Complex64;

use crate::difference_ops::{DriftStencil, LatticeField};
use crate::error::{Error, Result};
use crate::kinetic_terms::{
    self, ensure_grid, CollisionModel, DistributionField, MeanFieldHamiltonian, PolarizationMatrix, PotentialProfile,
    OCCUPATION_SLACK,
};

/// Occupations may leave `[0, 1]` by this much before a run aborts.
pub const POSITIVITY_SLACK: f64 = 1e-9;

/// A polarization run aborts once `max |P - P†|` exceeds this.
pub const HERMITICITY_ABORT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Rk4,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(format!("unknown scheme '{other}' (expected euler or rk4)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub snapshot_every: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64, scheme: Scheme, snapshot_every: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidArgument(format!("t_end must be > 0, got {t_end}")));
        }
        if snapshot_every == 0 {
            return Err(Error::InvalidArgument("snapshot_every must be >= 1".into()));
        }
        Ok(Self { dt, t_end, scheme, snapshot_every })
    }

    /// Number of steps to reach `t_end`; the last one may be shorter.
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

/// Upper bounds on the time step, each with the term it protects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtLimits {
    /// `0.5 / max_k Σ_k1 (W(k,k1) + W(k1,k))`.
    pub collision: Option<f64>,
    /// `0.5·d / K_max`.
    pub transport: Option<f64>,
    /// `0.5 / (max|E|·Σ_j 2|c_j|)`.
    pub drift: Option<f64>,
    /// `1 / (2·ρ(h))` with `ρ` bounded by Gershgorin, polarization runs only.
    pub spectral: Option<f64>,
}

impl DtLimits {
    pub fn none() -> Self {
        Self { collision: None, transport: None, drift: None, spectral: None }
    }

    pub fn for_distribution(
        spec: &crate::GridSpec,
        profile: &PotentialProfile,
        model: Option<&CollisionModel>,
    ) -> Self {
        let collision = model.and_then(|m| {
            let r = m.max_total_rate();
            (r > 0.0).then(|| 0.5 / r)
        });
        let transport = Some(0.5 * spec.d() / spec.k_max());
        let e = profile.max_abs_e();
        let drift = (e > 0.0).then(|| 0.5 / (e * DriftStencil::for_spec(spec).abs_row_sum()));
        Self { collision, transport, drift, spectral: None }
    }

    pub fn for_polarization(spec: &crate::GridSpec, h: &MeanFieldHamiltonian) -> Self {
        let rho = h.gershgorin_bound();
        Self {
            collision: None,
            transport: Some(0.5 * spec.d() / spec.k_max()),
            drift: None,
            spectral: (rho > 0.0).then(|| 0.5 / rho),
        }
    }

    /// The tightest bound and its name.
    pub fn bound(&self) -> (f64, &'static str) {
        [
            (self.collision, "collision"),
            (self.transport, "transport"),
            (self.drift, "drift"),
            (self.spectral, "spectral"),
        ]
        .into_iter()
        .filter_map(|(b, name)| b.map(|b| (b, name)))
        .fold((f64::INFINITY, "none"), |acc, x| if x.0 < acc.0 { x } else { acc })
    }

    pub fn check(&self, dt: f64) -> Result<()> {
        let (bound, reason) = self.bound();
        if dt > bound {
            return Err(Error::TimeStepTooLarge { dt, bound, reason });
        }
        Ok(())
    }
}

/// State vectors the integrators can advance.
pub trait OdeState: Clone {
    /// `self += a·x`.
    fn axpy(&mut self, a: f64, x: &Self);
}

impl OdeState for f64 {
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl OdeState for Vec<f64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }
}

impl OdeState for Array2<f64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        self.scaled_add(a, x);
    }
}

impl OdeState for Array2<Complex64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        self.zip_mut_with(x, |s, &v| *s += v * a);
    }
}

impl OdeState for LatticeField<f64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        self.values_mut().scaled_add(a, x.values());
    }
}

/// One step of size `h` without bound checks.
pub fn advance<S, F>(state: &S, mut rhs: F, scheme: Scheme, h: f64) -> Result<S>
where
    S: OdeState,
    F: FnMut(&S) -> Result<S>,
{
    match scheme {
        Scheme::Euler => {
            let k1 = rhs(state)?;
            let mut next = state.clone();
            next.axpy(h, &k1);
            Ok(next)
        }
        Scheme::Rk4 => {
            let k1 = rhs(state)?;
            let mut y = state.clone();
            y.axpy(0.5 * h, &k1);
            let k2 = rhs(&y)?;
            let mut y = state.clone();
            y.axpy(0.5 * h, &k2);
            let k3 = rhs(&y)?;
            let mut y = state.clone();
            y.axpy(h, &k3);
            let k4 = rhs(&y)?;
            let mut next = state.clone();
            next.axpy(h / 6.0, &k1);
            next.axpy(h / 3.0, &k2);
            next.axpy(h / 3.0, &k3);
            next.axpy(h / 6.0, &k4);
            Ok(next)
        }
    }
}

/// One Euler or RK4 step of size `config.dt`, after checking `dt` against
/// `limits`.
pub fn step<S, F>(state: &S, rhs: F, config: &IntegratorConfig, limits: &DtLimits) -> Result<S>
where
    S: OdeState,
    F: FnMut(&S) -> Result<S>,
{
    limits.check(config.dt)?;
    advance(state, rhs, config.scheme, config.dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub total_number: f64,
    pub hermiticity_defect: f64,
    pub min_n: f64,
    pub max_n: f64,
    pub entropy: f64,
}

/// `-Σ [n ln n + (1-n) ln(1-n)]` with `0·ln 0 = 0`; values outside `(0,1)`
/// contribute nothing.
pub fn entropy<'a>(values: impl IntoIterator<Item = &'a f64>) -> f64 {
    values.into_iter().map(|&n| if n > 0.0 && n < 1.0 { -(n * n.ln() + (1.0 - n) * (1.0 - n).ln()) } else { 0.0 }).sum()
}

impl Diagnostics {
    pub fn of_distribution(n: &DistributionField) -> Self {
        let v = n.values();
        Self {
            total_number: v.iter().sum(),
            hermiticity_defect: 0.0,
            min_n: v.iter().cloned().fold(f64::INFINITY, f64::min),
            max_n: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            entropy: entropy(v.iter()),
        }
    }

    pub fn of_polarization(p: &PolarizationMatrix) -> Self {
        let diag: Vec<f64> = p.entries().diag().iter().map(|z| z.re).collect();
        Self {
            total_number: p.trace().re,
            hermiticity_defect: p.hermiticity_defect(),
            min_n: diag.iter().cloned().fold(f64::INFINITY, f64::min),
            max_n: diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            entropy: entropy(diag.iter()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot<T> {
    pub t: f64,
    pub state: T,
    pub diagnostics: Diagnostics,
}

fn step_time(config: &IntegratorConfig, i: usize) -> f64 {
    (i as f64 * config.dt).min(config.t_end)
}

fn check_positivity(n: &DistributionField, step: usize, t: f64) -> Result<()> {
    let spec = *n.spec();
    for ((m, j), &value) in n.values().indexed_iter() {
        if !(-POSITIVITY_SLACK..=1.0 + POSITIVITY_SLACK).contains(&value) {
            return Err(Error::PositivityViolation { step, t, m, n: spec.n_of_column(j), value });
        }
    }
    Ok(())
}

/// Integrate the difference Boltzmann equation from `n0`, recording a
/// snapshot at `t = 0`, every `snapshot_every` steps and at `t_end`.
pub fn run_distribution(
    n0: &DistributionField,
    profile: &PotentialProfile,
    model: Option<&CollisionModel>,
    config: &IntegratorConfig,
) -> Result<Vec<Snapshot<DistributionField>>> {
    let spec = *n0.spec();
    let limits = DtLimits::for_distribution(&spec, profile, model);
    limits.check(config.dt)?;
    check_positivity(n0, 0, 0.0)?;
    if let Some(model) = model {
        if model.num_states() != spec.num_states() {
            return Err(Error::ShapeMismatch {
                expected: format!("collision model over {} states", spec.num_states()),
                found: format!("{} states", model.num_states()),
            });
        }
    }
    let rhs = |n: &DistributionField| -> Result<DistributionField> {
        ensure_grid(n, &spec)?;
        let mut out = kinetic_terms::dbe_rhs(n, profile, None)?;
        if let Some(model) = model {
            // stage values may leave [0, 1] slightly; the full-step check
            // below is the contract
            let flat: Vec<f64> = n.values().iter().copied().collect();
            for (o, c) in out.values_mut().iter_mut().zip(kinetic_terms::collision_fluxes(&flat, model)) {
                *o += c;
            }
        }
        Ok(out)
    };
    let mut snapshots = vec![Snapshot { t: 0.0, state: n0.clone(), diagnostics: Diagnostics::of_distribution(n0) }];
    let steps = config.num_steps();
    let mut state = n0.clone();
    for i in 1..=steps {
        let h = step_time(config, i) - step_time(config, i - 1);
        state = advance(&state, rhs, config.scheme, h)?;
        let t = step_time(config, i);
        check_positivity(&state, i, t)?;
        if i % config.snapshot_every == 0 || i == steps {
            snapshots.push(Snapshot { t, state: state.clone(), diagnostics: Diagnostics::of_distribution(&state) });
        }
    }
    Ok(snapshots)
}

/// Integrate the mean-field polarization-matrix equation (no collisions).
pub fn run_polarization(
    p0: &PolarizationMatrix,
    profile: &PotentialProfile,
    config: &IntegratorConfig,
) -> Result<Vec<Snapshot<PolarizationMatrix>>> {
    let spec = *p0.spec();
    let defect = p0.hermiticity_defect();
    if defect > kinetic_terms::HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect, tolerance: kinetic_terms::HERMITIAN_TOL });
    }
    for (index, z) in p0.entries().diag().iter().enumerate() {
        if !(z.re >= -OCCUPATION_SLACK && z.re <= 1.0 + OCCUPATION_SLACK) {
            return Err(Error::OccupationOutOfRange { index, value: z.re });
        }
    }
    let h = MeanFieldHamiltonian::new(&spec, profile)?;
    let limits = DtLimits::for_polarization(&spec, &h);
    limits.check(config.dt)?;
    let rhs = |p: &Array2<Complex64>| -> Result<Array2<Complex64>> { Ok(h.commutator_rhs(p)) };
    let mut snapshots = vec![Snapshot { t: 0.0, state: p0.clone(), diagnostics: Diagnostics::of_polarization(p0) }];
    let steps = config.num_steps();
    let mut state = p0.entries().clone();
    for i in 1..=steps {
        let h_step = step_time(config, i) - step_time(config, i - 1);
        state = advance(&state, rhs, config.scheme, h_step)?;
        let t = step_time(config, i);
        let defect = kinetic_terms::hermiticity_defect(&state);
        if defect > HERMITICITY_ABORT {
            return Err(Error::HermiticityLost { step: i, defect });
        }
        if i % config.snapshot_every == 0 || i == steps {
            let p = PolarizationMatrix::new(spec, state.clone())?;
            let diagnostics = Diagnostics::of_polarization(&p);
            snapshots.push(Snapshot { t, state: p, diagnostics });
        }
    }
    Ok(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GridSpec;

    #[test]
    fn zero_rhs_leaves_state() {
        let cfg = IntegratorConfig::new(0.1, 1.0, Scheme::Rk4, 1).unwrap();
        let s = vec![0.3, 0.7];
        let out = step(&s, |x: &Vec<f64>| Ok(vec![0.0; x.len()]), &cfg, &DtLimits::none()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn rk4_exponential_decay() {
        let cfg = IntegratorConfig::new(0.1, 1.0, Scheme::Rk4, 1).unwrap();
        let out = step(&1.0f64, |x: &f64| Ok(-*x), &cfg, &DtLimits::none()).unwrap();
        // one RK4 step reproduces the Taylor polynomial of e^{-h} to 4th order
        let h = 0.1f64;
        let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((out - taylor).abs() < 1e-15);
        let local = (out - (-h).exp()).abs();
        assert!(local <= h.powi(5) / 120.0 * 1.001, "{local}");
    }

    #[test]
    fn euler_step() {
        let cfg = IntegratorConfig::new(0.1, 1.0, Scheme::Euler, 1).unwrap();
        let out = step(&1.0f64, |x: &f64| Ok(-*x), &cfg, &DtLimits::none()).unwrap();
        assert!((out - 0.9).abs() < 1e-15);
    }

    #[test]
    fn dt_bound_violation_reports_bound() {
        let cfg = IntegratorConfig::new(0.5, 1.0, Scheme::Rk4, 1).unwrap();
        let limits = DtLimits { collision: Some(0.25), ..DtLimits::none() };
        let err = step(&1.0f64, |x: &f64| Ok(-*x), &cfg, &limits).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("0.25") && msg.contains("collision"), "{msg}");
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 1.0, Scheme::Rk4, 1).is_err());
        assert!(IntegratorConfig::new(0.1, -1.0, Scheme::Rk4, 1).is_err());
        assert!(IntegratorConfig::new(0.1, 1.0, Scheme::Rk4, 0).is_err());
        assert_eq!(IntegratorConfig::new(0.1, 1.0, Scheme::Rk4, 1).unwrap().num_steps(), 10);
        assert_eq!(IntegratorConfig::new(0.3, 1.0, Scheme::Rk4, 1).unwrap().num_steps(), 4);
        assert_eq!("rk4".parse::<Scheme>().unwrap(), Scheme::Rk4);
        assert!("rk5".parse::<Scheme>().is_err());
    }

    #[test]
    fn entropy_edges() {
        assert_eq!(entropy(&[0.0, 1.0]), 0.0);
        assert!((entropy(&[0.5]) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn uniform_state_is_fixed_point() {
        let s = GridSpec::new(1.0, 4, 2).unwrap();
        let n0 = LatticeField::from_fn(s, |_, _| 0.4);
        let cfg = IntegratorConfig::new(0.01, 0.1, Scheme::Rk4, 2).unwrap();
        let traj = run_distribution(&n0, &PotentialProfile::zero(&s), None, &cfg).unwrap();
        assert_eq!(traj.len(), 6);
        for snap in &traj {
            assert_eq!(snap.state, n0);
        }
        assert_eq!(traj.last().unwrap().t, 0.1);
    }

    #[test]
    fn positivity_abort_names_step() {
        let s = GridSpec::new(1.0, 4, 1).unwrap();
        // a sharp step in x at K ≠ 0 overshoots under centred streaming
        let n0 = LatticeField::from_fn(s, |m, n| if m < 2 && n == 1 { 1.0 } else { 0.0 });
        let cfg = IntegratorConfig::new(0.01, 1.0, Scheme::Rk4, 1).unwrap();
        let err = run_distribution(&n0, &PotentialProfile::zero(&s), None, &cfg).unwrap_err();
        assert!(matches!(err, Error::PositivityViolation { step: 1, .. }), "{err}");
    }
}
