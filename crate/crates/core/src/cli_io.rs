//! Scenario configs, CSV persistence and the batch commands behind the CLI.
//!
//! A scenario config is TOML restricted to one level of sections:
//!
//! ```toml
//! [grid]
//! d = 1.0
//! num_cells = 64
//! n_max = 8
//!
//! [potential]        # optional, default kind = "zero"
//! kind = "uniform_field"
//! e0 = 0.05
//!
//! [initial]
//! kind = "gaussian_rk"
//! center_m = 16.0
//! center_n = 1.0
//! sigma_r = 4.0
//! sigma_k = 0.0
//! amplitude = 0.5
//!
//! [collision]        # optional, default kind = "none"
//! kind = "static_screened_coulomb"
//! epsilon = 12.9
//! temperature = 0.5
//! eta = 0.5
//!
//! [integrator]       # optional, defaults below
//! dt = 0.01
//! t_end = 1.0
//! scheme = "rk4"
//! snapshot_every = 10
//!
//! [output]           # optional
//! dir = "output"
//! ```
//!
//! | key | kinds | constraint | default |
//! |---|---|---|---|
//! | `grid.d` | | `> 0` | required |
//! | `grid.num_cells` | | even, `>= 2` | required |
//! | `grid.n_max` | | `>= 1` | required |
//! | `potential.e0` | `uniform_field` | finite | required |
//! | `potential.k_spring` | `harmonic` | finite | required |
//! | `potential.file` | `custom_table` | CSV `m,v` | required |
//! | `initial.n0` | `uniform` | `[0, 1]` | required |
//! | `initial.center_m`, `center_n` | `gaussian_rk` | finite, lattice units | required |
//! | `initial.sigma_r` | `gaussian_rk` | `> 0` | required |
//! | `initial.sigma_k` | `gaussian_rk` | `>= 0`, `0` = single column | required |
//! | `initial.amplitude` | `gaussian_rk` | `(0, 1]` | required |
//! | `initial.background` | `gaussian_rk` | `[0, 1)`, sum with amplitude `<= 1` | `0` |
//! | `initial.mu`, `temperature` | `fermi_dirac` | finite, `T > 0` | required |
//! | `collision.file` | `user_table` | CSV `k,k1,rate` | required |
//! | `collision.temperature` | `user_table`, `static_screened_coulomb` | `> 0` | required |
//! | `collision.detailed_balance` | `user_table` | bool | `true` |
//! | `collision.epsilon`, `eta` | `static_screened_coulomb` | `> 0` | required |
//! | `collision.q_max` | `static_screened_coulomb` | `>= 1` | `4·n_max` |
//! | `integrator.dt`, `t_end` | | `> 0` | `0.01`, `1.0` |
//! | `integrator.scheme` | | `euler`, `rk4` | `rk4` |
//! | `integrator.snapshot_every` | | `>= 1` | `10` |
//! | `output.dir` | | path | `output` |
//!
//! Table files are resolved relative to the config file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use toml::{Spanned, Value};

use crate::difference_ops::LatticeField;
use crate::error::{ConfigIssue, Error, Result};
use crate::evolution::{self, DtLimits, IntegratorConfig, Scheme};
use crate::grid_basis::{self, GridSpec, WaveletIndex};
use crate::kinetic_terms::{self, CollisionModel, DistributionField, PotentialProfile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub d: f64,
    pub num_cells: usize,
    pub n_max: usize,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.d, self.num_cells, self.n_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialConfig {
    Zero,
    UniformField { e0: f64 },
    Harmonic { k_spring: f64 },
    CustomTable { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialConfig {
    Uniform {
        n0: f64,
    },
    /// `background + amplitude·exp(-(x-x_c)²/2σ_r²)·exp(-(K-K_c)²/2σ_k²)`
    /// with `x_c`, `K_c` at the fractional lattice indices `center_m`,
    /// `center_n`, periodic in both directions.
    GaussianRk {
        center_m: f64,
        center_n: f64,
        sigma_r: f64,
        sigma_k: f64,
        amplitude: f64,
        background: f64,
    },
    FermiDirac {
        mu: f64,
        temperature: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CollisionConfig {
    None,
    UserTable { file: PathBuf, temperature: f64, detailed_balance: bool },
    StaticScreenedCoulomb { epsilon: f64, temperature: f64, eta: f64, q_max: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    pub collision: CollisionConfig,
    pub integrator: IntegratorConfig,
    pub output_dir: PathBuf,
}

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_END: f64 = 1.0;
pub const DEFAULT_SNAPSHOT_EVERY: usize = 10;
pub const DEFAULT_OUTPUT_DIR: &str = "output";

const SECTIONS: [&str; 6] = ["grid", "potential", "initial", "collision", "integrator", "output"];

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

type RawSection = BTreeMap<Spanned<String>, Spanned<Value>>;

/// One section's entries plus bookkeeping of which keys were read.
struct Section {
    name: &'static str,
    header_line: usize,
    entries: BTreeMap<String, (usize, Value)>,
    used: BTreeSet<String>,
}

impl Section {
    fn new(name: &'static str, text: &str, header_line: usize, raw: Option<RawSection>) -> Self {
        let entries = raw
            .unwrap_or_default()
            .into_iter()
            .map(|(k, v)| {
                let line = line_of(text, v.span().start);
                (k.into_inner(), (line, v.into_inner()))
            })
            .collect();
        Self { name, header_line, entries, used: BTreeSet::new() }
    }

    fn key(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn issue(&self, issues: &mut Vec<ConfigIssue>, line: usize, key: &str, message: String) {
        issues.push(ConfigIssue { line, key: self.key(key), message });
    }

    fn take(&mut self, key: &str) -> Option<(usize, Value)> {
        self.used.insert(key.to_string());
        self.entries.get(key).cloned()
    }

    fn missing(&self, issues: &mut Vec<ConfigIssue>, key: &str) {
        self.issue(issues, self.header_line, key, "missing required key".into());
    }

    fn real(
        &mut self,
        issues: &mut Vec<ConfigIssue>,
        key: &str,
        default: Option<f64>,
        check: impl Fn(f64) -> bool,
        constraint: &str,
    ) -> Option<f64> {
        let (line, value) = match self.take(key) {
            Some(entry) => entry,
            None => {
                if default.is_none() {
                    self.missing(issues, key);
                }
                return default;
            }
        };
        let x = match value {
            Value::Float(x) => x,
            Value::Integer(i) => i as f64,
            other => {
                self.issue(issues, line, key, format!("expected a number, got {}", other.type_str()));
                return None;
            }
        };
        if !(x.is_finite() && check(x)) {
            self.issue(issues, line, key, format!("must satisfy {key} {constraint}, got {x}"));
            return None;
        }
        Some(x)
    }

    fn integer(
        &mut self,
        issues: &mut Vec<ConfigIssue>,
        key: &str,
        default: Option<usize>,
        check: impl Fn(i64) -> bool,
        constraint: &str,
    ) -> Option<usize> {
        let (line, value) = match self.take(key) {
            Some(entry) => entry,
            None => {
                if default.is_none() {
                    self.missing(issues, key);
                }
                return default;
            }
        };
        let Value::Integer(i) = value else {
            self.issue(issues, line, key, format!("expected an integer, got {}", value.type_str()));
            return None;
        };
        if i < 0 || !check(i) {
            self.issue(issues, line, key, format!("must satisfy {key} {constraint}, got {i}"));
            return None;
        }
        Some(i as usize)
    }

    fn string(&mut self, issues: &mut Vec<ConfigIssue>, key: &str, default: Option<&str>) -> Option<(usize, String)> {
        match self.take(key) {
            Some((line, Value::String(s))) => Some((line, s)),
            Some((line, other)) => {
                self.issue(issues, line, key, format!("expected a string, got {}", other.type_str()));
                None
            }
            None => {
                if default.is_none() {
                    self.missing(issues, key);
                }
                default.map(|s| (self.header_line, s.to_string()))
            }
        }
    }

    fn boolean(&mut self, issues: &mut Vec<ConfigIssue>, key: &str, default: bool) -> Option<bool> {
        match self.take(key) {
            Some((_, Value::Boolean(b))) => Some(b),
            Some((line, other)) => {
                self.issue(issues, line, key, format!("expected a boolean, got {}", other.type_str()));
                None
            }
            None => Some(default),
        }
    }

    fn kind(&mut self, issues: &mut Vec<ConfigIssue>, default: Option<&str>, allowed: &[&str]) -> Option<String> {
        let (line, kind) = self.string(issues, "kind", default)?;
        if !allowed.contains(&kind.as_str()) {
            self.issue(issues, line, "kind", format!("unknown kind '{kind}' (expected one of {})", allowed.join(", ")));
            return None;
        }
        Some(kind)
    }

    fn finish(self, issues: &mut Vec<ConfigIssue>, context: &str) {
        for (key, (line, _)) in &self.entries {
            if !self.used.contains(key) {
                let message =
                    if context.is_empty() { "unknown key".to_string() } else { format!("unknown key for {context}") };
                issues.push(ConfigIssue { line: *line, key: self.key(key), message });
            }
        }
    }
}

fn positive(x: f64) -> bool {
    x > 0.0
}

fn any_real(_: f64) -> bool {
    true
}

/// Parse and validate a scenario config, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let raw: BTreeMap<Spanned<String>, Spanned<RawSection>> = match toml::from_str(text) {
        Ok(raw) => raw,
        Err(e) => {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            let message = e.message().to_string();
            return Err(Error::Config(vec![ConfigIssue { line, key: "syntax".into(), message }]));
        }
    };
    let mut issues = Vec::new();
    let mut sections: BTreeMap<String, (usize, RawSection)> = BTreeMap::new();
    for (name, body) in raw {
        let line = line_of(text, name.span().start);
        let name = name.into_inner();
        if SECTIONS.contains(&name.as_str()) {
            sections.insert(name, (line, body.into_inner()));
        } else {
            issues.push(ConfigIssue { line, key: name, message: "unknown section".into() });
        }
    }
    let mut section = |name: &'static str| {
        let (line, body) = match sections.remove(name) {
            Some((line, body)) => (line, Some(body)),
            None => (0, None),
        };
        Section::new(name, text, line, body)
    };

    let mut grid_s = section("grid");
    if grid_s.entries.is_empty() && grid_s.header_line == 0 {
        issues.push(ConfigIssue { line: 0, key: "grid".into(), message: "missing required section".into() });
    }
    let d = grid_s.real(&mut issues, "d", None, positive, "> 0");
    let num_cells = grid_s.integer(&mut issues, "num_cells", None, |m| m >= 2 && m % 2 == 0, "even and >= 2");
    let n_max = grid_s.integer(&mut issues, "n_max", None, |n| n >= 1, ">= 1");
    grid_s.finish(&mut issues, "");

    let mut pot_s = section("potential");
    let potential = match pot_s.kind(&mut issues, Some("zero"), &["zero", "uniform_field", "harmonic", "custom_table"])
    {
        Some(kind) => {
            let p = match kind.as_str() {
                "zero" => Some(PotentialConfig::Zero),
                "uniform_field" => pot_s
                    .real(&mut issues, "e0", None, any_real, "finite")
                    .map(|e0| PotentialConfig::UniformField { e0 }),
                "harmonic" => pot_s
                    .real(&mut issues, "k_spring", None, any_real, "finite")
                    .map(|k_spring| PotentialConfig::Harmonic { k_spring }),
                _ => pot_s
                    .string(&mut issues, "file", None)
                    .map(|(_, f)| PotentialConfig::CustomTable { file: f.into() }),
            };
            pot_s.finish(&mut issues, &format!("kind '{kind}'"));
            p
        }
        None => None,
    };

    let mut init_s = section("initial");
    if init_s.header_line == 0 {
        issues.push(ConfigIssue { line: 0, key: "initial".into(), message: "missing required section".into() });
    }
    let initial = if init_s.header_line == 0 {
        None
    } else {
        match init_s.kind(&mut issues, None, &["uniform", "gaussian_rk", "fermi_dirac"]) {
            Some(kind) => {
                let i = match kind.as_str() {
                    "uniform" => init_s
                        .real(&mut issues, "n0", None, |x| (0.0..=1.0).contains(&x), "in [0, 1]")
                        .map(|n0| InitialConfig::Uniform { n0 }),
                    "gaussian_rk" => {
                        let center_m = init_s.real(&mut issues, "center_m", None, any_real, "finite");
                        let center_n = init_s.real(&mut issues, "center_n", None, any_real, "finite");
                        let sigma_r = init_s.real(&mut issues, "sigma_r", None, positive, "> 0");
                        let sigma_k = init_s.real(&mut issues, "sigma_k", None, |x| x >= 0.0, ">= 0");
                        let amplitude =
                            init_s.real(&mut issues, "amplitude", None, |x| x > 0.0 && x <= 1.0, "in (0, 1]");
                        let background =
                            init_s.real(&mut issues, "background", Some(0.0), |x| (0.0..1.0).contains(&x), "in [0, 1)");
                        match (center_m, center_n, sigma_r, sigma_k, amplitude, background) {
                            (
                                Some(center_m),
                                Some(center_n),
                                Some(sigma_r),
                                Some(sigma_k),
                                Some(amplitude),
                                Some(background),
                            ) => {
                                if amplitude + background > 1.0 {
                                    let line =
                                        init_s.entries.get("amplitude").map(|e| e.0).unwrap_or(init_s.header_line);
                                    init_s.issue(
                                        &mut issues,
                                        line,
                                        "amplitude",
                                        format!(
                                            "must satisfy amplitude + background <= 1, got {}",
                                            amplitude + background
                                        ),
                                    );
                                    None
                                } else {
                                    Some(InitialConfig::GaussianRk {
                                        center_m,
                                        center_n,
                                        sigma_r,
                                        sigma_k,
                                        amplitude,
                                        background,
                                    })
                                }
                            }
                            _ => None,
                        }
                    }
                    _ => {
                        let mu = init_s.real(&mut issues, "mu", None, any_real, "finite");
                        let temperature = init_s.real(&mut issues, "temperature", None, positive, "> 0");
                        mu.zip(temperature).map(|(mu, temperature)| InitialConfig::FermiDirac { mu, temperature })
                    }
                };
                init_s.finish(&mut issues, &format!("kind '{kind}'"));
                i
            }
            None => None,
        }
    };

    let mut coll_s = section("collision");
    let collision = match coll_s.kind(&mut issues, Some("none"), &["none", "user_table", "static_screened_coulomb"]) {
        Some(kind) => {
            let c = match kind.as_str() {
                "none" => Some(CollisionConfig::None),
                "user_table" => {
                    let file = coll_s.string(&mut issues, "file", None);
                    let temperature = coll_s.real(&mut issues, "temperature", None, positive, "> 0");
                    let detailed_balance = coll_s.boolean(&mut issues, "detailed_balance", true);
                    match (file, temperature, detailed_balance) {
                        (Some((_, file)), Some(temperature), Some(detailed_balance)) => {
                            Some(CollisionConfig::UserTable { file: file.into(), temperature, detailed_balance })
                        }
                        _ => None,
                    }
                }
                _ => {
                    let epsilon = coll_s.real(&mut issues, "epsilon", None, positive, "> 0");
                    let temperature = coll_s.real(&mut issues, "temperature", None, positive, "> 0");
                    let eta = coll_s.real(&mut issues, "eta", None, positive, "> 0");
                    let q_max = match coll_s.entries.contains_key("q_max") {
                        true => coll_s.integer(&mut issues, "q_max", None, |q| q >= 1, ">= 1").map(Some),
                        false => Some(None),
                    };
                    match (epsilon, temperature, eta, q_max) {
                        (Some(epsilon), Some(temperature), Some(eta), Some(q_max)) => {
                            Some(CollisionConfig::StaticScreenedCoulomb { epsilon, temperature, eta, q_max })
                        }
                        _ => None,
                    }
                }
            };
            coll_s.finish(&mut issues, &format!("kind '{kind}'"));
            c
        }
        None => None,
    };

    let mut int_s = section("integrator");
    let dt = int_s.real(&mut issues, "dt", Some(DEFAULT_DT), positive, "> 0");
    let t_end = int_s.real(&mut issues, "t_end", Some(DEFAULT_T_END), positive, "> 0");
    let scheme = match int_s.string(&mut issues, "scheme", Some("rk4")) {
        Some((line, s)) => match s.parse::<Scheme>() {
            Ok(scheme) => Some(scheme),
            Err(message) => {
                int_s.issue(&mut issues, line, "scheme", message);
                None
            }
        },
        None => None,
    };
    let snapshot_every = int_s.integer(&mut issues, "snapshot_every", Some(DEFAULT_SNAPSHOT_EVERY), |s| s >= 1, ">= 1");
    int_s.finish(&mut issues, "");

    let mut out_s = section("output");
    let output_dir = out_s.string(&mut issues, "dir", Some(DEFAULT_OUTPUT_DIR)).map(|(_, s)| PathBuf::from(s));
    out_s.finish(&mut issues, "");

    if !issues.is_empty() {
        issues.sort_by(|a, b| (a.line, &a.key).cmp(&(b.line, &b.key)));
        return Err(Error::Config(issues));
    }
    // every field is Some once no issue was recorded
    let integrator = IntegratorConfig::new(dt.unwrap(), t_end.unwrap(), scheme.unwrap(), snapshot_every.unwrap())?;
    Ok(ScenarioConfig {
        grid: GridConfig { d: d.unwrap(), num_cells: num_cells.unwrap(), n_max: n_max.unwrap() },
        potential: potential.unwrap(),
        initial: initial.unwrap(),
        collision: collision.unwrap(),
        integrator,
        output_dir: output_dir.unwrap(),
    })
}

fn toml_value(v: Value) -> String {
    v.to_string()
}

fn real(x: f64) -> String {
    toml_value(Value::Float(x))
}

fn path_str(p: &Path) -> String {
    toml_value(Value::String(p.to_string_lossy().into_owned()))
}

/// Sections and `(key, value)` pairs in canonical order, values as TOML
/// literals.
fn config_entries(config: &ScenarioConfig) -> Vec<(&'static str, Vec<(&'static str, String)>)> {
    let g = &config.grid;
    let grid = vec![("d", real(g.d)), ("num_cells", g.num_cells.to_string()), ("n_max", g.n_max.to_string())];
    let kind = |s: &str| toml_value(Value::String(s.into()));
    let potential = match &config.potential {
        PotentialConfig::Zero => vec![("kind", kind("zero"))],
        PotentialConfig::UniformField { e0 } => vec![("kind", kind("uniform_field")), ("e0", real(*e0))],
        PotentialConfig::Harmonic { k_spring } => vec![("kind", kind("harmonic")), ("k_spring", real(*k_spring))],
        PotentialConfig::CustomTable { file } => vec![("kind", kind("custom_table")), ("file", path_str(file))],
    };
    let initial = match &config.initial {
        InitialConfig::Uniform { n0 } => vec![("kind", kind("uniform")), ("n0", real(*n0))],
        InitialConfig::GaussianRk { center_m, center_n, sigma_r, sigma_k, amplitude, background } => vec![
            ("kind", kind("gaussian_rk")),
            ("center_m", real(*center_m)),
            ("center_n", real(*center_n)),
            ("sigma_r", real(*sigma_r)),
            ("sigma_k", real(*sigma_k)),
            ("amplitude", real(*amplitude)),
            ("background", real(*background)),
        ],
        InitialConfig::FermiDirac { mu, temperature } => {
            vec![("kind", kind("fermi_dirac")), ("mu", real(*mu)), ("temperature", real(*temperature))]
        }
    };
    let collision = match &config.collision {
        CollisionConfig::None => vec![("kind", kind("none"))],
        CollisionConfig::UserTable { file, temperature, detailed_balance } => vec![
            ("kind", kind("user_table")),
            ("file", path_str(file)),
            ("temperature", real(*temperature)),
            ("detailed_balance", detailed_balance.to_string()),
        ],
        CollisionConfig::StaticScreenedCoulomb { epsilon, temperature, eta, q_max } => {
            let mut v = vec![
                ("kind", kind("static_screened_coulomb")),
                ("epsilon", real(*epsilon)),
                ("temperature", real(*temperature)),
                ("eta", real(*eta)),
            ];
            if let Some(q) = q_max {
                v.push(("q_max", q.to_string()));
            }
            v
        }
    };
    let i = &config.integrator;
    let integrator = vec![
        ("dt", real(i.dt)),
        ("t_end", real(i.t_end)),
        ("scheme", kind(i.scheme.as_str())),
        ("snapshot_every", i.snapshot_every.to_string()),
    ];
    let output = vec![("dir", path_str(&config.output_dir))];
    vec![
        ("grid", grid),
        ("potential", potential),
        ("initial", initial),
        ("collision", collision),
        ("integrator", integrator),
        ("output", output),
    ]
}

/// Canonical config text; `parse_config(&serialize_config(c)) == c`.
pub fn serialize_config(config: &ScenarioConfig) -> String {
    let mut out = String::new();
    for (i, (section, entries)) in config_entries(config).into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "[{section}]");
        for (key, value) in entries {
            let _ = writeln!(out, "{key} = {value}");
        }
    }
    out
}

/// Periodic distance `a - b` folded into `[-period/2, period/2)`.
fn wrapped(a: f64, b: f64, period: f64) -> f64 {
    (a - b + 0.5 * period).rem_euclid(period) - 0.5 * period
}

/// Gaussian packet centred at the physical point `(x_c, k_c)`, periodic in
/// both directions. `sigma_k = 0` fills only the column nearest `k_c`.
pub fn gaussian_field(
    spec: &GridSpec,
    x_c: f64,
    k_c: f64,
    sigma_r: f64,
    sigma_k: f64,
    amplitude: f64,
    background: f64,
) -> DistributionField {
    let k_period = spec.num_momenta() as f64 * spec.delta_k();
    let n_c = (k_c / spec.delta_k()).round() as i64;
    LatticeField::from_fn(*spec, |m, n| {
        let dx = wrapped(spec.x(m), x_c, spec.length());
        let gx = (-dx * dx / (2.0 * sigma_r * sigma_r)).exp();
        let gk = if sigma_k == 0.0 {
            if n == n_c {
                1.0
            } else {
                0.0
            }
        } else {
            let dk = wrapped(spec.k(n), k_c, k_period);
            (-dk * dk / (2.0 * sigma_k * sigma_k)).exp()
        };
        background + amplitude * gx * gk
    })
}

impl InitialConfig {
    /// Physical packet centre for gaussian_rk, read on the grid `spec`.
    pub fn physical_center(&self, spec: &GridSpec) -> Option<(f64, f64)> {
        match self {
            InitialConfig::GaussianRk { center_m, center_n, .. } => {
                let x_c = (center_m - 0.5 * (spec.num_cells() as f64 - 1.0)) * spec.d();
                Some((x_c, center_n * spec.delta_k()))
            }
            _ => None,
        }
    }

    pub fn sample(&self, spec: &GridSpec) -> DistributionField {
        self.sample_at(spec, self.physical_center(spec))
    }

    fn sample_at(&self, spec: &GridSpec, center: Option<(f64, f64)>) -> DistributionField {
        match *self {
            InitialConfig::Uniform { n0 } => LatticeField::from_fn(*spec, |_, _| n0),
            InitialConfig::GaussianRk { sigma_r, sigma_k, amplitude, background, .. } => {
                let (x_c, k_c) = center.unwrap_or((0.0, 0.0));
                gaussian_field(spec, x_c, k_c, sigma_r, sigma_k, amplitude, background)
            }
            InitialConfig::FermiDirac { mu, temperature } => kinetic_terms::fermi_dirac_field(spec, mu, temperature),
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn read_table(path: &Path, columns: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let header = reader.headers().map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != columns {
        return Err(Error::InvalidArgument(format!(
            "{}: expected header {}, got {}",
            path.display(),
            columns.join(","),
            found.join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let values = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("{} line {line}: {e}", path.display())))?;
        rows.push((line, values));
    }
    Ok(rows)
}

fn table_index(path: &Path, line: usize, name: &str, x: f64, len: usize) -> Result<usize> {
    if x.fract() != 0.0 || x < 0.0 || x >= len as f64 {
        return Err(Error::InvalidArgument(format!(
            "{} line {line}: {name} = {x} must be an integer in [0, {len})",
            path.display()
        )));
    }
    Ok(x as usize)
}

fn resolve(base_dir: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        base_dir.join(file)
    }
}

impl PotentialConfig {
    pub fn build(&self, spec: &GridSpec, base_dir: &Path) -> Result<PotentialProfile> {
        match self {
            PotentialConfig::Zero => Ok(PotentialProfile::zero(spec)),
            PotentialConfig::UniformField { e0 } => Ok(PotentialProfile::uniform_field(spec, *e0)),
            PotentialConfig::Harmonic { k_spring } => Ok(PotentialProfile::harmonic(spec, *k_spring)),
            PotentialConfig::CustomTable { file } => {
                let path = resolve(base_dir, file);
                let mut v = vec![None; spec.num_cells()];
                for (line, row) in read_table(&path, &["m", "v"])? {
                    let m = table_index(&path, line, "m", row[0], spec.num_cells())?;
                    v[m] = Some(row[1]);
                }
                let v = v
                    .into_iter()
                    .enumerate()
                    .map(|(m, x)| {
                        x.ok_or_else(|| {
                            Error::InvalidArgument(format!("{}: no potential value for cell {m}", path.display()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                PotentialProfile::from_potential(spec, v)
            }
        }
    }
}

impl CollisionConfig {
    pub fn build(&self, spec: &GridSpec, base_dir: &Path) -> Result<Option<CollisionModel>> {
        match self {
            CollisionConfig::None => Ok(None),
            CollisionConfig::UserTable { file, temperature, detailed_balance } => {
                let path = resolve(base_dir, file);
                let n = spec.num_states();
                let mut rates = Array2::zeros((n, n));
                for (line, row) in read_table(&path, &["k", "k1", "rate"])? {
                    let k = table_index(&path, line, "k", row[0], n)?;
                    let k1 = table_index(&path, line, "k1", row[1], n)?;
                    rates[[k, k1]] = row[2];
                }
                let energies =
                    (0..n).map(|f| kinetic_terms::kinetic_energy(spec.k_of_column(f % spec.num_momenta()))).collect();
                CollisionModel::from_table(rates, energies, *temperature, *detailed_balance).map(Some)
            }
            CollisionConfig::StaticScreenedCoulomb { epsilon, temperature, eta, q_max } => {
                let q_max = q_max.unwrap_or(4 * spec.n_max());
                kinetic_terms::build_screened_coulomb_rates_with_q_max(spec, *epsilon, *temperature, *eta, q_max)
                    .map(Some)
            }
        }
    }
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| io_error(path, e))
}

pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const RUN_META_FILE: &str = "run_meta.txt";
pub const LIMIT_STUDY_FILE: &str = "limit_study.csv";

pub fn snapshots_csv(trajectory: &[evolution::Snapshot<DistributionField>]) -> String {
    let mut out = String::from("t,m,n,value\n");
    for snap in trajectory {
        let t = fmt_real(snap.t);
        let spec = snap.state.spec();
        for ((m, j), &v) in snap.state.values().indexed_iter() {
            let _ = writeln!(out, "{t},{m},{},{}", spec.n_of_column(j), fmt_real(v));
        }
    }
    out
}

pub fn diagnostics_csv(trajectory: &[evolution::Snapshot<DistributionField>]) -> String {
    let mut out = String::from("t,total_number,min_n,max_n,entropy\n");
    for snap in trajectory {
        let d = &snap.diagnostics;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_real(snap.t),
            fmt_real(d.total_number),
            fmt_real(d.min_n),
            fmt_real(d.max_n),
            fmt_real(d.entropy)
        );
    }
    out
}

fn run_meta(config: &ScenarioConfig, limits: &DtLimits, steps: usize, snapshots: usize) -> String {
    let mut out = String::new();
    for (section, entries) in config_entries(config) {
        for (key, value) in entries {
            let _ = writeln!(out, "{section}.{key} = {value}");
        }
    }
    let opt = |b: Option<f64>| b.map(fmt_real).unwrap_or_else(|| "none".into());
    let (bound, reason) = limits.bound();
    let _ = writeln!(out, "dt_bound.collision = {}", opt(limits.collision));
    let _ = writeln!(out, "dt_bound.transport = {}", opt(limits.transport));
    let _ = writeln!(out, "dt_bound.drift = {}", opt(limits.drift));
    let _ = writeln!(out, "dt_bound.effective = {}", fmt_real(bound));
    let _ = writeln!(out, "dt_bound.limited_by = {reason}");
    let _ = writeln!(out, "run.steps = {steps}");
    let _ = writeln!(out, "run.snapshots = {snapshots}");
    out
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub output_dir: PathBuf,
    pub trajectory: Vec<evolution::Snapshot<DistributionField>>,
    pub limits: DtLimits,
}

pub fn read_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_config(&text)
}

fn base_dir_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Run a scenario and write `snapshots.csv`, `diagnostics.csv` and
/// `run_meta.txt` into `output_dir`.
pub fn simulate(config: &ScenarioConfig, base_dir: &Path, output_dir: &Path) -> Result<SimulateOutcome> {
    let spec = config.grid.spec()?;
    let profile = config.potential.build(&spec, base_dir)?;
    let model = config.collision.build(&spec, base_dir)?;
    let n0 = config.initial.sample(&spec);
    let limits = DtLimits::for_distribution(&spec, &profile, model.as_ref());
    let trajectory = evolution::run_distribution(&n0, &profile, model.as_ref(), &config.integrator)?;
    std::fs::create_dir_all(output_dir).map_err(|e| io_error(output_dir, e))?;
    write_file(&output_dir.join(SNAPSHOTS_FILE), &snapshots_csv(&trajectory))?;
    write_file(&output_dir.join(DIAGNOSTICS_FILE), &diagnostics_csv(&trajectory))?;
    let meta = run_meta(config, &limits, config.integrator.num_steps(), trajectory.len());
    write_file(&output_dir.join(RUN_META_FILE), &meta)?;
    Ok(SimulateOutcome { output_dir: output_dir.to_path_buf(), trajectory, limits })
}

/// `simulate --config FILE [--output-dir DIR]`.
pub fn cmd_simulate(config_path: &Path, output_override: Option<&Path>) -> Result<SimulateOutcome> {
    let config = read_config(config_path)?;
    let output_dir = output_override.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    simulate(&config, &base_dir_of(config_path), &output_dir)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    pub level: usize,
    pub d: f64,
    pub n_max: usize,
    pub defect: f64,
}

pub const MIN_LEVELS: usize = 2;
pub const MAX_LEVELS: usize = 5;

/// `‖dbe_rhs - classical_rhs‖_∞` at `t = 0` on successively refined grids:
/// level `l` has `d/2^l`, `n_max·2^l` and `num_cells·2^l` (the same physical
/// length). The initial data is re-sampled at fixed physical coordinates.
/// Collisions are left out since both equations share the same term.
pub fn limit_study(config: &ScenarioConfig, base_dir: &Path, levels: usize) -> Result<Vec<LimitRow>> {
    if !(MIN_LEVELS..=MAX_LEVELS).contains(&levels) {
        return Err(Error::InvalidArgument(format!("levels must be in [{MIN_LEVELS}, {MAX_LEVELS}], got {levels}")));
    }
    if let PotentialConfig::CustomTable { .. } = config.potential {
        return Err(Error::InvalidArgument(
            "custom_table potentials are tied to one grid and cannot be refined".into(),
        ));
    }
    let base = config.grid.spec()?;
    let center = config.initial.physical_center(&base);
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        let scale = 1usize << level;
        let spec = GridSpec::new(base.d() / scale as f64, base.num_cells() * scale, base.n_max() * scale)?;
        let profile = config.potential.build(&spec, base_dir)?;
        let n = config.initial.sample_at(&spec, center);
        let dbe = kinetic_terms::dbe_rhs(&n, &profile, None)?;
        let classical = kinetic_terms::classical_rhs(&n, &profile, None)?;
        rows.push(LimitRow { level, d: spec.d(), n_max: spec.n_max(), defect: dbe.max_abs_diff(&classical) });
    }
    Ok(rows)
}

pub fn limit_study_csv(rows: &[LimitRow]) -> String {
    let mut out = String::from("level,d,n_max,defect\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.level, fmt_real(r.d), r.n_max, fmt_real(r.defect));
    }
    out
}

/// `limit-study --config FILE --levels L [--output-dir DIR]`; writes
/// `limit_study.csv`.
pub fn cmd_limit_study(config_path: &Path, levels: usize, output_override: Option<&Path>) -> Result<Vec<LimitRow>> {
    let config = read_config(config_path)?;
    let rows = limit_study(&config, &base_dir_of(config_path), levels)?;
    let output_dir = output_override.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
    std::fs::create_dir_all(&output_dir).map_err(|e| io_error(&output_dir, e))?;
    write_file(&output_dir.join(LIMIT_STUDY_FILE), &limit_study_csv(&rows))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisCheck {
    pub name: &'static str,
    pub max_defect: f64,
    pub tolerance: f64,
}

impl BasisCheck {
    pub fn passed(&self) -> bool {
        self.max_defect <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct BasisReport {
    pub spec: GridSpec,
    pub checks: Vec<BasisCheck>,
}

impl BasisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(BasisCheck::passed)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "grid d={} num_cells={} n_max={} states={}\n",
            self.spec.d(),
            self.spec.num_cells(),
            self.spec.n_max(),
            self.spec.num_states()
        );
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{status} {} max_defect={:.3e} tolerance={:.1e}", c.name, c.max_defect, c.tolerance);
        }
        let _ = writeln!(out, "{}", if self.passed() { "all checks passed" } else { "some checks failed" });
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Negative control: expand plane waves with the `√(L/d)` prefactor.
    #[doc(hidden)]
    pub corrupt_prefactor: bool,
}

pub const VERIFY_MAX_STATES: usize = 512;
pub const VERIFY_TOL: f64 = 1e-10;

/// Exhaustive analytic-vs-quadrature checks of the basis on a small grid.
pub fn verify_basis(d: f64, num_cells: usize, n_max: usize, options: VerifyOptions) -> Result<BasisReport> {
    let spec = GridSpec::new(d, num_cells, n_max)?;
    if spec.num_states() > VERIFY_MAX_STATES {
        return Err(Error::InvalidArgument(format!(
            "verify-basis needs at most {VERIFY_MAX_STATES} states, got {}",
            spec.num_states()
        )));
    }
    let qp = grid_basis::MIN_QUAD_POINTS;
    let prefactor =
        if options.corrupt_prefactor { (spec.length() / spec.d()).sqrt() } else { (spec.d() / spec.length()).sqrt() };
    let expand = |k: f64| grid_basis::expand_plane_wave_with_prefactor(&spec, k, prefactor);
    let states: Vec<WaveletIndex> = spec.indices().collect();
    let mut checks = Vec::new();

    let mut worst: f64 = 0.0;
    for &a in &states {
        for &b in states.iter().filter(|b| b.m == a.m) {
            let q = grid_basis::inner_product_quadrature(&spec, a, b, qp)?;
            worst = worst.max((q - grid_basis::inner_product(&spec, a, b)).norm());
        }
    }
    checks.push(BasisCheck { name: "orthonormality", max_defect: worst, tolerance: VERIFY_TOL });

    // off-grid momenta spread over the band
    let ks: Vec<f64> = (0..8).map(|i| spec.k_max() * (-1.1 + 2.2 * (i as f64 + 0.37) / 8.0)).collect();
    let mut worst: f64 = 0.0;
    for &k in &ks {
        let coeffs = expand(k);
        for &idx in &states {
            let q = grid_basis::plane_wave_coefficient_quadrature(&spec, idx, k, qp)?;
            worst = worst.max((q - coeffs[[idx.m, spec.column_of_n(idx.n)]]).norm());
        }
    }
    checks.push(BasisCheck { name: "plane_wave_coefficients", max_defect: worst, tolerance: VERIFY_TOL });

    let mut worst: f64 = 0.0;
    let norm = 1.0 / spec.length().sqrt();
    for n in -(spec.n_max() as i64)..=spec.n_max() as i64 {
        let k = spec.k(n);
        let coeffs = expand(k);
        for m in 0..spec.num_cells() {
            for s in 0..7 {
                let x = spec.x(m) + spec.d() * (-0.5 + s as f64 / 7.0);
                let r = grid_basis::reconstruct(&spec, &coeffs, x)?;
                worst = worst.max((r - Complex64::from_polar(norm, k * x)).norm());
            }
        }
    }
    checks.push(BasisCheck { name: "plane_wave_reconstruction", max_defect: worst, tolerance: VERIFY_TOL });

    let mut worst: f64 = 0.0;
    for j in 1..=3 {
        let q = j as f64 * spec.delta_q();
        for &a in states.iter().filter(|a| a.m == 0) {
            for &b in states.iter().filter(|b| b.m == 0) {
                let analytic = grid_basis::phase_matrix_element(&spec, q, a, b);
                let numeric =
                    grid_basis::matrix_element_quadrature(&spec, b, a, |x| Complex64::from_polar(1.0, q * x), q, qp)?;
                worst = worst.max((analytic.norm() - numeric.norm()).abs());
            }
        }
    }
    checks.push(BasisCheck { name: "phase_matrix_elements", max_defect: worst, tolerance: VERIFY_TOL });

    Ok(BasisReport { spec, checks })
}
