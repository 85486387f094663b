#![allow(dead_code)]

use std::path::PathBuf;

use dke_core::cli_io::{self, ScenarioConfig};
use dke_core::difference_ops::LatticeField;
use dke_core::kinetic_terms::PolarizationMatrix;
use dke_core::{Complex64, GridSpec};
use ndarray::Array2;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DEFAULT_SEED: u64 = 0x5eed_d1ce;

/// Seed from `DKE_SEED`, or a fixed default.
pub fn seed() -> u64 {
    std::env::var("DKE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_SEED)
}

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed())
}

pub fn runner(cases: u32) -> TestRunner {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed().to_le_bytes());
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &bytes))
}

/// Grids with at most 30 states.
pub fn small_specs() -> Vec<GridSpec> {
    [(2, 1), (2, 3), (2, 7), (4, 1), (4, 3), (6, 2), (10, 1)]
        .into_iter()
        .map(|(m, n)| GridSpec::new(0.5 + m as f64 * 0.1, m, n).unwrap())
        .collect()
}

/// `G G† / Tr(G G†)` for a random complex `G`: Hermitian, positive, with
/// its diagonal in `[0, 1]`.
pub fn random_density(rng: &mut impl Rng, spec: GridSpec) -> PolarizationMatrix {
    let n = spec.num_states();
    let g = Array2::from_shape_fn((n, n), |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let gh = g.t().mapv(|z| z.conj());
    let p = g.dot(&gh);
    let tr: f64 = p.diag().iter().map(|z| z.re).sum();
    let mut p = p.mapv(|z| z / tr);
    // exact Hermitian symmetry
    for i in 0..n {
        p[[i, i]] = Complex64::new(p[[i, i]].re, 0.0);
        for j in 0..i {
            p[[i, j]] = p[[j, i]].conj();
        }
    }
    PolarizationMatrix::new(spec, p).unwrap()
}

pub fn frobenius(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn presets_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

pub fn preset(name: &str) -> ScenarioConfig {
    cli_io::read_config(&presets_dir().join(format!("{name}.toml"))).unwrap()
}

/// Centre of mass along `x` of `field - background` in momentum column `j`.
/// The packet must stay clear of the periodic wrap.
pub fn centroid(field: &LatticeField<f64>, j: usize, background: f64) -> f64 {
    let spec = field.spec();
    let (mut mass, mut moment) = (0.0, 0.0);
    for m in 0..spec.num_cells() {
        let w = field.get(m, spec.n_of_column(j)) - background;
        mass += w;
        moment += w * spec.x(m);
    }
    moment / mass
}
