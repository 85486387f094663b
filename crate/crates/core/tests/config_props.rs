use std::fs;
use std::path::{Path, PathBuf};

use dke_core::cli_io::*;
use dke_core::evolution::{IntegratorConfig, Scheme};
use dke_core::kinetic_terms::{kinetic_energy, PotentialProfile};
use dke_core::{Error, GridSpec};
use proptest::prelude::*;

mod common;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e3f64..1e3, Just(0.0), Just(1e-300), Just(-2.5e17)]
}

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![1e-6f64..1e3, Just(0.1), Just(f64::MIN_POSITIVE)]
}

fn potential() -> impl Strategy<Value = PotentialConfig> {
    prop_oneof![
        Just(PotentialConfig::Zero),
        finite().prop_map(|e0| PotentialConfig::UniformField { e0 }),
        finite().prop_map(|k_spring| PotentialConfig::Harmonic { k_spring }),
        "[a-z]{1,8}(/[a-z]{1,8})?\\.csv".prop_map(|f| PotentialConfig::CustomTable { file: PathBuf::from(f) }),
    ]
}

fn initial() -> impl Strategy<Value = InitialConfig> {
    prop_oneof![
        (0.0f64..=1.0).prop_map(|n0| InitialConfig::Uniform { n0 }),
        (finite(), finite(), positive(), prop_oneof![Just(0.0), positive()], 0.01f64..=0.5, 0.0f64..0.5).prop_map(
            |(center_m, center_n, sigma_r, sigma_k, amplitude, background)| InitialConfig::GaussianRk {
                center_m,
                center_n,
                sigma_r,
                sigma_k,
                amplitude,
                background,
            }
        ),
        (finite(), positive()).prop_map(|(mu, temperature)| InitialConfig::FermiDirac { mu, temperature }),
    ]
}

fn collision() -> impl Strategy<Value = CollisionConfig> {
    prop_oneof![
        Just(CollisionConfig::None),
        ("[a-z]{1,8}\\.csv", positive(), any::<bool>()).prop_map(|(f, temperature, detailed_balance)| {
            CollisionConfig::UserTable { file: PathBuf::from(f), temperature, detailed_balance }
        }),
        (positive(), positive(), positive(), prop::option::of(1usize..100)).prop_map(
            |(epsilon, temperature, eta, q_max)| {
                CollisionConfig::StaticScreenedCoulomb { epsilon, temperature, eta, q_max }
            }
        ),
    ]
}

fn scenario() -> impl Strategy<Value = ScenarioConfig> {
    (
        (positive(), 1usize..50, 1usize..40),
        potential(),
        initial(),
        collision(),
        (positive(), positive(), prop_oneof![Just(Scheme::Euler), Just(Scheme::Rk4)], 1usize..1000),
        "[a-z_]{1,10}( [a-z]{1,4})?",
    )
        .prop_map(|((d, half, n_max), potential, initial, collision, (dt, t_end, scheme, every), dir)| {
            ScenarioConfig {
                grid: GridConfig { d, num_cells: 2 * half, n_max },
                potential,
                initial,
                collision,
                integrator: IntegratorConfig::new(dt, t_end, scheme, every).unwrap(),
                output_dir: PathBuf::from(dir),
            }
        })
}

#[test]
fn serialized_configs_parse_back_identically() {
    common::runner(300)
        .run(&scenario(), |config| {
            let text = serialize_config(&config);
            let parsed = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(&parsed, &config);
            prop_assert_eq!(serialize_config(&parsed), text);
            Ok(())
        })
        .unwrap();
}

fn issue_keys(text: &str) -> Vec<(usize, String)> {
    match parse_config(text) {
        Err(Error::Config(issues)) => issues.into_iter().map(|i| (i.line, i.key)).collect(),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn config_error_examples() {
    let base = "[grid]\nd = 1.0\nnum_cells = 4\nn_max = 2\n\n[initial]\nkind = \"uniform\"\nn0 = 0.5\n";
    assert!(parse_config(base).is_ok());

    let odd = base.replace("num_cells = 4", "num_cells = 5");
    assert_eq!(issue_keys(&odd), vec![(3, "grid.num_cells".to_string())]);

    let typo = format!("{base}\n[integrator]\nsheme = \"rk4\"\n");
    assert_eq!(issue_keys(&typo), vec![(11, "integrator.sheme".to_string())]);

    let bad_kind = base.replace("\"uniform\"", "\"flat\"");
    assert_eq!(issue_keys(&bad_kind), vec![(7, "initial.kind".to_string())]);

    let wrong_type = base.replace("n_max = 2", "n_max = \"two\"");
    assert_eq!(issue_keys(&wrong_type), vec![(4, "grid.n_max".to_string())]);

    let unknown_section = format!("{base}\n[solver]\ntol = 1\n");
    assert_eq!(issue_keys(&unknown_section)[0].1, "solver");

    let no_grid = "[initial]\nkind = \"uniform\"\nn0 = 0.5\n";
    assert!(issue_keys(no_grid).iter().any(|(_, k)| k.starts_with("grid")));

    let err = parse_config(&odd).unwrap_err();
    assert_eq!(err.code(), "config_invalid");
    assert!(err.is_usage());
    assert!(!err.to_string().contains('\n'));
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn static_initial_state_is_reproduced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "still.toml",
        "[grid]\nd = 1.0\nnum_cells = 4\nn_max = 2\n\n[initial]\nkind = \"uniform\"\nn0 = 0.25\n\n[integrator]\ndt = 0.025\nt_end = 0.5\nsnapshot_every = 8\n",
    );
    let out = cmd_simulate(&cfg, Some(&dir.path().join("out"))).unwrap();
    let times: Vec<f64> = out.trajectory.iter().map(|s| s.t).collect();
    assert_eq!(times.len(), 4);
    assert_eq!(times[0], 0.0);
    assert!((times[3] - 0.5).abs() < 1e-15);
    for snap in &out.trajectory {
        assert!(snap.state.values().iter().all(|&v| v == 0.25));
    }
}

#[test]
fn output_files_have_fixed_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "drift.toml",
        "[grid]\nd = 1.0\nnum_cells = 4\nn_max = 3\n\n[potential]\nkind = \"uniform_field\"\ne0 = 0.3\n\n\
         [initial]\nkind = \"gaussian_rk\"\ncenter_m = 1.5\ncenter_n = 0.0\nsigma_r = 1.0\nsigma_k = 2.0\namplitude = 0.5\nbackground = 0.1\n\n\
         [integrator]\ndt = 0.01\nt_end = 0.1\nsnapshot_every = 5\n\n[output]\ndir = \"unused\"\n",
    );
    let out_dir = dir.path().join("run");
    let outcome = cmd_simulate(&cfg, Some(&out_dir)).unwrap();
    assert_eq!(outcome.output_dir, out_dir);

    let snapshots = fs::read_to_string(out_dir.join(SNAPSHOTS_FILE)).unwrap();
    let mut lines = snapshots.lines();
    assert_eq!(lines.next(), Some("t,m,n,value"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 4 * 7);
    let number = |s: &str| {
        let (mantissa, exp) = s.split_once('e').expect("scientific");
        let digits = mantissa.trim_start_matches('-').replace('.', "");
        digits.len() == 17 && exp.parse::<i32>().is_ok()
    };
    for row in &rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 4);
        assert!(number(cols[0]) && number(cols[3]), "{row}");
        cols[1].parse::<usize>().unwrap();
        assert!((-3..=3).contains(&cols[2].parse::<i64>().unwrap()));
    }

    let diagnostics = fs::read_to_string(out_dir.join(DIAGNOSTICS_FILE)).unwrap();
    assert!(diagnostics.starts_with("t,total_number,min_n,max_n,entropy\n"));
    assert_eq!(diagnostics.lines().count(), 4);

    let meta = fs::read_to_string(out_dir.join(RUN_META_FILE)).unwrap();
    let pairs: Vec<(&str, &str)> = meta.lines().map(|l| l.split_once(" = ").expect("key = value")).collect();
    let get = |k: &str| pairs.iter().find(|(key, _)| *key == k).map(|(_, v)| *v);
    assert_eq!(get("grid.n_max"), Some("3"));
    assert_eq!(get("potential.kind"), Some("\"uniform_field\""));
    assert_eq!(get("dt_bound.collision"), Some("none"));
    assert_eq!(get("run.steps"), Some("10"));
    assert!(get("dt_bound.effective").is_some());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::presets_dir().join("uniform_drift.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cmd_simulate(&cfg, Some(&a)).unwrap();
    cmd_simulate(&cfg, Some(&b)).unwrap();
    for file in [SNAPSHOTS_FILE, DIAGNOSTICS_FILE, RUN_META_FILE] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn custom_potential_table() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GridSpec::new(0.5, 4, 2).unwrap();
    let mut table = String::from("m,v\n# quadratic well\n");
    for m in 0..4 {
        table.push_str(&format!("{m},{}\n", 0.5 * 2.0 * spec.x(m).powi(2)));
    }
    write(dir.path(), "well.csv", &table);
    let custom = PotentialConfig::CustomTable { file: "well.csv".into() }.build(&spec, dir.path()).unwrap();
    let harmonic = PotentialProfile::harmonic(&spec, 2.0);
    for m in 0..4 {
        assert!((custom.v()[m] - harmonic.v()[m]).abs() < 1e-15);
    }

    write(dir.path(), "short.csv", "m,v\n0,1.0\n1,2.0\n");
    let err = PotentialConfig::CustomTable { file: "short.csv".into() }.build(&spec, dir.path()).unwrap_err();
    assert!(err.to_string().contains("cell 2"), "{err}");

    write(dir.path(), "header.csv", "cell,v\n0,1.0\n");
    assert!(PotentialConfig::CustomTable { file: "header.csv".into() }.build(&spec, dir.path()).is_err());

    let missing = PotentialConfig::CustomTable { file: "absent.csv".into() }.build(&spec, dir.path()).unwrap_err();
    assert!(missing.to_string().contains("absent.csv"));
}

#[test]
fn user_rate_table() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GridSpec::new(1.0, 2, 1).unwrap();
    let t = 2.0;
    let e = |j: usize| kinetic_energy(spec.k_of_column(j));
    // columns 0 and 1 of cell 0, balanced at temperature t
    let up = 0.3;
    let down = up * (-(e(1) - e(0)) / t).exp();
    write(dir.path(), "rates.csv", &format!("k,k1,rate\n0,1,{up:e}\n1,0,{down:e}\n"));
    let model = CollisionConfig::UserTable { file: "rates.csv".into(), temperature: t, detailed_balance: true }
        .build(&spec, dir.path())
        .unwrap()
        .unwrap();
    assert_eq!(model.rate(0, 1), up);
    assert_eq!(model.rate(1, 0), down);
    assert_eq!(model.rate(2, 3), 0.0);

    write(dir.path(), "skewed.csv", "k,k1,rate\n0,1,1.0\n1,0,1.0\n");
    let skewed = CollisionConfig::UserTable { file: "skewed.csv".into(), temperature: t, detailed_balance: true };
    assert!(skewed.build(&spec, dir.path()).is_err());
    let unchecked = CollisionConfig::UserTable { file: "skewed.csv".into(), temperature: t, detailed_balance: false };
    assert!(unchecked.build(&spec, dir.path()).is_ok());

    write(dir.path(), "range.csv", "k,k1,rate\n0,6,1.0\n");
    let err = CollisionConfig::UserTable { file: "range.csv".into(), temperature: t, detailed_balance: false }
        .build(&spec, dir.path())
        .unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn limit_study_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::presets_dir().join("limit_study_base.toml");
    let rows = cmd_limit_study(&cfg, 3, Some(dir.path())).unwrap();
    assert_eq!(rows.iter().map(|r| r.n_max).collect::<Vec<_>>(), vec![96, 192, 384]);
    let text = fs::read_to_string(dir.path().join(LIMIT_STUDY_FILE)).unwrap();
    assert_eq!(text, limit_study_csv(&rows));
    assert!(text.starts_with("level,d,n_max,defect\n"));
    assert_eq!(text.lines().count(), 4);
    assert!(cmd_limit_study(&cfg, 1, Some(dir.path())).unwrap_err().is_usage());
}
