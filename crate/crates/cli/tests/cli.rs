use std::fs;
use std::path::Path;
use std::process::Command;

use doublewell_cli::config::{InitialState, Method, RunConfig, Sweep, SweepAxis, Tolerances};
use doublewell_cli::manifest::RunManifest;
use doublewell_cli::output::{parse_table, Snapshot};
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_doublewell"))
}

/// Writes `body` as a config file and runs `sub` on it.
fn run_with(dir: &Path, sub: &str, body: &str, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, body).unwrap();
    let out = bin()
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

const SMALL_PAIR: &str = r#"
method = "fgh"
n_particles = 2
x_max = 8.0
n_grid = 101
n_cut = 10
lambda = 0.5
a_max = 4.0
initial = { localized = 0 }
t_end = 5.0
dt_sample = 0.5
snapshots = [1.0]
"#;

#[test]
fn malformed_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run_with(dir.path(), "spectrum", "n_particle = 2\n", &[]);
    assert_eq!(code, 2, "{err}");
    let (code, _) = run_with(dir.path(), "spectrum", "n_grid = 100\n", &[]);
    assert_eq!(code, 2);
    let (code, _) = run_with(dir.path(), "evolve", "method = \"bh\"\ninitial = { localized = 0 }\n", &[]);
    assert_eq!(code, 2);
}

#[test]
fn oversized_lattice_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run_with(dir.path(), "spectrum", "method = \"bh\"\nn_particles = 3\nn_sites = 401\n", &[]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn coarse_sampling_of_the_current_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL_PAIR.replace("dt_sample = 0.5", "dt_sample = 2.5").replace("snapshots = [1.0]", "t_ramp = 1.0");
    let (code, err) = run_with(dir.path(), "evolve", &body, &[]);
    assert_eq!(code, 3, "{err}");
    assert!(dir.path().join("out/diagnostics.txt").exists());
    let m: RunManifest = toml::from_str(&fs::read_to_string(dir.path().join("out/manifest.toml")).unwrap()).unwrap();
    assert!(m.status.starts_with("failed"));
}

#[test]
fn empty_sweep_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let body = "n_particles = 1\nn_grid = 101\nx_max = 8.0\nn_cut = 8\n[sweep]\naxis = \"a_max\"\nvalues = []\n";
    let (code, err) = run_with(dir.path(), "spectrum", body, &[]);
    assert_eq!(code, 0, "{err}");
    let t = parse_table(&fs::read_to_string(dir.path().join("out/spectrum.tsv")).unwrap()).unwrap();
    assert!(t.rows.is_empty());
    assert_eq!(t.columns, vec!["value", "n", "energy", "parity"]);
}

#[test]
fn harmonic_one_body_table() {
    let dir = tempfile::tempdir().unwrap();
    let body = "n_particles = 1\nn_grid = 201\nx_max = 10.0\nn_cut = 12\nn_levels = 6\na_max = 0.0\n";
    let (code, err) = run_with(dir.path(), "spectrum", body, &[]);
    assert_eq!(code, 0, "{err}");
    let t = parse_table(&fs::read_to_string(dir.path().join("out/spectrum.tsv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 6);
    for r in &t.rows {
        assert!((r[2] - (r[1] + 0.5)).abs() < 1e-8);
        assert_eq!(r[3], if r[1] as usize % 2 == 0 { 1.0 } else { -1.0 });
    }
}

#[test]
fn lattice_spectrum_tracks_branches_over_u() {
    let dir = tempfile::tempdir().unwrap();
    let body = "method = \"bh\"\nn_particles = 2\nn_sites = 21\nx_max = 6.0\na_max = 4.0\nn_levels = 4\n\
                [sweep]\naxis = \"lambda\"\nvalues = [0.0, 0.1, 0.2]\n";
    let (code, err) = run_with(dir.path(), "spectrum", body, &[]);
    assert_eq!(code, 0, "{err}");
    let t = parse_table(&fs::read_to_string(dir.path().join("out/spectrum.tsv")).unwrap()).unwrap();
    assert_eq!(t.columns, vec!["value", "n", "energy", "branch", "degeneracy"]);
    assert_eq!(t.rows.len(), 12);
}

#[test]
fn zero_duration_evolution_reports_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL_PAIR.replace("t_end = 5.0", "t_end = 0.0").replace("snapshots = [1.0]", "");
    let (code, err) = run_with(dir.path(), "evolve", &body, &[]);
    assert_eq!(code, 0, "{err}");
    let t = parse_table(&fs::read_to_string(dir.path().join("out/series.tsv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 1);
    let r = &t.rows[0];
    assert_eq!(r[0], 0.0);
    assert!((r[1] + r[2] + r[3] - 1.0).abs() < 1e-12);
    assert!(r[2] > 0.8);
    assert_eq!(r[4], 0.0);
}

#[test]
fn evolve_writes_headered_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run_with(dir.path(), "evolve", SMALL_PAIR, &["--reference-mode"]);
    assert_eq!(code, 0, "{err}");
    let out = dir.path().join("out");
    let m: RunManifest = toml::from_str(&fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(m.status, "ok");
    assert_eq!(m.threads, 1);
    assert_eq!(m.config_digest, m.config.digest());
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, vec!["series.tsv", "density_000.txt"]);
    let t = parse_table(&fs::read_to_string(out.join("series.tsv")).unwrap()).unwrap();
    assert_eq!(t.digest, m.config_digest);
    assert_eq!(t.columns, vec!["t", "P_LL", "P_RR", "P_LR", "J", "S", "E"]);
    assert_eq!(t.rows.len(), 11);
    for r in &t.rows {
        assert!((r[1] + r[2] + r[3] - 1.0).abs() < 1e-9);
        assert!(r[5] >= 0.0);
    }
    let s = Snapshot::parse(&fs::read_to_string(out.join("density_000.txt")).unwrap()).unwrap();
    assert_eq!((s.t, s.n), (1.0, 101));
    let total: f64 = s.values.iter().sum::<f64>() * s.dx * s.dx;
    assert!((total - 1.0).abs() < 1e-8);
}

#[test]
fn reference_mode_reproduces_digests() {
    let body = SMALL_PAIR.replace("snapshots = [1.0]", "t_ramp = 2.0").replace("dt_sample = 0.5", "dt_sample = 0.05");
    let digests = |dir: &Path| {
        let (code, err) = run_with(dir, "evolve", &body, &["--reference-mode"]);
        assert_eq!(code, 0, "{err}");
        let m: RunManifest = toml::from_str(&fs::read_to_string(dir.join("out/manifest.toml")).unwrap()).unwrap();
        m.files
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(digests(a.path()), digests(b.path()));
}

#[test]
fn single_ramp_duration_gives_a_single_column_map() {
    let dir = tempfile::tempdir().unwrap();
    let body = "method = \"bh\"\nn_particles = 2\nn_sites = 15\nx_max = 5.0\na_max = 3.0\nt_end = 4.0\ndt_sample = 1.0\nt_ramps = [2.0]\n";
    let (code, err) = run_with(dir.path(), "entropy-map", body, &[]);
    assert_eq!(code, 0, "{err}");
    let t = parse_table(&fs::read_to_string(dir.path().join("out/entropy_map.tsv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 5);
    assert!(t.rows.iter().all(|r| r[0] == 2.0 && r[2] >= 0.0));
}

#[test]
fn presets_are_listed_on_typos() {
    let out = bin().args(["spectrum", "--preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pair-spectrum"));
}

#[test]
fn quick_validation_passes() {
    let out = bin().args(["validate", "--quick"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 8, "{text}");
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 1e-6..1e6f64, -1e3..1e3f64]
}

prop_compose! {
    fn arb_config()(
        bh in any::<bool>(),
        n_particles in 1usize..4,
        x_max in finite(),
        n_grid in 1usize..5000,
        n_sites in 1usize..500,
        n_cut in 1usize..400,
        lambda in finite(),
        a_max in finite(),
        t_ramp in finite(),
        t_end in finite(),
        dt in finite(),
        localized in proptest::option::of(0usize..20),
        n_levels in 1usize..50,
        sweep in proptest::option::of((any::<bool>(), proptest::collection::vec(finite(), 0..6))),
        t_ramps in proptest::collection::vec(finite(), 0..5),
        snapshots in proptest::collection::vec(finite(), 0..3),
        tol in (1e-14..1e-2f64, 1e-14..1e-2f64, 1e-14..1e-2f64, any::<bool>()),
        dir in "[a-z]{1,8}(/[a-z]{1,8})?",
    ) -> RunConfig {
        RunConfig {
            method: if bh { Method::Bh } else { Method::Fgh },
            n_particles, x_max, n_grid, n_sites, n_cut, lambda, a_max, t_ramp, t_end,
            dt_sample: dt,
            initial: localized.map_or(InitialState::Ground, InitialState::Localized),
            n_levels,
            sweep: sweep.map(|(a, values)| Sweep { axis: if a { SweepAxis::AMax } else { SweepAxis::Lambda }, values }),
            t_ramps, snapshots,
            output_dir: dir.into(),
            tolerances: Tolerances {
                eig: tol.0, ramp: tol.1, krylov: tol.2,
                integrator: if tol.3 { doublewell::propagate::Integrator::Magnus4 } else { doublewell::propagate::Integrator::Midpoint },
            },
        }
    }
}

proptest! {
    #[test]
    fn config_round_trips_through_toml(c in arb_config()) {
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.digest(), c.digest());
    }
}
