use regbandit::experiment::{
    collect_rows, errors_path, fit_rate_slope, read_csv, run_and_emit, run_sweep, summary_path,
    write_csv, EvaluationSettings, Overrides, SweepSpec, CSV_HEADER,
};
use regbandit::parallel::Parallelism;

fn overrides(horizons: &[u64], betas: &[f64], reps: u32, seed: u64) -> Overrides {
    Overrides {
        horizons: Some(horizons.to_vec()),
        betas: Some(betas.to_vec()),
        reps: Some(reps),
        seed: Some(seed),
        ..Overrides::default()
    }
}

fn small_spec(seed: u64) -> SweepSpec {
    let text = r#"
        T = [300, 600, 1000, 1500, 2000]
        beta = [0.3, 0.5, 0.7, 1.0]
        reps = 10
        [evaluation]
        nodes = 64
    "#;
    let mut spec = SweepSpec::from_toml_str(text, &Overrides::default()).unwrap();
    spec.seed = seed;
    spec
}

#[test]
fn grid_produces_one_row_per_run() {
    let spec = small_spec(1);
    let output = run_and_emit(&spec, Parallelism::Sequential).unwrap();
    assert_eq!(output.rows.len(), 200);
    assert!(output.failures.is_empty());
    let text = String::from_utf8(output.csv.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(text.lines().count(), 201);
    assert!(!text.contains('\r'));

    let mut seen = std::collections::BTreeSet::new();
    for row in &output.rows {
        assert!(seen.insert((row.beta.to_bits(), row.horizon, row.rep)));
        assert!(row.approximation_error >= -1e-10);
        assert!((row.regret - row.estimation_error - row.approximation_error).abs() <= 1e-12);
        assert_eq!(row.regret_times_t, row.regret * row.horizon as f64);
        assert!(row.empty_bin_count <= row.bins.pow(spec.environment.dim as u32));
    }
    assert_eq!(read_csv(&output.csv).unwrap(), output.rows);
}

#[test]
fn worker_count_does_not_change_output() {
    let mut spec = small_spec(7);
    spec.reps = 2;
    let sequential = run_and_emit(&spec, Parallelism::Sequential).unwrap();
    let threaded = run_and_emit(&spec, Parallelism::Threads(8)).unwrap();
    let auto = run_and_emit(&spec, Parallelism::Auto).unwrap();
    assert_eq!(sequential.csv, threaded.csv);
    assert_eq!(sequential.csv, auto.csv);
}

#[test]
fn failing_run_is_reported_and_others_kept() {
    let spec = SweepSpec::from_overrides(&overrides(&[2000], &[0.5], 10, 3)).unwrap();
    let mut configs = spec.run_configs();
    configs[4].bins = Some(1000);
    let records = run_sweep(
        &configs,
        &EvaluationSettings::default(),
        Parallelism::Sequential,
    );
    let (rows, failures) = collect_rows(&records);
    assert_eq!(rows.len(), 9);
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0].id.rep, 4);
    assert!(!failures[0].message.is_empty());
}

#[test]
fn files_are_written_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(11);
    spec.reps = 1;
    spec.horizons = vec![500, 1000, 2000];
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    spec.out = Some(first.clone());
    run_and_emit(&spec, Parallelism::Auto).unwrap();
    spec.out = Some(second.clone());
    run_and_emit(&spec, Parallelism::Sequential).unwrap();
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );
    assert!(summary_path(&first).exists());
    assert!(!errors_path(&first).exists());

    spec.seed = 12;
    spec.out = Some(second.clone());
    run_and_emit(&spec, Parallelism::Auto).unwrap();
    assert_ne!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );
}

#[test]
fn failures_go_to_companion_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let mut spec = SweepSpec::from_overrides(&overrides(&[50, 2000], &[0.5], 1, 0)).unwrap();
    spec.bins = Some(20);
    spec.out = Some(out.clone());
    let output = run_and_emit(&spec, Parallelism::Sequential).unwrap();
    assert_eq!(output.rows.len(), 1);
    assert_eq!(output.failures.len(), 1);
    let errors = std::fs::read_to_string(errors_path(&out)).unwrap();
    assert_eq!(errors.lines().count(), 2);
    assert!(errors
        .lines()
        .next()
        .unwrap()
        .starts_with("beta,T,rep,seed,error"));

    spec.horizons = vec![2000];
    run_and_emit(&spec, Parallelism::Sequential).unwrap();
    assert!(!errors_path(&out).exists());
}

#[test]
fn invalid_sweeps_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let mut o = overrides(&[], &[0.5], 1, 0);
    o.out = Some(out.clone());
    let err = SweepSpec::from_overrides(&o).unwrap_err();
    assert!(err.to_string().contains('T'));
    let mut o = overrides(&[1000], &[1.5], 1, 0);
    o.out = Some(out.clone());
    assert!(SweepSpec::from_overrides(&o).is_err());
    assert!(!out.exists());
}

#[test]
fn unknown_keys_are_named() {
    let err = SweepSpec::from_toml_str(
        "T = [100]\nbeta = [0.5]\nhorizon = 3\n",
        &Overrides::default(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("horizon"), "{err}");
}

#[test]
fn regret_falls_with_horizon() {
    let spec =
        SweepSpec::from_overrides(&overrides(&[2_000, 8_000, 32_000, 128_000], &[0.5], 4, 5))
            .unwrap();
    let output = run_and_emit(&spec, Parallelism::Auto).unwrap();
    let (slope, _) = fit_rate_slope(&output.rows).unwrap();
    assert!(slope < 0.0, "{slope}");
    let text = write_csv(&output.rows).unwrap();
    assert_eq!(text, output.csv);
}
