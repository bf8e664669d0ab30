use std::io::Write;

use rwrs_core::walk::IncrementLaw;
use rwrs_lab::cli::run;
use rwrs_lab::experiments::{self as ex, Model, TailChoice};
use rwrs_lab::format::Format;
use rwrs_lab::Parallel;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["rwrs"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn model(alpha: f64) -> Model {
    Model {
        dim: 3,
        law: IncrementLaw::Simple,
        alpha,
        c: 1.0,
    }
}

fn tail_params(estimator: TailChoice, seed: u64) -> ex::TailParams {
    ex::TailParams {
        model: model(2.0),
        ns: vec![100],
        y: 0.3,
        replicas: 20_000,
        inner: 1,
        estimator,
        seed,
    }
}

fn rendered(report: &ex::Report) -> Vec<u8> {
    let mut buf = Vec::new();
    report.table.write(&mut buf, Format::Csv).unwrap();
    buf
}

#[test]
fn output_is_identical_across_runs() {
    let args = ["simulate", "--seed", "5", "--n", "500", "--replicas", "6", "--alpha", "1.5"];
    let (c1, a, _) = invoke(&args);
    let (c2, b, _) = invoke(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 7);
    assert!(a.starts_with("replica,n,x_n,range,max_local_time,origin_local_time,self_intersection,replicas,seed,estimator_id\n"));
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let one = Parallel::new(1).unwrap();
    let three = Parallel::new(3).unwrap();
    let p = ex::TailParams { replicas: 2000, ..tail_params(TailChoice::Tilted, 11) };
    let a = ex::tail(&p, &one).unwrap();
    let b = ex::tail(&p, &three).unwrap();
    assert_eq!(rendered(&a), rendered(&b));
    assert!(Parallel::new(0).is_err());
}

#[test]
fn missing_seed_and_unknown_flag_are_usage_errors() {
    let (code, out, err) = invoke(&["tail", "--n", "64"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("--seed"), "{err}");
    assert_eq!(invoke(&["tail", "--seed", "1", "--bogus", "3"]).0, 2);
    assert_eq!(invoke(&["tail", "--seed", "1", "--estimator", "magic"]).0, 2);
    assert_eq!(invoke(&["frobnicate"]).0, 2);
}

#[test]
fn out_of_regime_parameters_are_rejected() {
    // the exponent fit needs alpha < d / 2; a plain tail estimate does not
    let (code, _, err) = invoke(&["exponent", "--seed", "1", "--d", "4", "--alpha", "2", "--replicas", "10"]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(invoke(&["tail", "--seed", "1", "--alpha", "0.5", "--replicas", "10"]).0, 2);
    assert_eq!(invoke(&["simulate", "--seed", "1", "--law", "drunk"]).0, 2);
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("bellshape-verify") && out.contains("lower-bound"));
}

#[test]
fn flags_override_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let mut f = std::fs::File::create(&cfg).unwrap();
    writeln!(f, "# simulate defaults\nseed = 3\nn = 200\nreplicas = 4").unwrap();
    drop(f);
    let cfg = cfg.to_str().unwrap();

    let (code, from_file, _) = invoke(&["simulate", "--config", cfg]);
    assert_eq!(code, 0);
    assert_eq!(from_file.lines().count(), 5);
    assert!(from_file.lines().nth(1).unwrap().starts_with("0,200,"));

    let (code, overridden, _) = invoke(&["simulate", "--config", cfg, "--replicas", "2", "--seed", "9"]);
    assert_eq!(code, 0);
    assert_eq!(overridden.lines().count(), 3);
    assert!(overridden.lines().nth(1).unwrap().ends_with(",2,9,sample"));

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "seed = 1\ncolour = blue\n").unwrap();
    assert_eq!(invoke(&["simulate", "--config", bad.to_str().unwrap()]).0, 2);
}

#[test]
fn json_lines_use_the_same_columns() {
    let (code, out, _) = invoke(&["lower-bound", "--seed", "1", "--n", "256,1024", "--format", "jsonl"]);
    assert_eq!(code, 0);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    let keys: Vec<&str> = lines[0].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["n", "y", "k", "k_predicted", "log_bound", "argmax_k", "max_log_bound", "replicas", "seed", "estimator_id"]);
    assert_eq!(lines[1]["n"], 1024);
}

#[test]
fn table_goes_to_out_file_and_scheme_block_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("classes.csv");
    let scheme = dir.path().join("scheme.txt");
    let (code, stdout, err) = invoke(&[
        "partition",
        "--seed",
        "2",
        "--d",
        "5",
        "--n",
        "400",
        "--y",
        "0.05",
        "--samples",
        "200",
        "--out",
        table.to_str().unwrap(),
        "--scheme-out",
        scheme.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.is_empty());
    assert!(!err.is_empty());
    let csv = std::fs::read_to_string(&table).unwrap();
    assert!(csv.starts_with("class,lower_threshold,upper_threshold,budget,gamma,mean_sites,mean_sum,fired,replicas,seed,estimator_id\n"));
    let block = std::fs::read_to_string(&scheme).unwrap();
    for key in ["alpha", "d", "n", "y", "beta", "levels", "b_list", "thresholds"] {
        assert!(block.lines().any(|l| l.starts_with(&format!("{key} = "))), "{key} missing:\n{block}");
    }
}

#[test]
fn naive_and_tilted_tail_estimates_overlap() {
    let exec = Parallel::new(1).unwrap();
    let naive = ex::tail(&ex::TailParams { replicas: 100_000, ..tail_params(TailChoice::Naive, 3) }, &exec).unwrap();
    let tilted = ex::tail(&tail_params(TailChoice::Tilted, 4), &exec).unwrap();
    let p = |r: &ex::Report| match r.table.get(0, "p") {
        Some(rwrs_lab::format::Value::Float(v)) => *v,
        other => panic!("{other:?}"),
    };
    let se = |r: &ex::Report| match r.table.get(0, "rel_se") {
        Some(rwrs_lab::format::Value::Float(v)) => *v * p(r),
        other => panic!("{other:?}"),
    };
    let joint = (se(&naive).powi(2) + se(&tilted).powi(2)).sqrt();
    assert!((p(&naive) - p(&tilted)).abs() < 3.0 * joint, "{} vs {}", p(&naive), p(&tilted));
}
