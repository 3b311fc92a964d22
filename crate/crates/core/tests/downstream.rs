//! Evaluation harness: classifier sanity, condition wiring and sweeps.

use fedtransfer::data::{LabelVector, SampleId};
use fedtransfer::downstream::{
    evaluate, fit_and_score, prepare, run_conditions, stratified_split, sweep, train_classifier, ClassifierConfig,
    Condition, PipelineConfig, SplitSpec, SweepAxis,
};
use fedtransfer::lkt::LktConfig;
use fedtransfer::numerics::{seeded_rng, Matrix};
use fedtransfer::orchestrator::{generate_synthetic, SyntheticSpec};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn labels(y: Vec<usize>, k: usize) -> LabelVector {
    let ids = (0..y.len()).map(|i| SampleId(format!("r{i}"))).collect();
    LabelVector::new(ids, y, k).unwrap()
}

fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        n_overlap: 200,
        n_local: 300,
        n_data_only: 20,
        task_features: 6,
        data_features: 6,
        ..Default::default()
    }
}

fn small_pipeline() -> PipelineConfig {
    PipelineConfig {
        lkt: LktConfig { hidden: 16, epochs: 3, finetune_epochs: 2, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn separable_blobs_are_learned() {
    let mut x = gaussian(200, 2, 1).scale(0.5);
    let y: Vec<usize> = (0..200).map(|i| i % 2).collect();
    for (i, &c) in y.iter().enumerate() {
        let shift = if c == 1 { 3.0 } else { -3.0 };
        x[(i, 0)] += shift;
    }
    let y = labels(y, 2);
    let clf = train_classifier(&x, &y, &ClassifierConfig::default(), 0).unwrap();
    assert!(evaluate(&clf, &x, &y).unwrap() >= 0.99);
}

#[test]
fn random_labels_score_at_majority_rate() {
    let n = 400;
    let mut accs = Vec::new();
    let mut majority = Vec::new();
    let mut n_test = 0;
    for seed in 0..10u64 {
        let x = gaussian(n, 5, 100 + seed);
        let mut y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        y.shuffle(&mut seeded_rng(200 + seed));
        let split = stratified_split(&y, 2, &SplitSpec::default(), seed).unwrap();
        let y = labels(y, 2);
        let (tr, te) = (y.select(&split.train), y.select(&split.test));
        let acc = fit_and_score(
            &x.select_rows(&split.train),
            &tr,
            &x.select_rows(&split.test),
            &te,
            &ClassifierConfig::default(),
            seed,
        )
        .unwrap();
        let counts = te.class_counts();
        majority.push(*counts.iter().max().unwrap() as f64 / te.len() as f64);
        n_test += te.len();
        accs.push(acc);
    }
    let mean = accs.iter().sum::<f64>() / 10.0;
    let m = majority.iter().sum::<f64>() / 10.0;
    let sigma = (m * (1.0 - m) / n_test as f64).sqrt();
    assert!((mean - m).abs() <= 3.0 * sigma, "mean accuracy {mean} vs majority {m} (sigma {sigma})");
}

#[test]
fn classifier_is_seeded() {
    let x = gaussian(120, 3, 7);
    let y = labels((0..120).map(|i| usize::from(x[(i, 0)] > 0.0)).collect(), 2);
    let cfg = ClassifierConfig::default();
    assert_eq!(train_classifier(&x, &y, &cfg, 3).unwrap(), train_classifier(&x, &y, &cfg, 3).unwrap());
    assert_ne!(train_classifier(&x, &y, &cfg, 3).unwrap(), train_classifier(&x, &y, &cfg, 4).unwrap());
}

#[test]
fn local_baseline_sends_nothing() {
    let ds = generate_synthetic(&small_spec()).unwrap();
    let cfg = small_pipeline();
    let prep = prepare(&ds, &cfg).unwrap();
    let out = run_conditions(&prep, &[Condition::Local], &cfg, &[0, 1], "h").unwrap();
    assert!(out.bus.trace().is_empty());
    assert_eq!(out.reports[0].condition, Condition::Local);
}

#[test]
fn all_conditions_share_one_federation_per_seed() {
    let ds = generate_synthetic(&SyntheticSpec { num_data_parties: 2, ..small_spec() }).unwrap();
    let cfg = small_pipeline();
    let prep = prepare(&ds, &cfg).unwrap();
    let seeds = [0, 1];
    let out = run_conditions(&prep, &Condition::ALL, &cfg, &seeds, "h").unwrap();
    // only the FRL protocol talks; everything after it is local
    assert!(out.bus.trace().iter().all(|r| r.protocol == "fedsvd"));
    assert_eq!(out.bus.executions("fedsvd"), seeds.len() * 2);

    let tags: Vec<&str> = out.reports.iter().map(|r| r.condition.as_str()).collect();
    assert_eq!(tags, ["local", "unitrans", "ablation-no-mi", "ablation-no-cl"]);
    let json = serde_json::to_value(&out.reports[2]).unwrap();
    assert_eq!(json["condition"], "ablation-no-mi");

    // the local baseline is unaffected by which other conditions run alongside
    let alone = run_conditions(&prep, &[Condition::Local], &cfg, &seeds, "h").unwrap();
    assert_eq!(alone.reports[0].accuracies, out.reports[0].accuracies);
}

#[test]
fn runs_repeat_exactly_serial_or_parallel() {
    let ds = generate_synthetic(&small_spec()).unwrap();
    let cfg = small_pipeline();
    let prep = prepare(&ds, &cfg).unwrap();
    let conds = [Condition::Local, Condition::Unitrans];
    let a = run_conditions(&prep, &conds, &cfg, &[0, 1, 2], "h").unwrap();
    let b = run_conditions(&prep, &conds, &cfg, &[0, 1, 2], "h").unwrap();
    let serial = PipelineConfig { parallel: false, ..cfg.clone() };
    let c = run_conditions(&prep, &conds, &serial, &[0, 1, 2], "h").unwrap();
    assert_eq!(a.reports, b.reports);
    assert_eq!(a.reports, c.reports);
    assert_eq!(a.bus.trace(), c.bus.trace());
}

#[test]
fn overlap_sweep_yields_a_report_per_point_and_condition() {
    let ds = generate_synthetic(&small_spec()).unwrap();
    let conds = [Condition::Local, Condition::Unitrans];
    let reports = sweep(&ds, SweepAxis::OverlapCount, &[50, 100, 200], &conds, &small_pipeline(), &[0], "h").unwrap();
    assert_eq!(reports.len(), 6);
    for c in conds {
        let values: Vec<usize> = reports.iter().filter(|r| r.condition == c).filter_map(|r| r.value).collect();
        assert_eq!(values, [50, 100, 200]);
    }
    assert!(reports.iter().all(|r| r.axis == Some(SweepAxis::OverlapCount) && r.wall_clock_s.is_some()));
}

#[test]
fn sweep_value_beyond_the_data_names_the_axis() {
    let ds = generate_synthetic(&small_spec()).unwrap();
    let err = sweep(&ds, SweepAxis::TaskFeatures, &[4, 99], &[Condition::Local], &small_pipeline(), &[0], "h")
        .unwrap_err()
        .to_string();
    assert!(err.contains("task_features"), "{err}");
    let err = sweep(&ds, SweepAxis::OverlapCount, &[500], &[Condition::Local], &small_pipeline(), &[0], "h")
        .unwrap_err()
        .to_string();
    assert!(err.contains("overlap_count"), "{err}");
}
