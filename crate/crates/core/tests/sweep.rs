use std::fs;

use vagus_mc::runner::{
    derive_trial_seed, plan_trials, run_sweep, run_sweep_with, SweepConfig, SUMMARY_CSV_COLUMNS,
};
use vagus_mc::*;

fn small(dir: &std::path::Path, workers: usize) -> SweepConfig {
    let mut cfg = SweepConfig {
        k1_medians: vec![1.82, 2.68, 3.67],
        trials_per_median: 2,
        master_seed: 42,
        workers: Some(workers),
        output_dir: dir.to_path_buf(),
        ..Default::default()
    };
    cfg.trial_template.t_end_s = 8.0;
    cfg
}

#[test]
fn summary_is_byte_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    run_sweep(&small(a.path(), 1)).unwrap();
    run_sweep(&small(b.path(), 3)).unwrap();
    run_sweep(&small(c.path(), 1)).unwrap();
    for f in ["summary.json", "summary.csv", "metrics.json"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f}");
        assert_eq!(x, fs::read(c.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn injected_divergence_only_changes_its_own_row() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = small(a.path(), 2);
    cfg.trials_per_median = 4;
    let clean = run_sweep(&cfg).unwrap();
    cfg.output_dir = b.path().to_path_buf();
    let faulty = run_sweep_with(&cfg, |trial, plan| {
        let mut trial = *trial;
        if (plan.median_index, plan.trial_index) == (1, 2) {
            trial.params.hh.i_ext = 1e6;
        }
        run_trial(&trial)
    })
    .unwrap();
    let mut changed = 0;
    for (x, y) in clean.trials.iter().zip(&faulty.trials) {
        if (x.plan.median_index, x.plan.trial_index) == (1, 2) {
            assert!(y.outcome.is_none());
            assert!(y.error.as_deref().unwrap().contains("neuron"));
            changed += 1;
        } else {
            assert_eq!(x, y);
        }
    }
    assert_eq!(changed, 1);
    assert_eq!(faulty.summary.rows[1].failed, 1);
    assert_eq!(faulty.summary.rows[1].trials, 3);
    assert_eq!(faulty.summary.rows[0], clean.summary.rows[0]);
}

#[test]
fn too_many_failures_is_a_sweep_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 1);
    let err = run_sweep_with(&cfg, |trial, plan| {
        let mut trial = *trial;
        if plan.trial_index == 0 {
            trial.params.hh.i_ext = 1e6;
        }
        run_trial(&trial)
    })
    .unwrap_err();
    assert!(matches!(err, Error::SweepFailure { failed: 3, total: 6 }));
    assert!(dir.path().join("manifest.json").is_file());
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn degenerate_sweep_equals_direct_trial() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), 1);
    cfg.k1_medians = vec![2.68];
    cfg.trials_per_median = 1;
    cfg.mean_to_std_ratio = f64::INFINITY;
    let out = run_sweep(&cfg).unwrap();
    let direct = run_trial(&cfg.template().with_k1(2.68).with_seed(derive_trial_seed(42, 0, 0))).unwrap();
    let row = &out.summary.rows[0];
    assert_eq!(row.mi_mean, Some(direct.metrics.mutual_information));
    assert_eq!(row.mi_std, None);
    assert_eq!(row.delay_mean_s, direct.metrics.delays.mean);
    assert_eq!(row.delay_std_s, direct.metrics.delays.std);
    assert_eq!(row.spikes_mean, Some(direct.spikes.len() as f64));
    assert_eq!(row.peaks_mean, Some(direct.ca_peaks.len() as f64));
    assert_eq!(row.releases_mean, Some(direct.releases.len() as f64));
}

#[test]
fn outputs_have_the_documented_shape() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), 1);
    cfg.write_trial_artifacts = true;
    cfg.trials_per_median = 1;
    run_sweep(&cfg).unwrap();
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_CSV_COLUMNS.join(","));
    assert_eq!(lines.count(), 3);

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    let first = metrics[0].as_object().unwrap();
    let mut keys: Vec<&str> = first.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        ["ap_count_mean", "delay_mean", "delay_std", "k1_median", "mi_mean", "mi_std", "peak_count_mean", "trials"]
    );
    for p in plan_trials(&cfg) {
        assert!(vagus_mc::runner::trial_dir(dir.path(), &p).join("manifest.json").is_file());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["trials"].as_array().unwrap().len(), 3);
}

#[test]
fn example_configs_validate() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            SweepConfig::from_path(&path).unwrap().validate().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
