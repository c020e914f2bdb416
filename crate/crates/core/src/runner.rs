//! Monte Carlo sweeps over lognormally distributed activation rates.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{counts, write_json, write_trial_dir, EventCounts, ReferenceTargets, REFERENCE_TARGETS};
use crate::params::SWEEP_K1_MEDIANS;
use crate::pipeline::{run_trial, PhysicalParams, RunRecord, TrialConfig, TrialSettings};

/// Largest tolerated fraction of failed trials.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

mod ratio_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() && *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(f64::INFINITY)
            }
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "mean_to_std_ratio must be a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

fn default_medians() -> Vec<f64> {
    SWEEP_K1_MEDIANS.to_vec()
}

fn default_ratio() -> f64 {
    5.0
}

fn default_trials() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// Sweep definition. Mirrors the JSON config file field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_medians")]
    pub k1_medians: Vec<f64>,
    /// Mean over standard deviation of the k1 distribution; `"inf"` fixes k1
    /// at the median.
    #[serde(default = "default_ratio", with = "ratio_serde")]
    pub mean_to_std_ratio: f64,
    #[serde(default = "default_trials")]
    pub trials_per_median: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub write_trial_artifacts: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub trial_template: TrialSettings,
    #[serde(default)]
    pub params: PhysicalParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k1_medians: default_medians(),
            mean_to_std_ratio: default_ratio(),
            trials_per_median: default_trials(),
            master_seed: 0,
            workers: None,
            write_trial_artifacts: false,
            output_dir: default_output_dir(),
            trial_template: TrialSettings::default(),
            params: PhysicalParams::default(),
        }
    }
}

impl SweepConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn template(&self) -> TrialConfig {
        TrialConfig {
            settings: self.trial_template,
            params: self.params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1_medians.is_empty() {
            return Err(Error::Config("k1_medians must not be empty".into()));
        }
        if let Some(m) = self.k1_medians.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::Config(format!("k1 medians must be finite and > 0, got {m}")));
        }
        if !(self.mean_to_std_ratio > 0.0) {
            return Err(Error::Config(format!(
                "mean_to_std_ratio must be > 0, got {}",
                self.mean_to_std_ratio
            )));
        }
        if self.trials_per_median == 0 {
            return Err(Error::Config("trials_per_median must be >= 1".into()));
        }
        if self.k1_medians.len() > u32::MAX as usize || self.trials_per_median > u32::MAX as usize {
            return Err(Error::Config("sweep grid too large".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        self.template().validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })
    }
}

/// Draws an activation rate from a lognormal with the given median and
/// mean/std ratio. An infinite ratio returns the median.
pub fn sample_k1<R: Rng + ?Sized>(rng: &mut R, median: f64, mean_to_std_ratio: f64) -> f64 {
    let sigma = lognormal_sigma(mean_to_std_ratio);
    if sigma == 0.0 {
        return median;
    }
    LogNormal::new(median.ln(), sigma)
        .expect("sigma is finite and positive")
        .sample(rng)
}

/// Shape parameter giving a lognormal the requested mean/std ratio.
pub fn lognormal_sigma(mean_to_std_ratio: f64) -> f64 {
    (1.0 / (mean_to_std_ratio * mean_to_std_ratio)).ln_1p().sqrt()
}

/// SplitMix64 output function, a bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed. For a fixed master seed the map from
/// `(median_index, trial_index)` is injective: the pair is packed into one
/// word, scaled by an odd constant, offset by the master seed and mixed, and
/// every one of those steps is a bijection on `u64`.
pub fn derive_trial_seed(master_seed: u64, median_index: u32, trial_index: u32) -> u64 {
    let packed = (u64::from(median_index) << 32) | u64::from(trial_index);
    mix64(master_seed.wrapping_add(packed.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Stream of the trial RNG used for drawing k1; the synapse uses stream 0.
const K1_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrial {
    pub median_index: usize,
    pub trial_index: usize,
    pub k1_median: f64,
    pub k1: f64,
    pub seed: u64,
}

impl PlannedTrial {
    pub fn config(&self, template: &TrialConfig) -> TrialConfig {
        template.with_k1(self.k1).with_seed(self.seed)
    }
}

/// Every trial of the sweep in median-major order.
pub fn plan_trials(cfg: &SweepConfig) -> Vec<PlannedTrial> {
    let mut out = Vec::with_capacity(cfg.k1_medians.len() * cfg.trials_per_median);
    for (mi, &median) in cfg.k1_medians.iter().enumerate() {
        for ti in 0..cfg.trials_per_median {
            let seed = derive_trial_seed(cfg.master_seed, mi as u32, ti as u32);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(K1_STREAM);
            out.push(PlannedTrial {
                median_index: mi,
                trial_index: ti,
                k1_median: median,
                k1: sample_k1(&mut rng, median, cfg.mean_to_std_ratio),
                seed,
            });
        }
    }
    out
}

/// Scalar results of one successful trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub counts: EventCounts,
    pub mi: f64,
    pub mi_half_bin_shift: Option<f64>,
    pub delay_mean_s: Option<f64>,
    pub delay_std_s: Option<f64>,
    pub delays_s: Vec<f64>,
}

impl TrialOutcome {
    pub fn from_record(rec: &RunRecord) -> Self {
        let d = &rec.metrics.delays;
        Self {
            counts: counts(rec),
            mi: rec.metrics.mutual_information,
            mi_half_bin_shift: rec.mi_half_bin_shift.is_finite().then_some(rec.mi_half_bin_shift),
            delay_mean_s: d.mean,
            delay_std_s: d.std,
            delays_s: d.delays.clone(),
        }
    }
}

/// One manifest row. Exactly one of `outcome` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    #[serde(flatten)]
    pub plan: PlannedTrial,
    pub outcome: Option<TrialOutcome>,
    pub error: Option<String>,
}

/// Aggregates for one median. Means are over successful trials; delay
/// statistics pool the delays of all successful trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub k1_median: f64,
    pub trials: usize,
    pub failed: usize,
    pub mi_mean: Option<f64>,
    /// Sample standard deviation of per-trial MI.
    pub mi_std: Option<f64>,
    pub delay_mean_s: Option<f64>,
    pub delay_std_s: Option<f64>,
    pub delay_count: usize,
    pub spikes_mean: Option<f64>,
    pub peaks_mean: Option<f64>,
    pub releases_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    #[serde(with = "ratio_serde")]
    pub mean_to_std_ratio: f64,
    pub trials_per_median: usize,
    pub master_seed: u64,
    pub failed_trials: usize,
    pub rows: Vec<SummaryRow>,
    pub reference_targets: ReferenceTargets,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub summary: SweepSummary,
    pub trials: Vec<TrialRow>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    (xs.len() > 1).then(|| {
        (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    })
}

fn summarize(k1_median: f64, rows: &[&TrialRow]) -> SummaryRow {
    let ok: Vec<&TrialOutcome> = rows.iter().filter_map(|r| r.outcome.as_ref()).collect();
    let col = |f: &dyn Fn(&TrialOutcome) -> f64| ok.iter().map(|o| f(o)).collect::<Vec<_>>();
    let mis = col(&|o| o.mi);
    let delays: Vec<f64> = ok.iter().flat_map(|o| o.delays_s.iter().copied()).collect();
    SummaryRow {
        k1_median,
        trials: ok.len(),
        failed: rows.len() - ok.len(),
        mi_mean: mean(&mis),
        mi_std: sample_std(&mis),
        delay_mean_s: mean(&delays),
        delay_std_s: sample_std(&delays),
        delay_count: delays.len(),
        spikes_mean: mean(&col(&|o| o.counts.spikes as f64)),
        peaks_mean: mean(&col(&|o| o.counts.ca_peaks as f64)),
        releases_mean: mean(&col(&|o| o.counts.releases as f64)),
    }
}

/// Folds index-ordered trial rows into the sweep summary.
pub fn aggregate(cfg: &SweepConfig, trials: &[TrialRow]) -> SweepSummary {
    let rows = cfg
        .k1_medians
        .iter()
        .enumerate()
        .map(|(mi, &median)| {
            let group: Vec<&TrialRow> =
                trials.iter().filter(|r| r.plan.median_index == mi).collect();
            summarize(median, &group)
        })
        .collect();
    SweepSummary {
        mean_to_std_ratio: cfg.mean_to_std_ratio,
        trials_per_median: cfg.trials_per_median,
        master_seed: cfg.master_seed,
        failed_trials: trials.iter().filter(|r| r.error.is_some()).count(),
        rows,
        reference_targets: REFERENCE_TARGETS,
    }
}

pub fn trial_dir(output_dir: &Path, plan: &PlannedTrial) -> PathBuf {
    output_dir
        .join("trials")
        .join(format!("m{:02}_t{:04}", plan.median_index, plan.trial_index))
}

/// Runs every trial with `run_trial` and writes the sweep outputs.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    run_sweep_with(cfg, |trial, _| run_trial(trial))
}

/// Like [`run_sweep`] with a custom trial executor.
///
/// Trials run on a pool of `cfg.workers` threads and are collected in plan
/// order, so results do not depend on the worker count. Failed trials are
/// recorded in the manifest and left out of the aggregates. When more than
/// 10% of trials fail, the manifest is still written and
/// [`Error::SweepFailure`] is returned.
pub fn run_sweep_with<F>(cfg: &SweepConfig, exec: F) -> Result<SweepOutcome>
where
    F: Fn(&TrialConfig, &PlannedTrial) -> Result<RunRecord> + Sync,
{
    cfg.validate()?;
    let started = Instant::now();
    let template = cfg.template();
    let plan = plan_trials(cfg);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    std::fs::create_dir_all(&cfg.output_dir)?;
    let trials: Vec<TrialRow> = pool.install(|| {
        plan.par_iter()
            .map(|p| run_one(cfg, &template, p, &exec))
            .collect()
    });

    let summary = aggregate(cfg, &trials);
    write_json(
        &cfg.output_dir.join("manifest.json"),
        &SweepManifest {
            config: cfg,
            wall_time_s: started.elapsed().as_secs_f64(),
            trials: &trials,
        },
    )?;
    let failed = summary.failed_trials;
    let total = trials.len();
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::SweepFailure { failed, total });
    }
    write_summary(&cfg.output_dir, &summary)?;
    Ok(SweepOutcome { summary, trials })
}

fn run_one<F>(cfg: &SweepConfig, template: &TrialConfig, plan: &PlannedTrial, exec: &F) -> TrialRow
where
    F: Fn(&TrialConfig, &PlannedTrial) -> Result<RunRecord> + Sync,
{
    let trial_cfg = plan.config(template);
    let started = Instant::now();
    let result = exec(&trial_cfg, plan).and_then(|rec| {
        if cfg.write_trial_artifacts {
            let wall = started.elapsed().as_secs_f64();
            write_trial_dir(&trial_dir(&cfg.output_dir, plan), &trial_cfg, &rec, wall)?;
        }
        Ok(TrialOutcome::from_record(&rec))
    });
    match result {
        Ok(outcome) => TrialRow { plan: *plan, outcome: Some(outcome), error: None },
        Err(e) => TrialRow { plan: *plan, outcome: None, error: Some(e.to_string()) },
    }
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    config: &'a SweepConfig,
    wall_time_s: f64,
    trials: &'a [TrialRow],
}

/// Row of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsExport {
    pub k1_median: f64,
    pub trials: usize,
    pub mi_mean: Option<f64>,
    pub mi_std: Option<f64>,
    pub delay_mean: Option<f64>,
    pub delay_std: Option<f64>,
    pub ap_count_mean: Option<f64>,
    pub peak_count_mean: Option<f64>,
}

impl From<&SummaryRow> for MetricsExport {
    fn from(r: &SummaryRow) -> Self {
        Self {
            k1_median: r.k1_median,
            trials: r.trials,
            mi_mean: r.mi_mean,
            mi_std: r.mi_std,
            delay_mean: r.delay_mean_s,
            delay_std: r.delay_std_s,
            ap_count_mean: r.spikes_mean,
            peak_count_mean: r.peaks_mean,
        }
    }
}

pub const SUMMARY_CSV_COLUMNS: [&str; 8] = [
    "k1_median",
    "mi_mean",
    "mi_std",
    "delay_mean_s",
    "delay_std_s",
    "spikes_mean",
    "peaks_mean",
    "releases_mean",
];

/// Writes `summary.json`, `summary.csv` and `metrics.json`.
pub fn write_summary(dir: &Path, summary: &SweepSummary) -> Result<()> {
    write_json(&dir.join("summary.json"), summary)?;
    let exports: Vec<MetricsExport> = summary.rows.iter().map(MetricsExport::from).collect();
    write_json(&dir.join("metrics.json"), &exports)?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(SUMMARY_CSV_COLUMNS)?;
    let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &summary.rows {
        w.write_record([
            r.k1_median.to_string(),
            cell(r.mi_mean),
            cell(r.mi_std),
            cell(r.delay_mean_s),
            cell(r.delay_std_s),
            cell(r.spikes_mean),
            cell(r.peaks_mean),
            cell(r.releases_mean),
        ])?;
    }
    w.flush()?;
    Ok(())
}
