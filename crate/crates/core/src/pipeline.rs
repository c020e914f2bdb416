//! One end-to-end trial: cascade, membrane, synapse, metrics.
//!
//! The stages run feed-forward. The neuron is integrated on its own fine grid
//! against `Ca_c` interpolated from the cascade grid; spikes are detected on
//! every neuron step while the stored voltage trace is decimated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{
    detect_ca_peaks, integrate_cascade, CascadeParams, CascadeState, CascadeTrajectory, PeakConfig,
};
use crate::error::{Error, Result, Stage};
use crate::metrics::{channel_metrics, ChannelMetrics};
use crate::neuron::{integrate_neuron, HhParams, HhState, SpikeDetector, VoltageDecimator, VoltageTrace};
use crate::synapse::{simulate_synapse, NtTrace, SynapseParams, SynapseState};

/// Physical constants of all three stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    #[serde(default)]
    pub cascade: CascadeParams<f64>,
    #[serde(default)]
    pub hh: HhParams<f64>,
    #[serde(default)]
    pub synapse: SynapseParams<f64>,
    #[serde(default)]
    pub peaks: PeakConfig<f64>,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            cascade: CascadeParams::default(),
            hh: HhParams::default(),
            synapse: SynapseParams::default(),
            peaks: PeakConfig::default(),
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        self.cascade.validate()?;
        self.hh.validate()?;
        self.synapse.validate()?;
        self.peaks.validate()
    }
}

/// Resolution of the stored traces. Event detection always uses the full grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StorageSettings {
    /// Keep every n-th cascade sample.
    pub cascade_every: usize,
    pub nt_dt_s: f64,
    pub voltage_coarse_ms: f64,
    /// Used within `spike_window_ms` of a spike.
    pub voltage_fine_ms: f64,
    pub spike_window_ms: f64,
}

impl Default for StorageSettings {
    fn default() -> Self {
        Self {
            cascade_every: 1,
            nt_dt_s: 1e-3,
            voltage_coarse_ms: 1.0,
            voltage_fine_ms: 0.1,
            spike_window_ms: 5.0,
        }
    }
}

/// Numerical and bookkeeping settings of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialSettings {
    pub t_end_s: f64,
    pub dt_cascade_s: f64,
    pub dt_hh_ms: f64,
    /// Seeds the vesicle-release stream.
    pub seed: u64,
    pub initial_cascade: CascadeState<f64>,
    pub initial_v_mv: f64,
    pub initial_nt_mol_per_cm3: f64,
    pub refractory_ms: f64,
    pub bin_width_s: f64,
    pub storage: StorageSettings,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self {
            t_end_s: 200.0,
            dt_cascade_s: 1e-3,
            dt_hh_ms: 0.01,
            seed: 0,
            initial_cascade: CascadeState::resting(),
            initial_v_mv: -65.0,
            initial_nt_mol_per_cm3: 0.0,
            refractory_ms: 2.0,
            bin_width_s: 1.0,
            storage: StorageSettings::default(),
        }
    }
}

/// Everything needed to run one trial.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    #[serde(default)]
    pub settings: TrialSettings,
    #[serde(default)]
    pub params: PhysicalParams,
}

fn ratio(span: f64, step: f64, what: &str) -> Result<usize> {
    let r = span / step;
    let n = r.round();
    if !(n >= 1.0) || (r - n).abs() > 1e-6 * n.max(1.0) {
        return Err(Error::Config(format!(
            "{what} ({span}) must be a positive multiple of the integration step ({step})"
        )));
    }
    Ok(n as usize)
}

impl TrialConfig {
    pub fn with_k1(mut self, k1: f64) -> Self {
        self.params.cascade.k1 = k1;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.settings.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.settings;
        let positive = [
            ("t_end_s", s.t_end_s),
            ("dt_cascade_s", s.dt_cascade_s),
            ("dt_hh_ms", s.dt_hh_ms),
            ("bin_width_s", s.bin_width_s),
            ("storage.nt_dt_s", s.storage.nt_dt_s),
        ];
        for (name, x) in positive {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {x}")));
            }
        }
        if !(s.refractory_ms >= 0.0) || !s.initial_v_mv.is_finite() {
            return Err(Error::Config("refractory_ms must be >= 0 and initial_v_mv finite".into()));
        }
        if !(s.initial_nt_mol_per_cm3 >= 0.0) {
            return Err(Error::Config("initial_nt_mol_per_cm3 must be >= 0".into()));
        }
        if s.storage.cascade_every == 0 {
            return Err(Error::Config("storage.cascade_every must be >= 1".into()));
        }
        ratio(s.storage.voltage_coarse_ms, s.dt_hh_ms, "storage.voltage_coarse_ms")?;
        ratio(s.storage.voltage_fine_ms, s.dt_hh_ms, "storage.voltage_fine_ms")?;
        if !(s.storage.spike_window_ms >= 0.0) {
            return Err(Error::Config("storage.spike_window_ms must be >= 0".into()));
        }
        s.initial_cascade.validate()?;
        self.params.validate()
    }
}

/// Traces and events of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub k1: f64,
    pub seed: u64,
    pub cascade_traj: CascadeTrajectory<f64>,
    pub voltage: VoltageTrace<f64>,
    pub nt: NtTrace<f64>,
    pub ca_peaks: Vec<f64>,
    pub spikes: Vec<f64>,
    pub releases: Vec<f64>,
    pub metrics: ChannelMetrics,
    /// MI with bin edges shifted by half a bin, kept as a diagnostic.
    pub mi_half_bin_shift: f64,
}

/// Runs cascade → membrane → synapse → metrics for one configuration.
///
/// Identical configurations give identical records. Stage failures are tagged
/// with the stage they came from.
pub fn run_trial(cfg: &TrialConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let s = &cfg.settings;
    let p = &cfg.params;
    let span = (0.0, s.t_end_s);

    let traj = integrate_cascade(&s.initial_cascade, &p.cascade, span, s.dt_cascade_s)
        .map_err(|e| e.in_stage(Stage::Cascade))?;
    let ca_peaks = detect_ca_peaks(&traj, &p.peaks);

    let fine = ratio(s.storage.voltage_fine_ms, s.dt_hh_ms, "voltage_fine_ms")?;
    let coarse = ratio(s.storage.voltage_coarse_ms, s.dt_hh_ms, "voltage_coarse_ms")?;
    let mut detector = SpikeDetector::new(p.synapse.v_th, s.refractory_ms);
    let mut decimator = VoltageDecimator::new(fine, coarse, s.storage.spike_window_ms / 1000.0);
    let mut spikes = Vec::new();
    let calcium = traj.ca_interpolator().map_err(|e| e.in_stage(Stage::Neuron))?;
    integrate_neuron(
        &calcium,
        &p.hh,
        HhState::at_rest(s.initial_v_mv),
        s.dt_hh_ms,
        span,
        |t, st| {
            let spike = detector.push(t, st.v);
            if let Some(ts) = spike {
                spikes.push(ts);
            }
            decimator.push(t, st.v, spike);
        },
    )
    .map_err(|e| e.in_stage(Stage::Neuron))?;
    let voltage = decimator.finish();

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let nt = simulate_synapse(
        &spikes,
        &p.synapse,
        SynapseState { nt: s.initial_nt_mol_per_cm3 },
        span,
        s.storage.nt_dt_s,
        &mut rng,
    )
    .map_err(|e| e.in_stage(Stage::Synapse))?;
    let releases = nt.release_times();

    let metrics = channel_metrics(&ca_peaks, &releases, span, s.bin_width_s)
        .map_err(|e| e.in_stage(Stage::Metrics))?;
    let mi_half_bin_shift = shifted_mi(&ca_peaks, &releases, span, s.bin_width_s)
        .map_err(|e| e.in_stage(Stage::Metrics))?;

    Ok(RunRecord {
        k1: p.cascade.k1,
        seed: s.seed,
        cascade_traj: traj.decimate(s.storage.cascade_every),
        voltage,
        nt,
        ca_peaks,
        spikes,
        releases,
        metrics,
        mi_half_bin_shift,
    })
}

fn shifted_mi(peaks: &[f64], releases: &[f64], span: (f64, f64), w: f64) -> Result<f64> {
    let start = span.0 + 0.5 * w;
    if start >= span.1 {
        return Ok(f64::NAN);
    }
    let keep = |v: &[f64]| v.iter().copied().filter(|&t| t >= start).collect::<Vec<_>>();
    Ok(channel_metrics(&keep(peaks), &keep(releases), (start, span.1), w)?.mutual_information)
}
