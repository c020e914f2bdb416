//! Simulator for a gut-to-brain molecular communication channel.
//!
//! A short-chain fatty acid signal activates a G-protein coupled receptor,
//! which drives cytosolic calcium oscillations ([`cascade`]). Calcium gates a
//! potassium current in a Hodgkin-Huxley membrane ([`neuron`]); spikes
//! trigger binomial vesicle release into the synaptic cleft ([`synapse`]).
//! [`metrics`] scores how well release events track calcium peaks, and
//! [`runner`] runs Monte Carlo sweeps over the receptor activation rate.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`). The
//! end-to-end pipeline and the sweep runner work in `f64`; the aliases below
//! name the `f64` instantiations.

pub mod cascade;
pub mod error;
pub mod io;
pub mod metrics;
pub mod neuron;
pub mod num;
pub mod ode;
pub mod params;
pub mod pipeline;
pub mod runner;
pub mod synapse;

pub use cascade::{
    cascade_rhs, detect_ca_peaks, integrate_cascade, CaInterpolator, CascadeParams, CascadeState,
    CascadeTrajectory, PeakConfig,
};
pub use error::{Error, Result, Stage};
pub use metrics::{
    binarize_events, channel_metrics, compute_delays, entropy, joint_probabilities,
    mutual_information, BinarySequence, ChannelMetrics, DelayStats, JointTable,
};
pub use neuron::{
    detect_spikes, gating_rates, hh_rhs, ionic_currents, simulate_neuron, GatingRates, HhParams,
    HhState, IonicCurrents, SpikeDetector, VoltageTrace,
};
pub use num::Real;
pub use pipeline::{run_trial, PhysicalParams, RunRecord, StorageSettings, TrialConfig, TrialSettings};
pub use runner::{
    derive_trial_seed, run_sweep, run_sweep_with, sample_k1, SummaryRow, SweepConfig, SweepOutcome,
    SweepSummary,
};
pub use synapse::{simulate_synapse, NtTrace, ReleaseEvent, SynapseParams, SynapseState};

pub type CascadeParams64 = CascadeParams<f64>;
pub type CascadeState64 = CascadeState<f64>;
pub type CascadeTrajectory64 = CascadeTrajectory<f64>;
pub type PeakConfig64 = PeakConfig<f64>;
pub type HhParams64 = HhParams<f64>;
pub type HhState64 = HhState<f64>;
pub type VoltageTrace64 = VoltageTrace<f64>;
pub type SynapseParams64 = SynapseParams<f64>;
pub type SynapseState64 = SynapseState<f64>;
pub type NtTrace64 = NtTrace<f64>;
pub type BinarySequence64 = BinarySequence<f64>;
pub type JointTable64 = JointTable<f64>;
pub type DelayStats64 = DelayStats<f64>;

pub type CascadeParams32 = CascadeParams<f32>;
pub type CascadeState32 = CascadeState<f32>;
pub type HhParams32 = HhParams<f32>;
pub type HhState32 = HhState<f32>;
