//! Neurotransmitter concentration in the synaptic cleft.
//!
//! Between spikes the concentration decays as `nt · exp(−Δt/τ_rec)`, applied in
//! closed form. Each spike draws `k ~ Binomial(N, p)` vesicles and raises the
//! concentration by `k · NT_ves / V_syn`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::ode::step_count;

/// Vesicle release parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynapseParams<T> {
    /// Releasable vesicles per spike, `N`.
    pub n_vesicles: u32,
    /// Neurotransmitter per vesicle (mol).
    #[serde(rename = "nt_per_vesicle_mol")]
    pub nt_per_vesicle: T,
    /// Cleft volume (cm³).
    #[serde(rename = "v_syn_cm3")]
    pub v_syn: T,
    /// Per-vesicle release probability (written `p_nt` or `p_mvr`).
    pub p_release: T,
    /// Reuptake time constant (ms).
    #[serde(rename = "tau_rec_ms")]
    pub tau_rec: T,
    /// Action potential threshold (mV).
    #[serde(rename = "v_th_mv")]
    pub v_th: T,
}

impl<T: Real> Default for SynapseParams<T> {
    fn default() -> Self {
        Self {
            n_vesicles: 100,
            nt_per_vesicle: T::lit(1e-6),
            v_syn: T::lit(1e-18),
            p_release: T::lit(0.5),
            tau_rec: T::lit(10.0),
            v_th: T::lit(20.0),
        }
    }
}

impl<T: Real> SynapseParams<T> {
    pub fn validate(&self) -> Result<()> {
        let p = self.p_release;
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::InvalidParams(format!(
                "p_release must lie in [0, 1], got {p}"
            )));
        }
        if !(self.tau_rec > T::zero()) || !self.tau_rec.is_finite() {
            return Err(Error::InvalidParams("tau_rec must be > 0".into()));
        }
        if !(self.v_syn > T::zero()) || !self.v_syn.is_finite() {
            return Err(Error::InvalidParams("v_syn must be > 0".into()));
        }
        if !(self.nt_per_vesicle >= T::zero()) || !self.nt_per_vesicle.is_finite() {
            return Err(Error::InvalidParams("nt_per_vesicle must be >= 0".into()));
        }
        if !self.v_th.is_finite() {
            return Err(Error::InvalidParams("v_th must be finite".into()));
        }
        Ok(())
    }

    fn tau_seconds(&self) -> T {
        self.tau_rec / T::lit(1000.0)
    }
}

/// Cleft concentration (mol/cm³).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SynapseState<T> {
    pub nt: T,
}

/// Outcome of one spike-triggered draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleaseEvent<T> {
    pub time: T,
    pub vesicles_released: u32,
    /// mol/cm³
    pub delta_nt: T,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NtTrace<T> {
    pub times: Vec<T>,
    pub nt: Vec<T>,
    /// Every spike-triggered draw, including those that released nothing.
    pub events: Vec<ReleaseEvent<T>>,
}

impl<T: Real> NtTrace<T> {
    /// Times of draws that released at least one vesicle.
    pub fn release_times(&self) -> Vec<T> {
        self.events
            .iter()
            .filter(|e| e.vesicles_released >= 1)
            .map(|e| e.time)
            .collect()
    }
}

/// One `Binomial(n_vesicles, p_release)` draw.
pub fn sample_vesicles<T: Real, R: Rng + ?Sized>(rng: &mut R, params: &SynapseParams<T>) -> u32 {
    let p = params.p_release.as_f64().clamp(0.0, 1.0);
    let dist = Binomial::new(u64::from(params.n_vesicles), p).expect("p validated to [0, 1]");
    dist.sample(rng) as u32
}

/// Concentration jump for `k` released vesicles.
#[inline]
pub fn delta_nt<T: Real>(k: u32, params: &SynapseParams<T>) -> T {
    T::lit(f64::from(k)) * params.nt_per_vesicle / params.v_syn
}

/// Runs the cleft model over `t_span`, sampling the concentration every `dt`
/// seconds. Sample values are taken after any event at the same instant.
pub fn simulate_synapse<T: Real, R: Rng + ?Sized>(
    spike_times: &[T],
    params: &SynapseParams<T>,
    initial: SynapseState<T>,
    t_span: (T, T),
    dt: T,
    rng: &mut R,
) -> Result<NtTrace<T>> {
    params.validate()?;
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::InvalidParams(format!(
            "invalid synapse time span ({t0}, {t1})"
        )));
    }
    if !(initial.nt >= T::zero()) {
        return Err(Error::InvalidState("initial nt must be >= 0".into()));
    }
    if spike_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Ordering("spike times must be sorted".into()));
    }
    if spike_times.iter().any(|&s| s < t0 || s > t1) {
        return Err(Error::InvalidParams("spike time outside time span".into()));
    }
    let n = step_count(t1 - t0, dt)
        .ok_or_else(|| Error::InvalidParams(format!("synapse sampling step {dt} invalid")))?;

    let tau = params.tau_seconds();
    let mut nt = initial.nt;
    let mut t_last = t0;
    let mut spikes = spike_times.iter().copied().peekable();
    let mut trace = NtTrace {
        times: Vec::with_capacity(n + 1),
        nt: Vec::with_capacity(n + 1),
        events: Vec::with_capacity(spike_times.len()),
    };
    for i in 0..=n {
        let t = t0 + T::lit(i as f64) * dt;
        while let Some(&ts) = spikes.peek() {
            if ts > t && i < n {
                break;
            }
            spikes.next();
            nt = nt * (-(ts - t_last) / tau).exp();
            t_last = ts;
            let k = sample_vesicles(rng, params);
            let delta = delta_nt(k, params);
            nt = nt + delta;
            trace.events.push(ReleaseEvent {
                time: ts,
                vesicles_released: k,
                delta_nt: delta,
            });
        }
        trace.times.push(t);
        trace.nt.push(nt * (-(t - t_last) / tau).exp());
    }
    Ok(trace)
}
