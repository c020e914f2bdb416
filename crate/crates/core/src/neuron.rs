//! Hodgkin-Huxley membrane with a calcium-activated potassium current.
//!
//! Voltages are in mV, conductances in mS/cm², currents in µA/cm². The gating
//! rates are per millisecond; the integrator runs on a seconds clock and scales
//! the membrane right-hand side by 1000 at that boundary.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cascade::{CaInterpolator, CascadeTrajectory};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::ode::{rk4_step, step_count};

/// Membrane potential bounds outside which a run is treated as diverged (mV).
pub const VOLTAGE_LIMIT: f64 = 200.0;

/// Membrane parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HhParams<T> {
    /// µF/cm²
    #[serde(rename = "c_m_uf_per_cm2")]
    pub c_m: T,
    #[serde(rename = "g_na_ms_per_cm2")]
    pub g_na: T,
    #[serde(rename = "g_k_ms_per_cm2")]
    pub g_k: T,
    #[serde(rename = "g_l_ms_per_cm2")]
    pub g_l: T,
    /// Scaled by `Ca_c` in µM, used as a dimensionless factor.
    #[serde(rename = "g_cak_ms_per_cm2")]
    pub g_cak: T,
    #[serde(rename = "e_na_mv")]
    pub e_na: T,
    #[serde(rename = "e_k_mv")]
    pub e_k: T,
    #[serde(rename = "e_l_mv")]
    pub e_l: T,
    #[serde(rename = "e_cak_mv")]
    pub e_cak: T,
    /// Constant injected current (µA/cm²).
    #[serde(rename = "i_ext_ua_per_cm2")]
    pub i_ext: T,
}

impl<T: Real> Default for HhParams<T> {
    fn default() -> Self {
        Self {
            c_m: T::lit(1.0),
            g_na: T::lit(120.0),
            g_k: T::lit(36.0),
            g_l: T::lit(0.3),
            g_cak: T::lit(0.1),
            e_na: T::lit(50.0),
            e_k: T::lit(-77.0),
            e_l: T::lit(-54.387),
            e_cak: T::lit(-80.0),
            i_ext: T::lit(10.0),
        }
    }
}

impl<T: Real> HhParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c_m, self.g_na, self.g_k, self.g_l, self.g_cak, self.e_na, self.e_k, self.e_l,
            self.e_cak, self.i_ext,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("membrane parameters must be finite".into()));
        }
        if !(self.c_m > T::zero()) {
            return Err(Error::InvalidParams("c_m must be > 0".into()));
        }
        if [self.g_na, self.g_k, self.g_l, self.g_cak]
            .iter()
            .any(|g| *g < T::zero())
        {
            return Err(Error::InvalidParams("conductances must be >= 0".into()));
        }
        Ok(())
    }
}

/// Membrane potential and gating probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HhState<T> {
    pub v: T,
    pub m: T,
    pub h: T,
    pub n: T,
}

impl<T: Real> HhState<T> {
    /// Gates at their steady-state values for a fixed potential.
    pub fn at_rest(v: T) -> Self {
        let r = gating_rates(v);
        Self {
            v,
            m: r.alpha_m / (r.alpha_m + r.beta_m),
            h: r.alpha_h / (r.alpha_h + r.beta_h),
            n: r.alpha_n / (r.alpha_n + r.beta_n),
        }
    }

    /// Conventional rest: −65 mV with steady-state gates.
    pub fn resting() -> Self {
        Self::at_rest(T::lit(-65.0))
    }

    #[inline(always)]
    fn to_array(self) -> [T; 4] {
        [self.v, self.m, self.h, self.n]
    }

    #[inline(always)]
    fn from_array(a: [T; 4]) -> Self {
        Self {
            v: a[0],
            m: a[1],
            h: a[2],
            n: a[3],
        }
    }
}

/// Opening and closing rates of the three gates (1/ms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatingRates<T> {
    pub alpha_m: T,
    pub beta_m: T,
    pub alpha_h: T,
    pub beta_h: T,
    pub alpha_n: T,
    pub beta_n: T,
}

/// Below this |u| the `u / (1 − e^{−u})` factor is evaluated by its series.
const SERIES_CUTOFF: f64 = 1e-4;

/// `u / (1 − e^{−u})`, continuous through `u = 0` where it equals 1.
#[inline(always)]
fn exprel<T: Real>(u: T, exp_neg_u: T) -> T {
    if u.abs() < T::lit(SERIES_CUTOFF) {
        T::one() + u * (T::lit(0.5) + u / T::lit(12.0))
    } else {
        u / (T::one() - exp_neg_u)
    }
}

/// Voltage-dependent gate kinetics.
///
/// `α_m(−40) = 1.0` and `α_n(−55) = 0.1` are the continuous extensions through
/// the removable singularities. Three exponentials are shared across the six
/// rates.
#[inline]
pub fn gating_rates<T: Real>(v: T) -> GatingRates<T> {
    let ten = T::lit(10.0);
    let u_m = (v + T::lit(40.0)) / ten;
    let e_m = (-u_m).exp();
    let u_n = (v + T::lit(55.0)) / ten;
    // e^{-(v+55)/10} = e^{-(v+40)/10} · e^{-1.5}; e^{-(v+35)/10} = e^{-(v+40)/10} · e^{0.5}
    let e_n = e_m * T::lit((-1.5f64).exp());
    let e_bh = e_m * T::lit(0.5f64.exp());
    let d65 = v + T::lit(65.0);
    let q80 = (-d65 / T::lit(80.0)).exp();
    let q20 = {
        let q40 = q80 * q80;
        q40 * q40
    };
    GatingRates {
        alpha_m: exprel(u_m, e_m),
        beta_m: T::lit(4.0) * (-d65 / T::lit(18.0)).exp(),
        alpha_h: T::lit(0.07) * q20,
        beta_h: T::one() / (T::one() + e_bh),
        alpha_n: T::lit(0.1) * exprel(u_n, e_n),
        beta_n: T::lit(0.125) * q80,
    }
}

/// Ionic currents through each channel population (µA/cm²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonicCurrents<T> {
    pub i_na: T,
    pub i_k: T,
    pub i_l: T,
    pub i_cak: T,
}

impl<T: Real> IonicCurrents<T> {
    pub fn total(&self) -> T {
        self.i_na + self.i_k + self.i_l + self.i_cak
    }
}

#[inline(always)]
pub fn ionic_currents<T: Real>(state: &HhState<T>, ca_c: T, p: &HhParams<T>) -> IonicCurrents<T> {
    let v = state.v;
    let m3 = state.m * state.m * state.m;
    let n2 = state.n * state.n;
    IonicCurrents {
        i_na: p.g_na * m3 * state.h * (v - p.e_na),
        i_k: p.g_k * n2 * n2 * (v - p.e_k),
        i_l: p.g_l * (v - p.e_l),
        i_cak: p.g_cak * ca_c * (v - p.e_cak),
    }
}

/// Membrane and gate derivatives per millisecond.
#[inline(always)]
pub fn hh_rhs<T: Real>(state: &HhState<T>, ca_c: T, p: &HhParams<T>) -> HhState<T> {
    let r = gating_rates(state.v);
    let i = ionic_currents(state, ca_c, p);
    let one = T::one();
    HhState {
        v: (p.i_ext - i.total()) / p.c_m,
        m: r.alpha_m * (one - state.m) - r.beta_m * state.m,
        h: r.alpha_h * (one - state.h) - r.beta_h * state.h,
        n: r.alpha_n * (one - state.n) - r.beta_n * state.n,
    }
}

#[inline(always)]
fn rhs_per_second<T: Real>(y: &[T; 4], ca_c: T, p: &HhParams<T>) -> [T; 4] {
    let d = hh_rhs(&HhState::from_array(*y), ca_c, p).to_array();
    let k = T::lit(1000.0);
    [d[0] * k, d[1] * k, d[2] * k, d[3] * k]
}

/// Sampled membrane potential.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoltageTrace<T> {
    /// Seconds.
    pub times: Vec<T>,
    /// mV.
    pub v: Vec<T>,
}

impl<T: Real> VoltageTrace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: T, v: T) {
        self.times.push(t);
        self.v.push(v);
    }
}

/// Calcium drive read by the membrane integrator.
pub trait CalciumInput<T> {
    fn ca_c(&self, t: T) -> T;
}

impl<T: Real> CalciumInput<T> for CaInterpolator<'_, T> {
    #[inline(always)]
    fn ca_c(&self, t: T) -> T {
        self.at(t)
    }
}

/// Integrates the membrane with fixed-step RK4, calling `observe(t, state)`
/// on every step including the initial state.
///
/// Gates are clamped to `[0, 1]` after each step. `dt_hh` is in ms, times in s.
pub fn integrate_neuron<T, C, F>(
    calcium: &C,
    params: &HhParams<T>,
    initial: HhState<T>,
    dt_hh_ms: T,
    t_span: (T, T),
    mut observe: F,
) -> Result<HhState<T>>
where
    T: Real,
    C: CalciumInput<T>,
    F: FnMut(T, &HhState<T>),
{
    params.validate()?;
    let (t0, t1) = t_span;
    if !t0.is_finite() || !t1.is_finite() || t1 <= t0 {
        return Err(Error::InvalidParams(format!(
            "invalid neuron time span ({t0}, {t1})"
        )));
    }
    let dt = dt_hh_ms / T::lit(1000.0);
    let n = step_count(t1 - t0, dt)
        .ok_or_else(|| Error::InvalidParams(format!("neuron step {dt_hh_ms} ms invalid")))?;
    let limit = T::lit(VOLTAGE_LIMIT);
    let half = T::lit(0.5) * dt;
    let (zero, one) = (T::zero(), T::one());

    let mut y = initial.to_array();
    observe(t0, &initial);
    let mut ca_now = calcium.ca_c(t0);
    for i in 0..n {
        let t = t0 + T::lit(i as f64) * dt;
        let t_next = t0 + T::lit((i + 1) as f64) * dt;
        let ca_mid = calcium.ca_c(t + half);
        let ca_next = calcium.ca_c(t_next);
        // RK4 stage times are t, t + dt/2 (twice) and t + dt.
        let mut stage = 0u8;
        y = rk4_step(
            |_, y: &[T; 4]| {
                let ca = match stage {
                    0 => ca_now,
                    1 | 2 => ca_mid,
                    _ => ca_next,
                };
                stage += 1;
                rhs_per_second(y, ca, params)
            },
            t,
            &y,
            dt,
        );
        ca_now = ca_next;
        y[1] = y[1].max(zero).min(one);
        y[2] = y[2].max(zero).min(one);
        y[3] = y[3].max(zero).min(one);
        if !y[0].is_finite() || y[0].abs() > limit {
            return Err(Error::Divergence {
                time: t_next.as_f64(),
                detail: format!("membrane potential left ±{VOLTAGE_LIMIT} mV: {}", y[0]),
            });
        }
        observe(t_next, &HhState::from_array(y));
    }
    Ok(HhState::from_array(y))
}

/// Co-simulates the membrane against a cascade trajectory and keeps every step.
///
/// `Ca_c` is linearly interpolated from the (coarser) cascade grid.
pub fn simulate_neuron<T: Real>(
    ca_traj: &CascadeTrajectory<T>,
    params: &HhParams<T>,
    dt_hh_ms: T,
    t_span: (T, T),
) -> Result<VoltageTrace<T>> {
    if ca_traj.is_empty() || ca_traj.t_start() > t_span.0 || ca_traj.t_end() < t_span.1 {
        return Err(Error::InvalidParams(
            "calcium trajectory does not cover the neuron time span".into(),
        ));
    }
    let ca = ca_traj.ca_interpolator()?;
    let mut trace = VoltageTrace::default();
    integrate_neuron(&ca, params, HhState::resting(), dt_hh_ms, t_span, |t, s| {
        trace.push(t, s.v)
    })?;
    Ok(trace)
}

/// Streaming upward threshold-crossing detector with a refractory window.
///
/// Crossing times are linearly interpolated between the bracketing samples.
#[derive(Debug, Clone)]
pub struct SpikeDetector<T> {
    v_th: T,
    refractory_s: T,
    prev: Option<(T, T)>,
    last_spike: Option<T>,
}

impl<T: Real> SpikeDetector<T> {
    pub fn new(v_th: T, refractory_ms: T) -> Self {
        Self {
            v_th,
            refractory_s: refractory_ms / T::lit(1000.0),
            prev: None,
            last_spike: None,
        }
    }

    /// Feeds one sample; returns the spike time if this sample completes a crossing.
    #[inline]
    pub fn push(&mut self, t: T, v: T) -> Option<T> {
        let prev = self.prev.replace((t, v));
        let (t0, v0) = prev?;
        if !(v0 < self.v_th && v >= self.v_th) {
            return None;
        }
        let frac = (self.v_th - v0) / (v - v0);
        let ts = t0 + frac * (t - t0);
        if let Some(last) = self.last_spike {
            if ts - last < self.refractory_s {
                return None;
            }
        }
        self.last_spike = Some(ts);
        Some(ts)
    }
}

/// Spike times (s) at upward crossings of `v_th`, ignoring crossings within
/// `refractory_ms` of the previous recorded spike.
pub fn detect_spikes<T: Real>(trace: &VoltageTrace<T>, v_th: T, refractory_ms: T) -> Vec<T> {
    let mut det = SpikeDetector::new(v_th, refractory_ms);
    trace
        .times
        .iter()
        .zip(&trace.v)
        .filter_map(|(&t, &v)| det.push(t, v))
        .collect()
}

/// Keeps a coarse voltage grid everywhere and a fine grid within `window`
/// of any detected spike.
///
/// Samples are held for one window before being committed, so that the fine
/// region before a spike is still available when the spike is detected.
#[derive(Debug)]
pub struct VoltageDecimator<T> {
    fine_every: usize,
    coarse_every: usize,
    window: T,
    step: usize,
    pending: VecDeque<(T, T, bool)>,
    recent_spikes: VecDeque<T>,
    out: VoltageTrace<T>,
}

impl<T: Real> VoltageDecimator<T> {
    /// `fine_every`/`coarse_every` are in integrator steps; `window_s` in seconds.
    pub fn new(fine_every: usize, coarse_every: usize, window_s: T) -> Self {
        Self {
            fine_every: fine_every.max(1),
            coarse_every: coarse_every.max(1),
            window: window_s,
            step: 0,
            pending: VecDeque::new(),
            recent_spikes: VecDeque::new(),
            out: VoltageTrace::default(),
        }
    }

    #[inline]
    pub fn push(&mut self, t: T, v: T, spike: Option<T>) {
        if let Some(ts) = spike {
            self.recent_spikes.push_back(ts);
        }
        let step = self.step;
        self.step += 1;
        if step % self.fine_every == 0 || step % self.coarse_every == 0 {
            self.pending.push_back((t, v, step % self.coarse_every == 0));
        }
        while let Some(&(ts, _, _)) = self.pending.front() {
            if ts < t - self.window {
                let s = self.pending.pop_front().expect("front exists");
                self.commit(s);
            } else {
                break;
            }
        }
    }

    fn commit(&mut self, (t, v, coarse): (T, T, bool)) {
        while let Some(&s) = self.recent_spikes.front() {
            if s < t - self.window {
                self.recent_spikes.pop_front();
            } else {
                break;
            }
        }
        let near_spike = self
            .recent_spikes
            .iter()
            .any(|&s| (s - t).abs() <= self.window);
        if coarse || near_spike {
            self.out.push(t, v);
        }
    }

    pub fn finish(mut self) -> VoltageTrace<T> {
        while let Some(s) = self.pending.pop_front() {
            self.commit(s);
        }
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{CascadeState, CascadeTrajectory};

    fn zero_calcium(t_end: f64) -> CascadeTrajectory<f64> {
        CascadeTrajectory {
            times: vec![0.0, t_end],
            states: vec![CascadeState::default(); 2],
        }
    }

    #[test]
    fn special_points_match_declared_values() {
        assert_eq!(gating_rates(-40.0f64).alpha_m, 1.0);
        assert_eq!(gating_rates(-55.0f64).alpha_n, 0.1);
        let r = gating_rates(-65.0f64);
        assert_eq!(r.beta_m, 4.0);
        assert_eq!(r.alpha_h, 0.07);
        assert_eq!(r.beta_n, 0.125);
    }

    #[test]
    fn rates_continuous_across_singularities() {
        for d in [1e-6, -1e-6, 1e-3, -1e-3] {
            assert!((gating_rates::<f64>(-40.0 + d).alpha_m - 1.0).abs() < 1e-3);
            assert!((gating_rates::<f64>(-55.0 + d).alpha_n - 0.1).abs() < 1e-4);
        }
        // Either side of the series cutoff agrees with the closed form.
        let direct = |v: f64| 0.1 * (v + 40.0) / (1.0 - (-(v + 40.0) / 10.0).exp());
        for v in [-40.0011, -39.9989, -40.002, -35.0, -80.0] {
            assert!((gating_rates(v).alpha_m - direct(v)).abs() < 1e-10, "v={v}");
        }
    }

    #[test]
    fn zero_driving_force_and_zero_calcium() {
        let p = HhParams::<f64>::default();
        let s = HhState { v: 50.0, m: 0.7, h: 0.3, n: 0.4 };
        assert_eq!(ionic_currents(&s, 1.0, &p).i_na, 0.0);
        assert_eq!(ionic_currents(&HhState::resting(), 0.0, &p).i_cak, 0.0);
        let at_leak = HhState { v: -54.387, ..HhState::resting() };
        assert_eq!(ionic_currents(&at_leak, 0.3, &p).i_l, 0.0);
    }

    #[test]
    fn blocked_channels_leave_only_injected_current() {
        let p = HhParams::<f64>::default();
        let s = HhState { v: p.e_l, m: 1.0, h: 0.0, n: 0.0 };
        assert_eq!(hh_rhs(&s, 0.0, &p).v, p.i_ext / p.c_m);
    }

    #[test]
    fn steady_state_gate_is_stationary() {
        let p = HhParams::<f64>::default();
        for v in [-80.0, -65.0, -40.0, 0.0, 30.0] {
            let s = HhState::at_rest(v);
            let d = hh_rhs(&s, 0.0, &p);
            assert!(d.m.abs() < 1e-12 && d.h.abs() < 1e-12 && d.n.abs() < 1e-12);
        }
    }

    #[test]
    fn spike_detection_edge_cases() {
        let flat = VoltageTrace { times: vec![0.0, 1.0, 2.0], v: vec![-65.0; 3] };
        assert!(detect_spikes(&flat, 20.0, 2.0).is_empty());
        let times: Vec<f64> = (0..=60).map(|i| i as f64 * 0.1).collect();
        let v = times.iter().map(|t| -10.0 + 10.0 * t).collect();
        let spikes = detect_spikes(&VoltageTrace { times, v }, 20.0, 2.0);
        assert_eq!(spikes.len(), 1);
        assert!((spikes[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn refractory_window_suppresses_recrossing() {
        // Crossings at 0.5 ms and 1.5 ms; the second is within 2 ms.
        let times: Vec<f64> = vec![0.0, 0.001, 0.0012, 0.002, 0.004, 0.0045, 0.005];
        let v = vec![0.0, 40.0, 10.0, 40.0, 0.0, 0.0, 40.0];
        let spikes = detect_spikes(&VoltageTrace { times, v }, 20.0, 2.0);
        assert_eq!(spikes.len(), 2);
        assert!((spikes[0] - 0.0005).abs() < 1e-12);
        assert!((spikes[1] - 0.00475).abs() < 1e-12);
    }

    #[test]
    fn classical_model_fires_tonically() {
        let trace = simulate_neuron(&zero_calcium(0.5), &HhParams::default(), 0.01, (0.0, 0.5))
            .unwrap();
        let spikes = detect_spikes(&trace, 20.0, 2.0);
        assert!(spikes.len() > 20, "{} spikes", spikes.len());
    }

    #[test]
    fn calcium_input_ignored_without_cak_conductance() {
        let p = HhParams { g_cak: 0.0, ..HhParams::default() };
        let mut hi = zero_calcium(0.2);
        hi.states[0].ca_c = 5.0;
        hi.states[1].ca_c = 3.0;
        let a = simulate_neuron(&zero_calcium(0.2), &p, 0.01, (0.0, 0.2)).unwrap();
        let b = simulate_neuron(&hi, &p, 0.01, (0.0, 0.2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_outside_voltage_window() {
        let p = HhParams { i_ext: 1e7, ..HhParams::default() };
        let err = simulate_neuron(&zero_calcium(0.1), &p, 0.01, (0.0, 0.1)).unwrap_err();
        assert!(err.is_divergence());
    }

    #[test]
    fn uncovered_span_rejected() {
        let r = simulate_neuron(&zero_calcium(0.1), &HhParams::default(), 0.01, (0.0, 0.2));
        assert!(matches!(r, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn decimator_keeps_fine_window_around_spikes() {
        // 10 µs steps, fine every 10 (0.1 ms), coarse every 100 (1 ms), window 0.5 ms.
        let mut dec = VoltageDecimator::new(10, 100, 0.0005);
        for i in 0..1000usize {
            let t = i as f64 * 1e-5;
            let spike = (i == 505).then_some(t);
            dec.push(t, i as f64, spike);
        }
        let out = dec.finish();
        assert!(out.times.windows(2).all(|w| w[1] > w[0]));
        let fine: Vec<f64> = out
            .times
            .iter()
            .copied()
            .filter(|t| (t - 5.05e-3).abs() <= 5e-4 + 1e-12)
            .collect();
        assert_eq!(fine.len(), 10);
        let coarse = out.times.iter().filter(|t| (*t - 5.05e-3).abs() > 5e-4 + 1e-12).count();
        assert_eq!(coarse, 9);
    }
}
