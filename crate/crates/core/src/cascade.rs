//! SCFA-GPCR intracellular calcium cascade.
//!
//! Four coupled species: activated G-protein alpha subunit, phospholipase C,
//! cytosolic calcium and ER calcium. Time is in seconds, concentrations in µM.
//!
//! ```text
//! dGα/dt    = k1 + k2·Gα − k3·PLC·Gα/(Gα + k4) − k5·Ca_c·Gα/(Gα + k6)
//! dPLC/dt   = k7·Gα − k8·PLC/(PLC + k9)
//! dCa_c/dt  = k10·Ca_c·PLC·Ca_ER/(Ca_ER + k11) + k12·PLC + k13·Gα
//!             − k14·Ca_c/(Ca_c + k15) − k16·Ca_c/(Ca_c + k17)
//! dCa_ER/dt = −k10·Ca_c·PLC·Ca_ER/(Ca_ER + k11) + k16·Ca_c/(Ca_c + k17)
//! ```

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::ode::{rk4_step, step_count};

/// Undershoot below zero that is silently clamped after each step (µM).
pub const NEGATIVITY_TOLERANCE: f64 = 1e-9;

/// Rate constants of the cascade.
///
/// `k4`, `k6`, `k9`, `k11`, `k15` and `k17` are Michaelis constants (µM);
/// the remaining entries are rates whose units follow from their term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeParams<T> {
    /// GPCR activation: production rate of Gα (µM/s).
    #[serde(rename = "k1_um_per_s")]
    pub k1: T,
    /// Gα autocatalysis (1/s).
    #[serde(rename = "k2_per_s")]
    pub k2: T,
    /// Gα inactivation by PLC (1/s).
    #[serde(rename = "k3_per_s")]
    pub k3: T,
    #[serde(rename = "k4_um")]
    pub k4: T,
    /// Gα inactivation by cytosolic calcium (1/s).
    #[serde(rename = "k5_per_s")]
    pub k5: T,
    #[serde(rename = "k6_um")]
    pub k6: T,
    /// PLC synthesis driven by Gα (1/s).
    #[serde(rename = "k7_per_s")]
    pub k7: T,
    /// PLC degradation (µM/s).
    #[serde(rename = "k8_um_per_s")]
    pub k8: T,
    #[serde(rename = "k9_um")]
    pub k9: T,
    /// Calcium-induced calcium release from the ER (1/(µM·s)).
    #[serde(rename = "k10_per_um_s")]
    pub k10: T,
    #[serde(rename = "k11_um")]
    pub k11: T,
    /// PLC-driven calcium influx (1/s).
    #[serde(rename = "k12_per_s")]
    pub k12: T,
    /// Gα-driven calcium influx (1/s).
    #[serde(rename = "k13_per_s")]
    pub k13: T,
    /// Plasma-membrane calcium extrusion (µM/s).
    #[serde(rename = "k14_um_per_s")]
    pub k14: T,
    #[serde(rename = "k15_um")]
    pub k15: T,
    /// SERCA re-uptake into the ER (µM/s).
    #[serde(rename = "k16_um_per_s")]
    pub k16: T,
    #[serde(rename = "k17_um")]
    pub k17: T,
}

/// The bundled parameter set (see [`crate::params`]).
impl<T: Real> Default for CascadeParams<T> {
    fn default() -> Self {
        crate::params::default_cascade_params().cast()
    }
}

impl<T: Real> CascadeParams<T> {
    fn as_array(&self) -> [T; 17] {
        [
            self.k1, self.k2, self.k3, self.k4, self.k5, self.k6, self.k7, self.k8, self.k9,
            self.k10, self.k11, self.k12, self.k13, self.k14, self.k15, self.k16, self.k17,
        ]
    }

    /// Checks finiteness, non-negativity and strictly positive Michaelis constants.
    pub fn validate(&self) -> Result<()> {
        for (i, k) in self.as_array().iter().enumerate() {
            if !k.is_finite() || *k < T::zero() {
                return Err(Error::InvalidParams(format!(
                    "cascade k{} must be finite and >= 0, got {}",
                    i + 1,
                    k
                )));
            }
        }
        for (name, k) in [
            ("k4", self.k4),
            ("k6", self.k6),
            ("k9", self.k9),
            ("k11", self.k11),
            ("k15", self.k15),
            ("k17", self.k17),
        ] {
            if !(k > T::zero()) {
                return Err(Error::InvalidParams(format!(
                    "cascade {name} is a Michaelis constant and must be > 0"
                )));
            }
        }
        Ok(())
    }

    /// Returns a copy with a different GPCR activation rate.
    pub fn with_k1(mut self, k1: T) -> Self {
        self.k1 = k1;
        self
    }

    pub fn cast<U: Real>(&self) -> CascadeParams<U> {
        let c = |x: T| U::lit(x.as_f64());
        CascadeParams {
            k1: c(self.k1),
            k2: c(self.k2),
            k3: c(self.k3),
            k4: c(self.k4),
            k5: c(self.k5),
            k6: c(self.k6),
            k7: c(self.k7),
            k8: c(self.k8),
            k9: c(self.k9),
            k10: c(self.k10),
            k11: c(self.k11),
            k12: c(self.k12),
            k13: c(self.k13),
            k14: c(self.k14),
            k15: c(self.k15),
            k16: c(self.k16),
            k17: c(self.k17),
        }
    }
}

/// Concentrations of the four cascade species (µM).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeState<T> {
    #[serde(rename = "g_alpha_um")]
    pub g_alpha: T,
    #[serde(rename = "plc_um")]
    pub plc: T,
    #[serde(rename = "ca_c_um")]
    pub ca_c: T,
    #[serde(rename = "ca_er_um")]
    pub ca_er: T,
}

impl<T: Real> CascadeState<T> {
    pub fn new(g_alpha: T, plc: T, ca_c: T, ca_er: T) -> Self {
        Self {
            g_alpha,
            plc,
            ca_c,
            ca_er,
        }
    }

    /// Small positive seed with a loaded ER: (0.01, 0.01, 0.01, 1.0) µM.
    pub fn resting() -> Self {
        Self::new(T::lit(0.01), T::lit(0.01), T::lit(0.01), T::lit(1.0))
    }

    #[inline(always)]
    pub fn to_array(self) -> [T; 4] {
        [self.g_alpha, self.plc, self.ca_c, self.ca_er]
    }

    #[inline(always)]
    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidState(format!(
                "cascade state has non-finite component: {self:?}"
            )));
        }
        if self.to_array().iter().any(|x| *x < T::zero()) {
            return Err(Error::InvalidState(format!(
                "cascade concentrations must be >= 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Right-hand side of the cascade ODEs, without input validation.
#[inline(always)]
pub(crate) fn cascade_derivative<T: Real>(y: &[T; 4], p: &CascadeParams<T>) -> [T; 4] {
    let [g, plc, ca, er] = *y;
    let release = p.k10 * ca * plc * er / (er + p.k11);
    let serca = p.k16 * ca / (ca + p.k17);
    [
        p.k1 + p.k2 * g - p.k3 * g * plc / (g + p.k4) - p.k5 * g * ca / (g + p.k6),
        p.k7 * g - p.k8 * plc / (plc + p.k9),
        release + p.k12 * plc + p.k13 * g - p.k14 * ca / (ca + p.k15) - serca,
        -release + serca,
    ]
}

/// Time derivative of every species (µM/s).
pub fn cascade_rhs<T: Real>(
    state: &CascadeState<T>,
    params: &CascadeParams<T>,
) -> Result<CascadeState<T>> {
    if !state.is_finite() {
        return Err(Error::InvalidState(format!(
            "non-finite cascade state {state:?}"
        )));
    }
    if params.as_array().iter().any(|k| !k.is_finite()) {
        return Err(Error::InvalidState("non-finite cascade parameter".into()));
    }
    Ok(CascadeState::from_array(cascade_derivative(
        &state.to_array(),
        params,
    )))
}

/// Uniformly sampled cascade solution.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<CascadeState<T>>,
}

impl<T: Real> CascadeTrajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_start(&self) -> T {
        self.times[0]
    }

    pub fn t_end(&self) -> T {
        *self.times.last().expect("non-empty trajectory")
    }

    pub fn ca_c(&self) -> Vec<T> {
        self.states.iter().map(|s| s.ca_c).collect()
    }

    /// Keeps every `every`-th sample (always including the first).
    pub fn decimate(&self, every: usize) -> Self {
        let every = every.max(1);
        Self {
            times: self.times.iter().copied().step_by(every).collect(),
            states: self.states.iter().copied().step_by(every).collect(),
        }
    }

    /// Cytosolic calcium interpolator over this trajectory's uniform grid.
    pub fn ca_interpolator(&self) -> Result<CaInterpolator<'_, T>> {
        CaInterpolator::new(self)
    }
}

/// Linear interpolation of `Ca_c` on a uniformly spaced trajectory.
#[derive(Debug, Clone)]
pub struct CaInterpolator<'a, T> {
    t0: T,
    inv_dt: T,
    ca: Vec<T>,
    _traj: std::marker::PhantomData<&'a CascadeTrajectory<T>>,
}

impl<'a, T: Real> CaInterpolator<'a, T> {
    fn new(traj: &'a CascadeTrajectory<T>) -> Result<Self> {
        if traj.len() < 2 {
            return Err(Error::InvalidState(
                "calcium trajectory needs at least two samples".into(),
            ));
        }
        let dt = traj.times[1] - traj.times[0];
        Ok(Self {
            t0: traj.times[0],
            inv_dt: T::one() / dt,
            ca: traj.ca_c(),
            _traj: std::marker::PhantomData,
        })
    }

    /// `Ca_c(t)`, clamped to the end values outside the sampled span.
    #[inline]
    pub fn at(&self, t: T) -> T {
        let s = (t - self.t0) * self.inv_dt;
        if s <= T::zero() {
            return self.ca[0];
        }
        let last = self.ca.len() - 1;
        let i = s.floor().to_usize().unwrap_or(last);
        if i >= last {
            return self.ca[last];
        }
        let frac = s - T::lit(i as f64);
        self.ca[i] + frac * (self.ca[i + 1] - self.ca[i])
    }
}

/// Integrates the cascade with fixed-step RK4 on a uniform grid.
///
/// After each step, components in `[-1e-9, 0)` are clamped to zero; anything
/// further below zero, or non-finite, is reported as a divergence.
pub fn integrate_cascade<T: Real>(
    initial: &CascadeState<T>,
    params: &CascadeParams<T>,
    t_span: (T, T),
    dt: T,
) -> Result<CascadeTrajectory<T>> {
    initial.validate()?;
    params.validate()?;
    let (t0, t1) = t_span;
    if !t0.is_finite() || !t1.is_finite() || t1 <= t0 {
        return Err(Error::InvalidParams(format!(
            "invalid cascade time span ({t0}, {t1})"
        )));
    }
    let n = step_count(t1 - t0, dt).ok_or_else(|| {
        Error::InvalidParams(format!("cascade step {dt} does not fit span ({t0}, {t1})"))
    })?;

    let eps = T::lit(NEGATIVITY_TOLERANCE);
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut y = initial.to_array();
    times.push(t0);
    states.push(*initial);
    for i in 0..n {
        let t = t0 + T::lit(i as f64) * dt;
        y = rk4_step(|_, y: &[T; 4]| cascade_derivative(y, params), t, &y, dt);
        let t_next = t0 + T::lit((i + 1) as f64) * dt;
        for (idx, x) in y.iter_mut().enumerate() {
            if !x.is_finite() {
                return Err(Error::Divergence {
                    time: t_next.as_f64(),
                    detail: format!("cascade component {} became non-finite", SPECIES[idx]),
                });
            }
            if *x < T::zero() {
                if *x < -eps {
                    return Err(Error::Divergence {
                        time: t_next.as_f64(),
                        detail: format!(
                            "cascade component {} undershot to {} µM",
                            SPECIES[idx], x
                        ),
                    });
                }
                *x = T::zero();
            }
        }
        times.push(t_next);
        states.push(CascadeState::from_array(y));
    }
    Ok(CascadeTrajectory { times, states })
}

const SPECIES: [&str; 4] = ["g_alpha", "plc", "ca_c", "ca_er"];

/// Calcium peak detection thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeakConfig<T> {
    /// Minimum `Ca_c` at a peak (µM).
    #[serde(rename = "min_height_um")]
    pub min_height: T,
    /// Exclusion half-window around a peak (s).
    #[serde(rename = "min_separation_s")]
    pub min_separation: T,
}

impl<T: Real> Default for PeakConfig<T> {
    fn default() -> Self {
        Self {
            min_height: T::lit(0.5),
            min_separation: T::lit(2.0),
        }
    }
}

impl<T: Real> PeakConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.min_height.is_finite() || !self.min_separation.is_finite() {
            return Err(Error::InvalidParams("peak thresholds must be finite".into()));
        }
        if self.min_separation < T::zero() {
            return Err(Error::InvalidParams("peak min_separation must be >= 0".into()));
        }
        Ok(())
    }
}

/// Times of `Ca_c` peaks.
///
/// A sample is a peak when it is interior, at least `min_height`, and strictly
/// greater than every other sample within `min_separation` on either side (and
/// than its immediate neighbours). Peaks are therefore more than
/// `min_separation` apart.
pub fn detect_ca_peaks<T: Real>(traj: &CascadeTrajectory<T>, cfg: &PeakConfig<T>) -> Vec<T> {
    let ca = traj.ca_c();
    let idx = windowed_maxima(&traj.times, &ca, cfg.min_height, cfg.min_separation);
    idx.into_iter().map(|i| traj.times[i]).collect()
}

/// Indices of interior samples that strictly dominate a `±window` neighbourhood.
///
/// Sliding-window maxima via monotone deques: one left-to-right pass for the
/// preceding window and one right-to-left pass for the following window.
pub(crate) fn windowed_maxima<T: Real>(times: &[T], y: &[T], min_height: T, window: T) -> Vec<usize> {
    let n = y.len();
    if n < 3 {
        return Vec::new();
    }
    let left = preceding_window_max(times, y, window, false);
    let right = preceding_window_max(times, y, window, true);
    (1..n - 1)
        .filter(|&i| {
            y[i] >= min_height
                && y[i] > y[i - 1]
                && y[i] > y[i + 1]
                && left[i].map_or(true, |m| y[i] > m)
                && right[i].map_or(true, |m| y[i] > m)
        })
        .collect()
}

/// For each `i`, the maximum of `y[j]` over `j != i` with `|t_j - t_i| <= window`
/// on one side (preceding, or following when `reverse`).
fn preceding_window_max<T: Real>(times: &[T], y: &[T], window: T, reverse: bool) -> Vec<Option<T>> {
    let n = y.len();
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..n).rev())
    } else {
        Box::new(0..n)
    };
    let mut out = vec![None; n];
    let mut dq: VecDeque<usize> = VecDeque::new();
    for i in order {
        while let Some(&front) = dq.front() {
            if (times[i] - times[front]).abs() > window {
                dq.pop_front();
            } else {
                break;
            }
        }
        out[i] = dq.front().map(|&j| y[j]);
        while let Some(&back) = dq.back() {
            if y[back] <= y[i] {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(i);
    }
    out
}
