//! Channel metrics over event streams: binarization, joint tables, mutual
//! information in bits per bin, and calcium-peak-to-release delays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// One bit per time bin: 1 when at least one event falls in the bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySequence<T> {
    pub bits: Vec<bool>,
    pub bin_width: T,
    pub t_start: T,
}

impl<T: Real> BinarySequence<T> {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Fraction of bins set to 1.
    pub fn density(&self) -> T {
        if self.bits.is_empty() {
            return T::zero();
        }
        let ones = self.bits.iter().filter(|&&b| b).count();
        T::lit(ones as f64) / T::lit(self.bits.len() as f64)
    }
}

/// Number of `width` bins covering a span; spans that are an exact multiple
/// (up to rounding) do not gain an extra bin.
pub fn bin_count<T: Real>(span: T, width: T) -> usize {
    let ratio = span / width;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= T::lit(1e-9) * rounded.max(T::one()) {
        rounded.to_usize().unwrap_or(0)
    } else {
        ratio.ceil().to_usize().unwrap_or(0)
    }
}

/// Bins `[t_start + i·w, t_start + (i+1)·w)`; an event exactly at the span
/// end is assigned to the last bin.
pub fn binarize_events<T: Real>(
    event_times: &[T],
    t_span: (T, T),
    bin_width: T,
) -> Result<BinarySequence<T>> {
    let (t0, t1) = t_span;
    if !(bin_width > T::zero()) || !bin_width.is_finite() {
        return Err(Error::InvalidParams(format!(
            "bin width must be > 0, got {bin_width}"
        )));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidParams(format!("invalid span ({t0}, {t1})")));
    }
    let n = bin_count(t1 - t0, bin_width);
    let mut bits = vec![false; n];
    for &t in event_times {
        if t < t0 || t > t1 || !t.is_finite() {
            return Err(Error::InvalidParams(format!(
                "event at {t} outside span ({t0}, {t1})"
            )));
        }
        let idx = ((t - t0) / bin_width).floor().to_usize().unwrap_or(0);
        bits[idx.min(n - 1)] = true;
    }
    Ok(BinarySequence {
        bits,
        bin_width,
        t_start: t0,
    })
}

/// Empirical 2×2 joint distribution, indexed `p[x][y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointTable<T> {
    pub p: [[T; 2]; 2],
}

impl<T: Real> JointTable<T> {
    /// Validates a table supplied directly (entries ≥ 0, sum 1 within 1e−12).
    pub fn new(p: [[T; 2]; 2]) -> Result<Self> {
        let flat = [p[0][0], p[0][1], p[1][0], p[1][1]];
        if flat.iter().any(|x| !(*x >= T::zero()) || !x.is_finite()) {
            return Err(Error::InvalidParams(
                "joint table entries must be finite and >= 0".into(),
            ));
        }
        let sum = flat.iter().fold(T::zero(), |a, &b| a + b);
        if (sum - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
            return Err(Error::InvalidParams(format!(
                "joint table must sum to 1, got {sum}"
            )));
        }
        Ok(Self { p })
    }

    pub fn marginal_x(&self) -> [T; 2] {
        [self.p[0][0] + self.p[0][1], self.p[1][0] + self.p[1][1]]
    }

    pub fn marginal_y(&self) -> [T; 2] {
        [self.p[0][0] + self.p[1][0], self.p[0][1] + self.p[1][1]]
    }

    pub fn transpose(&self) -> Self {
        Self {
            p: [[self.p[0][0], self.p[1][0]], [self.p[0][1], self.p[1][1]]],
        }
    }

    pub fn entropy_x(&self) -> T {
        entropy(&self.marginal_x())
    }

    pub fn entropy_y(&self) -> T {
        entropy(&self.marginal_y())
    }
}

/// Shannon entropy in bits with `0·log 0 = 0`.
pub fn entropy<T: Real>(p: &[T]) -> T {
    p.iter()
        .filter(|&&x| x > T::zero())
        .fold(T::zero(), |acc, &x| acc - x * x.log2())
}

/// Relative frequencies of the four `(x, y)` bin outcomes.
pub fn joint_probabilities<T: Real>(
    x: &BinarySequence<T>,
    y: &BinarySequence<T>,
) -> Result<JointTable<T>> {
    if x.len() != y.len() {
        return Err(Error::Alignment(format!(
            "sequence lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.bin_width != y.bin_width {
        return Err(Error::Alignment(format!(
            "bin widths differ: {} vs {}",
            x.bin_width, y.bin_width
        )));
    }
    if x.is_empty() {
        return Err(Error::Alignment("sequences are empty".into()));
    }
    let mut counts = [[0usize; 2]; 2];
    for (&a, &b) in x.bits.iter().zip(&y.bits) {
        counts[a as usize][b as usize] += 1;
    }
    let total = T::lit(x.len() as f64);
    let f = |c: usize| T::lit(c as f64) / total;
    Ok(JointTable {
        p: [
            [f(counts[0][0]), f(counts[0][1])],
            [f(counts[1][0]), f(counts[1][1])],
        ],
    })
}

/// `I(X;Y) = Σ p(x,y)·log2(p(x,y) / (p(x)·p(y)))` in bits, skipping empty
/// cells. Tiny negative rounding results are clamped to zero.
pub fn mutual_information<T: Real>(joint: &JointTable<T>) -> T {
    let px = joint.marginal_x();
    let py = joint.marginal_y();
    let mut mi = T::zero();
    for x in 0..2 {
        for y in 0..2 {
            let pxy = joint.p[x][y];
            if pxy > T::zero() && px[x] > T::zero() && py[y] > T::zero() {
                mi = mi + pxy * (pxy / (px[x] * py[y])).log2();
            }
        }
    }
    mi.max(T::zero())
}

/// Calcium-peak-to-release latencies and their summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStats<T> {
    pub delays: Vec<T>,
    /// `None` when no peak has a following release.
    pub mean: Option<T>,
    /// Sample standard deviation (N − 1); `None` with fewer than two delays.
    pub std: Option<T>,
}

impl<T: Real> DelayStats<T> {
    pub fn from_delays(delays: Vec<T>) -> Self {
        let n = delays.len();
        let mean = (n > 0).then(|| {
            delays.iter().fold(T::zero(), |a, &b| a + b) / T::lit(n as f64)
        });
        let std = match (n, mean) {
            (n, Some(mu)) if n > 1 => {
                let ss = delays.iter().fold(T::zero(), |a, &d| a + (d - mu) * (d - mu));
                Some((ss / T::lit((n - 1) as f64)).sqrt())
            }
            _ => None,
        };
        Self { delays, mean, std }
    }
}

/// For every peak, the time to the earliest release at or after it. Peaks with
/// no later release contribute no delay.
pub fn compute_delays<T: Real>(ca_peaks: &[T], releases: &[T]) -> Result<DelayStats<T>> {
    if ca_peaks.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Ordering("calcium peak times must be sorted".into()));
    }
    if releases.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Ordering("release times must be sorted".into()));
    }
    let mut delays = Vec::with_capacity(ca_peaks.len());
    let mut j = 0;
    for &peak in ca_peaks {
        while j < releases.len() && releases[j] < peak {
            j += 1;
        }
        match releases.get(j) {
            Some(&r) => delays.push(r - peak),
            None => break,
        }
    }
    Ok(DelayStats::from_delays(delays))
}

/// Per-trial channel metrics derived from calcium peaks and release events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub mutual_information: f64,
    pub joint: JointTable<f64>,
    pub delays: DelayStats<f64>,
}

pub fn channel_metrics(
    ca_peaks: &[f64],
    releases: &[f64],
    t_span: (f64, f64),
    bin_width: f64,
) -> Result<ChannelMetrics> {
    let x = binarize_events(ca_peaks, t_span, bin_width)?;
    let y = binarize_events(releases, t_span, bin_width)?;
    let joint = joint_probabilities(&x, &y)?;
    Ok(ChannelMetrics {
        mutual_information: mutual_information(&joint),
        joint,
        delays: compute_delays(ca_peaks, releases)?,
    })
}
