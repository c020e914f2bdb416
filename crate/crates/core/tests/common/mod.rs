//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

/// Brute-force peak scan: an interior sample is a peak when it reaches
/// `min_height`, beats both neighbours, and beats every other sample whose
/// time lies within `min_sep` of it.
pub fn peaks_brute_force(times: &[f64], y: &[f64], min_height: f64, min_sep: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        if y[i] < min_height || !(y[i] > y[i - 1] && y[i] > y[i + 1]) {
            continue;
        }
        let dominated = (0..y.len())
            .any(|j| j != i && (times[j] - times[i]).abs() <= min_sep && y[j] >= y[i]);
        if !dominated {
            out.push(times[i]);
        }
    }
    out
}

/// For each peak, scans every release and keeps the smallest non-negative lag.
pub fn delays_exhaustive(peaks: &[f64], releases: &[f64]) -> Vec<f64> {
    peaks
        .iter()
        .filter_map(|&p| {
            releases
                .iter()
                .filter(|&&r| r >= p)
                .map(|&r| r - p)
                .fold(None, |best: Option<f64>, d| Some(best.map_or(d, |b| b.min(d))))
        })
        .collect()
}

/// Four explicit terms of `Σ p(x,y) log2(p(x,y) / (p(x) p(y)))`.
pub fn mi_four_terms(p: [[f64; 2]; 2]) -> f64 {
    let px0 = p[0][0] + p[0][1];
    let px1 = p[1][0] + p[1][1];
    let py0 = p[0][0] + p[1][0];
    let py1 = p[0][1] + p[1][1];
    let term = |pxy: f64, px: f64, py: f64| {
        if pxy == 0.0 {
            0.0
        } else {
            pxy * (pxy / (px * py)).log2()
        }
    };
    term(p[0][0], px0, py0) + term(p[0][1], px0, py1) + term(p[1][0], px1, py0) + term(p[1][1], px1, py1)
}

pub fn h2(a: f64, b: f64) -> f64 {
    [a, b].iter().filter(|&&q| q > 0.0).map(|&q| -q * q.log2()).sum()
}

/// Bins by direct interval membership; the last bin is closed on the right.
pub fn binarize_by_membership(events: &[f64], t0: f64, t1: f64, w: f64) -> Vec<bool> {
    let n = ((t1 - t0) / w).ceil() as usize;
    (0..n)
        .map(|b| {
            let lo = t0 + b as f64 * w;
            let hi = t0 + (b + 1) as f64 * w;
            events
                .iter()
                .any(|&e| e >= lo && (e < hi || (b == n - 1 && e <= t1)))
        })
        .collect()
}

/// Textbook Hodgkin-Huxley rates written from the closed forms (1/ms).
pub fn hh_rates_direct(v: f64) -> [f64; 6] {
    let am = 0.1 * (v + 40.0) / (1.0 - (-(v + 40.0) / 10.0).exp());
    let bm = 4.0 * (-(v + 65.0) / 18.0).exp();
    let ah = 0.07 * (-(v + 65.0) / 20.0).exp();
    let bh = 1.0 / (1.0 + (-(v + 35.0) / 10.0).exp());
    let an = 0.01 * (v + 55.0) / (1.0 - (-(v + 55.0) / 10.0).exp());
    let bn = 0.125 * (-(v + 65.0) / 80.0).exp();
    [am, bm, ah, bh, an, bn]
}

/// Tonic-firing spike train of the membrane with calcium held at zero.
pub fn tonic_spikes(dt_hh_ms: f64, t_end: f64) -> Vec<f64> {
    use vagus_mc::{CascadeState, CascadeTrajectory, HhParams};
    let flat = CascadeTrajectory {
        times: vec![0.0, t_end],
        states: vec![CascadeState::default(); 2],
    };
    let p = HhParams { g_cak: 0.0, ..HhParams::default() };
    let trace = vagus_mc::simulate_neuron(&flat, &p, dt_hh_ms, (0.0, t_end)).unwrap();
    vagus_mc::detect_spikes(&trace, 20.0, 2.0)
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Pearson chi-squared statistic and degrees of freedom for integer samples
/// against a pmf, pooling adjacent cells until each expects at least 5.
pub fn chi_squared(counts: &[u64], pmf: &[f64], n: u64) -> (f64, usize) {
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (c, p) in counts.iter().zip(pmf) {
        obs += *c as f64;
        exp += p * n as f64;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += obs;
        last.1 += exp;
    }
    let stat = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (stat, cells.len() - 1)
}
