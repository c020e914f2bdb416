//! Trial directories: stage CSVs plus a JSON manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cascade::{detect_ca_peaks, CascadeState, CascadeTrajectory};
use crate::error::{Error, Result};
use crate::metrics::{channel_metrics, ChannelMetrics};
use crate::pipeline::{RunRecord, TrialConfig};

/// Published single-run figures the simulator is compared against. They are
/// recorded for reference only; the bundled cascade set is not fitted to them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTargets {
    pub k1_um_per_s: [f64; 2],
    pub mi_bits_per_bin: [f64; 2],
    pub delay_mean_s: [f64; 2],
    pub delay_std_s: [f64; 2],
}

pub const REFERENCE_TARGETS: ReferenceTargets = ReferenceTargets {
    k1_um_per_s: [1.52, 3.82],
    mi_bits_per_bin: [0.0085, 0.0110],
    delay_mean_s: [9.40, 7.99],
    delay_std_s: [4.44, 3.57],
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub ca_peaks: usize,
    pub spikes: usize,
    pub release_draws: usize,
    pub releases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialManifest {
    pub config: TrialConfig,
    pub counts: EventCounts,
    pub metrics: ChannelMetrics,
    pub mi_half_bin_shift: Option<f64>,
    pub wall_time_s: f64,
    pub reference_targets: ReferenceTargets,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn column(path: &Path, name: &str, times: &[f64]) -> Result<()> {
    write_csv(path, &[name], times.iter().map(|t| [t.to_string()]))
}

/// Writes `cascade.csv`, `voltage.csv`, `spikes.csv`, `ca_peaks.csv`,
/// `nt.csv`, `events.csv` and `manifest.json` into `dir`.
pub fn write_trial_dir(dir: &Path, cfg: &TrialConfig, rec: &RunRecord, wall_time_s: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let c = &rec.cascade_traj;
    write_csv(
        &dir.join("cascade.csv"),
        &["t", "g_alpha", "plc", "ca_c", "ca_er"],
        c.times.iter().zip(&c.states).map(|(t, s)| {
            [t, &s.g_alpha, &s.plc, &s.ca_c, &s.ca_er].map(|x| x.to_string())
        }),
    )?;
    write_csv(
        &dir.join("voltage.csv"),
        &["t", "v_m"],
        rec.voltage.times.iter().zip(&rec.voltage.v).map(|(t, v)| [t.to_string(), v.to_string()]),
    )?;
    column(&dir.join("spikes.csv"), "t_spike", &rec.spikes)?;
    column(&dir.join("ca_peaks.csv"), "t_peak", &rec.ca_peaks)?;
    write_csv(
        &dir.join("nt.csv"),
        &["t", "nt"],
        rec.nt.times.iter().zip(&rec.nt.nt).map(|(t, n)| [t.to_string(), n.to_string()]),
    )?;
    write_csv(
        &dir.join("events.csv"),
        &["t_event", "k", "delta_nt"],
        rec.nt.events.iter().map(|e| {
            [e.time.to_string(), e.vesicles_released.to_string(), e.delta_nt.to_string()]
        }),
    )?;
    let manifest = TrialManifest {
        config: *cfg,
        counts: counts(rec),
        metrics: rec.metrics.clone(),
        mi_half_bin_shift: rec.mi_half_bin_shift.is_finite().then_some(rec.mi_half_bin_shift),
        wall_time_s,
        reference_targets: REFERENCE_TARGETS,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn counts(rec: &RunRecord) -> EventCounts {
    EventCounts {
        ca_peaks: rec.ca_peaks.len(),
        spikes: rec.spikes.len(),
        release_draws: rec.nt.events.len(),
        releases: rec.releases.len(),
    }
}

pub fn read_manifest(dir: &Path) -> Result<TrialManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

fn read_rows(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Config(format!(
                "{}: expected {width} columns, found {}",
                path.display(),
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| {
                    Error::Config(format!("{}: bad number {f:?}: {e}", path.display()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(row);
    }
    Ok(out)
}

pub fn read_cascade_csv(path: &Path) -> Result<CascadeTrajectory<f64>> {
    let rows = read_rows(path, 5)?;
    Ok(CascadeTrajectory {
        times: rows.iter().map(|r| r[0]).collect(),
        states: rows.iter().map(|r| CascadeState::new(r[1], r[2], r[3], r[4])).collect(),
    })
}

/// Times of draws in `events.csv` that released at least one vesicle.
pub fn read_release_times(path: &Path) -> Result<Vec<f64>> {
    Ok(read_rows(path, 3)?
        .into_iter()
        .filter(|r| r[1] >= 1.0)
        .map(|r| r[0])
        .collect())
}

/// Metrics recomputed from a trial directory's stored traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecomputedMetrics {
    pub ca_peaks: usize,
    pub releases: usize,
    pub metrics: ChannelMetrics,
}

/// Re-detects calcium peaks from `cascade.csv` and recomputes metrics against
/// the releases in `events.csv`, using the settings echoed in the manifest.
///
/// Peaks match the original run when the cascade trace was stored undecimated.
pub fn recompute_metrics(dir: &Path) -> Result<RecomputedMetrics> {
    let manifest = read_manifest(dir)?;
    let cfg = manifest.config;
    let traj = read_cascade_csv(&dir.join("cascade.csv"))?;
    if traj.len() < 3 {
        return Err(Error::Config(format!("{}: cascade trace too short", dir.display())));
    }
    let peaks = detect_ca_peaks(&traj, &cfg.params.peaks);
    let releases = read_release_times(&dir.join("events.csv"))?;
    let metrics = channel_metrics(&peaks, &releases, (0.0, cfg.settings.t_end_s), cfg.settings.bin_width_s)?;
    Ok(RecomputedMetrics {
        ca_peaks: peaks.len(),
        releases: releases.len(),
        metrics,
    })
}
