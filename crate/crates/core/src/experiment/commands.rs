use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SweepGrid};
use crate::error::{Error, Result};
use crate::generation::{Mode, TraceRecord};
use crate::model::{build_model, ModelWeights};
use crate::testbed::{hallucination_metrics, mode_labels, run_episodes, Episode, HallucinationReport};

fn episodes_for(cfg: &RunConfig, weights: &ModelWeights, modes: &[Mode]) -> Result<Vec<Episode>> {
    run_episodes(
        weights,
        &cfg.model,
        &cfg.testbed,
        modes,
        cfg.decoding,
        cfg.trace_risk(),
        cfg.workers,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    /// Trace file per mode label.
    pub traces: BTreeMap<String, PathBuf>,
    /// Generated tokens per mode label.
    pub tokens: BTreeMap<String, usize>,
}

/// Generates every configured mode over the episode set and writes one
/// JSON-Lines trace per mode to `<out_dir>/traces/<label>.jsonl`, one record
/// per generated token in episode order.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = cfg.ensure_out_dir()?.join("traces");
    std::fs::create_dir_all(&dir)?;
    let modes = cfg.modes()?;
    let weights = build_model(&cfg.model)?;
    let episodes = episodes_for(cfg, &weights, &modes)?;
    let mut out = RunOutput {
        traces: BTreeMap::new(),
        tokens: BTreeMap::new(),
    };
    for label in mode_labels(&modes) {
        let path = dir.join(format!("{label}.jsonl"));
        let mut w = BufWriter::new(File::create(&path)?);
        let mut n = 0;
        for ep in &episodes {
            for rec in &ep.runs[&label].trace {
                serde_json::to_writer(&mut w, rec)?;
                w.write_all(b"\n")?;
                n += 1;
            }
        }
        w.flush()?;
        out.traces.insert(label.clone(), path);
        out.tokens.insert(label, n);
    }
    Ok(out)
}

/// Reads a JSON-Lines trace back.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Decode-phase timing of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub tokens: usize,
    pub decode_ms: f64,
    pub ms_per_token: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutput {
    pub report: HallucinationReport,
    pub latency: BTreeMap<String, Latency>,
    /// Pooled hallucination rate minus the baseline's.
    pub rate_delta: BTreeMap<String, f64>,
    /// Per-token latency over the baseline's.
    pub latency_ratio: BTreeMap<String, f64>,
}

fn latency(episodes: &[Episode], label: &str) -> Latency {
    let (mut tokens, mut decode_ms) = (0, 0.0);
    for ep in episodes {
        let run = &ep.runs[label];
        tokens += run.tokens.len();
        decode_ms += run.decode_ms;
    }
    Latency {
        tokens,
        decode_ms,
        ms_per_token: if tokens == 0 { 0.0 } else { decode_ms / tokens as f64 },
    }
}

/// Runs all modes and compares them against the first one. Writes
/// `<out_dir>/report.json`.
pub fn cmd_compare(cfg: &RunConfig) -> Result<CompareOutput> {
    cfg.validate()?;
    if cfg.modes.len() < 2 {
        return Err(Error::Config("compare needs at least two modes".into()));
    }
    let dir = cfg.ensure_out_dir()?.to_path_buf();
    let modes = cfg.modes()?;
    let labels = mode_labels(&modes);
    let weights = build_model(&cfg.model)?;
    let episodes = episodes_for(cfg, &weights, &modes)?;
    let report = hallucination_metrics(&episodes, &labels[0], &cfg.model.vocab)?;

    let latency: BTreeMap<String, Latency> =
        labels.iter().map(|l| (l.clone(), latency(&episodes, l))).collect();
    let base_rate = report.modes[&labels[0]].hallucination_rate;
    let base_ms = latency[&labels[0]].ms_per_token;
    let mut rate_delta = BTreeMap::new();
    let mut latency_ratio = BTreeMap::new();
    for l in &labels[1..] {
        rate_delta.insert(l.clone(), report.modes[l].hallucination_rate - base_rate);
        latency_ratio.insert(l.clone(), latency[l].ms_per_token / base_ms);
    }
    let out = CompareOutput {
        report,
        latency,
        rate_delta,
        latency_ratio,
    };
    let mut w = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut w, &out)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub gamma: f64,
    pub m_vis_max: f64,
    pub m_txt_max: f64,
    pub hallucination_rate: f64,
    pub mean_episode_rate: f64,
    pub ms_per_token: f64,
}

/// Runs AdaVBoost at every grid point (the config's `sweep` merged with
/// `grid`) and writes `<out_dir>/sweep.csv`, one row per point.
pub fn cmd_sweep(cfg: &RunConfig, grid: SweepGrid) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut merged = cfg.sweep.clone();
    merged.merge(grid);
    let base = cfg.intervention();
    let points = merged.points(&base);
    if points.is_empty() {
        return Err(Error::Precondition("sweep grid is empty".into()));
    }
    for p in &points {
        p.validate(cfg.model.n_layers)?;
    }
    let dir = cfg.ensure_out_dir()?.to_path_buf();
    let weights = build_model(&cfg.model)?;
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let modes = [Mode::AdaVBoost(p.clone())];
        let episodes = episodes_for(cfg, &weights, &modes)?;
        let label = modes[0].label();
        let report = hallucination_metrics(&episodes, &label, &cfg.model.vocab)?;
        let stats = &report.modes[&label];
        rows.push(SweepRow {
            alpha: p.alpha,
            gamma: p.gamma,
            m_vis_max: p.m_vis_max,
            m_txt_max: p.m_txt_max,
            hallucination_rate: stats.hallucination_rate,
            mean_episode_rate: stats.mean_episode_rate,
            ms_per_token: latency(&episodes, &label).ms_per_token,
        });
    }
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(rows)
}
