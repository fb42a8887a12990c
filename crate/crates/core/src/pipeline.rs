//! Flight-data reduction: load, deglitch, demodulate, calibrate, report.
//!
//! The validity mask is shared by every channel. Glitches are found on the
//! cross-channel sum, so a flagged sample is dropped from all channels.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radiometry::{net_from_samples, CalibrationTable, RadiometryError};

/// Normal-consistency factor for the median absolute deviation.
pub const MAD_SCALE: f64 = 1.4826;
/// Fewest valid samples deglitching will work with.
pub const MIN_DEGLITCH_SAMPLES: usize = 16;
pub const TIME_COLUMN: &str = "unix_time_s";
pub const CHOPPER_COLUMN: &str = "chopper_pos";
pub const REF_TEMP_COLUMN: &str = "ref_temp_k";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("header: {0}")]
    Header(String),
    #[error("line {line}: timestamp {time} does not exceed the previous sample")]
    NotIncreasing { line: u64, time: f64 },
    #[error("line {line}: column {column} is not finite")]
    NonFinite { line: u64, column: String },
    #[error("timestream has no samples")]
    Empty,
    #[error("series lengths differ: {0}")]
    LengthMismatch(String),
    #[error("deglitching needs at least {MIN_DEGLITCH_SAMPLES} valid samples, found {0}")]
    TooFewSamples(usize),
    #[error("invalid option: {0}")]
    BadOption(String),
    #[error("{channels} data channels but calibration covers {table}")]
    CalibrationMismatch { channels: usize, table: usize },
    #[error(transparent)]
    Radiometry(#[from] RadiometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChopPhase {
    Scene,
    Reference,
}

impl ChopPhase {
    pub fn name(self) -> &'static str {
        match self {
            ChopPhase::Scene => "scene",
            ChopPhase::Reference => "reference",
        }
    }
}

/// How the chopper position column maps onto phases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChopperMapping {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Positions at or above the threshold view the scene when true.
    #[serde(default = "default_true")]
    pub scene_above: bool,
}

fn default_threshold() -> f64 {
    500.0
}
fn default_true() -> bool {
    true
}

impl Default for ChopperMapping {
    fn default() -> Self {
        Self { threshold: default_threshold(), scene_above: true }
    }
}

impl ChopperMapping {
    pub fn phase(&self, position: f64) -> ChopPhase {
        if (position >= self.threshold) == self.scene_above {
            ChopPhase::Scene
        } else {
            ChopPhase::Reference
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timestream {
    pub times: Vec<f64>,
    /// Raw chopper position as recorded.
    pub chopper_pos: Vec<f64>,
    pub phase: Vec<ChopPhase>,
    pub ref_temp: Vec<f64>,
    /// `channels[c][i]`, volts.
    pub channels: Vec<Vec<f64>>,
    pub channel_names: Vec<String>,
    /// `true` where the sample is usable.
    pub valid: Vec<bool>,
    pub sample_rate: f64,
    /// Median sample interval is more than 10% away from `1/sample_rate`.
    pub rate_warning: bool,
}

impl Timestream {
    /// Validate and assemble. Without `nominal_rate` the rate is taken from
    /// the median sample interval.
    pub fn new(
        times: Vec<f64>,
        chopper_pos: Vec<f64>,
        ref_temp: Vec<f64>,
        channels: Vec<Vec<f64>>,
        mapping: ChopperMapping,
        nominal_rate: Option<f64>,
    ) -> Result<Self, PipelineError> {
        let n = times.len();
        if n == 0 {
            return Err(PipelineError::Empty);
        }
        if chopper_pos.len() != n || ref_temp.len() != n || channels.iter().any(|c| c.len() != n) {
            return Err(PipelineError::LengthMismatch(format!(
                "{n} timestamps, {} chopper, {} reference, channels {:?}",
                chopper_pos.len(),
                ref_temp.len(),
                channels.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        // Data rows start on line 2, after the header.
        let line = |i: usize| i as u64 + 2;
        for i in 0..n {
            let check = |v: f64, column: &str| {
                if v.is_finite() {
                    Ok(())
                } else {
                    Err(PipelineError::NonFinite { line: line(i), column: column.to_string() })
                }
            };
            check(times[i], TIME_COLUMN)?;
            check(chopper_pos[i], CHOPPER_COLUMN)?;
            check(ref_temp[i], REF_TEMP_COLUMN)?;
            for (c, ch) in channels.iter().enumerate() {
                check(ch[i], &channel_name(c))?;
            }
            if i > 0 && !(times[i] > times[i - 1]) {
                return Err(PipelineError::NotIncreasing { line: line(i), time: times[i] });
            }
        }
        let median_dt = if n > 1 {
            let mut dt: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
            Some(median(&mut dt))
        } else {
            None
        };
        let sample_rate = match (nominal_rate, median_dt) {
            (Some(rate), _) if rate > 0.0 && rate.is_finite() => rate,
            (Some(rate), _) => return Err(PipelineError::BadOption(format!("sample rate {rate}"))),
            (None, Some(dt)) => 1.0 / dt,
            (None, None) => 1.0,
        };
        let rate_warning = median_dt.is_some_and(|dt| (dt * sample_rate - 1.0).abs() > 0.1);
        if rate_warning {
            log::warn!("median sample interval {:?} s is more than 10% from the nominal {} Hz", median_dt, sample_rate);
        }
        let phase = chopper_pos.iter().map(|&p| mapping.phase(p)).collect();
        Ok(Self {
            valid: vec![true; n],
            channel_names: (0..channels.len()).map(channel_name).collect(),
            times,
            chopper_pos,
            phase,
            ref_temp,
            channels,
            sample_rate,
            rate_warning,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn masked_fraction(&self) -> f64 {
        self.valid.iter().filter(|v| !**v).count() as f64 / self.len() as f64
    }

    /// Render in the input CSV layout. Values use shortest round-trip formatting.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * (24 * (3 + self.n_channels())));
        out.push_str(&header(self.n_channels()));
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{},{},{}", self.times[i], self.chopper_pos[i], self.ref_temp[i]);
            for ch in &self.channels {
                let _ = write!(out, ",{}", ch[i]);
            }
            out.push('\n');
        }
        out
    }
}

pub fn channel_name(c: usize) -> String {
    format!("ch_{c:02}")
}

fn header(n_channels: usize) -> String {
    let mut h = format!("{TIME_COLUMN},{CHOPPER_COLUMN},{REF_TEMP_COLUMN}");
    for c in 0..n_channels {
        h.push(',');
        h.push_str(&channel_name(c));
    }
    h
}

pub fn load_timestream(
    path: &Path,
    mapping: ChopperMapping,
    nominal_rate: Option<f64>,
) -> Result<Timestream, PipelineError> {
    let file = std::fs::File::open(path)?;
    read_timestream(file, mapping, nominal_rate)
}

pub fn read_timestream(
    reader: impl Read,
    mapping: ChopperMapping,
    nominal_rate: Option<f64>,
) -> Result<Timestream, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| PipelineError::Header(e.to_string()))?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| PipelineError::Header(format!("missing column {name}")))
    };
    let (ti, ci, ri) = (find(TIME_COLUMN)?, find(CHOPPER_COLUMN)?, find(REF_TEMP_COLUMN)?);
    let mut channel_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(col, h)| h.strip_prefix("ch_").and_then(|d| d.parse::<usize>().ok()).map(|idx| (idx, col)))
        .collect();
    channel_cols.sort_unstable();
    if channel_cols.is_empty() {
        return Err(PipelineError::Header("no ch_NN columns".into()));
    }
    for (want, &(idx, _)) in channel_cols.iter().enumerate() {
        if idx != want {
            return Err(PipelineError::Header(format!("missing column {}", channel_name(want))));
        }
    }

    let (mut times, mut chopper, mut reference) = (Vec::new(), Vec::new(), Vec::new());
    let mut channels = vec![Vec::new(); channel_cols.len()];
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr
            .read_record(&mut record)
            .map_err(|e| PipelineError::Row { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize, name: &str| -> Result<f64, PipelineError> {
            let raw = record.get(col).unwrap_or("");
            let v: f64 = raw
                .parse()
                .map_err(|_| PipelineError::Row { line, message: format!("{name}: cannot parse {raw:?}") })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(PipelineError::NonFinite { line, column: name.to_string() })
            }
        };
        let t = field(ti, TIME_COLUMN)?;
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(PipelineError::NotIncreasing { line, time: t });
            }
        }
        times.push(t);
        chopper.push(field(ci, CHOPPER_COLUMN)?);
        reference.push(field(ri, REF_TEMP_COLUMN)?);
        for (c, &(_, col)) in channel_cols.iter().enumerate() {
            channels[c].push(field(col, &channel_name(c))?);
        }
    }
    Timestream::new(times, chopper, reference, channels, mapping, nominal_rate)
}

/// Median of a slice, reordering it. Even lengths average the middle pair.
pub fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    assert!(n > 0, "median of an empty slice");
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeglitchOptions {
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_buffer")]
    pub buffer: usize,
    /// Threshold used in place of the MAD rule when the MAD is zero, volts.
    #[serde(default = "default_floor")]
    pub absolute_floor: f64,
    #[serde(default)]
    pub detector: GlitchDetector,
}

fn default_k() -> f64 {
    6.0
}
fn default_buffer() -> usize {
    3
}
fn default_floor() -> f64 {
    1e-9
}

impl Default for DeglitchOptions {
    fn default() -> Self {
        Self {
            k: default_k(),
            buffer: default_buffer(),
            absolute_floor: default_floor(),
            detector: GlitchDetector::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlitchDetector {
    #[default]
    MedianMad,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GlitchInterval {
    /// First masked sample.
    pub start: usize,
    /// Last masked sample, inclusive.
    pub end: usize,
    /// Largest `|d - median| / MAD` inside the interval.
    pub peak_deviation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GlitchReport {
    pub intervals: Vec<GlitchInterval>,
    pub flagged_samples: usize,
    pub newly_masked: usize,
    pub masked_fraction: f64,
    /// Phases where the MAD was zero and the absolute floor was used.
    pub fallback_phases: Vec<ChopPhase>,
    /// Phases skipped for having too few valid samples.
    pub skipped_phases: Vec<ChopPhase>,
}

/// Flag outliers of the summed-channel series and mask them with a buffer.
///
/// The median and MAD are taken over valid samples of each chopper phase
/// separately; a chopped stream is bimodal and a single global median
/// would sit between the modes.
pub fn deglitch(ts: &Timestream, options: &DeglitchOptions) -> Result<(Timestream, GlitchReport), PipelineError> {
    if !(options.k > 0.0 && options.k.is_finite()) {
        return Err(PipelineError::BadOption(format!("k = {}", options.k)));
    }
    let n = ts.len();
    let n_valid = ts.valid.iter().filter(|v| **v).count();
    if n_valid < MIN_DEGLITCH_SAMPLES {
        return Err(PipelineError::TooFewSamples(n_valid));
    }
    let mut out = ts.clone();
    let mut report = GlitchReport::default();
    if options.detector == GlitchDetector::Off {
        report.masked_fraction = out.masked_fraction();
        return Ok((out, report));
    }

    let diagnostic: Vec<f64> = (0..n).map(|i| ts.channels.iter().map(|c| c[i]).sum()).collect();
    let mut flagged = vec![false; n];
    let mut deviation = vec![0.0; n];
    for phase in [ChopPhase::Scene, ChopPhase::Reference] {
        let members: Vec<usize> = (0..n).filter(|&i| ts.valid[i] && ts.phase[i] == phase).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < MIN_DEGLITCH_SAMPLES {
            log::warn!("{} phase has {} valid samples; not deglitched", phase.name(), members.len());
            report.skipped_phases.push(phase);
            continue;
        }
        let mut values: Vec<f64> = members.iter().map(|&i| diagnostic[i]).collect();
        let center = median(&mut values);
        for v in values.iter_mut() {
            *v = (*v - center).abs();
        }
        let mad = median(&mut values);
        let threshold = if mad > 0.0 {
            options.k * MAD_SCALE * mad
        } else {
            log::warn!("{} phase has zero MAD; using absolute floor {}", phase.name(), options.absolute_floor);
            report.fallback_phases.push(phase);
            options.absolute_floor
        };
        for &i in &members {
            let d = (diagnostic[i] - center).abs();
            deviation[i] = if mad > 0.0 { d / mad } else { f64::INFINITY };
            if d > threshold {
                flagged[i] = true;
            }
        }
    }

    report.flagged_samples = flagged.iter().filter(|f| **f).count();
    let mut i = 0;
    while i < n {
        if !flagged[i] {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < n && flagged[i] {
            i += 1;
        }
        let peak = deviation[run_start..i].iter().copied().fold(0.0, f64::max);
        let start = run_start.saturating_sub(options.buffer);
        let end = (i - 1 + options.buffer).min(n - 1);
        match report.intervals.last_mut() {
            Some(last) if start <= last.end + 1 => {
                last.end = last.end.max(end);
                last.peak_deviation = last.peak_deviation.max(peak);
            }
            _ => report.intervals.push(GlitchInterval { start, end, peak_deviation: peak }),
        }
    }
    for interval in &report.intervals {
        for v in &mut out.valid[interval.start..=interval.end] {
            if *v {
                report.newly_masked += 1;
            }
            *v = false;
        }
    }
    report.masked_fraction = out.masked_fraction();
    Ok((out, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemodOptions {
    #[serde(default = "default_min_phase")]
    pub min_phase_samples: usize,
    #[serde(default = "default_max_masked")]
    pub max_masked_fraction: f64,
}

fn default_min_phase() -> usize {
    2
}
fn default_max_masked() -> f64 {
    0.25
}

impl Default for DemodOptions {
    fn default() -> Self {
        Self { min_phase_samples: default_min_phase(), max_masked_fraction: default_max_masked() }
    }
}

/// One scene run followed by one reference run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cycle {
    /// Midpoint of the first and last sample times.
    pub time: f64,
    pub start: usize,
    /// One past the last sample.
    pub end: usize,
    pub scene_samples: usize,
    pub reference_samples: usize,
    /// Mean reference-load temperature over the cycle, kelvin.
    pub t_ref: f64,
    /// Scene mean minus reference mean per channel, volts.
    pub delta_v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Demodulated {
    pub cycles: Vec<Cycle>,
    /// Complete scene/reference pairs found, kept or not.
    pub candidates: usize,
    pub dropped_short: usize,
    pub dropped_masked: usize,
    pub n_channels: usize,
    pub sample_rate: f64,
}

impl Demodulated {
    /// Cycles per second of kept cycles, from their mean length.
    pub fn cycle_rate(&self) -> Option<f64> {
        if self.cycles.is_empty() {
            return None;
        }
        let samples: usize = self.cycles.iter().map(|c| c.end - c.start).sum();
        Some(self.sample_rate * self.cycles.len() as f64 / samples as f64)
    }

    pub fn yield_fraction(&self) -> f64 {
        if self.candidates == 0 {
            0.0
        } else {
            self.cycles.len() as f64 / self.candidates as f64
        }
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.cycles.iter().map(|cy| cy.delta_v[c]).collect()
    }

    pub fn t_ref(&self) -> Vec<f64> {
        self.cycles.iter().map(|cy| cy.t_ref).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.cycles.iter().map(|cy| cy.time).collect()
    }
}

/// Contiguous runs of equal phase as `(phase, start, end)`, end exclusive.
pub fn phase_runs(phase: &[ChopPhase]) -> Vec<(ChopPhase, usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=phase.len() {
        if i == phase.len() || phase[i] != phase[start] {
            runs.push((phase[start], start, i));
            start = i;
        }
    }
    runs
}

/// Per-cycle scene minus reference means. The first and last runs are
/// treated as truncated and never used.
pub fn demodulate(ts: &Timestream, options: &DemodOptions) -> Result<Demodulated, PipelineError> {
    if !(0.0..=1.0).contains(&options.max_masked_fraction) {
        return Err(PipelineError::BadOption(format!("max_masked_fraction = {}", options.max_masked_fraction)));
    }
    let runs = phase_runs(&ts.phase);
    let inner = if runs.len() > 2 { &runs[1..runs.len() - 1] } else { &[][..] };
    let mut out = Demodulated {
        cycles: Vec::new(),
        candidates: 0,
        dropped_short: 0,
        dropped_masked: 0,
        n_channels: ts.n_channels(),
        sample_rate: ts.sample_rate,
    };
    let mut r = 0;
    while r + 1 < inner.len() {
        let (p0, s0, e0) = inner[r];
        let (p1, s1, e1) = inner[r + 1];
        if p0 != ChopPhase::Scene || p1 != ChopPhase::Reference {
            r += 1;
            continue;
        }
        r += 2;
        out.candidates += 1;
        let scene: Vec<usize> = (s0..e0).filter(|&i| ts.valid[i]).collect();
        let reference: Vec<usize> = (s1..e1).filter(|&i| ts.valid[i]).collect();
        if scene.len() < options.min_phase_samples.max(1) || reference.len() < options.min_phase_samples.max(1) {
            out.dropped_short += 1;
            continue;
        }
        let total = e1 - s0;
        let masked = total - scene.len() - reference.len();
        if masked as f64 > options.max_masked_fraction * total as f64 {
            out.dropped_masked += 1;
            continue;
        }
        let mean = |idx: &[usize], series: &[f64]| idx.iter().map(|&i| series[i]).sum::<f64>() / idx.len() as f64;
        let delta_v = ts.channels.iter().map(|ch| mean(&scene, ch) - mean(&reference, ch)).collect();
        out.cycles.push(Cycle {
            time: 0.5 * (ts.times[s0] + ts.times[e1 - 1]),
            start: s0,
            end: e1,
            scene_samples: scene.len(),
            reference_samples: reference.len(),
            t_ref: ts.ref_temp[s0..e1].iter().sum::<f64>() / total as f64,
            delta_v,
        });
    }
    if out.cycles.is_empty() {
        log::warn!(
            "no usable chop cycles ({} candidates, {} too short, {} masked)",
            out.candidates,
            out.dropped_short,
            out.dropped_masked
        );
    }
    Ok(out)
}

/// `T = (t_hot - t_cold) * V / R + T_ref` for one value.
pub fn brightness_temperature(delta_v: f64, responsivity: f64, contrast: f64, t_ref: f64) -> f64 {
    contrast * (delta_v / responsivity) + t_ref
}

/// Brightness temperature per channel per cycle; disabled channels are `None`.
pub fn calibrate(
    delta_v: &[Vec<f64>],
    cal: &CalibrationTable,
    t_ref: &[f64],
) -> Result<Vec<Option<Vec<f64>>>, PipelineError> {
    cal.validate()?;
    if delta_v.len() != cal.n_channels() {
        return Err(PipelineError::CalibrationMismatch { channels: delta_v.len(), table: cal.n_channels() });
    }
    delta_v
        .par_iter()
        .enumerate()
        .map(|(c, series)| {
            if series.len() != t_ref.len() {
                return Err(PipelineError::LengthMismatch(format!(
                    "channel {c}: {} cycles, {} reference temperatures",
                    series.len(),
                    t_ref.len()
                )));
            }
            if !cal.is_enabled(c) {
                log::warn!("{} is disabled in the calibration table; omitted", channel_name(c));
                return Ok(None);
            }
            let r = cal.responsivity[c];
            Ok(Some(
                series.iter().zip(t_ref).map(|(&v, &tr)| brightness_temperature(v, r, cal.contrast(), tr)).collect(),
            ))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelQuality {
    pub channel: String,
    pub enabled: bool,
    pub net_mk_sqrt_s: Option<f64>,
    pub mean_tb_k: Option<f64>,
    pub masked_fraction: f64,
    pub cycle_yield: f64,
    pub cycles: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QualityReport {
    pub samples: usize,
    pub cycle_rate_hz: Option<f64>,
    pub candidate_cycles: usize,
    pub channels: Vec<ChannelQuality>,
}

pub fn quality_report(demod: &Demodulated, calibrated: &[Option<Vec<f64>>], ts: &Timestream) -> QualityReport {
    let rate = demod.cycle_rate();
    let masked_fraction = ts.masked_fraction();
    let channels = calibrated
        .iter()
        .enumerate()
        .map(|(c, series)| {
            let cycles = series.as_ref().map_or(0, Vec::len);
            let net = match (series, rate) {
                (Some(s), Some(rate)) => net_from_samples(s, rate).ok(),
                _ => None,
            };
            let mean = series.as_ref().filter(|s| !s.is_empty()).map(|s| s.iter().sum::<f64>() / s.len() as f64);
            ChannelQuality {
                channel: channel_name(c),
                enabled: series.is_some(),
                net_mk_sqrt_s: net,
                mean_tb_k: mean,
                masked_fraction,
                cycle_yield: if series.is_some() { demod.yield_fraction() } else { 0.0 },
                cycles,
            }
        })
        .collect();
    QualityReport { samples: ts.len(), cycle_rate_hz: rate, candidate_cycles: demod.candidates, channels }
}

/// `unix_time_s,ch_00_tb_k,...` for enabled channels.
pub fn cycles_csv(demod: &Demodulated, calibrated: &[Option<Vec<f64>>]) -> String {
    let enabled: Vec<(usize, &Vec<f64>)> =
        calibrated.iter().enumerate().filter_map(|(c, s)| s.as_ref().map(|s| (c, s))).collect();
    let mut out = String::from(TIME_COLUMN);
    for (c, _) in &enabled {
        let _ = write!(out, ",{}_tb_k", channel_name(*c));
    }
    out.push('\n');
    for (k, cycle) in demod.cycles.iter().enumerate() {
        let _ = write!(out, "{}", cycle.time);
        for (_, s) in &enabled {
            let _ = write!(out, ",{}", s[k]);
        }
        out.push('\n');
    }
    out
}

pub fn glitch_csv(report: &GlitchReport, ts: &Timestream) -> String {
    let mut out = String::from("start_index,end_index,start_time_s,end_time_s,peak_deviation_mad\n");
    for g in &report.intervals {
        let _ = writeln!(out, "{},{},{},{},{}", g.start, g.end, ts.times[g.start], ts.times[g.end], g.peak_deviation);
    }
    out
}
