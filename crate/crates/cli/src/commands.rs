use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sounder_core::filterbank::{
    assemble_bank, optimize_spacings, passband_metrics, sort_for_bank, spacing_wavelength, synthesize_channel,
    BankLayout, ChannelDesign, FilterError, Passband, SpacingObjective,
};
use sounder_core::network::touchstone::{extension, to_touchstone_string};
use sounder_core::pipeline::{
    calibrate, cycles_csv, deglitch, demodulate, glitch_csv, load_timestream, quality_report, GlitchReport,
    QualityReport,
};
use sounder_core::radiometry::{noise_budget, NoiseSource};
use sounder_core::synth::{generate, truth_csv, TIMESTREAM_FILE, TRUTH_FILE};
use sounder_core::FrequencyGrid;

use crate::config::{self, BandConfig, CalibrationFile, ChainConfig, PipelineConfig, ScenarioConfig, SCHEMA_VERSION};
use crate::output::{write_atomic, write_json, TOOL_VERSION};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NONCONVERGENCE: u8 = 2;
pub const EXIT_NO_CYCLES: u8 = 3;

#[derive(Serialize)]
struct ChannelRecord {
    /// Position in the config's channel list.
    target_index: usize,
    f0_target_hz: f64,
    hpbw_target_hz: f64,
    converged: bool,
    error: Option<String>,
    /// Tap number in the assembled bank, which orders channels by descending frequency.
    bank_tap: Option<usize>,
    cavity_length_m: Option<f64>,
    coupling_length_m: Option<f64>,
    coupling_width_m: Option<f64>,
    /// Isolated-channel response.
    achieved: Option<Passband>,
    /// Response at this channel's tap inside the assembled bank.
    in_bank: Option<Passband>,
}

#[derive(Serialize)]
struct DesignRecord {
    band: String,
    guide: String,
    cutoff_hz: f64,
    converged: bool,
    optimized: bool,
    channels: Vec<ChannelRecord>,
    spacing_wavelength_m: Option<f64>,
    spacing_multipliers: Vec<f64>,
    spacings_m: Vec<f64>,
    spacing_objective: Option<f64>,
    initial_spacing_objective: Option<f64>,
    port_labels: Vec<String>,
    touchstone: Option<String>,
}

pub fn design(band: &Path, out: &Path, optimize: bool, lenient: bool) -> Result<u8> {
    let cfg: BandConfig = config::load(band, lenient)?;
    if cfg.channels.is_empty() {
        bail!("band {:?} has an empty channel list", cfg.band);
    }
    let guide = cfg.guide.resolve()?;
    let grid = FrequencyGrid::linspace(cfg.sweep.start_ghz * 1e9, cfg.sweep.stop_ghz * 1e9, cfg.sweep.points)
        .context("sweep")?;

    let mut designs: Vec<(usize, ChannelDesign)> = Vec::new();
    let mut records: Vec<ChannelRecord> = Vec::new();
    for (i, target) in cfg.channels.iter().enumerate() {
        let (f0, hpbw) = (target.f0_ghz * 1e9, target.hpbw_ghz * 1e9);
        let mut record = ChannelRecord {
            target_index: i,
            f0_target_hz: f0,
            hpbw_target_hz: hpbw,
            converged: false,
            error: None,
            bank_tap: None,
            cavity_length_m: None,
            coupling_length_m: None,
            coupling_width_m: None,
            achieved: None,
            in_bank: None,
        };
        match synthesize_channel(f0, hpbw, &guide, &cfg.synthesis) {
            Ok(d) => {
                record.converged = true;
                designs.push((i, d));
            }
            Err(FilterError::NonConvergence { last, .. }) => {
                log::error!("channel {i} at {} GHz did not converge; keeping its last iterate", target.f0_ghz);
                record.error = Some(format!("did not converge within {} iterations", cfg.synthesis.max_iterations));
                designs.push((i, *last));
            }
            Err(e) => {
                log::error!("channel {i} at {} GHz: {e}", target.f0_ghz);
                record.error = Some(e.to_string());
            }
        }
        records.push(record);
    }
    let converged = records.iter().all(|r| r.converged);

    let mut doc = DesignRecord {
        band: cfg.band.clone(),
        guide: guide.name.clone(),
        cutoff_hz: guide.cutoff(),
        converged,
        optimized: optimize,
        channels: Vec::new(),
        spacing_wavelength_m: None,
        spacing_multipliers: Vec::new(),
        spacings_m: Vec::new(),
        spacing_objective: None,
        initial_spacing_objective: None,
        port_labels: Vec::new(),
        touchstone: None,
    };

    if !designs.is_empty() {
        let mut channels: Vec<ChannelDesign> = designs.iter().map(|(_, d)| d.clone()).collect();
        sort_for_bank(&mut channels);
        let layout = if optimize {
            let outcome =
                optimize_spacings(&channels, &cfg.spacing.candidates, &SpacingObjective::MeanTapPowerAtCenters, &grid)?;
            doc.spacing_multipliers = outcome.multipliers.clone();
            doc.spacing_wavelength_m = Some(outcome.wavelength);
            doc.spacing_objective = Some(outcome.objective);
            doc.initial_spacing_objective = Some(outcome.initial_objective);
            outcome.layout
        } else {
            let wavelength = spacing_wavelength(&channels)?;
            doc.spacing_multipliers = vec![cfg.spacing.default_multiplier; channels.len()];
            doc.spacing_wavelength_m = Some(wavelength);
            let spacings = doc.spacing_multipliers.iter().map(|m| m * wavelength).collect();
            BankLayout::new(channels, spacings, guide.clone())?
        };
        let bank = assemble_bank(&layout, &grid)?;
        doc.spacings_m = layout.spacings.clone();
        doc.port_labels = layout.port_labels();

        // sort_for_bank is stable, so sorting the config indices the same way pairs them up.
        let mut order: Vec<usize> = designs.iter().map(|(i, _)| *i).collect();
        order.sort_by(|a, b| cfg.channels[*b].f0_ghz.total_cmp(&cfg.channels[*a].f0_ghz));
        for (tap, (&target_index, channel)) in order.iter().zip(&layout.channels).enumerate() {
            let r = &mut records[target_index];
            r.bank_tap = Some(tap);
            r.cavity_length_m = Some(channel.cavity_length);
            r.coupling_length_m = Some(channel.narrow_length);
            r.coupling_width_m = Some(channel.narrow_guide.width);
            r.achieved = channel.achieved;
            r.in_bank = passband_metrics(&bank, tap).ok();
        }

        let mut sweep = String::from("frequency_ghz");
        for label in &doc.port_labels[1..] {
            let _ = write!(sweep, ",{label}");
        }
        sweep.push('\n');
        let columns: Vec<Vec<f64>> = (1..bank.n_ports()).map(|p| bank.power(p, 0)).collect();
        for (k, f) in grid.iter().enumerate() {
            let _ = write!(sweep, "{}", f / 1e9);
            for c in &columns {
                let _ = write!(sweep, ",{}", c[k]);
            }
            sweep.push('\n');
        }
        write_atomic(&out.join("sweep.csv"), sweep.as_bytes())?;

        let name = format!("bank.{}", extension(bank.n_ports()));
        let band_note = format!("band {} on {}", cfg.band, guide.name);
        let version_note = format!("sounder {TOOL_VERSION}, schema {SCHEMA_VERSION}");
        let text = to_touchstone_string(&bank, &[&band_note, &version_note]);
        write_atomic(&out.join(&name), text.as_bytes())?;
        doc.touchstone = Some(name);
    }
    doc.channels = records;
    write_json(&out.join("design.json"), &doc)?;
    Ok(if converged { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

#[derive(Serialize)]
struct BudgetRow {
    channel: usize,
    t_sys_k: f64,
    detector_power_w: f64,
    radiometric: f64,
    detector: f64,
    audio_amp: f64,
    adc_quantization: f64,
    total: f64,
    dominant: NoiseSource,
}

#[derive(Serialize)]
struct BudgetRecord {
    band: String,
    t_scene_k: f64,
    receiver_temperature_k: f64,
    units: &'static str,
    channels: Vec<BudgetRow>,
}

pub fn budget(chain: &Path, out: &Path, lenient: bool) -> Result<u8> {
    let cfg: ChainConfig = config::load(chain, lenient)?;
    let budgets = noise_budget(&cfg.chain, cfg.t_scene_k)?;
    let mut csv = String::from("channel,source,mk_sqrt_s\n");
    let mut table = format!(
        "{:>7} {:>12} {:>12} {:>12} {:>12} {:>12}  dominant\n",
        "channel", "radiometric", "detector", "audio_amp", "adc", "total"
    );
    let mut rows = Vec::new();
    for b in &budgets {
        for (source, v) in &b.contributions {
            let _ = writeln!(csv, "{},{},{}", b.channel, source.name(), v);
        }
        let _ = writeln!(csv, "{},total,{}", b.channel, b.total);
        let c = |s| b.contribution(s);
        let _ = writeln!(
            table,
            "{:>7} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>12.3}  {}",
            b.channel,
            c(NoiseSource::Radiometric),
            c(NoiseSource::Detector),
            c(NoiseSource::AudioAmp),
            c(NoiseSource::AdcQuantization),
            b.total,
            b.dominant.name()
        );
        rows.push(BudgetRow {
            channel: b.channel,
            t_sys_k: b.t_sys,
            detector_power_w: b.detector_power,
            radiometric: c(NoiseSource::Radiometric),
            detector: c(NoiseSource::Detector),
            audio_amp: c(NoiseSource::AudioAmp),
            adc_quantization: c(NoiseSource::AdcQuantization),
            total: b.total,
            dominant: b.dominant,
        });
    }
    print!("band {} at {} K scene, mK*sqrt(s)\n{table}", cfg.chain.band, cfg.t_scene_k);
    write_atomic(&out.join("budget.csv"), csv.as_bytes())?;
    write_json(
        &out.join("budget.json"),
        &BudgetRecord {
            band: cfg.chain.band.clone(),
            t_scene_k: cfg.t_scene_k,
            receiver_temperature_k: cfg.chain.receiver_temperature(),
            units: "mK*sqrt(s)",
            channels: rows,
        },
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimulationRecord {
    seed: u64,
    samples: usize,
    channels: usize,
    glitch_samples: usize,
    sample_sigma_k: f64,
    volts_per_kelvin: Vec<f64>,
    files: Vec<&'static str>,
}

pub fn simulate(scenario: &Path, out: &Path, lenient: bool) -> Result<u8> {
    let cfg: ScenarioConfig = config::load(scenario, lenient)?;
    let s = &cfg.scenario;
    let (ts, truth) = generate(s)?;
    write_atomic(&out.join(TIMESTREAM_FILE), ts.to_csv_string().as_bytes())?;
    write_atomic(&out.join(TRUTH_FILE), truth_csv(&ts, &truth).as_bytes())?;
    write_json(
        &out.join("cal.json"),
        &CalibrationFile {
            schema_version: SCHEMA_VERSION,
            tool_version: Some(TOOL_VERSION.to_string()),
            calibration: s.calibration()?,
        },
    )?;
    write_json(
        &out.join("simulation.json"),
        &SimulationRecord {
            seed: s.seed,
            samples: ts.len(),
            channels: ts.n_channels(),
            glitch_samples: truth.glitch.iter().filter(|g| **g).count(),
            sample_sigma_k: s.sample_sigma_k(),
            volts_per_kelvin: s.volts_per_kelvin(),
            files: vec![TIMESTREAM_FILE, TRUTH_FILE, "cal.json"],
        },
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ProcessRecord {
    quality: QualityReport,
    glitches: GlitchSummary,
    candidate_cycles: usize,
    kept_cycles: usize,
    dropped_short: usize,
    dropped_masked: usize,
    sample_rate_hz: f64,
    sample_rate_warning: bool,
}

#[derive(Serialize)]
struct GlitchSummary {
    intervals: usize,
    flagged_samples: usize,
    masked_fraction: f64,
    fallback_phases: Vec<&'static str>,
}

impl GlitchSummary {
    fn new(r: &GlitchReport) -> Self {
        Self {
            intervals: r.intervals.len(),
            flagged_samples: r.flagged_samples,
            masked_fraction: r.masked_fraction,
            fallback_phases: r.fallback_phases.iter().map(|p| p.name()).collect(),
        }
    }
}

pub fn process(input: &Path, cal: &Path, pipeline: &Path, out: &Path, lenient: bool) -> Result<u8> {
    let cfg: PipelineConfig = config::load(pipeline, lenient)?;
    let cal: CalibrationFile = config::load(cal, lenient)?;
    let ts = load_timestream(input, cfg.chopper, cfg.sample_rate_hz)
        .with_context(|| format!("reading {}", input.display()))?;
    let (cleaned, glitches) = deglitch(&ts, &cfg.deglitch)?;
    let demod = demodulate(&cleaned, &cfg.demodulate)?;
    let delta: Vec<Vec<f64>> = (0..cleaned.n_channels()).map(|c| demod.channel(c)).collect();
    let tb = calibrate(&delta, &cal.calibration, &demod.t_ref())?;
    let quality = quality_report(&demod, &tb, &cleaned);

    write_atomic(&out.join("cycles.csv"), cycles_csv(&demod, &tb).as_bytes())?;
    write_atomic(&out.join("glitches.csv"), glitch_csv(&glitches, &cleaned).as_bytes())?;
    let no_cycles = quality.channels.iter().all(|c| c.cycles == 0);
    write_json(
        &out.join("report.json"),
        &ProcessRecord {
            glitches: GlitchSummary::new(&glitches),
            candidate_cycles: demod.candidates,
            kept_cycles: demod.cycles.len(),
            dropped_short: demod.dropped_short,
            dropped_masked: demod.dropped_masked,
            sample_rate_hz: cleaned.sample_rate,
            sample_rate_warning: cleaned.rate_warning,
            quality,
        },
    )?;
    if no_cycles {
        log::error!("no channel produced a complete chop cycle");
        return Ok(EXIT_NO_CYCLES);
    }
    Ok(EXIT_OK)
}
