//! Radiometer sensitivity, noise budgets and two-point calibration.
//!
//! Temperature-referred noise terms all use the same conversion from
//! detector power to scene temperature, `k_B B G eta / L` watts per kelvin,
//! where `G` is the RF gain, `eta` the channel's optical efficiency and `L`
//! the front-end insertion loss. Densities in `1/sqrt(Hz)` are reported
//! as `sqrt(s)` figures without further scaling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reference temperature of the noise-figure definition, kelvin.
pub const T0: f64 = 290.0;
/// Room-temperature calibration load, kelvin.
pub const T_HOT: f64 = 293.0;
/// Liquid-nitrogen calibration load, kelvin.
pub const T_COLD: f64 = 77.0;

#[derive(Debug, Error, PartialEq)]
pub enum RadiometryError {
    #[error("invalid radiometer chain: {0}")]
    BadChain(String),
    #[error("need at least two valid samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample rate must be positive, got {0}")]
    BadSampleRate(f64),
    #[error("calibration table has {table} channels but {got} were supplied")]
    ChannelCount { table: usize, got: usize },
    #[error("calibration loads must satisfy t_hot > t_cold (got {t_hot} K, {t_cold} K)")]
    BadLoads { t_hot: f64, t_cold: f64 },
}

/// `(10^(NF/10) - 1) * 290 K`
pub fn noise_figure_to_temperature(nf_db: f64) -> f64 {
    (db_to_linear(nf_db) - 1.0) * T0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Radiometer equation at one second of integration, in mK·√s:
/// `kappa * T_sys / sqrt(B * 1 s)`.
pub fn radiometer_net(t_sys: f64, bandwidth: f64, kappa: f64) -> f64 {
    1e3 * kappa * t_sys / bandwidth.sqrt()
}

/// Per-channel passband of a receiver chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub optical_efficiency: f64,
    pub bandwidth_hz: f64,
}

/// Gain, noise and readout parameters of one band's receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiometerChain {
    pub band: String,
    /// Total RF gain ahead of the detectors.
    pub rf_gain_db: f64,
    pub noise_figure_db: f64,
    /// Switch, chopper and window loss ahead of the first amplifier.
    #[serde(default)]
    pub front_loss_db: f64,
    pub channels: Vec<ChannelParams>,
    /// Detector responsivity, V/W.
    pub detector_responsivity: f64,
    /// Detector noise-equivalent power, W/√Hz.
    pub detector_nep: f64,
    pub audio_gain_db: f64,
    /// Instrumentation amplifier input noise, V/√Hz.
    pub audio_input_noise: f64,
    #[serde(default = "default_adc_bits")]
    pub adc_bits: u32,
    /// Full-scale span is `±adc_fullscale` volts.
    #[serde(default = "default_adc_fullscale")]
    pub adc_fullscale: f64,
    /// Conversion rate that quantization noise is spread over, Hz.
    #[serde(default = "default_adc_rate")]
    pub adc_sample_rate: f64,
    /// 1 for total power, 2 for chopped operation.
    #[serde(default = "default_kappa")]
    pub dicke_factor: f64,
}

fn default_adc_bits() -> u32 {
    18
}
fn default_adc_fullscale() -> f64 {
    10.0
}
fn default_adc_rate() -> f64 {
    1000.0
}
fn default_kappa() -> f64 {
    1.0
}

impl RadiometerChain {
    /// The G-band receiver: two 20 dB LNAs with a 6 dB noise figure, 20%
    /// efficient 2 GHz channels, 450 mV/mW detectors with 50 pW/√Hz NEP and
    /// a 34 dB audio stage with 1 nV/√Hz input noise.
    pub fn g_band(n_channels: usize) -> Self {
        Self {
            band: "G".into(),
            rf_gain_db: 40.0,
            noise_figure_db: 6.0,
            front_loss_db: 0.0,
            channels: vec![ChannelParams { optical_efficiency: 0.20, bandwidth_hz: 2e9 }; n_channels],
            detector_responsivity: 450.0,
            detector_nep: 50e-12,
            audio_gain_db: 34.0,
            audio_input_noise: 1e-9,
            adc_bits: default_adc_bits(),
            adc_fullscale: default_adc_fullscale(),
            adc_sample_rate: default_adc_rate(),
            dicke_factor: default_kappa(),
        }
    }

    pub fn validate(&self) -> Result<(), RadiometryError> {
        let bad = |msg: String| Err(RadiometryError::BadChain(msg));
        if self.channels.is_empty() {
            return bad("no channels".into());
        }
        for (name, v) in [
            ("rf_gain_db", self.rf_gain_db),
            ("noise_figure_db", self.noise_figure_db),
            ("front_loss_db", self.front_loss_db),
            ("audio_gain_db", self.audio_gain_db),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} is not finite"));
            }
        }
        if self.noise_figure_db < 0.0 || self.front_loss_db < 0.0 {
            return bad("noise figure and front loss must be non-negative".into());
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if !(ch.optical_efficiency > 0.0 && ch.optical_efficiency <= 1.0) {
                return bad(format!("channel {i}: optical efficiency {} outside (0, 1]", ch.optical_efficiency));
            }
            if !(ch.bandwidth_hz.is_finite() && ch.bandwidth_hz > 0.0) {
                return bad(format!("channel {i}: bandwidth must be positive"));
            }
        }
        if !(self.detector_responsivity.is_finite() && self.detector_responsivity > 0.0) {
            return bad("detector responsivity must be positive".into());
        }
        if !(self.detector_nep >= 0.0 && self.audio_input_noise >= 0.0) {
            return bad("noise densities must be non-negative".into());
        }
        if self.adc_bits < 1 || !(self.adc_fullscale > 0.0) || !(self.adc_sample_rate > 0.0) {
            return bad("ADC needs at least one bit, positive full scale and sample rate".into());
        }
        if !(self.dicke_factor >= 1.0) {
            return bad(format!("Dicke factor {} is below 1", self.dicke_factor));
        }
        Ok(())
    }

    /// Receiver temperature referred to the antenna: front loss at 290 K followed by the LNA.
    pub fn receiver_temperature(&self) -> f64 {
        let loss = db_to_linear(self.front_loss_db);
        (loss - 1.0) * T0 + loss * noise_figure_to_temperature(self.noise_figure_db)
    }

    /// Detector power per kelvin of scene temperature, W/K.
    pub fn power_per_kelvin(&self, channel: usize) -> f64 {
        let ch = &self.channels[channel];
        BOLTZMANN * ch.bandwidth_hz * db_to_linear(self.rf_gain_db) * ch.optical_efficiency
            / db_to_linear(self.front_loss_db)
    }

    /// ADC-referred volts per kelvin, including the audio gain.
    pub fn volts_per_kelvin(&self, channel: usize) -> f64 {
        self.power_per_kelvin(channel) * self.detector_responsivity * 10f64.powf(self.audio_gain_db / 20.0)
    }

    pub fn lsb(&self) -> f64 {
        2.0 * self.adc_fullscale / 2f64.powi(self.adc_bits as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    Radiometric,
    Detector,
    AudioAmp,
    AdcQuantization,
}

impl NoiseSource {
    pub const ALL: [NoiseSource; 4] =
        [NoiseSource::Radiometric, NoiseSource::Detector, NoiseSource::AudioAmp, NoiseSource::AdcQuantization];

    pub fn name(self) -> &'static str {
        match self {
            NoiseSource::Radiometric => "radiometric",
            NoiseSource::Detector => "detector",
            NoiseSource::AudioAmp => "audio_amp",
            NoiseSource::AdcQuantization => "adc_quantization",
        }
    }
}

/// One channel's noise budget. All values in mK·√s.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseBudget {
    pub channel: usize,
    pub t_sys: f64,
    pub detector_power: f64,
    pub contributions: Vec<(NoiseSource, f64)>,
    pub total: f64,
    pub dominant: NoiseSource,
}

impl NoiseBudget {
    pub fn contribution(&self, source: NoiseSource) -> f64 {
        self.contributions.iter().find(|(s, _)| *s == source).map(|(_, v)| *v).unwrap_or(0.0)
    }
}

/// Temperature-referred noise of every stage, per channel.
pub fn noise_budget(chain: &RadiometerChain, t_scene: f64) -> Result<Vec<NoiseBudget>, RadiometryError> {
    chain.validate()?;
    let t_sys = t_scene + chain.receiver_temperature();
    if !(t_sys > 0.0) {
        return Err(RadiometryError::BadChain(format!("system temperature {t_sys} K is not positive")));
    }
    let budgets = (0..chain.channels.len())
        .map(|ch| {
            let bandwidth = chain.channels[ch].bandwidth_hz;
            let w_per_k = chain.power_per_kelvin(ch);
            let v_per_k = chain.volts_per_kelvin(ch);
            let quantization = chain.lsb() / 12f64.sqrt() / chain.adc_sample_rate.sqrt();
            let contributions = vec![
                (NoiseSource::Radiometric, radiometer_net(t_sys, bandwidth, chain.dicke_factor)),
                (NoiseSource::Detector, 1e3 * chain.detector_nep / w_per_k),
                (NoiseSource::AudioAmp, 1e3 * chain.audio_input_noise / (chain.detector_responsivity * w_per_k)),
                (NoiseSource::AdcQuantization, 1e3 * quantization / v_per_k),
            ];
            let (total, dominant) = summarize(&contributions);
            NoiseBudget {
                channel: ch,
                t_sys,
                detector_power: BOLTZMANN
                    * t_sys
                    * bandwidth
                    * db_to_linear(chain.rf_gain_db)
                    * chain.channels[ch].optical_efficiency
                    / db_to_linear(chain.front_loss_db),
                contributions,
                total,
                dominant,
            }
        })
        .collect();
    Ok(budgets)
}

/// Quadrature total and largest term.
pub fn summarize(contributions: &[(NoiseSource, f64)]) -> (f64, NoiseSource) {
    let total = contributions.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    let dominant = contributions
        .iter()
        .fold(None::<(NoiseSource, f64)>, |best, &(s, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((s, v)),
        })
        .map(|(s, _)| s)
        .unwrap_or(NoiseSource::Radiometric);
    (total, dominant)
}

/// Per-channel responsivity from hot and cold load readings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    /// `V_hot - V_cold` per channel, volts.
    pub responsivity: Vec<f64>,
    pub enabled: Vec<bool>,
    #[serde(default = "default_hot")]
    pub t_hot: f64,
    #[serde(default = "default_cold")]
    pub t_cold: f64,
    #[serde(default)]
    pub date: String,
    #[serde(default)]
    pub band: String,
}

fn default_hot() -> f64 {
    T_HOT
}
fn default_cold() -> f64 {
    T_COLD
}

/// Smallest usable `|V_hot - V_cold|`, volts.
pub const DEFAULT_RESPONSIVITY_FLOOR: f64 = 1e-12;

impl CalibrationTable {
    pub fn validate(&self) -> Result<(), RadiometryError> {
        if self.enabled.len() != self.responsivity.len() {
            return Err(RadiometryError::ChannelCount { table: self.responsivity.len(), got: self.enabled.len() });
        }
        if !(self.t_hot > self.t_cold) {
            return Err(RadiometryError::BadLoads { t_hot: self.t_hot, t_cold: self.t_cold });
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.responsivity.len()
    }

    pub fn contrast(&self) -> f64 {
        self.t_hot - self.t_cold
    }

    pub fn is_enabled(&self, channel: usize) -> bool {
        self.enabled[channel] && self.responsivity[channel] != 0.0
    }
}

/// Fit `R_i = V_hot - V_cold`; channels below `floor` are disabled.
pub fn two_point_fit(v_hot: &[f64], v_cold: &[f64], floor: f64) -> Result<CalibrationTable, RadiometryError> {
    if v_hot.len() != v_cold.len() {
        return Err(RadiometryError::ChannelCount { table: v_hot.len(), got: v_cold.len() });
    }
    let responsivity: Vec<f64> = v_hot.iter().zip(v_cold).map(|(h, c)| h - c).collect();
    let enabled = responsivity.iter().map(|r| r.is_finite() && r.abs() > floor).collect();
    Ok(CalibrationTable {
        responsivity,
        enabled,
        t_hot: T_HOT,
        t_cold: T_COLD,
        date: String::new(),
        band: String::new(),
    })
}

/// Noise-equivalent temperature of a white series at 1 Hz equivalent, mK·√s.
/// `values` in kelvin; NaN entries are skipped.
pub fn net_from_samples(values: &[f64], sample_rate: f64) -> Result<f64, RadiometryError> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(RadiometryError::BadSampleRate(sample_rate));
    }
    let valid: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if valid.len() < 2 {
        return Err(RadiometryError::TooFewSamples(valid.len()));
    }
    let n = valid.len() as f64;
    let mean = valid.iter().sum::<f64>() / n;
    let var = valid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(1e3 * var.sqrt() / sample_rate.sqrt())
}
