//! Synthetic chopped-radiometer timestreams with a per-sample truth record.
//!
//! Channel `c` reads `v_c * (T_phase + T_rx) + drift * t + noise + glitch`,
//! where `v_c` is the chain's end-to-end volts per kelvin and `T_phase`
//! alternates between the scene and the reference load. Noise is white
//! and sized so that a chopped, mean-demodulated series at the cycle rate
//! shows the requested NET: the per-sample deviation is `NET * sqrt(fs) / 2`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{ChopPhase, ChopperMapping, PipelineError, Timestream};
use crate::radiometry::{
    two_point_fit, CalibrationTable, RadiometerChain, RadiometryError, DEFAULT_RESPONSIVITY_FLOOR, T_COLD, T_HOT,
};

pub const SCENE_POSITION: f64 = 1000.0;
pub const REFERENCE_POSITION: f64 = 0.0;
pub const TIMESTREAM_FILE: &str = "timestream.csv";
pub const TRUTH_FILE: &str = "truth.csv";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    BadScenario(String),
    #[error(transparent)]
    Radiometry(#[from] RadiometryError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneProfile {
    Constant {
        kelvin: f64,
    },
    Ramp {
        start_k: f64,
        end_k: f64,
    },
    /// Linear interpolation between knots, held flat outside them.
    Piecewise {
        times_s: Vec<f64>,
        kelvin: Vec<f64>,
    },
}

impl SceneProfile {
    /// Temperature at `t` seconds into a run lasting `duration` seconds.
    pub fn at(&self, t: f64, duration: f64) -> f64 {
        match self {
            SceneProfile::Constant { kelvin } => *kelvin,
            SceneProfile::Ramp { start_k, end_k } => start_k + (end_k - start_k) * (t / duration),
            SceneProfile::Piecewise { times_s, kelvin } => {
                let k = times_s.partition_point(|&x| x <= t);
                if k == 0 {
                    kelvin[0]
                } else if k == times_s.len() {
                    kelvin[k - 1]
                } else {
                    let (t0, t1) = (times_s[k - 1], times_s[k]);
                    kelvin[k - 1] + (kelvin[k] - kelvin[k - 1]) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            SceneProfile::Constant { kelvin } if !kelvin.is_finite() => Err("scene temperature is not finite".into()),
            SceneProfile::Ramp { start_k, end_k } if !(start_k.is_finite() && end_k.is_finite()) => {
                Err("ramp end points are not finite".into())
            }
            SceneProfile::Piecewise { times_s, kelvin } => {
                if times_s.is_empty() || times_s.len() != kelvin.len() {
                    return Err("piecewise profile needs equal, non-empty knot lists".into());
                }
                if times_s.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err("piecewise knot times must increase".into());
                }
                if times_s.iter().chain(kelvin).any(|v| !v.is_finite()) {
                    return Err("piecewise knots are not finite".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLoad {
    pub kelvin: f64,
    #[serde(default)]
    pub drift_k_per_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlitchDepth {
    /// Multiples of the per-sample noise deviation of each channel.
    Sigma(f64),
    /// Absolute volts; must be negative.
    Volts(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlitchTrain {
    #[serde(default = "default_glitch_period")]
    pub period_s: f64,
    #[serde(default = "default_glitch_width")]
    pub width: usize,
    #[serde(default = "default_glitch_depth")]
    pub depth: GlitchDepth,
    /// Time of the first glitch.
    #[serde(default = "default_glitch_offset")]
    pub offset_s: f64,
}

fn default_glitch_period() -> f64 {
    1.0
}
fn default_glitch_width() -> usize {
    3
}
fn default_glitch_depth() -> GlitchDepth {
    GlitchDepth::Sigma(20.0)
}
fn default_glitch_offset() -> f64 {
    0.5
}

impl Default for GlitchTrain {
    fn default() -> Self {
        Self {
            period_s: default_glitch_period(),
            width: default_glitch_width(),
            depth: default_glitch_depth(),
            offset_s: default_glitch_offset(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_chop")]
    pub chop_rate_hz: f64,
    #[serde(default = "default_start")]
    pub start_time_s: f64,
    pub scene: SceneProfile,
    pub reference: ReferenceLoad,
    pub chain: RadiometerChain,
    /// Overrides the chain's volts per kelvin, one value per channel.
    #[serde(default)]
    pub volts_per_kelvin: Option<Vec<f64>>,
    /// Injected noise, as seen after chopping and demodulation.
    pub net_mk_sqrt_s: f64,
    #[serde(default)]
    pub drift_v_per_s: f64,
    #[serde(default)]
    pub glitches: Option<GlitchTrain>,
    pub seed: u64,
}

fn default_rate() -> f64 {
    200.0
}
fn default_chop() -> f64 {
    17.0
}
fn default_start() -> f64 {
    1_700_000_000.0
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::BadScenario(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration {} s", self.duration_s));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample rate {} Hz", self.sample_rate_hz));
        }
        if !(self.chop_rate_hz > 0.0 && self.chop_rate_hz < self.sample_rate_hz / 4.0) {
            return bad(format!(
                "chop rate {} Hz must be positive and below a quarter of the sample rate",
                self.chop_rate_hz
            ));
        }
        if !self.start_time_s.is_finite() {
            return bad("start time is not finite".into());
        }
        self.scene.validate().map_err(SynthError::BadScenario)?;
        if !(self.reference.kelvin.is_finite() && self.reference.drift_k_per_s.is_finite()) {
            return bad("reference load is not finite".into());
        }
        self.chain.validate()?;
        if let Some(v) = &self.volts_per_kelvin {
            if v.len() != self.chain.channels.len() {
                return bad(format!("{} volts_per_kelvin entries for {} channels", v.len(), self.chain.channels.len()));
            }
            if v.iter().any(|x| !(x.is_finite() && *x != 0.0)) {
                return bad("volts_per_kelvin entries must be finite and non-zero".into());
            }
        }
        if !(self.net_mk_sqrt_s >= 0.0 && self.net_mk_sqrt_s.is_finite()) {
            return bad(format!("NET {}", self.net_mk_sqrt_s));
        }
        if !self.drift_v_per_s.is_finite() {
            return bad("drift is not finite".into());
        }
        if let Some(g) = &self.glitches {
            if g.width < 1 {
                return bad("glitch width must be at least one sample".into());
            }
            let period = (g.period_s * self.sample_rate_hz).round();
            if !(period >= (g.width + 1) as f64) {
                return bad("glitch period must exceed the glitch width".into());
            }
            if !(g.offset_s >= 0.0) {
                return bad("glitch offset must be non-negative".into());
            }
            match g.depth {
                GlitchDepth::Sigma(s) if !(s > 0.0 && s.is_finite()) => {
                    return bad("glitch depth in sigma must be positive".into())
                }
                GlitchDepth::Volts(v) if !(v < 0.0 && v.is_finite()) => {
                    return bad("glitch depth in volts must be negative".into())
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn n_channels(&self) -> usize {
        self.chain.channels.len()
    }

    /// End-to-end volts per kelvin per channel.
    pub fn volts_per_kelvin(&self) -> Vec<f64> {
        match &self.volts_per_kelvin {
            Some(v) => v.clone(),
            None => (0..self.n_channels()).map(|c| self.chain.volts_per_kelvin(c)).collect(),
        }
    }

    /// Per-sample noise deviation, kelvin.
    pub fn sample_sigma_k(&self) -> f64 {
        1e-3 * self.net_mk_sqrt_s * self.sample_rate_hz.sqrt() / 2.0
    }

    /// Chopper phase of sample `i`.
    pub fn phase(&self, i: usize) -> ChopPhase {
        let cycles = i as f64 / self.sample_rate_hz * self.chop_rate_hz;
        if cycles.fract() < 0.5 {
            ChopPhase::Scene
        } else {
            ChopPhase::Reference
        }
    }

    /// Indices where a glitch starts.
    pub fn glitch_starts(&self) -> Vec<usize> {
        let Some(g) = &self.glitches else {
            return Vec::new();
        };
        let period = (g.period_s * self.sample_rate_hz).round() as usize;
        let first = (g.offset_s * self.sample_rate_hz).round() as usize;
        (first..self.n_samples()).step_by(period).collect()
    }

    /// Noiseless calibration: each channel viewing the hot and cold loads.
    pub fn calibration(&self) -> Result<CalibrationTable, SynthError> {
        let t_rx = self.chain.receiver_temperature();
        let vpk = self.volts_per_kelvin();
        let hot: Vec<f64> = vpk.iter().map(|v| v * (T_HOT + t_rx)).collect();
        let cold: Vec<f64> = vpk.iter().map(|v| v * (T_COLD + t_rx)).collect();
        let mut table = two_point_fit(&hot, &cold, DEFAULT_RESPONSIVITY_FLOOR)?;
        table.band = self.chain.band.clone();
        Ok(table)
    }
}

/// Per-sample ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub phase: Vec<ChopPhase>,
    pub glitch: Vec<bool>,
    pub scene_k: Vec<f64>,
    /// Channel voltages without the noise term, `[c][i]`.
    pub noiseless: Vec<Vec<f64>>,
}

pub fn generate(scenario: &Scenario) -> Result<(Timestream, Truth), SynthError> {
    scenario.validate()?;
    let n = scenario.n_samples();
    if n == 0 {
        return Err(SynthError::BadScenario("scenario produces no samples".into()));
    }
    let fs = scenario.sample_rate_hz;
    let elapsed: Vec<f64> = (0..n).map(|i| i as f64 / fs).collect();
    let times: Vec<f64> = elapsed.iter().map(|t| scenario.start_time_s + t).collect();
    let phase: Vec<ChopPhase> = (0..n).map(|i| scenario.phase(i)).collect();
    let chopper_pos = phase
        .iter()
        .map(|p| match p {
            ChopPhase::Scene => SCENE_POSITION,
            ChopPhase::Reference => REFERENCE_POSITION,
        })
        .collect();
    let scene_k: Vec<f64> = elapsed.iter().map(|&t| scenario.scene.at(t, scenario.duration_s)).collect();
    let ref_temp: Vec<f64> =
        elapsed.iter().map(|t| scenario.reference.kelvin + scenario.reference.drift_k_per_s * t).collect();
    let mut glitch = vec![false; n];
    let width = scenario.glitches.map_or(0, |g| g.width);
    for start in scenario.glitch_starts() {
        for flag in glitch.iter_mut().skip(start).take(width) {
            *flag = true;
        }
    }

    let t_rx = scenario.chain.receiver_temperature();
    let sigma_k = scenario.sample_sigma_k();
    let vpk = scenario.volts_per_kelvin();
    let (channels, noiseless): (Vec<Vec<f64>>, Vec<Vec<f64>>) = (0..scenario.n_channels())
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
            rng.set_stream(c as u64);
            let sigma_v = (vpk[c] * sigma_k).abs();
            let noise = Normal::new(0.0, sigma_v).expect("finite deviation");
            let depth = match scenario.glitches.map(|g| g.depth) {
                Some(GlitchDepth::Sigma(s)) => -s * sigma_v,
                Some(GlitchDepth::Volts(v)) => v,
                None => 0.0,
            };
            let clean: Vec<f64> = (0..n)
                .map(|i| {
                    let t_phase = match phase[i] {
                        ChopPhase::Scene => scene_k[i],
                        ChopPhase::Reference => ref_temp[i],
                    };
                    let g = if glitch[i] { depth } else { 0.0 };
                    vpk[c] * (t_phase + t_rx) + scenario.drift_v_per_s * elapsed[i] + g
                })
                .collect();
            let noisy = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
            (noisy, clean)
        })
        .unzip();

    let ts = Timestream::new(times, chopper_pos, ref_temp, channels, ChopperMapping::default(), Some(fs))?;
    Ok((ts, Truth { phase, glitch, scene_k, noiseless }))
}

pub fn truth_csv(ts: &Timestream, truth: &Truth) -> String {
    let mut out = String::from("unix_time_s,phase,glitch,scene_temp_k");
    for c in 0..truth.noiseless.len() {
        let _ = write!(out, ",ch_{c:02}_noiseless_v");
    }
    out.push('\n');
    for i in 0..ts.len() {
        let _ =
            write!(out, "{},{},{},{}", ts.times[i], truth.phase[i].name(), u8::from(truth.glitch[i]), truth.scene_k[i]);
        for ch in &truth.noiseless {
            let _ = write!(out, ",{}", ch[i]);
        }
        out.push('\n');
    }
    out
}

/// Write `timestream.csv` and `truth.csv` into `dir`, returning their paths.
pub fn write_timestream(ts: &Timestream, truth: &Truth, dir: &Path) -> Result<(PathBuf, PathBuf), SynthError> {
    fs::create_dir_all(dir)?;
    let data = dir.join(TIMESTREAM_FILE);
    let side = dir.join(TRUTH_FILE);
    fs::write(&data, ts.to_csv_string())?;
    fs::write(&side, truth_csv(ts, truth))?;
    Ok((data, side))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{demodulate, load_timestream, DemodOptions};

    fn quiet(duration: f64) -> Scenario {
        Scenario {
            duration_s: duration,
            sample_rate_hz: 200.0,
            chop_rate_hz: 17.0,
            start_time_s: default_start(),
            scene: SceneProfile::Constant { kelvin: 290.0 },
            reference: ReferenceLoad { kelvin: 290.0, drift_k_per_s: 0.0 },
            chain: RadiometerChain::g_band(2),
            volts_per_kelvin: None,
            net_mk_sqrt_s: 0.0,
            drift_v_per_s: 0.0,
            glitches: None,
            seed: 1,
        }
    }

    #[test]
    fn null_contrast_demodulates_to_zero() {
        let (ts, _) = generate(&quiet(5.0)).unwrap();
        let d = demodulate(&ts, &DemodOptions::default()).unwrap();
        assert!(d.cycles.len() > 70);
        assert!(d.cycles.iter().all(|c| c.delta_v.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn glitches_repeat_every_period() {
        let mut s = quiet(5.0);
        s.glitches = Some(GlitchTrain::default());
        s.net_mk_sqrt_s = 200.0;
        let (ts, truth) = generate(&s).unwrap();
        let starts: Vec<usize> =
            (0..ts.len()).filter(|&i| truth.glitch[i] && (i == 0 || !truth.glitch[i - 1])).collect();
        assert_eq!(starts, vec![100, 300, 500, 700, 900]);
        assert!(starts.windows(2).all(|w| w[1] - w[0] == 200));
        assert_eq!(truth.glitch.iter().filter(|g| **g).count(), 15);
        for c in 0..2 {
            for &i in &starts {
                assert!(
                    truth.noiseless[c][i]
                        < truth.noiseless[c][i - 1] - 10.0 * s.sample_sigma_k() * s.volts_per_kelvin()[c]
                );
            }
        }
    }

    #[test]
    fn ten_millivolt_contrast() {
        let mut s = quiet(20.0);
        s.volts_per_kelvin = Some(vec![1e-3, 2e-3]);
        s.scene = SceneProfile::Constant { kelvin: 300.0 };
        s.net_mk_sqrt_s = 50.0;
        let (ts, _) = generate(&s).unwrap();
        let d = demodulate(&ts, &DemodOptions::default()).unwrap();
        let mean = d.channel(0).iter().sum::<f64>() / d.cycles.len() as f64;
        // about 11 µV of scatter in the mean
        assert!((mean - 0.010).abs() < 1e-4, "mean = {mean}");
    }

    #[test]
    fn residuals_match_injected_noise() {
        let mut s = quiet(100.0);
        s.net_mk_sqrt_s = 200.0;
        let (ts, truth) = generate(&s).unwrap();
        let expected = s.sample_sigma_k() * s.volts_per_kelvin()[0];
        let r: Vec<f64> = ts.channels[0].iter().zip(&truth.noiseless[0]).map(|(a, b)| a - b).collect();
        let var = r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64;
        assert!((var.sqrt() / expected - 1.0).abs() < 0.1);
    }

    #[test]
    fn files_round_trip_and_repeat() {
        let mut s = quiet(2.0);
        s.net_mk_sqrt_s = 200.0;
        s.drift_v_per_s = 1e-9;
        s.glitches = Some(GlitchTrain::default());
        let (ts, truth) = generate(&s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (data, side) = write_timestream(&ts, &truth, dir.path()).unwrap();
        let back = load_timestream(&data, ChopperMapping::default(), Some(s.sample_rate_hz)).unwrap();
        assert_eq!(back, ts);
        let rows = |p: &Path| fs::read_to_string(p).unwrap().lines().count();
        assert_eq!(rows(&data), rows(&side));
        let again = tempfile::tempdir().unwrap();
        let (ts2, truth2) = generate(&s).unwrap();
        let (data2, side2) = write_timestream(&ts2, &truth2, again.path()).unwrap();
        assert_eq!(fs::read(&data).unwrap(), fs::read(&data2).unwrap());
        assert_eq!(fs::read(&side).unwrap(), fs::read(&side2).unwrap());
    }

    #[test]
    fn calibration_recovers_volts_per_kelvin() {
        let s = quiet(1.0);
        let cal = s.calibration().unwrap();
        for (c, v) in s.volts_per_kelvin().iter().enumerate() {
            assert!((cal.responsivity[c] / cal.contrast() / v - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut s = quiet(1.0);
        s.chop_rate_hz = 60.0;
        assert!(matches!(s.validate(), Err(SynthError::BadScenario(_))));
        let mut s = quiet(1.0);
        s.glitches = Some(GlitchTrain { depth: GlitchDepth::Volts(0.1), ..GlitchTrain::default() });
        assert!(s.validate().is_err());
        let mut s = quiet(1.0);
        s.glitches = Some(GlitchTrain { width: 0, ..GlitchTrain::default() });
        assert!(s.validate().is_err());
    }

    #[test]
    fn piecewise_profile_interpolates() {
        let p = SceneProfile::Piecewise { times_s: vec![0.0, 10.0], kelvin: vec![200.0, 300.0] };
        assert_eq!(p.at(-1.0, 20.0), 200.0);
        assert_eq!(p.at(5.0, 20.0), 250.0);
        assert_eq!(p.at(15.0, 20.0), 300.0);
    }
}
