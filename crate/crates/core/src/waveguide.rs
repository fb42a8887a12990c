//! TE10-mode electromagnetics of rectangular metal waveguide.
//!
//! Everything here assumes single-mode operation. Above cutoff the mode
//! propagates with conductor loss from the usual surface-resistance
//! expression; below cutoff it decays reactively and wall loss is ignored.
//! Frequencies within the guard band around cutoff are rejected because
//! the conductor-loss term diverges there.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::FrequencyGrid;
use crate::network::SMatrix;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permeability, H/m (CODATA 2018).
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Free-space wave impedance, ohms.
pub const ETA_0: f64 = MU_0 * SPEED_OF_LIGHT;

/// Machined aluminum.
pub const ALUMINUM_CONDUCTIVITY: f64 = 3.5e7;
pub const DEFAULT_GUARD_FRACTION: f64 = 1e-3;

const INCH: f64 = 0.0254;

#[derive(Debug, Error, PartialEq)]
pub enum WaveguideError {
    #[error("guide {name:?}: dimensions must satisfy width > height > 0 (got {width} m x {height} m)")]
    BadDimensions { name: String, width: f64, height: f64 },
    #[error("guide {name:?}: conductivity must be positive and finite (got {value} S/m)")]
    BadConductivity { name: String, value: f64 },
    #[error("guide {name:?}: guard fraction must be in [0, 0.5) (got {value})")]
    BadGuard { name: String, value: f64 },
    #[error("frequency {frequency} Hz is within the guard band of the {cutoff} Hz cutoff")]
    CutoffSingularity { frequency: f64, cutoff: f64 },
    #[error("frequency {0} Hz must be positive and finite")]
    BadFrequency(f64),
    #[error("section length {0} m must be non-negative and finite")]
    BadLength(f64),
    #[error("unknown waveguide {0:?}")]
    UnknownGuide(String),
}

/// Wall material. Serialized as a number (S/m) or the string `"perfect"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Conductor {
    Perfect,
    Finite(f64),
}

impl Default for Conductor {
    fn default() -> Self {
        Conductor::Finite(ALUMINUM_CONDUCTIVITY)
    }
}

impl fmt::Display for Conductor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conductor::Perfect => f.write_str("perfect"),
            Conductor::Finite(sigma) => write!(f, "{sigma} S/m"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ConductorRepr {
    Conductivity(f64),
    Named(String),
}

impl Serialize for Conductor {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match *self {
            Conductor::Perfect => ConductorRepr::Named("perfect".into()),
            Conductor::Finite(sigma) => ConductorRepr::Conductivity(sigma),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Conductor {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match ConductorRepr::deserialize(deserializer)? {
            ConductorRepr::Conductivity(sigma) => Ok(Conductor::Finite(sigma)),
            ConductorRepr::Named(name) if name.eq_ignore_ascii_case("perfect") => Ok(Conductor::Perfect),
            ConductorRepr::Named(name) => Err(serde::de::Error::custom(format!(
                "conductivity must be a number in S/m or \"perfect\", got {name:?}"
            ))),
        }
    }
}

/// Rectangular guide cross-section plus wall conductivity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveguideSpec {
    pub name: String,
    /// Broad-wall width `a`, meters.
    pub width: f64,
    /// Narrow-wall height `b`, meters.
    pub height: f64,
    #[serde(default)]
    pub conductor: Conductor,
    /// Half-width of the rejected band around cutoff, as a fraction of cutoff.
    #[serde(default = "default_guard")]
    pub guard_fraction: f64,
}

fn default_guard() -> f64 {
    DEFAULT_GUARD_FRACTION
}

impl WaveguideSpec {
    pub fn new(name: impl Into<String>, width: f64, height: f64, conductor: Conductor) -> Result<Self, WaveguideError> {
        let spec = Self { name: name.into(), width, height, conductor, guard_fraction: DEFAULT_GUARD_FRACTION };
        spec.validate()?;
        Ok(spec)
    }

    /// A below-cutoff coupling section. Unlike [`WaveguideSpec::new`] the
    /// width may be smaller than the height: coupling sections keep the
    /// parent guide's height and only narrow the broad wall, which at high
    /// frequency can leave them narrower than they are tall.
    pub fn cutoff_section(
        name: impl Into<String>,
        width: f64,
        height: f64,
        conductor: Conductor,
    ) -> Result<Self, WaveguideError> {
        let spec = Self { name: name.into(), width, height, conductor, guard_fraction: DEFAULT_GUARD_FRACTION };
        spec.validate_common()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), WaveguideError> {
        if !(self.width > self.height) {
            return Err(self.bad_dimensions());
        }
        self.validate_common()
    }

    fn validate_common(&self) -> Result<(), WaveguideError> {
        let dims_ok = self.width.is_finite() && self.height.is_finite() && self.width > 0.0 && self.height > 0.0;
        if !dims_ok {
            return Err(self.bad_dimensions());
        }
        if let Conductor::Finite(sigma) = self.conductor {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(WaveguideError::BadConductivity { name: self.name.clone(), value: sigma });
            }
        }
        if !(0.0..0.5).contains(&self.guard_fraction) {
            return Err(WaveguideError::BadGuard { name: self.name.clone(), value: self.guard_fraction });
        }
        Ok(())
    }

    fn bad_dimensions(&self) -> WaveguideError {
        WaveguideError::BadDimensions { name: self.name.clone(), width: self.width, height: self.height }
    }

    pub fn with_conductor(mut self, conductor: Conductor) -> Self {
        self.conductor = conductor;
        self
    }

    /// EIA WR-5 (0.051 x 0.0255 in), aluminum walls.
    pub fn wr5() -> Self {
        Self::new("WR-5", 0.051 * INCH, 0.0255 * INCH, Conductor::default()).expect("WR-5 dimensions are valid")
    }

    /// EIA WR-15 (0.148 x 0.074 in), aluminum walls.
    pub fn wr15() -> Self {
        Self::new("WR-15", 0.148 * INCH, 0.074 * INCH, Conductor::default()).expect("WR-15 dimensions are valid")
    }

    /// Look up a built-in guide by name (`WR-5`, `WR5`, `wr-15`, ...).
    pub fn standard(name: &str) -> Result<Self, WaveguideError> {
        let key: String = name.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_uppercase();
        match key.as_str() {
            "WR5" => Ok(Self::wr5()),
            "WR15" => Ok(Self::wr15()),
            _ => Err(WaveguideError::UnknownGuide(name.to_string())),
        }
    }

    pub fn cutoff(&self) -> f64 {
        te10_cutoff(self)
    }

    fn check_frequency(&self, f: f64) -> Result<f64, WaveguideError> {
        if !(f.is_finite() && f > 0.0) {
            return Err(WaveguideError::BadFrequency(f));
        }
        let cutoff = self.cutoff();
        if (f - cutoff).abs() <= self.guard_fraction * cutoff {
            return Err(WaveguideError::CutoffSingularity { frequency: f, cutoff });
        }
        Ok(cutoff)
    }

    /// Surface resistance `sqrt(pi f mu0 / sigma)`; zero for a perfect conductor.
    pub fn surface_resistance(&self, f: f64) -> f64 {
        match self.conductor {
            Conductor::Perfect => 0.0,
            Conductor::Finite(sigma) => (PI * f * MU_0 / sigma).sqrt(),
        }
    }
}

/// TE10 cutoff, `c / 2a`.
pub fn te10_cutoff(spec: &WaveguideSpec) -> f64 {
    SPEED_OF_LIGHT / (2.0 * spec.width)
}

/// Complex propagation constant `alpha + j beta` in 1/m.
pub fn propagation_constant(spec: &WaveguideSpec, f: f64) -> Result<Complex64, WaveguideError> {
    let cutoff = spec.check_frequency(f)?;
    let k0 = 2.0 * PI * f / SPEED_OF_LIGHT;
    let ratio_sq = (cutoff / f).powi(2);
    if ratio_sq < 1.0 {
        let root = (1.0 - ratio_sq).sqrt();
        let alpha = spec.surface_resistance(f) / (spec.height * ETA_0 * root)
            * (1.0 + 2.0 * spec.height / spec.width * ratio_sq);
        Ok(Complex64::new(alpha, k0 * root))
    } else {
        Ok(Complex64::new(k0 * (ratio_sq - 1.0).sqrt(), 0.0))
    }
}

/// TE10 wave impedance: real above cutoff, inductive reactance below.
pub fn wave_impedance(spec: &WaveguideSpec, f: f64) -> Result<Complex64, WaveguideError> {
    let cutoff = spec.check_frequency(f)?;
    let ratio_sq = (cutoff / f).powi(2);
    if ratio_sq < 1.0 {
        Ok(Complex64::new(ETA_0 / (1.0 - ratio_sq).sqrt(), 0.0))
    } else {
        Ok(Complex64::new(0.0, ETA_0 / (ratio_sq - 1.0).sqrt()))
    }
}

/// Guided wavelength `2 pi / beta` of a propagating mode.
pub fn guided_wavelength(spec: &WaveguideSpec, f: f64) -> Result<f64, WaveguideError> {
    let gamma = propagation_constant(spec, f)?;
    if gamma.im <= 0.0 {
        return Err(WaveguideError::CutoffSingularity { frequency: f, cutoff: spec.cutoff() });
    }
    Ok(2.0 * PI / gamma.im)
}

/// Unloaded quality factor of a resonator built from this guide, `beta / (2 alpha v_g / c)`.
/// Infinite for a perfect conductor.
pub fn unloaded_q(spec: &WaveguideSpec, f: f64) -> Result<f64, WaveguideError> {
    let gamma = propagation_constant(spec, f)?;
    if gamma.re == 0.0 {
        return Ok(f64::INFINITY);
    }
    let ratio_sq = (spec.cutoff() / f).powi(2);
    Ok(gamma.im / (2.0 * gamma.re * (1.0 - ratio_sq)))
}

/// Uniform section referenced to its own modal impedance:
/// `S11 = S22 = 0`, `S21 = S12 = exp(-gamma L)`.
pub fn section_smatrix(spec: &WaveguideSpec, length: f64, grid: &FrequencyGrid) -> Result<SMatrix, WaveguideError> {
    if !(length.is_finite() && length >= 0.0) {
        return Err(WaveguideError::BadLength(length));
    }
    let mut data = Vec::with_capacity(grid.len());
    for f in grid.iter() {
        let t = (-propagation_constant(spec, f)? * length).exp();
        let zero = Complex64::new(0.0, 0.0);
        data.push(nalgebra::DMatrix::from_row_slice(2, 2, &[zero, t, t, zero]));
    }
    Ok(SMatrix::new(grid.clone(), data, vec!["in".into(), "out".into()]).expect("section S-matrix is well formed"))
}
