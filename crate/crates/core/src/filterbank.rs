//! Resonant-cavity channel filters and the channelizing bank.
//!
//! A channel is a half-wave cavity in the main guide's cross-section held
//! between two below-cutoff coupling sections. The coupling sections keep
//! the main guide's height and are narrowed so their cutoff sits 50% above
//! the channel center. The cavity length sets the resonance; the coupling
//! length sets the bandwidth. Each section is a uniform transmission line
//! (ABCD matrix) with the TE10 wave impedance and propagation constant of
//! its guide, and the whole filter is referred to the main guide's modal
//! impedance.
//!
//! Channels hang off the through guide on ideal symmetric shunt tees and
//! the bank is the cascade of connecting sections and channel three-ports.

use log::debug;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::FrequencyGrid;
use crate::network::{cascade_chain, cascade_pair, ChainLink, NetworkError, SMatrix};
use crate::waveguide::{
    guided_wavelength, propagation_constant, section_smatrix, unloaded_q, wave_impedance, WaveguideError,
    WaveguideSpec, SPEED_OF_LIGHT,
};

/// Coupling-section cutoff relative to the channel center frequency.
pub const NARROW_CUTOFF_RATIO: f64 = 1.5;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error(transparent)]
    Waveguide(#[from] WaveguideError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("channel at {f0} Hz with {hpbw} Hz bandwidth is unachievable: {reason}")]
    Unachievable { f0: f64, hpbw: f64, reason: String },
    #[error(
        "channel synthesis for {f0} Hz did not converge after {iterations} iterations \
         (last response: {last_response:?})"
    )]
    NonConvergence { f0: f64, iterations: usize, last: Box<ChannelDesign>, last_response: Option<Passband> },
    #[error("no resolvable passband: {0}")]
    NoPassband(String),
    #[error("no half-power crossing on the {side} side of the {f_peak} Hz peak within the grid")]
    BandEdge { side: &'static str, f_peak: f64 },
    #[error("invalid bank layout: {0}")]
    BadLayout(String),
    #[error("spacing candidate set is empty")]
    EmptyCandidates,
}

/// Measured passband of one channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Passband {
    pub f_peak: f64,
    pub hpbw: f64,
    /// Transmitted power fraction at `f_peak`.
    pub peak_efficiency: f64,
}

/// Geometry of one channel filter. Lengths in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDesign {
    pub f0_target: f64,
    pub hpbw_target: f64,
    pub main_guide: WaveguideSpec,
    pub narrow_guide: WaveguideSpec,
    pub cavity_guide: WaveguideSpec,
    pub narrow_length: f64,
    pub cavity_length: f64,
    /// Filled in by [`synthesize_channel`] once the design has converged.
    pub achieved: Option<Passband>,
}

impl ChannelDesign {
    /// Unsynthesized geometry around `main_guide`.
    pub fn new(
        f0_target: f64,
        hpbw_target: f64,
        main_guide: &WaveguideSpec,
        narrow_length: f64,
        cavity_length: f64,
    ) -> Result<Self, FilterError> {
        if !(f0_target.is_finite() && f0_target > 0.0) {
            return Err(WaveguideError::BadFrequency(f0_target).into());
        }
        for length in [narrow_length, cavity_length] {
            if !(length.is_finite() && length >= 0.0) {
                return Err(WaveguideError::BadLength(length).into());
            }
        }
        main_guide.validate()?;
        let narrow_width = SPEED_OF_LIGHT / (2.0 * NARROW_CUTOFF_RATIO * f0_target);
        let mut narrow_guide = WaveguideSpec::cutoff_section(
            format!("{}-coupling", main_guide.name),
            narrow_width,
            main_guide.height,
            main_guide.conductor,
        )?;
        narrow_guide.guard_fraction = main_guide.guard_fraction;
        let mut cavity_guide = main_guide.clone();
        cavity_guide.name = format!("{}-cavity", main_guide.name);
        Ok(Self {
            f0_target,
            hpbw_target,
            main_guide: main_guide.clone(),
            narrow_guide,
            cavity_guide,
            narrow_length,
            cavity_length,
            achieved: None,
        })
    }

    /// Achieved center if synthesized, else the target.
    pub fn center(&self) -> f64 {
        self.achieved.map_or(self.f0_target, |p| p.f_peak)
    }

    fn with_lengths(&self, cavity_length: f64, narrow_length: f64) -> Self {
        Self { cavity_length, narrow_length, achieved: None, ..self.clone() }
    }

    /// Frequencies where the surrogate is meaningful: above the main guide's
    /// cutoff, below both the coupling-section cutoff and the main guide's
    /// second-mode cutoff, with a 1% margin.
    pub fn usable_band(&self) -> (f64, f64) {
        let main_cutoff = self.main_guide.cutoff();
        let upper = self.narrow_guide.cutoff().min(2.0 * main_cutoff);
        (main_cutoff * 1.01, upper * 0.99)
    }

    /// Two-port S-parameters at one frequency.
    pub fn twoport_at(&self, f: f64) -> Result<[[Complex64; 2]; 2], FilterError> {
        let narrow = abcd(&self.narrow_guide, self.narrow_length, f)?;
        let cavity = abcd(&self.cavity_guide, self.cavity_length, f)?;
        let total = narrow * cavity * narrow;
        let z0 = wave_impedance(&self.main_guide, f)?;
        Ok(abcd_to_s(&total, z0))
    }

    /// `|S21|^2` at one frequency.
    pub fn transmission(&self, f: f64) -> Result<f64, FilterError> {
        Ok(self.twoport_at(f)?[1][0].norm_sqr())
    }
}

type Abcd = nalgebra::Matrix2<Complex64>;

fn abcd(guide: &WaveguideSpec, length: f64, f: f64) -> Result<Abcd, WaveguideError> {
    let gl = propagation_constant(guide, f)? * length;
    let z = wave_impedance(guide, f)?;
    let (ch, sh) = (gl.cosh(), gl.sinh());
    Ok(Abcd::new(ch, z * sh, sh / z, ch))
}

fn abcd_to_s(m: &Abcd, z0: Complex64) -> [[Complex64; 2]; 2] {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let denom = a + b / z0 + c * z0 + d;
    let det = a * d - b * c;
    [
        [(a + b / z0 - c * z0 - d) / denom, 2.0 * det / denom],
        [Complex64::new(2.0, 0.0) / denom, (-a + b / z0 - c * z0 + d) / denom],
    ]
}

/// Channel filter as a two-port (upstream, detector side) referred to the main guide.
pub fn channel_twoport(design: &ChannelDesign, grid: &FrequencyGrid) -> Result<SMatrix, FilterError> {
    let mut data = Vec::with_capacity(grid.len());
    for f in grid.iter() {
        let s = design.twoport_at(f)?;
        data.push(DMatrix::from_row_slice(2, 2, &[s[0][0], s[0][1], s[1][0], s[1][1]]));
    }
    Ok(SMatrix::new(grid.clone(), data, vec!["in".into(), "out".into()])?)
}

/// Lossless reciprocal symmetric shunt tee: `(1/3) [[-1,2,2],[2,-1,2],[2,2,-1]]`.
pub fn shunt_tee(grid: &FrequencyGrid) -> SMatrix {
    let m = DMatrix::from_fn(3, 3, |i, j| Complex64::new(if i == j { -1.0 / 3.0 } else { 2.0 / 3.0 }, 0.0));
    SMatrix::new(grid.clone(), vec![m; grid.len()], vec!["up".into(), "down".into(), "arm".into()])
        .expect("tee is well formed")
}

/// Channel on its junction: ports are upstream main, downstream main, detector tap.
pub fn channel_threeport(design: &ChannelDesign, grid: &FrequencyGrid) -> Result<SMatrix, FilterError> {
    let filter = channel_twoport(design, grid)?;
    let s = cascade_pair(&shunt_tee(grid), &filter, 2, 0)?;
    Ok(s.with_labels(vec!["up".into(), "down".into(), "tap".into()])?)
}

/// Convergence controls for [`synthesize_channel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisOptions {
    /// Allowed `|achieved_f0 - f0| / f0`.
    pub freq_tol_rel: f64,
    /// Allowed `|achieved_hpbw - hpbw| / hpbw`.
    pub hpbw_tol_rel: f64,
    pub max_iterations: usize,
    /// Points in each local sweep used to find the resonance.
    pub sweep_points: usize,
    /// Widest bandwidth accepted, as a fraction of the center frequency.
    pub max_fractional_bandwidth: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            freq_tol_rel: 1e-4,
            hpbw_tol_rel: 0.05,
            max_iterations: 100,
            sweep_points: 401,
            max_fractional_bandwidth: 0.1,
        }
    }
}

/// Measure the fundamental (lowest-frequency) resonance of a channel filter.
pub fn channel_response(design: &ChannelDesign, sweep_points: usize) -> Result<Passband, FilterError> {
    let (center, width) = locate_fundamental(design, sweep_points.max(64) * 5)?;
    measure_near(design, center, width, sweep_points)
}

/// Coarse sweep of the whole usable band; returns (peak, rough width).
fn locate_fundamental(design: &ChannelDesign, points: usize) -> Result<(f64, f64), FilterError> {
    let (lo, hi) = design.usable_band();
    let grid = FrequencyGrid::linspace(lo, hi, points).map_err(|e| FilterError::NoPassband(e.to_string()))?;
    let freqs = grid.points();
    let power: Vec<f64> = freqs.iter().map(|&f| design.transmission(f)).collect::<Result<_, _>>()?;
    let max = power.iter().copied().fold(0.0, f64::max);
    let first = (1..power.len() - 1)
        .find(|&i| power[i] >= power[i - 1] && power[i] >= power[i + 1] && power[i] >= 0.5 * max)
        .ok_or_else(|| FilterError::NoPassband("no resonance inside the usable band".into()))?;
    Ok((freqs[first], 4.0 * (freqs[1] - freqs[0])))
}

/// Resolve the resonance closest to `hint` by a local sweep, then refine the
/// peak by golden-section search and the half-power points by bisection.
fn measure_near(design: &ChannelDesign, hint: f64, width: f64, sweep_points: usize) -> Result<Passband, FilterError> {
    let (lo, hi) = design.usable_band();
    let points = sweep_points.max(16);
    let mut half_window = 3.0 * width;
    loop {
        let start = (hint - half_window).max(lo);
        let stop = (hint + half_window).min(hi);
        let step = (stop - start) / (points - 1) as f64;
        let freqs: Vec<f64> = (0..points).map(|i| start + step * i as f64).collect();
        let power: Vec<f64> = freqs.iter().map(|&f| design.transmission(f)).collect::<Result<_, _>>()?;
        let nearest = (1..points - 1)
            .filter(|&i| power[i] >= power[i - 1] && power[i] >= power[i + 1])
            .min_by(|&i, &j| (freqs[i] - hint).abs().total_cmp(&(freqs[j] - hint).abs()));
        if let Some(i) = nearest {
            let probe = |f: f64| design.transmission(f);
            let (f_peak, peak) = golden_max(&probe, freqs[i - 1], freqs[i + 1])?;
            let half = 0.5 * peak;
            let upper =
                crossing(&probe, f_peak, half, step, hi)?.ok_or(FilterError::BandEdge { side: "upper", f_peak })?;
            let lower =
                crossing(&probe, f_peak, half, -step, lo)?.ok_or(FilterError::BandEdge { side: "lower", f_peak })?;
            return Ok(Passband { f_peak, hpbw: upper - lower, peak_efficiency: peak });
        }
        if start <= lo && stop >= hi {
            return Err(FilterError::NoPassband(format!("no local maximum near {hint} Hz")));
        }
        half_window *= 2.0;
    }
}

fn golden_max<F>(probe: &F, mut a: f64, mut b: f64) -> Result<(f64, f64), FilterError>
where
    F: Fn(f64) -> Result<f64, FilterError>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (probe(c)?, probe(d)?);
    for _ in 0..200 {
        if (b - a) <= 1e-13 * b {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = probe(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = probe(d)?;
        }
    }
    let f = 0.5 * (a + b);
    Ok((f, probe(f)?))
}

/// Walk from `start` in steps of `step` (sign gives direction, growing slowly)
/// until the response drops below `level`, then bisect.
fn crossing<F>(probe: &F, start: f64, level: f64, step: f64, limit: f64) -> Result<Option<f64>, FilterError>
where
    F: Fn(f64) -> Result<f64, FilterError>,
{
    let dir = step.signum();
    let mut inside = start;
    let mut step = step.abs();
    loop {
        let mut next = inside + dir * step;
        if dir * (next - limit) > 0.0 {
            next = limit;
        }
        if probe(next)? < level {
            let mut outside = next;
            for _ in 0..200 {
                if (outside - inside).abs() <= 1e-13 * start {
                    break;
                }
                let mid = 0.5 * (inside + outside);
                if probe(mid)? < level {
                    outside = mid;
                } else {
                    inside = mid;
                }
            }
            return Ok(Some(0.5 * (inside + outside)));
        }
        if next == limit {
            return Ok(None);
        }
        inside = next;
        step *= 1.25;
    }
}

/// Find cavity and coupling lengths that put the fundamental resonance at
/// `f0` with half-power bandwidth `hpbw`.
///
/// Starts from a half guided wavelength of cavity and a quarter evanescent
/// decay length of coupling section, lengthens the coupling sections until
/// the passband is resolvable, then runs a damped secant (Broyden) iteration
/// on `((f_peak - f0) / f0, ln(hpbw_achieved / hpbw))`.
pub fn synthesize_channel(
    f0: f64,
    hpbw: f64,
    main_guide: &WaveguideSpec,
    options: &SynthesisOptions,
) -> Result<ChannelDesign, FilterError> {
    let unachievable = |reason: String| FilterError::Unachievable { f0, hpbw, reason };
    if !(hpbw.is_finite() && hpbw > 0.0) {
        return Err(unachievable("bandwidth must be positive".into()));
    }
    if hpbw > options.max_fractional_bandwidth * f0 {
        return Err(unachievable(format!(
            "fractional bandwidth {:.3} exceeds the {:.3} limit of a single-cavity channel",
            hpbw / f0,
            options.max_fractional_bandwidth
        )));
    }
    let seed = ChannelDesign::new(f0, hpbw, main_guide, 0.0, 0.0)?;
    let (lo, hi) = seed.usable_band();
    if !(f0 > lo && f0 < hi) {
        return Err(unachievable(format!(
            "center lies outside the {lo:.4e}..{hi:.4e} Hz single-mode band of {}",
            main_guide.name
        )));
    }
    let q_unloaded = unloaded_q(&seed.cavity_guide, f0)?;
    if hpbw * q_unloaded <= f0 {
        return Err(unachievable(format!(
            "loss-limited: cavity unloaded Q is {q_unloaded:.0}, so no passband narrower than \
             {:.4e} Hz can be reached",
            f0 / q_unloaded
        )));
    }

    let cavity0 = 0.5 * guided_wavelength(&seed.cavity_guide, f0)?;
    let narrow0 = 0.25 / propagation_constant(&seed.narrow_guide, f0)?.re;
    let scale = [cavity0, narrow0];
    let design_at = |x: [f64; 2]| seed.with_lengths(x[0] * scale[0], x[1] * scale[1]);
    let residual = |p: &Passband| [(p.f_peak - f0) / f0, (p.hpbw / hpbw).ln()];
    let converged = |p: &Passband| {
        (p.f_peak - f0).abs() <= options.freq_tol_rel * f0 && (p.hpbw - hpbw).abs() <= options.hpbw_tol_rel * hpbw
    };
    let norm = |r: [f64; 2]| r[0].hypot(r[1]);
    let sweep = options.sweep_points;

    let mut iterations = 0;
    let mut x = [1.0, 1.0];
    let mut response = loop {
        let candidate = design_at(x);
        let measured =
            locate_fundamental(&candidate, sweep * 5).and_then(|(c, w)| measure_near(&candidate, c, w, sweep));
        match measured {
            Ok(p) => break p,
            Err(FilterError::BandEdge { .. }) | Err(FilterError::NoPassband(_))
                if iterations < options.max_iterations =>
            {
                iterations += 1;
                x[1] *= 1.5;
            }
            Err(_) => {
                return Err(FilterError::NonConvergence {
                    f0,
                    iterations,
                    last: Box::new(candidate),
                    last_response: None,
                })
            }
        }
    };
    let measure = |x: [f64; 2], near: &Passband| -> Option<Passband> {
        if x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return None;
        }
        measure_near(&design_at(x), near.f_peak, near.hpbw, sweep).ok()
    };

    let mut r = residual(&response);
    let mut jacobian: Option<[[f64; 2]; 2]> = None;
    let mut fresh = false;
    while !converged(&response) {
        if iterations >= options.max_iterations {
            return Err(FilterError::NonConvergence {
                f0,
                iterations,
                last: Box::new(design_at(x)),
                last_response: Some(response),
            });
        }
        iterations += 1;

        let j = match jacobian {
            Some(j) => j,
            None => {
                fresh = true;
                finite_difference_jacobian(&measure, x, &response, r, residual).ok_or_else(|| {
                    FilterError::NonConvergence {
                        f0,
                        iterations,
                        last: Box::new(design_at(x)),
                        last_response: Some(response),
                    }
                })?
            }
        };
        let Some(mut dx) = solve2(j, [-r[0], -r[1]]) else {
            jacobian = None;
            if fresh {
                return Err(FilterError::NonConvergence {
                    f0,
                    iterations,
                    last: Box::new(design_at(x)),
                    last_response: Some(response),
                });
            }
            continue;
        };
        // Keep each step within 40% of the current lengths so the search
        // stays on the same resonance branch.
        let biggest = (dx[0] / x[0]).abs().max((dx[1] / x[1]).abs());
        if biggest > 0.4 {
            dx = [dx[0] * 0.4 / biggest, dx[1] * 0.4 / biggest];
        }

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            if let Some(p) = measure(trial, &response) {
                let rt = residual(&p);
                if norm(rt) < (1.0 - 1e-4 * lambda) * norm(r) {
                    accepted = Some((trial, p, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, p, rt)) => {
                let step = [trial[0] - x[0], trial[1] - x[1]];
                let dr = [rt[0] - r[0], rt[1] - r[1]];
                jacobian = Some(broyden_update(j, step, dr));
                fresh = false;
                debug!(
                    "synthesis {f0:.6e}: iter {iterations} cavity {:.6e} m narrow {:.6e} m -> peak {:.6e} Hz hpbw {:.6e} Hz",
                    trial[0] * scale[0],
                    trial[1] * scale[1],
                    p.f_peak,
                    p.hpbw
                );
                x = trial;
                response = p;
                r = rt;
            }
            None if !fresh => jacobian = None,
            None => {
                return Err(FilterError::NonConvergence {
                    f0,
                    iterations,
                    last: Box::new(design_at(x)),
                    last_response: Some(response),
                })
            }
        }
    }

    let mut design = design_at(x);
    design.achieved = Some(response);
    Ok(design)
}

fn finite_difference_jacobian<M, R>(
    measure: &M,
    x: [f64; 2],
    base: &Passband,
    r: [f64; 2],
    residual: R,
) -> Option<[[f64; 2]; 2]>
where
    M: Fn([f64; 2], &Passband) -> Option<Passband>,
    R: Fn(&Passband) -> [f64; 2],
{
    let mut j = [[0.0; 2]; 2];
    for col in 0..2 {
        let h = 1e-4 * x[col];
        let mut xp = x;
        xp[col] += h;
        let rp = residual(&measure(xp, base)?);
        j[0][col] = (rp[0] - r[0]) / h;
        j[1][col] = (rp[1] - r[1]) / h;
    }
    Some(j)
}

fn solve2(j: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let scale = j.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if !(det.abs() > 1e-14 * scale * scale) {
        return None;
    }
    Some([(b[0] * j[1][1] - j[0][1] * b[1]) / det, (j[0][0] * b[1] - b[0] * j[1][0]) / det])
}

fn broyden_update(j: [[f64; 2]; 2], dx: [f64; 2], dr: [f64; 2]) -> [[f64; 2]; 2] {
    let denom = dx[0] * dx[0] + dx[1] * dx[1];
    let mut out = j;
    for row in 0..2 {
        let predicted = j[row][0] * dx[0] + j[row][1] * dx[1];
        let err = dr[row] - predicted;
        for col in 0..2 {
            out[row][col] += err * dx[col] / denom;
        }
    }
    out
}

/// Ordered bank: channels along the through guide with a connecting
/// section (length in meters) in front of each channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankLayout {
    pub channels: Vec<ChannelDesign>,
    pub spacings: Vec<f64>,
    pub main_guide: WaveguideSpec,
}

impl BankLayout {
    pub fn new(
        channels: Vec<ChannelDesign>,
        spacings: Vec<f64>,
        main_guide: WaveguideSpec,
    ) -> Result<Self, FilterError> {
        let layout = Self { channels, spacings, main_guide };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.channels.is_empty() {
            return Err(FilterError::BadLayout("bank has no channels".into()));
        }
        if self.spacings.len() != self.channels.len() {
            return Err(FilterError::BadLayout(format!(
                "{} spacings for {} channels",
                self.spacings.len(),
                self.channels.len()
            )));
        }
        if let Some(s) = self.spacings.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(FilterError::BadLayout(format!("spacing {s} m is negative")));
        }
        if self.channels.windows(2).any(|w| w[0].f0_target < w[1].f0_target) {
            return Err(FilterError::BadLayout("channels must be ordered by descending center frequency".into()));
        }
        if let Some(c) = self.channels.iter().find(|c| c.main_guide != self.main_guide) {
            return Err(FilterError::BadLayout(format!(
                "channel at {} Hz is built on guide {:?}, bank uses {:?}",
                c.f0_target, c.main_guide.name, self.main_guide.name
            )));
        }
        Ok(())
    }

    pub fn n_ports(&self) -> usize {
        self.channels.len() + 2
    }

    /// `in`, `tap_00`..`tap_NN`, `thru`.
    pub fn port_labels(&self) -> Vec<String> {
        std::iter::once("in".to_string())
            .chain((0..self.channels.len()).map(|i| format!("tap_{i:02}")))
            .chain(std::iter::once("thru".to_string()))
            .collect()
    }

    pub fn total_length(&self) -> f64 {
        self.spacings.iter().sum()
    }
}

/// Sort channels into bank order (descending center frequency).
pub fn sort_for_bank(channels: &mut [ChannelDesign]) {
    channels.sort_by(|a, b| b.f0_target.total_cmp(&a.f0_target));
}

/// `(N+2)`-port bank: input, one tap per channel in bank order, through port.
pub fn assemble_bank(layout: &BankLayout, grid: &FrequencyGrid) -> Result<SMatrix, FilterError> {
    layout.validate()?;
    let mut links = Vec::with_capacity(2 * layout.channels.len());
    for (channel, &spacing) in layout.channels.iter().zip(&layout.spacings) {
        links.push(ChainLink::through(section_smatrix(&layout.main_guide, spacing, grid)?));
        links.push(ChainLink::new(channel_threeport(channel, grid)?, 0, 1));
    }
    Ok(cascade_chain(&links)?.with_labels(layout.port_labels())?)
}

/// Tap power `|S_tap,in|^2` of one channel across the bank's grid.
pub fn tap_power(bank: &SMatrix, tap_index: usize) -> Vec<f64> {
    bank.power(1 + tap_index, 0)
}

/// Peak, half-power bandwidth and peak efficiency of one tap of an assembled bank.
pub fn passband_metrics(bank: &SMatrix, tap_index: usize) -> Result<Passband, FilterError> {
    if bank.n_ports() < 3 || tap_index + 2 >= bank.n_ports() {
        return Err(FilterError::BadLayout(format!(
            "tap {tap_index} does not exist on a {}-port bank",
            bank.n_ports()
        )));
    }
    passband_from_samples(bank.grid().points(), &tap_power(bank, tap_index))
}

/// Passband of sampled power: parabolic peak interpolation and linearly
/// interpolated half-power crossings.
pub fn passband_from_samples(freqs: &[f64], power: &[f64]) -> Result<Passband, FilterError> {
    if freqs.len() != power.len() || freqs.len() < 3 {
        return Err(FilterError::NoPassband("need at least three matching samples".into()));
    }
    let i = power.iter().enumerate().fold(0, |best, (k, &p)| if p > power[best] { k } else { best });
    let (f_peak, peak) = if i == 0 || i + 1 == power.len() {
        (freqs[i], power[i])
    } else {
        parabola_vertex([freqs[i - 1], freqs[i], freqs[i + 1]], [power[i - 1], power[i], power[i + 1]])
    };
    let half = 0.5 * peak;
    let interpolate = |j: usize, k: usize| freqs[j] + (half - power[j]) * (freqs[k] - freqs[j]) / (power[k] - power[j]);
    let upper = (i + 1..power.len())
        .find(|&k| power[k] < half)
        .map(|k| interpolate(k - 1, k))
        .ok_or(FilterError::BandEdge { side: "upper", f_peak })?;
    let lower = (0..i)
        .rev()
        .find(|&k| power[k] < half)
        .map(|k| interpolate(k + 1, k))
        .ok_or(FilterError::BandEdge { side: "lower", f_peak })?;
    Ok(Passband { f_peak, hpbw: upper - lower, peak_efficiency: peak })
}

fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (d2 - d1) / (x[2] - x[0]);
    if !(curvature < 0.0) {
        return (x[1], y[1]);
    }
    // y = y1 + b (x - x1) + c (x - x1)^2 with c = curvature
    let b = d1 + curvature * (x[1] - x[0]);
    let offset = (-b / (2.0 * curvature)).clamp(x[0] - x[1], x[2] - x[1]);
    (x[1] + offset, y[1] + b * offset + curvature * offset * offset)
}

/// Spacing candidates in guided wavelengths: 1.00 to 3.00 in steps of 0.25.
pub fn default_spacing_candidates() -> Vec<f64> {
    (0..=8).map(|i| 1.0 + 0.25 * i as f64).collect()
}

/// Figure of merit maximized by [`optimize_spacings`].
pub enum SpacingObjective<'a> {
    /// Mean over channels of the tap power at each channel's own center.
    MeanTapPowerAtCenters,
    /// Caller-supplied score of the bank S-matrix evaluated on the search grid.
    Custom(&'a (dyn Fn(&SMatrix) -> f64 + Sync)),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpacingOutcome {
    pub layout: BankLayout,
    /// Spacing of each link in guided wavelengths.
    pub multipliers: Vec<f64>,
    /// Guided wavelength at the band center, meters.
    pub wavelength: f64,
    pub objective: f64,
    pub initial_objective: f64,
}

const TIE_TOLERANCE: f64 = 1e-9;

/// Coordinate descent over per-link spacing multipliers.
///
/// Starts from one guided wavelength per link and sweeps the links in bank
/// order, trying every candidate for one link while holding the others.
/// A candidate replaces the incumbent if it scores higher, or if it scores
/// the same (within a relative 1e-9) and gives a shorter bank.
pub fn optimize_spacings(
    channels: &[ChannelDesign],
    candidates: &[f64],
    objective: &SpacingObjective<'_>,
    grid: &FrequencyGrid,
) -> Result<SpacingOutcome, FilterError> {
    if candidates.is_empty() {
        return Err(FilterError::EmptyCandidates);
    }
    if let Some(m) = candidates.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(FilterError::BadLayout(format!("spacing multiplier {m} is negative")));
    }
    let mut channels = channels.to_vec();
    if channels.is_empty() {
        return Err(FilterError::BadLayout("bank has no channels".into()));
    }
    sort_for_bank(&mut channels);
    let main_guide = channels[0].main_guide.clone();
    let centers: Vec<f64> = channels.iter().map(ChannelDesign::center).collect();
    let wavelength = spacing_wavelength(&channels)?;

    let eval_grid = match objective {
        SpacingObjective::MeanTapPowerAtCenters => {
            let mut points = centers.clone();
            points.sort_by(f64::total_cmp);
            points.dedup();
            FrequencyGrid::new(points).map_err(|e| FilterError::BadLayout(e.to_string()))?
        }
        SpacingObjective::Custom(_) => grid.clone(),
    };
    let score = |multipliers: &[f64]| -> Result<f64, FilterError> {
        let layout = BankLayout::new(
            channels.clone(),
            multipliers.iter().map(|m| m * wavelength).collect(),
            main_guide.clone(),
        )?;
        let bank = assemble_bank(&layout, &eval_grid)?;
        Ok(match objective {
            SpacingObjective::MeanTapPowerAtCenters => {
                centers
                    .iter()
                    .enumerate()
                    .map(|(tap, &fc)| {
                        let k =
                            eval_grid.points().iter().position(|&f| f == fc).expect("center is on the evaluation grid");
                        bank.get(k, 1 + tap, 0).norm_sqr()
                    })
                    .sum::<f64>()
                    / centers.len() as f64
            }
            SpacingObjective::Custom(f) => f(&bank),
        })
    };

    let n = channels.len();
    let mut current = vec![1.0; n];
    let initial_objective = score(&current)?;
    let mut best = initial_objective;
    let better = |candidate: f64, incumbent: f64, shorter: bool| {
        let tol = TIE_TOLERANCE * incumbent.abs().max(f64::MIN_POSITIVE);
        candidate > incumbent + tol || (shorter && candidate >= incumbent - tol)
    };

    for sweep in 0..50 {
        let mut changed = false;
        for link in 0..n {
            let scores: Vec<(f64, Result<f64, FilterError>)> = candidates
                .par_iter()
                .map(|&m| {
                    let mut trial = current.clone();
                    trial[link] = m;
                    (m, score(&trial))
                })
                .collect();
            for (m, result) in scores {
                // A resonant connection at some candidate just rules that candidate out.
                let Ok(value) = result else { continue };
                let shorter = m < current[link];
                if m != current[link] && better(value, best, shorter) {
                    current[link] = m;
                    best = value;
                    changed = true;
                }
            }
        }
        debug!("spacing sweep {sweep}: objective {best:.6} multipliers {current:?}");
        if !changed {
            break;
        }
    }

    if best < initial_objective {
        current = vec![1.0; n];
        best = initial_objective;
    }
    let layout = BankLayout::new(channels, current.iter().map(|m| m * wavelength).collect(), main_guide)?;
    Ok(SpacingOutcome { layout, multipliers: current, wavelength, objective: best, initial_objective })
}

/// Guided wavelength in the main guide midway between the highest and
/// lowest channel centers. Spacing multipliers are in units of this.
pub fn spacing_wavelength(channels: &[ChannelDesign]) -> Result<f64, FilterError> {
    let first = channels.first().ok_or_else(|| FilterError::BadLayout("bank has no channels".into()))?;
    let (lo, hi) = channels
        .iter()
        .map(ChannelDesign::center)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f), hi.max(f)));
    Ok(guided_wavelength(&first.main_guide, 0.5 * (lo + hi))?)
}

/// Evanescent decay length `1 / alpha` of a below-cutoff guide at `f`.
pub fn decay_length(guide: &WaveguideSpec, f: f64) -> Result<f64, FilterError> {
    let gamma = propagation_constant(guide, f)?;
    if gamma.im != 0.0 {
        return Err(FilterError::NoPassband(format!("{} propagates at {f} Hz", guide.name)));
    }
    Ok(1.0 / gamma.re)
}

/// Half guided wavelength in the cavity guide at `f`.
pub fn half_wavelength(guide: &WaveguideSpec, f: f64) -> Result<f64, FilterError> {
    Ok(0.5 * guided_wavelength(guide, f)?)
}
