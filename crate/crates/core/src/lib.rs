//! Waveguide filter-bank design, S-matrix network algebra, radiometer
//! noise budgets and the chopped-radiometer data reduction chain.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod filterbank;
pub mod grid;
pub mod network;
pub mod pipeline;
pub mod radiometry;
pub mod synth;
pub mod waveguide;

pub use filterbank::{
    assemble_bank, channel_response, optimize_spacings, passband_metrics, synthesize_channel, BankLayout,
    ChannelDesign, FilterError, Passband, SpacingObjective, SynthesisOptions,
};
pub use grid::FrequencyGrid;
pub use network::{
    brute_force_solve, cascade_chain, cascade_pair, validate, ChainLink, ConnectionGraph, NetworkError, Property,
    SMatrix,
};
pub use pipeline::{
    calibrate, deglitch, demodulate, load_timestream, quality_report, GlitchReport, PipelineError, Timestream,
};
pub use radiometry::{
    net_from_samples, noise_budget, noise_figure_to_temperature, radiometer_net, two_point_fit, CalibrationTable,
    RadiometerChain,
};
pub use synth::{generate, write_timestream, Scenario};
pub use waveguide::{Conductor, WaveguideSpec};
