//! Coded-transmission acousto-optic imaging.
//!
//! - [`codes`]: S-sequences from quadratic residues.
//! - [`demux`]: circulant S-matrix inversion and interleaved stream demultiplexing.
//! - [`simulator`]: forward model of single-pulse and coded acquisition over a diffuse phantom.
//! - [`pipeline`]: envelope extraction, FWHM, SNR and multiplexing-advantage experiments.
//! - [`config`], [`stream_file`], [`plot`], [`cli`]: file formats and the command-line front end.

pub mod cli;
pub mod codes;
pub mod config;
pub mod demux;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod simulator;
pub mod stream_file;

pub use codes::{generate_s_sequence, quadratic_residues, validate_order, SSequence};
pub use demux::{
    build_system, deinterleave, demultiplex_stream, reinterleave, CirculantSystem, DepthProfile, InverseKind,
    MultiplexedFrame,
};
pub use error::{Error, Result};
pub use pipeline::{
    extract_modulated, measure_fwhm, measure_snr, multiplexing_advantage, AdvantageCurve, Reconstructor,
    ReferenceRate, SnrOptions, SnrReport,
};
pub use simulator::{
    pulse_waveform, scan_2d, simulate_object, simulate_stream, AcquisitionConfig,
    Boundary, Mode, Phantom, SampledStream, ScanGrid, ScanMap,
};
