//! Independent numerical ground truth: the winding-resolved lattice path
//! integral and the monitored-path sampler.

mod lattice;
mod monitored;

pub use lattice::{
    free_class_amplitudes, free_class_amplitudes_with_lengths, richardson_error, untracked_amplitude, LatticeAmplitudes,
    LatticeSpec, DEFAULT_MEMORY_BUDGET,
};
pub use monitored::{monitored_length, monitored_length_with, MonitorSpec, MonitoredLength};

use crate::homotopy::HomotopyError;
use crate::propagator::PropagatorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("lattice geometry: {0}")]
    Geometry(String),
    #[error("lattice resolution: {0}")]
    Resolution(String),
    #[error("memory estimate {required} bytes exceeds budget {budget} bytes")]
    Capacity { required: usize, budget: usize },
    #[error(transparent)]
    Homotopy(#[from] HomotopyError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

/// `class_index,winding_vector,re,im,overflow_flag`; the overflow bucket is the
/// last row, with class index 0 and winding `overflow`.
pub fn write_amplitudes_csv<W: std::io::Write>(amps: &LatticeAmplitudes, mut out: W) -> std::io::Result<()> {
    use crate::csvio::num;
    writeln!(out, "class_index,winding_vector,re,im,overflow_flag")?;
    for (c, v) in amps.classes.iter().zip(&amps.amplitudes) {
        writeln!(out, "{},{},{},{},0", c.index, c.label(), num(v.re), num(v.im))?;
    }
    writeln!(out, "0,overflow,{},{},1", num(amps.overflow.re), num(amps.overflow.im))
}
