//! Separation quality (chunked SDR) and speed (real-time factor).

mod rtf;
mod sdr;

pub use rtf::{measure_rtf, RtfReport};
pub use sdr::{chunk_sdrs, chunked_median_sdr, median, sdr, SdrReport, SourceSdr, SDR_CAP_DB, SILENCE_ENERGY};
