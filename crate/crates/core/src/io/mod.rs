//! Files and data: WAV, stem datasets, synthetic fixtures, run
//! configuration and long-input inference.

mod config;
mod dataset;
mod fixture;
mod stitch;
mod wav;

pub use config::RunConfig;
pub use dataset::{read_source_dir, DatasetLayout, MIXTURE_FILE};
pub use fixture::{energy_below, source_band, synth_fixture, FixtureKind};
pub use stitch::{fade_weight, separate_long, stitch_windows, weight_sum, window_starts, INFERENCE_WINDOW_SECONDS};
pub use wav::{encode_wav, parse_wav, read_wav, write_wav, WavFormat};
