//! From per-window picker outputs to classified picks.

mod picks;
mod windows;

pub use picks::{
    classify_noise, classify_picks, evaluate_waveform, extract_picks, ClassifiedWaveform, Pick,
    PickClass, WaveformCounts, DEFAULT_TP_HALF_WIDTH_S,
};
pub use windows::{
    aggregate_windows, group_by_waveform, read_window_outputs, slice_windows, window_offsets,
    write_window_outputs, ProbabilityTrace, WindowOutput, DEFAULT_STRIDE_SAMPLES,
    DEFAULT_WINDOW_SAMPLES,
};
