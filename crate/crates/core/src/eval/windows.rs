use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 30 s at 100 Hz, plus the closing sample.
pub const DEFAULT_WINDOW_SAMPLES: usize = 3001;
/// 30 s windows overlapping by 28 s at 100 Hz.
pub const DEFAULT_STRIDE_SAMPLES: usize = 200;

/// P-arrival probabilities a picker produced for one window of a waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOutput {
    pub waveform_id: String,
    pub window_start_index: usize,
    pub probabilities: Vec<f32>,
}

/// Per-sample P probabilities for a whole waveform. Samples with zero
/// coverage are undefined and never picked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTrace {
    pub waveform_id: String,
    pub values: Vec<f64>,
    pub coverage: Vec<u32>,
}

impl ProbabilityTrace {
    /// A fully defined trace, as if one window covered everything.
    pub fn dense(waveform_id: impl Into<String>, values: Vec<f64>) -> Self {
        let coverage = vec![1; values.len()];
        ProbabilityTrace {
            waveform_id: waveform_id.into(),
            values,
            coverage,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_defined(&self, index: usize) -> bool {
        self.coverage[index] > 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.coverage.len() {
            return Err(Error::invalid(format!(
                "trace {}: {} values but {} coverage entries",
                self.waveform_id,
                self.values.len(),
                self.coverage.len()
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!(
                "trace {}: value {v} outside [0, 1]",
                self.waveform_id
            )));
        }
        Ok(())
    }
}

/// Start offsets of full-length windows with the given stride; the tail
/// shorter than one window is left uncovered.
pub fn window_offsets(n_samples: usize, window_len: usize, stride: usize) -> Vec<usize> {
    if window_len == 0 || stride == 0 || window_len > n_samples {
        return Vec::new();
    }
    (0..=n_samples - window_len).step_by(stride).collect()
}

/// Cuts a dense probability vector into overlapping windows.
pub fn slice_windows(
    waveform_id: &str,
    values: &[f64],
    window_len: usize,
    stride: usize,
) -> Vec<WindowOutput> {
    window_offsets(values.len(), window_len, stride)
        .into_iter()
        .map(|start| WindowOutput {
            waveform_id: waveform_id.to_string(),
            window_start_index: start,
            probabilities: values[start..start + window_len]
                .iter()
                .map(|&v| v as f32)
                .collect(),
        })
        .collect()
}

/// Averages overlapping window outputs into one trace per waveform.
pub fn aggregate_windows(windows: &[WindowOutput], n_samples: usize) -> Result<ProbabilityTrace> {
    let first = windows
        .first()
        .ok_or_else(|| Error::invalid("no windows to aggregate"))?;
    let len = first.probabilities.len();
    let mut sums = vec![0.0f64; n_samples];
    let mut coverage = vec![0u32; n_samples];
    let mut lo = vec![f64::INFINITY; n_samples];
    let mut hi = vec![f64::NEG_INFINITY; n_samples];
    for w in windows {
        if w.waveform_id != first.waveform_id {
            return Err(Error::invalid(format!(
                "windows from {} and {} mixed",
                first.waveform_id, w.waveform_id
            )));
        }
        if w.probabilities.len() != len {
            return Err(Error::invalid(format!(
                "{}: window lengths {} and {} differ",
                w.waveform_id,
                len,
                w.probabilities.len()
            )));
        }
        let end = w.window_start_index + len;
        if end > n_samples {
            return Err(Error::invalid(format!(
                "{}: window at {} of length {len} runs past {n_samples} samples",
                w.waveform_id, w.window_start_index
            )));
        }
        for (j, &p) in w.probabilities.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!(
                    "{}: probability {p} outside [0, 1]",
                    w.waveform_id
                )));
            }
            let at = w.window_start_index + j;
            let p = f64::from(p);
            sums[at] += p;
            coverage[at] += 1;
            lo[at] = lo[at].min(p);
            hi[at] = hi[at].max(p);
        }
    }
    // Rounding in the sum can push a mean one ulp outside its inputs.
    let values = (0..n_samples)
        .map(|i| match coverage[i] {
            0 => 0.0,
            c => (sums[i] / f64::from(c)).clamp(lo[i], hi[i]),
        })
        .collect();
    Ok(ProbabilityTrace {
        waveform_id: first.waveform_id.clone(),
        values,
        coverage,
    })
}

pub fn read_window_outputs<R: BufRead>(reader: R) -> Result<Vec<WindowOutput>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_window_outputs<W: Write>(mut out: W, windows: &[WindowOutput]) -> Result<()> {
    for w in windows {
        serde_json::to_writer(&mut out, w)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<window writer>", e))?;
    }
    Ok(())
}

/// Groups windows by waveform, preserving file order within each group.
pub fn group_by_waveform(windows: Vec<WindowOutput>) -> BTreeMap<String, Vec<WindowOutput>> {
    let mut groups: BTreeMap<String, Vec<WindowOutput>> = BTreeMap::new();
    for w in windows {
        groups.entry(w.waveform_id.clone()).or_default().push(w);
    }
    groups
}
