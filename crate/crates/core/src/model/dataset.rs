use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::records::{SourceRecord, WaveformKind, WaveformRecord};
use super::trace::{self, TraceSamples};
use crate::error::{Error, Result};

pub const METADATA_SCHEMA: &str = "picker-bench/1";

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum MetadataLine {
    Source(SourceRecord),
    Waveform(WaveformRecord),
}

/// Validated, immutable collection of sources and waveforms.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    sources: Vec<SourceRecord>,
    waveforms: Vec<WaveformRecord>,
    source_index: HashMap<String, usize>,
    waveform_index: HashMap<String, usize>,
    source_waveforms: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn new(sources: Vec<SourceRecord>, waveforms: Vec<WaveformRecord>) -> Result<Self> {
        let mut source_index = HashMap::with_capacity(sources.len());
        for (i, s) in sources.iter().enumerate() {
            s.validate()?;
            if source_index.insert(s.source_id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "source",
                    id: s.source_id.clone(),
                });
            }
        }
        let mut waveform_index = HashMap::with_capacity(waveforms.len());
        let mut source_waveforms = vec![Vec::new(); sources.len()];
        for (i, w) in waveforms.iter().enumerate() {
            w.validate()?;
            if waveform_index.insert(w.waveform_id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "waveform",
                    id: w.waveform_id.clone(),
                });
            }
            if let Some(sid) = &w.source_id {
                let si = *source_index.get(sid).ok_or_else(|| Error::DanglingSource {
                    waveform_id: w.waveform_id.clone(),
                    source_id: sid.clone(),
                })?;
                source_waveforms[si].push(i);
            }
        }
        Ok(Dataset {
            sources,
            waveforms,
            source_index,
            waveform_index,
            source_waveforms,
        })
    }

    pub fn sources(&self) -> &[SourceRecord] {
        &self.sources
    }

    pub fn waveforms(&self) -> &[WaveformRecord] {
        &self.waveforms
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty() && self.waveforms.is_empty()
    }

    pub fn source(&self, id: &str) -> Option<&SourceRecord> {
        self.source_index.get(id).map(|&i| &self.sources[i])
    }

    pub fn waveform(&self, id: &str) -> Option<&WaveformRecord> {
        self.waveform_index.get(id).map(|&i| &self.waveforms[i])
    }

    pub fn source_position(&self, id: &str) -> Option<usize> {
        self.source_index.get(id).copied()
    }

    /// Waveforms recorded for the source at `source_pos`, in dataset order.
    pub fn waveforms_of(&self, source_pos: usize) -> impl Iterator<Item = &WaveformRecord> {
        self.source_waveforms[source_pos]
            .iter()
            .map(|&i| &self.waveforms[i])
    }

    pub fn noise_waveforms(&self) -> impl Iterator<Item = &WaveformRecord> {
        self.waveforms
            .iter()
            .filter(|w| w.kind == WaveformKind::Noise)
    }

    pub fn earthquake_waveforms(&self) -> impl Iterator<Item = &WaveformRecord> {
        self.waveforms
            .iter()
            .filter(|w| w.kind == WaveformKind::Earthquake)
    }

    /// Reads the samples referenced by `waveform.trace_ref`, resolving
    /// relative locators against `base_dir`, and checks the sample count.
    pub fn load_trace(&self, base_dir: &Path, waveform: &WaveformRecord) -> Result<TraceSamples> {
        let locator = waveform
            .trace_ref
            .as_deref()
            .ok_or_else(|| Error::InvalidRecord {
                id: waveform.waveform_id.clone(),
                message: "no trace_ref".into(),
            })?;
        let path = resolve(base_dir, locator);
        let samples = trace::load_trace(&path)?;
        if samples.n_samples() != waveform.n_samples {
            return Err(Error::TraceFormat(format!(
                "{}: metadata says {} samples, file holds {}",
                waveform.waveform_id,
                waveform.n_samples,
                samples.n_samples()
            )));
        }
        Ok(samples)
    }

    pub fn write_metadata<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<metadata writer>", e);
        serde_json::to_writer(
            &mut out,
            &Header {
                schema: METADATA_SCHEMA.to_string(),
            },
        )?;
        out.write_all(b"\n").map_err(io)?;
        for s in &self.sources {
            serde_json::to_writer(&mut out, &MetadataLine::Source(s.clone()))?;
            out.write_all(b"\n").map_err(io)?;
        }
        for w in &self.waveforms {
            serde_json::to_writer(&mut out, &MetadataLine::Waveform(w.clone()))?;
            out.write_all(b"\n").map_err(io)?;
        }
        Ok(())
    }

    pub fn to_metadata_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_metadata(&mut buf)
            .expect("writing metadata to memory cannot fail");
        buf
    }

    pub fn read_metadata<R: BufRead>(reader: R) -> Result<Self> {
        let mut sources = Vec::new();
        let mut waveforms = Vec::new();
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !saw_header {
                let header: Header = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
                    line: line_no,
                    message: format!("expected schema header: {e}"),
                })?;
                if header.schema != METADATA_SCHEMA {
                    return Err(Error::Schema(header.schema));
                }
                saw_header = true;
                continue;
            }
            let record: MetadataLine = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            match record {
                MetadataLine::Source(s) => sources.push(s),
                MetadataLine::Waveform(w) => waveforms.push(w),
            }
        }
        Dataset::new(sources, waveforms)
    }
}

/// Loads and validates a newline-delimited JSON metadata file.
pub fn load_metadata(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::read_metadata(BufReader::new(file))
}

fn resolve(base_dir: &Path, locator: &str) -> PathBuf {
    let p = Path::new(locator);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        Dataset::read_metadata(text.as_bytes())
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let ds = parse("").unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn minimal_dataset() {
        let text = concat!(
            "{\"schema\":\"picker-bench/1\"}\n",
            "{\"type\":\"source\",\"source_id\":\"S1\",\"latitude\":42.1,\"longitude\":13.2}\n",
            "{\"type\":\"waveform\",\"waveform_id\":\"W1\",\"kind\":\"earthquake\",\"source_id\":\"S1\",",
            "\"station_latitude\":42.0,\"station_longitude\":13.0,\"p_arrival_index\":500,\"n_samples\":3001}\n",
        );
        let ds = parse(text).unwrap();
        assert_eq!((ds.sources().len(), ds.waveforms().len()), (1, 1));
        assert_eq!(ds.waveforms()[0].sampling_rate_hz, 100.0);
        assert_eq!(ds.waveforms_of(0).count(), 1);
    }

    #[test]
    fn dangling_source_is_named() {
        let text = concat!(
            "{\"schema\":\"picker-bench/1\"}\n",
            "{\"type\":\"waveform\",\"waveform_id\":\"W1\",\"kind\":\"earthquake\",\"source_id\":\"X\",",
            "\"station_latitude\":42.0,\"station_longitude\":13.0,\"p_arrival_index\":5,\"n_samples\":30}\n",
        );
        let err = parse(text).unwrap_err();
        assert!(matches!(&err, Error::DanglingSource { source_id, .. } if source_id == "X"));
        assert!(err.to_string().contains("\"X\""));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"schema\":\"picker-bench/1\"}\n\n{\"type\":\"source\",\"source_id\":\n";
        match parse(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_range_errors() {
        let dup = concat!(
            "{\"schema\":\"picker-bench/1\"}\n",
            "{\"type\":\"source\",\"source_id\":\"S\",\"latitude\":1,\"longitude\":1}\n",
            "{\"type\":\"source\",\"source_id\":\"S\",\"latitude\":2,\"longitude\":2}\n",
        );
        assert!(matches!(parse(dup), Err(Error::DuplicateId { .. })));
        let range = concat!(
            "{\"schema\":\"picker-bench/1\"}\n",
            "{\"type\":\"source\",\"source_id\":\"S\",\"latitude\":91,\"longitude\":1}\n",
        );
        assert!(matches!(parse(range), Err(Error::InvalidRecord { .. })));
    }

    #[test]
    fn missing_or_wrong_header() {
        let no_header =
            "{\"type\":\"source\",\"source_id\":\"S\",\"latitude\":1,\"longitude\":1}\n";
        assert!(matches!(
            parse(no_header),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("{\"schema\":\"picker-bench/9\"}\n"),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn metadata_round_trip_is_field_exact() {
        let mut s = SourceRecord::new("S1", 45.123456789, 7.5);
        s.depth_km = Some(10.25);
        s.magnitude = Some(2.1);
        s.origin_time = Some("2019-01-01T00:00:00Z".into());
        let mut w = WaveformRecord::earthquake("W1", "S1", (45.0, 7.25), 1234, 6000);
        w.s_arrival_index = Some(1900);
        w.trace_ref = Some("traces/W1.pbt".into());
        let n = WaveformRecord::noise("N1", (44.0, 8.0), 6000);
        let ds = Dataset::new(vec![s], vec![w, n]).unwrap();
        let bytes = ds.to_metadata_bytes();
        let back = Dataset::read_metadata(bytes.as_slice()).unwrap();
        assert_eq!(back.sources(), ds.sources());
        assert_eq!(back.waveforms(), ds.waveforms());
        assert_eq!(back.to_metadata_bytes(), bytes);
    }
}
