//! Binary trace files: `PBT1`, u32 LE sample count, then Z, N, E blocks of
//! little-endian f32.

use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_MAGIC: &[u8; 4] = b"PBT1";

/// Component order within a trace file.
pub const COMPONENTS: [&str; 3] = ["Z", "N", "E"];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSamples {
    components: [Vec<f32>; 3],
}

impl TraceSamples {
    pub fn new(z: Vec<f32>, n: Vec<f32>, e: Vec<f32>) -> Result<Self> {
        if z.len() != n.len() || z.len() != e.len() {
            return Err(Error::TraceFormat(format!(
                "component lengths differ: {}, {}, {}",
                z.len(),
                n.len(),
                e.len()
            )));
        }
        if u32::try_from(z.len()).is_err() {
            return Err(Error::TraceFormat("too many samples for u32 header".into()));
        }
        Ok(TraceSamples {
            components: [z, n, e],
        })
    }

    pub fn n_samples(&self) -> usize {
        self.components[0].len()
    }

    pub fn component(&self, index: usize) -> &[f32] {
        &self.components[index]
    }

    pub fn components(&self) -> &[Vec<f32>; 3] {
        &self.components
    }

    pub fn encode(&self) -> Vec<u8> {
        let n = self.n_samples();
        let mut out = Vec::with_capacity(8 + 12 * n);
        out.extend_from_slice(TRACE_MAGIC);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        for comp in &self.components {
            for v in comp {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::TraceFormat("file shorter than header".into()));
        }
        if &bytes[..4] != TRACE_MAGIC {
            return Err(Error::TraceFormat(format!(
                "bad magic bytes {:02x?}",
                &bytes[..4]
            )));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let payload = &bytes[8..];
        if payload.len() != 12 * n {
            return Err(Error::TraceFormat(format!(
                "header declares {n} samples (expected {} payload bytes), found {}",
                12 * n,
                payload.len()
            )));
        }
        let mut blocks = payload.chunks_exact(4 * n.max(1));
        let mut take = || -> Vec<f32> {
            if n == 0 {
                return Vec::new();
            }
            blocks
                .next()
                .unwrap()
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect()
        };
        let z = take();
        let nn = take();
        let e = take();
        Ok(TraceSamples {
            components: [z, nn, e],
        })
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<TraceSamples> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    TraceSamples::decode(&bytes)
}

pub fn write_trace(path: impl AsRef<Path>, trace: &TraceSamples) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace.encode()).map_err(|e| Error::io(path, e))
}
