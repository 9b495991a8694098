use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLING_RATE_HZ: f64 = 100.0;

fn default_sampling_rate() -> f64 {
    DEFAULT_SAMPLING_RATE_HZ
}

/// An earthquake source (hypocenter) with its catalog attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub source_id: String,
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitude: Option<f64>,
    /// UTC timestamp, kept verbatim (RFC 3339 expected).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_time: Option<String>,
}

impl SourceRecord {
    pub fn new(source_id: impl Into<String>, latitude: f64, longitude: f64) -> Self {
        SourceRecord {
            source_id: source_id.into(),
            latitude,
            longitude,
            depth_km: None,
            magnitude: None,
            origin_time: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| Error::InvalidRecord {
            id: self.source_id.clone(),
            message: message.to_string(),
        };
        if self.source_id.is_empty() {
            return Err(bad("empty source_id"));
        }
        check_coordinates(self.latitude, self.longitude).map_err(|m| bad(&m))?;
        if let Some(depth) = self.depth_km {
            if !(depth.is_finite() && depth >= 0.0) {
                return Err(bad("depth_km must be finite and nonnegative"));
            }
        }
        if let Some(mag) = self.magnitude {
            if !mag.is_finite() {
                return Err(bad("magnitude must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Earthquake,
    Noise,
}

/// One three-component recording at a station, either an earthquake with a
/// labeled P arrival or a noise-only window.
///
/// Arrivals are sample indices; seconds are derived through the sampling rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRecord {
    pub waveform_id: String,
    pub kind: WaveformKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    pub station_latitude: f64,
    pub station_longitude: f64,
    #[serde(default = "default_sampling_rate")]
    pub sampling_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_arrival_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_arrival_index: Option<usize>,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_ref: Option<String>,
}

impl WaveformRecord {
    pub fn earthquake(
        waveform_id: impl Into<String>,
        source_id: impl Into<String>,
        station: (f64, f64),
        p_arrival_index: usize,
        n_samples: usize,
    ) -> Self {
        WaveformRecord {
            waveform_id: waveform_id.into(),
            kind: WaveformKind::Earthquake,
            source_id: Some(source_id.into()),
            station_latitude: station.0,
            station_longitude: station.1,
            sampling_rate_hz: DEFAULT_SAMPLING_RATE_HZ,
            p_arrival_index: Some(p_arrival_index),
            s_arrival_index: None,
            n_samples,
            trace_ref: None,
        }
    }

    pub fn noise(waveform_id: impl Into<String>, station: (f64, f64), n_samples: usize) -> Self {
        WaveformRecord {
            waveform_id: waveform_id.into(),
            kind: WaveformKind::Noise,
            source_id: None,
            station_latitude: station.0,
            station_longitude: station.1,
            sampling_rate_hz: DEFAULT_SAMPLING_RATE_HZ,
            p_arrival_index: None,
            s_arrival_index: None,
            n_samples,
            trace_ref: None,
        }
    }

    pub fn is_earthquake(&self) -> bool {
        self.kind == WaveformKind::Earthquake
    }

    pub fn station(&self) -> (f64, f64) {
        (self.station_latitude, self.station_longitude)
    }

    pub fn samples_to_seconds(&self, samples: f64) -> f64 {
        samples / self.sampling_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| Error::InvalidRecord {
            id: self.waveform_id.clone(),
            message: message.to_string(),
        };
        if self.waveform_id.is_empty() {
            return Err(bad("empty waveform_id"));
        }
        check_coordinates(self.station_latitude, self.station_longitude).map_err(|m| bad(&m))?;
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(bad("sampling_rate_hz must be positive"));
        }
        if self.n_samples == 0 {
            return Err(bad("n_samples must be positive"));
        }
        match self.kind {
            WaveformKind::Earthquake => {
                if self.source_id.is_none() {
                    return Err(bad("earthquake waveform without source_id"));
                }
                let p = self
                    .p_arrival_index
                    .ok_or_else(|| bad("earthquake waveform without p_arrival_index"))?;
                if p >= self.n_samples {
                    return Err(bad("p_arrival_index must be < n_samples"));
                }
                if let Some(s) = self.s_arrival_index {
                    if s <= p {
                        return Err(bad("s_arrival_index must exceed p_arrival_index"));
                    }
                }
            }
            WaveformKind::Noise => {
                if self.source_id.is_some() {
                    return Err(bad("noise waveform with source_id"));
                }
                if self.p_arrival_index.is_some() || self.s_arrival_index.is_some() {
                    return Err(bad("noise waveform with arrival labels"));
                }
            }
        }
        Ok(())
    }
}

fn check_coordinates(lat: f64, lon: f64) -> std::result::Result<(), String> {
    if !(lat.is_finite() && (-90.0..=90.0).contains(&lat)) {
        return Err(format!("latitude {lat} outside [-90, 90]"));
    }
    if !(lon.is_finite() && (-180.0..=180.0).contains(&lon)) {
        return Err(format!("longitude {lon} outside [-180, 180]"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn earthquake_invariants() {
        let mut w = WaveformRecord::earthquake("w", "s", (42.0, 13.0), 10, 100);
        w.validate().unwrap();
        w.s_arrival_index = Some(10);
        assert!(w.validate().is_err());
        w.s_arrival_index = Some(11);
        w.validate().unwrap();
        w.p_arrival_index = Some(100);
        assert!(w.validate().is_err());
        w.p_arrival_index = None;
        assert!(w.validate().is_err());
    }

    #[test]
    fn noise_must_not_carry_labels() {
        let mut w = WaveformRecord::noise("n", (42.0, 13.0), 100);
        w.validate().unwrap();
        w.p_arrival_index = Some(3);
        assert!(w.validate().is_err());
        w.p_arrival_index = None;
        w.source_id = Some("s".into());
        assert!(w.validate().is_err());
    }

    #[test]
    fn coordinate_ranges() {
        assert!(SourceRecord::new("a", 90.5, 0.0).validate().is_err());
        assert!(SourceRecord::new("a", 0.0, -180.1).validate().is_err());
        assert!(SourceRecord::new("a", f64::NAN, 0.0).validate().is_err());
        SourceRecord::new("a", -90.0, 180.0).validate().unwrap();
    }
}
