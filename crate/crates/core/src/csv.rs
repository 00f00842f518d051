//! Prediction/reference CSV files, one file per clip.
//!
//! Columns are `frame,class,source,azimuth,distance,onscreen` with no
//! header by default. Frames are 100 ms label indices, azimuth is in
//! degrees, onscreen is `0` or `1`. Distance unit conversion happens only
//! in this layer; everything downstream uses meters.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::domain::{ClipPredictions, SeldEvent, TaskConfig};
use crate::error::{Error, Result};

pub const HEADER: &str = "frame,class,source,azimuth,distance,onscreen";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceUnit {
    #[default]
    Meters,
    Centimeters,
}

impl DistanceUnit {
    fn to_meters(self, v: f64) -> f64 {
        match self {
            DistanceUnit::Meters => v,
            DistanceUnit::Centimeters => v / 100.0,
        }
    }

    fn in_unit(self, v: f64) -> f64 {
        match self {
            DistanceUnit::Meters => v,
            DistanceUnit::Centimeters => v * 100.0,
        }
    }
}

impl FromStr for DistanceUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(DistanceUnit::Meters),
            "cm" => Ok(DistanceUnit::Centimeters),
            other => Err(Error::invalid(format!("unknown distance unit {other:?} (expected m or cm)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionCsvRow {
    pub frame: usize,
    pub class: usize,
    pub source: usize,
    pub azimuth: f64,
    /// Meters.
    pub distance: f64,
    pub onscreen: bool,
}

impl PredictionCsvRow {
    pub fn event(&self) -> Result<SeldEvent> {
        SeldEvent::new(self.class, self.azimuth, self.distance, self.onscreen)
    }

    fn sort_key(&self, other: &Self) -> std::cmp::Ordering {
        (self.frame, self.class, self.source)
            .cmp(&(other.frame, other.class, other.source))
            .then(self.azimuth.total_cmp(&other.azimuth))
            .then(self.distance.total_cmp(&other.distance))
            .then(self.onscreen.cmp(&other.onscreen))
    }
}

/// Parses CSV text. `origin` names the file in error messages.
pub fn parse_rows(text: &str, origin: &str, unit: DistanceUnit) -> Result<Vec<PredictionCsvRow>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if rows.is_empty() && line.starts_with("frame") {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        let int = |k: usize, name: &str| -> Result<usize> {
            fields[k].parse().map_err(|_| err(format!("bad {name} {:?}", fields[k])))
        };
        let real = |k: usize, name: &str| -> Result<f64> {
            fields[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("bad {name} {:?}", fields[k])))
        };
        // integer-valued floats appear in some exported metadata
        let onscreen = match fields[5] {
            "0" | "0.0" => false,
            "1" | "1.0" => true,
            other => return Err(err(format!("onscreen must be 0 or 1, got {other:?}"))),
        };
        let row = PredictionCsvRow {
            frame: int(0, "frame")?,
            class: int(1, "class")?,
            source: int(2, "source")?,
            azimuth: real(3, "azimuth")?,
            distance: unit.to_meters(real(4, "distance")?),
            onscreen,
        };
        row.event().map_err(|e| err(e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Writes rows sorted by frame, class, source. Azimuth gets one decimal,
/// distance two.
pub fn write_rows(rows: &[PredictionCsvRow], header: bool, unit: DistanceUnit) -> String {
    let mut sorted = rows.to_vec();
    sorted.sort_by(PredictionCsvRow::sort_key);
    let mut out = String::new();
    if header {
        out.push_str(HEADER);
        out.push('\n');
    }
    for r in &sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.frame,
            r.class,
            r.source,
            fixed(r.azimuth, 1),
            fixed(unit.in_unit(r.distance), 2),
            r.onscreen as u8
        );
    }
    out
}

pub fn rows_to_clip(clip_id: &str, rows: &[PredictionCsvRow], num_frames: usize, task: &TaskConfig) -> Result<ClipPredictions> {
    ClipPredictions::from_events(
        clip_id,
        num_frames,
        rows.iter().map(|r| Ok((r.frame, r.event()?))).collect::<Result<Vec<_>>>()?,
        task,
    )
}

/// Rows for a clip; `source` numbers same-class events within a frame.
pub fn clip_to_rows(clip: &ClipPredictions) -> Vec<PredictionCsvRow> {
    let mut rows = Vec::with_capacity(clip.num_events());
    for (frame, events) in clip.frames() {
        let mut per_class = std::collections::BTreeMap::<usize, usize>::new();
        for e in events {
            let source = per_class.entry(e.class_id()).or_insert(0);
            rows.push(PredictionCsvRow {
                frame,
                class: e.class_id(),
                source: *source,
                azimuth: e.azimuth_deg(),
                distance: e.distance_m(),
                onscreen: e.onscreen(),
            });
            *source += 1;
        }
    }
    rows
}

/// Frames needed to hold every row.
pub fn frames_spanned(rows: &[PredictionCsvRow]) -> usize {
    rows.iter().map(|r| r.frame + 1).max().unwrap_or(0)
}
