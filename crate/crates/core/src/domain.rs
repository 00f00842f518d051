//! Event types shared by every stage of the pipeline, plus the azimuth
//! helpers used for thresholding and fusion.
//!
//! Azimuth lives on the frontal half-plane `[-90, 90]` degrees, so angular
//! distance is a plain absolute difference and averaging is arithmetic.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const AZIMUTH_MIN: f64 = -90.0;
pub const AZIMUTH_MAX: f64 = 90.0;

/// One active sound event at one label frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeldEvent {
    class_id: usize,
    azimuth_deg: f64,
    distance_m: f64,
    onscreen: bool,
}

impl SeldEvent {
    pub fn new(class_id: usize, azimuth_deg: f64, distance_m: f64, onscreen: bool) -> Result<Self> {
        check_azimuth(azimuth_deg)?;
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(Error::invalid(format!(
                "distance must be a positive number of meters, got {distance_m}"
            )));
        }
        Ok(Self {
            class_id,
            azimuth_deg,
            distance_m,
            onscreen,
        })
    }

    pub fn class_id(&self) -> usize {
        self.class_id
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn distance_m(&self) -> f64 {
        self.distance_m
    }

    pub fn onscreen(&self) -> bool {
        self.onscreen
    }

    /// Total order used to normalize event lists: class, azimuth, distance, flag.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.class_id
            .cmp(&other.class_id)
            .then(self.azimuth_deg.total_cmp(&other.azimuth_deg))
            .then(self.distance_m.total_cmp(&other.distance_m))
            .then(self.onscreen.cmp(&other.onscreen))
    }

    pub(crate) fn check_class(&self, task: &TaskConfig) -> Result<()> {
        if self.class_id >= task.num_classes {
            return Err(Error::invalid(format!(
                "class {} out of range for {} classes",
                self.class_id, task.num_classes
            )));
        }
        Ok(())
    }
}

/// Task-wide constants: class count, track count, label rate and the
/// detection thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub num_classes: usize,
    pub max_tracks: usize,
    pub label_fps: usize,
    pub angular_threshold_deg: f64,
    pub rde_threshold: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            num_classes: 13,
            max_tracks: 3,
            label_fps: 10,
            angular_threshold_deg: 20.0,
            rde_threshold: 1.0,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.max_tracks == 0 || self.label_fps == 0 {
            return Err(Error::invalid("class count, track count and label rate must be positive"));
        }
        if !(self.angular_threshold_deg > 0.0 && self.angular_threshold_deg < 180.0) {
            return Err(Error::invalid(format!(
                "angular threshold must lie in (0, 180), got {}",
                self.angular_threshold_deg
            )));
        }
        if !(self.rde_threshold > 0.0) {
            return Err(Error::invalid("relative distance threshold must be positive"));
        }
        Ok(())
    }
}

/// Frame-indexed events of one clip, from one source (a specialist, a
/// fusion rule or the reference annotation).
#[derive(Debug, Clone, PartialEq)]
pub struct ClipPredictions {
    clip_id: String,
    num_frames: usize,
    frames: BTreeMap<usize, Vec<SeldEvent>>,
}

/// Predictions for a set of clips keyed by clip id.
pub type ClipSet = BTreeMap<String, ClipPredictions>;

impl ClipPredictions {
    pub fn new(clip_id: impl Into<String>, num_frames: usize) -> Self {
        Self {
            clip_id: clip_id.into(),
            num_frames,
            frames: BTreeMap::new(),
        }
    }

    /// Builds a clip from `(frame, event)` pairs, validating frame indices
    /// and class ids. Events are stored in canonical order per frame.
    pub fn from_events<I>(clip_id: impl Into<String>, num_frames: usize, events: I, task: &TaskConfig) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, SeldEvent)>,
    {
        let mut clip = Self::new(clip_id, num_frames);
        for (frame, event) in events {
            clip.push(frame, event, task)?;
        }
        clip.normalize();
        Ok(clip)
    }

    pub fn push(&mut self, frame: usize, event: SeldEvent, task: &TaskConfig) -> Result<()> {
        if frame >= self.num_frames {
            return Err(Error::invalid(format!(
                "clip {}: frame {frame} beyond clip length {}",
                self.clip_id, self.num_frames
            )));
        }
        event.check_class(task)?;
        self.frames.entry(frame).or_default().push(event);
        Ok(())
    }

    /// Sorts each frame's events and drops empty frames.
    pub fn normalize(&mut self) {
        self.frames.retain(|_, events| !events.is_empty());
        for events in self.frames.values_mut() {
            events.sort_by(SeldEvent::canonical_cmp);
        }
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    /// Non-empty frames in ascending order.
    pub fn frames(&self) -> impl Iterator<Item = (usize, &[SeldEvent])> {
        self.frames.iter().map(|(&f, e)| (f, e.as_slice()))
    }

    pub fn frame(&self, index: usize) -> &[SeldEvent] {
        self.frames.get(&index).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn num_events(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    /// Checks the per-source limit of `max_tracks` same-class events per frame.
    pub fn check_track_limit(&self, max_tracks: usize) -> Result<()> {
        for (frame, events) in &self.frames {
            let mut counts = BTreeMap::new();
            for e in events {
                *counts.entry(e.class_id).or_insert(0usize) += 1;
            }
            if let Some((class, n)) = counts.into_iter().find(|&(_, n)| n > max_tracks) {
                return Err(Error::invalid(format!(
                    "clip {}: frame {frame} has {n} events of class {class}, limit is {max_tracks}",
                    self.clip_id
                )));
            }
        }
        Ok(())
    }
}

fn check_azimuth(az: f64) -> Result<()> {
    if !(AZIMUTH_MIN..=AZIMUTH_MAX).contains(&az) {
        return Err(Error::invalid(format!("azimuth {az} outside [-90, 90] degrees")));
    }
    Ok(())
}

/// Angular separation of two frontal azimuths in degrees.
pub fn angular_distance(a: f64, b: f64) -> Result<f64> {
    check_azimuth(a)?;
    check_azimuth(b)?;
    Ok((a - b).abs())
}

/// Arithmetic mean of frontal azimuths. No wraparound can occur on a
/// 180 degree span, so a circular mean is unnecessary.
pub fn mean_azimuth(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("cannot average an empty azimuth list"));
    }
    for &v in values {
        check_azimuth(v)?;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    // rounding can push the mean a hair past the extremes
    let (lo, hi) = min_max(values);
    Ok(mean.clamp(lo, hi))
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}
