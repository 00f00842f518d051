//! Multi-ACCDDOA output representation for the azimuth-only stereo task.
//!
//! Each frame holds `tracks × classes` cells of four components
//! `(x, y, distance, onscreen_logit)`. The norm of `(x, y)` encodes activity
//! and its angle the azimuth; only the frontal half-plane is meaningful.

use ndarray::Array3;

use crate::domain::{angular_distance, ClipPredictions, SeldEvent, TaskConfig, AZIMUTH_MAX, AZIMUTH_MIN};
use crate::error::{Error, Result};

pub const COMPONENTS: usize = 4;
const X: usize = 0;
const Y: usize = 1;
const DIST: usize = 2;
const LOGIT: usize = 3;

/// Smallest distance a decoded event can carry, in meters.
pub const MIN_DISTANCE_M: f64 = 0.01;
/// Logit magnitude written for on/off-screen flags by the encoder.
pub const ONSCREEN_LOGIT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AccddoaFrame {
    values: Array3<f64>,
}

impl AccddoaFrame {
    /// `values` has shape (tracks, classes, 4).
    pub fn new(values: Array3<f64>) -> Result<Self> {
        if values.dim().2 != COMPONENTS {
            return Err(Error::shape(
                format!("{COMPONENTS} components per cell"),
                values.dim().2,
            ));
        }
        Ok(Self { values })
    }

    pub fn zeros(task: &TaskConfig) -> Self {
        Self {
            values: Array3::zeros((task.max_tracks, task.num_classes, COMPONENTS)),
        }
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array3<f64> {
        &mut self.values
    }

    pub fn num_tracks(&self) -> usize {
        self.values.dim().0
    }

    pub fn num_classes(&self) -> usize {
        self.values.dim().1
    }

    fn check(&self, task: &TaskConfig) -> Result<()> {
        let (n, c, _) = self.values.dim();
        if (n, c) != (task.max_tracks, task.num_classes) {
            return Err(Error::shape(
                format!("{} tracks x {} classes", task.max_tracks, task.num_classes),
                format!("{n} tracks x {c} classes"),
            ));
        }
        if self.values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("multi-ACCDDOA frame contains NaN"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    /// Minimum norm of `(x, y)` for a cell to count as active.
    pub activity_threshold: f64,
    /// Threshold on `sigmoid(logit)`.
    pub onscreen_threshold: f64,
    /// Same-class events closer than this are merged.
    pub dedupe_angle_deg: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            activity_threshold: 0.5,
            onscreen_threshold: 0.5,
            dedupe_angle_deg: 20.0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.activity_threshold) || !unit(self.onscreen_threshold) || !(self.dedupe_angle_deg > 0.0) {
            return Err(Error::invalid(format!("invalid decode config {self:?}")));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Candidate {
    track: usize,
    norm: f64,
    event: SeldEvent,
}

/// Decodes one frame into events ordered by class, then track.
pub fn decode_frame(frame: &AccddoaFrame, cfg: &DecodeConfig, task: &TaskConfig) -> Result<Vec<SeldEvent>> {
    cfg.validate()?;
    frame.check(task)?;
    let v = &frame.values;
    let mut out = Vec::new();
    for class in 0..task.num_classes {
        let mut candidates = Vec::new();
        for track in 0..task.max_tracks {
            let (x, y) = (v[[track, class, X]], v[[track, class, Y]]);
            let norm = x.hypot(y);
            if !(norm >= cfg.activity_threshold) {
                continue;
            }
            let azimuth = y.atan2(x).to_degrees().clamp(AZIMUTH_MIN, AZIMUTH_MAX);
            let distance = v[[track, class, DIST]].max(MIN_DISTANCE_M);
            let onscreen = sigmoid(v[[track, class, LOGIT]]) >= cfg.onscreen_threshold;
            let event = SeldEvent::new(class, azimuth, distance, onscreen)?;
            candidates.push(Candidate { track, norm, event });
        }
        // strongest first; a weaker track within the merge angle of a kept one is dropped
        candidates.sort_by(|a, b| b.norm.total_cmp(&a.norm).then(a.track.cmp(&b.track)));
        let mut kept: Vec<Candidate> = Vec::new();
        for c in candidates {
            let clash = kept.iter().any(|k| {
                angular_distance(k.event.azimuth_deg(), c.event.azimuth_deg()).expect("azimuth clamped")
                    < cfg.dedupe_angle_deg
            });
            if !clash {
                kept.push(c);
            }
        }
        kept.sort_by_key(|c| c.track);
        out.extend(kept.into_iter().map(|c| c.event));
    }
    Ok(out)
}

/// Places each event in the lowest free track of its class with a unit
/// DOA vector.
pub fn encode_events(events: &[SeldEvent], task: &TaskConfig) -> Result<AccddoaFrame> {
    let mut frame = AccddoaFrame::zeros(task);
    let mut used = vec![0usize; task.num_classes];
    for e in events {
        e.check_class(task)?;
        let class = e.class_id();
        let track = used[class];
        if track >= task.max_tracks {
            return Err(Error::invalid(format!(
                "more than {} events of class {class} in one frame",
                task.max_tracks
            )));
        }
        used[class] += 1;
        let az = e.azimuth_deg().to_radians();
        let v = &mut frame.values;
        v[[track, class, X]] = az.cos();
        v[[track, class, Y]] = az.sin();
        v[[track, class, DIST]] = e.distance_m();
        v[[track, class, LOGIT]] = if e.onscreen() { ONSCREEN_LOGIT } else { -ONSCREEN_LOGIT };
    }
    Ok(frame)
}

/// Decodes a clip's frame sequence, frame `i` becoming label frame `i`.
pub fn decode_clip(
    clip_id: &str,
    frames: &[AccddoaFrame],
    cfg: &DecodeConfig,
    task: &TaskConfig,
) -> Result<ClipPredictions> {
    let mut clip = ClipPredictions::new(clip_id, frames.len());
    for (i, f) in frames.iter().enumerate() {
        for e in decode_frame(f, cfg, task)? {
            clip.push(i, e, task)?;
        }
    }
    clip.normalize();
    Ok(clip)
}

pub fn encode_clip(clip: &ClipPredictions, task: &TaskConfig) -> Result<Vec<AccddoaFrame>> {
    (0..clip.num_frames()).map(|i| encode_events(clip.frame(i), task)).collect()
}
