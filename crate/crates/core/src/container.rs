//! Little-endian binary tensor containers.
//!
//! ```text
//! offset  size  field
//! 0       4     magic, "TOSF" (features) or "TOSA" (multi-ACCDDOA frames)
//! 4       4     version (u32) = 1
//! 8       4     dim0 (u32)    TOSF: planes   TOSA: frames
//! 12      4     dim1 (u32)    TOSF: frames   TOSA: tracks
//! 16      4     dim2 (u32)    TOSF: mels     TOSA: classes
//! 20      ...   f32 payload, row-major over the dims
//! ```
//!
//! TOSA payloads carry four components (x, y, distance, on-screen logit)
//! per (frame, track, class) cell, so their length is `dim0*dim1*dim2*4`.

use ndarray::{Array2, Array3};

use crate::accddoa::{AccddoaFrame, COMPONENTS};
use crate::error::{Error, Result};
use crate::features::{FeaturePlane, FeatureStack, PlaneLabel};

pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Features,
    Accddoa,
}

impl Kind {
    pub fn magic(&self) -> &'static [u8; 4] {
        match self {
            Kind::Features => b"TOSF",
            Kind::Accddoa => b"TOSA",
        }
    }

    fn cell_width(&self) -> usize {
        match self {
            Kind::Features => 1,
            Kind::Accddoa => COMPONENTS,
        }
    }
}

/// A decoded container: kind, three dimensions and the flat payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: Kind,
    pub dims: [u32; 3],
    pub data: Vec<f32>,
}

impl Container {
    pub fn new(kind: Kind, dims: [u32; 3], data: Vec<f32>) -> Result<Self> {
        let c = Self { kind, dims, data };
        c.check_len()?;
        Ok(c)
    }

    fn expected_len(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product::<usize>() * self.kind.cell_width()
    }

    fn check_len(&self) -> Result<()> {
        if self.data.len() != self.expected_len() {
            return Err(Error::shape(
                format!("{} payload values", self.expected_len()),
                self.data.len(),
            ));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(self.kind.magic());
        out.extend_from_slice(&VERSION.to_le_bytes());
        for d in self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::invalid(format!("container truncated: {} bytes", bytes.len())));
        }
        let kind = match &bytes[0..4] {
            b"TOSF" => Kind::Features,
            b"TOSA" => Kind::Accddoa,
            other => return Err(Error::invalid(format!("bad container magic {other:?}"))),
        };
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != VERSION {
            return Err(Error::invalid(format!("unsupported container version {version}")));
        }
        let dims = [word(8), word(12), word(16)];
        let payload = &bytes[HEADER_LEN..];
        if !payload.len().is_multiple_of(4) {
            return Err(Error::invalid("container payload is not a whole number of f32 values"));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(kind, dims, data)
    }
}

fn dim(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::invalid(format!("dimension {n} does not fit in u32")))
}

/// Packs a feature stack plane-major. Values are narrowed to f32.
pub fn features_to_container(stack: &FeatureStack) -> Result<Container> {
    let (planes, frames, mels) = stack.shape();
    if planes == 0 {
        return Err(Error::invalid("feature stack has no planes"));
    }
    let mut data = Vec::with_capacity(planes * frames * mels);
    for p in &stack.planes {
        if p.values.dim() != (frames, mels) {
            return Err(Error::shape(format!("{frames}x{mels}"), format!("{:?}", p.values.dim())));
        }
        data.extend(p.values.iter().map(|&v| v as f32));
    }
    Container::new(Kind::Features, [dim(planes)?, dim(frames)?, dim(mels)?], data)
}

/// Unpacks planes; labels are assigned in the canonical order
/// (log-mel left, log-mel right, ILD).
pub fn container_to_features(c: &Container) -> Result<FeatureStack> {
    if c.kind != Kind::Features {
        return Err(Error::invalid("expected a TOSF feature container"));
    }
    let [planes, frames, mels] = c.dims.map(|d| d as usize);
    let labels = [PlaneLabel::LogMelLeft, PlaneLabel::LogMelRight, PlaneLabel::Ild];
    if !(2..=3).contains(&planes) {
        return Err(Error::invalid(format!("feature container has {planes} planes, expected 2 or 3")));
    }
    let stride = frames * mels;
    let planes = labels[..planes]
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let values: Vec<f64> = c.data[i * stride..(i + 1) * stride].iter().map(|&v| v as f64).collect();
            FeaturePlane {
                label,
                values: Array2::from_shape_vec((frames, mels), values).expect("length checked"),
            }
        })
        .collect();
    Ok(FeatureStack {
        planes,
        normalization: None,
    })
}

pub fn accddoa_to_container(frames: &[AccddoaFrame]) -> Result<Container> {
    let (tracks, classes) = frames
        .first()
        .map(|f| (f.num_tracks(), f.num_classes()))
        .ok_or_else(|| Error::invalid("no frames to store"))?;
    let mut data = Vec::with_capacity(frames.len() * tracks * classes * COMPONENTS);
    for f in frames {
        if (f.num_tracks(), f.num_classes()) != (tracks, classes) {
            return Err(Error::shape(
                format!("{tracks}x{classes}"),
                format!("{}x{}", f.num_tracks(), f.num_classes()),
            ));
        }
        data.extend(f.values().iter().map(|&v| v as f32));
    }
    Container::new(Kind::Accddoa, [dim(frames.len())?, dim(tracks)?, dim(classes)?], data)
}

pub fn container_to_accddoa(c: &Container) -> Result<Vec<AccddoaFrame>> {
    if c.kind != Kind::Accddoa {
        return Err(Error::invalid("expected a TOSA multi-ACCDDOA container"));
    }
    let [frames, tracks, classes] = c.dims.map(|d| d as usize);
    let cell = tracks * classes * COMPONENTS;
    (0..frames)
        .map(|t| {
            let values: Vec<f64> = c.data[t * cell..(t + 1) * cell].iter().map(|&v| v as f64).collect();
            AccddoaFrame::new(Array3::from_shape_vec((tracks, classes, COMPONENTS), values).expect("length checked"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_little_endian() {
        let c = Container::new(Kind::Features, [2, 1, 1], vec![1.0, -2.5]).unwrap();
        let b = c.to_bytes();
        assert_eq!(&b[..4], b"TOSF");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..12], &[2, 0, 0, 0]);
        assert_eq!(&b[20..24], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 28);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(Container::from_bytes(b"TOSF").is_err());
        let mut b = Container::new(Kind::Accddoa, [1, 1, 1], vec![0.0; 4]).unwrap().to_bytes();
        assert!(Container::from_bytes(&b).is_ok());
        b.pop();
        assert!(Container::from_bytes(&b).is_err());
        b.truncate(HEADER_LEN + 12);
        assert!(Container::from_bytes(&b).is_err());
        let mut wrong = Container::new(Kind::Features, [1, 1, 1], vec![0.0]).unwrap().to_bytes();
        wrong[0] = b'X';
        assert!(Container::from_bytes(&wrong).is_err());
        wrong[0] = b'T';
        wrong[4] = 9;
        assert!(Container::from_bytes(&wrong).is_err());
    }

    #[test]
    fn feature_stack_round_trip() {
        let stack = FeatureStack {
            planes: [PlaneLabel::LogMelLeft, PlaneLabel::LogMelRight]
                .into_iter()
                .enumerate()
                .map(|(i, label)| FeaturePlane {
                    label,
                    values: Array2::from_shape_fn((3, 4), |(t, m)| (i * 100 + t * 4 + m) as f64),
                })
                .collect(),
            normalization: None,
        };
        let c = features_to_container(&stack).unwrap();
        assert_eq!(c.dims, [2, 3, 4]);
        let back = container_to_features(&Container::from_bytes(&c.to_bytes()).unwrap()).unwrap();
        assert_eq!(back, stack);
    }

    proptest! {
        #[test]
        fn bytes_round_trip(dims in (1u32..4, 1u32..4, 1u32..4), accddoa in any::<bool>(), seed in any::<u64>()) {
            let kind = if accddoa { Kind::Accddoa } else { Kind::Features };
            let n = (dims.0 * dims.1 * dims.2) as usize * kind.cell_width();
            let data: Vec<f32> = (0..n).map(|i| ((seed as f64 + i as f64).sin()) as f32).collect();
            let c = Container::new(kind, [dims.0, dims.1, dims.2], data).unwrap();
            prop_assert_eq!(Container::from_bytes(&c.to_bytes()).unwrap(), c);
        }
    }
}
