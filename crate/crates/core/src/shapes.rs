//! Shape-level model of the specialist networks: non-overlapping pooling
//! over named tensor axes, the three visual pooling strategies and the
//! SELD encoder's pooling schedule. Learned layers appear only as
//! shape-preserving stages.

use std::fmt::{self, Write as _};

use ndarray::{ArrayD, Axis, IxDyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AxisKind {
    Time,
    Frequency,
    Patch,
    Channel,
}

impl fmt::Display for AxisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AxisKind::Time => "time",
            AxisKind::Frequency => "freq",
            AxisKind::Patch => "patch",
            AxisKind::Channel => "channel",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Mean,
    Max,
}

impl fmt::Display for PoolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolMode::Mean => "mean",
            PoolMode::Max => "max",
        })
    }
}

/// A dense tensor whose axes carry names.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    axes: Vec<AxisKind>,
    data: ArrayD<f64>,
}

impl NamedTensor {
    pub fn new(axes: Vec<AxisKind>, data: ArrayD<f64>) -> Result<Self> {
        if axes.len() != data.ndim() {
            return Err(Error::shape(format!("{} axes", data.ndim()), axes.len()));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(Error::invalid(format!("axis {a} appears twice")));
            }
        }
        Ok(Self { axes, data })
    }

    pub fn axes(&self) -> &[AxisKind] {
        &self.axes
    }

    pub fn data(&self) -> &ArrayD<f64> {
        &self.data
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn len_of(&self, axis: AxisKind) -> Option<usize> {
        self.position(axis).ok().map(|i| self.data.shape()[i])
    }

    fn position(&self, axis: AxisKind) -> Result<usize> {
        self.axes
            .iter()
            .position(|&a| a == axis)
            .ok_or_else(|| Error::invalid(format!("tensor has no {axis} axis (axes {:?})", self.axes)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolStage {
    pub axis: AxisKind,
    pub mode: PoolMode,
    pub stride: usize,
}

impl PoolStage {
    pub const fn new(axis: AxisKind, mode: PoolMode, stride: usize) -> Self {
        Self { axis, mode, stride }
    }

    pub fn output_len(&self, len: usize) -> Result<usize> {
        if self.stride == 0 {
            return Err(Error::invalid("pooling stride must be at least 1"));
        }
        if !len.is_multiple_of(self.stride) {
            return Err(Error::invalid(format!(
                "{} axis of length {len} is not divisible by stride {}",
                self.axis, self.stride
            )));
        }
        Ok(len / self.stride)
    }
}

/// Non-overlapping pooling (window = stride) along one named axis.
pub fn pool(t: &NamedTensor, axis: AxisKind, mode: PoolMode, stride: usize) -> Result<NamedTensor> {
    let k = t.position(axis)?;
    let out_len = PoolStage::new(axis, mode, stride).output_len(t.data.shape()[k])?;
    let mut shape = t.data.shape().to_vec();
    shape[k] = out_len;
    let mut out = ArrayD::zeros(IxDyn(&shape));
    for (i, chunk) in t.data.axis_chunks_iter(Axis(k), stride).enumerate() {
        let reduced = reduce_view(&chunk, Axis(k), mode);
        out.index_axis_mut(Axis(k), i).assign(&reduced);
    }
    Ok(NamedTensor {
        axes: t.axes.clone(),
        data: out,
    })
}

fn reduce_view(view: &ndarray::ArrayViewD<'_, f64>, axis: Axis, mode: PoolMode) -> ArrayD<f64> {
    match mode {
        PoolMode::Mean => view.mean_axis(axis).expect("non-empty window"),
        PoolMode::Max => view.fold_axis(axis, f64::NEG_INFINITY, |acc, &v| acc.max(v)),
    }
}

/// Global pooling that removes the axis.
pub fn reduce(t: &NamedTensor, axis: AxisKind, mode: PoolMode) -> Result<NamedTensor> {
    let k = t.position(axis)?;
    let mut axes = t.axes.clone();
    axes.remove(k);
    Ok(NamedTensor {
        axes,
        data: reduce_view(&t.data.view(), Axis(k), mode),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoolPlan {
    pub stages: Vec<PoolStage>,
}

impl PoolPlan {
    pub fn apply(&self, t: &NamedTensor) -> Result<NamedTensor> {
        self.stages
            .iter()
            .try_fold(t.clone(), |acc, s| pool(&acc, s.axis, s.mode, s.stride))
    }
}

/// Visual embeddings over time frames, spatial patches and channels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrid {
    tensor: NamedTensor,
    pub provenance: String,
}

impl EmbeddingGrid {
    /// `values` has shape (T, P, C), all dimensions at least 1.
    pub fn new(values: ndarray::Array3<f64>, provenance: impl Into<String>) -> Result<Self> {
        if values.iter().len() == 0 {
            return Err(Error::invalid(format!("embedding grid has an empty dimension {:?}", values.dim())));
        }
        Ok(Self {
            tensor: NamedTensor::new(vec![AxisKind::Time, AxisKind::Patch, AxisKind::Channel], values.into_dyn())?,
            provenance: provenance.into(),
        })
    }

    pub fn tensor(&self) -> &NamedTensor {
        &self.tensor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisualStrategy {
    /// Averages over time: patches × channels.
    SpatioLinguistic,
    /// Averages over channels: time × patches.
    SpatioTemporal,
    /// Averages over patches: time × channels.
    TempoLinguistic,
}

impl VisualStrategy {
    pub fn pooled_axis(&self) -> AxisKind {
        match self {
            VisualStrategy::SpatioLinguistic => AxisKind::Time,
            VisualStrategy::SpatioTemporal => AxisKind::Channel,
            VisualStrategy::TempoLinguistic => AxisKind::Patch,
        }
    }
}

pub fn specialist_visual_pool(grid: &EmbeddingGrid, strategy: VisualStrategy) -> NamedTensor {
    reduce(&grid.tensor, strategy.pooled_axis(), PoolMode::Mean).expect("grid always has all three axes")
}

/// One step of the SELD encoder schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderStage {
    /// Learned block, modeled as shape-preserving.
    Block(&'static str),
    Pool(PoolStage),
}

pub const SELD_ENCODER: [EncoderStage; 10] = [
    EncoderStage::Block("resnet-layer1"),
    EncoderStage::Pool(PoolStage::new(AxisKind::Frequency, PoolMode::Max, 4)),
    EncoderStage::Block("resnet-layer2"),
    EncoderStage::Pool(PoolStage::new(AxisKind::Frequency, PoolMode::Max, 4)),
    EncoderStage::Block("resnet-layer3"),
    EncoderStage::Pool(PoolStage::new(AxisKind::Frequency, PoolMode::Max, 4)),
    EncoderStage::Block("resnet-layer4"),
    EncoderStage::Pool(PoolStage::new(AxisKind::Time, PoolMode::Mean, 4)),
    EncoderStage::Block("conformer"),
    EncoderStage::Pool(PoolStage::new(AxisKind::Time, PoolMode::Mean, 4)),
];

pub const SELD_INPUT_MELS: usize = 64;

/// The pooling stages of [`SELD_ENCODER`] alone.
pub fn seld_encoder_plan() -> PoolPlan {
    PoolPlan {
        stages: SELD_ENCODER
            .iter()
            .filter_map(|s| match s {
                EncoderStage::Pool(p) => Some(*p),
                EncoderStage::Block(_) => None,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub stage: EncoderStage,
    /// (planes, time, freq)
    pub input: [usize; 3],
    pub output: [usize; 3],
}

/// Shapes through the SELD encoder for a (planes, time, freq) input.
pub fn seld_encoder_trace(input: [usize; 3]) -> Result<Vec<TraceRow>> {
    let [planes, time, freq] = input;
    if planes == 0 || time == 0 {
        return Err(Error::invalid(format!("empty encoder input {input:?}")));
    }
    if freq != SELD_INPUT_MELS {
        return Err(Error::shape(format!("{SELD_INPUT_MELS} mel bins"), freq));
    }
    let mut shape = input;
    let mut rows = Vec::with_capacity(SELD_ENCODER.len());
    for stage in SELD_ENCODER {
        let before = shape;
        if let EncoderStage::Pool(p) = stage {
            let k = match p.axis {
                AxisKind::Time => 1,
                AxisKind::Frequency => 2,
                other => return Err(Error::invalid(format!("encoder cannot pool over {other}"))),
            };
            shape[k] = p.output_len(shape[k])?;
        }
        rows.push(TraceRow {
            stage,
            input: before,
            output: shape,
        });
    }
    Ok(rows)
}

/// Plain-text table: stage, axis, mode, input shape, output shape.
pub fn trace_table(rows: &[TraceRow]) -> String {
    let mut s = format!("{:<14} {:<6} {:<5} {:<14} {:<14}\n", "stage", "axis", "mode", "in", "out");
    let shape = |d: [usize; 3]| format!("{}x{}x{}", d[0], d[1], d[2]);
    for r in rows {
        let (name, axis, mode) = match r.stage {
            EncoderStage::Block(name) => (name.to_string(), "-".to_string(), "-".to_string()),
            EncoderStage::Pool(p) => (format!("pool/{}", p.stride), p.axis.to_string(), p.mode.to_string()),
        };
        let _ = writeln!(s, "{name:<14} {axis:<6} {mode:<5} {:<14} {:<14}", shape(r.input), shape(r.output));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn vector(values: Vec<f64>) -> NamedTensor {
        NamedTensor::new(vec![AxisKind::Time], Array1::from(values).into_dyn()).unwrap()
    }

    #[test]
    fn time_pooled_twice_gives_label_rate() {
        let t = vector(vec![0.5; 800]);
        let once = pool(&t, AxisKind::Time, PoolMode::Mean, 4).unwrap();
        let twice = pool(&once, AxisKind::Time, PoolMode::Mean, 4).unwrap();
        assert_eq!(twice.shape(), &[50]);
    }

    #[test]
    fn constant_stays_constant() {
        let t = NamedTensor::new(vec![AxisKind::Time, AxisKind::Frequency], ArrayD::from_elem(IxDyn(&[8, 4]), 3.0)).unwrap();
        for mode in [PoolMode::Mean, PoolMode::Max] {
            let p = pool(&t, AxisKind::Frequency, mode, 2).unwrap();
            assert_eq!(p.shape(), &[8, 2]);
            assert!(p.data().iter().all(|&v| v == 3.0));
        }
    }

    #[test]
    fn max_pool_matches_window_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = pool(&vector(x.clone()), AxisKind::Time, PoolMode::Max, 2).unwrap();
        let want: Vec<f64> = (0..4).map(|i| x[2 * i].max(x[2 * i + 1])).collect();
        assert_eq!(p.data().as_slice().unwrap(), want.as_slice());
    }

    #[test]
    fn pool_errors() {
        let t = vector(vec![0.0; 10]);
        assert!(pool(&t, AxisKind::Time, PoolMode::Mean, 4).is_err());
        assert!(pool(&t, AxisKind::Time, PoolMode::Mean, 0).is_err());
        assert!(pool(&t, AxisKind::Patch, PoolMode::Mean, 2).is_err());
        assert!(NamedTensor::new(vec![AxisKind::Time, AxisKind::Time], ArrayD::zeros(IxDyn(&[1, 1]))).is_err());
    }

    #[test]
    fn visual_strategy_examples() {
        let ones = EmbeddingGrid::new(Array3::from_elem((3, 4, 5), 1.0), "stub").unwrap();
        let expect = [
            (VisualStrategy::SpatioLinguistic, vec![4, 5]),
            (VisualStrategy::SpatioTemporal, vec![3, 4]),
            (VisualStrategy::TempoLinguistic, vec![3, 5]),
        ];
        for (s, shape) in expect {
            let out = specialist_visual_pool(&ones, s);
            assert_eq!(out.shape(), shape.as_slice());
            assert!(out.data().iter().all(|&v| v == 1.0));
        }
        let two = EmbeddingGrid::new(Array3::from_shape_fn((2, 3, 2), |(t, _, _)| 2.0 * t as f64), "stub").unwrap();
        let sl = specialist_visual_pool(&two, VisualStrategy::SpatioLinguistic);
        assert!(sl.data().iter().all(|&v| v == 1.0));
        assert!(EmbeddingGrid::new(Array3::zeros((0, 3, 2)), "empty").is_err());
    }

    #[test]
    fn visual_strategies_match_loop_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (t, p, c) = (3, 4, 5);
        let g = Array3::from_shape_fn((t, p, c), |_| rng.gen_range(-3.0..3.0));
        let grid = EmbeddingGrid::new(g.clone(), "random").unwrap();
        let sl = specialist_visual_pool(&grid, VisualStrategy::SpatioLinguistic);
        let st = specialist_visual_pool(&grid, VisualStrategy::SpatioTemporal);
        let tl = specialist_visual_pool(&grid, VisualStrategy::TempoLinguistic);
        for j in 0..p {
            for k in 0..c {
                let mut acc = 0.0;
                for i in 0..t {
                    acc += g[[i, j, k]];
                }
                assert!((sl.data()[[j, k]] - acc / t as f64).abs() < 1e-12);
            }
        }
        for i in 0..t {
            for j in 0..p {
                let mut acc = 0.0;
                for k in 0..c {
                    acc += g[[i, j, k]];
                }
                assert!((st.data()[[i, j]] - acc / c as f64).abs() < 1e-12);
            }
            for k in 0..c {
                let mut acc = 0.0;
                for j in 0..p {
                    acc += g[[i, j, k]];
                }
                assert!((tl.data()[[i, k]] - acc / p as f64).abs() < 1e-12);
            }
        }
    }

    fn last(trace: &[TraceRow]) -> [usize; 3] {
        trace.last().unwrap().output
    }

    #[test]
    fn encoder_trace_examples() {
        let tr = seld_encoder_trace([3, 800, 64]).unwrap();
        let freqs: Vec<usize> = tr.iter().filter(|r| r.input[2] != r.output[2]).map(|r| r.output[2]).collect();
        let times: Vec<usize> = tr.iter().filter(|r| r.input[1] != r.output[1]).map(|r| r.output[1]).collect();
        assert_eq!(freqs, vec![16, 4, 1]);
        assert_eq!(times, vec![200, 50]);
        assert_eq!(last(&tr), [3, 50, 1]);
        assert_eq!(last(&seld_encoder_trace([2, 800, 64]).unwrap()), [2, 50, 1]);
        // 400 / 4 / 4
        assert_eq!(last(&seld_encoder_trace([3, 400, 64]).unwrap())[1], 400 / 4 / 4);
        assert!(seld_encoder_trace([3, 800, 40]).is_err());
        assert!(seld_encoder_trace([3, 810, 64]).is_err());
        assert!(trace_table(&tr).contains("pool/4         freq   max   3x800x64       3x800x16"));
    }

    #[test]
    fn trace_agrees_with_real_pooling() {
        let input = NamedTensor::new(
            vec![AxisKind::Channel, AxisKind::Time, AxisKind::Frequency],
            ArrayD::zeros(IxDyn(&[2, 160, 64])),
        )
        .unwrap();
        let out = seld_encoder_plan().apply(&input).unwrap();
        assert_eq!(out.shape(), &last(&seld_encoder_trace([2, 160, 64]).unwrap()));
    }

    proptest! {
        #[test]
        fn mean_pool_commutes_with_scaling(x in prop::collection::vec(-100.0f64..100.0, 12), k in -5.0f64..5.0) {
            let a = pool(&vector(x.iter().map(|v| v * k).collect()), AxisKind::Time, PoolMode::Mean, 3).unwrap();
            let b = pool(&vector(x), AxisKind::Time, PoolMode::Mean, 3).unwrap();
            for (u, v) in a.data().iter().zip(b.data().iter()) {
                prop_assert!((u - v * k).abs() < 1e-9);
            }
        }

        #[test]
        fn max_pool_commutes_with_monotone_maps(x in prop::collection::vec(-10.0f64..10.0, 12)) {
            let f = |v: f64| v.exp() + 3.0 * v;
            let a = pool(&vector(x.iter().map(|&v| f(v)).collect()), AxisKind::Time, PoolMode::Max, 4).unwrap();
            let b = pool(&vector(x), AxisKind::Time, PoolMode::Max, 4).unwrap();
            for (u, v) in a.data().iter().zip(b.data().iter()) {
                prop_assert_eq!(*u, f(*v));
            }
        }

        #[test]
        fn stride_four_twice_is_sixteen_once(x in prop::collection::vec(-10.0f64..10.0, 32)) {
            let t = vector(x);
            let twice = pool(&pool(&t, AxisKind::Time, PoolMode::Mean, 4).unwrap(), AxisKind::Time, PoolMode::Mean, 4).unwrap();
            let once = pool(&t, AxisKind::Time, PoolMode::Mean, 16).unwrap();
            for (u, v) in twice.data().iter().zip(once.data().iter()) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }

        #[test]
        fn strategy_shapes(t in 1usize..5, p in 1usize..5, c in 1usize..5) {
            let grid = EmbeddingGrid::new(Array3::zeros((t, p, c)), "stub").unwrap();
            prop_assert_eq!(specialist_visual_pool(&grid, VisualStrategy::SpatioLinguistic).shape().to_vec(), [p, c].to_vec());
            prop_assert_eq!(specialist_visual_pool(&grid, VisualStrategy::SpatioTemporal).shape().to_vec(), [t, p].to_vec());
            prop_assert_eq!(specialist_visual_pool(&grid, VisualStrategy::TempoLinguistic).shape().to_vec(), [t, c].to_vec());
        }
    }
}
