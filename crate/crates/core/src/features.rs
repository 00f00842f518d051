//! Stereo feature extraction: per-channel log-mel spectrograms and the
//! inter-channel level difference (ILD), stacked as time-major planes.
//!
//! The STFT is centered with reflect padding and keeps `ceil(n / hop)`
//! frames, so a 5 s clip at 24 kHz with hop 150 gives exactly 800 frames.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftSpec {
    pub window_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for StftSpec {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 150,
            sample_rate: 24_000,
        }
    }
}

impl StftSpec {
    pub fn num_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Frames produced for `num_samples` input samples.
    pub fn num_frames(&self, num_samples: usize) -> usize {
        num_samples.div_ceil(self.hop)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 || self.hop == 0 || self.hop > self.window_len || self.sample_rate == 0 {
            return Err(Error::invalid(format!("invalid STFT parameters {self:?}")));
        }
        Ok(())
    }
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Left,
    Right,
}

/// One-sided complex STFT, bins × frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    channel: Channel,
    values: Array2<Complex64>,
}

impl Spectrogram {
    pub fn from_values(channel: Channel, values: Array2<Complex64>) -> Self {
        Self { channel, values }
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn num_bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.values.ncols()
    }

    /// |X(f, t)|², bins × frames.
    pub fn power(&self) -> Array2<f64> {
        self.values.mapv(|c| c.norm_sqr())
    }
}

fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut r = i.rem_euclid(period);
    if r >= n as isize {
        r = period - r;
    }
    r as usize
}

pub fn stft(samples: &[f64], sample_rate: u32, spec: &StftSpec, channel: Channel) -> Result<Spectrogram> {
    spec.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("empty waveform"));
    }
    if sample_rate != spec.sample_rate {
        return Err(Error::invalid(format!(
            "sample rate {sample_rate} Hz does not match the expected {} Hz",
            spec.sample_rate
        )));
    }
    let n = samples.len();
    let pad = (spec.window_len / 2) as isize;
    let frames = spec.num_frames(n);
    let bins = spec.num_bins();
    let window = hann_window(spec.window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(spec.window_len);

    let mut values = Array2::<Complex64>::zeros((bins, frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); spec.window_len];
    for t in 0..frames {
        let start = (t * spec.hop) as isize - pad;
        for (k, slot) in buf.iter_mut().enumerate() {
            let s = samples[reflect_index(start + k as isize, n)];
            *slot = Complex64::new(s * window[k], 0.0);
        }
        fft.process(&mut buf);
        for (f, v) in buf[..bins].iter().enumerate() {
            values[[f, t]] = *v;
        }
    }
    Ok(Spectrogram { channel, values })
}

fn hz_to_mel_slaney(hz: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if hz >= MIN_LOG_HZ {
        min_log_mel + (hz / MIN_LOG_HZ).ln() / logstep
    } else {
        hz / F_SP
    }
}

fn mel_to_hz_slaney(mel: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if mel >= min_log_mel {
        MIN_LOG_HZ * (logstep * (mel - min_log_mel)).exp()
    } else {
        F_SP * mel
    }
}

/// Triangular mel filters on the Slaney scale with area normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    matrix: Array2<f64>,
    // non-zero column range of each row
    support: Vec<(usize, usize)>,
    f_min: f64,
    f_max: f64,
}

impl MelFilterbank {
    pub fn slaney(num_mels: usize, spec: &StftSpec, f_min: f64, f_max: f64) -> Result<Self> {
        spec.validate()?;
        let nyquist = spec.sample_rate as f64 / 2.0;
        if num_mels == 0 || !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
            return Err(Error::invalid(format!(
                "invalid mel filterbank: {num_mels} mels over [{f_min}, {f_max}] Hz"
            )));
        }
        let bins = spec.num_bins();
        let fft_freqs: Vec<f64> = (0..bins)
            .map(|k| k as f64 * spec.sample_rate as f64 / spec.window_len as f64)
            .collect();
        let (mel_lo, mel_hi) = (hz_to_mel_slaney(f_min), hz_to_mel_slaney(f_max));
        let edges: Vec<f64> = (0..num_mels + 2)
            .map(|i| mel_to_hz_slaney(mel_lo + (mel_hi - mel_lo) * i as f64 / (num_mels + 1) as f64))
            .collect();

        let mut matrix = Array2::zeros((num_mels, bins));
        for m in 0..num_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            for (k, &f) in fft_freqs.iter().enumerate() {
                let rising = (f - lo) / (mid - lo);
                let falling = (hi - f) / (hi - mid);
                matrix[[m, k]] = rising.min(falling).max(0.0) * norm;
            }
        }
        Self::from_matrix(matrix, f_min, f_max)
    }

    /// Default bank: 64 mels spanning 0 Hz to Nyquist.
    pub fn default_for(spec: &StftSpec) -> Result<Self> {
        Self::slaney(64, spec, 0.0, spec.sample_rate as f64 / 2.0)
    }

    pub fn from_matrix(matrix: Array2<f64>, f_min: f64, f_max: f64) -> Result<Self> {
        let mut support = Vec::with_capacity(matrix.nrows());
        for (m, row) in matrix.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                return Err(Error::invalid(format!("mel filter {m} has a negative or non-finite weight")));
            }
            let first = row.iter().position(|&w| w > 0.0);
            let last = row.iter().rposition(|&w| w > 0.0);
            match (first, last) {
                (Some(a), Some(b)) => support.push((a, b + 1)),
                _ => return Err(Error::invalid(format!("mel filter {m} covers no frequency bin"))),
            }
        }
        Ok(Self {
            matrix,
            support,
            f_min,
            f_max,
        })
    }

    pub fn num_mels(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn f_range(&self) -> (f64, f64) {
        (self.f_min, self.f_max)
    }

    /// Projects a bins × frames energy matrix to frames × mels.
    fn project(&self, energy: &Array2<f64>) -> Array2<f64> {
        let frames = energy.ncols();
        let mut out = Array2::zeros((frames, self.num_mels()));
        for (m, &(a, b)) in self.support.iter().enumerate() {
            let row = self.matrix.row(m);
            for t in 0..frames {
                let mut acc = 0.0;
                for k in a..b {
                    acc += row[k] * energy[[k, t]];
                }
                out[[t, m]] = acc;
            }
        }
        out
    }

    fn check_bins(&self, spec: &Spectrogram) -> Result<()> {
        if spec.num_bins() != self.num_bins() {
            return Err(Error::shape(
                format!("{} frequency bins", self.num_bins()),
                format!("{} bins", spec.num_bins()),
            ));
        }
        Ok(())
    }
}

pub const DEFAULT_LOG_FLOOR: f64 = 1e-10;

/// `ln(H_mel |X|² + floor)`, frames × mels.
pub fn log_mel(spec: &Spectrogram, fb: &MelFilterbank, floor: f64) -> Result<Array2<f64>> {
    fb.check_bins(spec)?;
    Ok(fb.project(&spec.power()).mapv(|e| (e + floor).ln()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IldParams {
    pub epsilon: f64,
}

impl Default for IldParams {
    fn default() -> Self {
        Self { epsilon: 1e-10 }
    }
}

/// `ln(H_mel(|L|² + ε)) - ln(H_mel(|R|² + ε))`, frames × mels.
///
/// The mel projection is applied to each regularized channel energy
/// before the ratio, which keeps the feature exactly antisymmetric.
pub fn ild(left: &Spectrogram, right: &Spectrogram, fb: &MelFilterbank, p: &IldParams) -> Result<Array2<f64>> {
    if !(p.epsilon > 0.0) {
        return Err(Error::invalid("ILD epsilon must be positive"));
    }
    if left.values.dim() != right.values.dim() {
        return Err(Error::shape(
            format!("{:?}", left.values.dim()),
            format!("{:?}", right.values.dim()),
        ));
    }
    fb.check_bins(left)?;
    let eps = p.epsilon;
    let num = fb.project(&left.power().mapv(|e| e + eps));
    let den = fb.project(&right.power().mapv(|e| e + eps));
    Ok(ndarray::Zip::from(&num).and(&den).map_collect(|&a, &b| a.ln() - b.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlaneLabel {
    LogMelLeft,
    LogMelRight,
    Ild,
}

impl PlaneLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlaneLabel::LogMelLeft => "logmel_L",
            PlaneLabel::LogMelRight => "logmel_R",
            PlaneLabel::Ild => "ILD",
        }
    }
}

impl fmt::Display for PlaneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlaneLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logmel_L" => Ok(PlaneLabel::LogMelLeft),
            "logmel_R" => Ok(PlaneLabel::LogMelRight),
            "ILD" => Ok(PlaneLabel::Ild),
            other => Err(Error::invalid(format!("unknown feature plane {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneStats {
    pub label: PlaneLabel,
    pub mean: f64,
    pub std: f64,
}

/// Per-plane normalization statistics, in plane order.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub planes: Vec<PlaneStats>,
}

impl NormStats {
    /// One `label mean std` line per plane.
    pub fn to_text(&self) -> String {
        self.planes
            .iter()
            .map(|p| format!("{} {:e} {:e}\n", p.label, p.mean, p.std))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut planes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: "stats".into(),
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected `label mean std`, got {line:?}")));
            }
            let label = fields[0].parse().map_err(|e: Error| err(e.to_string()))?;
            let mean: f64 = fields[1].parse().map_err(|_| err(format!("bad mean {:?}", fields[1])))?;
            let std: f64 = fields[2].parse().map_err(|_| err(format!("bad std {:?}", fields[2])))?;
            planes.push(PlaneStats { label, mean, std });
        }
        Ok(Self { planes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePlane {
    pub label: PlaneLabel,
    /// frames × mels
    pub values: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub planes: Vec<FeaturePlane>,
    /// Statistics the planes were normalized with, if any.
    pub normalization: Option<NormStats>,
}

impl FeatureStack {
    pub fn labels(&self) -> Vec<PlaneLabel> {
        self.planes.iter().map(|p| p.label).collect()
    }

    /// (planes, frames, mels)
    pub fn shape(&self) -> (usize, usize, usize) {
        let (t, m) = self.planes.first().map(|p| p.values.dim()).unwrap_or((0, 0));
        (self.planes.len(), t, m)
    }
}

fn plane_stats(label: PlaneLabel, planes: &[&Array2<f64>]) -> Result<PlaneStats> {
    let count: usize = planes.iter().map(|p| p.len()).sum();
    if count == 0 {
        return Err(Error::invalid(format!("plane {label} is empty")));
    }
    let mean = planes.iter().flat_map(|p| p.iter()).sum::<f64>() / count as f64;
    let var = planes
        .iter()
        .flat_map(|p| p.iter())
        .map(|&v| (v - mean) * (v - mean))
        .sum::<f64>()
        / count as f64;
    let std = var.sqrt();
    if !(std.is_finite() && std > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::invalid(format!("plane {label} has zero variance")));
    }
    Ok(PlaneStats { label, mean, std })
}

/// Fits per-plane statistics over a corpus of stacks with identical layout.
pub fn fit_stats(corpus: &[FeatureStack]) -> Result<NormStats> {
    let first = corpus.first().ok_or_else(|| Error::invalid("cannot fit statistics on an empty corpus"))?;
    let labels = first.labels();
    for stack in corpus {
        if stack.labels() != labels {
            return Err(Error::shape(format!("{labels:?}"), format!("{:?}", stack.labels())));
        }
    }
    let planes = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let views: Vec<&Array2<f64>> = corpus.iter().map(|s| &s.planes[i].values).collect();
            plane_stats(label, &views)
        })
        .collect::<Result<_>>()?;
    Ok(NormStats { planes })
}

/// Applies `(x - mean) / std` plane by plane.
pub fn normalize(stack: &FeatureStack, stats: &NormStats) -> Result<FeatureStack> {
    let stat_labels: Vec<PlaneLabel> = stats.planes.iter().map(|p| p.label).collect();
    if stat_labels != stack.labels() {
        return Err(Error::shape(format!("{stat_labels:?}"), format!("{:?}", stack.labels())));
    }
    let mut planes = Vec::with_capacity(stack.planes.len());
    for (plane, s) in stack.planes.iter().zip(&stats.planes) {
        if !(s.std > 0.0 && s.std.is_finite() && s.mean.is_finite()) {
            return Err(Error::invalid(format!("plane {} has invalid statistics", s.label)));
        }
        let values = plane.values.mapv(|v| (v - s.mean) / s.std);
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("plane {} has non-finite values", s.label)));
        }
        planes.push(FeaturePlane { label: plane.label, values });
    }
    Ok(FeatureStack {
        planes,
        normalization: Some(stats.clone()),
    })
}

/// Fits statistics over the corpus and normalizes every stack with them.
pub fn normalize_corpus(corpus: &[FeatureStack]) -> Result<(Vec<FeatureStack>, NormStats)> {
    let stats = fit_stats(corpus)?;
    let out = corpus.iter().map(|s| normalize(s, &stats)).collect::<Result<_>>()?;
    Ok((out, stats))
}

/// Everything needed to turn a stereo waveform into a raw feature stack.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pub stft: StftSpec,
    pub filterbank: MelFilterbank,
    /// `None` drops the ILD plane (log-mel only).
    pub ild: Option<IldParams>,
    pub log_floor: f64,
}

impl FeatureExtractor {
    pub fn new(with_ild: bool) -> Result<Self> {
        let stft = StftSpec::default();
        Ok(Self {
            filterbank: MelFilterbank::default_for(&stft)?,
            stft,
            ild: with_ild.then(IldParams::default),
            log_floor: DEFAULT_LOG_FLOOR,
        })
    }

    pub fn extract(&self, left: &[f64], right: &[f64], sample_rate: u32) -> Result<FeatureStack> {
        if left.len() != right.len() {
            return Err(Error::shape(
                format!("{} right-channel samples", left.len()),
                right.len(),
            ));
        }
        let l = stft(left, sample_rate, &self.stft, Channel::Left)?;
        let r = stft(right, sample_rate, &self.stft, Channel::Right)?;
        let mut planes = vec![
            FeaturePlane {
                label: PlaneLabel::LogMelLeft,
                values: log_mel(&l, &self.filterbank, self.log_floor)?,
            },
            FeaturePlane {
                label: PlaneLabel::LogMelRight,
                values: log_mel(&r, &self.filterbank, self.log_floor)?,
            },
        ];
        if let Some(p) = &self.ild {
            planes.push(FeaturePlane {
                label: PlaneLabel::Ild,
                values: ild(&l, &r, &self.filterbank, p)?,
            });
        }
        Ok(FeatureStack {
            planes,
            normalization: None,
        })
    }
}

/// Decoded stereo PCM.
#[derive(Debug, Clone)]
pub struct StereoAudio {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub sample_rate: u32,
}

/// Reads a 2-channel 16- or 32-bit PCM WAV at the expected sample rate.
pub fn read_stereo_wav<R: Read>(reader: R, expected_rate: u32) -> Result<StereoAudio> {
    let mut wav = hound::WavReader::new(reader)?;
    let spec = wav.spec();
    if spec.channels != 2 {
        return Err(Error::invalid(format!("expected 2 channels, found {}", spec.channels)));
    }
    if spec.sample_rate != expected_rate {
        return Err(Error::invalid(format!(
            "expected {expected_rate} Hz audio, found {} Hz",
            spec.sample_rate
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (16 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            wav.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
        (hound::SampleFormat::Float, 32) => wav
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::invalid(format!("unsupported sample format {fmt:?} with {bits} bits")));
        }
    };
    let (left, right) = interleaved.chunks_exact(2).map(|c| (c[0], c[1])).unzip();
    Ok(StereoAudio {
        left,
        right,
        sample_rate: spec.sample_rate,
    })
}

pub fn read_stereo_wav_file(path: &Path, expected_rate: u32) -> Result<StereoAudio> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_stereo_wav(std::io::BufReader::new(file), expected_rate)
}
