//! Seeded synthetic scenes and noisy specialists for Monte-Carlo studies
//! of the fusion rules.
//!
//! Every random stream is derived from a base seed plus a trial index and
//! a clip index, so results do not depend on how trials are scheduled
//! across worker threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::domain::{ClipPredictions, ClipSet, SeldEvent, TaskConfig, AZIMUTH_MAX, AZIMUTH_MIN};
use crate::ensemble::{fuse_clips, EnsembleConfig, FusionMode, SpecialistId, SpecialistOutput};
use crate::error::{Error, Result};
use crate::metrics::{self, ClassCounts, MetricsConfig, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trajectory {
    Static,
    /// Azimuth moves linearly at a rate drawn from `[-max, max]` degrees per frame.
    LinearDrift { max_deg_per_frame: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub num_clips: usize,
    pub clip_frames: usize,
    pub num_classes: usize,
    /// Simultaneous events per frame (any class).
    pub max_concurrent: usize,
    pub trajectory: Trajectory,
    pub azimuth_range_deg: (f64, f64),
    pub distance_range_m: (f64, f64),
    pub min_duration_frames: usize,
    pub max_duration_frames: usize,
    pub max_gap_frames: usize,
    /// Concurrent same-class events are kept at least this far apart.
    pub min_same_class_separation_deg: f64,
    pub rng_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            num_clips: 100,
            clip_frames: 50,
            num_classes: 13,
            max_concurrent: 2,
            trajectory: Trajectory::Static,
            azimuth_range_deg: (-80.0, 80.0),
            distance_range_m: (0.5, 5.0),
            min_duration_frames: 3,
            max_duration_frames: 20,
            max_gap_frames: 8,
            min_same_class_separation_deg: 45.0,
            rng_seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self, task: &TaskConfig) -> Result<()> {
        if self.max_concurrent > task.max_tracks {
            return Err(Error::invalid(format!(
                "max_concurrent {} exceeds the track limit {}",
                self.max_concurrent, task.max_tracks
            )));
        }
        if self.num_classes == 0 || self.num_classes > task.num_classes {
            return Err(Error::invalid(format!(
                "scene uses {} classes, task allows {}",
                self.num_classes, task.num_classes
            )));
        }
        let (alo, ahi) = self.azimuth_range_deg;
        let (dlo, dhi) = self.distance_range_m;
        if !(AZIMUTH_MIN <= alo && alo <= ahi && ahi <= AZIMUTH_MAX) {
            return Err(Error::invalid(format!("azimuth range {alo}..{ahi} outside [-90, 90]")));
        }
        if !(0.0 < dlo && dlo <= dhi && dhi.is_finite()) {
            return Err(Error::invalid(format!("invalid distance range {dlo}..{dhi}")));
        }
        if self.min_duration_frames < 3 || self.max_duration_frames < self.min_duration_frames {
            return Err(Error::invalid("event durations must be at least 3 frames"));
        }
        if let Trajectory::LinearDrift { max_deg_per_frame } = self.trajectory {
            if !(max_deg_per_frame >= 0.0 && max_deg_per_frame.is_finite()) {
                return Err(Error::invalid("drift rate must be non-negative"));
            }
        }
        Ok(())
    }
}

fn clip_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn clip_id(index: usize) -> String {
    format!("clip_{index:05}")
}

/// Ground-truth scenes: each of `max_concurrent` slots is a sequence of
/// events separated by random gaps, every event lasting at least
/// `min_duration_frames`.
pub fn gen_scenes(cfg: &SceneConfig, task: &TaskConfig) -> Result<ClipSet> {
    cfg.validate(task)?;
    (0..cfg.num_clips)
        .map(|i| {
            let clip = gen_clip(cfg, task, i)?;
            Ok((clip.clip_id().to_string(), clip))
        })
        .collect()
}

fn gen_clip(cfg: &SceneConfig, task: &TaskConfig, index: usize) -> Result<ClipPredictions> {
    let mut rng = clip_rng(cfg.rng_seed, index as u64);
    let frames = cfg.clip_frames;
    let mut placed: Vec<Vec<SeldEvent>> = vec![Vec::new(); frames];
    let (alo, ahi) = cfg.azimuth_range_deg;
    let (dlo, dhi) = cfg.distance_range_m;

    for _slot in 0..cfg.max_concurrent {
        let mut t = rng.gen_range(0..=cfg.max_gap_frames);
        while t + cfg.min_duration_frames <= frames {
            let dur = rng.gen_range(cfg.min_duration_frames..=cfg.max_duration_frames).min(frames - t);
            for _attempt in 0..20 {
                let class = rng.gen_range(0..cfg.num_classes);
                let start_az = rng.gen_range(alo..=ahi);
                let rate = match cfg.trajectory {
                    Trajectory::Static => 0.0,
                    Trajectory::LinearDrift { max_deg_per_frame } if max_deg_per_frame > 0.0 => {
                        rng.gen_range(-max_deg_per_frame..=max_deg_per_frame)
                    }
                    Trajectory::LinearDrift { .. } => 0.0,
                };
                let distance = rng.gen_range(dlo..=dhi);
                let onscreen = rng.gen_bool(0.5);
                let track: Vec<SeldEvent> = (0..dur)
                    .map(|k| SeldEvent::new(class, (start_az + rate * k as f64).clamp(alo, ahi), distance, onscreen))
                    .collect::<Result<_>>()?;
                let clash = track.iter().enumerate().any(|(k, e)| {
                    placed[t + k].iter().any(|o| {
                        o.class_id() == class && (o.azimuth_deg() - e.azimuth_deg()).abs() < cfg.min_same_class_separation_deg
                    })
                });
                if !clash {
                    for (k, e) in track.into_iter().enumerate() {
                        placed[t + k].push(e);
                    }
                    break;
                }
            }
            t += dur + rng.gen_range(1..=cfg.max_gap_frames.max(1));
        }
    }
    ClipPredictions::from_events(
        clip_id(index),
        frames,
        placed.into_iter().enumerate().flat_map(|(f, es)| es.into_iter().map(move |e| (f, e))),
        task,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub doa_noise_std_deg: f64,
    /// Standard deviation of the log of the multiplicative distance error.
    pub distance_noise_rel_std: f64,
    pub miss_rate: f64,
    /// Expected spurious events per frame.
    pub false_positive_rate_per_frame: f64,
    pub onscreen_flip_rate: f64,
    pub fp_distance_range_m: (f64, f64),
    pub rng_seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            doa_noise_std_deg: 0.0,
            distance_noise_rel_std: 0.0,
            miss_rate: 0.0,
            false_positive_rate_per_frame: 0.0,
            onscreen_flip_rate: 0.0,
            fp_distance_range_m: (0.5, 5.0),
            rng_seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        let (lo, hi) = self.fp_distance_range_m;
        if !(prob(self.miss_rate) && prob(self.onscreen_flip_rate))
            || !(nonneg(self.doa_noise_std_deg) && nonneg(self.distance_noise_rel_std) && nonneg(self.false_positive_rate_per_frame))
            || !(0.0 < lo && lo <= hi && hi.is_finite())
        {
            return Err(Error::invalid(format!("invalid noise model {self:?}")));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            rng_seed: seed,
            ..self.clone()
        }
    }
}

/// Simulated specialist: misses, DOA and distance noise, flipped on-screen
/// flags and uniformly placed spurious events.
pub fn perturb(truth: &ClipSet, nm: &NoiseModel, id: SpecialistId, task: &TaskConfig) -> Result<SpecialistOutput> {
    nm.validate()?;
    let doa = Normal::new(0.0, nm.doa_noise_std_deg).expect("validated");
    let dist = Normal::new(0.0, nm.distance_noise_rel_std).expect("validated");
    let fp_count = (nm.false_positive_rate_per_frame > 0.0)
        .then(|| Poisson::new(nm.false_positive_rate_per_frame).expect("validated"));
    let (flo, fhi) = nm.fp_distance_range_m;

    let mut clips = ClipSet::new();
    for (index, (id_str, clip)) in truth.iter().enumerate() {
        let mut rng = clip_rng(nm.rng_seed, index as u64);
        let mut out = ClipPredictions::new(id_str.as_str(), clip.num_frames());
        for f in 0..clip.num_frames() {
            let mut counts = vec![0usize; task.num_classes];
            for e in clip.frame(f) {
                if nm.miss_rate > 0.0 && rng.gen_bool(nm.miss_rate) {
                    continue;
                }
                let mut az = e.azimuth_deg();
                if nm.doa_noise_std_deg > 0.0 {
                    az = (az + doa.sample(&mut rng)).clamp(AZIMUTH_MIN, AZIMUTH_MAX);
                }
                let mut d = e.distance_m();
                if nm.distance_noise_rel_std > 0.0 {
                    d *= dist.sample(&mut rng).exp();
                }
                let mut on = e.onscreen();
                if nm.onscreen_flip_rate > 0.0 && rng.gen_bool(nm.onscreen_flip_rate) {
                    on = !on;
                }
                counts[e.class_id()] += 1;
                out.push(f, SeldEvent::new(e.class_id(), az, d, on)?, task)?;
            }
            if let Some(p) = &fp_count {
                let n = p.sample(&mut rng) as usize;
                for _ in 0..n {
                    let class = rng.gen_range(0..task.num_classes);
                    let az = rng.gen_range(AZIMUTH_MIN..=AZIMUTH_MAX);
                    let d = rng.gen_range(flo..=fhi);
                    let on = rng.gen_bool(0.5);
                    if counts[class] < task.max_tracks {
                        counts[class] += 1;
                        out.push(f, SeldEvent::new(class, az, d, on)?, task)?;
                    }
                }
            }
        }
        out.normalize();
        clips.insert(id_str.clone(), out);
    }
    Ok(SpecialistOutput { id, clips })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub scene: SceneConfig,
    pub specialists: Vec<(SpecialistId, NoiseModel)>,
    pub trials: usize,
    pub ensemble: EnsembleConfig,
    pub metrics: MetricsConfig,
    pub task: TaskConfig,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.scene.validate(&self.task)?;
        self.ensemble.validate()?;
        if self.specialists.len() < self.ensemble.min_votes.max(3) {
            return Err(Error::invalid(format!(
                "a majority study needs at least 3 specialists, got {}",
                self.specialists.len()
            )));
        }
        for (_, nm) in &self.specialists {
            nm.validate()?;
        }
        if self.trials == 0 {
            return Err(Error::invalid("study needs at least one trial"));
        }
        Ok(())
    }

    /// Mode names in report order: each specialist, the majority vote, then
    /// every pairwise union.
    pub fn mode_names(&self) -> Vec<String> {
        let names: Vec<String> = self.specialists.iter().map(|(id, _)| id.to_string()).collect();
        let mut modes = names.clone();
        modes.push("ToS".to_string());
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                modes.push(format!("Ens({},{})", names[i], names[j]));
            }
        }
        modes
    }
}

/// Scores of every mode in one trial, in `mode_names` order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub modes: Vec<MetricsReport>,
}

/// Everything produced by one trial, kept for writing example files.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub truth: ClipSet,
    pub specialists: Vec<SpecialistOutput>,
    pub result: TrialResult,
}

pub fn run_trial(cfg: &StudyConfig, trial: usize) -> Result<TrialData> {
    let task = &cfg.task;
    let scene = SceneConfig {
        rng_seed: cfg.scene.rng_seed.wrapping_add(trial as u64),
        ..cfg.scene.clone()
    };
    let truth = gen_scenes(&scene, task)?;
    let specialists: Vec<SpecialistOutput> = cfg
        .specialists
        .iter()
        .map(|(id, nm)| perturb(&truth, &nm.with_seed(nm.rng_seed.wrapping_add(trial as u64)), id.clone(), task))
        .collect::<Result<_>>()?;

    let mut predictions: Vec<ClipSet> = specialists.iter().map(|s| s.clips.clone()).collect();
    predictions.push(fuse_clips(&specialists, &cfg.ensemble, FusionMode::Majority, task)?);
    for i in 0..specialists.len() {
        for j in i + 1..specialists.len() {
            let pair = [specialists[i].clone(), specialists[j].clone()];
            predictions.push(fuse_clips(&pair, &cfg.ensemble, FusionMode::Union, task)?);
        }
    }
    let modes = predictions
        .iter()
        .map(|p| Ok(MetricsReport::from_counts(metrics::count(p, &truth, &cfg.metrics)?, &cfg.metrics)))
        .collect::<Result<_>>()?;
    Ok(TrialData {
        truth,
        specialists,
        result: TrialResult { trial, modes },
    })
}

/// Mean and half-width of a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ci95 = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, ci95, n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub name: String,
    /// Counts pooled over every trial.
    pub pooled: ClassCounts,
    pub f1: Option<Estimate>,
    pub f1_on: Option<Estimate>,
    pub precision: Option<Estimate>,
    pub recall: Option<Estimate>,
    pub doae: Option<Estimate>,
    pub rde: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub modes: Vec<ModeSummary>,
    pub trials: Vec<TrialResult>,
}

impl StudyReport {
    pub fn mode(&self, name: &str) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.name == name)
    }

    pub fn to_table(&self) -> String {
        let est = |e: &Option<Estimate>| match e {
            Some(e) => format!("{:.2}±{:.2}", e.mean, e.ci95),
            None => "nan".to_string(),
        };
        let mut s = format!(
            "{:<12} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13}\n",
            "mode", "F1", "F1o", "precision", "recall", "DOAE", "RDE"
        );
        for m in &self.modes {
            let _ = writeln!(
                s,
                "{:<12} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13}",
                m.name,
                est(&m.f1),
                est(&m.f1_on),
                est(&m.precision),
                est(&m.recall),
                est(&m.doae),
                est(&m.rde)
            );
        }
        let _ = writeln!(s, "trials: {}", self.trials.len());
        s
    }

    /// `mode.metric=value` lines: per-trial means, CI half-widths and pooled counts.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for m in &self.modes {
            for (key, e) in [
                ("f1", &m.f1),
                ("f1_on", &m.f1_on),
                ("precision", &m.precision),
                ("recall", &m.recall),
                ("doae", &m.doae),
                ("rde", &m.rde),
            ] {
                match e {
                    Some(e) => {
                        let _ = writeln!(s, "{}.{key}={:.4}\n{}.{key}_ci95={:.4}", m.name, e.mean, m.name, e.ci95);
                    }
                    None => {
                        let _ = writeln!(s, "{}.{key}=nan", m.name);
                    }
                }
            }
            let p = &m.pooled;
            let _ = writeln!(s, "{}.tp={}\n{}.fp={}\n{}.fn={}", m.name, p.tp, m.name, p.fp(), m.name, p.fn_());
        }
        let _ = writeln!(s, "trials={}", self.trials.len());
        s
    }

    pub fn trials_csv(&self, names: &[String]) -> String {
        let mut s = String::from("trial,mode,f1,f1_on,precision,recall,doae,rde,tp,fp,fn\n");
        let opt = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.4}"));
        for t in &self.trials {
            for (name, r) in names.iter().zip(&t.modes) {
                let c = &r.totals;
                let _ = writeln!(
                    s,
                    "{},{name},{:.4},{:.4},{},{},{},{},{},{},{}",
                    t.trial,
                    r.f1,
                    r.f1_on,
                    opt(c.precision()),
                    opt(c.recall()),
                    opt(r.doae),
                    opt(r.rde.map(|x| 100.0 * x)),
                    c.tp,
                    c.fp(),
                    c.fn_()
                );
            }
        }
        s
    }
}

fn summarize(names: &[String], trials: Vec<TrialResult>) -> StudyReport {
    let modes = names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let reports: Vec<&MetricsReport> = trials.iter().map(|t| &t.modes[k]).collect();
            let collect = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
                let v: Vec<f64> = reports.iter().filter_map(|r| f(r)).collect();
                Estimate::from_samples(&v)
            };
            let mut pooled = ClassCounts::default();
            for r in &reports {
                pooled.add(&r.totals);
            }
            ModeSummary {
                name: name.clone(),
                pooled,
                f1: collect(&|r| Some(r.f1)),
                f1_on: collect(&|r| Some(r.f1_on)),
                precision: collect(&|r| r.totals.precision()),
                recall: collect(&|r| r.totals.recall()),
                doae: collect(&|r| r.doae),
                rde: collect(&|r| r.rde.map(|x| 100.0 * x)),
            }
        })
        .collect();
    StudyReport { modes, trials }
}

/// Runs `trials` independent trials (in parallel) and summarizes every mode.
pub fn ensemble_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let run = || -> Result<Vec<TrialResult>> {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t).map(|d| d.result))
            .collect()
    };
    let trials = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(summarize(&cfg.mode_names(), trials))
}

/// Three specialists sharing one noise model, seeds offset per specialist.
pub fn three_specialists(nm: &NoiseModel) -> Vec<(SpecialistId, NoiseModel)> {
    [SpecialistId::SpatioLinguistic, SpecialistId::SpatioTemporal, SpecialistId::TempoLinguistic]
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, nm.with_seed(nm.rng_seed.wrapping_add(1_000_003 * (i as u64 + 1)))))
        .collect()
}

/// Counts per mode and trial, used by callers that need per-trial comparisons.
pub fn per_trial_counts(report: &StudyReport, mode: usize) -> Vec<ClassCounts> {
    report.trials.iter().map(|t| t.modes[mode].totals).collect()
}

pub type ModeIndex = BTreeMap<String, usize>;

pub fn mode_index(cfg: &StudyConfig) -> ModeIndex {
    cfg.mode_names().into_iter().enumerate().map(|(i, n)| (n, i)).collect()
}
