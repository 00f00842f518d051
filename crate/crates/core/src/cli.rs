//! The `tos` command line.
//!
//! Prediction paths are either a single CSV file (one clip) or a directory
//! of `<clip_id>.csv` files. Every output file is written to a temporary
//! name and renamed into place.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::accddoa::{decode_clip, DecodeConfig};
use crate::container::{container_to_accddoa, features_to_container, Container};
use crate::csv::{clip_to_rows, frames_spanned, parse_rows, rows_to_clip, write_rows, DistanceUnit, PredictionCsvRow};
use crate::domain::{ClipSet, TaskConfig};
use crate::ensemble::{fuse_clips, EnsembleConfig, FusionMode, OnscreenRule, SpecialistId, SpecialistOutput};
use crate::error::{Error, Result};
use crate::features::{fit_stats, normalize, read_stereo_wav_file, FeatureExtractor, FeatureStack, NormStats};
use crate::metrics::{score, Averaging, MetricsConfig};
use crate::shapes::{seld_encoder_trace, trace_table};
use crate::sim::{self, NoiseModel, SceneConfig, StudyConfig, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

pub const STATS_FILE: &str = "stats.txt";
const SAMPLE_RATE: u32 = 24_000;

#[derive(Debug, Parser)]
#[command(name = "tos", version, about = "Stereo SELD features, fusion, scoring and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract normalized log-mel (+ ILD) feature containers from stereo WAVs.
    Features {
        /// WAV file or directory of WAV files.
        input: PathBuf,
        /// Output directory for `<clip>.tosf` files and the stats sidecar.
        output: PathBuf,
        /// Drop the ILD plane (2-plane log-mel set).
        #[arg(long)]
        no_ild: bool,
        /// `fit` to estimate statistics on the inputs, or a stats file to reuse.
        #[arg(long, default_value = "fit")]
        stats: String,
    },
    /// Fuse 2 or 3 specialist prediction sets.
    Fuse {
        #[arg(required = true, num_args = 2..=3)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// `majority` or `union`; defaults to majority for 3 inputs, union for 2.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long, default_value_t = 20.0)]
        threshold_deg: f64,
        /// `any-contributing` or `any-specialist`.
        #[arg(long, default_value = "any-contributing")]
        onscreen_rule: String,
        #[arg(long)]
        header: bool,
        #[arg(long, default_value = "m")]
        unit: String,
        /// Clip length in label frames; defaults to the last frame seen.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Score predictions against references.
    Eval {
        pred: PathBuf,
        reference: PathBuf,
        /// Headline F1 requires matching on-screen flags.
        #[arg(long)]
        onscreen: bool,
        #[arg(long, default_value = "macro")]
        averaging: String,
        /// `text` or `kv`.
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long, default_value = "m")]
        unit: String,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Run a seeded simulation study from a key=value config.
    Simulate {
        config: PathBuf,
        output: PathBuf,
        /// Worker threads; overrides the config's `workers` key.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Decode TOSA network outputs into prediction CSVs.
    Decode {
        /// TOSA file or directory of TOSA files.
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        activity_threshold: f64,
        #[arg(long)]
        header: bool,
    },
    /// Print the pooling trace of the audio encoder.
    Trace {
        #[arg(long, default_value_t = 3)]
        planes: usize,
        #[arg(long, default_value_t = 800)]
        frames: usize,
        #[arg(long, default_value_t = 64)]
        mels: usize,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        EXIT_IO
    } else {
        EXIT_INVALID
    }
}

/// Runs a parsed command and returns what it prints.
pub fn execute(command: Command) -> Result<String> {
    match command {
        Command::Features {
            input,
            output,
            no_ild,
            stats,
        } => cmd_features(&input, &output, !no_ild, &stats),
        Command::Fuse {
            inputs,
            output,
            mode,
            threshold_deg,
            onscreen_rule,
            header,
            unit,
            frames,
        } => {
            let mode = mode.as_deref().map(str::parse).transpose()?;
            let cfg = EnsembleConfig {
                angular_threshold_deg: threshold_deg,
                onscreen_rule: parse_onscreen_rule(&onscreen_rule)?,
                ..EnsembleConfig::default()
            };
            let opts = CsvOptions {
                unit: unit.parse()?,
                header,
                frames,
            };
            cmd_fuse(&inputs, &output, mode, &cfg, &opts)
        }
        Command::Eval {
            pred,
            reference,
            onscreen,
            averaging,
            format,
            unit,
            frames,
        } => {
            let task = TaskConfig::default();
            let cfg = MetricsConfig {
                require_onscreen_match: onscreen,
                averaging: averaging.parse::<Averaging>()?,
                ..MetricsConfig::from_task(&task)
            };
            let kv = match format.as_str() {
                "text" => false,
                "kv" => true,
                other => return Err(Error::invalid(format!("unknown format {other:?} (expected text or kv)"))),
            };
            let opts = CsvOptions {
                unit: unit.parse()?,
                header: false,
                frames,
            };
            cmd_eval(&pred, &reference, &cfg, kv, &opts)
        }
        Command::Simulate { config, output, workers } => cmd_simulate(&config, &output, workers),
        Command::Decode {
            input,
            output,
            activity_threshold,
            header,
        } => {
            let cfg = DecodeConfig {
                activity_threshold,
                ..DecodeConfig::default()
            };
            cmd_decode(&input, &output, &cfg, header)
        }
        Command::Trace { planes, frames, mels } => Ok(trace_table(&seld_encoder_trace([planes, frames, mels])?)),
    }
}

fn parse_onscreen_rule(s: &str) -> Result<OnscreenRule> {
    match s {
        "any-contributing" => Ok(OnscreenRule::AnyContributing),
        "any-specialist" => Ok(OnscreenRule::AnySpecialist),
        other => Err(Error::invalid(format!(
            "unknown onscreen rule {other:?} (expected any-contributing or any-specialist)"
        ))),
    }
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = fs::write(&tmp, bytes).and_then(|()| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Writes every file or none: files already renamed into place are removed
/// when a later one fails.
fn write_all_or_nothing(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    for (i, (path, bytes)) in files.iter().enumerate() {
        if let Err(e) = write_atomic(path, bytes) {
            for (done, _) in &files[..i] {
                let _ = fs::remove_file(done);
            }
            return Err(e);
        }
    }
    Ok(())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Files with the given extension directly inside `dir`, sorted by name.
fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::invalid(format!("cannot derive a clip id from {}", path.display())))
}

fn inputs_of(path: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let files = list_files(path, ext)?;
        if files.is_empty() {
            return Err(Error::invalid(format!("no .{ext} files in {}", path.display())));
        }
        Ok(files)
    } else if path.exists() {
        Ok(vec![path.to_path_buf()])
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")))
    }
}

pub fn cmd_features(input: &Path, output: &Path, with_ild: bool, stats: &str) -> Result<String> {
    let files = inputs_of(input, "wav")?;
    let extractor = FeatureExtractor::new(with_ild)?;
    let stacks: Vec<(String, FeatureStack)> = files
        .par_iter()
        .map(|path| {
            let audio = read_stereo_wav_file(path, SAMPLE_RATE).map_err(|e| match e {
                Error::Invalid(msg) => Error::invalid(format!("{}: {msg}", path.display())),
                other => other,
            })?;
            Ok((stem(path)?, extractor.extract(&audio.left, &audio.right, audio.sample_rate)?))
        })
        .collect::<Result<_>>()?;

    let raw: Vec<FeatureStack> = stacks.iter().map(|(_, s)| s.clone()).collect();
    let norm = match stats {
        "fit" => fit_stats(&raw)?,
        path => NormStats::from_text(&read_text(Path::new(path))?)?,
    };
    let mut files_out = Vec::with_capacity(stacks.len() + 1);
    let mut shape = (0, 0, 0);
    for (id, stack) in &stacks {
        let normalized = normalize(stack, &norm)?;
        shape = normalized.shape();
        files_out.push((output.join(format!("{id}.tosf")), features_to_container(&normalized)?.to_bytes()));
    }
    files_out.push((output.join(STATS_FILE), norm.to_text().into_bytes()));
    create_dir(output)?;
    write_all_or_nothing(&files_out)?;
    Ok(format!(
        "wrote {} clips ({} planes x {} frames x {} mels)\n",
        stacks.len(),
        shape.0,
        shape.1,
        shape.2
    ))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    pub unit: DistanceUnit,
    pub header: bool,
    /// Fixed clip length; otherwise the last frame seen across all inputs.
    pub frames: Option<usize>,
}

/// Clip id used when inputs are single files.
pub const SINGLE_CLIP_ID: &str = "clip";

/// Rows per clip for one input path.
type RowSet = BTreeMap<String, Vec<PredictionCsvRow>>;

fn load_rows(path: &Path, unit: DistanceUnit) -> Result<(RowSet, bool)> {
    let is_dir = path.is_dir();
    let mut set = RowSet::new();
    for file in inputs_of(path, "csv")? {
        let id = if is_dir { stem(&file)? } else { SINGLE_CLIP_ID.to_string() };
        let rows = parse_rows(&read_text(&file)?, &file.display().to_string(), unit)?;
        set.insert(id, rows);
    }
    Ok((set, is_dir))
}

/// Loads aligned prediction sets: every input must be of the same kind and
/// each clip gets one frame count shared by all inputs.
pub fn load_prediction_sets(paths: &[PathBuf], opts: &CsvOptions, task: &TaskConfig) -> Result<(Vec<ClipSet>, bool)> {
    let loaded: Vec<(RowSet, bool)> = paths.iter().map(|p| load_rows(p, opts.unit)).collect::<Result<_>>()?;
    let is_dir = loaded[0].1;
    if loaded.iter().any(|(_, d)| *d != is_dir) {
        return Err(Error::invalid("inputs must be all files or all directories"));
    }
    let ids: BTreeSet<&String> = loaded.iter().flat_map(|(s, _)| s.keys()).collect();
    let mut frames = BTreeMap::new();
    for id in ids {
        let spanned = loaded.iter().filter_map(|(s, _)| s.get(id)).map(|r| frames_spanned(r)).max().unwrap_or(0);
        let n = match opts.frames {
            Some(n) if n < spanned => {
                return Err(Error::invalid(format!("clip {id} has rows at frame {} beyond --frames {n}", spanned - 1)));
            }
            Some(n) => n,
            None => spanned,
        };
        frames.insert(id.clone(), n);
    }
    let sets = loaded
        .iter()
        .map(|(rows, _)| {
            rows.iter()
                .map(|(id, r)| Ok((id.clone(), rows_to_clip(id, r, frames[id], task)?)))
                .collect::<Result<ClipSet>>()
        })
        .collect::<Result<_>>()?;
    Ok((sets, is_dir))
}

fn clip_csv(clip: &crate::domain::ClipPredictions, opts: &CsvOptions) -> Vec<u8> {
    write_rows(&clip_to_rows(clip), opts.header, opts.unit).into_bytes()
}

/// Writes a clip set as one file (single-clip inputs) or a directory.
fn write_clip_set(set: &ClipSet, output: &Path, as_dir: bool, opts: &CsvOptions) -> Result<()> {
    if as_dir {
        create_dir(output)?;
        let files: Vec<(PathBuf, Vec<u8>)> =
            set.iter().map(|(id, clip)| (output.join(format!("{id}.csv")), clip_csv(clip, opts))).collect();
        write_all_or_nothing(&files)
    } else {
        let clip = set
            .values()
            .next()
            .ok_or_else(|| Error::invalid("nothing to write"))?;
        write_atomic(output, &clip_csv(clip, opts))
    }
}

pub fn cmd_fuse(inputs: &[PathBuf], output: &Path, mode: Option<FusionMode>, cfg: &EnsembleConfig, opts: &CsvOptions) -> Result<String> {
    let mode = match (mode, inputs.len()) {
        (Some(FusionMode::Union), 3) => {
            return Err(Error::invalid("union fusion is pairwise; pass exactly 2 inputs"));
        }
        (Some(m), 2 | 3) => m,
        (None, 3) => FusionMode::Majority,
        (None, 2) => FusionMode::Union,
        (_, n) => return Err(Error::invalid(format!("fusion needs 2 or 3 inputs, got {n}"))),
    };
    let task = TaskConfig::default();
    let (sets, is_dir) = load_prediction_sets(inputs, opts, &task)?;
    let outputs: Vec<SpecialistOutput> = sets
        .into_iter()
        .zip(inputs)
        .map(|(clips, path)| SpecialistOutput {
            id: SpecialistId::Named(path.display().to_string()),
            clips,
        })
        .collect();
    let fused = fuse_clips(&outputs, cfg, mode, &task)?;
    write_clip_set(&fused, output, is_dir, opts)?;
    let events: usize = fused.values().map(|c| c.num_events()).sum();
    Ok(format!("fused {} clips, {events} events\n", fused.len()))
}

pub fn cmd_eval(pred: &Path, reference: &Path, cfg: &MetricsConfig, kv: bool, opts: &CsvOptions) -> Result<String> {
    let task = TaskConfig::default();
    let (sets, _) = load_prediction_sets(&[pred.to_path_buf(), reference.to_path_buf()], opts, &task)?;
    let report = score(&sets[0], &sets[1], cfg)?;
    Ok(if kv {
        report.to_kv()
    } else {
        format!("{}\n\n{}", report.summary_line(), report.to_table())
    })
}

pub fn cmd_decode(input: &Path, output: &Path, cfg: &DecodeConfig, header: bool) -> Result<String> {
    let task = TaskConfig::default();
    let files = inputs_of(input, "tosa")?;
    let mut set = ClipSet::new();
    for file in &files {
        let bytes = fs::read(file).map_err(|e| Error::io(file, e))?;
        let frames = container_to_accddoa(&Container::from_bytes(&bytes)?)?;
        let id = stem(file)?;
        set.insert(id.clone(), decode_clip(&id, &frames, cfg, &task)?);
    }
    let opts = CsvOptions {
        header,
        ..CsvOptions::default()
    };
    write_clip_set(&set, output, input.is_dir(), &opts)?;
    Ok(format!("decoded {} clips\n", set.len()))
}

/// Keys accepted by simulation configs. Noise keys may also be prefixed
/// with a specialist name (`SL.`, `ST.`, `TL.`) to override one specialist.
pub const SIM_KEYS: &[&str] = &[
    "num_clips",
    "clip_frames",
    "num_classes",
    "max_concurrent",
    "trajectory",
    "drift_deg_per_frame",
    "azimuth_min",
    "azimuth_max",
    "distance_min",
    "distance_max",
    "min_duration",
    "max_duration",
    "max_gap",
    "min_separation_deg",
    "seed",
    "trials",
    "workers",
    "threshold_deg",
    "min_votes",
    "onscreen_rule",
];

const NOISE_KEYS: &[&str] = &[
    "doa_noise_std_deg",
    "distance_noise_rel_std",
    "miss_rate",
    "fp_rate",
    "onscreen_flip_rate",
    "fp_distance_min",
    "fp_distance_max",
];

const SPECIALISTS: [&str; 3] = ["SL", "ST", "TL"];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str, origin: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            msg: format!("expected key=value, found {line:?}"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

/// Builds a study from a key=value config.
pub fn study_from_config(text: &str, origin: &str) -> Result<StudyConfig> {
    let entries = parse_kv(text, origin)?;
    let mut scene = SceneConfig::default();
    let mut noise = NoiseModel::default();
    let mut overrides: BTreeMap<&str, Vec<(String, String, usize)>> = BTreeMap::new();
    let mut ensemble = EnsembleConfig::default();
    let mut trials = 1usize;
    let mut workers = None;
    let mut drift = 0.0;
    let mut trajectory = "static".to_string();
    let mut seen = BTreeSet::new();

    for (key, value, line) in &entries {
        let bad = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: *line,
            msg,
        };
        if !seen.insert(key.clone()) {
            return Err(bad(format!("duplicate key {key:?}")));
        }
        let num = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(format!("bad number {v:?} for {key}")));
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad integer {v:?} for {key}")));
        if let Some((prefix, rest)) = key.split_once('.') {
            if !SPECIALISTS.contains(&prefix) || !NOISE_KEYS.contains(&rest) {
                return Err(bad(format!("unknown config key {key:?}")));
            }
            let p = SPECIALISTS.iter().find(|s| **s == prefix).expect("checked");
            overrides.entry(p).or_default().push((rest.to_string(), value.clone(), *line));
            continue;
        }
        if NOISE_KEYS.contains(&key.as_str()) {
            set_noise(&mut noise, key, num(value)?);
            continue;
        }
        match key.as_str() {
            "num_clips" => scene.num_clips = int(value)?,
            "clip_frames" => scene.clip_frames = int(value)?,
            "num_classes" => scene.num_classes = int(value)?,
            "max_concurrent" => scene.max_concurrent = int(value)?,
            "trajectory" => trajectory = value.clone(),
            "drift_deg_per_frame" => drift = num(value)?,
            "azimuth_min" => scene.azimuth_range_deg.0 = num(value)?,
            "azimuth_max" => scene.azimuth_range_deg.1 = num(value)?,
            "distance_min" => scene.distance_range_m.0 = num(value)?,
            "distance_max" => scene.distance_range_m.1 = num(value)?,
            "min_duration" => scene.min_duration_frames = int(value)?,
            "max_duration" => scene.max_duration_frames = int(value)?,
            "max_gap" => scene.max_gap_frames = int(value)?,
            "min_separation_deg" => scene.min_same_class_separation_deg = num(value)?,
            "seed" => {
                let seed = value.parse::<u64>().map_err(|_| bad(format!("bad seed {value:?}")))?;
                scene.rng_seed = seed;
                noise.rng_seed = seed;
            }
            "trials" => trials = int(value)?,
            "workers" => workers = Some(int(value)?),
            "threshold_deg" => ensemble.angular_threshold_deg = num(value)?,
            "min_votes" => ensemble.min_votes = int(value)?,
            "onscreen_rule" => ensemble.onscreen_rule = parse_onscreen_rule(value).map_err(|e| bad(e.to_string()))?,
            _ => return Err(bad(format!("unknown config key {key:?}"))),
        }
    }
    scene.trajectory = match trajectory.as_str() {
        "static" => Trajectory::Static,
        "drift" | "linear_drift" => Trajectory::LinearDrift {
            max_deg_per_frame: drift,
        },
        other => return Err(Error::invalid(format!("unknown trajectory {other:?} (expected static or drift)"))),
    };

    let mut specialists = sim::three_specialists(&noise);
    for (id, nm) in specialists.iter_mut() {
        if let Some(list) = overrides.get(id.to_string().as_str()) {
            for (key, value, line) in list {
                let v = value.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| Error::Parse {
                    path: origin.to_string(),
                    line: *line,
                    msg: format!("bad number {value:?} for {id}.{key}"),
                })?;
                set_noise(nm, key, v);
            }
        }
    }
    let task = TaskConfig::default();
    let mut metrics = MetricsConfig::from_task(&task);
    metrics.angular_threshold_deg = ensemble.angular_threshold_deg;
    let cfg = StudyConfig {
        scene,
        specialists,
        trials,
        ensemble,
        metrics,
        task,
        workers,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn set_noise(nm: &mut NoiseModel, key: &str, v: f64) {
    match key {
        "doa_noise_std_deg" => nm.doa_noise_std_deg = v,
        "distance_noise_rel_std" => nm.distance_noise_rel_std = v,
        "miss_rate" => nm.miss_rate = v,
        "fp_rate" => nm.false_positive_rate_per_frame = v,
        "onscreen_flip_rate" => nm.onscreen_flip_rate = v,
        "fp_distance_min" => nm.fp_distance_range_m.0 = v,
        "fp_distance_max" => nm.fp_distance_range_m.1 = v,
        _ => unreachable!("noise key list and setter disagree on {key}"),
    }
}

/// Runs the study and writes `truth/`, one directory per specialist (both
/// from trial 0), `report.txt`, `report.kv` and `trials.csv`.
pub fn cmd_simulate(config: &Path, output: &Path, workers: Option<usize>) -> Result<String> {
    let mut cfg = study_from_config(&read_text(config)?, &config.display().to_string())?;
    if workers.is_some() {
        cfg.workers = workers;
    }
    let report = sim::ensemble_study(&cfg)?;
    let first = sim::run_trial(&cfg, 0)?;

    let opts = CsvOptions::default();
    create_dir(output)?;
    write_clip_set(&first.truth, &output.join("truth"), true, &opts)?;
    for s in &first.specialists {
        write_clip_set(&s.clips, &output.join(s.id.to_string()), true, &opts)?;
    }
    let table = report.to_table();
    write_atomic(&output.join("report.txt"), table.as_bytes())?;
    write_atomic(&output.join("report.kv"), report.to_kv().as_bytes())?;
    write_atomic(&output.join("trials.csv"), report.trials_csv(&cfg.mode_names()).as_bytes())?;
    Ok(table)
}
