//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! with its runtime, and exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tos_seld::accddoa::{decode_frame, encode_events, DecodeConfig};
use tos_seld::cli;
use tos_seld::ensemble::{fuse_frame_majority, fuse_frame_union, EnsembleConfig};
use tos_seld::features::{ild, stft, Channel, FeatureExtractor, IldParams, MelFilterbank, StftSpec};
use tos_seld::metrics::{score, MetricsConfig};
use tos_seld::shapes::{seld_encoder_trace, EncoderStage};
use tos_seld::sim::{self, NoiseModel, SceneConfig, StudyConfig, Trajectory};
use tos_seld::{ClipPredictions, ClipSet, SeldEvent, TaskConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn c1_feature_shapes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (l, r) = (noise(&mut rng, 120_000), noise(&mut rng, 120_000));
    let full = FeatureExtractor::new(true).map_err(|e| e.to_string())?.extract(&l, &r, 24_000).map_err(|e| e.to_string())?;
    let tl = FeatureExtractor::new(false).map_err(|e| e.to_string())?.extract(&l, &r, 24_000).map_err(|e| e.to_string())?;
    check(full.shape() == (3, 800, 64), format!("full stack {:?}", full.shape()))?;
    check(tl.shape() == (2, 800, 64), format!("TL stack {:?}", tl.shape()))?;
    Ok(format!("{:?} and {:?}", full.shape(), tl.shape()))
}

fn c2_ild_identities() -> Outcome {
    let spec = StftSpec::default();
    let fb = MelFilterbank::default_for(&spec).map_err(|e| e.to_string())?;
    let p = IldParams::default();
    let spectra = |l: &[f64], r: &[f64]| {
        (
            stft(l, 24_000, &spec, Channel::Left).unwrap(),
            stft(r, 24_000, &spec, Channel::Right).unwrap(),
        )
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let x = noise(&mut rng, 120_000);
    let (sl, sr) = spectra(&x, &x);
    let same = ild(&sl, &sr, &fb, &p).unwrap();
    let max_same = same.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check(max_same < 1e-6, format!("L = R gives max |ILD| {max_same:e}"))?;

    let silence = vec![0.0; 120_000];
    let (sl, sr) = spectra(&silence, &silence);
    check(ild(&sl, &sr, &fb, &p).unwrap().iter().all(|v| *v == 0.0), "silence is not all zeros")?;

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let gain = rng.gen_range(0.01..4.0);
        let l = noise(&mut rng, 120_000);
        let r: Vec<f64> = noise(&mut rng, 120_000).iter().map(|v| v * gain).collect();
        let (sl, sr) = spectra(&l, &r);
        let fwd = ild(&sl, &sr, &fb, &p).unwrap();
        let rev = ild(&sr, &sl, &fb, &p).unwrap();
        worst = fwd.iter().zip(rev.iter()).fold(worst, |m, (a, b)| m.max((a + b).abs()));
    }
    check(worst <= 1e-9, format!("antisymmetry residual {worst:e}"))?;
    Ok(format!("L=R max {max_same:.1e}, antisymmetry max {worst:.1e} over 100 clips"))
}

fn c3_pooling_trace() -> Outcome {
    let rows = seld_encoder_trace([3, 800, 64]).map_err(|e| e.to_string())?;
    let mut freq = vec![rows[0].input[2]];
    let mut time = vec![rows[0].input[1]];
    for r in &rows {
        if let EncoderStage::Pool(_) = r.stage {
            if r.output[2] != r.input[2] {
                freq.push(r.output[2]);
            }
            if r.output[1] != r.input[1] {
                time.push(r.output[1]);
            }
        }
    }
    check(freq == [64, 16, 4, 1], format!("freq {freq:?}"))?;
    check(time == [800, 200, 50], format!("time {time:?}"))?;
    Ok(format!("freq {freq:?}, time {time:?}"))
}

/// Random valid event set: per class at most 3 events, pairwise more
/// than the dedupe angle apart.
fn random_event_set(rng: &mut ChaCha8Rng, task: &TaskConfig) -> Vec<SeldEvent> {
    let mut events = Vec::new();
    for class in 0..task.num_classes {
        if rng.gen_bool(0.6) {
            continue;
        }
        let n = rng.gen_range(1..=task.max_tracks);
        let mut az: Vec<f64> = Vec::new();
        while az.len() < n {
            let a = rng.gen_range(-90.0..=90.0);
            if az.iter().all(|b: &f64| (a - b).abs() > 21.0) {
                az.push(a);
            }
        }
        for a in az {
            let d = rng.gen_range(0.01..10.0);
            events.push(SeldEvent::new(class, a, d, rng.gen_bool(0.5)).unwrap());
        }
    }
    events
}

fn c4_accddoa_round_trip() -> Outcome {
    let task = TaskConfig::default();
    let cfg = DecodeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut events_total = 0;
    for case in 0..1000 {
        let mut events = random_event_set(&mut rng, &task);
        let frame = encode_events(&events, &task).map_err(|e| e.to_string())?;
        let mut back = decode_frame(&frame, &cfg, &task).map_err(|e| e.to_string())?;
        events.sort_by(SeldEvent::canonical_cmp);
        back.sort_by(SeldEvent::canonical_cmp);
        check(events.len() == back.len(), format!("case {case}: {} events became {}", events.len(), back.len()))?;
        for (a, b) in events.iter().zip(&back) {
            let ok = a.class_id() == b.class_id()
                && (a.azimuth_deg() - b.azimuth_deg()).abs() <= 1e-6
                && a.distance_m() == b.distance_m()
                && a.onscreen() == b.onscreen();
            check(ok, format!("case {case}: {a:?} decoded as {b:?}"))?;
        }
        events_total += events.len();
    }
    Ok(format!("1000 sets, {events_total} events"))
}

// Exhaustive-partition oracle for fusion: every set partition of the
// frame's events is scored; blocks of two or more are clusters.

type Key = Vec<Vec<(usize, usize)>>;

struct Best {
    clustered: usize,
    spread: f64,
    key: Key,
}

fn partitions(n: usize, visit: &mut impl FnMut(&[Vec<usize>])) {
    fn go(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, visit: &mut impl FnMut(&[Vec<usize>])) {
        if i == n {
            visit(blocks);
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            go(i + 1, n, blocks, visit);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        go(i + 1, n, blocks, visit);
        blocks.pop();
    }
    go(0, n, &mut Vec::new(), visit);
}

fn oracle_grouping(lists: &[Vec<SeldEvent>], threshold: f64, min_votes: usize) -> Key {
    let flat: Vec<(usize, usize, f64)> = lists
        .iter()
        .enumerate()
        .flat_map(|(s, l)| l.iter().enumerate().map(move |(t, e)| (s, t, e.azimuth_deg())))
        .collect();
    let mut best: Option<Best> = None;
    partitions(flat.len(), &mut |blocks| {
        let mut clustered = 0;
        let mut spread = 0.0;
        let mut key: Key = Vec::new();
        for block in blocks.iter().filter(|b| b.len() >= 2) {
            if block.len() < min_votes {
                return;
            }
            let mut specialists: Vec<usize> = block.iter().map(|&i| flat[i].0).collect();
            specialists.sort();
            specialists.dedup();
            if specialists.len() != block.len() {
                return;
            }
            for (a, &i) in block.iter().enumerate() {
                for &j in &block[a + 1..] {
                    let d = (flat[i].2 - flat[j].2).abs();
                    if d > threshold {
                        return;
                    }
                    spread += d;
                }
            }
            clustered += block.len();
            let mut members: Vec<(usize, usize)> = block.iter().map(|&i| (flat[i].0, flat[i].1)).collect();
            members.sort();
            key.push(members);
        }
        key.sort();
        let better = match &best {
            None => true,
            Some(b) if clustered != b.clustered => clustered > b.clustered,
            Some(b) if (spread - b.spread).abs() > 1e-9 => spread < b.spread,
            Some(b) => key < b.key,
        };
        if better {
            best = Some(Best { clustered, spread, key });
        }
    });
    best.expect("the all-singleton partition is always admissible").key
}

fn oracle_fuse(lists: &[Vec<SeldEvent>], group: &[(usize, usize)]) -> SeldEvent {
    let members: Vec<SeldEvent> = group.iter().map(|&(s, t)| lists[s][t]).collect();
    let n = members.len() as f64;
    SeldEvent::new(
        members[0].class_id(),
        members.iter().map(|e| e.azimuth_deg()).sum::<f64>() / n,
        members.iter().map(|e| e.distance_m()).sum::<f64>() / n,
        members.iter().any(|e| e.onscreen()),
    )
    .unwrap()
}

/// One class, up to 3 events per specialist, clumped around a few centers.
/// Every other frame uses integer azimuths so exact spread ties occur.
fn random_fusion_frame(rng: &mut ChaCha8Rng, specialists: usize, class: usize, integer: bool) -> Vec<Vec<SeldEvent>> {
    let centers: Vec<f64> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(-75.0..75.0)).collect();
    (0..specialists)
        .map(|_| {
            (0..rng.gen_range(0..=3))
                .map(|_| {
                    let c = centers[rng.gen_range(0..centers.len())];
                    let mut az = (c + rng.gen_range(-14.0..14.0)).clamp(-90.0, 90.0);
                    if integer {
                        az = az.round();
                    }
                    let d = if integer { rng.gen_range(1..6) as f64 } else { rng.gen_range(0.5..5.0) };
                    SeldEvent::new(class, az, d, rng.gen_bool(0.3)).unwrap()
                })
                .collect()
        })
        .collect()
}

fn same_events(a: &[SeldEvent], b: &[SeldEvent]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.class_id() == y.class_id()
                && (x.azimuth_deg() - y.azimuth_deg()).abs() < 1e-9
                && (x.distance_m() - y.distance_m()).abs() < 1e-12
                && x.onscreen() == y.onscreen()
        })
}

fn c5_ensemble_oracle() -> Outcome {
    let cfg = EnsembleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut clusters = 0;
    for case in 0..1000 {
        let frame = random_fusion_frame(&mut rng, 3, 7, case % 2 == 1);
        let got = fuse_frame_majority(&frame, &cfg).map_err(|e| e.to_string())?;
        let key = oracle_grouping(&frame, cfg.angular_threshold_deg, cfg.min_votes);
        let got_key: Key = got.iter().map(|c| c.members.iter().map(|m| (m.specialist, m.track)).collect()).collect();
        check(got_key == key, format!("majority case {case}: {got_key:?} vs oracle {key:?}"))?;
        let mut want: Vec<SeldEvent> = key.iter().map(|g| oracle_fuse(&frame, g)).collect();
        let mut fused: Vec<SeldEvent> = got.iter().map(|c| c.fused).collect();
        want.sort_by(SeldEvent::canonical_cmp);
        fused.sort_by(SeldEvent::canonical_cmp);
        check(same_events(&fused, &want), format!("majority case {case}: fused events differ"))?;
        clusters += key.len();
    }

    // union: pairs from two specialists over two classes, unmatched kept
    for case in 0..1000 {
        let integer = case % 2 == 1;
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut want = Vec::new();
        for class in [2, 9] {
            let frame = random_fusion_frame(&mut rng, 2, class, integer);
            let key = oracle_grouping(&frame, cfg.angular_threshold_deg, 2);
            let mut used = Vec::new();
            for g in &key {
                want.push(oracle_fuse(&frame, g));
                used.extend(g.iter().copied());
            }
            for (s, list) in frame.iter().enumerate() {
                for (t, e) in list.iter().enumerate() {
                    if !used.contains(&(s, t)) {
                        want.push(*e);
                    }
                }
            }
            a.extend(frame[0].iter().copied());
            b.extend(frame[1].iter().copied());
        }
        want.sort_by(SeldEvent::canonical_cmp);
        let got = fuse_frame_union(&a, &b, &cfg).map_err(|e| e.to_string())?;
        check(same_events(&got, &want), format!("union case {case}: {got:?} vs oracle {want:?}"))?;
    }
    Ok(format!("1000/1000 majority ({clusters} clusters), 1000/1000 union"))
}

fn random_clip_set(rng: &mut ChaCha8Rng, task: &TaskConfig, clips: usize) -> ClipSet {
    (0..clips)
        .map(|c| {
            let id = format!("c{c}");
            let mut clip = ClipPredictions::new(id.as_str(), 10);
            for f in 0..10 {
                for e in random_event_set(rng, task) {
                    clip.push(f, e, task).unwrap();
                }
            }
            clip.normalize();
            (id, clip)
        })
        .collect()
}

fn perturb_set(rng: &mut ChaCha8Rng, set: &ClipSet, task: &TaskConfig) -> ClipSet {
    set.iter()
        .map(|(id, clip)| {
            let mut out = ClipPredictions::new(id.as_str(), clip.num_frames());
            for (f, events) in clip.frames() {
                for e in events {
                    if rng.gen_bool(0.2) {
                        continue;
                    }
                    let az = (e.azimuth_deg() + rng.gen_range(-30.0..30.0)).clamp(-90.0, 90.0);
                    let d = e.distance_m() * rng.gen_range(0.3..2.5);
                    let on = if rng.gen_bool(0.3) { !e.onscreen() } else { e.onscreen() };
                    out.push(f, SeldEvent::new(e.class_id(), az, d, on).unwrap(), task).unwrap();
                }
            }
            out.normalize();
            (id.clone(), out)
        })
        .collect()
}

fn single(az: f64, d: f64, on: bool) -> ClipSet {
    let mut clip = ClipPredictions::new("x", 1);
    clip.push(0, SeldEvent::new(1, az, d, on).unwrap(), &TaskConfig::default()).unwrap();
    BTreeMap::from([("x".to_string(), clip)])
}

fn c6_metrics() -> Outcome {
    let task = TaskConfig::default();
    let cfg = MetricsConfig::from_task(&task);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let x = random_clip_set(&mut rng, &task, 3);
        let r = score(&x, &x, &cfg).map_err(|e| e.to_string())?;
        check(
            (r.f1, r.doae, r.rde, r.onscreen_acc) == (100.0, Some(0.0), Some(0.0), Some(100.0)),
            format!("identity gave {}", r.summary_line()),
        )?;
    }

    let reference = single(0.0, 2.0, true);
    let r = score(&single(25.0, 2.0, true), &reference, &cfg).map_err(|e| e.to_string())?;
    check(
        (r.f1, r.doae, r.rde, r.onscreen_acc) == (0.0, Some(25.0), Some(0.0), Some(100.0)),
        format!("25 degree case gave {}", r.summary_line()),
    )?;
    let r = score(&single(0.0, 6.0, true), &reference, &cfg).map_err(|e| e.to_string())?;
    check((r.f1, r.doae, r.rde) == (0.0, Some(0.0), Some(2.0)), format!("distance case gave {}", r.summary_line()))?;
    let r = score(&single(5.0, 2.0, false), &reference, &cfg).map_err(|e| e.to_string())?;
    check(
        (r.f1, r.f1_on, r.doae, r.onscreen_acc) == (100.0, 0.0, Some(5.0), Some(0.0)),
        format!("on-screen case gave {}", r.summary_line()),
    )?;

    for case in 0..200 {
        let refs = random_clip_set(&mut rng, &task, 2);
        let preds = perturb_set(&mut rng, &refs, &task);
        if refs.values().all(|c| c.num_events() == 0) {
            continue;
        }
        let r = score(&preds, &refs, &cfg).map_err(|e| e.to_string())?;
        check(r.f1_on <= r.f1, format!("case {case}: F1o {} > F1 {}", r.f1_on, r.f1))?;
    }
    Ok("identity, 3 hand fixtures, F1o <= F1 on 200 sets".to_string())
}

fn study(noise: NoiseModel, clips: usize, trials: usize, seed: u64) -> StudyConfig {
    let task = TaskConfig::default();
    StudyConfig {
        scene: SceneConfig {
            num_clips: clips,
            max_concurrent: 2,
            trajectory: Trajectory::Static,
            rng_seed: seed,
            ..SceneConfig::default()
        },
        specialists: sim::three_specialists(&NoiseModel { rng_seed: seed, ..noise }),
        trials,
        ensemble: EnsembleConfig::default(),
        metrics: MetricsConfig::from_task(&task),
        task,
        workers: None,
    }
}

fn c7_monte_carlo() -> Outcome {
    let names = ["SL", "ST", "TL"];
    let noisy = NoiseModel {
        doa_noise_std_deg: 5.0,
        distance_noise_rel_std: 0.1,
        miss_rate: 0.1,
        false_positive_rate_per_frame: 0.2,
        onscreen_flip_rate: 0.1,
        ..NoiseModel::default()
    };
    let cfg = study(noisy, 10, 100, 77);
    let report = sim::ensemble_study(&cfg).map_err(|e| e.to_string())?;
    let mean = |mode: &str, f: fn(&sim::ModeSummary) -> Option<sim::Estimate>| {
        f(report.mode(mode).expect("mode present")).expect("estimate present").mean
    };

    // (a) F1 and (b) DOAE, averaged over trials
    let tos_f1 = mean("ToS", |m| m.f1);
    let tos_doae = mean("ToS", |m| m.doae);
    for s in names {
        check(tos_f1 > mean(s, |m| m.f1), format!("(a) ToS F1 {tos_f1:.2} vs {s} {:.2}", mean(s, |m| m.f1)))?;
        check(tos_doae < mean(s, |m| m.doae), format!("(b) ToS DOAE {tos_doae:.3} vs {s} {:.3}", mean(s, |m| m.doae)))?;
    }

    // majority FP count below every specialist's in >= 99% of trials
    let idx = sim::mode_index(&cfg);
    let fewer = report
        .trials
        .iter()
        .filter(|t| names.iter().all(|s| t.modes[idx["ToS"]].totals.fp() < t.modes[idx[*s]].totals.fp()))
        .count();
    check(fewer * 100 >= 99 * report.trials.len(), format!("majority had fewer FPs in only {fewer} trials"))?;

    // (d) every pairwise union against every single specialist, pooled counts
    let mut union_summary = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let u = &report.mode(&format!("Ens({a},{b})")).unwrap().pooled;
            for s in names {
                let p = &report.mode(s).unwrap().pooled;
                check(u.recall() >= p.recall(), format!("(d) Ens({a},{b}) recall {:?} < {s} {:?}", u.recall(), p.recall()))?;
                check(
                    u.precision() <= p.precision(),
                    format!("(d) Ens({a},{b}) precision {:?} > {s} {:?}", u.precision(), p.precision()),
                )?;
            }
            union_summary.push(format!("Ens({a},{b}) R {:.3} P {:.3}", u.recall().unwrap(), u.precision().unwrap()));
        }
    }

    // (c) no FPs, no misses: fused error shrinks like 1/sqrt(3)
    let clean = NoiseModel {
        doa_noise_std_deg: 5.0,
        ..NoiseModel::default()
    };
    let clean_cfg = study(clean, 10, 100, 78);
    let clean_report = sim::ensemble_study(&clean_cfg).map_err(|e| e.to_string())?;
    let pooled_doae = |m: &str| clean_report.mode(m).unwrap().pooled.doae().unwrap();
    let individual = names.iter().map(|s| pooled_doae(s)).sum::<f64>() / 3.0;
    let expected = individual / 3f64.sqrt();
    let fused = pooled_doae("ToS");
    let ratio = fused / expected;
    check((ratio - 1.0).abs() <= 0.10, format!("(c) fused DOAE {fused:.3} vs individual/sqrt3 {expected:.3}"))?;

    let clips = cfg.scene.num_clips * cfg.trials;
    Ok(format!(
        "{clips} clips/config; F1 ToS {tos_f1:.1} vs {}; DOAE ToS {tos_doae:.2} vs {}; FP suppression {fewer}/{}; clean ratio {ratio:.3}; {}",
        names.map(|s| format!("{s} {:.1}", mean(s, |m| m.f1))).join(" "),
        names.map(|s| format!("{s} {:.2}", mean(s, |m| m.doae))).join(" "),
        report.trials.len(),
        union_summary.join(", ")
    ))
}

fn dir_contents(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn c8_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("sim.conf");
    fs::write(
        &config,
        "num_clips = 20\ntrials = 40\nseed = 123\ntrajectory = drift\ndrift_deg_per_frame = 1.5\n\
         doa_noise_std_deg = 5\ndistance_noise_rel_std = 0.1\nmiss_rate = 0.1\nfp_rate = 0.2\nonscreen_flip_rate = 0.1\n",
    )
    .map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (name, workers) in [("a", None), ("b", None), ("w1", Some(1)), ("w4", Some(4))] {
        let out = dir.path().join(name);
        cli::cmd_simulate(&config, &out, workers).map_err(|e| e.to_string())?;
        runs.push((name, dir_contents(&out)));
    }
    let (_, first) = &runs[0];
    check(first.len() > 5, format!("only {} files written", first.len()))?;
    for (name, files) in &runs[1..] {
        check(files == first, format!("run {name} differs from run a"))?;
    }
    let bytes: usize = first.values().map(Vec::len).sum();
    Ok(format!("{} files, {bytes} bytes identical over 2 runs and 1/4/default workers", first.len()))
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 feature-shape contract", c1_feature_shapes, Duration::from_secs(1)),
        ("2 ILD identity suite", c2_ild_identities, Duration::from_secs(10)),
        ("3 pooling-schedule trace", c3_pooling_trace, Duration::from_millis(100)),
        ("4 ACCDDOA round trip", c4_accddoa_round_trip, Duration::from_secs(5)),
        ("5 ensemble oracle equivalence", c5_ensemble_oracle, Duration::from_secs(30)),
        ("6 metric identity and hand cases", c6_metrics, Duration::from_secs(10)),
        ("7 Monte-Carlo ensemble behavior", c7_monte_carlo, Duration::from_secs(120)),
        ("8 simulation determinism", c8_determinism, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let line = match outcome {
            Ok(detail) if elapsed <= limit => format!("PASS criterion {name} ({elapsed:.2?}): {detail}"),
            Ok(detail) => format!("FAIL criterion {name} ({elapsed:.2?} > {limit:?}): {detail}"),
            Err(why) => format!("FAIL criterion {name} ({elapsed:.2?}): {why}"),
        };
        if line.starts_with("FAIL") {
            failed += 1;
        }
        println!("{line}");
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
