//! Fusion of specialist predictions.
//!
//! Majority mode keeps an event only when at least `min_votes` specialists
//! report the same class with mutually close azimuths (every pair of
//! members within the angular threshold). Union mode, for two
//! specialists, merges close same-class pairs and keeps everything else.
//!
//! Both modes share one exact search: among all ways to group one event
//! per specialist into valid clusters, pick the grouping that clusters the
//! most events, then has the smallest summed pairwise angular spread, then
//! comes first in (specialist, track) order. Each specialist contributes at
//! most a handful of events per class per frame, so exhaustive search is
//! cheap.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::domain::{angular_distance, mean_azimuth, ClipPredictions, ClipSet, SeldEvent, TaskConfig};
use crate::error::{Error, Result};

/// Sums closer than this are treated as tied.
const COST_TOLERANCE: f64 = 1e-9;
const MAX_EVENTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecialistId {
    SpatioLinguistic,
    SpatioTemporal,
    TempoLinguistic,
    Named(String),
}

impl fmt::Display for SpecialistId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecialistId::SpatioLinguistic => f.write_str("SL"),
            SpecialistId::SpatioTemporal => f.write_str("ST"),
            SpecialistId::TempoLinguistic => f.write_str("TL"),
            SpecialistId::Named(name) => f.write_str(name),
        }
    }
}

impl FromStr for SpecialistId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "SL" => SpecialistId::SpatioLinguistic,
            "ST" => SpecialistId::SpatioTemporal,
            "TL" => SpecialistId::TempoLinguistic,
            other => SpecialistId::Named(other.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecialistOutput {
    pub id: SpecialistId,
    pub clips: ClipSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnscreenRule {
    /// OR over the cluster's own members.
    AnyContributing,
    /// OR over every same-class detection within the threshold of the fused azimuth.
    AnySpecialist,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub angular_threshold_deg: f64,
    pub min_votes: usize,
    pub onscreen_rule: OnscreenRule,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            angular_threshold_deg: 20.0,
            min_votes: 2,
            onscreen_rule: OnscreenRule::AnyContributing,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_votes < 2 {
            return Err(Error::invalid("min_votes must be at least 2"));
        }
        if !(self.angular_threshold_deg > 0.0 && self.angular_threshold_deg.is_finite()) {
            return Err(Error::invalid("angular threshold must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    Majority,
    Union,
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "majority" => Ok(FusionMode::Majority),
            "union" => Ok(FusionMode::Union),
            other => Err(Error::invalid(format!("unknown fusion mode {other:?}"))),
        }
    }
}

/// One source event inside a cluster: which specialist, which position in
/// that specialist's list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Member {
    pub specialist: usize,
    pub track: usize,
    pub event: SeldEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub members: Vec<Member>,
    pub fused: SeldEvent,
}

/// A grouping of source events, each group listed as (specialist, track).
pub type Grouping = Vec<Vec<(usize, usize)>>;

/// Exact best grouping of same-class events into clusters of at least
/// `min_votes` members, at most one per specialist, pairwise within
/// `threshold`. Groups and their members are in ascending order.
pub fn best_grouping(lists: &[&[SeldEvent]], threshold: f64, min_votes: usize) -> Result<Grouping> {
    let index: Vec<(usize, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(s, l)| (0..l.len()).map(move |t| (s, t)))
        .collect();
    if index.len() > MAX_EVENTS {
        return Err(Error::invalid(format!(
            "{} events in one frame and class exceed the fusion limit of {MAX_EVENTS}",
            index.len()
        )));
    }
    let az = |i: usize| lists[index[i].0][index[i].1].azimuth_deg();

    // every admissible clique as (bitmask, summed pairwise spread)
    let mut cliques: Vec<(u64, f64)> = Vec::new();
    let offsets: Vec<usize> = lists
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += l.len();
            Some(o)
        })
        .collect();
    let mut choice = vec![None; lists.len()];
    enumerate_choices(lists, 0, &mut choice, &mut |choice| {
        let members: Vec<usize> = choice
            .iter()
            .enumerate()
            .filter_map(|(s, c)| c.map(|t| offsets[s] + t))
            .collect();
        if members.len() < min_votes {
            return;
        }
        let mut spread = 0.0;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let d = (az(i) - az(j)).abs();
                if d > threshold {
                    return;
                }
                spread += d;
            }
        }
        let mask = members.iter().fold(0u64, |m, &i| m | (1 << i));
        cliques.push((mask, spread));
    });

    let mut search = Search {
        cliques: &cliques,
        best: None,
        stack: Vec::new(),
    };
    let all = if index.len() == 64 { u64::MAX } else { (1u64 << index.len()) - 1 };
    search.run(all, 0, 0.0);

    let (_, _, masks) = search.best.expect("the empty grouping is always admissible");
    Ok(masks
        .into_iter()
        .map(|m| (0..index.len()).filter(|&i| m & (1 << i) != 0).map(|i| index[i]).collect())
        .collect())
}

fn enumerate_choices(lists: &[&[SeldEvent]], s: usize, choice: &mut Vec<Option<usize>>, visit: &mut impl FnMut(&[Option<usize>])) {
    if s == lists.len() {
        visit(choice);
        return;
    }
    choice[s] = None;
    enumerate_choices(lists, s + 1, choice, visit);
    for t in 0..lists[s].len() {
        choice[s] = Some(t);
        enumerate_choices(lists, s + 1, choice, visit);
    }
    choice[s] = None;
}

struct Search<'a> {
    cliques: &'a [(u64, f64)],
    // (clustered events, spread, group masks sorted by lowest member)
    best: Option<(u32, f64, Vec<u64>)>,
    stack: Vec<u64>,
}

impl Search<'_> {
    fn run(&mut self, remaining: u64, clustered: u32, spread: f64) {
        if remaining == 0 {
            self.offer(clustered, spread);
            return;
        }
        let low = remaining.trailing_zeros();
        let bit = 1u64 << low;
        self.run(remaining & !bit, clustered, spread);
        for &(mask, cost) in self.cliques {
            // each grouping is visited once: a clique is placed when its lowest member comes up
            if mask & bit != 0 && mask & !remaining == 0 {
                self.stack.push(mask);
                self.run(remaining & !mask, clustered + mask.count_ones(), spread + cost);
                self.stack.pop();
            }
        }
    }

    fn offer(&mut self, clustered: u32, spread: f64) {
        let better = match &self.best {
            None => true,
            Some((n, s, masks)) => {
                if clustered != *n {
                    clustered > *n
                } else if (spread - s).abs() > COST_TOLERANCE {
                    spread < *s
                } else {
                    grouping_key(&self.stack) < grouping_key(masks)
                }
            }
        };
        if better {
            self.best = Some((clustered, spread, self.stack.clone()));
        }
    }
}

/// Groups as ascending member lists; bit order matches (specialist, track) order.
fn grouping_key(masks: &[u64]) -> Vec<Vec<u32>> {
    let mut groups: Vec<Vec<u32>> = masks
        .iter()
        .map(|&m| (0..64).filter(|&i| m & (1u64 << i) != 0).collect())
        .collect();
    groups.sort();
    groups
}

fn fuse_members(members: &[Member], all: &[&[SeldEvent]], cfg: &EnsembleConfig) -> Result<SeldEvent> {
    let azimuths: Vec<f64> = members.iter().map(|m| m.event.azimuth_deg()).collect();
    let azimuth = mean_azimuth(&azimuths)?;
    let distance = members.iter().map(|m| m.event.distance_m()).sum::<f64>() / members.len() as f64;
    let mut onscreen = members.iter().any(|m| m.event.onscreen());
    if cfg.onscreen_rule == OnscreenRule::AnySpecialist {
        onscreen |= all
            .iter()
            .flat_map(|l| l.iter())
            .any(|e| e.onscreen() && (e.azimuth_deg() - azimuth).abs() <= cfg.angular_threshold_deg);
    }
    SeldEvent::new(members[0].event.class_id(), azimuth, distance, onscreen)
}

fn single_class(lists: &[&[SeldEvent]]) -> Result<Option<usize>> {
    let classes: BTreeSet<usize> = lists.iter().flat_map(|l| l.iter()).map(SeldEvent::class_id).collect();
    match classes.len() {
        0 => Ok(None),
        1 => Ok(classes.into_iter().next()),
        _ => Err(Error::invalid(format!("fusion input mixes classes {classes:?}"))),
    }
}

fn clusters_for(lists: &[&[SeldEvent]], cfg: &EnsembleConfig, min_votes: usize) -> Result<Vec<Cluster>> {
    let grouping = best_grouping(lists, cfg.angular_threshold_deg, min_votes)?;
    grouping
        .into_iter()
        .map(|group| {
            let members: Vec<Member> = group
                .into_iter()
                .map(|(s, t)| Member {
                    specialist: s,
                    track: t,
                    event: lists[s][t],
                })
                .collect();
            let fused = fuse_members(&members, lists, cfg)?;
            Ok(Cluster { members, fused })
        })
        .collect()
}

/// Majority vote over same-frame, same-class event lists, one per specialist.
pub fn fuse_frame_majority(per_specialist: &[Vec<SeldEvent>], cfg: &EnsembleConfig) -> Result<Vec<Cluster>> {
    cfg.validate()?;
    if per_specialist.len() < cfg.min_votes {
        return Err(Error::invalid(format!(
            "majority fusion with min_votes={} needs at least that many specialists, got {}",
            cfg.min_votes,
            per_specialist.len()
        )));
    }
    let lists: Vec<&[SeldEvent]> = per_specialist.iter().map(Vec::as_slice).collect();
    single_class(&lists)?;
    clusters_for(&lists, cfg, cfg.min_votes)
}

/// Two-specialist union: close same-class pairs are merged, everything
/// else from either side is kept. Output is in canonical order.
pub fn fuse_frame_union(a: &[SeldEvent], b: &[SeldEvent], cfg: &EnsembleConfig) -> Result<Vec<SeldEvent>> {
    cfg.validate()?;
    let classes: BTreeSet<usize> = a.iter().chain(b).map(SeldEvent::class_id).collect();
    let mut out = Vec::with_capacity(a.len() + b.len());
    for class in classes {
        let pa: Vec<SeldEvent> = a.iter().filter(|e| e.class_id() == class).copied().collect();
        let pb: Vec<SeldEvent> = b.iter().filter(|e| e.class_id() == class).copied().collect();
        let lists = [pa.as_slice(), pb.as_slice()];
        let clusters = clusters_for(&lists, cfg, 2)?;
        let mut used = BTreeSet::new();
        for c in &clusters {
            out.push(c.fused);
            used.extend(c.members.iter().map(|m| (m.specialist, m.track)));
        }
        for (s, list) in lists.iter().enumerate() {
            out.extend(list.iter().enumerate().filter(|(t, _)| !used.contains(&(s, *t))).map(|(_, e)| *e));
        }
    }
    out.sort_by(SeldEvent::canonical_cmp);
    Ok(out)
}

fn fuse_frame(frames: &[&[SeldEvent]], cfg: &EnsembleConfig, mode: FusionMode) -> Result<Vec<SeldEvent>> {
    match mode {
        FusionMode::Union => fuse_frame_union(frames[0], frames[1], cfg),
        FusionMode::Majority => {
            let classes: BTreeSet<usize> = frames.iter().flat_map(|f| f.iter()).map(SeldEvent::class_id).collect();
            let mut out = Vec::new();
            for class in classes {
                let per: Vec<Vec<SeldEvent>> = frames
                    .iter()
                    .map(|f| f.iter().filter(|e| e.class_id() == class).copied().collect())
                    .collect();
                out.extend(fuse_frame_majority(&per, cfg)?.into_iter().map(|c| c.fused));
            }
            out.sort_by(SeldEvent::canonical_cmp);
            Ok(out)
        }
    }
}

/// Frame-aligned fusion of whole specialist outputs.
pub fn fuse_clips(outputs: &[SpecialistOutput], cfg: &EnsembleConfig, mode: FusionMode, task: &TaskConfig) -> Result<ClipSet> {
    cfg.validate()?;
    match mode {
        FusionMode::Union if outputs.len() != 2 => {
            return Err(Error::invalid(format!(
                "union fusion is pairwise, got {} specialists",
                outputs.len()
            )));
        }
        FusionMode::Majority if outputs.len() < cfg.min_votes => {
            return Err(Error::invalid(format!(
                "majority fusion needs at least {} specialists, got {}",
                cfg.min_votes,
                outputs.len()
            )));
        }
        _ => {}
    }
    let ids: Vec<BTreeSet<&String>> = outputs.iter().map(|o| o.clips.keys().collect()).collect();
    let every: BTreeSet<&String> = ids.iter().flatten().copied().collect();
    let mismatched: Vec<String> = every
        .iter()
        .filter(|id| !ids.iter().all(|s| s.contains(*id)))
        .map(|s| s.to_string())
        .collect();
    if !mismatched.is_empty() {
        return Err(Error::ClipMismatch(mismatched));
    }

    let fused: Vec<ClipPredictions> = every
        .par_iter()
        .map(|&id| {
            let clips: Vec<&ClipPredictions> = outputs.iter().map(|o| &o.clips[id]).collect();
            let num_frames = clips[0].num_frames();
            if let Some(c) = clips.iter().find(|c| c.num_frames() != num_frames) {
                return Err(Error::invalid(format!(
                    "clip {id}: frame counts differ ({num_frames} vs {})",
                    c.num_frames()
                )));
            }
            let frame_ids: BTreeSet<usize> = clips.iter().flat_map(|c| c.frames().map(|(f, _)| f)).collect();
            let mut out = ClipPredictions::new(id.as_str(), num_frames);
            for f in frame_ids {
                let per: Vec<&[SeldEvent]> = clips.iter().map(|c| c.frame(f)).collect();
                for e in fuse_frame(&per, cfg, mode)? {
                    out.push(f, e, task)?;
                }
            }
            out.normalize();
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(fused.into_iter().map(|c| (c.clip_id().to_string(), c)).collect::<BTreeMap<_, _>>())
}

/// Largest pairwise angular distance among a cluster's members.
pub fn cluster_spread(cluster: &Cluster) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in cluster.members.iter().enumerate() {
        for b in &cluster.members[i + 1..] {
            let d = angular_distance(a.event.azimuth_deg(), b.event.azimuth_deg()).expect("validated azimuths");
            worst = worst.max(d);
        }
    }
    worst
}
