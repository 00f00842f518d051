//! Location- and distance-thresholded detection scores at label-frame
//! resolution.
//!
//! Per frame and class, predictions and references are paired by a
//! minimum total angular distance assignment. A pair is a true positive
//! when it is within the angular threshold and the relative distance
//! threshold (and, for `f1_on`, agrees on the on-screen flag). DOAE, RDE
//! and on/off-screen accuracy are averaged over every matched pair
//! regardless of thresholds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use crate::assignment::min_cost_assignment;
use crate::domain::{ClipSet, SeldEvent, TaskConfig};
use crate::error::{Error, Result};

// Secondary matching terms that only break exact angular ties.
const DISTANCE_TIE_WEIGHT: f64 = 1e-7;
const ONSCREEN_TIE_WEIGHT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Mean of per-class F1 over classes present in the reference.
    Macro,
    /// F1 of pooled counts.
    Micro,
}

impl FromStr for Averaging {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macro" => Ok(Averaging::Macro),
            "micro" => Ok(Averaging::Micro),
            other => Err(Error::invalid(format!("unknown averaging {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    pub angular_threshold_deg: f64,
    pub rde_threshold: f64,
    /// Headline F1 is the on-screen-aware variant.
    pub require_onscreen_match: bool,
    pub averaging: Averaging,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            angular_threshold_deg: 20.0,
            rde_threshold: 1.0,
            require_onscreen_match: false,
            averaging: Averaging::Macro,
        }
    }
}

impl MetricsConfig {
    pub fn from_task(task: &TaskConfig) -> Self {
        Self {
            angular_threshold_deg: task.angular_threshold_deg,
            rde_threshold: task.rde_threshold,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.angular_threshold_deg > 0.0 && self.rde_threshold > 0.0) {
            return Err(Error::invalid("metric thresholds must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// (prediction index, reference index)
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_refs: Vec<usize>,
    /// Summed angular distance of the pairs, degrees.
    pub total_angle_deg: f64,
}

fn relative_distance_error(pred: &SeldEvent, reference: &SeldEvent) -> f64 {
    (pred.distance_m() - reference.distance_m()).abs() / reference.distance_m()
}

/// Optimal one-to-one pairing of same-class predictions and references by
/// angular distance. No threshold is applied here.
pub fn match_frame(preds: &[SeldEvent], refs: &[SeldEvent]) -> Matching {
    let cost: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| {
            refs.iter()
                .map(|r| {
                    (p.azimuth_deg() - r.azimuth_deg()).abs()
                        + DISTANCE_TIE_WEIGHT * relative_distance_error(p, r).min(1.0)
                        + if p.onscreen() == r.onscreen() { 0.0 } else { ONSCREEN_TIE_WEIGHT }
                })
                .collect()
        })
        .collect();
    let pairs = min_cost_assignment(&cost);
    let used_p: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
    let used_r: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
    Matching {
        total_angle_deg: pairs
            .iter()
            .map(|&(p, r)| (preds[p].azimuth_deg() - refs[r].azimuth_deg()).abs())
            .sum(),
        unmatched_preds: (0..preds.len()).filter(|i| !used_p.contains(i)).collect(),
        unmatched_refs: (0..refs.len()).filter(|i| !used_r.contains(i)).collect(),
        pairs,
    }
}

/// Raw per-class tallies. Combine with `add` for parallel reduction.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassCounts {
    pub num_preds: u64,
    pub num_refs: u64,
    pub tp: u64,
    pub tp_on: u64,
    pub pairs: u64,
    pub angle_sum: f64,
    pub rel_dist_sum: f64,
    pub onscreen_agree: u64,
}

impl ClassCounts {
    pub fn add(&mut self, o: &ClassCounts) {
        self.num_preds += o.num_preds;
        self.num_refs += o.num_refs;
        self.tp += o.tp;
        self.tp_on += o.tp_on;
        self.pairs += o.pairs;
        self.angle_sum += o.angle_sum;
        self.rel_dist_sum += o.rel_dist_sum;
        self.onscreen_agree += o.onscreen_agree;
    }

    pub fn fp(&self) -> u64 {
        self.num_preds - self.tp
    }

    pub fn fn_(&self) -> u64 {
        self.num_refs - self.tp
    }

    fn f1_from(tp: u64, preds: u64, refs: u64) -> f64 {
        let denom = preds + refs;
        if denom == 0 {
            100.0
        } else {
            100.0 * 2.0 * tp as f64 / denom as f64
        }
    }

    pub fn f1(&self) -> f64 {
        Self::f1_from(self.tp, self.num_preds, self.num_refs)
    }

    pub fn f1_on(&self) -> f64 {
        Self::f1_from(self.tp_on, self.num_preds, self.num_refs)
    }

    pub fn precision(&self) -> Option<f64> {
        (self.num_preds > 0).then(|| 100.0 * self.tp as f64 / self.num_preds as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        (self.num_refs > 0).then(|| 100.0 * self.tp as f64 / self.num_refs as f64)
    }

    pub fn doae(&self) -> Option<f64> {
        (self.pairs > 0).then(|| self.angle_sum / self.pairs as f64)
    }

    pub fn rde(&self) -> Option<f64> {
        (self.pairs > 0).then(|| self.rel_dist_sum / self.pairs as f64)
    }

    pub fn onscreen_acc(&self) -> Option<f64> {
        (self.pairs > 0).then(|| 100.0 * self.onscreen_agree as f64 / self.pairs as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Percent.
    pub f1: f64,
    /// Percent, on-screen flag must also match.
    pub f1_on: f64,
    /// Degrees; `None` when nothing was matched.
    pub doae: Option<f64>,
    /// Mean relative distance error as a ratio (printed as percent).
    pub rde: Option<f64>,
    /// Percent.
    pub onscreen_acc: Option<f64>,
    pub per_class: BTreeMap<usize, ClassCounts>,
    pub totals: ClassCounts,
    pub averaging: Averaging,
    pub onscreen_headline: bool,
}

impl MetricsReport {
    pub fn from_counts(per_class: BTreeMap<usize, ClassCounts>, cfg: &MetricsConfig) -> Self {
        let mut totals = ClassCounts::default();
        for c in per_class.values() {
            totals.add(c);
        }
        let (f1, f1_on) = match cfg.averaging {
            Averaging::Micro => (totals.f1(), totals.f1_on()),
            Averaging::Macro => {
                let present: Vec<&ClassCounts> = per_class.values().filter(|c| c.num_refs > 0).collect();
                let n = present.len().max(1) as f64;
                (
                    present.iter().map(|c| c.f1()).sum::<f64>() / n,
                    present.iter().map(|c| c.f1_on()).sum::<f64>() / n,
                )
            }
        };
        Self {
            f1,
            f1_on,
            doae: totals.doae(),
            rde: totals.rde(),
            onscreen_acc: totals.onscreen_acc(),
            per_class,
            totals,
            averaging: cfg.averaging,
            onscreen_headline: cfg.require_onscreen_match,
        }
    }

    /// `F1 100.0 DOAE 0.0 RDE 0.0 Acc 100.0`, or `F1o ...` for the
    /// on-screen-aware headline.
    pub fn summary_line(&self) -> String {
        let (name, f1) = if self.onscreen_headline { ("F1o", self.f1_on) } else { ("F1", self.f1) };
        format!(
            "{name} {} DOAE {} RDE {} Acc {}",
            fmt1(Some(f1)),
            fmt1(self.doae),
            fmt1(self.rde.map(|r| 100.0 * r)),
            fmt1(self.onscreen_acc)
        )
    }

    /// Summary plus a per-class table.
    pub fn to_table(&self) -> String {
        let mut s = self.summary_line();
        s.push('\n');
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
            "class", "F1", "F1o", "DOAE", "RDE", "Acc", "TP", "FP", "FN"
        );
        for (class, c) in &self.per_class {
            let _ = writeln!(
                s,
                "{:>5} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
                class,
                fmt1(Some(c.f1())),
                fmt1(Some(c.f1_on())),
                fmt1(c.doae()),
                fmt1(c.rde().map(|r| 100.0 * r)),
                fmt1(c.onscreen_acc()),
                c.tp,
                c.fp(),
                c.fn_()
            );
        }
        s
    }

    /// One `key=value` per line, one decimal place.
    pub fn to_kv(&self) -> String {
        let t = &self.totals;
        let mut s = String::new();
        for (k, v) in [
            ("f1", Some(self.f1)),
            ("f1_on", Some(self.f1_on)),
            ("doae", self.doae),
            ("rde", self.rde.map(|r| 100.0 * r)),
            ("acc", self.onscreen_acc),
            ("precision", t.precision()),
            ("recall", t.recall()),
        ] {
            let _ = writeln!(s, "{k}={}", fmt1(v));
        }
        let _ = writeln!(s, "tp={}\nfp={}\nfn={}", t.tp, t.fp(), t.fn_());
        s
    }
}

pub(crate) fn fmt1(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.1}"),
        None => "nan".to_string(),
    }
}

/// Tallies one frame of one class.
pub fn count_frame(preds: &[SeldEvent], refs: &[SeldEvent], cfg: &MetricsConfig) -> ClassCounts {
    let m = match_frame(preds, refs);
    let mut c = ClassCounts {
        num_preds: preds.len() as u64,
        num_refs: refs.len() as u64,
        ..ClassCounts::default()
    };
    for &(pi, ri) in &m.pairs {
        let (p, r) = (&preds[pi], &refs[ri]);
        let angle = (p.azimuth_deg() - r.azimuth_deg()).abs();
        let rel = relative_distance_error(p, r);
        let same_screen = p.onscreen() == r.onscreen();
        c.pairs += 1;
        c.angle_sum += angle;
        c.rel_dist_sum += rel;
        c.onscreen_agree += same_screen as u64;
        if angle <= cfg.angular_threshold_deg && rel <= cfg.rde_threshold {
            c.tp += 1;
            c.tp_on += same_screen as u64;
        }
    }
    c
}

/// Per-class tallies over whole clip sets.
pub fn count(preds: &ClipSet, refs: &ClipSet, cfg: &MetricsConfig) -> Result<BTreeMap<usize, ClassCounts>> {
    cfg.validate()?;
    let pk: BTreeSet<&String> = preds.keys().collect();
    let rk: BTreeSet<&String> = refs.keys().collect();
    if pk != rk {
        return Err(Error::ClipMismatch(pk.symmetric_difference(&rk).map(|s| s.to_string()).collect()));
    }
    let mut per_class: BTreeMap<usize, ClassCounts> = BTreeMap::new();
    for (id, reference) in refs {
        let pred = &preds[id];
        let frames: BTreeSet<usize> = pred.frames().chain(reference.frames()).map(|(f, _)| f).collect();
        for f in frames {
            let (pf, rf) = (pred.frame(f), reference.frame(f));
            let classes: BTreeSet<usize> = pf.iter().chain(rf).map(SeldEvent::class_id).collect();
            for class in classes {
                let p: Vec<SeldEvent> = pf.iter().filter(|e| e.class_id() == class).copied().collect();
                let r: Vec<SeldEvent> = rf.iter().filter(|e| e.class_id() == class).copied().collect();
                per_class.entry(class).or_default().add(&count_frame(&p, &r, cfg));
            }
        }
    }
    Ok(per_class)
}

pub fn score(preds: &ClipSet, refs: &ClipSet, cfg: &MetricsConfig) -> Result<MetricsReport> {
    if refs.values().all(|c| c.num_events() == 0) {
        return Err(Error::invalid("reference contains no events; recall is undefined"));
    }
    Ok(MetricsReport::from_counts(count(preds, refs, cfg)?, cfg))
}
